//! Regression against values computed independently by
//! `tests/oracles/gen_fixtures.py`.

use markovest::channel::{dropout_from_snr, MarkovChannel};
use markovest::cycle::{analytic_mse, cycle_model, stability_margin, Mse};
use markovest::lti::{ErrorTrace, LtiSystem};
use markovest::matrix::Matrix;
use serde::Deserialize;

#[derive(Deserialize)]
struct Reference {
    rho_dm: f64,
    rho_a: f64,
    sigma_a: f64,
    p0bar: Vec<Vec<f64>>,
    trace_p0bar: f64,
    c: Vec<f64>,
    g_matrix: Vec<Vec<f64>>,
    beta: Vec<f64>,
    pmf_state1: Vec<f64>,
    expected_length: f64,
    analytic_j: f64,
    dropout_snr300: f64,
    dropout_snr250: f64,
}

fn reference() -> Reference {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/pendubot_reference.json"
    );
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn pendubot() -> LtiSystem {
    let a = Matrix::from_rows(&[
        [1.0058, 0.0150, -0.0016, 0.0000],
        [0.7808, 1.0058, -0.2105, -0.0016],
        [-0.0060, 0.0000, 1.0077, 0.0150],
        [-0.7962, -0.0060, 1.0294, 1.0077],
    ])
    .unwrap();
    let c = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]).unwrap();
    let w = Matrix::outer(&[0.003, 1.0, -0.005, -2.150]);
    LtiSystem::new(a, c, w, Matrix::identity(2).scale(0.001)).unwrap()
}

fn default_channel() -> MarkovChannel {
    MarkovChannel::new(
        Matrix::from_rows(&[[0.1, 0.9], [0.5, 0.5]]).unwrap(),
        vec![0.8, 0.1],
    )
    .unwrap()
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(1e-300)
}

#[test]
fn spectra_and_margin() {
    let r = reference();
    let s = stability_margin(pendubot().a(), &default_channel()).unwrap();
    assert!(close(s.rho_a, r.rho_a, 1e-9), "{}", s.rho_a);
    assert!(close(s.sigma_a, r.sigma_a, 1e-9), "{}", s.sigma_a);
    assert!(close(s.rho_dm, r.rho_dm, 1e-12), "{}", s.rho_dm);
    assert!(s.stable_thm1);
}

#[test]
fn riccati_and_error_trace() {
    let r = reference();
    let sys = pendubot();
    let f = sys.riccati_steady_state(1e-14, 100_000).unwrap();
    assert!(close(f.posterior.trace(), r.trace_p0bar, 1e-9));
    for (i, row) in r.p0bar.iter().enumerate() {
        for (j, &want) in row.iter().enumerate() {
            assert!((f.posterior[(i, j)] - want).abs() < 1e-9 * r.trace_p0bar);
        }
    }
    for (idx, c) in sys.error_traces(&f).take(r.c.len()).enumerate() {
        let ErrorTrace::Finite(c) = c else {
            panic!("saturated")
        };
        assert!(
            close(c, r.c[idx], 1e-9),
            "c({}) = {c}, want {}",
            idx + 1,
            r.c[idx]
        );
    }
}

#[test]
fn cycle_model_values() {
    let r = reference();
    let ch = default_channel();
    let m = cycle_model(&ch).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((m.g[(i, j)] - r.g_matrix[i][j]).abs() < 1e-12);
        }
    }
    for (b, want) in m.beta_padded().iter().zip(&r.beta) {
        assert!((b - want).abs() < 1e-12);
    }
    let pmf = m.length_pmf_table(0, r.pmf_state1.len()).unwrap();
    for (got, want) in pmf.iter().zip(&r.pmf_state1) {
        assert!((got - want).abs() < 1e-14);
    }
    assert!(close(
        m.expected_length().unwrap(),
        r.expected_length,
        1e-12
    ));
}

#[test]
fn analytic_mse_value() {
    let r = reference();
    let sys = pendubot();
    let f = sys.riccati_steady_state(1e-14, 100_000).unwrap();
    let Mse::Finite(est) = analytic_mse(&sys, &f, &default_channel(), 1e-9).unwrap() else {
        panic!("expected a finite MSE")
    };
    assert!(close(est.j, r.analytic_j, 1e-8), "{}", est.j);
    assert!(close(est.expected_length.unwrap(), r.expected_length, 1e-9));
    assert!(est.tail_bound <= 1e-9);
}

#[test]
fn finite_blocklength_dropout() {
    let r = reference();
    assert!(close(
        dropout_from_snr(300.0, 200, 8.0).unwrap(),
        r.dropout_snr300,
        1e-6
    ));
    assert!(close(
        dropout_from_snr(250.0, 200, 8.0).unwrap(),
        r.dropout_snr250,
        1e-6
    ));
}
