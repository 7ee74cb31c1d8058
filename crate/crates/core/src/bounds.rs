//! Numerical checks of the matrix-power envelopes behind the stability
//! proof.
//!
//! Every power sequence is tracked as a log-magnitude with a normalised
//! matrix ([`ScaledPowers`]), so ranges of a few hundred steps are safe for
//! spectral radii well above one. Constants and burn-in indices are fitted
//! from the data; only their existence is known.
//!
//! A sequence `r(i)` is periodically lower bounded by `r̲(i)` with period
//! `l` if `max{r(i), …, r(i+l−1)} ≥ r̲(i)` for all `i ≥ N`.

use std::ops::RangeInclusive;

use serde::Serialize;
use thiserror::Error;

use crate::channel::MarkovChannel;
use crate::lti::{ErrorTrace, LtiSystem, SteadyStateFilter, SystemError};
use crate::matrix::{
    perron_root, psd_sqrt, rank, spectral_radius, Matrix, MatrixError, ScaledPowers,
    DEFAULT_RANK_TOL, DEFAULT_TOL,
};

/// Default index range for all checks.
pub const DEFAULT_RANGE: RangeInclusive<usize> = 1..=200;

/// A fitted lower envelope may not drop below this fraction of the
/// sequence's own peak over the tail.
const COLLAPSE_RATIO: f64 = 1e-8;
/// Minimum over the last quarter of the tail, relative to the third quarter.
const DECAY_RATIO: f64 = 0.5;
/// Shortest tail a fit is accepted on.
const MIN_TAIL: usize = 8;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("index range {lo}..={hi} is too short or starts at 0")]
    Range { lo: usize, hi: usize },
    #[error("powers left the representable range at i = {index}")]
    Overflow { index: usize },
    #[error("spectral radius is zero; no lower envelope exists")]
    ZeroSpectralRadius,
    #[error("(Z, √Q) is not controllable (rank {rank} < {dim})")]
    Uncontrollable { rank: usize, dim: usize },
    #[error("excluded channel: {0}")]
    ExcludedChannel(&'static str),
    #[error("c(i) saturated at i = {index}; shorten the range")]
    Saturated { index: usize },
}

/// Outcome of an envelope fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFit {
    /// Exponential base of the envelope.
    pub base: f64,
    /// Fitted `κ` (upper bounds) or `η` (lower bounds).
    pub constant: f64,
    /// The envelope holds for every tested `i > burn_in`.
    pub burn_in: usize,
    pub period: usize,
    /// Zero-based entry `(j, k)` the fit refers to.
    pub witness: (usize, usize),
    pub pass: bool,
}

impl EnvelopeFit {
    fn failed(base: f64) -> Self {
        Self {
            base,
            constant: f64::NAN,
            burn_in: 0,
            period: 0,
            witness: (0, 0),
            pass: false,
        }
    }
}

fn check_range(range: &RangeInclusive<usize>) -> Result<(usize, usize), BoundsError> {
    let (lo, hi) = (*range.start(), *range.end());
    if lo == 0 || hi < lo + 2 * MIN_TAIL {
        return Err(BoundsError::Range { lo, hi });
    }
    Ok((lo, hi))
}

/// `ln |[Zⁱ R]_{j,k}|` for `i` in `range`, row-major per `i`.
fn log_power_entries(
    z: &Matrix,
    right: Option<&Matrix>,
    lo: usize,
    hi: usize,
) -> Result<(usize, Vec<Vec<f64>>), BoundsError> {
    z.ensure_square()?;
    let mut powers = ScaledPowers::new(z);
    let cols = right.map_or(z.cols(), Matrix::cols);
    let mut out = Vec::with_capacity(hi - lo + 1);
    for i in 1..=hi {
        powers.step();
        if powers.log_scale().is_nan() || powers.log_scale() == f64::INFINITY {
            return Err(BoundsError::Overflow { index: i });
        }
        if i >= lo {
            let m = match right {
                Some(r) => powers.normalized() * r,
                None => powers.normalized().clone(),
            };
            out.push(
                m.as_slice()
                    .iter()
                    .map(|x| powers.log_scale() + x.abs().ln())
                    .collect(),
            );
        }
    }
    Ok((cols, out))
}

/// Smallest burn-in after which `u` never exceeds its first tail value and
/// ends strictly below it. Returns `(burn_in offset, max over tail)`.
fn fit_decreasing_tail(u: &[f64]) -> Option<(usize, f64)> {
    let last = *u.last()?;
    for start in 0..=u.len().saturating_sub(MIN_TAIL).min(u.len() / 2) {
        let head = u[start];
        if head.is_finite() && last < head && u[start..].iter().all(|&x| x <= head) {
            return Some((start, head));
        }
    }
    None
}

/// `|[Zⁱ]_{j,k}|² < κ (ρ(Z) + ε)^{2i}` for all entries and all tested
/// `i > N`. `κ` is the tail maximum of `|[Zⁱ]|²_max / (ρ + ε)^{2i}` and
/// the fit passes when that ratio peaks at the start of the tail and has
/// fallen by the end of the range.
pub fn check_upper_bound(
    z: &Matrix,
    epsilon: f64,
    range: RangeInclusive<usize>,
) -> Result<EnvelopeFit, BoundsError> {
    if !(epsilon > 0.0) {
        return Err(BoundsError::Epsilon(epsilon));
    }
    let (lo, hi) = check_range(&range)?;
    let rho = spectral_radius(z, DEFAULT_TOL, 64)?.value;
    let base = rho + epsilon;
    let (cols, entries) = log_power_entries(z, None, lo, hi)?;
    let mut argmax = Vec::with_capacity(entries.len());
    let u: Vec<f64> = entries
        .iter()
        .enumerate()
        .map(|(idx, row)| {
            let (k, m) = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |b, (k, &x)| if x > b.1 { (k, x) } else { b },
                );
            argmax.push(k);
            let i = (lo + idx) as f64;
            2.0 * m - 2.0 * i * base.ln()
        })
        .collect();
    if u.iter().all(|&x| x == f64::NEG_INFINITY) {
        // nilpotent: every bound holds trivially
        return Ok(EnvelopeFit {
            base,
            constant: 0.0,
            burn_in: lo - 1,
            period: 1,
            witness: (0, 0),
            pass: true,
        });
    }
    let Some((start, log_kappa)) = fit_decreasing_tail(&u) else {
        return Ok(EnvelopeFit::failed(base));
    };
    // verify pass, with headroom for the strict inequality
    let kappa = log_kappa.exp() * (1.0 + 1e-9);
    let verified = u[start..].iter().all(|&x| x < kappa.ln());
    let flat = argmax[start];
    Ok(EnvelopeFit {
        base,
        constant: kappa,
        burn_in: lo + start - 1,
        period: 1,
        witness: (flat / cols, flat % cols),
        pass: verified,
    })
}

/// Lower-envelope search over candidate entries.
///
/// `log_entries[idx][flat]` holds `ln |x_i|` for `i = lo + idx`; the
/// envelope is `ln η + i · log_rate`. Periods are tried from 1 upwards and
/// entries in the given order; the first entry that passes wins.
fn periodic_search(
    log_entries: &[Vec<f64>],
    candidates: &[usize],
    log_rate: f64,
    lo: usize,
    max_period: usize,
) -> Option<(usize, usize, usize, f64)> {
    for period in 1..=max_period {
        for &flat in candidates {
            if let Some((burn_in, log_eta)) = fit_entry(log_entries, flat, log_rate, lo, period) {
                return Some((period, flat, burn_in, log_eta));
            }
        }
    }
    None
}

/// Fits one entry with one period; returns `(burn_in, ln η)`.
fn fit_entry(
    log_entries: &[Vec<f64>],
    flat: usize,
    log_rate: f64,
    lo: usize,
    period: usize,
) -> Option<(usize, f64)> {
    let a: Vec<f64> = log_entries
        .iter()
        .enumerate()
        .map(|(idx, row)| row[flat] - (lo + idx) as f64 * log_rate)
        .collect();
    if a.len() < period {
        return None;
    }
    let windows: Vec<f64> = a
        .windows(period)
        .map(|w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |s: &[f64]| s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for start in 0..=windows.len() / 2 {
        let tail = &windows[start..];
        if tail.len() < MIN_TAIL {
            break;
        }
        let (lo_v, hi_v) = (min(tail), max(tail));
        if !lo_v.is_finite() || lo_v < hi_v + COLLAPSE_RATIO.ln() {
            continue;
        }
        let q = tail.len() / 4;
        let third = &tail[tail.len() - 2 * q..tail.len() - q];
        let fourth = &tail[tail.len() - q..];
        if min(fourth) < min(third) + DECAY_RATIO.ln() {
            continue;
        }
        // separate verification pass over every window of the tail
        if tail.iter().all(|&m| m >= lo_v) {
            return Some((lo + start - 1, lo_v));
        }
    }
    None
}

/// `|[Zⁱ]_{j,k}|²` periodically lower bounded by `η ρ(Z)^{2i}` for some
/// entry, with the smallest period `l ≤ dim(Z)` found.
pub fn check_periodic_lower_bound(
    z: &Matrix,
    range: RangeInclusive<usize>,
) -> Result<EnvelopeFit, BoundsError> {
    lower_bound_of(z, None, range)
}

/// As [`check_periodic_lower_bound`] on `Zⁱ √Q`. Requires `(Z, √Q)`
/// controllable.
pub fn check_lower_bound_with_q(
    z: &Matrix,
    q: &Matrix,
    range: RangeInclusive<usize>,
) -> Result<EnvelopeFit, BoundsError> {
    z.ensure_square()?;
    q.ensure_shape(z.rows(), z.rows())?;
    let sqrt_q = psd_sqrt(q)?;
    let n = z.rows();
    let mut block = sqrt_q.clone();
    let mut krylov = block.clone();
    for _ in 0..n {
        block = z * &block;
        krylov = krylov.hstack(&block)?;
    }
    let r = rank(&krylov, DEFAULT_RANK_TOL);
    if r < n {
        return Err(BoundsError::Uncontrollable { rank: r, dim: n });
    }
    lower_bound_of(z, Some(&sqrt_q), range)
}

fn lower_bound_of(
    z: &Matrix,
    right: Option<&Matrix>,
    range: RangeInclusive<usize>,
) -> Result<EnvelopeFit, BoundsError> {
    let (lo, hi) = check_range(&range)?;
    let rho = spectral_radius(z, DEFAULT_TOL, 64)?.value;
    if rho == 0.0 {
        return Err(BoundsError::ZeroSpectralRadius);
    }
    let (cols, entries) = log_power_entries(z, right, lo, hi)?;
    let candidates: Vec<usize> = (0..entries[0].len()).collect();
    // work with squared magnitudes
    let squared: Vec<Vec<f64>> = entries
        .iter()
        .map(|row| row.iter().map(|x| 2.0 * x).collect())
        .collect();
    Ok(
        match periodic_search(&squared, &candidates, 2.0 * rho.ln(), lo, z.rows()) {
            Some((period, flat, burn_in, log_eta)) => EnvelopeFit {
                base: rho * rho,
                constant: log_eta.exp(),
                burn_in,
                period,
                witness: (flat / cols, flat % cols),
                pass: true,
            },
            None => EnvelopeFit::failed(rho * rho),
        },
    )
}

/// Checks on the powers of `DM` and `(DM)ⁱ (I − D) M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmReport {
    pub rho_dm: f64,
    /// `ρ(DM) < 1 − 1e-9`.
    pub rho_below_one: bool,
    /// Zero-based states with `d_j = 0`.
    pub lossless_states: Vec<usize>,
    /// Fits of `[(DM)ⁱ]_{j,k} ≥ η ρⁱ(DM)`: one per entry when no state is
    /// lossless, otherwise the first witness with `d_j > 0` and `d_k = 0`.
    pub dm_power: Vec<EnvelopeFit>,
    /// Fit of `[(DM)ⁱ (I − D) M]_{j,k} ≥ η ρⁱ(DM)` over all entries.
    pub dm_success: EnvelopeFit,
    pub pass: bool,
}

pub fn check_dm_properties(
    channel: &MarkovChannel,
    range: RangeInclusive<usize>,
) -> Result<DmReport, BoundsError> {
    if channel.is_lossless() {
        return Err(BoundsError::ExcludedChannel("D = 0"));
    }
    if channel.always_drops() {
        return Err(BoundsError::ExcludedChannel("D = I"));
    }
    let (lo, hi) = check_range(&range)?;
    let n = channel.states();
    let dm = channel.dm();
    let rho_dm = perron_root(&dm, 1e-12)?.value;
    let log_rate = rho_dm.ln();
    let lossless_states: Vec<usize> = (0..n).filter(|&j| channel.dropout()[j] == 0.0).collect();

    if rho_dm == 0.0 {
        // nilpotent DM: every envelope η · 0ⁱ holds trivially
        let trivial = EnvelopeFit {
            base: 0.0,
            constant: 1.0,
            burn_in: lo - 1,
            period: 1,
            witness: (0, 0),
            pass: true,
        };
        return Ok(DmReport {
            rho_dm,
            rho_below_one: true,
            lossless_states,
            dm_power: vec![trivial.clone()],
            dm_success: trivial,
            pass: true,
        });
    }

    let (_, entries) = log_power_entries(&dm, None, lo, hi)?;
    let fit_of = |found: Option<(usize, usize, usize, f64)>| match found {
        Some((period, flat, burn_in, log_eta)) => EnvelopeFit {
            base: rho_dm,
            constant: log_eta.exp(),
            burn_in,
            period,
            witness: (flat / n, flat % n),
            pass: true,
        },
        None => EnvelopeFit::failed(rho_dm),
    };
    let dm_power: Vec<EnvelopeFit> = if lossless_states.is_empty() {
        (0..n * n)
            .map(|flat| fit_of(periodic_search(&entries, &[flat], log_rate, lo, n)))
            .collect()
    } else {
        let candidates: Vec<usize> = (0..n)
            .filter(|j| !lossless_states.contains(j))
            .flat_map(|j| lossless_states.iter().map(move |&k| j * n + k))
            .collect();
        vec![fit_of(periodic_search(
            &entries,
            &candidates,
            log_rate,
            lo,
            n,
        ))]
    };

    let succ = channel.success_transition();
    let (_, entries) = log_power_entries(&dm, Some(&succ), lo, hi)?;
    let all: Vec<usize> = (0..n * n).collect();
    let dm_success = fit_of(periodic_search(&entries, &all, log_rate, lo, n));

    let rho_below_one = rho_dm < 1.0 - 1e-9;
    let pass = rho_below_one && dm_power.iter().all(|f| f.pass) && dm_success.pass;
    Ok(DmReport {
        rho_dm,
        rho_below_one,
        lossless_states,
        dm_power,
        dm_success,
        pass,
    })
}

/// Envelopes of the error trace: `c(i) < κ (ρ²(A) + ε)ⁱ` and
/// `c(i) ≥ η ρ(A)^{2i}` beyond fitted burn-ins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEnvelopeReport {
    pub upper: EnvelopeFit,
    pub lower: EnvelopeFit,
    /// `exp` of the least-squares slope of `ln c(i)` over the second half
    /// of the range.
    pub growth_base: f64,
    pub pass: bool,
}

pub fn check_c_envelopes(
    sys: &LtiSystem,
    filter: &SteadyStateFilter,
    epsilon: f64,
    range: RangeInclusive<usize>,
) -> Result<TraceEnvelopeReport, BoundsError> {
    if !(epsilon > 0.0) {
        return Err(BoundsError::Epsilon(epsilon));
    }
    let (lo, hi) = check_range(&range)?;
    let rho = spectral_radius(sys.a(), DEFAULT_TOL, 64)?.value;
    let rho2 = rho * rho;
    let mut log_c = Vec::with_capacity(hi - lo + 1);
    for (idx, c) in sys.error_traces(filter).take(hi).enumerate() {
        let i = idx + 1;
        match c {
            ErrorTrace::Finite(v) if i >= lo => log_c.push(v.ln()),
            ErrorTrace::Finite(_) => {}
            ErrorTrace::Saturated { index } => return Err(BoundsError::Saturated { index }),
        }
    }
    let index = |idx: usize| (lo + idx) as f64;

    let up_base = rho2 + epsilon;
    let u: Vec<f64> = log_c
        .iter()
        .enumerate()
        .map(|(idx, l)| l - index(idx) * up_base.ln())
        .collect();
    let upper = match fit_decreasing_tail(&u) {
        Some((start, log_kappa)) => EnvelopeFit {
            base: up_base,
            constant: log_kappa.exp() * (1.0 + 1e-9),
            burn_in: lo + start - 1,
            period: 1,
            witness: (0, 0),
            pass: true,
        },
        None => EnvelopeFit::failed(up_base),
    };

    let lower = if rho == 0.0 {
        EnvelopeFit::failed(0.0)
    } else {
        let rows: Vec<Vec<f64>> = log_c.iter().map(|&l| vec![l]).collect();
        match fit_entry(&rows, 0, rho2.ln(), lo, 1) {
            Some((burn_in, log_eta)) => EnvelopeFit {
                base: rho2,
                constant: log_eta.exp(),
                burn_in,
                period: 1,
                witness: (0, 0),
                pass: true,
            },
            None => EnvelopeFit::failed(rho2),
        }
    };

    let half = log_c.len() / 2;
    let xs: Vec<f64> = (half..log_c.len()).map(index).collect();
    let ys = &log_c[half..];
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let growth_base = (sxy / sxx).exp();

    let pass = upper.pass && lower.pass;
    Ok(TraceEnvelopeReport {
        upper,
        lower,
        growth_base,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::tests::{pendubot, scalar};

    fn rotation() -> Matrix {
        Matrix::from_rows(&[[0.0, -1.3], [1.3, 0.0]]).unwrap()
    }

    fn channel(p: &[&[f64]], d: &[f64]) -> MarkovChannel {
        MarkovChannel::new(Matrix::from_rows(p).unwrap(), d.to_vec()).unwrap()
    }

    #[test]
    fn upper_bound_examples() {
        let f = check_upper_bound(&Matrix::from_diag(&[2.0, 1.0]), 0.1, DEFAULT_RANGE).unwrap();
        assert!(f.pass && f.burn_in == 0);
        assert!((f.constant - (2.0f64 / 2.1).powi(2)).abs() < 1e-6);
        assert!(
            check_upper_bound(pendubot().a(), 0.05, DEFAULT_RANGE)
                .unwrap()
                .pass
        );

        // Jordan block: entries i(i−1)/2 peak against 1.1^{i} near i = 20
        let j = Matrix::from_rows(&[[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]).unwrap();
        let f = check_upper_bound(&j, 0.1, DEFAULT_RANGE).unwrap();
        assert!(f.pass);
        assert!((15..=25).contains(&f.burn_in), "{}", f.burn_in);
        assert_eq!(f.witness, (0, 2));
        // closed form: max over i > N of (i(i−1)/2)² / 1.1^{2i}
        let oracle = (f.burn_in + 1..=200)
            .map(|i| (i as f64 * (i as f64 - 1.0) / 2.0).powi(2) / 1.1f64.powi(2 * i as i32))
            .fold(0.0, f64::max);
        assert!((f.constant / oracle - 1.0).abs() < 1e-6);

        assert!(matches!(
            check_upper_bound(&j, 0.0, DEFAULT_RANGE),
            Err(BoundsError::Epsilon(_))
        ));
        assert!(matches!(
            check_upper_bound(&j, 0.1, 0..=200),
            Err(BoundsError::Range { .. })
        ));
    }

    #[test]
    fn periodic_lower_examples() {
        let f = check_periodic_lower_bound(&rotation(), DEFAULT_RANGE).unwrap();
        assert!(f.pass);
        assert_eq!(f.period, 2);
        assert!((f.constant - 1.0).abs() < 1e-9);

        let f = check_periodic_lower_bound(&Matrix::from_diag(&[2.0, 1.0]), DEFAULT_RANGE).unwrap();
        assert!(f.pass && f.period == 1 && f.witness == (0, 0));
        assert!((f.constant - 1.0).abs() < 1e-9);

        let dm = channel(&[&[0.1, 0.9], &[0.5, 0.5]], &[0.8, 0.1]).dm();
        let f = check_periodic_lower_bound(&dm, DEFAULT_RANGE).unwrap();
        assert!(f.pass && f.period <= 2);

        let nil = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            check_periodic_lower_bound(&nil, DEFAULT_RANGE),
            Err(BoundsError::ZeroSpectralRadius)
        ));
    }

    #[test]
    fn period_respects_peak_eigenvalue_count() {
        // companion matrix of λ³ − 8: three eigenvalues of modulus 2
        let companion =
            Matrix::from_rows(&[[0.0, 0.0, 8.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let f = check_periodic_lower_bound(&companion, DEFAULT_RANGE).unwrap();
        assert!(f.pass && f.period == 3);
        let f = check_periodic_lower_bound(&Matrix::from_diag(&[-1.5, 1.5, 0.2]), DEFAULT_RANGE)
            .unwrap();
        assert!(f.pass && f.period == 1);
    }

    #[test]
    fn lower_bound_with_q_examples() {
        let sys = pendubot();
        assert!(
            check_lower_bound_with_q(sys.a(), sys.w(), DEFAULT_RANGE)
                .unwrap()
                .pass
        );
        assert!(matches!(
            check_lower_bound_with_q(sys.a(), &Matrix::zeros(4, 4), DEFAULT_RANGE),
            Err(BoundsError::Uncontrollable { rank: 0, dim: 4 })
        ));
        let f = check_lower_bound_with_q(
            &Matrix::from_diag(&[2.0, 1.0]),
            &Matrix::identity(2),
            DEFAULT_RANGE,
        )
        .unwrap();
        assert!(f.pass && f.period == 1);
    }

    #[test]
    fn dm_property_examples() {
        let r = check_dm_properties(
            &channel(&[&[0.1, 0.9], &[0.5, 0.5]], &[0.8, 0.1]),
            DEFAULT_RANGE,
        )
        .unwrap();
        assert!(r.pass && r.dm_power.len() == 4);
        assert!(r.rho_below_one);

        let r = check_dm_properties(
            &channel(&[&[0.3, 0.7], &[0.6, 0.4]], &[0.0, 0.5]),
            DEFAULT_RANGE,
        )
        .unwrap();
        assert!(r.pass);
        assert_eq!(r.lossless_states, vec![0]);
        assert_eq!(r.dm_power[0].witness, (1, 0));

        let onoff = check_dm_properties(
            &channel(&[&[0.0, 1.0], &[1.0, 0.0]], &[1.0, 0.0]),
            DEFAULT_RANGE,
        )
        .unwrap();
        assert!(onoff.pass && onoff.rho_dm == 0.0);

        for d in [[0.0, 0.0], [1.0, 1.0]] {
            assert!(matches!(
                check_dm_properties(&channel(&[&[0.3, 0.7], &[0.6, 0.4]], &d), DEFAULT_RANGE),
                Err(BoundsError::ExcludedChannel(_))
            ));
        }
    }

    #[test]
    fn c_envelope_examples() {
        let sys = pendubot();
        let f = sys.riccati_steady_state(1e-12, 100_000).unwrap();
        let rho2 = spectral_radius(sys.a(), DEFAULT_TOL, 64)
            .unwrap()
            .value
            .powi(2);
        let r = check_c_envelopes(&sys, &f, 0.05 * rho2, DEFAULT_RANGE).unwrap();
        assert!(r.pass, "{r:?}");

        let id = LtiSystem::new(
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::identity(2),
        )
        .unwrap();
        let fi = id.riccati_steady_state(1e-13, 10_000).unwrap();
        let r = check_c_envelopes(&id, &fi, 0.01, DEFAULT_RANGE).unwrap();
        assert!(r.pass);
        assert!(r.lower.constant >= fi.posterior.trace());

        let s = scalar(1.2, 1.0, 1.0);
        let fs = s.riccati_steady_state(1e-13, 10_000).unwrap();
        let r = check_c_envelopes(&s, &fs, 0.01, DEFAULT_RANGE).unwrap();
        assert!((r.growth_base - 1.44).abs() < 0.01);
    }

    #[test]
    fn witness_verified_over_the_range() {
        // refit by brute force: every window beyond the burn-in clears η ρ^{2i}
        let z = Matrix::from_rows(&[[0.5, 1.2, 0.0], [-0.7, 0.4, 0.3], [0.1, 0.0, 0.9]]).unwrap();
        let f = check_periodic_lower_bound(&z, DEFAULT_RANGE).unwrap();
        assert!(f.pass);
        let rho = spectral_radius(&z, DEFAULT_TOL, 64).unwrap().value;
        let (j, k) = f.witness;
        let vals: Vec<f64> = (1..=200u32).map(|i| z.pow(i)[(j, k)].powi(2)).collect();
        for i in f.burn_in + 1..=200 - f.period + 1 {
            let m = (i..i + f.period).map(|t| vals[t - 1]).fold(0.0, f64::max);
            assert!(m >= f.constant * rho.powi(2 * i as i32) * (1.0 - 1e-6));
        }
    }
}
