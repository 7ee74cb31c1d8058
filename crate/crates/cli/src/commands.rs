use std::path::PathBuf;

use clap::{Args, ValueEnum};
use markovest::bounds::{
    check_c_envelopes, check_dm_properties, check_lower_bound_with_q, check_periodic_lower_bound,
    check_upper_bound, BoundsError,
};
use markovest::channel::dropout_from_snr;
use markovest::cycle::{
    cycle_model, mse_from_report, region_scan, stability_margin, CycleError, Mse, StabilityReport,
    DEFAULT_MAX_TERMS,
};
use markovest::lti::{ErrorTraceTable, LtiSystem, SteadyStateFilter};
use markovest::numfmt::format_sig;
use markovest::sim::{ensemble, simulate, trajectory_csv, Mode, SimulationError};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Model, FIXTURES};
use crate::output::{json, to_value, CSV_DIGITS};
use crate::{Format, Global};

/// Relative analytic/simulated gap accepted by `mse --both`.
pub const AGREEMENT_GAP: f64 = 0.05;

pub struct Outcome {
    pub body: String,
    pub code: u8,
    /// Printed on stderr after the body.
    pub note: Option<String>,
}

impl Outcome {
    fn new(body: String, code: u8) -> Self {
        Self {
            body,
            code,
            note: None,
        }
    }
}

fn format_of(g: &Global, default: Format, allowed: &[Format]) -> Result<Format, String> {
    let f = g.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(format!(
            "--format {} is not available for this command",
            f.to_possible_value()
                .expect("no skipped variants")
                .get_name()
        ))
    }
}

fn steady_state(
    config: &ExperimentConfig,
    system: &LtiSystem,
) -> Result<SteadyStateFilter, String> {
    let t = &config.tolerances;
    system
        .riccati_steady_state(t.riccati, t.riccati_max_iter)
        .map_err(|e| format!("steady-state filter: {e}"))
}

fn j_value(mse: &Mse) -> Value {
    match mse {
        Mse::Finite(e) => json!(e.j),
        Mse::Unbounded => json!("unbounded"),
    }
}

/// Margins plus the analytic MSE. A stable system whose series cannot be
/// summed gets `"J": null` and an `mse_error` entry rather than an error.
fn report_json(
    model: &Model,
    filter: &SteadyStateFilter,
    tol: f64,
) -> Result<(StabilityReport, Value), String> {
    let report = stability_margin(model.system.a(), &model.channel).map_err(|e| e.to_string())?;
    let mut traces = ErrorTraceTable::new(&model.system, filter);
    let mse = mse_from_report(
        &report,
        &model.channel,
        &mut |i| {
            traces.get(i).ok_or(CycleError::Saturated {
                index: traces.saturated_at().unwrap_or(i),
            })
        },
        tol,
        DEFAULT_MAX_TERMS,
    );
    let Value::Object(mut map) = to_value(&report) else {
        unreachable!("report serialises to an object")
    };
    map.remove("mse");
    match mse {
        Ok(mse) => {
            map.insert("J".into(), j_value(&mse));
            if let Mse::Finite(e) = &mse {
                map.insert("mse".into(), to_value(e));
            }
        }
        Err(e @ (CycleError::Saturated { .. } | CycleError::SeriesNoConvergence { .. })) => {
            map.insert("J".into(), Value::Null);
            map.insert("mse_error".into(), json!(e.to_string()));
        }
        Err(e) => return Err(e.to_string()),
    }
    Ok((report, Value::Object(map)))
}

pub fn stability(g: &Global, config: &ExperimentConfig) -> Result<Outcome, String> {
    format_of(g, Format::Json, &[Format::Json])?;
    let model = config.build()?;
    let filter = steady_state(config, &model.system)?;
    let (report, value) = report_json(&model, &filter, config.tolerances.series)?;
    Ok(Outcome::new(
        json(value),
        if report.stable_thm1 { 0 } else { 2 },
    ))
}

pub fn region(g: &Global, config: &ExperimentConfig) -> Result<Outcome, String> {
    let format = format_of(g, Format::Csv, &[Format::Csv, Format::Json, Format::Svg])?;
    let scan = config.scan.as_ref().ok_or("region needs a `scan` block")?;
    let model = config.build()?;
    let filter = if scan.mse {
        Some(steady_state(config, &model.system)?)
    } else {
        None
    };
    let result = region_scan(
        &model.system,
        filter.as_ref(),
        &model.channel,
        &scan.axes,
        config.tolerances.series,
    )
    .map_err(|e| e.to_string())?;
    let body = match format {
        Format::Csv => result.to_csv(CSV_DIGITS),
        Format::Json => json(to_value(&result)),
        Format::Svg => result
            .to_svg()
            .ok_or("--format svg needs exactly two scan axes")?,
    };
    let (thm1, eq15) = result.stable_counts();
    let mut out = Outcome::new(body, 0);
    out.note = Some(format!(
        "{} cells: {thm1} stable, {eq15} stable under the singular-value test, {} containment violations",
        result.cells.len(),
        result.containment_violations()
    ));
    Ok(out)
}

#[derive(Args)]
pub struct MseArgs {
    /// Analytic MSE only (default).
    #[arg(long, conflicts_with_all = ["simulate", "both"])]
    analytic: bool,
    /// Monte Carlo only.
    #[arg(long, conflicts_with = "both")]
    simulate: bool,
    /// Both, with the agreement check reflected in the exit code.
    #[arg(long)]
    both: bool,
    /// Sensor type; replaces `simulation.mode`.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Replaces `simulation.horizon`.
    #[arg(long)]
    horizon: Option<usize>,
    /// Writes the first seed's trajectory as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Smart,
    Conventional,
}

#[derive(Serialize)]
struct RunRow {
    seed: u64,
    empirical_j: f64,
    empirical_sq_err: f64,
    completed_cycles: u64,
    steps: usize,
    saturated: bool,
    saturated_at: Option<usize>,
}

pub fn mse(g: &Global, config: &ExperimentConfig, args: &MseArgs) -> Result<Outcome, String> {
    format_of(g, Format::Json, &[Format::Json])?;
    let model = config.build()?;
    let filter = steady_state(config, &model.system)?;
    let (do_analytic, do_sim) = match (args.simulate, args.both) {
        (_, true) => (true, true),
        (true, false) => (false, true),
        _ => (true, false),
    };

    let mut out = Map::new();
    let mut analytic_j = None;
    let mut code = 0;
    if do_analytic {
        let (report, value) = report_json(&model, &filter, config.tolerances.series)?;
        analytic_j = value.get("J").and_then(Value::as_f64);
        if !report.stable_thm1 {
            code = 2;
        }
        out.insert("analytic".into(), value);
    }
    if do_sim {
        let mut sim = config.simulation_config();
        if let Some(m) = args.mode {
            sim.mode = match m {
                ModeArg::Smart => Mode::Smart,
                ModeArg::Conventional => Mode::Conventional,
            };
        }
        if let Some(h) = args.horizon {
            sim.horizon = h;
        }
        sim.record_trajectory = args.trajectory.is_some();
        let runs =
            simulate(&model.system, &filter, &model.channel, &sim).map_err(|e| e.to_string())?;
        let rows: Vec<RunRow> = runs
            .iter()
            .map(|r| RunRow {
                seed: r.seed,
                empirical_j: r.empirical_j,
                empirical_sq_err: r.empirical_sq_err,
                completed_cycles: r.completed_cycles,
                steps: r.steps,
                saturated: r.saturated,
                saturated_at: r.saturated_at,
            })
            .collect();
        let mut s = Map::new();
        s.insert("mode".into(), to_value(&sim.mode));
        s.insert("horizon".into(), json!(sim.horizon));
        s.insert("runs".into(), to_value(&rows));
        let cycles = cycle_model(&model.channel).ok();
        let mean_j = match ensemble(&runs, cycles.as_ref()) {
            Ok(summary) => {
                let mean = summary.mean_j;
                s.insert("summary".into(), to_value(&summary));
                mean
            }
            Err(SimulationError::TooFewRuns(_)) if !runs[0].saturated => runs[0].empirical_j,
            Err(e) => return Err(e.to_string()),
        };
        s.insert("mean_J".into(), json!(mean_j));
        out.insert("simulation".into(), Value::Object(s));

        if let Some(path) = &args.trajectory {
            let rows = runs[0].trajectory.as_deref().unwrap_or_default();
            std::fs::write(path, trajectory_csv(rows, CSV_DIGITS))
                .map_err(|e| format!("{}: {e}", path.display()))?;
        }

        if do_analytic {
            let gap = analytic_j.map(|a| (a - mean_j).abs() / a);
            let agree = gap.is_some_and(|x| x < AGREEMENT_GAP);
            out.insert("relative_gap".into(), json!(gap));
            out.insert("agreement".into(), json!(agree));
            if !agree {
                code = 2;
            }
        }
    }
    Ok(Outcome::new(json(Value::Object(out)), code))
}

fn check_entry<T: Serialize>(
    name: &str,
    result: Result<T, BoundsError>,
    pass: impl Fn(&T) -> bool,
) -> (bool, Value) {
    match result {
        Ok(fit) => {
            let ok = pass(&fit);
            let status = if ok { "pass" } else { "fail" };
            (
                ok,
                json!({"name": name, "status": status, "result": to_value(&fit)}),
            )
        }
        Err(e) => (
            false,
            json!({"name": name, "status": "refused", "reason": e.to_string()}),
        ),
    }
}

pub fn bounds(g: &Global, config: &ExperimentConfig) -> Result<Outcome, String> {
    format_of(g, Format::Json, &[Format::Json])?;
    let model = config.build()?;
    let filter = steady_state(config, &model.system)?;
    let t = &config.tolerances;
    let range = || t.bounds_range[0]..=t.bounds_range[1];
    let a = model.system.a();
    let entries = [
        check_entry(
            "power_upper",
            check_upper_bound(a, t.bounds_epsilon, range()),
            |f| f.pass,
        ),
        check_entry("power_lower", check_periodic_lower_bound(a, range()), |f| {
            f.pass
        }),
        check_entry(
            "power_lower_noise",
            check_lower_bound_with_q(a, model.system.w(), range()),
            |f| f.pass,
        ),
        check_entry(
            "channel_powers",
            check_dm_properties(&model.channel, range()),
            |r| r.pass,
        ),
        check_entry(
            "trace_envelopes",
            check_c_envelopes(&model.system, &filter, t.bounds_epsilon, range()),
            |r| r.pass,
        ),
    ];
    let all = entries.iter().all(|(ok, _)| *ok);
    let checks: Vec<Value> = entries.into_iter().map(|(_, v)| v).collect();
    Ok(Outcome::new(
        json(json!({"all_pass": all, "checks": checks})),
        if all { 0 } else { 2 },
    ))
}

#[derive(Args)]
pub struct SnrArgs {
    /// Comma-separated per-state SNRs (linear scale).
    #[arg(long, value_delimiter = ',', required = true)]
    gains: Vec<f64>,
    /// Channel uses per packet.
    #[arg(long, default_value_t = 200)]
    blocklength: u32,
    /// Bits per packet.
    #[arg(long)]
    rate: f64,
}

pub fn channel_from_snr(g: &Global, args: &SnrArgs) -> Result<Outcome, String> {
    let format = format_of(g, Format::Json, &[Format::Json, Format::Csv])?;
    let d = args
        .gains
        .iter()
        .map(|&h| dropout_from_snr(h, args.blocklength, args.rate))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let body = match format {
        Format::Csv => {
            let mut s = String::from("state,gain,d\n");
            for (k, (h, d)) in args.gains.iter().zip(&d).enumerate() {
                s.push_str(&format!(
                    "{},{},{}\n",
                    k + 1,
                    format_sig(*h, CSV_DIGITS),
                    format_sig(*d, CSV_DIGITS)
                ));
            }
            s
        }
        _ => json(json!({
            "gains": args.gains,
            "blocklength": args.blocklength,
            "rate": args.rate,
            "d": d,
        })),
    };
    Ok(Outcome::new(body, 0))
}

pub fn echo(config: &ExperimentConfig) -> Result<Outcome, String> {
    // no rounding: the echo must re-parse to the same model
    let mut body = serde_json::to_string_pretty(config).map_err(|e| e.to_string())?;
    body.push('\n');
    Ok(Outcome::new(body, 0))
}

pub fn fixtures() -> Outcome {
    let names: String = FIXTURES.iter().map(|(n, _)| format!("{n}\n")).collect();
    Outcome::new(names, 0)
}
