//! Monte Carlo simulation of the closed estimation loop.
//!
//! Runs are simulated in error coordinates: only the differences between
//! estimates and the true state are propagated, which keeps the numbers
//! bounded over long horizons even when `A` is unstable. Both sensor
//! modes draw from the same random streams, so a smart and a conventional
//! run with the same seed see identical channel, noise and initial-error
//! realizations.
//!
//! Each seed drives a `ChaCha8Rng` seeded with `seed_from_u64(seed)` and
//! split with `set_stream`: stream 0 for the channel (initial state, then
//! per slot the dropout draw followed by the transition draw), 1 for
//! process noise, 2 for measurement noise and 3 for the initial error.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::channel::{sample_index, stationary_of, ChannelError, MarkovChannel};
use crate::cycle::CycleModel;
use crate::lti::{ErrorTraceTable, LtiSystem, SteadyStateFilter, SystemError};
use crate::matrix::{psd_sqrt, Matrix, MatrixError};
use crate::numfmt::format_sig;
use crate::SATURATION_LIMIT;

/// Cycle lengths above this share one tail bin in ensemble comparisons.
pub const CYCLE_HISTOGRAM_BINS: usize = 50;

const STREAM_CHANNEL: u64 = 0;
const STREAM_PROCESS: u64 = 1;
const STREAM_MEASUREMENT: u64 = 2;
const STREAM_INITIAL: u64 = 3;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("initial channel state {state} out of range for {states} states")]
    InitialState { state: usize, states: usize },
    #[error("a stationary initial state needs an irreducible channel")]
    NoStationaryLaw,
    #[error("ensemble needs at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error("every run saturated")]
    AllSaturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sensor runs a local Kalman filter and sends its estimate.
    #[default]
    Smart,
    /// Sensor sends raw measurements; the remote side filters them.
    Conventional,
}

/// Channel state at `t = 0`: drawn from the stationary law (`"stationary"`
/// in JSON) or fixed to a zero-based index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    #[default]
    Stationary,
    State(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InitialStateRepr {
    Index(usize),
    Name(String),
}

impl Serialize for InitialState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            InitialState::Stationary => InitialStateRepr::Name("stationary".into()),
            InitialState::State(i) => InitialStateRepr::Index(i),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for InitialState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match InitialStateRepr::deserialize(d)? {
            InitialStateRepr::Index(i) => Ok(InitialState::State(i)),
            InitialStateRepr::Name(n) if n == "stationary" => Ok(InitialState::Stationary),
            InitialStateRepr::Name(n) => Err(serde::de::Error::custom(format!(
                "expected \"stationary\" or a state index, got {n:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub record_trajectory: bool,
}

impl SimulationConfig {
    pub fn new(horizon: usize, seeds: Vec<u64>, mode: Mode) -> Self {
        Self {
            horizon,
            seeds,
            initial_state: InitialState::Stationary,
            mode,
            record_trajectory: false,
        }
    }

    fn check(&self, channel: &MarkovChannel) -> Result<(), SimulationError> {
        if self.horizon == 0 {
            return Err(SimulationError::ZeroHorizon);
        }
        if self.seeds.is_empty() {
            return Err(SimulationError::NoSeeds);
        }
        if let InitialState::State(state) = self.initial_state {
            if state >= channel.states() {
                return Err(SimulationError::InitialState {
                    state,
                    states: channel.states(),
                });
            }
        }
        Ok(())
    }
}

/// One slot of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub channel_state: usize,
    pub gamma: bool,
    pub delta: usize,
    pub trace_pt: f64,
}

/// Per-seed outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub mode: Mode,
    /// Slots actually simulated; shorter than the horizon after saturation.
    pub steps: usize,
    /// Time average of `Tr(P_t)`.
    pub empirical_j: f64,
    /// Time average of the realized squared error `|x̂_t − x_t|²`.
    pub empirical_sq_err: f64,
    /// `delta_histogram[k]` counts slots with `δ_t = k`.
    pub delta_histogram: Vec<u64>,
    /// Channel state at the start of each estimation cycle.
    pub post_success_counts: Vec<u64>,
    /// Lengths of completed estimation cycles.
    pub cycle_length_histogram: BTreeMap<usize, u64>,
    pub completed_cycles: u64,
    /// Slots up to and including the first successful reception (the
    /// whole run if there was none).
    pub prefix_length: usize,
    /// `Σ Tr(P_t)` over the slots after the prefix.
    pub cycle_span_trace: f64,
    /// `Σ_k g(T_k)` over the cycles after the prefix, the last one
    /// possibly incomplete (smart mode only; zero otherwise).
    pub cycle_cost: f64,
    pub saturated: bool,
    pub saturated_at: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

struct Streams {
    channel: ChaCha8Rng,
    process: ChaCha8Rng,
    measurement: ChaCha8Rng,
    initial: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng
        };
        Self {
            channel: stream(STREAM_CHANNEL),
            process: stream(STREAM_PROCESS),
            measurement: stream(STREAM_MEASUREMENT),
            initial: stream(STREAM_INITIAL),
        }
    }
}

fn gaussian(sqrt_cov: &Matrix, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let z: Vec<f64> = (0..sqrt_cov.cols())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    sqrt_cov.mul_vec(&z)
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn axpy(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + sign * y).collect()
}

/// State shared by both sensor modes.
struct Run<'a> {
    channel: &'a MarkovChannel,
    seed: u64,
    streams: Streams,
    state: usize,
    delta: usize,
    sum_trace: f64,
    sum_sq: f64,
    delta_histogram: Vec<u64>,
    post_success_counts: Vec<u64>,
    cycle_length_histogram: BTreeMap<usize, u64>,
    completed_cycles: u64,
    prefix_length: Option<usize>,
    cycle_span_trace: f64,
    trajectory: Option<Vec<TrajectoryRow>>,
}

impl<'a> Run<'a> {
    fn new(
        channel: &'a MarkovChannel,
        config: &SimulationConfig,
        seed: u64,
        stationary: Option<&[f64]>,
    ) -> Self {
        let mut streams = Streams::new(seed);
        let state = match (config.initial_state, stationary) {
            (InitialState::State(s), _) => s,
            (InitialState::Stationary, Some(pi)) => sample_index(pi, &mut streams.channel),
            (InitialState::Stationary, None) => unreachable!("checked by caller"),
        };
        Self {
            channel,
            seed,
            streams,
            state,
            delta: 0,
            sum_trace: 0.0,
            sum_sq: 0.0,
            delta_histogram: Vec::new(),
            post_success_counts: vec![0; channel.states()],
            cycle_length_histogram: BTreeMap::new(),
            completed_cycles: 0,
            prefix_length: None,
            cycle_span_trace: 0.0,
            trajectory: config.record_trajectory.then(Vec::new),
        }
    }

    /// Books slot `t` with `Tr(P_t) = trace`, then draws the channel.
    /// Returns `γ_t`.
    fn record_and_transmit(&mut self, t: usize, trace: f64, sq_err: f64) -> bool {
        if self.delta_histogram.len() <= self.delta {
            self.delta_histogram.resize(self.delta + 1, 0);
        }
        self.delta_histogram[self.delta] += 1;
        self.sum_trace += trace;
        self.sum_sq += sq_err;
        let in_cycle = self.prefix_length.is_some();
        if in_cycle {
            self.cycle_span_trace += trace;
            if self.delta == 0 {
                self.post_success_counts[self.state] += 1;
            }
        }
        let (next, dropped) = self
            .channel
            .sample_step(self.state, &mut self.streams.channel);
        let gamma = !dropped;
        if let Some(rows) = &mut self.trajectory {
            rows.push(TrajectoryRow {
                t,
                channel_state: self.state,
                gamma,
                delta: self.delta,
                trace_pt: trace,
            });
        }
        if gamma {
            if in_cycle {
                *self
                    .cycle_length_histogram
                    .entry(self.delta + 1)
                    .or_insert(0) += 1;
                self.completed_cycles += 1;
            } else {
                self.prefix_length = Some(t + 1);
            }
            self.delta = 0;
        } else {
            self.delta += 1;
        }
        self.state = next;
        gamma
    }

    fn finish(
        self,
        mode: Mode,
        steps: usize,
        saturated_at: Option<usize>,
        cycle_cost: f64,
    ) -> RunResult {
        let n = steps.max(1) as f64;
        RunResult {
            seed: self.seed,
            mode,
            steps,
            empirical_j: self.sum_trace / n,
            empirical_sq_err: self.sum_sq / n,
            delta_histogram: self.delta_histogram,
            post_success_counts: self.post_success_counts,
            cycle_length_histogram: self.cycle_length_histogram,
            completed_cycles: self.completed_cycles,
            prefix_length: self.prefix_length.unwrap_or(steps),
            cycle_span_trace: self.cycle_span_trace,
            cycle_cost,
            saturated: saturated_at.is_some(),
            saturated_at,
            trajectory: self.trajectory,
        }
    }
}

fn initial_law(
    channel: &MarkovChannel,
    config: &SimulationConfig,
) -> Result<Option<Vec<f64>>, SimulationError> {
    config.check(channel)?;
    match config.initial_state {
        InitialState::State(_) => Ok(None),
        InitialState::Stationary => {
            if !channel.validate().irreducible {
                return Err(SimulationError::NoStationaryLaw);
            }
            Ok(Some(stationary_of(channel.transition())?))
        }
    }
}

/// Smart-sensor runs, one per seed, in seed order.
pub fn simulate_smart(
    sys: &LtiSystem,
    filter: &SteadyStateFilter,
    channel: &MarkovChannel,
    config: &SimulationConfig,
) -> Result<Vec<RunResult>, SimulationError> {
    let law = initial_law(channel, config)?;
    let init_sqrt = psd_sqrt(&filter.posterior)?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            Ok(run_smart(
                sys,
                filter,
                &init_sqrt,
                channel,
                config,
                seed,
                law.as_deref(),
            ))
        })
        .collect()
}

fn run_smart(
    sys: &LtiSystem,
    filter: &SteadyStateFilter,
    init_sqrt: &Matrix,
    channel: &MarkovChannel,
    config: &SimulationConfig,
    seed: u64,
    law: Option<&[f64]>,
) -> RunResult {
    let mut run = Run::new(channel, config, seed, law);
    let a = sys.a();
    let n = sys.state_dim();
    let gain = &filter.gain;
    let closed = &Matrix::identity(n) - &(gain * sys.c());
    let mut traces = ErrorTraceTable::new(sys, filter);

    let mut sensor = gaussian(init_sqrt, &mut run.streams.initial);
    let mut remote = vec![0.0; n];
    let mut cycle_cost = 0.0;
    let mut partial = 0.0;
    let mut saturated_at = None;
    let mut steps = 0;
    for t in 0..config.horizon {
        let Some(trace) = traces.get(run.delta + 1) else {
            saturated_at = Some(t);
            break;
        };
        let w = gaussian(sys.sqrt_w(), &mut run.streams.process);
        let v = gaussian(sys.sqrt_v(), &mut run.streams.measurement);
        let prior = axpy(&a.mul_vec(&sensor), &w, -1.0);
        remote = if run.delta == 0 {
            prior.clone()
        } else {
            axpy(&a.mul_vec(&remote), &w, -1.0)
        };
        sensor = axpy(&closed.mul_vec(&prior), &gain.mul_vec(&v), 1.0);
        let sq = norm_sq(&remote);

        let in_cycle = run.prefix_length.is_some();
        if in_cycle {
            partial += trace;
        }
        let gamma = run.record_and_transmit(t, trace, sq);
        if in_cycle && gamma {
            cycle_cost += partial;
            partial = 0.0;
        }
        steps = t + 1;
    }
    run.finish(Mode::Smart, steps, saturated_at, cycle_cost + partial)
}

/// Conventional-sensor runs, one per seed, in seed order. The remote side
/// runs a Kalman filter that updates only on received measurements;
/// `Tr(P_t)` is the trace of its one-step prediction covariance.
pub fn simulate_conventional(
    sys: &LtiSystem,
    filter: &SteadyStateFilter,
    channel: &MarkovChannel,
    config: &SimulationConfig,
) -> Result<Vec<RunResult>, SimulationError> {
    let law = initial_law(channel, config)?;
    let init_sqrt = psd_sqrt(&filter.posterior)?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            run_conventional(
                sys,
                filter,
                &init_sqrt,
                channel,
                config,
                seed,
                law.as_deref(),
            )
        })
        .collect()
}

fn run_conventional(
    sys: &LtiSystem,
    filter: &SteadyStateFilter,
    init_sqrt: &Matrix,
    channel: &MarkovChannel,
    config: &SimulationConfig,
    seed: u64,
    law: Option<&[f64]>,
) -> Result<RunResult, SimulationError> {
    let mut run = Run::new(channel, config, seed, law);
    let a = sys.a();
    let n = sys.state_dim();
    let mut cov = filter.posterior.clone();
    let mut err = gaussian(init_sqrt, &mut run.streams.initial);
    let mut saturated_at = None;
    let mut steps = 0;
    for t in 0..config.horizon {
        let predicted = sys.holding_map(&cov)?;
        let trace = predicted.trace();
        if !(trace <= SATURATION_LIMIT) {
            saturated_at = Some(t);
            break;
        }
        let w = gaussian(sys.sqrt_w(), &mut run.streams.process);
        let v = gaussian(sys.sqrt_v(), &mut run.streams.measurement);
        let prior = axpy(&a.mul_vec(&err), &w, -1.0);
        let sq = norm_sq(&prior);
        if run.record_and_transmit(t, trace, sq) {
            let (gain, posterior) = sys.measurement_update(&predicted)?;
            let closed = &Matrix::identity(n) - &(&gain * sys.c());
            err = axpy(&closed.mul_vec(&prior), &gain.mul_vec(&v), 1.0);
            cov = posterior;
        } else {
            err = prior;
            cov = predicted;
        }
        steps = t + 1;
    }
    Ok(run.finish(Mode::Conventional, steps, saturated_at, 0.0))
}

/// Dispatches on `config.mode`.
pub fn simulate(
    sys: &LtiSystem,
    filter: &SteadyStateFilter,
    channel: &MarkovChannel,
    config: &SimulationConfig,
) -> Result<Vec<RunResult>, SimulationError> {
    match config.mode {
        Mode::Smart => simulate_smart(sys, filter, channel, config),
        Mode::Conventional => simulate_conventional(sys, filter, channel, config),
    }
}

/// Cross-seed summary of the non-saturated runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub runs: usize,
    pub saturated_runs: usize,
    pub mean_j: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub mean_sq_err: f64,
    pub total_cycles: u64,
    /// Total variation distance between pooled post-success frequencies
    /// and `β`.
    pub tv_post_success: Option<f64>,
    /// Total variation distance between the pooled cycle-length histogram
    /// and the cycle-length pmf under `β`, lengths above
    /// [`CYCLE_HISTOGRAM_BINS`] pooled into one bin.
    pub tv_cycle_length: Option<f64>,
}

pub fn ensemble(
    results: &[RunResult],
    model: Option<&CycleModel>,
) -> Result<EnsembleSummary, SimulationError> {
    if results.len() < 2 {
        return Err(SimulationError::TooFewRuns(results.len()));
    }
    let ok: Vec<&RunResult> = results.iter().filter(|r| !r.saturated).collect();
    if ok.is_empty() {
        return Err(SimulationError::AllSaturated);
    }
    let k = ok.len() as f64;
    let mean_j = ok.iter().map(|r| r.empirical_j).sum::<f64>() / k;
    let mean_sq_err = ok.iter().map(|r| r.empirical_sq_err).sum::<f64>() / k;
    let (std_error, ci95) = if ok.len() >= 2 {
        let var = ok
            .iter()
            .map(|r| (r.empirical_j - mean_j).powi(2))
            .sum::<f64>()
            / (k - 1.0);
        let se = (var / k).sqrt();
        let t = StudentsT::new(0.0, 1.0, k - 1.0)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        (se, (mean_j - t * se, mean_j + t * se))
    } else {
        (f64::NAN, (f64::NAN, f64::NAN))
    };
    let total_cycles = ok.iter().map(|r| r.completed_cycles).sum();

    let (tv_post_success, tv_cycle_length) = match model {
        Some(m) if total_cycles > 0 => {
            let states = m.beta_padded().len();
            let mut counts = vec![0u64; states];
            for r in &ok {
                for (c, x) in counts.iter_mut().zip(&r.post_success_counts) {
                    *c += x;
                }
            }
            let tv_post = tv_against(&counts, &m.beta_padded());

            let mut hist = vec![0u64; CYCLE_HISTOGRAM_BINS + 1];
            for r in &ok {
                for (&len, &c) in &r.cycle_length_histogram {
                    hist[(len - 1).min(CYCLE_HISTOGRAM_BINS)] += c;
                }
            }
            let mut pmf = m.marginal_length_pmf(CYCLE_HISTOGRAM_BINS);
            let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);
            pmf.push(tail);
            (Some(tv_post), Some(tv_against(&hist, &pmf)))
        }
        _ => (None, None),
    };
    Ok(EnsembleSummary {
        runs: results.len(),
        saturated_runs: results.len() - ok.len(),
        mean_j,
        std_error,
        ci95,
        mean_sq_err,
        total_cycles,
        tv_post_success,
        tv_cycle_length,
    })
}

/// `½ Σ |counts/total − p|`.
pub fn tv_against(counts: &[u64], p: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 1.0;
    }
    0.5 * counts
        .iter()
        .zip(p)
        .map(|(&c, &q)| (c as f64 / total as f64 - q).abs())
        .sum::<f64>()
}

/// Trajectory dump with header `t,channel_state,gamma,delta,trace_Pt`.
/// Channel states are written one-based.
pub fn trajectory_csv(rows: &[TrajectoryRow], digits: usize) -> String {
    let mut out = String::from("t,channel_state,gamma,delta,trace_Pt\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t,
            r.channel_state + 1,
            u8::from(r.gamma),
            r.delta,
            format_sig(r.trace_pt, digits)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::analytic_mse;
    use crate::lti::tests::{pendubot, scalar};

    fn channel(p: &[&[f64]], d: &[f64]) -> MarkovChannel {
        MarkovChannel::new(Matrix::from_rows(p).unwrap(), d.to_vec()).unwrap()
    }

    fn default_channel() -> MarkovChannel {
        channel(&[&[0.1, 0.9], &[0.5, 0.5]], &[0.8, 0.1])
    }

    fn setup() -> (LtiSystem, SteadyStateFilter) {
        let sys = pendubot();
        let f = sys.riccati_steady_state(1e-12, 100_000).unwrap();
        (sys, f)
    }

    #[test]
    fn perfect_channel_gives_c1() {
        let (sys, f) = setup();
        let c1 = sys.error_trace(&f, 1).unwrap().finite().unwrap();
        let ch = channel(&[&[0.1, 0.9], &[0.5, 0.5]], &[0.0, 0.0]);
        let r = &simulate_smart(
            &sys,
            &f,
            &ch,
            &SimulationConfig::new(1000, vec![1], Mode::Smart),
        )
        .unwrap()[0];
        assert_eq!(r.delta_histogram, vec![1000]);
        assert!((r.empirical_j - c1).abs() < 1e-12 * c1);
        assert!(!r.saturated);
    }

    #[test]
    fn no_deliveries_saturates() {
        let (sys, f) = setup();
        let ch = channel(&[&[0.1, 0.9], &[0.5, 0.5]], &[1.0, 1.0]);
        for mode in [Mode::Smart, Mode::Conventional] {
            let r = &simulate(
                &sys,
                &f,
                &ch,
                &SimulationConfig::new(100_000, vec![3], mode),
            )
            .unwrap()[0];
            assert!(r.saturated, "{mode:?}");
            assert!(r.steps < 100_000);
            assert_eq!(r.completed_cycles, 0);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (sys, f) = setup();
        let mut cfg = SimulationConfig::new(5000, vec![9, 10], Mode::Smart);
        cfg.record_trajectory = true;
        let a = simulate_smart(&sys, &f, &default_channel(), &cfg).unwrap();
        let b = simulate_smart(&sys, &f, &default_channel(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].empirical_j, a[1].empirical_j);
    }

    #[test]
    fn aoi_and_cycle_identities() {
        let (sys, f) = setup();
        let mut cfg = SimulationConfig::new(20_000, vec![4], Mode::Smart);
        cfg.record_trajectory = true;
        let r = &simulate_smart(&sys, &f, &default_channel(), &cfg).unwrap()[0];
        let rows = r.trajectory.as_ref().unwrap();
        assert_eq!(rows[0].delta, 0);
        for w in rows.windows(2) {
            assert_eq!(w[1].delta == 0, w[0].gamma);
        }
        let hist_total: u64 = r.delta_histogram.iter().sum();
        assert_eq!(hist_total as usize, r.steps);
        // completed cycles plus the trailing partial one cover the span
        let completed: usize = r
            .cycle_length_histogram
            .iter()
            .map(|(l, c)| l * *c as usize)
            .sum();
        let trailing = rows
            .last()
            .map_or(0, |x| if x.gamma { 0 } else { x.delta + 1 });
        assert_eq!(completed + trailing, r.steps - r.prefix_length);
        assert!((r.cycle_cost - r.cycle_span_trace).abs() <= 1e-9 * r.cycle_span_trace);
        let starts: u64 = r.post_success_counts.iter().sum();
        assert_eq!(starts, r.completed_cycles + u64::from(trailing > 0));
    }

    #[test]
    fn conventional_lossless_tends_to_prediction_trace() {
        let (sys, f) = setup();
        let ch = channel(&[&[0.1, 0.9], &[0.5, 0.5]], &[0.0, 0.0]);
        let r = &simulate_conventional(
            &sys,
            &f,
            &ch,
            &SimulationConfig::new(2000, vec![1], Mode::Conventional),
        )
        .unwrap()[0];
        let c1 = sys.error_trace(&f, 1).unwrap().finite().unwrap();
        assert!((r.empirical_j - c1).abs() < 1e-8 * c1);
    }

    #[test]
    fn conventional_dominates_smart_per_seed() {
        let (sys, f) = setup();
        for d in [[0.3, 0.1], [0.5, 0.4], [0.2, 0.6]] {
            let ch = channel(&[&[0.1, 0.9], &[0.5, 0.5]], &d);
            let seeds = vec![1, 2, 3];
            let s = simulate_smart(
                &sys,
                &f,
                &ch,
                &SimulationConfig::new(5000, seeds.clone(), Mode::Smart),
            )
            .unwrap();
            let c = simulate_conventional(
                &sys,
                &f,
                &ch,
                &SimulationConfig::new(5000, seeds, Mode::Conventional),
            )
            .unwrap();
            for (s, c) in s.iter().zip(&c) {
                assert_eq!(s.delta_histogram, c.delta_histogram);
                assert!(
                    c.empirical_j >= s.empirical_j,
                    "{d:?}: {} < {}",
                    c.empirical_j,
                    s.empirical_j
                );
            }
        }
    }

    #[test]
    fn scalar_iid_matches_analytic() {
        let sys = scalar(1.2, 1.0, 1.0);
        let f = sys.riccati_steady_state(1e-13, 10_000).unwrap();
        let ch = channel(&[&[0.5, 0.5], &[0.5, 0.5]], &[0.3, 0.3]);
        let j = analytic_mse(&sys, &f, &ch, 1e-12).unwrap().value().unwrap();
        let runs = simulate_smart(
            &sys,
            &f,
            &ch,
            &SimulationConfig::new(50_000, (0..4).collect(), Mode::Smart),
        )
        .unwrap();
        let s = ensemble(&runs, Some(&CycleModel::new(&ch).unwrap())).unwrap();
        assert!((s.mean_j - j).abs() < 0.03 * j, "{} vs {j}", s.mean_j);
        assert!((s.mean_sq_err - j).abs() < 0.1 * j);
        assert!(s.tv_cycle_length.unwrap() < 0.02);
    }

    #[test]
    fn ensemble_basics() {
        let (sys, f) = setup();
        let runs = simulate_smart(
            &sys,
            &f,
            &default_channel(),
            &SimulationConfig::new(2000, vec![5, 5], Mode::Smart),
        )
        .unwrap();
        let s = ensemble(&runs, None).unwrap();
        assert_eq!(s.std_error, 0.0);
        assert_eq!(s.ci95.0, s.mean_j);
        assert!(matches!(
            ensemble(&runs[..1], None),
            Err(SimulationError::TooFewRuns(1))
        ));
    }

    #[test]
    fn initial_state_override_and_errors() {
        let (sys, f) = setup();
        let mut cfg = SimulationConfig::new(10, vec![1], Mode::Smart);
        cfg.record_trajectory = true;
        cfg.initial_state = InitialState::State(1);
        let r = &simulate_smart(&sys, &f, &default_channel(), &cfg).unwrap()[0];
        assert_eq!(r.trajectory.as_ref().unwrap()[0].channel_state, 1);
        cfg.initial_state = InitialState::State(2);
        assert!(matches!(
            simulate_smart(&sys, &f, &default_channel(), &cfg),
            Err(SimulationError::InitialState { .. })
        ));
        cfg.initial_state = InitialState::Stationary;
        cfg.seeds.clear();
        assert!(matches!(
            simulate_smart(&sys, &f, &default_channel(), &cfg),
            Err(SimulationError::NoSeeds)
        ));
    }

    #[test]
    fn trajectory_csv_format() {
        let rows = [TrajectoryRow {
            t: 0,
            channel_state: 1,
            gamma: true,
            delta: 0,
            trace_pt: 7.123456789,
        }];
        assert_eq!(
            trajectory_csv(&rows, 6),
            "t,channel_state,gamma,delta,trace_Pt\n0,2,1,0,7.12346\n"
        );
    }

    #[test]
    fn config_serde() {
        let cfg: SimulationConfig =
            serde_json::from_str(r#"{"horizon": 10, "seeds": [1], "initial_state": "stationary"}"#)
                .unwrap();
        assert_eq!(cfg.initial_state, InitialState::Stationary);
        let cfg: SimulationConfig = serde_json::from_str(
            r#"{"horizon": 10, "seeds": [1], "initial_state": 1, "mode": "conventional"}"#,
        )
        .unwrap();
        assert_eq!(cfg.initial_state, InitialState::State(1));
        assert_eq!(cfg.mode, Mode::Conventional);
        let back: SimulationConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<SimulationConfig>(
            r#"{"horizon": 1, "seeds": [1], "initial_state": "worst"}"#
        )
        .is_err());
    }
}
