//! Stability test, estimation-cycle model and analytic average MSE.
//!
//! An estimation cycle runs from one successful reception to the next.
//! With `DM = diag(d) P`, a cycle that starts in channel state `m` has
//! length `i` with probability `[(DM)^{i−1} (I − D) M 1]_m`, and the
//! post-success states visited at cycle starts form a Markov chain with
//! transition matrix `G = (I − DM)^{-1} (I − D) M` restricted to the
//! post-success set. Its stationary law `β` weights the cycle statistics,
//! and the average MSE is `J = E[C] / E[T]` with `C = Σ_{j≤T} c(j)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, MarkovChannel, PostSuccessSet};
use crate::lti::{ErrorTraceTable, LtiSystem, SteadyStateFilter, SystemError};
use crate::matrix::{
    largest_singular_value, null_vector, perron_root, solve_linear, spectral_radius, Matrix,
    MatrixError,
};
use crate::numfmt::format_sig;

/// Tolerance for the spectral quantities entering the stability margin.
pub const MARGIN_TOL: f64 = 1e-12;
/// Inflation of the geometric tail ratio used to certify truncation.
pub const TAIL_GUARD: f64 = 1e-6;
/// Cap on the number of series terms.
pub const DEFAULT_MAX_TERMS: usize = 5_000_000;
/// Residual tolerance for `β`.
pub const BETA_TOL: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum CycleError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("every channel state drops with probability one; no estimation cycle exists")]
    NoCycle,
    #[error("channel is reducible")]
    Reducible,
    #[error("state {state} is not a post-success state")]
    NotPostSuccess { state: usize },
    #[error("cycle lengths start at 1")]
    ZeroLength,
    #[error("A is {got:?} but must be square")]
    NotSquare { got: (usize, usize) },
    #[error("series did not settle within {terms} terms")]
    SeriesNoConvergence { terms: usize },
    #[error("c(i) saturated at i = {index} before the series converged")]
    Saturated { index: usize },
    #[error("axis {axis}: {reason}")]
    InvalidAxis { axis: usize, reason: String },
}

/// `ρ(A)` and `σ_max(A)`, computed once per plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantSpectra {
    pub rho_a: f64,
    pub sigma_a: f64,
}

impl PlantSpectra {
    pub fn of(a: &Matrix) -> Result<Self, CycleError> {
        if !a.is_square() {
            return Err(CycleError::NotSquare { got: a.shape() });
        }
        Ok(Self {
            rho_a: spectral_radius(a, MARGIN_TOL, 64)?.value,
            sigma_a: largest_singular_value(a, MARGIN_TOL)?.value,
        })
    }
}

/// Stability verdicts and, when requested, the analytic MSE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub rho_a: f64,
    pub sigma_a: f64,
    pub rho_dm: f64,
    /// `ρ²(A) ρ(DM)`.
    pub margin: f64,
    pub stable_thm1: bool,
    /// `max_i Σ_j p_ij d_j`.
    pub max_expected_dropout: f64,
    /// `σ²(A) max_i Σ_j p_ij d_j`.
    pub margin_eq15: f64,
    pub stable_eq15: bool,
    pub mse: Option<Mse>,
}

/// Necessary and sufficient test `ρ²(A) ρ(DM) < 1`, together with the
/// more conservative singular-value test.
pub fn stability_margin(
    a: &Matrix,
    channel: &MarkovChannel,
) -> Result<StabilityReport, CycleError> {
    stability_with(PlantSpectra::of(a)?, channel)
}

pub fn stability_with(
    spectra: PlantSpectra,
    channel: &MarkovChannel,
) -> Result<StabilityReport, CycleError> {
    let rho_dm = perron_root(&channel.dm(), MARGIN_TOL)?.value;
    let margin = spectra.rho_a * spectra.rho_a * rho_dm;
    let max_expected_dropout = channel
        .transition()
        .mul_vec(channel.dropout())
        .into_iter()
        .fold(0.0, f64::max);
    let margin_eq15 = spectra.sigma_a * spectra.sigma_a * max_expected_dropout;
    Ok(StabilityReport {
        rho_a: spectra.rho_a,
        sigma_a: spectra.sigma_a,
        rho_dm,
        margin,
        stable_thm1: margin < 1.0,
        max_expected_dropout,
        margin_eq15,
        stable_eq15: margin_eq15 < 1.0,
        mse: None,
    })
}

/// Stability report with the analytic MSE filled in.
pub fn stability_report(
    sys: &LtiSystem,
    filter: &SteadyStateFilter,
    channel: &MarkovChannel,
    tol: f64,
) -> Result<StabilityReport, CycleError> {
    let mut report = stability_margin(sys.a(), channel)?;
    let mut traces = ErrorTraceTable::new(sys, filter);
    report.mse = Some(mse_from_report(
        &report,
        channel,
        &mut |i| traces.get(i).ok_or_else(|| saturated(&traces)),
        tol,
        DEFAULT_MAX_TERMS,
    )?);
    Ok(report)
}

fn saturated(traces: &ErrorTraceTable<'_>) -> CycleError {
    CycleError::Saturated {
        index: traces.saturated_at().unwrap_or(0),
    }
}

/// Post-success chain of a channel.
#[derive(Debug, Clone, Serialize)]
pub struct CycleModel {
    pub post_success: PostSuccessSet,
    /// `G = (I − DM)^{-1} (I − D) M`, full `M × M`.
    pub g: Matrix,
    /// `G` restricted to the post-success states.
    pub g_restricted: Matrix,
    /// Stationary law of the post-success chain, indexed like
    /// `post_success.indices`.
    pub beta: Vec<f64>,
    #[serde(skip)]
    dm: Matrix,
    #[serde(skip)]
    keep: Vec<f64>,
}

pub fn cycle_model(channel: &MarkovChannel) -> Result<CycleModel, CycleError> {
    CycleModel::new(channel)
}

impl CycleModel {
    /// Builds `G`, its restriction and `β`. Periodic channels are accepted;
    /// reducible ones and channels that always drop are not.
    pub fn new(channel: &MarkovChannel) -> Result<Self, CycleError> {
        if channel.always_drops() {
            return Err(CycleError::NoCycle);
        }
        if !channel.validate().irreducible {
            return Err(CycleError::Reducible);
        }
        let post_success = channel.post_success_set()?;
        let n = channel.states();
        let dm = channel.dm();
        let succ = channel.success_transition();
        let g = solve_linear(&(&Matrix::identity(n) - &dm), &succ)?;
        let idx = &post_success.indices;
        let g_restricted = g.select(idx, idx);
        let k = idx.len();
        let z = (&Matrix::identity(k) - &g_restricted).transpose();
        let mut beta = null_vector(&z, BETA_TOL)?;
        let sum: f64 = beta.iter().sum();
        beta.iter_mut().for_each(|b| *b /= sum);
        Ok(Self {
            post_success,
            g,
            g_restricted,
            beta,
            dm,
            keep: channel.dropout().iter().map(|d| 1.0 - d).collect(),
        })
    }

    /// `β` as a length-`M` vector, zero outside the post-success set.
    pub fn beta_padded(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.keep.len()];
        for (&j, &b) in self.post_success.indices.iter().zip(&self.beta) {
            out[j] = b;
        }
        out
    }

    /// `P(T = i | S = start)` for `i ≥ 1`.
    pub fn length_pmf(&self, start: usize, i: usize) -> Result<f64, CycleError> {
        if i == 0 {
            return Err(CycleError::ZeroLength);
        }
        Ok(*self.length_pmf_table(start, i)?.last().expect("i >= 1"))
    }

    /// `P(T = i | S = start)` for `i = 1..=n`.
    pub fn length_pmf_table(&self, start: usize, n: usize) -> Result<Vec<f64>, CycleError> {
        if !self.post_success.contains(start) {
            return Err(CycleError::NotPostSuccess { state: start });
        }
        let mut r = vec![0.0; self.keep.len()];
        r[start] = 1.0;
        Ok(self.pmf_from(r, n))
    }

    /// Cycle-length pmf under `β`, for `i = 1..=n`.
    pub fn marginal_length_pmf(&self, n: usize) -> Vec<f64> {
        self.pmf_from(self.beta_padded(), n)
    }

    fn pmf_from(&self, mut r: Vec<f64>, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(dot(&r, &self.keep));
            r = self.dm.vec_mul(&r);
        }
        out
    }

    /// `E[T] = βᵀ (I − DM)^{-1} 1`.
    pub fn expected_length(&self) -> Result<f64, CycleError> {
        let n = self.keep.len();
        let ones = Matrix::column(&vec![1.0; n]);
        let x = solve_linear(&(&Matrix::identity(n) - &self.dm), &ones)?;
        Ok(dot(&self.beta_padded(), x.as_slice()))
    }
}

/// `P(T = i | S = start)` for a channel; `start` must be a post-success state.
pub fn cycle_length_pmf(
    channel: &MarkovChannel,
    start: usize,
    i: usize,
) -> Result<f64, CycleError> {
    CycleModel::new(channel)?.length_pmf(start, i)
}

/// Analytic average MSE.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mse {
    Finite(MseEstimate),
    Unbounded,
}

impl Mse {
    pub fn value(&self) -> Option<f64> {
        match self {
            Mse::Finite(e) => Some(e.j),
            Mse::Unbounded => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Mse::Unbounded)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseEstimate {
    pub j: f64,
    /// `E[T]`; absent when the channel never delivers.
    pub expected_length: Option<f64>,
    /// `E[C]`; absent when the channel never delivers.
    pub expected_cost: Option<f64>,
    /// Number of series terms summed.
    pub terms: usize,
    /// Bound on the relative truncation error of `j`; infinite when the
    /// tail could not be certified.
    pub tail_bound: f64,
    /// The margin lies within `tol` of one.
    pub widened: bool,
}

/// `J = E[C] / E[T]`, or [`Mse::Unbounded`] when `ρ²(A) ρ(DM) ≥ 1`.
///
/// Both expectations are summed term by term as `Σ_j c(j) P(T ≥ j)` and
/// `Σ_j P(T ≥ j)` with `P(T ≥ j) = βᵀ (DM)^{j−1} 1`. Summation stops once
/// the window maxima of both term sequences shrink at least as fast as
/// `q = max(ρ²(A), 1) ρ(DM) + 1e-6` and the geometric tail bound is below
/// `tol` times the partial sum.
pub fn analytic_mse(
    sys: &LtiSystem,
    filter: &SteadyStateFilter,
    channel: &MarkovChannel,
    tol: f64,
) -> Result<Mse, CycleError> {
    Ok(stability_report(sys, filter, channel, tol)?
        .mse
        .expect("stability_report fills the MSE"))
}

/// Core of [`analytic_mse`] over a supplied `c(i)` source.
pub fn mse_from_report(
    report: &StabilityReport,
    channel: &MarkovChannel,
    trace: &mut dyn FnMut(usize) -> Result<f64, CycleError>,
    tol: f64,
    max_terms: usize,
) -> Result<Mse, CycleError> {
    if !(tol > 0.0) {
        return Err(MatrixError::InvalidTolerance(tol).into());
    }
    if !report.stable_thm1 {
        return Ok(Mse::Unbounded);
    }
    let widened = report.margin >= 1.0 - tol;
    if channel.always_drops() {
        return limit_of_traces(report, trace, tol, max_terms, widened);
    }
    let model = CycleModel::new(channel)?;
    let q = report.rho_a.powi(2).max(1.0) * report.rho_dm + TAIL_GUARD;
    let w = channel.states();
    let qw = q.powi(w as i32);

    let mut r = model.beta_padded();
    let mut cost = 0.0;
    let mut length = 0.0;
    let mut cost_terms: Vec<f64> = Vec::new();
    let mut length_terms: Vec<f64> = Vec::new();
    let mut settled = 0;
    for j in 1..=max_terms {
        let s: f64 = r.iter().sum();
        let t = if s > 0.0 { trace(j)? * s } else { 0.0 };
        cost += t;
        length += s;
        cost_terms.push(t);
        length_terms.push(s);
        r = model.dm.vec_mul(&r);

        if j < 2 * w {
            continue;
        }
        let (cur_t, prev_t) = window_maxima(&cost_terms, w);
        let (cur_s, prev_s) = window_maxima(&length_terms, w);
        if cur_s == 0.0 {
            return Ok(finite(cost, length, j, 0.0, widened));
        }
        if q >= 1.0 {
            // uncertifiable: stop once the latest window is negligible
            if cur_t * w as f64 <= tol * cost && cur_s * w as f64 <= tol * length {
                return Ok(finite(cost, length, j, f64::INFINITY, widened));
            }
            continue;
        }
        let decaying = cur_t <= qw * prev_t && cur_s <= qw * prev_s;
        settled = if decaying { settled + 1 } else { 0 };
        if settled >= w {
            let factor = w as f64 * qw / (1.0 - qw);
            let tail_c = cur_t * factor;
            let tail_t = cur_s * factor;
            if tail_c <= tol * cost && tail_t <= tol * length {
                let bound = tail_c / cost + tail_t / length;
                return Ok(finite(cost, length, j, bound, widened));
            }
        }
    }
    Err(CycleError::SeriesNoConvergence { terms: max_terms })
}

/// Maxima over the last `w` and the preceding `w` entries.
fn window_maxima(terms: &[f64], w: usize) -> (f64, f64) {
    let n = terms.len();
    let max = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
    (max(&terms[n - w..]), max(&terms[n - 2 * w..n - w]))
}

fn finite(cost: f64, length: f64, terms: usize, tail_bound: f64, widened: bool) -> Mse {
    Mse::Finite(MseEstimate {
        j: cost / length,
        expected_length: Some(length),
        expected_cost: Some(cost),
        terms,
        tail_bound,
        widened,
    })
}

/// With `D = I` and `ρ(A) < 1` the error never resets and `J = lim c(i)`.
fn limit_of_traces(
    report: &StabilityReport,
    trace: &mut dyn FnMut(usize) -> Result<f64, CycleError>,
    tol: f64,
    max_terms: usize,
    widened: bool,
) -> Result<Mse, CycleError> {
    let q = report.rho_a * report.rho_a + TAIL_GUARD;
    let mut prev = trace(1)?;
    let mut prev_step = f64::INFINITY;
    for i in 2..=max_terms {
        let c = trace(i)?;
        let step = (c - prev).abs();
        prev = c;
        let done = if q < 1.0 {
            step <= q * prev_step && step * q / (1.0 - q) <= tol * c
        } else {
            step <= tol * c
        };
        prev_step = step;
        if done || step == 0.0 {
            let bound = if step == 0.0 {
                0.0
            } else if q < 1.0 {
                step * q / (1.0 - q) / c
            } else {
                f64::INFINITY
            };
            return Ok(Mse::Finite(MseEstimate {
                j: c,
                expected_length: None,
                expected_cost: None,
                terms: i,
                tail_bound: bound,
                widened,
            }));
        }
    }
    Err(CycleError::SeriesNoConvergence { terms: max_terms })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One varied dropout component of a region scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    /// Zero-based channel state whose dropout probability varies.
    pub state: usize,
    #[serde(default)]
    pub min: f64,
    #[serde(default = "one")]
    pub max: f64,
    pub resolution: usize,
}

fn one() -> f64 {
    1.0
}

impl Axis {
    pub fn new(state: usize, min: f64, max: f64, resolution: usize) -> Self {
        Self {
            state,
            min,
            max,
            resolution,
        }
    }

    /// Evenly spaced grid including both end points.
    pub fn values(&self) -> Vec<f64> {
        let steps = (self.resolution - 1) as f64;
        (0..self.resolution)
            .map(|k| self.min + (self.max - self.min) * (k as f64 / steps))
            .collect()
    }
}

/// One grid point of a region scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCell {
    pub dropout: Vec<f64>,
    pub margin_thm1: f64,
    pub stable_thm1: bool,
    pub margin_eq15: f64,
    pub stable_eq15: bool,
    /// Analytic MSE; `None` when unbounded, when not requested, or when the
    /// series could not be summed.
    pub j: Option<f64>,
}

/// Stability verdicts over a grid of dropout probabilities, in row-major
/// order (the last axis varies fastest).
#[derive(Debug, Clone, Serialize)]
pub struct RegionScan {
    pub axes: Vec<Axis>,
    pub cells: Vec<RegionCell>,
}

/// Evaluates every cell of the grid spanned by `axes` on top of the
/// template channel's dropout vector. `filter` turns on the MSE column.
pub fn region_scan(
    sys: &LtiSystem,
    filter: Option<&SteadyStateFilter>,
    template: &MarkovChannel,
    axes: &[Axis],
    tol: f64,
) -> Result<RegionScan, CycleError> {
    let states = template.states();
    if axes.is_empty() {
        return Err(CycleError::InvalidAxis {
            axis: 0,
            reason: "at least one axis is required".into(),
        });
    }
    for (k, axis) in axes.iter().enumerate() {
        let bad = |reason: String| Err(CycleError::InvalidAxis { axis: k, reason });
        if axis.state >= states {
            return bad(format!(
                "state {} out of range for {states} states",
                axis.state
            ));
        }
        if axes[..k].iter().any(|a| a.state == axis.state) {
            return bad(format!("state {} appears twice", axis.state));
        }
        if axis.resolution < 2 {
            return bad("resolution must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&axis.min)
            || !(0.0..=1.0).contains(&axis.max)
            || axis.min > axis.max
        {
            return bad(format!(
                "range [{}, {}] must lie in [0, 1]",
                axis.min, axis.max
            ));
        }
    }
    let spectra = PlantSpectra::of(sys.a())?;
    let grids: Vec<Vec<f64>> = axes.iter().map(Axis::values).collect();
    let total: usize = grids.iter().map(Vec::len).product();

    // c(i) shared by every cell
    let traces: Option<Vec<f64>> = filter.map(|f| {
        let mut table = ErrorTraceTable::new(sys, f);
        let mut out = Vec::new();
        while out.len() < SCAN_TRACE_CAP {
            match table.get(out.len() + 1) {
                Some(v) => out.push(v),
                None => break,
            }
        }
        out
    });

    let cells = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut dropout = template.dropout().to_vec();
            let mut rem = flat;
            for (axis, grid) in axes.iter().zip(&grids).rev() {
                dropout[axis.state] = grid[rem % grid.len()];
                rem /= grid.len();
            }
            let channel = template.with_dropout(dropout.clone())?;
            let report = stability_with(spectra, &channel)?;
            let j = match &traces {
                Some(c) => {
                    let mut source = |i: usize| {
                        c.get(i - 1)
                            .copied()
                            .ok_or(CycleError::Saturated { index: i })
                    };
                    mse_from_report(&report, &channel, &mut source, tol, SCAN_TRACE_CAP)
                        .ok()
                        .and_then(|m| m.value())
                }
                None => None,
            };
            Ok(RegionCell {
                dropout,
                margin_thm1: report.margin,
                stable_thm1: report.stable_thm1,
                margin_eq15: report.margin_eq15,
                stable_eq15: report.stable_eq15,
                j,
            })
        })
        .collect::<Result<Vec<_>, CycleError>>()?;
    Ok(RegionScan {
        axes: axes.to_vec(),
        cells,
    })
}

const SCAN_TRACE_CAP: usize = 200_000;

impl RegionScan {
    /// Cells stable under the singular-value test but not under the
    /// spectral-radius test. Always empty for a correct implementation.
    pub fn containment_violations(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.stable_eq15 && !c.stable_thm1)
            .count()
    }

    /// `(stable under the spectral margin, stable under the singular-value margin)`.
    pub fn stable_counts(&self) -> (usize, usize) {
        let thm1 = self.cells.iter().filter(|c| c.stable_thm1).count();
        let eq15 = self.cells.iter().filter(|c| c.stable_eq15).count();
        (thm1, eq15)
    }

    /// CSV with header `d1,…,dM,margin_thm1,stable_thm1,margin_eq15,stable_eq15,J`
    /// and numbers at `digits` significant digits.
    pub fn to_csv(&self, digits: usize) -> String {
        let states = self.cells.first().map_or(0, |c| c.dropout.len());
        let mut out = String::new();
        for k in 1..=states {
            out.push_str(&format!("d{k},"));
        }
        out.push_str("margin_thm1,stable_thm1,margin_eq15,stable_eq15,J\n");
        for cell in &self.cells {
            for d in &cell.dropout {
                out.push_str(&format_sig(*d, digits));
                out.push(',');
            }
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                format_sig(cell.margin_thm1, digits),
                cell.stable_thm1,
                format_sig(cell.margin_eq15, digits),
                cell.stable_eq15,
                cell.j.map(|j| format_sig(j, digits)).unwrap_or_default(),
            ));
        }
        out
    }

    /// Heatmap of a two-axis scan. The first axis runs left to right, the
    /// second bottom to top. Colour ramp by cell class, lighter as the
    /// spectral margin grows:
    ///
    /// - stable under both tests: blue, `#2c7bb6` at margin 0 to `#abd9e9` at 1;
    /// - stable under the spectral-radius test only: green, `#1a9641` to `#d9ef8b`;
    /// - unstable: red, `#d7191c` at margin 1 to `#fdae61` at margin 2 and beyond.
    pub fn to_svg(&self) -> Option<String> {
        if self.axes.len() != 2 {
            return None;
        }
        let (nx, ny) = (self.axes[0].resolution, self.axes[1].resolution);
        let cell = (600 / nx.max(ny)).max(3);
        let (pad_l, pad_b, pad_t) = (60, 50, 20);
        let (w, h) = (pad_l + cell * nx + 20, pad_t + cell * ny + pad_b);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        svg.push_str(&format!(
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
        ));
        for (flat, c) in self.cells.iter().enumerate() {
            let (ix, iy) = (flat / ny, flat % ny);
            let x = pad_l + ix * cell;
            let y = pad_t + (ny - 1 - iy) * cell;
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\"/>\n",
                cell_color(c)
            ));
        }
        let (x0, y0) = (pad_l, pad_t + cell * ny);
        let label = |a: &Axis| format!("d{}", a.state + 1);
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
            x0 + cell * nx / 2,
            y0 + 35,
            label(&self.axes[0])
        ));
        svg.push_str(&format!(
            "<text x=\"15\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{}</text>\n",
            pad_t + cell * ny / 2,
            pad_t + cell * ny / 2,
            label(&self.axes[1])
        ));
        for (a, anchor_x, anchor_y) in [
            (&self.axes[0], x0, y0 + 15),
            (&self.axes[0], x0 + cell * nx, y0 + 15),
        ] {
            let v = if anchor_x == x0 { a.min } else { a.max };
            svg.push_str(&format!(
                "<text x=\"{anchor_x}\" y=\"{anchor_y}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                format_sig(v, 3)
            ));
        }
        for (v, y) in [(self.axes[1].min, y0), (self.axes[1].max, pad_t + 10)] {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{y}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                x0 - 5,
                format_sig(v, 3)
            ));
        }
        svg.push_str("</svg>\n");
        Some(svg)
    }
}

fn cell_color(c: &RegionCell) -> String {
    let lerp = |from: [u8; 3], to: [u8; 3], t: f64| {
        let t = t.clamp(0.0, 1.0);
        let ch = |k: usize| (from[k] as f64 + (to[k] as f64 - from[k] as f64) * t).round() as u8;
        format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
    };
    if c.stable_eq15 {
        lerp([0x2c, 0x7b, 0xb6], [0xab, 0xd9, 0xe9], c.margin_thm1)
    } else if c.stable_thm1 {
        lerp([0x1a, 0x96, 0x41], [0xd9, 0xef, 0x8b], c.margin_thm1)
    } else {
        lerp([0xd7, 0x19, 0x1c], [0xfd, 0xae, 0x61], c.margin_thm1 - 1.0)
    }
}
