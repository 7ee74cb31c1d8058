//! Finite-state Markov fading channel.
//!
//! The transition matrix is stored row-stochastically: `P[i][j]` is the
//! probability of moving from state `i` to state `j`. State indices are
//! zero-based throughout the API.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::{null_vector, Matrix, MatrixError, DEFAULT_TOL};

/// Tolerance on row sums of the transition matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("transition matrix must be square and non-empty, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("expected {expected} dropout probabilities, got {got}")]
    DropoutLength { expected: usize, got: usize },
    #[error("transition probability P[{row}][{col}] = {value} is outside [0, 1]")]
    TransitionRange { row: usize, col: usize, value: f64 },
    #[error("row {row} of the transition matrix sums to {sum}, not 1")]
    RowSum { row: usize, sum: f64 },
    #[error("dropout probability d[{index}] = {value} is outside [0, 1]")]
    DropoutRange { index: usize, value: f64 },
    #[error("channel is not ergodic ({reason})")]
    NotErgodic { reason: &'static str },
    #[error("every state drops with probability one; no post-success state exists")]
    NoPostSuccessState,
    #[error("invalid SNR parameter: {0}")]
    InvalidSnr(String),
}

/// Transition matrix plus per-state dropout probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovChannel {
    transition: Matrix,
    dropout: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gains: Option<Vec<f64>>,
}

impl MarkovChannel {
    /// Checks shape, probability ranges and row sums. Ergodicity is left
    /// to [`Self::validate`] so that periodic chains can still be analysed.
    pub fn new(transition: Matrix, dropout: Vec<f64>) -> Result<Self, ChannelError> {
        let (rows, cols) = transition.shape();
        if rows == 0 || rows != cols {
            return Err(ChannelError::Shape { rows, cols });
        }
        if dropout.len() != rows {
            return Err(ChannelError::DropoutLength {
                expected: rows,
                got: dropout.len(),
            });
        }
        for row in 0..rows {
            for col in 0..cols {
                let value = transition[(row, col)];
                if !(0.0..=1.0).contains(&value) {
                    return Err(ChannelError::TransitionRange { row, col, value });
                }
            }
            let sum: f64 = transition.row(row).iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ChannelError::RowSum { row, sum });
            }
        }
        for (index, &value) in dropout.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ChannelError::DropoutRange { index, value });
            }
        }
        Ok(Self {
            transition,
            dropout,
            gains: None,
        })
    }

    /// Channel whose dropout probabilities come from per-state SNRs via
    /// [`dropout_from_snr`].
    pub fn from_snr(
        transition: Matrix,
        gains: Vec<f64>,
        blocklength: u32,
        rate: f64,
    ) -> Result<Self, ChannelError> {
        let dropout = gains
            .iter()
            .map(|&h| dropout_from_snr(h, blocklength, rate))
            .collect::<Result<Vec<_>, _>>()?;
        let mut channel = Self::new(transition, dropout)?;
        channel.gains = Some(gains);
        Ok(channel)
    }

    /// Same transition matrix with different dropout probabilities.
    pub fn with_dropout(&self, dropout: Vec<f64>) -> Result<Self, ChannelError> {
        Self::new(self.transition.clone(), dropout)
    }

    pub fn states(&self) -> usize {
        self.dropout.len()
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn dropout(&self) -> &[f64] {
        &self.dropout
    }

    pub fn gains(&self) -> Option<&[f64]> {
        self.gains.as_deref()
    }

    /// `DM = diag(d) · P`.
    pub fn dm(&self) -> Matrix {
        &Matrix::from_diag(&self.dropout) * &self.transition
    }

    /// `(I − D) M`.
    pub fn success_transition(&self) -> Matrix {
        let keep: Vec<f64> = self.dropout.iter().map(|d| 1.0 - d).collect();
        &Matrix::from_diag(&keep) * &self.transition
    }

    pub fn is_lossless(&self) -> bool {
        self.dropout.iter().all(|&d| d == 0.0)
    }

    pub fn always_drops(&self) -> bool {
        self.dropout.iter().all(|&d| d == 1.0)
    }

    /// Irreducibility, aperiodicity and primitivity of the transition graph.
    pub fn validate(&self) -> ChannelReport {
        let n = self.states();
        let adj = Pattern::of(&self.transition);
        // (I + P)^{n−1} > 0 iff irreducible
        let mut reach = adj.with_diagonal();
        let step = reach.clone();
        for _ in 1..n {
            if reach.all_positive() {
                break;
            }
            reach = reach.mul(&step);
        }
        let irreducible = reach.all_positive();
        // Wielandt: primitive iff P^k > 0 for k = (n−1)² + 1
        let wielandt = (n - 1) * (n - 1) + 1;
        let mut power = adj.clone();
        let mut primitive_at = None;
        for k in 1..=wielandt {
            if power.all_positive() {
                primitive_at = Some(k);
                break;
            }
            power = power.mul(&adj);
        }
        let primitive = primitive_at.is_some();
        ChannelReport {
            states: n,
            row_stochastic: true,
            irreducible,
            aperiodic: primitive,
            ergodic: primitive,
            primitive_exponent: primitive_at,
        }
    }

    pub fn ensure_ergodic(&self) -> Result<(), ChannelError> {
        let report = self.validate();
        if !report.irreducible {
            return Err(ChannelError::NotErgodic {
                reason: "reducible",
            });
        }
        if !report.ergodic {
            return Err(ChannelError::NotErgodic { reason: "periodic" });
        }
        Ok(())
    }

    /// Left fixed vector `πP = π`, normalised to sum one.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>, ChannelError> {
        self.ensure_ergodic()?;
        stationary_of(&self.transition)
    }

    /// States `j` with `max_i (1 − d_i) p_ij > 0`.
    pub fn post_success_set(&self) -> Result<PostSuccessSet, ChannelError> {
        let succ = self.success_transition();
        let n = self.states();
        let indices: Vec<usize> = (0..n)
            .filter(|&j| (0..n).any(|i| succ[(i, j)] > 0.0))
            .collect();
        if indices.is_empty() {
            return Err(ChannelError::NoPostSuccessState);
        }
        Ok(PostSuccessSet { indices })
    }

    /// One slot of the channel from `state`: first draws the dropout with
    /// probability `d[state]`, then the next state from row `state` of `P`.
    pub fn sample_step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> (usize, bool) {
        let dropped = rng.random::<f64>() < self.dropout[state];
        (self.sample_transition(state, rng), dropped)
    }

    /// Next state drawn from row `state` of `P`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        sample_index(self.transition.row(state), rng)
    }
}

/// Draws an index from a probability vector by inverse CDF.
pub fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    // rounding left u above the cumulative sum
    last
}

pub(crate) fn stationary_of(p: &Matrix) -> Result<Vec<f64>, ChannelError> {
    let n = p.rows();
    let z = &Matrix::identity(n) - &p.transpose();
    let mut v = null_vector(&z, DEFAULT_TOL)?;
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x = (*x / sum).max(0.0);
    }
    Ok(v)
}

/// Boolean zero pattern of a nonnegative matrix.
#[derive(Debug, Clone)]
struct Pattern {
    n: usize,
    bits: Vec<bool>,
}

impl Pattern {
    fn of(m: &Matrix) -> Self {
        Self {
            n: m.rows(),
            bits: m.as_slice().iter().map(|&x| x > 0.0).collect(),
        }
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    fn with_diagonal(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.bits[i * self.n + i] = true;
        }
        out
    }

    fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut bits = vec![false; n * n];
        for i in 0..n {
            for k in 0..n {
                if self.get(i, k) {
                    for j in 0..n {
                        bits[i * n + j] |= other.get(k, j);
                    }
                }
            }
        }
        Self { n, bits }
    }

    fn all_positive(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }
}

/// Structural properties of a channel.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelReport {
    pub states: usize,
    pub row_stochastic: bool,
    pub irreducible: bool,
    /// Only meaningful for irreducible chains, where it equals `ergodic`.
    pub aperiodic: bool,
    /// Irreducible and aperiodic, i.e. `P^k > 0` for some `k`.
    pub ergodic: bool,
    /// Smallest `k` with `P^k > 0`.
    pub primitive_exponent: Option<usize>,
}

/// Channel states reachable in the slot right after a successful
/// transmission (zero-based, ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostSuccessSet {
    pub indices: Vec<usize>,
}

impl PostSuccessSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.indices.binary_search(&state).is_ok()
    }

    /// Position of `state` within the set.
    pub fn position(&self, state: usize) -> Option<usize> {
        self.indices.binary_search(&state).ok()
    }
}

/// Packet error probability of a length-`blocklength` code at `rate`
/// bits per channel use over an AWGN slot with SNR `snr`, by the normal
/// approximation `Q(√(ζ/ν)(C − R))` with `C = log₂(1 + h)` and
/// `ν = h(2 + h)/(1 + h)² · (log₂ e)²`.
pub fn dropout_from_snr(snr: f64, blocklength: u32, rate: f64) -> Result<f64, ChannelError> {
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(ChannelError::InvalidSnr(format!(
            "snr must be positive, got {snr}"
        )));
    }
    if blocklength == 0 {
        return Err(ChannelError::InvalidSnr(
            "blocklength must be at least 1".into(),
        ));
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(ChannelError::InvalidSnr(format!(
            "rate must be positive, got {rate}"
        )));
    }
    let capacity = (1.0 + snr).log2();
    let log2e = std::f64::consts::LOG2_E;
    let dispersion = snr * (2.0 + snr) / ((1.0 + snr) * (1.0 + snr)) * log2e * log2e;
    let x = (blocklength as f64 / dispersion).sqrt() * (capacity - rate);
    Ok(q_function(x).clamp(0.0, 1.0))
}

/// Gaussian tail `Q(x) = ½ erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}
