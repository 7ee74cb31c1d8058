//! Plant and smart-sensor model.
//!
//! The plant is `x_{t+1} = A x_t + w_t`, `y_t = C x_t + v_t` with
//! `w ~ N(0, W)` and `v ~ N(0, V)`. The sensor runs a Kalman filter in
//! steady state; its posterior covariance is `P̄0`. While packets are lost
//! the remote error covariance evolves by the holding map
//! `v(X) = A X Aᵀ + W`, and `c(i) = Tr(vⁱ(P̄0))`.

use serde::Serialize;
use thiserror::Error;

use crate::matrix::{
    psd_sqrt, rank, solve_linear, spectral_radius, symmetric_eigen, Matrix, MatrixError,
    DEFAULT_RANK_TOL, DEFAULT_TOL,
};
use crate::SATURATION_LIMIT;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{name} has shape {got:?}, expected {expected:?}")]
    Shape {
        name: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{name} is not symmetric (max deviation {deviation:.3e})")]
    NotSymmetric { name: &'static str, deviation: f64 },
    #[error("{name} is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    Indefinite { name: &'static str, eigenvalue: f64 },
    #[error("V must be positive definite (smallest eigenvalue {eigenvalue:.3e})")]
    SingularMeasurementNoise { eigenvalue: f64 },
    #[error("innovation covariance C P Cᵀ + V is singular")]
    SingularInnovation,
    #[error("Riccati iteration did not converge in {iterations} steps (residual {residual:.3e})")]
    RiccatiNoConvergence { iterations: usize, residual: f64 },
    #[error("c(i) is defined for i >= 1")]
    ZeroIndex,
}

/// The quadruple `(A, C, W, V)` with cached noise square roots.
#[derive(Debug, Clone, Serialize)]
pub struct LtiSystem {
    a: Matrix,
    c: Matrix,
    w: Matrix,
    v: Matrix,
    #[serde(skip)]
    sqrt_w: Matrix,
    #[serde(skip)]
    sqrt_v: Matrix,
}

fn check_noise(name: &'static str, m: &Matrix) -> Result<Matrix, SystemError> {
    match psd_sqrt(m) {
        Ok(s) => Ok(s),
        Err(MatrixError::NotSymmetric { deviation }) => {
            Err(SystemError::NotSymmetric { name, deviation })
        }
        Err(MatrixError::NotPositiveSemidefinite { eigenvalue }) => {
            Err(SystemError::Indefinite { name, eigenvalue })
        }
        Err(e) => Err(e.into()),
    }
}

impl LtiSystem {
    /// Checks dimensions, symmetry and definiteness of the noise covariances.
    /// Observability and controllability are reported by [`Self::validate`].
    pub fn new(a: Matrix, c: Matrix, w: Matrix, v: Matrix) -> Result<Self, SystemError> {
        let n = a.rows();
        if n == 0 || !a.is_square() {
            return Err(SystemError::Shape {
                name: "A",
                expected: (n.max(1), n.max(1)),
                got: a.shape(),
            });
        }
        let m = c.rows();
        if m == 0 || c.cols() != n {
            return Err(SystemError::Shape {
                name: "C",
                expected: (m.max(1), n),
                got: c.shape(),
            });
        }
        if w.shape() != (n, n) {
            return Err(SystemError::Shape {
                name: "W",
                expected: (n, n),
                got: w.shape(),
            });
        }
        if v.shape() != (m, m) {
            return Err(SystemError::Shape {
                name: "V",
                expected: (m, m),
                got: v.shape(),
            });
        }
        let sqrt_w = check_noise("W", &w)?;
        let sqrt_v = check_noise("V", &v)?;
        let eig = symmetric_eigen(&v)?;
        let smallest = eig.values[0];
        let largest = eig.values[m - 1];
        if smallest <= 1e-14 * largest.abs().max(1.0) {
            return Err(SystemError::SingularMeasurementNoise {
                eigenvalue: smallest,
            });
        }
        Ok(Self {
            a,
            c,
            w: w.symmetrized(),
            v: v.symmetrized(),
            sqrt_w,
            sqrt_v,
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    /// Symmetric square root of `W`.
    pub fn sqrt_w(&self) -> &Matrix {
        &self.sqrt_w
    }

    /// Symmetric square root of `V`.
    pub fn sqrt_v(&self) -> &Matrix {
        &self.sqrt_v
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    /// Observability of `(A, C)` and controllability of `(A, √W)`, each
    /// decided on the rank of the stacked Krylov blocks
    /// `[Cᵀ, AᵀCᵀ, …, (Aᵀ)ⁿCᵀ]` and `[√W, A√W, …, Aⁿ√W]`.
    pub fn validate(&self) -> ValidationReport {
        let n = self.state_dim();
        let at = self.a.transpose();
        let mut block = self.c.transpose();
        let mut obs = block.clone();
        for _ in 0..n {
            block = &at * &block;
            obs = obs.hstack(&block).expect("row counts agree");
        }
        let mut block = self.sqrt_w.clone();
        let mut ctrl = block.clone();
        for _ in 0..n {
            block = &self.a * &block;
            ctrl = ctrl.hstack(&block).expect("row counts agree");
        }
        let observability_rank = rank(&obs, DEFAULT_RANK_TOL);
        let controllability_rank = rank(&ctrl, DEFAULT_RANK_TOL);
        let rho_a = spectral_radius(&self.a, DEFAULT_TOL, 64)
            .map(|e| e.value)
            .unwrap_or_else(|e| match e {
                MatrixError::NoConvergence { estimate, .. } => estimate,
                _ => f64::NAN,
            });
        ValidationReport {
            state_dim: n,
            observability_rank,
            controllability_rank,
            observable: observability_rank == n,
            controllable: controllability_rank == n,
            rho_a,
            unstable_plant: rho_a * rho_a >= 1.0,
        }
    }

    /// `v(X) = A X Aᵀ + W`, symmetrised.
    pub fn holding_map(&self, x: &Matrix) -> Result<Matrix, SystemError> {
        let n = self.state_dim();
        if x.shape() != (n, n) {
            return Err(SystemError::Shape {
                name: "X",
                expected: (n, n),
                got: x.shape(),
            });
        }
        Ok(self.hold(x))
    }

    fn hold(&self, x: &Matrix) -> Matrix {
        (&(&(&self.a * x) * &self.a.transpose()) + &self.w).symmetrized()
    }

    /// Measurement update of a prior covariance: returns the gain
    /// `K = P⁻Cᵀ(CP⁻Cᵀ+V)⁻¹` and the posterior `(I − KC)P⁻`.
    pub fn measurement_update(&self, prior: &Matrix) -> Result<(Matrix, Matrix), SystemError> {
        let ct = self.c.transpose();
        let pct = prior * &ct;
        let innovation = &(&self.c * &pct) + &self.v;
        // K = P Cᵀ S⁻¹  ⇔  Kᵀ = S⁻¹ (C P) since S and P are symmetric
        let gain_t = solve_linear(&innovation, &pct.transpose()).map_err(|e| match e {
            MatrixError::Singular => SystemError::SingularInnovation,
            other => other.into(),
        })?;
        let gain = gain_t.transpose();
        let n = self.state_dim();
        let posterior = &(&Matrix::identity(n) - &(&gain * &self.c)) * prior;
        Ok((gain, posterior.symmetrized()))
    }

    /// Steady-state posterior covariance by iterating the filter recursion
    /// from `P₀ = W`.
    pub fn riccati_steady_state(
        &self,
        tol: f64,
        max_iter: usize,
    ) -> Result<SteadyStateFilter, SystemError> {
        self.riccati_from(&self.w, tol, max_iter)
    }

    /// As [`Self::riccati_steady_state`] from an arbitrary posterior `P₀`.
    pub fn riccati_from(
        &self,
        p0: &Matrix,
        tol: f64,
        max_iter: usize,
    ) -> Result<SteadyStateFilter, SystemError> {
        let n = self.state_dim();
        if p0.shape() != (n, n) {
            return Err(SystemError::Shape {
                name: "P0",
                expected: (n, n),
                got: p0.shape(),
            });
        }
        if !(tol > 0.0) {
            return Err(MatrixError::InvalidTolerance(tol).into());
        }
        let mut posterior = p0.symmetrized();
        let mut residual = f64::INFINITY;
        for iter in 1..=max_iter {
            let prior = self.hold(&posterior);
            let (gain, next) = self.measurement_update(&prior)?;
            residual = (&next - &posterior).max_abs();
            posterior = next;
            if residual < tol {
                return Ok(SteadyStateFilter {
                    prior,
                    posterior,
                    gain,
                    iterations: iter,
                    residual,
                });
            }
        }
        Err(SystemError::RiccatiNoConvergence {
            iterations: max_iter,
            residual,
        })
    }

    /// `c(i) = Tr(vⁱ(P̄0))` for a single `i ≥ 1`.
    pub fn error_trace(
        &self,
        filter: &SteadyStateFilter,
        i: usize,
    ) -> Result<ErrorTrace, SystemError> {
        if i == 0 {
            return Err(SystemError::ZeroIndex);
        }
        Ok(self
            .error_traces(filter)
            .nth(i - 1)
            .expect("error trace sequence is infinite"))
    }

    /// The sequence `c(1), c(2), …`, computed by the recursion `v(·)`.
    /// Once a value exceeds [`SATURATION_LIMIT`] every later item is
    /// [`ErrorTrace::Saturated`] carrying the first saturated index.
    pub fn error_traces<'a>(&'a self, filter: &SteadyStateFilter) -> ErrorTraces<'a> {
        ErrorTraces {
            system: self,
            cov: filter.posterior.clone(),
            index: 0,
            saturated_at: None,
        }
    }

    /// One step of the remote Kalman filter that receives raw
    /// measurements over a lossy link: predict with `A`, then update with
    /// `measurement` only when `received`.
    pub fn gated_kalman_step(
        &self,
        prior_state: &[f64],
        prior_cov: &Matrix,
        measurement: &[f64],
        received: bool,
    ) -> Result<(Vec<f64>, Matrix), SystemError> {
        let n = self.state_dim();
        if prior_state.len() != n {
            return Err(SystemError::Shape {
                name: "state",
                expected: (n, 1),
                got: (prior_state.len(), 1),
            });
        }
        let predicted_cov = self.holding_map(prior_cov)?;
        let predicted = self.a.mul_vec(prior_state);
        if !received {
            return Ok((predicted, predicted_cov));
        }
        if measurement.len() != self.output_dim() {
            return Err(SystemError::Shape {
                name: "measurement",
                expected: (self.output_dim(), 1),
                got: (measurement.len(), 1),
            });
        }
        let (gain, posterior) = self.measurement_update(&predicted_cov)?;
        let expected = self.c.mul_vec(&predicted);
        let innovation: Vec<f64> = measurement
            .iter()
            .zip(&expected)
            .map(|(y, e)| y - e)
            .collect();
        let correction = gain.mul_vec(&innovation);
        let state = predicted
            .iter()
            .zip(&correction)
            .map(|(a, b)| a + b)
            .collect();
        Ok((state, posterior))
    }
}

/// Assumption checks for a plant/sensor pair.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub state_dim: usize,
    pub observability_rank: usize,
    pub controllability_rank: usize,
    pub observable: bool,
    pub controllable: bool,
    pub rho_a: f64,
    /// `ρ²(A) ≥ 1`: the plant state grows, the case where stability is not
    /// automatic.
    pub unstable_plant: bool,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.observable && self.controllable
    }
}

/// Converged local Kalman filter.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateFilter {
    /// `A P̄0 Aᵀ + W`.
    pub prior: Matrix,
    /// `P̄0`.
    pub posterior: Matrix,
    /// Steady-state gain `K̄`.
    pub gain: Matrix,
    pub iterations: usize,
    pub residual: f64,
}

/// A value of `c(i)`, or the saturation sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorTrace {
    Finite(f64),
    /// The sequence first exceeded [`SATURATION_LIMIT`] at this index.
    Saturated {
        index: usize,
    },
}

impl ErrorTrace {
    pub fn finite(self) -> Option<f64> {
        match self {
            ErrorTrace::Finite(v) => Some(v),
            ErrorTrace::Saturated { .. } => None,
        }
    }
}

/// Iterator over `c(1), c(2), …`.
#[derive(Debug, Clone)]
pub struct ErrorTraces<'a> {
    system: &'a LtiSystem,
    cov: Matrix,
    index: usize,
    saturated_at: Option<usize>,
}

impl Iterator for ErrorTraces<'_> {
    type Item = ErrorTrace;

    fn next(&mut self) -> Option<ErrorTrace> {
        self.index += 1;
        if let Some(index) = self.saturated_at {
            return Some(ErrorTrace::Saturated { index });
        }
        self.cov = self.system.hold(&self.cov);
        let value = self.cov.trace();
        if !(value <= SATURATION_LIMIT) {
            self.saturated_at = Some(self.index);
            return Some(ErrorTrace::Saturated { index: self.index });
        }
        Some(ErrorTrace::Finite(value))
    }
}

/// Lazily extended table of `c(i)` shared by a single worker.
#[derive(Debug, Clone)]
pub struct ErrorTraceTable<'a> {
    traces: ErrorTraces<'a>,
    values: Vec<f64>,
}

impl<'a> ErrorTraceTable<'a> {
    pub fn new(system: &'a LtiSystem, filter: &SteadyStateFilter) -> Self {
        Self {
            traces: system.error_traces(filter),
            values: Vec::new(),
        }
    }

    /// `c(i)` for `i ≥ 1`; `None` once saturated.
    pub fn get(&mut self, i: usize) -> Option<f64> {
        debug_assert!(i >= 1);
        while self.values.len() < i {
            match self.traces.next()? {
                ErrorTrace::Finite(v) => self.values.push(v),
                ErrorTrace::Saturated { .. } => return None,
            }
        }
        Some(self.values[i - 1])
    }

    /// First saturated index, if reached so far.
    pub fn saturated_at(&self) -> Option<usize> {
        self.traces.saturated_at
    }
}
