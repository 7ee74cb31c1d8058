//! Spectral radius, largest singular value and Perron root.

use serde::Serialize;

use super::{Matrix, MatrixError};

/// Result of an iterative spectral computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Last relative change (spectral radius), relative eigen-residual
    /// (singular value) or Collatz–Wielandt bracket width (Perron root).
    pub residual: f64,
}

impl SpectralEstimate {
    fn exact(value: f64, iterations: usize) -> Self {
        Self {
            value,
            iterations,
            residual: 0.0,
        }
    }
}

fn check_tol(tol: f64) -> Result<(), MatrixError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(MatrixError::InvalidTolerance(tol))
    }
}

fn inf_renormalize(m: Matrix) -> (Matrix, f64) {
    let s = m.norm_inf();
    if s == 0.0 {
        return (m, f64::NEG_INFINITY);
    }
    (m.scale(1.0 / s), s.ln())
}

/// Spectral radius via the Gelfand limit `ρ = lim ‖Zᵏ‖^{1/k}`.
///
/// `Z` is squared repeatedly (`k = 2ʲ`), renormalising to unit ∞-norm
/// after each squaring and accumulating the logarithm of the discarded
/// scale. Converges when three successive estimates agree relatively to
/// within `tol`. Defective or rotating spectra only slow the
/// convergence; every estimate is an upper bound on `ρ`.
pub fn spectral_radius(
    z: &Matrix,
    tol: f64,
    max_doublings: usize,
) -> Result<SpectralEstimate, MatrixError> {
    z.ensure_square()?;
    check_tol(tol)?;
    if z.rows() == 0 {
        return Ok(SpectralEstimate::exact(0.0, 0));
    }
    let (mut normalized, mut log_norm) = inf_renormalize(z.clone());
    if log_norm == f64::NEG_INFINITY {
        return Ok(SpectralEstimate::exact(0.0, 0));
    }
    let mut previous = log_norm.exp();
    let mut residual = f64::INFINITY;
    let mut k = 1.0_f64;
    let mut settled = 0;
    for doubling in 1..=max_doublings {
        let (next, log_factor) = inf_renormalize(&normalized * &normalized);
        if log_factor == f64::NEG_INFINITY {
            // Nilpotent: some power vanished exactly.
            return Ok(SpectralEstimate::exact(0.0, doubling));
        }
        normalized = next;
        log_norm = 2.0 * log_norm + log_factor;
        k *= 2.0;
        let estimate = (log_norm / k).exp();
        residual = if estimate > 0.0 {
            (estimate - previous).abs() / estimate
        } else {
            0.0
        };
        previous = estimate;
        settled = if residual < tol { settled + 1 } else { 0 };
        if settled == 2 {
            return Ok(SpectralEstimate {
                value: estimate,
                iterations: doubling,
                residual,
            });
        }
    }
    Err(MatrixError::NoConvergence {
        iterations: max_doublings,
        estimate: previous,
        residual,
    })
}

const SINGULAR_MAX_ITER: usize = 1_000_000;

/// Largest singular value by power iteration on `ZᵀZ`.
///
/// Stops when the eigen-residual `‖Bx − θx‖ / θ` drops below `tol`.
pub fn largest_singular_value(z: &Matrix, tol: f64) -> Result<SpectralEstimate, MatrixError> {
    check_tol(tol)?;
    let b = &z.transpose() * z;
    let n = b.rows();
    if n == 0 || b.max_abs() == 0.0 {
        return Ok(SpectralEstimate::exact(0.0, 0));
    }
    // Start from the column of B with the largest norm: it lies in range(B),
    // so it cannot be annihilated.
    let start = (0..n)
        .map(|j| (j, (0..n).map(|i| b[(i, j)] * b[(i, j)]).sum::<f64>()))
        .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
        .0;
    let mut x: Vec<f64> = (0..n).map(|i| b[(i, start)]).collect();
    normalize2(&mut x);
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    for iter in 1..=SINGULAR_MAX_ITER {
        let y = b.mul_vec(&x);
        theta = dot(&x, &y);
        if theta <= 0.0 {
            return Ok(SpectralEstimate::exact(0.0, iter));
        }
        residual = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - theta * xi).powi(2))
            .sum::<f64>()
            .sqrt()
            / theta;
        if residual <= tol {
            return Ok(SpectralEstimate {
                value: theta.sqrt(),
                iterations: iter,
                residual,
            });
        }
        x = y;
        normalize2(&mut x);
    }
    Err(MatrixError::NoConvergence {
        iterations: SINGULAR_MAX_ITER,
        estimate: theta.max(0.0).sqrt(),
        residual,
    })
}

const PERRON_PLAIN_ITER: usize = 1_000;
const PERRON_SHIFTED_ITER: usize = 2_000_000;

/// Perron root of a nonnegative square matrix by power iteration from the
/// all-ones vector.
///
/// The Collatz–Wielandt ratios `(Zx)ᵢ / xᵢ` over the support of `x` bracket
/// the estimate; iteration stops when the bracket is narrower than
/// `tol · max(1, upper)`. Plain iteration on `Z` is tried first; periodic
/// matrices, where it oscillates, fall through to iteration on `Z + I`.
/// Matrices whose nonzero pattern is acyclic are nilpotent and return 0.
pub fn perron_root(z: &Matrix, tol: f64) -> Result<SpectralEstimate, MatrixError> {
    z.ensure_square()?;
    check_tol(tol)?;
    let n = z.rows();
    for i in 0..n {
        for j in 0..n {
            let v = z[(i, j)];
            if v < 0.0 {
                return Err(MatrixError::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    if n == 0 || !pattern_has_cycle(z) {
        return Ok(SpectralEstimate::exact(0.0, 0));
    }

    let mut last = (0.0, f64::INFINITY);
    let mut total = 0;
    for (shift, max_iter) in [(0.0, PERRON_PLAIN_ITER), (1.0, PERRON_SHIFTED_ITER)] {
        let shifted = if shift == 0.0 {
            z.clone()
        } else {
            z + &Matrix::identity(n).scale(shift)
        };
        let mut x = vec![1.0 / n as f64; n];
        for _ in 0..max_iter {
            total += 1;
            let y = shifted.mul_vec(&x);
            let (lo, hi) = collatz_wielandt(&x, &y);
            let (lo, hi) = (lo - shift, hi - shift);
            last = (0.5 * (lo + hi), hi - lo);
            if hi - lo <= tol * hi.max(1.0) {
                return Ok(SpectralEstimate {
                    value: 0.5 * (lo + hi).max(0.0),
                    iterations: total,
                    residual: hi - lo,
                });
            }
            let s: f64 = y.iter().sum();
            if s == 0.0 {
                return Ok(SpectralEstimate::exact(0.0, total));
            }
            x = y.into_iter().map(|v| v / s).collect();
        }
    }
    Err(MatrixError::NoConvergence {
        iterations: total,
        estimate: last.0,
        residual: last.1,
    })
}

/// Min and max of `yᵢ / xᵢ` over entries where `x` is non-negligible.
fn collatz_wielandt(x: &[f64], y: &[f64]) -> (f64, f64) {
    let cutoff = 1e-12 * x.iter().fold(0.0_f64, |m, &v| m.max(v));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&xi, &yi) in x.iter().zip(y) {
        if xi > cutoff {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Whether the directed graph of nonzero entries contains a cycle. For a
/// nonnegative matrix this is equivalent to `ρ > 0`.
fn pattern_has_cycle(z: &Matrix) -> bool {
    let n = z.rows();
    // Kahn's algorithm: peel vertices with no incoming edges.
    let mut indegree: Vec<usize> = (0..n)
        .map(|j| (0..n).filter(|&i| z[(i, j)] != 0.0).count())
        .collect();
    let mut stack: Vec<usize> = (0..n).filter(|&j| indegree[j] == 0).collect();
    let mut removed = 0;
    while let Some(i) = stack.pop() {
        removed += 1;
        for j in 0..n {
            if z[(i, j)] != 0.0 {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    stack.push(j);
                }
            }
        }
    }
    removed < n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize2(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}
