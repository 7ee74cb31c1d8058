use super::{Matrix, MatrixError, DEFAULT_RANK_TOL};

/// Numerical rank by Gaussian elimination with partial pivoting.
///
/// A pivot counts when its magnitude exceeds `tol` times the largest
/// absolute entry of the input.
pub fn rank(z: &Matrix, tol: f64) -> usize {
    let (rows, cols) = z.shape();
    let threshold = tol * z.max_abs();
    if rows == 0 || cols == 0 || z.max_abs() == 0.0 {
        return 0;
    }
    let mut u = z.clone();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (pivot_row, pivot) =
            (r..rows)
                .map(|i| (i, u[(i, c)].abs()))
                .fold(
                    (r, -1.0),
                    |best, cand| if cand.1 > best.1 { cand } else { best },
                );
        if pivot <= threshold {
            continue;
        }
        swap_rows(&mut u, r, pivot_row);
        for i in (r + 1)..rows {
            let f = u[(i, c)] / u[(r, c)];
            if f != 0.0 {
                for j in c..cols {
                    u[(i, j)] -= f * u[(r, j)];
                }
            }
        }
        r += 1;
    }
    r
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m.cols() {
        let t = m[(a, j)];
        m[(a, j)] = m[(b, j)];
        m[(b, j)] = t;
    }
}

struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(z: &Matrix) -> Result<Self, MatrixError> {
        z.ensure_square()?;
        let n = z.rows();
        let threshold = DEFAULT_RANK_TOL * z.max_abs();
        let mut lu = z.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold(
                    (k, -1.0),
                    |best, cand| if cand.1 > best.1 { cand } else { best },
                );
            if pivot <= threshold || pivot == 0.0 {
                return Err(MatrixError::Singular);
            }
            swap_rows(&mut lu, k, p);
            perm.swap(k, p);
            for i in (k + 1)..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows();
        let mut x = Matrix::zeros(n, b.cols());
        for col in 0..b.cols() {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| b[(p, col)]).collect();
            for i in 0..n {
                let s: f64 = (0..i).map(|j| self.lu[(i, j)] * y[j]).sum();
                y[i] -= s;
            }
            for i in (0..n).rev() {
                let s: f64 = ((i + 1)..n).map(|j| self.lu[(i, j)] * y[j]).sum();
                y[i] = (y[i] - s) / self.lu[(i, i)];
            }
            for (i, v) in y.into_iter().enumerate() {
                x[(i, col)] = v;
            }
        }
        x
    }
}

/// Solves `Z X = B` by LU with partial pivoting and one step of iterative
/// refinement.
pub fn solve_linear(z: &Matrix, b: &Matrix) -> Result<Matrix, MatrixError> {
    z.ensure_square()?;
    if b.rows() != z.rows() {
        return Err(MatrixError::DimensionMismatch {
            expected: (z.rows(), b.cols()),
            got: b.shape(),
        });
    }
    let lu = Lu::factor(z)?;
    let x = lu.solve(b);
    let residual = b - &(z * &x);
    let x = &x + &lu.solve(&residual);
    if !x.is_finite() {
        return Err(MatrixError::Singular);
    }
    Ok(x)
}

/// The unique (up to scale) null vector of a square matrix of nullity one.
///
/// Uses Gaussian elimination with full pivoting; pivots at or below `tol`
/// times the largest entry count as zero. The result has unit 1-norm and
/// its largest-magnitude entry is positive, so it is reproducible
/// bit-for-bit. Fails unless the nullity is exactly one and `‖Zv‖∞ ≤ tol`.
pub fn null_vector(z: &Matrix, tol: f64) -> Result<Vec<f64>, MatrixError> {
    z.ensure_square()?;
    if !(tol > 0.0) {
        return Err(MatrixError::InvalidTolerance(tol));
    }
    let n = z.rows();
    if n == 0 {
        return Err(MatrixError::Nullity { nullity: 0 });
    }
    let threshold = tol * z.max_abs();
    let mut u = z.clone();
    let mut col_perm: Vec<usize> = (0..n).collect();
    let mut r = 0;
    while r < n {
        let mut best = (r, r, -1.0);
        for i in r..n {
            for j in r..n {
                let v = u[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= threshold {
            break;
        }
        swap_rows(&mut u, r, best.0);
        if best.1 != r {
            for i in 0..n {
                let t = u[(i, r)];
                u[(i, r)] = u[(i, best.1)];
                u[(i, best.1)] = t;
            }
            col_perm.swap(r, best.1);
        }
        for i in (r + 1)..n {
            let f = u[(i, r)] / u[(r, r)];
            if f != 0.0 {
                for j in r..n {
                    u[(i, j)] -= f * u[(r, j)];
                }
            }
        }
        r += 1;
    }
    let nullity = n - r;
    if nullity != 1 {
        return Err(MatrixError::Nullity { nullity });
    }
    let mut y = vec![0.0; n];
    y[n - 1] = 1.0;
    for k in (0..n - 1).rev() {
        let s: f64 = ((k + 1)..n).map(|j| u[(k, j)] * y[j]).sum();
        y[k] = -s / u[(k, k)];
    }
    let mut v = vec![0.0; n];
    for (j, &p) in col_perm.iter().enumerate() {
        v[p] = y[j];
    }
    let norm1: f64 = v.iter().map(|x| x.abs()).sum();
    let lead = v.iter().copied().fold(
        0.0_f64,
        |best, x| if x.abs() > best.abs() { x } else { best },
    );
    let scale = lead.signum() / norm1;
    v.iter_mut().for_each(|x| *x *= scale);
    let residual = z.mul_vec(&v).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if residual > tol {
        return Err(MatrixError::NoConvergence {
            iterations: 0,
            estimate: 0.0,
            residual,
        });
    }
    Ok(v)
}

/// Eigen-decomposition of a symmetric matrix: `Q = U diag(values) Uᵀ`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: Matrix,
}

const JACOBI_SWEEPS: usize = 100;

/// Cyclic Jacobi eigenvalue iteration for symmetric matrices.
pub fn symmetric_eigen(q: &Matrix) -> Result<SymmetricEigen, MatrixError> {
    q.ensure_square()?;
    let deviation = q.asymmetry();
    if deviation > 1e-9 * q.max_abs().max(1.0) {
        return Err(MatrixError::NotSymmetric { deviation });
    }
    let n = q.rows();
    let mut a = q.symmetrized();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius();
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkr = v[(k, r)];
                    v[(k, p)] = c * vkp - s * vkr;
                    v[(k, r)] = s * vkp + c * vkr;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.select(&(0..n).collect::<Vec<_>>(), &order);
    Ok(SymmetricEigen { values, vectors })
}

/// Symmetric square root of a symmetric positive semidefinite matrix.
///
/// Eigenvalues down to `-1e-10 · max(1, λmax)` are treated as rounding
/// noise and clamped to zero.
pub fn psd_sqrt(q: &Matrix) -> Result<Matrix, MatrixError> {
    let eig = symmetric_eigen(q)?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    let floor = -1e-10 * top.abs().max(1.0);
    if let Some(&min) = eig.values.first() {
        if min < floor {
            return Err(MatrixError::NotPositiveSemidefinite { eigenvalue: min });
        }
    }
    let n = q.rows();
    let mut scaled = eig.vectors.clone();
    for (j, &lambda) in eig.values.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok((&scaled * &eig.vectors.transpose()).symmetrized())
}
