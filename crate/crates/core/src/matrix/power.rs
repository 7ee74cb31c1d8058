use super::Matrix;

/// Successive powers `Z¹, Z², …` kept as `exp(log_scale) · normalized`
/// with `normalized.max_abs() == 1`, so that powers of matrices with
/// spectral radius far from one can be tracked for hundreds of steps.
///
/// When a power becomes exactly zero the sequence stays at zero and
/// `log_scale` is `-inf`.
#[derive(Debug, Clone)]
pub struct ScaledPowers {
    base: Matrix,
    normalized: Matrix,
    log_scale: f64,
    exponent: u64,
}

impl ScaledPowers {
    pub fn new(base: &Matrix) -> Self {
        assert!(base.is_square(), "ScaledPowers: matrix must be square");
        Self {
            base: base.clone(),
            normalized: Matrix::identity(base.rows()),
            log_scale: 0.0,
            exponent: 0,
        }
    }

    /// Current exponent `i` (0 before the first step).
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn normalized(&self) -> &Matrix {
        &self.normalized
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `ln |[Zⁱ]_{j,k}|` (may be `-inf`).
    pub fn log_abs_entry(&self, j: usize, k: usize) -> f64 {
        self.log_scale + self.normalized[(j, k)].abs().ln()
    }

    /// `ln max_{j,k} |[Zⁱ]_{j,k}|`.
    pub fn log_max_abs(&self) -> f64 {
        self.log_scale + self.normalized.max_abs().ln()
    }

    /// Advances to the next power.
    pub fn step(&mut self) {
        let next = &self.normalized * &self.base;
        let (normalized, log_factor) = renormalize(next);
        self.normalized = normalized;
        self.log_scale += log_factor;
        self.exponent += 1;
    }

    /// `Zⁱ` computed by binary exponentiation with the same scaled
    /// representation; returns `(normalized, log_scale)`.
    pub fn by_squaring(base: &Matrix, mut exponent: u64) -> (Matrix, f64) {
        assert!(base.is_square());
        let mut acc = Matrix::identity(base.rows());
        let mut acc_log = 0.0;
        let (mut sq, mut sq_log) = renormalize(base.clone());
        while exponent > 0 {
            if exponent & 1 == 1 {
                let (m, f) = renormalize(&acc * &sq);
                acc = m;
                acc_log += sq_log + f;
            }
            exponent >>= 1;
            if exponent > 0 {
                let (m, f) = renormalize(&sq * &sq);
                sq = m;
                sq_log = 2.0 * sq_log + f;
            }
        }
        (acc, acc_log)
    }
}

/// Divides by the largest absolute entry; returns the scaled matrix and the
/// log of the divisor. A zero matrix is returned unchanged with `-inf`.
pub(crate) fn renormalize(m: Matrix) -> (Matrix, f64) {
    let s = m.max_abs();
    if s == 0.0 {
        return (m, f64::NEG_INFINITY);
    }
    (m.scale(1.0 / s), s.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_growth_beyond_overflow() {
        let z = Matrix::from_rows(&[[10.0, 0.0], [0.0, 1.0]]).unwrap();
        let mut p = ScaledPowers::new(&z);
        for _ in 0..400 {
            p.step();
        }
        assert!((p.log_abs_entry(0, 0) - 400.0 * 10f64.ln()).abs() < 1e-9);
        assert_eq!(p.log_abs_entry(0, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn iterated_and_squared_agree() {
        let z = Matrix::from_rows(&[[1.1, 0.3, -0.2], [0.0, 0.9, 0.5], [0.4, -0.1, 1.05]]).unwrap();
        let mut p = ScaledPowers::new(&z);
        for i in 1..=150u64 {
            p.step();
            let (m, s) = ScaledPowers::by_squaring(&z, i);
            for j in 0..3 {
                for k in 0..3 {
                    let a = p.log_abs_entry(j, k);
                    let b = s + m[(j, k)].abs().ln();
                    assert!(
                        a == b || ((a - b).exp() - 1.0).abs() < 1e-6,
                        "i={i} ({j},{k}): {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn nilpotent_goes_to_zero() {
        let z = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let mut p = ScaledPowers::new(&z);
        p.step();
        p.step();
        assert_eq!(p.log_max_abs(), f64::NEG_INFINITY);
        p.step();
        assert_eq!(p.log_max_abs(), f64::NEG_INFINITY);
    }
}
