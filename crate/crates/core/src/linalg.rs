//! Small dense symmetric positive-definite routines.

use alloc::vec::Vec;

/// Lower-triangular Cholesky factor `L` of a symmetric positive-definite
/// matrix `A = L Lᵀ`, stored row-major in a full `n x n` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors the row-major symmetric matrix `a` of order `n`. Only the lower
    /// triangle is read. Returns `None` when a pivot is not safely positive.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n, "matrix buffer does not match order");
        let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
        // Pivots below this are indistinguishable from rounding noise.
        let floor = f64::EPSILON * n as f64 * max_diag;
        let mut l = alloc::vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a[j * n + j];
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > floor) || !diag.is_finite() {
                return None;
            }
            let pivot = libm::sqrt(diag);
            l[j * n + j] = pivot;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / pivot;
            }
        }
        Some(Self { n, lower: l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Solves `L y = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, y)| l * y).sum();
            b[i] = (b[i] - s) / self.lower[i * n + i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_solve(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                s -= self.lower[k * n + i] * yk;
            }
            y[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.forward_solve(b);
        self.backward_solve(b);
    }

    /// Explicit `A⁻¹`, symmetrised. Meant for inspection, not for scoring.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = alloc::vec![0.0; n * n];
        let mut col = alloc::vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let m = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = m;
                inv[j * n + i] = m;
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_two_by_two() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let ch = Cholesky::factor(&a, 2).unwrap();
        assert_eq!(ch.lower(), &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        let mut b = [2.0, 1.0];
        ch.solve(&mut b);
        // A⁻¹ = 1/8 [[3,-2],[-2,4]]
        assert!((b[0] - 0.5).abs() < 1e-15);
        assert!(b[1].abs() < 1e-15);
        let inv = ch.inverse();
        for (x, y) in inv.iter().zip([0.375, -0.25, -0.25, 0.5]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_and_indefinite_fail() {
        assert!(Cholesky::factor(&[0.0, 0.0, 0.0, 0.0], 2).is_none());
        assert!(Cholesky::factor(&[1.0, 1.0, 1.0, 1.0], 2).is_none());
        assert!(Cholesky::factor(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
