//! Minimal 2x2 real matrix used by the Jacobian and the Lyapunov solve.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    /// Row-major entries [[m11, m12], [m21, m22]].
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Mat2 {
            m: [[m11, m12], [m21, m22]],
        }
    }

    pub fn identity() -> Self {
        Mat2::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let a = &self.m;
        let b = &other.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }

    pub fn add(&self, other: &Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + other.m[0][0],
            self.m[0][1] + other.m[0][1],
            self.m[1][0] + other.m[1][0],
            self.m[1][1] + other.m[1][1],
        )
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * x[0] + self.m[0][1] * x[1],
            self.m[1][0] * x[0] + self.m[1][1] * x[1],
        ]
    }

    /// Real parts of both eigenvalues.
    pub fn eig_real_parts(&self) -> [f64; 2] {
        let tr = self.trace();
        let disc = tr * tr - 4.0 * self.det();
        if disc >= 0.0 {
            let s = disc.sqrt();
            [(tr - s) / 2.0, (tr + s) / 2.0]
        } else {
            [tr / 2.0, tr / 2.0]
        }
    }

    /// Both eigenvalues strictly in the open left half plane (margin applied).
    pub fn is_hurwitz(&self, margin: f64) -> bool {
        self.eig_real_parts().iter().all(|re| *re < -margin)
    }

    /// Eigenvalues of a symmetric matrix, ascending.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let a = self.m[0][0];
        let b = self.m[0][1];
        let d = self.m[1][1];
        let mean = (a + d) / 2.0;
        let r = (((a - d) / 2.0).powi(2) + b * b).sqrt();
        [mean - r, mean + r]
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Quadratic form x' M x.
    pub fn quad_form(&self, x: [f64; 2]) -> f64 {
        let y = self.apply(x);
        x[0] * y[0] + x[1] * y[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalues_of_symmetric() {
        let m = Mat2::new(2.0, 1.0, 1.0, 2.0);
        let [lo, hi] = m.sym_eigenvalues();
        assert_relative_eq!(lo, 1.0);
        assert_relative_eq!(hi, 3.0);
    }

    #[test]
    fn hurwitz_detection() {
        assert!(Mat2::new(-1.0, 0.0, 0.0, -2.0).is_hurwitz(1e-12));
        // Oscillator with positive damping: eigs complex with re = -d/2.
        assert!(Mat2::new(0.0, 1.0, -4.0, -0.5).is_hurwitz(1e-12));
        assert!(!Mat2::new(0.0, 1.0, -4.0, 0.0).is_hurwitz(1e-12));
        assert!(!Mat2::new(0.0, 1.0, 4.0, -2.0).is_hurwitz(1e-12));
    }
}
