//! Small dense helpers: a one-sided Jacobi SVD (accurate on rank-deficient
//! matrices) and the pseudo-inverse built on it.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Svd {
    /// `m × n`, columns with zero singular value are zero.
    pub u: DMatrix<f64>,
    /// Singular values, sorted descending.
    pub s: DVector<f64>,
    /// `n × n` orthogonal.
    pub v: DMatrix<f64>,
}

/// Hestenes one-sided Jacobi: orthogonalizes the columns of `a` by plane
/// rotations, so `a·V = U·Σ`.
pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = 1e-15;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        s[k] = norms[j];
        if norms[j] > 0.0 {
            u.set_column(k, &(w.column(j) / norms[j]));
        }
        vs.set_column(k, &v.column(j));
    }
    Svd { u, s, v: vs }
}

impl Svd {
    /// Number of singular values above `rel·σ_max`.
    pub fn rank(&self, rel: f64) -> usize {
        let smax = self.s.iter().copied().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&x| x > rel * smax).count()
    }

    /// `A⁺` with singular values below `rel·σ_max` dropped.
    pub fn pinv(&self, rel: f64) -> DMatrix<f64> {
        let r = self.rank(rel);
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let mut out = DMatrix::zeros(n, m);
        for k in 0..r {
            out += self.v.column(k) * self.u.column(k).transpose() / self.s[k];
        }
        out
    }

    /// Minimum-norm least-squares solution of `A x ≈ b`.
    pub fn solve(&self, b: &DVector<f64>, rel: f64) -> DVector<f64> {
        let r = self.rank(rel);
        let mut x = DVector::zeros(self.v.nrows());
        for k in 0..r {
            x += self.v.column(k) * (self.u.column(k).dot(b) / self.s[k]);
        }
        x
    }
}
