//! Null-space projection of the contact constraints.
//!
//! With `P = 1 − J_c⁺J_c` the projected equations `P·Y·φ = P·Sᵀ·τ` no longer
//! contain the contact forces, since `P·J_cᵀ = 0`.

use nalgebra::{DMatrix, DVector};

use crate::spatialdyn::Regressor;
use crate::{Error, Result};

/// Relative singular-value cutoff used for `J_c⁺`.
pub const DEFAULT_SVD_CUTOFF: f64 = 1e-8;
/// Joint speeds below this magnitude have `sign(v) = 0`.
pub const DEFAULT_SIGN_DEADBAND: f64 = 1e-3;

/// Active contact frames of one sample, by frame name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContactSet {
    pub active: Vec<String>,
}

impl ContactSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let active: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, a) in active.iter().enumerate() {
            if active[..i].contains(a) {
                return Err(Error::Validation(format!("contact `{a}` listed twice")));
            }
        }
        Ok(Self { active })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn n_e(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

/// Orthogonal projector onto the null space of `J_c`.
#[derive(Debug, Clone)]
pub struct Projector {
    pub p: DMatrix<f64>,
    /// Dimension of the constraint space removed (numerical rank of `J_c`).
    pub rank_deficiency: usize,
    pub svd_cutoff: f64,
}

/// `P = 1 − J_c⁺J_c` via SVD; singular values below `cutoff·σ_max` are
/// treated as zero.
pub fn projector(jc: &DMatrix<f64>, cutoff: f64) -> Projector {
    let m = jc.ncols();
    let mut p = DMatrix::identity(m, m);
    if jc.nrows() == 0 {
        return Projector {
            p,
            rank_deficiency: 0,
            svd_cutoff: cutoff,
        };
    }
    let d = crate::linalg::svd(jc);
    let rank = d.rank(cutoff);
    for k in 0..rank {
        let col = d.v.column(k);
        p -= col * col.transpose();
    }
    // remove rounding asymmetry
    let p = (&p + p.transpose()) * 0.5;
    Projector {
        p,
        rank_deficiency: rank,
        svd_cutoff: cutoff,
    }
}

/// `sign(x)` with `|x| < deadband ⇒ 0`.
pub fn deadband_sign(x: f64, deadband: f64) -> f64 {
    if x.abs() < deadband {
        0.0
    } else {
        x.signum()
    }
}

/// One projected sample: `P·Y` and the right-hand-side parts of the
/// friction-augmented residual.
#[derive(Debug, Clone)]
pub struct ProjectedSample {
    /// `P·Y`, `(n+6) × 10·n_b`.
    pub a: DMatrix<f64>,
    /// `P·Sᵀ·τ`.
    pub torque: DVector<f64>,
    /// Column `i` is `P·Sᵀ·e_i·v_i`.
    pub viscous: DMatrix<f64>,
    /// Column `i` is `P·Sᵀ·e_i·sign(v_i)`.
    pub coulomb: DMatrix<f64>,
}

impl ProjectedSample {
    /// Measured side `P·Sᵀ(τ − B_v v − B_c sign(v))` for diagonal friction.
    pub fn measured(&self, viscous: &[f64], coulomb: &[f64]) -> DVector<f64> {
        let mut out = self.torque.clone();
        for i in 0..self.viscous.ncols() {
            out -= self.viscous.column(i) * viscous[i] + self.coulomb.column(i) * coulomb[i];
        }
        out
    }
}

pub fn project_sample(
    y: &Regressor,
    tau: &DVector<f64>,
    v_joints: &DVector<f64>,
    proj: &Projector,
    deadband: f64,
) -> Result<ProjectedSample> {
    let m = proj.p.nrows();
    if y.y.nrows() != m {
        return Err(Error::dim("regressor rows", m, y.y.nrows()));
    }
    if m < 6 {
        return Err(Error::dim("projector size", 6, m));
    }
    let n = m - 6;
    if tau.len() != n {
        return Err(Error::dim("joint torques", n, tau.len()));
    }
    if v_joints.len() != n {
        return Err(Error::dim("joint velocities", n, v_joints.len()));
    }
    let ps = proj.p.columns(6, n);
    let mut viscous = DMatrix::zeros(m, n);
    let mut coulomb = DMatrix::zeros(m, n);
    for i in 0..n {
        viscous.set_column(i, &(ps.column(i) * v_joints[i]));
        coulomb.set_column(i, &(ps.column(i) * deadband_sign(v_joints[i], deadband)));
    }
    Ok(ProjectedSample {
        a: &proj.p * &y.y,
        torque: ps * tau,
        viscous,
        coulomb,
    })
}
