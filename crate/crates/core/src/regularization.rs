//! Weight matrices for the prior-deviation penalty `‖φ − φ̂‖²_G`.
//!
//! The geodesic variant is the affine-invariant metric on pseudo-inertia
//! matrices, `⟨U, V⟩_J = tr(J⁻¹ U J⁻¹ V)`, evaluated at the prior and pulled
//! back through the linear map `φ ↦ J(φ)`. Its quadratic form agrees with the
//! squared distance `‖log(J̃^{-1/2} J J̃^{-1/2})‖²_F` to second order.

use nalgebra::{DMatrix, Matrix4, SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::consistency::{pseudo_inertia, pseudo_inertia_basis, InertialParams};
use crate::model::RobotModel;
use crate::{Error, Result};

pub type Block = SMatrix<f64, 10, 10>;

/// Smallest eigenvalue allowed in any block.
pub const EIGEN_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[serde(alias = "geodesic")]
    GeodesicApprox,
    Euclidean,
    ScaledEuclidean,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geodesic" | "geodesic_approx" => Ok(Self::GeodesicApprox),
            "euclidean" => Ok(Self::Euclidean),
            "scaled_euclidean" => Ok(Self::ScaledEuclidean),
            other => Err(Error::Validation(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::GeodesicApprox => "geodesic",
            Self::Euclidean => "euclidean",
            Self::ScaledEuclidean => "scaled_euclidean",
        })
    }
}

/// Block-diagonal metric, one 10×10 block per link.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMetric {
    pub blocks: Vec<Block>,
    pub kind: MetricKind,
}

impl ParamMetric {
    pub fn n_links(&self) -> usize {
        self.blocks.len()
    }

    pub fn quadratic_form(&self, delta: &[f64]) -> f64 {
        assert_eq!(delta.len(), 10 * self.blocks.len());
        self.blocks
            .iter()
            .zip(delta.chunks_exact(10))
            .map(|(g, d)| {
                let d = SMatrix::<f64, 10, 1>::from_column_slice(d);
                (d.transpose() * g * d)[0]
            })
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = 10 * self.blocks.len();
        let mut out = DMatrix::zeros(n, n);
        for (j, g) in self.blocks.iter().enumerate() {
            out.view_mut((10 * j, 10 * j), (10, 10)).copy_from(g);
        }
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|g| SymmetricEigen::new(*g).eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper-triangular `R_j` with `G_j = R_jᵀ R_j`.
    pub fn sqrt_factors(&self) -> Vec<Block> {
        self.blocks
            .iter()
            .map(|g| {
                g.cholesky()
                    .expect("metric blocks are positive definite")
                    .l()
                    .transpose()
            })
            .collect()
    }
}

fn floor_block(g: Block) -> Block {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.min() >= EIGEN_FLOOR {
        return sym;
    }
    let vals = eig.eigenvalues.map(|x| x.max(EIGEN_FLOOR));
    &eig.eigenvectors * Block::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Pulled-back affine-invariant metric at one prior. Fails when `J(φ̂)` is
/// not positive definite.
pub fn geodesic_block(prior: &InertialParams) -> Option<Block> {
    let jinv = pseudo_inertia(prior).cholesky()?.inverse();
    let w: Vec<Matrix4<f64>> = pseudo_inertia_basis().iter().map(|e| jinv * e).collect();
    let mut g = Block::zeros();
    for a in 0..10 {
        for b in a..10 {
            let v = (w[a] * w[b]).trace();
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Some(floor_block(g))
}

pub fn geodesic_metric(priors: &[InertialParams]) -> Result<ParamMetric> {
    let names: Vec<String> = (0..priors.len()).map(|j| format!("#{j}")).collect();
    geodesic_metric_named(priors, &names)
}

/// [`geodesic_metric`] at the model priors, naming links in errors.
pub fn geodesic_metric_for_model(model: &RobotModel) -> Result<ParamMetric> {
    let names: Vec<String> = model.links().iter().map(|l| l.name.clone()).collect();
    geodesic_metric_named(&model.priors(), &names)
}

fn geodesic_metric_named(priors: &[InertialParams], names: &[String]) -> Result<ParamMetric> {
    let blocks = priors
        .iter()
        .zip(names)
        .map(|(p, name)| {
            geodesic_block(p).ok_or_else(|| Error::InconsistentParams {
                link: name.clone(),
                detail: "pseudo-inertia of the prior is not positive definite".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParamMetric {
        blocks,
        kind: MetricKind::GeodesicApprox,
    })
}

/// Identity, or a per-block diagonal with weights for mass, first moment and
/// rotational inertia entries.
pub fn euclidean_metric(n_links: usize, scale: Option<[f64; 3]>) -> ParamMetric {
    let (diag, kind) = match scale {
        None => ([1.0; 10], MetricKind::Euclidean),
        Some([m, h, i]) => ([m, h, h, h, i, i, i, i, i, i], MetricKind::ScaledEuclidean),
    };
    let block = Block::from_diagonal(&SMatrix::<f64, 10, 1>::from_column_slice(&diag));
    ParamMetric {
        blocks: vec![floor_block(block); n_links],
        kind,
    }
}

/// Exact squared affine-invariant distance between two SPD matrices;
/// `None` if either is not positive definite.
pub fn affine_invariant_distance_sq(j: &Matrix4<f64>, reference: &Matrix4<f64>) -> Option<f64> {
    let l = reference.cholesky()?.l();
    let linv = l.try_inverse()?;
    let m = linv * j * linv.transpose();
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues;
    if eig.iter().any(|&e| e <= 0.0) {
        return None;
    }
    Some(eig.iter().map(|e| e.ln().powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    fn prior() -> InertialParams {
        InertialParams::from_com_inertia(
            1.3,
            Vector3::new(0.05, -0.02, 0.1),
            &Matrix3::new(0.02, 0.001, 0.0, 0.001, 0.03, -0.002, 0.0, -0.002, 0.025),
        )
    }

    #[test]
    fn zero_at_prior() {
        let g = geodesic_metric(&[prior()]).unwrap();
        assert_eq!(g.quadratic_form(&[0.0; 10]), 0.0);
        assert!(g.min_eigenvalue() >= EIGEN_FLOOR);
    }

    #[test]
    fn inconsistent_prior_is_named() {
        let bad = InertialParams::from_parts(1.0, Vector3::zeros(), &Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 3.0)));
        let err = geodesic_metric(&[prior(), bad]).unwrap_err().to_string();
        assert!(err.contains("#1"), "{err}");
    }

    #[test]
    fn euclidean_variants() {
        let g = euclidean_metric(2, None);
        assert_eq!(g.to_dense(), DMatrix::identity(20, 20));
        let d: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let sq: f64 = d.iter().map(|x| x * x).sum();
        assert!((g.quadratic_form(&d) - sq).abs() < 1e-12);
        let g = euclidean_metric(1, Some([1.0, 10.0, 100.0]));
        let diag: Vec<f64> = g.blocks[0].diagonal().iter().copied().collect();
        assert_eq!(diag, vec![1.0, 10.0, 10.0, 10.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0]);
        assert_eq!(g.kind, MetricKind::ScaledEuclidean);
    }

    #[test]
    fn block_diagonal_under_permutation() {
        let a = prior();
        let b = prior().scaled(2.0);
        let g1 = geodesic_metric(&[a, b]).unwrap();
        let g2 = geodesic_metric(&[b, a]).unwrap();
        assert_eq!(g1.blocks[0], g2.blocks[1]);
        assert_eq!(g1.blocks[1], g2.blocks[0]);
    }
}
