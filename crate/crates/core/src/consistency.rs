//! Inertial parameters and the constraint constructions that certify them as
//! physically realizable: the pseudo-inertia matrix, the centre-of-mass
//! ellipsoid LMI and the trace condition for mass inside a bounding ellipsoid.

use nalgebra::{DVector, Matrix3, Matrix4, SymmetricEigen, Vector3};

use crate::model::EllipsoidBound;

/// Default strictness margin for `J ≻ 0`, applied as `J ⪰ ε·1₄`.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Slack allowed on the non-strict conditions when checking a candidate.
pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

/// `[m, h_x, h_y, h_z, i_xx, i_xy, i_xz, i_yy, i_yz, i_zz]` of one link, with
/// `h = m·c` and the rotational inertia taken about the link-frame origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InertialParams(pub [f64; 10]);

impl InertialParams {
    pub const LEN: usize = 10;

    pub fn new(values: [f64; 10]) -> Self {
        Self(values)
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut out = [0.0; 10];
        out.copy_from_slice(&values[..10]);
        Self(out)
    }

    /// Builds the vector from mass, first moment and inertia about the link origin.
    pub fn from_parts(mass: f64, first_moment: Vector3<f64>, inertia: &Matrix3<f64>) -> Self {
        let i = inertia;
        Self([
            mass,
            first_moment.x,
            first_moment.y,
            first_moment.z,
            i[(0, 0)],
            0.5 * (i[(0, 1)] + i[(1, 0)]),
            0.5 * (i[(0, 2)] + i[(2, 0)]),
            i[(1, 1)],
            0.5 * (i[(1, 2)] + i[(2, 1)]),
            i[(2, 2)],
        ])
    }

    /// Mass at `com` with rotational inertia `inertia_com` about the CoM, shifted
    /// to the link origin by the parallel-axis theorem.
    pub fn from_com_inertia(mass: f64, com: Vector3<f64>, inertia_com: &Matrix3<f64>) -> Self {
        let shift = (Matrix3::identity() * com.norm_squared() - com * com.transpose()) * mass;
        Self::from_parts(mass, com * mass, &(inertia_com + shift))
    }

    pub fn point_mass(mass: f64, at: Vector3<f64>) -> Self {
        Self::from_com_inertia(mass, at, &Matrix3::zeros())
    }

    /// Uniform solid ellipsoid filling `bound`; strictly inside every
    /// consistency cone whenever `mass > 0`.
    pub fn solid_ellipsoid(mass: f64, bound: &EllipsoidBound) -> Self {
        let k = (bound.shape_matrix() / 5.0 + bound.center * bound.center.transpose()) * mass;
        params_from_pseudo_inertia(&assemble_pseudo(&k, &(bound.center * mass), mass))
    }

    pub fn mass(&self) -> f64 {
        self.0[0]
    }

    pub fn first_moment(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[3])
    }

    pub fn com(&self) -> Option<Vector3<f64>> {
        (self.mass() > 0.0).then(|| self.first_moment() / self.mass())
    }

    /// Rotational inertia `Ī` about the link origin.
    pub fn rotational_inertia(&self) -> Matrix3<f64> {
        let p = &self.0;
        Matrix3::new(p[4], p[5], p[6], p[5], p[7], p[8], p[6], p[8], p[9])
    }

    /// Rotational inertia about the centre of mass.
    pub fn inertia_about_com(&self) -> Option<Matrix3<f64>> {
        let c = self.com()?;
        let shift = (Matrix3::identity() * c.norm_squared() - c * c.transpose()) * self.mass();
        Some(self.rotational_inertia() - shift)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|x| x * s))
    }
}

/// Concatenates per-link vectors in link order.
pub fn stack(params: &[InertialParams]) -> DVector<f64> {
    DVector::from_iterator(
        params.len() * 10,
        params.iter().flat_map(|p| p.0.iter().copied()),
    )
}

/// Splits a stacked vector back into per-link parameters.
pub fn unstack(stacked: &[f64]) -> Vec<InertialParams> {
    stacked.chunks_exact(10).map(InertialParams::from_slice).collect()
}

fn assemble_pseudo(k: &Matrix3<f64>, h: &Vector3<f64>, m: f64) -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(k);
    j.fixed_view_mut::<3, 1>(0, 3).copy_from(h);
    j.fixed_view_mut::<1, 3>(3, 0).copy_from(&h.transpose());
    j[(3, 3)] = m;
    j
}

/// `J = [[K, h], [hᵀ, m]]` with `K = ½ tr(Ī)·1₃ − Ī`.
pub fn pseudo_inertia(p: &InertialParams) -> Matrix4<f64> {
    let ibar = p.rotational_inertia();
    let k = Matrix3::identity() * (0.5 * ibar.trace()) - ibar;
    assemble_pseudo(&k, &p.first_moment(), p.mass())
}

/// Inverse of [`pseudo_inertia`]: `Ī = tr(K)·1₃ − K`.
pub fn params_from_pseudo_inertia(j: &Matrix4<f64>) -> InertialParams {
    let k = j.fixed_view::<3, 3>(0, 0).into_owned();
    let k = (k + k.transpose()) * 0.5;
    let h = (j.fixed_view::<3, 1>(0, 3).into_owned() + j.fixed_view::<1, 3>(3, 0).transpose()) * 0.5;
    let ibar = Matrix3::identity() * k.trace() - k;
    InertialParams::from_parts(j[(3, 3)], h, &ibar)
}

/// `∂J/∂φ_k` for the ten parameters.
pub fn pseudo_inertia_basis() -> [Matrix4<f64>; 10] {
    std::array::from_fn(|k| {
        let mut e = [0.0; 10];
        e[k] = 1.0;
        pseudo_inertia(&InertialParams(e))
    })
}

/// `C(φ) = [[m, (h − m·x_c)ᵀ], [h − m·x_c, m·Q_s]]`; positive semidefinite iff
/// the centre of mass lies in the ellipsoid (for `m > 0`).
pub fn com_lmi(p: &InertialParams, bound: &EllipsoidBound) -> Matrix4<f64> {
    let m = p.mass();
    let d = p.first_moment() - bound.center * m;
    let mut c = Matrix4::zeros();
    c[(0, 0)] = m;
    c.fixed_view_mut::<1, 3>(0, 1).copy_from(&d.transpose());
    c.fixed_view_mut::<3, 1>(1, 0).copy_from(&d);
    c.fixed_view_mut::<3, 3>(1, 1)
        .copy_from(&(bound.shape_matrix() * m));
    c
}

pub fn com_lmi_basis(bound: &EllipsoidBound) -> [Matrix4<f64>; 10] {
    std::array::from_fn(|k| {
        let mut e = [0.0; 10];
        e[k] = 1.0;
        com_lmi(&InertialParams(e), bound)
    })
}

/// `Q_j = [[−Q_s⁻¹, Q_s⁻¹x_c], [(Q_s⁻¹x_c)ᵀ, 1 − x_cᵀQ_s⁻¹x_c]]`.
pub fn qj_matrix(bound: &EllipsoidBound) -> Matrix4<f64> {
    let qinv = Matrix3::from_diagonal(&bound.semi_axes.map(|s| 1.0 / (s * s)));
    let qc = qinv * bound.center;
    let mut q = Matrix4::zeros();
    q.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-qinv));
    q.fixed_view_mut::<3, 1>(0, 3).copy_from(&qc);
    q.fixed_view_mut::<1, 3>(3, 0).copy_from(&qc.transpose());
    q[(3, 3)] = 1.0 - bound.center.dot(&qc);
    q
}

/// `tr(J(φ)·Q_j)`; nonnegative for mass distributions inside the ellipsoid.
pub fn density_realizability(p: &InertialParams, bound: &EllipsoidBound) -> f64 {
    (pseudo_inertia(p) * qj_matrix(bound)).trace()
}

/// Coefficients `t_k` with `tr(J(φ)·Q_j) = Σ t_k φ_k`.
pub fn density_coefficients(bound: &EllipsoidBound) -> [f64; 10] {
    let q = qj_matrix(bound);
    let basis = pseudo_inertia_basis();
    std::array::from_fn(|k| (basis[k] * q).trace())
}

pub fn min_eigenvalue(m: &Matrix4<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Margins of each consistency condition for one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub min_eig_pseudo_inertia: f64,
    pub min_eig_com: f64,
    pub density_trace: f64,
    pub epsilon: f64,
    pub feas_tol: f64,
}

impl ConsistencyReport {
    /// `J ≻ ε·1₄`.
    pub fn pseudo_inertia_ok(&self) -> bool {
        self.min_eig_pseudo_inertia > self.epsilon
    }

    pub fn com_ok(&self) -> bool {
        self.min_eig_com >= -self.feas_tol
    }

    pub fn density_ok(&self) -> bool {
        self.density_trace >= -self.feas_tol
    }

    pub fn is_consistent(&self) -> bool {
        self.pseudo_inertia_ok() && self.com_ok() && self.density_ok()
    }

    /// Human-readable list of violated conditions; empty when consistent.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.pseudo_inertia_ok() {
            out.push(format!(
                "pseudo-inertia not positive definite (min eig {:.6e} <= {:.1e})",
                self.min_eig_pseudo_inertia, self.epsilon
            ));
        }
        if !self.com_ok() {
            out.push(format!(
                "centre of mass outside bounding ellipsoid (min eig {:.6e})",
                self.min_eig_com
            ));
        }
        if !self.density_ok() {
            out.push(format!(
                "mass distribution not realizable in ellipsoid (trace {:.6e})",
                self.density_trace
            ));
        }
        out
    }
}

/// Checks `J ≻ ε`, `C ⪰ 0` and `tr(J·Q_j) ≥ 0` with slack `feas_tol` on the
/// non-strict conditions.
pub fn check_consistency(
    p: &InertialParams,
    bound: &EllipsoidBound,
    epsilon: f64,
    feas_tol: f64,
) -> ConsistencyReport {
    ConsistencyReport {
        min_eig_pseudo_inertia: min_eigenvalue(&pseudo_inertia(p)),
        min_eig_com: min_eigenvalue(&com_lmi(p, bound)),
        density_trace: density_realizability(p, bound),
        epsilon,
        feas_tol,
    }
}

pub fn is_fully_consistent(
    p: &InertialParams,
    bound: &EllipsoidBound,
    epsilon: f64,
) -> ConsistencyReport {
    check_consistency(p, bound, epsilon, DEFAULT_FEAS_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sphere(r: f64) -> EllipsoidBound {
        EllipsoidBound::new(Vector3::zeros(), Vector3::repeat(r))
    }

    fn unit_solid_sphere() -> InertialParams {
        InertialParams::from_parts(1.0, Vector3::zeros(), &(Matrix3::identity() * 0.4))
    }

    #[test]
    fn point_mass_pseudo_inertia() {
        let j = pseudo_inertia(&InertialParams::point_mass(1.0, Vector3::zeros()));
        assert_eq!(j, Matrix4::from_diagonal(&nalgebra::Vector4::new(0.0, 0.0, 0.0, 1.0)));
    }

    #[test]
    fn solid_sphere_pseudo_inertia() {
        // K = ∫ x xᵀ dm = m r²/5 · 1₃ for a uniform ball.
        let j = pseudo_inertia(&unit_solid_sphere());
        let expected = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.2, 0.2, 0.2, 1.0));
        assert_relative_eq!(j, expected, epsilon = 1e-15);
    }

    #[test]
    fn com_lmi_cases() {
        let b = sphere(1.0);
        // centred CoM: block diagonal
        let c = com_lmi(&InertialParams::point_mass(2.0, Vector3::zeros()), &b);
        assert_relative_eq!(c, Matrix4::from_diagonal(&nalgebra::Vector4::repeat(2.0)), epsilon = 0.0);
        // CoM outside
        let c = com_lmi(&InertialParams::point_mass(1.0, Vector3::new(2.0, 0.0, 0.0)), &b);
        assert!(min_eigenvalue(&c) < 0.0);
        // CoM on the boundary
        let c = com_lmi(&InertialParams::point_mass(1.0, Vector3::new(0.0, 1.0, 0.0)), &b);
        assert!(min_eigenvalue(&c).abs() < 1e-12);
    }

    #[test]
    fn qj_cases() {
        let q = qj_matrix(&sphere(1.0));
        assert_eq!(q, Matrix4::from_diagonal(&nalgebra::Vector4::new(-1.0, -1.0, -1.0, 1.0)));
        let q = qj_matrix(&sphere(2.0));
        assert_eq!(q, Matrix4::from_diagonal(&nalgebra::Vector4::new(-0.25, -0.25, -0.25, 1.0)));
        let q = qj_matrix(&EllipsoidBound::new(Vector3::new(1.0, 0.0, 0.0), Vector3::repeat(1.0)));
        assert_eq!(q[(3, 3)], 0.0);
        assert_eq!(q.fixed_view::<3, 1>(0, 3).into_owned(), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(q.fixed_view::<3, 3>(0, 0).into_owned(), -Matrix3::identity());
    }

    #[test]
    fn density_cases() {
        let b = sphere(1.0);
        let t = density_realizability(&InertialParams::point_mass(1.0, Vector3::zeros()), &b);
        assert_relative_eq!(t, 1.0, epsilon = 1e-15);
        let t = density_realizability(&InertialParams::point_mass(1.0, Vector3::new(2.0, 0.0, 0.0)), &b);
        assert_relative_eq!(t, -3.0, epsilon = 1e-14);
        let t = density_realizability(&unit_solid_sphere(), &b);
        assert_relative_eq!(t, 0.4, epsilon = 1e-14);
    }

    #[test]
    fn consistency_reports() {
        let b = sphere(1.0);
        let r = is_fully_consistent(&unit_solid_sphere(), &b, DEFAULT_EPSILON);
        assert!(r.is_consistent(), "{:?}", r);
        assert_relative_eq!(r.min_eig_pseudo_inertia, 0.2, epsilon = 1e-14);
        assert_relative_eq!(r.min_eig_com, 1.0, epsilon = 1e-14);

        let neg = InertialParams::from_parts(
            1.0,
            Vector3::zeros(),
            &Matrix3::from_diagonal(&Vector3::new(-0.1, 0.4, 0.4)),
        );
        let r = is_fully_consistent(&neg, &b, DEFAULT_EPSILON);
        assert!(!r.is_consistent());
        assert!(!r.pseudo_inertia_ok());

        // principal moments (1, 1, 3): K has eigenvalue (1 + 1 − 3)/2 < 0
        let tri = InertialParams::from_parts(
            1.0,
            Vector3::zeros(),
            &Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 3.0)),
        );
        let r = is_fully_consistent(&tri, &sphere(10.0), DEFAULT_EPSILON);
        assert!(!r.pseudo_inertia_ok());
        assert_relative_eq!(r.min_eig_pseudo_inertia, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn solid_ellipsoid_is_interior() {
        let b = EllipsoidBound::new(Vector3::new(0.1, -0.2, 0.05), Vector3::new(0.3, 0.1, 0.2));
        let p = InertialParams::solid_ellipsoid(2.0, &b);
        let r = check_consistency(&p, &b, 0.0, 0.0);
        assert!(r.min_eig_pseudo_inertia > 0.0);
        assert!(r.min_eig_com > 0.0);
        assert_relative_eq!(r.density_trace, 0.8, epsilon = 1e-12);
    }

    fn arb_params() -> impl Strategy<Value = [f64; 10]> {
        proptest::array::uniform10(-5.0f64..5.0)
    }

    proptest! {
        #[test]
        fn pseudo_inertia_round_trip(v in arb_params()) {
            let p = InertialParams(v);
            let back = params_from_pseudo_inertia(&pseudo_inertia(&p));
            for k in 0..10 {
                prop_assert!((back.0[k] - v[k]).abs() < 1e-14 * (1.0 + v[k].abs()));
            }
        }

        #[test]
        fn density_is_linear(a in arb_params(), b in arb_params(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
            let e = EllipsoidBound::new(Vector3::new(0.1, 0.2, -0.3), Vector3::new(0.5, 1.0, 2.0));
            let mix = InertialParams(std::array::from_fn(|k| s * a[k] + t * b[k]));
            let lhs = density_realizability(&mix, &e);
            let rhs = s * density_realizability(&InertialParams(a), &e) + t * density_realizability(&InertialParams(b), &e);
            prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
            let coef = density_coefficients(&e);
            let lin: f64 = (0..10).map(|k| coef[k] * mix.0[k]).sum();
            prop_assert!((lin - lhs).abs() < 1e-11 * (1.0 + lhs.abs()));
        }
    }
}
