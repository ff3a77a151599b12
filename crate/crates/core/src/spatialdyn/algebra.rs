//! Spatial algebra in body coordinates.
//!
//! Spatial vectors are stored linear part first: a motion vector is
//! `[v; ω]` and a force vector is `[f; n]`, matching the ordering of the
//! floating-base generalized velocity.

use nalgebra::{Matrix3, Matrix6, Quaternion, Rotation3, UnitQuaternion, Vector3, Vector6};

use crate::consistency::InertialParams;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// URDF convention: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rpy_to_matrix(rpy: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = rpy.x.sin_cos();
    let (sp, cp) = rpy.y.sin_cos();
    let (sy, cy) = rpy.z.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// Rotation matrix of a unit quaternion stored as `(x, y, z, w)`.
pub fn quat_xyzw_to_matrix(x: f64, y: f64, z: f64, w: f64) -> Matrix3<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
        .to_rotation_matrix()
        .into_inner()
}

pub fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*omega).into_inner()
}

/// A rigid transform. Read as `parent_T_child`: `rot` holds the child axes in
/// parent coordinates and `pos` the child origin in parent coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rot: Matrix3<f64>,
    pub pos: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rot: Matrix3::identity(),
            pos: Vector3::zeros(),
        }
    }

    pub fn new(rot: Matrix3<f64>, pos: Vector3<f64>) -> Self {
        Self { rot, pos }
    }

    pub fn from_xyz_rpy(xyz: &Vector3<f64>, rpy: &Vector3<f64>) -> Self {
        Self {
            rot: rpy_to_matrix(rpy),
            pos: *xyz,
        }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rot: self.rot * other.rot,
            pos: self.pos + self.rot * other.pos,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rot.transpose();
        Pose {
            rot: rt,
            pos: -(rt * self.pos),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pos + self.rot * p
    }

    /// Re-express a motion vector given in parent coordinates in child coordinates.
    pub fn motion_to_child(&self, m: &Vector6<f64>) -> Vector6<f64> {
        let lin = m.fixed_rows::<3>(0).into_owned();
        let ang = m.fixed_rows::<3>(3).into_owned();
        let rt = self.rot.transpose();
        let l = rt * (lin + ang.cross(&self.pos));
        let a = rt * ang;
        Vector6::new(l.x, l.y, l.z, a.x, a.y, a.z)
    }

    /// Re-express a force vector given in child coordinates in parent coordinates.
    pub fn force_to_parent(&self, f: &Vector6<f64>) -> Vector6<f64> {
        let fl = self.rot * f.fixed_rows::<3>(0);
        let n = self.rot * f.fixed_rows::<3>(3) + self.pos.cross(&fl);
        Vector6::new(fl.x, fl.y, fl.z, n.x, n.y, n.z)
    }

    /// 6×6 matrix of [`Pose::motion_to_child`].
    pub fn motion_matrix(&self) -> Matrix6<f64> {
        let rt = self.rot.transpose();
        let mut x = Matrix6::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        x.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-rt * skew(&self.pos)));
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&rt);
        x
    }
}

#[inline]
fn split(v: &Vector6<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (
        v.fixed_rows::<3>(0).into_owned(),
        v.fixed_rows::<3>(3).into_owned(),
    )
}

#[inline]
fn join(a: Vector3<f64>, b: Vector3<f64>) -> Vector6<f64> {
    Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// Motion cross product `v × m`.
pub fn cross_motion(v: &Vector6<f64>, m: &Vector6<f64>) -> Vector6<f64> {
    let (vl, w) = split(v);
    let (ml, mw) = split(m);
    join(w.cross(&ml) + vl.cross(&mw), w.cross(&mw))
}

/// Force cross product `v ×* f`.
pub fn cross_force(v: &Vector6<f64>, f: &Vector6<f64>) -> Vector6<f64> {
    let (vl, w) = split(v);
    let (fl, n) = split(f);
    join(w.cross(&fl), w.cross(&n) + vl.cross(&fl))
}

/// Spatial inertia about the link origin, in link coordinates.
pub fn spatial_inertia(p: &InertialParams) -> Matrix6<f64> {
    let m = p.mass();
    let hx = skew(&p.first_moment());
    let mut i = Matrix6::zeros();
    i.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Matrix3::identity() * m));
    i.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-hx));
    i.fixed_view_mut::<3, 3>(3, 0).copy_from(&hx);
    i.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&p.rotational_inertia());
    i
}

/// `I(φ)·m` without forming the 6×6 matrix.
pub fn inertia_times(p: &InertialParams, m: &Vector6<f64>) -> Vector6<f64> {
    let (ml, mw) = split(m);
    let h = p.first_moment();
    let f = ml * p.mass() - h.cross(&mw);
    let n = h.cross(&ml) + p.rotational_inertia() * mw;
    join(f, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rpy_matches_axis_composition() {
        let rpy = Vector3::new(0.3, -0.7, 1.1);
        let expected = Rotation3::from_axis_angle(&Vector3::z_axis(), rpy.z)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), rpy.y)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), rpy.x);
        assert_relative_eq!(rpy_to_matrix(&rpy), expected.into_inner(), epsilon = 1e-14);
    }

    #[test]
    fn force_and_motion_transforms_are_dual() {
        let x = Pose::from_xyz_rpy(&Vector3::new(0.1, -0.2, 0.3), &Vector3::new(0.5, 0.1, -0.4));
        let m = Vector6::new(0.3, -1.0, 0.2, 0.7, 0.1, -0.5);
        let f = Vector6::new(1.0, 2.0, -0.5, 0.2, 0.0, 0.9);
        // power is frame independent: (X m)·f_child == m·(Xᵀ f_child)
        let lhs = x.motion_to_child(&m).dot(&f);
        let rhs = m.dot(&x.force_to_parent(&f));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
        assert_relative_eq!(x.motion_matrix() * m, x.motion_to_child(&m), epsilon = 1e-14);
    }

    #[test]
    fn inertia_times_matches_matrix() {
        let p = InertialParams::new([2.0, 0.1, -0.2, 0.05, 0.3, 0.01, -0.02, 0.4, 0.03, 0.5]);
        let m = Vector6::new(0.3, -1.0, 0.2, 0.7, 0.1, -0.5);
        assert_relative_eq!(spatial_inertia(&p) * m, inertia_times(&p, &m), epsilon = 1e-14);
        let i = spatial_inertia(&p);
        assert_relative_eq!(i, i.transpose(), epsilon = 0.0);
    }
}
