//! Floating-base kinematics and dynamics.
//!
//! Generalized position: `q = [p (3), quaternion (x, y, z, w), joints (n)]`,
//! with `p` and the quaternion giving the base pose in the world (after the
//! floating joint's fixed placement). Generalized velocity:
//! `v = [base linear (3), base angular (3), joint rates (n)]`, the base twist
//! expressed in the base frame; `a = v̇`.

pub mod algebra;

use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};

use self::algebra::{cross_force, cross_motion, inertia_times, quat_xyzw_to_matrix, so3_exp, spatial_inertia, Pose};
use crate::consistency::InertialParams;
use crate::contact::ContactSet;
use crate::model::{JointType, RobotModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
}

impl State {
    pub fn new(q: DVector<f64>, v: DVector<f64>, a: DVector<f64>) -> Self {
        Self { q, v, a }
    }

    /// Zero velocity and acceleration at `q`.
    pub fn at_rest(q: DVector<f64>, nv: usize) -> Self {
        Self {
            q,
            v: DVector::zeros(nv),
            a: DVector::zeros(nv),
        }
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        check_q(model, &self.q)?;
        check_len("v", model.nv(), self.v.len())?;
        check_len("a", model.nv(), self.a.len())
    }

    fn provenance(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for x in self.q.iter().chain(self.v.iter()).chain(self.a.iter()) {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::dim(what, expected, got));
    }
    Ok(())
}

fn check_q(model: &RobotModel, q: &DVector<f64>) -> Result<()> {
    check_len("q", model.nq(), q.len())?;
    let norm = q.fixed_rows::<4>(3).norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "base quaternion must have unit norm (got {norm})"
        )));
    }
    Ok(())
}

/// Identity base pose and zero joint positions.
pub fn neutral_configuration(model: &RobotModel) -> DVector<f64> {
    let mut q = DVector::zeros(model.nq());
    q[6] = 1.0;
    q
}

/// Identity base pose and every joint at its `home` position.
pub fn home_configuration(model: &RobotModel) -> DVector<f64> {
    let mut q = neutral_configuration(model);
    for (k, j) in model.actuated_joints().enumerate() {
        q[7 + k] = j.home;
    }
    q
}

/// Base pose `world_T_base` from the first seven coordinates of `q`.
pub fn base_pose(model: &RobotModel, q: &DVector<f64>) -> Pose {
    let free = Pose::new(
        quat_xyzw_to_matrix(q[3], q[4], q[5], q[6]),
        Vector3::new(q[0], q[1], q[2]),
    );
    model.joint_placement(model.root()).compose(&free)
}

/// Motion subspace of the single-DoF joint driving `link`, in link coordinates.
fn motion_axis(model: &RobotModel, link: usize) -> Vector6<f64> {
    let j = model.joint_of(link);
    let a = j.axis;
    match j.joint_type {
        JointType::Revolute => Vector6::new(0.0, 0.0, 0.0, a.x, a.y, a.z),
        JointType::Prismatic => Vector6::new(a.x, a.y, a.z, 0.0, 0.0, 0.0),
        JointType::Floating => unreachable!("floating joint has a 6-D subspace"),
    }
}

/// `parent_T_link` including the joint displacement (world_T_base for the root).
fn local_pose(model: &RobotModel, link: usize, q: &DVector<f64>) -> Pose {
    if link == model.root() {
        return base_pose(model, q);
    }
    let j = model.joint_of(link);
    let qi = q[model.dof_of(link).expect("actuated") + 1];
    let motion = match j.joint_type {
        JointType::Revolute => Pose::new(so3_exp(&(j.axis * qi)), Vector3::zeros()),
        JointType::Prismatic => Pose::new(nalgebra::Matrix3::identity(), j.axis * qi),
        JointType::Floating => unreachable!(),
    };
    model.joint_placement(link).compose(&motion)
}

/// Per-link quantities of one forward sweep; spatial vectors in link coordinates.
#[derive(Debug, Clone)]
pub struct TreeKinematics {
    pub local: Vec<Pose>,
    pub world: Vec<Pose>,
    pub vel: Vec<Vector6<f64>>,
    pub acc: Vec<Vector6<f64>>,
}

/// Forward sweep. `acc` includes the fictitious upward gravity acceleration
/// when `with_gravity` is set.
pub fn tree_kinematics(
    model: &RobotModel,
    q: &DVector<f64>,
    v: Option<&DVector<f64>>,
    a: Option<&DVector<f64>>,
    with_gravity: bool,
) -> TreeKinematics {
    let nb = model.n_links();
    let mut out = TreeKinematics {
        local: vec![Pose::identity(); nb],
        world: vec![Pose::identity(); nb],
        vel: vec![Vector6::zeros(); nb],
        acc: vec![Vector6::zeros(); nb],
    };
    for &i in model.traversal_order() {
        let x = local_pose(model, i, q);
        out.local[i] = x;
        match model.parent(i) {
            None => {
                out.world[i] = x;
                if let Some(v) = v {
                    out.vel[i] = v.fixed_rows::<6>(0).into_owned();
                }
                let mut acc = a.map_or_else(Vector6::zeros, |a| a.fixed_rows::<6>(0).into_owned());
                if with_gravity {
                    let g = x.rot.transpose() * model.gravity();
                    acc[0] -= g.x;
                    acc[1] -= g.y;
                    acc[2] -= g.z;
                }
                out.acc[i] = acc;
            }
            Some(p) => {
                out.world[i] = out.world[p].compose(&x);
                let s = motion_axis(model, i);
                let d = model.dof_of(i).unwrap();
                let qd = v.map_or(0.0, |v| v[d]);
                let qdd = a.map_or(0.0, |a| a[d]);
                let vi = x.motion_to_child(&out.vel[p]) + s * qd;
                out.acc[i] = x.motion_to_child(&out.acc[p]) + s * qdd + cross_motion(&vi, &(s * qd));
                out.vel[i] = vi;
            }
        }
    }
    out
}

/// World poses of every link and contact frame.
#[derive(Debug, Clone)]
pub struct FramePoses {
    pub links: Vec<Pose>,
    /// In the order of [`RobotModel::contact_frames`].
    pub contacts: Vec<Pose>,
}

pub fn forward_kinematics(model: &RobotModel, q: &DVector<f64>) -> Result<FramePoses> {
    check_q(model, q)?;
    let kin = tree_kinematics(model, q, None, None, false);
    let contacts = model
        .contact_frames()
        .iter()
        .map(|c| kin.world[c.link].compose(&c.placement))
        .collect();
    Ok(FramePoses {
        links: kin.world,
        contacts,
    })
}

fn backward_sweep(model: &RobotModel, kin: &TreeKinematics, params: &[InertialParams]) -> DVector<f64> {
    let nb = model.n_links();
    let mut f: Vec<Vector6<f64>> = (0..nb)
        .map(|i| {
            let iv = inertia_times(&params[i], &kin.vel[i]);
            inertia_times(&params[i], &kin.acc[i]) + cross_force(&kin.vel[i], &iv)
        })
        .collect();
    let mut tau = DVector::zeros(model.nv());
    for &i in model.traversal_order().iter().rev() {
        match model.parent(i) {
            None => tau.fixed_rows_mut::<6>(0).copy_from(&f[i]),
            Some(p) => {
                tau[model.dof_of(i).unwrap()] = motion_axis(model, i).dot(&f[i]);
                let fp = kin.local[i].force_to_parent(&f[i]);
                f[p] += fp;
            }
        }
    }
    tau
}

/// Recursive Newton–Euler: `M(q)·a + n(q, v)` (first six rows base wrench in
/// base coordinates, then joint torques).
pub fn inverse_dynamics(model: &RobotModel, state: &State) -> Result<DVector<f64>> {
    state.validate(model)?;
    let kin = tree_kinematics(model, &state.q, Some(&state.v), Some(&state.a), true);
    Ok(backward_sweep(model, &kin, &model.priors()))
}

/// `n(q, v)`: inverse dynamics at zero acceleration.
pub fn nonlinear_effects(model: &RobotModel, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    inverse_dynamics(model, &State::new(q.clone(), v.clone(), DVector::zeros(model.nv())))
}

/// Joint-space inertia matrix by the composite rigid body algorithm.
pub fn mass_matrix(model: &RobotModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_q(model, q)?;
    let nb = model.n_links();
    let nv = model.nv();
    let kin = tree_kinematics(model, q, None, None, false);
    let mut composite: Vec<Matrix6<f64>> = model.priors().iter().map(spatial_inertia).collect();
    for &i in model.traversal_order().iter().rev() {
        if let Some(p) = model.parent(i) {
            let x = kin.local[i].motion_matrix();
            let ic = x.transpose() * composite[i] * x;
            composite[p] += ic;
        }
    }
    let mut m = DMatrix::zeros(nv, nv);
    for i in 0..nb {
        // columns of the motion subspace of link i and the matching dofs
        let (cols, dofs): (Vec<Vector6<f64>>, Vec<usize>) = match model.dof_of(i) {
            None => ((0..6).map(|k| Vector6::ith(k, 1.0)).collect(), (0..6).collect()),
            Some(d) => (vec![motion_axis(model, i)], vec![d]),
        };
        let mut forces: Vec<Vector6<f64>> = cols.iter().map(|s| composite[i] * s).collect();
        for (a, &da) in dofs.iter().enumerate() {
            for (b, s) in cols.iter().enumerate() {
                m[(dofs[b], da)] = s.dot(&forces[a]);
            }
        }
        let mut j = i;
        while let Some(p) = model.parent(j) {
            for f in forces.iter_mut() {
                *f = kin.local[j].force_to_parent(f);
            }
            j = p;
            let (pcols, pdofs): (Vec<Vector6<f64>>, Vec<usize>) = match model.dof_of(j) {
                None => ((0..6).map(|k| Vector6::ith(k, 1.0)).collect(), (0..6).collect()),
                Some(d) => (vec![motion_axis(model, j)], vec![d]),
            };
            for (a, &da) in dofs.iter().enumerate() {
                for (b, s) in pcols.iter().enumerate() {
                    let val = s.dot(&forces[a]);
                    m[(pdofs[b], da)] = val;
                    m[(da, pdofs[b])] = val;
                }
            }
        }
    }
    Ok(m)
}

/// Inertial regressor `Y(q, v, a)` with `Y·φ = inverse_dynamics` for every φ.
#[derive(Debug, Clone)]
pub struct Regressor {
    pub y: DMatrix<f64>,
    pub state_hash: u64,
}

/// Builds `Y` column by column: each column is the inverse dynamics of the
/// model with one unit inertial parameter and all others zero. The forward
/// kinematic sweep does not depend on φ and is shared by all columns.
pub fn regressor(model: &RobotModel, state: &State) -> Result<Regressor> {
    state.validate(model)?;
    let kin = tree_kinematics(model, &state.q, Some(&state.v), Some(&state.a), true);
    let nv = model.nv();
    let mut y = DMatrix::zeros(nv, model.n_params());
    for link in 0..model.n_links() {
        for k in 0..10 {
            let mut e = [0.0; 10];
            e[k] = 1.0;
            let unit = InertialParams(e);
            let iv = inertia_times(&unit, &kin.vel[link]);
            let mut f = inertia_times(&unit, &kin.acc[link]) + cross_force(&kin.vel[link], &iv);
            let col = 10 * link + k;
            let mut l = link;
            loop {
                match model.parent(l) {
                    None => {
                        y.view_mut((0, col), (6, 1)).copy_from(&f);
                        break;
                    }
                    Some(p) => {
                        y[(model.dof_of(l).unwrap(), col)] = motion_axis(model, l).dot(&f);
                        f = kin.local[l].force_to_parent(&f);
                        l = p;
                    }
                }
            }
        }
    }
    Ok(Regressor {
        y,
        state_hash: state.provenance(),
    })
}

fn resolve_contacts(model: &RobotModel, contacts: &ContactSet) -> Result<Vec<usize>> {
    contacts
        .active
        .iter()
        .map(|name| {
            model
                .contact_index(name)
                .ok_or_else(|| Error::Validation(format!("unknown contact frame `{name}`")))
        })
        .collect()
}

/// Is `dof_link` on the path from the root to `link`?
fn is_ancestor_or_self(model: &RobotModel, dof_link: usize, mut link: usize) -> bool {
    loop {
        if link == dof_link {
            return true;
        }
        match model.parent(link) {
            Some(p) => link = p,
            None => return false,
        }
    }
}

/// Stacked world-aligned translational Jacobians of the active contact points.
pub fn contact_jacobian(model: &RobotModel, q: &DVector<f64>, contacts: &ContactSet) -> Result<DMatrix<f64>> {
    check_q(model, q)?;
    let ids = resolve_contacts(model, contacts)?;
    let kin = tree_kinematics(model, q, None, None, false);
    let nv = model.nv();
    let mut jac = DMatrix::zeros(3 * ids.len(), nv);
    let root = model.root();
    for (row, &ci) in ids.iter().enumerate() {
        let c = &model.contact_frames()[ci];
        let x = kin.world[c.link].transform_point(&c.placement.pos);
        let base = &kin.world[root];
        for k in 0..3 {
            let axis = base.rot.column(k).into_owned();
            jac.view_mut((3 * row, k), (3, 1)).copy_from(&axis);
            jac.view_mut((3 * row, 3 + k), (3, 1))
                .copy_from(&axis.cross(&(x - base.pos)));
        }
        for i in 0..model.n_links() {
            let Some(d) = model.dof_of(i) else { continue };
            if !is_ancestor_or_self(model, i, c.link) {
                continue;
            }
            let j = model.joint_of(i);
            let w = &kin.world[i];
            let axis = w.rot * j.axis;
            let col = match j.joint_type {
                JointType::Revolute => axis.cross(&(x - w.pos)),
                JointType::Prismatic => axis,
                JointType::Floating => unreachable!(),
            };
            jac.view_mut((3 * row, d), (3, 1)).copy_from(&col);
        }
    }
    Ok(jac)
}

/// `J̇_c·v`: world-frame acceleration of each active contact point at zero
/// generalized acceleration.
pub fn contact_acceleration_bias(
    model: &RobotModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    contacts: &ContactSet,
) -> Result<DVector<f64>> {
    check_q(model, q)?;
    check_len("v", model.nv(), v.len())?;
    let ids = resolve_contacts(model, contacts)?;
    let kin = tree_kinematics(model, q, Some(v), None, false);
    let mut out = DVector::zeros(3 * ids.len());
    for (row, &ci) in ids.iter().enumerate() {
        let c = &model.contact_frames()[ci];
        let p = c.placement.pos;
        let vel = &kin.vel[c.link];
        let acc = &kin.acc[c.link];
        let (vl, w) = (vel.fixed_rows::<3>(0).into_owned(), vel.fixed_rows::<3>(3).into_owned());
        let (al, aw) = (acc.fixed_rows::<3>(0).into_owned(), acc.fixed_rows::<3>(3).into_owned());
        let local = al + aw.cross(&p) + w.cross(&(vl + w.cross(&p)));
        out.fixed_rows_mut::<3>(3 * row)
            .copy_from(&(kin.world[c.link].rot * local));
    }
    Ok(out)
}

/// World positions of the active contact points, stacked.
pub fn contact_positions(model: &RobotModel, q: &DVector<f64>, contacts: &ContactSet) -> Result<DVector<f64>> {
    let ids = resolve_contacts(model, contacts)?;
    let poses = forward_kinematics(model, q)?;
    let mut out = DVector::zeros(3 * ids.len());
    for (row, &ci) in ids.iter().enumerate() {
        out.fixed_rows_mut::<3>(3 * row).copy_from(&poses.contacts[ci].pos);
    }
    Ok(out)
}

/// Time derivative of `q` for generalized velocity `v`.
pub fn configuration_rate(model: &RobotModel, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut qd = DVector::zeros(model.nq());
    let r = quat_xyzw_to_matrix(q[3], q[4], q[5], q[6]);
    let lin = r * Vector3::new(v[0], v[1], v[2]);
    qd.fixed_rows_mut::<3>(0).copy_from(&lin);
    let (x, y, z, w) = (q[3], q[4], q[5], q[6]);
    let (wx, wy, wz) = (v[3], v[4], v[5]);
    // q̇ = ½ q ⊗ (ω, 0) with ω in the body frame
    qd[3] = 0.5 * (w * wx + y * wz - z * wy);
    qd[4] = 0.5 * (w * wy + z * wx - x * wz);
    qd[5] = 0.5 * (w * wz + x * wy - y * wx);
    qd[6] = -0.5 * (x * wx + y * wy + z * wz);
    qd.rows_mut(7, model.n_joints()).copy_from(&v.rows(6, model.n_joints()));
    qd
}

/// `q ⊕ δ`: base translated by `R·δ_lin`, rotated by `exp(δ_ω)` on the right,
/// joints shifted by `δ_joints`.
pub fn retract(model: &RobotModel, q: &DVector<f64>, delta: &DVector<f64>) -> DVector<f64> {
    let mut out = q.clone();
    let r = quat_xyzw_to_matrix(q[3], q[4], q[5], q[6]);
    let dp = r * Vector3::new(delta[0], delta[1], delta[2]);
    for k in 0..3 {
        out[k] += dp[k];
    }
    let cur = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[6], q[3], q[4], q[5]));
    let next = cur * nalgebra::UnitQuaternion::from_scaled_axis(Vector3::new(delta[3], delta[4], delta[5]));
    out[3] = next.i;
    out[4] = next.j;
    out[5] = next.k;
    out[6] = next.w;
    for k in 0..model.n_joints() {
        out[7 + k] += delta[6 + k];
    }
    out
}

/// Renormalizes the base quaternion in place.
pub fn normalize_configuration(q: &mut DVector<f64>) {
    let n = q.fixed_rows::<4>(3).norm();
    for k in 3..7 {
        q[k] /= n;
    }
}
