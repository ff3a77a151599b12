//! Kinematic tree description, validation and the model file format.
//!
//! The model file is TOML with one `[[link]]` table per rigid body and one
//! `[[joint]]` table per joint:
//!
//! ```toml
//! gravity = [0.0, 0.0, -9.81]
//!
//! [[link]]
//! name = "base"
//! mass = 1.5
//! com = [0.0, 0.0, 0.0]              # or first_moment = m·c
//! inertia = [ixx, ixy, ixz, iyy, iyz, izz]   # about the link origin
//! ellipsoid = { center = [0.0, 0.0, 0.0], semi_axes = [0.2, 0.1, 0.05] }
//! contact = [{ name = "foot", xyz = [0.0, 0.0, -0.2] }]
//!
//! [[joint]]
//! name = "root"
//! type = "floating"                  # revolute | prismatic | floating
//! parent = "world"
//! child = "base"
//! axis = [0.0, 0.0, 1.0]
//! xyz = [0.0, 0.0, 0.0]
//! rpy = [0.0, 0.0, 0.0]
//! home = 0.0                         # default posture, optional
//! ```
//!
//! Link declaration order fixes the block order of the stacked parameter
//! vector; actuated joint declaration order fixes the generalized coordinates
//! after the floating base.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consistency::{check_consistency, stack, InertialParams, DEFAULT_FEAS_TOL};
use crate::spatialdyn::algebra::Pose;
use crate::{Error, Result};

/// Name used as the parent of the floating joint.
pub const WORLD: &str = "world";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Revolute,
    Prismatic,
    Floating,
}

/// Fixed placement given as translation plus roll-pitch-yaw.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Placement {
    pub xyz: Vector3<f64>,
    pub rpy: Vector3<f64>,
}

impl Placement {
    pub fn new(xyz: Vector3<f64>, rpy: Vector3<f64>) -> Self {
        Self { xyz, rpy }
    }

    pub fn translation(xyz: Vector3<f64>) -> Self {
        Self {
            xyz,
            rpy: Vector3::zeros(),
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::from_xyz_rpy(&self.xyz, &self.rpy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub joint_type: JointType,
    /// Unit axis in the joint (child) frame.
    pub axis: Vector3<f64>,
    pub parent_link: String,
    pub child_link: String,
    /// Parent link frame to joint frame.
    pub placement: Placement,
    /// Joint position of the default posture (starting point of simulations).
    pub home: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactFrame {
    pub name: String,
    pub placement: Placement,
}

/// Axis-aligned ellipsoid `(x − x_c)ᵀ Q_s⁻¹ (x − x_c) ≤ 1`, `Q_s = diag(x_s²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidBound {
    pub center: Vector3<f64>,
    pub semi_axes: Vector3<f64>,
}

impl EllipsoidBound {
    pub fn new(center: Vector3<f64>, semi_axes: Vector3<f64>) -> Self {
        Self { center, semi_axes }
    }

    /// `Q_s`.
    pub fn shape_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.semi_axes.component_mul(&self.semi_axes))
    }

    /// Origin-centred sphere of radius `1.5·‖c‖ + 0.05` around the prior CoM.
    pub fn default_for(prior: &InertialParams) -> Self {
        let r = 1.5 * prior.com().map_or(0.0, |c| c.norm()) + 0.05;
        Self::new(Vector3::zeros(), Vector3::repeat(r))
    }

    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        let d = x - self.center;
        (0..3)
            .map(|i| (d[i] / self.semi_axes[i]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    pub prior: InertialParams,
    pub ellipsoid: EllipsoidBound,
    pub contacts: Vec<ContactFrame>,
}

/// A contact frame resolved to its link.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactRef {
    pub name: String,
    pub link: usize,
    pub placement: Pose,
}

#[derive(Debug, Clone, PartialEq)]
struct Topology {
    root: usize,
    /// Links ordered so that every parent precedes its children.
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    /// Incoming joint of each link.
    joint_of: Vec<usize>,
    /// Velocity index of the incoming actuated joint.
    dof_of: Vec<Option<usize>>,
    actuated: Vec<usize>,
    contacts: Vec<ContactRef>,
    placements: Vec<Pose>,
}

/// Validated, immutable robot description.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    links: Vec<LinkSpec>,
    joints: Vec<JointSpec>,
    gravity: Vector3<f64>,
    topo: Topology,
}

impl RobotModel {
    pub fn new(links: Vec<LinkSpec>, joints: Vec<JointSpec>, gravity: Vector3<f64>) -> Result<Self> {
        let topo = build_topology(&links, &joints)?;
        if !gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::Validation("gravity must be finite".into()));
        }
        for link in &links {
            if !link.semi_axes_valid() {
                return Err(Error::Validation(format!(
                    "link `{}`: ellipsoid semi-axes must be strictly positive",
                    link.name
                )));
            }
            let report = check_consistency(&link.prior, &link.ellipsoid, 0.0, DEFAULT_FEAS_TOL);
            if !report.is_consistent() {
                return Err(Error::InconsistentParams {
                    link: link.name.clone(),
                    detail: report.violations().join("; "),
                });
            }
        }
        Ok(Self {
            links,
            joints,
            gravity,
            topo,
        })
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn gravity(&self) -> Vector3<f64> {
        self.gravity
    }

    /// Actuated joint count `n`.
    pub fn n_joints(&self) -> usize {
        self.topo.actuated.len()
    }

    /// Link count `n_b`.
    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    /// Position dimension `n + 7` (quaternion base orientation).
    pub fn nq(&self) -> usize {
        self.n_joints() + 7
    }

    /// Velocity dimension `n + 6`.
    pub fn nv(&self) -> usize {
        self.n_joints() + 6
    }

    pub fn n_params(&self) -> usize {
        10 * self.n_links()
    }

    pub fn root(&self) -> usize {
        self.topo.root
    }

    pub fn traversal_order(&self) -> &[usize] {
        &self.topo.order
    }

    pub fn parent(&self, link: usize) -> Option<usize> {
        self.topo.parent[link]
    }

    /// Incoming joint of `link` (the floating joint for the root).
    pub fn joint_of(&self, link: usize) -> &JointSpec {
        &self.joints[self.topo.joint_of[link]]
    }

    /// Cached placement of the incoming joint of `link`.
    pub fn joint_placement(&self, link: usize) -> &Pose {
        &self.topo.placements[link]
    }

    /// Velocity index of the actuated joint driving `link`.
    pub fn dof_of(&self, link: usize) -> Option<usize> {
        self.topo.dof_of[link]
    }

    /// Actuated joints in coordinate order.
    pub fn actuated_joints(&self) -> impl Iterator<Item = &JointSpec> {
        self.topo.actuated.iter().map(move |&j| &self.joints[j])
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.actuated_joints().map(|j| j.name.clone()).collect()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// All contact frames, in link then declaration order.
    pub fn contact_frames(&self) -> &[ContactRef] {
        &self.topo.contacts
    }

    pub fn contact_index(&self, name: &str) -> Option<usize> {
        self.topo.contacts.iter().position(|c| c.name == name)
    }

    pub fn priors(&self) -> Vec<InertialParams> {
        self.links.iter().map(|l| l.prior).collect()
    }

    pub fn ellipsoids(&self) -> Vec<EllipsoidBound> {
        self.links.iter().map(|l| l.ellipsoid).collect()
    }

    /// Same kinematics with every link's parameters replaced. No consistency
    /// check is applied, so arbitrary (even unphysical) vectors are accepted.
    pub fn with_params_unchecked(&self, params: &[InertialParams]) -> RobotModel {
        assert_eq!(params.len(), self.n_links(), "one parameter vector per link");
        let mut out = self.clone();
        for (link, p) in out.links.iter_mut().zip(params) {
            link.prior = *p;
        }
        out
    }

    /// Same kinematics with new (validated) priors.
    pub fn with_params(&self, params: &[InertialParams]) -> Result<RobotModel> {
        if params.len() != self.n_links() {
            return Err(Error::dim("link parameter sets", self.n_links(), params.len()));
        }
        let mut links = self.links.clone();
        for (link, p) in links.iter_mut().zip(params) {
            link.prior = *p;
        }
        RobotModel::new(links, self.joints.clone(), self.gravity)
    }

    pub fn with_gravity(&self, gravity: Vector3<f64>) -> RobotModel {
        let mut out = self.clone();
        out.gravity = gravity;
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.prior.mass()).sum()
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        hex::encode(digest)
    }

    pub fn to_toml_string(&self) -> String {
        let file = ModelFile {
            gravity: Some(self.gravity.into()),
            links: self
                .links
                .iter()
                .map(|l| {
                    let i = l.prior.0;
                    LinkEntry {
                        name: l.name.clone(),
                        mass: l.prior.mass(),
                        com: None,
                        first_moment: Some(l.prior.first_moment().into()),
                        inertia: [i[4], i[5], i[6], i[7], i[8], i[9]],
                        ellipsoid: Some(EllipsoidEntry {
                            center: l.ellipsoid.center.into(),
                            semi_axes: l.ellipsoid.semi_axes.into(),
                        }),
                        contacts: l
                            .contacts
                            .iter()
                            .map(|c| ContactEntry {
                                name: c.name.clone(),
                                xyz: Some(c.placement.xyz.into()),
                                rpy: Some(c.placement.rpy.into()),
                            })
                            .collect(),
                    }
                })
                .collect(),
            joints: self
                .joints
                .iter()
                .map(|j| JointEntry {
                    name: j.name.clone(),
                    kind: j.joint_type,
                    axis: Some(j.axis.into()),
                    parent: j.parent_link.clone(),
                    child: j.child_link.clone(),
                    xyz: Some(j.placement.xyz.into()),
                    rpy: Some(j.placement.rpy.into()),
                    home: (j.home != 0.0).then_some(j.home),
                })
                .collect(),
        };
        toml::to_string(&file).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

impl LinkSpec {
    fn semi_axes_valid(&self) -> bool {
        self.ellipsoid.semi_axes.iter().all(|s| s.is_finite() && *s > 0.0)
    }
}

fn build_topology(links: &[LinkSpec], joints: &[JointSpec]) -> Result<Topology> {
    if links.is_empty() {
        return Err(Error::Validation("model has no links".into()));
    }
    let mut link_ids = HashMap::new();
    for (i, l) in links.iter().enumerate() {
        if link_ids.insert(l.name.as_str(), i).is_some() {
            return Err(Error::Validation(format!("duplicate link name `{}`", l.name)));
        }
    }
    let mut joint_names = HashSet::new();
    for j in joints {
        if !joint_names.insert(j.name.as_str()) {
            return Err(Error::Validation(format!("duplicate joint name `{}`", j.name)));
        }
    }
    let floating: Vec<usize> = joints
        .iter()
        .enumerate()
        .filter(|(_, j)| j.joint_type == JointType::Floating)
        .map(|(i, _)| i)
        .collect();
    match floating.len() {
        0 => return Err(Error::Validation("no floating joint".into())),
        1 => {}
        _ => return Err(Error::Validation("multiple floating joints".into())),
    }
    let fj = &joints[floating[0]];
    if fj.parent_link != WORLD {
        return Err(Error::Validation(format!(
            "floating joint `{}` must have parent `{WORLD}` (it is the tree root)",
            fj.name
        )));
    }

    let n = links.len();
    let mut parent = vec![None; n];
    let mut joint_of: Vec<Option<usize>> = vec![None; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ji, j) in joints.iter().enumerate() {
        let child = *link_ids.get(j.child_link.as_str()).ok_or_else(|| {
            Error::Validation(format!("joint `{}`: unknown child link `{}`", j.name, j.child_link))
        })?;
        if joint_of[child].is_some() {
            return Err(Error::Validation(format!(
                "link `{}` has more than one parent joint",
                j.child_link
            )));
        }
        joint_of[child] = Some(ji);
        if j.joint_type != JointType::Floating {
            let p = *link_ids.get(j.parent_link.as_str()).ok_or_else(|| {
                Error::Validation(format!("joint `{}`: unknown parent link `{}`", j.name, j.parent_link))
            })?;
            let norm = j.axis.norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "joint `{}`: axis must have unit norm (got {norm})",
                    j.name
                )));
            }
            parent[child] = Some(p);
            children[p].push(child);
        }
    }
    let root = *link_ids.get(fj.child_link.as_str()).expect("checked above");
    for (i, j) in joint_of.iter().enumerate() {
        if j.is_none() {
            return Err(Error::Validation(format!("link `{}` has no parent joint", links[i].name)));
        }
    }

    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    let mut seen = vec![false; n];
    while let Some(l) = stack.pop() {
        if seen[l] {
            return Err(Error::Validation("joint graph contains a cycle".into()));
        }
        seen[l] = true;
        order.push(l);
        stack.extend(children[l].iter().rev().copied());
    }
    if order.len() != n {
        return Err(Error::Validation(
            "joint graph is not a single tree rooted at the floating joint (cycle or disconnected links)".into(),
        ));
    }

    let actuated: Vec<usize> = joints
        .iter()
        .enumerate()
        .filter(|(_, j)| j.joint_type != JointType::Floating)
        .map(|(i, _)| i)
        .collect();
    let joint_of: Vec<usize> = joint_of.into_iter().map(|j| j.unwrap()).collect();
    let dof_of = joint_of
        .iter()
        .map(|&ji| actuated.iter().position(|&a| a == ji).map(|k| 6 + k))
        .collect();

    let mut contacts = Vec::new();
    let mut contact_names = HashSet::new();
    for (li, l) in links.iter().enumerate() {
        for c in &l.contacts {
            if !contact_names.insert(c.name.clone()) {
                return Err(Error::Validation(format!("duplicate contact frame `{}`", c.name)));
            }
            contacts.push(ContactRef {
                name: c.name.clone(),
                link: li,
                placement: c.placement.pose(),
            });
        }
    }
    let placements = joint_of.iter().map(|&ji| joints[ji].placement.pose()).collect();

    Ok(Topology {
        root,
        order,
        parent,
        joint_of,
        dof_of,
        actuated,
        contacts,
        placements,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gravity: Option<[f64; 3]>,
    #[serde(rename = "link", default)]
    links: Vec<LinkEntry>,
    #[serde(rename = "joint", default)]
    joints: Vec<JointEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    name: String,
    mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    com: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    first_moment: Option<[f64; 3]>,
    inertia: [f64; 6],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ellipsoid: Option<EllipsoidEntry>,
    #[serde(rename = "contact", default, skip_serializing_if = "Vec::is_empty")]
    contacts: Vec<ContactEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EllipsoidEntry {
    center: [f64; 3],
    semi_axes: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContactEntry {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xyz: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rpy: Option<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    #[serde(rename = "type")]
    kind: JointType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<[f64; 3]>,
    parent: String,
    child: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xyz: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rpy: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    home: Option<f64>,
}

fn v3(a: Option<[f64; 3]>) -> Vector3<f64> {
    a.map(Vector3::from).unwrap_or_else(Vector3::zeros)
}

/// Parses and validates a model description. `context` labels errors.
pub fn parse_model(text: &str, context: &str) -> Result<RobotModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })?;
    let mut links = Vec::with_capacity(file.links.len());
    for l in file.links {
        let h = match (l.com, l.first_moment) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse {
                    context: format!("{context}: link `{}`", l.name),
                    message: "give either `com` or `first_moment`, not both".into(),
                })
            }
            (Some(c), None) => Vector3::from(c) * l.mass,
            (None, Some(h)) => Vector3::from(h),
            (None, None) => Vector3::zeros(),
        };
        let [ixx, ixy, ixz, iyy, iyz, izz] = l.inertia;
        let prior = InertialParams::new([l.mass, h.x, h.y, h.z, ixx, ixy, ixz, iyy, iyz, izz]);
        let ellipsoid = match l.ellipsoid {
            Some(e) => EllipsoidBound::new(e.center.into(), e.semi_axes.into()),
            None => EllipsoidBound::default_for(&prior),
        };
        let contacts = l
            .contacts
            .into_iter()
            .map(|c| ContactFrame {
                name: c.name,
                placement: Placement::new(v3(c.xyz), v3(c.rpy)),
            })
            .collect();
        links.push(LinkSpec {
            name: l.name,
            prior,
            ellipsoid,
            contacts,
        });
    }
    let joints = file
        .joints
        .into_iter()
        .map(|j| JointSpec {
            name: j.name,
            joint_type: j.kind,
            axis: j.axis.map(Vector3::from).unwrap_or_else(|| Vector3::new(0.0, 0.0, 1.0)),
            parent_link: j.parent,
            child_link: j.child,
            placement: Placement::new(v3(j.xyz), v3(j.rpy)),
            home: j.home.unwrap_or(0.0),
        })
        .collect();
    let gravity = file.gravity.map(Vector3::from).unwrap_or(Vector3::new(0.0, 0.0, -9.81));
    RobotModel::new(links, joints, gravity)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RobotModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

/// Stacked priors `φ̂ ∈ R^{10·n_b}` in link declaration order.
pub fn stack_priors(model: &RobotModel) -> DVector<f64> {
    stack(&model.priors())
}

/// One-line summary used in reports.
pub fn describe(model: &RobotModel) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{} links, {} actuated joints, {} contact frames, total mass {:.4} kg",
        model.n_links(),
        model.n_joints(),
        model.contact_frames().len(),
        model.total_mass()
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = r#"
[[link]]
name = "body"
mass = 1.0
inertia = [0.01, 0.0, 0.0, 0.01, 0.0, 0.01]
ellipsoid = { center = [0.0, 0.0, 0.0], semi_axes = [0.2, 0.2, 0.2] }

[[joint]]
name = "root"
type = "floating"
parent = "world"
child = "body"
"#;

    #[test]
    fn single_floating_link() {
        let m = parse_model(SINGLE, "inline").unwrap();
        assert_eq!(m.n_joints(), 0);
        assert_eq!(m.n_links(), 1);
        assert_eq!(m.nq(), 7);
        assert_eq!(m.nv(), 6);
        assert_eq!(stack_priors(&m).as_slice(), m.links()[0].prior.as_slice());
        assert_eq!(m.gravity(), Vector3::new(0.0, 0.0, -9.81));
    }

    #[test]
    fn two_floating_joints_rejected() {
        let text = format!(
            "{SINGLE}\n[[link]]\nname = \"b2\"\nmass = 1.0\ninertia = [0.01, 0.0, 0.0, 0.01, 0.0, 0.01]\n\
             [[joint]]\nname = \"root2\"\ntype = \"floating\"\nparent = \"world\"\nchild = \"b2\"\n"
        );
        let err = parse_model(&text, "inline").unwrap_err().to_string();
        assert!(err.contains("multiple floating joints"), "{err}");
    }

    #[test]
    fn inconsistent_prior_rejected() {
        let text = SINGLE.replace("[0.01, 0.0, 0.0, 0.01, 0.0, 0.01]", "[0.01, 0.0, 0.0, 0.01, 0.0, 0.03]");
        let err = parse_model(&text, "inline").unwrap_err();
        assert!(matches!(err, Error::InconsistentParams { .. }), "{err}");
    }

    #[test]
    fn parse_error_has_context() {
        let err = parse_model("[[link]]\nname = 3\n", "bad.toml").unwrap_err().to_string();
        assert!(err.contains("bad.toml"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn non_unit_axis_rejected() {
        let text = format!(
            "{SINGLE}\n[[link]]\nname = \"arm\"\nmass = 0.5\ninertia = [0.01, 0.0, 0.0, 0.01, 0.0, 0.01]\n\
             ellipsoid = {{ center = [0.0, 0.0, 0.0], semi_axes = [0.3, 0.3, 0.3] }}\n\
             [[joint]]\nname = \"j\"\ntype = \"revolute\"\naxis = [0.0, 2.0, 0.0]\nparent = \"body\"\nchild = \"arm\"\n"
        );
        let err = parse_model(&text, "inline").unwrap_err().to_string();
        assert!(err.contains("unit norm"), "{err}");
    }

    #[test]
    fn cycle_rejected() {
        let link = |n: &str| {
            format!("[[link]]\nname = \"{n}\"\nmass = 0.5\ninertia = [0.01, 0.0, 0.0, 0.01, 0.0, 0.01]\n\
                     ellipsoid = {{ center = [0.0, 0.0, 0.0], semi_axes = [0.3, 0.3, 0.3] }}\n")
        };
        let joint = |n: &str, p: &str, c: &str| {
            format!("[[joint]]\nname = \"{n}\"\ntype = \"revolute\"\naxis = [0.0, 1.0, 0.0]\nparent = \"{p}\"\nchild = \"{c}\"\n")
        };
        let text = format!("{SINGLE}{}{}{}{}", link("a"), link("b"), joint("ja", "b", "a"), joint("jb", "a", "b"));
        let err = parse_model(&text, "inline").unwrap_err().to_string();
        assert!(err.contains("tree"), "{err}");
    }

    #[test]
    fn default_ellipsoid() {
        let text = SINGLE
            .replace(
                "ellipsoid = { center = [0.0, 0.0, 0.0], semi_axes = [0.2, 0.2, 0.2] }",
                "com = [0.02, 0.0, 0.0]",
            )
            .replace("[0.01, 0.0, 0.0, 0.01, 0.0, 0.01]", "[0.001, 0.0, 0.0, 0.001, 0.0, 0.001]");
        let m = parse_model(&text, "inline").unwrap();
        let e = m.links()[0].ellipsoid;
        assert!((e.semi_axes.x - (1.5 * 0.02 + 0.05)).abs() < 1e-15);
        assert_eq!(e.center, Vector3::zeros());
    }
}
