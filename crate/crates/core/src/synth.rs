//! Synthetic ground truth: constraint-consistent trajectories of a model with
//! known inertial parameters, friction and contact forces.
//!
//! Dynamic families are integrated forward in time. Joint torques come from a
//! PD tracker following a reference; the active contact points are held in
//! place by constraint forces `λ` (minimum-norm solution of the
//! constrained dynamics, with Baumgarte stabilization of the drift). Static
//! poses are solved exactly for `(τ, λ)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::consistency::{stack, InertialParams};
use crate::contact::{deadband_sign, ContactSet, DEFAULT_SIGN_DEADBAND};
use crate::dataio::{Dataset, DatasetMeta, TrajectorySample};
use crate::linalg;
use crate::model::RobotModel;
use crate::spatialdyn::{
    configuration_rate, contact_acceleration_bias, contact_jacobian, contact_positions, home_configuration,
    mass_matrix, nonlinear_effects, normalize_configuration,
};
use crate::{Error, Result};

/// Trajectory family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Motion {
    /// `poses` random postures around home (joint offsets uniform in
    /// `±spread`), each held for an equal share of the samples.
    Static { poses: usize, spread: f64 },
    /// Sum of `components` sines per joint, frequencies drawn in
    /// `[f_min, f_max]` Hz, total amplitude `amplitude` rad.
    Multisine {
        amplitude: f64,
        f_min: f64,
        f_max: f64,
        components: usize,
    },
    /// Periodic deepening of the home posture by the factor `depth`.
    CrouchExtend { depth: f64, period: f64 },
}

impl Motion {
    pub fn tag(&self) -> &'static str {
        match self {
            Motion::Static { .. } => "static",
            Motion::Multisine { .. } => "multisine",
            Motion::CrouchExtend { .. } => "crouch-extend",
        }
    }

    pub fn multisine() -> Self {
        Motion::Multisine {
            amplitude: 0.3,
            f_min: 0.3,
            f_max: 2.0,
            components: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Absolute torque noise std (N·m).
    pub torque_std: f64,
    /// Torque noise std as a fraction of each joint's RMS torque.
    pub torque_rel: f64,
    /// Velocity noise std (rad/s, m/s).
    pub velocity_std: f64,
}

/// Diagonal viscous and Coulomb friction, one entry per actuated joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Friction {
    pub viscous: Vec<f64>,
    pub coulomb: Vec<f64>,
}

impl Friction {
    pub fn zero(n: usize) -> Self {
        Self {
            viscous: vec![0.0; n],
            coulomb: vec![0.0; n],
        }
    }

    pub fn uniform(n: usize, viscous: f64, coulomb: f64) -> Self {
        Self {
            viscous: vec![viscous; n],
            coulomb: vec![coulomb; n],
        }
    }

    /// `B_v v + B_c sign(v)` for joint velocities `v`.
    pub fn torque(&self, v: &[f64], deadband: f64) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter()
                .enumerate()
                .map(|(i, &x)| self.viscous[i] * x + self.coulomb[i] * deadband_sign(x, deadband)),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SynthScenario {
    /// Model whose link parameters are the ground truth.
    pub model: RobotModel,
    pub motion: Motion,
    pub contacts: ContactSet,
    /// Initial joint positions (defaults to the model's home posture).
    pub initial_joints: DVector<f64>,
    pub friction: Friction,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub duration: f64,
    pub rate: f64,
    /// Integration steps per sample interval.
    pub substeps: usize,
    pub kp: f64,
    pub kd: f64,
    /// Baumgarte constant (1/s) of the contact drift correction.
    pub baumgarte: f64,
    /// Motion tag written to the samples; defaults to the family name.
    pub tag: Option<String>,
}

impl SynthScenario {
    /// All contact frames active, no friction or noise, 10 s at 100 Hz.
    pub fn new(model: RobotModel, motion: Motion) -> Self {
        let n = model.n_joints();
        let contacts = ContactSet {
            active: model.contact_frames().iter().map(|c| c.name.clone()).collect(),
        };
        let initial_joints = home_configuration(&model).rows(7, n).into_owned();
        Self {
            model,
            motion,
            contacts,
            initial_joints,
            friction: Friction::zero(n),
            noise: NoiseSpec::default(),
            seed: 0,
            duration: 10.0,
            rate: 100.0,
            substeps: 10,
            kp: 20.0,
            kd: 0.5,
            baumgarte: 20.0,
            tag: None,
        }
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let n = self.model.n_joints();
        if self.initial_joints.len() != n {
            return Err(Error::dim("initial joints", n, self.initial_joints.len()));
        }
        if self.friction.viscous.len() != n || self.friction.coulomb.len() != n {
            return Err(Error::dim("friction coefficients", n, self.friction.viscous.len()));
        }
        if !(self.rate > 0.0 && self.duration > 0.0 && self.substeps > 0) {
            return Err(Error::Validation("rate, duration and substeps must be positive".into()));
        }
        if self.n_samples() == 0 {
            return Err(Error::NoSamples);
        }
        let noise = [self.noise.torque_std, self.noise.torque_rel, self.noise.velocity_std];
        if noise.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Validation("noise levels must be nonnegative".into()));
        }
        match &self.motion {
            Motion::Static { poses, .. } if *poses == 0 => {
                Err(Error::Validation("static family needs at least one pose".into()))
            }
            Motion::Multisine { f_min, f_max, components, .. }
                if *components == 0 || !(*f_min > 0.0 && f_max >= f_min) =>
            {
                Err(Error::Validation("multisine needs 0 < f_min ≤ f_max and components ≥ 1".into()))
            }
            Motion::CrouchExtend { period, .. } if *period <= 0.0 => {
                Err(Error::Validation("crouch-extend period must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Stacked world-frame contact forces of the active frames, per sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactForces {
    pub lambda: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub forces: ContactForces,
    pub truth: Vec<InertialParams>,
    pub friction: Friction,
    /// Torques before noise was added.
    pub clean_torques: Vec<DVector<f64>>,
}

/// Joint reference `r(t)` and its rate.
struct Reference {
    q0: DVector<f64>,
    /// Per joint: (amplitude, angular frequency, phase).
    sines: Vec<Vec<(f64, f64, f64)>>,
    crouch: Option<(f64, f64, DVector<f64>)>,
}

const RAMP: f64 = 1.0;

impl Reference {
    fn new(sc: &SynthScenario, rng: &mut ChaCha8Rng) -> Self {
        let n = sc.model.n_joints();
        let q0 = sc.initial_joints.clone();
        match &sc.motion {
            Motion::Multisine {
                amplitude,
                f_min,
                f_max,
                components,
            } => {
                let sines = (0..n)
                    .map(|_| {
                        (0..*components)
                            .map(|_| {
                                let f = rng.random_range(*f_min..=*f_max);
                                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                                (amplitude / *components as f64, std::f64::consts::TAU * f, phase)
                            })
                            .collect()
                    })
                    .collect();
                Self { q0, sines, crouch: None }
            }
            Motion::CrouchExtend { depth, period } => {
                let dir = q0.map(|x| if x.abs() > 1e-6 { x } else { 1.0 });
                Self {
                    q0,
                    sines: vec![Vec::new(); n],
                    crouch: Some((*depth, *period, dir)),
                }
            }
            Motion::Static { .. } => Self {
                q0,
                sines: vec![Vec::new(); n],
                crouch: None,
            },
        }
    }

    fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.q0.len();
        let mut r = self.q0.clone();
        let mut rd = DVector::zeros(n);
        // smoothstep fade-in so the reference starts at rest
        let (w, wd) = if t >= RAMP {
            (1.0, 0.0)
        } else {
            let s = t / RAMP;
            (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s) / RAMP)
        };
        for (i, comps) in self.sines.iter().enumerate() {
            let (mut s, mut sd) = (0.0, 0.0);
            for &(a, om, ph) in comps {
                s += a * (om * t + ph).sin() - a * ph.sin();
                sd += a * om * (om * t + ph).cos();
            }
            r[i] += w * s;
            rd[i] += wd * s + w * sd;
        }
        if let Some((depth, period, dir)) = &self.crouch {
            let om = std::f64::consts::TAU / period;
            let s = 0.5 * (1.0 - (om * t).cos());
            let sd = 0.5 * om * (om * t).sin();
            r += dir * (depth * s);
            rd += dir * (depth * sd);
        }
        (r, rd)
    }
}

struct Integrator<'a> {
    sc: &'a SynthScenario,
    reference: Reference,
    anchor: DVector<f64>,
}

struct Eval {
    a: DVector<f64>,
    lambda: DVector<f64>,
    tau: DVector<f64>,
}

impl Integrator<'_> {
    fn eval(&self, q: &DVector<f64>, v: &DVector<f64>, t: f64) -> Result<Eval> {
        let model = &self.sc.model;
        let n = model.n_joints();
        let (r, rd) = self.reference.eval(t);
        let qj = q.rows(7, n);
        let vj = v.rows(6, n);
        let tau = (&r - qj) * self.sc.kp + (&rd - vj) * self.sc.kd;
        let fric = self.sc.friction.torque(vj.as_slice(), DEFAULT_SIGN_DEADBAND);
        let mut f = -nonlinear_effects(model, q, v)?;
        for i in 0..n {
            f[6 + i] += tau[i] - fric[i];
        }
        let m = mass_matrix(model, q)?;
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Validation("mass matrix is not positive definite".into()))?;
        let contacts = &self.sc.contacts;
        if contacts.is_empty() {
            return Ok(Eval {
                a: chol.solve(&f),
                lambda: DVector::zeros(0),
                tau,
            });
        }
        let jc = contact_jacobian(model, q, contacts)?;
        let bias = contact_acceleration_bias(model, q, v, contacts)?;
        let drift = contact_positions(model, q, contacts)? - &self.anchor;
        let alpha = self.sc.baumgarte;
        let target = -bias - (&jc * v) * (2.0 * alpha) - drift * (alpha * alpha);
        let minv_jt = chol.solve(&jc.transpose());
        let a_free = chol.solve(&f);
        let op = &jc * &minv_jt;
        let lambda = linalg::svd(&op).solve(&(target - &jc * &a_free), 1e-10);
        let a = a_free + minv_jt * &lambda;
        if !a.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation(format!(
                "simulation diverged at t = {t:.4} s (singular or conflicting contact set?)"
            )));
        }
        Ok(Eval { a, lambda, tau })
    }

    fn step(&self, q: &DVector<f64>, v: &DVector<f64>, t: f64, h: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let model = &self.sc.model;
        let deriv = |q: &DVector<f64>, v: &DVector<f64>, t: f64| -> Result<(DVector<f64>, DVector<f64>)> {
            Ok((configuration_rate(model, q, v), self.eval(q, v, t)?.a))
        };
        let offset = |q: &DVector<f64>, dq: &DVector<f64>, s: f64| {
            let mut out = q + dq * s;
            normalize_configuration(&mut out);
            out
        };
        let (k1q, k1v) = deriv(q, v, t)?;
        let (k2q, k2v) = deriv(&offset(q, &k1q, h / 2.0), &(v + &k1v * (h / 2.0)), t + h / 2.0)?;
        let (k3q, k3v) = deriv(&offset(q, &k2q, h / 2.0), &(v + &k2v * (h / 2.0)), t + h / 2.0)?;
        let (k4q, k4v) = deriv(&offset(q, &k3q, h), &(v + &k3v * h), t + h)?;
        let dq = (k1q + k2q * 2.0 + k3q * 2.0 + k4q) / 6.0;
        let dv = (k1v + k2v * 2.0 + k3v * 2.0 + k4v) / 6.0;
        Ok((offset(q, &dq, h), v + dv * h))
    }
}

struct Clean {
    samples: Vec<TrajectorySample>,
    lambda: Vec<DVector<f64>>,
}

fn initial_configuration(sc: &SynthScenario) -> DVector<f64> {
    let mut q = home_configuration(&sc.model);
    let n = sc.model.n_joints();
    q.rows_mut(7, n).copy_from(&sc.initial_joints);
    q
}

fn simulate_dynamic(sc: &SynthScenario, rng: &mut ChaCha8Rng, tag: &str) -> Result<Clean> {
    let model = &sc.model;
    let mut q = initial_configuration(sc);
    let mut v = DVector::zeros(model.nv());
    let integ = Integrator {
        sc,
        reference: Reference::new(sc, rng),
        anchor: contact_positions(model, &q, &sc.contacts)?,
    };
    let h = 1.0 / (sc.rate * sc.substeps as f64);
    let mut out = Clean {
        samples: Vec::with_capacity(sc.n_samples()),
        lambda: Vec::with_capacity(sc.n_samples()),
    };
    for k in 0..sc.n_samples() {
        let t = k as f64 / sc.rate;
        let e = integ.eval(&q, &v, t)?;
        if !e.a.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation(format!("simulation diverged at t = {t}")));
        }
        out.samples.push(TrajectorySample {
            t,
            q: q.clone(),
            v: v.clone(),
            a: e.a,
            tau: e.tau,
            contacts: sc.contacts.clone(),
            motion: tag.to_string(),
        });
        out.lambda.push(e.lambda);
        for s in 0..sc.substeps {
            let ts = t + s as f64 * h;
            let (qn, vn) = integ.step(&q, &v, ts, h)?;
            if !(qn.iter().all(|x| x.is_finite()) && vn.iter().all(|x| x.is_finite())) {
                return Err(Error::Validation(format!("simulation diverged at t = {ts}")));
            }
            q = qn;
            v = vn;
        }
    }
    Ok(out)
}

/// Solves `Sᵀτ + J_cᵀλ = g(q)` for the minimum-norm `(τ, λ)`.
pub fn static_equilibrium(model: &RobotModel, q: &DVector<f64>, contacts: &ContactSet) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = model.n_joints();
    let nv = model.nv();
    let g = nonlinear_effects(model, q, &DVector::zeros(nv))?;
    let jc = contact_jacobian(model, q, contacts)?;
    let m = jc.nrows();
    let mut a = DMatrix::zeros(nv, n + m);
    for i in 0..n {
        a[(6 + i, i)] = 1.0;
    }
    a.view_mut((0, n), (nv, m)).copy_from(&jc.transpose());
    let x = linalg::svd(&a).solve(&g, 1e-12);
    let resid = (&a * &x - &g).amax();
    if resid > 1e-9 * g.amax().max(1.0) {
        return Err(Error::InfeasibleContact(format!(
            "contacts {:?} cannot hold the posture statically (residual {resid:.3e})",
            contacts.active
        )));
    }
    Ok((x.rows(0, n).into_owned(), x.rows(n, m).into_owned()))
}

fn simulate_static(sc: &SynthScenario, rng: &mut ChaCha8Rng, tag: &str, poses: usize, spread: f64) -> Result<Clean> {
    let model = &sc.model;
    let n = model.n_joints();
    let total = sc.n_samples();
    let mut postures = Vec::with_capacity(poses);
    for p in 0..poses {
        let mut q = initial_configuration(sc);
        if p > 0 {
            for i in 0..n {
                q[7 + i] += rng.random_range(-spread..=spread);
            }
        }
        let (tau, lambda) = static_equilibrium(model, &q, &sc.contacts)?;
        postures.push((q, tau, lambda));
    }
    let mut out = Clean {
        samples: Vec::with_capacity(total),
        lambda: Vec::with_capacity(total),
    };
    for k in 0..total {
        let (q, tau, lambda) = &postures[(k * poses) / total];
        out.samples.push(TrajectorySample {
            t: k as f64 / sc.rate,
            q: q.clone(),
            v: DVector::zeros(model.nv()),
            a: DVector::zeros(model.nv()),
            tau: tau.clone(),
            contacts: sc.contacts.clone(),
            motion: tag.to_string(),
        });
        out.lambda.push(lambda.clone());
    }
    Ok(out)
}

/// Adds Gaussian torque and velocity noise. Relative torque noise is scaled
/// by each joint's RMS torque over `samples`.
pub fn add_noise(samples: &mut [TrajectorySample], noise: &NoiseSpec, seed: u64) {
    if samples.is_empty() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let n = samples[0].tau.len();
    let nv = samples[0].v.len();
    let rms: Vec<f64> = (0..n)
        .map(|j| (samples.iter().map(|s| s.tau[j].powi(2)).sum::<f64>() / samples.len() as f64).sqrt())
        .collect();
    let std: Vec<f64> = rms.iter().map(|r| noise.torque_std + noise.torque_rel * r).collect();
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    for s in samples.iter_mut() {
        for j in 0..n {
            if std[j] > 0.0 {
                s.tau[j] += std[j] * unit.sample(&mut rng);
            }
        }
        if noise.velocity_std > 0.0 {
            for j in 0..nv {
                s.v[j] += noise.velocity_std * unit.sample(&mut rng);
            }
        }
    }
}

/// Runs the scenario; deterministic for a fixed seed.
pub fn generate(sc: &SynthScenario) -> Result<SynthOutput> {
    sc.validate()?;
    if !sc.contacts.is_empty() {
        // resolves the names
        contact_jacobian(&sc.model, &initial_configuration(sc), &sc.contacts)?;
    }
    let tag = sc.tag.clone().unwrap_or_else(|| sc.motion.tag().to_string());
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let clean = match &sc.motion {
        Motion::Static { poses, spread } => simulate_static(sc, &mut rng, &tag, *poses, *spread)?,
        _ => simulate_dynamic(sc, &mut rng, &tag)?,
    };
    let clean_torques = clean.samples.iter().map(|s| s.tau.clone()).collect();
    let mut samples = clean.samples;
    add_noise(&mut samples, &sc.noise, sc.seed);
    Ok(SynthOutput {
        dataset: Dataset {
            samples,
            meta: DatasetMeta {
                sources: vec![format!("synthetic:{tag}:seed={}", sc.seed)],
                conditioning: None,
                model_hash: sc.model.hash(),
                rate_hz: sc.rate,
            },
        },
        forces: ContactForces { lambda: clean.lambda },
        truth: sc.model.priors(),
        friction: sc.friction.clone(),
        clean_torques,
    })
}

/// Ground truth written next to a synthetic log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub model_hash: String,
    pub motion: String,
    pub seed: u64,
    pub phi: Vec<f64>,
    pub viscous: Vec<f64>,
    pub coulomb: Vec<f64>,
    pub contacts: Vec<String>,
    pub lambda: Vec<Vec<f64>>,
}

impl TruthRecord {
    pub fn from_output(sc: &SynthScenario, out: &SynthOutput) -> Self {
        Self {
            model_hash: sc.model.hash(),
            motion: sc.tag.clone().unwrap_or_else(|| sc.motion.tag().to_string()),
            seed: sc.seed,
            phi: stack(&out.truth).as_slice().to_vec(),
            viscous: out.friction.viscous.clone(),
            coulomb: out.friction.coulomb.clone(),
            contacts: sc.contacts.active.clone(),
            lambda: out.forces.lambda.iter().map(|l| l.as_slice().to_vec()).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::spatialdyn::{inverse_dynamics, State};

    fn residual(model: &RobotModel, s: &TrajectorySample, lambda: &DVector<f64>, fr: &Friction) -> f64 {
        let n = model.n_joints();
        let id = inverse_dynamics(model, &State::new(s.q.clone(), s.v.clone(), s.a.clone())).unwrap();
        let jc = contact_jacobian(model, &s.q, &s.contacts).unwrap();
        let f = fr.torque(s.v.rows(6, n).as_slice(), DEFAULT_SIGN_DEADBAND);
        let mut r = id - jc.transpose() * lambda;
        for i in 0..n {
            r[6 + i] -= s.tau[i] - f[i];
        }
        r.amax()
    }

    #[test]
    fn static_stance_is_consistent() {
        let model = fixtures::quadruped();
        let mut sc = SynthScenario::new(model.clone(), Motion::Static { poses: 3, spread: 0.2 });
        sc.duration = 0.3;
        let out = generate(&sc).unwrap();
        assert_eq!(out.dataset.len(), 30);
        for (s, l) in out.dataset.samples.iter().zip(&out.forces.lambda) {
            assert_eq!(s.contacts.n_e(), 4);
            assert!(residual(&model, s, l, &out.friction) < 1e-9);
        }
    }

    #[test]
    fn hanging_pendulum_cannot_stand_still() {
        let sc = SynthScenario::new(fixtures::three_link(), Motion::Static { poses: 1, spread: 0.0 });
        let mut sc = sc;
        sc.contacts = ContactSet::new(["pivot_left", "pivot_right"]).unwrap();
        sc.initial_joints = DVector::from_vec(vec![0.4, 0.0]);
        assert!(matches!(generate(&sc), Err(Error::InfeasibleContact(_))));
    }

    #[test]
    fn multisine_keeps_contacts_fixed() {
        let model = fixtures::three_link();
        let mut sc = SynthScenario::new(model.clone(), Motion::multisine());
        sc.contacts = ContactSet::new(["pivot_left", "pivot_right"]).unwrap();
        sc.friction = Friction::uniform(2, 0.01, 0.02);
        sc.duration = 2.0;
        let out = generate(&sc).unwrap();
        let x0 = contact_positions(&model, &out.dataset.samples[0].q, &sc.contacts).unwrap();
        for (s, l) in out.dataset.samples.iter().zip(&out.forces.lambda) {
            let jc = contact_jacobian(&model, &s.q, &s.contacts).unwrap();
            assert!((jc * &s.v).amax() < 1e-6);
            let x = contact_positions(&model, &s.q, &s.contacts).unwrap();
            assert!((x - &x0).amax() < 1e-6);
            assert!(residual(&model, s, l, &out.friction) < 1e-8);
        }
        let again = generate(&sc).unwrap();
        assert_eq!(again.dataset, out.dataset);
    }
}
