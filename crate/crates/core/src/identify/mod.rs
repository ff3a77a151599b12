//! The identification problem
//!
//! ```text
//! min  1/n_s Σ_k ‖P_k Y_k φ − P_k Sᵀ(τ_k − B_v v_k − B_c sign(v_k))‖² + γ ‖φ − φ̂‖²_G
//! s.t. J(φ_j) ⪰ ε·1,  C(φ_j) ⪰ 0,  tr(J(φ_j) Q_j) ≥ 0,  B_v, B_c ≥ 0 (diagonal)
//! ```
//!
//! and its unconstrained least-squares baseline.

mod lmi;
pub mod report;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use self::lmi::solve_lmi;
use crate::consistency::{check_consistency, stack, unstack, ConsistencyReport, InertialParams, DEFAULT_EPSILON, DEFAULT_FEAS_TOL};
use crate::contact::{project_sample, projector, ProjectedSample, DEFAULT_SIGN_DEADBAND, DEFAULT_SVD_CUTOFF};
use crate::dataio::{Dataset, TrajectorySample};
use crate::linalg;
use crate::model::RobotModel;
use crate::regularization::{euclidean_metric, geodesic_metric_for_model, MetricKind, ParamMetric};
use crate::spatialdyn::{contact_jacobian, regressor, State};
use crate::synth::Friction;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyConfig {
    /// Weight of the prior-deviation penalty.
    pub gamma: f64,
    pub metric: MetricKind,
    /// Margin in `J(φ) ⪰ ε·1`.
    pub epsilon: f64,
    /// Identify diagonal viscous and Coulomb friction.
    pub friction: bool,
    /// Relative duality-gap target of the interior-point solver.
    pub tol_gap: f64,
    /// Absolute floor of the gap target (objective units).
    pub tol_gap_abs: f64,
    pub max_iterations: usize,
    /// Scale the stacked regressor columns to unit RMS before solving.
    pub column_scaling: bool,
    /// Relative singular-value cutoff of the contact projector.
    pub projector_cutoff: f64,
    /// Relative singular-value cutoff of the SVD baseline and rank reports.
    pub rank_cutoff: f64,
    pub sign_deadband: f64,
    /// Slack accepted on the non-strict constraints when certifying.
    pub feas_tol: f64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-2,
            metric: MetricKind::GeodesicApprox,
            epsilon: DEFAULT_EPSILON,
            friction: true,
            tol_gap: 1e-9,
            tol_gap_abs: 1e-14,
            max_iterations: 500,
            column_scaling: true,
            projector_cutoff: DEFAULT_SVD_CUTOFF,
            rank_cutoff: 1e-10,
            sign_deadband: DEFAULT_SIGN_DEADBAND,
            feas_tol: DEFAULT_FEAS_TOL,
        }
    }
}

impl IdentifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Validation(format!("gamma must be finite and nonnegative (got {})", self.gamma)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Validation(format!("epsilon must be nonnegative (got {})", self.epsilon)));
        }
        if !(self.tol_gap > 0.0 && self.tol_gap_abs >= 0.0) {
            return Err(Error::Validation("solver tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The metric `G` selected by [`IdentifyConfig::metric`], evaluated at the
    /// model priors.
    pub fn metric_for(&self, model: &RobotModel) -> Result<ParamMetric> {
        match self.metric {
            MetricKind::GeodesicApprox => geodesic_metric_for_model(model),
            MetricKind::Euclidean => Ok(euclidean_metric(model.n_links(), None)),
            MetricKind::ScaledEuclidean => {
                let m = model.total_mass().max(1e-12);
                Ok(euclidean_metric(model.n_links(), Some([1.0 / m, 1.0, 1.0])))
            }
        }
    }
}

/// Projected blocks of every sample, with the `1/n_s` factor folded in.
#[derive(Debug, Clone)]
pub struct ProjectedSystem {
    /// Per sample `[P·Y | friction basis]`, scaled by `1/√n_s`.
    pub blocks: Vec<DMatrix<f64>>,
    /// Per sample `P·Sᵀ·τ`, scaled by `1/√n_s`.
    pub rhs: Vec<DVector<f64>>,
    pub n_samples: usize,
    pub n_phi: usize,
    pub n_friction: usize,
}

/// Triangular reduction `‖A x − b‖² = ‖R x − z‖² + rss` of a stacked
/// projected system.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub r: DMatrix<f64>,
    pub z: DVector<f64>,
    pub rss: f64,
    pub n_samples: usize,
    pub n_rows: usize,
    pub n_phi: usize,
    pub n_friction: usize,
    /// Unit-RMS column scaling `D` (ones when scaling is disabled).
    pub scaling: DVector<f64>,
}

impl ReducedSystem {
    pub fn n_vars(&self) -> usize {
        self.n_phi + self.n_friction
    }

    /// `1/n_s Σ‖residual‖²` at `x`.
    pub fn data_term(&self, x: &DVector<f64>) -> f64 {
        (&self.r * x - &self.z).norm_squared() + self.rss
    }

    /// Rows per sample in the stacked system.
    pub fn rows_per_sample(&self) -> usize {
        self.n_rows / self.n_samples.max(1)
    }
}

/// Incremental Householder reduction of row blocks.
struct Tsqr {
    p: usize,
    r: DMatrix<f64>,
    pending: Vec<(DMatrix<f64>, DVector<f64>)>,
    pending_rows: usize,
    batch_rows: usize,
    rows: usize,
}

impl Tsqr {
    fn new(p: usize) -> Self {
        Self {
            p,
            r: DMatrix::zeros(0, p + 1),
            pending: Vec::new(),
            pending_rows: 0,
            batch_rows: (4 * (p + 1)).max(64),
            rows: 0,
        }
    }

    fn push(&mut self, a: DMatrix<f64>, b: DVector<f64>) {
        self.pending_rows += a.nrows();
        self.rows += a.nrows();
        self.pending.push((a, b));
        if self.pending_rows >= self.batch_rows {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let m = self.r.nrows() + self.pending_rows;
        let mut s = DMatrix::zeros(m, self.p + 1);
        s.view_mut((0, 0), (self.r.nrows(), self.p + 1)).copy_from(&self.r);
        let mut row = self.r.nrows();
        for (a, b) in self.pending.drain(..) {
            let k = a.nrows();
            s.view_mut((row, 0), (k, self.p)).copy_from(&a);
            s.view_mut((row, self.p), (k, 1)).copy_from(&b);
            row += k;
        }
        self.pending_rows = 0;
        let r = s.qr().r();
        self.r = r.rows(0, r.nrows().min(self.p + 1)).into_owned();
    }

    /// `(R, z, rss)` with `R` square `p × p`.
    fn finish(mut self) -> (DMatrix<f64>, DVector<f64>, f64, usize) {
        self.flush();
        let p = self.p;
        let mut full = DMatrix::zeros(p + 1, p + 1);
        let k = self.r.nrows();
        full.view_mut((0, 0), (k, p + 1)).copy_from(&self.r);
        let r = full.view((0, 0), (p, p)).into_owned();
        let z = full.view((0, p), (p, 1)).column(0).into_owned();
        let rss = full[(p, p)].powi(2);
        (r, z, rss, self.rows)
    }
}

/// Rebuilds the projected block of one sample.
pub fn project_one(model: &RobotModel, s: &TrajectorySample, config: &IdentifyConfig) -> Result<ProjectedSample> {
    let state = State::new(s.q.clone(), s.v.clone(), s.a.clone());
    let y = regressor(model, &state)?;
    let jc = contact_jacobian(model, &s.q, &s.contacts)?;
    let proj = projector(&jc, config.projector_cutoff);
    project_sample(&y, &s.tau, &s.joint_velocities(model.n_joints()), &proj, config.sign_deadband)
}

fn check_dims(model: &RobotModel, s: &TrajectorySample, k: usize) -> Result<()> {
    let dims = [
        ("q", model.nq(), s.q.len()),
        ("v", model.nv(), s.v.len()),
        ("a", model.nv(), s.a.len()),
        ("tau", model.n_joints(), s.tau.len()),
    ];
    for (what, expected, got) in dims {
        if expected != got {
            return Err(Error::Dimension {
                what: format!("sample {k}: {what}"),
                expected,
                got,
            });
        }
    }
    Ok(())
}

fn sample_block(ps: &ProjectedSample, friction: bool, w: f64) -> (DMatrix<f64>, DVector<f64>) {
    let np = ps.a.ncols();
    let n = ps.viscous.ncols();
    let nf = if friction { 2 * n } else { 0 };
    let mut a = DMatrix::zeros(ps.a.nrows(), np + nf);
    a.view_mut((0, 0), ps.a.shape()).copy_from(&(&ps.a * w));
    if friction {
        a.view_mut((0, np), ps.viscous.shape()).copy_from(&(&ps.viscous * w));
        a.view_mut((0, np + n), ps.coulomb.shape()).copy_from(&(&ps.coulomb * w));
    }
    (a, &ps.torque * w)
}

/// Per-sample projected blocks. Keeps every block in memory; use
/// [`assemble_reduced`] for large datasets.
pub fn assemble(ds: &Dataset, model: &RobotModel, config: &IdentifyConfig) -> Result<ProjectedSystem> {
    if ds.is_empty() {
        return Err(Error::NoSamples);
    }
    let w = 1.0 / (ds.len() as f64).sqrt();
    let mut blocks = Vec::with_capacity(ds.len());
    let mut rhs = Vec::with_capacity(ds.len());
    for (k, s) in ds.samples.iter().enumerate() {
        check_dims(model, s, k)?;
        let ps = project_one(model, s, config)?;
        let (a, b) = sample_block(&ps, config.friction, w);
        blocks.push(a);
        rhs.push(b);
    }
    Ok(ProjectedSystem {
        blocks,
        rhs,
        n_samples: ds.len(),
        n_phi: model.n_params(),
        n_friction: if config.friction { 2 * model.n_joints() } else { 0 },
    })
}

/// `D_j = 1 / RMS_j` of the unweighted stacked column `j`.
fn scaling_of(r: &DMatrix<f64>, n_samples: usize, rows: usize, enabled: bool) -> DVector<f64> {
    let w = (n_samples as f64 / rows.max(1) as f64).sqrt();
    DVector::from_iterator(
        r.ncols(),
        (0..r.ncols()).map(|j| {
            // column norms of R equal those of the stacked system
            let rms = r.column(j).norm() * w;
            if enabled && rms > 0.0 {
                1.0 / rms
            } else {
                1.0
            }
        }),
    )
}

impl ProjectedSystem {
    pub fn n_vars(&self) -> usize {
        self.n_phi + self.n_friction
    }

    pub fn reduce(&self, column_scaling: bool) -> ReducedSystem {
        let mut ts = Tsqr::new(self.n_vars());
        for (a, b) in self.blocks.iter().zip(&self.rhs) {
            ts.push(a.clone(), b.clone());
        }
        let (r, z, rss, rows) = ts.finish();
        ReducedSystem {
            scaling: scaling_of(&r, self.n_samples, rows, column_scaling),
            r,
            z,
            rss,
            n_samples: self.n_samples,
            n_rows: rows,
            n_phi: self.n_phi,
            n_friction: self.n_friction,
        }
    }

    /// Stacked `(A, b)`.
    pub fn stacked(&self) -> (DMatrix<f64>, DVector<f64>) {
        let rows: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut a = DMatrix::zeros(rows, self.n_vars());
        let mut b = DVector::zeros(rows);
        let mut at = 0;
        for (blk, r) in self.blocks.iter().zip(&self.rhs) {
            a.view_mut((at, 0), blk.shape()).copy_from(blk);
            b.rows_mut(at, r.len()).copy_from(r);
            at += blk.nrows();
        }
        (a, b)
    }
}

/// Streams the samples straight into the triangular reduction.
pub fn assemble_reduced(ds: &Dataset, model: &RobotModel, config: &IdentifyConfig) -> Result<ReducedSystem> {
    if ds.is_empty() {
        return Err(Error::NoSamples);
    }
    let w = 1.0 / (ds.len() as f64).sqrt();
    let n_friction = if config.friction { 2 * model.n_joints() } else { 0 };
    let mut ts = Tsqr::new(model.n_params() + n_friction);
    for (k, s) in ds.samples.iter().enumerate() {
        check_dims(model, s, k)?;
        let ps = project_one(model, s, config)?;
        let (a, b) = sample_block(&ps, config.friction, w);
        ts.push(a, b);
    }
    let (r, z, rss, rows) = ts.finish();
    Ok(ReducedSystem {
        scaling: scaling_of(&r, ds.len(), rows, config.column_scaling),
        r,
        z,
        rss,
        n_samples: ds.len(),
        n_rows: rows,
        n_phi: model.n_params(),
        n_friction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lmi,
    Svd,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lmi => "LMI",
            Method::Svd => "SVD",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    /// Duality-gap target met.
    Optimal,
    /// Progress stopped before the target; the iterate is still feasible.
    Stalled,
    MaxIterations,
    /// Unconstrained least squares (no certificate).
    LeastSquares,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Stalled => "stalled",
            SolverStatus::MaxIterations => "max-iterations",
            SolverStatus::LeastSquares => "least-squares",
        })
    }
}

#[derive(Debug, Clone)]
pub struct IdentificationSolution {
    pub method: Method,
    pub params: Vec<InertialParams>,
    /// `None` when friction was not identified.
    pub friction: Option<Friction>,
    /// Data term plus `γ‖φ − φ̂‖²_G` (data term only for the baseline).
    pub objective: f64,
    pub data_term: f64,
    pub regularizer: f64,
    pub consistency: Vec<ConsistencyReport>,
    pub status: SolverStatus,
    /// Remaining duality-gap bound (zero for the baseline).
    pub gap: f64,
    pub iterations: usize,
    /// RMS of the projected training residual.
    pub train_rmse: f64,
    pub diagnostics: String,
}

impl IdentificationSolution {
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.params)
    }

    pub fn all_consistent(&self) -> bool {
        self.consistency.iter().all(ConsistencyReport::is_consistent)
    }

    /// Friction coefficients, zero when not identified.
    pub fn friction_or_zero(&self, n: usize) -> Friction {
        self.friction.clone().unwrap_or_else(|| Friction::zero(n))
    }
}

pub(crate) fn split_solution(x: &DVector<f64>, sys: &ReducedSystem) -> (Vec<InertialParams>, Option<Friction>) {
    let params = unstack(&x.as_slice()[..sys.n_phi]);
    let friction = (sys.n_friction > 0).then(|| {
        let n = sys.n_friction / 2;
        Friction {
            viscous: x.as_slice()[sys.n_phi..sys.n_phi + n].to_vec(),
            coulomb: x.as_slice()[sys.n_phi + n..].to_vec(),
        }
    });
    (params, friction)
}

pub(crate) fn certify(model: &RobotModel, params: &[InertialParams], config: &IdentifyConfig) -> Vec<ConsistencyReport> {
    params
        .iter()
        .zip(model.links())
        .map(|(p, l)| check_consistency(p, &l.ellipsoid, config.epsilon, config.feas_tol))
        .collect()
}

/// Minimum-norm unconstrained least squares through the SVD of `R`.
pub fn solve_svd(sys: &ReducedSystem, model: &RobotModel, config: &IdentifyConfig) -> Result<IdentificationSolution> {
    if sys.n_samples == 0 {
        return Err(Error::NoSamples);
    }
    let d = linalg::svd(&sys.r);
    let x = d.solve(&sys.z, config.rank_cutoff);
    let data = sys.data_term(&x);
    let (params, friction) = split_solution(&x, sys);
    let rank = d.rank(config.rank_cutoff);
    Ok(IdentificationSolution {
        method: Method::Svd,
        consistency: certify(model, &params, config),
        params,
        friction,
        objective: data,
        data_term: data,
        regularizer: 0.0,
        status: SolverStatus::LeastSquares,
        gap: 0.0,
        iterations: 0,
        train_rmse: (data / sys.rows_per_sample().max(1) as f64).max(0.0).sqrt(),
        diagnostics: format!("numerical rank {rank} of {}", sys.n_vars()),
    })
}

/// Projected torque predictions on a dataset.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub times: Vec<f64>,
    /// `P_k Y_k φ` per sample.
    pub predicted: Vec<DVector<f64>>,
    /// `P_k Sᵀ(τ_k − B_v v_k − B_c sign(v_k))` per sample.
    pub measured: Vec<DVector<f64>>,
    /// RMSE of each of the `n + 6` projected rows.
    pub rmse_rows: Vec<f64>,
}

impl Prediction {
    /// Per actuated joint RMSE (rows 6..).
    pub fn rmse_joints(&self) -> &[f64] {
        &self.rmse_rows[6.min(self.rmse_rows.len())..]
    }

    /// `sqrt(Σ_j RMSE_j²)` over the actuated joints.
    pub fn overall(&self) -> f64 {
        self.rmse_joints().iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    /// RMS over every projected row and sample.
    pub fn rmse_all(&self) -> f64 {
        let m = self.rmse_rows.len().max(1) as f64;
        (self.rmse_rows.iter().map(|r| r * r).sum::<f64>() / m).sqrt()
    }
}

pub fn predict_torques(
    model: &RobotModel,
    params: &[InertialParams],
    friction: &Friction,
    ds: &Dataset,
    config: &IdentifyConfig,
) -> Result<Prediction> {
    if params.len() != model.n_links() {
        return Err(Error::dim("parameter blocks", model.n_links(), params.len()));
    }
    let n = model.n_joints();
    if friction.viscous.len() != n || friction.coulomb.len() != n {
        return Err(Error::dim("friction coefficients", n, friction.viscous.len()));
    }
    if ds.is_empty() {
        return Err(Error::NoSamples);
    }
    let phi = stack(params);
    let nv = model.nv();
    let mut out = Prediction {
        times: Vec::with_capacity(ds.len()),
        predicted: Vec::with_capacity(ds.len()),
        measured: Vec::with_capacity(ds.len()),
        rmse_rows: vec![0.0; nv],
    };
    for (k, s) in ds.samples.iter().enumerate() {
        check_dims(model, s, k)?;
        let ps = project_one(model, s, config)?;
        let pred = &ps.a * &phi;
        let meas = ps.measured(&friction.viscous, &friction.coulomb);
        for i in 0..nv {
            out.rmse_rows[i] += (pred[i] - meas[i]).powi(2);
        }
        out.times.push(s.t);
        out.predicted.push(pred);
        out.measured.push(meas);
    }
    for r in out.rmse_rows.iter_mut() {
        *r = (*r / ds.len() as f64).sqrt();
    }
    Ok(out)
}

/// Observability of the stacked projected regressor.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// Singular values of the column-equilibrated system, descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub nullspace_dim: usize,
    /// Column norms of the (unscaled, `1/√n_s`-weighted) stacked system.
    pub sensitivity: Vec<f64>,
    pub names: Vec<String>,
    /// Orthonormal basis of the numerical null space (in scaled coordinates).
    pub nullspace: DMatrix<f64>,
    pub cutoff: f64,
}

impl Diagnostics {
    pub fn condition_number(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.get(self.rank.saturating_sub(1))) {
            (Some(a), Some(b)) if *b > 0.0 => a / b,
            _ => f64::INFINITY,
        }
    }
}

/// Parameter names `link.m`, `link.hx`, …, then friction entries.
pub fn parameter_names(model: &RobotModel, friction: bool) -> Vec<String> {
    const P: [&str; 10] = ["m", "hx", "hy", "hz", "Ixx", "Ixy", "Ixz", "Iyy", "Iyz", "Izz"];
    let mut names: Vec<String> = model
        .links()
        .iter()
        .flat_map(|l| P.iter().map(move |p| format!("{}.{p}", l.name)))
        .collect();
    if friction {
        let joints = model.joint_names();
        names.extend(joints.iter().map(|j| format!("{j}.Bv")));
        names.extend(joints.iter().map(|j| format!("{j}.Bc")));
    }
    names
}

pub fn diagnose(sys: &ReducedSystem, model: &RobotModel, cutoff: f64) -> Diagnostics {
    let p = sys.n_vars();
    let scaled = &sys.r * DMatrix::from_diagonal(&sys.scaling);
    let d = linalg::svd(&scaled);
    let rank = d.rank(cutoff);
    Diagnostics {
        singular_values: d.s.iter().copied().collect(),
        rank,
        nullspace_dim: p - rank,
        sensitivity: (0..p).map(|j| sys.r.column(j).norm()).collect(),
        names: parameter_names(model, sys.n_friction > 0),
        nullspace: d.v.columns(rank, p - rank).into_owned(),
        cutoff,
    }
}

/// Metric, priors, reduction and LMI solve in one call.
pub fn identify(ds: &Dataset, model: &RobotModel, config: &IdentifyConfig) -> Result<(ReducedSystem, IdentificationSolution)> {
    config.validate()?;
    let metric = config.metric_for(model)?;
    let sys = assemble_reduced(ds, model, config)?;
    let sol = solve_lmi(&sys, model, &model.priors(), &metric, config)?;
    Ok((sys, sol))
}
