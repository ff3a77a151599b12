//! Python bindings: models, datasets, dynamics, consistency checks,
//! filtering, simulation and identification.
//!
//! Vectors and matrices cross the boundary as plain lists (row-major for
//! matrices) so the module has no numpy dependency.

use inertia::consistency::{check_consistency, InertialParams, DEFAULT_EPSILON, DEFAULT_FEAS_TOL};
use inertia::contact::ContactSet;
use inertia::dataio::{load_log, save_log, Conditioning, LogMeta};
use inertia::identify::{
    assemble_reduced, predict_torques, solve_lmi, solve_svd, IdentificationSolution, IdentifyConfig, SolverStatus,
};
use inertia::model::{load_model, parse_model, EllipsoidBound, RobotModel};
use inertia::regularization::MetricKind;
use inertia::signal::{Butterworth, FilterSpec};
use inertia::spatialdyn::{self, State};
use inertia::synth::{generate, Friction, Motion, NoiseSpec, SynthScenario};
use inertia::{fixtures, Error};
use nalgebra::{DMatrix, DVector, Vector3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Solver(msg) => PyRuntimeError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

fn params_from(blocks: &[Vec<f64>], model: &RobotModel) -> PyResult<Vec<InertialParams>> {
    if blocks.len() != model.n_links() {
        return Err(PyValueError::new_err(format!(
            "expected {} parameter blocks, got {}",
            model.n_links(),
            blocks.len()
        )));
    }
    blocks
        .iter()
        .map(|b| {
            if b.len() == 10 {
                Ok(InertialParams::from_slice(b))
            } else {
                Err(PyValueError::new_err("each parameter block has 10 entries"))
            }
        })
        .collect()
}

fn contact_set(model: &RobotModel, names: Option<Vec<String>>) -> PyResult<ContactSet> {
    let names = names.unwrap_or_else(|| model.contact_frames().iter().map(|c| c.name.clone()).collect());
    ContactSet::new(names).map_err(py_err)
}

/// A robot description with prior inertial parameters.
#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: RobotModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_model(path).map_err(py_err)?,
        })
    }

    /// One of `quadruped`, `three_link`, `single_link`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        fixtures::by_name(name)
            .map(|inner| Self { inner })
            .ok_or_else(|| PyValueError::new_err(format!("unknown built-in model '{name}'")))
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_model(text, "<string>").map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn n_joints(&self) -> usize {
        self.inner.n_joints()
    }

    #[getter]
    fn n_links(&self) -> usize {
        self.inner.n_links()
    }

    #[getter]
    fn nq(&self) -> usize {
        self.inner.nq()
    }

    #[getter]
    fn nv(&self) -> usize {
        self.inner.nv()
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    #[getter]
    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn joint_names(&self) -> Vec<String> {
        self.inner.joint_names()
    }

    #[getter]
    fn link_names(&self) -> Vec<String> {
        self.inner.links().iter().map(|l| l.name.clone()).collect()
    }

    #[getter]
    fn contact_names(&self) -> Vec<String> {
        self.inner.contact_frames().iter().map(|c| c.name.clone()).collect()
    }

    /// Prior parameters, one list of 10 per link.
    fn priors(&self) -> Vec<Vec<f64>> {
        self.inner.priors().iter().map(|p| p.as_slice().to_vec()).collect()
    }

    /// Same model with new link parameters; fails if any link is
    /// physically inconsistent.
    fn with_params(&self, params: Vec<Vec<f64>>) -> PyResult<Self> {
        let p = params_from(&params, &self.inner)?;
        Ok(Self {
            inner: self.inner.with_params(&p).map_err(py_err)?,
        })
    }

    fn home_configuration(&self) -> Vec<f64> {
        spatialdyn::home_configuration(&self.inner).as_slice().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(links={}, joints={}, mass={:.4} kg)",
            self.inner.n_links(),
            self.inner.n_joints(),
            self.inner.total_mass()
        )
    }
}

/// Recorded or simulated trajectory samples.
#[pyclass(name = "Dataset", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: inertia::dataio::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Loads a log against `model`, optionally low-passing velocity and
    /// torque and re-deriving acceleration.
    #[staticmethod]
    #[pyo3(signature = (path, model, filter = false))]
    fn load(path: &str, model: &PyModel, filter: bool) -> PyResult<Self> {
        let cond = filter.then(Conditioning::default);
        Ok(Self {
            inner: load_log(path, &model.inner, cond.as_ref()).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str, model: &PyModel) -> PyResult<()> {
        let meta = LogMeta {
            model_hash: model.inner.hash(),
            rate_hz: if self.inner.meta.rate_hz > 0.0 { self.inner.meta.rate_hz } else { 100.0 },
            motion: self.inner.motions().join("+"),
        };
        save_log(path, &model.inner, &self.inner.samples, &meta).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.t).collect()
    }

    /// Joint torques per sample.
    #[getter]
    fn torques(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.tau.as_slice().to_vec()).collect()
    }

    #[getter]
    fn motions(&self) -> Vec<String> {
        self.inner.motions()
    }
}

/// Result of an identification run.
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: IdentificationSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn method(&self) -> String {
        self.inner.method.to_string()
    }

    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.inner.status)
    }

    #[getter]
    fn optimal(&self) -> bool {
        self.inner.status == SolverStatus::Optimal
    }

    #[getter]
    fn params(&self) -> Vec<Vec<f64>> {
        self.inner.params.iter().map(|p| p.as_slice().to_vec()).collect()
    }

    /// `(viscous, coulomb)` or `None` when friction was not identified.
    #[getter]
    fn friction(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.inner.friction.as_ref().map(|f| (f.viscous.clone(), f.coulomb.clone()))
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    #[getter]
    fn train_rmse(&self) -> f64 {
        self.inner.train_rmse
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn all_consistent(&self) -> bool {
        self.inner.all_consistent()
    }

    /// Projected-torque errors of this solution on `data`.
    fn predict<'py>(&self, py: Python<'py>, model: &PyModel, data: &PyDataset) -> PyResult<Bound<'py, PyDict>> {
        let fr = self.inner.friction_or_zero(model.inner.n_joints());
        let p = predict_torques(&model.inner, &self.inner.params, &fr, &data.inner, &IdentifyConfig::default())
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("rmse_joints", p.rmse_joints().to_vec())?;
        d.set_item("overall", p.overall())?;
        d.set_item("rmse_all", p.rmse_all())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(method={}, status={:?}, objective={:.6e})",
            self.inner.method, self.inner.status, self.inner.objective
        )
    }
}

/// Consistency margins of one link's parameters against an axis-aligned
/// bounding ellipsoid.
#[pyfunction]
#[pyo3(signature = (params, center, semi_axes, epsilon = DEFAULT_EPSILON))]
fn consistency<'py>(
    py: Python<'py>,
    params: Vec<f64>,
    center: [f64; 3],
    semi_axes: [f64; 3],
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    if params.len() != 10 {
        return Err(PyValueError::new_err("params has 10 entries"));
    }
    let bound = EllipsoidBound::new(Vector3::from(center), Vector3::from(semi_axes));
    let r = check_consistency(&InertialParams::from_slice(&params), &bound, epsilon, DEFAULT_FEAS_TOL);
    let d = PyDict::new(py);
    d.set_item("consistent", r.is_consistent())?;
    d.set_item("min_eig_pseudo_inertia", r.min_eig_pseudo_inertia)?;
    d.set_item("min_eig_com", r.min_eig_com)?;
    d.set_item("density_trace", r.density_trace)?;
    d.set_item("violations", r.violations())?;
    Ok(d)
}

/// Inverse-dynamics regressor `Y(q, v, a)`, `nv × 10·n_links`.
#[pyfunction]
fn regressor(model: &PyModel, q: Vec<f64>, v: Vec<f64>, a: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let state = State::new(DVector::from_vec(q), DVector::from_vec(v), DVector::from_vec(a));
    Ok(rows(&spatialdyn::regressor(&model.inner, &state).map_err(py_err)?.y))
}

#[pyfunction]
fn inverse_dynamics(model: &PyModel, q: Vec<f64>, v: Vec<f64>, a: Vec<f64>) -> PyResult<Vec<f64>> {
    let state = State::new(DVector::from_vec(q), DVector::from_vec(v), DVector::from_vec(a));
    Ok(spatialdyn::inverse_dynamics(&model.inner, &state).map_err(py_err)?.as_slice().to_vec())
}

/// World-aligned stacked contact Jacobian; all contacts when `contacts` is
/// omitted.
#[pyfunction]
#[pyo3(signature = (model, q, contacts = None))]
fn contact_jacobian(model: &PyModel, q: Vec<f64>, contacts: Option<Vec<String>>) -> PyResult<Vec<Vec<f64>>> {
    let set = contact_set(&model.inner, contacts)?;
    Ok(rows(&spatialdyn::contact_jacobian(&model.inner, &DVector::from_vec(q), &set).map_err(py_err)?))
}

/// Null-space projector of a contact Jacobian and the removed rank.
#[pyfunction]
#[pyo3(signature = (jc, cutoff = 1e-8))]
fn projector(jc: Vec<Vec<f64>>, cutoff: f64) -> PyResult<(Vec<Vec<f64>>, usize)> {
    let p = inertia::contact::projector(&matrix(&jc)?, cutoff);
    Ok((rows(&p.p), p.rank_deficiency))
}

/// Zero-phase Butterworth low-pass of one channel sampled at `rate` Hz.
#[pyfunction]
#[pyo3(signature = (x, rate, order = 5, cutoff_hz = 10.0))]
fn filtfilt(x: Vec<f64>, rate: f64, order: usize, cutoff_hz: f64) -> PyResult<Vec<f64>> {
    let spec = FilterSpec { order, cutoff_hz };
    let f = Butterworth::design(spec.order, spec.cutoff_hz, rate).map_err(py_err)?;
    f.filtfilt(&x).map_err(py_err)
}

/// Synthetic contact-constrained trajectory with torques from the model's
/// own parameters.
#[pyfunction]
#[pyo3(signature = (model, motion = "multisine", duration = 10.0, seed = 0, torque_noise = 0.0, contacts = None, viscous = 0.0, coulomb = 0.0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    model: &PyModel,
    motion: &str,
    duration: f64,
    seed: u64,
    torque_noise: f64,
    contacts: Option<Vec<String>>,
    viscous: f64,
    coulomb: f64,
) -> PyResult<PyDataset> {
    let motion = match motion {
        "static" => Motion::Static { poses: 10, spread: 0.2 },
        "multisine" => Motion::multisine(),
        "crouch-extend" => Motion::CrouchExtend { depth: 0.3, period: 2.0 },
        other => return Err(PyValueError::new_err(format!("unknown motion '{other}'"))),
    };
    let mut sc = SynthScenario::new(model.inner.clone(), motion);
    sc.contacts = contact_set(&model.inner, contacts)?;
    sc.duration = duration;
    sc.seed = seed;
    sc.friction = Friction::uniform(model.inner.n_joints(), viscous, coulomb);
    sc.noise = NoiseSpec {
        torque_rel: torque_noise,
        ..Default::default()
    };
    Ok(PyDataset {
        inner: generate(&sc).map_err(py_err)?.dataset,
    })
}

/// Identifies link parameters (and friction) from `data`, starting from
/// the priors stored in `model`.
#[pyfunction]
#[pyo3(signature = (data, model, gamma = 1e-2, metric = "geodesic", friction = true, method = "lmi"))]
fn identify(
    data: &PyDataset,
    model: &PyModel,
    gamma: f64,
    metric: &str,
    friction: bool,
    method: &str,
) -> PyResult<PySolution> {
    let cfg = IdentifyConfig {
        gamma,
        metric: metric.parse::<MetricKind>().map_err(py_err)?,
        friction,
        ..Default::default()
    };
    cfg.validate().map_err(py_err)?;
    let sys = assemble_reduced(&data.inner, &model.inner, &cfg).map_err(py_err)?;
    let inner = match method {
        "lmi" => {
            let m = cfg.metric_for(&model.inner).map_err(py_err)?;
            solve_lmi(&sys, &model.inner, &model.inner.priors(), &m, &cfg).map_err(py_err)?
        }
        "svd" => solve_svd(&sys, &model.inner, &cfg).map_err(py_err)?,
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    Ok(PySolution { inner })
}

#[pymodule]
fn inertia_id(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(consistency, m)?)?;
    m.add_function(wrap_pyfunction!(regressor, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_dynamics, m)?)?;
    m.add_function(wrap_pyfunction!(contact_jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(projector, m)?)?;
    m.add_function(wrap_pyfunction!(filtfilt, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    Ok(())
}
