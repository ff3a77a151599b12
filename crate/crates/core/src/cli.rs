//! Command-line front end: `identify`, `simulate`, `predict`, `filter`, `inspect`.
//!
//! Exit codes: 0 success, 1 input/output or validation error, 2 solver failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::contact::ContactSet;
use crate::dataio::{load_log, save_log, split, write_predictions, Conditioning, Dataset, LogMeta, SplitPolicy};
use crate::fixtures;
use crate::identify::report::{json_summary, text_report, ReportInput, RmseRow};
use crate::identify::{assemble_reduced, diagnose, predict_torques, solve_lmi, solve_svd, IdentifyConfig, SolverStatus};
use crate::model::{load_model, RobotModel};
use crate::regularization::MetricKind;
use crate::signal::FilterSpec;
use crate::synth::{generate, Friction, Motion, NoiseSpec, SynthScenario, TruthRecord};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "inertia-id", version, about = "Physically consistent inertial parameter identification for floating-base robots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify inertial parameters and friction from trajectory logs.
    Identify(IdentifyArgs),
    /// Generate a synthetic trajectory log with known ground truth.
    Simulate(SimulateArgs),
    /// Predict projected torques of a model on logs and report RMSE.
    Predict(PredictArgs),
    /// Low-pass a log and re-derive accelerations.
    Filter(FilterArgs),
    /// Observability report of the stacked projected regressor.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl From<OnOff> for bool {
    fn from(v: OnOff) -> bool {
        v == OnOff::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Geodesic,
    Euclidean,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    /// Run configuration (TOML); flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training logs (repeatable).
    #[arg(long)]
    pub train: Vec<PathBuf>,
    /// Validation logs (repeatable); each is reported separately.
    #[arg(long)]
    pub val: Vec<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long, value_enum)]
    pub friction: Option<OnOff>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Seed of the random train/validation split.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also solve the unconstrained SVD baseline.
    #[arg(long, value_enum)]
    pub baseline: Option<OnOff>,
    /// Zero-phase low-pass of velocities and torques on load.
    #[arg(long, value_enum)]
    pub filter: Option<OnOff>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario description (TOML); flags override its entries.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Model file, or `builtin:quadruped|three_link|single_link`.
    #[arg(long)]
    pub model: Option<String>,
    /// Trajectory family when no scenario file gives one.
    #[arg(long, value_parser = ["static", "multisine", "crouch-extend"])]
    pub motion: Option<String>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative torque noise (fraction of per-joint RMS).
    #[arg(long)]
    pub torque_noise: Option<f64>,
    /// Motion tag written into the log.
    #[arg(long)]
    pub tag: Option<String>,
    /// Active contact frames (comma separated); all frames by default.
    #[arg(long, value_delimiter = ',')]
    pub contacts: Option<Vec<String>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Logs to evaluate (repeatable).
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Friction coefficients (JSON with `viscous` and `coulomb` arrays).
    #[arg(long)]
    pub friction_file: Option<PathBuf>,
    /// Log-header model hash to accept (the model the logs were recorded with).
    #[arg(long)]
    pub recorded_with: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub filter: Option<OnOff>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    #[arg(long, default_value_t = 10.0)]
    pub cutoff: f64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub friction: Option<OnOff>,
    /// Relative singular-value cutoff for the numerical rank.
    #[arg(long, default_value_t = 1e-8)]
    pub cutoff: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of the `identify` configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<PathBuf>,
    pub train: Vec<PathBuf>,
    pub validation: Vec<PathBuf>,
    pub out: PathBuf,
    pub baseline: bool,
    pub identify: IdentifyConfig,
    pub filter: FilterConfig,
    pub split: Option<SplitConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            train: Vec::new(),
            validation: Vec::new(),
            out: PathBuf::from("identification"),
            baseline: true,
            identify: IdentifyConfig::default(),
            filter: FilterConfig::default(),
            split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub enabled: bool,
    pub order: usize,
    pub cutoff_hz: f64,
    pub filter_velocity: bool,
    pub filter_torque: bool,
    pub derive_acceleration: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let c = Conditioning::default();
        Self {
            enabled: false,
            order: c.filter.order,
            cutoff_hz: c.filter.cutoff_hz,
            filter_velocity: c.filter_velocity,
            filter_torque: c.filter_torque,
            derive_acceleration: c.derive_acceleration,
        }
    }
}

impl FilterConfig {
    fn conditioning(&self) -> Option<Conditioning> {
        self.enabled.then_some(Conditioning {
            filter: FilterSpec {
                order: self.order,
                cutoff_hz: self.cutoff_hz,
            },
            filter_velocity: self.filter_velocity,
            filter_torque: self.filter_torque,
            derive_acceleration: self.derive_acceleration,
        })
    }
}

/// Train/validation split applied when no validation logs are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Fraction of samples used for training.
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Motion tags held out for validation.
    #[serde(default)]
    pub holdout: Vec<String>,
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Input(Error),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(m) => Failure::Solver(m),
            e => Failure::Input(e),
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Solver(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "{e}"),
            Failure::Solver(s) => write!(f, "solver failure: {s}"),
        }
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

fn resolve_model(spec: &str) -> Result<RobotModel> {
    match spec.strip_prefix("builtin:") {
        Some(name) => fixtures::by_name(name).ok_or_else(|| Error::Validation(format!("unknown builtin model `{name}`"))),
        None => load_model(spec),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn load_all(paths: &[PathBuf], model: &RobotModel, cond: Option<&Conditioning>) -> Result<Vec<Dataset>> {
    paths.iter().map(|p| load_log(p, model, cond)).collect()
}

/// Merges `IdentifyArgs` into the configuration file contents.
pub fn resolve_run_config(args: &IdentifyArgs) -> Result<RunConfig> {
    let mut cfg: RunConfig = match &args.config {
        Some(p) => read_toml(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.model {
        cfg.model = Some(m.clone());
    }
    if !args.train.is_empty() {
        cfg.train = args.train.clone();
    }
    if !args.val.is_empty() {
        cfg.validation = args.val.clone();
    }
    if let Some(g) = args.gamma {
        cfg.identify.gamma = g;
    }
    if let Some(m) = args.metric {
        cfg.identify.metric = match m {
            MetricArg::Geodesic => MetricKind::GeodesicApprox,
            MetricArg::Euclidean => MetricKind::Euclidean,
        };
    }
    if let Some(f) = args.friction {
        cfg.identify.friction = f.into();
    }
    if let Some(e) = args.epsilon {
        cfg.identify.epsilon = e;
    }
    if let Some(s) = args.seed {
        cfg.split.get_or_insert(SplitConfig {
            ratio: Some(0.8),
            seed: None,
            holdout: Vec::new(),
        });
        if let Some(sp) = cfg.split.as_mut() {
            sp.seed = Some(s);
        }
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(b) = args.baseline {
        cfg.baseline = b.into();
    }
    if let Some(f) = args.filter {
        cfg.filter.enabled = f.into();
    }
    cfg.identify.validate()?;
    if cfg.model.is_none() {
        return Err(Error::Validation("no model given (--model or `model` in the config)".into()));
    }
    if cfg.train.is_empty() {
        return Err(Error::Validation("no training logs given (--train or `train` in the config)".into()));
    }
    Ok(cfg)
}

fn cmd_identify(args: &IdentifyArgs) -> std::result::Result<String, Failure> {
    let cfg = resolve_run_config(args)?;
    let model = load_model(cfg.model.as_ref().expect("checked"))?;
    let cond = cfg.filter.conditioning();
    let train_parts = load_all(&cfg.train, &model, cond.as_ref())?;
    let mut validation: Vec<(String, Dataset)> = Vec::new();
    let mut train = Dataset::concat(train_parts)?;
    if !cfg.validation.is_empty() {
        for (p, d) in cfg.validation.iter().zip(load_all(&cfg.validation, &model, cond.as_ref())?) {
            let tag = d
                .samples
                .first()
                .map(|s| s.motion.clone())
                .unwrap_or_else(|| p.display().to_string());
            validation.push((tag, d));
        }
    } else if let Some(sp) = &cfg.split {
        let policy = if sp.holdout.is_empty() {
            SplitPolicy::Ratio {
                train_fraction: sp.ratio.unwrap_or(0.8),
                seed: sp.seed,
            }
        } else {
            SplitPolicy::ByMotionTag {
                holdout: sp.holdout.clone(),
            }
        };
        let (tr, va) = split(&train, &policy)?;
        train = tr;
        if !va.is_empty() {
            validation.push(("validation".into(), va));
        }
    }
    let ic = cfg.identify;
    let metric = ic.metric_for(&model)?;
    let sys = assemble_reduced(&train, &model, &ic)?;
    let lmi = solve_lmi(&sys, &model, &model.priors(), &metric, &ic)?;
    let svd = if cfg.baseline {
        Some(solve_svd(&sys, &model, &ic)?)
    } else {
        None
    };

    create_dir(&cfg.out)?;
    let mut rmse = Vec::new();
    let mut sols = vec![&lmi];
    if let Some(s) = &svd {
        sols.push(s);
    }
    let n = model.n_joints();
    for (tag, ds) in std::iter::once(("training".to_string(), &train)).chain(validation.iter().map(|(t, d)| (t.clone(), d))) {
        for sol in &sols {
            let p = predict_torques(&model, &sol.params, &sol.friction_or_zero(n), ds, &ic)?;
            rmse.push(RmseRow::new(&tag, &sol.method.to_string(), &p));
            if tag != "training" {
                let path = cfg.out.join(format!("predictions_{}_{}.csv", sanitize(&tag), sol.method.to_string().to_lowercase()));
                let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                write_predictions(f, &row_names(&model), &p.times, &p.predicted, &p.measured)?;
            }
        }
    }
    let input = ReportInput {
        model: &model,
        config: &ic,
        filter: cond.map(|c| c.filter),
        train_sources: &train.meta.sources,
        n_train: train.len(),
        n_validation: validation.iter().map(|(_, d)| d.len()).sum(),
        solutions: sols,
        rmse,
    };
    let text = text_report(&input);
    write_file(&cfg.out.join("report.txt"), &text)?;
    let summary = serde_json::to_string_pretty(&json_summary(&input)).expect("summary serializes");
    write_file(&cfg.out.join("summary.json"), &summary)?;
    write_file(
        &cfg.out.join("run_config.toml"),
        &toml::to_string(&cfg).expect("config serializes"),
    )?;
    let fr = lmi.friction_or_zero(n);
    write_file(
        &cfg.out.join("friction.json"),
        &serde_json::to_string_pretty(&fr).expect("friction serializes"),
    )?;
    let identified = model.with_params_unchecked(&lmi.params);
    write_file(&cfg.out.join("identified_model.toml"), &identified.to_toml_string())?;

    if lmi.status != SolverStatus::Optimal {
        return Err(Failure::Solver(format!(
            "LMI solver finished with status {} ({}); outputs written to {}",
            lmi.status,
            lmi.diagnostics,
            cfg.out.display()
        )));
    }
    if !lmi.all_consistent() {
        return Err(Failure::Solver("returned parameters failed the consistency certification".into()));
    }
    Ok(text)
}

fn sanitize(tag: &str) -> String {
    tag.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn row_names(model: &RobotModel) -> Vec<String> {
    let mut names: Vec<String> = ["base_vx", "base_vy", "base_vz", "base_wx", "base_wy", "base_wz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(model.joint_names());
    names
}

/// Friction entry of a scenario: one value for every joint or one per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerJoint {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerJoint {
    fn expand(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            PerJoint::Uniform(x) => Ok(vec![*x; n]),
            PerJoint::Each(v) if v.len() == n => Ok(v.clone()),
            PerJoint::Each(v) => Err(Error::dim("friction coefficients", n, v.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionConfig {
    pub viscous: PerJoint,
    pub coulomb: PerJoint,
}

/// Contents of a `simulate` scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: Option<String>,
    pub motion: Option<Motion>,
    pub contacts: Option<Vec<String>>,
    pub initial_joints: Option<Vec<f64>>,
    pub friction: Option<FrictionConfig>,
    pub noise: NoiseSpec,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub rate: Option<f64>,
    pub substeps: Option<usize>,
    pub kp: Option<f64>,
    pub kd: Option<f64>,
    pub baumgarte: Option<f64>,
    pub tag: Option<String>,
}

fn default_motion(name: &str) -> Motion {
    match name {
        "static" => Motion::Static { poses: 10, spread: 0.2 },
        "crouch-extend" => Motion::CrouchExtend { depth: 0.3, period: 2.0 },
        _ => Motion::multisine(),
    }
}

pub fn build_scenario(cfg: &ScenarioConfig, args: &SimulateArgs) -> Result<SynthScenario> {
    let spec = args
        .model
        .clone()
        .or_else(|| cfg.model.clone())
        .ok_or_else(|| Error::Validation("no model given (--model or `model` in the scenario)".into()))?;
    let model = resolve_model(&spec)?;
    let n = model.n_joints();
    let motion = match (&args.motion, &cfg.motion) {
        (Some(name), Some(m)) if m.tag() == name => m.clone(),
        (Some(name), _) => default_motion(name),
        (None, Some(m)) => m.clone(),
        (None, None) => Motion::multisine(),
    };
    let mut sc = SynthScenario::new(model, motion);
    if let Some(c) = args.contacts.as_ref().or(cfg.contacts.as_ref()) {
        sc.contacts = ContactSet::new(c.iter().cloned())?;
    }
    if let Some(q) = &cfg.initial_joints {
        sc.initial_joints = DVector::from_vec(q.clone());
    }
    if let Some(f) = &cfg.friction {
        sc.friction = Friction {
            viscous: f.viscous.expand(n)?,
            coulomb: f.coulomb.expand(n)?,
        };
    }
    sc.noise = cfg.noise;
    if let Some(x) = args.torque_noise {
        sc.noise.torque_rel = x;
    }
    sc.seed = args.seed.or(cfg.seed).unwrap_or(0);
    sc.duration = args.duration.or(cfg.duration).unwrap_or(sc.duration);
    sc.rate = args.rate.or(cfg.rate).unwrap_or(sc.rate);
    sc.substeps = cfg.substeps.unwrap_or(sc.substeps);
    sc.kp = cfg.kp.unwrap_or(sc.kp);
    sc.kd = cfg.kd.unwrap_or(sc.kd);
    sc.baumgarte = cfg.baumgarte.unwrap_or(sc.baumgarte);
    sc.tag = args.tag.clone().or_else(|| cfg.tag.clone());
    Ok(sc)
}

fn cmd_simulate(args: &SimulateArgs) -> std::result::Result<String, Failure> {
    let cfg: ScenarioConfig = match &args.scenario {
        Some(p) => read_toml(p)?,
        None => ScenarioConfig::default(),
    };
    let sc = build_scenario(&cfg, args)?;
    let out = generate(&sc)?;
    create_dir(&args.out)?;
    let tag = sc.tag.clone().unwrap_or_else(|| sc.motion.tag().to_string());
    let log = args.out.join(format!("{}.csv", sanitize(&tag)));
    save_log(
        &log,
        &sc.model,
        &out.dataset.samples,
        &LogMeta {
            model_hash: sc.model.hash(),
            rate_hz: sc.rate,
            motion: tag.clone(),
        },
    )?;
    TruthRecord::from_output(&sc, &out).save(args.out.join(format!("{}.truth.json", sanitize(&tag))))?;
    sc.model.save(args.out.join("model.toml"))?;
    Ok(format!(
        "wrote {} samples ({} s at {} Hz) to {}\n",
        out.dataset.len(),
        sc.duration,
        sc.rate,
        log.display()
    ))
}

fn cmd_predict(args: &PredictArgs) -> std::result::Result<String, Failure> {
    let model = load_model(&args.model)?;
    let recorded = match &args.recorded_with {
        Some(p) => load_model(p)?,
        None => model.clone(),
    };
    let cond = args
        .filter
        .filter(|f| *f == OnOff::On)
        .map(|_| Conditioning::default());
    let n = model.n_joints();
    let friction = match &args.friction_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let f: Friction = serde_json::from_str(&text).map_err(|e| Error::Parse {
                context: p.display().to_string(),
                message: e.to_string(),
            })?;
            if f.viscous.len() != n || f.coulomb.len() != n {
                return Err(Error::dim("friction coefficients", n, f.viscous.len()).into());
            }
            f
        }
        None => Friction::zero(n),
    };
    let cfg = IdentifyConfig::default();
    let mut rows = Vec::new();
    for (path, ds) in args.data.iter().zip(load_all(&args.data, &recorded, cond.as_ref())?) {
        let p = predict_torques(&model, &model.priors(), &friction, &ds, &cfg)?;
        let tag = ds.samples.first().map(|s| s.motion.clone()).unwrap_or_default();
        if let Some(out) = &args.out {
            create_dir(out)?;
            let file = out.join(format!("predictions_{}.csv", sanitize(&tag)));
            let f = std::fs::File::create(&file).map_err(|e| Error::io(&file, e))?;
            write_predictions(f, &row_names(&model), &p.times, &p.predicted, &p.measured)?;
        }
        rows.push((path.display().to_string(), RmseRow::new(&tag, "model", &p)));
    }
    let mut s = String::new();
    let names = model.joint_names();
    for (path, r) in &rows {
        let _ = writeln!(s, "{path} ({})", r.motion);
        for (j, v) in names.iter().zip(&r.per_joint) {
            let _ = writeln!(s, "  {j:<14} {v:.6e}");
        }
        let _ = writeln!(s, "  overall RMSE   {:.6e}", r.overall);
        let _ = writeln!(s, "  all-row RMSE   {:.6e}", r.rmse_all);
    }
    Ok(s)
}

fn cmd_filter(args: &FilterArgs) -> std::result::Result<String, Failure> {
    let model = load_model(&args.model)?;
    let cond = Conditioning {
        filter: FilterSpec {
            order: args.order,
            cutoff_hz: args.cutoff,
        },
        ..Conditioning::default()
    };
    let ds = load_log(&args.input, &model, Some(&cond))?;
    let motion = ds.samples[0].motion.clone();
    save_log(
        &args.out,
        &model,
        &ds.samples,
        &LogMeta {
            model_hash: ds.meta.model_hash.clone(),
            rate_hz: ds.meta.rate_hz,
            motion,
        },
    )?;
    Ok(format!("filtered {} samples into {}\n", ds.len(), args.out.display()))
}

/// Text observability report.
pub fn inspect_report(model: &RobotModel, ds: &Dataset, friction: bool, cutoff: f64) -> Result<String> {
    let cfg = IdentifyConfig {
        friction,
        ..IdentifyConfig::default()
    };
    let sys = assemble_reduced(ds, model, &cfg)?;
    let d = diagnose(&sys, model, cutoff);
    let mut s = String::new();
    let _ = writeln!(s, "Observability of the projected regressor");
    let _ = writeln!(s, "samples: {}", ds.len());
    let _ = writeln!(s, "unknowns: {}", sys.n_vars());
    let _ = writeln!(s, "rank cutoff (relative): {cutoff:e}");
    let _ = writeln!(s, "numerical rank: {}", d.rank);
    let _ = writeln!(s, "null-space dimension: {}", d.nullspace_dim);
    let _ = writeln!(s, "condition number (retained): {:.6e}", d.condition_number());
    let deficiency = d.nullspace_dim as f64 / sys.n_vars().max(1) as f64;
    if deficiency > 0.5 {
        let _ = writeln!(s, "WARNING: heavy rank deficiency ({:.0}% of the unknowns unobservable)", 100.0 * deficiency);
    }
    let _ = writeln!(s, "\nsingular values (column-equilibrated):");
    for (i, v) in d.singular_values.iter().enumerate() {
        let _ = writeln!(s, "  {i:>4} {v:.6e}");
    }
    let _ = writeln!(s, "\nparameter sensitivity (column norms):");
    for (n, v) in d.names.iter().zip(&d.sensitivity) {
        let _ = writeln!(s, "  {n:<20} {v:.6e}");
    }
    Ok(s)
}

fn cmd_inspect(args: &InspectArgs) -> std::result::Result<String, Failure> {
    let model = load_model(&args.model)?;
    let ds = Dataset::concat(load_all(&args.data, &model, None)?)?;
    let text = inspect_report(&model, &ds, args.friction.map(bool::from).unwrap_or(true), args.cutoff)?;
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_file(&out.join("inspect.txt"), &text)?;
    }
    Ok(text)
}

pub fn run(cli: &Cli) -> std::result::Result<String, Failure> {
    match &cli.command {
        Command::Identify(a) => cmd_identify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}

/// Parses arguments, runs the command, prints the outcome and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
