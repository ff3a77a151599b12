//! Trajectory logs, datasets and train/validation splitting.
//!
//! A log is a comma-separated table preceded by `# key: value` metadata lines:
//!
//! ```text
//! # model_hash: 3f5c…
//! # rate_hz: 100
//! # motion: multisine
//! # quaternion: xyzw
//! # units: SI
//! t,q[0],…,q[n+6],v[0],…,v[n+5],a[0],…,a[n+5],tau[0],…,tau[n-1],contact[FL_foot],…
//! ```
//!
//! Floats are written with 17 significant digits so that a write/read cycle is
//! exact. The `a[i]` columns may be omitted, in which case accelerations are
//! estimated from the velocities. Contact columns hold 0/1 activation flags.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::contact::ContactSet;
use crate::model::RobotModel;
use crate::signal::{butterworth_zero_phase, estimate_acceleration, FilterSpec, TimeSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
    pub tau: DVector<f64>,
    pub contacts: ContactSet,
    /// Motion tag of the trajectory this sample came from.
    pub motion: String,
}

impl TrajectorySample {
    pub fn joint_velocities(&self, n: usize) -> DVector<f64> {
        self.v.rows(6, n).into_owned()
    }
}

/// File-level metadata of one log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMeta {
    pub model_hash: String,
    pub rate_hz: f64,
    pub motion: String,
}

/// Which channels get low-passed on ingestion. Configuration is never
/// filtered; accelerations are re-derived from the filtered velocity when
/// requested or when the log has no acceleration columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub filter: FilterSpec,
    pub filter_velocity: bool,
    pub filter_torque: bool,
    pub derive_acceleration: bool,
}

impl Default for Conditioning {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            filter_velocity: true,
            filter_torque: true,
            derive_acceleration: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetMeta {
    pub sources: Vec<String>,
    pub conditioning: Option<Conditioning>,
    pub model_hash: String,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<TrajectorySample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Concatenates datasets recorded against the same model.
    pub fn concat(parts: Vec<Dataset>) -> Result<Dataset> {
        let mut iter = parts.into_iter();
        let Some(mut out) = iter.next() else {
            return Err(Error::NoSamples);
        };
        for d in iter {
            if !out.meta.model_hash.is_empty() && !d.meta.model_hash.is_empty() && d.meta.model_hash != out.meta.model_hash {
                return Err(Error::Validation("datasets were recorded against different models".into()));
            }
            out.samples.extend(d.samples);
            out.meta.sources.extend(d.meta.sources);
        }
        Ok(out)
    }

    /// Distinct motion tags in order of first appearance.
    pub fn motions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.samples {
            if !out.contains(&s.motion) {
                out.push(s.motion.clone());
            }
        }
        out
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            meta: self.meta.clone(),
        }
    }
}

struct Layout {
    nq: usize,
    nv: usize,
    n: usize,
    has_acc: bool,
    contacts: Vec<String>,
}

impl Layout {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((0..self.nq).map(|i| format!("q[{i}]")));
        h.extend((0..self.nv).map(|i| format!("v[{i}]")));
        if self.has_acc {
            h.extend((0..self.nv).map(|i| format!("a[{i}]")));
        }
        h.extend((0..self.n).map(|i| format!("tau[{i}]")));
        h.extend(self.contacts.iter().map(|c| format!("contact[{c}]")));
        h
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes samples in the log format; every model contact frame gets a column.
pub fn write_log<W: Write>(out: W, model: &RobotModel, samples: &[TrajectorySample], meta: &LogMeta) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let io = |e: std::io::Error| Error::io("<log output>", e);
    writeln!(out, "# model_hash: {}", meta.model_hash).map_err(io)?;
    writeln!(out, "# rate_hz: {}", fmt_float(meta.rate_hz)).map_err(io)?;
    writeln!(out, "# motion: {}", meta.motion).map_err(io)?;
    writeln!(out, "# quaternion: xyzw").map_err(io)?;
    writeln!(out, "# units: SI").map_err(io)?;
    let frames: Vec<String> = model.contact_frames().iter().map(|c| c.name.clone()).collect();
    let layout = Layout {
        nq: model.nq(),
        nv: model.nv(),
        n: model.n_joints(),
        has_acc: true,
        contacts: frames.clone(),
    };
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(layout.header()).map_err(|e| Error::Parse {
        context: "log output".into(),
        message: e.to_string(),
    })?;
    for s in samples {
        let mut rec: Vec<String> = Vec::with_capacity(layout.header().len());
        rec.push(fmt_float(s.t));
        rec.extend(s.q.iter().chain(s.v.iter()).chain(s.a.iter()).chain(s.tau.iter()).map(|x| fmt_float(*x)));
        rec.extend(frames.iter().map(|f| if s.contacts.active.contains(f) { "1" } else { "0" }.to_string()));
        w.write_record(&rec).map_err(|e| Error::Parse {
            context: "log output".into(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn save_log(path: impl AsRef<Path>, model: &RobotModel, samples: &[TrajectorySample], meta: &LogMeta) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_log(f, model, samples, meta)
}

/// Parses a log without conditioning. Returns metadata and raw samples; when
/// the log carries no accelerations they are left at zero and `false` is
/// returned as the third element.
pub fn parse_log(text: &str, model: &RobotModel, context: &str) -> Result<(LogMeta, Vec<TrajectorySample>, bool)> {
    let perr = |line: usize, msg: String| Error::Parse {
        context: format!("{context}, line {line}"),
        message: msg,
    };
    let mut meta: HashMap<String, String> = HashMap::new();
    let mut body_start = 0;
    let mut header_line = 0;
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            body_start += line.len() + 1;
            continue;
        }
        header_line = i + 1;
        break;
    }
    let body = text.get(body_start.min(text.len())..).unwrap_or("");
    if body.trim().is_empty() {
        return Err(Error::NoSamples);
    }
    if let Some(q) = meta.get("quaternion") {
        if q != "xyzw" {
            return Err(perr(1, format!("unsupported quaternion order `{q}`")));
        }
    }
    let rate_hz = match meta.get("rate_hz") {
        Some(r) => r.parse().map_err(|_| perr(1, format!("bad rate_hz `{r}`")))?,
        None => 0.0,
    };
    let log_meta = LogMeta {
        model_hash: meta.get("model_hash").cloned().unwrap_or_default(),
        rate_hz,
        motion: meta.get("motion").cloned().unwrap_or_else(|| "default".into()),
    };
    if !log_meta.model_hash.is_empty() && log_meta.model_hash != model.hash() {
        return Err(Error::Validation(format!(
            "{context}: log was recorded against a different model (hash {})",
            log_meta.model_hash
        )));
    }

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| perr(header_line, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let has_acc = header.iter().any(|h| h.starts_with("a["));
    let contacts: Vec<String> = header
        .iter()
        .filter_map(|h| h.strip_prefix("contact[").and_then(|r| r.strip_suffix(']')))
        .map(str::to_string)
        .collect();
    for c in &contacts {
        if model.contact_index(c).is_none() {
            return Err(perr(header_line, format!("unknown contact frame `{c}`")));
        }
    }
    let layout = Layout {
        nq: model.nq(),
        nv: model.nv(),
        n: model.n_joints(),
        has_acc,
        contacts: contacts.clone(),
    };
    let expected = layout.header();
    if header != expected {
        let first_bad = header
            .iter()
            .zip(&expected)
            .position(|(a, b)| a != b)
            .unwrap_or(header.len().min(expected.len()));
        return Err(Error::Validation(format!(
            "{context}: header does not match the model: {} columns (expected {}), first mismatch at column {} (`{}` vs `{}`)",
            header.len(),
            expected.len(),
            first_bad,
            header.get(first_bad).map_or("", String::as_str),
            expected.get(first_bad).map_or("", String::as_str),
        )));
    }

    let mut samples = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = header_line + 1 + k;
        let rec = rec.map_err(|e| perr(line, e.to_string()))?;
        if rec.len() != expected.len() {
            return Err(perr(line, format!("expected {} fields, found {}", expected.len(), rec.len())));
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| perr(line, format!("column `{}`: bad number `{field}`", expected[c])))?;
            if !x.is_finite() {
                return Err(perr(line, format!("column `{}`: non-finite value", expected[c])));
            }
            vals.push(x);
        }
        let mut at = 1;
        let mut take = |len: usize| {
            let v = DVector::from_column_slice(&vals[at..at + len]);
            at += len;
            v
        };
        let q = take(layout.nq);
        let v = take(layout.nv);
        let a = if has_acc { take(layout.nv) } else { DVector::zeros(layout.nv) };
        let tau = take(layout.n);
        let flags = take(contacts.len());
        let qn = q.fixed_rows::<4>(3).norm();
        if (qn - 1.0).abs() > 1e-9 {
            return Err(perr(line, format!("base quaternion norm {qn} is not 1")));
        }
        let mut active = Vec::new();
        for (i, f) in flags.iter().enumerate() {
            match *f {
                x if x == 1.0 => active.push(contacts[i].clone()),
                x if x == 0.0 => {}
                x => return Err(perr(line, format!("contact flag must be 0 or 1, found {x}"))),
            }
        }
        samples.push(TrajectorySample {
            t: vals[0],
            q,
            v,
            a,
            tau,
            contacts: ContactSet { active },
            motion: log_meta.motion.clone(),
        });
    }
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    Ok((log_meta, samples, has_acc))
}

/// Applies [`Conditioning`] to one contiguous trajectory in place.
pub fn condition(samples: &mut [TrajectorySample], cond: &Conditioning, derive_acc: bool) -> Result<()> {
    if samples.is_empty() {
        return Ok(());
    }
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let nv = samples[0].v.len();
    let n = samples[0].tau.len();
    let vmat = DMatrix::from_fn(samples.len(), nv, |i, j| samples[i].v[j]);
    let tmat = DMatrix::from_fn(samples.len(), n, |i, j| samples[i].tau[j]);
    let vs = TimeSeries::new(t.clone(), vmat)?;
    if vs.t != t {
        return Err(Error::Signal("log timestamps are not uniformly spaced".into()));
    }
    let f = cond.filter;
    let vs = if cond.filter_velocity {
        butterworth_zero_phase(&vs, f.order, f.cutoff_hz)?
    } else {
        vs
    };
    let acc = if derive_acc || cond.derive_acceleration {
        Some(estimate_acceleration(&vs, Some(f))?)
    } else {
        None
    };
    let taus = if cond.filter_torque && n > 0 {
        Some(butterworth_zero_phase(&TimeSeries::new(t, tmat)?, f.order, f.cutoff_hz)?)
    } else {
        None
    };
    for (i, s) in samples.iter_mut().enumerate() {
        s.v = vs.channels.row(i).transpose();
        if let Some(a) = &acc {
            s.a = a.channels.row(i).transpose();
        }
        if let Some(tq) = &taus {
            s.tau = tq.channels.row(i).transpose();
        }
    }
    Ok(())
}

/// Reads and validates a log, optionally conditioning it.
pub fn load_log(path: impl AsRef<Path>, model: &RobotModel, conditioning: Option<&Conditioning>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    let (meta, mut samples, has_acc) = parse_log(&text, model, &context)?;
    match conditioning {
        Some(c) => condition(&mut samples, c, !has_acc)?,
        None if !has_acc => {
            let c = Conditioning {
                filter_velocity: false,
                filter_torque: false,
                ..Conditioning::default()
            };
            condition(&mut samples, &c, true)?
        }
        None => {}
    }
    Ok(Dataset {
        samples,
        meta: DatasetMeta {
            sources: vec![context],
            conditioning: conditioning.copied(),
            model_hash: meta.model_hash,
            rate_hz: meta.rate_hz,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitPolicy {
    /// First `train_fraction` of the samples for training; shuffled first
    /// when a seed is given.
    Ratio { train_fraction: f64, seed: Option<u64> },
    /// Whole trajectories whose motion tag is listed go to validation.
    ByMotionTag { holdout: Vec<String> },
}

/// Partitions a dataset into (train, validation).
pub fn split(ds: &Dataset, policy: &SplitPolicy) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    let (train, val): (Vec<usize>, Vec<usize>) = match policy {
        SplitPolicy::Ratio { train_fraction, seed } => {
            if !(0.0..=1.0).contains(train_fraction) {
                return Err(Error::Validation(format!("split ratio {train_fraction} outside [0, 1]")));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            if let Some(seed) = seed {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                idx.shuffle(&mut rng);
            }
            let k = (train_fraction * n as f64).round() as usize;
            let mut train = idx[..k].to_vec();
            let mut val = idx[k..].to_vec();
            train.sort_unstable();
            val.sort_unstable();
            (train, val)
        }
        SplitPolicy::ByMotionTag { holdout } => (0..n).partition(|&i| !holdout.contains(&ds.samples[i].motion)),
    };
    Ok((ds.subset(&train), ds.subset(&val)))
}

/// Per-sample predicted vs measured projected torques as CSV.
pub fn write_predictions<W: Write>(
    out: W,
    row_names: &[String],
    times: &[f64],
    predicted: &[DVector<f64>],
    measured: &[DVector<f64>],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let cerr = |e: csv::Error| Error::Parse {
        context: "prediction output".into(),
        message: e.to_string(),
    };
    let mut header = vec!["t".to_string()];
    header.extend(row_names.iter().map(|r| format!("pred[{r}]")));
    header.extend(row_names.iter().map(|r| format!("meas[{r}]")));
    w.write_record(&header).map_err(cerr)?;
    for ((t, p), m) in times.iter().zip(predicted).zip(measured) {
        let mut rec = vec![fmt_float(*t)];
        rec.extend(p.iter().chain(m.iter()).map(|x| fmt_float(*x)));
        w.write_record(&rec).map_err(cerr)?;
    }
    w.flush().map_err(|e| Error::io("<prediction output>", e))?;
    Ok(())
}
