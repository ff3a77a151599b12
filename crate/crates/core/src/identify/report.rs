//! Text and machine-readable reports of an identification run.

use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{IdentificationSolution, IdentifyConfig, Prediction};
use crate::model::{describe, RobotModel};
use crate::signal::FilterSpec;

/// One line of the RMSE table.
#[derive(Debug, Clone)]
pub struct RmseRow {
    pub motion: String,
    pub method: String,
    pub per_joint: Vec<f64>,
    pub overall: f64,
    pub rmse_all: f64,
}

impl RmseRow {
    pub fn new(motion: &str, method: &str, p: &Prediction) -> Self {
        Self {
            motion: motion.to_string(),
            method: method.to_string(),
            per_joint: p.rmse_joints().to_vec(),
            overall: p.overall(),
            rmse_all: p.rmse_all(),
        }
    }
}

/// Joints grouped by the name prefix before the first `_` (one group per
/// leg on a legged robot), in order of first appearance.
pub fn joint_groups(names: &[String]) -> Vec<(String, Vec<usize>)> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, n) in names.iter().enumerate() {
        let key = n.split_once('_').map_or(n.as_str(), |(a, _)| a).to_string();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    groups
}

pub struct ReportInput<'a> {
    pub model: &'a RobotModel,
    pub config: &'a IdentifyConfig,
    pub filter: Option<FilterSpec>,
    pub train_sources: &'a [String],
    pub n_train: usize,
    pub n_validation: usize,
    pub solutions: Vec<&'a IdentificationSolution>,
    pub rmse: Vec<RmseRow>,
}

fn onoff(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

pub fn text_report(input: &ReportInput) -> String {
    let mut s = String::new();
    let m = input.model;
    let c = input.config;
    let _ = writeln!(s, "Inertial parameter identification");
    let _ = writeln!(s, "model: {}", describe(m));
    let _ = writeln!(s, "model hash: {}", m.hash());
    let _ = writeln!(s, "training samples: {}", input.n_train);
    let _ = writeln!(s, "validation samples: {}", input.n_validation);
    for src in input.train_sources {
        let _ = writeln!(s, "source: {src}");
    }
    let _ = writeln!(s, "\nSettings");
    let _ = writeln!(s, "  gamma            {:e}", c.gamma);
    let _ = writeln!(s, "  metric           {}", c.metric);
    let _ = writeln!(s, "  epsilon          {:e}", c.epsilon);
    let _ = writeln!(s, "  friction         {}", onoff(c.friction));
    let _ = writeln!(s, "  tol_gap          {:e}", c.tol_gap);
    let _ = writeln!(s, "  tol_gap_abs      {:e}", c.tol_gap_abs);
    let _ = writeln!(s, "  max_iterations   {}", c.max_iterations);
    let _ = writeln!(s, "  column_scaling   {}", onoff(c.column_scaling));
    let _ = writeln!(s, "  projector_cutoff {:e}", c.projector_cutoff);
    let _ = writeln!(s, "  rank_cutoff      {:e}", c.rank_cutoff);
    let _ = writeln!(s, "  sign_deadband    {:e}", c.sign_deadband);
    let _ = writeln!(s, "  feas_tol         {:e}", c.feas_tol);
    match input.filter {
        Some(f) => {
            let _ = writeln!(s, "  filter           butterworth order {} cutoff {} Hz, zero phase", f.order, f.cutoff_hz);
        }
        None => {
            let _ = writeln!(s, "  filter           none");
        }
    }

    for sol in &input.solutions {
        let _ = writeln!(s, "\n{} solution", sol.method);
        let _ = writeln!(s, "  status      {}", sol.status);
        let _ = writeln!(s, "  iterations  {}", sol.iterations);
        let _ = writeln!(s, "  gap bound   {:.3e}", sol.gap);
        let _ = writeln!(s, "  objective   {:.9e}", sol.objective);
        let _ = writeln!(s, "  data term   {:.9e}", sol.data_term);
        let _ = writeln!(s, "  regularizer {:.9e}", sol.regularizer);
        let _ = writeln!(s, "  train RMSE  {:.6e} N·m", sol.train_rmse);
        let _ = writeln!(s, "  notes       {}", sol.diagnostics);
        let _ = writeln!(
            s,
            "\n  {:<14} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13}",
            "link", "m", "hx", "hy", "hz", "Ixx", "Ixy", "Ixz", "Iyy", "Iyz", "Izz"
        );
        for (l, p) in m.links().iter().zip(&sol.params) {
            let _ = write!(s, "  {:<14}", l.name);
            for v in p.0 {
                let _ = write!(s, " {v:>13.6e}");
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "\n  {:<14} {:>14} {:>14} {:>14}  {}",
            "link", "min eig J", "min eig C", "tr(J Q)", "consistent"
        );
        for (l, r) in m.links().iter().zip(&sol.consistency) {
            let _ = writeln!(
                s,
                "  {:<14} {:>14.6e} {:>14.6e} {:>14.6e}  {}",
                l.name,
                r.min_eig_pseudo_inertia,
                r.min_eig_com,
                r.density_trace,
                if r.is_consistent() { "yes" } else { "NO" }
            );
        }
        if let Some(f) = &sol.friction {
            let _ = writeln!(s, "\n  {:<14} {:>14} {:>14}", "joint", "B_v", "B_c");
            for (i, j) in m.joint_names().iter().enumerate() {
                let _ = writeln!(s, "  {:<14} {:>14.6e} {:>14.6e}", j, f.viscous[i], f.coulomb[i]);
            }
        }
    }

    if !input.rmse.is_empty() {
        let names = m.joint_names();
        let groups = joint_groups(&names);
        let _ = writeln!(s, "\nRMSE of projected torques (N·m)");
        let mut header = format!("| {:<16} | {:<6} |", "Motion", "Model");
        for (g, idx) in &groups {
            let label = if idx.len() == 1 { names[idx[0]].clone() } else { g.clone() };
            let _ = write!(header, " {label:<28} |");
        }
        let _ = write!(header, " {:<13} |", "Overall RMSE");
        let _ = writeln!(s, "{header}");
        for row in &input.rmse {
            let _ = write!(s, "| {:<16} | {:<6} |", row.motion, row.method);
            for (_, idx) in &groups {
                let cells: Vec<String> = idx.iter().map(|&i| format!("{:.4}", row.per_joint[i])).collect();
                let _ = write!(s, " {:<28} |", format!("[{}]", cells.join(", ")));
            }
            let _ = writeln!(s, " {:<13.4} |", row.overall);
        }
        let _ = writeln!(
            s,
            "Overall RMSE is the root of the summed per-joint mean squares; joints are grouped by name prefix."
        );
    }
    s
}

fn solution_json(m: &RobotModel, sol: &IdentificationSolution) -> Value {
    let links: Vec<Value> = m
        .links()
        .iter()
        .zip(&sol.params)
        .zip(&sol.consistency)
        .map(|((l, p), r)| {
            json!({
                "link": l.name,
                "phi": p.0.to_vec(),
                "min_eig_pseudo_inertia": r.min_eig_pseudo_inertia,
                "min_eig_com": r.min_eig_com,
                "density_trace": r.density_trace,
                "consistent": r.is_consistent(),
            })
        })
        .collect();
    json!({
        "method": sol.method,
        "status": sol.status,
        "objective": sol.objective,
        "data_term": sol.data_term,
        "regularizer": sol.regularizer,
        "gap": sol.gap,
        "iterations": sol.iterations,
        "train_rmse": sol.train_rmse,
        "all_consistent": sol.all_consistent(),
        "links": links,
        "friction": sol.friction.as_ref().map(|f| json!({"viscous": f.viscous, "coulomb": f.coulomb})),
    })
}

pub fn json_summary(input: &ReportInput) -> Value {
    json!({
        "model_hash": input.model.hash(),
        "n_train": input.n_train,
        "n_validation": input.n_validation,
        "config": input.config,
        "filter": input.filter,
        "solutions": input.solutions.iter().map(|s| solution_json(input.model, s)).collect::<Vec<_>>(),
        "rmse": input.rmse.iter().map(|r| json!({
            "motion": r.motion,
            "method": r.method,
            "per_joint": r.per_joint,
            "overall": r.overall,
            "rmse_all": r.rmse_all,
        })).collect::<Vec<_>>(),
    })
}
