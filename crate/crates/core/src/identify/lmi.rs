//! Primal log-barrier interior-point solver for the semidefinite-constrained
//! least-squares problem.
//!
//! Variables are the column-scaled unknowns `y` with `x = D·y`. For barrier
//! weight `t` the centering problem
//!
//! ```text
//! t·‖R y − z‖² − Σ_j [log det(J_j − ε) + log det C_j + log tr(J_j Q_j)] − Σ_i log b_i
//! ```
//!
//! is minimized by damped Newton steps; its minimizer is within `ν/t` of the
//! optimum, `ν` being the total barrier degree.

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix};

use super::{certify, split_solution, IdentificationSolution, IdentifyConfig, Method, ReducedSystem, SolverStatus};
use crate::consistency::{
    com_lmi, com_lmi_basis, density_coefficients, density_realizability, min_eigenvalue, pseudo_inertia,
    pseudo_inertia_basis, stack, InertialParams,
};
use crate::model::{EllipsoidBound, RobotModel};
use crate::regularization::ParamMetric;
use crate::{Error, Result};

type Block = SMatrix<f64, 10, 10>;
type Vec10 = SMatrix<f64, 10, 1>;

/// Ridge weight (relative to the unit-scaled data Hessian) on directions the
/// objective would otherwise leave unbounded.
const RIDGE: f64 = 1e-12;
const OUTER_FACTOR: f64 = 20.0;
const CENTERING_TOL: f64 = 1e-10;
const MAX_NEWTON_PER_CENTERING: usize = 60;

/// One linear matrix inequality `F(y) = F0 + Σ_k y_k F_k ≻ 0` on a link block.
struct Lmi4 {
    offset: Matrix4<f64>,
    basis: [Matrix4<f64>; 10],
}

impl Lmi4 {
    fn value(&self, y: &[f64]) -> Matrix4<f64> {
        let mut f = self.offset;
        for (k, b) in self.basis.iter().enumerate() {
            f += b * y[k];
        }
        f
    }

    /// `(−log det F, gradient, Hessian)`, `None` if `F` is not positive definite.
    fn barrier(&self, y: &[f64]) -> Option<(f64, Vec10, Block)> {
        let f = self.value(y);
        let chol = f.cholesky()?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let s = chol.inverse();
        let m: Vec<Matrix4<f64>> = self.basis.iter().map(|b| s * b).collect();
        let mut g = Vec10::zeros();
        let mut h = Block::zeros();
        for a in 0..10 {
            g[a] = -m[a].trace();
            for b in a..10 {
                let v = (m[a] * m[b]).trace();
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        Some((-logdet, g, h))
    }

    fn feasible(&self, y: &[f64]) -> bool {
        self.value(y).cholesky().is_some()
    }
}

struct LinkConstraints {
    pseudo: Lmi4,
    com: Lmi4,
    trace: Vec10,
}

impl LinkConstraints {
    fn new(bound: &EllipsoidBound, d: &[f64], epsilon: f64) -> Self {
        let scale = |basis: [Matrix4<f64>; 10]| -> [Matrix4<f64>; 10] { std::array::from_fn(|k| basis[k] * d[k]) };
        let t = density_coefficients(bound);
        Self {
            pseudo: Lmi4 {
                offset: -Matrix4::identity() * epsilon,
                basis: scale(pseudo_inertia_basis()),
            },
            com: Lmi4 {
                offset: Matrix4::zeros(),
                basis: scale(com_lmi_basis(bound)),
            },
            trace: Vec10::from_fn(|k, _| t[k] * d[k]),
        }
    }

    fn feasible(&self, y: &[f64]) -> bool {
        self.trace.dot(&Vec10::from_column_slice(y)) > 0.0 && self.pseudo.feasible(y) && self.com.feasible(y)
    }

    fn barrier(&self, y: &[f64]) -> Option<(f64, Vec10, Block)> {
        let tr = self.trace.dot(&Vec10::from_column_slice(y));
        if tr <= 0.0 {
            return None;
        }
        let (v1, g1, h1) = self.pseudo.barrier(y)?;
        let (v2, g2, h2) = self.com.barrier(y)?;
        let g = g1 + g2 - self.trace / tr;
        let h = h1 + h2 + self.trace * self.trace.transpose() / (tr * tr);
        Some((v1 + v2 - tr.ln(), g, h))
    }
}

/// A strictly feasible starting point for one link: the prior when it has
/// room, otherwise a solid ellipsoid of the prior's mass.
pub(super) fn interior_start(prior: &InertialParams, bound: &EllipsoidBound, epsilon: f64) -> InertialParams {
    let strictly_inside = |p: &InertialParams| {
        min_eigenvalue(&pseudo_inertia(p)) > 2.0 * epsilon
            && min_eigenvalue(&com_lmi(p, bound)) > 0.0
            && density_realizability(p, bound) > 0.0
    };
    if strictly_inside(prior) {
        return *prior;
    }
    let mut m = if prior.mass() > 0.0 { prior.mass() } else { 1.0 };
    loop {
        let p = InertialParams::solid_ellipsoid(m, bound);
        if strictly_inside(&p) || m > 1e12 {
            return p;
        }
        m *= 10.0;
    }
}

struct Problem {
    /// `H0 = 2 RᵀR`, `g0 = −2 Rᵀz` of the scaled least-squares objective.
    h0: DMatrix<f64>,
    g0: DVector<f64>,
    links: Vec<LinkConstraints>,
    n_phi: usize,
    n_vars: usize,
}

impl Problem {
    fn feasible(&self, y: &DVector<f64>) -> bool {
        let ys = y.as_slice();
        ys[self.n_phi..].iter().all(|&b| b > 0.0)
            && self
                .links
                .iter()
                .enumerate()
                .all(|(j, c)| c.feasible(&ys[10 * j..10 * j + 10]))
    }

    /// Gradient and Hessian of the centering objective at `y`.
    fn newton_system(&self, y: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let ys = y.as_slice();
        let mut g = (&self.h0 * y + &self.g0) * t;
        let mut h = &self.h0 * t;
        for (j, c) in self.links.iter().enumerate() {
            let (_, gb, hb) = c.barrier(&ys[10 * j..10 * j + 10])?;
            for a in 0..10 {
                g[10 * j + a] += gb[a];
                for b in 0..10 {
                    h[(10 * j + a, 10 * j + b)] += hb[(a, b)];
                }
            }
        }
        for i in self.n_phi..self.n_vars {
            if ys[i] <= 0.0 {
                return None;
            }
            g[i] -= 1.0 / ys[i];
            h[(i, i)] += 1.0 / (ys[i] * ys[i]);
        }
        Some((g, h))
    }

    fn degree(&self) -> f64 {
        (9 * self.links.len() + (self.n_vars - self.n_phi)) as f64
    }
}

fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(c) = h.clone().cholesky() {
        return Some(c.solve(g));
    }
    let scale = h.diagonal().amax().max(1e-300);
    let mut shift = 1e-14 * scale;
    for _ in 0..8 {
        let mut hs = h.clone();
        for i in 0..hs.nrows() {
            hs[(i, i)] += shift;
        }
        if let Some(c) = hs.cholesky() {
            return Some(c.solve(g));
        }
        shift *= 100.0;
    }
    None
}

enum Centering {
    Converged(usize),
    Stalled(usize),
}

fn center(pb: &Problem, y: &mut DVector<f64>, t: f64, budget: usize) -> Centering {
    let mut iters = 0;
    while iters < budget.min(MAX_NEWTON_PER_CENTERING) {
        let Some((g, h)) = pb.newton_system(y, t) else {
            return Centering::Stalled(iters);
        };
        let Some(dir) = solve_spd(&h, &g) else {
            return Centering::Stalled(iters);
        };
        let lambda_sq = g.dot(&dir).max(0.0);
        if lambda_sq / 2.0 <= CENTERING_TOL {
            return Centering::Converged(iters);
        }
        iters += 1;
        let lambda = lambda_sq.sqrt();
        let mut step = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &*y - &dir * step;
            if pb.feasible(&trial) {
                *y = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Centering::Stalled(iters);
        }
    }
    // the last iterations did not reach the centering tolerance; close enough
    // only if the Newton decrement is small in absolute terms
    match pb.newton_system(y, t).and_then(|(g, h)| solve_spd(&h, &g).map(|d| g.dot(&d))) {
        Some(l) if l < 1e-3 => Centering::Converged(iters),
        _ => Centering::Stalled(iters),
    }
}

/// Solves the constrained identification problem on a reduced system.
pub fn solve_lmi(
    sys: &ReducedSystem,
    model: &RobotModel,
    priors: &[InertialParams],
    metric: &ParamMetric,
    config: &IdentifyConfig,
) -> Result<IdentificationSolution> {
    config.validate()?;
    let nb = model.n_links();
    if priors.len() != nb {
        return Err(Error::dim("prior blocks", nb, priors.len()));
    }
    if metric.n_links() != nb {
        return Err(Error::dim("metric blocks", nb, metric.n_links()));
    }
    if sys.n_phi != 10 * nb {
        return Err(Error::dim("system parameter columns", 10 * nb, sys.n_phi));
    }
    if metric.min_eigenvalue() <= 0.0 {
        return Err(Error::Validation("metric must be positive definite".into()));
    }
    let p = sys.n_vars();
    let n_phi = sys.n_phi;
    let d = &sys.scaling;
    let phi_hat = stack(priors);
    let gamma = config.gamma;
    let ridge = RIDGE * sys.rows_per_sample().max(1) as f64;

    // stacked least squares in y: data rows, prior rows, ridge rows
    let mut rows: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::new();
    rows.push((&sys.r * DMatrix::from_diagonal(d), sys.z.clone()));
    if gamma > 0.0 {
        let sg = gamma.sqrt();
        for (j, l) in metric.sqrt_factors().iter().enumerate() {
            let mut a = DMatrix::zeros(10, p);
            for c in 0..10 {
                for r in 0..10 {
                    a[(r, 10 * j + c)] = sg * l[(r, c)] * d[10 * j + c];
                }
            }
            let target = l * Vec10::from_column_slice(&phi_hat.as_slice()[10 * j..10 * j + 10]) * sg;
            rows.push((a, DVector::from_column_slice(target.as_slice())));
        }
    } else {
        let sr = ridge.sqrt();
        let mut a = DMatrix::zeros(n_phi, p);
        let mut b = DVector::zeros(n_phi);
        for i in 0..n_phi {
            a[(i, i)] = sr;
            b[i] = sr * phi_hat[i] / d[i];
        }
        rows.push((a, b));
    }
    if p > n_phi {
        let sr = ridge.sqrt();
        let mut a = DMatrix::zeros(p - n_phi, p);
        for i in n_phi..p {
            a[(i - n_phi, i)] = sr;
        }
        rows.push((a, DVector::zeros(p - n_phi)));
    }
    let m: usize = rows.iter().map(|(a, _)| a.nrows()).sum();
    let mut a_all = DMatrix::zeros(m, p);
    let mut b_all = DVector::zeros(m);
    let mut at = 0;
    for (a, b) in &rows {
        a_all.view_mut((at, 0), a.shape()).copy_from(a);
        b_all.rows_mut(at, b.len()).copy_from(b);
        at += a.nrows();
    }
    let h0 = a_all.transpose() * &a_all * 2.0;
    let g0 = -(a_all.transpose() * &b_all) * 2.0;
    let objective_y = |y: &DVector<f64>| (&a_all * y - &b_all).norm_squared() + sys.rss;

    let links: Vec<LinkConstraints> = model
        .links()
        .iter()
        .enumerate()
        .map(|(j, l)| LinkConstraints::new(&l.ellipsoid, &d.as_slice()[10 * j..10 * j + 10], config.epsilon))
        .collect();
    let pb = Problem {
        h0,
        g0,
        links,
        n_phi,
        n_vars: p,
    };

    let mut y = DVector::zeros(p);
    for (j, l) in model.links().iter().enumerate() {
        let start = interior_start(&priors[j], &l.ellipsoid, config.epsilon);
        for k in 0..10 {
            y[10 * j + k] = start.0[k] / d[10 * j + k];
        }
    }
    for i in n_phi..p {
        y[i] = 1e-2;
    }
    if !pb.feasible(&y) {
        return Err(Error::Solver("could not construct a strictly feasible starting point".into()));
    }

    let nu = pb.degree();
    let mut t = nu / objective_y(&y).max(1e-12);
    let mut iterations = 0;
    let mut status = SolverStatus::MaxIterations;
    let mut notes = Vec::new();
    let mut last_good = y.clone();
    loop {
        let budget = config.max_iterations.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        match center(&pb, &mut y, t, budget) {
            Centering::Converged(k) => {
                iterations += k;
                last_good = y.clone();
            }
            Centering::Stalled(k) => {
                iterations += k;
                if pb.feasible(&y) {
                    last_good = y.clone();
                }
                status = SolverStatus::Stalled;
                notes.push(format!("centering stalled at t = {t:.3e}"));
                break;
            }
        }
        let gap = nu / t;
        let f = objective_y(&y);
        if gap <= (config.tol_gap * f).max(config.tol_gap_abs) {
            status = SolverStatus::Optimal;
            break;
        }
        t *= OUTER_FACTOR;
    }
    let y = last_good;
    let x = y.component_mul(d);
    let (params, friction) = split_solution(&x, sys);
    let data_term = sys.data_term(&x);
    let delta = &x.rows(0, n_phi) - &phi_hat;
    let regularizer = gamma * metric.quadratic_form(delta.as_slice());
    Ok(IdentificationSolution {
        method: Method::Lmi,
        consistency: certify(model, &params, config),
        params,
        friction,
        objective: data_term + regularizer,
        data_term,
        regularizer,
        status,
        gap: nu / t,
        iterations,
        train_rmse: (data_term / sys.rows_per_sample().max(1) as f64).max(0.0).sqrt(),
        diagnostics: if notes.is_empty() {
            format!("barrier degree {nu}, final t = {t:.3e}")
        } else {
            notes.join("; ")
        },
    })
}
