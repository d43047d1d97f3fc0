//! Projection onto the divergence box `C = {a <= div v <= b}` in the
//! metric norm `|.|_H`, computed on the Fenchel dual.
//!
//! The primal problem `min 1/2 |v - v0|_H^2 over C` dualizes to the
//! composite problem over a cell potential `u`
//!
//! ```text
//! min_u  f(u) + g(u),   f(u) = 1/2 <H^{-1} grad u, grad u> - <u, div v0>,
//!                       g(u) = sum b u_+ - sum a u_-,
//! ```
//!
//! with `grad f(u) = -div(H^{-1} grad u) - div v0` and and an elementary
//! prox for `g`. There is no duality gap, and the primal solution is
//! recovered as `v = v0 + H^{-1} grad u`. FISTA on the dual then only
//! ever needs gradients, divergences and the two-loop product.

use crate::config::SolverConfig;
use crate::grid::{CellField, StaggeredField};
use crate::lbfgs::FieldHistory;

/// Cellwise bounds `a <= div v <= b`; for the shape problem
/// `a = delta - 1` and `b = delta`.
#[derive(Debug, Clone)]
pub struct BoxBounds {
    pub a: CellField,
    pub b: CellField,
}

impl BoxBounds {
    /// Panics unless `a <= b` cellwise on matching geometry.
    pub fn new(a: CellField, b: CellField) -> Self {
        assert_eq!(a.geometry(), b.geometry(), "bounds geometry mismatch");
        assert!(
            a.values().iter().zip(b.values()).all(|(x, y)| x <= y),
            "lower bound exceeds upper bound"
        );
        BoxBounds { a, b }
    }

    /// Largest cellwise violation of `[a, b]` by `w`; zero when feasible.
    pub fn max_violation(&self, w: &CellField) -> f64 {
        let mut worst = 0.0_f64;
        for ((&v, &a), &b) in w.values().iter().zip(self.a.values()).zip(self.b.values()) {
            worst = worst.max(a - v).max(v - b);
        }
        worst.max(0.0)
    }
}

/// Momentum state of the FISTA iteration.
#[derive(Debug, Clone)]
pub struct FistaState {
    pub t: f64,
    pub u: CellField,
    pub u_old: CellField,
}

impl FistaState {
    pub fn new(u0: CellField) -> Self {
        FistaState { t: 1.0, u: u0.clone(), u_old: u0 }
    }

    /// Advances `t` and returns the extrapolation weight `s`; the first
    /// call returns `s = 0`.
    pub fn advance_momentum(&mut self) -> f64 {
        let (t, s) = fista_momentum(self.t);
        self.t = t;
        s
    }
}

/// One step of the momentum recursion:
/// `t_new = (1 + sqrt(1 + 4 t^2)) / 2`, `s = (t - 1) / t_new`.
pub fn fista_momentum(t: f64) -> (f64, f64) {
    debug_assert!(t >= 1.0);
    let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
    (t_new, (t - 1.0) / t_new)
}

/// Prox of `tau * g`: cellwise shrinkage towards the dead zone
/// `[tau a, tau b]`.
pub fn prox_g(u: &CellField, bounds: &BoxBounds, tau: f64) -> CellField {
    assert!(tau > 0.0, "prox step must be positive, got {tau}");
    let mut out = u.clone();
    for ((v, &a), &b) in out
        .values_mut()
        .iter_mut()
        .zip(bounds.a.values())
        .zip(bounds.b.values())
    {
        let lo = tau * a;
        let hi = tau * b;
        *v = if *v < lo {
            *v - lo
        } else if *v > hi {
            *v - hi
        } else {
            0.0
        };
    }
    out
}

/// Dual objective `f(u) + g(u)`; at the dual optimum this is the
/// negative of the primal value, so their sum is the duality gap.
pub fn dual_objective(
    u: &CellField,
    v0: &StaggeredField,
    metric: &FieldHistory,
    bounds: &BoxBounds,
) -> f64 {
    let grad_u = u.gradient();
    let h_grad = metric.multiply(&grad_u);
    let f = 0.5 * h_grad.dot(&grad_u) - u.dot(&v0.divergence());
    let mut g = 0.0;
    for ((&v, &a), &b) in u.values().iter().zip(bounds.a.values()).zip(bounds.b.values()) {
        g += if v > 0.0 { b * v } else { a * v };
    }
    f + g
}

/// Outcome of a projection call.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// The projected field `v0 + H^{-1} grad u`.
    pub field: StaggeredField,
    /// Final dual potential, kept warm for the next projection.
    pub potential: CellField,
    /// FISTA iterations spent.
    pub iterations: usize,
    /// False when the iteration cap was hit before the tolerance; the
    /// caller decides whether to accept the step anyway.
    pub converged: bool,
    /// Largest cellwise violation of the divergence box at exit.
    pub max_violation: f64,
}

/// Projects `v0` onto `C` in the `H`-norm, warm-starting from `u0`.
///
/// The iteration runs until the relative change
/// `|u - u_old| / max(|u|, 1)` of the dual potential drops below
/// `cfg.tol_p` *and* the recovered field satisfies the box to
/// `10 tol_p max(|a|, |b|, 1)` — the constraint tolerance the caller is
/// promised, scaled by the bound magnitude because the dual potential
/// only resolves the constraints to its own precision.
pub fn project(
    v0: &StaggeredField,
    u0: &CellField,
    bounds: &BoxBounds,
    metric: &FieldHistory,
    cfg: &SolverConfig,
) -> ProjectionResult {
    project_with_target(v0, u0, bounds, metric, cfg, None)
}

/// [`project`] with an explicit feasibility target (used for the final
/// polish of a run); `None` uses the default target above.
///
/// The step starts at `cfg.tau_p / s_H` — the inverse of the Lipschitz
/// bound `|H^{-1}| |div|^2 <= s_H * 8/h^2` when the metric scaling
/// `s_H` is a fair norm estimate — and backtracks whenever the smooth
/// part overshoots its quadratic model, which guards against histories
/// whose two-loop corrections push `|H^{-1}|` past `s_H`.
pub fn project_with_target(
    v0: &StaggeredField,
    u0: &CellField,
    bounds: &BoxBounds,
    metric: &FieldHistory,
    cfg: &SolverConfig,
    violation_target: Option<f64>,
) -> ProjectionResult {
    let mut tau = cfg.tau_p / metric.scaling();
    let d0 = v0.divergence();

    let bound_scale = bounds
        .a
        .values()
        .iter()
        .chain(bounds.b.values())
        .fold(1.0_f64, |acc, &v| acc.max(v.abs()));
    let target = violation_target.unwrap_or(10.0 * cfg.tol_p * bound_scale);

    // The metric is fixed for the whole call and the two-loop product is
    // linear, so the flow H^{-1} grad u of the extrapolated point can be
    // formed from the stored flows of the last two iterates; the one
    // genuine multiply per iteration is spent on the accepted candidate.
    let mut state = FistaState::new(u0.clone());
    let mut grad_u = state.u.gradient();
    let mut flow_u = metric.multiply(&grad_u);
    let mut grad_old = grad_u.clone();
    let mut flow_old = flow_u.clone();

    let f_value = |cell: &CellField, flow: &StaggeredField, grad: &StaggeredField| -> f64 {
        0.5 * flow.dot(grad) - cell.dot(&d0)
    };

    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_proj_iter {
        iterations += 1;
        let s = state.advance_momentum();

        // extrapolated point and its (linearity-extrapolated) flow
        let mut u_tilde = state.u.clone();
        let mut grad_tilde = grad_u.clone();
        let mut flow_tilde = flow_u.clone();
        if s != 0.0 {
            u_tilde.scale(1.0 + s);
            u_tilde.add_scaled(-s, &state.u_old);
            grad_tilde.scale(1.0 + s);
            grad_tilde.add_scaled(-s, &grad_old);
            flow_tilde.scale(1.0 + s);
            flow_tilde.add_scaled(-s, &flow_old);
        }
        let f_tilde = f_value(&u_tilde, &flow_tilde, &grad_tilde);
        // descent direction -grad f(u_tilde) = div(flow) + div v0
        let mut dir = flow_tilde.divergence();
        dir.add_scaled(1.0, &d0);

        // gradient step + prox, backtracking on the quadratic model
        let (cand, grad_cand, flow_cand);
        loop {
            let mut stepped = u_tilde.clone();
            stepped.add_scaled(tau, &dir);
            let c = prox_g(&stepped, bounds, tau);
            let g = c.gradient();
            let fl = metric.multiply(&g);
            let f_cand = f_value(&c, &fl, &g);

            let mut d = c.clone();
            d.add_scaled(-1.0, &u_tilde);
            let model = f_tilde - dir.dot(&d) + d.dot(&d) / (2.0 * tau);
            if f_cand <= model + 1e-12 * (1.0 + f_tilde.abs()) || tau < 1e-300 {
                cand = c;
                grad_cand = g;
                flow_cand = fl;
                break;
            }
            tau *= 0.5;
        }

        state.u_old = std::mem::replace(&mut state.u, cand);
        grad_old = std::mem::replace(&mut grad_u, grad_cand);
        flow_old = std::mem::replace(&mut flow_u, flow_cand);

        let mut diff = state.u.clone();
        diff.add_scaled(-1.0, &state.u_old);
        let err = diff.norm() / state.u.norm().max(1.0);
        if err < cfg.tol_p {
            let mut v = flow_u.clone();
            v.add_scaled(1.0, v0);
            if bounds.max_violation(&v.divergence()) > target {
                continue;
            }
            converged = true;
            break;
        }
    }

    let mut field = flow_u;
    field.add_scaled(1.0, v0);
    let max_violation = bounds.max_violation(&field.divergence());
    ProjectionResult { field, potential: state.u, iterations, converged, max_violation }
}
