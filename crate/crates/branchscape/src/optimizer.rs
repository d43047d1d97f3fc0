//! Outer proximal L-BFGS descent: metric-twisted gradient steps followed
//! by metric projections onto the divergence box, with a backtracking
//! line search on the raw energy.

use crate::config::SolverConfig;
use crate::energy::{objective, objective_gradient};
use crate::grid::{CellField, GridGeometry, StaggeredField};
use crate::lbfgs::FieldHistory;
use crate::projection::{project, project_with_target, BoxBounds, ProjectionResult};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Step size floor relative to `tau0`; below this the line search is
/// declared stalled.
const TAU_MIN_FACTOR: f64 = 1e-12;

/// Armijo sufficient-decrease constant (only with `cfg.armijo`).
const ARMIJO_C1: f64 = 1e-4;

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Relative energy change dropped below `tol`.
    Converged,
    /// The line search could not decrease the energy any further.
    Stalled,
    /// The outer iteration cap was reached.
    IterationCap,
}

/// Per-run record: one entry per accepted outer iteration.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Energy of the initial (projected) iterate.
    pub initial_energy: f64,
    /// Energy after each accepted iteration; strictly decreasing.
    pub energies: Vec<f64>,
    /// Accepted step size per iteration.
    pub step_sizes: Vec<f64>,
    /// Whether the accepted projection converged, per iteration.
    pub projection_flags: Vec<bool>,
    /// Max divergence-box violation of the accepted iterate.
    pub violations: Vec<f64>,
    /// Last relative energy change.
    pub final_error: f64,
    /// Accepted outer iterations.
    pub iterations: usize,
    pub status: SolveStatus,
    /// Violation of the returned (polished) field.
    pub final_violation: f64,
    /// Whether the final feasibility polish met its target.
    pub polish_converged: bool,
}

impl RunReport {
    /// Energy of the returned iterate.
    pub fn final_energy(&self) -> f64 {
        *self.energies.last().unwrap_or(&self.initial_energy)
    }
}

/// Random initial field: uniform in `[-0.01, 0.01]` on free faces, drawn
/// in a fixed order from a counter-based generator, so a seed pins the
/// run bit-for-bit.
pub fn initial_field(geom: GridGeometry, seed: u64) -> StaggeredField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = geom.m();
    let mut v = StaggeredField::zeros(geom);
    for i in 1..m {
        for j in 0..m {
            v.set_vx(i, j, rng.gen_range(-0.01..0.01));
        }
    }
    for i in 0..m {
        for j in 1..m {
            v.set_vy(i, j, rng.gen_range(-0.01..0.01));
        }
    }
    v
}

/// Minimizes `F` over the divergence box `a = delta - 1 <= div v <= b =
/// delta` starting from `v0` (projected first if infeasible). Returns
/// the last accepted iterate, feasibility-polished, with the report.
pub fn solve(cfg: &SolverConfig, v0: &StaggeredField, delta: &CellField) -> (StaggeredField, RunReport) {
    let mut a = delta.clone();
    a.values_mut().iter_mut().for_each(|v| *v -= 1.0);
    let bounds = BoxBounds::new(a, delta.clone());
    solve_bounded(cfg, v0, &bounds)
}

/// [`solve`] against arbitrary bounds (used directly by tests that pin
/// the divergence exactly).
pub fn solve_bounded(
    cfg: &SolverConfig,
    v0: &StaggeredField,
    bounds: &BoxBounds,
) -> (StaggeredField, RunReport) {
    let geom = v0.geometry();
    let mut history = FieldHistory::new(cfg.history);

    // Start from a feasible point: the descent test below compares
    // against the current energy, which only makes sense once the
    // iterate already satisfies the constraints.
    let init = project(v0, &CellField::zeros(geom), bounds, &history, cfg);
    let mut v = init.field;
    let mut u = init.potential;

    let mut f_current = objective(&v, cfg);
    let mut grad = objective_gradient(&v, cfg);

    let mut report = RunReport {
        initial_energy: f_current,
        energies: Vec::new(),
        step_sizes: Vec::new(),
        projection_flags: Vec::new(),
        violations: Vec::new(),
        final_error: f64::INFINITY,
        iterations: 0,
        status: SolveStatus::IterationCap,
        final_violation: init.max_violation,
        polish_converged: true,
    };

    let tau_min = TAU_MIN_FACTOR * cfg.tau0;

    'outer: while report.iterations < cfg.max_iter {
        let direction = history.multiply(&grad);

        let mut tau = cfg.tau0;
        let accepted: ProjectionResult;
        let f_new: f64;
        loop {
            let mut trial_point = v.clone();
            trial_point.add_scaled(-tau, &direction);
            let trial = project(&trial_point, &u, bounds, &history, cfg);
            u = trial.potential.clone();

            let f_trial = objective(&trial.field, cfg);
            let enough = if cfg.armijo {
                let mut step = trial.field.clone();
                step.add_scaled(-1.0, &v);
                f_trial <= f_current + ARMIJO_C1 * grad.dot(&step)
            } else {
                f_trial < f_current
            };
            if enough && f_trial < f_current {
                accepted = trial;
                f_new = f_trial;
                break;
            }
            tau *= 0.5;
            if tau < tau_min {
                report.status = SolveStatus::Stalled;
                break 'outer;
            }
        }

        let grad_new = objective_gradient(&accepted.field, cfg);
        let mut z = accepted.field.clone();
        z.add_scaled(-1.0, &v);
        let mut y = grad_new.clone();
        y.add_scaled(-1.0, &grad);
        history.update(z, y);

        v = accepted.field;
        grad = grad_new;
        report.iterations += 1;
        report.energies.push(f_new);
        report.step_sizes.push(tau);
        report.projection_flags.push(accepted.converged);
        report.violations.push(accepted.max_violation);
        report.final_violation = accepted.max_violation;

        report.final_error = (f_current - f_new) / f_current.abs().max(f64::MIN_POSITIVE);
        f_current = f_new;
        if report.final_error < cfg.tol {
            report.status = SolveStatus::Converged;
            break;
        }
    }

    // Feasibility polish: the returned iterate must satisfy the box to
    // 10 * tol_p regardless of how tightly the in-loop projections were
    // run. Aim slightly below the contract to leave rounding headroom.
    let target = 9.0 * cfg.tol_p;
    if report.final_violation > target {
        let polish = project_with_target(&v, &u, bounds, &history, cfg, Some(target));
        report.polish_converged = polish.converged;
        report.final_violation = polish.max_violation;
        v = polish.field;
    }

    (v, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::objective;
    use crate::problem::{mollified_dirac, SourceSpec};

    fn small_config(alpha: f64, m: usize) -> SolverConfig {
        let mut cfg = SolverConfig::new(alpha, m).unwrap();
        cfg.max_iter = 300;
        cfg.tol = 1e-7;
        cfg
    }

    #[test]
    fn pinned_divergence_recovers_the_zero_field() {
        // a = b = 0 forces div v = 0; the energy minimizer over
        // divergence-free fields is v = 0.
        let cfg = small_config(0.75, 8);
        let geom = GridGeometry::new(cfg.m);
        let zero = CellField::zeros(geom);
        let bounds = BoxBounds::new(zero.clone(), zero.clone());

        let v0 = initial_field(geom, 3);
        let (v, report) = solve_bounded(&cfg, &v0, &bounds);

        let f_floor = objective(&StaggeredField::zeros(geom), &cfg);
        let f_final = report.final_energy();
        assert!(
            f_final <= f_floor * (1.0 + 1e-3),
            "final {f_final} floor {f_floor}"
        );
        let div = v.divergence();
        assert!(div.values().iter().all(|&d| d.abs() <= 10.0 * cfg.tol_p));
    }

    #[test]
    fn energies_decrease_and_iterate_stays_feasible() {
        let mut cfg = small_config(0.75, 16);
        cfg.max_iter = 120;
        let geom = GridGeometry::new(cfg.m);
        let spec = SourceSpec::centered(cfg.source_radius(), cfg.source_profile);
        let delta = mollified_dirac(&spec, geom).unwrap();

        let v0 = initial_field(geom, cfg.seed);
        let (v, report) = solve(&cfg, &v0, &delta);

        assert!(!report.energies.is_empty());
        for pair in report.energies.windows(2) {
            assert!(pair[1] < pair[0], "energies not strictly decreasing: {pair:?}");
        }
        assert!(report.energies[0] < report.initial_energy);
        assert!(report.final_violation <= 10.0 * cfg.tol_p, "violation {}", report.final_violation);

        // density stays in [0,1] up to the projection tolerance
        let mut nu = delta.clone();
        nu.add_scaled(-1.0, &v.divergence());
        let lo = nu.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = nu.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= -10.0 * cfg.tol_p * delta.values().iter().cloned().fold(0.0, f64::max));
        assert!(hi <= 1.0 + 10.0 * cfg.tol_p * delta.values().iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn restarting_from_the_output_is_a_fixed_point() {
        let mut cfg = small_config(0.8, 12);
        cfg.max_iter = 150;
        let geom = GridGeometry::new(cfg.m);
        let spec = SourceSpec::centered(cfg.source_radius(), cfg.source_profile);
        let delta = mollified_dirac(&spec, geom).unwrap();

        let v0 = initial_field(geom, 1);
        let (v1, r1) = solve(&cfg, &v0, &delta);
        let (_, r2) = solve(&cfg, &v1, &delta);

        let f1 = r1.final_energy();
        let f2 = r2.final_energy();
        assert!(
            (f1 - f2).abs() <= cfg.tol * f1.abs().max(1.0) * 10.0,
            "restart moved energy from {f1} to {f2}"
        );
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let mut cfg = small_config(0.75, 12);
        cfg.max_iter = 25;
        let geom = GridGeometry::new(cfg.m);
        let spec = SourceSpec::centered(cfg.source_radius(), cfg.source_profile);
        let delta = mollified_dirac(&spec, geom).unwrap();

        let (va, ra) = solve(&cfg, &initial_field(geom, 42), &delta);
        let (vb, rb) = solve(&cfg, &initial_field(geom, 42), &delta);
        assert_eq!(va, vb);
        assert_eq!(ra.energies, rb.energies);
        assert_eq!(ra.step_sizes, rb.step_sizes);
    }
}
