//! The smoothed transport energy
//!
//! ```text
//! F(V) = eps^{-sigma1} h^2 sum_cells N(Vhat)^sigma
//!      + eps^{sigma2}  h^2/2 (|grad vx|^2 + |grad vy|^2)
//! ```
//!
//! where `N(x) = sqrt(|x|^2 + eps_s^2)` and `Vhat` is the face-to-center
//! interpolation. The concentration term rewards consolidating flux into
//! thin channels; the Dirichlet term keeps the problem smooth at scale
//! `eps`. As `eps -> 0` the minimizers concentrate on one-dimensional
//! networks whose cost per unit length scales like `theta^alpha` in the
//! carried mass `theta`, provided the exponents are balanced as in
//! [`exponents_for_alpha`].

use crate::config::SolverConfig;
use crate::grid::{face_gradient_energy, StaggeredField};
use crate::{Error, Result};

/// Exponent triple `(sigma, sigma1, sigma2)` for a given `alpha`.
///
/// Two balance conditions pin the choice up to a reparameterization of
/// `eps`. Writing the transverse profile of a channel of mass `theta`
/// and width `w`, the two energy contributions per unit length are
/// `A = eps^{-sigma1} theta^sigma w^{1-sigma}` and
/// `B = eps^{sigma2} theta^2 w^{-3}`. Optimizing over `w` yields a cost
/// `~ theta^alpha` exactly when `sigma (1+alpha) = 4 alpha - 2`, and the
/// `eps`-dependence of the prefactor cancels exactly when
/// `3 sigma1 = sigma2 (1 - sigma)`. We fix the gauge `sigma2 = 1`.
pub fn exponents_for_alpha(alpha: f64) -> Result<(f64, f64, f64)> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie strictly between 0.5 and 1, got {alpha}"
        )));
    }
    let sigma = (4.0 * alpha - 2.0) / (alpha + 1.0);
    let sigma2 = 1.0;
    let sigma1 = (1.0 - sigma) / 3.0;
    Ok((sigma, sigma1, sigma2))
}

/// `N(x) = sqrt(|x|^2 + eps_s^2)`: smooth everywhere, `>= eps_s`.
#[inline]
pub fn smooth_norm(x: f64, y: f64, eps_s: f64) -> f64 {
    (x * x + y * y + eps_s * eps_s).sqrt()
}

/// Evaluates `F(V)`.
pub fn objective(v: &StaggeredField, cfg: &SolverConfig) -> f64 {
    let geom = v.geometry();
    let m = geom.m();
    let h = geom.h();
    let eps = cfg.eps();

    let hat = v.interpolate_to_centers();
    let mut concentration = 0.0;
    for (x, y) in hat.xs.iter().zip(&hat.ys) {
        concentration += smooth_norm(*x, *y, cfg.eps_s).powf(cfg.sigma);
    }
    let dirichlet =
        face_gradient_energy(v.vx(), m + 1, m, h) + face_gradient_energy(v.vy(), m, m + 1, h);

    eps.powf(-cfg.sigma1) * h * h * concentration
        + eps.powf(cfg.sigma2) * h * h / 2.0 * dirichlet
}

/// Analytic gradient of [`objective`] with respect to the free (interior)
/// faces; boundary faces of the result are zero since they are fixed
/// parameters of the problem, not unknowns.
pub fn objective_gradient(v: &StaggeredField, cfg: &SolverConfig) -> StaggeredField {
    let geom = v.geometry();
    let m = geom.m();
    let h = geom.h();
    let eps = cfg.eps();
    let mut grad = StaggeredField::zeros(geom);

    // Concentration term. d/dV of N(Vhat)^sigma chains through the
    // two-point interpolation: each face gets half the weight of each of
    // its (at most two) adjacent cells.
    let hat = v.interpolate_to_centers();
    let c1 = eps.powf(-cfg.sigma1) * h * h;
    let es2 = cfg.eps_s * cfg.eps_s;
    let mut wx = vec![0.0; m * m];
    let mut wy = vec![0.0; m * m];
    for (k, (x, y)) in hat.xs.iter().zip(&hat.ys).enumerate() {
        let n2 = x * x + y * y + es2;
        let common = c1 * cfg.sigma * n2.powf(0.5 * cfg.sigma - 1.0);
        wx[k] = common * x;
        wy[k] = common * y;
    }
    {
        let gx = grad.vx_mut();
        for i in 1..m {
            let faces = i * m;
            let left = (i - 1) * m;
            for j in 0..m {
                gx[faces + j] = 0.5 * (wx[left + j] + wx[faces + j]);
            }
        }
        let gy = grad.vy_mut();
        for i in 0..m {
            let faces = i * (m + 1);
            let cells = i * m;
            for j in 1..m {
                gy[faces + j] = 0.5 * (wy[cells + j - 1] + wy[cells + j]);
            }
        }
    }

    // Dirichlet term: eps^{sigma2} * (h^2/2) * sum (d/h)^2 over stencils,
    // so each raw difference d contributes eps^{sigma2} * d to its two
    // endpoint faces with opposite signs.
    let c2 = eps.powf(cfg.sigma2);
    accumulate_dirichlet(grad.vx_mut(), v.vx(), m + 1, m, c2);
    accumulate_dirichlet(grad.vy_mut(), v.vy(), m, m + 1, c2);

    grad.zero_boundary();
    grad
}

fn accumulate_dirichlet(grad: &mut [f64], w: &[f64], n0: usize, n1: usize, c: f64) {
    for p in 0..n0 - 1 {
        let row = p * n1;
        let next = (p + 1) * n1;
        for q in 0..n1 {
            let d = c * (w[next + q] - w[row + q]);
            grad[next + q] += d;
            grad[row + q] -= d;
        }
    }
    for p in 0..n0 {
        let row = p * n1;
        for q in 0..n1 - 1 {
            let d = c * (w[row + q + 1] - w[row + q]);
            grad[row + q + 1] += d;
            grad[row + q] -= d;
        }
    }
}
