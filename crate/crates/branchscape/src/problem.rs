//! Discrete instance construction: the mollified point source and the
//! divergence box derived from it.
//!
//! The source is a smooth approximation of a unit Dirac mass, sampled at
//! cell centers and renormalized so that `sum delta * h^2 = 1` holds to
//! machine accuracy. The density constraint of the shape problem then
//! reads `delta - 1 <= div v <= delta`.

use crate::grid::{kahan_sum, CellField, GridGeometry};
use crate::projection::BoxBounds;
use crate::{Error, Result};

/// Shape of the mollifier bump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MollifierProfile {
    /// `exp(1 / (|x|^2/r^2 - 1))` inside the radius, zero outside.
    StandardBump,
    /// Gaussian with scale `r/3`, truncated at the radius.
    TruncatedGaussian,
}

/// A single mollified point source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub profile: MollifierProfile,
}

impl SourceSpec {
    /// Source at the origin.
    pub fn centered(radius: f64, profile: MollifierProfile) -> Self {
        SourceSpec { center: [0.0, 0.0], radius, profile }
    }
}

/// Samples the mollifier at cell centers and normalizes to unit discrete
/// mass. Errors when the radius is below one cell width (the source
/// would fall between samples).
pub fn mollified_dirac(spec: &SourceSpec, geom: GridGeometry) -> Result<CellField> {
    let h = geom.h();
    if spec.radius < h {
        return Err(Error::SourceTooNarrow { radius: spec.radius, h });
    }
    let m = geom.m();
    let r2 = spec.radius * spec.radius;
    let mut delta = CellField::zeros(geom);
    for i in 0..m {
        for j in 0..m {
            let c = geom.cell_center(i, j);
            let dx = c[0] - spec.center[0];
            let dy = c[1] - spec.center[1];
            let t2 = (dx * dx + dy * dy) / r2;
            if t2 >= 1.0 {
                continue;
            }
            let v = match spec.profile {
                MollifierProfile::StandardBump => (1.0 / (t2 - 1.0)).exp(),
                MollifierProfile::TruncatedGaussian => (-4.5 * t2).exp(),
            };
            delta.set(i, j, v);
        }
    }
    let raw_mass = kahan_sum(delta.values().iter().cloned());
    if raw_mass <= 0.0 {
        return Err(Error::SourceTooNarrow { radius: spec.radius, h });
    }
    let scale = 1.0 / (raw_mass * h * h);
    delta.values_mut().iter_mut().for_each(|v| *v *= scale);
    Ok(delta)
}

/// The shape problem's divergence box: `a = delta - 1`, `b = delta`.
pub fn make_bounds(delta: &CellField) -> BoxBounds {
    debug_assert!(delta.values().iter().all(|&v| v >= 0.0), "source must be nonnegative");
    let mut a = delta.clone();
    a.values_mut().iter_mut().for_each(|v| *v -= 1.0);
    BoxBounds::new(a, delta.clone())
}
