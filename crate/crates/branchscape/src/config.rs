//! Problem and algorithm parameters, with validation and a flat
//! `key = value` file format.

use crate::energy::exponents_for_alpha;
use crate::problem::MollifierProfile;
use crate::{Error, Result};

/// Everything a run needs: the problem (`alpha`, grid, source) and the
/// algorithm knobs (exponents, tolerances, step sizes, history length).
///
/// Build one with [`SolverConfig::new`], tweak public fields, then call
/// [`SolverConfig::validate`]. Lengths that scale with the grid (`eps`,
/// source radius, the dual step) are stored as multiples of the cell
/// width `h` so that overriding the grid size keeps them consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Concavity exponent of the transport cost, in `(1/2, 1)`.
    pub alpha: f64,
    /// Cells per side of the grid.
    pub m: usize,
    /// Phase-field scale as a multiple of `h` (`eps = eps_factor * h`).
    pub eps_factor: f64,
    /// Concentration exponent `sigma` of the `N(V)^sigma` term.
    pub sigma: f64,
    /// Exponent `sigma1` of the `eps^{-sigma1}` prefactor.
    pub sigma1: f64,
    /// Exponent `sigma2` of the `eps^{sigma2}` Dirichlet prefactor.
    pub sigma2: f64,
    /// Norm smoothing floor.
    pub eps_s: f64,
    /// Outer loop relative energy tolerance.
    pub tol: f64,
    /// Dual projection tolerance (relative change of the potential).
    pub tol_p: f64,
    /// Initial outer step, reset at each outer iteration.
    pub tau0: f64,
    /// Base dual step; the effective FISTA step is `tau_p / s_H` where
    /// `s_H` is the current metric scaling. Defaults to `h^2/8`, the
    /// inverse Lipschitz bound of the dual gradient for the identity
    /// metric.
    pub tau_p: f64,
    /// L-BFGS history length.
    pub history: usize,
    /// Outer iteration cap.
    pub max_iter: usize,
    /// FISTA iteration cap per projection.
    pub max_proj_iter: usize,
    /// Seed for the random initial field.
    pub seed: u64,
    /// Source mollifier radius as a multiple of `h`.
    pub source_radius_factor: f64,
    /// Source mollifier profile.
    pub source_profile: MollifierProfile,
    /// Density threshold for shape extraction.
    pub threshold: f64,
    /// Use Armijo sufficient decrease instead of simple decrease.
    pub armijo: bool,
}

impl SolverConfig {
    /// Defaults for a given `alpha` and grid size; exponents are derived
    /// from `alpha`. Errors if `alpha` is outside `(1/2, 1)`.
    pub fn new(alpha: f64, m: usize) -> Result<Self> {
        let (sigma, sigma1, sigma2) = exponents_for_alpha(alpha)?;
        let h = 2.0 / m as f64;
        let cfg = SolverConfig {
            alpha,
            m,
            eps_factor: 3.0,
            sigma,
            sigma1,
            sigma2,
            eps_s: 1e-4,
            tol: 1e-6,
            tol_p: 1e-8,
            tau0: 1.0,
            tau_p: h * h / 8.0,
            history: 10,
            max_iter: 20_000,
            max_proj_iter: 50_000,
            seed: 0,
            source_radius_factor: 3.0,
            source_profile: MollifierProfile::StandardBump,
            threshold: 0.5,
            armijo: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cell width `2/M`.
    pub fn h(&self) -> f64 {
        2.0 / self.m as f64
    }

    /// Phase-field scale `eps = eps_factor * h`.
    pub fn eps(&self) -> f64 {
        self.eps_factor * self.h()
    }

    /// Source mollifier radius in length units.
    pub fn source_radius(&self) -> f64 {
        self.source_radius_factor * self.h()
    }

    /// Re-derive `(sigma, sigma1, sigma2)` from the current `alpha`.
    pub fn rederive_exponents(&mut self) -> Result<()> {
        let (sigma, sigma1, sigma2) = exponents_for_alpha(self.alpha)?;
        self.sigma = sigma;
        self.sigma1 = sigma1;
        self.sigma2 = sigma2;
        Ok(())
    }

    /// Checks every range constraint; call after editing fields.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie strictly between 0.5 and 1, got {}",
                self.alpha
            )));
        }
        if self.m < 8 {
            return Err(Error::InvalidConfig(format!(
                "grid size must be at least 8, got {}",
                self.m
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        for (name, v) in [
            ("eps_factor", self.eps_factor),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("eps_s", self.eps_s),
            ("tol", self.tol),
            ("tol_p", self.tol_p),
            ("tau0", self.tau0),
            ("tau_p", self.tau_p),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.history == 0 {
            return Err(Error::InvalidConfig("history length must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.source_radius_factor < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "source radius must be at least one cell (factor >= 1), got factor {}",
                self.source_radius_factor
            )));
        }
        Ok(())
    }

    /// Applies one `key = value` assignment (the config file grammar).
    /// Unknown keys are a hard error naming the key.
    pub fn apply_key_value(&mut self, key: &str, value: &str) -> Result<()> {
        fn f(value: &str, key: &str) -> Result<f64> {
            value
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: expected a number, got '{value}'")))
        }
        fn n(value: &str, key: &str) -> Result<usize> {
            value
                .parse()
                .map_err(|_| Error::Parse(format!("{key}: expected an integer, got '{value}'")))
        }
        match key {
            "alpha" => {
                self.alpha = f(value, key)?;
                self.rederive_exponents()?;
            }
            "grid_size" => self.m = n(value, key)?,
            "eps_factor" => self.eps_factor = f(value, key)?,
            "sigma" => self.sigma = f(value, key)?,
            "sigma1" => self.sigma1 = f(value, key)?,
            "sigma2" => self.sigma2 = f(value, key)?,
            "eps_s" => self.eps_s = f(value, key)?,
            "tol" => self.tol = f(value, key)?,
            "tol_p" => self.tol_p = f(value, key)?,
            "tau0" => self.tau0 = f(value, key)?,
            "tau_p" => self.tau_p = f(value, key)?,
            "history" => self.history = n(value, key)?,
            "max_iter" => self.max_iter = n(value, key)?,
            "max_proj_iter" => self.max_proj_iter = n(value, key)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("seed: expected an integer, got '{value}'")))?
            }
            "source_radius_factor" => self.source_radius_factor = f(value, key)?,
            "source_profile" => {
                self.source_profile = match value {
                    "bump" | "standard-bump" => MollifierProfile::StandardBump,
                    "gaussian" | "truncated-gaussian" => MollifierProfile::TruncatedGaussian,
                    other => {
                        return Err(Error::Parse(format!(
                            "source_profile: expected 'bump' or 'gaussian', got '{other}'"
                        )))
                    }
                }
            }
            "threshold" => self.threshold = f(value, key)?,
            "armijo" => {
                self.armijo = value.parse().map_err(|_| {
                    Error::Parse(format!("armijo: expected true/false, got '{value}'"))
                })?
            }
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parses a flat config file: one `key = value` per line, `#` starts
    /// a comment, blank lines ignored. The grid-derived defaults
    /// (`tau_p`) are refreshed if `grid_size` changes and `tau_p` was not
    /// itself set.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        let mut tau_p_set = false;
        let m_before = self.m;
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
            })?;
            let key = key.trim();
            if key == "tau_p" {
                tau_p_set = true;
            }
            self.apply_key_value(key, value.trim())?;
        }
        if self.m != m_before && !tau_p_set {
            let h = self.h();
            self.tau_p = h * h / 8.0;
        }
        Ok(())
    }

    /// Echoes every field in config file syntax (used by the manifest).
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        vec![
            ("alpha".into(), format!("{}", self.alpha)),
            ("grid_size".into(), format!("{}", self.m)),
            ("eps_factor".into(), format!("{}", self.eps_factor)),
            ("sigma".into(), format!("{}", self.sigma)),
            ("sigma1".into(), format!("{}", self.sigma1)),
            ("sigma2".into(), format!("{}", self.sigma2)),
            ("eps_s".into(), format!("{}", self.eps_s)),
            ("tol".into(), format!("{}", self.tol)),
            ("tol_p".into(), format!("{}", self.tol_p)),
            ("tau0".into(), format!("{}", self.tau0)),
            ("tau_p".into(), format!("{}", self.tau_p)),
            ("history".into(), format!("{}", self.history)),
            ("max_iter".into(), format!("{}", self.max_iter)),
            ("max_proj_iter".into(), format!("{}", self.max_proj_iter)),
            ("seed".into(), format!("{}", self.seed)),
            ("source_radius_factor".into(), format!("{}", self.source_radius_factor)),
            (
                "source_profile".into(),
                match self.source_profile {
                    MollifierProfile::StandardBump => "bump".into(),
                    MollifierProfile::TruncatedGaussian => "gaussian".into(),
                },
            ),
            ("threshold".into(), format!("{}", self.threshold)),
            ("armijo".into(), format!("{}", self.armijo)),
        ]
    }
}
