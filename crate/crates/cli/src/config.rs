//! Scenario files. Parsing is strict: an unknown key anywhere is an error.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use lagrangeflow_core::flux::RawFlux;
use lagrangeflow_core::systems::PressureLaw;
use lagrangeflow_core::{Boundary, GridFunction};
use serde::Deserialize;

use crate::RunError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub pipeline: Pipeline,
    #[serde(default)]
    pub flux: Option<FluxConfig>,
    #[serde(default)]
    pub pressure: Option<PressureConfig>,
    /// Density profile, in the coordinates of the raw flux.
    #[serde(default)]
    pub initial: Option<Profile>,
    /// Initial particle velocity for the systems pipelines.
    #[serde(default)]
    pub velocity: Option<Profile>,
    /// Raw density range the flux is normalised on; defaults to the range of `initial`.
    #[serde(default)]
    pub data_range: Option<[f64; 2]>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub t_final: Option<Horizon>,
    /// Extra output times inside `[0, t_final]`.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Number of uniform time intervals for pipelines that need a space-time map.
    #[serde(default)]
    pub time_levels: Option<usize>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub shift_l: Option<f64>,
    #[serde(default)]
    pub shift_k: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_cfl() -> f64 {
    lagrangeflow_core::eulerian::DEFAULT_CFL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Eulerian,
    Temple,
    Correspondence,
    Variational,
    Gas,
    Nlwe,
    MetricRoundtrip,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Eulerian => "eulerian",
            Pipeline::Temple => "temple",
            Pipeline::Correspondence => "correspondence",
            Pipeline::Variational => "variational",
            Pipeline::Gas => "gas",
            Pipeline::Nlwe => "nlwe",
            Pipeline::MetricRoundtrip => "metric-roundtrip",
        }
    }

    fn is_system(self) -> bool {
        matches!(self, Pipeline::Gas | Pipeline::Nlwe)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FluxConfig {
    Burgers,
    Cubic,
    Lwr { v_max: f64, rho_max: f64 },
    /// Coefficients in increasing degree.
    Polynomial { coeffs: Vec<f64> },
}

impl FluxConfig {
    pub fn raw(&self) -> RawFlux {
        match self {
            FluxConfig::Burgers => RawFlux::burgers(),
            FluxConfig::Cubic => RawFlux::cubic(),
            FluxConfig::Lwr { v_max, rho_max } => RawFlux::lwr(*v_max, *rho_max),
            FluxConfig::Polynomial { coeffs } => RawFlux::polynomial(coeffs.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PressureConfig {
    /// `p(ρ) = κρ^α`.
    Power { kappa: f64, alpha: f64 },
}

impl PressureConfig {
    pub fn law(&self) -> PressureLaw {
        match self {
            PressureConfig::Power { kappa, alpha } => PressureLaw::power(*kappa, *alpha),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, PressureConfig::Power { alpha, .. } if *alpha == 1.0)
    }

    pub fn kappa(&self) -> f64 {
        match self {
            PressureConfig::Power { kappa, .. } => *kappa,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `left` for `x < at`, `right` otherwise.
    Riemann {
        left: f64,
        right: f64,
        #[serde(default)]
        at: f64,
    },
    /// `mean + amplitude·sin(2π·periods·(x − a)/(b − a))` on the domain `[a, b]`.
    Sine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "one")]
        periods: f64,
        #[serde(default)]
        cosine: bool,
    },
    /// `base + height·cos²(π(x − center)/(2·width))` for `|x − center| < width`.
    Bump {
        base: f64,
        height: f64,
        center: f64,
        width: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn eval(&self, x: f64, domain: [f64; 2]) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Riemann { left, right, at } => {
                if x < at {
                    left
                } else {
                    right
                }
            }
            Profile::Sine {
                mean,
                amplitude,
                periods,
                cosine,
            } => {
                let phase = 2.0 * PI * periods * (x - domain[0]) / (domain[1] - domain[0]);
                mean + amplitude * if cosine { phase.cos() } else { phase.sin() }
            }
            Profile::Bump {
                base,
                height,
                center,
                width,
            } => {
                let s = (x - center) / width;
                if s.abs() < 1.0 {
                    base + height * (0.5 * PI * s).cos().powi(2)
                } else {
                    base
                }
            }
        }
    }

    /// Exact range of values taken by the profile.
    pub fn range(&self) -> [f64; 2] {
        let sorted = |a: f64, b: f64| [a.min(b), a.max(b)];
        match *self {
            Profile::Constant { value } => [value, value],
            Profile::Riemann { left, right, .. } => sorted(left, right),
            Profile::Sine { mean, amplitude, .. } => sorted(mean - amplitude, mean + amplitude),
            Profile::Bump { base, height, .. } => sorted(base, base + height),
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, Profile::Riemann { .. })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub domain: [f64; 2],
    pub boundary: BoundaryConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryConfig {
    Periodic,
    ConstantExtension,
}

impl GridConfig {
    pub fn boundary(&self) -> Boundary {
        match self.boundary {
            BoundaryConfig::Periodic => Boundary::Periodic,
            BoundaryConfig::ConstantExtension => Boundary::ConstantExtension,
        }
    }

    /// Cell-centre samples of `profile` on `n` cells.
    pub fn sample(&self, profile: &Profile, n: usize) -> Result<GridFunction, RunError> {
        let d = self.domain;
        Ok(GridFunction::from_fn(n, d[0], d[1], self.boundary(), |x| profile.eval(x, d))?)
    }
}

/// Final time, absolute or as a fraction of the smooth breakdown time.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Absolute(f64),
    Breakdown(BreakdownFraction),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakdownFraction {
    pub breakdown_fraction: f64,
}

/// Bounds of the report checks; each falls back to the documented default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub mass_drift: Option<f64>,
    pub tv_increase: Option<f64>,
    pub max_principle: Option<f64>,
    pub oracle_l1_per_dx: Option<f64>,
    pub l1_error: Option<f64>,
    pub refinement_ratio: Option<f64>,
    pub shock_cells: Option<f64>,
    pub extremality_ratio: Option<f64>,
    pub conserved_order: Option<f64>,
    pub el_ratio: Option<f64>,
    pub hyperbolicity: Option<f64>,
    pub dalembert_l2: Option<f64>,
    pub roundtrip: Option<f64>,
}

pub const MIN_CELLS: usize = 16;

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            RunError::Config(msg) => RunError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn validate(&self) -> Result<(), RunError> {
        let bad = |msg: String| Err(RunError::Config(msg));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad(format!("scenario name {:?} is not a plain file name", self.name));
        }
        if !(self.cfl > 0.0 && self.cfl <= lagrangeflow_core::eulerian::MAX_CFL) {
            return bad(format!("cfl = {} outside (0, {}]", self.cfl, lagrangeflow_core::eulerian::MAX_CFL));
        }
        if let Some(r) = self.data_range {
            if !(r[0] < r[1]) {
                return bad(format!("data_range [{}, {}] is empty", r[0], r[1]));
            }
        }
        if self.pipeline == Pipeline::MetricRoundtrip {
            if self.flux.is_none() {
                return bad("pipeline metric-roundtrip needs `flux`".into());
            }
            if self.data_range.is_none() && self.initial.is_none() {
                return bad("pipeline metric-roundtrip needs `data_range` or `initial`".into());
            }
            return Ok(());
        }
        let Some(grid) = &self.grid else {
            return bad(format!("pipeline {} needs `grid`", self.pipeline.name()));
        };
        if grid.n < MIN_CELLS {
            return bad(format!("grid.n = {} is below the minimum of {MIN_CELLS}", grid.n));
        }
        if !(grid.domain[0] < grid.domain[1]) || !grid.domain.iter().all(|d| d.is_finite()) {
            return bad(format!("grid.domain [{}, {}] is empty", grid.domain[0], grid.domain[1]));
        }
        if self.initial.is_none() {
            return bad(format!("pipeline {} needs `initial`", self.pipeline.name()));
        }
        match self.t_final {
            None => return bad("`t_final` is required".into()),
            Some(Horizon::Absolute(t)) if !(t > 0.0 && t.is_finite()) => {
                return bad(format!("t_final = {t} must be positive"));
            }
            Some(Horizon::Breakdown(BreakdownFraction { breakdown_fraction: f }))
                if !(f > 0.0 && f < 1.0) =>
            {
                return bad(format!("breakdown_fraction = {f} must lie in (0, 1)"));
            }
            Some(Horizon::Breakdown(_)) if self.pipeline.is_system() => {
                return bad("systems pipelines need an absolute t_final".into());
            }
            _ => {}
        }
        if let Some(t) = self.times.iter().find(|t| !(**t >= 0.0)) {
            return bad(format!("output time {t} is negative"));
        }
        if let Some(Horizon::Absolute(t_final)) = self.t_final {
            if let Some(t) = self.times.iter().find(|t| **t > t_final) {
                return bad(format!("output time {t} is after t_final = {t_final}"));
            }
        }
        if let Some(m) = self.time_levels {
            if m < 2 {
                return bad(format!("time_levels = {m} must be at least 2"));
            }
        }
        if self.pipeline.is_system() {
            if self.pressure.is_none() {
                return bad(format!("pipeline {} needs `pressure`", self.pipeline.name()));
            }
            if self.flux.is_some() {
                return bad(format!("pipeline {} takes `pressure`, not `flux`", self.pipeline.name()));
            }
        } else {
            if self.flux.is_none() {
                return bad(format!("pipeline {} needs `flux`", self.pipeline.name()));
            }
            if self.pressure.is_some() || self.velocity.is_some() {
                return bad(format!(
                    "`pressure` and `velocity` apply only to the gas and nlwe pipelines, not {}",
                    self.pipeline.name()
                ));
            }
        }
        if matches!(self.pipeline, Pipeline::Variational | Pipeline::Gas | Pipeline::Nlwe)
            && grid.boundary != BoundaryConfig::Periodic
        {
            return bad(format!("pipeline {} runs on periodic grids only", self.pipeline.name()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "demo",
        "pipeline": "correspondence",
        "flux": {"kind": "burgers"},
        "initial": {"profile": "riemann", "left": 2, "right": 1},
        "grid": {"n": 64, "domain": [-1, 2], "boundary": "constant-extension"},
        "t_final": 0.5
    }"#;

    #[test]
    fn minimal_config_parses() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.pipeline, Pipeline::Correspondence);
        assert_eq!(s.cfl, 0.45);
    }

    #[test]
    fn small_grid_is_rejected() {
        let text = MINIMAL.replace("\"n\": 64", "\"n\": 8");
        let err = Scenario::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("grid.n = 8"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        let top = MINIMAL.replace("\"flux\"", "\"fluxx\"");
        assert!(Scenario::from_json(&top).unwrap_err().to_string().contains("fluxx"));
        let nested = MINIMAL.replace("\"left\": 2", "\"left\": 2, \"lft\": 3");
        assert!(Scenario::from_json(&nested).unwrap_err().to_string().contains("lft"));
        let tol = MINIMAL.replace("\"t_final\": 0.5", "\"t_final\": 0.5, \"tolerances\": {\"l1\": 1}");
        assert!(Scenario::from_json(&tol).unwrap_err().to_string().contains("l1"));
    }

    #[test]
    fn output_times_must_lie_in_the_horizon() {
        let text = MINIMAL.replace("\"t_final\": 0.5", "\"t_final\": 0.5, \"times\": [0.7]");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn breakdown_horizon_parses() {
        let text = MINIMAL.replace("\"t_final\": 0.5", "\"t_final\": {\"breakdown_fraction\": 0.5}");
        assert!(matches!(Scenario::from_json(&text).unwrap().t_final, Some(Horizon::Breakdown(_))));
    }

    #[test]
    fn profiles() {
        let d = [0.0, 1.0];
        let bump = Profile::Bump {
            base: 1.0,
            height: 2.0,
            center: 0.5,
            width: 0.25,
        };
        assert_eq!(bump.eval(0.5, d), 3.0);
        assert_eq!(bump.eval(0.8, d), 1.0);
        let sine = Profile::Sine {
            mean: 2.0,
            amplitude: 0.5,
            periods: 1.0,
            cosine: false,
        };
        assert!((sine.eval(0.25, d) - 2.5).abs() < 1e-15);
    }
}
