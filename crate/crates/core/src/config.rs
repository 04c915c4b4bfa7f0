//! Run configuration, read from a TOML file.
//!
//! ```toml
//! version = 1
//! source = "poissonian"                      # or "thermal"
//! logics = ["lowest_loss", "first_detection"]
//! m_values = [1, 2, 4, 8]
//! n_values = [1, 2, 4, 8, 16]
//! output_dir = "out"
//!
//! [losses]
//! v_r = 0.996
//! v_t = 0.97
//! v_p = 0.95
//! v_p0_s = 0.996
//! v_d = 0.9
//! # v_r_s, v_t_s default to v_r, v_t; v_b defaults to 1
//!
//! [lambda_bounds]
//! lo = 0.0
//! hi_per_window = 10.0                       # or an absolute `hi`
//!
//! [validate]
//! trials = 1000000
//! seed = 42
//! points = [{ m = 2, n = 4, lambda = 1.0 }]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::DEFAULT_I_MAX;
use crate::optimize::{powers_of_two, LambdaBounds, SweepSpec};
use crate::photon_stats::SourceKind;
use crate::transmission::{LossParameters, PriorityLogic};

pub const CONFIG_VERSION: u32 = 1;

/// Smallest trial count accepted by the validation harness.
pub const MIN_VALIDATION_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    #[serde(default = "default_source")]
    source: SourceKind,
    #[serde(default = "default_logics")]
    logics: Vec<PriorityLogic>,
    m_values: Option<Vec<usize>>,
    n_values: Option<Vec<usize>>,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    i_max: Option<usize>,
    losses: RawLosses,
    lambda_bounds: Option<RawBounds>,
    validate: Option<RawValidate>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLosses {
    v_r: f64,
    v_t: f64,
    v_p: f64,
    v_p0_s: f64,
    v_d: f64,
    v_r_s: Option<f64>,
    v_t_s: Option<f64>,
    #[serde(default = "one")]
    v_b: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    #[serde(default)]
    lo: f64,
    hi: Option<f64>,
    hi_per_window: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidate {
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    points: Vec<ValidationPoint>,
    perturb: Option<Perturbation>,
}

fn default_source() -> SourceKind {
    SourceKind::Poissonian
}

fn default_logics() -> Vec<PriorityLogic> {
    PriorityLogic::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> f64 {
    1.0
}

fn default_trials() -> u64 {
    1_000_000
}

/// One `(M, N, λ)` configuration checked against the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationPoint {
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
}

/// Offset applied to one analytic matrix entry (0-based arm and window);
/// used to confirm that the harness notices a wrong model.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub arm: usize,
    pub window: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub trials: u64,
    pub seed: u64,
    pub points: Vec<ValidationPoint>,
    pub perturb: Option<Perturbation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: SourceKind,
    pub logics: Vec<PriorityLogic>,
    pub m_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub lambda_bounds: LambdaBounds,
    pub params: LossParameters,
    pub output_dir: PathBuf,
    pub i_max: usize,
    pub validate: Option<ValidationConfig>,
}

/// 1-based line of the first line that assigns `key` or opens table `key`.
fn line_of(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let t = l.trim_start();
        let assigns = t
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='));
        assigns || t == format!("[{key}]")
    })
    .map(|i| i + 1)
}

fn line_at_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| ConfigError {
            line: e.span().map(|s| line_at_offset(src, s.start)),
            message: e.message().to_string(),
        })?;
        let err = |key: &str, message: String| ConfigError {
            line: line_of(src, key),
            message,
        };

        if raw.version != CONFIG_VERSION {
            return Err(err(
                "version",
                format!("unsupported config version {}, expected {CONFIG_VERSION}", raw.version),
            ));
        }
        if raw.logics.is_empty() {
            return Err(err("logics", "at least one priority logic is required".into()));
        }
        let m_values = raw.m_values.unwrap_or_else(|| powers_of_two(0, 9));
        let n_values = raw.n_values.unwrap_or_else(|| powers_of_two(0, 9));
        for (key, grid) in [("m_values", &m_values), ("n_values", &n_values)] {
            if grid.is_empty() {
                return Err(err(key, format!("{key} must not be empty")));
            }
            if let Some(bad) = grid.iter().find(|v| !v.is_power_of_two()) {
                return Err(err(key, format!("{key} entry {bad} is not a power of two")));
            }
        }

        let l = raw.losses;
        let params = LossParameters {
            v_r: l.v_r,
            v_t: l.v_t,
            v_r_s: l.v_r_s.unwrap_or(l.v_r),
            v_t_s: l.v_t_s.unwrap_or(l.v_t),
            v_p: l.v_p,
            v_p0_s: l.v_p0_s,
            v_b: l.v_b,
            v_d: l.v_d,
        };
        for (name, value) in params.named() {
            if !(0.0..=1.0).contains(&value) {
                let line = line_of(src, name).or_else(|| line_of(src, "losses"));
                return Err(ConfigError {
                    line,
                    message: format!("{name} = {value} must lie in [0, 1]"),
                });
            }
        }

        let lambda_bounds = match raw.lambda_bounds {
            None => LambdaBounds::default(),
            Some(RawBounds {
                lo,
                hi: Some(hi),
                hi_per_window: None,
            }) => LambdaBounds::Absolute { lo, hi },
            Some(RawBounds {
                lo,
                hi: None,
                hi_per_window,
            }) => LambdaBounds::PerWindow {
                lo,
                hi_per_window: hi_per_window.unwrap_or(10.0),
            },
            Some(_) => {
                return Err(err(
                    "lambda_bounds",
                    "give either `hi` or `hi_per_window`, not both".into(),
                ))
            }
        };
        lambda_bounds
            .validate()
            .map_err(|e| err("lambda_bounds", e.to_string()))?;

        let i_max = raw.i_max.unwrap_or(DEFAULT_I_MAX);
        if i_max == 0 {
            return Err(err("i_max", "i_max must be at least 1".into()));
        }

        let validate = match raw.validate {
            None => None,
            Some(v) => {
                if v.trials < MIN_VALIDATION_TRIALS {
                    return Err(err(
                        "trials",
                        format!("validation needs at least {MIN_VALIDATION_TRIALS} trials"),
                    ));
                }
                for p in &v.points {
                    if !(p.m.is_power_of_two() && p.n.is_power_of_two())
                        || !(p.lambda.is_finite() && p.lambda >= 0.0)
                    {
                        return Err(err(
                            "points",
                            format!("invalid validation point {p:?}"),
                        ));
                    }
                }
                if let Some(pt) = v.perturb {
                    if !pt.delta.is_finite() {
                        return Err(err("perturb", "perturbation must be finite".into()));
                    }
                }
                Some(ValidationConfig {
                    trials: v.trials,
                    seed: v.seed,
                    points: v.points,
                    perturb: v.perturb,
                })
            }
        };

        Ok(RunConfig {
            source: raw.source,
            logics: raw.logics,
            m_values,
            n_values,
            lambda_bounds,
            params,
            output_dir: raw.output_dir,
            i_max,
            validate,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml_str(&src).map_err(|e| ConfigError {
            message: format!("{}: {}", path.display(), e.message),
            ..e
        })
    }

    pub fn sweep_spec(&self, logic: PriorityLogic) -> SweepSpec {
        SweepSpec {
            m_values: self.m_values.clone(),
            n_values: self.n_values.clone(),
            lambda_bounds: self.lambda_bounds,
            params: self.params,
            source_kind: self.source,
            logic,
            i_max: self.i_max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
version = 1
logics = ["lowest_loss"]
m_values = [1, 2]
n_values = [1, 4]

[losses]
v_r = 0.996
v_t = 0.97
v_p = 0.95
v_p0_s = 0.99
v_d = 0.9
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.source, SourceKind::Poissonian);
        assert_eq!(c.params.v_r_s, 0.996);
        assert_eq!(c.params.v_t_s, 0.97);
        assert_eq!(c.params.v_b, 1.0);
        assert_eq!(c.lambda_bounds, LambdaBounds::default());
        assert_eq!(c.i_max, DEFAULT_I_MAX);
        assert!(c.validate.is_none());
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let src = format!("{BASE}v_q = 0.5\n");
        let e = RunConfig::from_toml_str(&src).unwrap_err();
        assert!(e.message.contains("v_q"), "{e}");
        assert_eq!(e.line, Some(13));
    }

    #[test]
    fn empty_grid_rejected_with_line() {
        let src = BASE.replace("m_values = [1, 2]", "m_values = []");
        let e = RunConfig::from_toml_str(&src).unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("m_values"));
    }

    #[test]
    fn out_of_range_efficiency_points_at_key() {
        let src = BASE.replace("v_t = 0.97", "v_t = 1.2");
        let e = RunConfig::from_toml_str(&src).unwrap_err();
        assert_eq!(e.line, Some(9));
    }

    #[test]
    fn wrong_version_rejected() {
        let src = BASE.replace("version = 1", "version = 2");
        assert_eq!(RunConfig::from_toml_str(&src).unwrap_err().line, Some(2));
    }

    #[test]
    fn validation_section_parsed() {
        let src = format!(
            "{BASE}\n[validate]\ntrials = 200000\nseed = 3\npoints = [{{ m = 2, n = 4, lambda = 1.0 }}]\nperturb = {{ arm = 0, window = 1, delta = 0.01 }}\n"
        );
        let c = RunConfig::from_toml_str(&src).unwrap();
        let v = c.validate.unwrap();
        assert_eq!(v.trials, 200_000);
        assert_eq!(v.points, vec![ValidationPoint { m: 2, n: 4, lambda: 1.0 }]);
        assert_eq!(v.perturb.unwrap().window, 1);
    }

    #[test]
    fn too_few_trials_rejected() {
        let src = format!("{BASE}\n[validate]\ntrials = 10\n");
        assert!(RunConfig::from_toml_str(&src).is_err());
    }

    #[test]
    fn absolute_and_scaled_bounds() {
        let src = format!("{BASE}\n[lambda_bounds]\nlo = 0.1\nhi = 50.0\n");
        let c = RunConfig::from_toml_str(&src).unwrap();
        assert_eq!(c.lambda_bounds, LambdaBounds::Absolute { lo: 0.1, hi: 50.0 });
        let src = format!("{BASE}\n[lambda_bounds]\nhi = 5.0\nhi_per_window = 5.0\n");
        assert!(RunConfig::from_toml_str(&src).is_err());
    }
}
