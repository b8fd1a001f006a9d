//! Experiment configuration files (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use opcalc::aae::FamilySpec;
use opcalc::expansion::check_hypotheses;
use opcalc::quadrature::QuadratureSpec;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Battery {
    VerifySymbolic,
    VerifyLemmas,
    VerifyTheorem,
    HsApply,
    BoundSweep,
    HadamardProbe,
    AaeProbe,
}

impl Battery {
    pub fn name(self) -> &'static str {
        match self {
            Battery::VerifySymbolic => "verify-symbolic",
            Battery::VerifyLemmas => "verify-lemmas",
            Battery::VerifyTheorem => "verify-theorem",
            Battery::HsApply => "hs-apply",
            Battery::BoundSweep => "bound-sweep",
            Battery::HadamardProbe => "hadamard-probe",
            Battery::AaeProbe => "aae-probe",
        }
    }
}

impl fmt::Display for Battery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single value or a list of values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> Sweep<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Sweep::One(x) => vec![x.clone()],
            Sweep::Many(xs) => xs.clone(),
        }
    }
}

/// Explicit seed list or a contiguous range `start..start+count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Range { start: 0, count: 1 }
    }
}

impl Seeds {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Seeds::List(xs) => xs.clone(),
            Seeds::Range { start, count } => (*start..start + count).collect(),
        }
    }

    /// Same number of seeds, starting at `base`.
    pub fn rebased(&self, base: u64) -> Seeds {
        let count = self.values().len() as u64;
        Seeds::Range { start: base, count }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    /// `[B, |A − z|^{−2}]` as a two-sided sum.
    #[default]
    Basestep,
    /// Expansion of `[ad^{α0}(B), g(A)]` with its remainder.
    ShiftedResolvent,
    /// Expansion of `[ad^{α0}(B), A_ℓ − z̄_ℓ]`.
    ConjugateLinear,
    /// Expansion of `[B, K_ℓ(A)]` for the quadrature kernel.
    Kernel,
    /// Product rule for factor lists of `g` and `g_ℓ`.
    Product,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HsMode {
    /// Compare with the spectral oracle.
    #[default]
    Apply,
    /// Fit the scalar in front of the integral.
    Calibrate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BChoice {
    #[default]
    Random,
    Identity,
}

/// Pass/fail thresholds; which ones apply depends on the battery.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Upper bound on residuals or errors.
    pub tolerance: Option<f64>,
    /// Errors may reach this multiple of the quadrature error estimate.
    pub estimate_factor: Option<f64>,
    /// Upper bound on the spread of maximal ratios across dimensions.
    pub spread: Option<f64>,
    /// Allowed deviation of fitted exponents.
    pub slope_margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub battery: Battery,
    pub nu: Sweep<usize>,
    #[serde(default = "default_dims")]
    pub d: Sweep<usize>,
    pub n: Option<Sweep<u32>>,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub family: Option<FamilySpec>,
    /// Extension truncation order(s); defaults depend on `n` and `ν`.
    pub truncation: Option<Sweep<u32>>,
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub seeds: Seeds,
    /// Joint spectrum drawn from `[−scale, scale]^ν`.
    #[serde(default = "default_scale")]
    pub scale: f64,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub max_degree: Option<u32>,
    pub identity: Option<Identity>,
    /// Largest `|α0|` for the shifted identities.
    pub alpha0_max: Option<u32>,
    /// Factor counts for the product rule.
    pub factors: Option<Vec<usize>>,
    pub mode: Option<HsMode>,
    pub b: Option<BChoice>,
    /// `(v_max, v_min)` of the geometric probe path.
    pub v_range: Option<(f64, f64)>,
    pub points: Option<usize>,
}

fn default_dims() -> Sweep<usize> {
    Sweep::One(4)
}

fn default_scale() -> f64 {
    2.0
}

/// 1-based line of the first `key = …` (TOML) or `"key": …` (JSON)
/// assignment, if present.
fn key_line(source: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    source
        .lines()
        .position(|line| {
            let t = line.trim_start().trim_start_matches(['{', ',', ' ']);
            let toml = t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='));
            let json = t.strip_prefix(&quoted).is_some_and(|rest| rest.trim_start().starts_with(':'));
            toml || json
        })
        .map(|i| i + 1)
}

/// Config file syntax.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// `.json` files are JSON; everything else is TOML.
    pub fn from_path(path: &Path) -> Format {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Format::Json
        } else {
            Format::Toml
        }
    }
}

struct Located<'a> {
    path: &'a str,
    source: &'a str,
}

impl Located<'_> {
    fn err(&self, key: &str, message: impl Into<String>) -> HarnessError {
        let message = message.into();
        let location = match key_line(self.source, key) {
            Some(line) => format!("{}:{line}", self.path),
            None => self.path.to_string(),
        };
        HarnessError::Config {
            location,
            message: format!("`{key}`: {message}"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)?;
        Self::parse_as(&source, &path.display().to_string(), Format::from_path(path))
    }

    /// Parses TOML and validates; `origin` names the source in diagnostics.
    pub fn parse(source: &str, origin: &str) -> Result<Self> {
        Self::parse_as(source, origin, Format::Toml)
    }

    pub fn parse_as(source: &str, origin: &str, format: Format) -> Result<Self> {
        let cfg: ExperimentConfig = match format {
            Format::Toml => toml::from_str(source).map_err(|e| HarnessError::Config {
                location: origin.to_string(),
                message: e.to_string().trim_end().to_string(),
            })?,
            Format::Json => serde_json::from_str(source).map_err(|e| HarnessError::Config {
                location: format!("{origin}:{}", e.line()),
                message: e.to_string(),
            })?,
        };
        cfg.validate_located(&Located { path: origin, source })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_located(&Located {
            path: &self.name,
            source: "",
        })
    }

    fn validate_located(&self, at: &Located<'_>) -> Result<()> {
        let nus = self.nu.values();
        if nus.is_empty() || nus.iter().any(|&v| v == 0 || v > 3) {
            return Err(at.err("nu", "values must lie in 1..=3"));
        }
        let dims = self.d.values();
        if dims.is_empty() || dims.contains(&0) {
            return Err(at.err("d", "dimensions must be positive"));
        }
        if self.seeds.values().is_empty() {
            return Err(at.err("seeds", "at least one seed is required"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(at.err("scale", "must be positive"));
        }
        if let Some(q) = &self.quadrature {
            q.validate().map_err(|e| at.err("quadrature", e.to_string()))?;
        }
        if let Some(f) = &self.family {
            f.validate().map_err(|e| at.err("family", e.to_string()))?;
        }
        if let Some((hi, lo)) = self.v_range {
            if !(hi > lo && lo > 0.0) {
                return Err(at.err("v_range", "need v_max > v_min > 0"));
            }
        }
        let needs = |present: bool, key: &str| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(at.err(key, format!("required by the {} battery", self.battery)))
            }
        };
        let th = &self.thresholds;
        match self.battery {
            Battery::VerifySymbolic => needs(self.max_degree.is_some(), "max_degree")?,
            Battery::VerifyLemmas => {
                needs(th.tolerance.is_some(), "tolerance")?;
                let id = self.identity.unwrap_or_default();
                if id != Identity::Basestep {
                    needs(self.n.is_some(), "n")?;
                }
                if id == Identity::Product {
                    needs(self.factors.is_some(), "factors")?;
                    if self.factors.iter().flatten().any(|&k| k == 0) {
                        return Err(at.err("factors", "factor counts must be positive"));
                    }
                }
            }
            Battery::VerifyTheorem => {
                needs(self.n.is_some(), "n")?;
                needs(self.family.is_some(), "family")?;
                needs(th.estimate_factor.is_some(), "estimate_factor")?;
            }
            Battery::HsApply => {
                needs(self.family.is_some(), "family")?;
                needs(th.tolerance.is_some(), "tolerance")?;
                if self.mode.unwrap_or_default() == HsMode::Apply {
                    needs(th.estimate_factor.is_some(), "estimate_factor")?;
                }
            }
            Battery::BoundSweep => {
                needs(self.n.is_some(), "n")?;
                needs(self.family.is_some(), "family")?;
                needs(self.t1.is_some(), "t1")?;
                needs(self.t2.is_some(), "t2")?;
                needs(th.spread.is_some(), "spread")?;
            }
            Battery::HadamardProbe => {
                needs(self.n.is_some(), "n")?;
                needs(self.t1.is_some(), "t1")?;
                needs(self.t2.is_some(), "t2")?;
                needs(self.v_range.is_some(), "v_range")?;
                needs(th.slope_margin.is_some(), "slope_margin")?;
            }
            Battery::AaeProbe => {
                needs(self.family.is_some(), "family")?;
                needs(self.truncation.is_some(), "truncation")?;
                needs(th.slope_margin.is_some(), "slope_margin")?;
            }
        }
        self.check_weights(at)
    }

    /// Weight and decay hypotheses for every `n` in the sweep.
    fn check_weights(&self, at: &Located<'_>) -> Result<()> {
        let (Some(t1), Some(t2), Some(ns)) = (self.t1, self.t2, &self.n) else {
            return Ok(());
        };
        // the kernel probe has no function; only the weight ranges apply there
        let s = self.family.as_ref().map_or(f64::NEG_INFINITY, FamilySpec::decay);
        for n in ns.values() {
            check_hypotheses(n, t1, t2, s).map_err(|e| {
                let t1_ok = (0.0..=f64::from(n) + 1.0).contains(&t1);
                let key = if t1_ok && !(0.0..=1.0).contains(&t2) { "t2" } else { "t1" };
                at.err(key, format!("{e} (n = {n})"))
            })?;
        }
        Ok(())
    }

    /// Seeds from the config, or `count` seeds starting at `base`.
    pub fn with_seed(mut self, base: Option<u64>) -> Self {
        if let Some(b) = base {
            self.seeds = self.seeds.rebased(b);
        }
        self
    }

    pub fn quadrature_for(&self, nu: usize) -> QuadratureSpec {
        self.quadrature.clone().unwrap_or_else(|| QuadratureSpec::default_for(nu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOUND: &str = r#"
name = "bounds"
battery = "bound-sweep"
nu = 1
d = [4, 8]
n = 2
t1 = 1.0
t2 = 1.0
seeds = { start = 0, count = 3 }
family = { name = "bracket_power", s = -2.0 }

[thresholds]
spread = 10.0
"#;

    #[test]
    fn parses_sweeps_and_seed_ranges() {
        let cfg = ExperimentConfig::parse(BOUND, "bounds.toml").unwrap();
        assert_eq!(cfg.d.values(), vec![4, 8]);
        assert_eq!(cfg.seeds.values(), vec![0, 1, 2]);
        assert_eq!(cfg.clone().with_seed(Some(10)).seeds.values(), vec![10, 11, 12]);
        assert_eq!(cfg.battery, Battery::BoundSweep);
    }

    #[test]
    fn hypothesis_violation_names_the_line() {
        let bad = BOUND.replace("t1 = 1.0", "t1 = 3.5");
        let err = ExperimentConfig::parse(&bad, "bounds.toml").unwrap_err().to_string();
        assert!(err.contains("bounds.toml:7"), "{err}");
        assert!(err.contains("[0, n+1]"), "{err}");
        let bad = BOUND.replace("s = -2.0", "s = 1.5");
        let err = ExperimentConfig::parse(&bad, "bounds.toml").unwrap_err().to_string();
        assert!(err.contains("bounds.toml:7") && err.contains("t1 + t2 + s"), "{err}");
    }

    #[test]
    fn t2_out_of_range_points_at_t2() {
        let bad = BOUND.replace("t2 = 1.0", "t2 = 1.5");
        let err = ExperimentConfig::parse(&bad, "bounds.toml").unwrap_err().to_string();
        assert!(err.contains("bounds.toml:8") && err.contains("[0, 1]"), "{err}");
    }

    #[test]
    fn missing_threshold_is_reported() {
        let bad = BOUND.replace("spread = 10.0", "");
        let err = ExperimentConfig::parse(&bad, "b.toml").unwrap_err().to_string();
        assert!(err.contains("spread") && err.contains("bound-sweep"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = ExperimentConfig::parse("name = \"x\"\nnu = [1,\n", "x.toml")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn json_configs_parse_and_locate_errors() {
        let json = r#"{
  "name": "bounds",
  "battery": "bound-sweep",
  "nu": 1,
  "d": [4, 8],
  "n": 2,
  "t1": 1.0,
  "t2": 1.0,
  "seeds": { "start": 0, "count": 3 },
  "family": { "name": "bracket_power", "s": -2.0 },
  "thresholds": { "spread": 10.0 }
}"#;
        let cfg = ExperimentConfig::parse_as(json, "b.json", Format::Json).unwrap();
        assert_eq!(cfg, ExperimentConfig::parse(BOUND, "b.toml").unwrap());
        let bad = json.replace("\"t1\": 1.0", "\"t1\": 3.5");
        let err = ExperimentConfig::parse_as(&bad, "b.json", Format::Json).unwrap_err().to_string();
        assert!(err.contains("b.json:7"), "{err}");
        let err = ExperimentConfig::parse_as("{\n\"nu\": [1,\n", "x.json", Format::Json)
            .unwrap_err()
            .to_string();
        assert!(err.contains("x.json:3"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{BOUND}\n[extra]\nx = 1\n");
        assert!(ExperimentConfig::parse(&bad, "b.toml").is_err());
    }
}
