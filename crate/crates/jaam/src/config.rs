//! Experiment configuration, TOML/JSON loading and the named presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jaam_core::{
    BackstopRule, LevyTerms, MapKind, MapPair, OneStepMap, ProblemId, Sjde, StepParams, TestSystem,
};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Serde through `Display` / `FromStr` for the core id enums.
pub(crate) mod as_str {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Convergence,
    Efficiency,
    Backstop,
    Path,
}

/// Schemes compared by the harness. Everything but `JaAmm` runs on a
/// jump-adapted fixed-step mesh with step `h_mean`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    JaAmm,
    JaPmil,
    JaSsbm,
    JaTmil,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::JaAmm,
        Scheme::JaPmil,
        Scheme::JaSsbm,
        Scheme::JaTmil,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::JaAmm => "ja-amm",
            Scheme::JaPmil => "ja-pmil",
            Scheme::JaSsbm => "ja-ssbm",
            Scheme::JaTmil => "ja-tmil",
        }
    }

    /// Map of a fixed-step comparator.
    pub fn fixed_map(self) -> Option<OneStepMap> {
        match self {
            Scheme::JaAmm => None,
            Scheme::JaPmil => Some(OneStepMap::projected()),
            Scheme::JaSsbm => Some(OneStepMap::ssbm()),
            Scheme::JaTmil => Some(OneStepMap::tamed()),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.id() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown scheme `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackstopRuleConfig {
    #[default]
    Literal,
    NormOnly,
}

impl From<BackstopRuleConfig> for BackstopRule {
    fn from(value: BackstopRuleConfig) -> Self {
        match value {
            BackstopRuleConfig::Literal => BackstopRule::Literal,
            BackstopRuleConfig::NormOnly => BackstopRule::NormOnly,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(with = "as_str")]
    pub problem: ProblemId,
    pub sigma: f64,
    /// Jump intensity; the problem default when absent.
    pub lambda: Option<f64>,
    pub initial_state: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub schemes: Vec<Scheme>,
    #[serde(with = "as_str")]
    pub main_map: MapKind,
    #[serde(with = "as_str")]
    pub backstop_map: MapKind,
    pub h_max: Vec<f64>,
    pub rho: f64,
    /// `rho` values of a backstop run.
    pub rho_sweep: Vec<f64>,
    pub kappa: f64,
    /// Monte Carlo path count `M`.
    pub paths: usize,
    pub h_ref: f64,
    pub seed: u64,
    /// Lévy-area series length; `None` picks `ceil(1/h)`.
    pub levy_terms: Option<usize>,
    pub backstop_rule: BackstopRuleConfig,
    /// Paths used for the reference self-consistency ratio (0 disables it).
    pub reference_check_paths: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Convergence,
            problem: ProblemId::OneDimAdditive,
            sigma: 0.2,
            lambda: None,
            initial_state: None,
            horizon: None,
            schemes: Scheme::ALL.to_vec(),
            main_map: MapKind::Milstein,
            backstop_map: MapKind::ProjectedMilstein,
            h_max: pow2_range(-9, -5),
            rho: 128.0,
            rho_sweep: vec![8.0, 32.0, 128.0],
            kappa: 1.0,
            paths: 200,
            h_ref: 2f64.powi(-14),
            seed: 20_240_601,
            levy_terms: None,
            backstop_rule: BackstopRuleConfig::Literal,
            reference_check_paths: 0,
            out_dir: None,
        }
    }
}

/// `[2^lo, ..., 2^hi]`.
pub fn pow2_range(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

pub const PRESETS: [&str; 7] = [
    "fig1-additive",
    "fig1-multiplicative",
    "fig2-lambda25",
    "fig2-lambda250",
    "fig3-diagonal",
    "fig3-commutative",
    "fig3-noncom",
];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, HarnessError> {
        let one_dim = |problem, lambda| ExperimentConfig {
            problem,
            sigma: 0.2,
            lambda: Some(lambda),
            rho: 128.0,
            h_max: pow2_range(-14, -10),
            h_ref: 2f64.powi(-18),
            paths: 500,
            ..Default::default()
        };
        let two_dim = |problem| ExperimentConfig {
            problem,
            sigma: 0.2,
            lambda: Some(2.5),
            initial_state: Some(vec![0.5, 0.7]),
            rho: 128.0,
            h_max: pow2_range(-9, -5),
            h_ref: 2f64.powi(-18),
            paths: 500,
            ..Default::default()
        };
        let cfg = match name {
            "fig1-additive" => one_dim(ProblemId::OneDimAdditive, 2.0),
            "fig1-multiplicative" => one_dim(ProblemId::OneDimMultiplicative, 2.0),
            "fig2-lambda25" => one_dim(ProblemId::OneDimMultiplicative, 25.0),
            "fig2-lambda250" => one_dim(ProblemId::OneDimMultiplicative, 250.0),
            "fig3-diagonal" => two_dim(ProblemId::TwoDimG1),
            "fig3-commutative" => two_dim(ProblemId::TwoDimG2),
            "fig3-noncom" => ExperimentConfig {
                h_ref: 2f64.powi(-9),
                h_max: pow2_range(-6, -1),
                paths: 100,
                ..two_dim(ProblemId::TwoDimG3)
            },
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown preset `{other}` (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Halves `M` and keeps the four largest `h_max` values.
    pub fn desk_scale(mut self) -> Self {
        self.paths = (self.paths / 2).max(1);
        let mut sorted = self.h_max.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted.truncate(4);
        self.h_max.retain(|h| sorted.contains(h));
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.paths == 0 {
            return bad("paths must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("scheme list is empty".into());
        }
        if matches!(self.mode, Mode::Convergence | Mode::Efficiency)
            && !self.schemes.contains(&Scheme::JaAmm)
        {
            return bad("ja-amm must be listed: it fixes h_mean for the comparators".into());
        }
        if self.h_max.is_empty() {
            return bad("h_max list is empty".into());
        }
        if let Some(h) = self.h_max.iter().find(|h| !(**h > 0.0 && **h <= 1.0)) {
            return bad(format!("h_max {h} outside (0, 1]"));
        }
        let smallest = self.h_max.iter().copied().fold(f64::INFINITY, f64::min);
        if !(self.h_ref > 0.0 && self.h_ref <= smallest / 4.0) {
            return bad(format!(
                "h_ref {} must lie in (0, min h_max / 4]",
                self.h_ref
            ));
        }
        let horizon = self.horizon.unwrap_or(1.0);
        let cells = horizon / self.h_ref;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return bad(format!(
                "h_ref {} does not divide T = {horizon}",
                self.h_ref
            ));
        }
        if !(self.rho > 1.0) || self.rho_sweep.iter().any(|r| !(*r > 1.0)) {
            return bad("rho must exceed 1".into());
        }
        if !(self.kappa > 0.0) {
            return bad("kappa must be positive".into());
        }
        if self.mode == Mode::Backstop {
            if self.kappa < 1.0 {
                return bad("backstop runs need kappa >= 1".into());
            }
            if self.rho_sweep.is_empty() {
                return bad("rho_sweep is empty".into());
            }
        }
        if self.levy_terms == Some(0) {
            return bad("levy_terms must be positive".into());
        }
        self.problem().map(|_| ())
    }

    pub fn problem(&self) -> Result<TestSystem, HarnessError> {
        let config = |e: jaam_core::Error| HarnessError::Config(e.to_string());
        let mut p = self.problem.build(self.sigma).map_err(config)?;
        if let Some(lambda) = self.lambda {
            p = p.with_intensity(lambda).map_err(config)?;
        }
        if let Some(x0) = &self.initial_state {
            p = p.with_initial_state(x0.clone()).map_err(config)?;
        }
        if let Some(t) = self.horizon {
            p = p.with_horizon(t).map_err(config)?;
        }
        Ok(p)
    }

    pub fn intensity(&self) -> Result<f64, HarnessError> {
        Ok(self.problem()?.intensity())
    }

    pub fn levy(&self) -> LevyTerms {
        self.levy_terms.map_or(LevyTerms::Auto, LevyTerms::Fixed)
    }

    pub fn maps(&self) -> MapPair {
        MapPair {
            main: OneStepMap::new(self.main_map),
            backstop: OneStepMap::new(self.backstop_map),
        }
    }

    pub fn step_params(&self, h_max: f64, rho: f64) -> Result<StepParams, HarnessError> {
        let p = StepParams::new(h_max, rho, self.kappa)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(p.with_backstop_rule(self.backstop_rule.into())
            .with_levy_terms(self.levy()))
    }
}
