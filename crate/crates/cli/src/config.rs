use std::path::Path;

use hyperpurify::hypergraph::{Coloring, EdgeSet};
use hyperpurify::schedule::{
    AdaptiveConfig, Convergence, Estimator, PolicySpec, Protocol, SearchSpace, Sequence, ThresholdOptions, YieldMode, YieldOptions,
};
use hyperpurify::states::{HBState, NoiseKind, NoiseSpec};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[default]
    Fixed,
    Adaptive,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub length: usize,
    pub space: SearchSpace,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            length: 9,
            space: SearchSpace::TriplePerms,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecycleConfig {
    pub f0: Vec<f64>,
    pub rounds: usize,
    pub max_steps: usize,
}

impl Default for RecycleConfig {
    fn default() -> Self {
        RecycleConfig {
            f0: vec![0.90, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97],
            rounds: 3,
            max_steps: 15,
        }
    }
}

/// One experiment. Top-level keys of a config file are shared defaults;
/// entries of `cases` override them key by key.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub label: Option<String>,
    pub target: String,
    pub coloring: Option<String>,
    pub noise: NoiseKind,
    pub p: Option<f64>,
    /// Initial fidelity of a white-noise input, instead of `p`.
    pub f0: Option<f64>,
    pub sequence: Sequence,
    pub policy: PolicyKind,
    /// Overrides the preset for the noise model.
    pub adaptive: Option<AdaptiveConfig>,
    pub mode: Mode,
    /// Pool size or input count in monte-carlo mode.
    pub samples: u64,
    pub seed: u64,
    pub repetitions: Option<usize>,
    pub convergence: Convergence,
    pub threshold: ThresholdOptions,
    pub search: SearchConfig,
    #[serde(rename = "yield")]
    pub yields: YieldOptions,
    pub recycle: RecycleConfig,
    /// File name inside the output directory.
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            label: None,
            target: "3; {1,2,3}".into(),
            coloring: None,
            noise: NoiseKind::White,
            p: None,
            f0: None,
            sequence: Sequence::standard(),
            policy: PolicyKind::Fixed,
            adaptive: None,
            mode: Mode::Exact,
            samples: 1_000_000,
            seed: 0,
            repetitions: None,
            convergence: Convergence::default(),
            threshold: ThresholdOptions::default(),
            search: SearchConfig::default(),
            yields: YieldOptions::default(),
            recycle: RecycleConfig::default(),
            output: None,
        }
    }
}

/// A config file: the shared case plus its overrides.
#[derive(Clone, Debug)]
pub struct ConfigFile {
    pub output: Option<String>,
    pub cases: Vec<RunConfig>,
}

fn parse_case(v: Value) -> Result<RunConfig, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))
}

impl ConfigFile {
    pub fn parse(text: &str, seed: Option<u64>) -> Result<Self, CliError> {
        let root: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let Value::Object(mut base) = root else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        let overrides = match base.remove("cases") {
            None => vec![Value::Object(Map::new())],
            Some(Value::Array(a)) if !a.is_empty() => a,
            Some(_) => return Err(CliError::Config("`cases` must be a non-empty array".into())),
        };
        let shared = parse_case(Value::Object(base.clone()))?;
        let mut cases = Vec::with_capacity(overrides.len());
        for (i, o) in overrides.into_iter().enumerate() {
            let Value::Object(o) = o else {
                return Err(CliError::Config(format!("case {i} must be a JSON object")));
            };
            let mut merged = base.clone();
            merged.extend(o);
            let mut case = parse_case(Value::Object(merged)).map_err(|e| CliError::Config(format!("case {i}: {e}")))?;
            if case.label.is_none() {
                case.label = Some(i.to_string());
            }
            if let Some(s) = seed {
                case.seed = s;
            }
            cases.push(case);
        }
        Ok(ConfigFile {
            output: shared.output,
            cases,
        })
    }

    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::parse(&text, seed)
            }
            None => Self::parse("{}", seed),
        }
    }
}

impl RunConfig {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or("0")
    }

    pub fn edge_set(&self) -> Result<EdgeSet, CliError> {
        self.target.parse().map_err(|e| CliError::Config(format!("target: {e}")))
    }

    pub fn protocol(&self) -> Result<Protocol, CliError> {
        let e = self.edge_set()?;
        let c: Coloring = match &self.coloring {
            Some(s) => s.parse().map_err(|e| CliError::Config(format!("coloring: {e}")))?,
            None => Coloring::cyclic(e.n_vertices(), 3),
        };
        let protocol = Protocol::new(&e, &c).map_err(|e| CliError::Config(e.to_string()))?;
        let check = |s: &Sequence| {
            protocol
                .check_sequence(s)
                .map_err(|e| CliError::Config(format!("sequence {s}: {e}")))
        };
        check(&self.sequence)?;
        if self.policy == PolicyKind::Adaptive || self.adaptive.is_some() {
            let a = self.adaptive_config();
            check(&a.s1)?;
            check(&a.s2)?;
        }
        Ok(protocol)
    }

    /// Like `protocol`, and also checks the adaptive sequences.
    pub fn adaptive_protocol(&self) -> Result<Protocol, CliError> {
        RunConfig {
            policy: PolicyKind::Adaptive,
            ..self.clone()
        }
        .protocol()
    }

    pub fn convergence(&self) -> Convergence {
        match self.repetitions {
            Some(r) => Convergence {
                max_repetitions: r,
                ..self.convergence.clone()
            },
            None => self.convergence.clone(),
        }
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        self.adaptive.clone().unwrap_or_else(|| AdaptiveConfig::preset(self.noise))
    }

    pub fn policy_spec(&self) -> PolicySpec {
        match self.policy {
            PolicyKind::Fixed => PolicySpec::Fixed(self.sequence.clone()),
            PolicyKind::Adaptive => PolicySpec::Adaptive(self.adaptive_config()),
        }
    }

    pub fn policy_name(&self) -> String {
        match self.policy {
            PolicyKind::Fixed => self.sequence.to_string(),
            PolicyKind::Adaptive => "adaptive".into(),
        }
    }

    pub fn threshold_options(&self) -> ThresholdOptions {
        ThresholdOptions {
            convergence: self.convergence(),
            ..self.threshold.clone()
        }
    }

    pub fn estimator(&self) -> Estimator {
        match self.mode {
            Mode::Exact => Estimator::Exact,
            Mode::MonteCarlo => Estimator::MonteCarlo {
                pool: self.samples,
                seed: self.seed,
            },
        }
    }

    pub fn yield_options(&self) -> YieldOptions {
        let mode = match self.mode {
            Mode::Exact => YieldMode::Expected,
            Mode::MonteCarlo => YieldMode::MonteCarlo {
                inputs: self.samples,
                seed: self.seed,
            },
        };
        YieldOptions {
            mode,
            ..self.yields.clone()
        }
    }

    /// Noise parameter from `p`, or from `f0` for white noise.
    pub fn noise_parameter(&self, n: usize) -> Result<f64, CliError> {
        match (self.p, self.f0) {
            (Some(p), None) => Ok(p),
            (None, Some(f0)) if self.noise == NoiseKind::White => Ok(hyperpurify::schedule::white_noise_parameter(n, f0)),
            (None, Some(_)) => Err(CliError::Config("`f0` is only defined for white noise".into())),
            (Some(_), Some(_)) => Err(CliError::Config("give either `p` or `f0`, not both".into())),
            (None, None) => Err(CliError::Config("this command needs a noise parameter `p` or `f0`".into())),
        }
    }

    pub fn initial_state(&self, protocol: &Protocol) -> Result<HBState, CliError> {
        let p = self.noise_parameter(protocol.target().n_vertices())?;
        let spec = NoiseSpec::new(self.noise, p).map_err(|e| CliError::Config(e.to_string()))?;
        HBState::noisy_target(protocol.target(), spec).map_err(|e| CliError::Numerical(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_override_shared_keys() {
        let f = ConfigFile::parse(
            r#"{"noise": "dephasing", "p": 0.9, "cases": [{"label": "x"}, {"noise": "white"}]}"#,
            Some(7),
        )
        .unwrap();
        assert_eq!(f.cases.len(), 2);
        assert_eq!(f.cases[0].noise, NoiseKind::Dephasing);
        assert_eq!(f.cases[0].label(), "x");
        assert_eq!(f.cases[1].noise, NoiseKind::White);
        assert_eq!(f.cases[1].label(), "1");
        assert!(f.cases.iter().all(|c| c.seed == 7 && c.p == Some(0.9)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ConfigFile::parse(r#"{"nosie": "white"}"#, None), Err(CliError::Config(_))));
        assert!(matches!(
            ConfigFile::parse(r#"{"cases": [{"threshold": {"tol": 1}}]}"#, None),
            Err(CliError::Config(_))
        ));
        assert!(matches!(ConfigFile::parse(r#"{"cases": []}"#, None), Err(CliError::Config(_))));
    }

    #[test]
    fn f0_sets_white_noise() {
        let f = ConfigFile::parse(r#"{"f0": 0.93}"#, None).unwrap();
        let p = f.cases[0].noise_parameter(3).unwrap();
        assert!((p + (1.0 - p) / 8.0 - 0.93).abs() < 1e-15);
        let f = ConfigFile::parse(r#"{"f0": 0.93, "noise": "dephasing"}"#, None).unwrap();
        assert!(f.cases[0].noise_parameter(3).is_err());
    }
}
