//! Experiment configuration and the named presets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adversaries::AttackerSpec;
use crate::edge::EdgeScenario;
use crate::error::{Error, Result};
use crate::model::NoiseSpec;
use crate::policies::{theorem_schedule, PolicyConfig, PolicyKind};

pub const YOLO_PROFILE: &str = "yolo";
pub const RESNET_PROFILE: &str = "resnet50";

/// Where the environment comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioRef {
    /// Mobile device with four one-hop relays and both bundled profiles.
    SingleRelay {
        deadline_s: f64,
    },
    File {
        path: PathBuf,
    },
}

impl ScenarioRef {
    pub fn load(&self, base: &Path) -> Result<EdgeScenario> {
        match self {
            ScenarioRef::SingleRelay { deadline_s } => EdgeScenario::single_relay(*deadline_s),
            ScenarioRef::File { path } => EdgeScenario::from_file(&base.join(path)),
        }
    }
}

/// Per-round law of the task profile; probabilities refer to the YoLo-style
/// profile, the rest goes to the ResNet-style one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskDistribution {
    YoloOnly,
    ResnetOnly,
    Mixed {
        p_yolo: f64,
    },
    Shift {
        p_before: f64,
        p_after: f64,
        switch_round: u64,
    },
}

impl TaskDistribution {
    pub fn p_yolo(&self, t: u64) -> f64 {
        match self {
            TaskDistribution::YoloOnly => 1.0,
            TaskDistribution::ResnetOnly => 0.0,
            TaskDistribution::Mixed { p_yolo } => *p_yolo,
            TaskDistribution::Shift {
                p_before,
                p_after,
                switch_round,
            } => {
                if t < *switch_round {
                    *p_before
                } else {
                    *p_after
                }
            }
        }
    }

    fn problems(&self) -> Vec<String> {
        let probs: Vec<f64> = match self {
            TaskDistribution::Mixed { p_yolo } => vec![*p_yolo],
            TaskDistribution::Shift { p_before, p_after, .. } => vec![*p_before, *p_after],
            _ => vec![],
        };
        let mut out: Vec<String> = probs
            .into_iter()
            .filter(|p| !(0.0..=1.0).contains(p))
            .map(|p| format!("task probability {p} outside [0, 1]"))
            .collect();
        if let TaskDistribution::Shift { switch_round: 0, .. } = self {
            out.push("task switch_round must be at least 1".into());
        }
        out
    }

    /// Parses `yolo`, `resnet`, `mixed`, `mixed:<p>` or `shift`.
    pub fn parse(text: &str) -> Result<Self> {
        let (head, arg) = text.split_once(':').map_or((text, None), |(h, a)| (h, Some(a)));
        let prob = |a: Option<&str>, default: f64| -> Result<f64> {
            a.map_or(Ok(default), |s| {
                s.parse()
                    .map_err(|_| Error::invalid("task distribution", format!("bad probability `{s}`")))
            })
        };
        Ok(match head {
            "yolo" => TaskDistribution::YoloOnly,
            "resnet" => TaskDistribution::ResnetOnly,
            "mixed" => TaskDistribution::Mixed {
                p_yolo: prob(arg, 0.5)?,
            },
            "shift" => TaskDistribution::Shift {
                p_before: 0.8,
                p_after: 0.2,
                switch_round: 2000,
            },
            other => {
                return Err(Error::UnknownName {
                    kind: "task distribution",
                    name: other.to_string(),
                    available: ["yolo", "resnet", "mixed[:p]", "shift"].map(String::from).to_vec(),
                })
            }
        })
    }
}

/// An attacker given inline or by preset name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttackerChoice {
    Preset(String),
    Spec(AttackerSpec),
}

impl AttackerChoice {
    pub fn resolve(&self) -> Result<AttackerSpec> {
        match self {
            AttackerChoice::Preset(name) => AttackerSpec::preset(name),
            AttackerChoice::Spec(s) => Ok(s.clone()),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn tenth() -> f64 {
    0.1
}

/// Learner parameters: derived from the horizon, or spelled out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamSpec {
    /// Horizon-tuned `beta`, `eta` and block length; `sigma` follows the
    /// noise spec and `tau` the scenario.
    Theorem {
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "tenth")]
        delta: f64,
        #[serde(default)]
        d: Option<usize>,
    },
    Explicit(PolicyConfig),
}

impl Default for ParamSpec {
    fn default() -> Self {
        ParamSpec::Theorem {
            lambda: 1.0,
            delta: 0.1,
            d: None,
        }
    }
}

impl ParamSpec {
    pub fn resolve(&self, horizon: u64, noise: &NoiseSpec, tau: f64) -> Result<PolicyConfig> {
        let cfg = match self {
            ParamSpec::Theorem { lambda, delta, d } => {
                let s = theorem_schedule(horizon)?;
                PolicyConfig {
                    eta: s.eta,
                    beta: s.beta,
                    lambda: *lambda,
                    delta: *delta,
                    sigma: noise.sigma_param,
                    d: *d,
                    block_length: s.block_length,
                    tau,
                }
            }
            ParamSpec::Explicit(cfg) => cfg.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenario: ScenarioRef,
    pub tasks: TaskDistribution,
    pub attacker: AttackerChoice,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub policy: PolicyKind,
    #[serde(default)]
    pub params: ParamSpec,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    /// Overrides the default output root.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Benchmark with the realized noise instead of its expectation.
    #[serde(default)]
    pub realized_noise_oracle: bool,
}

pub const PRESETS: [&str; 6] = ["yolo", "resnet", "mixed", "task-shift", "attacker-shift", "adaptive"];

const DEADLINE_YOLO_S: f64 = 0.8;
const DEADLINE_RESNET_S: f64 = 1.1;

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = |deadline_s: f64, tasks: TaskDistribution, attacker: &str, horizon: u64| ExperimentConfig {
            name: name.to_string(),
            scenario: ScenarioRef::SingleRelay { deadline_s },
            tasks,
            attacker: AttackerChoice::Preset(attacker.to_string()),
            noise: NoiseSpec::default(),
            policy: PolicyKind::BExpUcb,
            params: ParamSpec::default(),
            horizon,
            seeds: (1..=20).collect(),
            output: None,
            realized_noise_oracle: false,
        };
        Ok(match name {
            "yolo" => base(DEADLINE_YOLO_S, TaskDistribution::YoloOnly, "oblivious", 3000),
            "resnet" => base(DEADLINE_RESNET_S, TaskDistribution::ResnetOnly, "oblivious", 3000),
            "mixed" => base(
                DEADLINE_RESNET_S,
                TaskDistribution::Mixed { p_yolo: 0.5 },
                "oblivious",
                3000,
            ),
            "task-shift" => base(
                DEADLINE_RESNET_S,
                TaskDistribution::Shift {
                    p_before: 0.8,
                    p_after: 0.2,
                    switch_round: 2000,
                },
                "oblivious",
                6000,
            ),
            "attacker-shift" => base(DEADLINE_RESNET_S, TaskDistribution::ResnetOnly, "time-varying", 6000),
            "adaptive" => base(DEADLINE_RESNET_S, TaskDistribution::ResnetOnly, "adaptive", 3000),
            other => {
                return Err(Error::UnknownName {
                    kind: "preset",
                    name: other.to_string(),
                    available: PRESETS.map(String::from).to_vec(),
                })
            }
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Scenario files are resolved relative to the config file.
        if let ScenarioRef::File { path: p } = &mut cfg.scenario {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Checks everything and loads the scenario. All problems are reported
    /// together.
    pub fn prepare(&self) -> Result<Prepared> {
        let mut problems = Vec::new();
        if self.horizon == 0 {
            problems.push("horizon must be at least 1".to_string());
        }
        if self.seeds.is_empty() {
            problems.push("at least one seed is required".to_string());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            problems.push(format!("name `{}` is not a valid directory name", self.name));
        }
        problems.extend(self.tasks.problems());
        if let Err(e) = self.noise.validate() {
            problems.push(e.to_string());
        }
        let scenario = match self.scenario.load(Path::new(".")) {
            Ok(s) => Some(s),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        };
        let attacker = match self.attacker.resolve() {
            Ok(a) => Some(a),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        };
        let mut profiles = None;
        let mut policy = None;
        if let Some(s) = &scenario {
            if let Some(a) = &attacker {
                if let Err(e) = a.validate(s.groups()) {
                    problems.push(e.to_string());
                }
            }
            let needs_yolo = !matches!(self.tasks, TaskDistribution::ResnetOnly);
            let needs_resnet = !matches!(self.tasks, TaskDistribution::YoloOnly);
            let lookup = |name: &str, needed: bool, problems: &mut Vec<String>| -> usize {
                if !needed {
                    return 0;
                }
                s.profile_index(name).unwrap_or_else(|e| {
                    problems.push(e.to_string());
                    0
                })
            };
            let yolo = lookup(YOLO_PROFILE, needs_yolo, &mut problems);
            let resnet = lookup(RESNET_PROFILE, needs_resnet, &mut problems);
            let used: Vec<usize> = [(yolo, needs_yolo), (resnet, needs_resnet)]
                .into_iter()
                .filter_map(|(i, needed)| needed.then_some(i))
                .collect();
            if let Err(e) = s.check_margin(self.noise.amplitude(), &used) {
                problems.push(e.to_string());
            }
            profiles = Some((yolo, resnet));
            match self.params.resolve(self.horizon.max(1), &self.noise, s.tau()) {
                Ok(p) => policy = Some(p),
                Err(e) => problems.push(e.to_string()),
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let (yolo, resnet) = profiles.expect("set with scenario");
        Ok(Prepared {
            config: self.clone(),
            scenario: Arc::new(scenario.expect("checked")),
            attacker: attacker.expect("checked"),
            policy_config: policy.expect("checked"),
            yolo_task: yolo,
            resnet_task: resnet,
        })
    }
}

/// A validated configuration with its scenario loaded.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub scenario: Arc<EdgeScenario>,
    pub attacker: AttackerSpec,
    pub policy_config: PolicyConfig,
    pub yolo_task: usize,
    pub resnet_task: usize,
}

impl Prepared {
    /// Same environment with a different learner.
    pub fn with_policy(&self, policy: PolicyKind) -> Prepared {
        let mut p = self.clone();
        p.config.policy = policy;
        p
    }
}
