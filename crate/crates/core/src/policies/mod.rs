//! Learners: blocked EXP3 over groups with LinUCB inside (B-EXPUCB) and the
//! baselines it is compared against.

mod exp3;
mod learners;
mod ridge;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use exp3::{sampling_distribution, Exp3State};
pub use learners::{build_policy, BExpUcb, Exp3FixedArm, LinUcbGroup, LinUcbRandom, LocalPolicy, OraclePolicy};
pub use ridge::RidgeState;

use crate::error::{Error, Result};
use crate::model::{Arm, ArmId, ArmSet, FeatureVector, GroupParameter};

// ── Configuration ──────────────────────────────────────────────────────────

/// Learning-rate, exploration and confidence parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub eta: f64,
    pub beta: f64,
    pub lambda: f64,
    pub delta: f64,
    pub sigma: f64,
    /// Dimension used in the confidence radius; `None` uses the group's
    /// feature dimension.
    #[serde(default)]
    pub d: Option<usize>,
    pub block_length: u64,
    pub tau: f64,
}

impl PolicyConfig {
    /// Parameters derived from the horizon, with default confidence settings.
    pub fn for_horizon(horizon: u64) -> Result<Self> {
        let s = theorem_schedule(horizon)?;
        Ok(Self {
            eta: s.eta,
            beta: s.beta,
            block_length: s.block_length,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.eta.is_finite() && self.eta > 0.0) {
            problems.push(format!("eta must be positive, got {}", self.eta));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            problems.push(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.lambda.is_finite() && self.lambda >= 1.0) {
            problems.push(format!("lambda must be at least 1, got {}", self.lambda));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            problems.push(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            problems.push(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if self.d == Some(0) {
            problems.push("d must be positive".into());
        }
        if self.block_length == 0 {
            problems.push("block_length must be at least 1".into());
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            problems.push(format!("tau must be non-negative, got {}", self.tau));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    fn confidence_dim(&self, feature_dim: usize) -> usize {
        self.d.unwrap_or(feature_dim)
    }
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            beta: 0.1,
            lambda: 1.0,
            delta: 0.1,
            sigma: 0.05,
            d: None,
            block_length: 1,
            tau: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub beta: f64,
    pub eta: f64,
    pub block_length: u64,
}

const BETA_CAP: f64 = 0.999;

/// Horizon-tuned exploration weight, learning rate and block length.
pub fn theorem_schedule(horizon: u64) -> Result<Schedule> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let t = horizon as f64;
    let mut beta = t.powf(-0.25) * t.ln().sqrt();
    if beta > BETA_CAP {
        log::warn!("beta {beta:.4} for horizon {horizon} capped at {BETA_CAP}");
        beta = BETA_CAP;
    }
    let block_length = (t.powf(2.0 / 3.0).round() as u64).max(1);
    Ok(Schedule {
        beta,
        eta: t.powf(1.0 / 6.0),
        block_length,
    })
}

/// Confidence radius at round `t`.
pub fn alpha_t(t: u64, cfg: &PolicyConfig, feature_dim: usize) -> f64 {
    let d = cfg.confidence_dim(feature_dim) as f64;
    let growth = ((1.0 + t as f64 / cfg.lambda) / cfg.delta).ln();
    cfg.lambda.sqrt() + cfg.sigma * (d * growth).sqrt()
}

/// Ceiling on one group's realized exploration-bonus sum over `horizon`
/// rounds.
pub fn bonus_sum_bound(cfg: &PolicyConfig, feature_dim: usize, horizon: u64) -> f64 {
    let d = cfg.confidence_dim(feature_dim) as f64;
    let t = horizon as f64;
    let spread = 2.0 * t * d * ((cfg.lambda + t / d).ln() - cfg.lambda.ln());
    alpha_t(horizon, cfg, feature_dim) * spread.sqrt()
}

// ── Decisions ──────────────────────────────────────────────────────────────

/// Where a task runs: one of the learnable groups or the unattackable local
/// fallback.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Route {
    Group(usize),
    Local,
}

impl Route {
    pub fn group(self) -> Option<usize> {
        match self {
            Route::Group(g) => Some(g),
            Route::Local => None,
        }
    }

    /// One-based label used in logs; the local route is 0.
    pub fn label(self) -> usize {
        match self {
            Route::Group(g) => g + 1,
            Route::Local => 0,
        }
    }

    pub fn from_label(label: usize) -> Self {
        match label {
            0 => Route::Local,
            g => Route::Group(g - 1),
        }
    }
}

/// UCB diagnostics for the chosen arm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UcbScore {
    pub estimate: f64,
    pub width: f64,
    pub alpha: f64,
}

impl UcbScore {
    pub fn bonus(&self) -> f64 {
        self.alpha * self.width
    }

    pub fn total(&self) -> f64 {
        self.estimate + self.bonus()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDecision {
    pub route: Route,
    pub arm_id: ArmId,
    pub arm: FeatureVector,
    pub ucb: Option<UcbScore>,
}

/// Everything a learner may see before choosing in one round.
#[derive(Clone, Copy, Debug)]
pub struct RoundOffer<'a> {
    /// One arm set per group.
    pub sets: &'a [ArmSet],
    /// Per group, the arm that ships all computation to the far end.
    pub full_offload: &'a [ArmId],
    pub local: Option<&'a Arm>,
}

impl RoundOffer<'_> {
    pub fn groups(&self) -> usize {
        self.sets.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[value(name = "b-expucb")]
    #[serde(rename = "b-expucb")]
    BExpUcb,
    #[value(name = "expucb")]
    #[serde(rename = "expucb")]
    ExpUcb,
    #[value(name = "linucb")]
    #[serde(rename = "linucb")]
    LinUcb,
    #[value(name = "exp3")]
    Exp3,
    #[value(name = "local")]
    Local,
    #[value(name = "linucb-random")]
    #[serde(rename = "linucb-random")]
    LinUcbRandom,
    #[value(name = "oracle")]
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Oracle,
        PolicyKind::ExpUcb,
        PolicyKind::BExpUcb,
        PolicyKind::LinUcb,
        PolicyKind::Exp3,
        PolicyKind::Local,
        PolicyKind::LinUcbRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::BExpUcb => "b-expucb",
            PolicyKind::ExpUcb => "expucb",
            PolicyKind::LinUcb => "linucb",
            PolicyKind::Exp3 => "exp3",
            PolicyKind::Local => "local",
            PolicyKind::LinUcbRandom => "linucb-random",
            PolicyKind::Oracle => "oracle",
        }
    }

    /// Whether the learner keeps per-group ridge estimates.
    pub fn uses_ridge(self) -> bool {
        matches!(
            self,
            PolicyKind::BExpUcb | PolicyKind::ExpUcb | PolicyKind::LinUcb | PolicyKind::LinUcbRandom
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "algorithm",
                name: s.to_string(),
                available: PolicyKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            })
    }
}

/// Everything a learner needs besides the round offers.
#[derive(Clone, Debug)]
pub struct PolicyContext {
    pub config: PolicyConfig,
    /// Feature dimension of each group.
    pub dims: Vec<usize>,
    /// Fixed group and true parameters, only consumed by the oracle.
    pub oracle: Option<(usize, Vec<GroupParameter>)>,
}

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    fn choose(&mut self, t: u64, offer: &RoundOffer<'_>, rng: &mut dyn rand::RngCore) -> Result<PolicyDecision>;

    fn update(&mut self, decision: &PolicyDecision, reward: f64) -> Result<()>;

    /// Group law in force for the latest decision.
    fn group_distribution(&self, groups: usize) -> Vec<f64>;

    fn ridge_states(&self) -> Option<&[RidgeState]> {
        None
    }

    fn exp3_state(&self) -> Option<&Exp3State> {
        None
    }
}
