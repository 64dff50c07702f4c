//! Group linear bandit primitives: arms, group parameters, attacks, noise and
//! the hindsight benchmark.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the payload norm bound.
const NORM_SLACK: f64 = 1e-9;

// ── Vectors ────────────────────────────────────────────────────────────────

/// Arm feature vector.
///
/// The first component is the bias term; the remaining "payload" components
/// must have Euclidean norm at most one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("feature vector", "empty"));
        }
        if let Some(bad) = components.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid("feature vector", format!("non-finite component {bad}")));
        }
        let payload = norm(&components[1..]);
        if payload > 1.0 + NORM_SLACK {
            return Err(Error::invalid(
                "feature vector",
                format!("payload norm {payload} exceeds 1"),
            ));
        }
        Ok(Self(components))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Latent linear coefficients of one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GroupParameter(Vec<f64>);

impl GroupParameter {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("group parameter", "empty"));
        }
        if let Some(bad) = components.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid("group parameter", format!("non-finite component {bad}")));
        }
        Ok(Self(components))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Expected reward of `arm` under this parameter.
    pub fn score(&self, arm: &FeatureVector) -> Result<f64> {
        dot(&self.0, arm.as_slice())
    }
}

impl TryFrom<Vec<f64>> for GroupParameter {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GroupParameter> for Vec<f64> {
    fn from(v: GroupParameter) -> Self {
        v.0
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

// ── Arms ───────────────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArmId(pub u64);

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub id: ArmId,
    pub features: FeatureVector,
}

/// Arms available in one group for one round, kept sorted by id.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmSet {
    group: usize,
    arms: Vec<Arm>,
}

impl ArmSet {
    pub fn new(group: usize, mut arms: Vec<Arm>) -> Result<Self> {
        let Some(first) = arms.first() else {
            return Err(Error::invalid("arm set", format!("group {} has no arms", group + 1)));
        };
        let dim = first.features.dim();
        if let Some(a) = arms.iter().find(|a| a.features.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: a.features.dim(),
            });
        }
        arms.sort_by_key(|a| a.id);
        if let Some(w) = arms.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::invalid("arm set", format!("duplicate arm id {}", w[0].id)));
        }
        Ok(Self { group, arms })
    }

    /// Zero-based group index.
    pub fn group(&self) -> usize {
        self.group
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn dim(&self) -> usize {
        self.arms[0].features.dim()
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, id: ArmId) -> Option<&Arm> {
        self.arms
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|i| &self.arms[i])
    }
}

// ── Attacks ────────────────────────────────────────────────────────────────

/// Per-group pass flags for one round; `false` means the group is attacked.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AttackVector(Vec<bool>);

impl AttackVector {
    pub fn new(pass: Vec<bool>) -> Result<Self> {
        if pass.is_empty() {
            return Err(Error::invalid("attack vector", "no groups"));
        }
        Ok(Self(pass))
    }

    pub fn clear(groups: usize) -> Self {
        Self(vec![true; groups.max(1)])
    }

    pub fn single(groups: usize, attacked: usize) -> Result<Self> {
        if attacked >= groups {
            return Err(Error::invalid(
                "attack vector",
                format!("group {} out of range 1..={groups}", attacked + 1),
            ));
        }
        let mut pass = vec![true; groups];
        pass[attacked] = false;
        Ok(Self(pass))
    }

    pub fn groups(&self) -> usize {
        self.0.len()
    }

    pub fn is_attacked(&self, group: usize) -> Result<bool> {
        self.0.get(group).map(|p| !p).ok_or(Error::DimensionMismatch {
            expected: group + 1,
            actual: self.0.len(),
        })
    }

    /// Reward multiplier of `group` (0 or 1).
    pub fn factor(&self, group: usize) -> Result<f64> {
        Ok(if self.is_attacked(group)? { 0.0 } else { 1.0 })
    }

    pub fn attacked_groups(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, p)| !**p).map(|(g, _)| g)
    }
}

// ── Noise ──────────────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Uniform { half_width: f64 },
    Gaussian { sigma: f64 },
}

/// Reward noise law plus the sub-Gaussian constant handed to the confidence
/// width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub sigma_param: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, sigma_param: f64) -> Result<Self> {
        let spec = Self { kind, sigma_param };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        Self::new(NoiseKind::Uniform { half_width }, half_width)
    }

    pub fn none(sigma_param: f64) -> Self {
        Self {
            kind: NoiseKind::None,
            sigma_param,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_sigma = self.sigma_param.is_finite()
            && match self.kind {
                NoiseKind::None => self.sigma_param >= 0.0,
                _ => self.sigma_param > 0.0,
            };
        if !ok_sigma {
            return Err(Error::invalid("noise", format!("sigma_param {}", self.sigma_param)));
        }
        match self.kind {
            NoiseKind::Uniform { half_width } if !(half_width.is_finite() && half_width > 0.0) => {
                Err(Error::invalid("noise", format!("uniform half width {half_width}")))
            }
            NoiseKind::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                Err(Error::invalid("noise", format!("gaussian sigma {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// Largest noise magnitude the environment must tolerate. Gaussian noise
    /// is unbounded, so four standard deviations stand in.
    pub fn amplitude(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform { half_width } => half_width,
            NoiseKind::Gaussian { sigma } => 4.0 * sigma,
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Uniform { half_width: 0.05 },
            sigma_param: 0.05,
        }
    }
}

pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, spec: &NoiseSpec) -> f64 {
    match spec.kind {
        NoiseKind::None => 0.0,
        NoiseKind::Uniform { half_width } => rng.random_range(-half_width..=half_width),
        NoiseKind::Gaussian { sigma } => Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0),
    }
}

// ── Rewards and benchmark ──────────────────────────────────────────────────

pub fn realize_reward(
    group: usize,
    arm: &FeatureVector,
    theta: &GroupParameter,
    attack: &AttackVector,
    noise: f64,
) -> Result<f64> {
    let mean = theta.score(arm)?;
    if attack.is_attacked(group)? {
        return Ok(0.0);
    }
    Ok(mean + noise)
}

/// Best arm under `theta`; lowest id wins ties.
pub fn optimal_arm<'a>(theta: &GroupParameter, arms: &'a ArmSet) -> Result<&'a Arm> {
    let mut best = &arms.arms()[0];
    let mut best_score = theta.score(&best.features)?;
    for arm in &arms.arms()[1..] {
        let s = theta.score(&arm.features)?;
        if s > best_score {
            best = arm;
            best_score = s;
        }
    }
    Ok(best)
}

/// Total expected hindsight reward of each fixed group.
///
/// `armsets(t)` yields the per-group arm sets of round `t` (zero-based).
pub fn group_totals<'a, F>(attacks: &[AttackVector], thetas: &[GroupParameter], mut armsets: F) -> Result<Vec<f64>>
where
    F: FnMut(usize) -> &'a [ArmSet],
{
    let mut totals = vec![0.0; thetas.len()];
    for (t, attack) in attacks.iter().enumerate() {
        let sets = armsets(t);
        if sets.len() != thetas.len() {
            return Err(Error::DimensionMismatch {
                expected: thetas.len(),
                actual: sets.len(),
            });
        }
        for (g, (theta, set)) in thetas.iter().zip(sets).enumerate() {
            if attack.is_attacked(g)? {
                continue;
            }
            let best = optimal_arm(theta, set)?;
            totals[g] += theta.score(&best.features)?;
        }
    }
    Ok(totals)
}

/// Best fixed group in hindsight; lowest index wins ties.
pub fn oracle_group<'a, F>(attacks: &[AttackVector], thetas: &[GroupParameter], armsets: F) -> Result<usize>
where
    F: FnMut(usize) -> &'a [ArmSet],
{
    let totals = group_totals(attacks, thetas, armsets)?;
    Ok(argmax_first(&totals))
}

/// Index of the first maximum.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF walk: first index whose cumulative mass exceeds `u`.
pub fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave the total a hair below one.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

// ── History ────────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEntry {
    pub t: u64,
    pub group: usize,
    pub arm: ArmId,
    pub attacked: bool,
    pub reward: f64,
}

/// Append-only log of past rounds.
#[derive(Clone, Debug, Default)]
pub struct History {
    rounds: Vec<HistoryEntry>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: HistoryEntry) -> Result<()> {
        let expected = self.rounds.len() as u64 + 1;
        if entry.t != expected {
            return Err(Error::invalid(
                "history",
                format!("expected round {expected}, got {}", entry.t),
            ));
        }
        self.rounds.push(entry);
        Ok(())
    }

    pub fn rounds(&self) -> &[HistoryEntry] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}
