use rand::{Rng, RngCore};

use super::{
    alpha_t, Exp3State, Policy, PolicyConfig, PolicyContext, PolicyDecision, PolicyKind, RidgeState, RoundOffer, Route,
    UcbScore,
};
use crate::error::{Error, Result};
use crate::model::{optimal_arm, Arm, ArmSet, GroupParameter};

fn fresh_ridges(cfg: &PolicyConfig, dims: &[usize]) -> Result<Vec<RidgeState>> {
    dims.iter().map(|d| RidgeState::new(*d, cfg.lambda)).collect()
}

fn check_groups(offer: &RoundOffer<'_>, expected: usize) -> Result<()> {
    if offer.groups() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: offer.groups(),
        });
    }
    Ok(())
}

/// Highest upper confidence bound within one group; lowest id wins ties.
pub(crate) fn ucb_select<'a>(ridge: &RidgeState, set: &'a ArmSet, alpha: f64) -> Result<(&'a Arm, UcbScore)> {
    let mut best: Option<(&Arm, UcbScore)> = None;
    for arm in set.arms() {
        let x = arm.features.as_slice();
        let score = UcbScore {
            estimate: ridge.predict(x)?,
            width: ridge.width(x)?,
            alpha,
        };
        if best.is_none_or(|(_, b)| score.total() > b.total()) {
            best = Some((arm, score));
        }
    }
    Ok(best.expect("arm sets are non-empty"))
}

fn one_hot(groups: usize, group: Option<usize>) -> Vec<f64> {
    let mut p = vec![0.0; groups];
    if let Some(g) = group.filter(|g| *g < groups) {
        p[g] = 1.0;
    }
    p
}

/// Applies the shared ridge update rule: only strictly positive rewards
/// count as unattacked observations.
fn ridge_update(ridges: &mut [RidgeState], decision: &PolicyDecision, reward: f64) -> Result<()> {
    let Route::Group(g) = decision.route else {
        return Ok(());
    };
    if reward > 0.0 {
        ridges[g].observe(decision.arm.as_slice(), reward)?;
    }
    Ok(())
}

// ── B-EXPUCB ───────────────────────────────────────────────────────────────

/// Blocked exponential weights over groups, LinUCB over arms. With a block
/// length of one this is plain EXPUCB.
#[derive(Clone, Debug)]
pub struct BExpUcb {
    cfg: PolicyConfig,
    exp3: Exp3State,
    ridges: Vec<RidgeState>,
    kind: PolicyKind,
}

impl BExpUcb {
    pub fn new(cfg: PolicyConfig, dims: &[usize]) -> Result<Self> {
        cfg.validate()?;
        let kind = if cfg.block_length == 1 {
            PolicyKind::ExpUcb
        } else {
            PolicyKind::BExpUcb
        };
        Ok(Self {
            exp3: Exp3State::new(dims.len(), cfg.block_length)?,
            ridges: fresh_ridges(&cfg, dims)?,
            cfg,
            kind,
        })
    }

    pub fn unblocked(cfg: PolicyConfig, dims: &[usize]) -> Result<Self> {
        Self::new(PolicyConfig { block_length: 1, ..cfg }, dims)
    }
}

impl Policy for BExpUcb {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn choose(&mut self, t: u64, offer: &RoundOffer<'_>, rng: &mut dyn RngCore) -> Result<PolicyDecision> {
        check_groups(offer, self.ridges.len())?;
        let u: f64 = rng.random();
        let g = self.exp3.begin_round(t, self.cfg.eta, self.cfg.beta, u)?;
        let set = &offer.sets[g];
        let alpha = alpha_t(t, &self.cfg, set.dim());
        let (arm, ucb) = ucb_select(&self.ridges[g], set, alpha)?;
        Ok(PolicyDecision {
            route: Route::Group(g),
            arm_id: arm.id,
            arm: arm.features.clone(),
            ucb: Some(ucb),
        })
    }

    fn update(&mut self, decision: &PolicyDecision, reward: f64) -> Result<()> {
        let Route::Group(g) = decision.route else {
            return Err(Error::invalid("decision", "local route given to a group learner"));
        };
        ridge_update(&mut self.ridges, decision, reward)?;
        let prob = self.exp3.distribution()[g];
        self.exp3.update_cumulative_estimates(g, reward, prob)
    }

    fn group_distribution(&self, _groups: usize) -> Vec<f64> {
        self.exp3.distribution().to_vec()
    }

    fn ridge_states(&self) -> Option<&[RidgeState]> {
        Some(&self.ridges)
    }

    fn exp3_state(&self) -> Option<&Exp3State> {
        Some(&self.exp3)
    }
}

// ── LinUCB over all (group, arm) pairs ─────────────────────────────────────

#[derive(Clone, Debug)]
pub struct LinUcbGroup {
    cfg: PolicyConfig,
    ridges: Vec<RidgeState>,
    last: Option<usize>,
}

impl LinUcbGroup {
    pub fn new(cfg: PolicyConfig, dims: &[usize]) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            ridges: fresh_ridges(&cfg, dims)?,
            cfg,
            last: None,
        })
    }

    pub fn ridges_mut(&mut self) -> &mut [RidgeState] {
        &mut self.ridges
    }
}

impl Policy for LinUcbGroup {
    fn kind(&self) -> PolicyKind {
        PolicyKind::LinUcb
    }

    fn choose(&mut self, t: u64, offer: &RoundOffer<'_>, _rng: &mut dyn RngCore) -> Result<PolicyDecision> {
        check_groups(offer, self.ridges.len())?;
        let mut best: Option<(usize, &Arm, UcbScore)> = None;
        for (g, set) in offer.sets.iter().enumerate() {
            let alpha = alpha_t(t, &self.cfg, set.dim());
            let (arm, ucb) = ucb_select(&self.ridges[g], set, alpha)?;
            if best.is_none_or(|(_, _, b)| ucb.total() > b.total()) {
                best = Some((g, arm, ucb));
            }
        }
        let (g, arm, ucb) = best.ok_or_else(|| Error::invalid("round offer", "no groups"))?;
        self.last = Some(g);
        Ok(PolicyDecision {
            route: Route::Group(g),
            arm_id: arm.id,
            arm: arm.features.clone(),
            ucb: Some(ucb),
        })
    }

    fn update(&mut self, decision: &PolicyDecision, reward: f64) -> Result<()> {
        ridge_update(&mut self.ridges, decision, reward)
    }

    fn group_distribution(&self, groups: usize) -> Vec<f64> {
        one_hot(groups, self.last)
    }

    fn ridge_states(&self) -> Option<&[RidgeState]> {
        Some(&self.ridges)
    }
}

// ── LinUCB with uniformly random groups ────────────────────────────────────

#[derive(Clone, Debug)]
pub struct LinUcbRandom {
    cfg: PolicyConfig,
    ridges: Vec<RidgeState>,
}

impl LinUcbRandom {
    pub fn new(cfg: PolicyConfig, dims: &[usize]) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            ridges: fresh_ridges(&cfg, dims)?,
            cfg,
        })
    }
}

impl Policy for LinUcbRandom {
    fn kind(&self) -> PolicyKind {
        PolicyKind::LinUcbRandom
    }

    fn choose(&mut self, t: u64, offer: &RoundOffer<'_>, rng: &mut dyn RngCore) -> Result<PolicyDecision> {
        check_groups(offer, self.ridges.len())?;
        let g = rng.random_range(0..self.ridges.len());
        let set = &offer.sets[g];
        let alpha = alpha_t(t, &self.cfg, set.dim());
        let (arm, ucb) = ucb_select(&self.ridges[g], set, alpha)?;
        Ok(PolicyDecision {
            route: Route::Group(g),
            arm_id: arm.id,
            arm: arm.features.clone(),
            ucb: Some(ucb),
        })
    }

    fn update(&mut self, decision: &PolicyDecision, reward: f64) -> Result<()> {
        ridge_update(&mut self.ridges, decision, reward)
    }

    fn group_distribution(&self, groups: usize) -> Vec<f64> {
        vec![1.0 / groups as f64; groups]
    }

    fn ridge_states(&self) -> Option<&[RidgeState]> {
        Some(&self.ridges)
    }
}

// ── EXP3 with the full-offload arm ─────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct Exp3FixedArm {
    cfg: PolicyConfig,
    exp3: Exp3State,
}

impl Exp3FixedArm {
    pub fn new(cfg: PolicyConfig, groups: usize) -> Result<Self> {
        let cfg = PolicyConfig { block_length: 1, ..cfg };
        cfg.validate()?;
        Ok(Self {
            exp3: Exp3State::new(groups, 1)?,
            cfg,
        })
    }
}

impl Policy for Exp3FixedArm {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Exp3
    }

    fn choose(&mut self, t: u64, offer: &RoundOffer<'_>, rng: &mut dyn RngCore) -> Result<PolicyDecision> {
        check_groups(offer, self.exp3.estimates().len())?;
        let u: f64 = rng.random();
        let g = self.exp3.begin_round(t, self.cfg.eta, self.cfg.beta, u)?;
        let id = *offer
            .full_offload
            .get(g)
            .ok_or_else(|| Error::invalid("round offer", "missing full-offload arms"))?;
        let arm = offer.sets[g].get(id).ok_or_else(|| {
            Error::invalid(
                "round offer",
                format!("full-offload arm {id} absent from group {}", g + 1),
            )
        })?;
        Ok(PolicyDecision {
            route: Route::Group(g),
            arm_id: arm.id,
            arm: arm.features.clone(),
            ucb: None,
        })
    }

    fn update(&mut self, decision: &PolicyDecision, reward: f64) -> Result<()> {
        let Route::Group(g) = decision.route else {
            return Err(Error::invalid("decision", "local route given to a group learner"));
        };
        let prob = self.exp3.distribution()[g];
        self.exp3.update_cumulative_estimates(g, reward, prob)
    }

    fn group_distribution(&self, _groups: usize) -> Vec<f64> {
        self.exp3.distribution().to_vec()
    }

    fn exp3_state(&self) -> Option<&Exp3State> {
        Some(&self.exp3)
    }
}

// ── Local execution ────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, Default)]
pub struct LocalPolicy;

impl Policy for LocalPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Local
    }

    fn choose(&mut self, _t: u64, offer: &RoundOffer<'_>, _rng: &mut dyn RngCore) -> Result<PolicyDecision> {
        let arm = offer
            .local
            .ok_or_else(|| Error::invalid("round offer", "no local arm"))?;
        Ok(PolicyDecision {
            route: Route::Local,
            arm_id: arm.id,
            arm: arm.features.clone(),
            ucb: None,
        })
    }

    fn update(&mut self, _decision: &PolicyDecision, _reward: f64) -> Result<()> {
        Ok(())
    }

    fn group_distribution(&self, groups: usize) -> Vec<f64> {
        vec![0.0; groups]
    }
}

// ── Hindsight oracle ───────────────────────────────────────────────────────

/// Plays a fixed group with its truly optimal arm every round.
#[derive(Clone, Debug)]
pub struct OraclePolicy {
    group: usize,
    thetas: Vec<GroupParameter>,
}

impl OraclePolicy {
    pub fn new(group: usize, thetas: Vec<GroupParameter>) -> Result<Self> {
        if group >= thetas.len() {
            return Err(Error::invalid(
                "oracle",
                format!("group {} out of range 1..={}", group + 1, thetas.len()),
            ));
        }
        Ok(Self { group, thetas })
    }

    pub fn group(&self) -> usize {
        self.group
    }
}

impl Policy for OraclePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn choose(&mut self, _t: u64, offer: &RoundOffer<'_>, _rng: &mut dyn RngCore) -> Result<PolicyDecision> {
        check_groups(offer, self.thetas.len())?;
        let arm = optimal_arm(&self.thetas[self.group], &offer.sets[self.group])?;
        Ok(PolicyDecision {
            route: Route::Group(self.group),
            arm_id: arm.id,
            arm: arm.features.clone(),
            ucb: None,
        })
    }

    fn update(&mut self, _decision: &PolicyDecision, _reward: f64) -> Result<()> {
        Ok(())
    }

    fn group_distribution(&self, groups: usize) -> Vec<f64> {
        one_hot(groups, Some(self.group))
    }
}

pub fn build_policy(kind: PolicyKind, ctx: &PolicyContext) -> Result<Box<dyn Policy>> {
    let cfg = ctx.config.clone();
    Ok(match kind {
        PolicyKind::BExpUcb => Box::new(BExpUcb::new(cfg, &ctx.dims)?),
        PolicyKind::ExpUcb => Box::new(BExpUcb::unblocked(cfg, &ctx.dims)?),
        PolicyKind::LinUcb => Box::new(LinUcbGroup::new(cfg, &ctx.dims)?),
        PolicyKind::LinUcbRandom => Box::new(LinUcbRandom::new(cfg, &ctx.dims)?),
        PolicyKind::Exp3 => Box::new(Exp3FixedArm::new(cfg, ctx.dims.len())?),
        PolicyKind::Local => Box::new(LocalPolicy),
        PolicyKind::Oracle => {
            let (group, thetas) = ctx
                .oracle
                .clone()
                .ok_or_else(|| Error::invalid("oracle", "hindsight group not supplied"))?;
            Box::new(OraclePolicy::new(group, thetas)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmId, FeatureVector};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arm(id: u64, x: &[f64]) -> Arm {
        Arm {
            id: ArmId(id),
            features: FeatureVector::new(x.to_vec()).unwrap(),
        }
    }

    fn sets(groups: usize) -> Vec<ArmSet> {
        (0..groups)
            .map(|g| {
                ArmSet::new(
                    g,
                    vec![
                        arm(0, &[1.0, 0.2, 0.1]),
                        arm(1, &[1.0, 0.6, 0.7]),
                        arm(2, &[1.0, 0.1, 0.0]),
                    ],
                )
                .unwrap()
            })
            .collect()
    }

    fn offer<'a>(sets: &'a [ArmSet], full: &'a [ArmId], local: &'a Arm) -> RoundOffer<'a> {
        RoundOffer {
            sets,
            full_offload: full,
            local: Some(local),
        }
    }

    fn cfg(beta: f64, block: u64) -> PolicyConfig {
        PolicyConfig {
            eta: 1.0,
            beta,
            block_length: block,
            ..PolicyConfig::default()
        }
    }

    #[test]
    fn fresh_learner_picks_max_norm_arm() {
        let s = sets(4);
        let full = vec![ArmId(2); 4];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let mut p = BExpUcb::new(cfg(0.4, 5), &[3; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = p.choose(1, &offer(&s, &full, &local), &mut rng).unwrap();
        assert_eq!(d.arm_id, ArmId(1));
        let ucb = d.ucb.unwrap();
        assert_eq!(ucb.estimate, 0.0);
        assert_abs_diff_eq!(ucb.width, d.arm.norm(), epsilon = 1e-12);
        assert_eq!(p.group_distribution(4), vec![0.25; 4]);
    }

    #[test]
    fn block_keeps_group_regardless_of_rewards() {
        let s = sets(4);
        let full = vec![ArmId(2); 4];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let o = offer(&s, &full, &local);
        let mut p = BExpUcb::new(cfg(0.4, 3), &[3; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d1 = p.choose(1, &o, &mut rng).unwrap();
        p.update(&d1, 0.0).unwrap();
        let d2 = p.choose(2, &o, &mut rng).unwrap();
        p.update(&d2, 5.0).unwrap();
        let d3 = p.choose(3, &o, &mut rng).unwrap();
        assert_eq!(d1.route, d2.route);
        assert_eq!(d2.route, d3.route);
    }

    #[test]
    fn zero_reward_leaves_ridge_untouched() {
        let s = sets(2);
        let full = vec![ArmId(2); 2];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let mut p = BExpUcb::new(cfg(0.4, 1), &[3; 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = p.choose(1, &offer(&s, &full, &local), &mut rng).unwrap();
        let before: Vec<Vec<f64>> = p
            .ridge_states()
            .unwrap()
            .iter()
            .map(|r| r.v().as_slice().to_vec())
            .collect();
        p.update(&d, 0.0).unwrap();
        let after: Vec<Vec<f64>> = p
            .ridge_states()
            .unwrap()
            .iter()
            .map(|r| r.v().as_slice().to_vec())
            .collect();
        assert_eq!(before, after);
        assert_eq!(p.exp3_state().unwrap().estimates(), &[0.0, 0.0]);
    }

    #[test]
    fn positive_reward_updates_only_chosen_group() {
        let s = sets(3);
        let full = vec![ArmId(2); 3];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let mut p = BExpUcb::new(cfg(0.4, 1), &[3; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = p.choose(1, &offer(&s, &full, &local), &mut rng).unwrap();
        p.update(&d, 0.5).unwrap();
        let g = d.route.group().unwrap();
        for (i, r) in p.ridge_states().unwrap().iter().enumerate() {
            assert_eq!(r.update_count(), u64::from(i == g));
        }
        let est = p.exp3_state().unwrap().estimates();
        assert_abs_diff_eq!(est[g], 0.5 / (1.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn full_exploration_samples_uniformly() {
        let s = sets(4);
        let full = vec![ArmId(2); 4];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let o = offer(&s, &full, &local);
        let mut p = BExpUcb::unblocked(cfg(1.0, 1), &[3; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for t in 1..=n {
            let d = p.choose(t, &o, &mut rng).unwrap();
            counts[d.route.group().unwrap()] += 1;
            p.update(&d, 0.7).unwrap();
        }
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 3.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn linucb_prefers_trained_group() {
        let s = sets(3);
        let full = vec![ArmId(2); 3];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let mut p = LinUcbGroup::new(PolicyConfig::default(), &[3; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = p.choose(1, &offer(&s, &full, &local), &mut rng).unwrap();
        assert_eq!(d.route, Route::Group(0));
        assert_eq!(d.arm_id, ArmId(1));
        // Teach group 3 that arm 1 pays 3; its UCB then dominates the fresh
        // groups' alpha * ||x||.
        for _ in 0..200 {
            p.ridges_mut()[2]
                .observe(s[2].arms()[1].features.as_slice(), 3.0)
                .unwrap();
        }
        let d = p.choose(2, &offer(&s, &full, &local), &mut rng).unwrap();
        assert_eq!(d.route, Route::Group(2));
    }

    #[test]
    fn linucb_is_constant_when_always_attacked() {
        let s = sets(3);
        let full = vec![ArmId(2); 3];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let mut p = LinUcbGroup::new(PolicyConfig::default(), &[3; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let first = p.choose(1, &offer(&s, &full, &local), &mut rng).unwrap();
        for t in 2..50 {
            p.update(&first, 0.0).unwrap();
            let d = p.choose(t, &offer(&s, &full, &local), &mut rng).unwrap();
            assert_eq!((d.route, d.arm_id), (first.route, first.arm_id));
        }
    }

    #[test]
    fn exp3_plays_full_offload_arm() {
        let s = sets(2);
        let full = vec![ArmId(2), ArmId(0)];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let mut p = Exp3FixedArm::new(cfg(0.0, 1), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 1..30 {
            let d = p.choose(t, &offer(&s, &full, &local), &mut rng).unwrap();
            let g = d.route.group().unwrap();
            assert_eq!(d.arm_id, full[g]);
            p.update(&d, 0.1).unwrap();
        }
        let bad = vec![ArmId(7), ArmId(7)];
        let mut p = Exp3FixedArm::new(cfg(0.0, 1), 2).unwrap();
        assert!(p.choose(1, &offer(&s, &bad, &local), &mut rng).is_err());
    }

    #[test]
    fn local_is_constant() {
        let s = sets(2);
        let full = vec![ArmId(2); 2];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let mut p = LocalPolicy;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 1..5 {
            let d = p.choose(t, &offer(&s, &full, &local), &mut rng).unwrap();
            assert_eq!((d.route, d.arm_id), (Route::Local, ArmId(9)));
        }
        assert_eq!(p.group_distribution(2), vec![0.0, 0.0]);
    }

    #[test]
    fn random_linucb_is_uniform_and_shares_arm_rule() {
        let s = sets(4);
        let full = vec![ArmId(2); 4];
        let local = arm(9, &[1.0, 0.0, 0.0]);
        let o = offer(&s, &full, &local);
        let mut p = LinUcbRandom::new(PolicyConfig::default(), &[3; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for t in 1..=n {
            let d = p.choose(t, &o, &mut rng).unwrap();
            let g = d.route.group().unwrap();
            let alpha = alpha_t(t, &PolicyConfig::default(), 3);
            let (want, _) = ucb_select(&p.ridge_states().unwrap()[g], &s[g], alpha).unwrap();
            assert_eq!(d.arm_id, want.id);
            counts[g] += 1;
            p.update(&d, 0.0).unwrap();
        }
        assert!(p.ridge_states().unwrap().iter().all(|r| r.update_count() == 0));
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 3.0 * se, "{counts:?}");
        }
    }
}
