//! One seeded simulation run.

use rand::Rng;
use serde::Serialize;

use super::config::Prepared;
use super::output::quantize;
use crate::adversaries::Attacker;
use crate::edge::switching_cost;
use crate::error::Result;
use crate::metrics::{prediction_error, RoundRow, RunRecord};
use crate::model::{argmax_first, draw_noise, group_totals, optimal_arm, AttackVector};
use crate::policies::{build_policy, PolicyContext, PolicyKind, RoundOffer, Route};
use crate::rng::{SeedTree, Stream};

/// Metadata written next to the CSVs.
#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub experiment: String,
    pub scenario: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub horizon: u64,
    pub groups: usize,
    pub beta: f64,
    pub eta: f64,
    pub block_length: u64,
    pub lambda: f64,
    pub delta: f64,
    pub sigma: f64,
    pub d: Option<usize>,
    pub tau: f64,
    pub kappa: f64,
    /// One-based hindsight group under the realized attacks.
    pub oracle_group: usize,
    /// Expected hindsight reward of every fixed group.
    pub group_totals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub info: RunInfo,
    pub record: RunRecord,
}

/// Task profile index for every round.
pub fn draw_tasks(prepared: &Prepared, tree: &SeedTree) -> Vec<usize> {
    (1..=prepared.config.horizon)
        .map(|t| {
            let u: f64 = tree.round_rng(Stream::Tasks, t).random();
            if u < prepared.config.tasks.p_yolo(t) {
                prepared.yolo_task
            } else {
                prepared.resnet_task
            }
        })
        .collect()
}

/// Best fixed group when the learner commits to it from round 1, facing
/// the attacker's responses to that commitment.
pub fn hindsight_group(prepared: &Prepared, tree: &SeedTree, tasks: &[usize]) -> Result<usize> {
    let scenario = &prepared.scenario;
    let groups = scenario.groups();
    let simulate = |fixed: Option<usize>| -> Result<Vec<AttackVector>> {
        let mut attacker = Attacker::new(prepared.attacker.clone(), groups)?;
        (1..=tasks.len() as u64)
            .map(|t| {
                let learner = if t > 1 { fixed } else { None };
                attacker.step(t, learner, &mut tree.round_rng(Stream::Attacker, t))
            })
            .collect()
    };
    let armsets = |t: usize| scenario.task(tasks[t]).sets();
    if prepared.attacker.is_oblivious() {
        let attacks = simulate(None)?;
        let totals = group_totals(&attacks, scenario.thetas(), armsets)?;
        return Ok(argmax_first(&totals));
    }
    let mut own = Vec::with_capacity(groups);
    for g in 0..groups {
        let attacks = simulate(Some(g))?;
        own.push(group_totals(&attacks, scenario.thetas(), armsets)?[g]);
    }
    Ok(argmax_first(&own))
}

pub fn simulate(prepared: &Prepared, seed: u64) -> Result<SimOutput> {
    let cfg = &prepared.config;
    let scenario = &prepared.scenario;
    let groups = scenario.groups();
    let tree = SeedTree::new(seed);
    let tasks = draw_tasks(prepared, &tree);

    let oracle = match cfg.policy {
        PolicyKind::Oracle => Some((hindsight_group(prepared, &tree, &tasks)?, scenario.thetas().to_vec())),
        _ => None,
    };
    let ctx = PolicyContext {
        config: prepared.policy_config.clone(),
        dims: scenario.dims(),
        oracle,
    };
    let mut policy = build_policy(cfg.policy, &ctx)?;
    let mut attacker = Attacker::new(prepared.attacker.clone(), groups)?;

    let horizon = cfg.horizon as usize;
    let mut rows = Vec::with_capacity(horizon);
    let mut sampling = Vec::with_capacity(horizon);
    let mut pred_error = cfg.policy.uses_ridge().then(|| Vec::with_capacity(horizon));
    let mut attacks = Vec::with_capacity(horizon);
    let mut noises = Vec::with_capacity(horizon);
    let mut prev: Option<Route> = None;

    for t in 1..=cfg.horizon {
        let task = tasks[t as usize - 1];
        let arms = scenario.task(task);
        let offer = RoundOffer {
            sets: arms.sets(),
            full_offload: arms.full_offload(),
            local: Some(arms.local()),
        };
        let decision = policy.choose(t, &offer, &mut tree.round_rng(Stream::Policy, t))?;
        let attack = attacker.step(t, prev.and_then(Route::group), &mut tree.round_rng(Stream::Attacker, t))?;
        let noise = draw_noise(&mut tree.round_rng(Stream::Noise, t), &cfg.noise);
        let reward = scenario.realize_round(task, &decision, &attack, noise)?;
        sampling.push(policy.group_distribution(groups));
        policy.update(&decision, reward)?;
        if let (Some(errs), Some(ridges)) = (pred_error.as_mut(), policy.ridge_states()) {
            errs.push(prediction_error(ridges, scenario.thetas())?);
        }
        let attacked = match decision.route {
            Route::Group(g) => attack.is_attacked(g)?,
            Route::Local => false,
        };
        rows.push(RoundRow {
            t,
            route: decision.route,
            arm_id: decision.arm_id,
            attacked,
            reward: quantize(reward),
            oracle_reward: 0.0,
            switch_cost: switching_cost(decision.route, prev, prepared.policy_config.tau),
            bonus: decision.ucb.filter(|_| !attacked).map(|u| u.bonus()),
            task,
        });
        prev = Some(decision.route);
        attacks.push(attack);
        noises.push(noise);
    }

    // Benchmark under the realized attack sequence.
    let totals = group_totals(&attacks, scenario.thetas(), |t| scenario.task(tasks[t]).sets())?;
    let best = argmax_first(&totals);
    for (i, row) in rows.iter_mut().enumerate() {
        let arms = scenario.task(tasks[i]);
        let arm = optimal_arm(&scenario.thetas()[best], &arms.sets()[best])?;
        let noise = if cfg.realized_noise_oracle { noises[i] } else { 0.0 };
        let base = scenario.expected_reward(tasks[i], Route::Group(best), arm.id)? + noise;
        row.oracle_reward = quantize(attacks[i].factor(best)? * base);
    }

    let pc = &prepared.policy_config;
    Ok(SimOutput {
        info: RunInfo {
            experiment: cfg.name.clone(),
            scenario: scenario.name().to_string(),
            policy: cfg.policy,
            seed,
            horizon: cfg.horizon,
            groups,
            beta: pc.beta,
            eta: pc.eta,
            block_length: pc.block_length,
            lambda: pc.lambda,
            delta: pc.delta,
            sigma: pc.sigma,
            d: pc.d,
            tau: pc.tau,
            kappa: scenario.kappa(),
            oracle_group: best + 1,
            group_totals: totals,
        },
        record: RunRecord {
            groups,
            tau: pc.tau,
            rows,
            sampling,
            pred_error,
        },
    })
}
