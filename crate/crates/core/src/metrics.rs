//! Regret, switching cost and estimation error of a finished run.

use crate::error::{Error, Result};
use crate::model::{ArmId, GroupParameter};
use crate::policies::{RidgeState, Route};

/// One logged round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRow {
    pub t: u64,
    pub route: Route,
    pub arm_id: ArmId,
    pub attacked: bool,
    pub reward: f64,
    /// Hindsight benchmark reward for the same round.
    pub oracle_reward: f64,
    pub switch_cost: f64,
    /// Exploration bonus of the played arm, counted only when the reward
    /// arrived unattacked.
    pub bonus: Option<f64>,
    /// Task profile index.
    pub task: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub groups: usize,
    pub tau: f64,
    pub rows: Vec<RoundRow>,
    /// Per round, the group law in force.
    pub sampling: Vec<Vec<f64>>,
    /// Per round, per group parameter error (ridge-based learners only).
    pub pred_error: Option<Vec<Vec<f64>>>,
}

impl RunRecord {
    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn oracle_rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.oracle_reward).collect()
    }

    pub fn cumulative_reward(&self) -> Vec<f64> {
        running_sum(self.rows.iter().map(|r| r.reward))
    }

    pub fn final_reward(&self) -> f64 {
        self.cumulative_reward().last().copied().unwrap_or(0.0)
    }
}

fn running_sum(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Partial sums of `oracle - realized`.
pub fn reward_regret(record: &RunRecord, oracle_rewards: &[f64]) -> Result<Vec<f64>> {
    if oracle_rewards.len() != record.rows.len() {
        return Err(Error::DimensionMismatch {
            expected: record.rows.len(),
            actual: oracle_rewards.len(),
        });
    }
    Ok(running_sum(
        record.rows.iter().zip(oracle_rewards).map(|(r, o)| o - r.reward),
    ))
}

/// Cumulative switching cost recomputed from the route column alone.
pub fn switching_regret(record: &RunRecord) -> Vec<f64> {
    let mut prev = None;
    running_sum(record.rows.iter().map(|r| {
        let c = crate::edge::switching_cost(r.route, prev, record.tau);
        prev = Some(r.route);
        c
    }))
}

/// Reward regret plus switching cost at the horizon.
pub fn total_regret(record: &RunRecord) -> f64 {
    let reward = reward_regret(record, &record.oracle_rewards())
        .ok()
        .and_then(|v| v.last().copied())
        .unwrap_or(0.0);
    reward + switching_regret(record).last().copied().unwrap_or(0.0)
}

/// `||theta_hat_g - theta_g||` per group.
pub fn prediction_error(ridges: &[RidgeState], thetas: &[GroupParameter]) -> Result<Vec<f64>> {
    if ridges.len() != thetas.len() {
        return Err(Error::DimensionMismatch {
            expected: thetas.len(),
            actual: ridges.len(),
        });
    }
    ridges
        .iter()
        .zip(thetas)
        .map(|(r, th)| {
            if r.dim() != th.dim() {
                return Err(Error::DimensionMismatch {
                    expected: th.dim(),
                    actual: r.dim(),
                });
            }
            Ok(r.theta_hat()
                .iter()
                .zip(th.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt())
        })
        .collect()
}
