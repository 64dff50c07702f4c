//! Exponential-weights group sampler with blocking.

use crate::error::{Error, Result};
use crate::model::sample_categorical;

/// Softmax over `eta * estimates`, mixed with the uniform law at weight
/// `beta`.
pub fn sampling_distribution(estimates: &[f64], eta: f64, beta: f64) -> Result<Vec<f64>> {
    if estimates.is_empty() {
        return Err(Error::invalid("sampling distribution", "no groups"));
    }
    if let Some(bad) = estimates.iter().find(|r| !r.is_finite()) {
        return Err(Error::invalid("sampling distribution", format!("estimate {bad}")));
    }
    if !(eta.is_finite() && eta > 0.0) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(
            "sampling distribution",
            format!("eta {eta}, beta {beta}"),
        ));
    }
    let g = estimates.len() as f64;
    let top = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = estimates.iter().map(|r| (eta * (r - top)).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| (1.0 - beta) * w / total + beta / g).collect())
}

/// Cumulative reward estimates, current distribution and block cursor.
#[derive(Clone, Debug)]
pub struct Exp3State {
    estimates: Vec<f64>,
    distribution: Vec<f64>,
    block_length: u64,
    block_index: u64,
    current_group: Option<usize>,
}

impl Exp3State {
    pub fn new(groups: usize, block_length: u64) -> Result<Self> {
        if groups == 0 {
            return Err(Error::invalid("exp3 state", "no groups"));
        }
        if block_length == 0 {
            return Err(Error::invalid("exp3 state", "block length must be at least 1"));
        }
        Ok(Self {
            estimates: vec![0.0; groups],
            distribution: vec![1.0 / groups as f64; groups],
            block_length,
            block_index: 0,
            current_group: None,
        })
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn distribution(&self) -> &[f64] {
        &self.distribution
    }

    pub fn block_length(&self) -> u64 {
        self.block_length
    }

    pub fn block_index(&self) -> u64 {
        self.block_index
    }

    pub fn current_group(&self) -> Option<usize> {
        self.current_group
    }

    pub fn is_block_start(&self, t: u64) -> bool {
        t.saturating_sub(1).is_multiple_of(self.block_length)
    }

    /// Group for round `t`. A fresh group is drawn with quantile `u` at block
    /// starts; otherwise the running group is kept.
    pub fn begin_round(&mut self, t: u64, eta: f64, beta: f64, u: f64) -> Result<usize> {
        if t == 0 {
            return Err(Error::invalid("round", "rounds start at 1"));
        }
        match self.current_group {
            Some(g) if !self.is_block_start(t) => Ok(g),
            _ => {
                self.distribution = sampling_distribution(&self.estimates, eta, beta)?;
                let g = sample_categorical(&self.distribution, u);
                self.block_index = (t - 1) / self.block_length;
                self.current_group = Some(g);
                Ok(g)
            }
        }
    }

    /// Importance-weighted estimate update for the played group.
    pub fn update_cumulative_estimates(&mut self, group: usize, reward: f64, prob: f64) -> Result<()> {
        if prob.is_nan() || prob <= 0.0 {
            return Err(Error::invalid("importance weight", format!("probability {prob}")));
        }
        let slot = self.estimates.get_mut(group).ok_or(Error::DimensionMismatch {
            expected: group + 1,
            actual: 0,
        })?;
        *slot += reward / (prob * self.block_length as f64);
        Ok(())
    }

    /// Probability with which the current group was drawn.
    pub fn current_probability(&self) -> Option<f64> {
        self.current_group.map(|g| self.distribution[g])
    }
}
