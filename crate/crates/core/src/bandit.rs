//! Domain types shared by every learner, plus pseudo-regret accounting
//! against the hidden parameter.
//!
//! Learners never see a [`BanditInstance`]'s parameter; only the simulator
//! and the regret bookkeeping in this module touch it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{argmax, dot, norm};

/// Slack allowed on `‖θ*‖ ≤ 1` for parameters produced by normalisation.
const NORM_TOLERANCE: f64 = 1e-12;

/// The hidden truth of a contextual linear bandit problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    theta_star: Vec<f64>,
    num_arms: usize,
    noise_sigma: f64,
    rho_min: f64,
    context_scale: f64,
}

impl BanditInstance {
    pub fn new(
        theta_star: Vec<f64>,
        num_arms: usize,
        noise_sigma: f64,
        rho_min: f64,
        context_scale: f64,
    ) -> Result<Self> {
        if theta_star.is_empty() {
            return Err(Error::config("d", "dimension must be positive"));
        }
        if num_arms == 0 {
            return Err(Error::config("k", "number of arms must be positive"));
        }
        if theta_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("theta_star", "entries must be finite"));
        }
        if norm(&theta_star) > 1.0 + NORM_TOLERANCE {
            return Err(Error::config("theta_star", "norm must not exceed 1"));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::config("sigma", "must be finite and nonnegative"));
        }
        if !(rho_min > 0.0 && rho_min.is_finite()) {
            return Err(Error::config("rho_min", "must be finite and positive"));
        }
        if !(context_scale > 0.0 && context_scale.is_finite()) {
            return Err(Error::config("c", "must be finite and positive"));
        }
        Ok(Self {
            theta_star,
            num_arms,
            noise_sigma,
            rho_min,
            context_scale,
        })
    }

    /// Instance whose contexts come from the uniform box law, with the
    /// covariance floor set to that law's exact value `c²/(3d)`.
    pub fn uniform_box(
        theta_star: Vec<f64>,
        num_arms: usize,
        noise_sigma: f64,
        context_scale: f64,
    ) -> Result<Self> {
        let d = theta_star.len().max(1) as f64;
        let rho = context_scale * context_scale / (3.0 * d);
        Self::new(theta_star, num_arms, noise_sigma, rho, context_scale)
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn context_scale(&self) -> f64 {
        self.context_scale
    }

    /// Per-coordinate bound `c/√d` of the context box.
    pub fn coordinate_bound(&self) -> f64 {
        self.context_scale / (self.dim() as f64).sqrt()
    }

    fn check(&self, ctx: &ContextSet) -> Result<()> {
        if ctx.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: ctx.dim(),
            });
        }
        if ctx.num_arms() != self.num_arms {
            return Err(Error::DimensionMismatch {
                expected: self.num_arms,
                found: ctx.num_arms(),
            });
        }
        Ok(())
    }
}

/// The `K x d` matrix of contexts offered in one round; row `i` is arm `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    round: u64,
    num_arms: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ContextSet {
    pub fn zeros(num_arms: usize, dim: usize) -> Self {
        Self {
            round: 0,
            num_arms,
            dim,
            data: vec![0.0; num_arms * dim],
        }
    }

    pub fn from_rows(round: u64, rows: &[Vec<f64>]) -> Result<Self> {
        let num_arms = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if num_arms == 0 || dim == 0 {
            return Err(Error::config("contexts", "need at least one non-empty row"));
        }
        let mut data = Vec::with_capacity(num_arms * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            round,
            num_arms,
            dim,
            data,
        })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, arm: usize) -> &[f64] {
        &self.data[arm * self.dim..(arm + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Inner product of every row with `theta`, written into `out`.
    #[inline]
    pub fn scores_into(&self, theta: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.rows()) {
            *o = dot(row, theta);
        }
    }

    /// Largest absolute entry; used to audit the box bound.
    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn set_round(&mut self, round: u64) {
        self.round = round;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Argmax of `⟨β_j, θ⟩` over the rows of `ctx` and its value, lowest index on ties.
pub fn best_arm_for(theta: &[f64], ctx: &ContextSet) -> (usize, f64) {
    let mut scores = vec![0.0; ctx.num_arms()];
    ctx.scores_into(theta, &mut scores);
    let arm = argmax(&scores);
    (arm, scores[arm])
}

/// The optimal arm under the hidden parameter and its expected reward.
pub fn best_arm(instance: &BanditInstance, ctx: &ContextSet) -> Result<(usize, f64)> {
    instance.check(ctx)?;
    Ok(best_arm_for(instance.theta_star(), ctx))
}

/// Expected-reward gap between the best arm and `chosen`. Always `>= 0`.
pub fn regret_increment(instance: &BanditInstance, ctx: &ContextSet, chosen: usize) -> Result<f64> {
    instance.check(ctx)?;
    if chosen >= ctx.num_arms() {
        return Err(Error::ArmOutOfRange {
            arm: chosen,
            num_arms: ctx.num_arms(),
        });
    }
    let mut scores = vec![0.0; ctx.num_arms()];
    ctx.scores_into(instance.theta_star(), &mut scores);
    Ok(gap_from_scores(&scores, chosen))
}

/// `max(scores) - scores[chosen]`; exactly zero when `chosen` attains the max.
#[inline]
pub(crate) fn gap_from_scores(scores: &[f64], chosen: usize) -> f64 {
    scores[argmax(scores)] - scores[chosen]
}

/// Rounds `{1, 2, 4, ..., 2^k} ∪ {T}` with `2^k <= T`.
pub fn checkpoint_grid(horizon: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut t = 1u64;
    while t <= horizon {
        grid.push(t);
        match t.checked_mul(2) {
            Some(next) => t = next,
            None => break,
        }
    }
    if grid.last() != Some(&horizon) && horizon > 0 {
        grid.push(horizon);
    }
    grid
}

/// Cumulative pseudo-regret of one run with geometric checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    horizon: u64,
    rounds: u64,
    cumulative: f64,
    checkpoints: Vec<(u64, f64)>,
    #[serde(skip)]
    next_checkpoint: u64,
}

impl RegretTrace {
    pub fn new(horizon: u64) -> Self {
        Self {
            horizon,
            rounds: 0,
            cumulative: 0.0,
            checkpoints: Vec::with_capacity(66),
            next_checkpoint: 1,
        }
    }

    /// Adds one round's regret. Increments must be nonnegative.
    #[inline]
    pub fn record(&mut self, increment: f64) {
        debug_assert!(increment >= 0.0, "negative regret increment {increment}");
        debug_assert!(self.rounds < self.horizon, "trace overflow");
        self.rounds += 1;
        self.cumulative += increment;
        if self.rounds == self.next_checkpoint || self.rounds == self.horizon {
            self.checkpoints.push((self.rounds, self.cumulative));
            while self.next_checkpoint <= self.rounds {
                self.next_checkpoint = self.next_checkpoint.saturating_mul(2);
            }
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn cumulative(&self) -> f64 {
        self.cumulative
    }

    pub fn checkpoints(&self) -> &[(u64, f64)] {
        &self.checkpoints
    }

    pub fn is_complete(&self) -> bool {
        self.rounds == self.horizon
    }
}
