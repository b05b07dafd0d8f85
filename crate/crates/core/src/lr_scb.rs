//! LR-SCB: epochs of growing length `T_i = T₁ (ln T)^{i−1}`. Epoch 1 runs
//! plain OFUL; every later epoch runs ALB-Norm on rewards corrected by the
//! running sum `est` of earlier estimates, then adds its own estimate to it.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::alb_norm::{alb_segment, ceil_sqrt, minimum_rounds, AlbConfig, NormSchedule};
use crate::bandit::RegretTrace;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::oful::{Oful, OfulConfig};
use crate::sim::{play, Recorder, RoundView};
use crate::vector::{distance, dot, sub};

/// Epoch lengths and slacks covering `[1, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub horizon: u64,
    pub first_length: u64,
    pub lengths: Vec<u64>,
    pub slacks: Vec<f64>,
}

impl EpochPlan {
    pub fn num_epochs(&self) -> usize {
        self.lengths.len()
    }

    /// Global round at which each epoch starts.
    pub fn first_rounds(&self) -> Vec<u64> {
        let mut start = 1;
        self.lengths
            .iter()
            .map(|len| {
                let s = start;
                start += len;
                s
            })
            .collect()
    }
}

/// Greedy plan: `⌊T₁ (ln T)^{i−1}⌋` while it fits, then the remainder.
pub fn build_epoch_plan(horizon: u64, first_length: u64, delta: f64) -> Result<EpochPlan> {
    if first_length > horizon {
        return Err(Error::config("t1", format!("first epoch {first_length} exceeds horizon {horizon}")));
    }
    if first_length < 3 {
        return Err(Error::config("t1", "first epoch must be at least 3 rounds"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config("delta", "must lie in (0, 1)"));
    }
    let growth = (horizon as f64).ln();
    let mut lengths = Vec::new();
    let mut used = 0u64;
    let mut factor = 1.0f64;
    while used < horizon {
        let next = (first_length as f64 * factor).floor() as u64;
        let len = if used + next <= horizon { next } else { horizon - used };
        lengths.push(len);
        used += len;
        factor *= growth;
    }
    let slacks = (0..lengths.len()).map(|i| delta / 2f64.powi(i as i32)).collect();
    Ok(EpochPlan {
        horizon,
        first_length,
        lengths,
        slacks,
    })
}

/// `⌈C₁ (d²/ρ²) ln⁴(KT/δ) ln(dT/δ)⌉`, saturating at `u64::MAX`.
pub fn theoretical_t1(dim: usize, rho_min: f64, num_arms: usize, horizon: u64, delta: f64, c1: f64) -> u64 {
    let d = dim as f64;
    let t = horizon as f64;
    let lk = (num_arms as f64 * t / delta).ln();
    let ld = (d * t / delta).ln();
    (c1 * d * d / (rho_min * rho_min) * lk.powi(4) * ld).ceil() as u64
}

/// `d ≥ C₁ (ln T / ln ln T) ln(K²/δ)`.
pub fn dimension_condition_holds(dim: usize, num_arms: usize, horizon: u64, delta: f64, c1: f64) -> bool {
    let lt = (horizon as f64).ln();
    let k = num_arms as f64;
    dim as f64 >= c1 * lt / lt.ln() * (k * k / delta).ln()
}

/// `y − ⟨x, est⟩`.
#[inline]
pub fn shift_reward(y: f64, x: &[f64], est: &[f64]) -> f64 {
    y - dot(x, est)
}

/// Running sum of per-epoch estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftAccumulator {
    est: Vec<f64>,
    per_epoch: Vec<Vec<f64>>,
}

impl ShiftAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            est: vec![0.0; dim],
            per_epoch: Vec::new(),
        }
    }

    pub fn add(&mut self, estimate: &[f64]) {
        debug_assert_eq!(estimate.len(), self.est.len());
        for (e, v) in self.est.iter_mut().zip(estimate) {
            *e += v;
        }
        self.per_epoch.push(estimate.to_vec());
    }

    pub fn est(&self) -> &[f64] {
        &self.est
    }

    pub fn per_epoch_estimates(&self) -> &[Vec<f64>] {
        &self.per_epoch
    }

    /// Largest coordinate gap between `est` and a fresh sum of the epoch estimates.
    pub fn sum_discrepancy(&self) -> f64 {
        let mut fresh = vec![0.0; self.est.len()];
        for e in &self.per_epoch {
            for (f, v) in fresh.iter_mut().zip(e) {
                *f += v;
            }
        }
        fresh.iter().zip(&self.est).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Where later epochs centre their optimistic selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionCenter {
    /// `est + θ̂`: the residual fit is added back when ranking arms.
    #[default]
    Accumulated,
    /// `θ̂` alone: arms are ranked by the residual parameter only.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrScbConfig {
    pub horizon: u64,
    pub first_epoch: u64,
    pub delta: f64,
    /// Template for later epochs; its `delta` is replaced by the epoch slack.
    pub alb: AlbConfig,
    pub selection: SelectionCenter,
    /// Constant in the dimension condition check.
    pub c1: f64,
    pub record_actions: bool,
}

impl LrScbConfig {
    /// `T₁ = ⌈√T⌉` (at least 3).
    pub fn new(horizon: u64, delta: f64) -> Self {
        Self {
            horizon,
            first_epoch: ceil_sqrt(horizon).max(3),
            delta,
            alb: AlbConfig::new(delta),
            selection: SelectionCenter::default(),
            c1: 1.0,
            record_actions: false,
        }
    }

    pub fn with_first_epoch(mut self, first_epoch: u64) -> Self {
        self.first_epoch = first_epoch;
        self
    }
}

/// Learner used in one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpochLearner {
    Oful,
    AlbNorm,
    /// Epoch too short for ALB-Norm exploration; shifted OFUL with `b = 1`.
    ShortOful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub learner: EpochLearner,
    pub first_round: u64,
    pub length: u64,
    pub slack: f64,
    /// True-system regret inside the epoch.
    pub regret: f64,
    /// Regret against `θ* − est` as it stood during the epoch.
    pub shifted_regret: f64,
    /// `‖θ* − est‖` after the epoch's estimate is added.
    pub residual_norm: f64,
    pub schedule: Option<NormSchedule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrScbOutcome {
    pub plan: EpochPlan,
    pub trace: RegretTrace,
    pub shift: ShiftAccumulator,
    pub epochs: Vec<EpochReport>,
    /// Chosen arm per round when `record_actions` is set.
    pub actions: Vec<u32>,
}

/// Runs LR-SCB over `config.horizon` rounds from global round 1.
pub fn lr_scb_run(env: &Environment, config: &LrScbConfig) -> Result<LrScbOutcome> {
    let plan = build_epoch_plan(config.horizon, config.first_epoch, config.delta)?;
    let dim = env.dim();
    let k = env.num_arms();
    let rho_min = env.instance().rho_min();
    if !dimension_condition_holds(dim, k, config.horizon, config.delta, config.c1) {
        debug!(
            "d = {dim} is below C1 (ln T / ln ln T) ln(K^2/delta) for T = {}, K = {k}",
            config.horizon
        );
    }
    if plan.num_epochs() > 1 {
        let len = plan.lengths[1];
        let need = minimum_rounds(&config.alb, len, dim, rho_min);
        if len < need {
            return Err(Error::config(
                "t1",
                format!("second epoch of {len} rounds is shorter than the {need} ALB-Norm needs"),
            ));
        }
    }

    let theta = env.instance().theta_star();
    let mut trace = RegretTrace::new(config.horizon);
    let mut shift = ShiftAccumulator::new(dim);
    let mut epochs = Vec::with_capacity(plan.num_epochs());
    let mut actions = Vec::with_capacity(if config.record_actions { config.horizon as usize } else { 0 });
    let zero = vec![0.0; dim];

    for ((&length, &slack), first_round) in plan.lengths.iter().zip(&plan.slacks).zip(plan.first_rounds()) {
        let before = trace.cumulative();
        let est = shift.est().to_vec();
        let target = sub(theta, &est);
        let offset = match config.selection {
            SelectionCenter::Accumulated => &est,
            SelectionCenter::Residual => &zero,
        };
        let mut shifted_trace = RegretTrace::new(length);
        let record = config.record_actions;
        let mut recorder = Recorder::new(&mut trace, Some((&target, &mut shifted_trace)), k);
        let mut observe = |r: &RoundView<'_>| {
            recorder.observe(r);
            if record {
                actions.push(r.chosen as u32);
            }
        };

        let alb_cfg = AlbConfig { delta: slack, ..config.alb };
        let learner = if epochs.is_empty() {
            EpochLearner::Oful
        } else if length >= minimum_rounds(&alb_cfg, length, dim, rho_min) {
            EpochLearner::AlbNorm
        } else {
            EpochLearner::ShortOful
        };

        let (estimate, schedule) = match learner {
            EpochLearner::Oful | EpochLearner::ShortOful => {
                let oful_cfg = OfulConfig {
                    norm_bound: 1.0,
                    delta: slack,
                    horizon: length,
                    ridge_lambda: config.alb.ridge_lambda,
                    clip_radius: config.alb.clip_radius,
                    radius_scale: config.alb.radius_scale,
                };
                let mut oful = Oful::new(oful_cfg, dim, k, rho_min)?.with_center_offset(offset)?;
                play(env, first_round..=first_round + length - 1, &est, &mut oful, &mut observe);
                (oful.estimate().to_vec(), None)
            }
            EpochLearner::AlbNorm => {
                let seg = alb_segment(env, &alb_cfg, length, &est, offset, first_round, &mut observe)?;
                (seg.estimate, Some(seg.schedule))
            }
        };

        shift.add(&estimate);
        epochs.push(EpochReport {
            learner,
            first_round,
            length,
            slack,
            regret: trace.cumulative() - before,
            shifted_regret: shifted_trace.cumulative(),
            residual_norm: distance(theta, shift.est()),
            schedule,
        });
    }

    Ok(LrScbOutcome {
        plan,
        trace,
        shift,
        epochs,
        actions,
    })
}

/// `(Λ, 𝔗, value)` of the regret envelope, or the log argument that left it undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum BoundCurve {
    InRegime { lambda: f64, frak_t: f64, value: f64 },
    OutOfRegime { log_argument: f64 },
}

impl BoundCurve {
    pub fn value(&self) -> Option<f64> {
        match self {
            BoundCurve::InRegime { value, .. } => Some(*value),
            BoundCurve::OutOfRegime { .. } => None,
        }
    }
}

/// `ρ² T / (d² ln⁴(KT/δ) ln(dT/δ))`, the argument of the logarithm in `Λ`.
pub fn lambda_argument(dim: usize, rho_min: f64, num_arms: usize, horizon: u64, delta: f64) -> f64 {
    let d = dim as f64;
    let t = horizon as f64;
    let lk = (num_arms as f64 * t / delta).ln();
    let ld = (d * t / delta).ln();
    rho_min * rho_min * t / (d * d * lk.powi(4) * ld)
}

/// `C₂ (d/ρ)^{3/2} Λ⁵ 𝔗 √(ln T)`.
pub fn bound_curve_eval(dim: usize, rho_min: f64, num_arms: usize, horizon: u64, delta: f64, c2: f64) -> BoundCurve {
    let arg = lambda_argument(dim, rho_min, num_arms, horizon, delta);
    let lt = (horizon as f64).ln();
    if !(arg > 1.0) || !(lt > 1.0) {
        return BoundCurve::OutOfRegime { log_argument: arg };
    }
    let lambda = arg.ln() / lt.ln();
    let d = dim as f64;
    let t = horizon as f64;
    let lk = (num_arms as f64 * t / delta).ln();
    let ld = (d * t / delta).ln();
    let common = lt * lk.powi(4) * ld / (rho_min * rho_min * delta);
    let frak_t = (num_arms as f64 * d * d * common).ln().powi(3) * (d * d * d * common).ln().powi(2);
    let value = c2 * (d / rho_min).powf(1.5) * lambda.powi(5) * frak_t * lt.sqrt();
    BoundCurve::InRegime { lambda, frak_t, value }
}
