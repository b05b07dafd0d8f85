//! ALB-Norm: OFUL replayed over doubling sub-epochs with a shrinking
//! estimate `b_i` of the parameter norm and a halving slack `δ_i`.
//!
//! A run starts with `2τ` rounds of uniformly random arms, fits ridge on
//! them and sets `b₁ = ‖θ̂₀‖ + √2 σ √((d/τ) ln(1/δ_s))`. Sub-epoch `i` then
//! runs a fresh OFUL with `(b_i, δ_i)`; at its end the bound is refined to
//! the largest norm in the final confidence ball, clipped so it never grows.

use serde::{Deserialize, Serialize};

use crate::bandit::{ContextSet, RegretTrace};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::oful::{Oful, OfulConfig, RidgeState};
use crate::sim::{play, Policy, Recorder, RoundView};
use crate::vector::{norm, sub};

/// Lower clip of every norm bound.
pub const NORM_FLOOR: f64 = 1e-3;

/// Upper clip of the initial norm bound (the prior `‖θ*‖ ≤ 1`).
pub const NORM_CAP: f64 = 1.0;

/// `⌈(16/ρ² + 8/(3ρ)) · ln(2dT/δ)⌉`.
pub fn tau_min(rho_min: f64, dim: usize, horizon: u64, delta: f64) -> u64 {
    let factor = 16.0 / (rho_min * rho_min) + 8.0 / (3.0 * rho_min);
    let log = (2.0 * dim as f64 * horizon as f64 / delta).ln();
    (factor * log).ceil().max(1.0) as u64
}

/// How many exploration rounds (`2τ`) a run spends before its first OFUL sub-epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum TauRule {
    /// [`tau_min`] with the run's own length as horizon.
    Theoretical,
    /// `τ = ⌈√T_total⌉`, matching the first sub-epoch length.
    SqrtTotal,
    Fixed(u64),
}

impl TauRule {
    pub fn resolve(&self, total_rounds: u64, dim: usize, rho_min: f64, delta: f64) -> u64 {
        match *self {
            TauRule::Theoretical => tau_min(rho_min, dim, total_rounds, delta),
            TauRule::SqrtTotal => ceil_sqrt(total_rounds).max(1),
            TauRule::Fixed(tau) => tau,
        }
    }
}

/// `⌈√n⌉`, exact for all `u64`.
pub fn ceil_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.saturating_mul(r) < n {
        r += 1;
    }
    while r > 0 && (r - 1).saturating_mul(r - 1) >= n {
        r -= 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlbConfig {
    /// Slack `δ₁` of the first sub-epoch.
    pub delta: f64,
    pub tau: TauRule,
    /// Slack `δ_s` of the initial norm estimate.
    pub init_slack: f64,
    pub ridge_lambda: f64,
    pub clip_radius: bool,
    pub radius_scale: f64,
}

impl AlbConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            tau: TauRule::SqrtTotal,
            init_slack: delta,
            ridge_lambda: 1.0,
            clip_radius: true,
            radius_scale: 1.0,
        }
    }

    pub fn with_tau(mut self, tau: TauRule) -> Self {
        self.tau = tau;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta", "must lie in (0, 1)"));
        }
        if !(self.init_slack > 0.0 && self.init_slack < 1.0) {
            return Err(Error::config("init_slack", "must lie in (0, 1)"));
        }
        if !(self.radius_scale > 0.0 && self.radius_scale.is_finite()) {
            return Err(Error::config("radius_scale", "must be positive"));
        }
        if let TauRule::Fixed(0) = self.tau {
            return Err(Error::config("tau", "must be at least 1"));
        }
        Ok(())
    }
}

/// `√2 σ √((d/τ) ln(1/δ_s))`.
pub fn norm_slack(sigma: f64, dim: usize, tau: u64, delta_s: f64) -> f64 {
    std::f64::consts::SQRT_2 * sigma * ((dim as f64 / tau as f64) * (1.0 / delta_s).ln()).sqrt()
}

/// Initial norm bound and the exploration fit behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimate {
    pub norm_bound: f64,
    pub estimate: Vec<f64>,
    pub rounds: u64,
}

struct Explorer<'a> {
    env: &'a Environment,
    ridge: RidgeState,
}

impl Policy for Explorer<'_> {
    #[inline]
    fn choose(&mut self, t: u64, _ctx: &ContextSet) -> usize {
        self.env.exploration_arm(t)
    }

    #[inline]
    fn learn(&mut self, x: &[f64], y: f64) {
        self.ridge.update(x, y);
    }
}

fn explore<F: FnMut(&RoundView<'_>)>(
    env: &Environment,
    tau: u64,
    delta_s: f64,
    ridge_lambda: f64,
    reward_shift: &[f64],
    first_round: u64,
    on_round: &mut F,
) -> Result<InitialEstimate> {
    let mut explorer = Explorer {
        env,
        ridge: RidgeState::new(env.dim(), ridge_lambda)?,
    };
    let rounds = 2 * tau;
    play(env, first_round..=first_round + rounds - 1, reward_shift, &mut explorer, &mut *on_round);
    let estimate = explorer.ridge.estimate().to_vec();
    let raw = norm(&estimate) + norm_slack(env.noise().sigma(), env.dim(), tau, delta_s);
    Ok(InitialEstimate {
        norm_bound: raw.clamp(NORM_FLOOR, NORM_CAP),
        estimate,
        rounds,
    })
}

/// Plays `2τ` random arms from round 1 on rewards shifted by `reward_shift`
/// and returns the clipped initial norm bound.
pub fn initial_norm_estimate(env: &Environment, tau: u64, delta_s: f64, reward_shift: &[f64]) -> Result<InitialEstimate> {
    if tau == 0 {
        return Err(Error::config("tau", "must be at least 1"));
    }
    check_shift(env, reward_shift)?;
    let mut trace = RegretTrace::new(2 * tau);
    let mut recorder = Recorder::new(&mut trace, None, env.num_arms());
    explore(env, tau, delta_s, 1.0, reward_shift, 1, &mut |r| recorder.observe(r))
}

/// Largest norm in the ball around `estimate`, clipped to `[NORM_FLOOR, previous]`.
pub fn refine_norm_bound(estimate: &[f64], radius: f64, previous: f64) -> f64 {
    (norm(estimate) + radius).min(previous).max(NORM_FLOOR)
}

/// Sub-epoch lengths after exploration: `⌈√T_total⌉`, doubling, truncated.
pub fn sub_epoch_lengths(total_rounds: u64, tau: u64) -> Vec<u64> {
    let mut remaining = total_rounds.saturating_sub(2 * tau);
    let mut next = ceil_sqrt(total_rounds).max(1);
    let mut lengths = Vec::new();
    while remaining > 0 {
        let len = next.min(remaining);
        lengths.push(len);
        remaining -= len;
        next = next.saturating_mul(2);
    }
    lengths
}

/// One OFUL sub-epoch as it was actually played.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubEpoch {
    pub first_round: u64,
    /// Doubling length before truncation.
    pub nominal_length: u64,
    pub length: u64,
    pub slack: f64,
    pub norm_bound: f64,
}

/// The realised schedule of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSchedule {
    pub tau: u64,
    pub init_slack: f64,
    pub epochs: Vec<SubEpoch>,
    /// Bound after refining at the end of the last sub-epoch.
    pub refined_bound: f64,
}

impl NormSchedule {
    /// `b_i` for every sub-epoch, in order.
    pub fn norm_bounds(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.norm_bound).collect()
    }

    /// Bound used by the last sub-epoch.
    pub fn final_norm_bound(&self) -> f64 {
        self.epochs.last().map_or(NORM_CAP, |e| e.norm_bound)
    }

    pub fn norm_bounds_non_increasing(&self) -> bool {
        self.epochs.windows(2).all(|w| w[1].norm_bound <= w[0].norm_bound) && self.refined_bound <= self.final_norm_bound()
    }

    /// `T_{i+1} = 2T_i` and `δ_{i+1} = δ_i/2` for every consecutive pair.
    pub fn is_doubling(&self) -> bool {
        self.epochs
            .windows(2)
            .all(|w| w[1].nominal_length == 2 * w[0].nominal_length && w[1].slack == w[0].slack / 2.0)
            && self
                .epochs
                .iter()
                .enumerate()
                .all(|(i, e)| e.length == e.nominal_length || i + 1 == self.epochs.len())
    }
}

/// Result of [`alb_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlbOutcome {
    /// Regret against `θ* − shift`.
    pub shifted_trace: RegretTrace,
    /// Regret against `θ*`.
    pub true_trace: RegretTrace,
    /// Ridge estimate of the last sub-epoch.
    pub estimate: Vec<f64>,
    pub initial: InitialEstimate,
    pub schedule: NormSchedule,
}

fn check_shift(env: &Environment, reward_shift: &[f64]) -> Result<()> {
    if reward_shift.len() != env.dim() {
        return Err(Error::DimensionMismatch {
            expected: env.dim(),
            found: reward_shift.len(),
        });
    }
    Ok(())
}

pub(crate) struct AlbSegment {
    pub estimate: Vec<f64>,
    pub initial: InitialEstimate,
    pub schedule: NormSchedule,
}

/// Smallest run length the configured exploration allows.
pub fn minimum_rounds(config: &AlbConfig, total_rounds: u64, dim: usize, rho_min: f64) -> u64 {
    2 * config.tau.resolve(total_rounds, dim, rho_min, config.delta) + 1
}

/// Plays one ALB-Norm run from `first_round`, handing every round to `on_round`.
pub(crate) fn alb_segment<F: FnMut(&RoundView<'_>)>(
    env: &Environment,
    config: &AlbConfig,
    total_rounds: u64,
    reward_shift: &[f64],
    selection_offset: &[f64],
    first_round: u64,
    on_round: &mut F,
) -> Result<AlbSegment> {
    config.validate()?;
    check_shift(env, reward_shift)?;
    let rho_min = env.instance().rho_min();
    let tau = config.tau.resolve(total_rounds, env.dim(), rho_min, config.delta);
    if total_rounds < 2 * tau + 1 {
        return Err(Error::config(
            "t",
            format!("{total_rounds} rounds cannot cover 2τ = {} exploration rounds plus one OFUL round", 2 * tau),
        ));
    }

    let initial = explore(env, tau, config.init_slack, config.ridge_lambda, reward_shift, first_round, on_round)?;
    let mut round = first_round + initial.rounds;
    let mut bound = initial.norm_bound;
    let mut slack = config.delta;
    let mut nominal = ceil_sqrt(total_rounds).max(1);
    let mut epochs = Vec::new();
    let mut estimate = initial.estimate.clone();

    for length in sub_epoch_lengths(total_rounds, tau) {
        let oful_config = OfulConfig {
            norm_bound: bound,
            delta: slack,
            horizon: length,
            ridge_lambda: config.ridge_lambda,
            clip_radius: config.clip_radius,
            radius_scale: config.radius_scale,
        };
        let mut learner = Oful::new(oful_config, env.dim(), env.num_arms(), rho_min)?.with_center_offset(selection_offset)?;
        play(env, round..=round + length - 1, reward_shift, &mut learner, &mut *on_round);
        epochs.push(SubEpoch {
            first_round: round,
            nominal_length: nominal,
            length,
            slack,
            norm_bound: bound,
        });
        bound = refine_norm_bound(learner.estimate(), learner.radius(), bound);
        estimate = learner.estimate().to_vec();
        round += length;
        slack /= 2.0;
        nominal = nominal.saturating_mul(2);
    }

    Ok(AlbSegment {
        estimate,
        initial,
        schedule: NormSchedule {
            tau,
            init_slack: config.init_slack,
            epochs,
            refined_bound: bound,
        },
    })
}

/// Runs ALB-Norm for `total_rounds` rounds from global round 1 on rewards
/// shifted by `reward_shift`.
pub fn alb_run(env: &Environment, config: &AlbConfig, total_rounds: u64, reward_shift: &[f64]) -> Result<AlbOutcome> {
    check_shift(env, reward_shift)?;
    let shifted_param = sub(env.instance().theta_star(), reward_shift);
    let mut true_trace = RegretTrace::new(total_rounds);
    let mut shifted_trace = RegretTrace::new(total_rounds);
    let segment = {
        let mut recorder = Recorder::new(&mut true_trace, Some((&shifted_param, &mut shifted_trace)), env.num_arms());
        alb_segment(env, config, total_rounds, reward_shift, &vec![0.0; env.dim()], 1, &mut |r| recorder.observe(r))?
    };
    Ok(AlbOutcome {
        shifted_trace,
        true_trace,
        estimate: segment.estimate,
        initial: segment.initial,
        schedule: segment.schedule,
    })
}
