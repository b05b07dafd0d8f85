//! OFUL: ridge estimation, an ℓ₂ confidence ball whose radius shrinks as
//! `1/√t`, and optimistic arm selection.
//!
//! The inner maximisation `max_{θ ∈ ball} ⟨β, θ⟩` over a ball of radius `r`
//! around `θ̂` equals `⟨β, θ̂⟩ + r‖β‖`, so selection costs `O(Kd)` and the
//! ridge update `O(d²)` per round.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bandit::{ContextSet, RegretTrace};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::sim::{play, Policy, Recorder};
use crate::vector::{argmax, axpy, dot, dot_and_norm_sq, mat_vec_into, sub};

/// Rank-one updates between full re-factorizations of the Gram matrix.
pub const REFACTOR_INTERVAL: u64 = 4096;

/// Largest tolerated `‖G·G⁻¹ − I‖_max` before a forced re-factorization.
pub const INVERSE_DRIFT_TOLERANCE: f64 = 1e-6;

/// `(b + √d) / (ρ_min √t) · ln(K T̃ / δ)`, or `+∞` when `t = 0`.
pub fn confidence_radius(
    norm_bound: f64,
    dim: usize,
    rho_min: f64,
    t: u64,
    num_arms: usize,
    horizon: u64,
    delta: f64,
) -> f64 {
    if t == 0 {
        return f64::INFINITY;
    }
    let log_term = ((num_arms as f64) * (horizon as f64) / delta).ln();
    (norm_bound + (dim as f64).sqrt()) / (rho_min * (t as f64).sqrt()) * log_term
}

/// Incremental ridge regression state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeState {
    dim: usize,
    ridge_lambda: f64,
    /// Gram matrix as of the last re-factorization; contexts seen since then
    /// wait in `pending` and are folded in as one batch.
    gram: Vec<f64>,
    pending: Vec<f64>,
    gram_inverse: Vec<f64>,
    moment: Vec<f64>,
    estimate: Vec<f64>,
    rounds_seen: u64,
    since_refactor: u64,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl RidgeState {
    pub fn new(dim: usize, ridge_lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("d", "dimension must be positive"));
        }
        if !(ridge_lambda > 0.0 && ridge_lambda.is_finite()) {
            return Err(Error::config("lambda", "ridge parameter must be positive"));
        }
        let mut gram = vec![0.0; dim * dim];
        let mut gram_inverse = vec![0.0; dim * dim];
        for i in 0..dim {
            gram[i * dim + i] = ridge_lambda;
            gram_inverse[i * dim + i] = 1.0 / ridge_lambda;
        }
        Ok(Self {
            dim,
            ridge_lambda,
            gram,
            pending: Vec::new(),
            gram_inverse,
            moment: vec![0.0; dim],
            estimate: vec![0.0; dim],
            rounds_seen: 0,
            since_refactor: 0,
            scratch: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ridge_lambda(&self) -> f64 {
        self.ridge_lambda
    }

    /// `λI + Σ xxᵀ` over every observation so far.
    pub fn gram(&self) -> Vec<f64> {
        let d = self.dim;
        let mut g = self.gram.clone();
        for x in self.pending.chunks_exact(d) {
            for (row, xi) in g.chunks_exact_mut(d).zip(x) {
                axpy(row, *xi, x);
            }
        }
        g
    }

    fn flush_pending(&mut self) {
        let d = self.dim;
        if self.pending.is_empty() {
            return;
        }
        let x = DMatrix::from_row_slice(self.pending.len() / d, d, &self.pending);
        let outer = x.tr_mul(&x);
        for (i, row) in self.gram.chunks_exact_mut(d).enumerate() {
            for (j, g) in row.iter_mut().enumerate() {
                *g += outer[(i, j)];
            }
        }
        self.pending.clear();
    }

    pub fn gram_inverse(&self) -> &[f64] {
        &self.gram_inverse
    }

    pub fn moment(&self) -> &[f64] {
        &self.moment
    }

    pub fn estimate(&self) -> &[f64] {
        &self.estimate
    }

    pub fn rounds_seen(&self) -> u64 {
        self.rounds_seen
    }

    /// Adds the observation `(x, y)`.
    pub fn update(&mut self, x: &[f64], y: f64) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        self.scratch.resize(d, 0.0);
        self.pending.extend_from_slice(x);
        axpy(&mut self.moment, y, x);
        self.rounds_seen += 1;
        self.since_refactor += 1;

        // Sherman-Morrison: (G + xxᵀ)⁻¹ = G⁻¹ − (G⁻¹x)(G⁻¹x)ᵀ / (1 + xᵀG⁻¹x)
        // G⁻¹ is symmetric, so G⁻¹x is a sum of its rows; this avoids a reduction per row.
        self.scratch.fill(0.0);
        for (row, xj) in self.gram_inverse.chunks_exact(d).zip(x) {
            axpy(&mut self.scratch, *xj, row);
        }
        let denom = 1.0 + dot(x, &self.scratch);
        if self.since_refactor >= REFACTOR_INTERVAL || !(denom.is_finite() && denom > 0.0) {
            self.refactorize();
            return;
        }
        let inv_denom = 1.0 / denom;
        // θ̂ ← θ̂ + G⁻¹x (y − ⟨x, θ̂⟩) / (1 + xᵀG⁻¹x), with G⁻¹ before the update.
        let step = (y - dot(x, &self.estimate)) * inv_denom;
        for (e, u) in self.estimate.iter_mut().zip(&self.scratch) {
            *e += u * step;
        }
        for (row, ui) in self.gram_inverse.chunks_exact_mut(d).zip(&self.scratch) {
            axpy(row, -ui * inv_denom, &self.scratch);
        }
    }

    /// Recomputes the inverse from the Gram matrix and the estimate from it.
    pub fn refactorize(&mut self) {
        let d = self.dim;
        self.flush_pending();
        let gram = DMatrix::from_row_slice(d, d, &self.gram);
        let inverse = match gram.clone().cholesky() {
            Some(chol) => chol.inverse(),
            // The Gram matrix is λI plus a PSD sum, so this only happens on overflow.
            None => gram.try_inverse().unwrap_or_else(|| DMatrix::identity(d, d) / self.ridge_lambda),
        };
        for i in 0..d {
            for j in 0..d {
                self.gram_inverse[i * d + j] = inverse[(i, j)];
            }
        }
        self.since_refactor = 0;
        mat_vec_into(&self.gram_inverse, &self.moment, &mut self.estimate);
    }

    /// `‖G · G⁻¹ − I‖_max`.
    pub fn inverse_residual(&self) -> f64 {
        let d = self.dim;
        let gram = self.gram();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += gram[i * d + k] * self.gram_inverse[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Re-factorizes if the maintained inverse drifted past tolerance.
    pub fn check_drift(&mut self) -> bool {
        if self.inverse_residual() > INVERSE_DRIFT_TOLERANCE {
            self.refactorize();
            true
        } else {
            false
        }
    }
}

/// Value-style ridge update.
pub fn ridge_update(mut state: RidgeState, x: &[f64], y: f64) -> RidgeState {
    state.update(x, y);
    state
}

/// ℓ₂ ball `{θ : ‖θ − center‖ ≤ radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub norm_bound: f64,
    pub delta: f64,
    pub horizon: u64,
}

impl ConfidenceBall {
    /// `max_{θ ∈ ball} ⟨β, θ⟩`.
    pub fn max_inner(&self, beta: &[f64]) -> f64 {
        dot(beta, &self.center) + self.radius * crate::vector::norm(beta)
    }

    /// `max_{θ ∈ ball} ‖θ‖`.
    pub fn max_norm(&self) -> f64 {
        crate::vector::norm(&self.center) + self.radius
    }
}

/// Argmax of `⟨β_i, center⟩ + radius‖β_i‖`, lowest index on ties. An
/// infinite radius picks the longest context.
#[inline]
pub(crate) fn optimistic_argmax(center: &[f64], radius: f64, ctx: &ContextSet, scores: &mut [f64]) -> usize {
    if radius.is_finite() {
        for (s, row) in scores.iter_mut().zip(ctx.rows()) {
            let (inner, sq) = dot_and_norm_sq(row, center);
            *s = inner + radius * sq.sqrt();
        }
    } else {
        for (s, row) in scores.iter_mut().zip(ctx.rows()) {
            *s = dot(row, row);
        }
    }
    argmax(scores)
}

/// The arm maximising the optimistic reward over `ball`.
pub fn optimistic_select(ball: &ConfidenceBall, ctx: &ContextSet) -> usize {
    let mut scores = vec![0.0; ctx.num_arms()];
    optimistic_argmax(&ball.center, ball.radius, ctx, &mut scores)
}

/// Inputs of one OFUL run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfulConfig {
    /// Norm bound `b` on the parameter being learned.
    pub norm_bound: f64,
    pub delta: f64,
    /// Number of rounds `T̃`; also enters the radius logarithm.
    pub horizon: u64,
    pub ridge_lambda: f64,
    /// Cap the radius at `b + √d`.
    pub clip_radius: bool,
    /// Multiplier on the radius formula; 1 is the formula itself.
    #[serde(default = "unit_scale")]
    pub radius_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl OfulConfig {
    pub fn new(norm_bound: f64, delta: f64, horizon: u64) -> Self {
        Self {
            norm_bound,
            delta,
            horizon,
            ridge_lambda: 1.0,
            clip_radius: true,
            radius_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.norm_bound > 0.0 && self.norm_bound.is_finite()) {
            return Err(Error::config("b", "norm bound must be positive"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config("delta", "must lie in (0, 1]"));
        }
        if self.horizon == 0 {
            return Err(Error::config("t", "horizon must be at least 1"));
        }
        if !(self.ridge_lambda > 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::config("lambda", "ridge parameter must be positive"));
        }
        if !(self.radius_scale > 0.0 && self.radius_scale.is_finite()) {
            return Err(Error::config("radius_scale", "must be positive"));
        }
        Ok(())
    }
}

/// OFUL learner. Knows `d`, `K` and `ρ_min`, never `θ*`.
#[derive(Debug, Clone)]
pub struct Oful {
    config: OfulConfig,
    num_arms: usize,
    rho_min: f64,
    ridge: RidgeState,
    scores: Vec<f64>,
    offset: Option<Vec<f64>>,
    center: Vec<f64>,
}

impl Oful {
    pub fn new(config: OfulConfig, dim: usize, num_arms: usize, rho_min: f64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            num_arms,
            rho_min,
            ridge: RidgeState::new(dim, config.ridge_lambda)?,
            scores: vec![0.0; num_arms],
            offset: None,
            center: vec![0.0; dim],
        })
    }

    /// Selects around `offset + θ̂` instead of `θ̂`; the ridge fit is unchanged.
    pub fn with_center_offset(mut self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.ridge.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ridge.dim(),
                found: offset.len(),
            });
        }
        self.offset = offset.iter().any(|v| *v != 0.0).then(|| offset.to_vec());
        Ok(self)
    }

    /// Centre used for selection.
    pub fn center(&self) -> Vec<f64> {
        match &self.offset {
            Some(o) => o.iter().zip(self.ridge.estimate()).map(|(a, b)| a + b).collect(),
            None => self.ridge.estimate().to_vec(),
        }
    }

    pub fn config(&self) -> &OfulConfig {
        &self.config
    }

    /// Radius of the current ball, built from the rounds seen so far.
    pub fn radius(&self) -> f64 {
        let c = &self.config;
        let dim = self.ridge.dim();
        let r = confidence_radius(
            c.norm_bound,
            dim,
            self.rho_min,
            self.ridge.rounds_seen(),
            self.num_arms,
            c.horizon,
            c.delta,
        ) * c.radius_scale;
        if c.clip_radius {
            r.min(c.norm_bound + (dim as f64).sqrt())
        } else {
            r
        }
    }

    pub fn ball(&self) -> ConfidenceBall {
        ConfidenceBall {
            center: self.center(),
            radius: self.radius(),
            norm_bound: self.config.norm_bound,
            delta: self.config.delta,
            horizon: self.config.horizon,
        }
    }

    #[inline]
    pub fn select(&mut self, ctx: &ContextSet) -> usize {
        let radius = self.radius();
        match &self.offset {
            Some(o) => {
                for ((c, a), b) in self.center.iter_mut().zip(o).zip(self.ridge.estimate()) {
                    *c = a + b;
                }
                optimistic_argmax(&self.center, radius, ctx, &mut self.scores)
            }
            None => optimistic_argmax(self.ridge.estimate(), radius, ctx, &mut self.scores),
        }
    }

    #[inline]
    pub fn observe(&mut self, x: &[f64], y: f64) {
        self.ridge.update(x, y);
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn estimate(&self) -> &[f64] {
        self.ridge.estimate()
    }
}

impl Policy for Oful {
    #[inline]
    fn choose(&mut self, _t: u64, ctx: &ContextSet) -> usize {
        self.select(ctx)
    }

    #[inline]
    fn learn(&mut self, x: &[f64], y: f64) {
        self.observe(x, y);
    }
}

/// Result of [`oful_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct OfulOutcome {
    /// Regret against `θ*`.
    pub true_trace: RegretTrace,
    /// Regret against `θ* − shift`, the parameter the learner is fitting.
    pub shifted_trace: RegretTrace,
    pub estimate: Vec<f64>,
    pub actions: Vec<usize>,
}

/// Runs OFUL for `config.horizon` rounds starting at global round 1, feeding
/// it rewards corrected by `reward_shift`.
pub fn oful_run(env: &Environment, config: &OfulConfig, reward_shift: &[f64]) -> Result<OfulOutcome> {
    oful_run_from(env, config, reward_shift, 1)
}

/// As [`oful_run`], but starting at global round `first_round`.
pub fn oful_run_from(
    env: &Environment,
    config: &OfulConfig,
    reward_shift: &[f64],
    first_round: u64,
) -> Result<OfulOutcome> {
    if reward_shift.len() != env.dim() {
        return Err(Error::DimensionMismatch {
            expected: env.dim(),
            found: reward_shift.len(),
        });
    }
    let mut learner = Oful::new(*config, env.dim(), env.num_arms(), env.instance().rho_min())?;
    let shifted_param = sub(env.instance().theta_star(), reward_shift);
    let mut true_trace = RegretTrace::new(config.horizon);
    let mut shifted_trace = RegretTrace::new(config.horizon);
    let mut actions = Vec::with_capacity(config.horizon as usize);
    {
        let mut recorder = Recorder::new(&mut true_trace, Some((&shifted_param, &mut shifted_trace)), env.num_arms());
        let last = first_round + config.horizon - 1;
        play(env, first_round..=last, reward_shift, &mut learner, &mut |round: &crate::sim::RoundView<'_>| {
            recorder.observe(round);
            actions.push(round.chosen);
        });
    }
    Ok(OfulOutcome {
        true_trace,
        shifted_trace,
        estimate: learner.estimate().to_vec(),
        actions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::BanditInstance;
    use crate::env::{ContextLaw, NoiseLaw};
    use crate::vector::distance;
    use proptest::prelude::*;

    fn ctx(rows: &[&[f64]]) -> ContextSet {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        ContextSet::from_rows(1, &rows).unwrap()
    }

    fn env(theta: Vec<f64>, k: usize, sigma: f64, seed: u64) -> Environment {
        let d = theta.len();
        let inst = BanditInstance::uniform_box(theta, k, sigma, 1.0).unwrap();
        Environment::new(
            inst,
            ContextLaw::uniform_box(d, 1.0).unwrap(),
            NoiseLaw::gaussian(sigma).unwrap(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn radius_formula_value() {
        // (1 + 2) / (0.5 * 2) * ln(2 * 50 / 1) = 3 ln 100
        let r = confidence_radius(1.0, 4, 0.5, 4, 2, 50, 1.0);
        assert!((r - 3.0 * 100f64.ln()).abs() < 1e-12);
        assert!((r - 13.815_510_557_964_274).abs() < 1e-9);
    }

    #[test]
    fn radius_scales_as_inverse_sqrt() {
        let a = confidence_radius(0.7, 5, 0.2, 9, 10, 1000, 0.1);
        let b = confidence_radius(0.7, 5, 0.2, 36, 10, 1000, 0.1);
        assert_eq!(b / a, 0.5);
    }

    #[test]
    fn radius_zero_when_log_vanishes() {
        assert_eq!(confidence_radius(1.0, 3, 0.5, 10, 1, 1, 1.0), 0.0);
        assert!(confidence_radius(1.0, 3, 0.5, 0, 2, 10, 0.1).is_infinite());
    }

    #[test]
    fn zero_radius_is_greedy() {
        let ball = ConfidenceBall {
            center: vec![0.2, -1.0],
            radius: 0.0,
            norm_bound: 1.0,
            delta: 0.1,
            horizon: 10,
        };
        let c = ctx(&[&[0.9, 0.5], &[0.1, -0.3], &[0.0, 0.0]]);
        assert_eq!(optimistic_select(&ball, &c), 1);
    }

    #[test]
    fn bonus_decides_with_zero_center() {
        let ball = ConfidenceBall {
            center: vec![0.0, 0.0],
            radius: 1.0,
            norm_bound: 1.0,
            delta: 0.1,
            horizon: 10,
        };
        assert_eq!(optimistic_select(&ball, &ctx(&[&[0.3, 0.0], &[0.0, 0.4]])), 1);
    }

    #[test]
    fn optimistic_index_hand_values() {
        // 0.6 + 0.5*0.6 = 0.9 versus 0.2 + 0.5*sqrt(0.68) ≈ 0.6123
        let ball = ConfidenceBall {
            center: vec![1.0, 0.0],
            radius: 0.5,
            norm_bound: 1.0,
            delta: 0.1,
            horizon: 10,
        };
        let c = ctx(&[&[0.6, 0.0], &[0.2, 0.8]]);
        assert_eq!(optimistic_select(&ball, &c), 0);
        assert!((ball.max_inner(c.row(0)) - 0.9).abs() < 1e-12);
        assert!((ball.max_inner(c.row(1)) - (0.2 + 0.5 * 0.68f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn fresh_ridge_estimate_is_zero() {
        let s = RidgeState::new(3, 1.0).unwrap();
        assert_eq!(s.estimate(), &[0.0, 0.0, 0.0]);
        assert_eq!(s.rounds_seen(), 0);
    }

    #[test]
    fn single_update_two_by_two_solve() {
        // gram = diag(2, 1), moment = (2, 0) => estimate (1, 0)
        let s = ridge_update(RidgeState::new(2, 1.0).unwrap(), &[1.0, 0.0], 2.0);
        assert_eq!(s.gram(), [2.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.moment(), &[2.0, 0.0]);
        assert!((s.estimate()[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.estimate()[1], 0.0);
    }

    #[test]
    fn scalar_ridge_closed_form() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        for n in 1..=50u32 {
            s.update(&[1.0, 0.0], 1.0);
            let expected = f64::from(n) / f64::from(n + 1);
            assert!((s.estimate()[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn refactorization_keeps_inverse_consistent() {
        let e = env(vec![0.3, -0.2, 0.5], 3, 1.0, 4);
        let mut s = RidgeState::new(3, 1.0).unwrap();
        for t in 1..=(2 * REFACTOR_INTERVAL + 17) {
            let c = e.contexts(t);
            s.update(c.row((t % 3) as usize), e.noise_at(t));
        }
        assert!(s.inverse_residual() <= INVERSE_DRIFT_TOLERANCE);
        assert!(!s.check_drift());
    }

    #[test]
    fn zero_shift_traces_identical() {
        let e = env(vec![0.6, 0.0, -0.3], 4, 1.0, 12);
        let out = oful_run(&e, &OfulConfig::new(1.0, 0.1, 500), &[0.0; 3]).unwrap();
        assert_eq!(out.true_trace, out.shifted_trace);
        assert_eq!(out.actions.len(), 500);
    }

    #[test]
    fn perfectly_compensated_system_learns_nothing() {
        let theta = vec![0.4, -0.3, 0.2];
        let e = env(theta.clone(), 5, 0.0, 3);
        let out = oful_run(&e, &OfulConfig::new(1.0, 0.1, 300), &theta).unwrap();
        assert!(out.estimate.iter().all(|v| v.abs() < 1e-12));
        assert!(out.shifted_trace.cumulative().abs() < 1e-12);
    }

    #[test]
    fn center_offset_moves_selection_only() {
        let e = env(vec![0.5, 0.5], 3, 1.0, 5);
        let cfg = OfulConfig::new(1.0, 0.1, 50);
        let mut plain = Oful::new(cfg, 2, 3, 1.0 / 6.0).unwrap();
        let mut moved = Oful::new(cfg, 2, 3, 1.0 / 6.0).unwrap().with_center_offset(&[0.3, -0.1]).unwrap();
        assert_eq!(moved.ball().center, vec![0.3, -0.1]);
        for t in 1..=50 {
            let ctx = e.contexts(t);
            let x = ctx.row(0).to_vec();
            plain.observe(&x, 0.7);
            moved.observe(&x, 0.7);
            let _ = moved.select(&ctx);
        }
        assert_eq!(plain.estimate(), moved.estimate());
        let c = moved.center();
        assert!((c[0] - plain.estimate()[0] - 0.3).abs() < 1e-15);
        assert!(Oful::new(cfg, 2, 3, 1.0).unwrap().with_center_offset(&[0.0]).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let e = env(vec![0.5, 0.5], 3, 1.0, 99);
        let cfg = OfulConfig::new(1.0, 0.1, 400);
        let a = oful_run(&e, &cfg, &[0.1, 0.0]).unwrap();
        let b = oful_run(&e, &cfg, &[0.1, 0.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shift_dimension_checked() {
        let e = env(vec![0.5, 0.5], 3, 1.0, 99);
        assert!(oful_run(&e, &OfulConfig::new(1.0, 0.1, 10), &[0.0]).is_err());
        assert!(OfulConfig::new(1.0, 0.0, 10).validate().is_err());
        assert!(OfulConfig::new(1.0, 0.1, 0).validate().is_err());
    }

    #[test]
    fn estimation_error_decays_over_seeds() {
        // d=2, K=2: error at 10⁴ rounds against error at 10³ rounds. With
        // isotropic Gaussian errors whose scales differ by √10 the chance the
        // longer run is worse is 0.1/1.1, so 90% is the mean success rate.
        let theta = vec![0.6, -0.5];
        let trials = 200u64;
        let oracle = 1.0 - 0.1 / 1.1;
        let mut better = 0;
        for seed in 0..trials {
            let e = env(theta.clone(), 2, 1.0, 1000 + seed);
            let short = oful_run(&e, &OfulConfig::new(1.0, 0.1, 1_000), &[0.0, 0.0]).unwrap();
            let long = oful_run(&e, &OfulConfig::new(1.0, 0.1, 10_000), &[0.0, 0.0]).unwrap();
            if distance(&long.estimate, &theta) < distance(&short.estimate, &theta) {
                better += 1;
            }
        }
        let rate = better as f64 / trials as f64;
        let se = (oracle * (1.0 - oracle) / trials as f64).sqrt();
        assert!(rate >= oracle - 3.0 * se, "only {better}/{trials} improved");
    }

    proptest! {
        #[test]
        fn inverse_stays_consistent(
            xs in proptest::collection::vec((proptest::collection::vec(-1.0f64..1.0, 4), -3.0f64..3.0), 1..200),
            lambda in 0.1f64..5.0,
        ) {
            let mut s = RidgeState::new(4, lambda).unwrap();
            for (x, y) in &xs {
                s.update(x, *y);
            }
            prop_assert!(s.inverse_residual() <= INVERSE_DRIFT_TOLERANCE);
            let mut direct = vec![0.0; 4];
            mat_vec_into(s.gram_inverse(), s.moment(), &mut direct);
            for (a, b) in direct.iter().zip(s.estimate()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn zero_radius_matches_brute_force_greedy(
            rows in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 2..12),
            center in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let c = ContextSet::from_rows(1, &rows).unwrap();
            let ball = ConfidenceBall { center: center.clone(), radius: 0.0, norm_bound: 1.0, delta: 0.1, horizon: 1 };
            let chosen = optimistic_select(&ball, &c);
            let mut best = 0;
            for i in 1..rows.len() {
                if dot(&rows[i], &center) > dot(&rows[best], &center) {
                    best = i;
                }
            }
            prop_assert_eq!(chosen, best);
        }
    }
}
