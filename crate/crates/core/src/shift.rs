//! Shifted OFUL against the unshifted system.
//!
//! A Γ-shifted OFUL learns `θ* − Γ` from rewards `y − ⟨x, Γ⟩`. On its own
//! action sequence we score the true regret, the regret against `θ* − Γ`, and
//! the correction `Σ ⟨X_t − β*_t, Γ⟩`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{BanditInstance, ContextSet};
use crate::env::{random_parameter, ContextLaw, Environment, NoiseLaw, SeedStream, StreamDomain};
use crate::error::{Error, Result};
use crate::oful::{Oful, OfulConfig};
use crate::sim::{play, RoundView};
use crate::vector::{argmax, norm, sub};

/// Minimum Monte-Carlo sample size for [`coincidence_probability`].
pub const MIN_COINCIDENCE_SAMPLES: usize = 1000;

/// Minimum trial count for [`shift_dominance_frequency`].
pub const MIN_DOMINANCE_TRIALS: usize = 30;

/// Regret functionals of one Γ-shifted OFUL run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRegrets {
    /// `Σ max_j ⟨β_j − X_t, θ*⟩`.
    pub r_true: f64,
    /// `Σ max_j ⟨β_j − X_t, θ* − Γ⟩`.
    pub r_shifted: f64,
    /// `Σ ⟨X_t − β*_t, Γ⟩`.
    pub correction: f64,
    pub rounds: u64,
    /// Rounds on which the argmax under `Γ` equals the argmax under `θ*`.
    pub coincident_rounds: u64,
}

impl ShiftRegrets {
    fn tolerance(&self, rel_tol: f64) -> f64 {
        rel_tol * (self.r_true.abs() + self.r_shifted.abs() + self.correction.abs()).max(1.0)
    }

    /// `R_true ≤ R_shifted + correction`.
    pub fn decomposition_holds(&self, rel_tol: f64) -> bool {
        self.r_true <= self.r_shifted + self.correction + self.tolerance(rel_tol)
    }

    /// `R_true ≤ R_shifted − correction`, which holds round by round because
    /// `max_j ⟨β_j − X, θ* − Γ⟩ ≥ ⟨β* − X, θ* − Γ⟩`.
    pub fn reflected_decomposition_holds(&self, rel_tol: f64) -> bool {
        self.r_true <= self.r_shifted - self.correction + self.tolerance(rel_tol)
    }

    pub fn dominated(&self) -> bool {
        self.r_true <= self.r_shifted
    }

    pub fn all_coincident(&self) -> bool {
        self.coincident_rounds == self.rounds
    }
}

/// True iff the best arm under `theta_star` is also best under `gamma`.
pub fn argmax_coincidence(ctx: &ContextSet, theta_star: &[f64], gamma: &[f64]) -> bool {
    let mut a = vec![0.0; ctx.num_arms()];
    let mut b = vec![0.0; ctx.num_arms()];
    ctx.scores_into(theta_star, &mut a);
    ctx.scores_into(gamma, &mut b);
    argmax(&a) == argmax(&b)
}

/// Runs Γ-shifted OFUL for `config.horizon` rounds and scores its actions.
pub fn paired_shift_run(env: &Environment, gamma: &[f64], config: &OfulConfig) -> Result<ShiftRegrets> {
    if gamma.len() != env.dim() {
        return Err(Error::DimensionMismatch {
            expected: env.dim(),
            found: gamma.len(),
        });
    }
    let k = env.num_arms();
    let target = sub(env.instance().theta_star(), gamma);
    let mut learner = Oful::new(*config, env.dim(), k, env.instance().rho_min())?;
    let mut out = ShiftRegrets {
        r_true: 0.0,
        r_shifted: 0.0,
        correction: 0.0,
        rounds: 0,
        coincident_rounds: 0,
    };
    let mut shifted = vec![0.0; k];
    let mut along_gamma = vec![0.0; k];
    play(env, 1..=config.horizon, gamma, &mut learner, &mut |r: &RoundView<'_>| {
        let best = argmax(r.true_scores);
        r.ctx.scores_into(&target, &mut shifted);
        r.ctx.scores_into(gamma, &mut along_gamma);
        out.r_true += r.true_scores[best] - r.true_scores[r.chosen];
        out.r_shifted += shifted[argmax(&shifted)] - shifted[r.chosen];
        out.correction += along_gamma[r.chosen] - along_gamma[best];
        out.rounds += 1;
        if argmax(&along_gamma) == best {
            out.coincident_rounds += 1;
        }
    });
    Ok(out)
}

/// Monte-Carlo frequency of [`argmax_coincidence`] over fresh context sets.
pub fn coincidence_probability(
    law: &ContextLaw,
    theta_star: &[f64],
    gamma: &[f64],
    num_arms: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    Ok(coincidence_curve(law, theta_star, &[gamma.to_vec()], num_arms, n_samples, seed)?[0])
}

/// Coincidence frequencies for several `Γ` on one shared set of samples.
pub fn coincidence_curve(
    law: &ContextLaw,
    theta_star: &[f64],
    gammas: &[Vec<f64>],
    num_arms: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_samples < MIN_COINCIDENCE_SAMPLES {
        return Err(Error::SampleSize {
            n: n_samples,
            min: MIN_COINCIDENCE_SAMPLES,
        });
    }
    if num_arms < 2 {
        return Err(Error::config("k", "need at least two arms"));
    }
    let d = law.dim();
    if theta_star.len() != d || gammas.iter().any(|g| g.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: gammas.iter().map(Vec::len).find(|&l| l != d).unwrap_or(theta_star.len()),
        });
    }
    let streams = SeedStream::new(seed);
    let hits = (0..n_samples as u64)
        .into_par_iter()
        .fold(
            || (ContextSet::zeros(num_arms, d), vec![0.0; num_arms], vec![0.0; num_arms], vec![0u64; gammas.len()]),
            |(mut ctx, mut a, mut b, mut hits), i| {
                law.fill_keyed(streams.key(StreamDomain::MonteCarlo, i), ctx.data_mut());
                ctx.scores_into(theta_star, &mut a);
                let best = argmax(&a);
                for (h, g) in hits.iter_mut().zip(gammas) {
                    ctx.scores_into(g, &mut b);
                    if argmax(&b) == best {
                        *h += 1;
                    }
                }
                (ctx, a, b, hits)
            },
        )
        .map(|acc| acc.3)
        .reduce(
            || vec![0u64; gammas.len()],
            |mut x, y| {
                for (a, b) in x.iter_mut().zip(y) {
                    *a += b;
                }
                x
            },
        );
    Ok(hits.into_iter().map(|h| h as f64 / n_samples as f64).collect())
}

/// How `Γ` relates to `θ*` in a shift experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GammaChoice {
    /// Per trial: random `θ*` of norm `theta_norm`, `Γ = θ* − ψ u` for a random unit `u`.
    Offset { psi: f64 },
    /// Per trial: random `θ*`, `Γ = θ*/2`.
    HalfTheta,
    /// The same pair in every trial.
    Fixed { theta_star: Vec<f64>, gamma: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftExperimentConfig {
    pub dim: usize,
    pub num_arms: usize,
    pub horizon: u64,
    pub delta: f64,
    pub sigma: f64,
    pub context_scale: f64,
    pub theta_norm: f64,
    pub gamma: GammaChoice,
    pub trials: usize,
    pub base_seed: u64,
    /// OFUL's norm bound on `θ* − Γ`.
    pub norm_bound: f64,
    pub radius_scale: f64,
}

impl ShiftExperimentConfig {
    pub fn offset(dim: usize, num_arms: usize, horizon: u64, psi: f64, trials: usize) -> Self {
        Self {
            dim,
            num_arms,
            horizon,
            delta: 0.1,
            sigma: 1.0,
            context_scale: 1.0,
            theta_norm: 1.0,
            gamma: GammaChoice::Offset { psi },
            trials,
            base_seed: 0,
            norm_bound: 1.0,
            radius_scale: 1.0,
        }
    }

    /// `(θ*, Γ)` for one trial.
    pub fn pair(&self, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = SeedStream::new(seed).rng(StreamDomain::Parameter, 0);
        match &self.gamma {
            GammaChoice::Offset { psi } => {
                let theta = random_parameter(self.dim, self.theta_norm, &mut rng);
                let u = random_parameter(self.dim, 1.0, &mut rng);
                let gamma = theta.iter().zip(&u).map(|(t, v)| t - psi * v).collect();
                Ok((theta, gamma))
            }
            GammaChoice::HalfTheta => {
                let theta = random_parameter(self.dim, self.theta_norm, &mut rng);
                let gamma = theta.iter().map(|t| t / 2.0).collect();
                Ok((theta, gamma))
            }
            GammaChoice::Fixed { theta_star, gamma } => {
                if theta_star.len() != self.dim || gamma.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: if theta_star.len() != self.dim { theta_star.len() } else { gamma.len() },
                    });
                }
                Ok((theta_star.clone(), gamma.clone()))
            }
        }
    }

    /// Lemma regime `ψ < 1/(2√2)` for a given pair.
    pub fn in_lemma_regime(theta_star: &[f64], gamma: &[f64]) -> bool {
        norm(&sub(theta_star, gamma)) < 1.0 / (2.0 * std::f64::consts::SQRT_2)
    }

    pub fn run_trial(&self, trial: usize) -> Result<ShiftRegrets> {
        let seed = self.base_seed.wrapping_add(trial as u64);
        let (theta, gamma) = self.pair(seed)?;
        let instance = BanditInstance::uniform_box(theta, self.num_arms, self.sigma, self.context_scale)?;
        let law = ContextLaw::uniform_box(self.dim, self.context_scale)?;
        let env = Environment::new(instance, law, NoiseLaw::gaussian(self.sigma)?, seed)?;
        let mut oful = OfulConfig::new(self.norm_bound, self.delta, self.horizon);
        oful.radius_scale = self.radius_scale;
        paired_shift_run(&env, &gamma, &oful)
    }
}

/// Per-trial results and the fraction with `R_true ≤ R_shifted`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub frequency: f64,
    pub trials: Vec<ShiftRegrets>,
}

pub fn shift_dominance_frequency(config: &ShiftExperimentConfig) -> Result<DominanceReport> {
    if config.trials < MIN_DOMINANCE_TRIALS {
        return Err(Error::SampleSize {
            n: config.trials,
            min: MIN_DOMINANCE_TRIALS,
        });
    }
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| config.run_trial(i))
        .collect::<Result<Vec<_>>>()?;
    let dominated = trials.iter().filter(|t| t.dominated()).count();
    Ok(DominanceReport {
        frequency: dominated as f64 / trials.len() as f64,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::dot;
    use proptest::prelude::*;

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

    /// Recomputes the three functionals from scratch for a given action list.
    fn brute_force(env: &Environment, gamma: &[f64], actions: &[usize]) -> (f64, f64, f64) {
        let theta = env.instance().theta_star();
        let target = sub(theta, gamma);
        let (mut rt, mut rs, mut c) = (0.0, 0.0, 0.0);
        for (i, &a) in actions.iter().enumerate() {
            let ctx = env.contexts(i as u64 + 1);
            let x = ctx.row(a);
            let best_true = (0..ctx.num_arms()).map(|j| dot(ctx.row(j), theta)).fold(f64::MIN, f64::max);
            let best_idx = (0..ctx.num_arms())
                .find(|&j| dot(ctx.row(j), theta) == best_true)
                .unwrap();
            let best_shift = (0..ctx.num_arms()).map(|j| dot(ctx.row(j), &target)).fold(f64::MIN, f64::max);
            rt += best_true - dot(x, theta);
            rs += best_shift - dot(x, &target);
            c += dot(x, gamma) - dot(ctx.row(best_idx), gamma);
        }
        (rt, rs, c)
    }

    #[test]
    fn zero_shift_regrets_agree() {
        let e = env(vec![0.3, -0.4, 0.5], 5, 1.0, 4);
        let r = paired_shift_run(&e, &[0.0; 3], &OfulConfig::new(1.0, 0.1, 500)).unwrap();
        assert_eq!(r.r_true, r.r_shifted);
        assert_eq!(r.correction, 0.0);
        assert_eq!(r.rounds, 500);
    }

    #[test]
    fn functionals_match_brute_force() {
        let theta = vec![0.3, -0.4, 0.5];
        let gamma = vec![0.2, -0.1, 0.6];
        let e = env(theta, 5, 1.0, 9);
        let cfg = OfulConfig::new(1.0, 0.1, 300);
        let r = paired_shift_run(&e, &gamma, &cfg).unwrap();
        let actions = crate::oful::oful_run(&e, &cfg, &gamma).unwrap().actions;
        let (rt, rs, c) = brute_force(&e, &gamma, &actions);
        assert!((r.r_true - rt).abs() < 1e-9);
        assert!((r.r_shifted - rs).abs() < 1e-9);
        assert!((r.correction - c).abs() < 1e-9);
    }

    #[test]
    fn reflected_decomposition_counterexample_to_stated_form() {
        // Γ = θ*: the learner sees pure noise, so R_shifted = 0 while
        // R_true > 0 and correction = Σ⟨X − β*, θ*⟩ = −R_true.
        let theta = vec![0.5, -0.5];
        let e = env(theta.clone(), 4, 1.0, 1);
        let r = paired_shift_run(&e, &theta, &OfulConfig::new(1.0, 0.1, 200)).unwrap();
        assert_eq!(r.r_shifted, 0.0);
        assert!(r.r_true > 0.0);
        assert!((r.correction + r.r_true).abs() < 1e-9);
        assert!(!r.decomposition_holds(1e-9));
        assert!(r.reflected_decomposition_holds(1e-9));
    }

    #[test]
    fn coincidence_examples() {
        let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let ctx = ContextSet::from_rows(1, &rows).unwrap();
        assert!(argmax_coincidence(&ctx, &[1.0, 0.0], &[0.9, 0.0]));
        assert!(!argmax_coincidence(&ctx, &[0.1, 0.0], &[-0.1, 0.0]));
        assert!(argmax_coincidence(&ctx, &[0.1, 0.0], &[0.1, 0.0]));
    }

    #[test]
    fn identical_gamma_always_coincides() {
        let law = ContextLaw::uniform_box(4, 1.0).unwrap();
        let theta = [0.2, 0.4, -0.1, 0.3];
        assert_eq!(coincidence_probability(&law, &theta, &theta, 6, 2000, 5).unwrap(), 1.0);
    }

    #[test]
    fn one_dimensional_reflection_never_coincides() {
        // In one dimension −θ* reverses the order of any two distinct contexts.
        let law = ContextLaw::uniform_box(1, 1.0).unwrap();
        let p = coincidence_probability(&law, &[0.5], &[-0.5], 2, 10_000, 3).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn sample_size_enforced() {
        let law = ContextLaw::uniform_box(2, 1.0).unwrap();
        assert!(matches!(
            coincidence_probability(&law, &[0.1, 0.1], &[0.1, 0.1], 2, 999, 0),
            Err(Error::SampleSize { .. })
        ));
        let cfg = ShiftExperimentConfig::offset(2, 2, 10, 0.1, 29);
        assert!(matches!(shift_dominance_frequency(&cfg), Err(Error::SampleSize { .. })));
    }

    #[test]
    fn zero_gap_dominance_is_total() {
        let mut cfg = ShiftExperimentConfig::offset(3, 4, 200, 0.0, 30);
        cfg.gamma = GammaChoice::Fixed {
            theta_star: vec![0.3, 0.2, -0.5],
            gamma: vec![0.0; 3],
        };
        let rep = shift_dominance_frequency(&cfg).unwrap();
        assert_eq!(rep.frequency, 1.0);
        assert!(rep.trials.iter().all(|t| t.r_true == t.r_shifted));
    }

    #[test]
    fn offset_pairs_have_requested_gap() {
        let cfg = ShiftExperimentConfig::offset(10, 4, 10, 0.05, 30);
        let (theta, gamma) = cfg.pair(7).unwrap();
        assert!((norm(&sub(&theta, &gamma)) - 0.05).abs() < 1e-12);
        assert!(ShiftExperimentConfig::in_lemma_regime(&theta, &gamma));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reflected_bound_always_holds(seed in 0u64..10_000, d in 1usize..6, k in 2usize..6, g in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let mut rng = SeedStream::new(seed).rng(StreamDomain::Parameter, 0);
            let theta = random_parameter(d, 0.8, &mut rng);
            let e = env(theta, k, 1.0, seed);
            let r = paired_shift_run(&e, &g[..d], &OfulConfig::new(1.0, 0.1, 150)).unwrap();
            prop_assert!(r.reflected_decomposition_holds(1e-9));
            if r.all_coincident() {
                prop_assert!(r.correction <= 1e-12);
            }
        }
    }
}
