//! Round loop shared by every learner.

use std::ops::RangeInclusive;

use crate::bandit::{ContextSet, RegretTrace};
use crate::env::Environment;
use crate::vector::{argmax, dot};

/// A learner driven by [`play`]. It only ever sees contexts and the
/// (possibly shifted) rewards of the arms it pulls.
pub(crate) trait Policy {
    fn choose(&mut self, t: u64, ctx: &ContextSet) -> usize;
    fn learn(&mut self, x: &[f64], y: f64);
}

/// What the simulator knows about one finished round.
pub(crate) struct RoundView<'a> {
    pub ctx: &'a ContextSet,
    /// `⟨β_j, θ*⟩` for every arm.
    pub true_scores: &'a [f64],
    pub true_param: &'a [f64],
    pub chosen: usize,
}

impl RoundView<'_> {
    #[inline]
    pub fn true_gap(&self) -> f64 {
        self.true_scores[argmax(self.true_scores)] - self.true_scores[self.chosen]
    }
}

/// Plays global rounds `rounds` with `policy`, feeding it `y - ⟨x, shift⟩`.
pub(crate) fn play<P: Policy, F: FnMut(&RoundView<'_>)>(
    env: &Environment,
    rounds: RangeInclusive<u64>,
    shift: &[f64],
    policy: &mut P,
    on_round: &mut F,
) {
    let theta = env.instance().theta_star();
    let mut ctx = ContextSet::zeros(env.num_arms(), env.dim());
    let mut true_scores = vec![0.0; env.num_arms()];
    let shifted = shift.iter().any(|v| *v != 0.0);
    for t in rounds {
        env.fill_contexts(t, &mut ctx);
        ctx.scores_into(theta, &mut true_scores);
        let chosen = policy.choose(t, &ctx);
        let x = ctx.row(chosen);
        let y = true_scores[chosen] + env.noise_at(t);
        let y_fed = if shifted { y - dot(x, shift) } else { y };
        policy.learn(x, y_fed);
        on_round(&RoundView {
            ctx: &ctx,
            true_scores: &true_scores,
            true_param: theta,
            chosen,
        });
    }
}

/// Records regret against `θ*` and, optionally, against a second parameter.
pub(crate) struct Recorder<'a> {
    pub true_trace: &'a mut RegretTrace,
    pub shifted: Option<(&'a [f64], &'a mut RegretTrace)>,
    scores: Vec<f64>,
}

impl<'a> Recorder<'a> {
    pub fn new(true_trace: &'a mut RegretTrace, shifted: Option<(&'a [f64], &'a mut RegretTrace)>, num_arms: usize) -> Self {
        Self {
            true_trace,
            shifted,
            scores: vec![0.0; num_arms],
        }
    }

    #[inline]
    pub fn observe(&mut self, round: &RoundView<'_>) {
        let gap = round.true_gap();
        self.true_trace.record(gap);
        if let Some((param, trace)) = self.shifted.as_mut() {
            if *param == round.true_param {
                trace.record(gap);
            } else {
                round.ctx.scores_into(param, &mut self.scores);
                let best = self.scores[argmax(&self.scores)];
                trace.record(best - self.scores[round.chosen]);
            }
        }
    }
}
