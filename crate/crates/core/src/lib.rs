//! Simulators for stochastic contextual linear bandits: OFUL, the
//! norm-adaptive ALB-Norm wrapper, and the epoch-based LR-SCB learner that
//! shifts rewards by its running parameter estimate, plus the Monte-Carlo
//! checks and experiment harness used to study them.

pub mod alb_norm;
pub mod bandit;
pub mod env;
pub mod error;
pub mod harness;
pub mod lr_scb;
pub mod oful;
pub mod shift;
mod sim;
pub mod vector;

pub use alb_norm::{alb_run, AlbConfig, AlbOutcome, NormSchedule, TauRule};
pub use bandit::{best_arm, regret_increment, BanditInstance, ContextSet, RegretTrace};
pub use env::{ContextLaw, Environment, NoiseLaw};
pub use error::{Error, Result};
pub use harness::{fit_logloglog_slope, fit_loglog_slope, run_experiment, Algorithm, CurveSummary, ExperimentConfig, SlopeFit};
pub use lr_scb::{bound_curve_eval, build_epoch_plan, lr_scb_run, BoundCurve, EpochPlan, LrScbConfig, SelectionCenter};
pub use oful::{confidence_radius, oful_run, Oful, OfulConfig, RidgeState};
pub use shift::{argmax_coincidence, coincidence_probability, paired_shift_run, shift_dominance_frequency, ShiftExperimentConfig, ShiftRegrets};
