//! Experiment runner: configuration, seeded parallel trials, CSV/JSON output
//! and slope fits on the averaged regret curves.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alb_norm::{alb_run, AlbConfig, TauRule};
use crate::bandit::BanditInstance;
use crate::env::{random_parameter, ContextLaw, Environment, NoiseLaw, SeedStream, StreamDomain};
use crate::error::{Error, Result};
use crate::lr_scb::{dimension_condition_holds, lr_scb_run, LrScbConfig, SelectionCenter};
use crate::oful::{oful_run, OfulConfig};

/// CSV header of per-trial checkpoint files.
pub const CSV_HEADER: &str = "trial,algorithm,t,cum_regret";

/// Minimum number of qualifying checkpoints for a slope fit.
pub const MIN_FIT_POINTS: usize = 5;

/// Default lower cut-off for slope fits.
pub const DEFAULT_T_MIN: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Oful,
    AlbNorm,
    LrScb,
    /// OFUL on rewards shifted by `Γ = θ* − ψ u`; the true regret is reported.
    ShiftAnalysis,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Oful, Algorithm::AlbNorm, Algorithm::LrScb, Algorithm::ShiftAnalysis];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Oful => "oful",
            Algorithm::AlbNorm => "alb-norm",
            Algorithm::LrScb => "lr-scb",
            Algorithm::ShiftAnalysis => "shift-analysis",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("algorithm", format!("unknown algorithm `{s}`")))
    }
}

/// Everything that determines an experiment's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub d: usize,
    pub k: usize,
    pub t: u64,
    /// First LR-SCB epoch; `⌈√T⌉` when absent.
    pub t1: Option<u64>,
    pub delta: f64,
    pub sigma: f64,
    /// Context box half-width is `c/√d`.
    pub c: f64,
    pub lambda: f64,
    /// Norm of the random `θ*` drawn per trial.
    pub theta_norm: f64,
    pub radius_scale: f64,
    pub tau: TauRule,
    pub selection: SelectionCenter,
    /// Offset `‖θ* − Γ‖` for `shift-analysis`.
    pub psi: f64,
    pub trials: usize,
    pub base_seed: u64,
    /// Worker threads; all available cores when absent.
    pub threads: Option<usize>,
    pub t_min: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![Algorithm::Oful, Algorithm::LrScb],
            d: 20,
            k: 20,
            t: 1_000_000,
            t1: None,
            delta: 0.1,
            sigma: 1.0,
            c: 1.0,
            lambda: 1.0,
            theta_norm: 1.0,
            radius_scale: 1.0,
            tau: TauRule::SqrtTotal,
            selection: SelectionCenter::Accumulated,
            psi: 0.1,
            trials: 50,
            base_seed: 0,
            threads: None,
            t_min: DEFAULT_T_MIN,
        }
    }
}

fn in_open_unit(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("{v} is not in (0, 1)")))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("{v} must be positive")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Named configurations mirroring the published experiments.
    pub fn preset(name: &str) -> Result<Self> {
        let d = match name {
            "figure-d20" => 20,
            "figure-d25" => 25,
            "figure-d30" => 30,
            _ => return Err(Error::config("preset", format!("unknown preset `{name}`"))),
        };
        Ok(Self {
            d,
            ..Self::default()
        })
    }

    pub const PRESETS: [&'static str; 3] = ["figure-d20", "figure-d25", "figure-d30"];

    pub fn first_epoch(&self) -> u64 {
        self.t1.unwrap_or_else(|| LrScbConfig::new(self.t, self.delta).first_epoch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "at least one algorithm is required"));
        }
        if self.d == 0 {
            return Err(Error::config("d", "dimension must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::config("k", "need at least two arms"));
        }
        if self.t == 0 {
            return Err(Error::config("t", "horizon must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        in_open_unit("delta", self.delta)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma", "must be nonnegative"));
        }
        positive("c", self.c)?;
        positive("lambda", self.lambda)?;
        positive("radius_scale", self.radius_scale)?;
        if !(self.theta_norm >= 0.0 && self.theta_norm <= 1.0) {
            return Err(Error::config("theta_norm", "must lie in [0, 1]"));
        }
        if !(self.psi >= 0.0 && self.psi.is_finite()) {
            return Err(Error::config("psi", "must be nonnegative"));
        }
        if let Some(t1) = self.t1 {
            if t1 > self.t {
                return Err(Error::config("t1", format!("{t1} exceeds horizon {}", self.t)));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        Ok(())
    }

    fn environment(&self, trial: usize) -> Result<(Environment, Vec<f64>)> {
        let seed = self.base_seed.wrapping_add(trial as u64);
        let streams = SeedStream::new(seed);
        let mut rng = streams.rng(StreamDomain::Parameter, 0);
        let theta = random_parameter(self.d, self.theta_norm, &mut rng);
        let direction = random_parameter(self.d, 1.0, &mut rng);
        let instance = BanditInstance::uniform_box(theta, self.k, self.sigma, self.c)?;
        let law = ContextLaw::uniform_box(self.d, self.c)?;
        let env = Environment::new(instance, law, NoiseLaw::gaussian(self.sigma)?, seed)?;
        Ok((env, direction))
    }

    fn oful_config(&self, norm_bound: f64) -> OfulConfig {
        OfulConfig {
            ridge_lambda: self.lambda,
            radius_scale: self.radius_scale,
            ..OfulConfig::new(norm_bound, self.delta, self.t)
        }
    }

    fn alb_config(&self) -> AlbConfig {
        AlbConfig {
            ridge_lambda: self.lambda,
            radius_scale: self.radius_scale,
            ..AlbConfig::new(self.delta).with_tau(self.tau)
        }
    }

    /// One trial of one algorithm; checkpoints of the true regret.
    pub fn run_trial(&self, algorithm: Algorithm, trial: usize) -> Result<TrialResult> {
        let (env, direction) = self.environment(trial)?;
        let zero = vec![0.0; self.d];
        let trace = match algorithm {
            Algorithm::Oful => oful_run(&env, &self.oful_config(1.0), &zero)?.true_trace,
            Algorithm::AlbNorm => alb_run(&env, &self.alb_config(), self.t, &zero)?.true_trace,
            Algorithm::LrScb => {
                let cfg = LrScbConfig {
                    first_epoch: self.first_epoch(),
                    alb: self.alb_config(),
                    selection: self.selection,
                    ..LrScbConfig::new(self.t, self.delta)
                };
                lr_scb_run(&env, &cfg)?.trace
            }
            Algorithm::ShiftAnalysis => {
                let gamma: Vec<f64> = env
                    .instance()
                    .theta_star()
                    .iter()
                    .zip(&direction)
                    .map(|(t, u)| t - self.psi * u)
                    .collect();
                oful_run(&env, &self.oful_config(1.0), &gamma)?.true_trace
            }
        };
        Ok(TrialResult {
            trial,
            algorithm,
            checkpoints: trace.checkpoints().to_vec(),
        })
    }
}

/// Checkpointed cumulative regret of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub checkpoints: Vec<(u64, f64)>,
}

impl TrialResult {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.1)
    }
}

/// Per-checkpoint mean and standard error across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub t: Vec<u64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl CurveSummary {
    /// Summarises the trials of one algorithm. All must share one checkpoint grid.
    pub fn from_trials(algorithm: Algorithm, trials: &[&TrialResult]) -> Result<Self> {
        let first = trials
            .first()
            .ok_or_else(|| Error::config("trials", "no trials to summarise"))?;
        let t: Vec<u64> = first.checkpoints.iter().map(|c| c.0).collect();
        for tr in trials {
            if tr.checkpoints.len() != t.len() || tr.checkpoints.iter().zip(&t).any(|(c, g)| c.0 != *g) {
                return Err(Error::Parse(format!("trial {} has a different checkpoint grid", tr.trial)));
            }
        }
        let n = trials.len() as f64;
        let mut mean = Vec::with_capacity(t.len());
        let mut stderr = Vec::with_capacity(t.len());
        for i in 0..t.len() {
            let m = trials.iter().map(|tr| tr.checkpoints[i].1).sum::<f64>() / n;
            let var = if trials.len() > 1 {
                trials.iter().map(|tr| (tr.checkpoints[i].1 - m).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            mean.push(m);
            stderr.push((var / n).sqrt());
        }
        Ok(Self {
            algorithm,
            trials: trials.len(),
            t,
            mean,
            stderr,
        })
    }

    pub fn points(&self) -> Vec<(u64, f64)> {
        self.t.iter().copied().zip(self.mean.iter().copied()).collect()
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    pub fn final_stderr(&self) -> f64 {
        self.stderr.last().copied().unwrap_or(0.0)
    }
}

/// Least-squares line through transformed checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

impl SlopeFit {
    /// `r² ≥ 0.98`.
    pub fn is_linear(&self) -> bool {
        self.r2 >= 0.98
    }
}

fn ols(xs: &[f64], ys: &[f64]) -> SlopeFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    SlopeFit {
        slope,
        intercept,
        r2,
        points: xs.len(),
    }
}

fn fit_with(points: &[(u64, f64)], t_min: u64, x_of: impl Fn(f64) -> f64) -> Result<SlopeFit> {
    let lo = t_min.max(3);
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(t, r)| *t >= lo && *r > 0.0)
        .map(|(t, r)| (x_of(*t as f64), r.ln()))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            found: xs.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    Ok(ols(&xs, &ys))
}

/// OLS of `ln R` on `ln t` over checkpoints with `t ≥ max(t_min, 3)` and `R > 0`.
pub fn fit_loglog_slope(points: &[(u64, f64)], t_min: u64) -> Result<SlopeFit> {
    fit_with(points, t_min, f64::ln)
}

/// OLS of `ln R` on `ln ln t` over checkpoints with `t ≥ max(t_min, 3)` and `R > 0`.
pub fn fit_logloglog_slope(points: &[(u64, f64)], t_min: u64) -> Result<SlopeFit> {
    fit_with(points, t_min, |t| t.ln().ln())
}

/// Both slope fits of one summary; absent when there are too few points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFits {
    pub algorithm: Algorithm,
    pub loglog: Option<SlopeFit>,
    pub logloglog: Option<SlopeFit>,
}

impl CurveFits {
    pub fn of(summary: &CurveSummary, t_min: u64) -> Self {
        let pts = summary.points();
        Self {
            algorithm: summary.algorithm,
            loglog: fit_loglog_slope(&pts, t_min).ok(),
            logloglog: fit_logloglog_slope(&pts, t_min).ok(),
        }
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summaries: Vec<CurveSummary>,
    pub fits: Vec<CurveFits>,
    #[serde(skip)]
    pub trials: Vec<TrialResult>,
}

impl ExperimentReport {
    pub fn summary(&self, algorithm: Algorithm) -> Option<&CurveSummary> {
        self.summaries.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn fits(&self, algorithm: Algorithm) -> Option<&CurveFits> {
        self.fits.iter().find(|s| s.algorithm == algorithm)
    }
}

/// Runs every (algorithm, trial) pair; results are ordered by algorithm then
/// trial, whatever the worker count.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    config.validate()?;
    if config.algorithms.contains(&Algorithm::LrScb) {
        let c1 = LrScbConfig::new(config.t, config.delta).c1;
        if !dimension_condition_holds(config.d, config.k, config.t, config.delta, c1) {
            log::warn!(
                "d = {} is below C1 (ln T / ln ln T) ln(K^2/delta) for T = {}, K = {}; LR-SCB runs anyway",
                config.d,
                config.t,
                config.k
            );
        }
    }
    let jobs: Vec<(Algorithm, usize)> = config
        .algorithms
        .iter()
        .flat_map(|a| (0..config.trials).map(move |i| (*a, i)))
        .collect();
    let work = || {
        jobs.par_iter()
            .map(|(a, i)| config.run_trial(*a, *i))
            .collect::<Result<Vec<_>>>()
    };
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Summaries and fits for a list of trials.
pub fn summarise(config: &ExperimentConfig, trials: Vec<TrialResult>) -> Result<ExperimentReport> {
    let mut algorithms: Vec<Algorithm> = trials.iter().map(|t| t.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();
    let mut summaries = Vec::new();
    for a in algorithms {
        let of_a: Vec<&TrialResult> = trials.iter().filter(|t| t.algorithm == a).collect();
        summaries.push(CurveSummary::from_trials(a, &of_a)?);
    }
    let fits = summaries.iter().map(|s| CurveFits::of(s, config.t_min)).collect();
    Ok(ExperimentReport {
        config: config.clone(),
        summaries,
        fits,
        trials,
    })
}

/// Runs the experiment and, when `out_dir` is given, writes `trials.csv` and `summary.json` there.
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    let trials = run_trials(config)?;
    let report = summarise(config, trials)?;
    if let Some(dir) = out_dir {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// File names written by [`write_outputs`].
pub fn output_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("trials.csv"), dir.join("summary.json"))
}

pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (csv_path, json_path) = output_paths(dir);
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_csv(&report.trials, std::io::BufWriter::new(file)).map_err(io_err(&csv_path))?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&json_path, json + "\n").map_err(io_err(&json_path))?;
    Ok(())
}

/// One row per (trial, checkpoint) under [`CSV_HEADER`].
pub fn write_csv<W: Write>(trials: &[TrialResult], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for tr in trials {
        for (t, r) in &tr.checkpoints {
            w.write_record([tr.trial.to_string(), tr.algorithm.name().to_string(), t.to_string(), r.to_string()])?;
        }
    }
    w.flush()
}

/// Reads a file written by [`write_csv`] back into trial results.
pub fn read_csv(path: &Path) -> Result<Vec<TrialResult>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse(format!("expected header `{CSV_HEADER}`")));
    }
    let mut out: Vec<TrialResult> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 2));
        let trial: usize = rec[0].parse().map_err(|_| bad("trial"))?;
        let algorithm = Algorithm::parse(&rec[1]).map_err(|_| bad("algorithm"))?;
        let t: u64 = rec[2].parse().map_err(|_| bad("t"))?;
        let r: f64 = rec[3].parse().map_err(|_| bad("cum_regret"))?;
        match out.last_mut() {
            Some(last) if last.trial == trial && last.algorithm == algorithm => last.checkpoints.push((t, r)),
            _ => out.push(TrialResult {
                trial,
                algorithm,
                checkpoints: vec![(t, r)],
            }),
        }
    }
    Ok(out)
}
