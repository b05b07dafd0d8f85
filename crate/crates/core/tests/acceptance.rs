//! Acceptance checks. Each test prints one `PASS`/`FAIL` line per criterion
//! straight to stderr (bypassing the test harness capture) and then asserts.
//!
//! Run all of them with
//! `cargo test -p lrscb-core --test acceptance --no-fail-fast`.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use lrscb_core::bandit::checkpoint_grid;
use lrscb_core::env::{random_parameter, SeedStream, StreamDomain};
use lrscb_core::harness::{write_csv, ExperimentReport};
use lrscb_core::shift::ShiftExperimentConfig;
use lrscb_core::*;

fn report(id: &str, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "{verdict} criterion {id}: {detail} [{:.1}s, budget {}s]",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn environment(theta: Vec<f64>, k: usize, sigma: f64, seed: u64) -> Environment {
    let d = theta.len();
    let inst = BanditInstance::uniform_box(theta, k, sigma, 1.0).unwrap();
    Environment::new(inst, ContextLaw::uniform_box(d, 1.0).unwrap(), NoiseLaw::gaussian(sigma).unwrap(), seed).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_01_decomposition() {
    let start = Instant::now();
    let dims = [2, 5, 20];
    let arms = [2, 10, 20];
    let (mut stated, mut reflected, mut coincident_ok, mut coincident_n) = (0, 0, 0, 0);
    let n = 200;
    for i in 0..n {
        let seed = 1_000 + i as u64;
        let d = dims[i % 3];
        let k = arms[(i / 3) % 3];
        let mut rng = SeedStream::new(seed).rng(StreamDomain::Parameter, 0);
        let theta = random_parameter(d, 1.0, &mut rng);
        let gamma_norm = 1.5 * (i as f64 + 0.5) / n as f64;
        let gamma = random_parameter(d, gamma_norm, &mut rng);
        let env = environment(theta, k, 1.0, seed);
        let r = paired_shift_run(&env, &gamma, &OfulConfig::new(2.5, 0.1, 1_000)).unwrap();
        stated += r.decomposition_holds(1e-9) as usize;
        reflected += r.reflected_decomposition_holds(1e-9) as usize;
        if r.all_coincident() {
            coincident_n += 1;
            coincident_ok += (r.correction <= 1e-9 * r.r_true.abs().max(1.0)) as usize;
        }
    }
    let elapsed = start.elapsed();
    let pass = stated == n && elapsed < minutes(1);
    report(
        "1",
        pass,
        elapsed,
        minutes(1),
        &format!(
            "R_true <= R_shifted + correction on {stated}/{n} traces \
             (R_true <= R_shifted - correction on {reflected}/{n}; correction <= 0 on {coincident_ok}/{coincident_n} fully coincident traces)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_shift_dominance() {
    let start = Instant::now();
    let cfg = ShiftExperimentConfig::offset(20, 20, 10_000, 0.1, 50);
    let dom = shift_dominance_frequency(&cfg).unwrap();
    let elapsed = start.elapsed();
    let mean_true = mean(&dom.trials.iter().map(|t| t.r_true).collect::<Vec<_>>());
    let mean_shifted = mean(&dom.trials.iter().map(|t| t.r_shifted).collect::<Vec<_>>());
    let pass = dom.frequency >= 0.9 && elapsed < minutes(2);
    report(
        "2",
        pass,
        elapsed,
        minutes(2),
        &format!(
            "frequency of R_true <= R_shifted = {:.3} (need >= 0.9); mean R_true {mean_true:.1}, mean R_shifted {mean_shifted:.1}",
            dom.frequency
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_argmax_coincidence() {
    let start = Instant::now();
    let mut rng = SeedStream::new(31).rng(StreamDomain::Parameter, 0);
    let theta = random_parameter(20, 1.0, &mut rng);
    let u = random_parameter(20, 1.0, &mut rng);
    let gamma: Vec<f64> = theta.iter().zip(&u).map(|(t, v)| t - 0.05 * v).collect();
    let law = ContextLaw::uniform_box(20, 1.0).unwrap();
    let p20 = coincidence_probability(&law, &theta, &gamma, 20, 10_000, 5).unwrap();

    let law1 = ContextLaw::uniform_box(1, 1.0).unwrap();
    let p1 = coincidence_probability(&law1, &[0.8], &[-0.8], 2, 10_000, 6).unwrap();
    let elapsed = start.elapsed();
    let ok20 = p20 >= 0.95;
    let ok1 = (p1 - 0.5).abs() <= 0.03;
    let pass = ok20 && ok1 && elapsed < Duration::from_secs(30);
    report(
        "3",
        pass,
        elapsed,
        Duration::from_secs(30),
        &format!("d=20 psi=0.05 coincidence {p20:.4} (need >= 0.95); d=1 Gamma=-theta coincidence {p1:.4} (need 0.5 +/- 0.03)"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_oful_estimation_decay() {
    let start = Instant::now();
    let trials = 30;
    let mut short = Vec::new();
    let mut long = Vec::new();
    for i in 0..trials {
        let seed = 400 + i;
        let mut rng = SeedStream::new(seed).rng(StreamDomain::Parameter, 0);
        let theta = random_parameter(5, 1.0, &mut rng);
        let env = environment(theta.clone(), 10, 1.0, seed);
        for (horizon, out) in [(10_000u64, &mut short), (40_000, &mut long)] {
            let run = oful_run(&env, &OfulConfig::new(1.0, 0.1, horizon), &[0.0; 5]).unwrap();
            out.push(lrscb_core::vector::distance(&run.estimate, &theta));
        }
    }
    let (a, b) = (mean(&short), mean(&long));
    let elapsed = start.elapsed();
    let pass = b <= 0.7 * a && elapsed < minutes(2);
    report(
        "4",
        pass,
        elapsed,
        minutes(2),
        &format!("mean error {a:.4} at T=1e4, {b:.4} at T=4e4, ratio {:.3} (need <= 0.7)", b / a),
    );
    assert!(pass);
}

#[test]
fn criterion_05_alb_norm_bound() {
    let start = Instant::now();
    let trials = 50;
    let (mut within, mut monotone) = (0, 0);
    for i in 0..trials {
        let seed = 500 + i;
        let mut rng = SeedStream::new(seed).rng(StreamDomain::Parameter, 0);
        let norm = 0.3 + 0.7 * (i as f64 + 0.5) / trials as f64;
        let theta = random_parameter(5, norm, &mut rng);
        let env = environment(theta, 10, 1.0, seed);
        let out = alb_run(&env, &AlbConfig::new(0.1), 100_000, &[0.0; 5]).unwrap();
        within += (out.schedule.final_norm_bound() <= 2.0 * norm) as usize;
        monotone += out.schedule.norm_bounds_non_increasing() as usize;
    }
    let elapsed = start.elapsed();
    let frac = within as f64 / trials as f64;
    let pass = frac >= 0.85 && monotone == trials as usize && elapsed < minutes(3);
    report(
        "5",
        pass,
        elapsed,
        minutes(3),
        &format!("b_N <= 2|theta*| in {within}/{trials} trials ({frac:.2}, need >= 0.85); non-increasing in {monotone}/{trials}"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_norm_proportional_regret() {
    let start = Instant::now();
    let magnitudes = [0.8, 0.4, 0.2, 0.05];
    let seeds = 20;
    let mut ordered = 0;
    let mut totals = [0.0; 4];
    for i in 0..seeds {
        let seed = 600 + i;
        let mut rng = SeedStream::new(seed).rng(StreamDomain::Parameter, 0);
        let theta = random_parameter(5, 1.0, &mut rng);
        let u = random_parameter(5, 1.0, &mut rng);
        let env = environment(theta.clone(), 10, 1.0, seed);
        let regrets: Vec<f64> = magnitudes
            .iter()
            .map(|m| {
                let gamma: Vec<f64> = theta.iter().zip(&u).map(|(t, v)| t - m * v).collect();
                alb_run(&env, &AlbConfig::new(0.1), 100_000, &gamma).unwrap().shifted_trace.cumulative()
            })
            .collect();
        for (t, r) in totals.iter_mut().zip(&regrets) {
            *t += r / seeds as f64;
        }
        ordered += regrets.windows(2).all(|w| w[0] > w[1]) as usize;
    }
    let elapsed = start.elapsed();
    let frac = ordered as f64 / seeds as f64;
    let pass = frac >= 0.8 && elapsed < minutes(5);
    report(
        "6",
        pass,
        elapsed,
        minutes(5),
        &format!(
            "regret ordered by |theta*-Gamma| in {ordered}/{seeds} seeds ({frac:.2}, need >= 0.8); means {:.1} > {:.1} > {:.1} > {:.1}",
            totals[0], totals[1], totals[2], totals[3]
        ),
    );
    assert!(pass);
}

struct Figure {
    report: ExperimentReport,
    elapsed: Duration,
}

fn figure() -> &'static Figure {
    static DATA: OnceLock<Figure> = OnceLock::new();
    DATA.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        let start = Instant::now();
        let report = run_experiment(&cfg, None).unwrap();
        Figure {
            report,
            elapsed: start.elapsed(),
        }
    })
}

fn oful_throughput() -> f64 {
    let mut rng = SeedStream::new(77).rng(StreamDomain::Parameter, 0);
    let theta = random_parameter(20, 1.0, &mut rng);
    let env = environment(theta, 20, 1.0, 77);
    let rounds = 200_000;
    let start = Instant::now();
    let out = oful_run(&env, &OfulConfig::new(1.0, 0.1, rounds), &[0.0; 20]).unwrap();
    assert_eq!(out.true_trace.rounds(), rounds);
    rounds as f64 / start.elapsed().as_secs_f64()
}

#[test]
fn criterion_07_lr_scb_beats_oful() {
    let fig = figure();
    let oful = fig.report.summary(Algorithm::Oful).unwrap();
    let lr = fig.report.summary(Algorithm::LrScb).unwrap();
    let gap = oful.final_mean() - lr.final_mean();
    let pooled = (oful.final_stderr().powi(2) + lr.final_stderr().powi(2)).sqrt();
    let regret_ok = gap > 2.0 * pooled;
    let throughput = oful_throughput();
    let speed_ok = throughput >= 1e6;
    let pass = regret_ok && speed_ok && fig.elapsed < minutes(30);
    report(
        "7",
        pass,
        fig.elapsed,
        minutes(30),
        &format!(
            "final regret OFUL {:.1} +/- {:.1}, LR-SCB {:.1} +/- {:.1}, gap {gap:.1} vs 2 pooled se {:.1}; \
             OFUL d=20 K=20 throughput {throughput:.0} rounds/s (gate 1e6)",
            oful.final_mean(),
            oful.final_stderr(),
            lr.final_mean(),
            lr.final_stderr(),
            2.0 * pooled
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_slope_fits() {
    let fig = figure();
    let t_min = 1_000;
    let oful = fig.report.summary(Algorithm::Oful).unwrap();
    let lr = fig.report.summary(Algorithm::LrScb).unwrap();
    let start = Instant::now();
    let o = fit_loglog_slope(&oful.points(), t_min).unwrap();
    let l = fit_logloglog_slope(&lr.points(), t_min).unwrap();
    let pass = (0.35..=0.65).contains(&o.slope) && (1.5..=3.5).contains(&l.slope) && l.r2 >= 0.9;
    report(
        "8",
        pass,
        start.elapsed(),
        Duration::from_secs(1),
        &format!(
            "OFUL log-log slope {:.3} (r2 {:.3}, need [0.35, 0.65]); LR-SCB log-loglog slope {:.3} (r2 {:.3}, need [1.5, 3.5], r2 >= 0.9)",
            o.slope, o.r2, l.slope, l.r2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_synthetic_slopes() {
    let start = Instant::now();
    let grid = checkpoint_grid(1 << 24);
    let squared_log: Vec<(u64, f64)> = grid.iter().map(|&t| (t, (t as f64).ln().powi(2))).collect();
    let root: Vec<(u64, f64)> = grid.iter().map(|&t| (t, (t as f64).sqrt())).collect();
    let a = fit_logloglog_slope(&squared_log, 1_000).unwrap();
    let b = fit_loglog_slope(&root, 1_000).unwrap();
    let pass = (a.slope - 2.0).abs() <= 1e-3 && (b.slope - 0.5).abs() <= 1e-3;
    report(
        "9",
        pass,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("(ln t)^2 log-loglog slope {:.6} (need 2 +/- 0.001); sqrt(t) log-log slope {:.6} (need 0.5 +/- 0.001)", a.slope, b.slope),
    );
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let base = ExperimentConfig {
        algorithms: Algorithm::ALL.to_vec(),
        d: 6,
        k: 8,
        t: 8_192,
        trials: 4,
        base_seed: 42,
        ..ExperimentConfig::default()
    };
    let csv = |threads: usize| {
        let cfg = ExperimentConfig {
            threads: Some(threads),
            ..base.clone()
        };
        let report = run_experiment(&cfg, None).unwrap();
        let mut bytes = Vec::new();
        write_csv(&report.trials, &mut bytes).unwrap();
        bytes
    };
    let first = csv(1);
    let again = csv(1);
    let threaded = csv(3);
    let pass = !first.is_empty() && first == again && first == threaded;
    report(
        "10",
        pass,
        start.elapsed(),
        minutes(1),
        &format!("{} CSV bytes; repeat identical: {}; threads 1 vs 3 identical: {}", first.len(), first == again, first == threaded),
    );
    assert!(pass);
}
