//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use cliplab::config::{Experiment, ExperimentConfig};
use cliplab::diagnostics::{
    check_anytime_weight_sum, check_clip_error_bounds, check_mgf_bound, mgf_lambda_grid, ScalarLaw,
    Status,
};
use cliplab::geometry::Geometry;
use cliplab::harness::{compare_clipped_vanilla, diagnose, rate_sweep, run_trials};
use cliplab::noise::NoiseModel;
use cliplab::problems::Problem;
use cliplab::rng;
use cliplab::schedules::{verify_conditions, Schedule, ScheduleInputs};

const JOBS: usize = 0;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn build(toml: &str) -> Experiment {
    ExperimentConfig::from_toml_str(toml)
        .and_then(|c| c.build())
        .unwrap_or_else(|e| panic!("config: {e}\n{toml}"))
}

fn ratios(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|w| w[1] / w[0]).collect()
}

fn fmt(xs: &[f64]) -> String {
    let v: Vec<String> = xs.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", v.join(", "))
}

const DOUBLING: [usize; 5] = [256, 512, 1024, 2048, 4096];

/// Median summary at each doubling horizon with σ = 0 (one seed suffices).
fn deterministic_ratios(toml: &str) -> Vec<f64> {
    let exp = build(toml);
    let medians: Vec<f64> = DOUBLING
        .iter()
        .map(|&t| run_trials(&exp, t, 1, 1).unwrap().median)
        .collect();
    ratios(&medians)
}

fn smd_quadratic(mode: &str, p: f64, sigma: f64, delta: f64) -> String {
    format!(
        r#"
[experiment]
id = "smd-quadratic"
algorithm = "smd"
horizons = [256, 1024, 4096, 16384]
delta = {delta}
[problem]
kind = "quadratic"
diag = [1.0, 1.0]
x1 = [1.0, 0.0]
[noise]
kind = "two-point"
p = {p}
sigma = {sigma}
q = 0.001
[schedule]
mode = "{mode}"
"#
    )
}

fn sgd_nonconvex(mode: &str, p: f64, sigma: f64, delta: f64) -> String {
    format!(
        r#"
[experiment]
id = "sgd-nonconvex"
algorithm = "sgd"
horizons = [256, 1024, 4096, 16384]
delta = {delta}
[problem]
kind = "nonconvex-ratio"
dim = 2
x1 = [0.05, 0.05]
[noise]
kind = "two-point"
p = {p}
sigma = {sigma}
q = 0.001
[schedule]
mode = "{mode}"
"#
    )
}

fn asmd_quadratic(scaled_c: Option<f64>) -> String {
    let d = 20;
    let diag: Vec<String> = (1..=d)
        .map(|i| format!("{:e}", 1.0 / (i * i) as f64))
        .collect();
    let x1: Vec<String> = (0..d)
        .map(|_| format!("{:e}", 1.0 / (d as f64).sqrt()))
        .collect();
    let c = scaled_c
        .map(|c| format!("scaled_c = {c:e}"))
        .unwrap_or_default();
    format!(
        r#"
[experiment]
id = "asmd-quadratic"
algorithm = "asmd"
horizon = 256
delta = 0.5
[problem]
kind = "quadratic"
diag = [{}]
x1 = [{}]
[noise]
kind = "two-point"
p = 1.5
sigma = 0.0
q = 0.001
[schedule]
mode = "asmd-known-t"
{c}
"#,
        diag.join(", "),
        x1.join(", ")
    )
}

fn criterion_1() -> Outcome {
    let smd = deterministic_ratios(&smd_quadratic("smd-known-t", 1.5, 0.0, 0.5));
    let sgd = deterministic_ratios(&sgd_nonconvex("sgd-known-t", 1.5, 0.0, 0.5));
    let asmd = deterministic_ratios(&asmd_quadratic(Some(10.0)));
    let asmd_floor = deterministic_ratios(&asmd_quadratic(None));
    let pass = smd.iter().all(|&r| r <= 0.6)
        && sgd.iter().all(|&r| r <= 0.75)
        && asmd.iter().all(|&r| r <= 0.35);
    outcome(
        pass,
        format!(
            "smd {} (<= 0.6), asmd scaled-c=10 {} (<= 0.35), sgd {} (<= 0.75); asmd c=1e4 recorded {}",
            fmt(&smd),
            fmt(&asmd),
            fmt(&sgd),
            fmt(&asmd_floor)
        ),
    )
}

/// σ at which the noise-driven SGD clipping level equals the deterministic
/// level at horizon `t0`.
fn sgd_crossover_sigma(exp: &Experiment, t0: f64) -> f64 {
    let mut inputs: ScheduleInputs = exp.inputs.clone();
    let mut noise_branch = |sigma: f64| {
        inputs.sigma = sigma;
        let b = inputs.sgd_lambda_branches(t0);
        (b[0].max(b[2]), b[1])
    };
    let (mut lo, mut hi) = (1e-10f64, 10.0f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let (noise, floor) = noise_branch(mid);
        if noise < floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [1.5, 2.0] {
        let sigma = 4.0 / (26.0f64 * 256.0).powf(1.0 / p);
        let exp = build(&smd_quadratic("smd-known-t", p, sigma, 0.5));
        let (fit, _) = rate_sweep(&exp, 200, JOBS).unwrap();
        let target = (1.0 - p) / p;
        let ok = (fit.slope - target).abs() <= 0.15;
        pass &= ok;
        parts.push(format!(
            "smd p={p} slope={:.3} target={target:.3}",
            fit.slope
        ));

        let probe = build(&sgd_nonconvex("sgd-known-t", p, 0.0, 0.5));
        let sigma = sgd_crossover_sigma(&probe, 1024.0);
        let exp = build(&sgd_nonconvex("sgd-known-t", p, sigma, 0.5));
        let (fit, _) = rate_sweep(&exp, 200, JOBS).unwrap();
        let target = (2.0 - 2.0 * p) / (3.0 * p - 2.0);
        let ok = (fit.slope - target).abs() <= 0.15;
        pass &= ok;
        parts.push(format!(
            "sgd p={p} slope={:.3} target={target:.3}",
            fit.slope
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let seeds = 1000;
    let allowed = 0.1 + 3.0 * (0.09f64 / seeds as f64).sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [1.5, 2.0] {
        for (name, toml) in [
            ("smd", smd_quadratic("smd-known-t", p, 1.0, 0.1)),
            ("sgd", sgd_nonconvex("sgd-known-t", p, 1.0, 0.1)),
        ] {
            let s = run_trials(&build(&toml), 1024, seeds, JOBS).unwrap();
            let rate = s.failure_rate.expect("known-T schedules carry a bound");
            pass &= rate <= allowed;
            parts.push(format!("{name} p={p} rate={rate:.4}"));
        }
    }
    outcome(pass, format!("{} (<= {allowed:.4})", parts.join(", ")))
}

fn criterion_4() -> Outcome {
    let problem = Problem::quadratic(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
    let mut pass = true;
    let mut worst_bias = 0.0f64;
    let mut worst_var = 0.0f64;
    let mut violations = 0;
    let mut seed = 0;
    for p in [1.25, 1.5, 2.0] {
        let noise = if p < 2.0 {
            NoiseModel::radial_pareto(p, 1.0, (p + 2.0) / 2.0).unwrap()
        } else {
            NoiseModel::two_point(p, 1.0, 0.001).unwrap()
        };
        for lambda in [1.0, 5.0, 50.0] {
            for x in [[lambda / 2.0, 0.0], [0.0, 0.0]] {
                let mut r = rng::primary(seed);
                seed += 1;
                let rep = check_clip_error_bounds(&problem, &noise, &x, lambda, 1_000_000, &mut r)
                    .unwrap();
                pass &= rep.passed() && rep.precondition;
                violations += rep.unbiased_violations;
                worst_bias = worst_bias.max(rep.bias_norm / rep.bias_bound);
                worst_var = worst_var.max(rep.second_moment / rep.second_moment_bound);
            }
        }
    }
    outcome(
        pass,
        format!(
            "18 cells x 1e6 draws: {violations} norm violations, max bias/bound={worst_bias:.3}, max second-moment/bound={worst_var:.3}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut r = rng::primary(5);
    let mut pass = true;
    let mut parts = Vec::new();
    for law in [
        ScalarLaw::Rademacher { r: 1.0 },
        ScalarLaw::TwoPoint {
            high: 1.0,
            prob: 0.2,
        },
    ] {
        let rep = check_mgf_bound(law, &mgf_lambda_grid(law.radius(), 20), 0, &mut r).unwrap();
        let fails = rep
            .rows
            .iter()
            .filter(|row| row.status == Status::Fail)
            .count();
        pass &= rep.exact && rep.passed() && rep.rows.len() == 20;
        parts.push(format!("{:?}: {fails}/20 failures", law));
    }
    let rep = check_mgf_bound(ScalarLaw::Rademacher { r: 1.0 }, &[1.0], 0, &mut r).unwrap();
    let row = &rep.rows[0];
    let cosh_ok = (row.lhs - 1f64.cosh()).abs() < 1e-15
        && (row.rhs - 0.75f64.exp()).abs() < 1e-15
        && row.lhs <= row.rhs;
    pass &= cosh_ok;
    parts.push(format!("cosh(1)={:.6} <= e^0.75={:.6}", row.lhs, row.rhs));
    outcome(pass, parts.join("; "))
}

fn pathwise_config(
    id: &str,
    algorithm: &str,
    problem: &str,
    geometry: &str,
    schedule: &str,
) -> String {
    format!(
        r#"
[experiment]
id = "{id}"
algorithm = "{algorithm}"
horizon = 1000
delta = 0.1
{problem}
{geometry}
[noise]
kind = "two-point"
p = 1.5
sigma = 1.0
q = 0.01
[schedule]
{schedule}
[diagnostics]
conditions = false
mgf = false
pathwise = true
"#
    )
}

fn criterion_6() -> Outcome {
    let simplex_problem = r#"[problem]
kind = "simplex-quadratic"
dim = 5
target = [0.4, 0.25, 0.15, 0.12, 0.08]
x1 = [0.2, 0.2, 0.2, 0.2, 0.2]"#;
    let cases = [
        pathwise_config(
            "smd-euclidean",
            "smd",
            "[problem]\nkind = \"quadratic\"\ndiag = [1.0, 0.5]\nx1 = [1.0, -1.0]",
            "",
            "mode = \"smd-known-t\"",
        ),
        pathwise_config(
            "smd-simplex",
            "smd",
            simplex_problem,
            "",
            "mode = \"smd-known-t\"",
        ),
        pathwise_config(
            "asmd-simplex",
            "asmd",
            simplex_problem,
            "",
            "mode = \"asmd-known-t\"\nscaled_c = 10.0",
        ),
        pathwise_config(
            "sgd-nonconvex",
            "sgd",
            "[problem]\nkind = \"nonconvex-ratio\"\ndim = 2\nx1 = [0.5, -0.3]",
            "",
            "mode = \"sgd-known-t\"",
        ),
        pathwise_config(
            "smd-nonsmooth",
            "smd",
            "[problem]\nkind = \"smooth-plus-norm\"\ndim = 2\nweight = 0.5\nx1 = [1.0, 0.5]",
            "",
            "mode = \"smd-known-t\"",
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for toml in &cases {
        let exp = build(toml);
        let rep = diagnose(&exp, 1000, 50, JOBS).unwrap();
        let row = &rep.checks[0];
        pass &= row.steps == 50 * 1000 && row.violations == 0 && row.max_margin <= 1e-8;
        parts.push(format!(
            "{}: {} violations/{} steps",
            exp.config.experiment.id, row.violations, row.steps
        ));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let threshold = 0.128;
    let mut pass = true;
    let mut parts = Vec::new();
    for toml in [
        smd_quadratic("smd-known-t", 1.5, 1.0, 0.1),
        sgd_nonconvex("sgd-known-t", 1.5, 1.0, 0.1),
    ] {
        let mut cfg = ExperimentConfig::from_toml_str(&toml).unwrap();
        cfg.diagnostics.conditions = false;
        cfg.diagnostics.mgf = false;
        cfg.diagnostics.pathwise = false;
        cfg.diagnostics.martingale = true;
        cfg.diagnostics.mc_samples = 200;
        let exp = cfg.build().unwrap();
        let rep = diagnose(&exp, 512, 1000, JOBS).unwrap();
        let c = rep.crossing.expect("martingale trace enabled");
        pass &= c.runs == 1000 && c.frequency <= threshold;
        parts.push(format!(
            "{} crossed {}/{} (freq {:.3})",
            exp.config.experiment.algorithm.name(),
            c.crossed,
            c.runs,
            c.frequency
        ));
    }
    outcome(pass, format!("{} (<= {threshold})", parts.join(", ")))
}

fn criterion_8() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for p in [1.25, 1.5, 2.0] {
        for sigma in [0.0, 0.1, 1.0, 10.0] {
            for l in [0.5, 1.0, 4.0] {
                for delta in [0.01, 0.1, 0.5] {
                    for t in [1usize, 10, 100, 1000] {
                        let mut i = ScheduleInputs::new(p, sigma, l, delta);
                        i.r1 = 1.0;
                        i.delta1 = 0.5;
                        i.grad1_bound = 1.0;
                        i.horizon = Some(t);
                        let mut free = Schedule::smd_param_free(i.clone()).unwrap();
                        free.observe(1, &[0.0, 0.0], &Geometry::euclidean(2).unwrap())
                            .unwrap();
                        let schedules = [
                            Schedule::smd_known_t(i.clone()).unwrap(),
                            Schedule::smd_anytime(i.clone()).unwrap(),
                            free,
                            Schedule::sgd_known_t(i.clone()).unwrap(),
                            Schedule::sgd_anytime(i).unwrap(),
                        ];
                        for s in &schedules {
                            checked += 1;
                            let r = verify_conditions(s, t);
                            if !r.passed() {
                                failures.push(format!(
                                    "{} p={p} sigma={sigma} L={l} delta={delta} T={t}",
                                    s.mode().name()
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    let mut i = ScheduleInputs::new(1.5, 1.0, 1.0, 0.1);
    i.r1 = 1.0;
    i.delta1 = 0.5;
    i.horizon = Some(100);
    let smd = Schedule::smd_known_t(i.clone())
        .unwrap()
        .with_step_scale(2.0);
    // At T = 1 the SGD step-clip product sits exactly on its cap.
    i.horizon = Some(1);
    let sgd = Schedule::sgd_known_t(i).unwrap().with_step_scale(2.0);
    let corrupted = [(smd, 100), (sgd, 1)];
    let caught = corrupted
        .iter()
        .filter(|(s, t)| !verify_conditions(s, *t).passed())
        .count();
    outcome(
        failures.is_empty() && caught == corrupted.len(),
        format!(
            "{}/{checked} certified schedules pass; {caught}/{} corrupted schedules rejected{}",
            checked - failures.len(),
            corrupted.len(),
            failures
                .first()
                .map(|f| format!("; first failure {f}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_9() -> Outcome {
    let rep = check_anytime_weight_sum(1_000_000).unwrap();
    // Independent summation, smallest terms first.
    let oracle: f64 = (1..=1_000_000u32)
        .rev()
        .map(|t| {
            let t = f64::from(t);
            1.0 / (2.0 * t * (1.0 + t.ln()).powi(2))
        })
        .sum();
    let pass = rep.below_one && rep.partial_sum < 1.0 && (rep.partial_sum - oracle).abs() < 1e-9;
    outcome(
        pass,
        format!(
            "partial sum at t=1e6 = {:.6} (oracle {oracle:.6})",
            rep.partial_sum
        ),
    )
}

fn criterion_10() -> Outcome {
    let p = 2.0;
    let t = 4096;
    let sigma = 4.0 / (26.0f64 * 256.0).powf(1.0 / p);
    let known = run_trials(
        &build(&smd_quadratic("smd-known-t", p, sigma, 0.5)),
        t,
        200,
        JOBS,
    )
    .unwrap();
    let anytime = run_trials(
        &build(&smd_quadratic("smd-anytime", p, sigma, 0.5)),
        t,
        200,
        JOBS,
    )
    .unwrap();
    let ratio = anytime.median / known.median;
    let allowed = 3.0 * (1.0 + (t as f64).ln()).powf(2.0 / p);
    outcome(
        ratio <= allowed,
        format!(
            "median anytime/known = {ratio:.3} (<= {allowed:.3}); medians {:.4e} / {:.4e}",
            anytime.median, known.median
        ),
    )
}

fn criterion_11() -> Outcome {
    let toml = r#"
[experiment]
id = "clipped-vs-vanilla"
algorithm = "sgd"
horizon = 4096
delta = 0.1
[problem]
kind = "quadratic"
diag = [1.0, 1.0]
x1 = [1.0, 0.0]
[noise]
kind = "two-point"
p = 1.5
sigma = 1.0
q = 0.001
[schedule]
mode = "constant"
eta = 0.01
lambda = 1.0
"#;
    let rep = compare_clipped_vanilla(&build(toml), 4096, 200, JOBS, Some(0.01)).unwrap();
    outcome(
        rep.clipped_median < rep.vanilla_median,
        format!(
            "median final gap clipped={:.4e} vanilla={:.4e}; clipped lower on {}/{} seeds",
            rep.clipped_median, rep.vanilla_median, rep.clipped_wins, rep.seeds
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("deterministic rate ratios", criterion_1),
        ("heavy-tailed rate exponents", criterion_2),
        ("high-probability failure rates", criterion_3),
        ("clipping error bounds", criterion_4),
        ("bounded-variable mgf bound", criterion_5),
        ("pathwise descent inequalities", criterion_6),
        ("supermartingale crossing frequency", criterion_7),
        ("schedule condition checker", criterion_8),
        ("anytime weight series", criterion_9),
        ("anytime vs known horizon", criterion_10),
        ("clipped vs vanilla", criterion_11),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} {name}", n + 1);
        if !filter.is_empty() && !filter.iter().any(|s| label.contains(s.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(o) => {
                let tag = if o.pass { "PASS" } else { "FAIL" };
                failed += usize::from(!o.pass);
                println!("[{tag}] {label} ({secs:.1}s): {}", o.detail);
            }
            Err(_) => {
                failed += 1;
                println!("[FAIL] {label} ({secs:.1}s): panicked");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
