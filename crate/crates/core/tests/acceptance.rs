//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every criterion runs once on a single worker thread and again on four; the
//! last criterion compares the serialized results byte for byte.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qbsde_core::coupling::{coupled_solutions, coupling_sweep, tail_estimate, CouplingConfig, CouplingRow, LocalCorrelation};
use qbsde_core::forward::{kobylanski_pipeline, PipelineConfig, PipelineReport};
use qbsde_core::martingale::{f_martingale_test, unit_drift_candidates, AutoFamily, FamilyKind, MartingaleReport, TestFamily};
use qbsde_core::paths::{simulate_bm, TimeGrid};
use qbsde_core::pde::ExtractOptions;
use qbsde_core::registry;
use qbsde_core::report::to_json_line;
use qbsde_core::subharmonic::{
    build_h, construct_subharmonic, eval_lf, is_subharmonic, majorize_cone_quadratic, BasePoint, ConeQuadratic, ConstructOptions,
    QuadraticTestFunction, SubharmonicOptions, TestFunction,
};

use common::{cole_hopf_value, gaussian_expectation};

struct Outcome {
    pass: bool,
    detail: String,
    artifact: String,
}

impl Outcome {
    fn new(pass: bool, detail: String, artifact: &impl Serialize) -> Self {
        Self {
            pass,
            detail,
            artifact: to_json_line(artifact).expect("artifact serializes"),
        }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self {
            pass: false,
            detail: format!("error: {e}"),
            artifact: String::new(),
        }
    }
}

fn pipeline_config(steps: usize, paths: usize, seed: u64, schedule: &[f64]) -> PipelineConfig {
    let mut c = PipelineConfig::new(TimeGrid::new(1.0, steps).unwrap(), 8.0, 0.02, paths, seed);
    c.schedule = schedule.to_vec();
    c.early_stop = None;
    c
}

fn run_pipeline(driver: &str, terminal: &str, config: &PipelineConfig) -> qbsde_core::Result<PipelineReport> {
    let f = registry::driver(driver, 1, 1, 1.0)?;
    let h = registry::terminal(terminal)?;
    kobylanski_pipeline(&f, &h, config)
}

fn heat_oracle() -> Outcome {
    let config = pipeline_config(200, 10_000, 1, &[1.0, 2.0, 4.0, 8.0, 16.0]);
    match run_pipeline("zero", "square", &config) {
        Ok(r) => {
            let y0 = r.y0();
            Outcome::new((y0 - 1.0).abs() <= 1e-2, format!("Y0 = {y0:.6}, oracle 1"), &r)
        }
        Err(e) => Outcome::error(e),
    }
}

fn linear_oracle() -> Outcome {
    let alpha: f64 = 0.5;
    let oracle = alpha.exp() * gaussian_expectation(f64::tanh, 1.0);
    let config = pipeline_config(200, 10_000, 2, &[1.0, 2.0, 4.0, 8.0, 16.0]);
    match run_pipeline("linear:alpha=0.5", "tanh", &config) {
        Ok(r) => {
            let y0 = r.y0();
            Outcome::new((y0 - oracle).abs() <= 1e-2, format!("Y0 = {y0:.6}, oracle {oracle:.6}"), &r)
        }
        Err(e) => Outcome::error(e),
    }
}

fn quadratic_oracle() -> Outcome {
    let oracle = cole_hopf_value(f64::tanh, 1.0, 1.0);
    let config = pipeline_config(200, 100_000, 3, &[1.0, 2.0, 4.0, 8.0]);
    match run_pipeline("quadratic:gamma=1", "tanh", &config) {
        Ok(r) => {
            let y0 = r.y0();
            let value_ok = (y0 - oracle).abs() <= 2e-2;
            let monotone = r.levels.windows(2).all(|w| w[1].gap_p2 <= w[0].gap_p2 + 2.0 * w[0].gap_se.hypot(w[1].gap_se));
            let last = r.levels.last().map_or(f64::NAN, |l| l.gap_p2);
            let gaps: Vec<String> = r.levels.iter().map(|l| format!("{:.3e}", l.gap_p2)).collect();
            Outcome::new(
                value_ok && monotone && last < 1e-2,
                format!("Y0 = {y0:.6}, oracle {oracle:.6}; E|X_T - xi|^2 by k: [{}]", gaps.join(", ")),
                &r,
            )
        }
        Err(e) => Outcome::error(e),
    }
}

#[derive(Serialize)]
struct ConstructorCase {
    driver: String,
    base: BasePoint,
    i0: usize,
    sign: f64,
    eps: f64,
    r_dom: f64,
    lf_at_base: f64,
    gradient_ok: bool,
    lf_ok: bool,
    check_ok: bool,
}

fn constructor_soundness() -> Outcome {
    let drivers = [("quadratic:gamma=1", 1, 1), ("mixed", 2, 2), ("zlinear:c=-1", 1, 2)];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases = Vec::new();
    for k in 0..50 {
        let (name, n, d) = drivers[k % 3];
        let f = registry::driver(name, n, d, 1.0).unwrap();
        let t = rng.random_range(0.0..1.0);
        let mut uniform = |len: usize, r: f64| (0..len).map(|_| rng.random_range(-r..r)).collect::<Vec<f64>>();
        let base = BasePoint {
            t,
            x: uniform(d, 1.0),
            y: uniform(n, 1.0),
            z: uniform(n * d, 1.5),
        };
        let i0 = rng.random_range(0..n);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let eps = rng.random_range(0.1..1.0);
        let phi = match construct_subharmonic(&f, &base, i0, sign, eps, 0.25, &ConstructOptions::default()) {
            Ok(phi) => phi,
            Err(e) => return Outcome::error(format!("case {k} ({name}): {e}")),
        };
        let p = phi.partials(base.t, &base.x, &base.y);
        let mut gradient_ok = (0..n).all(|i| p.y[i] == if i == i0 { sign } else { 0.0 });
        for i in 0..n {
            for j in 0..d {
                gradient_ok &= p.xy[i * d + j] == -p.yy[i * n + i] * base.z[i * d + j];
            }
        }
        let lf_at_base = eval_lf(&f, &phi, base.t, &base.x, &base.y, &base.z).unwrap_or(f64::NAN);
        let lf_ok = lf_at_base <= eps * (1.0 + 1e-12);
        let opts = SubharmonicOptions {
            seed: 1000 + k as u64,
            ..SubharmonicOptions::default()
        };
        let check_ok = is_subharmonic(&f, &phi, &opts).is_pass();
        cases.push(ConstructorCase {
            driver: name.to_string(),
            base,
            i0,
            sign,
            eps,
            r_dom: phi.r_dom(),
            lf_at_base,
            gradient_ok,
            lf_ok,
            check_ok,
        });
    }
    let bad = cases.iter().filter(|c| !(c.gradient_ok && c.lf_ok && c.check_ok)).count();
    Outcome::new(bad == 0, format!("{} cases, {bad} failing", cases.len()), &cases)
}

fn majorization_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let a0 = rng.random_range(-10.0..10.0);
        let b0 = rng.random_range(0.0..10.0);
        let c0 = rng.random_range(0.0..10.0);
        let eps = rng.random_range(1e-3..5.0);
        let l = ConeQuadratic::new(a0, b0, c0, vec![0.0]).unwrap();
        let m = majorize_cone_quadratic(&l, eps).unwrap();
        // q - l = eps/2 + eta (r - b0/(2 eta))^2 on r >= 0.
        let closed_min = (m.q.d0 - a0) - b0 * b0 / (4.0 * (m.q.e0 - c0));
        let gap = m.q.at_radius(0.0) - l.at_radius(0.0) - eps;
        worst_gap = worst_gap.max(gap / eps);
        if !(closed_min >= 0.0 && m.min_slack >= 0.0 && gap <= 1e-12 * eps && m.q.e0 > 0.0) {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0,
        format!("1000 draws, {failures} failing, max (q(zbar) - l(zbar) - eps)/eps = {worst_gap:.2e}"),
        &(failures, worst_gap),
    )
}

fn h_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let zero = registry::driver("zero", 1, d, 1.0).unwrap();
        let mut u = |len: usize| (0..len).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
        // Time-independent phi, as the H form carries no phi_t entry.
        let phi = QuadraticTestFunction::new(1, d)
            .with_yy(&u(1))
            .with_xy(&u(d))
            .with_xx(&u(d))
            .with_linear(&u(1), &u(d));
        let (x, y) = (u(d), u(1));
        let mut z = u(d);
        if z.iter().all(|v| v.abs() < 1e-6) {
            z[0] = 1.0;
        }
        let t = rng.random_range(0.0..1.0);
        let h = build_h(&phi, t, &x, &y).unwrap();
        let lf = eval_lf(&zero, &phi, t, &x, &y, &z).unwrap();
        worst = worst.max((h.half_form(&z) - lf).abs() / (1.0 + lf.abs()));
    }
    Outcome::new(worst <= 1e-10, format!("max relative deviation {worst:.2e}"), &worst)
}

#[derive(Serialize)]
struct ForwardCheck {
    pipelines: Vec<(String, MartingaleReport)>,
    repetitions: Vec<(u64, bool, bool)>,
}

fn forward_check() -> Outcome {
    let auto = AutoFamily {
        points: 20,
        ..AutoFamily::default()
    };
    let mut pipelines = Vec::new();
    let mut pipelines_pass = true;
    for (k, (driver, terminal)) in [("zero", "square"), ("linear:alpha=0.5", "tanh"), ("quadratic:gamma=1", "tanh")].into_iter().enumerate() {
        let config = pipeline_config(200, 20_000, 70 + k as u64, &[16.0]);
        let report = run_pipeline(driver, terminal, &config).and_then(|r| {
            let f = registry::driver(driver, 1, 1, 1.0)?;
            f_martingale_test(
                &f,
                &r.limit,
                &TestFamily::Auto(AutoFamily {
                    seed: k as u64,
                    ..auto
                }),
            )
        });
        match report {
            Ok(rep) => {
                pipelines_pass &= rep.pass && rep.construction_failures.is_empty() && rep.functions.len() == 40;
                pipelines.push((driver.to_string(), rep));
            }
            Err(e) => return Outcome::error(format!("{driver}: {e}")),
        }
    }

    let f = registry::driver("zlinear:c=-1", 1, 1, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let mut repetitions = Vec::new();
    for seed in 0..20u64 {
        let ens = Arc::new(simulate_bm(grid, 100_000, 1, 100 + seed).unwrap());
        let (_, impostor) = unit_drift_candidates(&ens).unwrap();
        let family = |kind| {
            TestFamily::Auto(AutoFamily {
                points: 5,
                kind,
                seed,
                ..AutoFamily::default()
            })
        };
        let with_x = f_martingale_test(&f, &impostor, &family(FamilyKind::Ansatz));
        let without_x = f_martingale_test(&f, &impostor, &family(FamilyKind::XFree));
        match (with_x, without_x) {
            (Ok(a), Ok(b)) => repetitions.push((seed, !a.pass, !b.pass)),
            (Err(e), _) | (_, Err(e)) => return Outcome::error(format!("seed {seed}: {e}")),
        }
    }
    let hits = repetitions.iter().filter(|(_, x, free)| *x && !*free).count();
    let detail = format!(
        "pipeline solutions {}; counterexample separated in {hits}/20 repetitions",
        if pipelines_pass { "pass" } else { "FLAGGED" }
    );
    Outcome::new(pipelines_pass && hits >= 19, detail, &ForwardCheck { pipelines, repetitions })
}

#[derive(Serialize)]
struct CouplingSuite {
    rows: Vec<CouplingRow>,
    quadratic_tails: Vec<(f64, f64)>,
    heat_tails: Vec<(f64, f64)>,
    ratio_bound: f64,
}

fn coupling_suite() -> Outcome {
    let config = CouplingConfig {
        grid: TimeGrid::new(1.0, 200).unwrap(),
        half_width: 8.0,
        dx: 0.02,
        paths: 100_000,
        seed: 8,
        extract: ExtractOptions::default(),
    };
    let f = registry::driver("quadratic:gamma=1", 1, 1, 1.0).unwrap();
    let h = registry::terminal("tanh").unwrap();
    let rules: Vec<LocalCorrelation> = [0.0, 0.5, 0.9, 0.99, 1.0].iter().map(|&r| LocalCorrelation::Constant { r }).collect();
    let rows = match coupling_sweep(&f, &h, &rules, &config, 0.1) {
        Ok(rows) => rows,
        Err(e) => return Outcome::error(e),
    };
    let decreasing = rows.windows(2).all(|w| w[1].lhs < w[0].lhs);
    let collapse = rows[4].lhs == 0.0 && rows[4].degenerate;

    let eps = [1.0, 0.3, 0.1, 0.03];
    let tails = |driver: &str, eps: &[f64]| -> qbsde_core::Result<Vec<(f64, f64)>> {
        let f = registry::driver(driver, 1, 1, 1.0)?;
        let run = coupled_solutions(&f, &h, LocalCorrelation::Constant { r: 0.5 }, &config)?;
        Ok(tail_estimate(&run.leg1, eps)?.into_iter().map(|t| (t.eps, t.prob)).collect())
    };
    let (quadratic_tails, heat_tails) = match (tails("quadratic:gamma=1", &eps), tails("zero", &[0.9, 0.5, 0.3, 0.1, 0.03])) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Outcome::error(e),
    };
    let tails_ok = quadratic_tails.windows(2).all(|w| w[1].1 <= w[0].1)
        && quadratic_tails.last().is_some_and(|t| t.1 < 0.01)
        && heat_tails.iter().all(|t| t.1 == 0.0);

    // ||dY||_{S^2} <= K ||dY_T||_{L^2} with K = p/(p-1) e^{2MT} for p = 2.
    let ratio_bound = 2.0 * (2.0 * f.growth_constant()).exp();
    let ratios_ok = rows[..3]
        .iter()
        .all(|r| !r.degenerate && r.ratio_p2 >= 1.0 && r.ratio_p2 <= ratio_bound + 2.0 * r.ratio_p2_se);
    let lhs: Vec<String> = rows.iter().map(|r| format!("{:.3e}", r.lhs)).collect();
    let ratios: Vec<String> = rows[..3].iter().map(|r| format!("{:.3}", r.ratio_p2)).collect();
    Outcome::new(
        decreasing && collapse && tails_ok && ratios_ok,
        format!(
            "E(dY_T)^2 by r: [{}]; S^2/L^2 ratios [{}] (bound {ratio_bound:.2}); tails ok: {tails_ok}",
            lhs.join(", "),
            ratios.join(", ")
        ),
        &CouplingSuite {
            rows,
            quadratic_tails,
            heat_tails,
            ratio_bound,
        },
    )
}

fn bound_uniformity() -> Outcome {
    let config = pipeline_config(200, 20_000, 9, &[1.0, 2.0, 4.0, 8.0, 16.0]);
    match run_pipeline("quadratic:gamma=1", "tanh", &config) {
        Ok(r) => {
            let sup_ok = r.levels.iter().all(|l| l.sup_pass);
            let bmo: Vec<f64> = r.levels.iter().map(|l| l.bmo_hat).collect();
            let (lo, hi) = bmo.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(*v), b.max(*v)));
            let spread = (hi - lo) / hi;
            Outcome::new(
                sup_ok && spread < 0.1,
                format!("sup bound {}; bmo spread {:.2}% over k = 1..16", if sup_ok { "holds" } else { "VIOLATED" }, 100.0 * spread),
                &r,
            )
        }
        Err(e) => Outcome::error(e),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 9] = [
    ("heat oracle", heat_oracle),
    ("linear-driver oracle", linear_oracle),
    ("quadratic oracle and terminal gaps", quadratic_oracle),
    ("constructor soundness", constructor_soundness),
    ("majorization property", majorization_suite),
    ("H-matrix consistency", h_consistency),
    ("f-martingale forward check", forward_check),
    ("coupling suite", coupling_suite),
    ("exp bounds and BMO uniformity", bound_uniformity),
];

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

fn main() -> ExitCode {
    let mut all_pass = true;
    let mut artifacts = Vec::new();
    let single = pool(1);
    for (k, (name, run)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let outcome = single.install(run);
        let secs = start.elapsed().as_secs_f64();
        all_pass &= outcome.pass;
        println!(
            "criterion {}: {} ({name}) [{secs:.1} s] {}",
            k + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        artifacts.push(outcome.artifact);
    }

    let start = Instant::now();
    let multi = pool(4);
    let mismatched: Vec<usize> = CRITERIA
        .iter()
        .enumerate()
        .filter(|(k, (_, run))| {
            let again = multi.install(run);
            again.artifact.is_empty() || again.artifact != artifacts[*k]
        })
        .map(|(k, _)| k + 1)
        .collect();
    let deterministic = mismatched.is_empty();
    all_pass &= deterministic;
    println!(
        "criterion 10: {} (determinism) [{:.1} s] {}",
        if deterministic { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        if deterministic {
            "criteria 1-9 byte-identical on 1 and 4 threads".to_string()
        } else {
            format!("criteria {mismatched:?} differ between 1 and 4 threads")
        }
    );
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
