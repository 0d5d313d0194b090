use std::io;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use qbsde_core::coupling::{coupling_sweep, write_coupling_csv, CouplingRow, LocalCorrelation};
use qbsde_core::driver::{truncate, validate_driver, SamplingBox, ValidationReport};
use qbsde_core::forward::{kobylanski_pipeline, KLevelReport, RefinedResidual};
use qbsde_core::martingale::{f_martingale_test, unit_drift_candidates, write_drift_csv, AutoFamily, Residual, TestFamily};
use qbsde_core::paths::simulate_bm;
use qbsde_core::pde::{solve_semilinear, SchemeInfo, SpaceGrid};
use qbsde_core::registry;
use qbsde_core::subharmonic::{
    construct_subharmonic, construct_x_free, exp_test_function, is_subharmonic, AnsatzFunction, AnsatzRecord, BasePoint,
    ConstructOptions, SubharmonicOptions, SubharmonicVerdict, TestFunction,
};

use crate::config::{Candidate, ExperimentConfig};
use crate::output::{self, Jsonl};
use crate::{CheckArgs, CheckDriverArgs, CliError, Command, ConstructArgs, CoupleArgs, DriverArgs, PhiCheckArgs, RunArgs, SolveArgs, SubharmonicCommand};

pub fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::CheckDriver(a) => check_driver(a),
        Command::Solve(a) => solve(a),
        Command::Kobylanski(a) => kobylanski(a),
        Command::Subharmonic(SubharmonicCommand::Construct(a)) => construct(a),
        Command::Subharmonic(SubharmonicCommand::Check(a)) => check_phi(a),
        Command::Check(a) => check(a),
        Command::Couple(a) => couple(a),
    }
}

fn load(run: &RunArgs) -> Result<(ExperimentConfig, Jsonl), CliError> {
    let config = ExperimentConfig::load(&run.config)?;
    let sink = Jsonl::open(run.out.as_deref().or(config.outputs.jsonl.as_deref()), &config)?;
    Ok((config, sink))
}

/// Config stand-in for commands driven by flags alone.
fn flag_config(driver: &str, horizon: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        driver: driver.to_string(),
        horizon,
        seed,
        ..ExperimentConfig::default()
    }
}

#[derive(Serialize)]
struct DriverRecord<'a> {
    driver: &'a str,
    n: usize,
    d: usize,
    sampling_box: SamplingBox,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

fn check_driver(a: &CheckDriverArgs) -> Result<(), CliError> {
    let f = registry::driver(&a.driver, a.n, a.d, a.horizon)?;
    let sampling_box = SamplingBox::symmetric(a.horizon, a.y_bound, a.z_bound)?;
    let report = validate_driver(&f, &sampling_box, a.budget, a.seed)?;
    let mut sink = Jsonl::open(a.out.as_deref(), &flag_config(&a.driver, a.horizon, a.seed))?;
    sink.write(
        "driver_validation",
        &DriverRecord {
            driver: &a.driver,
            n: a.n,
            d: a.d,
            sampling_box,
            report: &report,
        },
    )?;
    sink.finish()?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "{} growth and {} regularity violations",
            report.growth_violations.len(),
            report.regularity_violations.len()
        )))
    }
}

#[derive(Serialize)]
struct SolveRecord {
    y0: f64,
    max_abs_u: f64,
    max_abs_ux: f64,
    truncation: Option<f64>,
    nodes: usize,
    steps: usize,
    scheme: SchemeInfo,
}

fn solve(a: &SolveArgs) -> Result<(), CliError> {
    let (config, mut sink) = load(&a.run)?;
    let mut f = config.driver_spec()?;
    if let Some(k) = a.k {
        f = truncate(&f, k)?;
    }
    let space = SpaceGrid::new(config.half_width, config.dx)?;
    let vg = solve_semilinear(&f, &config.terminal_condition()?, space, config.time_grid()?)?;
    sink.write(
        "solve",
        &SolveRecord {
            y0: vg.y0(),
            max_abs_u: vg.max_abs_u(),
            max_abs_ux: vg.max_abs_ux(),
            truncation: vg.truncation(),
            nodes: space.nodes(),
            steps: config.steps,
            scheme: *vg.scheme(),
        },
    )?;
    if let Some(path) = a.dump_grid.as_deref().or(config.outputs.grid.as_deref()) {
        vg.write_csv(output::create(path)?).map_err(|e| CliError::Io(e.to_string()))?;
    }
    sink.finish()
}

#[derive(Serialize)]
struct PipelineSummary<'a> {
    schedule: &'a [f64],
    stopped_early: bool,
    limit_residual: Residual,
    refined: Option<RefinedResidual>,
    validation_pass: Option<bool>,
    sup_bounds_hold: bool,
}

fn write_levels(sink: &mut Jsonl, levels: &[KLevelReport]) -> Result<(), CliError> {
    for level in levels {
        sink.write("level", level)?;
    }
    Ok(())
}

fn kobylanski(a: &RunArgs) -> Result<(), CliError> {
    let (config, mut sink) = load(a)?;
    let report = kobylanski_pipeline(&config.driver_spec()?, &config.terminal_condition()?, &config.pipeline()?)?;
    write_levels(&mut sink, &report.levels)?;
    let sup_bounds_hold = report.levels.iter().all(|l| l.sup_pass);
    sink.write(
        "summary",
        &PipelineSummary {
            schedule: &report.schedule,
            stopped_early: report.stopped_early,
            limit_residual: report.limit_residual,
            refined: report.refined,
            validation_pass: report.validation.as_ref().map(|v| v.pass),
            sup_bounds_hold,
        },
    )?;
    sink.finish()?;
    if sup_bounds_hold {
        Ok(())
    } else {
        Err(CliError::Assertion("the a-priori sup bound failed at some k".into()))
    }
}

#[derive(Serialize)]
struct ConstructRecord {
    driver: String,
    kind: &'static str,
    r_dom: f64,
    parameters: serde_json::Value,
    verdict: Option<SubharmonicVerdict>,
}

fn driver_of(a: &DriverArgs) -> Result<qbsde_core::DriverSpec, CliError> {
    Ok(registry::driver(&a.driver, a.n, a.d, a.horizon)?)
}

fn or_zeros(v: &[f64], len: usize) -> Vec<f64> {
    if v.is_empty() {
        vec![0.0; len]
    } else {
        v.to_vec()
    }
}

fn construct(a: &ConstructArgs) -> Result<(), CliError> {
    let f = driver_of(&a.driver)?;
    let (n, d) = (f.n(), f.d());
    let base = BasePoint {
        t: a.t,
        x: or_zeros(&a.x, d),
        y: or_zeros(&a.y, n),
        z: or_zeros(&a.z, n * d),
    };
    let mut opts = ConstructOptions::default();
    opts.check.seed = a.seed;
    opts.check.horizon = a.driver.horizon;
    let to_value = |v: serde_json::Result<serde_json::Value>| v.map_err(|e| CliError::Io(e.to_string()));
    let record = if a.x_free {
        let phi = construct_x_free(&f, &base, a.sign, a.eps, a.r_y, &opts)?;
        ConstructRecord {
            driver: a.driver.driver.clone(),
            kind: "x_free",
            r_dom: phi.r_dom(),
            parameters: to_value(serde_json::to_value(&phi))?,
            verdict: None,
        }
    } else {
        let phi = construct_subharmonic(&f, &base, a.i0, a.sign, a.eps, a.r_y, &opts)?;
        ConstructRecord {
            driver: a.driver.driver.clone(),
            kind: "ansatz",
            r_dom: phi.r_dom(),
            parameters: to_value(serde_json::to_value(phi.record()))?,
            verdict: phi.provenance().map(|p| p.verdict.clone()),
        }
    };
    let mut sink = Jsonl::open(a.out.as_deref(), &flag_config(&a.driver.driver, a.driver.horizon, a.seed))?;
    sink.write("subharmonic", &record)?;
    sink.finish()
}

/// Reads an Ansatz record, either bare or as the `parameters` of the last
/// `subharmonic` line of a JSONL file.
fn read_record(path: &Path) -> Result<AnsatzRecord, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let missing = || CliError::Config(format!("{} holds no Ansatz record", path.display()));
    let value = match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(v) if v.get("record").is_none() => v,
        _ => text
            .lines()
            .rev()
            .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
            .find(|v| v["record"] == "subharmonic" && v["kind"] == "ansatz")
            .map(|v| v["parameters"].clone())
            .ok_or_else(missing)?,
    };
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct VerdictRecord {
    driver: String,
    phi: String,
    verdict: SubharmonicVerdict,
}

fn check_phi(a: &PhiCheckArgs) -> Result<(), CliError> {
    let f = driver_of(&a.driver)?;
    let phi: Box<dyn TestFunction> = match (&a.record, a.exp_ybound) {
        (Some(path), _) => Box::new(AnsatzFunction::from_record(&read_record(path)?)?),
        (None, Some(ybound)) => Box::new(exp_test_function(f.growth_constant(), ybound, 1.0, f.d())?),
        (None, None) => return Err(CliError::Config("pass --record or --exp-ybound".into())),
    };
    let opts = SubharmonicOptions {
        budget: a.budget,
        seed: a.seed,
        horizon: a.driver.horizon,
        ..SubharmonicOptions::default()
    };
    let verdict = is_subharmonic(&f, phi.as_ref(), &opts);
    let mut sink = Jsonl::open(a.out.as_deref(), &flag_config(&a.driver.driver, a.driver.horizon, a.seed))?;
    let failed = verdict.is_fail();
    sink.write(
        "verdict",
        &VerdictRecord {
            driver: a.driver.driver.clone(),
            phi: phi.label(),
            verdict,
        },
    )?;
    sink.finish()?;
    if failed {
        Err(CliError::Assertion(format!("`{}` violates the f-subharmonic inequality", phi.label())))
    } else {
        Ok(())
    }
}

#[derive(Serialize)]
struct CheckSummary<'a> {
    candidate: Candidate,
    pass: bool,
    flagged: &'a [usize],
    threshold_se: f64,
    construction_failures: &'a [String],
    caveat: &'a str,
}

fn check(a: &CheckArgs) -> Result<(), CliError> {
    let (config, mut sink) = load(&a.run)?;
    let f = config.driver_spec()?;
    let candidate = match config.check.candidate {
        Candidate::Pipeline => {
            let report = kobylanski_pipeline(&f, &config.terminal_condition()?, &config.pipeline()?)?;
            write_levels(&mut sink, &report.levels)?;
            report.limit
        }
        kind => {
            let ens = Arc::new(simulate_bm(config.time_grid()?, config.paths, 1, config.seed)?);
            let (solution, impostor) = unit_drift_candidates(&ens)?;
            if kind == Candidate::UnitDrift {
                solution
            } else {
                impostor
            }
        }
    };
    let c = &config.check;
    let family = TestFamily::Auto(AutoFamily {
        points: c.points,
        eps: c.eps,
        r_y: c.r_y,
        kind: c.family,
        seed: c.seed,
        ..AutoFamily::default()
    });
    let report = f_martingale_test(&f, &candidate, &family)?;
    for phi in &report.functions {
        sink.write("phi", phi)?;
    }
    sink.write(
        "verdict",
        &CheckSummary {
            candidate: c.candidate,
            pass: report.pass,
            flagged: &report.flagged,
            threshold_se: report.threshold_se,
            construction_failures: &report.construction_failures,
            caveat: report.caveat,
        },
    )?;
    sink.finish()?;
    if let Some(path) = a.drift_csv.as_deref().or(config.outputs.csv.as_deref()) {
        write_drift_csv(output::create(path)?, &report.functions).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Assertion(format!("{} test functions flagged a negative drift", report.flagged.len())))
    }
}

/// Constant-correlation rows, sorted by `r`, must show a nonincreasing
/// terminal gap within 2 standard errors and an exact zero at `r = 1`.
fn coupling_assertions(rules: &[LocalCorrelation], rows: &[CouplingRow]) -> Result<(), CliError> {
    let mut constant: Vec<(f64, &CouplingRow)> = rules
        .iter()
        .zip(rows)
        .filter_map(|(rule, row)| match rule {
            LocalCorrelation::Constant { r } => Some((*r, row)),
            LocalCorrelation::Threshold { .. } => None,
        })
        .collect();
    constant.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in constant.windows(2) {
        let (lo, hi) = (w[0].1, w[1].1);
        if hi.lhs > lo.lhs + 2.0 * lo.lhs_se.hypot(hi.lhs_se) {
            return Err(CliError::Assertion(format!("terminal gap increases from r = {} to r = {}", w[0].0, w[1].0)));
        }
    }
    if let Some((_, row)) = constant.iter().find(|(r, row)| *r == 1.0 && row.lhs != 0.0) {
        return Err(CliError::Assertion(format!("terminal gap {} at r = 1", row.lhs)));
    }
    Ok(())
}

fn couple(a: &CoupleArgs) -> Result<(), CliError> {
    let config = ExperimentConfig::load(&a.run.config)?;
    let rules = &config.coupling.rules;
    let rows = coupling_sweep(
        &config.driver_spec()?,
        &config.terminal_condition()?,
        rules,
        &config.coupling_config()?,
        config.coupling.tail_eps,
    )?;
    let hash = output::config_hash(&config);
    let extra = [("config_hash", hash), ("seed", config.seed.to_string())];
    match a.csv.as_deref().or(config.outputs.csv.as_deref()) {
        Some(path) => write_coupling_csv(output::create(path)?, &rows, &extra),
        None => write_coupling_csv(io::stdout().lock(), &rows, &extra),
    }
    .map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(path) = a.run.out.as_deref().or(config.outputs.jsonl.as_deref()) {
        let mut sink = Jsonl::open(Some(path), &config)?;
        for row in &rows {
            sink.write("coupling_row", row)?;
        }
        sink.finish()?;
    }
    coupling_assertions(rules, &rows)
}
