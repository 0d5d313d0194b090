//! Forward simulation of the truncated equation and the truncate-solve-extract
//! pipeline for quadratic drivers.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{frobenius, project_ball_in_place, truncate, validate_driver, DriverSpec, SamplingBox, ValidationReport};
use crate::error::{Error, Result};
use crate::martingale::{bmo_estimate, bsde_residual, BinSpec, Residual};
use crate::paths::{simulate_bm, ItoProcess, PathEnsemble, TimeGrid};
use crate::pde::{exp_bound, extract_solution, solve_semilinear, sup_bound_check, ExtractOptions, SpaceGrid, TerminalCondition, ValueGrid};

/// Euler path of `X^k` per `(path, step)`.
#[derive(Debug, Clone)]
pub struct ForwardRun {
    k: f64,
    ensemble: Arc<PathEnsemble>,
    x: Vec<f64>,
    label: String,
}

impl ForwardRun {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn grid(&self) -> &TimeGrid {
        self.ensemble.grid()
    }

    pub fn paths(&self) -> usize {
        self.ensemble.paths()
    }

    pub fn driver_label(&self) -> &str {
        &self.label
    }

    pub fn x(&self, path: usize, step: usize) -> f64 {
        self.x[path * (self.grid().steps() + 1) + step]
    }

    pub fn x0(&self) -> f64 {
        self.x[0]
    }

    pub fn x_terminal(&self) -> Vec<f64> {
        (0..self.paths()).map(|p| self.x(p, self.grid().steps())).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }
}

/// `X_{i+1} = X_i - f^k(t_i, X_i, Z_i) dt + pi_k(Z_i) . dB_i` from `X_0 = Y_0`,
/// with `Z` read off `source`.
pub fn simulate_forward(fk: &DriverSpec, source: &ItoProcess, k: f64) -> Result<ForwardRun> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level k = {k} must be positive")));
    }
    if fk.n() != 1 || fk.d() != source.dim() {
        return Err(Error::Dimension(format!(
            "forward scheme needs a scalar driver with d = {}, got (n, d) = ({}, {})",
            source.dim(),
            fk.n(),
            fk.d()
        )));
    }
    let grid = *source.grid();
    let steps = grid.steps();
    let dt = grid.dt();
    let ens = source.ensemble();
    let x0 = source.y(0, 0);
    let rows: Vec<Result<Vec<f64>>> = (0..source.paths())
        .into_par_iter()
        .map(|p| {
            let mut row = Vec::with_capacity(steps + 1);
            let mut x = x0;
            let mut zk = vec![0.0; source.dim()];
            row.push(x);
            for i in 0..steps {
                zk.copy_from_slice(source.z(p, i));
                project_ball_in_place(&mut zk, k);
                let noise: f64 = zk.iter().enumerate().map(|(j, z)| z * ens.increment(p, i, j)).sum();
                x += -fk.eval_scalar(grid.time(i), x, &zk) * dt + noise;
                if !x.is_finite() {
                    return Err(Error::NonFinite {
                        location: format!("forward path {p}, step {}", i + 1),
                        value: x,
                    });
                }
                row.push(x);
            }
            Ok(row)
        })
        .collect();
    let mut x = Vec::with_capacity(source.paths() * (steps + 1));
    for row in rows {
        x.extend(row?);
    }
    Ok(ForwardRun {
        k,
        ensemble: Arc::clone(ens),
        x,
        label: fk.label().to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminalGap {
    pub p: f64,
    /// Monte Carlo mean of `|X_T - xi|^p`.
    pub mean: f64,
    pub se: f64,
}

pub fn terminal_gap(run: &ForwardRun, xi: &[f64], p: f64) -> Result<TerminalGap> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("gap exponent p = {p} must be at least 1")));
    }
    if xi.len() != run.paths() {
        return Err(Error::Dimension(format!("{} terminal values for {} paths", xi.len(), run.paths())));
    }
    let steps = run.grid().steps();
    let samples: Vec<f64> = (0..run.paths()).map(|q| (run.x(q, steps) - xi[q]).abs().powf(p)).collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(TerminalGap {
        p,
        mean,
        se: (var / n).sqrt(),
    })
}

/// Driver validation performed before the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub budget: usize,
    pub seed: u64,
    /// Half-width of the sampled `z` range; defaults to the largest `k`.
    pub z_bound: Option<f64>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            budget: 2000,
            seed: 0,
            z_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub schedule: Vec<f64>,
    pub grid: TimeGrid,
    pub half_width: f64,
    pub dx: f64,
    pub paths: usize,
    pub seed: u64,
    pub extract: ExtractOptions,
    /// Stop after the first level whose `E|X_T - xi|^2` falls below this.
    pub early_stop: Option<f64>,
    pub bmo_bins: BinSpec,
    pub validation: Option<ValidationConfig>,
    /// Also compute the limit residual at `dt / 2`.
    pub refine_residual: bool,
    /// Slack added to the a-priori bound in the sup check.
    pub sup_tolerance: f64,
}

impl PipelineConfig {
    pub fn new(grid: TimeGrid, half_width: f64, dx: f64, paths: usize, seed: u64) -> Self {
        Self {
            schedule: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            grid,
            half_width,
            dx,
            paths,
            seed,
            extract: ExtractOptions::default(),
            early_stop: Some(1e-3),
            bmo_bins: BinSpec::default(),
            validation: Some(ValidationConfig::default()),
            refine_residual: false,
            sup_tolerance: 1e-9,
        }
    }

    fn check(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidParameter("truncation schedule is empty".into()));
        }
        if self.schedule.iter().any(|k| !(*k > 0.0 && k.is_finite())) || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "truncation schedule {:?} must be positive and strictly increasing",
                self.schedule
            )));
        }
        if self.paths < 2 {
            return Err(Error::InvalidParameter("pipeline needs at least 2 paths".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KLevelReport {
    pub k: f64,
    pub y0: f64,
    pub gap_p1: f64,
    pub gap_p2: f64,
    pub gap_se: f64,
    pub sup_margin: f64,
    pub sup_pass: bool,
    pub bmo_hat: f64,
    /// Residual of `(Y^k, Z^k)` against `f^k`.
    pub residual: f64,
    pub clamped_fraction: f64,
    pub max_abs_z: f64,
    pub monotone: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedResidual {
    pub residual: f64,
    /// `R(dt) / R(dt / 2)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub schedule: Vec<f64>,
    pub levels: Vec<KLevelReport>,
    pub validation: Option<ValidationReport>,
    pub stopped_early: bool,
    /// Residual of the largest-`k` candidate against the untruncated driver.
    pub limit_residual: Residual,
    pub refined: Option<RefinedResidual>,
    #[serde(skip)]
    pub limit: ItoProcess,
    #[serde(skip)]
    pub limit_grid: ValueGrid,
}

impl PipelineReport {
    pub fn y0(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.y0)
    }
}

fn solve_level(f: &DriverSpec, h: &TerminalCondition, k: f64, space: SpaceGrid, ensemble: &Arc<PathEnsemble>, extract: ExtractOptions) -> Result<(DriverSpec, ValueGrid, ItoProcess)> {
    let fk = truncate(f, k).map_err(|e| e.at_stage("truncate", k))?;
    let vg = solve_semilinear(&fk, h, space, *ensemble.grid()).map_err(|e| e.at_stage("solve", k))?;
    let ip = extract_solution(&vg, ensemble, extract).map_err(|e| e.at_stage("extract", k))?;
    Ok((fk, vg, ip))
}

/// For each `k`: truncate, solve, extract, run the forward scheme and measure
/// the terminal gap, the a-priori sup bound and the BMO estimate. The
/// largest-`k` solution is checked against the untruncated driver.
pub fn kobylanski_pipeline(f: &DriverSpec, h: &TerminalCondition, config: &PipelineConfig) -> Result<PipelineReport> {
    config.check()?;
    if f.n() != 1 || f.d() != 1 {
        return Err(Error::Dimension(format!("pipeline needs n = d = 1, got ({}, {})", f.n(), f.d())));
    }
    let last_k = *config.schedule.last().expect("checked non-empty");
    let space = SpaceGrid::new(config.half_width, config.dx)?;
    let xi_sup = h.sup_norm().min((0..space.nodes()).fold(0.0_f64, |a, j| a.max(h.eval(space.x(j)).abs())));
    let m = f.growth_constant();

    let validation = match config.validation {
        Some(v) => {
            let ybound = exp_bound(m, config.grid.horizon(), xi_sup);
            let sbox = SamplingBox::symmetric(config.grid.horizon(), ybound, v.z_bound.unwrap_or(last_k))
                .map_err(|e| e.at_stage("validate", 0.0))?;
            let report = validate_driver(f, &sbox, v.budget, v.seed).map_err(|e| e.at_stage("validate", 0.0))?;
            if !report.pass {
                return Err(Error::DriverValidation {
                    label: f.label().to_string(),
                    growth: report.growth_violations.len(),
                    regularity: report.regularity_violations.len(),
                }
                .at_stage("validate", 0.0));
            }
            Some(report)
        }
        None => None,
    };

    let ensemble = Arc::new(simulate_bm(config.grid, config.paths, 1, config.seed)?);
    let mut levels = Vec::new();
    let mut limit = None;
    let mut stopped_early = false;
    for &k in &config.schedule {
        let (fk, vg, ip) = solve_level(f, h, k, space, &ensemble, config.extract)?;
        let run = simulate_forward(&fk, &ip, k).map_err(|e| e.at_stage("forward", k))?;
        let gap1 = terminal_gap(&run, ip.terminal(), 1.0).map_err(|e| e.at_stage("gap", k))?;
        let gap2 = terminal_gap(&run, ip.terminal(), 2.0).map_err(|e| e.at_stage("gap", k))?;
        let sup = sup_bound_check(&ip, m, xi_sup, config.sup_tolerance);
        let bmo = bmo_estimate(&ip, &config.bmo_bins).map_err(|e| e.at_stage("bmo", k))?;
        let residual = bsde_residual(&fk, &ip).map_err(|e| e.at_stage("residual", k))?;
        levels.push(KLevelReport {
            k,
            y0: vg.y0(),
            gap_p1: gap1.mean,
            gap_p2: gap2.mean,
            gap_se: gap2.se,
            sup_margin: sup.margin,
            sup_pass: sup.pass,
            bmo_hat: bmo.estimate,
            residual: residual.residual,
            clamped_fraction: ip.clamped_fraction(),
            max_abs_z: ip.z_values().iter().fold(0.0_f64, |a, z| a.max(z.abs())),
            monotone: vg.scheme().monotone,
        });
        limit = Some((vg, ip));
        if config.early_stop.is_some_and(|tol| gap2.mean < tol) && k != last_k {
            stopped_early = true;
            break;
        }
    }
    let (limit_grid, limit) = limit.expect("schedule is non-empty");
    let k_final = levels.last().map_or(last_k, |l| l.k);
    let limit_residual = bsde_residual(f, &limit).map_err(|e| e.at_stage("residual", k_final))?;

    let refined = if config.refine_residual {
        let fine = Arc::new(simulate_bm(config.grid.refined(2), config.paths, 1, config.seed)?);
        let (_, _, ip) = solve_level(f, h, k_final, space, &fine, config.extract)?;
        let r = bsde_residual(f, &ip).map_err(|e| e.at_stage("residual", k_final))?;
        Some(RefinedResidual {
            residual: r.residual,
            ratio: limit_residual.residual / r.residual,
        })
    } else {
        None
    };

    Ok(PipelineReport {
        schedule: config.schedule.clone(),
        levels,
        validation,
        stopped_early,
        limit_residual,
        refined,
        limit,
        limit_grid,
    })
}

/// Largest Frobenius norm of `Z` over the ensemble.
pub fn max_z_norm(ip: &ItoProcess) -> f64 {
    (0..ip.paths())
        .flat_map(|p| (0..=ip.grid().steps()).map(move |i| (p, i)))
        .fold(0.0_f64, |a, (p, i)| a.max(frobenius(ip.z(p, i))))
}
