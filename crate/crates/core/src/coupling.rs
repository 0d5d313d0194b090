//! Pairs of Brownian motions with a prescribed local correlation and the
//! solutions they drive.
//!
//! `dB^2 = rho dB^1 + sqrt(1 - rho^2) dW` with scalar `rho` per step, so the
//! local correlation `rho I` is positive semidefinite with operator norm at
//! most one. Both legs read the same value grid, which makes `Y^i` a functional
//! of `B^i` alone.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::DriverSpec;
use crate::error::{Error, Result};
use crate::paths::{simulate_bm, simulate_bm_on, ItoProcess, PathEnsemble, TimeGrid};
use crate::pde::{extract_solution, solve_semilinear, ExtractOptions, SpaceGrid, TerminalCondition, ValueGrid};
use crate::report::{fmt_cell, fmt_f64};
use crate::rng::Substream;

/// Terminal norms below this make [`sp_ratio`] degenerate.
pub const DEGENERATE_NORM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LocalCorrelation {
    /// `rho = r` with `r` in `[0, 1]`.
    Constant { r: f64 },
    /// `rho_t = 1{|Z^1_t|^2 <= 1/eps}`.
    Threshold { eps: f64 },
}

impl LocalCorrelation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { r } if (0.0..=1.0).contains(&r) => Ok(()),
            Self::Threshold { eps } if eps > 0.0 && eps.is_finite() => Ok(()),
            rule => Err(Error::InvalidParameter(format!("invalid local correlation {rule:?}"))),
        }
    }

    /// `r` or `eps`.
    pub fn parameter(&self) -> f64 {
        match *self {
            Self::Constant { r } => r,
            Self::Threshold { eps } => eps,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Constant { r } => format!("constant:r={r}"),
            Self::Threshold { eps } => format!("threshold:eps={eps}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledBm {
    pub b1: Arc<PathEnsemble>,
    pub b2: Arc<PathEnsemble>,
    /// Realized `rho` per `(path, step)` for steps `0..m`.
    pub rho: Vec<f64>,
}

impl CoupledBm {
    pub fn rho(&self, path: usize, step: usize) -> f64 {
        self.rho[path * self.b1.grid().steps() + step]
    }
}

/// Simulates `(B^1, B^2)`. The threshold rule reads `Z^1_{t_i} = u_x(t_i, B^1_{t_i})`
/// off `grid`, so `rho` is adapted.
pub fn simulate_coupled_bm(grid: TimeGrid, paths: usize, rule: LocalCorrelation, seed: u64, value_grid: Option<&ValueGrid>) -> Result<CoupledBm> {
    rule.validate()?;
    if let LocalCorrelation::Threshold { .. } = rule {
        match value_grid {
            Some(vg) if *vg.grid() == grid => {}
            Some(_) => return Err(Error::Dimension("value grid and coupling use different time grids".into())),
            None => return Err(Error::InvalidParameter("threshold rule needs a value grid for Z^1".into())),
        }
    }
    let b1 = simulate_bm(grid, paths, 1, seed)?;
    let w = simulate_bm_on(grid, paths, 1, seed, Substream::CouplingNoise)?;
    let steps = grid.steps();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..paths)
        .into_par_iter()
        .map(|p| {
            // B^2 = B^1 + D, so rho = 1 leaves D exactly zero.
            let mut d = 0.0;
            let mut b2 = Vec::with_capacity(steps + 1);
            let mut rho = Vec::with_capacity(steps);
            b2.push(b1.at1(p, 0));
            for i in 0..steps {
                let r = match rule {
                    LocalCorrelation::Constant { r } => r,
                    LocalCorrelation::Threshold { eps } => {
                        let z = value_grid.expect("checked above").interpolate(i, b1.at1(p, i), 0.0).ux;
                        if z * z <= 1.0 / eps {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                if r != 1.0 {
                    d += (r - 1.0) * b1.increment(p, i, 0) + (1.0 - r * r).sqrt() * w.increment(p, i, 0);
                }
                b2.push(b1.at1(p, i + 1) + d);
                rho.push(r);
            }
            (b2, rho)
        })
        .collect();
    let mut b2 = Vec::with_capacity(paths * (steps + 1));
    let mut rho = Vec::with_capacity(paths * steps);
    for (b, r) in rows {
        b2.extend(b);
        rho.extend(r);
    }
    Ok(CoupledBm {
        b1: Arc::new(b1),
        b2: Arc::new(PathEnsemble::from_values(grid, paths, 1, seed, b2)?),
        rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingConfig {
    pub grid: TimeGrid,
    pub half_width: f64,
    pub dx: f64,
    pub paths: usize,
    pub seed: u64,
    pub extract: ExtractOptions,
}

#[derive(Debug, Clone)]
pub struct CouplingRun {
    pub rule: LocalCorrelation,
    pub bm: CoupledBm,
    pub leg1: ItoProcess,
    pub leg2: ItoProcess,
    pub value_grid: Arc<ValueGrid>,
}

/// One solve, extracted along both legs.
pub fn coupled_solutions(driver: &DriverSpec, h: &TerminalCondition, rule: LocalCorrelation, config: &CouplingConfig) -> Result<CouplingRun> {
    let space = SpaceGrid::new(config.half_width, config.dx)?;
    let vg = Arc::new(solve_semilinear(driver, h, space, config.grid)?);
    coupled_on_grid(&vg, rule, config.paths, config.seed, config.extract)
}

/// Couples along an existing value grid, so a sweep over rules shares one solve.
pub fn coupled_on_grid(vg: &Arc<ValueGrid>, rule: LocalCorrelation, paths: usize, seed: u64, extract: ExtractOptions) -> Result<CouplingRun> {
    let bm = simulate_coupled_bm(*vg.grid(), paths, rule, seed, Some(vg))?;
    let leg1 = extract_solution(vg, &bm.b1, extract)?;
    let leg2 = extract_solution(vg, &bm.b2, extract)?;
    Ok(CouplingRun {
        rule,
        bm,
        leg1,
        leg2,
        value_grid: Arc::clone(vg),
    })
}

fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LusinStat {
    /// Mean of `(Y^2_T - Y^1_T)^2`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// Mean of `int_0^T Tr(I - rho) dt`.
    pub rhs_arg: f64,
    pub rhs_se: f64,
}

pub fn lusin_check(run: &CouplingRun) -> LusinStat {
    let grid = run.leg1.grid();
    let (steps, dt) = (grid.steps(), grid.dt());
    let gaps: Vec<f64> = (0..run.leg1.paths()).map(|p| (run.leg2.y(p, steps) - run.leg1.y(p, steps)).powi(2)).collect();
    let defects: Vec<f64> = (0..run.leg1.paths())
        .map(|p| (0..steps).map(|i| 1.0 - run.bm.rho(p, i)).sum::<f64>() * dt)
        .collect();
    let (lhs, lhs_se) = mean_se(&gaps);
    let (rhs_arg, rhs_se) = mean_se(&defects);
    LusinStat {
        lhs,
        lhs_se,
        rhs_arg,
        rhs_se,
    }
}

/// `(mean |v|^p)^{1/p}`.
pub fn lp_norm(values: &[f64], p: f64) -> f64 {
    (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / values.len() as f64).powf(1.0 / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpRatio {
    Ratio {
        value: f64,
        /// Delta-method standard error.
        se: f64,
        sup_norm: f64,
        terminal_norm: f64,
    },
    /// Terminal norm below [`DEGENERATE_NORM`]; counts as a pass.
    Degenerate { terminal_norm: f64 },
}

impl SpRatio {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Ratio { value, .. } => Some(*value),
            Self::Degenerate { .. } => None,
        }
    }
}

/// `|| sup_t |Y^2 - Y^1| ||_p / || Y^2_T - Y^1_T ||_p` over the ensemble.
pub fn sp_ratio(run: &CouplingRun, p: f64) -> Result<SpRatio> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("norm exponent p = {p} must be at least 1")));
    }
    let steps = run.leg1.grid().steps();
    let paths = run.leg1.paths();
    let sups: Vec<f64> = (0..paths)
        .map(|q| (0..=steps).fold(0.0_f64, |a, i| a.max((run.leg2.y(q, i) - run.leg1.y(q, i)).abs())))
        .collect();
    let ends: Vec<f64> = (0..paths).map(|q| run.leg2.y(q, steps) - run.leg1.y(q, steps)).collect();
    let terminal_norm = lp_norm(&ends, p);
    if terminal_norm < DEGENERATE_NORM {
        return Ok(SpRatio::Degenerate { terminal_norm });
    }
    let sup_norm = lp_norm(&sups, p);
    let a_mean = sup_norm.powf(p);
    let b_mean = terminal_norm.powf(p);
    let log_terms: Vec<f64> = sups
        .iter()
        .zip(&ends)
        .map(|(s, e)| s.powf(p) / a_mean - e.abs().powf(p) / b_mean)
        .collect();
    let (_, log_se) = mean_se(&log_terms);
    let value = sup_norm / terminal_norm;
    Ok(SpRatio::Ratio {
        value,
        se: value * log_se / p,
        sup_norm,
        terminal_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub eps: f64,
    /// Fraction of paths with `int |Z|^2 1{|Z|^2 > 1/eps} dt > eps`.
    pub prob: f64,
    pub se: f64,
}

pub fn tail_estimate(ip: &ItoProcess, eps: &[f64]) -> Result<Vec<TailRow>> {
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidParameter(format!("tail level eps = {e} must be positive")));
    }
    let grid = ip.grid();
    let (steps, dt) = (grid.steps(), grid.dt());
    let n = ip.paths() as f64;
    Ok(eps
        .iter()
        .map(|&e| {
            let hits = (0..ip.paths())
                .into_par_iter()
                .filter(|&p| {
                    let tail: f64 = (0..steps)
                        .map(|i| ip.z(p, i).iter().map(|v| v * v).sum::<f64>())
                        .filter(|z2| *z2 > 1.0 / e)
                        .sum::<f64>()
                        * dt;
                    tail > e
                })
                .count() as f64;
            let prob = hits / n;
            TailRow {
                eps: e,
                prob,
                se: (prob * (1.0 - prob) / n).sqrt(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UiStat {
    pub delta: f64,
    /// Mean of `int_0^{tau_delta} (1 - rho)(|Z^1|^2 + |Z^2|^2) dt`.
    pub mean: f64,
    pub se: f64,
    /// Fraction of paths with `tau_delta < T`.
    pub exited: f64,
}

/// `tau_delta` is the first grid time with `|Y^2 - Y^1| >= delta`, else `T`.
pub fn ui_report(run: &CouplingRun, delta: f64) -> Result<UiStat> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    let grid = run.leg1.grid();
    let (steps, dt) = (grid.steps(), grid.dt());
    let per_path: Vec<(f64, bool)> = (0..run.leg1.paths())
        .map(|p| {
            let tau = (0..=steps)
                .find(|&i| (run.leg2.y(p, i) - run.leg1.y(p, i)).abs() >= delta)
                .unwrap_or(steps);
            let integral = (0..tau)
                .map(|i| {
                    let z1: f64 = run.leg1.z(p, i).iter().map(|v| v * v).sum();
                    let z2: f64 = run.leg2.z(p, i).iter().map(|v| v * v).sum();
                    (1.0 - run.bm.rho(p, i)) * (z1 + z2)
                })
                .sum::<f64>()
                * dt;
            (integral, tau < steps)
        })
        .collect();
    let values: Vec<f64> = per_path.iter().map(|v| v.0).collect();
    let (mean, se) = mean_se(&values);
    Ok(UiStat {
        delta,
        mean,
        se,
        exited: per_path.iter().filter(|v| v.1).count() as f64 / per_path.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationStat {
    pub mean: f64,
    pub se: f64,
    /// Expected value under the model.
    pub target: f64,
}

/// Path average of `sum (dB)^2`; the target is `T`.
pub fn quadratic_variation(ensemble: &PathEnsemble) -> VariationStat {
    let steps = ensemble.grid().steps();
    let values: Vec<f64> = (0..ensemble.paths())
        .map(|p| (0..steps).map(|i| (0..ensemble.dim()).map(|j| ensemble.increment(p, i, j).powi(2)).sum::<f64>()).sum())
        .collect();
    let (mean, se) = mean_se(&values);
    VariationStat {
        mean,
        se,
        target: ensemble.grid().horizon() * ensemble.dim() as f64,
    }
}

/// Path average of `sum (dB^1 dB^2 - rho dt)`; the target is zero.
pub fn cross_variation_defect(bm: &CoupledBm) -> VariationStat {
    let grid = bm.b1.grid();
    let (steps, dt) = (grid.steps(), grid.dt());
    let values: Vec<f64> = (0..bm.b1.paths())
        .map(|p| {
            (0..steps)
                .map(|i| bm.b1.increment(p, i, 0) * bm.b2.increment(p, i, 0) - bm.rho(p, i) * dt)
                .sum()
        })
        .collect();
    let (mean, se) = mean_se(&values);
    VariationStat { mean, se, target: 0.0 }
}

/// Pearson correlation of `B^1_T` and `B^2_T`.
pub fn terminal_correlation(bm: &CoupledBm) -> f64 {
    let steps = bm.b1.grid().steps();
    let n = bm.b1.paths() as f64;
    let a: Vec<f64> = (0..bm.b1.paths()).map(|p| bm.b1.at1(p, steps)).collect();
    let b: Vec<f64> = (0..bm.b2.paths()).map(|p| bm.b2.at1(p, steps)).collect();
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRow {
    pub rule: String,
    pub r_or_eps: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs_arg: f64,
    /// `NaN` when degenerate.
    pub ratio_p2: f64,
    pub ratio_p2_se: f64,
    pub degenerate: bool,
    /// Leg-one tail probability at `tail_eps`, or at the rule's own `eps`.
    pub tail_prob: f64,
}

/// One value grid shared by every rule; each rule reuses `seed`.
pub fn coupling_sweep(driver: &DriverSpec, h: &TerminalCondition, rules: &[LocalCorrelation], config: &CouplingConfig, tail_eps: f64) -> Result<Vec<CouplingRow>> {
    let space = SpaceGrid::new(config.half_width, config.dx)?;
    let vg = Arc::new(solve_semilinear(driver, h, space, config.grid)?);
    rules
        .iter()
        .map(|&rule| {
            let run = coupled_on_grid(&vg, rule, config.paths, config.seed, config.extract)?;
            let lusin = lusin_check(&run);
            let ratio = sp_ratio(&run, 2.0)?;
            let eps = match rule {
                LocalCorrelation::Threshold { eps } => eps,
                LocalCorrelation::Constant { .. } => tail_eps,
            };
            let tail = tail_estimate(&run.leg1, &[eps])?[0];
            let (ratio_p2, ratio_p2_se, degenerate) = match ratio {
                SpRatio::Ratio { value, se, .. } => (value, se, false),
                SpRatio::Degenerate { .. } => (f64::NAN, f64::NAN, true),
            };
            Ok(CouplingRow {
                rule: rule.label(),
                r_or_eps: rule.parameter(),
                lhs: lusin.lhs,
                lhs_se: lusin.lhs_se,
                rhs_arg: lusin.rhs_arg,
                ratio_p2,
                ratio_p2_se,
                degenerate,
                tail_prob: tail.prob,
            })
        })
        .collect()
}

/// Header `r_or_eps,lhs,lhs_se,rhs_arg,ratio_p2,tail_prob,rule` followed by
/// the `extra` column names, whose values repeat on every row.
pub fn write_coupling_csv<W: Write>(mut w: W, rows: &[CouplingRow], extra: &[(&str, String)]) -> std::io::Result<()> {
    write!(w, "r_or_eps,lhs,lhs_se,rhs_arg,ratio_p2,tail_prob,rule")?;
    for (name, _) in extra {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.r_or_eps),
            fmt_cell(r.lhs),
            fmt_cell(r.lhs_se),
            fmt_cell(r.rhs_arg),
            fmt_cell(r.ratio_p2),
            fmt_cell(r.tail_prob),
            r.rule
        )?;
        for (_, value) in extra {
            write!(w, ",{value}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    fn config(paths: usize) -> CouplingConfig {
        CouplingConfig {
            grid: TimeGrid::new(1.0, 50).unwrap(),
            half_width: 6.0,
            dx: 0.05,
            paths,
            seed: 11,
            extract: ExtractOptions::default(),
        }
    }

    fn tanh() -> TerminalCondition {
        registry::terminal("tanh").unwrap()
    }

    #[test]
    fn full_correlation_duplicates_the_path() {
        let bm = simulate_coupled_bm(TimeGrid::new(1.0, 30).unwrap(), 100, LocalCorrelation::Constant { r: 1.0 }, 1, None).unwrap();
        assert_eq!(bm.b1.values(), bm.b2.values());
    }

    #[test]
    fn terminal_correlation_matches_rule() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let n = 20_000;
        let zero = simulate_coupled_bm(grid, n, LocalCorrelation::Constant { r: 0.0 }, 2, None).unwrap();
        assert!(terminal_correlation(&zero).abs() < 4.0 / (n as f64).sqrt());
        let half = simulate_coupled_bm(grid, n, LocalCorrelation::Constant { r: 0.5 }, 2, None).unwrap();
        assert!((terminal_correlation(&half) - 0.5).abs() < 0.03);
        for leg in [&half.b1, &half.b2] {
            let qv = quadratic_variation(leg);
            assert!((qv.mean - qv.target).abs() < 4.0 * qv.se);
        }
        let cross = cross_variation_defect(&half);
        assert!(cross.mean.abs() < 4.0 * cross.se);
    }

    #[test]
    fn rule_validation() {
        assert!(LocalCorrelation::Constant { r: 1.5 }.validate().is_err());
        assert!(LocalCorrelation::Threshold { eps: 0.0 }.validate().is_err());
        let grid = TimeGrid::new(1.0, 10).unwrap();
        assert!(simulate_coupled_bm(grid, 10, LocalCorrelation::Threshold { eps: 1.0 }, 0, None).is_err());
    }

    #[test]
    fn collapse_at_full_correlation() {
        let f = registry::driver("quadratic:gamma=1", 1, 1, 1.0).unwrap();
        let run = coupled_solutions(&f, &tanh(), LocalCorrelation::Constant { r: 1.0 }, &config(500)).unwrap();
        assert_eq!(run.leg1.y_values(), run.leg2.y_values());
        assert_eq!(run.leg1.z_values(), run.leg2.z_values());
        let l = lusin_check(&run);
        assert_eq!((l.lhs, l.rhs_arg), (0.0, 0.0));
        assert!(matches!(sp_ratio(&run, 2.0).unwrap(), SpRatio::Degenerate { .. }));
        assert_eq!(ui_report(&run, 0.1).unwrap().mean, 0.0);
    }

    #[test]
    fn independent_legs_obey_sanity_bounds() {
        let f = registry::driver("quadratic:gamma=1", 1, 1, 1.0).unwrap();
        let run = coupled_solutions(&f, &tanh(), LocalCorrelation::Constant { r: 0.0 }, &config(2000)).unwrap();
        let sup = run.leg1.y_values().iter().chain(run.leg2.y_values()).fold(0.0_f64, |a, v| a.max(v.abs()));
        let l = lusin_check(&run);
        assert!(l.lhs > 0.0 && l.lhs <= (2.0 * sup).powi(2));
        assert!((l.rhs_arg - 1.0).abs() < 1e-12);
        let ratio = sp_ratio(&run, 2.0).unwrap().value().unwrap();
        assert!(ratio >= 1.0);
        let ends: Vec<f64> = (0..2000).map(|p| run.leg2.y(p, 50) - run.leg1.y(p, 50)).collect();
        assert!(lp_norm(&ends, 1.0) <= lp_norm(&ends, 2.0) + 1e-15);
        let ui = ui_report(&run, 0.2).unwrap();
        assert!(ui.mean > 0.0 && ui.exited > 0.0);
    }

    #[test]
    fn tails_vanish_for_bounded_z() {
        let zero = registry::driver("zero", 1, 1, 1.0).unwrap();
        let run = coupled_solutions(&zero, &tanh(), LocalCorrelation::Constant { r: 0.5 }, &config(1000)).unwrap();
        for row in tail_estimate(&run.leg1, &[0.9, 0.5, 0.1]).unwrap() {
            assert_eq!(row.prob, 0.0);
        }
        assert!(tail_estimate(&run.leg1, &[0.0]).is_err());
    }

    #[test]
    fn threshold_rule_uses_first_leg() {
        let f = registry::driver("quadratic:gamma=1", 1, 1, 1.0).unwrap();
        let h = registry::terminal("tanh:scale=3").unwrap();
        let run = coupled_solutions(&f, &h, LocalCorrelation::Threshold { eps: 0.5 }, &config(500)).unwrap();
        for p in 0..500 {
            for i in 0..50 {
                let z = run.leg1.z(p, i)[0];
                assert_eq!(run.bm.rho(p, i), if z * z <= 2.0 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn sweep_and_csv() {
        let f = registry::driver("quadratic:gamma=1", 1, 1, 1.0).unwrap();
        let rules = [LocalCorrelation::Constant { r: 0.0 }, LocalCorrelation::Constant { r: 0.9 }, LocalCorrelation::Constant { r: 1.0 }];
        let rows = coupling_sweep(&f, &tanh(), &rules, &config(1000), 0.1).unwrap();
        assert!(rows[0].lhs > rows[1].lhs && rows[2].lhs == 0.0 && rows[2].degenerate);
        let mut out = Vec::new();
        write_coupling_csv(&mut out, &rows, &[("seed", "11".into())]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("r_or_eps,lhs,lhs_se,rhs_arg,ratio_p2,tail_prob,rule,seed\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
