//! Drift estimation along sampled paths, the f-martingale test, BSDE
//! residuals and BMO estimates.
//!
//! A process `Y` solves the equation iff `phi(t, B_t, Y_t)` is a local
//! submartingale inside `dom phi` for every f-subharmonic `phi`. The test here
//! measures the empirical drift of `phi(t, B, Y)` on the window between a
//! path's first entry into `dom phi` and its next exit, and flags `phi` when the
//! pooled drift is more than four standard errors below zero. Passing only
//! means no violation was found by the family that was tried.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::DriverSpec;
use crate::error::{Error, Result};
use crate::paths::{ItoProcess, PathEnsemble, TimeGrid};
use crate::report::{fmt_cell, fmt_f64};
use crate::subharmonic::{construct_subharmonic, construct_x_free, BasePoint, ConstructOptions, SubharmonicOptions, TestFunction};

/// Paths per work unit; fixed so that reductions do not depend on the pool size.
const CHUNK: usize = 512;

/// Minimum number of surviving paths for a per-time estimate to be usable.
pub const MIN_SURVIVORS: usize = 30;

/// Increments `entry..exit` of a path are inside the stopping window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub entry: usize,
    pub exit: usize,
}

/// Drift per unit time pooled over all windows (occupation-weighted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PooledDrift {
    pub mean: f64,
    pub se: f64,
    /// Total time spent inside the windows, summed over paths.
    pub occupation: f64,
    pub paths_entered: usize,
    pub usable: bool,
}

impl PooledDrift {
    /// `mean / se`, or NaN when not usable.
    pub fn z_score(&self) -> f64 {
        if self.usable && self.se > 0.0 {
            self.mean / self.se
        } else if self.usable && self.mean < 0.0 {
            f64::NEG_INFINITY
        } else if self.usable {
            f64::INFINITY
        } else {
            f64::NAN
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub times: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub n_surviving: Vec<usize>,
    /// At least [`MIN_SURVIVORS`] paths contributed at that time.
    pub usable: Vec<bool>,
    pub pooled: PooledDrift,
}

#[derive(Clone)]
struct Accumulator {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    count: Vec<usize>,
    /// Per-path `(sum of increments, time inside)`.
    per_path: Vec<(f64, f64)>,
}

impl Accumulator {
    fn new(steps: usize) -> Self {
        Self {
            sum: vec![0.0; steps],
            sumsq: vec![0.0; steps],
            count: vec![0; steps],
            per_path: Vec::new(),
        }
    }

    fn merge(&mut self, other: Accumulator) {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sumsq[i] += other.sumsq[i];
            self.count[i] += other.count[i];
        }
        self.per_path.extend(other.per_path);
    }

    fn finish(self, grid: &TimeGrid) -> DriftEstimate {
        let steps = grid.steps();
        let mut mu_hat = vec![f64::NAN; steps];
        let mut se = vec![f64::NAN; steps];
        for i in 0..steps {
            let c = self.count[i];
            if c > 0 {
                let mean = self.sum[i] / c as f64;
                mu_hat[i] = mean;
                if c > 1 {
                    let var = ((self.sumsq[i] - c as f64 * mean * mean) / (c - 1) as f64).max(0.0);
                    se[i] = (var / c as f64).sqrt();
                }
            }
        }
        let usable = self.count.iter().map(|c| *c >= MIN_SURVIVORS).collect();
        DriftEstimate {
            times: (0..steps).map(|i| grid.time(i)).collect(),
            mu_hat,
            se,
            n_surviving: self.count,
            usable,
            pooled: pooled_ratio(&self.per_path),
        }
    }
}

/// Ratio estimator `sum D / sum O` with a delta-method standard error; paths
/// that never enter contribute zeros.
fn pooled_ratio(per_path: &[(f64, f64)]) -> PooledDrift {
    let n = per_path.len() as f64;
    let paths_entered = per_path.iter().filter(|(_, o)| *o > 0.0).count();
    let occupation: f64 = per_path.iter().map(|(_, o)| o).sum();
    if paths_entered < MIN_SURVIVORS || occupation <= 0.0 {
        return PooledDrift {
            mean: f64::NAN,
            se: f64::NAN,
            occupation,
            paths_entered,
            usable: false,
        };
    }
    let total: f64 = per_path.iter().map(|(d, _)| d).sum();
    let ratio = total / occupation;
    let o_bar = occupation / n;
    let resid_var = per_path.iter().map(|(d, o)| (d - ratio * o).powi(2)).sum::<f64>() / (n - 1.0);
    PooledDrift {
        mean: ratio,
        se: (resid_var / n).sqrt() / o_bar,
        occupation,
        paths_entered,
        usable: true,
    }
}

fn record_window(acc: &mut Accumulator, values: impl Fn(usize) -> f64, w: Window, dt: f64) {
    let mut prev = values(w.entry);
    let start = prev;
    for i in w.entry..w.exit {
        let next = values(i + 1);
        let incr = (next - prev) / dt;
        acc.sum[i] += incr;
        acc.sumsq[i] += incr * incr;
        acc.count[i] += 1;
        prev = next;
    }
    acc.per_path.push((prev - start, (w.exit - w.entry) as f64 * dt));
}

/// Per-time mean of `(Phi_{i+1} - Phi_i) / dt` over paths whose window
/// contains increment `i`, plus the pooled drift.
///
/// `values` is `[path][step]` with `m + 1` entries per path; `None` windows
/// mark paths that never enter.
pub fn estimate_drift(values: &[f64], windows: &[Option<Window>], grid: &TimeGrid) -> Result<DriftEstimate> {
    let steps = grid.steps();
    if values.len() != windows.len() * (steps + 1) {
        return Err(Error::Dimension(format!(
            "{} values for {} paths of {} points",
            values.len(),
            windows.len(),
            steps + 1
        )));
    }
    if let Some(w) = windows.iter().flatten().find(|w| w.entry > w.exit || w.exit > steps) {
        return Err(Error::InvalidParameter(format!("window {w:?} is not within 0..={steps}")));
    }
    let dt = grid.dt();
    let acc = (0..windows.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Accumulator::new(steps);
            for &p in chunk {
                let row = &values[p * (steps + 1)..(p + 1) * (steps + 1)];
                match windows[p] {
                    Some(w) => record_window(&mut acc, |i| row[i], w, dt),
                    None => acc.per_path.push((0.0, 0.0)),
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Accumulator::new(steps), |mut a, b| {
            a.merge(b);
            a
        });
    Ok(acc.finish(grid))
}

/// Drift of `phi(t, B, Y)` along `candidate`, stopped at the first exit from `dom phi`.
pub fn drift_of(phi: &dyn TestFunction, candidate: &ItoProcess) -> DriftEstimate {
    let grid = *candidate.grid();
    let steps = grid.steps();
    let dt = grid.dt();
    let ens = candidate.ensemble();
    let dom = phi.domain();
    let paths: Vec<usize> = (0..candidate.paths()).collect();
    paths
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Accumulator::new(steps);
            for &p in chunk {
                let inside = |i: usize| dom.contains(grid.time(i), ens.at(p, i), &[candidate.y(p, i)]);
                let entry = (0..steps).find(|&i| inside(i));
                match entry {
                    Some(entry) => {
                        let exit = (entry + 1..=steps).find(|&i| !inside(i)).unwrap_or(steps);
                        let value = |i: usize| phi.value(grid.time(i), ens.at(p, i), &[candidate.y(p, i)]);
                        record_window(&mut acc, value, Window { entry, exit }, dt);
                    }
                    None => acc.per_path.push((0.0, 0.0)),
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Accumulator::new(steps), |mut a, b| {
            a.merge(b);
            a
        })
        .finish(&grid)
}

/// Which constructor builds the automatic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// The `x`-dependent Ansatz functions.
    Ansatz,
    /// Functions of `(t, y)` only.
    XFree,
}

/// Test functions built at base points drawn from the candidate's visited
/// region, with both signs at every point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoFamily {
    pub points: usize,
    pub eps: f64,
    pub r_y: f64,
    pub kind: FamilyKind,
    /// Base times are drawn from `[lo T, hi T]`.
    pub time_window: (f64, f64),
    pub seed: u64,
    pub construct: ConstructOptions,
}

impl Default for AutoFamily {
    fn default() -> Self {
        Self {
            points: 20,
            eps: 1.0,
            r_y: 0.25,
            kind: FamilyKind::Ansatz,
            time_window: (0.1, 0.9),
            seed: 0,
            construct: ConstructOptions::default(),
        }
    }
}

pub enum TestFamily {
    Explicit(Vec<Arc<dyn TestFunction>>),
    Auto(AutoFamily),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiReport {
    pub phi_id: usize,
    pub label: String,
    /// Parameters of constructed functions.
    pub parameters: Option<serde_json::Value>,
    pub pooled: PooledDrift,
    pub z_score: f64,
    pub flagged: bool,
    #[serde(skip)]
    pub drift: DriftEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub pass: bool,
    pub threshold_se: f64,
    pub flagged: Vec<usize>,
    pub functions: Vec<PhiReport>,
    pub construction_failures: Vec<String>,
    pub caveat: &'static str,
}

/// Flag threshold in standard errors.
pub const THRESHOLD_SE: f64 = 4.0;

fn build_auto_family(driver: &DriverSpec, candidate: &ItoProcess, auto: &AutoFamily) -> Result<(Vec<Arc<dyn TestFunction>>, Vec<serde_json::Value>, Vec<String>)> {
    if !(auto.eps > 0.0 && auto.r_y > 0.0) || auto.points == 0 {
        return Err(Error::InvalidParameter("automatic family needs points >= 1, eps > 0, r_y > 0".into()));
    }
    let grid = candidate.grid();
    let steps = grid.steps();
    let lo = ((auto.time_window.0 * steps as f64).ceil() as usize).min(steps);
    let hi = ((auto.time_window.1 * steps as f64).floor() as usize).clamp(lo, steps);
    let mut rng = ChaCha8Rng::seed_from_u64(auto.seed);
    let opts = ConstructOptions {
        check: SubharmonicOptions {
            horizon: grid.horizon(),
            ..auto.construct.check
        },
        ..auto.construct
    };
    let mut funcs: Vec<Arc<dyn TestFunction>> = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for _ in 0..auto.points {
        let p = rng.random_range(0..candidate.paths());
        let i = rng.random_range(lo..=hi);
        let base = BasePoint {
            t: grid.time(i),
            x: candidate.ensemble().at(p, i).to_vec(),
            y: vec![candidate.y(p, i)],
            z: candidate.z(p, i).to_vec(),
        };
        for sign in [1.0, -1.0] {
            let built: Result<(Arc<dyn TestFunction>, serde_json::Value)> = match auto.kind {
                FamilyKind::Ansatz => construct_subharmonic(driver, &base, 0, sign, auto.eps, auto.r_y, &opts).map(|phi| {
                    let rec = serde_json::to_value(phi.record()).unwrap_or_default();
                    (Arc::new(phi) as Arc<dyn TestFunction>, rec)
                }),
                FamilyKind::XFree => construct_x_free(driver, &base, sign, auto.eps, auto.r_y, &opts).map(|phi| {
                    let rec = serde_json::to_value(&phi).unwrap_or_default();
                    (Arc::new(phi) as Arc<dyn TestFunction>, rec)
                }),
            };
            match built {
                Ok((phi, rec)) => {
                    funcs.push(phi);
                    records.push(rec);
                }
                Err(e) => failures.push(format!("base (t = {}, path {p}), sign {sign}: {e}", base.t)),
            }
        }
    }
    Ok((funcs, records, failures))
}

/// Runs every test function of `family` against `candidate`.
pub fn f_martingale_test(driver: &DriverSpec, candidate: &ItoProcess, family: &TestFamily) -> Result<MartingaleReport> {
    if driver.n() != 1 || driver.d() != candidate.dim() {
        return Err(Error::Dimension(format!(
            "candidate is scalar with d = {}, driver `{}` has (n, d) = ({}, {})",
            candidate.dim(),
            driver.label(),
            driver.n(),
            driver.d()
        )));
    }
    let (funcs, records, construction_failures) = match family {
        TestFamily::Explicit(list) => (list.clone(), vec![serde_json::Value::Null; list.len()], Vec::new()),
        TestFamily::Auto(auto) => build_auto_family(driver, candidate, auto)?,
    };
    if funcs.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut functions = Vec::with_capacity(funcs.len());
    let mut flagged = Vec::new();
    for (id, (phi, rec)) in funcs.iter().zip(records).enumerate() {
        let drift = drift_of(phi.as_ref(), candidate);
        let z = drift.pooled.z_score();
        let is_flagged = drift.pooled.usable && z < -THRESHOLD_SE;
        if is_flagged {
            flagged.push(id);
        }
        functions.push(PhiReport {
            phi_id: id,
            label: phi.label(),
            parameters: (!rec.is_null()).then_some(rec),
            pooled: drift.pooled,
            z_score: z,
            flagged: is_flagged,
            drift,
        });
    }
    Ok(MartingaleReport {
        pass: flagged.is_empty(),
        threshold_se: THRESHOLD_SE,
        flagged,
        functions,
        construction_failures,
        caveat: "a pass means no violation was found by this finite family",
    })
}

/// Writes `t,mu_hat,se,n_surviving,phi_id` rows for every function.
pub fn write_drift_csv<W: Write>(mut w: W, reports: &[PhiReport]) -> std::io::Result<()> {
    writeln!(w, "t,mu_hat,se,n_surviving,phi_id")?;
    for r in reports {
        let d = &r.drift;
        for i in 0..d.times.len() {
            if d.n_surviving[i] == 0 {
                continue;
            }
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(d.times[i]),
                fmt_cell(d.mu_hat[i]),
                fmt_cell(d.se[i]),
                d.n_surviving[i],
                r.phi_id
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    /// `numerator / denominator`.
    pub residual: f64,
    /// Mean of `|dY + f dt - Z dB|^2` over `(path, step)`.
    pub numerator: f64,
    /// Mean of `|dY|^2`.
    pub denominator: f64,
}

/// Normalized one-step defect of `(Y, Z)` in the equation `dY = -f dt + Z dB`.
pub fn bsde_residual(driver: &DriverSpec, ip: &ItoProcess) -> Result<Residual> {
    if driver.n() != 1 || driver.d() != ip.dim() {
        return Err(Error::Dimension(format!(
            "residual needs a scalar driver with d = {}, got (n, d) = ({}, {})",
            ip.dim(),
            driver.n(),
            driver.d()
        )));
    }
    let grid = *ip.grid();
    let steps = grid.steps();
    let dt = grid.dt();
    let ens = ip.ensemble();
    let per_path: Vec<(f64, f64)> = (0..ip.paths())
        .into_par_iter()
        .map(|p| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..steps {
                let dy = ip.y(p, i + 1) - ip.y(p, i);
                let z = ip.z(p, i);
                let zdb: f64 = z.iter().enumerate().map(|(j, zj)| zj * ens.increment(p, i, j)).sum();
                let r = dy + driver.eval_scalar(grid.time(i), ip.y(p, i), z) * dt - zdb;
                num += r * r;
                den += dy * dy;
            }
            (num, den)
        })
        .collect();
    let cells = (ip.paths() * steps) as f64;
    let numerator = per_path.iter().map(|v| v.0).sum::<f64>() / cells;
    let denominator = per_path.iter().map(|v| v.1).sum::<f64>() / cells;
    let residual = if numerator == 0.0 {
        0.0
    } else if denominator > 0.0 {
        numerator / denominator
    } else {
        f64::INFINITY
    };
    Ok(Residual {
        residual,
        numerator,
        denominator,
    })
}

/// Bins on the first Brownian coordinate for conditional expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub bins: usize,
    /// Bins cover `[-w, w]` (default `4 sqrt(T)`); the outer bins extend to infinity.
    pub half_width: Option<f64>,
    /// Cells with fewer paths are excluded.
    pub min_count: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            bins: 20,
            half_width: None,
            min_count: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoEstimate {
    /// `max over bins` of the binned conditional expectation, per time.
    pub per_time: Vec<f64>,
    pub t0_value: f64,
    pub estimate: f64,
    pub excluded_cells: usize,
    pub bins: BinSpec,
}

/// `sup_{t, bin} mean over the bin of sum_{s >= t} |Z_s|^2 dt`, the binned
/// surrogate for `sup_t || E[int_t^T |Z|^2 ds | F_t] ||_inf`.
pub fn bmo_estimate(ip: &ItoProcess, bins: &BinSpec) -> Result<BmoEstimate> {
    if bins.bins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    let grid = *ip.grid();
    let steps = grid.steps();
    let dt = grid.dt();
    let w = bins.half_width.unwrap_or(4.0 * grid.horizon().sqrt());
    if !(w > 0.0) {
        return Err(Error::InvalidParameter(format!("bin half-width {w} must be positive")));
    }
    let nb = bins.bins;
    let cells = (steps + 1) * nb;
    let bin_of = |x: f64| -> usize {
        let pos = ((x + w) / (2.0 * w) * nb as f64).floor();
        pos.clamp(0.0, (nb - 1) as f64) as usize
    };
    let ens = ip.ensemble();
    let paths: Vec<usize> = (0..ip.paths()).collect();
    let (sum, count) = paths
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sum = vec![0.0; cells];
            let mut count = vec![0usize; cells];
            for &p in chunk {
                let mut tail = 0.0;
                for i in (0..=steps).rev() {
                    if i < steps {
                        tail += ip.z(p, i).iter().map(|v| v * v).sum::<f64>() * dt;
                    }
                    let c = i * nb + bin_of(ens.at(p, i)[0]);
                    sum[c] += tail;
                    count[c] += 1;
                }
            }
            (sum, count)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((vec![0.0; cells], vec![0usize; cells]), |(mut s, mut c), (s2, c2)| {
            for q in 0..cells {
                s[q] += s2[q];
                c[q] += c2[q];
            }
            (s, c)
        });
    let mut per_time = vec![0.0; steps + 1];
    let mut excluded_cells = 0;
    for i in 0..=steps {
        let mut best = f64::NAN;
        for b in 0..nb {
            let c = i * nb + b;
            if count[c] == 0 {
                continue;
            }
            if count[c] < bins.min_count {
                excluded_cells += 1;
                continue;
            }
            let v = sum[c] / count[c] as f64;
            best = if best.is_nan() { v } else { best.max(v) };
        }
        per_time[i] = best;
    }
    let t0_value = per_time[0];
    let estimate = per_time.iter().copied().filter(|v| !v.is_nan()).fold(0.0, f64::max);
    Ok(BmoEstimate {
        per_time,
        t0_value,
        estimate,
        excluded_cells,
        bins: *bins,
    })
}

/// The pair `Y = t + B` (a solution for `f = -z`) and `Y' = t + int sign(B) dB`
/// (same law, not a solution), both with unit drift, for `d = 1`.
pub fn unit_drift_candidates(ensemble: &Arc<PathEnsemble>) -> Result<(ItoProcess, ItoProcess)> {
    if ensemble.dim() != 1 {
        return Err(Error::Dimension("unit-drift candidates need d = 1".into()));
    }
    let grid = *ensemble.grid();
    let steps = grid.steps();
    let cells = ensemble.paths() * (steps + 1);
    let mut y = Vec::with_capacity(cells);
    let mut y2 = Vec::with_capacity(cells);
    let mut z2 = Vec::with_capacity(cells);
    for p in 0..ensemble.paths() {
        let mut acc = 0.0;
        for i in 0..=steps {
            let b = ensemble.at1(p, i);
            let h = if b >= 0.0 { 1.0 } else { -1.0 };
            y.push(grid.time(i) + b);
            y2.push(grid.time(i) + acc);
            z2.push(h);
            if i < steps {
                acc += h * ensemble.increment(p, i, 0);
            }
        }
    }
    let terminal = |v: &[f64]| (0..ensemble.paths()).map(|p| v[p * (steps + 1) + steps]).collect::<Vec<_>>();
    let xi = terminal(&y);
    let xi2 = terminal(&y2);
    let solution = ItoProcess::new(Arc::clone(ensemble), y, vec![1.0; cells], vec![-1.0; cells], xi)?;
    let impostor = ItoProcess::new(Arc::clone(ensemble), y2, z2, vec![-1.0; cells], xi2)?;
    Ok((solution, impostor))
}
