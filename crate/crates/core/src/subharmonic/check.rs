use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lf_from_partials, min_eigenvalue_yy, TestFunction};
use crate::driver::{frobenius, project_ball_in_place, DriverSpec};

/// Radius of the `z`-ball searched numerically; outside it a quadratic
/// lower bound must certify `L^f phi >= margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZRadius {
    Fixed { radius: f64 },
    /// Per point, the smallest certifiable radius (at least `min`, at most `max`).
    Auto { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicOptions {
    /// Number of `(t, x, y)` points sampled from the domain.
    pub budget: usize,
    pub z_radius: ZRadius,
    pub margin: f64,
    pub seed: u64,
    /// Horizon used to sample unbounded time directions.
    pub horizon: f64,
}

impl Default for SubharmonicOptions {
    fn default() -> Self {
        Self {
            budget: 64,
            z_radius: ZRadius::Auto { min: 4.0, max: 1e4 },
            margin: 0.0,
            seed: 0,
            horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SubharmonicVerdict {
    Pass {
        points: usize,
        min_value: f64,
        max_z_radius: f64,
    },
    Fail {
        t: f64,
        x: Vec<f64>,
        y: Vec<f64>,
        z: Vec<f64>,
        value: f64,
    },
    Inconclusive {
        points: usize,
        min_value: f64,
        reason: String,
    },
}

impl SubharmonicVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, SubharmonicVerdict::Pass { .. })
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, SubharmonicVerdict::Fail { .. })
    }
}

struct PointOutcome {
    value: f64,
    z: Vec<f64>,
    certified: bool,
    radius: f64,
}

/// Largest root of `a r^2 - b r - c`, or 0 when the quadratic has none.
fn tail_root(a: f64, b: f64, c: f64) -> f64 {
    let disc = b * b + 4.0 * a * c;
    if disc <= 0.0 {
        0.0
    } else {
        ((b + disc.sqrt()) / (2.0 * a)).max(0.0)
    }
}

/// Samples `dom phi` and minimizes `L^f phi` over `z` at each point.
///
/// At every point the lower bound `L^f phi >= a|z|^2 - b|z| - c`, with
/// `a = lambda_min(phi_yy)/2 - |phi_y| c_2`, `b = |phi_xy|`,
/// `c = |phi_y| (c_0 + c_1 |y|) - phi_t - tr(phi_xx)/2` from the driver's growth
/// envelope `|f| <= c_0 + c_1 |y| + c_2 |z|^2`, certifies the region
/// outside the searched ball. A pass needs every minimum `>= margin` and every
/// tail certified; a single minimum below `-margin` is a failure.
pub fn is_subharmonic(driver: &DriverSpec, phi: &dyn TestFunction, opts: &SubharmonicOptions) -> SubharmonicVerdict {
    let (n, d) = (phi.n(), phi.d());
    let points = phi.domain().sample(n, d, opts.horizon, opts.budget.max(1), opts.seed);
    let env = driver.envelope();
    let margin = opts.margin;
    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .enumerate()
        .map(|(idx, (t, x, y))| {
            let p = phi.partials(*t, x, y);
            let gy = frobenius(&p.y);
            let a = 0.5 * min_eigenvalue_yy(&p.yy, n) - gy * env.z_sq;
            let b = frobenius(&p.xy);
            let c = gy * env.bound(frobenius(y), 0.0) - p.t - 0.5 * p.xx.iter().sum::<f64>();
            let root = if a > 0.0 { tail_root(a, b, c + margin) } else { f64::INFINITY };
            let (radius, certified) = match opts.z_radius {
                ZRadius::Fixed { radius } => (radius, root <= radius),
                ZRadius::Auto { min, max } => {
                    let want = min.max(1.05 * root + 1e-9);
                    if want <= max {
                        (want, true)
                    } else {
                        (min, false)
                    }
                }
            };
            let mut scratch = vec![0.0; n];
            let lf = |z: &[f64]| lf_from_partials(driver, &p, *t, y, z, &mut scratch);
            let seed = opts.seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let (value, z) = minimize_over_ball(lf, n * d, radius, seed);
            PointOutcome {
                value,
                z,
                certified,
                radius,
            }
        })
        .collect();

    let min_value = outcomes.iter().map(|o| o.value).fold(f64::INFINITY, f64::min);
    if let Some((i, o)) = outcomes.iter().enumerate().find(|(_, o)| o.value < -margin) {
        let (t, x, y) = &points[i];
        return SubharmonicVerdict::Fail {
            t: *t,
            x: x.clone(),
            y: y.clone(),
            z: o.z.clone(),
            value: o.value,
        };
    }
    let uncertified = outcomes.iter().filter(|o| !o.certified).count();
    let below = outcomes.iter().filter(|o| o.value < margin).count();
    if uncertified == 0 && below == 0 {
        SubharmonicVerdict::Pass {
            points: outcomes.len(),
            min_value,
            max_z_radius: outcomes.iter().map(|o| o.radius).fold(0.0, f64::max),
        }
    } else {
        let mut reason = Vec::new();
        if uncertified > 0 {
            reason.push(format!("z-tail bound not certified at {uncertified} points"));
        }
        if below > 0 {
            reason.push(format!("minimum within the margin band at {below} points"));
        }
        SubharmonicVerdict::Inconclusive {
            points: outcomes.len(),
            min_value,
            reason: reason.join("; "),
        }
    }
}

/// Coarse search over `|z| <= radius` followed by local refinement from the
/// three best candidates. Ties on the grid go to the later point.
fn minimize_over_ball(mut f: impl FnMut(&[f64]) -> f64, dim: usize, radius: f64, seed: u64) -> (f64, Vec<f64>) {
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut push = |f: &mut dyn FnMut(&[f64]) -> f64, z: Vec<f64>| {
        let v = f(&z);
        candidates.push((v, z));
    };
    let spacing;
    match dim {
        1 => {
            spacing = 2.0 * radius / 400.0;
            for k in 0..=400 {
                push(&mut f, vec![-radius + 2.0 * radius * k as f64 / 400.0]);
            }
        }
        2 => {
            spacing = 2.0 * radius / 60.0;
            for a in 0..=60 {
                for b in 0..=60 {
                    let z = vec![-radius + 2.0 * radius * a as f64 / 60.0, -radius + 2.0 * radius * b as f64 / 60.0];
                    if z[0] * z[0] + z[1] * z[1] <= radius * radius * (1.0 + 1e-12) {
                        push(&mut f, z);
                    }
                }
            }
        }
        _ => {
            spacing = radius / 10.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            push(&mut f, vec![0.0; dim]);
            for _ in 0..2000 {
                let mut dir: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let norm = frobenius(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                dir.iter_mut().for_each(|v| *v *= r / norm);
                push(&mut f, dir);
            }
        }
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| candidates[i].0.total_cmp(&candidates[j].0).then(j.cmp(&i)));
    let mut best = candidates[order[0]].clone();
    for &start in order.iter().take(3) {
        let refined = compass_search(&mut f, candidates[start].1.clone(), candidates[start].0, spacing, radius);
        if refined.0 < best.0 {
            best = refined;
        }
    }
    best
}

fn compass_search(f: &mut impl FnMut(&[f64]) -> f64, mut z: Vec<f64>, mut value: f64, mut step: f64, radius: f64) -> (f64, Vec<f64>) {
    let floor = 1e-10 * (1.0 + radius);
    let mut trial = z.clone();
    for _ in 0..400 {
        if step < floor {
            break;
        }
        let mut improved = false;
        for q in 0..z.len() {
            for sgn in [1.0, -1.0] {
                trial.copy_from_slice(&z);
                trial[q] += sgn * step;
                project_ball_in_place(&mut trial, radius);
                let v = f(&trial);
                if v < value {
                    value = v;
                    z.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (value, z)
}
