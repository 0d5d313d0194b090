//! The operator `L^f` acting on test functions `phi(t, x, y)` and the
//! f-subharmonicity calculus built on it.
//!
//! With `z in R^{n x d}` (row `i` is `z^i`),
//!
//! ```text
//! L^f phi(t,x,y; z) = - sum_i phi_{y^i} f^i(t,y,z) + phi_t
//!                     + 1/2 sum_{i,i'} phi_{y^i y^i'} <z^i, z^i'>
//!                     + sum_{i,j} phi_{x_j y^i} z^i_j + 1/2 sum_j phi_{x_j x_j}
//! ```
//!
//! is the drift of `phi(t, B_t, Y_t)` when `Y` has dynamics
//! `dY = -f(t,Y,Z) dt + Z dB` and `Z_t = z`. A function is f-subharmonic on its
//! domain when `inf_z L^f phi >= 0` there.

mod ansatz;
mod builtin;
mod check;
mod majorize;

pub use ansatz::{
    ansatz_constant, construct_subharmonic, construct_x_free, AnsatzFunction, AnsatzRecord, BasePoint, ConstantChoice,
    ConstructOptions, XFreeAnsatz,
};
pub use builtin::{exp_test_function, ClosureTestFunction, ExpTestFunction, QuadraticTestFunction};
pub use check::{is_subharmonic, SubharmonicOptions, SubharmonicVerdict, ZRadius};
pub use majorize::{majorize_cone_quadratic, ConeQuadratic, Majorization, PureQuadratic};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::DriverSpec;
use crate::error::{Error, Result};

/// Value and partial derivatives of a test function at one point.
///
/// `yy` is `n x n` row-major, `xy[i * d + j] = phi_{x_j y^i}`, and `xx` holds
/// the diagonal `phi_{x_j x_j}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partials {
    pub value: f64,
    pub t: f64,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub yy: Vec<f64>,
    pub xy: Vec<f64>,
    pub xx: Vec<f64>,
}

/// Region of `(t, x, y)` space on which a test function is declared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Whole,
    /// Euclidean ball in `(t, x, y)`; `center = [t, x_1..x_d, y_1..y_n]`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Ball in `(t, y)`, unrestricted in `x`; `center = [t, y_1..y_n]`.
    Cylinder { center: Vec<f64>, radius: f64 },
    /// Coordinate box over `[t, x.., y..]`; bounds may be infinite.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn contains(&self, t: f64, x: &[f64], y: &[f64]) -> bool {
        match self {
            Domain::Whole => true,
            Domain::Ball { center, radius } => {
                let coords = std::iter::once(t).chain(x.iter().copied()).chain(y.iter().copied());
                let r2: f64 = coords.zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 <= radius * radius
            }
            Domain::Cylinder { center, radius } => {
                let coords = std::iter::once(t).chain(y.iter().copied());
                let r2: f64 = coords.zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 <= radius * radius
            }
            Domain::Box { lo, hi } => std::iter::once(t)
                .chain(x.iter().copied())
                .chain(y.iter().copied())
                .zip(lo.iter().zip(hi))
                .all(|(c, (l, h))| *l <= c && c <= *h),
        }
    }

    /// Deterministic sample of `count` points of the domain.
    ///
    /// Balls and cylinders get their center, the axis extremes and a mix of
    /// boundary and interior points; unbounded directions are sampled from
    /// `t in [0, horizon]` and `[-1, 1]` otherwise.
    pub fn sample(&self, n: usize, d: usize, horizon: f64, count: usize, seed: u64) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let split = |c: &[f64]| (c[0], c[1..1 + d].to_vec(), c[1 + d..].to_vec());
        let box_sample = |rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]| -> Vec<f64> {
            (0..1 + d + n)
                .map(|q| {
                    let (dl, dh) = if q == 0 { (0.0, horizon) } else { (-1.0, 1.0) };
                    let width = dh - dl;
                    let (l, h) = match (lo[q].is_finite(), hi[q].is_finite()) {
                        (true, true) => (lo[q], hi[q]),
                        (true, false) => (lo[q], lo[q] + width),
                        (false, true) => (hi[q] - width, hi[q]),
                        (false, false) => (dl, dh),
                    };
                    l + (h - l) * rng.random::<f64>()
                })
                .collect()
        };
        match self {
            Domain::Whole => {
                let lo = vec![f64::NEG_INFINITY; 1 + d + n];
                let hi = vec![f64::INFINITY; 1 + d + n];
                (0..count).map(|_| split(&box_sample(&mut rng, &lo, &hi))).collect()
            }
            Domain::Box { lo, hi } => (0..count).map(|_| split(&box_sample(&mut rng, lo, hi))).collect(),
            Domain::Ball { center, radius } => ball_points(center, *radius, count, &mut rng)
                .into_iter()
                .map(|c| split(&c))
                .collect(),
            Domain::Cylinder { center, radius } => ball_points(center, *radius, count, &mut rng)
                .into_iter()
                .map(|c| (c[0], vec![0.0; d], c[1..].to_vec()))
                .collect(),
        }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn ball_points(center: &[f64], radius: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let dim = center.len();
    let mut pts = vec![center.to_vec()];
    for q in 0..dim {
        for sgn in [-1.0, 1.0] {
            let mut p = center.to_vec();
            p[q] += sgn * radius;
            pts.push(p);
        }
    }
    let mut k = 0usize;
    while pts.len() < count.max(1) {
        let dir: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let rho = if k % 2 == 0 {
            radius
        } else {
            radius * rng.random::<f64>().powf(1.0 / dim as f64)
        };
        pts.push(center.iter().zip(&dir).map(|(c, v)| c + rho * v / norm).collect());
        k += 1;
    }
    pts.truncate(count.max(1));
    pts
}

/// A `C^{1,2,2}` function `phi(t, x, y)` with `x in R^d`, `y in R^n`.
///
/// Implementors without closed-form derivatives inherit central finite
/// differences with step `fd_step()`.
pub trait TestFunction: Send + Sync {
    fn n(&self) -> usize;
    fn d(&self) -> usize;
    fn value(&self, t: f64, x: &[f64], y: &[f64]) -> f64;
    fn domain(&self) -> &Domain;
    fn label(&self) -> String;

    fn partials(&self, t: f64, x: &[f64], y: &[f64]) -> Partials {
        finite_difference_partials(self, t, x, y, self.fd_step())
    }

    fn fd_step(&self) -> f64 {
        1e-4
    }

    fn has_analytic_partials(&self) -> bool {
        false
    }
}

/// Central differences of `phi`; coordinates are perturbed by `h (1 + |c|)`.
pub fn finite_difference_partials<F: TestFunction + ?Sized>(phi: &F, t: f64, x: &[f64], y: &[f64], h: f64) -> Partials {
    let (n, d) = (phi.n(), phi.d());
    let mut coords: Vec<f64> = std::iter::once(t).chain(x.iter().copied()).chain(y.iter().copied()).collect();
    let eval = |c: &[f64]| phi.value(c[0], &c[1..1 + d], &c[1 + d..]);
    let value = eval(&coords);
    let step: Vec<f64> = coords.iter().map(|c| h * (1.0 + c.abs())).collect();

    let first = |q: usize, c: &mut [f64]| {
        let orig = c[q];
        c[q] = orig + step[q];
        let p = eval(c);
        c[q] = orig - step[q];
        let m = eval(c);
        c[q] = orig;
        ((p - m) / (2.0 * step[q]), (p - 2.0 * value + m) / (step[q] * step[q]))
    };
    let mut grads = vec![0.0; coords.len()];
    let mut diag = vec![0.0; coords.len()];
    for q in 0..coords.len() {
        let (g, s) = first(q, &mut coords);
        grads[q] = g;
        diag[q] = s;
    }
    let mixed = |a: usize, b: usize, c: &mut [f64]| {
        let (oa, ob) = (c[a], c[b]);
        let corner = |sa: f64, sb: f64, c: &mut [f64]| {
            c[a] = oa + sa * step[a];
            c[b] = ob + sb * step[b];
            let v = eval(c);
            c[a] = oa;
            c[b] = ob;
            v
        };
        let v = corner(1.0, 1.0, c) - corner(1.0, -1.0, c) - corner(-1.0, 1.0, c) + corner(-1.0, -1.0, c);
        v / (4.0 * step[a] * step[b])
    };
    let yq = |i: usize| 1 + d + i;
    let xq = |j: usize| 1 + j;
    let mut yy = vec![0.0; n * n];
    for i in 0..n {
        yy[i * n + i] = diag[yq(i)];
        for k in i + 1..n {
            let v = mixed(yq(i), yq(k), &mut coords);
            yy[i * n + k] = v;
            yy[k * n + i] = v;
        }
    }
    let mut xy = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            xy[i * d + j] = mixed(xq(j), yq(i), &mut coords);
        }
    }
    Partials {
        value,
        t: grads[0],
        y: (0..n).map(|i| grads[yq(i)]).collect(),
        x: (0..d).map(|j| grads[xq(j)]).collect(),
        yy,
        xy,
        xx: (0..d).map(|j| diag[xq(j)]).collect(),
    }
}

/// `L^f phi` from precomputed partials; `scratch` must have length `n`.
pub fn lf_from_partials(driver: &DriverSpec, p: &Partials, t: f64, y: &[f64], z: &[f64], scratch: &mut [f64]) -> f64 {
    let (n, d) = (p.y.len(), p.x.len());
    driver.eval(t, y, z, scratch);
    let mut acc = p.t + 0.5 * p.xx.iter().sum::<f64>();
    for i in 0..n {
        acc -= p.y[i] * scratch[i];
        let zi = &z[i * d..(i + 1) * d];
        for k in 0..n {
            let c = p.yy[i * n + k];
            if c != 0.0 {
                let zk = &z[k * d..(k + 1) * d];
                acc += 0.5 * c * zi.iter().zip(zk).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        acc += p.xy[i * d..(i + 1) * d].iter().zip(zi).map(|(a, b)| a * b).sum::<f64>();
    }
    acc
}

fn check_dims(driver: &DriverSpec, phi: &dyn TestFunction) -> Result<()> {
    if driver.n() != phi.n() || driver.d() != phi.d() {
        return Err(Error::Dimension(format!(
            "driver `{}` is (n, d) = ({}, {}) but test function `{}` is ({}, {})",
            driver.label(),
            driver.n(),
            driver.d(),
            phi.label(),
            phi.n(),
            phi.d()
        )));
    }
    Ok(())
}

fn check_point(phi: &dyn TestFunction, x: &[f64], y: &[f64], z: Option<&[f64]>) -> Result<()> {
    if x.len() != phi.d() || y.len() != phi.n() || z.is_some_and(|z| z.len() != phi.n() * phi.d()) {
        return Err(Error::Dimension(format!(
            "point has |x| = {}, |y| = {}, expected d = {}, n = {}",
            x.len(),
            y.len(),
            phi.d(),
            phi.n()
        )));
    }
    Ok(())
}

/// `L^f phi(t, x, y; z)`; errors outside `dom phi`.
pub fn eval_lf(driver: &DriverSpec, phi: &dyn TestFunction, t: f64, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    check_dims(driver, phi)?;
    check_point(phi, x, y, Some(z))?;
    if !phi.domain().contains(t, x, y) {
        return Err(Error::OutsideDomain {
            t,
            x: x.to_vec(),
            y: y.to_vec(),
        });
    }
    let p = phi.partials(t, x, y);
    let mut scratch = vec![0.0; phi.n()];
    Ok(lf_from_partials(driver, &p, t, y, z, &mut scratch))
}

/// The `(d + 1) x (d + 1)` matrix of the quadratic form `z -> L^0 phi - phi_t`
/// for `n = 1`, together with its smallest eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct HMatrix {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

impl HMatrix {
    /// `1/2 <xi, H xi>` with `xi = (|z|, z / |z|)`.
    pub fn half_form(&self, z: &[f64]) -> f64 {
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut xi = Vec::with_capacity(z.len() + 1);
        xi.push(norm);
        xi.extend(z.iter().map(|v| if norm > 0.0 { v / norm } else { 0.0 }));
        let v = nalgebra::DVector::from_vec(xi);
        0.5 * v.dot(&(&self.matrix * &v))
    }
}

pub fn build_h(phi: &dyn TestFunction, t: f64, x: &[f64], y: &[f64]) -> Result<HMatrix> {
    if phi.n() != 1 {
        return Err(Error::Dimension(format!("the H matrix needs n = 1, `{}` has n = {}", phi.label(), phi.n())));
    }
    check_point(phi, x, y, None)?;
    let d = phi.d();
    let p = phi.partials(t, x, y);
    let laplacian: f64 = p.xx.iter().sum();
    let mut h = DMatrix::zeros(d + 1, d + 1);
    h[(0, 0)] = p.yy[0];
    for j in 0..d {
        h[(0, j + 1)] = p.xy[j];
        h[(j + 1, 0)] = p.xy[j];
        h[(j + 1, j + 1)] = laplacian;
    }
    let min_eigenvalue = SymmetricEigen::new(h.clone()).eigenvalues.min();
    Ok(HMatrix { matrix: h, min_eigenvalue })
}

/// Smallest eigenvalue of the symmetric `n x n` block `phi_yy`.
pub(crate) fn min_eigenvalue_yy(yy: &[f64], n: usize) -> f64 {
    if n == 1 {
        return yy[0];
    }
    SymmetricEigen::new(DMatrix::from_row_slice(n, n, yy)).eigenvalues.min()
}
