use std::sync::Arc;

use super::{Domain, Partials, TestFunction};
use crate::error::{Error, Result};

/// `c + a t + <p, y> + <q, x> + 1/2 y^T A y + sum_{i,j} B_ij y^i x_j + 1/2 sum_j c_j x_j^2`.
///
/// Builder setters panic when a coefficient slice has the wrong length.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTestFunction {
    n: usize,
    d: usize,
    constant: f64,
    t_coef: f64,
    y_lin: Vec<f64>,
    x_lin: Vec<f64>,
    yy: Vec<f64>,
    xy: Vec<f64>,
    xx: Vec<f64>,
    domain: Domain,
}

impl QuadraticTestFunction {
    pub fn new(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            constant: 0.0,
            t_coef: 0.0,
            y_lin: vec![0.0; n],
            x_lin: vec![0.0; d],
            yy: vec![0.0; n * n],
            xy: vec![0.0; n * d],
            xx: vec![0.0; d],
            domain: Domain::Whole,
        }
    }

    /// Symmetric `n x n` Hessian in `y`, row-major.
    pub fn with_yy(mut self, yy: &[f64]) -> Self {
        assert_eq!(yy.len(), self.n * self.n);
        self.yy = yy.to_vec();
        self
    }

    /// `xy[i * d + j]` multiplies `y^i x_j`.
    pub fn with_xy(mut self, xy: &[f64]) -> Self {
        assert_eq!(xy.len(), self.n * self.d);
        self.xy = xy.to_vec();
        self
    }

    pub fn with_xx(mut self, xx: &[f64]) -> Self {
        assert_eq!(xx.len(), self.d);
        self.xx = xx.to_vec();
        self
    }

    pub fn with_t(mut self, a: f64) -> Self {
        self.t_coef = a;
        self
    }

    pub fn with_linear(mut self, y: &[f64], x: &[f64]) -> Self {
        assert_eq!(y.len(), self.n);
        assert_eq!(x.len(), self.d);
        self.y_lin = y.to_vec();
        self.x_lin = x.to_vec();
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = c;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        (0..n)
            .map(|i| {
                self.y_lin[i]
                    + (0..n).map(|k| self.yy[i * n + k] * y[k]).sum::<f64>()
                    + (0..d).map(|j| self.xy[i * d + j] * x[j]).sum::<f64>()
            })
            .collect()
    }
}

impl TestFunction for QuadraticTestFunction {
    fn n(&self) -> usize {
        self.n
    }

    fn d(&self) -> usize {
        self.d
    }

    fn value(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        let (n, d) = (self.n, self.d);
        let mut v = self.constant + self.t_coef * t;
        for i in 0..n {
            v += self.y_lin[i] * y[i];
            for k in 0..n {
                v += 0.5 * self.yy[i * n + k] * y[i] * y[k];
            }
            for j in 0..d {
                v += self.xy[i * d + j] * y[i] * x[j];
            }
        }
        for j in 0..d {
            v += self.x_lin[j] * x[j] + 0.5 * self.xx[j] * x[j] * x[j];
        }
        v
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn label(&self) -> String {
        "quadratic".into()
    }

    fn partials(&self, t: f64, x: &[f64], y: &[f64]) -> Partials {
        let (n, d) = (self.n, self.d);
        Partials {
            value: self.value(t, x, y),
            t: self.t_coef,
            y: self.grad_y(x, y),
            x: (0..d)
                .map(|j| self.x_lin[j] + self.xx[j] * x[j] + (0..n).map(|i| self.xy[i * d + j] * y[i]).sum::<f64>())
                .collect(),
            yy: self.yy.clone(),
            xy: self.xy.clone(),
            xx: self.xx.clone(),
        }
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// `phi(x, y) = exp(sigma C1 y) + C2 |x|^2` on `|y| <= ybound` (`n = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTestFunction {
    sigma: f64,
    c1: f64,
    c2: f64,
    d: usize,
    ybound: f64,
    domain: Domain,
}

/// `C1 = 2M` and `C2 = C1 M (1 + ybound) e^{C1 ybound} / d`, which make
/// `L^f phi >= 0` on `|y| <= ybound` for every driver with constant `M`.
pub fn exp_test_function(m: f64, ybound: f64, sigma: f64, d: usize) -> Result<ExpTestFunction> {
    if !(m > 0.0 && ybound > 0.0) || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "exponential test function needs M > 0, ybound > 0, d >= 1 (got {m}, {ybound}, {d})"
        )));
    }
    if sigma != 1.0 && sigma != -1.0 {
        return Err(Error::InvalidParameter(format!("sign must be +1 or -1, got {sigma}")));
    }
    let c1 = 2.0 * m;
    let c2 = c1 * m * (1.0 + ybound) * (c1 * ybound).exp() / d as f64;
    let mut lo = vec![f64::NEG_INFINITY; d + 2];
    let mut hi = vec![f64::INFINITY; d + 2];
    lo[d + 1] = -ybound;
    hi[d + 1] = ybound;
    Ok(ExpTestFunction {
        sigma,
        c1,
        c2,
        d,
        ybound,
        domain: Domain::Box { lo, hi },
    })
}

impl ExpTestFunction {
    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn ybound(&self) -> f64 {
        self.ybound
    }
}

impl TestFunction for ExpTestFunction {
    fn n(&self) -> usize {
        1
    }

    fn d(&self) -> usize {
        self.d
    }

    fn value(&self, _t: f64, x: &[f64], y: &[f64]) -> f64 {
        (self.sigma * self.c1 * y[0]).exp() + self.c2 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn label(&self) -> String {
        format!("exp(sigma={},C1={},C2={})", self.sigma, self.c1, self.c2)
    }

    fn partials(&self, t: f64, x: &[f64], y: &[f64]) -> Partials {
        let e = (self.sigma * self.c1 * y[0]).exp();
        Partials {
            value: self.value(t, x, y),
            t: 0.0,
            y: vec![self.sigma * self.c1 * e],
            x: x.iter().map(|v| 2.0 * self.c2 * v).collect(),
            yy: vec![self.c1 * self.c1 * e],
            xy: vec![0.0; self.d],
            xx: vec![2.0 * self.c2; self.d],
        }
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

type PhiFn = dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync;

/// A test function given only by its values; partials come from finite differences.
#[derive(Clone)]
pub struct ClosureTestFunction {
    n: usize,
    d: usize,
    domain: Domain,
    label: String,
    step: f64,
    f: Arc<PhiFn>,
}

impl std::fmt::Debug for ClosureTestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosureTestFunction")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ClosureTestFunction {
    pub fn new(
        n: usize,
        d: usize,
        domain: Domain,
        label: impl Into<String>,
        f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            d,
            domain,
            label: label.into(),
            step: 1e-4,
            f: Arc::new(f),
        }
    }

    /// Relative finite-difference step (default `1e-4`).
    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

impl TestFunction for ClosureTestFunction {
    fn n(&self) -> usize {
        self.n
    }

    fn d(&self) -> usize {
        self.d
    }

    fn value(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        (self.f)(t, x, y)
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn fd_step(&self) -> f64 {
        self.step
    }
}
