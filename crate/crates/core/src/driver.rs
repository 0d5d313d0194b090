//! Drivers `f(t, y, z)` of the backward equation `dY = -f(t, Y, Z) dt + Z . dB`.
//!
//! A driver maps `(t, y, z)` with `y in R^n` and `z in R^{n x d}` (row-major,
//! row `i` is `z^i`) to `R^n`. Every driver carries a growth/regularity
//! constant `M`:
//!
//! ```text
//! |f(t,y',z') - f(t,y,z)| <= M|y'-y| + M(1 + |y| + |y'| + |z| + |z'|)|z'-z|
//! |f(t,y,z)|              <= M(1 + |y| + |z|^2)
//! ```
//!
//! Norms on matrices are Frobenius norms throughout.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Pure evaluator for a driver. `out` has length `n`, `z` has length `n * d`.
pub trait DriverFn: Send + Sync {
    fn eval(&self, t: f64, y: &[f64], z: &[f64], out: &mut [f64]);
}

impl<F> DriverFn for F
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn eval(&self, t: f64, y: &[f64], z: &[f64], out: &mut [f64]) {
        self(t, y, z, out)
    }
}

/// A driver together with its dimensions, horizon and constant `M`.
#[derive(Clone)]
pub struct DriverSpec {
    n: usize,
    d: usize,
    horizon: f64,
    growth: f64,
    lipschitz_y: Option<f64>,
    label: String,
    truncation: Option<f64>,
    envelope: Option<GrowthEnvelope>,
    f: Arc<dyn DriverFn>,
}

/// A declared bound `|f(t,y,z)| <= constant + y |y| + z_sq |z|^2`, sharper
/// than the one implied by `M` alone. Validation checks it alongside `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthEnvelope {
    pub constant: f64,
    pub y: f64,
    pub z_sq: f64,
}

impl GrowthEnvelope {
    #[inline]
    pub fn bound(&self, y_norm: f64, z_norm: f64) -> f64 {
        self.constant + self.y * y_norm + self.z_sq * z_norm * z_norm
    }
}

impl fmt::Debug for DriverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriverSpec")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("horizon", &self.horizon)
            .field("M", &self.growth)
            .field("truncation", &self.truncation)
            .finish()
    }
}

impl DriverSpec {
    pub fn new(
        n: usize,
        d: usize,
        horizon: f64,
        growth: f64,
        label: impl Into<String>,
        f: impl DriverFn + 'static,
    ) -> Result<Self> {
        Self::from_arc(n, d, horizon, growth, label, Arc::new(f))
    }

    pub fn from_arc(
        n: usize,
        d: usize,
        horizon: f64,
        growth: f64,
        label: impl Into<String>,
        f: Arc<dyn DriverFn>,
    ) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter(format!(
                "driver dimensions must be positive (n = {n}, d = {d})"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be positive")));
        }
        if !(growth > 0.0 && growth.is_finite()) {
            return Err(Error::InvalidParameter(format!("constant M = {growth} must be positive")));
        }
        Ok(Self {
            n,
            d,
            horizon,
            growth,
            lipschitz_y: None,
            label: label.into(),
            truncation: None,
            envelope: None,
            f,
        })
    }

    /// Declares a growth envelope; its coefficients must be nonnegative.
    pub fn with_envelope(mut self, envelope: GrowthEnvelope) -> Result<Self> {
        let GrowthEnvelope { constant, y, z_sq } = envelope;
        if ![constant, y, z_sq].iter().all(|c| *c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("growth envelope {envelope:?} needs finite nonnegative coefficients")));
        }
        self.envelope = Some(envelope);
        Ok(self)
    }

    /// The declared envelope, or `M (1 + |y| + |z|^2)`.
    pub fn envelope(&self) -> GrowthEnvelope {
        self.envelope.unwrap_or(GrowthEnvelope {
            constant: self.growth,
            y: self.growth,
            z_sq: self.growth,
        })
    }

    /// Uses a separate Lipschitz constant in `y` for the regularity check.
    pub fn with_lipschitz_y(mut self, m_y: f64) -> Result<Self> {
        if !(m_y >= 0.0 && m_y.is_finite()) {
            return Err(Error::InvalidParameter(format!("y-Lipschitz constant {m_y} must be nonnegative")));
        }
        self.lipschitz_y = Some(m_y);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// The constant `M`.
    pub fn growth_constant(&self) -> f64 {
        self.growth
    }

    /// Constant multiplying `|y' - y|` in the regularity bound.
    pub fn lipschitz_y(&self) -> f64 {
        self.lipschitz_y.unwrap_or(self.growth)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Truncation radius `k` if this driver was produced by [`truncate`].
    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    pub fn eval(&self, t: f64, y: &[f64], z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n);
        debug_assert_eq!(z.len(), self.n * self.d);
        debug_assert_eq!(out.len(), self.n);
        self.f.eval(t, y, z, out);
    }

    pub fn eval_vec(&self, t: f64, y: &[f64], z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.eval(t, y, z, &mut out);
        out
    }

    /// Scalar evaluation for `n = 1`; `z` has length `d`.
    #[inline]
    pub fn eval_scalar(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        debug_assert_eq!(self.n, 1);
        let mut out = [0.0];
        self.f.eval(t, &[y], z, &mut out);
        out[0]
    }

    /// `z`-Lipschitz constant on `|y| <= ybound` when the driver is truncated.
    pub fn z_lipschitz(&self, ybound: f64) -> Option<f64> {
        self.truncation
            .map(|k| self.growth * (1.0 + 2.0 * ybound + 2.0 * k))
    }

    pub(crate) fn evaluator(&self) -> Arc<dyn DriverFn> {
        Arc::clone(&self.f)
    }
}

/// Frobenius norm.
pub fn frobenius(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Orthogonal projection onto the closed Frobenius ball of radius `radius`.
pub fn project_ball(z: &[f64], radius: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

pub fn project_ball_in_place(z: &mut [f64], radius: f64) {
    let norm = frobenius(z);
    if norm > radius {
        let scale = radius / norm;
        z.iter_mut().for_each(|v| *v *= scale);
    }
}

/// `f^k(t, y, z) = f(t, y, pi_k(z))`.
pub fn truncate(spec: &DriverSpec, k: f64) -> Result<DriverSpec> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level k = {k} must be positive")));
    }
    let inner = spec.evaluator();
    let f = move |t: f64, y: &[f64], z: &[f64], out: &mut [f64]| {
        let mut zk: SmallVec<[f64; 8]> = SmallVec::from_slice(z);
        project_ball_in_place(&mut zk, k);
        inner.eval(t, y, &zk, out);
    };
    // A truncated driver truncated again keeps the smaller radius.
    let radius = spec.truncation.map_or(k, |r| r.min(k));
    Ok(DriverSpec {
        n: spec.n,
        d: spec.d,
        horizon: spec.horizon,
        growth: spec.growth,
        lipschitz_y: spec.lipschitz_y,
        label: format!("{}|k={}", spec.label, k),
        truncation: Some(radius),
        // |pi_k(z)| <= |z| keeps any envelope valid.
        envelope: spec.envelope,
        f: Arc::new(f),
    })
}

/// Per-coordinate ranges for sampling `(t, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingBox {
    pub t: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl SamplingBox {
    pub fn new(t: (f64, f64), y: (f64, f64), z: (f64, f64)) -> Result<Self> {
        for (name, (lo, hi)) in [("t", t), ("y", y), ("z", z)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "sampling box range for {name} must be bounded with lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { t, y, z })
    }

    /// Box over `[0, T] x [-ybound, ybound]^n x [-zbound, zbound]^{nd}`.
    pub fn symmetric(horizon: f64, ybound: f64, zbound: f64) -> Result<Self> {
        Self::new((0.0, horizon), (-ybound, ybound), (-zbound, zbound))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthViolation {
    pub t: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub norm_f: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityViolation {
    pub t: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub y2: Vec<f64>,
    pub z2: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub growth_violations: Vec<GrowthViolation>,
    pub regularity_violations: Vec<RegularityViolation>,
    pub samples_tested: usize,
    pub pass: bool,
}

struct Sample {
    t: f64,
    y: Vec<f64>,
    z: Vec<f64>,
}

fn lerp(range: (f64, f64), u: f64) -> f64 {
    range.0 + (range.1 - range.0) * u
}

/// Checks the growth and regularity bounds on seeded samples from `sbox`.
///
/// The corners of the box are always included (when there are at most 256 of
/// them) on top of `budget` uniform samples; regularity is checked on
/// consecutive pairs sharing the first sample's time.
pub fn validate_driver(spec: &DriverSpec, sbox: &SamplingBox, budget: usize, seed: u64) -> Result<ValidationReport> {
    if budget == 0 {
        return Err(Error::InvalidParameter("validation budget must be at least 1".into()));
    }
    let (n, d) = (spec.n, spec.d);
    let dims = 1 + n + n * d;
    let mut samples = Vec::with_capacity(budget + 16);
    if dims <= 8 {
        for mask in 0..(1usize << dims) {
            let bit = |b: usize| if mask >> b & 1 == 1 { 1.0 } else { 0.0 };
            samples.push(Sample {
                t: lerp(sbox.t, bit(0)),
                y: (0..n).map(|i| lerp(sbox.y, bit(1 + i))).collect(),
                z: (0..n * d).map(|q| lerp(sbox.z, bit(1 + n + q))).collect(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        samples.push(Sample {
            t: lerp(sbox.t, rng.random()),
            y: (0..n).map(|_| lerp(sbox.y, rng.random())).collect(),
            z: (0..n * d).map(|_| lerp(sbox.z, rng.random())).collect(),
        });
    }

    let m = spec.growth;
    let m_y = spec.lipschitz_y();
    let tol = |scale: f64| 1e-12 * (1.0 + scale);
    let mut values = Vec::with_capacity(samples.len());
    let mut growth_violations = Vec::new();
    for s in &samples {
        let fv = spec.eval_vec(s.t, &s.y, &s.z);
        if let Some(bad) = fv.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("driver `{}` at t = {}, y = {:?}, z = {:?}", spec.label, s.t, s.y, s.z),
                value: *bad,
            });
        }
        let norm_f = frobenius(&fv);
        let zn = frobenius(&s.z);
        let yn = frobenius(&s.y);
        let bound = (m * (1.0 + yn + zn * zn)).min(spec.envelope().bound(yn, zn));
        if norm_f > bound + tol(bound) {
            growth_violations.push(GrowthViolation {
                t: s.t,
                y: s.y.clone(),
                z: s.z.clone(),
                norm_f,
                bound,
            });
        }
        values.push(fv);
    }

    let mut regularity_violations = Vec::new();
    for pair in samples.chunks_exact(2).zip(values.chunks_exact(2)) {
        let (s, fv) = pair;
        let (a, b) = (&s[0], &s[1]);
        // Evaluate the second point at the first point's time.
        let fb = if a.t == b.t {
            fv[1].clone()
        } else {
            spec.eval_vec(a.t, &b.y, &b.z)
        };
        if let Some(bad) = fb.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("driver `{}` at t = {}, y = {:?}, z = {:?}", spec.label, a.t, b.y, b.z),
                value: *bad,
            });
        }
        let diff: Vec<f64> = fb.iter().zip(&fv[0]).map(|(p, q)| p - q).collect();
        let dy: Vec<f64> = b.y.iter().zip(&a.y).map(|(p, q)| p - q).collect();
        let dz: Vec<f64> = b.z.iter().zip(&a.z).map(|(p, q)| p - q).collect();
        let lhs = frobenius(&diff);
        let rhs = m_y * frobenius(&dy)
            + m * (1.0 + frobenius(&a.y) + frobenius(&b.y) + frobenius(&a.z) + frobenius(&b.z)) * frobenius(&dz);
        if lhs > rhs + tol(rhs) {
            regularity_violations.push(RegularityViolation {
                t: a.t,
                y: a.y.clone(),
                z: a.z.clone(),
                y2: b.y.clone(),
                z2: b.z.clone(),
                lhs,
                rhs,
            });
        }
    }

    let pass = growth_violations.is_empty() && regularity_violations.is_empty();
    Ok(ValidationReport {
        growth_violations,
        regularity_violations,
        samples_tested: samples.len(),
        pass,
    })
}
