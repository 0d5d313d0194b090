use serde::{Deserialize, Serialize};

use super::{is_subharmonic, majorize_cone_quadratic, ConeQuadratic, Domain, Majorization, Partials, SubharmonicOptions, SubharmonicVerdict, TestFunction};
use crate::driver::{frobenius, DriverSpec};
use crate::error::{Error, Result};

/// `(t, x, y, z)` around which a test function is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl BasePoint {
    fn check(&self, n: usize, d: usize) -> Result<()> {
        if self.x.len() != d || self.y.len() != n || self.z.len() != n * d {
            return Err(Error::Dimension(format!(
                "base point has |x| = {}, |y| = {}, |z| = {}; expected {d}, {n}, {}",
                self.x.len(),
                self.y.len(),
                self.z.len(),
                n * d
            )));
        }
        if !(self.t.is_finite() && self.x.iter().chain(&self.y).chain(&self.z).all(|v| v.is_finite())) {
            return Err(Error::InvalidParameter("base point must be finite".into()));
        }
        Ok(())
    }
}

/// How the constant `C` bounding the driver's oscillation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstantChoice {
    /// From `M` and the working radii, see [`ansatz_constant`].
    FromAssumption,
    /// A caller-supplied constant known to satisfy the bound for this driver.
    Fixed { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructOptions {
    pub check: SubharmonicOptions,
    pub constant: ConstantChoice,
    /// The subharmonicity check uses margin `margin_fraction * eps`.
    pub margin_fraction: f64,
    pub bisection_steps: usize,
    /// The bisection radius is multiplied by this factor before the final check.
    pub safety: f64,
    /// Attempts at the final check, each shrinking the radius by `safety` again.
    pub verify_rounds: usize,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        Self {
            check: SubharmonicOptions::default(),
            constant: ConstantChoice::FromAssumption,
            margin_fraction: 1e-4,
            bisection_steps: 24,
            safety: 0.5,
            verify_rounds: 4,
        }
    }
}

/// `C = M (1 + 2|ybar| + r_y + 2|zbar|)`, raised to the `y`-Lipschitz constant
/// if that is larger. The regularity inequality and `|z| <= |zbar| + |z - zbar|`
/// give `|f(t,y,z) - f(t,ybar,zbar)| <= C (|y-ybar| + |z-zbar| + |z-zbar|^2)`
/// whenever `|y - ybar| <= r_y`.
pub fn ansatz_constant(driver: &DriverSpec, base: &BasePoint, r_y: f64) -> f64 {
    let m = driver.growth_constant();
    let c = m * (1.0 + 2.0 * frobenius(&base.y) + r_y + 2.0 * frobenius(&base.z));
    c.max(driver.lipschitz_y())
}

fn resolve_constant(driver: &DriverSpec, base: &BasePoint, r_y: f64, choice: ConstantChoice) -> Result<f64> {
    match choice {
        ConstantChoice::FromAssumption => Ok(ansatz_constant(driver, base, r_y)),
        ConstantChoice::Fixed { value } if value >= 0.0 && value.is_finite() => Ok(value),
        ConstantChoice::Fixed { value } => Err(Error::InvalidParameter(format!("constant C = {value} must be nonnegative"))),
    }
}

fn check_common(eps: f64, r_y: f64, sign: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !(r_y > 0.0 && r_y.is_finite()) {
        return Err(Error::InvalidParameter(format!("r_y must be positive, got {r_y}")));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::InvalidParameter(format!("sign must be +1 or -1, got {sign}")));
    }
    Ok(())
}

/// Bisects for the largest radius in `(0, r_max]` on which `check` passes,
/// shrinks it by `opts.safety` and confirms it with a fresh seed and four
/// times the budget.
fn certify_radius(
    r_max: f64,
    opts: &ConstructOptions,
    check_opts: &SubharmonicOptions,
    mut check: impl FnMut(f64, &SubharmonicOptions) -> SubharmonicVerdict,
) -> Result<(f64, SubharmonicVerdict)> {
    if !(opts.safety > 0.0 && opts.safety < 1.0) {
        return Err(Error::InvalidParameter(format!("safety must lie in (0, 1), got {}", opts.safety)));
    }
    let mut boundary = r_max;
    let first = check(r_max, check_opts);
    let mut last = first.clone();
    if !first.is_pass() {
        let (mut lo, mut hi) = (0.0, r_max);
        for _ in 0..opts.bisection_steps {
            let mid = 0.5 * (lo + hi);
            let v = check(mid, check_opts);
            if v.is_pass() {
                lo = mid;
            } else {
                hi = mid;
                last = v;
            }
        }
        if lo == 0.0 {
            return Err(Error::NoCertifiableDomain(format!(
                "no radius in [{hi:.3e}, {r_max}] passed; verdict at the smallest radius: {last:?}"
            )));
        }
        boundary = lo;
    }
    let confirm = SubharmonicOptions {
        budget: 4 * check_opts.budget.max(1),
        seed: check_opts.seed ^ 0xC0FF_EE00_D15E_A5E5,
        ..*check_opts
    };
    let mut r = if first.is_pass() { r_max } else { opts.safety * boundary };
    for _ in 0..opts.verify_rounds.max(1) {
        let v = check(r, &confirm);
        if v.is_pass() {
            return Ok((r, v));
        }
        last = v;
        r *= opts.safety;
    }
    Err(Error::NoCertifiableDomain(format!(
        "radius {:.3e} did not survive the confirming check: {last:?}",
        r / opts.safety
    )))
}

/// `phi = -sum_{i != i0} y^i + sum_i E~^i / beta_i + theta |x|^2` with
/// `E^i = exp(beta_i (y^i - ybar^i) + <gamma^i, x - xbar>)`, `E~^i = E^i`
/// except `E~^{i0} = (E^{i0})^sign`.
///
/// With `beta_i = 2 e0`, `gamma^i = -2 e0 zbar^i` and `theta = d0 / d`,
/// `L^f phi(.; z) = sum_i E~^i e0 |z^i - zbar^i|^2 - sum_i phi_{y^i} f^i + d0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzFunction {
    base: BasePoint,
    i0: usize,
    sign: f64,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    theta: f64,
    r_dom: f64,
    constant: f64,
    d0: f64,
    e0: f64,
    domain: Domain,
    provenance: Option<Provenance>,
}

/// How an [`AnsatzFunction`] was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub eps: f64,
    pub cone: ConeQuadratic,
    pub majorization: Majorization,
    pub verdict: SubharmonicVerdict,
}

/// Serializable parameters of an [`AnsatzFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzRecord {
    pub base: BasePoint,
    pub i0: usize,
    pub sign: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: f64,
    pub r_dom: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub d0: f64,
    pub e0: f64,
}

fn ball_domain(base: &BasePoint, radius: f64) -> Domain {
    let mut center = vec![base.t];
    center.extend(&base.x);
    center.extend(&base.y);
    Domain::Ball { center, radius }
}

impl AnsatzFunction {
    #[allow(clippy::too_many_arguments)]
    fn assemble(base: BasePoint, i0: usize, sign: f64, e0: f64, d0: f64, constant: f64, r_dom: f64) -> Self {
        let (n, d) = (base.y.len(), base.x.len());
        let beta = vec![2.0 * e0; n];
        let gamma = base.z.iter().map(|z| -2.0 * e0 * z).collect();
        let domain = ball_domain(&base, r_dom);
        Self {
            base,
            i0,
            sign,
            beta,
            gamma,
            theta: d0 / d as f64,
            r_dom,
            constant,
            d0,
            e0,
            domain,
            provenance: None,
        }
    }

    /// Rebuilds a function from its record.
    pub fn from_record(r: &AnsatzRecord) -> Result<Self> {
        let (n, d) = (r.base.y.len(), r.base.x.len());
        r.base.check(n, d)?;
        if n == 0 || d == 0 || r.i0 >= n || r.beta.len() != n || r.gamma.len() != n * d {
            return Err(Error::Dimension("inconsistent Ansatz record".into()));
        }
        if r.beta.iter().any(|b| !(*b > 0.0)) || (r.sign != 1.0 && r.sign != -1.0) || !(r.r_dom > 0.0) {
            return Err(Error::InvalidParameter("Ansatz record needs beta > 0, sign = +-1, r_dom > 0".into()));
        }
        Ok(Self {
            base: r.base.clone(),
            i0: r.i0,
            sign: r.sign,
            beta: r.beta.clone(),
            gamma: r.gamma.clone(),
            theta: r.theta,
            r_dom: r.r_dom,
            constant: r.c,
            d0: r.d0,
            e0: r.e0,
            domain: ball_domain(&r.base, r.r_dom),
            provenance: None,
        })
    }

    pub fn record(&self) -> AnsatzRecord {
        AnsatzRecord {
            base: self.base.clone(),
            i0: self.i0,
            sign: self.sign,
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
            theta: self.theta,
            r_dom: self.r_dom,
            c: self.constant,
            d0: self.d0,
            e0: self.e0,
        }
    }

    pub fn base(&self) -> &BasePoint {
        &self.base
    }

    pub fn i0(&self) -> usize {
        self.i0
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn r_dom(&self) -> f64 {
        self.r_dom
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    fn with_radius(&self, r: f64) -> Self {
        let mut out = self.clone();
        out.r_dom = r;
        out.domain = ball_domain(&self.base, r);
        out
    }

    #[inline]
    fn orientation(&self, i: usize) -> f64 {
        if i == self.i0 {
            self.sign
        } else {
            1.0
        }
    }

    /// `E~^i(x, y)` for each `i`.
    fn exponentials(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.base.x.len();
        (0..self.beta.len())
            .map(|i| {
                let lin: f64 = (0..d).map(|j| self.gamma[i * d + j] * (x[j] - self.base.x[j])).sum();
                (self.orientation(i) * (self.beta[i] * (y[i] - self.base.y[i]) + lin)).exp()
            })
            .collect()
    }
}

impl TestFunction for AnsatzFunction {
    fn n(&self) -> usize {
        self.beta.len()
    }

    fn d(&self) -> usize {
        self.base.x.len()
    }

    fn value(&self, _t: f64, x: &[f64], y: &[f64]) -> f64 {
        let e = self.exponentials(x, y);
        let mut v = self.theta * x.iter().map(|a| a * a).sum::<f64>();
        for i in 0..e.len() {
            v += e[i] / self.beta[i];
            if i != self.i0 {
                v -= y[i];
            }
        }
        v
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn label(&self) -> String {
        format!("ansatz(i0={},sign={},r_dom={})", self.i0, self.sign, self.r_dom)
    }

    fn partials(&self, t: f64, x: &[f64], y: &[f64]) -> Partials {
        let (n, d) = (self.n(), self.d());
        let e = self.exponentials(x, y);
        let mut py = vec![0.0; n];
        let mut yy = vec![0.0; n * n];
        let mut px: Vec<f64> = x.iter().map(|v| 2.0 * self.theta * v).collect();
        let mut xy = vec![0.0; n * d];
        let mut xx = vec![2.0 * self.theta; d];
        for i in 0..n {
            let s = self.orientation(i);
            py[i] = s * e[i] - if i == self.i0 { 0.0 } else { 1.0 };
            yy[i * n + i] = self.beta[i] * e[i];
            for j in 0..d {
                let g = self.gamma[i * d + j];
                px[j] += s * g / self.beta[i] * e[i];
                xy[i * d + j] = g * e[i];
                xx[j] += g * g / self.beta[i] * e[i];
            }
        }
        Partials {
            value: self.value(t, x, y),
            t: 0.0,
            y: py,
            x: px,
            yy,
            xy,
            xx,
        }
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// Builds the Ansatz around `base` and certifies the largest ball of radius
/// at most `r_y` on which it is f-subharmonic.
pub fn construct_subharmonic(
    driver: &DriverSpec,
    base: &BasePoint,
    i0: usize,
    sign: f64,
    eps: f64,
    r_y: f64,
    opts: &ConstructOptions,
) -> Result<AnsatzFunction> {
    let (n, d) = (driver.n(), driver.d());
    base.check(n, d)?;
    check_common(eps, r_y, sign)?;
    if i0 >= n {
        return Err(Error::InvalidParameter(format!("i0 = {i0} out of range for n = {n}")));
    }
    let constant = resolve_constant(driver, base, r_y, opts.constant)?;
    let f_bar = driver.eval_vec(base.t, &base.y, &base.z);
    let cone = ConeQuadratic::new(sign * f_bar[i0], constant, constant, base.z.clone())?;
    let maj = majorize_cone_quadratic(&cone, eps)?;
    let proto = AnsatzFunction::assemble(base.clone(), i0, sign, maj.q.e0, maj.q.d0, constant, r_y);

    let check_opts = SubharmonicOptions {
        margin: opts.check.margin.max(opts.margin_fraction * eps),
        ..opts.check
    };
    let (r_dom, verdict) = certify_radius(r_y, opts, &check_opts, |r, o| is_subharmonic(driver, &proto.with_radius(r), o))?;
    let mut phi = proto.with_radius(r_dom);
    phi.provenance = Some(Provenance {
        eps,
        cone,
        majorization: maj,
        verdict,
    });
    Ok(phi)
}

/// `phi(t, y) = exp(sign beta (y - ybar)) / beta + kappa (t - tbar)`, independent of `x` (`n = 1`).
///
/// With `beta = 4 e0` and `kappa = max(d0 + 2 e0 |zbar|^2, 0) + eps/2`, where
/// `(d0, e0)` majorizes the same cone-quadratic as the Ansatz, `L^f phi > 0`
/// near `(tbar, ybar)` for all `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XFreeAnsatz {
    base: BasePoint,
    sign: f64,
    beta: f64,
    kappa: f64,
    r_dom: f64,
    #[serde(rename = "C")]
    constant: f64,
    d0: f64,
    e0: f64,
    #[serde(skip)]
    domain: Domain,
}

impl XFreeAnsatz {
    fn with_radius(&self, r: f64) -> Self {
        let mut out = self.clone();
        out.r_dom = r;
        out.domain = Domain::Cylinder {
            center: vec![self.base.t, self.base.y[0]],
            radius: r,
        };
        out
    }

    pub fn base(&self) -> &BasePoint {
        &self.base
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn r_dom(&self) -> f64 {
        self.r_dom
    }
}

impl TestFunction for XFreeAnsatz {
    fn n(&self) -> usize {
        1
    }

    fn d(&self) -> usize {
        self.base.x.len()
    }

    fn value(&self, t: f64, _x: &[f64], y: &[f64]) -> f64 {
        (self.sign * self.beta * (y[0] - self.base.y[0])).exp() / self.beta + self.kappa * (t - self.base.t)
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn label(&self) -> String {
        format!("x-free(sign={},r_dom={})", self.sign, self.r_dom)
    }

    fn partials(&self, t: f64, x: &[f64], y: &[f64]) -> Partials {
        let d = self.d();
        let e = (self.sign * self.beta * (y[0] - self.base.y[0])).exp();
        Partials {
            value: self.value(t, x, y),
            t: self.kappa,
            y: vec![self.sign * e],
            x: vec![0.0; d],
            yy: vec![self.beta * e],
            xy: vec![0.0; d],
            xx: vec![0.0; d],
        }
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

pub fn construct_x_free(
    driver: &DriverSpec,
    base: &BasePoint,
    sign: f64,
    eps: f64,
    r_y: f64,
    opts: &ConstructOptions,
) -> Result<XFreeAnsatz> {
    if driver.n() != 1 {
        return Err(Error::Dimension(format!("x-free test functions need n = 1, got n = {}", driver.n())));
    }
    base.check(1, driver.d())?;
    check_common(eps, r_y, sign)?;
    let constant = resolve_constant(driver, base, r_y, opts.constant)?;
    let f_bar = driver.eval_scalar(base.t, base.y[0], &base.z);
    let cone = ConeQuadratic::new(sign * f_bar, constant, constant, base.z.clone())?;
    let maj = majorize_cone_quadratic(&cone, eps)?;
    let (d0, e0) = (maj.q.d0, maj.q.e0);
    let zn = frobenius(&base.z);
    let proto = XFreeAnsatz {
        base: base.clone(),
        sign,
        beta: 4.0 * e0,
        kappa: (d0 + 2.0 * e0 * zn * zn).max(0.0) + 0.5 * eps,
        r_dom: r_y,
        constant,
        d0,
        e0,
        domain: Domain::Whole,
    };
    let check_opts = SubharmonicOptions {
        margin: opts.check.margin.max(opts.margin_fraction * eps),
        ..opts.check
    };
    let (r_dom, _) = certify_radius(r_y, opts, &check_opts, |r, o| is_subharmonic(driver, &proto.with_radius(r), o))?;
    Ok(proto.with_radius(r_dom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use crate::subharmonic::{eval_lf, finite_difference_partials};

    fn base(t: f64, x: f64, y: f64, z: f64) -> BasePoint {
        BasePoint {
            t,
            x: vec![x],
            y: vec![y],
            z: vec![z],
        }
    }

    #[test]
    fn zero_driver_closed_form() {
        let zero = registry::driver("zero", 1, 1, 1.0).unwrap();
        let opts = ConstructOptions {
            constant: ConstantChoice::Fixed { value: 0.0 },
            ..Default::default()
        };
        let phi = construct_subharmonic(&zero, &base(0.0, 0.0, 0.0, 0.0), 0, 1.0, 0.1, 0.5, &opts).unwrap();
        assert!((phi.d0() - 0.05).abs() < 1e-15 && (phi.e0() - 0.1).abs() < 1e-15);
        assert!((phi.beta()[0] - 0.2).abs() < 1e-15);
        assert_eq!(phi.gamma(), &[0.0]);
        assert!((phi.theta() - 0.05).abs() < 1e-15);
        assert_eq!(phi.r_dom(), 0.5);
        let at_base = eval_lf(&zero, &phi, 0.0, &[0.0], &[0.0], &[0.0]).unwrap();
        assert!((at_base - 0.05).abs() < 1e-15);
    }

    #[test]
    fn gradient_conditions_hold_exactly() {
        let f = registry::driver("mixed", 2, 2, 1.0).unwrap();
        let b = BasePoint {
            t: 0.4,
            x: vec![0.3, -0.2],
            y: vec![0.5, -0.1],
            z: vec![0.2, -0.4, 1.0, 0.3],
        };
        for i0 in 0..2 {
            for sign in [1.0, -1.0] {
                let phi = construct_subharmonic(&f, &b, i0, sign, 0.5, 0.1, &ConstructOptions::default()).unwrap();
                let p = phi.partials(b.t, &b.x, &b.y);
                for i in 0..2 {
                    assert_eq!(p.y[i], if i == i0 { sign } else { 0.0 });
                }
                let lf = eval_lf(&f, &phi, b.t, &b.x, &b.y, &b.z).unwrap();
                assert!(lf <= 0.5 + 1e-12, "{lf}");
            }
        }
    }

    #[test]
    fn analytic_partials_match_finite_differences() {
        let f = registry::driver("quadratic:gamma=1", 1, 2, 1.0).unwrap();
        let b = BasePoint {
            t: 0.5,
            x: vec![0.1, 0.2],
            y: vec![0.3],
            z: vec![0.4, -0.2],
        };
        for sign in [1.0, -1.0] {
            let phi = construct_subharmonic(&f, &b, 0, sign, 1.0, 0.1, &ConstructOptions::default()).unwrap();
            let (x, y) = ([0.12, 0.17], [0.31]);
            let a = phi.partials(0.5, &x, &y);
            let n = finite_difference_partials(&phi, 0.5, &x, &y, 1e-5);
            let rel = |p: f64, q: f64| (p - q).abs() <= 1e-4 * (1.0 + p.abs());
            assert!(rel(a.y[0], n.y[0]) && rel(a.yy[0], n.yy[0]));
            assert!(a.x.iter().zip(&n.x).all(|(p, q)| rel(*p, *q)));
            assert!(a.xy.iter().zip(&n.xy).all(|(p, q)| rel(*p, *q)));
            assert!(a.xx.iter().zip(&n.xx).all(|(p, q)| rel(*p, *q)));
        }
    }

    #[test]
    fn half_square_driver_certifies_a_ball() {
        let f = registry::driver("quadratic:gamma=1", 1, 1, 1.0).unwrap();
        let phi = construct_subharmonic(&f, &base(0.0, 0.0, 0.0, 0.0), 0, 1.0, 0.1, 0.25, &ConstructOptions::default()).unwrap();
        assert!(phi.r_dom() > 0.0);
        assert!(is_subharmonic(&f, &phi, &SubharmonicOptions::default()).is_pass());
    }

    #[test]
    fn record_round_trip() {
        let f = registry::driver("linear:alpha=0.5", 1, 1, 1.0).unwrap();
        let phi = construct_subharmonic(&f, &base(0.2, 0.1, -0.3, 0.7), 0, -1.0, 0.5, 0.2, &ConstructOptions::default()).unwrap();
        let json = serde_json::to_string(&phi.record()).unwrap();
        assert!(json.contains("\"C\":"));
        let back: AnsatzRecord = serde_json::from_str(&json).unwrap();
        let rebuilt = AnsatzFunction::from_record(&back).unwrap();
        assert_eq!(rebuilt.value(0.2, &[0.15], &[-0.25]), phi.value(0.2, &[0.15], &[-0.25]));
        assert_eq!(rebuilt.r_dom(), phi.r_dom());
    }

    #[test]
    fn x_free_functions_are_subharmonic() {
        let f = registry::driver("zlinear:c=-1", 1, 1, 1.0).unwrap();
        for sign in [1.0, -1.0] {
            let phi = construct_x_free(&f, &base(0.5, 0.0, 0.5, -1.0), sign, 1.0, 0.25, &ConstructOptions::default()).unwrap();
            assert_eq!(phi.partials(0.5, &[3.0], &[0.5]).y[0], sign);
            assert!(is_subharmonic(&f, &phi, &SubharmonicOptions::default()).is_pass());
        }
    }

    #[test]
    fn invalid_arguments() {
        let f = registry::driver("zero", 1, 1, 1.0).unwrap();
        let o = ConstructOptions::default();
        assert!(construct_subharmonic(&f, &base(0.0, 0.0, 0.0, 0.0), 1, 1.0, 0.1, 0.1, &o).is_err());
        assert!(construct_subharmonic(&f, &base(0.0, 0.0, 0.0, 0.0), 0, 0.0, 0.1, 0.1, &o).is_err());
        assert!(construct_subharmonic(&f, &base(0.0, 0.0, 0.0, 0.0), 0, 1.0, 0.0, 0.1, &o).is_err());
    }
}
