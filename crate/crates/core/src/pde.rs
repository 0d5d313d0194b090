//! Explicit finite differences for `u_t + u_xx/2 + f(t, u, u_x) = 0`, `u(T, .) = h`.
//!
//! With `n = d = 1` and a driver that is Lipschitz in `(y, z)` (typically a
//! truncated one), `Y_t = u(t, B_t)` and `Z_t = u_x(t, B_t)` solve the BSDE with
//! terminal value `h(B_T)`. The scheme steps backward from `T`:
//!
//! ```text
//! u(t - dt, x) = u(t, x) + dt [ (u(x+dx) - 2u(x) + u(x-dx)) / (2 dx^2) + f(t, u, (u(x+dx) - u(x-dx)) / (2 dx)) ]
//! ```
//!
//! with `dt <= dx^2 / (1 + M_y dx^2)`, enforced by sub-stepping each outer
//! interval. At `x = +-L` the second difference is dropped and `u_x` is frozen
//! at the one-sided slope of `h`, so the edge values follow an ODE in `u` alone
//! and the scheme stays monotone up to the boundary.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::DriverSpec;
use crate::error::{Error, Result};
use crate::paths::{ItoProcess, PathEnsemble, TimeGrid};
use crate::report::fmt_f64;

/// Markovian terminal condition `xi = h(B_T)`.
#[derive(Clone)]
pub struct TerminalCondition {
    h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    sup_norm: f64,
    lipschitz: f64,
    label: String,
}

impl fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalCondition")
            .field("label", &self.label)
            .field("sup_norm", &self.sup_norm)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl TerminalCondition {
    /// `sup_norm` and `lipschitz` may be infinite for unbounded data.
    pub fn new(h: Arc<dyn Fn(f64) -> f64 + Send + Sync>, sup_norm: f64, lipschitz: f64, label: impl Into<String>) -> Result<Self> {
        if !(sup_norm >= 0.0) || !(lipschitz >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "terminal bounds must be nonnegative (sup {sup_norm}, Lipschitz {lipschitz})"
            )));
        }
        Ok(Self {
            h,
            sup_norm,
            lipschitz,
            label: label.into(),
        })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.h)(x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Nodes `x_j = -L + j dx`, `j = 0..nodes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceGrid {
    half_width: f64,
    dx: f64,
    nodes: usize,
}

impl SpaceGrid {
    pub fn new(half_width: f64, dx: f64) -> Result<Self> {
        if !(half_width > 0.0 && dx > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "space grid needs L > 0 and dx > 0 (L = {half_width}, dx = {dx})"
            )));
        }
        let cells = (2.0 * half_width / dx).round();
        if cells < 2.0 || ((cells * dx) - 2.0 * half_width).abs() > 1e-9 * half_width {
            return Err(Error::InvalidParameter(format!(
                "dx = {dx} must divide 2L = {} into at least two cells",
                2.0 * half_width
            )));
        }
        Ok(Self {
            half_width,
            dx,
            nodes: cells as usize + 1,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx
    }
}

/// Step-size bookkeeping of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeInfo {
    pub inner_dt: f64,
    pub substeps: usize,
    pub y_lipschitz: f64,
    /// `z`-Lipschitz constant of the driver on the a-priori `y` range, when known.
    pub z_lipschitz: Option<f64>,
    /// `dx * L_z <= 1`, the condition for the centered gradient to keep the scheme monotone.
    pub monotone: Option<bool>,
}

/// `u(t_i, x_j)` and `u_x(t_i, x_j)` on the outer time grid.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    grid: TimeGrid,
    space: SpaceGrid,
    u: Vec<f64>,
    ux: Vec<f64>,
    driver: DriverSpec,
    terminal: TerminalCondition,
    scheme: SchemeInfo,
}

/// Result of interpolating the grid at one `(t_i, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub u: f64,
    pub ux: f64,
    pub clamped: bool,
}

impl ValueGrid {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn driver(&self) -> &DriverSpec {
        &self.driver
    }

    pub fn terminal(&self) -> &TerminalCondition {
        &self.terminal
    }

    pub fn scheme(&self) -> &SchemeInfo {
        &self.scheme
    }

    pub fn truncation(&self) -> Option<f64> {
        self.driver.truncation()
    }

    #[inline]
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.space.nodes + j]
    }

    #[inline]
    pub fn ux(&self, i: usize, j: usize) -> f64 {
        self.ux[i * self.space.nodes + j]
    }

    pub fn u_row(&self, i: usize) -> &[f64] {
        &self.u[i * self.space.nodes..(i + 1) * self.space.nodes]
    }

    pub fn ux_row(&self, i: usize) -> &[f64] {
        &self.ux[i * self.space.nodes..(i + 1) * self.space.nodes]
    }

    /// Linear interpolation in `x` at time index `i`, clamping to
    /// `[-L + margin, L - margin]`.
    #[inline]
    pub fn interpolate(&self, i: usize, x: f64, margin: f64) -> Interpolated {
        let l = self.space.half_width;
        let (lo, hi) = (-l + margin, l - margin);
        let clamped = !(lo..=hi).contains(&x);
        let xc = x.clamp(lo, hi);
        let pos = (xc + l) / self.space.dx;
        let j = (pos.floor() as usize).min(self.space.nodes - 2);
        let w = pos - j as f64;
        let row = i * self.space.nodes;
        let u = (1.0 - w) * self.u[row + j] + w * self.u[row + j + 1];
        let ux = (1.0 - w) * self.ux[row + j] + w * self.ux[row + j + 1];
        Interpolated { u, ux, clamped }
    }

    /// `u(0, 0)`.
    pub fn y0(&self) -> f64 {
        self.interpolate(0, 0.0, 0.0).u
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn max_abs_ux(&self) -> f64 {
        self.ux.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Writes `t,x,u,u_x` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,u,u_x")?;
        for i in 0..=self.grid.steps() {
            let t = fmt_f64(self.grid.time(i));
            for j in 0..self.space.nodes {
                writeln!(
                    w,
                    "{t},{},{},{}",
                    fmt_f64(self.space.x(j)),
                    fmt_f64(self.u(i, j)),
                    fmt_f64(self.ux(i, j))
                )?;
            }
        }
        Ok(())
    }
}

/// The a-priori bound `e^{MT}(|h|_inf + MT)`.
pub fn exp_bound(m: f64, horizon: f64, xi_sup: f64) -> f64 {
    (m * horizon).exp() * (xi_sup + m * horizon)
}

fn gradient_into(u: &[f64], dx: f64, edges: (f64, f64), out: &mut [f64]) {
    let n = u.len();
    out[0] = edges.0;
    out[n - 1] = edges.1;
    for j in 1..n - 1 {
        out[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
    }
}

pub fn solve_semilinear(driver: &DriverSpec, terminal: &TerminalCondition, space: SpaceGrid, grid: TimeGrid) -> Result<ValueGrid> {
    if driver.n() != 1 || driver.d() != 1 {
        return Err(Error::Dimension(format!(
            "the PDE solver needs n = d = 1, driver `{}` has n = {}, d = {}",
            driver.label(),
            driver.n(),
            driver.d()
        )));
    }
    let nx = space.nodes;
    let dx = space.dx;
    let m_y = driver.lipschitz_y();
    let dt_max = dx * dx / (1.0 + m_y * dx * dx);
    let substeps = (grid.dt() / dt_max).ceil().max(1.0) as usize;
    let inner_dt = grid.dt() / substeps as f64;

    let mut current: Vec<f64> = (0..nx).map(|j| terminal.eval(space.x(j))).collect();
    if let Some(j) = current.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("terminal layer at x = {}", space.x(j)),
            value: current[j],
        });
    }
    let h_sup_grid = current.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let ybound = exp_bound(driver.growth_constant(), grid.horizon(), h_sup_grid);
    let z_lipschitz = driver.z_lipschitz(ybound);

    let steps = grid.steps();
    let mut u = vec![0.0; (steps + 1) * nx];
    let mut ux = vec![0.0; (steps + 1) * nx];
    let mut next = vec![0.0; nx];
    let mut grad = vec![0.0; nx];

    let edges = ((current[1] - current[0]) / dx, (current[nx - 1] - current[nx - 2]) / dx);
    u[steps * nx..].copy_from_slice(&current);
    gradient_into(&current, dx, edges, &mut ux[steps * nx..]);

    let half_over_dx2 = 0.5 / (dx * dx);
    let over_2dx = 0.5 / dx;
    for i in (1..=steps).rev() {
        for s in 0..substeps {
            let t = grid.time(i) - s as f64 * inner_dt;
            next[0] = current[0] + inner_dt * driver.eval_scalar(t, current[0], &[edges.0]);
            next[nx - 1] = current[nx - 1] + inner_dt * driver.eval_scalar(t, current[nx - 1], &[edges.1]);
            for j in 1..nx - 1 {
                let (l, c, r) = (current[j - 1], current[j], current[j + 1]);
                let lap = (r - 2.0 * c + l) * half_over_dx2;
                let g = (r - l) * over_2dx;
                next[j] = c + inner_dt * (lap + driver.eval_scalar(t, c, &[g]));
            }
            std::mem::swap(&mut current, &mut next);
        }
        if let Some(j) = current.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("u(t = {}, x = {})", grid.time(i - 1), space.x(j)),
                value: current[j],
            });
        }
        let row = (i - 1) * nx;
        u[row..row + nx].copy_from_slice(&current);
        gradient_into(&current, dx, edges, &mut grad);
        ux[row..row + nx].copy_from_slice(&grad);
    }

    Ok(ValueGrid {
        grid,
        space,
        u,
        ux,
        driver: driver.clone(),
        terminal: terminal.clone(),
        scheme: SchemeInfo {
            inner_dt,
            substeps,
            y_lipschitz: m_y,
            z_lipschitz,
            monotone: z_lipschitz.map(|lz| dx * lz <= 1.0),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Paths are clamped to `[-L + margin, L - margin]`.
    pub margin: f64,
    /// Clamped fraction above which a warning (or, in strict mode, an error) is raised.
    pub clamp_threshold: f64,
    pub strict: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            margin: 0.0,
            clamp_threshold: 1e-3,
            strict: false,
        }
    }
}

/// `Y = u(t, B)`, `Z = u_x(t, B)`, `g = f(t, Y, Z)`, `xi = h(B_T)` along `ensemble`.
pub fn extract_solution(vg: &ValueGrid, ensemble: &Arc<PathEnsemble>, opts: ExtractOptions) -> Result<ItoProcess> {
    if ensemble.dim() != 1 {
        return Err(Error::Dimension(format!("extraction needs d = 1, ensemble has d = {}", ensemble.dim())));
    }
    if ensemble.grid() != vg.grid() {
        return Err(Error::Dimension("ensemble and value grid use different time grids".into()));
    }
    let steps = vg.grid.steps();
    let per_path: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, usize)> = (0..ensemble.paths())
        .into_par_iter()
        .map(|p| {
            let mut ys = Vec::with_capacity(steps + 1);
            let mut zs = Vec::with_capacity(steps + 1);
            let mut gs = Vec::with_capacity(steps + 1);
            let mut clamped = 0;
            for i in 0..=steps {
                let s = vg.interpolate(i, ensemble.at1(p, i), opts.margin);
                clamped += s.clamped as usize;
                ys.push(s.u);
                zs.push(s.ux);
                gs.push(vg.driver.eval_scalar(vg.grid.time(i), s.u, &[s.ux]));
            }
            (ys, zs, gs, clamped)
        })
        .collect();

    let total = ensemble.paths() * (steps + 1);
    let mut y = Vec::with_capacity(total);
    let mut z = Vec::with_capacity(total);
    let mut g = Vec::with_capacity(total);
    let mut clamped = 0;
    for (ys, zs, gs, c) in per_path {
        y.extend(ys);
        z.extend(zs);
        g.extend(gs);
        clamped += c;
    }
    let fraction = clamped as f64 / total as f64;
    if fraction > opts.clamp_threshold {
        if opts.strict {
            return Err(Error::ClampedFraction {
                clamped,
                total,
                fraction,
                threshold: opts.clamp_threshold,
            });
        }
        log::warn!(
            "{clamped} of {total} samples clamped to [-L, L] (fraction {fraction:.3e} > {:.1e})",
            opts.clamp_threshold
        );
    }
    let xi: Vec<f64> = (0..ensemble.paths())
        .map(|p| vg.terminal.eval(ensemble.at1(p, steps)))
        .collect();
    Ok(ItoProcess::new(Arc::clone(ensemble), y, z, g, xi)?.with_clamped_fraction(fraction))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupBoundCheck {
    pub pass: bool,
    pub max_abs_y: f64,
    pub bound: f64,
    /// `bound - max |Y|`.
    pub margin: f64,
}

/// `max |Y| <= e^{MT}(|xi|_inf + MT) + tol`.
pub fn sup_bound_check(ip: &ItoProcess, m: f64, xi_sup: f64, tol: f64) -> SupBoundCheck {
    let max_abs_y = ip.y_values().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let bound = exp_bound(m, ip.grid().horizon(), xi_sup) + tol;
    SupBoundCheck {
        pass: max_abs_y <= bound,
        max_abs_y,
        bound,
        margin: bound - max_abs_y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::truncate;
    use crate::paths::simulate_bm;
    use crate::registry;

    fn small_space() -> SpaceGrid {
        SpaceGrid::new(6.0, 0.05).unwrap()
    }

    #[test]
    fn space_grid_validation() {
        assert_eq!(SpaceGrid::new(8.0, 0.02).unwrap().nodes(), 801);
        assert!(SpaceGrid::new(1.0, 0.3).is_err());
        assert!(SpaceGrid::new(-1.0, 0.1).is_err());
    }

    #[test]
    fn linear_terminal_is_a_fixed_point() {
        let f = registry::driver("zero", 1, 1, 1.0).unwrap();
        let h = registry::terminal("identity").unwrap();
        let vg = solve_semilinear(&f, &h, small_space(), TimeGrid::new(1.0, 20).unwrap()).unwrap();
        for i in 0..=20 {
            for j in 0..vg.space().nodes() {
                assert!((vg.u(i, j) - vg.space().x(j)).abs() < 1e-12);
                assert!((vg.ux(i, j) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn heat_second_moment() {
        let f = registry::driver("zero", 1, 1, 1.0).unwrap();
        let h = registry::terminal("square").unwrap();
        let vg = solve_semilinear(&f, &h, small_space(), TimeGrid::new(1.0, 20).unwrap()).unwrap();
        assert!((vg.y0() - 1.0).abs() < 1e-2, "u(0,0) = {}", vg.y0());
    }

    #[test]
    fn rejects_multidimensional_drivers() {
        let f = registry::driver("zero", 1, 2, 1.0).unwrap();
        let h = registry::terminal("tanh").unwrap();
        assert!(matches!(
            solve_semilinear(&f, &h, small_space(), TimeGrid::new(1.0, 4).unwrap()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn comparison_principle() {
        let f = truncate(&registry::driver("mixed", 1, 1, 1.0).unwrap(), 4.0).unwrap();
        let h1 = registry::terminal("tanh").unwrap();
        let h2 = TerminalCondition::new(Arc::new(|x: f64| x.tanh() + 0.1 * (-x * x).exp()), 1.1, 1.1, "bump").unwrap();
        let g = TimeGrid::new(1.0, 10).unwrap();
        let a = solve_semilinear(&f, &h1, small_space(), g).unwrap();
        let b = solve_semilinear(&f, &h2, small_space(), g).unwrap();
        for i in 0..=10 {
            for j in 0..a.space().nodes() {
                assert!(a.u(i, j) <= b.u(i, j) + 1e-14, "i={i} j={j} {} {}", a.u(i, j), b.u(i, j));
            }
        }
    }

    #[test]
    fn truncation_level_is_irrelevant_above_gradient_range() {
        let f = registry::driver("quadratic:gamma=1", 1, 1, 1.0).unwrap();
        let h = registry::terminal("tanh").unwrap();
        let g = TimeGrid::new(1.0, 10).unwrap();
        let a = solve_semilinear(&truncate(&f, 4.0).unwrap(), &h, small_space(), g).unwrap();
        assert!(a.max_abs_ux() < 4.0);
        let b = solve_semilinear(&truncate(&f, 12.0).unwrap(), &h, small_space(), g).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.scheme().monotone, Some(true));
    }

    #[test]
    fn extraction_reads_the_grid() {
        let f = registry::driver("zero", 1, 1, 1.0).unwrap();
        let h = registry::terminal("identity").unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let vg = solve_semilinear(&f, &h, small_space(), grid).unwrap();
        let e = Arc::new(simulate_bm(grid, 500, 1, 4).unwrap());
        let ip = extract_solution(&vg, &e, ExtractOptions::default()).unwrap();
        assert!(ip.z_values().iter().all(|z| (z - 1.0).abs() < 1e-9));
        for p in 0..500 {
            assert!((ip.y(p, 20) - ip.terminal()[p]).abs() < 1e-12);
        }
        assert_eq!(ip.clamped_fraction(), 0.0);
    }

    #[test]
    fn strict_mode_escalates_clamping() {
        let f = registry::driver("zero", 1, 1, 1.0).unwrap();
        let h = registry::terminal("tanh").unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let tiny = SpaceGrid::new(0.5, 0.05).unwrap();
        let vg = solve_semilinear(&f, &h, tiny, grid).unwrap();
        let e = Arc::new(simulate_bm(grid, 200, 1, 4).unwrap());
        let loose = extract_solution(&vg, &e, ExtractOptions::default()).unwrap();
        assert!(loose.clamped_fraction() > 0.1);
        let strict = ExtractOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(extract_solution(&vg, &e, strict), Err(Error::ClampedFraction { .. })));
    }

    #[test]
    fn sup_bound_detects_scaled_process() {
        let f = registry::driver("zero", 1, 1, 1.0).unwrap();
        let h = registry::terminal("tanh").unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let vg = solve_semilinear(&f, &h, small_space(), grid).unwrap();
        let e = Arc::new(simulate_bm(grid, 300, 1, 8).unwrap());
        let ip = extract_solution(&vg, &e, ExtractOptions::default()).unwrap();
        // With M -> 0 the bound is |xi|_inf itself.
        let ok = sup_bound_check(&ip, 1e-12, 1.0, 1e-9);
        assert!(ok.pass && ok.max_abs_y <= 1.0);
        let scaled = ItoProcess::new(
            e.clone(),
            ip.y_values().iter().map(|v| 10.0 * v).collect(),
            ip.z_values().to_vec(),
            vec![0.0; ip.y_values().len()],
            ip.terminal().to_vec(),
        )
        .unwrap();
        assert!(!sup_bound_check(&scaled, 1.0, 1.0, 1e-9).pass);
    }

    #[test]
    fn grid_csv_has_header() {
        let f = registry::driver("zero", 1, 1, 1.0).unwrap();
        let h = registry::terminal("tanh").unwrap();
        let vg = solve_semilinear(&f, &h, SpaceGrid::new(1.0, 0.5).unwrap(), TimeGrid::new(1.0, 1).unwrap()).unwrap();
        let mut buf = Vec::new();
        vg.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("t,x,u,u_x"));
        assert_eq!(text.lines().count(), 1 + 2 * 5);
    }
}
