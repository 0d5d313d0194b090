//! Brownian ensembles on uniform grids and sampled Itô processes.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::fmt_f64;
use crate::rng::{NormalStream, Substream};

/// `t_i = i T / m` for `i = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("time grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.horizon / self.steps as f64
        }
    }

    /// Same horizon, `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            horizon: self.horizon,
            steps: self.steps * factor.max(1),
        }
    }
}

/// `N` Brownian paths of dimension `d`, stored path-major as `[path][step][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    paths: usize,
    dim: usize,
    seed: u64,
    substream: Substream,
    values: Vec<f64>,
}

impl PathEnsemble {
    /// Wraps precomputed path values (`B_0` must vanish).
    pub fn from_values(grid: TimeGrid, paths: usize, dim: usize, seed: u64, values: Vec<f64>) -> Result<Self> {
        if values.len() != paths * (grid.steps + 1) * dim {
            return Err(Error::Dimension(format!(
                "ensemble values have length {}, expected {} x {} x {}",
                values.len(),
                paths,
                grid.steps + 1,
                dim
            )));
        }
        Ok(Self {
            grid,
            paths,
            dim,
            seed,
            substream: Substream::Brownian,
            values,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self) -> Substream {
        self.substream
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn stride(&self) -> usize {
        (self.grid.steps + 1) * self.dim
    }

    /// `B^{(p)}_{t_i}`.
    #[inline]
    pub fn at(&self, path: usize, step: usize) -> &[f64] {
        let o = path * self.stride() + step * self.dim;
        &self.values[o..o + self.dim]
    }

    /// First coordinate of `B^{(p)}_{t_i}`.
    #[inline]
    pub fn at1(&self, path: usize, step: usize) -> f64 {
        self.values[path * self.stride() + step * self.dim]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        &self.values[path * self.stride()..(path + 1) * self.stride()]
    }

    /// `B_{t_{i+1}} - B_{t_i}` in coordinate `j`.
    #[inline]
    pub fn increment(&self, path: usize, step: usize, j: usize) -> f64 {
        let o = path * self.stride() + step * self.dim + j;
        self.values[o + self.dim] - self.values[o]
    }

    /// Writes `path,t,B_1..B_d` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|j| format!("B_{j}")).collect();
        writeln!(w, "path,t,{}", header.join(","))?;
        for p in 0..self.paths {
            for i in 0..=self.grid.steps {
                let coords: Vec<String> = self.at(p, i).iter().map(|&v| fmt_f64(v)).collect();
                writeln!(w, "{p},{},{}", fmt_f64(self.grid.time(i)), coords.join(","))?;
            }
        }
        Ok(())
    }
}

/// Seeded ensemble on the Brownian substream.
pub fn simulate_bm(grid: TimeGrid, paths: usize, dim: usize, seed: u64) -> Result<PathEnsemble> {
    simulate_bm_on(grid, paths, dim, seed, Substream::Brownian)
}

pub fn simulate_bm_on(grid: TimeGrid, paths: usize, dim: usize, seed: u64, substream: Substream) -> Result<PathEnsemble> {
    if paths == 0 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "ensemble needs positive path count and dimension (N = {paths}, d = {dim})"
        )));
    }
    let stride = (grid.steps + 1) * dim;
    let sqrt_dt = grid.dt().sqrt();
    let mut values = vec![0.0; paths * stride];
    values.par_chunks_mut(stride).enumerate().for_each(|(p, row)| {
        let mut stream = NormalStream::new(seed, substream, p as u64);
        for i in 0..grid.steps {
            for j in 0..dim {
                row[(i + 1) * dim + j] = row[i * dim + j] + sqrt_dt * stream.next_normal();
            }
        }
    });
    Ok(PathEnsemble {
        grid,
        paths,
        dim,
        seed,
        substream,
        values,
    })
}

/// A scalar Itô process sampled along an ensemble:
/// `Y`, `Z` (in `R^d`) and drift `g` per `(path, time)`, and terminal `xi` per path.
#[derive(Debug, Clone)]
pub struct ItoProcess {
    ensemble: Arc<PathEnsemble>,
    y: Vec<f64>,
    z: Vec<f64>,
    drift: Vec<f64>,
    terminal: Vec<f64>,
    clamped_fraction: f64,
}

impl ItoProcess {
    pub fn new(ensemble: Arc<PathEnsemble>, y: Vec<f64>, z: Vec<f64>, drift: Vec<f64>, terminal: Vec<f64>) -> Result<Self> {
        let cells = ensemble.paths * (ensemble.grid.steps + 1);
        let d = ensemble.dim;
        if y.len() != cells || drift.len() != cells || z.len() != cells * d || terminal.len() != ensemble.paths {
            return Err(Error::Dimension(format!(
                "Itô process arrays (Y {}, Z {}, g {}, xi {}) do not match N = {}, m + 1 = {}, d = {}",
                y.len(),
                z.len(),
                drift.len(),
                terminal.len(),
                ensemble.paths,
                ensemble.grid.steps + 1,
                d
            )));
        }
        for (name, arr) in [("Y", &y), ("Z", &z), ("g", &drift), ("xi", &terminal)] {
            if let Some(pos) = arr.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    location: format!("{name}[{pos}] of Itô process"),
                    value: arr[pos],
                });
            }
        }
        Ok(Self {
            ensemble,
            y,
            z,
            drift,
            terminal,
            clamped_fraction: 0.0,
        })
    }

    pub(crate) fn with_clamped_fraction(mut self, fraction: f64) -> Self {
        self.clamped_fraction = fraction;
        self
    }

    pub fn ensemble(&self) -> &Arc<PathEnsemble> {
        &self.ensemble
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.ensemble.grid
    }

    pub fn paths(&self) -> usize {
        self.ensemble.paths
    }

    pub fn dim(&self) -> usize {
        self.ensemble.dim
    }

    #[inline]
    fn cell(&self, path: usize, step: usize) -> usize {
        path * (self.ensemble.grid.steps + 1) + step
    }

    #[inline]
    pub fn y(&self, path: usize, step: usize) -> f64 {
        self.y[self.cell(path, step)]
    }

    #[inline]
    pub fn z(&self, path: usize, step: usize) -> &[f64] {
        let d = self.ensemble.dim;
        let o = self.cell(path, step) * d;
        &self.z[o..o + d]
    }

    #[inline]
    pub fn drift(&self, path: usize, step: usize) -> f64 {
        self.drift[self.cell(path, step)]
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    /// Fraction of samples clamped to the space grid during extraction.
    pub fn clamped_fraction(&self) -> f64 {
        self.clamped_fraction
    }

    /// Copy with every `Z` sample replaced by `map(Z)`.
    pub fn map_z(&self, map: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let d = self.ensemble.dim;
        let mut z = Vec::with_capacity(self.z.len());
        for chunk in self.z.chunks_exact(d) {
            let mapped = map(chunk);
            if mapped.len() != d {
                return Err(Error::Dimension(format!("mapped Z has length {}, expected {d}", mapped.len())));
            }
            z.extend(mapped);
        }
        let mut out = Self::new(
            Arc::clone(&self.ensemble),
            self.y.clone(),
            z,
            self.drift.clone(),
            self.terminal.clone(),
        )?;
        out.clamped_fraction = self.clamped_fraction;
        Ok(out)
    }
}
