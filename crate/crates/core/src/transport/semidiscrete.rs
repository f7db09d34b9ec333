//! Exact one-dimensional semi-discrete optimal transport between a gridded
//! density and an empirical measure.
//!
//! The density is given by nonnegative nodal values on a uniform grid. Each
//! cell carries the trapezoid mass of its two nodes and spreads it uniformly,
//! so the model CDF is piecewise linear and can be merged exactly against the
//! step quantile function of the samples.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const GRID_NODES: usize = 1024;
/// Grid margin around the projected samples in units of their standard deviation.
pub const GRID_MARGIN: f64 = 4.0;

/// Uniform grid `lo + i * step`, `i < nodes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub step: f64,
    pub nodes: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::DegenerateGrid(format!("[{lo}, {hi}] with {nodes} nodes")));
        }
        let step = (hi - lo) / (nodes - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::DegenerateGrid("zero grid spacing".into()));
        }
        Ok(Self { lo, step, nodes })
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.node(i)).collect()
    }

    pub fn hi(&self) -> f64 {
        self.node(self.nodes - 1)
    }
}

/// A projection direction with the sorted projected samples and the quadrature grid.
#[derive(Debug, Clone)]
pub struct ProjectionContext {
    direction: DVector<f64>,
    projected: Vec<f64>,
    grid: Grid,
}

impl ProjectionContext {
    /// Projects the rows of `samples` onto the unit vector `p` and spans the
    /// default grid over the projected range.
    pub fn new(p: DVector<f64>, samples: &DMatrix<f64>) -> Result<Self> {
        let projected = project(&p, samples)?;
        let grid = default_grid(&projected)?;
        Ok(Self { direction: p, projected, grid })
    }

    pub fn with_grid(p: DVector<f64>, samples: &DMatrix<f64>, grid: Grid) -> Result<Self> {
        let projected = project(&p, samples)?;
        Ok(Self { direction: p, projected, grid })
    }

    /// One-dimensional context on raw sample values with direction `[1]`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let projected = sorted_finite(values)?;
        let grid = default_grid(&projected)?;
        Ok(Self { direction: DVector::from_element(1, 1.0), projected, grid })
    }

    pub fn from_values_with_grid(values: Vec<f64>, grid: Grid) -> Result<Self> {
        Ok(Self { direction: DVector::from_element(1, 1.0), projected: sorted_finite(values)?, grid })
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn projected_samples(&self) -> &[f64] {
        &self.projected
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

fn project(p: &DVector<f64>, samples: &DMatrix<f64>) -> Result<Vec<f64>> {
    if p.len() != samples.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "direction has length {}, samples have {} columns",
            p.len(),
            samples.ncols()
        )));
    }
    if (p.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("projection direction has norm {}", p.norm())));
    }
    sorted_finite((samples * p).iter().copied().collect())
}

fn sorted_finite(mut values: Vec<f64>) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidDataset("no samples to project".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite projected sample".into()));
    }
    values.sort_unstable_by(f64::total_cmp);
    Ok(values)
}

fn default_grid(sorted: &[f64]) -> Result<Grid> {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let lo = sorted[0] - GRID_MARGIN * sd;
    let hi = sorted[sorted.len() - 1] + GRID_MARGIN * sd;
    Grid::new(lo, hi, GRID_NODES)
}

/// Result of the exact semi-discrete solve.
#[derive(Debug, Clone)]
pub struct SemiDiscreteSolution {
    /// Squared W2 between the normalised grid density and the samples.
    pub cost: f64,
    /// Trapezoid mass of the unnormalised nodal density.
    pub mass: f64,
    /// Nodal Kantorovich potential with `phi[0] = 0` and `phi' = 2 (y - T(y))`.
    pub potential: Vec<f64>,
    /// Average of the potential over each cell.
    pub cell_potential: Vec<f64>,
    /// Monotone map `T` evaluated at the nodes.
    pub transport_map: Vec<f64>,
    /// Quadrature weights `w_n` with `d cost = sum_n w_n d rho_n` for any
    /// perturbation of the unnormalised nodal density.
    pub node_weights: Vec<f64>,
}

/// Solves the transport problem between `density` (nodal values on the context
/// grid) and the empirical measure of the projected samples.
pub fn solve(ctx: &ProjectionContext, density: &[f64]) -> Result<SemiDiscreteSolution> {
    let grid = ctx.grid;
    let nodes = grid.nodes;
    if density.len() != nodes {
        return Err(Error::DimensionMismatch(format!("density has {} values for {nodes} nodes", density.len())));
    }
    if density.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
        return Err(Error::DegenerateGrid("density values must be finite and nonnegative".into()));
    }
    let h = grid.step;
    let raw: Vec<f64> = density.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).collect();
    let mass: f64 = raw.iter().sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::DegenerateGrid("density has no mass on the grid".into()));
    }
    let q: Vec<f64> = raw.iter().map(|r| r / mass).collect();

    let xs = &ctx.projected;
    let n = xs.len();
    let share = 1.0 / n as f64;
    let mut j = 0usize;
    let mut left = share;

    let mut cost = 0.0;
    let mut potential = vec![0.0; nodes];
    let mut cell_potential = vec![0.0; nodes - 1];
    let mut transport_map = vec![0.0; nodes];

    for g in 0..nodes - 1 {
        let y_start = grid.node(g);
        let y_end = grid.node(g + 1);
        transport_map[g] = xs[j];
        let mut ya = y_start;
        let mut phi = potential[g];
        let mut integral = 0.0;
        if q[g] <= 0.0 {
            piece(ya, y_end, xs[j], &mut phi, &mut integral);
        } else {
            let density_in_cell = q[g] / h;
            let mut remaining = q[g];
            loop {
                let last = j + 1 == n;
                let finishes_cell = last || remaining <= left;
                let take = if finishes_cell { remaining } else { left };
                let yb = if finishes_cell { y_end } else { (ya + h * take / q[g]).min(y_end) };
                cost += density_in_cell * piece(ya, yb, xs[j], &mut phi, &mut integral);
                ya = yb;
                if finishes_cell {
                    left -= take;
                    if left <= 0.0 && !last {
                        j += 1;
                        left = share;
                    }
                    break;
                }
                remaining -= take;
                j += 1;
                left = share;
            }
        }
        potential[g + 1] = phi;
        cell_potential[g] = integral / h;
    }
    transport_map[nodes - 1] = xs[j];

    let mean_potential: f64 = cell_potential.iter().zip(&q).map(|(p, w)| p * w).sum();
    let scale = 0.5 * h / mass;
    let mut node_weights = vec![0.0; nodes];
    for (g, p) in cell_potential.iter().enumerate() {
        let c = scale * (p - mean_potential);
        node_weights[g] += c;
        node_weights[g + 1] += c;
    }

    Ok(SemiDiscreteSolution { cost, mass, potential, cell_potential, transport_map, node_weights })
}

/// Cost of transporting the uniform density on `[ya, yb]` to `x`, per unit
/// density, while advancing the potential and its running integral.
fn piece(ya: f64, yb: f64, x: f64, phi: &mut f64, integral: &mut f64) -> f64 {
    let d = yb - ya;
    let a = ya - x;
    let b = yb - x;
    *integral += *phi * d + d * d * (b + 2.0 * a) / 3.0;
    *phi += d * (a + b);
    d * (a * a + a * b + b * b) / 3.0
}

/// Squared W2 between the gridded density and the projected samples.
pub fn w2_1d_semidiscrete(ctx: &ProjectionContext, density: &[f64]) -> Result<f64> {
    solve(ctx, density).map(|s| s.cost)
}

/// Nodal Kantorovich potential, pinned to zero at the left grid edge.
pub fn kantorovich_potential(ctx: &ProjectionContext, density: &[f64]) -> Result<Vec<f64>> {
    solve(ctx, density).map(|s| s.potential)
}
