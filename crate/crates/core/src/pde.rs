//! Time-dependent finite-volume solver for
//!
//! `u_t + (b u)_z = -(beta_m + mu) u + int_z^{z0} beta_m(z') k(z, z') u(z') dz'`
//!
//! on `(0, z0]`, coupled to the count `v0` of plasmid-free cells,
//! `v0' = (beta(0) - mu(0)) v0 + int_0^m beta u dz`.
//!
//! Each step applies first-order upwind transport and then one explicit Euler
//! substep for loss and fragmentation together. Both substeps keep `u >= 0`
//! when the local Courant numbers stay below one.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::ModelParameters;
use crate::quadrature::GaussLegendre;

pub const COURANT_LIMIT: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    /// Cell averages.
    pub u: Vec<f64>,
    pub v0: f64,
    pub t: f64,
}

impl PdeState {
    /// Cell averages of `u0` by 8-point Gauss–Legendre per cell.
    pub fn project(grid: &Grid, u0: impl Fn(f64) -> f64, v0: f64) -> Self {
        let rule = GaussLegendre::new(8);
        let u = grid
            .edges()
            .windows(2)
            .map(|w| rule.integrate(&u0, w[0], w[1]) / (w[1] - w[0]))
            .collect();
        Self { u, v0, t: 0.0 }
    }
}

/// Precomputed coefficients of the semi-discrete system.
#[derive(Debug, Clone)]
pub struct PdeModel {
    grid: Grid,
    b_edge: Vec<f64>,
    loss: Vec<f64>,
    net: Vec<f64>,
    /// Row-major `J x J`; entry `(i, j)` is the rate at which mothers in cell `j`
    /// produce daughters in cell `i`, per unit of `u_j`, as a density in cell `i`.
    frag: Vec<f64>,
    /// `beta(c_k) dz_k` for cells below the cutoff, feeding `v0`.
    low_division: Vec<f64>,
    v0_rate: f64,
}

impl PdeModel {
    pub fn new(params: &ModelParameters, grid: Grid) -> Result<Self> {
        if (grid.z0() - params.z0).abs() > 1e-12 * params.z0 {
            return Err(Error::GridMismatch(format!(
                "grid ends at {} but the model cap is {}",
                grid.z0(),
                params.z0
            )));
        }
        let n = grid.len();
        let c = grid.centers().to_vec();
        let e = grid.edges().to_vec();
        let dz = grid.widths().to_vec();
        let b_edge: Vec<f64> = e.iter().map(|&z| params.b.eval(z).max(0.0)).collect();
        let loss = c.iter().map(|&z| params.loss_rate(z)).collect();
        let net = c.iter().map(|&z| params.beta_m(z) - params.mu.eval(z)).collect();
        let kernel = &params.kernel;
        let frag: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (c, e, dz) = (&c, &e, &dz);
                (0..n).map(move |j| {
                    let bm = params.beta_m(c[j]);
                    if bm == 0.0 || e[i] >= c[j] {
                        0.0
                    } else {
                        bm * kernel.cell_mass(e[i], e[i + 1], c[j]) * dz[j] / dz[i]
                    }
                })
            })
            .collect();
        let low_division = c
            .iter()
            .zip(&dz)
            .map(|(&z, &w)| if z < params.m { params.beta.eval(z) * w } else { 0.0 })
            .collect();
        let v0_rate = params.beta.eval(0.0) - params.mu.eval(0.0);
        Ok(Self {
            grid,
            b_edge,
            loss,
            net,
            frag,
            low_division,
            v0_rate,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Largest local Courant number per unit time step.
    pub fn courant_rate(&self) -> f64 {
        let dz = self.grid.widths();
        (0..dz.len()).map(|k| self.b_edge[k + 1] / dz[k]).fold(0.0, f64::max)
    }

    fn loss_rate_max(&self) -> f64 {
        self.loss.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest step accepted by [`PdeModel::step`].
    pub fn max_dt(&self) -> f64 {
        let r = self.courant_rate().max(self.loss_rate_max());
        if r > 0.0 {
            COURANT_LIMIT / r
        } else {
            f64::INFINITY
        }
    }

    /// `sum (beta_m - mu) u dz`, the exact mass rate of the continuous problem.
    pub fn mass_rate(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(&self.net)
            .zip(self.grid.widths())
            .map(|((a, r), w)| a * r * w)
            .sum()
    }

    pub fn transport(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let dz = self.grid.widths();
        let n = u.len();
        let mut out = vec![0.0; n];
        for k in 0..n {
            let inflow = if k == 0 { 0.0 } else { self.b_edge[k] * u[k - 1] };
            let outflow = if k + 1 == n { 0.0 } else { self.b_edge[k + 1] * u[k] };
            out[k] = u[k] - dt * (outflow - inflow) / dz[k];
        }
        out
    }

    /// Fragmentation source `(W u)_i`.
    pub fn fragmentation(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        self.frag
            .par_chunks(n)
            .map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn reaction(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let gain = self.fragmentation(u);
        u.iter()
            .zip(&self.loss)
            .zip(&gain)
            .map(|((a, l), g)| a + dt * (g - l * a))
            .collect()
    }

    /// Row-major dense matrix of the semi-discrete right-hand side `du/dt = A u`.
    pub fn generator_matrix(&self) -> Vec<f64> {
        let n = self.grid.len();
        let dz = self.grid.widths();
        let mut a = self.frag.clone();
        for k in 0..n {
            let out = if k + 1 == n { 0.0 } else { self.b_edge[k + 1] };
            a[k * n + k] -= out / dz[k] + self.loss[k];
            if k > 0 {
                a[k * n + k - 1] += self.b_edge[k] / dz[k];
            }
        }
        a
    }

    /// One split step. Fails with `CflViolation` when `dt` exceeds [`PdeModel::max_dt`].
    pub fn step(&self, state: &PdeState, dt: f64) -> Result<PdeState> {
        let courant = dt * self.courant_rate().max(self.loss_rate_max());
        if courant > COURANT_LIMIT * (1.0 + 1e-12) {
            return Err(Error::CflViolation {
                courant,
                limit: COURANT_LIMIT,
            });
        }
        let source: f64 = state.u.iter().zip(&self.low_division).map(|(a, w)| a * w).sum();
        let v0 = step_v0(state.v0, self.v0_rate, source, dt);
        let ut = self.transport(&state.u, dt);
        let mut u = self.reaction(&ut, dt);
        for x in &mut u {
            // positivity holds in exact arithmetic; only rounding can go below 0
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        Ok(PdeState {
            u,
            v0,
            t: state.t + dt,
        })
    }
}

/// `v0(t + dt)` for `v0' = rate v0 + source` with the source frozen over the step.
pub fn step_v0(v0: f64, rate: f64, source: f64, dt: f64) -> f64 {
    let x = rate * dt;
    let growth = x.exp();
    // (e^x - 1) / rate, continuous at rate = 0
    let factor = if x.abs() < 1e-300 { dt } else { x.exp_m1() / rate };
    v0 * growth + source * factor
}

#[derive(Debug, Clone)]
pub struct PdeRunOptions {
    pub t_end: f64,
    pub dt_max: f64,
    /// Keep every `stride`-th state (0 keeps only the last).
    pub stride: usize,
}

impl Default for PdeRunOptions {
    fn default() -> Self {
        Self {
            t_end: 60.0,
            dt_max: 0.05,
            stride: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `int u dz` at each recorded time.
    pub mass: Vec<f64>,
    pub v0: Vec<f64>,
    pub snapshots: Vec<PdeState>,
    pub last: PdeState,
    pub dt: f64,
}

/// Runs to `t_end` with a fixed step `min(dt_max, max_dt)`; the final step is shortened.
pub fn simulate(model: &PdeModel, init: PdeState, opts: &PdeRunOptions) -> Result<Trajectory> {
    let dt = opts.dt_max.min(model.max_dt());
    let mut st = init;
    let g = model.grid();
    let mut traj = Trajectory {
        times: vec![st.t],
        mass: vec![g.mass(&st.u)],
        v0: vec![st.v0],
        snapshots: vec![],
        last: st.clone(),
        dt,
    };
    if opts.stride > 0 {
        traj.snapshots.push(st.clone());
    }
    let steps = ((opts.t_end - st.t) / dt).ceil().max(0.0) as usize;
    let t_start = st.t;
    for k in 1..=steps {
        let target = (t_start + k as f64 * dt).min(opts.t_end);
        let h = target - st.t;
        if h <= 0.0 {
            break;
        }
        st = model.step(&st, h)?;
        st.t = target;
        traj.times.push(st.t);
        traj.mass.push(g.mass(&st.u));
        traj.v0.push(st.v0);
        if opts.stride > 0 && k % opts.stride == 0 {
            traj.snapshots.push(st.clone());
        }
    }
    traj.last = st;
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct LongtimeEstimate {
    pub lambda: f64,
    /// Variance of the slopes over eight sub-windows.
    pub slope_variance: f64,
    /// Final `u` scaled to unit integral over `[norm_lo, z0]`.
    pub profile: Vec<f64>,
}

/// Slope of `ln int u dz` over the last `window` time units and the final profile.
pub fn longtime_eigen_estimate(traj: &Trajectory, grid: &Grid, window: f64, norm_lo: f64) -> Result<LongtimeEstimate> {
    let t_end = *traj.times.last().expect("nonempty trajectory");
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.mass)
        .filter(|(t, m)| **t >= t_end - window && **m > 0.0)
        .map(|(t, m)| (*t, m.ln()))
        .collect();
    if pts.len() < 16 {
        return Err(Error::NotConverged(format!(
            "only {} samples in the estimation window",
            pts.len()
        )));
    }
    let lambda = slope(&pts);
    let chunk = pts.len() / 8;
    let slopes: Vec<f64> = pts.chunks(chunk).filter(|c| c.len() >= 2).map(slope).collect();
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let slope_variance = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / slopes.len() as f64;
    if !(slope_variance < 1e-6) {
        return Err(Error::NotConverged(format!(
            "log-mass slope not stationary (variance {slope_variance:e})"
        )));
    }
    let u = &traj.last.u;
    let norm = grid.integrate_range(u, norm_lo, grid.z0());
    if !(norm > 0.0) {
        return Err(Error::NotConverged("final profile has no mass".into()));
    }
    Ok(LongtimeEstimate {
        lambda,
        slope_variance,
        profile: u.iter().map(|x| x / norm).collect(),
    })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
