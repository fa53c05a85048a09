//! Copy-number model: `v_i` cells with `i < n` plasmids and `w_i` cells with
//! `i >= n`, stored together as `x_0, ..., x_N` with `N = floor(z0 / h)`.
//!
//! Cells below the threshold divide into one cell with all plasmids and one
//! with none. Above it, a mother with `j` plasmids produces daughters with `i`
//! plasmids at relative rate `S(i, j) = p(i, j) + p(j - i, j)`; only these pair
//! sums enter the equations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::{ModelParameters, Phi};
use crate::pde::PdeState;
use crate::quadrature::GaussLegendre;

/// Pair sums `S(i, j)` for `n <= j <= N`, each row renormalised to total 2.
#[derive(Debug, Clone)]
pub struct SegregationTable {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl SegregationTable {
    pub fn threshold(&self) -> usize {
        self.n
    }

    pub fn top(&self) -> usize {
        self.n + self.rows.len() - 1
    }

    /// Row `j`, indexed by `i = 0..=j`; `None` below the threshold.
    pub fn row(&self, j: usize) -> Option<&[f64]> {
        if j < self.n {
            None
        } else {
            self.rows.get(j - self.n).map(|r| r.as_slice())
        }
    }
}

/// Builds `S(i, j) = k(ih, jh) h = 2 Phi(i/j) / j` for `0 < i < j` and
/// `S(0, j) = S(j, j) = 0`, then rescales each row to sum to 2. A row whose
/// point values all vanish takes the masses of `Phi` over `[(i - 1/2)/j, (i + 1/2)/j]`
/// for `0 <= i <= j`.
pub fn build_segregation_table(phi: &Phi, n: usize, top: usize) -> Result<SegregationTable> {
    if n < 2 {
        return Err(Error::DomainError(format!("threshold copy number must be at least 2 (got {n})")));
    }
    if top < n {
        return Err(Error::DomainError(format!("top index {top} below threshold {n}")));
    }
    let rows = (n..=top)
        .map(|j| {
            let mut row = vec![0.0; j + 1];
            for (i, r) in row.iter_mut().enumerate().take(j).skip(1) {
                *r = 2.0 * phi.value(i as f64 / j as f64) / j as f64;
            }
            let mut total: f64 = row.iter().sum();
            if total == 0.0 {
                // every point value vanishes (short rows under a gapped density): use bin
                // masses, end bins included, so a mass-free middle sends all to one daughter
                for (i, r) in row.iter_mut().enumerate() {
                    let (a, b) = ((i as f64 - 0.5) / j as f64, (i as f64 + 0.5) / j as f64);
                    *r = (phi.cdf(b) - phi.cdf(a)).max(0.0);
                }
                total = row.iter().sum();
            }
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::DomainError(format!(
                    "segregation row {j} has no admissible daughters (sum {total})"
                )));
            }
            let scale = 2.0 / total;
            row.iter_mut().for_each(|r| *r *= scale);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SegregationTable { n, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub n: usize,
    pub h: f64,
    /// `x_i` for `i = 0..=N`; `x_i = v_i` for `i < n`, `w_i` otherwise.
    pub x: Vec<f64>,
    pub t: f64,
}

impl DiscreteState {
    pub fn v(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn w(&self) -> &[f64] {
        &self.x[self.n..]
    }

    pub fn total(&self) -> f64 {
        self.x.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub n: usize,
    pub h: f64,
    pub z0: f64,
    /// `b(ih) / h`, with `b~(0) = 0` and no growth out of the top index.
    pub growth: Vec<f64>,
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    pub table: SegregationTable,
}

impl DiscreteModel {
    /// The copy-number model with `n h` playing the role of the cutoff `m`.
    pub fn new(params: &ModelParameters, n: usize, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::DomainError(format!("copy scale h must be positive (got {h})")));
        }
        let top = (params.z0 / h + 1e-9).floor() as usize;
        let table = build_segregation_table(&params.kernel.phi, n, top)?;
        let mut growth: Vec<f64> = (0..=top).map(|i| params.b.eval(i as f64 * h).max(0.0) / h).collect();
        growth[0] = 0.0;
        growth[top] = 0.0;
        Ok(Self {
            n,
            h,
            z0: params.z0,
            growth,
            beta: (0..=top).map(|i| params.beta.eval(i as f64 * h)).collect(),
            mu: (0..=top).map(|i| params.mu.eval(i as f64 * h)).collect(),
            table,
        })
    }

    pub fn top(&self) -> usize {
        self.growth.len() - 1
    }

    /// Step size `0.4 / max_i (b~(i) + beta(i) + mu(i))`.
    pub fn default_dt(&self) -> f64 {
        let r = (0..=self.top())
            .map(|i| self.growth[i] + self.beta[i].abs() + self.mu[i].abs())
            .fold(0.0, f64::max);
        if r > 0.0 {
            0.4 / r
        } else {
            1.0
        }
    }

    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let top = self.top();
        let mut dx = vec![0.0; top + 1];
        for i in 0..=top {
            let inflow = if i == 0 { 0.0 } else { self.growth[i - 1] * x[i - 1] };
            let division_loss = if i >= n { self.beta[i] } else { 0.0 };
            dx[i] = inflow - self.growth[i] * x[i] - (self.mu[i] + division_loss) * x[i];
        }
        dx[0] += self.beta[0] * x[0] + (1..n).map(|j| self.beta[j] * x[j]).sum::<f64>();
        for j in n..=top {
            let rate = self.beta[j] * x[j];
            if rate == 0.0 {
                continue;
            }
            let row = self.table.row(j).expect("row above threshold");
            for (d, s) in dx.iter_mut().zip(row) {
                *d += rate * s;
            }
        }
        dx
    }

    /// `sum (beta_i - mu_i) x_i`, the exact rate of change of the total count.
    pub fn total_rate(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, v)| (self.beta[i] - self.mu[i]) * v).sum()
    }

    /// Counts from a density: `x_i = int over [(i - 1/2) h, (i + 1/2) h]` for `i >= 1`, `x_0 = v0`.
    pub fn project(&self, u0: impl Fn(f64) -> f64, v0: f64) -> DiscreteState {
        let rule = GaussLegendre::new(8);
        let top = self.top();
        let mut x = vec![0.0; top + 1];
        x[0] = v0;
        for (i, xi) in x.iter_mut().enumerate().skip(1) {
            let lo = (i as f64 - 0.5) * self.h;
            let hi = if i == top { self.z0 } else { (i as f64 + 0.5) * self.h };
            *xi = rule.integrate(&u0, lo, hi.min(self.z0));
        }
        DiscreteState {
            n: self.n,
            h: self.h,
            x,
            t: 0.0,
        }
    }
}

/// One classical Runge–Kutta step; tiny negative components are clamped to 0.
pub fn step_discrete(state: &DiscreteState, model: &DiscreteModel, dt: f64) -> Result<DiscreteState> {
    if state.x.len() != model.top() + 1 || state.n != model.n {
        return Err(Error::GridMismatch(format!(
            "state has {} bins (threshold {}), model expects {} (threshold {})",
            state.x.len(),
            state.n,
            model.top() + 1,
            model.n
        )));
    }
    let x = &state.x;
    let add = |a: &[f64], k: &[f64], c: f64| -> Vec<f64> { a.iter().zip(k).map(|(p, q)| p + c * q).collect() };
    let k1 = model.rhs(x);
    let k2 = model.rhs(&add(x, &k1, 0.5 * dt));
    let k3 = model.rhs(&add(x, &k2, 0.5 * dt));
    let k4 = model.rhs(&add(x, &k3, dt));
    let scale = x.iter().cloned().fold(1.0, f64::max);
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let v = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if v < -1e-6 * scale {
            return Err(Error::StabilityError { index: i, value: v });
        }
        out.push(v.max(0.0));
    }
    Ok(DiscreteState {
        n: state.n,
        h: state.h,
        x: out,
        t: state.t + dt,
    })
}

/// Fixed steps of [`DiscreteModel::default_dt`] up to `t_end`.
pub fn simulate_discrete(model: &DiscreteModel, init: DiscreteState, t_end: f64) -> Result<DiscreteState> {
    let dt = model.default_dt();
    let t0 = init.t;
    let steps = ((t_end - t0) / dt).ceil().max(0.0) as usize;
    let mut st = init;
    for k in 1..=steps {
        let target = (t0 + k as f64 * dt).min(t_end);
        let h = target - st.t;
        if h <= 0.0 {
            break;
        }
        st = step_discrete(&st, model, h)?;
        st.t = target;
    }
    Ok(st)
}

/// L1 distance between the counts and the bin masses of a continuum state,
/// plus the plasmid-free mismatch `|x_0 - v0|`.
pub fn continuum_limit_error(discrete: &DiscreteState, grid: &Grid, pde: &PdeState) -> Result<f64> {
    if (discrete.t - pde.t).abs() > 1e-9 * (1.0 + pde.t.abs()) {
        return Err(Error::GridMismatch(format!(
            "discrete state at t = {} but continuum state at t = {}",
            discrete.t, pde.t
        )));
    }
    if grid.len() != pde.u.len() {
        return Err(Error::GridMismatch("continuum state does not match its grid".into()));
    }
    let top = discrete.x.len() - 1;
    let z0 = grid.z0();
    if (top as f64) * discrete.h > z0 * (1.0 + 1e-9) {
        return Err(Error::GridMismatch(format!(
            "discrete bins reach {} beyond the cap {z0}",
            top as f64 * discrete.h
        )));
    }
    let h = discrete.h;
    let mut err = (discrete.x[0] - pde.v0).abs() + grid.integrate_range(&pde.u, 0.0, 0.5 * h);
    for i in 1..=top {
        let lo = (i as f64 - 0.5) * h;
        let hi = if i == top { z0 } else { (i as f64 + 0.5) * h };
        err += (discrete.x[i] - grid.integrate_range(&pde.u, lo, hi)).abs();
    }
    Ok(err)
}

/// Discrete runs at the given `(n, h)` levels, each compared with a continuum
/// reference at `t_end`. Levels run in parallel.
pub fn refinement_errors(
    params: &ModelParameters,
    levels: &[(usize, f64)],
    u0: &(dyn Fn(f64) -> f64 + Sync),
    v0: f64,
    t_end: f64,
    grid: &Grid,
    reference: &PdeState,
) -> Result<Vec<f64>> {
    levels
        .par_iter()
        .map(|&(n, h)| {
            let model = DiscreteModel::new(params, n, h)?;
            let init = model.project(u0, v0);
            let end = simulate_discrete(&model, init, t_end)?;
            continuum_limit_error(&end, grid, reference)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RateFunction;

    #[test]
    fn uniform_rows_before_and_after_renormalisation() {
        let t = build_segregation_table(&Phi::Uniform, 2, 10).unwrap();
        let row = t.row(10).unwrap();
        // raw entries 0.2 for i = 1..9 sum to 1.8 and are scaled to 2
        for &s in &row[1..10] {
            assert!((s - 2.0 / 9.0).abs() < 1e-15);
        }
        assert_eq!(row[0], 0.0);
        assert_eq!(row[10], 0.0);
        assert!(t.row(1).is_none());
    }

    #[test]
    fn narrow_modes_fall_back_to_end_bins() {
        let t = build_segregation_table(&Phi::bimodal(0.9, 0.05).unwrap(), 2, 6).unwrap();
        let row = t.row(2).unwrap();
        assert_eq!(row[1], 0.0);
        assert!((row[0] - 1.0).abs() < 1e-12 && (row[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_two_and_pair_up() {
        let t = build_segregation_table(&Phi::bimodal_default(), 3, 80).unwrap();
        for j in 3..=80 {
            let row = t.row(j).unwrap();
            assert!((row.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            for i in 0..=j {
                assert!((row[i] - row[j - i]).abs() < 1e-12);
            }
        }
    }

    fn params(beta: f64, mu: f64, b0: f64) -> ModelParameters {
        let b = if b0 == 0.0 {
            RateFunction::Constant(0.0)
        } else {
            RateFunction::LogisticGrowth { b0, z0: 1.0 }
        };
        ModelParameters::new(
            b,
            RateFunction::Constant(beta),
            RateFunction::Constant(mu),
            Phi::Uniform,
            0.05,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn no_rates_no_change() {
        let m = DiscreteModel::new(&params(0.0, 0.0, 0.0), 2, 0.025).unwrap();
        let s0 = m.project(|z| z * (1.0 - z), 0.5);
        let s1 = step_discrete(&s0, &m, 0.1).unwrap();
        assert_eq!(s0.x, s1.x);
    }

    #[test]
    fn pure_death_is_exponential_per_bin() {
        let m = DiscreteModel::new(&params(0.0, 0.7, 0.0), 2, 0.025).unwrap();
        let s0 = m.project(|z| 1.0 + z, 0.5);
        let mut s1 = s0.clone();
        for _ in 0..1000 {
            s1 = step_discrete(&s1, &m, 1e-3).unwrap();
        }
        for (a, b) in s0.x.iter().zip(&s1.x) {
            assert!((b - a * (-0.7f64).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn single_divisible_bin_doubles_at_division_rate() {
        let m = DiscreteModel::new(&params(0.4, 0.0, 0.0), 2, 0.025).unwrap();
        let mut x = vec![0.0; m.top() + 1];
        x[30] = 1.0;
        let dx = m.rhs(&x);
        assert!((dx.iter().sum::<f64>() - 0.4).abs() < 1e-14);
    }

    #[test]
    fn total_count_rate_matches_bookkeeping() {
        let m = DiscreteModel::new(&params(0.4, 0.1, 1.0), 2, 0.025).unwrap();
        let s0 = m.project(|z| (z * (1.0 - z)).powi(2) * 30.0, 0.2);
        let dt = 1e-4;
        let s1 = step_discrete(&s0, &m, dt).unwrap();
        let fd = (s1.total() - s0.total()) / dt;
        let exact = 0.5 * (m.total_rate(&s0.x) + m.total_rate(&s1.x));
        assert!((fd - exact).abs() < 1e-6 * s0.total().max(1.0), "{fd} vs {exact}");
    }

    #[test]
    fn projection_is_consistent_at_time_zero() {
        let p = params(0.4, 0.1, 1.0);
        let m = DiscreteModel::new(&p, 2, 0.025).unwrap();
        let u0 = |z: f64| if z > 0.2 && z < 0.8 { ((z - 0.2) * (0.8 - z)).powi(2) * 1e3 } else { 0.0 };
        let s = m.project(u0, 0.2);
        let g = Grid::uniform(4000, 1.0).unwrap();
        let ps = PdeState::project(&g, u0, 0.2);
        assert!(continuum_limit_error(&s, &g, &ps).unwrap() < 1e-5);
    }
}
