//! Dominant eigenpair for general rates through the regularised operator
//!
//! `G[f](z) = int_0^z0 int_{z'}^z0 kappa_eps(z, y) f(z') exp(-int_{z'}^y (lambda + B_eps)/b) / b(y) dy dz'`
//!
//! with `B_eps = beta_m + mu + eps` and `kappa_eps = beta_m(y) k(z, y) + 2 eps / z0`.
//! `G` factors as `K R`: `R` maps `f` to `U(y) = (1/b) int_0^y f(z') exp(..) dz'`
//! and `K` integrates `U` against `kappa_eps`. On a cell grid `f` is piecewise
//! constant, `lambda + B_eps` is frozen per cell and the weight `W = int dz/b`
//! is kept exact, so `R` reduces to a two-term recursion over cells.
//! The eigenvalue is the `lambda` with `r(G) = 1`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::FlowMap;
use crate::grid::Grid;
use crate::params::ModelParameters;
use crate::pde::PdeModel;
use crate::quadrature::GaussLegendre;

const CELL_NODES: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 10_000,
        }
    }
}

/// Power iteration in the sup norm. Returns `(r, x, iterations)` with `max x = 1`.
pub fn spectral_radius<A>(apply: A, init: &[f64], opts: PowerOptions) -> Result<(f64, Vec<f64>, usize)>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut x: Vec<f64> = init.to_vec();
    let s = sup(&x);
    if !(s > 0.0) {
        x = vec![1.0; init.len()];
    } else {
        x.iter_mut().for_each(|v| *v /= s);
    }
    let mut last_ratio = f64::NAN;
    for it in 1..=opts.max_iter {
        let y = apply(&x);
        let r = sup(&y);
        if !r.is_finite() {
            return Err(Error::QuadratureFailure("operator image is not finite".into()));
        }
        if r == 0.0 {
            return Ok((0.0, x, it));
        }
        let y: Vec<f64> = y.iter().map(|v| v / r).collect();
        let diff = y.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        last_ratio = diff;
        x = y;
        if diff < opts.tol {
            return Ok((r, x, it));
        }
    }
    Err(Error::SlowConvergence {
        iterations: opts.max_iter,
        ratio: last_ratio,
    })
}

/// Grid data that does not depend on `lambda` or `eps`.
#[derive(Debug, Clone)]
pub struct OperatorModel {
    params: ModelParameters,
    grid: Grid,
    /// Weight potential at the edges; `-inf` at 0 and `+inf` at z0.
    w_edge: Vec<f64>,
    /// Per cell: (node weight, potential at node).
    nodes: Vec<[(f64, f64); CELL_NODES]>,
    loss: Vec<f64>,
    /// Row-major: average over cell `i` of `int beta_m k` from unit mass at the center of cell `j`.
    kernel: Vec<f64>,
}

/// `R` at fixed `lambda` and `eps`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub lambda: f64,
    pub epsilon: f64,
    tau: Vec<f64>,
    a: Vec<f64>,
    sigma: Vec<f64>,
    rho: Vec<f64>,
}

impl Resolvent {
    /// Cell masses of `U` for cell averages `f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut v = 0.0;
        let mut out = Vec::with_capacity(f.len());
        for k in 0..f.len() {
            out.push(v * self.a[k] + f[k] * self.rho[k]);
            v = v * self.tau[k] + f[k] * self.sigma[k];
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct LambdaSearch {
    pub lambda: f64,
    pub r: f64,
    pub psi: Vec<f64>,
    /// `(lambda, r)` at every evaluation, in evaluation order.
    pub history: Vec<(f64, f64)>,
    /// r decreased in lambda across all evaluations.
    pub monotone: bool,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Richardson value `(10 lambda(eps/10) - lambda(eps)) / 9` from the last two levels.
    pub lambda_extrapolated: f64,
    pub grid: Grid,
    /// Cell averages of `U`, unit integral over `[norm_lo, z0]`.
    pub u: Vec<f64>,
    /// Cell averages of `Psi`, sup norm 1.
    pub psi: Vec<f64>,
    pub epsilon_history: Vec<(f64, f64)>,
    /// `max |Psi - K U| / max Psi` before normalising `U`.
    pub closure_residual: f64,
    pub power_residual: f64,
}

impl EigenPair {
    pub fn u_at(&self, z: f64) -> f64 {
        self.u[self.grid.locate(z)]
    }
}

impl OperatorModel {
    pub fn new(params: &ModelParameters, grid: Grid) -> Result<Self> {
        if (grid.z0() - params.z0).abs() > 1e-12 * params.z0 {
            return Err(Error::GridMismatch(format!(
                "grid ends at {} but the model cap is {}",
                grid.z0(),
                params.z0
            )));
        }
        let flow = FlowMap::new(&params.b, params.z0);
        let e = grid.edges();
        let n = grid.len();
        let mut w_edge: Vec<f64> = e.iter().map(|&x| flow.potential(x)).collect();
        w_edge[0] = f64::NEG_INFINITY;
        w_edge[n] = f64::INFINITY;
        let rule = GaussLegendre::new(CELL_NODES);
        let nodes: Vec<[(f64, f64); CELL_NODES]> = e
            .par_windows(2)
            .map(|w| {
                let mut cell = [(0.0, 0.0); CELL_NODES];
                for (slot, (x, wt)) in cell.iter_mut().zip(rule.mapped(w[0], w[1])) {
                    *slot = (wt, flow.potential(x));
                }
                cell
            })
            .collect();
        if let Some(bad) = nodes.iter().flatten().find(|p| !p.1.is_finite()) {
            return Err(Error::NonFiniteEvaluation {
                what: "weight potential".into(),
                z: bad.1,
            });
        }
        let c = grid.centers();
        let dz = grid.widths();
        let loss = c.iter().map(|&z| params.loss_rate(z)).collect();
        let kernel: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..n).map(move |j| {
                    let bm = params.beta_m(c[j]);
                    if bm == 0.0 || e[i] >= c[j] {
                        0.0
                    } else {
                        bm * params.kernel.cell_mass(e[i], e[i + 1], c[j]) / dz[i]
                    }
                })
            })
            .collect();
        Ok(Self {
            params: params.clone(),
            grid,
            w_edge,
            nodes,
            loss,
            kernel,
        })
    }

    /// Reference layout: graded grid of `cells` cells with the cutoff as an edge.
    pub fn graded(params: &ModelParameters, cells: usize) -> Result<Self> {
        Self::new(params, Grid::graded(cells, params.z0, Some(params.m))?)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    /// Bisection bracket `[-mu_hi + 1e-9, 2 beta_hi + 2 eps - beta_lo - mu_lo]`.
    pub fn bracket(&self, epsilon: f64) -> (f64, f64) {
        let b = self.params.bounds();
        (-b.mu_hi + 1e-9, 2.0 * b.beta_hi + 2.0 * epsilon - b.beta_lo - b.mu_lo)
    }

    /// Assembles `R` for `lambda + B_eps`. Fails when the rate is not positive in
    /// the last cell, where the weight is not integrable.
    pub fn resolvent(&self, lambda: f64, epsilon: f64) -> Result<Resolvent> {
        let n = self.grid.len();
        let dz = self.grid.widths();
        let mut r = Resolvent {
            lambda,
            epsilon,
            tau: vec![0.0; n],
            a: vec![0.0; n],
            sigma: vec![0.0; n],
            rho: vec![0.0; n],
        };
        for k in 0..n {
            let q = lambda + epsilon + self.loss[k];
            let top = self.w_edge[k + 1];
            if k + 1 == n {
                if !(q > 0.0) {
                    return Err(Error::QuadratureFailure(format!(
                        "lambda = {lambda} leaves a non-decaying weight at z0 (rate {q})"
                    )));
                }
                // U integrated up to z0 absorbs everything that enters the last cell
                r.a[k] = 1.0 / q;
                r.rho[k] = dz[k] / q;
                continue;
            }
            let dw = top - self.w_edge[k];
            r.tau[k] = if dw.is_infinite() { 0.0 } else { (-q * dw).exp() };
            r.a[k] = if dw.is_infinite() { 0.0 } else { expm1_ratio(q, dw) };
            let (mut s, mut p) = (0.0, 0.0);
            for &(wt, wn) in &self.nodes[k] {
                let d = top - wn;
                s += wt * (-q * d).exp();
                p += wt * expm1_ratio(q, d);
            }
            r.sigma[k] = s;
            r.rho[k] = p;
        }
        if r.rho.iter().chain(&r.sigma).chain(&r.a).any(|v| !v.is_finite()) {
            return Err(Error::QuadratureFailure(format!("non-finite weights at lambda = {lambda}")));
        }
        Ok(r)
    }

    /// Cell averages of `K U` for cell masses `mass`.
    pub fn apply_k(&self, mass: &[f64], epsilon: f64) -> Vec<f64> {
        let n = mass.len();
        let extra = 2.0 * epsilon / self.params.z0 * mass.iter().sum::<f64>();
        self.kernel
            .par_chunks(n)
            .map(|row| row.iter().zip(mass).map(|(a, b)| a * b).sum::<f64>() + extra)
            .collect()
    }

    /// `G f = K R f` on cell averages.
    pub fn apply_g(&self, res: &Resolvent, f: &[f64]) -> Vec<f64> {
        self.apply_k(&res.apply(f), res.epsilon)
    }

    pub fn radius(&self, lambda: f64, epsilon: f64, warm: &[f64]) -> Result<(f64, Vec<f64>)> {
        let res = self.resolvent(lambda, epsilon)?;
        let (r, psi, _) = spectral_radius(|f| self.apply_g(&res, f), warm, PowerOptions::default())?;
        Ok((r, psi))
    }

    /// Bisection for `r(G_lambda^eps) = 1` to `|r - 1| < 1e-8`.
    pub fn find_lambda(&self, epsilon: f64, warm: Option<&[f64]>) -> Result<LambdaSearch> {
        let (mut lo, mut hi) = self.bracket(epsilon);
        let bracket = (lo, hi);
        let n = self.grid.len();
        let mut psi = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![1.0; n]);
        let mut history = vec![];
        let (r_lo, p) = self.radius(lo, epsilon, &psi)?;
        history.push((lo, r_lo));
        if r_lo < 1.0 {
            return Err(Error::BracketFailure(format!(
                "r = {r_lo} < 1 at the lower end lambda = {lo}"
            )));
        }
        let (r_hi, _) = self.radius(hi, epsilon, &p)?;
        history.push((hi, r_hi));
        if r_hi > 1.0 {
            return Err(Error::BracketFailure(format!(
                "r = {r_hi} > 1 at the upper end lambda = {hi}"
            )));
        }
        psi = p;
        let mut best = (lo, r_lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (r, p) = self.radius(mid, epsilon, &psi)?;
            history.push((mid, r));
            psi = p;
            best = (mid, r);
            if (r - 1.0).abs() < 1e-8 || hi - lo < 1e-15 {
                break;
            }
            if r > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut sorted = history.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let monotone = sorted.windows(2).all(|w| w[1].1 < w[0].1 || w[1].0 == w[0].0);
        Ok(LambdaSearch {
            lambda: best.0,
            r: best.1,
            psi,
            history,
            monotone,
            bracket,
        })
    }

    /// Runs the schedule (decreasing `eps`), extrapolates, then solves at `eps = 0`
    /// from the last eigenvector and recovers `U = R Psi`.
    pub fn continue_epsilon(&self, schedule: &[f64], norm_lo: f64) -> Result<EigenPair> {
        if schedule.len() < 3 {
            return Err(Error::Config("epsilon schedule needs at least three levels".into()));
        }
        let mut history = vec![];
        let mut warm: Option<Vec<f64>> = None;
        for &eps in schedule {
            let s = self.find_lambda(eps, warm.as_deref())?;
            history.push((eps, s.lambda));
            warm = Some(s.psi);
        }
        let k = history.len();
        let d1 = (history[k - 3].1 - history[k - 2].1).abs();
        let d2 = (history[k - 2].1 - history[k - 1].1).abs();
        if d2 > d1 && d2 > 1e-10 {
            return Err(Error::NonCauchy(format!(
                "successive differences {d1:e} then {d2:e} across eps = {:?}",
                &schedule[k - 3..]
            )));
        }
        let (e1, l1) = history[k - 2];
        let (e2, l2) = history[k - 1];
        let ratio = e1 / e2;
        let extrapolated = (ratio * l2 - l1) / (ratio - 1.0);

        let polish = self.find_lambda(0.0, warm.as_deref())?;
        history.push((0.0, polish.lambda));
        let lambda = polish.lambda;
        let bd = self.params.bounds();
        if !(lambda >= bd.lambda_min() - 1e-9 && lambda <= bd.lambda_max() + 1e-9) {
            return Err(Error::BracketFailure(format!(
                "lambda = {lambda} outside [{}, {}]",
                bd.lambda_min(),
                bd.lambda_max()
            )));
        }
        let res = self.resolvent(lambda, 0.0)?;
        let psi = polish.psi;
        let mass = res.apply(&psi);
        let k_u = self.apply_k(&mass, 0.0);
        let psi_max = psi.iter().cloned().fold(0.0, f64::max);
        let closure = k_u
            .iter()
            .zip(&psi)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / psi_max;
        let power_residual = (polish.r - 1.0).abs();
        let dz = self.grid.widths();
        let mut u: Vec<f64> = mass.iter().zip(dz).map(|(m, w)| m / w).collect();
        let norm = self.grid.integrate_range(&u, norm_lo, self.grid.z0());
        if !(norm > 0.0) {
            return Err(Error::NotConverged("eigenfunction has no mass in the window".into()));
        }
        u.iter_mut().for_each(|v| *v /= norm);
        Ok(EigenPair {
            lambda,
            lambda_extrapolated: extrapolated,
            grid: self.grid.clone(),
            u,
            psi,
            epsilon_history: history,
            closure_residual: closure,
            power_residual,
        })
    }

    /// Dense `T = R_xi K` on cell masses, the operator `T_xi` expressed for `U = v / b`.
    pub fn t_xi_matrix(&self, xi: f64) -> Result<DMatrix<f64>> {
        let res = self.resolvent(xi, 0.0)?;
        let n = self.grid.len();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let col: Vec<f64> = (0..n).map(|i| self.kernel[i * n + j]).collect();
                res.apply(&col)
            })
            .collect();
        Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    /// Spectral radius of `T_xi`.
    pub fn t_xi_radius(&self, xi: f64) -> Result<f64> {
        let res = self.resolvent(xi, 0.0)?;
        let n = self.grid.len();
        let (r, _, _) = spectral_radius(|m| res.apply(&self.apply_k(m, 0.0)), &vec![1.0; n], PowerOptions::default())?;
        Ok(r)
    }

    /// Norm of `T_xi` on the weighted space `int |v| / b`, i.e. the largest column sum on masses.
    pub fn t_xi_norm(&self, xi: f64) -> Result<f64> {
        let t = self.t_xi_matrix(xi)?;
        Ok((0..t.ncols()).map(|j| t.column(j).sum()).fold(0.0, f64::max))
    }
}

/// `(1 - exp(-q d)) / q`, continuous at `q = 0`.
fn expm1_ratio(q: f64, d: f64) -> f64 {
    if q == 0.0 {
        d
    } else {
        -(-q * d).exp_m1() / q
    }
}

#[derive(Debug, Clone)]
pub struct DominanceReport {
    pub lambda_d: f64,
    pub lambda_d_imag: f64,
    /// `lambda_d - max Re` over the rest of the spectrum.
    pub gap: f64,
    pub threshold: f64,
    pub next_real_part: f64,
    pub eigenvector: Vec<f64>,
    pub eigenvector_nonnegative: bool,
    pub spectrum: Vec<(f64, f64)>,
}

impl DominanceReport {
    pub fn dominant(&self) -> bool {
        self.gap > self.threshold && self.lambda_d_imag.abs() < 1e-8 && self.eigenvector_nonnegative
    }
}

/// Full spectrum of the finite-volume generator and a check that its rightmost
/// eigenvalue is real, simple and separated.
pub fn spectrum_dominance_check(params: &ModelParameters, grid: Grid) -> Result<DominanceReport> {
    let model = PdeModel::new(params, grid)?;
    let n = model.grid().len();
    let a = DMatrix::from_row_slice(n, n, &model.generator_matrix());
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-14, 100_000)
        .ok_or_else(|| Error::DegenerateDominance("Schur iteration did not converge".into()))?;
    let eig = schur.complex_eigenvalues();
    let mut spectrum: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    spectrum.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
    let (lambda_d, lambda_d_imag) = spectrum[0];
    let next_real_part = spectrum[1].0;
    let gap = lambda_d - next_real_part;
    let bd = params.bounds();
    let threshold = 1e-3 * (bd.beta_hi + bd.mu_hi);
    if gap <= threshold {
        return Err(Error::DegenerateDominance(format!(
            "rightmost eigenvalues {lambda_d} and {next_real_part} are within {threshold:e}"
        )));
    }
    let eigenvector = inverse_iteration(&a, lambda_d)?;
    let max = eigenvector.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eigenvector.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DominanceReport {
        lambda_d,
        lambda_d_imag,
        gap,
        threshold,
        next_real_part,
        eigenvector_nonnegative: min > -1e-8 * max,
        eigenvector,
        spectrum,
    })
}

/// Eigenvector for a simple real eigenvalue, sign fixed so the largest entry is positive.
fn inverse_iteration(a: &DMatrix<f64>, lambda: f64) -> Result<Vec<f64>> {
    let n = a.nrows();
    let shift = lambda + 1e-9 * (1.0 + lambda.abs());
    let lu = (a - DMatrix::identity(n, n) * shift).lu();
    let mut x = DVector::from_element(n, 1.0);
    for _ in 0..6 {
        x = lu
            .solve(&x)
            .ok_or_else(|| Error::DegenerateDominance("shifted generator is singular".into()))?;
        let s = x.amax();
        x /= s;
    }
    let peak = x.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if peak < 0.0 {
        x = -x;
    }
    let s = x.amax();
    Ok(x.iter().map(|v| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Phi, RateFunction};

    #[test]
    fn power_iteration_on_a_known_matrix() {
        let m = [[2.0, 1.0], [1.0, 2.0]];
        let apply = |x: &[f64]| vec![m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]];
        let (r, v, _) = spectral_radius(apply, &[1.0, 0.0], PowerOptions::default()).unwrap();
        assert!((r - 3.0).abs() < 1e-10);
        assert!((v[0] - 1.0).abs() < 1e-10 && (v[1] - 1.0).abs() < 1e-10);
        let (r2, v2, _) = spectral_radius(|x| apply(x).iter().map(|y| 2.5 * y).collect(), &[1.0, 0.0], PowerOptions::default()).unwrap();
        assert!((r2 - 7.5).abs() < 1e-9);
        assert!((v2[0] - v[0]).abs() < 1e-10);
    }

    #[test]
    fn resolvent_matches_quadrature_for_constant_input() {
        // U = R 1 for logistic b and constant rate q: U(y) = (1/b) int_0^y exp(-q (W(y) - W(z'))) dz'
        let p = ModelParameters::reference(Phi::Uniform);
        let op = OperatorModel::graded(&p, 64).unwrap();
        let lambda = 0.2;
        let res = op.resolvent(lambda, 0.0).unwrap();
        let mass = res.apply(&vec![1.0; 64]);
        let flow = FlowMap::new(&p.b, 1.0);
        let k = 40;
        let (lo, hi) = (op.grid().edges()[k], op.grid().edges()[k + 1]);
        let u = |y: f64| {
            let inner = crate::quadrature::adaptive(
                |zp| (-integral_rate(&p, &flow, lambda, zp, y)).exp(),
                0.0,
                y,
                crate::quadrature::AdaptiveOptions::abs(1e-12),
            )
            .value;
            inner / p.b.eval(y)
        };
        let want = crate::quadrature::adaptive(u, lo, hi, crate::quadrature::AdaptiveOptions::abs(1e-11)).value;
        assert!((mass[k] - want).abs() < 1e-7 * want, "{} vs {want}", mass[k]);
    }

    fn integral_rate(p: &ModelParameters, flow: &FlowMap, lambda: f64, x: f64, y: f64) -> f64 {
        if x <= 0.0 {
            return f64::INFINITY;
        }
        flow.integral_over_b(x, y, &|s| lambda + p.loss_rate(s))
    }

    #[test]
    fn g_is_positive_and_bounded_in_mass() {
        let p = ModelParameters::reference(Phi::symmetric_beta(2.0).unwrap());
        let op = OperatorModel::graded(&p, 128).unwrap();
        let eps = 1e-3;
        let lambda = 0.1;
        let res = op.resolvent(lambda, eps).unwrap();
        let f = vec![1.0; 128];
        let g = op.apply_g(&res, &f);
        assert!(g.iter().all(|&v| v > 0.0));
        let bd = p.bounds();
        let bound = (2.0 * bd.beta_hi + 2.0 * eps) / (lambda + bd.beta_lo + bd.mu_lo);
        let mass_g = op.grid().mass(&g);
        let mass_f = op.grid().mass(&f);
        assert!(mass_g <= bound * mass_f * (1.0 + 1e-6), "{mass_g} vs {}", bound * mass_f);
    }

    #[test]
    fn bracket_endpoints_straddle_one() {
        let p = ModelParameters::reference(Phi::Uniform);
        let op = OperatorModel::graded(&p, 128).unwrap();
        let (lo, hi) = op.bracket(1e-3);
        let n = op.grid().len();
        let (r_lo, _) = op.radius(lo, 1e-3, &vec![1.0; n]).unwrap();
        let (r_hi, _) = op.radius(hi, 1e-3, &vec![1.0; n]).unwrap();
        assert!(r_lo >= 2.0 - 1e-3, "{r_lo}");
        assert!(r_hi <= 1.0, "{r_hi}");
    }

    #[test]
    fn death_shift_moves_lambda() {
        let p = ModelParameters::reference(Phi::Uniform);
        let q = p.clone().with_mu(RateFunction::Constant(0.25)).unwrap();
        let a = OperatorModel::graded(&p, 128).unwrap().find_lambda(1e-3, None).unwrap();
        let b = OperatorModel::graded(&q, 128).unwrap().find_lambda(1e-3, None).unwrap();
        assert!(((a.lambda - b.lambda) - 0.15).abs() < 2e-3);
        assert!(a.monotone && b.monotone);
    }

    #[test]
    fn dominance_on_small_grid() {
        let p = ModelParameters::reference(Phi::symmetric_beta(2.0).unwrap());
        let rep = spectrum_dominance_check(&p, Grid::graded(64, 1.0, Some(p.m)).unwrap()).unwrap();
        assert!(rep.dominant(), "{:?}", (rep.lambda_d, rep.next_real_part));
        assert!((rep.lambda_d - 0.3).abs() < 0.05);
    }
}
