//! Eigenfunction for constant rates and logistic growth by marching a
//! Banach fixed-point iteration from `z0` down to the cutoff.
//!
//! With `v = b U` and the ansatz `v = (z0 - z)^alpha g`, `g(z0) = 1`, the
//! eigenproblem becomes
//!
//! `g' + (alpha/z) g = alpha z0 (z0 - z)^-alpha int_z^z0 Phi(z/z') z'^-2 (z0 - z')^(alpha-1) g(z') dz'`
//!
//! and variation of parameters on `[a - delta, a]` gives
//!
//! `g(x) = (a/x)^alpha g(a) - alpha z0 x^-alpha int_x^a F(z) dz`,
//! `F(z) = (z / (z0 - z))^alpha int_z^z0 Phi(z/z') z'^-2 (z0 - z')^(alpha-1) g(z') dz'`.
//!
//! The part of the inner integral over `[a, z0]` is known from earlier
//! intervals. `delta` is chosen so that the remaining map is a contraction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{ModelParameters, Phi};
use crate::quadrature::{adaptive, AdaptiveOptions, GaussLegendre};

const STENCIL: usize = 6;
/// Nodes per sample sub-interval for the outer integral.
const OUTER_NODES: usize = 6;
/// Nodes for the inner integral over `[z, a]`.
const INNER_NODES: usize = 10;
/// Nodes per finished interval in the tail tables.
const TAIL_NODES: usize = 8;
/// Panels and nodes for integrals touching the singular end `z0`.
const END_PANELS: usize = 8;
const END_NODES: usize = 16;
const STALL_LIMIT: usize = 5;

#[derive(Debug, Clone)]
pub struct FixedPointConfig {
    /// Stop when the sup-norm of successive iterates is below this.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_max_steps: usize,
    /// Added to the `delta` that makes the contraction bound equal one; the
    /// bound is then re-checked against `1 - delta_guard`.
    pub delta_guard: f64,
    /// Sample spacing target as a fraction of `z0`.
    pub sample_spacing: f64,
    pub min_samples: usize,
    /// Lower end of the normalisation window (raised to `m` if below it).
    pub norm_lo: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            inner_tol: 1e-6,
            inner_max_iter: 100,
            outer_max_steps: 1000,
            delta_guard: 1e-5,
            sample_spacing: 0.05,
            min_samples: 16,
            norm_lo: 0.005,
        }
    }
}

/// The sup-norm bound on the interval map over `[a - delta, a]`.
pub fn contraction_bound(a: f64, delta: f64, alpha: f64, phi_sup: f64, z0: f64) -> f64 {
    if delta >= a {
        return f64::INFINITY;
    }
    let r = a / (a - delta);
    if (alpha - 1.0).abs() < 1e-9 {
        z0 * phi_sup * r.ln() / (a - delta)
    } else {
        z0 / ((alpha - 1.0).abs() * a) * phi_sup * (r - r.powf(alpha)).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaStep {
    pub delta: f64,
    /// Contraction bound at `delta`.
    pub bound: f64,
    /// The guarded value failed the re-check and was shrunk.
    pub shrunk: bool,
    /// Cut so the interval ends at the cutoff.
    pub capped: bool,
}

/// Step size making the interval map a contraction with constant `1 - guard`.
pub fn delta_step(a: f64, alpha: f64, phi_sup: f64, z0: f64, guard: f64, m: f64) -> Result<DeltaStep> {
    if !(a > 0.0 && a <= z0) || !(alpha > 0.0) {
        return Err(Error::DomainError(format!("delta_step needs 0 < a <= z0 and alpha > 0 (a = {a}, alpha = {alpha})")));
    }
    let bound = |d: f64| contraction_bound(a, d, alpha, phi_sup, z0);
    // bound is increasing in delta and blows up as delta -> a
    let root = |target: f64| {
        let (mut lo, mut hi) = (0.0, a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bound(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * a {
                break;
            }
        }
        lo
    };
    let mut delta = root(1.0) + guard;
    let mut shrunk = false;
    if delta >= a || bound(delta) > 1.0 - guard {
        delta = root(1.0 - guard);
        shrunk = true;
    }
    let mut capped = false;
    if a - delta < m && a > m {
        delta = a - m;
        capped = true;
    }
    if delta < 1e-12 {
        return Err(Error::StepUnderflow { a, delta });
    }
    Ok(DeltaStep {
        delta,
        bound: bound(delta),
        shrunk,
        capped,
    })
}

/// `g` sampled at equidistant points of `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub g: Vec<f64>,
}

impl Piece {
    fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.g.len() - 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        let n = self.g.len() - 1;
        (0..=n).map(move |i| if i == n { self.hi } else { self.lo + i as f64 * h })
    }

    /// Local Lagrange interpolation on six neighbouring samples.
    pub fn eval(&self, t: f64) -> f64 {
        let (i0, u) = self.stencil(t);
        let mut s = 0.0;
        for j in 0..STENCIL {
            let mut l = 1.0;
            for k in 0..STENCIL {
                if k != j {
                    l *= (u - k as f64) / (j as f64 - k as f64);
                }
            }
            s += l * self.g[i0 + j];
        }
        s
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (i0, u) = self.stencil(t);
        let mut s = 0.0;
        for j in 0..STENCIL {
            let denom: f64 = (0..STENCIL).filter(|&k| k != j).map(|k| j as f64 - k as f64).product();
            let mut dl = 0.0;
            for skip in 0..STENCIL {
                if skip == j {
                    continue;
                }
                let p: f64 = (0..STENCIL).filter(|&k| k != j && k != skip).map(|k| u - k as f64).product();
                dl += p;
            }
            s += dl / denom * self.g[i0 + j];
        }
        s / self.step()
    }

    fn stencil(&self, t: f64) -> (usize, f64) {
        let n = self.g.len() - 1;
        let pos = (t - self.lo) / self.step();
        let i0 = (pos.floor() as isize - (STENCIL as isize / 2 - 1)).clamp(0, (n + 1 - STENCIL) as isize) as usize;
        (i0, pos - i0 as f64)
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub a: f64,
    pub delta: f64,
    pub bound: f64,
    pub samples: usize,
    pub iterations: usize,
    pub last_difference: f64,
    /// Largest ratio of successive sup-norm differences.
    pub contraction_ratio: f64,
    pub converged: bool,
    /// Step widened to respect the outer step budget; no contraction guarantee.
    pub widened: bool,
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub steps: Vec<StepRecord>,
    /// Largest jump of `g` across interval ends.
    pub continuity_mismatch: f64,
    /// `max |g' + (alpha/x) g - rhs|` at interior samples.
    pub residual_g: f64,
    /// Same, relative to `max(|g'|, alpha g / x)` pointwise.
    pub residual_g_relative: f64,
    /// Residual of the `v` equation over the largest of its terms.
    pub residual_v: f64,
    /// `int_{norm_lo}^z0 U` before normalising (with `g(z0) = 1`).
    pub raw_mass: f64,
}

impl FixedPointReport {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }

    pub fn unconverged_steps(&self) -> usize {
        self.steps.iter().filter(|s| !s.converged).count()
    }
}

/// `g` on `[m, z0]` together with the normalised eigenfunction.
#[derive(Debug, Clone)]
pub struct PiecewiseSolution {
    pub lambda: f64,
    pub alpha: f64,
    pub z0: f64,
    pub b0: f64,
    pub norm_lo: f64,
    /// Intervals from `z0` downwards.
    pub pieces: Vec<Piece>,
    pub report: FixedPointReport,
    /// `1 / raw_mass`.
    pub scale: f64,
}

impl PiecewiseSolution {
    /// Interval ends `a_K < ... < a_1 < a_0 = z0`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.pieces.iter().map(|p| p.lo).collect();
        out.reverse();
        out.push(self.z0);
        out
    }

    pub fn lower_end(&self) -> f64 {
        self.pieces.last().map_or(self.z0, |p| p.lo)
    }

    pub fn g_at(&self, z: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.lo > z).min(self.pieces.len() - 1);
        self.pieces[k].eval(z)
    }

    /// Normalised `v = C (z0 - z)^alpha g`.
    pub fn v_at(&self, z: f64) -> f64 {
        self.scale * (self.z0 - z).max(0.0).powf(self.alpha) * self.g_at(z)
    }

    /// Normalised `U = v / b`; infinite at `z0` when `alpha < 1`.
    pub fn u_at(&self, z: f64) -> f64 {
        self.scale * (self.z0 - z).powf(self.alpha - 1.0) * self.g_at(z) * self.z0 / (self.b0 * z)
    }

    /// Rows `(z, g, v, U)` at every sample point below `z0`, ascending.
    pub fn table(&self) -> Vec<[f64; 4]> {
        let mut rows = Vec::new();
        for p in self.pieces.iter().rev() {
            let n = p.g.len() - 1;
            for (i, z) in p.points().enumerate() {
                if i == n {
                    continue;
                }
                rows.push([z, p.g[i], self.v_at(z), self.u_at(z)]);
            }
        }
        rows
    }

    /// `int_lo^hi U` using the piece interpolants.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.scale * raw_u_integral(&self.pieces, self.alpha, self.z0, self.b0, lo, hi)
    }
}

/// The closed-form eigenfunction for `Phi = 1`, `U = z^-alpha (z0 - z)^(alpha - 1)`,
/// and the variant `z^-alpha (z0 - z)^alpha`, both normalised on `[lo, z0]`.
#[derive(Debug, Clone, Copy)]
pub struct ExactUniform {
    pub alpha: f64,
    pub z0: f64,
    pub lo: f64,
    norm: f64,
    norm_variant: f64,
}

impl ExactUniform {
    pub fn new(alpha: f64, z0: f64, lo: f64) -> Self {
        let opts = AdaptiveOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_segments: 4000,
        };
        let mid = 0.5 * z0;
        let left = adaptive(|z| z.powf(-alpha) * (z0 - z).powf(alpha - 1.0), lo, mid, opts).value;
        // w = (z0 - z)^alpha removes the end singularity
        let right = adaptive(
            |w| (z0 - w.powf(1.0 / alpha)).powf(-alpha) / alpha,
            0.0,
            (z0 - mid).powf(alpha),
            opts,
        )
        .value;
        let norm_variant = adaptive(|z| z.powf(-alpha) * (z0 - z).powf(alpha), lo, z0, opts).value;
        Self {
            alpha,
            z0,
            lo,
            norm: left + right,
            norm_variant,
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        z.powf(-self.alpha) * (self.z0 - z).powf(self.alpha - 1.0) / self.norm
    }

    pub fn variant(&self, z: f64) -> f64 {
        z.powf(-self.alpha) * (self.z0 - z).powf(self.alpha) / self.norm_variant
    }
}

/// Relative L1 distance `int |f - g| / int |g|` over `[lo, hi]`.
pub fn relative_l1<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G, lo: f64, hi: f64) -> f64 {
    let opts = AdaptiveOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_segments: 20_000,
    };
    let diff = adaptive(|z| (f(z) - g(z)).abs(), lo, hi, opts).value;
    let base = adaptive(|z| g(z).abs(), lo, hi, opts).value;
    diff / base
}

/// Runs the march from `z0` to the cutoff and normalises the result.
pub fn solve(params: &ModelParameters, config: &FixedPointConfig) -> Result<PiecewiseSolution> {
    let (b0, bz0) = params
        .b
        .logistic()
        .ok_or_else(|| Error::RegimeError("the fixed-point construction needs logistic growth".into()))?;
    let (beta, mu) = match (params.beta.constant_value(), params.mu.constant_value()) {
        (Some(b), Some(m)) => (b, m),
        _ => return Err(Error::RegimeError("the fixed-point construction needs constant beta and mu".into())),
    };
    let z0 = params.z0;
    if (bz0 - z0).abs() > 1e-12 * z0 {
        return Err(Error::RegimeError(format!("growth vanishes at {bz0}, not at the cap {z0}")));
    }
    if !(beta > 0.0) {
        return Err(Error::DomainError(format!("beta must be positive (got {beta})")));
    }
    let lambda = beta - mu;
    let alpha = (lambda + beta + mu) / b0;
    let mut march = March::new(&params.kernel.phi, alpha, z0, params.m, config);
    march.run()?;
    let norm_lo = config.norm_lo.max(params.m);
    let raw_mass = raw_u_integral(&march.pieces, alpha, z0, b0, norm_lo, z0);
    if !(raw_mass > 0.0 && raw_mass.is_finite()) {
        return Err(Error::QuadratureFailure(format!("normalisation integral is {raw_mass}")));
    }
    let (residual_g, residual_g_relative, residual_v) = march.residuals();
    let continuity_mismatch = march.continuity();
    Ok(PiecewiseSolution {
        lambda,
        alpha,
        z0,
        b0,
        norm_lo,
        report: FixedPointReport {
            steps: march.records,
            continuity_mismatch,
            residual_g,
            residual_g_relative,
            residual_v,
            raw_mass,
        },
        pieces: march.pieces,
        scale: 1.0 / raw_mass,
    })
}

fn raw_u_integral(pieces: &[Piece], alpha: f64, z0: f64, b0: f64, lo: f64, hi: f64) -> f64 {
    let rule = GaussLegendre::new(END_NODES);
    let h = |p: &Piece, z: f64| p.eval(z) * z0 / (b0 * z);
    let mut total = 0.0;
    for (k, p) in pieces.iter().enumerate() {
        let (l, r) = (p.lo.max(lo), p.hi.min(hi));
        if r <= l {
            continue;
        }
        if k == 0 && r >= z0 {
            // (z0 - z)^(alpha - 1) h(z) on [l, z0] in the variable tau = ((z0 - z)/(z0 - l))^alpha
            let span = z0 - l;
            let mut s = 0.0;
            for j in 0..END_PANELS {
                let (t0, t1) = (j as f64 / END_PANELS as f64, (j + 1) as f64 / END_PANELS as f64);
                s += rule.integrate(|t| h(p, z0 - span * t.powf(1.0 / alpha)), t0, t1);
            }
            total += span.powf(alpha) / alpha * s;
        } else {
            total += rule.integrate(|z| (z0 - z).powf(alpha - 1.0) * h(p, z), l, r);
        }
    }
    total
}

struct March<'a> {
    phi: &'a Phi,
    phi_sup: f64,
    alpha: f64,
    z0: f64,
    m: f64,
    config: &'a FixedPointConfig,
    pieces: Vec<Piece>,
    records: Vec<StepRecord>,
    /// `(z', W)` with `int_a^z0 Phi(z/z') z'^-2 (z0 - z')^(alpha-1) g(z') dz' = sum W Phi(z/z')`.
    tail: Vec<(f64, f64)>,
    outer: GaussLegendre,
    inner: GaussLegendre,
    end: GaussLegendre,
    tail_rule: GaussLegendre,
}

impl<'a> March<'a> {
    fn new(phi: &'a Phi, alpha: f64, z0: f64, m: f64, config: &'a FixedPointConfig) -> Self {
        Self {
            phi,
            phi_sup: phi.sup_norm(),
            alpha,
            z0,
            m,
            config,
            pieces: Vec::new(),
            records: Vec::new(),
            tail: Vec::new(),
            outer: GaussLegendre::new(OUTER_NODES),
            inner: GaussLegendre::new(INNER_NODES),
            end: GaussLegendre::new(END_NODES),
            tail_rule: GaussLegendre::new(TAIL_NODES),
        }
    }

    fn run(&mut self) -> Result<()> {
        let mut a = self.z0;
        while a > self.m {
            let used = self.records.len();
            if used >= self.config.outer_max_steps {
                return Err(Error::NotConverged(format!(
                    "outer step budget {} exhausted at a = {a:e} above the cutoff {}",
                    self.config.outer_max_steps, self.m
                )));
            }
            let step = delta_step(a, self.alpha, self.phi_sup, self.z0, self.config.delta_guard, self.m)?;
            let remaining = (self.config.outer_max_steps - used) as f64;
            let spread = (a - self.m) / remaining;
            let (delta, widened) = if step.delta < spread { (spread, true) } else { (step.delta, false) };
            let bound = contraction_bound(a, delta, self.alpha, self.phi_sup, self.z0);
            let (piece, mut record) = self.iterate_interval(a, delta)?;
            record.bound = bound;
            record.widened = widened;
            self.push(piece);
            self.records.push(record);
            a -= delta;
            if (a - self.m).abs() < 1e-14 * self.z0 {
                a = self.m;
            }
        }
        Ok(())
    }

    fn samples(&self, delta: f64) -> usize {
        let by_spacing = 8 * (delta / (self.config.sample_spacing * self.z0)).ceil() as usize;
        by_spacing.max(self.config.min_samples).max(STENCIL)
    }

    fn f(&self, zp: f64, z: f64, g: f64) -> f64 {
        self.phi.value(z / zp) * g / (zp * zp)
    }

    fn tail_at(&self, z: f64) -> f64 {
        self.tail.iter().map(|&(zp, w)| w * self.phi.value(z / zp)).sum()
    }

    /// `F(z)` with the current iterate on the open interval `cur`.
    fn big_f(&self, z: f64, a: f64, cur: &Piece, tail: f64) -> f64 {
        let (z0, alpha) = (self.z0, self.alpha);
        if self.pieces.is_empty() {
            // tau form on [z, z0]
            let span = z0 - z;
            let mut s = 0.0;
            for j in 0..END_PANELS {
                let (t0, t1) = (j as f64 / END_PANELS as f64, (j + 1) as f64 / END_PANELS as f64);
                s += self.end.integrate(
                    |t| {
                        let zp = z0 - span * t.powf(1.0 / alpha);
                        self.f(zp, z, cur.eval(zp))
                    },
                    t0,
                    t1,
                );
            }
            z.powf(alpha) / alpha * s
        } else {
            let inner = if a > z {
                self.inner
                    .integrate(|zp| self.f(zp, z, cur.eval(zp)) * (z0 - zp).powf(alpha - 1.0), z, a)
            } else {
                0.0
            };
            (z / (z0 - z)).powf(alpha) * (tail + inner)
        }
    }

    fn iterate_interval(&self, a: f64, delta: f64) -> Result<(Piece, StepRecord)> {
        let (z0, alpha) = (self.z0, self.alpha);
        let n = self.samples(delta);
        let lo = a - delta;
        let g_a = self.pieces.last().map_or(1.0, |p| p.g[0]);
        let mut cur = Piece {
            lo,
            hi: a,
            g: vec![g_a; n + 1],
        };
        let xs: Vec<f64> = cur.points().collect();
        // outer quadrature nodes per sample sub-interval
        let nodes: Vec<Vec<(f64, f64)>> = xs
            .windows(2)
            .map(|w| self.outer.mapped(w[0], w[1]).collect())
            .collect();
        let tails: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|sub| sub.iter().map(|&(z, _)| self.tail_at(z)).collect())
            .collect();

        let mut last_diff = f64::INFINITY;
        let mut ratio_max: f64 = 0.0;
        let mut stalls = 0;
        let mut iterations = 0;
        let mut converged = false;
        for it in 1..=self.config.inner_max_iter {
            iterations = it;
            let sub_integrals: Vec<f64> = nodes
                .par_iter()
                .zip(&tails)
                .map(|(sub, t)| {
                    sub.iter()
                        .zip(t)
                        .map(|(&(z, w), &tail)| w * self.big_f(z, a, &cur, tail))
                        .sum()
                })
                .collect();
            let mut next = vec![0.0; n + 1];
            next[n] = g_a;
            let mut acc = 0.0;
            for i in (0..n).rev() {
                acc += sub_integrals[i];
                let x = xs[i];
                next[i] = (a / x).powf(alpha) * g_a - alpha * z0 / x.powf(alpha) * acc;
            }
            let diff = next.iter().zip(&cur.g).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            if !diff.is_finite() {
                return Err(Error::NoContraction { lo, hi: a });
            }
            if it > 1 && last_diff > 0.0 {
                ratio_max = ratio_max.max(diff / last_diff);
                if diff >= last_diff && diff >= self.config.inner_tol {
                    stalls += 1;
                    if stalls >= STALL_LIMIT {
                        return Err(Error::NoContraction { lo, hi: a });
                    }
                } else {
                    stalls = 0;
                }
            }
            cur.g = next;
            last_diff = diff;
            if diff < self.config.inner_tol {
                converged = true;
                break;
            }
        }
        let record = StepRecord {
            a,
            delta,
            bound: f64::NAN,
            samples: n + 1,
            iterations,
            last_difference: last_diff,
            contraction_ratio: ratio_max,
            converged,
            widened: false,
        };
        Ok((cur, record))
    }

    /// Appends a finished interval and its tail quadrature nodes.
    fn push(&mut self, piece: Piece) {
        let (z0, alpha) = (self.z0, self.alpha);
        if self.pieces.is_empty() {
            let span = z0 - piece.lo;
            let scale = span.powf(alpha) / alpha / END_PANELS as f64;
            for j in 0..END_PANELS {
                let (t0, t1) = (j as f64 / END_PANELS as f64, (j + 1) as f64 / END_PANELS as f64);
                for (t, w) in self.end.mapped(t0, t1) {
                    let zp = z0 - span * t.powf(1.0 / alpha);
                    self.tail.push((zp, w * scale * END_PANELS as f64 * piece.eval(zp) / (zp * zp)));
                }
            }
        } else {
            for (zp, w) in self.tail_rule.mapped(piece.lo, piece.hi) {
                self.tail.push((zp, w * (z0 - zp).powf(alpha - 1.0) * piece.eval(zp) / (zp * zp)));
            }
        }
        self.pieces.push(piece);
    }

    fn continuity(&self) -> f64 {
        self.pieces
            .windows(2)
            .map(|w| (w[0].eval(w[0].lo) - w[1].eval(w[1].hi)).abs())
            .fold(0.0, f64::max)
    }

    /// Residuals of the `g` and `v` equations at interior samples.
    fn residuals(&self) -> (f64, f64, f64) {
        let (z0, alpha) = (self.z0, self.alpha);
        let rows: Vec<(f64, f64, f64)> = (0..self.pieces.len())
            .into_par_iter()
            .flat_map_iter(|k| {
                let p = &self.pieces[k];
                // rebuild the tail as it was while this piece was solved
                let view = March {
                    pieces: self.pieces[..k].to_vec(),
                    tail: self.tail_prefix(k).to_vec(),
                    phi: self.phi,
                    phi_sup: self.phi_sup,
                    alpha,
                    z0,
                    m: self.m,
                    config: self.config,
                    records: Vec::new(),
                    outer: self.outer.clone(),
                    inner: self.inner.clone(),
                    end: self.end.clone(),
                    tail_rule: self.tail_rule.clone(),
                };
                let n = p.g.len() - 1;
                p.points()
                    .enumerate()
                    .filter(|&(i, _)| i > 0 && i < n)
                    .map(|(i, x)| {
                        let tail = view.tail_at(x);
                        let rhs = alpha * z0 * view.big_f(x, p.hi, p, tail) / x.powf(alpha);
                        let dg = p.derivative(x);
                        let lhs = alpha * p.g[i] / x;
                        let r = dg + lhs - rhs;
                        let scale = dg.abs().max(lhs.abs());
                        // v' + alpha z0 v/(z(z0 - z)) - rhs_v = (z0 - z)^alpha r
                        let w = (z0 - x).powf(alpha);
                        let v_scale = w * scale.max(alpha * z0 * p.g[i] / (x * (z0 - x)));
                        (r.abs(), r.abs() / scale, (w * r.abs(), v_scale))
                    })
                    .map(|(a, b, (c, d))| (a, b, c / d.max(f64::MIN_POSITIVE)))
                    .collect::<Vec<_>>()
            })
            .collect();
        rows.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &(x, y, z)| (a.max(x), b.max(y), c.max(z)))
    }

    fn tail_prefix(&self, k: usize) -> &[(f64, f64)] {
        if k == 0 {
            return &[];
        }
        let len = END_PANELS * END_NODES + (k - 1) * TAIL_NODES;
        &self.tail[..len]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> ModelParameters {
        ModelParameters::reference(Phi::Uniform)
    }

    #[test]
    fn delta_bound_is_below_one_and_shrinks_with_alpha() {
        let s = delta_step(1.0, 0.8, 1.0, 1.0, 1e-5, 0.005).unwrap();
        assert!(s.bound < 1.0, "bound {}", s.bound);
        assert!(s.bound > 1.0 - 2e-5);
        let mut last = f64::INFINITY;
        for alpha in [1.5, 2.0, 4.0, 8.0, 16.0] {
            let d = delta_step(0.5, alpha, 1.0, 1.0, 1e-5, 1e-3).unwrap().delta;
            assert!(d < last, "alpha {alpha}: {d} !< {last}");
            last = d;
        }
        let near_one = delta_step(0.5, 1.0, 1.0, 1.0, 1e-5, 1e-3).unwrap();
        assert!(near_one.bound < 1.0);
    }

    #[test]
    fn first_step_matches_the_global_contraction_bound() {
        // G on [z0 - eps, z0]: |z0/x - (z0/x)^alpha| / |alpha - 1| * sup Phi at x = z0 - eps
        let (alpha, z0, sup) = (0.8, 2.0, 1.5);
        let s = delta_step(z0, alpha, sup, z0, 1e-5, 0.01).unwrap();
        let x = z0 - s.delta;
        let lemma = sup * ((z0 / x) - (z0 / x).powf(alpha)).abs() / (alpha - 1.0).abs();
        assert!((lemma - (1.0 - 1e-5)).abs() < 1e-9, "{lemma}");
    }

    #[test]
    fn capped_step_lands_on_cutoff() {
        let s = delta_step(0.00501, 0.8, 1.0, 1.0, 1e-5, 0.005).unwrap();
        assert!(s.capped);
        assert!((0.00501 - s.delta - 0.005).abs() < 1e-15);
    }

    #[test]
    fn lagrange_piece_is_exact_on_quintics() {
        let p = Piece {
            lo: 0.3,
            hi: 0.9,
            g: (0..=16).map(|i| {
                let x = 0.3 + 0.6 * i as f64 / 16.0;
                x.powi(5) - 2.0 * x * x
            })
            .collect(),
        };
        for t in [0.3, 0.41, 0.77, 0.9] {
            assert!((p.eval(t) - (t.powi(5) - 2.0 * t * t)).abs() < 1e-13);
            assert!((p.derivative(t) - (5.0 * t.powi(4) - 4.0 * t)).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_kernel_reproduces_closed_form() {
        let sol = solve(&uniform(), &FixedPointConfig::default()).unwrap();
        assert!((sol.lambda - 0.3).abs() < 1e-15);
        assert!((sol.alpha - 0.8).abs() < 1e-15);
        // g(z) = z^(1 - alpha) for z0 = 1
        let worst = sol
            .table()
            .iter()
            .map(|r| (r[1] - r[0].powf(0.2)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "g error {worst}");
        let exact = ExactUniform::new(0.8, 1.0, 0.005);
        let err = relative_l1(|z| sol.u_at(z), |z| exact.value(z), 0.01, 0.99);
        assert!(err < 1e-4, "L1 {err}");
        assert!(sol.report.residual_g < 1e-4, "residual {}", sol.report.residual_g);
        assert!(sol.report.residual_v < 1e-3);
        assert_eq!(sol.report.continuity_mismatch, 0.0);
        assert_eq!(sol.report.unconverged_steps(), 0);
        assert!((sol.lower_end() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn first_interval_reproduces_g_at_its_top_and_contracts() {
        let sol = solve(&uniform(), &FixedPointConfig::default()).unwrap();
        assert_eq!(sol.pieces[0].g.last().copied(), Some(1.0));
        for r in &sol.report.steps {
            assert!(r.contraction_ratio <= r.bound + 1e-9, "{r:?}");
        }
    }

    #[test]
    fn normalisation_agrees_with_independent_quadrature() {
        let sol = solve(&ModelParameters::reference(Phi::symmetric_beta(2.0).unwrap()), &FixedPointConfig::default())
            .unwrap();
        let mid = adaptive(|z| sol.u_at(z), 0.005, 0.9, AdaptiveOptions::abs(1e-12)).value;
        let top = sol.integral(0.9, 1.0);
        assert!((mid + top - 1.0).abs() < 1e-8, "{}", mid + top);
        assert!(sol.table().iter().all(|r| r[3] >= 0.0));
    }

    #[test]
    fn rejects_non_constant_rates() {
        let p = uniform()
            .with_mu(crate::params::RateFunction::custom("linear", |z| 0.1 + 0.1 * z))
            .unwrap();
        assert!(matches!(solve(&p, &FixedPointConfig::default()), Err(Error::RegimeError(_))));
    }
}
