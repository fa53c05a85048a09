//! Numerical certification of the integrability condition on the flow,
//!
//! `int_0^inf int_0^z0 exp(-int_0^t c(Z(s, z')) ds) dz' dt < inf`,
//! with `c = mu_lo - mu_hi + beta_m`, evaluated both along characteristics
//! (time form) and after the change of variables `dt = dz / b(z)` (cov form).
//!
//! The cov form is computed in the logit coordinate `s = ln(z / (z0 - z))`,
//! where `dz / b` has a bounded density for growth laws with simple zeros at
//! both ends. The part of the inner integral beyond the last panel is closed
//! with `E(z', z_hi) / c(z0)`, exact when `c` is constant near `z0`.

use rayon::prelude::*;

use crate::error::Result;
use crate::flow::FlowMap;
use crate::ode::OdeOptions;
use crate::params::ModelParameters;
use crate::quadrature::GaussLegendre;

/// Lower truncation `z' >= LOW_DEPTH * z0` of the outer integral.
const LOW_DEPTH: f64 = 1e-14;
/// Upper truncation `z <= (1 - HIGH_DEPTH) z0` of the inner integral.
const HIGH_DEPTH: f64 = 1e-10;
const PANEL_WIDTH: f64 = 1.0;
const PANEL_NODES: usize = 64;
const SUB_NODES: usize = 32;
/// Fallback horizon when no decay margin is available.
const FALLBACK_HORIZON: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A5Verdict {
    Finite,
    LikelyDivergent,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct A5Report {
    pub value_flow_form: f64,
    pub value_cov_form: f64,
    pub truncation_t: f64,
    pub truncation_error_bound: f64,
    pub verdict: A5Verdict,
    /// `inf_{[m, z0]} (mu_lo - mu_hi + beta_m)`.
    pub decay_margin: f64,
    /// Value plus truncation bound; only meaningful for a `Finite` verdict.
    pub certified_bound: f64,
    /// Cov-form values truncated to `|s| <= K`, used as divergence evidence.
    pub truncated: Vec<(f64, f64)>,
}

impl A5Report {
    pub fn relative_form_gap(&self) -> f64 {
        (self.value_flow_form - self.value_cov_form).abs() / (1.0 + self.value_cov_form.abs())
    }
}

/// Checks the condition for the model's own exponent `mu_lo - mu_hi + beta_m`.
pub fn check_a5(params: &ModelParameters, flow: &FlowMap) -> Result<A5Report> {
    let bd = *params.bounds();
    let shift = bd.mu_lo - bd.mu_hi;
    let c = |z: f64| shift + params.beta_m(z);
    evaluate_a5(flow, &c, shift + bd.beta_lo, &[params.m])
}

/// Evaluates the double integral for an arbitrary exponent `c`.
///
/// `margin` is a lower bound of `c` on the part of `[0, z0]` the flow ends up
/// in; `kinks` lists points where `c` may jump, used as panel breaks.
pub fn evaluate_a5<C>(flow: &FlowMap, c: &C, margin: f64, kinks: &[f64]) -> Result<A5Report>
where
    C: Fn(f64) -> f64 + Sync,
{
    let z0 = flow.z0();
    let nodes = CovNodes::build(flow, c, kinks);
    let c_end = c(z0);
    let value_cov = nodes.value(c_end, f64::INFINITY);

    let truncated: Vec<(f64, f64)> = [4.0, 8.0, 12.0, 16.0, 20.0]
        .iter()
        .map(|&k| (k, nodes.value(f64::NAN, k)))
        .collect();

    let has_margin = margin > 0.0 && c_end > 0.0;
    let horizon = if has_margin {
        (z0 / 1e-10).ln() / margin
    } else {
        FALLBACK_HORIZON
    };
    let opts = OdeOptions {
        rtol: 1e-10,
        atol: 1e-14,
        ..OdeOptions::default()
    };
    let per_node: Vec<Result<(f64, f64, bool)>> = nodes
        .z
        .par_iter()
        .map(|&zp| {
            let (inner, q) = flow.integrate_along(zp, horizon, c, |_| 1.0, opts)?;
            let zt = flow.flow(horizon, zp)?;
            let ct = c(zt);
            let settled = ct >= margin && has_margin;
            let decay = (-q).exp();
            let tail = if ct > 0.0 { decay / ct } else { 0.0 };
            let bound = if settled { decay / margin } else { f64::INFINITY };
            Ok((inner + tail, bound, settled))
        })
        .collect();
    let mut value_flow = 0.0;
    let mut bound = 0.0;
    for (res, w) in per_node.into_iter().zip(&nodes.outer_weight) {
        let (v, bnd, _) = res?;
        value_flow += w * v;
        bound += w * bnd;
    }
    // outer truncation below LOW_DEPTH: the inner integral grows at most like its first value
    bound += 2.0 * nodes.z[0] * nodes.inner_first(c_end);

    let verdict = if !value_cov.is_finite() || !value_flow.is_finite() {
        A5Verdict::LikelyDivergent
    } else if has_margin {
        let gap = (value_flow - value_cov).abs();
        if bound <= 1e-6 * value_cov && gap <= 1e-3 * (1.0 + value_cov) {
            A5Verdict::Finite
        } else {
            A5Verdict::Inconclusive
        }
    } else if growing(&truncated) {
        A5Verdict::LikelyDivergent
    } else {
        A5Verdict::Inconclusive
    };
    Ok(A5Report {
        value_flow_form: value_flow,
        value_cov_form: value_cov,
        truncation_t: horizon,
        truncation_error_bound: bound,
        verdict,
        decay_margin: margin,
        certified_bound: value_cov + bound,
        truncated,
    })
}

/// Increments of the truncated sequence that do not shrink signal divergence.
fn growing(seq: &[(f64, f64)]) -> bool {
    let v: Vec<f64> = seq.iter().map(|p| p.1).collect();
    let n = v.len();
    if v.iter().any(|x| !x.is_finite()) {
        return true;
    }
    let d1 = v[n - 2] - v[n - 3];
    let d2 = v[n - 1] - v[n - 2];
    v.windows(2).all(|w| w[1] > w[0]) && d2 >= 0.5 * d1 && d2 > 1e-6 * v[n - 1].abs()
}

/// Composite Gauss–Legendre nodes in the logit coordinate with the
/// exponent potential `P(s) = int c g ds` at every node.
struct CovNodes {
    breaks: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    panel: Vec<usize>,
    // quadrature weight times g = (dz/ds) / b
    inner_weight: Vec<f64>,
    // quadrature weight times dz/ds
    outer_weight: Vec<f64>,
    pot: Vec<f64>,
    pot_end: f64,
    sub: GaussLegendre,
    sub_cache: Vec<f64>,
}

fn from_logit(s: f64, z0: f64) -> f64 {
    if s >= 0.0 {
        z0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        z0 * e / (1.0 + e)
    }
}

fn logit(z: f64, z0: f64) -> f64 {
    (z / (z0 - z)).ln()
}

/// `(dz/ds, g)` at logit coordinate `s`.
fn jacobians(flow: &FlowMap, s: f64) -> (f64, f64) {
    let z0 = flow.z0();
    let z = from_logit(s, z0);
    // use the rounded node consistently so that b and dz/ds refer to the same point
    let dz = z * (z0 - z) / z0;
    (dz, dz / flow.growth().eval(z))
}

impl CovNodes {
    fn build<C: Fn(f64) -> f64 + Sync>(flow: &FlowMap, c: &C, kinks: &[f64]) -> Self {
        let z0 = flow.z0();
        let s_lo = logit(LOW_DEPTH * z0, z0);
        let s_hi = -HIGH_DEPTH.ln();
        let n = ((s_hi - s_lo) / PANEL_WIDTH).ceil() as usize;
        let mut breaks: Vec<f64> = (0..=n).map(|i| s_lo + (s_hi - s_lo) * i as f64 / n as f64).collect();
        for &k in kinks {
            if k > 0.0 && k < z0 {
                let sk = logit(k, z0);
                if sk > s_lo && sk < s_hi {
                    breaks.push(sk);
                }
            }
        }
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let rule = GaussLegendre::new(PANEL_NODES);
        let sub = GaussLegendre::new(SUB_NODES);
        let rate = |s: f64| {
            let (_, g) = jacobians(flow, s);
            c(from_logit(s, z0)) * g
        };
        let panels: Vec<(Vec<(f64, f64, f64, f64)>, f64)> = breaks
            .par_windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let pts = rule
                    .mapped(a, b)
                    .map(|(s, wt)| {
                        let (dz, g) = jacobians(flow, s);
                        let p = sub.integrate(rate, a, s);
                        (s, wt * g, wt * dz, p)
                    })
                    .collect();
                (pts, sub.integrate(rate, a, b))
            })
            .collect();

        let mut out = Self {
            breaks: breaks.clone(),
            s: vec![],
            z: vec![],
            panel: vec![],
            inner_weight: vec![],
            outer_weight: vec![],
            pot: vec![],
            pot_end: 0.0,
            sub,
            sub_cache: vec![],
        };
        let mut start = 0.0;
        for (k, (pts, total)) in panels.into_iter().enumerate() {
            for (s, wi, wo, p) in pts {
                out.s.push(s);
                out.z.push(from_logit(s, z0));
                out.panel.push(k);
                out.inner_weight.push(wi);
                out.outer_weight.push(wo);
                out.pot.push(start + p);
            }
            start += total;
        }
        out.pot_end = start;
        // inner integral from each node to the end of its own panel
        let cache: Vec<f64> = (0..out.s.len())
            .into_par_iter()
            .map(|j| {
                let a = out.s[j];
                let b = out.breaks[out.panel[j] + 1];
                out.sub.integrate(
                    |sig| {
                        let (_, g) = jacobians(flow, sig);
                        (-out.sub.integrate(rate, a, sig)).exp() * g
                    },
                    a,
                    b,
                )
            })
            .collect();
        out.sub_cache = cache;
        out
    }

    fn inner(&self, j: usize, c_end: f64, s_max: f64) -> f64 {
        let p = self.panel[j];
        let mut acc = self.sub_cache[j];
        let first = self.panel.partition_point(|&q| q <= p);
        for i in first..self.s.len() {
            if self.s[i] > s_max {
                return acc;
            }
            acc += self.inner_weight[i] * (-(self.pot[i] - self.pot[j])).exp();
        }
        if c_end > 0.0 {
            acc += (-(self.pot_end - self.pot[j])).exp() / c_end;
        }
        acc
    }

    fn inner_first(&self, c_end: f64) -> f64 {
        self.inner(0, c_end, f64::INFINITY)
    }

    /// Outer integral restricted to `|s| <= s_max` (no tail when `s_max` is finite).
    fn value(&self, c_end: f64, s_max: f64) -> f64 {
        let terms: Vec<f64> = (0..self.s.len())
            .into_par_iter()
            .map(|j| {
                if self.s[j].abs() > s_max {
                    0.0
                } else {
                    self.outer_weight[j] * self.inner(j, c_end, s_max)
                }
            })
            .collect();
        terms.iter().sum()
    }
}

/// Outcome of the sufficient conditions with decay past `M` and power-law growth near 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientReport {
    /// Smallest sampled `M` with a positive exponent on `[M, z0]`.
    pub decay_from: Option<f64>,
    /// `inf_{[M, z0]} (mu_lo - mu_hi + beta_m)` at that `M`.
    pub decay_margin: f64,
    pub decay_pass: bool,
    /// Fitted `b(z) ~ a z^p` near 0.
    pub fitted_a: f64,
    pub fitted_exponent: f64,
    /// `p - 1`.
    pub fitted_epsilon: f64,
    /// An `eps` in `(0, 1)` with `b >= a z^{1+eps}` on the fit window, if one exists.
    pub certified_epsilon: Option<f64>,
    pub growth_pass: bool,
}

impl SufficientReport {
    pub fn passed(&self) -> bool {
        self.decay_pass && self.growth_pass
    }
}

pub fn check_a5_sufficient(params: &ModelParameters) -> SufficientReport {
    let z0 = params.z0;
    let bd = params.bounds();
    let shift = bd.mu_lo - bd.mu_hi;
    let n = 2048;
    let samples: Vec<f64> = (0..=n).map(|i| shift + params.beta_m(z0 * i as f64 / n as f64)).collect();
    // suffix minima give inf over [M, z0] for every sampled M
    let mut suffix = samples.clone();
    for i in (0..n).rev() {
        suffix[i] = suffix[i].min(suffix[i + 1]);
    }
    let first = (1..n).find(|&i| suffix[i] > 0.0);
    let (decay_from, decay_margin) = match first {
        Some(i) => (Some(z0 * i as f64 / n as f64), suffix[i]),
        None => (None, suffix[n - 1]),
    };

    let k = 60;
    let (lo, hi) = ((z0 * 1e-7).ln(), (z0 * 1e-3).ln());
    let pts: Vec<(f64, f64)> = (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .filter_map(|lz| {
            let bz = params.b.eval(lz.exp());
            (bz > 0.0).then(|| (lz, bz.ln()))
        })
        .collect();
    let (slope, intercept) = if pts.len() >= 2 {
        linear_fit(&pts)
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    };
    let certified_epsilon = if pts.len() == k && slope < 2.0 - 1e-3 {
        let eps = 0.5 * ((slope - 1.0).max(0.0) + 1.0);
        // b(z) / z^{1+eps} must stay bounded away from 0 on the window
        let a_min = pts
            .iter()
            .map(|&(lz, lb)| (lb - (1.0 + eps) * lz).exp())
            .fold(f64::INFINITY, f64::min);
        (a_min > 0.0).then_some(eps)
    } else {
        None
    };
    SufficientReport {
        decay_from,
        decay_margin,
        decay_pass: decay_from.is_some(),
        fitted_a: intercept.exp(),
        fitted_exponent: slope,
        fitted_epsilon: slope - 1.0,
        certified_epsilon,
        growth_pass: certified_epsilon.is_some(),
    }
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Phi, RateFunction};

    fn logistic_flow() -> FlowMap {
        FlowMap::new(&RateFunction::LogisticGrowth { b0: 1.0, z0: 1.0 }, 1.0)
    }

    #[test]
    fn constant_exponent_oracle() {
        let flow = logistic_flow();
        for &c in &[0.1, 0.5, 1.0] {
            let r = evaluate_a5(&flow, &|_| c, c, &[]).unwrap();
            assert!((r.value_cov_form - 1.0 / c).abs() < 1e-4, "{c}: {}", r.value_cov_form);
            assert!((r.value_flow_form - 1.0 / c).abs() < 1e-4, "{c}: {}", r.value_flow_form);
            assert_eq!(r.verdict, A5Verdict::Finite);
        }
    }

    #[test]
    fn reference_rates_are_finite() {
        let p = ModelParameters::reference(Phi::Uniform);
        let r = check_a5(&p, &FlowMap::new(&p.b, p.z0)).unwrap();
        assert_eq!(r.verdict, A5Verdict::Finite);
        assert!(r.relative_form_gap() < 1e-3);
        assert!(r.truncation_error_bound < 1e-6 * r.value_cov_form);
    }

    #[test]
    fn strongly_varying_death_rate_diverges() {
        let p = ModelParameters::reference(Phi::Uniform)
            .with_mu(RateFunction::custom("0.1 + 0.6 z", |z| 0.1 + 0.6 * z))
            .unwrap();
        let r = check_a5(&p, &FlowMap::new(&p.b, p.z0)).unwrap();
        assert_eq!(r.verdict, A5Verdict::LikelyDivergent, "{r:?}");
    }

    #[test]
    fn sufficient_conditions_follow_the_growth_exponent() {
        let p = ModelParameters::reference(Phi::Uniform);
        let s = check_a5_sufficient(&p);
        assert!(s.decay_pass);
        assert!((s.fitted_exponent - 1.0).abs() < 1e-3);
        assert!(s.growth_pass);

        let q = ModelParameters::new(
            RateFunction::PowerLaw { coeff: 1.0, exponent: 2.0, z0: 1.0 },
            RateFunction::Constant(0.4),
            RateFunction::Constant(0.1),
            Phi::Uniform,
            0.005,
            1.0,
        )
        .unwrap();
        let s = check_a5_sufficient(&q);
        assert!((s.fitted_exponent - 2.0).abs() < 1e-3);
        assert!(!s.growth_pass);
    }
}
