//! Characteristic flow of the growth term, `dZ/dt = b(Z)`, and the
//! cumulative weight `W(x, z) = int_x^z dy / b(y)`.
//!
//! The weight is represented through a potential `C(x) = int_{z0/2}^x dy/b`, so
//! `W(x, z) = C(z) - C(x)` is additive by construction. For logistic growth the
//! potential is available in closed form; otherwise it is tabulated on a grid
//! that is uniform in `ln x` below `z0/2` and in `-ln(z0 - x)` above, where
//! `1/b` becomes a smooth integrand.

use crate::error::{Error, Result};
use crate::ode::{dopri5, OdeOptions};
use crate::params::RateFunction;
use crate::quadrature::{adaptive, AdaptiveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    ClosedFormLogistic,
    NumericOde,
}

const TABLE_STEP: f64 = 0.25;
const LEFT_DEPTH: f64 = 1e-30;
const RIGHT_DEPTH: f64 = 1e-17;

#[derive(Debug, Clone)]
struct PotentialTable {
    zref: f64,
    z0: f64,
    // u = ln x, decreasing from ln zref
    left: Vec<f64>,
    // v = -ln(z0 - x), increasing from -ln(z0 - zref)
    right: Vec<f64>,
}

fn panel_opts() -> AdaptiveOptions {
    AdaptiveOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_segments: 200,
    }
}

impl PotentialTable {
    fn build(b: &RateFunction, z0: f64) -> Self {
        let zref = 0.5 * z0;
        let u_ref = zref.ln();
        let n_left = ((zref / (z0 * LEFT_DEPTH)).ln() / TABLE_STEP).ceil() as usize;
        let mut left = Vec::with_capacity(n_left + 1);
        left.push(0.0);
        let mut acc = 0.0;
        for k in 0..n_left {
            let hi = u_ref - k as f64 * TABLE_STEP;
            let lo = hi - TABLE_STEP;
            acc -= adaptive(|u| left_integrand(b, u), lo, hi, panel_opts()).value;
            left.push(acc);
        }
        let v_ref = -(z0 - zref).ln();
        let n_right = (((z0 - zref) / (z0 * RIGHT_DEPTH)).ln() / TABLE_STEP).ceil() as usize;
        let mut right = Vec::with_capacity(n_right + 1);
        right.push(0.0);
        let mut acc = 0.0;
        for k in 0..n_right {
            let lo = v_ref + k as f64 * TABLE_STEP;
            acc += adaptive(|v| right_integrand(b, z0, v), lo, lo + TABLE_STEP, panel_opts()).value;
            right.push(acc);
        }
        Self { zref, z0, left, right }
    }

    fn potential(&self, b: &RateFunction, x: f64) -> f64 {
        if x <= self.zref {
            let u_ref = self.zref.ln();
            let u = x.ln();
            let pos = (u_ref - u) / TABLE_STEP;
            let k = (pos.floor() as usize).min(self.left.len() - 1);
            let node = u_ref - k as f64 * TABLE_STEP;
            self.left[k] - adaptive(|s| left_integrand(b, s), u, node, panel_opts()).value
        } else {
            let v_ref = -(self.z0 - self.zref).ln();
            let v = -(self.z0 - x).ln();
            let pos = (v - v_ref) / TABLE_STEP;
            let k = (pos.floor() as usize).min(self.right.len() - 1);
            let node = v_ref + k as f64 * TABLE_STEP;
            self.right[k] + adaptive(|s| right_integrand(b, self.z0, s), node, v, panel_opts()).value
        }
    }
}

#[inline]
fn left_integrand(b: &RateFunction, u: f64) -> f64 {
    let y = u.exp();
    y / b.eval(y)
}

#[inline]
fn right_integrand(b: &RateFunction, z0: f64, v: f64) -> f64 {
    let d = (-v).exp();
    d / b.eval(z0 - d)
}

#[derive(Debug, Clone)]
pub struct FlowMap {
    b: RateFunction,
    z0: f64,
    mode: FlowMode,
    table: Option<PotentialTable>,
}

impl FlowMap {
    /// Closed form when `b` is the logistic law on `[0, z0]`, tabulated otherwise.
    pub fn new(b: &RateFunction, z0: f64) -> Self {
        match b.logistic() {
            Some((_, zc)) if zc == z0 => Self {
                b: b.clone(),
                z0,
                mode: FlowMode::ClosedFormLogistic,
                table: None,
            },
            _ => Self::numeric(b, z0),
        }
    }

    /// Forces the numerical route regardless of the form of `b`.
    pub fn numeric(b: &RateFunction, z0: f64) -> Self {
        Self {
            b: b.clone(),
            z0,
            mode: FlowMode::NumericOde,
            table: Some(PotentialTable::build(b, z0)),
        }
    }

    pub fn mode(&self) -> FlowMode {
        self.mode
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn growth(&self) -> &RateFunction {
        &self.b
    }

    /// `Z(t, z)`.
    pub fn flow(&self, t: f64, z: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::DomainError(format!("flow time must be nonnegative (got {t})")));
        }
        if !(0.0..=self.z0).contains(&z) {
            return Err(Error::DomainError(format!("flow start {z} outside [0, {}]", self.z0)));
        }
        if t == 0.0 || z == 0.0 || z == self.z0 {
            return Ok(z);
        }
        match self.mode {
            FlowMode::ClosedFormLogistic => {
                let (b0, z0) = self.b.logistic().expect("logistic mode");
                Ok(z0 * z / (z + (z0 - z) * (-b0 * t).exp()))
            }
            FlowMode::NumericOde => {
                let b = &self.b;
                let y = dopri5(|_, y: &[f64; 1]| [b.eval(y[0])], 0.0, [z], t, OdeOptions::default())?;
                Ok(y[0].clamp(z, self.z0))
            }
        }
    }

    /// `C(x) = int_{z0/2}^x dy / b(y)` for `x` in `(0, z0)`.
    pub fn potential(&self, x: f64) -> f64 {
        match self.mode {
            FlowMode::ClosedFormLogistic => {
                let (b0, z0) = self.b.logistic().expect("logistic mode");
                (x / (z0 - x)).ln() / b0
            }
            FlowMode::NumericOde => self.table.as_ref().expect("numeric table").potential(&self.b, x),
        }
    }

    /// `W(x, z) = int_x^z dy / b(y)`.
    pub fn weight(&self, x: f64, z: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::SingularEndpoint(format!("weight lower limit x = {x} at or below 0")));
        }
        if !(z < self.z0) {
            return Err(Error::SingularEndpoint(format!("weight upper limit z = {z} at or above z0")));
        }
        if x > z {
            return Err(Error::DomainError(format!("weight requires x <= z (x = {x}, z = {z})")));
        }
        if x == z {
            return Ok(0.0);
        }
        Ok((self.potential(z) - self.potential(x)).max(0.0))
    }

    /// `exp(-int_x^z c(y)/b(y) dy)`, including the limits `z = z0` and `x = 0`.
    pub fn exp_weighted(&self, x: f64, z: f64, c: impl Fn(f64) -> f64) -> f64 {
        assert!(x <= z, "exp_weighted requires x <= z");
        if x == z {
            return 1.0;
        }
        let (cx, cz) = (c(x), c(z));
        if z >= self.z0 && cz > 0.0 {
            return 0.0;
        }
        if x <= 0.0 && cx > 0.0 {
            return 0.0;
        }
        let exponent = self.integral_over_b(x.max(self.z0 * LEFT_DEPTH), z.min(self.z0 * (1.0 - RIGHT_DEPTH)), &c);
        (-exponent).exp()
    }

    /// `int_x^z c(y)/b(y) dy` for `0 < x <= z < z0`, in log coordinates near the ends.
    pub fn integral_over_b(&self, x: f64, z: f64, c: &impl Fn(f64) -> f64) -> f64 {
        if x >= z {
            return 0.0;
        }
        let z0 = self.z0;
        let zref = 0.5 * z0;
        let b = &self.b;
        let opts = AdaptiveOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_segments: 2000,
        };
        let mut total = 0.0;
        if x < zref {
            let hi = z.min(zref);
            total += adaptive(|u| left_integrand(b, u) * c(u.exp()), x.ln(), hi.ln(), opts).value;
        }
        if z > zref {
            let lo = x.max(zref);
            total += adaptive(
                |v| right_integrand(b, z0, v) * c(z0 - (-v).exp()),
                -(z0 - lo).ln(),
                -(z0 - z).ln(),
                opts,
            )
            .value;
        }
        total
    }

    /// Integrates `f(Z(t, z)) exp(-int_0^t c(Z(s, z)) ds)` over `t` in `[0, horizon]`
    /// along the characteristic. Returns the integral and the exponent at `horizon`.
    pub fn integrate_along(
        &self,
        z: f64,
        horizon: f64,
        c: impl Fn(f64) -> f64,
        f: impl Fn(f64) -> f64,
        opts: OdeOptions,
    ) -> Result<(f64, f64)> {
        let b = &self.b;
        let z0 = self.z0;
        let y = dopri5(
            |_, y: &[f64; 3]| {
                let zt = y[0].clamp(0.0, z0);
                [b.eval(zt), c(zt), f(zt) * (-y[1]).exp()]
            },
            0.0,
            [z, 0.0, 0.0],
            horizon,
            opts,
        )?;
        Ok((y[2], y[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic() -> RateFunction {
        RateFunction::LogisticGrowth { b0: 1.0, z0: 1.0 }
    }

    #[test]
    fn initial_condition_and_fixed_points() {
        let f = FlowMap::new(&logistic(), 1.0);
        assert_eq!(f.mode(), FlowMode::ClosedFormLogistic);
        assert_eq!(f.flow(0.0, 0.37).unwrap(), 0.37);
        assert_eq!(f.flow(5.0, 1.0).unwrap(), 1.0);
        assert_eq!(f.flow(5.0, 0.0).unwrap(), 0.0);
        assert!(f.flow(-1.0, 0.5).is_err());
    }

    #[test]
    fn logistic_flow_value_and_numeric_agreement() {
        let closed = FlowMap::new(&logistic(), 1.0);
        let numeric = FlowMap::numeric(&logistic(), 1.0);
        let t = 3f64.ln();
        assert!((closed.flow(t, 0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!((numeric.flow(t, 0.5).unwrap() - 0.75).abs() < 1e-9);
        for &(t, z) in &[(0.3, 0.01), (2.0, 0.9), (7.0, 0.2)] {
            let a = closed.flow(t, z).unwrap();
            let b = numeric.flow(t, z).unwrap();
            assert!((a - b).abs() < 1e-9 * a.max(1e-3), "{t} {z}: {a} vs {b}");
        }
    }

    #[test]
    fn weight_matches_log_formula_and_quadrature() {
        let closed = FlowMap::new(&logistic(), 1.0);
        let numeric = FlowMap::numeric(&logistic(), 1.0);
        for &(x, z) in &[(0.1f64, 0.2f64), (1e-6, 0.5), (0.3, 0.999999), (0.42, 0.42)] {
            let exact = (z * (1.0 - x) / (x * (1.0 - z))).ln();
            let quad = adaptive(|y| 1.0 / (y * (1.0 - y)), x, z, AdaptiveOptions { max_segments: 20000, ..AdaptiveOptions::abs(1e-12) }).value;
            assert!((closed.weight(x, z).unwrap() - exact).abs() < 1e-10);
            assert!((numeric.weight(x, z).unwrap() - exact).abs() < 1e-10);
            assert!((quad - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn weight_rejects_singular_endpoints() {
        let f = FlowMap::new(&logistic(), 1.0);
        assert!(matches!(f.weight(0.0, 0.5), Err(Error::SingularEndpoint(_))));
        assert!(matches!(f.weight(0.2, 1.0), Err(Error::SingularEndpoint(_))));
        assert!(matches!(f.weight(0.6, 0.5), Err(Error::DomainError(_))));
    }

    #[test]
    fn exp_weighted_constant_rate() {
        let numeric = FlowMap::numeric(&logistic(), 1.0);
        let closed = FlowMap::new(&logistic(), 1.0);
        let c = 0.7;
        for &(x, z) in &[(0.01f64, 0.3f64), (0.5, 0.99), (0.2, 0.2)] {
            let exact = (x * (1.0 - z) / (z * (1.0 - x))).powf(c);
            assert!((closed.exp_weighted(x, z, |_| c) - exact).abs() < 1e-12);
            assert!((numeric.exp_weighted(x, z, |_| c) - exact).abs() < 1e-10);
        }
        assert_eq!(closed.exp_weighted(0.3, 1.0, |_| c), 0.0);
        assert!(closed.exp_weighted(0.3, 1.0 - 1e-12, |_| c) < 1e-7);
    }

    #[test]
    fn power_law_growth_uses_numeric_route() {
        let b = RateFunction::PowerLaw { coeff: 1.0, exponent: 2.0, z0: 1.0 };
        let f = FlowMap::new(&b, 1.0);
        assert_eq!(f.mode(), FlowMode::NumericOde);
        // int dy / (y^2 (1 - y)) = -1/y + ln(y / (1 - y))
        let anti = |y: f64| -1.0 / y + (y / (1.0 - y)).ln();
        let w = f.weight(0.05, 0.8).unwrap();
        assert!((w - (anti(0.8) - anti(0.05))).abs() < 1e-10);
    }

    #[test]
    fn two_representations_agree() {
        let f = FlowMap::new(&logistic(), 1.0);
        let c = |z: f64| 0.3 + 0.2 * z;
        let g = |z: f64| (3.0 * z).sin().powi(2);
        let zs = 0.05;
        let (time_form, _) = f
            .integrate_along(zs, 200.0, c, g, OdeOptions { rtol: 1e-11, atol: 1e-13, ..OdeOptions::default() })
            .unwrap();
        let cov_form = adaptive(
            |z| g(z) * f.exp_weighted(zs, z, c) / (z * (1.0 - z)),
            zs,
            1.0,
            AdaptiveOptions { max_segments: 20000, ..AdaptiveOptions::abs(1e-10) },
        )
        .value;
        assert!((time_form - cov_form).abs() < 1e-6, "{time_form} vs {cov_form}");
    }
}
