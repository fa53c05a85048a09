//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson slopes).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    cum: Vec<f64>,
}

impl Pchip {
    /// Builds the interpolant. `x` must be strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DomainError(format!(
                "interpolation table has {} abscissae but {} values",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::DomainError("interpolation table needs at least two points".into()));
        }
        if let Some(w) = x.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::DomainError(format!(
                "abscissae must be strictly increasing (found {} then {})",
                w[0], w[1]
            )));
        }
        if let Some(v) = x.iter().chain(&y).find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation {
                what: "interpolation table".into(),
                z: *v,
            });
        }
        let d = slopes(&x, &y);
        let mut p = Self { x, y, d, cum: Vec::new() };
        let mut acc = 0.0;
        p.cum.push(0.0);
        for i in 0..p.x.len() - 1 {
            acc += p.segment_integral(i);
            p.cum.push(acc);
        }
        Ok(p)
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        if t <= self.x[0] {
            return 0;
        }
        if t >= self.x[n - 2] {
            return n - 2;
        }
        self.x.partition_point(|&v| v <= t) - 1
    }

    /// Value at `t`; outside the table the end segments are extrapolated.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        dh00 * self.y[i] + dh10 * self.d[i] + dh01 * self.y[i + 1] + dh11 * self.d[i + 1]
    }

    /// Exact integral of the interpolant over the whole table.
    pub fn integral(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }

    fn segment_integral(&self, i: usize) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        h * (self.y[i] + self.y[i + 1]) / 2.0 + h * h * (self.d[i] - self.d[i + 1]) / 12.0
    }

    /// Integral of the interpolant from the first abscissa to `t` (clamped to the table).
    pub fn integral_to(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        let i = self.segment(t);
        self.cum[i] + self.partial_segment(i, t)
    }

    fn partial_segment(&self, i: usize, t: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let a00 = s4 / 2.0 - s3 + s;
        let a10 = s4 / 4.0 - 2.0 * s3 / 3.0 + s2 / 2.0;
        let a01 = -s4 / 2.0 + s3;
        let a11 = s4 / 4.0 - s3 / 3.0;
        h * (self.y[i] * a00 + h * self.d[i] * a10 + self.y[i + 1] * a01 + h * self.d[i + 1] * a11)
    }

    /// Running integral from the first abscissa to each table point.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn max_value(&self) -> f64 {
        // each segment is monotone, so extrema sit on nodes
        self.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.y.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_linear_data() {
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(p.eval(*a), *b);
        }
        assert!((p.eval(0.37) - (3.0 * 0.37 - 1.0)).abs() < 1e-14);
        assert!((p.integral() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn stays_nonnegative_on_nonnegative_data() {
        let x = vec![0.0, 0.1, 0.2, 0.5, 0.6, 1.0];
        let y = vec![0.0, 0.0, 5.0, 0.1, 0.0, 0.0];
        let p = Pchip::new(x, y).unwrap();
        for i in 0..=1000 {
            assert!(p.eval(i as f64 / 1000.0) >= -1e-15);
        }
    }

    #[test]
    fn cumulative_matches_integral() {
        let x: Vec<f64> = (0..=20).map(|i| (i as f64 / 20.0).powi(2)).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let p = Pchip::new(x, y).unwrap();
        let c = p.cumulative();
        assert!((c[c.len() - 1] - p.integral()).abs() < 1e-15);
        assert!((p.integral() - (1.0 - 1f64.cos())).abs() < 1e-4);
        let mid = p.integral_to(0.3);
        assert!((mid - (1.0 - 0.3f64.cos())).abs() < 1e-4);
        assert!((p.integral_to(1.0) - p.integral()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(Pchip::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Pchip::new(vec![0.0], vec![1.0]).is_err());
        assert!(Pchip::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }
}
