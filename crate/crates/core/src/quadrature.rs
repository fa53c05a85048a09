//! One-dimensional quadrature: Gauss–Legendre rules, a globally adaptive
//! 21-point Gauss–Kronrod integrator, graded panel layouts and a
//! golden-section extremum search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[allow(clippy::excessive_precision)]
const XGK21: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG10: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// 21-point Kronrod estimate and the difference to the embedded 10-point
/// Gauss rule.
pub fn qk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK21[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK21[j];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += WGK21[j] * s;
        if j % 2 == 1 {
            gauss += WG10[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Tolerances and limits for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_segments: 4000,
        }
    }
}

impl AdaptiveOptions {
    pub fn abs(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// The segment with the largest error estimate is bisected until the summed
/// estimate drops below `max(abs_tol, rel_tol * |I|)`. Integrable endpoint
/// singularities are handled by repeated bisection towards the endpoint.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: AdaptiveOptions) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            abs_error: 0.0,
            converged: true,
        };
    }
    let (value, err) = qk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    let mut segments = 1;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if segments >= opts.max_segments {
            return Integral {
                value: sum_heap(&heap),
                abs_error: total_err,
                converged: false,
            };
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval exhausted at machine resolution
            heap.push(Segment { err: 0.0, ..seg });
            total_err = heap.iter().map(|s| s.err).sum();
            segments += 1;
            continue;
        }
        let (v1, e1) = qk21(&mut f, seg.a, mid);
        let (v2, e2) = qk21(&mut f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
        segments += 1;
        if segments % 64 == 0 {
            // refresh running sums against drift
            total = sum_heap(&heap);
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
    Integral {
        value: sum_heap(&heap),
        abs_error: total_err.max(0.0),
        converged: true,
    }
}

fn sum_heap(heap: &BinaryHeap<Segment>) -> f64 {
    let mut parts: Vec<(f64, f64)> = heap.iter().map(|s| (s.a, s.value)).collect();
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    parts.iter().map(|p| p.1).sum()
}

/// Adaptive integration that sums independent sub-intervals given by `breaks`
/// (sorted, including both end points).
pub fn adaptive_with_breaks<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], opts: AdaptiveOptions) -> Integral {
    let mut out = Integral {
        value: 0.0,
        abs_error: 0.0,
        converged: true,
    };
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let r = adaptive(&mut f, w[0], w[1], opts);
        out.value += r.value;
        out.abs_error += r.abs_error;
        out.converged &= r.converged;
    }
    out
}

/// Panel break points on `[a, b]` clustered geometrically towards the ends
/// selected by `toward_a`/`toward_b`. Panel widths shrink by `ratio` per panel
/// until they fall below `min_width`.
pub fn graded_breaks(a: f64, b: f64, ratio: f64, min_width: f64, toward_a: bool, toward_b: bool) -> Vec<f64> {
    assert!(b > a && ratio > 0.0 && ratio < 1.0);
    let mut left = vec![a];
    let mut right = vec![b];
    let len = b - a;
    let (mut lo, mut hi) = (a, b);
    if toward_a {
        let mut w = min_width.min(0.25 * len);
        let mut pts = vec![];
        let mut x = a + w;
        while x < a + 0.5 * len * if toward_b { 0.5 } else { 1.0 } {
            pts.push(x);
            w /= ratio;
            x += w;
        }
        lo = *pts.last().unwrap_or(&a);
        left.extend(pts);
    }
    if toward_b {
        let mut w = min_width.min(0.25 * len);
        let mut pts = vec![];
        let mut x = b - w;
        while x > b - 0.5 * len * if toward_a { 0.5 } else { 1.0 } {
            pts.push(x);
            w /= ratio;
            x -= w;
        }
        hi = *pts.last().unwrap_or(&b);
        right.extend(pts);
    }
    right.reverse();
    let mut out = left;
    if hi > lo {
        // fill the middle with uniform panels no wider than the outermost graded ones
        let widest = ((hi - lo) / 8.0).max(f64::MIN_POSITIVE);
        let n = ((hi - lo) / widest).ceil() as usize;
        for i in 1..n {
            out.push(lo + (hi - lo) * i as f64 / n as f64);
        }
    }
    out.extend(right);
    out.dedup_by(|x, y| (*x - *y).abs() <= f64::EPSILON * (1.0 + x.abs()));
    out
}

/// Composite Gauss–Legendre over the given panel breaks.
pub fn composite<F: FnMut(f64) -> f64>(rule: &GaussLegendre, mut f: F, breaks: &[f64]) -> f64 {
    breaks
        .windows(2)
        .map(|w| rule.integrate(&mut f, w[0], w[1]))
        .sum()
}

/// Golden-section search for a local maximiser of `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap()
}

/// Relative L1 distance `int |f - g| / int |g|` over `[lo, hi]` by composite
/// four-point Gauss on `panels` equal panels. Suited to piecewise constant data.
pub fn relative_l1_panels<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G, lo: f64, hi: f64, panels: usize) -> f64 {
    let rule = GaussLegendre::new(4);
    let h = (hi - lo) / panels as f64;
    let (mut diff, mut base) = (0.0, 0.0);
    for k in 0..panels {
        let a = lo + k as f64 * h;
        for (x, w) in rule.mapped(a, a + h) {
            let gx = g(x);
            diff += w * (f(x) - gx).abs();
            base += w * gx.abs();
        }
    }
    diff / base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        // degree 15 is the limit for 8 nodes
        let v = rule.integrate(|x| x.powi(14) + 3.0 * x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let w: f64 = GaussLegendre::new(64).mapped(0.0, 3.0).map(|p| p.1).sum();
        assert!((w - 3.0).abs() < 1e-13);
    }

    #[test]
    fn odd_rule_has_center_node() {
        let rule = GaussLegendre::new(5);
        let v = rule.integrate(|x| x.powi(8), -1.0, 1.0);
        assert!((v - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_power_singularity() {
        // int_0^1 x^{-0.9} dx = 10
        let r = adaptive(|x| x.powf(-0.9), 0.0, 1.0, AdaptiveOptions { max_segments: 20000, ..AdaptiveOptions::abs(1e-9) });
        assert!(r.converged);
        assert!((r.value - 10.0).abs() < 1e-7, "{}", r.value);
    }

    #[test]
    fn adaptive_smooth() {
        let r = adaptive(f64::sin, 0.0, std::f64::consts::PI, AdaptiveOptions::default());
        assert!((r.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn graded_breaks_are_sorted_and_cover() {
        let br = graded_breaks(0.0, 1.0, 0.5, 1e-8, true, true);
        assert_eq!(br[0], 0.0);
        assert_eq!(*br.last().unwrap(), 1.0);
        assert!(br.windows(2).all(|w| w[1] > w[0]));
        assert!(br[1] <= 1e-8 * 1.0001);
        assert!(1.0 - br[br.len() - 2] <= 1e-8 * 1.0001);
    }

    #[test]
    fn golden_finds_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-10);
    }
}
