//! Adaptive Gauss-Kronrod (10/21) quadrature and shape-preserving cubic
//! interpolation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// A value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub err: f64,
    pub converged: bool,
}

impl QuadResult {
    pub const ZERO: QuadResult = QuadResult { value: 0.0, err: 0.0, converged: true };

    pub fn plus(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            err: self.err + other.err,
            converged: self.converged && other.converged,
        }
    }

    pub fn scaled(self, c: f64) -> QuadResult {
        QuadResult { value: self.value * c, err: self.err * c.abs(), converged: self.converged }
    }

    /// Image of `[value - err, value + err]` under `v -> v^(1/p)`.
    pub fn pth_root(self, p: f64) -> QuadResult {
        let v = self.value.max(0.0);
        let r = v.powf(1.0 / p);
        let up = (v + self.err).powf(1.0 / p) - r;
        let down = r - (v - self.err).max(0.0).powf(1.0 / p);
        QuadResult { value: r, err: up.max(down), converged: self.converged }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.err
    }

    pub fn upper(&self) -> f64 {
        self.value + self.err
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
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
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
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

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    at_floor: bool,
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

/// One 21-point Kronrod estimate; the error is the difference to the
/// embedded 10-point Gauss rule, floored at the rounding level.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = fc.abs() * WGK[10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let diff = ((res_k - res_g) * half).abs();
    let floor = 50.0 * f64::EPSILON * res_abs;
    let err = if value.is_finite() { diff.max(floor) } else { f64::INFINITY };
    Segment { a, b, value, err, at_floor: diff <= floor }
}

fn rounding_floor(seg: &Segment) -> bool {
    let w = (seg.b - seg.a).abs();
    let scale = seg.a.abs().max(seg.b.abs()).max(f64::MIN_POSITIVE);
    w <= 1e-13 * scale || w < 1e-300
}

/// Globally adaptive integration over the union of `[points[i], points[i+1]]`.
///
/// Stops when the summed error estimate is at most `target` or the segment
/// count reaches `max_segments`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, points: &[f64], target: f64, max_segments: usize) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gk21(f, w[0], w[1]));
        }
    }
    let mut total_err: f64 = heap.iter().map(|s| s.err).sum();
    let mut count = heap.len();
    while total_err + frozen_err > target && count < max_segments {
        let Some(seg) = heap.pop() else { break };
        if seg.at_floor || rounding_floor(&seg) {
            frozen_value += seg.value;
            frozen_err += seg.err;
            total_err -= seg.err;
            continue;
        }
        let mid = 0.5 * (seg.a + seg.b);
        let left = gk21(f, seg.a, mid);
        let right = gk21(f, mid, seg.b);
        let refined = left.err + right.err;
        // the parent estimate may be infinite
        total_err = if total_err.is_finite() && seg.err.is_finite() {
            total_err - seg.err + refined
        } else {
            heap.iter().map(|s| s.err).sum::<f64>() + refined
        };
        heap.push(left);
        heap.push(right);
        count += 1;
    }
    // deterministic summation order
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = frozen_value + segs.iter().map(|s| s.value).sum::<f64>();
    let err = frozen_err + segs.iter().map(|s| s.err).sum::<f64>();
    // an empty heap means every remaining segment sits at the rounding floor
    let converged = (err <= target || segs.is_empty()) && value.is_finite();
    QuadResult { value, err, converged }
}

/// Points `end +- width * 4^-j`, `j = 1..=depth`, on the side of `end`
/// that lies inside `(lo, hi)`.
pub fn graded_points(end: f64, lo: f64, hi: f64, depth: u32) -> Vec<f64> {
    let mut out = Vec::new();
    let mut w = 1.0;
    for _ in 0..depth {
        w *= 0.25;
        if end > lo {
            let x = end - (end - lo) * w;
            if x > lo && x < end {
                out.push(x);
            }
        }
        if end < hi {
            let x = end + (hi - end) * w;
            if x < hi && x > end {
                out.push(x);
            }
        }
    }
    out
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` strictly increasing, at least two nodes.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { x, y, d }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

// One-sided three-point slope with the shape-preserving corrections.
fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(&|x: f64| 3.0 * x * x, &[0.0, 2.0], 1e-14, 100);
        assert!((r.value - 8.0).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let r = integrate(&|x: f64| x.powf(-0.5), &[0.0, 1.0], 1e-10, 2000);
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
        assert!(r.converged);
    }

    #[test]
    fn error_estimate_covers_truth() {
        let r = integrate(&|x: f64| x.sin().exp(), &[0.0, 10.0], 1e-6, 1000);
        let fine = integrate(&|x: f64| x.sin().exp(), &[0.0, 10.0], 1e-14, 1000);
        assert!((r.value - fine.value).abs() <= r.err);
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.0, 1.0, 1.0, 5.0];
        let p = MonotoneCubic::new(x, y);
        let mut prev = f64::NEG_INFINITY;
        for j in 0..=400 {
            let v = p.eval(j as f64 / 100.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert_eq!(p.eval(2.0), 1.0);
    }

    #[test]
    fn monotone_cubic_reproduces_nodes() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sqrt()).collect();
        let p = MonotoneCubic::new(x.clone(), y.clone());
        for (a, b) in x.iter().zip(&y) {
            assert!((p.eval(*a) - b).abs() < 1e-15);
        }
    }

    #[test]
    fn pth_root_interval() {
        let q = QuadResult { value: 8.0, err: 0.1, converged: true }.pth_root(3.0);
        assert!((q.value - 2.0).abs() < 1e-15);
        assert!(q.err >= (8.1f64).cbrt() - 2.0);
    }
}
