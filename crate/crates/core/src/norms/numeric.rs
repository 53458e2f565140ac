//! Numeric path for functions outside the atom algebra.
//!
//! A [`CallableFn`] is a black-box evaluator with hints about where it is
//! singular and how it behaves at `0` and `inf`. Cumulative integrals are
//! tabulated on a grid and interpolated with a monotone cubic.

use std::fmt;
use std::sync::Arc;

use crate::error::{HardyError, Result};
use crate::funcmodel::PiecewiseFn;
use crate::quad::{self, graded_points, MonotoneCubic, QuadResult};

/// Relative tolerance used when tabulating numeric operators.
pub const NUMERIC_TOL: f64 = 1e-12;

const MAX_SEGMENTS: usize = 4000;
const GRADING_DEPTH: u32 = 40;
const GRID_GRADING_RATIO: f64 = 1.25;
const GRID_GRADING_FLOOR: f64 = 1e-12;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CallableFn {
    evaluator: Evaluator,
    /// Points where the function or its derivative blows up or jumps.
    pub singular_points: Vec<f64>,
    /// Power `a` with `f(x) ~ x^a` as `x -> inf`; `-inf` for compact support.
    pub tail_exponent_hint: f64,
    /// Power `a` with `f(x) ~ x^a` as `x -> 0`.
    pub zero_exponent_hint: f64,
}

impl fmt::Debug for CallableFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallableFn")
            .field("singular_points", &self.singular_points)
            .field("tail_exponent_hint", &self.tail_exponent_hint)
            .field("zero_exponent_hint", &self.zero_exponent_hint)
            .finish_non_exhaustive()
    }
}

impl CallableFn {
    pub fn new<F>(f: F, singular_points: Vec<f64>, zero_exponent_hint: f64, tail_exponent_hint: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut singular_points = singular_points;
        singular_points.retain(|x| *x > 0.0 && x.is_finite());
        singular_points.sort_by(f64::total_cmp);
        singular_points.dedup();
        Self {
            evaluator: Arc::new(f),
            singular_points,
            tail_exponent_hint,
            zero_exponent_hint,
        }
    }

    /// Black-box view of a piecewise function; breakpoints become singular
    /// points.
    pub fn from_piecewise(f: &PiecewiseFn) -> Self {
        let first = &f.pieces()[0];
        let last = f.pieces().last().unwrap();
        let zero = first.iter().map(|a| a.exponent).fold(f64::INFINITY, f64::min);
        let tail = last.iter().map(|a| a.exponent).fold(f64::NEG_INFINITY, f64::max);
        let g = f.clone();
        Self::new(
            move |x| g.evaluate(x),
            f.finite_breakpoints()[1..].to_vec(),
            if zero.is_finite() { zero } else { 0.0 },
            tail,
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.evaluator)(x)
    }

    /// `|f|^p` with scaled hints.
    pub fn pow(&self, p: f64) -> CallableFn {
        let inner = self.evaluator.clone();
        CallableFn {
            evaluator: Arc::new(move |x| inner(x).abs().powf(p)),
            singular_points: self.singular_points.clone(),
            tail_exponent_hint: self.tail_exponent_hint * p,
            zero_exponent_hint: self.zero_exponent_hint * p,
        }
    }

    /// `f(x) / x`.
    fn over_x(&self) -> CallableFn {
        let inner = self.evaluator.clone();
        CallableFn {
            evaluator: Arc::new(move |x| inner(x) / x),
            singular_points: self.singular_points.clone(),
            tail_exponent_hint: self.tail_exponent_hint - 1.0,
            zero_exponent_hint: self.zero_exponent_hint - 1.0,
        }
    }
}

fn pass(f: &CallableFn, lo: f64, hi: Option<f64>, target: f64, max_segments: usize) -> Result<QuadResult> {
    let mut cuts: Vec<f64> = f
        .singular_points
        .iter()
        .copied()
        .filter(|&s| s > lo && hi.map_or(true, |h| s < h))
        .collect();
    if lo > 0.0 {
        cuts.insert(0, lo);
    }
    if let Some(h) = hi {
        cuts.push(h);
    }
    if cuts.is_empty() {
        cuts.push(1.0);
    }
    let is_singular = |x: f64| f.singular_points.iter().any(|&s| s == x);
    let n_regions = cuts.len() - 1 + usize::from(lo == 0.0) + usize::from(hi.is_none());
    let share = target / n_regions as f64;
    let mut total = QuadResult::ZERO;

    if lo == 0.0 {
        let z = f.zero_exponent_hint;
        if !(z > -1.0) {
            return Err(HardyError::DivergentAtZero { exponent: z });
        }
        let a = cuts[0];
        // remainder estimate f(x_min) x_min / (z + 1)
        let mut x_min = a / 16.0;
        let mut rem = f64::INFINITY;
        while x_min > 1e-300 {
            rem = f.eval(x_min).abs() * x_min / (z + 1.0);
            if rem <= share / 4.0 {
                break;
            }
            x_min /= 16.0;
        }
        let (sa, sb) = (x_min.ln(), a.ln());
        let mut pts = vec![sa, sb];
        if is_singular(a) {
            pts.extend(graded_points(sb, sa, sb, GRADING_DEPTH));
        }
        pts.sort_by(f64::total_cmp);
        let g = |s: f64| {
            let x = s.exp();
            f.eval(x) * x
        };
        let r = quad::integrate(&g, &pts, share, max_segments);
        total = total.plus(QuadResult { value: r.value + rem, err: r.err + rem, converged: r.converged && rem <= share });
    }

    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut pts = vec![a, b];
        if is_singular(a) {
            pts.extend(graded_points(a, a, b, GRADING_DEPTH));
        }
        if is_singular(b) {
            pts.extend(graded_points(b, a, b, GRADING_DEPTH));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let g = |x: f64| f.eval(x);
        total = total.plus(quad::integrate(&g, &pts, share, max_segments));
    }

    if hi.is_none() {
        let t = f.tail_exponent_hint;
        if !(t < -1.0) {
            return Err(HardyError::DivergentAtInfinity { exponent: t });
        }
        let b = *cuts.last().unwrap();
        let mut x_max = b.max(1.0) * 16.0;
        let mut rem = f64::INFINITY;
        while x_max < 1e300 {
            rem = if t == f64::NEG_INFINITY { 0.0 } else { f.eval(x_max).abs() * x_max / (-t - 1.0) };
            if rem <= share / 4.0 {
                break;
            }
            x_max *= 16.0;
        }
        let (sa, sb) = (b.ln(), x_max.ln());
        let mut pts = vec![sa, sb];
        if is_singular(b) {
            pts.extend(graded_points(sa, sa, sb, GRADING_DEPTH));
        }
        pts.sort_by(f64::total_cmp);
        let g = |s: f64| {
            let x = s.exp();
            f.eval(x) * x
        };
        let r = quad::integrate(&g, &pts, share, max_segments);
        total = total.plus(QuadResult { value: r.value + rem, err: r.err + rem, converged: r.converged && rem <= share });
    }
    Ok(total)
}

/// `int_lo^hi f` for a callable; `lo = 0` and `hi = None` use the hints to
/// cut the range. `tol` is relative to the integral.
pub fn integrate_callable(f: &CallableFn, lo: f64, hi: Option<f64>, tol: f64) -> Result<QuadResult> {
    let rough = pass(f, lo, hi, f64::INFINITY, 1)?;
    let scale = rough.value.abs();
    let target = if scale > 0.0 { tol * scale } else { tol };
    pass(f, lo, hi, target, MAX_SEGMENTS)
}

/// `||g||_p` for a callable.
pub fn lp_norm_callable(g: &CallableFn, p: f64, tol: f64) -> Result<QuadResult> {
    if !(p > 1.0) {
        return Err(HardyError::BadExponent(p));
    }
    let gp = g.pow(p);
    if !(gp.zero_exponent_hint > -1.0) {
        return Err(HardyError::NormDiverges { end: "0", exponent: gp.zero_exponent_hint });
    }
    if !(gp.tail_exponent_hint < -1.0) {
        return Err(HardyError::NormDiverges { end: "infinity", exponent: gp.tail_exponent_hint });
    }
    Ok(integrate_callable(&gp, 0.0, None, tol)?.pth_root(p))
}

// Sorted positive grid, refined geometrically (ratio 5/4) toward singular
// points inside its range so the interpolant resolves kinks and integrable
// blow-ups.
fn clean_grid(grid: &[f64], singular: &[f64]) -> Result<Vec<f64>> {
    let mut g: Vec<f64> = grid.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    if g.len() < 2 {
        return Err(HardyError::MalformedPartition("numeric operators need at least two grid points".into()));
    }
    let (lo, hi) = (g[0], g[g.len() - 1]);
    for &s in singular.iter().filter(|&&s| s > lo && s < hi) {
        g.push(s);
        let reach = (s - lo).min(hi - s).min(s / 2.0);
        let mut d = reach;
        while d > GRID_GRADING_FLOOR * s {
            g.push(s - d);
            g.push(s + d);
            d /= GRID_GRADING_RATIO;
        }
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

pub fn numeric_hardy(f: &CallableFn, grid: &[f64]) -> Result<CallableFn> {
    numeric_hardy_with_tol(f, grid, NUMERIC_TOL)
}

/// `Hf` for a callable: `int_0^x f` tabulated on `grid`, monotone-cubic in
/// between, direct quadrature outside the grid.
pub fn numeric_hardy_with_tol(f: &CallableFn, grid: &[f64], tol: f64) -> Result<CallableFn> {
    if !(f.zero_exponent_hint > -1.0) {
        return Err(HardyError::DivergentAtZero { exponent: f.zero_exponent_hint });
    }
    let grid = clean_grid(grid, &f.singular_points)?;
    let mut cum = Vec::with_capacity(grid.len());
    let mut acc = integrate_callable(f, 0.0, Some(grid[0]), tol)?.value;
    cum.push(acc);
    for w in grid.windows(2) {
        acc += integrate_callable(f, w[0], Some(w[1]), tol)?.value;
        cum.push(acc);
    }
    let (x0, xn, fn_) = (grid[0], *grid.last().unwrap(), acc);
    let interp = MonotoneCubic::new(grid, cum);
    let inner = f.clone();
    let eval = move |x: f64| -> f64 {
        let c = if x < x0 {
            integrate_callable(&inner, 0.0, Some(x), tol).map_or(f64::NAN, |r| r.value)
        } else if x > xn {
            fn_ + integrate_callable(&inner, xn, Some(x), tol).map_or(f64::NAN, |r| r.value)
        } else {
            interp.eval(x)
        };
        c / x
    };
    Ok(CallableFn::new(
        eval,
        f.singular_points.clone(),
        f.zero_exponent_hint,
        f.tail_exponent_hint.max(-1.0),
    ))
}

pub fn numeric_dual_hardy(f: &CallableFn, grid: &[f64]) -> Result<CallableFn> {
    numeric_dual_hardy_with_tol(f, grid, NUMERIC_TOL)
}

/// `H*f` for a callable: backward cumulative integral of `f(t)/t`.
pub fn numeric_dual_hardy_with_tol(f: &CallableFn, grid: &[f64], tol: f64) -> Result<CallableFn> {
    if !(f.tail_exponent_hint < 0.0) {
        return Err(HardyError::DivergentAtInfinity { exponent: f.tail_exponent_hint });
    }
    let grid = clean_grid(grid, &f.singular_points)?;
    let over = f.over_x();
    let n = grid.len();
    let mut tail = vec![0.0; n];
    let mut acc = integrate_callable(&over, grid[n - 1], None, tol)?.value;
    tail[n - 1] = acc;
    for i in (0..n - 1).rev() {
        acc += integrate_callable(&over, grid[i], Some(grid[i + 1]), tol)?.value;
        tail[i] = acc;
    }
    let (x0, xn, t0) = (grid[0], grid[n - 1], tail[0]);
    let interp = MonotoneCubic::new(grid, tail);
    let eval = move |x: f64| -> f64 {
        if x < x0 {
            t0 + integrate_callable(&over, x, Some(x0), tol).map_or(f64::NAN, |r| r.value)
        } else if x > xn {
            integrate_callable(&over, x, None, tol).map_or(f64::NAN, |r| r.value)
        } else {
            interp.eval(x)
        }
    };
    Ok(CallableFn::new(
        eval,
        f.singular_points.clone(),
        f.zero_exponent_hint.min(0.0),
        f.tail_exponent_hint,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcmodel::PowerLogAtom;
    use crate::operators::{dual_hardy, hardy};

    fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
    }

    fn chi01() -> PiecewiseFn {
        PiecewiseFn::new(vec![0.0, 1.0], vec![vec![PowerLogAtom::constant(1.0)], vec![]], true).unwrap()
    }

    fn remark(p: f64) -> CallableFn {
        CallableFn::new(
            move |x| if x > 1.0 && x <= 2.0 { (x - 1.0).powf(-1.0 / p) } else { 0.0 },
            vec![1.0, 2.0],
            0.0,
            f64::NEG_INFINITY,
        )
    }

    #[test]
    fn numeric_hardy_matches_exact_on_grid() {
        let f = chi01();
        let grid = log_grid(0.01, 100.0, 64);
        let h = numeric_hardy(&CallableFn::from_piecewise(&f), &grid).unwrap();
        let exact = hardy(&f).unwrap();
        for &x in &grid {
            assert!((h.eval(x) - exact.evaluate(x)).abs() <= 1e-8 * exact.evaluate(x), "x = {x}");
        }
    }

    #[test]
    fn numeric_dual_matches_exact_on_grid() {
        let f = chi01();
        let grid = log_grid(0.01, 0.99, 64);
        let d = numeric_dual_hardy(&CallableFn::from_piecewise(&f), &grid).unwrap();
        for &x in &grid {
            assert!((d.eval(x) + x.ln()).abs() <= 1e-8 * (-x.ln()), "x = {x}");
        }
        // between nodes the cubic is accurate to a few 1e-8
        let exact = dual_hardy(&f).unwrap();
        let mid = (grid[31] * grid[32]).sqrt();
        assert!((d.eval(mid) - exact.evaluate(mid)).abs() < 1e-7 * exact.evaluate(mid));
    }

    #[test]
    fn numeric_dual_of_step_is_log_below_support() {
        let eps = 0.01;
        let f = PiecewiseFn::indicator(1.0, Some(1.0 + eps), 1.0).unwrap();
        let d = numeric_dual_hardy(&CallableFn::from_piecewise(&f), &[0.2, 0.5, 1.0, 2.0]).unwrap();
        let l = (1.0f64 + eps).ln();
        for x in [0.2, 0.3, 0.5, 1.0] {
            assert!((d.eval(x) - l).abs() < 1e-12 * l, "x = {x}: {}", d.eval(x));
        }
    }

    #[test]
    fn remark_function_values() {
        let f = remark(2.0);
        let grid = log_grid(0.1, 50.0, 80);
        let h = numeric_hardy(&f, &grid).unwrap();
        assert_eq!(h.eval(0.5), 0.0);
        // x has absolute resolution eps near the singularity, so about sqrt(eps)
        assert!((h.eval(2.0) - 1.0).abs() < 5e-8, "{}", h.eval(2.0));
        assert!(h.eval(3.0) <= 2.0 / 3.0);
    }

    #[test]
    fn divergence_hints() {
        let bad = CallableFn::new(|x: f64| x.powf(-1.5), vec![], -1.5, -1.5);
        assert!(matches!(numeric_hardy(&bad, &[1.0, 2.0]), Err(HardyError::DivergentAtZero { .. })));
        let flat = CallableFn::new(|_| 1.0, vec![], 0.0, 0.0);
        assert!(matches!(numeric_dual_hardy(&flat, &[1.0, 2.0]), Err(HardyError::DivergentAtInfinity { .. })));
    }

    #[test]
    fn callable_norm_matches_exact() {
        // ||H remark||_2^2 = 4 ln 2
        let f = remark(2.0);
        let mut grid = log_grid(0.5, 64.0, 200);
        grid.extend(graded_points(1.0, 0.5, 2.0, 30));
        let h = numeric_hardy(&f, &grid).unwrap();
        let n = lp_norm_callable(&h, 2.0, 1e-10).unwrap();
        assert!((n.value.powi(2) - 4.0 * 2f64.ln()).abs() < 1e-4, "{n:?}");
    }
}
