//! Extremal families whose norm ratios approach the sharp constants, their
//! closed-form norm bounds, and epsilon sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{HardyError, Result};
use crate::funcmodel::PiecewiseFn;
use crate::norms::{lp_norm_pow, QuadResult};
use crate::operators::{dual_hardy, hardy};
use crate::output::{fmt_f64, json_f64, json_opt};

/// Power families stay below this multiple of `1/p`.
pub const POWER_EPS_CAP: f64 = 0.49;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Indicator of `(1, 1 + eps]`.
    Step,
    /// `x^(eps - 1/p)` on `(0, 1]`.
    ZeroSingular,
    /// `x^(-eps - 1/p)` on `(1, inf)`.
    InfinitySingular,
}

impl FamilyKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "step" => Some(FamilyKind::Step),
            "zerosingular" | "zero" => Some(FamilyKind::ZeroSingular),
            "infinitysingular" | "infinity" | "inf" => Some(FamilyKind::InfinitySingular),
            _ => None,
        }
    }

    /// Largest admissible `eps` (exclusive).
    pub fn eps_max(&self, p: f64) -> f64 {
        match self {
            FamilyKind::Step => f64::INFINITY,
            FamilyKind::ZeroSingular => 1.0 / p,
            FamilyKind::InfinitySingular => (p - 1.0) / p,
        }
    }

    /// Limit of [`SweepRecord::ratio`] as `eps -> 0`.
    pub fn limit(&self, p: f64) -> f64 {
        match self {
            FamilyKind::Step => (p - 1.0).powf(-1.0 / p),
            FamilyKind::ZeroSingular => 1.0 / (p - 1.0),
            FamilyKind::InfinitySingular => p - 1.0,
        }
    }

    /// Whether the tracked ratio is `||H*f|| / ||Hf||` rather than the reverse.
    pub fn dual_over_hardy(&self) -> bool {
        matches!(self, FamilyKind::InfinitySingular)
    }
}

fn check_eps(kind: FamilyKind, eps: f64, p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(HardyError::BadExponent(p));
    }
    let max = kind.eps_max(p);
    if eps > 0.0 && eps < max {
        Ok(())
    } else {
        Err(HardyError::EpsOutOfRange { eps, max })
    }
}

pub fn family(kind: FamilyKind, eps: f64, p: f64) -> Result<PiecewiseFn> {
    check_eps(kind, eps, p)?;
    match kind {
        FamilyKind::Step => PiecewiseFn::indicator(1.0, Some(1.0 + eps), 1.0),
        FamilyKind::ZeroSingular => PiecewiseFn::power_on(eps - 1.0 / p, 0.0, Some(1.0), 1.0),
        FamilyKind::InfinitySingular => PiecewiseFn::power_on(-eps - 1.0 / p, 1.0, None, 1.0),
    }
}

/// Closed-form two-sided estimate; a missing side is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Sandwich {
    /// `lo - err <= value <= hi + err` on the sides that exist.
    pub fn contains(&self, v: QuadResult) -> bool {
        self.lo.map_or(true, |lo| lo <= v.upper()) && self.hi.map_or(true, |hi| v.lower() <= hi)
    }
}

/// Bounds on `||Hf_eps||_p^p` and `||H*f_eps||_p^p`.
pub fn paper_bounds(kind: FamilyKind, eps: f64, p: f64) -> Result<(Sandwich, Sandwich)> {
    check_eps(kind, eps, p)?;
    let ep = eps * p;
    let pp = p.powf(p);
    Ok(match kind {
        FamilyKind::Step => {
            let h = eps.powf(p) * (1.0 + eps).powf(1.0 - p) / (p - 1.0);
            let l = eps.ln_1p().powf(p);
            (
                Sandwich { lo: Some(h), hi: Some(h + eps.powf(p + 1.0)) },
                Sandwich { lo: Some(l), hi: Some(l * (1.0 + eps)) },
            )
        }
        FamilyKind::ZeroSingular => (
            Sandwich { lo: Some(pp / (ep * (p - 1.0 + ep).powf(p))), hi: None },
            Sandwich { lo: None, hi: Some(pp / (ep * (1.0 - ep).powf(p))) },
        ),
        FamilyKind::InfinitySingular => (
            Sandwich { lo: None, hi: Some(pp / (ep * (p - 1.0 - ep).powf(p))) },
            Sandwich { lo: Some(pp / (ep * (1.0 + ep).powf(p))), hi: None },
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub norm_h: QuadResult,
    pub norm_hstar: QuadResult,
    /// `||Hf||/||H*f||`, or its inverse for [`FamilyKind::InfinitySingular`].
    pub ratio: f64,
    pub ratio_err: f64,
    pub sandwich_h: Sandwich,
    pub sandwich_hstar: Sandwich,
    /// Both computed `norm^p` values lie in their sandwiches.
    pub sandwich_ok: bool,
    /// Set when a norm failed or did not converge.
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn converged(&self) -> bool {
        self.error.is_none() && self.norm_h.converged && self.norm_hstar.converged
    }

    /// `||H*f|| / ||Hf||` stays inside the sharp constants up to the
    /// interval error of the two norms.
    pub fn within_sharp_bounds(&self, p: f64) -> bool {
        let Ok(c) = crate::verify::sharp_constants(p) else { return false };
        let (a, b) = (self.norm_hstar, self.norm_h);
        if !(b.lower() > 0.0) {
            return false;
        }
        let slack = c.upper.max(c.lower) * crate::verify::BOUND_REL_SLACK;
        a.lower() / b.upper() <= c.upper + slack && a.upper() / b.lower() >= c.lower - slack
    }

    /// Sandwich of the ratio's numerator norm^p, as written to CSV.
    pub fn numerator_sandwich(&self, kind: FamilyKind) -> Sandwich {
        if kind.dual_over_hardy() {
            self.sandwich_hstar
        } else {
            self.sandwich_h
        }
    }
}

fn nan_result() -> QuadResult {
    QuadResult { value: f64::NAN, err: f64::NAN, converged: false }
}

fn record(kind: FamilyKind, eps: f64, p: f64, tol: f64) -> Result<SweepRecord> {
    let f = family(kind, eps, p)?;
    let (sandwich_h, sandwich_hstar) = paper_bounds(kind, eps, p)?;
    let norms = (|| -> Result<(QuadResult, QuadResult)> {
        Ok((lp_norm_pow(&hardy(&f)?, p, tol)?, lp_norm_pow(&dual_hardy(&f)?, p, tol)?))
    })();
    let (pow_h, pow_hs, error) = match norms {
        Ok((a, b)) => {
            let error = (!a.converged || !b.converged).then(|| {
                let bad = if a.converged { b } else { a };
                HardyError::NotConverged { value: bad.value, err: bad.err, target: tol * bad.value }.to_string()
            });
            (a, b, error)
        }
        Err(e) => (nan_result(), nan_result(), Some(e.to_string())),
    };
    let sandwich_ok = sandwich_h.contains(pow_h) && sandwich_hstar.contains(pow_hs);
    let (norm_h, norm_hstar) = (pow_h.pth_root(p), pow_hs.pth_root(p));
    let (num, den) = if kind.dual_over_hardy() { (norm_hstar, norm_h) } else { (norm_h, norm_hstar) };
    let ratio = num.value / den.value;
    let ratio_err = if den.lower() > 0.0 {
        (num.upper() / den.lower() - ratio).max(ratio - num.lower().max(0.0) / den.upper())
    } else {
        f64::INFINITY
    };
    Ok(SweepRecord { eps, norm_h, norm_hstar, ratio, ratio_err, sandwich_h, sandwich_hstar, sandwich_ok, error })
}

/// Default grid with the power-family cap applied.
pub fn default_grid(kind: FamilyKind, p: f64) -> Vec<f64> {
    let all: Vec<f64> = (0..7).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect();
    cap_grid(kind, p, &all)
}

/// Drops grid points at or above `min(range, 0.49/p)` for the power families.
pub fn cap_grid(kind: FamilyKind, p: f64, grid: &[f64]) -> Vec<f64> {
    let cap = match kind {
        FamilyKind::Step => f64::INFINITY,
        _ => kind.eps_max(p).min(POWER_EPS_CAP / p),
    };
    grid.iter().copied().filter(|&e| e < cap).collect()
}

/// One record per grid point, ordered by `eps` descending. Norm failures
/// are recorded in [`SweepRecord::error`]; invalid `eps` fails the sweep.
pub fn sweep(kind: FamilyKind, p: f64, eps_grid: &[f64], tol: f64) -> Result<Vec<SweepRecord>> {
    let mut grid = eps_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    for &e in &grid {
        check_eps(kind, e, p)?;
    }
    grid.par_iter().map(|&e| record(kind, e, p, tol)).collect()
}

/// Quadratic extrapolation to `eps = 0` through the last three converged
/// records.
pub fn estimate_limit(records: &[SweepRecord]) -> Result<f64> {
    let mut good: Vec<&SweepRecord> = records.iter().filter(|r| r.converged() && r.ratio.is_finite()).collect();
    good.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    if good.len() < 3 {
        return Err(HardyError::InsufficientData(good.len()));
    }
    let last = &good[good.len() - 3..];
    let (x, y): (Vec<f64>, Vec<f64>) = last.iter().map(|r| (r.eps, r.ratio)).unzip();
    // Lagrange basis evaluated at 0
    let mut v = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= -x[j] / (x[i] - x[j]);
            }
        }
        v += w * y[i];
    }
    Ok(v)
}

pub const CSV_HEADER: [&str; 8] =
    ["eps", "norm_H", "norm_H_err", "norm_Hstar", "norm_Hstar_err", "ratio", "sandwich_lo", "sandwich_hi"];

pub fn write_csv<W: Write>(kind: FamilyKind, records: &[SweepRecord], out: W) -> Result<()> {
    let io = |e: csv::Error| HardyError::Output(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        let s = r.numerator_sandwich(kind);
        let opt = |x: Option<f64>| x.map_or(String::new(), fmt_f64);
        w.write_record([
            fmt_f64(r.eps),
            fmt_f64(r.norm_h.value),
            fmt_f64(r.norm_h.err),
            fmt_f64(r.norm_hstar.value),
            fmt_f64(r.norm_hstar.err),
            fmt_f64(r.ratio),
            opt(s.lo),
            opt(s.hi),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| HardyError::Output(e.to_string()))
}

fn quad_json(q: QuadResult) -> Value {
    json!({ "value": json_f64(q.value), "err": json_f64(q.err), "converged": q.converged })
}

fn sandwich_json(s: Sandwich) -> Value {
    json!({ "lo": json_opt(s.lo), "hi": json_opt(s.hi) })
}

pub fn records_json(kind: FamilyKind, records: &[SweepRecord]) -> Value {
    Value::Array(
        records
            .iter()
            .map(|r| {
                let s = r.numerator_sandwich(kind);
                json!({
                    "eps": json_f64(r.eps),
                    "norm_H": json_f64(r.norm_h.value),
                    "norm_H_err": json_f64(r.norm_h.err),
                    "norm_Hstar": json_f64(r.norm_hstar.value),
                    "norm_Hstar_err": json_f64(r.norm_hstar.err),
                    "ratio": json_f64(r.ratio),
                    "ratio_err": json_f64(r.ratio_err),
                    "sandwich_lo": json_opt(s.lo),
                    "sandwich_hi": json_opt(s.hi),
                    "norm_H_detail": quad_json(r.norm_h),
                    "norm_Hstar_detail": quad_json(r.norm_hstar),
                    "sandwich_H_pow": sandwich_json(r.sandwich_h),
                    "sandwich_Hstar_pow": sandwich_json(r.sandwich_hstar),
                    "sandwich_ok": r.sandwich_ok,
                    "error": r.error,
                })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::DEFAULT_TOL;

    #[test]
    fn family_shapes() {
        let f = family(FamilyKind::Step, 0.01, 3.0).unwrap();
        assert_eq!(f.finite_breakpoints(), &[0.0, 1.0, 1.01]);
        assert_eq!(f.evaluate(1.005), 1.0);
        assert_eq!(f.evaluate(1.0), 0.0);
        let z = family(FamilyKind::ZeroSingular, 0.1, 2.0).unwrap();
        assert!((z.pieces()[0][0].exponent + 0.4).abs() < 1e-15);
        let i = family(FamilyKind::InfinitySingular, 0.1, 2.0).unwrap();
        assert!((i.pieces()[1][0].exponent + 0.6).abs() < 1e-15);
        assert!(matches!(family(FamilyKind::ZeroSingular, 0.6, 2.0), Err(HardyError::EpsOutOfRange { .. })));
        assert!(matches!(family(FamilyKind::InfinitySingular, 0.5, 2.0), Err(HardyError::EpsOutOfRange { .. })));
        assert!(matches!(family(FamilyKind::Step, 0.0, 2.0), Err(HardyError::EpsOutOfRange { .. })));
    }

    #[test]
    fn step_bounds_values() {
        let (h, hs) = paper_bounds(FamilyKind::Step, 0.01, 2.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * b;
        assert!(close(h.lo.unwrap(), 9.900990099009902e-05));
        assert!(close(h.hi.unwrap(), 1.0000990099009901e-04));
        assert!(close(hs.lo.unwrap(), 9.900908408750867e-05));
        assert!(close(hs.hi.unwrap(), 9.999917492838377e-05));
    }

    #[test]
    fn power_bounds_values() {
        let (h, hs) = paper_bounds(FamilyKind::ZeroSingular, 0.01, 1.5).unwrap();
        let expect = 1.5f64.powf(1.5) / (0.015 * (0.515f64).powf(1.5));
        assert!((h.lo.unwrap() - expect).abs() < 1e-12 * expect);
        assert!(h.hi.is_none() && hs.lo.is_none());
        let (_, hs) = paper_bounds(FamilyKind::InfinitySingular, 0.01, 3.0).unwrap();
        assert!((hs.lo.unwrap() - 27.0 / (0.03 * 1.03f64.powi(3))).abs() < 1e-10);
    }

    #[test]
    fn step_sweep_at_two_is_flat() {
        let recs = sweep(FamilyKind::Step, 2.0, &[0.001, 0.1, 0.01], DEFAULT_TOL).unwrap();
        let eps: Vec<f64> = recs.iter().map(|r| r.eps).collect();
        assert_eq!(eps, [0.1, 0.01, 0.001]);
        for r in &recs {
            assert!(r.converged());
            assert!((r.ratio - 1.0).abs() <= r.ratio_err + 1e-12, "{r:?}");
            assert!(r.sandwich_ok);
        }
        assert!((estimate_limit(&recs).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn step_limit_at_three() {
        let recs = sweep(FamilyKind::Step, 3.0, &[1e-2, 1e-3, 1e-4], DEFAULT_TOL).unwrap();
        let target = 2f64.powf(-1.0 / 3.0);
        let est = estimate_limit(&recs).unwrap();
        assert!((est - target).abs() < 2e-3 * target, "{est}");
        assert!(matches!(estimate_limit(&recs[..2]), Err(HardyError::InsufficientData(2))));
    }

    #[test]
    fn power_families_approach_limits() {
        let r = sweep(FamilyKind::InfinitySingular, 3.0, &[1e-3], DEFAULT_TOL).unwrap();
        assert!((r[0].ratio - 2.0).abs() < 0.02 * 2.0, "{:?}", r[0]);
        assert!(r[0].ratio <= 2.0 + r[0].ratio_err);
        assert!(r[0].sandwich_ok);
        let grid = default_grid(FamilyKind::ZeroSingular, 1.5);
        assert!(grid.iter().all(|&e| e < 0.49 / 1.5));
        assert_eq!(default_grid(FamilyKind::Step, 2.0).len(), 7);
    }

    #[test]
    fn csv_layout() {
        let recs = sweep(FamilyKind::ZeroSingular, 1.5, &[0.1], DEFAULT_TOL).unwrap();
        let mut buf = Vec::new();
        write_csv(FamilyKind::ZeroSingular, &recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 8);
        assert!(row[7].is_empty() && !row[6].is_empty());
    }
}
