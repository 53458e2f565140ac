//! Correspondence between nonincreasing `phi` and the density
//! `f(u) = u |phi'(u)|`: `H phi - phi = Hf` and `phi = H*f`. Also the
//! sliding-window mollifier `phi_n(x) = n int_x^(x+1/n) phi`.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{HardyError, Result};
use crate::funcmodel::{abs_scale, antiderivative_atoms, collect_atoms, eval_atoms, PiecewiseFn, PowerLogAtom, TOL_EVAL};
use crate::norms::{lp_norm, CallableFn, QuadResult};
use crate::operators::{dual_hardy, hardy, hardy_minus_identity};
use crate::output::json_f64;
use crate::quad;

/// Number of log-spaced points in the pointwise identity checks.
pub const EQUIVALENCE_SAMPLES: usize = 64;

fn ensure_admissible(phi: &PiecewiseFn) -> Result<()> {
    if let Some(x) = phi.first_increase() {
        return Err(HardyError::NotMonotone { x });
    }
    if !phi.is_marked_nonnegative() {
        PiecewiseFn::new(phi.finite_breakpoints().to_vec(), phi.pieces().to_vec(), true)?;
    }
    Ok(())
}

/// Jumps larger than the evaluation tolerance, as `(at, size)`.
pub fn jumps(phi: &PiecewiseFn) -> Vec<(f64, f64)> {
    phi.breakpoint_limits()
        .into_iter()
        .enumerate()
        .filter_map(|(i, (b, left, right))| {
            let scale = abs_scale(&phi.pieces()[i], b) + abs_scale(&phi.pieces()[i + 1], b);
            ((left - right).abs() > TOL_EVAL * scale.max(f64::MIN_POSITIVE)).then_some((b, left - right))
        })
        .collect()
}

/// `f(u) = -u phi'(u)` on the partition of `phi`.
pub fn phi_to_f(phi: &PiecewiseFn) -> Result<PiecewiseFn> {
    ensure_admissible(phi)?;
    if let Some(&(at, size)) = jumps(phi).first() {
        return Err(HardyError::JumpDiscontinuity { at, size });
    }
    if phi.pieces().last().unwrap().iter().any(|a| a.exponent >= 0.0) {
        return Err(HardyError::NoDecayAtInfinity);
    }
    let pieces = phi
        .derivative()
        .pieces()
        .iter()
        .map(|p| collect_atoms(p.iter().map(|a| a.times_power(1.0).scaled(-1.0)).collect()))
        .collect();
    PiecewiseFn::from_parts(phi.finite_breakpoints().to_vec(), pieces, true)
}

/// `phi = H*f`, the inverse direction.
pub fn f_to_phi(f: &PiecewiseFn) -> Result<PiecewiseFn> {
    dual_hardy(f)
}

/// Window average `phi_n` of a nonincreasing `phi`.
///
/// Values are computed per overlapped piece with Gauss-Kronrod, which stays
/// accurate when the window is narrow relative to `x`.
#[derive(Debug, Clone)]
pub struct Mollified {
    phi: PiecewiseFn,
    n: u32,
}

pub fn mollify(phi: &PiecewiseFn, n: u32) -> Result<Mollified> {
    if n == 0 {
        return Err(HardyError::NotRepresentable("mollifier index must be positive".into()));
    }
    ensure_admissible(phi)?;
    Ok(Mollified { phi: phi.clone(), n })
}

impl Mollified {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn width(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn source(&self) -> &PiecewiseFn {
        &self.phi
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = (x, x + self.width());
        let mut total = 0.0;
        let mut i = self.phi.piece_index(a);
        loop {
            let (lo, hi) = self.phi.piece_bounds(i);
            let (s, t) = (a.max(lo), hi.map_or(b, |h| b.min(h)));
            let atoms = &self.phi.pieces()[i];
            if t > s && !atoms.is_empty() {
                total += piece_integral(atoms, s, t);
            }
            match hi {
                Some(h) if h < b => i += 1,
                _ => break,
            }
        }
        total * self.n as f64
    }

    /// Kinks of `phi_n`: breakpoints and their shifts by `-1/n`.
    pub fn kinks(&self) -> Vec<f64> {
        let h = self.width();
        let mut k: Vec<f64> = self.phi.finite_breakpoints()[1..]
            .iter()
            .flat_map(|&b| [b, b - h])
            .filter(|&x| x > 0.0)
            .collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    pub fn to_callable(&self) -> CallableFn {
        let last = self.phi.pieces().last().unwrap();
        let tail = last.iter().map(|a| a.exponent).fold(f64::NEG_INFINITY, f64::max);
        let me = self.clone();
        CallableFn::new(move |x| me.eval(x), self.kinks(), 0.0, tail)
    }

    /// Exact piecewise form; available when every piece of `phi` is a
    /// polynomial.
    pub fn to_piecewise(&self) -> Result<PiecewiseFn> {
        let polys: Vec<Vec<f64>> = self
            .phi
            .pieces()
            .iter()
            .map(|p| as_polynomial(p))
            .collect::<Option<_>>()
            .ok_or_else(|| HardyError::NotRepresentable("exact mollification needs polynomial pieces".into()))?;
        let anti: Vec<Vec<f64>> = polys.iter().map(|c| poly_antiderivative(c)).collect();
        let h = self.width();
        let n = self.n as f64;
        let mut breaks = vec![0.0];
        breaks.extend(self.kinks());
        let mut pieces = Vec::with_capacity(breaks.len());
        for j in 0..breaks.len() {
            let lo = breaks[j];
            let rep = match breaks.get(j + 1) {
                Some(&hi) => 0.5 * (lo + hi),
                None => lo + 1.0,
            };
            let first = self.phi.piece_index(rep);
            let last = self.phi.piece_index(rep + h);
            // n [G_first(end of first) - G_first(x)] + full pieces + n [G_last(x+h) - G_last(start of last)]
            let mut poly = vec![0.0];
            if first == last {
                poly_add(&mut poly, &poly_shift(&anti[first], h), 1.0);
                poly_add(&mut poly, &anti[first], -1.0);
            } else {
                let end_first = self.phi.piece_bounds(first).1.unwrap();
                poly_add(&mut poly, &[poly_eval(&anti[first], end_first)], 1.0);
                poly_add(&mut poly, &anti[first], -1.0);
                for m in first + 1..last {
                    let (a, b) = self.phi.piece_bounds(m);
                    poly_add(&mut poly, &[poly_eval(&anti[m], b.unwrap()) - poly_eval(&anti[m], a)], 1.0);
                }
                let start_last = self.phi.piece_bounds(last).0;
                poly_add(&mut poly, &poly_shift(&anti[last], h), 1.0);
                poly_add(&mut poly, &[poly_eval(&anti[last], start_last)], -1.0);
            }
            let atoms = poly
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(k, c)| PowerLogAtom::power(c * n, k as f64))
                .collect();
            pieces.push(collect_atoms(atoms));
        }
        PiecewiseFn::from_parts(breaks, pieces, true)
    }
}

fn piece_integral(atoms: &[PowerLogAtom], a: f64, b: f64) -> f64 {
    let g = |x: f64| eval_atoms(atoms, x);
    let rough = quad::integrate(&g, &[a, b], f64::INFINITY, 1).value.abs();
    let r = quad::integrate(&g, &[a, b], 1e-15 * rough.max(f64::MIN_POSITIVE), 200);
    if r.converged {
        r.value
    } else {
        // closed form as a fallback
        let anti: Vec<PowerLogAtom> = atoms.iter().flat_map(antiderivative_atoms).collect();
        eval_atoms(&anti, b) - eval_atoms(&anti, a)
    }
}

fn as_polynomial(atoms: &[PowerLogAtom]) -> Option<Vec<f64>> {
    let mut c = vec![0.0];
    for a in atoms {
        if a.log_power != 0 || a.exponent < 0.0 || a.exponent.fract() != 0.0 {
            return None;
        }
        let k = a.exponent as usize;
        if c.len() <= k {
            c.resize(k + 1, 0.0);
        }
        c[k] += a.coef;
    }
    Some(c)
}

fn poly_antiderivative(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(c.iter().enumerate().map(|(k, v)| v / (k + 1) as f64));
    out
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Coefficients of `x -> P(x + h)`.
fn poly_shift(c: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    for (k, &ck) in c.iter().enumerate() {
        let mut binom = 1.0;
        for j in 0..=k {
            // C(k, j) h^(k-j) x^j
            out[j] += ck * binom * h.powi((k - j) as i32);
            binom *= (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

fn poly_add(acc: &mut Vec<f64>, other: &[f64], sign: f64) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(other) {
        *a += sign * b;
    }
}

/// Log-spaced sample points over `[min_bp/10, 10 max_bp]`, breakpoints
/// excluded.
pub fn equivalence_samples(phi: &PiecewiseFn) -> Vec<f64> {
    let bps = &phi.finite_breakpoints()[1..];
    let (lo, hi) = match (bps.first(), bps.last()) {
        (Some(&a), Some(&b)) => (a / 10.0, b * 10.0),
        _ => (0.1, 10.0),
    };
    let n = EQUIVALENCE_SAMPLES;
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * (i as f64 + 0.5) / n as f64).exp())
        .map(|x| if bps.contains(&x) { x * (1.0 + 1e-9) } else { x })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormGap {
    pub name: &'static str,
    pub left: QuadResult,
    pub right: QuadResult,
    pub gap: f64,
    pub allowed: f64,
}

impl NormGap {
    fn new(name: &'static str, left: QuadResult, right: QuadResult) -> Self {
        let gap = (left.value - right.value).abs();
        let allowed = left.err + right.err + 1e-12 * left.value.abs().max(right.value.abs());
        Self { name, left, right, gap, allowed }
    }

    pub fn ok(&self) -> bool {
        self.gap <= self.allowed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub p: f64,
    pub tol: f64,
    /// Worst relative gap between `H phi - phi` and `Hf`.
    pub max_pointwise_gap_monot1: f64,
    pub worst_x_monot1: f64,
    /// Worst relative gap between `H*f` and `phi`.
    pub max_pointwise_gap_monot2: f64,
    pub worst_x_monot2: f64,
    pub norm_gaps: Vec<NormGap>,
    pub passed: bool,
}

impl EquivalenceReport {
    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "p": json_f64(self.p),
            "max_pointwise_gap_monot1": json_f64(self.max_pointwise_gap_monot1),
            "max_pointwise_gap_monot2": json_f64(self.max_pointwise_gap_monot2),
            "norm_gaps": self.norm_gaps.iter().map(|g| json!({
                "name": g.name,
                "left": json_f64(g.left.value),
                "left_err": json_f64(g.left.err),
                "right": json_f64(g.right.value),
                "right_err": json_f64(g.right.err),
                "gap": json_f64(g.gap),
                "allowed": json_f64(g.allowed),
            })).collect::<Vec<_>>(),
            "verdict": self.verdict(),
        })
    }
}

fn relative_gap(a: f64, b: f64, scale: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / scale.max(a.abs()).max(b.abs())
    }
}

/// Both identities at the sample points and both norm transports.
/// `tol` is the relative pointwise threshold and the quadrature tolerance.
pub fn equivalence_report(phi: &PiecewiseFn, p: f64, tol: f64) -> Result<EquivalenceReport> {
    let f = phi_to_f(phi)?;
    let diff = hardy_minus_identity(phi)?;
    let hphi = hardy(phi)?;
    let hf = hardy(&f)?;
    let back = f_to_phi(&f)?;
    let (mut g1, mut x1, mut g2, mut x2) = (0.0f64, f64::NAN, 0.0f64, f64::NAN);
    for x in equivalence_samples(phi) {
        let phi_x = phi.evaluate(x);
        // H phi - phi cancels down from the size of its terms
        let gap = relative_gap(diff.evaluate(x), hf.evaluate(x), phi_x.abs().max(hphi.evaluate(x).abs()));
        if gap > g1 || x1.is_nan() {
            (g1, x1) = (gap, x);
        }
        let gap = relative_gap(back.evaluate(x), phi_x, 0.0);
        if gap > g2 || x2.is_nan() {
            (g2, x2) = (gap, x);
        }
    }
    let norm_gaps = vec![
        NormGap::new("H_phi_minus_phi_vs_Hf", lp_norm(&diff, p, tol)?, lp_norm(&hf, p, tol)?),
        NormGap::new("phi_vs_Hstar_f", lp_norm(phi, p, tol)?, lp_norm(&back, p, tol)?),
    ];
    let passed = g1 <= tol && g2 <= tol && norm_gaps.iter().all(NormGap::ok);
    Ok(EquivalenceReport {
        p,
        tol,
        max_pointwise_gap_monot1: g1,
        worst_x_monot1: x1,
        max_pointwise_gap_monot2: g2,
        worst_x_monot2: x2,
        norm_gaps,
        passed,
    })
}

/// [`equivalence_report`], failing with the worst sample on any violation.
pub fn check_equivalence(phi: &PiecewiseFn, p: f64, tol: f64) -> Result<EquivalenceReport> {
    let r = equivalence_report(phi, p, tol)?;
    if r.max_pointwise_gap_monot1 > tol {
        return Err(HardyError::EquivalenceViolated {
            x: r.worst_x_monot1,
            what: "H phi - phi vs Hf".into(),
            gap: r.max_pointwise_gap_monot1,
        });
    }
    if r.max_pointwise_gap_monot2 > tol {
        return Err(HardyError::EquivalenceViolated {
            x: r.worst_x_monot2,
            what: "H*f vs phi".into(),
            gap: r.max_pointwise_gap_monot2,
        });
    }
    if let Some(g) = r.norm_gaps.iter().find(|g| !g.ok()) {
        return Err(HardyError::EquivalenceViolated { x: f64::NAN, what: g.name.into(), gap: g.gap });
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::DEFAULT_TOL;

    fn ramp() -> PiecewiseFn {
        PiecewiseFn::new(
            vec![0.0, 1.0],
            vec![vec![PowerLogAtom::constant(1.0), PowerLogAtom::power(-1.0, 1.0)], vec![]],
            true,
        )
        .unwrap()
    }

    fn sqrt_tail() -> PiecewiseFn {
        PiecewiseFn::new(
            vec![0.0, 1.0],
            vec![vec![PowerLogAtom::constant(1.0)], vec![PowerLogAtom::power(1.0, -0.5)]],
            true,
        )
        .unwrap()
    }

    #[test]
    fn phi_to_f_examples() {
        let f = phi_to_f(&ramp()).unwrap();
        assert_eq!(f.pieces()[0], vec![PowerLogAtom::power(1.0, 1.0)]);
        assert!(f.pieces()[1].is_empty());

        let phi = PiecewiseFn::new(
            vec![0.0, 1.0],
            vec![vec![PowerLogAtom::constant(1.0)], vec![PowerLogAtom::power(1.0, -1.0)]],
            true,
        )
        .unwrap();
        let f = phi_to_f(&phi).unwrap();
        assert!(f.pieces()[0].is_empty());
        assert_eq!(f.pieces()[1], vec![PowerLogAtom::power(1.0, -1.0)]);

        let chi = PiecewiseFn::indicator(0.0, Some(1.0), 1.0).unwrap();
        assert!(matches!(phi_to_f(&chi), Err(HardyError::JumpDiscontinuity { at, .. }) if at == 1.0));
        let c = PiecewiseFn::new(vec![0.0], vec![vec![PowerLogAtom::constant(1.0)]], true).unwrap();
        assert!(matches!(phi_to_f(&c), Err(HardyError::NoDecayAtInfinity)));
    }

    #[test]
    fn f_to_phi_examples() {
        let f = PiecewiseFn::power_on(1.0, 0.0, Some(1.0), 1.0).unwrap();
        let phi = f_to_phi(&f).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert!((phi.evaluate(x) - (1.0 - x)).abs() < 1e-15);
        }
        assert_eq!(phi.evaluate(2.0), 0.0);
        assert!(f_to_phi(&PiecewiseFn::zero()).unwrap().is_zero());
    }

    #[test]
    fn mollify_step_exact() {
        let chi = PiecewiseFn::indicator(0.0, Some(1.0), 1.0).unwrap();
        let m = mollify(&chi, 4).unwrap();
        let pw = m.to_piecewise().unwrap();
        assert_eq!(pw.finite_breakpoints(), &[0.0, 0.75, 1.0]);
        for x in [0.1, 0.5, 0.75, 0.8, 0.9, 1.0, 1.5] {
            let expect = if x <= 0.75 { 1.0 } else if x <= 1.0 { 4.0 * (1.0 - x) } else { 0.0 };
            assert!((pw.evaluate(x) - expect).abs() < 1e-14, "x = {x}");
            assert!((m.eval(x) - expect).abs() < 1e-14, "x = {x}");
        }
        assert!(pw.is_nonincreasing());
        assert!(jumps(&pw).is_empty());
    }

    #[test]
    fn mollify_constant_and_convergence() {
        let c = PiecewiseFn::new(vec![0.0], vec![vec![PowerLogAtom::constant(2.0)]], true).unwrap();
        let m = mollify(&c, 3).unwrap();
        assert!((m.eval(0.7) - 2.0).abs() < 1e-15);
        let phi = sqrt_tail();
        for x in [0.5, 2.0, 7.0] {
            let gaps: Vec<f64> = [4, 64, 1024].iter().map(|&n| (mollify(&phi, n).unwrap().eval(x) - phi.evaluate(x)).abs()).collect();
            assert!(gaps[0] >= gaps[1] && gaps[1] >= gaps[2] && gaps[2] < 1e-3, "{gaps:?}");
        }
        let inc = PiecewiseFn::power_on(1.0, 0.0, Some(1.0), 1.0).unwrap();
        assert!(matches!(mollify(&inc, 2), Err(HardyError::NotMonotone { .. })));
    }

    #[test]
    fn equivalence_examples() {
        let r = check_equivalence(&ramp(), 2.0, DEFAULT_TOL).unwrap();
        assert!(r.passed && r.max_pointwise_gap_monot1 < 1e-12);
        let r = check_equivalence(&sqrt_tail(), 3.0, DEFAULT_TOL).unwrap();
        assert!(r.passed, "{r:?}");
        let f = phi_to_f(&sqrt_tail()).unwrap();
        assert_eq!(f.pieces()[1], vec![PowerLogAtom::power(0.5, -0.5)]);
        assert!(check_equivalence(&PiecewiseFn::zero(), 2.0, DEFAULT_TOL).unwrap().passed);
    }

    #[test]
    fn samples_avoid_breakpoints() {
        let s = equivalence_samples(&ramp());
        assert_eq!(s.len(), EQUIVALENCE_SAMPLES);
        assert!(s[0] >= 0.1 && *s.last().unwrap() <= 10.0);
        assert!(!s.contains(&1.0));
    }
}
