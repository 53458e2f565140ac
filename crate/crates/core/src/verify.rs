//! Sharp and crude constants for `||H*f||_p / ||Hf||_p` and three-valued
//! verdicts on concrete inputs.

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::funcmodel::PiecewiseFn;
use crate::norms::{lp_norm_pow, QuadResult};
use crate::operators::{dual_hardy, hardy, hardy_minus_identity};

/// Exponents used by the property suites.
pub const P_GRID: [f64; 9] = [1.1, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 8.0];

/// Norms below this are treated as an a.e. zero input.
pub const DEGENERATE_NORM: f64 = 1e-100;

/// Relative slack granted to every bound on top of the quadrature error.
pub const BOUND_REL_SLACK: f64 = 1e-12;

// A verdict within budget counts as attained equality when the budget is
// this small relative to the bound.
const EQUALITY_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub p: f64,
    pub p_conj: f64,
    pub lower: f64,
    pub upper: f64,
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(HardyError::BadExponent(p))
    }
}

pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Best constants: `(p-1, (p-1)^(1/p))` for `p <= 2`, swapped for `p >= 2`.
pub fn sharp_constants(p: f64) -> Result<Constants> {
    check_p(p)?;
    let a = p - 1.0;
    let b = a.powf(1.0 / p);
    let (lower, upper) = if p <= 2.0 { (a, b) } else { (b, a) };
    Ok(Constants { p, p_conj: conjugate(p), lower, upper })
}

/// The classical pair `(1/p', p)` from the one-sided Hardy inequalities.
pub fn crude_constants(p: f64) -> Result<Constants> {
    check_p(p)?;
    let p_conj = conjugate(p);
    Ok(Constants { p, p_conj, lower: 1.0 / p_conj, upper: p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "Holds",
            Verdict::Violated => "Violated",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationReport {
    pub p: f64,
    pub ratio: f64,
    pub ratio_err: f64,
    pub lower: f64,
    pub upper: f64,
    pub verdict_lower: Verdict,
    pub verdict_upper: Verdict,
    pub budget: f64,
    #[serde(skip)]
    pub p_conj: f64,
    /// Norm in the numerator of the ratio.
    #[serde(skip)]
    pub numerator: QuadResult,
    /// Norm in the denominator of the ratio.
    #[serde(skip)]
    pub denominator: QuadResult,
}

impl VerificationReport {
    pub fn bounds(&self) -> Constants {
        Constants { p: self.p, p_conj: self.p_conj, lower: self.lower, upper: self.upper }
    }

    pub fn is_violated(&self) -> bool {
        self.verdict_lower == Verdict::Violated || self.verdict_upper == Verdict::Violated
    }

    pub fn all_hold(&self) -> bool {
        self.verdict_lower == Verdict::Holds && self.verdict_upper == Verdict::Holds
    }
}

fn verdict(slack: f64, budget: f64, bound: f64, converged: bool) -> Verdict {
    if !converged || !slack.is_finite() {
        if slack > budget {
            Verdict::Holds
        } else {
            Verdict::Inconclusive
        }
    } else if slack > budget {
        Verdict::Holds
    } else if slack < -budget {
        Verdict::Violated
    } else if budget <= EQUALITY_REL * bound.abs() {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    }
}

/// Ratio of two norms with an interval error, then verdicts against `bounds`.
pub fn report_from_norms(num: QuadResult, den: QuadResult, bounds: Constants) -> Result<VerificationReport> {
    if den.value < DEGENERATE_NORM {
        return Err(HardyError::DegenerateInput(den.value));
    }
    let ratio = num.value / den.value;
    let hi = num.upper() / den.lower();
    let lo = num.lower().max(0.0) / den.upper();
    let ratio_err = if den.lower() > 0.0 { (hi - ratio).max(ratio - lo) } else { f64::INFINITY };
    let budget = ratio_err + bounds.lower.abs().max(bounds.upper.abs()) * BOUND_REL_SLACK;
    let converged = num.converged && den.converged;
    Ok(VerificationReport {
        p: bounds.p,
        ratio,
        ratio_err,
        lower: bounds.lower,
        upper: bounds.upper,
        verdict_lower: verdict(ratio - bounds.lower, budget, bounds.lower, converged),
        verdict_upper: verdict(bounds.upper - ratio, budget, bounds.upper, converged),
        budget,
        p_conj: bounds.p_conj,
        numerator: num,
        denominator: den,
    })
}

fn ensure_nonnegative(f: &PiecewiseFn) -> Result<()> {
    if f.is_marked_nonnegative() {
        return Ok(());
    }
    PiecewiseFn::new(f.finite_breakpoints().to_vec(), f.pieces().to_vec(), true).map(|_| ())
}

fn operator_norms(f: &PiecewiseFn, p: f64, tol: f64) -> Result<(QuadResult, QuadResult)> {
    check_p(p)?;
    ensure_nonnegative(f)?;
    let hf = lp_norm_pow(&hardy(f)?, p, tol)?.pth_root(p);
    let hsf = lp_norm_pow(&dual_hardy(f)?, p, tol)?.pth_root(p);
    Ok((hsf, hf))
}

/// `||H*f||_p / ||Hf||_p` against the sharp constants.
pub fn verify_theorem1(f: &PiecewiseFn, p: f64, tol: f64) -> Result<VerificationReport> {
    let (num, den) = operator_norms(f, p, tol)?;
    report_from_norms(num, den, sharp_constants(p)?)
}

/// `||H*f||_p / ||Hf||_p` against `(1/p', p)`.
pub fn verify_crude(f: &PiecewiseFn, p: f64, tol: f64) -> Result<VerificationReport> {
    let (num, den) = operator_norms(f, p, tol)?;
    report_from_norms(num, den, crude_constants(p)?)
}

/// Sharp and crude reports sharing one pair of norm computations.
pub fn verify_theorem1_and_crude(f: &PiecewiseFn, p: f64, tol: f64) -> Result<(VerificationReport, VerificationReport)> {
    let (num, den) = operator_norms(f, p, tol)?;
    Ok((report_from_norms(num, den, sharp_constants(p)?)?, report_from_norms(num, den, crude_constants(p)?)?))
}

/// `||phi||_p / ||H phi - phi||_p` for nonincreasing `phi` against the
/// sharp constants.
pub fn verify_theorem2(phi: &PiecewiseFn, p: f64, tol: f64) -> Result<VerificationReport> {
    check_p(p)?;
    ensure_nonnegative(phi)?;
    let diff = hardy_minus_identity(phi)?;
    let num = lp_norm_pow(phi, p, tol)?.pth_root(p);
    let den = lp_norm_pow(&diff, p, tol)?.pth_root(p);
    report_from_norms(num, den, sharp_constants(p)?)
}
