//! L^p norms of piecewise power-log functions with error estimates, and the
//! two integral identities used to cross-check `||Hf||_p^p` and
//! `||H*f||_p^p`.
//!
//! Every piece is integrated in the variable `s = ln x`, where the graded
//! refinement toward `0` and `inf` becomes uniform and the integrand can be
//! evaluated from atom logarithms without forming `x`. Semi-infinite ranges
//! are cut at a point where an analytic bound on the remainder, an upper
//! incomplete gamma integral `int_U^inf e^(-lambda u) u^beta du`, falls below
//! the budget. The bound is added to the reported error.

mod numeric;

pub use numeric::{
    integrate_callable, lp_norm_callable, numeric_dual_hardy, numeric_dual_hardy_with_tol,
    numeric_hardy, numeric_hardy_with_tol, CallableFn,
};
pub use crate::quad::QuadResult;

use crate::error::{HardyError, Result};
use crate::funcmodel::{eval_atoms_log, PiecewiseFn, PowerLogAtom};
use crate::operators::{cumulative_integral, dual_hardy};
use crate::quad;

/// Default relative tolerance on `norm^p`.
pub const DEFAULT_TOL: f64 = 1e-9;

const MAX_SEGMENTS: usize = 4000;
// cut points beyond |ln x| = 1e8 are treated as non-convergence
const MAX_LOG_EXTENT: f64 = 1e8;

/// `|g|^power` inside a product integrand.
#[derive(Debug, Clone, Copy)]
struct Factor<'a> {
    atoms: &'a [PowerLogAtom],
    power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Zero,
    Infinity,
}

impl Side {
    fn name(self) -> &'static str {
        match self {
            Side::Zero => "0",
            Side::Infinity => "infinity",
        }
    }
}

/// Bound on `int_{|s| >= u} prod |g_j(e^s)|^q_j e^((r+1)s) ds` for one side.
struct TailBound<'a> {
    factors: &'a [Factor<'a>],
    side: Side,
    // decay rate of the integrand in |s|
    lambda: f64,
    // polynomial degree in |s|
    beta: f64,
}

impl<'a> TailBound<'a> {
    fn new(factors: &'a [Factor<'a>], x_power: f64, side: Side) -> Result<Self> {
        let mut rate = x_power + 1.0;
        let mut beta = 0.0;
        for f in factors {
            let lead = leading_exponent(f.atoms, side);
            rate += f.power * lead;
            beta += f.power * f.atoms.iter().map(|a| a.log_power).max().unwrap_or(0) as f64;
        }
        let lambda = match side {
            Side::Zero => rate,
            Side::Infinity => -rate,
        };
        if !(lambda > 0.0) {
            return Err(HardyError::NormDiverges { end: side.name(), exponent: rate - 1.0 });
        }
        Ok(Self { factors, side, lambda, beta })
    }

    /// ln of the remainder bound at `u >= 1` with `lambda u > beta`.
    fn ln_bound(&self, u: f64) -> f64 {
        let mut ln_m = 0.0;
        for f in self.factors {
            let lead = leading_exponent(f.atoms, self.side);
            let m: f64 = f
                .atoms
                .iter()
                .map(|a| a.coef.abs() * (-(a.exponent - lead).abs() * u).exp())
                .sum();
            ln_m += f.power * m.ln();
        }
        let (l, b) = (self.lambda, self.beta);
        let lu = l * u;
        // Gamma(b+1, lu) <= (lu)^b e^(-lu) * lu / (lu - b)
        ln_m - (b + 1.0) * l.ln() + b * lu.ln() - lu + (lu / (lu - b)).ln()
    }

    /// Smallest `u >= start` on a geometric ladder with bound below `tau`.
    fn cut(&self, start: f64, tau: f64) -> Result<(f64, f64)> {
        let mut u = start.max(1.0).max(2.0 * self.beta / self.lambda);
        let ln_tau = tau.ln();
        loop {
            let lb = self.ln_bound(u);
            if lb <= ln_tau {
                return Ok((u, lb.exp()));
            }
            u *= 1.25;
            if u > MAX_LOG_EXTENT {
                return Err(HardyError::NotConverged { value: f64::NAN, err: lb.exp(), target: tau });
            }
        }
    }
}

fn leading_exponent(atoms: &[PowerLogAtom], side: Side) -> f64 {
    let it = atoms.iter().map(|a| a.exponent);
    match side {
        Side::Zero => it.fold(f64::INFINITY, f64::min),
        Side::Infinity => it.fold(f64::NEG_INFINITY, f64::max),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// `int_lo^hi x^x_power prod |g_j|^q_j dx` over one piece, relative
/// tolerance `tol` (absolute when the integral is numerically zero).
fn piece_integral(lo: f64, hi: Option<f64>, factors: &[Factor], x_power: f64, tol: f64) -> Result<QuadResult> {
    if factors.iter().any(|f| f.power > 0.0 && f.atoms.is_empty()) {
        return Ok(QuadResult::ZERO);
    }
    let integrand = |s: f64| -> f64 {
        let mut log = (x_power + 1.0) * s;
        for f in factors {
            if f.power == 0.0 {
                continue;
            }
            let (m, scale) = eval_atoms_log(f.atoms, s);
            if m == 0.0 {
                return 0.0;
            }
            log += f.power * (m.abs().ln() + scale);
        }
        log.exp()
    };

    let left = if lo == 0.0 { Some(TailBound::new(factors, x_power, Side::Zero)?) } else { None };
    let right = if hi.is_none() { Some(TailBound::new(factors, x_power, Side::Infinity)?) } else { None };
    // the tail bounds hold for |s| >= start
    let left_start = hi.map_or(1.0, |h| (-h.ln()).max(1.0));
    let right_start = if lo > 0.0 { lo.ln().max(1.0) } else { 1.0 };
    let s_lo_fixed = if lo > 0.0 { lo.ln() } else { f64::NAN };
    let s_hi_fixed = hi.map_or(f64::NAN, f64::ln);

    let span = |u_left: f64, u_right: f64| -> (f64, f64) {
        let a = if left.is_some() { -u_left } else { s_lo_fixed };
        let b = if right.is_some() { u_right } else { s_hi_fixed };
        (a, b)
    };

    // rough lower estimate of the integral to turn `tol` into an absolute target
    let (a0, b0) = span(
        left.as_ref().map_or(0.0, |t| left_start + 3.0 / t.lambda),
        right.as_ref().map_or(0.0, |t| right_start + 3.0 / t.lambda),
    );
    let rough = quad::integrate(&integrand, &linspace(a0, b0, 8), 0.0, 64).value;
    let target = if rough > 0.0 { tol * rough } else { tol };

    let tau = target / 8.0;
    let (u_left, t_left) = match &left {
        Some(t) => t.cut(left_start, tau)?,
        None => (0.0, 0.0),
    };
    let (u_right, t_right) = match &right {
        Some(t) => t.cut(right_start, tau)?,
        None => (0.0, 0.0),
    };
    let (a, b) = span(u_left, u_right);
    let n_init = if left.is_some() || right.is_some() { 16 } else { 4 };
    let core = quad::integrate(&integrand, &linspace(a, b, n_init), 0.5 * target, MAX_SEGMENTS);
    let err = core.err + t_left + t_right;
    Ok(QuadResult { value: core.value, err, converged: core.converged && err <= target })
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(HardyError::BadExponent(p))
    }
}

/// `int_0^inf |g|^p dx` with its error estimate; reports non-convergence in
/// the flag instead of failing.
pub fn lp_norm_pow(g: &PiecewiseFn, p: f64, tol: f64) -> Result<QuadResult> {
    check_p(p)?;
    let mut total = QuadResult::ZERO;
    for (i, atoms) in g.pieces().iter().enumerate() {
        if atoms.is_empty() {
            continue;
        }
        let (lo, hi) = g.piece_bounds(i);
        let r = piece_integral(lo, hi, &[Factor { atoms, power: p }], 0.0, tol)?;
        total = total.plus(r);
    }
    Ok(total)
}

/// `||g||_p` with a propagated error bound.
pub fn lp_norm(g: &PiecewiseFn, p: f64, tol: f64) -> Result<QuadResult> {
    let pow = lp_norm_pow(g, p, tol)?;
    if !pow.converged {
        return Err(HardyError::NotConverged { value: pow.value, err: pow.err, target: tol * pow.value });
    }
    Ok(pow.pth_root(p))
}

/// `I_p = p' int_0^inf x^(1-p) f(x) (int_0^x f)^(p-1) dx`, the integrated
/// by parts form of `||Hf||_p^p`.
pub fn ip_via_parts(f: &PiecewiseFn, p: f64, tol: f64) -> Result<QuadResult> {
    check_p(p)?;
    let cum = cumulative_integral(f)?;
    let mut total = QuadResult::ZERO;
    for (i, atoms) in f.pieces().iter().enumerate() {
        if atoms.is_empty() {
            continue;
        }
        let (lo, hi) = f.piece_bounds(i);
        let factors = [Factor { atoms, power: 1.0 }, Factor { atoms: &cum.pieces()[i], power: p - 1.0 }];
        total = total.plus(piece_integral(lo, hi, &factors, 1.0 - p, tol)?);
    }
    let r = total.scaled(p / (p - 1.0));
    if !r.converged {
        return Err(HardyError::NotConverged { value: r.value, err: r.err, target: tol * r.value });
    }
    Ok(r)
}

/// `I_p* = p int_0^inf f(x) (int_x^inf f(u)/u du)^(p-1) dx`, the Fubini
/// form of `||H*f||_p^p`.
pub fn ipstar_via_fubini(f: &PiecewiseFn, p: f64, tol: f64) -> Result<QuadResult> {
    check_p(p)?;
    let tail = dual_hardy(f)?;
    let mut total = QuadResult::ZERO;
    for (i, atoms) in f.pieces().iter().enumerate() {
        if atoms.is_empty() {
            continue;
        }
        let (lo, hi) = f.piece_bounds(i);
        let factors = [Factor { atoms, power: 1.0 }, Factor { atoms: &tail.pieces()[i], power: p - 1.0 }];
        total = total.plus(piece_integral(lo, hi, &factors, 0.0, tol)?);
    }
    let r = total.scaled(p);
    if !r.converged {
        return Err(HardyError::NotConverged { value: r.value, err: r.err, target: tol * r.value });
    }
    Ok(r)
}
