//! Exact Hardy average, its dual and the difference operator `H phi - phi`
//! on [`PiecewiseFn`].
//!
//! Both operators run a single pass over the pieces: forward for `H`
//! (accumulating `int_0^lo f`), backward for `H*` (accumulating
//! `int_hi^inf f(t)/t dt`). Endpoint values of antiderivatives use closed
//! forms, so outputs are exact up to floating rounding.

use crate::error::{HardyError, Result};
use crate::funcmodel::{antiderivative_atoms, collect_atoms, eval_atoms, PiecewiseFn, PowerLogAtom};

fn antiderivative_sum(atoms: &[PowerLogAtom]) -> Vec<PowerLogAtom> {
    collect_atoms(atoms.iter().flat_map(antiderivative_atoms).collect())
}

/// `F(x) = int_0^x f(t) dt` on the partition of `f`.
pub fn cumulative_integral(f: &PiecewiseFn) -> Result<PiecewiseFn> {
    if let Some(a) = f.pieces()[0].iter().find(|a| a.exponent <= -1.0) {
        return Err(HardyError::DivergentAtZero { exponent: a.exponent });
    }
    let mut acc = 0.0;
    let mut pieces = Vec::with_capacity(f.num_pieces());
    for (i, atoms) in f.pieces().iter().enumerate() {
        let (lo, hi) = f.piece_bounds(i);
        let anti = antiderivative_sum(atoms);
        // every first-piece antiderivative atom has positive exponent
        let at_lo = if i == 0 { 0.0 } else { eval_atoms(&anti, lo) };
        let mut out = anti.clone();
        out.push(PowerLogAtom::constant(acc - at_lo));
        if let Some(hi) = hi {
            acc += eval_atoms(&anti, hi) - at_lo;
        }
        pieces.push(out);
    }
    PiecewiseFn::from_parts(f.finite_breakpoints().to_vec(), pieces, f.is_marked_nonnegative())
}

/// Hardy average `Hf(x) = (1/x) int_0^x f(t) dt`.
pub fn hardy(f: &PiecewiseFn) -> Result<PiecewiseFn> {
    let cum = cumulative_integral(f)?;
    let pieces = cum
        .pieces()
        .iter()
        .map(|p| p.iter().map(|a| a.times_power(-1.0)).collect())
        .collect();
    PiecewiseFn::from_parts(f.finite_breakpoints().to_vec(), pieces, f.is_marked_nonnegative())
}

/// Dual average `H*f(x) = int_x^inf f(t)/t dt`.
pub fn dual_hardy(f: &PiecewiseFn) -> Result<PiecewiseFn> {
    let n = f.num_pieces();
    if let Some(a) = f.pieces()[n - 1].iter().find(|a| a.exponent >= 0.0) {
        return Err(HardyError::DivergentAtInfinity { exponent: a.exponent });
    }
    let mut tail = 0.0;
    let mut pieces = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let (lo, hi) = f.piece_bounds(i);
        let over_t: Vec<_> = f.pieces()[i].iter().map(|a| a.times_power(-1.0)).collect();
        let anti = antiderivative_sum(&over_t);
        // on the unbounded piece every antiderivative atom has negative exponent
        let at_hi = hi.map_or(0.0, |hi| eval_atoms(&anti, hi));
        let mut out: Vec<_> = anti.iter().map(|a| a.scaled(-1.0)).collect();
        out.push(PowerLogAtom::constant(tail + at_hi));
        if lo > 0.0 {
            tail += at_hi - eval_atoms(&anti, lo);
        }
        pieces[i] = out;
    }
    PiecewiseFn::from_parts(f.finite_breakpoints().to_vec(), pieces, f.is_marked_nonnegative())
}

/// `H phi - phi` for nonincreasing `phi`; nonnegative by construction.
pub fn hardy_minus_identity(phi: &PiecewiseFn) -> Result<PiecewiseFn> {
    if let Some(x) = phi.first_increase() {
        return Err(HardyError::NotMonotone { x });
    }
    let h = hardy(phi)?;
    let pieces = h
        .pieces()
        .iter()
        .zip(phi.pieces())
        .map(|(hp, pp)| {
            let mut atoms = hp.clone();
            atoms.extend(pp.iter().map(|a| a.scaled(-1.0)));
            atoms
        })
        .collect();
    PiecewiseFn::from_parts(phi.finite_breakpoints().to_vec(), pieces, true)
}
