//! Piecewise power-log functions on the half line.
//!
//! A [`PiecewiseFn`] is a partition `0 = b0 < b1 < ... < bn = +inf` together
//! with a list of [`PowerLogAtom`]s per interval. Intervals are half open,
//! `(lo, hi]`, and infinity is kept symbolic. The class is closed under the
//! Hardy average, its dual and antidifferentiation, which is what lets the
//! operators module work exactly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};

/// Largest power of `ln x` an atom may carry.
pub const MAX_LOG_POWER: u32 = 8;

/// Relative slack used by sampled sign and monotonicity checks.
pub const TOL_EVAL: f64 = 1e-10;

/// Coefficients below this magnitude are dropped when collecting terms.
pub const COEF_FLOOR: f64 = 1e-300;

/// Samples per piece for the sampled checks.
pub const SAMPLES_PER_PIECE: usize = 256;

// Exponents this close to -1 integrate to a logarithm.
const RECIPROCAL_SNAP: f64 = 1e-12;

/// One term `coef * x^exponent * (ln x)^log_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLogAtom {
    pub coef: f64,
    pub exponent: f64,
    pub log_power: u32,
}

impl PowerLogAtom {
    pub const fn new(coef: f64, exponent: f64, log_power: u32) -> Self {
        Self { coef, exponent, log_power }
    }

    pub const fn constant(coef: f64) -> Self {
        Self::new(coef, 0.0, 0)
    }

    pub const fn power(coef: f64, exponent: f64) -> Self {
        Self::new(coef, exponent, 0)
    }

    pub fn is_finite(&self) -> bool {
        self.coef.is_finite() && self.exponent.is_finite()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.coef * x.powf(self.exponent);
        if self.log_power > 0 {
            v *= x.ln().powi(self.log_power as i32);
        }
        v
    }

    /// Value at `x = e^s` as `(sign, ln|value|)`; works where `x` itself
    /// would under- or overflow.
    pub fn eval_log(&self, s: f64) -> (f64, f64) {
        if self.coef == 0.0 || (self.log_power > 0 && s == 0.0) {
            return (0.0, f64::NEG_INFINITY);
        }
        let mut sign = self.coef.signum();
        let mut mag = self.coef.abs().ln() + self.exponent * s;
        if self.log_power > 0 {
            if s < 0.0 && self.log_power % 2 == 1 {
                sign = -sign;
            }
            mag += self.log_power as f64 * s.abs().ln();
        }
        (sign, mag)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { coef: self.coef * factor, ..*self }
    }

    pub fn times_power(&self, shift: f64) -> Self {
        Self { exponent: self.exponent + shift, ..*self }
    }

    pub fn derivative(&self) -> Vec<PowerLogAtom> {
        let mut out = Vec::with_capacity(2);
        if self.exponent != 0.0 {
            out.push(Self::new(self.coef * self.exponent, self.exponent - 1.0, self.log_power));
        }
        if self.log_power > 0 {
            out.push(Self::new(
                self.coef * self.log_power as f64,
                self.exponent - 1.0,
                self.log_power - 1,
            ));
        }
        out
    }

    /// Limit as `x -> 0+`; `None` when the atom is unbounded there.
    pub fn limit_at_zero(&self) -> Option<f64> {
        if self.coef == 0.0 || self.exponent > 0.0 {
            Some(0.0)
        } else if self.exponent == 0.0 && self.log_power == 0 {
            Some(self.coef)
        } else {
            None
        }
    }

    /// Limit as `x -> +inf`; `None` when the atom is unbounded there.
    pub fn limit_at_infinity(&self) -> Option<f64> {
        if self.coef == 0.0 || self.exponent < 0.0 {
            Some(0.0)
        } else if self.exponent == 0.0 && self.log_power == 0 {
            Some(self.coef)
        } else {
            None
        }
    }

    fn is_reciprocal(&self) -> bool {
        (self.exponent + 1.0).abs() <= RECIPROCAL_SNAP
    }
}

/// Antiderivative of a single atom, without constant of integration.
///
/// For `a != -1` repeated integration by parts gives
/// `x^(a+1) * sum_j (-1)^j k!/(k-j)! (ln x)^(k-j) / (a+1)^(j+1)`;
/// for `a = -1` the result is `(ln x)^(k+1) / (k+1)`.
pub fn antiderivative_atoms(atom: &PowerLogAtom) -> Vec<PowerLogAtom> {
    let k = atom.log_power;
    if atom.coef == 0.0 {
        return Vec::new();
    }
    if atom.is_reciprocal() {
        return vec![PowerLogAtom::new(atom.coef / (k as f64 + 1.0), 0.0, k + 1)];
    }
    let b = atom.exponent + 1.0;
    let mut out = Vec::with_capacity(k as usize + 1);
    // c_j = (-1)^j k!/(k-j)! / b^(j+1)
    let mut c = atom.coef / b;
    for j in 0..=k {
        out.push(PowerLogAtom::new(c, b, k - j));
        c *= -((k - j) as f64) / b;
    }
    out
}

/// Merge atoms with equal `(exponent, log_power)`; the output is sorted.
pub fn collect_atoms(mut atoms: Vec<PowerLogAtom>) -> Vec<PowerLogAtom> {
    atoms.retain(|a| a.coef != 0.0);
    atoms.sort_by(|x, y| {
        x.exponent
            .total_cmp(&y.exponent)
            .then(x.log_power.cmp(&y.log_power))
    });
    let mut out: Vec<PowerLogAtom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if last.exponent == a.exponent && last.log_power == a.log_power => {
                last.coef += a.coef;
            }
            _ => out.push(a),
        }
    }
    out.retain(|a| a.coef.abs() >= COEF_FLOOR);
    out
}

pub fn eval_atoms(atoms: &[PowerLogAtom], x: f64) -> f64 {
    atoms.iter().map(|a| a.eval(x)).sum()
}

/// `sum |term|` at `x`; the natural scale for rounding in [`eval_atoms`].
pub fn abs_scale(atoms: &[PowerLogAtom], x: f64) -> f64 {
    atoms.iter().map(|a| a.eval(x).abs()).sum()
}

/// Sum of atoms at `x = e^s`, returned as `(mantissa, log_scale)` with the
/// value equal to `mantissa * exp(log_scale)`.
pub fn eval_atoms_log(atoms: &[PowerLogAtom], s: f64) -> (f64, f64) {
    let mut terms = [(0.0, 0.0); 32];
    let mut spill = Vec::new();
    let buf: &mut [(f64, f64)] = if atoms.len() <= terms.len() {
        &mut terms[..atoms.len()]
    } else {
        spill.resize(atoms.len(), (0.0, 0.0));
        &mut spill[..]
    };
    let mut scale = f64::NEG_INFINITY;
    for (slot, a) in buf.iter_mut().zip(atoms) {
        *slot = a.eval_log(s);
        if slot.0 != 0.0 && slot.1 > scale {
            scale = slot.1;
        }
    }
    if scale == f64::NEG_INFINITY {
        return (0.0, 0.0);
    }
    let mant = buf
        .iter()
        .filter(|t| t.0 != 0.0)
        .map(|&(sign, mag)| sign * (mag - scale).exp())
        .sum();
    (mant, scale)
}

fn check_atoms(atoms: &[PowerLogAtom]) -> Result<()> {
    for a in atoms {
        if !a.is_finite() {
            return Err(HardyError::NonFiniteAtom(format!("{a:?}")));
        }
        if a.log_power > MAX_LOG_POWER {
            return Err(HardyError::LogPowerCap(a.log_power));
        }
    }
    Ok(())
}

/// A partition endpoint; infinity is symbolic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Infinity,
}

impl Bound {
    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Infinity => None,
        }
    }
}

/// Piecewise power-log function on `(0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFn {
    // finite breakpoints, starting with 0; the final +inf is implicit
    breaks: Vec<f64>,
    pieces: Vec<Vec<PowerLogAtom>>,
    nonneg: bool,
}

/// Validated construction from a full breakpoint list (ending in infinity).
pub fn make_piecewise(
    breakpoints: &[Bound],
    pieces: Vec<Vec<PowerLogAtom>>,
    require_nonneg: bool,
) -> Result<PiecewiseFn> {
    let Some((Bound::Infinity, finite)) = breakpoints.split_last() else {
        return Err(HardyError::MalformedPartition("last breakpoint must be infinity".into()));
    };
    let mut breaks = Vec::with_capacity(finite.len());
    for b in finite {
        match b {
            Bound::Finite(v) => breaks.push(*v),
            Bound::Infinity => {
                return Err(HardyError::MalformedPartition(
                    "infinity may only appear as the last breakpoint".into(),
                ))
            }
        }
    }
    PiecewiseFn::new(breaks, pieces, require_nonneg)
}

impl PiecewiseFn {
    /// `breaks` lists the finite breakpoints starting with 0; the last piece
    /// is unbounded.
    pub fn new(breaks: Vec<f64>, pieces: Vec<Vec<PowerLogAtom>>, require_nonneg: bool) -> Result<Self> {
        if breaks.first() != Some(&0.0) {
            return Err(HardyError::MalformedPartition("first breakpoint must be 0".into()));
        }
        if let Some(w) = breaks.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(HardyError::MalformedPartition(format!(
                "breakpoints not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
        if pieces.len() != breaks.len() {
            return Err(HardyError::MalformedPartition(format!(
                "{} intervals but {} atom lists",
                breaks.len(),
                pieces.len()
            )));
        }
        for p in &pieces {
            check_atoms(p)?;
        }
        let pieces = pieces.into_iter().map(collect_atoms).collect();
        let f = Self { breaks, pieces, nonneg: false };
        if require_nonneg {
            if let Some((x, value)) = f.first_negative_sample() {
                return Err(HardyError::NegativityDetected { x, value });
            }
            return Ok(Self { nonneg: true, ..f });
        }
        Ok(f)
    }

    /// Construction for operator outputs; atoms are collected, the partition
    /// is trusted and the nonnegativity flag is set by the caller.
    pub(crate) fn from_parts(breaks: Vec<f64>, pieces: Vec<Vec<PowerLogAtom>>, nonneg: bool) -> Result<Self> {
        for p in &pieces {
            check_atoms(p)?;
        }
        debug_assert_eq!(breaks.len(), pieces.len());
        Ok(Self {
            breaks,
            pieces: pieces.into_iter().map(collect_atoms).collect(),
            nonneg,
        })
    }

    pub fn zero() -> Self {
        Self { breaks: vec![0.0], pieces: vec![Vec::new()], nonneg: true }
    }

    /// `coef` on `(lo, hi]`, zero elsewhere; `hi = None` means infinity.
    pub fn indicator(lo: f64, hi: Option<f64>, coef: f64) -> Result<Self> {
        Self::power_on(0.0, lo, hi, coef)
    }

    /// `coef * x^exponent` on `(lo, hi]`, zero elsewhere.
    pub fn power_on(exponent: f64, lo: f64, hi: Option<f64>, coef: f64) -> Result<Self> {
        let atom = vec![PowerLogAtom::power(coef, exponent)];
        let mut breaks = vec![0.0];
        let mut pieces = Vec::new();
        if lo > 0.0 {
            breaks.push(lo);
            pieces.push(Vec::new());
        }
        pieces.push(atom);
        if let Some(hi) = hi {
            breaks.push(hi);
            pieces.push(Vec::new());
        }
        Self::new(breaks, pieces, coef >= 0.0)
    }

    pub fn breakpoints(&self) -> Vec<Bound> {
        self.breaks
            .iter()
            .map(|&b| Bound::Finite(b))
            .chain(std::iter::once(Bound::Infinity))
            .collect()
    }

    pub fn finite_breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Vec<PowerLogAtom>] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// `(lo, hi)` of piece `i`, `hi = None` for the unbounded piece.
    pub fn piece_bounds(&self, i: usize) -> (f64, Option<f64>) {
        (self.breaks[i], self.breaks.get(i + 1).copied())
    }

    pub fn is_marked_nonnegative(&self) -> bool {
        self.nonneg
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.is_empty())
    }

    pub fn max_log_power(&self) -> u32 {
        self.pieces
            .iter()
            .flatten()
            .map(|a| a.log_power)
            .max()
            .unwrap_or(0)
    }

    /// Index of the piece `(lo, hi]` containing `x > 0`.
    pub fn piece_index(&self, x: f64) -> usize {
        // first breakpoint >= x, minus one
        self.breaks.partition_point(|&b| b < x).saturating_sub(1)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        debug_assert!(x > 0.0, "evaluate requires x > 0");
        eval_atoms(&self.pieces[self.piece_index(x)], x)
    }

    /// Piecewise derivative on the same partition; jumps are not represented.
    pub fn derivative(&self) -> PiecewiseFn {
        let pieces = self
            .pieces
            .iter()
            .map(|p| collect_atoms(p.iter().flat_map(|a| a.derivative()).collect()))
            .collect();
        Self { breaks: self.breaks.clone(), pieces, nonneg: false }
    }

    /// `lambda * f`; the nonnegativity flag survives for `lambda >= 0`.
    pub fn scale(&self, lambda: f64) -> PiecewiseFn {
        let pieces = self
            .pieces
            .iter()
            .map(|p| collect_atoms(p.iter().map(|a| a.scaled(lambda)).collect()))
            .collect();
        Self {
            breaks: self.breaks.clone(),
            pieces,
            nonneg: self.nonneg && lambda >= 0.0,
        }
    }

    /// Re-express on the union of both partitions and add.
    pub fn add(&self, other: &PiecewiseFn) -> PiecewiseFn {
        let mut breaks: Vec<f64> = self.breaks.iter().chain(&other.breaks).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let pieces = (0..breaks.len())
            .map(|j| {
                let rep = representative(breaks[j], breaks.get(j + 1).copied());
                let mut atoms = self.pieces[self.piece_index(rep)].clone();
                atoms.extend_from_slice(&other.pieces[other.piece_index(rep)]);
                collect_atoms(atoms)
            })
            .collect();
        Self { breaks, pieces, nonneg: self.nonneg && other.nonneg }
    }

    /// `x -> f(lambda * x)` for `lambda > 0`.
    pub fn dilate(&self, lambda: f64) -> Result<PiecewiseFn> {
        assert!(lambda > 0.0);
        let ln_l = lambda.ln();
        let breaks = self.breaks.iter().map(|b| b / lambda).collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let mut out = Vec::new();
                for a in p {
                    // c (lx)^a (ln l + ln x)^k = c l^a sum_j C(k,j) (ln l)^(k-j) (ln x)^j
                    let base = a.coef * lambda.powf(a.exponent);
                    let mut binom = 1.0;
                    for j in 0..=a.log_power {
                        let c = base * binom * ln_l.powi((a.log_power - j) as i32);
                        out.push(PowerLogAtom::new(c, a.exponent, j));
                        binom *= (a.log_power - j) as f64 / (j + 1) as f64;
                    }
                }
                out
            })
            .collect();
        Self::from_parts(breaks, pieces, self.nonneg)
    }

    /// Log-spaced interior points per piece plus points hugging each
    /// finite endpoint.
    pub fn sample_points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pieces.len() * (SAMPLES_PER_PIECE + 2));
        for i in 0..self.pieces.len() {
            let (lo, hi) = self.piece_bounds(i);
            out.extend(piece_samples(lo, hi, SAMPLES_PER_PIECE));
        }
        out
    }

    fn first_negative_sample(&self) -> Option<(f64, f64)> {
        for i in 0..self.pieces.len() {
            let atoms = &self.pieces[i];
            if atoms.is_empty() {
                continue;
            }
            let (lo, hi) = self.piece_bounds(i);
            for x in piece_samples(lo, hi, SAMPLES_PER_PIECE) {
                let v = eval_atoms(atoms, x);
                if v < -TOL_EVAL * abs_scale(atoms, x).max(f64::MIN_POSITIVE) {
                    return Some((x, v));
                }
            }
        }
        None
    }

    /// Left and right limits at each positive finite breakpoint.
    pub fn breakpoint_limits(&self) -> Vec<(f64, f64, f64)> {
        (1..self.breaks.len())
            .map(|i| {
                let b = self.breaks[i];
                (b, eval_atoms(&self.pieces[i - 1], b), eval_atoms(&self.pieces[i], b))
            })
            .collect()
    }

    /// First sample where the function increases, or an upward jump.
    pub fn first_increase(&self) -> Option<f64> {
        let d = self.derivative();
        for i in 0..self.pieces.len() {
            let atoms = &d.pieces[i];
            if atoms.is_empty() {
                continue;
            }
            let (lo, hi) = self.piece_bounds(i);
            for x in piece_samples(lo, hi, SAMPLES_PER_PIECE) {
                let v = eval_atoms(atoms, x);
                if v > TOL_EVAL * abs_scale(atoms, x).max(f64::MIN_POSITIVE) {
                    return Some(x);
                }
            }
        }
        for (i, (b, left, right)) in self.breakpoint_limits().into_iter().enumerate() {
            let scale = abs_scale(&self.pieces[i], b) + abs_scale(&self.pieces[i + 1], b);
            if right - left > TOL_EVAL * scale.max(f64::MIN_POSITIVE) {
                return Some(b);
            }
        }
        None
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.first_increase().is_none()
    }
}

fn representative(lo: f64, hi: Option<f64>) -> f64 {
    match hi {
        Some(hi) => 0.5 * (lo + hi),
        None => lo + 1.0,
    }
}

/// `n` log-spaced points strictly inside `(lo, hi)` plus two points next to
/// each finite nonzero endpoint.
pub fn piece_samples(lo: f64, hi: Option<f64>, n: usize) -> Vec<f64> {
    let (a, b) = match (lo > 0.0, hi) {
        (true, Some(hi)) => (lo, hi),
        (false, Some(hi)) => (hi * 1e-12, hi),
        (true, None) => (lo, lo * 1e12),
        (false, None) => (1e-12, 1e12),
    };
    let (la, lb) = (a.ln(), b.ln());
    let mut out: Vec<f64> = (0..n)
        .map(|j| (la + (lb - la) * (j as f64 + 0.5) / n as f64).exp())
        .collect();
    if let Some(hi) = hi {
        let w = hi - lo;
        out.push(hi - w * 1e-9);
        if lo > 0.0 {
            out.push(lo + w * 1e-9);
        }
    } else if lo > 0.0 {
        out.push(lo * (1.0 + 1e-9));
    }
    out
}

impl fmt::Display for PiecewiseFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.pieces.len() {
            let (lo, hi) = self.piece_bounds(i);
            match hi {
                Some(hi) => write!(f, "({lo}, {hi}]: ")?,
                None => write!(f, "({lo}, inf): ")?,
            }
            if self.pieces[i].is_empty() {
                write!(f, "0")?;
            }
            for (j, a) in self.pieces[i].iter().enumerate() {
                if j > 0 {
                    write!(f, " + ")?;
                }
                write!(f, "{}*x^{}", a.coef, a.exponent)?;
                if a.log_power > 0 {
                    write!(f, "*ln(x)^{}", a.log_power)?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON function format:
// {"breakpoints":[0,1,"inf"],"pieces":[[{"c":1,"a":0,"k":0}],[]]}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum BoundRepr {
    Number(f64),
    Text(String),
}

// Untagged derive breaks on fractional numbers under arbitrary-precision JSON.
impl<'de> Deserialize<'de> for BoundRepr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(BoundRepr::Number)
                .ok_or_else(|| serde::de::Error::custom(format!("breakpoint {n} is not a float"))),
            serde_json::Value::String(t) => Ok(BoundRepr::Text(t)),
            other => Err(serde::de::Error::custom(format!("breakpoint must be a number or string, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomRepr {
    pub c: f64,
    pub a: f64,
    #[serde(default)]
    pub k: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionDsl {
    pub breakpoints: Vec<BoundRepr>,
    pub pieces: Vec<Vec<AtomRepr>>,
}

impl FunctionDsl {
    pub fn from_fn(f: &PiecewiseFn) -> Self {
        let mut breakpoints: Vec<BoundRepr> = f.breaks.iter().map(|&b| BoundRepr::Number(b)).collect();
        breakpoints.push(BoundRepr::Text("inf".into()));
        let pieces = f
            .pieces
            .iter()
            .map(|p| {
                p.iter()
                    .map(|a| AtomRepr { c: a.coef, a: a.exponent, k: a.log_power })
                    .collect()
            })
            .collect();
        Self { breakpoints, pieces }
    }

    pub fn to_fn(&self, require_nonneg: bool) -> Result<PiecewiseFn> {
        let bounds = self
            .breakpoints
            .iter()
            .map(|b| match b {
                BoundRepr::Number(v) if v.is_finite() => Ok(Bound::Finite(*v)),
                BoundRepr::Number(_) => Ok(Bound::Infinity),
                BoundRepr::Text(t) if is_infinity_token(t) => Ok(Bound::Infinity),
                BoundRepr::Text(t) => t
                    .trim()
                    .parse::<f64>()
                    .map(Bound::Finite)
                    .map_err(|_| HardyError::MalformedPartition(format!("bad breakpoint {t:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let pieces = self
            .pieces
            .iter()
            .map(|p| p.iter().map(|a| PowerLogAtom::new(a.c, a.a, a.k)).collect())
            .collect();
        make_piecewise(&bounds, pieces, require_nonneg)
    }
}

pub(crate) fn is_infinity_token(t: &str) -> bool {
    matches!(t.trim().to_ascii_lowercase().as_str(), "inf" | "+inf" | "infinity" | "+infinity")
}
