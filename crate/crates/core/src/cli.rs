//! Command-line front end: function shorthand, reproducible fuzz corpora and
//! the `hardylab` subcommands.
//!
//! Fuzz corpora use ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`.
//! Uniform reals are `(next_u64 >> 11) * 2^-53`, so a corpus can be
//! regenerated bit-for-bit from the seed on any platform.

use std::io::Write;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::duality::{equivalence_report, jumps, mollify};
use crate::error::{HardyError, Result};
use crate::extremal::{self, FamilyKind};
use crate::funcmodel::{FunctionDsl, PiecewiseFn, PowerLogAtom};
use crate::norms::{lp_norm_pow, DEFAULT_TOL};
use crate::operators::{dual_hardy, hardy, hardy_minus_identity};
use crate::output::{json_f64, json_opt, normalize_floats};
use crate::verify::{self, Verdict, VerificationReport};

/// Exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// Caps the worker pool when set to a positive integer.
pub const THREADS_ENV: &str = "HARDYLAB_THREADS";

/// Default mollifier index used when `duality` meets a stepped input.
pub const DEFAULT_MOLLIFY: u32 = 1024;

// ---------------------------------------------------------------------------
// function shorthand

struct SpecParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> SpecParser<'a> {
    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T> {
        Err(HardyError::Parse { pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(self.pos, format!("expected '{}'", c as char))
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let mut i = self.pos;
        if i < self.s.len() && matches!(self.s[i], b'+' | b'-') {
            i += 1;
        }
        let word_end = (i..self.s.len()).find(|&j| !self.s[j].is_ascii_alphabetic()).unwrap_or(self.s.len());
        let word = std::str::from_utf8(&self.s[i..word_end]).unwrap_or("").to_ascii_lowercase();
        if word == "inf" || word == "infinity" {
            self.pos = word_end;
            return Ok(if self.s[start] == b'-' { f64::NEG_INFINITY } else { f64::INFINITY });
        }
        while i < self.s.len() && (self.s[i].is_ascii_digit() || self.s[i] == b'.') {
            i += 1;
        }
        if i < self.s.len() && matches!(self.s[i], b'e' | b'E') {
            let mut j = i + 1;
            if j < self.s.len() && matches!(self.s[j], b'+' | b'-') {
                j += 1;
            }
            if j < self.s.len() && self.s[j].is_ascii_digit() {
                while j < self.s.len() && self.s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&self.s[start..i]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) => {
                self.pos = i;
                Ok(v)
            }
            Err(_) => self.err(start, "expected a number"),
        }
    }

    fn ident(&mut self) -> Result<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err(start, "expected chi(...) or pow(...)");
        }
        Ok((start, String::from_utf8_lossy(&self.s[start..self.pos]).to_ascii_lowercase()))
    }

    fn args(&mut self) -> Result<Vec<(usize, f64)>> {
        self.expect(b'(')?;
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let at = self.pos;
            out.push((at, self.number()?));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return self.err(self.pos, "expected ',' or ')'"),
            }
        }
    }

    fn term(&mut self) -> Result<PiecewiseFn> {
        self.skip_ws();
        let mut coef = 1.0;
        if matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+')) {
            coef = self.number()?;
            self.expect(b'*')?;
        }
        let (at, name) = self.ident()?;
        let args = self.args()?;
        let (exponent, lo, hi) = match (name.as_str(), args.as_slice()) {
            ("chi", [l, r]) => (0.0, *l, *r),
            ("pow", [a, l, r]) => (a.1, *l, *r),
            ("chi", _) => return self.err(at, "chi takes 2 arguments (l, r)"),
            ("pow", _) => return self.err(at, "pow takes 3 arguments (a, l, r)"),
            _ => return self.err(at, format!("unknown term {name:?}")),
        };
        if !(lo.1 >= 0.0 && lo.1.is_finite()) {
            return self.err(lo.0, "left end must be finite and >= 0");
        }
        if !(hi.1 > lo.1) {
            return self.err(hi.0, "right end must exceed the left end");
        }
        let hi = hi.1.is_finite().then_some(hi.1);
        PiecewiseFn::power_on(exponent, lo.1, hi, coef)
    }

    fn sum(&mut self) -> Result<PiecewiseFn> {
        let mut f = self.term()?;
        loop {
            match self.peek() {
                None => return Ok(f),
                Some(b'+') => {
                    self.pos += 1;
                    f = f.add(&self.term()?);
                }
                Some(_) => return self.err(self.pos, "expected '+' or end of input"),
            }
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    before + column.saturating_sub(1)
}

/// JSON function format or shorthand such as `chi(0,1)+2*pow(-2,1,inf)`.
pub fn parse_function_spec(text: &str) -> Result<PiecewiseFn> {
    if text.trim_start().starts_with('{') {
        let dsl: FunctionDsl = serde_json::from_str(text)
            .map_err(|e| HardyError::Parse { pos: byte_offset(text, e.line(), e.column()), msg: e.to_string() })?;
        return dsl.to_fn(false);
    }
    let mut p = SpecParser { s: text.as_bytes(), pos: 0 };
    if p.peek().is_none() {
        return p.err(0, "empty function specification");
    }
    p.sum()
}

// ---------------------------------------------------------------------------
// fuzz corpus

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzConfig {
    pub seed: u64,
    /// Pieces of the generated density, 1 to 6.
    pub n_pieces: usize,
    pub exponent_range_zero: (f64, f64),
    pub exponent_range_tail: (f64, f64),
    pub coef_range: (f64, f64),
    /// Generate a nonincreasing `phi` instead of a general density.
    pub monotone: bool,
    /// Downward unit-scale steps added to a monotone `phi`.
    pub steps: usize,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_pieces: 3,
            exponent_range_zero: (0.0, 2.0),
            exponent_range_tail: (-3.0, -1.1),
            coef_range: (0.1, 10.0),
            monotone: false,
            steps: 0,
        }
    }
}

impl FuzzConfig {
    /// Config for one corpus entry; the piece count cycles with the seed.
    pub fn for_case(seed: u64, monotone: bool) -> Self {
        Self { seed, n_pieces: 1 + (seed % 6) as usize, monotone, ..Self::default() }
    }
}

const MIDDLE_EXPONENTS: (f64, f64) = (-0.9, 2.0);
const BREAK_RANGE: (f64, f64) = (0.1, 10.0);

struct Draw(ChaCha8Rng);

impl Draw {
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn log_uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        self.uniform((lo.ln(), hi.ln())).exp()
    }
}

fn fuzz_density(cfg: &FuzzConfig, rng: &mut Draw) -> Result<PiecewiseFn> {
    let n = cfg.n_pieces.clamp(1, 6);
    if n == 1 {
        let b = rng.log_uniform(BREAK_RANGE);
        let a = rng.uniform(cfg.exponent_range_zero);
        let c = rng.log_uniform(cfg.coef_range);
        return PiecewiseFn::new(vec![0.0, b], vec![vec![PowerLogAtom::power(c, a)], vec![]], true);
    }
    let mut breaks: Vec<f64> = (0..n - 1).map(|_| rng.log_uniform(BREAK_RANGE)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks.insert(0, 0.0);
    let m = breaks.len();
    let pieces = (0..m)
        .map(|i| {
            let range = if i == 0 {
                cfg.exponent_range_zero
            } else if i == m - 1 {
                cfg.exponent_range_tail
            } else {
                MIDDLE_EXPONENTS
            };
            let a = rng.uniform(range);
            let c = rng.log_uniform(cfg.coef_range);
            vec![PowerLogAtom::power(c, a)]
        })
        .collect();
    PiecewiseFn::new(breaks, pieces, true)
}

/// Deterministic function of `config`: a general nonnegative density, or
/// with `monotone` its dual average, a continuous nonincreasing function
/// vanishing at infinity, plus `steps` downward jumps.
pub fn fuzz_generate(config: &FuzzConfig) -> Result<PiecewiseFn> {
    let mut rng = Draw(ChaCha8Rng::seed_from_u64(config.seed));
    let f = fuzz_density(config, &mut rng)?;
    if !config.monotone {
        return Ok(f);
    }
    let mut phi = dual_hardy(&f)?;
    for _ in 0..config.steps {
        let at = rng.log_uniform(BREAK_RANGE);
        let h = rng.log_uniform(config.coef_range) * 0.1;
        phi = phi.add(&PiecewiseFn::indicator(0.0, Some(at), h)?);
    }
    Ok(phi)
}

// ---------------------------------------------------------------------------
// subcommands

#[derive(Parser, Debug)]
#[command(name = "hardylab", version, about = "Hardy operator, its dual, and sharp L^p norm relations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// L^p norm of a function.
    Norm {
        #[arg(short = 'f', long = "function")]
        spec: String,
        #[arg(short, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Apply an operator and print the result in the JSON function format.
    Apply {
        #[arg(value_enum)]
        op: ApplyOp,
        #[arg(short = 'f', long = "function")]
        spec: String,
    },
    /// Check an inequality on one function.
    Verify {
        #[arg(value_enum)]
        theorem: Theorem,
        #[arg(short = 'f', long = "function")]
        spec: String,
        #[arg(short, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Sweep an extremal family toward eps = 0.
    Sweep {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(short, allow_negative_numbers = true)]
        p: f64,
        /// Comma-separated eps values; defaults to 7 log-spaced points from 1e-1 to 1e-4.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        grid: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Check the phi <-> f correspondence for a nonincreasing phi.
    Duality {
        #[arg(short = 'f', long = "function")]
        spec: String,
        #[arg(short, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Mollifier index used when phi has jumps.
        #[arg(long, default_value_t = DEFAULT_MOLLIFY)]
        mollify: u32,
    },
    /// Run the inequality checks over a seeded random corpus.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: u64,
        /// Generate nonincreasing phi and check the difference-operator form.
        #[arg(long)]
        monotone: bool,
        #[arg(short, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        p: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ApplyOp {
    Hardy,
    Dual,
    Diff,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Theorem {
    Thm1,
    Thm2,
    Crude,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Family {
    Step,
    Zero,
    Inf,
}

impl Family {
    fn kind(self) -> FamilyKind {
        match self {
            Family::Step => FamilyKind::Step,
            Family::Zero => FamilyKind::ZeroSingular,
            Family::Inf => FamilyKind::InfinitySingular,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Default)]
struct Output {
    out: String,
    err: String,
}

impl Output {
    fn json(&mut self, v: &Value) {
        self.out.push_str(&serde_json::to_string_pretty(v).expect("JSON values always serialize"));
        self.out.push('\n');
    }

    fn warn(&mut self, msg: impl AsRef<str>) {
        self.err.push_str(msg.as_ref());
        self.err.push('\n');
    }
}

fn error_code(e: &HardyError) -> i32 {
    match e {
        HardyError::NotConverged { .. } => EXIT_INCONCLUSIVE,
        _ => EXIT_USAGE,
    }
}

fn verdict_code<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>) -> i32 {
    let mut code = EXIT_PASS;
    for v in verdicts {
        match v {
            Verdict::Violated => return EXIT_VIOLATED,
            Verdict::Inconclusive => code = EXIT_INCONCLUSIVE,
            Verdict::Holds => {}
        }
    }
    code
}

fn report_json(r: &VerificationReport) -> Value {
    normalize_floats(serde_json::to_value(r).expect("reports serialize"))
}

fn cmd_norm(o: &mut Output, spec: &str, p: f64, tol: f64) -> Result<i32> {
    let f = parse_function_spec(spec)?;
    let r = lp_norm_pow(&f, p, tol)?.pth_root(p);
    o.json(&json!({ "p": json_f64(p), "value": json_f64(r.value), "err": json_f64(r.err), "converged": r.converged }));
    Ok(if r.converged { EXIT_PASS } else { EXIT_INCONCLUSIVE })
}

fn cmd_apply(o: &mut Output, op: ApplyOp, spec: &str) -> Result<i32> {
    let f = parse_function_spec(spec)?;
    let g = match op {
        ApplyOp::Hardy => hardy(&f)?,
        ApplyOp::Dual => dual_hardy(&f)?,
        ApplyOp::Diff => hardy_minus_identity(&f)?,
    };
    o.json(&normalize_floats(serde_json::to_value(FunctionDsl::from_fn(&g)).expect("functions serialize")));
    Ok(EXIT_PASS)
}

fn cmd_verify(o: &mut Output, theorem: Theorem, spec: &str, p: f64, tol: f64) -> Result<i32> {
    let f = parse_function_spec(spec)?;
    let r = match theorem {
        Theorem::Thm1 => verify::verify_theorem1(&f, p, tol)?,
        Theorem::Thm2 => verify::verify_theorem2(&f, p, tol)?,
        Theorem::Crude => verify::verify_crude(&f, p, tol)?,
    };
    o.json(&report_json(&r));
    Ok(verdict_code(&[r.verdict_lower, r.verdict_upper]))
}

fn cmd_sweep(o: &mut Output, family: Family, p: f64, grid: Option<Vec<f64>>, format: Format, tol: f64) -> Result<i32> {
    let kind = family.kind();
    let grid = match grid {
        Some(g) => g,
        None => {
            verify::sharp_constants(p)?;
            extremal::default_grid(kind, p)
        }
    };
    let records = extremal::sweep(kind, p, &grid, tol)?;
    let limit = extremal::estimate_limit(&records).ok();
    let mut code = EXIT_PASS;
    for r in &records {
        if !r.converged() {
            code = code.max(EXIT_INCONCLUSIVE);
        } else if !r.sandwich_ok || !r.within_sharp_bounds(p) {
            o.warn(format!("record at eps = {} leaves its bounds", r.eps));
            return finish_sweep(o, kind, p, &records, limit, format).map(|_| EXIT_VIOLATED);
        }
    }
    if limit.is_none() {
        code = code.max(EXIT_INCONCLUSIVE);
    }
    finish_sweep(o, kind, p, &records, limit, format)?;
    Ok(code)
}

fn finish_sweep(
    o: &mut Output,
    kind: FamilyKind,
    p: f64,
    records: &[extremal::SweepRecord],
    limit: Option<f64>,
    format: Format,
) -> Result<()> {
    match format {
        Format::Json => o.json(&json!({
            "family": format!("{kind:?}"),
            "p": json_f64(p),
            "target": json_f64(kind.limit(p)),
            "limit": json_opt(limit),
            "records": extremal::records_json(kind, records),
        })),
        Format::Csv => {
            let mut buf = Vec::new();
            extremal::write_csv(kind, records, &mut buf)?;
            o.out.push_str(&String::from_utf8_lossy(&buf));
            match limit {
                Some(l) => o.warn(format!("estimated limit {} (target {})", crate::output::fmt_f64(l), kind.limit(p))),
                None => o.warn("fewer than 3 converged records; no limit estimate"),
            }
        }
    }
    Ok(())
}

fn cmd_duality(o: &mut Output, spec: &str, p: f64, tol: f64, n: u32) -> Result<i32> {
    let mut phi = parse_function_spec(spec)?;
    let mut mollified = None;
    if let Some(&(at, _)) = jumps(&phi).first() {
        match mollify(&phi, n)?.to_piecewise() {
            Ok(m) => {
                o.warn(format!("phi jumps at x = {at}; checking the mollified phi_n with n = {n}"));
                phi = m;
                mollified = Some(n);
            }
            Err(e) => {
                o.warn(format!("phi jumps at x = {at} and cannot be mollified exactly ({e})"));
                return Ok(EXIT_USAGE);
            }
        }
    }
    let r = equivalence_report(&phi, p, tol)?;
    let mut v = r.to_json();
    v["mollified_n"] = json!(mollified);
    o.json(&v);
    Ok(if r.passed { EXIT_PASS } else { EXIT_VIOLATED })
}

#[derive(Debug, Default, Clone)]
struct CaseOutcome {
    seed: u64,
    holds: u64,
    violated: u64,
    inconclusive: u64,
    errors: u64,
    first_error: Option<String>,
    failed: bool,
}

impl CaseOutcome {
    fn tally(&mut self, v: Verdict) {
        match v {
            Verdict::Holds => self.holds += 1,
            Verdict::Violated => {
                self.violated += 1;
                self.failed = true;
            }
            Verdict::Inconclusive => self.inconclusive += 1,
        }
    }

    fn error(&mut self, e: HardyError) {
        self.errors += 1;
        self.first_error.get_or_insert_with(|| e.to_string());
    }
}

fn fuzz_case(seed: u64, monotone: bool, ps: &[f64], tol: f64) -> CaseOutcome {
    let mut out = CaseOutcome { seed, ..Default::default() };
    let f = match fuzz_generate(&FuzzConfig::for_case(seed, monotone)) {
        Ok(f) => f,
        Err(e) => {
            out.error(e);
            return out;
        }
    };
    for &p in ps {
        if monotone {
            match verify::verify_theorem2(&f, p, tol) {
                Ok(r) => [r.verdict_lower, r.verdict_upper].into_iter().for_each(|v| out.tally(v)),
                Err(e) => out.error(e),
            }
            match equivalence_report(&f, p, tol) {
                Ok(r) if r.passed => {}
                Ok(_) => out.failed = true,
                Err(e) => out.error(e),
            }
        } else {
            match verify::verify_theorem1_and_crude(&f, p, tol) {
                Ok((s, c)) => {
                    [s.verdict_lower, s.verdict_upper, c.verdict_lower, c.verdict_upper]
                        .into_iter()
                        .for_each(|v| out.tally(v));
                }
                Err(e) => out.error(e),
            }
        }
    }
    out
}

fn cmd_fuzz(o: &mut Output, seed: u64, count: u64, monotone: bool, ps: Vec<f64>, tol: f64) -> Result<i32> {
    let ps = if ps.is_empty() { verify::P_GRID.to_vec() } else { ps };
    for &p in &ps {
        verify::sharp_constants(p)?;
    }
    let cases: Vec<CaseOutcome> = (0..count)
        .into_par_iter()
        .map(|i| fuzz_case(seed.wrapping_add(i), monotone, &ps, tol))
        .collect();
    let sum = |g: fn(&CaseOutcome) -> u64| cases.iter().map(g).sum::<u64>();
    let (holds, violated, inconclusive, errors) =
        (sum(|c| c.holds), sum(|c| c.violated), sum(|c| c.inconclusive), sum(|c| c.errors));
    let first_fail = cases.iter().find(|c| c.failed).map(|c| c.seed);
    let first_error = cases.iter().find_map(|c| c.first_error.clone().map(|e| (c.seed, e)));
    o.json(&json!({
        "seed": seed,
        "count": count,
        "mode": if monotone { "monotone" } else { "general" },
        "p": ps.iter().map(|&p| json_f64(p)).collect::<Vec<_>>(),
        "verdicts": { "Holds": holds, "Violated": violated, "Inconclusive": inconclusive },
        "errors": errors,
        "failed_cases": cases.iter().filter(|c| c.failed).count(),
        "first_failing_seed": first_fail,
        "first_error": first_error.map(|(s, e)| json!({ "seed": s, "message": e })),
    }));
    Ok(if first_fail.is_some() {
        EXIT_VIOLATED
    } else if inconclusive > 0 || errors > 0 {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_PASS
    })
}

fn dispatch(cli: Cli) -> Output {
    let mut o = Output::default();
    let res = match cli.command {
        Command::Norm { spec, p, tol } => cmd_norm(&mut o, &spec, p, tol),
        Command::Apply { op, spec } => cmd_apply(&mut o, op, &spec),
        Command::Verify { theorem, spec, p, tol } => cmd_verify(&mut o, theorem, &spec, p, tol),
        Command::Sweep { family, p, grid, format, tol } => cmd_sweep(&mut o, family, p, grid, format, tol),
        Command::Duality { spec, p, tol, mollify } => cmd_duality(&mut o, &spec, p, tol, mollify),
        Command::Fuzz { seed, count, monotone, p, tol } => cmd_fuzz(&mut o, seed, count, monotone, p, tol),
    };
    let code = match res {
        Ok(c) => c,
        Err(e) => {
            o.warn(format!("error: {e}"));
            error_code(&e)
        }
    };
    o.err.push_str(&format!("\u{0}{code}"));
    o
}

fn thread_pool(err: &mut dyn Write) -> Option<rayon::ThreadPool> {
    let raw = std::env::var(THREADS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => rayon::ThreadPoolBuilder::new().num_threads(n).build().ok(),
        _ => {
            let _ = writeln!(err, "warning: ignoring {THREADS_ENV}={raw:?}");
            None
        }
    }
}

/// Runs one command line (`argv[0]` is the program name); machine output
/// goes to `out`, diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_PASS
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let o = match thread_pool(err) {
        Some(pool) => pool.install(|| dispatch(cli)),
        None => dispatch(cli),
    };
    let (diag, code) = o.err.rsplit_once('\u{0}').expect("dispatch appends the code");
    let _ = out.write_all(o.out.as_bytes());
    let _ = err.write_all(diag.as_bytes());
    let _ = out.flush();
    code.parse().unwrap_or(EXIT_USAGE)
}
