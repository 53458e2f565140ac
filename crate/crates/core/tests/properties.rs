use hardylab::cli::{fuzz_generate, FuzzConfig};
use hardylab::duality::{f_to_phi, mollify, phi_to_f};
use hardylab::funcmodel::{abs_scale, FunctionDsl};
use hardylab::norms::{
    ip_via_parts, lp_norm, lp_norm_callable, lp_norm_pow, numeric_dual_hardy, numeric_hardy, CallableFn, DEFAULT_TOL,
};
use hardylab::operators::{dual_hardy, hardy};
use hardylab::verify::{crude_constants, sharp_constants, verify_theorem1, verify_theorem2, Verdict};
use hardylab::{PiecewiseFn, PowerLogAtom};
use proptest::prelude::*;

fn density(seed: u64) -> PiecewiseFn {
    fuzz_generate(&FuzzConfig::for_case(seed, false)).unwrap()
}

fn monotone(seed: u64, steps: usize) -> PiecewiseFn {
    fuzz_generate(&FuzzConfig { steps, ..FuzzConfig::for_case(seed, true) }).unwrap()
}

fn probes(f: &PiecewiseFn) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..25).map(|i| 10f64.powf(-2.0 + i as f64 / 6.0)).collect();
    for &b in &f.finite_breakpoints()[1..] {
        xs.extend([b * 0.999, b, b * 1.001]);
    }
    xs
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Relative agreement, with rounding measured against the atom magnitudes
/// of `h` at `x` since its atoms may cancel to a tiny value.
fn near(a: f64, b: f64, rel: f64, h: &PiecewiseFn, x: f64) -> bool {
    let floor = 1e-13 * abs_scale(&h.pieces()[h.piece_index(x)], x);
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}

/// Random two-piece density with a decaying tail, independent of the fuzz
/// corpus; the zero exponent keeps both averages in `L^p` for `p <= 6`.
fn arb_density() -> impl Strategy<Value = PiecewiseFn> {
    (0.2f64..5.0, -0.15f64..2.0, -3.0f64..-1.2, 0.1f64..10.0, 0.1f64..10.0).prop_map(|(b, a0, a1, c0, c1)| {
        PiecewiseFn::new(vec![0.0, b], vec![vec![PowerLogAtom::power(c0, a0)], vec![PowerLogAtom::power(c1, a1)]], true)
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operators_are_linear(s1 in 0u64..500, s2 in 0u64..500, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let (f, g) = (density(s1), density(s2));
        let combo = f.scale(a).add(&g.scale(b));
        let (hc, hf, hg) = (hardy(&combo).unwrap(), hardy(&f).unwrap(), hardy(&g).unwrap());
        let (dc, df, dg) = (dual_hardy(&combo).unwrap(), dual_hardy(&f).unwrap(), dual_hardy(&g).unwrap());
        for x in probes(&combo) {
            prop_assert!(near(hc.evaluate(x), a * hf.evaluate(x) + b * hg.evaluate(x), 1e-10, &hc, x));
            prop_assert!(near(dc.evaluate(x), a * df.evaluate(x) + b * dg.evaluate(x), 1e-10, &dc, x));
        }
    }

    #[test]
    fn operators_commute_with_dilation(seed in 0u64..500, lambda in 0.05f64..20.0) {
        let f = density(seed);
        let g = f.dilate(lambda).unwrap();
        let (hf, hg) = (hardy(&f).unwrap(), hardy(&g).unwrap());
        let (df, dg) = (dual_hardy(&f).unwrap(), dual_hardy(&g).unwrap());
        // lambda * x may round across a breakpoint of f
        for x in probes(&g) {
            prop_assert!(near(hg.evaluate(x), hf.evaluate(lambda * x), 1e-9, &hg, x));
            prop_assert!(near(dg.evaluate(x), df.evaluate(lambda * x), 1e-9, &dg, x));
        }
    }

    #[test]
    fn norm_scales_under_dilation_and_multiplication(seed in 0u64..500, lambda in 0.1f64..10.0, c in 0.01f64..100.0, p in 1.1f64..8.0) {
        let f = density(seed);
        let base = lp_norm(&f, p, DEFAULT_TOL).unwrap();
        let dil = lp_norm(&f.dilate(lambda).unwrap(), p, DEFAULT_TOL).unwrap();
        let mul = lp_norm(&f.scale(-c), p, DEFAULT_TOL).unwrap();
        let expect = base.value * lambda.powf(-1.0 / p);
        prop_assert!((dil.value - expect).abs() <= dil.err + base.err * lambda.powf(-1.0 / p) + 1e-12 * expect);
        prop_assert!((mul.value - c * base.value).abs() <= mul.err + c * base.err + 1e-12 * mul.value);
    }

    #[test]
    fn error_bars_cover_refined_values(seed in 0u64..500, p in 1.1f64..8.0) {
        let f = hardy(&density(seed)).unwrap();
        let coarse = lp_norm_pow(&f, p, 1e-5).unwrap();
        let fine = lp_norm_pow(&f, p, 1e-12).unwrap();
        prop_assert!(coarse.converged && fine.converged);
        prop_assert!((coarse.value - fine.value).abs() <= coarse.err + fine.err + 1e-14 * fine.value);
    }

    #[test]
    fn integration_by_parts_matches_direct_norm(f in arb_density(), p in 1.2f64..6.0) {
        let direct = lp_norm_pow(&hardy(&f).unwrap(), p, DEFAULT_TOL).unwrap();
        let parts = ip_via_parts(&f, p, DEFAULT_TOL).unwrap();
        prop_assert!((direct.value - parts.value).abs() <= direct.err + parts.err + 1e-10 * direct.value);
    }

    #[test]
    fn both_averages_have_equal_norms_at_two(f in arb_density()) {
        let a = lp_norm(&hardy(&f).unwrap(), 2.0, DEFAULT_TOL).unwrap();
        let b = lp_norm(&dual_hardy(&f).unwrap(), 2.0, DEFAULT_TOL).unwrap();
        prop_assert!((a.value - b.value).abs() <= a.err + b.err + 1e-12 * a.value);
    }

    #[test]
    fn density_round_trips_through_dual_average(seed in 0u64..500) {
        let f = density(seed);
        let back = phi_to_f(&f_to_phi(&f).unwrap()).unwrap();
        for x in probes(&f) {
            prop_assert!(close(back.evaluate(x), f.evaluate(x), 1e-9));
        }
    }

    #[test]
    fn dsl_round_trip_is_canonical(seed in 0u64..500, mono in any::<bool>()) {
        let f = if mono { monotone(seed, (seed % 3) as usize) } else { density(seed) };
        let trip = |g: &PiecewiseFn| {
            let text = serde_json::to_string(&FunctionDsl::from_fn(g)).unwrap();
            serde_json::from_str::<FunctionDsl>(&text).unwrap().to_fn(false).unwrap()
        };
        let once = trip(&f);
        // parsing canonicalizes atom order, after which the trip is exact
        prop_assert_eq!(&trip(&once), &once);
        prop_assert_eq!(once.finite_breakpoints(), f.finite_breakpoints());
        for x in probes(&f) {
            let atoms = &f.pieces()[f.piece_index(x)];
            prop_assert!((once.evaluate(x) - f.evaluate(x)).abs() <= 1e-14 * abs_scale(atoms, x) + 1e-300);
        }
    }

    #[test]
    fn crude_constants_contain_sharp_ones(p in 1.01f64..50.0) {
        let (s, c) = (sharp_constants(p).unwrap(), crude_constants(p).unwrap());
        prop_assert!(c.lower <= s.lower * (1.0 + 1e-14));
        prop_assert!(c.upper >= s.upper * (1.0 - 1e-14));
        prop_assert!(s.lower <= s.upper * (1.0 + 1e-14));
    }

    #[test]
    fn sharp_inequalities_never_fail(seed in 0u64..2000, p in 1.05f64..10.0) {
        let r = verify_theorem1(&density(seed), p, DEFAULT_TOL).unwrap();
        prop_assert!(!r.is_violated(), "{:?}", r);
        let r = verify_theorem2(&monotone(seed, (seed % 3) as usize), p, DEFAULT_TOL).unwrap();
        prop_assert!(!r.is_violated(), "{:?}", r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn numeric_operators_agree_with_exact(seed in 0u64..500) {
        let f = density(seed);
        let cf = CallableFn::from_piecewise(&f);
        let grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(-2.0 + i as f64 / 15.0)).collect();
        let nh = numeric_hardy(&cf, &grid).unwrap();
        let nd = numeric_dual_hardy(&cf, &grid).unwrap();
        let (h, d) = (hardy(&f).unwrap(), dual_hardy(&f).unwrap());
        for &x in &grid {
            prop_assert!(close(nh.eval(x), h.evaluate(x), 1e-8), "H at {}: {} vs {}", x, nh.eval(x), h.evaluate(x));
            prop_assert!(close(nd.eval(x), d.evaluate(x), 1e-8), "H* at {}: {} vs {}", x, nd.eval(x), d.evaluate(x));
        }
    }

    #[test]
    fn callable_norm_matches_exact(seed in 0u64..500, p in 1.2f64..6.0) {
        let f = hardy(&density(seed)).unwrap();
        let exact = lp_norm(&f, p, 1e-10).unwrap();
        let numeric = lp_norm_callable(&CallableFn::from_piecewise(&f), p, 1e-10).unwrap();
        prop_assert!(close(exact.value, numeric.value, 1e-8));
    }

    #[test]
    fn mollifiers_increase_toward_phi(seed in 0u64..500, n in 1u32..200) {
        let phi = monotone(seed, (seed % 3) as usize);
        let (a, b) = (mollify(&phi, n).unwrap(), mollify(&phi, n + 1).unwrap());
        for x in probes(&phi) {
            let v = phi.evaluate(x);
            let slack = 1e-12 * v.abs();
            prop_assert!(a.eval(x) <= b.eval(x) + slack && b.eval(x) <= v + slack);
        }
    }
}

#[test]
fn equality_case_is_not_violated() {
    // the indicator of (0,1] attains the lower constant exactly
    let chi = PiecewiseFn::indicator(0.0, Some(1.0), 1.0).unwrap();
    for p in [1.5, 2.0, 3.0, 8.0] {
        let r = verify_theorem2(&chi, p, DEFAULT_TOL).unwrap();
        assert!(!r.is_violated());
        if p >= 2.0 {
            assert_eq!(r.verdict_lower, Verdict::Holds, "p {p}: {r:?}");
        }
    }
}
