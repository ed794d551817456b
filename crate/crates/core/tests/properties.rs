//! Invariants over generated inputs. Expected values come from the oracles in
//! `common` or from identities that do not go through the routine under test.

mod common;

use common::*;
use jumpoly::arith::{euclid_data, gcd_u64, rat, unique_representation, Rational, ValueGroupLevel};
use jumpoly::cli::{self, random_spec, Caps, Profile};
use jumpoly::jumping::{build_keys, build_sequence, ValuationSpec};
use jumpoly::monomial::{chunk_step, transfer_sequence};
use jumpoly::poly::Poly;
use jumpoly::series::Series;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn small_poly() -> impl Strategy<Value = Poly> {
    prop::collection::vec((0i64..4, 0i64..4, -3i64..=3, 1i64..=3), 0..5)
        .prop_map(|ts| Poly::from_terms(ts.into_iter().map(|(i, j, n, d)| (i, j, rat(n, d)))))
}

/// Monic in `y` of degree 1..=3 with rational lower coefficients.
fn monic_poly() -> impl Strategy<Value = Poly> {
    (1i64..=3, small_poly()).prop_map(|(m, lower)| {
        let below: Vec<_> = lower
            .terms()
            .filter(|(e, _)| e.1 < m)
            .map(|(e, c)| (e.0, e.1, c.clone()))
            .collect();
        &Poly::from_terms(below) + &Poly::monomial(Rational::one(), 0, m)
    })
}

fn spec_strategy(max_levels: usize, max_q: u64) -> impl Strategy<Value = ValuationSpec> {
    any::<u64>().prop_map(move |seed| {
        let mut r = rng(seed);
        let caps = Caps {
            max_q,
            max_levels,
            ..Caps::default()
        };
        let levels = 1 + (seed as usize) % max_levels;
        random_spec(&mut r, levels, &caps)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(f in small_poly(), g in small_poly(), h in small_poly()) {
        prop_assert_eq!(&f * &g, &g * &f);
        prop_assert_eq!(&(&f * &g) * &h, &f * &(&g * &h));
        prop_assert_eq!(&f * &(&g + &h), &(&f * &g) + &(&f * &h));
        prop_assert!((&f - &f).is_zero());
        prop_assert_eq!(&f * &Poly::one(), f.clone());
    }

    #[test]
    fn division_reconstructs(f in small_poly(), g in monic_poly()) {
        let (quo, rem) = f.divrem_y(&g).unwrap();
        prop_assert_eq!(&(&quo * &g) + &rem, f.clone());
        prop_assert!(rem.deg_y().is_none_or(|d| d < g.deg_y().unwrap()));
        let digits = f.divide_monic_in_y(&g).unwrap();
        let mut acc = Poly::zero();
        for (j, c) in digits.iter().enumerate() {
            prop_assert!(c.deg_y().is_none_or(|d| d < g.deg_y().unwrap()));
            acc = &acc + &(c * &g.pow(j as u32));
        }
        prop_assert_eq!(acc, f);
    }

    #[test]
    fn euclid_bezout(p in 1u64..5000, q in 1u64..5000) {
        prop_assume!(gcd_u64(p, q) == 1);
        let e = euclid_data(p, q).unwrap();
        prop_assert_eq!(e.f.clone(), euclid_quotients(p, q));
        prop_assert_eq!(e.epsilon, e.f.iter().sum::<u64>());
        prop_assert_eq!(continuant(&e.f), BigInt::from(p));
        prop_assert_eq!(e.a as i128 * q as i128 - e.b as i128 * p as i128, 1);
    }

    #[test]
    fn representation_round_trip(spec in spec_strategy(4, 5), seed in any::<u64>()) {
        let groups = ValueGroupLevel::from_pairs(&spec.pairs).unwrap();
        let b = betas(&spec);
        let mut r = rng(seed);
        let k = spec.len();
        // The representation is asserted only from q_k·β_k upward.
        let floor = (&b[k] * Rational::from_integer(spec.q(k).into())).ceil().to_integer();
        let mut x = Rational::zero();
        let mut digits = vec![0u64; k + 1];
        digits[0] = rand::Rng::gen_range(&mut r, 0..5) + u64::try_from(floor).unwrap();
        x += Rational::from_integer(digits[0].into());
        for j in 1..=spec.len() {
            digits[j] = rand::Rng::gen_range(&mut r, 0..spec.q(j));
            x += &b[j] * Rational::from_integer(digits[j].into());
        }
        prop_assert_eq!(unique_representation(&x, &groups).unwrap(), digits);
    }

    #[test]
    fn betas_grow_and_clear_denominators(spec in spec_strategy(6, 7)) {
        let b = betas(&spec);
        let q = qprods(&spec);
        let groups = ValueGroupLevel::from_pairs(&spec.pairs).unwrap();
        prop_assert_eq!(&groups.betas, &b);
        for i in 1..=spec.len() {
            prop_assert!((&b[i] * Rational::from_integer(q[i].clone())).is_integer());
            if i < spec.len() {
                prop_assert!(b[i + 1] > &b[i] * Rational::from_integer(spec.q(i).into()));
            }
        }
    }

    #[test]
    fn keys_match_rebuilt_sequence(spec in spec_strategy(3, 4)) {
        let k = spec.len();
        let seq = build_keys(&spec, k).unwrap();
        prop_assert_eq!(seq.t, rebuild_sequence(&spec, k));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chunk_exponents(t in 1u64..=12, p in 1u64..=24, q in 1u64..=6, c in 1i64..=4) {
        prop_assume!(gcd_u64(p, q) == 1);
        let ch = chunk_step(t, &Series::one(10), p, q, &rat(c, 1), 10).unwrap();
        let g = gcd_u64(t, p);
        prop_assert_eq!((ch.g, ch.p_bar, ch.q_bar), (g, p / g, q * t / g));
        prop_assert_eq!(gcd_u64(ch.p_bar, ch.q_bar), 1);
        prop_assert!(ch.big_delta.is_unit());
        prop_assert_eq!(ch.exact, Some(true));
    }

    #[test]
    fn transfer_pulls_back(t in 2u64..=4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let levels = 1 + (seed % 3) as usize;
        let mut pairs = Vec::new();
        while pairs.len() < levels {
            let p = t * rand::Rng::gen_range(&mut r, 1..=3);
            let q = rand::Rng::gen_range(&mut r, 1..=3);
            if gcd_u64(p, q) == 1 {
                pairs.push((p, q));
            }
        }
        let lambdas = (0..levels).map(|i| rat(1 + i as i64, 1)).collect();
        let spec = ValuationSpec::new(pairs.clone(), lambdas).unwrap();
        let tr = transfer_sequence(&spec, t, levels).unwrap();
        let expect: Vec<(u64, u64)> = pairs.iter().map(|&(p, q)| (p / t, q)).collect();
        prop_assert_eq!(&tr.r_spec.pairs, &expect);
        let s = build_sequence(&spec, levels).unwrap();
        for i in 1..=levels + 1 {
            prop_assert_eq!(tr.r_seq.t[i].substitute_monomials((t as i64, 0), (0, 1)), s.t[i].clone());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn descent_exponent_decreases(seed in 0u64..10_000) {
        let sc = cli::generate(seed, Profile::Descent, &Caps::default());
        let rep = cli::run(&sc).unwrap();
        let ts: Vec<u64> = rep["iterations"].as_array().unwrap().iter().map(|it| it["t"].as_u64().unwrap()).collect();
        prop_assert!(ts.windows(2).all(|w| w[1] < w[0]), "t-sequence {:?}", ts);
        prop_assert_eq!(rep["final_t"].as_u64(), ts.last().copied());
        prop_assert!(ts.len() <= 10);
    }
}
