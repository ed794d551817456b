//! Independent oracles and seeded corpora shared by the integration suites.
//! Nothing here calls the library routine it is used to check.
#![allow(dead_code)]

use jumpoly::arith::{rat, Rational};
use jumpoly::cli::{random_spec, Caps};
use jumpoly::jumping::ValuationSpec;
use jumpoly::poly::Poly;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` specs with 1..=`max_levels` levels inside the default caps.
pub fn spec_corpus(seed: u64, n: usize, max_levels: usize) -> Vec<ValuationSpec> {
    let mut r = rng(seed);
    let caps = Caps {
        max_levels,
        ..Caps::default()
    };
    (0..n)
        .map(|_| {
            let levels = r.gen_range(1..=max_levels);
            random_spec(&mut r, levels, &caps)
        })
        .collect()
}

/// `β_0..β_k` straight from the recursion `β_{i+1} = q_i β_i + p_{i+1}/(Q_i q_{i+1})`.
pub fn betas(spec: &ValuationSpec) -> Vec<Rational> {
    let mut out = vec![Rational::one()];
    let mut qprod = BigInt::one();
    for (i, &(p, q)) in spec.pairs.iter().enumerate() {
        let jump = Rational::new(BigInt::from(p), &qprod * BigInt::from(q));
        let next = if i == 0 {
            jump
        } else {
            &out[i] * Rational::from_integer(spec.pairs[i - 1].1.into()) + jump
        };
        out.push(next);
        qprod *= q;
    }
    out
}

pub fn qprods(spec: &ValuationSpec) -> Vec<BigInt> {
    let mut out = vec![BigInt::one()];
    for &(_, q) in &spec.pairs {
        let next = out.last().unwrap() * BigInt::from(q);
        out.push(next);
    }
    out
}

/// Gcd of rationals over a common denominator.
pub fn rational_gcd(xs: &[Rational]) -> Rational {
    let den = xs.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
    let g = xs
        .iter()
        .map(|x| (x * Rational::from_integer(den.clone())).to_integer())
        .fold(BigInt::zero(), |g, n| g.gcd(&n));
    Rational::new(g, den)
}

/// Smallest `m ≥ 1` with `m·x ∈ q·⟨gens⟩`.
pub fn brute_order(q: u64, x: &Rational, gens: &[Rational]) -> u64 {
    let g = rational_gcd(gens) * Rational::from_integer(q.into());
    (1..=q)
        .find(|&m| (x * Rational::from_integer(m.into()) / &g).is_integer())
        .expect("order divides q")
}

/// All `(a_0..a_k)` with `Σ a_j β_j = x`, `a_0 ≥ 0`, `0 ≤ a_j < q_j`, by
/// enumerating every bounded tuple.
pub fn brute_representations(x: &Rational, spec: &ValuationSpec) -> Vec<Vec<u64>> {
    let b = betas(spec);
    let k = spec.len();
    let den = qprods(spec)[k].clone();
    let scaled: Vec<BigInt> = b.iter().map(|v| (v * Rational::from_integer(den.clone())).to_integer()).collect();
    let target = (x * Rational::from_integer(den.clone())).to_integer();
    let mut found = Vec::new();
    let mut a = vec![0u64; k + 1];
    loop {
        let mut rest = target.clone();
        for j in 1..=k {
            rest -= &scaled[j] * BigInt::from(a[j]);
        }
        if rest >= BigInt::zero() && (&rest % &den).is_zero() {
            let mut sol = a.clone();
            sol[0] = (&rest / &den).to_u64().unwrap();
            found.push(sol);
        }
        // Odometer over a_1..a_k.
        let mut j = 1;
        loop {
            if j > k {
                return found;
            }
            a[j] += 1;
            if a[j] < spec.q(j) {
                break;
            }
            a[j] = 0;
            j += 1;
        }
    }
}

/// Continuant by its three-term recursion, `P_0 = 1`, `P_{−1} = 0`.
pub fn continuant(c: &[u64]) -> BigInt {
    let (mut prev, mut cur) = (BigInt::zero(), BigInt::one());
    for &x in c {
        let next = BigInt::from(x) * &cur + &prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Quotients of the Euclidean algorithm on `(p, q)`.
pub fn euclid_quotients(p: u64, q: u64) -> Vec<u64> {
    let (mut r0, mut r1) = (p, q);
    let mut f = Vec::new();
    while r1 != 0 {
        f.push(r0 / r1);
        let r2 = r0 % r1;
        r0 = r1;
        r1 = r2;
    }
    f
}

/// `ν*` of a Laurent monomial `x^i y^j` given `ν*(y)`.
pub fn mono_value(i: i64, j: i64, vy: &Rational) -> Rational {
    Rational::from_integer(i.into()) + vy * Rational::from_integer(j.into())
}

/// `x^{e0}·y^{e1}·(y + c)^{e2}` evaluated at a rational point.
pub fn eval_chart(e: (i64, i64, i64), c: &Rational, x: &Rational, y: &Rational) -> Rational {
    pow(x, e.0) * pow(y, e.1) * pow(&(y + c), e.2)
}

pub fn pow(b: &Rational, e: i64) -> Rational {
    num_traits::pow::Pow::pow(b, e as i32)
}

/// Random polynomial with small support and coefficients.
pub fn random_poly<R: Rng>(r: &mut R, max_x: i64, max_y: i64, terms: usize) -> Poly {
    loop {
        let f = Poly::from_terms(
            (0..terms).map(|_| (r.gen_range(0..=max_x), r.gen_range(0..=max_y), rat(r.gen_range(-3..=3), 1))),
        );
        if !f.is_zero() {
            return f;
        }
    }
}

/// `T_0..T_last` rebuilt from scratch, `last ≤ k + 1`: the exponent row of
/// `T_{i+1}` is the unique representation of `q_i β_i`, found by brute force.
pub fn rebuild_sequence(spec: &ValuationSpec, last: usize) -> Vec<Poly> {
    let b = betas(spec);
    let mut t = vec![Poly::x(), Poly::y()];
    for i in 1..last {
        let target = &b[i] * Rational::from_integer(spec.q(i).into());
        let sub = spec.truncate(i - 1);
        let reps = brute_representations(&target, &sub);
        assert_eq!(reps.len(), 1, "q_{i}β_{i} must have one representation");
        let mut m = Poly::one();
        for (j, &n) in reps[0].iter().enumerate() {
            m = &m * &t[j].pow(n as u32);
        }
        let next = &t[i].pow(spec.q(i) as u32) - &m.scale(spec.lambda(i));
        t.push(next);
    }
    t
}

/// Upper bound on the number of terms of `T_k`, from the exponent rows alone:
/// the smaller of the dense `(deg_x + 1)(deg_y + 1)` box and the multinomial
/// count of `T_{i}^{q} - λ·Π T_j^{n_j}`. Used only to choose which specs get
/// the polynomial checks, never to judge them.
pub fn term_bound(spec: &ValuationSpec) -> f64 {
    use jumpoly::arith::{unique_representation, ValueGroupLevel};
    let groups = ValueGroupLevel::from_pairs(&spec.pairs).unwrap();
    let multiset = |t: f64, n: u64| -> f64 { (0..n).fold(1.0, |acc, j| acc * (t + j as f64) / (j + 1) as f64) };
    // (terms, deg_x, deg_y) of T_0, T_1, ...
    let mut t = vec![(1.0, 1.0, 0.0), (1.0, 0.0, 1.0)];
    for i in 1..spec.len() {
        let q = spec.q(i);
        let target = &groups.betas[i] * BigInt::from(q);
        let row = unique_representation(&target, &groups.truncate(i - 1)).unwrap();
        let (ti, xi, yi) = t[i];
        let mut tail = (1.0, 0.0, 0.0);
        for (j, &n) in row.iter().enumerate() {
            tail.0 *= multiset(t[j].0, n);
            tail.1 += n as f64 * t[j].1;
            tail.2 += n as f64 * t[j].2;
        }
        let dx = (q as f64 * xi).max(tail.1);
        let dy = (q as f64 * yi).max(tail.2);
        let terms = (multiset(ti, q) + tail.0).min((dx + 1.0) * (dy + 1.0));
        t.push((terms, dx, dy));
    }
    t[spec.len()].0
}
