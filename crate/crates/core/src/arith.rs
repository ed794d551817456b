//! Exact arithmetic over the rationals: gcd in the sense of ℤ-divisibility,
//! Euclidean/continued-fraction data, continuants, and the value-group levels
//! generated by the values of the first jumping polynomials.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Exact rational number, always in lowest terms with positive denominator.
pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Formats as `"num/den"`, including a denominator of 1.
pub fn fmt_rat(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"num/den"` or a bare integer.
pub fn parse_rat(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Integer value of `r`, if it is one and fits in an `i64`.
pub fn to_i64(r: &Rational) -> Option<i64> {
    if r.is_integer() {
        r.numer().to_i64()
    } else {
        None
    }
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Inverse of `a` modulo `m` (m ≥ 1); `None` when not coprime.
pub fn mod_inverse(a: i128, m: i128) -> Option<i128> {
    if m == 1 {
        return Some(0);
    }
    let ext = a.rem_euclid(m).extended_gcd(&m);
    if ext.gcd != 1 {
        return None;
    }
    Some(ext.x.rem_euclid(m))
}

/// Greatest `g > 0` with `a, b ∈ gℤ`.
pub fn zgcd(a: &Rational, b: &Rational) -> Result<Rational> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::domain("zgcd of two zeros"));
    }
    if a.is_zero() {
        return Ok(b.abs());
    }
    if b.is_zero() {
        return Ok(a.abs());
    }
    let num = a.numer().gcd(b.numer());
    let den = a.denom().lcm(b.denom());
    Ok(Rational::new(num, den))
}

/// `true` when `b` ℤ-divides `a`.
pub fn zdivides(b: &Rational, a: &Rational) -> bool {
    if b.is_zero() {
        return a.is_zero();
    }
    (a / b).is_integer()
}

/// Continued-fraction data of a coprime pair `(p, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EuclidData {
    pub p: u64,
    pub q: u64,
    /// Number of divisions.
    pub n: usize,
    /// Quotients `f_1..f_N`; `f_1 = 0` when `p < q`.
    pub f: Vec<u64>,
    /// Partial sums `F_i = f_1 + … + f_i`.
    pub partial: Vec<u64>,
    /// `ε(p, q) = F_N`, the number of quadratic transforms of the composite step.
    pub epsilon: u64,
    pub a: u64,
    pub b: u64,
}

pub fn euclid_data(p: u64, q: u64) -> Result<EuclidData> {
    if p == 0 || q == 0 {
        return Err(Error::domain(format!("euclid_data({p}, {q}): entries must be positive")));
    }
    if gcd_u64(p, q) != 1 {
        return Err(Error::domain(format!("euclid_data({p}, {q}): not coprime")));
    }
    let mut f = Vec::new();
    let (mut r0, mut r1) = (p, q);
    while r1 != 0 {
        f.push(r0 / r1);
        let r2 = r0 % r1;
        r0 = r1;
        r1 = r2;
    }
    let partial: Vec<u64> = f
        .iter()
        .scan(0u64, |acc, &fi| {
            *acc += fi;
            Some(*acc)
        })
        .collect();
    let epsilon = *partial.last().expect("at least one division");
    // minimal solution of a·q − b·p = 1 with 0 < a ≤ p
    let a = if p == 1 {
        1
    } else {
        mod_inverse(q as i128, p as i128).expect("coprime") as u64
    };
    let b = ((a as u128 * q as u128 - 1) / p as u128) as u64;
    Ok(EuclidData {
        p,
        q,
        n: f.len(),
        f,
        partial,
        epsilon,
        a,
        b,
    })
}

/// `ε(p, q)`.
pub fn epsilon(p: u64, q: u64) -> Result<u64> {
    euclid_data(p, q).map(|e| e.epsilon)
}

/// Continuant `P_k(c_1..c_k)`: `P_0 = 1`, `P_{-1} = 0`,
/// `P_k = c_k·P_{k−1} + P_{k−2}`.
pub fn continuant<T: Into<BigInt> + Clone>(c: &[T]) -> BigInt {
    let mut prev = BigInt::zero();
    let mut cur = BigInt::one();
    for ck in c {
        let next = ck.clone().into() * &cur + &prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// The group `Γ_k = ⟨β_0, …, β_k⟩` together with the data that generated it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueGroupLevel {
    pub betas: Vec<Rational>,
    /// `q_1..q_k`.
    pub qs: Vec<u64>,
    /// `p_1..p_k`.
    pub ps: Vec<u64>,
}

impl ValueGroupLevel {
    /// Builds `β_0 = 1`, `β_1 = p_1/q_1`,
    /// `β_{i+1} = q_i·β_i + (1/Q_i)·(p_{i+1}/q_{i+1})`.
    pub fn from_pairs(pairs: &[(u64, u64)]) -> Result<Self> {
        let mut betas = vec![Rational::one()];
        let mut qtot = BigInt::one();
        for (i, &(p, q)) in pairs.iter().enumerate() {
            if p == 0 || q == 0 || gcd_u64(p, q) != 1 {
                return Err(Error::domain(format!("pair {} = ({p}, {q}) is not a coprime positive pair", i + 1)));
            }
            let jump = Rational::new(BigInt::from(p), BigInt::from(q) * &qtot);
            let next = if i == 0 {
                jump
            } else {
                &betas[i] * BigInt::from(pairs[i - 1].1) + jump
            };
            betas.push(next);
            qtot *= q;
        }
        Ok(ValueGroupLevel {
            betas,
            qs: pairs.iter().map(|&(_, q)| q).collect(),
            ps: pairs.iter().map(|&(p, _)| p).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.betas.len() - 1
    }

    /// `Q_j = q_1···q_j` (`Q_0 = 1`).
    pub fn q_prefix(&self, j: usize) -> BigInt {
        self.qs[..j].iter().fold(BigInt::one(), |acc, &q| acc * q)
    }

    pub fn qk(&self) -> BigInt {
        self.q_prefix(self.k())
    }

    /// Level `j ≤ k` of the same data.
    pub fn truncate(&self, j: usize) -> ValueGroupLevel {
        ValueGroupLevel {
            betas: self.betas[..=j].to_vec(),
            qs: self.qs[..j].to_vec(),
            ps: self.ps[..j].to_vec(),
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        (x * Rational::from_integer(self.qk())).is_integer()
    }
}

/// ℤ-gcd of all `β_0..β_k`; equals `1/Q_k`.
pub fn group_gcd(level: &ValueGroupLevel) -> Rational {
    level
        .betas
        .iter()
        .skip(1)
        .fold(level.betas[0].abs(), |g, b| zgcd(&g, b).expect("β_0 ≠ 0"))
}

/// Order of the class of `x` in `Γ_{k−1} / q_k·Γ_{k−1}`.
pub fn order_in_quotient(qk: u64, x: &Rational, prev: &ValueGroupLevel) -> Result<u64> {
    if qk == 0 {
        return Err(Error::domain("q_k must be positive"));
    }
    let scaled = x * Rational::from_integer(prev.qk());
    if !scaled.is_integer() {
        return Err(Error::domain(format!("{} is not in Γ_{}", fmt_rat(x), prev.k())));
    }
    let m = scaled.to_integer().mod_floor(&BigInt::from(qk));
    let m = m.to_u64().expect("residue below q_k");
    Ok(qk / gcd_u64(m, qk))
}

/// Unique `(a_0..a_k)` with `x = Σ a_j·β_j`, `0 ≤ a_j < q_j` for `j ≥ 1`,
/// obtained by solving `a_j·p_j ≡ r (mod q_j)` from the top level down.
pub fn unique_representation(x: &Rational, level: &ValueGroupLevel) -> Result<Vec<u64>> {
    let k = level.k();
    if !level.contains(x) {
        return Err(Error::domain(format!("{} is not in Γ_{k}", fmt_rat(x))));
    }
    let floor = if k == 0 {
        Rational::zero()
    } else {
        &level.betas[k] * BigInt::from(level.qs[k - 1])
    };
    if *x < floor {
        return Err(Error::domain(format!(
            "{} is below q_k·β_k = {}",
            fmt_rat(x),
            fmt_rat(&floor)
        )));
    }
    let mut rest = x.clone();
    let mut coeffs = vec![0u64; k + 1];
    for j in (1..=k).rev() {
        let qj = level.qs[j - 1];
        if qj == 1 {
            continue;
        }
        let n = (&rest * Rational::from_integer(level.q_prefix(j))).to_integer();
        let r = n.mod_floor(&BigInt::from(qj)).to_i128().expect("small residue");
        let inv = mod_inverse(level.ps[j - 1] as i128, qj as i128).expect("p_j, q_j coprime");
        let a = (r * inv).rem_euclid(qj as i128) as u64;
        coeffs[j] = a;
        rest -= &level.betas[j] * BigInt::from(a);
    }
    if !rest.is_integer() || rest.is_negative() {
        return Err(Error::domain(format!(
            "no nonnegative representation of {} (remainder {})",
            fmt_rat(x),
            fmt_rat(&rest)
        )));
    }
    coeffs[0] = rest
        .to_integer()
        .to_u64()
        .ok_or_else(|| Error::domain("coefficient a_0 too large"))?;
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zgcd_examples() {
        assert_eq!(zgcd(&rat(1, 3), &rat(5, 21)).unwrap(), rat(1, 21));
        assert_eq!(zgcd(&int(1), &rat(5, 3)).unwrap(), rat(1, 3));
        assert_eq!(zgcd(&rat(-7, 4), &rat(-7, 4)).unwrap(), rat(7, 4));
        assert!(zgcd(&int(0), &int(0)).is_err());
    }

    #[test]
    fn euclid_examples() {
        let e = euclid_data(5, 3).unwrap();
        assert_eq!((e.n, e.f.clone(), e.epsilon, e.a, e.b), (3, vec![1, 1, 2], 4, 2, 1));
        let e = euclid_data(7, 1).unwrap();
        assert_eq!((e.n, e.f.clone(), e.epsilon, e.a, e.b), (1, vec![7], 7, 1, 0));
        let e = euclid_data(1, 4).unwrap();
        assert_eq!((e.f.clone(), e.epsilon, e.a, e.b), (vec![0, 4], 4, 1, 3));
        let e = euclid_data(1, 1).unwrap();
        assert_eq!((e.f.clone(), e.epsilon, e.a, e.b), (vec![1], 1, 1, 0));
        assert!(euclid_data(4, 6).is_err());
        assert_eq!(epsilon(1, 2).unwrap(), 2);
    }

    #[test]
    fn continuant_examples() {
        assert_eq!(continuant(&[1u64, 1, 2]), BigInt::from(5));
        assert_eq!(continuant(&[1u64, 2]), BigInt::from(3));
        assert_eq!(continuant::<u64>(&[]), BigInt::from(1));
    }

    #[test]
    fn group_levels() {
        let lvl = ValueGroupLevel::from_pairs(&[(5, 3), (1, 2)]).unwrap();
        assert_eq!(lvl.betas, vec![int(1), rat(5, 3), rat(31, 6)]);
        assert_eq!(group_gcd(&lvl.truncate(1)), rat(1, 3));
        assert_eq!(group_gcd(&lvl), rat(1, 6));
        assert_eq!(group_gcd(&lvl.truncate(0)), int(1));
    }

    #[test]
    fn quotient_orders() {
        let lvl = ValueGroupLevel::from_pairs(&[(5, 3), (1, 2)]).unwrap();
        assert_eq!(order_in_quotient(2, &rat(31, 3), &lvl.truncate(1)).unwrap(), 2);
        assert_eq!(order_in_quotient(3, &int(5), &lvl.truncate(0)).unwrap(), 3);
        assert_eq!(order_in_quotient(1, &int(4), &lvl.truncate(0)).unwrap(), 1);
        assert!(order_in_quotient(2, &rat(1, 6), &lvl.truncate(1)).is_err());
    }

    #[test]
    fn representations() {
        let lvl = ValueGroupLevel::from_pairs(&[(5, 3)]).unwrap();
        assert_eq!(unique_representation(&rat(16, 3), &lvl).unwrap(), vec![2, 2]);
        assert_eq!(unique_representation(&int(5), &lvl).unwrap(), vec![5, 0]);
        assert_eq!(unique_representation(&rat(31, 3), &lvl).unwrap(), vec![7, 2]);
        assert!(unique_representation(&rat(4, 3), &lvl).is_err());
        assert!(unique_representation(&rat(31, 6), &lvl).is_err());
    }

    #[test]
    fn rational_strings() {
        assert_eq!(fmt_rat(&rat(-6, 4)), "-3/2");
        assert_eq!(fmt_rat(&int(5)), "5/1");
        assert_eq!(parse_rat("-3/2").unwrap(), rat(-3, 2));
        assert_eq!(parse_rat("7").unwrap(), int(7));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }
}
