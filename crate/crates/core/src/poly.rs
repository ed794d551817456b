//! Sparse exact bivariate polynomials in `x, y` over ℚ. Exponents may be
//! negative, so the same type carries Laurent expressions such as `y^q/x^p`;
//! operations that only make sense for genuine polynomials check
//! [`Poly::is_polynomial`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{fmt_rat, parse_rat, Rational};
use crate::error::{Error, Result};

/// Exponent pair `(i, j)` of `x^i y^j`, ordered by `(j, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Exp(pub i64, pub i64);

impl Ord for Exp {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.1, self.0).cmp(&(other.1, other.0))
    }
}

impl PartialOrd for Exp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Exp, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Poly::monomial(c, 0, 0)
    }

    pub fn monomial(c: Rational, i: i64, j: i64) -> Self {
        let mut p = Poly::zero();
        p.add_term(Exp(i, j), c);
        p
    }

    pub fn x() -> Self {
        Poly::monomial(Rational::one(), 1, 0)
    }

    pub fn y() -> Self {
        Poly::monomial(Rational::one(), 0, 1)
    }

    pub fn from_terms<I: IntoIterator<Item = (i64, i64, Rational)>>(terms: I) -> Self {
        let mut p = Poly::zero();
        for (i, j, c) in terms {
            p.add_term(Exp(i, j), c);
        }
        p
    }

    pub fn add_term(&mut self, e: Exp, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exp, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, i: i64, j: i64) -> Rational {
        self.terms.get(&Exp(i, j)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_polynomial(&self) -> bool {
        self.terms.keys().all(|e| e.0 >= 0 && e.1 >= 0)
    }

    /// Largest `y` exponent; `None` for the zero polynomial.
    pub fn deg_y(&self) -> Option<i64> {
        self.terms.keys().map(|e| e.1).max()
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect(),
        }
    }

    /// Multiplies by `x^i y^j`.
    pub fn shift(&self, i: i64, j: i64) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(e, v)| (Exp(e.0 + i, e.1 + j), v.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Sum of the terms with `y` exponent `j`, as a polynomial in `x`.
    pub fn coeff_y(&self, j: i64) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.1 == j)
                .map(|(e, v)| (Exp(e.0, 0), v.clone()))
                .collect(),
        }
    }

    pub fn x_exponents(&self) -> impl Iterator<Item = i64> + '_ {
        self.terms.keys().map(|e| e.0)
    }

    pub fn eval(&self, x: &Rational, y: &Rational) -> Result<Rational> {
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            acc += c * rpow(x, e.0)? * rpow(y, e.1)?;
        }
        Ok(acc)
    }

    /// `self(x_img, y_img)` for polynomial images; Laurent exponents of `self`
    /// are rejected.
    pub fn compose(&self, x_img: &Poly, y_img: &Poly) -> Result<Poly> {
        if !self.is_polynomial() {
            return Err(Error::domain("compose requires a polynomial"));
        }
        let mut acc = Poly::zero();
        for (e, c) in &self.terms {
            acc = &acc + &(&x_img.pow(e.0 as u32) * &y_img.pow(e.1 as u32)).scale(c);
        }
        Ok(acc)
    }

    /// Substitutes the Laurent monomials `x ↦ x^a y^b`, `y ↦ x^c y^d`.
    pub fn substitute_monomials(&self, xm: (i64, i64), ym: (i64, i64)) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            out.add_term(Exp(e.0 * xm.0 + e.1 * ym.0, e.0 * xm.1 + e.1 * ym.1), c.clone());
        }
        out
    }

    /// Leading coefficient in `y` is exactly the constant 1.
    pub fn is_monic_in_y(&self) -> bool {
        match self.deg_y() {
            Some(d) => self.coeff_y(d) == Poly::one(),
            None => false,
        }
    }

    /// Quotient and remainder of division by `g`, monic in `y`.
    pub fn divrem_y(&self, g: &Poly) -> Result<(Poly, Poly)> {
        let g = monic_divisor(self, g)?;
        let mut rows = y_rows(self);
        let quo = divrem_rows(&mut rows, &g);
        Ok((from_rows(quo), from_rows(rows)))
    }

    /// Expansion `self = Σ c_j·g^j` with `deg_y c_j < deg_y g`.
    pub fn divide_monic_in_y(&self, g: &Poly) -> Result<Vec<Poly>> {
        let g = monic_divisor(self, g)?;
        let mut digits = Vec::new();
        let mut rows = y_rows(self);
        while rows.iter().any(|r| !r.num.is_empty()) {
            let quo = divrem_rows(&mut rows, &g);
            digits.push(from_rows(std::mem::replace(&mut rows, quo)));
        }
        Ok(digits)
    }

    /// Canonical `[[i, j, "num/den"], ...]` term list.
    pub fn to_triples(&self) -> Vec<(i64, i64, String)> {
        self.terms.iter().map(|(e, c)| (e.0, e.1, fmt_rat(c))).collect()
    }

    pub fn from_triples(triples: &[(i64, i64, String)]) -> Result<Poly> {
        let mut p = Poly::zero();
        for (i, j, c) in triples {
            p.add_term(Exp(*i, *j), parse_rat(c)?);
        }
        Ok(p)
    }
}

fn rpow(b: &Rational, e: i64) -> Result<Rational> {
    if e < 0 && b.is_zero() {
        return Err(Error::domain("negative power of zero"));
    }
    Ok(num_traits::pow::Pow::pow(b, e as i32))
}

/// One `y`-degree slice as integer numerators over a shared denominator, so
/// the division loop never reduces fractions.
struct Row {
    den: BigInt,
    num: HashMap<i64, BigInt>,
}

impl Row {
    fn empty() -> Row {
        Row {
            den: BigInt::one(),
            num: HashMap::new(),
        }
    }

    /// Divides out the content shared by `den` and every numerator.
    fn reduce(&mut self) {
        let g = self.num.values().fold(self.den.clone(), |g, v| g.gcd(v));
        if !g.is_one() {
            self.den /= &g;
            for v in self.num.values_mut() {
                *v /= &g;
            }
        }
    }

    /// Moves to denominator `lcm(den, d)` and returns `den / d`.
    fn widen(&mut self, d: &BigInt) -> BigInt {
        let target = self.den.lcm(d);
        if target != self.den {
            let f = &target / &self.den;
            for v in self.num.values_mut() {
                *v *= &f;
            }
            self.den = target;
        }
        &self.den / d
    }
}

/// The divisor's rows below `y^m` over one denominator.
struct Divisor {
    m: usize,
    den: BigInt,
    lower: Vec<Vec<(i64, BigInt)>>,
}

fn monic_divisor(f: &Poly, g: &Poly) -> Result<Divisor> {
    if !g.is_polynomial() || !f.is_polynomial() || !g.is_monic_in_y() {
        return Err(Error::domain("divisor must be a polynomial monic in y"));
    }
    let m = g.deg_y().expect("nonzero") as usize;
    let (terms, den) = g.integer_terms();
    let mut lower = vec![Vec::new(); m];
    for (e, c) in terms {
        if (e.1 as usize) < m {
            lower[e.1 as usize].push((e.0, c));
        }
    }
    Ok(Divisor { m, den, lower })
}

fn y_rows(f: &Poly) -> Vec<Row> {
    let mut rows: Vec<Row> = (0..f.deg_y().map_or(0, |d| d as usize + 1)).map(|_| Row::empty()).collect();
    for (e, c) in &f.terms {
        let row = &mut rows[e.1 as usize];
        row.widen(c.denom());
        row.num.insert(e.0, c.numer() * (&row.den / c.denom()));
    }
    rows
}

/// Reduces `rows` below `y^m` in place and returns the quotient rows.
fn divrem_rows(rows: &mut Vec<Row>, g: &Divisor) -> Vec<Row> {
    let (m, n) = (g.m, rows.len());
    let mut quo: Vec<Row> = (0..n.saturating_sub(m)).map(|_| Row::empty()).collect();
    for d in (m..n).rev() {
        let mut lead = std::mem::replace(&mut rows[d], Row::empty());
        if lead.num.is_empty() {
            quo[d - m] = Row::empty();
            continue;
        }
        lead.reduce();
        let scale = &lead.den * &g.den;
        for (gy, grow) in g.lower.iter().enumerate() {
            if grow.is_empty() {
                continue;
            }
            let target = &mut rows[d - m + gy];
            let f = target.widen(&scale);
            for (gx, gc) in grow {
                let gc = if f.is_one() { gc.clone() } else { gc * &f };
                for (x, c) in &lead.num {
                    let key = x + gx;
                    let v = target.num.entry(key).or_insert_with(BigInt::zero);
                    *v -= c * &gc;
                    if v.is_zero() {
                        target.num.remove(&key);
                    }
                }
            }
        }
        quo[d - m] = lead;
    }
    rows.truncate(m.min(n));
    while quo.last().is_some_and(|r| r.num.is_empty()) {
        quo.pop();
    }
    quo
}

fn from_rows(rows: Vec<Row>) -> Poly {
    let mut terms = BTreeMap::new();
    for (j, row) in rows.into_iter().enumerate() {
        for (i, c) in row.num {
            terms.insert(Exp(i, j as i64), Rational::new(c, row.den.clone()));
        }
    }
    Poly { terms }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, c.clone());
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, -c);
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&-Rational::one())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    /// Products are accumulated as integers over the common denominator, so
    /// each output coefficient is reduced once.
    fn mul(self, rhs: &Poly) -> Poly {
        let (a, da) = self.integer_terms();
        let (b, db) = rhs.integer_terms();
        let mut acc: HashMap<Exp, BigInt> = HashMap::with_capacity(a.len().max(b.len()) * 2);
        for (e1, c1) in &a {
            for (e2, c2) in &b {
                *acc.entry(Exp(e1.0 + e2.0, e1.1 + e2.1)).or_default() += c1 * c2;
            }
        }
        let den = da * db;
        Poly {
            terms: acc
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(e, c)| (e, Rational::new(c, den.clone())))
                .collect(),
        }
    }
}

impl Poly {
    /// Coefficients times the lcm `L` of their denominators, and `L`.
    fn integer_terms(&self) -> (Vec<(Exp, BigInt)>, BigInt) {
        let l = self.terms.values().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (*e, c.numer() * (&l / c.denom())))
            .collect();
        (terms, l)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // descending y-degree reads more naturally for keys
        for (n, (e, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if n == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            let mono = match (e.0, e.1) {
                (0, 0) => String::new(),
                _ => {
                    let mut parts = Vec::new();
                    for (v, k) in [("x", e.0), ("y", e.1)] {
                        match k {
                            0 => {}
                            1 => parts.push(v.to_string()),
                            _ => parts.push(format!("{v}^{k}")),
                        }
                    }
                    parts.join("*")
                }
            };
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{mag}*{mono}")?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    terms: Vec<(i64, i64, String)>,
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyRepr {
            terms: self.to_triples(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PolyRepr::deserialize(d)?;
        Poly::from_triples(&repr.terms).map_err(D::Error::custom)
    }
}
