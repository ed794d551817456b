//! Truncated bivariate power series in chart coordinates `(X, Y)` with a
//! single total-degree precision: coefficients of total degree `≥ prec` are
//! unknown. [`MonoSeries`] pairs a series with a Laurent monomial prefactor,
//! which is how pulled-back functions (`X^m·Y^n·unit`) are carried.

use std::fmt;

use num_traits::{One, Zero};

use crate::arith::{fmt_rat, Rational};
use crate::error::{Error, Result};
use crate::poly::Poly;

#[inline]
fn idx(i: u32, j: u32) -> usize {
    let d = (i + j) as usize;
    d * (d + 1) / 2 + j as usize
}

/// Truncated power series; stored densely by total degree.
#[derive(Clone, PartialEq, Eq)]
pub struct Series {
    coeffs: Vec<Rational>,
    prec: u32,
}

impl Series {
    pub fn zero(prec: u32) -> Self {
        let n = (prec as usize) * (prec as usize + 1) / 2;
        Series {
            coeffs: vec![Rational::zero(); n],
            prec,
        }
    }

    pub fn constant(c: Rational, prec: u32) -> Self {
        let mut s = Series::zero(prec);
        if prec > 0 {
            s.coeffs[0] = c;
        }
        s
    }

    pub fn one(prec: u32) -> Self {
        Series::constant(Rational::one(), prec)
    }

    pub fn var_x(prec: u32) -> Self {
        Series::from_terms([(1, 0, Rational::one())], prec)
    }

    pub fn var_y(prec: u32) -> Self {
        Series::from_terms([(0, 1, Rational::one())], prec)
    }

    pub fn from_terms<I: IntoIterator<Item = (u32, u32, Rational)>>(terms: I, prec: u32) -> Self {
        let mut s = Series::zero(prec);
        for (i, j, c) in terms {
            if i + j < prec {
                s.coeffs[idx(i, j)] += c;
            }
        }
        s
    }

    /// Truncation of a polynomial (nonnegative exponents).
    pub fn from_poly(p: &Poly, prec: u32) -> Result<Self> {
        if !p.is_polynomial() {
            return Err(Error::domain("series from a Laurent polynomial"));
        }
        Ok(Series::from_terms(
            p.terms().map(|(e, c)| (e.0 as u32, e.1 as u32, c.clone())),
            prec,
        ))
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn coeff(&self, i: u32, j: u32) -> Rational {
        if i + j < self.prec {
            self.coeffs[idx(i, j)].clone()
        } else {
            Rational::zero()
        }
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(0, 0)
    }

    pub fn is_unit(&self) -> bool {
        self.prec > 0 && !self.coeffs[0].is_zero()
    }

    /// Known nonzero terms `(i, j, c)` in increasing total degree.
    pub fn nonzero(&self) -> Vec<(u32, u32, &Rational)> {
        let mut out = Vec::new();
        for d in 0..self.prec {
            for j in 0..=d {
                let c = &self.coeffs[idx(d - j, j)];
                if !c.is_zero() {
                    out.push((d - j, j, c));
                }
            }
        }
        out
    }

    /// All known coefficients vanish.
    pub fn is_zero_below_prec(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn truncate(&self, prec: u32) -> Series {
        if prec >= self.prec {
            return self.clone();
        }
        let n = (prec as usize) * (prec as usize + 1) / 2;
        Series {
            coeffs: self.coeffs[..n].to_vec(),
            prec,
        }
    }

    /// Known part as a polynomial.
    pub fn to_poly(&self) -> Poly {
        Poly::from_terms(
            self.nonzero()
                .into_iter()
                .map(|(i, j, c)| (i as i64, j as i64, c.clone())),
        )
    }

    pub fn scale(&self, c: &Rational) -> Series {
        Series {
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
            prec: self.prec,
        }
    }

    pub fn add(&self, other: &Series) -> Series {
        let prec = self.prec.min(other.prec);
        let n = (prec as usize) * (prec as usize + 1) / 2;
        Series {
            coeffs: (0..n).map(|k| &self.coeffs[k] + &other.coeffs[k]).collect(),
            prec,
        }
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn mul(&self, other: &Series) -> Series {
        let prec = self.prec.min(other.prec);
        let mut out = Series::zero(prec);
        let a = self.truncate(prec);
        let b = other.truncate(prec);
        let bn = b.nonzero();
        for (i1, j1, c1) in a.nonzero() {
            let d1 = i1 + j1;
            for &(i2, j2, c2) in &bn {
                if d1 + i2 + j2 >= prec {
                    break;
                }
                out.coeffs[idx(i1 + i2, j1 + j2)] += c1 * c2;
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Series {
        let mut result = Series::one(self.prec);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Multiplies by `X^i Y^j`; the known range grows by `i + j`.
    pub fn shift(&self, i: u32, j: u32) -> Series {
        let prec = self.prec + i + j;
        let mut out = Series::zero(prec);
        for (a, b, c) in self.nonzero() {
            out.coeffs[idx(a + i, b + j)] = c.clone();
        }
        out
    }

    /// Rational power of a unit: `self^r`, normalised so that the constant
    /// term of the result is `c0^r`, which must be rational. Uses the
    /// Euler-operator recurrence `S·E(F) = r·F·E(S)`.
    pub fn pow_rat(&self, r: &Rational) -> Result<Series> {
        if !self.is_unit() {
            return Err(Error::domain("rational power of a non-unit series"));
        }
        let c0 = self.constant_term();
        let f0 = rational_root_power(&c0, r)?;
        let prec = self.prec;
        let mut out = Series::zero(prec);
        out.coeffs[0] = f0;
        let sn: Vec<(u32, u32, Rational)> = self
            .nonzero()
            .into_iter()
            .filter(|(i, j, _)| i + j > 0)
            .map(|(i, j, c)| (i, j, c.clone()))
            .collect();
        for d in 1..prec {
            let inv = (c0.clone() * Rational::from_integer(d.into())).recip();
            for j in 0..=d {
                let i = d - j;
                let mut acc = Rational::zero();
                for (a, b, s) in &sn {
                    if *a > i || *b > j {
                        continue;
                    }
                    let f = &out.coeffs[idx(i - a, j - b)];
                    if f.is_zero() {
                        continue;
                    }
                    let da = Rational::from_integer((a + b).into());
                    let rest = Rational::from_integer((d - a - b).into());
                    acc += s * f * (r * &da - rest);
                }
                out.coeffs[idx(i, j)] = acc * &inv;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Series> {
        self.pow_rat(&-Rational::one())
    }

    pub fn powi(&self, n: i64) -> Result<Series> {
        if n >= 0 {
            Ok(self.pow(n as u32))
        } else {
            Ok(self.inverse()?.pow((-n) as u32))
        }
    }

    /// `self(x_img, y_img)`; both images must have zero constant term.
    pub fn compose(&self, x_img: &Series, y_img: &Series) -> Result<Series> {
        if !x_img.constant_term().is_zero() || !y_img.constant_term().is_zero() {
            return Err(Error::domain("composition images must vanish at the origin"));
        }
        let prec = self.prec.min(x_img.prec).min(y_img.prec);
        let xi = x_img.truncate(prec);
        let yi = y_img.truncate(prec);
        let mut xpow = vec![Series::one(prec)];
        for k in 1..prec {
            let next = xpow[k as usize - 1].mul(&xi);
            xpow.push(next);
        }
        // Horner in the second variable.
        let mut acc = Series::zero(prec);
        for j in (0..prec).rev() {
            let mut row = Series::zero(prec);
            for i in 0..prec - j {
                let c = self.coeff(i, j);
                if !c.is_zero() {
                    row = row.add(&xpow[i as usize].scale(&c));
                }
            }
            acc = acc.mul(&yi).add(&row);
        }
        Ok(acc)
    }

    /// Substitutes `X ↦ X^a Y^b`, `Y ↦ X^c Y^d` (nonnegative exponents, each
    /// image of total degree at least one).
    pub fn substitute_monomials(&self, xm: (u32, u32), ym: (u32, u32)) -> Series {
        let prec = self.prec;
        let mut out = Series::zero(prec);
        for (i, j, c) in self.nonzero() {
            let (a, b) = (i * xm.0 + j * ym.0, i * xm.1 + j * ym.1);
            if a + b < prec {
                out.coeffs[idx(a, b)] += c;
            }
        }
        out
    }

    /// Largest `k` with `X^k` dividing every known term; `None` if no term is known.
    pub fn x_order(&self) -> Option<u32> {
        self.nonzero().iter().map(|t| t.0).min()
    }

    pub fn y_order(&self) -> Option<u32> {
        self.nonzero().iter().map(|t| t.1).min()
    }

    /// Divides by `X^i Y^j`; the known range shrinks accordingly.
    pub fn unshift(&self, i: u32, j: u32) -> Result<Series> {
        if i + j > self.prec {
            return Err(Error::precision("division exhausts the known range"));
        }
        let prec = self.prec - i - j;
        let mut out = Series::zero(prec);
        for (a, b, c) in self.nonzero() {
            if a < i || b < j {
                return Err(Error::domain(format!("term X^{a}Y^{b} not divisible by X^{i}Y^{j}")));
            }
            if a + b - i - j < prec {
                out.coeffs[idx(a - i, b - j)] = c.clone();
            }
        }
        Ok(out)
    }

    /// Same known terms with a larger declared precision; the new range is
    /// filled with zeros and must be justified by the caller.
    fn extend(&self, prec: u32) -> Series {
        if prec <= self.prec {
            return self.truncate(prec);
        }
        let mut out = Series::zero(prec);
        out.coeffs[..self.coeffs.len()].clone_from_slice(&self.coeffs);
        out
    }

    /// For `L(X, Y)` with `L(0, 0) = 0` and `∂L/∂Y(0, 0) ≠ 0`, the series
    /// `Y(X, W)` with `L(X, Y(X, W)) = W`. Fixed-point iteration gains one
    /// degree per round.
    pub fn invert_in_y(&self) -> Result<Series> {
        let prec = self.prec;
        if !self.constant_term().is_zero() {
            return Err(Error::domain("inversion needs L(0, 0) = 0"));
        }
        let s0 = self.coeff(0, 1);
        if s0.is_zero() {
            return Err(Error::domain("inversion needs a nonzero linear Y-coefficient"));
        }
        let inv = s0.recip();
        let nonlinear = self.sub(&Series::var_y(prec).scale(&s0));
        let mut y = Series::zero(1);
        for d in 1..prec {
            let p = d + 1;
            let composed = nonlinear
                .truncate(p)
                .compose(&Series::var_x(p), &y.extend(p))?;
            y = Series::var_y(p).sub(&composed).scale(&inv);
        }
        Ok(y.extend(prec))
    }

    /// Difference vanishes below the common precision.
    pub fn agrees_with(&self, other: &Series) -> bool {
        self.sub(other).is_zero_below_prec()
    }
}

/// `c^r` when it is rational (exact integer roots of numerator and denominator).
pub fn rational_root_power(c: &Rational, r: &Rational) -> Result<Rational> {
    use num_bigint::BigInt;
    use num_traits::{Signed, ToPrimitive};
    let num = r.numer().to_i64().ok_or_else(|| Error::domain("exponent too large"))?;
    let den = r.denom().to_u64().ok_or_else(|| Error::domain("exponent too large"))?;
    let root = if den == 1 {
        c.clone()
    } else {
        let root_int = |n: &BigInt| -> Option<BigInt> {
            if n.is_negative() && den % 2 == 0 {
                return None;
            }
            let cand = n.nth_root(den as u32);
            (num_traits::pow::Pow::pow(&cand, den as u32) == *n).then_some(cand)
        };
        match (root_int(c.numer()), root_int(c.denom())) {
            (Some(n), Some(d)) => Rational::new(n, d),
            _ => return Err(Error::UnitRootNotRational(Box::new(c.clone()), den)),
        }
    };
    if root.is_zero() && num < 0 {
        return Err(Error::domain("negative power of zero"));
    }
    Ok(num_traits::pow::Pow::pow(&root, num as i32))
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + O(deg {})", self.to_poly(), self.prec)
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// `coef · X^mono.0 · Y^mono.1 · series`. Whenever the series is a unit its
/// constant term is 1; large constants live in `coef` so that powers of
/// units keep small coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonoSeries {
    pub mono: (i64, i64),
    pub coef: Rational,
    pub series: Series,
}

impl MonoSeries {
    pub fn new(mono: (i64, i64), series: Series) -> Self {
        MonoSeries::with_coef(mono, Rational::one(), series)
    }

    /// Moves the constant term of a unit series into the scalar.
    pub fn with_coef(mono: (i64, i64), coef: Rational, series: Series) -> Self {
        if coef.is_zero() {
            let prec = series.prec();
            return MonoSeries { mono, coef: Rational::one(), series: Series::zero(prec) };
        }
        let c0 = series.constant_term();
        if c0.is_zero() || c0.is_one() {
            return MonoSeries { mono, coef, series };
        }
        let series = series.scale(&c0.recip());
        MonoSeries { mono, coef: coef * c0, series }
    }

    pub fn constant(c: Rational, prec: u32) -> Self {
        MonoSeries::new((0, 0), Series::constant(c, prec))
    }

    pub fn prec(&self) -> u32 {
        self.series.prec()
    }

    /// The series with the scalar folded in.
    pub fn full_series(&self) -> Series {
        if self.coef.is_one() {
            self.series.clone()
        } else {
            self.series.scale(&self.coef)
        }
    }

    /// Constant term of the full series.
    pub fn constant_term(&self) -> Rational {
        &self.coef * self.series.constant_term()
    }

    pub fn is_zero_below_prec(&self) -> bool {
        self.series.is_zero_below_prec()
    }

    pub fn mul(&self, other: &MonoSeries) -> MonoSeries {
        MonoSeries::with_coef(
            (self.mono.0 + other.mono.0, self.mono.1 + other.mono.1),
            &self.coef * &other.coef,
            self.series.mul(&other.series),
        )
    }

    pub fn scale(&self, c: &Rational) -> MonoSeries {
        MonoSeries::with_coef(self.mono, &self.coef * c, self.series.clone())
    }

    pub fn pow(&self, n: u32) -> MonoSeries {
        MonoSeries::with_coef(
            (self.mono.0 * n as i64, self.mono.1 * n as i64),
            rat_pow(&self.coef, n as i64),
            self.series.pow(n),
        )
    }

    /// Integer power; negative exponents need a unit series.
    pub fn powi(&self, n: i64) -> Result<MonoSeries> {
        Ok(MonoSeries::with_coef(
            (self.mono.0 * n, self.mono.1 * n),
            rat_pow(&self.coef, n),
            self.series.powi(n)?,
        ))
    }

    pub fn add(&self, other: &MonoSeries) -> MonoSeries {
        sum_aligned(&[self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &MonoSeries) -> MonoSeries {
        self.add(&other.scale(&-Rational::one()))
    }

    /// Moves every `X`/`Y` power common to all known terms into the monomial.
    pub fn normalize(&self) -> Result<MonoSeries> {
        let (kx, ky) = match (self.series.x_order(), self.series.y_order()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::precision(format!(
                    "no known nonzero coefficient below degree {}",
                    self.prec()
                )))
            }
        };
        Ok(MonoSeries::with_coef(
            (self.mono.0 + kx as i64, self.mono.1 + ky as i64),
            self.coef.clone(),
            self.series.unshift(kx, ky)?,
        ))
    }

    /// Monomial prefactor is trivial and the series is a unit.
    pub fn is_unit(&self) -> bool {
        self.mono == (0, 0) && self.series.is_unit()
    }

    pub fn describe(&self) -> String {
        format!(
            "X^{}·Y^{}·({}) [prec {}]",
            self.mono.0,
            self.mono.1,
            fmt_rat(&self.constant_term()),
            self.prec()
        )
    }
}

fn rat_pow(c: &Rational, n: i64) -> Rational {
    if c.is_one() {
        return Rational::one();
    }
    let base = if n < 0 { c.recip() } else { c.clone() };
    let mut e = n.unsigned_abs();
    let mut acc = Rational::one();
    let mut b = base;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &b;
        }
        e >>= 1;
        if e > 0 {
            b = &b * &b;
        }
    }
    acc
}

/// Sum of monomial-times-series terms aligned at the smallest exponents.
pub fn sum_aligned(parts: &[MonoSeries]) -> MonoSeries {
    let mx = parts.iter().map(|p| p.mono.0).min().unwrap_or(0);
    let my = parts.iter().map(|p| p.mono.1).min().unwrap_or(0);
    // Factor out the scalar of the first part so that equal-size constants cancel.
    let common = parts.first().map(|p| p.coef.clone()).unwrap_or_else(Rational::one);
    let shifted: Vec<Series> = parts
        .iter()
        .map(|p| {
            let rel = &p.coef / &common;
            let s = if rel.is_one() { p.series.clone() } else { p.series.scale(&rel) };
            s.shift((p.mono.0 - mx) as u32, (p.mono.1 - my) as u32)
        })
        .collect();
    let prec = shifted.iter().map(|s| s.prec()).min().unwrap_or(0);
    let mut acc = Series::zero(prec);
    for s in &shifted {
        acc = acc.add(&s.truncate(prec));
    }
    MonoSeries::with_coef((mx, my), common, acc)
}

/// Result of dividing out the largest power of one coordinate.
#[derive(Debug, Clone)]
pub struct Factored {
    pub order: i64,
    pub remainder: MonoSeries,
    pub is_unit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    X,
    Y,
}

/// Divides out the maximal known power of `var`; `is_unit` reports whether
/// the cofactor is a unit of the local ring.
pub fn factor_exceptional(g: &MonoSeries, var: Coord) -> Result<Factored> {
    if g.series.is_zero_below_prec() {
        return Err(Error::precision(format!(
            "cannot factor: all coefficients below degree {} vanish",
            g.prec()
        )));
    }
    let (order, remainder) = match var {
        Coord::X => {
            let k = g.series.x_order().expect("nonzero");
            (
                g.mono.0 + k as i64,
                MonoSeries::with_coef((0, g.mono.1), g.coef.clone(), g.series.unshift(k, 0)?),
            )
        }
        Coord::Y => {
            let k = g.series.y_order().expect("nonzero");
            (
                g.mono.1 + k as i64,
                MonoSeries::with_coef((g.mono.0, 0), g.coef.clone(), g.series.unshift(0, k)?),
            )
        }
    };
    let is_unit = remainder.is_unit();
    Ok(Factored {
        order,
        remainder,
        is_unit,
    })
}

/// Binomial-series `t`-th root of a unit with constant term 1.
pub fn unit_root(delta: &Series, t: u64) -> Result<Series> {
    if t == 0 {
        return Err(Error::domain("root of order zero"));
    }
    if delta.constant_term() != Rational::one() {
        return Err(Error::domain(format!(
            "unit_root needs constant term 1, got {}",
            fmt_rat(&delta.constant_term())
        )));
    }
    delta.pow_rat(&Rational::new(1.into(), t.into()))
}

/// Constant term of a unit.
pub fn residue(g: &Series) -> Result<Rational> {
    if !g.is_unit() {
        return Err(Error::domain("residue of a non-unit"));
    }
    Ok(g.constant_term())
}

/// `(X^i Y^j · unit)` images of the base coordinates `x, y` in a chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionMap {
    pub x_image: MonoSeries,
    pub y_image: MonoSeries,
}

impl SubstitutionMap {
    pub fn identity(prec: u32) -> Self {
        SubstitutionMap {
            x_image: MonoSeries::new((1, 0), Series::one(prec)),
            y_image: MonoSeries::new((0, 1), Series::one(prec)),
        }
    }

    pub fn new(x_image: MonoSeries, y_image: MonoSeries) -> Result<Self> {
        if !x_image.series.is_unit() || !y_image.series.is_unit() {
            return Err(Error::domain("substitution unit parts must have nonzero constant term"));
        }
        Ok(SubstitutionMap { x_image, y_image })
    }

    pub fn prec(&self) -> u32 {
        self.x_image.prec().min(self.y_image.prec())
    }

    /// Pulls back a (Laurent) polynomial in the base coordinates.
    pub fn apply(&self, f: &Poly) -> Result<MonoSeries> {
        if f.is_zero() {
            return Err(Error::domain("pullback of zero"));
        }
        let mut xs: std::collections::HashMap<i64, MonoSeries> = Default::default();
        let mut ys: std::collections::HashMap<i64, MonoSeries> = Default::default();
        let mut parts = Vec::with_capacity(f.len());
        for (e, c) in f.terms() {
            if let std::collections::hash_map::Entry::Vacant(v) = xs.entry(e.0) {
                v.insert(self.x_image.powi(e.0)?);
            }
            if let std::collections::hash_map::Entry::Vacant(v) = ys.entry(e.1) {
                v.insert(self.y_image.powi(e.1)?);
            }
            parts.push(xs[&e.0].mul(&ys[&e.1]).scale(c));
        }
        Ok(sum_aligned(&parts))
    }

    /// Pulls back a series in the base coordinates; both images must have
    /// positive order.
    pub fn apply_series(&self, g: &MonoSeries) -> Result<MonoSeries> {
        let (xi, yi) = (&self.x_image, &self.y_image);
        if xi.mono.0 < 0 || xi.mono.1 < 0 || yi.mono.0 < 0 || yi.mono.1 < 0 {
            return Err(Error::domain("series pullback needs polynomial monomials"));
        }
        if xi.mono == (0, 0) || yi.mono == (0, 0) {
            return Err(Error::domain("series pullback needs images vanishing at the origin"));
        }
        let xs = xi.full_series().shift(xi.mono.0 as u32, xi.mono.1 as u32);
        let ys = yi.full_series().shift(yi.mono.0 as u32, yi.mono.1 as u32);
        let prec = g.prec().min(self.prec());
        let body = g.series.truncate(prec).compose(&xs.truncate(prec), &ys.truncate(prec))?;
        let pre = xi.powi(g.mono.0)?.mul(&yi.powi(g.mono.1)?);
        Ok(pre.mul(&MonoSeries::with_coef((0, 0), g.coef.clone(), body)))
    }
}
