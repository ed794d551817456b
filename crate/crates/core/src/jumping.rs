//! Jumping polynomials of a valuation given by `(p_i, q_i, λ_i)` data, their
//! values, canonical expansions and the independent subsequence.
//!
//! Values are computed internally with `ν*(x) = 1`; everything reported to
//! callers is multiplied by `μ`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{fmt_rat, gcd_u64, parse_rat, unique_representation, zgcd, Rational, ValueGroupLevel};
use crate::error::{Error, Result};
use crate::poly::Poly;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValuationSpec {
    pub mu: Rational,
    pub pairs: Vec<(u64, u64)>,
    pub lambdas: Vec<Rational>,
}

impl ValuationSpec {
    pub fn new(pairs: Vec<(u64, u64)>, lambdas: Vec<Rational>) -> Result<Self> {
        Self::with_mu(Rational::one(), pairs, lambdas)
    }

    pub fn with_mu(mu: Rational, pairs: Vec<(u64, u64)>, lambdas: Vec<Rational>) -> Result<Self> {
        let spec = ValuationSpec { mu, pairs, lambdas };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.len() != self.lambdas.len() {
            return Err(Error::domain(format!(
                "{} pairs but {} lambdas",
                self.pairs.len(),
                self.lambdas.len()
            )));
        }
        if !self.mu.is_positive() {
            return Err(Error::domain("mu must be positive"));
        }
        for (i, &(p, q)) in self.pairs.iter().enumerate() {
            if p == 0 || q == 0 || gcd_u64(p, q) != 1 {
                return Err(Error::domain(format!("pair {} = ({p}, {q}) is not a coprime positive pair", i + 1)));
            }
        }
        if let Some(i) = self.lambdas.iter().position(|l| l.is_zero()) {
            return Err(Error::domain(format!("lambda_{} is zero", i + 1)));
        }
        Ok(())
    }

    /// Number of levels the data defines.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn p(&self, i: usize) -> u64 {
        self.pairs[i - 1].0
    }

    pub fn q(&self, i: usize) -> u64 {
        self.pairs[i - 1].1
    }

    pub fn lambda(&self, i: usize) -> &Rational {
        &self.lambdas[i - 1]
    }

    pub fn truncate(&self, k: usize) -> ValuationSpec {
        ValuationSpec {
            mu: self.mu.clone(),
            pairs: self.pairs[..k].to_vec(),
            lambdas: self.lambdas[..k].to_vec(),
        }
    }

    /// No `q_i > 1` among the provided levels.
    pub fn is_discrete_pattern(&self) -> bool {
        self.pairs.iter().all(|&(_, q)| q == 1)
    }
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    #[serde(default = "one_str")]
    mu: String,
    pairs: Vec<(u64, u64)>,
    lambdas: Vec<String>,
}

fn one_str() -> String {
    "1/1".into()
}

impl Serialize for ValuationSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecRepr {
            mu: fmt_rat(&self.mu),
            pairs: self.pairs.clone(),
            lambdas: self.lambdas.iter().map(fmt_rat).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ValuationSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = SpecRepr::deserialize(d)?;
        let mu = parse_rat(&r.mu).map_err(D::Error::custom)?;
        let lambdas = r
            .lambdas
            .iter()
            .map(|l| parse_rat(l))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        ValuationSpec::with_mu(mu, r.pairs, lambdas).map_err(D::Error::custom)
    }
}

/// `T_0..T_{k+1}` with `β_i`, `Q_i`, exponent rows and the gcd chain `d_i`.
#[derive(Debug, Clone)]
pub struct JumpingSequence {
    pub spec: ValuationSpec,
    /// `T[i] = T_i` for `i ≤ k + 1`, or `i ≤ k` from [`build_keys`].
    pub t: Vec<Poly>,
    /// `β_0..β_m`, `m = min(k + 1, spec.len())`, in the `ν*(x) = 1` scale.
    pub beta: Vec<Rational>,
    /// `Q_0..Q_k`.
    pub q_prod: Vec<BigInt>,
    /// `n_rows[i - 1] = (n_{i,0}, …, n_{i,i-1})`.
    pub n_rows: Vec<Vec<u64>>,
    /// `d[i - 1] = gcd(p_1, …, p_i)`.
    pub d: Vec<u64>,
    pub groups: ValueGroupLevel,
}

impl JumpingSequence {
    /// Construction level `k`: the recursion was run for `i = 1..=k`.
    pub fn level(&self) -> usize {
        self.n_rows.len()
    }

    /// `β_i` in the `ν*` scale.
    pub fn beta_scaled(&self, i: usize) -> Rational {
        &self.beta[i] * &self.spec.mu
    }

    /// Number of levels at which values can be certified.
    pub fn value_levels(&self) -> usize {
        self.level().min(self.spec.len())
    }
}

pub fn build_sequence(spec: &ValuationSpec, k: usize) -> Result<JumpingSequence> {
    build(spec, k, true)
}

/// As [`build_sequence`] but stops at the polynomial `T_k`. Rows, `β` and the
/// groups still reach level `k`, which is all that values at levels `≤ k`
/// read; `T_{k+1}` is usually the largest polynomial by a factor `q_k`.
pub fn build_keys(spec: &ValuationSpec, k: usize) -> Result<JumpingSequence> {
    build(spec, k, false)
}

fn build(spec: &ValuationSpec, k: usize, top: bool) -> Result<JumpingSequence> {
    spec.validate()?;
    if k > spec.len() {
        return Err(Error::domain(format!("level {k} exceeds the {} provided pairs", spec.len())));
    }
    let groups = ValueGroupLevel::from_pairs(&spec.pairs[..(k + 1).min(spec.len())])?;
    let mut t = vec![Poly::x(), Poly::y()];
    let mut q_prod = vec![BigInt::one()];
    let mut n_rows = Vec::with_capacity(k);
    let mut d = Vec::with_capacity(k);
    for i in 1..=k {
        let (p, q) = spec.pairs[i - 1];
        q_prod.push(&q_prod[i - 1] * q);
        d.push(gcd_u64(d.last().copied().unwrap_or(0), p));
        let target = &groups.betas[i] * BigInt::from(q);
        let row = unique_representation(&target, &groups.truncate(i - 1))
            .expect("q_i·β_i lies in Γ_{i-1} above q_{i-1}·β_{i-1}");
        if top || i < k {
            let mut tail = Poly::one();
            for (j, &n) in row.iter().enumerate() {
                tail = &tail * &t[j].pow(n as u32);
            }
            let next = &t[i].pow(q as u32) - &tail.scale(spec.lambda(i));
            t.push(next);
        }
        n_rows.push(row);
    }
    Ok(JumpingSequence {
        spec: spec.clone(),
        t,
        beta: groups.betas.clone(),
        q_prod,
        n_rows,
        d,
        groups,
    })
}

#[derive(Debug, Clone)]
pub struct IndependentData {
    /// `i_0 = 0, i_1, …` with `q_{i_l} > 1` for `l ≥ 1`.
    pub indices: Vec<usize>,
    pub h: Vec<Poly>,
    /// `q̄_l`, `p̄_l` for `l ≥ 1`; entry 0 is a placeholder `(1, 1)`.
    pub qbar: Vec<u64>,
    pub pbar: Vec<u64>,
    pub betabar: Vec<Rational>,
    pub qbar_prod: Vec<BigInt>,
    /// Exponent rows `n_{i,i_l}` over the independent indices, for `i = 1..=k`.
    pub rows: Vec<Vec<u64>>,
}

pub fn independent_subsequence(seq: &JumpingSequence) -> IndependentData {
    let k = seq.level();
    let mut indices = vec![0];
    indices.extend((1..=k).filter(|&i| seq.spec.q(i) > 1));
    let h = indices.iter().map(|&i| seq.t[i].clone()).collect();
    let betabar = indices.iter().map(|&i| seq.beta[i].clone()).collect();
    let mut qbar = vec![1];
    let mut pbar = vec![1];
    let mut qbar_prod = vec![BigInt::one()];
    for l in 1..indices.len() {
        let (prev, cur) = (indices[l - 1], indices[l]);
        let q = seq.spec.q(cur);
        let skipped: u64 = (prev + 1..cur).map(|i| seq.spec.p(i)).sum();
        qbar.push(q);
        pbar.push(skipped * q + seq.spec.p(cur));
        qbar_prod.push(&qbar_prod[l - 1] * q);
    }
    let rows = seq
        .n_rows
        .iter()
        .map(|row| indices.iter().filter(|&&i| i < row.len()).map(|&i| row[i]).collect())
        .collect();
    IndependentData {
        indices,
        h,
        qbar,
        pbar,
        betabar,
        qbar_prod,
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionCheck {
    pub condition: u8,
    pub l: usize,
    /// Offending intermediate index for condition 3.
    pub i_prime: Option<usize>,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub checks: Vec<ConditionCheck>,
    /// `γ̄_l` computed from the exponent rows agrees with `β̄_l`.
    pub gamma_consistent: bool,
    pub ok: bool,
}

impl CriterionReport {
    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

/// Checks the three conditions of the irreducibility criterion on the
/// independent data, for every `l ≥ 1` that the provided levels reach.
pub fn verify_spivakovsky(ind: &IndependentData) -> CriterionReport {
    let nl = ind.indices.len();
    let last_level = ind.rows.len();
    let mut checks = Vec::new();

    // γ̄_l = (1/q̄_l)·Σ_{j<l} n_{i_l,i_j}·γ̄_j, from the row of H_{l+1}.
    let mut gamma = vec![Rational::one()];
    let mut gamma_consistent = ind.betabar.first() == Some(&Rational::one());
    for l in 1..nl {
        let il = ind.indices[l];
        if il > last_level {
            break;
        }
        let row = &ind.rows[il - 1];
        let s: Rational = (0..l).map(|j| Rational::from_integer(row[j].into()) * &gamma[j]).sum();
        let g = s / Rational::from_integer(ind.qbar[l].into());
        gamma_consistent &= ind.betabar.get(l) == Some(&g);
        gamma.push(g);
    }

    for l in 1..nl {
        let ql = Rational::from_integer(ind.qbar[l].into());
        let qb = &ql * &ind.betabar[l];
        let gen = ind.betabar[..l]
            .iter()
            .skip(1)
            .fold(ind.betabar[0].abs(), |g, b| zgcd(&g, b).unwrap_or(g));
        let holds = {
            let m = &qb / &gen;
            m.is_integer() && {
                let r = m.to_integer().mod_floor(&BigInt::from(ind.qbar[l]));
                r.gcd(&BigInt::from(ind.qbar[l])) == BigInt::one()
            }
        };
        checks.push(ConditionCheck {
            condition: 1,
            l,
            i_prime: None,
            holds,
        });
        if l + 1 < nl {
            checks.push(ConditionCheck {
                condition: 2,
                l,
                i_prime: None,
                holds: ind.betabar[l + 1] > qb,
            });
        }
        let upper = if l + 1 < nl { ind.indices[l + 1] } else { last_level + 1 };
        for ip in ind.indices[l] + 1..upper.min(last_level + 1) {
            let row = &ind.rows[ip - 1];
            let s: Rational = row
                .iter()
                .zip(&ind.betabar)
                .map(|(&n, b)| Rational::from_integer(n.into()) * b)
                .sum();
            checks.push(ConditionCheck {
                condition: 3,
                l,
                i_prime: Some(ip),
                holds: s > qb,
            });
        }
    }
    let ok = gamma_consistent && checks.iter().all(|c| c.holds);
    CriterionReport {
        checks,
        gamma_consistent,
        ok,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionTerm {
    /// `(a_0, …, a_k)`.
    pub exps: Vec<u64>,
    pub coeff: Rational,
    /// `Σ a_j·β_j` in the `ν*(x) = 1` scale.
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Expansion {
    pub level: usize,
    pub terms: Vec<ExpansionTerm>,
}

impl Expansion {
    pub fn min_value(&self) -> Option<&Rational> {
        self.terms.iter().map(|t| &t.value).min()
    }

    pub fn reconstruct(&self, seq: &JumpingSequence) -> Poly {
        let mut acc = Poly::zero();
        for term in &self.terms {
            let mut m = Poly::constant(term.coeff.clone());
            for (j, &a) in term.exps.iter().enumerate() {
                m = &m * &seq.t[j].pow(a as u32);
            }
            acc = &acc + &m;
        }
        acc
    }
}

/// `f = Σ c·Π T_j^{a_j}` by iterated division by `T_k, T_{k-1}, …, T_1`.
pub fn canonical_expansion(f: &Poly, seq: &JumpingSequence, k: usize) -> Result<Expansion> {
    if !f.is_polynomial() {
        return Err(Error::domain("expansion of a Laurent polynomial"));
    }
    if k >= seq.t.len() || k >= seq.beta.len() {
        return Err(Error::domain(format!("level {k} beyond the built sequence")));
    }
    let mut raw = Vec::new();
    expand_into(f, seq, k, &mut vec![0; k + 1], &mut raw)?;
    let terms = raw
        .into_iter()
        .map(|(exps, coeff)| {
            let value = exps
                .iter()
                .zip(&seq.beta)
                .map(|(&a, b)| Rational::from_integer(a.into()) * b)
                .sum();
            ExpansionTerm { exps, coeff, value }
        })
        .collect();
    Ok(Expansion { level: k, terms })
}

fn expand_into(
    f: &Poly,
    seq: &JumpingSequence,
    k: usize,
    prefix: &mut Vec<u64>,
    out: &mut Vec<(Vec<u64>, Rational)>,
) -> Result<()> {
    if k == 0 {
        for (e, c) in f.terms() {
            debug_assert_eq!(e.1, 0);
            prefix[0] = e.0 as u64;
            out.push((prefix.clone(), c.clone()));
        }
        return Ok(());
    }
    for (a, digit) in f.divide_monic_in_y(&seq.t[k])?.iter().enumerate() {
        if digit.is_zero() {
            continue;
        }
        prefix[k] = a as u64;
        expand_into(digit, seq, k - 1, prefix, out)?;
    }
    prefix[k] = 0;
    Ok(())
}

/// Minimal monomial value of the level-`k` expansion, scaled by `μ`; a lower
/// bound for `ν*(f)`.
pub fn truncated_value(f: &Poly, seq: &JumpingSequence, k: usize) -> Result<Rational> {
    if f.is_zero() {
        return Err(Error::domain("value of zero"));
    }
    let exp = canonical_expansion(f, seq, k)?;
    Ok(exp.min_value().expect("nonzero f has terms") * &seq.spec.mu)
}

impl JumpingSequence {
    /// Residue of a value-zero Laurent monomial `Π_{j≤m} T_j^{e_j}`, obtained by
    /// rewriting each `T_j^{q_j}` as `λ_j·Π T^{n_j}` from the top down.
    pub fn monomial_residue(&self, exps: &[i64]) -> Result<Rational> {
        let mut e = exps.to_vec();
        let mut res = Rational::one();
        for j in (1..e.len()).rev() {
            if e[j] == 0 {
                continue;
            }
            let q = self.spec.q(j) as i64;
            if e[j] % q != 0 || j > self.level() {
                return Err(Error::verification(
                    "value-zero monomial",
                    format!("exponent {} of T_{j} is not a multiple of q_{j} = {q}", e[j]),
                ));
            }
            let s = e[j] / q;
            res *= num_traits::pow::Pow::pow(self.spec.lambda(j), s as i32);
            for (l, &n) in self.n_rows[j - 1].iter().enumerate() {
                e[l] += s * n as i64;
            }
            e[j] = 0;
        }
        if e[0] != 0 {
            return Err(Error::verification(
                "value-zero monomial",
                format!("leftover x-exponent {}", e[0]),
            ));
        }
        Ok(res)
    }

    /// Certified `ν*(f)` via the residue-polynomial test at levels
    /// `1..=min(max_level, value_levels)`.
    pub fn value(&self, f: &Poly, max_level: usize) -> Result<Rational> {
        if f.is_zero() {
            return Err(Error::domain("value of zero"));
        }
        let top = max_level.min(self.value_levels());
        for k in 1..=top {
            let exp = canonical_expansion(f, self, k)?;
            let m = exp.min_value().expect("nonzero f has terms").clone();
            if self.residue_at_level(&exp, &m, k)? != Rational::zero() {
                return Ok(m * &self.spec.mu);
            }
        }
        Err(Error::LevelBoundExceeded(max_level))
    }

    /// `R(λ_k)` for the minimal-value terms of a level-`k` expansion.
    fn residue_at_level(&self, exp: &Expansion, m: &Rational, k: usize) -> Result<Rational> {
        let tied: Vec<&ExpansionTerm> = exp.terms.iter().filter(|t| &t.value == m).collect();
        let qk = self.spec.q(k) as i64;
        let reference = tied.iter().min_by_key(|t| t.exps[k]).expect("nonempty");
        let mut seen = std::collections::BTreeSet::new();
        let mut total = Rational::zero();
        for term in &tied {
            let diff = term.exps[k] as i64 - reference.exps[k] as i64;
            if diff % qk != 0 || !seen.insert(diff / qk) {
                return Err(Error::verification(
                    "tie grouping",
                    format!("inconsistent minimal terms at level {k}"),
                ));
            }
            let s = diff / qk;
            let b: Vec<i64> = (0..k)
                .map(|j| {
                    term.exps[j] as i64 - reference.exps[j] as i64 + s * self.n_rows[k - 1][j] as i64
                })
                .collect();
            let r = self.monomial_residue(&b)?;
            total += &term.coeff * r * num_traits::pow::Pow::pow(self.spec.lambda(k), s as i32);
        }
        Ok(total)
    }
}

/// Builds the sequence to the full spec length and evaluates `ν*(f)`.
pub fn value(f: &Poly, spec: &ValuationSpec, max_level: usize) -> Result<Rational> {
    build_sequence(spec, spec.len())?.value(f, max_level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};

    fn spec_53_12() -> ValuationSpec {
        ValuationSpec::new(vec![(5, 3), (1, 2)], vec![int(2), int(3)]).unwrap()
    }

    #[test]
    fn worked_sequence() {
        let seq = build_sequence(&spec_53_12(), 2).unwrap();
        let t2 = Poly::from_terms([(0, 3, int(1)), (5, 0, int(-2))]);
        assert_eq!(seq.t[2], t2);
        let t3 = &t2.pow(2) - &Poly::monomial(int(3), 7, 2);
        assert_eq!(seq.t[3], t3);
        assert_eq!(seq.beta[2], rat(31, 6));
        assert_eq!(seq.n_rows[1], vec![7, 2]);
        assert_eq!(seq.d, vec![5, 1]);
    }

    #[test]
    fn linear_when_all_q_one() {
        let spec = ValuationSpec::new(vec![(2, 1), (1, 1), (3, 1)], vec![int(1), int(-1), rat(1, 2)]).unwrap();
        let seq = build_sequence(&spec, 3).unwrap();
        let expect = Poly::from_terms([(0, 1, int(1)), (2, 0, int(-1)), (3, 0, int(1)), (6, 0, rat(-1, 2))]);
        assert_eq!(seq.t[4], expect);
    }

    #[test]
    fn independent_examples() {
        let seq = build_sequence(&spec_53_12(), 2).unwrap();
        assert_eq!(independent_subsequence(&seq).indices, vec![0, 1, 2]);

        let spec = ValuationSpec::new(vec![(5, 1), (1, 2)], vec![int(1), int(1)]).unwrap();
        let seq = build_sequence(&spec, 2).unwrap();
        let ind = independent_subsequence(&seq);
        assert_eq!(ind.indices, vec![0, 2]);
        assert_eq!(ind.h[1], Poly::from_terms([(0, 1, int(1)), (5, 0, int(-1))]));
        assert_eq!((ind.pbar[1], ind.qbar[1]), (11, 2));
        assert_eq!(ind.betabar[1], rat(11, 2));
        assert!(verify_spivakovsky(&ind).ok);
    }

    #[test]
    fn expansion_and_truncated_values() {
        let seq = build_sequence(&spec_53_12(), 2).unwrap();
        let t2 = seq.t[2].clone();
        let e = canonical_expansion(&t2, &seq, 1).unwrap();
        assert_eq!(e.reconstruct(&seq), t2);
        assert_eq!(e.terms.len(), 2);
        assert_eq!(truncated_value(&t2, &seq, 1).unwrap(), int(5));
        assert_eq!(truncated_value(&t2, &seq, 2).unwrap(), rat(31, 6));
        assert_eq!(truncated_value(&Poly::y(), &seq, 1).unwrap(), rat(5, 3));
        assert!(canonical_expansion(&Poly::zero(), &seq, 2).unwrap().terms.is_empty());
    }

    #[test]
    fn values() {
        let spec = spec_53_12();
        let seq = build_sequence(&spec, 2).unwrap();
        let f = &seq.t[2] + &Poly::monomial(int(1), 6, 0);
        assert_eq!(seq.value(&f, 2).unwrap(), rat(31, 6));
        assert_eq!(seq.value(&seq.t[2], 1), Err(Error::LevelBoundExceeded(1)));
        assert_eq!(seq.value(&Poly::monomial(int(1), 4, 0), 2).unwrap(), int(4));
        let scaled = ValuationSpec::with_mu(rat(1, 2), spec.pairs.clone(), spec.lambdas.clone()).unwrap();
        assert_eq!(value(&Poly::y(), &scaled, 2).unwrap(), rat(5, 6));
    }

    #[test]
    fn keys_certify_the_same_values() {
        let spec = spec_53_12();
        let full = build_sequence(&spec, 2).unwrap();
        let keys = build_keys(&spec, 2).unwrap();
        assert_eq!(keys.t.len(), 3);
        assert_eq!(keys.t[..], full.t[..3]);
        let f = &full.t[2] + &Poly::monomial(int(1), 6, 0);
        for g in [&f, &full.t[2], &Poly::y()] {
            assert_eq!(keys.value(g, 2).unwrap(), full.value(g, 2).unwrap());
        }
    }

    #[test]
    fn tampered_criteria() {
        let seq = build_sequence(&spec_53_12(), 2).unwrap();
        let ind = independent_subsequence(&seq);
        assert!(verify_spivakovsky(&ind).ok);

        let mut bad = ind.clone();
        bad.betabar[2] = int(5);
        let rep = verify_spivakovsky(&bad);
        assert!(!rep.ok);
        assert!(rep.failures().any(|c| c.condition == 2 && c.l == 1));
    }

    #[test]
    fn spec_json() {
        let spec = spec_53_12();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"mu":"1/1","pairs":[[5,3],[1,2]],"lambdas":["2/1","3/1"]}"#);
        let back: ValuationSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<ValuationSpec>(r#"{"pairs":[[4,2]],"lambdas":["1"]}"#).is_err());
    }
}
