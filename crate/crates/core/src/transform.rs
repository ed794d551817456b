//! Quadratic transforms along `ν*`: single blow-up steps, the composite step
//! driven by the Euclidean algorithm on `(p, q)`, and the chain of checkpoint
//! charts in which every jumping polynomial becomes a power of the
//! exceptional parameter times a unit.
//!
//! A checkpoint chart `i` has coordinates `(x_i, y_i)` with `x_i` exceptional
//! and `y_i` the strict transform of `T_{i+1}`. It stores the pullbacks of
//! `T_0..T_{i+1}` as monomial-times-series expressions in these coordinates.
//! Intermediate charts inside a composite step are Laurent monomials in the
//! coordinates of the checkpoint the step started from.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::arith::{euclid_data, fmt_rat, Rational};
use crate::error::{Error, Result};
use crate::jumping::{build_sequence, JumpingSequence, ValuationSpec};
use crate::poly::Poly;
use crate::series::{factor_exceptional, Coord, MonoSeries, Series, SubstitutionMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepCase {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c")]
    C,
}

/// Chart inside a composite step: `u = x^e00 y^e01`, `v = x^e10 y^e11` in the
/// starting coordinates. After a case-c step the second coordinate is
/// `x^e10 y^e11 − c` and `terminal` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalChart {
    pub exps: [[i64; 2]; 2],
    pub values: [Option<Rational>; 2],
    pub terminal: bool,
}

impl LocalChart {
    pub fn start(vx: Rational, vy: Rational) -> Self {
        LocalChart {
            exps: [[1, 0], [0, 1]],
            values: [Some(vx), Some(vy)],
            terminal: false,
        }
    }

    /// Exponents `(i, j)` with `x = u^i v^j`, where `v` is read as the
    /// monomial `x^e10 y^e11` for terminal charts.
    pub fn x_in_chart(&self) -> (i64, i64) {
        let [[a, b], [c, d]] = self.exps;
        let det = a * d - b * c;
        debug_assert!(det == 1 || det == -1);
        (d * det, -b * det)
    }

    /// The exceptional divisor (support of the pulled-back `x`) has one
    /// component; returns its coordinate.
    pub fn exceptional(&self) -> Option<Coord> {
        let (i, j) = self.x_in_chart();
        if self.terminal {
            return (i > 0).then_some(Coord::X);
        }
        match (i > 0, j > 0) {
            (true, false) => Some(Coord::X),
            (false, true) => Some(Coord::Y),
            _ => None,
        }
    }

    pub fn is_free(&self) -> bool {
        self.exceptional().is_some()
    }
}

/// One blow-up of the maximal ideal along `ν*`, chosen by comparing the
/// coordinate values. In case c the residue is subtracted by the caller's
/// bookkeeping and the new second value is left unknown.
pub fn quadratic_step(chart: &LocalChart) -> Result<(StepCase, LocalChart)> {
    if chart.terminal {
        return Err(Error::domain("step from a chart with unknown second coordinate value"));
    }
    let (vu, vv) = match &chart.values {
        [Some(u), Some(v)] if u.is_positive() && v.is_positive() => (u.clone(), v.clone()),
        _ => return Err(Error::domain("quadratic step needs known positive coordinate values")),
    };
    let mut next = chart.clone();
    let case = if vu < vv {
        next.exps[1] = [chart.exps[1][0] - chart.exps[0][0], chart.exps[1][1] - chart.exps[0][1]];
        next.values[1] = Some(vv - vu);
        StepCase::A
    } else if vu > vv {
        next.exps[0] = [chart.exps[0][0] - chart.exps[1][0], chart.exps[0][1] - chart.exps[1][1]];
        next.values[0] = Some(vu - vv);
        StepCase::B
    } else {
        next.exps[1] = [chart.exps[1][0] - chart.exps[0][0], chart.exps[1][1] - chart.exps[0][1]];
        next.values[1] = None;
        next.terminal = true;
        StepCase::C
    };
    Ok((case, next))
}

/// The `ε(p, q)` quadratic transforms from a free chart with
/// `ν(y)/ν(x) = p/q`, checked against the transformation lemma.
#[derive(Debug, Clone)]
pub struct Composite {
    pub p: u64,
    pub q: u64,
    pub a: u64,
    pub b: u64,
    pub f1: u64,
    pub epsilon: u64,
    pub residue: Rational,
    /// Charts `S_1..S_k`; `S_0` is the starting chart.
    pub steps: Vec<(StepCase, LocalChart)>,
}

impl Composite {
    pub fn nonfree_count(&self) -> usize {
        self.steps.iter().filter(|(_, ch)| !ch.is_free()).count()
    }
}

/// Runs the composite step for `(p, q)` from values `(vx, vx·p/q)` with
/// case-c residue `c`, and verifies: the free/non-free pattern, the final
/// coordinates `(x^a/y^b, y^q/x^p − c)`, the exact identities
/// `x = X^q(Y+c)^b`, `y = X^p(Y+c)^a`, and `ν(X) = ν(x)/q`.
pub fn composite_transform(p: u64, q: u64, c: &Rational, vx: &Rational) -> Result<Composite> {
    let e = euclid_data(p, q)?;
    if c.is_zero() {
        return Err(Error::domain("case-c residue must be nonzero"));
    }
    let vy = vx * Rational::new(p.into(), q.into());
    let mut chart = LocalChart::start(vx.clone(), vy);
    let mut steps = Vec::with_capacity(e.epsilon as usize);
    while !chart.terminal {
        let (case, next) = quadratic_step(&chart)?;
        steps.push((case, next.clone()));
        chart = next;
        if steps.len() as u64 > e.epsilon {
            break;
        }
    }
    let id = "transformation lemma";
    if steps.len() as u64 != e.epsilon {
        return Err(Error::verification(
            id,
            format!("({p}, {q}): {} steps, expected ε = {}", steps.len(), e.epsilon),
        ));
    }
    let (a, b) = (e.a as i64, e.b as i64);
    let (p_i, q_i) = (p as i64, q as i64);
    if chart.exps != [[a, -b], [-p_i, q_i]] {
        return Err(Error::verification(
            id,
            format!("final coordinates {:?}, expected x^{a}/y^{b}, y^{q}/x^{p}", chart.exps),
        ));
    }
    // Exact Laurent identities, with Z = Y + c as the second chart variable.
    let x_img = (q_i, b);
    let y_img = (p_i, a);
    let big_x = Poly::monomial(Rational::one(), a, -b).substitute_monomials(x_img, y_img);
    let z = Poly::monomial(Rational::one(), -p_i, q_i).substitute_monomials(x_img, y_img);
    let x_back = Poly::monomial(Rational::one(), q_i, b).substitute_monomials((a, -b), (-p_i, q_i));
    let y_back = Poly::monomial(Rational::one(), p_i, a).substitute_monomials((a, -b), (-p_i, q_i));
    if big_x != Poly::x() || z != Poly::y() || x_back != Poly::x() || y_back != Poly::y() {
        return Err(Error::verification(id, "chart identities x = X^q(Y+c)^b, y = X^p(Y+c)^a"));
    }
    let expected_vx = vx / Rational::from_integer(q.into());
    if chart.values[0].as_ref() != Some(&expected_vx) {
        return Err(Error::verification(id, "ν(X) ≠ ν(x)/q"));
    }
    let f1 = e.f[0];
    for (s, (_, ch)) in steps.iter().enumerate() {
        let depth = s as u64 + 1;
        let expect_free = depth <= f1 || depth == e.epsilon;
        if ch.is_free() != expect_free {
            return Err(Error::verification(
                id,
                format!("({p}, {q}): chart S_{depth} free = {}, expected {expect_free}", ch.is_free()),
            ));
        }
    }
    Ok(Composite {
        p,
        q,
        a: e.a,
        b: e.b,
        f1,
        epsilon: e.epsilon,
        residue: c.clone(),
        steps,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Chart {
    pub depth: usize,
    pub case: Option<StepCase>,
    #[serde(serialize_with = "ser_values")]
    pub values: [Option<Rational>; 2],
    pub free: bool,
    #[serde(skip)]
    pub exceptional: Option<Coord>,
}

fn ser_values<S: serde::Serializer>(v: &[Option<Rational>; 2], s: S) -> std::result::Result<S::Ok, S::Error> {
    let out: Vec<Option<String>> = v.iter().map(|x| x.as_ref().map(fmt_rat)).collect();
    out.serialize(s)
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub i: usize,
    pub k: usize,
    /// Index into `TransformTrace::charts`.
    pub chart: usize,
    /// Pullbacks of `T_0..T_{i+1}` in `(x_i, y_i)`.
    pub images: Vec<MonoSeries>,
    /// `(x_{i-1}, y_{i-1})` in `(x_i, y_i)`.
    pub local_map: Option<(MonoSeries, MonoSeries)>,
    /// `c_i`: residue of `T_i^{q_i}/Π T_j^{n_{i,j}}` in this chart. Verified
    /// equal to `λ_i` before the checkpoint is recorded.
    pub c: Option<Rational>,
    /// Residue of `y_{i-1}^{q_i}/x_{i-1}^{p_i}`, the constant of the composite
    /// step; `λ_i` divided by the residue of the unit the previous chart
    /// leaves on that quotient.
    pub chart_constant: Option<Rational>,
    /// The composite step's second coordinate `y_{i-1}^{q_i}/x_{i-1}^{p_i} − c`
    /// as a series in `(x_i, y_i)`.
    pub natural_y: Option<Series>,
    pub verified: bool,
}

impl Checkpoint {
    pub fn map_to_base(&self) -> Result<SubstitutionMap> {
        SubstitutionMap::new(self.images[0].clone(), self.images[1].clone())
    }
}

#[derive(Debug, Clone)]
pub struct TransformTrace {
    pub seq: JumpingSequence,
    pub charts: Vec<Chart>,
    pub checkpoints: Vec<Checkpoint>,
    pub composites: Vec<Composite>,
    pub precision: u32,
}

impl TransformTrace {
    pub fn spec(&self) -> &ValuationSpec {
        &self.seq.spec
    }

    pub fn level(&self) -> usize {
        self.checkpoints.len() - 1
    }

    pub fn k(&self, i: usize) -> usize {
        self.checkpoints[i].k
    }
}

fn chart_values(seq: &JumpingSequence, i: usize) -> [Option<Rational>; 2] {
    let mu = &seq.spec.mu;
    let qi = Rational::from_integer(seq.q_prod[i].clone());
    let vx = mu / &qi;
    let vy = (i < seq.spec.len()).then(|| {
        let (p, q) = seq.spec.pairs[i];
        &vx * Rational::new(p.into(), q.into())
    });
    [Some(vx), vy]
}

/// Chains the composite steps for `(p_1, q_1), …, (p_level, q_level)`.
pub fn run_to_level(spec: &ValuationSpec, level: usize, precision: u32) -> Result<TransformTrace> {
    if precision < 2 {
        return Err(Error::domain("precision must be at least 2"));
    }
    let seq = build_sequence(spec, level)?;
    let base = Checkpoint {
        i: 0,
        k: 0,
        chart: 0,
        images: vec![
            MonoSeries::new((1, 0), Series::one(precision)),
            MonoSeries::new((0, 1), Series::one(precision)),
        ],
        local_map: None,
        c: None,
        chart_constant: None,
        natural_y: None,
        verified: true,
    };
    let mut trace = TransformTrace {
        charts: vec![Chart {
            depth: 0,
            case: None,
            values: chart_values(&seq, 0),
            free: true,
            exceptional: Some(Coord::X),
        }],
        checkpoints: vec![base],
        composites: Vec::new(),
        precision,
        seq,
    };
    for m in 1..=level {
        advance(&mut trace, m)?;
    }
    Ok(trace)
}

/// Checkpoint `m − 1` to checkpoint `m`.
fn advance(trace: &mut TransformTrace, m: usize) -> Result<()> {
    let seq = &trace.seq;
    let prev = trace.checkpoints.last().expect("base checkpoint");
    let (p, q) = seq.spec.pairs[m - 1];
    let lambda = seq.spec.lambda(m).clone();
    let row = &seq.n_rows[m - 1];

    // T_m^{q_m} / Π T_j^{n_{m,j}} = x^{-p} y^{q} · S in the previous chart.
    let mut r = prev.images[m].pow(q as u32);
    for (j, &n) in row.iter().enumerate() {
        if n > 0 {
            r = r.mul(&prev.images[j].powi(-(n as i64))?);
        }
    }
    if r.mono != (-(p as i64), q as i64) || !r.series.is_unit() {
        return Err(Error::verification(
            "strict transform quotient",
            format!("level {m}: T^q/ΠT^n pulls back to {}, expected X^-{p}·Y^{q}·unit", r.describe()),
        ));
    }
    // S = coef·s with s(0) = 1.
    let c = &lambda / r.constant_term();

    let vx = chart_values(seq, m - 1)[0].clone().expect("known");
    let comp = composite_transform(p, q, &c, &vx)?;

    // Natural chart (X, Y): x_prev = X^q (Y + c)^b, y_prev = X^p (Y + c)^a.
    let prec = trace.precision;
    let yc = Series::from_terms([(0, 0, c.clone()), (0, 1, Rational::one())], prec);
    let natural = SubstitutionMap::new(
        MonoSeries::new((q as i64, 0), yc.pow(comp.b as u32)),
        MonoSeries::new((p as i64, 0), yc.pow(comp.a as u32)),
    )?;
    let s_nat = natural.apply_series(&MonoSeries::with_coef((0, 0), r.coef.clone(), r.series))?;
    let r_nat = s_nat.mul(&MonoSeries::new((0, 0), yc));
    let residue = r_nat.constant_term();
    if residue != lambda {
        return Err(Error::ResidueMismatch {
            level: m,
            expected: Box::new(lambda),
            computed: Box::new(residue),
        });
    }
    // y_m = R − λ_m must be a regular parameter together with X.
    let strict = r_nat.full_series().sub(&Series::constant(lambda.clone(), prec));
    if strict.coeff(0, 1).is_zero() {
        return Err(Error::verification(
            "strict transform is a parameter",
            format!("level {m}: y_{m} has no linear Y term"),
        ));
    }
    let natural_y = strict.invert_in_y()?;
    let unit = natural_y.add(&Series::constant(c.clone(), prec));
    let local = SubstitutionMap::new(
        MonoSeries::new((q as i64, 0), unit.pow(comp.b as u32)),
        MonoSeries::new((p as i64, 0), unit.pow(comp.a as u32)),
    )?;
    let mut images = Vec::with_capacity(m + 2);
    for img in &prev.images {
        images.push(local.apply_series(img)?);
    }
    let mut next = MonoSeries::new((0, 1), Series::one(prec));
    for (j, &n) in row.iter().enumerate() {
        if n > 0 {
            next = next.mul(&images[j].pow(n as u32));
        }
    }
    images.push(next);

    let k_prev = prev.k;
    let base_depth = k_prev;
    for (s, (case, ch)) in comp.steps.iter().enumerate() {
        let depth = base_depth + s + 1;
        let last = s + 1 == comp.steps.len();
        let values = if last {
            chart_values(seq, m)
        } else {
            [ch.values[0].clone(), ch.values[1].clone()]
        };
        trace.charts.push(Chart {
            depth,
            case: Some(*case),
            values,
            free: ch.is_free(),
            exceptional: ch.exceptional(),
        });
    }
    let checkpoint = Checkpoint {
        i: m,
        k: k_prev + comp.epsilon as usize,
        chart: trace.charts.len() - 1,
        images,
        local_map: Some((local.x_image.clone(), local.y_image.clone())),
        c: Some(residue),
        chart_constant: Some(c),
        natural_y: Some(natural_y),
        verified: false,
    };
    trace.checkpoints.push(checkpoint);
    trace.composites.push(comp);
    let verified = verify_monomial_factorization(trace, m).is_ok();
    trace.checkpoints[m].verified = verified;
    if !verified {
        verify_monomial_factorization(trace, m)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    pub i: usize,
    /// `x_i`-order of `T_j` for `j ≤ i`; each equals `Q_i·β_j`.
    pub orders: Vec<i64>,
    pub precision: u32,
}

/// `T_j = x_i^{Q_i β_j}·unit` for `j ≤ i`, and `y_i` is the strict transform
/// of `T_{i+1}`: `T_i^{q_i} − λ_i ΠT_j^{n_{i,j}} = y_i·ΠT_j^{n_{i,j}}` below
/// precision.
pub fn verify_monomial_factorization(trace: &TransformTrace, i: usize) -> Result<FactorizationReport> {
    let id = "monomial factorization";
    let seq = &trace.seq;
    let cp = &trace.checkpoints[i];
    let qi = &seq.q_prod[i];
    let mut orders = Vec::with_capacity(i + 1);
    for j in 0..=i {
        let fac = factor_exceptional(&cp.images[j], Coord::X)?;
        let expected = (&seq.beta[j] * Rational::from_integer(qi.clone())).to_integer();
        if !fac.is_unit || BigInt::from(fac.order) != expected {
            return Err(Error::verification(
                id,
                format!(
                    "T_{j} at checkpoint {i}: {} (expected X^{expected}·unit)",
                    cp.images[j].describe()
                ),
            ));
        }
        orders.push(fac.order);
    }
    if i >= 1 && i <= seq.level() {
        let lambda = seq.spec.lambda(i);
        let mut tail = MonoSeries::constant(Rational::one(), trace.precision);
        for (j, &n) in seq.n_rows[i - 1].iter().enumerate() {
            tail = tail.mul(&cp.images[j].pow(n as u32));
        }
        let recursion = cp.images[i]
            .pow(seq.spec.q(i) as u32)
            .sub(&tail.scale(lambda));
        let diff = recursion.sub(&cp.images[i + 1]);
        if !diff.series.is_zero_below_prec() {
            return Err(Error::verification(
                id,
                format!("y_{i} is not the strict transform of T_{}", i + 1),
            ));
        }
    }
    Ok(FactorizationReport {
        i,
        orders,
        precision: trace.precision,
    })
}

/// Pulls `f` back to checkpoint `i` directly from its expression in `x, y`.
pub fn pullback(f: &Poly, trace: &TransformTrace, i: usize) -> Result<MonoSeries> {
    trace.checkpoints[i].map_to_base()?.apply(f)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleValue {
    pub value: Rational,
    pub certified: bool,
}

/// `ν*(f)` from the `x_i`-order of the pullback when the cofactor is a unit
/// and the truncated tail lies above it; otherwise a lower bound from the
/// monomial prefix.
pub fn pullback_value_oracle(f: &Poly, trace: &TransformTrace, i: usize) -> Result<OracleValue> {
    if f.is_zero() {
        return Err(Error::domain("value of zero"));
    }
    let g = pullback(f, trace, i)?;
    let scale = &trace.seq.spec.mu / Rational::from_integer(trace.seq.q_prod[i].clone());
    let fac = match factor_exceptional(&g, Coord::X) {
        Ok(fac) => fac,
        // Everything known cancelled; the prefix monomial still bounds below.
        Err(Error::PrecisionExhausted(_)) => {
            return Ok(OracleValue {
                value: Rational::from_integer(g.mono.0.into()) * scale,
                certified: false,
            })
        }
        Err(e) => return Err(e),
    };
    let below_tail = tail_bound(trace, i, &g).clears(&(Rational::from_integer(fac.order.into()) * &scale / &trace.seq.spec.mu));
    if fac.is_unit && below_tail {
        Ok(OracleValue {
            value: Rational::from_integer(fac.order.into()) * scale,
            certified: true,
        })
    } else {
        Ok(OracleValue {
            value: Rational::from_integer(g.mono.0.into()) * scale,
            certified: false,
        })
    }
}

/// Lower bound for `ν*` of the terms a truncated series does not know,
/// internal scale: `ν(X^a Y^b) + prec·min(ν(x_m), ν(y_m))`. When `ν(y_m)` is
/// not determined by the spec only the strict bound `> ν(X^a Y^b)` remains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailBound {
    pub value: Rational,
    /// The tail lies strictly above `value`.
    pub open: bool,
}

impl TailBound {
    pub fn min(self, other: TailBound) -> TailBound {
        match self.value.cmp(&other.value) {
            std::cmp::Ordering::Less => self,
            std::cmp::Ordering::Greater => other,
            std::cmp::Ordering::Equal => TailBound {
                open: self.open && other.open,
                value: self.value,
            },
        }
    }

    /// Everything truncated has value strictly above `v`.
    pub fn clears(&self, v: &Rational) -> bool {
        *v < self.value || (*v == self.value && self.open)
    }
}

pub fn tail_bound(trace: &TransformTrace, m: usize, g: &MonoSeries) -> TailBound {
    let qm = Rational::from_integer(trace.seq.q_prod[m].clone());
    let vx = qm.recip();
    let spec = trace.spec();
    let vy = (m < spec.len()).then(|| {
        let (p, q) = spec.pairs[m];
        &vx * Rational::new(p.into(), q.into())
    });
    let mono_x = &vx * Rational::from_integer(g.mono.0.into());
    match vy {
        Some(vy) => {
            let least = if vy < vx { vy.clone() } else { vx.clone() };
            TailBound {
                value: mono_x
                    + vy * Rational::from_integer(g.mono.1.into())
                    + least * Rational::from_integer(g.prec().into()),
                open: false,
            }
        }
        // ν(y_m) > 0 is all that is known; a Y-power in the monomial gives nothing more.
        None => TailBound {
            value: mono_x,
            open: g.mono.1 == 0 && g.prec() > 0,
        },
    }
}

/// A series that has become `X^order · unit` at some checkpoint, with the
/// truncation tail certified to lie strictly above its value.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub checkpoint: usize,
    pub order: i64,
    /// `X^order · unit` in the checkpoint's coordinates.
    pub form: MonoSeries,
    pub bound: TailBound,
}

impl Resolved {
    /// `ν*` in the internal scale of the trace (`ν*(T_0) = 1`).
    pub fn value(&self, trace: &TransformTrace) -> Rational {
        Rational::new(self.order.into(), trace.seq.q_prod[self.checkpoint].clone())
    }

    /// Leading constant; the residue of a value-zero function.
    pub fn lead(&self) -> Rational {
        self.form.constant_term()
    }
}

/// Rewrites a series in `(x_m, y_m)` in the coordinates of checkpoint `m + 1`
/// (not normalised).
pub fn push_forward(trace: &TransformTrace, g: &MonoSeries, m: usize) -> Result<MonoSeries> {
    let cp = trace
        .checkpoints
        .get(m + 1)
        .ok_or(Error::LevelBoundExceeded(trace.level()))?;
    let (xi, yi) = cp.local_map.clone().expect("non-base checkpoint has a local map");
    SubstitutionMap::new(xi, yi)?.apply_series(g)
}

fn certify(trace: &TransformTrace, m: usize, form: MonoSeries, bound: TailBound) -> Result<Resolved> {
    let r = Resolved {
        checkpoint: m,
        order: form.mono.0,
        form,
        bound,
    };
    if !r.bound.clears(&r.value(trace)) {
        return Err(Error::precision(format!(
            "value {} at checkpoint {m} is not below the truncation bound {}",
            fmt_rat(&r.value(trace)),
            fmt_rat(&r.bound.value)
        )));
    }
    Ok(r)
}

/// Pushes `g` (given at checkpoint `m`) forward until it is a power of the
/// exceptional parameter times a unit.
pub fn resolve(trace: &TransformTrace, g: &MonoSeries, m: usize) -> Result<Resolved> {
    let mut m = m;
    let mut bound = tail_bound(trace, m, g);
    let mut cur = g.normalize()?;
    loop {
        if cur.mono.1 == 0 && cur.series.is_unit() {
            return certify(trace, m, cur, bound);
        }
        if m >= trace.level() {
            return Err(Error::LevelBoundExceeded(trace.level()));
        }
        let next = push_forward(trace, &cur, m)?;
        m += 1;
        bound = bound.min(tail_bound(trace, m, &next));
        cur = next.normalize()?;
    }
}

/// The same resolved form at a later checkpoint.
pub fn resolve_at(trace: &TransformTrace, r: &Resolved, m: usize) -> Result<Resolved> {
    let mut out = r.clone();
    while out.checkpoint < m {
        let next = push_forward(trace, &out.form, out.checkpoint)?;
        let bound = out.bound.clone().min(tail_bound(trace, out.checkpoint + 1, &next));
        let form = next.normalize()?;
        if form.mono.1 != 0 || !form.series.is_unit() {
            return Err(Error::verification(
                "unit stays a unit",
                format!("resolved form lost its unit shape at checkpoint {}", out.checkpoint + 1),
            ));
        }
        out = certify(trace, out.checkpoint + 1, form, bound)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FreePattern {
    /// `s'_1, s'_2, …` as far as the trace determines them.
    pub s_prime: Vec<usize>,
    /// `s̄_0, s̄_1, …` as far as the trace determines them.
    pub s_bar: Vec<usize>,
    /// Agreement with `s̄_l = k_{i_l − 1} + [p_{i_l}/q_{i_l}]`, `s'_{l+1} = k_{i_l}`.
    pub closed_form_ok: bool,
}

pub fn free_pattern(trace: &TransformTrace) -> FreePattern {
    let free: Vec<bool> = trace.charts.iter().map(|c| c.free).collect();
    let n = free.len();
    let mut s_prime = vec![0];
    let mut s_bar = vec![0];
    loop {
        let start = *s_prime.last().expect("nonempty");
        let mut s = start;
        while s + 1 < n && free[s + 1] {
            s += 1;
        }
        if s + 1 >= n {
            break;
        }
        s_bar.push(s);
        match (s + 1..n).find(|&t| free[t]) {
            Some(t) => s_prime.push(t),
            None => break,
        }
    }
    let spec = trace.spec();
    let ks: Vec<usize> = trace.checkpoints.iter().map(|c| c.k).collect();
    let independent: Vec<usize> = (1..=trace.level()).filter(|&i| spec.q(i) > 1).collect();
    let mut ok = true;
    for (l0, &il) in independent.iter().enumerate() {
        let l = l0 + 1;
        let (p, q) = spec.pairs[il - 1];
        if let Some(&sb) = s_bar.get(l) {
            ok &= sb == ks[il - 1] + (p / q) as usize;
        }
        if let Some(&sp) = s_prime.get(l) {
            ok &= sp == ks[il];
        }
    }
    if s_bar.len() - 1 > independent.len() {
        ok = false;
    }
    FreePattern {
        s_prime,
        s_bar,
        closed_form_ok: ok,
    }
}

#[derive(Serialize)]
struct CheckpointRecord {
    i: usize,
    k_i: usize,
    verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<String>,
}

#[derive(Serialize)]
pub struct TraceRecord {
    charts: Vec<Chart>,
    checkpoints: Vec<CheckpointRecord>,
    free_pattern: FreePattern,
    precision: u32,
}

impl TransformTrace {
    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            charts: self.charts.clone(),
            checkpoints: self
                .checkpoints
                .iter()
                .map(|c| CheckpointRecord {
                    i: c.i,
                    k_i: c.k,
                    verified: c.verified,
                    c: c.c.as_ref().map(fmt_rat),
                })
                .collect(),
            free_pattern: free_pattern(self),
            precision: self.precision,
        }
    }
}
