//! Descent of the exponent `t` of a monomial extension `u = x^t·δ, v = y`.
//!
//! Valuation data always lives in the étale coordinates `(x̃, y)` with
//! `x̃ = x·δ^{1/t}`, where the relation reads `u = x̃^t` exactly. Charts of the
//! étale ring come from the transform engine, and values of series written
//! in a chart come from [`resolve`], which pushes them down the chain until
//! they are a power of the exceptional parameter times a unit.

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};

use crate::arith::{euclid_data, fmt_rat, gcd_u64, group_gcd, zgcd, Rational};
use crate::error::{Error, Result};
use crate::jumping::{build_sequence, independent_subsequence, verify_spivakovsky, JumpingSequence, ValuationSpec};
use crate::poly::Poly;
use crate::series::{unit_root, MonoSeries, Series, SubstitutionMap};
use crate::transform::{composite_transform, resolve, resolve_at, run_to_level, Resolved, TransformTrace};

/// `R ⊂ S` in the normal form `u = x^t·δ`, `v = y`.
#[derive(Debug, Clone)]
pub struct ExtensionState {
    pub t: u64,
    /// `δ` in the current chart of `S`, constant term 1.
    pub delta: Series,
    /// Constant absorbed into `u` by the latest normalisation of `δ`.
    pub kappa: Rational,
    /// `ν*` through jumping data in the étale coordinates `(x·δ^{1/t}, y)`.
    pub spec: ValuationSpec,
    /// Quadratic transforms performed so far on the `S` and `R` sides.
    pub s_steps: u64,
    pub r_steps: u64,
    pub precision: u32,
}

impl ExtensionState {
    /// Normalises `δ` to constant term 1 (the constant goes into `u`).
    pub fn new(t: u64, delta: &Series, spec: ValuationSpec, precision: u32) -> Result<Self> {
        if t == 0 {
            return Err(Error::domain("t must be positive"));
        }
        if !delta.is_unit() {
            return Err(Error::domain("δ must be a unit"));
        }
        spec.validate()?;
        let kappa = delta.constant_term();
        let state = ExtensionState {
            t,
            delta: delta.truncate(precision).scale(&kappa.recip()),
            kappa,
            spec,
            s_steps: 0,
            r_steps: 0,
            precision,
        };
        state.verify_relation()?;
        Ok(state)
    }

    /// `x̃ = x·δ^{1/t}` satisfies `x̃^t = x^t·δ` below precision, so `u = x̃^t`.
    pub fn verify_relation(&self) -> Result<Series> {
        let root = unit_root(&self.delta, self.t)?;
        if !root.pow(self.t as u32).agrees_with(&self.delta) {
            return Err(Error::verification(
                "u = x^t·δ",
                format!("δ^(1/{}) does not return δ below precision", self.t),
            ));
        }
        Ok(root)
    }
}

/// First `i ≤ bound` with `t ∤ p_i`.
pub fn find_m(spec: &ValuationSpec, t: u64, bound: usize) -> Option<usize> {
    (1..=bound.min(spec.len())).find(|&i| !spec.p(i).is_multiple_of(t))
}

/// Every `x`-exponent of `T_2..T_{k+1}` is a multiple of `d_k`.
pub fn check_xpowers(seq: &JumpingSequence, k: usize) -> bool {
    if k == 0 || k > seq.level() {
        return k == 0;
    }
    let d = seq.d[k - 1] as i64;
    seq.t[2..=k + 1].iter().all(|t| t.x_exponents().all(|e| e % d == 0))
}

/// `(p_i/t, q_i, λ_i)` for `i ≤ k`; `ν(u) = t·ν*(x̃)`.
pub fn r_spec(spec: &ValuationSpec, t: u64, k: usize) -> Result<ValuationSpec> {
    if let Some(m) = find_m(spec, t, k) {
        return Err(Error::ObstructionPresent(m));
    }
    ValuationSpec::with_mu(
        &spec.mu * Rational::from_integer(t.into()),
        spec.pairs[..k].iter().map(|&(p, q)| (p / t, q)).collect(),
        spec.lambdas[..k].to_vec(),
    )
}

#[derive(Debug, Clone)]
pub struct Transfer {
    pub t: u64,
    pub k: usize,
    pub r_spec: ValuationSpec,
    /// Jumping polynomials of `R` in `(u, v)`.
    pub r_seq: JumpingSequence,
}

/// `{u, T_1, …, T_{k+1}}` as the jumping sequence of `R`, checked term by
/// term against the sequence of the étale ring under `u = x̃^t`.
pub fn transfer_sequence(spec: &ValuationSpec, t: u64, k: usize) -> Result<Transfer> {
    let id = "transfer: T'_i = T_i";
    let rs = r_spec(spec, t, k)?;
    let r_seq = build_sequence(&rs, k)?;
    let s_seq = build_sequence(spec, k)?;
    let ti = t as i64;
    for i in 0..=k + 1 {
        let pulled = r_seq.t[i].substitute_monomials((ti, 0), (0, 1));
        let expect = if i == 0 { Poly::monomial(Rational::one(), ti, 0) } else { s_seq.t[i].clone() };
        if pulled != expect {
            return Err(Error::verification(id, format!("T'_{i} differs from T_{i} under u = x^{t}")));
        }
    }
    for (i, (rr, sr)) in r_seq.n_rows.iter().zip(&s_seq.n_rows).enumerate() {
        if rr[0] * t != sr[0] || rr[1..] != sr[1..] {
            return Err(Error::verification(id, format!("exponent row {} is not (n_0/t, n_1, …)", i + 1)));
        }
    }
    let tr = Rational::from_integer(t.into());
    for i in 1..r_seq.beta.len() {
        if &r_seq.beta[i] * &tr != s_seq.beta[i] {
            return Err(Error::verification(id, format!("ν(T'_{i}) is not β_{i}")));
        }
    }
    Ok(Transfer {
        t,
        k,
        r_spec: rs,
        r_seq,
    })
}

/// The two charts and relations of one exponent-descent step.
#[derive(Debug, Clone)]
pub struct ChunkStep {
    pub t: u64,
    pub p: u64,
    pub q: u64,
    /// `g = gcd(t, p)`, the new exponent.
    pub g: u64,
    pub p_bar: u64,
    pub q_bar: u64,
    pub s_steps: u64,
    pub r_steps: u64,
    pub c: Rational,
    /// `c̄ = c^{t/g}`.
    pub c_bar: Rational,
    /// `Δ = δ^ā·(Y' + c)^{btā − ab̄}`.
    pub delta_exponent: i64,
    /// `Δ` in the natural chart `(X, Y')`.
    pub big_delta: Series,
    /// `V = v^q̄/u^p̄ − c̄` in `(X, Y')`.
    pub v: Series,
    /// `Y'` as a series in `(X, V)`.
    pub y_of_v: Series,
    /// `Δ(0, 0)`, absorbed into `U`.
    pub kappa: Rational,
    /// `Δ/κ` in `(X, V)`.
    pub new_delta: Series,
    /// `U·v^b̄ = u^ā` as a Laurent identity, checked when `δ = 1`.
    pub exact: Option<bool>,
}

/// Transforms `S` along `ν*(y)/ν*(x) = p/q` and `R` along `p̄/q̄`, then checks
/// `U = X^g·Δ` with `Δ` a unit and that `V` is a regular parameter with `X`.
/// `c` is the residue of `y^q/x^p`; `δ` must have constant term 1.
pub fn chunk_step(t: u64, delta: &Series, p: u64, q: u64, c: &Rational, precision: u32) -> Result<ChunkStep> {
    let id = "chunk: U = X^g·Δ, V = Y";
    if t == 0 {
        return Err(Error::domain("t must be positive"));
    }
    if delta.constant_term() != Rational::one() {
        return Err(Error::domain("δ must have constant term 1"));
    }
    if c.is_zero() {
        return Err(Error::domain("residue c must be nonzero"));
    }
    let prec = precision.min(delta.prec());
    let g = gcd_u64(t, p);
    let tp = t / g;
    let (p_bar, q_bar) = (p / g, q * tp);
    let c_bar = num_traits::pow::Pow::pow(c, tp as u32);
    let s_comp = composite_transform(p, q, c, &Rational::one())?;
    let r_comp = composite_transform(p_bar, q_bar, &c_bar, &Rational::from_integer(t.into()))?;
    let (a, b) = (s_comp.a as i64, s_comp.b as i64);
    let (ab, bb) = (r_comp.a as i64, r_comp.b as i64);
    let (ti, pi, qi) = (t as i64, p as i64, q as i64);
    let (pb, qb) = (p_bar as i64, q_bar as i64);
    let e = b * ti * ab - a * bb;

    let yc = Series::from_terms([(0, 0, c.clone()), (0, 1, Rational::one())], prec);
    let ycm = MonoSeries::new((0, 0), yc.clone());
    let phi = SubstitutionMap::new(ycm.pow(b as u32).mul(&mono(qi, 0, prec)), ycm.pow(a as u32).mul(&mono(pi, 0, prec)))?;
    let delta_pb = phi.apply_series(&MonoSeries::new((0, 0), delta.truncate(prec)))?;
    let u_img = phi.x_image.pow(t as u32).mul(&delta_pb);
    let v_img = phi.y_image.clone();

    let big_u = u_img.powi(ab)?.mul(&v_img.powi(-bb)?);
    if big_u.mono != (g as i64, 0) || !big_u.series.is_unit() {
        return Err(Error::verification(id, format!("U = u^ā/v^b̄ is {}, expected X^{g}·unit", big_u.describe())));
    }
    let formula = delta_pb.powi(ab)?.mul(&ycm.powi(e)?).mul(&mono(g as i64, 0, prec));
    if !big_u.sub(&formula).is_zero_below_prec() {
        return Err(Error::verification(id, "Δ differs from δ^ā·(Y' + c)^(btā − ab̄)"));
    }

    let v_full = v_img.powi(qb)?.mul(&u_img.powi(-pb)?);
    if v_full.mono != (0, 0) || v_full.constant_term() != c_bar {
        return Err(Error::verification(
            id,
            format!("v^q̄/u^p̄ is {}, expected residue c^{tp}", v_full.describe()),
        ));
    }
    let v = v_full.full_series().sub(&Series::constant(c_bar.clone(), prec));
    // Along X = 0 the unit δ is 1, so V restricts to (Y' + c)^{t'} − c^{t'}.
    let restricted = yc.pow(tp as u32).sub(&Series::constant(c_bar.clone(), prec));
    if (0..v.prec()).any(|j| v.coeff(0, j) != restricted.coeff(0, j)) {
        return Err(Error::verification(id, "V does not restrict to (Y' + c)^t' − c^t' on X = 0"));
    }
    if v.coeff(0, 1).is_zero() {
        return Err(Error::verification(id, "V has no linear Y' term"));
    }

    // Chart of R: u = U^q̄ (V + c̄)^b̄, v = U^p̄ (V + c̄)^ā.
    let u_back = big_u.pow(q_bar as u32).mul(&v_full.pow(bb as u32));
    let v_back = big_u.pow(p_bar as u32).mul(&v_full.pow(ab as u32));
    for (name, back, img) in [("u", &u_back, &u_img), ("v", &v_back, &v_img)] {
        if back.mono != img.mono || !back.sub(img).is_zero_below_prec() {
            return Err(Error::verification(id, format!("{name} is not recovered from the chart of R")));
        }
    }

    let y_of_v = v.invert_in_y()?;
    let big_delta = MonoSeries::with_coef((0, 0), big_u.coef.clone(), big_u.series.clone()).full_series();
    let kappa = big_delta.constant_term();
    let new_delta = big_delta
        .compose(&Series::var_x(big_delta.prec()), &y_of_v)?
        .scale(&kappa.recip());

    let exact = (*delta == Series::one(delta.prec())).then(|| {
        let ycp = Poly::from_terms([(0, 0, c.clone()), (0, 1, Rational::one())]);
        let x = &Poly::monomial(Rational::one(), qi, 0) * &ycp.pow(b as u32);
        let y = &Poly::monomial(Rational::one(), pi, 0) * &ycp.pow(a as u32);
        let lhs = &(&Poly::monomial(Rational::one(), g as i64, 0) * &ycp.pow(e.max(0) as u32)) * &y.pow(bb as u32);
        let rhs = &x.pow((ti * ab) as u32) * &ycp.pow((-e).max(0) as u32);
        lhs == rhs
    });
    if exact == Some(false) {
        return Err(Error::verification(id, "U·v^b̄ = u^ā fails as a Laurent identity"));
    }

    Ok(ChunkStep {
        t,
        p,
        q,
        g,
        p_bar,
        q_bar,
        s_steps: s_comp.epsilon,
        r_steps: r_comp.epsilon,
        c: c.clone(),
        c_bar,
        delta_exponent: e,
        big_delta,
        v,
        y_of_v,
        kappa,
        new_delta,
        exact,
    })
}

fn mono(i: i64, j: i64, prec: u32) -> MonoSeries {
    MonoSeries::new((i, j), Series::one(prec))
}

/// The `R`-chain up to level `m − 1` together with the units `δ_i` of
/// `u_i = x_i^t·δ_i`, each checked against both chains.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub r_trace: TransformTrace,
    /// `δ_0..δ_{m−1}` in the checkpoint coordinates of the étale chain.
    pub deltas: Vec<MonoSeries>,
}

pub fn ladder(s_trace: &TransformTrace, t: u64, m: usize) -> Result<Ladder> {
    let id = "ladder: u_i = x_i^t·δ_i, v_i = y_i";
    let prec = s_trace.precision;
    let spec = s_trace.spec();
    let rs = r_spec(spec, t, m - 1)?;
    let r_trace = run_to_level(&rs, m - 1, prec)?;
    let mut delta = MonoSeries::constant(Rational::one(), prec);
    let mut deltas = vec![delta.clone()];
    for i in 1..m {
        let cp = &s_trace.checkpoints[i];
        let rcp = &r_trace.checkpoints[i];
        let (p, q) = spec.pairs[i - 1];
        let s_e = euclid_data(p, q)?;
        let r_e = euclid_data(p / t, q)?;
        let c = cp.chart_constant.clone().expect("composite constant");
        let expected_rc = &c / num_traits::pow::Pow::pow(&delta.constant_term(), (p / t) as u32);
        if rcp.chart_constant.as_ref() != Some(&expected_rc) {
            return Err(Error::verification(id, format!("residue of R at level {i} is not c_{i}/δ_{}(0)^(p/t)", i - 1)));
        }
        let unit = cp.natural_y.as_ref().expect("natural coordinate").add(&Series::constant(c, prec));
        let (xi, yi) = cp.local_map.clone().expect("local map");
        let phi = SubstitutionMap::new(xi, yi)?;
        let e = s_e.b as i64 * t as i64 * r_e.a as i64 - s_e.a as i64 * r_e.b as i64;
        delta = MonoSeries::new((0, 0), unit)
            .powi(e)?
            .mul(&phi.apply_series(&delta)?.powi(r_e.a as i64)?);
        let psi = SubstitutionMap::new(mono(t as i64, 0, prec).mul(&delta), mono(0, 1, prec))?;
        for (j, name, expect) in [(0, "u", cp.images[0].pow(t as u32)), (1, "v", cp.images[1].clone())] {
            let got = psi.apply_series(&rcp.images[j])?;
            if got.mono != expect.mono || !got.sub(&expect).is_zero_below_prec() {
                return Err(Error::verification(id, format!("checkpoint {i}: the two charts disagree on {name}")));
            }
        }
        deltas.push(delta.clone());
    }
    Ok(Ladder { r_trace, deltas })
}

/// Jumping data recovered for new étale coordinates from the old chain.
#[derive(Debug, Clone)]
pub struct Respec {
    pub spec: ValuationSpec,
    /// Why no further level was determined, when fewer than requested.
    pub limit: Option<String>,
}

/// Builds the jumping data of `ν*` for coordinates `(x0, y0)` given as
/// series at checkpoint `m` of `trace`, where `x0` is an exceptional
/// parameter: values and residues come from [`resolve`]. `mu` is `ν*(x0)`
/// in the reporting scale.
pub fn respec(
    trace: &TransformTrace,
    m: usize,
    x0: &MonoSeries,
    y0: &Series,
    max_levels: usize,
    mu: Rational,
) -> Result<Respec> {
    let id = "recomputed jumping data";
    let rx = resolve(trace, x0, m)?;
    let unit_value = rx.value(trace);
    let mut images = vec![x0.clone(), MonoSeries::new((0, 0), y0.clone())];
    let mut resolved: Vec<Resolved> = vec![rx];
    let mut betas: Vec<Rational> = vec![Rational::one()];
    let mut pairs: Vec<(u64, u64)> = Vec::new();
    let mut lambdas: Vec<Rational> = Vec::new();
    let mut q_prod = Rational::one();
    let mut limit = None;
    let soft = |e: &Error| matches!(e, Error::PrecisionExhausted(_) | Error::LevelBoundExceeded(_));

    for i in 1..=max_levels {
        let r = match resolve(trace, &images[i], m) {
            Ok(r) => r,
            Err(e) if soft(&e) => {
                limit = Some(format!("level {i}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let beta = r.value(trace) / &unit_value;
        let jump = if i == 1 {
            beta.clone()
        } else {
            (&beta - &betas[i - 1] * Rational::from_integer(pairs[i - 2].1.into())) * &q_prod
        };
        if !jump.is_positive() {
            return Err(Error::verification(id, format!("ν(T_{i}) does not exceed q_{}·ν(T_{})", i - 1, i - 1)));
        }
        let (p, q) = match (jump.numer().to_u64(), jump.denom().to_u64()) {
            (Some(p), Some(q)) => (p, q),
            _ => return Err(Error::domain("recomputed pair does not fit in u64")),
        };
        let mut trial_pairs = pairs.clone();
        trial_pairs.push((p, q));
        let mut trial_lambdas = lambdas.clone();
        trial_lambdas.push(Rational::one());
        let trial = ValuationSpec::with_mu(mu.clone(), trial_pairs, trial_lambdas)?;
        let seq = build_sequence(&trial, i)?;
        if seq.beta[i] != beta {
            return Err(Error::verification(id, format!("level {i}: value {} is off the recursion", fmt_rat(&beta))));
        }
        let row = seq.n_rows[i - 1].clone();
        resolved.push(r);

        // λ_i = residue of T_i^{q_i} / Π T_j^{n_{i,j}}, read at a common checkpoint.
        let top = (0..=i)
            .filter(|&j| j == i || row[j] > 0)
            .map(|j| resolved[j].checkpoint)
            .max()
            .expect("nonempty");
        let lifted = (0..=i)
            .map(|j| {
                if j == i || row[j] > 0 {
                    resolve_at(trace, &resolved[j], top).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>();
        let lifted = match lifted {
            Ok(l) => l,
            Err(e) if soft(&e) => {
                limit = Some(format!("residue at level {i}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let top_i = lifted[i].as_ref().expect("lifted");
        let mut num = num_traits::pow::Pow::pow(&top_i.lead(), q as u32);
        let mut order = top_i.order * q as i64;
        for (j, &n) in row.iter().enumerate() {
            if n > 0 {
                let lj = lifted[j].as_ref().expect("lifted");
                num /= num_traits::pow::Pow::pow(&lj.lead(), n as u32);
                order -= lj.order * n as i64;
            }
        }
        if order != 0 {
            return Err(Error::verification(id, format!("level {i}: T_i^q and ΠT_j^n have different values")));
        }
        pairs.push((p, q));
        lambdas.push(num.clone());
        betas.push(beta);
        q_prod *= Rational::from_integer(q.into());

        let prec = images[i].prec();
        let mut tail = MonoSeries::constant(Rational::one(), prec);
        for (j, &n) in row.iter().enumerate() {
            if n > 0 {
                tail = tail.mul(&images[j].pow(n as u32));
            }
        }
        let next = images[i].pow(q as u32).sub(&tail.scale(&num));
        // Kept unnormalised: a power common to the known terms need not divide
        // the truncated tail, and `resolve` bounds the tail before factoring.
        if i < max_levels {
            images.push(next);
        }
    }
    Ok(Respec {
        spec: ValuationSpec::with_mu(mu, pairs, lambdas)?,
        limit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Iteration {
    pub t: u64,
    #[serde(serialize_with = "ser_m")]
    pub m: Option<usize>,
    /// `p_M` of the data the obstruction was found in.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_m: Option<u64>,
    pub g: u64,
    pub s_steps: u64,
    pub r_steps: u64,
    /// Ladder checkpoints verified below level `M`.
    pub ladder: usize,
    /// Levels of jumping data known when `M` was searched.
    pub spec_levels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<String>,
}

fn ser_m<S: Serializer>(m: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => s.serialize_u64(*m as u64),
        None => s.serialize_str("none within bound"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Discrete,
    NondiscreteAtLevel,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToroidalCertificate {
    pub final_t: u64,
    pub verified_to_level: usize,
    pub relation: String,
    /// `γ(0, 0)` in `u = H_0^t·γ`.
    #[serde(serialize_with = "ser_rat")]
    pub gamma_constant: Rational,
    #[serde(serialize_with = "ser_rat")]
    pub value_group_generator: Rational,
    pub classification: Classification,
    pub shape: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub independent_criterion: Option<bool>,
}

fn ser_rat<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rat(r))
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentReport {
    pub iterations: Vec<Iteration>,
    pub final_t: u64,
    pub final_spec: ValuationSpec,
    pub s_steps: u64,
    pub r_steps: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_shape: Option<ToroidalCertificate>,
    pub classification: Classification,
}

/// Repeats ladder and chunk step at the first obstruction until `t` divides
/// every known `p_i`; each round replaces `t` by `gcd(t, p_M) < t`.
pub fn descend(state: &ExtensionState, level_bound: usize, step_bound: usize) -> Result<(DescentReport, ExtensionState)> {
    let mut st = state.clone();
    let mut iterations: Vec<Iteration> = Vec::new();
    let mut limit: Option<String> = None;
    loop {
        let bound = level_bound.min(st.spec.len());
        let Some(m) = find_m(&st.spec, st.t, bound) else {
            transfer_sequence(&st.spec, st.t, bound)?;
            iterations.push(Iteration {
                t: st.t,
                m: None,
                p_m: None,
                g: st.t,
                s_steps: 0,
                r_steps: 0,
                ladder: 0,
                spec_levels: st.spec.len(),
                limit: limit.take(),
            });
            break;
        };
        if iterations.len() >= step_bound {
            return Err(Error::StepBoundExceeded(step_bound));
        }
        let prec = st.precision;
        let s_trace = run_to_level(&st.spec, st.spec.len(), prec)?;
        let lad = ladder(&s_trace, st.t, m)?;
        let dm = &lad.deltas[m - 1];
        let kappa = dm.constant_term();
        let delta_m = dm.full_series().scale(&kappa.recip());
        let cp = &s_trace.checkpoints[m];
        let c = cp.chart_constant.clone().expect("composite constant");
        let (p, q) = st.spec.pairs[m - 1];
        let ch = chunk_step(st.t, &delta_m, p, q, &c, prec)?;
        if ch.g >= st.t {
            return Err(Error::verification("exponent drops", format!("g = {} is not below t = {}", ch.g, st.t)));
        }

        // New étale coordinates X·(Δ/κ)^{1/g} and V, moved to checkpoint m.
        let natural_y = cp.natural_y.as_ref().expect("natural coordinate");
        let to_m = |s: &Series| s.compose(&Series::var_x(s.prec()), natural_y);
        let root = unit_root(&ch.big_delta.scale(&ch.kappa.recip()), ch.g)?;
        let x0 = MonoSeries::new((1, 0), to_m(&root)?);
        let y0 = to_m(&ch.v)?;
        let mu = &st.spec.mu / Rational::from_integer(s_trace.seq.q_prod[m].clone());
        let next = respec(&s_trace, m, &x0, &y0, level_bound, mu)?;

        iterations.push(Iteration {
            t: st.t,
            m: Some(m),
            p_m: Some(p),
            g: ch.g,
            s_steps: s_trace.k(m) as u64,
            r_steps: lad.r_trace.k(m - 1) as u64 + ch.r_steps,
            ladder: m - 1,
            spec_levels: st.spec.len(),
            limit: limit.take(),
        });
        limit = next.limit;
        st = ExtensionState {
            t: ch.g,
            delta: ch.new_delta.clone(),
            kappa: ch.kappa.clone(),
            spec: next.spec,
            s_steps: st.s_steps + s_trace.k(m) as u64,
            r_steps: st.r_steps + lad.r_trace.k(m - 1) as u64 + ch.r_steps,
            precision: prec,
        };
    }
    let report = DescentReport {
        final_t: st.t,
        final_spec: st.spec.clone(),
        s_steps: st.s_steps,
        r_steps: st.r_steps,
        iterations,
        final_shape: None,
        classification: Classification::Undetermined,
    };
    Ok((report, st))
}

/// Final shape: `u = H_0^t·γ` with `γ` a unit and `v = H_1`, `t` dividing
/// every known `p_i`, and the transferred values generating `Γ`.
pub fn verify_toroidal(report: &DescentReport, state: &ExtensionState) -> Result<ToroidalCertificate> {
    let id = "toroidal structure";
    let t = state.t;
    if t != report.final_t {
        return Err(Error::verification(id, "report and state disagree on the final exponent"));
    }
    let tv: Vec<u64> = report.iterations.iter().map(|it| it.t).collect();
    for (w, it) in tv.windows(2).zip(&report.iterations) {
        if w[1] >= w[0] || w[1] != it.g || it.p_m.map(|p| gcd_u64(w[0], p)) != Some(it.g) {
            return Err(Error::verification(id, "t does not strictly decrease through gcd(t, p_M)"));
        }
    }
    let k = state.spec.len().min(report.iterations.last().map(|it| it.spec_levels).unwrap_or(0));
    let transfer = transfer_sequence(&state.spec, t, k)?;

    // H_0 = X·δ^{1/t}: then H_0^t = X^t·δ, and γ = δ/(δ^{1/t})^t is a unit.
    let root = state.verify_relation()?;
    let gamma = state.delta.mul(&root.pow(t as u32).inverse()?);
    if !gamma.is_unit() || !gamma.agrees_with(&Series::one(gamma.prec())) {
        return Err(Error::verification(id, "γ = u/H_0^t is not a unit"));
    }

    // Γ is generated by ν(u) = t and the β_i, i.e. t times the group of R.
    let s_seq = build_sequence(&state.spec, k)?;
    let tr = Rational::from_integer(t.into());
    let mut gen = tr.clone();
    for b in s_seq.beta.iter().skip(1) {
        gen = zgcd(&gen, b)?;
    }
    let r_gen = group_gcd(&transfer.r_seq.groups) * &tr;
    if gen != r_gen {
        return Err(Error::verification(id, format!("ν(u), β_i generate {} but R gives {}", fmt_rat(&gen), fmt_rat(&r_gen))));
    }

    let (classification, shape, criterion) = if k == 0 {
        (Classification::Undetermined, "no jumping data within the bound".to_string(), None)
    } else if state.spec.truncate(k).is_discrete_pattern() {
        if gen != tr {
            return Err(Error::verification(id, "discrete pattern but ν(u) does not generate Γ"));
        }
        (
            Classification::Discrete,
            format!("u = x^{t}·γ, v = y; ν(u) generates Γ"),
            None,
        )
    } else {
        let ind = independent_subsequence(&transfer.r_seq);
        let ok = verify_spivakovsky(&ind).ok;
        if !ok {
            return Err(Error::verification(id, "independent subsequence of R fails the criterion"));
        }
        (
            Classification::NondiscreteAtLevel,
            format!("u = H_0^{t}·γ, v = H_1; H_l independent through level {k}"),
            Some(ok),
        )
    };
    Ok(ToroidalCertificate {
        final_t: t,
        verified_to_level: k,
        relation: format!("u = H_0^{t}·γ, v = H_1 below precision {}", state.precision),
        gamma_constant: gamma.constant_term(),
        value_group_generator: gen * &state.spec.mu,
        classification,
        shape,
        independent_criterion: criterion,
    })
}

/// Scenario input for `monomialize`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub t: u64,
    pub delta: Poly,
    pub spec: ValuationSpec,
    pub level_bound: usize,
    pub step_bound: usize,
    pub precision: u32,
}

/// Smallest precision that exceeds every exponent of the checked identities
/// within the level bound.
pub fn required_precision(t: u64, spec: &ValuationSpec, level_bound: usize) -> u32 {
    let top = spec.pairs[..level_bound.min(spec.len())]
        .iter()
        .flat_map(|&(p, q)| [p, q])
        .chain([t])
        .max()
        .unwrap_or(1);
    top as u32 + 2
}

/// Descent followed by the toroidal check.
pub fn monomialize(sc: &Scenario) -> Result<DescentReport> {
    let need = required_precision(sc.t, &sc.spec, sc.level_bound);
    if sc.precision < need {
        return Err(Error::precision(format!("precision {} is below the required {need}", sc.precision)));
    }
    let delta = Series::from_poly(&sc.delta, sc.precision)?;
    let state = ExtensionState::new(sc.t, &delta, sc.spec.clone(), sc.precision)?;
    let (mut report, fin) = descend(&state, sc.level_bound, sc.step_bound)?;
    let cert = verify_toroidal(&report, &fin)?;
    report.classification = cert.classification;
    report.final_shape = Some(cert);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn spec(pairs: &[(u64, u64)], lambdas: &[i64]) -> ValuationSpec {
        ValuationSpec::new(pairs.to_vec(), lambdas.iter().map(|&l| rat(l, 1)).collect()).unwrap()
    }

    #[test]
    fn transfer_halves_p() {
        let s = spec(&[(4, 3), (2, 5)], &[1, 2]);
        let tr = transfer_sequence(&s, 2, 2).unwrap();
        assert_eq!(tr.r_spec.pairs, vec![(2, 3), (1, 5)]);
        assert!(check_xpowers(&build_sequence(&s, 2).unwrap(), 1));
    }

    #[test]
    fn transfer_refuses_obstruction() {
        let s = spec(&[(4, 3), (3, 2)], &[1, 2]);
        assert_eq!(find_m(&s, 2, 2), Some(2));
        assert!(matches!(transfer_sequence(&s, 2, 2), Err(Error::ObstructionPresent(2))));
    }

    #[test]
    fn chunk_coprime() {
        let ch = chunk_step(2, &Series::one(16), 5, 3, &rat(1, 1), 16).unwrap();
        assert_eq!((ch.g, ch.p_bar, ch.q_bar), (1, 5, 6));
        assert_eq!(ch.exact, Some(true));
        assert!(ch.new_delta.is_unit());
    }

    #[test]
    fn chunk_partial_gcd() {
        let ch = chunk_step(6, &Series::one(16), 4, 3, &rat(2, 1), 16).unwrap();
        assert_eq!((ch.g, ch.p_bar, ch.q_bar), (2, 2, 9));
        assert_eq!(ch.c_bar, rat(8, 1));
    }

    #[test]
    fn respec_identity_reproduces_spec() {
        let s = spec(&[(3, 2), (1, 2), (1, 2)], &[1, 2, 1]);
        let trace = run_to_level(&s, 3, 24).unwrap();
        let x0 = MonoSeries::new((1, 0), Series::one(24));
        let y0 = Series::var_y(24);
        let r = respec(&trace, 0, &x0, &y0, 2, s.mu.clone()).unwrap();
        assert_eq!(r.limit, None);
        assert_eq!(r.spec.pairs, s.pairs[..2]);
        assert_eq!(r.spec.lambdas, s.lambdas[..2]);
    }

    #[test]
    fn descent_coprime_first_level() {
        let s = spec(&[(5, 2), (1, 2)], &[1, 1]);
        let st = ExtensionState::new(2, &Series::one(12), s, 12).unwrap();
        let (rep, fin) = descend(&st, 2, 4).unwrap();
        assert_eq!(rep.iterations[0].m, Some(1));
        assert_eq!(rep.iterations[0].g, 1);
        assert_eq!(fin.t, 1);
        verify_toroidal(&rep, &fin).unwrap();
    }

    #[test]
    fn descent_through_gcd() {
        let s = spec(&[(4, 3), (1, 2)], &[1, 1]);
        let st = ExtensionState::new(6, &Series::one(12), s, 12).unwrap();
        let (rep, fin) = descend(&st, 2, 4).unwrap();
        assert_eq!(rep.iterations[0].g, 2);
        assert_eq!(rep.iterations[1].t, 2);
        assert!(fin.t < 2 || find_m(&fin.spec, fin.t, fin.spec.len()).is_none());
    }

    #[test]
    fn discrete_without_obstruction() {
        let s = spec(&[(4, 1), (2, 1)], &[1, 3]);
        let sc = Scenario {
            t: 2,
            delta: Poly::from_terms([(0, 0, rat(1, 1)), (1, 0, rat(1, 1))]),
            spec: s,
            level_bound: 2,
            step_bound: 4,
            precision: 10,
        };
        let rep = monomialize(&sc).unwrap();
        assert_eq!(rep.final_t, 2);
        assert_eq!(rep.classification, Classification::Discrete);
    }
}
