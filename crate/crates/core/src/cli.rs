//! Scenario ingestion, command dispatch and the seeded scenario generator.
//!
//! Every report is a deterministic function of the scenario: maps are
//! ordered, rationals print as `num/den`, and `verify` merges worker results
//! by scenario index.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::arith::{fmt_rat, gcd_u64, rat, Rational};
use crate::error::{Error, Result};
use crate::jumping::{build_sequence, independent_subsequence, verify_spivakovsky, ValuationSpec};
use crate::monomial::{self, check_xpowers};
use crate::poly::Poly;
use crate::transform::{pullback_value_oracle, run_to_level, verify_monomial_factorization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Genseq,
    Value,
    Transform,
    Monomialize,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub max_level: usize,
    pub precision: u32,
    pub step_bound: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_level: 4,
            precision: 16,
            step_bound: 10,
        }
    }
}

impl Bounds {
    fn validate(&self) -> Result<()> {
        if self.max_level == 0 || self.precision == 0 || self.step_bound == 0 {
            return Err(Error::Parse("bounds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: Kind,
    pub payload: Value,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecPayload {
    spec: ValuationSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ValuePayload {
    spec: ValuationSpec,
    f: Poly,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DescentPayload {
    t: u64,
    delta: Poly,
    spec: ValuationSpec,
    level_bound: Option<usize>,
    step_bound: Option<usize>,
    precision: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyPayload {
    scenarios: Vec<Scenario>,
}

fn parse<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads a scenario, or a bare payload when `kind` is given.
pub fn load(text: &str, kind: Option<Kind>) -> Result<Scenario> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if v.get("kind").is_some() {
        let sc: Scenario = parse(&v)?;
        if let Some(k) = kind {
            if k != sc.kind {
                return Err(Error::Parse(format!("scenario kind {:?} given to command {:?}", sc.kind, k)));
            }
        }
        return Ok(sc);
    }
    let kind = kind.ok_or_else(|| Error::Parse("missing \"kind\"".into()))?;
    Ok(Scenario {
        kind,
        payload: v,
        bounds: Bounds::default(),
        rng_seed: None,
    })
}

/// Runs one scenario and returns its JSON report.
pub fn run(sc: &Scenario) -> Result<Value> {
    sc.bounds.validate()?;
    let b = sc.bounds;
    match sc.kind {
        Kind::Genseq => {
            let p: SpecPayload = parse(&sc.payload)?;
            let k = b.max_level.min(p.spec.len());
            let seq = build_sequence(&p.spec, k)?;
            Ok(json!({
                "level": k,
                "mu": fmt_rat(&p.spec.mu),
                "T": seq.t,
                "beta": (0..seq.beta.len()).map(|i| fmt_rat(&seq.beta_scaled(i))).collect::<Vec<_>>(),
                "Q": seq.q_prod.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
                "n_rows": seq.n_rows,
                "d": seq.d,
            }))
        }
        Kind::Value => {
            let p: ValuePayload = parse(&sc.payload)?;
            let seq = build_sequence(&p.spec, b.max_level.min(p.spec.len()))?;
            let v = seq.value(&p.f, b.max_level)?;
            Ok(json!({ "f": p.f, "value": fmt_rat(&v) }))
        }
        Kind::Transform => {
            let p: SpecPayload = parse(&sc.payload)?;
            let level = b.max_level.min(p.spec.len());
            let trace = run_to_level(&p.spec, level, b.precision)?;
            let factorizations = (1..=level)
                .map(|i| verify_monomial_factorization(&trace, i))
                .collect::<Result<Vec<_>>>()?;
            Ok(json!({
                "level": level,
                "trace": trace.record(),
                "factorizations": factorizations,
            }))
        }
        Kind::Monomialize => {
            let p: DescentPayload = parse(&sc.payload)?;
            let ms = monomial::Scenario {
                t: p.t,
                delta: p.delta,
                spec: p.spec,
                level_bound: p.level_bound.unwrap_or(b.max_level),
                step_bound: p.step_bound.unwrap_or(b.step_bound),
                precision: p.precision.unwrap_or(b.precision),
            };
            let rep = monomial::monomialize(&ms)?;
            serde_json::to_value(rep).map_err(|e| Error::Parse(e.to_string()))
        }
        Kind::Verify => {
            let p: VerifyPayload = parse(&sc.payload)?;
            let results = verify_all(&p.scenarios);
            let failed = results.iter().filter(|r| r["ok"] != json!(true)).count();
            Ok(json!({ "total": results.len(), "failed": failed, "results": results }))
        }
    }
}

/// Runs each scenario and its self-checks in parallel; entries keep input order.
pub fn verify_all(scenarios: &[Scenario]) -> Vec<Value> {
    scenarios
        .par_iter()
        .enumerate()
        .map(|(i, sc)| match check(sc) {
            Ok(checks) => json!({ "index": i, "kind": sc.kind, "ok": true, "checks": checks }),
            Err(e) => json!({ "index": i, "kind": sc.kind, "ok": false, "error": error_json(&e) }),
        })
        .collect()
}

/// Extra identities on top of `run` for one scenario.
fn check(sc: &Scenario) -> Result<Vec<String>> {
    run(sc)?;
    let b = sc.bounds;
    let mut done = vec![format!("{:?} ran", sc.kind).to_lowercase()];
    match sc.kind {
        Kind::Genseq => {
            let p: SpecPayload = parse(&sc.payload)?;
            let k = b.max_level.min(p.spec.len());
            let seq = build_sequence(&p.spec, k)?;
            if k > 0 && !check_xpowers(&seq, k) {
                return Err(Error::VerificationFailed {
                    identity: "x-exponents are multiples of d_k".into(),
                    detail: format!("d_{k} = {}", seq.d[k - 1]),
                });
            }
            let rep = verify_spivakovsky(&independent_subsequence(&seq));
            if !rep.ok {
                return Err(Error::VerificationFailed {
                    identity: "independent subsequence criterion".into(),
                    detail: rep.failures().map(|c| format!("condition {} at l = {}", c.condition, c.l)).collect::<Vec<_>>().join(", "),
                });
            }
            done.push("x-exponents".into());
            done.push("independent criterion".into());
        }
        Kind::Value => {
            let p: ValuePayload = parse(&sc.payload)?;
            let level = b.max_level.min(p.spec.len());
            let seq = build_sequence(&p.spec, level)?;
            let v = seq.value(&p.f, b.max_level)?;
            let trace = run_to_level(&p.spec, level, b.precision)?;
            if let Some(o) = (0..=level)
                .rev()
                .filter_map(|i| pullback_value_oracle(&p.f, &trace, i).ok())
                .find(|o| o.certified)
            {
                if o.value != v {
                    return Err(Error::VerificationFailed {
                        identity: "value = pullback order".into(),
                        detail: format!("{} vs {}", fmt_rat(&v), fmt_rat(&o.value)),
                    });
                }
                done.push("pullback oracle".into());
            }
        }
        Kind::Transform | Kind::Monomialize | Kind::Verify => {}
    }
    Ok(done)
}

pub fn error_json(e: &Error) -> Value {
    json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() })
}

/// Text rendering of a report: `key: value` lines, nested keys dotted.
pub fn render_text(v: &Value) -> String {
    let mut out = String::new();
    flatten(v, "", &mut out);
    out
}

fn flatten(v: &Value, prefix: &str, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(x, &key, out);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(x, &format!("{prefix}[{i}]"), out);
            }
        }
        _ => {
            let _ = writeln!(out, "{prefix}: {v}");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Arithmetic,
    Genseq,
    Transform,
    Descent,
}

/// Caps for generated data.
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    pub max_q: u64,
    pub max_p: u64,
    pub max_levels: usize,
    pub max_t: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_q: 7,
            max_p: 11,
            max_levels: 6,
            max_t: 12,
        }
    }
}

/// Random spec with `levels` pairs inside the caps; `λ_i ∈ ±{1, 2, 3, 1/2}`.
pub fn random_spec<R: Rng>(rng: &mut R, levels: usize, caps: &Caps) -> ValuationSpec {
    let mut pairs = Vec::with_capacity(levels);
    let mut lambdas = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (p, q) = loop {
            let p = rng.gen_range(1..=caps.max_p);
            let q = rng.gen_range(1..=caps.max_q);
            if gcd_u64(p, q) == 1 {
                break (p, q);
            }
        };
        pairs.push((p, q));
        let l = [rat(1, 1), rat(2, 1), rat(3, 1), rat(1, 2)][rng.gen_range(0..4)].clone();
        lambdas.push(if rng.gen_bool(0.5) { l } else { -l });
    }
    ValuationSpec::new(pairs, lambdas).expect("generated pairs are coprime")
}

/// Reproducible scenario for `(seed, profile)` within `caps`.
pub fn generate(seed: u64, profile: Profile, caps: &Caps) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = rng.gen_range(1..=caps.max_levels);
    let (kind, payload, bounds) = match profile {
        Profile::Arithmetic | Profile::Genseq => {
            let spec = random_spec(&mut rng, levels, caps);
            let kind = if profile == Profile::Genseq { Kind::Genseq } else { Kind::Value };
            let payload = if kind == Kind::Value {
                let f = random_poly(&mut rng);
                json!({ "spec": spec, "f": f })
            } else {
                json!({ "spec": spec })
            };
            let b = Bounds {
                max_level: levels,
                ..Bounds::default()
            };
            (kind, payload, b)
        }
        Profile::Transform => {
            let spec = random_spec(&mut rng, levels.min(3), caps);
            (Kind::Transform, json!({ "spec": spec }), Bounds {
                max_level: spec.len(),
                precision: 10,
                step_bound: 10,
            })
        }
        Profile::Descent => {
            let (t, spec) = descent_data(&mut rng, caps);
            let level_bound = spec.len();
            let precision = monomial::required_precision(t, &spec, level_bound).max(12);
            let delta = [
                Poly::one(),
                Poly::from_terms([(0, 0, rat(1, 1)), (1, 0, rat(1, 1))]),
                Poly::from_terms([(0, 0, rat(1, 1)), (0, 1, rat(1, 1))]),
            ][rng.gen_range(0..3)]
            .clone();
            let payload = json!({
                "t": t,
                "delta": delta,
                "spec": spec,
                "level_bound": level_bound,
                "step_bound": 10,
                "precision": precision,
            });
            (Kind::Monomialize, payload, Bounds {
                max_level: level_bound,
                precision,
                step_bound: 10,
            })
        }
    };
    Scenario {
        kind,
        payload,
        bounds,
        rng_seed: Some(seed),
    }
}

/// `t ≥ 2` and a short spec in which some `p_i` is not a multiple of `t`.
fn descent_data<R: Rng>(rng: &mut R, caps: &Caps) -> (u64, ValuationSpec) {
    let small = Caps {
        max_q: caps.max_q.min(5),
        max_p: caps.max_p,
        max_levels: caps.max_levels.min(4),
        max_t: caps.max_t,
    };
    loop {
        let t = rng.gen_range(2..=small.max_t.max(2));
        let levels = rng.gen_range(1..=small.max_levels);
        let spec = random_spec(rng, levels, &small);
        if monomial::find_m(&spec, t, spec.len()).is_some() {
            return (t, spec);
        }
    }
}

fn random_poly<R: Rng>(rng: &mut R) -> Poly {
    let n = rng.gen_range(1..=3);
    let terms: Vec<(i64, i64, Rational)> = (0..n)
        .map(|_| (rng.gen_range(0..=4), rng.gen_range(0..=3), rat(rng.gen_range(1..=3), 1)))
        .collect();
    let f = Poly::from_terms(terms);
    if f.is_zero() {
        Poly::y()
    } else {
        f
    }
}
