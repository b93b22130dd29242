//! Closed-form bounds under monotonicity, their covariate-stratified
//! aggregate, and certification against the exact program.

use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use super::{
    lp_bounds_both, BoundsError, BoundsResult, Convention, Method, Proxies, ProxyTable, Stratum, StratumTerms, Target,
};
use crate::exec::Execution;
use crate::rational::{self, Rational};

/// Candidate upper bounds on `f(y1 | set(X = x0))`.
pub fn upper_terms(p: &ProxyTable) -> [Rational; 4] {
    let q = |i, j, k| p.get(i, j, k);
    [
        q(0, 1, 0) + q(1, 0, 0) + q(1, 1, 0) + q(0, 0, 1),
        q(0, 1, 0) + q(1, 1, 0) + q(1, 0, 1) + q(0, 0, 1),
        q(1, 0, 0) + q(1, 1, 0) + q(0, 1, 1) + q(0, 0, 1),
        q(1, 1, 0) + q(0, 0, 1) + q(1, 0, 1) + q(0, 1, 1),
    ]
}

/// Candidate lower bounds on `f(y1 | set(X = x1))`.
pub fn lower_terms(p: &ProxyTable) -> [Rational; 4] {
    let q = |i, j, k| p.get(i, j, k);
    [
        q(0, 0, 0) - q(0, 0, 1),
        q(1, 1, 1) - q(1, 1, 0),
        q(0, 0, 0) + q(1, 0, 0) - q(0, 0, 1) - q(1, 0, 1),
        q(0, 0, 0) + q(0, 1, 0) - q(0, 0, 1) - q(0, 1, 1),
    ]
}

fn clamp01(v: Rational) -> Rational {
    if v.is_negative() {
        Rational::zero()
    } else if v > Rational::one() {
        Rational::one()
    } else {
        v
    }
}

fn terms(z: &[String], weight: &Rational, values: [Rational; 4], bound: &Rational) -> StratumTerms {
    StratumTerms {
        z: z.to_vec(),
        weight: weight.clone(),
        values: values.to_vec(),
        bound: bound.clone(),
    }
}

/// Four-term minimum (upper bound, `x0` target) and four-term maximum
/// (lower bound, `x1` target), clamped to `[0, 1]`. Cells are read per the
/// table's convention. Returned in `[x0, x1]` order.
pub fn closed_form_bounds(p: &ProxyTable) -> Result<[BoundsResult; 2], BoundsError> {
    p.validate()?;
    Ok(closed_form_in(p, &[], &Rational::one()))
}

fn closed_form_in(p: &ProxyTable, z: &[String], weight: &Rational) -> [BoundsResult; 2] {
    let up = upper_terms(p);
    let upper = clamp01(up.iter().min().expect("four terms").clone());
    let lo = lower_terms(p);
    let lower = clamp01(lo.iter().max().expect("four terms").clone());
    let x0 = BoundsResult {
        target: Target::X0,
        method: Method::ClosedForm,
        convention: p.convention,
        lower: Rational::zero(),
        upper: upper.clone(),
        witnesses: None,
        terms: vec![terms(z, weight, up, &upper)],
    };
    let x1 = BoundsResult {
        target: Target::X1,
        method: Method::ClosedForm,
        convention: p.convention,
        lower: lower.clone(),
        upper: Rational::one(),
        witnesses: None,
        terms: vec![terms(z, weight, lo, &lower)],
    };
    [x0, x1]
}

pub fn stratified_bounds(strata: &[Stratum], monotone: bool) -> Result<[BoundsResult; 2], BoundsError> {
    stratified_bounds_with(strata, monotone, Execution::default())
}

/// `P(z)`-weighted sum of per-stratum bounds: closed forms when `monotone`,
/// the exact unrestricted program otherwise.
pub fn stratified_bounds_with(strata: &[Stratum], monotone: bool, exec: Execution) -> Result<[BoundsResult; 2], BoundsError> {
    let Some(first) = strata.first() else {
        return Err(BoundsError::Format("no strata".into()));
    };
    let convention = first.table.convention;
    if strata.iter().any(|s| s.table.convention != convention) {
        return Err(BoundsError::Format("strata mix conventions".into()));
    }
    if let Some(s) = strata.iter().find(|s| !s.weight.is_positive()) {
        return Err(BoundsError::ZeroMass(format!("stratum {:?} has weight {}", s.z, rational::format_rational(&s.weight))));
    }
    let total: Rational = strata.iter().map(|s| &s.weight).sum();
    if !total.is_one() {
        return Err(BoundsError::Format(format!("stratum weights sum to {}", rational::format_rational(&total))));
    }
    for s in strata {
        s.table.validate()?;
    }

    let per: Vec<Result<[BoundsResult; 2], BoundsError>> = if monotone {
        exec.map(strata, |s| Ok(closed_form_in(&s.table, &s.z, &s.weight)))
    } else {
        exec.map(strata, |s| lp_bounds_both(&s.table, false, Proxies::Both, Execution::Sequential))
    };
    let per = per.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut out: [BoundsResult; 2] = std::array::from_fn(|t| BoundsResult {
        target: Target::BOTH[t],
        method: Method::Stratified,
        convention,
        lower: Rational::zero(),
        upper: Rational::zero(),
        witnesses: None,
        terms: Vec::new(),
    });
    for (s, pair) in strata.iter().zip(per) {
        for (acc, r) in out.iter_mut().zip(pair) {
            acc.lower += &s.weight * &r.lower;
            acc.upper += &s.weight * &r.upper;
            acc.terms.extend(r.terms);
        }
    }
    for r in out.iter_mut() {
        r.lower = clamp01(r.lower.clone());
        r.upper = clamp01(r.upper.clone());
    }
    Ok(out)
}

fn ser_opt_exact<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(r) => rational::serde_exact::serialize(r, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetCertification {
    pub target: Target,
    pub lp: BoundsResult,
    pub closed_form: Option<BoundsResult>,
    /// Closed forms assume monotonicity.
    pub applicable: bool,
    /// Closed-form bound minus the LP bound.
    #[serde(serialize_with = "ser_opt_exact")]
    pub lower_delta: Option<Rational>,
    #[serde(serialize_with = "ser_opt_exact")]
    pub upper_delta: Option<Rational>,
    pub agrees: Option<bool>,
    /// Whether the closed-form interval contains the LP interval.
    pub lp_within_closed_form: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Certification {
    pub monotone: bool,
    /// Always the LP.
    pub authoritative: Method,
    pub targets: Vec<TargetCertification>,
}

impl Certification {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("certification serializes")
    }
}

pub fn certify_against_lp(p: &ProxyTable, monotone: bool) -> Result<Certification, BoundsError> {
    certify_against_lp_with(p, monotone, Execution::default())
}

/// Exact program bounds next to the closed forms on the same conditionals.
pub fn certify_against_lp_with(p: &ProxyTable, monotone: bool, exec: Execution) -> Result<Certification, BoundsError> {
    if p.convention != Convention::Conditional {
        return Err(BoundsError::Format("certification uses conditionals P(t, s | x)".into()));
    }
    let lp = lp_bounds_both(p, monotone, Proxies::Both, exec)?;
    let closed = if monotone { Some(closed_form_bounds(p)?) } else { None };
    let targets = lp
        .into_iter()
        .enumerate()
        .map(|(t, lp)| {
            let cf = closed.as_ref().map(|c| c[t].clone());
            let lower_delta = cf.as_ref().map(|c| &c.lower - &lp.lower);
            let upper_delta = cf.as_ref().map(|c| &c.upper - &lp.upper);
            let agrees = cf.as_ref().map(|c| c.lower == lp.lower && c.upper == lp.upper);
            let within = cf.as_ref().map(|c| c.lower <= lp.lower && lp.upper <= c.upper);
            TargetCertification {
                target: Target::BOTH[t],
                lp,
                closed_form: cf,
                applicable: monotone,
                lower_delta,
                upper_delta,
                agrees,
                lp_within_closed_form: within,
            }
        })
        .collect();
    Ok(Certification {
        monotone,
        authoritative: Method::Lp,
        targets,
    })
}
