//! Sharp bounds on `f(y1 | set(X = x))` when the binary outcome `Y` is never
//! observed and two binary proxies `T` and `S` are its children.
//!
//! A unit is described by three response types: how `T` responds to `Y`,
//! how `S` responds to `Y`, and how `Y` responds to `X`. Response type `r` in
//! `0..4` encodes the pair (value when the parent is at level 0, value when
//! it is at level 1) as `2 * v0 + v1`, so `r = 2` is the only decreasing
//! type. Under randomized `X` the observed `P(t, s | x)` is a linear image of
//! the type distribution `q`, and the interventional probability is a linear
//! functional of it; [`lp_bounds`] optimizes that functional exactly.

mod closed;
#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::exec::Execution;
use crate::lp::{self, Equality, LinearProgram, LpError, LpStatus, Sense};
use crate::rational::{self, format_rational, Rational};
use crate::table::{JointTable, TableError};

pub use closed::{
    certify_against_lp, certify_against_lp_with, closed_form_bounds, lower_terms, stratified_bounds,
    stratified_bounds_with, upper_terms, Certification, TargetCertification,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("format error: {0}")]
    Format(String),
    #[error("zero mass: {0}")]
    ZeroMass(String),
    #[error("observed table is inconsistent with the response-type model ({0})")]
    Infeasible(String),
}

impl BoundsError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            BoundsError::Table(_) => "table",
            BoundsError::Lp(_) => "lp",
            BoundsError::Format(_) => "format",
            BoundsError::ZeroMass(_) => "zero-mass",
            BoundsError::Infeasible(_) => "infeasible",
        }
    }
}

/// Level of `parent` mapped through response type `r`.
fn respond(r: u8, parent: usize) -> usize {
    if parent == 0 {
        (r >> 1) as usize
    } else {
        (r & 1) as usize
    }
}

/// Response types of `T`, `S` and `Y` (`i`, `j`, `k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CounterfactualIndex {
    pub i: u8,
    pub j: u8,
    pub k: u8,
}

impl CounterfactualIndex {
    pub fn new(i: u8, j: u8, k: u8) -> Self {
        assert!(i < 4 && j < 4 && k < 4, "response types are 0..4");
        CounterfactualIndex { i, j, k }
    }

    /// All 64 indices, or the 27 without a decreasing type, in `(i, j, k)` order.
    pub fn all(monotone: bool) -> Vec<Self> {
        let types: &[u8] = if monotone { &[0, 1, 3] } else { &[0, 1, 2, 3] };
        let mut out = Vec::with_capacity(types.len().pow(3));
        for &i in types {
            for &j in types {
                for &k in types {
                    out.push(CounterfactualIndex { i, j, k });
                }
            }
        }
        out
    }

    pub fn is_monotone(&self) -> bool {
        self.i != 2 && self.j != 2 && self.k != 2
    }

    /// `Y` under `set(X = x)`.
    pub fn outcome(&self, x: usize) -> usize {
        respond(self.k, x)
    }

    /// `(t, s, y)` realized when `X = x`.
    pub fn observe(&self, x: usize) -> (usize, usize, usize) {
        let y = self.outcome(x);
        (respond(self.i, y), respond(self.j, y), y)
    }
}

impl fmt::Display for CounterfactualIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}{}{}", self.i, self.j, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    X0,
    X1,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::X0, Target::X1];

    pub fn level(self) -> usize {
        match self {
            Target::X0 => 0,
            Target::X1 => 1,
        }
    }
}

/// How the cells of a [`ProxyTable`] are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `P(t, s | x)`; each `x` slice sums to one.
    #[default]
    Conditional,
    /// The joint `P(t, s, x)`; the whole table sums to one.
    JointCompat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lp,
    ClosedForm,
    Stratified,
}

/// Which proxies constrain the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proxies {
    #[default]
    Both,
    /// `S` marginalized out.
    T,
    /// `T` marginalized out.
    S,
}

/// A binary variable with its categories at levels 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binary {
    pub name: String,
    pub levels: [String; 2],
}

impl Binary {
    pub fn new(name: &str, zero: &str, one: &str) -> Self {
        Binary {
            name: name.to_string(),
            levels: [zero.to_string(), one.to_string()],
        }
    }

    /// Levels of a two-category variable of `table`. Labels ending in `0`
    /// and `1` are placed by that digit; otherwise schema order is used.
    pub fn infer<T: crate::table::Prob>(table: &JointTable<T>, name: &str) -> Result<Self, BoundsError> {
        let v = table.variable(name)?;
        if v.categories.len() != 2 {
            return Err(BoundsError::Format(format!(
                "{name} has {} categories, expected 2",
                v.categories.len()
            )));
        }
        let (a, b) = (&v.categories[0], &v.categories[1]);
        let levels = if a.ends_with('1') && b.ends_with('0') {
            [b.clone(), a.clone()]
        } else {
            [a.clone(), b.clone()]
        };
        Ok(Binary { name: name.to_string(), levels })
    }
}

/// Exposure and the two proxies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyRoles {
    pub x: Binary,
    pub t: Binary,
    pub s: Binary,
}

impl ProxyRoles {
    pub fn infer<T: crate::table::Prob>(table: &JointTable<T>, x: &str, t: &str, s: &str) -> Result<Self, BoundsError> {
        if x == t || x == s || t == s {
            return Err(BoundsError::Format("exposure and proxies must be distinct".into()));
        }
        Ok(ProxyRoles {
            x: Binary::infer(table, x)?,
            t: Binary::infer(table, t)?,
            s: Binary::infer(table, s)?,
        })
    }
}

type Cube = [[[Rational; 2]; 2]; 2];

fn zero_cube() -> Cube {
    std::array::from_fn(|_| std::array::from_fn(|_| std::array::from_fn(|_| Rational::zero())))
}

/// `p[k][i][j]` for `T = t_i`, `S = s_j`, `X = x_k`, read per `convention`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProxyTable {
    pub p: Cube,
    pub convention: Convention,
}

impl ProxyTable {
    pub fn new(p: Cube, convention: Convention) -> Result<Self, BoundsError> {
        let t = ProxyTable { p, convention };
        t.validate()?;
        Ok(t)
    }

    /// Builds `p[k][i][j]` from a closure over `(i, j, k)`.
    pub fn from_fn(convention: Convention, f: impl Fn(usize, usize, usize) -> Rational) -> Result<Self, BoundsError> {
        let p = std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| f(i, j, k))));
        ProxyTable::new(p, convention)
    }

    /// `p_{ij.k}`.
    pub fn get(&self, i: usize, j: usize, k: usize) -> &Rational {
        &self.p[k][i][j]
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if self.p.iter().flatten().flatten().any(|v| v.is_negative()) {
            return Err(BoundsError::Format("negative cell".into()));
        }
        let slice = |k: usize| -> Rational { self.p[k].iter().flatten().sum() };
        match self.convention {
            Convention::Conditional => {
                for k in 0..2 {
                    if !slice(k).is_one() {
                        return Err(BoundsError::Format(format!("slice x{k} sums to {}", format_rational(&slice(k)))));
                    }
                }
            }
            Convention::JointCompat => {
                let total = slice(0) + slice(1);
                if !total.is_one() {
                    return Err(BoundsError::Format(format!("table sums to {}", format_rational(&total))));
                }
            }
        }
        Ok(())
    }

    /// Reads `X`, `T`, `S` from an exact joint table; other variables are
    /// summed out.
    pub fn from_joint(table: &JointTable, roles: &ProxyRoles, convention: Convention) -> Result<Self, BoundsError> {
        let cube = cube_from(table, roles, &[])?;
        normalize(cube, convention, "")
    }

    /// Conditionals given `X` as a joint-compatible table weighted by `P(x)`.
    pub fn to_joint(&self, px: &[Rational; 2]) -> Result<Self, BoundsError> {
        if self.convention != Convention::Conditional {
            return Err(BoundsError::Format("table is already joint".into()));
        }
        let p = std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| &self.p[k][i][j] * &px[k])));
        ProxyTable::new(p, Convention::JointCompat)
    }
}

/// Mass of every `(x, t, s)` cell, restricted to `fixed` assignments.
fn cube_from(table: &JointTable, roles: &ProxyRoles, fixed: &[(&str, &str)]) -> Result<Cube, BoundsError> {
    let mut cube = zero_cube();
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut a: Vec<(&str, &str)> = vec![
                    (&roles.x.name, &roles.x.levels[k]),
                    (&roles.t.name, &roles.t.levels[i]),
                    (&roles.s.name, &roles.s.levels[j]),
                ];
                a.extend_from_slice(fixed);
                cube[k][i][j] = table.mass(&a)?;
            }
        }
    }
    Ok(cube)
}

fn normalize(mut cube: Cube, convention: Convention, context: &str) -> Result<ProxyTable, BoundsError> {
    match convention {
        Convention::Conditional => {
            for (k, slice) in cube.iter_mut().enumerate() {
                let total: Rational = slice.iter().flatten().sum();
                if total.is_zero() {
                    return Err(BoundsError::ZeroMass(format!("P(x{k}{context}) = 0")));
                }
                for v in slice.iter_mut().flatten() {
                    *v /= &total;
                }
            }
        }
        Convention::JointCompat => {
            let total: Rational = cube.iter().flatten().flatten().sum();
            if total.is_zero() {
                return Err(BoundsError::ZeroMass(format!("empty table{context}")));
            }
            for v in cube.iter_mut().flatten().flatten() {
                *v /= &total;
            }
        }
    }
    ProxyTable::new(cube, convention)
}

/// One covariate stratum: its labels, `P(z)` and the table within it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    pub z: Vec<String>,
    pub weight: Rational,
    pub table: ProxyTable,
}

/// Splits `table` by the joint categories of `z`. Strata with `P(z) = 0`
/// are dropped; a stratum missing one exposure level is a zero-mass error
/// under the conditional convention.
pub fn stratify(table: &JointTable, roles: &ProxyRoles, z: &[&str], convention: Convention) -> Result<Vec<Stratum>, BoundsError> {
    let zvars = z.iter().map(|n| table.variable(n).cloned()).collect::<Result<Vec<_>, _>>()?;
    if z.iter().any(|n| *n == roles.x.name || *n == roles.t.name || *n == roles.s.name) {
        return Err(BoundsError::Format("covariates overlap exposure or proxies".into()));
    }
    let shape: Vec<usize> = zvars.iter().map(|v| v.card()).collect();
    let mut out = Vec::new();
    for idx in crate::table::Odometer::new(&shape) {
        let labels: Vec<&str> = zvars.iter().zip(&idx).map(|(v, &c)| v.categories[c].as_str()).collect();
        let fixed: Vec<(&str, &str)> = z.iter().copied().zip(labels.iter().copied()).collect();
        let weight = table.mass(&fixed)?;
        if weight.is_zero() {
            continue;
        }
        let context = format!(" | {}", fixed.iter().map(|(n, l)| format!("{n}={l}")).collect::<Vec<_>>().join(", "));
        let cube = cube_from(table, roles, &fixed)?;
        out.push(Stratum {
            z: labels.iter().map(|s| s.to_string()).collect(),
            weight,
            table: normalize(cube, convention, &context)?,
        });
    }
    Ok(out)
}

/// Label of an observed-stratum equation: `T`, `S` levels (absent when
/// marginalized) and the exposure level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StratumRow {
    pub t: Option<usize>,
    pub s: Option<usize>,
    pub x: usize,
}

impl StratumRow {
    fn matches(&self, c: &CounterfactualIndex) -> bool {
        let (t, s, _) = c.observe(self.x);
        self.t.is_none_or(|v| v == t) && self.s.is_none_or(|v| v == s)
    }

    fn observed(&self, p: &ProxyTable) -> Rational {
        let mut total = Rational::zero();
        for i in 0..2 {
            for j in 0..2 {
                if self.t.is_none_or(|v| v == i) && self.s.is_none_or(|v| v == j) {
                    total += p.get(i, j, self.x);
                }
            }
        }
        total
    }
}

impl fmt::Display for StratumRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |v: Option<usize>| v.map_or("+".to_string(), |v| v.to_string());
        write!(f, "p{}{}.{}", d(self.t), d(self.s), self.x)
    }
}

/// Linear program over response-type probabilities: the normalization row
/// followed by one equation per observed `(t, s, x)` cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterfactualProgram {
    pub monotone: bool,
    pub proxies: Proxies,
    pub target: Target,
    pub columns: Vec<CounterfactualIndex>,
    pub rows: Vec<StratumRow>,
    pub observed: ProxyTable,
    /// Minimization form; `lp.eq[0]` is the normalization row.
    pub lp: LinearProgram,
}

pub fn build_program(p: &ProxyTable, monotone: bool, target: Target) -> Result<CounterfactualProgram, BoundsError> {
    build_program_with(p, monotone, target, Proxies::Both)
}

/// As [`build_program`], with one proxy optionally marginalized out of the
/// observed equations.
pub fn build_program_with(
    p: &ProxyTable,
    monotone: bool,
    target: Target,
    proxies: Proxies,
) -> Result<CounterfactualProgram, BoundsError> {
    if p.convention != Convention::Conditional {
        return Err(BoundsError::Format("the program needs conditionals P(t, s | x)".into()));
    }
    p.validate()?;
    let columns = CounterfactualIndex::all(monotone);
    let n = columns.len();
    let mut rows = Vec::new();
    for x in [1, 0] {
        for a in 0..2 {
            for b in 0..2 {
                match proxies {
                    Proxies::Both => rows.push(StratumRow { t: Some(a), s: Some(b), x }),
                    Proxies::T if b == 0 => rows.push(StratumRow { t: Some(a), s: None, x }),
                    Proxies::S if b == 0 => rows.push(StratumRow { t: None, s: Some(a), x }),
                    _ => {}
                }
            }
        }
    }
    let obj = columns
        .iter()
        .map(|c| if c.outcome(target.level()) == 1 { Rational::one() } else { Rational::zero() })
        .collect();
    let mut lp = LinearProgram::new(n, obj, Sense::Min);
    lp.push_eq(vec![Rational::one(); n], Rational::one());
    for row in &rows {
        let a = columns
            .iter()
            .map(|c| if row.matches(c) { Rational::one() } else { Rational::zero() })
            .collect();
        lp.push_eq(a, row.observed(p));
    }
    Ok(CounterfactualProgram {
        monotone,
        proxies,
        target,
        columns,
        rows,
        observed: p.clone(),
        lp,
    })
}

impl CounterfactualProgram {
    pub fn position(&self, c: &CounterfactualIndex) -> Option<usize> {
        self.columns.iter().position(|d| d == c)
    }

    /// Whether the observed equations of each exposure level sum to the
    /// normalization row.
    pub fn partitions_columns(&self) -> bool {
        let norm = &self.lp.eq[0].a;
        (0..2).all(|x| {
            let mut sum = vec![Rational::zero(); self.columns.len()];
            for (row, e) in self.rows.iter().zip(&self.lp.eq[1..]) {
                if row.x == x {
                    for (s, a) in sum.iter_mut().zip(&e.a) {
                        *s += a;
                    }
                }
            }
            &sum == norm
        })
    }

    /// Left-hand sides of the observed equations at `q`.
    pub fn observables_at(&self, q: &[Rational]) -> Vec<Rational> {
        self.lp.eq[1..].iter().map(|e| e.a.iter().zip(q).filter(|(a, _)| !a.is_zero()).map(|(_, v)| v).sum()).collect()
    }

    pub fn target_at(&self, q: &[Rational]) -> Rational {
        self.lp.objective_at(q)
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.lp.eq
    }
}

/// Attaining points of the two bounds, over `columns`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witnesses {
    pub columns: Vec<CounterfactualIndex>,
    pub lower: Vec<Rational>,
    pub upper: Vec<Rational>,
}

struct Sparse<'a>(&'a [CounterfactualIndex], &'a [Rational]);

impl Serialize for Sparse<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let nonzero: Vec<_> = self.0.iter().zip(self.1).filter(|(_, v)| !v.is_zero()).collect();
        let mut map = s.serialize_map(Some(nonzero.len()))?;
        for (c, v) in nonzero {
            map.serialize_entry(&c.to_string(), &format_rational(v))?;
        }
        map.end()
    }
}

impl Serialize for Witnesses {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("lower", &Sparse(&self.columns, &self.lower))?;
        map.serialize_entry("upper", &Sparse(&self.columns, &self.upper))?;
        map.end()
    }
}

/// Per-stratum closed-form terms (a single unlabeled stratum when unstratified).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StratumTerms {
    pub z: Vec<String>,
    #[serde(with = "rational::serde_string")]
    pub weight: Rational,
    #[serde(with = "rational::serde_string_vec")]
    pub values: Vec<Rational>,
    /// The clamped bound contributed by this stratum.
    #[serde(with = "rational::serde_string")]
    pub bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundsResult {
    pub target: Target,
    pub method: Method,
    pub convention: Convention,
    #[serde(with = "rational::serde_exact")]
    pub lower: Rational,
    #[serde(with = "rational::serde_exact")]
    pub upper: Rational,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Witnesses>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<StratumTerms>,
}

impl BoundsResult {
    pub fn contains(&self, v: &Rational) -> bool {
        &self.lower <= v && v <= &self.upper
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("bounds serialize")
    }
}

/// Exact minimum and maximum of the target over the program's polytope.
pub fn lp_bounds(prog: &CounterfactualProgram) -> Result<BoundsResult, BoundsError> {
    let mut max = prog.lp.clone();
    max.sense = Sense::Max;
    let lo = lp::solve(&prog.lp)?;
    if lo.status == LpStatus::Infeasible {
        let kind = if prog.monotone { "monotone" } else { "unrestricted" };
        return Err(BoundsError::Infeasible(format!("{kind} program has no feasible point")));
    }
    let hi = lp::solve(&max)?;
    let (Some(lower), Some(lw), Some(upper), Some(uw)) = (lo.value, lo.witness, hi.value, hi.witness) else {
        // The target is a sum of probabilities, so a feasible program is bounded.
        unreachable!("bounded feasible program without optimum");
    };
    Ok(BoundsResult {
        target: prog.target,
        method: Method::Lp,
        convention: Convention::Conditional,
        lower,
        upper,
        witnesses: Some(Witnesses {
            columns: prog.columns.clone(),
            lower: lw,
            upper: uw,
        }),
        terms: Vec::new(),
    })
}

/// [`lp_bounds`] for both targets.
pub fn lp_bounds_both(p: &ProxyTable, monotone: bool, proxies: Proxies, exec: Execution) -> Result<[BoundsResult; 2], BoundsError> {
    let mut out = exec
        .map(&Target::BOTH, |&t| build_program_with(p, monotone, t, proxies).and_then(|prog| lp_bounds(&prog)))
        .into_iter();
    let x0 = out.next().expect("two targets")?;
    let x1 = out.next().expect("two targets")?;
    Ok([x0, x1])
}

/// An explicit distribution over response types, with `X` randomized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseModel {
    pub weights: BTreeMap<CounterfactualIndex, Rational>,
}

impl ResponseModel {
    /// Random weights on a grid of `1..=grid`, with roughly a third of the
    /// types switched off.
    pub fn random<R: Rng + ?Sized>(monotone: bool, grid: i64, rng: &mut R) -> Self {
        let mut weights = BTreeMap::new();
        let mut total = 0i64;
        for c in CounterfactualIndex::all(monotone) {
            if rng.random_range(0..3) == 0 {
                continue;
            }
            let w = rng.random_range(1..=grid);
            total += w;
            weights.insert(c, rational::int(w));
        }
        if weights.is_empty() {
            weights.insert(CounterfactualIndex::new(0, 0, 0), rational::int(1));
            total = 1;
        }
        let total = rational::int(total);
        for w in weights.values_mut() {
            *w /= &total;
        }
        ResponseModel { weights }
    }

    /// `P(t, s | x)` implied by the model.
    pub fn observables(&self) -> ProxyTable {
        let mut cube = zero_cube();
        for (c, w) in &self.weights {
            for (x, slice) in cube.iter_mut().enumerate() {
                let (t, s, _) = c.observe(x);
                slice[t][s] += w;
            }
        }
        ProxyTable::new(cube, Convention::Conditional).expect("model weights sum to one")
    }

    /// `f(y1 | set(X = x))`.
    pub fn effect(&self, target: Target) -> Rational {
        self.weights
            .iter()
            .filter(|(c, _)| c.outcome(target.level()) == 1)
            .map(|(_, w)| w)
            .sum()
    }

    /// Weights laid out over `columns`; `None` if a weighted type is missing.
    pub fn dense(&self, columns: &[CounterfactualIndex]) -> Option<Vec<Rational>> {
        if self.weights.keys().any(|c| !columns.contains(c)) {
            return None;
        }
        Some(columns.iter().map(|c| self.weights.get(c).cloned().unwrap_or_else(Rational::zero)).collect())
    }
}
