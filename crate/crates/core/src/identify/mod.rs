//! Identification of a latent variable's joint law from two proxy families.
//!
//! Given proxies `S` and `T` of a latent `U`, an auxiliary set `W` and
//! covariates `Z` such that `S`, `T` and `W` are mutually independent given
//! `(U, Z)`, the matrices
//!
//! ```text
//! P[i][j] = f(s_i, t_j | z)      Q[i][j] = f(w, s_i, t_j | z)
//! ```
//!
//! (row 0 and column 0 standing for "any value") factor as `P = P2' M P1`
//! and `Q = P2' M Delta P1`. The eigenvalues of `P^-1 Q` are the entries of
//! `Delta = diag(f(w | u_i, z))`; the eigenvectors give `P1` and `P2`, and
//! `M = diag(f(u_i | z))` follows. Labels are attached by requiring
//! `f(u_1 | z) < ... < f(u_k | z)`.

mod eigen;

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::adjust::{backdoor_adjust, frontdoor_adjust, AdjustError};
use crate::exec::Execution;
use crate::graph::{CausalDiagram, Criterion, GraphError};
use crate::table::{JointTable, Odometer, Prob, TableError, Variable};

pub use eigen::{generalized_eigs, recover_factors, EigenSystem, RecoveredFactors};
use eigen::{clamp_prob, ser_matrix};

/// Largest supported latent cardinality.
pub const MAX_LATENT_CARD: usize = 16;

/// Cap on candidate selection pairs examined by [`select_max_det`].
pub const MAX_SELECTION_CANDIDATES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentifyError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
    #[error("invalid design: {0}")]
    Design(String),
    #[error("zero mass: {0}")]
    ZeroMass(String),
    #[error("condition (iii) violated: matrix {0} is singular")]
    SingularMatrix(String),
    #[error("condition (iii) violated: complex eigenvalue {re} + {im}i")]
    ComplexEigenvalue { re: f64, im: f64 },
    #[error("condition (iii) violated: eigenvalues {a} and {b} are not distinct")]
    DegenerateSpectrum { a: f64, b: f64 },
    #[error("condition (iii) violated: eigenvalue {0} is not positive")]
    NonPositiveEigenvalue(f64),
    #[error("vanishing pivot: {0}")]
    Pivot(String),
    #[error("recovered probability out of range: {0}")]
    Range(String),
    #[error("recovered prior matrix is not diagonal (off-diagonal {0:e})")]
    NonDiagonal(f64),
    #[error("reconstruction residual too large: {0}")]
    Residual(String),
    #[error("condition (ii) violated: {0}")]
    OrderAmbiguity(String),
    #[error("unsupported pattern: {0}")]
    Pattern(String),
    #[error("no adjustment set satisfies the back-door or front-door criterion: {0}")]
    NoCriterion(String),
    #[error("stratum {stratum}: {source}")]
    Stratum {
        stratum: String,
        #[source]
        source: Box<IdentifyError>,
    },
}

impl IdentifyError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            IdentifyError::Table(_) => "table",
            IdentifyError::Graph(_) => "graph",
            IdentifyError::Adjust(_) => "adjustment",
            IdentifyError::Design(_) => "design",
            IdentifyError::ZeroMass(_) => "zero-mass",
            IdentifyError::SingularMatrix(_) => "singular-matrix",
            IdentifyError::ComplexEigenvalue { .. } => "complex-eigenvalue",
            IdentifyError::DegenerateSpectrum { .. } => "degenerate-spectrum",
            IdentifyError::NonPositiveEigenvalue(_) => "non-positive-eigenvalue",
            IdentifyError::Pivot(_) => "pivot",
            IdentifyError::Range(_) => "range",
            IdentifyError::NonDiagonal(_) => "non-diagonal",
            IdentifyError::Residual(_) => "residual",
            IdentifyError::OrderAmbiguity(_) => "order-ambiguity",
            IdentifyError::Pattern(_) => "pattern",
            IdentifyError::NoCriterion(_) => "no-criterion",
            IdentifyError::Stratum { source, .. } => source.code(),
        }
    }

    /// Identifiability condition that failed, if the error is one.
    pub fn condition(&self) -> Option<&'static str> {
        match self {
            IdentifyError::SingularMatrix(_)
            | IdentifyError::ComplexEigenvalue { .. }
            | IdentifyError::DegenerateSpectrum { .. }
            | IdentifyError::NonPositiveEigenvalue(_) => Some("iii"),
            IdentifyError::OrderAmbiguity(_) => Some("ii"),
            IdentifyError::Stratum { source, .. } => source.condition(),
            _ => None,
        }
    }

    /// Whether the input parsed but the model is not identifiable as given.
    pub fn is_identification_failure(&self) -> bool {
        match self {
            IdentifyError::Table(_) | IdentifyError::Graph(_) | IdentifyError::Design(_) => false,
            IdentifyError::Stratum { source, .. } => source.is_identification_failure(),
            _ => true,
        }
    }

    fn in_stratum(self, z: &[(String, String)]) -> IdentifyError {
        if z.is_empty() {
            return self;
        }
        IdentifyError::Stratum {
            stratum: describe(z),
            source: Box::new(self),
        }
    }
}

fn describe(z: &[(String, String)]) -> String {
    z.iter().map(|(n, l)| format!("{n}={l}")).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Smallest singular value below this times the largest counts as singular.
    pub singular: f64,
    pub gap: f64,
    pub residual: f64,
    pub pivot: f64,
    pub prob: f64,
    pub diag: f64,
    pub order: f64,
    pub recon: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            singular: 1e-10,
            gap: 1e-6,
            residual: 1e-8,
            pivot: 1e-10,
            prob: 1e-6,
            diag: 1e-6,
            order: 1e-6,
            recon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentifyOptions {
    pub tol: Tolerances,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentDecl {
    pub name: String,
    pub categories: Vec<String>,
    /// Asserts `f(u_1 | z) < ... < f(u_k | z)` for every stratum.
    #[serde(default)]
    pub order_known: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Roles {
    #[serde(rename = "S")]
    pub s: Vec<String>,
    #[serde(rename = "T")]
    pub t: Vec<String>,
    #[serde(rename = "W", default)]
    pub w: Vec<String>,
    #[serde(rename = "Z", default)]
    pub z: Vec<String>,
}

/// Selected value vectors: `k - 1` over `S`, `k - 1` over `T`, and the `W`
/// value used for `Q`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Selection {
    pub s: Vec<Vec<String>>,
    pub t: Vec<Vec<String>>,
    pub w: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyDesign {
    pub latent: LatentDecl,
    pub roles: Roles,
    pub select: Selection,
}

impl ProxyDesign {
    pub fn k(&self) -> usize {
        self.latent.categories.len()
    }

    pub fn parse_json(text: &str) -> Result<Self, IdentifyError> {
        serde_json::from_str(text).map_err(|e| IdentifyError::Design(e.to_string()))
    }

    pub fn latent_variable(&self) -> Variable {
        Variable::new(self.latent.name.clone(), self.latent.categories.clone())
    }

    /// Structural checks, plus domain checks against `table`.
    pub fn validate<T: Prob>(&self, table: &JointTable<T>) -> Result<(), IdentifyError> {
        let bad = |m: String| Err(IdentifyError::Design(m));
        let k = self.k();
        if !(2..=MAX_LATENT_CARD).contains(&k) {
            return bad(format!("latent cardinality {k} outside 2..={MAX_LATENT_CARD}"));
        }
        if self.latent.categories.iter().collect::<HashSet<_>>().len() != k {
            return bad("latent categories must be distinct".into());
        }
        if self.roles.s.is_empty() || self.roles.t.is_empty() || self.roles.w.is_empty() {
            return bad("roles S, T and W must be non-empty".into());
        }
        let mut seen = HashSet::from([self.latent.name.as_str()]);
        for v in self.roles.s.iter().chain(&self.roles.t).chain(&self.roles.w).chain(&self.roles.z) {
            if !seen.insert(v.as_str()) {
                return bad(format!("variable {v:?} has more than one role"));
            }
            table.variable(v)?;
        }
        if table.has_variable(&self.latent.name) {
            return bad(format!("latent {:?} appears in the observed data", self.latent.name));
        }
        for (which, roles, sel) in [("s", &self.roles.s, &self.select.s), ("t", &self.roles.t, &self.select.t)] {
            if sel.len() != k - 1 {
                return bad(format!("need {} selected {which}-vectors, got {}", k - 1, sel.len()));
            }
            if sel.iter().collect::<HashSet<_>>().len() != sel.len() {
                return bad(format!("selected {which}-vectors must be distinct"));
            }
            for v in sel {
                check_vector(table, roles, v)?;
            }
        }
        check_vector(table, &self.roles.w, &self.select.w)
    }

    /// Every stratum assignment over `Z`, in declared order.
    pub fn strata<T: Prob>(&self, table: &JointTable<T>) -> Result<Vec<Vec<(String, String)>>, IdentifyError> {
        value_vectors(table, &self.roles.z).map(|vs| {
            vs.into_iter()
                .map(|labels| self.roles.z.iter().cloned().zip(labels).collect())
                .collect()
        })
    }
}

fn check_vector<T: Prob>(table: &JointTable<T>, vars: &[String], labels: &[String]) -> Result<(), IdentifyError> {
    if vars.len() != labels.len() {
        return Err(IdentifyError::Design(format!("value vector {labels:?} does not match variables {vars:?}")));
    }
    for (v, l) in vars.iter().zip(labels) {
        table
            .variable(v)?
            .index_of(l)
            .map_err(|_| IdentifyError::Design(format!("{l:?} is not a category of {v:?}")))?;
    }
    Ok(())
}

/// All value vectors over `vars`, row-major.
fn value_vectors<T: Prob>(table: &JointTable<T>, vars: &[String]) -> Result<Vec<Vec<String>>, IdentifyError> {
    let cats: Vec<&Variable> = vars.iter().map(|v| table.variable(v)).collect::<Result<_, _>>()?;
    let shape: Vec<usize> = cats.iter().map(|v| v.card()).collect();
    Ok(Odometer::new(&shape)
        .map(|idx| idx.iter().zip(&cats).map(|(&i, v)| v.categories[i].clone()).collect())
        .collect())
}

/// `P` and `Q` for one stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumMatrices {
    pub z: Vec<(String, String)>,
    pub f_z: f64,
    #[serde(serialize_with = "ser_matrix")]
    pub p: DMatrix<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub q: DMatrix<f64>,
}

fn conditional<T: Prob>(table: &JointTable<T>, z: &[(String, String)]) -> Result<(JointTable<T>, T), IdentifyError> {
    if z.is_empty() {
        return Ok((table.clone(), T::one()));
    }
    let assignment: Vec<(&str, &str)> = z.iter().map(|(n, l)| (n.as_str(), l.as_str())).collect();
    let f_z = table.mass(&assignment)?;
    if f_z.is_zero() {
        return Err(IdentifyError::ZeroMass(format!("f({}) = 0", describe(z))));
    }
    Ok((table.condition(&assignment)?, f_z))
}

/// `P` when `w` is `None`, otherwise `Q` for that `W` value vector.
fn pairs(vars: &[String], labels: &[String]) -> Vec<(String, String)> {
    vars.iter().cloned().zip(labels.iter().cloned()).collect()
}

fn proxy_matrix<T: Prob>(cond: &JointTable<T>, design: &ProxyDesign, w: Option<&[String]>) -> Result<DMatrix<f64>, IdentifyError> {
    let k = design.k();
    let base: Vec<(String, String)> = w.map(|w| pairs(&design.roles.w, w)).unwrap_or_default();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut a = base.clone();
            if i > 0 {
                a.extend(pairs(&design.roles.s, &design.select.s[i - 1]));
            }
            if j > 0 {
                a.extend(pairs(&design.roles.t, &design.select.t[j - 1]));
            }
            let refs: Vec<(&str, &str)> = a.iter().map(|(n, l)| (n.as_str(), l.as_str())).collect();
            out[(i, j)] = cond.mass(&refs)?.to_f64();
        }
    }
    Ok(out)
}

/// `P` and `Q` (for the design's selected `w`) in stratum `z`.
pub fn build_pq<T: Prob>(table: &JointTable<T>, design: &ProxyDesign, z: &[(String, String)]) -> Result<StratumMatrices, IdentifyError> {
    let (cond, f_z) = conditional(table, z)?;
    Ok(StratumMatrices {
        z: z.to_vec(),
        f_z: f_z.to_f64(),
        p: proxy_matrix(&cond, design, None)?,
        q: proxy_matrix(&cond, design, Some(&design.select.w))?,
    })
}

/// `f(w | u_i, z)` for one `W` value vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub w: Vec<String>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiedStratum {
    #[serde(flatten)]
    pub matrices: StratumMatrices,
    /// Eigenvalues of `P^-1 Q`, ascending.
    pub lambdas: Vec<f64>,
    /// Factors with rows in latent category order.
    pub factors: RecoveredFactors,
    pub deltas: Vec<DeltaRow>,
    /// Largest discrepancy when replaying the factorization against the data.
    pub replay_residual: f64,
}

/// Reconstructed `f(u, w, z)` over `[U, W.., Z..]`, with the per-stratum
/// recoveries that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedJoint {
    pub table: JointTable<f64>,
    pub strata: Vec<IdentifiedStratum>,
}

impl ReconstructedJoint {
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "strata": self.strata,
            "joint": self.table.to_json(),
        })
    }
}

pub fn identify_joint<T: Prob>(table: &JointTable<T>, design: &ProxyDesign) -> Result<ReconstructedJoint, IdentifyError> {
    identify_joint_with(table, design, &IdentifyOptions::default())
}

pub fn identify_joint_with<T: Prob>(
    table: &JointTable<T>,
    design: &ProxyDesign,
    opts: &IdentifyOptions,
) -> Result<ReconstructedJoint, IdentifyError> {
    design.validate(table)?;
    if !design.latent.order_known {
        return Err(IdentifyError::OrderAmbiguity(
            "the design does not assert an increasing order of f(u | z); only order-free bounds are available".into(),
        ));
    }
    let strata = design.strata(table)?;
    let w_vectors = value_vectors(table, &design.roles.w)?;
    let results = opts.exec.map(&strata, |z| {
        identify_stratum(table, design, z, &w_vectors, &opts.tol).map_err(|e| e.in_stratum(z))
    });
    let strata: Vec<IdentifiedStratum> = results.into_iter().collect::<Result<_, _>>()?;

    let mut vars = vec![design.latent_variable()];
    for v in design.roles.w.iter().chain(&design.roles.z) {
        vars.push(table.variable(v)?.clone());
    }
    let n_w = w_vectors.len();
    let weights: Vec<f64> = Odometer::new(&vars.iter().map(Variable::card).collect::<Vec<_>>())
        .map(|idx| {
            let u = idx[0];
            let (w_idx, z_idx) = idx[1..].split_at(design.roles.w.len());
            let w_flat = flat_index(w_idx, &vars[1..1 + w_idx.len()]);
            let z_flat = flat_index(z_idx, &vars[1 + w_idx.len()..]);
            let s = &strata[z_flat];
            debug_assert!(w_flat < n_w);
            s.deltas[w_flat].delta[u] * s.factors.m[u] * s.matrices.f_z
        })
        .collect();
    let table = JointTable::from_weights(vars, weights)?;
    Ok(ReconstructedJoint { table, strata })
}

fn flat_index(idx: &[usize], vars: &[Variable]) -> usize {
    idx.iter().zip(vars).fold(0, |acc, (&i, v)| acc * v.card() + i)
}

fn identify_stratum<T: Prob>(
    table: &JointTable<T>,
    design: &ProxyDesign,
    z: &[(String, String)],
    w_vectors: &[Vec<String>],
    tol: &Tolerances,
) -> Result<IdentifiedStratum, IdentifyError> {
    let (cond, f_z) = conditional(table, z)?;
    let p = proxy_matrix(&cond, design, None)?;
    let q = proxy_matrix(&cond, design, Some(&design.select.w))?;
    let sys = generalized_eigs(&p, &q, tol)?;
    let raw = recover_factors(&sys, &p, &q, tol)?;

    let k = design.k();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&a, &b| raw.m[a].total_cmp(&raw.m[b]));
    for w in perm.windows(2) {
        if raw.m[w[1]] - raw.m[w[0]] <= tol.order {
            return Err(IdentifyError::OrderAmbiguity(format!(
                "recovered f(u | z) values {} and {} cannot be ordered",
                raw.m[w[0]], raw.m[w[1]]
            )));
        }
    }
    let factors = raw.permuted(&perm);

    let p1_inv = factors
        .p1
        .clone()
        .try_inverse()
        .ok_or_else(|| IdentifyError::SingularMatrix("P1".into()))?;
    let p_lu = p.clone().lu();
    let mut deltas = Vec::with_capacity(w_vectors.len());
    let mut replay = 0.0_f64;
    let mut row_sums = vec![0.0; k];
    for w in w_vectors {
        let q_w = proxy_matrix(&cond, design, Some(w))?;
        let r = p_lu.solve(&q_w).ok_or_else(|| IdentifyError::SingularMatrix("P".into()))?;
        let d = &factors.p1 * r * &p1_inv;
        for i in 0..k {
            for j in 0..k {
                if i != j && d[(i, j)].abs() > tol.diag {
                    return Err(IdentifyError::NonDiagonal(d[(i, j)].abs()));
                }
            }
        }
        let delta = (0..k)
            .map(|i| clamp_prob(d[(i, i)], "f(w | u)", tol))
            .collect::<Result<Vec<_>, _>>()?;
        let f_w: f64 = delta.iter().zip(&factors.m).map(|(d, m)| d * m).sum();
        replay = replay.max((f_w - q_w[(0, 0)]).abs());
        for (s, d) in row_sums.iter_mut().zip(&delta) {
            *s += d;
        }
        deltas.push(DeltaRow { w: w.clone(), delta });
    }
    replay = replay
        .max(factors.residual_p)
        .max(factors.residual_q)
        .max(row_sums.iter().fold(0.0, |a, s| a.max((s - 1.0).abs())));
    if replay > tol.recon {
        return Err(IdentifyError::Residual(format!("replayed observables differ by {replay:e}")));
    }
    Ok(IdentifiedStratum {
        matrices: StratumMatrices {
            z: z.to_vec(),
            f_z: f_z.to_f64(),
            p,
            q,
        },
        lambdas: sys.lambdas,
        factors,
        deltas,
        replay_residual: replay,
    })
}

/// An interventional distribution computed from a reconstructed joint.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalEffect {
    pub exposure: (String, String),
    pub outcome: String,
    pub criterion: Criterion,
    pub adjustment: Vec<String>,
    pub distribution: JointTable<f64>,
}

impl CausalEffect {
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "exposure": {"variable": self.exposure.0, "value": self.exposure.1},
            "outcome": self.outcome,
            "criterion": self.criterion,
            "adjustment": self.adjustment,
            "distribution": self.distribution.to_json(),
        })
    }
}

/// Identifies the joint, then applies back-door or front-door adjustment
/// with the smallest admissible set drawn from the reconstructed variables.
pub fn identify_causal_effect<T: Prob>(
    table: &JointTable<T>,
    g: &CausalDiagram,
    design: &ProxyDesign,
    x: (&str, &str),
    y: &str,
) -> Result<CausalEffect, IdentifyError> {
    let joint = identify_joint(table, design)?;
    effect_from_joint(&joint, g, design, x, y)
}

pub fn effect_from_joint(
    joint: &ReconstructedJoint,
    g: &CausalDiagram,
    design: &ProxyDesign,
    x: (&str, &str),
    y: &str,
) -> Result<CausalEffect, IdentifyError> {
    if design.latent.name != x.0 && design.latent.name != y {
        return Err(IdentifyError::Design(format!(
            "the latent {:?} must be the exposure or the outcome",
            design.latent.name
        )));
    }
    for v in [x.0, y] {
        if !joint.table.has_variable(v) {
            return Err(IdentifyError::Design(format!("{v:?} is not among the reconstructed variables")));
        }
    }
    let candidates: Vec<&str> = joint.table.names().into_iter().filter(|n| *n != x.0 && *n != y).collect();
    for criterion in [Criterion::BackDoor, Criterion::FrontDoor] {
        if let Some(set) = g.find_adjustment_set(x.0, y, &candidates, criterion)? {
            let distribution = match criterion {
                Criterion::BackDoor => backdoor_adjust(&joint.table, x, y, &set)?,
                _ => frontdoor_adjust(&joint.table, x, y, &set)?,
            };
            return Ok(CausalEffect {
                exposure: (x.0.to_string(), x.1.to_string()),
                outcome: y.to_string(),
                criterion,
                adjustment: set,
                distribution,
            });
        }
    }
    Err(IdentifyError::NoCriterion(format!("candidates {candidates:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFreeStratum {
    pub z: Vec<(String, String)>,
    pub f_z: f64,
    /// `f(x | z)`.
    pub f_x: f64,
    /// `lambda_i m_i = f(x, u_i | z)` in eigenvalue order.
    pub terms: Vec<f64>,
}

/// Interval for `f(u | set(X = x))` valid under every labeling of the latent
/// categories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFreeBounds {
    pub lower: f64,
    pub upper: f64,
    pub strata: Vec<OrderFreeStratum>,
}

/// `sum_z min_i {lambda_i m_i} / f(x | z) f(z)` and the same with `max`.
/// Requires `W = {X}`; no ordering of the prior is assumed.
pub fn order_free_bounds<T: Prob>(
    table: &JointTable<T>,
    design: &ProxyDesign,
    x: (&str, &str),
    opts: &IdentifyOptions,
) -> Result<OrderFreeBounds, IdentifyError> {
    if design.roles.w.len() != 1 || design.roles.w[0] != x.0 {
        return Err(IdentifyError::Pattern(format!(
            "order-free bounds need W = {{{}}}, got {:?}",
            x.0, design.roles.w
        )));
    }
    let mut design = design.clone();
    design.select.w = vec![x.1.to_string()];
    design.validate(table)?;
    let strata = design.strata(table)?;
    let results = opts.exec.map(&strata, |z| {
        let run = || -> Result<OrderFreeStratum, IdentifyError> {
            let mats = build_pq(table, &design, z)?;
            let sys = generalized_eigs(&mats.p, &mats.q, &opts.tol)?;
            let f = recover_factors(&sys, &mats.p, &mats.q, &opts.tol)?;
            let f_x = mats.q[(0, 0)];
            if f_x <= 0.0 {
                return Err(IdentifyError::ZeroMass(format!("f({}={}) = 0", x.0, x.1)));
            }
            Ok(OrderFreeStratum {
                z: z.clone(),
                f_z: mats.f_z,
                f_x,
                terms: f.delta.iter().zip(&f.m).map(|(d, m)| d * m).collect(),
            })
        };
        run().map_err(|e| e.in_stratum(z))
    });
    let strata: Vec<OrderFreeStratum> = results.into_iter().collect::<Result<_, _>>()?;
    let (mut lower, mut upper) = (0.0, 0.0);
    for s in &strata {
        let lo = s.terms.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lower += lo / s.f_x * s.f_z;
        upper += hi / s.f_x * s.f_z;
    }
    Ok(OrderFreeBounds {
        lower: lower.clamp(0.0, 1.0),
        upper: upper.clamp(0.0, 1.0),
        strata,
    })
}

/// Replaces the design's `s` and `t` selections with the pair maximizing the
/// smallest `|det P|` across strata. Ties keep the earliest candidate in
/// row-major value order.
pub fn select_max_det<T: Prob>(table: &JointTable<T>, design: &ProxyDesign) -> Result<ProxyDesign, IdentifyError> {
    let k = design.k();
    let s_dom = value_vectors(table, &design.roles.s)?;
    let t_dom = value_vectors(table, &design.roles.t)?;
    let s_sets: Vec<Vec<usize>> = crate::graph::Combinations::new(s_dom.len(), k - 1).collect();
    let t_sets: Vec<Vec<usize>> = crate::graph::Combinations::new(t_dom.len(), k - 1).collect();
    if s_sets.is_empty() || t_sets.is_empty() {
        return Err(IdentifyError::Design(format!("proxy domains are too small for k = {k}")));
    }
    if s_sets.len().saturating_mul(t_sets.len()) > MAX_SELECTION_CANDIDATES {
        return Err(IdentifyError::Design(format!(
            "{} candidate selections exceed the cap of {MAX_SELECTION_CANDIDATES}",
            s_sets.len() * t_sets.len()
        )));
    }

    // f(s, t | z) over the full proxy domains, per stratum.
    let mut keep: Vec<&str> = design.roles.s.iter().map(String::as_str).collect();
    keep.extend(design.roles.t.iter().map(String::as_str));
    let mut grids = Vec::new();
    for z in design.strata(table)? {
        let (cond, _) = conditional(table, &z)?;
        let st = cond.marginal(&keep)?;
        grids.push(DMatrix::from_row_iterator(s_dom.len(), t_dom.len(), st.probs().iter().map(Prob::to_f64)));
    }

    let mut best: Option<(f64, usize, usize)> = None;
    for (si, s_set) in s_sets.iter().enumerate() {
        for (ti, t_set) in t_sets.iter().enumerate() {
            let score = grids
                .iter()
                .map(|g| {
                    let p = DMatrix::from_fn(k, k, |i, j| match (i, j) {
                        (0, 0) => 1.0,
                        (0, j) => g.column(t_set[j - 1]).sum(),
                        (i, 0) => g.row(s_set[i - 1]).sum(),
                        (i, j) => g[(s_set[i - 1], t_set[j - 1])],
                    });
                    p.determinant().abs()
                })
                .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(b, _, _)| score > b) {
                best = Some((score, si, ti));
            }
        }
    }
    let (_, si, ti) = best.expect("non-empty candidate set");
    let mut out = design.clone();
    out.select.s = s_sets[si].iter().map(|&i| s_dom[i].clone()).collect();
    out.select.t = t_sets[ti].iter().map(|&i| t_dom[i].clone()).collect();
    Ok(out)
}
