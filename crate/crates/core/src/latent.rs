//! Synthetic latent-class models: a discrete latent `U` (optionally per
//! stratum `Z`) whose children are conditionally independent given `(U, Z)`.

use nalgebra::DMatrix;
use rand::Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::identify::{LatentDecl, ProxyDesign, Roles, Selection};
use crate::rational::{ratio, Rational};
use crate::table::{JointTable, Prob, TableError, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("invalid latent model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Conditional table `f(child | u, z)` indexed `[stratum][u][category]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission<T> {
    pub variable: Variable,
    pub table: Vec<Vec<Vec<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentModelSpec<T> {
    pub latent: Variable,
    /// Stratifying covariate; `None` means a single implicit stratum.
    pub stratum: Option<Variable>,
    /// `f(z)`, one entry per stratum (`[1]` without a stratum variable).
    pub stratum_probs: Vec<T>,
    /// `f(u | z)`, indexed `[stratum][u]`.
    pub prior: Vec<Vec<T>>,
    pub children: Vec<Emission<T>>,
    /// Asserts `f(u_1 | z) < ... < f(u_k | z)` in every stratum.
    pub order_identifiable: bool,
}

impl<T: Prob> LatentModelSpec<T> {
    pub fn k(&self) -> usize {
        self.latent.card()
    }

    pub fn strata(&self) -> usize {
        self.stratum_probs.len()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: String| Err(SpecError::Invalid(m));
        let k = self.k();
        let m = self.strata();
        if k < 2 {
            return bad("latent variable needs at least two categories".into());
        }
        match &self.stratum {
            Some(z) if z.card() != m => return bad("stratum_probs length differs from stratum categories".into()),
            None if m != 1 => return bad("without a stratum variable there is exactly one stratum".into()),
            _ => {}
        }
        check_distribution(&self.stratum_probs, "f(z)")?;
        if self.prior.len() != m {
            return bad("prior needs one row per stratum".into());
        }
        for (zi, row) in self.prior.iter().enumerate() {
            if row.len() != k {
                return bad(format!("prior row {zi} has {} entries, expected {k}", row.len()));
            }
            check_distribution(row, "f(u|z)")?;
            if self.order_identifiable && row.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("prior in stratum {zi} is not strictly increasing"));
            }
        }
        if self.children.is_empty() {
            return bad("at least one child variable is required".into());
        }
        for child in &self.children {
            if child.table.len() != m {
                return bad(format!("emission {:?} needs one block per stratum", child.variable.name));
            }
            for block in &child.table {
                if block.len() != k {
                    return bad(format!("emission {:?} needs one row per latent category", child.variable.name));
                }
                for row in block {
                    if row.len() != child.variable.card() {
                        return bad(format!("emission {:?} row has wrong length", child.variable.name));
                    }
                    check_distribution(row, &child.variable.name)?;
                }
            }
        }
        Ok(())
    }

    /// Names of the observable variables, in table order.
    pub fn observable_names(&self) -> Vec<String> {
        self.children
            .iter()
            .map(|c| c.variable.name.clone())
            .chain(self.stratum.iter().map(|z| z.name.clone()))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let rows = |v: &[T]| v.iter().map(Prob::to_json).collect::<Vec<_>>();
        json!({
            "latent": self.latent,
            "stratum": self.stratum,
            "stratum_probs": rows(&self.stratum_probs),
            "prior": self.prior.iter().map(|r| rows(r)).collect::<Vec<_>>(),
            "children": self.children.iter().map(|c| json!({
                "variable": c.variable,
                "table": c.table.iter().map(|b| b.iter().map(|r| rows(r)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "order_identifiable": self.order_identifiable,
        })
    }
}

fn check_distribution<T: Prob>(row: &[T], what: &str) -> Result<(), SpecError> {
    if row.iter().any(|p| p.is_negative()) {
        return Err(SpecError::Invalid(format!("{what} has a negative entry")));
    }
    let total = row.iter().fold(T::zero(), |a, p| a + p.clone());
    if !T::is_unit_mass(&total) {
        return Err(SpecError::Invalid(format!("{what} does not sum to one")));
    }
    Ok(())
}

/// Ground truth over `[U, children.., Z]` and the observable marginal over
/// `[children.., Z]`.
pub fn generate_latent_model<T: Prob>(spec: &LatentModelSpec<T>) -> Result<(JointTable<T>, JointTable<T>), SpecError> {
    spec.validate()?;
    let mut vars = vec![spec.latent.clone()];
    vars.extend(spec.children.iter().map(|c| c.variable.clone()));
    vars.extend(spec.stratum.iter().cloned());
    let has_z = spec.stratum.is_some();
    let truth = JointTable::from_fn(vars, |idx| {
        let u = idx[0];
        let z = if has_z { idx[idx.len() - 1] } else { 0 };
        let mut p = spec.stratum_probs[z].clone() * spec.prior[z][u].clone();
        for (c, child) in spec.children.iter().enumerate() {
            p = p * child.table[z][u][idx[1 + c]].clone();
        }
        p
    })?;
    let observable = truth.marginal(&spec.observable_names())?;
    Ok((truth, observable))
}

/// Margins enforced when drawing random identifiable models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub k: usize,
    pub strata: usize,
    /// Minimum gap between consecutive sorted prior entries.
    pub prior_gap: f64,
    /// Minimum gap between the `f(w1 | u)` values (the eigenvalues).
    pub eigengap: f64,
    /// Minimum smallest singular value of the proxy matrices.
    pub min_singular: f64,
    /// Parameters are multiples of `1 / grid`.
    pub grid: i64,
}

impl SyntheticConfig {
    pub fn new(k: usize, strata: usize) -> Self {
        SyntheticConfig {
            k,
            strata,
            prior_gap: 0.02,
            eigengap: 0.05,
            min_singular: 0.05,
            grid: 1000,
        }
    }
}

/// Draws an exactly rational model with children `S`, `T` (k categories
/// each) and a binary `W`, satisfying every margin in `cfg`.
///
/// Variables: latent `U` (`u1..uk`), `S` (`s1..sk`), `T` (`t1..tk`),
/// `W` (`w1, w2`), and stratum `Z` (`z1..zm`) when `cfg.strata > 1`.
pub fn random_spec<R: Rng + ?Sized>(cfg: &SyntheticConfig, rng: &mut R) -> Result<LatentModelSpec<Rational>, SpecError> {
    let k = cfg.k;
    let m = cfg.strata.max(1);
    if !(2..=16).contains(&k) {
        return Err(SpecError::Invalid(format!("k = {k} outside 2..=16")));
    }
    if cfg.prior_gap * (k * (k - 1) / 2) as f64 >= 1.0 || cfg.eigengap * (k - 1) as f64 >= 1.0 {
        return Err(SpecError::Invalid("margins cannot be met".into()));
    }
    let labels = |p: &str, n: usize| (1..=n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let latent = Variable::new("U", labels("u", k));
    let s_var = Variable::new("S", labels("s", k));
    let t_var = Variable::new("T", labels("t", k));
    let w_var = Variable::new("W", labels("w", 2));
    let stratum = (m > 1).then(|| Variable::new("Z", labels("z", m)));

    let stratum_probs = if m > 1 {
        simplex_point(m, cfg.grid, rng)
    } else {
        vec![ratio(1, 1)]
    };
    let mut prior = Vec::with_capacity(m);
    let (mut s_tab, mut t_tab, mut w_tab) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..m {
        prior.push(loop {
            let mut row = simplex_point(k, cfg.grid, rng);
            row.sort();
            if min_gap(&row) >= cfg.prior_gap {
                break row;
            }
        });
        w_tab.push(loop {
            let ws: Vec<Rational> = (0..k).map(|_| ratio(rng.random_range(1..cfg.grid), cfg.grid)).collect();
            let mut sorted = ws.clone();
            sorted.sort();
            if min_gap(&sorted) >= cfg.eigengap {
                break ws.into_iter().map(|w| vec![w.clone(), ratio(1, 1) - w]).collect::<Vec<_>>();
            }
        });
        s_tab.push(well_conditioned_rows(k, cfg, rng));
        t_tab.push(well_conditioned_rows(k, cfg, rng));
    }
    let spec = LatentModelSpec {
        latent,
        stratum,
        stratum_probs,
        prior,
        children: vec![
            Emission { variable: s_var, table: s_tab },
            Emission { variable: t_var, table: t_tab },
            Emission { variable: w_var, table: w_tab },
        ],
        order_identifiable: true,
    };
    spec.validate()?;
    Ok(spec)
}

/// Random `k x k` conditional table whose proxy matrix `[1 | first k-1 columns]`
/// has smallest singular value at least `cfg.min_singular`.
fn well_conditioned_rows<R: Rng + ?Sized>(k: usize, cfg: &SyntheticConfig, rng: &mut R) -> Vec<Vec<Rational>> {
    loop {
        let rows: Vec<Vec<Rational>> = (0..k).map(|_| simplex_point(k, cfg.grid, rng)).collect();
        let m = DMatrix::from_fn(k, k, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1].to_f64() });
        let sv = m.singular_values();
        if sv.min() >= cfg.min_singular {
            return rows;
        }
    }
}

/// Uniform-ish point on the grid simplex with every coordinate at least `1/grid`.
fn simplex_point<R: Rng + ?Sized>(n: usize, grid: i64, rng: &mut R) -> Vec<Rational> {
    let mut cuts: Vec<i64> = Vec::with_capacity(n + 1);
    while cuts.len() < n - 1 {
        let c = rng.random_range(1..grid);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.push(0);
    cuts.push(grid);
    cuts.sort_unstable();
    cuts.windows(2).map(|w| ratio(w[1] - w[0], grid)).collect()
}

/// Design recovering `U` from a [`random_spec`] model: the first `k - 1`
/// categories of `S` and `T`, and `w1`.
pub fn proxy_design(spec: &LatentModelSpec<Rational>) -> ProxyDesign {
    let one = |s: &str| vec![s.to_string()];
    let pick = |i: usize| spec.children[i].variable.categories[..spec.k() - 1].iter().map(|c| one(c)).collect();
    ProxyDesign {
        latent: LatentDecl {
            name: spec.latent.name.clone(),
            categories: spec.latent.categories.clone(),
            order_known: spec.order_identifiable,
        },
        roles: Roles {
            s: one(&spec.children[0].variable.name),
            t: one(&spec.children[1].variable.name),
            w: one(&spec.children[2].variable.name),
            z: spec.stratum.iter().map(|z| z.name.clone()).collect(),
        },
        select: Selection {
            s: pick(0),
            t: pick(1),
            w: one(&spec.children[2].variable.categories[0]),
        },
    }
}

fn min_gap(sorted: &[Rational]) -> f64 {
    sorted
        .windows(2)
        .map(|w| (&w[1] - &w[0]).to_f64())
        .fold(f64::INFINITY, f64::min)
}
