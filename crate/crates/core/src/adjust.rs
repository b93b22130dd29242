//! Interventional distributions from a joint table: the truncated
//! factorization and the back-door and front-door adjustment formulas.

use std::collections::HashSet;

use thiserror::Error;

use crate::graph::{CausalDiagram, GraphError};
use crate::table::{JointTable, Odometer, Prob, TableError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdjustError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("table and diagram disagree: {0}")]
    SchemaMismatch(String),
    #[error("f(x | pa(x)) is zero for {0}")]
    ZeroConditional(String),
    #[error("positivity violated: {0}")]
    Positivity(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// `f(y | set(X = x)) = sum_q f(x, y, q) / f(x | pa(x))` on a fully observed
/// causal diagram. Parent strata with zero mass contribute nothing.
pub fn intervene_truncated<T: Prob>(
    table: &JointTable<T>,
    g: &CausalDiagram,
    x: (&str, &str),
    y: &str,
) -> Result<JointTable<T>, AdjustError> {
    if g.has_bidirected() {
        return Err(AdjustError::SchemaMismatch(
            "bidirected edges must be expanded into explicit latent vertices".into(),
        ));
    }
    let table_names: HashSet<&str> = table.names().into_iter().collect();
    let graph_names: HashSet<&str> = g.vertices().iter().map(String::as_str).collect();
    if table_names != graph_names {
        return Err(AdjustError::SchemaMismatch("variable sets differ".into()));
    }
    if x.0 == y {
        return Err(AdjustError::Precondition("exposure and outcome coincide".into()));
    }

    let parents = g.parents(x.0)?;
    let mut keep: Vec<&str> = parents.clone();
    keep.push(x.0);
    let pa_x = table.marginal(&keep)?;
    let x_card = table.variable(x.0)?.card();
    let x_cat = table.variable(x.0)?.index_of(x.1)?;

    // f(x | pa) for every parent configuration, None where f(pa) = 0.
    let pa_shape: Vec<usize> = parents.iter().map(|p| table.variable(p).map(|v| v.card())).collect::<Result<_, _>>()?;
    let mut cond = Vec::new();
    for (flat, idx) in Odometer::new(&pa_shape).enumerate() {
        let row = &pa_x.probs()[flat * x_card..(flat + 1) * x_card];
        let f_pa = row.iter().fold(T::zero(), |a, p| a + p.clone());
        if f_pa.is_zero() {
            cond.push(None);
            continue;
        }
        let f_x_pa = row[x_cat].clone();
        if f_x_pa.is_zero() {
            let labels: Vec<String> = parents
                .iter()
                .zip(&idx)
                .map(|(p, &i)| format!("{p}={}", table.variable(p).map(|v| v.categories[i].clone()).unwrap_or_default()))
                .collect();
            return Err(AdjustError::ZeroConditional(format!("{}={} given {}", x.0, x.1, labels.join(","))));
        }
        cond.push(Some(f_x_pa / f_pa));
    }

    let x_pos = table.position(x.0)?;
    let y_pos = table.position(y)?;
    let pa_pos: Vec<usize> = parents.iter().map(|p| table.position(p)).collect::<Result<_, _>>()?;
    let pa_strides = crate::table::strides_of(&pa_shape);
    let y_var = table.variable(y)?.clone();
    let mut out = vec![T::zero(); y_var.card()];
    for (idx, p) in table.cells() {
        if idx[x_pos] != x_cat || p.is_zero() {
            continue;
        }
        let flat: usize = pa_pos.iter().zip(&pa_strides).map(|(&pos, s)| idx[pos] * s).sum();
        if let Some(c) = &cond[flat] {
            out[idx[y_pos]] = out[idx[y_pos]].clone() + p.clone() / c.clone();
        }
    }
    Ok(JointTable::new(vec![y_var], out)?)
}

/// `sum_z f(y | x, z) f(z)`.
pub fn backdoor_adjust<T: Prob, S: AsRef<str>>(
    table: &JointTable<T>,
    x: (&str, &str),
    y: &str,
    z: &[S],
) -> Result<JointTable<T>, AdjustError> {
    let z: Vec<&str> = z.iter().map(AsRef::as_ref).collect();
    check_roles(x.0, y, &z)?;
    let mut keep = z.clone();
    keep.extend([x.0, y]);
    let m = table.marginal(&keep)?;
    let x_var = table.variable(x.0)?;
    let y_var = table.variable(y)?.clone();
    let (nx, ny) = (x_var.card(), y_var.card());
    let xi = x_var.index_of(x.1)?;
    let block = nx * ny;

    let mut out = vec![T::zero(); ny];
    for (zflat, chunk) in m.probs().chunks(block).enumerate() {
        let f_z = chunk.iter().fold(T::zero(), |a, p| a + p.clone());
        if f_z.is_zero() {
            continue;
        }
        let row = &chunk[xi * ny..(xi + 1) * ny];
        let f_xz = row.iter().fold(T::zero(), |a, p| a + p.clone());
        if f_xz.is_zero() {
            return Err(AdjustError::Positivity(format!(
                "f({}={}, z) = 0 in stratum #{zflat} of {:?}",
                x.0, x.1, z
            )));
        }
        for (o, p) in out.iter_mut().zip(row) {
            *o = o.clone() + p.clone() / f_xz.clone() * f_z.clone();
        }
    }
    Ok(JointTable::new(vec![y_var], out)?)
}

/// `sum_z f(z | x) sum_x' f(y | x', z) f(x')`.
pub fn frontdoor_adjust<T: Prob, S: AsRef<str>>(
    table: &JointTable<T>,
    x: (&str, &str),
    y: &str,
    z: &[S],
) -> Result<JointTable<T>, AdjustError> {
    let z: Vec<&str> = z.iter().map(AsRef::as_ref).collect();
    check_roles(x.0, y, &z)?;
    let mut keep = vec![x.0];
    keep.extend(z.iter().copied());
    keep.push(y);
    let m = table.marginal(&keep)?;
    let x_var = table.variable(x.0)?;
    let y_var = table.variable(y)?.clone();
    let nx = x_var.card();
    let ny = y_var.card();
    let xi = x_var.index_of(x.1)?;
    let nz: usize = z.iter().map(|v| table.variable(v).map(|v| v.card())).product::<Result<usize, _>>()?;

    let cell = |xc: usize, zc: usize, yc: usize| m.probs()[(xc * nz + zc) * ny + yc].clone();
    let sum_y = |xc: usize, zc: usize| (0..ny).fold(T::zero(), |a, yc| a + cell(xc, zc, yc));
    let f_x: Vec<T> = (0..nx).map(|xc| (0..nz).fold(T::zero(), |a, zc| a + sum_y(xc, zc))).collect();
    if f_x[xi].is_zero() {
        return Err(AdjustError::Positivity(format!("f({}={}) = 0", x.0, x.1)));
    }

    let mut out = vec![T::zero(); ny];
    for zc in 0..nz {
        let f_z_given_x = sum_y(xi, zc) / f_x[xi].clone();
        if f_z_given_x.is_zero() {
            continue;
        }
        for xp in 0..nx {
            if f_x[xp].is_zero() {
                continue;
            }
            let f_xz = sum_y(xp, zc);
            if f_xz.is_zero() {
                return Err(AdjustError::Positivity(format!(
                    "f({}={}, z) = 0 for mediator stratum #{zc}",
                    x.0, x_var.categories[xp]
                )));
            }
            for (yc, o) in out.iter_mut().enumerate() {
                *o = o.clone() + cell(xp, zc, yc) / f_xz.clone() * f_x[xp].clone() * f_z_given_x.clone();
            }
        }
    }
    Ok(JointTable::new(vec![y_var], out)?)
}

fn check_roles(x: &str, y: &str, z: &[&str]) -> Result<(), AdjustError> {
    if x == y || z.contains(&x) || z.contains(&y) {
        return Err(AdjustError::Precondition("exposure, outcome and adjustment set must be disjoint".into()));
    }
    Ok(())
}
