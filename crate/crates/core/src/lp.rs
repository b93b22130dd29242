//! Exact linear programming over `{x >= 0 : A x = b}`.
//!
//! [`solve`] runs a two-phase simplex with Bland's rule in arbitrary
//! precision; [`enumerate_vertices`] lists every basic feasible solution and
//! serves as an independent oracle on small instances.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::rational::{self, Rational};

/// Vertex enumeration limits.
pub const MAX_ENUM_VARS: usize = 64;
pub const MAX_ENUM_ROWS: usize = 12;
/// Largest number of candidate bases the enumerator will examine.
pub const MAX_ENUM_BASES: u128 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("too large to enumerate: {0}")]
    Size(String),
    #[error("invalid JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equality {
    #[serde(with = "rational::serde_string_vec")]
    pub a: Vec<Rational>,
    #[serde(with = "rational::serde_string")]
    pub b: Rational,
}

/// `optimize obj . x` subject to `eq` and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub n: usize,
    pub eq: Vec<Equality>,
    #[serde(with = "rational::serde_string_vec")]
    pub obj: Vec<Rational>,
    pub sense: Sense,
}

impl LinearProgram {
    pub fn new(n: usize, obj: Vec<Rational>, sense: Sense) -> Self {
        LinearProgram { n, eq: Vec::new(), obj, sense }
    }

    pub fn push_eq(&mut self, a: Vec<Rational>, b: Rational) {
        self.eq.push(Equality { a, b });
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.obj.len() != self.n {
            return Err(LpError::Malformed(format!("objective has {} entries, expected {}", self.obj.len(), self.n)));
        }
        for (i, e) in self.eq.iter().enumerate() {
            if e.a.len() != self.n {
                return Err(LpError::Malformed(format!("row {i} has {} entries, expected {}", e.a.len(), self.n)));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[Rational]) -> Rational {
        dot(&self.obj, x)
    }

    /// Exact check of `A x = b` and `x >= 0`.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.n && x.iter().all(|v| !v.is_negative()) && self.eq.iter().all(|e| dot(&e.a, x) == e.b)
    }

    pub fn parse_json(text: &str) -> Result<Self, LpError> {
        let lp: LinearProgram = serde_json::from_str(text).map_err(|e| LpError::Json(e.to_string()))?;
        lp.validate()?;
        Ok(lp)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("program serializes")
    }
}

fn dot(a: &[Rational], x: &[Rational]) -> Rational {
    a.iter().zip(x).fold(Rational::zero(), |acc, (a, x)| {
        if a.is_zero() || x.is_zero() {
            acc
        } else {
            acc + a * x
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Optimal objective value when `status` is optimal.
    pub value: Option<Rational>,
    /// A vertex attaining `value`.
    pub witness: Option<Vec<Rational>>,
}

impl LpResult {
    fn without(status: LpStatus) -> Self {
        LpResult { status, value: None, witness: None }
    }
}

struct Tableau {
    /// Constraint rows; the last entry of each is the right-hand side.
    rows: Vec<Vec<Rational>>,
    /// Reduced costs; the last entry is minus the current objective value.
    cost: Vec<Rational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<Rational>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.cost);
        self.basis[r] = c;
    }

    /// Bland's rule over columns `< limit`. Returns false when unbounded.
    fn optimize(&mut self, limit: usize) -> bool {
        loop {
            let Some(c) = (0..limit).find(|&j| self.cost[j].is_negative()) else {
                return true;
            };
            let last = self.cost.len() - 1;
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[last] / &row[c];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Exact optimum by two-phase simplex with Bland's anti-cycling rule.
pub fn solve(lp: &LinearProgram) -> Result<LpResult, LpError> {
    lp.validate()?;
    let n = lp.n;
    let m = lp.eq.len();
    let width = n + m + 1;

    let mut rows = Vec::with_capacity(m);
    for (i, e) in lp.eq.iter().enumerate() {
        let flip = e.b.is_negative();
        let mut row = vec![Rational::zero(); width];
        for (j, a) in e.a.iter().enumerate() {
            row[j] = if flip { -a } else { a.clone() };
        }
        row[n + i] = Rational::one();
        row[width - 1] = if flip { -&e.b } else { e.b.clone() };
        rows.push(row);
    }
    let mut cost = vec![Rational::zero(); width];
    for row in &rows {
        for j in (0..n).chain([width - 1]) {
            if !row[j].is_zero() {
                cost[j] -= &row[j];
            }
        }
    }
    let mut t = Tableau {
        rows,
        cost,
        basis: (n..n + m).collect(),
    };
    t.optimize(n + m);
    if !t.cost[width - 1].is_zero() {
        return Ok(LpResult::without(LpStatus::Infeasible));
    }

    // Drive artificial variables out of the basis; drop redundant rows.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            match (0..n).find(|&j| !t.rows[r][j].is_zero()) {
                Some(j) => t.pivot(r, j),
                None => {
                    t.rows.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    let c: Vec<Rational> = match lp.sense {
        Sense::Min => lp.obj.clone(),
        Sense::Max => lp.obj.iter().map(|v| -v).collect(),
    };
    let mut cost = vec![Rational::zero(); width];
    cost[..n].clone_from_slice(&c);
    for (row, &b) in t.rows.iter().zip(&t.basis) {
        let cb = &c[b];
        if cb.is_zero() {
            continue;
        }
        for j in (0..n).chain([width - 1]) {
            if !row[j].is_zero() {
                cost[j] -= cb * &row[j];
            }
        }
    }
    t.cost = cost;
    if !t.optimize(n) {
        return Ok(LpResult::without(LpStatus::Unbounded));
    }

    let mut x = vec![Rational::zero(); n];
    for (row, &b) in t.rows.iter().zip(&t.basis) {
        x[b] = row[width - 1].clone();
    }
    debug_assert!(lp.is_feasible(&x));
    Ok(LpResult {
        status: LpStatus::Optimal,
        value: Some(lp.objective_at(&x)),
        witness: Some(x),
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Independent rows of `[A | b]` by exact elimination; `None` if inconsistent.
fn independent_rows(eq: &[Equality], n: usize) -> Option<Vec<Vec<Rational>>> {
    let mut rows: Vec<Vec<Rational>> = eq
        .iter()
        .map(|e| e.a.iter().cloned().chain([e.b.clone()]).collect())
        .collect();
    let mut rank = 0;
    for c in 0..n {
        let Some(p) = (rank..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = rows[rank][c].recip();
        for v in rows[rank].iter_mut() {
            *v *= &inv;
        }
        let pivot = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && !row[c].is_zero() {
                let f = row[c].clone();
                for (v, p) in row.iter_mut().zip(&pivot) {
                    *v -= &f * p;
                }
            }
        }
        rank += 1;
    }
    if rows[rank..].iter().any(|r| !r[n].is_zero()) {
        return None;
    }
    rows.truncate(rank);
    Some(rows)
}

/// Row scaled by the lcm of its denominators.
fn integer_row(row: &[Rational]) -> Vec<BigInt> {
    let lcm = row.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    row.iter().map(|v| v.numer() * (&lcm / v.denom())).collect()
}

fn det_i128(mut m: Vec<Vec<i128>>) -> Option<i128> {
    let n = m.len();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            let p = (k + 1..n).find(|&i| m[i][k] != 0)?;
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = m[i][j].checked_mul(m[k][k])?.checked_sub(m[i][k].checked_mul(m[k][j])?)?;
                m[i][j] = v / prev;
            }
        }
        prev = m[k][k];
    }
    Some(sign * prev)
}

fn det_big(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(p) => {
                    m.swap(k, p);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * prev
}

/// Columns `cols` of `a`, with position `replace` (if any) taken from the
/// right-hand side.
fn basis_matrix<V: Clone>(a: &[Vec<V>], cols: &[usize], replace: Option<usize>) -> Vec<Vec<V>> {
    a.iter()
        .map(|row| {
            cols.iter()
                .enumerate()
                .map(|(k, &c)| if Some(k) == replace { row[row.len() - 1].clone() } else { row[c].clone() })
                .collect()
        })
        .collect()
}

fn minor(big: &[Vec<BigInt>], small: Option<&[Vec<i128>]>, cols: &[usize], replace: Option<usize>) -> BigInt {
    if let Some(d) = small.and_then(|s| det_i128(basis_matrix(s, cols, replace))) {
        return BigInt::from(d);
    }
    det_big(basis_matrix(big, cols, replace))
}

/// Every basic feasible solution of `{x >= 0 : A x = b}`, sorted and
/// deduplicated. Brute force over column subsets of size `rank(A)`.
pub fn enumerate_vertices(eq: &[Equality], n: usize) -> Result<Vec<Vec<Rational>>, LpError> {
    enumerate_vertices_with(eq, n, Execution::default())
}

pub fn enumerate_vertices_with(eq: &[Equality], n: usize, exec: Execution) -> Result<Vec<Vec<Rational>>, LpError> {
    if n > MAX_ENUM_VARS || eq.len() > MAX_ENUM_ROWS {
        return Err(LpError::Size(format!(
            "{n} variables and {} rows exceed {MAX_ENUM_VARS} and {MAX_ENUM_ROWS}",
            eq.len()
        )));
    }
    if let Some(e) = eq.iter().find(|e| e.a.len() != n) {
        return Err(LpError::Malformed(format!("row has {} entries, expected {n}", e.a.len())));
    }
    let Some(rows) = independent_rows(eq, n) else {
        return Ok(Vec::new());
    };
    let r = rows.len();
    if r == 0 {
        return Ok(vec![vec![Rational::zero(); n]]);
    }
    let bases = binomial(n, r);
    if bases > MAX_ENUM_BASES {
        return Err(LpError::Size(format!("{bases} candidate bases exceed {MAX_ENUM_BASES}")));
    }
    let big: Vec<Vec<BigInt>> = rows.iter().map(|row| integer_row(row)).collect();
    let small: Option<Vec<Vec<i128>>> = big
        .iter()
        .map(|row| row.iter().map(|v| v.to_i64().map(i128::from)).collect::<Option<Vec<_>>>())
        .collect();

    // Split the search by the first column of each subset.
    let chunks = exec.map_range(n - r + 1, |first| {
        let mut found = Vec::new();
        for rest in crate::graph::Combinations::new(n - first - 1, r - 1) {
            let cols: Vec<usize> = std::iter::once(first).chain(rest.iter().map(|c| c + first + 1)).collect();
            let det = minor(&big, small.as_deref(), &cols, None);
            if det.is_zero() {
                continue;
            }
            let mut x = vec![Rational::zero(); n];
            let mut feasible = true;
            for (k, &c) in cols.iter().enumerate() {
                let num = minor(&big, small.as_deref(), &cols, Some(k));
                if !num.is_zero() && num.is_negative() != det.is_negative() {
                    feasible = false;
                    break;
                }
                x[c] = Rational::new(num, det.clone());
            }
            if feasible {
                found.push(x);
            }
        }
        found
    });
    let set: BTreeSet<Vec<Rational>> = chunks.into_iter().flatten().collect();
    Ok(set.into_iter().collect())
}

/// Optimum over enumerated vertices. Only meaningful for bounded programs.
pub fn optimize_by_enumeration(lp: &LinearProgram) -> Result<LpResult, LpError> {
    lp.validate()?;
    let vertices = enumerate_vertices(&lp.eq, lp.n)?;
    let better = |a: &Rational, b: &Rational| match lp.sense {
        Sense::Min => a < b,
        Sense::Max => a > b,
    };
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    for v in vertices {
        let val = lp.objective_at(&v);
        if best.as_ref().is_none_or(|(b, _)| better(&val, b)) {
            best = Some((val, v));
        }
    }
    Ok(match best {
        Some((value, x)) => LpResult {
            status: LpStatus::Optimal,
            value: Some(value),
            witness: Some(x),
        },
        None => LpResult::without(LpStatus::Infeasible),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn row(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn simplex_vertex() {
        let mut lp = LinearProgram::new(3, row(&[1, 0, 0]), Sense::Max);
        lp.push_eq(row(&[1, 1, 1]), int(1));
        let r = solve(&lp).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.value, Some(int(1)));
        assert_eq!(r.witness, Some(row(&[1, 0, 0])));
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new(2, row(&[1, 0]), Sense::Min);
        lp.push_eq(row(&[1, 0]), int(1));
        lp.push_eq(row(&[1, 0]), int(0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
        assert!(enumerate_vertices(&lp.eq, 2).unwrap().is_empty());
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(2, row(&[1, 0]), Sense::Max);
        lp.push_eq(row(&[1, -1]), int(0));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        let mut lp = LinearProgram::new(3, row(&[2, -1, 3]), Sense::Min);
        lp.push_eq(row(&[1, 1, 1]), int(1));
        lp.push_eq(row(&[-2, -2, -2]), int(-2));
        lp.push_eq(row(&[1, 0, -1]), ratio(1, 3));
        let r = solve(&lp).unwrap();
        assert_eq!(r.value, optimize_by_enumeration(&lp).unwrap().value);
        assert!(lp.is_feasible(r.witness.as_ref().unwrap()));
    }

    #[test]
    fn simplex_and_square_vertices() {
        assert_eq!(
            enumerate_vertices(&[Equality { a: row(&[1, 1, 1]), b: int(1) }], 3).unwrap(),
            vec![row(&[0, 0, 1]), row(&[0, 1, 0]), row(&[1, 0, 0])]
        );
        // x + s = 1, y + t = 1
        let eq = [
            Equality { a: row(&[1, 0, 1, 0]), b: int(1) },
            Equality { a: row(&[0, 1, 0, 1]), b: int(1) },
        ];
        assert_eq!(enumerate_vertices(&eq, 4).unwrap().len(), 4);
    }

    #[test]
    fn size_limits() {
        let eq = [Equality { a: vec![int(1); 65], b: int(1) }];
        assert!(matches!(enumerate_vertices(&eq, 65), Err(LpError::Size(_))));
        let eq: Vec<Equality> = (0..10)
            .map(|i| Equality { a: (0..60).map(|j| int(((i * 7 + j * 3) % 5) as i64)).collect(), b: int(1) })
            .collect();
        assert!(matches!(enumerate_vertices(&eq, 60), Err(LpError::Size(_))));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n":2,"eq":[{"a":["1/4","0.75"],"b":"1"}],"obj":["1",0],"sense":"max"}"#;
        let lp = LinearProgram::parse_json(text).unwrap();
        assert_eq!(lp.eq[0].a, vec![ratio(1, 4), ratio(3, 4)]);
        assert_eq!(LinearProgram::parse_json(&lp.to_json()).unwrap(), lp);
        assert!(matches!(
            LinearProgram::parse_json(r#"{"n":3,"eq":[],"obj":["1"],"sense":"min"}"#),
            Err(LpError::Malformed(_))
        ));
    }

    #[test]
    fn big_entries_fall_back_to_bigint() {
        let huge = Rational::new(BigInt::from(10).pow(30u32) + 1, BigInt::from(10).pow(30u32));
        let eq = [Equality { a: vec![huge.clone(), int(1)], b: int(2) }];
        let v = enumerate_vertices(&eq, 2).unwrap();
        assert_eq!(v, vec![vec![int(0), int(2)], vec![int(2) / huge, int(0)]]);
    }
}
