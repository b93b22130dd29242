//! Dense joint probability tables over named discrete variables.

use std::collections::HashSet;
use std::fmt::Debug;

use num_traits::{Num, Signed};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::rational::{self, format_rational, Rational};

/// Tolerance on total mass for floating-point tables.
pub const FLOAT_MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("format error: {0}")]
    Format(String),
    #[error("all counts are zero")]
    EmptyData,
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("variable {var:?} has no category {label:?}")]
    UnknownCategory { var: String, label: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("negative probability mass at cell {0}")]
    NegativeMass(usize),
    #[error("total mass is {0}, expected 1")]
    NotNormalized(String),
    #[error("conditioning event has zero probability: {0}")]
    ZeroMass(String),
}

/// Scalar usable as a probability: exact rationals or binary floats.
pub trait Prob: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    fn to_f64(&self) -> f64;
    fn from_rational(r: &Rational) -> Self;
    /// Whether a total mass is acceptably equal to one for this arithmetic.
    fn is_unit_mass(total: &Self) -> bool;
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Option<Self>;
}

impl Prob for f64 {
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_rational(r: &Rational) -> Self {
        rational::to_f64(r)
    }
    fn is_unit_mass(total: &Self) -> bool {
        (total - 1.0).abs() <= FLOAT_MASS_TOL
    }
    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self).map_or(Value::Null, Value::Number)
    }
    fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => rational::parse_rational(s).ok().map(|r| rational::to_f64(&r)),
            _ => None,
        }
    }
}

impl Prob for Rational {
    fn to_f64(&self) -> f64 {
        rational::to_f64(self)
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn is_unit_mass(total: &Self) -> bool {
        num_traits::One::is_one(total)
    }
    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }
    fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::String(s) => rational::parse_rational(s).ok(),
            Value::Number(n) => rational::parse_rational(&n.to_string()).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub categories: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Variable {
            name: name.into(),
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    pub fn card(&self) -> usize {
        self.categories.len()
    }

    pub fn index_of(&self, label: &str) -> Result<usize, TableError> {
        self.categories
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| TableError::UnknownCategory {
                var: self.name.clone(),
                label: label.to_string(),
            })
    }

    fn validate(&self) -> Result<(), TableError> {
        if self.name.is_empty() {
            return Err(TableError::InvalidSchema("empty variable name".into()));
        }
        if self.categories.len() < 2 {
            return Err(TableError::InvalidSchema(format!(
                "variable {:?} needs at least two categories",
                self.name
            )));
        }
        let mut seen = HashSet::new();
        for c in &self.categories {
            if !seen.insert(c) {
                return Err(TableError::InvalidSchema(format!(
                    "variable {:?} repeats category {c:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Partial assignment of category labels to variables.
pub type Assignment<'a> = [(&'a str, &'a str)];

/// Row-major dense table; the last variable varies fastest.
///
/// A table over zero variables holds a single cell of mass one.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable<T = Rational> {
    vars: Vec<Variable>,
    probs: Vec<T>,
}

impl<T: Prob> JointTable<T> {
    pub fn new(vars: Vec<Variable>, probs: Vec<T>) -> Result<Self, TableError> {
        let mut names = HashSet::new();
        for v in &vars {
            v.validate()?;
            if !names.insert(v.name.as_str()) {
                return Err(TableError::InvalidSchema(format!("duplicate variable {:?}", v.name)));
            }
        }
        let size: usize = vars.iter().map(Variable::card).product();
        if probs.len() != size {
            return Err(TableError::Format(format!(
                "expected {size} cells, got {}",
                probs.len()
            )));
        }
        if let Some(i) = probs.iter().position(|p| p.is_negative()) {
            return Err(TableError::NegativeMass(i));
        }
        let total = probs.iter().fold(T::zero(), |acc, p| acc + p.clone());
        if !T::is_unit_mass(&total) {
            return Err(TableError::NotNormalized(format!("{total:?}")));
        }
        Ok(JointTable { vars, probs })
    }

    /// Builds a table from non-negative weights, dividing by their sum.
    pub fn from_weights(vars: Vec<Variable>, weights: Vec<T>) -> Result<Self, TableError> {
        let total = weights.iter().fold(T::zero(), |acc, p| acc + p.clone());
        if total.is_zero() {
            return Err(TableError::EmptyData);
        }
        if let Some(i) = weights.iter().position(|p| p.is_negative()) {
            return Err(TableError::NegativeMass(i));
        }
        let probs = weights.into_iter().map(|w| w / total.clone()).collect();
        Self::new(vars, probs)
    }

    /// Fills every cell from a function of its category indices.
    pub fn from_fn(vars: Vec<Variable>, mut f: impl FnMut(&[usize]) -> T) -> Result<Self, TableError> {
        let shape: Vec<usize> = vars.iter().map(Variable::card).collect();
        let probs = Odometer::new(&shape).map(|idx| f(&idx)).collect();
        Self::new(vars, probs)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn variable(&self, name: &str) -> Result<&Variable, TableError> {
        Ok(&self.vars[self.position(name)?])
    }

    pub fn names(&self) -> Vec<&str> {
        self.vars.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn shape(&self) -> Vec<usize> {
        self.vars.iter().map(Variable::card).collect()
    }

    pub fn position(&self, name: &str) -> Result<usize, TableError> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| TableError::UnknownVariable(name.to_string()))
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v.name == name)
    }

    fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape())
    }

    /// Cell value at a full multi-index.
    pub fn get(&self, index: &[usize]) -> &T {
        let flat: usize = index.iter().zip(self.strides()).map(|(i, s)| i * s).sum();
        &self.probs[flat]
    }

    /// Iterates `(multi-index, mass)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, &T)> + '_ {
        Odometer::new(&self.shape()).zip(self.probs.iter())
    }

    pub fn total(&self) -> T {
        self.probs.iter().fold(T::zero(), |acc, p| acc + p.clone())
    }

    /// Resolves `(variable, label)` pairs to `(position, category index)`.
    pub fn resolve(&self, assignment: &Assignment<'_>) -> Result<Vec<(usize, usize)>, TableError> {
        let mut seen = HashSet::new();
        assignment
            .iter()
            .map(|(name, label)| {
                let pos = self.position(name)?;
                if !seen.insert(pos) {
                    return Err(TableError::Format(format!("variable {name:?} assigned twice")));
                }
                Ok((pos, self.vars[pos].index_of(label)?))
            })
            .collect()
    }

    /// Sums out every variable not listed; the result keeps the listed order.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<JointTable<T>, TableError> {
        let positions = keep
            .iter()
            .map(|n| self.position(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = HashSet::new();
        if !positions.iter().all(|p| seen.insert(*p)) {
            return Err(TableError::Format("duplicate variable in marginal".into()));
        }
        let vars: Vec<Variable> = positions.iter().map(|&p| self.vars[p].clone()).collect();
        let out_strides = strides_of(&vars.iter().map(Variable::card).collect::<Vec<_>>());
        let mut out = vec![T::zero(); vars.iter().map(Variable::card).product()];
        for (idx, p) in self.cells() {
            let flat: usize = positions.iter().zip(&out_strides).map(|(&pos, s)| idx[pos] * s).sum();
            out[flat] = out[flat].clone() + p.clone();
        }
        Ok(JointTable { vars, probs: out })
    }

    /// Probability of a partial assignment.
    pub fn mass(&self, assignment: &Assignment<'_>) -> Result<T, TableError> {
        let fixed = self.resolve(assignment)?;
        Ok(self
            .cells()
            .filter(|(idx, _)| fixed.iter().all(|&(pos, cat)| idx[pos] == cat))
            .fold(T::zero(), |acc, (_, p)| acc + p.clone()))
    }

    /// Conditional table over the unassigned variables.
    pub fn condition(&self, assignment: &Assignment<'_>) -> Result<JointTable<T>, TableError> {
        let fixed = self.resolve(assignment)?;
        let rest: Vec<usize> = (0..self.vars.len())
            .filter(|p| !fixed.iter().any(|(q, _)| q == p))
            .collect();
        let vars: Vec<Variable> = rest.iter().map(|&p| self.vars[p].clone()).collect();
        let out_strides = strides_of(&vars.iter().map(Variable::card).collect::<Vec<_>>());
        let mut out = vec![T::zero(); vars.iter().map(Variable::card).product()];
        let mut total = T::zero();
        for (idx, p) in self.cells() {
            if fixed.iter().all(|&(pos, cat)| idx[pos] == cat) {
                let flat: usize = rest.iter().zip(&out_strides).map(|(&pos, s)| idx[pos] * s).sum();
                out[flat] = out[flat].clone() + p.clone();
                total = total + p.clone();
            }
        }
        if total.is_zero() {
            return Err(TableError::ZeroMass(describe(assignment)));
        }
        let probs = out.into_iter().map(|p| p / total.clone()).collect();
        Ok(JointTable { vars, probs })
    }

    /// Mass of a single category in a one-variable table.
    pub fn prob_of(&self, label: &str) -> Result<T, TableError> {
        if self.vars.len() != 1 {
            return Err(TableError::Format("prob_of expects a single-variable table".into()));
        }
        Ok(self.probs[self.vars[0].index_of(label)?].clone())
    }

    pub fn map_probs<U: Prob>(&self, f: impl Fn(&T) -> U) -> JointTable<U> {
        JointTable {
            vars: self.vars.clone(),
            probs: self.probs.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> JointTable<f64> {
        self.map_probs(Prob::to_f64)
    }

    /// Total-variation distance to a table with the same schema.
    pub fn total_variation<U: Prob>(&self, other: &JointTable<U>) -> Result<f64, TableError> {
        if self.vars != other.vars {
            return Err(TableError::InvalidSchema("tables have different schemas".into()));
        }
        let sum: f64 = self.probs.iter().zip(&other.probs).map(|(a, b)| (a.to_f64() - b.to_f64()).abs()).sum();
        Ok(sum / 2.0)
    }

    /// Reorders the variables (a permutation of the current names).
    pub fn reorder<S: AsRef<str>>(&self, order: &[S]) -> Result<JointTable<T>, TableError> {
        if order.len() != self.vars.len() {
            return Err(TableError::Format("reorder needs every variable exactly once".into()));
        }
        self.marginal(order)
    }

    pub fn to_json(&self) -> TableJson {
        TableJson {
            variables: self.vars.clone(),
            probs: self.probs.iter().map(Prob::to_json).collect(),
        }
    }

    pub fn from_json(json: &TableJson) -> Result<Self, TableError> {
        let probs = json
            .probs
            .iter()
            .map(|v| T::from_json(v).ok_or_else(|| TableError::Format(format!("bad probability {v}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(json.variables.clone(), probs)
    }
}

/// Serialized table: declared schema plus a flat row-major probability list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableJson {
    pub variables: Vec<Variable>,
    pub probs: Vec<Value>,
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

fn describe(assignment: &Assignment<'_>) -> String {
    assignment
        .iter()
        .map(|(n, l)| format!("{n}={l}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Row-major enumeration of all multi-indices of a shape.
#[derive(Debug, Clone)]
pub struct Odometer {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Odometer {
    pub fn new(shape: &[usize]) -> Self {
        let next = if shape.contains(&0) {
            None
        } else {
            Some(vec![0; shape.len()])
        };
        Odometer { shape: shape.to_vec(), next }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.shape[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn xy() -> JointTable {
        JointTable::new(
            vec![Variable::new("X", ["x0", "x1"]), Variable::new("Y", ["y0", "y1"])],
            vec![ratio(1, 10), ratio(2, 10), ratio(3, 10), ratio(4, 10)],
        )
        .unwrap()
    }

    #[test]
    fn odometer_is_row_major() {
        let all: Vec<_> = Odometer::new(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        assert_eq!(Odometer::new(&[]).count(), 1);
    }

    #[test]
    fn rejects_bad_tables() {
        let v = || vec![Variable::new("X", ["a", "b"])];
        assert!(matches!(
            JointTable::new(v(), vec![ratio(1, 2), ratio(1, 3)]),
            Err(TableError::NotNormalized(_))
        ));
        assert!(matches!(
            JointTable::new(v(), vec![ratio(3, 2), ratio(-1, 2)]),
            Err(TableError::NegativeMass(1))
        ));
        assert!(matches!(
            JointTable::<f64>::new(vec![Variable::new("X", ["a"])], vec![1.0]),
            Err(TableError::InvalidSchema(_))
        ));
        assert!(matches!(
            JointTable::<f64>::new(vec![Variable::new("X", ["a", "a"])], vec![0.5, 0.5]),
            Err(TableError::InvalidSchema(_))
        ));
    }

    #[test]
    fn marginal_and_condition() {
        let t = xy();
        let y = t.marginal(&["Y"]).unwrap();
        assert_eq!(y.probs(), &[ratio(4, 10), ratio(6, 10)]);
        let yx = t.marginal(&["Y", "X"]).unwrap();
        assert_eq!(yx.probs(), &[ratio(1, 10), ratio(3, 10), ratio(2, 10), ratio(4, 10)]);
        assert_eq!(t.marginal(&["X", "Y"]).unwrap(), t);
        let c = t.condition(&[("X", "x1")]).unwrap();
        assert_eq!(c.prob_of("y1").unwrap(), ratio(4, 7));
        let point = t.condition(&[("X", "x0"), ("Y", "y1")]).unwrap();
        assert_eq!(point.probs(), &[ratio(1, 1)]);
        assert_eq!(t.mass(&[("Y", "y1")]).unwrap(), ratio(6, 10));
    }

    #[test]
    fn zero_mass_condition_fails() {
        let t = JointTable::new(
            vec![Variable::new("X", ["x0", "x1"])],
            vec![ratio(1, 1), ratio(0, 1)],
        )
        .unwrap();
        assert!(matches!(t.condition(&[("X", "x1")]), Err(TableError::ZeroMass(_))));
        assert!(matches!(t.condition(&[("W", "x1")]), Err(TableError::UnknownVariable(_))));
    }

    #[test]
    fn json_round_trip() {
        let t = xy();
        let back = JointTable::<Rational>::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        let f = t.to_f64();
        assert_eq!(JointTable::<f64>::from_json(&f.to_json()).unwrap(), f);
    }
}
