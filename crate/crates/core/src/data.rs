//! CSV ingestion and export of joint tables.
//!
//! Layout: header `var1,...,varN,count` (or `prob`), one row per cell,
//! missing cells are zero. Without an explicit schema, category order is
//! the lexicographic order of the labels so that it never depends on row order.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::rational::{format_rational, parse_rational, to_exact_decimal, Rational};
use crate::table::{JointTable, Odometer, TableError, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueColumn {
    /// Non-negative integer counts, normalized to proportions.
    Count,
    /// Exact probabilities that must sum to one.
    Prob,
}

impl ValueColumn {
    fn header(self) -> &'static str {
        match self {
            ValueColumn::Count => "count",
            ValueColumn::Prob => "prob",
        }
    }
}

/// Loads a table whose last column is either `count` or `prob`.
pub fn load_csv<R: Read>(reader: R, schema: Option<&[Variable]>) -> Result<JointTable, TableError> {
    load(reader, None, schema)
}

pub fn load_counts<R: Read>(reader: R, schema: Option<&[Variable]>) -> Result<JointTable, TableError> {
    load(reader, Some(ValueColumn::Count), schema)
}

pub fn load_probs<R: Read>(reader: R, schema: Option<&[Variable]>) -> Result<JointTable, TableError> {
    load(reader, Some(ValueColumn::Prob), schema)
}

fn load<R: Read>(
    reader: R,
    expect: Option<ValueColumn>,
    schema: Option<&[Variable]>,
) -> Result<JointTable, TableError> {
    let fmt = |m: String| TableError::Format(m);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| fmt(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let (value_col, names) = match header.split_last() {
        Some((last, names)) if !names.is_empty() => {
            let kind = match last.as_str() {
                "count" => ValueColumn::Count,
                "prob" => ValueColumn::Prob,
                other => return Err(fmt(format!("last column must be `count` or `prob`, found {other:?}"))),
            };
            if let Some(want) = expect {
                if want != kind {
                    return Err(fmt(format!("expected a `{}` column", want.header())));
                }
            }
            (kind, names.to_vec())
        }
        _ => return Err(fmt("header needs at least one variable and a value column".into())),
    };

    let mut rows: Vec<(Vec<String>, Rational)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| fmt(e.to_string()))?;
        if record.len() != header.len() {
            return Err(fmt(format!("row has {} fields, expected {}", record.len(), header.len())));
        }
        let labels: Vec<String> = record.iter().take(names.len()).map(str::to_string).collect();
        if labels.iter().any(String::is_empty) {
            return Err(fmt("empty category label".into()));
        }
        let raw = &record[names.len()];
        let value = match value_col {
            ValueColumn::Count => {
                let n: BigInt = raw.parse().map_err(|_| fmt(format!("bad count {raw:?}")))?;
                Rational::from_integer(n)
            }
            ValueColumn::Prob => parse_rational(raw).map_err(|e| fmt(e.to_string()))?,
        };
        if value.is_negative() {
            return Err(fmt(format!("negative value {raw:?}")));
        }
        rows.push((labels, value));
    }

    let vars = match schema {
        Some(declared) => names
            .iter()
            .map(|n| {
                declared
                    .iter()
                    .find(|v| &v.name == n)
                    .cloned()
                    .ok_or_else(|| fmt(format!("schema does not declare column {n:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let labels: BTreeSet<&str> = rows.iter().map(|(l, _)| l[i].as_str()).collect();
                Variable::new(n.clone(), labels)
            })
            .collect(),
    };

    let shape: Vec<usize> = vars.iter().map(Variable::card).collect();
    let lookup: Vec<HashMap<&str, usize>> = vars
        .iter()
        .map(|v| v.categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect())
        .collect();
    let strides = crate::table::strides_of(&shape);
    let size: usize = shape.iter().product();
    let mut cells = vec![Rational::zero(); size];
    let mut filled = vec![false; size];
    for (labels, value) in rows {
        let mut flat = 0;
        for (i, label) in labels.iter().enumerate() {
            let cat = *lookup[i].get(label.as_str()).ok_or_else(|| TableError::UnknownCategory {
                var: vars[i].name.clone(),
                label: label.clone(),
            })?;
            flat += cat * strides[i];
        }
        if std::mem::replace(&mut filled[flat], true) {
            return Err(fmt(format!("duplicate row for cell {}", labels.join(","))));
        }
        cells[flat] = value;
    }

    let total = cells.iter().fold(Rational::zero(), |a, c| a + c);
    if total.is_zero() {
        return Err(TableError::EmptyData);
    }
    match value_col {
        ValueColumn::Count => JointTable::from_weights(vars, cells),
        ValueColumn::Prob if total.is_one() => JointTable::new(vars, cells),
        ValueColumn::Prob => Err(TableError::NotNormalized(format_rational(&total))),
    }
}

/// Writes every cell (zeros included) with a `prob` column. Values are exact
/// decimals when representable and `p/q` otherwise.
pub fn write_probs<W: Write>(table: &JointTable, writer: W) -> Result<(), TableError> {
    let io = |e: csv::Error| TableError::Format(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = table.names();
    header.push("prob");
    w.write_record(&header).map_err(io)?;
    for (idx, p) in Odometer::new(&table.shape()).zip(table.probs()) {
        let mut row: Vec<String> = idx
            .iter()
            .zip(table.variables())
            .map(|(&i, v)| v.categories[i].clone())
            .collect();
        row.push(to_exact_decimal(p).unwrap_or_else(|| format_rational(p)));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| TableError::Format(e.to_string()))
}
