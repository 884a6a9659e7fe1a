//! Combining per-image predictions from several models, and aggregating
//! image rows to sequence rows.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::predictions::{Level, PredictionTable, RowKey};

/// Inputs to geometric means are clamped to `[GMEAN_FLOOR, 1]`.
pub const GMEAN_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombinerKind {
    /// Arithmetic mean in every category.
    Mean,
    /// Geometric mean in every category.
    Gmean,
    /// Geometric mean for the empty category, arithmetic mean for the animals.
    ClassAware,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 3] = [CombinerKind::Mean, CombinerKind::Gmean, CombinerKind::ClassAware];

    fn geometric_at(self, category: usize, empty_index: usize) -> bool {
        match self {
            CombinerKind::Mean => false,
            CombinerKind::Gmean => true,
            CombinerKind::ClassAware => category == empty_index,
        }
    }
}

impl fmt::Display for CombinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombinerKind::Mean => "mean",
            CombinerKind::Gmean => "gmean",
            CombinerKind::ClassAware => "class_aware",
        })
    }
}

impl FromStr for CombinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(CombinerKind::Mean),
            "gmean" => Ok(CombinerKind::Gmean),
            "class_aware" => Ok(CombinerKind::ClassAware),
            other => Err(Error::Config(format!("unknown combiner {other:?}"))),
        }
    }
}

fn check_tables(tables: &[PredictionTable], empty_index: usize) -> Result<&PredictionTable> {
    let first = tables.first().ok_or(Error::EmptyTableList)?;
    for t in &tables[1..] {
        first.check_compatible(t)?;
    }
    if empty_index >= first.categories().len() {
        return Err(Error::Vocabulary(format!(
            "empty index {empty_index} out of range for {} categories",
            first.categories().len()
        )));
    }
    Ok(first)
}

fn combine_with(tables: &[PredictionTable], weights: &[f64], kind: CombinerKind, empty_index: usize) -> Result<PredictionTable> {
    let first = check_tables(tables, empty_index)?;
    let mut out = PredictionTable::new(first.categories().to_vec(), first.level());
    let mut columns: Vec<&[f64]> = Vec::with_capacity(tables.len());
    for key in first.keys() {
        columns.clear();
        columns.extend(tables.iter().map(|t| t.get(key).expect("key sets checked")));
        let combined = (0..first.categories().len())
            .map(|c| {
                if kind.geometric_at(c, empty_index) {
                    weighted_gmean(columns.iter().map(|row| row[c]), weights)
                } else {
                    let sum: f64 = columns.iter().zip(weights).map(|(row, w)| w * row[c]).sum();
                    sum.clamp(0.0, 1.0)
                }
            })
            .collect();
        out.push(key.clone(), combined)?;
    }
    Ok(out)
}

/// `exp(sum w_i ln x_i)` over inputs clamped to `[GMEAN_FLOOR, 1]`.
///
/// Equal inputs return that value exactly, and the result never exceeds the
/// weighted arithmetic mean of the clamped inputs, so rounding in `exp`/`ln`
/// cannot break the AM-GM ordering.
fn weighted_gmean(values: impl Iterator<Item = f64> + Clone, weights: &[f64]) -> f64 {
    let clamped = values.map(|v| v.clamp(GMEAN_FLOOR, 1.0));
    let mut active = clamped.clone().zip(weights).filter(|(_, w)| **w > 0.0).map(|(v, _)| v);
    if let Some(first) = active.next() {
        if active.all(|v| v == first) {
            return first;
        }
    }
    let log_sum: f64 = clamped.clone().zip(weights).map(|(v, w)| w * v.ln()).sum();
    let arithmetic: f64 = clamped.zip(weights).map(|(v, w)| w * v).sum();
    log_sum.exp().min(arithmetic).clamp(0.0, 1.0)
}

/// Unweighted combination of tables sharing keys and categories.
pub fn combine(tables: &[PredictionTable], kind: CombinerKind, empty_index: usize) -> Result<PredictionTable> {
    if tables.is_empty() {
        return Err(Error::EmptyTableList);
    }
    if tables.len() == 1 {
        check_tables(tables, empty_index)?;
        return Ok(tables[0].clone());
    }
    let w = vec![1.0 / tables.len() as f64; tables.len()];
    combine_with(tables, &w, kind, empty_index)
}

/// Weighted arithmetic / geometric means; weights must be non-negative and sum to 1.
pub fn weighted_combine(tables: &[PredictionTable], weights: &[f64], kind: CombinerKind, empty_index: usize) -> Result<PredictionTable> {
    if tables.is_empty() {
        return Err(Error::EmptyTableList);
    }
    if weights.len() != tables.len() {
        return Err(Error::WeightMismatch {
            weights: weights.len(),
            tables: tables.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::BadWeights(format!("{weights:?}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadWeights(format!("sum is {total}")));
    }
    combine_with(tables, weights, kind, empty_index)
}

/// Mean of each sequence's image rows; sequences keep first-appearance order.
pub fn aggregate_sequence(table: &PredictionTable) -> Result<PredictionTable> {
    if table.is_empty() {
        return Err(Error::EmptyTableList);
    }
    if table.level() == Level::Sequence {
        return Ok(table.clone());
    }
    let width = table.categories().len();
    let mut order: Vec<&str> = Vec::new();
    let mut sums: HashMap<&str, (Vec<f64>, usize)> = HashMap::new();
    for (key, values) in table.rows() {
        let entry = sums.entry(key.sequence_id.as_str()).or_insert_with(|| {
            order.push(key.sequence_id.as_str());
            (vec![0.0; width], 0)
        });
        entry.0.iter_mut().zip(values).for_each(|(s, v)| *s += v);
        entry.1 += 1;
    }
    let mut out = PredictionTable::new(table.categories().to_vec(), Level::Sequence);
    for seq in order {
        let (sum, n) = sums.remove(seq).expect("sequence recorded");
        let values = if n == 1 {
            sum
        } else {
            sum.into_iter().map(|s| (s / n as f64).clamp(0.0, 1.0)).collect()
        };
        out.push(RowKey::sequence(seq), values)?;
    }
    Ok(out)
}
