//! Attribution matrices and orderings.

use crate::error::{Error, Result};

/// Per-class, per-instance attribution values `φ[c][i]`.
///
/// Positive values mean instance `i` supports class `c`, negative values mean it
/// refutes it. Rows for classes that were not requested are absent (`None`),
/// which is distinct from a row of zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMatrix {
    method: String,
    bag_size: usize,
    rows: Vec<Option<Vec<f64>>>,
}

impl AttributionMatrix {
    pub fn new(method: impl Into<String>, num_classes: usize, bag_size: usize) -> Self {
        AttributionMatrix {
            method: method.into(),
            bag_size,
            rows: vec![None; num_classes],
        }
    }

    /// Sets the row for `class`. Values must be finite and have length `k`.
    pub fn set_row(&mut self, class: usize, values: Vec<f64>) -> Result<()> {
        if class >= self.rows.len() {
            return Err(Error::contract(format!(
                "class {class} out of range for {} classes",
                self.rows.len()
            )));
        }
        if values.len() != self.bag_size {
            return Err(Error::contract(format!(
                "attribution row of length {} for a bag of {} instances",
                values.len(),
                self.bag_size
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite attribution {v}")));
        }
        self.rows[class] = Some(values);
        Ok(())
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn num_classes(&self) -> usize {
        self.rows.len()
    }

    pub fn bag_size(&self) -> usize {
        self.bag_size
    }

    pub fn row(&self, class: usize) -> Option<&[f64]> {
        self.rows.get(class).and_then(|r| r.as_deref())
    }

    pub fn get(&self, class: usize, instance: usize) -> Option<f64> {
        self.row(class).map(|r| r[instance])
    }

    /// Classes with a computed row, ascending.
    pub fn present_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(c, r)| r.as_ref().map(|_| c))
    }
}

/// Indices that sort `values` non-increasingly; ties keep ascending index order.
pub fn argsort_descending(values: &[f64]) -> Result<Vec<usize>> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::contract("cannot order NaN values"));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // sort_by is stable, so equal values stay in index order
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    Ok(idx)
}

/// Converts an ordering (most important first) into ranks: `rank[order[p]] = p`.
pub fn ranks_from_order(order: &[usize]) -> Vec<usize> {
    let mut ranks = vec![0; order.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos;
    }
    ranks
}
