//! Feature encoding: numerical columns pass through, categorical columns are
//! one-hot over a vocabulary built from the fitting data in first-occurrence
//! order. Each categorical block reserves one extra index for values unseen
//! at fit time, so prediction-time inputs always encode.

use crate::error::{Error, Result};
use crate::sample::Features;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    /// Values in first-occurrence order. The out-of-vocabulary index of the
    /// block is `vocab.len()`.
    pub vocab: Vec<String>,
}

/// Fitted mapping from raw column values to feature indices. The layout is
/// all numerical columns first, then one block of `vocab.len() + 1` indices
/// per categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub time_column: String,
    pub event_time_column: Option<String>,
    pub numerical: Vec<String>,
    pub categorical: Vec<CategoricalColumn>,
}

impl Encoder {
    pub fn feature_dim(&self) -> usize {
        self.numerical.len()
            + self
                .categorical
                .iter()
                .map(|c| c.vocab.len() + 1)
                .sum::<usize>()
    }

    /// Start index of categorical block `k`.
    fn block_offset(&self, k: usize) -> usize {
        self.numerical.len()
            + self.categorical[..k]
                .iter()
                .map(|c| c.vocab.len() + 1)
                .sum::<usize>()
    }

    /// Encodes one row given the raw cell text per declared column.
    /// `numerical_cells` and `categorical_cells` follow the encoder's column
    /// order. Unknown categorical values map to the block's OOV index.
    pub fn encode(&self, numerical_cells: &[&str], categorical_cells: &[&str]) -> Result<Features> {
        if numerical_cells.len() != self.numerical.len()
            || categorical_cells.len() != self.categorical.len()
        {
            return Err(Error::ShapeMismatch(format!(
                "row has {}/{} numerical/categorical cells, encoder expects {}/{}",
                numerical_cells.len(),
                categorical_cells.len(),
                self.numerical.len(),
                self.categorical.len()
            )));
        }
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for (i, (cell, name)) in numerical_cells.iter().zip(&self.numerical).enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("non-numeric value `{cell}` in column `{name}`"))
            })?;
            if value != 0.0 {
                pairs.push((i, value));
            }
        }
        for (k, (cell, column)) in categorical_cells.iter().zip(&self.categorical).enumerate() {
            let local = column
                .vocab
                .iter()
                .position(|v| v == cell.trim())
                .unwrap_or(column.vocab.len());
            pairs.push((self.block_offset(k) + local, 1.0));
        }
        Features::new(pairs)
    }
}

/// Builds an encoder from raw rows: numerical columns are recorded as-is,
/// categorical vocabularies in first-occurrence order over the rows.
pub fn fit_encoder(
    time_column: &str,
    event_time_column: Option<&str>,
    numerical: &[String],
    categorical: &[String],
    categorical_rows: impl Iterator<Item = Vec<String>>,
) -> Encoder {
    let mut columns: Vec<CategoricalColumn> = categorical
        .iter()
        .map(|name| CategoricalColumn {
            name: name.clone(),
            vocab: Vec::new(),
        })
        .collect();
    for row in categorical_rows {
        for (column, value) in columns.iter_mut().zip(row) {
            let value = value.trim();
            if !column.vocab.iter().any(|v| v == value) {
                column.vocab.push(value.to_string());
            }
        }
    }
    Encoder {
        time_column: time_column.to_string(),
        event_time_column: event_time_column.map(str::to_string),
        numerical: numerical.to_vec(),
        categorical: columns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitted() -> Encoder {
        fit_encoder(
            "t",
            Some("z"),
            &["age".into()],
            &["sex".into(), "city".into()],
            vec![
                vec!["F".to_string(), "paris".to_string()],
                vec!["M".to_string(), "rome".to_string()],
                vec!["F".to_string(), "paris".to_string()],
            ]
            .into_iter(),
        )
    }

    #[test]
    fn vocabulary_in_first_occurrence_order() {
        let enc = fitted();
        assert_eq!(enc.categorical[0].vocab, vec!["F", "M"]);
        assert_eq!(enc.categorical[1].vocab, vec!["paris", "rome"]);
        // 1 numerical + (2+1) + (2+1)
        assert_eq!(enc.feature_dim(), 7);
    }

    #[test]
    fn encodes_known_and_oov_values() {
        let enc = fitted();
        let f = enc.encode(&["0.7"], &["M", "paris"]).unwrap();
        assert_eq!(f.pairs(), &[(0, 0.7), (2, 1.0), (4, 1.0)]);

        // Unseen city maps to the block's OOV slot (index 4+2 = 6).
        let f = enc.encode(&["0.0"], &["F", "tokyo"]).unwrap();
        assert_eq!(f.pairs(), &[(1, 1.0), (6, 1.0)]);
    }

    #[test]
    fn rejects_non_numeric_and_wrong_shape() {
        let enc = fitted();
        assert!(enc.encode(&["abc"], &["F", "paris"]).is_err());
        assert!(enc.encode(&["1.0"], &["F"]).is_err());
    }
}
