//! Schema files: plain `key = value` text declaring column roles.
//!
//! ```text
//! time = t
//! event_time = z
//! numerical = age,income
//! categorical = sex,city
//! interval_size = 1.0
//! num_intervals = 20
//! ```
//!
//! `event_time` is optional (omit it for data without event times);
//! `interval_size` defaults to 1 and `num_intervals`, when omitted, is derived
//! from the largest observed time in the loaded file. Lines starting with `#`
//! are comments.

use crate::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub time_column: String,
    pub event_time_column: Option<String>,
    pub numerical: Vec<String>,
    pub categorical: Vec<String>,
    pub interval_size: f64,
    pub num_intervals: Option<usize>,
}

impl CsvSchema {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut time_column = None;
        let mut event_time_column = None;
        let mut numerical = Vec::new();
        let mut categorical = Vec::new();
        let mut interval_size = 1.0;
        let mut num_intervals = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Schema(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "time" => time_column = Some(value.to_string()),
                "event_time" => {
                    if !value.is_empty() {
                        event_time_column = Some(value.to_string());
                    }
                }
                "numerical" => numerical = split_list(value),
                "categorical" => categorical = split_list(value),
                "interval_size" => {
                    interval_size = value.parse().map_err(|_| {
                        Error::Schema(format!("invalid interval_size `{value}`"))
                    })?;
                }
                "num_intervals" => {
                    num_intervals = Some(value.parse().map_err(|_| {
                        Error::Schema(format!("invalid num_intervals `{value}`"))
                    })?);
                }
                other => {
                    return Err(Error::Schema(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )));
                }
            }
        }

        let time_column =
            time_column.ok_or_else(|| Error::Schema("missing `time` column role".into()))?;
        if numerical.is_empty() && categorical.is_empty() {
            return Err(Error::Schema(
                "schema declares no feature columns (numerical or categorical)".into(),
            ));
        }
        if !(interval_size > 0.0) {
            return Err(Error::Schema(format!(
                "interval_size must be positive, got {interval_size}"
            )));
        }
        let mut all: Vec<&String> = numerical.iter().chain(&categorical).collect();
        all.push(&time_column);
        if let Some(z) = &event_time_column {
            all.push(z);
        }
        for (i, a) in all.iter().enumerate() {
            if all[i + 1..].contains(a) {
                return Err(Error::Schema(format!("column `{a}` declared twice")));
            }
        }
        Ok(Self {
            time_column,
            event_time_column,
            numerical,
            categorical,
            interval_size,
            num_intervals,
        })
    }

    /// Renders the schema back to the on-disk format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("time = {}\n", self.time_column));
        if let Some(z) = &self.event_time_column {
            out.push_str(&format!("event_time = {z}\n"));
        }
        if !self.numerical.is_empty() {
            out.push_str(&format!("numerical = {}\n", self.numerical.join(",")));
        }
        if !self.categorical.is_empty() {
            out.push_str(&format!("categorical = {}\n", self.categorical.join(",")));
        }
        out.push_str(&format!("interval_size = {}\n", self.interval_size));
        if let Some(l) = self.num_intervals {
            out.push_str(&format!("num_intervals = {l}\n"));
        }
        out
    }
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}
