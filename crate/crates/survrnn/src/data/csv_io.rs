//! CSV ingestion and emission.
//!
//! Files are UTF-8, comma-separated, header required. The event-time cell is
//! empty for censored rows. Floats are written in shortest round-trip form,
//! so write-then-load reproduces a dataset exactly.

use super::encode::{fit_encoder, Encoder};
use super::schema::CsvSchema;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::sample::{Dataset, Sample};
use std::io::Write;
use std::path::Path;

/// Loads a CSV according to `schema`, fitting the categorical vocabulary on
/// this file (first-occurrence order). The grid is taken from the schema, or
/// sized to the largest observed time when `num_intervals` is omitted.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Dataset, Encoder)> {
    let path = path.as_ref();
    let rows = read_rows(path, schema.event_time_column.as_deref().is_some(), schema)?;

    let encoder = fit_encoder(
        &schema.time_column,
        schema.event_time_column.as_deref(),
        &schema.numerical,
        &schema.categorical,
        rows.iter().map(|r| r.categorical.clone()),
    );

    let grid = match schema.num_intervals {
        Some(l) => TimeGrid::new(schema.interval_size, l)?,
        None => {
            let max_t = rows
                .iter()
                .map(|r| r.time)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut l = ((max_t / schema.interval_size).ceil() as usize).max(1);
            if (l as f64) * schema.interval_size < max_t {
                l += 1;
            }
            TimeGrid::new(schema.interval_size, l)?
        }
    };

    let dataset = build_dataset(path, rows, &encoder, &grid)?;
    Ok((dataset, encoder))
}

/// Loads a CSV with a previously fitted encoder (vocabulary frozen; unseen
/// categorical values map to the out-of-vocabulary index) and a fixed grid.
pub fn load_csv_with_encoder(
    path: impl AsRef<Path>,
    encoder: &Encoder,
    grid: &TimeGrid,
) -> Result<Dataset> {
    let path = path.as_ref();
    let schema = CsvSchema {
        time_column: encoder.time_column.clone(),
        event_time_column: encoder.event_time_column.clone(),
        numerical: encoder.numerical.clone(),
        categorical: encoder.categorical.iter().map(|c| c.name.clone()).collect(),
        interval_size: grid.interval_size(),
        num_intervals: Some(grid.num_intervals()),
    };
    let rows = read_rows(path, encoder.event_time_column.is_some(), &schema)?;
    build_dataset(path, rows, encoder, grid)
}

/// Writes a dataset as dense numeric columns `f0..f{dim-1}`, `t`, `z`
/// (empty `z` for censored rows).
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let dim = dataset.feature_dim();
    for i in 0..dim {
        write!(out, "f{i},")?;
    }
    writeln!(out, "t,z")?;
    for sample in dataset.samples() {
        for v in sample.features().to_dense(dim) {
            write!(out, "{v},")?;
        }
        write!(out, "{}", sample.observed_time())?;
        match sample.event_time() {
            Some(z) => writeln!(out, ",{z}")?,
            None => writeln!(out, ",")?,
        }
    }
    out.flush()?;
    Ok(())
}

/// The schema matching [`write_csv`] output for a given dataset.
pub fn written_schema(dataset: &Dataset) -> CsvSchema {
    CsvSchema {
        time_column: "t".into(),
        event_time_column: Some("z".into()),
        numerical: (0..dataset.feature_dim()).map(|i| format!("f{i}")).collect(),
        categorical: Vec::new(),
        interval_size: dataset.grid().interval_size(),
        num_intervals: Some(dataset.grid().num_intervals()),
    }
}

struct RawRow {
    line: usize,
    numerical: Vec<String>,
    categorical: Vec<String>,
    time: f64,
    event_time: Option<f64>,
}

fn read_rows(path: &Path, expect_event_column: bool, schema: &CsvSchema) -> Result<Vec<RawRow>> {
    let csv_err = |line: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(0, e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| csv_err(1, e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(csv_err(0, "empty file".into()));
    }
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(1, format!("missing required column `{name}`")))
    };

    let time_idx = column(&schema.time_column)?;
    let event_idx = match (&schema.event_time_column, expect_event_column) {
        (Some(name), _) => Some(column(name)?),
        (None, _) => None,
    };
    let numerical_idx: Vec<usize> = schema
        .numerical
        .iter()
        .map(|n| column(n))
        .collect::<Result<_>>()?;
    let categorical_idx: Vec<usize> = schema
        .categorical
        .iter()
        .map(|n| column(n))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(0, e.to_string()))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        let cell = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| csv_err(line, format!("row has only {} cells", record.len())))
        };

        let time_text = cell(time_idx)?;
        let time: f64 = time_text.parse().map_err(|_| {
            csv_err(line, format!("non-numeric time `{time_text}`"))
        })?;
        let event_time = match event_idx {
            Some(idx) => {
                let text = cell(idx)?;
                if text.is_empty() {
                    None
                } else {
                    Some(text.parse::<f64>().map_err(|_| {
                        csv_err(line, format!("non-numeric event time `{text}`"))
                    })?)
                }
            }
            None => None,
        };

        rows.push(RawRow {
            line,
            numerical: numerical_idx
                .iter()
                .map(|&i| cell(i).map(str::to_string))
                .collect::<Result<_>>()?,
            categorical: categorical_idx
                .iter()
                .map(|&i| cell(i).map(str::to_string))
                .collect::<Result<_>>()?,
            time,
            event_time,
        });
    }
    if rows.is_empty() {
        return Err(csv_err(0, "empty file (no data rows)".into()));
    }
    Ok(rows)
}

fn build_dataset(
    path: &Path,
    rows: Vec<RawRow>,
    encoder: &Encoder,
    grid: &TimeGrid,
) -> Result<Dataset> {
    let mut samples = Vec::with_capacity(rows.len());
    for row in rows {
        let numerical: Vec<&str> = row.numerical.iter().map(String::as_str).collect();
        let categorical: Vec<&str> = row.categorical.iter().map(String::as_str).collect();
        let with_line = |e: Error| Error::Csv {
            path: path.to_path_buf(),
            line: row.line,
            message: e.to_string(),
        };
        let features = encoder
            .encode(&numerical, &categorical)
            .map_err(with_line)?;
        samples.push(Sample::new(features, row.time, row.event_time).map_err(with_line)?);
    }
    Dataset::new(samples, encoder.feature_dim(), *grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn mixed_schema() -> CsvSchema {
        CsvSchema::parse(
            "time = t\nevent_time = z\nnumerical = age\ncategorical = sex\nnum_intervals = 8\n",
        )
        .unwrap()
    }

    #[test]
    fn loads_uncensored_and_censored_rows() {
        let file = write_temp("sex,age,t,z\nF,0.7,5,3\nM,0.2,5,\n");
        let (ds, enc) = load_csv(file.path(), &mixed_schema()).unwrap();
        assert_eq!(ds.len(), 2);
        // 1 numerical + one-hot block of 2 values + OOV slot.
        assert_eq!(enc.feature_dim(), 4);

        let s0 = &ds.samples()[0];
        assert!(!s0.is_censored());
        assert_eq!(s0.event_time(), Some(3.0));
        assert_eq!(s0.observed_time(), 5.0);

        let s1 = &ds.samples()[1];
        assert!(s1.is_censored());
        assert_eq!(s1.event_time(), None);
    }

    #[test]
    fn rejects_event_after_window() {
        let file = write_temp("sex,age,t,z\nF,0.7,5,7\n");
        let err = load_csv(file.path(), &mixed_schema()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_missing_column_and_bad_numbers() {
        let schema = mixed_schema();
        let file = write_temp("sex,age,t\nF,0.7,5\n");
        assert!(load_csv(file.path(), &schema).is_err());

        let file = write_temp("sex,age,t,z\nF,0.7,soon,\n");
        let err = load_csv(file.path(), &schema).unwrap_err();
        assert!(err.to_string().contains("non-numeric time"), "{err}");

        let file = write_temp("sex,age,t,z\nF,not_a_number,5,\n");
        assert!(load_csv(file.path(), &schema).is_err());
    }

    #[test]
    fn rejects_empty_file() {
        let schema = mixed_schema();
        let file = write_temp("");
        assert!(load_csv(file.path(), &schema).is_err());
        let file = write_temp("sex,age,t,z\n");
        assert!(load_csv(file.path(), &schema).is_err());
    }

    #[test]
    fn grid_derived_from_data_when_unspecified() {
        let schema =
            CsvSchema::parse("time = t\nevent_time = z\nnumerical = age\n").unwrap();
        let file = write_temp("age,t,z\n0.5,7.3,\n0.5,2.0,1.0\n");
        let (ds, _) = load_csv(file.path(), &schema).unwrap();
        assert_eq!(ds.grid().num_intervals(), 8);
        assert_eq!(ds.grid().interval_size(), 1.0);
    }

    #[test]
    fn frozen_encoder_maps_unseen_to_oov() {
        let schema = mixed_schema();
        let train = write_temp("sex,age,t,z\nF,0.7,5,3\nM,0.2,5,\n");
        let (ds, enc) = load_csv(train.path(), &schema).unwrap();

        let test = write_temp("sex,age,t,z\nX,0.1,4,2\n");
        let test_ds = load_csv_with_encoder(test.path(), &enc, ds.grid()).unwrap();
        // OOV slot of the sex block: numerical(1) + vocab(2) => index 3.
        assert_eq!(test_ds.samples()[0].features().pairs(), &[(0, 0.1), (3, 1.0)]);
    }

    #[test]
    fn write_then_load_is_identity() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let grid = TimeGrid::new(0.5, 16).unwrap();
        let samples: Vec<Sample> = (0..50)
            .map(|_| {
                let dense: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let t = rng.gen_range(0.01..grid.horizon());
                let z = if rng.gen_bool(0.5) {
                    Some(rng.gen_range(0.001..t))
                } else {
                    None
                };
                Sample::new(crate::sample::Features::from_dense(&dense).unwrap(), t, z).unwrap()
            })
            .collect();
        let ds = Dataset::new(samples, 5, grid).unwrap();

        let file = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, file.path()).unwrap();
        let schema = written_schema(&ds);
        let (reloaded, _) = load_csv(file.path(), &schema).unwrap();

        assert_eq!(reloaded.feature_dim(), ds.feature_dim());
        assert_eq!(reloaded.grid(), ds.grid());
        assert_eq!(reloaded.samples(), ds.samples());
    }
}
