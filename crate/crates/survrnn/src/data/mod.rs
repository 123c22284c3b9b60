//! Data ingestion and generation: CSV loading with schema-driven feature
//! encoding, train/test splitting, and a synthetic generator whose
//! ground-truth hazards are known exactly.

mod csv_io;
mod encode;
mod schema;
mod synthetic;

pub use csv_io::{load_csv, load_csv_with_encoder, write_csv, written_schema};
pub use encode::Encoder;
pub use schema::CsvSchema;
pub use synthetic::{synthesize, GroundTruth, SyntheticConfig, SynthReport};

use crate::error::{Error, Result};
use crate::sample::Dataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded shuffle split into disjoint, exhaustive train/test halves sharing
/// the feature space and grid. The test size is `floor(n * (1 - ratio))`.
pub fn split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must lie strictly between 0 and 1, got {ratio}"
        )));
    }
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split a dataset of {} sample(s)",
            dataset.len()
        )));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    // Small epsilon so ratios like 0.8 hit their intended integer sizes
    // despite binary representation (10 * (1 - 0.8) is 1.9999.. in f64).
    let test_size = (dataset.len() as f64 * (1.0 - ratio) + 1e-9).floor() as usize;
    let train_size = dataset.len() - test_size;

    let pick = |idx: &[usize]| -> Result<Dataset> {
        Dataset::new(
            idx.iter().map(|&i| dataset.samples()[i].clone()).collect(),
            dataset.feature_dim(),
            *dataset.grid(),
        )
    };
    Ok((pick(&indices[..train_size])?, pick(&indices[train_size..])?))
}
