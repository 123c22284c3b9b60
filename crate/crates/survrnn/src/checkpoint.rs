//! Versioned model checkpoints.
//!
//! A checkpoint is a self-describing JSON document: format version, grid,
//! feature encoder, model hyperparameters, shape-annotated flat parameter
//! tensors, and optional training state. Floats are written in shortest
//! round-trip form, so save/load reproduces parameters bit-exactly and
//! save/load/save is byte-identical.

use crate::data::Encoder;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::nn::{Matrix, ModelParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub epoch: usize,
    pub best_val_c_index: f64,
}

/// Everything stored alongside the raw tensors.
#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub grid: TimeGrid,
    pub encoder: Encoder,
    pub training_state: Option<TrainingState>,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    interval_size: f64,
    num_intervals: usize,
}

#[derive(Serialize, Deserialize)]
struct HyperParams {
    feature_dim: usize,
    d_emb: usize,
    d_hid: usize,
}

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn from_matrix(m: &Matrix) -> Self {
        Self {
            shape: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        }
    }

    fn from_vec(v: &[f64]) -> Self {
        Self {
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }

    fn into_matrix(self, rows: usize, cols: usize, name: &str) -> Result<Matrix> {
        if self.shape != [rows, cols] {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {:?}, expected [{rows}, {cols}]",
                self.shape
            )));
        }
        Matrix::from_vec(rows, cols, self.data)
            .map_err(|e| Error::Checkpoint(format!("tensor `{name}`: {e}")))
    }

    fn into_vec(self, len: usize, name: &str) -> Result<Vec<f64>> {
        if self.shape != [len] || self.data.len() != len {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {:?}, expected [{len}]",
                self.shape
            )));
        }
        Ok(self.data)
    }
}

#[derive(Serialize, Deserialize)]
struct Tensors {
    embedding: Tensor,
    w_input: Tensor,
    w_recurrent: Tensor,
    bias: Tensor,
    head_weight: Tensor,
    head_bias: f64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    grid: GridSpec,
    encoder: Encoder,
    hyperparams: HyperParams,
    params: Tensors,
    training_state: Option<TrainingState>,
}

pub fn save_checkpoint(
    params: &ModelParams,
    meta: &CheckpointMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    if !params.all_finite() {
        return Err(Error::NonFinite("model parameters".into()));
    }
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        grid: GridSpec {
            interval_size: meta.grid.interval_size(),
            num_intervals: meta.grid.num_intervals(),
        },
        encoder: meta.encoder.clone(),
        hyperparams: HyperParams {
            feature_dim: params.feature_dim,
            d_emb: params.d_emb,
            d_hid: params.d_hid,
        },
        params: Tensors {
            embedding: Tensor::from_matrix(&params.embedding),
            w_input: Tensor::from_matrix(&params.w_input),
            w_recurrent: Tensor::from_matrix(&params.w_recurrent),
            bias: Tensor::from_vec(&params.bias),
            head_weight: Tensor::from_vec(&params.head_weight),
            head_bias: params.head_bias,
        },
        training_state: meta.training_state.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Checkpoint(format!("serialization failed: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, CheckpointMeta)> {
    let text = std::fs::read_to_string(&path)?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} not supported (expected {CHECKPOINT_VERSION})",
            file.format_version
        )));
    }
    let grid = TimeGrid::new(file.grid.interval_size, file.grid.num_intervals)
        .map_err(|e| Error::Checkpoint(format!("invalid grid: {e}")))?;
    let hp = file.hyperparams;
    if hp.feature_dim == 0 || hp.d_emb == 0 || hp.d_hid == 0 {
        return Err(Error::Checkpoint("zero-sized hyperparameters".into()));
    }
    if file.encoder.feature_dim() != hp.feature_dim {
        return Err(Error::Checkpoint(format!(
            "encoder produces {} features, hyperparams declare {}",
            file.encoder.feature_dim(),
            hp.feature_dim
        )));
    }
    let d_in = hp.d_emb + 1;
    let params = ModelParams {
        embedding: file
            .params
            .embedding
            .into_matrix(hp.feature_dim, hp.d_emb, "embedding")?,
        w_input: file
            .params
            .w_input
            .into_matrix(4 * hp.d_hid, d_in, "w_input")?,
        w_recurrent: file
            .params
            .w_recurrent
            .into_matrix(4 * hp.d_hid, hp.d_hid, "w_recurrent")?,
        bias: file.params.bias.into_vec(4 * hp.d_hid, "bias")?,
        head_weight: file.params.head_weight.into_vec(hp.d_hid, "head_weight")?,
        head_bias: file.params.head_bias,
        feature_dim: hp.feature_dim,
        d_emb: hp.d_emb,
        d_hid: hp.d_hid,
    };
    if !params.all_finite() {
        return Err(Error::Checkpoint(
            "checkpoint contains non-finite parameters".into(),
        ));
    }
    Ok((
        params,
        CheckpointMeta {
            grid,
            encoder: file.encoder,
            training_state: file.training_state,
        },
    ))
}
