//! Versioned JSON model files.
//!
//! The payload is the full [`MlpModel`] (layer shapes, row-major weight
//! arrays, batch-norm running statistics, feature scaler, feature buses and
//! the dictionary hash) plus the training configuration that produced it.

use std::path::Path;

use opf_activeset_core::nn::{MlpModel, TrainConfig};
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT: &str = "opf-activeset-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub train_config: TrainConfig,
    pub model: MlpModel,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model payload: {0}")]
    CorruptPayload(String),
}

pub fn save_model(model: &MlpModel, cfg: &TrainConfig) -> Vec<u8> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        train_config: cfg.clone(),
        model: model.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("model parameters are finite");
    bytes.push(b'\n');
    bytes
}

pub fn load_model(bytes: &[u8]) -> Result<ModelFile, ModelIoError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ModelIoError::CorruptPayload(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
        return Err(ModelIoError::CorruptPayload("missing format tag".into()));
    }
    let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != MODEL_VERSION {
        return Err(ModelIoError::VersionMismatch {
            found,
            expected: MODEL_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| ModelIoError::CorruptPayload(e.to_string()))?;
    check_shapes(&file.model)?;
    Ok(file)
}

fn check_shapes(m: &MlpModel) -> Result<(), ModelIoError> {
    let bad = |what: &str| Err(ModelIoError::CorruptPayload(format!("inconsistent {what}")));
    let mut fan_in = m.input_dim;
    for h in &m.hidden {
        let d = &h.dense;
        let w = d.outputs;
        if d.inputs != fan_in
            || d.weights.len() != d.inputs * w
            || d.bias.len() != w
            || [&h.bn.gamma, &h.bn.beta, &h.bn.running_mean, &h.bn.running_var]
                .iter()
                .any(|v| v.len() != w)
        {
            return bad("hidden layer shapes");
        }
        fan_in = w;
    }
    let o = &m.output;
    if o.inputs != fan_in || o.outputs != m.classes || o.weights.len() != fan_in * m.classes || o.bias.len() != m.classes {
        return bad("output layer shape");
    }
    if m.scaler.mean.len() != m.input_dim || m.scaler.std.len() != m.input_dim || m.feature_buses.len() != m.input_dim {
        return bad("feature scaler");
    }
    Ok(())
}

pub fn write_model_file(path: &Path, model: &MlpModel, cfg: &TrainConfig) -> Result<(), ModelIoError> {
    std::fs::write(path, save_model(model, cfg))?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<ModelFile, ModelIoError> {
    load_model(&std::fs::read(path)?)
}
