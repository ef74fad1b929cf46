//! Versioned JSON checkpoints holding the model config, every parameter and
//! batch-norm statistic, the standardization constants and training history.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Layer, Model, ModelConfig};
use super::train::EpochStats;
use super::{NnError, Tensor};
use crate::dataset::Standardization;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    fn from_tensor(name: String, t: &Tensor) -> Self {
        Self { name, shape: t.shape().to_vec(), data: t.data().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub parameters: Vec<NamedArray>,
    pub standardization: Standardization,
    pub history: Vec<EpochStats>,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::BadCheckpoint(msg.into())
}

fn layer_arrays(idx: usize, layer: &Layer) -> Vec<NamedArray> {
    let name = |p: &str| format!("{idx:02}.{}.{p}", layer.kind());
    match layer {
        Layer::Conv1d { weight, bias } | Layer::Dense { weight, bias } => vec![
            NamedArray::from_tensor(name("weight"), weight),
            NamedArray::from_tensor(name("bias"), bias),
        ],
        Layer::Batchnorm { gamma, beta, running, .. } => {
            let ch = running.mean.len();
            vec![
                NamedArray::from_tensor(name("gamma"), gamma),
                NamedArray::from_tensor(name("beta"), beta),
                NamedArray { name: name("running_mean"), shape: vec![ch], data: running.mean.clone() },
                NamedArray { name: name("running_var"), shape: vec![ch], data: running.var.clone() },
            ]
        }
        _ => vec![],
    }
}

impl ModelCheckpoint {
    pub fn from_model(
        model: &Model,
        config: &ModelConfig,
        standardization: Standardization,
        history: Vec<EpochStats>,
    ) -> Self {
        let parameters = model.layers.iter().enumerate().flat_map(|(i, l)| layer_arrays(i, l)).collect();
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: config.clone(),
            parameters,
            standardization,
            history,
        }
    }

    /// Rebuilds the network and loads every stored array into it.
    pub fn to_model(&self) -> Result<Model, NnError> {
        self.validate()?;
        let mut model = Model::build(&self.config, self.config.rng_seed).map_err(|e| bad(e.to_string()))?;
        let expected: Vec<NamedArray> =
            model.layers.iter().enumerate().flat_map(|(i, l)| layer_arrays(i, l)).collect();
        if expected.len() != self.parameters.len() {
            return Err(bad(format!(
                "config implies {} arrays, checkpoint holds {}",
                expected.len(),
                self.parameters.len()
            )));
        }
        for (want, got) in expected.iter().zip(&self.parameters) {
            if want.name != got.name || want.shape != got.shape || got.data.len() != want.data.len() {
                return Err(bad(format!(
                    "array {} {:?} does not match expected {} {:?}",
                    got.name, got.shape, want.name, want.shape
                )));
            }
        }
        let mut stored = self.parameters.iter();
        for layer in &mut model.layers {
            match layer {
                Layer::Conv1d { weight, bias } | Layer::Dense { weight, bias } => {
                    for t in [weight, bias] {
                        t.data_mut().copy_from_slice(&stored.next().expect("counted").data);
                    }
                }
                Layer::Batchnorm { gamma, beta, running, .. } => {
                    for t in [gamma, beta] {
                        t.data_mut().copy_from_slice(&stored.next().expect("counted").data);
                    }
                    running.mean.copy_from_slice(&stored.next().expect("counted").data);
                    running.var.copy_from_slice(&stored.next().expect("counted").data);
                }
                _ => {}
            }
        }
        Ok(model)
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(bad(format!(
                "format version {} (supported: {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        for a in &self.parameters {
            if a.shape.iter().product::<usize>() != a.data.len() {
                return Err(bad(format!("array {} has {} values for shape {:?}", a.name, a.data.len(), a.shape)));
            }
            if a.data.iter().any(|x| !x.is_finite()) {
                return Err(bad(format!("array {} holds non-finite values", a.name)));
            }
            if a.name.ends_with(".running_var") && a.data.iter().any(|&v| v <= 0.0) {
                return Err(bad(format!("array {} holds a non-positive variance", a.name)));
            }
        }
        let s = &self.standardization;
        if s.mean.len() != self.config.input_len || s.std.len() != self.config.input_len {
            return Err(bad("standardization length does not match input length"));
        }
        if s.std.iter().any(|&v| !(v > 0.0)) {
            return Err(bad("standardization holds a non-positive std"));
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, NnError> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, NnError> {
        let ckpt: Self = serde_json::from_slice(bytes).map_err(|e| bad(e.to_string()))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let bytes = self.encode()?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::decode(&fs::read(path)?)
    }
}
