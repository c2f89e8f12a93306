//! Model checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"RISM"
//! version  u32
//! hlen     u64, length of the JSON header in bytes
//! header   JSON {arch, metadata, features, tensors: [{name, rows, cols}]}
//! payload  every listed tensor as row-major f64, in header order
//! ```
//!
//! The tensor list is the network parameters followed by the batch-norm
//! running statistics (`hiddenN.running_mean`, `hiddenN.running_var`).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::binio::{put_f64s, put_u32, put_u64, Reader};
use crate::error::{Error, Result};
use crate::learn::mlp::{MlpArch, MlpModel, ParamSet, Tensor};
use crate::learn::pca::FeatureMap;
use crate::metrics::Granularity;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RISM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_loss: f64,
    pub alpha: f64,
    pub granularity: Granularity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: MlpModel,
    pub features: FeatureMap,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    arch: MlpArch,
    metadata: TrainingMetadata,
    features: FeatureMap,
    tensors: Vec<TensorEntry>,
}

fn all_tensors(model: &MlpModel) -> Vec<Tensor> {
    let mut out = model.params.tensors.clone();
    for (i, (m, v)) in model
        .running_mean
        .iter()
        .zip(&model.running_var)
        .enumerate()
    {
        for (suffix, vec) in [("running_mean", m), ("running_var", v)] {
            out.push(Tensor {
                name: format!("hidden{i}.{suffix}"),
                value: DMatrix::from_row_slice(1, vec.len(), vec.as_slice()),
            });
        }
    }
    out
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = all_tensors(&self.model);
        let header = Header {
            arch: self.model.arch.clone(),
            metadata: self.metadata.clone(),
            features: self.features.clone(),
            tensors: tensors
                .iter()
                .map(|t| TensorEntry {
                    name: t.name.clone(),
                    rows: t.value.nrows(),
                    cols: t.value.ncols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(json.len() + 8 * self.model.params.scalar_count() + 16);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        put_u64(&mut out, json.len() as u64);
        out.extend_from_slice(&json);
        for t in &tensors {
            put_f64s(&mut out, t.value.transpose().iter().copied());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], file: &str) -> Result<Self> {
        let mut r = Reader::new(bytes, file);
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(r.corrupt("not a model checkpoint (bad magic)"));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                file: file.to_string(),
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let hlen = r.len("header length")?;
        let header: Header = serde_json::from_slice(r.take(hlen, "header")?)?;

        // The stored layout must match what the architecture implies.
        let mut model = MlpModel::init(header.arch, 0)?;
        let expected = all_tensors(&model);
        if expected.len() != header.tensors.len()
            || expected
                .iter()
                .zip(&header.tensors)
                .any(|(t, e)| t.name != e.name || t.value.shape() != (e.rows, e.cols))
        {
            return Err(r.corrupt("tensor list does not match the architecture"));
        }
        let mut values = Vec::with_capacity(expected.len());
        for e in &header.tensors {
            let data = r.f64s(e.rows * e.cols, &e.name)?;
            values.push(DMatrix::from_row_slice(e.rows, e.cols, &data));
        }
        if r.remaining() != 0 {
            return Err(r.corrupt(&format!("{} trailing bytes", r.remaining())));
        }

        let mut values = values.into_iter();
        for t in model.params.tensors.iter_mut() {
            t.value = values.next().expect("length checked");
        }
        for i in 0..model.running_mean.len() {
            let m = values.next().expect("length checked");
            let v = values.next().expect("length checked");
            model.running_mean[i] = DVector::from_row_slice(m.as_slice());
            model.running_var[i] = DVector::from_row_slice(v.as_slice());
        }
        Ok(Self {
            model,
            features: header.features,
            metadata: header.metadata,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    Checkpoint::from_bytes(&bytes, &path.display().to_string())
}

/// Names of all stored tensors, in file order.
pub fn tensor_names(model: &MlpModel) -> Vec<String> {
    all_tensors(model).into_iter().map(|t| t.name).collect()
}

impl ParamSet {
    /// Bitwise equality, distinguishing signed zeros and NaN payloads.
    pub fn bit_eq(&self, other: &ParamSet) -> bool {
        self.same_layout(other)
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| {
                a.value
                    .iter()
                    .zip(b.value.iter())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
