//! Single-document JSON checkpoints.
//!
//! ```text
//! {"config": {"d_model": 32, ..., "markers": {...}, "template_mode": "frame-def"},
//!  "params": {"embeddings.token": {"shape": [V, d], "data": [...]}, ...},
//!  "vocab":  ["[PAD]", "[UNK]", ...]}
//! ```
//!
//! Tensor data is row-major. Numbers are written with shortest round-trip
//! formatting, so reloading reproduces `f64` parameters bit for bit.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::Vocabulary;
use crate::error::{Error, Result};
use crate::neural::{EncoderConfig, ParameterSet};
use crate::template::{MarkerOptions, TemplateMode};
use crate::tensor::{DType, Scalar, Tensor};

/// Everything besides the weights that is needed to reproduce predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub encoder: EncoderConfig,
    pub markers: MarkerOptions,
    pub template_mode: TemplateMode,
}

/// A trained (or freshly initialized) model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParameterSet<T>,
    pub vocab: Vocabulary,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointDoc {
    config: ModelConfig,
    params: BTreeMap<String, TensorRecord>,
    vocab: Vec<String>,
}

impl<T: Scalar> Model<T> {
    pub fn to_json(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
    }

    fn write(&self, out: impl Write) -> Result<()> {
        let mut params = BTreeMap::new();
        for (name, tensor) in self.params.named() {
            if !tensor.is_finite() {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' holds non-finite values"
                )));
            }
            params.insert(
                name,
                TensorRecord {
                    shape: tensor.shape().to_vec(),
                    data: tensor.data().iter().map(|x| x.f64()).collect(),
                },
            );
        }
        let doc = CheckpointDoc {
            config: self.config.clone(),
            params,
            vocab: self.vocab.tokens().to_vec(),
        };
        serde_json::to_writer(out, &doc)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_doc(serde_json::from_reader(BufReader::new(file))?)
    }

    fn from_doc(mut doc: CheckpointDoc) -> Result<Self> {
        doc.config.encoder.validate()?;
        let vocab = Vocabulary::from_tokens(doc.vocab)?;
        if vocab.len() != doc.config.encoder.vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} tokens but the encoder expects {}",
                vocab.len(),
                doc.config.encoder.vocab_size
            )));
        }
        let mut params = ParameterSet::<T>::zeros(&doc.config.encoder);
        let expected = params.named().len();
        for (name, tensor) in params.named_mut() {
            let record = doc
                .params
                .remove(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{name}'")))?;
            if record.shape != tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    record.shape,
                    tensor.shape()
                )));
            }
            let data = record.data.into_iter().map(T::of).collect();
            *tensor = Tensor::from_vec(&record.shape, data).ok_or_else(|| {
                Error::Checkpoint(format!("tensor '{name}' data does not match its shape"))
            })?;
        }
        if let Some(extra) = doc.params.keys().next() {
            return Err(Error::Checkpoint(format!(
                "unexpected tensor '{extra}' (expected {expected} tensors)"
            )));
        }
        Ok(Model {
            config: doc.config,
            params,
            vocab,
        })
    }
}

/// A checkpoint loaded at the precision recorded in its config.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    F32(Model<f32>),
    F64(Model<f64>),
}

impl AnyModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_doc(serde_json::from_reader(BufReader::new(file))?)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        Self::from_doc(serde_json::from_slice(bytes)?)
    }

    fn from_doc(doc: CheckpointDoc) -> Result<Self> {
        match doc.config.encoder.dtype {
            DType::F32 => Model::from_doc(doc).map(AnyModel::F32),
            DType::F64 => Model::from_doc(doc).map(AnyModel::F64),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            AnyModel::F32(m) => &m.config,
            AnyModel::F64(m) => &m.config,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::build_vocabulary;
    use crate::neural::{forward, init_parameters};

    fn model() -> Model<f64> {
        let data = crate::synthetic::load();
        let vocab = build_vocabulary(&data.train, &data.store);
        let mut encoder = EncoderConfig::new(vocab.len(), 8, 1, 2, 5);
        encoder.dtype = DType::F64;
        Model {
            params: init_parameters(&encoder).unwrap(),
            config: ModelConfig {
                encoder,
                markers: MarkerOptions::default(),
                template_mode: TemplateMode::FrameDef,
            },
            vocab,
        }
    }

    #[test]
    fn json_roundtrip_is_bitwise() {
        let m = model();
        let back = Model::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bits = |p: &ParameterSet<f64>| -> Vec<u64> {
            p.tensors()
                .iter()
                .flat_map(|t| t.data().iter().map(|x| x.to_bits()))
                .collect()
        };
        assert_eq!(bits(&back.params), bits(&m.params));

        let data = crate::synthetic::load();
        let inst = &data.train[0];
        let frame = data.store.frame(&inst.frame).unwrap();
        let template = crate::template::build_frame_template(frame, MarkerOptions::default());
        let pair =
            crate::encoding::assemble(inst, &template, &m.vocab, MarkerOptions::default()).unwrap();
        let a = forward(&m.params, &m.config.encoder, &pair).unwrap();
        let b = forward(&back.params, &back.config.encoder, &pair).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_tampered_documents() {
        let m = model();
        let json = m.to_json().unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        doc["params"]
            .as_object_mut()
            .unwrap()
            .remove("pointer.w_end");
        assert!(Model::<f64>::from_json(&doc.to_string()).is_err());

        let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        doc["params"]["final_norm.gain"]["shape"] = serde_json::json!([3]);
        assert!(Model::<f64>::from_json(&doc.to_string()).is_err());

        let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        doc["vocab"].as_array_mut().unwrap().pop();
        assert!(Model::<f64>::from_json(&doc.to_string()).is_err());
    }

    #[test]
    fn f32_survives_roundtrip() {
        let m = model();
        let m32 = Model::<f32> {
            params: m.params.cast(),
            config: m.config.clone(),
            vocab: m.vocab.clone(),
        };
        let back = Model::<f32>::from_json(&m32.to_json().unwrap()).unwrap();
        assert_eq!(back.params, m32.params);
    }

    #[test]
    fn any_model_follows_dtype() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = model();
        m.save(&path).unwrap();
        assert_eq!(AnyModel::load(&path).unwrap(), AnyModel::F64(m.clone()));
        let mut m32 = Model::<f32> {
            params: m.params.cast(),
            config: m.config.clone(),
            vocab: m.vocab.clone(),
        };
        m32.config.encoder.dtype = DType::F32;
        m32.save(&path).unwrap();
        assert!(matches!(AnyModel::load(&path).unwrap(), AnyModel::F32(_)));
    }
}
