//! Frame-semantic role labeling with definitions as queries.
//!
//! A frame's definition is rendered as a template whose frame-element
//! mentions are slots. The sentence and the template are encoded together;
//! each slot's pooled representation becomes a query that points at the
//! start and end of its argument span in the sentence (or at `[CLS]` when the
//! element has no argument). One pass over a frame-definition template
//! extracts every argument of the target at once.

// Numeric kernels index several parallel buffers at once.
#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod decode;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod framenet;
pub mod metrics;
pub mod neural;
pub mod pointer;
pub mod predict;
pub mod synthetic;
pub mod template;
pub mod tensor;
pub mod trainer;

#[cfg(test)]
mod testutil;

pub use checkpoint::{AnyModel, Model, ModelConfig};
pub use decode::{best_valid_span, decode, decode_slot, SpanPrediction};
pub use encoding::{assemble, build_vocabulary, gold_labels, EncodedPair, SlotLabel, Vocabulary};
pub use error::{Error, Result};
pub use experiment::{restrict_training_set, run_holdout_experiment, ExperimentReport, KShot};
pub use framenet::{
    filter_by_frames, load_instances, load_ontology, sample_k_shot, AnnotatedInstance, Argument,
    FilterMode, Frame, FrameElement, FrameStore, MarkedText, Segment,
};
pub use metrics::{evaluate, evaluate_by_frame, InstancePrediction, Metrics};
pub use neural::{init_parameters, ContextualEncoding, EncoderConfig, ParameterSet};
pub use predict::{predict_all, predict_instance};
pub use template::{DefinitionTemplate, MarkerOptions, Slot, TemplateMode};
pub use tensor::{DType, Scalar, Tensor};
pub use trainer::{
    build_training_stream, fresh_model, train, DevSet, ModelSettings, Provenance, TrainConfig,
    TrainingExample, TrainingReport,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
