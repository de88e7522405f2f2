//! Shared fixtures for the benchmarks in `benches/`.

use aged_core::encoding::{assemble, build_vocabulary, gold_labels};
use aged_core::synthetic::{self, MiniFrameNet};
use aged_core::template::build_frame_template;
use aged_core::{
    fresh_model, EncodedPair, MarkerOptions, Model, ModelSettings, Scalar, SlotLabel, TrainConfig,
};

/// The bundled data, a fresh model over it, and the first training pair.
pub struct Fixture<T> {
    pub data: MiniFrameNet,
    pub model: Model<T>,
    pub pair: EncodedPair,
    pub labels: Vec<SlotLabel>,
}

pub fn fixture<T: Scalar>(settings: &ModelSettings) -> Fixture<T> {
    let data = synthetic::load();
    let vocab = build_vocabulary(&data.train, &data.store);
    let model = fresh_model(vocab, settings, &TrainConfig::default()).expect("valid settings");
    let inst = &data.train[0];
    let frame = data.store.frame(&inst.frame).expect("bundled frame");
    let template = build_frame_template(frame, MarkerOptions::default());
    let pair =
        assemble(inst, &template, &model.vocab, MarkerOptions::default()).expect("pair fits");
    let labels = gold_labels(inst, &template);
    Fixture {
        data,
        model,
        pair,
        labels,
    }
}
