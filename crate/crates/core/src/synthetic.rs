//! The bundled synthetic mini-FrameNet: four frames, sixteen frame elements
//! and small train/dev/test splits, shipped under `data/mini_framenet/`.

use crate::framenet::{parse_instances, AnnotatedInstance, FrameStore};

pub const FRAMES_JSONL: &str = include_str!("../data/mini_framenet/frames.jsonl");
pub const TRAIN_JSONL: &str = include_str!("../data/mini_framenet/train.jsonl");
pub const DEV_JSONL: &str = include_str!("../data/mini_framenet/dev.jsonl");
pub const TEST_JSONL: &str = include_str!("../data/mini_framenet/test.jsonl");

#[derive(Debug, Clone)]
pub struct MiniFrameNet {
    pub store: FrameStore,
    pub train: Vec<AnnotatedInstance>,
    pub dev: Vec<AnnotatedInstance>,
    pub test: Vec<AnnotatedInstance>,
}

pub fn store() -> FrameStore {
    FrameStore::from_reader(FRAMES_JSONL.as_bytes()).expect("bundled frames are valid")
}

pub fn load() -> MiniFrameNet {
    let store = store();
    let split = |text: &str| {
        parse_instances(text.as_bytes(), Some(&store))
            .expect("bundled instances are valid")
            .0
    };
    MiniFrameNet {
        train: split(TRAIN_JSONL),
        dev: split(DEV_JSONL),
        test: split(TEST_JSONL),
        store,
    }
}
