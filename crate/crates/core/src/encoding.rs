//! Text/definition pair assembly: `[CLS] text [SEP] definition [SEP]`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framenet::{AnnotatedInstance, FrameStore};
use crate::template::{
    build_fe_template, build_frame_template, build_question_template, DefinitionTemplate,
    MarkerOptions,
};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const TARGET_OPEN: &str = "<t>";
pub const TARGET_CLOSE: &str = "</t>";

/// Reserved tokens, fixed at ids 0..=9.
pub const RESERVED: [&str; 10] = [
    PAD,
    UNK,
    CLS,
    SEP,
    TARGET_OPEN,
    TARGET_CLOSE,
    crate::template::FRAME_OPEN,
    crate::template::FRAME_CLOSE,
    crate::template::ROLE_OPEN,
    crate::template::ROLE_CLOSE,
];

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for token in RESERVED {
            vocab.add(token);
        }
        vocab
    }
}

impl Vocabulary {
    fn add(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or the `[UNK]` id.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuilds a vocabulary from tokens in id order; the reserved prefix must match.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens.iter().zip(RESERVED).any(|(a, b)| a != b) {
            return Err(Error::Checkpoint(
                "vocabulary does not start with the reserved tokens".into(),
            ));
        }
        let mut vocab = Vocabulary::default();
        for token in &tokens[RESERVED.len()..] {
            if vocab.contains(token) {
                return Err(Error::Checkpoint(format!(
                    "duplicate vocabulary token '{token}'"
                )));
            }
            vocab.add(token);
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_vec(&self.tokens)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_tokens(serde_json::from_slice(&bytes)?)
    }
}

/// Collects every instance token, then every token of every template the
/// store can produce, in first-occurrence order after the reserved tokens.
pub fn build_vocabulary(instances: &[AnnotatedInstance], store: &FrameStore) -> Vocabulary {
    let mut vocab = Vocabulary::default();
    for instance in instances {
        for token in &instance.tokens {
            vocab.add(token);
        }
    }
    let opts = MarkerOptions::default();
    for frame in store.frames() {
        let mut templates = vec![build_frame_template(frame, opts)];
        for fe in &frame.fe_order {
            templates.push(build_fe_template(frame, fe, opts).expect("fe from fe_order"));
            templates.push(build_question_template(frame, fe, opts).expect("fe from fe_order"));
        }
        for template in templates {
            for token in &template.tokens {
                vocab.add(token);
            }
        }
    }
    vocab
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Text,
    Definition,
}

impl SegmentKind {
    pub fn index(self) -> usize {
        match self {
            SegmentKind::Text => 0,
            SegmentKind::Definition => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedPair {
    pub ids: Vec<usize>,
    /// `sentence_pos[i - 1]` is the assembled index of sentence word `w_i`.
    pub sentence_pos: Vec<usize>,
    /// Assembled `(start, end)` of each template slot, in slot order.
    pub slot_pos: Vec<(usize, usize)>,
    pub slot_fes: Vec<String>,
    pub segments: Vec<SegmentKind>,
    pub frame: String,
}

impl EncodedPair {
    pub const CLS_POS: usize = 0;

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Sentence length `n`.
    pub fn n(&self) -> usize {
        self.sentence_pos.len()
    }

    /// The `n + 1` answer positions: `[CLS]` followed by each sentence word.
    pub fn candidates(&self) -> Vec<usize> {
        std::iter::once(Self::CLS_POS)
            .chain(self.sentence_pos.iter().copied())
            .collect()
    }
}

pub fn assemble(
    instance: &AnnotatedInstance,
    template: &DefinitionTemplate,
    vocab: &Vocabulary,
    opts: MarkerOptions,
) -> Result<EncodedPair> {
    if instance.frame != template.frame {
        return Err(Error::FrameMismatch {
            instance: instance.frame.clone(),
            template: template.frame.clone(),
        });
    }
    let n = instance.tokens.len();
    let capacity = n + template.tokens.len() + 5;
    let mut ids = Vec::with_capacity(capacity);
    let mut segments = Vec::with_capacity(capacity);
    let mut sentence_pos = Vec::with_capacity(n);

    ids.push(CLS_ID);
    segments.push(SegmentKind::Text);
    for (i, token) in instance.tokens.iter().enumerate() {
        let is_target = i + 1 == instance.target;
        if is_target && opts.target_markers {
            ids.push(vocab.id(TARGET_OPEN));
            segments.push(SegmentKind::Text);
        }
        sentence_pos.push(ids.len());
        ids.push(vocab.id(token));
        segments.push(SegmentKind::Text);
        if is_target && opts.target_markers {
            ids.push(vocab.id(TARGET_CLOSE));
            segments.push(SegmentKind::Text);
        }
    }
    ids.push(SEP_ID);
    segments.push(SegmentKind::Text);

    let offset = ids.len();
    for token in &template.tokens {
        ids.push(vocab.id(token));
        segments.push(SegmentKind::Definition);
    }
    ids.push(SEP_ID);
    segments.push(SegmentKind::Definition);

    Ok(EncodedPair {
        ids,
        sentence_pos,
        slot_pos: template
            .slots
            .iter()
            .map(|s| (offset + s.start, offset + s.end))
            .collect(),
        slot_fes: template.slots.iter().map(|s| s.fe.clone()).collect(),
        segments,
        frame: instance.frame.clone(),
    })
}

/// Gold `(start, end)` for one slot in sentence indices; `(0, 0)` means no argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotLabel {
    pub start: usize,
    pub end: usize,
}

impl SlotLabel {
    pub const NONE: SlotLabel = SlotLabel { start: 0, end: 0 };
}

pub fn gold_labels(instance: &AnnotatedInstance, template: &DefinitionTemplate) -> Vec<SlotLabel> {
    template
        .slots
        .iter()
        .map(|slot| match instance.argument(&slot.fe) {
            Some(arg) => SlotLabel {
                start: arg.start,
                end: arg.end,
            },
            None => SlotLabel::NONE,
        })
        .collect()
}
