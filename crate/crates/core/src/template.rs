//! Query templates built from frame and frame-element definitions.
//!
//! Three layouts are supported:
//!
//! ```text
//! frame definition:  <f> Attack </f> | An <r> Assailant </r> attacks ... | <r> Weapon </r> , <r> Time </r>
//! element definition: <f> Attack </f> | <r> Assailant </r> | The person that attacks the <r> Victim </r> .
//! question:           What's <r> Assailant </r> of <f> Attack </f> ?
//! ```
//!
//! Every frame-element mention becomes a slot. An element mentioned more than
//! once keeps only its leftmost mention.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framenet::{Frame, MarkedText, Segment};

pub const FRAME_OPEN: &str = "<f>";
pub const FRAME_CLOSE: &str = "</f>";
pub const ROLE_OPEN: &str = "<r>";
pub const ROLE_CLOSE: &str = "</r>";
pub const SEPARATOR: &str = "|";
pub const LIST_SEPARATOR: &str = ",";

/// Which marker tokens are inserted into assembled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarkerOptions {
    /// `<t>` / `</t>` around the target word.
    pub target_markers: bool,
    /// `<f>` / `</f>` around the frame name.
    pub frame_label_markers: bool,
    /// `<r>` / `</r>` around frame-element mentions.
    pub role_label_markers: bool,
}

impl Default for MarkerOptions {
    fn default() -> Self {
        MarkerOptions {
            target_markers: true,
            frame_label_markers: true,
            role_label_markers: true,
        }
    }
}

impl MarkerOptions {
    /// Label markers (`<f>`, `<r>`) switched off together.
    pub fn without_label_markers(self) -> Self {
        MarkerOptions {
            frame_label_markers: false,
            role_label_markers: false,
            ..self
        }
    }

    pub fn without_target_markers(self) -> Self {
        MarkerOptions {
            target_markers: false,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateMode {
    FrameDef,
    FeDef,
    Question,
}

/// A frame-element mention inside template tokens; `start..=end` indexes the
/// surface tokens (0-based), markers excluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub fe: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DefinitionTemplate {
    pub mode: TemplateMode,
    pub frame: String,
    pub focus_fe: Option<String>,
    pub tokens: Vec<String>,
    pub slots: Vec<Slot>,
}

impl DefinitionTemplate {
    pub fn slot(&self, fe: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.fe == fe)
    }

    pub fn slot_tokens(&self, slot: &Slot) -> &[String] {
        &self.tokens[slot.start..=slot.end]
    }
}

/// Splits a name or mention surface into tokens: underscores become spaces,
/// then whitespace separates.
pub fn name_tokens(name: &str) -> Vec<String> {
    let spaced = name.replace('_', " ");
    let tokens: Vec<String> = spaced.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        vec![name.to_string()]
    } else {
        tokens
    }
}

struct Builder {
    opts: MarkerOptions,
    tokens: Vec<String>,
    slots: Vec<Slot>,
    slotted: HashSet<String>,
}

impl Builder {
    fn new(opts: MarkerOptions) -> Self {
        Builder {
            opts,
            tokens: Vec::new(),
            slots: Vec::new(),
            slotted: HashSet::new(),
        }
    }

    fn word(&mut self, word: &str) {
        self.tokens.push(word.to_string());
    }

    fn text(&mut self, text: &str) {
        self.tokens
            .extend(text.split_whitespace().map(str::to_string));
    }

    fn frame_name(&mut self, name: &str) {
        if self.opts.frame_label_markers {
            self.word(FRAME_OPEN);
        }
        self.tokens.extend(name_tokens(name));
        if self.opts.frame_label_markers {
            self.word(FRAME_CLOSE);
        }
    }

    /// Emits a wrapped mention and records it as the element's slot unless
    /// an earlier mention already claimed it.
    fn mention(&mut self, fe: &str, surface: &str) {
        if self.opts.role_label_markers {
            self.word(ROLE_OPEN);
        }
        let start = self.tokens.len();
        self.tokens.extend(name_tokens(surface));
        let end = self.tokens.len() - 1;
        if self.opts.role_label_markers {
            self.word(ROLE_CLOSE);
        }
        if self.slotted.insert(fe.to_string()) {
            self.slots.push(Slot {
                fe: fe.to_string(),
                start,
                end,
            });
        }
    }

    fn marked_text(&mut self, text: &MarkedText) {
        for segment in &text.segments {
            match segment {
                Segment::Plain { text } => self.text(text),
                Segment::Mention { fe, surface } => self.mention(fe, surface),
            }
        }
    }

    fn finish(self, mode: TemplateMode, frame: &str, focus_fe: Option<&str>) -> DefinitionTemplate {
        DefinitionTemplate {
            mode,
            frame: frame.to_string(),
            focus_fe: focus_fe.map(str::to_string),
            tokens: self.tokens,
            slots: self.slots,
        }
    }
}

/// `frame name | raw definition | elements not mentioned in the definition`.
pub fn build_frame_template(frame: &Frame, opts: MarkerOptions) -> DefinitionTemplate {
    let mut b = Builder::new(opts);
    b.frame_name(&frame.name);
    b.word(SEPARATOR);
    b.marked_text(&frame.definition);
    b.word(SEPARATOR);
    let unmentioned: Vec<&str> = frame
        .fe_order
        .iter()
        .map(String::as_str)
        .filter(|fe| !b.slotted.contains(*fe))
        .collect();
    for (i, fe) in unmentioned.into_iter().enumerate() {
        if i > 0 {
            b.word(LIST_SEPARATOR);
        }
        b.mention(fe, fe);
    }
    b.finish(TemplateMode::FrameDef, &frame.name, None)
}

/// `frame name | element name | element definition`; no element list.
pub fn build_fe_template(
    frame: &Frame,
    fe: &str,
    opts: MarkerOptions,
) -> Result<DefinitionTemplate> {
    let element = frame.fe(fe).ok_or_else(|| Error::NoSuchFe {
        frame: frame.name.clone(),
        fe: fe.to_string(),
    })?;
    let mut b = Builder::new(opts);
    b.frame_name(&frame.name);
    b.word(SEPARATOR);
    b.mention(fe, fe);
    b.word(SEPARATOR);
    b.marked_text(&element.definition);
    Ok(b.finish(TemplateMode::FeDef, &frame.name, Some(fe)))
}

/// `What's <r> element </r> of <f> frame </f> ?`
pub fn build_question_template(
    frame: &Frame,
    fe: &str,
    opts: MarkerOptions,
) -> Result<DefinitionTemplate> {
    if !frame.has_fe(fe) {
        return Err(Error::NoSuchFe {
            frame: frame.name.clone(),
            fe: fe.to_string(),
        });
    }
    let mut b = Builder::new(opts);
    b.word("What's");
    b.mention(fe, fe);
    b.word("of");
    b.frame_name(&frame.name);
    b.word("?");
    Ok(b.finish(TemplateMode::Question, &frame.name, Some(fe)))
}

pub fn build_template(
    frame: &Frame,
    mode: TemplateMode,
    fe: Option<&str>,
    opts: MarkerOptions,
) -> Result<DefinitionTemplate> {
    let need_fe = || {
        fe.ok_or_else(|| Error::NoSuchFe {
            frame: frame.name.clone(),
            fe: String::new(),
        })
    };
    match mode {
        TemplateMode::FrameDef => Ok(build_frame_template(frame, opts)),
        TemplateMode::FeDef => build_fe_template(frame, need_fe()?, opts),
        TemplateMode::Question => build_question_template(frame, need_fe()?, opts),
    }
}

pub fn render_surface(template: &DefinitionTemplate) -> String {
    template.tokens.join(" ")
}
