//! Frame ontology and annotated instances.
//!
//! Both live in JSON Lines files. A frame record carries its definition as a
//! list of segments, where a segment is either plain text or a mention of one
//! of the frame's elements:
//!
//! ```text
//! {"name": "Attack",
//!  "definition": [{"text": "An "}, {"fe": "Assailant", "surface": "Assailant"}, ...],
//!  "fe_order": ["Assailant", "Victim"],
//!  "fes": {"Assailant": {"core_type": "core", "definition": [...]}, ...}}
//! ```
//!
//! An instance record uses 1-based inclusive token indices:
//!
//! ```text
//! {"tokens": ["he", "was", "INVADING", "Iraq"], "target": 3, "frame": "Attack",
//!  "arguments": [{"fe": "Assailant", "start": 1, "end": 1}]}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoreType {
    #[serde(rename = "core")]
    Core,
    #[serde(rename = "noncore")]
    NonCore,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Segment {
    Mention { fe: String, surface: String },
    Plain { text: String },
}

impl Segment {
    pub fn surface(&self) -> &str {
        match self {
            Segment::Mention { surface, .. } => surface,
            Segment::Plain { text } => text,
        }
    }
}

/// Definition text with inline frame-element mentions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarkedText {
    pub segments: Vec<Segment>,
}

impl MarkedText {
    pub fn new(segments: Vec<Segment>) -> Self {
        MarkedText { segments }
    }

    /// The human-readable definition.
    pub fn text(&self) -> String {
        self.segments.iter().map(Segment::surface).collect()
    }

    /// Names of mentioned frame elements, in textual order, repeats included.
    pub fn mentions(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Mention { fe, .. } => Some(fe.as_str()),
            Segment::Plain { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameElement {
    pub name: String,
    pub core_type: CoreType,
    pub definition: MarkedText,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub name: String,
    pub definition: MarkedText,
    /// Canonical element order; a permutation of the keys of `fes`.
    pub fe_order: Vec<String>,
    pub fes: BTreeMap<String, FrameElement>,
}

impl Frame {
    pub fn fe(&self, name: &str) -> Option<&FrameElement> {
        self.fes.get(name)
    }

    pub fn has_fe(&self, name: &str) -> bool {
        self.fes.contains_key(name)
    }

    /// Elements in canonical order.
    pub fn elements(&self) -> impl Iterator<Item = &FrameElement> {
        self.fe_order.iter().map(move |name| &self.fes[name])
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeRecord {
    core_type: CoreType,
    definition: MarkedText,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    name: String,
    definition: MarkedText,
    fe_order: Vec<String>,
    fes: BTreeMap<String, FeRecord>,
}

/// Immutable, validated collection of frames.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameStore {
    frames: Vec<Frame>,
    index: HashMap<String, usize>,
}

impl FrameStore {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, name: &str) -> Option<&Frame> {
        self.index.get(name).map(|&i| &self.frames[i])
    }

    pub fn get(&self, name: &str) -> Result<&Frame> {
        self.frame(name)
            .ok_or_else(|| Error::NoSuchFrame(name.to_string()))
    }

    /// Frames in file order.
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn fe_count(&self) -> usize {
        self.frames.iter().map(|f| f.fes.len()).sum()
    }

    /// Builds a store from already-constructed frames, applying the same
    /// validation as the loader (line numbers are the 1-based frame index).
    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        let mut store = FrameStore::default();
        for (i, frame) in frames.into_iter().enumerate() {
            store.insert(i + 1, frame)?;
        }
        Ok(store)
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut store = FrameStore::default();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FrameRecord =
                serde_json::from_str(&line).map_err(|e| Error::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
            store.insert(line_no, frame_from_record(record))?;
        }
        Ok(store)
    }

    fn insert(&mut self, line: usize, frame: Frame) -> Result<()> {
        validate_frame(line, &frame)?;
        if self.index.contains_key(&frame.name) {
            return Err(Error::DuplicateFrame {
                line,
                name: frame.name,
            });
        }
        self.index.insert(frame.name.clone(), self.frames.len());
        self.frames.push(frame);
        Ok(())
    }

    /// Serializes the store back to the JSON Lines interchange format.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for frame in &self.frames {
            let record = FrameRecord {
                name: frame.name.clone(),
                definition: frame.definition.clone(),
                fe_order: frame.fe_order.clone(),
                fes: frame
                    .fes
                    .iter()
                    .map(|(name, fe)| {
                        (
                            name.clone(),
                            FeRecord {
                                core_type: fe.core_type,
                                definition: fe.definition.clone(),
                            },
                        )
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

fn frame_from_record(record: FrameRecord) -> Frame {
    let fes = record
        .fes
        .into_iter()
        .map(|(name, fe)| {
            (
                name.clone(),
                FrameElement {
                    name,
                    core_type: fe.core_type,
                    definition: fe.definition,
                },
            )
        })
        .collect();
    Frame {
        name: record.name,
        definition: record.definition,
        fe_order: record.fe_order,
        fes,
    }
}

fn validate_marked_text(line: usize, frame: &Frame, text: &MarkedText) -> Result<()> {
    for segment in &text.segments {
        if segment.surface().is_empty() {
            return Err(Error::Malformed {
                line,
                message: format!("frame '{}' has an empty definition segment", frame.name),
            });
        }
        if let Segment::Mention { fe, .. } = segment {
            if !frame.has_fe(fe) {
                return Err(Error::UnknownMention {
                    line,
                    frame: frame.name.clone(),
                    fe: fe.clone(),
                });
            }
        }
    }
    Ok(())
}

fn validate_frame(line: usize, frame: &Frame) -> Result<()> {
    if frame.name.is_empty() {
        return Err(Error::Malformed {
            line,
            message: "frame name is empty".into(),
        });
    }
    validate_marked_text(line, frame, &frame.definition)?;
    for fe in frame.fes.values() {
        validate_marked_text(line, frame, &fe.definition)?;
    }

    let mismatch = |message: String| Error::FeOrderMismatch {
        line,
        frame: frame.name.clone(),
        message,
    };
    let mut seen = HashSet::new();
    for name in &frame.fe_order {
        if name.is_empty() {
            return Err(mismatch("empty frame element name".into()));
        }
        if !seen.insert(name.as_str()) {
            return Err(mismatch(format!("'{name}' listed twice in fe_order")));
        }
        if !frame.fes.contains_key(name) {
            return Err(mismatch(format!("'{name}' in fe_order has no definition")));
        }
    }
    for (key, fe) in &frame.fes {
        if key != &fe.name {
            return Err(mismatch(format!(
                "element keyed '{key}' is named '{}'",
                fe.name
            )));
        }
        if !seen.contains(key.as_str()) {
            return Err(mismatch(format!("'{key}' is missing from fe_order")));
        }
    }
    Ok(())
}

pub fn load_ontology(path: impl AsRef<Path>) -> Result<FrameStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    FrameStore::from_reader(BufReader::new(file))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Argument {
    pub fe: String,
    /// 1-based, inclusive.
    pub start: usize,
    /// 1-based, inclusive.
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedInstance {
    pub tokens: Vec<String>,
    /// 1-based index of the target word.
    pub target: usize,
    pub frame: String,
    pub arguments: Vec<Argument>,
}

impl AnnotatedInstance {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn argument(&self, fe: &str) -> Option<&Argument> {
        self.arguments.iter().find(|a| a.fe == fe)
    }
}

/// Counters collected while loading instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub instances: usize,
    /// Extra spans dropped because an instance annotated the same element twice.
    pub duplicate_fe_spans: usize,
}

/// Parses instance records. With a store, frame and element names are checked
/// against it; without one only the span structure is validated.
pub fn parse_instances(
    reader: impl BufRead,
    store: Option<&FrameStore>,
) -> Result<(Vec<AnnotatedInstance>, LoadStats)> {
    let mut out = Vec::new();
    let mut stats = LoadStats::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let instance: AnnotatedInstance =
            serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let (instance, dropped) = validate_instance(line_no, instance, store)?;
        stats.duplicate_fe_spans += dropped;
        out.push(instance);
    }
    stats.instances = out.len();
    if stats.duplicate_fe_spans > 0 {
        log::warn!(
            "kept the leftmost span for {} repeated frame-element annotations",
            stats.duplicate_fe_spans
        );
    }
    Ok((out, stats))
}

/// Checks one instance; repeated annotations of an element collapse to the
/// leftmost span. Returns the cleaned instance and the number of dropped spans.
pub fn validate_instance(
    line: usize,
    mut instance: AnnotatedInstance,
    store: Option<&FrameStore>,
) -> Result<(AnnotatedInstance, usize)> {
    let n = instance.tokens.len();
    if n == 0 {
        return Err(Error::InvalidSpan {
            line,
            message: "instance has no tokens".into(),
        });
    }
    if instance.target < 1 || instance.target > n {
        return Err(Error::InvalidSpan {
            line,
            message: format!("target {} outside 1..={n}", instance.target),
        });
    }
    let frame = match store {
        Some(store) => Some(
            store
                .frame(&instance.frame)
                .ok_or_else(|| Error::UnknownFrame {
                    line,
                    frame: instance.frame.clone(),
                })?,
        ),
        None => None,
    };
    for arg in &instance.arguments {
        if let Some(frame) = frame {
            if !frame.has_fe(&arg.fe) {
                return Err(Error::UnknownFe {
                    line,
                    frame: frame.name.clone(),
                    fe: arg.fe.clone(),
                });
            }
        }
        if arg.start > arg.end {
            return Err(Error::InvalidSpan {
                line,
                message: format!("{}: start {} > end {}", arg.fe, arg.start, arg.end),
            });
        }
        if arg.start < 1 || arg.end > n {
            return Err(Error::InvalidSpan {
                line,
                message: format!(
                    "{}: span ({}, {}) outside 1..={n}",
                    arg.fe, arg.start, arg.end
                ),
            });
        }
    }

    let before = instance.arguments.len();
    let mut kept: Vec<Argument> = Vec::with_capacity(before);
    for arg in instance.arguments.drain(..) {
        match kept.iter_mut().find(|k| k.fe == arg.fe) {
            Some(existing) => {
                if (arg.start, arg.end) < (existing.start, existing.end) {
                    *existing = arg;
                }
            }
            None => kept.push(arg),
        }
    }
    let dropped = before - kept.len();
    instance.arguments = kept;
    Ok((instance, dropped))
}

pub fn load_instances(
    path: impl AsRef<Path>,
    store: &FrameStore,
) -> Result<Vec<AnnotatedInstance>> {
    load_instances_with_stats(path, Some(store)).map(|(v, _)| v)
}

pub fn load_instances_with_stats(
    path: impl AsRef<Path>,
    store: Option<&FrameStore>,
) -> Result<(Vec<AnnotatedInstance>, LoadStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_instances(BufReader::new(file), store)
}

pub fn write_instances(instances: &[AnnotatedInstance], mut out: impl Write) -> Result<()> {
    for instance in instances {
        serde_json::to_writer(&mut out, instance)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    Keep,
    Drop,
}

/// Keeps (or drops) the instances whose frame is in `frames`, preserving order.
pub fn filter_by_frames(
    instances: &[AnnotatedInstance],
    frames: &BTreeSet<String>,
    mode: FilterMode,
) -> Vec<AnnotatedInstance> {
    let keep = mode == FilterMode::Keep;
    instances
        .iter()
        .filter(|inst| frames.contains(&inst.frame) == keep)
        .cloned()
        .collect()
}

/// Caps every named frame at `k` uniformly sampled instances; other frames
/// pass through. Order is preserved and the result depends only on the seed.
pub fn sample_k_shot(
    instances: &[AnnotatedInstance],
    frames: &BTreeSet<String>,
    k: usize,
    seed: u64,
) -> Vec<AnnotatedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retained = vec![true; instances.len()];
    for frame in frames {
        let mut members: Vec<usize> = instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| &inst.frame == frame)
            .map(|(i, _)| i)
            .collect();
        if members.len() <= k {
            continue;
        }
        members.shuffle(&mut rng);
        for &i in &members[k..] {
            retained[i] = false;
        }
    }
    instances
        .iter()
        .zip(retained)
        .filter(|&(_inst, keep)| keep)
        .map(|(inst, _keep)| inst.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mention(fe: &str) -> String {
        format!(r#"{{"fe":"{fe}","surface":"{fe}"}}"#)
    }

    fn attack_line(extra_mention: Option<&str>) -> String {
        let mut def = vec![
            r#"{"text":"An "}"#.to_string(),
            mention("Assailant"),
            r#"{"text":" attacks a "}"#.to_string(),
            mention("Victim"),
            r#"{"text":" for a "}"#.to_string(),
            mention("Purpose"),
        ];
        if let Some(fe) = extra_mention {
            def.push(mention(fe));
        }
        format!(
            r#"{{"name":"Attack","definition":[{}],"fe_order":["Assailant","Victim","Purpose"],"fes":{{"Assailant":{{"core_type":"core","definition":[{{"text":"attacker"}}]}},"Victim":{{"core_type":"core","definition":[{{"text":"attacked"}}]}},"Purpose":{{"core_type":"noncore","definition":[{{"text":"why"}}]}}}}}}"#,
            def.join(",")
        )
    }

    fn store() -> FrameStore {
        FrameStore::from_reader(attack_line(None).as_bytes()).unwrap()
    }

    #[test]
    fn loads_attack_frame() {
        let store = store();
        assert_eq!(store.len(), 1);
        let attack = store.frame("Attack").unwrap();
        assert_eq!(attack.fes.len(), 3);
        assert_eq!(
            attack.definition.text(),
            "An Assailant attacks a Victim for a Purpose"
        );
        assert_eq!(
            attack.definition.mentions().collect::<Vec<_>>(),
            ["Assailant", "Victim", "Purpose"]
        );
    }

    #[test]
    fn empty_file_is_empty_store() {
        let store = FrameStore::from_reader("".as_bytes()).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn unknown_mention_names_fe_and_line() {
        let input = format!("\n{}\n", attack_line(Some("Weapon")));
        let err = FrameStore::from_reader(input.as_bytes()).unwrap_err();
        match &err {
            Error::UnknownMention { line, fe, .. } => {
                assert_eq!(*line, 2);
                assert_eq!(fe, "Weapon");
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains("Weapon"));
    }

    #[test]
    fn duplicate_frame_rejected() {
        let input = format!("{}\n{}\n", attack_line(None), attack_line(None));
        assert!(matches!(
            FrameStore::from_reader(input.as_bytes()),
            Err(Error::DuplicateFrame { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = format!("{}\n{{not json\n", attack_line(None));
        assert!(matches!(
            FrameStore::from_reader(input.as_bytes()),
            Err(Error::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn fe_order_mismatch_rejected() {
        let line = attack_line(None).replace(
            r#""fe_order":["Assailant","Victim","Purpose"]"#,
            r#""fe_order":["Assailant","Victim"]"#,
        );
        assert!(matches!(
            FrameStore::from_reader(line.as_bytes()),
            Err(Error::FeOrderMismatch { .. })
        ));
        let line = attack_line(None).replace(
            r#""fe_order":["Assailant","Victim","Purpose"]"#,
            r#""fe_order":["Assailant","Victim","Purpose","Victim"]"#,
        );
        assert!(matches!(
            FrameStore::from_reader(line.as_bytes()),
            Err(Error::FeOrderMismatch { .. })
        ));
    }

    #[test]
    fn empty_segment_rejected() {
        let line = attack_line(None).replace(r#"{"text":" for a "}"#, r#"{"text":""}"#);
        assert!(matches!(
            FrameStore::from_reader(line.as_bytes()),
            Err(Error::Malformed { .. })
        ));
    }

    fn parse_one(json: &str) -> Result<AnnotatedInstance> {
        let store = store();
        parse_instances(json.as_bytes(), Some(&store)).map(|(mut v, _)| v.remove(0))
    }

    #[test]
    fn accepts_invading_example() {
        let inst = parse_one(
            r#"{"tokens":["he","was","INVADING","Iraq"],"target":3,"frame":"Attack","arguments":[{"fe":"Assailant","start":1,"end":1},{"fe":"Victim","start":4,"end":4}]}"#,
        )
        .unwrap();
        assert_eq!(inst.arguments.len(), 2);
        let empty =
            parse_one(r#"{"tokens":["he"],"target":1,"frame":"Attack","arguments":[]}"#).unwrap();
        assert!(empty.arguments.is_empty());
    }

    #[test]
    fn instance_errors() {
        let bad_span = parse_one(
            r#"{"tokens":["a","b"],"target":1,"frame":"Attack","arguments":[{"fe":"Victim","start":2,"end":1}]}"#,
        );
        assert!(matches!(bad_span, Err(Error::InvalidSpan { .. })));
        let out_of_range = parse_one(
            r#"{"tokens":["a","b"],"target":1,"frame":"Attack","arguments":[{"fe":"Victim","start":2,"end":3}]}"#,
        );
        assert!(matches!(out_of_range, Err(Error::InvalidSpan { .. })));
        let zero = parse_one(
            r#"{"tokens":["a","b"],"target":1,"frame":"Attack","arguments":[{"fe":"Victim","start":0,"end":1}]}"#,
        );
        assert!(matches!(zero, Err(Error::InvalidSpan { .. })));
        let frame = parse_one(r#"{"tokens":["a"],"target":1,"frame":"Motion","arguments":[]}"#);
        assert!(matches!(frame, Err(Error::UnknownFrame { .. })));
        let fe = parse_one(
            r#"{"tokens":["a"],"target":1,"frame":"Attack","arguments":[{"fe":"Weapon","start":1,"end":1}]}"#,
        );
        assert!(matches!(fe, Err(Error::UnknownFe { .. })));
        let target = parse_one(r#"{"tokens":["a"],"target":2,"frame":"Attack","arguments":[]}"#);
        assert!(matches!(target, Err(Error::InvalidSpan { .. })));
    }

    #[test]
    fn repeated_fe_keeps_leftmost_span() {
        let store = store();
        let json = r#"{"tokens":["a","b","c"],"target":1,"frame":"Attack","arguments":[{"fe":"Victim","start":3,"end":3},{"fe":"Victim","start":2,"end":2}]}"#;
        let (v, stats) = parse_instances(json.as_bytes(), Some(&store)).unwrap();
        assert_eq!(
            v[0].arguments,
            vec![Argument {
                fe: "Victim".into(),
                start: 2,
                end: 2
            }]
        );
        assert_eq!(stats.duplicate_fe_spans, 1);
    }

    fn inst(frame: &str, tag: usize) -> AnnotatedInstance {
        AnnotatedInstance {
            tokens: vec![format!("w{tag}")],
            target: 1,
            frame: frame.into(),
            arguments: vec![],
        }
    }

    #[test]
    fn filter_examples() {
        let list = vec![
            inst("Getting", 0),
            inst("Attack", 1),
            inst("Getting", 2),
            inst("Motion", 3),
            inst("Attack", 4),
        ];
        let getting: BTreeSet<String> = ["Getting".to_string()].into();
        let dropped = filter_by_frames(&list, &getting, FilterMode::Drop);
        assert_eq!(
            dropped,
            vec![list[1].clone(), list[3].clone(), list[4].clone()]
        );
        let none = BTreeSet::new();
        assert!(filter_by_frames(&list, &none, FilterMode::Keep).is_empty());
        assert_eq!(filter_by_frames(&list, &none, FilterMode::Drop), list);
    }

    #[test]
    fn k_shot_examples() {
        let mut list: Vec<_> = (0..100).map(|i| inst("Getting", i)).collect();
        list.extend((100..110).map(|i| inst("Attack", i)));
        let getting: BTreeSet<String> = ["Getting".to_string()].into();

        let zero = sample_k_shot(&list, &getting, 0, 3);
        assert_eq!(zero, filter_by_frames(&list, &getting, FilterMode::Drop));

        let a = sample_k_shot(&list, &getting, 32, 11);
        let b = sample_k_shot(&list, &getting, 32, 11);
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|i| i.frame == "Getting").count(), 32);
        assert_eq!(a.iter().filter(|i| i.frame == "Attack").count(), 10);

        // Oracle: redo the seeded draw by hand and compare the retained set.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut idx: Vec<usize> = (0..100).collect();
        idx.shuffle(&mut rng);
        let mut chosen: Vec<usize> = idx[..32].to_vec();
        chosen.sort_unstable();
        let expected: Vec<String> = chosen.iter().map(|i| format!("w{i}")).collect();
        let got: Vec<String> = a
            .iter()
            .filter(|i| i.frame == "Getting")
            .map(|i| i.tokens[0].clone())
            .collect();
        assert_eq!(got, expected);

        let all = sample_k_shot(&list, &getting, 1000, 11);
        assert_eq!(all, list);
    }
}
