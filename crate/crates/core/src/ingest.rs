//! Word-timestamped transcript ingestion.
//!
//! Datasets are JSONL files, one transcript per line:
//!
//! ```text
//! {"id": "s001", "label": 1, "words": [{"w": "cookie", "start": 0.0, "end": 0.4}]}
//! ```
//!
//! `label` is optional (0 = control, 1 = AD) so the same format carries both
//! unlabeled pretraining corpora and labeled fine-tuning corpora.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary diagnosis label. The positive class is AD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Control,
    Ad,
}

impl Label {
    pub fn as_index(self) -> usize {
        match self {
            Label::Control => 0,
            Label::Ad => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        match index {
            0 => Some(Label::Control),
            1 => Some(Label::Ad),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Control => "control",
            Label::Ad => "ad",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_index() as u8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = u8::deserialize(d)?;
        Label::from_index(raw as usize)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {raw}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    #[serde(rename = "w")]
    pub text: String,
    pub start: f64,
    pub end: f64,
}

impl TimedWord {
    pub fn new(text: impl Into<String>, start: f64, end: f64) -> Self {
        TimedWord { text: text.into(), start, end }
    }

    pub fn normalized(&self) -> String {
        normalize_word(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    pub words: Vec<TimedWord>,
}

impl Transcript {
    /// Checks every per-transcript invariant. Dataset-level id uniqueness is
    /// checked by [`validate_dataset`].
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("transcript id is empty".into()));
        }
        if self.words.is_empty() {
            return Err(Error::Validation(format!("transcript {}: no words", self.id)));
        }
        let mut prev_start = f64::NEG_INFINITY;
        for (i, w) in self.words.iter().enumerate() {
            let fail = |msg: &str| Error::Validation(format!("transcript {}: word {i}: {msg}", self.id));
            if !w.start.is_finite() || !w.end.is_finite() {
                return Err(fail("non-finite timestamp"));
            }
            if w.start < 0.0 {
                return Err(fail("negative start time"));
            }
            if w.end < w.start {
                return Err(fail(&format!("end {} < start {}", w.end, w.start)));
            }
            if w.start < prev_start {
                return Err(fail("start times decrease"));
            }
            let norm = w.normalized();
            if norm.is_empty() {
                return Err(fail(&format!("{:?} is empty after normalization", w.text)));
            }
            if norm.chars().any(char::is_whitespace) {
                return Err(fail(&format!("{:?} contains whitespace", w.text)));
            }
            prev_start = w.start;
        }
        Ok(())
    }
}

/// Per-word durations and the pause following each word, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSequence {
    pub durations: Vec<f64>,
    pub pauses: Vec<f64>,
}

impl IntervalSequence {
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }
}

/// Lowercases, strips leading/trailing punctuation, keeps internal
/// characters such as apostrophes.
pub fn normalize_word(raw: &str) -> String {
    raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Word durations plus the non-negative gap to the next word. The final word
/// has no successor and gets a pause of 0.
pub fn extract_intervals(t: &Transcript) -> IntervalSequence {
    let n = t.words.len();
    let durations = t.words.iter().map(|w| w.end - w.start).collect();
    let pauses =
        (0..n).map(|i| if i + 1 < n { (t.words[i + 1].start - t.words[i].end).max(0.0) } else { 0.0 }).collect();
    IntervalSequence { durations, pauses }
}

pub fn validate_dataset(transcripts: &[Transcript]) -> Result<()> {
    let mut seen = HashSet::with_capacity(transcripts.len());
    for t in transcripts {
        t.validate()?;
        if !seen.insert(t.id.as_str()) {
            return Err(Error::Validation(format!("duplicate transcript id {:?}", t.id)));
        }
    }
    Ok(())
}

/// Parses JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_jsonl(text: &str) -> Result<Vec<Transcript>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let t: Transcript =
            serde_json::from_str(line).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        t.validate().map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("line {line_no}: {m}")),
            other => other,
        })?;
        if !seen.insert(t.id.clone()) {
            return Err(Error::Validation(format!("line {line_no}: duplicate transcript id {:?}", t.id)));
        }
        out.push(t);
    }
    Ok(out)
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<Transcript>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text)
}

pub fn to_jsonl(transcripts: &[Transcript]) -> String {
    let mut out = String::new();
    for t in transcripts {
        // Serialization of these plain records cannot fail.
        out.push_str(&serde_json::to_string(t).expect("transcript serializes"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: impl AsRef<Path>, transcripts: &[Transcript]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_jsonl(transcripts).as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(spec: &[(&str, f64, f64)]) -> Transcript {
        Transcript {
            id: "t".into(),
            label: None,
            words: spec.iter().map(|&(w, s, e)| TimedWord::new(w, s, e)).collect(),
        }
    }

    #[test]
    fn minimal_record() {
        let ts = parse_jsonl(r#"{"id":"a","label":1,"words":[{"w":"cookie","start":0.0,"end":0.4}]}"#).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].label, Some(Label::Ad));
        assert_eq!(ts[0].words.len(), 1);
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        assert!(parse_jsonl("").unwrap().is_empty());
    }

    #[test]
    fn end_before_start_names_word() {
        let err =
            parse_jsonl(r#"{"id":"a","words":[{"w":"ok","start":0.0,"end":0.1},{"w":"bad","start":0.2,"end":0.1}]}"#)
                .unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)));
        assert!(msg.contains("word 1"), "{msg}");
    }

    #[test]
    fn malformed_line_names_line() {
        let text = "{\"id\":\"a\",\"words\":[{\"w\":\"x\",\"start\":0,\"end\":1}]}\n{not json\n";
        match parse_jsonl(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let line = r#"{"id":"a","words":[{"w":"x","start":0,"end":1}]}"#;
        let err = parse_jsonl(&format!("{line}\n{line}\n")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn bad_label_rejected() {
        let err = parse_jsonl(r#"{"id":"a","label":2,"words":[{"w":"x","start":0,"end":1}]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn non_increasing_starts_rejected() {
        let t = words(&[("a", 1.0, 1.2), ("b", 0.5, 0.6)]);
        assert!(t.validate().is_err());
    }

    #[test]
    fn intervals_two_words() {
        let iv = extract_intervals(&words(&[("the", 0.00, 0.12), ("boy", 0.30, 0.55)]));
        assert!((iv.durations[0] - 0.12).abs() < 1e-12);
        assert!((iv.durations[1] - 0.25).abs() < 1e-12);
        assert!((iv.pauses[0] - 0.18).abs() < 1e-12);
        assert_eq!(iv.pauses[1], 0.0);
    }

    #[test]
    fn intervals_single_word() {
        let iv = extract_intervals(&words(&[("x", 0.0, 1.0)]));
        assert_eq!(iv.durations, vec![1.0]);
        assert_eq!(iv.pauses, vec![0.0]);
    }

    #[test]
    fn overlap_clamps_to_zero() {
        let iv = extract_intervals(&words(&[("a", 0.5, 1.00), ("b", 0.95, 1.3)]));
        assert_eq!(iv.pauses[0], 0.0);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_word("Cookie,"), "cookie");
        assert_eq!(normalize_word("\"Don't!\""), "don't");
        assert_eq!(normalize_word("..."), "");
        let t = words(&[("...", 0.0, 0.1)]);
        assert!(t.validate().is_err());
    }
}
