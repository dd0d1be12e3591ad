//! Dialogue corpus data model, JSONL serialization, validation, and
//! human/AI pairing.
//!
//! The on-disk format is line-delimited: one dialogue object per line, UTF-8,
//! with keys `id`, `group` ("human"|"ai"), `problem_id`, and `utterances`
//! (array of `{speaker, text, code?}`). Corpus values are immutable after
//! parsing and safe to share across threads.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::CodeScheme;

/// Who produced an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Teacher,
    Student,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::Teacher => write!(f, "teacher"),
            Speaker::Student => write!(f, "student"),
        }
    }
}

/// Which corpus a dialogue belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Human,
    Ai,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::Human => write!(f, "human"),
            Group::Ai => write!(f, "ai"),
        }
    }
}

/// One turn of a dialogue, optionally carrying an IRF code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
}

impl Utterance {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Utterance {
            speaker,
            text: text.into(),
            code: None,
        }
    }

    pub fn coded(speaker: Speaker, text: impl Into<String>, code: impl Into<String>) -> Self {
        Utterance {
            speaker,
            text: text.into(),
            code: Some(code.into()),
        }
    }
}

/// An ordered tutoring conversation about one problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub group: Group,
    pub problem_id: String,
    pub utterances: Vec<Utterance>,
}

impl Dialogue {
    /// Iterator over the codes of coded utterances, in turn order.
    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.utterances.iter().filter_map(|u| u.code.as_deref())
    }

    pub fn coded_count(&self) -> usize {
        self.codes().count()
    }
}

/// A set of dialogues plus free-form metadata.
///
/// Metadata is not part of the line-delimited file format; it carries
/// run-level annotations such as truncation flags from simulation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub dialogues: Vec<Dialogue>,
    pub metadata: BTreeMap<String, String>,
}

impl Corpus {
    pub fn new(dialogues: Vec<Dialogue>) -> Self {
        Corpus {
            dialogues,
            metadata: BTreeMap::new(),
        }
    }

    /// Merge another corpus into this one, concatenating dialogues and
    /// metadata (other's keys win on collision).
    pub fn merge(&mut self, other: Corpus) {
        self.dialogues.extend(other.dialogues);
        self.metadata.extend(other.metadata);
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed dialogue document: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: dialogue {dialogue_id:?}: {message}")]
    Schema {
        line: usize,
        dialogue_id: String,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

// Raw mirror of the wire format; enum fields validated by hand so schema
// errors can name the offending dialogue id.
#[derive(Deserialize)]
struct RawUtterance {
    speaker: String,
    text: String,
    #[serde(default)]
    code: Option<String>,
}

#[derive(Deserialize)]
struct RawDialogue {
    id: String,
    group: String,
    problem_id: String,
    utterances: Vec<RawUtterance>,
}

/// Parse a line-delimited corpus document. Blank lines are ignored.
pub fn parse_corpus(bytes: &[u8]) -> Result<Corpus, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::Parse {
        line: 0,
        message: format!("not valid UTF-8: {e}"),
    })?;
    let mut dialogues = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDialogue =
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let group = match raw.group.as_str() {
            "human" => Group::Human,
            "ai" => Group::Ai,
            other => {
                return Err(CorpusError::Schema {
                    line: line_no,
                    dialogue_id: raw.id,
                    message: format!("unknown group {other:?} (expected \"human\" or \"ai\")"),
                })
            }
        };
        let mut utterances = Vec::with_capacity(raw.utterances.len());
        for (ui, ru) in raw.utterances.into_iter().enumerate() {
            let speaker = match ru.speaker.as_str() {
                "teacher" => Speaker::Teacher,
                "student" => Speaker::Student,
                other => {
                    return Err(CorpusError::Schema {
                        line: line_no,
                        dialogue_id: raw.id,
                        message: format!(
                            "utterance {ui}: unknown speaker {other:?} (expected \"teacher\" or \"student\")"
                        ),
                    })
                }
            };
            utterances.push(Utterance {
                speaker,
                text: ru.text,
                code: ru.code,
            });
        }
        dialogues.push(Dialogue {
            id: raw.id,
            group,
            problem_id: raw.problem_id,
            utterances,
        });
    }
    Ok(Corpus::new(dialogues))
}

/// Serialize a corpus to the line-delimited format. `parse_corpus` of the
/// result reproduces the input dialogues exactly.
pub fn serialize_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for d in &corpus.dialogues {
        out.push_str(&serde_json::to_string(d).expect("dialogue serializes"));
        out.push('\n');
    }
    out
}

/// A single validation finding. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub dialogue_id: String,
    pub utterance_index: Option<usize>,
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.utterance_index {
            Some(i) => write!(
                f,
                "{}\t[{}] utterance {}: {}",
                self.dialogue_id, self.rule, i, self.message
            ),
            None => write!(f, "{}\t[{}] {}", self.dialogue_id, self.rule, self.message),
        }
    }
}

fn violation(
    dialogue_id: &str,
    utterance_index: Option<usize>,
    rule: &str,
    message: String,
) -> Violation {
    Violation {
        dialogue_id: dialogue_id.to_string(),
        utterance_index,
        rule: rule.to_string(),
        message,
    }
}

/// Check every corpus invariant and every role constraint of the scheme.
/// Returns an empty list iff the corpus is fully valid.
pub fn validate(corpus: &Corpus, scheme: &CodeScheme) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen_ids: HashSet<&str> = HashSet::new();
    let mut seen_problems: HashSet<(Group, &str)> = HashSet::new();

    for d in &corpus.dialogues {
        if !seen_ids.insert(&d.id) {
            violations.push(violation(
                &d.id,
                None,
                "unique-id",
                format!("dialogue id {:?} occurs more than once", d.id),
            ));
        }
        if !seen_problems.insert((d.group, &d.problem_id)) {
            violations.push(violation(
                &d.id,
                None,
                "unique-problem",
                format!(
                    "problem {:?} has more than one {} dialogue",
                    d.problem_id, d.group
                ),
            ));
        }
        if d.utterances.len() < 2 {
            violations.push(violation(
                &d.id,
                None,
                "min-utterances",
                format!("dialogue has {} utterance(s), need at least 2", d.utterances.len()),
            ));
        }
        let has_teacher = d.utterances.iter().any(|u| u.speaker == Speaker::Teacher);
        let has_student = d.utterances.iter().any(|u| u.speaker == Speaker::Student);
        if !d.utterances.is_empty() && (!has_teacher || !has_student) {
            violations.push(violation(
                &d.id,
                None,
                "role-coverage",
                "dialogue must contain at least one teacher and one student utterance".to_string(),
            ));
        }
        for (i, u) in d.utterances.iter().enumerate() {
            if u.text.trim().is_empty() {
                violations.push(violation(
                    &d.id,
                    Some(i),
                    "empty-text",
                    "utterance text is empty after trimming whitespace".to_string(),
                ));
            }
            if let Some(code) = &u.code {
                match scheme.code(code) {
                    None => violations.push(violation(
                        &d.id,
                        Some(i),
                        "unknown-code",
                        format!("code {code:?} is not in scheme {:?}", scheme.name),
                    )),
                    Some(def) => {
                        if def.role_constraint != u.speaker {
                            violations.push(violation(
                                &d.id,
                                Some(i),
                                "role-constraint",
                                format!(
                                    "code {} is a {} move but the speaker is {}",
                                    code, def.role_constraint, u.speaker
                                ),
                            ));
                        }
                    }
                }
            }
        }
    }
    violations
}

/// Result of pairing by problem: complete pairs plus everything left over.
/// Unpaired dialogues are reported, never dropped.
#[derive(Debug, Clone)]
pub struct Pairing<'a> {
    /// (human, ai) pairs, sorted by problem_id.
    pub pairs: Vec<(&'a Dialogue, &'a Dialogue)>,
    /// Dialogues whose problem lacks a counterpart in the other group.
    pub unpaired: Vec<&'a Dialogue>,
}

/// Pair human and ai dialogues by problem_id.
pub fn pair_dialogues(corpus: &Corpus) -> Pairing<'_> {
    let mut by_problem: BTreeMap<&str, (Option<&Dialogue>, Option<&Dialogue>)> = BTreeMap::new();
    for d in &corpus.dialogues {
        let entry = by_problem.entry(&d.problem_id).or_default();
        match d.group {
            Group::Human => entry.0 = entry.0.or(Some(d)),
            Group::Ai => entry.1 = entry.1.or(Some(d)),
        }
    }
    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for (_, slot) in by_problem {
        match slot {
            (Some(h), Some(a)) => pairs.push((h, a)),
            (Some(h), None) => unpaired.push(h),
            (None, Some(a)) => unpaired.push(a),
            (None, None) => unreachable!(),
        }
    }
    Pairing { pairs, unpaired }
}

/// How to measure utterance length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthUnit {
    /// Unicode scalar values; the default, suited to CJK text.
    Characters,
    /// Whitespace-separated tokens, for Latin-script corpora.
    WhitespaceTokens,
}

/// Per-(group, role) utterance length samples, one entry per utterance.
pub fn utterance_lengths(
    corpus: &Corpus,
    unit: LengthUnit,
) -> BTreeMap<(Group, Speaker), Vec<f64>> {
    let mut samples: BTreeMap<(Group, Speaker), Vec<f64>> = BTreeMap::new();
    for d in &corpus.dialogues {
        for u in &d.utterances {
            let len = match unit {
                LengthUnit::Characters => u.text.chars().count(),
                LengthUnit::WhitespaceTokens => u.text.split_whitespace().count(),
            };
            samples
                .entry((d.group, u.speaker))
                .or_default()
                .push(len as f64);
        }
    }
    samples
}

/// Count dialogues per group; used to cross-check pairing accounting.
pub fn group_counts(corpus: &Corpus) -> HashMap<Group, usize> {
    let mut counts = HashMap::new();
    for d in &corpus.dialogues {
        *counts.entry(d.group).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::scheme_default;

    fn dialogue(id: &str, group: Group, problem: &str) -> Dialogue {
        Dialogue {
            id: id.to_string(),
            group,
            problem_id: problem.to_string(),
            utterances: vec![
                Utterance::coded(Speaker::Teacher, "What is 5+3?", "I-Q"),
                Utterance::coded(Speaker::Student, "8", "R-FR"),
            ],
        }
    }

    #[test]
    fn parse_minimal_document() {
        let doc = br#"{"id":"d1","group":"human","problem_id":"p1","utterances":[{"speaker":"teacher","text":"What is 5+3?"},{"speaker":"student","text":"8"}]}"#;
        let corpus = parse_corpus(doc).unwrap();
        assert_eq!(corpus.dialogues.len(), 1);
        assert_eq!(corpus.dialogues[0].utterances.len(), 2);
        assert_eq!(corpus.dialogues[0].utterances[0].speaker, Speaker::Teacher);
    }

    #[test]
    fn parse_rejects_unknown_speaker() {
        let doc = br#"{"id":"d1","group":"human","problem_id":"p1","utterances":[{"speaker":"dean","text":"hm"}]}"#;
        let err = parse_corpus(doc).unwrap_err();
        match err {
            CorpusError::Schema { dialogue_id, .. } => assert_eq!(dialogue_id, "d1"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn parse_reports_line_of_malformed_json() {
        let doc = b"{\"id\":\"d1\",\"group\":\"human\",\"problem_id\":\"p\",\"utterances\":[]}\nnot json\n";
        let err = parse_corpus(doc).unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn merged_parallel_corpora_count() {
        let mut dialogues = Vec::new();
        for i in 0..49 {
            dialogues.push(dialogue(&format!("h{i}"), Group::Human, &format!("p{i}")));
            dialogues.push(dialogue(&format!("a{i}"), Group::Ai, &format!("p{i}")));
        }
        let corpus = Corpus::new(dialogues);
        let reparsed = parse_corpus(serialize_corpus(&corpus).as_bytes()).unwrap();
        assert_eq!(reparsed.dialogues.len(), 98);
        let mut problems: HashMap<&str, usize> = HashMap::new();
        for d in &reparsed.dialogues {
            *problems.entry(d.problem_id.as_str()).or_insert(0) += 1;
        }
        assert_eq!(problems.len(), 49);
        assert!(problems.values().all(|&c| c == 2));
    }

    #[test]
    fn validate_clean_corpus() {
        let corpus = Corpus::new(vec![dialogue("d1", Group::Human, "p1")]);
        assert!(validate(&corpus, &scheme_default()).is_empty());
    }

    #[test]
    fn validate_flags_role_constraint() {
        let mut d = dialogue("d1", Group::Human, "p1");
        d.utterances[1].code = Some("I-Q".to_string()); // I codes are teacher moves
        let corpus = Corpus::new(vec![d]);
        let violations = validate(&corpus, &scheme_default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, "role-constraint");
        assert_eq!(violations[0].utterance_index, Some(1));
    }

    #[test]
    fn validate_flags_duplicate_id() {
        let d1 = dialogue("d1", Group::Human, "p1");
        let mut d2 = dialogue("d1", Group::Human, "p2");
        d2.problem_id = "p2".to_string();
        let corpus = Corpus::new(vec![d1, d2]);
        let violations = validate(&corpus, &scheme_default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, "unique-id");
    }

    #[test]
    fn pairing_accounts_for_every_dialogue() {
        let mut dialogues = Vec::new();
        for i in 0..3 {
            dialogues.push(dialogue(&format!("h{i}"), Group::Human, &format!("p{i}")));
        }
        // p2 has no ai counterpart
        dialogues.push(dialogue("a0", Group::Ai, "p0"));
        dialogues.push(dialogue("a1", Group::Ai, "p1"));
        let corpus = Corpus::new(dialogues);
        let pairing = pair_dialogues(&corpus);
        assert_eq!(pairing.pairs.len(), 2);
        assert_eq!(pairing.unpaired.len(), 1);
        assert_eq!(pairing.unpaired[0].id, "h2");
        assert_eq!(
            pairing.pairs.len() * 2 + pairing.unpaired.len(),
            corpus.dialogues.len()
        );
    }

    #[test]
    fn unpaired_only_corpus() {
        let dialogues: Vec<_> = (0..49)
            .map(|i| dialogue(&format!("h{i}"), Group::Human, &format!("p{i}")))
            .collect();
        let corpus = Corpus::new(dialogues);
        let pairing = pair_dialogues(&corpus);
        assert_eq!(pairing.pairs.len(), 0);
        assert_eq!(pairing.unpaired.len(), 49);
    }

    #[test]
    fn lengths_by_unit() {
        let d = Dialogue {
            id: "d1".to_string(),
            group: Group::Human,
            problem_id: "p1".to_string(),
            utterances: vec![
                Utterance::new(Speaker::Teacher, "what is 5+3"),
                Utterance::new(Speaker::Student, "abc"),
                Utterance::new(Speaker::Teacher, "好的继续"),
                Utterance::new(Speaker::Student, "8"),
            ],
        };
        let corpus = Corpus::new(vec![d]);
        let by_chars = utterance_lengths(&corpus, LengthUnit::Characters);
        assert_eq!(by_chars[&(Group::Human, Speaker::Teacher)], vec![11.0, 4.0]);
        assert_eq!(by_chars[&(Group::Human, Speaker::Student)], vec![3.0, 1.0]);
        let by_tokens = utterance_lengths(&corpus, LengthUnit::WhitespaceTokens);
        assert_eq!(by_tokens[&(Group::Human, Speaker::Teacher)], vec![3.0, 1.0]);
    }
}
