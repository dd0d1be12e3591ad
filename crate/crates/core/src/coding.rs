//! IRF behavioral coding: the 10-subtype scheme, code assignment,
//! per-dialogue proportion vectors, and inter-rater reliability.
//!
//! Initiation and Feedback subtypes are teacher scaffolding moves; Response
//! subtypes are student moves. The scheme's code order is fixed and defines
//! every downstream vector layout.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::{Corpus, Dialogue, Speaker};

/// The three IRF dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Initiation,
    Response,
    Feedback,
}

/// One code of the scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeDef {
    pub id: String,
    pub dimension: Dimension,
    pub role_constraint: Speaker,
    pub label: String,
    pub definition: String,
    pub example: String,
}

/// An ordered code registry. Order is load-bearing: it fixes the layout of
/// proportion vectors and adjacency vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeScheme {
    pub name: String,
    pub version: String,
    pub codes: Vec<CodeDef>,
}

impl CodeScheme {
    pub fn code(&self, id: &str) -> Option<&CodeDef> {
        self.codes.iter().find(|c| c.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.codes.iter().position(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(|c| c.id.as_str())
    }
}

fn def(
    id: &str,
    dimension: Dimension,
    role: Speaker,
    label: &str,
    definition: &str,
    example: &str,
) -> CodeDef {
    CodeDef {
        id: id.to_string(),
        dimension,
        role_constraint: role,
        label: label.to_string(),
        definition: definition.to_string(),
        example: example.to_string(),
    }
}

/// The default 10-subtype IRF scheme.
pub fn scheme_default() -> CodeScheme {
    use Dimension::*;
    use Speaker::*;
    CodeScheme {
        name: "irf-10".to_string(),
        version: "1.0".to_string(),
        codes: vec![
            def(
                "I-Q",
                Initiation,
                Teacher,
                "Questioning",
                "Involves asking students questions that require an active linguistic and cognitive answer.",
                "What is 5+3? How did you get the answer?",
            ),
            def(
                "I-H",
                Initiation,
                Teacher,
                "Hints",
                "The teacher provides clues or suggestions to help the student progress, without giving the full solution.",
                "We need to find the grandfather's age. We know the age difference between the father and Tom, and between the grandfather and the father. How can we use this information?",
            ),
            def(
                "I-M",
                Initiation,
                Teacher,
                "Modeling",
                "The process of offering a behavior for imitation, such as demonstrating a skill.",
                "I will show you how to solve this vertical equation.",
            ),
            def(
                "R-RR",
                Response,
                Student,
                "Refuse to Response",
                "Refusing to answer or remaining silent.",
                "\"I don't know,\" or silence.",
            ),
            def(
                "R-SR",
                Response,
                Student,
                "Simplistic Response",
                "A simple answer that lacks depth.",
                "\"Yeah,\" \"mm,\" or \"okay.\"",
            ),
            def(
                "R-FR",
                Response,
                Student,
                "Factual Response",
                "An answer that is factual, based on memory, or explanatory.",
                "The sum of a triangle's interior angles is 180 degrees.",
            ),
            def(
                "R-IO",
                Response,
                Student,
                "Interpretive/Open-ended",
                "A thorough answer that includes interpretation or explanation.",
                "I think we should first find the location of 1, and then calculate the coordinates for 1/3.",
            ),
            def(
                "F-F",
                Feedback,
                Teacher,
                "Feeding Back",
                "Providing information to the student about their own performance.",
                "\"Good job,\" or \"That's smart.\"",
            ),
            def(
                "F-I",
                Feedback,
                Teacher,
                "Instructing",
                "The teacher tells the student what to do or explains how/why something must be done.",
                "Tom is 5, and the age difference is 30, so the father is 35. The grandfather is 30 years older, so his age is 35+30.",
            ),
            def(
                "F-E",
                Feedback,
                Teacher,
                "Explaining",
                "The teacher provides more detailed information or clarification.",
                "The sum of a triangle's angles is 180°. Since the other two angles are 30° and 60°, the third angle must be 90°.",
            ),
        ],
    }
}

#[derive(Debug, Error)]
pub enum CodingError {
    #[error("utterance index {index} out of range (dialogue {dialogue_id:?} has {len} utterances)")]
    IndexOutOfRange {
        dialogue_id: String,
        index: usize,
        len: usize,
    },
    #[error("unknown code {code:?} at index {index} (dialogue {dialogue_id:?})")]
    UnknownCode {
        dialogue_id: String,
        index: usize,
        code: String,
    },
    #[error("role constraint violated at index {index} (dialogue {dialogue_id:?}): code {code} is a {expected} move but the speaker is {actual}")]
    RoleConstraint {
        dialogue_id: String,
        index: usize,
        code: String,
        expected: Speaker,
        actual: Speaker,
    },
    #[error("dialogue {dialogue_id:?} has no coded utterances")]
    UncodedDialogue { dialogue_id: String },
    #[error("rater code lists differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("rater code lists are empty")]
    EmptyRatings,
    #[error("code {code:?} is not in scheme {scheme:?}")]
    CodeNotInScheme { code: String, scheme: String },
    #[error("sidecar line {line}: {message}")]
    Sidecar { line: usize, message: String },
}

/// Apply code assignments to a dialogue, returning a new dialogue.
/// The input is never mutated; re-applying the same assignments is a no-op.
pub fn apply_codes(
    dialogue: &Dialogue,
    assignments: &[(usize, String)],
    scheme: &CodeScheme,
) -> Result<Dialogue, CodingError> {
    let mut out = dialogue.clone();
    for (index, code) in assignments {
        let index = *index;
        let u = out.utterances.get(index).ok_or_else(|| CodingError::IndexOutOfRange {
            dialogue_id: dialogue.id.clone(),
            index,
            len: dialogue.utterances.len(),
        })?;
        let def = scheme.code(code).ok_or_else(|| CodingError::UnknownCode {
            dialogue_id: dialogue.id.clone(),
            index,
            code: code.clone(),
        })?;
        if def.role_constraint != u.speaker {
            return Err(CodingError::RoleConstraint {
                dialogue_id: dialogue.id.clone(),
                index,
                code: code.clone(),
                expected: def.role_constraint,
                actual: u.speaker,
            });
        }
        out.utterances[index].code = Some(code.clone());
    }
    Ok(out)
}

/// Per-dialogue code proportions over coded utterances, aligned with the
/// scheme's code order. Entries sum to 1 when any utterance is coded.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeProportionVector {
    pub dialogue_id: String,
    /// One fraction per scheme code, in scheme order.
    pub proportions: Vec<f64>,
}

impl CodeProportionVector {
    pub fn get(&self, scheme: &CodeScheme, code: &str) -> Option<f64> {
        scheme.index_of(code).map(|i| self.proportions[i])
    }
}

/// Count-based proportions over the dialogue's coded utterances.
/// Uncoded utterances are excluded from the denominator.
pub fn proportion_vector(
    dialogue: &Dialogue,
    scheme: &CodeScheme,
) -> Result<CodeProportionVector, CodingError> {
    let mut counts = vec![0usize; scheme.len()];
    let mut total = 0usize;
    for code in dialogue.codes() {
        let idx = scheme.index_of(code).ok_or_else(|| CodingError::CodeNotInScheme {
            code: code.to_string(),
            scheme: scheme.name.clone(),
        })?;
        counts[idx] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(CodingError::UncodedDialogue {
            dialogue_id: dialogue.id.clone(),
        });
    }
    Ok(CodeProportionVector {
        dialogue_id: dialogue.id.clone(),
        proportions: counts.iter().map(|&c| c as f64 / total as f64).collect(),
    })
}

/// Cohen's kappa result with the full confusion matrix for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub n_items: usize,
    /// confusion[i][j] = count of items rater A coded `i` and rater B coded
    /// `j`, indices in scheme order.
    pub confusion: Vec<Vec<u64>>,
}

/// Unweighted Cohen's kappa over the scheme's nominal code set,
/// computed jointly over all supplied items.
pub fn cohen_kappa(
    rater_a: &[String],
    rater_b: &[String],
    scheme: &CodeScheme,
) -> Result<ReliabilityReport, CodingError> {
    if rater_a.len() != rater_b.len() {
        return Err(CodingError::LengthMismatch {
            a: rater_a.len(),
            b: rater_b.len(),
        });
    }
    if rater_a.is_empty() {
        return Err(CodingError::EmptyRatings);
    }
    let k = scheme.len();
    let index: HashMap<&str, usize> = scheme.ids().enumerate().map(|(i, id)| (id, i)).collect();
    let lookup = |code: &str| -> Result<usize, CodingError> {
        index.get(code).copied().ok_or_else(|| CodingError::CodeNotInScheme {
            code: code.to_string(),
            scheme: scheme.name.clone(),
        })
    };
    let mut confusion = vec![vec![0u64; k]; k];
    for (a, b) in rater_a.iter().zip(rater_b) {
        confusion[lookup(a)?][lookup(b)?] += 1;
    }
    let n = rater_a.len() as f64;
    let observed = (0..k).map(|i| confusion[i][i]).sum::<u64>() as f64 / n;
    let mut expected = 0.0;
    for i in 0..k {
        let row: u64 = confusion[i].iter().sum();
        let col: u64 = (0..k).map(|r| confusion[r][i]).sum();
        expected += (row as f64 / n) * (col as f64 / n);
    }
    let kappa = if (1.0 - expected).abs() < f64::EPSILON {
        1.0
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(ReliabilityReport {
        kappa,
        observed_agreement: observed,
        expected_agreement: expected,
        n_items: rater_a.len(),
        confusion,
    })
}

/// One entry of the code-assignment sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub dialogue_id: String,
    pub utterance_index: usize,
    pub code: String,
}

/// Parse the sidecar format: one `dialogue_id<TAB>utterance_index<TAB>code`
/// per line. Blank lines are skipped.
pub fn parse_assignments(text: &str) -> Result<Vec<Assignment>, CodingError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(index), Some(code)) =
            (fields.next(), fields.next(), fields.next())
        else {
            return Err(CodingError::Sidecar {
                line: line_no,
                message: "expected dialogue_id<TAB>utterance_index<TAB>code_id".to_string(),
            });
        };
        let index: usize = index.parse().map_err(|_| CodingError::Sidecar {
            line: line_no,
            message: format!("utterance index {index:?} is not a nonnegative integer"),
        })?;
        out.push(Assignment {
            dialogue_id: id.to_string(),
            utterance_index: index,
            code: code.to_string(),
        });
    }
    Ok(out)
}

/// Apply sidecar assignments across a corpus. Assignments naming unknown
/// dialogue ids are an error.
pub fn apply_assignments(
    corpus: &Corpus,
    assignments: &[Assignment],
    scheme: &CodeScheme,
) -> Result<Corpus, CodingError> {
    let mut by_dialogue: HashMap<&str, Vec<(usize, String)>> = HashMap::new();
    for a in assignments {
        by_dialogue
            .entry(&a.dialogue_id)
            .or_default()
            .push((a.utterance_index, a.code.clone()));
    }
    let known: HashMap<&str, ()> = corpus.dialogues.iter().map(|d| (d.id.as_str(), ())).collect();
    for id in by_dialogue.keys() {
        if !known.contains_key(id) {
            return Err(CodingError::Sidecar {
                line: 0,
                message: format!("assignment names unknown dialogue id {id:?}"),
            });
        }
    }
    let mut out = corpus.clone();
    for d in &mut out.dialogues {
        if let Some(assigns) = by_dialogue.get(d.id.as_str()) {
            *d = apply_codes(d, assigns, scheme)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Group, Utterance};

    fn sample_dialogue() -> Dialogue {
        Dialogue {
            id: "d1".to_string(),
            group: Group::Human,
            problem_id: "p1".to_string(),
            utterances: vec![
                Utterance::new(Speaker::Teacher, "What is 5+3?"),
                Utterance::new(Speaker::Student, "8"),
                Utterance::new(Speaker::Teacher, "Good job."),
                Utterance::new(Speaker::Teacher, "And 5+4?"),
            ],
        }
    }

    #[test]
    fn default_scheme_matches_registry() {
        let scheme = scheme_default();
        assert_eq!(scheme.len(), 10);
        let order: Vec<&str> = scheme.ids().collect();
        assert_eq!(
            order,
            ["I-Q", "I-H", "I-M", "R-RR", "R-SR", "R-FR", "R-IO", "F-F", "F-I", "F-E"]
        );
        assert_eq!(
            scheme.code("R-RR").unwrap().definition,
            "Refusing to answer or remaining silent."
        );
        assert_eq!(scheme.code("F-E").unwrap().role_constraint, Speaker::Teacher);
        for c in &scheme.codes {
            let expected = match c.dimension {
                Dimension::Response => Speaker::Student,
                _ => Speaker::Teacher,
            };
            assert_eq!(c.role_constraint, expected, "code {}", c.id);
        }
    }

    #[test]
    fn apply_codes_assigns_and_rejects() {
        let scheme = scheme_default();
        let d = sample_dialogue();
        let coded = apply_codes(&d, &[(0, "I-Q".to_string())], &scheme).unwrap();
        assert_eq!(coded.utterances[0].code.as_deref(), Some("I-Q"));
        assert!(d.utterances[0].code.is_none(), "input must not be mutated");

        let err = apply_codes(&d, &[(0, "R-SR".to_string())], &scheme).unwrap_err();
        assert!(matches!(err, CodingError::RoleConstraint { index: 0, .. }));

        let unchanged = apply_codes(&d, &[], &scheme).unwrap();
        assert_eq!(unchanged, d);
    }

    #[test]
    fn apply_codes_is_idempotent() {
        let scheme = scheme_default();
        let assigns = vec![(0, "I-Q".to_string()), (1, "R-FR".to_string())];
        let once = apply_codes(&sample_dialogue(), &assigns, &scheme).unwrap();
        let twice = apply_codes(&once, &assigns, &scheme).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn proportions_counted_by_hand() {
        let scheme = scheme_default();
        let mut d = sample_dialogue();
        d.utterances[0].code = Some("I-Q".to_string());
        d.utterances[1].code = Some("R-FR".to_string());
        d.utterances[2].code = Some("F-F".to_string());
        d.utterances[3].code = Some("I-Q".to_string());
        let v = proportion_vector(&d, &scheme).unwrap();
        assert_eq!(v.get(&scheme, "I-Q"), Some(0.5));
        assert_eq!(v.get(&scheme, "R-FR"), Some(0.25));
        assert_eq!(v.get(&scheme, "F-F"), Some(0.25));
        assert_eq!(v.get(&scheme, "F-E"), Some(0.0));
        let sum: f64 = v.proportions.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_coded_utterance() {
        let scheme = scheme_default();
        let mut d = sample_dialogue();
        d.utterances[0].code = Some("I-H".to_string());
        let v = proportion_vector(&d, &scheme).unwrap();
        assert_eq!(v.get(&scheme, "I-H"), Some(1.0));
        assert_eq!(v.proportions.iter().filter(|&&p| p > 0.0).count(), 1);
    }

    #[test]
    fn uncoded_dialogue_is_an_error() {
        let scheme = scheme_default();
        let err = proportion_vector(&sample_dialogue(), &scheme).unwrap_err();
        assert!(matches!(err, CodingError::UncodedDialogue { .. }));
    }

    #[test]
    fn kappa_perfect_agreement() {
        let scheme = scheme_default();
        let codes: Vec<String> = ["I-Q", "R-FR", "F-F"].iter().map(|s| s.to_string()).collect();
        let r = cohen_kappa(&codes, &codes, &scheme).unwrap();
        assert!((r.kappa - 1.0).abs() < 1e-15);
        assert_eq!(r.observed_agreement, 1.0);
    }

    #[test]
    fn kappa_two_by_two_hand_computation() {
        let scheme = scheme_default();
        let a: Vec<String> = ["I-Q", "I-Q", "F-F", "F-F"].iter().map(|s| s.to_string()).collect();
        let b: Vec<String> = ["I-Q", "F-F", "I-Q", "F-F"].iter().map(|s| s.to_string()).collect();
        let r = cohen_kappa(&a, &b, &scheme).unwrap();
        assert!((r.observed_agreement - 0.5).abs() < 1e-15);
        assert!((r.expected_agreement - 0.5).abs() < 1e-15);
        assert!(r.kappa.abs() < 1e-15);
        assert_eq!(r.n_items, 4);
    }

    #[test]
    fn kappa_rejects_mismatched_lengths() {
        let scheme = scheme_default();
        let a = vec!["I-Q".to_string()];
        let err = cohen_kappa(&a, &[], &scheme).unwrap_err();
        assert!(matches!(err, CodingError::LengthMismatch { .. }));
    }

    #[test]
    fn sidecar_round_trip() {
        let text = "d1\t0\tI-Q\nd1\t1\tR-FR\n\nd2\t3\tF-E\n";
        let assigns = parse_assignments(text).unwrap();
        assert_eq!(assigns.len(), 3);
        assert_eq!(assigns[2].dialogue_id, "d2");
        assert_eq!(assigns[2].utterance_index, 3);
        assert!(parse_assignments("d1\tzero\tI-Q").is_err());
        assert!(parse_assignments("d1\t0").is_err());
    }
}
