//! Paired per-subtype comparison of code proportions between human and ai
//! dialogue groups, emitted as CSV.
//!
//! Run: cargo run --example subtype_stats

use dialogue_lab::coding::scheme_default;
use dialogue_lab::corpus::{Corpus, Dialogue, Group, Utterance};
use dialogue_lab::report::{emit_table2_csv, subtype_table};

fn coded(id: &str, group: Group, problem: &str, codes: &[&str]) -> Dialogue {
    let scheme = scheme_default();
    Dialogue {
        id: id.to_string(),
        group,
        problem_id: problem.to_string(),
        utterances: codes
            .iter()
            .map(|c| Utterance::coded(scheme.code(c).unwrap().role_constraint, "...", *c))
            .collect(),
    }
}

fn main() {
    // human tutors lean on questions and factual responses; the simulated
    // tutor explains more and draws short replies
    let mut dialogues = Vec::new();
    for i in 0..8 {
        let extra = if i % 2 == 0 { "F-F" } else { "F-I" };
        let human_opener = if i % 3 == 0 { "I-H" } else { "I-Q" };
        let ai_probe = if i % 3 == 0 { "I-Q" } else { "F-E" };
        dialogues.push(coded(
            &format!("h{i}"),
            Group::Human,
            &format!("p{i}"),
            &[human_opener, "R-FR", extra, "I-Q", "R-FR", "F-F"],
        ));
        dialogues.push(coded(
            &format!("a{i}"),
            Group::Ai,
            &format!("p{i}"),
            &["F-E", "R-SR", ai_probe, "R-SR", "F-E", extra],
        ));
    }
    let corpus = Corpus::new(dialogues);

    let table = subtype_table(&corpus, &scheme_default()).expect("paired groups");
    print!("{}", emit_table2_csv(&table));
}
