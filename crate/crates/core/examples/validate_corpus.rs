//! Load a corpus file and print every validation violation.
//!
//! Run: cargo run --example validate_corpus [-- path/to/corpus.jsonl]

use std::path::PathBuf;

use dialogue_lab::coding::scheme_default;
use dialogue_lab::corpus::{parse_corpus, validate};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("demo/human_corpus.jsonl")
        });
    let bytes = std::fs::read(&path).expect("read corpus file");
    let corpus = parse_corpus(&bytes).expect("parse corpus");
    println!("{}: {} dialogues", path.display(), corpus.dialogues.len());

    let violations = validate(&corpus, &scheme_default());
    if violations.is_empty() {
        println!("no violations");
    } else {
        for v in &violations {
            println!("{v}");
        }
        std::process::exit(1);
    }
}
