//! The whole workflow end to end as library calls: simulate a batch of
//! dialogues from the demo scenario bundle, apply the code sidecar, merge
//! with the demo human corpus, then emit the comparison table and fit the
//! network model.
//!
//! Run: cargo run --example full_pipeline

use std::path::Path;

use dialogue_lab::coding::{apply_assignments, parse_assignments, scheme_default};
use dialogue_lab::corpus::{parse_corpus, validate};
use dialogue_lab::ena::{EnaModel, StanzaConfig};
use dialogue_lab::report::{emit_table2_csv, subtype_table};
use dialogue_lab::sim::{batch_simulate, parse_scenarios, AgentSet, KeyedScriptedBackend, Limits};

fn main() {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo");
    let read = |name: &str| std::fs::read_to_string(demo.join(name)).expect("read demo file");

    // simulate
    let scenarios = parse_scenarios(&read("scenarios.jsonl")).expect("scenarios");
    let backend = KeyedScriptedBackend::parse(&read("script.tsv")).expect("script");
    let batch = batch_simulate(&scenarios, &AgentSet::default_templates(), &backend, &Limits::default(), 4);
    assert!(batch.failures.is_empty(), "{:?}", batch.failures);
    println!("simulated {} dialogues", batch.corpus.dialogues.len());

    // code and merge
    let scheme = scheme_default();
    let assignments = parse_assignments(&read("ai_codes.tsv")).expect("sidecar");
    let ai = apply_assignments(&batch.corpus, &assignments, &scheme).expect("apply codes");
    let mut corpus = parse_corpus(read("human_corpus.jsonl").as_bytes()).expect("human corpus");
    corpus.merge(ai);
    assert!(validate(&corpus, &scheme).is_empty());

    // compare
    print!("{}", emit_table2_csv(&subtype_table(&corpus, &scheme).expect("paired table")));

    let model = EnaModel::fit(&corpus, &scheme, &StanzaConfig::default()).expect("fit");
    let [dim1, _] = model.centroid_tests().expect("tests");
    println!(
        "\nena: fit x={:.4} y={:.4}; dimension-1 separation t({:.2})={:.3}, p={:.4}",
        model.fit[0], model.fit[1], dim1.df, dim1.t, dim1.p_two_sided
    );
}
