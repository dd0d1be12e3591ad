//! Inter-rater reliability: Cohen's kappa between two coders over the same
//! utterances, plus the confusion matrix.
//!
//! Run: cargo run --example reliability_kappa

use dialogue_lab::coding::{cohen_kappa, scheme_default};

fn main() {
    let scheme = scheme_default();

    // two raters coding the same 12 utterances; they disagree on two
    let rater_a = [
        "I-Q", "R-FR", "F-F", "I-Q", "R-SR", "F-E", "I-H", "R-FR", "F-I", "I-Q", "R-RR", "F-F",
    ];
    let rater_b = [
        "I-Q", "R-FR", "F-F", "I-Q", "R-SR", "F-I", "I-H", "R-FR", "F-I", "I-Q", "R-IO", "F-F",
    ];
    let a: Vec<String> = rater_a.iter().map(|s| s.to_string()).collect();
    let b: Vec<String> = rater_b.iter().map(|s| s.to_string()).collect();

    let report = cohen_kappa(&a, &b, &scheme).expect("codes must be in the scheme");
    println!("items    = {}", report.n_items);
    println!("observed = {:.4}", report.observed_agreement);
    println!("expected = {:.4}", report.expected_agreement);
    println!("kappa    = {:.4}", report.kappa);

    println!("\nconfusion (rows = rater A, cols = rater B):");
    let ids: Vec<&str> = scheme.ids().collect();
    for (i, row) in report.confusion.iter().enumerate() {
        if row.iter().all(|&c| c == 0) {
            continue;
        }
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, c)| format!("{}={}", ids[j], c))
            .collect();
        println!("{:5}  {}", ids[i], cells.join("  "));
    }
}
