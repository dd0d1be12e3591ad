//! Fit an epistemic network model over a two-group corpus and inspect the
//! projection: group separation tests, goodness of fit, strongest edges.
//!
//! Run: cargo run --example ena_model

use dialogue_lab::coding::scheme_default;
use dialogue_lab::corpus::{Corpus, Dialogue, Group, Utterance};
use dialogue_lab::ena::{pair_list, EnaModel, StanzaConfig};

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
    let scheme = scheme_default();
    let mut dialogues = Vec::new();
    for i in 0..10 {
        // vary one move per dialogue so both projection axes carry variance
        let human_mid = ["F-I", "F-F", "I-H"][i % 3];
        let ai_mid = ["F-I", "I-Q", "I-H"][i % 3];
        dialogues.push(coded(
            &format!("h{i:02}"),
            Group::Human,
            &format!("p{i:02}"),
            &["I-Q", "R-FR", human_mid, "I-Q", "R-FR", "I-Q", "R-FR", "F-F"],
        ));
        dialogues.push(coded(
            &format!("a{i:02}"),
            Group::Ai,
            &format!("p{i:02}"),
            &["F-E", "R-SR", "F-E", "R-SR", ai_mid, "R-SR", "F-E", "R-SR"],
        ));
    }
    let corpus = Corpus::new(dialogues);

    let model = EnaModel::fit(&corpus, &scheme, &StanzaConfig::default()).expect("fit model");
    println!("units          = {}", model.unit_points.len());
    println!("goodness of fit: x={:.4} y={:.4}", model.fit[0], model.fit[1]);

    let [dim1, dim2] = model.centroid_tests().expect("both groups present");
    println!(
        "dimension 1: t({:.2})={:.3}, p={:.4}, d={:.3}",
        dim1.df,
        dim1.t,
        dim1.p_two_sided,
        dim1.d.unwrap_or(f64::NAN)
    );
    println!(
        "dimension 2: t({:.2})={:.3}, p={:.4}, d={:.3}",
        dim2.df,
        dim2.t,
        dim2.p_two_sided,
        dim2.d.unwrap_or(f64::NAN)
    );

    let ids: Vec<&str> = scheme.ids().collect();
    let pairs = pair_list(scheme.len());
    for group in [Group::Human, Group::Ai] {
        let weights = &model.group_means[&group];
        let mut ranked: Vec<usize> = (0..weights.len()).collect();
        ranked.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap());
        println!("\nstrongest {group} edges:");
        for &e in ranked.iter().take(3) {
            let (i, j) = pairs[e];
            println!("  {} -- {}  {:.4}", ids[i], ids[j], weights[e]);
        }
    }
}
