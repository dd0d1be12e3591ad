//! Render a difference network (human minus ai edge weights) to SVG.
//!
//! Run: cargo run --example render_network [-- out.svg]

use dialogue_lab::coding::scheme_default;
use dialogue_lab::corpus::{Corpus, Dialogue, Group, Utterance};
use dialogue_lab::ena::{difference_network, EnaModel, StanzaConfig};
use dialogue_lab::report::{network_from_weights, render_network_svg, NetworkStyle};

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
    for i in 0..12 {
        dialogues.push(coded(
            &format!("h{i:02}"),
            Group::Human,
            &format!("p{i:02}"),
            &["I-Q", "R-FR", "F-F", "I-Q", "R-FR", "F-I"],
        ));
        dialogues.push(coded(
            &format!("a{i:02}"),
            Group::Ai,
            &format!("p{i:02}"),
            &["F-E", "R-SR", "F-E", "R-SR", "I-H", "R-SR"],
        ));
    }
    let model = EnaModel::fit(&Corpus::new(dialogues), &scheme, &StanzaConfig::default())
        .expect("fit model");

    let diff = difference_network(
        &model.group_means[&Group::Human],
        &model.group_means[&Group::Ai],
    );
    let (nodes, edges) = network_from_weights(&model, &diff);
    let mut style = NetworkStyle::default();
    style.legend = vec![
        ("human > ai".to_string(), style.positive_color.clone()),
        ("ai > human".to_string(), style.negative_color.clone()),
    ];
    let svg = render_network_svg(&nodes, &edges, &style).expect("finite coordinates");

    let out = std::env::args().nth(1).unwrap_or_else(|| "difference_network.svg".to_string());
    std::fs::write(&out, svg).expect("write svg");
    println!("wrote {out}");
}
