//! Output emission: subtype comparison tables, utterance-length summaries,
//! and deterministic SVG network renderings.
//!
//! Everything here is a pure function of model + style: no analytics are
//! recomputed at render time and no timestamps enter the bytes, so identical
//! inputs produce identical files.

use std::fmt::Write as _;

use thiserror::Error;

use crate::coding::{proportion_vector, CodeScheme, CodingError};
use crate::corpus::{pair_dialogues, utterance_lengths, Corpus, Group, LengthUnit, Speaker};
use crate::ena::{pair_list, EnaModel};
use crate::stats::{self, significance_stars, SampleSummary, TestResult};

/// Render a p-value at 3 decimals with stars; values below 0.001 render
/// as `<0.001`.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        format!("<0.001{}", significance_stars(p))
    } else {
        format!("{:.3}{}", p, significance_stars(p))
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("corpus has no (human, ai) pairs; both groups are required")]
    MissingGroup,
    #[error("non-finite coordinate in network rendering: {0}")]
    NonFiniteCoordinate(String),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
}

/// One row of the subtype comparison table.
#[derive(Debug, Clone)]
pub struct SubtypeRow {
    pub code: String,
    pub ai: SampleSummary,
    pub human: SampleSummary,
    /// Paired t-test over (ai − human) proportions; None when the
    /// differences are degenerate (e.g. a code absent everywhere).
    pub test: Option<TestResult>,
}

/// Paired per-code proportion statistics over all (human, ai) pairs.
pub fn subtype_table(corpus: &Corpus, scheme: &CodeScheme) -> Result<Vec<SubtypeRow>, ReportError> {
    let pairing = pair_dialogues(corpus);
    if pairing.pairs.len() < 2 {
        return Err(ReportError::MissingGroup);
    }
    let mut human_props = Vec::new();
    let mut ai_props = Vec::new();
    for (human, ai) in &pairing.pairs {
        human_props.push(proportion_vector(human, scheme)?);
        ai_props.push(proportion_vector(ai, scheme)?);
    }
    let mut rows = Vec::with_capacity(scheme.len());
    for (idx, code) in scheme.ids().enumerate() {
        let ai_samples: Vec<f64> = ai_props.iter().map(|p| p.proportions[idx]).collect();
        let human_samples: Vec<f64> = human_props.iter().map(|p| p.proportions[idx]).collect();
        rows.push(SubtypeRow {
            code: code.to_string(),
            ai: stats::summarize(&ai_samples)?,
            human: stats::summarize(&human_samples)?,
            test: stats::paired_t(&ai_samples, &human_samples).ok(),
        });
    }
    Ok(rows)
}

/// Render the subtype table as CSV, one row per code in scheme order,
/// numbers at 3 decimals, significance stars appended to p_value.
/// Undefined tests render as NA.
pub fn emit_table2_csv(rows: &[SubtypeRow]) -> String {
    let mut out = String::from("code,ai_mean,ai_std,human_mean,human_std,t_stat,p_value\n");
    for row in rows {
        let (t, p) = match &row.test {
            Some(test) => (format!("{:.3}", test.t), format_p(test.p_two_sided)),
            None => ("NA".to_string(), "NA".to_string()),
        };
        writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{:.3},{},{}",
            row.code, row.ai.mean, row.ai.std, row.human.mean, row.human.std, t, p
        )
        .unwrap();
    }
    out
}

/// Utterance-length comparison per role: group summaries plus a Welch test
/// between groups.
pub fn emit_lengths_csv(corpus: &Corpus, unit: LengthUnit) -> Result<String, ReportError> {
    let samples = utterance_lengths(corpus, unit);
    let mut out =
        String::from("role,ai_n,ai_mean,ai_std,human_n,human_mean,human_std,t_stat,p_value\n");
    for role in [Speaker::Teacher, Speaker::Student] {
        let empty = Vec::new();
        let ai = samples.get(&(Group::Ai, role)).unwrap_or(&empty);
        let human = samples.get(&(Group::Human, role)).unwrap_or(&empty);
        if ai.len() < 2 || human.len() < 2 {
            return Err(ReportError::MissingGroup);
        }
        let ai_s = stats::summarize(ai)?;
        let human_s = stats::summarize(human)?;
        let (t, p) = match stats::welch_t(ai, human) {
            Ok(test) => (format!("{:.3}", test.t), format_p(test.p_two_sided)),
            Err(_) => ("NA".to_string(), "NA".to_string()),
        };
        writeln!(
            out,
            "{role},{},{:.3},{:.3},{},{:.3},{:.3},{},{}",
            ai_s.n, ai_s.mean, ai_s.std, human_s.n, human_s.mean, human_s.std, t, p
        )
        .unwrap();
    }
    Ok(out)
}

/// A node to draw: label, data-space position, and the nonnegative
/// magnitude its radius encodes.
#[derive(Debug, Clone)]
pub struct NetworkNode {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub magnitude: f64,
}

/// An edge to draw between node indices; sign selects the color key.
#[derive(Debug, Clone)]
pub struct NetworkEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct NetworkStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    /// Color for positive-weight edges (first group).
    pub positive_color: String,
    /// Color for negative-weight edges (second group).
    pub negative_color: String,
    pub node_color: String,
    /// Edge thickness floor in px; thickness grows linearly in |weight|.
    pub min_edge_width: f64,
    pub max_edge_width: f64,
    pub min_node_radius: f64,
    pub max_node_radius: f64,
    /// Legend entries: (label, color).
    pub legend: Vec<(String, String)>,
}

impl Default for NetworkStyle {
    fn default() -> Self {
        NetworkStyle {
            width: 640.0,
            height: 640.0,
            margin: 60.0,
            positive_color: "#c0392b".to_string(),
            negative_color: "#2980b9".to_string(),
            node_color: "#2c3e50".to_string(),
            min_edge_width: 0.5,
            max_edge_width: 8.0,
            min_node_radius: 4.0,
            max_node_radius: 14.0,
            legend: Vec::new(),
        }
    }
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Render a node/edge network as a standalone SVG document. Zero-weight
/// edges are omitted; output bytes are deterministic for identical input.
pub fn render_network_svg(
    nodes: &[NetworkNode],
    edges: &[NetworkEdge],
    style: &NetworkStyle,
) -> Result<String, ReportError> {
    for n in nodes {
        if !n.x.is_finite() || !n.y.is_finite() {
            return Err(ReportError::NonFiniteCoordinate(n.label.clone()));
        }
    }

    // map data space into the canvas, preserving aspect ratio
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (-1.0_f64, 1.0_f64, -1.0_f64, 1.0_f64);
    for n in nodes {
        min_x = min_x.min(n.x);
        max_x = max_x.max(n.x);
        min_y = min_y.min(n.y);
        max_y = max_y.max(n.y);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1e-9);
    let scale = (style.width.min(style.height) - 2.0 * style.margin) / span;
    let cx = (min_x + max_x) / 2.0;
    let cy = (min_y + max_y) / 2.0;
    let tx = |x: f64| style.width / 2.0 + (x - cx) * scale;
    // SVG y axis points down
    let ty = |y: f64| style.height / 2.0 - (y - cy) * scale;

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        fmt_coord(style.width),
        fmt_coord(style.height),
        fmt_coord(style.width),
        fmt_coord(style.height)
    )
    .unwrap();
    writeln!(svg, "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();

    let max_weight = edges.iter().map(|e| e.weight.abs()).fold(0.0_f64, f64::max);
    for e in edges {
        if e.weight == 0.0 {
            continue;
        }
        let width = style.min_edge_width
            + (style.max_edge_width - style.min_edge_width) * e.weight.abs() / max_weight;
        let color = if e.weight >= 0.0 {
            &style.positive_color
        } else {
            &style.negative_color
        };
        let (na, nb) = (&nodes[e.a], &nodes[e.b]);
        writeln!(
            svg,
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\" stroke-opacity=\"0.8\"/>",
            fmt_coord(tx(na.x)),
            fmt_coord(ty(na.y)),
            fmt_coord(tx(nb.x)),
            fmt_coord(ty(nb.y)),
            color,
            fmt_coord(width)
        )
        .unwrap();
    }

    let max_mag = nodes.iter().map(|n| n.magnitude).fold(0.0_f64, f64::max);
    for n in nodes {
        let radius = if max_mag > 0.0 {
            style.min_node_radius
                + (style.max_node_radius - style.min_node_radius) * n.magnitude / max_mag
        } else {
            style.min_node_radius
        };
        writeln!(
            svg,
            "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>",
            fmt_coord(tx(n.x)),
            fmt_coord(ty(n.y)),
            fmt_coord(radius),
            style.node_color
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>",
            fmt_coord(tx(n.x) + radius + 2.0),
            fmt_coord(ty(n.y) - radius - 2.0),
            n.label
        )
        .unwrap();
    }

    // legend, always present
    writeln!(svg, "  <g font-size=\"12\" font-family=\"sans-serif\">").unwrap();
    for (i, (label, color)) in style.legend.iter().enumerate() {
        let y = 20.0 + i as f64 * 18.0;
        writeln!(
            svg,
            "    <rect x=\"12\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{}\"/>",
            fmt_coord(y - 4.0),
            color
        )
        .unwrap();
        writeln!(
            svg,
            "    <text x=\"32\" y=\"{}\">{}</text>",
            fmt_coord(y),
            label
        )
        .unwrap();
    }
    if style.legend.is_empty() {
        writeln!(svg, "    <text x=\"12\" y=\"20\">network</text>").unwrap();
    }
    writeln!(svg, "  </g>").unwrap();
    writeln!(svg, "</svg>").unwrap();
    Ok(svg)
}

/// Build drawable nodes/edges for one network over a fitted model's node
/// positions. Node magnitude is the code's total incident edge weight.
pub fn network_from_weights(model: &EnaModel, weights: &[f64]) -> (Vec<NetworkNode>, Vec<NetworkEdge>) {
    let k = model.code_ids.len();
    let pairs = pair_list(k);
    let mut incident = vec![0.0; k];
    let mut edges = Vec::new();
    for (e, &(i, j)) in pairs.iter().enumerate() {
        let w = weights[e];
        if w != 0.0 {
            incident[i] += w.abs();
            incident[j] += w.abs();
            edges.push(NetworkEdge { a: i, b: j, weight: w });
        }
    }
    let nodes = model
        .code_ids
        .iter()
        .enumerate()
        .map(|(i, id)| NetworkNode {
            label: id.clone(),
            x: model.node_positions[i][0],
            y: model.node_positions[i][1],
            magnitude: incident[i],
        })
        .collect();
    (nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::scheme_default;
    use crate::corpus::{Dialogue, Utterance};

    fn coded_dialogue(id: &str, group: Group, problem: &str, codes: &[&str]) -> Dialogue {
        let scheme = scheme_default();
        Dialogue {
            id: id.to_string(),
            group,
            problem_id: problem.to_string(),
            utterances: codes
                .iter()
                .map(|c| Utterance::coded(scheme.code(c).unwrap().role_constraint, "x", *c))
                .collect(),
        }
    }

    fn count_tags(svg: &str, tag: &str) -> usize {
        svg.matches(&format!("<{tag} ")).count()
    }

    #[test]
    fn svg_two_nodes_one_edge() {
        let nodes = vec![
            NetworkNode { label: "A".to_string(), x: -0.5, y: 0.0, magnitude: 1.0 },
            NetworkNode { label: "B".to_string(), x: 0.5, y: 0.2, magnitude: 2.0 },
        ];
        let edges = vec![NetworkEdge { a: 0, b: 1, weight: 0.7 }];
        let svg = render_network_svg(&nodes, &edges, &NetworkStyle::default()).unwrap();
        assert_eq!(count_tags(&svg, "circle"), 2);
        assert_eq!(count_tags(&svg, "line"), 1);
    }

    #[test]
    fn svg_zero_weight_edges_omitted() {
        let nodes = vec![
            NetworkNode { label: "A".to_string(), x: 0.0, y: 0.0, magnitude: 1.0 },
            NetworkNode { label: "B".to_string(), x: 1.0, y: 0.0, magnitude: 1.0 },
        ];
        let edges = vec![NetworkEdge { a: 0, b: 1, weight: 0.0 }];
        let svg = render_network_svg(&nodes, &edges, &NetworkStyle::default()).unwrap();
        assert_eq!(count_tags(&svg, "line"), 0);
    }

    #[test]
    fn svg_empty_network_has_legend() {
        let mut style = NetworkStyle::default();
        style.legend.push(("human".to_string(), "#c0392b".to_string()));
        let svg = render_network_svg(&[], &[], &style).unwrap();
        assert!(svg.contains("human"));
        assert!(svg.starts_with("<svg"));
        assert_eq!(count_tags(&svg, "circle"), 0);
    }

    #[test]
    fn svg_is_deterministic() {
        let nodes = vec![
            NetworkNode { label: "A".to_string(), x: 0.123456, y: -0.9, magnitude: 0.3 },
            NetworkNode { label: "B".to_string(), x: 0.4, y: 0.7, magnitude: 0.9 },
        ];
        let edges = vec![NetworkEdge { a: 0, b: 1, weight: -0.4 }];
        let style = NetworkStyle::default();
        let first = render_network_svg(&nodes, &edges, &style).unwrap();
        let second = render_network_svg(&nodes, &edges, &style).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn svg_rejects_non_finite() {
        let nodes = vec![NetworkNode {
            label: "A".to_string(),
            x: f64::NAN,
            y: 0.0,
            magnitude: 1.0,
        }];
        assert!(matches!(
            render_network_svg(&nodes, &[], &NetworkStyle::default()),
            Err(ReportError::NonFiniteCoordinate(_))
        ));
    }

    fn paired_corpus() -> Corpus {
        let mut dialogues = Vec::new();
        for i in 0..4 {
            let human_codes: &[&str] = if i % 2 == 0 {
                &["I-Q", "R-FR", "F-F", "I-Q"]
            } else {
                &["I-Q", "R-FR", "I-Q", "R-FR"]
            };
            let ai_codes: &[&str] = if i % 2 == 0 {
                &["F-E", "R-SR", "F-E", "R-SR"]
            } else {
                &["F-E", "R-SR", "I-Q", "R-SR"]
            };
            dialogues.push(coded_dialogue(&format!("h{i}"), Group::Human, &format!("p{i}"), human_codes));
            dialogues.push(coded_dialogue(&format!("a{i}"), Group::Ai, &format!("p{i}"), ai_codes));
        }
        Corpus::new(dialogues)
    }

    #[test]
    fn table_rows_in_scheme_order() {
        let scheme = scheme_default();
        let rows = subtype_table(&paired_corpus(), &scheme).unwrap();
        assert_eq!(rows.len(), 10);
        let codes: Vec<&str> = rows.iter().map(|r| r.code.as_str()).collect();
        assert_eq!(codes, scheme.ids().collect::<Vec<_>>());
        // I-Q: human proportions [0.5, 0.5, 0.5, 0.5]; ai [0, 0, 0.25, 0.25]
        let iq = &rows[0];
        assert!((iq.human.mean - 0.5).abs() < 1e-12);
        assert!((iq.ai.mean - 0.125).abs() < 1e-12);
    }

    #[test]
    fn table_csv_round_trips() {
        let scheme = scheme_default();
        let rows = subtype_table(&paired_corpus(), &scheme).unwrap();
        let csv = emit_table2_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "code,ai_mean,ai_std,human_mean,human_std,t_stat,p_value");
        assert_eq!(lines.len(), 11);
        // parse back and compare to the 3-decimal rendering of the source
        for (line, row) in lines[1..].iter().zip(&rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0], row.code);
            assert_eq!(fields[1], format!("{:.3}", row.ai.mean));
            assert_eq!(fields[3], format!("{:.3}", row.human.mean));
            let reparsed: f64 = fields[1].parse().unwrap();
            assert_eq!(format!("{reparsed:.3}"), fields[1]);
        }
    }

    #[test]
    fn table_missing_group_is_an_error() {
        let corpus = Corpus::new(vec![
            coded_dialogue("h0", Group::Human, "p0", &["I-Q", "R-FR"]),
            coded_dialogue("h1", Group::Human, "p1", &["I-Q", "R-FR"]),
        ]);
        assert!(matches!(
            subtype_table(&corpus, &scheme_default()),
            Err(ReportError::MissingGroup)
        ));
    }

    #[test]
    fn lengths_csv_shape() {
        let csv = emit_lengths_csv(&paired_corpus(), LengthUnit::Characters).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("teacher,"));
        assert!(lines[2].starts_with("student,"));
    }
}
