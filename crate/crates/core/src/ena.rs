//! Epistemic network analysis over coded dialogue corpora.
//!
//! Each dialogue becomes a vector of code co-occurrence strengths over the
//! scheme's unordered code pairs (accumulation), scaled to unit length
//! (spherical normalization), and projected into a plane whose first axis is
//! the difference of the two group means (means rotation) and whose second
//! axis is the leading singular direction of the deflated data. Code nodes
//! are co-registered by least squares so each unit's point approximates its
//! network's weighted centroid.
//!
//! Defaults follow the standard two-group setup: moving stanza window of 4,
//! binary accumulation, spherical normalization, means rotation on axis 1.
//! All are configurable and echoed into output manifests.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::coding::CodeScheme;
use crate::corpus::{Corpus, Group};
use crate::stats::{self, TestResult};

#[derive(Debug, Error)]
pub enum EnaError {
    #[error("dialogue {dialogue_id:?}: code {code:?} is not in scheme {scheme:?}")]
    UnknownCode {
        dialogue_id: String,
        code: String,
        scheme: String,
    },
    #[error("group {0} has no units")]
    EmptyGroup(Group),
    #[error("group means are identical; means-rotation axis is degenerate")]
    DegenerateAxis,
    #[error("vector length {got} does not match edge-space dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("no units to fit")]
    NoUnits,
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
}

/// Number of unordered code pairs for a k-code scheme.
pub fn pair_count(k: usize) -> usize {
    k * (k - 1) / 2
}

/// Canonical index of the unordered pair (i, j), i < j, in lexicographic
/// order by scheme position.
pub fn pair_index(i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * k - i * (i + 1) / 2 + (j - i - 1)
}

/// The (i, j) code positions for every edge index, in canonical order.
pub fn pair_list(k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(pair_count(k));
    for i in 0..k {
        for j in (i + 1)..k {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Per-dialogue co-occurrence edge weights over the canonical pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyVector {
    pub dialogue_id: String,
    pub group: Group,
    pub weights: Vec<f64>,
}

impl AdjacencyVector {
    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Stanza window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Moving window of this many consecutive coded utterances (≥ 2).
    /// Dialogues shorter than the window form a single whole window.
    Size(usize),
    /// The full dialogue is one window.
    WholeConversation,
}

/// How codes within a window contribute to an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accumulation {
    /// A pair present in a window contributes 1 per window.
    Binary,
    /// A pair contributes the product of the two codes' counts per window.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StanzaConfig {
    pub window: Window,
    pub accumulation: Accumulation,
}

impl Default for StanzaConfig {
    fn default() -> Self {
        StanzaConfig {
            window: Window::Size(4),
            accumulation: Accumulation::Binary,
        }
    }
}

impl std::fmt::Display for StanzaConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.window {
            Window::Size(w) => write!(f, "window={w}")?,
            Window::WholeConversation => write!(f, "window=whole_conversation")?,
        }
        match self.accumulation {
            Accumulation::Binary => write!(f, " accumulation=binary"),
            Accumulation::Weighted => write!(f, " accumulation=weighted"),
        }
    }
}

/// A dialogue left out of the analysis, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub dialogue_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct AccumulationResult {
    pub vectors: Vec<AdjacencyVector>,
    pub excluded: Vec<Exclusion>,
}

fn accumulate_codes(code_indices: &[usize], k: usize, cfg: &StanzaConfig) -> Vec<f64> {
    let n = code_indices.len();
    let window = match cfg.window {
        Window::WholeConversation => n,
        Window::Size(w) => w.min(n),
    };
    let mut weights = vec![0.0; pair_count(k)];
    let mut counts = vec![0usize; k];
    for start in 0..=(n - window) {
        counts.iter_mut().for_each(|c| *c = 0);
        for &c in &code_indices[start..start + window] {
            counts[c] += 1;
        }
        for i in 0..k {
            if counts[i] == 0 {
                continue;
            }
            for j in (i + 1)..k {
                if counts[j] == 0 {
                    continue;
                }
                let idx = pair_index(i, j, k);
                weights[idx] += match cfg.accumulation {
                    Accumulation::Binary => 1.0,
                    Accumulation::Weighted => (counts[i] * counts[j]) as f64,
                };
            }
        }
    }
    weights
}

/// Accumulate one adjacency vector per dialogue. Dialogues with fewer than
/// two coded utterances go to the exclusions report. Dialogue order is
/// normalized by sorting on dialogue id.
pub fn accumulate(
    corpus: &Corpus,
    scheme: &CodeScheme,
    cfg: &StanzaConfig,
) -> Result<AccumulationResult, EnaError> {
    let k = scheme.len();
    let mut vectors = Vec::new();
    let mut excluded = Vec::new();
    for d in &corpus.dialogues {
        let mut indices = Vec::new();
        for code in d.codes() {
            let idx = scheme.index_of(code).ok_or_else(|| EnaError::UnknownCode {
                dialogue_id: d.id.clone(),
                code: code.to_string(),
                scheme: scheme.name.clone(),
            })?;
            indices.push(idx);
        }
        if indices.len() < 2 {
            excluded.push(Exclusion {
                dialogue_id: d.id.clone(),
                reason: format!("{} coded utterance(s), need at least 2", indices.len()),
            });
            continue;
        }
        vectors.push(AdjacencyVector {
            dialogue_id: d.id.clone(),
            group: d.group,
            weights: accumulate_codes(&indices, k, cfg),
        });
    }
    vectors.sort_by(|a, b| a.dialogue_id.cmp(&b.dialogue_id));
    Ok(AccumulationResult { vectors, excluded })
}

/// Scale a vector to unit Euclidean length. A zero vector is returned
/// unchanged with the flag set.
pub fn spherical_normalize(v: &AdjacencyVector) -> (AdjacencyVector, bool) {
    let norm = v.norm();
    if norm == 0.0 {
        return (v.clone(), true);
    }
    let mut out = v.clone();
    out.weights.iter_mut().for_each(|w| *w /= norm);
    (out, false)
}

/// Normalize a whole set; zero-norm units are dropped from the result and
/// listed as exclusions.
pub fn normalize_all(vectors: &[AdjacencyVector]) -> (Vec<AdjacencyVector>, Vec<Exclusion>) {
    let mut kept = Vec::with_capacity(vectors.len());
    let mut excluded = Vec::new();
    for v in vectors {
        let (nv, zero) = spherical_normalize(v);
        if zero {
            excluded.push(Exclusion {
                dialogue_id: v.dialogue_id.clone(),
                reason: "zero-norm adjacency vector (no co-occurrences)".to_string(),
            });
        } else {
            kept.push(nv);
        }
    }
    (kept, excluded)
}

fn mean_of(vectors: &[&AdjacencyVector], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, w) in mean.iter_mut().zip(&v.weights) {
            *m += w;
        }
    }
    let n = vectors.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Element-wise mean of the group's vectors.
pub fn group_mean_network(vectors: &[AdjacencyVector], group: Group) -> Result<Vec<f64>, EnaError> {
    let members: Vec<&AdjacencyVector> = vectors.iter().filter(|v| v.group == group).collect();
    if members.is_empty() {
        return Err(EnaError::EmptyGroup(group));
    }
    Ok(mean_of(&members, members[0].weights.len()))
}

/// Signed edge-wise difference mean(a) − mean(b).
pub fn difference_network(mean_a: &[f64], mean_b: &[f64]) -> Vec<f64> {
    mean_a.iter().zip(mean_b).map(|(a, b)| a - b).collect()
}

/// The fitted projection basis: grand mean plus two orthonormal axes.
/// Axis 1 separates the group means; axis 2 is the leading residual
/// direction after deflation.
#[derive(Debug, Clone)]
pub struct RotationBasis {
    pub grand_mean: Vec<f64>,
    pub axes: [Vec<f64>; 2],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Means rotation over a two-group vector set. Axis 1 is oriented so the
/// human group mean projects to x ≥ 0.
pub fn means_rotation(vectors: &[AdjacencyVector]) -> Result<RotationBasis, EnaError> {
    if vectors.is_empty() {
        return Err(EnaError::NoUnits);
    }
    let dim = vectors[0].weights.len();
    let mean_human = group_mean_network(vectors, Group::Human)?;
    let mean_ai = group_mean_network(vectors, Group::Ai)?;
    let all: Vec<&AdjacencyVector> = vectors.iter().collect();
    let grand_mean = mean_of(&all, dim);

    let mut axis1 = difference_network(&mean_human, &mean_ai);
    let norm1 = dot(&axis1, &axis1).sqrt();
    if norm1 < 1e-12 {
        return Err(EnaError::DegenerateAxis);
    }
    axis1.iter_mut().for_each(|x| *x /= norm1);
    // orientation: human centroid on the nonnegative x side
    let human_centered: Vec<f64> = mean_human.iter().zip(&grand_mean).map(|(a, g)| a - g).collect();
    if dot(&human_centered, &axis1) < 0.0 {
        axis1.iter_mut().for_each(|x| *x = -*x);
    }

    // deflate the centered data against axis 1 and take the leading
    // right singular vector of the residual
    let n = vectors.len();
    let mut data = DMatrix::zeros(n, dim);
    for (r, v) in vectors.iter().enumerate() {
        for c in 0..dim {
            data[(r, c)] = v.weights[c] - grand_mean[c];
        }
    }
    let a1 = DMatrix::from_row_slice(1, dim, &axis1);
    let scores = &data * a1.transpose(); // n×1
    let deflated = &data - &scores * &a1;
    let svd = deflated.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut best = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > svd.singular_values[best] {
            best = i;
        }
    }
    let mut axis2: Vec<f64> = if svd.singular_values[best] > 1e-12 {
        (0..dim).map(|c| v_t[(best, c)]).collect()
    } else {
        // residual is rank zero; pick any direction orthogonal to axis 1
        let pivot = (0..dim)
            .min_by(|&a, &b| axis1[a].abs().partial_cmp(&axis1[b].abs()).unwrap())
            .unwrap();
        let mut e = vec![0.0; dim];
        e[pivot] = 1.0;
        e
    };
    // re-orthogonalize against axis 1 and renormalize
    let proj = dot(&axis2, &axis1);
    for (x, a) in axis2.iter_mut().zip(&axis1) {
        *x -= proj * a;
    }
    let norm2 = dot(&axis2, &axis2).sqrt();
    axis2.iter_mut().for_each(|x| *x /= norm2);
    // deterministic sign: largest-magnitude component positive
    let lead = (0..dim)
        .max_by(|&a, &b| axis2[a].abs().partial_cmp(&axis2[b].abs()).unwrap())
        .unwrap();
    if axis2[lead] < 0.0 {
        axis2.iter_mut().for_each(|x| *x = -*x);
    }

    Ok(RotationBasis {
        grand_mean,
        axes: [axis1, axis2],
    })
}

/// One projected analysis unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPoint {
    pub dialogue_id: String,
    pub group: Group,
    pub x: f64,
    pub y: f64,
}

/// Project centered vectors onto the fitted axes.
pub fn project(basis: &RotationBasis, vectors: &[AdjacencyVector]) -> Result<Vec<UnitPoint>, EnaError> {
    let dim = basis.grand_mean.len();
    let mut points = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.weights.len() != dim {
            return Err(EnaError::DimensionMismatch {
                got: v.weights.len(),
                expected: dim,
            });
        }
        let centered: Vec<f64> = v.weights.iter().zip(&basis.grand_mean).map(|(w, g)| w - g).collect();
        points.push(UnitPoint {
            dialogue_id: v.dialogue_id.clone(),
            group: v.group,
            x: dot(&centered, &basis.axes[0]),
            y: dot(&centered, &basis.axes[1]),
        });
    }
    Ok(points)
}

/// Co-registered node positions with per-dimension goodness of fit.
#[derive(Debug, Clone)]
pub struct NodeFit {
    /// Per-code (x, y), in scheme order.
    pub positions: Vec<[f64; 2]>,
    /// Pearson correlation between unit points and network centroids,
    /// per dimension.
    pub fit: [f64; 2],
    /// True when the least-squares system was rank deficient and the
    /// minimum-norm pseudo-inverse solution was used.
    pub rank_deficient: bool,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    let denom = (va * vb).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        cov / denom
    }
}

/// Build the centroid design matrix: row u, column c holds code c's share of
/// unit u's edge-midpoint average.
fn centroid_matrix(vectors: &[AdjacencyVector], k: usize) -> DMatrix<f64> {
    let pairs = pair_list(k);
    let mut a = DMatrix::zeros(vectors.len(), k);
    for (r, v) in vectors.iter().enumerate() {
        let total: f64 = v.weights.iter().sum();
        if total == 0.0 {
            continue;
        }
        for (e, &(i, j)) in pairs.iter().enumerate() {
            let w = v.weights[e];
            if w != 0.0 {
                a[(r, i)] += 0.5 * w / total;
                a[(r, j)] += 0.5 * w / total;
            }
        }
    }
    a
}

/// The weighted mean of edge midpoints for one unit under given node
/// positions; the quantity the least-squares fit matches to unit points.
pub fn network_centroid(weights: &[f64], positions: &[[f64; 2]], k: usize) -> [f64; 2] {
    let pairs = pair_list(k);
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return [0.0, 0.0];
    }
    let mut cx = 0.0;
    let mut cy = 0.0;
    for (e, &(i, j)) in pairs.iter().enumerate() {
        let w = weights[e];
        cx += w * 0.5 * (positions[i][0] + positions[j][0]);
        cy += w * 0.5 * (positions[i][1] + positions[j][1]);
    }
    [cx / total, cy / total]
}

/// Solve for node positions minimizing the squared distance between each
/// unit's point and its network centroid, per dimension. Rank-deficient
/// systems fall back to the minimum-norm solution and are flagged.
pub fn fit_nodes(
    points: &[UnitPoint],
    vectors: &[AdjacencyVector],
    k: usize,
) -> Result<NodeFit, EnaError> {
    if points.is_empty() || points.len() != vectors.len() {
        return Err(EnaError::NoUnits);
    }
    let a = centroid_matrix(vectors, k);
    let svd = a.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let pinv = svd.pseudo_inverse(tol).expect("pseudo-inverse with positive tolerance");

    let px = DMatrix::from_iterator(points.len(), 1, points.iter().map(|p| p.x));
    let py = DMatrix::from_iterator(points.len(), 1, points.iter().map(|p| p.y));
    let nx = &pinv * &px;
    let ny = &pinv * &py;
    let positions: Vec<[f64; 2]> = (0..k).map(|c| [nx[(c, 0)], ny[(c, 0)]]).collect();

    let cx = &a * &nx;
    let cy = &a * &ny;
    let fit_x = pearson(
        &points.iter().map(|p| p.x).collect::<Vec<_>>(),
        cx.as_slice(),
    );
    let fit_y = pearson(
        &points.iter().map(|p| p.y).collect::<Vec<_>>(),
        cy.as_slice(),
    );

    Ok(NodeFit {
        positions,
        fit: [fit_x, fit_y],
        rank_deficient: rank < k,
    })
}

/// Welch t and Cohen's d per projection dimension, human vs ai.
pub fn centroid_comparison(points: &[UnitPoint]) -> Result<[TestResult; 2], EnaError> {
    let human_x: Vec<f64> = points.iter().filter(|p| p.group == Group::Human).map(|p| p.x).collect();
    let ai_x: Vec<f64> = points.iter().filter(|p| p.group == Group::Ai).map(|p| p.x).collect();
    let human_y: Vec<f64> = points.iter().filter(|p| p.group == Group::Human).map(|p| p.y).collect();
    let ai_y: Vec<f64> = points.iter().filter(|p| p.group == Group::Ai).map(|p| p.y).collect();
    if human_x.is_empty() {
        return Err(EnaError::EmptyGroup(Group::Human));
    }
    if ai_x.is_empty() {
        return Err(EnaError::EmptyGroup(Group::Ai));
    }
    Ok([
        stats::welch_t(&human_x, &ai_x)?,
        stats::welch_t(&human_y, &ai_y)?,
    ])
}

/// The complete fitted model.
#[derive(Debug, Clone)]
pub struct EnaModel {
    pub code_ids: Vec<String>,
    pub config: StanzaConfig,
    pub basis: RotationBasis,
    pub unit_points: Vec<UnitPoint>,
    /// Per-code (x, y) in scheme order.
    pub node_positions: Vec<[f64; 2]>,
    /// Pearson goodness of fit per dimension.
    pub fit: [f64; 2],
    pub rank_deficient: bool,
    pub group_means: BTreeMap<Group, Vec<f64>>,
    pub exclusions: Vec<Exclusion>,
}

impl EnaModel {
    /// Run the full pipeline: accumulate, normalize, rotate, project,
    /// co-register nodes, and compute group mean networks.
    pub fn fit(corpus: &Corpus, scheme: &CodeScheme, cfg: &StanzaConfig) -> Result<EnaModel, EnaError> {
        let acc = accumulate(corpus, scheme, cfg)?;
        let (normalized, zero_excluded) = normalize_all(&acc.vectors);
        let mut exclusions = acc.excluded;
        exclusions.extend(zero_excluded);
        if normalized.is_empty() {
            return Err(EnaError::NoUnits);
        }
        let basis = means_rotation(&normalized)?;
        let unit_points = project(&basis, &normalized)?;
        let nodes = fit_nodes(&unit_points, &normalized, scheme.len())?;
        let mut group_means = BTreeMap::new();
        for group in [Group::Human, Group::Ai] {
            group_means.insert(group, group_mean_network(&normalized, group)?);
        }
        Ok(EnaModel {
            code_ids: scheme.ids().map(str::to_string).collect(),
            config: *cfg,
            basis,
            unit_points,
            node_positions: nodes.positions,
            fit: nodes.fit,
            rank_deficient: nodes.rank_deficient,
            group_means,
            exclusions,
        })
    }

    pub fn centroid_tests(&self) -> Result<[TestResult; 2], EnaError> {
        centroid_comparison(&self.unit_points)
    }
}
