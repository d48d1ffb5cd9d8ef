//! Diversity-based sample selection and the query/annotate/train loop.
//!
//! The selector is greedy k-center: each step takes the point farthest from
//! everything already selected, which spreads a fixed labeling budget across
//! the pool instead of clustering it. Features come either from a patch
//! matrix (max- and mean-pooled into one vector) or from cheap structural
//! statistics of a record; both are standardized per pool before distances
//! mean anything.

use crate::model::{AnnotationRecord, HeaderLayout, Labels, LineStyle};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type EmbeddingVector = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplerError {
    #[error("degenerate input: {detail}")]
    DegenerateInput { detail: String },
    #[error("config error: {detail}")]
    ConfigError { detail: String },
}

fn degenerate(detail: impl Into<String>) -> SamplerError {
    SamplerError::DegenerateInput { detail: detail.into() }
}

fn config(detail: impl Into<String>) -> SamplerError {
    SamplerError::ConfigError { detail: detail.into() }
}

/// Concatenates the per-dimension max and mean over patch rows.
pub fn pool_embedding(patch_matrix: &[Vec<f64>]) -> Result<EmbeddingVector, SamplerError> {
    let rows = patch_matrix.len();
    if rows == 0 {
        return Err(degenerate("empty patch matrix"));
    }
    let dim = patch_matrix[0].len();
    if dim == 0 {
        return Err(degenerate("zero-width patch matrix"));
    }
    let mut maxes = vec![f64::NEG_INFINITY; dim];
    let mut sums = vec![0.0f64; dim];
    for (i, row) in patch_matrix.iter().enumerate() {
        if row.len() != dim {
            return Err(config(format!("patch row {i} has width {} here, {dim} elsewhere", row.len())));
        }
        for (d, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(degenerate(format!("non-finite entry at patch {i}, dim {d}")));
            }
            if v > maxes[d] {
                maxes[d] = v;
            }
            sums[d] += v;
        }
    }
    let mut out = maxes;
    out.extend(sums.into_iter().map(|s| s / rows as f64));
    Ok(out)
}

/// The label triple the desk-scale trainer predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleLabel {
    pub is_simple: bool,
    pub line_style: LineStyle,
    pub header_layout: HeaderLayout,
}

impl From<&Labels> for SampleLabel {
    fn from(l: &Labels) -> SampleLabel {
        SampleLabel { is_simple: l.is_simple, line_style: l.line_style, header_layout: l.header_layout }
    }
}

pub const STRUCTURAL_FEATURE_DIM: usize = 16;

/// Cheap structural statistics standing in for a vision embedding:
/// dimensions are (rows, cols, span count, span area ratio, header layout
/// one-hot x3, line style one-hot x5, colored flag, content length
/// mean/max/std).
pub fn structural_features(record: &AnnotationRecord) -> EmbeddingVector {
    let n_rows = record.cells.iter().map(|c| c.row_start + c.rowspan).max().unwrap_or(0);
    let n_cols = record.cells.iter().map(|c| c.col_start + c.colspan).max().unwrap_or(0);
    let spanning: Vec<_> = record.cells.iter().filter(|c| c.is_spanning()).collect();
    let span_area: usize = spanning.iter().map(|c| c.rowspan * c.colspan).sum();
    let area = (n_rows * n_cols).max(1) as f64;

    let mut v = Vec::with_capacity(STRUCTURAL_FEATURE_DIM);
    v.push(n_rows as f64);
    v.push(n_cols as f64);
    v.push(spanning.len() as f64);
    v.push(span_area as f64 / area);
    for layout in HeaderLayout::ALL {
        v.push(if record.labels.header_layout == layout { 1.0 } else { 0.0 });
    }
    for style in LineStyle::ALL {
        v.push(if record.labels.line_style == style { 1.0 } else { 0.0 });
    }
    v.push(if record.labels.is_colored { 1.0 } else { 0.0 });
    let lengths: Vec<f64> = record.cells.iter().map(|c| c.content.chars().count() as f64).collect();
    let n = lengths.len().max(1) as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let max = lengths.iter().cloned().fold(0.0f64, f64::max);
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    v.push(mean);
    v.push(max);
    v.push(var.sqrt());
    debug_assert_eq!(v.len(), STRUCTURAL_FEATURE_DIM);
    v
}

/// Shifts every dimension to zero mean and unit variance over the pool;
/// constant dimensions collapse to zero rather than dividing by zero.
pub fn standardize_pool(pool: &[EmbeddingVector]) -> Result<Vec<EmbeddingVector>, SamplerError> {
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let dim = pool[0].len();
    for (i, v) in pool.iter().enumerate() {
        if v.len() != dim {
            return Err(config(format!("vector {i} has dim {} here, {dim} elsewhere", v.len())));
        }
        if let Some(d) = v.iter().position(|x| !x.is_finite()) {
            return Err(degenerate(format!("non-finite entry at vector {i}, dim {d}")));
        }
    }
    let n = pool.len() as f64;
    let mut means = vec![0.0f64; dim];
    for v in pool {
        for (d, &x) in v.iter().enumerate() {
            means[d] += x;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0f64; dim];
    for v in pool {
        for (d, &x) in v.iter().enumerate() {
            stds[d] += (x - means[d]).powi(2);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
    }
    Ok(pool
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .map(|(d, &x)| if stds[d] > 0.0 { (x - means[d]) / stds[d] } else { 0.0 })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
            Metric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    // A direction-free vector is maximally unlike anything.
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionProblem<'a> {
    pub points: &'a [EmbeddingVector],
    pub s0: &'a [usize],
    pub budget: usize,
    pub metric: Metric,
}

/// Greedy k-center: repeatedly selects the point whose distance to the
/// nearest already-selected center is largest. Returns the new picks (never
/// the seeds) in selection order; ties go to the lowest index. With no seed
/// set, the first pick is the point closest to the pool centroid and counts
/// against the budget.
pub fn k_center_greedy(problem: &SelectionProblem) -> Result<Vec<usize>, SamplerError> {
    let n = problem.points.len();
    if n == 0 {
        return if problem.budget == 0 { Ok(Vec::new()) } else { Err(config("empty pool with nonzero budget")) };
    }
    let dim = problem.points[0].len();
    for (i, p) in problem.points.iter().enumerate() {
        if p.len() != dim {
            return Err(config(format!("point {i} has dim {} here, {dim} elsewhere", p.len())));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(degenerate(format!("non-finite entry in point {i}")));
        }
    }
    for &s in problem.s0 {
        if s >= n {
            return Err(config(format!("seed index {s} exceeds pool size {n}")));
        }
    }
    if problem.budget + problem.s0.len() > n {
        return Err(config(format!(
            "budget {} plus {} seeds exceeds pool size {n}",
            problem.budget,
            problem.s0.len()
        )));
    }
    if problem.budget == 0 {
        return Ok(Vec::new());
    }

    let mut selected = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    for &s in problem.s0 {
        selected[s] = true;
    }
    for i in 0..n {
        if selected[i] {
            min_dist[i] = 0.0;
            continue;
        }
        for &s in problem.s0 {
            let d = problem.metric.distance(&problem.points[i], &problem.points[s]);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }

    let mut picks = Vec::with_capacity(problem.budget);
    let mut remaining = problem.budget;
    if problem.s0.is_empty() {
        let centroid: Vec<f64> = (0..dim)
            .map(|d| problem.points.iter().map(|p| p[d]).sum::<f64>() / n as f64)
            .collect();
        let first = (0..n)
            .min_by(|&a, &b| {
                problem
                    .metric
                    .distance(&problem.points[a], &centroid)
                    .total_cmp(&problem.metric.distance(&problem.points[b], &centroid))
            })
            .expect("nonempty pool");
        selected[first] = true;
        picks.push(first);
        remaining -= 1;
        for i in 0..n {
            let d = if selected[i] { 0.0 } else { problem.metric.distance(&problem.points[i], &problem.points[first]) };
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }

    for _ in 0..remaining {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            if !selected[i] && min_dist[i] > best_d {
                best = i;
                best_d = min_dist[i];
            }
        }
        debug_assert_ne!(best, usize::MAX, "budget bound guarantees a candidate");
        selected[best] = true;
        picks.push(best);
        for i in 0..n {
            if selected[i] {
                min_dist[i] = 0.0;
                continue;
            }
            let d = problem.metric.distance(&problem.points[i], &problem.points[best]);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    Ok(picks)
}

/// Max over points of the distance to their nearest center.
pub fn covering_radius(points: &[EmbeddingVector], centers: &[usize], metric: Metric) -> f64 {
    points
        .iter()
        .map(|p| centers.iter().map(|&c| metric.distance(p, &points[c])).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineStrategy {
    Random,
    Ppl,
    #[serde(rename = "hard")]
    HardExample,
}

/// Non-diversity selectors. Score-driven strategies take the `b` highest
/// scores (stable on ties); scores are caller-supplied per candidate.
pub fn baseline_select(
    strategy: BaselineStrategy,
    candidates: &[usize],
    scores: Option<&[f64]>,
    b: usize,
    seed: u64,
) -> Result<Vec<usize>, SamplerError> {
    let take = b.min(candidates.len());
    match strategy {
        BaselineStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rest: Vec<usize> = candidates.to_vec();
            let mut out = Vec::with_capacity(take);
            for _ in 0..take {
                let i = rng.random_range(0..rest.len());
                out.push(rest.swap_remove(i));
            }
            Ok(out)
        }
        BaselineStrategy::Ppl | BaselineStrategy::HardExample => {
            let scores = scores.ok_or_else(|| {
                config("score-driven selection needs a per-sample score vector")
            })?;
            for &c in candidates {
                if c >= scores.len() {
                    return Err(config(format!("candidate {c} has no score (scores cover {})", scores.len())));
                }
            }
            let mut order: Vec<usize> = candidates.to_vec();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            order.truncate(take);
            Ok(order)
        }
    }
}

/// One pool entry: a stable id plus its (already standardized) features.
#[derive(Debug, Clone)]
pub struct PoolSample {
    pub id: String,
    pub features: EmbeddingVector,
}

#[derive(Debug, Clone)]
pub struct ActiveLearningState {
    pub pool: Vec<PoolSample>,
    /// Indices into `pool` still awaiting a label.
    pub unlabeled: Vec<usize>,
    /// Indices into `pool` with their annotations.
    pub labeled: Vec<(usize, SampleLabel)>,
    /// How many queries beyond the initial labels the loop may spend.
    pub budget: usize,
}

impl ActiveLearningState {
    pub fn new(
        pool: Vec<PoolSample>,
        initial: Vec<(usize, SampleLabel)>,
        budget: usize,
    ) -> Result<ActiveLearningState, SamplerError> {
        let n = pool.len();
        let mut taken = vec![false; n];
        for &(i, _) in &initial {
            if i >= n {
                return Err(config(format!("initial label index {i} exceeds pool size {n}")));
            }
            if std::mem::replace(&mut taken[i], true) {
                return Err(config(format!("initial label index {i} repeats")));
            }
        }
        let unlabeled = (0..n).filter(|&i| !taken[i]).collect();
        Ok(ActiveLearningState { pool, unlabeled, labeled: initial, budget })
    }
}

pub type LabeledExample = (EmbeddingVector, SampleLabel);

/// Trains on labeled examples and scores a model on held-out ones; the
/// implementations must be deterministic for a given input.
pub trait TrainerProvider {
    type Model;
    fn train(&self, examples: &[LabeledExample]) -> Self::Model;
    fn evaluate(&self, model: &Self::Model, test: &[LabeledExample]) -> f64;
}

/// Desk-scale stand-in for a real recognizer: 1-nearest-neighbor over the
/// feature vectors, scored by exact-match accuracy on the label triple.
pub struct NnTrainer {
    pub metric: Metric,
}

impl Default for NnTrainer {
    fn default() -> NnTrainer {
        NnTrainer { metric: Metric::Euclidean }
    }
}

pub struct NnModel {
    examples: Vec<LabeledExample>,
    metric: Metric,
}

impl NnModel {
    pub fn predict(&self, features: &[f64]) -> Option<SampleLabel> {
        let best = self
            .examples
            .iter()
            .enumerate()
            .min_by(|(ai, a), (bi, b)| {
                self.metric
                    .distance(&a.0, features)
                    .total_cmp(&self.metric.distance(&b.0, features))
                    .then(ai.cmp(bi))
            })?;
        Some(best.1 .1)
    }
}

impl TrainerProvider for NnTrainer {
    type Model = NnModel;

    fn train(&self, examples: &[LabeledExample]) -> NnModel {
        NnModel { examples: examples.to_vec(), metric: self.metric }
    }

    fn evaluate(&self, model: &NnModel, test: &[LabeledExample]) -> f64 {
        if test.is_empty() {
            return 0.0;
        }
        let hits = test
            .iter()
            .filter(|(f, label)| model.predict(f) == Some(*label))
            .count();
        hits as f64 / test.len() as f64
    }
}

/// Resolves a queried sample id to its label; the oracle implementation
/// reads gold labels from a manifest.
pub trait Annotator {
    fn annotate(&self, id: &str) -> Result<SampleLabel, String>;
}

/// Annotator backed by an in-memory id -> label map.
pub struct MapAnnotator {
    labels: std::collections::HashMap<String, SampleLabel>,
}

impl MapAnnotator {
    pub fn new(labels: impl IntoIterator<Item = (String, SampleLabel)>) -> MapAnnotator {
        MapAnnotator { labels: labels.into_iter().collect() }
    }
}

impl Annotator for MapAnnotator {
    fn annotate(&self, id: &str) -> Result<SampleLabel, String> {
        self.labels.get(id).copied().ok_or_else(|| format!("no label for sample {id}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum LoopStrategy {
    CoreSet { metric: Metric },
    Random { seed: u64 },
    Ppl,
    #[serde(rename = "hard")]
    HardExample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub labeled: usize,
    pub score: f64,
}

pub struct LoopOutcome<M> {
    pub model: Option<M>,
    pub labeled: Vec<(String, SampleLabel)>,
    pub curve: Vec<CurvePoint>,
    /// Set when annotation aborted the loop; the curve holds the rounds
    /// that completed.
    pub error: Option<String>,
}

/// Query/annotate/train loop. Each round selects up to `step_size` samples
/// by the strategy, annotates them, moves them from the unlabeled pool to
/// the labeled set, retrains, and records an evaluation point. Stops once
/// the budget is spent or the pool is empty.
pub fn run_al_loop<T: TrainerProvider>(
    mut state: ActiveLearningState,
    strategy: LoopStrategy,
    step_size: usize,
    scores: Option<&[f64]>,
    trainer: &T,
    annotator: &dyn Annotator,
    test: &[LabeledExample],
) -> Result<LoopOutcome<T::Model>, SamplerError> {
    if step_size == 0 {
        return Err(config("step size must be positive"));
    }
    let total = state.pool.len();
    let mut rng = match strategy {
        LoopStrategy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };

    let examples = |state: &ActiveLearningState| -> Vec<LabeledExample> {
        state.labeled.iter().map(|&(i, l)| (state.pool[i].features.clone(), l)).collect()
    };
    let mut model = trainer.train(&examples(&state));
    let mut curve = vec![CurvePoint { round: 0, labeled: state.labeled.len(), score: trainer.evaluate(&model, test) }];

    let mut spent = 0usize;
    let mut round = 0usize;
    let mut error = None;
    while spent < state.budget && !state.unlabeled.is_empty() {
        round += 1;
        let step = step_size.min(state.budget - spent).min(state.unlabeled.len());
        let picked: Vec<usize> = match strategy {
            LoopStrategy::CoreSet { metric } => {
                let points: Vec<EmbeddingVector> = state.pool.iter().map(|s| s.features.clone()).collect();
                let s0: Vec<usize> = state.labeled.iter().map(|&(i, _)| i).collect();
                k_center_greedy(&SelectionProblem { points: &points, s0: &s0, budget: step, metric })?
            }
            LoopStrategy::Random { .. } => {
                let rng = rng.as_mut().expect("random strategy carries an rng");
                let mut rest = state.unlabeled.clone();
                let mut out = Vec::with_capacity(step);
                for _ in 0..step {
                    let i = rng.random_range(0..rest.len());
                    out.push(rest.swap_remove(i));
                }
                out
            }
            LoopStrategy::Ppl => baseline_select(BaselineStrategy::Ppl, &state.unlabeled, scores, step, 0)?,
            LoopStrategy::HardExample => {
                baseline_select(BaselineStrategy::HardExample, &state.unlabeled, scores, step, 0)?
            }
        };
        debug_assert!(picked.iter().all(|i| state.unlabeled.contains(i)), "queries come from the unlabeled pool");

        let mut aborted = false;
        for &idx in &picked {
            match annotator.annotate(&state.pool[idx].id) {
                Ok(label) => {
                    state.unlabeled.retain(|&u| u != idx);
                    state.labeled.push((idx, label));
                    spent += 1;
                }
                Err(e) => {
                    error = Some(format!("annotation failed for {}: {e}", state.pool[idx].id));
                    aborted = true;
                    break;
                }
            }
        }
        debug_assert_eq!(state.unlabeled.len() + state.labeled.len(), total, "loop bookkeeping");

        model = trainer.train(&examples(&state));
        curve.push(CurvePoint { round, labeled: state.labeled.len(), score: trainer.evaluate(&model, test) });
        if aborted {
            break;
        }
    }

    let labeled = state.labeled.iter().map(|&(i, l)| (state.pool[i].id.clone(), l)).collect();
    Ok(LoopOutcome { model: Some(model), labeled, curve, error })
}

/// Reads a 2-D little-endian C-order `.npy` matrix of f8 or f4, the layout
/// embedding dumps usually arrive in.
pub fn read_npy_matrix(path: &std::path::Path) -> Result<Vec<Vec<f64>>, SamplerError> {
    let bytes = std::fs::read(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
    parse_npy_matrix(&bytes)
}

pub fn parse_npy_matrix(bytes: &[u8]) -> Result<Vec<Vec<f64>>, SamplerError> {
    let bad = |d: &str| config(format!("npy: {d}"));
    if bytes.len() < 10 || &bytes[0..6] != b"\x93NUMPY" {
        return Err(bad("missing magic"));
    }
    let major = bytes[6];
    let (header_len, data_start) = match major {
        1 => {
            let len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
            (len, 10 + len)
        }
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(bad("truncated header length"));
            }
            let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
            (len, 12 + len)
        }
        v => return Err(bad(&format!("unsupported version {v}"))),
    };
    if bytes.len() < data_start {
        return Err(bad("truncated header"));
    }
    let header = std::str::from_utf8(&bytes[data_start - header_len..data_start])
        .map_err(|_| bad("header is not utf-8"))?;

    let field = |key: &str| -> Option<&str> {
        let at = header.find(key)? + key.len();
        let rest = header[at..].trim_start().strip_prefix(':')?.trim_start();
        Some(rest)
    };
    let descr_rest = field("'descr'").ok_or_else(|| bad("missing descr"))?;
    let descr = descr_rest.trim_start_matches(['\'', '"']);
    let width = if descr.starts_with("<f8") {
        8
    } else if descr.starts_with("<f4") {
        4
    } else {
        return Err(bad(&format!("unsupported dtype (want <f8 or <f4), header: {}", header.trim())));
    };
    let fortran_rest = field("'fortran_order'").ok_or_else(|| bad("missing fortran_order"))?;
    if !fortran_rest.starts_with("False") {
        return Err(bad("fortran-order arrays are not supported"));
    }
    let shape_rest = field("'shape'").ok_or_else(|| bad("missing shape"))?;
    let open = shape_rest.find('(').ok_or_else(|| bad("malformed shape"))?;
    let close = shape_rest.find(')').ok_or_else(|| bad("malformed shape"))?;
    let dims: Vec<usize> = shape_rest[open + 1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| bad(&format!("bad shape entry {s}"))))
        .collect::<Result<_, _>>()?;
    if dims.len() != 2 {
        return Err(bad(&format!("want a 2-D matrix, shape has {} dims", dims.len())));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let data = &bytes[data_start..];
    let want = rows * cols * width;
    if data.len() < want {
        return Err(bad(&format!("data section holds {} bytes, shape needs {want}", data.len())));
    }
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for c in 0..cols {
            let at = (r * cols + c) * width;
            let v = if width == 8 {
                f64::from_le_bytes(data[at..at + 8].try_into().expect("bounds checked"))
            } else {
                f32::from_le_bytes(data[at..at + 4].try_into().expect("bounds checked")) as f64
            };
            row.push(v);
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_batch, GenerationRequest};
    use crate::checker::FillingChecker;
    use crate::infill::TemplateProvider;

    fn line_points() -> Vec<EmbeddingVector> {
        vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]]
    }

    #[test]
    fn pooling_concatenates_max_then_mean() {
        let v = vec![3.0, -1.0, 0.5];
        let same = pool_embedding(&[v.clone(), v.clone()]).unwrap();
        assert_eq!(same, vec![3.0, -1.0, 0.5, 3.0, -1.0, 0.5]);

        let mixed = pool_embedding(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(mixed, vec![2.0, 2.0, 1.0, 1.0]);

        assert!(matches!(pool_embedding(&[]), Err(SamplerError::DegenerateInput { .. })));
        assert!(matches!(
            pool_embedding(&[vec![f64::NAN]]),
            Err(SamplerError::DegenerateInput { .. })
        ));
    }

    #[test]
    fn pooling_matches_a_reference_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let matrix: Vec<Vec<f64>> =
            (0..16).map(|_| (0..32).map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
        let got = pool_embedding(&matrix).unwrap();
        for d in 0..32 {
            let mut mx = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for row in &matrix {
                mx = mx.max(row[d]);
                sum += row[d];
            }
            assert_eq!(got[d], mx);
            assert!((got[32 + d] - sum / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn structural_features_track_spans_and_stay_deterministic() {
        let req = GenerationRequest { count: 16, seed: 40, ..GenerationRequest::default() };
        let (records, _) = generate_batch(&req, &TemplateProvider, &FillingChecker::default()).unwrap();
        let simple = records.iter().find(|r| r.labels.is_simple).unwrap();
        let complex = records.iter().find(|r| !r.labels.is_simple).unwrap();
        assert_eq!(structural_features(simple), structural_features(simple));
        assert_eq!(structural_features(simple)[2], 0.0, "simple tables have no spanning cells");
        assert!(structural_features(complex)[2] >= 1.0);
        assert_eq!(structural_features(simple).len(), STRUCTURAL_FEATURE_DIM);
    }

    #[test]
    fn standardization_centers_and_scales() {
        let pool: Vec<EmbeddingVector> =
            vec![vec![1.0, 5.0, 7.0], vec![3.0, 5.0, 1.0], vec![5.0, 5.0, 4.0], vec![7.0, 5.0, 0.0]];
        let std = standardize_pool(&pool).unwrap();
        for d in 0..3 {
            let mean: f64 = std.iter().map(|v| v[d]).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-9, "dim {d} mean {mean}");
        }
        // Constant dimension collapses to zero instead of NaN.
        assert!(std.iter().all(|v| v[1] == 0.0));
        let var: f64 = std.iter().map(|v| v[0] * v[0]).sum::<f64>() / 4.0;
        assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn greedy_picks_the_farthest_point_first() {
        let points = line_points();
        let one = k_center_greedy(&SelectionProblem { points: &points, s0: &[0], budget: 1, metric: Metric::Euclidean })
            .unwrap();
        assert_eq!(one, vec![3]);
        let two = k_center_greedy(&SelectionProblem { points: &points, s0: &[0], budget: 2, metric: Metric::Euclidean })
            .unwrap();
        assert_eq!(two, vec![3, 2]);
        let zero = k_center_greedy(&SelectionProblem { points: &points, s0: &[0], budget: 0, metric: Metric::Euclidean })
            .unwrap();
        assert!(zero.is_empty());
    }

    #[test]
    fn greedy_without_seeds_starts_nearest_the_centroid() {
        let points = line_points(); // centroid 3.25, nearest point 2.0 at index 2
        let picks = k_center_greedy(&SelectionProblem { points: &points, s0: &[], budget: 2, metric: Metric::Euclidean })
            .unwrap();
        assert_eq!(picks, vec![2, 3], "centroid seed consumes budget, then farthest");
    }

    #[test]
    fn greedy_defers_duplicate_points_while_distinct_ones_remain() {
        let points = vec![vec![0.0], vec![0.0], vec![5.0], vec![3.0]];
        let picks = k_center_greedy(&SelectionProblem { points: &points, s0: &[0], budget: 3, metric: Metric::Euclidean })
            .unwrap();
        assert_eq!(picks, vec![2, 3, 1], "the duplicate of the seed comes last");
    }

    #[test]
    fn greedy_follows_values_not_presentation_order() {
        let points = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
        let forward =
            k_center_greedy(&SelectionProblem { points: &points, s0: &[0], budget: 2, metric: Metric::Euclidean })
                .unwrap();
        let reversed: Vec<EmbeddingVector> = points.iter().rev().cloned().collect();
        let backward = k_center_greedy(&SelectionProblem {
            points: &reversed,
            s0: &[3], // the same 0.0 point after reversal
            budget: 2,
            metric: Metric::Euclidean,
        })
        .unwrap();
        let mapped: Vec<usize> = backward.iter().map(|&i| 3 - i).collect();
        assert_eq!(forward, mapped);
    }

    #[test]
    fn greedy_validates_the_problem() {
        let points = line_points();
        assert!(matches!(
            k_center_greedy(&SelectionProblem { points: &points, s0: &[9], budget: 1, metric: Metric::Euclidean }),
            Err(SamplerError::ConfigError { .. })
        ));
        assert!(matches!(
            k_center_greedy(&SelectionProblem { points: &points, s0: &[0], budget: 4, metric: Metric::Euclidean }),
            Err(SamplerError::ConfigError { .. })
        ));
    }

    #[test]
    fn covering_radius_is_monotone_in_the_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let points: Vec<EmbeddingVector> =
                (0..30).map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
            let picks =
                k_center_greedy(&SelectionProblem { points: &points, s0: &[], budget: 8, metric: Metric::Euclidean })
                    .unwrap();
            let mut last = f64::INFINITY;
            for k in 1..=picks.len() {
                let r = covering_radius(&points, &picks[..k], Metric::Euclidean);
                assert!(r <= last + 1e-12, "radius grew from {last} to {r} at k={k}");
                last = r;
            }
        }
    }

    #[test]
    fn cosine_distance_handles_zero_vectors() {
        assert_eq!(Metric::Cosine.distance(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
        assert!((Metric::Cosine.distance(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!(Metric::Cosine.distance(&[1.0, 1.0], &[2.0, 2.0]).abs() < 1e-12);
    }

    #[test]
    fn baselines_sort_or_sample_deterministically() {
        let candidates = [0usize, 1, 2];
        let scores = [0.1, 0.9, 0.5];
        let ppl = baseline_select(BaselineStrategy::Ppl, &candidates, Some(&scores), 2, 0).unwrap();
        assert_eq!(ppl, vec![1, 2]);
        let all = baseline_select(BaselineStrategy::HardExample, &candidates, Some(&scores), 3, 0).unwrap();
        assert_eq!(all, vec![1, 2, 0]);
        assert!(matches!(
            baseline_select(BaselineStrategy::Ppl, &candidates, None, 2, 0),
            Err(SamplerError::ConfigError { .. })
        ));

        let a = baseline_select(BaselineStrategy::Random, &candidates, None, 2, 7).unwrap();
        let b = baseline_select(BaselineStrategy::Random, &candidates, None, 2, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_ne!(a[0], a[1], "without replacement");
    }

    fn toy_state(n: usize, budget: usize) -> (ActiveLearningState, MapAnnotator, Vec<LabeledExample>) {
        // Two clusters: low indices near 0 are "simple", high near 10 are not.
        let label = |simple: bool| SampleLabel {
            is_simple: simple,
            line_style: LineStyle::FullyLined,
            header_layout: HeaderLayout::Vertical,
        };
        let pool: Vec<PoolSample> = (0..n)
            .map(|i| {
                let x = if i < n / 2 { i as f64 * 0.1 } else { 10.0 + i as f64 * 0.1 };
                PoolSample { id: format!("s{i}"), features: vec![x] }
            })
            .collect();
        let gold: Vec<LabeledExample> =
            pool.iter().enumerate().map(|(i, s)| (s.features.clone(), label(i < n / 2))).collect();
        let annotator =
            MapAnnotator::new(pool.iter().enumerate().map(|(i, s)| (s.id.clone(), label(i < n / 2))));
        let state = ActiveLearningState::new(pool, vec![(0, label(true))], budget).unwrap();
        (state, annotator, gold)
    }

    #[test]
    fn loop_with_zero_budget_reports_one_point() {
        let (state, annot, gold) = toy_state(8, 0);
        let out = run_al_loop(
            state,
            LoopStrategy::CoreSet { metric: Metric::Euclidean },
            1,
            None,
            &NnTrainer::default(),
            &annot,
            &gold,
        )
        .unwrap();
        assert_eq!(out.curve.len(), 1);
        assert_eq!(out.curve[0].labeled, 1);
        assert!(out.error.is_none());
    }

    #[test]
    fn loop_exhausts_the_pool_when_budget_exceeds_it() {
        let (state, annot, gold) = toy_state(6, 99);
        let out = run_al_loop(
            state,
            LoopStrategy::CoreSet { metric: Metric::Euclidean },
            2,
            None,
            &NnTrainer::default(),
            &annot,
            &gold,
        )
        .unwrap();
        assert!(out.error.is_none());
        assert_eq!(out.labeled.len(), 6, "every sample ends up labeled");
        assert_eq!(out.curve.last().unwrap().score, 1.0, "1-NN is perfect once everything is labeled");
    }

    #[test]
    fn coreset_queries_cover_the_far_cluster_immediately() {
        let (state, annot, gold) = toy_state(10, 1);
        let out = run_al_loop(
            state,
            LoopStrategy::CoreSet { metric: Metric::Euclidean },
            1,
            None,
            &NnTrainer::default(),
            &annot,
            &gold,
        )
        .unwrap();
        // The initial label sits in the low cluster; the single query lands
        // in the far one, and 1-NN then classifies both clusters.
        assert_eq!(out.curve.last().unwrap().score, 1.0);
    }

    #[test]
    fn batched_coreset_matches_sequential_selection() {
        let (state, annot, gold) = toy_state(12, 6);
        let sequential = run_al_loop(
            state.clone(),
            LoopStrategy::CoreSet { metric: Metric::Euclidean },
            1,
            None,
            &NnTrainer::default(),
            &annot,
            &gold,
        )
        .unwrap();
        let batched = run_al_loop(
            state,
            LoopStrategy::CoreSet { metric: Metric::Euclidean },
            6,
            None,
            &NnTrainer::default(),
            &annot,
            &gold,
        )
        .unwrap();
        let seq_ids: Vec<&String> = sequential.labeled.iter().map(|(id, _)| id).collect();
        let batch_ids: Vec<&String> = batched.labeled.iter().map(|(id, _)| id).collect();
        assert_eq!(seq_ids, batch_ids, "greedy chain is the same either way");
    }

    #[test]
    fn annotation_failure_aborts_with_partial_curve() {
        let (state, _, gold) = toy_state(8, 4);
        struct Flaky;
        impl Annotator for Flaky {
            fn annotate(&self, id: &str) -> Result<SampleLabel, String> {
                if id == "s7" {
                    Err("annotator offline".to_string())
                } else {
                    Ok(SampleLabel {
                        is_simple: true,
                        line_style: LineStyle::FullyLined,
                        header_layout: HeaderLayout::Vertical,
                    })
                }
            }
        }
        let out = run_al_loop(
            state,
            LoopStrategy::CoreSet { metric: Metric::Euclidean },
            1,
            None,
            &NnTrainer::default(),
            &Flaky,
            &gold,
        )
        .unwrap();
        let err = out.error.expect("failure surfaces");
        assert!(err.contains("s7"), "error names the sample: {err}");
        assert!(out.curve.len() >= 1);
        assert!(out.model.is_some(), "last trained model survives");
    }

    #[test]
    fn npy_round_trip_for_f8_and_f4() {
        fn npy_bytes(descr: &str, rows: usize, cols: usize, data: &[u8]) -> Vec<u8> {
            let mut header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
            while (10 + header.len() + 1) % 64 != 0 {
                header.push(' ');
            }
            header.push('\n');
            let mut out = b"\x93NUMPY\x01\x00".to_vec();
            out.extend_from_slice(&(header.len() as u16).to_le_bytes());
            out.extend_from_slice(header.as_bytes());
            out.extend_from_slice(data);
            out
        }
        let values = [1.5f64, -2.0, 0.25, 8.0, 0.0, 3.5];
        let mut f8 = Vec::new();
        for v in values {
            f8.extend_from_slice(&v.to_le_bytes());
        }
        let got = parse_npy_matrix(&npy_bytes("<f8", 2, 3, &f8)).unwrap();
        assert_eq!(got, vec![vec![1.5, -2.0, 0.25], vec![8.0, 0.0, 3.5]]);

        let mut f4 = Vec::new();
        for v in values {
            f4.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let got4 = parse_npy_matrix(&npy_bytes("<f4", 3, 2, &f4)).unwrap();
        assert_eq!(got4[2], vec![0.0, 3.5]);

        assert!(parse_npy_matrix(b"not numpy").is_err());
        assert!(parse_npy_matrix(&npy_bytes("<i8", 2, 3, &f8)).is_err());
        assert!(parse_npy_matrix(&npy_bytes("<f8", 4, 3, &f8)).is_err(), "shape larger than data");
        let mut fortran = npy_bytes("<f8", 2, 3, &f8);
        let at = fortran.windows(5).position(|w| w == b"False").unwrap();
        fortran[at..at + 5].copy_from_slice(b"True,");
        assert!(parse_npy_matrix(&fortran).is_err());
    }
}
