//! Batch generation of annotated tables.
//!
//! A request pins the distribution: count, structural complexity, color and
//! line constraints, size ranges, header layout weights, domain, language
//! and seed. Unconstrained attributes cycle through their value
//! combinations so a batch covers them evenly; each item then samples its
//! schema and style from a seed derived from the request seed and the item
//! index, making batches reproducible item by item regardless of worker
//! scheduling.

use crate::checker::FillingChecker;
use crate::html::{grid_to_html, html_to_grid, structure_tokens};
use crate::infill::{ContentProvider, InfillError};
use crate::model::{
    derive_labels, grid_from_schema, BackgroundPalette, HeaderLayout, Labels, Language, LineStyle, StyleSpec,
    TableSchema,
};
use crate::model::AnnotationRecord;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    /// Only 1x1 cells.
    Simple,
    /// At least one merged cell per table.
    Complex,
    /// Both, alternating across the batch.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub count: usize,
    pub complexity: Complexity,
    /// Some(v) pins the attribute; None lets the batch cover both values.
    pub colored: Option<bool>,
    pub lined: Option<bool>,
    /// Inclusive row count range.
    pub row_range: (usize, usize),
    /// Inclusive column count range.
    pub col_range: (usize, usize),
    /// Relative weights for vertical, horizontal, matrix header layouts.
    pub header_layout_weights: [u32; 3],
    pub domain: String,
    pub language: Language,
    pub seed: u64,
    /// Topics the provider must not duplicate.
    pub used_topics: Vec<String>,
}

impl Default for GenerationRequest {
    fn default() -> Self {
        GenerationRequest {
            count: 8,
            complexity: Complexity::Mixed,
            colored: None,
            lined: None,
            row_range: (2, 12),
            col_range: (2, 8),
            header_layout_weights: [1, 1, 1],
            domain: "telecom".to_string(),
            language: Language::En,
            seed: 0,
            used_topics: Vec::new(),
        }
    }
}

/// One point of the structural attribute space a batch cycles over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeCombo {
    pub complex: bool,
    pub colored: bool,
    pub lined: bool,
}

/// The combos a request admits, in a fixed cycle order. Item `i` of a batch
/// uses combo `i % len`, so a count that is a multiple of the combo count
/// covers every combo equally often.
pub fn admissible_combos(request: &GenerationRequest) -> Vec<AttributeCombo> {
    let complex_values: &[bool] = match request.complexity {
        Complexity::Simple => &[false],
        Complexity::Complex => &[true],
        Complexity::Mixed => &[false, true],
    };
    let pin = |v: Option<bool>| -> Vec<bool> { v.map_or(vec![false, true], |b| vec![b]) };
    let mut combos = Vec::new();
    for &complex in complex_values {
        for &colored in &pin(request.colored) {
            for &lined in &pin(request.lined) {
                combos.push(AttributeCombo { complex, colored, lined });
            }
        }
    }
    combos
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Ok,
    Failed,
    ProviderError,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemReport {
    pub index: usize,
    pub id: Option<String>,
    pub combo: AttributeCombo,
    pub topic: Option<String>,
    /// Fill attempts consumed (1 means the first fill was accepted).
    pub iterations: usize,
    pub status: ItemStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchReport {
    pub requested: usize,
    pub produced: usize,
    pub failed: usize,
    pub items: Vec<ItemReport>,
    /// `fallback_histogram[k]` counts accepted items that needed `k + 1`
    /// fill attempts.
    pub fallback_histogram: Vec<usize>,
    pub duration_ms: u64,
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generation request: {detail}")]
    Config { detail: String },
    /// The provider failed outright. Items finished before the failure are
    /// kept so a long batch is not lost to one outage.
    #[error("provider failed: {message}")]
    Provider { message: String, records: Vec<AnnotationRecord>, report: BatchReport },
}

/// Fill attempts per item before it is reported as failed.
pub const MAX_FALLBACK: usize = 3;

/// Largest merged-region edge, in grid units.
const MAX_SPAN_EXTENT: usize = 4;

fn config(detail: impl Into<String>) -> GenerateError {
    GenerateError::Config { detail: detail.into() }
}

fn validate(request: &GenerationRequest) -> Result<(), GenerateError> {
    let (rl, rh) = request.row_range;
    let (cl, ch) = request.col_range;
    if rl == 0 || cl == 0 || rl > rh || cl > ch {
        return Err(config(format!("size ranges must be non-empty and start at 1: rows {rl}..={rh}, cols {cl}..={ch}")));
    }
    if request.header_layout_weights.iter().all(|&w| w == 0) {
        return Err(config("header layout weights are all zero"));
    }
    if matches!(request.complexity, Complexity::Complex) && rh * ch < 4 {
        return Err(config(format!(
            "complex tables need at least 4 grid positions, but the largest size is {rh}x{ch}"
        )));
    }
    Ok(())
}

fn weighted_layout(rng: &mut ChaCha8Rng, weights: [u32; 3]) -> HeaderLayout {
    let total: u32 = weights.iter().sum();
    let mut roll = rng.random_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        if roll < w {
            return HeaderLayout::ALL[i];
        }
        roll -= w;
    }
    unreachable!("weights sum to total")
}

/// Samples a schema: uniform size in range, all-1 span matrices, then for
/// complex combos 1..=3 merged regions placed on free 1x1 positions.
pub fn sample_schema(
    rng: &mut ChaCha8Rng,
    request: &GenerationRequest,
    complex: bool,
    style: StyleSpec,
) -> TableSchema {
    let n_rows = rng.random_range(request.row_range.0..=request.row_range.1);
    let n_cols = rng.random_range(request.col_range.0..=request.col_range.1);
    let header_layout = weighted_layout(rng, request.header_layout_weights);
    let mut rows = vec![vec![1usize; n_cols]; n_rows];
    let mut cols = vec![vec![1usize; n_cols]; n_rows];
    if complex && n_rows * n_cols >= 4 {
        let k_max = 3.min(n_rows * n_cols / 4).max(1);
        let k = rng.random_range(1..=k_max);
        let mut placed = 0;
        let mut attempts = 0;
        while placed < k && attempts < 60 {
            attempts += 1;
            let r = rng.random_range(0..n_rows);
            let c = rng.random_range(0..n_cols);
            // direction: 0 widens, 1 deepens, 2 makes a block
            let direction = rng.random_range(0..3u8);
            let free = |rr: usize, cc: usize| rows[rr][cc] == 1 && cols[rr][cc] == 1;
            let down_run = (r..n_rows).take_while(|&rr| free(rr, c)).count();
            let right_run = (c..n_cols).take_while(|&cc| free(r, cc)).count();
            let (er, ec) = match direction {
                0 if right_run >= 2 => (1, rng.random_range(2..=right_run.min(MAX_SPAN_EXTENT))),
                1 if down_run >= 2 => (rng.random_range(2..=down_run.min(MAX_SPAN_EXTENT)), 1),
                2 if down_run >= 2 && right_run >= 2 => {
                    let er = rng.random_range(2..=down_run.min(MAX_SPAN_EXTENT));
                    let ec = rng.random_range(2..=right_run.min(MAX_SPAN_EXTENT));
                    (er, ec)
                }
                _ => continue,
            };
            // A block needs its whole rectangle free, not just the two runs.
            if (r..r + er).any(|rr| (c..c + ec).any(|cc| !free(rr, cc))) {
                continue;
            }
            rows[r][c] = er;
            cols[r][c] = ec;
            for rr in r..r + er {
                for cc in c..c + ec {
                    if (rr, cc) != (r, c) {
                        rows[rr][cc] = 0;
                        cols[rr][cc] = 0;
                    }
                }
            }
            placed += 1;
        }
    }
    TableSchema { n_rows, n_cols, row_span_matrix: rows, col_span_matrix: cols, header_layout, style }
}

const PALETTES: [(&str, &str, &str); 6] = [
    ("#dbe5f1", "#ffffff", "#eef3fa"),
    ("#f2dcdb", "#ffffff", "#fbeeee"),
    ("#ebf1dd", "#ffffff", "#f5f9ec"),
    ("#e5e0ec", "#ffffff", "#f2f0f7"),
    ("#fde9d9", "#ffffff", "#fdf4ec"),
    ("#d9edf7", "#fcfcfc", "#ecf6fb"),
];

const FONT_COLORS: [&str; 4] = ["#1f3864", "#632423", "#4f6228", "#000000"];
const BORDER_COLORS: [&str; 4] = ["#000000", "#4a4a4a", "#1f3864", "#7f7f7f"];

/// Samples a style consistent with the combo: `lined` pins the line style
/// to fully lined or one of the other four; `colored` decides whether any
/// color fields are set at all.
pub fn style_from_combo(rng: &mut ChaCha8Rng, combo: AttributeCombo) -> StyleSpec {
    let line_style = if combo.lined {
        LineStyle::FullyLined
    } else {
        [
            LineStyle::HorizontallyLineless,
            LineStyle::VerticallyLineless,
            LineStyle::LinedHeadersOnly,
            LineStyle::Lineless,
        ][rng.random_range(0..4)]
    };
    let mut style = StyleSpec {
        line_style,
        border_thickness: rng.random_range(1..=3),
        font_color: None,
        border_color: None,
        background_palette: None,
        zebra: false,
    };
    if combo.colored {
        let (header, body, alt) = PALETTES[rng.random_range(0..PALETTES.len())];
        style.background_palette = Some(BackgroundPalette {
            header: header.to_string(),
            body: body.to_string(),
            alt: alt.to_string(),
        });
        style.zebra = rng.random_bool(0.5);
        if rng.random_bool(0.5) {
            style.font_color = Some(FONT_COLORS[rng.random_range(0..FONT_COLORS.len())].to_string());
        }
        if rng.random_bool(0.5) {
            style.border_color = Some(BORDER_COLORS[rng.random_range(0..BORDER_COLORS.len())].to_string());
        }
    }
    style
}

/// Stable per-item rng: mixes the item index into the request seed so item
/// streams are independent and the batch is reproducible under any worker
/// count.
fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct ItemOutcome {
    record: Option<AnnotationRecord>,
    report: ItemReport,
}

fn run_item(
    request: &GenerationRequest,
    provider: &dyn ContentProvider,
    checker: &FillingChecker,
    index: usize,
    combo: AttributeCombo,
    topic: &str,
) -> ItemOutcome {
    let mut rng = item_rng(request.seed, index);
    let id = format!("tab-{:08x}-{index:05}", request.seed);
    let mut last_error = String::new();
    for attempt in 1..=MAX_FALLBACK {
        let style = style_from_combo(&mut rng, combo);
        let schema = sample_schema(&mut rng, request, combo.complex, style.clone());
        let grid = grid_from_schema(&schema).expect("sampled schemas tile by construction");
        let skeleton = grid_to_html(&grid, &schema.style);
        let filled = provider
            .fill_headers(&skeleton, topic, &request.domain, request.language)
            .and_then(|with_headers| {
                Ok(provider
                    .fill_bodies(&with_headers, topic, &request.domain, request.language, 1)?
                    .remove(0))
            });
        let filled = match filled {
            Ok(f) => f,
            Err(e @ InfillError::Provider { .. }) => {
                return ItemOutcome {
                    record: None,
                    report: ItemReport {
                        index,
                        id: None,
                        combo,
                        topic: Some(topic.to_string()),
                        iterations: attempt,
                        status: ItemStatus::ProviderError,
                        error: Some(e.to_string()),
                    },
                };
            }
            Err(e) => {
                last_error = e.to_string();
                continue;
            }
        };
        let outcome = checker.check(&filled, Some(topic));
        if !outcome.accepted {
            last_error = format!(
                "rank {} below threshold {} (structure {}, topic {:?}, semantic {:?})",
                outcome.report.overall,
                checker.min_overall,
                outcome.report.structure,
                outcome.report.topic,
                outcome.report.semantic
            );
            continue;
        }
        let final_grid = html_to_grid(&filled).expect("accepted tables parse");
        let labels = Labels {
            is_simple: final_grid.is_simple(),
            is_colored: schema.style.is_colored(),
            is_lined: schema.style.is_lined(),
            line_style: schema.style.line_style,
            header_layout: derive_labels(&final_grid, &schema.style).header_layout,
        };
        let record = AnnotationRecord {
            id: id.clone(),
            html: filled,
            structure_tokens: structure_tokens(&final_grid),
            cells: final_grid.cells.clone(),
            labels,
            topic: topic.to_string(),
            language: request.language,
            provenance: None,
            extra: serde_json::Map::new(),
        };
        return ItemOutcome {
            record: Some(record),
            report: ItemReport {
                index,
                id: Some(id),
                combo,
                topic: Some(topic.to_string()),
                iterations: attempt,
                status: ItemStatus::Ok,
                error: None,
            },
        };
    }
    ItemOutcome {
        record: None,
        report: ItemReport {
            index,
            id: None,
            combo,
            topic: Some(topic.to_string()),
            iterations: MAX_FALLBACK,
            status: ItemStatus::Failed,
            error: Some(last_error),
        },
    }
}

/// Generates a batch of annotated tables. Topics are allocated sequentially
/// up front; items are filled and validated in parallel.
pub fn generate_batch(
    request: &GenerationRequest,
    provider: &dyn ContentProvider,
    checker: &FillingChecker,
) -> Result<(Vec<AnnotationRecord>, BatchReport), GenerateError> {
    let started = std::time::Instant::now();
    validate(request)?;
    let combos = admissible_combos(request);
    let empty_report = |items: Vec<ItemReport>, produced, failed| BatchReport {
        requested: request.count,
        produced,
        failed,
        items,
        fallback_histogram: vec![0; MAX_FALLBACK],
        duration_ms: started.elapsed().as_millis() as u64,
    };
    let topics = match provider.topics(&request.domain, request.language, &request.used_topics, request.count) {
        Ok(t) => t,
        Err(e) => {
            return Err(GenerateError::Provider {
                message: format!("topic allocation failed: {e}"),
                records: Vec::new(),
                report: empty_report(Vec::new(), 0, request.count),
            })
        }
    };

    let outcomes: Vec<ItemOutcome> = (0..request.count)
        .into_par_iter()
        .map(|index| {
            let combo = combos[index % combos.len()];
            match topics.get(index) {
                Some(topic) => run_item(request, provider, checker, index, combo, topic),
                None => ItemOutcome {
                    record: None,
                    report: ItemReport {
                        index,
                        id: None,
                        combo,
                        topic: None,
                        iterations: 0,
                        status: ItemStatus::Failed,
                        error: Some("topic supply exhausted".to_string()),
                    },
                },
            }
        })
        .collect();

    let mut records = Vec::new();
    let mut items = Vec::new();
    let mut histogram = vec![0usize; MAX_FALLBACK];
    let mut provider_failure = None;
    for outcome in outcomes {
        if outcome.report.status == ItemStatus::ProviderError && provider_failure.is_none() {
            provider_failure = outcome.report.error.clone();
        }
        if let Some(r) = outcome.record {
            histogram[outcome.report.iterations - 1] += 1;
            records.push(r);
        }
        items.push(outcome.report);
    }
    let produced = records.len();
    let failed = request.count - produced;
    let report = BatchReport {
        requested: request.count,
        produced,
        failed,
        items,
        fallback_histogram: histogram,
        duration_ms: started.elapsed().as_millis() as u64,
    };
    if let Some(message) = provider_failure {
        return Err(GenerateError::Provider { message, records, report });
    }
    Ok((records, report))
}
