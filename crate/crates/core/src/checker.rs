//! Validity checking and quality ranking for filled tables.
//!
//! Structure comes first: a table with a structural defect is ranked by the
//! defect alone and never reaches content scoring. Valid tables get a topic
//! rank (how much of the topic's vocabulary the table mentions) and a
//! semantic rank (how completely and consistently cells are filled), each on
//! the 1..=5 scale, and the overall rank is the minimum of the components.

use crate::html::{html_to_grid, ParseError};
use crate::model::TableGrid;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    RaggedRows,
    OverlappingSpans,
    SpanOutOfBounds,
    DisallowedTag,
    EmptyStructure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Defect {
    pub kind: DefectKind,
    pub detail: String,
}

/// Structural defects of the first table in `html`. Empty means valid.
/// Parsing stops at the first defect, so the list currently holds at most
/// one entry; callers should still treat it as a list.
pub fn validate_table(html: &str) -> Vec<Defect> {
    match html_to_grid(html) {
        Ok(grid) if grid.cells.is_empty() => vec![Defect {
            kind: DefectKind::EmptyStructure,
            detail: "table has no cells".to_string(),
        }],
        Ok(_) => Vec::new(),
        Err(e) => {
            let kind = match &e {
                ParseError::MissingTable => DefectKind::EmptyStructure,
                ParseError::DisallowedTag { .. } => DefectKind::DisallowedTag,
                ParseError::RaggedRows { .. } => DefectKind::RaggedRows,
                ParseError::OverlappingSpans { .. } => DefectKind::OverlappingSpans,
                ParseError::SpanOutOfBounds { .. } => DefectKind::SpanOutOfBounds,
            };
            vec![Defect { kind, detail: e.to_string() }]
        }
    }
}

/// Rank 5 for defect-free structure, lower per defect: grid geometry breaks
/// (ragged rows, overlaps, out-of-bounds spans) cost 2, a disallowed tag
/// costs 1, and a missing or empty table pins the rank to the floor of 1.
pub fn structure_rank(defects: &[Defect]) -> u8 {
    let mut rank: i32 = 5;
    for d in defects {
        match d.kind {
            DefectKind::RaggedRows | DefectKind::OverlappingSpans | DefectKind::SpanOutOfBounds => rank -= 2,
            DefectKind::DisallowedTag => rank -= 1,
            DefectKind::EmptyStructure => rank = 1,
        }
    }
    rank.max(1) as u8
}

/// Lowercase word tokens: ASCII alphanumeric runs plus each CJK character
/// as its own token, so Chinese topics match without segmentation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            run.push(ch.to_ascii_lowercase());
        } else {
            if !run.is_empty() {
                tokens.push(std::mem::take(&mut run));
            }
            if is_cjk(ch) {
                tokens.push(ch.to_string());
            }
        }
    }
    if !run.is_empty() {
        tokens.push(run);
    }
    tokens
}

fn is_cjk(ch: char) -> bool {
    matches!(ch,
        '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}' | '\u{F900}'..='\u{FAFF}')
}

const STOPWORDS: [&str; 16] = [
    "the", "a", "an", "of", "for", "and", "or", "in", "on", "by", "with", "to", "at", "per", "vs", "is",
];

/// Key phrases of a topic: the content-word tokens plus the full topic
/// string itself. Used for prompt slots and topic matching.
pub fn entities(topic: &str) -> Vec<String> {
    let mut out: Vec<String> = tokenize(topic)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect();
    out.dedup();
    let full = topic.trim().to_string();
    if !full.is_empty() && !out.contains(&full) {
        out.push(full);
    }
    out
}

/// Content ranking interface. Implementations must be shareable across the
/// worker threads that validate generated batches.
pub trait QualityRanker: Send + Sync {
    /// 1..=5: how much of the topic's vocabulary the table mentions.
    fn topic_rank(&self, grid: &TableGrid, topic: &str) -> u8;
    /// 1..=5: fill completeness and per-column (or per-row) type consistency.
    fn semantic_rank(&self, grid: &TableGrid) -> u8;
}

/// Deterministic offline ranker built on token overlap and simple value
/// typing. A stand-in for judgment calls a human or stronger model would
/// make, calibrated so that on-topic, fully filled tables score 4..=5.
pub struct SurrogateRanker;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ValueType {
    Numeric,
    Text,
}

/// Numeric if the cell has digits and at least as many digits as letters
/// ("59", "4.5 GHz", "30%"); otherwise text.
fn classify(content: &str) -> Option<ValueType> {
    let trimmed = content.trim();
    if trimmed.is_empty() {
        return None;
    }
    let digits = trimmed.chars().filter(char::is_ascii_digit).count();
    let letters = trimmed.chars().filter(|c| c.is_alphabetic()).count();
    if digits > 0 && digits >= letters {
        Some(ValueType::Numeric)
    } else {
        Some(ValueType::Text)
    }
}

/// Placeholders that count as a deliberate fill, not a gap.
fn is_placeholder(content: &str) -> bool {
    matches!(content.trim(), "N/A" | "n/a" | "-" | "TBD" | "tbd" | "—")
}

impl SurrogateRanker {
    fn coverage(grid: &TableGrid, topic: &str) -> f64 {
        let topic_tokens: Vec<String> = {
            let mut t = tokenize(topic);
            t.sort();
            t.dedup();
            t
        };
        if topic_tokens.is_empty() {
            return 0.0;
        }
        let mut table_tokens: Vec<String> = grid.cells.iter().flat_map(|c| tokenize(&c.content)).collect();
        table_tokens.sort();
        table_tokens.dedup();
        let hits = topic_tokens.iter().filter(|t| table_tokens.binary_search(t).is_ok()).count();
        hits as f64 / topic_tokens.len() as f64
    }

    /// Fraction of groups whose non-empty body cells agree on a value type,
    /// grouping along the given axis. Groups with fewer than two typed cells
    /// are vacuously consistent and excluded; no groups at all scores 1.0.
    fn type_agreement(grid: &TableGrid, by_column: bool) -> f64 {
        let n_groups = if by_column { grid.n_cols } else { grid.n_rows };
        let mut scores = Vec::new();
        for g in 0..n_groups {
            let types: Vec<ValueType> = grid
                .cells
                .iter()
                .filter(|c| !c.is_header && (if by_column { c.col_start == g } else { c.row_start == g }))
                .filter_map(|c| classify(&c.content))
                .collect();
            if types.len() < 2 {
                continue;
            }
            let numeric = types.iter().filter(|t| **t == ValueType::Numeric).count();
            let majority = numeric.max(types.len() - numeric);
            scores.push(majority as f64 / types.len() as f64);
        }
        if scores.is_empty() {
            1.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        }
    }
}

impl QualityRanker for SurrogateRanker {
    fn topic_rank(&self, grid: &TableGrid, topic: &str) -> u8 {
        let c = Self::coverage(grid, topic);
        match c {
            c if c >= 0.6 => 5,
            c if c >= 0.4 => 4,
            c if c >= 0.25 => 3,
            c if c >= 0.1 => 2,
            _ => 1,
        }
    }

    fn semantic_rank(&self, grid: &TableGrid) -> u8 {
        let total = grid.cells.len();
        if total == 0 {
            return 1;
        }
        let empty = grid
            .cells
            .iter()
            .filter(|c| c.content.trim().is_empty() && !is_placeholder(&c.content))
            .count();
        let ratio = empty as f64 / total as f64;
        let base: i32 = match ratio {
            r if r == 0.0 => 5,
            r if r <= 0.1 => 4,
            r if r <= 0.25 => 3,
            r if r <= 0.5 => 2,
            _ => 1,
        };
        let agreement = Self::type_agreement(grid, true).max(Self::type_agreement(grid, false));
        let deduction = if agreement >= 0.75 {
            0
        } else if agreement >= 0.5 {
            1
        } else {
            2
        };
        (base - deduction).max(1) as u8
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankReport {
    pub structure: u8,
    pub topic: Option<u8>,
    pub semantic: Option<u8>,
    pub overall: u8,
    pub defects: Vec<Defect>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub report: RankReport,
    pub accepted: bool,
}

/// Validates a filled table and decides acceptance: structure defects first,
/// then content ranks from the configured ranker. `min_overall` is the
/// acceptance threshold on the combined rank.
pub struct FillingChecker {
    pub min_overall: u8,
    ranker: Option<Box<dyn QualityRanker>>,
}

impl Default for FillingChecker {
    fn default() -> Self {
        FillingChecker::surrogate()
    }
}

impl FillingChecker {
    /// Structure-only checking; content is not ranked.
    pub fn structural() -> Self {
        FillingChecker { min_overall: 3, ranker: None }
    }

    pub fn surrogate() -> Self {
        FillingChecker { min_overall: 3, ranker: Some(Box::new(SurrogateRanker)) }
    }

    pub fn with_ranker(ranker: Box<dyn QualityRanker>) -> Self {
        FillingChecker { min_overall: 3, ranker: Some(ranker) }
    }

    pub fn min_overall(mut self, min_overall: u8) -> Self {
        self.min_overall = min_overall;
        self
    }

    pub fn check(&self, html: &str, topic: Option<&str>) -> CheckOutcome {
        let defects = validate_table(html);
        let structure = structure_rank(&defects);
        let mut topic_rank = None;
        let mut semantic = None;
        if defects.is_empty() {
            if let Some(ranker) = &self.ranker {
                let grid = html_to_grid(html).expect("no defects implies parseable");
                topic_rank = topic.map(|t| ranker.topic_rank(&grid, t));
                semantic = Some(ranker.semantic_rank(&grid));
            }
        }
        let overall = [Some(structure), topic_rank, semantic].into_iter().flatten().min().expect("structure is present");
        let report = RankReport { structure, topic: topic_rank, semantic, overall, defects };
        // Ranks order candidates; acceptance additionally requires a clean
        // structure, whatever the threshold.
        let accepted = report.defects.is_empty() && report.overall >= self.min_overall;
        CheckOutcome { report, accepted }
    }
}
