//! Meta-evaluation of the checker: corrupt records along one quality
//! dimension at controlled severities, re-rank, and measure how well the
//! checker's ordering tracks the known corruption ordering.
//!
//! Each repetition splits the records into three near-equal severity groups
//! (0 untouched, 1 mild, 2 severe), applies the dimension's corruption, and
//! correlates expected quality (descending severity) against the re-ranked
//! scores. Results aggregate over repetitions as mean and half a standard
//! deviation.

use crate::checker::{structure_rank, validate_table, QualityRanker};
use crate::corr::{kendall_tau_b, pearson, spearman, CorrError};
use crate::html::html_to_grid;
use crate::model::{AnnotationRecord, TableGrid};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Structure,
    Topic,
    Semantics,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Structure, Dimension::Topic, Dimension::Semantics];
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Dimension::Structure => "structure",
            Dimension::Topic => "topic",
            Dimension::Semantics => "semantics",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DisturbError {
    #[error("degenerate input: {detail}")]
    DegenerateInput { detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSpread {
    pub mean: f64,
    pub half_std: f64,
}

impl MeanSpread {
    fn over(values: &[f64]) -> MeanSpread {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanSpread { mean, half_std: var.sqrt() / 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dimension: Dimension,
    pub spearman: MeanSpread,
    pub pearson: MeanSpread,
    pub kendall: MeanSpread,
    /// Fraction of corrupted records whose targeted rank strictly dropped
    /// below its uncorrupted value, averaged over repetitions.
    pub strict_drop_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub records: usize,
    pub repetitions: usize,
    pub dimensions: Vec<DimensionReport>,
}

/// Correlation with the study's edge conventions: a run that disturbed
/// nothing agrees trivially (1.0), and a checker that cannot separate any
/// of the severities shows no association (0.0).
fn correlation_with_convention(
    f: fn(&[f64], &[f64]) -> Result<f64, CorrError>,
    xs: &[f64],
    ys: &[f64],
) -> f64 {
    let varies = |v: &[f64]| v.iter().any(|&x| x != v[0]);
    if xs.is_empty() || !varies(xs) {
        return 1.0;
    }
    if !varies(ys) {
        return 0.0;
    }
    f(xs, ys).unwrap_or(0.0)
}

/// Near-equal random split into severities 0, 1, 2.
fn assign_severities(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut sev = vec![0u8; n];
    for (pos, &i) in order.iter().enumerate() {
        sev[i] = (3 * pos / n) as u8;
    }
    sev
}

/// Removes `count` randomly chosen cell or row closing tags. Any table the
/// strict parser accepted has at least one such closer per row, so a
/// positive count always damages a parseable table; tables with no closers
/// were already broken and come back unchanged.
fn delete_closing_tags(html: &str, count: usize, rng: &mut ChaCha8Rng) -> String {
    let mut positions: Vec<(usize, usize)> = Vec::new();
    for closer in ["</td>", "</th>", "</tr>"] {
        positions.extend(html.match_indices(closer).map(|(at, m)| (at, m.len())));
    }
    if positions.is_empty() {
        return html.to_string();
    }
    positions.shuffle(rng);
    positions.truncate(count.min(positions.len()));
    positions.sort_by(|a, b| b.0.cmp(&a.0));
    let mut out = html.to_string();
    for (at, len) in positions {
        out.replace_range(at..at + len, "");
    }
    out
}

/// Moves contents between a fraction of the body cells (rotation, so every
/// chosen cell really changes) and blanks a share of the moved ones.
fn shuffle_body_contents(grid: &TableGrid, fraction: f64, blank_fraction: f64, rng: &mut ChaCha8Rng) -> TableGrid {
    let mut g = grid.clone();
    let mut chosen: Vec<usize> =
        g.cells.iter().enumerate().filter(|(_, c)| !c.is_header).map(|(i, _)| i).collect();
    chosen.shuffle(rng);
    let take = (chosen.len() as f64 * fraction).round() as usize;
    chosen.truncate(take);
    let mut contents: Vec<String> = chosen.iter().map(|&i| g.cells[i].content.clone()).collect();
    let step = 1.min(contents.len());
    contents.rotate_right(step);
    for (k, &i) in chosen.iter().enumerate() {
        g.cells[i].content = contents[k].clone();
    }
    let n_blank = (chosen.len() as f64 * blank_fraction).ceil() as usize;
    for &i in chosen.iter().take(n_blank) {
        g.cells[i].content.clear();
    }
    g
}

fn record_rng(rep_seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(rep_seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct RepetitionOutcome {
    spearman: f64,
    pearson: f64,
    kendall: f64,
    strict_drop: f64,
}

fn run_repetition(
    dimension: Dimension,
    records: &[AnnotationRecord],
    grids: &[TableGrid],
    baseline: &[u8],
    severities: &[u8],
    ranker: &dyn QualityRanker,
    rep_seed: u64,
) -> RepetitionOutcome {
    let ranks: Vec<u8> = match dimension {
        Dimension::Structure => records
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                if severities[i] == 0 {
                    baseline[i]
                } else {
                    let mut rng = record_rng(rep_seed, i);
                    let broken = delete_closing_tags(&r.html, severities[i] as usize, &mut rng);
                    structure_rank(&validate_table(&broken))
                }
            })
            .collect(),
        Dimension::Topic => {
            // Mild corruption trades topics around the mild group so every
            // member claims some other record's topic; severe corruption
            // claims a fixed off-domain subject.
            const OFF_DOMAIN: &str = "tidal marsh sediment accretion survey";
            let mild: Vec<usize> = (0..records.len()).filter(|&i| severities[i] == 1).collect();
            let mut topics: Vec<String> = records.iter().map(|r| r.topic.clone()).collect();
            if mild.len() >= 2 {
                for w in 0..mild.len() {
                    topics[mild[w]] = records[mild[(w + 1) % mild.len()]].topic.clone();
                }
            } else if let Some(&lone) = mild.first() {
                topics[lone] = records[(lone + 1) % records.len()].topic.clone();
            }
            for i in 0..records.len() {
                if severities[i] == 2 {
                    topics[i] = OFF_DOMAIN.to_string();
                }
            }
            grids
                .par_iter()
                .enumerate()
                .map(|(i, g)| if severities[i] == 0 { baseline[i] } else { ranker.topic_rank(g, &topics[i]) })
                .collect()
        }
        Dimension::Semantics => grids
            .par_iter()
            .enumerate()
            .map(|(i, g)| match severities[i] {
                0 => baseline[i],
                1 => {
                    let mut rng = record_rng(rep_seed, i);
                    ranker.semantic_rank(&shuffle_body_contents(g, 0.5, 0.0, &mut rng))
                }
                _ => {
                    let mut rng = record_rng(rep_seed, i);
                    ranker.semantic_rank(&shuffle_body_contents(g, 1.0, 0.4, &mut rng))
                }
            })
            .collect(),
    };

    let xs: Vec<f64> = severities.iter().map(|&s| (2 - s) as f64).collect();
    let ys: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
    let corrupted: Vec<usize> = (0..records.len()).filter(|&i| severities[i] > 0).collect();
    let dropped = corrupted.iter().filter(|&&i| ranks[i] < baseline[i]).count();
    RepetitionOutcome {
        spearman: correlation_with_convention(spearman, &xs, &ys),
        pearson: correlation_with_convention(pearson, &xs, &ys),
        kendall: correlation_with_convention(kendall_tau_b, &xs, &ys),
        strict_drop: if corrupted.is_empty() { 0.0 } else { dropped as f64 / corrupted.len() as f64 },
    }
}

pub fn disturbance_study(
    records: &[AnnotationRecord],
    dimensions: &[Dimension],
    ranker: &dyn QualityRanker,
    seed: u64,
    repetitions: usize,
) -> Result<StudyReport, DisturbError> {
    if records.is_empty() {
        return Err(DisturbError::DegenerateInput { detail: "no records to disturb".to_string() });
    }
    if repetitions == 0 {
        return Err(DisturbError::DegenerateInput { detail: "need at least one repetition".to_string() });
    }
    let grids: Vec<TableGrid> = records
        .iter()
        .map(|r| {
            html_to_grid(&r.html).map_err(|e| DisturbError::DegenerateInput {
                detail: format!("record {} does not parse: {e}", r.id),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut reports = Vec::with_capacity(dimensions.len());
    for &dimension in dimensions {
        let baseline: Vec<u8> = match dimension {
            Dimension::Structure => records.iter().map(|r| structure_rank(&validate_table(&r.html))).collect(),
            Dimension::Topic => {
                grids.iter().zip(records).map(|(g, r)| ranker.topic_rank(g, &r.topic)).collect()
            }
            Dimension::Semantics => grids.iter().map(|g| ranker.semantic_rank(g)).collect(),
        };
        let mut outcomes = Vec::with_capacity(repetitions);
        for rep in 0..repetitions {
            let rep_seed = seed ^ (rep as u64).wrapping_mul(0x517c_c1b7_2722_0a95);
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let severities = assign_severities(records.len(), &mut rng);
            outcomes.push(run_repetition(dimension, records, &grids, &baseline, &severities, ranker, rep_seed));
        }
        reports.push(DimensionReport {
            dimension,
            spearman: MeanSpread::over(&outcomes.iter().map(|o| o.spearman).collect::<Vec<_>>()),
            pearson: MeanSpread::over(&outcomes.iter().map(|o| o.pearson).collect::<Vec<_>>()),
            kendall: MeanSpread::over(&outcomes.iter().map(|o| o.kendall).collect::<Vec<_>>()),
            strict_drop_fraction: outcomes.iter().map(|o| o.strict_drop).sum::<f64>() / repetitions as f64,
        });
    }
    Ok(StudyReport { records: records.len(), repetitions, dimensions: reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{FillingChecker, SurrogateRanker};
    use crate::generate::{generate_batch, GenerationRequest};
    use crate::infill::TemplateProvider;

    fn template_records(count: usize, seed: u64) -> Vec<AnnotationRecord> {
        let req = GenerationRequest { count, seed, ..GenerationRequest::default() };
        generate_batch(&req, &TemplateProvider, &FillingChecker::default()).unwrap().0
    }

    #[test]
    fn convention_covers_degenerate_orderings() {
        assert_eq!(correlation_with_convention(spearman, &[1.0, 1.0, 1.0], &[5.0, 3.0, 1.0]), 1.0);
        assert_eq!(correlation_with_convention(spearman, &[2.0, 1.0, 0.0], &[4.0, 4.0, 4.0]), 0.0);
        let r = correlation_with_convention(spearman, &[2.0, 1.0, 0.0], &[5.0, 4.0, 2.0]);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deleting_closers_breaks_a_valid_table() {
        let records = template_records(4, 91);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for r in &records {
            assert!(validate_table(&r.html).is_empty());
            let broken = delete_closing_tags(&r.html, 1, &mut rng);
            assert!(!validate_table(&broken).is_empty(), "one missing closer must surface as a defect");
        }
    }

    #[test]
    fn shuffling_blanks_only_body_cells() {
        let records = template_records(1, 92);
        let grid = html_to_grid(&records[0].html).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shuffled = shuffle_body_contents(&grid, 1.0, 0.4, &mut rng);
        let headers_before: Vec<&String> =
            grid.cells.iter().filter(|c| c.is_header).map(|c| &c.content).collect();
        let headers_after: Vec<&String> =
            shuffled.cells.iter().filter(|c| c.is_header).map(|c| &c.content).collect();
        assert_eq!(headers_before, headers_after);
        let body_total = grid.cells.iter().filter(|c| !c.is_header).count();
        let blanked = shuffled.cells.iter().filter(|c| !c.is_header && c.content.is_empty()).count();
        let body_blank_before = grid.cells.iter().filter(|c| !c.is_header && c.content.is_empty()).count();
        assert!(blanked >= body_blank_before + (body_total * 2) / 5, "about 40% of body cells blank out");
    }

    #[test]
    fn structure_disturbance_always_drops_the_rank() {
        let records = template_records(12, 93);
        let report =
            disturbance_study(&records, &[Dimension::Structure], &SurrogateRanker, 7, 3).unwrap();
        let dim = &report.dimensions[0];
        assert_eq!(dim.strict_drop_fraction, 1.0, "every corrupted record must lose structure rank");
        assert!(dim.spearman.mean > 0.5, "checker tracks severity, got {}", dim.spearman.mean);
        assert!(dim.half_ok());
        assert_eq!(report.repetitions, 3);
        assert_eq!(report.records, 12);
    }

    impl DimensionReport {
        fn half_ok(&self) -> bool {
            self.spearman.half_std >= 0.0 && self.pearson.half_std >= 0.0 && self.kendall.half_std >= 0.0
        }
    }

    #[test]
    fn topic_and_semantics_disturbances_correlate() {
        let records = template_records(12, 94);
        let report = disturbance_study(
            &records,
            &[Dimension::Topic, Dimension::Semantics],
            &SurrogateRanker,
            11,
            3,
        )
        .unwrap();
        assert_eq!(report.dimensions.len(), 2);
        for dim in &report.dimensions {
            assert!(
                dim.spearman.mean > 0.3,
                "{} disturbance should register, got {}",
                dim.dimension,
                dim.spearman.mean
            );
            assert!(dim.strict_drop_fraction > 0.5, "{} mostly drops ranks", dim.dimension);
        }
    }

    #[test]
    fn study_is_deterministic_and_guards_empty_input() {
        let records = template_records(6, 95);
        let a = disturbance_study(&records, &Dimension::ALL, &SurrogateRanker, 3, 3).unwrap();
        let b = disturbance_study(&records, &Dimension::ALL, &SurrogateRanker, 3, 3).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            disturbance_study(&[], &Dimension::ALL, &SurrogateRanker, 3, 3),
            Err(DisturbError::DegenerateInput { .. })
        ));
    }
}
