//! Span-aware structural transforms and the nine-variant expansion.
//!
//! Transforms edit a resolved grid, never raw markup, so the merged-cell
//! geometry is always visible to the operation. The scope rule for the
//! destructive ops: a transform may only modify cells anchored inside its
//! operand block. Deleting a block a span hangs into from above would force
//! an edit to an out-of-scope cell, so it is refused with the offending
//! rectangle; a cell anchored inside the block that reaches below it is in
//! scope and shrinks instead. Copy is additive: spans covering the whole
//! copied block grow by its length, but a span overlapping only part of a
//! multi-line block is refused because its duplicate would detach.

use crate::html::{css_from_style, document, extract_css, html_to_grid, table_markup, structure_tokens};
use crate::infill::{ContentProvider, InfillError};
use crate::model::{derive_labels, AnnotationRecord, Cell, Labels, StyleSpec, TableGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAxis {
    Row,
    Column,
}

/// A grid rectangle, used to name the cell blocking a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub row_start: usize,
    pub col_start: usize,
    pub rowspan: usize,
    pub colspan: usize,
}

impl Rect {
    fn of(cell: &Cell) -> Rect {
        Rect { row_start: cell.row_start, col_start: cell.col_start, rowspan: cell.rowspan, colspan: cell.colspan }
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rows {}..{} x cols {}..{}",
            self.row_start,
            self.row_start + self.rowspan,
            self.col_start,
            self.col_start + self.colspan
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Transform {
    /// Duplicates the block `start..start+len` in place; content below
    /// shifts, spans reaching through the whole block grow by its length.
    /// A span overlapping only part of a multi-line block is refused: its
    /// duplicated stretch would not be adjacent to the original cell.
    Copy { axis: GridAxis, start: usize, len: usize },
    /// Removes the block. Cells anchored inside it are removed, or shrink
    /// and reanchor if they reach below; spans hanging into the block from
    /// above refuse the delete.
    Delete { axis: GridAxis, start: usize, len: usize },
    /// `len == 1`: strict content swap between two lines whose cells must
    /// all be 1x1. `len >= 2`: exchanges two equal-length disjoint blocks;
    /// merged cells may ride along inside a block but not straddle its edge.
    Swap { axis: GridAxis, a: usize, b: usize, len: usize },
    /// Recolors one row via an injected stylesheet rule; the grid itself is
    /// untouched.
    Alter { row: usize, color: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("copying would split the span at {rect}")]
    CopyBreaksSpan { rect: Rect },
    #[error("deleting would break the span at {rect}")]
    DeleteBreaksSpan { rect: Rect },
    #[error("swap operand intersects the span at {rect}")]
    SwapIntersectsSpan { rect: Rect },
    #[error("operand out of bounds: {detail}")]
    OutOfBounds { detail: String },
    #[error("the transform would leave the table empty")]
    WouldEmpty,
    #[error("bad operand: {detail}")]
    BadOperand { detail: String },
}

/// Result of a transform: a new grid, or a stylesheet rule to append for
/// grid-preserving restyles.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Grid(TableGrid),
    Css { rule: String },
}

/// Where merged cells constrain line-level edits: `boundary_crossed[i]` says
/// a span reaches across the boundary above row (or left of column) `i`.
#[derive(Debug, Clone)]
pub struct SpanRegions {
    pub row_boundary_crossed: Vec<bool>,
    pub col_boundary_crossed: Vec<bool>,
    pub merged: Vec<Rect>,
}

pub fn span_regions(grid: &TableGrid) -> SpanRegions {
    let mut rows = vec![false; grid.n_rows + 1];
    let mut cols = vec![false; grid.n_cols + 1];
    let mut merged = Vec::new();
    for cell in &grid.cells {
        for r in cell.row_start + 1..cell.row_start + cell.rowspan {
            rows[r] = true;
        }
        for c in cell.col_start + 1..cell.col_start + cell.colspan {
            cols[c] = true;
        }
        if cell.is_spanning() {
            merged.push(Rect::of(cell));
        }
    }
    SpanRegions { row_boundary_crossed: rows, col_boundary_crossed: cols, merged }
}

fn oob(detail: impl Into<String>) -> TransformError {
    TransformError::OutOfBounds { detail: detail.into() }
}

fn rebuild(n_rows: usize, n_cols: usize, cells: Vec<Cell>) -> TableGrid {
    TableGrid::from_cells(n_rows, n_cols, cells).expect("transforms preserve the tiling invariant")
}

fn copy_rows(grid: &TableGrid, start: usize, len: usize) -> Result<TableGrid, TransformError> {
    if len == 0 {
        return Err(TransformError::BadOperand { detail: "zero-length block".to_string() });
    }
    if start + len > grid.n_rows {
        return Err(oob(format!("block {start}..{} exceeds extent {}", start + len, grid.n_rows)));
    }
    let end = start + len;
    let mut cells = Vec::with_capacity(grid.cells.len() + grid.n_cols);
    for cell in &grid.cells {
        let (r0, r1) = (cell.row_start, cell.row_start + cell.rowspan);
        if r1 <= start {
            cells.push(cell.clone());
        } else if r0 >= end {
            let mut shifted = cell.clone();
            shifted.row_start += len;
            cells.push(shifted);
        } else if r0 >= start && r1 <= end {
            cells.push(cell.clone());
            let mut dup = cell.clone();
            dup.row_start += len;
            cells.push(dup);
        } else if r0 <= start && r1 >= end {
            let mut grown = cell.clone();
            grown.rowspan += len;
            cells.push(grown);
        } else {
            // Partial overlap: the copied stretch would detach from the cell.
            return Err(TransformError::CopyBreaksSpan { rect: Rect::of(cell) });
        }
    }
    Ok(rebuild(grid.n_rows + len, grid.n_cols, cells))
}

fn delete_rows(grid: &TableGrid, start: usize, len: usize) -> Result<TableGrid, TransformError> {
    if len == 0 {
        return Err(TransformError::BadOperand { detail: "zero-length block".to_string() });
    }
    if start + len > grid.n_rows {
        return Err(oob(format!("block {start}..{} exceeds extent {}", start + len, grid.n_rows)));
    }
    if len >= grid.n_rows {
        return Err(TransformError::WouldEmpty);
    }
    let end = start + len;
    let mut cells = Vec::with_capacity(grid.cells.len());
    for cell in &grid.cells {
        let (r0, r1) = (cell.row_start, cell.row_start + cell.rowspan);
        if r1 <= start {
            cells.push(cell.clone());
        } else if r0 >= end {
            let mut shifted = cell.clone();
            shifted.row_start -= len;
            cells.push(shifted);
        } else if r0 < start {
            // Anchored above the block: out of the operand's scope.
            return Err(TransformError::DeleteBreaksSpan { rect: Rect::of(cell) });
        } else if r1 <= end {
            // Fully inside: removed.
        } else {
            // Anchored inside, reaches below: keep the surviving part.
            let mut kept = cell.clone();
            kept.row_start = start;
            kept.rowspan = r1 - end;
            cells.push(kept);
        }
    }
    Ok(rebuild(grid.n_rows - len, grid.n_cols, cells))
}

fn swap_single_rows(grid: &TableGrid, a: usize, b: usize) -> Result<TableGrid, TransformError> {
    if a >= grid.n_rows || b >= grid.n_rows {
        return Err(oob(format!("lines {a}, {b} exceed extent {}", grid.n_rows)));
    }
    for cell in &grid.cells {
        let touches = |r: usize| r >= cell.row_start && r < cell.row_start + cell.rowspan;
        if (touches(a) || touches(b)) && cell.is_spanning() {
            return Err(TransformError::SwapIntersectsSpan { rect: Rect::of(cell) });
        }
    }
    let mut cells = grid.cells.clone();
    for c in 0..grid.n_cols {
        let (ia, ib) = (grid.occupancy[a][c], grid.occupancy[b][c]);
        let content = cells[ia].content.clone();
        let header = cells[ia].is_header;
        cells[ia].content = cells[ib].content.clone();
        cells[ia].is_header = cells[ib].is_header;
        cells[ib].content = content;
        cells[ib].is_header = header;
    }
    Ok(rebuild(grid.n_rows, grid.n_cols, cells))
}

fn swap_row_blocks(grid: &TableGrid, a: usize, b: usize, len: usize) -> Result<TableGrid, TransformError> {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if hi + len > grid.n_rows {
        return Err(oob(format!("block {hi}..{} exceeds extent {}", hi + len, grid.n_rows)));
    }
    if lo + len > hi {
        return Err(TransformError::BadOperand { detail: "swap blocks overlap".to_string() });
    }
    let inside = |r0: usize, r1: usize, s: usize| r0 >= s && r1 <= s + len;
    let outside = |r0: usize, r1: usize, s: usize| r1 <= s || r0 >= s + len;
    let mut cells = Vec::with_capacity(grid.cells.len());
    for cell in &grid.cells {
        let (r0, r1) = (cell.row_start, cell.row_start + cell.rowspan);
        let mut moved = cell.clone();
        if inside(r0, r1, lo) {
            moved.row_start = r0 - lo + hi;
        } else if inside(r0, r1, hi) {
            moved.row_start = r0 - hi + lo;
        } else if !(outside(r0, r1, lo) && outside(r0, r1, hi)) {
            return Err(TransformError::SwapIntersectsSpan { rect: Rect::of(cell) });
        }
        cells.push(moved);
    }
    Ok(rebuild(grid.n_rows, grid.n_cols, cells))
}

/// Rows become columns; used to run every column op through the row code.
fn transpose(grid: &TableGrid) -> TableGrid {
    let cells = grid
        .cells
        .iter()
        .map(|c| Cell {
            content: c.content.clone(),
            row_start: c.col_start,
            col_start: c.row_start,
            rowspan: c.colspan,
            colspan: c.rowspan,
            is_header: c.is_header,
        })
        .collect();
    TableGrid::from_cells(grid.n_cols, grid.n_rows, cells).expect("transposing preserves the tiling")
}

fn transpose_rect(r: Rect) -> Rect {
    Rect { row_start: r.col_start, col_start: r.row_start, rowspan: r.colspan, colspan: r.rowspan }
}

/// Errors from an op run on the transposed grid carry transposed rects;
/// map them back to the caller's orientation.
fn transpose_err(e: TransformError) -> TransformError {
    match e {
        TransformError::CopyBreaksSpan { rect } => TransformError::CopyBreaksSpan { rect: transpose_rect(rect) },
        TransformError::DeleteBreaksSpan { rect } => TransformError::DeleteBreaksSpan { rect: transpose_rect(rect) },
        TransformError::SwapIntersectsSpan { rect } => {
            TransformError::SwapIntersectsSpan { rect: transpose_rect(rect) }
        }
        other => other,
    }
}

fn on_axis(
    grid: &TableGrid,
    axis: GridAxis,
    f: impl Fn(&TableGrid) -> Result<TableGrid, TransformError>,
) -> Result<TableGrid, TransformError> {
    match axis {
        GridAxis::Row => f(grid),
        GridAxis::Column => f(&transpose(grid)).map(|g| transpose(&g)).map_err(transpose_err),
    }
}

/// Stylesheet rule recoloring one row (1-based in CSS terms).
pub fn alter_css_rule(row: usize, color: &str) -> String {
    format!("tr:nth-child({}) td {{ background-color: {color}; }}\n", row + 1)
}

pub fn apply_transform(grid: &TableGrid, transform: &Transform) -> Result<Applied, TransformError> {
    match transform {
        Transform::Copy { axis, start, len } => {
            on_axis(grid, *axis, |g| copy_rows(g, *start, *len)).map(Applied::Grid)
        }
        Transform::Delete { axis, start, len } => {
            on_axis(grid, *axis, |g| delete_rows(g, *start, *len)).map(Applied::Grid)
        }
        Transform::Swap { axis, a, b, len } => {
            if a == b {
                return Err(TransformError::BadOperand { detail: "swap operands are the same line".to_string() });
            }
            match len {
                0 => Err(TransformError::BadOperand { detail: "zero-length block".to_string() }),
                1 => on_axis(grid, *axis, |g| swap_single_rows(g, *a, *b)),
                _ => on_axis(grid, *axis, |g| swap_row_blocks(g, *a, *b, *len)),
            }
            .map(Applied::Grid)
        }
        Transform::Alter { row, color } => {
            if *row >= grid.n_rows {
                return Err(oob(format!("row {row} of {}", grid.n_rows)));
            }
            if color.is_empty() {
                return Err(TransformError::BadOperand { detail: "empty color".to_string() });
            }
            Ok(Applied::Css { rule: alter_css_rule(*row, color) })
        }
    }
}

const ALTER_COLORS: [&str; 4] = ["#fff2cc", "#d9ead3", "#f4cccc", "#cfe2f3"];

/// Picks a random feasible instance of the op class, degrading to a row
/// recolor when the grid's span layout admits none.
fn random_feasible(grid: &TableGrid, slot: usize, rng: &mut ChaCha8Rng) -> (Transform, Applied) {
    let random_axis = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { GridAxis::Row } else { GridAxis::Column };
    let axis_len = |axis: GridAxis| match axis {
        GridAxis::Row => grid.n_rows,
        GridAxis::Column => grid.n_cols,
    };
    for _ in 0..8 {
        let axis = random_axis(rng);
        let n = axis_len(axis);
        let candidate = match slot {
            0 => Transform::Copy { axis, start: rng.random_range(0..n), len: 1 },
            1 if n >= 2 => Transform::Delete { axis, start: rng.random_range(0..n), len: 1 },
            2 if n >= 2 => {
                let a = rng.random_range(0..n);
                let b = (a + rng.random_range(1..n)) % n;
                Transform::Swap { axis, a, b, len: 1 }
            }
            3 => Transform::Alter {
                row: rng.random_range(0..grid.n_rows),
                color: ALTER_COLORS[rng.random_range(0..ALTER_COLORS.len())].to_string(),
            },
            _ => continue,
        };
        if let Ok(applied) = apply_transform(grid, &candidate) {
            return (candidate, applied);
        }
    }
    let fallback = Transform::Alter {
        row: rng.random_range(0..grid.n_rows),
        color: ALTER_COLORS[rng.random_range(0..ALTER_COLORS.len())].to_string(),
    };
    let applied = apply_transform(grid, &fallback).expect("altering an existing row always applies");
    (fallback, applied)
}

/// Expands one record into exactly nine variants: fresh body fills for all,
/// and for the last four additionally one structural edit each (copy,
/// delete, swap, recolor), with infeasible edits degrading to a recolor.
pub fn variant_fanout(
    parent: &AnnotationRecord,
    domain: &str,
    provider: &dyn ContentProvider,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AnnotationRecord>, InfillError> {
    const N_VARIANTS: usize = 9;
    const N_TRANSFORMED: usize = 4;
    let bodies = provider.fill_bodies(&parent.html, &parent.topic, domain, parent.language, N_VARIANTS)?;
    let mut out = Vec::with_capacity(N_VARIANTS);
    for (i, body_html) in bodies.into_iter().enumerate() {
        let grid = html_to_grid(&body_html).map_err(|e| InfillError::InvalidInput {
            detail: format!("variant {i} does not parse: {e}"),
        })?;
        let (html, final_grid, transform, recolored) = if i < N_VARIANTS - N_TRANSFORMED {
            (body_html, grid, None, false)
        } else {
            let slot = i - (N_VARIANTS - N_TRANSFORMED);
            let (transform, applied) = random_feasible(&grid, slot, rng);
            let css = extract_css(&body_html)
                .map(str::to_string)
                .unwrap_or_else(|| css_from_style(&StyleSpec::plain()));
            match applied {
                Applied::Grid(new_grid) => {
                    let html = document(&css, &table_markup(&new_grid));
                    (html, new_grid, Some(transform), false)
                }
                Applied::Css { rule } => {
                    let html = document(&format!("{css}{rule}"), &table_markup(&grid));
                    (html, grid, Some(transform), true)
                }
            }
        };
        let labels = Labels {
            is_simple: final_grid.is_simple(),
            is_colored: parent.labels.is_colored || recolored,
            is_lined: parent.labels.is_lined,
            line_style: parent.labels.line_style,
            header_layout: derive_labels(&final_grid, &StyleSpec::plain()).header_layout,
        };
        let provenance = json!({
            "parent_id": parent.id,
            "transform": transform.as_ref().map(|t| serde_json::to_value(t).expect("transforms serialize")),
        });
        out.push(AnnotationRecord {
            id: format!("{}-v{}", parent.id, i + 1),
            html,
            structure_tokens: structure_tokens(&final_grid),
            cells: final_grid.cells.clone(),
            labels,
            topic: parent.topic.clone(),
            language: parent.language,
            provenance: Some(provenance),
            extra: serde_json::Map::new(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::validate_table;
    use crate::generate::{generate_batch, GenerationRequest};
    use crate::checker::FillingChecker;
    use crate::infill::TemplateProvider;
    use rand::SeedableRng;

    /// 3 rows x 3 cols with a rowspan-3 first column; contents "r{r}c{c}".
    fn tall_span_grid() -> TableGrid {
        let html = "<table>\
            <tr><td rowspan=\"3\">r0c0</td><td>r0c1</td><td>r0c2</td></tr>\
            <tr><td>r1c1</td><td>r1c2</td></tr>\
            <tr><td>r2c1</td><td>r2c2</td></tr></table>";
        html_to_grid(html).unwrap()
    }

    fn grid(html: &str) -> TableGrid {
        html_to_grid(html).unwrap()
    }

    fn apply_grid(g: &TableGrid, t: Transform) -> TableGrid {
        match apply_transform(g, &t).unwrap() {
            Applied::Grid(ng) => ng,
            Applied::Css { .. } => panic!("expected a grid"),
        }
    }

    #[test]
    fn copy_row_grows_straddling_span_and_duplicates_inner_cells() {
        let g = tall_span_grid();
        let copied = apply_grid(&g, Transform::Copy { axis: GridAxis::Row, start: 1, len: 1 });
        assert_eq!(copied.n_rows, 4);
        assert_eq!(copied.cell_at(0, 0).rowspan, 4, "span grew through the copy");
        assert_eq!(copied.cell_at(1, 1).content, "r1c1");
        assert_eq!(copied.cell_at(2, 1).content, "r1c1", "row 1 duplicated");
        assert_eq!(copied.cell_at(3, 1).content, "r2c1", "row 2 shifted down");
    }

    #[test]
    fn copy_block_of_two_rows() {
        let g = grid("<table><tr><td>a</td></tr><tr><td>b</td></tr><tr><td>c</td></tr></table>");
        let copied = apply_grid(&g, Transform::Copy { axis: GridAxis::Row, start: 0, len: 2 });
        let contents: Vec<&str> = (0..5).map(|r| copied.cell_at(r, 0).content.as_str()).collect();
        assert_eq!(contents, ["a", "b", "a", "b", "c"]);
    }

    #[test]
    fn copy_refuses_spans_overlapping_part_of_a_block() {
        // The rowspan-2 cell covers block row 1 but not block row 2, so its
        // duplicated stretch would detach from the original.
        let g = grid(
            "<table>\
             <tr><td rowspan=\"2\">tall</td><td>r0c1</td></tr>\
             <tr><td>r1c1</td></tr>\
             <tr><td>r2c0</td><td>r2c1</td></tr></table>",
        );
        match apply_transform(&g, &Transform::Copy { axis: GridAxis::Row, start: 1, len: 2 }) {
            Err(TransformError::CopyBreaksSpan { rect }) => assert_eq!(rect.rowspan, 2),
            other => panic!("expected CopyBreaksSpan, got {other:?}"),
        }
        // Covering the whole block is fine: the span grows by the length.
        let covered = apply_grid(&tall_span_grid(), Transform::Copy { axis: GridAxis::Row, start: 1, len: 2 });
        assert_eq!(covered.n_rows, 5);
        assert_eq!(covered.cell_at(0, 0).rowspan, 5);
        assert_eq!(covered.cell_at(3, 1).content, "r1c1", "copied band replays the block");
        // Copying the whole grid stacks a second full copy: the span is
        // fully inside the block, so it duplicates instead of growing.
        let whole = apply_grid(&tall_span_grid(), Transform::Copy { axis: GridAxis::Row, start: 0, len: 3 });
        assert_eq!(whole.n_rows, 6);
        assert_eq!(whole.cell_at(0, 0).rowspan, 3);
        assert_eq!(whole.cell_at(3, 0).content, "r0c0");
        assert_eq!(whole.cell_at(3, 0).rowspan, 3);
        assert_eq!(whole.cell_at(4, 1).content, "r1c1");
    }

    #[test]
    fn delete_refuses_spans_hanging_into_the_block() {
        let g = tall_span_grid();
        match apply_transform(&g, &Transform::Delete { axis: GridAxis::Row, start: 1, len: 1 }) {
            Err(TransformError::DeleteBreaksSpan { rect }) => {
                assert_eq!(rect, Rect { row_start: 0, col_start: 0, rowspan: 3, colspan: 1 });
            }
            other => panic!("expected DeleteBreaksSpan, got {other:?}"),
        }
    }

    #[test]
    fn delete_reanchors_spans_anchored_in_the_block() {
        let g = tall_span_grid();
        let deleted = apply_grid(&g, Transform::Delete { axis: GridAxis::Row, start: 0, len: 1 });
        assert_eq!(deleted.n_rows, 2);
        let kept = deleted.cell_at(0, 0);
        assert_eq!(kept.content, "r0c0", "span content survives");
        assert_eq!(kept.rowspan, 2, "span shrank by the deleted overlap");
        assert_eq!(deleted.cell_at(0, 1).content, "r1c1");
    }

    #[test]
    fn delete_guards_emptiness_and_bounds() {
        let g = grid("<table><tr><td>a</td></tr><tr><td>b</td></tr></table>");
        assert_eq!(
            apply_transform(&g, &Transform::Delete { axis: GridAxis::Row, start: 0, len: 2 }),
            Err(TransformError::WouldEmpty)
        );
        assert!(matches!(
            apply_transform(&g, &Transform::Delete { axis: GridAxis::Row, start: 1, len: 2 }),
            Err(TransformError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn single_swap_is_strict_about_spans() {
        let g = tall_span_grid();
        match apply_transform(&g, &Transform::Swap { axis: GridAxis::Row, a: 1, b: 2, len: 1 }) {
            Err(TransformError::SwapIntersectsSpan { rect }) => assert_eq!(rect.rowspan, 3),
            other => panic!("expected SwapIntersectsSpan, got {other:?}"),
        }
        // Columns 1 and 2 are span-free, so the column swap is fine.
        let swapped = apply_grid(&g, Transform::Swap { axis: GridAxis::Column, a: 1, b: 2, len: 1 });
        assert_eq!(swapped.cell_at(0, 1).content, "r0c2");
        assert_eq!(swapped.cell_at(0, 2).content, "r0c1");
        assert_eq!(swapped.cell_at(0, 0).content, "r0c0", "untouched column");
    }

    #[test]
    fn single_swap_exchanges_headers_too() {
        let g = grid("<table><tr><th>h1</th><th>h2</th></tr><tr><td>a</td><td>b</td></tr></table>");
        let swapped = apply_grid(&g, Transform::Swap { axis: GridAxis::Row, a: 0, b: 1, len: 1 });
        assert!(!swapped.cell_at(0, 0).is_header);
        assert!(swapped.cell_at(1, 0).is_header);
        assert_eq!(swapped.cell_at(0, 0).content, "a");
        assert_eq!(swapped.cell_at(1, 1).content, "h2");
    }

    #[test]
    fn block_swap_carries_merged_cells_and_rejects_straddlers() {
        // Rows 0..2 hold a rowspan-2 cell; rows 2..4 are plain.
        let g = grid(
            "<table>\
             <tr><td rowspan=\"2\">block-a</td><td>a0</td></tr>\
             <tr><td>a1</td></tr>\
             <tr><td>b0</td><td>b1</td></tr>\
             <tr><td>c0</td><td>c1</td></tr></table>",
        );
        let swapped = apply_grid(&g, Transform::Swap { axis: GridAxis::Row, a: 0, b: 2, len: 2 });
        assert_eq!(swapped.cell_at(0, 0).content, "b0");
        assert_eq!(swapped.cell_at(2, 0).content, "block-a");
        assert_eq!(swapped.cell_at(2, 0).rowspan, 2);

        // A block boundary through the merged cell is refused.
        match apply_transform(&g, &Transform::Swap { axis: GridAxis::Row, a: 1, b: 2, len: 2 }) {
            Err(TransformError::SwapIntersectsSpan { .. } | TransformError::BadOperand { .. }) => {}
            other => panic!("expected a refusal, got {other:?}"),
        }
    }

    #[test]
    fn column_ops_run_through_transposition() {
        let g = grid("<table><tr><td colspan=\"2\">wide</td><td>x</td></tr><tr><td>a</td><td>b</td><td>c</td></tr></table>");
        let copied = apply_grid(&g, Transform::Copy { axis: GridAxis::Column, start: 0, len: 1 });
        assert_eq!(copied.n_cols, 4);
        assert_eq!(copied.cell_at(0, 0).colspan, 3, "colspan grew through the copy");
        assert_eq!(copied.cell_at(1, 0).content, "a");
        assert_eq!(copied.cell_at(1, 1).content, "a");

        match apply_transform(&g, &Transform::Delete { axis: GridAxis::Column, start: 1, len: 1 }) {
            Err(TransformError::DeleteBreaksSpan { rect }) => assert_eq!(rect.colspan, 2),
            other => panic!("expected DeleteBreaksSpan, got {other:?}"),
        }
    }

    #[test]
    fn alter_injects_css_only() {
        let g = tall_span_grid();
        match apply_transform(&g, &Transform::Alter { row: 2, color: "#fff2cc".to_string() }).unwrap() {
            Applied::Css { rule } => assert_eq!(rule, "tr:nth-child(3) td { background-color: #fff2cc; }\n"),
            other => panic!("expected css, got {other:?}"),
        }
        assert!(matches!(
            apply_transform(&g, &Transform::Alter { row: 9, color: "#fff".to_string() }),
            Err(TransformError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn span_regions_report_crossed_boundaries() {
        let regions = span_regions(&tall_span_grid());
        assert_eq!(regions.row_boundary_crossed, vec![false, true, true, false]);
        assert_eq!(regions.col_boundary_crossed, vec![false, false, false, false]);
        assert_eq!(regions.merged.len(), 1);
    }

    fn template_parent(seed: u64) -> AnnotationRecord {
        let req = GenerationRequest { count: 1, seed, ..GenerationRequest::default() };
        generate_batch(&req, &TemplateProvider, &FillingChecker::default()).unwrap().0.remove(0)
    }

    #[test]
    fn fanout_produces_nine_labeled_variants() {
        let parent = template_parent(21);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let variants = variant_fanout(&parent, "telecom", &TemplateProvider, &mut rng).unwrap();
        assert_eq!(variants.len(), 9);
        for (i, v) in variants.iter().enumerate() {
            assert_eq!(v.id, format!("{}-v{}", parent.id, i + 1));
            assert!(validate_table(&v.html).is_empty(), "variant {i} invalid");
            assert_eq!(v.topic, parent.topic);
            let prov = v.provenance.as_ref().unwrap();
            assert_eq!(prov["parent_id"], serde_json::Value::String(parent.id.clone()));
            if i < 5 {
                assert!(prov["transform"].is_null());
                assert_eq!(v.structure_tokens, parent.structure_tokens, "untransformed variant {i}");
            } else {
                assert!(prov["transform"].is_object());
            }
        }
        // Fresh fills differ between variants.
        assert_ne!(variants[0].html, variants[1].html);
    }

    #[test]
    fn fanout_degrades_to_recolor_when_swap_is_impossible() {
        // A table whose every row and column pair intersects a span: one
        // giant merged cell next to a single plain column.
        let html = "<html><head><meta charset=\"utf-8\"><style>\nx\n</style></head><body>\n<table>\n<tr><td rowspan=\"2\">big</td><td>a</td></tr>\n<tr><td>b</td></tr>\n</table>\n</body></html>\n";
        let g = html_to_grid(html).unwrap();
        let parent = AnnotationRecord {
            id: "t0".to_string(),
            html: html.to_string(),
            structure_tokens: structure_tokens(&g),
            cells: g.cells.clone(),
            labels: Labels {
                is_simple: false,
                is_colored: false,
                is_lined: true,
                line_style: crate::model::LineStyle::FullyLined,
                header_layout: crate::model::HeaderLayout::Vertical,
            },
            topic: "5G plan pricing".to_string(),
            language: crate::model::Language::En,
            provenance: None,
            extra: serde_json::Map::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let variants = variant_fanout(&parent, "telecom", &TemplateProvider, &mut rng).unwrap();
        // Slot 2 (variant 8) wanted a swap; both rows and both columns touch
        // the merged cell, so it must have degraded to a recolor.
        let swap_slot = &variants[7];
        let op = swap_slot.provenance.as_ref().unwrap()["transform"]["op"].as_str().unwrap().to_string();
        assert_eq!(op, "alter");
        assert!(swap_slot.labels.is_colored, "recolor marks the variant as colored");
    }

    #[test]
    fn transform_json_round_trips() {
        let t = Transform::Swap { axis: GridAxis::Column, a: 0, b: 3, len: 2 };
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["op"], "swap");
        assert_eq!(serde_json::from_value::<Transform>(v).unwrap(), t);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(200))]

        /// Any transform either refuses with a typed error or yields a grid
        /// that still tiles exactly (`from_cells` inside `rebuild` would
        /// panic otherwise) with the expected dimensions.
        #[test]
        fn transforms_preserve_tiling(seed in 0u64..1000, op in 0usize..4, raw_a in 0usize..16, raw_b in 0usize..16, raw_len in 1usize..3, axis_row in proptest::bool::ANY) {
            use crate::generate::{sample_schema, GenerationRequest};
            use crate::model::grid_from_schema;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let req = GenerationRequest { row_range: (2, 6), col_range: (2, 6), ..GenerationRequest::default() };
            let schema = sample_schema(&mut rng, &req, true, StyleSpec::plain());
            let grid = grid_from_schema(&schema).unwrap();
            let axis = if axis_row { GridAxis::Row } else { GridAxis::Column };
            let extent = if axis_row { grid.n_rows } else { grid.n_cols };
            let a = raw_a % extent;
            let b = raw_b % extent;
            let transform = match op {
                0 => Transform::Copy { axis, start: a, len: raw_len },
                1 => Transform::Delete { axis, start: a, len: raw_len },
                2 => Transform::Swap { axis, a, b, len: raw_len },
                _ => Transform::Alter { row: a % grid.n_rows, color: "#fff2cc".to_string() },
            };
            match apply_transform(&grid, &transform) {
                Ok(Applied::Grid(g)) => {
                    let (dr, dc) = match transform {
                        Transform::Copy { axis: GridAxis::Row, len, .. } => (len as isize, 0),
                        Transform::Copy { axis: GridAxis::Column, len, .. } => (0, len as isize),
                        Transform::Delete { axis: GridAxis::Row, len, .. } => (-(len as isize), 0),
                        Transform::Delete { axis: GridAxis::Column, len, .. } => (0, -(len as isize)),
                        _ => (0, 0),
                    };
                    proptest::prop_assert_eq!(g.n_rows as isize, grid.n_rows as isize + dr);
                    proptest::prop_assert_eq!(g.n_cols as isize, grid.n_cols as isize + dc);
                }
                Ok(Applied::Css { .. }) => {}
                Err(_) => {}
            }
        }
    }
}
