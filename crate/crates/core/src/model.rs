//! Core table model shared by the generator, checker, augmentor, and metrics:
//! span-matrix schemas, resolved cell grids, style descriptors, and the
//! annotation records the toolkit exchanges on disk.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Where the header band sits. `Vertical` tables carry a top header row band,
/// `Horizontal` tables a left header column band, `Matrix` tables both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderLayout {
    Vertical,
    Horizontal,
    Matrix,
}

impl HeaderLayout {
    pub const ALL: [HeaderLayout; 3] = [
        HeaderLayout::Vertical,
        HeaderLayout::Horizontal,
        HeaderLayout::Matrix,
    ];
}

/// Border treatment of the rendered table. `HorizontallyLineless` tables miss
/// their horizontal cell borders (only vertical rules remain), and vice versa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineStyle {
    FullyLined,
    HorizontallyLineless,
    VerticallyLineless,
    LinedHeadersOnly,
    Lineless,
}

impl LineStyle {
    pub const ALL: [LineStyle; 5] = [
        LineStyle::FullyLined,
        LineStyle::HorizontallyLineless,
        LineStyle::VerticallyLineless,
        LineStyle::LinedHeadersOnly,
        LineStyle::Lineless,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Zh,
    En,
}

/// Background colors applied by the emitted stylesheet: header cells, body
/// cells, and the alternate stripe used when zebra striping is on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundPalette {
    pub header: String,
    pub body: String,
    pub alt: String,
}

/// Visual treatment of an emitted table. Color fields hold CSS color strings;
/// `None` means the browser default (black text, transparent background).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSpec {
    pub line_style: LineStyle,
    /// Border width in px; meaningful only for line styles that draw borders.
    pub border_thickness: u8,
    pub font_color: Option<String>,
    pub border_color: Option<String>,
    pub background_palette: Option<BackgroundPalette>,
    /// Alternate-row striping; requires a background palette for the stripe color.
    pub zebra: bool,
}

impl StyleSpec {
    /// Black-on-white, fully lined, 1px borders.
    pub fn plain() -> Self {
        StyleSpec {
            line_style: LineStyle::FullyLined,
            border_thickness: 1,
            font_color: None,
            border_color: None,
            background_palette: None,
            zebra: false,
        }
    }

    /// True iff any non-default background, border, or font color is set.
    pub fn is_colored(&self) -> bool {
        self.font_color.is_some() || self.border_color.is_some() || self.background_palette.is_some()
    }

    /// True iff every cell border is drawn.
    pub fn is_lined(&self) -> bool {
        self.line_style == LineStyle::FullyLined
    }
}

/// Structure blueprint: per-position span matrices over an `n_rows` x `n_cols`
/// rectangle. An anchor position holds the rows/cols its cell covers; positions
/// absorbed by another anchor's span hold 0 in both matrices. Expanding every
/// anchor by its spans must tile the rectangle exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_span_matrix: Vec<Vec<usize>>,
    pub col_span_matrix: Vec<Vec<usize>>,
    pub header_layout: HeaderLayout,
    pub style: StyleSpec,
}

impl TableSchema {
    /// All-unit-span schema (no merged cells).
    pub fn unit(n_rows: usize, n_cols: usize, header_layout: HeaderLayout, style: StyleSpec) -> Self {
        TableSchema {
            n_rows,
            n_cols,
            row_span_matrix: vec![vec![1; n_cols]; n_rows],
            col_span_matrix: vec![vec![1; n_cols]; n_rows],
            header_layout,
            style,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("table dimensions must be positive")]
    ZeroDimension,
    #[error("span matrix row {row} does not match the declared dimensions")]
    MatrixShape { row: usize },
    #[error("inconsistent anchor at row {row}, col {col}: zero span at an uncovered position")]
    InconsistentAnchor { row: usize, col: usize },
    #[error("anchor at row {row}, col {col} overlaps a previously expanded span")]
    Overlap { row: usize, col: usize },
    #[error("span anchored at row {row}, col {col} extends outside the table")]
    SpanOutOfBounds { row: usize, col: usize },
    #[error("no anchor covers row {row}, col {col}")]
    Hole { row: usize, col: usize },
}

/// One logical cell of a resolved grid. `row_start`/`col_start` locate the
/// anchor (top-left) position; spans count covered rows/cols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub content: String,
    pub row_start: usize,
    pub col_start: usize,
    pub rowspan: usize,
    pub colspan: usize,
    pub is_header: bool,
}

impl Cell {
    pub fn covers(&self, row: usize, col: usize) -> bool {
        row >= self.row_start
            && row < self.row_start + self.rowspan
            && col >= self.col_start
            && col < self.col_start + self.colspan
    }

    pub fn is_spanning(&self) -> bool {
        self.rowspan > 1 || self.colspan > 1
    }
}

/// Resolved table: cells in document order (row-major by anchor) plus an
/// occupancy matrix mapping every grid position to the index of the covering
/// cell. Invariant: cells tile the rectangle exactly once, so every row's
/// logical width equals `n_cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGrid {
    pub n_rows: usize,
    pub n_cols: usize,
    pub cells: Vec<Cell>,
    pub occupancy: Vec<Vec<usize>>,
}

impl TableGrid {
    /// Empty grid, the parse result of `<table></table>`. Fails every
    /// non-trivial invariant consumer; the validator flags it as EmptyStructure.
    pub fn empty() -> Self {
        TableGrid { n_rows: 0, n_cols: 0, cells: Vec::new(), occupancy: Vec::new() }
    }

    /// Builds the occupancy matrix and checks the exact-tiling invariant.
    /// Cells are reordered into document order (row-major by anchor).
    pub fn from_cells(n_rows: usize, n_cols: usize, mut cells: Vec<Cell>) -> Result<Self, SchemaError> {
        if n_rows == 0 && n_cols == 0 && cells.is_empty() {
            return Ok(TableGrid::empty());
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(SchemaError::ZeroDimension);
        }
        cells.sort_by_key(|c| (c.row_start, c.col_start));
        let mut occupancy = vec![vec![usize::MAX; n_cols]; n_rows];
        for (idx, cell) in cells.iter().enumerate() {
            if cell.rowspan == 0 || cell.colspan == 0 {
                return Err(SchemaError::InconsistentAnchor { row: cell.row_start, col: cell.col_start });
            }
            if cell.row_start + cell.rowspan > n_rows || cell.col_start + cell.colspan > n_cols {
                return Err(SchemaError::SpanOutOfBounds { row: cell.row_start, col: cell.col_start });
            }
            for r in cell.row_start..cell.row_start + cell.rowspan {
                for c in cell.col_start..cell.col_start + cell.colspan {
                    if occupancy[r][c] != usize::MAX {
                        return Err(SchemaError::Overlap { row: cell.row_start, col: cell.col_start });
                    }
                    occupancy[r][c] = idx;
                }
            }
        }
        for r in 0..n_rows {
            for c in 0..n_cols {
                if occupancy[r][c] == usize::MAX {
                    return Err(SchemaError::Hole { row: r, col: c });
                }
            }
        }
        Ok(TableGrid { n_rows, n_cols, cells, occupancy })
    }

    pub fn cell_at(&self, row: usize, col: usize) -> &Cell {
        &self.cells[self.occupancy[row][col]]
    }

    /// True iff no cell spans more than one row or column.
    pub fn is_simple(&self) -> bool {
        self.cells.iter().all(|c| !c.is_spanning())
    }

    /// Cell indices anchored in document row `r`, in column order.
    pub fn row_anchors(&self, r: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.cells.len()).filter(|&i| self.cells[i].row_start == r).collect();
        out.sort_by_key(|&i| self.cells[i].col_start);
        out
    }

    /// Sum of colspans anchored in each document row: the widths the rows
    /// would claim on their own, before rowspan carry-over.
    pub fn anchored_row_widths(&self) -> Vec<usize> {
        let mut widths = vec![0usize; self.n_rows];
        for cell in &self.cells {
            widths[cell.row_start] += cell.colspan;
        }
        widths
    }
}

/// Expands a span-matrix schema into a resolved grid, assigning header cells
/// per the schema's header layout. Scans row-major, so errors identify the
/// first conflicting anchor.
pub fn grid_from_schema(schema: &TableSchema) -> Result<TableGrid, SchemaError> {
    let (nr, nc) = (schema.n_rows, schema.n_cols);
    if nr == 0 || nc == 0 {
        return Err(SchemaError::ZeroDimension);
    }
    if schema.row_span_matrix.len() != nr || schema.col_span_matrix.len() != nr {
        return Err(SchemaError::MatrixShape { row: schema.row_span_matrix.len().min(schema.col_span_matrix.len()) });
    }
    for r in 0..nr {
        if schema.row_span_matrix[r].len() != nc || schema.col_span_matrix[r].len() != nc {
            return Err(SchemaError::MatrixShape { row: r });
        }
    }

    let mut occupancy = vec![vec![usize::MAX; nc]; nr];
    let mut cells = Vec::new();
    for r in 0..nr {
        for c in 0..nc {
            let rs = schema.row_span_matrix[r][c];
            let cs = schema.col_span_matrix[r][c];
            if occupancy[r][c] != usize::MAX {
                if rs != 0 || cs != 0 {
                    return Err(SchemaError::Overlap { row: r, col: c });
                }
                continue;
            }
            if rs == 0 || cs == 0 {
                return Err(SchemaError::InconsistentAnchor { row: r, col: c });
            }
            if r + rs > nr || c + cs > nc {
                return Err(SchemaError::SpanOutOfBounds { row: r, col: c });
            }
            let idx = cells.len();
            for rr in r..r + rs {
                for cc in c..c + cs {
                    if occupancy[rr][cc] != usize::MAX {
                        return Err(SchemaError::Overlap { row: r, col: c });
                    }
                    occupancy[rr][cc] = idx;
                }
            }
            let is_header = match schema.header_layout {
                HeaderLayout::Vertical => r == 0,
                HeaderLayout::Horizontal => c == 0,
                HeaderLayout::Matrix => r == 0 || c == 0,
            };
            cells.push(Cell {
                content: String::new(),
                row_start: r,
                col_start: c,
                rowspan: rs,
                colspan: cs,
                is_header,
            });
        }
    }
    Ok(TableGrid { n_rows: nr, n_cols: nc, cells, occupancy })
}

/// Machine-checkable labels attached to every annotation record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub is_simple: bool,
    pub is_colored: bool,
    pub is_lined: bool,
    pub line_style: LineStyle,
    pub header_layout: HeaderLayout,
}

/// Derives labels from a resolved grid plus the style it was emitted with.
/// Header layout is read off the header bands: a band counts only when every
/// cell touching it is a header and at least one header exists. Tables whose
/// top and left bands are both all-header derive `Matrix`; headerless tables
/// default to `Vertical`.
pub fn derive_labels(grid: &TableGrid, style: &StyleSpec) -> Labels {
    let any_header = grid.cells.iter().any(|c| c.is_header);
    let top = any_header
        && grid.n_rows > 0
        && grid.cells.iter().filter(|c| c.row_start == 0).all(|c| c.is_header);
    let left = any_header
        && grid.n_cols > 0
        && grid.cells.iter().filter(|c| c.col_start == 0).all(|c| c.is_header);
    let header_layout = match (top, left) {
        (true, true) => HeaderLayout::Matrix,
        (false, true) => HeaderLayout::Horizontal,
        _ => HeaderLayout::Vertical,
    };
    Labels {
        is_simple: grid.is_simple(),
        is_colored: style.is_colored(),
        is_lined: style.is_lined(),
        line_style: style.line_style,
        header_layout,
    }
}

/// One dataset record: the emitted document, its token-level structure, the
/// logical cells, labels, and generation metadata. Unknown JSON fields are
/// preserved across load/store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    pub html: String,
    pub structure_tokens: Vec<String>,
    pub cells: Vec<Cell>,
    pub labels: Labels,
    pub topic: String,
    pub language: Language,
    /// Present on augmentor outputs: `{parent_id, transform}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}
