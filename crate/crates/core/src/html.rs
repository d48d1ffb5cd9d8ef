//! Single-table HTML emission and strict parsing.
//!
//! Emission produces a standalone document: a fixed skeleton, a style block
//! derived from [`StyleSpec`], and the table markup. Parsing goes the other
//! way and is deliberately strict: the first `<table>` subtree is tokenized
//! against a tag whitelist and resolved into a [`TableGrid`]; malformed
//! structure is reported, never silently repaired the way browsers do.

use crate::model::{Cell, LineStyle, StyleSpec, TableGrid};
use std::ops::Range;
use thiserror::Error;

/// Tags accepted inside the table subtree. Anything else is a defect.
pub const TAG_WHITELIST: [&str; 6] = ["table", "thead", "tbody", "tr", "th", "td"];

/// Spans above this are rejected before any grid allocation happens.
const SPAN_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no <table> element found")]
    MissingTable,
    /// Covers tags outside the whitelist and tag misuse (mismatched or
    /// unclosed tags, nested tables, text outside cells).
    #[error("disallowed tag at byte {at}: {detail}")]
    DisallowedTag { detail: String, at: usize },
    #[error("ragged rows: per-row logical widths {widths:?}")]
    RaggedRows { widths: Vec<usize> },
    #[error("overlapping spans at row {row}, col {col}")]
    OverlappingSpans { row: usize, col: usize },
    #[error("span out of bounds at row {row}, col {col}: {detail}")]
    SpanOutOfBounds { row: usize, col: usize, detail: String },
}

/// Parse result: the resolved grid plus the byte geometry needed to edit the
/// document in place (content splicing, table replacement) without touching
/// anything outside the table subtree.
#[derive(Debug, Clone)]
pub struct ParsedTable {
    pub grid: TableGrid,
    /// Byte range of the whole `<table>...</table>` element.
    pub table_range: Range<usize>,
    /// Byte range of each cell's raw content, aligned with `grid.cells`.
    pub content_ranges: Vec<Range<usize>>,
}

struct RawTag {
    name: String,
    closing: bool,
    self_closing: bool,
    attrs: Vec<(String, String)>,
    end: usize,
}

fn misuse(detail: impl Into<String>, at: usize) -> ParseError {
    ParseError::DisallowedTag { detail: detail.into(), at }
}

/// Lexes one tag starting at the `<` at `start`.
fn parse_tag(html: &str, start: usize) -> Result<RawTag, ParseError> {
    let b = html.as_bytes();
    let mut i = start + 1;
    let closing = i < b.len() && b[i] == b'/';
    if closing {
        i += 1;
    }
    let name_start = i;
    while i < b.len() && (b[i].is_ascii_alphanumeric()) {
        i += 1;
    }
    if i == name_start {
        return Err(misuse("malformed tag", start));
    }
    let name = html[name_start..i].to_ascii_lowercase();
    let mut attrs = Vec::new();
    let mut self_closing = false;
    loop {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        match b.get(i) {
            None => return Err(misuse("unterminated tag", start)),
            Some(b'>') => {
                i += 1;
                break;
            }
            Some(b'/') => {
                if b.get(i + 1) == Some(&b'>') {
                    self_closing = true;
                    i += 2;
                    break;
                }
                return Err(misuse("malformed tag", start));
            }
            Some(b'<') => return Err(misuse("unterminated tag", start)),
            Some(_) => {
                let attr_start = i;
                while i < b.len() && !b[i].is_ascii_whitespace() && !matches!(b[i], b'=' | b'>' | b'/') {
                    i += 1;
                }
                let attr_name = html[attr_start..i].to_ascii_lowercase();
                while i < b.len() && b[i].is_ascii_whitespace() {
                    i += 1;
                }
                let mut value = String::new();
                if b.get(i) == Some(&b'=') {
                    i += 1;
                    while i < b.len() && b[i].is_ascii_whitespace() {
                        i += 1;
                    }
                    match b.get(i) {
                        Some(&q) if q == b'"' || q == b'\'' => {
                            i += 1;
                            let v_start = i;
                            while i < b.len() && b[i] != q {
                                i += 1;
                            }
                            if i >= b.len() {
                                return Err(misuse("unterminated attribute value", start));
                            }
                            value = html[v_start..i].to_string();
                            i += 1;
                        }
                        _ => {
                            let v_start = i;
                            while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'>' {
                                i += 1;
                            }
                            value = html[v_start..i].to_string();
                        }
                    }
                }
                attrs.push((attr_name, value));
            }
        }
    }
    Ok(RawTag { name, closing, self_closing, attrs, end: i })
}

/// Finds the byte offset of the first top-level `<table` tag, skipping
/// comments and the contents of `<style>`/`<script>` elements.
fn find_table_start(html: &str) -> Option<usize> {
    let b = html.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] != b'<' {
            i += 1;
            continue;
        }
        if html[i..].starts_with("<!--") {
            i = html[i..].find("-->").map(|p| i + p + 3)?;
            continue;
        }
        let Ok(tag) = parse_tag(html, i) else {
            i += 1;
            continue;
        };
        if !tag.closing && tag.name == "table" {
            return Some(i);
        }
        if !tag.closing && (tag.name == "style" || tag.name == "script") {
            let close = format!("</{}", tag.name);
            match html[tag.end..].to_ascii_lowercase().find(&close) {
                Some(p) => i = tag.end + p,
                None => return None,
            }
            continue;
        }
        i = tag.end;
    }
    None
}

struct RawCell {
    is_header: bool,
    rowspan: usize,
    colspan: usize,
    content_range: Range<usize>,
}

/// Reads a rowspan/colspan attribute as a positive decimal integer.
fn span_attr(
    attrs: &[(String, String)],
    name: &str,
    row: usize,
    col: usize,
) -> Result<usize, ParseError> {
    for (k, v) in attrs {
        if k == name {
            let parsed = v.trim().parse::<usize>().ok().filter(|&n| n >= 1);
            return match parsed {
                Some(n) if n <= SPAN_CAP => Ok(n),
                Some(n) => Err(ParseError::SpanOutOfBounds {
                    row,
                    col,
                    detail: format!("{name} value {n} exceeds the supported bound of {SPAN_CAP}"),
                }),
                None => Err(ParseError::SpanOutOfBounds {
                    row,
                    col,
                    detail: format!("{name} attribute {v:?} is not a positive integer"),
                }),
            };
        }
    }
    Ok(1)
}

/// Parses the first table of `html` into a grid with byte geometry.
pub fn parse_document(html: &str) -> Result<ParsedTable, ParseError> {
    let table_start = find_table_start(html).ok_or(ParseError::MissingTable)?;
    let open = parse_tag(html, table_start).expect("find_table_start returned a lexable tag");

    let mut rows: Vec<Vec<RawCell>> = Vec::new();
    let mut wrapper: Option<String> = None;
    let mut current_row: Option<Vec<RawCell>> = None;
    // (tag name, content start, is_header, rowspan, colspan)
    let mut current_cell: Option<(String, usize, bool, usize, usize)> = None;
    let mut pos = open.end;
    let table_end;

    loop {
        let rel = html[pos..].find('<');
        let Some(rel) = rel else {
            return Err(misuse("unexpected end of input inside <table>", pos));
        };
        let lt = pos + rel;
        if current_cell.is_none() {
            let text = &html[pos..lt];
            if !text.chars().all(char::is_whitespace) {
                return Err(misuse("text content outside cells", pos));
            }
        }
        if html[lt..].starts_with("<!--") {
            if current_cell.is_some() {
                return Err(misuse("comment inside a cell", lt));
            }
            match html[lt..].find("-->") {
                Some(p) => {
                    pos = lt + p + 3;
                    continue;
                }
                None => return Err(misuse("unterminated comment", lt)),
            }
        }
        let tag = parse_tag(html, lt)?;
        if !TAG_WHITELIST.contains(&tag.name.as_str()) {
            return Err(ParseError::DisallowedTag { detail: format!("<{}>", tag.name), at: lt });
        }
        match (tag.name.as_str(), tag.closing) {
            (_, _) if current_cell.is_some() => {
                let (cell_tag, content_start, is_header, rowspan, colspan) =
                    current_cell.clone().expect("checked above");
                if tag.closing && tag.name == cell_tag {
                    current_cell = None;
                    current_row.as_mut().expect("cell implies row").push(RawCell {
                        is_header,
                        rowspan,
                        colspan,
                        content_range: content_start..lt,
                    });
                } else {
                    return Err(misuse(
                        format!("<{}{}> before closing <{}>", if tag.closing { "/" } else { "" }, tag.name, cell_tag),
                        lt,
                    ));
                }
            }
            ("table", false) => return Err(misuse("nested <table>", lt)),
            ("table", true) => {
                if current_row.is_some() {
                    return Err(misuse("</table> before closing <tr>", lt));
                }
                if let Some(w) = wrapper {
                    return Err(misuse(format!("</table> before closing <{w}>"), lt));
                }
                table_end = tag.end;
                break;
            }
            ("thead" | "tbody", false) => {
                if current_row.is_some() {
                    return Err(misuse(format!("<{}> inside <tr>", tag.name), lt));
                }
                if let Some(w) = &wrapper {
                    return Err(misuse(format!("<{}> inside <{w}>", tag.name), lt));
                }
                wrapper = Some(tag.name.clone());
            }
            ("thead" | "tbody", true) => {
                if current_row.is_some() {
                    return Err(misuse(format!("</{}> before closing <tr>", tag.name), lt));
                }
                if wrapper.as_deref() != Some(tag.name.as_str()) {
                    return Err(misuse(format!("</{}> without matching open tag", tag.name), lt));
                }
                wrapper = None;
            }
            ("tr", false) => {
                if current_row.is_some() {
                    return Err(misuse("<tr> before closing <tr>", lt));
                }
                current_row = Some(Vec::new());
            }
            ("tr", true) => match current_row.take() {
                Some(row) => rows.push(row),
                None => return Err(misuse("</tr> without open <tr>", lt)),
            },
            ("td" | "th", false) => {
                let Some(row) = &current_row else {
                    return Err(misuse(format!("<{}> outside <tr>", tag.name), lt));
                };
                let (r, c) = (rows.len(), row.len());
                let rowspan = span_attr(&tag.attrs, "rowspan", r, c)?;
                let colspan = span_attr(&tag.attrs, "colspan", r, c)?;
                let is_header = tag.name == "th";
                if tag.self_closing {
                    current_row.as_mut().expect("checked above").push(RawCell {
                        is_header,
                        rowspan,
                        colspan,
                        content_range: tag.end..tag.end,
                    });
                } else {
                    current_cell = Some((tag.name.clone(), tag.end, is_header, rowspan, colspan));
                }
            }
            ("td" | "th", true) => {
                return Err(misuse(format!("</{}> without open cell", tag.name), lt));
            }
            _ => unreachable!("whitelist covers all names"),
        }
        pos = tag.end;
    }

    let (grid, content_ranges) = place_grid(rows, html)?;
    Ok(ParsedTable { grid, table_range: table_start..table_end, content_ranges })
}

/// Resolves raw rows into a grid with the standard next-free-column placement:
/// each cell lands at the first unoccupied column of its row, then claims its
/// span rectangle. Collisions with reserved positions are real defects here,
/// not render-time quirks.
fn place_grid(rows: Vec<Vec<RawCell>>, html: &str) -> Result<(TableGrid, Vec<Range<usize>>), ParseError> {
    let n_rows = rows.len();
    let mut occ: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
    let mut cells: Vec<Cell> = Vec::new();
    let mut ranges: Vec<Range<usize>> = Vec::new();

    fn occupied(row: &[usize], col: usize) -> bool {
        row.get(col).is_some_and(|&v| v != usize::MAX)
    }
    fn claim(row: &mut Vec<usize>, col: usize, idx: usize) {
        if row.len() <= col {
            row.resize(col + 1, usize::MAX);
        }
        row[col] = idx;
    }

    for (r, row) in rows.iter().enumerate() {
        let mut cursor = 0usize;
        for raw in row {
            while occupied(&occ[r], cursor) {
                cursor += 1;
            }
            if r + raw.rowspan > n_rows {
                return Err(ParseError::SpanOutOfBounds {
                    row: r,
                    col: cursor,
                    detail: format!("rowspan {} extends past the last row", raw.rowspan),
                });
            }
            let idx = cells.len();
            for rr in r..r + raw.rowspan {
                for cc in cursor..cursor + raw.colspan {
                    if occupied(&occ[rr], cc) {
                        return Err(ParseError::OverlappingSpans { row: rr, col: cc });
                    }
                    claim(&mut occ[rr], cc, idx);
                }
            }
            cells.push(Cell {
                content: normalize_text(&html[raw.content_range.clone()]),
                row_start: r,
                col_start: cursor,
                rowspan: raw.rowspan,
                colspan: raw.colspan,
                is_header: raw.is_header,
            });
            ranges.push(raw.content_range.clone());
            cursor += raw.colspan;
        }
    }

    if cells.is_empty() {
        return Ok((TableGrid::empty(), Vec::new()));
    }
    let n_cols = occ.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = occ.iter().map(|row| row.iter().filter(|&&v| v != usize::MAX).count()).collect();
    if widths.iter().any(|&w| w != n_cols) {
        return Err(ParseError::RaggedRows { widths });
    }
    for row in &mut occ {
        row.resize(n_cols, usize::MAX); // unreachable padding; widths checked above
    }
    Ok((TableGrid { n_rows, n_cols, cells, occupancy: occ }, ranges))
}

/// Parses the first table of an HTML document into a resolved grid.
pub fn html_to_grid(html: &str) -> Result<TableGrid, ParseError> {
    parse_document(html).map(|p| p.grid)
}

/// Decodes the five XML-predefined entities and collapses whitespace runs to
/// single spaces, trimming the ends. No other entities are decoded.
pub fn normalize_text(raw: &str) -> String {
    let mut decoded = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(p) = rest.find('&') {
        decoded.push_str(&rest[..p]);
        rest = &rest[p..];
        let mut matched = false;
        for (entity, ch) in [("&amp;", '&'), ("&lt;", '<'), ("&gt;", '>'), ("&quot;", '"'), ("&apos;", '\'')] {
            if rest.starts_with(entity) {
                decoded.push(ch);
                rest = &rest[entity.len()..];
                matched = true;
                break;
            }
        }
        if !matched {
            decoded.push('&');
            rest = &rest[1..];
        }
    }
    decoded.push_str(rest);

    let mut out = String::with_capacity(decoded.len());
    let mut pending_space = false;
    for ch in decoded.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    out
}

/// Escapes text for use inside a cell.
pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Stylesheet for the emitted document. Every rule is derived from the
/// StyleSpec so identical specs emit byte-identical CSS.
pub fn css_from_style(style: &StyleSpec) -> String {
    let mut css = String::new();
    css.push_str("table { border-collapse: collapse; font-family: Arial, Helvetica, sans-serif; }\n");
    css.push_str("th, td { padding: 4px 10px; }\n");
    let color = style.border_color.as_deref().unwrap_or("#000000");
    let edge = format!("{}px solid {}", style.border_thickness, color);
    match style.line_style {
        LineStyle::FullyLined => {
            css.push_str(&format!("th, td {{ border: {edge}; }}\n"));
        }
        LineStyle::HorizontallyLineless => {
            css.push_str(&format!("th, td {{ border-left: {edge}; border-right: {edge}; }}\n"));
        }
        LineStyle::VerticallyLineless => {
            css.push_str(&format!("th, td {{ border-top: {edge}; border-bottom: {edge}; }}\n"));
        }
        LineStyle::LinedHeadersOnly => {
            css.push_str(&format!("th {{ border: {edge}; }}\n"));
        }
        LineStyle::Lineless => {}
    }
    if let Some(palette) = &style.background_palette {
        css.push_str(&format!("th {{ background-color: {}; }}\n", palette.header));
        css.push_str(&format!("td {{ background-color: {}; }}\n", palette.body));
        if style.zebra {
            css.push_str(&format!("tr:nth-child(even) td {{ background-color: {}; }}\n", palette.alt));
        }
    }
    if let Some(font) = &style.font_color {
        css.push_str(&format!("table {{ color: {font}; }}\n"));
    }
    css
}

/// Table markup alone: one `<tr>` per line, cells in document order.
pub fn table_markup(grid: &TableGrid) -> String {
    let mut out = String::from("<table>\n");
    for r in 0..grid.n_rows {
        out.push_str("<tr>");
        for idx in grid.row_anchors(r) {
            let cell = &grid.cells[idx];
            let tag = if cell.is_header { "th" } else { "td" };
            out.push('<');
            out.push_str(tag);
            if cell.rowspan > 1 {
                out.push_str(&format!(" rowspan=\"{}\"", cell.rowspan));
            }
            if cell.colspan > 1 {
                out.push_str(&format!(" colspan=\"{}\"", cell.colspan));
            }
            out.push('>');
            out.push_str(&escape_text(&cell.content));
            out.push_str(&format!("</{tag}>"));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>");
    out
}

/// Tag-token sequence mirroring [`table_markup`] without text content.
/// Joining the tokens yields a parseable table whose grid matches the source
/// grid structurally.
pub fn structure_tokens(grid: &TableGrid) -> Vec<String> {
    let mut tokens = vec!["<table>".to_string()];
    for r in 0..grid.n_rows {
        tokens.push("<tr>".to_string());
        for idx in grid.row_anchors(r) {
            let cell = &grid.cells[idx];
            let tag = if cell.is_header { "th" } else { "td" };
            let mut open = format!("<{tag}");
            if cell.rowspan > 1 {
                open.push_str(&format!(" rowspan=\"{}\"", cell.rowspan));
            }
            if cell.colspan > 1 {
                open.push_str(&format!(" colspan=\"{}\"", cell.colspan));
            }
            open.push('>');
            tokens.push(open);
            tokens.push(format!("</{tag}>"));
        }
        tokens.push("</tr>".to_string());
    }
    tokens.push("</table>".to_string());
    tokens
}

/// Wraps CSS and table markup in the document skeleton.
pub fn document(css: &str, table: &str) -> String {
    format!("<html><head><meta charset=\"utf-8\"><style>\n{css}</style></head><body>\n{table}\n</body></html>\n")
}

/// Emits a complete single-table document for the grid.
pub fn grid_to_html(grid: &TableGrid, style: &StyleSpec) -> String {
    document(&css_from_style(style), &table_markup(grid))
}

/// Inner text of the document's first `<style>` block, if any.
pub fn extract_css(html: &str) -> Option<&str> {
    let lower = html.to_ascii_lowercase();
    let open = lower.find("<style")?;
    let content_start = open + lower[open..].find('>')? + 1;
    let close = content_start + lower[content_start..].find("</style")?;
    Some(&html[content_start..close])
}

/// Replaces cell contents in place, leaving every byte outside the replaced
/// content ranges untouched. Replacement text is escaped here.
pub fn splice_contents(html: &str, parsed: &ParsedTable, replacements: &[(usize, String)]) -> String {
    let mut ordered: Vec<(usize, &String)> = replacements.iter().map(|(i, s)| (*i, s)).collect();
    ordered.sort_by_key(|(i, _)| *i);
    let mut out = html.to_string();
    for (idx, text) in ordered.into_iter().rev() {
        let range = parsed.content_ranges[idx].clone();
        out.replace_range(range, &escape_text(text));
    }
    out
}

/// Replaces the document's table subtree with `new_table`, keeping the
/// skeleton and style block byte-identical.
pub fn replace_table(html: &str, parsed: &ParsedTable, new_table: &str) -> String {
    let mut out = html.to_string();
    out.replace_range(parsed.table_range.clone(), new_table);
    out
}
