//! Tree edit distance based similarity for table structures.
//!
//! A grid becomes a three-level tree: a `table` root, one `tr` node per grid
//! row, and one leaf per cell carrying its tag, spans and text. Distance is
//! the exact tree edit distance (Zhang-Shasha) under unit insert/delete cost
//! and a substitution cost that charges 1 for any structural difference and
//! a normalized character-level edit distance for text-only differences.
//! Similarity is `1 - distance / max(|Ta|, |Tb|)`, clamped to `[0, 1]`.

use crate::html::{html_to_grid, ParseError};
use crate::model::TableGrid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLabel {
    pub tag: String,
    pub rowspan: usize,
    pub colspan: usize,
    pub text: String,
}

impl NodeLabel {
    fn element(tag: &str) -> NodeLabel {
        NodeLabel { tag: tag.to_string(), rowspan: 1, colspan: 1, text: String::new() }
    }
}

/// Rooted ordered tree in adjacency form. `children[i]` lists node `i`'s
/// children left to right; `root` is always present, so the tree is never
/// empty.
#[derive(Debug, Clone)]
pub struct TableTree {
    pub labels: Vec<NodeLabel>,
    pub children: Vec<Vec<usize>>,
    pub root: usize,
}

impl TableTree {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TedsOptions {
    /// Drop cell text so only tags and spans are compared.
    pub structure_only: bool,
    /// Treat `th` as `td`, hiding header/body tag disagreements.
    pub merge_th_td: bool,
}

/// Builds the comparison tree for a grid. Row wrappers are materialized even
/// when the source markup grouped rows under `thead`/`tbody`; those wrappers
/// never appear in the tree.
pub fn build_tree(grid: &TableGrid, opts: &TedsOptions) -> TableTree {
    let mut labels = vec![NodeLabel::element("table")];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    for r in 0..grid.n_rows {
        let tr = labels.len();
        labels.push(NodeLabel::element("tr"));
        children.push(Vec::new());
        children[0].push(tr);
        for idx in grid.row_anchors(r) {
            let cell = &grid.cells[idx];
            let tag = if cell.is_header && !opts.merge_th_td { "th" } else { "td" };
            let leaf = labels.len();
            labels.push(NodeLabel {
                tag: tag.to_string(),
                rowspan: cell.rowspan,
                colspan: cell.colspan,
                text: if opts.structure_only { String::new() } else { cell.content.clone() },
            });
            children.push(Vec::new());
            children[tr].push(leaf);
        }
    }
    TableTree { labels, children, root: 0 }
}

/// Char-level Levenshtein distance normalized by the longer length.
/// Equal strings (including two empty ones) cost 0.
fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    if a == b {
        return 0.0;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] as f64 / a.len().max(b.len()) as f64
}

/// Substitution cost between two node labels.
pub fn substitution_cost(a: &NodeLabel, b: &NodeLabel) -> f64 {
    if a.tag != b.tag || a.rowspan != b.rowspan || a.colspan != b.colspan {
        1.0
    } else {
        normalized_levenshtein(&a.text, &b.text)
    }
}

struct PostorderView {
    labels: Vec<NodeLabel>,
    /// Leftmost leaf descendant, by postorder index.
    lld: Vec<usize>,
    keyroots: Vec<usize>,
}

impl PostorderView {
    fn of(tree: &TableTree) -> PostorderView {
        let n = tree.len();
        let mut labels = Vec::with_capacity(n);
        let mut lld = Vec::with_capacity(n);
        fn walk(tree: &TableTree, node: usize, labels: &mut Vec<NodeLabel>, lld: &mut Vec<usize>) -> usize {
            let mut leftmost = None;
            for &ch in &tree.children[node] {
                let child_lld = walk(tree, ch, labels, lld);
                leftmost.get_or_insert(child_lld);
            }
            let own = leftmost.unwrap_or(labels.len());
            labels.push(tree.labels[node].clone());
            lld.push(own);
            own
        }
        walk(tree, tree.root, &mut labels, &mut lld);
        // A keyroot is the highest node of each leftmost-leaf chain.
        let mut keyroots = Vec::new();
        for i in 0..n {
            if !(i + 1..n).any(|j| lld[j] == lld[i]) {
                keyroots.push(i);
            }
        }
        PostorderView { labels, lld, keyroots }
    }
}

/// Exact tree edit distance via the Zhang-Shasha dynamic program.
pub fn tree_edit_distance(a: &TableTree, b: &TableTree) -> f64 {
    let va = PostorderView::of(a);
    let vb = PostorderView::of(b);
    let (na, nb) = (va.labels.len(), vb.labels.len());
    let mut td = vec![vec![0.0f64; nb]; na];

    for &i in &va.keyroots {
        for &j in &vb.keyroots {
            // Forest distance over postorder slices l(i)..=i and l(j)..=j,
            // with index 0 representing the empty forest.
            let (li, lj) = (va.lld[i], vb.lld[j]);
            let (m, n) = (i - li + 2, j - lj + 2);
            let mut fd = vec![vec![0.0f64; n]; m];
            for di in 1..m {
                fd[di][0] = fd[di - 1][0] + 1.0;
            }
            for dj in 1..n {
                fd[0][dj] = fd[0][dj - 1] + 1.0;
            }
            for di in 1..m {
                for dj in 1..n {
                    let (pi, pj) = (li + di - 1, lj + dj - 1);
                    let del = fd[di - 1][dj] + 1.0;
                    let ins = fd[di][dj - 1] + 1.0;
                    if va.lld[pi] == li && vb.lld[pj] == lj {
                        let sub = fd[di - 1][dj - 1] + substitution_cost(&va.labels[pi], &vb.labels[pj]);
                        fd[di][dj] = del.min(ins).min(sub);
                        td[pi][pj] = fd[di][dj];
                    } else {
                        let (fi, fj) = (va.lld[pi] - li, vb.lld[pj] - lj);
                        let sub = fd[fi][fj] + td[pi][pj];
                        fd[di][dj] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }
    td[na - 1][nb - 1]
}

/// Similarity of two trees in `[0, 1]`; 1 means identical.
pub fn teds_trees(a: &TableTree, b: &TableTree) -> f64 {
    let denom = a.len().max(b.len()).max(1) as f64;
    (1.0 - tree_edit_distance(a, b) / denom).clamp(0.0, 1.0)
}

/// Similarity of two grids under the given comparison options.
pub fn teds_grids(a: &TableGrid, b: &TableGrid, opts: &TedsOptions) -> f64 {
    teds_trees(&build_tree(a, opts), &build_tree(b, opts))
}

/// Parses both documents and scores them. Either side failing to parse is an
/// error for the caller to attribute; nothing is repaired first.
pub fn teds_html(html_a: &str, html_b: &str, opts: &TedsOptions) -> Result<f64, ParseError> {
    Ok(teds_grids(&html_to_grid(html_a)?, &html_to_grid(html_b)?, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::html::html_to_grid;

    fn tree(html: &str, opts: &TedsOptions) -> TableTree {
        build_tree(&html_to_grid(html).unwrap(), opts)
    }

    #[test]
    fn identical_tables_score_one() {
        let html = "<table><tr><th>A</th><th>B</th></tr><tr><td>1</td><td>2</td></tr></table>";
        assert_eq!(teds_html(html, html, &TedsOptions::default()).unwrap(), 1.0);
    }

    #[test]
    fn tree_shape_is_three_levels() {
        let t = tree("<table><tr><td rowspan=\"2\">a</td><td>b</td></tr><tr><td>c</td></tr></table>", &TedsOptions::default());
        assert_eq!(t.len(), 6); // table + 2 tr + 3 cells
        assert_eq!(t.children[0].len(), 2);
        assert_eq!(t.labels[t.children[t.children[0][0]][0]].rowspan, 2);
    }

    #[test]
    fn text_difference_costs_normalized_edit_distance() {
        let a = tree("<table><tr><td>abcd</td></tr></table>", &TedsOptions::default());
        let b = tree("<table><tr><td>abce</td></tr></table>", &TedsOptions::default());
        // One char of four differs: distance 0.25 over 3 nodes.
        assert!((tree_edit_distance(&a, &b) - 0.25).abs() < 1e-12);
        assert!((teds_trees(&a, &b) - (1.0 - 0.25 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn structure_only_ignores_text() {
        let a = "<table><tr><td>x</td></tr></table>";
        let b = "<table><tr><td>completely different</td></tr></table>";
        let opts = TedsOptions { structure_only: true, merge_th_td: false };
        assert_eq!(teds_html(a, b, &opts).unwrap(), 1.0);
        assert!(teds_html(a, b, &TedsOptions::default()).unwrap() < 1.0);
    }

    #[test]
    fn merge_th_td_hides_tag_disagreement() {
        let a = "<table><tr><th>x</th></tr></table>";
        let b = "<table><tr><td>x</td></tr></table>";
        assert!(teds_html(a, b, &TedsOptions::default()).unwrap() < 1.0);
        let merged = TedsOptions { structure_only: false, merge_th_td: true };
        assert_eq!(teds_html(a, b, &merged).unwrap(), 1.0);
    }

    #[test]
    fn span_difference_is_structural() {
        let a = tree("<table><tr><td colspan=\"2\">x</td></tr></table>", &TedsOptions::default());
        let b = tree("<table><tr><td>x</td><td>x</td></tr></table>", &TedsOptions::default());
        // Best mapping keeps table and tr, substitutes or deletes cells.
        let d = tree_edit_distance(&a, &b);
        assert!((d - 2.0).abs() < 1e-12, "distance {d}");
    }

    #[test]
    fn similarity_clamps_at_zero_for_incompatible_shapes() {
        // A 4-deep chain vs 4 siblings: ancestry allows at most one match
        // below the root, so distance exceeds the larger tree size and the
        // raw similarity would go negative without the clamp.
        let a = TableTree {
            labels: std::iter::once("table").chain(std::iter::repeat_n("td", 4)).map(NodeLabel::element).collect(),
            children: vec![vec![1], vec![2], vec![3], vec![4], vec![]],
            root: 0,
        };
        let b = TableTree {
            labels: std::iter::once("table").chain(std::iter::repeat_n("td", 4)).map(NodeLabel::element).collect(),
            children: vec![vec![1, 2, 3, 4], vec![], vec![], vec![], vec![]],
            root: 0,
        };
        assert!(a.len() == 5 && b.len() == 5);
        assert_eq!(tree_edit_distance(&a, &b), 6.0);
        assert_eq!(teds_trees(&a, &b), 0.0);
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(normalized_levenshtein("", ""), 0.0);
        assert_eq!(normalized_levenshtein("abc", ""), 1.0);
        assert_eq!(normalized_levenshtein("kitten", "sitting"), 3.0 / 7.0);
    }
}
