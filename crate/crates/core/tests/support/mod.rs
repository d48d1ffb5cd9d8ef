//! Independent reference implementations used to cross-check the fast
//! algorithms. These are written for obviousness, not speed: the tree edit
//! distance enumerates valid mappings directly, and the facility radius
//! check enumerates subsets. Keep them free of any code from the modules
//! they verify.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tabgen::teds::{NodeLabel, TableTree};

/// Random three-level tree with at most `max_nodes` nodes. Labels carry tags
/// and spans but no text, so all edit costs are small integers and the fast
/// and slow distance routes must agree exactly.
pub fn random_table_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> TableTree {
    let mut labels = vec![NodeLabel { tag: "table".into(), rowspan: 1, colspan: 1, text: String::new() }];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let n_rows = rng.random_range(0..4);
    for _ in 0..n_rows {
        if labels.len() >= max_nodes {
            break;
        }
        let tr = labels.len();
        labels.push(NodeLabel { tag: "tr".into(), rowspan: 1, colspan: 1, text: String::new() });
        children.push(Vec::new());
        children[0].push(tr);
        let n_cells = rng.random_range(0..4);
        for _ in 0..n_cells {
            if labels.len() >= max_nodes {
                break;
            }
            let leaf = labels.len();
            labels.push(NodeLabel {
                tag: if rng.random_bool(0.3) { "th".into() } else { "td".into() },
                rowspan: rng.random_range(1..3),
                colspan: rng.random_range(1..3),
                text: String::new(),
            });
            children.push(Vec::new());
            children[tr].push(leaf);
        }
    }
    TableTree { labels, children, root: 0 }
}

/// Exact tree edit distance by branch-and-bound enumeration of valid
/// mappings. A mapping is valid when it is one-to-one and preserves both
/// preorder and postorder between the trees, which is equivalent to
/// preserving ancestry and left-to-right sibling order. Cost is
/// #deletions + #insertions + sum of substitution costs over mapped pairs.
pub fn mapping_ted(
    t1: &TableTree,
    t2: &TableTree,
    subst: &dyn Fn(&NodeLabel, &NodeLabel) -> f64,
) -> f64 {
    let o1 = Orders::of(t1);
    let o2 = Orders::of(t2);
    let n1 = t1.labels.len();
    let n2 = t2.labels.len();
    let mut best = (n1 + n2) as f64;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut used2 = vec![false; n2];
    search(
        &SearchCtx { t1, t2, o1: &o1, o2: &o2, subst },
        0,
        &mut pairs,
        &mut used2,
        0.0,
        &mut best,
    );
    best
}

struct Orders {
    pre: Vec<usize>,
    post: Vec<usize>,
    /// Node ids sorted by preorder rank.
    preorder_nodes: Vec<usize>,
}

impl Orders {
    fn of(t: &TableTree) -> Orders {
        let n = t.labels.len();
        let mut pre = vec![0; n];
        let mut post = vec![0; n];
        let mut preorder_nodes = Vec::with_capacity(n);
        let mut next_pre = 0;
        let mut next_post = 0;
        fn walk(
            t: &TableTree,
            node: usize,
            pre: &mut [usize],
            post: &mut [usize],
            order: &mut Vec<usize>,
            np: &mut usize,
            nq: &mut usize,
        ) {
            pre[node] = *np;
            *np += 1;
            order.push(node);
            for &ch in &t.children[node] {
                walk(t, ch, pre, post, order, np, nq);
            }
            post[node] = *nq;
            *nq += 1;
        }
        walk(t, t.root, &mut pre, &mut post, &mut preorder_nodes, &mut next_pre, &mut next_post);
        Orders { pre, post, preorder_nodes }
    }
}

struct SearchCtx<'a> {
    t1: &'a TableTree,
    t2: &'a TableTree,
    o1: &'a Orders,
    o2: &'a Orders,
    subst: &'a dyn Fn(&NodeLabel, &NodeLabel) -> f64,
}

fn compatible(ctx: &SearchCtx, pairs: &[(usize, usize)], a: usize, b: usize) -> bool {
    for &(c, d) in pairs {
        let pre_ok = (ctx.o1.pre[a] < ctx.o1.pre[c]) == (ctx.o2.pre[b] < ctx.o2.pre[d]);
        let post_ok = (ctx.o1.post[a] < ctx.o1.post[c]) == (ctx.o2.post[b] < ctx.o2.post[d]);
        if !pre_ok || !post_ok {
            return false;
        }
    }
    true
}

fn search(
    ctx: &SearchCtx,
    idx: usize,
    pairs: &mut Vec<(usize, usize)>,
    used2: &mut [bool],
    cost_so_far: f64,
    best: &mut f64,
) {
    let remaining1 = ctx.o1.preorder_nodes.len() - idx;
    let unused2 = used2.iter().filter(|&&u| !u).count();
    let bound = cost_so_far + (remaining1 as f64 - unused2 as f64).abs();
    if bound >= *best {
        return;
    }
    if idx == ctx.o1.preorder_nodes.len() {
        *best = cost_so_far + unused2 as f64;
        return;
    }
    let a = ctx.o1.preorder_nodes[idx];
    // Cheapest-looking substitutions first so the bound tightens early.
    let mut candidates: Vec<(f64, usize)> = (0..used2.len())
        .filter(|&b| !used2[b] && compatible(ctx, pairs, a, b))
        .map(|b| ((ctx.subst)(&ctx.t1.labels[a], &ctx.t2.labels[b]), b))
        .collect();
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (cost, b) in candidates {
        pairs.push((a, b));
        used2[b] = true;
        search(ctx, idx + 1, pairs, used2, cost_so_far + cost, best);
        used2[b] = false;
        pairs.pop();
    }
    // Or delete `a`.
    search(ctx, idx + 1, pairs, used2, cost_so_far + 1.0, best);
}

/// Exact k-center: the smallest covering radius over every size-k subset of
/// candidate centers, by direct enumeration. Only viable for tiny pools.
/// The metric is shared with the implementation (it defines the problem);
/// the radius evaluation and the search are local.
pub fn optimal_k_center_radius(
    points: &[Vec<f64>],
    k: usize,
    metric: tabgen::sampler::Metric,
) -> f64 {
    assert!(k >= 1 && k <= points.len(), "need 1 <= k <= pool size");
    let mut best = f64::INFINITY;
    let mut subset = Vec::with_capacity(k);
    enumerate_subsets(points, k, 0, &mut subset, metric, &mut best);
    best
}

fn subset_radius(points: &[Vec<f64>], centers: &[usize], metric: tabgen::sampler::Metric) -> f64 {
    let mut worst = 0.0f64;
    for p in points {
        let mut nearest = f64::INFINITY;
        for &c in centers {
            let d = metric.distance(p, &points[c]);
            if d < nearest {
                nearest = d;
            }
        }
        if nearest > worst {
            worst = nearest;
        }
    }
    worst
}

fn enumerate_subsets(
    points: &[Vec<f64>],
    k: usize,
    from: usize,
    subset: &mut Vec<usize>,
    metric: tabgen::sampler::Metric,
    best: &mut f64,
) {
    if subset.len() == k {
        let r = subset_radius(points, subset, metric);
        if r < *best {
            *best = r;
        }
        return;
    }
    let need = k - subset.len();
    for i in from..=points.len().saturating_sub(need) {
        subset.push(i);
        enumerate_subsets(points, k, i + 1, subset, metric, best);
        subset.pop();
    }
}
