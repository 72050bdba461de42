#![allow(dead_code)]

use treekd::graph::{SecurityGraph, SpanningTree, WeightedEdge};
use treekd::rational::Rational;
use treekd::rng::{SeededRng, Stream};

pub fn rng(tag: u64) -> SeededRng {
    SeededRng::derive(0x7e57, Stream::Auxiliary, tag, 0)
}

fn shuffle<T>(items: &mut [T], rng: &mut SeededRng) {
    for i in (1..items.len()).rev() {
        let j = rng.index(i + 1);
        items.swap(i, j);
    }
}

/// Random labelled tree edges on `n` vertices: random attachment, then relabelling.
pub fn random_tree_pairs(n: usize, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let mut label: Vec<usize> = (0..n).collect();
    shuffle(&mut label, rng);
    (1..n).map(|i| (label[rng.index(i)], label[i])).collect()
}

pub fn tree_graph(n: usize, pairs: &[(usize, usize)], flip: f64) -> SecurityGraph {
    SecurityGraph::new(
        n,
        pairs
            .iter()
            .map(|&(a, b)| WeightedEdge::new(a, b, Rational::from_integer(1), flip, false))
            .collect(),
        0..n,
    )
}

pub fn random_tree(n: usize, rng: &mut SeededRng) -> SpanningTree {
    tree_graph(n, &random_tree_pairs(n, rng), 0.0)
        .mst_kruskal()
        .unwrap()
}

/// Connected graph: random spanning tree plus each other pair with probability
/// `extra`, integer weights in `1..=max_weight`, edge order shuffled, every
/// vertex a source.
pub fn random_connected_graph(
    n: usize,
    extra: f64,
    max_weight: u64,
    rng: &mut SeededRng,
) -> SecurityGraph {
    let mut pairs = random_tree_pairs(n, rng);
    for a in 0..n {
        for b in a + 1..n {
            let present = pairs.iter().any(|&(x, y)| (x.min(y), x.max(y)) == (a, b));
            if !present && rng.bernoulli(extra) {
                pairs.push((a, b));
            }
        }
    }
    shuffle(&mut pairs, rng);
    let edges = pairs
        .into_iter()
        .map(|(a, b)| WeightedEdge::simple(a, b, 1 + rng.below(max_weight)))
        .collect();
    SecurityGraph::new(n, edges, 0..n)
}

/// Minimum total weight over every `(n-1)`-subset of edges that forms a spanning
/// tree, with its own union-find. Independent of the crate's MST code.
pub fn brute_force_mst_weight(g: &SecurityGraph) -> Option<Rational> {
    let n = g.n;
    let m = g.edges.len();
    let mut best: Option<Rational> = None;
    let mut choose = vec![0usize; n - 1];
    fn rec(
        g: &SecurityGraph,
        start: usize,
        depth: usize,
        choose: &mut Vec<usize>,
        best: &mut Option<Rational>,
        m: usize,
    ) {
        let k = choose.len();
        if depth == k {
            let mut parent: Vec<usize> = (0..g.n).collect();
            fn root(p: &mut [usize], mut v: usize) -> usize {
                while p[v] != v {
                    v = p[v];
                }
                v
            }
            for &i in choose.iter() {
                let (a, b) = (
                    root(&mut parent, g.edges[i].a.0),
                    root(&mut parent, g.edges[i].b.0),
                );
                if a == b {
                    return;
                }
                parent[a] = b;
            }
            let w: Rational = choose.iter().map(|&i| g.edges[i].weight).sum();
            if best.is_none_or(|b| w < b) {
                *best = Some(w);
            }
            return;
        }
        for i in start..m {
            if m - i < k - depth {
                break;
            }
            choose[depth] = i;
            rec(g, i + 1, depth + 1, choose, best, m);
        }
    }
    rec(g, 0, 0, &mut choose, &mut best, m);
    best
}

/// All 2^6 edge subsets of the complete graph on 4 vertices, every vertex a source.
pub fn all_graphs_on_4() -> Vec<SecurityGraph> {
    let pairs: Vec<(usize, usize)> = (0..4)
        .flat_map(|a| (a + 1..4).map(move |b| (a, b)))
        .collect();
    (0u32..64)
        .map(|mask| {
            let edges = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(i, &(a, b))| WeightedEdge::simple(a, b, 1 + i as u64 % 3))
                .collect();
            SecurityGraph::new(4, edges, 0..4)
        })
        .collect()
}

/// Connectivity by repeated relaxation of a reachability vector; independent of BFS.
pub fn reachable_all(g: &SecurityGraph) -> bool {
    let mut seen = vec![false; g.n];
    seen[0] = true;
    loop {
        let mut changed = false;
        for e in &g.edges {
            let (a, b) = (e.a.0, e.b.0);
            if seen[a] != seen[b] {
                seen[a] = true;
                seen[b] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    seen.iter().all(|&s| s)
}
