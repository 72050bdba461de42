mod common;

use common::*;
use proptest::prelude::*;
use treekd::graph::{AgentId, GraphError};
use treekd::rng::{SeededRng, Stream};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kruskal_and_prim_agree_for_every_root(seed in any::<u64>(), n in 2usize..=12, extra in 0.0f64..0.8) {
        let mut rng = SeededRng::derive(seed, Stream::Auxiliary, 1, 0);
        let g = random_connected_graph(n, extra, 4, &mut rng);
        let k = g.mst_kruskal().unwrap();
        for r in 0..n {
            let p = g.mst_prim(AgentId(r)).unwrap();
            prop_assert_eq!(p.total_weight, k.total_weight);
        }
        prop_assert!(k.terminal_agents().len() >= 2);
        prop_assert_eq!(k.edges.len(), n - 1);
        prop_assert_eq!(k.total_weight, k.edges.iter().map(|e| e.weight).sum());
    }

    #[test]
    fn distinct_weights_give_identical_trees(seed in any::<u64>(), n in 2usize..=10) {
        let mut rng = SeededRng::derive(seed, Stream::Auxiliary, 2, 0);
        let mut g = random_connected_graph(n, 0.5, 1, &mut rng);
        for (i, e) in g.edges.iter_mut().enumerate() {
            e.weight = treekd::rational::Rational::new(1 + (i as u64 * 7919) % 1009, 3);
        }
        let k = g.mst_kruskal().unwrap();
        let p = g.mst_prim(AgentId(rng.index(n))).unwrap();
        prop_assert_eq!(k.keys(), p.keys());
    }

    #[test]
    fn tree_exists_iff_connected(seed in any::<u64>(), n in 2usize..=7, p in 0.0f64..0.6) {
        let mut rng = SeededRng::derive(seed, Stream::Auxiliary, 3, 0);
        let mut edges = vec![];
        for a in 0..n {
            for b in a + 1..n {
                if rng.bernoulli(p) {
                    edges.push(treekd::graph::WeightedEdge::simple(a, b, 1));
                }
            }
        }
        let g = treekd::graph::SecurityGraph::new(n, edges, 0..n);
        let connected = reachable_all(&g);
        prop_assert_eq!(g.is_connected(), connected);
        match g.mst_kruskal() {
            Ok(_) => prop_assert!(connected),
            Err(GraphError::Disconnected { components }) => {
                prop_assert!(!connected);
                prop_assert!(components.len() >= 2);
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}

#[test]
fn mst_matches_brute_force_on_small_graphs() {
    let mut rng = rng(10);
    for _ in 0..100 {
        let n = 2 + rng.index(7);
        let g = random_connected_graph(n, 0.45, 5, &mut rng);
        let brute = brute_force_mst_weight(&g).expect("connected");
        assert_eq!(g.mst_kruskal().unwrap().total_weight, brute, "{g:?}");
        assert_eq!(g.mst_prim(AgentId(0)).unwrap().total_weight, brute);
    }
}

#[test]
fn tree_path_is_the_unique_path() {
    let mut rng = rng(11);
    for _ in 0..50 {
        let n = 2 + rng.index(9);
        let t = random_tree(n, &mut rng);
        for a in 0..n {
            for b in 0..n {
                let path = t.path(AgentId(a), AgentId(b));
                // consecutive edges chain from a to b
                let mut at = AgentId(a);
                for e in &path {
                    at = e.key().other(at);
                }
                assert_eq!(at, AgentId(b));
                let back = t.path(AgentId(b), AgentId(a));
                assert_eq!(path.len(), back.len());
            }
        }
    }
}
