use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sga_core::graph::{build_syntax_graph, distinct_paths, shortest_relation_path, DirectedLabel};
use sga_core::numerics::softmax;
use sga_core::parse::{read_conllu, write_conllu, DependencyTree};
use sga_core::pipeline::Sentence;
use sga_core::synth::random_tree;
use sga_core::verify::lca_path;

fn tree_strategy(max_words: usize) -> impl Strategy<Value = DependencyTree> {
    (1..=max_words, any::<u64>()).prop_map(|(n, seed)| random_tree(&mut ChaCha8Rng::seed_from_u64(seed), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-50.0f64..50.0, 1..16)) {
        let w = softmax(&v).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn softmax_ignores_shifts(v in prop::collection::vec(-20.0f64..20.0, 1..10), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let a = softmax(&v).unwrap();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn edge_count_formula(tree in tree_strategy(20)) {
        let n = tree.len();
        let g = build_syntax_graph(&tree).unwrap();
        prop_assert_eq!(g.edges().len(), 2 * (n - 1) + n);
        prop_assert_eq!(g.self_loops().count(), n);
    }

    #[test]
    fn bfs_agrees_with_lca(tree in tree_strategy(20)) {
        let g = build_syntax_graph(&tree).unwrap();
        let n = tree.len();
        for i in 1..=n {
            for j in 1..=n {
                let bfs = shortest_relation_path(&g, i, j).unwrap();
                prop_assert_eq!(bfs.labels, lca_path(&tree, i, j));
            }
        }
    }

    #[test]
    fn reversal_flips_and_reverses(tree in tree_strategy(15)) {
        let g = build_syntax_graph(&tree).unwrap();
        let n = tree.len();
        for i in 1..=n {
            for j in (1..=n).filter(|&j| j != i) {
                let forward = shortest_relation_path(&g, i, j).unwrap().labels;
                let backward: Vec<DirectedLabel> = shortest_relation_path(&g, j, i)
                    .unwrap()
                    .labels
                    .iter()
                    .rev()
                    .map(DirectedLabel::flipped)
                    .collect();
                prop_assert_eq!(forward, backward);
            }
        }
    }

    #[test]
    fn paths_concatenate_through_intermediate_words(tree in tree_strategy(12)) {
        let g = build_syntax_graph(&tree).unwrap();
        let n = tree.len();
        let hops = |a: usize, b: usize| shortest_relation_path(&g, a, b).unwrap().hops();
        for i in 1..=n {
            for j in (1..=n).filter(|&j| j != i) {
                for k in (1..=n).filter(|&k| k != i && k != j) {
                    if hops(i, k) + hops(k, j) == hops(i, j) {
                        let mut joined = shortest_relation_path(&g, i, k).unwrap().labels;
                        joined.extend(shortest_relation_path(&g, k, j).unwrap().labels);
                        prop_assert_eq!(joined, shortest_relation_path(&g, i, j).unwrap().labels);
                    }
                }
            }
        }
    }

    #[test]
    fn dedup_reconstructs_every_pair(tree in tree_strategy(8)) {
        let s = Sentence::prepare(tree).unwrap();
        let d = distinct_paths(&s.relations);
        let rebuilt = d.reconstruct(0);
        let m = s.relations.node_count();
        prop_assert_eq!(rebuilt.len(), m * m);
        for a in 0..m {
            for b in 0..m {
                prop_assert_eq!(rebuilt[a * m + b], s.relations.get(a, b).labels.as_slice());
            }
        }
        let mut unique = d.paths.clone();
        unique.sort();
        unique.dedup();
        prop_assert_eq!(unique.len(), d.paths.len());
    }

    #[test]
    fn conllu_round_trip(tree in tree_strategy(10)) {
        let text = write_conllu(std::slice::from_ref(&tree));
        prop_assert_eq!(read_conllu(&text).unwrap(), vec![tree]);
    }
}
