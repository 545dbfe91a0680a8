//! Graph and hierarchy properties on fixture bundles and random graphs.

mod common;

use std::collections::BTreeSet;

use common::{graph_strategy, member_mean_gap, partition_holds, PREDICATES};
use hiercrs::embedding::{cosine, text_vector, NodeEmbeddingTable, WordEmbeddingTable};
use hiercrs::linalg::Vector;
use hiercrs::text::TokenFilter;
use hiercrs::{EntityId, Hierarchy, KnowledgeGraph};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hierarchy_partitions_items(text in graph_strategy()) {
        let graph = KnowledgeGraph::parse(&text).unwrap();
        let h = Hierarchy::build(&graph, "has_genre").unwrap();
        prop_assert_eq!(partition_holds(&graph, &h), Ok(()));
    }

    #[test]
    fn serialization_round_trips(text in graph_strategy()) {
        let graph = KnowledgeGraph::parse(&text).unwrap();
        let again = KnowledgeGraph::parse(&graph.to_text()).unwrap();
        prop_assert_eq!(graph.entities(), again.entities());
        prop_assert_eq!(graph.triples(), again.triples());
    }

    #[test]
    fn neighbors_match_brute_force(text in graph_strategy()) {
        let graph = KnowledgeGraph::parse(&text).unwrap();
        let mut predicates: Vec<&str> = PREDICATES.to_vec();
        predicates.push("has_genre");
        for e in graph.entities() {
            for r in &predicates {
                let want: BTreeSet<EntityId> = graph
                    .triples()
                    .iter()
                    .filter(|t| t.subject == e.id && t.predicate == *r)
                    .map(|t| t.object.clone())
                    .collect();
                prop_assert_eq!(graph.neighbors(&e.id, r).unwrap(), want);
            }
        }
    }

    #[test]
    fn category_vectors_are_member_means(text in graph_strategy(), seed in 0u64..1000) {
        let graph = KnowledgeGraph::parse(&text).unwrap();
        let h = Hierarchy::build(&graph, "has_genre").unwrap();
        prop_assume!(!h.is_empty());
        let words = WordEmbeddingTable::hashed(8, seed);
        let nodes = NodeEmbeddingTable::build(&graph, &h, &words, &TokenFilter::default(), seed).unwrap();
        prop_assert!(member_mean_gap(&h, &nodes) < 1e-9);
    }

    #[test]
    fn cosine_symmetric_and_scale_invariant(
        a in prop::collection::vec(-5.0f64..5.0, 4),
        b in prop::collection::vec(-5.0f64..5.0, 4),
        k in 0.01f64..100.0,
    ) {
        let (a, b) = (Vector::new(a), Vector::new(b));
        let ab = cosine(&a, &b).unwrap();
        prop_assert!((ab - cosine(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((ab - cosine(&a.scale(k), &b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn text_vector_ignores_token_order(mut tokens in prop::collection::vec("[a-f]{1,3}", 1..10), seed in 0u64..100) {
        let words = WordEmbeddingTable::hashed(6, seed);
        let filter = TokenFilter::pass_all();
        let forward = text_vector(&tokens.join(" "), &words, &filter).vector;
        tokens.reverse();
        let backward = text_vector(&tokens.join(" "), &words, &filter).vector;
        for (x, y) in forward.iter().zip(backward.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn fixture_bundles_keep_the_mean_property() {
    let shift = common::genre_shift_engine();
    assert!(member_mean_gap(shift.hierarchy(), shift.nodes()) < 1e-9);
    let synthetic = common::synthetic(3, 4);
    assert!(member_mean_gap(synthetic.engine.hierarchy(), synthetic.engine.nodes()) < 1e-9);
}

#[test]
fn genre_shift_lexicon_examples() {
    let engine = common::genre_shift_engine();
    let ids = |text: &str| -> Vec<String> { engine.lexicon().detect(text).into_iter().map(|e| e.to_string()).collect() };
    assert_eq!(ids("i love adam sandler"), ["adam_sandler"]);
    assert_eq!(ids("there is a new one Son of the Mask"), ["son_of_the_mask"]);
    assert_eq!(ids("i love to watch funny movies"), ["comedy"]);
    assert!(ids("i like some scary movie").is_empty());
}
