//! WALK semantics and tree invariants.

mod common;

use std::collections::{BTreeSet, HashMap};

use hiercrs::reasoning::walk;
use hiercrs::{EntityId, Mode};
use proptest::prelude::*;

fn scored() -> impl Strategy<Value = (Vec<EntityId>, HashMap<EntityId, f64>)> {
    prop::collection::vec(prop_oneof![-3i32..3, -100i32..100], 1..12).prop_map(|raw| {
        let ids: Vec<EntityId> = (0..raw.len()).map(|i| EntityId::new(format!("e{i:02}"))).collect();
        let scores = ids.iter().cloned().zip(raw.iter().map(|r| f64::from(*r) / 4.0)).collect();
        (ids, scores)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn walk_semantics((ids, scores) in scored(), tau in -30.0f64..30.0, dtau in 0.0f64..10.0, shift in 0.0f64..50.0) {
        let got = walk(&ids, &scores, tau, None);
        let above: BTreeSet<&EntityId> = ids.iter().filter(|i| scores[*i] > tau).collect();
        if above.is_empty() {
            let best = ids.iter().max_by(|a, b| scores[*a].total_cmp(&scores[*b]).then_with(|| b.cmp(a))).unwrap();
            prop_assert_eq!(&got, &vec![best.clone()]);
        } else {
            prop_assert_eq!(got.iter().collect::<BTreeSet<_>>(), above);
        }
        for pair in got.windows(2) {
            let (a, b) = (scores[&pair[0]], scores[&pair[1]]);
            prop_assert!(a > b || (a == b && pair[0] < pair[1]));
        }

        let higher: BTreeSet<EntityId> = walk(&ids, &scores, tau + dtau, None).into_iter().collect();
        let lower: BTreeSet<EntityId> = got.iter().cloned().collect();
        prop_assert!(higher.is_subset(&lower));

        let shifted: HashMap<EntityId, f64> = scores.iter().map(|(k, v)| (k.clone(), v + shift)).collect();
        prop_assert_eq!(walk(&ids, &shifted, tau + shift, None), got.clone());

        let mut reversed = ids.clone();
        reversed.reverse();
        prop_assert_eq!(walk(&reversed, &scores, tau, None), got.clone());

        for cap in 1..4 {
            let capped = walk(&ids, &scores, tau, Some(cap));
            prop_assert_eq!(&capped[..], &got[..got.len().min(cap)]);
        }
    }
}

#[test]
fn tree_invariants_hold_across_synthetic_replay() {
    let s = common::synthetic(1, 8);
    for mode in [Mode::Baseline, Mode::Hierarchical] {
        for d in &s.dialogues {
            let mut session = s.engine.new_session(d.id.clone(), mode);
            for turn in d.turns.iter().filter(|t| t.role == hiercrs::ingest::Role::Seeker) {
                let r = s.engine.advance(&mut session, &turn.text).unwrap();
                let tree = &r.tree;
                assert!(tree.depth() <= 3);
                if tree.act != hiercrs::DialogAct::Recommend || tree.flagged {
                    continue;
                }
                let top: Vec<EntityId> = r.diagnostics.top_categories.iter().map(|c| c.id.clone()).collect();
                for middle in &tree.nodes {
                    if mode == Mode::Hierarchical && !top.is_empty() {
                        assert!(top.contains(&middle.id), "{} not in {top:?}", middle.id);
                    }
                    if let Some(members) = s.engine.hierarchy().members_of(&middle.id) {
                        for leaf in &middle.children {
                            assert!(members.contains(&leaf.id));
                        }
                    }
                }
            }
        }
    }
}
