//! Evaluation metrics on hand-sized inputs.

use std::collections::BTreeSet;

use hiercrs::metrics::{bleu, coverage, distinct_n, recall_at_k, token_f1, RankedRecommendation, TransitionMatrix};
use hiercrs::EntityId;

fn ids(xs: &[&str]) -> Vec<EntityId> {
    xs.iter().copied().map(EntityId::new).collect()
}

fn main() -> hiercrs::Result<()> {
    let instances = vec![
        RankedRecommendation { dialogue: "d1".into(), turn_index: 1, ranked: ids(&["b", "a", "c"]), gold: ids(&["a"]) },
        RankedRecommendation { dialogue: "d2".into(), turn_index: 1, ranked: ids(&["a", "c", "b"]), gold: ids(&["a", "b"]) },
    ];
    for k in [1, 2, 3] {
        println!("R@{k} = {:.3}", recall_at_k(&instances, k)?);
    }

    let universe: BTreeSet<EntityId> = (0..20).map(|i| EntityId::new(format!("m{i}"))).collect();
    let recommended = ids(&["m1", "m2", "m2", "m3"]);
    println!("coverage = {}", coverage(recommended.iter(), &universe)?);

    println!("distinct-1 = {}", distinct_n(&["a b a b"], 1));
    println!("distinct-2 = {:.4}", distinct_n(&["a b a b"], 2));
    println!("bleu = {:.4}", bleu(&["a b c d"], &["a b c d e"])?);
    println!("f1 = {:.4}", token_f1("have you seen click", "have you seen the waterboy"));

    let labels = vec!["Comedy".to_owned(), "Horror".to_owned()];
    let m = TransitionMatrix::from_sequences(&[vec!["Comedy", "Comedy", "Horror"]], &labels);
    println!("off-diagonal mass = {}", m.off_diagonal_mass());
    print!("{}", m.to_csv()?);
    Ok(())
}
