//! Attention portraits and accumulated category scores across turns.

use hiercrs::embedding::NodeEmbeddingTable;
use hiercrs::linalg::Vector;
use hiercrs::portrait::{attention_portrait, AttentionParams, HierScores};
use hiercrs::{EntityId, Hierarchy, KnowledgeGraph};

fn main() -> hiercrs::Result<()> {
    let members = vec![
        (EntityId::new("a"), Vector::new(vec![1.0, 0.0])),
        (EntityId::new("b"), Vector::new(vec![1.0, 1.0])),
    ];
    let p = attention_portrait(&members, &AttentionParams::preset(2))?;
    println!("weights {:?}", p.weights);
    println!("portrait {:?}", p.vector.as_slice());

    let graph = KnowledgeGraph::parse(
        "E\tcomedy\tCategory\tComedy\n\
         E\thorror\tCategory\tHorror\n\
         E\tm1\tItem\tM1\n\
         E\tm2\tItem\tM2\n\
         T\tm1\thas_genre\tcomedy\n\
         T\tm2\thas_genre\thorror\n",
    )?;
    let hierarchy = Hierarchy::build(&graph, "has_genre")?;
    let items = [
        (EntityId::new("m1"), Vector::new(vec![1.0, 0.0])),
        (EntityId::new("m2"), Vector::new(vec![0.0, 1.0])),
    ]
    .into_iter()
    .collect();
    let nodes = NodeEmbeddingTable::from_item_vectors(&hierarchy, items)?;

    let mut scores = HierScores::new(&hierarchy);
    for utterance in [[1.0, 0.1], [0.9, 0.3], [0.0, 1.0], [0.1, 1.0]] {
        scores.update(&Vector::new(utterance.to_vec()), &nodes)?;
        let ranked = scores.ranked_categories(&hierarchy);
        println!("turn {}: {:?}", scores.turn_count(), ranked);
    }
    Ok(())
}
