//! Tree induction pieces: dialog act, gate, WALK and linearization.

use std::collections::HashMap;

use hiercrs::linalg::Vector;
use hiercrs::reasoning::{context_vector, dialog_act, score_entity, walk, GateParams, IntentParams};
use hiercrs::EntityId;

fn main() -> hiercrs::Result<()> {
    let u = Vector::new(vec![0.6, 0.8]);
    let p = Vector::new(vec![1.0, 0.0]);

    let (act, logits) = dialog_act(&u, &IntentParams::preset(2), None)?;
    println!("act {act} from logits {logits:?}");

    let (c, gamma) = context_vector(&u, &p, &logits, &GateParams::preset(2), None)?;
    println!("gamma {gamma}, context {:?}", c.as_slice());

    let candidates: Vec<EntityId> = ["comedy", "horror", "action"].into_iter().map(EntityId::new).collect();
    let embeddings = [vec![1.0, 0.2], vec![0.1, 1.0], vec![-1.0, 0.0]];
    let zero = Vector::zeros(2);
    let mut scores = HashMap::new();
    for (id, h) in candidates.iter().zip(embeddings) {
        let s = score_entity(&Vector::new(h), &c, &zero)?;
        println!("score({id}) = {s:.3}");
        scores.insert(id.clone(), s);
    }
    for tau in [-1.0, 0.5, 0.9, 5.0] {
        println!("WALK tau={tau}: {:?}", walk(&candidates, &scores, tau, None));
    }
    Ok(())
}
