//! Loads a knowledge file, builds the category → item hierarchy and lists
//! the entities each dialog act may place in the middle layer.

use std::path::Path;

use hiercrs::knowledge::{candidate_entities, Layer};
use hiercrs::{DialogAct, EntityId, Hierarchy, KnowledgeGraph};

fn main() -> hiercrs::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/genre_shift/knowledge.tsv");
    let graph = KnowledgeGraph::load(&path)?;
    let hierarchy = Hierarchy::build(&graph, "has_genre")?;
    println!("{} entities, {} triples", graph.entity_count(), graph.triple_count());

    for category in hierarchy.categories() {
        let name = &graph.entity(category)?.name;
        let members = hierarchy.members_of(category).unwrap_or_default();
        let titles: Vec<&str> = members
            .iter()
            .map(|m| graph.entity(m).map(|e| e.name.as_str()))
            .collect::<hiercrs::Result<_>>()?;
        println!("{name:>8}: {}", titles.join(", "));
    }

    let mentioned = [EntityId::new("the_mask"), EntityId::new("adam_sandler")];
    for act in DialogAct::ALL {
        let middle = candidate_entities(&graph, &hierarchy, act, Layer::Middle, &mentioned)?;
        let ids: Vec<&str> = middle.iter().map(EntityId::as_str).collect();
        println!("{act} middle candidates: {}", ids.join(" "));
    }
    Ok(())
}
