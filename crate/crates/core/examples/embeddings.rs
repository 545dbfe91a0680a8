//! Word vectors, node vectors and R-GCN entity embeddings under the
//! analytic preset.

use std::path::Path;

use hiercrs::embedding::{cosine, text_vector, EntityEmbeddings, NodeEmbeddingTable, WordEmbeddingTable};
use hiercrs::params::{analytic_base, ModelParams};
use hiercrs::text::TokenFilter;
use hiercrs::{EntityId, Hierarchy, KnowledgeGraph};

fn main() -> hiercrs::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/genre_shift");
    let graph = KnowledgeGraph::load(&dir.join("knowledge.tsv"))?;
    let hierarchy = Hierarchy::build(&graph, "has_genre")?;
    let words = WordEmbeddingTable::load(&dir.join("vectors.txt"))?;
    let filter = TokenFilter::default();

    let nodes = NodeEmbeddingTable::build(&graph, &hierarchy, &words, &filter, 0)?;
    let utterance = text_vector("i like some scary movie", &words, &filter);
    println!("utterance uses {} known tokens", utterance.used);
    for category in hierarchy.categories() {
        let v = nodes.get(category).expect("category vector");
        println!("cos(utterance, {category}) = {:.4}", cosine(&utterance.vector, v)?);
    }

    let base = analytic_base(&graph, &nodes, &words, &filter, 0);
    let params = ModelParams::analytic(&graph, base, 2)?;
    let embeddings = EntityEmbeddings::compute(&graph, &params.rgcn)?;
    for id in ["comedy", "horror", "adam_sandler", "click"] {
        let h = embeddings.get(&EntityId::new(id))?;
        println!("{id:>13}: norm {:.3}", h.norm());
    }
    Ok(())
}
