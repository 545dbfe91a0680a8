//! Model parameters: the analytic preset and the JSON parameter file.
//!
//! The parameter file is a JSON object with optional sections; anything
//! absent keeps its analytic-preset value.
//!
//! ```json
//! {
//!   "rgcn": {"activation": "relu", "inverse_relations": true,
//!            "layers": [{"self": [[...]], "relations": {"has_genre": [[...]]}}],
//!            "base": {"entity_id": [...]}},
//!   "attention": {"matrix": [[...]], "vector": [...]},
//!   "intent": {"w1": [[...]], "w2": [[...]]},
//!   "gate": {"w1": [...], "w2": [...]}
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::embedding::{hashed_word_vector, text_vector, Activation, NodeEmbeddingTable, RgcnLayer, RgcnParameters, WordEmbeddingTable};
use crate::error::{read_to_string, Result};
use crate::knowledge::{EntityId, KnowledgeGraph};
use crate::linalg::Vector;
use crate::portrait::AttentionParams;
use crate::reasoning::{GateParams, IntentParams};
use crate::text::TokenFilter;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub rgcn: RgcnParameters,
    pub attention: AttentionParams,
    pub intent: IntentParams,
    pub gate: GateParams,
}

/// Layer-0 entity vectors: the hierarchy node vector when there is one,
/// else the text vector of the entity name, else a hashed vector of the id.
pub fn analytic_base(
    graph: &KnowledgeGraph,
    nodes: &NodeEmbeddingTable,
    words: &WordEmbeddingTable,
    filter: &TokenFilter,
    seed: u64,
) -> Vec<Vector> {
    graph
        .entities()
        .iter()
        .map(|e| {
            if let Some(v) = nodes.get(&e.id) {
                return v.clone();
            }
            let tv = text_vector(&e.name, words, filter);
            if tv.is_empty() {
                hashed_word_vector(e.id.as_str(), words.dim(), seed)
            } else {
                tv.vector
            }
        })
        .collect()
}

impl ModelParams {
    /// Identity R-GCN with ReLU and inverse relations, identity attention
    /// projection with an all-ones vector, zero intent and gate weights.
    pub fn analytic(graph: &KnowledgeGraph, base: Vec<Vector>, layers: usize) -> Result<Self> {
        let rgcn = RgcnParameters::identity(graph, base, layers, Activation::Relu)?;
        let d = rgcn.dim;
        Ok(ModelParams {
            rgcn,
            attention: AttentionParams::preset(d),
            intent: IntentParams::preset(d),
            gate: GateParams::preset(d),
        })
    }

    pub fn dim(&self) -> usize {
        self.rgcn.dim
    }

    pub fn validate(&self, graph: &KnowledgeGraph) -> Result<()> {
        let d = self.dim();
        self.rgcn.validate(graph)?;
        self.attention.validate(d)?;
        self.intent.validate(d)?;
        self.gate.validate(d)
    }

    /// Applies a parameter file on top of `self`.
    pub fn apply_file(self, path: &Path, graph: &KnowledgeGraph) -> Result<Self> {
        let text = read_to_string(path)?;
        self.apply_json(&text, graph).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn apply_json(mut self, json: &str, graph: &KnowledgeGraph) -> Result<Self> {
        let file: ParamFile = serde_json::from_str(json)?;
        if let Some(r) = file.rgcn {
            if let Some(a) = r.activation {
                self.rgcn.activation = a;
            }
            if let Some(inv) = r.inverse_relations {
                self.rgcn.inverse_relations = inv;
            }
            if let Some(layers) = r.layers {
                self.rgcn.layers = layers;
            }
            if let Some(base) = r.base {
                for (id, v) in base {
                    let pos = graph.position(&EntityId::new(id))?;
                    self.rgcn.base[pos] = Vector::new(v);
                }
            }
        }
        if let Some(a) = file.attention {
            self.attention = a;
        }
        if let Some(i) = file.intent {
            self.intent = i;
        }
        if let Some(g) = file.gate {
            self.gate = g;
        }
        self.validate(graph)?;
        Ok(self)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamFile {
    rgcn: Option<RgcnSection>,
    attention: Option<AttentionParams>,
    intent: Option<IntentParams>,
    gate: Option<GateParams>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RgcnSection {
    activation: Option<Activation>,
    inverse_relations: Option<bool>,
    layers: Option<Vec<RgcnLayer>>,
    base: Option<BTreeMap<String, Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAPH: &str = "E\ta\tItem\tAlpha\nE\tg\tCategory\tGenre\nT\ta\thas_genre\tg\n";

    fn preset() -> (KnowledgeGraph, ModelParams) {
        let g = KnowledgeGraph::parse(GRAPH).unwrap();
        let base = vec![Vector::new(vec![1.0, 0.0]), Vector::new(vec![0.0, 1.0])];
        let p = ModelParams::analytic(&g, base, 1).unwrap();
        (g, p)
    }

    #[test]
    fn analytic_shapes() {
        let (g, p) = preset();
        p.validate(&g).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.gate.w1.dim(), 7);
        assert_eq!(p.gate.w2.dim(), 9);
        assert_eq!(p.rgcn.layers[0].relations.len(), 2);
    }

    #[test]
    fn file_sections_override() {
        let (g, p) = preset();
        let json = r#"{"gate": {"w1": [1,1,1,1,1,1,1], "w2": [0,0,0,0,0,0,0,0,0]},
                       "rgcn": {"activation": "sigmoid", "base": {"a": [0.5, 0.5]}}}"#;
        let q = p.clone().apply_json(json, &g).unwrap();
        assert_eq!(q.gate.w1, Vector::filled(7, 1.0));
        assert_eq!(q.rgcn.activation, Activation::Sigmoid);
        assert_eq!(q.rgcn.base[0], Vector::new(vec![0.5, 0.5]));
        assert_eq!(q.attention, p.attention);
    }

    #[test]
    fn bad_files_are_rejected() {
        let (g, p) = preset();
        assert!(p.clone().apply_json(r#"{"gate": {"w1": [1], "w2": [0]}}"#, &g).is_err());
        assert!(p.clone().apply_json(r#"{"bogus": 1}"#, &g).is_err());
        assert!(p.clone().apply_json(r#"{"rgcn": {"base": {"nope": [1, 2]}}}"#, &g).is_err());
        let bad_layer = r#"{"rgcn": {"layers": [{"self": [[1,0],[0,1]], "relations": {}}]}}"#;
        assert!(p.apply_json(bad_layer, &g).is_err());
    }
}
