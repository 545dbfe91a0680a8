//! Relational graph convolution over the knowledge graph.
//!
//! One layer computes, for every entity `i`,
//!
//! ```text
//! h_i' = act( sum_r sum_{j in N_r(i)} W_r h_j / |N_r(i)|  +  W_0 h_i )
//! ```
//!
//! Relations with no neighbors contribute nothing. When
//! `inverse_relations` is set, each predicate `p` also contributes an
//! inverse relation `~p` over incoming edges.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::{EntityId, KnowledgeGraph};
use crate::linalg::{relu, sigmoid, Matrix, Vector};

pub const INVERSE_PREFIX: char = '~';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgcnLayer {
    #[serde(rename = "self")]
    pub self_weight: Matrix,
    /// Keyed by predicate; inverse relations use a `~` prefix.
    pub relations: BTreeMap<String, Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgcnParameters {
    pub dim: usize,
    pub layers: Vec<RgcnLayer>,
    /// Layer-0 vectors, one per entity in graph position order.
    pub base: Vec<Vector>,
    pub activation: Activation,
    pub inverse_relations: bool,
}

impl RgcnParameters {
    /// Identity matrices for every relation and layer.
    pub fn identity(graph: &KnowledgeGraph, base: Vec<Vector>, layers: usize, activation: Activation) -> Result<Self> {
        let dim = base.first().map(Vector::dim).ok_or(Error::Empty("base embeddings"))?;
        let mut relations = BTreeMap::new();
        for p in graph.predicates() {
            relations.insert(p.to_owned(), Matrix::identity(dim));
            relations.insert(format!("{INVERSE_PREFIX}{p}"), Matrix::identity(dim));
        }
        let layer = RgcnLayer {
            self_weight: Matrix::identity(dim),
            relations,
        };
        let params = RgcnParameters {
            dim,
            layers: vec![layer; layers],
            base,
            activation,
            inverse_relations: true,
        };
        params.validate(graph)?;
        Ok(params)
    }

    pub fn validate(&self, graph: &KnowledgeGraph) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Params("R-GCN needs at least one layer".into()));
        }
        if self.base.len() != graph.entity_count() {
            return Err(Error::Params(format!(
                "base table has {} columns for {} entities",
                self.base.len(),
                graph.entity_count()
            )));
        }
        for v in &self.base {
            v.check_dim(self.dim)?;
            if !v.is_finite() {
                return Err(Error::Params("non-finite base embedding".into()));
            }
        }
        let square = |m: &Matrix| -> Result<()> {
            if m.rows() != self.dim || m.cols() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: if m.rows() != self.dim { m.rows() } else { m.cols() },
                });
            }
            Ok(())
        };
        for layer in &self.layers {
            square(&layer.self_weight)?;
            for m in layer.relations.values() {
                square(m)?;
            }
            for p in graph.predicates() {
                let mut needed = vec![p.to_owned()];
                if self.inverse_relations {
                    needed.push(format!("{INVERSE_PREFIX}{p}"));
                }
                for r in needed {
                    if !layer.relations.contains_key(&r) {
                        return Err(Error::Params(format!("missing weight matrix for relation `{r}`")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Final-layer embeddings of every entity, in graph position order.
pub fn rgcn_forward(graph: &KnowledgeGraph, params: &RgcnParameters) -> Result<Vec<Vector>> {
    params.validate(graph)?;
    let mut h = params.base.clone();
    for layer in &params.layers {
        let mut next = Vec::with_capacity(h.len());
        for entity in graph.entities() {
            let i = graph.position(&entity.id)?;
            let mut acc = layer.self_weight.mul_vec(&h[i])?;
            let mut add_relation = |key: &str, neighbors: &std::collections::BTreeSet<EntityId>| -> Result<()> {
                if neighbors.is_empty() {
                    return Ok(());
                }
                let w = &layer.relations[key];
                let norm = 1.0 / neighbors.len() as f64;
                for n in neighbors {
                    acc.add_scaled(&w.mul_vec(&h[graph.position(n)?])?, norm);
                }
                Ok(())
            };
            if let Some(out) = graph.outgoing_by_relation(&entity.id) {
                for (r, ns) in out {
                    add_relation(r, ns)?;
                }
            }
            if params.inverse_relations {
                if let Some(inc) = graph.incoming_by_relation(&entity.id) {
                    for (r, ns) in inc {
                        add_relation(&format!("{INVERSE_PREFIX}{r}"), ns)?;
                    }
                }
            }
            next.push(acc.map(|x| params.activation.apply(x)));
        }
        h = next;
    }
    Ok(h)
}

/// Final-layer embedding of a single entity.
pub fn rgcn_entity_embedding(graph: &KnowledgeGraph, params: &RgcnParameters, e: &EntityId) -> Result<Vector> {
    let i = graph.position(e)?;
    let mut all = rgcn_forward(graph, params)?;
    Ok(all.swap_remove(i))
}

/// Precomputed entity embeddings keyed by id.
#[derive(Debug, Clone)]
pub struct EntityEmbeddings {
    dim: usize,
    vectors: BTreeMap<EntityId, Vector>,
}

impl EntityEmbeddings {
    pub fn compute(graph: &KnowledgeGraph, params: &RgcnParameters) -> Result<Self> {
        let vectors = rgcn_forward(graph, params)?;
        Ok(EntityEmbeddings {
            dim: params.dim,
            vectors: graph
                .entities()
                .iter()
                .map(|e| e.id.clone())
                .zip(vectors)
                .collect(),
        })
    }

    pub fn from_map(dim: usize, vectors: BTreeMap<EntityId, Vector>) -> Result<Self> {
        for v in vectors.values() {
            v.check_dim(dim)?;
        }
        Ok(EntityEmbeddings { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, id: &EntityId) -> Result<&Vector> {
        self.vectors
            .get(id)
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec())
    }

    #[test]
    fn isolated_node_is_activated_self() {
        let g = KnowledgeGraph::parse("E\ta\tAttribute\tA\n").unwrap();
        let p = RgcnParameters::identity(&g, vec![v(&[0.3, -0.2])], 1, Activation::Relu).unwrap();
        assert_eq!(rgcn_entity_embedding(&g, &p, &"a".into()).unwrap(), v(&[0.3, 0.0]));
    }

    #[test]
    fn single_relation_mean_plus_self() {
        // e -r-> n1, e -r-> n2; inverse relations off so only e aggregates
        let g = KnowledgeGraph::parse(
            "E\te\tAttribute\tE\nE\tn1\tAttribute\tN1\nE\tn2\tAttribute\tN2\nT\te\tr\tn1\nT\te\tr\tn2\n",
        )
        .unwrap();
        let mut p = RgcnParameters::identity(
            &g,
            vec![v(&[0.5, 0.5]), v(&[1.0, 0.0]), v(&[0.0, 1.0])],
            1,
            Activation::Relu,
        )
        .unwrap();
        p.inverse_relations = false;
        assert_eq!(rgcn_entity_embedding(&g, &p, &"e".into()).unwrap(), v(&[1.0, 1.0]));
    }

    #[test]
    fn zero_weights_give_activation_of_zero() {
        let g = KnowledgeGraph::parse("E\ta\tItem\tA\nE\tb\tCategory\tB\nT\ta\thas_genre\tb\n").unwrap();
        let mut p = RgcnParameters::identity(&g, vec![v(&[1.0, 2.0]), v(&[-3.0, 4.0])], 2, Activation::Sigmoid).unwrap();
        for layer in &mut p.layers {
            layer.self_weight = Matrix::zeros(2, 2);
            for m in layer.relations.values_mut() {
                *m = Matrix::zeros(2, 2);
            }
        }
        for out in rgcn_forward(&g, &p).unwrap() {
            assert_eq!(out, v(&[0.5, 0.5]));
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let g = KnowledgeGraph::parse("E\ta\tItem\tA\nE\tb\tCategory\tB\nT\ta\thas_genre\tb\n").unwrap();
        let mut p = RgcnParameters::identity(&g, vec![v(&[1.0, 2.0]), v(&[1.0, 1.0])], 1, Activation::Relu).unwrap();
        p.layers[0].relations.remove("~has_genre");
        assert!(matches!(rgcn_forward(&g, &p), Err(Error::Params(_))));
        let mut p2 = RgcnParameters::identity(&g, vec![v(&[1.0, 2.0]), v(&[1.0, 1.0])], 1, Activation::Relu).unwrap();
        p2.layers[0].self_weight = Matrix::identity(3);
        assert!(matches!(rgcn_forward(&g, &p2), Err(Error::DimensionMismatch { .. })));
        assert!(rgcn_entity_embedding(&g, &p2, &"zz".into()).is_err());
    }
}
