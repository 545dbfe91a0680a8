//! User portraits: attention over mentioned-entity embeddings, and the
//! hierarchical variant built from accumulated category scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, EntityEmbeddings, NodeEmbeddingTable};
use crate::error::{Error, Result};
use crate::knowledge::{EntityId, Hierarchy};
use crate::linalg::{softmax, Matrix, Vector};

/// Self-attention weights shared by the flat and hierarchical portraits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub matrix: Matrix,
    pub vector: Vector,
}

impl AttentionParams {
    /// Identity matrix and an all-ones weight vector.
    pub fn preset(dim: usize) -> Self {
        AttentionParams {
            matrix: Matrix::identity(dim),
            vector: Vector::filled(dim, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.vector.dim()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.vector.check_dim(dim)?;
        if self.matrix.rows() != dim || self.matrix.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.matrix.rows(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portrait {
    pub vector: Vector,
    pub weights: Vec<f64>,
    pub inputs: Vec<EntityId>,
    /// Set when there was nothing to attend over; `vector` is then zero.
    pub empty: bool,
}

impl Portrait {
    pub fn empty(dim: usize) -> Self {
        Portrait {
            vector: Vector::zeros(dim),
            weights: Vec::new(),
            inputs: Vec::new(),
            empty: true,
        }
    }
}

/// `alpha = softmax(w . tanh(W h_i))`, `p = sum_i alpha_i h_i`.
pub fn attention_portrait(members: &[(EntityId, Vector)], params: &AttentionParams) -> Result<Portrait> {
    let dim = params.dim();
    if members.is_empty() {
        return Err(Error::Empty("mentioned entities"));
    }
    let mut logits = Vec::with_capacity(members.len());
    for (_, h) in members {
        h.check_dim(dim)?;
        let projected = params.matrix.mul_vec(h)?.map(f64::tanh);
        logits.push(params.vector.dot(&projected)?);
    }
    let weights = softmax(&logits);
    let mut vector = Vector::zeros(dim);
    for ((_, h), a) in members.iter().zip(&weights) {
        vector.add_scaled(h, *a);
    }
    Ok(Portrait {
        vector,
        weights,
        inputs: members.iter().map(|(id, _)| id.clone()).collect(),
        empty: false,
    })
}

/// Attention portrait over the embeddings of selected categories.
pub fn hier_portrait(
    selected: &[EntityId],
    embeddings: &EntityEmbeddings,
    params: &AttentionParams,
) -> Result<Portrait> {
    if selected.is_empty() {
        return Err(Error::Empty("selected categories"));
    }
    let members = selected
        .iter()
        .map(|id| Ok((id.clone(), embeddings.get(id)?.clone())))
        .collect::<Result<Vec<_>>>()?;
    attention_portrait(&members, params)
}

/// Per-node accumulated cosine scores over the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierScores {
    scores: BTreeMap<EntityId, f64>,
    turn_count: usize,
    decay: f64,
}

impl HierScores {
    pub fn new(hierarchy: &Hierarchy) -> Self {
        Self::with_decay(hierarchy, 1.0)
    }

    /// `decay` multiplies previous scores before each update; 1.0 is a
    /// plain running sum.
    pub fn with_decay(hierarchy: &Hierarchy, decay: f64) -> Self {
        HierScores {
            scores: hierarchy.nodes().map(|n| (n.clone(), 0.0)).collect(),
            turn_count: 0,
            decay,
        }
    }

    /// Adds `cosine(utterance, v_n)` to every node score.
    pub fn update(&mut self, utterance: &Vector, nodes: &NodeEmbeddingTable) -> Result<()> {
        utterance.check_dim(nodes.dim())?;
        let mut next = BTreeMap::new();
        for (id, score) in &self.scores {
            let v = nodes
                .get(id)
                .ok_or_else(|| Error::UnknownEntity(id.to_string()))?;
            next.insert(id.clone(), self.decay * score + cosine(utterance, v)?);
        }
        self.scores = next;
        self.turn_count += 1;
        Ok(())
    }

    pub fn get(&self, id: &EntityId) -> f64 {
        self.scores.get(id).copied().unwrap_or(0.0)
    }

    pub fn turn_count(&self) -> usize {
        self.turn_count
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, f64)> {
        self.scores.iter().map(|(k, v)| (k, *v))
    }

    /// Category ids by descending score, ties by ascending id.
    pub fn top_k_categories(&self, hierarchy: &Hierarchy, k: usize) -> Vec<EntityId> {
        self.ranked_categories(hierarchy)
            .into_iter()
            .take(k)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn ranked_categories(&self, hierarchy: &Hierarchy) -> Vec<(EntityId, f64)> {
        let mut ranked: Vec<(EntityId, f64)> = hierarchy
            .categories()
            .map(|c| (c.clone(), self.get(c)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }

    #[cfg(test)]
    pub(crate) fn set(&mut self, id: &EntityId, score: f64) {
        self.scores.insert(id.clone(), score);
    }
}
