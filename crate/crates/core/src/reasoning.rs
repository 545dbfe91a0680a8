//! Three-layer reasoning trees: dialog act at the root, attribute-like
//! entities in the middle layer, and items (or attributes, or arbitrary
//! entities, depending on the act) at the leaves.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::EntityEmbeddings;
use crate::error::{Error, Result};
use crate::knowledge::{candidate_entities, EntityId, Hierarchy, KnowledgeGraph, Layer};
use crate::linalg::{relu, sigmoid, Matrix, Vector};
use crate::portrait::Portrait;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DialogAct {
    Recommend,
    Query,
    Chat,
}

impl DialogAct {
    pub const ALL: [DialogAct; 3] = [DialogAct::Recommend, DialogAct::Query, DialogAct::Chat];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DialogAct::Recommend => "Recommend",
            DialogAct::Query => "Query",
            DialogAct::Chat => "Chat",
        }
    }
}

impl fmt::Display for DialogAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DialogAct {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "recommend" => Ok(DialogAct::Recommend),
            "query" => Ok(DialogAct::Query),
            "chat" => Ok(DialogAct::Chat),
            _ => Err(Error::Config {
                key: "act".into(),
                message: format!("unknown dialog act `{s}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    #[default]
    Hierarchical,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Hierarchical => "hierarchical",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Mode::Baseline),
            "hierarchical" => Ok(Mode::Hierarchical),
            _ => Err(Error::Config {
                key: "mode".into(),
                message: format!("expected `baseline` or `hierarchical`, got `{s}`"),
            }),
        }
    }
}

/// `i = W2 relu(W1 u)`, one logit per dialog act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentParams {
    pub w1: Matrix,
    pub w2: Matrix,
}

impl IntentParams {
    /// All-zero weights: every act logit is 0, so the tie rule picks
    /// Recommend unless an act is forced.
    pub fn preset(dim: usize) -> Self {
        IntentParams {
            w1: Matrix::zeros(dim, dim),
            w2: Matrix::zeros(3, dim),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.w1.cols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: self.w1.cols() });
        }
        if self.w2.cols() != self.w1.rows() {
            return Err(Error::DimensionMismatch { expected: self.w1.rows(), actual: self.w2.cols() });
        }
        if self.w2.rows() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, actual: self.w2.rows() });
        }
        Ok(())
    }
}

/// Gate weights: `w1` over `[u; p; i]`, `w2` over `[u; p; i; h_parent]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w1: Vector,
    pub w2: Vector,
}

impl GateParams {
    /// Zero weights, giving a gate of exactly 0.5.
    pub fn preset(dim: usize) -> Self {
        GateParams {
            w1: Vector::zeros(2 * dim + 3),
            w2: Vector::zeros(3 * dim + 3),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.w1.check_dim(2 * dim + 3)?;
        self.w2.check_dim(3 * dim + 3)
    }
}

/// Picks the act with the largest logit (ties go to the lowest index)
/// unless `forced` is set.
pub fn dialog_act(u: &Vector, params: &IntentParams, forced: Option<DialogAct>) -> Result<(DialogAct, [f64; 3])> {
    let hidden = params.w1.mul_vec(u)?.map(relu);
    let out = params.w2.mul_vec(&hidden)?;
    let logits = [out[0], out[1], out[2]];
    let act = forced.unwrap_or_else(|| {
        let mut best = 0;
        for k in 1..3 {
            if logits[k] > logits[best] {
                best = k;
            }
        }
        DialogAct::ALL[best]
    });
    Ok((act, logits))
}

/// `c = g u + (1 - g) p` with `g = sigmoid(w . [u; p; i(; h_parent)])`.
/// The first gate applies when the node hangs off the root.
pub fn context_vector(
    u: &Vector,
    p: &Vector,
    intent: &[f64; 3],
    params: &GateParams,
    parent_embedding: Option<&Vector>,
) -> Result<(Vector, f64)> {
    p.check_dim(u.dim())?;
    let i = Vector::new(intent.to_vec());
    let gamma = match parent_embedding {
        None => sigmoid(params.w1.dot(&Vector::concat(&[u, p, &i]))?),
        Some(h) => {
            h.check_dim(u.dim())?;
            sigmoid(params.w2.dot(&Vector::concat(&[u, p, &i, h]))?)
        }
    };
    Ok((blend(u, p, gamma), gamma))
}

fn blend(u: &Vector, p: &Vector, gamma: f64) -> Vector {
    &u.scale(gamma) + &p.scale(1.0 - gamma)
}

/// `h . (c + c_parent)`.
pub fn score_entity(h: &Vector, c: &Vector, c_parent: &Vector) -> Result<f64> {
    h.dot(&(c + c_parent))
}

/// Candidates scoring strictly above `tau`, best first (ties by id),
/// truncated to `cap`. Falls back to the single best candidate when none
/// clears the threshold.
pub fn walk(candidates: &[EntityId], scores: &HashMap<EntityId, f64>, tau: f64, cap: Option<usize>) -> Vec<EntityId> {
    let mut ranked: Vec<(&EntityId, f64)> = candidates
        .iter()
        .map(|c| (c, scores.get(c).copied().unwrap_or(f64::NEG_INFINITY)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut selected: Vec<EntityId> = ranked
        .iter()
        .filter(|(_, s)| *s > tau)
        .map(|(c, _)| (*c).clone())
        .collect();
    if selected.is_empty() {
        if let Some((best, _)) = ranked.first() {
            selected.push((*best).clone());
        }
    }
    if let Some(cap) = cap {
        selected.truncate(cap);
    }
    selected
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub tau: f64,
    /// Number of node-appending steps; 2 gives the three-layer tree.
    pub depth: usize,
    pub middle_cap: Option<usize>,
    pub leaf_cap: Option<usize>,
    /// Categories selected for the hierarchical portrait.
    pub k: usize,
    pub mode: Mode,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            tau: 0.0,
            depth: 2,
            middle_cap: Some(1),
            leaf_cap: Some(2),
            k: 2,
            mode: Mode::Hierarchical,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if !self.tau.is_finite() {
            return bad("reasoning.tau", "must be finite");
        }
        if !(1..=2).contains(&self.depth) {
            return bad("reasoning.depth", "must be 1 or 2");
        }
        if self.middle_cap == Some(0) || self.leaf_cap == Some(0) {
            return bad("reasoning caps", "must be at least 1");
        }
        if self.k == 0 {
            return bad("portrait.k", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: EntityId,
    pub name: String,
    pub layer: Layer,
    /// Context-weighted score of the entity given its ancestors.
    pub score: f64,
    pub gamma: f64,
    #[serde(skip_serializing, default)]
    pub context: Vector,
    pub children: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTree {
    pub act: DialogAct,
    pub act_logits: [f64; 3],
    pub mode: Mode,
    pub nodes: Vec<TreeNode>,
    /// No middle-layer candidates were available.
    pub flagged: bool,
}

impl ReasoningTree {
    /// First middle-layer node, the one realized in the response.
    pub fn primary(&self) -> Option<&TreeNode> {
        self.nodes.first()
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = &EntityId> {
        self.nodes.iter().flat_map(|n| n.children.iter().map(|c| &c.id))
    }

    pub fn depth(&self) -> usize {
        if self.nodes.is_empty() {
            1
        } else if self.nodes.iter().all(|n| n.children.is_empty()) {
            2
        } else {
            3
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("tree serializes")
    }
}

/// Everything about the current dialogue state the walk needs.
#[derive(Debug, Clone)]
pub struct TreeInputs<'a> {
    pub u: &'a Vector,
    pub portrait: &'a Portrait,
    /// Hierarchical portrait and the categories it was built from, in
    /// accumulated-score order.
    pub hierarchical: Option<(&'a Portrait, &'a [EntityId])>,
    pub mentioned: &'a [EntityId],
    pub forced_act: Option<DialogAct>,
}

/// Read-only model pieces shared by every session.
#[derive(Debug, Clone, Copy)]
pub struct Reasoner<'a> {
    pub graph: &'a KnowledgeGraph,
    pub hierarchy: &'a Hierarchy,
    pub embeddings: &'a EntityEmbeddings,
    pub intent: &'a IntentParams,
    pub gate: &'a GateParams,
    pub config: &'a WalkConfig,
}

impl<'a> Reasoner<'a> {
    /// Induces the reasoning tree for one turn.
    ///
    /// In hierarchical mode a Recommend middle layer holds the top-k
    /// categories in accumulated-score order; their stored scores and
    /// gate use the hierarchical portrait. The leaf layer always uses the
    /// flat portrait.
    pub fn induce(&self, inputs: &TreeInputs<'_>) -> Result<ReasoningTree> {
        self.config.validate()?;
        let (act, logits) = dialog_act(inputs.u, self.intent, inputs.forced_act)?;
        let hierarchical_middle = match (self.config.mode, act, inputs.hierarchical) {
            (Mode::Hierarchical, DialogAct::Recommend, Some((p, sel))) if !sel.is_empty() => Some((p, sel)),
            _ => None,
        };
        let middle_portrait = hierarchical_middle.map_or(inputs.portrait, |(p, _)| p);
        let (c_mid, gamma_mid) = self.context(inputs.u, middle_portrait, &logits, None)?;
        let zero = Vector::zeros(inputs.u.dim());

        let (candidates, cap) = match hierarchical_middle {
            Some((_, selected)) => (selected.to_vec(), None),
            None => (
                candidate_entities(self.graph, self.hierarchy, act, Layer::Middle, inputs.mentioned)?,
                self.config.middle_cap,
            ),
        };
        let scores = self.score_all(&candidates, &c_mid, &zero)?;
        // hierarchical middle nodes keep their accumulated-score order
        let middle = match hierarchical_middle {
            Some(_) => candidates.clone(),
            None => walk(&candidates, &scores, self.config.tau, cap),
        };

        let mut nodes = Vec::with_capacity(middle.len());
        for m in middle {
            let h_m = self.embeddings.get(&m)?;
            let mut node = TreeNode {
                name: self.graph.entity(&m)?.name.clone(),
                score: scores[&m],
                layer: Layer::Middle,
                gamma: gamma_mid,
                context: c_mid.clone(),
                children: Vec::new(),
                id: m,
            };
            if self.config.depth >= 2 {
                let (c_leaf, gamma_leaf) = self.context(inputs.u, inputs.portrait, &logits, Some(h_m))?;
                let leaf_candidates =
                    candidate_entities(self.graph, self.hierarchy, act, Layer::Leaf, std::slice::from_ref(&node.id))?;
                let leaf_scores = self.score_all(&leaf_candidates, &c_leaf, &c_mid)?;
                for leaf in walk(&leaf_candidates, &leaf_scores, self.config.tau, self.config.leaf_cap) {
                    node.children.push(TreeNode {
                        name: self.graph.entity(&leaf)?.name.clone(),
                        score: leaf_scores[&leaf],
                        layer: Layer::Leaf,
                        gamma: gamma_leaf,
                        context: c_leaf.clone(),
                        children: Vec::new(),
                        id: leaf,
                    });
                }
            }
            nodes.push(node);
        }
        Ok(ReasoningTree {
            act,
            act_logits: logits,
            mode: self.config.mode,
            flagged: nodes.is_empty(),
            nodes,
        })
    }

    /// Every item of the hierarchy, tree leaves first (in tree order), the
    /// rest by their leaf score under the primary middle node.
    pub fn rank_items(&self, tree: &ReasoningTree, inputs: &TreeInputs<'_>) -> Result<Vec<EntityId>> {
        let mut ranked: Vec<EntityId> = Vec::new();
        for id in tree.leaf_ids() {
            if self.hierarchy.category_of(id).is_some() && !ranked.contains(id) {
                ranked.push(id.clone());
            }
        }
        let (c, c_parent) = match tree.primary() {
            Some(m) => {
                let (c_leaf, _) =
                    self.context(inputs.u, inputs.portrait, &tree.act_logits, Some(self.embeddings.get(&m.id)?))?;
                (c_leaf, m.context.clone())
            }
            None => {
                let (c, _) = self.context(inputs.u, inputs.portrait, &tree.act_logits, None)?;
                (c, Vector::zeros(inputs.u.dim()))
            }
        };
        let rest: Vec<EntityId> = self.hierarchy.items().filter(|i| !ranked.contains(i)).cloned().collect();
        let scores = self.score_all(&rest, &c, &c_parent)?;
        let mut rest_sorted = rest;
        rest_sorted.sort_by(|a, b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(b)));
        ranked.extend(rest_sorted);
        Ok(ranked)
    }

    /// Context vector; an empty portrait forces the gate to 1 so the
    /// context is the dialogue state alone.
    fn context(&self, u: &Vector, portrait: &Portrait, logits: &[f64; 3], parent: Option<&Vector>) -> Result<(Vector, f64)> {
        if portrait.empty {
            // validate shapes even on the short-circuit path
            context_vector(u, &portrait.vector, logits, self.gate, parent)?;
            return Ok((u.clone(), 1.0));
        }
        context_vector(u, &portrait.vector, logits, self.gate, parent)
    }

    fn score_all(&self, candidates: &[EntityId], c: &Vector, c_parent: &Vector) -> Result<HashMap<EntityId, f64>> {
        candidates
            .iter()
            .map(|e| Ok((e.clone(), score_entity(self.embeddings.get(e)?, c, c_parent)?)))
            .collect()
    }
}

/// Pre-order serialization: `[ACT] act [SEL] middle [ITEM] leaf ...`.
pub fn linearize(tree: &ReasoningTree) -> String {
    let mut parts = vec![format!("[ACT] {}", tree.act)];
    for node in &tree.nodes {
        parts.push(format!("[SEL] {}", node.name));
        for leaf in &node.children {
            parts.push(format!("[ITEM] {}", leaf.name));
        }
    }
    parts.join(" ")
}
