//! Per-conversation state: turns, mentioned entities, accumulated
//! hierarchy scores and the dialogue context vector.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{text_vector, WordEmbeddingTable};
use crate::error::{read_to_string, Error, Result};
use crate::knowledge::{EntityId, KnowledgeGraph};
use crate::linalg::Vector;
use crate::portrait::HierScores;
use crate::reasoning::{DialogAct, Mode, ReasoningTree};
use crate::text::{tokenize, TokenFilter};

/// Case-insensitive entity-name matcher over token sequences.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<Vec<String>, EntityId>,
    max_len: usize,
}

impl Lexicon {
    /// Every entity name. When two entities share a name the smaller id
    /// wins.
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        let mut lexicon = Lexicon::default();
        // entities are sorted by id, so first insert wins the tie
        for e in graph.entities() {
            lexicon.insert(&e.name, &e.id);
        }
        lexicon
    }

    /// Adds `alias<TAB>entity_id` lines. Aliases never shadow a name.
    pub fn add_aliases(&mut self, text: &str, graph: &KnowledgeGraph) -> Result<usize> {
        let mut added = 0;
        for (n, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (alias, id) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(n + 1, "expected alias<TAB>entity_id"))?;
            let id = EntityId::new(id.trim());
            if !graph.contains(&id) {
                return Err(Error::DanglingReference { line: n + 1, id: id.to_string() });
            }
            if self.insert(alias, &id) {
                added += 1;
            }
        }
        Ok(added)
    }

    pub fn load_aliases(&mut self, path: &Path, graph: &KnowledgeGraph) -> Result<usize> {
        self.add_aliases(&read_to_string(path)?, graph)
            .map_err(|e| e.context(path.display().to_string()))
    }

    fn insert(&mut self, surface: &str, id: &EntityId) -> bool {
        let key = tokenize(surface);
        if key.is_empty() {
            return false;
        }
        if let Some(existing) = self.entries.get(&key) {
            if existing != id {
                log::debug!("surface `{surface}` already maps to {existing}; ignoring {id}");
            }
            return false;
        }
        self.max_len = self.max_len.max(key.len());
        self.entries.insert(key, id.clone());
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Leftmost-longest scan; output in text order, deduplicated.
    pub fn detect(&self, text: &str) -> Vec<EntityId> {
        let tokens = tokenize(text);
        let mut found: Vec<EntityId> = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let longest = (1..=self.max_len.min(tokens.len() - i))
                .rev()
                .find_map(|len| self.entries.get(&tokens[i..i + len]).map(|id| (len, id)));
            match longest {
                Some((len, id)) => {
                    if !found.contains(id) {
                        found.push(id.clone());
                    }
                    i += len;
                }
                None => i += 1,
            }
        }
        found
    }
}

/// Maps the previous context, the previous system utterance and the new
/// user utterance to the next context vector.
pub trait ContextEncoder: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn encode(&self, previous: &Vector, system_text: &str, user_text: &str) -> Vector;
}

/// `u_t = normalize(lambda * u_{t-1} + normalize(text_vector(y_{t-1} x_t)))`.
#[derive(Debug, Clone)]
pub struct DecayedBagEncoder {
    words: Arc<WordEmbeddingTable>,
    filter: Arc<TokenFilter>,
    lambda: f64,
}

impl DecayedBagEncoder {
    pub fn new(words: Arc<WordEmbeddingTable>, filter: Arc<TokenFilter>, lambda: f64) -> Self {
        DecayedBagEncoder { words, filter, lambda }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl ContextEncoder for DecayedBagEncoder {
    fn dim(&self) -> usize {
        self.words.dim()
    }

    fn encode(&self, previous: &Vector, system_text: &str, user_text: &str) -> Vector {
        let joined = format!("{system_text} {user_text}");
        let text = text_vector(&joined, &self.words, &self.filter).vector.normalized();
        let mut u = previous.scale(self.lambda);
        u.add_scaled(&text, 1.0);
        u.normalized()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_index: usize,
    pub speaker: Speaker,
    pub text: String,
    pub mentions: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntity {
    pub id: EntityId,
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitDiagnostics {
    pub inputs: Vec<EntityId>,
    pub weights: Vec<f64>,
    pub empty: bool,
}

/// Everything computed for one system turn besides the text and tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub turn_index: usize,
    pub mode: Mode,
    /// Entities found in this user utterance.
    pub mentions: Vec<EntityId>,
    /// All user mentions so far, in first-mention order.
    pub mentioned: Vec<EntityId>,
    pub portrait: PortraitDiagnostics,
    pub hierarchical_portrait: Option<PortraitDiagnostics>,
    /// Categories selected for the hierarchical portrait with their scores.
    pub top_categories: Vec<ScoredEntity>,
    /// Six highest accumulated category scores.
    pub genre_scores: Vec<ScoredEntity>,
    pub linearized: String,
    /// Set when a degenerate state forced the Query fallback.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResponse {
    pub system_text: String,
    pub act: DialogAct,
    pub tree: ReasoningTree,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub mode: Mode,
    pub turns: Vec<Turn>,
    pub mentioned: Vec<EntityId>,
    pub hier_scores: HierScores,
    pub context: Vector,
    pub responses: Vec<SystemResponse>,
}

impl Session {
    pub fn new(id: impl Into<String>, mode: Mode, hier_scores: HierScores, dim: usize) -> Self {
        Session {
            id: id.into(),
            mode,
            turns: Vec::new(),
            mentioned: Vec::new(),
            hier_scores,
            context: Vector::zeros(dim),
            responses: Vec::new(),
        }
    }

    pub fn next_turn_index(&self) -> usize {
        self.turns.len()
    }

    /// Text of the latest system turn, empty before the first one.
    pub fn last_system_text(&self) -> &str {
        self.turns
            .iter()
            .rev()
            .find(|t| t.speaker == Speaker::System)
            .map_or("", |t| t.text.as_str())
    }

    /// Appends a user turn and merges its mentions into the mentioned set.
    pub(crate) fn push_user(&mut self, text: &str, mentions: Vec<EntityId>) {
        for m in &mentions {
            if !self.mentioned.contains(m) {
                self.mentioned.push(m.clone());
            }
        }
        self.turns.push(Turn {
            turn_index: self.next_turn_index(),
            speaker: Speaker::User,
            text: text.to_owned(),
            mentions,
        });
    }

    /// Records a system utterance that was not produced by the engine, as
    /// when replaying gold recommender turns.
    pub fn observe_system(&mut self, text: &str) {
        self.turns.push(Turn {
            turn_index: self.next_turn_index(),
            speaker: Speaker::System,
            text: text.to_owned(),
            mentions: Vec::new(),
        });
    }

    /// Replaces the text of the latest system turn, so that the next
    /// context update sees the gold utterance instead of the generated one.
    pub fn teacher_force(&mut self, text: &str) -> bool {
        match self.turns.last_mut() {
            Some(t) if t.speaker == Speaker::System => {
                t.text = text.to_owned();
                true
            }
            _ => false,
        }
    }

    pub(crate) fn push_response(&mut self, response: SystemResponse) {
        self.observe_system(&response.system_text);
        self.responses.push(response);
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("session serializes")
    }
}
