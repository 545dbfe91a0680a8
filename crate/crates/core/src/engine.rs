//! The engine: shared read-only model state plus the per-turn pipeline.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dialogue::{
    ContextEncoder, DecayedBagEncoder, Diagnostics, Lexicon, PortraitDiagnostics, ScoredEntity, Session, SystemResponse,
};
use crate::embedding::{text_vector, EntityEmbeddings, NodeEmbeddingTable, WordEmbeddingTable};
use crate::error::{Error, Result};
use crate::generation::{realize, TemplateSet};
use crate::knowledge::{EntityId, EntityKind, Hierarchy, KnowledgeGraph};
use crate::linalg::Vector;
use crate::params::{analytic_base, ModelParams};
use crate::portrait::{attention_portrait, hier_portrait, AttentionParams, HierScores, Portrait};
use crate::reasoning::{linearize, DialogAct, GateParams, IntentParams, Mode, Reasoner, TreeInputs, WalkConfig};
use crate::text::{tokenize, TokenFilter};

/// Number of accumulated category scores reported per turn.
pub const GENRE_BARS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub walk: WalkConfig,
    /// Only mentioned Category entities enter the flat portrait.
    pub genre_mentions_only: bool,
    pub portrait_decay: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            walk: WalkConfig::default(),
            genre_mentions_only: true,
            portrait_decay: 1.0,
            lambda: 0.5,
            seed: 0,
        }
    }
}

/// Inputs that replace the knowledge and text resources of an engine.
#[derive(Debug, Clone)]
pub struct EngineParts {
    pub graph: KnowledgeGraph,
    pub hierarchy: Hierarchy,
    pub words: WordEmbeddingTable,
    pub filter: TokenFilter,
    pub lexicon: Lexicon,
    pub templates: TemplateSet,
    pub settings: EngineSettings,
    /// R-GCN layer count for the analytic preset.
    pub layers: usize,
}

/// One user turn. `mentions` are resolved entities that bypass the
/// lexicon, such as dataset movie markers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TurnInput {
    pub text: String,
    pub mentions: Vec<EntityId>,
    pub forced_act: Option<DialogAct>,
}

impl TurnInput {
    pub fn text(text: impl Into<String>) -> Self {
        TurnInput { text: text.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutput {
    pub response: SystemResponse,
    /// Every item, best first: tree leaves, then the rest by leaf score.
    pub ranking: Vec<EntityId>,
}

#[derive(Debug)]
pub struct Engine {
    graph: KnowledgeGraph,
    hierarchy: Hierarchy,
    words: Arc<WordEmbeddingTable>,
    filter: Arc<TokenFilter>,
    nodes: NodeEmbeddingTable,
    embeddings: EntityEmbeddings,
    params: ModelParams,
    lexicon: Lexicon,
    templates: TemplateSet,
    encoder: Arc<dyn ContextEncoder>,
    settings: EngineSettings,
}

impl Engine {
    /// Engine under the analytic preset.
    pub fn analytic(parts: EngineParts) -> Result<Self> {
        Self::build(parts, |_, p| Ok(p))
    }

    /// Builds the node table and the analytic preset, lets `adjust`
    /// replace parameters, then computes entity embeddings.
    pub fn build(
        parts: EngineParts,
        adjust: impl FnOnce(&KnowledgeGraph, ModelParams) -> Result<ModelParams>,
    ) -> Result<Self> {
        let EngineParts { graph, hierarchy, words, filter, lexicon, templates, settings, layers } = parts;
        settings.walk.validate()?;
        if !(settings.lambda > 0.0 && settings.lambda <= 1.0) {
            return Err(Error::Config { key: "encoder.lambda".into(), message: "must lie in (0, 1]".into() });
        }
        templates.check_complete()?;
        let nodes = NodeEmbeddingTable::build(&graph, &hierarchy, &words, &filter, settings.seed)?;
        let base = analytic_base(&graph, &nodes, &words, &filter, settings.seed);
        let params = adjust(&graph, ModelParams::analytic(&graph, base, layers)?)?;
        params.validate(&graph)?;
        let embeddings = EntityEmbeddings::compute(&graph, &params.rgcn)?;
        let words = Arc::new(words);
        let filter = Arc::new(filter);
        let encoder = Arc::new(DecayedBagEncoder::new(words.clone(), filter.clone(), settings.lambda));
        Ok(Engine { graph, hierarchy, words, filter, nodes, embeddings, params, lexicon, templates, encoder, settings })
    }

    /// Swaps the context encoder.
    pub fn with_encoder(mut self, encoder: Arc<dyn ContextEncoder>) -> Result<Self> {
        if encoder.dim() != self.params.dim() {
            return Err(Error::DimensionMismatch { expected: self.params.dim(), actual: encoder.dim() });
        }
        self.encoder = encoder;
        Ok(self)
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn words(&self) -> &WordEmbeddingTable {
        &self.words
    }

    pub fn filter(&self) -> &TokenFilter {
        &self.filter
    }

    pub fn nodes(&self) -> &NodeEmbeddingTable {
        &self.nodes
    }

    pub fn embeddings(&self) -> &EntityEmbeddings {
        &self.embeddings
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn attention(&self) -> &AttentionParams {
        &self.params.attention
    }

    pub fn intent(&self) -> &IntentParams {
        &self.params.intent
    }

    pub fn gate(&self) -> &GateParams {
        &self.params.gate
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Startup summary: counts and dimensions.
    pub fn summary(&self) -> String {
        format!(
            "entities={} triples={} items={} categories={} dim={} layers={} words={} mode={} tau={}",
            self.graph.entity_count(),
            self.graph.triple_count(),
            self.hierarchy.item_count(),
            self.hierarchy.category_count(),
            self.dim(),
            self.params.rgcn.layers.len(),
            self.words.vocab_size().map_or_else(|| "hashed".to_string(), |n| n.to_string()),
            self.settings.walk.mode,
            self.settings.walk.tau,
        )
    }

    pub fn new_session(&self, id: impl Into<String>, mode: Mode) -> Session {
        let scores = HierScores::with_decay(&self.hierarchy, self.settings.portrait_decay);
        Session::new(id, mode, scores, self.dim())
    }

    /// Runs one user turn and returns only the response.
    pub fn advance(&self, session: &mut Session, text: &str) -> Result<SystemResponse> {
        Ok(self.step(session, TurnInput::text(text))?.response)
    }

    pub fn step(&self, session: &mut Session, input: TurnInput) -> Result<TurnOutput> {
        let d = self.dim();
        let mut mentions = self.lexicon.detect(&input.text);
        for m in input.mentions {
            self.graph.entity(&m)?;
            if !mentions.contains(&m) {
                mentions.push(m);
            }
        }
        let blank = tokenize(&input.text).is_empty() && mentions.is_empty();
        let turn_index = session.next_turn_index();
        let system_text = session.last_system_text().to_owned();
        session.push_user(&input.text, mentions.clone());

        let utterance = text_vector(&input.text, &self.words, &self.filter);
        session.hier_scores.update(&utterance.vector, &self.nodes)?;
        session.context = self.encoder.encode(&session.context, &system_text, &input.text);

        let members = session
            .mentioned
            .iter()
            .filter(|e| !self.settings.genre_mentions_only || self.kind(e) == Some(EntityKind::Category))
            .map(|e| Ok((e.clone(), self.embeddings.get(e)?.clone())))
            .collect::<Result<Vec<_>>>()?;
        let portrait = if members.is_empty() {
            Portrait::empty(d)
        } else {
            attention_portrait(&members, &self.params.attention)?
        };

        let ranked = session.hier_scores.ranked_categories(&self.hierarchy);
        let has_signal = ranked.iter().any(|(_, s)| *s != 0.0);
        let selected: Vec<EntityId> = if session.mode == Mode::Hierarchical && has_signal {
            ranked.iter().take(self.settings.walk.k).map(|(id, _)| id.clone()).collect()
        } else {
            Vec::new()
        };
        let hier = if selected.is_empty() {
            None
        } else {
            Some(hier_portrait(&selected, &self.embeddings, &self.params.attention)?)
        };

        let walk = WalkConfig { mode: session.mode, ..self.settings.walk.clone() };
        let reasoner = Reasoner {
            graph: &self.graph,
            hierarchy: &self.hierarchy,
            embeddings: &self.embeddings,
            intent: &self.params.intent,
            gate: &self.params.gate,
            config: &walk,
        };
        let mut inputs = TreeInputs {
            u: &session.context,
            portrait: &portrait,
            hierarchical: hier.as_ref().map(|p| (p, selected.as_slice())),
            mentioned: &session.mentioned,
            forced_act: if blank { Some(DialogAct::Query) } else { input.forced_act },
        };
        let mut tree = reasoner.induce(&inputs)?;
        let mut fallback = blank;
        if tree.flagged && tree.act != DialogAct::Query {
            inputs.forced_act = Some(DialogAct::Query);
            tree = reasoner.induce(&inputs)?;
            fallback = true;
        }
        let ranking = reasoner.rank_items(&tree, &inputs)?;
        let system_text = realize(&tree, &self.templates)?;

        let scored = |id: &EntityId, score: f64| -> Result<ScoredEntity> {
            Ok(ScoredEntity { id: id.clone(), name: self.graph.entity(id)?.name.clone(), score })
        };
        let diagnostics = Diagnostics {
            turn_index,
            mode: session.mode,
            mentions,
            mentioned: session.mentioned.clone(),
            portrait: portrait_diagnostics(&portrait),
            hierarchical_portrait: hier.as_ref().map(portrait_diagnostics),
            top_categories: selected
                .iter()
                .map(|c| scored(c, session.hier_scores.get(c)))
                .collect::<Result<_>>()?,
            genre_scores: ranked.iter().take(GENRE_BARS).map(|(c, s)| scored(c, *s)).collect::<Result<_>>()?,
            linearized: linearize(&tree),
            fallback,
        };
        let response = SystemResponse { system_text, act: tree.act, tree, diagnostics };
        session.push_response(response.clone());
        Ok(TurnOutput { response, ranking })
    }

    fn kind(&self, id: &EntityId) -> Option<EntityKind> {
        self.graph.entity(id).ok().map(|e| e.kind)
    }

    /// Item universe for coverage.
    pub fn items(&self) -> impl Iterator<Item = &EntityId> {
        self.graph.entities_of_kind(EntityKind::Item).map(|e| &e.id)
    }

    /// Context vector a fresh session would have after `text`, for
    /// inspection.
    pub fn encode_first(&self, text: &str) -> Vector {
        self.encoder.encode(&Vector::zeros(self.dim()), "", text)
    }
}

fn portrait_diagnostics(p: &Portrait) -> PortraitDiagnostics {
    PortraitDiagnostics { inputs: p.inputs.clone(), weights: p.weights.clone(), empty: p.empty }
}
