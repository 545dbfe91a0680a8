//! ReDial import and export, the movie map, engine configuration, and
//! engine assembly from files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dialogue::Lexicon;
use crate::embedding::WordEmbeddingTable;
use crate::engine::{Engine, EngineParts, EngineSettings};
use crate::error::{read_to_string, Error, Result};
use crate::generation::TemplateSet;
use crate::knowledge::{EntityId, Hierarchy, KnowledgeGraph, DEFAULT_CATEGORY_PREDICATE};
use crate::reasoning::{DialogAct, Mode, WalkConfig};
use crate::text::{normalize_whitespace, TokenFilter};

/// Sanity threshold on distinct movies per conversation.
pub const MIN_MOVIES_PER_DIALOGUE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Seeker,
    Recommender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTurn {
    pub role: Role,
    /// Original text with `@id` markers, consecutive messages joined.
    pub raw_text: String,
    /// Lowercased text with markers replaced by movie titles.
    pub text: String,
    /// Marker ids in order of appearance.
    pub markers: Vec<String>,
    /// Entities the markers resolve to.
    pub mentions: Vec<EntityId>,
    /// Gold recommendations; recommender turns only.
    pub gold: Vec<EntityId>,
    pub gold_act: Option<DialogAct>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayDialogue {
    pub id: String,
    pub seeker_worker: i64,
    pub recommender_worker: i64,
    /// Marker id to title as given by the file.
    pub movie_names: BTreeMap<String, String>,
    pub turns: Vec<ReplayTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedMarker {
    pub dialogue: String,
    pub marker: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub skipped: Vec<SkippedMarker>,
    /// Dialogues mentioning fewer than four distinct movies.
    pub few_movies: Vec<String>,
}

/// `marker_id,entity_id` rows; a header row is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MovieMap {
    to_entity: BTreeMap<String, EntityId>,
}

impl MovieMap {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, EntityId)>) -> Self {
        MovieMap { to_entity: pairs.into_iter().collect() }
    }

    pub fn load(path: &Path, graph: &KnowledgeGraph) -> Result<Self> {
        Self::parse(&read_to_string(path)?, graph).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn parse(text: &str, graph: &KnowledgeGraph) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut to_entity = BTreeMap::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::parse(n + 1, "expected marker_id,entity_id"));
            }
            if n == 0 && &rec[0] == "marker_id" {
                continue;
            }
            let id = EntityId::new(&rec[1]);
            if !graph.contains(&id) {
                return Err(Error::DanglingReference { line: n + 1, id: id.to_string() });
            }
            to_entity.insert(rec[0].to_owned(), id);
        }
        Ok(MovieMap { to_entity })
    }

    pub fn get(&self, marker: &str) -> Option<&EntityId> {
        self.to_entity.get(marker)
    }

    pub fn len(&self) -> usize {
        self.to_entity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_entity.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("marker_id,entity_id\n");
        for (m, e) in &self.to_entity {
            out.push_str(&format!("{m},{e}\n"));
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct RawConversation {
    #[serde(rename = "conversationId")]
    conversation_id: Value,
    #[serde(rename = "initiatorWorkerId")]
    initiator: i64,
    #[serde(rename = "respondentWorkerId", default)]
    respondent: Option<i64>,
    #[serde(rename = "movieMentions", default)]
    movie_mentions: Option<Value>,
    messages: Vec<RawMessage>,
}

#[derive(Debug, Deserialize)]
struct RawMessage {
    #[serde(rename = "senderWorkerId")]
    sender: i64,
    text: String,
    /// Optional gold dialog act annotation.
    #[serde(default)]
    act: Option<String>,
}

/// `@<digits>` markers in order.
pub fn find_markers(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'@' {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            if end > start {
                out.push(text[start..end].to_owned());
                i = end;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn replace_markers(text: &str, title: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut last = 0;
    while i < bytes.len() {
        if bytes[i] == b'@' {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            if end > start {
                out.push_str(&text[last..i]);
                match title(&text[start..end]) {
                    Some(t) => out.push_str(&t),
                    None => out.push_str(&text[i..end]),
                }
                i = end;
                last = end;
                continue;
            }
        }
        i += 1;
    }
    out.push_str(&text[last..]);
    out
}

/// Parses ReDial JSON lines. Consecutive messages from the same worker are
/// merged into one turn; markers resolve through `movies`, and unresolved
/// ones are kept in the text and listed in the report.
pub fn parse_redial(text: &str, movies: &MovieMap, graph: &KnowledgeGraph) -> Result<(Vec<ReplayDialogue>, ImportReport)> {
    let mut dialogues = Vec::new();
    let mut report = ImportReport::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawConversation =
            serde_json::from_str(line).map_err(|e| Error::parse(n + 1, format!("malformed conversation: {e}")))?;
        let id = match &raw.conversation_id {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let movie_names: BTreeMap<String, String> = match &raw.movie_mentions {
            Some(Value::Object(m)) => m
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().map(str::to_owned).unwrap_or_default()))
                .collect(),
            _ => BTreeMap::new(),
        };
        let recommender = raw
            .respondent
            .or_else(|| raw.messages.iter().map(|m| m.sender).find(|s| *s != raw.initiator))
            .unwrap_or(-1);

        let mut turns: Vec<ReplayTurn> = Vec::new();
        for (m, msg) in raw.messages.iter().enumerate() {
            let role = if msg.sender == raw.initiator { Role::Seeker } else { Role::Recommender };
            let act = match &msg.act {
                Some(a) => Some(a.parse::<DialogAct>().map_err(|_| Error::parse(n + 1, format!("message {m}: unknown act `{a}`")))?),
                None => None,
            };
            match turns.last_mut() {
                Some(t) if t.role == role => {
                    t.raw_text.push(' ');
                    t.raw_text.push_str(&msg.text);
                    t.gold_act = t.gold_act.or(act);
                }
                _ => turns.push(ReplayTurn {
                    role,
                    raw_text: msg.text.clone(),
                    text: String::new(),
                    markers: Vec::new(),
                    mentions: Vec::new(),
                    gold: Vec::new(),
                    gold_act: act,
                }),
            }
        }

        let mut distinct_movies = BTreeSet::new();
        for t in &mut turns {
            t.markers = find_markers(&t.raw_text);
            for marker in &t.markers {
                distinct_movies.insert(marker.clone());
                match movies.get(marker) {
                    Some(e) => {
                        if !t.mentions.contains(e) {
                            t.mentions.push(e.clone());
                        }
                    }
                    None => report.skipped.push(SkippedMarker { dialogue: id.clone(), marker: marker.clone() }),
                }
            }
            if t.role == Role::Recommender {
                t.gold = t.mentions.clone();
            }
            t.text = normalize_whitespace(&replace_markers(&t.raw_text, |marker| {
                movies
                    .get(marker)
                    .and_then(|e| graph.entity(e).ok())
                    .map(|e| e.name.clone())
                    .or_else(|| movie_names.get(marker).filter(|s| !s.is_empty()).cloned())
            }));
        }
        if distinct_movies.len() < MIN_MOVIES_PER_DIALOGUE {
            log::warn!("conversation {id} mentions only {} distinct movies", distinct_movies.len());
            report.few_movies.push(id.clone());
        }
        dialogues.push(ReplayDialogue {
            id,
            seeker_worker: raw.initiator,
            recommender_worker: recommender,
            movie_names,
            turns,
        });
    }
    if dialogues.is_empty() {
        return Err(Error::Empty("dialogue file"));
    }
    Ok((dialogues, report))
}

pub fn import_redial(path: &Path, movies: &MovieMap, graph: &KnowledgeGraph) -> Result<(Vec<ReplayDialogue>, ImportReport)> {
    parse_redial(&read_to_string(path)?, movies, graph).map_err(|e| e.context(path.display().to_string()))
}

/// Writes dialogues back as ReDial JSON lines, one message per turn.
pub fn export_redial(dialogues: &[ReplayDialogue]) -> String {
    let mut out = String::new();
    for d in dialogues {
        let messages: Vec<Value> = d
            .turns
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let sender = match t.role {
                    Role::Seeker => d.seeker_worker,
                    Role::Recommender => d.recommender_worker,
                };
                let mut m = json!({"messageId": i, "senderWorkerId": sender, "text": t.raw_text});
                if let Some(act) = t.gold_act {
                    m["act"] = json!(act.as_str());
                }
                m
            })
            .collect();
        let line = json!({
            "conversationId": d.id,
            "initiatorWorkerId": d.seeker_worker,
            "respondentWorkerId": d.recommender_worker,
            "movieMentions": d.movie_names,
            "messages": messages,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Conversation ids, one per line.
pub fn load_split(path: &Path) -> Result<BTreeSet<String>> {
    Ok(read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

pub fn apply_split(dialogues: Vec<ReplayDialogue>, ids: &BTreeSet<String>) -> Vec<ReplayDialogue> {
    dialogues.into_iter().filter(|d| ids.contains(&d.id)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub graph: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub pos_lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub dialogues: Option<PathBuf>,
    pub movie_map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub paths: Paths,
    /// Dimension of hashed word vectors when no vector file is given.
    pub dim: usize,
    pub layers: usize,
    pub tau: f64,
    pub depth: usize,
    pub middle_cap: Option<usize>,
    pub leaf_cap: Option<usize>,
    pub lambda: f64,
    pub portrait_decay: f64,
    pub genre_mentions_only: bool,
    pub mode: Mode,
    pub k: usize,
    pub seed: u64,
    pub category_predicate: String,
    pub bind: String,
    pub session_ttl_secs: u64,
    /// Keys present in the file but not recognized.
    #[serde(skip)]
    pub unknown_keys: Vec<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let walk = WalkConfig::default();
        EngineConfig {
            paths: Paths::default(),
            dim: 64,
            layers: 2,
            tau: walk.tau,
            depth: walk.depth,
            middle_cap: walk.middle_cap,
            leaf_cap: walk.leaf_cap,
            lambda: 0.5,
            portrait_decay: 1.0,
            genre_mentions_only: true,
            mode: walk.mode,
            k: walk.k,
            seed: 0,
            category_predicate: DEFAULT_CATEGORY_PREDICATE.to_owned(),
            bind: "127.0.0.1:8080".to_owned(),
            session_ttl_secs: 30 * 60,
            unknown_keys: Vec::new(),
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_owned(), message: message.into() }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, "expected a number")),
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad(key, "expected a nonnegative integer")),
    }
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, "expected a string"))
}

/// 0 disables a cap.
fn as_cap(key: &str, v: &toml::Value) -> Result<Option<usize>> {
    Ok(match as_usize(key, v)? {
        0 => None,
        n => Some(n),
    })
}

impl EngineConfig {
    /// Loads a TOML file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base).map_err(|e| e.context(path.display().to_string()))
    }

    /// Unknown keys are logged and kept in `unknown_keys`; invalid values
    /// are errors.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| bad("<file>", e.to_string()))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut c = EngineConfig::default();
        let path = |key: &str, v: &toml::Value| -> Result<Option<PathBuf>> {
            let p = PathBuf::from(as_str(key, v)?);
            Ok(Some(if p.is_absolute() { p } else { base_dir.join(p) }))
        };
        for (key, v) in &entries {
            let k = key.as_str();
            match k {
                "paths.graph" => c.paths.graph = path(k, v)?,
                "paths.vectors" => c.paths.vectors = path(k, v)?,
                "paths.aliases" => c.paths.aliases = path(k, v)?,
                "paths.templates" => c.paths.templates = path(k, v)?,
                "paths.pos_lexicon" => c.paths.pos_lexicon = path(k, v)?,
                "paths.stopwords" => c.paths.stopwords = path(k, v)?,
                "paths.params" => c.paths.params = path(k, v)?,
                "paths.dialogues" => c.paths.dialogues = path(k, v)?,
                "paths.movie_map" => c.paths.movie_map = path(k, v)?,
                "model.dim" => c.dim = as_usize(k, v)?,
                "model.layers" => c.layers = as_usize(k, v)?,
                "reasoning.tau" => c.tau = as_f64(k, v)?,
                "reasoning.depth" => c.depth = as_usize(k, v)?,
                "reasoning.middle_cap" => c.middle_cap = as_cap(k, v)?,
                "reasoning.leaf_cap" => c.leaf_cap = as_cap(k, v)?,
                "reasoning.mode" => c.mode = as_str(k, v)?.parse()?,
                "encoder.lambda" => c.lambda = as_f64(k, v)?,
                "portrait.decay" => c.portrait_decay = as_f64(k, v)?,
                "portrait.k" => c.k = as_usize(k, v)?,
                "portrait.genre_mentions_only" => {
                    c.genre_mentions_only = v.as_bool().ok_or_else(|| bad(k, "expected a boolean"))?
                }
                "hierarchy.category_predicate" => c.category_predicate = as_str(k, v)?.to_owned(),
                "seed" => c.seed = as_usize(k, v)? as u64,
                "service.bind" => c.bind = as_str(k, v)?.to_owned(),
                "service.session_ttl_secs" => c.session_ttl_secs = as_usize(k, v)? as u64,
                _ => {
                    log::warn!("ignoring unknown config key `{key}`");
                    c.unknown_keys.push(key.clone());
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(bad("model.dim", "must be positive"));
        }
        if self.layers == 0 {
            return Err(bad("model.layers", "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(bad("encoder.lambda", "must lie in (0, 1]"));
        }
        if !(self.portrait_decay > 0.0 && self.portrait_decay <= 1.0) {
            return Err(bad("portrait.decay", "must lie in (0, 1]"));
        }
        if self.session_ttl_secs == 0 {
            return Err(bad("service.session_ttl_secs", "must be positive"));
        }
        self.walk().validate()
    }

    pub fn walk(&self) -> WalkConfig {
        WalkConfig {
            tau: self.tau,
            depth: self.depth,
            middle_cap: self.middle_cap,
            leaf_cap: self.leaf_cap,
            k: self.k,
            mode: self.mode,
        }
    }

    pub fn settings(&self) -> EngineSettings {
        EngineSettings {
            walk: self.walk(),
            genre_mentions_only: self.genre_mentions_only,
            portrait_decay: self.portrait_decay,
            lambda: self.lambda,
            seed: self.seed,
        }
    }
}

/// Loads every resource named by the config and builds the engine. Load
/// errors carry the name of the failing file.
pub fn build_engine(config: &EngineConfig) -> Result<Engine> {
    config.validate()?;
    let graph_path = config.paths.graph.as_ref().ok_or_else(|| bad("paths.graph", "required"))?;
    let graph = KnowledgeGraph::load(graph_path).map_err(|e| e.context(format!("knowledge graph {}", graph_path.display())))?;
    let hierarchy = Hierarchy::build(&graph, &config.category_predicate)?;
    let words = match &config.paths.vectors {
        Some(p) => {
            let w = WordEmbeddingTable::load(p).map_err(|e| e.context(format!("word vectors {}", p.display())))?;
            if w.dim() != config.dim && config.dim != EngineConfig::default().dim {
                log::warn!("model.dim {} ignored; word vectors have dimension {}", config.dim, w.dim());
            }
            w
        }
        None => WordEmbeddingTable::hashed(config.dim, config.seed),
    };
    let mut filter = match &config.paths.stopwords {
        Some(p) => TokenFilter::load_stopwords(p)?,
        None => TokenFilter::default(),
    };
    if let Some(p) = &config.paths.pos_lexicon {
        filter = filter.load_pos_lexicon(p)?;
    }
    let mut lexicon = Lexicon::from_graph(&graph);
    if let Some(p) = &config.paths.aliases {
        lexicon.load_aliases(p, &graph)?;
    }
    let templates = match &config.paths.templates {
        Some(p) => {
            let text = read_to_string(p)?;
            TemplateSet::with_overrides(&text).map_err(|e| e.context(p.display().to_string()))?
        }
        None => TemplateSet::default(),
    };
    let parts = EngineParts {
        graph,
        hierarchy,
        words,
        filter,
        lexicon,
        templates,
        settings: config.settings(),
        layers: config.layers,
    };
    let params_path = config.paths.params.clone();
    Engine::build(parts, move |graph, preset| match &params_path {
        Some(p) => preset.apply_file(p, graph),
        None => Ok(preset),
    })
}

/// Dialogues and movie map named by the config, with an optional split.
pub fn load_dialogues(config: &EngineConfig, graph: &KnowledgeGraph, split: Option<&Path>) -> Result<(Vec<ReplayDialogue>, ImportReport)> {
    let dialogues = config.paths.dialogues.as_ref().ok_or_else(|| bad("paths.dialogues", "required for replay"))?;
    let movies = match &config.paths.movie_map {
        Some(p) => MovieMap::load(p, graph)?,
        None => MovieMap::default(),
    };
    let (mut list, report) = import_redial(dialogues, &movies, graph)?;
    if let Some(split) = split {
        list = apply_split(list, &load_split(split)?);
        if list.is_empty() {
            return Err(Error::Empty("dialogues after split"));
        }
    }
    Ok((list, report))
}
