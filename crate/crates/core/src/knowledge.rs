//! Relational knowledge graph and the category → item hierarchy.
//!
//! The graph is loaded from a line-oriented text file:
//!
//! ```text
//! # comment
//! E<TAB>id<TAB>kind<TAB>name<TAB>description
//! T<TAB>subject<TAB>predicate<TAB>object
//! ```
//!
//! `kind` is one of `Item`, `Category`, `Attribute`, `Concept`. The
//! description column is optional.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{self, Error, Result};
use crate::reasoning::DialogAct;

pub const DEFAULT_CATEGORY_PREDICATE: &str = "has_genre";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Item,
    Category,
    Attribute,
    Concept,
}

impl EntityKind {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "item" => Some(EntityKind::Item),
            "category" => Some(EntityKind::Category),
            "attribute" => Some(EntityKind::Attribute),
            "concept" => Some(EntityKind::Concept),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Item => "Item",
            EntityKind::Category => "Category",
            EntityKind::Attribute => "Attribute",
            EntityKind::Concept => "Concept",
        }
    }

    /// Kinds that can sit in the middle layer of a Recommend tree.
    pub fn is_attribute_like(self) -> bool {
        matches!(self, EntityKind::Attribute | EntityKind::Category)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntityId,
    pub predicate: String,
    pub object: EntityId,
}

type Adjacency = BTreeMap<EntityId, BTreeMap<String, BTreeSet<EntityId>>>;

/// Immutable after load. Entities are stored in id order.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    index: HashMap<EntityId, usize>,
    triples: Vec<Triple>,
    outgoing: Adjacency,
    incoming: Adjacency,
}

impl KnowledgeGraph {
    pub fn load(path: &Path) -> Result<Self> {
        let text = error::read_to_string(path)?;
        Self::parse(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entities = Vec::new();
        let mut raw_triples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "E" => {
                    if !(4..=5).contains(&fields.len()) {
                        return Err(Error::parse(
                            lineno,
                            "entity line needs `E<TAB>id<TAB>kind<TAB>name[<TAB>description]`",
                        ));
                    }
                    let kind = EntityKind::parse(fields[2]).ok_or_else(|| {
                        Error::parse(lineno, format!("unknown entity kind `{}`", fields[2]))
                    })?;
                    if fields[1].is_empty() {
                        return Err(Error::parse(lineno, "empty entity id"));
                    }
                    let description = fields
                        .get(4)
                        .map(|d| d.trim())
                        .filter(|d| !d.is_empty())
                        .map(str::to_owned);
                    entities.push((
                        lineno,
                        Entity {
                            id: EntityId::new(fields[1]),
                            kind,
                            name: fields[3].trim().to_owned(),
                            description,
                        },
                    ));
                }
                "T" => {
                    if fields.len() != 4 || fields[1..].iter().any(|f| f.is_empty()) {
                        return Err(Error::parse(
                            lineno,
                            "triple line needs `T<TAB>subject<TAB>predicate<TAB>object`",
                        ));
                    }
                    raw_triples.push((
                        lineno,
                        Triple {
                            subject: EntityId::new(fields[1]),
                            predicate: fields[2].to_owned(),
                            object: EntityId::new(fields[3]),
                        },
                    ));
                }
                other => {
                    return Err(Error::parse(lineno, format!("unknown record type `{other}`")));
                }
            }
        }
        if entities.is_empty() {
            return Err(Error::NoEntities);
        }
        for (lineno, e) in &entities {
            if e.kind == EntityKind::Item && e.name.is_empty() {
                return Err(Error::parse(*lineno, format!("item `{}` has an empty name", e.id)));
            }
        }
        let entities: Vec<Entity> = entities.into_iter().map(|(_, e)| e).collect();
        let known: BTreeSet<&EntityId> = entities.iter().map(|e| &e.id).collect();
        for (lineno, t) in &raw_triples {
            for id in [&t.subject, &t.object] {
                if !known.contains(id) {
                    return Err(Error::DanglingReference {
                        line: *lineno,
                        id: id.to_string(),
                    });
                }
            }
        }
        Self::from_parts(entities, raw_triples.into_iter().map(|(_, t)| t))
    }

    /// Builds a graph from already-validated parts. Triples are deduplicated.
    pub fn from_parts(
        mut entities: Vec<Entity>,
        triples: impl IntoIterator<Item = Triple>,
    ) -> Result<Self> {
        if entities.is_empty() {
            return Err(Error::NoEntities);
        }
        entities.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(entities.len());
        for (i, e) in entities.iter().enumerate() {
            if index.insert(e.id.clone(), i).is_some() {
                return Err(Error::DuplicateEntity(e.id.to_string()));
            }
        }
        let triples: BTreeSet<Triple> = triples.into_iter().collect();
        let mut outgoing = Adjacency::new();
        let mut incoming = Adjacency::new();
        for t in &triples {
            for id in [&t.subject, &t.object] {
                if !index.contains_key(id) {
                    return Err(Error::UnknownEntity(id.to_string()));
                }
            }
            outgoing
                .entry(t.subject.clone())
                .or_default()
                .entry(t.predicate.clone())
                .or_default()
                .insert(t.object.clone());
            incoming
                .entry(t.object.clone())
                .or_default()
                .entry(t.predicate.clone())
                .or_default()
                .insert(t.subject.clone());
        }
        let graph = KnowledgeGraph {
            entities,
            index,
            triples: triples.into_iter().collect(),
            outgoing,
            incoming,
        };
        log::debug!(
            "knowledge graph: {} entities, {} triples",
            graph.entity_count(),
            graph.triple_count()
        );
        Ok(graph)
    }

    /// Writes the graph back in the knowledge file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entities {
            out.push_str(&format!("E\t{}\t{}\t{}", e.id, e.kind.as_str(), e.name));
            if let Some(d) = &e.description {
                out.push('\t');
                out.push_str(d);
            }
            out.push('\n');
        }
        for t in &self.triples {
            out.push_str(&format!("T\t{}\t{}\t{}\n", t.subject, t.predicate, t.object));
        }
        out
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity(&self, id: &EntityId) -> Result<&Entity> {
        self.index
            .get(id)
            .map(|&i| &self.entities[i])
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    /// Position of `id` in the id-ordered entity list.
    pub fn position(&self, id: &EntityId) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.index.contains_key(id)
    }

    pub fn entities_of_kind(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(move |e| e.kind == kind)
    }

    /// All relation labels, in sorted order.
    pub fn predicates(&self) -> BTreeSet<&str> {
        self.triples.iter().map(|t| t.predicate.as_str()).collect()
    }

    /// Objects of `(e, r, ·)` triples.
    pub fn neighbors(&self, e: &EntityId, r: &str) -> Result<BTreeSet<EntityId>> {
        self.entity(e)?;
        Ok(self
            .outgoing
            .get(e)
            .and_then(|m| m.get(r))
            .cloned()
            .unwrap_or_default())
    }

    /// Subjects of `(·, r, e)` triples.
    pub fn incoming(&self, e: &EntityId, r: &str) -> Result<BTreeSet<EntityId>> {
        self.entity(e)?;
        Ok(self
            .incoming
            .get(e)
            .and_then(|m| m.get(r))
            .cloned()
            .unwrap_or_default())
    }

    /// Union of outgoing neighbors over every relation.
    pub fn all_neighbors(&self, e: &EntityId) -> Result<BTreeSet<EntityId>> {
        self.entity(e)?;
        Ok(self
            .outgoing
            .get(e)
            .map(|m| m.values().flatten().cloned().collect())
            .unwrap_or_default())
    }

    /// Outgoing and incoming neighbors over every relation.
    pub fn linked(&self, e: &EntityId) -> Result<BTreeSet<EntityId>> {
        let mut out = self.all_neighbors(e)?;
        if let Some(m) = self.incoming.get(e) {
            out.extend(m.values().flatten().cloned());
        }
        Ok(out)
    }

    pub(crate) fn outgoing_by_relation(&self, e: &EntityId) -> Option<&BTreeMap<String, BTreeSet<EntityId>>> {
        self.outgoing.get(e)
    }

    pub(crate) fn incoming_by_relation(&self, e: &EntityId) -> Option<&BTreeMap<String, BTreeSet<EntityId>>> {
        self.incoming.get(e)
    }
}

/// Single-parent category → item tree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Hierarchy {
    category_of: BTreeMap<EntityId, EntityId>,
    members_of: BTreeMap<EntityId, Vec<EntityId>>,
}

impl Hierarchy {
    /// Every `Item` must have exactly one `category_predicate` edge to a
    /// `Category` entity.
    pub fn build(graph: &KnowledgeGraph, category_predicate: &str) -> Result<Self> {
        let mut category_of = BTreeMap::new();
        let mut members_of: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();
        for item in graph.entities_of_kind(EntityKind::Item) {
            let categories: Vec<EntityId> = graph
                .neighbors(&item.id, category_predicate)?
                .into_iter()
                .filter(|c| {
                    graph
                        .entity(c)
                        .map(|e| e.kind == EntityKind::Category)
                        .unwrap_or(false)
                })
                .collect();
            match categories.as_slice() {
                [] => return Err(Error::MissingCategory(item.id.to_string())),
                [category] => {
                    category_of.insert(item.id.clone(), category.clone());
                    members_of
                        .entry(category.clone())
                        .or_default()
                        .push(item.id.clone());
                }
                _ => {
                    return Err(Error::MultipleCategories {
                        item: item.id.to_string(),
                        categories: categories.iter().map(ToString::to_string).collect(),
                    })
                }
            }
        }
        // Entities iterate in id order, so member lists are already sorted.
        Ok(Hierarchy {
            category_of,
            members_of,
        })
    }

    pub fn category_of(&self, item: &EntityId) -> Option<&EntityId> {
        self.category_of.get(item)
    }

    pub fn members_of(&self, category: &EntityId) -> Option<&[EntityId]> {
        self.members_of.get(category).map(Vec::as_slice)
    }

    /// Categories in id order.
    pub fn categories(&self) -> impl Iterator<Item = &EntityId> {
        self.members_of.keys()
    }

    /// Items in id order.
    pub fn items(&self) -> impl Iterator<Item = &EntityId> {
        self.category_of.keys()
    }

    pub fn category_count(&self) -> usize {
        self.members_of.len()
    }

    pub fn item_count(&self) -> usize {
        self.category_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members_of.is_empty()
    }

    /// Categories then items, the node set scored by hierarchical portraits.
    pub fn nodes(&self) -> impl Iterator<Item = &EntityId> {
        self.categories().chain(self.items())
    }

    pub fn is_category(&self, id: &EntityId) -> bool {
        self.members_of.contains_key(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Middle,
    Leaf,
}

/// Entities admissible at a tree layer for a dialog act.
///
/// | act       | middle                              | leaf                          |
/// |-----------|-------------------------------------|-------------------------------|
/// | Recommend | attributes/categories of mentions   | items under the parent        |
/// | Query     | concepts                            | attributes linked to concept  |
/// | Chat      | mentioned entities                  | all entities                  |
///
/// For the middle layer `parents` is the mentioned-entity set; for the
/// leaf layer it is the selected middle-layer node(s).
pub fn candidate_entities(
    graph: &KnowledgeGraph,
    hierarchy: &Hierarchy,
    act: DialogAct,
    layer: Layer,
    parents: &[EntityId],
) -> Result<Vec<EntityId>> {
    let mut out = BTreeSet::new();
    let parent_entities: Vec<&Entity> = parents
        .iter()
        .map(|p| graph.entity(p))
        .collect::<Result<_>>()?;
    match (act, layer) {
        (DialogAct::Recommend, Layer::Middle) => {
            for p in &parent_entities {
                if p.kind.is_attribute_like() {
                    out.insert(p.id.clone());
                } else if p.kind == EntityKind::Item {
                    for n in graph.all_neighbors(&p.id)? {
                        if graph.entity(&n)?.kind.is_attribute_like() {
                            out.insert(n);
                        }
                    }
                }
            }
        }
        (DialogAct::Recommend, Layer::Leaf) => {
            for p in &parent_entities {
                if let Some(members) = hierarchy.members_of(&p.id) {
                    out.extend(members.iter().cloned());
                } else {
                    for n in graph.linked(&p.id)? {
                        if graph.entity(&n)?.kind == EntityKind::Item {
                            out.insert(n);
                        }
                    }
                }
            }
        }
        (DialogAct::Query, Layer::Middle) => {
            out.extend(graph.entities_of_kind(EntityKind::Concept).map(|e| e.id.clone()));
        }
        (DialogAct::Query, Layer::Leaf) => {
            for p in &parent_entities {
                for n in graph.linked(&p.id)? {
                    if graph.entity(&n)?.kind.is_attribute_like() {
                        out.insert(n);
                    }
                }
            }
            if out.is_empty() {
                out.extend(graph.entities_of_kind(EntityKind::Attribute).map(|e| e.id.clone()));
            }
        }
        (DialogAct::Chat, Layer::Middle) => {
            out.extend(parent_entities.iter().map(|e| e.id.clone()));
        }
        (DialogAct::Chat, Layer::Leaf) => {
            out.extend(graph.entities().iter().map(|e| e.id.clone()));
        }
    }
    Ok(out.into_iter().collect())
}
