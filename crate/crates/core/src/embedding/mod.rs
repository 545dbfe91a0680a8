//! Word vectors, text and hierarchy-node vectors, and cosine similarity.

mod rgcn;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{self, Error, Result};
use crate::knowledge::{EntityId, Hierarchy, KnowledgeGraph};
use crate::linalg::Vector;
use crate::text::TokenFilter;

pub use rgcn::{rgcn_entity_embedding, rgcn_forward, Activation, EntityEmbeddings, RgcnLayer, RgcnParameters};

#[derive(Debug, Clone)]
enum Source {
    File(HashMap<String, Vector>),
    Hashed { seed: u64 },
}

/// Token → vector lookup. Tokens are lowercased on load and lookup.
#[derive(Debug, Clone)]
pub struct WordEmbeddingTable {
    dim: usize,
    source: Source,
}

impl WordEmbeddingTable {
    /// A table that answers every token with [`hashed_word_vector`].
    pub fn hashed(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        WordEmbeddingTable {
            dim,
            source: Source::Hashed { seed },
        }
    }

    pub fn from_map(dim: usize, vectors: HashMap<String, Vector>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("word vector dimension"));
        }
        let mut normalized = HashMap::with_capacity(vectors.len());
        for (token, v) in vectors {
            v.check_dim(dim)?;
            normalized.entry(token.to_lowercase()).or_insert(v);
        }
        Ok(WordEmbeddingTable {
            dim,
            source: Source::File(normalized),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = error::read_to_string(path)?;
        Self::parse(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Parses the word2vec text format: a `<count> <dim>` header, then one
    /// `token c1 .. cd` row per token.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Empty("word vector file"))?;
        let mut parts = header.split_whitespace();
        let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(d), None) => (
                c.parse::<usize>().map_err(|_| Error::parse(1, "bad vocabulary count"))?,
                d.parse::<usize>().map_err(|_| Error::parse(1, "bad dimension"))?,
            ),
            _ => return Err(Error::parse(1, "header must be `<vocab_count> <dim>`")),
        };
        if dim == 0 {
            return Err(Error::parse(1, "dimension must be positive"));
        }
        let mut vectors = HashMap::with_capacity(count);
        let mut rows = 0usize;
        for (i, line) in lines {
            let lineno = i + 1;
            rows += 1;
            if rows > count {
                return Err(Error::parse(lineno, format!("more rows than the declared {count}")));
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("nonblank line has a field");
            let components = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(lineno, format!("non-numeric component `{f}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if components.len() != dim {
                return Err(Error::parse(
                    lineno,
                    format!("row has {} components, header declares {dim}", components.len()),
                ));
            }
            vectors.entry(token.to_lowercase()).or_insert(Vector::new(components));
        }
        if rows < count {
            return Err(Error::TruncatedVectors {
                declared: count,
                found: rows,
            });
        }
        Self::from_map(dim, vectors)
    }

    /// Writes the word2vec text format with tokens in sorted order.
    /// Hashed tables have no finite vocabulary and write only a header.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        match &self.source {
            Source::Hashed { .. } => writeln!(w, "0 {}", self.dim),
            Source::File(map) => {
                writeln!(w, "{} {}", map.len(), self.dim)?;
                let sorted: BTreeMap<_, _> = map.iter().collect();
                for (token, v) in sorted {
                    let mut line = token.clone();
                    for x in v.iter() {
                        let _ = write!(line, " {x}");
                    }
                    writeln!(w, "{line}")?;
                }
                Ok(())
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vocabulary size; `None` for hashed tables.
    pub fn vocab_size(&self) -> Option<usize> {
        match &self.source {
            Source::File(map) => Some(map.len()),
            Source::Hashed { .. } => None,
        }
    }

    pub fn is_hashed(&self) -> bool {
        matches!(self.source, Source::Hashed { .. })
    }

    pub fn get(&self, token: &str) -> Option<Vector> {
        match &self.source {
            Source::File(map) => map.get(&token.to_lowercase()).cloned(),
            Source::Hashed { seed } => Some(hashed_word_vector(&token.to_lowercase(), self.dim, *seed)),
        }
    }
}

/// Deterministic unit vector for `(token, dim, seed)`: SHA-256 of the seed
/// and token seeds a ChaCha8 stream of uniform components.
pub fn hashed_word_vector(token: &str, dim: usize, seed: u64) -> Vector {
    assert!(dim > 0, "dimension must be positive");
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(token.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    let v = Vector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    if v.is_zero() {
        let mut unit = vec![0.0; dim];
        unit[0] = 1.0;
        return Vector::new(unit);
    }
    v.normalized()
}

/// Mean word vector of a text. `used == 0` marks the flagged-zero result.
#[derive(Debug, Clone, PartialEq)]
pub struct TextVector {
    pub vector: Vector,
    pub used: usize,
}

impl TextVector {
    pub fn is_empty(&self) -> bool {
        self.used == 0
    }
}

pub fn text_vector(text: &str, table: &WordEmbeddingTable, filter: &TokenFilter) -> TextVector {
    let mut acc = Vector::zeros(table.dim());
    let mut used = 0usize;
    for token in filter.content_tokens(text) {
        if let Some(v) = table.get(&token) {
            acc.add_scaled(&v, 1.0);
            used += 1;
        }
    }
    if used > 0 {
        acc = acc.scale(1.0 / used as f64);
    }
    TextVector { vector: acc, used }
}

/// Vector of an item node: the text vector of its description.
pub fn item_node_vector(
    item: &EntityId,
    graph: &KnowledgeGraph,
    table: &WordEmbeddingTable,
    filter: &TokenFilter,
) -> Result<TextVector> {
    let entity = graph.entity(item)?;
    Ok(match entity.description.as_deref() {
        Some(d) => text_vector(d, table, filter),
        None => TextVector {
            vector: Vector::zeros(table.dim()),
            used: 0,
        },
    })
}

/// Componentwise mean of the member item vectors.
pub fn category_node_vector(
    category: &EntityId,
    hierarchy: &Hierarchy,
    items: &NodeEmbeddingTable,
) -> Result<Vector> {
    let members = hierarchy
        .members_of(category)
        .ok_or_else(|| Error::EmptyCategory(category.to_string()))?;
    let vectors = members
        .iter()
        .map(|m| items.get(m).ok_or_else(|| Error::UnknownEntity(m.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Vector::mean(vectors).ok_or_else(|| Error::EmptyCategory(category.to_string()))
}

/// Vectors for every item and category node of a hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddingTable {
    dim: usize,
    vectors: BTreeMap<EntityId, Vector>,
}

impl NodeEmbeddingTable {
    /// Items get description vectors. An item whose description yields no
    /// known token falls back to its name, then to a hashed vector of its
    /// id, so every node has a nonzero vector. Categories are member means.
    pub fn build(
        graph: &KnowledgeGraph,
        hierarchy: &Hierarchy,
        table: &WordEmbeddingTable,
        filter: &TokenFilter,
        seed: u64,
    ) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        for item in hierarchy.items() {
            let mut tv = item_node_vector(item, graph, table, filter)?;
            if tv.is_empty() {
                tv = text_vector(&graph.entity(item)?.name, table, filter);
            }
            let v = if tv.is_empty() {
                log::debug!("item {item} has no usable text; using hashed vector");
                hashed_word_vector(item.as_str(), table.dim(), seed)
            } else {
                tv.vector
            };
            vectors.insert(item.clone(), v);
        }
        let mut out = NodeEmbeddingTable {
            dim: table.dim(),
            vectors,
        };
        out.rebuild_categories(hierarchy)?;
        Ok(out)
    }

    /// Table from explicit item vectors; category vectors are derived.
    pub fn from_item_vectors(
        hierarchy: &Hierarchy,
        items: BTreeMap<EntityId, Vector>,
    ) -> Result<Self> {
        let dim = items
            .values()
            .next()
            .map(Vector::dim)
            .ok_or(Error::Empty("item vectors"))?;
        for v in items.values() {
            v.check_dim(dim)?;
        }
        let mut out = NodeEmbeddingTable { dim, vectors: items };
        out.rebuild_categories(hierarchy)?;
        Ok(out)
    }

    /// Recomputes every category vector as the mean of its members.
    pub fn rebuild_categories(&mut self, hierarchy: &Hierarchy) -> Result<()> {
        let mut categories = Vec::with_capacity(hierarchy.category_count());
        for c in hierarchy.categories() {
            categories.push((c.clone(), category_node_vector(c, hierarchy, self)?));
        }
        self.vectors.extend(categories);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, id: &EntityId) -> Option<&Vector> {
        self.vectors.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, &Vector)> {
        self.vectors.iter()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f64> {
    let dot = a.dot(b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
