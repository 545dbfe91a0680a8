#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hiercrs::embedding::{Activation, NodeEmbeddingTable, RgcnLayer, RgcnParameters};
use hiercrs::ingest::{build_engine, load_dialogues, EngineConfig, ReplayDialogue};
use hiercrs::linalg::{Matrix, Vector};
use hiercrs::synthetic::SyntheticBundle;
use hiercrs::{Engine, EntityId, Hierarchy, KnowledgeGraph};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

pub const GENRE_SHIFT_SCRIPT: [&str; 3] = [
    "i love to watch funny movies",
    "yes, i love adam sandler",
    "just watched the mask last night! there is a new one Son of the Mask. i like some scary movie",
];

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/genre_shift")
}

pub fn genre_shift_config() -> EngineConfig {
    EngineConfig::load(&fixture_dir().join("config.toml")).expect("fixture config")
}

pub fn genre_shift_engine() -> Engine {
    build_engine(&genre_shift_config()).expect("fixture engine")
}

/// Synthetic bundle written to a temporary directory that lives as long
/// as the returned guard.
pub struct Synthetic {
    pub dir: TempDir,
    pub config: EngineConfig,
    pub engine: Engine,
    pub dialogues: Vec<ReplayDialogue>,
}

pub fn synthetic(seed: u64, dialogues: usize) -> Synthetic {
    let dir = tempfile::tempdir().expect("tempdir");
    SyntheticBundle::generate(seed, dialogues).write_to(dir.path()).expect("write bundle");
    let config = EngineConfig::load(&dir.path().join("config.toml")).expect("bundle config");
    let engine = build_engine(&config).expect("bundle engine");
    let (dialogues, _) = load_dialogues(&config, engine.graph(), None).expect("bundle dialogues");
    Synthetic { dir, config, engine, dialogues }
}

pub const FIVE_NODES: &str = "E\ta\tItem\tA\n\
E\tb\tItem\tB\n\
E\tc\tCategory\tC\n\
E\td\tAttribute\tD\n\
E\te\tAttribute\tE\n\
T\ta\thas_genre\tc\n\
T\tb\thas_genre\tc\n\
T\ta\tstarring\td\n\
T\ta\tstarring\te\n\
T\tb\tstarring\te\n\
T\td\tknows\te\n";


pub fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    Matrix::from_rows((0..d).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()).unwrap()
}


pub fn dense(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c))
}


/// H' = act(H W0^T + sum_r D_r^-1 A_r H W_r^T) with one adjacency matrix
/// per relation and per inverse relation.
pub fn dense_rgcn(graph: &KnowledgeGraph, params: &RgcnParameters) -> Vec<Vec<f64>> {
    let n = graph.entity_count();
    let d = params.dim;
    let pos = |id: &EntityId| graph.position(id).unwrap();
    let mut adjacency: BTreeMap<String, DMatrix<f64>> = BTreeMap::new();
    for t in graph.triples() {
        let (s, o) = (pos(&t.subject), pos(&t.object));
        adjacency.entry(t.predicate.clone()).or_insert_with(|| DMatrix::zeros(n, n))[(s, o)] = 1.0;
        if params.inverse_relations {
            adjacency.entry(format!("~{}", t.predicate)).or_insert_with(|| DMatrix::zeros(n, n))[(o, s)] = 1.0;
        }
    }
    for a in adjacency.values_mut() {
        for mut row in a.row_iter_mut() {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row /= sum;
            }
        }
    }
    let mut h = DMatrix::from_fn(n, d, |i, k| params.base[i][k]);
    for layer in &params.layers {
        let mut next = &h * dense(&layer.self_weight).transpose();
        for (r, a) in &adjacency {
            next += a * &h * dense(&layer.relations[r]).transpose();
        }
        h = next.map(|x| match params.activation {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        });
    }
    (0..n).map(|i| h.row(i).iter().copied().collect()).collect()
}


pub fn random_params(graph: &KnowledgeGraph, d: usize, layers: usize, activation: Activation, seed: u64) -> RgcnParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = (0..graph.entity_count())
        .map(|_| Vector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let layers = (0..layers)
        .map(|_| {
            let mut relations = BTreeMap::new();
            for p in graph.predicates() {
                relations.insert(p.to_owned(), random_matrix(&mut rng, d));
                relations.insert(format!("~{p}"), random_matrix(&mut rng, d));
            }
            RgcnLayer { self_weight: random_matrix(&mut rng, d), relations }
        })
        .collect();
    RgcnParameters { dim: d, layers, base, activation, inverse_relations: true }
}


pub fn dense_attention(members: &[Vec<f64>], w_p: &DMatrix<f64>, v_p: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let logits: Vec<f64> = members
        .iter()
        .map(|h| v_p.dot(&(w_p * DVector::from_column_slice(h)).map(f64::tanh)))
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    let alpha: Vec<f64> = exp.iter().map(|e| e / z).collect();
    let d = members[0].len();
    let p = (0..d).map(|k| members.iter().zip(&alpha).map(|(h, a)| a * h[k]).sum()).collect();
    (alpha, p)
}


pub const PREDICATES: [&str; 3] = ["starring", "similar_to", "produced_in"];


/// Knowledge text with `categories` categories, one `has_genre` edge per
/// item and a handful of extra attribute and item triples.
pub fn random_graph_text(categories: usize, item_genres: &[usize], attributes: usize, extra: &[(usize, usize, usize)]) -> String {
    let mut out = String::new();
    for c in 0..categories {
        out.push_str(&format!("E\tcat{c}\tCategory\tCat {c}\n"));
    }
    for a in 0..attributes {
        out.push_str(&format!("E\tattr{a}\tAttribute\tAttr {a}\n"));
    }
    for (i, g) in item_genres.iter().enumerate() {
        out.push_str(&format!("E\titem{i}\tItem\tItem {i}\titem number {i}\n"));
        out.push_str(&format!("T\titem{i}\thas_genre\tcat{}\n", g % categories));
    }
    if !item_genres.is_empty() && attributes > 0 {
        for (s, p, o) in extra {
            out.push_str(&format!(
                "T\titem{}\t{}\tattr{}\n",
                s % item_genres.len(),
                PREDICATES[p % PREDICATES.len()],
                o % attributes
            ));
        }
    }
    out
}


pub fn graph_strategy() -> impl Strategy<Value = String> {
    (1usize..7, prop::collection::vec(0usize..7, 0..=100), 0usize..6, prop::collection::vec((0usize..100, 0usize..3, 0usize..6), 0..40))
        .prop_map(|(c, items, a, extra)| random_graph_text(c, &items, a, &extra))
}


/// Largest componentwise gap between a category vector and the mean of
/// its members.
pub fn member_mean_gap(h: &Hierarchy, nodes: &NodeEmbeddingTable) -> f64 {
    let mut worst = 0.0f64;
    for c in h.categories() {
        let members = h.members_of(c).unwrap();
        let cat = nodes.get(c).unwrap();
        for k in 0..nodes.dim() {
            let mean: f64 = members.iter().map(|m| nodes.get(m).unwrap()[k]).sum::<f64>() / members.len() as f64;
            worst = worst.max((cat[k] - mean).abs());
        }
    }
    worst
}

/// Checks that the hierarchy partitions the graph's items.
pub fn partition_holds(graph: &KnowledgeGraph, h: &Hierarchy) -> Result<(), String> {
    let items: std::collections::BTreeSet<&EntityId> = graph
        .entities()
        .iter()
        .filter(|e| e.kind == hiercrs::knowledge::EntityKind::Item)
        .map(|e| &e.id)
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    for c in h.categories() {
        for m in h.members_of(c).unwrap() {
            if !seen.insert(m.clone()) {
                return Err(format!("{m} in two categories"));
            }
            if h.category_of(m) != Some(c) {
                return Err(format!("{m} maps to the wrong category"));
            }
        }
    }
    if seen.len() != items.len() || h.item_count() != items.len() {
        return Err(format!("{} members for {} items", seen.len(), items.len()));
    }
    Ok(())
}
