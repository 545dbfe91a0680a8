//! Deterministic synthetic bundle: six genres, ten items each, word
//! vectors with one block of dimensions per genre, and ReDial-format
//! dialogues in which every seeker moves from one genre to another
//! halfway through.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::embedding::WordEmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::Vector;

pub const ITEMS_PER_GENRE: usize = 10;
const BLOCK: usize = 4;
const RESIDUAL: usize = 16;

pub struct GenreSpec {
    pub id: &'static str,
    pub name: &'static str,
    /// Listed in the alias file; seekers use it to open a conversation.
    pub alias: &'static str,
    /// Descriptive words, never aliases, used for the second genre.
    pub words: [&'static str; 5],
}

pub const GENRES: [GenreSpec; 6] = [
    GenreSpec { id: "comedy", name: "Comedy", alias: "funny", words: ["hilarious", "laughs", "jokes", "goofy", "silly"] },
    GenreSpec { id: "horror", name: "Horror", alias: "frightening", words: ["creepy", "ghosts", "haunted", "blood", "screams"] },
    GenreSpec { id: "action", name: "Action", alias: "thrilling", words: ["explosions", "chases", "fights", "stunts", "heist"] },
    GenreSpec { id: "romance", name: "Romance", alias: "romantic", words: ["kisses", "dating", "wedding", "heartfelt", "couple"] },
    GenreSpec { id: "scifi", name: "Science Fiction", alias: "futuristic", words: ["spaceships", "aliens", "robots", "planets", "galaxy"] },
    GenreSpec { id: "drama", name: "Drama", alias: "serious", words: ["tearjerker", "grief", "emotional", "struggle", "courtroom"] },
];

const GENERIC: [&str; 6] = ["movie", "movies", "film", "films", "story", "watch"];
const SYLLABLES: [&str; 16] = ["zor", "val", "kin", "dra", "mex", "tul", "por", "fen", "qua", "rix", "bel", "nok", "sar", "vim", "lop", "tez"];

pub fn dim() -> usize {
    GENRES.len() * BLOCK + RESIDUAL
}

/// Text contents of every bundle file.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub knowledge: String,
    pub vectors: String,
    pub aliases: String,
    pub dialogues: String,
    pub movie_map: String,
    pub config: String,
}

struct Item {
    id: String,
    name: String,
    marker: String,
    genre: usize,
}

/// Components in the genre's block drawn from `strength`; with a facet,
/// that one dimension of the block is raised to dominate the others.
fn genre_vector(rng: &mut ChaCha8Rng, genre: usize, strength: (f64, f64), facet: Option<usize>, residual: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim()];
    for k in 0..BLOCK {
        v[genre * BLOCK + k] = rng.random_range(strength.0..strength.1);
    }
    if let Some(f) = facet {
        v[genre * BLOCK + f % BLOCK] = rng.random_range(0.8..1.0);
    }
    if residual > 0.0 {
        for k in 0..RESIDUAL {
            v[GENRES.len() * BLOCK + k] = rng.random_range(0.0..residual);
        }
    }
    v
}

fn title(rng: &mut ChaCha8Rng, taken: &mut Vec<String>) -> String {
    loop {
        let mut word = || {
            let a = SYLLABLES[rng.random_range(0..SYLLABLES.len())];
            let b = SYLLABLES[rng.random_range(0..SYLLABLES.len())];
            let mut w = format!("{a}{b}");
            w[..1].make_ascii_uppercase();
            w
        };
        let t = format!("{} {}", word(), word());
        if !taken.contains(&t) {
            taken.push(t.clone());
            return t;
        }
    }
}

impl SyntheticBundle {
    pub fn generate(seed: u64, dialogues: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors: HashMap<String, Vector> = HashMap::new();
        for (g, spec) in GENRES.iter().enumerate() {
            vectors.insert(spec.alias.to_owned(), Vector::new(genre_vector(&mut rng, g, (0.8, 1.0), None, 0.0)));
            for (f, w) in spec.words.iter().enumerate() {
                vectors.insert((*w).to_owned(), Vector::new(genre_vector(&mut rng, g, (0.1, 0.3), Some(f), 0.05)));
            }
        }
        for w in GENERIC {
            let v: Vec<f64> = (0..dim()).map(|_| rng.random_range(0.0..0.1)).collect();
            vectors.insert(w.to_owned(), Vector::new(v));
        }

        let mut knowledge = String::from("# synthetic six-genre bundle\nE\tgenre\tConcept\tgenre\n");
        for spec in &GENRES {
            let _ = writeln!(knowledge, "E\t{}\tCategory\t{}", spec.id, spec.name);
            let _ = writeln!(knowledge, "T\t{}\tis_a\tgenre", spec.id);
        }
        let mut items = Vec::new();
        let mut taken = Vec::new();
        for (g, spec) in GENRES.iter().enumerate() {
            for i in 0..ITEMS_PER_GENRE {
                let id = format!("{}_{:02}", spec.id, i);
                let name = title(&mut rng, &mut taken);
                // two item-specific words with a weak genre component
                let own: Vec<String> = (0..2).map(|k| format!("{}{}x{}", spec.id, i, k)).collect();
                for w in &own {
                    let mut v = genre_vector(&mut rng, g, (0.0, 0.2), None, 0.0);
                    let r = rng.random_range(0..RESIDUAL);
                    v[GENRES.len() * BLOCK + r] = rng.random_range(0.5..1.0);
                    vectors.insert(w.clone(), Vector::new(v));
                }
                let mut picks: Vec<&str> = spec.words.to_vec();
                picks.shuffle(&mut rng);
                let description = format!("a {} and {} film about {} and {}", picks[0], picks[1], own[0], own[1]);
                let _ = writeln!(knowledge, "E\t{id}\tItem\t{name}\t{description}");
                let _ = writeln!(knowledge, "T\t{id}\thas_genre\t{}", spec.id);
                items.push(Item { marker: format!("{}", 1000 + items.len()), id, name, genre: g });
            }
        }

        let mut aliases = String::new();
        let mut movie_map = String::from("marker_id,entity_id\n");
        for spec in &GENRES {
            let _ = writeln!(aliases, "{}\t{}", spec.alias, spec.id);
        }
        for item in &items {
            let _ = writeln!(movie_map, "{},{}", item.marker, item.id);
        }

        let mut lines = String::new();
        for d in 0..dialogues {
            let a = rng.random_range(0..GENRES.len());
            let mut b = rng.random_range(0..GENRES.len() - 1);
            if b >= a {
                b += 1;
            }
            let mut pool_a: Vec<&Item> = items.iter().filter(|i| i.genre == a).collect();
            let mut pool_b: Vec<&Item> = items.iter().filter(|i| i.genre == b).collect();
            pool_a.shuffle(&mut rng);
            pool_b.shuffle(&mut rng);
            let (sa, sb) = (&GENRES[a], &GENRES[b]);
            let mut w = |spec: &GenreSpec| spec.words[rng.random_range(0..spec.words.len())];
            let wa = w(sa);
            let (wb1, wb2, wb3, wb4, wb5) = (w(sb), w(sb), w(sb), w(sb), w(sb));
            // one explicit turn and one weak turn for the first genre, then
            // the second genre, described but never named
            let seeker = [
                format!("hi! i really like {} movies", sa.alias),
                format!("yes i liked @{} a lot", pool_a[0].marker),
                format!("sure, but lately i want {} and {} films", wb1, wb2),
                format!("i am in the mood for {} {} stories", wb3, wb4),
                format!("i saw @{} and enjoyed the {} parts", pool_b[0].marker, wb5),
                format!("thanks! anything else, maybe less {}?", wa),
            ];
            let recommender = [
                format!("have you seen @{}?", pool_a[1].marker),
                format!("then try @{} or @{}", pool_a[2].marker, pool_a[3].marker),
                format!("how about @{}?", pool_b[1].marker),
                format!("you might like @{}", pool_b[2].marker),
                format!("@{} is another good one", pool_b[3].marker),
                format!("@{} then", pool_b[4].marker),
            ];
            let mut messages = Vec::new();
            for (s, r) in seeker.iter().zip(&recommender) {
                messages.push(json!({"senderWorkerId": 1, "text": s}));
                messages.push(json!({"senderWorkerId": 2, "text": r}));
            }
            let mentions: serde_json::Map<String, serde_json::Value> = pool_a
                .iter()
                .take(4)
                .chain(pool_b.iter().take(5))
                .map(|i| (i.marker.clone(), json!(i.name)))
                .collect();
            let conv = json!({
                "conversationId": format!("syn{d:03}"),
                "initiatorWorkerId": 1,
                "respondentWorkerId": 2,
                "movieMentions": mentions,
                "messages": messages,
            });
            lines.push_str(&conv.to_string());
            lines.push('\n');
        }

        let table = WordEmbeddingTable::from_map(dim(), vectors).expect("synthetic vectors share a dimension");
        let mut buf = Vec::new();
        table.write_to(&mut buf).expect("writing to memory");
        let config = format!(
            "seed = {seed}\n\n[paths]\ngraph = \"knowledge.tsv\"\nvectors = \"vectors.txt\"\naliases = \"aliases.tsv\"\n\
             dialogues = \"dialogues.jsonl\"\nmovie_map = \"movie_map.csv\"\n\n[model]\nlayers = 2\n\n[reasoning]\ntau = 0.0\n"
        );
        SyntheticBundle {
            knowledge,
            vectors: String::from_utf8(buf).expect("vectors are utf-8"),
            aliases,
            dialogues: lines,
            movie_map,
            config,
        }
    }

    /// Writes `knowledge.tsv`, `vectors.txt`, `aliases.tsv`,
    /// `dialogues.jsonl`, `movie_map.csv` and `config.toml`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, contents) in [
            ("knowledge.tsv", &self.knowledge),
            ("vectors.txt", &self.vectors),
            ("aliases.tsv", &self.aliases),
            ("dialogues.jsonl", &self.dialogues),
            ("movie_map.csv", &self.movie_map),
            ("config.toml", &self.config),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{Hierarchy, KnowledgeGraph};

    #[test]
    fn deterministic_and_well_formed() {
        let a = SyntheticBundle::generate(7, 5);
        assert_eq!(a, SyntheticBundle::generate(7, 5));
        assert_ne!(a.dialogues, SyntheticBundle::generate(8, 5).dialogues);
        let g = KnowledgeGraph::parse(&a.knowledge).unwrap();
        let h = Hierarchy::build(&g, "has_genre").unwrap();
        assert_eq!((h.category_count(), h.item_count()), (6, 60));
        let w = WordEmbeddingTable::parse(&a.vectors).unwrap();
        assert_eq!(w.dim(), dim());
        assert_eq!(a.dialogues.lines().count(), 5);
    }
}
