//! Tokenization and the content-word filter used for text vectors.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{self, Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Lowercases and splits on anything that is not alphanumeric or an
/// apostrophe. Leading/trailing apostrophes are trimmed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Lowercase and collapse runs of whitespace.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartOfSpeech {
    Noun,
    Adj,
    Other,
}

/// Approximates "nouns and adjectives": drop stopwords, and when a POS
/// lexicon is present keep only tokens tagged NOUN or ADJ.
#[derive(Debug, Clone)]
pub struct TokenFilter {
    stopwords: HashSet<String>,
    pos: Option<HashMap<String, PartOfSpeech>>,
}

impl Default for TokenFilter {
    fn default() -> Self {
        TokenFilter::with_stopwords(BUNDLED_STOPWORDS.lines())
    }
}

impl TokenFilter {
    /// A filter that keeps every token.
    pub fn pass_all() -> Self {
        TokenFilter {
            stopwords: HashSet::new(),
            pos: None,
        }
    }

    pub fn with_stopwords<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        TokenFilter {
            stopwords: words
                .into_iter()
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
            pos: None,
        }
    }

    pub fn load_stopwords(path: &Path) -> Result<Self> {
        let text = error::read_to_string(path)?;
        Ok(TokenFilter::with_stopwords(text.lines()))
    }

    /// Reads `token<TAB>POS` lines.
    pub fn load_pos_lexicon(mut self, path: &Path) -> Result<Self> {
        let text = error::read_to_string(path)?;
        self.pos = Some(parse_pos_lexicon(&text)?);
        Ok(self)
    }

    pub fn with_pos_lexicon(mut self, lexicon: HashMap<String, PartOfSpeech>) -> Self {
        self.pos = Some(lexicon);
        self
    }

    pub fn keeps(&self, token: &str) -> bool {
        if self.stopwords.contains(token) {
            return false;
        }
        match &self.pos {
            None => true,
            Some(lex) => matches!(
                lex.get(token),
                Some(PartOfSpeech::Noun | PartOfSpeech::Adj)
            ),
        }
    }

    pub fn content_tokens(&self, text: &str) -> Vec<String> {
        tokenize(text).into_iter().filter(|t| self.keeps(t)).collect()
    }
}

pub fn parse_pos_lexicon(text: &str) -> Result<HashMap<String, PartOfSpeech>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (token, tag) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected `token<TAB>POS`"))?;
        let tag = match tag.trim().to_ascii_uppercase().as_str() {
            "NOUN" => PartOfSpeech::Noun,
            "ADJ" => PartOfSpeech::Adj,
            _ => PartOfSpeech::Other,
        };
        out.insert(token.trim().to_lowercase(), tag);
    }
    Ok(out)
}
