//! Recommendation and generation metrics, and middle-layer transition
//! matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::EntityId;

/// A ranking produced at one evaluated turn and the gold items for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecommendation {
    pub dialogue: String,
    pub turn_index: usize,
    pub ranked: Vec<EntityId>,
    pub gold: Vec<EntityId>,
}

/// Mean over instances of `|gold ∩ top-k| / |gold|`.
pub fn recall_at_k(instances: &[RankedRecommendation], k: usize) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::Empty("recall instances"));
    }
    if k == 0 {
        return Err(Error::Config { key: "k".into(), message: "must be at least 1".into() });
    }
    let mut total = 0.0;
    for inst in instances {
        if inst.gold.is_empty() {
            return Err(Error::Empty("gold items"));
        }
        let top: HashSet<&EntityId> = inst.ranked.iter().take(k).collect();
        let gold: BTreeSet<&EntityId> = inst.gold.iter().collect();
        let hits = gold.iter().filter(|g| top.contains(*g)).count();
        total += hits as f64 / gold.len() as f64;
    }
    Ok(total / instances.len() as f64)
}

/// Unique recommended items over the size of the item universe.
pub fn coverage<'a>(
    recommended: impl IntoIterator<Item = &'a EntityId>,
    universe: &BTreeSet<EntityId>,
) -> Result<f64> {
    if universe.is_empty() {
        return Err(Error::Empty("item universe"));
    }
    let mut unique = BTreeSet::new();
    for r in recommended {
        if !universe.contains(r) {
            return Err(Error::OutsideUniverse(r.to_string()));
        }
        unique.insert(r);
    }
    Ok(unique.len() as f64 / universe.len() as f64)
}

fn ngrams(tokens: &[&str], n: usize) -> Vec<Vec<String>> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.iter().map(|t| t.to_string()).collect()).collect()
}

/// Unique n-grams over total n-grams, pooled across utterances. N-grams
/// do not span utterance boundaries.
pub fn distinct_n<S: AsRef<str>>(texts: &[S], n: usize) -> f64 {
    let mut total = 0usize;
    let mut unique = HashSet::new();
    for t in texts {
        let tokens: Vec<&str> = t.as_ref().split_whitespace().collect();
        for g in ngrams(&tokens, n) {
            total += 1;
            unique.insert(g);
        }
    }
    if total == 0 {
        0.0
    } else {
        unique.len() as f64 / total as f64
    }
}

fn counts(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut out = HashMap::new();
    for g in ngrams(tokens, n) {
        *out.entry(g).or_insert(0) += 1;
    }
    out
}

/// Corpus BLEU-4 with uniform weights and brevity penalty. A higher order
/// with no matches is smoothed to `1 / (total + 1)`; no unigram matches
/// gives 0.
pub fn bleu<S: AsRef<str>, T: AsRef<str>>(hypotheses: &[S], references: &[T]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch(hypotheses.len(), references.len()));
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let h: Vec<&str> = h.as_ref().split_whitespace().collect();
        let r: Vec<&str> = r.as_ref().split_whitespace().collect();
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=4 {
            let hc = counts(&h, n);
            let rc = counts(&r, n);
            for (g, c) in &hc {
                matched[n - 1] += (*c).min(rc.get(g).copied().unwrap_or(0));
                total[n - 1] += c;
            }
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    if matched[0] == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let p = if matched[n] == 0 {
            1.0 / (total[n] as f64 + 1.0)
        } else {
            matched[n] as f64 / total[n] as f64
        };
        log_sum += p.ln() / 4.0;
    }
    let bp = if hyp_len >= ref_len { 1.0 } else { (1.0 - ref_len as f64 / hyp_len as f64).exp() };
    Ok(bp * log_sum.exp())
}

/// Harmonic mean of unigram precision and recall over token multisets.
pub fn token_f1(hypothesis: &str, reference: &str) -> f64 {
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let hc = counts(&h, 1);
    let rc = counts(&r, 1);
    let common: usize = hc.iter().map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0))).sum();
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / h.len() as f64;
    let rec = common as f64 / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

/// Row-normalized counts of consecutive middle-layer selections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    pub probabilities: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    /// Pools consecutive pairs across sequences. `labels` fixes the row
    /// order; labels seen in the data but not listed are appended sorted.
    pub fn from_sequences<S: AsRef<str>>(sequences: &[Vec<S>], labels: &[String]) -> Self {
        let mut all: Vec<String> = labels.to_vec();
        let extra: BTreeSet<&str> = sequences
            .iter()
            .flatten()
            .map(AsRef::as_ref)
            .filter(|l| !labels.iter().any(|x| x == l))
            .collect();
        all.extend(extra.into_iter().map(str::to_owned));
        let index: HashMap<&str, usize> = all.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let n = all.len();
        let mut counts = vec![vec![0usize; n]; n];
        for seq in sequences {
            for w in seq.windows(2) {
                counts[index[w[0].as_ref()]][index[w[1].as_ref()]] += 1;
            }
        }
        let probabilities = counts
            .iter()
            .map(|row| {
                let sum: usize = row.iter().sum();
                row.iter().map(|c| if sum == 0 { 0.0 } else { *c as f64 / sum as f64 }).collect()
            })
            .collect();
        TransitionMatrix { labels: all, counts, probabilities }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Fraction of all transitions that change the selection.
    pub fn off_diagonal_mass(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diagonal: usize = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        (total - diagonal) as f64 / total as f64
    }

    pub fn probability(&self, from: &str, to: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == from)?;
        let j = self.labels.iter().position(|l| l == to)?;
        Some(self.probabilities[i][j])
    }

    /// CSV with a header row and a leading column of labels.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.probabilities) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|p| format!("{p}")));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<transition csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleCounts {
    pub recall_turns: usize,
    pub recommended_items: usize,
    pub generated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: String,
    /// Keyed by K.
    pub recall: BTreeMap<usize, f64>,
    pub coverage: f64,
    pub bleu: f64,
    pub bleu_100: f64,
    pub distinct: [f64; 3],
    pub f1: f64,
    pub off_diagonal_mass: f64,
    pub samples: SampleCounts,
}

impl MetricsReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned columns: recommendation block then generation block.
    pub fn table(reports: &[&MetricsReport]) -> String {
        format!("{}\n{}", Self::recommendation_table(reports), Self::generation_table(reports))
    }

    /// Recall@K, coverage and off-diagonal transition mass, one row per report.
    pub fn recommendation_table(reports: &[&MetricsReport]) -> String {
        let ks: BTreeSet<usize> = reports.iter().flat_map(|r| r.recall.keys().copied()).collect();
        let mut out = String::new();
        let mut header = format!("{:<14}", "Model");
        for k in &ks {
            let _ = write!(header, "{:>8}", format!("R@{k}"));
        }
        let _ = write!(header, "{:>8}{:>8}", "Cov.", "Trans.");
        let _ = writeln!(out, "{header}");
        for r in reports {
            let mut line = format!("{:<14}", r.mode);
            for k in &ks {
                let _ = write!(line, "{:>8.2}", 100.0 * r.recall.get(k).copied().unwrap_or(0.0));
            }
            let _ = write!(line, "{:>8.2}{:>8.3}", 100.0 * r.coverage, r.off_diagonal_mass);
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// BLEU, distinct-1/2/3 and F1, one row per report.
    pub fn generation_table(reports: &[&MetricsReport]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14}{:>8}{:>8}{:>8}{:>8}{:>8}", "Model", "BLEU", "dist-1", "dist-2", "dist-3", "F1");
        for r in reports {
            let _ = writeln!(
                out,
                "{:<14}{:>8.2}{:>8.3}{:>8.3}{:>8.3}{:>8.3}",
                r.mode, r.bleu_100, r.distinct[0], r.distinct[1], r.distinct[2], r.f1
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(xs: &[&str]) -> Vec<EntityId> {
        xs.iter().map(|x| EntityId::from(*x)).collect()
    }

    fn inst(ranked: &[&str], gold: &[&str]) -> RankedRecommendation {
        RankedRecommendation { dialogue: "d".into(), turn_index: 0, ranked: ids(ranked), gold: ids(gold) }
    }

    #[test]
    fn recall_examples() {
        let i = [inst(&["B", "A", "C"], &["A"])];
        assert_eq!(recall_at_k(&i, 1).unwrap(), 0.0);
        assert_eq!(recall_at_k(&i, 10).unwrap(), 1.0);
        assert!(recall_at_k(&[], 1).is_err());
    }

    #[test]
    fn coverage_examples() {
        let universe: BTreeSet<EntityId> = (0..20).map(|i| EntityId::new(format!("i{i}"))).collect();
        let rec = ids(&["i1", "i2", "i2", "i3"]);
        assert_eq!(coverage(&rec, &universe).unwrap(), 0.15);
        assert_eq!(coverage(&[], &universe).unwrap(), 0.0);
        assert_eq!(coverage(universe.iter(), &universe).unwrap(), 1.0);
        assert!(matches!(coverage(&ids(&["zz"]), &universe), Err(Error::OutsideUniverse(_))));
    }

    #[test]
    fn distinct_examples() {
        assert_eq!(distinct_n(&["a b a b"], 1), 0.5);
        assert!((distinct_n(&["a b a b"], 2) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(distinct_n::<&str>(&[], 2), 0.0);
        assert!(distinct_n(&["x y z", "x y z"], 2) < distinct_n(&["x y z", "u v w"], 2));
    }

    #[test]
    fn bleu_examples() {
        assert!((bleu(&["the cat sat on the mat"], &["the cat sat on the mat"]).unwrap() - 1.0).abs() < 1e-12);
        assert!((bleu(&["a b c d"], &["a b c d e"]).unwrap() - (-0.25f64).exp()).abs() < 1e-4);
        assert_eq!(bleu(&["p q r s"], &["a b c d"]).unwrap(), 0.0);
        let smoothed = bleu(&["a x y z"], &["a b c d"]).unwrap();
        // p = (1/4, 1/4, 1/3, 1/2)
        assert!((smoothed - (1.0f64 / 96.0).powf(0.25)).abs() < 1e-12);
        assert!(bleu(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn f1_examples() {
        assert_eq!(token_f1("a b", "b c"), 0.5);
        assert_eq!(token_f1("x y", "x y"), 1.0);
        assert_eq!(token_f1("x y", "z"), 0.0);
        assert_eq!(token_f1("", "z"), 0.0);
    }

    #[test]
    fn transition_examples() {
        let m = TransitionMatrix::from_sequences(&[vec!["Comedy", "Comedy", "Horror"]], &[]);
        assert_eq!(m.probability("Comedy", "Comedy"), Some(0.5));
        assert_eq!(m.probability("Comedy", "Horror"), Some(0.5));
        assert_eq!(m.probabilities[1], vec![0.0, 0.0]);
        assert_eq!(m.off_diagonal_mass(), 0.5);
        let single = TransitionMatrix::from_sequences(&[vec!["A"], vec!["B"]], &[]);
        assert_eq!(single.total(), 0);
        assert!(single.probabilities.iter().flatten().all(|p| *p == 0.0));
        let csv = m.to_csv().unwrap();
        assert_eq!(csv.lines().next().unwrap(), ",Comedy,Horror");
        assert_eq!(csv.lines().nth(1).unwrap(), "Comedy,0.5,0.5");
    }

    proptest! {
        #[test]
        fn recall_is_monotone_in_k(ranked in prop::collection::vec(0u8..20, 1..15), gold in prop::collection::btree_set(0u8..20, 1..4), k in 1usize..15) {
            let mut seen = BTreeSet::new();
            let ranked: Vec<EntityId> = ranked.into_iter().filter(|x| seen.insert(*x)).map(|x| EntityId::new(x.to_string())).collect();
            let r = RankedRecommendation { dialogue: "d".into(), turn_index: 0, ranked, gold: gold.iter().map(|x| EntityId::new(x.to_string())).collect() };
            let inst = [r];
            prop_assert!(recall_at_k(&inst, k).unwrap() <= recall_at_k(&inst, k + 1).unwrap());
        }

        #[test]
        fn coverage_ignores_duplicates(picks in prop::collection::vec(0u8..10, 0..30)) {
            let universe: BTreeSet<EntityId> = (0..10).map(|i| EntityId::new(i.to_string())).collect();
            let once: Vec<EntityId> = picks.iter().map(|p| EntityId::new(p.to_string())).collect();
            let twice: Vec<EntityId> = once.iter().chain(once.iter()).cloned().collect();
            prop_assert_eq!(coverage(&once, &universe).unwrap(), coverage(&twice, &universe).unwrap());
        }

        #[test]
        fn distinct_in_unit_interval(words in prop::collection::vec("[a-d]", 1..20), n in 1usize..4) {
            let text = words.join(" ");
            let d = distinct_n(&[text.as_str()], n);
            if words.len() >= n {
                prop_assert!(d > 0.0 && d <= 1.0);
            }
        }

        #[test]
        fn transition_rows_are_stochastic(seqs in prop::collection::vec(prop::collection::vec(0u8..4, 0..8), 0..6)) {
            let seqs: Vec<Vec<String>> = seqs.into_iter().map(|s| s.into_iter().map(|x| format!("g{x}")).collect()).collect();
            let m = TransitionMatrix::from_sequences(&seqs, &[]);
            for (row, counts) in m.probabilities.iter().zip(&m.counts) {
                let sum: f64 = row.iter().sum();
                if counts.iter().sum::<usize>() > 0 {
                    prop_assert!((sum - 1.0).abs() < 1e-9);
                } else {
                    prop_assert_eq!(sum, 0.0);
                }
            }
        }
    }
}
