//! Offline replay of dialogue corpora through the engine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, TurnInput};
use crate::error::{Error, Result};
use crate::ingest::{ReplayDialogue, Role};
use crate::knowledge::EntityId;
use crate::metrics::{
    bleu, coverage, distinct_n, recall_at_k, token_f1, MetricsReport, RankedRecommendation, SampleCounts,
    TransitionMatrix,
};
use crate::reasoning::{DialogAct, Mode};

pub const DEFAULT_KS: [usize; 3] = [1, 10, 50];

/// One engine turn produced during replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub dialogue: String,
    pub turn_index: usize,
    pub act: DialogAct,
    pub middle: Option<String>,
    pub items: Vec<EntityId>,
    pub generated: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRun {
    pub report: MetricsReport,
    pub transitions: TransitionMatrix,
    pub instances: Vec<RankedRecommendation>,
    pub steps: Vec<ReplayStep>,
}

/// Replays every dialogue in a fresh session.
///
/// Seeker turns accumulate until the next recommender turn, which
/// triggers one engine step. Turns carrying gold items force the
/// Recommend act (or the annotated act) and are scored for recall. After
/// each step the gold recommender text replaces the generated one in the
/// session history.
pub fn replay(engine: &Engine, dialogues: &[ReplayDialogue], mode: Mode, ks: &[usize]) -> Result<ReplayRun> {
    if dialogues.is_empty() {
        return Err(Error::Empty("dialogue set"));
    }
    let mut instances = Vec::new();
    let mut steps = Vec::new();
    let mut sequences: Vec<Vec<String>> = Vec::new();
    for d in dialogues {
        let mut session = engine.new_session(d.id.clone(), mode);
        let mut pending_text: Vec<&str> = Vec::new();
        let mut pending_mentions: Vec<EntityId> = Vec::new();
        let mut sequence = Vec::new();
        for turn in &d.turns {
            match turn.role {
                Role::Seeker => {
                    pending_text.push(&turn.text);
                    pending_mentions.extend(turn.mentions.iter().cloned());
                }
                Role::Recommender if pending_text.is_empty() => session.observe_system(&turn.text),
                Role::Recommender => {
                    let forced = turn
                        .gold_act
                        .or_else(|| (!turn.gold.is_empty()).then_some(DialogAct::Recommend));
                    let input = TurnInput {
                        text: pending_text.join(" "),
                        mentions: std::mem::take(&mut pending_mentions),
                        forced_act: forced,
                    };
                    pending_text.clear();
                    let turn_index = session.next_turn_index();
                    let out = engine.step(&mut session, input)?;
                    session.teacher_force(&turn.text);
                    if !turn.gold.is_empty() {
                        instances.push(RankedRecommendation {
                            dialogue: d.id.clone(),
                            turn_index,
                            ranked: out.ranking.clone(),
                            gold: turn.gold.clone(),
                        });
                    }
                    let tree = &out.response.tree;
                    let primary = tree.primary();
                    let items: Vec<EntityId> = match (tree.act, primary) {
                        (DialogAct::Recommend, Some(m)) => m
                            .children
                            .iter()
                            .filter(|c| engine.hierarchy().category_of(&c.id).is_some())
                            .map(|c| c.id.clone())
                            .collect(),
                        _ => Vec::new(),
                    };
                    let middle = primary.filter(|_| tree.act == DialogAct::Recommend).map(|m| m.name.clone());
                    if let Some(m) = &middle {
                        sequence.push(m.clone());
                    }
                    steps.push(ReplayStep {
                        dialogue: d.id.clone(),
                        turn_index,
                        act: tree.act,
                        middle,
                        items,
                        generated: out.response.system_text.clone(),
                        reference: turn.text.clone(),
                    });
                }
            }
        }
        sequences.push(sequence);
    }

    let labels: Vec<String> = engine
        .hierarchy()
        .categories()
        .map(|c| engine.graph().entity(c).map(|e| e.name.clone()))
        .collect::<Result<_>>()?;
    let transitions = TransitionMatrix::from_sequences(&sequences, &labels);
    let universe: BTreeSet<EntityId> = engine.items().cloned().collect();
    let recommended: Vec<&EntityId> = steps.iter().flat_map(|s| &s.items).collect();
    let hyps: Vec<&str> = steps.iter().map(|s| s.generated.as_str()).collect();
    let refs: Vec<&str> = steps.iter().map(|s| s.reference.as_str()).collect();
    let mut recall = BTreeMap::new();
    if !instances.is_empty() {
        for &k in ks {
            recall.insert(k, recall_at_k(&instances, k)?);
        }
    }
    let bleu_score = bleu(&hyps, &refs)?;
    let f1 = if steps.is_empty() {
        0.0
    } else {
        steps.iter().map(|s| token_f1(&s.generated, &s.reference)).sum::<f64>() / steps.len() as f64
    };
    let report = MetricsReport {
        mode: mode.to_string(),
        recall,
        coverage: coverage(recommended.iter().copied(), &universe)?,
        bleu: bleu_score,
        bleu_100: 100.0 * bleu_score,
        distinct: [distinct_n(&hyps, 1), distinct_n(&hyps, 2), distinct_n(&hyps, 3)],
        f1,
        off_diagonal_mass: transitions.off_diagonal_mass(),
        samples: SampleCounts {
            recall_turns: instances.len(),
            recommended_items: recommended.len(),
            generated: steps.len(),
        },
    };
    Ok(ReplayRun { report, transitions, instances, steps })
}

/// Baseline and hierarchical runs on identical inputs.
pub fn replay_both(engine: &Engine, dialogues: &[ReplayDialogue], ks: &[usize]) -> Result<(ReplayRun, ReplayRun)> {
    Ok((replay(engine, dialogues, Mode::Baseline, ks)?, replay(engine, dialogues, Mode::Hierarchical, ks)?))
}

/// Side-by-side tables, each followed by a hierarchical-minus-baseline row.
pub fn delta_table(baseline: &MetricsReport, hierarchical: &MetricsReport) -> String {
    let pair = [baseline, hierarchical];
    let mut out = MetricsReport::recommendation_table(&pair);
    let mut line = format!("{:<14}", "delta");
    for (k, b) in &baseline.recall {
        let h = hierarchical.recall.get(k).copied().unwrap_or(0.0);
        let _ = write!(line, "{:>8}", format!("{:+.2}", 100.0 * (h - b)));
    }
    let _ = writeln!(
        line,
        "{:>8}{:>8}",
        format!("{:+.2}", 100.0 * (hierarchical.coverage - baseline.coverage)),
        format!("{:+.3}", hierarchical.off_diagonal_mass - baseline.off_diagonal_mass)
    );
    out.push_str(&line);
    out.push('\n');
    out.push_str(&MetricsReport::generation_table(&pair));
    let d = |h: f64, b: f64, p: usize| format!("{:+.*}", p, h - b);
    let _ = writeln!(
        out,
        "{:<14}{:>8}{:>8}{:>8}{:>8}{:>8}",
        "delta",
        d(hierarchical.bleu_100, baseline.bleu_100, 2),
        d(hierarchical.distinct[0], baseline.distinct[0], 3),
        d(hierarchical.distinct[1], baseline.distinct[1], 3),
        d(hierarchical.distinct[2], baseline.distinct[2], 3),
        d(hierarchical.f1, baseline.f1, 3),
    );
    out
}

/// JSON document holding both reports and their differences.
pub fn both_json(baseline: &ReplayRun, hierarchical: &ReplayRun) -> serde_json::Value {
    serde_json::json!({
        "baseline": baseline.report,
        "hierarchical": hierarchical.report,
        "delta": {
            "coverage": hierarchical.report.coverage - baseline.report.coverage,
            "off_diagonal_mass": hierarchical.report.off_diagonal_mass - baseline.report.off_diagonal_mass,
            "recall": baseline.report.recall.iter().map(|(k, b)| {
                (k.to_string(), hierarchical.report.recall.get(k).copied().unwrap_or(0.0) - b)
            }).collect::<BTreeMap<_, _>>(),
        }
    })
}
