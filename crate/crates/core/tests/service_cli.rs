//! Command-line frontend, replay and configuration plumbing.

mod common;

use std::collections::BTreeMap;

use clap::Parser;
use hiercrs::ingest::{build_engine, EngineConfig, ReplayDialogue, ReplayTurn, Role};
use hiercrs::service::cli::{run, Cli};
use hiercrs::service::replay::{replay, DEFAULT_KS};
use hiercrs::{EntityId, Mode};

fn run_cli(args: &[&str]) -> String {
    let cli = Cli::try_parse_from(std::iter::once("hiercrs").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    run(cli, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn replay_reports_are_byte_identical() {
    let s = common::synthetic(0, 10);
    let config = s.dir.path().join("config.toml");
    let config = config.to_str().unwrap();
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = s.dir.path().join(format!("report{i}.json"));
        let csv = s.dir.path().join(format!("transitions{i}.csv"));
        run_cli(&["--config", config, "--seed", "3", "replay", "--both", "--out", out.to_str().unwrap(), "--dump-transitions", csv.to_str().unwrap()]);
        reports.push(std::fs::read(&out).unwrap());
        for mode in ["baseline", "hierarchical"] {
            assert!(s.dir.path().join(format!("transitions{i}.{mode}.csv")).exists());
        }
    }
    assert_eq!(reports[0], reports[1]);
    let v: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert!(v["baseline"]["coverage"].is_number() && v["delta"]["coverage"].is_number());
}

#[test]
fn transition_rows_sum_to_one() {
    let s = common::synthetic(2, 10);
    let path = s.dir.path().join("t.csv");
    run_cli(&["--config", s.dir.path().join("config.toml").to_str().unwrap(), "export-transitions", "--out", path.to_str().unwrap()]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 7);
    for line in lines {
        let sum: f64 = line.split(',').skip(1).map(|x| x.parse::<f64>().unwrap()).sum();
        assert!(sum == 0.0 || (sum - 1.0).abs() < 1e-9, "{line}");
    }
}

#[test]
fn tau_override_reaches_the_walk() {
    let config = common::fixture_dir().join("config.toml");
    let config = config.to_str().unwrap();
    let line = "just watched the mask last night! there is a new one Son of the Mask";
    let middles = |out: &str| -> Vec<usize> {
        out.lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["nodes"].as_array().unwrap().len())
            .collect()
    };
    let low = run_cli(&["--config", config, "--mode", "baseline", "--tau", "-1e9", "dump-tree", line]);
    let high = run_cli(&["--config", config, "--mode", "baseline", "--tau", "1e9", "dump-tree", line]);
    assert_eq!(middles(&high), [1]);
    assert_eq!(middles(&low), [1]);
    let leaves = |out: &str| -> usize {
        let v: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
        v["nodes"][0]["children"].as_array().unwrap().len()
    };
    assert_eq!(leaves(&low), 2);
    assert_eq!(leaves(&high), 1);

    let mut cfg = common::genre_shift_config();
    cfg.tau = 0.3;
    assert_eq!(build_engine(&cfg).unwrap().settings().walk.tau, 0.3);
    let text = std::fs::read_to_string(common::fixture_dir().join("config.toml")).unwrap().replace("tau = 0.0", "tau = 0.3");
    let parsed = EngineConfig::parse(&text, &common::fixture_dir()).unwrap();
    assert_eq!(parsed.walk().tau, 0.3);
    assert!(build_engine(&parsed).unwrap().summary().contains("tau=0.3"));
}

#[test]
fn tau_changes_tree_size_without_caps() {
    let mut cfg = common::genre_shift_config();
    cfg.middle_cap = None;
    cfg.leaf_cap = None;
    let line = ["just watched the mask last night! there is a new one Son of the Mask"];
    let mut sizes = Vec::new();
    for tau in [-1e9, 1e9] {
        cfg.tau = tau;
        let engine = build_engine(&cfg).unwrap();
        let r = hiercrs::service::run_script(&engine, Mode::Baseline, &line).unwrap();
        sizes.push((r[0].tree.nodes.len(), r[0].tree.nodes[0].children.len()));
    }
    assert!(sizes[0].0 > 1 && sizes[0].1 > 2, "{sizes:?}");
    assert_eq!(sizes[1], (1, 1));
}

#[test]
fn engine_summaries_are_deterministic() {
    let a = build_engine(&common::genre_shift_config()).unwrap().summary();
    let b = build_engine(&common::genre_shift_config()).unwrap().summary();
    assert_eq!(a, b);
    assert!(a.contains("items=14") && a.contains("categories=4"), "{a}");
}

#[test]
fn missing_graph_names_the_path() {
    let mut cfg = common::genre_shift_config();
    cfg.paths.graph = Some(common::fixture_dir().join("nope.tsv"));
    let err = build_engine(&cfg).unwrap_err().to_string();
    assert!(err.contains("nope.tsv"), "{err}");
}

#[test]
fn gold_equal_to_top_ranked_gives_perfect_recall() {
    let engine = common::genre_shift_engine();
    let seeker = ["i love to watch funny movies", "yes, i love adam sandler"];
    let mut session = engine.new_session("probe", Mode::Baseline);
    let mut turns = Vec::new();
    for text in seeker {
        let input = hiercrs::TurnInput { forced_act: Some(hiercrs::DialogAct::Recommend), ..hiercrs::TurnInput::text(text) };
        let out = engine.step(&mut session, input).unwrap();
        session.teacher_force("ok");
        turns.push(turn(Role::Seeker, text, vec![]));
        turns.push(turn(Role::Recommender, "ok", vec![out.ranking[0].clone()]));
    }
    let dialogue = ReplayDialogue { id: "probe".into(), seeker_worker: 1, recommender_worker: 2, movie_names: BTreeMap::new(), turns };
    let run = replay(&engine, &[dialogue], Mode::Baseline, &DEFAULT_KS).unwrap();
    assert_eq!(run.report.recall[&1], 1.0);
    assert_eq!(run.report.samples.recall_turns, 2);
}

fn turn(role: Role, text: &str, gold: Vec<EntityId>) -> ReplayTurn {
    ReplayTurn { role, raw_text: text.into(), text: text.into(), markers: vec![], mentions: vec![], gold, gold_act: None }
}

#[test]
fn synth_subcommand_writes_a_loadable_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(&["--seed", "4", "synth", "--out", dir.path().to_str().unwrap(), "--dialogues", "3"]);
    assert!(out.starts_with("wrote synthetic bundle"));
    let summary = run_cli(&["--config", dir.path().join("config.toml").to_str().unwrap(), "replay"]);
    assert!(summary.contains("R@1") && summary.contains("BLEU"));
}

#[test]
fn chat_prints_linearized_trees() {
    let engine = common::genre_shift_engine();
    let mut out = Vec::new();
    let script = "i love to watch funny movies\n/quit\nnever read\n";
    hiercrs::service::cli::chat(&engine, Mode::Baseline, script.as_bytes(), &mut out, false, true).unwrap();
    let out = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("system: have you seen"));
    assert!(lines[1].contains("[ACT] Recommend [SEL] Comedy"));
    assert!(lines[2].starts_with('{'));
}
