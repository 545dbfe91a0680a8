//! Generates the synthetic six-genre corpus and replays it in both modes.

use hiercrs::ingest::{build_engine, load_dialogues, EngineConfig};
use hiercrs::service::replay::{delta_table, replay_both, DEFAULT_KS};
use hiercrs::synthetic::SyntheticBundle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("hiercrs-synth-{}", std::process::id()));
    SyntheticBundle::generate(0, 50).write_to(&dir)?;
    let config = EngineConfig::load(&dir.join("config.toml"))?;
    let engine = build_engine(&config)?;
    let (dialogues, _) = load_dialogues(&config, engine.graph(), None)?;
    let (base, hier) = replay_both(&engine, &dialogues, &DEFAULT_KS)?;
    print!("{}", delta_table(&base.report, &hier.report));
    println!();
    print!("{}", hier.transitions.to_csv()?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
