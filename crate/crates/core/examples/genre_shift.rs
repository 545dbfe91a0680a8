//! The comedy-to-horror conversation in both modes, side by side.

use std::path::Path;

use hiercrs::ingest::{build_engine, EngineConfig};
use hiercrs::service::run_script;
use hiercrs::Mode;

const SCRIPT: [&str; 3] = [
    "i love to watch funny movies",
    "yes, i love adam sandler",
    "just watched the mask last night! there is a new one Son of the Mask. i like some scary movie",
];

fn main() -> hiercrs::Result<()> {
    let config = EngineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/genre_shift/config.toml"))?;
    let engine = build_engine(&config)?;
    let baseline = run_script(&engine, Mode::Baseline, &SCRIPT)?;
    let hierarchical = run_script(&engine, Mode::Hierarchical, &SCRIPT)?;
    for (i, user) in SCRIPT.iter().enumerate() {
        println!("user: {user}");
        for (label, r) in [("baseline", &baseline[i]), ("hierarchical", &hierarchical[i])] {
            println!("  {label:>12}: {}", r.system_text);
            println!("  {:>12}  {}", "", r.diagnostics.linearized);
        }
        let bars: Vec<String> = hierarchical[i]
            .diagnostics
            .genre_scores
            .iter()
            .map(|s| format!("{}={:.3}", s.id, s.score))
            .collect();
        println!("  genre scores: {}", bars.join(" "));
    }
    Ok(())
}
