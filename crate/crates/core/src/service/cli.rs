//! Command-line interface.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::ingest::{build_engine, load_dialogues, EngineConfig};
use crate::reasoning::Mode;
use crate::service::http::{serve, AppState};
use crate::service::replay::{both_json, delta_table, replay, DEFAULT_KS};
use crate::synthetic::SyntheticBundle;

#[derive(Debug, Parser)]
#[command(name = "hiercrs", version, about = "Conversational recommendation with hierarchical user portraits")]
pub struct Cli {
    /// Engine configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override `reasoning.mode`.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// Override `reasoning.tau`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Override `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Converse in the terminal, one utterance per line.
    Chat {
        /// Read utterances from a file instead of stdin.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Print each full response as a JSON line.
        #[arg(long)]
        json: bool,
        /// Print the reasoning tree JSON after each reply.
        #[arg(long)]
        dump_tree: bool,
    },
    /// Serve the HTTP session API.
    Serve {
        /// Override `service.bind`.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Replay a dialogue corpus and report metrics.
    Replay {
        /// Run baseline and hierarchical on the same dialogues.
        #[arg(long)]
        both: bool,
        /// Restrict to conversation ids listed in this file.
        #[arg(long)]
        split_file: Option<PathBuf>,
        /// Recall cutoffs.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS.to_vec())]
        ks: Vec<usize>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the transition matrix CSV here (with `--both`, a
        /// `.baseline`/`.hierarchical` suffix is added before the extension).
        #[arg(long)]
        dump_transitions: Option<PathBuf>,
    },
    /// Replay and write only the middle-layer transition matrix as CSV.
    ExportTransitions {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        split_file: Option<PathBuf>,
    },
    /// Run utterances through a fresh session and print each tree as JSON.
    DumpTree {
        /// Utterances, in order.
        #[arg(required = true)]
        utterances: Vec<String>,
    },
    /// Write the synthetic six-genre bundle used by the acceptance suite.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        dialogues: usize,
    },
}

fn load_config(cli: &Cli) -> Result<EngineConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        key: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let mut config = EngineConfig::load(path)?;
    if let Some(m) = cli.mode {
        config.mode = m;
    }
    if let Some(t) = cli.tau {
        config.tau = t;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn write_file(path: &PathBuf, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn suffixed(path: &std::path::Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn io(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Runs a parsed command line, writing user-facing output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    if let Command::Synth { out: dir, dialogues } = &cli.command {
        let bundle = SyntheticBundle::generate(cli.seed.unwrap_or(0), *dialogues);
        bundle.write_to(dir)?;
        writeln!(out, "wrote synthetic bundle to {}", dir.display()).map_err(io)?;
        return Ok(());
    }
    let config = load_config(&cli)?;
    let engine = build_engine(&config)?;
    log::info!("{}", engine.summary());
    match cli.command {
        Command::Chat { script, json, dump_tree } => {
            let input: Box<dyn BufRead> = match &script {
                Some(p) => Box::new(std::io::BufReader::new(std::fs::File::open(p).map_err(|e| Error::io(p, e))?)),
                None => Box::new(std::io::stdin().lock()),
            };
            chat(&engine, config.mode, input, out, json, dump_tree)
        }
        Command::Serve { bind } => {
            let bind = bind.unwrap_or(config.bind.clone());
            writeln!(out, "{}", engine.summary()).map_err(io)?;
            let state = AppState::new(Arc::new(engine), Duration::from_secs(config.session_ttl_secs));
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
            rt.block_on(serve(state, &bind)).map_err(|e| Error::io(bind, e))
        }
        Command::Replay { both, split_file, ks, out: report_path, dump_transitions } => {
            let (dialogues, report) = load_dialogues(&config, engine.graph(), split_file.as_deref())?;
            if !report.skipped.is_empty() {
                log::warn!("{} unresolved movie markers skipped", report.skipped.len());
            }
            if both {
                let base = replay(&engine, &dialogues, Mode::Baseline, &ks)?;
                let hier = replay(&engine, &dialogues, Mode::Hierarchical, &ks)?;
                write!(out, "{}", delta_table(&base.report, &hier.report)).map_err(io)?;
                if let Some(p) = &report_path {
                    write_file(p, &serde_json::to_string_pretty(&both_json(&base, &hier))?)?;
                }
                if let Some(p) = &dump_transitions {
                    write_file(&suffixed(p, "baseline"), &base.transitions.to_csv()?)?;
                    write_file(&suffixed(p, "hierarchical"), &hier.transitions.to_csv()?)?;
                }
            } else {
                let run = replay(&engine, &dialogues, config.mode, &ks)?;
                write!(out, "{}", crate::metrics::MetricsReport::table(&[&run.report])).map_err(io)?;
                if let Some(p) = &report_path {
                    write_file(p, &run.report.to_json_pretty())?;
                }
                if let Some(p) = &dump_transitions {
                    write_file(p, &run.transitions.to_csv()?)?;
                }
            }
            Ok(())
        }
        Command::ExportTransitions { out: path, split_file } => {
            let (dialogues, _) = load_dialogues(&config, engine.graph(), split_file.as_deref())?;
            let run = replay(&engine, &dialogues, config.mode, &DEFAULT_KS)?;
            write_file(&path, &run.transitions.to_csv()?)?;
            writeln!(out, "wrote {}", path.display()).map_err(io)
        }
        Command::DumpTree { utterances } => {
            for r in crate::service::run_script(&engine, config.mode, &utterances)? {
                writeln!(out, "{}", serde_json::to_string(&r.tree.to_json())?).map_err(io)?;
            }
            Ok(())
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

/// Line-oriented conversation loop. Blank lines are sent as empty
/// utterances; `/quit` ends the session.
pub fn chat(
    engine: &Engine,
    mode: Mode,
    input: impl BufRead,
    out: &mut dyn Write,
    json: bool,
    dump_tree: bool,
) -> Result<()> {
    let mut session = engine.new_session("cli", mode);
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim() == "/quit" {
            break;
        }
        let response = engine.advance(&mut session, &line)?;
        if json {
            writeln!(out, "{}", serde_json::to_string(&response)?).map_err(io)?;
        } else {
            writeln!(out, "system: {}", response.system_text).map_err(io)?;
            writeln!(out, "  {}", response.diagnostics.linearized).map_err(io)?;
        }
        if dump_tree {
            writeln!(out, "{}", serde_json::to_string(&response.tree.to_json())?).map_err(io)?;
        }
    }
    Ok(())
}
