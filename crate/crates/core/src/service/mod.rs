//! Frontends over one engine: the HTTP session API, offline replay, and
//! the command line.

pub mod cli;
pub mod http;
pub mod replay;

use crate::dialogue::SystemResponse;
use crate::engine::Engine;
use crate::error::Result;
use crate::reasoning::Mode;

/// Runs a scripted conversation in a fresh session.
pub fn run_script<S: AsRef<str>>(engine: &Engine, mode: Mode, lines: &[S]) -> Result<Vec<SystemResponse>> {
    let mut session = engine.new_session("script", mode);
    lines.iter().map(|l| engine.advance(&mut session, l.as_ref())).collect()
}
