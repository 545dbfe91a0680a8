//! Conversational recommendation over a knowledge graph with reasoning
//! trees and a hierarchical multi-interest user portrait.

pub mod dialogue;
pub mod embedding;
pub mod engine;
pub mod error;
pub mod generation;
pub mod ingest;
pub mod knowledge;
pub mod linalg;
pub mod metrics;
pub mod params;
pub mod portrait;
pub mod reasoning;
pub mod service;
pub mod synthetic;
pub mod text;

pub use dialogue::{Session, SystemResponse};
pub use engine::{Engine, EngineParts, EngineSettings, TurnInput, TurnOutput};
pub use error::{Error, Result};
pub use knowledge::{EntityId, Hierarchy, KnowledgeGraph};
pub use reasoning::{DialogAct, Mode, ReasoningTree};
