//! Experience sampling and instruction-data generation over the two
//! simulator crates.
//!
//! The flow: [`agent_loop`] runs LLM-driven episodes in either environment
//! through the textual bridge in [`textio`]; [`store`] persists episodes
//! with tags, embeddings and surprise scores for retrieval; [`annotator`]
//! turns stored episodes into question-answer samples of five kinds with
//! simulator-verified answers and novelty filtering; [`datasets`] emits
//! schema-checked JSONL splits; [`evaluator`] measures task completion and
//! QA accuracy.

pub mod agent_loop;
pub mod annotator;
pub mod datasets;
pub mod envbridge;
pub mod evaluator;
pub mod seeds;
pub mod store;
pub mod textio;

use serde::{Deserialize, Serialize};

/// Which simulator an episode or sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    AgentWorld,
    Driving,
}

impl EnvKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::AgentWorld => "agent_world",
            EnvKind::Driving => "driving",
        }
    }
}

/// Imperfect/perfect switch, unified across both environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Imperfect,
    Perfect,
}

impl From<agent_world::Fidelity> for Fidelity {
    fn from(f: agent_world::Fidelity) -> Self {
        match f {
            agent_world::Fidelity::Imperfect => Fidelity::Imperfect,
            agent_world::Fidelity::Perfect => Fidelity::Perfect,
        }
    }
}

impl From<urban_driving::Fidelity> for Fidelity {
    fn from(f: urban_driving::Fidelity) -> Self {
        match f {
            urban_driving::Fidelity::Imperfect => Fidelity::Imperfect,
            urban_driving::Fidelity::Perfect => Fidelity::Perfect,
        }
    }
}
