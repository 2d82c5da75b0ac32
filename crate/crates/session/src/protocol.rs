//! Wire types shared by the HTTP layer, the replay engine and the log files.

use ide_core::ea::{Algorithm, DeParams, GaParams, RunConfig};
use ide_core::fitness::Comparison;
use ide_core::landscape::SearchDomain;
use serde::{Deserialize, Serialize};

use crate::render::{PhenotypeSpec, Render};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    /// Choose the better of two items (IDE, TIGA1).
    Pair,
    /// Choose the better of two items and say by how much (TIGA2).
    PairWithMagnitude,
    /// Give every item a level (IGA).
    RateAll,
}

impl QueryKind {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::De | Algorithm::Tga1 => QueryKind::Pair,
            Algorithm::Tga2 => QueryKind::PairWithMagnitude,
            Algorithm::Ga => QueryKind::RateAll,
        }
    }
}

/// Which item of a pair the judge preferred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    A,
    B,
    Tie,
}

impl Choice {
    pub fn comparison(self) -> Comparison {
        match self {
            Choice::A => Comparison::AWins,
            Choice::B => Comparison::BWins,
            Choice::Tie => Comparison::Tie,
        }
    }

    pub fn from_comparison(c: Comparison) -> Self {
        match c {
            Comparison::AWins => Choice::A,
            Comparison::BWins => Choice::B,
            Comparison::Tie => Choice::Tie,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Answer {
    Pair { choice: Choice },
    /// `magnitude` runs from 0 to levels − 1; a tie must have magnitude 0.
    PairWithMagnitude { choice: Choice, magnitude: u32 },
    /// One level per item, each in 1..=levels, in item order.
    RateAll { levels: Vec<u32> },
}

impl Answer {
    pub fn kind(&self) -> QueryKind {
        match self {
            Answer::Pair { .. } => QueryKind::Pair,
            Answer::PairWithMagnitude { .. } => QueryKind::PairWithMagnitude,
            Answer::RateAll { .. } => QueryKind::RateAll,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub render: Render,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// DE's scan for the initial best individual.
    Initialization,
    Evolution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    /// Generations completed so far.
    pub generation: usize,
    pub generations: usize,
    pub phase: Phase,
    pub answered_in_step: usize,
    pub queries_in_step: usize,
    pub remaining_in_step: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub query_id: String,
    pub kind: QueryKind,
    pub items: Vec<Item>,
    /// Number of evaluation levels, for magnitude and rating answers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    pub progress: Progress,
}

/// Run parameters a client may set when creating a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionParams {
    pub dim: usize,
    pub population: usize,
    pub generations: usize,
    pub levels: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<SearchDomain>,
    pub ga: GaParams,
    pub de: DeParams,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self {
            dim: 3,
            population: 8,
            generations: 10,
            levels: 5,
            domain: None,
            ga: GaParams::default(),
            de: DeParams::default(),
        }
    }
}

impl SessionParams {
    pub fn run_config(&self, algorithm: Algorithm) -> RunConfig {
        RunConfig {
            algorithm,
            interactive: true,
            dim: self.dim,
            population: self.population,
            generations: self.generations,
            levels: self.levels,
            domain: self.domain.clone(),
            ga: self.ga.clone(),
            de: self.de.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub algorithm: String,
    #[serde(default)]
    pub params: SessionParams,
    #[serde(default)]
    pub phenotype_spec: PhenotypeSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    pub query_id: String,
    pub answer: Answer,
}

/// Everything that determines a session besides its answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub id: String,
    pub algorithm: Algorithm,
    pub config: RunConfig,
    pub phenotype_spec: PhenotypeSpec,
    pub seed: u64,
    pub created_at_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub query_id: String,
    pub answer: Answer,
    pub timestamp_ms: u64,
}

/// Portable form of a session: header plus ordered answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayFile {
    pub format: String,
    pub version: u32,
    pub session: SessionHeader,
    pub answers: Vec<AnswerRecord>,
}

pub const REPLAY_FORMAT: &str = "ide-session-replay";
pub const REPLAY_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingChoice,
    Finished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tallies {
    /// Paired comparisons the judge has been charged with.
    pub comparisons: u64,
    /// Scalar ratings the judge has been charged with.
    pub evaluations: u64,
    pub answers: usize,
}

/// Reported when a generation is completed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub comparisons: u64,
    pub evaluations: u64,
    /// Best individual according to the judge, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub champion: Option<Render>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub algorithm: Algorithm,
    pub label: String,
    pub config: RunConfig,
    pub phenotype_spec: PhenotypeSpec,
    pub seed: u64,
    pub created_at_ms: u64,
    pub state: SessionStatus,
    pub generation: usize,
    pub generations: usize,
    pub pending_query: Option<EvalQuery>,
    pub tallies: Tallies,
    /// Decoded individuals of the current population.
    pub population: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub champion: Option<Render>,
    pub summaries: Vec<GenerationSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionListing {
    pub id: String,
    pub algorithm: Algorithm,
    pub label: String,
    pub state: SessionStatus,
    pub generation: usize,
    pub generations: usize,
    pub answers: usize,
    pub created_at_ms: u64,
}

/// Reply to an answer: what changed and what to ask next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub answered: String,
    pub state: SessionStatus,
    pub generation: usize,
    pub tallies: Tallies,
    /// Generations completed by this answer.
    pub completed: Vec<GenerationSummary>,
    pub query: Option<EvalQuery>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}
