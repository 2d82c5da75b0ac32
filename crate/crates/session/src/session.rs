//! A live session is a pure function of its header and ordered answers.
//!
//! The engine runs against a scripted judge that plays back the recorded
//! answers. When the script runs out, the judge records what it was asked and
//! suspends; engine steps are atomic, so the engine is left at the last
//! completed step and the suspended question becomes the pending query. A new
//! answer re-runs only the current step.

use ide_core::ea::{Algorithm, Engine, RunConfig};
use ide_core::fitness::{Comparison, EvaluationOracle};
use ide_core::CoreError;

use crate::error::{Result, SessionError};
use crate::protocol::{
    Answer, AnswerRecord, Choice, EvalQuery, GenerationSummary, Item, Phase, Progress, QueryKind,
    SessionHeader, SessionListing, SessionParams, SessionSnapshot, SessionStatus, SubmitResponse,
    Tallies,
};
use crate::render::render;

/// Upper bounds that keep a replay cheap.
pub const MAX_POPULATION: usize = 1024;
pub const MAX_GENERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
struct Pending {
    kind: QueryKind,
    points: Vec<Vec<f64>>,
    phase: Phase,
    answered_in_step: usize,
}

/// Plays back answers; suspends on the first question it cannot answer.
struct Script<'a> {
    answers: &'a [AnswerRecord],
    cursor: usize,
    asked: Option<(QueryKind, Vec<Vec<f64>>)>,
}

impl<'a> Script<'a> {
    fn new(answers: &'a [AnswerRecord]) -> Self {
        Self { answers, cursor: 0, asked: None }
    }

    fn take(&mut self, kind: QueryKind, points: &[&[f64]]) -> ide_core::Result<&'a Answer> {
        let Some(record) = self.answers.get(self.cursor) else {
            self.asked = Some((kind, points.iter().map(|p| p.to_vec()).collect()));
            return Err(CoreError::Suspended);
        };
        self.cursor += 1;
        if record.answer.kind() != kind {
            return Err(CoreError::Protocol(format!(
                "answer {} has kind {:?}, expected {kind:?}",
                record.query_id,
                record.answer.kind()
            )));
        }
        Ok(&record.answer)
    }
}

impl EvaluationOracle for Script<'_> {
    fn score_all(&mut self, points: &[Vec<f64>]) -> ide_core::Result<Vec<f64>> {
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        match self.take(QueryKind::RateAll, &refs)? {
            Answer::RateAll { levels } => Ok(levels.iter().map(|l| f64::from(*l)).collect()),
            _ => unreachable!("kind checked in take"),
        }
    }

    fn compare(&mut self, a: &[f64], b: &[f64]) -> ide_core::Result<Comparison> {
        match self.take(QueryKind::Pair, &[a, b])? {
            Answer::Pair { choice } => Ok(choice.comparison()),
            _ => unreachable!("kind checked in take"),
        }
    }

    fn compare_with_magnitude(&mut self, a: &[f64], b: &[f64]) -> ide_core::Result<(Comparison, f64)> {
        match self.take(QueryKind::PairWithMagnitude, &[a, b])? {
            Answer::PairWithMagnitude { choice, magnitude } => {
                Ok((choice.comparison(), f64::from(*magnitude)))
            }
            _ => unreachable!("kind checked in take"),
        }
    }
}

pub fn query_id(index: usize) -> String {
    format!("q{index}")
}

fn parse_query_id(id: &str) -> Option<usize> {
    let digits = id.strip_prefix('q')?;
    if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    digits.parse().ok()
}

/// Checks client-chosen parameters, naming the offending field.
pub fn validate_params(algorithm: Algorithm, params: &SessionParams) -> Result<RunConfig> {
    if params.dim == 0 {
        return Err(SessionError::validation("dim must be at least 1", "params.dim"));
    }
    let n = params.population;
    if n > MAX_POPULATION {
        return Err(SessionError::validation(
            format!("population must be at most {MAX_POPULATION}"),
            "params.population",
        ));
    }
    match algorithm {
        Algorithm::De if n < 4 => {
            return Err(SessionError::validation(
                format!("DE needs population >= 4, got {n}"),
                "params.population",
            ));
        }
        Algorithm::Ga | Algorithm::Tga1 | Algorithm::Tga2 if n < 2 || !n.is_power_of_two() => {
            return Err(SessionError::validation(
                format!("{} needs a power-of-two population, got {n}", algorithm.label(true)),
                "params.population",
            ));
        }
        _ => {}
    }
    if params.generations == 0 || params.generations > MAX_GENERATIONS {
        return Err(SessionError::validation(
            format!("generations must be in 1..={MAX_GENERATIONS}"),
            "params.generations",
        ));
    }
    if params.levels < 2 {
        return Err(SessionError::validation("levels must be at least 2", "params.levels"));
    }
    if let Some(domain) = &params.domain {
        if domain.dim() != params.dim {
            return Err(SessionError::validation(
                format!("domain has {} dimensions, dim is {}", domain.dim(), params.dim),
                "params.domain",
            ));
        }
    }
    let config = params.run_config(algorithm);
    config.validate().map_err(|e| {
        let message = e.to_string();
        let field = match e {
            CoreError::Config(m) => m
                .split_whitespace()
                .next()
                .filter(|t| t.starts_with("ga.") || t.starts_with("de."))
                .map(|t| format!("params.{t}"))
                .unwrap_or_else(|| "params".into()),
            _ => "params".into(),
        };
        SessionError::Validation { message, field: Some(field) }
    })?;
    Ok(config)
}

fn validate_answer(answer: &Answer, pending: &Pending, levels: u32) -> Result<()> {
    if answer.kind() != pending.kind {
        return Err(SessionError::validation(
            format!("expected a {:?} answer, got {:?}", pending.kind, answer.kind()),
            "answer.kind",
        ));
    }
    match answer {
        Answer::Pair { .. } => {}
        Answer::PairWithMagnitude { choice, magnitude } => {
            if *magnitude >= levels {
                return Err(SessionError::validation(
                    format!("magnitude must be in 0..={}", levels - 1),
                    "answer.magnitude",
                ));
            }
            if *choice == Choice::Tie && *magnitude != 0 {
                return Err(SessionError::validation(
                    "a tie must have magnitude 0",
                    "answer.magnitude",
                ));
            }
        }
        Answer::RateAll { levels: given } => {
            if given.len() != pending.points.len() {
                return Err(SessionError::validation(
                    format!("expected {} levels, got {}", pending.points.len(), given.len()),
                    "answer.levels",
                ));
            }
            if let Some(i) = given.iter().position(|l| !(1..=levels).contains(l)) {
                return Err(SessionError::validation(
                    format!("levels must be in 1..={levels}"),
                    format!("answer.levels[{i}]"),
                ));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Session {
    header: SessionHeader,
    answers: Vec<AnswerRecord>,
    engine: Engine,
    /// Answers consumed by the engine's completed steps.
    consumed: usize,
    pending: Option<Pending>,
    summaries: Vec<GenerationSummary>,
}

impl Session {
    /// Starts a session and advances it to its first query.
    pub fn new(header: SessionHeader) -> Result<Self> {
        if header.config.algorithm != header.algorithm {
            return Err(SessionError::validation(
                "header algorithm disagrees with its config",
                "session.algorithm",
            ));
        }
        let engine = Engine::new(header.config.clone(), header.seed)?;
        let mut session =
            Self { header, answers: Vec::new(), engine, consumed: 0, pending: None, summaries: Vec::new() };
        session.advance()?;
        Ok(session)
    }

    /// Rebuilds a session from its answers, checking each as if submitted.
    pub fn replay(header: SessionHeader, answers: &[AnswerRecord]) -> Result<Self> {
        let mut session = Self::new(header)?;
        for (i, record) in answers.iter().enumerate() {
            session.apply(record.clone()).map_err(|e| match e {
                SessionError::Validation { message, field } => SessionError::Validation {
                    message: format!("answer {i}: {message}"),
                    field: Some(format!("answers[{i}].{}", field.unwrap_or_default())),
                },
                SessionError::Conflict(m) => SessionError::validation(
                    format!("answer {i}: {m}"),
                    format!("answers[{i}].query_id"),
                ),
                other => other,
            })?;
        }
        Ok(session)
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn answers(&self) -> &[AnswerRecord] {
        &self.answers
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn status(&self) -> SessionStatus {
        if self.pending.is_some() {
            SessionStatus::AwaitingChoice
        } else {
            SessionStatus::Finished
        }
    }

    pub fn tallies(&self) -> Tallies {
        let pop = self.engine.population();
        Tallies {
            comparisons: pop.comparison_count,
            evaluations: pop.evaluation_count,
            answers: self.answers.len(),
        }
    }

    /// Runs the engine as far as the recorded answers allow. Returns the
    /// generations completed on the way.
    fn advance(&mut self) -> Result<Vec<GenerationSummary>> {
        let mut completed = Vec::new();
        loop {
            let script_answers = &self.answers[self.consumed..];
            let mut script = Script::new(script_answers);
            let (phase, outcome) = if !self.engine.is_initialized() {
                (Phase::Initialization, self.engine.initialize(&mut script))
            } else if self.engine.generation() >= self.header.config.generations {
                if self.consumed != self.answers.len() {
                    return Err(SessionError::Core(CoreError::Protocol(format!(
                        "{} answers recorded after the last generation",
                        self.answers.len() - self.consumed
                    ))));
                }
                self.pending = None;
                return Ok(completed);
            } else {
                (Phase::Evolution, self.engine.step(&mut script))
            };
            match outcome {
                Ok(()) => {
                    self.consumed += script.cursor;
                    if phase == Phase::Evolution {
                        let summary = self.summary();
                        self.summaries.push(summary.clone());
                        completed.push(summary);
                    }
                }
                Err(CoreError::Suspended) => {
                    let (kind, points) = script.asked.expect("suspension records the question");
                    self.pending = Some(Pending { kind, points, phase, answered_in_step: script.cursor });
                    return Ok(completed);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn summary(&self) -> GenerationSummary {
        let pop = self.engine.population();
        GenerationSummary {
            generation: pop.generation,
            comparisons: pop.comparison_count,
            evaluations: pop.evaluation_count,
            champion: self.champion(),
        }
    }

    fn champion(&self) -> Option<crate::render::Render> {
        let point = self.engine.champion()?;
        Some(render(&self.header.phenotype_spec, self.engine.codec().domain(), &point))
    }

    fn queries_in_step(&self, phase: Phase) -> usize {
        let n = self.header.config.population;
        match (phase, self.header.algorithm) {
            (Phase::Initialization, _) => n - 1,
            (Phase::Evolution, Algorithm::De) => 2 * n,
            (Phase::Evolution, Algorithm::Tga1 | Algorithm::Tga2) => n - 1,
            (Phase::Evolution, Algorithm::Ga) => 1,
        }
    }

    pub fn pending_query(&self) -> Option<EvalQuery> {
        let pending = self.pending.as_ref()?;
        let domain = self.engine.codec().domain();
        let spec = &self.header.phenotype_spec;
        let items = match pending.kind {
            QueryKind::Pair | QueryKind::PairWithMagnitude => ["a", "b"]
                .iter()
                .zip(&pending.points)
                .map(|(id, p)| Item { item_id: (*id).into(), render: render(spec, domain, p) })
                .collect(),
            QueryKind::RateAll => pending
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| Item { item_id: i.to_string(), render: render(spec, domain, p) })
                .collect(),
        };
        let queries = self.queries_in_step(pending.phase);
        Some(EvalQuery {
            query_id: query_id(self.answers.len()),
            kind: pending.kind,
            items,
            levels: (pending.kind != QueryKind::Pair).then_some(self.header.config.levels),
            progress: Progress {
                generation: self.engine.generation(),
                generations: self.header.config.generations,
                phase: pending.phase,
                answered_in_step: pending.answered_in_step,
                queries_in_step: queries,
                remaining_in_step: queries.saturating_sub(pending.answered_in_step),
            },
        })
    }

    /// Records an answer to the pending query and advances.
    pub fn apply(&mut self, record: AnswerRecord) -> Result<Vec<GenerationSummary>> {
        self.apply_with(record, |_| Ok(()))
    }

    /// [`Session::apply`], calling `persist` after the answer has been
    /// checked and before the new state is committed.
    pub fn apply_with(
        &mut self,
        record: AnswerRecord,
        persist: impl FnOnce(&AnswerRecord) -> Result<()>,
    ) -> Result<Vec<GenerationSummary>> {
        let Some(pending) = &self.pending else {
            return Err(SessionError::Conflict("session is finished".into()));
        };
        let expected = query_id(self.answers.len());
        if record.query_id != expected {
            return Err(SessionError::Conflict(format!(
                "query {} is not pending; the pending query is {expected}",
                record.query_id
            )));
        }
        validate_answer(&record.answer, pending, self.header.config.levels)?;
        let mut next = self.clone();
        next.answers.push(record);
        let completed = next.advance()?;
        persist(next.answers.last().expect("just pushed"))?;
        *self = next;
        Ok(completed)
    }

    fn response(&self, answered: String, completed: Vec<GenerationSummary>) -> SubmitResponse {
        SubmitResponse {
            answered,
            state: self.status(),
            generation: self.engine.generation(),
            tallies: self.tallies(),
            completed,
            query: self.pending_query(),
        }
    }

    /// What a submission would do, without doing it: `Ok(Some(response))`
    /// for a repeat of an earlier answer (the original response is rebuilt),
    /// `Ok(None)` for a fresh answer to the pending query.
    pub fn check_duplicate(&self, query_id: &str, answer: &Answer) -> Result<Option<SubmitResponse>> {
        let Some(k) = parse_query_id(query_id).filter(|k| *k < self.answers.len()) else {
            return Ok(None);
        };
        if self.answers[k].answer != *answer {
            return Err(SessionError::Conflict(format!(
                "query {query_id} was already answered differently"
            )));
        }
        let before = Session::replay(self.header.clone(), &self.answers[..k])?;
        let after = Session::replay(self.header.clone(), &self.answers[..=k])?;
        let completed = after.summaries[before.summaries.len()..].to_vec();
        Ok(Some(after.response(query_id.to_string(), completed)))
    }

    /// Applies `record` unless it repeats an earlier answer. The flag tells
    /// whether the session advanced.
    pub fn submit(&mut self, record: AnswerRecord) -> Result<(SubmitResponse, bool)> {
        self.submit_with(record, |_| Ok(()))
    }

    pub fn submit_with(
        &mut self,
        record: AnswerRecord,
        persist: impl FnOnce(&AnswerRecord) -> Result<()>,
    ) -> Result<(SubmitResponse, bool)> {
        if let Some(resp) = self.check_duplicate(&record.query_id, &record.answer)? {
            return Ok((resp, false));
        }
        let answered = record.query_id.clone();
        let completed = self.apply_with(record, persist)?;
        Ok((self.response(answered, completed), true))
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let h = &self.header;
        SessionSnapshot {
            id: h.id.clone(),
            algorithm: h.algorithm,
            label: h.algorithm.label(true).to_string(),
            config: h.config.clone(),
            phenotype_spec: h.phenotype_spec.clone(),
            seed: h.seed,
            created_at_ms: h.created_at_ms,
            state: self.status(),
            generation: self.engine.generation(),
            generations: h.config.generations,
            pending_query: self.pending_query(),
            tallies: self.tallies(),
            population: self.engine.points(),
            champion: self.champion(),
            summaries: self.summaries.clone(),
        }
    }

    pub fn listing(&self) -> SessionListing {
        let h = &self.header;
        SessionListing {
            id: h.id.clone(),
            algorithm: h.algorithm,
            label: h.algorithm.label(true).to_string(),
            state: self.status(),
            generation: self.engine.generation(),
            generations: h.config.generations,
            answers: self.answers.len(),
            created_at_ms: h.created_at_ms,
        }
    }
}
