//! Fitness acquisition: the evaluation-oracle interface, the quantizing
//! pseudo-user, and single-elimination tournament fitness.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::landscape::GaussianMixture;

/// Outcome of a paired comparison between `a` and `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AWins,
    BWins,
    Tie,
}

impl Comparison {
    pub fn reversed(self) -> Self {
        match self {
            Comparison::AWins => Comparison::BWins,
            Comparison::BWins => Comparison::AWins,
            Comparison::Tie => Comparison::Tie,
        }
    }

    pub fn from_order<T: PartialOrd>(a: T, b: T) -> Self {
        if a > b {
            Comparison::AWins
        } else if b > a {
            Comparison::BWins
        } else {
            Comparison::Tie
        }
    }
}

/// The judge an evolutionary engine consults. Implemented by the pseudo-user
/// (absolute or quantized) and by live sessions, where a human answers.
///
/// Any method may return [`CoreError::Suspended`] when the answer is not yet
/// available.
pub trait EvaluationOracle {
    /// Declares the set of points that makes up the current generation's
    /// reference range. Quantizing oracles bin later comparisons against it.
    fn begin_generation(&mut self, _generation: usize, _reference: &[Vec<f64>]) -> Result<()> {
        Ok(())
    }

    /// Scores every point; higher is better.
    fn score_all(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>>;

    fn compare(&mut self, a: &[f64], b: &[f64]) -> Result<Comparison>;

    /// Winner plus how much better it is. Ties carry a magnitude of zero.
    fn compare_with_magnitude(&mut self, a: &[f64], b: &[f64]) -> Result<(Comparison, f64)>;
}

impl<O: EvaluationOracle + ?Sized> EvaluationOracle for &mut O {
    fn begin_generation(&mut self, generation: usize, reference: &[Vec<f64>]) -> Result<()> {
        (**self).begin_generation(generation, reference)
    }
    fn score_all(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        (**self).score_all(points)
    }
    fn compare(&mut self, a: &[f64], b: &[f64]) -> Result<Comparison> {
        (**self).compare(a, b)
    }
    fn compare_with_magnitude(&mut self, a: &[f64], b: &[f64]) -> Result<(Comparison, f64)> {
        (**self).compare_with_magnitude(a, b)
    }
}

/// Number of discrete evaluation levels the pseudo-user answers with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub levels: u32,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self { levels: 5 }
    }
}

impl QuantizerConfig {
    pub fn new(levels: u32) -> Result<Self> {
        let cfg = Self { levels };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(CoreError::Config(format!("levels must be >= 2, got {}", self.levels)));
        }
        Ok(())
    }
}

/// Level of `value` when `[min, max]` is split into `levels` equal bins.
/// Values outside the range saturate. A degenerate range puts everything at
/// the top level.
fn level_of(value: f64, min: f64, max: f64, levels: u32) -> u32 {
    if max <= min {
        return levels;
    }
    let t = (value - min) / (max - min) * f64::from(levels);
    if t.is_nan() || t < 0.0 {
        return 1;
    }
    (t.floor() as u64 + 1).min(u64::from(levels)) as u32
}

/// Maps each value to its equal-width bin over the values' own range:
/// the minimum gets level 1, the maximum gets `levels`.
pub fn quantize_generation(values: &[f64], config: QuantizerConfig) -> Vec<u32> {
    let (min, max) = min_max(values);
    values.iter().map(|v| level_of(*v, min, max, config.levels)).collect()
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

/// How the pseudo-user reports what it sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoUserMode {
    /// Raw landscape values.
    Exact,
    /// Per-generation relative levels.
    Quantized,
}

/// Simulated IEC user: a landscape plus optional per-generation quantization.
#[derive(Clone, Debug)]
pub struct PseudoUser<'m> {
    model: &'m GaussianMixture,
    config: QuantizerConfig,
    mode: PseudoUserMode,
    range: Option<(f64, f64)>,
}

impl<'m> PseudoUser<'m> {
    pub fn new(model: &'m GaussianMixture, config: QuantizerConfig, mode: PseudoUserMode) -> Self {
        Self { model, config, mode, range: None }
    }

    pub fn exact(model: &'m GaussianMixture) -> Self {
        Self::new(model, QuantizerConfig::default(), PseudoUserMode::Exact)
    }

    pub fn quantized(model: &'m GaussianMixture, config: QuantizerConfig) -> Self {
        Self::new(model, config, PseudoUserMode::Quantized)
    }

    pub fn mode(&self) -> PseudoUserMode {
        self.mode
    }

    fn value(&self, point: &[f64]) -> Result<f64> {
        self.model.evaluate(point)
    }

    /// Levels of two points against the current generation's range. Without
    /// a declared generation, the pair itself is the range.
    fn pair_levels(&self, fa: f64, fb: f64) -> (u32, u32) {
        let (min, max) = self.range.unwrap_or((fa.min(fb), fa.max(fb)));
        (
            level_of(fa, min, max, self.config.levels),
            level_of(fb, min, max, self.config.levels),
        )
    }
}

impl EvaluationOracle for PseudoUser<'_> {
    fn begin_generation(&mut self, _generation: usize, reference: &[Vec<f64>]) -> Result<()> {
        let values = reference.iter().map(|p| self.value(p)).collect::<Result<Vec<_>>>()?;
        self.range = if values.is_empty() { None } else { Some(min_max(&values)) };
        Ok(())
    }

    fn score_all(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let values = points.iter().map(|p| self.value(p)).collect::<Result<Vec<_>>>()?;
        Ok(match self.mode {
            PseudoUserMode::Exact => values,
            PseudoUserMode::Quantized => quantize_generation(&values, self.config)
                .into_iter()
                .map(f64::from)
                .collect(),
        })
    }

    fn compare(&mut self, a: &[f64], b: &[f64]) -> Result<Comparison> {
        Ok(self.compare_with_magnitude(a, b)?.0)
    }

    fn compare_with_magnitude(&mut self, a: &[f64], b: &[f64]) -> Result<(Comparison, f64)> {
        let (fa, fb) = (self.value(a)?, self.value(b)?);
        Ok(match self.mode {
            PseudoUserMode::Exact => (Comparison::from_order(fa, fb), (fa - fb).abs()),
            PseudoUserMode::Quantized => {
                let (la, lb) = self.pair_levels(fa, fb);
                (Comparison::from_order(la, lb), f64::from(la.abs_diff(lb)))
            }
        })
    }
}

/// One game of a bracket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Game {
    pub a: usize,
    pub b: usize,
    pub winner: usize,
    /// How much better the winner was, when the comparator reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude: Option<f64>,
}

impl Game {
    pub fn loser(&self) -> usize {
        if self.winner == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// A completed single-elimination tournament.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    entrants: Vec<usize>,
    rounds: Vec<Vec<Game>>,
    champion: usize,
}

impl Bracket {
    pub fn entrants(&self) -> &[usize] {
        &self.entrants
    }

    pub fn rounds(&self) -> &[Vec<Game>] {
        &self.rounds
    }

    pub fn champion(&self) -> usize {
        self.champion
    }

    pub fn games(&self) -> impl Iterator<Item = &Game> {
        self.rounds.iter().flatten()
    }

    pub fn game_count(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }
}

/// Plays a single-elimination tournament over `ids`.
///
/// Round one pairs a uniform shuffle of the entrants; winners advance until
/// one champion remains. `play(a, b)` reports the outcome and an optional
/// magnitude; ties are decided by a fair coin.
pub fn run_single_elimination<R, F>(ids: &[usize], rng: &mut R, mut play: F) -> Result<Bracket>
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize) -> Result<(Comparison, Option<f64>)>,
{
    if ids.len() < 2 || !ids.len().is_power_of_two() {
        return Err(CoreError::Config(format!(
            "single elimination needs a power-of-two field of at least 2, got {}",
            ids.len()
        )));
    }
    let mut alive = ids.to_vec();
    alive.shuffle(rng);
    let mut rounds = Vec::new();
    while alive.len() > 1 {
        let mut games = Vec::with_capacity(alive.len() / 2);
        let mut next = Vec::with_capacity(alive.len() / 2);
        for pair in alive.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            let (outcome, magnitude) = play(a, b)?;
            let winner = match outcome {
                Comparison::AWins => a,
                Comparison::BWins => b,
                Comparison::Tie => {
                    if rng.gen_bool(0.5) {
                        a
                    } else {
                        b
                    }
                }
            };
            next.push(winner);
            games.push(Game { a, b, winner, magnitude });
        }
        rounds.push(games);
        alive = next;
    }
    Ok(Bracket { entrants: ids.to_vec(), rounds, champion: alive[0] })
}

/// What tournament1 counts for each entrant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tournament1Scoring {
    /// Games played: champion and runner-up tie at log2(N).
    #[default]
    GamesPlayed,
    /// Games won: breaks the champion/runner-up tie.
    Wins,
}

/// Games played (or won) by every entrant.
pub fn tournament1_fitness(bracket: &Bracket, scoring: Tournament1Scoring) -> BTreeMap<usize, f64> {
    let mut fitness: BTreeMap<usize, f64> = bracket.entrants.iter().map(|id| (*id, 0.0)).collect();
    for game in bracket.games() {
        match scoring {
            Tournament1Scoring::GamesPlayed => {
                *fitness.get_mut(&game.a).expect("entrant") += 1.0;
                *fitness.get_mut(&game.b).expect("entrant") += 1.0;
            }
            Tournament1Scoring::Wins => {
                *fitness.get_mut(&game.winner).expect("entrant") += 1.0;
            }
        }
    }
    fitness
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tournament2Config {
    pub champion_fitness: f64,
}

impl Default for Tournament2Config {
    fn default() -> Self {
        Self { champion_fitness: 10.0 }
    }
}

/// Magnitude-aware bracket fitness.
///
/// The champion receives `champion_fitness`; every loser receives the fitness
/// of the entrant that beat it minus that game's magnitude, propagated from
/// the final back to round one.
pub fn tournament2_fitness(
    bracket: &Bracket,
    config: &Tournament2Config,
) -> Result<BTreeMap<usize, f64>> {
    if !(config.champion_fitness > 0.0) {
        return Err(CoreError::Config("champion_fitness must be positive".into()));
    }
    let mut fitness = BTreeMap::new();
    fitness.insert(bracket.champion, config.champion_fitness);
    for (r, round) in bracket.rounds.iter().enumerate().rev() {
        for game in round {
            let magnitude = game.magnitude.ok_or_else(|| {
                CoreError::Protocol(format!(
                    "round {} game {} vs {} has no magnitude",
                    r + 1,
                    game.a,
                    game.b
                ))
            })?;
            let winner_fitness = *fitness.get(&game.winner).ok_or_else(|| {
                CoreError::Protocol(format!("winner {} never scored", game.winner))
            })?;
            fitness.insert(game.loser(), winner_fitness - magnitude);
        }
    }
    Ok(fitness)
}
