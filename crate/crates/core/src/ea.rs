//! The four search engines: GA, tournament1-GA, tournament2-GA on bit
//! genomes, and DE/best/1/bin on real vectors.
//!
//! Every engine talks to the outside world only through an
//! [`EvaluationOracle`], so the same code drives reference runs with the
//! exact landscape, simulated IEC runs with the quantizing pseudo-user, and
//! live sessions where a person answers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::fitness::{
    run_single_elimination, tournament1_fitness, tournament2_fitness, Bracket, Comparison,
    EvaluationOracle, PseudoUser, PseudoUserMode, QuantizerConfig, Tournament1Scoring,
    Tournament2Config,
};
use crate::genotype::{random_vector, BitGenome, GenotypeCodec, DEFAULT_BITS_PER_GENE};
use crate::landscape::{GaussianMixture, SearchDomain};

/// Engine deterministic RNG.
pub type EngineRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ga,
    Tga1,
    Tga2,
    De,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ga, Algorithm::Tga1, Algorithm::Tga2, Algorithm::De];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ga => "ga",
            Algorithm::Tga1 => "tga1",
            Algorithm::Tga2 => "tga2",
            Algorithm::De => "de",
        }
    }

    /// Name used in reports: the interactive variants get an `I` prefix.
    pub fn label(self, interactive: bool) -> &'static str {
        match (self, interactive) {
            (Algorithm::Ga, false) => "GA",
            (Algorithm::Tga1, false) => "TGA1",
            (Algorithm::Tga2, false) => "TGA2",
            (Algorithm::De, false) => "DE",
            (Algorithm::Ga, true) => "IGA",
            (Algorithm::Tga1, true) => "TIGA1",
            (Algorithm::Tga2, true) => "TIGA2",
            (Algorithm::De, true) => "IDE",
        }
    }

    pub fn is_tournament(self) -> bool {
        matches!(self, Algorithm::Tga1 | Algorithm::Tga2)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ga" | "iga" => Ok(Algorithm::Ga),
            "tga1" | "tiga1" => Ok(Algorithm::Tga1),
            "tga2" | "tiga2" => Ok(Algorithm::Tga2),
            "de" | "ide" => Ok(Algorithm::De),
            other => Err(CoreError::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationScope {
    /// Every bit flips independently with the mutation rate.
    #[default]
    PerBit,
    /// With the mutation rate, one uniformly chosen bit of the genome flips.
    PerGenome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub crossover_rate: f64,
    pub crossover_points: usize,
    pub mutation_rate: f64,
    pub mutation_scope: MutationScope,
    pub selection_tournament_size: usize,
    pub bits_per_gene: u32,
    pub gray: bool,
    pub tournament1_scoring: Tournament1Scoring,
    pub tournament2: Tournament2Config,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            crossover_rate: 1.0,
            crossover_points: 2,
            mutation_rate: 0.05,
            mutation_scope: MutationScope::PerBit,
            selection_tournament_size: 2,
            bits_per_gene: DEFAULT_BITS_PER_GENE,
            gray: false,
            tournament1_scoring: Tournament1Scoring::GamesPlayed,
            tournament2: Tournament2Config::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Trial replaces target when the judge cannot tell them apart.
    #[default]
    AcceptTrial,
    KeepTarget,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryHandling {
    #[default]
    Clamp,
    Reflect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeParams {
    pub weight: f64,
    pub crossover_probability: f64,
    pub tie_policy: TiePolicy,
    pub boundary: BoundaryHandling,
    /// Round mutant components onto the GA's 12-bit grid.
    pub snap_to_grid: bool,
}

impl Default for DeParams {
    fn default() -> Self {
        Self {
            weight: 0.8,
            crossover_probability: 0.9,
            tie_policy: TiePolicy::AcceptTrial,
            boundary: BoundaryHandling::Clamp,
            snap_to_grid: false,
        }
    }
}

/// Everything needed to start one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Quantized pseudo-user when true, exact landscape values otherwise.
    #[serde(default)]
    pub interactive: bool,
    pub dim: usize,
    pub population: usize,
    pub generations: usize,
    #[serde(default = "default_levels")]
    pub levels: u32,
    /// Defaults to `[-5, 5]^dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<SearchDomain>,
    #[serde(default)]
    pub ga: GaParams,
    #[serde(default)]
    pub de: DeParams,
}

fn default_levels() -> u32 {
    5
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, interactive: bool, dim: usize, population: usize) -> Self {
        Self {
            algorithm,
            interactive,
            dim,
            population,
            generations: 100,
            levels: default_levels(),
            domain: None,
            ga: GaParams::default(),
            de: DeParams::default(),
        }
    }

    pub fn with_generations(mut self, generations: usize) -> Self {
        self.generations = generations;
        self
    }

    pub fn domain(&self) -> SearchDomain {
        self.domain.clone().unwrap_or_else(|| SearchDomain::standard(self.dim))
    }

    pub fn quantizer(&self) -> QuantizerConfig {
        QuantizerConfig { levels: self.levels }
    }

    pub fn codec(&self) -> Result<GenotypeCodec> {
        Ok(GenotypeCodec::new(self.domain(), self.ga.bits_per_gene)?.with_gray(self.ga.gray))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(CoreError::Config("dim must be positive".into()));
        }
        if self.domain().dim() != self.dim {
            return Err(CoreError::Config(format!(
                "domain has {} dimensions, dim is {}",
                self.domain().dim(),
                self.dim
            )));
        }
        self.quantizer().validate()?;
        let n = self.population;
        match self.algorithm {
            Algorithm::De => {
                if n < 4 {
                    return Err(CoreError::Config(format!("DE needs population >= 4, got {n}")));
                }
                let de = &self.de;
                if !(de.weight > 0.0) || !de.weight.is_finite() {
                    return Err(CoreError::Config("de.weight must be positive".into()));
                }
                if !(0.0..=1.0).contains(&de.crossover_probability) {
                    return Err(CoreError::Config("de.crossover_probability must be in [0,1]".into()));
                }
            }
            Algorithm::Ga | Algorithm::Tga1 | Algorithm::Tga2 => {
                if n < 2 || !n.is_power_of_two() {
                    return Err(CoreError::Config(format!(
                        "GA population must be a power of two, got {n}"
                    )));
                }
                let ga = &self.ga;
                for (name, rate) in
                    [("ga.crossover_rate", ga.crossover_rate), ("ga.mutation_rate", ga.mutation_rate)]
                {
                    if !(0.0..=1.0).contains(&rate) {
                        return Err(CoreError::Config(format!("{name} must be in [0,1]")));
                    }
                }
                if ga.selection_tournament_size == 0 {
                    return Err(CoreError::Config("ga.selection_tournament_size must be >= 1".into()));
                }
                if !(ga.tournament2.champion_fitness > 0.0) {
                    return Err(CoreError::Config(
                        "ga.tournament2.champion_fitness must be positive".into(),
                    ));
                }
                self.codec()?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "members", rename_all = "snake_case")]
pub enum Individuals {
    Bits(Vec<BitGenome>),
    Reals(Vec<Vec<f64>>),
}

impl Individuals {
    pub fn len(&self) -> usize {
        match self {
            Individuals::Bits(v) => v.len(),
            Individuals::Reals(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Population plus the bookkeeping the experiments report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub individuals: Individuals,
    pub generation: usize,
    /// DE's base vector, identified through paired comparisons.
    pub incumbent_best: Option<usize>,
    /// Cumulative paired comparisons charged to the judge.
    pub comparison_count: u64,
    /// Cumulative scalar ratings charged to the judge.
    pub evaluation_count: u64,
}

/// Decoded search-space points of a population.
pub fn phenotypes(pop: &Population, codec: &GenotypeCodec) -> Result<Vec<Vec<f64>>> {
    match &pop.individuals {
        Individuals::Bits(genomes) => genomes.iter().map(|g| codec.decode(g)).collect(),
        Individuals::Reals(vectors) => Ok(vectors.clone()),
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Size-k tournament selection with replacement; equal fitness goes to the
/// earlier draw.
fn select_parent<R: Rng + ?Sized>(fitness: &[f64], k: usize, rng: &mut R) -> usize {
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..k {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c] > fitness[best] {
            best = c;
        }
    }
    best
}

/// Multipoint crossover: cut points are distinct positions in `1..len`,
/// segments alternate between parents.
pub fn multipoint_crossover<R: Rng + ?Sized>(
    a: &BitGenome,
    b: &BitGenome,
    points: usize,
    rng: &mut R,
) -> (BitGenome, BitGenome) {
    let len = a.len();
    let mut cuts = rand::seq::index::sample(rng, len - 1, points.min(len - 1)).into_vec();
    cuts.iter_mut().for_each(|c| *c += 1);
    cuts.sort_unstable();
    let (mut c1, mut c2) = (a.clone(), b.clone());
    let mut swap = false;
    let mut next_cut = cuts.iter().peekable();
    for i in 0..len {
        while next_cut.peek().is_some_and(|c| **c == i) {
            swap = !swap;
            next_cut.next();
        }
        if swap {
            c1.bits_mut()[i] = b.bits()[i];
            c2.bits_mut()[i] = a.bits()[i];
        }
    }
    (c1, c2)
}

pub fn mutate<R: Rng + ?Sized>(
    genome: &mut BitGenome,
    rate: f64,
    scope: MutationScope,
    rng: &mut R,
) {
    match scope {
        MutationScope::PerBit => {
            for bit in genome.bits_mut() {
                if rng.gen_bool(rate) {
                    *bit = !*bit;
                }
            }
        }
        MutationScope::PerGenome => {
            if rng.gen_bool(rate) {
                let i = rng.gen_range(0..genome.len());
                genome.bits_mut()[i] = !genome.bits_mut()[i];
            }
        }
    }
}

/// Outcome of a GA fitness assignment, kept for reports and sessions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaAssessment {
    pub fitness: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<Bracket>,
}

/// One generation of the GA family.
///
/// Fitness comes from the oracle: scalar ratings for plain GA, a
/// single-elimination bracket for the tournament variants. Parents are drawn
/// by tournament selection, recombined by multipoint crossover and mutated;
/// offspring replace the whole population.
pub fn ga_step<O, R>(
    pop: &Population,
    algorithm: Algorithm,
    params: &GaParams,
    codec: &GenotypeCodec,
    oracle: &mut O,
    rng: &mut R,
) -> Result<(Population, GaAssessment)>
where
    O: EvaluationOracle + ?Sized,
    R: Rng + ?Sized,
{
    let Individuals::Bits(genomes) = &pop.individuals else {
        return Err(CoreError::Config("GA step needs a bit-genome population".into()));
    };
    let n = genomes.len();
    if n < 2 || n % 2 != 0 {
        return Err(CoreError::Config(format!("GA population must be even, got {n}")));
    }
    let points = phenotypes(pop, codec)?;
    oracle.begin_generation(pop.generation, &points)?;

    let mut comparisons = pop.comparison_count;
    let mut evaluations = pop.evaluation_count;
    let ids: Vec<usize> = (0..n).collect();
    let assessment = match algorithm {
        Algorithm::Ga => {
            let fitness = oracle.score_all(&points)?;
            if fitness.len() != n {
                return Err(CoreError::Protocol(format!(
                    "oracle rated {} of {n} individuals",
                    fitness.len()
                )));
            }
            evaluations += n as u64;
            GaAssessment { fitness, bracket: None }
        }
        Algorithm::Tga1 => {
            let bracket = run_single_elimination(&ids, rng, |a, b| {
                Ok((oracle.compare(&points[a], &points[b])?, None))
            })?;
            comparisons += bracket.game_count() as u64;
            let by_id = tournament1_fitness(&bracket, params.tournament1_scoring);
            GaAssessment { fitness: by_id.into_values().collect(), bracket: Some(bracket) }
        }
        Algorithm::Tga2 => {
            let bracket = run_single_elimination(&ids, rng, |a, b| {
                let (c, m) = oracle.compare_with_magnitude(&points[a], &points[b])?;
                Ok((c, Some(m)))
            })?;
            comparisons += bracket.game_count() as u64;
            let by_id = tournament2_fitness(&bracket, &params.tournament2)?;
            GaAssessment { fitness: by_id.into_values().collect(), bracket: Some(bracket) }
        }
        Algorithm::De => {
            return Err(CoreError::Config("ga_step called with DE".into()));
        }
    };

    let mut offspring = Vec::with_capacity(n);
    while offspring.len() < n {
        let p1 = &genomes[select_parent(&assessment.fitness, params.selection_tournament_size, rng)];
        let p2 = &genomes[select_parent(&assessment.fitness, params.selection_tournament_size, rng)];
        let (mut c1, mut c2) = if rng.gen_bool(params.crossover_rate) {
            multipoint_crossover(p1, p2, params.crossover_points, rng)
        } else {
            (p1.clone(), p2.clone())
        };
        mutate(&mut c1, params.mutation_rate, params.mutation_scope, rng);
        mutate(&mut c2, params.mutation_rate, params.mutation_scope, rng);
        offspring.push(c1);
        offspring.push(c2);
    }

    Ok((
        Population {
            individuals: Individuals::Bits(offspring),
            generation: pop.generation + 1,
            incumbent_best: None,
            comparison_count: comparisons,
            evaluation_count: evaluations,
        },
        assessment,
    ))
}

/// Finds DE's first incumbent by a king-of-the-hill scan over the initial
/// population: N − 1 paired comparisons.
pub fn de_initialize<O>(pop: &mut Population, oracle: &mut O) -> Result<()>
where
    O: EvaluationOracle + ?Sized,
{
    let Individuals::Reals(xs) = &pop.individuals else {
        return Err(CoreError::Config("DE needs a real-vector population".into()));
    };
    oracle.begin_generation(pop.generation, xs)?;
    let mut incumbent = 0;
    for i in 1..xs.len() {
        if oracle.compare(&xs[i], &xs[incumbent])? == Comparison::AWins {
            incumbent = i;
        }
    }
    pop.comparison_count += xs.len() as u64 - 1;
    pop.incumbent_best = Some(incumbent);
    Ok(())
}

/// Draws `count` distinct indices below `n` avoiding `excluded`.
fn distinct_indices<R: Rng + ?Sized>(
    n: usize,
    count: usize,
    excluded: &[usize],
    rng: &mut R,
) -> Vec<usize> {
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let c = rng.gen_range(0..n);
        if !excluded.contains(&c) && !picked.contains(&c) {
            picked.push(c);
        }
    }
    picked
}

/// Mutant vector of DE/best/1: `best + weight · (r1 − r2)`.
pub fn best_one_mutant(best: &[f64], r1: &[f64], r2: &[f64], weight: f64) -> Vec<f64> {
    best.iter().zip(r1.iter().zip(r2)).map(|(b, (x1, x2))| b + weight * (x1 - x2)).collect()
}

/// Binomial crossover: each component comes from the mutant with probability
/// `cr`; component `forced` always does.
pub fn binomial_crossover<R: Rng + ?Sized>(
    target: &[f64],
    mutant: &[f64],
    cr: f64,
    forced: usize,
    rng: &mut R,
) -> Vec<f64> {
    target
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (t, m))| if rng.gen_bool(cr) || j == forced { *m } else { *t })
        .collect()
}

/// Generates one trial vector per target without consulting the judge.
pub fn de_trials<R: Rng + ?Sized>(
    xs: &[Vec<f64>],
    incumbent: usize,
    params: &DeParams,
    domain: &SearchDomain,
    codec: Option<&GenotypeCodec>,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let n = xs.len();
    let dim = domain.dim();
    let mut trials = Vec::with_capacity(n);
    for i in 0..n {
        let excluded: &[usize] = if i == incumbent { &[i] } else { &[i, incumbent] };
        let r = distinct_indices(n, 2, excluded, rng);
        let mut mutant = best_one_mutant(&xs[incumbent], &xs[r[0]], &xs[r[1]], params.weight);
        match params.boundary {
            BoundaryHandling::Clamp => domain.clamp(&mut mutant),
            BoundaryHandling::Reflect => domain.reflect(&mut mutant),
        }
        if let Some(codec) = codec {
            codec.snap(&mut mutant)?;
        }
        let forced = rng.gen_range(0..dim);
        trials.push(binomial_crossover(&xs[i], &mutant, params.crossover_probability, forced, rng));
    }
    Ok(trials)
}

/// One DE/best/1/bin generation driven entirely by paired comparisons.
///
/// All trials are built from the generation-start population, then each
/// trial challenges its target (trial is `a`, target is `b`). After every
/// selection the slot's survivor challenges the incumbent best (survivor is
/// `a`). That is 2N comparisons per generation.
pub fn de_step<O, R>(
    pop: &Population,
    params: &DeParams,
    domain: &SearchDomain,
    codec: Option<&GenotypeCodec>,
    oracle: &mut O,
    rng: &mut R,
) -> Result<Population>
where
    O: EvaluationOracle + ?Sized,
    R: Rng + ?Sized,
{
    let Individuals::Reals(xs) = &pop.individuals else {
        return Err(CoreError::Config("DE needs a real-vector population".into()));
    };
    let n = xs.len();
    if n < 4 {
        return Err(CoreError::Config(format!("DE needs population >= 4, got {n}")));
    }
    let incumbent = pop
        .incumbent_best
        .ok_or_else(|| CoreError::Protocol("DE population has no incumbent best".into()))?;

    let trials = de_trials(xs, incumbent, params, domain, codec, rng)?;
    let reference: Vec<Vec<f64>> = xs.iter().chain(&trials).cloned().collect();
    oracle.begin_generation(pop.generation, &reference)?;

    let mut next = xs.clone();
    let mut best = incumbent;
    for (i, trial) in trials.into_iter().enumerate() {
        let accept = match oracle.compare(&trial, &next[i])? {
            Comparison::AWins => true,
            Comparison::Tie => params.tie_policy == TiePolicy::AcceptTrial,
            Comparison::BWins => false,
        };
        if accept {
            next[i] = trial;
        }
        if oracle.compare(&next[i], &next[best])? == Comparison::AWins {
            best = i;
        }
    }

    Ok(Population {
        individuals: Individuals::Reals(next),
        generation: pop.generation + 1,
        incumbent_best: Some(best),
        comparison_count: pop.comparison_count + 2 * n as u64,
        evaluation_count: pop.evaluation_count,
    })
}

/// A resumable run: configuration, RNG and current population.
#[derive(Clone, Debug)]
pub struct Engine {
    config: RunConfig,
    codec: GenotypeCodec,
    domain: SearchDomain,
    rng: EngineRng,
    population: Population,
    initialized: bool,
    last_assessment: Option<GaAssessment>,
    last_assessed_points: Option<Vec<Vec<f64>>>,
}

impl Engine {
    /// Draws the initial population. No oracle calls are made.
    pub fn new(config: RunConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let codec = config.codec()?;
        let domain = config.domain();
        let mut rng = EngineRng::seed_from_u64(seed);
        let individuals = match config.algorithm {
            Algorithm::De => Individuals::Reals(
                (0..config.population)
                    .map(|_| {
                        let mut x = random_vector(&mut rng, &domain);
                        if config.de.snap_to_grid {
                            codec.snap(&mut x)?;
                        }
                        Ok(x)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => Individuals::Bits(
                (0..config.population).map(|_| codec.random_genome(&mut rng)).collect(),
            ),
        };
        let population = Population {
            individuals,
            generation: 0,
            incumbent_best: None,
            comparison_count: 0,
            evaluation_count: 0,
        };
        Ok(Self {
            config,
            codec,
            domain,
            rng,
            population,
            initialized: false,
            last_assessment: None,
            last_assessed_points: None,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn codec(&self) -> &GenotypeCodec {
        &self.codec
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn generation(&self) -> usize {
        self.population.generation
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        phenotypes(&self.population, &self.codec).expect("population matches codec")
    }

    /// Most recent GA fitness assignment, if any.
    pub fn last_assessment(&self) -> Option<&GaAssessment> {
        self.last_assessment.as_ref()
    }

    /// Best individual according to the judge: the DE incumbent, or the
    /// fittest member of the last GA generation that was assessed.
    pub fn champion(&self) -> Option<Vec<f64>> {
        match (&self.population.individuals, self.population.incumbent_best) {
            (Individuals::Reals(xs), Some(i)) => Some(xs[i].clone()),
            _ => {
                let a = self.last_assessment.as_ref()?;
                let points = self.last_assessed_points.as_ref()?;
                Some(points[argmax(&a.fitness)].clone())
            }
        }
    }

    /// Pre-search judge work: DE's incumbent scan. A no-op for the GA family.
    /// On error the engine is left untouched.
    pub fn initialize<O: EvaluationOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<()> {
        if self.initialized {
            return Ok(());
        }
        if self.config.algorithm == Algorithm::De {
            let mut pop = self.population.clone();
            de_initialize(&mut pop, oracle)?;
            self.population = pop;
        }
        self.initialized = true;
        Ok(())
    }

    /// Advances one generation. On error the engine is left untouched.
    pub fn step<O: EvaluationOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<()> {
        if !self.initialized {
            self.initialize(oracle)?;
        }
        let mut rng = self.rng.clone();
        match self.config.algorithm {
            Algorithm::De => {
                let snap = self.config.de.snap_to_grid.then_some(&self.codec);
                let next =
                    de_step(&self.population, &self.config.de, &self.domain, snap, oracle, &mut rng)?;
                self.population = next;
            }
            algorithm => {
                let points = self.points();
                let (next, assessment) = ga_step(
                    &self.population,
                    algorithm,
                    &self.config.ga,
                    &self.codec,
                    oracle,
                    &mut rng,
                )?;
                self.population = next;
                self.last_assessment = Some(assessment);
                self.last_assessed_points = Some(points);
            }
        }
        self.rng = rng;
        Ok(())
    }
}

/// Per-generation line of a [`RunRecord`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub gen: usize,
    /// Largest landscape value in the population.
    pub best_abs: f64,
    pub best_so_far_abs: f64,
    /// Cumulative paired comparisons.
    pub compares: u64,
    /// Cumulative scalar ratings.
    pub evals: u64,
    /// The individual `best_abs` was measured at.
    pub best_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub interactive: bool,
    pub dim: usize,
    pub population: usize,
    pub seed: u64,
    pub per_generation: Vec<GenerationRecord>,
}

fn record_generation(
    engine: &Engine,
    model: &GaussianMixture,
    best_so_far: f64,
) -> Result<GenerationRecord> {
    let points = engine.points();
    let values = points.iter().map(|p| model.evaluate(p)).collect::<Result<Vec<_>>>()?;
    let i = argmax(&values);
    let pop = engine.population();
    Ok(GenerationRecord {
        gen: pop.generation,
        best_abs: values[i],
        best_so_far_abs: best_so_far.max(values[i]),
        compares: pop.comparison_count,
        evals: pop.evaluation_count,
        best_point: points[i].clone(),
    })
}

/// Runs `config.generations` generations against `oracle`, reporting the
/// landscape value of each generation's best individual. Selection only ever
/// sees what the oracle says; `model` is used for reporting.
pub fn run<O: EvaluationOracle + ?Sized>(
    config: &RunConfig,
    model: &GaussianMixture,
    oracle: &mut O,
    seed: u64,
) -> Result<RunRecord> {
    if model.dim() != config.dim {
        return Err(CoreError::Shape(format!(
            "model has {} dimensions, config has {}",
            model.dim(),
            config.dim
        )));
    }
    let mut engine = Engine::new(config.clone(), seed)?;
    engine.initialize(oracle)?;
    let mut per_generation = Vec::with_capacity(config.generations + 1);
    let first = record_generation(&engine, model, f64::NEG_INFINITY)?;
    let mut best_so_far = first.best_so_far_abs;
    per_generation.push(first);
    for _ in 0..config.generations {
        engine.step(oracle)?;
        let rec = record_generation(&engine, model, best_so_far)?;
        best_so_far = rec.best_so_far_abs;
        per_generation.push(rec);
    }
    Ok(RunRecord {
        algorithm: config.algorithm,
        interactive: config.interactive,
        dim: config.dim,
        population: config.population,
        seed,
        per_generation,
    })
}

/// [`run`] with the pseudo-user: quantized when `config.interactive`, exact
/// otherwise.
pub fn run_simulated(config: &RunConfig, model: &GaussianMixture, seed: u64) -> Result<RunRecord> {
    let mode = if config.interactive { PseudoUserMode::Quantized } else { PseudoUserMode::Exact };
    let mut oracle = PseudoUser::new(model, config.quantizer(), mode);
    run(config, model, &mut oracle, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::standard_model;

    /// Counts every call it forwards.
    struct Counting<'m> {
        inner: PseudoUser<'m>,
        compares: u64,
        magnitudes: u64,
        ratings: u64,
    }

    impl EvaluationOracle for Counting<'_> {
        fn begin_generation(&mut self, g: usize, r: &[Vec<f64>]) -> Result<()> {
            self.inner.begin_generation(g, r)
        }
        fn score_all(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
            self.ratings += points.len() as u64;
            self.inner.score_all(points)
        }
        fn compare(&mut self, a: &[f64], b: &[f64]) -> Result<Comparison> {
            self.compares += 1;
            self.inner.compare(a, b)
        }
        fn compare_with_magnitude(&mut self, a: &[f64], b: &[f64]) -> Result<(Comparison, f64)> {
            self.magnitudes += 1;
            self.inner.compare_with_magnitude(a, b)
        }
    }

    #[test]
    fn mutant_arithmetic() {
        assert_eq!(best_one_mutant(&[1.0, 1.0], &[2.0, 0.0], &[0.0, 0.0], 0.5), vec![2.0, 1.0]);
    }

    #[test]
    fn full_crossover_copies_mutant() {
        let mut rng = EngineRng::seed_from_u64(5);
        let t = binomial_crossover(&[0.0; 6], &[1.0; 6], 1.0, 2, &mut rng);
        assert_eq!(t, vec![1.0; 6]);
        let t = binomial_crossover(&[0.0; 6], &[1.0; 6], 0.0, 2, &mut rng);
        assert_eq!(t, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_parents_without_mutation_breed_true() {
        let codec = GenotypeCodec::new(SearchDomain::standard(3), 12).unwrap();
        let mut rng = EngineRng::seed_from_u64(8);
        let g = codec.random_genome(&mut rng);
        let (mut a, mut b) = multipoint_crossover(&g, &g, 2, &mut rng);
        mutate(&mut a, 0.0, MutationScope::PerBit, &mut rng);
        mutate(&mut b, 0.0, MutationScope::PerGenome, &mut rng);
        assert_eq!(a, g);
        assert_eq!(b, g);
    }

    #[test]
    fn crossover_swaps_segments() {
        let zeros = BitGenome::new(vec![false; 24], 12).unwrap();
        let ones = BitGenome::new(vec![true; 24], 12).unwrap();
        let mut rng = EngineRng::seed_from_u64(2);
        for _ in 0..100 {
            let (a, b) = multipoint_crossover(&zeros, &ones, 2, &mut rng);
            for i in 0..24 {
                assert_ne!(a.bits()[i], b.bits()[i]);
            }
            let switches = a.bits().windows(2).filter(|w| w[0] != w[1]).count();
            assert_eq!(switches, 2);
            assert!(!a.bits()[0]);
        }
    }

    fn counting(model: &GaussianMixture, quantized: bool) -> Counting<'_> {
        let mode = if quantized { PseudoUserMode::Quantized } else { PseudoUserMode::Exact };
        Counting {
            inner: PseudoUser::new(model, QuantizerConfig::default(), mode),
            compares: 0,
            magnitudes: 0,
            ratings: 0,
        }
    }

    #[test]
    fn comparison_accounting_is_exact() {
        let model = standard_model(3).unwrap();
        for n in [4usize, 16, 128] {
            for algorithm in Algorithm::ALL {
                let config = RunConfig::new(algorithm, true, 3, n);
                let mut engine = Engine::new(config, 42).unwrap();
                let mut oracle = counting(&model, true);
                engine.initialize(&mut oracle).unwrap();
                for _ in 0..5 {
                    let before = engine.population().clone();
                    let (c0, m0, r0) = (oracle.compares, oracle.magnitudes, oracle.ratings);
                    engine.step(&mut oracle).unwrap();
                    let after = engine.population();
                    let n = n as u64;
                    let (dc, dm, dr) =
                        (oracle.compares - c0, oracle.magnitudes - m0, oracle.ratings - r0);
                    let charged = after.comparison_count - before.comparison_count;
                    let rated = after.evaluation_count - before.evaluation_count;
                    match algorithm {
                        Algorithm::De => assert_eq!((dc, dm, dr, charged, rated), (2 * n, 0, 0, 2 * n, 0)),
                        Algorithm::Tga1 => {
                            assert_eq!((dc, dm, dr, charged, rated), (n - 1, 0, 0, n - 1, 0))
                        }
                        Algorithm::Tga2 => {
                            assert_eq!((dc, dm, dr, charged, rated), (0, n - 1, 0, n - 1, 0))
                        }
                        Algorithm::Ga => assert_eq!((dc, dm, dr, charged, rated), (0, 0, n, 0, n)),
                    }
                }
            }
        }
    }

    #[test]
    fn config_errors() {
        assert!(Engine::new(RunConfig::new(Algorithm::Tga1, true, 3, 12), 0).is_err());
        assert!(Engine::new(RunConfig::new(Algorithm::De, true, 3, 3), 0).is_err());
        assert!(Engine::new(RunConfig::new(Algorithm::De, true, 3, 5), 0).is_ok());
        let mut c = RunConfig::new(Algorithm::Ga, false, 3, 16);
        c.ga.mutation_rate = 1.5;
        assert!(matches!(c.validate(), Err(CoreError::Config(_))));
    }

    #[test]
    fn exact_de_never_worsens_a_slot_and_tracks_argmax() {
        let model = standard_model(5).unwrap();
        let config = RunConfig::new(Algorithm::De, false, 5, 16);
        let mut engine = Engine::new(config, 9).unwrap();
        let mut oracle = PseudoUser::exact(&model);
        engine.initialize(&mut oracle).unwrap();
        let domain = SearchDomain::standard(5);
        for _ in 0..30 {
            let before: Vec<f64> = engine.points().iter().map(|p| model.value(p)).collect();
            let inc = engine.population().incumbent_best.unwrap();
            assert_eq!(before[inc], before[argmax(&before)]);
            engine.step(&mut oracle).unwrap();
            let after: Vec<f64> = engine.points().iter().map(|p| model.value(p)).collect();
            for (a, b) in after.iter().zip(&before) {
                assert!(a >= b);
            }
            assert!(engine.points().iter().all(|p| domain.contains(p)));
        }
    }

    #[test]
    fn zero_generations_records_initial_population() {
        let model = standard_model(3).unwrap();
        let config = RunConfig::new(Algorithm::Ga, false, 3, 16).with_generations(0);
        let rec = run_simulated(&config, &model, 1).unwrap();
        assert_eq!(rec.per_generation.len(), 1);
        assert_eq!(rec.per_generation[0].gen, 0);
    }

    #[test]
    fn runs_are_reproducible() {
        let model = standard_model(3).unwrap();
        for algorithm in Algorithm::ALL {
            let config = RunConfig::new(algorithm, true, 3, 16).with_generations(10);
            let a = run_simulated(&config, &model, 77).unwrap();
            let b = run_simulated(&config, &model, 77).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    #[test]
    fn suspended_step_leaves_engine_untouched() {
        struct Refuses;
        impl EvaluationOracle for Refuses {
            fn score_all(&mut self, _: &[Vec<f64>]) -> Result<Vec<f64>> {
                Err(CoreError::Suspended)
            }
            fn compare(&mut self, _: &[f64], _: &[f64]) -> Result<Comparison> {
                Err(CoreError::Suspended)
            }
            fn compare_with_magnitude(&mut self, _: &[f64], _: &[f64]) -> Result<(Comparison, f64)> {
                Err(CoreError::Suspended)
            }
        }
        let mut engine = Engine::new(RunConfig::new(Algorithm::Tga2, true, 3, 8), 3).unwrap();
        let before = engine.population().clone();
        assert_eq!(engine.step(&mut Refuses), Err(CoreError::Suspended));
        assert_eq!(engine.population(), &before);
    }
}
