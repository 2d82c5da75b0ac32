//! Experiment grids: every (algorithm, dim, population, run) cell is an
//! independent seeded run; results are assembled into a convergence table.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ea::{run_simulated, Algorithm, DeParams, GaParams, RunConfig, RunRecord};
use crate::error::{CoreError, Result};
use crate::landscape::{standard_model, GaussianMixture, SearchDomain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub interactive: bool,
    pub dims: Vec<usize>,
    pub populations: Vec<usize>,
    pub generations: usize,
    pub runs: usize,
    pub levels: u32,
    pub master_seed: u64,
    pub domain_lower: f64,
    pub domain_upper: f64,
    pub ga: GaParams,
    pub de: DeParams,
    /// Replaces the standard landscape; `dims` must then be its dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landscape: Option<GaussianMixture>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            interactive: true,
            dims: vec![3, 5, 7, 10],
            populations: vec![16, 128],
            generations: 100,
            runs: 100,
            levels: 5,
            master_seed: 2010,
            domain_lower: -5.0,
            domain_upper: 5.0,
            ga: GaParams::default(),
            de: DeParams::default(),
            landscape: None,
        }
    }
}

/// Coordinates of one independent run in the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub algorithm: Algorithm,
    pub dim: usize,
    pub population: usize,
    pub run: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn algorithm_code(a: Algorithm) -> u64 {
    match a {
        Algorithm::Ga => 1,
        Algorithm::Tga1 => 2,
        Algorithm::Tga2 => 3,
        Algorithm::De => 4,
    }
}

/// Seed of one cell; a pure function of its coordinates, so adding cells to
/// a grid never perturbs the others.
pub fn cell_seed(master_seed: u64, key: &CellKey) -> u64 {
    [algorithm_code(key.algorithm), key.dim as u64, key.population as u64, key.run as u64]
        .into_iter()
        .fold(splitmix64(master_seed), |h, v| splitmix64(h ^ v))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.generations == 0 {
            return Err(CoreError::Config("runs and generations must be >= 1".into()));
        }
        if self.algorithms.is_empty() || self.dims.is_empty() || self.populations.is_empty() {
            return Err(CoreError::Config("algorithms, dims and populations must be non-empty".into()));
        }
        for p in &self.populations {
            if *p < 4 || !p.is_power_of_two() {
                return Err(CoreError::Config(format!(
                    "population {p} is not a power of two >= 4"
                )));
            }
        }
        if let Some(model) = &self.landscape {
            if self.dims.iter().any(|d| *d != model.dim()) {
                return Err(CoreError::Config(format!(
                    "custom landscape is {}-D but dims are {:?}",
                    model.dim(),
                    self.dims
                )));
            }
        }
        for d in &self.dims {
            self.model(*d)?;
            for a in &self.algorithms {
                for p in &self.populations {
                    self.run_config(&CellKey { algorithm: *a, dim: *d, population: *p, run: 0 })?
                        .validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn model(&self, dim: usize) -> Result<GaussianMixture> {
        match &self.landscape {
            Some(m) if m.dim() == dim => Ok(m.clone()),
            Some(m) => Err(CoreError::Config(format!(
                "custom landscape is {}-D, requested {dim}-D",
                m.dim()
            ))),
            None => standard_model(dim),
        }
    }

    pub fn run_config(&self, key: &CellKey) -> Result<RunConfig> {
        Ok(RunConfig {
            algorithm: key.algorithm,
            interactive: self.interactive,
            dim: key.dim,
            population: key.population,
            generations: self.generations,
            levels: self.levels,
            domain: Some(SearchDomain::cube(key.dim, self.domain_lower, self.domain_upper)?),
            ga: self.ga.clone(),
            de: self.de.clone(),
        })
    }

    /// Every cell, in canonical order.
    pub fn cells(&self) -> Vec<CellKey> {
        let algorithms: BTreeSet<_> = self.algorithms.iter().copied().collect();
        let dims: BTreeSet<_> = self.dims.iter().copied().collect();
        let pops: BTreeSet<_> = self.populations.iter().copied().collect();
        let mut cells = Vec::new();
        for algorithm in &algorithms {
            for dim in &dims {
                for population in &pops {
                    for run in 0..self.runs {
                        cells.push(CellKey {
                            algorithm: *algorithm,
                            dim: *dim,
                            population: *population,
                            run,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// One (cell, generation) entry of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub algorithm: Algorithm,
    pub interactive: bool,
    pub dim: usize,
    pub population: usize,
    pub run: usize,
    pub generation: usize,
    pub best_abs: f64,
    pub best_so_far_abs: f64,
    pub compares: u64,
    pub evals: u64,
}

impl TableRow {
    pub fn key(&self) -> CellKey {
        CellKey {
            algorithm: self.algorithm,
            dim: self.dim,
            population: self.population,
            run: self.run,
        }
    }
}

pub const CSV_HEADER: &str =
    "algorithm,interactive,dim,population,run,generation,best_abs,best_so_far_abs,compares,evals";

/// Best-of-generation values for every run of a grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    rows: Vec<TableRow>,
}

impl ConvergenceTable {
    /// Builds a table, sorting rows into canonical order.
    pub fn from_rows(mut rows: Vec<TableRow>) -> Self {
        rows.sort_by(|a, b| (a.key(), a.generation).cmp(&(b.key(), b.generation)));
        Self { rows }
    }

    pub fn from_records(records: &[(CellKey, RunRecord)]) -> Self {
        let rows = records
            .iter()
            .flat_map(|(key, rec)| {
                rec.per_generation.iter().map(move |g| TableRow {
                    algorithm: key.algorithm,
                    interactive: rec.interactive,
                    dim: key.dim,
                    population: key.population,
                    run: key.run,
                    generation: g.gen,
                    best_abs: g.best_abs,
                    best_so_far_abs: g.best_so_far_abs,
                    compares: g.compares,
                    evals: g.evals,
                })
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn merge(&self, other: &ConvergenceTable) -> ConvergenceTable {
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Self::from_rows(rows)
    }

    /// Cells that have all `generations + 1` rows.
    pub fn complete_cells(&self, generations: usize) -> BTreeSet<CellKey> {
        let mut complete = BTreeSet::new();
        for chunk in self.rows.chunk_by(|a, b| a.key() == b.key()) {
            let gens: BTreeSet<usize> = chunk.iter().map(|r| r.generation).collect();
            if gens.len() == generations + 1 && gens.iter().copied().eq(0..=generations) {
                complete.insert(chunk[0].key());
            }
        }
        complete
    }

    pub fn algorithms(&self) -> BTreeSet<Algorithm> {
        self.rows.iter().map(|r| r.algorithm).collect()
    }

    /// (dim, population) groups present in the table.
    pub fn groups(&self) -> BTreeSet<(usize, usize)> {
        self.rows.iter().map(|r| (r.dim, r.population)).collect()
    }

    pub fn runs(&self, algorithm: Algorithm, dim: usize, population: usize) -> BTreeSet<usize> {
        self.rows
            .iter()
            .filter(|r| r.algorithm == algorithm && r.dim == dim && r.population == population)
            .map(|r| r.run)
            .collect()
    }

    pub fn max_generation(&self) -> usize {
        self.rows.iter().map(|r| r.generation).max().unwrap_or(0)
    }

    /// Per-run best values at one generation, ordered by run index.
    pub fn values_at(
        &self,
        algorithm: Algorithm,
        dim: usize,
        population: usize,
        generation: usize,
    ) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| {
                r.algorithm == algorithm
                    && r.dim == dim
                    && r.population == population
                    && r.generation == generation
            })
            .map(|r| r.best_abs)
            .collect()
    }

    /// Rows of one run, by generation.
    pub fn series(&self, key: &CellKey) -> Vec<&TableRow> {
        self.rows.iter().filter(|r| r.key() == *key).collect()
    }

    /// Checks that every (algorithm, dim, population) group has the same runs
    /// and generations `0..=G`. Returns a message naming missing cells.
    pub fn check_complete(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(CoreError::Shape("table is empty".into()));
        }
        let generations = self.max_generation();
        let algorithms = self.algorithms();
        let groups = self.groups();
        let all_runs: BTreeSet<usize> = self.rows.iter().map(|r| r.run).collect();
        let complete = self.complete_cells(generations);
        let mut missing = Vec::new();
        for a in &algorithms {
            for (d, p) in &groups {
                for run in &all_runs {
                    let key = CellKey { algorithm: *a, dim: *d, population: *p, run: *run };
                    if !complete.contains(&key) {
                        missing.push(format!("{}/{}D/pop{}/run{}", a, d, p, run));
                    }
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            let shown: Vec<_> = missing.iter().take(10).cloned().collect();
            Err(CoreError::Shape(format!(
                "{} incomplete cells (generations 0..={generations}): {}{}",
                missing.len(),
                shown.join(", "),
                if missing.len() > shown.len() { ", ..." } else { "" }
            )))
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.algorithm,
                r.interactive,
                r.dim,
                r.population,
                r.run,
                r.generation,
                r.best_abs,
                r.best_so_far_abs,
                r.compares,
                r.evals
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| CoreError::Shape("empty CSV".into()))?
            .map_err(|e| CoreError::Shape(e.to_string()))?;
        if header.trim_end() != CSV_HEADER {
            return Err(CoreError::Shape(format!("unexpected CSV header {header:?}")));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| CoreError::Shape(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| CoreError::Shape(format!("line {}: bad {what}", lineno + 2));
            let f: Vec<&str> = line.trim_end().split(',').collect();
            if f.len() != 10 {
                return Err(bad("column count"));
            }
            rows.push(TableRow {
                algorithm: f[0].parse().map_err(|_| bad("algorithm"))?,
                interactive: f[1].parse().map_err(|_| bad("interactive"))?,
                dim: f[2].parse().map_err(|_| bad("dim"))?,
                population: f[3].parse().map_err(|_| bad("population"))?,
                run: f[4].parse().map_err(|_| bad("run"))?,
                generation: f[5].parse().map_err(|_| bad("generation"))?,
                best_abs: f[6].parse().map_err(|_| bad("best_abs"))?,
                best_so_far_abs: f[7].parse().map_err(|_| bad("best_so_far_abs"))?,
                compares: f[8].parse().map_err(|_| bad("compares"))?,
                evals: f[9].parse().map_err(|_| bad("evals"))?,
            });
        }
        Ok(Self::from_rows(rows))
    }
}

/// Runs the given cells (in any order) and assembles their table.
pub fn run_cells(config: &ExperimentConfig, cells: &[CellKey]) -> Result<ConvergenceTable> {
    let records = cells
        .par_iter()
        .map(|key| {
            let model = config.model(key.dim)?;
            let rc = config.run_config(key)?;
            Ok((*key, run_simulated(&rc, &model, cell_seed(config.master_seed, key))?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::from_records(&records))
}

/// Runs the whole grid on the current rayon pool.
pub fn run_grid(config: &ExperimentConfig) -> Result<ConvergenceTable> {
    config.validate()?;
    run_cells(config, &config.cells())
}

/// Runs only the cells `partial` lacks and merges the results. Incomplete
/// cells in `partial` are discarded and recomputed.
pub fn resume_grid(config: &ExperimentConfig, partial: &ConvergenceTable) -> Result<ConvergenceTable> {
    config.validate()?;
    let done = partial.complete_cells(config.generations);
    let kept: Vec<TableRow> =
        partial.rows().iter().filter(|r| done.contains(&r.key())).cloned().collect();
    let todo: Vec<CellKey> = config.cells().into_iter().filter(|c| !done.contains(c)).collect();
    let fresh = run_cells(config, &todo)?;
    Ok(ConvergenceTable::from_rows(kept).merge(&fresh))
}

/// Per-generation distribution of best values in one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub interactive: bool,
    pub dim: usize,
    pub population: usize,
    pub generation: usize,
    pub runs: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn summarize(table: &ConvergenceTable) -> Vec<SummaryRow> {
    let mut rows: Vec<&TableRow> = table.rows().iter().collect();
    rows.sort_by_key(|r| (r.algorithm, r.interactive, r.dim, r.population, r.generation, r.run));
    rows.chunk_by(|a, b| {
        (a.algorithm, a.interactive, a.dim, a.population, a.generation)
            == (b.algorithm, b.interactive, b.dim, b.population, b.generation)
    })
    .map(|chunk| {
        let mut v: Vec<f64> = chunk.iter().map(|r| r.best_abs).collect();
        v.sort_by(f64::total_cmp);
        let first = chunk[0];
        SummaryRow {
            algorithm: first.algorithm,
            interactive: first.interactive,
            dim: first.dim,
            population: first.population,
            generation: first.generation,
            runs: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile(&v, 0.5),
            q25: quantile(&v, 0.25),
            q75: quantile(&v, 0.75),
            min: v[0],
            max: v[v.len() - 1],
        }
    })
    .collect()
}
