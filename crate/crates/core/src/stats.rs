//! Paired nonparametric tests and the per-generation significance map.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_binomial;

use crate::ea::Algorithm;
use crate::error::{CoreError, Result};
use crate::simulation::ConvergenceTable;

/// Direction of the one-sided alternative, stated for `x` relative to `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Greater,
    Less,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub p_value: f64,
    pub significant: bool,
    /// Pairs left after dropping ties.
    pub n: usize,
}

/// Differences `x − y` with exact ties removed.
fn nonzero_differences(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(CoreError::Shape(format!(
            "paired samples have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect())
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let p: f64 = (k..=n).map(|i| (ln_binomial(n as u64, i as u64) - ln2n).exp()).sum();
    p.min(1.0)
}

/// Exact one-sided sign test on paired samples. Tied pairs are dropped.
pub fn sign_test(x: &[f64], y: &[f64], alternative: Alternative, alpha: f64) -> Result<TestOutcome> {
    let d = nonzero_differences(x, y)?;
    if d.is_empty() {
        return Err(CoreError::UndefinedTest("every pair is tied".into()));
    }
    let n = d.len();
    let positive = d.iter().filter(|v| **v > 0.0).count();
    let p_value = match alternative {
        Alternative::Greater => binomial_upper_tail(n, positive),
        Alternative::Less => binomial_upper_tail(n, n - positive),
    };
    Ok(TestOutcome { p_value, significant: p_value <= alpha, n })
}

/// Ranks of `values` (1-based), ties sharing the average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Largest sample evaluated with the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;
pub const WILCOXON_MIN_PAIRS: usize = 6;

/// Signed-rank statistic `W+` of paired samples, after dropping ties.
pub fn signed_rank_statistic(x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>, Vec<bool>)> {
    let d = nonzero_differences(x, y)?;
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let positive: Vec<bool> = d.iter().map(|v| *v > 0.0).collect();
    let w_plus = ranks.iter().zip(&positive).filter(|(_, p)| **p).map(|(r, _)| r).sum();
    Ok((w_plus, ranks, positive))
}

/// Exact null tail of `W+` by dynamic programming over the (doubled) ranks.
fn exact_signed_rank_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    // Doubled ranks are integers even with half-rank ties.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut ways = vec![0.0f64; max_sum + 1];
    ways[0] = 1.0;
    for r in &doubled {
        for s in (*r..=max_sum).rev() {
            ways[s] += ways[s - r];
        }
    }
    let all = 2f64.powi(ranks.len() as i32);
    let observed = (2.0 * w_plus).round() as usize;
    let tail: f64 = match alternative {
        Alternative::Greater => ways[observed..].iter().sum(),
        Alternative::Less => ways[..=observed].iter().sum(),
    };
    (tail / all).min(1.0)
}

/// One-sided Wilcoxon signed-rank test.
///
/// Up to 25 non-tied pairs the null distribution is computed exactly (tied
/// ranks included); larger samples use the normal approximation with tie
/// and continuity corrections.
pub fn wilcoxon_signed_rank(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    alpha: f64,
) -> Result<TestOutcome> {
    let (w_plus, ranks, _) = signed_rank_statistic(x, y)?;
    let n = ranks.len();
    if n < WILCOXON_MIN_PAIRS {
        return Err(CoreError::UndefinedTest(format!(
            "{n} non-tied pairs, need at least {WILCOXON_MIN_PAIRS}"
        )));
    }
    let total: f64 = ranks.iter().sum();
    let p_value = if n <= WILCOXON_EXACT_MAX {
        exact_signed_rank_p(&ranks, w_plus, alternative)
    } else {
        let nf = n as f64;
        let mean = total / 2.0;
        let mut tie_term = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        for group in sorted.chunk_by(|a, b| a == b) {
            let t = group.len() as f64;
            tie_term += t * t * t - t;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        match alternative {
            Alternative::Greater => 1.0 - normal.cdf((w_plus - mean - 0.5) / var.sqrt()),
            Alternative::Less => normal.cdf((w_plus - mean + 0.5) / var.sqrt()),
        }
    };
    Ok(TestOutcome { p_value, significant: p_value <= alpha, n })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Sign,
    Wilcoxon,
}

impl TestKind {
    /// p-value of the one-sided test; an undefined test counts as p = 1.
    pub fn p_value(self, x: &[f64], y: &[f64], alternative: Alternative) -> Result<f64> {
        let outcome = match self {
            TestKind::Sign => sign_test(x, y, alternative, 0.05),
            TestKind::Wilcoxon => wilcoxon_signed_rank(x, y, alternative, 0.05),
        };
        match outcome {
            Ok(o) => Ok(o.p_value),
            Err(CoreError::UndefinedTest(_)) => Ok(1.0),
            Err(e) => Err(e),
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sign" => Ok(TestKind::Sign),
            "wilcoxon" => Ok(TestKind::Wilcoxon),
            other => Err(CoreError::Config(format!("unknown test {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    BetterThanAll,
    PoorerThanAtLeastOne,
    Neither,
}

impl Classification {
    pub fn symbol(self) -> char {
        match self {
            Classification::BetterThanAll => 'B',
            Classification::PoorerThanAtLeastOne => 'P',
            Classification::Neither => '·',
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::BetterThanAll => "better_than_all",
            Classification::PoorerThanAtLeastOne => "poorer_than_at_least_one",
            Classification::Neither => "neither",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpponentP {
    pub opponent: Algorithm,
    /// One-sided p that the focal algorithm is better.
    pub p_better: f64,
    /// One-sided p that the focal algorithm is poorer.
    pub p_poorer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceCell {
    pub dim: usize,
    pub population: usize,
    pub generation: usize,
    pub classification: Classification,
    pub p_values: Vec<OpponentP>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMap {
    pub focal: Algorithm,
    pub opponents: Vec<Algorithm>,
    pub test: TestKind,
    pub alpha: f64,
    pub cells: Vec<SignificanceCell>,
}

/// Classifies the focal algorithm at every generation of every (dim,
/// population) group: better than all opponents, poorer than at least one,
/// or neither. Runs are paired by index.
pub fn classify_focal(
    table: &ConvergenceTable,
    focal: Algorithm,
    opponents: &[Algorithm],
    test: TestKind,
    alpha: f64,
) -> Result<SignificanceMap> {
    if opponents.is_empty() {
        return Err(CoreError::Config("no opponents given".into()));
    }
    let mut cells = Vec::new();
    for (dim, population) in table.groups() {
        let focal_runs = table.runs(focal, dim, population);
        if focal_runs.is_empty() {
            return Err(CoreError::Shape(format!("{focal} missing for {dim}-D pop {population}")));
        }
        for opp in opponents {
            let runs = table.runs(*opp, dim, population);
            if runs != focal_runs {
                return Err(CoreError::Shape(format!(
                    "{focal} has {} runs but {opp} has {} for {dim}-D pop {population}",
                    focal_runs.len(),
                    runs.len()
                )));
            }
        }
        for generation in 0..=table.max_generation() {
            let x = table.values_at(focal, dim, population, generation);
            let mut p_values = Vec::with_capacity(opponents.len());
            for opp in opponents {
                let y = table.values_at(*opp, dim, population, generation);
                if x.len() != y.len() {
                    return Err(CoreError::Shape(format!(
                        "generation {generation}: {} vs {} values for {focal}/{opp}",
                        x.len(),
                        y.len()
                    )));
                }
                p_values.push(OpponentP {
                    opponent: *opp,
                    p_better: test.p_value(&x, &y, Alternative::Greater)?,
                    p_poorer: test.p_value(&x, &y, Alternative::Less)?,
                });
            }
            let classification = if p_values.iter().all(|p| p.p_better <= alpha) {
                Classification::BetterThanAll
            } else if p_values.iter().any(|p| p.p_poorer <= alpha) {
                Classification::PoorerThanAtLeastOne
            } else {
                Classification::Neither
            };
            cells.push(SignificanceCell { dim, population, generation, classification, p_values });
        }
    }
    Ok(SignificanceMap { focal, opponents: opponents.to_vec(), test, alpha, cells })
}

impl SignificanceMap {
    pub fn row(&self, dim: usize, population: usize) -> Vec<Classification> {
        self.cells
            .iter()
            .filter(|c| c.dim == dim && c.population == population)
            .map(|c| c.classification)
            .collect()
    }

    /// First generation of the BetterThanAll run that reaches the last
    /// generation, or `None` when the last generation is not BetterThanAll.
    pub fn final_band_onset(&self, dim: usize, population: usize) -> Option<usize> {
        let row = self.row(dim, population);
        let mut onset = None;
        for (g, c) in row.iter().enumerate().rev() {
            if *c == Classification::BetterThanAll {
                onset = Some(g);
            } else {
                break;
            }
        }
        onset
    }

    /// One line per (dim, population): B better than all, P poorer than at
    /// least one, · neither.
    pub fn raster(&self) -> String {
        let mut groups: Vec<(usize, usize)> =
            self.cells.iter().map(|c| (c.dim, c.population)).collect();
        groups.dedup();
        let mut out = String::new();
        for (dim, pop) in groups {
            let line: String = self.row(dim, pop).iter().map(|c| c.symbol()).collect();
            out.push_str(&format!("{dim:>2}-D pop {pop:>3} |{line}|\n"));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "dim,population,generation,classification")?;
        for opp in &self.opponents {
            write!(out, ",p_better_{opp},p_poorer_{opp}")?;
        }
        writeln!(out)?;
        for c in &self.cells {
            write!(out, "{},{},{},{}", c.dim, c.population, c.generation, c.classification)?;
            for p in &c.p_values {
                write!(out, ",{},{}", p.p_better, p.p_poorer)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
