//! Gaussian mixture evaluation landscapes.
//!
//! The pseudo-user's hidden preference is a sum of `k` axis-aligned Gaussian
//! bumps in `n` dimensions:
//!
//! ```text
//! f(x) = Σ_i a_i · exp(−Σ_j (x_j − μ_ij)² / (2 σ_ij²))
//! ```
//!
//! [`standard_model`] builds the four-peak benchmark used by the experiment
//! grid for n ∈ {3, 5, 7, 10}. Lower dimensions are column prefixes of the
//! 10-D parameter matrices, so all four tasks share one landscape shape.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Dimensionalities of the benchmark tasks.
pub const STANDARD_DIMS: [usize; 4] = [3, 5, 7, 10];

const STANDARD_HEIGHTS: [f64; 4] = [3.1, 3.4, 4.1, 3.0];
const STANDARD_DEVIATIONS: [f64; 4] = [1.5, 2.0, 1.0, 2.0];
const STANDARD_CENTERS: [[f64; 10]; 4] = [
    [-1.0, 1.5, -2.0, -2.5, -1.0, 1.5, -2.0, -2.5, -1.0, 1.5],
    [0.0, -2.0, 3.0, 1.0, 0.0, -2.0, 3.0, 1.0, 0.0, -2.0],
    [-2.5, -2.0, 1.5, 3.5, -2.5, -2.0, 1.5, 3.5, -2.5, -2.0],
    [-2.0, 1.0, -1.0, 3.0, -2.0, 1.0, -1.0, 3.0, -2.0, 1.0],
];

/// A weighted sum of axis-aligned Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct GaussianMixture {
    k: usize,
    n: usize,
    heights: Vec<f64>,
    centers: Vec<Vec<f64>>,
    deviations: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawMixture {
    k: usize,
    n: usize,
    heights: Vec<f64>,
    centers: Vec<Vec<f64>>,
    deviations: Vec<Vec<f64>>,
}

impl TryFrom<RawMixture> for GaussianMixture {
    type Error = CoreError;

    fn try_from(raw: RawMixture) -> Result<Self> {
        let model = GaussianMixture::new(raw.heights, raw.centers, raw.deviations)?;
        if model.k != raw.k || model.n != raw.n {
            return Err(CoreError::Shape(format!(
                "declared k={}, n={} but matrices are {}x{}",
                raw.k, raw.n, model.k, model.n
            )));
        }
        Ok(model)
    }
}

impl GaussianMixture {
    /// Builds a mixture, checking that every matrix is `k × n` and every
    /// deviation is strictly positive.
    pub fn new(
        heights: Vec<f64>,
        centers: Vec<Vec<f64>>,
        deviations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = heights.len();
        if k == 0 {
            return Err(CoreError::Shape("mixture needs at least one component".into()));
        }
        if centers.len() != k || deviations.len() != k {
            return Err(CoreError::Shape(format!(
                "expected {k} rows of centers and deviations, got {} and {}",
                centers.len(),
                deviations.len()
            )));
        }
        let n = centers[0].len();
        if n == 0 {
            return Err(CoreError::Shape("mixture needs at least one dimension".into()));
        }
        for (i, (c, d)) in centers.iter().zip(&deviations).enumerate() {
            if c.len() != n || d.len() != n {
                return Err(CoreError::Shape(format!("row {i} does not have {n} columns")));
            }
            if let Some(bad) = d.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
                return Err(CoreError::Config(format!(
                    "deviation {bad} in row {i} is not strictly positive"
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::Config(format!("non-finite center in row {i}")));
            }
        }
        if heights.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(CoreError::Config("heights must be strictly positive".into()));
        }
        Ok(Self { k, n, heights, centers, deviations })
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn deviations(&self) -> &[Vec<f64>] {
        &self.deviations
    }

    /// Upper bound on the mixture value: the sum of heights.
    pub fn height_sum(&self) -> f64 {
        self.heights.iter().sum()
    }

    /// Evaluates the mixture at `point`.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.n {
            return Err(CoreError::Shape(format!(
                "point has {} components, model has {}",
                point.len(),
                self.n
            )));
        }
        Ok(self.value(point))
    }

    /// Evaluation without the dimension check. Callers guarantee the length.
    pub(crate) fn value(&self, point: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.k {
            total += self.heights[i] * self.component_kernel(i, point);
        }
        total
    }

    fn component_kernel(&self, i: usize, point: &[f64]) -> f64 {
        let exponent: f64 = point
            .iter()
            .zip(&self.centers[i])
            .zip(&self.deviations[i])
            .map(|((x, mu), s)| (x - mu) * (x - mu) / (2.0 * s * s))
            .sum();
        (-exponent).exp()
    }

    /// Analytic gradient of the mixture at `point`.
    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.n {
            return Err(CoreError::Shape(format!(
                "point has {} components, model has {}",
                point.len(),
                self.n
            )));
        }
        let mut grad = vec![0.0; self.n];
        for i in 0..self.k {
            let w = self.heights[i] * self.component_kernel(i, point);
            for j in 0..self.n {
                let s = self.deviations[i][j];
                grad[j] -= w * (point[j] - self.centers[i][j]) / (s * s);
            }
        }
        Ok(grad)
    }
}

/// Builds the four-peak benchmark landscape for `n ∈ {3, 5, 7, 10}`.
pub fn standard_model(n: usize) -> Result<GaussianMixture> {
    if !STANDARD_DIMS.contains(&n) {
        return Err(CoreError::Config(format!(
            "standard model is defined for dimensions {STANDARD_DIMS:?}, not {n}"
        )));
    }
    let centers = STANDARD_CENTERS.iter().map(|row| row[..n].to_vec()).collect();
    let deviations = STANDARD_DEVIATIONS.iter().map(|s| vec![*s; n]).collect();
    GaussianMixture::new(STANDARD_HEIGHTS.to_vec(), centers, deviations)
}

/// Axis-aligned box the search runs in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain")]
pub struct SearchDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawDomain> for SearchDomain {
    type Error = CoreError;

    fn try_from(raw: RawDomain) -> Result<Self> {
        SearchDomain::new(raw.lower, raw.upper)
    }
}

impl SearchDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(CoreError::Shape(format!(
                "domain bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(CoreError::Config(format!(
                    "dimension {j}: lower bound {lo} is not below upper bound {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval in every dimension.
    pub fn cube(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    /// `[-5, 5]^n`, the default box for the benchmark landscapes.
    pub fn standard(n: usize) -> Self {
        Self::cube(n, -5.0, 5.0).expect("non-empty standard domain")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn clamp(&self, point: &mut [f64]) {
        for (x, (lo, hi)) in point.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }

    /// Folds out-of-range coordinates back inside by mirroring at the bound.
    pub fn reflect(&self, point: &mut [f64]) {
        for (x, (lo, hi)) in point.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            let width = hi - lo;
            if !x.is_finite() {
                *x = *lo;
                continue;
            }
            let mut t = (*x - lo).rem_euclid(2.0 * width);
            if t > width {
                t = 2.0 * width - t;
            }
            *x = (lo + t).clamp(*lo, *hi);
        }
    }
}

/// Point-and-value pair returned by [`global_maximum`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Largest grid the scan in [`global_maximum`] will evaluate.
const GRID_BUDGET: usize = 201 * 201 * 201;
const REFINE_STARTS_FROM_GRID: usize = 8;

/// Locates the maximum of `model` over `domain`.
///
/// A uniform grid (at most 201 points per axis, within a fixed evaluation
/// budget) seeds a set of projected gradient ascents; every component center
/// is also used as a start. The best refined point wins.
pub fn global_maximum(model: &GaussianMixture, domain: &SearchDomain) -> Result<Maximum> {
    if model.dim() != domain.dim() {
        return Err(CoreError::Shape(format!(
            "model has {} dimensions, domain has {}",
            model.dim(),
            domain.dim()
        )));
    }
    let n = model.dim();
    let mut per_axis = 2usize;
    while per_axis < 201 && (per_axis + 1).checked_pow(n as u32).is_some_and(|c| c <= GRID_BUDGET)
    {
        per_axis += 1;
    }

    let mut starts = grid_top(model, domain, per_axis, REFINE_STARTS_FROM_GRID);
    for c in model.centers() {
        let mut p = c.clone();
        domain.clamp(&mut p);
        starts.push(p);
    }

    let mut best = Maximum { point: starts[0].clone(), value: f64::NEG_INFINITY };
    for start in starts {
        let refined = ascend(model, domain, start);
        let value = model.value(&refined);
        if value > best.value {
            best = Maximum { point: refined, value };
        }
    }
    Ok(best)
}

fn grid_top(
    model: &GaussianMixture,
    domain: &SearchDomain,
    per_axis: usize,
    keep: usize,
) -> Vec<Vec<f64>> {
    let n = model.dim();
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let (lo, hi) = (domain.lower()[j], domain.upper()[j]);
            (0..per_axis)
                .map(|t| lo + (hi - lo) * t as f64 / (per_axis - 1) as f64)
                .collect()
        })
        .collect();

    let mut top: Vec<(f64, Vec<f64>)> = Vec::with_capacity(keep + 1);
    let mut index = vec![0usize; n];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        let v = model.value(&point);
        if top.len() < keep || v > top[top.len() - 1].0 {
            let pos = top.partition_point(|(tv, _)| *tv >= v);
            top.insert(pos, (v, point.clone()));
            top.truncate(keep);
        }
        // odometer increment
        let mut j = 0;
        loop {
            if j == n {
                return top.into_iter().map(|(_, p)| p).collect();
            }
            index[j] += 1;
            if index[j] < per_axis {
                point[j] = axes[j][index[j]];
                break;
            }
            index[j] = 0;
            point[j] = axes[j][0];
            j += 1;
        }
    }
}

/// Projected gradient ascent with backtracking line search.
fn ascend(model: &GaussianMixture, domain: &SearchDomain, mut x: Vec<f64>) -> Vec<f64> {
    let mut fx = model.value(&x);
    let mut step = 1.0;
    for _ in 0..10_000 {
        let g = model.gradient(&x).expect("dimension checked by caller");
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if gnorm2 < 1e-28 {
            break;
        }
        let mut improved = false;
        let mut trial_step = step * 2.0;
        while trial_step > 1e-14 {
            let mut cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + trial_step * gi).collect();
            domain.clamp(&mut cand);
            let fc = model.value(&cand);
            if fc > fx {
                x = cand;
                fx = fc;
                step = trial_step;
                improved = true;
                break;
            }
            trial_step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            GaussianMixture::new(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![1.0]]),
            Err(CoreError::Shape(_))
        ));
        assert!(matches!(
            GaussianMixture::new(vec![1.0], vec![vec![0.0]], vec![vec![0.0]]),
            Err(CoreError::Config(_))
        ));
        let m = standard_model(3).unwrap();
        assert!(matches!(m.evaluate(&[0.0, 0.0]), Err(CoreError::Shape(_))));
    }

    #[test]
    fn unsupported_dimension() {
        assert!(matches!(standard_model(4), Err(CoreError::Config(_))));
    }

    #[test]
    fn standard_matrix_rows() {
        let m10 = standard_model(10).unwrap();
        assert_eq!(
            m10.centers()[0],
            vec![-1.0, 1.5, -2.0, -2.5, -1.0, 1.5, -2.0, -2.5, -1.0, 1.5]
        );
        let m3 = standard_model(3).unwrap();
        assert_eq!(m3.centers()[2], vec![-2.5, -2.0, 1.5]);
        let m5 = standard_model(5).unwrap();
        assert_eq!(m5.deviations()[1], vec![2.0; 5]);
        assert_eq!(m5.heights(), &[3.1, 3.4, 4.1, 3.0]);
    }

    #[test]
    fn lower_dims_are_prefixes() {
        let m10 = standard_model(10).unwrap();
        for n in STANDARD_DIMS {
            let m = standard_model(n).unwrap();
            for i in 0..4 {
                assert_eq!(m.centers()[i][..], m10.centers()[i][..n]);
            }
        }
    }

    #[test]
    fn far_field_is_negligible() {
        let m = standard_model(3).unwrap();
        assert!(m.evaluate(&[1000.0, 1000.0, 1000.0]).unwrap() < 1e-12);
    }

    #[test]
    fn peak_three_value() {
        let m = standard_model(3).unwrap();
        let v = m.evaluate(&[-2.5, -2.0, 1.5]).unwrap();
        assert!(v >= 4.1);
        // Four terms summed by hand:
        //   3.1·exp(−(1.5²+3.5²+3.5²)/4.5) + 3.4·exp(−(2.5²+0+1.5²)/8)
        //   + 4.1 + 3·exp(−(0.5²+3²+2.5²)/8)
        let expected = 3.1 * (-(2.25 + 12.25 + 12.25) / 4.5f64).exp()
            + 3.4 * (-(6.25 + 0.0 + 2.25) / 8.0f64).exp()
            + 4.1
            + 3.0 * (-(0.25 + 9.0 + 6.25) / 8.0f64).exp();
        assert!((v - expected).abs() < 1e-14);
        assert!((v - PEAK3_REGRESSION).abs() < 1e-12);
    }

    /// Value at the third center of the 3-D model.
    const PEAK3_REGRESSION: f64 = 5.7153226449309225;

    #[test]
    fn lone_peak_maximum() {
        let m = GaussianMixture::new(vec![2.0], vec![vec![0.3, -1.2]], vec![vec![1.0, 0.5]])
            .unwrap();
        let max = global_maximum(&m, &SearchDomain::standard(2)).unwrap();
        assert!((max.value - 2.0).abs() < 1e-12);
        assert!((max.point[0] - 0.3).abs() < 1e-6);
        assert!((max.point[1] + 1.2).abs() < 1e-6);
    }

    #[test]
    fn reflect_stays_inside() {
        let d = SearchDomain::cube(1, -5.0, 5.0).unwrap();
        let mut p = [6.0];
        d.reflect(&mut p);
        assert!((p[0] - 4.0).abs() < 1e-12);
        let mut p = [-27.0];
        d.reflect(&mut p);
        assert!(d.contains(&p));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = standard_model(5).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: GaussianMixture = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"k":1,"n":1,"heights":[1.0],"centers":[[0.0]],"deviations":[[-1.0]]}"#;
        assert!(serde_json::from_str::<GaussianMixture>(bad).is_err());
        let mismatched = r#"{"k":2,"n":1,"heights":[1.0],"centers":[[0.0]],"deviations":[[1.0]]}"#;
        assert!(serde_json::from_str::<GaussianMixture>(mismatched).is_err());
    }
}
