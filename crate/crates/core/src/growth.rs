//! Frequency-dependent expected log-growth and its maximization over the
//! simplex.
//!
//! The objective for a rebalancing period of `n` steps is
//! `g_n(K) = (1/n) E[log(1 + K' X_n)]` where `X_n` is the compound return
//! over the block. It is concave in `K`, and for weights in the simplex the
//! argument of the log equals `sum_i K_i (1 + X_{n,i}) > 0`, so the value is
//! always finite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::distributions::{
    DistributionError, JointReturnDistribution, DEFAULT_ENUMERATION_CAP,
};

/// Weight vectors must sum to one within this bound.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Converged weights below this threshold are zeroed and the rest
/// renormalized, so vertex optima come out as exact coordinate vectors.
pub const WEIGHT_CLIP: f64 = 1e-12;

/// Two candidate optima whose values are within this bound are treated as
/// tied; ties are broken toward vertices, lowest asset index first.
const VERTEX_TIE_TOLERANCE: f64 = 1e-12;

/// Step sizes below this are considered a stall.
const MIN_STEP: f64 = 1e-18;

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("weight vector has {got} components, distribution has {expected} assets")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weight {value} at index {index} is outside [0, 1]")]
    WeightOutOfRange { index: usize, value: f64 },
    #[error("weights sum to {sum}, more than {WEIGHT_SUM_TOLERANCE} away from 1")]
    WeightSum { sum: f64 },
    #[error("Monte Carlo evaluation needs at least {minimum} samples, got {got}")]
    TooFewSamples { got: usize, minimum: usize },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// A point in the long-only fully-invested simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validate raw weights: each in [0, 1], summing to one within
    /// [`WEIGHT_SUM_TOLERANCE`].
    pub fn new(weights: Vec<f64>) -> Result<Self, GrowthError> {
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(GrowthError::WeightOutOfRange { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(GrowthError::WeightSum { sum });
        }
        Ok(Self(weights))
    }

    /// Equal weight on every asset.
    pub fn uniform(m: usize) -> Self {
        let mut weights = vec![1.0 / m as f64; m];
        normalize(&mut weights);
        Self(weights)
    }

    /// All funds in asset `j`: the coordinate vector e_j.
    pub fn vertex(m: usize, j: usize) -> Self {
        assert!(j < m, "vertex index out of range");
        let mut weights = vec![0.0; m];
        weights[j] = 1.0;
        Self(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How a [`GrowthReport`] value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluationMethod {
    Exact,
    MonteCarlo,
}

/// Expected log-growth at one weight vector, with gradient.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    /// g_n(K) in nats per step.
    pub value: f64,
    /// Partial derivatives of g_n with respect to each weight.
    pub gradient: Vec<f64>,
    pub method: EvaluationMethod,
    /// Standard error of the value estimate; 0 for exact evaluation.
    pub std_error: f64,
    /// Rebalancing period the report refers to.
    pub n: usize,
    /// Number of Monte Carlo draws; 0 for exact evaluation.
    pub sample_count: usize,
}

/// Result of maximizing g_n over the simplex.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub optimal_weights: WeightVector,
    pub optimal_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Simplex first-order optimality measure at the returned point:
    /// `max_i dg/dK_i - sum_i K_i dg/dK_i`, nonnegative up to rounding and
    /// at most the tolerance when converged.
    pub first_order_gap: f64,
}

/// Tunables for [`optimize`].
#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    /// Convergence threshold on the simplex first-order gap.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial multiplicative-weights step size, halved on non-improvement.
    pub initial_step: f64,
    /// Cap on `S^n` for the exact evaluation backing the optimizer.
    pub enumeration_cap: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 100_000,
            initial_step: 1.0,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// Exact compound law flattened for repeated objective evaluation.
/// Row `k` holds the per-asset growth factors `1 + X_{n,i}` of outcome `k`.
struct CompoundTable {
    n: usize,
    assets: usize,
    probabilities: Vec<f64>,
    factors: Vec<f64>,
}

impl CompoundTable {
    fn build(
        dist: &JointReturnDistribution,
        n: usize,
        cap: u64,
    ) -> Result<Self, GrowthError> {
        let outcomes = dist.compound_capped(n, cap)?;
        let assets = dist.asset_count();
        let mut probabilities = Vec::with_capacity(outcomes.len());
        let mut factors = Vec::with_capacity(outcomes.len() * assets);
        for outcome in outcomes {
            probabilities.push(outcome.probability);
            factors.extend(outcome.total_returns.iter().map(|x| 1.0 + x));
        }
        Ok(Self {
            n,
            assets,
            probabilities,
            factors,
        })
    }

    fn value(&self, weights: &[f64]) -> f64 {
        let mut total = 0.0;
        for (k, &p) in self.probabilities.iter().enumerate() {
            let row = &self.factors[k * self.assets..(k + 1) * self.assets];
            let s: f64 = row.iter().zip(weights).map(|(f, w)| f * w).sum();
            total += p * s.ln();
        }
        total / self.n as f64
    }

    fn value_and_gradient(&self, weights: &[f64]) -> (f64, Vec<f64>) {
        let mut total = 0.0;
        let mut gradient = vec![0.0; self.assets];
        for (k, &p) in self.probabilities.iter().enumerate() {
            let row = &self.factors[k * self.assets..(k + 1) * self.assets];
            let s: f64 = row.iter().zip(weights).map(|(f, w)| f * w).sum();
            total += p * s.ln();
            for (g, &f) in gradient.iter_mut().zip(row) {
                *g += p * (f - 1.0) / s;
            }
        }
        let steps = self.n as f64;
        for g in &mut gradient {
            *g /= steps;
        }
        (total / steps, gradient)
    }
}

/// Exact g_n(K) and gradient by enumeration of the compound law.
pub fn growth_exact(
    dist: &JointReturnDistribution,
    weights: &WeightVector,
    n: usize,
) -> Result<GrowthReport, GrowthError> {
    growth_exact_capped(dist, weights, n, DEFAULT_ENUMERATION_CAP)
}

/// Exact g_n(K) with an explicit enumeration cap.
pub fn growth_exact_capped(
    dist: &JointReturnDistribution,
    weights: &WeightVector,
    n: usize,
    cap: u64,
) -> Result<GrowthReport, GrowthError> {
    check_dimensions(dist, weights)?;
    let table = CompoundTable::build(dist, n, cap)?;
    let (value, gradient) = table.value_and_gradient(weights.weights());
    Ok(GrowthReport {
        value,
        gradient,
        method: EvaluationMethod::Exact,
        std_error: 0.0,
        n,
        sample_count: 0,
    })
}

/// Monte Carlo estimate of g_n(K) from `samples` i.i.d. compound draws.
///
/// Deterministic in `seed`; the reported standard error is the sample
/// standard deviation of the per-draw log-growth divided by sqrt(samples).
pub fn growth_mc(
    dist: &JointReturnDistribution,
    weights: &WeightVector,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<GrowthReport, GrowthError> {
    const MIN_SAMPLES: usize = 100;
    check_dimensions(dist, weights)?;
    if n == 0 {
        return Err(GrowthError::Distribution(DistributionError::InvalidSteps));
    }
    if samples < MIN_SAMPLES {
        return Err(GrowthError::TooFewSamples {
            got: samples,
            minimum: MIN_SAMPLES,
        });
    }

    let m = dist.asset_count();
    let w = weights.weights();
    let steps = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = vec![1.0f64; m];
    let mut gradient = vec![0.0f64; m];
    // Welford accumulation of the per-draw log-growth.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for draw in 0..samples {
        factors.fill(1.0);
        for _ in 0..n {
            let outcome = &dist.support()[dist.sample_index(&mut rng)];
            for (f, x) in factors.iter_mut().zip(&outcome.returns) {
                *f *= 1.0 + x;
            }
        }
        let s: f64 = factors.iter().zip(w).map(|(f, w)| f * w).sum();
        let y = s.ln() / steps;
        let delta = y - mean;
        mean += delta / (draw + 1) as f64;
        m2 += delta * (y - mean);
        for (g, &f) in gradient.iter_mut().zip(&factors) {
            *g += (f - 1.0) / s;
        }
    }
    let scale = steps * samples as f64;
    for g in &mut gradient {
        *g /= scale;
    }
    let variance = if samples > 1 {
        m2 / (samples - 1) as f64
    } else {
        0.0
    };
    Ok(GrowthReport {
        value: mean,
        gradient,
        method: EvaluationMethod::MonteCarlo,
        std_error: (variance / samples as f64).sqrt(),
        n,
        sample_count: samples,
    })
}

/// Maximize g_n over the simplex by multiplicative-weights ascent.
///
/// Starts from uniform weights and updates `K_i <- K_i exp(eta dg/dK_i)`
/// (renormalized), halving `eta` whenever a step would decrease the
/// objective. Convergence is declared when the simplex first-order gap drops
/// to `config.tolerance`. Flat optima are resolved deterministically: when a
/// vertex attains the optimal value, the lowest-index such vertex is
/// returned.
pub fn optimize(
    dist: &JointReturnDistribution,
    n: usize,
    config: &OptimizeConfig,
) -> Result<OptimizationResult, GrowthError> {
    let table = CompoundTable::build(dist, n, config.enumeration_cap)?;
    let m = dist.asset_count();

    let mut weights = WeightVector::uniform(m).0;
    let (mut value, mut gradient) = table.value_and_gradient(&weights);
    let mut step = config.initial_step;
    let mut iterations = 0;

    loop {
        if first_order_gap(&weights, &gradient) <= config.tolerance
            || iterations >= config.max_iterations
        {
            break;
        }
        let mut stepped = false;
        while step >= MIN_STEP {
            let candidate = multiplicative_step(&weights, &gradient, step);
            let candidate_value = table.value(&candidate);
            if candidate_value >= value {
                weights = candidate;
                let refreshed = table.value_and_gradient(&weights);
                value = refreshed.0;
                gradient = refreshed.1;
                stepped = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !stepped {
            break;
        }
    }

    // Flat optima include vertices; prefer the lowest-index vertex that ties
    // or beats the ascent point, provided it is first-order optimal itself.
    let vertex_values: Vec<f64> = (0..m)
        .map(|j| table.value(WeightVector::vertex(m, j).weights()))
        .collect();
    let best = vertex_values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let best_vertex = vertex_values
        .iter()
        .position(|&v| v >= best - VERTEX_TIE_TOLERANCE)
        .expect("at least one vertex");
    if vertex_values[best_vertex] >= value - VERTEX_TIE_TOLERANCE {
        let candidate = WeightVector::vertex(m, best_vertex).0;
        let (candidate_value, candidate_gradient) = table.value_and_gradient(&candidate);
        if first_order_gap(&candidate, &candidate_gradient) <= config.tolerance {
            weights = candidate;
            value = candidate_value;
            gradient = candidate_gradient;
        }
    }

    // Clip stray mass so vertex optima compare cleanly against e_j.
    let clipped = clip_weights(&weights);
    if clipped != weights {
        weights = clipped;
        let refreshed = table.value_and_gradient(&weights);
        value = refreshed.0;
        gradient = refreshed.1;
    }

    let gap = first_order_gap(&weights, &gradient);
    Ok(OptimizationResult {
        optimal_weights: WeightVector(weights),
        optimal_value: value,
        iterations,
        converged: gap <= config.tolerance,
        first_order_gap: gap,
    })
}

/// One optimization per requested rebalancing period, sorted by `n`.
/// Per-period failures (for example an enumeration-cap overflow at large `n`)
/// are recorded and do not abort the remaining periods.
pub fn frequency_sweep(
    dist: &JointReturnDistribution,
    periods: &[usize],
    config: &OptimizeConfig,
) -> Vec<SweepEntry> {
    let mut entries: Vec<SweepEntry> = periods
        .iter()
        .map(|&n| SweepEntry {
            n,
            result: optimize(dist, n, config),
        })
        .collect();
    entries.sort_by_key(|entry| entry.n);
    entries
}

/// One row of a frequency sweep.
#[derive(Debug)]
pub struct SweepEntry {
    pub n: usize,
    pub result: Result<OptimizationResult, GrowthError>,
}

/// Render sweep results as CSV: `n,g_star,converged,iterations,K_1,...,K_m`,
/// full double precision (17 significant digits). Failed periods are
/// omitted.
pub fn sweep_to_csv(entries: &[SweepEntry], asset_count: usize) -> String {
    let mut out = String::from("n,g_star,converged,iterations");
    for i in 1..=asset_count {
        out.push_str(&format!(",K_{i}"));
    }
    out.push('\n');
    for entry in entries {
        if let Ok(result) = &entry.result {
            out.push_str(&format!(
                "{},{:.16e},{},{}",
                entry.n, result.optimal_value, result.converged, result.iterations
            ));
            for &w in result.optimal_weights.weights() {
                out.push_str(&format!(",{w:.16e}"));
            }
            out.push('\n');
        }
    }
    out
}

fn check_dimensions(
    dist: &JointReturnDistribution,
    weights: &WeightVector,
) -> Result<(), GrowthError> {
    if weights.len() != dist.asset_count() {
        return Err(GrowthError::DimensionMismatch {
            expected: dist.asset_count(),
            got: weights.len(),
        });
    }
    Ok(())
}

/// `max_i g_i - K' g`, the simplex first-order optimality gap.
fn first_order_gap(weights: &[f64], gradient: &[f64]) -> f64 {
    let max = gradient.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dot: f64 = weights.iter().zip(gradient).map(|(w, g)| w * g).sum();
    max - dot
}

fn multiplicative_step(weights: &[f64], gradient: &[f64], step: f64) -> Vec<f64> {
    let max = gradient.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut next: Vec<f64> = weights
        .iter()
        .zip(gradient)
        // Shifting the exponent by the max gradient leaves the normalized
        // update unchanged and keeps every exponent nonpositive; the floor
        // avoids flushing a weight to exactly zero, which multiplicative
        // updates could never recover from.
        .map(|(w, g)| w * (step * (g - max)).max(-700.0).exp())
        .collect();
    normalize(&mut next);
    next
}

fn clip_weights(weights: &[f64]) -> Vec<f64> {
    let mut clipped: Vec<f64> = weights
        .iter()
        .map(|&w| if w < WEIGHT_CLIP { 0.0 } else { w })
        .collect();
    normalize(&mut clipped);
    clipped
}

fn normalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Outcome;

    fn dist(names: &[&str], outcomes: &[(&[f64], f64)]) -> JointReturnDistribution {
        JointReturnDistribution::new(
            names.iter().map(|s| s.to_string()).collect(),
            outcomes
                .iter()
                .map(|(returns, p)| Outcome {
                    returns: returns.to_vec(),
                    probability: *p,
                })
                .collect(),
        )
        .unwrap()
    }

    /// Risky +-0.5 with P(up) = 0.6, plus cash at rate 0: the closed-form
    /// Kelly fixture with K* = (0.4, 0.6).
    fn kelly_fixture() -> JointReturnDistribution {
        dist(&["J", "CASH"], &[(&[0.5, 0.0], 0.6), (&[-0.5, 0.0], 0.4)])
    }

    /// Risky {+0.1, -0.05} at p = 0.5 each plus cash at 0; the risky asset is
    /// dominant (mean ratio vs cash ~ 0.98086).
    fn dominant_fixture() -> JointReturnDistribution {
        dist(
            &["RISKY", "CASH"],
            &[(&[0.1, 0.0], 0.5), (&[-0.05, 0.0], 0.5)],
        )
    }

    fn kelly_value() -> f64 {
        0.6 * 1.2f64.ln() + 0.4 * 0.8f64.ln()
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.4, 0.6]).is_ok());
        assert!(matches!(
            WeightVector::new(vec![0.4, 0.7]),
            Err(GrowthError::WeightSum { .. })
        ));
        assert!(matches!(
            WeightVector::new(vec![-0.1, 1.1]),
            Err(GrowthError::WeightOutOfRange { .. })
        ));
        let u = WeightVector::uniform(3);
        assert!((u.weights().iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOLERANCE);
        assert_eq!(WeightVector::vertex(3, 1).weights(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn all_cash_growth_is_zero() {
        let d = dist(&["A", "CASH"], &[(&[0.3, 0.0], 0.5), (&[-0.3, 0.0], 0.5)]);
        let cash = WeightVector::vertex(2, 1);
        for n in 1..=3 {
            let report = growth_exact(&d, &cash, n).unwrap();
            assert_eq!(report.value, 0.0);
            assert_eq!(report.gradient[1], 0.0);
            assert_eq!(report.std_error, 0.0);
        }
    }

    #[test]
    fn kelly_fixture_value_matches_hand_sum() {
        let k = WeightVector::new(vec![0.4, 0.6]).unwrap();
        let report = growth_exact(&kelly_fixture(), &k, 1).unwrap();
        assert!((report.value - kelly_value()).abs() <= 1e-10);
        // 11-point grid: the grid maximum sits at K_risky = 0.4.
        let table_max = (0..=10)
            .map(|i| {
                let w = i as f64 / 10.0;
                let k = WeightVector::new(vec![w, 1.0 - w]).unwrap();
                (i, growth_exact(&kelly_fixture(), &k, 1).unwrap().value)
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert_eq!(table_max.0, 4);
    }

    #[test]
    fn single_asset_growth_is_frequency_invariant() {
        let d = dist(
            &["A", "B"],
            &[(&[0.5, -0.2], 0.6), (&[-0.5, 0.3], 0.4)],
        );
        for j in 0..2 {
            let vertex = WeightVector::vertex(2, j);
            let base = growth_exact(&d, &vertex, 1).unwrap().value;
            for n in 2..=5 {
                let value = growth_exact(&d, &vertex, n).unwrap().value;
                assert!(
                    (value - base).abs() <= 1e-12,
                    "asset {j} n {n}: {value} vs {base}"
                );
            }
        }
    }

    #[test]
    fn growth_exact_rejects_dimension_mismatch() {
        let k = WeightVector::uniform(3);
        assert!(matches!(
            growth_exact(&kelly_fixture(), &k, 1),
            Err(GrowthError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn growth_mc_is_deterministic_and_degenerate_exact() {
        let d = dist(&["A", "B"], &[(&[0.05, 0.01], 1.0)]);
        let k = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let a = growth_mc(&d, &k, 2, 500, 42).unwrap();
        let b = growth_mc(&d, &k, 2, 500, 42).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.std_error, 0.0);
        let exact = growth_exact(&d, &k, 2).unwrap();
        assert!((a.value - exact.value).abs() <= 1e-15);
        assert_eq!(a.sample_count, 500);
        assert_eq!(a.method, EvaluationMethod::MonteCarlo);
    }

    #[test]
    fn growth_mc_brackets_exact_value() {
        let d = kelly_fixture();
        let k = WeightVector::new(vec![0.4, 0.6]).unwrap();
        let exact = growth_exact(&d, &k, 3).unwrap();
        let mc = growth_mc(&d, &k, 3, 100_000, 7).unwrap();
        assert!(
            (mc.value - exact.value).abs() <= 3.0 * mc.std_error,
            "mc {} exact {} se {}",
            mc.value,
            exact.value,
            mc.std_error
        );
    }

    #[test]
    fn growth_mc_rejects_tiny_sample_counts() {
        let k = WeightVector::uniform(2);
        assert!(matches!(
            growth_mc(&kelly_fixture(), &k, 1, 10, 0),
            Err(GrowthError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn optimizer_recovers_closed_form_kelly_fraction() {
        let result = optimize(&kelly_fixture(), 1, &OptimizeConfig::default()).unwrap();
        assert!(result.converged);
        let w = result.optimal_weights.weights();
        assert!((w[0] - 0.4).abs() <= 1e-6, "risky weight {}", w[0]);
        assert!((w[1] - 0.6).abs() <= 1e-6, "cash weight {}", w[1]);
        assert!((result.optimal_value - kelly_value()).abs() <= 1e-10);
        assert!(result.first_order_gap <= 1e-9);
        assert!(result.first_order_gap >= -1e-12);
    }

    #[test]
    fn flat_optimum_breaks_ties_toward_lowest_vertex() {
        let d = dist(&["A", "B"], &[(&[0.05, 0.05], 1.0)]);
        let result = optimize(&d, 1, &OptimizeConfig::default()).unwrap();
        assert!(result.converged);
        assert_eq!(result.optimal_weights.weights(), &[1.0, 0.0]);
        assert_eq!(result.optimal_value, 1.05f64.ln());
    }

    #[test]
    fn dominant_asset_takes_everything() {
        for n in 1..=4 {
            let result = optimize(&dominant_fixture(), n, &OptimizeConfig::default()).unwrap();
            assert!(result.converged, "n = {n}");
            assert_eq!(result.optimal_weights.weights(), &[1.0, 0.0], "n = {n}");
            let expected = 0.5 * 1.1f64.ln() + 0.5 * 0.95f64.ln();
            assert!((result.optimal_value - expected).abs() <= 1e-9);
        }
    }

    #[test]
    fn exhausted_iteration_budget_reports_non_convergence() {
        let config = OptimizeConfig {
            max_iterations: 0,
            ..OptimizeConfig::default()
        };
        let result = optimize(&kelly_fixture(), 1, &config).unwrap();
        assert!(!result.converged);
        assert!(result.first_order_gap > config.tolerance);
        assert_eq!(result.iterations, 0);
    }

    #[test]
    fn optimizer_never_loses_to_a_vertex() {
        let d = dist(
            &["A", "B", "C"],
            &[
                (&[0.4, -0.1, 0.02], 0.3),
                (&[-0.3, 0.25, 0.02], 0.4),
                (&[0.1, -0.05, 0.02], 0.3),
            ],
        );
        for n in 1..=3 {
            let result = optimize(&d, n, &OptimizeConfig::default()).unwrap();
            for j in 0..3 {
                let vertex = growth_exact(&d, &WeightVector::vertex(3, j), n).unwrap();
                assert!(result.optimal_value >= vertex.value - 1e-9);
            }
            let sum: f64 = result.optimal_weights.weights().iter().sum();
            assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE);
        }
    }

    #[test]
    fn sweep_is_ordered_and_survives_per_period_failures() {
        let config = OptimizeConfig {
            enumeration_cap: 8,
            ..OptimizeConfig::default()
        };
        let entries = frequency_sweep(&kelly_fixture(), &[4, 1, 2], &config);
        assert_eq!(
            entries.iter().map(|e| e.n).collect::<Vec<_>>(),
            vec![1, 2, 4]
        );
        assert!(entries[0].result.is_ok());
        assert!(entries[1].result.is_ok());
        // 2^4 = 16 > 8 exceeds the cap.
        assert!(matches!(
            entries[2].result,
            Err(GrowthError::Distribution(
                DistributionError::EnumerationCapExceeded { .. }
            ))
        ));
    }

    #[test]
    fn sweep_on_riskless_pair_is_flat() {
        let d = dist(&["CASH", "BOND"], &[(&[0.05, 0.05], 1.0)]);
        let entries = frequency_sweep(&d, &[1, 2, 3, 4], &OptimizeConfig::default());
        for entry in &entries {
            let result = entry.result.as_ref().unwrap();
            assert_eq!(result.optimal_value, 1.05f64.ln());
        }
    }

    #[test]
    fn sweep_csv_round_trips_at_full_precision() {
        let entries = frequency_sweep(&kelly_fixture(), &[1, 2], &OptimizeConfig::default());
        let csv = sweep_to_csv(&entries, 2);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "n,g_star,converged,iterations,K_1,K_2");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1");
        let g: f64 = first[1].parse().unwrap();
        let expected = entries[0].result.as_ref().unwrap().optimal_value;
        assert_eq!(g, expected, "17 significant digits round-trip");
        assert_eq!(first[2], "true");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let d = dist(
            &["A", "B", "C"],
            &[
                (&[0.2, -0.1, 0.01], 0.35),
                (&[-0.15, 0.3, 0.01], 0.4),
                (&[0.05, -0.2, 0.01], 0.25),
            ],
        );
        let k = WeightVector::new(vec![0.3, 0.45, 0.25]).unwrap();
        for n in 1..=2 {
            let report = growth_exact(&d, &k, n).unwrap();
            let h = 1e-6;
            let mut fd = vec![0.0; 3];
            for i in 0..3 {
                let mut plus = k.weights().to_vec();
                let mut minus = k.weights().to_vec();
                plus[i] += h;
                minus[i] -= h;
                let table = CompoundTable::build(&d, n, DEFAULT_ENUMERATION_CAP).unwrap();
                fd[i] = (table.value(&plus) - table.value(&minus)) / (2.0 * h);
            }
            let project = |v: &[f64]| {
                let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|x| x - mean).collect::<Vec<f64>>()
            };
            let analytic = project(&report.gradient);
            let numeric = project(&fd);
            let norm = analytic.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err = analytic
                .iter()
                .zip(&numeric)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err / norm <= 1e-5, "n {n}: rel err {}", err / norm);
        }
    }

    #[test]
    fn exact_growth_is_concave_along_segments() {
        let d = kelly_fixture();
        let table = CompoundTable::build(&d, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        for i in 0..=10 {
            for j in 0..=10 {
                let a = i as f64 / 10.0;
                let b = j as f64 / 10.0;
                let lambda = 0.37;
                let mid = [
                    lambda * a + (1.0 - lambda) * b,
                    lambda * (1.0 - a) + (1.0 - lambda) * (1.0 - b),
                ];
                let lhs = table.value(&mid);
                let rhs = lambda * table.value(&[a, 1.0 - a])
                    + (1.0 - lambda) * table.value(&[b, 1.0 - b]);
                assert!(lhs >= rhs - 1e-10);
            }
        }
    }
}
