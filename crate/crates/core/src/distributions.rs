//! Finite discrete joint distributions of one-step asset returns.
//!
//! A [`JointReturnDistribution`] is the i.i.d. ground truth for everything
//! else in this crate: it fixes `m >= 2` named assets and a finite support of
//! return vectors, one simple return per asset per outcome. Per-step returns
//! are strictly greater than -1 (a position cannot lose more than 100% in one
//! step), so compounded account values stay positive.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constructed distributions keep their probabilities summing to one within
/// this bound.
pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// Raw input probabilities may deviate from summing to one by at most this
/// much; smaller deviations are renormalized away, larger ones are rejected.
pub const PROB_SUM_REJECT: f64 = 1e-9;

/// Default cap on `S^n`, the number of outcome sequences enumerated when
/// compounding a support of size `S` over `n` steps.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("a joint return distribution needs at least 2 assets, got {0}")]
    TooFewAssets(usize),
    #[error("asset name {0:?} appears more than once")]
    DuplicateAssetName(String),
    #[error("asset names must be non-empty")]
    EmptyAssetName,
    #[error("support must contain at least one outcome")]
    EmptySupport,
    #[error("outcome {index} has {got} returns, expected {expected}")]
    ReturnLengthMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error(
        "outcome {index}, asset {asset}: return {value} is not allowed; \
         loss per step must be < 100% (return > -1) and finite"
    )]
    ReturnOutOfRange {
        index: usize,
        asset: usize,
        value: f64,
    },
    #[error("outcome {index}: probability {value} must be finite and > 0")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, more than {PROB_SUM_REJECT} away from 1")]
    ProbabilitySum { sum: f64 },
    #[error("riskless rate {0} is negative; pass allow_negative to accept it")]
    NegativeRate(f64),
    #[error("compounding requires n >= 1")]
    InvalidSteps,
    #[error(
        "enumerating {support}^{steps} outcome sequences exceeds the cap of {cap}; \
         use Monte Carlo estimation instead"
    )]
    EnumerationCapExceeded {
        support: usize,
        steps: usize,
        cap: u64,
    },
    #[error("malformed distribution JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// One support point: a joint return vector and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Simple return per asset over one step, each > -1.
    pub returns: Vec<f64>,
    /// Probability in (0, 1].
    pub probability: f64,
}

/// One realization of the compound return over an `n`-step block.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundOutcome {
    /// Per-asset total simple return over the block: prod(1 + x_i) - 1,
    /// always > -1.
    pub total_returns: Vec<f64>,
    pub probability: f64,
}

/// Finite discrete joint law of the one-step return vector over `m` assets.
///
/// Immutable after construction; all invariants (normalized probabilities,
/// returns > -1, merged support, riskless flags) are established by
/// [`JointReturnDistribution::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointReturnDistribution {
    asset_names: Vec<String>,
    support: Vec<Outcome>,
    riskless_flags: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    assets: Vec<String>,
    outcomes: Vec<OutcomeRecord>,
}

#[derive(Serialize, Deserialize)]
struct OutcomeRecord {
    returns: Vec<f64>,
    p: f64,
}

impl JointReturnDistribution {
    /// Build a validated distribution from asset names and raw outcomes.
    ///
    /// Outcomes with bitwise-identical return vectors are merged, and the
    /// probabilities are renormalized provided their raw sum is within
    /// [`PROB_SUM_REJECT`] of one.
    pub fn new(
        asset_names: Vec<String>,
        outcomes: Vec<Outcome>,
    ) -> Result<Self, DistributionError> {
        let m = asset_names.len();
        if m < 2 {
            return Err(DistributionError::TooFewAssets(m));
        }
        for (idx, name) in asset_names.iter().enumerate() {
            if name.is_empty() {
                return Err(DistributionError::EmptyAssetName);
            }
            if asset_names[..idx].contains(name) {
                return Err(DistributionError::DuplicateAssetName(name.clone()));
            }
        }
        if outcomes.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        for (index, outcome) in outcomes.iter().enumerate() {
            if outcome.returns.len() != m {
                return Err(DistributionError::ReturnLengthMismatch {
                    index,
                    expected: m,
                    got: outcome.returns.len(),
                });
            }
            for (asset, &value) in outcome.returns.iter().enumerate() {
                if !value.is_finite() || value <= -1.0 {
                    return Err(DistributionError::ReturnOutOfRange {
                        index,
                        asset,
                        value,
                    });
                }
            }
            let p = outcome.probability;
            if !p.is_finite() || p <= 0.0 {
                return Err(DistributionError::InvalidProbability { index, value: p });
            }
        }

        let mut merged = merge_by_vector(
            outcomes
                .into_iter()
                .map(|outcome| (outcome.returns, outcome.probability)),
        );
        let sum: f64 = merged.iter().map(|(_, p)| *p).sum();
        if (sum - 1.0).abs() > PROB_SUM_REJECT {
            return Err(DistributionError::ProbabilitySum { sum });
        }
        for (_, p) in &mut merged {
            *p /= sum;
        }

        let riskless_flags = (0..m)
            .map(|asset| {
                let first = merged[0].0[asset];
                merged.iter().all(|(returns, _)| returns[asset] == first)
            })
            .collect();

        Ok(Self {
            asset_names,
            support: merged
                .into_iter()
                .map(|(returns, probability)| Outcome {
                    returns,
                    probability,
                })
                .collect(),
            riskless_flags,
        })
    }

    /// Parse the JSON distribution format:
    /// `{ "assets": [...], "outcomes": [ { "returns": [...], "p": ... }, ... ] }`.
    pub fn from_json(text: &str) -> Result<Self, DistributionError> {
        let file: DistributionFile = serde_json::from_str(text)?;
        Self::new(
            file.assets,
            file.outcomes
                .into_iter()
                .map(|record| Outcome {
                    returns: record.returns,
                    probability: record.p,
                })
                .collect(),
        )
    }

    /// Serialize back to the JSON distribution format.
    pub fn to_json(&self) -> String {
        let file = DistributionFile {
            assets: self.asset_names.clone(),
            outcomes: self
                .support
                .iter()
                .map(|outcome| OutcomeRecord {
                    returns: outcome.returns.clone(),
                    p: outcome.probability,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("distribution serializes")
    }

    /// Extend the universe with a riskless asset returning `rate` in every
    /// outcome. Negative rates model the rare best-available-asset-loses-money
    /// case and must be opted into.
    pub fn add_riskless(
        &self,
        name: &str,
        rate: f64,
        allow_negative: bool,
    ) -> Result<Self, DistributionError> {
        if rate < 0.0 && !allow_negative {
            return Err(DistributionError::NegativeRate(rate));
        }
        let mut names = self.asset_names.clone();
        names.push(name.to_string());
        let outcomes = self
            .support
            .iter()
            .map(|outcome| {
                let mut returns = outcome.returns.clone();
                returns.push(rate);
                Outcome {
                    returns,
                    probability: outcome.probability,
                }
            })
            .collect();
        Self::new(names, outcomes)
    }

    pub fn asset_count(&self) -> usize {
        self.asset_names.len()
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn asset_index(&self, name: &str) -> Option<usize> {
        self.asset_names.iter().position(|n| n == name)
    }

    pub fn support(&self) -> &[Outcome] {
        &self.support
    }

    pub fn riskless_flags(&self) -> &[bool] {
        &self.riskless_flags
    }

    pub fn is_riskless(&self, asset: usize) -> bool {
        self.riskless_flags[asset]
    }

    /// The deterministic rate of a riskless asset, `None` for risky assets.
    pub fn riskless_rate(&self, asset: usize) -> Option<f64> {
        self.riskless_flags[asset].then(|| self.support[0].returns[asset])
    }

    /// Expected one-step return of one asset, exact over the support.
    pub fn mean_return(&self, asset: usize) -> f64 {
        self.support
            .iter()
            .map(|o| o.probability * o.returns[asset])
            .sum()
    }

    /// Expectation of an arbitrary function of the return vector.
    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.support
            .iter()
            .map(|o| o.probability * f(&o.returns))
            .sum()
    }

    /// Exact law of the compound return over `n` i.i.d. steps, with the
    /// default enumeration cap.
    pub fn compound(&self, n: usize) -> Result<Vec<CompoundOutcome>, DistributionError> {
        self.compound_capped(n, DEFAULT_ENUMERATION_CAP)
    }

    /// Exact law of the compound return over `n` i.i.d. steps.
    ///
    /// Fails when `S^n` exceeds `cap`; outcomes whose total-return vectors
    /// coincide bitwise are merged. For `n = 1` the support is passed through
    /// unchanged.
    pub fn compound_capped(
        &self,
        n: usize,
        cap: u64,
    ) -> Result<Vec<CompoundOutcome>, DistributionError> {
        if n == 0 {
            return Err(DistributionError::InvalidSteps);
        }
        let support_size = self.support.len() as u64;
        let sequences = support_size.checked_pow(n as u32);
        if sequences.is_none() || sequences.unwrap() > cap {
            return Err(DistributionError::EnumerationCapExceeded {
                support: self.support.len(),
                steps: n,
                cap,
            });
        }
        if n == 1 {
            return Ok(self
                .support
                .iter()
                .map(|outcome| CompoundOutcome {
                    total_returns: outcome.returns.clone(),
                    probability: outcome.probability,
                })
                .collect());
        }

        // Work on growth factors prod(1 + x_i); subtract 1 at the end.
        let mut states: Vec<(Vec<f64>, f64)> = self
            .support
            .iter()
            .map(|outcome| {
                (
                    outcome.returns.iter().map(|x| 1.0 + x).collect(),
                    outcome.probability,
                )
            })
            .collect();
        for _ in 1..n {
            states = merge_by_vector(states.iter().flat_map(|(factors, p)| {
                self.support.iter().map(move |outcome| {
                    let next = factors
                        .iter()
                        .zip(&outcome.returns)
                        .map(|(f, x)| f * (1.0 + x))
                        .collect::<Vec<f64>>();
                    (next, p * outcome.probability)
                })
            }));
        }

        Ok(
            merge_by_vector(states.into_iter().map(|(factors, p)| {
                (factors.into_iter().map(|f| f - 1.0).collect(), p)
            }))
            .into_iter()
            .map(|(total_returns, probability)| CompoundOutcome {
                total_returns,
                probability,
            })
            .collect(),
        )
    }

    /// Draw one compound return vector over `n` steps from a fresh generator
    /// seeded with `seed`. Identical arguments produce identical output.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        assert!(n >= 1, "sample requires n >= 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    /// Draw one compound return vector using a caller-provided generator.
    pub fn sample_with(&self, rng: &mut impl Rng, n: usize) -> Vec<f64> {
        let mut factors = vec![1.0; self.asset_count()];
        for _ in 0..n {
            let outcome = &self.support[self.sample_index(rng)];
            for (f, x) in factors.iter_mut().zip(&outcome.returns) {
                *f *= 1.0 + x;
            }
        }
        factors.into_iter().map(|f| f - 1.0).collect()
    }

    /// Inverse-CDF draw of one support index.
    pub fn sample_index(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        for (index, outcome) in self.support.iter().enumerate() {
            cumulative += outcome.probability;
            if u < cumulative {
                return index;
            }
        }
        self.support.len() - 1
    }
}

/// Merge `(vector, probability)` pairs whose vectors are bitwise identical,
/// preserving first-occurrence order so downstream sums are deterministic.
fn merge_by_vector(items: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Vec<(Vec<f64>, f64)> {
    let mut merged: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut index_by_key: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    for (vector, probability) in items {
        let key: Vec<u64> = vector.iter().map(|x| x.to_bits()).collect();
        match index_by_key.entry(key) {
            std::collections::btree_map::Entry::Occupied(entry) => {
                merged[*entry.get()].1 += probability;
            }
            std::collections::btree_map::Entry::Vacant(entry) => {
                entry.insert(merged.len());
                merged.push((vector, probability));
            }
        }
    }
    merged
}
