//! Equity semantics: the Gini index of the per-person water distribution.

use crate::env::{VillageSpec, WorldState};
use crate::error::{Error, Result};

/// Per-village water levels weighted by population. Equivalent to a list
/// holding each village's level once per inhabitant.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDistribution {
    values: Vec<f64>,
    weights: Vec<u32>,
}

impl WeightedDistribution {
    pub fn new(values: Vec<f64>, weights: Vec<u32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if values.len() != weights.len() {
            return Err(Error::InvalidState(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if weights.contains(&0) {
            return Err(Error::InvalidState("weights must be positive".into()));
        }
        if values.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidState(
                "values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { values, weights })
    }

    /// The water distribution of a state.
    pub fn of_state(state: &WorldState, villages: &[VillageSpec]) -> Result<Self> {
        Self::new(
            state.levels.clone(),
            villages.iter().map(|v| v.population).collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }
}

/// Gini index of a weighted distribution, in `[0, 1]`. A distribution with
/// zero mean counts as perfectly equal.
pub fn gini(dist: &WeightedDistribution) -> f64 {
    weighted_gini(
        dist.values
            .iter()
            .zip(&dist.weights)
            .map(|(&x, &n)| (x, f64::from(n))),
    )
}

/// `sum_i sum_j n_i n_j |x_i - x_j| / (2 N^2 mu)` over (value, weight) pairs.
///
/// Takes an iterator so the training loop can evaluate states without
/// allocating.
fn weighted_gini<I>(pairs: I) -> f64
where
    I: Iterator<Item = (f64, f64)> + Clone,
{
    let (total_weight, total_mass) = pairs
        .clone()
        .fold((0.0, 0.0), |(n, m), (x, w)| (n + w, m + w * x));
    if total_mass <= 0.0 {
        return 0.0;
    }
    let mut abs_diff = 0.0;
    for (i, (xi, ni)) in pairs.clone().enumerate() {
        for (xj, nj) in pairs.clone().skip(i + 1) {
            abs_diff += ni * nj * (xi - xj).abs();
        }
    }
    // Each unordered pair counted once, hence N * mass rather than 2 N^2 mu.
    (abs_diff / (total_weight * total_mass)).clamp(0.0, 1.0)
}

/// Equity alignment of a state: `1 - gini` of its water distribution.
pub fn f_gini(state: &WorldState, villages: &[VillageSpec]) -> f64 {
    debug_assert_eq!(state.levels.len(), villages.len());
    1.0 - weighted_gini(
        state
            .levels
            .iter()
            .zip(villages)
            .map(|(&x, v)| (x, f64::from(v.population))),
    )
}
