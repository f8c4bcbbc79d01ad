//! Input ensembles over the domain `[-1, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

/// How the ensemble was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// `n` i.i.d. draws from `Unif[-1, 1]`, Monte Carlo weights `1/n`.
    IidUniform,
    /// `n` equispaced points spanning `[-1, 1]` with trapezoid quadrature
    /// weights for the uniform density.
    EquispacedGrid,
}

/// A weighted set of scalar inputs `u ∈ [-1, 1]` standing in for the input
/// distribution `p(u)`. All ensemble expectations in the library are weighted
/// sums over these points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEnsemble {
    values: Vec<f64>,
    weights: Vec<f64>,
    kind: EnsembleKind,
}

/// Neumaier-compensated sum; plain accumulation of `1/n` weights drifts past
/// the 1e-12 invariant for n in the 1e5 range.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

impl InputEnsemble {
    const WEIGHT_TOL: f64 = 1e-12;

    /// Build from explicit points and weights, enforcing the invariants.
    pub fn new(values: Vec<f64>, weights: Vec<f64>, kind: EnsembleKind) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(Error::Structure(format!(
                "ensemble needs matching non-empty values/weights, got {}/{}",
                values.len(),
                weights.len()
            )));
        }
        if let Some(u) = values.iter().find(|u| !(-1.0..=1.0).contains(*u) || !u.is_finite()) {
            return Err(Error::Domain(format!("ensemble input {u} outside [-1, 1]")));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
            return Err(Error::Domain(format!("negative ensemble weight {w}")));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > Self::WEIGHT_TOL {
            return Err(Error::Domain(format!(
                "ensemble weights sum to {total}, expected 1 within {}",
                Self::WEIGHT_TOL
            )));
        }
        Ok(Self { values, weights, kind })
    }

    /// `n` i.i.d. uniform draws with Monte Carlo weights `1/n`.
    pub fn iid_uniform(seed: u64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structure("ensemble size must be positive".into()));
        }
        let values: Vec<f64> = (0..n)
            .map(|i| stream(seed, Domain::Ensemble, i as u64, 0).random_range(-1.0..1.0))
            .collect();
        let weights = vec![1.0 / n as f64; n];
        Self::new(values, weights, EnsembleKind::IidUniform)
    }

    /// `n` equispaced points on `[-1, 1]` with trapezoid weights (endpoints
    /// half-weighted); the weights sum to 1 exactly.
    pub fn equispaced_grid(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Structure("grid ensemble needs at least 2 points".into()));
        }
        let values: Vec<f64> = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        let inner = 1.0 / (n - 1) as f64;
        let mut weights = vec![inner; n];
        weights[0] = inner / 2.0;
        weights[n - 1] = inner / 2.0;
        Self::new(values, weights, EnsembleKind::EquispacedGrid)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    /// Weighted ensemble mean of `f` evaluated at each input.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(u))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_weights_sum_to_one_exactly() {
        for n in [2, 3, 17, 300] {
            let ens = InputEnsemble::equispaced_grid(n).unwrap();
            let sum: f64 = ens.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-14, "n={n} sum={sum}");
            assert_eq!(ens.values()[0], -1.0);
            assert_eq!(*ens.values().last().unwrap(), 1.0);
        }
    }

    #[test]
    fn iid_is_seeded_and_in_range() {
        let a = InputEnsemble::iid_uniform(3, 100).unwrap();
        let b = InputEnsemble::iid_uniform(3, 100).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|u| (-1.0..=1.0).contains(u)));
        let c = InputEnsemble::iid_uniform(4, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trapezoid_integrates_quadratics_well() {
        let ens = InputEnsemble::equispaced_grid(2001).unwrap();
        // E[u^2] over Unif[-1,1] is 1/3.
        assert_relative_eq!(ens.expect(|u| u * u), 1.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(InputEnsemble::new(vec![0.0], vec![0.5], EnsembleKind::IidUniform).is_err());
        assert!(InputEnsemble::new(vec![2.0], vec![1.0], EnsembleKind::IidUniform).is_err());
    }
}
