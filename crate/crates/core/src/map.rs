//! The feature-generator abstraction and tabulated probability maps.

use nalgebra::{DMatrix, DVector};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::InputEnsemble;
use crate::error::{Error, Result};
use crate::optical::{optical_means, OpticalEncoding};
use crate::quantum::{
    circuit_probabilities, haar_two_design_probabilities, hamiltonian_probabilities,
    CircuitEncoding, HamiltonianEncoding,
};

/// Which single-shot noise process a generator's outputs follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// One of `K` mutually exclusive outcomes per shot.
    Multinomial,
    /// Independent per-detector counts, variance equal to mean.
    Poisson,
    /// No structural assumption; covariance must be estimated from records.
    Generic,
}

/// Where a probability table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Circuit,
    Hamiltonian,
    HaarSample,
    Optical,
}

/// A physical feature generator: maps `(input index, u)` to the vector of
/// expected features (outcome probabilities, or detector mean counts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    Circuit(CircuitEncoding),
    Hamiltonian(HamiltonianEncoding),
    /// Input-indexed Haar-random unitaries over `K` outcomes: every ensemble
    /// input gets an independent draw, realizing 2-design moments.
    HaarTwoDesign { k: usize, seed: u64 },
    Optical(OpticalEncoding),
}

impl Generator {
    pub fn n_features(&self) -> usize {
        match self {
            Generator::Circuit(enc) => enc.n_outcomes(),
            Generator::Hamiltonian(enc) => enc.n_outcomes(),
            Generator::HaarTwoDesign { k, .. } => *k,
            Generator::Optical(enc) => enc.n_detectors(),
        }
    }

    pub fn noise_model(&self) -> NoiseModel {
        match self {
            Generator::Optical(_) => NoiseModel::Poisson,
            _ => NoiseModel::Multinomial,
        }
    }

    pub fn is_poisson(&self) -> bool {
        self.noise_model() == NoiseModel::Poisson
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            Generator::Circuit(_) => Provenance::Circuit,
            Generator::Hamiltonian(_) => Provenance::Hamiltonian,
            Generator::HaarTwoDesign { .. } => Provenance::HaarSample,
            Generator::Optical(_) => Provenance::Optical,
        }
    }

    /// Expected feature vector `x(u)` for one ensemble input. Only the Haar
    /// generator depends on `input_index`.
    pub fn mean_features(&self, input_index: usize, u: f64) -> Result<Vec<f64>> {
        match self {
            Generator::Circuit(enc) => Ok(circuit_probabilities(enc, u)),
            Generator::Hamiltonian(enc) => Ok(hamiltonian_probabilities(enc, u)),
            Generator::HaarTwoDesign { k, seed } => {
                if *k < 2 {
                    return Err(Error::Config("2-design needs K >= 2".into()));
                }
                Ok(haar_two_design_probabilities(*k, *seed, input_index))
            }
            Generator::Optical(enc) => optical_means(enc, u),
        }
    }
}

/// Expected features tabulated over an input ensemble (row `n` is `x(u^(n))`).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub values: DMatrix<f64>,
    pub provenance: Provenance,
    pub noise_model: NoiseModel,
}

const SIMPLEX_TOL: f64 = 1e-10;

/// Evaluate a generator over every ensemble input (parallel over inputs).
pub fn tabulate(generator: &Generator, ensemble: &InputEnsemble) -> Result<ProbabilityTable> {
    let k = generator.n_features();
    let eval = |(n, &u): (usize, &f64)| generator.mean_features(n, u);
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = ensemble.values().par_iter().enumerate().map(eval).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = ensemble.values().iter().enumerate().map(eval).collect::<Result<_>>()?;
    let values = DMatrix::from_fn(ensemble.len(), k, |n, j| rows[n][j]);
    if generator.noise_model() == NoiseModel::Multinomial {
        for (n, row) in values.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::Numerical(format!(
                    "probability row {n} sums to {sum}"
                )));
            }
        }
    }
    Ok(ProbabilityTable {
        values,
        provenance: generator.provenance(),
        noise_model: generator.noise_model(),
    })
}

/// Ensemble moments of a tabulated map: `D_kk = E_u[x_k]` and
/// `G_jk = E_u[x_j x_k]` by weighted sums over the ensemble. For a quantum
/// generator this is the diagonal-measurement specialization of the first and
/// second quantum ensemble moments.
pub fn ensemble_moment_gram(
    table: &ProbabilityTable,
    ensemble: &InputEnsemble,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = table.values.nrows();
    if n != ensemble.len() {
        return Err(Error::Structure(format!(
            "table has {n} rows for {} ensemble inputs",
            ensemble.len()
        )));
    }
    let k = table.values.ncols();
    let mut g = DMatrix::zeros(k, k);
    let mut d = DVector::zeros(k);
    for (idx, &w) in ensemble.weights().iter().enumerate() {
        let row = table.values.row(idx);
        for a in 0..k {
            let xa = row[a];
            d[a] += w * xa;
            for b in a..k {
                g[(a, b)] += w * xa * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    Ok((g, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EnsembleKind;
    use approx::assert_relative_eq;

    #[test]
    fn one_point_ensemble_moments() {
        let ens =
            InputEnsemble::new(vec![0.2], vec![1.0], EnsembleKind::IidUniform).unwrap();
        let table = ProbabilityTable {
            values: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            provenance: Provenance::Circuit,
            noise_model: NoiseModel::Multinomial,
        };
        let (g, d) = ensemble_moment_gram(&table, &ens).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(1, 1)], 0.0);
        assert_eq!(d[0], 1.0);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn haar_two_design_moments_match_closed_form() {
        // G_kk = 2/(K(K+1)), G_jk = 1/(K(K+1)), D_kk = 1/K for Haar draws.
        let k = 2;
        let n = 200_000;
        let ens = InputEnsemble::iid_uniform(1, n).unwrap();
        let generator = Generator::HaarTwoDesign { k, seed: 77 };
        let table = tabulate(&generator, &ens).unwrap();
        let (g, d) = ensemble_moment_gram(&table, &ens).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0 / 3.0, epsilon = 0.01);
        assert_relative_eq!(g[(0, 1)], 1.0 / 6.0, epsilon = 0.01);
        assert_relative_eq!(d[0], 0.5, epsilon = 0.01);
    }

    #[test]
    fn simplex_maps_have_unit_trace_moments() {
        let enc = crate::quantum::random_circuit_encoding(
            3,
            2,
            1.1,
            crate::quantum::ring_graph(3),
            31,
        )
        .unwrap();
        let ens = InputEnsemble::equispaced_grid(101).unwrap();
        let table = tabulate(&Generator::Circuit(enc), &ens).unwrap();
        let (g, d) = ensemble_moment_gram(&table, &ens).unwrap();
        assert_relative_eq!(d.sum(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.sum(), 1.0, epsilon = 1e-12);
        // Row sums of G reproduce D for simplex-valued maps.
        for a in 0..g.nrows() {
            assert_relative_eq!(g.row(a).sum(), d[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_and_iid_moments_agree_for_smooth_maps() {
        let enc = crate::quantum::random_circuit_encoding(
            2,
            1,
            0.6,
            crate::quantum::ring_graph(2),
            3,
        )
        .unwrap();
        let generator = Generator::Circuit(enc);
        let grid = InputEnsemble::equispaced_grid(4001).unwrap();
        let iid = InputEnsemble::iid_uniform(9, 100_000).unwrap();
        let tg = tabulate(&generator, &grid).unwrap();
        let ti = tabulate(&generator, &iid).unwrap();
        let (gg, _) = ensemble_moment_gram(&tg, &grid).unwrap();
        let (gi, _) = ensemble_moment_gram(&ti, &iid).unwrap();
        let tol = 5.0 / (iid.len() as f64).sqrt();
        assert!((&gg - &gi).abs().max() < tol);
    }
}
