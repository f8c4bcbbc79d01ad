//! Shot-noise samplers and feature-matrix assembly.
//!
//! Two concrete noise processes are supported: multinomial outcome sampling
//! (quantum projective measurement over `K` mutually exclusive outcomes) and
//! independent Poisson counts per detector (photodetection). Measured features
//! are `S`-shot sample means of the single-shot outputs.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::InputEnsemble;
use crate::error::{Error, Result};
use crate::map::Generator;
use crate::rng::{stream, Domain};

/// Shot budget; `Infinite` bypasses sampling and yields exact mean features.
/// Serializes as a plain count or the string `"infinite"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    Infinite,
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(s) => serializer.serialize_u64(*s),
            Shots::Infinite => serializer.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Named(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Count(s) => Ok(Shots::Finite(s)),
            Raw::Named(name) if name == "infinite" || name == "inf" => Ok(Shots::Infinite),
            Raw::Named(name) => Err(serde::de::Error::custom(format!(
                "shots must be a count or \"infinite\", got {name:?}"
            ))),
        }
    }
}

impl Shots {
    pub fn finite(self) -> Option<u64> {
        match self {
            Shots::Finite(s) => Some(s),
            Shots::Infinite => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Shots::Finite(s) => s as f64,
            Shots::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Shots {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shots::Finite(s) => write!(f, "{s}"),
            Shots::Infinite => write!(f, "inf"),
        }
    }
}

/// Raw single-shot outputs for one ensemble input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotData {
    /// One outcome index per shot, each `< K`.
    Outcomes(Vec<u32>),
    /// One length-`K` count vector per shot, flattened row-major.
    Counts { k: usize, counts: Vec<u32> },
}

/// The full shot record for one input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub input_index: usize,
    pub data: ShotData,
}

impl ShotRecord {
    pub fn shots(&self) -> usize {
        match &self.data {
            ShotData::Outcomes(o) => o.len(),
            ShotData::Counts { k, counts } => counts.len() / k,
        }
    }
}

/// `N x K` matrix of measured features `X̄_k(u^(n))` plus shot metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// Row `n`, column `k` holds the `S`-shot mean feature at input `n`.
    pub data: DMatrix<f64>,
    pub shots: Shots,
    pub ensemble: InputEnsemble,
}

impl FeatureMatrix {
    pub fn n_inputs(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }
}

fn check_simplex(probabilities: &[f64], tol: f64) -> Result<()> {
    if probabilities.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    for (k, &p) in probabilities.iter().enumerate() {
        if !(p >= -tol) || !p.is_finite() {
            return Err(Error::Domain(format!("probability[{k}] = {p} is negative")));
        }
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::Domain(format!(
            "probabilities sum to {sum}, expected 1 within {tol}"
        )));
    }
    Ok(())
}

/// Draw one outcome index by inverse CDF from a single uniform variate.
fn multinomial_draw(probabilities: &[f64], rng: &mut ChaCha12Rng) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as u32;
        }
    }
    // Rounding can leave acc slightly below 1; attribute the tail to the last
    // outcome with nonzero probability.
    probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probabilities.len() - 1) as u32
}

/// Sample `shots` i.i.d. outcome indices from a length-`K` probability vector.
///
/// The stream is keyed by `(seed, input_index, shot index)`, so results are
/// independent of evaluation order.
pub fn sample_multinomial(
    probabilities: &[f64],
    shots: u64,
    seed: u64,
    input_index: usize,
) -> Result<ShotRecord> {
    check_simplex(probabilities, 1e-9)?;
    if shots == 0 {
        return Err(Error::Domain("shot count must be at least 1".into()));
    }
    let outcomes = (0..shots)
        .map(|s| {
            let mut rng = stream(seed, Domain::Shots, input_index as u64, s);
            multinomial_draw(probabilities, &mut rng)
        })
        .collect();
    Ok(ShotRecord {
        input_index,
        data: ShotData::Outcomes(outcomes),
    })
}

/// Sample `shots` independent length-`K` Poisson count vectors with the given
/// per-detector means.
pub fn sample_poisson_counts(
    means: &[f64],
    shots: u64,
    seed: u64,
    input_index: usize,
) -> Result<ShotRecord> {
    if means.is_empty() {
        return Err(Error::Domain("empty mean vector".into()));
    }
    if let Some(m) = means.iter().find(|m| **m < 0.0 || !m.is_finite()) {
        return Err(Error::Domain(format!("Poisson mean {m} must be finite and >= 0")));
    }
    if shots == 0 {
        return Err(Error::Domain("shot count must be at least 1".into()));
    }
    let k = means.len();
    let mut counts = Vec::with_capacity(k * shots as usize);
    for s in 0..shots {
        let mut rng = stream(seed, Domain::Shots, input_index as u64, s);
        for &mean in means {
            let c = if mean == 0.0 {
                0
            } else {
                let dist = Poisson::new(mean)
                    .map_err(|e| Error::Domain(format!("invalid Poisson mean {mean}: {e}")))?;
                dist.sample(&mut rng) as u32
            };
            counts.push(c);
        }
    }
    Ok(ShotRecord {
        input_index,
        data: ShotData::Counts { k, counts },
    })
}

/// Average one record's shots into a length-`K` feature row.
fn record_row(record: &ShotRecord, k: usize) -> Result<Vec<f64>> {
    match &record.data {
        ShotData::Outcomes(outcomes) => {
            if outcomes.is_empty() {
                return Err(Error::Structure("record has no shots".into()));
            }
            let mut row = vec![0.0; k];
            for &o in outcomes {
                let o = o as usize;
                if o >= k {
                    return Err(Error::Structure(format!("outcome index {o} >= K = {k}")));
                }
                row[o] += 1.0;
            }
            let s = outcomes.len() as f64;
            row.iter_mut().for_each(|x| *x /= s);
            Ok(row)
        }
        ShotData::Counts { k: rk, counts } => {
            if *rk != k {
                return Err(Error::Structure(format!("record has K = {rk}, expected {k}")));
            }
            if counts.is_empty() || counts.len() % rk != 0 {
                return Err(Error::Structure("count data not a whole number of shots".into()));
            }
            let s = (counts.len() / rk) as f64;
            let mut row = vec![0.0; k];
            for shot in counts.chunks_exact(*rk) {
                for (x, &c) in row.iter_mut().zip(shot) {
                    *x += c as f64;
                }
            }
            row.iter_mut().for_each(|x| *x /= s);
            Ok(row)
        }
    }
}

/// Assemble per-input shot records into a `FeatureMatrix`: row `n`, column `k`
/// holds the `S`-shot sample mean.
///
/// Records must appear in ensemble order (one per input) and share a single
/// shot count.
pub fn assemble_features(
    records: &[ShotRecord],
    k: usize,
    shots: u64,
    ensemble: &InputEnsemble,
) -> Result<FeatureMatrix> {
    if records.len() != ensemble.len() {
        return Err(Error::Structure(format!(
            "{} records for {} ensemble inputs",
            records.len(),
            ensemble.len()
        )));
    }
    let mut data = DMatrix::zeros(records.len(), k);
    for (n, record) in records.iter().enumerate() {
        if record.input_index != n {
            return Err(Error::Structure(format!(
                "record {n} carries input_index {}",
                record.input_index
            )));
        }
        if record.shots() as u64 != shots {
            return Err(Error::Structure(format!(
                "record {n} has {} shots, expected {shots}",
                record.shots()
            )));
        }
        let row = record_row(record, k)?;
        for (j, x) in row.into_iter().enumerate() {
            data[(n, j)] = x;
        }
    }
    Ok(FeatureMatrix {
        data,
        shots: Shots::Finite(shots),
        ensemble: ensemble.clone(),
    })
}

/// Sample shot records for every ensemble input of a generator (parallel over
/// inputs; the per-shot stream keying keeps the result thread-count
/// independent).
pub fn sample_records(
    generator: &Generator,
    ensemble: &InputEnsemble,
    shots: u64,
    seed: u64,
) -> Result<Vec<ShotRecord>> {
    let sample_one = |(n, &u): (usize, &f64)| {
        let means = generator.mean_features(n, u)?;
        if generator.is_poisson() {
            sample_poisson_counts(&means, shots, seed, n)
        } else {
            sample_multinomial(&means, shots, seed, n)
        }
    };
    #[cfg(feature = "parallel")]
    return ensemble.values().par_iter().enumerate().map(sample_one).collect();
    #[cfg(not(feature = "parallel"))]
    ensemble.values().iter().enumerate().map(sample_one).collect()
}

/// Sample an `S`-shot feature matrix for a generator over an ensemble.
///
/// With `Shots::Infinite` no sampling happens and the rows are the exact mean
/// features `x_k(u)`.
pub fn sample_feature_matrix(
    generator: &Generator,
    ensemble: &InputEnsemble,
    shots: Shots,
    seed: u64,
) -> Result<FeatureMatrix> {
    match shots {
        Shots::Infinite => {
            let table = crate::map::tabulate(generator, ensemble)?;
            Ok(FeatureMatrix {
                data: table.values,
                shots: Shots::Infinite,
                ensemble: ensemble.clone(),
            })
        }
        Shots::Finite(s) => {
            let records = sample_records(generator, ensemble, s, seed)?;
            assemble_features(&records, generator.n_features(), s, ensemble)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn outcomes(record: &ShotRecord) -> &[u32] {
        match &record.data {
            ShotData::Outcomes(o) => o,
            _ => panic!("expected outcome record"),
        }
    }

    #[test]
    fn deterministic_distribution_yields_single_outcome() {
        let rec = sample_multinomial(&[1.0, 0.0, 0.0, 0.0], 64, 1, 0).unwrap();
        assert!(outcomes(&rec).iter().all(|&o| o == 0));
        let ens = InputEnsemble::equispaced_grid(2).unwrap();
        let fm = assemble_features(
            &[rec, sample_multinomial(&[1.0, 0.0, 0.0, 0.0], 64, 1, 1).unwrap()],
            4,
            64,
            &ens,
        )
        .unwrap();
        assert_eq!(fm.data[(0, 0)], 1.0);
        assert_eq!(fm.data[(1, 1)], 0.0);
    }

    #[test]
    fn fair_coin_indicator_covariance() {
        // Sample covariance of the one-hot indicators converges to
        // [[1/4, -1/4], [-1/4, 1/4]].
        let s = 40_000u64;
        let rec = sample_multinomial(&[0.5, 0.5], s, 9, 0).unwrap();
        let os = outcomes(&rec);
        let mean0 = os.iter().filter(|&&o| o == 0).count() as f64 / s as f64;
        let mut c00 = 0.0;
        let mut c01 = 0.0;
        for &o in os {
            let x0 = (o == 0) as u32 as f64;
            let x1 = (o == 1) as u32 as f64;
            c00 += (x0 - mean0) * (x0 - mean0);
            c01 += (x0 - mean0) * (x1 - (1.0 - mean0));
        }
        c00 /= s as f64;
        c01 /= s as f64;
        let tol = 5.0 / (s as f64).sqrt();
        assert!((c00 - 0.25).abs() < tol, "c00={c00}");
        assert!((c01 + 0.25).abs() < tol, "c01={c01}");
    }

    #[test]
    fn multinomial_mean_within_three_sigma() {
        let probs = [0.2, 0.3, 0.5];
        let s = 1_000_000u64;
        let rec = sample_multinomial(&probs, s, 42, 0).unwrap();
        let mut freq = [0.0f64; 3];
        for &o in outcomes(&rec) {
            freq[o as usize] += 1.0;
        }
        for (k, &p) in probs.iter().enumerate() {
            let mean = freq[k] / s as f64;
            let sigma = (p * (1.0 - p) / s as f64).sqrt();
            assert!(
                (mean - p).abs() < 3.0 * sigma,
                "k={k} mean={mean} p={p} sigma={sigma}"
            );
        }
    }

    #[test]
    fn non_simplex_input_is_rejected() {
        let err = sample_multinomial(&[0.5, 0.6], 10, 0, 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
        let err = sample_multinomial(&[-0.1, 1.1], 10, 0, 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn poisson_zero_rate_gives_zero_counts() {
        let rec = sample_poisson_counts(&[0.0, 0.0], 50, 3, 0).unwrap();
        match &rec.data {
            ShotData::Counts { counts, .. } => assert!(counts.iter().all(|&c| c == 0)),
            _ => panic!(),
        }
    }

    #[test]
    fn poisson_mean_equals_variance() {
        let s = 100_000u64;
        let rec = sample_poisson_counts(&[4.0], s, 11, 0).unwrap();
        let counts: Vec<f64> = match &rec.data {
            ShotData::Counts { counts, .. } => counts.iter().map(|&c| c as f64).collect(),
            _ => panic!(),
        };
        let mean = counts.iter().sum::<f64>() / s as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (s as f64 - 1.0);
        assert!((mean - 4.0).abs() < 3.0 * (4.0f64 / s as f64).sqrt(), "mean={mean}");
        // Var[sample variance] ~ (mu4 - sigma^4)/S with mu4 = lambda(1+3lambda).
        let var_tol = 3.0 * ((4.0 * 13.0 - 16.0) / s as f64).sqrt();
        assert!((var - 4.0).abs() < var_tol, "var={var}");
    }

    #[test]
    fn poisson_detectors_are_independent() {
        let s = 100_000u64;
        let rec = sample_poisson_counts(&[1.5, 2.5], s, 13, 0).unwrap();
        let (k, counts) = match &rec.data {
            ShotData::Counts { k, counts } => (*k, counts),
            _ => panic!(),
        };
        assert_eq!(k, 2);
        let m0 = counts.iter().step_by(2).map(|&c| c as f64).sum::<f64>() / s as f64;
        let m1 = counts.iter().skip(1).step_by(2).map(|&c| c as f64).sum::<f64>() / s as f64;
        let mut cov = 0.0;
        for shot in counts.chunks_exact(2) {
            cov += (shot[0] as f64 - m0) * (shot[1] as f64 - m1);
        }
        cov /= s as f64 - 1.0;
        let sigma = (1.5f64 * 2.5 / s as f64).sqrt();
        assert!(cov.abs() < 3.0 * sigma, "cov={cov} sigma={sigma}");
    }

    #[test]
    fn assemble_counts_and_single_shot() {
        let ens = InputEnsemble::equispaced_grid(2).unwrap();
        let recs = vec![
            ShotRecord {
                input_index: 0,
                data: ShotData::Outcomes(vec![0, 0, 1, 1]),
            },
            ShotRecord {
                input_index: 1,
                data: ShotData::Outcomes(vec![1, 1, 0, 0]),
            },
        ];
        let fm = assemble_features(&recs, 2, 4, &ens).unwrap();
        assert_eq!(fm.data[(0, 0)], 0.5);
        assert_eq!(fm.data[(0, 1)], 0.5);

        let one = vec![ShotRecord {
            input_index: 0,
            data: ShotData::Outcomes(vec![3]),
        }];
        let ens1 = InputEnsemble::new(vec![0.0], vec![1.0], crate::ensemble::EnsembleKind::IidUniform)
            .unwrap();
        let fm1 = assemble_features(&one, 4, 1, &ens1).unwrap();
        assert_eq!(fm1.data.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0, 1.0]);

        let optical = vec![ShotRecord {
            input_index: 0,
            data: ShotData::Counts { k: 1, counts: vec![2, 4, 6] },
        }];
        let fmo = assemble_features(&optical, 1, 3, &ens1).unwrap();
        assert_relative_eq!(fmo.data[(0, 0)], 4.0);
    }

    #[test]
    fn ragged_records_are_structural_errors() {
        let ens = InputEnsemble::equispaced_grid(2).unwrap();
        let recs = vec![
            ShotRecord {
                input_index: 0,
                data: ShotData::Outcomes(vec![0, 1]),
            },
            ShotRecord {
                input_index: 1,
                data: ShotData::Outcomes(vec![0]),
            },
        ];
        assert!(matches!(
            assemble_features(&recs, 2, 2, &ens),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn multinomial_rows_sum_to_one() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        for n in 0..20 {
            let rec = sample_multinomial(&probs, 37, 5, n).unwrap();
            let ens = InputEnsemble::new(vec![0.0], vec![1.0], crate::ensemble::EnsembleKind::IidUniform)
                .unwrap();
            let rec = ShotRecord { input_index: 0, ..rec };
            let fm = assemble_features(&[rec], 4, 37, &ens).unwrap();
            let sum: f64 = fm.data.row(0).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_keys_reproduce_identical_outcomes() {
        let probs = [0.3, 0.7];
        let a = sample_multinomial(&probs, 100, 21, 5).unwrap();
        let b = sample_multinomial(&probs, 100, 21, 5).unwrap();
        assert_eq!(a, b);
        let c = sample_multinomial(&probs, 100, 22, 5).unwrap();
        assert_ne!(a, c);
    }
}
