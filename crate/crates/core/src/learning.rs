//! Eigentask learning on a reference binary classification task.
//!
//! The task is a pair of Gaussian-mixture class densities on `[-1, 1]` that
//! are not linearly separable in `u`; learning approximates the likelihood
//! `Pr[c = 1 | u]` from truncated noisy-eigentask features by logistic
//! regression. Spectrum estimation for the features uses the empirical sample
//! measure (`1/N` weights on the drawn inputs).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::InputEnsemble;
use crate::error::{Error, Result};
use crate::map::ProbabilityTable;
use crate::rng::{stream, Domain};
use crate::sampling::Shots;
use crate::spectral::NsrSpectrum;

/// A weighted Gaussian mixture truncated and renormalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    /// `(weight, mean, std dev)` per component; weights sum to 1.
    pub components: Vec<(f64, f64, f64)>,
    /// Mass of the untruncated mixture inside `[-1, 1]`.
    norm: f64,
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut total = f(a) + f(b);
    for i in 1..n {
        let coeff = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += coeff * f(a + i as f64 * h);
    }
    total * h / 3.0
}

impl GaussianMixture {
    pub fn new(components: Vec<(f64, f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        let wsum: f64 = components.iter().map(|c| c.0).sum();
        if (wsum - 1.0).abs() > 1e-9 || components.iter().any(|c| c.0 < 0.0 || c.2 <= 0.0) {
            return Err(Error::Config("mixture weights must be a simplex with positive widths".into()));
        }
        let mut mix = Self { components, norm: 1.0 };
        mix.norm = simpson(|u| mix.raw_pdf(u), -1.0, 1.0, 4000);
        if mix.norm < 1e-6 {
            return Err(Error::Config("mixture carries almost no mass inside [-1, 1]".into()));
        }
        Ok(mix)
    }

    fn raw_pdf(&self, u: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, mu, sigma)| {
                let z = (u - mu) / sigma;
                w * (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum()
    }

    /// Density on `[-1, 1]`, renormalized to integrate to 1 there.
    pub fn pdf(&self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            0.0
        } else {
            self.raw_pdf(u) / self.norm
        }
    }

    /// One rejection-sampled draw from the truncated mixture.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        loop {
            let mut pick: f64 = rng.random();
            let mut chosen = self.components[self.components.len() - 1];
            for &(w, mu, sigma) in &self.components {
                if pick < w {
                    chosen = (w, mu, sigma);
                    break;
                }
                pick -= w;
            }
            let u = chosen.1 + chosen.2 * rng.sample::<f64, _>(StandardNormal);
            if u.abs() <= 1.0 {
                return u;
            }
        }
    }
}

/// Binary classification task with known class densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTask {
    pub p0: GaussianMixture,
    pub p1: GaussianMixture,
    /// `(u, label)` pairs; the first `n_train` form the default training
    /// split.
    pub samples: Vec<(f64, u8)>,
    pub n_train: usize,
    pub n_test: usize,
}

impl ClassificationTask {
    /// `Pr[c = 1 | u]` with equal class priors.
    pub fn likelihood(&self, u: f64) -> f64 {
        let a = self.p0.pdf(u);
        let b = self.p1.pdf(u);
        if a + b == 0.0 {
            0.5
        } else {
            b / (a + b)
        }
    }

    /// Accuracy of the exact-likelihood (Bayes) classifier:
    /// `1/2 int max(p0, p1) du`.
    pub fn bayes_accuracy(&self) -> f64 {
        0.5 * simpson(|u| self.p0.pdf(u).max(self.p1.pdf(u)), -1.0, 1.0, 4000)
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.samples.iter().map(|&(u, _)| u).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|&(_, c)| c).collect()
    }

    /// Ensemble over the drawn sample inputs with `1/N` weights.
    pub fn ensemble(&self) -> Result<InputEnsemble> {
        let n = self.samples.len();
        InputEnsemble::new(
            self.inputs(),
            vec![1.0 / n as f64; n],
            crate::ensemble::EnsembleKind::IidUniform,
        )
    }
}

/// The reference class densities. Class 0 and class 1 interleave along `u`,
/// so no threshold on `u` alone separates them.
pub fn reference_densities() -> Result<(GaussianMixture, GaussianMixture)> {
    let p0 = GaussianMixture::new(vec![(0.5, -0.55, 0.15), (0.5, 0.35, 0.12)])?;
    let p1 = GaussianMixture::new(vec![(0.5, -0.10, 0.12), (0.5, 0.70, 0.14)])?;
    Ok((p0, p1))
}

/// Draw a task from explicit class densities: `n_train + n_test` labeled
/// inputs with exactly half of each split from each class.
pub fn make_task(
    p0: GaussianMixture,
    p1: GaussianMixture,
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> Result<ClassificationTask> {
    if n_train % 2 != 0 || n_test % 2 != 0 || n_train == 0 {
        return Err(Error::Config(
            "train/test sizes must be even for balanced classes".into(),
        ));
    }
    let total = n_train + n_test;
    let mut samples = Vec::with_capacity(total);
    for idx in 0..total {
        // Even sample indices are class 0, odd class 1, within each split.
        let label = (idx % 2) as u8;
        let mut rng = stream(seed, Domain::Task, idx as u64, 0);
        let u = if label == 0 { p0.sample(&mut rng) } else { p1.sample(&mut rng) };
        samples.push((u, label));
    }
    Ok(ClassificationTask { p0, p1, samples, n_train, n_test })
}

/// [`make_task`] with the reference densities.
pub fn make_reference_task(seed: u64, n_train: usize, n_test: usize) -> Result<ClassificationTask> {
    let (p0, p1) = reference_densities()?;
    make_task(p0, p1, seed, n_train, n_test)
}

/// Trained logistic readout over truncated eigentask coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: DVector<f64>,
    pub k_l: usize,
    pub shots: Shots,
    pub converged: bool,
    pub iterations: usize,
    /// Cross-entropy loss after each iteration (index 0 is the initial loss).
    pub loss_trace: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Stable cross-entropy `H(p, sigmoid(z))`.
fn cross_entropy_logit(p: f64, z: f64) -> f64 {
    p * softplus(-z) + (1.0 - p) * softplus(z)
}

const GRAD_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 5000;

/// Full-batch gradient descent on the logistic cross-entropy, no bias term
/// (the leading noisy eigentask already spans the constant function) and no
/// explicit penalty. The fixed step `1/(0.25 lambda_max)` with `lambda_max`
/// the top eigenvalue of the feature second moment makes every step a
/// descent step.
pub fn train_logistic(features: &DMatrix<f64>, labels: &[u8], shots: Shots) -> Result<LinearClassifier> {
    let n = features.nrows();
    let k_l = features.ncols();
    if n == 0 || k_l == 0 {
        return Err(Error::Structure("empty training set".into()));
    }
    if labels.len() != n {
        return Err(Error::Structure(format!("{} labels for {n} rows", labels.len())));
    }
    let second_moment = features.transpose() * features / n as f64;
    let lambda_max = SymmetricEigen::new(second_moment)
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::Numerical("feature second moment is zero".into()));
    }
    let step = 1.0 / (0.25 * lambda_max);

    let mut w = DVector::zeros(k_l);
    let mut loss_trace = Vec::with_capacity(MAX_ITERS + 1);
    let mut converged = false;
    let mut iterations = 0;
    let mut z = DVector::zeros(n);
    loop {
        z.gemv(1.0, features, &w, 0.0);
        let loss: f64 = (0..n)
            .map(|i| cross_entropy_logit(labels[i] as f64, z[i]))
            .sum::<f64>()
            / n as f64;
        loss_trace.push(loss);
        if iterations >= MAX_ITERS {
            break;
        }
        let residual = DVector::from_fn(n, |i, _| (sigmoid(z[i]) - labels[i] as f64) / n as f64);
        let grad = features.transpose() * residual;
        if grad.norm() < GRAD_TOL {
            converged = true;
            break;
        }
        w -= step * grad;
        iterations += 1;
    }
    Ok(LinearClassifier { weights: w, k_l, shots, converged, iterations, loss_trace })
}

/// Thresholded-sigmoid accuracy of a trained readout on one split.
pub fn classification_accuracy(
    classifier: &LinearClassifier,
    features: &DMatrix<f64>,
    labels: &[u8],
) -> Result<f64> {
    if features.ncols() != classifier.k_l {
        return Err(Error::Structure(format!(
            "{} feature columns for a K_L = {} classifier",
            features.ncols(),
            classifier.k_l
        )));
    }
    if features.nrows() != labels.len() {
        return Err(Error::Structure("feature/label length mismatch".into()));
    }
    let z = features * &classifier.weights;
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(i, &c)| (z[*i] > 0.0) as u8 == c)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Train/test accuracy of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Train on the training rows and evaluate both splits.
pub fn train_and_evaluate(
    y_bar: &DMatrix<f64>,
    labels: &[u8],
    train_idx: &[usize],
    test_idx: &[usize],
    k_l: usize,
    shots: Shots,
) -> Result<EvalResult> {
    if k_l == 0 || k_l > y_bar.ncols() {
        return Err(Error::Structure(format!(
            "K_L = {k_l} outside 1..={}",
            y_bar.ncols()
        )));
    }
    let take = |idx: &[usize]| -> (DMatrix<f64>, Vec<u8>) {
        let phi = DMatrix::from_fn(idx.len(), k_l, |r, c| y_bar[(idx[r], c)]);
        let lab = idx.iter().map(|&i| labels[i]).collect();
        (phi, lab)
    };
    let (phi_train, lab_train) = take(train_idx);
    let (phi_test, lab_test) = take(test_idx);
    let clf = train_logistic(&phi_train, &lab_train, shots)?;
    Ok(EvalResult {
        train_accuracy: classification_accuracy(&clf, &phi_train, &lab_train)?,
        test_accuracy: classification_accuracy(&clf, &phi_test, &lab_test)?,
    })
}

/// Mean/min/max accuracies over permutations for one truncation order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_l: usize,
    pub train_acc_mean: f64,
    pub train_acc_min: f64,
    pub train_acc_max: f64,
    pub test_acc_mean: f64,
    pub test_acc_min: f64,
    pub test_acc_max: f64,
}

fn permutation_split(n: usize, n_train: usize, seed: u64, permutation: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, Domain::Permutation, permutation, 0);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Sweep the truncation order `K_L = 1..=K` over random train/test
/// permutations of the labeled samples.
pub fn accuracy_sweep(
    y_bar: &DMatrix<f64>,
    labels: &[u8],
    n_train: usize,
    permutations: usize,
    shots: Shots,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    #[cfg(feature = "parallel")]
    use rayon::prelude::*;
    let n = y_bar.nrows();
    if n_train == 0 || n_train >= n {
        return Err(Error::Structure(format!("n_train = {n_train} outside 1..{n}")));
    }
    if permutations == 0 {
        return Err(Error::Structure("need at least one permutation".into()));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..permutations)
        .map(|p| permutation_split(n, n_train, seed, p as u64))
        .collect();
    let k = y_bar.ncols();
    let orders: Vec<usize> = (1..=k).collect();
    #[cfg(feature = "parallel")]
    let iter = orders.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = orders.iter();
    iter.map(|&k_l| {
            let mut train_sum = 0.0;
            let mut train_min = f64::INFINITY;
            let mut train_max = f64::NEG_INFINITY;
            let mut test_sum = 0.0;
            let mut test_min = f64::INFINITY;
            let mut test_max = f64::NEG_INFINITY;
            for (train_idx, test_idx) in &splits {
                let eval = train_and_evaluate(y_bar, labels, train_idx, test_idx, k_l, shots)?;
                train_sum += eval.train_accuracy;
                train_min = train_min.min(eval.train_accuracy);
                train_max = train_max.max(eval.train_accuracy);
                test_sum += eval.test_accuracy;
                test_min = test_min.min(eval.test_accuracy);
                test_max = test_max.max(eval.test_accuracy);
            }
            let p = permutations as f64;
            Ok(SweepRow {
                k_l,
                train_acc_mean: train_sum / p,
                train_acc_min: train_min,
                train_acc_max: train_max,
                test_acc_mean: test_sum / p,
                test_acc_min: test_min,
                test_acc_max: test_max,
            })
        })
        .collect()
}

/// Result of comparing the cumulant-expansion loss against a Monte Carlo
/// estimate of the exact stochastic loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossExpansion {
    pub mc_loss: f64,
    pub expansion_loss: f64,
    pub gap: f64,
}

/// Evaluate the noisy logistic loss two ways at `S` shots and weights
/// `omega` over the leading eigentasks:
///
/// * expansion: `E_u[H(f, sigma(omega . y))]
///   + (sum_k (beta_k^2/S) omega_k^2) E_u[sigma (1 - sigma)]`,
/// * Monte Carlo: `E_u E_X[H(f, sigma(omega . ybar))]` over `reps` fresh
///   `S`-shot draws per input.
///
/// Requires finite NSR for every weighted eigentask. The generator must be
/// multinomial (`table` rows are outcome probabilities).
pub fn loss_expansion_check(
    table: &ProbabilityTable,
    ensemble: &InputEnsemble,
    spectrum: &NsrSpectrum,
    omega: &[f64],
    f_values: &[f64],
    shots: u64,
    reps: usize,
    seed: u64,
) -> Result<LossExpansion> {
    let n = table.values.nrows();
    let k = table.values.ncols();
    let k_l = omega.len();
    if k_l == 0 || k_l > spectrum.k() {
        return Err(Error::Structure(format!("omega has {k_l} entries for K = {}", spectrum.k())));
    }
    if f_values.len() != n || ensemble.len() != n {
        return Err(Error::Structure("target/ensemble/table length mismatch".into()));
    }
    if shots == 0 || reps == 0 {
        return Err(Error::Domain("shots and reps must be positive".into()));
    }
    if spectrum.finite[..k_l].iter().any(|&f| !f) {
        return Err(Error::Domain(
            "loss expansion needs finite NSR for every weighted eigentask".into(),
        ));
    }

    // Feature-space readout: z = omega . ybar = w_feat . Xbar.
    let mut w_feat = vec![0.0; k];
    for j in 0..k {
        for (kk, &om) in omega.iter().enumerate() {
            w_feat[j] += om * spectrum.r[(j, kk)];
        }
    }

    let weights = ensemble.weights();
    let mut expansion = 0.0;
    let mut curvature = 0.0;
    for idx in 0..n {
        let mut z = 0.0;
        for j in 0..k {
            z += w_feat[j] * table.values[(idx, j)];
        }
        let s = sigmoid(z);
        expansion += weights[idx] * cross_entropy_logit(f_values[idx], z);
        curvature += weights[idx] * s * (1.0 - s);
    }
    let noise_power: f64 = omega
        .iter()
        .enumerate()
        .map(|(kk, &om)| spectrum.beta2[kk] / shots as f64 * om * om)
        .sum();
    let expansion_loss = expansion + noise_power * curvature;

    // Monte Carlo over fresh S-shot draws. Per-input terms are collected in
    // order and summed serially so the result is independent of threading.
    #[cfg(feature = "parallel")]
    use rayon::prelude::*;
    let mc_term = |idx: usize| {
        let row = table.values.row(idx);
        let mut cdf = Vec::with_capacity(k);
        let mut acc = 0.0;
        for j in 0..k {
            acc += row[j].max(0.0);
            cdf.push(acc);
        }
        let mut mean_h = 0.0;
        for rep in 0..reps {
            let mut rng = stream(seed, Domain::Misc, idx as u64, rep as u64);
            let mut z_sum = 0.0;
            for _ in 0..shots {
                let x: f64 = rng.random_range(0.0..acc);
                let o = cdf.partition_point(|&c| c <= x).min(k - 1);
                z_sum += w_feat[o];
            }
            mean_h += cross_entropy_logit(f_values[idx], z_sum / shots as f64);
        }
        weights[idx] * mean_h / reps as f64
    };
    #[cfg(feature = "parallel")]
    let terms: Vec<f64> = (0..n).into_par_iter().map(mc_term).collect();
    #[cfg(not(feature = "parallel"))]
    let terms: Vec<f64> = (0..n).map(mc_term).collect();
    let mc_loss: f64 = terms.iter().sum();

    Ok(LossExpansion {
        mc_loss,
        expansion_loss,
        gap: mc_loss - expansion_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn densities_normalize_and_define_likelihood() {
        let (p0, p1) = reference_densities().unwrap();
        let z0 = simpson(|u| p0.pdf(u), -1.0, 1.0, 4000);
        let z1 = simpson(|u| p1.pdf(u), -1.0, 1.0, 4000);
        assert_relative_eq!(z0, 1.0, epsilon = 1e-6);
        assert_relative_eq!(z1, 1.0, epsilon = 1e-6);
        let task = make_reference_task(1, 10, 10).unwrap();
        for u in [-0.9, -0.3, 0.1, 0.5, 0.95] {
            let lik = task.likelihood(u);
            assert_relative_eq!(lik, p1.pdf(u) / (p0.pdf(u) + p1.pdf(u)), epsilon = 1e-12);
        }
    }

    #[test]
    fn task_has_balanced_classes() {
        let task = make_reference_task(5, 150, 150).unwrap();
        let train = &task.samples[..150];
        let test = &task.samples[150..];
        assert_eq!(train.iter().filter(|s| s.1 == 1).count(), 75);
        assert_eq!(test.iter().filter(|s| s.1 == 1).count(), 75);
        assert!(task.samples.iter().all(|&(u, _)| u.abs() <= 1.0));
    }

    #[test]
    fn sampler_matches_its_own_density() {
        // Empirical class-1 fraction per u-bin tracks the likelihood within
        // binomial tolerance.
        let task = make_reference_task(7, 20_000, 0).unwrap();
        let bins = 10usize;
        let mut count = vec![0usize; bins];
        let mut ones = vec![0usize; bins];
        for &(u, c) in &task.samples {
            let b = (((u + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
            count[b] += 1;
            ones[b] += c as usize;
        }
        for b in 0..bins {
            if count[b] < 100 {
                continue;
            }
            let u_mid = -1.0 + (b as f64 + 0.5) * 2.0 / bins as f64;
            // Bin-averaged likelihood, weighted by total density.
            let lo = -1.0 + b as f64 * 2.0 / bins as f64;
            let hi = lo + 2.0 / bins as f64;
            let mass1 = simpson(|u| task.p1.pdf(u), lo, hi, 200);
            let mass_total = mass1 + simpson(|u| task.p0.pdf(u), lo, hi, 200);
            let expected = mass1 / mass_total;
            let observed = ones[b] as f64 / count[b] as f64;
            let sigma = (expected * (1.0 - expected) / count[b] as f64).sqrt().max(1e-3);
            assert!(
                (observed - expected).abs() < 4.0 * sigma,
                "bin {b} around {u_mid}: observed {observed}, expected {expected}"
            );
        }
    }

    #[test]
    fn bayes_accuracy_upper_bounds_threshold_rules() {
        let task = make_reference_task(3, 2000, 0).unwrap();
        let bayes = task.bayes_accuracy();
        assert!(bayes > 0.5 && bayes < 1.0);
        // Any plain threshold on u does no better.
        for threshold in [-0.5, 0.0, 0.3] {
            let acc = task
                .samples
                .iter()
                .filter(|&&(u, c)| ((u > threshold) as u8) == c)
                .count() as f64
                / task.samples.len() as f64;
            assert!(acc.max(1.0 - acc) < bayes + 0.02, "threshold {threshold}");
        }
    }

    #[test]
    fn separable_toy_problem_reaches_full_accuracy() {
        let n = 40;
        let features = DMatrix::from_fn(n, 1, |i, _| if i < n / 2 { -1.0 } else { 1.0 });
        let labels: Vec<u8> = (0..n).map(|i| (i >= n / 2) as u8).collect();
        let clf = train_logistic(&features, &labels, Shots::Infinite).unwrap();
        let acc = classification_accuracy(&clf, &features, &labels).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn loss_is_non_increasing() {
        let task = make_reference_task(11, 60, 0).unwrap();
        let features = DMatrix::from_fn(60, 3, |i, c| {
            let u = task.samples[i].0;
            [1.0, u, u * u - 0.5][c]
        });
        let labels = task.labels();
        let clf = train_logistic(&features, &labels[..60], Shots::Infinite).unwrap();
        for w in clf.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn symmetric_task_puts_boundary_at_origin() {
        let p0 = GaussianMixture::new(vec![(1.0, -0.4, 0.15)]).unwrap();
        let p1 = GaussianMixture::new(vec![(1.0, 0.4, 0.15)]).unwrap();
        let n = 4000;
        let mut samples = Vec::new();
        for idx in 0..n {
            let label = (idx % 2) as u8;
            let mut rng = stream(23, Domain::Task, idx as u64, 0);
            let u = if label == 0 { p0.sample(&mut rng) } else { p1.sample(&mut rng) };
            samples.push((u, label));
        }
        // Features (1, u): boundary z = w0 + w1 u = 0 at u* = -w0/w1.
        let features = DMatrix::from_fn(n, 2, |i, c| if c == 0 { 1.0 } else { samples[i].0 });
        let labels: Vec<u8> = samples.iter().map(|s| s.1).collect();
        let clf = train_logistic(&features, &labels, Shots::Infinite).unwrap();
        let boundary = -clf.weights[0] / clf.weights[1];
        assert!(boundary.abs() < 0.05, "boundary at {boundary}");
    }

    #[test]
    fn zero_weights_score_majority_fraction() {
        let task = make_reference_task(2, 200, 0).unwrap();
        let features = DMatrix::from_element(200, 1, 1.0);
        let clf = LinearClassifier {
            weights: DVector::zeros(1),
            k_l: 1,
            shots: Shots::Infinite,
            converged: true,
            iterations: 0,
            loss_trace: vec![],
        };
        let acc = classification_accuracy(&clf, &features, &task.labels()).unwrap();
        assert_relative_eq!(acc, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn more_shots_never_hurt_peak_accuracy() {
        use crate::map::{Generator, NoiseModel};
        use crate::quantum::{random_circuit_encoding, ring_graph};
        use crate::sampling::sample_feature_matrix;
        use crate::spectral::{noisy_eigentasks, raw_moments, solve_nsr};
        let enc = random_circuit_encoding(3, 3, std::f64::consts::FRAC_PI_2, ring_graph(3), 83).unwrap();
        let generator = Generator::Circuit(enc);
        let task = make_reference_task(84, 100, 100).unwrap();
        let ensemble = task.ensemble().unwrap();
        let labels = task.labels();
        let mut peak = Vec::new();
        for shots in [32u64, 1024] {
            let fm = sample_feature_matrix(&generator, &ensemble, Shots::Finite(shots), 85).unwrap();
            let spec = solve_nsr(&raw_moments(&fm, NoiseModel::Multinomial).unwrap()).unwrap();
            let y_bar = noisy_eigentasks(&fm, &spec).unwrap().y_bar;
            let rows = accuracy_sweep(&y_bar, &labels, 100, 5, Shots::Finite(shots), 86).unwrap();
            peak.push(rows.iter().map(|r| r.test_acc_mean).fold(0.0f64, f64::max));
        }
        // Statistical tendency with generous slack for 100 test points.
        assert!(
            peak[1] >= peak[0] - 0.05,
            "peak accuracy dropped with more shots: {peak:?}"
        );
    }

    #[test]
    fn expansion_with_zero_weights_is_exact() {
        use crate::map::{tabulate, Generator};
        use crate::quantum::{random_circuit_encoding, ring_graph};
        use crate::spectral::{exact_moments, solve_nsr};
        let enc = random_circuit_encoding(2, 2, 1.0, ring_graph(2), 31).unwrap();
        let ens = InputEnsemble::equispaced_grid(51).unwrap();
        let table = tabulate(&Generator::Circuit(enc), &ens).unwrap();
        let spectrum = solve_nsr(&exact_moments(&table, &ens).unwrap()).unwrap();
        let f: Vec<f64> = ens.values().iter().map(|&u| (1.0 + u) / 2.0).collect();
        let out = loss_expansion_check(&table, &ens, &spectrum, &[0.0, 0.0], &f, 8, 50, 3).unwrap();
        // Omega = 0: expansion is exactly E_u[H(f, 1/2)] = ln 2.
        assert_relative_eq!(out.expansion_loss, std::f64::consts::LN_2, epsilon = 1e-12);
        assert_relative_eq!(out.mc_loss, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn expansion_gap_closes_at_large_shots() {
        use crate::map::{tabulate, Generator};
        use crate::quantum::{random_circuit_encoding, ring_graph};
        use crate::spectral::{eigentasks, exact_moments, solve_nsr};
        use crate::sampling::FeatureMatrix;
        let enc = random_circuit_encoding(2, 2, 1.2, ring_graph(2), 37).unwrap();
        let ens = InputEnsemble::equispaced_grid(41).unwrap();
        let table = tabulate(&Generator::Circuit(enc), &ens).unwrap();
        let moments = exact_moments(&table, &ens).unwrap();
        let spectrum = solve_nsr(&moments).unwrap();
        let f: Vec<f64> = ens.values().iter().map(|&u| (1.0 + u) / 2.0).collect();
        let omega = [0.4, -0.3, 0.2];

        // Deterministic loss at S = infinity.
        let fm = FeatureMatrix {
            data: table.values.clone(),
            shots: Shots::Infinite,
            ensemble: ens.clone(),
        };
        let tasks = eigentasks(&table, &fm, &spectrum).unwrap();
        let det: f64 = ens
            .weights()
            .iter()
            .enumerate()
            .map(|(n, &w)| {
                let z: f64 = omega.iter().enumerate().map(|(k, &om)| om * tasks.y[(n, k)]).sum();
                w * cross_entropy_logit(f[n], z)
            })
            .sum();

        let big = loss_expansion_check(&table, &ens, &spectrum, &omega, &f, 65536, 40, 5).unwrap();
        assert!((big.mc_loss - det).abs() < 2e-3, "mc {} det {det}", big.mc_loss);
        assert!((big.expansion_loss - det).abs() < 2e-3);
        let small = loss_expansion_check(&table, &ens, &spectrum, &omega, &f, 8, 400, 5).unwrap();
        assert!(small.gap.abs() > big.gap.abs());
    }
}
