//! Moment estimation, the noise-to-signal eigenproblem, eigentasks, and
//! resolvable expressive capacity.
//!
//! The central objects are the Gram matrix `G = E_u[x x^T]`, the diagonal
//! second-moment matrix `D` with `D_kk = E_u[x_k]`, and the expected shot
//! covariance `V = E_u[Sigma(u)]`. The generalized eigenproblem
//! `V r = beta^2 G r` orders feature-space directions by noise-to-signal
//! ratio; capacity at `S` shots is `C_T = sum_k 1/(1 + beta_k^2/S)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{NoiseModel, ProbabilityTable};
use crate::sampling::{FeatureMatrix, ShotData, ShotRecord, Shots};

/// Estimated or exact moment matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    /// `K x K` symmetric PSD Gram matrix.
    pub g: DMatrix<f64>,
    /// Diagonal of the second-moment matrix `D`.
    pub d: DVector<f64>,
    /// `K x K` symmetric PSD expected covariance.
    pub v: DMatrix<f64>,
    pub n_inputs: usize,
    pub shots: Shots,
    pub model: NoiseModel,
    /// Whether the finite-shot de-bias was applied.
    pub debiased: bool,
    pub warnings: Vec<String>,
}

/// NSR spectrum with eigentask coefficient vectors.
///
/// Entries are ascending in `beta2`; non-correctable directions (features
/// outside the Gram range, dropped dead outcomes, or saturated finite-shot
/// corrections) carry `beta2 = +inf` and `finite = false`. The infinity is
/// tracked by the flag array so serialized output stays exact.
#[derive(Debug, Clone, PartialEq)]
pub struct NsrSpectrum {
    pub beta2: Vec<f64>,
    pub finite: Vec<bool>,
    /// Companion eigenvalues `alpha_k = 1/(1 + beta_k^2)`; 0 for infinite.
    pub alpha: Vec<f64>,
    /// Column `k` holds the coefficient vector `r^(k)`; finite columns are
    /// G-orthonormal, infinite ones unit-norm placeholders.
    pub r: DMatrix<f64>,
    /// Count of directions resolvable at all (finite entries).
    pub effective_rank: usize,
    /// Feature columns excluded because they were never observed.
    pub dropped: Vec<usize>,
    pub model: NoiseModel,
}

impl NsrSpectrum {
    pub fn k(&self) -> usize {
        self.beta2.len()
    }
}

/// Tabulated eigentasks `y^(k)(u^(n))` (from exact features) and noisy
/// eigentasks `ybar^(k)(u^(n))` (from measured features).
#[derive(Debug, Clone, PartialEq)]
pub struct EigentaskTable {
    pub y: DMatrix<f64>,
    pub y_bar: DMatrix<f64>,
    pub shots: Shots,
}

/// A resolvable-capacity curve: `(S, C_T(S))` points plus the infinite-shot
/// asymptote `rank(G)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecCurve {
    pub points: Vec<(f64, f64)>,
    pub rank_g: usize,
}

fn weighted_gram(features: &FeatureMatrix) -> (DMatrix<f64>, DVector<f64>) {
    let k = features.n_features();
    let mut g = DMatrix::zeros(k, k);
    let mut d = DVector::zeros(k);
    for (n, &w) in features.ensemble.weights().iter().enumerate() {
        let row = features.data.row(n);
        for a in 0..k {
            d[a] += w * row[a];
            for b in a..k {
                g[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    (g, d)
}

fn structural_v(g: &DMatrix<f64>, d: &DVector<f64>, model: NoiseModel) -> Result<DMatrix<f64>> {
    match model {
        NoiseModel::Multinomial => Ok(DMatrix::from_diagonal(d) - g),
        NoiseModel::Poisson => Ok(DMatrix::from_diagonal(d)),
        NoiseModel::Generic => Err(Error::Domain(
            "generic noise model has no analytic covariance; supply shot records".into(),
        )),
    }
}

/// Raw (biased) moment estimates `G~`, `D~` and the model-structured `V~`
/// directly from measured features, with no finite-shot de-bias. Feeds the
/// eigenvalue-level correction of [`correct_finite_shots`].
pub fn raw_moments(features: &FeatureMatrix, model: NoiseModel) -> Result<MomentEstimates> {
    let (g, d) = weighted_gram(features);
    let v = structural_v(&g, &d, model)?;
    let mut warnings = Vec::new();
    if features.n_inputs() < features.n_features() {
        warnings.push(format!(
            "N = {} inputs below K = {} features; moment estimates are rank-deficient",
            features.n_inputs(),
            features.n_features()
        ));
    }
    Ok(MomentEstimates {
        g,
        d,
        v,
        n_inputs: features.n_inputs(),
        shots: features.shots,
        model,
        debiased: false,
        warnings,
    })
}

/// Bessel-corrected covariance from per-shot records:
/// `V = E_u[ (1/(S-1)) sum_s (X^(s) - Xbar)(X^(s) - Xbar)^T ]`.
fn bessel_covariance(features: &FeatureMatrix, records: &[ShotRecord]) -> Result<DMatrix<f64>> {
    let k = features.n_features();
    let n = features.n_inputs();
    if records.len() != n {
        return Err(Error::Structure(format!(
            "{} records for {} feature rows",
            records.len(),
            n
        )));
    }
    let mut v = DMatrix::zeros(k, k);
    let mut shot_vec = vec![0.0; k];
    for (idx, record) in records.iter().enumerate() {
        let s = record.shots();
        if s < 2 {
            return Err(Error::Domain(
                "Bessel-corrected covariance needs at least 2 shots".into(),
            ));
        }
        let w = features.ensemble.weights()[idx] / (s as f64 - 1.0);
        let mean = features.data.row(idx);
        let mut accumulate = |shot: &[f64]| {
            for a in 0..k {
                let da = shot[a] - mean[a];
                for b in a..k {
                    v[(a, b)] += w * da * (shot[b] - mean[b]);
                }
            }
        };
        match &record.data {
            ShotData::Outcomes(outcomes) => {
                for &o in outcomes {
                    shot_vec.iter_mut().for_each(|x| *x = 0.0);
                    let o = o as usize;
                    if o >= k {
                        return Err(Error::Structure(format!("outcome {o} >= K = {k}")));
                    }
                    shot_vec[o] = 1.0;
                    accumulate(&shot_vec);
                }
            }
            ShotData::Counts { k: rk, counts } => {
                if *rk != k {
                    return Err(Error::Structure(format!("record K = {rk}, expected {k}")));
                }
                for chunk in counts.chunks_exact(*rk) {
                    for (x, &c) in shot_vec.iter_mut().zip(chunk) {
                        *x = c as f64;
                    }
                    accumulate(&shot_vec);
                }
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            v[(a, b)] = v[(b, a)];
        }
    }
    Ok(v)
}

/// Estimate moment matrices from measured features.
///
/// * `Multinomial`, finite `S >= 2`: closed-form de-bias
///   `G = S/(S-1) G~ - 1/(S-1) D~`, `D = D~`, `V = D - G`.
/// * `Multinomial`, `S = 1`: de-bias impossible; returns raw estimates with
///   `debiased = false` and a warning.
/// * `Poisson`: `V = D~` (diagonal), `G = G~ - V/S`.
/// * `Generic`: `V` from per-shot records via Bessel's correction,
///   `G = G~ - V/S`; records are required.
/// * `S = infinite`: features are exact, `V` from the model's analytic
///   single-shot covariance.
pub fn estimate_moments(
    features: &FeatureMatrix,
    records: Option<&[ShotRecord]>,
    model: NoiseModel,
) -> Result<MomentEstimates> {
    let (g_tilde, d_tilde) = weighted_gram(features);
    let mut warnings = Vec::new();
    if features.n_inputs() < features.n_features() {
        warnings.push(format!(
            "N = {} inputs below K = {} features; moment estimates are rank-deficient",
            features.n_inputs(),
            features.n_features()
        ));
    }
    let (g, d, v, debiased) = match (features.shots, model) {
        (Shots::Infinite, _) => {
            let v = structural_v(&g_tilde, &d_tilde, model)?;
            (g_tilde, d_tilde, v, true)
        }
        (Shots::Finite(1), NoiseModel::Multinomial) => {
            warnings.push(
                "S = 1: multinomial de-bias would divide by zero; returning raw estimates".into(),
            );
            let v = structural_v(&g_tilde, &d_tilde, model)?;
            (g_tilde, d_tilde, v, false)
        }
        (Shots::Finite(s), NoiseModel::Multinomial) => {
            let s = s as f64;
            let g = &g_tilde * (s / (s - 1.0)) - DMatrix::from_diagonal(&d_tilde) / (s - 1.0);
            let v = DMatrix::from_diagonal(&d_tilde) - &g;
            (g, d_tilde, v, true)
        }
        (Shots::Finite(s), NoiseModel::Poisson) => {
            let v = DMatrix::from_diagonal(&d_tilde);
            let g = &g_tilde - &v / s as f64;
            (g, d_tilde, v, true)
        }
        (Shots::Finite(s), NoiseModel::Generic) => {
            let records = records.ok_or_else(|| {
                Error::Structure("generic noise model requires per-shot records".into())
            })?;
            let v = bessel_covariance(features, records)?;
            let g = &g_tilde - &v / s as f64;
            (g, d_tilde, v, true)
        }
    };
    Ok(MomentEstimates {
        g,
        d,
        v,
        n_inputs: features.n_inputs(),
        shots: features.shots,
        model,
        debiased,
        warnings,
    })
}

/// Exact moments of a tabulated probability map (no sampling noise in the
/// estimates; `V` from the analytic single-shot covariance).
pub fn exact_moments(
    table: &ProbabilityTable,
    ensemble: &crate::ensemble::InputEnsemble,
) -> Result<MomentEstimates> {
    let fm = FeatureMatrix {
        data: table.values.clone(),
        shots: Shots::Infinite,
        ensemble: ensemble.clone(),
    };
    estimate_moments(&fm, None, table.noise_model)
}

struct EigenEntry {
    beta2: f64,
    vec: DVector<f64>,
    finite: bool,
}

fn sign_fix(v: &mut DVector<f64>) {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.neg_mut();
    }
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Order entries (finite ascending in beta2, infinite last), fix signs, and
/// package the spectrum.
fn finalize(
    mut entries: Vec<EigenEntry>,
    k: usize,
    dropped: Vec<usize>,
    model: NoiseModel,
) -> NsrSpectrum {
    for e in &mut entries {
        sign_fix(&mut e.vec);
    }
    entries.sort_by(|a, b| match (a.finite, b.finite) {
        (true, false) => std::cmp::Ordering::Less,
        (false, true) => std::cmp::Ordering::Greater,
        _ => a
            .beta2
            .partial_cmp(&b.beta2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                if lex_less(&a.vec, &b.vec) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            }),
    });
    let effective_rank = entries.iter().filter(|e| e.finite).count();
    let beta2: Vec<f64> = entries.iter().map(|e| e.beta2).collect();
    let finite: Vec<bool> = entries.iter().map(|e| e.finite).collect();
    let alpha: Vec<f64> = entries
        .iter()
        .map(|e| if e.finite { 1.0 / (1.0 + e.beta2) } else { 0.0 })
        .collect();
    let r = DMatrix::from_fn(k, entries.len(), |i, j| entries[j].vec[i]);
    NsrSpectrum {
        beta2,
        finite,
        alpha,
        r,
        effective_rank,
        dropped,
        model,
    }
}

/// Columns whose second moment vanishes (never-observed outcomes or dead
/// detectors); these are excluded from the whitened eigenproblem.
fn live_columns(diag: &DVector<f64>) -> (Vec<usize>, Vec<usize>) {
    let max = diag.iter().cloned().fold(0.0f64, f64::max);
    let tol = diag.len() as f64 * f64::EPSILON * max;
    let (mut live, mut dropped) = (Vec::new(), Vec::new());
    for (i, &x) in diag.iter().enumerate() {
        if x > tol {
            live.push(i);
        } else {
            dropped.push(i);
        }
    }
    (live, dropped)
}

fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Whitened eigensolve shared by the multinomial path (whiten by `D`,
/// eigenvalue `alpha = 1/(1+beta^2)`) and the diagonal-V optical path
/// (whiten by `V`, eigenvalue `mu = 1/beta^2`).
fn diagonal_whitened_path(
    g: &DMatrix<f64>,
    diag: &DVector<f64>,
    beta2_of_eig: impl Fn(f64) -> f64,
    model: NoiseModel,
) -> NsrSpectrum {
    let k = g.nrows();
    let (live, dropped) = live_columns(diag);
    let kk = live.len();
    let mut entries: Vec<EigenEntry> = Vec::with_capacity(k);
    if kk > 0 {
        let inv_sqrt: Vec<f64> = live.iter().map(|&i| 1.0 / diag[i].sqrt()).collect();
        let mut w = submatrix(g, &live);
        for a in 0..kk {
            for b in 0..kk {
                w[(a, b)] *= inv_sqrt[a] * inv_sqrt[b];
            }
        }
        let eig = SymmetricEigen::new(w);
        let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let rank_tol = kk as f64 * f64::EPSILON * max_eig;
        for i in 0..kk {
            let lam = eig.eigenvalues[i].max(0.0);
            let mut vec = DVector::zeros(k);
            if lam > rank_tol {
                // G-normalized eigenvector: r = D^{-1/2} t / sqrt(lam).
                let scale = 1.0 / lam.sqrt();
                for (a, &col) in live.iter().enumerate() {
                    vec[col] = inv_sqrt[a] * eig.eigenvectors[(a, i)] * scale;
                }
                entries.push(EigenEntry {
                    beta2: beta2_of_eig(lam).max(0.0),
                    vec,
                    finite: true,
                });
            } else {
                // Outside the Gram range: zero signal, unresolvable.
                let mut norm = 0.0;
                for (a, &col) in live.iter().enumerate() {
                    vec[col] = inv_sqrt[a] * eig.eigenvectors[(a, i)];
                    norm += vec[col] * vec[col];
                }
                vec /= norm.sqrt();
                entries.push(EigenEntry {
                    beta2: f64::INFINITY,
                    vec,
                    finite: false,
                });
            }
        }
    }
    for &col in &dropped {
        let mut vec = DVector::zeros(k);
        vec[col] = 1.0;
        entries.push(EigenEntry {
            beta2: f64::INFINITY,
            vec,
            finite: false,
        });
    }
    finalize(entries, k, dropped, model)
}

/// Generic symmetric-definite path: whiten by `G` (pseudo-inverse on its
/// below-tolerance directions) and diagonalize `G^{-1/2} V G^{-1/2}`.
fn gram_whitened_path(g: &DMatrix<f64>, v: &DMatrix<f64>, model: NoiseModel) -> NsrSpectrum {
    let k = g.nrows();
    let eig_g = SymmetricEigen::new(g.clone());
    let max_eig = eig_g.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let rank_tol = k as f64 * f64::EPSILON * max_eig;
    let kept: Vec<usize> = (0..k).filter(|&i| eig_g.eigenvalues[i] > rank_tol).collect();
    let mut entries = Vec::with_capacity(k);
    if !kept.is_empty() {
        // Reduced whitening basis: columns Q_i / sqrt(lambda_i).
        let basis = DMatrix::from_fn(k, kept.len(), |row, j| {
            eig_g.eigenvectors[(row, kept[j])] / eig_g.eigenvalues[kept[j]].sqrt()
        });
        let reduced = basis.transpose() * v * &basis;
        let eig_r = SymmetricEigen::new(reduced);
        for i in 0..kept.len() {
            let vec = &basis * eig_r.eigenvectors.column(i);
            entries.push(EigenEntry {
                beta2: eig_r.eigenvalues[i].max(0.0),
                vec,
                finite: true,
            });
        }
    }
    for i in 0..k {
        if eig_g.eigenvalues[i] <= rank_tol {
            entries.push(EigenEntry {
                beta2: f64::INFINITY,
                vec: eig_g.eigenvectors.column(i).into_owned(),
                finite: false,
            });
        }
    }
    finalize(entries, k, Vec::new(), model)
}

/// Solve the NSR eigenproblem `V r = beta^2 G r`.
///
/// The multinomial path uses `V = D - G` and the symmetric whitened form
/// `D^{-1/2} G D^{-1/2}` (eigenvalues `alpha = 1/(1+beta^2)`); the Poisson
/// path whitens by the diagonal `V`; the generic path whitens by `G` with a
/// pseudo-inverse on its numerically null directions. Eigenvectors are
/// G-normalized with the largest-magnitude component positive.
pub fn solve_nsr(moments: &MomentEstimates) -> Result<NsrSpectrum> {
    let k = moments.g.nrows();
    if moments.g.ncols() != k || moments.v.nrows() != k || moments.d.len() != k {
        return Err(Error::Structure("moment matrices have mismatched shapes".into()));
    }
    Ok(match moments.model {
        NoiseModel::Multinomial => {
            // alpha = 1/(1+beta^2)  =>  beta^2 = 1/alpha - 1.
            diagonal_whitened_path(&moments.g, &moments.d, |a| 1.0 / a - 1.0, moments.model)
        }
        NoiseModel::Poisson => {
            let vdiag = moments.v.diagonal();
            // mu = 1/beta^2  =>  beta^2 = 1/mu.
            diagonal_whitened_path(&moments.g, &vdiag, |m| 1.0 / m, moments.model)
        }
        NoiseModel::Generic => gram_whitened_path(&moments.g, &moments.v, moments.model),
    })
}

/// Map a raw finite-`S` spectrum to de-biased NSR eigenvalues:
/// `beta^2 = S beta~^2 / ((S-1) - beta~^2)`. Entries with
/// `beta~^2 >= S - 1` are saturated, hence not correctable, and are flagged
/// infinite. Eigenvectors carry over unchanged.
pub fn correct_finite_shots(spectrum_tilde: &NsrSpectrum, shots: u64) -> Result<NsrSpectrum> {
    if shots < 2 {
        return Err(Error::Domain(
            "finite-shot correction needs S >= 2".into(),
        ));
    }
    let s = shots as f64;
    let mut out = spectrum_tilde.clone();
    for i in 0..out.beta2.len() {
        if !spectrum_tilde.finite[i] {
            continue;
        }
        let bt = spectrum_tilde.beta2[i];
        if bt < s - 1.0 {
            out.beta2[i] = s * bt / ((s - 1.0) - bt);
            out.alpha[i] = 1.0 / (1.0 + out.beta2[i]);
        } else {
            out.beta2[i] = f64::INFINITY;
            out.finite[i] = false;
            out.alpha[i] = 0.0;
        }
    }
    out.effective_rank = out.finite.iter().filter(|&&f| f).count();
    Ok(out)
}

/// Resolvable expressive capacity from a spectrum:
/// `C_T(S) = sum_k 1/(1 + beta_k^2/S)`; infinite entries contribute zero, so
/// the infinite-shot limit counts the finite entries (`rank G`).
pub fn rec(spectrum: &NsrSpectrum, shots: Shots) -> f64 {
    match shots {
        Shots::Infinite => spectrum.effective_rank as f64,
        Shots::Finite(s) => spectrum
            .beta2
            .iter()
            .zip(&spectrum.finite)
            .filter(|(_, &f)| f)
            .map(|(&b, _)| 1.0 / (1.0 + b / s as f64))
            .sum(),
    }
}

fn sym_pinv_times(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let tol = m.nrows() as f64 * f64::EPSILON * max_eig;
    let qt_rhs = eig.eigenvectors.transpose() * rhs;
    let mut scaled = qt_rhs;
    for i in 0..m.nrows() {
        let lam = eig.eigenvalues[i];
        let inv = if lam > tol { 1.0 / lam } else { 0.0 };
        scaled.row_mut(i).scale_mut(inv);
    }
    &eig.eigenvectors * scaled
}

/// Trace-formula capacity `C_T = Tr((G + V/S)^{-1} G)` (pseudo-inverse when
/// the regularized Gram is rank-deficient). Agrees with [`rec`] on the
/// spectrum of the same moments.
pub fn rec_trace(moments: &MomentEstimates, shots: Shots) -> f64 {
    let m = match shots {
        Shots::Infinite => moments.g.clone(),
        Shots::Finite(s) => &moments.g + &moments.v / s as f64,
    };
    sym_pinv_times(&m, &moments.g).trace()
}

/// Capacity curve over a list of shot budgets (sorted ascending).
pub fn rec_curve(spectrum: &NsrSpectrum, s_list: &[u64]) -> RecCurve {
    let mut s_sorted: Vec<u64> = s_list.to_vec();
    s_sorted.sort_unstable();
    RecCurve {
        points: s_sorted
            .into_iter()
            .map(|s| (s as f64, rec(spectrum, Shots::Finite(s))))
            .collect(),
        rank_g: spectrum.effective_rank,
    }
}

/// Count of eigentasks resolvable at `S` shots: `beta_k^2 < S` (strict).
pub fn k_cutoff(spectrum: &NsrSpectrum, shots: Shots) -> usize {
    match shots {
        Shots::Infinite => spectrum.effective_rank,
        Shots::Finite(s) => spectrum
            .beta2
            .iter()
            .zip(&spectrum.finite)
            .filter(|(&b, &f)| f && b < s as f64)
            .count(),
    }
}

/// Optimal linear-readout capacity of a target function and the optimal
/// weights `w = (G + V/S)^{-1} E_u[x f]`.
///
/// `f_values` and the feature rows are aligned with the feature matrix's
/// ensemble; expectations are its weighted sums.
pub fn function_capacity(
    f_values: &[f64],
    features: &FeatureMatrix,
    moments: &MomentEstimates,
    shots: Shots,
) -> Result<(f64, DVector<f64>)> {
    let n = features.n_inputs();
    let k = features.n_features();
    if f_values.len() != n {
        return Err(Error::Structure(format!(
            "target has {} values for {} inputs",
            f_values.len(),
            n
        )));
    }
    let weights = features.ensemble.weights();
    let norm: f64 = f_values.iter().zip(weights).map(|(&f, &w)| w * f * f).sum();
    if norm <= 0.0 {
        return Err(Error::Domain("target function has zero norm under the ensemble".into()));
    }
    let mut b = DVector::zeros(k);
    for (idx, (&f, &w)) in f_values.iter().zip(weights).enumerate() {
        let row = features.data.row(idx);
        for a in 0..k {
            b[a] += w * f * row[a];
        }
    }
    let m = match shots {
        Shots::Infinite => moments.g.clone(),
        Shots::Finite(s) => &moments.g + &moments.v / s as f64,
    };
    let w_opt = sym_pinv_times(&m, &DMatrix::from_column_slice(k, 1, b.as_slice()));
    let w_opt = DVector::from_column_slice(w_opt.as_slice());
    let capacity = (b.dot(&w_opt) / norm).clamp(0.0, 1.0);
    Ok((capacity, w_opt))
}

/// Tabulate eigentasks over the ensemble: `y = X R` from exact features and
/// `ybar = Xbar R` from measured ones.
pub fn eigentasks(
    table: &ProbabilityTable,
    features: &FeatureMatrix,
    spectrum: &NsrSpectrum,
) -> Result<EigentaskTable> {
    let k = spectrum.k();
    if table.values.ncols() != k || features.n_features() != k {
        return Err(Error::Structure(format!(
            "inconsistent feature counts: table {}, features {}, spectrum {k}",
            table.values.ncols(),
            features.n_features()
        )));
    }
    if table.values.nrows() != features.n_inputs() {
        return Err(Error::Structure(format!(
            "table has {} rows, features {}",
            table.values.nrows(),
            features.n_inputs()
        )));
    }
    Ok(EigentaskTable {
        y: &table.values * &spectrum.r,
        y_bar: &features.data * &spectrum.r,
        shots: features.shots,
    })
}

/// Noisy eigentasks from measured features alone: `ybar = Xbar R`. The `y`
/// field aliases `ybar`; it is exact only when the features are (`S = inf`).
pub fn noisy_eigentasks(features: &FeatureMatrix, spectrum: &NsrSpectrum) -> Result<EigentaskTable> {
    if features.n_features() != spectrum.k() {
        return Err(Error::Structure(format!(
            "features have K = {}, spectrum K = {}",
            features.n_features(),
            spectrum.k()
        )));
    }
    let y_bar = &features.data * &spectrum.r;
    Ok(EigentaskTable {
        y: y_bar.clone(),
        y_bar,
        shots: features.shots,
    })
}

/// Gram-free spectral route: the SVD of `A = D~^{-1/2} F~^T W^{1/2}` (with
/// `W` the diagonal ensemble-weight matrix) has singular values whose squares
/// are the raw eigenvalues `alpha~`, without ever forming the Gram matrix.
/// Zero-mean feature columns are dropped and flagged.
pub fn gram_free_svd(features: &FeatureMatrix) -> Result<NsrSpectrum> {
    let k = features.n_features();
    let n = features.n_inputs();
    let (_, d_tilde) = weighted_gram(features);
    let (live, dropped) = live_columns(&d_tilde);
    let kk = live.len();
    let mut entries = Vec::with_capacity(k);
    if kk > 0 {
        let weights = features.ensemble.weights();
        let a = DMatrix::from_fn(kk, n, |row, col| {
            features.data[(col, live[row])] * weights[col].sqrt() / d_tilde[live[row]].sqrt()
        });
        let svd = a.svd(true, false);
        let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
        let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let rank_tol = (kk as f64 * f64::EPSILON * max_sv * max_sv).sqrt();
        for i in 0..svd.singular_values.len() {
            let sv = svd.singular_values[i];
            let alpha = (sv * sv).min(1.0);
            let mut vec = DVector::zeros(k);
            if sv > rank_tol {
                let scale = 1.0 / sv;
                for (row, &col) in live.iter().enumerate() {
                    vec[col] = u[(row, i)] / d_tilde[col].sqrt() * scale;
                }
                entries.push(EigenEntry {
                    beta2: (1.0 / alpha - 1.0).max(0.0),
                    vec,
                    finite: true,
                });
            } else {
                let mut norm = 0.0;
                for (row, &col) in live.iter().enumerate() {
                    vec[col] = u[(row, i)] / d_tilde[col].sqrt();
                    norm += vec[col] * vec[col];
                }
                vec /= norm.sqrt();
                entries.push(EigenEntry {
                    beta2: f64::INFINITY,
                    vec,
                    finite: false,
                });
            }
        }
        // An N < K feature matrix yields fewer singular triplets than live
        // columns; the remainder is outside the data span.
        for _ in svd.singular_values.len()..kk {
            entries.push(EigenEntry {
                beta2: f64::INFINITY,
                vec: DVector::zeros(k),
                finite: false,
            });
        }
    }
    for &col in &dropped {
        let mut vec = DVector::zeros(k);
        vec[col] = 1.0;
        entries.push(EigenEntry {
            beta2: f64::INFINITY,
            vec,
            finite: false,
        });
    }
    Ok(finalize(entries, k, dropped, NoiseModel::Multinomial))
}
