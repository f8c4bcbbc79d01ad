//! Classical optical pipeline: SLM phase/amplitude encoding, lens propagation
//! to the focal plane, and expected photodetector powers.
//!
//! The SLM plane is discretized on an `M x M` grid with coordinates
//! `q ∈ [-pi, pi)` per axis. The lens maps the SLM field to its focal plane
//! by a centered 2-D Fourier transform; `P x P` detectors sample the focal
//! grid at every `M/P`-th point (the central detector sits at zero
//! frequency). All dimensionful prefactors are lumped into `brightness`
//! (mean photocounts per unit intensity) and `fourier_scale` (focal-plane
//! coordinate per frequency index, metadata only).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticalEncoding {
    /// SLM grid size `M` (per axis).
    pub m: usize,
    /// Detector grid size `P` (per axis); `K = P^2` features.
    pub p: usize,
    /// Input-encoding amplitudes.
    pub a1: f64,
    pub a2: f64,
    /// Input-encoding scale.
    pub b: f64,
    /// Focal-plane coordinate per frequency index.
    pub fourier_scale: f64,
    /// Mean photocounts per unit field intensity.
    pub brightness: f64,
}

impl Default for OpticalEncoding {
    fn default() -> Self {
        Self {
            m: 64,
            p: 8,
            a1: 1.0,
            a2: 1.0,
            b: 3.75,
            fourier_scale: 1.0,
            // Chosen so the default encoding yields O(1-10) mean counts per
            // detector, the visibly noisy single-shot regime.
            brightness: 1.0,
        }
    }
}

impl OpticalEncoding {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.p == 0 {
            return Err(Error::Config("grid sizes must be positive".into()));
        }
        if self.p > self.m {
            return Err(Error::Config(format!(
                "detector grid P = {} exceeds field grid M = {}",
                self.p, self.m
            )));
        }
        if self.m % self.p != 0 {
            return Err(Error::Config(format!(
                "detector spacing requires P | M, got M = {}, P = {}",
                self.m, self.p
            )));
        }
        if !(self.brightness > 0.0) {
            return Err(Error::Config(format!("brightness {} must be > 0", self.brightness)));
        }
        if !(self.b >= 0.0) {
            return Err(Error::Config(format!("encoding scale B = {} must be >= 0", self.b)));
        }
        Ok(())
    }

    pub fn n_detectors(&self) -> usize {
        self.p * self.p
    }

    /// SLM coordinate of grid index `i`: `-pi + 2 pi i / M`.
    pub fn grid_coord(&self, i: usize) -> f64 {
        -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / self.m as f64
    }

    /// Focal-grid index pair of detector `k` (row-major over the `P x P`
    /// detector grid).
    pub fn detector_index(&self, k: usize) -> (usize, usize) {
        let spacing = self.m / self.p;
        ((k / self.p) * spacing, (k % self.p) * spacing)
    }

    /// Focal-plane coordinates of detector `k` in `fourier_scale` units of
    /// the centered frequency index.
    pub fn detector_coord(&self, k: usize) -> (f64, f64) {
        let (a, b) = self.detector_index(k);
        let half = (self.m / 2) as f64;
        (
            self.fourier_scale * (a as f64 - half),
            self.fourier_scale * (b as f64 - half),
        )
    }
}

/// Field on the SLM plane after input encoding:
/// `E0 = cos(phi1/2) exp{i (phi1 + 2 phi2)/2}` with
/// `phi1 = B (cos u [A1 cos q1 + A2 sin q2] + sin u [A1 sin q1 + A2 cos q2])`
/// and `phi2 = B u (A1 q1 + A2 q2)`. The overall amplitude is folded into
/// `brightness`.
pub fn slm_field(enc: &OpticalEncoding, u: f64) -> Result<DMatrix<Complex64>> {
    enc.validate()?;
    if u.abs() > 1.0 {
        return Err(Error::Domain(format!("input u = {u} outside [-1, 1]")));
    }
    let (cu, su) = (u.cos(), u.sin());
    Ok(DMatrix::from_fn(enc.m, enc.m, |i, j| {
        let q1 = enc.grid_coord(i);
        let q2 = enc.grid_coord(j);
        let phi1 = enc.b
            * (cu * (enc.a1 * q1.cos() + enc.a2 * q2.sin())
                + su * (enc.a1 * q1.sin() + enc.a2 * q2.cos()));
        let phi2 = enc.b * u * (enc.a1 * q1 + enc.a2 * q2);
        Complex64::from_polar((phi1 / 2.0).cos(), (phi1 + 2.0 * phi2) / 2.0)
    }))
}

/// Centered unitary DFT kernel: `W[a, m] = exp(i 2 pi a' m' / M) / sqrt(M)`
/// with `a' = a - M/2`.
fn dft_kernel(m: usize) -> DMatrix<Complex64> {
    let half = (m / 2) as i64;
    let norm = 1.0 / (m as f64).sqrt();
    DMatrix::from_fn(m, m, |a, b| {
        let ap = a as i64 - half;
        let bp = b as i64 - half;
        let phase = 2.0 * std::f64::consts::PI * (ap * bp) as f64 / m as f64;
        Complex64::from_polar(norm, phase)
    })
}

/// Propagate an SLM field to the lens focal plane: a centered 2-D Fourier
/// transform with unitary normalization, so total power is preserved
/// (Parseval) and zero frequency lands at the grid center.
pub fn lens_propagate(field: &DMatrix<Complex64>, enc: &OpticalEncoding) -> Result<DMatrix<Complex64>> {
    enc.validate()?;
    if field.nrows() != field.ncols() || field.nrows() != enc.m {
        return Err(Error::Structure(format!(
            "field is {}x{}, expected {}x{}",
            field.nrows(),
            field.ncols(),
            enc.m,
            enc.m
        )));
    }
    let w = dft_kernel(enc.m);
    // Separable transform over both axes; W is symmetric.
    Ok(&w * field * &w)
}

/// Expected photocounts at each detector: `x_k = brightness |E(d_k)|^2`.
pub fn detector_means(field: &DMatrix<Complex64>, enc: &OpticalEncoding) -> Result<Vec<f64>> {
    enc.validate()?;
    if field.nrows() != enc.m || field.ncols() != enc.m {
        return Err(Error::Structure(format!(
            "focal field is {}x{}, expected {}x{}",
            field.nrows(),
            field.ncols(),
            enc.m,
            enc.m
        )));
    }
    Ok((0..enc.n_detectors())
        .map(|k| {
            let (a, b) = enc.detector_index(k);
            enc.brightness * field[(a, b)].norm_sqr()
        })
        .collect())
}

/// End-to-end expected detector counts for input `u`. These feed the Poisson
/// sampler.
pub fn optical_means(enc: &OpticalEncoding, u: f64) -> Result<Vec<f64>> {
    let field = slm_field(enc, u)?;
    let focal = lens_propagate(&field, enc)?;
    detector_means(&focal, enc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> OpticalEncoding {
        OpticalEncoding {
            m: 16,
            p: 4,
            ..Default::default()
        }
    }

    #[test]
    fn zero_encoding_gives_uniform_field() {
        let enc = OpticalEncoding { b: 0.0, ..small() };
        let field = slm_field(&enc, 0.7).unwrap();
        for v in field.iter() {
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn field_magnitude_bounded_by_one() {
        let enc = small();
        for u in [-1.0, -0.4, 0.0, 0.9] {
            let field = slm_field(&enc, u).unwrap();
            assert!(field.iter().all(|v| v.norm() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn origin_magnitude_matches_encoding() {
        // At q = (0, 0), u = 0: phi1 = B*A1, so |E0| = |cos(B*A1/2)|.
        let enc = small();
        let field = slm_field(&enc, 0.0).unwrap();
        let center = enc.m / 2;
        assert_relative_eq!(
            field[(center, center)].norm(),
            (enc.b * enc.a1 / 2.0).cos().abs(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn uniform_field_focuses_on_central_detector() {
        let enc = OpticalEncoding { b: 0.0, ..small() };
        let field = slm_field(&enc, 0.0).unwrap();
        let focal = lens_propagate(&field, &enc).unwrap();
        let means = detector_means(&focal, &enc).unwrap();
        let center = enc.p / 2 * enc.p + enc.p / 2;
        assert!(means[center] > 1.0);
        for (k, &m) in means.iter().enumerate() {
            if k != center {
                assert!(m.abs() < 1e-18, "detector {k} sees {m}");
            }
        }
    }

    #[test]
    fn propagation_preserves_power() {
        let enc = small();
        let field = slm_field(&enc, 0.33).unwrap();
        let focal = lens_propagate(&field, &enc).unwrap();
        let before: f64 = field.iter().map(|v| v.norm_sqr()).sum();
        let after: f64 = focal.iter().map(|v| v.norm_sqr()).sum();
        assert_relative_eq!(before, after, epsilon = 1e-10);
    }

    #[test]
    fn linear_phase_shifts_the_focus() {
        let enc = OpticalEncoding { b: 0.0, ..small() };
        let shift = 3i64;
        let field = DMatrix::from_fn(enc.m, enc.m, |i, _| {
            let ip = i as i64 - (enc.m / 2) as i64;
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (shift * ip) as f64 / enc.m as f64)
        });
        let focal = lens_propagate(&field, &enc).unwrap();
        let mut best = (0, 0);
        let mut best_val = 0.0;
        for a in 0..enc.m {
            for b in 0..enc.m {
                if focal[(a, b)].norm_sqr() > best_val {
                    best_val = focal[(a, b)].norm_sqr();
                    best = (a, b);
                }
            }
        }
        assert_eq!(best.0 as i64, (enc.m / 2) as i64 + shift);
        assert_eq!(best.1 as i64, (enc.m / 2) as i64);
    }

    #[test]
    fn brightness_scales_means_linearly() {
        let enc = small();
        let bright = OpticalEncoding { brightness: 2.0 * enc.brightness, ..enc.clone() };
        let a = optical_means(&enc, 0.25).unwrap();
        let b = optical_means(&bright, 0.25).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(2.0 * x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn global_phase_leaves_means_unchanged() {
        let enc = small();
        let field = slm_field(&enc, -0.6).unwrap();
        let rotated = field.map(|v| v * Complex64::from_polar(1.0, 1.234));
        let a = detector_means(&lens_propagate(&field, &enc).unwrap(), &enc).unwrap();
        let b = detector_means(&lens_propagate(&rotated, &enc).unwrap(), &enc).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn map_is_continuous_in_u() {
        let enc = small();
        let du = 1e-4;
        let a = optical_means(&enc, 0.2).unwrap();
        let b = optical_means(&enc, 0.2 + du).unwrap();
        let max_delta = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(max_delta < 100.0 * du, "max_delta = {max_delta}");
    }

    #[test]
    fn zero_field_means_zero() {
        let enc = small();
        let field = DMatrix::from_element(enc.m, enc.m, Complex64::ZERO);
        let means = detector_means(&lens_propagate(&field, &enc).unwrap(), &enc).unwrap();
        assert!(means.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn sampled_photocounts_have_mean_equal_variance() {
        // Integrated photocurrents are Poisson: per detector the sample mean
        // and sample variance agree within 4 sigma at S = 10^4.
        let enc = small();
        let means = optical_means(&enc, 0.4).unwrap();
        let s = 10_000u64;
        let record = crate::sampling::sample_poisson_counts(&means, s, 21, 0).unwrap();
        let counts = match &record.data {
            crate::sampling::ShotData::Counts { counts, .. } => counts,
            _ => unreachable!(),
        };
        let k = means.len();
        for det in 0..k {
            if means[det] < 0.05 {
                continue; // too few events for the Gaussian tolerance model
            }
            let xs: Vec<f64> = counts.iter().skip(det).step_by(k).map(|&c| c as f64).collect();
            let mean = xs.iter().sum::<f64>() / s as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (s as f64 - 1.0);
            let lambda = means[det];
            // Var[var - mean] ~ (mu4 - sigma^4 + lambda)/S for Poisson.
            let se = ((lambda * (1.0 + 3.0 * lambda) - lambda * lambda + lambda) / s as f64).sqrt();
            assert!(
                (var - mean).abs() < 4.0 * se,
                "detector {det}: mean {mean}, var {var}, lambda {lambda}"
            );
        }
    }

    #[test]
    fn invalid_grids_are_config_errors() {
        let enc = OpticalEncoding { m: 10, p: 4, ..Default::default() };
        assert!(matches!(enc.validate(), Err(Error::Config(_))));
        let enc = OpticalEncoding { m: 4, p: 8, ..Default::default() };
        assert!(matches!(enc.validate(), Err(Error::Config(_))));
    }
}
