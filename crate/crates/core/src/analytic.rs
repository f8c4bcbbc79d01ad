//! Closed-form results and independent brute-force reference paths.
//!
//! Everything here is deliberately written on a different code path from the
//! production modules so tests never validate an implementation against
//! itself: the circuit oracle multiplies out full `2^L x 2^L` gate matrices,
//! the Hamiltonian oracle uses a scaling-and-squaring Taylor exponential, and
//! the grid oracle integrates moments by trapezoid quadrature.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::ensemble::InputEnsemble;
use crate::error::{Error, Result};
use crate::map::{tabulate, Generator, NoiseModel};
use crate::quantum::{CircuitEncoding, HamiltonianEncoding};
use crate::sampling::Shots;
use crate::spectral::{exact_moments, MomentEstimates, NsrSpectrum};

/// Exact 2-design moments: `G_kk = 2/(K(K+1))`, `G_jk = 1/(K(K+1))` off the
/// diagonal, `D = I/K`, `V = D - G`.
pub fn two_design_moments(k: usize) -> Result<MomentEstimates> {
    if k < 2 {
        return Err(Error::Domain(format!("2-design needs K >= 2, got {k}")));
    }
    let denom = (k * (k + 1)) as f64;
    let g = DMatrix::from_fn(k, k, |a, b| if a == b { 2.0 / denom } else { 1.0 / denom });
    let d = DVector::from_element(k, 1.0 / k as f64);
    let v = DMatrix::from_diagonal(&d) - &g;
    Ok(MomentEstimates {
        g,
        d,
        v,
        n_inputs: 0,
        shots: Shots::Infinite,
        model: NoiseModel::Multinomial,
        debiased: true,
        warnings: vec![],
    })
}

/// Exact 2-design NSR spectrum `beta^2 = (0, K, ..., K)` with explicit
/// G-orthonormal eigenvectors: the constant combination first, then a
/// deterministic basis of the complement of the all-ones direction.
pub fn two_design_spectrum(k: usize) -> Result<NsrSpectrum> {
    if k < 2 {
        return Err(Error::Domain(format!("2-design needs K >= 2, got {k}")));
    }
    let kf = k as f64;
    let mut beta2 = vec![kf; k];
    beta2[0] = 0.0;
    let finite = vec![true; k];
    let alpha: Vec<f64> = beta2.iter().map(|b| 1.0 / (1.0 + b)).collect();
    // r^(0) = (1, ..., 1): r^T G r = 1 exactly. For the degenerate rest use
    // the Helmert basis of the all-ones complement, scaled so r^T G r = 1
    // (G v = v / (K(K+1)) on that subspace).
    let mut r = DMatrix::zeros(k, k);
    for i in 0..k {
        r[(i, 0)] = 1.0;
    }
    let scale = (kf * (kf + 1.0)).sqrt();
    for j in 1..k {
        // Helmert row j: (1, ..., 1, -j, 0, ..., 0) / sqrt(j (j+1)).
        let norm = (j as f64 * (j as f64 + 1.0)).sqrt();
        for i in 0..j {
            r[(i, j)] = scale / norm;
        }
        r[(j, j)] = -scale * j as f64 / norm;
    }
    Ok(NsrSpectrum {
        beta2,
        finite,
        alpha,
        r,
        effective_rank: k,
        dropped: vec![],
        model: NoiseModel::Multinomial,
    })
}

/// Closed-form 2-design capacity `C_T = K (S+1)/(S+K)`.
pub fn two_design_rec(k: usize, shots: Shots) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!("2-design needs K >= 2, got {k}")));
    }
    Ok(match shots {
        Shots::Infinite => k as f64,
        Shots::Finite(s) => {
            let (kf, sf) = (k as f64, s as f64);
            kf * (sf + 1.0) / (sf + kf)
        }
    })
}

/// Dense-quadrature reference moments: tabulate the generator on an
/// equispaced trapezoid grid of `grid_n` points and integrate exactly.
pub fn grid_moments_oracle(generator: &Generator, grid_n: usize) -> Result<MomentEstimates> {
    let ensemble = InputEnsemble::equispaced_grid(grid_n)?;
    let table = tabulate(generator, &ensemble)?;
    exact_moments(&table, &ensemble)
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

fn single_qubit_layer(l: usize, gates: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let mut out = gates[0].clone();
    for gate in &gates[1..l] {
        out = kron(&out, gate);
    }
    out
}

fn rx_gate(angle: f64) -> DMatrix<Complex64> {
    let c = Complex64::new((angle / 2.0).cos(), 0.0);
    let s = Complex64::new(0.0, -(angle / 2.0).sin());
    DMatrix::from_row_slice(2, 2, &[c, s, s, c])
}

fn rz_gate(angle: f64) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![
        Complex64::from_polar(1.0, -angle / 2.0),
        Complex64::from_polar(1.0, angle / 2.0),
    ]))
}

const ORACLE_MAX_QUBITS: usize = 6;

/// Full unitary of the circuit ansatz by explicit dense matrix products.
pub fn dense_circuit_unitary(enc: &CircuitEncoding, u: f64) -> Result<DMatrix<Complex64>> {
    if enc.l > ORACLE_MAX_QUBITS {
        return Err(Error::Capability(format!(
            "dense oracle supports up to {ORACLE_MAX_QUBITS} qubits, got {}",
            enc.l
        )));
    }
    let dim = enc.n_outcomes();
    let rx_layer = single_qubit_layer(
        enc.l,
        &enc.theta_x.iter().map(|&t| rx_gate(t / 2.0)).collect::<Vec<_>>(),
    );
    let rz_layer = single_qubit_layer(
        enc.l,
        &enc
            .theta_z
            .iter()
            .zip(&enc.theta_i)
            .map(|(&tz, &ti)| rz_gate(tz + ti * u))
            .collect::<Vec<_>>(),
    );
    let mut w = DMatrix::from_diagonal(&DVector::from_element(dim, Complex64::ONE));
    for &(a, b) in &enc.graph {
        let mask_a = 1usize << (enc.l - 1 - a);
        let mask_b = 1usize << (enc.l - 1 - b);
        for idx in 0..dim {
            let aligned = (idx & mask_a == 0) == (idx & mask_b == 0);
            let phase = if aligned { -enc.j / 2.0 } else { enc.j / 2.0 };
            w[(idx, idx)] *= Complex64::from_polar(1.0, phase);
        }
    }
    let block = &rx_layer * &w * &rz_layer * &rx_layer;
    let mut unitary = DMatrix::from_diagonal(&DVector::from_element(dim, Complex64::ONE));
    for _ in 0..enc.tau {
        unitary = &block * unitary;
    }
    Ok(unitary)
}

/// Matrix exponential `exp(-i H t)` by scaling-and-squaring with a Taylor
/// series; independent of the eigendecomposition route.
fn expm_minus_i_ht(h: &DMatrix<f64>, t: f64) -> DMatrix<Complex64> {
    let dim = h.nrows();
    let a = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(0.0, -h[(i, j)] * t));
    let norm = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max) * dim as f64;
    let scalings = norm.log2().ceil().max(0.0) as u32 + 1;
    let scaled = &a / Complex64::new(2f64.powi(scalings as i32), 0.0);
    let identity = DMatrix::from_diagonal(&DVector::from_element(dim, Complex64::ONE));
    let mut result = identity.clone();
    let mut term = identity;
    for order in 1..=16 {
        term = &term * &scaled / Complex64::new(order as f64, 0.0);
        result += &term;
    }
    for _ in 0..scalings {
        result = &result * &result;
    }
    result
}

/// Full unitary of the Hamiltonian ansatz by Taylor matrix exponential.
pub fn dense_hamiltonian_unitary(enc: &HamiltonianEncoding, u: f64) -> Result<DMatrix<Complex64>> {
    if enc.l > ORACLE_MAX_QUBITS {
        return Err(Error::Capability(format!(
            "dense oracle supports up to {ORACLE_MAX_QUBITS} qubits, got {}",
            enc.l
        )));
    }
    Ok(expm_minus_i_ht(&crate::quantum::hamiltonian_matrix(enc, u), enc.t))
}

/// Outcome probabilities from a dense oracle unitary: squared moduli of its
/// first column.
pub fn oracle_probabilities(unitary: &DMatrix<Complex64>) -> Vec<f64> {
    (0..unitary.nrows()).map(|k| unitary[(k, 0)].norm_sqr()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{
        circuit_probabilities, hamiltonian_probabilities, random_circuit_encoding, ring_graph,
    };
    use crate::spectral::rec;
    use approx::assert_relative_eq;

    #[test]
    fn two_design_spectrum_values() {
        let spec = two_design_spectrum(2).unwrap();
        assert_eq!(spec.beta2, vec![0.0, 2.0]);
        let spec = two_design_spectrum(64).unwrap();
        assert_eq!(spec.beta2[0], 0.0);
        assert!(spec.beta2[1..].iter().all(|&b| b == 64.0));
        assert_eq!(spec.beta2.len(), 64);
    }

    #[test]
    fn two_design_eigenvectors_are_g_orthonormal() {
        let k = 5;
        let spec = two_design_spectrum(k).unwrap();
        let m = two_design_moments(k).unwrap();
        for i in 0..k {
            for j in 0..k {
                let dot = (spec.r.column(i).transpose() * &m.g * spec.r.column(j))[(0, 0)];
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(dot, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_rec_values() {
        assert_relative_eq!(two_design_rec(4, Shots::Finite(4)).unwrap(), 2.5);
        assert_relative_eq!(two_design_rec(64, Shots::Infinite).unwrap(), 64.0);
        // S = 1, large K: C_T -> 2K/(K+1) -> 2.
        assert_relative_eq!(
            two_design_rec(4096, Shots::Finite(1)).unwrap(),
            2.0 * 4096.0 / 4097.0,
            epsilon = 1e-12
        );
        // rec at S = 1 equals K * 2/(K+1).
        assert_relative_eq!(
            two_design_rec(8, Shots::Finite(1)).unwrap(),
            8.0 * 2.0 / 9.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn closed_form_matches_eigen_route() {
        for k in [2usize, 4, 16, 64] {
            let spec = two_design_spectrum(k).unwrap();
            for s in [1u64, 3, 10, 1000] {
                assert_relative_eq!(
                    rec(&spec, Shots::Finite(s)),
                    two_design_rec(k, Shots::Finite(s)).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn trace_route_on_two_design_moments() {
        // Tr((G + V/S)^{-1} G) at K = 4, S = 10 is 4 * 11/14.
        let moments = two_design_moments(4).unwrap();
        assert_relative_eq!(
            crate::spectral::rec_trace(&moments, Shots::Finite(10)),
            44.0 / 14.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            crate::spectral::rec_trace(&moments, Shots::Infinite),
            4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn grid_oracle_constant_map() {
        // A diagonal circuit yields the constant map x = (1, 0): G = x x^T.
        let enc = CircuitEncoding::new(1, 1, vec![0.0], vec![0.4], vec![1.0], 0.0, vec![]).unwrap();
        let m = grid_moments_oracle(&Generator::Circuit(enc), 1000).unwrap();
        assert_relative_eq!(m.g[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.g[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_oracle_second_order_convergence() {
        let enc = random_circuit_encoding(2, 2, 0.7, ring_graph(2), 19).unwrap();
        let gen = Generator::Circuit(enc);
        let coarse = grid_moments_oracle(&gen, 1000).unwrap();
        let fine = grid_moments_oracle(&gen, 2000).unwrap();
        let finest = grid_moments_oracle(&gen, 4000).unwrap();
        let err_coarse = (&coarse.g - &finest.g).abs().max();
        let err_fine = (&fine.g - &finest.g).abs().max();
        // Trapezoid error scales like 1/n^2.
        assert!(err_fine < err_coarse / 2.0, "{err_coarse} vs {err_fine}");
        assert!(err_coarse < 1e-4);
    }

    #[test]
    fn identity_encodings_give_identity_unitaries() {
        let enc = CircuitEncoding::new(
            2,
            1,
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            0.0,
            vec![(0, 1)],
        )
        .unwrap();
        let u = dense_circuit_unitary(&enc, 0.5).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((u[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }

        let henc =
            HamiltonianEncoding::new(2, vec![(0, 1)], vec![1.0], vec![1.0; 2], vec![0.5; 2], vec![0.3; 2], 0.0)
                .unwrap();
        let uh = dense_hamiltonian_unitary(&henc, 0.2).unwrap();
        for i in 0..4 {
            assert!((uh[(i, i)] - Complex64::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn oracle_unitaries_are_unitary() {
        let enc = random_circuit_encoding(3, 2, 1.3, ring_graph(3), 29).unwrap();
        let u = dense_circuit_unitary(&enc, -0.4).unwrap();
        let id = &u * u.adjoint();
        for i in 0..8 {
            for j in 0..8 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)].norm() - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn statevector_matches_circuit_oracle() {
        let enc = random_circuit_encoding(3, 3, 0.9, ring_graph(3), 37).unwrap();
        for u in [-0.8, 0.0, 0.63] {
            let fast = circuit_probabilities(&enc, u);
            let oracle = oracle_probabilities(&dense_circuit_unitary(&enc, u).unwrap());
            for (a, b) in fast.iter().zip(&oracle) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn two_x_flips_match_oracle() {
        let pi = std::f64::consts::PI;
        let enc = CircuitEncoding::new(
            2,
            1,
            vec![pi, pi],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            0.0,
            vec![],
        )
        .unwrap();
        let oracle = oracle_probabilities(&dense_circuit_unitary(&enc, 0.0).unwrap());
        assert_relative_eq!(oracle[3], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rabi_case_matches_expm_oracle() {
        // L = 1 transverse drive: P(1) = sin^2(hx t).
        let t = 0.37;
        let hx = 1.9;
        let enc = HamiltonianEncoding::new(1, vec![], vec![], vec![hx], vec![0.0], vec![0.0], t).unwrap();
        let oracle = oracle_probabilities(&dense_hamiltonian_unitary(&enc, 0.1).unwrap());
        assert_relative_eq!(oracle[1], (hx * t).sin().powi(2), epsilon = 1e-10);
        let fast = hamiltonian_probabilities(&enc, 0.1);
        assert_relative_eq!(fast[1], oracle[1], epsilon = 1e-10);
    }

    #[test]
    fn eigendecomposition_matches_expm_oracle() {
        let params = crate::quantum::HamiltonianParams {
            mean_x: 0.0,
            rms_x: 20.0,
            mean_z: 0.0,
            rms_z: 5.0,
            mean_i: 0.0,
            rms_i: 5.0,
            j: 4.0,
            t: 5.0,
        };
        let enc = crate::quantum::random_hamiltonian_encoding(3, &params, ring_graph(3), 43).unwrap();
        for u in [-0.77, 0.31] {
            let fast = hamiltonian_probabilities(&enc, u);
            let oracle = oracle_probabilities(&dense_hamiltonian_unitary(&enc, u).unwrap());
            for (a, b) in fast.iter().zip(&oracle) {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn oracle_rejects_large_systems() {
        let enc = random_circuit_encoding(7, 1, 0.0, ring_graph(7), 1).unwrap();
        assert!(matches!(
            dense_circuit_unitary(&enc, 0.0),
            Err(Error::Capability(_))
        ));
    }
}
