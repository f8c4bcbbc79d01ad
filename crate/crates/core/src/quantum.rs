//! Exact simulation of the qubit feature generators.
//!
//! Both encodings map a scalar input `u` to a `2^L`-outcome probability
//! vector over computational-basis measurement results:
//!
//! * circuit ansatz: `tau` repetitions of the block
//!   `Rx(theta_x/2) W(J) Rz(theta_z + theta_i u) Rx(theta_x/2)` applied to
//!   `|0...0>`, with `W(J)` a ZZ phase on each coupled pair;
//! * Hamiltonian ansatz: evolution `exp(-i H(u) t)` with
//!   `H(u) = H_0 + u H_1`, `H_0` an Ising model with transverse and
//!   longitudinal fields and `H_1` a longitudinal input drive.
//!
//! Qubit `l` owns bit `L-1-l` of the outcome index, so outcome `k` spells the
//! bitstring of `k` with qubit 0 leftmost.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::InputEnsemble;
use crate::error::{Error, Result};
use crate::map::ProbabilityTable;
use crate::rng::{stream, Domain};

/// Largest qubit count accepted by the dense simulators.
pub const MAX_QUBITS: usize = 12;

/// Nearest-neighbour ring `0-1-...-(L-1)-0`.
pub fn ring_graph(l: usize) -> Vec<(usize, usize)> {
    match l {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..l).map(|i| (i, (i + 1) % l)).collect(),
    }
}

/// Open chain `0-1-...-(L-1)`.
pub fn chain_graph(l: usize) -> Vec<(usize, usize)> {
    (1..l).map(|i| (i - 1, i)).collect()
}

fn check_graph(l: usize, graph: &[(usize, usize)]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for &(a, b) in graph {
        if a >= l || b >= l {
            return Err(Error::Config(format!("edge ({a},{b}) references qubit >= L = {l}")));
        }
        if a == b {
            return Err(Error::Config(format!("self-loop on qubit {a}")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::Config(format!("duplicate edge ({a},{b})")));
        }
    }
    Ok(())
}

fn check_qubits(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::Config("qubit count must be at least 1".into()));
    }
    if l > MAX_QUBITS {
        return Err(Error::Capability(format!(
            "dense simulation supports up to {MAX_QUBITS} qubits, got {l}"
        )));
    }
    Ok(())
}

/// Parameterized-circuit encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitEncoding {
    pub l: usize,
    pub tau: usize,
    pub theta_x: Vec<f64>,
    pub theta_z: Vec<f64>,
    pub theta_i: Vec<f64>,
    pub j: f64,
    pub graph: Vec<(usize, usize)>,
}

impl CircuitEncoding {
    pub fn new(
        l: usize,
        tau: usize,
        theta_x: Vec<f64>,
        theta_z: Vec<f64>,
        theta_i: Vec<f64>,
        j: f64,
        graph: Vec<(usize, usize)>,
    ) -> Result<Self> {
        check_qubits(l)?;
        if tau == 0 {
            return Err(Error::Config("block repetitions tau must be at least 1".into()));
        }
        for (name, v) in [("theta_x", &theta_x), ("theta_z", &theta_z), ("theta_i", &theta_i)] {
            if v.len() != l {
                return Err(Error::Config(format!("{name} has {} entries, expected L = {l}", v.len())));
            }
        }
        check_graph(l, &graph)?;
        Ok(Self { l, tau, theta_x, theta_z, theta_i, j, graph })
    }

    pub fn n_outcomes(&self) -> usize {
        1 << self.l
    }
}

/// Continuous-Hamiltonian encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianEncoding {
    pub l: usize,
    /// Coupled pairs with ZZ strengths, one `J` per edge.
    pub edges: Vec<(usize, usize)>,
    pub couplings: Vec<f64>,
    pub h_x: Vec<f64>,
    pub h_z: Vec<f64>,
    pub h_i: Vec<f64>,
    pub t: f64,
}

impl HamiltonianEncoding {
    pub fn new(
        l: usize,
        edges: Vec<(usize, usize)>,
        couplings: Vec<f64>,
        h_x: Vec<f64>,
        h_z: Vec<f64>,
        h_i: Vec<f64>,
        t: f64,
    ) -> Result<Self> {
        check_qubits(l)?;
        if couplings.len() != edges.len() {
            return Err(Error::Config(format!(
                "{} couplings for {} edges",
                couplings.len(),
                edges.len()
            )));
        }
        for (name, v) in [("h_x", &h_x), ("h_z", &h_z), ("h_i", &h_i)] {
            if v.len() != l {
                return Err(Error::Config(format!("{name} has {} entries, expected L = {l}", v.len())));
            }
        }
        if !(t >= 0.0) {
            return Err(Error::Config(format!("evolution time {t} must be >= 0")));
        }
        check_graph(l, &edges)?;
        Ok(Self { l, edges, couplings, h_x, h_z, h_i, t })
    }

    pub fn n_outcomes(&self) -> usize {
        1 << self.l
    }
}

/// Random circuit encoding with `theta_x, theta_z ~ Unif[0, 2pi]` and
/// `theta_i ~ Unif[0, 10pi]`.
pub fn random_circuit_encoding(
    l: usize,
    tau: usize,
    j: f64,
    graph: Vec<(usize, usize)>,
    seed: u64,
) -> Result<CircuitEncoding> {
    let mut rng = stream(seed, Domain::Encoding, 0, 0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let theta_x = (0..l).map(|_| rng.random_range(0.0..two_pi)).collect();
    let theta_z = (0..l).map(|_| rng.random_range(0.0..two_pi)).collect();
    let theta_i = (0..l).map(|_| rng.random_range(0.0..(5.0 * two_pi))).collect();
    CircuitEncoding::new(l, tau, theta_x, theta_z, theta_i, j, graph)
}

/// Gaussian field statistics for [`random_hamiltonian_encoding`]; each field
/// is `mean + rms * N(0, 1)` per qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    pub mean_x: f64,
    pub rms_x: f64,
    pub mean_z: f64,
    pub rms_z: f64,
    pub mean_i: f64,
    pub rms_i: f64,
    /// Uniform ZZ coupling on every edge.
    pub j: f64,
    pub t: f64,
}

pub fn random_hamiltonian_encoding(
    l: usize,
    params: &HamiltonianParams,
    graph: Vec<(usize, usize)>,
    seed: u64,
) -> Result<HamiltonianEncoding> {
    let mut rng = stream(seed, Domain::Encoding, 1, 0);
    let mut field = |mean: f64, rms: f64| -> Vec<f64> {
        (0..l)
            .map(|_| mean + rms * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let h_x = field(params.mean_x, params.rms_x);
    let h_z = field(params.mean_z, params.rms_z);
    let h_i = field(params.mean_i, params.rms_i);
    let couplings = vec![params.j; graph.len()];
    HamiltonianEncoding::new(l, graph, couplings, h_x, h_z, h_i, params.t)
}

/// Dense statevector over `2^L` amplitudes.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub l: usize,
    pub amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(l: usize) -> Self {
        let mut amps = vec![Complex64::ZERO; 1 << l];
        amps[0] = Complex64::ONE;
        Self { l, amps }
    }

    fn bit(&self, qubit: usize) -> usize {
        self.l - 1 - qubit
    }

    /// `Rx(angle) = exp(-i angle X/2)` on one qubit.
    pub fn apply_rx(&mut self, qubit: usize, angle: f64) {
        let c = Complex64::new((angle / 2.0).cos(), 0.0);
        let s = Complex64::new(0.0, -(angle / 2.0).sin());
        let stride = 1 << self.bit(qubit);
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = c * a0 + s * a1;
                self.amps[i + stride] = s * a0 + c * a1;
            }
            base += 2 * stride;
        }
    }

    /// `Rz(angle) = exp(-i angle Z/2)` on one qubit.
    pub fn apply_rz(&mut self, qubit: usize, angle: f64) {
        let phase0 = Complex64::from_polar(1.0, -angle / 2.0);
        let phase1 = Complex64::from_polar(1.0, angle / 2.0);
        let mask = 1usize << self.bit(qubit);
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            *amp *= if idx & mask == 0 { phase0 } else { phase1 };
        }
    }

    /// `exp(-i (j/2) Z_a Z_b)` on a coupled pair.
    pub fn apply_zz(&mut self, a: usize, b: usize, j: f64) {
        let plus = Complex64::from_polar(1.0, -j / 2.0);
        let minus = Complex64::from_polar(1.0, j / 2.0);
        let mask_a = 1usize << self.bit(a);
        let mask_b = 1usize << self.bit(b);
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            let aligned = ((idx & mask_a == 0) == (idx & mask_b == 0)) as usize;
            *amp *= if aligned == 1 { plus } else { minus };
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Outcome probabilities of the circuit ansatz at input `u`.
pub fn circuit_probabilities(enc: &CircuitEncoding, u: f64) -> Vec<f64> {
    let mut state = StateVector::zero(enc.l);
    for _ in 0..enc.tau {
        for q in 0..enc.l {
            state.apply_rx(q, enc.theta_x[q] / 2.0);
        }
        for q in 0..enc.l {
            state.apply_rz(q, enc.theta_z[q] + enc.theta_i[q] * u);
        }
        for &(a, b) in &enc.graph {
            state.apply_zz(a, b, enc.j);
        }
        for q in 0..enc.l {
            state.apply_rx(q, enc.theta_x[q] / 2.0);
        }
    }
    debug_assert!((state.norm() - 1.0).abs() < 1e-10);
    state.probabilities()
}

/// Dense real-symmetric `H(u) = H_0 + u H_1` in the computational basis.
pub fn hamiltonian_matrix(enc: &HamiltonianEncoding, u: f64) -> DMatrix<f64> {
    let dim = enc.n_outcomes();
    let mut h = DMatrix::zeros(dim, dim);
    let bit = |q: usize| enc.l - 1 - q;
    for idx in 0..dim {
        let mut diag = 0.0;
        for q in 0..enc.l {
            let z = if idx & (1 << bit(q)) == 0 { 1.0 } else { -1.0 };
            diag += (enc.h_z[q] + u * enc.h_i[q]) * z;
        }
        for (e, &(a, b)) in enc.edges.iter().enumerate() {
            let za = if idx & (1 << bit(a)) == 0 { 1.0 } else { -1.0 };
            let zb = if idx & (1 << bit(b)) == 0 { 1.0 } else { -1.0 };
            diag += enc.couplings[e] * za * zb;
        }
        h[(idx, idx)] = diag;
        // sigma^x_q flips one bit.
        for q in 0..enc.l {
            let flipped = idx ^ (1 << bit(q));
            h[(idx, flipped)] += enc.h_x[q];
        }
    }
    h
}

/// Outcome probabilities of the Hamiltonian ansatz at input `u`, via
/// eigendecomposition of the (real symmetric) `H(u)`.
pub fn hamiltonian_probabilities(enc: &HamiltonianEncoding, u: f64) -> Vec<f64> {
    let h = hamiltonian_matrix(enc, u);
    let eig = SymmetricEigen::new(h);
    let dim = enc.n_outcomes();
    // psi_k = sum_j V_kj exp(-i lambda_j t) V_0j
    let mut probs = vec![0.0; dim];
    for k in 0..dim {
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..dim {
            let w = eig.eigenvectors[(k, j)] * eig.eigenvectors[(0, j)];
            let phase = -eig.eigenvalues[j] * enc.t;
            re += w * phase.cos();
            im += w * phase.sin();
        }
        probs[k] = re * re + im * im;
    }
    probs
}

/// A Haar-random `K x K` unitary: QR of a complex Gaussian matrix with the
/// `R` diagonal phases folded back into `Q`.
pub fn haar_unitary(k: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(k, k, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ) / std::f64::consts::SQRT_2
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for col in 0..k {
        let d = r[(col, col)];
        let phase = if d.norm() == 0.0 { Complex64::ONE } else { d / d.norm() };
        for row in 0..k {
            q[(row, col)] *= phase;
        }
    }
    q
}

/// Outcome probabilities of the input-indexed Haar draw: squared moduli of
/// the first column of an independent Haar unitary per ensemble input.
pub fn haar_two_design_probabilities(k: usize, seed: u64, input_index: usize) -> Vec<f64> {
    let mut rng = stream(seed, Domain::Haar, input_index as u64, 0);
    let u = haar_unitary(k, &mut rng);
    (0..k).map(|row| u[(row, 0)].norm_sqr()).collect()
}

/// Shannon entropy in bits; zero entries contribute zero.
pub fn shannon_entropy_bits(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}

/// Total correlation (in bits) of one `2^L`-outcome distribution: the sum of
/// single-qubit marginal entropies minus the joint entropy.
pub fn total_correlation_bits(x: &[f64], l: usize) -> Result<f64> {
    if x.len() != 1 << l {
        return Err(Error::Domain(format!(
            "distribution has {} entries, expected 2^{l}",
            x.len()
        )));
    }
    let joint = shannon_entropy_bits(x);
    let mut marginal_sum = 0.0;
    for q in 0..l {
        let mask = 1usize << (l - 1 - q);
        let p1: f64 = x
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx & mask != 0)
            .map(|(_, &p)| p.max(0.0))
            .sum();
        marginal_sum += shannon_entropy_bits(&[p1, (1.0 - p1).max(0.0)]);
    }
    Ok(marginal_sum - joint)
}

/// Expected total correlation over an input ensemble: the ensemble-weighted
/// mean of [`total_correlation_bits`] of the measured outcome distribution.
/// The post-measurement state is diagonal, so the von Neumann entropies
/// reduce to Shannon entropies of the distribution and its marginals.
pub fn expected_total_correlation(table: &ProbabilityTable, ensemble: &InputEnsemble) -> Result<f64> {
    let k = table.values.ncols();
    if !k.is_power_of_two() {
        return Err(Error::Domain(format!("K = {k} is not a power of two")));
    }
    if table.values.nrows() != ensemble.len() {
        return Err(Error::Structure(format!(
            "table has {} rows for {} ensemble inputs",
            table.values.nrows(),
            ensemble.len()
        )));
    }
    let l = k.trailing_zeros() as usize;
    let mut etc = 0.0;
    for (n, &w) in ensemble.weights().iter().enumerate() {
        let row: Vec<f64> = table.values.row(n).iter().copied().collect();
        etc += w * total_correlation_bits(&row, l)?;
    }
    Ok(etc)
}
