//! JSON run configurations for `simulate` and `classify`.

use eigentask::ensemble::{EnsembleKind, InputEnsemble};
use eigentask::error::Error;
use eigentask::optical::OpticalEncoding;
use eigentask::quantum::{
    chain_graph, random_circuit_encoding, random_hamiltonian_encoding, ring_graph,
    HamiltonianParams,
};
use eigentask::sampling::Shots;
use eigentask::Generator;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotsSpec {
    Count(u64),
    Named(String),
}

impl ShotsSpec {
    pub fn to_shots(&self) -> Result<Shots, String> {
        match self {
            ShotsSpec::Count(0) => Err("shots must be at least 1".into()),
            ShotsSpec::Count(s) => Ok(Shots::Finite(*s)),
            ShotsSpec::Named(name) if name == "infinite" || name == "inf" => Ok(Shots::Infinite),
            ShotsSpec::Named(name) => Err(format!("shots must be a count or \"infinite\", got {name:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kind: EnsembleKind,
    pub n: usize,
}

impl EnsembleConfig {
    pub fn build(&self, seed: u64, issues: &mut Vec<String>) -> Option<InputEnsemble> {
        let result = match self.kind {
            EnsembleKind::IidUniform => InputEnsemble::iid_uniform(seed, self.n),
            EnsembleKind::EquispacedGrid => InputEnsemble::equispaced_grid(self.n),
        };
        match result {
            Ok(e) => Some(e),
            Err(err) => {
                issues.push(format!("ensemble: {err}"));
                None
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Named(String),
    Edges(Vec<(usize, usize)>),
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec::Named("ring".into())
    }
}

impl GraphSpec {
    pub fn build(&self, l: usize) -> Result<Vec<(usize, usize)>, String> {
        match self {
            GraphSpec::Named(name) => match name.as_str() {
                "ring" => Ok(ring_graph(l)),
                "chain" => Ok(chain_graph(l)),
                other => Err(format!("graph must be \"ring\", \"chain\" or an edge list, got {other:?}")),
            },
            GraphSpec::Edges(edges) => Ok(edges.clone()),
        }
    }
}

fn default_tau() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorConfig {
    /// Parameterized circuit; omitted angle vectors are drawn randomly
    /// (theta_x, theta_z ~ U[0, 2pi], theta_i ~ U[0, 10pi]) from the seed.
    Circuit {
        l: usize,
        #[serde(default = "default_tau")]
        tau: usize,
        j: f64,
        #[serde(default)]
        graph: GraphSpec,
        #[serde(default)]
        theta_x: Option<Vec<f64>>,
        #[serde(default)]
        theta_z: Option<Vec<f64>>,
        #[serde(default)]
        theta_i: Option<Vec<f64>>,
    },
    /// Ising Hamiltonian evolution; omitted field vectors are Gaussian draws
    /// with the given mean/rms statistics.
    Hamiltonian {
        l: usize,
        t: f64,
        j: f64,
        #[serde(default)]
        graph: GraphSpec,
        #[serde(default)]
        mean_x: f64,
        #[serde(default = "default_rms_x")]
        rms_x: f64,
        #[serde(default)]
        mean_z: f64,
        #[serde(default = "default_rms_z")]
        rms_z: f64,
        #[serde(default)]
        mean_i: f64,
        #[serde(default = "default_rms_z")]
        rms_i: f64,
        #[serde(default)]
        h_x: Option<Vec<f64>>,
        #[serde(default)]
        h_z: Option<Vec<f64>>,
        #[serde(default)]
        h_i: Option<Vec<f64>>,
    },
    /// Input-indexed Haar 2-design over `k` outcomes.
    Haar { k: usize },
    /// Classical optical pipeline; fields default to the reference setup.
    Optical {
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_p")]
        p: usize,
        #[serde(default = "default_one")]
        a1: f64,
        #[serde(default = "default_one")]
        a2: f64,
        #[serde(default = "default_b")]
        b: f64,
        #[serde(default = "default_one")]
        fourier_scale: f64,
        #[serde(default = "default_one")]
        brightness: f64,
    },
}

fn default_rms_x() -> f64 {
    20.0
}
fn default_rms_z() -> f64 {
    5.0
}
fn default_m() -> usize {
    64
}
fn default_p() -> usize {
    8
}
fn default_one() -> f64 {
    1.0
}
fn default_b() -> f64 {
    3.75
}

impl GeneratorConfig {
    pub fn build(&self, seed: u64, issues: &mut Vec<String>) -> Option<Generator> {
        match self {
            GeneratorConfig::Circuit { l, tau, j, graph, theta_x, theta_z, theta_i } => {
                let edges = match graph.build(*l) {
                    Ok(e) => e,
                    Err(msg) => {
                        issues.push(format!("generator.graph: {msg}"));
                        return None;
                    }
                };
                let mut enc = match random_circuit_encoding(*l, *tau, *j, edges, seed) {
                    Ok(e) => e,
                    Err(err) => {
                        issues.push(format!("generator: {err}"));
                        return None;
                    }
                };
                for (name, src, dst) in [
                    ("theta_x", theta_x, &mut enc.theta_x),
                    ("theta_z", theta_z, &mut enc.theta_z),
                    ("theta_i", theta_i, &mut enc.theta_i),
                ] {
                    if let Some(v) = src {
                        if v.len() != *l {
                            issues.push(format!(
                                "generator.{name}: {} entries, expected L = {l}",
                                v.len()
                            ));
                        } else {
                            *dst = v.clone();
                        }
                    }
                }
                Some(Generator::Circuit(enc))
            }
            GeneratorConfig::Hamiltonian {
                l,
                t,
                j,
                graph,
                mean_x,
                rms_x,
                mean_z,
                rms_z,
                mean_i,
                rms_i,
                h_x,
                h_z,
                h_i,
            } => {
                let edges = match graph.build(*l) {
                    Ok(e) => e,
                    Err(msg) => {
                        issues.push(format!("generator.graph: {msg}"));
                        return None;
                    }
                };
                let params = HamiltonianParams {
                    mean_x: *mean_x,
                    rms_x: *rms_x,
                    mean_z: *mean_z,
                    rms_z: *rms_z,
                    mean_i: *mean_i,
                    rms_i: *rms_i,
                    j: *j,
                    t: *t,
                };
                let mut enc = match random_hamiltonian_encoding(*l, &params, edges, seed) {
                    Ok(e) => e,
                    Err(err) => {
                        issues.push(format!("generator: {err}"));
                        return None;
                    }
                };
                for (name, src, dst) in [
                    ("h_x", h_x, &mut enc.h_x),
                    ("h_z", h_z, &mut enc.h_z),
                    ("h_i", h_i, &mut enc.h_i),
                ] {
                    if let Some(v) = src {
                        if v.len() != *l {
                            issues.push(format!(
                                "generator.{name}: {} entries, expected L = {l}",
                                v.len()
                            ));
                        } else {
                            *dst = v.clone();
                        }
                    }
                }
                Some(Generator::Hamiltonian(enc))
            }
            GeneratorConfig::Haar { k } => {
                if *k < 2 {
                    issues.push(format!("generator.k: 2-design needs K >= 2, got {k}"));
                    return None;
                }
                Some(Generator::HaarTwoDesign { k: *k, seed })
            }
            GeneratorConfig::Optical { m, p, a1, a2, b, fourier_scale, brightness } => {
                let enc = OpticalEncoding {
                    m: *m,
                    p: *p,
                    a1: *a1,
                    a2: *a2,
                    b: *b,
                    fourier_scale: *fourier_scale,
                    brightness: *brightness,
                };
                if let Err(err) = enc.validate() {
                    issues.push(format!("generator: {err}"));
                    return None;
                }
                Some(Generator::Optical(enc))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub shots: ShotsSpec,
    pub ensemble: EnsembleConfig,
    pub generator: GeneratorConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub shots: u64,
    pub generator: GeneratorConfig,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    /// Class-0/class-1 densities as `(weight, mean, std dev)` component
    /// lists; default is the built-in reference pair.
    #[serde(default)]
    pub class_densities: Option<[Vec<(f64, f64, f64)>; 2]>,
}

impl ClassifyConfig {
    pub fn densities(
        &self,
    ) -> eigentask::Result<(eigentask::learning::GaussianMixture, eigentask::learning::GaussianMixture)>
    {
        match &self.class_densities {
            None => eigentask::learning::reference_densities(),
            Some([c0, c1]) => Ok((
                eigentask::learning::GaussianMixture::new(c0.clone())?,
                eigentask::learning::GaussianMixture::new(c1.clone())?,
            )),
        }
    }
}

fn default_permutations() -> usize {
    10
}

/// Parse a config file, reporting every invalid field serde can see.
pub fn parse_config<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, Error> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
}
