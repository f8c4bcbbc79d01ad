//! Browser bindings: NSR spectrum / capacity exploration, eigentask curves,
//! and the closed-form 2-design capacity, all returned as JSON strings for a
//! plain-canvas front end.

use serde::Deserialize;
use wasm_bindgen::prelude::wasm_bindgen;

use eigentask::analytic::{two_design_rec, two_design_spectrum};
use eigentask::ensemble::InputEnsemble;
use eigentask::error::{Error, Result};
use eigentask::map::{tabulate, Generator};
use eigentask::quantum::{
    expected_total_correlation, random_circuit_encoding, random_hamiltonian_encoding, ring_graph,
    HamiltonianParams,
};
use eigentask::sampling::{sample_feature_matrix, Shots};
use eigentask::spectral::{eigentasks, exact_moments, k_cutoff, rec, solve_nsr};

#[derive(Debug, Deserialize)]
struct ExploreConfig {
    ansatz: String,
    l: usize,
    #[serde(default = "default_tau")]
    tau: usize,
    j: f64,
    seed: u64,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_shots")]
    shots: u64,
    #[serde(default = "default_tasks")]
    tasks: usize,
}

fn default_tau() -> usize {
    3
}
fn default_n() -> usize {
    161
}
fn default_shots() -> u64 {
    256
}
fn default_tasks() -> usize {
    6
}

fn build_generator(cfg: &ExploreConfig) -> Result<Generator> {
    if cfg.l > 6 {
        return Err(Error::Capability("demo supports up to 6 qubits".into()));
    }
    match cfg.ansatz.as_str() {
        "circuit" => Ok(Generator::Circuit(random_circuit_encoding(
            cfg.l,
            cfg.tau,
            cfg.j,
            ring_graph(cfg.l),
            cfg.seed,
        )?)),
        "hamiltonian" => {
            let params = HamiltonianParams {
                mean_x: 0.0,
                rms_x: 20.0,
                mean_z: 0.0,
                rms_z: 5.0,
                mean_i: 0.0,
                rms_i: 5.0,
                j: cfg.j,
                t: 5.0,
            };
            Ok(Generator::Hamiltonian(random_hamiltonian_encoding(
                cfg.l,
                &params,
                ring_graph(cfg.l),
                cfg.seed,
            )?))
        }
        other => Err(Error::Config(format!(
            "ansatz must be \"circuit\" or \"hamiltonian\", got {other:?}"
        ))),
    }
}

fn log2_shot_grid() -> impl Iterator<Item = u64> {
    (0..=20).map(|e| 1u64 << e)
}

/// NSR spectrum, capacity curve and expected total correlation for a random
/// encoding described by `config` (JSON).
pub fn spectrum_explorer_json(config: &str) -> Result<String> {
    let cfg: ExploreConfig =
        serde_json::from_str(config).map_err(|e| Error::Config(format!("config: {e}")))?;
    let generator = build_generator(&cfg)?;
    let ensemble = InputEnsemble::equispaced_grid(cfg.n.max(16))?;
    let table = tabulate(&generator, &ensemble)?;
    let moments = exact_moments(&table, &ensemble)?;
    let spectrum = solve_nsr(&moments)?;
    let etc = expected_total_correlation(&table, &ensemble)?;
    let beta2: Vec<Option<f64>> = spectrum
        .beta2
        .iter()
        .zip(&spectrum.finite)
        .map(|(&b, &f)| if f { Some(b) } else { None })
        .collect();
    let curve: Vec<(f64, f64)> = log2_shot_grid()
        .map(|s| (s as f64, rec(&spectrum, Shots::Finite(s))))
        .collect();
    let kc: Vec<(f64, usize)> = log2_shot_grid()
        .map(|s| (s as f64, k_cutoff(&spectrum, Shots::Finite(s))))
        .collect();
    serde_json::to_string(&serde_json::json!({
        "k": spectrum.k(),
        "rank": spectrum.effective_rank,
        "beta2": beta2,
        "rec": curve,
        "k_c": kc,
        "etc": etc,
    }))
    .map_err(|e| Error::Numerical(format!("serializing: {e}")))
}

/// Exact and noisy eigentask curves over the input grid at the configured
/// shot budget.
pub fn eigentask_curves_json(config: &str) -> Result<String> {
    let cfg: ExploreConfig =
        serde_json::from_str(config).map_err(|e| Error::Config(format!("config: {e}")))?;
    if cfg.shots == 0 {
        return Err(Error::Config("shots must be at least 1".into()));
    }
    let generator = build_generator(&cfg)?;
    let ensemble = InputEnsemble::equispaced_grid(cfg.n.max(16))?;
    let table = tabulate(&generator, &ensemble)?;
    let moments = exact_moments(&table, &ensemble)?;
    let spectrum = solve_nsr(&moments)?;
    let features =
        sample_feature_matrix(&generator, &ensemble, Shots::Finite(cfg.shots), cfg.seed ^ 0x5eed)?;
    let tasks = eigentasks(&table, &features, &spectrum)?;
    let count = cfg.tasks.clamp(1, spectrum.k());
    let shown: Vec<serde_json::Value> = (0..count)
        .map(|k| {
            serde_json::json!({
                "index": k,
                "beta2": if spectrum.finite[k] { Some(spectrum.beta2[k]) } else { None },
                "y": tasks.y.column(k).iter().copied().collect::<Vec<f64>>(),
                "y_bar": tasks.y_bar.column(k).iter().copied().collect::<Vec<f64>>(),
            })
        })
        .collect();
    serde_json::to_string(&serde_json::json!({
        "u": ensemble.values(),
        "shots": cfg.shots,
        "tasks": shown,
    }))
    .map_err(|e| Error::Numerical(format!("serializing: {e}")))
}

/// Closed-form 2-design capacity curve over a log-spaced shot grid.
pub fn twodesign_curve_json(k: usize) -> Result<String> {
    let spectrum = two_design_spectrum(k)?;
    let points: Vec<(f64, f64)> = log2_shot_grid()
        .map(|s| {
            let ct = two_design_rec(k, Shots::Finite(s)).expect("validated above");
            (s as f64, ct)
        })
        .collect();
    serde_json::to_string(&serde_json::json!({
        "k": k,
        "beta2": spectrum.beta2,
        "points": points,
    }))
    .map_err(|e| Error::Numerical(format!("serializing: {e}")))
}

#[wasm_bindgen]
pub fn spectrum_explorer(config: &str) -> std::result::Result<String, String> {
    spectrum_explorer_json(config).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn eigentask_curves(config: &str) -> std::result::Result<String, String> {
    eigentask_curves_json(config).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn twodesign_curve(k: usize) -> std::result::Result<String, String> {
    twodesign_curve_json(k).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"{"ansatz": "circuit", "l": 3, "tau": 3, "j": 1.5, "seed": 9, "n": 81, "shots": 64, "tasks": 4}"#;

    #[test]
    fn explorer_reports_spectrum_and_capacity() {
        let out = spectrum_explorer_json(CONFIG).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["k"], 8);
        assert_eq!(v["beta2"].as_array().unwrap().len(), 8);
        assert!(v["beta2"][0].as_f64().unwrap().abs() < 1e-12);
        let rec = v["rec"].as_array().unwrap();
        assert_eq!(rec.len(), 21);
        let first = rec[0][1].as_f64().unwrap();
        let last = rec[20][1].as_f64().unwrap();
        assert!(first < last && last <= 8.0 + 1e-9);
        assert!(v["etc"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn eigentask_curves_have_matching_lengths() {
        let out = eigentask_curves_json(CONFIG).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let u = v["u"].as_array().unwrap();
        let tasks = v["tasks"].as_array().unwrap();
        assert_eq!(tasks.len(), 4);
        for task in tasks {
            assert_eq!(task["y"].as_array().unwrap().len(), u.len());
            assert_eq!(task["y_bar"].as_array().unwrap().len(), u.len());
        }
        // The leading eigentask is noiseless: ybar equals y exactly.
        let y0 = tasks[0]["y"].as_array().unwrap();
        let yb0 = tasks[0]["y_bar"].as_array().unwrap();
        for (a, b) in y0.iter().zip(yb0) {
            assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn twodesign_curve_matches_closed_form() {
        let out = twodesign_curve_json(16).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        // C_T(S = 16) = 16 * 17 / 32 = 8.5.
        let points = v["points"].as_array().unwrap();
        let at_16 = points[4].as_array().unwrap();
        assert_eq!(at_16[0].as_f64().unwrap(), 16.0);
        assert!((at_16[1].as_f64().unwrap() - 8.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_error_cleanly() {
        assert!(spectrum_explorer_json("{}").is_err());
        assert!(spectrum_explorer_json(r#"{"ansatz": "foo", "l": 2, "j": 0.0, "seed": 1}"#).is_err());
    }
}
