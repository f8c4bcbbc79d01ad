//! Subcommand implementations. Every command is a pure function of
//! (config, seed): identical inputs reproduce identical output files.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use eigentask::error::{Error, Result};
use eigentask::io::{
    atomic_write, read_feature_csv, read_spectrum_csv, write_eigentasks_csv,
    write_eigenvectors_csv, write_feature_csv, write_feature_sidecar, write_records_jsonl,
    write_rec_csv, write_spectrum_csv, write_sweep_csv, FeatureSidecar,
};
use eigentask::learning::{accuracy_sweep, make_task};
use eigentask::map::NoiseModel;
use eigentask::sampling::{assemble_features, sample_records, FeatureMatrix, Shots};
use eigentask::spectral::{
    correct_finite_shots, gram_free_svd, k_cutoff, noisy_eigentasks, raw_moments, rec_curve,
    solve_nsr, NsrSpectrum, RecCurve,
};

use crate::config::{parse_config, ClassifyConfig, SimulateConfig};

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("creating {}: {e}", dir.display())))
}

fn sha_prefix(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn resolve_seed(flag: Option<u64>, config_seed: Option<u64>) -> u64 {
    flag.or(config_seed)
        .or_else(|| std::env::var("EIGENTASK_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0)
}

fn parse_model(name: &str) -> Result<NoiseModel> {
    match name {
        "multinomial" => Ok(NoiseModel::Multinomial),
        "poisson" => Ok(NoiseModel::Poisson),
        other => Err(Error::Config(format!(
            "--model must be multinomial or poisson, got {other:?} (the generic model needs per-shot records; use the library API)"
        ))),
    }
}

pub fn simulate(config_path: &Path, out_dir: &Path, seed_flag: Option<u64>) -> Result<()> {
    let text = read_file(config_path)?;
    let config: SimulateConfig = parse_config(&text)?;
    let seed = resolve_seed(seed_flag, config.seed);
    let mut issues = Vec::new();
    let shots = match config.shots.to_shots() {
        Ok(s) => Some(s),
        Err(msg) => {
            issues.push(format!("shots: {msg}"));
            None
        }
    };
    let ensemble = config.ensemble.build(seed, &mut issues);
    let generator = config.generator.build(seed, &mut issues);
    if !issues.is_empty() {
        return Err(Error::Config(format!("invalid config: {}", issues.join("; "))));
    }
    let (shots, ensemble, generator) = (shots.unwrap(), ensemble.unwrap(), generator.unwrap());

    ensure_dir(out_dir)?;
    let meta = format!("config_sha256={} seed={seed}", sha_prefix(text.as_bytes()));
    let features = match shots {
        Shots::Infinite => {
            eigentask::sampling::sample_feature_matrix(&generator, &ensemble, shots, seed)?
        }
        Shots::Finite(s) => {
            let records = sample_records(&generator, &ensemble, s, seed)?;
            write_records_jsonl(&out_dir.join("records.jsonl"), &records, &ensemble)?;
            assemble_features(&records, generator.n_features(), s, &ensemble)?
        }
    };
    write_feature_csv(&out_dir.join("features.csv"), &features, &meta)?;
    write_feature_sidecar(
        &out_dir.join("features.meta.json"),
        &FeatureSidecar {
            n: features.n_inputs(),
            k: features.n_features(),
            shots,
            seed,
            ensemble: ensemble.kind(),
        },
    )?;
    println!(
        "simulate: N = {}, K = {}, S = {} -> {}",
        features.n_inputs(),
        features.n_features(),
        shots,
        out_dir.display()
    );
    Ok(())
}

fn load_features(features: &Path, sidecar: Option<&Path>) -> Result<FeatureMatrix> {
    let default_sidecar: PathBuf = features.with_extension("meta.json");
    read_feature_csv(features, sidecar.unwrap_or(&default_sidecar))
}

fn compute_spectrum(
    features: &FeatureMatrix,
    model: NoiseModel,
    gram_free: bool,
    correct_shots: bool,
) -> Result<NsrSpectrum> {
    if gram_free && model != NoiseModel::Multinomial {
        return Err(Error::Config("--gram-free applies to multinomial features".into()));
    }
    let raw = if gram_free {
        gram_free_svd(features)?
    } else {
        solve_nsr(&raw_moments(features, model)?)?
    };
    if !correct_shots {
        return Ok(raw);
    }
    match features.shots {
        Shots::Infinite => Ok(raw),
        Shots::Finite(s) => correct_finite_shots(&raw, s),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn spectrum(
    features_path: &Path,
    sidecar: Option<&Path>,
    model: &str,
    correct_shots: bool,
    gram_free: bool,
    s_list: &[u64],
    out_dir: &Path,
) -> Result<()> {
    let model = parse_model(model)?;
    let features = load_features(features_path, sidecar)?;
    let spectrum = compute_spectrum(&features, model, gram_free, correct_shots)?;
    ensure_dir(out_dir)?;
    let meta = format!(
        "config_sha256={} route={} corrected={correct_shots} dropped={:?}",
        sha_prefix(format!("{}:{gram_free}:{correct_shots}", features_path.display()).as_bytes()),
        if gram_free { "gram-free" } else { "gram" },
        spectrum.dropped,
    );
    write_spectrum_csv(&out_dir.join("spectrum.csv"), &spectrum, &meta)?;
    write_eigenvectors_csv(&out_dir.join("eigenvectors.csv"), &spectrum, &meta)?;

    let mut kc = format!("# eigentask v{} {}\nS,K_c\n", env!("CARGO_PKG_VERSION"), meta);
    let mut sorted: Vec<u64> = s_list.to_vec();
    sorted.sort_unstable();
    for s in sorted {
        kc.push_str(&format!("{s},{}\n", k_cutoff(&spectrum, Shots::Finite(s))));
    }
    atomic_write(&out_dir.join("kc.csv"), &kc)?;
    println!(
        "spectrum: K = {}, rank = {}, first beta2 = {:?} -> {}",
        spectrum.k(),
        spectrum.effective_rank,
        &spectrum.beta2[..spectrum.k().min(4)],
        out_dir.display()
    );
    Ok(())
}

pub fn rec(spectrum_path: &Path, s_list: &[u64], out: &Path) -> Result<()> {
    let rows = read_spectrum_csv(spectrum_path)?;
    let mut sorted: Vec<u64> = s_list.to_vec();
    sorted.sort_unstable();
    let unsorted_note = if sorted != s_list { " note=s-list-sorted-ascending" } else { "" };
    let rank = rows.iter().filter(|(_, finite)| *finite).count();
    let points = sorted
        .into_iter()
        .map(|s| {
            let ct: f64 = rows
                .iter()
                .filter(|(_, finite)| *finite)
                .map(|(b, _)| 1.0 / (1.0 + b / s as f64))
                .sum();
            (s as f64, ct)
        })
        .collect();
    let curve = RecCurve { points, rank_g: rank };
    if let Some(dir) = out.parent() {
        ensure_dir(dir)?;
    }
    let meta = format!(
        "config_sha256={} rank_g={rank}{unsorted_note}",
        sha_prefix(spectrum_path.display().to_string().as_bytes())
    );
    write_rec_csv(out, &curve, &meta)?;
    println!("rec: {} points, rank(G) = {rank} -> {}", curve.points.len(), out.display());
    Ok(())
}

pub fn eigentasks(
    features_path: &Path,
    sidecar: Option<&Path>,
    model: &str,
    gram_free: bool,
    out_dir: &Path,
) -> Result<()> {
    let model = parse_model(model)?;
    let features = load_features(features_path, sidecar)?;
    let spectrum = compute_spectrum(&features, model, gram_free, false)?;
    let table = noisy_eigentasks(&features, &spectrum)?;
    ensure_dir(out_dir)?;
    let meta = format!(
        "config_sha256={} shots={}",
        sha_prefix(features_path.display().to_string().as_bytes()),
        features.shots
    );
    write_eigentasks_csv(&out_dir.join("eigentasks.csv"), &features.ensemble, &table, &meta)?;
    write_spectrum_csv(&out_dir.join("spectrum.csv"), &spectrum, &meta)?;
    println!(
        "eigentasks: {} rows x {} tasks -> {}",
        features.n_inputs(),
        spectrum.k(),
        out_dir.display()
    );
    Ok(())
}

pub fn classify(config_path: &Path, out_dir: &Path, seed_flag: Option<u64>) -> Result<()> {
    let text = read_file(config_path)?;
    let config: ClassifyConfig = parse_config(&text)?;
    let seed = resolve_seed(seed_flag, config.seed);
    let mut issues = Vec::new();
    if config.shots == 0 {
        issues.push("shots: must be at least 1".into());
    }
    let generator = config.generator.build(seed, &mut issues);
    if config.n_train == 0 || config.n_train % 2 != 0 || config.n_test == 0 || config.n_test % 2 != 0 {
        issues.push("n_train/n_test: must be positive and even for balanced classes".into());
    }
    if config.permutations == 0 {
        issues.push("permutations: must be at least 1".into());
    }
    if !issues.is_empty() {
        return Err(Error::Config(format!("invalid config: {}", issues.join("; "))));
    }
    let generator = generator.unwrap();

    let (p0, p1) = config.densities()?;
    let task = make_task(p0, p1, seed, config.n_train, config.n_test)?;
    let ensemble = task.ensemble()?;
    let shots = Shots::Finite(config.shots);
    let features = eigentask::sampling::sample_feature_matrix(&generator, &ensemble, shots, seed.wrapping_add(1))?;
    let raw = solve_nsr(&raw_moments(&features, NoiseModel::Multinomial)?)?;
    let corrected = correct_finite_shots(&raw, config.shots)?;
    let kc = k_cutoff(&corrected, shots);
    let table = noisy_eigentasks(&features, &raw)?;
    let rows = accuracy_sweep(
        &table.y_bar,
        &task.labels(),
        config.n_train,
        config.permutations,
        shots,
        seed.wrapping_add(2),
    )?;

    ensure_dir(out_dir)?;
    let meta = format!("config_sha256={} seed={seed} k_c={kc}", sha_prefix(text.as_bytes()));
    write_sweep_csv(&out_dir.join("sweep.csv"), &rows, kc, &meta)?;
    write_spectrum_csv(&out_dir.join("spectrum.csv"), &corrected, &meta)?;
    let best = rows
        .iter()
        .max_by(|a, b| a.test_acc_mean.total_cmp(&b.test_acc_mean))
        .expect("sweep is nonempty");
    let summary = serde_json::json!({
        "seed": seed,
        "shots": config.shots,
        "k_c": kc,
        "bayes_accuracy": task.bayes_accuracy(),
        "best_test_acc_mean": best.test_acc_mean,
        "best_k_l": best.k_l,
        "test_acc_at_kc": rows[kc.clamp(1, rows.len()) - 1].test_acc_mean,
    });
    atomic_write(&out_dir.join("summary.json"), &serde_json::to_string_pretty(&summary).unwrap())?;
    println!(
        "classify: K_c = {kc}, best mean test accuracy {:.3} at K_L = {} -> {}",
        best.test_acc_mean,
        best.k_l,
        out_dir.display()
    );
    Ok(())
}

pub fn twodesign(k: usize, s_list: &[u64], out_dir: &Path) -> Result<()> {
    let spectrum = eigentask::analytic::two_design_spectrum(k)?;
    ensure_dir(out_dir)?;
    let meta = format!("config_sha256={} k={k}", sha_prefix(format!("twodesign:{k}").as_bytes()));
    write_spectrum_csv(&out_dir.join("twodesign_spectrum.csv"), &spectrum, &meta)?;
    let curve = rec_curve(&spectrum, s_list);
    write_rec_csv(&out_dir.join("twodesign_rec.csv"), &curve, &meta)?;
    for &(s, ct) in &curve.points {
        let closed = eigentask::analytic::two_design_rec(k, Shots::Finite(s as u64))?;
        if (ct - closed).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "2-design identity violated at S = {s}: {ct} vs {closed}"
            )));
        }
    }
    println!("twodesign: K = {k}, {} capacity points -> {}", curve.points.len(), out_dir.display());
    Ok(())
}

pub fn verify(quick: bool) -> Result<()> {
    let results = eigentask::acceptance::run_all(quick)?;
    let mut failures = 0;
    for result in &results {
        println!(
            "{} {}: {}",
            if result.passed { "PASS" } else { "FAIL" },
            result.name,
            result.details
        );
        if !result.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(Error::Numerical(format!("{failures} verification check(s) failed")));
    }
    println!("verify: all {} checks passed", results.len());
    Ok(())
}
