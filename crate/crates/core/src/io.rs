//! On-disk formats: CSV tables, JSONL shot records, JSON sidecars.
//!
//! Every CSV starts with a `#` comment line carrying the tool version and a
//! config hash, followed by a header row. Writes go through a temp file and
//! an atomic rename.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleKind, InputEnsemble};
use crate::error::{Error, Result};
use crate::learning::SweepRow;
use crate::sampling::{FeatureMatrix, ShotData, ShotRecord, Shots};
use crate::spectral::{EigentaskTable, NsrSpectrum, RecCurve};

fn io_err(context: &str, err: std::io::Error) -> Error {
    Error::Io(format!("{context}: {err}"))
}

/// Write `content` to `path` via a sibling temp file and rename.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content).map_err(|e| io_err(&format!("writing {}", tmp.display()), e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(&format!("renaming to {}", path.display()), e))?;
    Ok(())
}

fn comment_line(meta: &str) -> String {
    format!("# eigentask v{} {}\n", env!("CARGO_PKG_VERSION"), meta)
}

/// Sidecar metadata for a feature CSV; enough to rebuild the ensemble
/// weights and interpret the shot count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSidecar {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "S")]
    pub shots: Shots,
    pub seed: u64,
    pub ensemble: EnsembleKind,
}

/// Feature matrix as CSV with a `u` column followed by `X0..X{K-1}`.
pub fn write_feature_csv(path: &Path, features: &FeatureMatrix, meta: &str) -> Result<()> {
    let mut out = comment_line(meta);
    out.push('u');
    for k in 0..features.n_features() {
        let _ = write!(out, ",X{k}");
    }
    out.push('\n');
    for (n, &u) in features.ensemble.values().iter().enumerate() {
        let _ = write!(out, "{u}");
        for k in 0..features.n_features() {
            let _ = write!(out, ",{}", features.data[(n, k)]);
        }
        out.push('\n');
    }
    atomic_write(path, &out)
}

pub fn write_feature_sidecar(path: &Path, sidecar: &FeatureSidecar) -> Result<()> {
    let json = serde_json::to_string_pretty(sidecar)
        .map_err(|e| Error::Config(format!("serializing sidecar: {e}")))?;
    atomic_write(path, &json)
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{context}: bad number {field:?}")))
}

/// Read a feature CSV plus its sidecar back into a `FeatureMatrix`.
pub fn read_feature_csv(csv_path: &Path, sidecar_path: &Path) -> Result<FeatureMatrix> {
    let sidecar: FeatureSidecar = serde_json::from_str(
        &std::fs::read_to_string(sidecar_path)
            .map_err(|e| io_err(&format!("reading {}", sidecar_path.display()), e))?,
    )
    .map_err(|e| Error::Config(format!("parsing sidecar: {e}")))?;
    let text = std::fs::read_to_string(csv_path)
        .map_err(|e| io_err(&format!("reading {}", csv_path.display()), e))?;

    let mut values = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header_seen = false;
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            let cols = line.split(',').count();
            if cols != sidecar.k + 1 {
                return Err(Error::Config(format!(
                    "feature CSV has {cols} columns, sidecar says K = {}",
                    sidecar.k
                )));
            }
            continue;
        }
        let mut fields = line.split(',');
        let u = parse_f64(fields.next().unwrap_or(""), "u column")?;
        let row: Vec<f64> = fields
            .map(|f| parse_f64(f, "feature column"))
            .collect::<Result<_>>()?;
        if row.len() != sidecar.k {
            return Err(Error::Config(format!(
                "feature row has {} entries, expected {}",
                row.len(),
                sidecar.k
            )));
        }
        values.push(u);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config("feature CSV has no rows".into()));
    }
    if rows.len() != sidecar.n {
        return Err(Error::Config(format!(
            "feature CSV has {} rows, sidecar says N = {}",
            rows.len(),
            sidecar.n
        )));
    }
    let ensemble = match sidecar.ensemble {
        EnsembleKind::IidUniform => InputEnsemble::new(
            values,
            vec![1.0 / rows.len() as f64; rows.len()],
            EnsembleKind::IidUniform,
        )?,
        EnsembleKind::EquispacedGrid => {
            let grid = InputEnsemble::equispaced_grid(rows.len())?;
            InputEnsemble::new(values, grid.weights().to_vec(), EnsembleKind::EquispacedGrid)?
        }
    };
    let data = nalgebra::DMatrix::from_fn(rows.len(), sidecar.k, |n, k| rows[n][k]);
    Ok(FeatureMatrix {
        data,
        shots: sidecar.shots,
        ensemble,
    })
}

/// Shot records as JSON lines: one object per input with `outcomes` for
/// multinomial generators or `counts` (per shot) for optical ones.
pub fn write_records_jsonl(path: &Path, records: &[ShotRecord], ensemble: &InputEnsemble) -> Result<()> {
    let mut out = String::new();
    for record in records {
        let u = ensemble.values()[record.input_index];
        let line = match &record.data {
            ShotData::Outcomes(outcomes) => serde_json::json!({
                "input_index": record.input_index,
                "u": u,
                "outcomes": outcomes,
            }),
            ShotData::Counts { k, counts } => serde_json::json!({
                "input_index": record.input_index,
                "u": u,
                "counts": counts.chunks_exact(*k).collect::<Vec<_>>(),
            }),
        };
        let _ = writeln!(out, "{line}");
    }
    atomic_write(path, &out)
}

/// NSR spectrum as CSV: `k,beta2,correctable,alpha`. Non-correctable entries
/// carry the flag (and `inf` in the beta2 column); the flag column is
/// authoritative so serialization stays exact.
pub fn write_spectrum_csv(path: &Path, spectrum: &NsrSpectrum, meta: &str) -> Result<()> {
    let mut out = comment_line(meta);
    out.push_str("k,beta2,correctable,alpha\n");
    for i in 0..spectrum.k() {
        let beta = if spectrum.finite[i] {
            format!("{}", spectrum.beta2[i])
        } else {
            "inf".to_string()
        };
        let _ = writeln!(out, "{i},{beta},{},{}", spectrum.finite[i], spectrum.alpha[i]);
    }
    atomic_write(path, &out)
}

/// Minimal spectrum read-back: `(beta2, finite)` pairs in file order.
pub fn read_spectrum_csv(path: &Path) -> Result<Vec<(f64, bool)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_err(&format!("reading {}", path.display()), e))?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Config(format!("spectrum row has {} fields", fields.len())));
        }
        let finite: bool = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad correctable flag {:?}", fields[2])))?;
        let beta2 = if finite {
            parse_f64(fields[1], "beta2 column")?
        } else {
            f64::INFINITY
        };
        rows.push((beta2, finite));
    }
    if rows.is_empty() {
        return Err(Error::Config("spectrum CSV has no rows".into()));
    }
    Ok(rows)
}

/// Eigentask coefficient matrix: row `j` holds feature `j`'s coefficient in
/// each eigentask column `r0..r{K-1}`.
pub fn write_eigenvectors_csv(path: &Path, spectrum: &NsrSpectrum, meta: &str) -> Result<()> {
    let k = spectrum.k();
    let mut out = comment_line(meta);
    out.push_str(
        &(0..k).map(|i| format!("r{i}")).collect::<Vec<_>>().join(","),
    );
    out.push('\n');
    for j in 0..k {
        let row: Vec<String> = (0..k).map(|i| format!("{}", spectrum.r[(j, i)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    atomic_write(path, &out)
}

/// Capacity curve as CSV `(S, C_T)`.
pub fn write_rec_csv(path: &Path, curve: &RecCurve, meta: &str) -> Result<()> {
    let mut out = comment_line(meta);
    out.push_str("S,C_T\n");
    for &(s, ct) in &curve.points {
        let _ = writeln!(out, "{s},{ct}");
    }
    atomic_write(path, &out)
}

/// Tabulated noisy eigentasks: `u, ybar0..`, plus exact `y` columns when the
/// features were exact.
pub fn write_eigentasks_csv(
    path: &Path,
    ensemble: &InputEnsemble,
    table: &EigentaskTable,
    meta: &str,
) -> Result<()> {
    let k = table.y_bar.ncols();
    let mut out = comment_line(meta);
    out.push('u');
    for i in 0..k {
        let _ = write!(out, ",ybar{i}");
    }
    out.push('\n');
    for (n, &u) in ensemble.values().iter().enumerate() {
        let _ = write!(out, "{u}");
        for i in 0..k {
            let _ = write!(out, ",{}", table.y_bar[(n, i)]);
        }
        out.push('\n');
    }
    atomic_write(path, &out)
}

/// Accuracy sweep with the `K_c` marker column.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow], k_c: usize, meta: &str) -> Result<()> {
    let mut out = comment_line(meta);
    out.push_str(
        "K_L,train_acc_mean,train_acc_min,train_acc_max,test_acc_mean,test_acc_min,test_acc_max,is_kc\n",
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.k_l,
            row.train_acc_mean,
            row.train_acc_min,
            row.train_acc_max,
            row.test_acc_mean,
            row.test_acc_min,
            row.test_acc_max,
            row.k_l == k_c
        );
    }
    atomic_write(path, &out)
}
