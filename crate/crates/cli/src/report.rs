//! CSV emission and parse-back for the fixed report formats.
//!
//! Headers are fixed: `epochs.csv` is `epoch,d_loss,g_loss,wall_ms`;
//! `metrics.csv` is `metric,value,classifier_test_accuracy`; the benchmark
//! table is one row per grid cell. Sample CSVs open with a `# key=value`
//! metadata comment line.

use snsgan_core::error::{Error, Result};
use snsgan_core::eval::MetricReport;
use snsgan_core::training::TrainReport;
use std::io::Write;
use std::path::Path;

pub const EPOCHS_HEADER: &str = "epoch,d_loss,g_loss,wall_ms";
pub const METRICS_HEADER: &str = "metric,value,classifier_test_accuracy";
pub const BENCHMARK_HEADER: &str =
    "model,dataset,seed,score,frechet,conditional_accuracy,min_diversity,classifier_test_accuracy,status";

pub fn write_epochs_csv(path: impl AsRef<Path>, report: &TrainReport) -> Result<()> {
    let mut out = String::new();
    out.push_str(EPOCHS_HEADER);
    out.push('\n');
    for e in &report.epochs {
        out.push_str(&format!("{},{},{},{}\n", e.epoch, e.d_loss, e.g_loss, e.wall_ms));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Flattens a metric report into named rows.
pub fn metric_rows(report: &MetricReport) -> Vec<(String, f64)> {
    let mut rows = vec![
        ("score".to_string(), report.score),
        ("frechet_distance".to_string(), report.frechet_distance),
        ("conditional_accuracy".to_string(), report.conditional_accuracy),
    ];
    for (c, &v) in report.per_class_accuracy.iter().enumerate() {
        rows.push((format!("class_accuracy_{c}"), v));
    }
    for (c, &v) in report.intra_class_diversity.iter().enumerate() {
        rows.push((format!("diversity_{c}"), v));
    }
    rows.push(("classifier_test_accuracy".to_string(), report.classifier_test_accuracy));
    rows
}

pub fn write_metrics_csv(path: impl AsRef<Path>, report: &MetricReport) -> Result<()> {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for (name, value) in metric_rows(report) {
        out.push_str(&format!("{name},{value},{}\n", report.classifier_test_accuracy));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One benchmark grid cell; errors fill `status` and leave values empty.
#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub model: String,
    pub dataset: String,
    pub seed: u64,
    pub report: Option<MetricReport>,
    pub status: String,
}

pub fn write_benchmark_csv(path: impl AsRef<Path>, rows: &[BenchmarkRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(BENCHMARK_HEADER);
    out.push('\n');
    for row in rows {
        match &row.report {
            Some(r) => {
                let min_div = r
                    .intra_class_diversity
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    row.model,
                    row.dataset,
                    row.seed,
                    r.score,
                    r.frechet_distance,
                    r.conditional_accuracy,
                    min_div,
                    r.classifier_test_accuracy,
                    row.status
                ));
            }
            None => {
                out.push_str(&format!(
                    "{},{},{},,,,,,{}\n",
                    row.model, row.dataset, row.seed, row.status
                ));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes generated series samples: a metadata comment, a `t0..t{T-1}`
/// header, then one row per sample.
pub fn write_samples_csv(
    path: impl AsRef<Path>,
    seed: u64,
    class: usize,
    series_len: usize,
    rows: &[f64],
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# seed={seed} class={class}")?;
    let header: Vec<String> = (0..series_len).map(|t| format!("t{t}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in rows.chunks_exact(series_len) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a samples CSV back: returns (metadata line, data rows).
pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<(String, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut meta = String::new();
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        if line.starts_with('#') {
            meta = line.trim_start_matches('#').trim().to_string();
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('t') {
            continue; // header row
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::format(format!(
                        "{}: line {}: field {f:?} is not numeric",
                        path.as_ref().display(),
                        idx + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::format(format!(
                    "{}: line {} has {} fields, expected {w}",
                    path.as_ref().display(),
                    idx + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok((meta, rows))
}

/// Metadata parser for the `key=value` comment line.
pub fn parse_meta(meta: &str) -> std::collections::BTreeMap<String, String> {
    meta.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
