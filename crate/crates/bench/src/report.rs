//! Summary tables and reloading of record CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::config::Metric;
use crate::error::{BenchError, Result};
use crate::harness::{aggregate, fmt_f64, fmt_opt, mean_stderr, Row, RunRecord, DERIVED_FILES, RECORD_COLUMNS};

pub const THRESHOLDS: [f64; 3] = [0.5, 0.2, 0.1];

/// Cell text for a threshold that was never reached.
pub const NOT_REACHED: &str = "> budget";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub seeds: usize,
    pub failed: usize,
    pub metric: Metric,
    pub final_samples: u64,
    pub final_mean: f64,
    pub final_stderr: Option<f64>,
    /// First sample count at which the mean curve falls to each of [`THRESHOLDS`].
    pub to_threshold: [Option<u64>; 3],
}

/// Preferred metric present in the records.
fn primary_metric(records: &[&RunRecord]) -> Option<Metric> {
    Metric::ALL.into_iter().find(|m| {
        records
            .iter()
            .any(|r| r.rows.iter().any(|row| row.metrics[m.index()].is_some()))
    })
}

/// Per-algorithm final value of the primary metric and samples to each threshold.
///
/// Thresholds apply to the mean weighted error; for other metrics the mean
/// curve is first divided by its value at the first trace point.
pub fn compare_report(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.algorithm.as_str()) {
            order.push(&r.algorithm);
        }
    }
    let agg = aggregate(records);
    let mut out = Vec::new();
    for name in order {
        let all: Vec<&RunRecord> = records.iter().filter(|r| r.algorithm == name).collect();
        let ok: Vec<&RunRecord> = all.iter().copied().filter(|r| r.failure.is_none()).collect();
        let failed = all.len() - ok.len();
        let Some(metric) = primary_metric(&ok) else {
            out.push(SummaryRow {
                algorithm: name.to_string(),
                seeds: ok.len(),
                failed,
                metric: Metric::WeightedError,
                final_samples: 0,
                final_mean: f64::NAN,
                final_stderr: None,
                to_threshold: [None; 3],
            });
            continue;
        };
        let mi = metric.index();
        let finals: Vec<f64> = ok.iter().filter_map(|r| r.final_row().and_then(|row| row.metrics[mi])).collect();
        let final_samples = ok.iter().filter_map(|r| r.final_row().map(|row| row.samples)).max().unwrap_or(0);
        let (final_mean, final_stderr) = mean_stderr(&finals);
        let curve: Vec<(u64, f64)> = agg
            .iter()
            .filter(|a| a.algorithm == name)
            .filter_map(|a| a.mean[mi].map(|v| (a.samples, v)))
            .collect();
        let scale = match metric {
            Metric::WeightedError => 1.0,
            _ => curve.first().map_or(1.0, |c| c.1),
        };
        let mut to_threshold = [None; 3];
        for (slot, thr) in to_threshold.iter_mut().zip(THRESHOLDS) {
            *slot = curve.iter().find(|(_, v)| *v <= thr * scale).map(|c| c.0);
        }
        out.push(SummaryRow {
            algorithm: name.to_string(),
            seeds: ok.len(),
            failed,
            metric,
            final_samples,
            final_mean,
            final_stderr,
            to_threshold,
        });
    }
    out
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::from("algorithm,seeds,failed,metric,final_samples,final_mean,final_stderr");
    for t in THRESHOLDS {
        let _ = write!(s, ",samples_to_{t}");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{}",
            r.algorithm,
            r.seeds,
            r.failed,
            r.metric.name(),
            r.final_samples,
            fmt_f64(r.final_mean),
            fmt_opt(r.final_stderr)
        );
        for t in r.to_threshold {
            match t {
                Some(v) => {
                    let _ = write!(s, ",{v}");
                }
                None => {
                    let _ = write!(s, ",{NOT_REACHED}");
                }
            }
        }
        s.push('\n');
    }
    s
}

fn parse_cell<T: std::str::FromStr>(path: &Path, line: usize, cell: &str, what: &str) -> Result<T> {
    cell.parse().map_err(|_| BenchError::Parse {
        path: path.to_path_buf(),
        line,
        reason: format!("cannot parse {what} from `{cell}`"),
    })
}

/// Reloads the per-algorithm CSVs in `dir`, in file-name order.
///
/// Rows whose metrics are `NaN` mark a failed run.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let entries = std::fs::read_dir(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| !p.file_name().is_some_and(|n| DERIVED_FILES.iter().any(|d| n == *d)))
        .collect();
    files.sort();
    let mut records = Vec::new();
    for path in files {
        let mut rdr = csv::Reader::from_path(&path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != RECORD_COLUMNS {
            return Err(BenchError::Parse {
                path: path.clone(),
                line: 1,
                reason: "unexpected header".into(),
            });
        }
        let mut grouped: BTreeMap<(String, u64), Vec<Row>> = BTreeMap::new();
        let mut first_seen: Vec<(String, u64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let opt = |k: usize| -> Result<Option<f64>> {
                match &rec[k] {
                    "" => Ok(None),
                    c => parse_cell(&path, line, c, RECORD_COLUMNS[k]).map(Some),
                }
            };
            let key = (rec[0].to_string(), parse_cell(&path, line, &rec[1], "seed")?);
            let row = Row {
                iter: parse_cell(&path, line, &rec[2], "iter")?,
                samples: parse_cell(&path, line, &rec[3], "samples")?,
                gamma: parse_cell(&path, line, &rec[4], "gamma")?,
                lambda: parse_cell(&path, line, &rec[5], "lambda")?,
                metrics: [opt(6)?, opt(7)?, opt(8)?],
            };
            if !grouped.contains_key(&key) {
                first_seen.push(key.clone());
            }
            grouped.entry(key).or_default().push(row);
        }
        for key in first_seen {
            let rows = grouped.remove(&key).unwrap_or_default();
            let failed = rows.iter().any(|r| r.metrics.iter().flatten().any(|v| v.is_nan()));
            records.push(RunRecord {
                algorithm: key.0,
                seed: key.1,
                rows,
                wall_time: Duration::ZERO,
                failure: failed.then(|| "diverged".to_string()),
            });
        }
    }
    if records.is_empty() {
        return Err(BenchError::config("records", format!("no record CSVs in {}", dir.display())));
    }
    Ok(records)
}
