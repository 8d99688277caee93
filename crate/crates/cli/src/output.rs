//! CSV files written by `run` and read back by `compare`.
//!
//! `metrics.csv` has one row per tick. Columns, in order: `t_s`; then
//! `ap_<id>_load` and `ap_<id>_connected` for each AP; then `ue_<id>_bps`
//! for each UE; then the cumulative `rejections`, `drops`, `handovers`.
//!
//! `summary.csv` has one row per run with the columns of [`SUMMARY_HEADER`].

use std::fs::File;
use std::io::Write;
use std::path::Path;

use sky3d::{MetricsFrame, RunSummary};

use crate::CliError;

pub const SUMMARY_HEADER: [&str; 8] = [
    "seed",
    "ticks",
    "rejections",
    "drops",
    "handovers",
    "min_connected_bps",
    "peak_satellite_load",
    "hata_out_of_range",
];

pub fn metrics_header(n_aps: usize, n_ues: usize) -> Vec<String> {
    let mut h = vec!["t_s".to_string()];
    for j in 0..n_aps {
        h.push(format!("ap_{j}_load"));
        h.push(format!("ap_{j}_connected"));
    }
    h.extend((0..n_ues).map(|i| format!("ue_{i}_bps")));
    h.extend(["rejections", "drops", "handovers"].map(String::from));
    h
}

fn metrics_row(f: &MetricsFrame) -> Vec<String> {
    let mut r = vec![f.t_s.to_string()];
    for ap in &f.aps {
        r.push(ap.load.to_string());
        r.push(ap.connected.to_string());
    }
    r.extend(f.ues.iter().map(|u| u.achieved_bps.to_string()));
    r.push(f.counters.rejections.to_string());
    r.push(f.counters.drops.to_string());
    r.push(f.counters.handovers.to_string());
    r
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_metrics(
    path: &Path,
    n_aps: usize,
    n_ues: usize,
    frames: &[MetricsFrame],
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(metrics_header(n_aps, n_ues))
        .map_err(|e| CliError::csv(path, e))?;
    for f in frames {
        w.write_record(metrics_row(f))
            .map_err(|e| CliError::csv(path, e))?;
    }
    finish(w, path)
}

fn summary_row(s: &RunSummary) -> Vec<String> {
    vec![
        s.seed.to_string(),
        s.ticks.to_string(),
        s.rejections.to_string(),
        s.drops.to_string(),
        s.handovers.to_string(),
        s.min_connected_bps
            .map(|b| b.to_string())
            .unwrap_or_default(),
        s.peak_satellite_load.to_string(),
        s.hata_out_of_range.to_string(),
    ]
}

pub fn write_summary(path: &Path, summaries: &[RunSummary]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)
        .map_err(|e| CliError::csv(path, e))?;
    for s in summaries {
        w.write_record(summary_row(s))
            .map_err(|e| CliError::csv(path, e))?;
    }
    finish(w, path)
}

pub fn read_summary(path: &Path) -> Result<Vec<RunSummary>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let headers = r.headers().map_err(|e| CliError::csv(path, e))?.clone();
    if headers.iter().ne(SUMMARY_HEADER) {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!(
                "unexpected header `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let bad = |message: String| CliError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let int = |k: usize| {
            field(k)
                .parse::<u64>()
                .map_err(|e| bad(format!("row {}: {}: {e}", line + 1, SUMMARY_HEADER[k])))
        };
        let float = |k: usize| {
            field(k)
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {}: {e}", line + 1, SUMMARY_HEADER[k])))
        };
        out.push(RunSummary {
            seed: int(0)?,
            ticks: int(1)?,
            rejections: int(2)?,
            drops: int(3)?,
            handovers: int(4)?,
            min_connected_bps: if field(5).is_empty() {
                None
            } else {
                Some(float(5)?)
            },
            peak_satellite_load: float(6)?,
            hata_out_of_range: int(7)?,
        });
    }
    Ok(out)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))
}
