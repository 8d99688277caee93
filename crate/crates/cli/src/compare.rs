//! Side-by-side comparison of two run directories.

use std::fmt::Write;
use std::path::Path;

use sky3d::RunSummary;

use crate::output::read_summary;
use crate::CliError;

/// Totals over every seed of one output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub rejections: u64,
    pub drops: u64,
    pub handovers: u64,
    pub min_connected_bps: Option<f64>,
    pub peak_satellite_load: f64,
}

impl Aggregate {
    pub fn of(rows: &[RunSummary]) -> Self {
        Self {
            seeds: rows.iter().map(|r| r.seed).collect(),
            rejections: rows.iter().map(|r| r.rejections).sum(),
            drops: rows.iter().map(|r| r.drops).sum(),
            handovers: rows.iter().map(|r| r.handovers).sum(),
            min_connected_bps: rows
                .iter()
                .filter_map(|r| r.min_connected_bps)
                .reduce(f64::min),
            peak_satellite_load: rows
                .iter()
                .map(|r| r.peak_satellite_load)
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: Aggregate,
    pub b: Aggregate,
}

impl Comparison {
    pub fn seed_mismatch(&self) -> bool {
        self.a.seeds != self.b.seeds
    }

    pub fn render(&self, label_a: &str, label_b: &str) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.0}")).unwrap_or_else(|| "-".into())
        }
        fn delta(a: Option<f64>, b: Option<f64>) -> String {
            match (a, b) {
                (Some(a), Some(b)) => format!("{:.0}", b - a),
                _ => "-".into(),
            }
        }
        let rows: [(&str, String, String, String); 5] = [
            (
                "rejections",
                self.a.rejections.to_string(),
                self.b.rejections.to_string(),
                (self.b.rejections as i64 - self.a.rejections as i64).to_string(),
            ),
            (
                "drops",
                self.a.drops.to_string(),
                self.b.drops.to_string(),
                (self.b.drops as i64 - self.a.drops as i64).to_string(),
            ),
            (
                "handovers",
                self.a.handovers.to_string(),
                self.b.handovers.to_string(),
                (self.b.handovers as i64 - self.a.handovers as i64).to_string(),
            ),
            (
                "min_connected_bps",
                opt(self.a.min_connected_bps),
                opt(self.b.min_connected_bps),
                delta(self.a.min_connected_bps, self.b.min_connected_bps),
            ),
            (
                "peak_satellite_load",
                format!("{:.4}", self.a.peak_satellite_load),
                format!("{:.4}", self.b.peak_satellite_load),
                format!(
                    "{:.4}",
                    self.b.peak_satellite_load - self.a.peak_satellite_load
                ),
            ),
        ];
        let mut out = String::new();
        if self.seed_mismatch() {
            let _ = writeln!(
                out,
                "warning: seed mismatch ({:?} vs {:?})",
                self.a.seeds, self.b.seeds
            );
        }
        let _ = writeln!(
            out,
            "{:<22}{:>20}{:>20}{:>16}",
            "metric", label_a, label_b, "delta"
        );
        for (name, a, b, d) in rows {
            let _ = writeln!(out, "{name:<22}{a:>20}{b:>20}{d:>16}");
        }
        out
    }
}

pub fn compare_dirs(a: &Path, b: &Path) -> Result<Comparison, CliError> {
    let ra = read_summary(&a.join("summary.csv"))?;
    let rb = read_summary(&b.join("summary.csv"))?;
    Ok(Comparison {
        a: Aggregate::of(&ra),
        b: Aggregate::of(&rb),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, drops: u64, min: Option<f64>) -> RunSummary {
        RunSummary {
            seed,
            ticks: 10,
            rejections: 2,
            drops,
            handovers: 0,
            min_connected_bps: min,
            peak_satellite_load: 0.5,
            hata_out_of_range: 0,
        }
    }

    #[test]
    fn aggregate_sums_and_extremes() {
        let a = Aggregate::of(&[row(0, 1, Some(5e6)), row(1, 2, Some(3e6)), row(2, 0, None)]);
        assert_eq!(a.seeds, vec![0, 1, 2]);
        assert_eq!(a.drops, 3);
        assert_eq!(a.rejections, 6);
        assert_eq!(a.min_connected_bps, Some(3e6));
    }

    #[test]
    fn mismatch_is_flagged() {
        let c = Comparison {
            a: Aggregate::of(&[row(0, 1, None)]),
            b: Aggregate::of(&[row(1, 1, None)]),
        };
        assert!(c.seed_mismatch());
        let text = c.render("a", "b");
        assert!(text.starts_with("warning: seed mismatch"));
        assert!(text.contains("drops"));
    }
}
