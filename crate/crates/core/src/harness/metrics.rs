use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rl::EpisodeMetrics;

/// Evaluation rows of one run, in episode order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<EpisodeMetrics>,
}

impl MetricsLog {
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(EpisodeMetrics::CSV_HEADER)?;
        for row in &self.rows {
            w.write_record(row.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(File::create(path)?)
    }

    pub fn read<R: Read>(input: R) -> Result<MetricsLog> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != EpisodeMetrics::CSV_HEADER {
            return Err(Error::Schema(format!("unexpected metrics header {header:?}")));
        }
        let mut rows = Vec::new();
        for record in r.deserialize() {
            let row: EpisodeMetrics = record.map_err(|e| Error::Schema(e.to_string()))?;
            rows.push(row);
        }
        Ok(MetricsLog { rows })
    }

    pub fn load(path: &Path) -> Result<MetricsLog> {
        let file = File::open(path).map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
        Self::read(file)
    }

    /// Mean over the last 10% of rows (at least one).
    pub fn final_window(&self) -> EpisodeMetrics {
        let n = self.rows.len();
        let k = n.div_ceil(10).max(1).min(n);
        let episode = self.rows.last().map_or(0, |r| r.episode);
        EpisodeMetrics::mean(episode, &self.rows[n - k..])
    }

    pub fn peak_throughput(&self) -> f64 {
        self.rows.iter().map(|r| r.throughput_mbps).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-run line of the comparison summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub final_window: EpisodeMetrics,
    pub peak_throughput_mbps: f64,
    /// Final-window differences against the first run.
    pub delta_throughput_mbps: f64,
    pub delta_violations: f64,
    pub delta_fairness: f64,
}

const METRICS: [(&str, fn(&EpisodeMetrics) -> f64); 4] = [
    ("sinr_violations", |m| m.sinr_violations),
    ("throughput_mbps", |m| m.throughput_mbps),
    ("latency_violations", |m| m.latency_violations),
    ("fairness", |m| m.fairness),
];

fn label_for(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    match path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
        Some(dir) if stem == "metrics" => dir.to_owned(),
        _ => stem.to_owned(),
    }
}

/// Reads the logs, writes `<metric>.csv` (episode axis × one column per
/// run) and `summary.csv` into `out_dir`, and returns the summary.
pub fn compare_report(paths: &[PathBuf], out_dir: &Path) -> Result<Vec<SummaryRow>> {
    if paths.len() < 2 {
        return Err(Error::config("compare needs at least two metrics logs"));
    }
    let mut labels: Vec<String> = Vec::new();
    let mut logs = Vec::new();
    for path in paths {
        let base = label_for(path);
        let mut label = base.clone();
        let mut n = 2;
        while labels.contains(&label) {
            label = format!("{base}#{n}");
            n += 1;
        }
        labels.push(label);
        logs.push(MetricsLog::load(path)?);
    }
    std::fs::create_dir_all(out_dir)?;

    let episodes: BTreeSet<usize> = logs.iter().flat_map(|l| l.rows.iter().map(|r| r.episode)).collect();
    let indexed: Vec<BTreeMap<usize, &EpisodeMetrics>> =
        logs.iter().map(|l| l.rows.iter().map(|r| (r.episode, r)).collect()).collect();
    for (metric, get) in METRICS {
        let mut w = csv::Writer::from_path(out_dir.join(format!("{metric}.csv")))?;
        w.write_record(std::iter::once("episode").chain(labels.iter().map(String::as_str)))?;
        for &ep in &episodes {
            let mut record = vec![ep.to_string()];
            record.extend(indexed.iter().map(|m| m.get(&ep).map_or(String::new(), |r| format!("{}", get(r)))));
            w.write_record(&record)?;
        }
        w.flush()?;
    }

    let reference = logs[0].final_window();
    let rows: Vec<SummaryRow> = labels
        .into_iter()
        .zip(&logs)
        .map(|(label, log)| {
            let fw = log.final_window();
            SummaryRow {
                label,
                final_window: fw,
                peak_throughput_mbps: log.peak_throughput(),
                delta_throughput_mbps: fw.throughput_mbps - reference.throughput_mbps,
                delta_violations: fw.total_violations() - reference.total_violations(),
                delta_fairness: fw.fairness - reference.fairness,
            }
        })
        .collect();

    let mut w = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    w.write_record([
        "run",
        "final_sinr_violations",
        "final_throughput_mbps",
        "final_latency_violations",
        "final_fairness",
        "peak_throughput_mbps",
        "delta_throughput_mbps",
        "delta_violations",
        "delta_fairness",
    ])?;
    for r in &rows {
        let fw = &r.final_window;
        w.write_record([
            r.label.clone(),
            format!("{}", fw.sinr_violations),
            format!("{}", fw.throughput_mbps),
            format!("{}", fw.latency_violations),
            format!("{}", fw.fairness),
            format!("{}", r.peak_throughput_mbps),
            format!("{}", r.delta_throughput_mbps),
            format!("{}", r.delta_violations),
            format!("{}", r.delta_fairness),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}
