use serde::{Deserialize, Serialize};

use super::Transition;

/// Per-episode performance summary. Counts are summed over the episode,
/// throughput and fairness are per-step means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub sinr_violations: f64,
    pub throughput_mbps: f64,
    pub latency_violations: f64,
    pub fairness: f64,
}

impl EpisodeMetrics {
    pub const CSV_HEADER: [&'static str; 5] =
        ["episode", "sinr_violations", "throughput_mbps", "latency_violations", "fairness"];

    pub fn from_steps(episode: usize, steps: &[Transition]) -> EpisodeMetrics {
        if steps.is_empty() {
            return EpisodeMetrics { episode, ..Default::default() };
        }
        let n = steps.len() as f64;
        EpisodeMetrics {
            episode,
            sinr_violations: steps.iter().map(|s| s.parts.sinr_violations as f64).sum(),
            throughput_mbps: steps.iter().map(|s| s.parts.throughput_bps).sum::<f64>() / n / 1e6,
            latency_violations: steps.iter().map(|s| s.parts.latency_violations as f64).sum(),
            fairness: steps.iter().map(|s| s.parts.fairness).sum::<f64>() / n,
        }
    }

    /// Field-wise mean, tagged with `episode`.
    pub fn mean(episode: usize, items: &[EpisodeMetrics]) -> EpisodeMetrics {
        if items.is_empty() {
            return EpisodeMetrics { episode, ..Default::default() };
        }
        let n = items.len() as f64;
        let avg = |f: fn(&EpisodeMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        EpisodeMetrics {
            episode,
            sinr_violations: avg(|m| m.sinr_violations),
            throughput_mbps: avg(|m| m.throughput_mbps),
            latency_violations: avg(|m| m.latency_violations),
            fairness: avg(|m| m.fairness),
        }
    }

    pub fn total_violations(&self) -> f64 {
        self.sinr_violations + self.latency_violations
    }

    pub fn csv_record(&self) -> [String; 5] {
        [
            self.episode.to_string(),
            format!("{}", self.sinr_violations),
            format!("{}", self.throughput_mbps),
            format!("{}", self.latency_violations),
            format!("{}", self.fairness),
        ]
    }
}
