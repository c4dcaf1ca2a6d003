use std::collections::BTreeSet;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static parameters of the simulated network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub n_bs: usize,
    pub n_ue: usize,
    pub n_bands: usize,
    pub n_levels: usize,
    /// Transmit power of each level, watts. Ascending, first entry 0.
    pub power_levels: Vec<f64>,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    /// Path loss at the 1 m reference distance, dB.
    pub k_ref_db: f64,
    pub eta: f64,
    pub shadow_sigma_db: f64,
    pub fading_kappa: f64,
    pub fading_sigma_db: f64,
    pub i_max_w: f64,
    pub sinr_min_linear: f64,
    pub latency_max_ms: f64,
    pub episode_len: usize,
    /// (throughput, fairness, cost, penalty)
    pub weights: [f64; 4],
    /// (power, switching)
    pub cost_coeffs: [f64; 2],
    /// (sinr, latency)
    pub penalty_coeffs: [f64; 2],
    /// Per-UE demand for the latency queue, bps.
    pub qos_demand_bps: f64,
    /// Latency increment / decrement per step, ms.
    pub latency_step_ms: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            n_bs: 3,
            n_ue: 10,
            n_bands: 5,
            n_levels: 4,
            power_levels: vec![0.0, 0.1, 0.5, 1.0],
            bandwidth_hz: 1e6,
            noise_power_w: 1e-13,
            k_ref_db: -30.0,
            eta: 3.0,
            shadow_sigma_db: 2.0,
            fading_kappa: 0.9,
            fading_sigma_db: 2.0,
            i_max_w: 1e-6,
            sinr_min_linear: 1.0,
            latency_max_ms: 100.0,
            episode_len: 50,
            weights: [1.0, 0.5, 0.1, 1.0],
            cost_coeffs: [0.1, 0.05],
            penalty_coeffs: [1.0, 1.0],
            qos_demand_bps: 1e6,
            latency_step_ms: 5.0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(m));
        if self.n_bs < 1 || self.n_ue < 1 || self.n_bands < 1 {
            return fail("n_bs, n_ue and n_bands must be at least 1");
        }
        if self.n_levels < 2 {
            return fail("n_levels must be at least 2");
        }
        if self.power_levels.len() != self.n_levels {
            return fail("power_levels must have n_levels entries");
        }
        if self.power_levels[0] != 0.0 {
            return fail("power_levels[0] must be 0");
        }
        if self.power_levels.windows(2).any(|w| !(w[0] < w[1])) {
            return fail("power_levels must be strictly ascending");
        }
        if !(0.0..=1.0).contains(&self.fading_kappa) {
            return fail("fading_kappa must lie in [0, 1]");
        }
        if !(self.bandwidth_hz > 0.0) || !(self.noise_power_w > 0.0) {
            return fail("bandwidth_hz and noise_power_w must be positive");
        }
        if self.episode_len < 1 {
            return fail("episode_len must be at least 1");
        }
        let nonneg = [
            self.shadow_sigma_db,
            self.fading_sigma_db,
            self.i_max_w,
            self.sinr_min_linear,
            self.latency_max_ms,
            self.qos_demand_bps,
            self.latency_step_ms,
        ]
        .into_iter()
        .chain(self.weights)
        .chain(self.cost_coeffs)
        .chain(self.penalty_coeffs);
        for v in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return fail("coefficients, thresholds and sigmas must be finite and nonnegative");
            }
        }
        Ok(())
    }

    pub fn n_links(&self) -> usize {
        self.n_bs * self.n_bands
    }
}

/// Parameters of the task distribution `p(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskDistribution {
    /// Side of the square placement arena, meters.
    pub arena_m: f64,
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub sigma_lo_db: f64,
    pub sigma_hi_db: f64,
    /// Initial interference entries are drawn from `U[0, i0_max_w]`.
    pub i0_max_w: f64,
}

impl Default for TaskDistribution {
    fn default() -> Self {
        TaskDistribution {
            arena_m: 500.0,
            eta_lo: 2.5,
            eta_hi: 3.5,
            sigma_lo_db: 1.0,
            sigma_hi_db: 3.0,
            i0_max_w: 2e-6,
        }
    }
}

impl TaskDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.arena_m > 0.0) {
            return Err(Error::config("arena_m must be positive"));
        }
        if !(self.eta_lo <= self.eta_hi) || !(self.sigma_lo_db <= self.sigma_hi_db) {
            return Err(Error::config("distribution ranges must satisfy lo <= hi"));
        }
        if !(self.sigma_lo_db >= 0.0) || !(self.i0_max_w >= 0.0) {
            return Err(Error::config("sigma and i0_max_w must be nonnegative"));
        }
        Ok(())
    }
}

/// Environment file: network constants plus task-distribution parameters,
/// all as flat `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvConfig {
    pub network: NetworkConfig,
    pub tasks: TaskDistribution,
}

impl EnvConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::config(format!("{e}")))?;
        let known = known_keys::<NetworkConfig>()
            .into_iter()
            .chain(known_keys::<TaskDistribution>())
            .collect::<BTreeSet<_>>();
        reject_unknown(&table, &known)?;
        let cfg = EnvConfig { network: from_table(&table)?, tasks: from_table(&table)? };
        cfg.network.validate()?;
        cfg.tasks.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// Keys a `#[serde(default)]` struct accepts, taken from its serialized default.
pub(crate) fn known_keys<T: Default + Serialize>() -> Vec<String> {
    match toml::Value::try_from(T::default()) {
        Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

pub(crate) fn reject_unknown(table: &toml::Table, known: &BTreeSet<String>) -> Result<()> {
    for key in table.keys() {
        if !known.contains(key) {
            return Err(Error::config(format!("unknown key `{key}`")));
        }
    }
    Ok(())
}

/// Deserializes the subset of `table` that `T` knows about.
pub(crate) fn from_table<T: DeserializeOwned + Default + Serialize>(table: &toml::Table) -> Result<T> {
    let known: BTreeSet<String> = known_keys::<T>().into_iter().collect();
    let subset: toml::Table =
        table.iter().filter(|(k, _)| known.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
    subset.try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        NetworkConfig::default().validate().unwrap();
        TaskDistribution::default().validate().unwrap();
    }

    #[test]
    fn flat_file_overrides_and_rejects_unknown() {
        let cfg = EnvConfig::from_toml_str("n_bs = 2\neta_lo = 2.0\nweights = [1.0, 0.0, 0.0, 0.0]\n").unwrap();
        assert_eq!(cfg.network.n_bs, 2);
        assert_eq!(cfg.network.n_ue, 10);
        assert_eq!(cfg.tasks.eta_lo, 2.0);
        assert_eq!(cfg.network.weights, [1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(EnvConfig::from_toml_str("bogus = 1\n"), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_power_levels_rejected() {
        let mut cfg = NetworkConfig::default();
        cfg.power_levels = vec![0.0, 0.5, 0.5, 1.0];
        assert!(cfg.validate().is_err());
        cfg.power_levels = vec![0.1, 0.2, 0.5, 1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.fading_kappa = 1.5;
        assert!(cfg.validate().is_err());
    }
}
