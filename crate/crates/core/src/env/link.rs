//! Per-link quantities: power lookup, safety filter, user association, SINR,
//! Shannon throughput and the latency queue.

use super::channel::db_to_linear;
use super::{AllocationAction, NetworkConfig, PowerGrid};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub fn action_to_power(a: &AllocationAction, cfg: &NetworkConfig) -> Result<PowerGrid> {
    if a.n_bs != cfg.n_bs || a.n_bands != cfg.n_bands {
        return Err(Error::contract(format!(
            "action grid {}x{} does not match network {}x{}",
            a.n_bs, a.n_bands, cfg.n_bs, cfg.n_bands
        )));
    }
    let mut data = Vec::with_capacity(a.levels.len());
    for &level in &a.levels {
        let p = cfg
            .power_levels
            .get(level)
            .ok_or_else(|| Error::contract(format!("power level {level} out of range 0..{}", cfg.n_levels)))?;
        data.push(*p);
    }
    Tensor::new(a.n_bs, a.n_bands, data)
}

/// Zeroes every link whose current interference is not strictly below `i_max_w`.
pub fn apply_safety_filter(p: &PowerGrid, interference_w: &Tensor, i_max_w: f64) -> PowerGrid {
    p.zip_map(interference_w, |power, i| if i < i_max_w { power } else { 0.0 })
}

/// Which UE each link serves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    /// BS each UE attaches to.
    pub attached_bs: Vec<usize>,
    /// Intended user of every band of each BS; `None` when no UE attached.
    pub serving_ue: Vec<Option<usize>>,
}

impl Association {
    pub fn intended_user(&self, bs: usize) -> Option<usize> {
        self.serving_ue[bs]
    }
}

/// Max-gain attachment; each BS serves its strongest attached UE on all bands.
/// Ties go to the lower index.
pub fn associate_users(channel_db: &Tensor) -> Association {
    let (n_ue, n_bs) = (channel_db.rows(), channel_db.cols());
    let attached_bs: Vec<usize> = (0..n_ue)
        .map(|u| {
            let mut best = 0;
            for i in 1..n_bs {
                if channel_db.get(u, i) > channel_db.get(u, best) {
                    best = i;
                }
            }
            best
        })
        .collect();
    let serving_ue = (0..n_bs)
        .map(|i| {
            let mut best: Option<usize> = None;
            for u in (0..n_ue).filter(|&u| attached_bs[u] == i) {
                match best {
                    Some(b) if channel_db.get(u, i) <= channel_db.get(b, i) => {}
                    _ => best = Some(u),
                }
            }
            best
        })
        .collect();
    Association { attached_bs, serving_ue }
}

/// Linear SINR of every link; 0 on inactive links and on links without a user.
pub fn compute_sinr_grid(p_safe: &PowerGrid, channel_db: &Tensor, assoc: &Association, cfg: &NetworkConfig) -> Tensor {
    let (n_bs, n_bands) = (p_safe.rows(), p_safe.cols());
    let mut sinr = Tensor::zeros(n_bs, n_bands);
    for i in 0..n_bs {
        let Some(u) = assoc.intended_user(i) else { continue };
        for j in 0..n_bands {
            let p = p_safe.get(i, j);
            if p <= 0.0 {
                continue;
            }
            let signal = p * db_to_linear(channel_db.get(u, i));
            let mut interference = 0.0;
            for k in (0..n_bs).filter(|&k| k != i) {
                interference += p_safe.get(k, j) * db_to_linear(channel_db.get(u, k));
            }
            sinr.set(i, j, signal / (interference + cfg.noise_power_w));
        }
    }
    sinr
}

/// Total Shannon throughput over active links, and each active link's share in
/// row-major link order.
pub fn throughput_bps(sinr_linear: &Tensor, p_safe: &PowerGrid, cfg: &NetworkConfig) -> (f64, Vec<f64>) {
    let per_link: Vec<f64> = sinr_linear
        .data()
        .iter()
        .zip(p_safe.data())
        .filter(|(_, &p)| p > 0.0)
        .map(|(&s, _)| cfg.bandwidth_hz * (1.0 + s).log2())
        .collect();
    (per_link.iter().sum(), per_link)
}

/// Served rate per UE: sum over the links whose intended user it is.
pub fn served_throughput(sinr_linear: &Tensor, assoc: &Association, n_ue: usize, cfg: &NetworkConfig) -> Vec<f64> {
    let mut served = vec![0.0; n_ue];
    for (i, user) in assoc.serving_ue.iter().enumerate() {
        let Some(u) = *user else { continue };
        for j in 0..sinr_linear.cols() {
            served[u] += cfg.bandwidth_hz * (1.0 + sinr_linear.get(i, j)).log2();
        }
    }
    served
}

/// Additive latency queue: grows by `latency_step_ms` while a UE is served
/// below demand, drains by the same step otherwise, floored at zero.
pub fn update_qos(qos: &Tensor, sinr_linear: &Tensor, assoc: &Association, cfg: &NetworkConfig) -> Tensor {
    let served = served_throughput(sinr_linear, assoc, qos.rows(), cfg);
    let mut next = qos.clone();
    for (u, &rate) in served.iter().enumerate() {
        let delta = if rate < cfg.qos_demand_bps { cfg.latency_step_ms } else { -cfg.latency_step_ms };
        next.set(u, 0, (qos.get(u, 0) + delta).max(0.0));
        next.set(u, 1, rate);
    }
    next
}
