use super::{NetworkConfig, PowerGrid, RewardBreakdown};
use crate::autodiff::Tensor;

/// Jain's index `(Σx)² / (M·Σx²)`. Zero for an empty or all-zero set.
pub fn fairness_index(throughputs: &[f64]) -> f64 {
    let m = throughputs.len() as f64;
    let sum: f64 = throughputs.iter().sum();
    let sum_sq: f64 = throughputs.iter().map(|x| x * x).sum();
    if throughputs.is_empty() || sum_sq <= 0.0 {
        return 0.0;
    }
    // rounding can push perfectly equal inputs a hair above 1
    (sum * sum / (m * sum_sq)).min(1.0)
}

/// `c_p·ΣP + c_s·Σ|P − P_prev|`.
pub fn step_cost(p_now: &PowerGrid, p_prev: &PowerGrid, cfg: &NetworkConfig) -> f64 {
    let [c_p, c_s] = cfg.cost_coeffs;
    let total: f64 = p_now.data().iter().sum();
    let switching: f64 = p_now.data().iter().zip(p_prev.data()).map(|(a, b)| (a - b).abs()).sum();
    c_p * total + c_s * switching
}

/// Penalty plus (SINR, latency) violation counts. SINR violations are only
/// counted on active links; latency uses the post-step queue.
pub fn step_penalty(sinr_linear: &Tensor, p_safe: &PowerGrid, qos_next: &Tensor, cfg: &NetworkConfig) -> (f64, usize, usize) {
    let [p_sinr, p_lat] = cfg.penalty_coeffs;
    let sinr_violations = sinr_linear
        .data()
        .iter()
        .zip(p_safe.data())
        .filter(|(&s, &p)| p > 0.0 && s < cfg.sinr_min_linear)
        .count();
    let latency_violations = (0..qos_next.rows()).filter(|&u| qos_next.get(u, 0) > cfg.latency_max_ms).count();
    let penalty = p_sinr * sinr_violations as f64 + p_lat * latency_violations as f64;
    (penalty, sinr_violations, latency_violations)
}

/// `ω1·T[Mbps] + ω2·F − ω3·Cost − ω4·Penalty`.
pub fn compute_reward(parts: &RewardBreakdown, cfg: &NetworkConfig) -> f64 {
    let [w1, w2, w3, w4] = cfg.weights;
    w1 * (parts.throughput_bps / 1e6) + w2 * parts.fairness - w3 * parts.cost - w4 * parts.penalty
}
