use super::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageEstimate {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

const NORMALIZE_EPS: f64 = 1e-8;

impl AdvantageEstimate {
    /// Advantages shifted to zero mean and scaled to unit variance.
    pub fn normalized_advantages(&self) -> Vec<f64> {
        normalize(&self.advantages)
    }

    pub fn concat(parts: &[AdvantageEstimate]) -> AdvantageEstimate {
        AdvantageEstimate {
            advantages: parts.iter().flat_map(|p| p.advantages.iter().copied()).collect(),
            returns: parts.iter().flat_map(|p| p.returns.iter().copied()).collect(),
        }
    }
}

pub fn normalize(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + NORMALIZE_EPS;
    xs.iter().map(|x| (x - mean) / std).collect()
}

/// Generalized advantage estimation, backward over the trajectory.
/// `returns = advantages + values`.
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> AdvantageEstimate {
    compute_gae_scaled(traj, gamma, lambda, 1.0)
}

/// [`compute_gae`] with every reward multiplied by `reward_scale`; values are
/// taken to be in the scaled units already.
pub fn compute_gae_scaled(traj: &Trajectory, gamma: f64, lambda: f64, reward_scale: f64) -> AdvantageEstimate {
    let n = traj.steps.len();
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let step = &traj.steps[t];
        let next_value = if step.done {
            0.0
        } else if t + 1 < n {
            traj.steps[t + 1].value
        } else {
            traj.bootstrap_value
        };
        let carry = if step.done { 0.0 } else { next_adv };
        let delta = reward_scale * step.reward + gamma * next_value - step.value;
        advantages[t] = delta + gamma * lambda * carry;
        next_adv = advantages[t];
    }
    let returns = advantages.iter().zip(&traj.steps).map(|(a, s)| a + s.value).collect();
    AdvantageEstimate { advantages, returns }
}
