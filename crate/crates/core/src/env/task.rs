use rand::Rng;

use super::{NetworkConfig, TaskDistribution, TaskSpec};

/// Draws a task: uniform placements in the arena, uniform path-loss exponent
/// and shadowing σ, uniform initial interference in `[0, i0_max_w]`.
pub fn sample_task<R: Rng + ?Sized>(dist: &TaskDistribution, cfg: &NetworkConfig, seed: u64, rng: &mut R) -> TaskSpec {
    let point = |rng: &mut R| [rng.gen::<f64>() * dist.arena_m, rng.gen::<f64>() * dist.arena_m];
    let bs_positions = (0..cfg.n_bs).map(|_| point(rng)).collect();
    let ue_positions = (0..cfg.n_ue).map(|_| point(rng)).collect();
    let eta_task = uniform(rng, dist.eta_lo, dist.eta_hi);
    let shadow_sigma_task_db = uniform(rng, dist.sigma_lo_db, dist.sigma_hi_db);
    let initial_interference_w = (0..cfg.n_bs)
        .map(|_| (0..cfg.n_bands).map(|_| rng.gen::<f64>() * dist.i0_max_w).collect())
        .collect();
    TaskSpec { seed, bs_positions, ue_positions, initial_interference_w, eta_task, shadow_sigma_task_db }
}

/// Task for `seed`, drawn from its own generator.
pub fn task_from_seed(dist: &TaskDistribution, cfg: &NetworkConfig, seed: u64) -> TaskSpec {
    sample_task(dist, cfg, seed, &mut crate::rng::stream(seed, 0x7A5C))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_task() {
        let (d, c) = (TaskDistribution::default(), NetworkConfig::default());
        assert_eq!(task_from_seed(&d, &c, 42), task_from_seed(&d, &c, 42));
        assert_ne!(task_from_seed(&d, &c, 42), task_from_seed(&d, &c, 43));
    }

    #[test]
    fn ranges_respected() {
        let (d, c) = (TaskDistribution::default(), NetworkConfig::default());
        for seed in 0..200 {
            let t = task_from_seed(&d, &c, seed);
            t.validate(&c).unwrap();
            assert!(t.eta_task >= d.eta_lo && t.eta_task <= d.eta_hi);
            assert!(t.shadow_sigma_task_db >= d.sigma_lo_db && t.shadow_sigma_task_db <= d.sigma_hi_db);
            for p in t.bs_positions.iter().chain(&t.ue_positions) {
                assert!(p[0] >= 0.0 && p[0] <= d.arena_m && p[1] >= 0.0 && p[1] <= d.arena_m);
            }
        }
    }

    #[test]
    fn initial_interference_mean() {
        let (d, c) = (TaskDistribution::default(), NetworkConfig::default());
        let values: Vec<f64> =
            (0..1000).flat_map(|s| task_from_seed(&d, &c, s).initial_interference_w.concat()).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((mean / (d.i0_max_w / 2.0) - 1.0).abs() < 0.05, "mean {mean}");
    }
}
