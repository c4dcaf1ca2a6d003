//! Propagation: log-distance path loss, shadowing, AR(1) fading and the
//! inter-BS interference map.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{NetworkConfig, PowerGrid, TaskSpec};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Distances below the 1 m reference are clamped to it.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// `k_ref_db − 10·eta·log10(d)`.
pub fn path_loss_db(d: f64, k_ref_db: f64, eta: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("path loss needs d > 0, got {d}")));
    }
    Ok(k_ref_db - 10.0 * eta * d.log10())
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn clamped_path_loss(a: [f64; 2], b: [f64; 2], k_ref_db: f64, eta: f64) -> f64 {
    path_loss_db(distance(a, b).max(MIN_DISTANCE_M), k_ref_db, eta).expect("clamped distance is positive")
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Deterministic part `L` of the UE×BS gain matrix for a task.
pub fn mean_channel_db(task: &TaskSpec, cfg: &NetworkConfig) -> Tensor {
    let mut c = Tensor::zeros(cfg.n_ue, cfg.n_bs);
    for (u, &ue) in task.ue_positions.iter().enumerate() {
        for (i, &bs) in task.bs_positions.iter().enumerate() {
            c.set(u, i, clamped_path_loss(ue, bs, cfg.k_ref_db, task.eta_task));
        }
    }
    c
}

/// `C_0 = L + N(0, σ_task²)`, sampled row-major.
pub fn init_channel<R: Rng + ?Sized>(task: &TaskSpec, cfg: &NetworkConfig, rng: &mut R) -> Tensor {
    let sigma = task.shadow_sigma_task_db;
    mean_channel_db(task, cfg).map_with_rng(rng, |l, z| l + sigma * z)
}

/// Elementwise AR(1): `κ·C + √(1−κ²)·N(0, σ_f²)`.
pub fn fading_step<R: Rng + ?Sized>(channel_db: &Tensor, kappa: f64, sigma_f_db: f64, rng: &mut R) -> Tensor {
    let innovation = (1.0 - kappa * kappa).max(0.0).sqrt() * sigma_f_db;
    channel_db.map_with_rng(rng, |c, z| kappa * c + innovation * z)
}

/// `I'(i,j) = Σ_{k≠i} P(k,j)·h(d_ik)` with `h` the linear path gain.
pub fn update_interference(p_safe: &PowerGrid, bs_positions: &[[f64; 2]], cfg: &NetworkConfig, eta: f64) -> Tensor {
    let n_bs = bs_positions.len();
    let mut out = Tensor::zeros(n_bs, p_safe.cols());
    for i in 0..n_bs {
        for k in 0..n_bs {
            if k == i {
                continue;
            }
            let h = db_to_linear(clamped_path_loss(bs_positions[i], bs_positions[k], cfg.k_ref_db, eta));
            for j in 0..p_safe.cols() {
                let v = out.get(i, j) + p_safe.get(k, j) * h;
                out.set(i, j, v);
            }
        }
    }
    out
}

trait MapWithRng {
    fn map_with_rng<R: Rng + ?Sized>(&self, rng: &mut R, f: impl Fn(f64, f64) -> f64) -> Tensor;
}

impl MapWithRng for Tensor {
    fn map_with_rng<R: Rng + ?Sized>(&self, rng: &mut R, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let mut out = self.clone();
        for v in out.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = f(*v, z);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn single_link_task(d: f64, sigma: f64) -> (TaskSpec, NetworkConfig) {
        let cfg = NetworkConfig { n_bs: 1, n_ue: 1, n_bands: 1, ..NetworkConfig::default() };
        let task = TaskSpec {
            seed: 0,
            bs_positions: vec![[0.0, 0.0]],
            ue_positions: vec![[d, 0.0]],
            initial_interference_w: vec![vec![0.0]],
            eta_task: 3.0,
            shadow_sigma_task_db: sigma,
        };
        (task, cfg)
    }

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss_db(1.0, -30.0, 3.0).unwrap(), -30.0);
        assert!((path_loss_db(10.0, -30.0, 3.0).unwrap() + 60.0).abs() < 1e-12);
        assert!((path_loss_db(100.0, -30.0, 2.0).unwrap() + 70.0).abs() < 1e-12);
        assert!(matches!(path_loss_db(0.0, -30.0, 3.0), Err(Error::Domain(_))));
        assert!(path_loss_db(-1.0, -30.0, 3.0).is_err());
    }

    #[test]
    fn zero_noise_channel_is_exact() {
        let (task, cfg) = single_link_task(10.0, 0.0);
        let c = init_channel(&task, &cfg, &mut seeded(1));
        assert!((c.get(0, 0) + 60.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_positions_clamp_to_reference() {
        let (task, cfg) = single_link_task(0.0, 0.0);
        let c = init_channel(&task, &cfg, &mut seeded(1));
        assert_eq!(c.get(0, 0), -30.0);
    }

    #[test]
    fn channel_is_deterministic_per_seed() {
        let (task, cfg) = single_link_task(50.0, 2.0);
        assert_eq!(init_channel(&task, &cfg, &mut seeded(9)), init_channel(&task, &cfg, &mut seeded(9)));
    }

    #[test]
    fn shadowing_sample_mean() {
        let (task, cfg) = single_link_task(10.0, 2.0);
        let mut rng = seeded(3);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| init_channel(&task, &cfg, &mut rng).get(0, 0)).sum::<f64>() / n as f64;
        // 3 standard errors of the mean: 3σ/√n = 3·2/100
        assert!((mean + 60.0).abs() < 3.0 * 2.0 / 100.0, "mean {mean}");
    }

    #[test]
    fn fading_extremes() {
        let c = Tensor::new(2, 2, vec![-80.0, -90.0, -70.0, -60.0]).unwrap();
        assert_eq!(fading_step(&c, 1.0, 2.0, &mut seeded(0)), c);
        // κ = 0 discards the input entirely
        let other = Tensor::zeros(2, 2);
        assert_eq!(fading_step(&c, 0.0, 2.0, &mut seeded(5)), fading_step(&other, 0.0, 2.0, &mut seeded(5)));
    }

    #[test]
    fn fading_stationary_variance() {
        let mut rng = seeded(11);
        let mut x = Tensor::zeros(1, 1);
        let (mut sum, mut sq) = (0.0, 0.0);
        let n = 100_000;
        for _ in 0..1000 {
            x = fading_step(&x, 0.9, 2.0, &mut rng);
        }
        for _ in 0..n {
            x = fading_step(&x, 0.9, 2.0, &mut rng);
            sum += x.item();
            sq += x.item() * x.item();
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!((var / 4.0 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn interference_two_bs_at_ten_meters() {
        let cfg = NetworkConfig { n_bs: 2, n_bands: 1, ..NetworkConfig::default() };
        let p = Tensor::new(2, 1, vec![1.0, 1.0]).unwrap();
        let i = update_interference(&p, &[[0.0, 0.0], [10.0, 0.0]], &cfg, 3.0);
        assert!((i.get(0, 0) - 1e-6).abs() < 1e-18);
        assert!((i.get(1, 0) - 1e-6).abs() < 1e-18);
        let zero = update_interference(&Tensor::zeros(2, 1), &[[0.0, 0.0], [10.0, 0.0]], &cfg, 3.0);
        assert_eq!(zero.data(), &[0.0, 0.0]);
    }

    #[test]
    fn interference_three_bs_brute_force() {
        let cfg = NetworkConfig { n_bs: 3, n_bands: 2, ..NetworkConfig::default() };
        let pos = [[0.0, 0.0], [30.0, 40.0], [100.0, 0.0]];
        let p = Tensor::new(3, 2, vec![0.1, 1.0, 0.5, 0.0, 1.0, 0.1]).unwrap();
        let i = update_interference(&p, &pos, &cfg, 2.8);
        for bs in 0..3 {
            for band in 0..2 {
                let mut expect = 0.0;
                for k in (0..3).filter(|&k| k != bs) {
                    let d = ((pos[bs][0] - pos[k][0]).powi(2) + (pos[bs][1] - pos[k][1]).powi(2)).sqrt();
                    expect += p.get(k, band) * 10f64.powf((-30.0 - 28.0 * d.log10()) / 10.0);
                }
                assert!((i.get(bs, band) - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
            }
        }
    }
}
