//! Factored categorical action head: each link draws its power level from
//! an independent K-way softmax.

use rand::Rng;

use crate::autodiff::Tensor;
use crate::env::AllocationAction;
use crate::error::{Error, Result};

/// Samples one level per row of `logits` (`n_cells × K`) and returns the
/// action with its joint log-probability.
pub fn sample_action<R: Rng + ?Sized>(
    logits: &Tensor,
    n_bs: usize,
    n_bands: usize,
    rng: &mut R,
) -> Result<(AllocationAction, f64)> {
    if !logits.all_finite() {
        return Err(Error::Divergence("non-finite policy logits".into()));
    }
    if logits.rows() != n_bs * n_bands {
        return Err(Error::shape(format!("{} logit rows for {} links", logits.rows(), n_bs * n_bands)));
    }
    let log_probs = logits.log_softmax_rows();
    let mut levels = Vec::with_capacity(logits.rows());
    let mut joint = 0.0;
    for cell in 0..logits.rows() {
        let row = log_probs.row_slice(cell);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = row.len() - 1;
        for (k, lp) in row.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                pick = k;
                break;
            }
        }
        levels.push(pick);
        joint += row[pick];
    }
    Ok((AllocationAction::new(n_bs, n_bands, levels)?, joint))
}

/// Joint log-probability of `levels` under `logits`.
pub fn action_log_prob(logits: &Tensor, levels: &[usize]) -> f64 {
    let lp = logits.log_softmax_rows();
    levels.iter().enumerate().map(|(cell, &k)| lp.get(cell, k)).sum()
}

/// Sum of per-cell entropies.
pub fn policy_entropy(logits: &Tensor) -> f64 {
    let lp = logits.log_softmax_rows();
    -lp.data().iter().map(|&l| l.exp() * l).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn saturated_logit_is_always_chosen() {
        let mut logits = Tensor::zeros(6, 4);
        for cell in 0..6 {
            logits.set(cell, cell % 4, 1e6);
        }
        let mut rng = seeded(0);
        for _ in 0..100 {
            let (a, lp) = sample_action(&logits, 2, 3, &mut rng).unwrap();
            assert!(a.levels.iter().enumerate().all(|(c, &k)| k == c % 4));
            assert!(lp.abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_logits_chi_squared() {
        let logits = Tensor::zeros(1, 4);
        let mut rng = seeded(17);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_action(&logits, 1, 1, &mut rng).unwrap().0.levels[0]] += 1;
        }
        let expect = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 3 degrees of freedom, 0.999 quantile
        assert!(chi2 < 16.27, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn log_prob_matches_direct_computation() {
        let logits = Tensor::new(2, 3, vec![0.5, -1.0, 2.0, 0.0, 0.3, -0.3]).unwrap();
        let (a, lp) = sample_action(&logits, 1, 2, &mut seeded(3)).unwrap();
        let mut direct = 0.0;
        for (cell, &k) in a.levels.iter().enumerate() {
            let row = logits.row_slice(cell);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            direct += (row[k].exp() / z).ln();
        }
        assert!((lp - direct).abs() < 1e-12);
        assert!((action_log_prob(&logits, &a.levels) - lp).abs() < 1e-15);
    }

    #[test]
    fn non_finite_logits_rejected() {
        let logits = Tensor::new(1, 2, vec![f64::NAN, 0.0]).unwrap();
        assert!(sample_action(&logits, 1, 1, &mut seeded(0)).is_err());
    }

    #[test]
    fn entropy_bounds() {
        let uniform = Tensor::zeros(5, 4);
        assert!((policy_entropy(&uniform) - 5.0 * 4f64.ln()).abs() < 1e-12);
        let peaked = Tensor::new(1, 4, vec![50.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(policy_entropy(&peaked) >= 0.0 && policy_entropy(&peaked) < 1e-15);
    }
}
