//! Logistic-normal prior obtained by moment-matching a Dirichlet, and the
//! closed-form diagonal-Gaussian KL against it.

use alloc::vec;
use alloc::vec::Vec;

use crate::numeric::{exp, ln};

#[derive(Clone, Debug, PartialEq)]
pub struct PriorParams {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Laplace approximation of `Dirichlet(alpha)` in softmax basis:
///
/// `mu_k  = ln a_k - (1/K) sum_i ln a_i`
/// `var_k = (1/a_k)(1 - 2/K) + (1/K^2) sum_i 1/a_i`
pub fn dirichlet_prior(alpha: &[f64]) -> PriorParams {
    let k = alpha.len();
    // One topic degenerates to zero variance; the model requires K >= 2.
    debug_assert!(k >= 2);
    debug_assert!(alpha.iter().all(|&a| a > 0.0));
    let kf = k as f64;
    let mean_log: f64 = alpha.iter().map(|&a| ln(a)).sum::<f64>() / kf;
    let sum_inv: f64 = alpha.iter().map(|&a| 1.0 / a).sum();
    let mean = alpha.iter().map(|&a| ln(a) - mean_log).collect();
    let var = alpha
        .iter()
        .map(|&a| (1.0 / a) * (1.0 - 2.0 / kf) + sum_inv / (kf * kf))
        .collect();
    PriorParams { mean, var }
}

/// Symmetric special case used by default (`alpha = 1/K` unless configured).
pub fn symmetric_dirichlet_prior(alpha: f64, k: usize) -> PriorParams {
    dirichlet_prior(&vec![alpha; k])
}

/// `KL( N(mu, diag(exp(logvar))) || N(prior.mean, diag(prior.var)) )` for one
/// document.
pub fn kl_diag_gaussian(mu: &[f64], logvar: &[f64], prior: &PriorParams) -> f64 {
    debug_assert_eq!(mu.len(), logvar.len());
    debug_assert_eq!(mu.len(), prior.mean.len());
    let mut kl = 0.0;
    for i in 0..mu.len() {
        let pv = prior.var[i];
        let diff = mu[i] - prior.mean[i];
        kl += exp(logvar[i]) / pv + diff * diff / pv - 1.0 + ln(pv) - logvar[i];
    }
    0.5 * kl
}

/// Gradients of [`kl_diag_gaussian`] w.r.t. `mu` and `logvar`, scaled by
/// `scale`, accumulated into the output slices.
pub fn kl_backward(
    mu: &[f64],
    logvar: &[f64],
    prior: &PriorParams,
    scale: f64,
    dmu: &mut [f64],
    dlogvar: &mut [f64],
) {
    for i in 0..mu.len() {
        let pv = prior.var[i];
        dmu[i] += scale * (mu[i] - prior.mean[i]) / pv;
        dlogvar[i] += scale * 0.5 * (exp(logvar[i]) / pv - 1.0);
    }
}
