//! Feature normalization over the batch axis with train/eval statistics.

use alloc::vec;
use alloc::vec::Vec;

use crate::mat::Mat;
use crate::model::params::BatchNorm;
use crate::numeric::sqrt;

/// Epsilon inside the variance square root.
pub const BN_EPS: f64 = 1e-3;
/// Running-statistics decay.
pub const BN_DECAY: f64 = 0.999;

/// What the backward pass needs to invert the normalization.
#[derive(Clone, Debug)]
pub struct BnCache {
    pub xhat: Mat,
    pub inv_std: Vec<f64>,
    /// Biased batch moments when `batch_stats`, running moments otherwise.
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub batch_stats: bool,
}

/// Normalizes each feature column of `x` (rows are batch items).
///
/// With `batch_stats` the biased per-batch moments are used (train mode);
/// otherwise the layer is the affine map given by its running statistics.
pub fn bn_forward(x: &Mat, bn: &BatchNorm, batch_stats: bool) -> (Mat, BnCache) {
    let (n, d) = (x.rows(), x.cols());
    debug_assert_eq!(d, bn.gamma.len());
    let (mean, var) = if batch_stats {
        let mut mean = vec![0.0; d];
        for r in 0..n {
            for (m, &v) in mean.iter_mut().zip(x.row(r).iter()) {
                *m += v;
            }
        }
        let inv_n = 1.0 / n as f64;
        mean.iter_mut().for_each(|m| *m *= inv_n);
        let mut var = vec![0.0; d];
        for r in 0..n {
            for ((vv, &xv), &m) in var.iter_mut().zip(x.row(r).iter()).zip(mean.iter()) {
                let diff = xv - m;
                *vv += diff * diff;
            }
        }
        var.iter_mut().for_each(|v| *v *= inv_n);
        (mean, var)
    } else {
        (bn.running_mean.clone(), bn.running_var.clone())
    };

    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / sqrt(v + BN_EPS)).collect();
    let mut xhat = Mat::zeros(n, d);
    let mut y = Mat::zeros(n, d);
    for r in 0..n {
        let xr = x.row(r);
        let hr = xhat.row_mut(r);
        for c in 0..d {
            hr[c] = (xr[c] - mean[c]) * inv_std[c];
        }
        let yr = y.row_mut(r);
        for c in 0..d {
            yr[c] = bn.gamma[c] * xhat.get(r, c) + bn.beta[c];
        }
    }
    (
        y,
        BnCache {
            xhat,
            inv_std,
            mean,
            var,
            batch_stats,
        },
    )
}

/// Backward through [`bn_forward`]; accumulates `dgamma`/`dbeta` and returns
/// `dL/dx`.
pub fn bn_backward(
    dy: &Mat,
    cache: &BnCache,
    bn: &BatchNorm,
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Mat {
    let (n, d) = (dy.rows(), dy.cols());
    for r in 0..n {
        let dyr = dy.row(r);
        let xh = cache.xhat.row(r);
        for c in 0..d {
            dgamma[c] += dyr[c] * xh[c];
            dbeta[c] += dyr[c];
        }
    }
    let mut dx = Mat::zeros(n, d);
    if cache.batch_stats {
        // Full backward: the batch moments themselves depend on x.
        let mut sum_dxhat = vec![0.0; d];
        let mut sum_dxhat_xhat = vec![0.0; d];
        for r in 0..n {
            let dyr = dy.row(r);
            let xh = cache.xhat.row(r);
            for c in 0..d {
                let dxh = dyr[c] * bn.gamma[c];
                sum_dxhat[c] += dxh;
                sum_dxhat_xhat[c] += dxh * xh[c];
            }
        }
        let inv_n = 1.0 / n as f64;
        for r in 0..n {
            let dyr = dy.row(r);
            let xh = cache.xhat.row(r);
            let dxr = dx.row_mut(r);
            for c in 0..d {
                let dxh = dyr[c] * bn.gamma[c];
                dxr[c] = cache.inv_std[c]
                    * (dxh - inv_n * sum_dxhat[c] - xh[c] * inv_n * sum_dxhat_xhat[c]);
            }
        }
    } else {
        // Frozen statistics: plain affine map.
        for r in 0..n {
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for c in 0..d {
                dxr[c] = dyr[c] * bn.gamma[c] * cache.inv_std[c];
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn eval_mode_is_affine() {
        let mut bn = BatchNorm::identity(3);
        bn.running_mean = vec![1.0, -1.0, 0.5];
        bn.running_var = vec![0.5, 2.0, 1.0];
        bn.gamma = vec![2.0, 1.0, 0.5];
        bn.beta = vec![0.1, 0.2, 0.3];
        let x = Mat::from_vec(1, 3, vec![2.0, 0.0, 0.5]);
        let (y, _) = bn_forward(&x, &bn, false);
        for c in 0..3 {
            let expect = bn.gamma[c] * (x.get(0, c) - bn.running_mean[c])
                / sqrt(bn.running_var[c] + BN_EPS)
                + bn.beta[c];
            assert!((y.get(0, c) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_stats_normalize() {
        let mut rng = Rng::seed_from_u64(5);
        let x = Mat::from_fn(64, 4, |_, _| rng.uniform(-3.0, 3.0) + 1.5);
        let bn = BatchNorm::identity(4);
        let (y, cache) = bn_forward(&x, &bn, true);
        assert!(cache.batch_stats);
        for c in 0..4 {
            let mean: f64 = (0..64).map(|r| y.get(r, c)).sum::<f64>() / 64.0;
            assert!(mean.abs() < 1e-10);
        }
    }

    // Finite-difference check of the full batch-stats backward.
    #[test]
    fn batch_backward_matches_fd() {
        let mut rng = Rng::seed_from_u64(6);
        let n = 5;
        let d = 3;
        let x = Mat::from_fn(n, d, |_, _| rng.uniform(-1.0, 1.0));
        let mut bn = BatchNorm::identity(d);
        bn.gamma = vec![1.2, 0.8, 1.5];
        bn.beta = vec![0.1, -0.2, 0.3];
        // Loss = sum of y .* w for a fixed random weighting.
        let w = Mat::from_fn(n, d, |_, _| rng.uniform(-1.0, 1.0));
        let loss = |x: &Mat, bn: &BatchNorm| -> f64 {
            let (y, _) = bn_forward(x, bn, true);
            y.data().iter().zip(w.data().iter()).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = bn_forward(&x, &bn, true);
        let mut dg = vec![0.0; d];
        let mut db = vec![0.0; d];
        let dx = bn_backward(&w, &cache, &bn, &mut dg, &mut db);

        let h = 1e-6;
        let mut xp = x.clone();
        for r in 0..n {
            for c in 0..d {
                let orig = xp.get(r, c);
                xp.set(r, c, orig + h);
                let up = loss(&xp, &bn);
                xp.set(r, c, orig - h);
                let dn = loss(&xp, &bn);
                xp.set(r, c, orig);
                let fd = (up - dn) / (2.0 * h);
                let a = dx.get(r, c);
                assert!(
                    (fd - a).abs() / fd.abs().max(a.abs()).max(1e-6) < 1e-4,
                    "dx[{r},{c}] analytic {a} vs fd {fd}"
                );
            }
        }
        for c in 0..d {
            let orig = bn.gamma[c];
            bn.gamma[c] = orig + h;
            let up = loss(&x, &bn);
            bn.gamma[c] = orig - h;
            let dn = loss(&x, &bn);
            bn.gamma[c] = orig;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - dg[c]).abs() / fd.abs().max(1e-6) < 1e-4);
        }
    }

    #[test]
    fn running_update_moves_toward_batch() {
        let mut bn = BatchNorm::identity(2);
        bn.update_running(&[10.0, -10.0], &[4.0, 9.0], 0.9);
        assert!((bn.running_mean[0] - 1.0).abs() < 1e-12);
        assert!((bn.running_var[1] - (0.9 + 0.1 * 9.0)).abs() < 1e-12);
    }
}
