//! Linear document-classification probe over frozen topic-model features.

use alloc::vec;
use alloc::vec::Vec;

use crate::adam::Adam;
use crate::error::CoreError;
use crate::mat::{gemm, matmul, Mat};
use crate::numeric::{ln, softmax_in_place, sqrt};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Early stop once the train loss improves by less than
    /// `min_rel_improvement` for `patience` consecutive epochs.
    pub patience: usize,
    pub min_rel_improvement: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 50,
            batch_size: 100,
            seed: 0,
            patience: 5,
            min_rel_improvement: 1e-5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearProbe {
    pub w: Mat, // feature_dim x classes
    pub b: Vec<f64>,
}

impl LinearProbe {
    pub fn logits(&self, x: &Mat) -> Mat {
        let mut out = matmul(x, false, &self.w, false);
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for (v, &bb) in row.iter_mut().zip(self.b.iter()) {
                *v += bb;
            }
        }
        out
    }

    pub fn predict(&self, x: &Mat) -> Vec<u32> {
        let logits = self.logits(x);
        (0..logits.rows())
            .map(|r| crate::numeric::argmax(logits.row(r)) as u32)
            .collect()
    }
}

/// Trains a single affine layer with softmax cross entropy and Adam
/// (standard moment decays; the configured learning rate).
pub fn train_probe(
    x: &Mat,
    y: &[u32],
    n_classes: usize,
    cfg: &ProbeConfig,
) -> Result<LinearProbe, CoreError> {
    let n = x.rows();
    assert_eq!(n, y.len(), "feature/label count mismatch");
    if n == 0 {
        return Err(CoreError::DegenerateLabels("empty training set"));
    }
    if n_classes < 2 {
        return Err(CoreError::DegenerateLabels("fewer than two classes"));
    }
    let first = y[0];
    if y.iter().all(|&l| l == first) {
        return Err(CoreError::DegenerateLabels(
            "all training labels identical",
        ));
    }
    if let Some(&bad) = y.iter().find(|&&l| l as usize >= n_classes) {
        let _ = bad;
        return Err(CoreError::DegenerateLabels("label outside class range"));
    }

    let dim = x.cols();
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let limit = sqrt(6.0 / (dim + n_classes) as f64);
    let mut probe = LinearProbe {
        w: Mat::from_fn(dim, n_classes, |_, _| rng.uniform(-limit, limit)),
        b: vec![0.0; n_classes],
    };
    let mut opt = Adam::new(&[dim * n_classes, n_classes], 0.9, 0.999, 1e-8);

    let mut order: Vec<usize> = (0..n).collect();
    let mut prev_loss = f64::INFINITY;
    let mut stall = 0usize;
    for _epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let bsz = chunk.len();
            let mut xb = Mat::zeros(bsz, dim);
            for (i, &idx) in chunk.iter().enumerate() {
                xb.row_mut(i).copy_from_slice(x.row(idx));
            }
            let mut p = probe.logits(&xb);
            for r in 0..bsz {
                softmax_in_place(p.row_mut(r));
            }
            let inv = 1.0 / bsz as f64;
            let mut dlogits = p; // reuse: (p - onehot) / bsz
            for (i, &idx) in chunk.iter().enumerate() {
                let label = y[idx] as usize;
                epoch_loss -= ln(dlogits.get(i, label).max(1e-300)) * inv * bsz as f64 / n as f64;
                let row = dlogits.row_mut(i);
                row[label] -= 1.0;
                for v in row.iter_mut() {
                    *v *= inv;
                }
            }
            let mut dw = Mat::zeros(dim, n_classes);
            gemm(1.0, &xb, true, &dlogits, false, 0.0, &mut dw);
            let mut db = vec![0.0; n_classes];
            for r in 0..bsz {
                crate::numeric::axpy(1.0, dlogits.row(r), &mut db);
            }
            opt.step(
                cfg.lr,
                &mut [probe.w.data_mut(), &mut probe.b],
                &[dw.data(), &db],
            );
        }
        let improved = (prev_loss - epoch_loss) / prev_loss.abs().max(1e-12);
        if improved < cfg.min_rel_improvement {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        } else {
            stall = 0;
        }
        prev_loss = epoch_loss;
    }
    Ok(probe)
}

/// Test accuracy as a percentage.
pub fn probe_accuracy(probe: &LinearProbe, x: &Mat, y: &[u32]) -> f64 {
    assert_eq!(x.rows(), y.len());
    if y.is_empty() {
        return 0.0;
    }
    let preds = probe.predict(x);
    let correct = preds.iter().zip(y.iter()).filter(|(p, t)| p == t).count();
    100.0 * correct as f64 / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(rng: &mut Rng, n_per: usize, sep: f64) -> (Mat, Vec<u32>) {
        let mut x = Mat::zeros(2 * n_per, 4);
        let mut y = Vec::with_capacity(2 * n_per);
        for i in 0..2 * n_per {
            let class = (i % 2) as u32;
            let center = if class == 0 { -sep } else { sep };
            for c in 0..4 {
                x.set(i, c, center + 0.5 * rng.normal());
            }
            y.push(class);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_reach_99_percent() {
        let mut rng = Rng::seed_from_u64(8);
        let (x, y) = blobs(&mut rng, 200, 2.0);
        let probe = train_probe(&x, &y, 2, &ProbeConfig::default()).unwrap();
        let acc = probe_accuracy(&probe, &x, &y);
        assert!(acc >= 99.0, "accuracy {acc}");
    }

    #[test]
    fn constant_features_fall_to_majority_rate() {
        let n = 300;
        let x = Mat::from_fn(n, 3, |_, _| 1.0);
        // 2:1 class imbalance
        let y: Vec<u32> = (0..n).map(|i| if i % 3 == 0 { 1 } else { 0 }).collect();
        let probe = train_probe(&x, &y, 2, &ProbeConfig::default()).unwrap();
        let acc = probe_accuracy(&probe, &x, &y);
        let majority = 100.0 * 200.0 / 300.0;
        assert!(
            (acc - majority).abs() < 5.0,
            "accuracy {acc} vs majority {majority}"
        );
    }

    #[test]
    fn degenerate_labels_rejected() {
        let x = Mat::zeros(10, 2);
        let y = vec![0u32; 10];
        assert!(matches!(
            train_probe(&x, &y, 2, &ProbeConfig::default()),
            Err(CoreError::DegenerateLabels(_))
        ));
        assert!(train_probe(&x, &y, 1, &ProbeConfig::default()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = Rng::seed_from_u64(9);
        let (x, y) = blobs(&mut rng, 50, 1.0);
        let a = train_probe(&x, &y, 2, &ProbeConfig::default()).unwrap();
        let b = train_probe(&x, &y, 2, &ProbeConfig::default()).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.b, b.b);
    }
}
