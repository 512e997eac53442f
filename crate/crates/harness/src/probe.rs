//! Linear readout quality: logistic regression on frozen features.

use cplab_tensor::optim::AdamHyper;
use cplab_tensor::{NdArray, ParameterStore, SeededRng, Tape};

use crate::auc::{accuracy_at_half, rank_auc};
use crate::error::{HarnessError, Result};

/// Result of probing one feature source against one event target.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeReport {
    pub source: String,
    /// Event target: this pile falls within the horizon.
    pub pile: usize,
    pub auc: f64,
    pub accuracy: f64,
    /// Held-out samples the AUC is computed on.
    pub n: usize,
    pub n_pos: usize,
}

const MIN_SAMPLES: usize = 500;
const TRAIN_FRACTION: f64 = 0.7;
const EPOCHS: usize = 300;

/// Trains a logistic regression on a 70% split of the (standardized)
/// features and reports rank AUC and 0.5-threshold accuracy on the held-out
/// 30%. Deterministic given `seed`.
pub fn probe_outcome(
    source: &str,
    pile: usize,
    features: &[Vec<f64>],
    labels: &[bool],
    seed: u64,
) -> Result<ProbeReport> {
    if features.len() != labels.len() {
        return Err(HarnessError::Data(format!(
            "features ({}) and labels ({}) differ in length",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < MIN_SAMPLES {
        return Err(HarnessError::Underpowered(format!(
            "probe needs at least {MIN_SAMPLES} samples, got {}",
            features.len()
        )));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(HarnessError::Underpowered(
            "probe needs both classes among the labels".into(),
        ));
    }
    let dim = features[0].len();
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return Err(HarnessError::Data("ragged or empty feature rows".into()));
    }

    // Standardize with training-split statistics applied everywhere.
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = SeededRng::new(seed).fork("probe-split");
    rng.shuffle(&mut order);
    let n_train = ((features.len() as f64) * TRAIN_FRACTION).round() as usize;
    let (train_idx, test_idx) = order.split_at(n_train);
    if test_idx.is_empty() {
        return Err(HarnessError::Data("empty held-out split".into()));
    }

    let mut mean = vec![0.0; dim];
    for &i in train_idx {
        for (m, v) in mean.iter_mut().zip(&features[i]) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_train as f64;
    }
    let mut var = vec![0.0; dim];
    for &i in train_idx {
        for (s, (v, m)) in var.iter_mut().zip(features[i].iter().zip(&mean)) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|s| {
            let sd = (s / n_train as f64).sqrt();
            if sd > 1e-9 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let standardized = |i: usize| -> Vec<f64> {
        features[i]
            .iter()
            .zip(mean.iter().zip(&std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    };

    let x_train = {
        let mut data = Vec::with_capacity(n_train * dim);
        for &i in train_idx {
            data.extend(standardized(i));
        }
        NdArray::from_vec(&[n_train, dim], data)?
    };
    // Class index 0 is the positive (its logit is the learned score; the
    // second class logit is pinned at zero, giving plain binary logistic
    // regression through the two-class softmax).
    let targets: Vec<usize> = train_idx.iter().map(|&i| usize::from(!labels[i])).collect();

    let mut store = ParameterStore::new();
    store.insert("probe.w", NdArray::zeros(&[dim, 1]))?;
    store.insert("probe.b", NdArray::zeros(&[1, 1]))?;
    let hyper = AdamHyper::with_lr(0.05);
    for _ in 0..EPOCHS {
        let mut tape = Tape::new();
        let w = store.bind(&mut tape, "probe.w")?;
        let b = store.bind(&mut tape, "probe.b")?;
        let x = tape.constant(x_train.clone());
        let xw = tape.matmul(x, w)?;
        let z = tape.add(xw, b)?;
        let zero = tape.constant(NdArray::zeros(&[n_train, 1]));
        let logits = tape.concat(&[z, zero], 1)?;
        let loss = tape.cross_entropy_logits(logits, &targets)?;
        let grads = tape.backward(loss)?;
        store.adam_step(grads.by_param(), hyper)?;
    }

    let w = store.get("probe.w").unwrap().data().to_vec();
    let b = store.get("probe.b").unwrap().data()[0];
    let mut scores = Vec::with_capacity(test_idx.len());
    let mut probs = Vec::with_capacity(test_idx.len());
    let mut test_labels = Vec::with_capacity(test_idx.len());
    for &i in test_idx {
        let row = standardized(i);
        let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
        scores.push(z);
        probs.push(1.0 / (1.0 + (-z).exp()));
        test_labels.push(labels[i]);
    }

    let auc = rank_auc(&scores, &test_labels)?;
    Ok(ProbeReport {
        source: source.to_string(),
        pile,
        auc,
        accuracy: accuracy_at_half(&probs, &test_labels),
        n: test_idx.len(),
        n_pos: test_labels.iter().filter(|l| **l).count(),
    })
}
