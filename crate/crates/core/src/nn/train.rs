use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{BatchNorm, Dense, FeatureScaler, HiddenLayer, Masks, MlpModel};
use super::optim::{AdamConfig, AdamState};
use super::NnError;
use crate::linalg::Matrix;
use crate::rng::{seeded, substream_seed, Substream};
use crate::scenario::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub layer_widths: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub dropout_rate: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_widths: vec![256, 256, 128, 128, 64],
            epochs: 20,
            batch_size: 32,
            adam: AdamConfig::default(),
            dropout_rate: 0.2,
            bn_momentum: 0.99,
            bn_epsilon: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_widths.contains(&0) {
            return Err(NnError::InvalidConfig("layer widths must be positive"));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NnError::InvalidConfig("dropout rate must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || self.bn_epsilon <= 0.0 {
            return Err(NnError::InvalidConfig("batch-norm momentum or epsilon out of range"));
        }
        let a = &self.adam;
        if a.alpha <= 0.0 || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(NnError::InvalidConfig("Adam hyperparameters out of range"));
        }
        Ok(())
    }
}

/// He-normal weights `N(0, 2/fan_in)`, zero biases, identity batch-norm.
pub fn init_model(cfg: &TrainConfig, input_dim: usize, classes: usize) -> Result<MlpModel, NnError> {
    cfg.validate()?;
    if input_dim == 0 || classes == 0 {
        return Err(NnError::DimensionMismatch("input width and class count must be positive"));
    }
    let mut rng = seeded(substream_seed(cfg.seed, Substream::Init));
    let mut dense = |inputs: usize, outputs: usize| {
        let mut d = Dense::zeros(inputs, outputs);
        let scale = libm::sqrt(2.0 / inputs as f64);
        for w in &mut d.weights {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = scale * z;
        }
        d
    };
    let mut hidden = Vec::with_capacity(cfg.layer_widths.len());
    let mut fan_in = input_dim;
    for &w in &cfg.layer_widths {
        hidden.push(HiddenLayer {
            dense: dense(fan_in, w),
            bn: BatchNorm::new(w, cfg.bn_momentum, cfg.bn_epsilon),
            dropout_rate: cfg.dropout_rate,
        });
        fan_in = w;
    }
    let output = dense(fan_in, classes);
    Ok(MlpModel {
        hidden,
        output,
        input_dim,
        classes,
        scaler: FeatureScaler::identity(input_dim),
        feature_buses: Vec::new(),
        label_binding: String::new(),
        generation: 0,
    })
}

pub enum Targets<'a> {
    Index(&'a [usize]),
    OneHot(&'a Matrix),
}

/// Mean of `−Σ_i y_i ln ŷ_i` over the batch, with `ŷ` clamped below at 1e-12.
pub fn cross_entropy(probs: &Matrix, targets: Targets<'_>) -> Result<f64, NnError> {
    let (n, k) = (probs.rows(), probs.cols());
    if n == 0 {
        return Err(NnError::DimensionMismatch("empty batch"));
    }
    let ln = |p: f64| libm::log(p.max(1e-12));
    let total: f64 = match targets {
        Targets::Index(labels) => {
            if labels.len() != n {
                return Err(NnError::DimensionMismatch("labels differ from batch size"));
            }
            let mut s = 0.0;
            for (i, &l) in labels.iter().enumerate() {
                if l >= k {
                    return Err(NnError::LabelOutOfRange { label: l, classes: k });
                }
                s -= ln(probs[(i, l)]);
            }
            s
        }
        Targets::OneHot(y) => {
            if y.rows() != n || y.cols() != k {
                return Err(NnError::DimensionMismatch("one-hot targets differ in shape"));
            }
            let mut s = 0.0;
            for i in 0..n {
                for (yv, pv) in y.row(i).iter().zip(probs.row(i)) {
                    if *yv != 0.0 {
                        s -= yv * ln(*pv);
                    }
                }
            }
            s
        }
    };
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_top1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainWarning {
    /// Every training label is the same class; the model is trained anyway.
    SingleClassDataset,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: Vec<EpochStats>,
    pub warnings: Vec<TrainWarning>,
}

/// Initializes a model sized for `ds` and trains it.
pub fn fit(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, NnError> {
    let model = init_model(cfg, ds.meta.load_buses.len(), ds.dictionary.len().max(1))?;
    train(model, ds, cfg)
}

/// Mini-batch Adam on the cross-entropy of `ds`.
///
/// Fits the feature scaler on `ds`, binds the model to its dictionary and
/// reshuffles each epoch from the shuffle substream of `cfg.seed`.
pub fn train(mut model: MlpModel, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, NnError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if ds.meta.load_buses.len() != model.input_dim {
        return Err(NnError::DimensionMismatch("dataset features differ from model input"));
    }
    if ds.dictionary.len() > model.classes {
        return Err(NnError::DimensionMismatch("dictionary larger than model output"));
    }
    let labels = ds.labels();
    if let Some(&l) = labels.iter().find(|&&l| l >= model.classes) {
        return Err(NnError::LabelOutOfRange { label: l, classes: model.classes });
    }
    let mut warnings = Vec::new();
    if labels.iter().all(|&l| l == labels[0]) {
        log::warn!("training set holds a single class");
        warnings.push(TrainWarning::SingleClassDataset);
    }

    let raw = ds.features();
    model.scaler = FeatureScaler::fit(&raw);
    model.feature_buses = ds.meta.load_buses.clone();
    model.label_binding = ds.dictionary.binding();
    let x = model.scaler.transform(&raw);

    let mut shuffle_rng = seeded(substream_seed(cfg.seed, Substream::Shuffle));
    let mut dropout_rng = seeded(substream_seed(cfg.seed, Substream::Dropout));
    let mut adam = AdamState::new(model.parameters_mut().iter().map(|p| p.len()));
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (cache, stats) = model.forward_train_with(&xb, Masks::Draw(&mut dropout_rng))?;
            let probs = cache.probs();
            loss_sum += cross_entropy(probs, Targets::Index(&yb))? * chunk.len() as f64;
            for (i, &y) in yb.iter().enumerate() {
                if argmax(probs.row(i)) == y {
                    correct += 1;
                }
            }
            let grads = model.backward(&cache, &yb)?;
            model.update_running_stats(&stats);
            adam.step(&cfg.adam, &mut model.parameters_mut(), &grads.slices());
            model.generation += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / n as f64,
            train_top1: correct as f64 / n as f64,
        };
        log::debug!(
            "epoch {} loss {:.5} top1 {:.4}",
            stats.epoch,
            stats.mean_loss,
            stats.train_top1
        );
        history.push(stats);
    }
    Ok(TrainOutcome {
        model,
        history,
        warnings,
    })
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

/// Class indices of the `k` largest probabilities, most probable first;
/// equal probabilities rank the lower index first.
pub fn rank_classes(probs: &[f64], k: usize) -> Result<Vec<usize>, NnError> {
    if k == 0 || k > probs.len() {
        return Err(NnError::KOutOfRange { k, classes: probs.len() });
    }
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction {
    pub classes: Vec<usize>,
    pub probs: Vec<f64>,
}

/// Top-`k` classes for one nodal ω.
pub fn predict_topk(model: &MlpModel, omega: &[f64], k: usize) -> Result<RankedPrediction, NnError> {
    if k == 0 || k > model.classes {
        return Err(NnError::KOutOfRange { k, classes: model.classes });
    }
    let feats = model.features_of(omega)?;
    let probs = model.predict_proba(&Matrix::from_vec(1, feats.len(), feats))?;
    let row = probs.row(0);
    let classes = rank_classes(row, k)?;
    let probs = classes.iter().map(|&c| row[c]).collect();
    Ok(RankedPrediction { classes, probs })
}
