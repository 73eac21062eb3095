use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardUniform};
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::linalg::{axpy, dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `inputs × outputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// `X W + B` for a batch.
    fn apply(&self, x: &Matrix) -> Matrix {
        let batch = x.rows();
        let mut out = Matrix::zeros(batch, self.outputs);
        for i in 0..batch {
            let dst = out.row_mut(i);
            dst.copy_from_slice(&self.bias);
            for (k, &xk) in x.row(i).iter().enumerate() {
                if xk != 0.0 {
                    axpy(xk, &self.weights[k * self.outputs..(k + 1) * self.outputs], dst);
                }
            }
        }
        out
    }

    /// Gradients of `X W + B` given `dY`; returns `(dW, dB, dX)`.
    fn backward(&self, x: &Matrix, dy: &Matrix, need_dx: bool) -> (Vec<f64>, Vec<f64>, Option<Matrix>) {
        let mut dw = vec![0.0; self.inputs * self.outputs];
        let mut db = vec![0.0; self.outputs];
        for i in 0..x.rows() {
            let g = dy.row(i);
            axpy(1.0, g, &mut db);
            for (k, &xk) in x.row(i).iter().enumerate() {
                if xk != 0.0 {
                    axpy(xk, g, &mut dw[k * self.outputs..(k + 1) * self.outputs]);
                }
            }
        }
        let dx = need_dx.then(|| {
            let mut dx = Matrix::zeros(x.rows(), self.inputs);
            for i in 0..x.rows() {
                let g = dy.row(i);
                let dst = dx.row_mut(i);
                for (k, d) in dst.iter_mut().enumerate() {
                    *d = dot(g, &self.weights[k * self.outputs..(k + 1) * self.outputs]);
                }
            }
            dx
        });
        (dw, db, dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNorm {
    pub fn new(width: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum,
            epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub dense: Dense,
    pub bn: BatchNorm,
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Per-column mean and population standard deviation, floored at 1e-8.
    pub fn fit(x: &Matrix) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            axpy(1.0, x.row(i), &mut mean);
        }
        let nf = n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for (j, v) in x.row(i).iter().enumerate() {
                let c = v - mean[j];
                var[j] += c * c;
            }
        }
        let std = var
            .into_iter()
            .map(|v| libm::sqrt(v / nf).max(1e-8))
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Where dropout masks come from in a training-mode pass.
pub enum Masks<'a> {
    Draw(&'a mut dyn RngCore),
    /// Reuse masks from an earlier pass (one per hidden layer).
    Fixed(&'a [Option<Matrix>]),
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Matrix,
    xhat: Matrix,
    inv_std: Vec<f64>,
    /// batch-norm output before ReLU
    pre_relu: Matrix,
    mask: Option<Matrix>,
}

/// Intermediate values of a training-mode pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    last_hidden: Matrix,
    probs: Matrix,
    generation: u64,
}

impl ForwardCache {
    pub fn masks(&self) -> Vec<Option<Matrix>> {
        self.layers.iter().map(|l| l.mask.clone()).collect()
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    /// Batch-normalized activations of hidden layer `layer` (before `γ`, `β`).
    pub fn normalized(&self, layer: usize) -> &Matrix {
        &self.layers[layer].xhat
    }
}

pub struct ForwardOutput {
    pub probs: Matrix,
    pub cache: Option<ForwardCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<HiddenGrads>,
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl Gradients {
    /// Same order as [`MlpModel::parameters_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for h in &self.hidden {
            out.push(&h.weights);
            out.push(&h.bias);
            out.push(&h.gamma);
            out.push(&h.beta);
        }
        out.push(&self.output_weights);
        out.push(&self.output_bias);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub hidden: Vec<HiddenLayer>,
    pub output: Dense,
    pub input_dim: usize,
    pub classes: usize,
    pub scaler: FeatureScaler,
    /// Bus indices whose ω entries form the feature vector.
    pub feature_buses: Vec<usize>,
    /// Hash of the active-set dictionary the class labels refer to.
    pub label_binding: String,
    /// Bumped on every parameter update; ties forward caches to parameters.
    #[serde(skip)]
    pub generation: u64,
}

pub(crate) fn softmax_rows(logits: &mut Matrix) {
    for i in 0..logits.rows() {
        let row = logits.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl MlpModel {
    /// Trainable parameter slices: per hidden layer `W, B, γ, β`, then output `W, B`.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for h in &mut self.hidden {
            out.push(&mut h.dense.weights);
            out.push(&mut h.dense.bias);
            out.push(&mut h.bn.gamma);
            out.push(&mut h.bn.beta);
        }
        out.push(&mut self.output.weights);
        out.push(&mut self.output.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden
            .iter()
            .map(|h| h.dense.weights.len() + h.dense.bias.len() + 2 * h.bn.gamma.len())
            .sum::<usize>()
            + self.output.weights.len()
            + self.output.bias.len()
    }

    fn check_input(&self, x: &Matrix) -> Result<(), NnError> {
        if x.cols() != self.input_dim {
            return Err(NnError::DimensionMismatch("feature width differs from model input"));
        }
        Ok(())
    }

    /// Forward pass on standardized features.
    ///
    /// `Train` uses batch statistics, updates the running statistics and
    /// applies inverted dropout with masks drawn from `rng`; `Eval` uses the
    /// running statistics and no dropout.
    pub fn forward(
        &mut self,
        x: &Matrix,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<ForwardOutput, NnError> {
        match mode {
            Mode::Eval => Ok(ForwardOutput {
                probs: self.forward_eval(x)?,
                cache: None,
            }),
            Mode::Train => {
                let (cache, stats) = self.forward_train_with(x, Masks::Draw(rng))?;
                self.update_running_stats(&stats);
                Ok(ForwardOutput {
                    probs: cache.probs.clone(),
                    cache: Some(cache),
                })
            }
        }
    }

    /// Evaluation-mode probabilities; a pure function of parameters and input.
    pub fn forward_eval(&self, x: &Matrix) -> Result<Matrix, NnError> {
        self.check_input(x)?;
        let mut act = x.clone();
        for (li, layer) in self.hidden.iter().enumerate() {
            let mut z = layer.dense.apply(&act);
            let bn = &layer.bn;
            let scale: Vec<f64> = bn
                .gamma
                .iter()
                .zip(&bn.running_var)
                .map(|(g, v)| g / libm::sqrt(v + bn.epsilon))
                .collect();
            for i in 0..z.rows() {
                for (j, v) in z.row_mut(i).iter_mut().enumerate() {
                    let y = (*v - bn.running_mean[j]) * scale[j] + bn.beta[j];
                    *v = y.max(0.0);
                }
            }
            if z.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonfiniteActivation { layer: li });
            }
            act = z;
        }
        let mut logits = self.output.apply(&act);
        if logits.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonfiniteActivation {
                layer: self.hidden.len(),
            });
        }
        softmax_rows(&mut logits);
        Ok(logits)
    }

    /// Training-mode pass that leaves the running statistics untouched.
    /// Returns the cache plus per-layer batch `(mean, variance)`.
    #[allow(clippy::type_complexity)]
    pub fn forward_train_with(
        &self,
        x: &Matrix,
        mut masks: Masks<'_>,
    ) -> Result<(ForwardCache, Vec<(Vec<f64>, Vec<f64>)>), NnError> {
        self.check_input(x)?;
        let batch = x.rows();
        if batch == 0 {
            return Err(NnError::DimensionMismatch("empty batch"));
        }
        let bf = batch as f64;
        let mut act = x.clone();
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut stats = Vec::with_capacity(self.hidden.len());
        for (li, layer) in self.hidden.iter().enumerate() {
            let z = layer.dense.apply(&act);
            let width = layer.dense.outputs;
            let mut mean = vec![0.0; width];
            for i in 0..batch {
                axpy(1.0, z.row(i), &mut mean);
            }
            mean.iter_mut().for_each(|m| *m /= bf);
            let mut var = vec![0.0; width];
            for i in 0..batch {
                for (j, v) in z.row(i).iter().enumerate() {
                    let c = v - mean[j];
                    var[j] += c * c;
                }
            }
            var.iter_mut().for_each(|v| *v /= bf);
            let inv_std: Vec<f64> = var
                .iter()
                .map(|v| 1.0 / libm::sqrt(v + layer.bn.epsilon))
                .collect();

            let mut xhat = z;
            let mut pre_relu = Matrix::zeros(batch, width);
            for i in 0..batch {
                let src = xhat.row_mut(i);
                for (j, v) in src.iter_mut().enumerate() {
                    *v = (*v - mean[j]) * inv_std[j];
                }
                let dst = pre_relu.row_mut(i);
                for (j, (d, s)) in dst.iter_mut().zip(src.iter()).enumerate() {
                    *d = layer.bn.gamma[j] * s + layer.bn.beta[j];
                }
            }
            let mut out = pre_relu.clone();
            out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));

            let mask = if layer.dropout_rate > 0.0 {
                let m = match &mut masks {
                    Masks::Draw(rng) => {
                        let keep = 1.0 - layer.dropout_rate;
                        let mut m = Matrix::zeros(batch, width);
                        for v in m.as_mut_slice() {
                            let u: f64 = StandardUniform.sample(&mut **rng);
                            *v = if u < keep { 1.0 / keep } else { 0.0 };
                        }
                        m
                    }
                    Masks::Fixed(given) => given
                        .get(li)
                        .and_then(|m| m.clone())
                        .ok_or(NnError::DimensionMismatch("missing dropout mask"))?,
                };
                for (v, s) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
                    *v *= s;
                }
                Some(m)
            } else {
                None
            };
            if out.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonfiniteActivation { layer: li });
            }
            layers.push(LayerCache {
                input: core::mem::replace(&mut act, out),
                xhat,
                inv_std,
                pre_relu,
                mask,
            });
            stats.push((mean, var));
        }
        let mut probs = self.output.apply(&act);
        if probs.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonfiniteActivation {
                layer: self.hidden.len(),
            });
        }
        softmax_rows(&mut probs);
        Ok((
            ForwardCache {
                layers,
                last_hidden: act,
                probs,
                generation: self.generation,
            },
            stats,
        ))
    }

    pub fn update_running_stats(&mut self, stats: &[(Vec<f64>, Vec<f64>)]) {
        for (layer, (mean, var)) in self.hidden.iter_mut().zip(stats) {
            let m = layer.bn.momentum;
            for j in 0..mean.len() {
                layer.bn.running_mean[j] = m * layer.bn.running_mean[j] + (1.0 - m) * mean[j];
                layer.bn.running_var[j] = m * layer.bn.running_var[j] + (1.0 - m) * var[j];
            }
        }
    }

    /// Exact gradients of the mean cross-entropy for the batch in `cache`,
    /// through batch statistics and the realized dropout masks.
    pub fn backward(&self, cache: &ForwardCache, labels: &[usize]) -> Result<Gradients, NnError> {
        if cache.generation != self.generation {
            return Err(NnError::StaleCache);
        }
        let batch = cache.probs.rows();
        if labels.len() != batch {
            return Err(NnError::DimensionMismatch("labels differ from batch size"));
        }
        let bf = batch as f64;
        let mut d = cache.probs.clone();
        for (i, &l) in labels.iter().enumerate() {
            if l >= self.classes {
                return Err(NnError::LabelOutOfRange {
                    label: l,
                    classes: self.classes,
                });
            }
            d[(i, l)] -= 1.0;
        }
        d.as_mut_slice().iter_mut().for_each(|v| *v /= bf);

        let (ow, ob, dx) = self
            .output
            .backward(&cache.last_hidden, &d, !self.hidden.is_empty());
        let mut hidden = vec![
            HiddenGrads {
                weights: Vec::new(),
                bias: Vec::new(),
                gamma: Vec::new(),
                beta: Vec::new(),
            };
            self.hidden.len()
        ];
        let mut upstream = dx;
        for li in (0..self.hidden.len()).rev() {
            let layer = &self.hidden[li];
            let lc = &cache.layers[li];
            let width = layer.dense.outputs;
            let mut dy = upstream.take().expect("upstream gradient");
            if let Some(mask) = &lc.mask {
                for (g, m) in dy.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *g *= m;
                }
            }
            for (g, y) in dy.as_mut_slice().iter_mut().zip(lc.pre_relu.as_slice()) {
                if *y <= 0.0 {
                    *g = 0.0;
                }
            }
            let mut dgamma = vec![0.0; width];
            let mut dbeta = vec![0.0; width];
            for i in 0..batch {
                for (j, (g, xh)) in dy.row(i).iter().zip(lc.xhat.row(i)).enumerate() {
                    dgamma[j] += g * xh;
                    dbeta[j] += g;
                }
            }
            // dxhat = dy·γ; dz = inv_std/B · (B·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
            let mut dz = dy;
            for i in 0..batch {
                let xh = lc.xhat.row(i);
                for (j, g) in dz.row_mut(i).iter_mut().enumerate() {
                    let gam = layer.bn.gamma[j];
                    // Σdxhat = γ·dβ, Σ(dxhat·xhat) = γ·dγ
                    *g = lc.inv_std[j] / bf
                        * (bf * *g * gam - gam * dbeta[j] - xh[j] * gam * dgamma[j]);
                }
            }
            let (w, b, dx) = layer.dense.backward(&lc.input, &dz, li > 0);
            hidden[li] = HiddenGrads {
                weights: w,
                bias: b,
                gamma: dgamma,
                beta: dbeta,
            };
            upstream = dx;
        }
        Ok(Gradients {
            hidden,
            output_weights: ow,
            output_bias: ob,
        })
    }

    /// Probabilities for raw (unscaled) load-bus features.
    pub fn predict_proba(&self, raw_features: &Matrix) -> Result<Matrix, NnError> {
        self.check_input(raw_features)?;
        self.forward_eval(&self.scaler.transform(raw_features))
    }

    /// Load-bus features of a nodal ω.
    pub fn features_of(&self, omega: &[f64]) -> Result<Vec<f64>, NnError> {
        self.feature_buses
            .iter()
            .map(|&b| {
                omega
                    .get(b)
                    .copied()
                    .ok_or(NnError::DimensionMismatch("omega shorter than feature bus index"))
            })
            .collect()
    }
}
