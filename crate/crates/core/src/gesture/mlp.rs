//! Static-gesture classifier: fully connected ReLU network with softmax output.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grad::{locate, Differentiable};
use super::train::{nll_from_logits, softmax_rows, TrainConfig, TrainReport};
use super::{
    extract_features, FeatureVector, GestureClass, GestureDataset, GestureError, FEATURE_LEN,
};
use crate::geometry::CameraIntrinsics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    /// out x in
    weight: Array2<f64>,
    bias: Array1<f64>,
}

/// Layer stack `in -> h1 -> ... -> classes` with ReLU between layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

struct Gradients(Vec<(Array2<f64>, Array1<f64>)>);

impl MlpModel {
    /// 106 -> 64 -> 32 -> 8.
    pub const STANDARD: [usize; 4] = [FEATURE_LEN, 64, 32, GestureClass::STATIC.len()];

    /// He-initialized weights, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).unwrap();
                Dense {
                    weight: Array2::from_shape_fn((w[1], w[0]), |_| normal.sample(&mut rng)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weight: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers }
    }

    /// Builds a model from explicit `(weights out x in, biases)` per layer.
    pub fn from_layers(layers: Vec<(Vec<Vec<f64>>, Vec<f64>)>) -> Result<Self, GestureError> {
        let mut out = Vec::with_capacity(layers.len());
        for (w, b) in layers {
            let rows = w.len();
            let cols = w.first().map_or(0, Vec::len);
            if b.len() != rows || w.iter().any(|r| r.len() != cols) {
                return Err(GestureError::ShapeMismatch {
                    expected: rows,
                    got: b.len(),
                });
            }
            let weight = Array2::from_shape_vec((rows, cols), w.into_iter().flatten().collect())
                .expect("checked shape");
            if let Some(prev) = out.last().map(|d: &Dense| d.weight.nrows()) {
                if prev != cols {
                    return Err(GestureError::ShapeMismatch {
                        expected: prev,
                        got: cols,
                    });
                }
            }
            out.push(Dense {
                weight,
                bias: Array1::from(b),
            });
        }
        Ok(Self { layers: out })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().weight.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Class probabilities for one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, GestureError> {
        if input.len() != self.input_dim() {
            return Err(GestureError::ShapeMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let acts = self.activations(x);
        Ok(softmax_rows(acts.last().unwrap()).row(0).to_vec())
    }

    /// Layer outputs for a batch; the last entry holds logits.
    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let input = acts.last().map_or(x.view(), |a| a.view());
            let mut z = input.dot(&layer.weight.t()) + &layer.bias;
            if k != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Mean cross-entropy over the batch and its gradient.
    fn loss_and_grad(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
        total: usize,
    ) -> (f64, Gradients) {
        let acts = self.activations(x);
        let logits = acts.last().unwrap();
        let loss = nll_from_logits(logits, labels);
        let probs = softmax_rows(logits);

        let mut delta = probs;
        for (row, &y) in labels.iter().enumerate() {
            delta[[row, y]] -= 1.0;
        }
        delta /= total as f64;

        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let input = if k == 0 { x.view() } else { acts[k - 1].view() };
            let gw = delta.t().dot(&input);
            let gb = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weight);
                back.zip_mut_with(&acts[k - 1], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, Gradients(grads))
    }

    fn apply(&mut self, grads: &Gradients, lr: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.0) {
            layer.weight.scaled_add(-lr, gw);
            layer.bias.scaled_add(-lr, gb);
        }
    }

    fn param_lens(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.len(), l.bias.len()])
            .collect()
    }

    fn slot(&self, i: usize) -> (usize, bool, usize) {
        let (arr, off) = locate(self.param_lens(), i);
        (arr / 2, arr % 2 == 1, off)
    }
}

impl Differentiable for MlpModel {
    type Sample = (Vec<f64>, usize);

    fn param_count(&self) -> usize {
        self.param_lens().iter().sum()
    }

    fn param(&self, i: usize) -> f64 {
        let (layer, is_bias, off) = self.slot(i);
        let l = &self.layers[layer];
        if is_bias {
            l.bias[off]
        } else {
            l.weight.as_slice().unwrap()[off]
        }
    }

    fn set_param(&mut self, i: usize, value: f64) {
        let (layer, is_bias, off) = self.slot(i);
        let l = &mut self.layers[layer];
        if is_bias {
            l.bias[off] = value;
        } else {
            l.weight.as_slice_mut().unwrap()[off] = value;
        }
    }

    fn loss(&self, (x, y): &Self::Sample) -> f64 {
        let xv = ArrayView2::from_shape((1, x.len()), x).unwrap();
        nll_from_logits(self.activations(xv).last().unwrap(), &[*y])
    }

    fn gradient(&self, (x, y): &Self::Sample) -> Vec<f64> {
        let xv = ArrayView2::from_shape((1, x.len()), x).unwrap();
        let (_, g) = self.loss_and_grad(xv, &[*y], 1);
        g.0.into_iter()
            .flat_map(|(w, b)| w.into_iter().chain(b))
            .collect()
    }
}

/// Class probabilities of the static classifier for one frame.
pub fn mlp_forward(model: &MlpModel, features: &FeatureVector) -> Result<Vec<f64>, GestureError> {
    model.forward(features.as_slice())
}

/// Trains a fresh standard-size model with minibatch SGD on the static
/// training split (last frame of each sample).
pub fn mlp_train(
    data: &GestureDataset,
    hyper: &TrainConfig,
    cam: &CameraIntrinsics,
) -> Result<TrainReport<MlpModel>, GestureError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for s in data.train() {
        let idx = GestureClass::STATIC
            .iter()
            .position(|c| *c == s.label)
            .ok_or(GestureError::WrongClassKind(s.label, "static"))?;
        let frame = s.frames.last().ok_or(GestureError::EmptySequence)?;
        rows.extend_from_slice(extract_features(frame, cam).as_slice());
        labels.push(idx);
    }
    if labels.is_empty() {
        return Err(GestureError::EmptyDataset);
    }
    let x = Array2::from_shape_vec((labels.len(), FEATURE_LEN), rows).expect("row-major features");
    let model = MlpModel::new(&MlpModel::STANDARD, hyper.seed);
    Ok(train_on_matrix(model, &x, &labels, hyper))
}

pub(crate) fn train_on_matrix(
    mut model: MlpModel,
    x: &Array2<f64>,
    labels: &[usize],
    hyper: &TrainConfig,
) -> TrainReport<MlpModel> {
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..n).collect();
    let full_loss = |m: &MlpModel| m.loss_and_grad(x.view(), labels, n).0;
    let mut curve = vec![full_loss(&model)];
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch.max(1)) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, g) = model.loss_and_grad(xb.view(), &yb, yb.len());
            model.apply(&g, hyper.lr);
        }
        curve.push(full_loss(&model));
    }
    TrainReport {
        model,
        loss_curve: curve,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::gradient_check;
    use rand::Rng;

    #[test]
    fn zero_model_is_uniform() {
        let m = MlpModel::zeros(&MlpModel::STANDARD);
        let p = m.forward(&[0.3; FEATURE_LEN]).unwrap();
        assert_eq!(p.len(), 8);
        for v in p {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let m = MlpModel::zeros(&MlpModel::STANDARD);
        assert!(matches!(
            m.forward(&[0.0; 5]),
            Err(GestureError::ShapeMismatch {
                expected: 106,
                got: 5
            })
        ));
    }

    #[test]
    fn tiny_model_matches_hand_computation() {
        // 2 -> 2 -> 2 -> 2
        let m = MlpModel::from_layers(vec![
            (vec![vec![1.0, -1.0], vec![0.5, 2.0]], vec![0.0, -1.0]),
            (vec![vec![1.0, 1.0], vec![-1.0, 0.5]], vec![0.5, 0.0]),
            (vec![vec![2.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.25]),
        ])
        .unwrap();
        // x = (1, 0.5)
        // h1 = relu((0.5, 0.5 + 1 - 1)) = (0.5, 0.5)
        // h2 = relu((0.5 + 0.5 + 0.5, -0.5 + 0.25)) = (1.5, 0)
        // logits = (3.0, 0.25); p0 = 1 / (1 + e^-2.75)
        let p = m.forward(&[1.0, 0.5]).unwrap();
        let p0 = 1.0 / (1.0 + (-2.75f64).exp());
        assert!((p[0] - p0).abs() < 1e-15);
        assert!((p[1] - (1.0 - p0)).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one_for_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for seed in 0..20 {
            let m = MlpModel::new(&MlpModel::STANDARD, seed);
            let x: Vec<f64> = (0..FEATURE_LEN)
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            let p = m.forward(&x).unwrap();
            assert!(p.iter().all(|v| *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = MlpModel::new(&[12, 7, 5, 4], 3);
        let x: Vec<f64> = (0..12)
            .map(|_| rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let err = gradient_check(&m, &(x, 2), 1e-5);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn memorizes_a_single_sample() {
        let x = Array2::from_shape_fn((1, FEATURE_LEN), |(_, j)| (j as f64 * 0.37).sin());
        let hyper = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let report = train_on_matrix(MlpModel::new(&MlpModel::STANDARD, 1), &x, &[5], &hyper);
        let p = report.model.forward(x.row(0).as_slice().unwrap()).unwrap();
        let argmax = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 5);
        assert!(report.loss_curve.last() < report.loss_curve.first());
    }
}
