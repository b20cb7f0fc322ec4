//! Dynamic-gesture classifier: one LSTM cell over the frame features, linear
//! readout of the final hidden state.

use std::collections::BTreeMap;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classify::DYNAMIC_WINDOW;
use super::grad::{locate, Differentiable};
use super::train::{nll_from_logits, softmax_rows, TrainConfig, TrainReport};
use super::{
    extract_features, FeatureVector, GestureClass, GestureDataset, GestureError, FEATURE_LEN,
};
use crate::geometry::CameraIntrinsics;

/// Gate blocks are stacked in the order input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentModel {
    /// 4H x I
    w_input: Array2<f64>,
    /// 4H x H
    w_hidden: Array2<f64>,
    /// 4H
    bias: Array1<f64>,
    /// C x H
    readout_w: Array2<f64>,
    readout_b: Array1<f64>,
}

struct Step {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

struct Trace {
    steps: Vec<Step>,
    h_last: Array2<f64>,
    logits: Array2<f64>,
}

struct Gradients {
    w_input: Array2<f64>,
    w_hidden: Array2<f64>,
    bias: Array1<f64>,
    readout_w: Array2<f64>,
    readout_b: Array1<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl RecurrentModel {
    pub const STANDARD_HIDDEN: usize = 64;

    /// Uniform(+-1/sqrt(H)) weights; forget-gate bias starts at 1.
    pub fn new(input: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1.0 / (hidden as f64).sqrt();
        let mut u =
            |shape: (usize, usize)| Array2::from_shape_fn(shape, |_| rng.random_range(-k..k));
        let w_input = u((4 * hidden, input));
        let w_hidden = u((4 * hidden, hidden));
        let readout_w = u((classes, hidden));
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Self {
            w_input,
            w_hidden,
            bias,
            readout_w,
            readout_b: Array1::zeros(classes),
        }
    }

    /// 106 -> 64 hidden -> 7 dynamic classes.
    pub fn standard(seed: u64) -> Self {
        Self::new(
            FEATURE_LEN,
            Self::STANDARD_HIDDEN,
            GestureClass::DYNAMIC.len(),
            seed,
        )
    }

    pub fn zeros(input: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w_input: Array2::zeros((4 * hidden, input)),
            w_hidden: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
            readout_w: Array2::zeros((classes, hidden)),
            readout_b: Array1::zeros(classes),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.readout_w.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.arrays()
            .iter()
            .all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Class probabilities after reading a whole sequence.
    pub fn forward(&self, frames: &[&[f64]]) -> Result<Vec<f64>, GestureError> {
        if frames.is_empty() {
            return Err(GestureError::EmptySequence);
        }
        if let Some(bad) = frames.iter().find(|f| f.len() != self.input_dim()) {
            return Err(GestureError::ShapeMismatch {
                expected: self.input_dim(),
                got: bad.len(),
            });
        }
        let xs: Vec<Array2<f64>> = frames
            .iter()
            .map(|f| ArrayView2::from_shape((1, f.len()), f).unwrap().to_owned())
            .collect();
        let trace = self.run(&xs);
        Ok(softmax_rows(&trace.logits).row(0).to_vec())
    }

    /// Runs a batch; `xs[t]` holds time step `t` for every sequence (B x I).
    fn run(&self, xs: &[Array2<f64>]) -> Trace {
        let batch = xs[0].nrows();
        let hd = self.hidden_dim();
        let mut h = Array2::zeros((batch, hd));
        let mut c = Array2::zeros((batch, hd));
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let z = x.dot(&self.w_input.t()) + h.dot(&self.w_hidden.t()) + &self.bias;
            let i = z.slice(s![.., 0..hd]).mapv(sigmoid);
            let f = z.slice(s![.., hd..2 * hd]).mapv(sigmoid);
            let g = z.slice(s![.., 2 * hd..3 * hd]).mapv(f64::tanh);
            let o = z.slice(s![.., 3 * hd..4 * hd]).mapv(sigmoid);
            let c_new = &f * &c + &i * &g;
            let tanh_c = c_new.mapv(f64::tanh);
            let h_new = &o * &tanh_c;
            steps.push(Step {
                x: x.clone(),
                h_prev: h,
                c_prev: c,
                i,
                f,
                g,
                o,
                tanh_c,
            });
            h = h_new;
            c = c_new;
        }
        let logits = h.dot(&self.readout_w.t()) + &self.readout_b;
        Trace {
            steps,
            h_last: h,
            logits,
        }
    }

    /// Backpropagation through time of the mean cross-entropy, normalized by `total`.
    fn loss_and_grad(
        &self,
        xs: &[Array2<f64>],
        labels: &[usize],
        total: usize,
    ) -> (f64, Gradients) {
        let trace = self.run(xs);
        let loss = nll_from_logits(&trace.logits, labels);
        let mut dlogits = softmax_rows(&trace.logits);
        for (r, &y) in labels.iter().enumerate() {
            dlogits[[r, y]] -= 1.0;
        }
        dlogits /= total as f64;

        let hd = self.hidden_dim();
        let mut grads = Gradients {
            w_input: Array2::zeros(self.w_input.raw_dim()),
            w_hidden: Array2::zeros(self.w_hidden.raw_dim()),
            bias: Array1::zeros(self.bias.len()),
            readout_w: dlogits.t().dot(&trace.h_last),
            readout_b: dlogits.sum_axis(Axis(0)),
        };
        let mut dh = dlogits.dot(&self.readout_w);
        let mut dc: Array2<f64> = Array2::zeros(dh.raw_dim());
        for st in trace.steps.iter().rev() {
            let d_o = &dh * &st.tanh_c;
            dc = dc + &dh * &st.o * &st.tanh_c.mapv(|t| 1.0 - t * t);
            let di = &dc * &st.g;
            let dg = &dc * &st.i;
            let df = &dc * &st.c_prev;
            let dz = concatenate![
                Axis(1),
                di * &st.i.mapv(|v| v * (1.0 - v)),
                df * &st.f.mapv(|v| v * (1.0 - v)),
                dg * &st.g.mapv(|v| 1.0 - v * v),
                d_o * &st.o.mapv(|v| v * (1.0 - v))
            ];
            debug_assert_eq!(dz.ncols(), 4 * hd);
            grads.w_input += &dz.t().dot(&st.x);
            grads.w_hidden += &dz.t().dot(&st.h_prev);
            grads.bias += &dz.sum_axis(Axis(0));
            dh = dz.dot(&self.w_hidden);
            dc *= &st.f;
        }
        (loss, grads)
    }

    fn apply(&mut self, g: &Gradients, lr: f64) {
        self.w_input.scaled_add(-lr, &g.w_input);
        self.w_hidden.scaled_add(-lr, &g.w_hidden);
        self.bias.scaled_add(-lr, &g.bias);
        self.readout_w.scaled_add(-lr, &g.readout_w);
        self.readout_b.scaled_add(-lr, &g.readout_b);
    }

    fn arrays(&self) -> [&[f64]; 5] {
        [
            self.w_input.as_slice().unwrap(),
            self.w_hidden.as_slice().unwrap(),
            self.bias.as_slice().unwrap(),
            self.readout_w.as_slice().unwrap(),
            self.readout_b.as_slice().unwrap(),
        ]
    }

    fn arrays_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.w_input.as_slice_mut().unwrap(),
            self.w_hidden.as_slice_mut().unwrap(),
            self.bias.as_slice_mut().unwrap(),
            self.readout_w.as_slice_mut().unwrap(),
            self.readout_b.as_slice_mut().unwrap(),
        ]
    }
}

fn sequence_batch(seqs: &[&[f64]], len: usize, dim: usize) -> Vec<Array2<f64>> {
    (0..len)
        .map(|t| Array2::from_shape_fn((seqs.len(), dim), |(b, j)| seqs[b][t * dim + j]))
        .collect()
}

impl Differentiable for RecurrentModel {
    /// (frames, label)
    type Sample = (Vec<Vec<f64>>, usize);

    fn param_count(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    fn param(&self, i: usize) -> f64 {
        let arrays = self.arrays();
        let (k, off) = locate(arrays.iter().map(|a| a.len()), i);
        arrays[k][off]
    }

    fn set_param(&mut self, i: usize, value: f64) {
        let lens: Vec<usize> = self.arrays().iter().map(|a| a.len()).collect();
        let (k, off) = locate(lens, i);
        self.arrays_mut()[k][off] = value;
    }

    fn loss(&self, (frames, y): &Self::Sample) -> f64 {
        let xs: Vec<Array2<f64>> = frames
            .iter()
            .map(|f| Array2::from_shape_vec((1, f.len()), f.clone()).unwrap())
            .collect();
        nll_from_logits(&self.run(&xs).logits, &[*y])
    }

    fn gradient(&self, (frames, y): &Self::Sample) -> Vec<f64> {
        let xs: Vec<Array2<f64>> = frames
            .iter()
            .map(|f| Array2::from_shape_vec((1, f.len()), f.clone()).unwrap())
            .collect();
        let (_, g) = self.loss_and_grad(&xs, &[*y], 1);
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(g.w_input.iter());
        out.extend(g.w_hidden.iter());
        out.extend(g.bias.iter());
        out.extend(g.readout_w.iter());
        out.extend(g.readout_b.iter());
        out
    }
}

/// Class probabilities of the dynamic classifier for a frame sequence.
pub fn rnn_forward(
    model: &RecurrentModel,
    frames: &[FeatureVector],
) -> Result<Vec<f64>, GestureError> {
    let views: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
    model.forward(&views)
}

/// Trains a fresh standard-size recurrent model with minibatch SGD on the
/// dynamic training split (last 16 frames of each sample).
pub fn rnn_train(
    data: &GestureDataset,
    hyper: &TrainConfig,
    cam: &CameraIntrinsics,
) -> Result<TrainReport<RecurrentModel>, GestureError> {
    let mut seqs = Vec::new();
    let mut labels = Vec::new();
    for s in data.train() {
        let idx = GestureClass::DYNAMIC
            .iter()
            .position(|c| *c == s.label)
            .ok_or(GestureError::WrongClassKind(s.label, "dynamic"))?;
        if s.frames.is_empty() {
            return Err(GestureError::EmptySequence);
        }
        let window = &s.frames[s.frames.len().saturating_sub(DYNAMIC_WINDOW)..];
        let flat: Vec<f64> = window
            .iter()
            .flat_map(|f| extract_features(f, cam).as_slice().to_vec())
            .collect();
        seqs.push(flat);
        labels.push(idx);
    }
    if labels.is_empty() {
        return Err(GestureError::EmptyDataset);
    }
    let model = RecurrentModel::standard(hyper.seed);
    Ok(train_on_sequences(model, &seqs, &labels, hyper))
}

/// `seqs[i]` is a flattened (frames x input) sequence.
pub(crate) fn train_on_sequences(
    mut model: RecurrentModel,
    seqs: &[Vec<f64>],
    labels: &[usize],
    hyper: &TrainConfig,
) -> TrainReport<RecurrentModel> {
    let dim = model.input_dim();
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x0157_0157);
    let mut order: Vec<usize> = (0..n).collect();

    // groups of equal-length sequences run as one matrix batch
    let grouped = |idx: &[usize]| -> BTreeMap<usize, Vec<usize>> {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in idx {
            groups.entry(seqs[i].len() / dim).or_default().push(i);
        }
        groups
    };
    let batch_grad = |m: &RecurrentModel, idx: &[usize]| -> (f64, Option<Gradients>) {
        let mut loss = 0.0;
        let mut acc: Option<Gradients> = None;
        for (len, members) in grouped(idx) {
            let views: Vec<&[f64]> = members.iter().map(|&i| seqs[i].as_slice()).collect();
            let xs = sequence_batch(&views, len, dim);
            let ys: Vec<usize> = members.iter().map(|&i| labels[i]).collect();
            let (l, g) = m.loss_and_grad(&xs, &ys, idx.len());
            loss += l * members.len() as f64 / idx.len() as f64;
            acc = Some(match acc {
                None => g,
                Some(mut a) => {
                    a.w_input += &g.w_input;
                    a.w_hidden += &g.w_hidden;
                    a.bias += &g.bias;
                    a.readout_w += &g.readout_w;
                    a.readout_b += &g.readout_b;
                    a
                }
            });
        }
        (loss, acc)
    };

    let mut curve = vec![batch_grad(&model, &order).0];
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch.max(1)) {
            if let (_, Some(g)) = batch_grad(&model, chunk) {
                model.apply(&g, hyper.lr);
            }
        }
        let all: Vec<usize> = (0..n).collect();
        curve.push(batch_grad(&model, &all).0);
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

    fn random_frames(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = RecurrentModel::zeros(FEATURE_LEN, 64, 7);
        let frame = vec![0.5; FEATURE_LEN];
        let p = m.forward(&[&frame, &frame, &frame]).unwrap();
        for v in p {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let m = RecurrentModel::standard(0);
        assert!(matches!(m.forward(&[]), Err(GestureError::EmptySequence)));
    }

    #[test]
    fn single_frame_is_one_cell_step_then_readout() {
        let m = RecurrentModel::new(3, 2, 2, 5);
        let x = [0.2, -0.4, 0.9];
        // manual single step from zero state
        let z: Vec<f64> = (0..8)
            .map(|r| (0..3).map(|j| m.w_input[[r, j]] * x[j]).sum::<f64>() + m.bias[r])
            .collect();
        let h: Vec<f64> = (0..2)
            .map(|u| {
                let c = sigmoid(z[u]) * z[4 + u].tanh();
                sigmoid(z[6 + u]) * c.tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..2)
            .map(|k| m.readout_w[[k, 0]] * h[0] + m.readout_w[[k, 1]] * h[1] + m.readout_b[k])
            .collect();
        let p0 = 1.0 / (1.0 + (logits[1] - logits[0]).exp());
        let p = m.forward(&[&x]).unwrap();
        assert!((p[0] - p0).abs() < 1e-14);
    }

    #[test]
    fn output_depends_on_frame_order() {
        let m = RecurrentModel::new(4, 3, 2, 8);
        let (a, b) = ([1.0, 0.0, -1.0, 0.5], [-0.5, 0.3, 0.8, -1.0]);
        let fwd = m.forward(&[&a, &b]).unwrap();
        let rev = m.forward(&[&b, &a]).unwrap();
        assert!((fwd[0] - rev[0]).abs() > 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = RecurrentModel::new(10, 6, 4, 2);
        let frames = random_frames(&mut rng, 8, 10);
        let err = gradient_check(&m, &(frames, 1), 1e-5);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn memorizes_a_single_sequence_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq: Vec<f64> = random_frames(&mut rng, 8, FEATURE_LEN).concat();
        let hyper = TrainConfig {
            epochs: 150,
            ..TrainConfig::default()
        };
        let a = train_on_sequences(
            RecurrentModel::standard(1),
            std::slice::from_ref(&seq),
            &[4],
            &hyper,
        );
        let b = train_on_sequences(
            RecurrentModel::standard(1),
            std::slice::from_ref(&seq),
            &[4],
            &hyper,
        );
        assert_eq!(a.model, b.model);
        let frames: Vec<&[f64]> = seq.chunks(FEATURE_LEN).collect();
        let p = a.model.forward(&frames).unwrap();
        let argmax = p
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 4);
    }
}
