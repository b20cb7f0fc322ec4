/// A model with a flat parameter view and an analytic loss gradient.
pub trait Differentiable: Clone {
    type Sample;

    fn param_count(&self) -> usize;
    fn param(&self, i: usize) -> f64;
    fn set_param(&mut self, i: usize, value: f64);
    fn loss(&self, sample: &Self::Sample) -> f64;
    /// Gradient of `loss` in flat parameter order.
    fn gradient(&self, sample: &Self::Sample) -> Vec<f64>;
}

/// Max over parameters of `|analytic - fd| / max(|analytic|, |fd|, 1e-12)`,
/// with `fd` the central difference at step `epsilon`.
pub fn gradient_check<M: Differentiable>(model: &M, sample: &M::Sample, epsilon: f64) -> f64 {
    debug_assert!(
        (1e-7..=1e-4).contains(&epsilon),
        "epsilon {epsilon} outside [1e-7, 1e-4]"
    );
    let analytic = model.gradient(sample);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, a) in analytic.iter().enumerate() {
        let original = probe.param(i);
        probe.set_param(i, original + epsilon);
        let plus = probe.loss(sample);
        probe.set_param(i, original - epsilon);
        let minus = probe.loss(sample);
        probe.set_param(i, original);
        let fd = (plus - minus) / (2.0 * epsilon);
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    worst
}

/// Maps a flat index onto (array, offset) given the array lengths.
pub(crate) fn locate(lens: impl IntoIterator<Item = usize>, mut i: usize) -> (usize, usize) {
    for (k, len) in lens.into_iter().enumerate() {
        if i < len {
            return (k, i);
        }
        i -= len;
    }
    panic!("parameter index out of range");
}

#[cfg(test)]
mod tests {
    use super::*;

    /// loss(w) = (w * x - y)^2
    #[derive(Clone)]
    struct Linear {
        w: f64,
    }

    impl Differentiable for Linear {
        type Sample = (f64, f64);
        fn param_count(&self) -> usize {
            1
        }
        fn param(&self, _: usize) -> f64 {
            self.w
        }
        fn set_param(&mut self, _: usize, v: f64) {
            self.w = v;
        }
        fn loss(&self, (x, y): &(f64, f64)) -> f64 {
            (self.w * x - y).powi(2)
        }
        fn gradient(&self, (x, y): &(f64, f64)) -> Vec<f64> {
            vec![2.0 * (self.w * x - y) * x]
        }
    }

    #[test]
    fn linear_model_is_exact() {
        let err = gradient_check(&Linear { w: 0.7 }, &(1.5, -0.25), 1e-5);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        #[derive(Clone)]
        struct Bad(Linear);
        impl Differentiable for Bad {
            type Sample = (f64, f64);
            fn param_count(&self) -> usize {
                1
            }
            fn param(&self, i: usize) -> f64 {
                self.0.param(i)
            }
            fn set_param(&mut self, i: usize, v: f64) {
                self.0.set_param(i, v)
            }
            fn loss(&self, s: &(f64, f64)) -> f64 {
                self.0.loss(s)
            }
            fn gradient(&self, s: &(f64, f64)) -> Vec<f64> {
                vec![self.0.gradient(s)[0] * 1.01]
            }
        }
        assert!(gradient_check(&Bad(Linear { w: 0.7 }), &(1.5, -0.25), 1e-5) > 1e-3);
    }

    #[test]
    fn locate_walks_arrays() {
        assert_eq!(locate([3, 2, 4], 0), (0, 0));
        assert_eq!(locate([3, 2, 4], 3), (1, 0));
        assert_eq!(locate([3, 2, 4], 8), (2, 3));
    }
}
