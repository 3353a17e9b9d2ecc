//! Dense kernels for the predictor: matrices, linear layers with manual
//! reverse-mode gradients, activations, binary cross-entropy and Adam.

mod adam;
mod checkpoint;
mod matrix;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use matrix::Matrix;

use rand::Rng;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// A learnable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Matrix<T>) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fully connected layer, `y = x Wᵀ + b` with `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> LinearLayer<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Param::zeros(output, input), bias: Param::zeros(1, output) }
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        Self { weight: Param::new(Matrix::uniform(output, input, limit, rng)), bias: Param::zeros(1, output) }
    }

    pub fn from_parts(weight: Matrix<T>, bias: Vec<T>) -> Result<Self, NnError> {
        if bias.len() != weight.rows() {
            return Err(NnError::ShapeMismatch(format!("bias {} for {} outputs", bias.len(), weight.rows())));
        }
        Ok(Self { weight: Param::new(weight), bias: Param::new(Matrix::row_vector(bias)) })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>, NnError> {
        let mut y = x.matmul_t(&self.weight.value)?;
        y.add_row(self.bias.value.as_slice())?;
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `∂L/∂x`.
    pub fn backward(&mut self, x: &Matrix<T>, upstream: &Matrix<T>) -> Result<Matrix<T>, NnError> {
        self.backward_params(x, upstream)?;
        upstream.matmul(&self.weight.value)
    }

    /// Accumulates parameter gradients only; for layers fed by constants.
    pub fn backward_params(&mut self, x: &Matrix<T>, upstream: &Matrix<T>) -> Result<(), NnError> {
        if upstream.cols() != self.output_dim() || upstream.rows() != x.rows() || x.cols() != self.input_dim() {
            return Err(NnError::ShapeMismatch(format!(
                "linear backward: x {}x{}, upstream {}x{}, layer {}->{}",
                x.rows(),
                x.cols(),
                upstream.rows(),
                upstream.cols(),
                self.input_dim(),
                self.output_dim()
            )));
        }
        upstream.t_matmul_acc(x, &mut self.weight.grad)?;
        upstream.col_sums_acc(self.bias.grad.as_mut_slice());
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.weight.zero_grad();
        self.bias.zero_grad();
    }
}

pub fn relu<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| v.max(T::zero()))
}

/// Gradient through ReLU given its pre-activation.
pub fn relu_backward<T: Scalar>(pre: &Matrix<T>, upstream: &Matrix<T>) -> Matrix<T> {
    let mut out = upstream.clone();
    out.as_mut_slice().iter_mut().zip(pre.as_slice()).for_each(|(g, &p)| {
        if p <= T::zero() {
            *g = T::zero();
        }
    });
    out
}

pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu_grad<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        slope
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Binary cross-entropy on a single logit: returns `(loss, ∂loss/∂logit)`.
pub fn bce_loss<T: Scalar>(logit: T, label: bool) -> (T, T) {
    let y = if label { T::one() } else { T::zero() };
    (softplus(logit) - y * logit, sigmoid(logit) - y)
}

/// In-place softmax over a slice.
pub fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_through() {
        let layer = LinearLayer::from_parts(Matrix::<f64>::identity(3), vec![0.0; 3]).unwrap();
        let x = Matrix::from_vec(2, 3, vec![1., -2., 3., 0.5, 0., 7.]).unwrap();
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layer = LinearLayer::<f64>::xavier(4, 3, &mut rng);
        let x = Matrix::uniform(2, 4, 1.0, &mut rng);
        let down = layer.backward(&x, &Matrix::zeros(2, 3)).unwrap();
        assert_eq!(down.max_abs(), 0.0);
        assert_eq!(layer.weight.grad.max_abs(), 0.0);
        assert_eq!(layer.bias.grad.max_abs(), 0.0);
        assert!(layer.backward(&x, &Matrix::zeros(3, 3)).is_err());
    }

    /// L = Σ c ⊙ (x Wᵀ + b) for fixed random c; central differences.
    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut layer = LinearLayer::<f64>::xavier(4, 3, &mut rng);
        layer.bias.value = Matrix::uniform(1, 3, 1.0, &mut rng);
        let x = Matrix::uniform(5, 4, 1.0, &mut rng);
        let c = Matrix::uniform(5, 3, 1.0, &mut rng);
        let loss = |l: &LinearLayer<f64>, x: &Matrix<f64>| -> f64 {
            let y = l.forward(x).unwrap();
            y.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum()
        };
        let dx = layer.backward(&x, &c).unwrap();
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for i in 0..12 {
            let mut p = layer.clone();
            let mut q = layer.clone();
            p.weight.value.as_mut_slice()[i] += h;
            q.weight.value.as_mut_slice()[i] -= h;
            let num = (loss(&p, &x) - loss(&q, &x)) / (2.0 * h);
            assert!(rel(layer.weight.grad.as_slice()[i], num) < 1e-6);
        }
        for i in 0..3 {
            let mut p = layer.clone();
            let mut q = layer.clone();
            p.bias.value.as_mut_slice()[i] += h;
            q.bias.value.as_mut_slice()[i] -= h;
            let num = (loss(&p, &x) - loss(&q, &x)) / (2.0 * h);
            assert!(rel(layer.bias.grad.as_slice()[i], num) < 1e-6);
        }
        for i in 0..20 {
            let mut xp = x.clone();
            let mut xq = x.clone();
            xp.as_mut_slice()[i] += h;
            xq.as_mut_slice()[i] -= h;
            let num = (loss(&layer, &xp) - loss(&layer, &xq)) / (2.0 * h);
            assert!(rel(dx.as_slice()[i], num) < 1e-6);
        }
    }

    #[test]
    fn bce_reference_values() {
        let ln2 = std::f64::consts::LN_2;
        let (l, d) = bce_loss(0.0f64, true);
        assert!((l - ln2).abs() < 1e-15 && (d + 0.5).abs() < 1e-15);
        let (l, d) = bce_loss(0.0f64, false);
        assert!((l - ln2).abs() < 1e-15 && (d - 0.5).abs() < 1e-15);
        // ln(1 + e^-2) = 0.126928..., σ(2) - 1 = -0.119203...
        let (l, d) = bce_loss(2.0f64, true);
        assert!((l - 0.126928).abs() < 5e-7, "{l}");
        assert!((d + 0.119203).abs() < 5e-7, "{d}");
    }

    #[test]
    fn bce_is_stable() {
        for &z in &[-1e6f64, -700.0, -50.0, -1.0, 0.0, 1.0, 50.0, 700.0, 1e6] {
            for label in [false, true] {
                let (l, d) = bce_loss(z, label);
                assert!(l.is_finite() && d.is_finite(), "{z} {label}");
                assert!(l >= 0.0);
            }
        }
    }

    #[test]
    fn bce_gradient_matches_finite_difference() {
        for &z in &[-3.0f64, -0.4, 0.7, 2.5] {
            for label in [false, true] {
                let h = 1e-5;
                let num = (bce_loss(z + h, label).0 - bce_loss(z - h, label).0) / (2.0 * h);
                assert!((bce_loss(z, label).1 - num).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut v = vec![1000.0f64, 1001.0, 999.0];
        softmax_in_place(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v[1] > v[0] && v[0] > v[2]);
    }
}
