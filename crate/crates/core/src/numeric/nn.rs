//! Fixed-architecture network pieces with hand-written backward passes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Anything made of flat parameter slices. Gradients are stored in a value of
/// the same type so updates and flattening are shape-agnostic.
pub trait Params {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |s| out.extend_from_slice(s));
        out
    }

    fn assign(&mut self, flat: &[f64]) {
        let mut at = 0;
        self.visit_mut(&mut |s| {
            s.copy_from_slice(&flat[at..at + s.len()]);
            at += s.len();
        });
        debug_assert_eq!(at, flat.len());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.len());
        n
    }

    fn zeroed(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.visit_mut(&mut |s| s.fill(0.0));
        z
    }

    /// `self += scale · other`, element by element.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut at = 0;
        self.visit_mut(&mut |s| {
            for v in s.iter_mut() {
                *v += scale * flat[at];
                at += 1;
            }
        });
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |s| ok &= s.iter().all(|v| v.is_finite()));
        ok
    }
}

impl Params for Matrix {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(self.data())
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.data_mut())
    }
}

impl<T: Params> Params for Vec<T> {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.iter().for_each(|p| p.visit(f))
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.iter_mut().for_each(|p| p.visit_mut(f))
    }
}

/// Weight (`in × out`) and optional bias of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl LayerParams {
    pub fn zeros(inputs: usize, outputs: usize, bias: bool) -> Self {
        Self {
            weight: Matrix::zeros(inputs, outputs),
            bias: bias.then(|| vec![0.0; outputs]),
        }
    }

    /// Glorot-scaled normal weights, zero bias.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, bias: bool, rng: &mut R) -> Self {
        let std = (2.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            weight: Matrix::from_vec(inputs, outputs, data).expect("shape"),
            bias: bias.then(|| vec![0.0; outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    /// `X W + b` applied to every row.
    pub fn affine(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(&self.weight)?;
        if let Some(b) = &self.bias {
            for i in 0..y.rows() {
                for (v, bj) in y.row_mut(i).iter_mut().zip(b) {
                    *v += bj;
                }
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients for `Y = X W + b` and returns `∂L/∂X`.
    pub fn affine_backward(&self, x: &Matrix, grad_y: &Matrix, grad: &mut LayerParams) -> Matrix {
        grad.weight.add_assign(&x.t_matmul(grad_y).expect("shape"));
        if let Some(gb) = grad.bias.as_mut() {
            for i in 0..grad_y.rows() {
                for (g, v) in gb.iter_mut().zip(grad_y.row(i)) {
                    *g += v;
                }
            }
        }
        grad_y.matmul_t(&self.weight).expect("shape")
    }
}

impl Params for LayerParams {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(self.weight.data());
        if let Some(b) = &self.bias {
            f(b);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.weight.data_mut());
        if let Some(b) = self.bias.as_mut() {
            f(b);
        }
    }
}

pub fn relu(m: &Matrix) -> Matrix {
    m.map(|v| v.max(0.0))
}

pub(crate) fn relu_mask(pre: &Matrix, grad: &Matrix) -> Matrix {
    pre.zip_map(grad, |p, g| if p > 0.0 { g } else { 0.0 })
}

/// Intermediate values of a two-layer GCN pass.
#[derive(Debug, Clone)]
pub struct GcnCache {
    x: Matrix,
    a_norm: Matrix,
    ax: Matrix,
    pre: Matrix,
    hidden: Matrix,
    ah: Matrix,
}

/// `Ā · ReLU(Ā X W₀) · W₁`
pub fn gcn_forward(x: &Matrix, a_norm: &Matrix, p0: &LayerParams, p1: &LayerParams) -> Result<Matrix> {
    Ok(gcn_forward_cached(x, a_norm, p0, p1)?.0)
}

pub fn gcn_forward_cached(
    x: &Matrix,
    a_norm: &Matrix,
    p0: &LayerParams,
    p1: &LayerParams,
) -> Result<(Matrix, GcnCache)> {
    if !a_norm.is_square() || a_norm.rows() != x.rows() {
        return Err(Error::arg(format!(
            "gcn: adjacency {:?} does not match features {:?}",
            a_norm.shape(),
            x.shape()
        )));
    }
    if p0.inputs() != x.cols() || p1.inputs() != p0.outputs() {
        return Err(Error::arg("gcn: layer shapes do not chain"));
    }
    let ax = a_norm.matmul(x)?;
    let pre = p0.affine(&ax)?;
    let hidden = relu(&pre);
    let ah = a_norm.matmul(&hidden)?;
    let out = p1.affine(&ah)?;
    Ok((
        out,
        GcnCache {
            x: x.clone(),
            a_norm: a_norm.clone(),
            ax,
            pre,
            hidden,
            ah,
        },
    ))
}

/// Gradients flowing out of a GCN pass.
pub struct GcnGrads {
    pub x: Matrix,
    pub a_norm: Matrix,
}

/// Accumulates layer gradients into `g0`/`g1`; returns input gradients.
pub fn gcn_backward(
    cache: &GcnCache,
    p0: &LayerParams,
    p1: &LayerParams,
    grad_out: &Matrix,
    g0: &mut LayerParams,
    g1: &mut LayerParams,
) -> GcnGrads {
    let g_ah = p1.affine_backward(&cache.ah, grad_out, g1);
    let mut g_a = g_ah.matmul_t(&cache.hidden).expect("shape");
    let g_hidden = cache.a_norm.t_matmul(&g_ah).expect("shape");
    let g_pre = relu_mask(&cache.pre, &g_hidden);
    let g_ax = p0.affine_backward(&cache.ax, &g_pre, g0);
    g_a.add_assign(&g_ax.matmul_t(&cache.x).expect("shape"));
    let g_x = cache.a_norm.t_matmul(&g_ax).expect("shape");
    GcnGrads { x: g_x, a_norm: g_a }
}

/// Affine layers with ReLU between them and none after the last.
pub fn fnn_forward(x: &[f64], layers: &[LayerParams]) -> Result<Vec<f64>> {
    let (y, _) = fnn_forward_rows(&Matrix::row_vector(x), layers)?;
    Ok(y.row(0).to_vec())
}

#[derive(Debug, Clone)]
pub struct FnnCache {
    inputs: Vec<Matrix>,
    pres: Vec<Matrix>,
}

/// Row-wise FNN over a batch of inputs.
pub fn fnn_forward_rows(x: &Matrix, layers: &[LayerParams]) -> Result<(Matrix, FnnCache)> {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pres = Vec::with_capacity(layers.len());
    let mut h = x.clone();
    for (i, layer) in layers.iter().enumerate() {
        if layer.inputs() != h.cols() {
            return Err(Error::arg(format!(
                "fnn layer {i} expects {} inputs, got {}",
                layer.inputs(),
                h.cols()
            )));
        }
        let pre = layer.affine(&h)?;
        inputs.push(h);
        h = if i + 1 < layers.len() {
            relu(&pre)
        } else {
            pre.clone()
        };
        pres.push(pre);
    }
    Ok((h, FnnCache { inputs, pres }))
}

/// Accumulates into `grads` (same layout as `layers`); returns `∂L/∂X`.
pub fn fnn_backward(
    cache: &FnnCache,
    layers: &[LayerParams],
    grad_out: &Matrix,
    grads: &mut [LayerParams],
) -> Matrix {
    let mut g = grad_out.clone();
    for i in (0..layers.len()).rev() {
        if i + 1 < layers.len() {
            g = relu_mask(&cache.pres[i], &g);
        }
        g = layers[i].affine_backward(&cache.inputs[i], &g, &mut grads[i]);
    }
    g
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Probabilities are clamped to `[PROB_FLOOR, 1 − PROB_FLOOR]` inside logs.
pub const PROB_FLOOR: f64 = 1e-7;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Binary cross-entropy of one prediction.
pub fn bce(p: f64, target: f64) -> f64 {
    let p = clamp_prob(p);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// `∂ bce(σ(z), t) / ∂z`, zero where the clamp is active.
pub fn bce_logit_grad(p: f64, target: f64) -> f64 {
    if !(PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&p) {
        return 0.0;
    }
    p - target
}

/// KL divergence of `N(mu, diag(sigma2))` from `N(0, I)`.
pub fn kl_gaussian(mu: &[f64], sigma2: &[f64]) -> Result<f64> {
    if mu.len() != sigma2.len() {
        return Err(Error::arg("kl: mean and variance lengths differ"));
    }
    if let Some(v) = sigma2.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::arg(format!("kl: variance must be positive, got {v}")));
    }
    Ok(0.5
        * mu.iter()
            .zip(sigma2)
            .map(|(m, s)| s + m * m - 1.0 - s.ln())
            .sum::<f64>())
}

/// Gradients of [`kl_gaussian`] with respect to `mu` and `sigma2`.
pub fn kl_gaussian_grad(mu: &[f64], sigma2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        mu.to_vec(),
        sigma2.iter().map(|s| 0.5 * (1.0 - 1.0 / s)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_layer(w: f64) -> LayerParams {
        LayerParams {
            weight: Matrix::from_vec(1, 1, vec![w]).unwrap(),
            bias: None,
        }
    }

    #[test]
    fn gcn_examples() {
        let one = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let out = gcn_forward(&one, &one, &scalar_layer(2.0), &scalar_layer(3.0)).unwrap();
        assert_eq!(out.data(), &[6.0]);
        let zero = gcn_forward(&one, &one, &scalar_layer(0.0), &scalar_layer(3.0)).unwrap();
        assert_eq!(zero.data(), &[0.0]);
        assert!(gcn_forward(&Matrix::zeros(2, 1), &one, &scalar_layer(1.0), &scalar_layer(1.0)).is_err());
    }

    #[test]
    fn fnn_examples() {
        let ident = LayerParams {
            weight: Matrix::identity(3),
            bias: Some(vec![0.0; 3]),
        };
        assert_eq!(
            fnn_forward(&[1.0, -2.0, 3.0], &[ident]).unwrap(),
            vec![1.0, -2.0, 3.0]
        );

        let zero = LayerParams {
            weight: Matrix::zeros(2, 2),
            bias: Some(vec![0.5, -1.5]),
        };
        assert_eq!(
            fnn_forward(&[4.0, 5.0], &[zero.clone(), zero]).unwrap(),
            vec![0.5, -1.5]
        );

        assert_eq!(
            fnn_forward(&[1.0], &[scalar_layer(2.0), scalar_layer(3.0)]).unwrap(),
            vec![6.0]
        );
        assert!(fnn_forward(&[1.0, 2.0], &[scalar_layer(2.0)]).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_gaussian(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!((kl_gaussian(&[2.0], &[1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(kl_gaussian(&[0.0], &[0.0]).is_err());
        assert!(kl_gaussian(&[0.0], &[-1.0]).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(sigmoid(1.0) > sigmoid(0.5));
    }
}
