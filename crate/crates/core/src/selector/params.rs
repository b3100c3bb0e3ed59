use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posegeom::HeadLayout;

/// Fully connected layer, `y = W x + b` with `W` stored row-major (`out x in`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform in `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`; zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut d = Self::zeros(in_dim, out_dim);
        d.weight.iter_mut().for_each(|w| *w = rng.gen_range(-a..=a));
        d
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weight
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Accumulate `dy x^T` into this layer (used as a gradient buffer) and
    /// return `W^T dy` computed with `weights`.
    pub(crate) fn backward(&mut self, weights: &Dense, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias[o] += g;
            let row = o * self.in_dim;
            for (i, &xi) in x.iter().enumerate() {
                self.weight[row + i] += g * xi;
                dx[i] += g * weights.weight[row + i];
            }
        }
        dx
    }

    pub fn n_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(&self.bias)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Weights of both networks. The same type holds gradients.
///
/// - view classifier: `proj_w` (per view, `f_dim -> h_dim`), then
///   `head_w1` (`n_views * h_dim -> h_dim`), tanh, `head_w2` (`h_dim -> n_views`);
/// - pose predictor: `proj_p` (per view, `f_dim -> h_dim`), then for a pair
///   `head_p1` (`2 * h_dim -> h_dim`), tanh, `head_p2` (`h_dim -> pose classes`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorParams {
    pub n_views: usize,
    pub f_dim: usize,
    pub h_dim: usize,
    pub layout: HeadLayout,
    pub proj_w: Dense,
    pub head_w1: Dense,
    pub head_w2: Dense,
    pub proj_p: Dense,
    pub head_p1: Dense,
    pub head_p2: Dense,
}

impl SelectorParams {
    pub fn zeros(n_views: usize, f_dim: usize, h_dim: usize, layout: HeadLayout) -> Self {
        Self {
            n_views,
            f_dim,
            h_dim,
            layout,
            proj_w: Dense::zeros(f_dim, h_dim),
            head_w1: Dense::zeros(n_views * h_dim, h_dim),
            head_w2: Dense::zeros(h_dim, n_views),
            proj_p: Dense::zeros(f_dim, h_dim),
            head_p1: Dense::zeros(2 * h_dim, h_dim),
            head_p2: Dense::zeros(h_dim, layout.total_classes()),
        }
    }

    pub fn init(n_views: usize, f_dim: usize, h_dim: usize, layout: HeadLayout, rng: &mut impl Rng) -> Self {
        Self {
            n_views,
            f_dim,
            h_dim,
            layout,
            proj_w: Dense::glorot(f_dim, h_dim, rng),
            head_w1: Dense::glorot(n_views * h_dim, h_dim, rng),
            head_w2: Dense::glorot(h_dim, n_views, rng),
            proj_p: Dense::glorot(f_dim, h_dim, rng),
            head_p1: Dense::glorot(2 * h_dim, h_dim, rng),
            head_p2: Dense::glorot(h_dim, layout.total_classes(), rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_views, self.f_dim, self.h_dim, self.layout)
    }

    fn layers(&self) -> [&Dense; 6] {
        [
            &self.proj_w,
            &self.head_w1,
            &self.head_w2,
            &self.proj_p,
            &self.head_p1,
            &self.head_p2,
        ]
    }

    fn layers_mut(&mut self) -> [&mut Dense; 6] {
        [
            &mut self.proj_w,
            &mut self.head_w1,
            &mut self.head_w2,
            &mut self.proj_p,
            &mut self.head_p1,
            &mut self.head_p2,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|l| l.n_params()).sum()
    }

    /// All parameters in a fixed order: per layer, weights then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers().into_iter().flat_map(Dense::values).copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "flat parameter vector has {} entries, expected {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut it = flat.iter();
        for layer in self.layers_mut() {
            for v in layer.values_mut() {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &SelectorParams, scale: f64) {
        for (dst, src) in self.layers_mut().into_iter().zip(other.layers()) {
            for (d, s) in dst.values_mut().zip(src.values()) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.layers_mut() {
            layer.values_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(|l| l.values().all(|v| v.is_finite()))
    }

    pub(crate) fn check_consistent(&self) -> Result<()> {
        let (n, f, h) = (self.n_views, self.f_dim, self.h_dim);
        let expect = [
            (f, h),
            (n * h, h),
            (h, n),
            (f, h),
            (2 * h, h),
            (h, self.layout.total_classes()),
        ];
        for (layer, (i, o)) in self.layers().iter().zip(expect) {
            if layer.in_dim != i
                || layer.out_dim != o
                || layer.weight.len() != i * o
                || layer.bias.len() != o
            {
                return Err(Error::Dimension(format!(
                    "layer {}x{} inconsistent with n_views={n}, f_dim={f}, h_dim={h}",
                    layer.out_dim, layer.in_dim
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(())
    }
}
