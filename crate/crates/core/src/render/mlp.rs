//! The shared deferred-shading decoder: one ReLU hidden layer of 16 units,
//! sigmoid RGB output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{sigmoid, Vec3};
use crate::volume::FEATURE_CHANNELS;

pub const HIDDEN: usize = 16;
pub const OUTPUTS: usize = 3;
/// Frequency bands of the view-direction encoding.
pub const DEFAULT_FREQUENCIES: usize = 4;

pub fn encoding_dim(frequencies: usize) -> usize {
    3 + 6 * frequencies
}

/// `(d, sin(2^0 pi d), cos(2^0 pi d), ..., sin(2^(F-1) pi d), cos(2^(F-1) pi d))`.
/// Non-unit directions are normalized with a warning.
pub fn positional_encode(d: Vec3, frequencies: usize) -> Vec<f64> {
    let len = d.length();
    let d = if (len - 1.0).abs() > 1e-6 {
        log::warn!("normalizing view direction of length {len}");
        d.normalized()
    } else {
        d
    };
    let mut out = Vec::with_capacity(encoding_dim(frequencies));
    out.extend_from_slice(&d.to_array());
    for f in 0..frequencies {
        let s = (1u64 << f) as f64 * std::f64::consts::PI;
        out.extend(d.to_array().iter().map(|c| (s * c).sin()));
        out.extend(d.to_array().iter().map(|c| (s * c).cos()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyMlp {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub frequencies: usize,
    /// `hidden_dim x input_dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `output_dim x hidden_dim`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub input: Vec<f64>,
    pub hidden_pre: [f64; HIDDEN],
    pub rgb: [f64; OUTPUTS],
}

impl TinyMlp {
    pub fn zeros(frequencies: usize) -> Self {
        let input_dim = FEATURE_CHANNELS + encoding_dim(frequencies);
        TinyMlp {
            input_dim,
            hidden_dim: HIDDEN,
            output_dim: OUTPUTS,
            frequencies,
            w1: vec![0.0; HIDDEN * input_dim],
            b1: vec![0.0; HIDDEN],
            w2: vec![0.0; OUTPUTS * HIDDEN],
            b2: vec![0.0; OUTPUTS],
        }
    }

    /// Glorot-uniform weights, small positive hidden biases.
    pub fn random(seed: u64, frequencies: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mlp = TinyMlp::zeros(frequencies);
        let a1 = (6.0 / (mlp.input_dim + HIDDEN) as f64).sqrt();
        mlp.w1.iter_mut().for_each(|w| *w = rng.gen_range(-a1..a1));
        mlp.b1.iter_mut().for_each(|b| *b = rng.gen_range(0.0..0.1));
        let a2 = (6.0 / (HIDDEN + OUTPUTS) as f64).sqrt();
        mlp.w2.iter_mut().for_each(|w| *w = rng.gen_range(-a2..a2));
        mlp
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn validate(&self) -> Result<()> {
        let expect_in = FEATURE_CHANNELS + encoding_dim(self.frequencies);
        if self.hidden_dim != HIDDEN
            || self.output_dim != OUTPUTS
            || self.input_dim != expect_in
            || self.w1.len() != HIDDEN * expect_in
            || self.b1.len() != HIDDEN
            || self.w2.len() != OUTPUTS * HIDDEN
            || self.b2.len() != OUTPUTS
        {
            return Err(Error::Shape(format!(
                "MLP shapes {}x{} / {}x{} do not match {HIDDEN}x{expect_in} / {OUTPUTS}x{HIDDEN}",
                self.hidden_dim, self.input_dim, self.output_dim, self.hidden_dim
            )));
        }
        if self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).any(|v| !v.is_finite()) {
            return Err(Error::Range("non-finite MLP weight".into()));
        }
        Ok(())
    }

    /// Flat parameter view in the order w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
    }

    pub fn forward(&self, feature: &[f64], enc: &[f64]) -> Result<MlpTrace> {
        if feature.len() + enc.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "MLP expects {} inputs, got {} + {}",
                self.input_dim,
                feature.len(),
                enc.len()
            )));
        }
        let input: Vec<f64> = feature.iter().chain(enc).copied().collect();
        Ok(self.forward_input(input))
    }

    pub(crate) fn forward_input(&self, input: Vec<f64>) -> MlpTrace {
        let mut hidden_pre = [0.0; HIDDEN];
        for (j, h) in hidden_pre.iter_mut().enumerate() {
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            *h = self.b1[j] + row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>();
        }
        let mut rgb = [0.0; OUTPUTS];
        for (k, c) in rgb.iter_mut().enumerate() {
            let row = &self.w2[k * HIDDEN..(k + 1) * HIDDEN];
            let o = self.b2[k]
                + row
                    .iter()
                    .zip(&hidden_pre)
                    .map(|(w, h)| w * h.max(0.0))
                    .sum::<f64>();
            *c = sigmoid(o);
        }
        MlpTrace {
            input,
            hidden_pre,
            rgb,
        }
    }

    /// Backpropagates `d_rgb` through one pass, accumulating weight gradients
    /// into `grad` (same layout as [`TinyMlp::params`]) and returning the
    /// gradient with respect to the input vector.
    pub fn backward(&self, trace: &MlpTrace, d_rgb: [f64; OUTPUTS], grad: &mut [f64]) -> Vec<f64> {
        let n_w1 = self.w1.len();
        let (g_w1, rest) = grad.split_at_mut(n_w1);
        let (g_b1, rest) = rest.split_at_mut(HIDDEN);
        let (g_w2, g_b2) = rest.split_at_mut(OUTPUTS * HIDDEN);
        let mut d_hidden = [0.0; HIDDEN];
        for k in 0..OUTPUTS {
            let y = trace.rgb[k];
            let d_o = d_rgb[k] * y * (1.0 - y);
            g_b2[k] += d_o;
            for j in 0..HIDDEN {
                g_w2[k * HIDDEN + j] += d_o * trace.hidden_pre[j].max(0.0);
                d_hidden[j] += d_o * self.w2[k * HIDDEN + j];
            }
        }
        let mut d_input = vec![0.0; self.input_dim];
        for j in 0..HIDDEN {
            if trace.hidden_pre[j] <= 0.0 {
                continue;
            }
            let dh = d_hidden[j];
            g_b1[j] += dh;
            let row = j * self.input_dim;
            for i in 0..self.input_dim {
                g_w1[row + i] += dh * trace.input[i];
                d_input[i] += dh * self.w1[row + i];
            }
        }
        d_input
    }
}

/// View-dependent color of an accumulated ray feature.
pub fn decode(mlp: &TinyMlp, feature: &[f64], enc: &[f64]) -> Result<[f64; 3]> {
    Ok(mlp.forward(feature, enc)?.rgb)
}
