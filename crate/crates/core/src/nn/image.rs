//! Small patch-embedding encoder for persistence images.
//!
//! Input channels are z-scored with stored training-set statistics, the
//! image is zero-padded to a multiple of the patch size, each patch goes
//! through a shared linear embedding and activation, and the concatenated
//! patch tokens pass through two mixing layers.

use rand::Rng;

use super::{Activation, Linear, ModelError};
use crate::pimage::PersistenceImage;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoder {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub patch: usize,
    pub activation: Activation,
    pub embed: Linear,
    pub mix1: Linear,
    pub mix2: Linear,
    /// Per-channel input standardization (not trained).
    pub channel_mean: Vec<f64>,
    pub channel_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ImageTrace {
    patches: Vec<Vec<f64>>,
    tokens: Vec<f64>,
    mixed: Vec<f64>,
    pub output: Vec<f64>,
}

pub(crate) struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub patch: usize,
    pub embed_dim: usize,
    pub mix_hidden: usize,
    pub out_dim: usize,
}

impl ImageShape {
    fn grid(&self) -> (usize, usize) {
        (self.height.div_ceil(self.patch), self.width.div_ceil(self.patch))
    }

    fn n_patches(&self) -> usize {
        let (r, c) = self.grid();
        r * c
    }
}

impl ImageEncoder {
    pub(crate) fn build<R: Rng + ?Sized>(s: &ImageShape, activation: Activation, rng: Option<&mut R>) -> Self {
        let patch_len = s.patch * s.patch * s.channels;
        let tokens = s.n_patches() * s.embed_dim;
        let (embed, mix1, mix2) = match rng {
            Some(rng) => (
                Linear::init(patch_len, s.embed_dim, true, rng),
                Linear::init(tokens, s.mix_hidden, true, rng),
                Linear::init(s.mix_hidden, s.out_dim, true, rng),
            ),
            None => (
                Linear::zeros(patch_len, s.embed_dim, true),
                Linear::zeros(tokens, s.mix_hidden, true),
                Linear::zeros(s.mix_hidden, s.out_dim, true),
            ),
        };
        Self {
            height: s.height,
            width: s.width,
            channels: s.channels,
            patch: s.patch,
            activation,
            embed,
            mix1,
            mix2,
            channel_mean: vec![0.0; s.channels],
            channel_std: vec![1.0; s.channels],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.mix2.out_dim
    }

    pub fn zeros_like(&self) -> Self {
        Self { embed: self.embed.zeros_like(), mix1: self.mix1.zeros_like(), mix2: self.mix2.zeros_like(), ..self.clone() }
    }

    /// Fits the channel standardization on a set of (unaugmented) images.
    pub fn fit_standardization<'a>(&mut self, images: impl IntoIterator<Item = &'a PersistenceImage>) {
        let c = self.channels;
        let mut sum = vec![0.0; c];
        let mut sq = vec![0.0; c];
        let mut n = 0usize;
        for img in images {
            for px in img.data.chunks_exact(c) {
                for k in 0..c {
                    sum[k] += px[k];
                    sq[k] += px[k] * px[k];
                }
                n += 1;
            }
        }
        if n == 0 {
            return;
        }
        for k in 0..c {
            let mean = sum[k] / n as f64;
            let var = (sq[k] / n as f64 - mean * mean).max(0.0);
            self.channel_mean[k] = mean;
            self.channel_std[k] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
    }

    fn patches(&self, img: &PersistenceImage) -> Result<Vec<Vec<f64>>, ModelError> {
        if img.height != self.height || img.width != self.width || img.n_channels() != self.channels {
            return Err(ModelError::ShapeMismatch(format!(
                "image {}x{}x{} but encoder expects {}x{}x{}",
                img.height,
                img.width,
                img.n_channels(),
                self.height,
                self.width,
                self.channels
            )));
        }
        let (p, c) = (self.patch, self.channels);
        let (rows, cols) = (self.height.div_ceil(p), self.width.div_ceil(p));
        let mut out = Vec::with_capacity(rows * cols);
        for pr in 0..rows {
            for pc in 0..cols {
                let mut v = vec![0.0; p * p * c];
                for dy in 0..p {
                    let y = pr * p + dy;
                    if y >= self.height {
                        break;
                    }
                    for dx in 0..p {
                        let x = pc * p + dx;
                        if x >= self.width {
                            break;
                        }
                        for k in 0..c {
                            let raw = img.data[(y * self.width + x) * c + k];
                            v[(dy * p + dx) * c + k] = (raw - self.channel_mean[k]) / self.channel_std[k];
                        }
                    }
                }
                out.push(v);
            }
        }
        Ok(out)
    }

    pub fn forward_trace(&self, img: &PersistenceImage) -> Result<ImageTrace, ModelError> {
        let patches = self.patches(img)?;
        let e = self.embed.out_dim;
        let mut tokens = vec![0.0; patches.len() * e];
        for (t, patch) in patches.iter().enumerate() {
            let slot = &mut tokens[t * e..(t + 1) * e];
            self.embed.forward_into(patch, slot);
            slot.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        }
        let mut mixed = self.mix1.forward(&tokens);
        mixed.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        let output = self.mix2.forward(&mixed);
        Ok(ImageTrace { patches, tokens, mixed, output })
    }

    pub fn forward(&self, img: &PersistenceImage) -> Result<Vec<f64>, ModelError> {
        Ok(self.forward_trace(img)?.output)
    }

    pub fn backward(&self, trace: &ImageTrace, d_out: &[f64], grad: &mut ImageEncoder) {
        let mut d_mixed = vec![0.0; trace.mixed.len()];
        self.mix2.backward(&trace.mixed, d_out, &mut grad.mix2, Some(&mut d_mixed));
        for (d, y) in d_mixed.iter_mut().zip(&trace.mixed) {
            *d *= self.activation.grad_from_output(*y);
        }
        let mut d_tokens = vec![0.0; trace.tokens.len()];
        self.mix1.backward(&trace.tokens, &d_mixed, &mut grad.mix1, Some(&mut d_tokens));
        let e = self.embed.out_dim;
        for (t, patch) in trace.patches.iter().enumerate() {
            let dt: Vec<f64> = (0..e).map(|k| d_tokens[t * e + k] * self.activation.grad_from_output(trace.tokens[t * e + k])).collect();
            self.embed.backward(patch, &dt, &mut grad.embed, None);
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        [&self.embed, &self.mix1, &self.mix2].into_iter().flat_map(Linear::tensors).collect()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.embed, &mut self.mix1, &mut self.mix2].into_iter().flat_map(Linear::tensors_mut).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pimage::ChannelSet;
    use crate::rng::substream;

    fn shape() -> ImageShape {
        ImageShape { height: 20, width: 20, channels: 3, patch: 8, embed_dim: 4, mix_hidden: 6, out_dim: 5 }
    }

    fn noisy_image(seed: u64) -> PersistenceImage {
        let mut rng = substream(seed, "img");
        let mut img = PersistenceImage::zeros(20, 20, ChannelSet::RGB);
        img.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        img
    }

    #[test]
    fn zero_image_zero_bias_gives_zero() {
        let enc = ImageEncoder::build(&shape(), Activation::Tanh, Some(&mut substream(1, "init")));
        let out = enc.forward(&PersistenceImage::zeros(20, 20, ChannelSet::RGB)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_scale_sensitive() {
        let enc = ImageEncoder::build(&shape(), Activation::Tanh, Some(&mut substream(2, "init")));
        let img = noisy_image(3);
        assert_eq!(enc.forward(&img).unwrap(), enc.forward(&img.clone()).unwrap());
        let mut doubled = img.clone();
        doubled.data.iter_mut().for_each(|v| *v *= 2.0);
        assert_ne!(enc.forward(&img).unwrap(), enc.forward(&doubled).unwrap());
    }

    #[test]
    fn wrong_shape_rejected() {
        let enc = ImageEncoder::build::<rand_chacha::ChaCha8Rng>(&shape(), Activation::Tanh, None);
        assert!(matches!(enc.forward(&PersistenceImage::zeros(16, 20, ChannelSet::RGB)), Err(ModelError::ShapeMismatch(_))));
    }

    #[test]
    fn standardization_fit() {
        let mut enc = ImageEncoder::build::<rand_chacha::ChaCha8Rng>(&shape(), Activation::Tanh, None);
        let mut img = PersistenceImage::zeros(20, 20, ChannelSet::RGB);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = if i % 3 == 0 { (i % 2) as f64 * 4.0 } else { 2.0 };
        }
        enc.fit_standardization([&img]);
        assert_eq!(enc.channel_mean[0], 2.0);
        assert_eq!(enc.channel_std[0], 2.0);
        assert_eq!(enc.channel_std[1], 1.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let enc = ImageEncoder::build(&shape(), Activation::Tanh, Some(&mut substream(4, "init")));
        let img = noisy_image(5);
        let w: Vec<f64> = (0..5).map(|k| 1.0 - 0.3 * k as f64).collect();
        let obj = |e: &ImageEncoder| super::super::dot(&e.forward(&img).unwrap(), &w);
        let trace = enc.forward_trace(&img).unwrap();
        let mut grad = enc.zeros_like();
        enc.backward(&trace, &w, &mut grad);
        let eps = 1e-6;
        for t in 0..enc.tensors().len() {
            let len = enc.tensors()[t].len();
            for j in (0..len).step_by(37) {
                let mut p = enc.clone();
                p.tensors_mut()[t][j] += eps;
                let mut m = enc.clone();
                m.tensors_mut()[t][j] -= eps;
                let fd = (obj(&p) - obj(&m)) / (2.0 * eps);
                let a = grad.tensors()[t][j];
                assert!((fd - a).abs() <= 1e-7 * (1.0 + a.abs()), "tensor {t}[{j}]: {fd} vs {a}");
            }
        }
    }
}
