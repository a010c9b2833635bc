use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image::ImageShape;
use super::{Activation, ImageEncoder, ModelError, ProjectionHead, TreeLstm};
use crate::features::ZScoreStats;
use crate::pimage::ImageConfig;
use crate::rng::substream;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NTCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Shapes of every learnable component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub tree_hidden: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub image_channels: usize,
    pub patch: usize,
    pub patch_embed: usize,
    pub mix_hidden: usize,
    pub image_out: usize,
    pub proj_hidden: usize,
    pub proj_out: usize,
    pub activation: Activation,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            tree_hidden: 32,
            image_height: 112,
            image_width: 112,
            image_channels: 3,
            patch: 16,
            patch_embed: 8,
            mix_hidden: 64,
            image_out: 48,
            proj_hidden: 32,
            proj_out: 16,
            activation: Activation::Tanh,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            self.tree_hidden,
            self.image_height,
            self.image_width,
            self.image_channels,
            self.patch,
            self.patch_embed,
            self.mix_hidden,
            self.image_out,
            self.proj_hidden,
            self.proj_out,
        ];
        if dims.contains(&0) || self.image_channels > 3 {
            return Err(ModelError::ShapeMismatch(format!("invalid model dims {self:?}")));
        }
        Ok(())
    }

    fn image_shape(&self) -> ImageShape {
        ImageShape {
            height: self.image_height,
            width: self.image_width,
            channels: self.image_channels,
            patch: self.patch,
            embed_dim: self.patch_embed,
            mix_hidden: self.mix_hidden,
            out_dim: self.image_out,
        }
    }
}

/// Both encoders, both projection heads, and the log-temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub tree: TreeLstm,
    pub image: ImageEncoder,
    pub tree_head: ProjectionHead,
    pub image_head: ProjectionHead,
    pub log_tau: f64,
}

pub const INITIAL_TAU: f64 = 0.07;

impl ModelParams {
    /// Deterministic initialization from `seed`.
    pub fn init(seed: u64, dims: ModelDims) -> Result<Self, ModelError> {
        dims.validate()?;
        let mut rng = substream(seed, "init");
        let tree = TreeLstm::init(dims.tree_hidden, &mut rng);
        let image = ImageEncoder::build(&dims.image_shape(), dims.activation, Some(&mut rng));
        let tree_head = ProjectionHead::init(dims.tree_hidden, dims.proj_hidden, dims.proj_out, dims.activation, &mut rng);
        let image_head = ProjectionHead::init(dims.image_out, dims.proj_hidden, dims.proj_out, dims.activation, &mut rng);
        Ok(Self { dims, tree, image, tree_head, image_head, log_tau: INITIAL_TAU.ln() })
    }

    /// Same shapes, all values zero (gradient accumulator).
    pub fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims,
            tree: self.tree.zeros_like(),
            image: self.image.zeros_like(),
            tree_head: self.tree_head.zeros_like(),
            image_head: self.image_head.zeros_like(),
            log_tau: 0.0,
        }
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }

    /// Trainable tensors (everything except `log_tau`) in declared order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.tree.tensors();
        v.extend(self.image.tensors());
        v.extend(self.tree_head.tensors());
        v.extend(self.image_head.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.tree.tensors_mut();
        v.extend(self.image.tensors_mut());
        v.extend(self.tree_head.tensors_mut());
        v.extend(self.image_head.tensors_mut());
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum::<usize>() + 1
    }

    /// `self += scale * other`, including `log_tau`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        self.log_tau += scale * other.log_tau;
    }

    pub fn l2_norm(&self) -> f64 {
        (self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>() + self.log_tau * self.log_tau).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.log_tau.is_finite() && self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Input preprocessing frozen at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Preprocess {
    pub feature_stats: ZScoreStats,
    pub image: ImageConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub preprocess: Preprocess,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dims: ModelDims,
    preprocess: Preprocess,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::MalformedCheckpoint("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Checkpoint {
    /// Binary layout: magic, version, JSON header (dims + preprocessing),
    /// tensor count, then each tensor as `u64` length and little-endian `f64`
    /// values: `log_tau`, trainable tensors in declared order, image channel
    /// means, image channel stds.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header =
            serde_json::to_vec(&Header { dims: self.params.dims, preprocess: self.preprocess.clone() }).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let log_tau = [self.params.log_tau];
        let mut tensors: Vec<&[f64]> = vec![&log_tau];
        tensors.extend(self.params.tensors());
        tensors.push(&self.params.image.channel_mean);
        tensors.push(&self.params.image.channel_std);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |m: String| ModelError::MalformedCheckpoint(m);
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hlen = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(hlen)?)?;
        let mut params = ModelParams::init(0, header.dims)?;
        let count = r.u32()? as usize;
        let mut read_tensor = |dst: &mut [f64]| -> Result<(), ModelError> {
            let len = r.u64()? as usize;
            if len != dst.len() {
                return Err(bad(format!("tensor length {len}, expected {}", dst.len())));
            }
            for (v, b) in dst.iter_mut().zip(r.take(len * 8)?.chunks_exact(8)) {
                *v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
            }
            Ok(())
        };
        let mut log_tau = [0.0];
        read_tensor(&mut log_tau)?;
        let expected = params.tensors().len() + 3;
        if count != expected {
            return Err(bad(format!("{count} tensors, expected {expected}")));
        }
        for t in params.tensors_mut() {
            read_tensor(t)?;
        }
        read_tensor(&mut params.image.channel_mean)?;
        read_tensor(&mut params.image.channel_std)?;
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes".into()));
        }
        params.log_tau = log_tau[0];
        Ok(Self { params, preprocess: header.preprocess })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
