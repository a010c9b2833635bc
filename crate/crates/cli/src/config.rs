//! Run configuration: a JSON file with command-line overrides on top.
//!
//! The root `seed` is copied into every stochastic component after overrides
//! are applied, so a single number pins down initialization, batching,
//! augmentation, splits, the synthetic generator and permutation tests.

use std::path::{Path, PathBuf};

use clap::Args;
use neurotopo_core::contrastive::LrSchedule;
use neurotopo_core::eval::{Distance, FusionStrategy};
use neurotopo_core::pimage::ChannelSet;
use neurotopo_core::{AugmentConfig, ImageConfig, ModelDims, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Neighbor counts; the first one drives predictions and complementarity.
    pub k: Vec<usize>,
    pub fusion: FusionStrategy,
    pub distance: Distance,
    pub test_fraction: f64,
    pub rsa_permutations: usize,
    pub retrieval_k: Vec<usize>,
    pub pad: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            k: vec![20],
            fusion: FusionStrategy::Concat,
            distance: Distance::Cosine,
            test_fraction: 0.3,
            rsa_permutations: 1000,
            retrieval_k: vec![1, 5],
            pad: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub n_per_class: usize,
    pub classes: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { n_per_class: 64, classes: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub image: ImageConfig,
    pub model: ModelDims,
    pub train: TrainConfig,
    pub eval: EvalOptions,
    pub synth: SynthOptions,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| config(e).context(format!("reading {}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config(e).context(format!("parsing {}", path.display())))
    }

    /// Pushes the root seed into every component and checks the result.
    pub fn finalize(mut self) -> CliResult<Self> {
        self.train.seed = self.seed;
        self.train.augment.seed = self.seed;
        self.image.validate().map_err(config)?;
        self.train.validate().map_err(config)?;
        if !(0.0..1.0).contains(&self.eval.test_fraction) {
            return Err(config(anyhow::anyhow!("test_fraction must be in [0, 1), got {}", self.eval.test_fraction)));
        }
        if self.eval.k.is_empty() || self.eval.k.contains(&0) {
            return Err(config(anyhow::anyhow!("k values must be positive and at least one must be given")));
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(compact.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Args)]
pub struct ImageArgs {
    /// Grid height in pixels
    #[arg(long)]
    pub height: Option<usize>,
    /// Grid width in pixels
    #[arg(long)]
    pub width: Option<usize>,
    /// Kernel bandwidth in pixels
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Channel subset, any of R, G, B (e.g. RG)
    #[arg(long)]
    pub channels: Option<ChannelSet>,
    /// Kernel truncation radius in units of sigma
    #[arg(long)]
    pub truncation_radius: Option<f64>,
}

impl ImageArgs {
    pub fn apply(&self, cfg: &mut ImageConfig) {
        set(&mut cfg.height, self.height);
        set(&mut cfg.width, self.width);
        set(&mut cfg.sigma, self.sigma);
        set(&mut cfg.channels, self.channels);
        set(&mut cfg.truncation_radius, self.truncation_radius);
    }
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    /// Disable birth/death jitter
    #[arg(long)]
    pub no_jitter: bool,
    /// Disable persistence scaling
    #[arg(long)]
    pub no_scale: bool,
    /// Disable radius perturbation
    #[arg(long)]
    pub no_radius: bool,
    /// Jitter bandwidth range as fractions of the birth span, "lo,hi"
    #[arg(long, value_parser = parse_range)]
    pub jitter_range: Option<[f64; 2]>,
    /// Persistence scale range, "lo,hi"
    #[arg(long, value_parser = parse_range)]
    pub scale_range: Option<[f64; 2]>,
    /// Radius factor range, "lo,hi"
    #[arg(long, value_parser = parse_range)]
    pub radius_range: Option<[f64; 2]>,
    /// Probability that each enabled operation fires
    #[arg(long)]
    pub apply_probability: Option<f64>,
}

impl AugmentArgs {
    pub fn apply(&self, cfg: &mut AugmentConfig) {
        cfg.enable_jitter &= !self.no_jitter;
        cfg.enable_scale &= !self.no_scale;
        cfg.enable_radius &= !self.no_radius;
        set(&mut cfg.jitter_fraction_range, self.jitter_range);
        set(&mut cfg.scale_range, self.scale_range);
        set(&mut cfg.radius_range, self.radius_range);
        set(&mut cfg.apply_probability, self.apply_probability);
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Decoupled weight decay
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Linear warmup steps; enables the warmup-cosine schedule
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    /// Final learning rate of the cosine schedule
    #[arg(long, requires = "warmup_steps")]
    pub min_lr: Option<f64>,
    /// Recorded for reference only
    #[arg(long, value_parser = parse_range)]
    pub adam_betas: Option<[f64; 2]>,
    /// Recorded for reference only
    #[arg(long)]
    pub reference_epochs: Option<usize>,
    /// Recorded for reference only
    #[arg(long)]
    pub reference_warmup_epochs: Option<usize>,
    /// Tree hidden width
    #[arg(long)]
    pub tree_hidden: Option<usize>,
    /// Projection output width
    #[arg(long)]
    pub proj_out: Option<usize>,
    #[command(flatten)]
    pub augment: AugmentArgs,
}

impl TrainArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        set(&mut t.steps, self.steps);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.learning_rate, self.learning_rate);
        set(&mut t.weight_decay, self.weight_decay);
        set(&mut t.adam_betas, self.adam_betas);
        set(&mut t.reference_epochs, self.reference_epochs);
        set(&mut t.reference_warmup_epochs, self.reference_warmup_epochs);
        if let Some(warmup_steps) = self.warmup_steps {
            t.schedule = LrSchedule::WarmupCosine { warmup_steps, min_lr: self.min_lr.unwrap_or(0.0) };
        }
        self.augment.apply(&mut t.augment);
        set(&mut cfg.model.tree_hidden, self.tree_hidden);
        set(&mut cfg.model.proj_out, self.proj_out);
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Neighbor count; repeat to evaluate several
    #[arg(long = "k")]
    pub k: Vec<usize>,
    /// concat, add or weighted_add:<w>
    #[arg(long)]
    pub fusion: Option<FusionStrategy>,
    /// cosine or euclidean
    #[arg(long)]
    pub distance: Option<Distance>,
    /// Held-out fraction per class
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Permutations for the RSA p-value
    #[arg(long)]
    pub rsa_permutations: Option<usize>,
    /// Recall cutoff for cross-modal retrieval; repeatable
    #[arg(long = "retrieval-k")]
    pub retrieval_k: Vec<usize>,
    /// Zero-pad the shorter embedding for additive fusion
    #[arg(long)]
    pub pad: bool,
}

impl EvalArgs {
    pub fn apply(&self, cfg: &mut EvalOptions) {
        if !self.k.is_empty() {
            cfg.k = self.k.clone();
        }
        if !self.retrieval_k.is_empty() {
            cfg.retrieval_k = self.retrieval_k.clone();
        }
        set(&mut cfg.fusion, self.fusion);
        set(&mut cfg.distance, self.distance);
        set(&mut cfg.test_fraction, self.test_fraction);
        set(&mut cfg.rsa_permutations, self.rsa_permutations);
        cfg.pad |= self.pad;
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected \"lo,hi\", got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok([lo, hi])
}

/// Creates `dir` if needed.
pub fn ensure_dir(dir: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::data(e).context(format!("creating {}", dir.display())))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_reaches_every_component() {
        let cfg = RunConfig { seed: 42, ..Default::default() }.finalize().unwrap();
        assert_eq!(cfg.train.seed, 42);
        assert_eq!(cfg.train.augment.seed, 42);
    }

    #[test]
    fn json_round_trip_and_hash() {
        let cfg = RunConfig::default().finalize().unwrap();
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn unknown_top_level_key_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_range("0.9, 1.1").unwrap(), [0.9, 1.1]);
        assert!(parse_range("0.9").is_err());
    }
}
