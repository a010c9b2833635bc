//! Tree morphologies to persistence diagrams, persistence images and a
//! contrastive tree/image dual encoder.
//!
//! Pipeline: [`swc`] parsing, radial [`filtration`], elder-rule pairing in
//! [`tmd`], kernel rendering in [`pimage`], diagram [`augment`]ation, the
//! [`nn`] encoders, [`contrastive`] training, and [`eval`].

pub mod augment;
pub mod contrastive;
pub mod eval;
pub mod features;
pub mod filtration;
pub mod nn;
pub mod pimage;
pub mod rng;
pub mod swc;
pub mod tmd;

pub use augment::{augment_diagram, AugmentConfig, AugmentLog};
pub use contrastive::{infonce_loss, Sample, StepLog, TrainConfig, Trainer};
pub use features::{compute_node_features, NodeFeatures, ZScoreStats};
pub use filtration::{compute_filtration, FiltrationMap};
pub use nn::{Checkpoint, Embedding, ModelDims, ModelParams};
pub use pimage::{render, Bounds, BoundsMode, Channel, ChannelSet, ImageConfig, PersistenceImage};
pub use swc::{MorphTree, NodeId, SwcRecord};
pub use tmd::{ElderRuleConfig, EnrichedPair, PersistenceDiagram, PersistencePair};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Swc(#[from] swc::SwcError),
    #[error(transparent)]
    Filtration(#[from] filtration::FiltrationError),
    #[error(transparent)]
    Tmd(#[from] tmd::TmdError),
    #[error(transparent)]
    Image(#[from] pimage::ImageError),
    #[error(transparent)]
    Augment(#[from] augment::AugmentError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Model(#[from] nn::ModelError),
    #[error(transparent)]
    Contrastive(#[from] contrastive::ContrastiveError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Synth(#[from] eval::synth::SynthError),
}
