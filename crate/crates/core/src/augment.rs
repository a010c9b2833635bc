//! Persistence-space augmentation, applied to enriched pairs before rendering.
//!
//! Three independent operations, each gated once per diagram:
//! birth/death jitter with per-view bandwidths, a diagram-wide persistence
//! scale `alpha` on `delta`, and a diagram-wide radius factor `beta`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tmd::PersistenceDiagram;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("cannot augment an empty diagram")]
    EmptyDiagram,
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub enable_jitter: bool,
    pub enable_scale: bool,
    pub enable_radius: bool,
    /// Jitter bandwidths as fractions of the diagram's birth span.
    pub jitter_fraction_range: [f64; 2],
    pub scale_range: [f64; 2],
    pub radius_range: [f64; 2],
    /// Probability that each enabled operation fires for a given view.
    pub apply_probability: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enable_jitter: true,
            enable_scale: true,
            enable_radius: true,
            jitter_fraction_range: [0.01, 0.05],
            scale_range: [0.9, 1.1],
            radius_range: [0.85, 1.15],
            apply_probability: 0.5,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self { enable_jitter: false, enable_scale: false, enable_radius: false, ..Self::default() }
    }

    pub fn is_identity(&self) -> bool {
        !(self.enable_jitter || self.enable_scale || self.enable_radius) || self.apply_probability == 0.0
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: String| Err(AugmentError::InvalidConfig(m));
        for (name, [lo, hi]) in
            [("jitter_fraction_range", self.jitter_fraction_range), ("scale_range", self.scale_range), ("radius_range", self.radius_range)]
        {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} must be an ordered finite pair, got [{lo}, {hi}]"));
            }
        }
        if self.jitter_fraction_range[0] < 0.0 {
            return bad("jitter fractions must be non-negative".into());
        }
        if self.radius_range[0] <= 0.0 {
            return bad("radius factors must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return bad(format!("apply_probability {} outside [0, 1]", self.apply_probability));
        }
        Ok(())
    }
}

/// Parameters actually drawn for one augmented view.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentLog {
    /// `(sigma_b, sigma_d)` in filtration units.
    pub jitter: Option<(f64, f64)>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Produces one augmented view of `diagram`.
///
/// Draw order is fixed (gate, then parameters, per operation) so the result is
/// a pure function of the input, the config and the generator state.
pub fn augment_diagram<R: Rng + ?Sized>(
    diagram: &PersistenceDiagram,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(PersistenceDiagram, AugmentLog), AugmentError> {
    if diagram.is_empty() {
        return Err(AugmentError::EmptyDiagram);
    }
    cfg.validate()?;
    let mut out = diagram.clone();
    let mut log = AugmentLog::default();
    let fires = |enabled: bool, rng: &mut R| enabled && rng.random::<f64>() < cfg.apply_probability;

    if fires(cfg.enable_jitter, rng) {
        let (lo, hi) = out.pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.birth), hi.max(p.birth)));
        let span = hi - lo;
        let sigma_b = uniform(rng, cfg.jitter_fraction_range) * span;
        let sigma_d = uniform(rng, cfg.jitter_fraction_range) * span;
        for p in &mut out.pairs {
            let nb: f64 = rng.sample(StandardNormal);
            let nd: f64 = rng.sample(StandardNormal);
            let death = (p.death + sigma_d * nd).max(0.0);
            p.birth = (p.birth + sigma_b * nb).max(death);
            p.death = death;
        }
        log.jitter = Some((sigma_b, sigma_d));
    }
    if fires(cfg.enable_scale, rng) {
        let alpha = uniform(rng, cfg.scale_range);
        for p in &mut out.pairs {
            p.delta *= alpha;
        }
        log.alpha = Some(alpha);
    }
    if fires(cfg.enable_radius, rng) {
        let beta = uniform(rng, cfg.radius_range);
        for p in &mut out.pairs {
            p.mean_radius *= beta;
        }
        log.beta = Some(beta);
    }
    Ok((out, log))
}
