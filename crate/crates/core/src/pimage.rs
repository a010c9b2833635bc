//! Three-channel persistence images.
//!
//! Each pair is placed in the (birth, persistence) plane and contributes a
//! Gaussian of bandwidth `sigma` (in pixels) to every channel, weighted by
//! 1 (R), its persistence `delta` (G) and its mean radius (B). Kernels use
//! the continuous normalization `1 / (2 pi sigma^2)` and are evaluated at
//! integer pixel centers inside a square window of half-width
//! `truncation_radius * sigma`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tmd::{EnrichedPair, PersistenceDiagram};

pub const RAW_MAGIC: &[u8; 4] = b"PIMG";
pub const RAW_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid image config: {0}")]
    InvalidConfig(String),
    #[error("invalid channel set {0:?}")]
    InvalidChannels(String),
    #[error("malformed raw image: {0}")]
    MalformedRaw(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Png(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub fn weight(self, pair: &EnrichedPair) -> f64 {
        match self {
            Channel::R => 1.0,
            Channel::G => pair.delta,
            Channel::B => pair.mean_radius,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Non-empty subset of {R, G, B}, always iterated in R, G, B order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChannelSet([bool; 3]);

impl ChannelSet {
    pub const RGB: ChannelSet = ChannelSet([true, true, true]);

    pub fn new(channels: &[Channel]) -> Result<Self, ImageError> {
        let mut set = [false; 3];
        for c in channels {
            set[c.slot()] = true;
        }
        if set == [false; 3] {
            return Err(ImageError::InvalidChannels(String::new()));
        }
        Ok(Self(set))
    }

    /// The first `n` channels in R, G, B order.
    pub fn first(n: usize) -> Result<Self, ImageError> {
        let all = [Channel::R, Channel::G, Channel::B];
        Self::new(&all[..n.min(3)])
    }

    pub fn iter(self) -> impl Iterator<Item = Channel> {
        [Channel::R, Channel::G, Channel::B].into_iter().filter(move |c| self.0[c.slot()])
    }

    pub fn len(self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn contains(self, c: Channel) -> bool {
        self.0[c.slot()]
    }

    /// Plane index of `c` in an image with this channel set.
    pub fn position(self, c: Channel) -> Option<usize> {
        self.iter().position(|x| x == c)
    }
}

impl Default for ChannelSet {
    fn default() -> Self {
        Self::RGB
    }
}

impl FromStr for ChannelSet {
    type Err = ImageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chans = s
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'R' => Ok(Channel::R),
                'G' => Ok(Channel::G),
                'B' => Ok(Channel::B),
                _ => Err(ImageError::InvalidChannels(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(&chans).map_err(|_| ImageError::InvalidChannels(s.to_string()))
    }
}

impl TryFrom<String> for ChannelSet {
    type Error = ImageError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ChannelSet> for String {
    fn from(c: ChannelSet) -> String {
        c.to_string()
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.iter() {
            write!(f, "{c:?}")?;
        }
        Ok(())
    }
}

/// Extent of the (birth, persistence) plane mapped onto the pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub b_min: f64,
    pub b_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Bounds {
    /// Tight bounds over every pair of every diagram. Empty input gives the
    /// degenerate all-zero bounds.
    pub fn from_diagrams<'a>(diagrams: impl IntoIterator<Item = &'a PersistenceDiagram>) -> Self {
        let mut b = Bounds { b_min: f64::INFINITY, b_max: f64::NEG_INFINITY, p_min: f64::INFINITY, p_max: f64::NEG_INFINITY };
        for p in diagrams.into_iter().flat_map(|d| &d.pairs) {
            let pers = p.persistence();
            b.b_min = b.b_min.min(p.birth);
            b.b_max = b.b_max.max(p.birth);
            b.p_min = b.p_min.min(pers);
            b.p_max = b.p_max.max(pers);
        }
        if b.b_min > b.b_max {
            return Bounds { b_min: 0.0, b_max: 0.0, p_min: 0.0, p_max: 0.0 };
        }
        b
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum BoundsMode {
    /// Frozen bounds shared by every image (normally fit on a training split).
    Global(Bounds),
    /// Bounds recomputed from each diagram.
    #[default]
    PerImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageConfig {
    pub height: usize,
    pub width: usize,
    pub sigma: f64,
    pub channels: ChannelSet,
    pub bounds: BoundsMode,
    /// Kernel window half-width, in multiples of `sigma`.
    pub truncation_radius: f64,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self { height: 112, width: 112, sigma: 16.0, channels: ChannelSet::RGB, bounds: BoundsMode::PerImage, truncation_radius: 4.0 }
    }
}

impl ImageConfig {
    pub fn validate(&self) -> Result<(), ImageError> {
        let bad = |m: &str| Err(ImageError::InvalidConfig(m.to_string()));
        if self.height < 8 || self.width < 8 {
            return bad("height and width must be at least 8");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(self.truncation_radius > 0.0 && self.truncation_radius.is_finite()) {
            return bad("truncation radius must be positive");
        }
        if self.channels.is_empty() {
            return bad("channel set is empty");
        }
        Ok(())
    }

    pub fn with_global_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = BoundsMode::Global(bounds);
        self
    }

    pub fn resolve_bounds(&self, diagram: &PersistenceDiagram) -> Bounds {
        match self.bounds {
            BoundsMode::Global(b) => b,
            BoundsMode::PerImage => Bounds::from_diagrams([diagram]),
        }
    }
}

fn axis_to_grid(v: f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let span = (cells - 1) as f64;
    if hi <= lo || hi.is_nan() || lo.is_nan() {
        // Degenerate axis: everything lands on the center line.
        return span / 2.0;
    }
    (v.clamp(lo, hi) - lo) / (hi - lo) * span
}

/// Real-valued pixel coordinates `(px, py)` of a pair: birth on x, persistence
/// on y, row 0 holding `p_min`. Values outside the bounds are clamped.
pub fn map_to_grid(pair: &EnrichedPair, config: &ImageConfig, bounds: &Bounds) -> (f64, f64) {
    (
        axis_to_grid(pair.birth, bounds.b_min, bounds.b_max, config.width),
        axis_to_grid(pair.persistence(), bounds.p_min, bounds.p_max, config.height),
    )
}

/// `height x width x channels`, channel-last, row 0 = lowest persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceImage {
    pub height: usize,
    pub width: usize,
    pub channels: ChannelSet,
    pub data: Vec<f64>,
    pub neuron_id: String,
}

impl PersistenceImage {
    pub fn zeros(height: usize, width: usize, channels: ChannelSet) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * channels.len()], neuron_id: String::new() }
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn get(&self, row: usize, col: usize, plane: usize) -> f64 {
        self.data[(row * self.width + col) * self.n_channels() + plane]
    }

    /// One channel plane as a row-major `height x width` vector.
    pub fn plane(&self, c: Channel) -> Option<Vec<f64>> {
        let k = self.channels.position(c)?;
        let nc = self.n_channels();
        Some(self.data.iter().skip(k).step_by(nc).copied().collect())
    }

    pub fn channel_sum(&self, c: Channel) -> Option<f64> {
        self.plane(c).map(|p| p.iter().sum())
    }

    pub fn to_raw_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RAW_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(RAW_MAGIC);
        for dim in [self.height, self.width, self.n_channels()] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    /// Parses the RAW format. The header carries no channel identities, so a
    /// `C`-channel file is read as the first `C` of R, G, B.
    pub fn from_raw_bytes(bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.len() < RAW_HEADER_LEN || &bytes[..4] != RAW_MAGIC {
            return Err(ImageError::MalformedRaw("missing PIMG header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let (h, w, c) = (u32_at(4), u32_at(8), u32_at(12));
        if !(1..=3).contains(&c) {
            return Err(ImageError::MalformedRaw(format!("unsupported channel count {c}")));
        }
        let expected = RAW_HEADER_LEN + h * w * c * 4;
        if bytes.len() != expected {
            return Err(ImageError::MalformedRaw(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let data = bytes[RAW_HEADER_LEN..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64).collect();
        Ok(Self { height: h, width: w, channels: ChannelSet::first(c)?, data, neuron_id: String::new() })
    }

    pub fn export_raw(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        std::fs::File::create(path)?.write_all(&self.to_raw_bytes())?;
        Ok(())
    }

    pub fn import_raw(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut img = Self::from_raw_bytes(&bytes)?;
        img.neuron_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(img)
    }

    /// 8-bit RGB rendering for inspection. Each channel is scaled by its own
    /// maximum; absent channels are black. Rows are flipped so persistence
    /// grows upward on screen.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let nc = self.n_channels();
        let mut max = [0.0f64; 3];
        let slots: Vec<usize> = self.channels.iter().map(Channel::slot).collect();
        for px in self.data.chunks_exact(nc) {
            for (k, &s) in slots.iter().enumerate() {
                max[s] = max[s].max(px[k]);
            }
        }
        image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let row = self.height - 1 - y as usize;
            let base = (row * self.width + x as usize) * nc;
            let mut rgb = [0u8; 3];
            for (k, &s) in slots.iter().enumerate() {
                if max[s] > 0.0 {
                    rgb[s] = (self.data[base + k] / max[s] * 255.0).round().clamp(0.0, 255.0) as u8;
                }
            }
            image::Rgb(rgb)
        })
    }

    pub fn export_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        self.to_rgb8().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Renders a diagram with explicitly resolved bounds.
pub fn render_with_bounds(diagram: &PersistenceDiagram, config: &ImageConfig, bounds: &Bounds) -> PersistenceImage {
    let (h, w) = (config.height, config.width);
    let chans: Vec<Channel> = config.channels.iter().collect();
    let nc = chans.len();
    let mut img = PersistenceImage::zeros(h, w, config.channels);
    img.neuron_id = diagram.neuron_id.clone();

    let sigma = config.sigma;
    let two_var = 2.0 * sigma * sigma;
    let norm = 1.0 / (std::f64::consts::PI * two_var);
    let reach = config.truncation_radius * sigma;
    let mut gx = Vec::with_capacity(w);
    let mut gy = Vec::with_capacity(h);
    let mut weights = vec![0.0; nc];

    for pair in &diagram.pairs {
        let (px, py) = map_to_grid(pair, config, bounds);
        let x0 = (px - reach).ceil().max(0.0) as usize;
        let x1 = ((px + reach).floor() as isize).min(w as isize - 1);
        let y0 = (py - reach).ceil().max(0.0) as usize;
        let y1 = ((py + reach).floor() as isize).min(h as isize - 1);
        if x1 < x0 as isize || y1 < y0 as isize {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        gx.clear();
        gx.extend((x0..=x1).map(|x| (-(x as f64 - px).powi(2) / two_var).exp()));
        gy.clear();
        gy.extend((y0..=y1).map(|y| norm * (-(y as f64 - py).powi(2) / two_var).exp()));
        for (w_k, c) in weights.iter_mut().zip(&chans) {
            *w_k = c.weight(pair);
        }
        for (y, &ky) in (y0..=y1).zip(&gy) {
            let row = &mut img.data[(y * w + x0) * nc..(y * w + x1 + 1) * nc];
            for (cell, &kx) in row.chunks_exact_mut(nc).zip(&gx) {
                let k = ky * kx;
                for (v, &wt) in cell.iter_mut().zip(&weights) {
                    *v += wt * k;
                }
            }
        }
    }
    img
}

/// Renders a diagram, resolving bounds from the config.
pub fn render(diagram: &PersistenceDiagram, config: &ImageConfig) -> Result<PersistenceImage, ImageError> {
    config.validate()?;
    Ok(render_with_bounds(diagram, config, &config.resolve_bounds(diagram)))
}

/// Renders many diagrams in parallel; output order matches input order.
pub fn render_batch(diagrams: &[PersistenceDiagram], config: &ImageConfig) -> Result<Vec<PersistenceImage>, ImageError> {
    config.validate()?;
    Ok(diagrams.par_iter().map(|d| render_with_bounds(d, config, &config.resolve_bounds(d))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(b: f64, d: f64, r: f64) -> EnrichedPair {
        EnrichedPair { birth: b, death: d, delta: b - d, mean_radius: r }
    }

    fn diag(pairs: Vec<EnrichedPair>) -> PersistenceDiagram {
        PersistenceDiagram { neuron_id: "t".into(), pairs }
    }

    const B10: Bounds = Bounds { b_min: 0.0, b_max: 10.0, p_min: 0.0, p_max: 10.0 };

    #[test]
    fn grid_mapping() {
        let cfg = ImageConfig { height: 11, width: 11, ..Default::default() };
        assert_eq!(map_to_grid(&pair(5.0, 0.0, 1.0), &cfg, &B10), (5.0, 5.0));
        assert_eq!(map_to_grid(&pair(0.0, 0.0, 1.0), &cfg, &B10).0, 0.0);
        // clamped
        assert_eq!(map_to_grid(&pair(12.0, -1.0, 1.0), &cfg, &B10), (10.0, 10.0));
    }

    #[test]
    fn single_pair_per_image_bounds_lands_at_center() {
        let cfg = ImageConfig { height: 11, width: 21, ..Default::default() };
        let d = diag(vec![pair(7.0, 3.0, 1.0)]);
        let b = cfg.resolve_bounds(&d);
        assert_eq!(map_to_grid(&d.pairs[0], &cfg, &b), (10.0, 5.0));
    }

    #[test]
    fn mass_conservation_far_from_borders() {
        // 4 sigma = 64 px from every border needs a 129+ px grid at sigma 16.
        let cfg = ImageConfig { height: 160, width: 160, ..Default::default() };
        let bounds = Bounds { b_min: 0.0, b_max: 159.0, p_min: 0.0, p_max: 159.0 };
        let d = diag(vec![pair(80.0, 0.5, 2.5)]);
        let img = render_with_bounds(&d, &cfg, &bounds);
        let r = img.channel_sum(Channel::R).unwrap();
        assert!((1.0 - 1e-3..=1.0).contains(&r), "{r}");
        let g = img.channel_sum(Channel::G).unwrap() / d.pairs[0].delta;
        let b = img.channel_sum(Channel::B).unwrap() / 2.5;
        assert!((1.0 - 1e-3..=1.0).contains(&g));
        assert!((1.0 - 1e-3..=1.0).contains(&b));
    }

    #[test]
    fn empty_diagram_is_black() {
        let img = render(&diag(vec![]), &ImageConfig::default()).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
        assert_eq!(img.data.len(), 112 * 112 * 3);
        assert!(img.to_rgb8().pixels().all(|p| p.0 == [0, 0, 0]));
    }

    #[test]
    fn duplicated_pair_doubles_exactly() {
        let cfg = ImageConfig::default().with_global_bounds(B10);
        let one = render(&diag(vec![pair(4.0, 1.0, 0.8)]), &cfg).unwrap();
        let two = render(&diag(vec![pair(4.0, 1.0, 0.8); 2]), &cfg).unwrap();
        for (a, b) in one.data.iter().zip(&two.data) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn wider_kernel_lowers_peak() {
        let d = diag(vec![pair(5.0, 0.0, 1.0)]);
        let mut last = f64::INFINITY;
        for sigma in [2.0, 4.0, 8.0, 16.0, 24.0] {
            let cfg = ImageConfig { sigma, ..ImageConfig::default().with_global_bounds(B10) };
            let peak = render(&d, &cfg).unwrap().data.iter().copied().fold(0.0, f64::max);
            assert!(peak <= last);
            last = peak;
        }
    }

    #[test]
    fn channel_parsing_and_order() {
        let c: ChannelSet = "bR".parse().unwrap();
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![Channel::R, Channel::B]);
        assert_eq!(c.to_string(), "RB");
        assert!("".parse::<ChannelSet>().is_err());
        assert!("RX".parse::<ChannelSet>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ImageConfig { height: 4, ..Default::default() }.validate().is_err());
        assert!(ImageConfig { sigma: 0.0, ..Default::default() }.validate().is_err());
        assert!(ImageConfig::default().validate().is_ok());
    }

    #[test]
    fn raw_size_and_round_trip() {
        let cfg = ImageConfig::default().with_global_bounds(B10);
        let img = render(&diag(vec![pair(3.0, 1.0, 0.5), pair(9.0, 0.0, 1.5)]), &cfg).unwrap();
        let bytes = img.to_raw_bytes();
        assert_eq!(bytes.len(), 150_544);
        let back = PersistenceImage::from_raw_bytes(&bytes).unwrap();
        assert_eq!((back.height, back.width, back.n_channels()), (112, 112, 3));
        for (a, b) in img.data.iter().zip(&back.data) {
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }
        assert_eq!(back.to_raw_bytes(), bytes);
        assert!(PersistenceImage::from_raw_bytes(&bytes[..100]).is_err());
    }

    #[test]
    fn png_scaling_and_missing_channels() {
        let cfg = ImageConfig { channels: "RG".parse().unwrap(), ..ImageConfig::default().with_global_bounds(B10) };
        let img = render(&diag(vec![pair(5.0, 0.0, 1.0)]), &cfg).unwrap();
        let png = img.to_rgb8();
        assert_eq!(png.pixels().map(|p| p.0[0]).max(), Some(255));
        assert!(png.pixels().all(|p| p.0[2] == 0));
    }
}
