use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::nn::Embedding;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    #[default]
    Concat,
    Add,
    /// `w * tree + (1 - w) * image`.
    WeightedAdd(f64),
}

impl FromStr for FusionStrategy {
    type Err = EvalError;

    /// `concat`, `add`, or `weighted_add:<w>`.
    fn from_str(s: &str) -> Result<Self, EvalError> {
        let bad = || EvalError::InvalidStrategy(s.to_string());
        match s.split_once(':') {
            None if s == "concat" => Ok(Self::Concat),
            None if s == "add" => Ok(Self::Add),
            Some(("weighted_add", w)) => {
                let w: f64 = w.parse().map_err(|_| bad())?;
                if (0.0..=1.0).contains(&w) {
                    Ok(Self::WeightedAdd(w))
                } else {
                    Err(bad())
                }
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Concat => write!(f, "concat"),
            Self::Add => write!(f, "add"),
            Self::WeightedAdd(w) => write!(f, "weighted_add:{w}"),
        }
    }
}

/// Fuses a tree and an image embedding. Each input is l2-normalized first so
/// neither modality dominates by scale; the result is renormalized.
/// With `pad`, additive strategies zero-pad the shorter input.
pub fn fuse(tree: &Embedding, image: &Embedding, strategy: FusionStrategy, pad: bool) -> Result<Embedding, EvalError> {
    let t = Embedding::l2_normalized(tree.values.clone()).values;
    let v = Embedding::l2_normalized(image.values.clone()).values;
    let (wt, wv) = match strategy {
        FusionStrategy::Concat => {
            return Ok(Embedding::l2_normalized(t.into_iter().chain(v).collect()));
        }
        FusionStrategy::Add => (1.0, 1.0),
        FusionStrategy::WeightedAdd(w) => (w, 1.0 - w),
    };
    if t.len() != v.len() && !pad {
        return Err(EvalError::DimMismatch(t.len(), v.len()));
    }
    let n = t.len().max(v.len());
    let at = |x: &[f64], i: usize| x.get(i).copied().unwrap_or(0.0);
    Ok(Embedding::l2_normalized((0..n).map(|i| wt * at(&t, i) + wv * at(&v, i)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::raw(v.to_vec())
    }

    #[test]
    fn concat_dims_add() {
        let z = fuse(&e(&[1.0; 16]), &e(&[2.0; 48]), FusionStrategy::Concat, false).unwrap();
        assert_eq!(z.dim(), 64);
        assert!((z.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_one_returns_tree() {
        let t = e(&[3.0, 4.0]);
        let z = fuse(&t, &e(&[1.0, -7.0]), FusionStrategy::WeightedAdd(1.0), false).unwrap();
        assert_eq!(z.values, vec![0.6, 0.8]);
    }

    #[test]
    fn cancellation_is_flagged() {
        let z = fuse(&e(&[1.0, 2.0]), &e(&[-1.0, -2.0]), FusionStrategy::Add, false).unwrap();
        assert!(!z.normalized && z.values == vec![0.0, 0.0]);
    }

    #[test]
    fn add_needs_equal_dims_unless_padded() {
        assert!(fuse(&e(&[1.0]), &e(&[1.0, 1.0]), FusionStrategy::Add, false).is_err());
        assert_eq!(fuse(&e(&[1.0]), &e(&[1.0, 1.0]), FusionStrategy::Add, true).unwrap().dim(), 2);
    }

    #[test]
    fn concat_first_block_recovers_tree() {
        let t = e(&[0.3, -0.2, 0.9]);
        let z = fuse(&t, &e(&[5.0, 1.0]), FusionStrategy::Concat, false).unwrap();
        let block = Embedding::l2_normalized(z.values[..3].to_vec());
        let tn = Embedding::l2_normalized(t.values.clone());
        for (a, b) in block.values.iter().zip(&tn.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_round_trip() {
        for s in ["concat", "add", "weighted_add:0.25"] {
            assert_eq!(s.parse::<FusionStrategy>().unwrap().to_string(), s);
        }
        assert!("weighted_add:2".parse::<FusionStrategy>().is_err());
        assert!("mul".parse::<FusionStrategy>().is_err());
    }
}
