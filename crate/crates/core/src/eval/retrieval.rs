use serde::Serialize;

use super::{Distance, EvalError};
use crate::nn::Embedding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalHit {
    /// Index into the gallery.
    pub id: usize,
    pub score: f64,
}

/// For each query, the `top_k` gallery items by descending cosine similarity,
/// ties by smaller gallery index.
pub fn retrieve(queries: &[Embedding], gallery: &[Embedding], top_k: usize) -> Result<Vec<Vec<RetrievalHit>>, EvalError> {
    if gallery.is_empty() {
        return Err(EvalError::EmptyGallery);
    }
    let dim = gallery[0].dim();
    if let Some(bad) = queries.iter().chain(gallery).find(|e| e.dim() != dim) {
        return Err(EvalError::DimMismatch(dim, bad.dim()));
    }
    Ok(queries
        .iter()
        .map(|q| {
            let mut hits: Vec<RetrievalHit> = gallery
                .iter()
                .enumerate()
                .map(|(id, g)| RetrievalHit { id, score: 1.0 - Distance::Cosine.eval(&q.values, &g.values) })
                .collect();
            hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
            hits.truncate(top_k);
            hits
        })
        .collect())
}

/// Percent of queries `i` whose paired gallery item `i` appears in the top `k`.
pub fn recall_at_k(queries: &[Embedding], gallery: &[Embedding], k: usize) -> Result<f64, EvalError> {
    if queries.len() != gallery.len() {
        return Err(EvalError::LengthMismatch(format!("{} queries, {} gallery items", queries.len(), gallery.len())));
    }
    let ranked = retrieve(queries, gallery, k)?;
    let hits = ranked.iter().enumerate().filter(|(i, r)| r.iter().any(|h| h.id == *i)).count();
    Ok(100.0 * hits as f64 / queries.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::l2_normalized(v.to_vec())
    }

    #[test]
    fn own_pair_ranks_first() {
        let g = vec![e(&[1.0, 0.0, 0.0]), e(&[0.0, 1.0, 0.0]), e(&[0.6, 0.8, 0.0])];
        let r = retrieve(&[g[1].clone()], &g, 5).unwrap();
        assert_eq!(r[0][0], RetrievalHit { id: 1, score: 1.0 });
        assert_eq!(r[0].len(), 3);
    }

    #[test]
    fn orthogonal_gallery_orders_by_id() {
        let g = vec![e(&[0.0, 1.0, 0.0]), e(&[0.0, 0.0, 1.0]), e(&[0.0, -1.0, 1.0])];
        let r = retrieve(&[e(&[1.0, 0.0, 0.0])], &g, 2).unwrap();
        assert_eq!(r[0].iter().map(|h| h.id).collect::<Vec<_>>(), vec![0, 1]);
        assert!(r[0].iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn empty_gallery() {
        assert!(matches!(retrieve(&[e(&[1.0])], &[], 1), Err(EvalError::EmptyGallery)));
    }

    #[test]
    fn recall_of_identical_sets() {
        let g = vec![e(&[1.0, 0.1]), e(&[0.1, 1.0]), e(&[-1.0, 0.3])];
        assert_eq!(recall_at_k(&g, &g, 1).unwrap(), 100.0);
    }
}
