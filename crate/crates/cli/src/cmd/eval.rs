use std::path::Path;

use anyhow::anyhow;
use neurotopo_core::contrastive::encode;
use neurotopo_core::eval::{
    complementarity, fuse, knn_classify, predictions_csv, recall_at_k, stratified_split, EvalError, EvalReport, LabeledEmbeddingSet,
    Modality, ModalityResult, Split,
};
use neurotopo_core::{Checkpoint, Embedding};

use crate::config::{ensure_dir, RunConfig};
use crate::data::{labels_for, load_samples, write};
use crate::error::{config, data, CliError, CliResult};

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::KTooLarge { .. } | EvalError::ZeroK | EvalError::InvalidStrategy(_) | EvalError::DimMismatch(..) => config(e),
        _ => data(e),
    }
}

fn values(emb: &[Embedding], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| emb[i].values.clone()).collect()
}

/// Tree, image and fused kNN for every requested k, cross-modal retrieval
/// and the complementarity report, all on the held-out split.
pub fn run(checkpoint: &Path, data_dir: &Path, out: &Path, cfg: &RunConfig) -> CliResult<()> {
    let ck = Checkpoint::load(checkpoint).map_err(|e| data(e).context(format!("loading {}", checkpoint.display())))?;
    let samples = load_samples(data_dir)?;
    let labels = labels_for(data_dir, &samples)?.ok_or_else(|| data(anyhow!("{} has no labels.csv", data_dir.display())))?;
    if cfg.eval.test_fraction <= 0.0 {
        return Err(config(anyhow!("eval needs a positive test_fraction")));
    }
    let (train, test) = stratified_split(&labels, cfg.eval.test_fraction, cfg.seed);
    if train.is_empty() || test.is_empty() {
        return Err(data(anyhow!("split of {} samples left an empty side", samples.len())));
    }

    let enc = encode(&ck, &samples)?;
    let tree: Vec<Embedding> = enc.iter().map(|e| e.tree_backbone.clone()).collect();
    let image: Vec<Embedding> = enc.iter().map(|e| e.image_backbone.clone()).collect();
    let fused =
        tree.iter().zip(&image).map(|(t, v)| fuse(t, v, cfg.eval.fusion, cfg.eval.pad)).collect::<Result<Vec<_>, _>>().map_err(eval_err)?;

    let sets = [(Modality::Tree, &tree), (Modality::Image, &image), (Modality::Fused, &fused)]
        .map(|(m, emb)| LabeledEmbeddingSet::new(emb.clone(), labels.clone(), Split::Train, m));
    let mut knn = Vec::new();
    let mut first: Vec<Vec<usize>> = Vec::new();
    for (ki, &k) in cfg.eval.k.iter().enumerate() {
        for set in &sets {
            let set = set.as_ref().map_err(|e| data(anyhow!("{e}")))?;
            let r =
                knn_classify(&set.select(&train, Split::Train), &set.select(&test, Split::Test), k, cfg.eval.distance).map_err(eval_err)?;
            knn.push(ModalityResult { modality: set.modality, k, accuracy: r.accuracy });
            if ki == 0 {
                first.push(r.predictions);
            }
        }
    }

    let test_labels: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let comp = complementarity(
        &first[0],
        &first[1],
        &first[2],
        &test_labels,
        &values(&tree, &test),
        &values(&image, &test),
        cfg.eval.rsa_permutations,
        cfg.seed,
    )
    .map_err(eval_err)?;

    let tq: Vec<Embedding> = test.iter().map(|&i| enc[i].tree_projected.clone()).collect();
    let iq: Vec<Embedding> = test.iter().map(|&i| enc[i].image_projected.clone()).collect();
    let mut retrieval = Vec::new();
    for &k in &cfg.eval.retrieval_k {
        retrieval.push(("tree_to_image".to_string(), k, recall_at_k(&tq, &iq, k).map_err(eval_err)?));
        retrieval.push(("image_to_tree".to_string(), k, recall_at_k(&iq, &tq, k).map_err(eval_err)?));
    }

    let report = EvalReport {
        n_train: train.len(),
        n_test: test.len(),
        fusion: cfg.eval.fusion.to_string(),
        distance: format!("{:?}", cfg.eval.distance).to_lowercase(),
        knn,
        retrieval,
        complementarity: comp,
    };
    let out = ensure_dir(out)?;
    let ids: Vec<String> = test.iter().map(|&i| samples[i].id.clone()).collect();
    write(&out.join("report.json"), report.to_json())?;
    write(&out.join("report.txt"), report.to_text())?;
    write(&out.join("predictions.csv"), predictions_csv(&ids, &test_labels, &first[0], &first[1], &first[2]))?;
    print!("{}", report.to_text());
    Ok(())
}
