use std::fmt::Write as _;

use serde::Serialize;

use super::{ComplementarityReport, Modality};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalityResult {
    pub modality: Modality,
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_train: usize,
    pub n_test: usize,
    pub fusion: String,
    pub distance: String,
    pub knn: Vec<ModalityResult>,
    /// Recall@k (percent) for tree-to-image and image-to-tree retrieval on the test split.
    pub retrieval: Vec<(String, usize, f64)>,
    pub complementarity: ComplementarityReport,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "train {}  test {}  fusion {}  distance {}", self.n_train, self.n_test, self.fusion, self.distance);
        let _ = writeln!(s, "\n{:<14}{:>4}{:>10}", "modality", "k", "acc%");
        for r in &self.knn {
            let name = serde_json::to_value(r.modality).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            let _ = writeln!(s, "{:<14}{:>4}{:>10.2}", name, r.k, r.accuracy);
        }
        let _ = writeln!(s, "\n{:<16}{:>4}{:>10}", "retrieval", "k", "recall%");
        for (dir, k, v) in &self.retrieval {
            let _ = writeln!(s, "{dir:<16}{k:>4}{v:>10.2}");
        }
        let c = &self.complementarity;
        let rows: [(&str, String); 10] = [
            ("pearson_r", format!("{:.4}", c.pearson_r)),
            ("rsa_spearman", format!("{:.4}", c.rsa_spearman)),
            ("rsa_p_value", format!("{:.4}", c.rsa_p_value)),
            ("acc_tree", format!("{:.2}", c.acc_tree)),
            ("acc_image", format!("{:.2}", c.acc_image)),
            ("acc_fused", format!("{:.2}", c.acc_fused)),
            ("gain", format!("{:+.2}", c.gain)),
            ("complementarity", format!("{:.2}", c.complementarity_score)),
            ("both_wrong", format!("{:.2}", c.both_wrong_pct)),
            ("rescues", format!("{}/{}", c.rescue_count, c.hard_case_count)),
        ];
        let _ = writeln!(s);
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<18}{v:>12}");
        }
        s
    }
}

/// `sample_id,true,pred_tree,pred_image,pred_fused` with a header line.
pub fn predictions_csv(ids: &[String], labels: &[usize], tree: &[usize], image: &[usize], fused: &[usize]) -> String {
    let mut s = String::from("sample_id,true,pred_tree,pred_image,pred_fused\n");
    for i in 0..ids.len() {
        let _ = writeln!(s, "{},{},{},{},{}", ids[i], labels[i], tree[i], image[i], fused[i]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let csv = predictions_csv(&["a".into(), "b".into()], &[0, 1], &[0, 0], &[1, 1], &[0, 1]);
        assert_eq!(csv, "sample_id,true,pred_tree,pred_image,pred_fused\na,0,0,1,0\nb,1,0,1,1\n");
    }
}
