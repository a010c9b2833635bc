use std::path::Path;

use neurotopo_core::eval::generate_synthetic_dataset;

use crate::config::{ensure_dir, RunConfig};
use crate::data::{write_labels, LABELS_FILE};
use crate::error::{config, data, CliResult};

pub fn run(out: &Path, cfg: &RunConfig) -> CliResult<()> {
    let set = generate_synthetic_dataset(cfg.synth.n_per_class, cfg.synth.classes, cfg.seed).map_err(config)?;
    let out = ensure_dir(out)?;
    for n in &set {
        n.tree.write(out.join(format!("{}.swc", n.id))).map_err(data)?;
    }
    write_labels(&out.join(LABELS_FILE), set.iter().map(|n| (n.id.clone(), n.label))).map_err(data)?;
    eprintln!("wrote {} neurons in {} classes to {}", set.len(), cfg.synth.classes, out.display());
    Ok(())
}
