use std::path::Path;

use neurotopo_core::pimage::{render, Bounds, BoundsMode};
use neurotopo_core::PersistenceDiagram;
use rayon::prelude::*;

use crate::config::{ensure_dir, RunConfig};
use crate::data::{fail_if_any, for_each_file, list_inputs};
use crate::error::{config, data, CliResult};

pub const BOUNDS_FILE: &str = "bounds.json";

/// Bounds precedence: `--bounds` file, then `--per-image-bounds`, then
/// global bounds from the config, then global bounds fit over every input.
pub fn run(input: &Path, out: &Path, bounds: Option<&Path>, per_image: bool, cfg: &RunConfig) -> CliResult<()> {
    let files = list_inputs(input, "csv")?;
    let out = ensure_dir(out)?;
    let (diagrams, failed) = for_each_file(&files, |p| Ok(PersistenceDiagram::read_csv(p)?));
    fail_if_any(failed, files.len())?;

    let mut image = cfg.image;
    if let Some(path) = bounds {
        let b = Bounds::read_json(path).map_err(|e| config(e).context(format!("reading {}", path.display())))?;
        image.bounds = BoundsMode::Global(b);
    } else if per_image {
        image.bounds = BoundsMode::PerImage;
    } else if !matches!(image.bounds, BoundsMode::Global(_)) {
        let b = Bounds::from_diagrams(diagrams.iter().map(|(_, d)| d));
        b.write_json(out.join(BOUNDS_FILE)).map_err(data)?;
        image.bounds = BoundsMode::Global(b);
    }

    let results: Vec<_> = diagrams
        .par_iter()
        .map(|(p, d)| {
            let write = || -> anyhow::Result<()> {
                let img = render(d, &image)?;
                img.export_raw(out.join(format!("{}.raw", d.neuron_id)))?;
                img.export_png(out.join(format!("{}.png", d.neuron_id)))?;
                Ok(())
            };
            (p, write())
        })
        .collect();
    let mut failed = 0;
    for (p, r) in &results {
        if let Err(e) = r {
            eprintln!("error: {}: {e:#}", p.display());
            failed += 1;
        }
    }
    eprintln!(
        "wrote {} image(s) of {}x{}x{} to {}",
        results.len() - failed,
        image.height,
        image.width,
        image.channels.len(),
        out.display()
    );
    fail_if_any(failed, results.len())
}
