use std::fmt::Write as _;
use std::path::Path;

use neurotopo_core::pimage::render;
use neurotopo_core::rng::diagram_rng;
use neurotopo_core::{augment_diagram, PersistenceDiagram};
use serde_json::json;

use crate::config::{ensure_dir, RunConfig};
use crate::data::write;
use crate::error::{config, data, CliResult};

/// Writes `<id>_view<k>.csv` per view and one JSON line per view with the
/// drawn parameters. Views use the same generators as training.
pub fn run(input: &Path, out: &Path, views: u64, png: bool, cfg: &RunConfig) -> CliResult<()> {
    let diagram = PersistenceDiagram::read_csv(input).map_err(|e| data(e).context(format!("reading {}", input.display())))?;
    let aug = cfg.train.augment;
    aug.validate().map_err(config)?;
    let out = ensure_dir(out)?;
    let mut log = String::new();
    for view in 0..views {
        let mut rng = diagram_rng(aug.seed, &diagram.neuron_id, view);
        let (d, drawn) = augment_diagram(&diagram, &aug, &mut rng).map_err(data)?;
        let name = format!("{}_view{view}", diagram.neuron_id);
        d.write_csv(out.join(format!("{name}.csv"))).map_err(data)?;
        if png {
            let img = render(&d, &cfg.image).map_err(config)?;
            img.export_png(out.join(format!("{name}.png"))).map_err(data)?;
        }
        let _ = writeln!(log, "{}", json!({ "view": view, "params": drawn }));
    }
    write(&out.join("augment_log.jsonl"), log)?;
    eprintln!("wrote {views} view(s) of {} to {}", diagram.neuron_id, out.display());
    Ok(())
}
