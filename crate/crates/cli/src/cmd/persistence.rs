use std::path::Path;

use neurotopo_core::{ElderRuleConfig, MorphTree, PersistenceDiagram};

use crate::config::ensure_dir;
use crate::data::{fail_if_any, for_each_file, list_inputs, stem};
use crate::error::CliResult;

pub fn run(input: &Path, out: &Path) -> CliResult<()> {
    let files = list_inputs(input, "swc")?;
    let out = ensure_dir(out)?;
    let (ok, failed) = for_each_file(&files, |p| {
        let tree = MorphTree::read(p)?;
        let id = stem(p);
        let diagram = PersistenceDiagram::from_tree(&tree, id.clone(), ElderRuleConfig::default());
        diagram.write_csv(out.join(format!("{id}.csv")))?;
        Ok(diagram.len())
    });
    eprintln!("wrote {} diagram(s) to {}", ok.len(), out.display());
    fail_if_any(failed, files.len())
}
