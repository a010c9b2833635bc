use std::fmt::Write as _;
use std::path::Path;

use neurotopo_core::eval::{morphometrics, MORPHOMETRIC_NAMES};
use neurotopo_core::MorphTree;

use crate::config::ensure_dir;
use crate::data::{fail_if_any, for_each_file, list_inputs, stem, write};
use crate::error::CliResult;

pub fn run(input: &Path, out: &Path) -> CliResult<()> {
    let files = list_inputs(input, "swc")?;
    let out = ensure_dir(out)?;
    let (ok, failed) = for_each_file(&files, |p| Ok(morphometrics(&MorphTree::read(p)?)));
    let mut csv = format!("sample_id,{}\n", MORPHOMETRIC_NAMES.join(","));
    for (p, row) in &ok {
        let _ = write!(csv, "{}", stem(p));
        for v in row {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    write(&out.join("morphometrics.csv"), csv)?;
    fail_if_any(failed, files.len())
}
