use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use neurotopo_core::contrastive::Sample;
use neurotopo_core::MorphTree;
use rayon::prelude::*;

use crate::error::{data, CliError, CliResult};

pub const LABELS_FILE: &str = "labels.csv";

/// Files under `input` with the given extension, sorted by name. A single
/// file is returned as is.
pub fn list_inputs(input: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = std::fs::read_dir(input).map_err(|e| data(e).context(format!("reading {}", input.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(data(anyhow!("no .{ext} files in {}", input.display())));
    }
    Ok(files)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Applies `f` to every path in parallel. Successes come back in input
/// order; each failure is printed to stderr with its file name.
pub fn for_each_file<T: Send>(paths: &[PathBuf], f: impl Fn(&Path) -> anyhow::Result<T> + Sync) -> (Vec<(PathBuf, T)>, usize) {
    let results: Vec<_> = paths.par_iter().map(|p| (p, f(p))).collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (p, r) in results {
        match r {
            Ok(v) => ok.push((p.clone(), v)),
            Err(e) => {
                eprintln!("error: {}: {e:#}", p.display());
                failed += 1;
            }
        }
    }
    (ok, failed)
}

pub fn fail_if_any(failed: usize, total: usize) -> CliResult<()> {
    if failed > 0 {
        return Err(data(anyhow!("{failed} of {total} file(s) failed")));
    }
    Ok(())
}

/// Loads every SWC file in `dir` as a training sample, ids from file stems.
pub fn load_samples(dir: &Path) -> CliResult<Vec<Sample>> {
    let files = list_inputs(dir, "swc")?;
    let (ok, failed) = for_each_file(&files, |p| {
        let tree = MorphTree::read(p)?;
        Ok(Sample::new(stem(p), tree))
    });
    fail_if_any(failed, files.len())?;
    Ok(ok.into_iter().map(|(_, s)| s).collect())
}

/// Reads `sample_id,label` rows.
pub fn read_labels(path: &Path) -> anyhow::Result<HashMap<String, usize>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line.split_once(',').ok_or_else(|| anyhow!("{}:{}: expected id,label", path.display(), i + 1))?;
        let label: usize = label.trim().parse().with_context(|| format!("{}:{}: bad label", path.display(), i + 1))?;
        out.insert(id.trim().to_string(), label);
    }
    Ok(out)
}

pub fn write_labels(path: &Path, rows: impl IntoIterator<Item = (String, usize)>) -> std::io::Result<()> {
    let mut s = String::from("sample_id,label\n");
    for (id, l) in rows {
        s.push_str(&format!("{id},{l}\n"));
    }
    std::fs::write(path, s)
}

/// Labels for `samples` from `dir/labels.csv`, in sample order.
pub fn labels_for(dir: &Path, samples: &[Sample]) -> CliResult<Option<Vec<usize>>> {
    let path = dir.join(LABELS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let map = read_labels(&path).map_err(data)?;
    samples
        .iter()
        .map(|s| map.get(&s.id).copied().ok_or_else(|| data(anyhow!("no label for sample {}", s.id))))
        .collect::<Result<Vec<_>, CliError>>()
        .map(Some)
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| data(e).context(format!("writing {}", path.display())))
}
