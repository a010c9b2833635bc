use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use neurotopo_core::eval::stratified_split;
use neurotopo_core::Trainer;
use serde_json::json;

use crate::config::{ensure_dir, RunConfig};
use crate::data::{labels_for, load_samples, write};
use crate::error::{data, CliError, CliResult};

pub const CHECKPOINT_FILE: &str = "model.ntck";
pub const LOG_FILE: &str = "train_log.jsonl";
pub const SIDECAR_FILE: &str = "run.json";
pub const CONFIG_FILE: &str = "config.json";

/// Trains on `data_dir`, streaming one JSON line per step to stdout and
/// `train_log.jsonl`. When `labels.csv` is present, the stratified held-out
/// split used by `eval` is excluded. A non-finite step stops training; the
/// checkpoint from the last good step is still written.
pub fn run(data_dir: &Path, out: &Path, cfg: &RunConfig) -> CliResult<()> {
    let mut samples = load_samples(data_dir)?;
    let mut held_out = 0;
    if let Some(labels) = labels_for(data_dir, &samples)? {
        if cfg.eval.test_fraction > 0.0 {
            let (train, test) = stratified_split(&labels, cfg.eval.test_fraction, cfg.seed);
            held_out = test.len();
            let mut keep = vec![false; samples.len()];
            train.iter().for_each(|&i| keep[i] = true);
            let mut i = 0;
            samples.retain(|_| {
                i += 1;
                keep[i - 1]
            });
        }
    }
    let n_train = samples.len();
    let out = ensure_dir(out)?;
    write(&out.join(CONFIG_FILE), cfg.to_json())?;
    let mut trainer = Trainer::new(samples, cfg.model, cfg.image, cfg.train.clone())?;

    let log_path = out.join(LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| data(e).context(format!("creating {}", log_path.display())))?);
    let mut io_err = None;
    let result = trainer.run(|step| {
        let line = serde_json::to_string(step).expect("log line serializes");
        println!("{line}");
        if let Err(e) = writeln!(log, "{line}") {
            io_err.get_or_insert(e);
        }
    });
    if let Some(e) = io_err.or_else(|| log.flush().err()) {
        return Err(data(e).context(format!("writing {}", log_path.display())));
    }

    trainer.checkpoint().save(out.join(CHECKPOINT_FILE))?;
    let sidecar = json!({
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "dims": trainer.params.dims,
        "steps_done": trainer.steps_done(),
        "n_train": n_train,
        "n_held_out": held_out,
        "status": if result.is_ok() { "ok" } else { "non_finite" },
        "config": cfg,
    });
    write(&out.join(SIDECAR_FILE), serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"))?;
    result.map(|_| ()).map_err(CliError::from)
}
