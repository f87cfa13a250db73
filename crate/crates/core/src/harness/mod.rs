//! Configuration, metrics, repeated runs and grid search.

pub mod config;
pub mod grid;
pub mod metrics;
pub mod run;

pub use config::{Method, RunConfig, SynthJob};
pub use grid::{grid_search, GridResult, GridSpace};
pub use metrics::{evaluate, Metric, MetricsReport, Summary};
pub use run::{execute, load_splits, run, Splits};

use crate::corpus::{write_labels, DatasetPaths};
use crate::synth::{generate, generate_split, SynthConfig};
use crate::Result;

/// Writes a synthetic train split plus dev and test documents with gold
/// labels, using the file names that the `data` key expects.
pub fn write_synth(job: &SynthJob) -> Result<()> {
    let dir = job
        .out
        .as_deref()
        .ok_or_else(|| crate::Error::Config("`out` directory is required".into()))?;
    let (train, _) = generate(&job.synth)?;
    crate::corpus::write_dataset(&train, &DatasetPaths::in_dir(dir, true))?;
    for (name, n) in [("dev", job.dev_samples), ("test", job.test_samples)] {
        if n == 0 {
            continue;
        }
        let cfg = SynthConfig {
            n_samples: n,
            ..job.synth.clone()
        };
        let (ds, gold) = generate_split(&cfg, name)?;
        let docs: String = ds
            .ids()
            .iter()
            .zip(ds.texts())
            .map(|(id, t)| format!("{id}\t{t}\n"))
            .collect();
        let path = dir.join(format!("{name}_docs.tsv"));
        std::fs::write(&path, docs).map_err(|e| crate::Error::io(&path, e))?;
        write_labels(&dir.join(format!("{name}_gold.tsv")), ds.ids(), &gold)?;
    }
    Ok(())
}
