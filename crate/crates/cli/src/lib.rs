//! Experiment configs, the experiment pipeline and report emission behind
//! the `hss-bench` binary.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use report::{emit_report, Format, NamedReport};

/// Runs the experiment in `config_path` and writes one file per report group
/// and format into `out_dir`. Returns the written paths. Nothing is left
/// behind on failure.
pub fn run_experiment(config_path: &Path, out_dir: Option<&Path>, seed: Option<u64>, formats: Option<&[Format]>) -> CliResult<Vec<PathBuf>> {
    let cfg = ExperimentConfig::from_path(config_path)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.outputs.dir.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set outputs.dir".into()))?;
    let formats = formats.unwrap_or(&cfg.outputs.formats);
    let groups = pipeline::run_experiment_reports(&cfg, seed.unwrap_or(cfg.seed))?;
    write_groups(&groups, formats, &dir)
}

fn write_groups(groups: &[(&str, Vec<NamedReport>)], formats: &[Format], dir: &Path) -> CliResult<Vec<PathBuf>> {
    let created_dir = !dir.exists();
    let mut written = Vec::new();
    let result = std::fs::create_dir_all(dir).map_err(CliError::from).and_then(|()| {
        for (stem, reports) in groups {
            for &f in formats {
                let path = dir.join(format!("{stem}.{}", f.extension()));
                emit_report(reports, f, &path)?;
                written.push(path);
            }
        }
        Ok(())
    });
    if let Err(e) = result {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
        if created_dir {
            let _ = std::fs::remove_dir(dir);
        }
        return Err(e);
    }
    Ok(written)
}
