//! Output-directory resolution and the CSV + manifest writing convention:
//! every run writes `<name>.csv` and `<name>.manifest.toml` side by side.

use std::path::{Path, PathBuf};

use crate::config::{CliError, Resolved};

/// Environment variable that overrides the default output directory (the
/// only environment override the tool honors).
pub const OUT_DIR_ENV: &str = "RABI_CP_OUT_DIR";

pub struct OutputSink {
    dir: PathBuf,
}

impl OutputSink {
    /// Precedence: --out-dir flag, then RABI_CP_OUT_DIR, then `.`.
    pub fn resolve(flag: Option<&Path>) -> Result<Self, CliError> {
        let dir = match flag {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(OUT_DIR_ENV) {
                Some(v) => PathBuf::from(v),
                None => PathBuf::from("."),
            },
        };
        if !dir.exists() {
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Config(format!("output dir {}: {e}", dir.display())))?;
        }
        Ok(Self { dir })
    }

    /// Write the CSV and its manifest; reports the paths on stdout.
    pub fn write_run(&self, run: &Resolved, csv_name: &str, csv: &str) -> Result<(), CliError> {
        let csv_path = self.dir.join(csv_name);
        std::fs::write(&csv_path, csv)
            .map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
        let manifest_name = format!(
            "{}.manifest.toml",
            csv_name.strip_suffix(".csv").unwrap_or(csv_name)
        );
        let manifest_path = self.dir.join(&manifest_name);
        let manifest = run.manifest_toml(&[csv_path.display().to_string()])?;
        std::fs::write(&manifest_path, manifest)
            .map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
        println!("wrote {}", csv_path.display());
        println!("wrote {}", manifest_path.display());
        Ok(())
    }
}
