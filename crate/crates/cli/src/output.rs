use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "run-manifest.json";

/// Files written by one run, removed again if the run fails.
pub(crate) struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
}

impl Outputs {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
        })
    }

    pub fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }

    pub fn discard(self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            // Only succeeds if nothing else landed there.
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Run record written next to the reports.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    /// Tolerances, caps and truncations that affected the results.
    pub numerics: Map<String, Value>,
    pub environment: Option<Value>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub master: u64,
    /// Stream labels drawn from during the run.
    pub labels: Vec<String>,
}
