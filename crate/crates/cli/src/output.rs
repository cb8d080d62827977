use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Output directory of one command. Records the files it writes and any
/// notes, which end up in `metadata.json`.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    /// Effective configuration after overrides, without the output directory.
    config: &'a ExperimentConfig,
    /// Times in every output are in units of `1/delta`.
    time_unit: &'static str,
    /// `delta`: divide an emitted time by it to get the original time unit.
    time_scale: f64,
    tau: f64,
    h: f64,
    files: &'a [String],
    notes: &'a [String],
    summary: Value,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    /// Registers a path created by someone else, relative to the directory.
    pub fn record(&mut self, name: String) {
        self.files.push(name);
    }

    /// Adds a note to the metadata and echoes it on stderr.
    pub fn note(&mut self, msg: String) {
        eprintln!("note: {msg}");
        self.notes.push(msg);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        &mut self,
        command: &str,
        cfg: &ExperimentConfig,
        tau: f64,
        delta: f64,
        h: f64,
        summary: Value,
    ) -> Result<(), CliError> {
        let mut cfg = cfg.clone();
        cfg.out = None;
        self.files.push("metadata.json".into());
        let meta = Metadata {
            tool: "nimfa",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: &cfg,
            time_unit: "1/delta",
            time_scale: delta,
            tau,
            h,
            files: &self.files,
            notes: &self.notes,
            summary,
        };
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        std::fs::write(self.dir.join("metadata.json"), text)?;
        Ok(())
    }
}
