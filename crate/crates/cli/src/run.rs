//! Errors with exit codes, tracked outputs and the run manifest.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use magstego::codec::CodecError;
use magstego::imaging::ImagingError;
use magstego::io::IoError;
use magstego::layout::LayoutError;
use magstego::magnetics::MagneticsError;
use magstego::nvmodel::NvError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::Command;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn new(kind: &str, message: impl Display, exit_code: i32) -> Self {
        CliError {
            error: kind.to_string(),
            message: message.to_string(),
            exit_code,
        }
    }

    pub fn usage(message: impl Display) -> Self {
        Self::new("Usage", message, EXIT_USAGE)
    }

    pub fn data(message: impl Display) -> Self {
        Self::new("Data", message, EXIT_DATA)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        Self::new("Codec", e, EXIT_DATA)
    }
}

impl From<LayoutError> for CliError {
    fn from(e: LayoutError) -> Self {
        Self::new("Layout", e, EXIT_DATA)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::new("Io", e, EXIT_DATA)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new("Io", e, EXIT_DATA)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new("Json", e, EXIT_DATA)
    }
}

impl From<MagneticsError> for CliError {
    fn from(e: MagneticsError) -> Self {
        Self::new("Field", e, EXIT_NUMERIC)
    }
}

impl From<NvError> for CliError {
    fn from(e: NvError) -> Self {
        let code = match e {
            NvError::UnknownState(_) | NvError::UnknownRate(_) | NvError::InvalidModel(_) => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        };
        Self::new("Model", e, code)
    }
}

impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> Self {
        match e {
            ImagingError::Codec(c) => c.into(),
            ImagingError::Model(m) => m.into(),
            ImagingError::Field(f) => f.into(),
            ImagingError::BadConfig(_) => Self::new("Imaging", e, EXIT_USAGE),
            ImagingError::ConstantImage => Self::new("Imaging", e, EXIT_NUMERIC),
            other => Self::new("Imaging", other, EXIT_DATA),
        }
    }
}

/// One artifact as listed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub invocation: Command,
    pub config_path: Option<PathBuf>,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Paths relative to the manifest's directory.
    pub outputs: Vec<Artifact>,
    pub wall_time_s: f64,
    pub version: String,
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Collects artifact paths under one directory. Files are removed again if
/// the run fails, so a failed run leaves no partial output behind.
pub struct Outputs {
    pub dir: PathBuf,
    files: Vec<PathBuf>,
    started: Instant,
}

impl Outputs {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Registers and returns `dir/name`.
    pub fn file(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    pub fn extend(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        for p in paths {
            if !self.files.contains(&p) {
                self.files.push(p);
            }
        }
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let p = self.file(name);
        fs::write(&p, serde_json::to_string_pretty(value)? + "\n")?;
        Ok(p)
    }

    pub fn discard(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
    }

    /// Writes `manifest.json` (or `<stem>.manifest.json`) listing every
    /// artifact with its digest.
    pub fn finish(
        self,
        manifest_name: &str,
        invocation: &Command,
        config: &RunConfig,
        config_path: Option<&Path>,
    ) -> CliResult<PathBuf> {
        let mut outputs = Vec::new();
        for f in &self.files {
            let rel = f.strip_prefix(&self.dir).unwrap_or(f).to_path_buf();
            outputs.push(Artifact {
                path: rel,
                sha256: file_sha256(f)?,
            });
        }
        let manifest = RunManifest {
            command: invocation.name(),
            invocation: invocation.clone(),
            config_path: config_path.map(Path::to_path_buf),
            config_hash: config.hash(),
            seed: config.seed,
            config: config.clone(),
            outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let path = self.dir.join(manifest_name);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}
