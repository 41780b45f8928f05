//! Manifest and CSV emission.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";

/// Twelve significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn nums(vs: &[f64]) -> Vec<String> {
    vs.iter().map(|&v| num(v)).collect()
}

pub struct Output {
    dir: PathBuf,
    hash: String,
    pub quiet: bool,
}

impl Output {
    /// Write the manifest into `dir` and remember its hash.
    pub fn create(dir: &Path, manifest: &str, quiet: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(MANIFEST);
        fs::write(&path, manifest).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let hash = hex::encode(Sha256::digest(manifest.as_bytes()));
        Ok(Output { dir: dir.to_path_buf(), hash, quiet })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut buf = format!("# manifest_sha256 = {}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
            for row in rows {
                debug_assert_eq!(row.len(), header.len(), "{name}");
                w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        let path = self.dir.join(name);
        fs::write(&path, buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.log(format!("wrote {}", path.display()));
        Ok(())
    }
}
