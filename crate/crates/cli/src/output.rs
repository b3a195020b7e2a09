use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Attached to every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub quick: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance,
    report: &'a T,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory with atomic writes: each file goes to a temporary sibling
/// first and is renamed into place, so readers never see partial artifacts.
pub struct OutDir {
    dir: PathBuf,
    pub provenance: Provenance,
}

impl OutDir {
    pub fn create(dir: PathBuf, provenance: Provenance) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(Self { dir, provenance })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.path(name);
        let fail = |e: std::io::Error| CliError::io(format!("writing {}", target.display()), e);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(fail)?;
        tmp.write_all(bytes).map_err(fail)?;
        tmp.as_file().sync_all().map_err(fail)?;
        tmp.persist(&target).map_err(|e| fail(e.error))?;
        log::info!("wrote {}", target.display());
        Ok(target)
    }

    /// Writes `{"provenance": …, "report": …}` as pretty JSON.
    pub fn write_report<T: Serialize>(&self, name: &str, report: &T) -> Result<PathBuf, CliError> {
        let env = Envelope { provenance: &self.provenance, report };
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::io(format!("encoding {name}"), e))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV with a leading `#` comment line carrying the provenance.
    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
        let p = &self.provenance;
        let mut buf = format!(
            "# {} {} {} config_sha256={} seed={} quick={}\n",
            p.tool, p.version, p.command, p.config_sha256, p.seed, p.quick
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| CliError::io(format!("encoding {name}"), e);
            w.write_record(header).map_err(fail)?;
            for row in rows {
                w.write_record(row.iter().map(|x| format!("{x:e}"))).map_err(fail)?;
            }
            w.flush().map_err(|e| CliError::io(format!("encoding {name}"), e))?;
        }
        self.write_bytes(name, &buf)
    }
}

pub fn relative_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}
