//! Output headers and all-or-nothing file writing.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use ssm_core::ModalModel;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "ssm-resolve";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub eigenvalues: EigenSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub count: usize,
    /// Master eigenvalue `[re, im]`.
    pub lambda1: [f64; 2],
    /// Largest and smallest real part over the spectrum.
    pub re_max: f64,
    pub re_min: f64,
}

impl EigenSummary {
    pub fn of(mm: &ModalModel) -> Self {
        let re = mm.eigenvalues.iter().map(|l| l.re);
        let l1 = mm.lambda1();
        EigenSummary {
            count: mm.eigenvalues.len(),
            lambda1: [l1.re, l1.im],
            re_max: re.clone().fold(f64::NEG_INFINITY, f64::max),
            re_min: re.fold(f64::INFINITY, f64::min),
        }
    }
}

impl Header {
    pub fn new(command: &'static str, config: &Value, mm: &ModalModel) -> Self {
        Header {
            tool: TOOL,
            version: VERSION,
            command,
            config_sha256: sha256_hex(config.to_string().as_bytes()),
            eigenvalues: EigenSummary::of(mm),
        }
    }

    /// `# key value` lines for text formats.
    pub fn comment_lines(&self) -> String {
        let e = &self.eigenvalues;
        format!(
            "# {} {}\n# command {}\n# config_sha256 {}\n# eigenvalues count {} lambda1 {:e} {:e} re_max {:e} re_min {:e}\n",
            self.tool, self.version, self.command, self.config_sha256, e.count, e.lambda1[0], e.lambda1[1], e.re_max, e.re_min
        )
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("header serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash input for the header: the command's settings plus the digest of the
/// input file, so the same flags on a different system hash differently.
pub fn config_record(settings: &impl Serialize, input: Option<&[u8]>) -> Value {
    json!({
        "settings": settings,
        "input_sha256": input.map(sha256_hex),
    })
}

/// Files staged next to their destinations and renamed into place only
/// once every output of a command has been produced.
#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let ctx = || format!("writing {}", path.display());
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(ctx(), e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(ctx(), e))?;
        tmp.flush().map_err(|e| CliError::io(ctx(), e))?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    /// Moves all staged files into place. Unstaged files are deleted when
    /// `self` is dropped on an error path.
    pub fn commit(self) -> CliResult<()> {
        let mut done: Vec<PathBuf> = vec![];
        for (tmp, path) in self.files {
            if let Err(e) = tmp.persist(&path) {
                for p in done {
                    let _ = std::fs::remove_file(p);
                }
                return Err(CliError::io(format!("writing {}", path.display()), e.error));
            }
            done.push(path);
        }
        Ok(())
    }
}

/// JSON document with the header as its first key.
pub fn json_document(header: &Header, body: Value) -> String {
    let mut map = serde_json::Map::new();
    map.insert("header".into(), header.to_json());
    if let Value::Object(b) = body {
        map.extend(b);
    }
    serde_json::to_string_pretty(&Value::Object(map)).expect("document serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_hex() {
        let h = sha256_hex(b"abc");
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn staged_files_vanish_without_commit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        {
            let mut s = Staged::default();
            s.add(&path, b"x").unwrap();
        }
        assert!(!path.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
        let mut s = Staged::default();
        s.add(&path, b"y").unwrap();
        s.commit().unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"y");
    }
}
