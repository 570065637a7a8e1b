//! Report rendering and all-or-nothing artifact emission.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Round-trip formatting with 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Ordered `key = value` lines.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Summary(Vec<(String, String)>);

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Files produced by one command, plus its verdict.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<(String, String)>,
    pub summary: Summary,
    pub pass: bool,
}

impl Report {
    pub fn new() -> Self {
        Self {
            pass: true,
            ..Self::default()
        }
    }

    pub fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    /// Records a named check and folds it into the verdict.
    pub fn check(&mut self, key: impl Into<String>, ok: bool) {
        self.summary.push(key, if ok { "pass" } else { "fail" });
        self.pass &= ok;
    }
}

/// Hex SHA-256 of the configuration bytes and the effective overrides.
pub fn config_hash(text: &str, overrides: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(overrides.as_bytes());
    hex::encode(h.finalize())
}

/// Writes every file into a fresh temporary directory under `root` and
/// renames it to `root/name`, replacing an earlier run of the same name.
pub fn emit(root: &Path, name: &str, files: &[(String, String)]) -> io::Result<PathBuf> {
    fs::create_dir_all(root)?;
    let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(root)?;
    for (file, contents) in files {
        fs::write(staging.path().join(file), contents)?;
    }
    let target = root.join(name);
    if target.exists() {
        fs::remove_dir_all(&target)?;
    }
    let staged = staging.keep();
    if let Err(e) = fs::rename(&staged, &target) {
        let _ = fs::remove_dir_all(&staged);
        return Err(e);
    }
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn emission_replaces_whole_directory() {
        let root = tempfile::tempdir().unwrap();
        let a = vec![("a.txt".to_string(), "1".to_string())];
        let dir = emit(root.path(), "run", &a).unwrap();
        let b = vec![("b.txt".to_string(), "2".to_string())];
        emit(root.path(), "run", &b).unwrap();
        assert!(!dir.join("a.txt").exists());
        assert_eq!(fs::read_to_string(dir.join("b.txt")).unwrap(), "2");
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 1);
    }

    #[test]
    fn hash_depends_on_overrides() {
        assert_ne!(config_hash("x", ""), config_hash("x", "seed=1"));
        assert_eq!(config_hash("x", "").len(), 64);
    }
}
