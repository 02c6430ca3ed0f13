//! Output directory handling: file manifest with hashes, CSV formatting, cleanup.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use qfel_core::dynamics::format_sig17;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Files written by one run. Dropping without [`Outputs::commit`] removes them.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    manifest: Vec<FileEntry>,
    committed: bool,
}

impl Outputs {
    pub fn create(dir: &Path) -> io::Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, written: Vec::new(), manifest: Vec::new(), committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` and records it in the manifest.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, contents)?;
        self.manifest.push(FileEntry { path: name.to_string(), bytes: contents.len() as u64, sha256: sha256_hex(contents) });
        Ok(())
    }

    /// Writes a file that is not part of the manifest (the report itself).
    pub fn write_unlisted(&mut self, name: &str, contents: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(path, contents)
    }

    pub fn manifest(&self) -> &[FileEntry] {
        &self.manifest
    }

    pub fn commit(mut self) -> Vec<FileEntry> {
        self.committed = true;
        std::mem::take(&mut self.manifest)
    }

    fn discard(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            // only succeeds if nothing else was put there
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            self.discard();
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV text with a fixed header; every value is written with 17 significant digits.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self { text: format!("{header}\n"), columns: header.split(',').count() }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|&v| format_sig17(v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

pub const GAIN_HEADER: &str = "alpha,kappa,p_over_q,im_plus_deep,im_plus_third,im_plus_cubic";
pub const STATS_HEADER: &str = "ell,kappa,n_mean,n_var";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("a,b");
        c.row(&[0.5, -2.0]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "a,b\n5.0000000000000000e-1,-2.0000000000000000e0\n");
    }

    #[test]
    fn uncommitted_outputs_are_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        {
            let mut o = Outputs::create(&dir).unwrap();
            o.write("x.csv", b"1\n").unwrap();
            assert!(dir.join("x.csv").exists());
        }
        assert!(!dir.exists());
        let mut o = Outputs::create(&dir).unwrap();
        o.write("x.csv", b"1\n").unwrap();
        let m = o.commit();
        assert_eq!(m[0].bytes, 2);
        assert!(dir.join("x.csv").exists());
    }
}
