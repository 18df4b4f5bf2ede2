use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::exit::Failure;

/// Output directory; remembers the SHA-256 of every file written.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    files: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root).map_err(|e| Failure::resource(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<String, Failure> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| Failure::resource(format!("cannot write {}: {e}", path.display())))?;
        let sum = sha256_hex(bytes);
        self.files.push((name.to_string(), sum.clone()));
        Ok(sum)
    }

    /// `manifest.ini`: the run block, the resolved configuration and the
    /// output checksums.
    pub fn finish(mut self, run: &[(&str, String)], cfg: &Config) -> Result<(), Failure> {
        let mut text = String::from("[run]\n");
        for (k, v) in run {
            text.push_str(&format!("{k} = {v}\n"));
        }
        let resolved = cfg.render_resolved();
        if !resolved.is_empty() {
            text.push('\n');
            text.push_str(&resolved);
        }
        if !self.files.is_empty() {
            text.push_str("\n[outputs]\n");
            for (name, sum) in &self.files {
                text.push_str(&format!("{name} = sha256:{sum}\n"));
            }
        }
        let path = self.path("manifest.ini");
        fs::write(&path, text).map_err(|e| Failure::resource(format!("cannot write {}: {e}", path.display())))?;
        self.files.clear();
        Ok(())
    }
}
