use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};

use crate::config::{sha256_hex, Settings};
use crate::CliError;

pub const OUT_ENV: &str = "SSBLOW_OUT";

/// Output root: `--out`, then the config's `out`, then `$SSBLOW_OUT`, then
/// `./runs`.
pub fn output_root(flag: Option<PathBuf>, settings: &mut Settings) -> Result<PathBuf, CliError> {
    if let Some(p) = flag {
        return Ok(p);
    }
    let from_env = std::env::var(OUT_ENV).ok();
    let default = from_env.unwrap_or_else(|| "runs".to_owned());
    // The root does not change results, so it stays out of the echoed config.
    let v: Option<String> = settings.get_opt("out", None)?;
    Ok(PathBuf::from(v.unwrap_or(default)))
}

/// A run directory `<root>/<command>-<hash12>` whose files are recorded
/// with their SHA-256 in `manifest.json`.
pub struct RunDir {
    pub dir: PathBuf,
    command: String,
    files: BTreeMap<String, String>,
    provenance: BTreeMap<String, Json>,
}

impl RunDir {
    pub fn create(root: &Path, command: &str, config_hash: &str) -> Result<Self, CliError> {
        let dir = root.join(format!("{command}-{}", &config_hash[..12]));
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, command: command.to_owned(), files: BTreeMap::new(), provenance: BTreeMap::new() })
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let bytes = bytes.as_ref();
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.files.insert(name.to_owned(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &Json) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn provenance(&mut self, key: &str, value: Json) {
        self.provenance.insert(key.to_owned(), value);
    }

    pub fn finish(mut self, settings: &Settings) -> Result<PathBuf, CliError> {
        // The manifest omits timestamps so reruns are byte-identical.
        let manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": settings.echo(),
            "config_hash": settings.hash(),
            "provenance": self.provenance,
            "files": self.files,
        });
        let files = std::mem::take(&mut self.files);
        let path = self.write_json("manifest.json", &manifest)?;
        self.files = files;
        Ok(path)
    }
}
