//! CSV and manifest writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{canonical_json, config_hash, parameter_sources, LoadedConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberFormat {
    /// 17 significant digits in scientific notation.
    Sci17,
    /// Shortest decimal that round-trips.
    Shortest,
}

fn push_number(buf: &mut String, v: f64, fmt: NumberFormat) {
    match fmt {
        NumberFormat::Sci17 => write!(buf, "{v:.16e}"),
        NumberFormat::Shortest => write!(buf, "{v}"),
    }
    .expect("writing to a String cannot fail");
}

/// Render a header and numeric rows.
pub fn render_csv<'a>(
    header: &str,
    rows: impl IntoIterator<Item = &'a [f64]>,
    fmt: NumberFormat,
) -> String {
    let mut buf = String::with_capacity(1024);
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                buf.push(',');
            }
            push_number(&mut buf, *v, fmt);
        }
        buf.push('\n');
    }
    buf
}

/// Collects written files for the manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::Io(format!("{}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_csv<'a>(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = &'a [f64]>,
        fmt: NumberFormat,
    ) -> Result<()> {
        self.write(name, &render_csv(header, rows, fmt))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: Option<String>,
    pub master_seed: u64,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub files: Vec<String>,
    /// Canonical JSON of the resolved config.
    pub config: Option<serde_json::Value>,
    /// Per parameter: `config` if given in the file, `default` otherwise.
    pub parameter_sources: BTreeMap<String, String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Write `manifest.json` listing every file written so far.
pub fn write_manifest(
    out: &mut OutputDir,
    command: &str,
    loaded: Option<&LoadedConfig>,
    master_seed: u64,
    started: String,
) -> Result<RunManifest> {
    let (hash, config, sources) = match loaded {
        Some(l) => {
            let json: serde_json::Value = serde_json::from_str(&canonical_json(&l.config)?)
                .map_err(|e| Error::Io(e.to_string()))?;
            (
                Some(config_hash(&l.config)?),
                Some(json),
                parameter_sources(l)?,
            )
        }
        None => (None, None, BTreeMap::new()),
    };
    let manifest = RunManifest {
        command: command.to_string(),
        config_hash: hash,
        master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now_rfc3339(),
        files: out.files().to_vec(),
        config,
        parameter_sources: sources,
    };
    out.write_json(MANIFEST_NAME, &manifest)?;
    Ok(manifest)
}
