//! Files written into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context as _, Result};
use serde::Serialize;

use crate::pipeline::Context;

/// Collects the artifacts of one invocation.
pub struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    /// Rows with a header taken from the field names; `header` is written
    /// when there are no rows.
    pub fn csv<T: Serialize>(&mut self, name: &str, header: &[&str], rows: &[T]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
        if rows.is_empty() {
            w.write_record(header)?;
        }
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.text(name, &text)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.into());
        Ok(())
    }

    /// `manifest.json`, the only artifact carrying a timestamp.
    pub fn finish(mut self, ctx: &Context, command: &str, failures: &[String]) -> Result<PathBuf> {
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let manifest = serde_json::json!({
            "name": ctx.spec.name,
            "command": command,
            "config_hash": ctx.hash,
            "seed": ctx.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "created_unix": created,
            "artifacts": self.written,
            "passed": failures.is_empty(),
            "failures": failures,
            "spec": ctx.spec,
        });
        self.json("manifest.json", &manifest)?;
        Ok(self.dir)
    }
}
