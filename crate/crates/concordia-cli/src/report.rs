//! Report writing: every artifact embeds the software version, seed, and
//! resolved-config fingerprint, and is byte-identical for identical inputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub seed: u64,
    pub config: String,
    pub level_label: Option<String>,
}

impl Meta {
    pub fn new(seed: u64, config_fingerprint: String, level_label: Option<String>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: config_fingerprint,
            level_label,
        }
    }

    /// Leading comment line for CSV artifacts.
    pub fn csv_line(&self) -> String {
        match &self.level_label {
            Some(label) => format!(
                "# concordia v{} seed={} config={} level={}",
                self.version, self.seed, self.config, label
            ),
            None => format!(
                "# concordia v{} seed={} config={}",
                self.version, self.seed, self.config
            ),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a Meta,
    result: T,
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, meta: &Meta, result: T) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &Envelope { meta, result })?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(path)
}

/// A CSV artifact with the meta comment line on top.
pub struct CsvReport {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvReport {
    pub fn create(dir: &Path, name: &str, meta: &Meta) -> anyhow::Result<Self> {
        let path = dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{}", meta.csv_line())?;
        Ok(Self {
            path,
            writer: csv::Writer::from_writer(buf),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// Compact float formatting for CSV cells: round-trippable and stable.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}
