//! Artifact writing: provenance headers, the run manifest, and removal of
//! partial outputs when a run fails.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};

/// `git describe` of the source tree this binary was built from.
pub const GIT_DESCRIBE: &str = match option_env!("BEACON_GIT_DESCRIBE") {
    Some(v) => v,
    None => "unknown",
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub git: String,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            git: GIT_DESCRIBE.to_string(),
        }
    }

    fn comment(&self) -> String {
        format!("# config_hash={} seed={} git={}", self.config_hash, self.seed, self.git)
    }
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    kind: &'static str,
    #[serde(flatten)]
    prov: &'a Provenance,
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    #[serde(flatten)]
    prov: &'a Provenance,
    config: &'a ExperimentConfig,
    outputs: Vec<OutputEntry>,
}

/// Files produced by one run. Everything written is removed on drop unless
/// [`Outputs::finish`] succeeded.
pub struct Outputs {
    dir: PathBuf,
    prov: Provenance,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path, prov: Provenance) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prov,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.prov
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    /// CSV with a `#` provenance comment as its first line.
    pub fn csv<S: Serialize>(&mut self, name: &str, rows: &[S]) -> Result<()> {
        let mut w = self.create(name)?;
        writeln!(w, "{}", self.prov.comment())?;
        let mut c = csv::Writer::from_writer(w);
        for r in rows {
            c.serialize(r).with_context(|| format!("writing {name}"))?;
        }
        c.flush()?;
        Ok(())
    }

    /// CSV from pre-formatted string rows, for tables with dynamic columns.
    pub fn csv_table(&mut self, name: &str, headers: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = self.create(name)?;
        writeln!(w, "{}", self.prov.comment())?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(headers)?;
        for r in rows {
            c.write_record(r)?;
        }
        c.flush()?;
        Ok(())
    }

    /// JSONL whose first line is a `{"kind": "header", ...}` provenance record.
    pub fn jsonl<S: Serialize>(&mut self, name: &str, items: &[S]) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer(
            &mut w,
            &HeaderLine {
                kind: "header",
                prov: &self.prov,
            },
        )?;
        writeln!(w)?;
        for item in items {
            serde_json::to_writer(&mut w, item)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pretty JSON object with the provenance under `"header"`.
    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a, S> {
            header: &'a Provenance,
            data: &'a S,
        }
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(
            &mut w,
            &Doc {
                header: &self.prov,
                data: value,
            },
        )?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Write `manifest.json` listing every output with its digest and keep
    /// the files.
    pub fn finish(mut self, command: &str, cfg: &ExperimentConfig) -> Result<PathBuf> {
        let mut outputs = Vec::new();
        for p in &self.written {
            let bytes = fs::read(p).with_context(|| format!("reading back {}", p.display()))?;
            outputs.push(OutputEntry {
                file: p.file_name().expect("output has a name").to_string_lossy().into_owned(),
                sha256: hex(&Sha256::digest(&bytes)),
            });
        }
        let manifest = Manifest {
            command,
            prov: &self.prov,
            config: cfg,
            outputs,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        self.written.push(path.clone());
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.committed = true;
        Ok(path)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            if let Err(e) = fs::remove_file(p) {
                tracing::warn!(path = %p.display(), %e, "could not remove partial output");
            }
        }
    }
}

/// Read a text input, blanking provenance header lines so line numbers in
/// later parse errors still match the file.
pub fn read_input(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| {
            let t = l.trim_start();
            if t.starts_with('#') || (t.starts_with('{') && t.contains("\"kind\":\"header\"")) {
                ""
            } else {
                l
            }
        })
        .collect::<Vec<_>>()
        .join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            config_hash: "abc".into(),
            seed: 3,
            git: "v0".into(),
        }
    }

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: String,
    }

    #[test]
    fn dropped_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut o = Outputs::new(dir.path(), prov()).unwrap();
            o.csv("x.csv", &[Row { a: 1, b: "q".into() }]).unwrap();
            assert!(dir.path().join("x.csv").exists());
        }
        assert!(!dir.path().join("x.csv").exists());
    }

    #[test]
    fn finished_outputs_stay_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::new(dir.path(), prov()).unwrap();
        o.csv("x.csv", &[Row { a: 1, b: "q".into() }]).unwrap();
        o.jsonl("t.jsonl", &[serde_json::json!({"kind": "x"})]).unwrap();
        o.finish("test", &ExperimentConfig::default()).unwrap();
        let csv = fs::read_to_string(dir.path().join("x.csv")).unwrap();
        assert_eq!(csv, "# config_hash=abc seed=3 git=v0\na,b\n1,q\n");
        let jsonl = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
        assert!(jsonl.starts_with("{\"kind\":\"header\",\"config_hash\":\"abc\",\"seed\":3,\"git\":\"v0\"}\n"));
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
        assert_eq!(m["seed"], 3);
    }

    #[test]
    fn headers_are_blanked_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("in.jsonl");
        fs::write(&p, "{\"kind\":\"header\",\"seed\":1}\n{\"a\":1}\n").unwrap();
        assert_eq!(read_input(&p).unwrap(), "\n{\"a\":1}");
    }
}
