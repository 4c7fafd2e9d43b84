use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use dgsp_core::net::{load_actor, save_actor, Actor};
use dgsp_core::sim::World;
use dgsp_core::train::{train, TrainConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    files: Vec<ManifestEntry>,
}

/// Output directory of one command; every file written through it lands in the manifest.
pub struct OutDir {
    root: PathBuf,
    files: Vec<ManifestEntry>,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.record(name, bytes);
        Ok(())
    }

    /// Adds a file some other writer produced.
    pub fn adopt(&mut self, name: &str) -> anyhow::Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.record(name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != name);
        self.files.push(ManifestEntry {
            path: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn finish(mut self, command: &str, config_toml: &str) -> anyhow::Result<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            command,
            config_sha256: sha256_hex(config_toml.as_bytes()),
            files: self.files,
        };
        let text = serde_json::to_string_pretty(&m)? + "\n";
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Trained actors keyed by world and training configuration.
pub struct ModelCache {
    dir: PathBuf,
}

impl ModelCache {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    pub fn key(world: &World, cfg: &TrainConfig) -> String {
        let text = format!("{}\n{}", world.config.to_toml(), cfg.to_toml());
        sha256_hex(text.as_bytes())[..16].to_string()
    }

    pub fn get_or_train(&self, world: &World, cfg: &TrainConfig) -> anyhow::Result<Actor> {
        let path = self.dir.join(format!("{}.actor", Self::key(world, cfg)));
        if path.exists() {
            eprintln!("cache hit {}", path.display());
            return Ok(load_actor(&path)?);
        }
        let label = cfg.weights.map(|w| w.label()).unwrap_or_default();
        eprintln!("training {label} epsilon={} ...", cfg.epsilon);
        let out = train(world, cfg.clone())?;
        fs::create_dir_all(&self.dir)?;
        // write then rename so concurrent sweeps never read half a file
        let tmp = path.with_extension("tmp");
        save_actor(&tmp, &out.actor)?;
        fs::rename(&tmp, &path)?;
        Ok(out.actor)
    }
}
