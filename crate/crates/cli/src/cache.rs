//! On-disk cache of sampled ensembles, keyed by the canonical `[model]`
//! section. Values are stored as raw little-endian `f64`, so a cache hit
//! reproduces the sampled ensemble bit for bit.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use mallows_lab::ReplicaEnsemble;
use sha2::{Digest, Sha256};

use crate::config::{serialize_model, ModelSection};

pub const CACHE_ENV: &str = "MALLOWS_LAB_CACHE";
pub const DEFAULT_CACHE_DIR: &str = ".mallows-lab-cache";
const MAGIC: &str = "mallows-lab-ensemble";
const FORMAT: u32 = 1;
const EXTENSION: &str = "ens";

pub struct EnsembleCache {
    dir: PathBuf,
}

/// `--cache-dir`, else the environment variable, else the default.
pub fn resolve_dir(flag: Option<&Path>) -> PathBuf {
    match (flag, std::env::var_os(CACHE_ENV)) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(env)) if !env.is_empty() => PathBuf::from(env),
        _ => PathBuf::from(DEFAULT_CACHE_DIR),
    }
}

/// Hex SHA-256 of the model section; the library version is mixed in so a
/// sampler change never serves stale ensembles.
pub fn cache_key(model: &ModelSection) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(b"\n");
    h.update(serialize_model(model).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn corrupt(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

impl EnsembleCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        EnsembleCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.{EXTENSION}"))
    }

    /// `Ok(None)` on a miss. A file that fails to parse is an error, not a
    /// miss, so corruption is never papered over by resampling.
    pub fn load(&self, key: &str) -> io::Result<Option<ReplicaEnsemble>> {
        let path = self.path_for(key);
        let file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [magic, format, stored_key, replicas, len] = fields[..] else {
            return Err(corrupt(format!("{}: bad header", path.display())));
        };
        if magic != MAGIC || format != FORMAT.to_string() || stored_key != key {
            return Err(corrupt(format!("{}: header does not match key {key}", path.display())));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| corrupt(format!("{}: bad size `{s}`", path.display())));
        let (replicas, len) = (parse(replicas)?, parse(len)?);
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        if bytes.len() != replicas * len * 8 {
            return Err(corrupt(format!(
                "{}: expected {} values, found {} bytes",
                path.display(),
                replicas * len,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        ReplicaEnsemble::new(data, replicas, len, 0)
            .map(Some)
            .map_err(|e| corrupt(format!("{}: {e}", path.display())))
    }

    /// Writes through a temporary file and renames, so readers never see a
    /// partial entry.
    pub fn store(&self, key: &str, ens: &ReplicaEnsemble) -> io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(key);
        let tmp = self.dir.join(format!("{key}.{EXTENSION}.tmp{}", std::process::id()));
        {
            let mut out = io::BufWriter::new(fs::File::create(&tmp)?);
            writeln!(out, "{MAGIC} {FORMAT} {key} {} {}", ens.replicas(), ens.len())?;
            for x in ens.data() {
                out.write_all(&x.to_le_bytes())?;
            }
            out.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Removes cache entries (and stray temporaries); other files in the
    /// directory are left alone. Returns the number removed.
    pub fn clear(&self) -> io::Result<usize> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(e),
        };
        let mut removed = 0;
        for entry in entries {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.ends_with(&format!(".{EXTENSION}")) || name.contains(&format!(".{EXTENSION}.tmp")) {
                fs::remove_file(&path)?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    fn model() -> ModelSection {
        parse(
            "[model]\ncoupling = zero\nspins = interval\nvolume = 5\nboundary = free\nburn_in = 1\nthin = 1\nreplicas = 4\nseed = 1\n\
             [analysis]\noffsets = 0\nlengths = 2\nr_values = 1\n[output]\ndirectory = x\n",
        )
        .unwrap()
        .model
    }

    #[test]
    fn store_load_clear() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EnsembleCache::new(dir.path().join("c"));
        let key = cache_key(&model());
        assert!(cache.load(&key).unwrap().is_none());
        let data = vec![0.1, -1.0 / 3.0, f64::MIN_POSITIVE, 5e300, -0.0, 1.0];
        let ens = ReplicaEnsemble::new(data.clone(), 2, 3, 0).unwrap();
        cache.store(&key, &ens).unwrap();
        let back = cache.load(&key).unwrap().unwrap();
        assert_eq!(back.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), data.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        fs::write(dir.path().join("c/keep.txt"), "x").unwrap();
        assert_eq!(cache.clear().unwrap(), 1);
        assert!(cache.load(&key).unwrap().is_none());
        assert!(dir.path().join("c/keep.txt").exists());
    }

    #[test]
    fn truncated_entry_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EnsembleCache::new(dir.path());
        let key = cache_key(&model());
        let ens = ReplicaEnsemble::new(vec![1.0; 6], 2, 3, 0).unwrap();
        let path = cache.store(&key, &ens).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert_eq!(cache.load(&key).unwrap_err().kind(), io::ErrorKind::InvalidData);
    }

    #[test]
    fn key_tracks_the_model_only() {
        let a = model();
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(cache_key(&a), cache_key(&b));
        assert_eq!(cache_key(&a), cache_key(&a.clone()));
        assert_eq!(cache_key(&a).len(), 64);
    }
}
