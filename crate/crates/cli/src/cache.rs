//! Content-addressed ground-state cache.
//!
//! Layout of a `.becg` file, all integers and floats little-endian:
//!
//! | field          | size            |
//! |----------------|-----------------|
//! | magic `BECG`   | 4               |
//! | version        | u32             |
//! | d, N, n        | 3 × u32         |
//! | L, β           | 2 × f64         |
//! | potential hash | 32              |
//! | payload        | n^{dN} × f64    |
//! | CRC-32         | u32 of payload  |

use std::io::Write;
use std::path::{Path, PathBuf};

use bec_core::{Grid, GridFunction};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"BECG";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 12 + 16 + 32;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("corrupt cache entry {path}: {reason} (entry deleted)")]
    Corrupt { path: PathBuf, reason: String },

    #[error("cache entry {path} has format version {found}, this build reads version {expected}; clear the cache directory")]
    IncompatibleVersion { path: PathBuf, found: u32, expected: u32 },

    #[error("cache i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Everything that determines a cached ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub dim: u32,
    pub particles: u32,
    pub points: u32,
    pub half_width: f64,
    pub beta: f64,
    /// Canonical description of the trap and pair potentials.
    pub potentials: String,
    /// Canonical description of the solver and the problem kind.
    pub solver: String,
}

impl CacheKey {
    pub fn potential_hash(&self) -> [u8; 32] {
        Sha256::digest(self.potentials.as_bytes()).into()
    }

    /// File stem: SHA-256 over every field.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(VERSION.to_le_bytes());
        h.update(self.dim.to_le_bytes());
        h.update(self.particles.to_le_bytes());
        h.update(self.points.to_le_bytes());
        h.update(self.half_width.to_le_bytes());
        h.update(self.beta.to_le_bytes());
        h.update(self.potential_hash());
        h.update(Sha256::digest(self.solver.as_bytes()));
        hex::encode(h.finalize())
    }

    pub fn payload_len(&self) -> usize {
        (self.points as usize).pow(self.dim * self.particles)
    }

    fn grid(&self) -> Option<Grid> {
        Grid::new(self.dim as usize, self.half_width, self.points as usize).ok()
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateCache {
    dir: PathBuf,
}

impl GroundStateCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.becg", key.digest()))
    }

    pub fn store(&self, key: &CacheKey, f: &GridFunction) -> Result<PathBuf, CacheError> {
        let path = self.path(key);
        let io = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        if f.values().len() != key.payload_len() {
            return Err(CacheError::Corrupt {
                path: path.clone(),
                reason: format!("payload has {} values, key expects {}", f.values().len(), key.payload_len()),
            });
        }
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        let mut bytes = Vec::with_capacity(HEADER_LEN + 8 * f.values().len() + 4);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        for v in [key.dim, key.particles, key.points] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&key.half_width.to_le_bytes());
        bytes.extend_from_slice(&key.beta.to_le_bytes());
        bytes.extend_from_slice(&key.potential_hash());
        let start = bytes.len();
        for v in f.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&bytes[start..]);
        bytes.extend_from_slice(&crc.to_le_bytes());
        // Write-then-rename so readers never see a partial file.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut file = std::fs::File::create(&tmp).map_err(io)?;
        file.write_all(&bytes).map_err(io)?;
        file.sync_all().map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)?;
        Ok(path)
    }

    /// `Ok(None)` on a miss. A damaged entry is deleted and reported as
    /// [`CacheError::Corrupt`]; the caller recomputes.
    pub fn load(&self, key: &CacheKey) -> Result<Option<GridFunction>, CacheError> {
        let path = self.path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(CacheError::Io { path, source }),
        };
        match decode(&bytes, key) {
            Ok(values) => {
                let grid = key.grid().ok_or_else(|| CacheError::Corrupt {
                    path: path.clone(),
                    reason: "key describes an invalid grid".into(),
                })?;
                GridFunction::new(grid, key.particles as usize, values)
                    .map(Some)
                    .map_err(|e| CacheError::Corrupt {
                        path,
                        reason: e.to_string(),
                    })
            }
            Err(Decode::Version(found)) => Err(CacheError::IncompatibleVersion {
                path,
                found,
                expected: VERSION,
            }),
            Err(Decode::Corrupt(reason)) => {
                let _ = std::fs::remove_file(&path);
                Err(CacheError::Corrupt { path, reason })
            }
        }
    }
}

enum Decode {
    Version(u32),
    Corrupt(String),
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn decode(b: &[u8], key: &CacheKey) -> Result<Vec<f64>, Decode> {
    let bad = |s: &str| Err(Decode::Corrupt(s.to_string()));
    if b.len() < 8 || &b[..4] != MAGIC {
        return bad("bad magic bytes");
    }
    let version = u32_at(b, 4);
    if version != VERSION {
        return Err(Decode::Version(version));
    }
    let len = key.payload_len();
    if b.len() != HEADER_LEN + 8 * len + 4 {
        return bad("unexpected file length");
    }
    let header_ok = u32_at(b, 8) == key.dim
        && u32_at(b, 12) == key.particles
        && u32_at(b, 16) == key.points
        && f64_at(b, 20).to_bits() == key.half_width.to_bits()
        && f64_at(b, 28).to_bits() == key.beta.to_bits()
        && b[36..68] == key.potential_hash();
    if !header_ok {
        return bad("header does not match the requested problem");
    }
    let payload = &b[HEADER_LEN..HEADER_LEN + 8 * len];
    if crc32fast::hash(payload) != u32_at(b, HEADER_LEN + 8 * len) {
        return bad("CRC mismatch");
    }
    Ok(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> CacheKey {
        CacheKey {
            dim: 1,
            particles: 2,
            points: 9,
            half_width: 3.0,
            beta: 0.5,
            potentials: "harmonic 1".into(),
            solver: "nbody".into(),
        }
    }

    fn field() -> GridFunction {
        let grid = Grid::line(3.0, 9).unwrap();
        GridFunction::from_fn(grid, 2, |x| (-(x[0] * x[0] + x[1] * x[1])).exp() + 1e-300 * x[0])
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GroundStateCache::new(dir.path());
        assert!(cache.load(&key()).unwrap().is_none());
        let f = field();
        cache.store(&key(), &f).unwrap();
        let back = cache.load(&key()).unwrap().unwrap();
        assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.particles(), 2);
    }

    #[test]
    fn keys_separate_problems() {
        let mut other = key();
        other.beta = 0.25;
        assert_ne!(key().digest(), other.digest());
        other = key();
        other.solver = "nbody fixed".into();
        assert_ne!(key().digest(), other.digest());
    }

    #[test]
    fn damage_is_detected_and_deleted() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GroundStateCache::new(dir.path());
        let path = cache.store(&key(), &field()).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(cache.load(&key()), Err(CacheError::Corrupt { .. })));
        assert!(!path.exists());

        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 3] ^= 1;
        std::fs::write(&path, &flipped).unwrap();
        let err = cache.load(&key()).unwrap_err();
        assert!(err.to_string().contains("CRC"), "{err}");
        assert!(!path.exists());
    }

    #[test]
    fn version_bump_is_an_explicit_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GroundStateCache::new(dir.path());
        let path = cache.store(&key(), &field()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&(VERSION + 1).to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            cache.load(&key()),
            Err(CacheError::IncompatibleVersion { found, .. }) if found == VERSION + 1
        ));
        assert!(path.exists());
    }
}
