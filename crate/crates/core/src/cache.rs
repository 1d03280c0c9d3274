//! Binary distance cache keyed by a content hash.
//!
//! Layout, all little-endian: magic `FIGD`, version `u32`, `n` as `u64`,
//! method tag `u8`, 32-byte key, then the `n(n−1)/2` upper-triangle
//! entries as `f64` in row order.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::data::{DistanceMatrix, Method, TimeSeries};
use crate::error::{invalid_data, Result};

pub const MAGIC: &[u8; 4] = b"FIGD";
pub const VERSION: u32 = 1;
pub const CACHE_DIR_ENV: &str = "FIG_CACHE_DIR";
const HEADER_LEN: usize = 4 + 4 + 8 + 1 + 32;

pub fn encode(d: &DistanceMatrix, key: &[u8; 32]) -> Vec<u8> {
    let upper = d.upper_triangle();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * upper.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d.n() as u64).to_le_bytes());
    out.push(d.method().tag());
    out.extend_from_slice(key);
    for v in upper {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(DistanceMatrix, [u8; 32])> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(invalid_data("not a distance cache file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(invalid_data(format!("unsupported cache version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let n = usize::try_from(n).map_err(|_| invalid_data("cache size overflows"))?;
    let method = Method::from_tag(bytes[16]).ok_or_else(|| invalid_data(format!("unknown method tag {}", bytes[16])))?;
    let key: [u8; 32] = bytes[17..49].try_into().unwrap();
    let count = n.checked_mul(n.saturating_sub(1)).map(|v| v / 2).ok_or_else(|| invalid_data("cache size overflows"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(invalid_data(format!("cache body has {} bytes, expected {}", body.len(), count * 8)));
    }
    let upper: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((DistanceMatrix::from_upper(n, &upper, method)?, key))
}

pub fn write_cache(path: &Path, d: &DistanceMatrix, key: &[u8; 32]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, encode(d, key))?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<(DistanceMatrix, [u8; 32])> {
    decode(&fs::read(path)?)
}

/// Settings that influence the distance stage for `method`.
fn distance_settings(cfg: &PipelineConfig, method: Method) -> String {
    let keys: &[&str] = match method {
        Method::Fig => &["basis.family", "basis.b", "windows.l1", "windows.l2", "windows.stride", "fpca.k", "fpca.normalization"],
        Method::Dig => &["dig.bins", "windows.l1", "windows.l2", "windows.stride"],
        Method::Euclidean => &["windows.stride"],
    };
    cfg.entries()
        .into_iter()
        .filter(|(k, _)| keys.contains(k))
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

/// SHA-256 over the method, its distance-stage settings and the input
/// values, so edits elsewhere in the config keep the entry valid.
pub fn distance_key(x: &TimeSeries, cfg: &PipelineConfig, method: Method) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"figd-key\n");
    h.update(method.name().as_bytes());
    h.update(b"\n");
    h.update(distance_settings(cfg, method).as_bytes());
    h.update((x.len() as u64).to_le_bytes());
    h.update((x.dim() as u64).to_le_bytes());
    for t in 0..x.len() {
        for c in 0..x.dim() {
            h.update(x.data()[(t, c)].to_le_bytes());
        }
    }
    h.finalize().into()
}

/// `FIG_CACHE_DIR` when set and non-empty, otherwise the configured path.
pub fn cache_dir(cfg: &PipelineConfig) -> PathBuf {
    match std::env::var(CACHE_DIR_ENV) {
        Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&cfg.cache_dir),
    }
}

pub fn cache_path(dir: &Path, key: &[u8; 32]) -> PathBuf {
    dir.join(format!("{}.figd", hex::encode(key)))
}

/// Loads the cached matrix when its stored key matches, otherwise computes
/// and stores it. The flag reports a cache hit.
pub fn cached_distance(x: &TimeSeries, cfg: &PipelineConfig, method: Method, dir: &Path) -> Result<(DistanceMatrix, bool)> {
    let key = distance_key(x, cfg, method);
    let path = cache_path(dir, &key);
    if let Ok((d, stored)) = read_cache(&path) {
        if stored == key && d.method() == method && d.n() > 0 {
            return Ok((d, true));
        }
        log::warn!("ignoring stale cache entry {}", path.display());
    }
    let d = cfg.distance(x, method)?;
    write_cache(&path, &d, &key)?;
    Ok((d, false))
}
