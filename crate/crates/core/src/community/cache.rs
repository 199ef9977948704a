//! Binary cache for initial communities.
//!
//! Layout (little endian): 8-byte magic, `u32` version, `u64` key, `u64`
//! node count, `u64` community count, `u64` latent width, node labels as
//! `u32`, centroids as `f64` row-major.

use std::fs;
use std::hash::Hasher;
use std::path::Path;

use ndarray::Array2;

use super::{CommunityInit, InitConfig};
use crate::error::{Error, Result};
use crate::fingerprint::Fnv64;
use crate::graph::Graph;

pub const CACHE_MAGIC: &[u8; 8] = b"FLCINIT\0";
pub const CACHE_VERSION: u32 = 1;

/// Hash of the features and every setting that affects the result.
pub fn init_cache_key(g: &Graph, config: &InitConfig) -> u64 {
    let mut h = Fnv64::default();
    h.write_u64(g.num_nodes() as u64);
    h.write_u64(g.features().ncols() as u64);
    for &v in g.features().iter() {
        h.write_f64(v);
    }
    let ae = &config.autoencoder;
    h.write_u64(ae.hidden as u64);
    h.write_u64(ae.latent as u64);
    h.write_u64(ae.epochs as u64);
    h.write_f64(ae.learning_rate);
    h.write_u64(config.num_communities as u64);
    h.write_u64(config.kmeans_iters as u64);
    h.write_u64(config.seed);
    h.finish()
}

pub fn save_init_cache(init: &CommunityInit, key: u64, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&key.to_le_bytes());
    buf.extend_from_slice(&(init.num_nodes() as u64).to_le_bytes());
    buf.extend_from_slice(&(init.num_communities as u64).to_le_bytes());
    buf.extend_from_slice(&(init.centroids.ncols() as u64).to_le_bytes());
    for &l in &init.labels {
        buf.extend_from_slice(&(l as u32).to_le_bytes());
    }
    for v in init.centroids.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let out = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Returns `Ok(None)` when the file is missing or was written for a
/// different key.
pub fn load_init_cache(path: &Path, key: u64) -> Result<Option<CommunityInit>> {
    if !path.exists() {
        return Ok(None);
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = || Error::Validation(format!("{} is not a valid community cache", path.display()));
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8) != Some(CACHE_MAGIC.as_slice()) {
        return Err(corrupt());
    }
    let version = r.u32().ok_or_else(corrupt)?;
    if version != CACHE_VERSION {
        return Err(Error::Validation(format!(
            "{}: unsupported cache version {version}",
            path.display()
        )));
    }
    if r.u64().ok_or_else(corrupt)? != key {
        return Ok(None);
    }
    let n = r.u64().ok_or_else(corrupt)? as usize;
    let c = r.u64().ok_or_else(corrupt)? as usize;
    let l = r.u64().ok_or_else(corrupt)? as usize;
    let labels = (0..n)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(corrupt)?;
    let cent = (0..c * l)
        .map(|_| r.u64().map(f64::from_bits))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(corrupt)?;
    if r.pos != bytes.len() {
        return Err(corrupt());
    }
    let centroids = Array2::from_shape_vec((c, l), cent).map_err(|_| corrupt())?;
    CommunityInit::from_labels(labels, centroids, c).map(Some)
}
