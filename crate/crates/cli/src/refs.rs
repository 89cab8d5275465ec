//! Full-data references (geodesics, Isomap embedding, LLE weights), computed
//! once per dataset and parameter set and cached on disk under a content hash.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use manimask_core::{isomap, knn_graph, lle_weights, DataMatrix, Embedding, Error as CoreError, GeodesicDistances, LleWeights};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const GEO_MAGIC: &[u8; 4] = b"MGEO";
// bump when the cached layout or anything that feeds it changes
const CACHE_VERSION: &[u8] = b"manimask-refs-2";

pub struct References {
    pub geodesics: GeodesicDistances,
    pub isomap: Embedding,
    pub weights: LleWeights,
}

#[derive(Debug, Clone, Copy)]
pub struct RefParams {
    pub k_isomap: usize,
    pub k_lle: usize,
    pub dim: usize,
    pub reg: f64,
}

pub fn content_key(x: &DataMatrix, p: &RefParams) -> String {
    let mut h = Sha256::new();
    h.update(CACHE_VERSION);
    h.update((x.n() as u64).to_le_bytes());
    h.update((x.d() as u64).to_le_bytes());
    for v in x.values() {
        h.update(v.to_le_bytes());
    }
    h.update((p.k_isomap as u64).to_le_bytes());
    h.update((p.k_lle as u64).to_le_bytes());
    h.update((p.dim as u64).to_le_bytes());
    h.update(p.reg.to_le_bytes());
    hex::encode(h.finalize())
}

pub fn compute(x: &DataMatrix, p: &RefParams) -> Result<References> {
    let out = isomap(x, p.k_isomap, p.dim, false).context("full-data Isomap")?;
    let weights = lle_weights(x, &knn_graph(x, p.k_lle)?, p.reg).context("full-data LLE weights")?;
    Ok(References {
        geodesics: out.geodesics,
        isomap: out.embedding,
        weights,
    })
}

/// Loads the references from `cache_dir` or computes and stores them.
pub fn load_or_compute(x: &DataMatrix, p: &RefParams, cache_dir: Option<&Path>) -> Result<References> {
    let Some(dir) = cache_dir else {
        return compute(x, p);
    };
    let slot = dir.join(content_key(x, p));
    if slot.is_dir() {
        match read(&slot, x.n()) {
            Ok(r) => return Ok(r),
            Err(e) => eprintln!("warning: ignoring unreadable cache {}: {e:#}", slot.display()),
        }
    }
    let refs = compute(x, p)?;
    if let Err(e) = write(&refs, dir, &slot) {
        eprintln!("warning: could not cache references in {}: {e:#}", dir.display());
    }
    Ok(refs)
}

#[derive(Serialize, Deserialize)]
struct StoredEmbedding {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
    eigenvalues: Vec<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct StoredWeights {
    neighbors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CoreError + '_ {
    move |e| CoreError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write(refs: &References, dir: &Path, slot: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    // write into a scratch dir and rename, so readers never see half a slot
    let tmp = tempdir_in(dir)?;
    let geo = refs.geodesics.matrix();
    let n = geo.nrows();
    let mut bytes = Vec::with_capacity(12 + n * n * 8);
    bytes.extend_from_slice(GEO_MAGIC);
    bytes.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            bytes.extend_from_slice(&geo[(i, j)].to_le_bytes());
        }
    }
    let geo_path = tmp.join("geodesics.bin");
    fs::write(&geo_path, bytes).map_err(io_err(&geo_path))?;

    let y = refs.isomap.coords();
    let emb = StoredEmbedding {
        n: y.nrows(),
        dim: y.ncols(),
        coords: y.transpose().as_slice().to_vec(),
        eigenvalues: refs.isomap.eigenvalues().to_vec(),
        warnings: refs.isomap.warnings().to_vec(),
    };
    let emb_path = tmp.join("isomap.json");
    fs::write(&emb_path, serde_json::to_vec(&emb)?).map_err(io_err(&emb_path))?;

    let w = &refs.weights;
    let stored = StoredWeights {
        neighbors: (0..w.n()).map(|i| w.neighbors(i).to_vec()).collect(),
        weights: (0..w.n()).map(|i| w.weights(i).to_vec()).collect(),
    };
    let w_path = tmp.join("lle_weights.json");
    fs::write(&w_path, serde_json::to_vec(&stored)?).map_err(io_err(&w_path))?;

    if fs::rename(&tmp, slot).is_err() {
        // another run filled the slot first; caches are write-once
        let _ = fs::remove_dir_all(&tmp);
    }
    Ok(())
}

fn tempdir_in(dir: &Path) -> Result<PathBuf> {
    for attempt in 0..1000u32 {
        let p = dir.join(format!(".tmp-{}-{attempt}", std::process::id()));
        if fs::create_dir(&p).is_ok() {
            return Ok(p);
        }
    }
    Err(CoreError::Parameter(format!("cannot create a scratch directory in {}", dir.display())).into())
}

fn read(slot: &Path, n_expected: usize) -> Result<References> {
    let geo_path = slot.join("geodesics.bin");
    let bytes = fs::read(&geo_path).map_err(io_err(&geo_path))?;
    let bad = || CoreError::Format(format!("{} is not a geodesic cache", geo_path.display()));
    if bytes.len() < 12 || &bytes[..4] != GEO_MAGIC {
        return Err(bad().into());
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    if n != n_expected || bytes.len() != 12 + n * n * 8 {
        return Err(bad().into());
    }
    let vals: Vec<f64> = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let geodesics = GeodesicDistances::from_matrix(DMatrix::from_row_slice(n, n, &vals))?;

    let emb_path = slot.join("isomap.json");
    let emb: StoredEmbedding = serde_json::from_slice(&fs::read(&emb_path).map_err(io_err(&emb_path))?)?;
    if emb.n != n || emb.coords.len() != emb.n * emb.dim {
        return Err(CoreError::Format(format!("{} has the wrong shape", emb_path.display())).into());
    }
    let isomap = Embedding::new(DMatrix::from_row_slice(emb.n, emb.dim, &emb.coords), emb.eigenvalues)
        .with_warnings(emb.warnings);

    let w_path = slot.join("lle_weights.json");
    let w: StoredWeights = serde_json::from_slice(&fs::read(&w_path).map_err(io_err(&w_path))?)?;
    let weights = LleWeights::from_parts(w.neighbors, w.weights)?;
    Ok(References {
        geodesics,
        isomap,
        weights,
    })
}
