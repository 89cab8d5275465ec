//! Out-of-sample extension for LLE and Isomap, appearance-based parameter
//! estimation, and the leave-one-out protocol that scores masks with them.

use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{distance, DataMatrix};
use crate::error::{Error, Result};
use crate::knn::{knn_graph, nearest_points, NeighborGraph};
use crate::manifold::{
    classical_mds, geodesics, isomap, lle_embed, lle_weights, local_weights, Embedding,
    GeodesicDistances,
};
use crate::mask::{apply_mask, Mask};
use crate::metrics::{fold_oose_error, oose_embedding_error, EvalReport, Metric};

/// Embedding of a held-out point and the local fits it disturbs.
#[derive(Debug, Clone, PartialEq)]
pub struct OoseResult {
    pub y: Vec<f64>,
    /// Training points that would count the new point among their `k`
    /// nearest neighbors, plus the new point itself (index `n_train`).
    pub affected: Vec<usize>,
}

fn check_query(x_train: &DataMatrix, x_test: &[f64], k: usize) -> Result<()> {
    if x_test.len() != x_train.d() {
        return Err(Error::Parameter(format!(
            "test point has dimension {}, training data has {}",
            x_test.len(),
            x_train.d()
        )));
    }
    if k == 0 || k > x_train.n() {
        return Err(Error::Parameter(format!(
            "k={k} must be in [1, {}] for {} training points",
            x_train.n(),
            x_train.n()
        )));
    }
    Ok(())
}

/// Training points whose neighborhood would admit `x_test`; ties go to the
/// existing (lower-index) training point.
fn affected_training_points(x_train: &DataMatrix, g_train: &NeighborGraph, x_test: &[f64]) -> Vec<usize> {
    let mut out: Vec<usize> = (0..x_train.n())
        .filter(|&i| {
            let kth = *g_train.distances(i).last().expect("k >= 1");
            distance(x_train.row(i), x_test) < kth
        })
        .collect();
    out.push(x_train.n());
    out
}

/// Reconstruction weights of `x_test` over its `k` nearest training points.
fn query_weights(x_train: &DataMatrix, x_test: &[f64], k: usize, reg: f64) -> Result<Vec<(usize, f64)>> {
    check_query(x_train, x_test, k)?;
    let nn = nearest_points(x_train, x_test, k)?;
    let rows: Vec<&[f64]> = nn.iter().map(|&(j, _)| x_train.row(j)).collect();
    let w = local_weights(x_test, &rows, reg)?;
    Ok(nn.into_iter().map(|(j, _)| j).zip(w).collect())
}

fn lle_extend(x_train: &DataMatrix, y_train: &DMatrix<f64>, x_test: &[f64], k: usize, reg: f64) -> Result<Vec<f64>> {
    if y_train.nrows() != x_train.n() {
        return Err(Error::Parameter("training embedding does not match training data".into()));
    }
    let mut y = vec![0.0; y_train.ncols()];
    for (j, w) in query_weights(x_train, x_test, k, reg)? {
        for (c, v) in y.iter_mut().enumerate() {
            *v += w * y_train[(j, c)];
        }
    }
    Ok(y)
}

/// Embeds `x_test` as the weighted combination of its training neighbors' embeddings.
pub fn lle_oose(x_train: &DataMatrix, y_train: &Embedding, x_test: &[f64], k: usize, reg: f64) -> Result<OoseResult> {
    let y = lle_extend(x_train, y_train.coords(), x_test, k, reg)?;
    let g = knn_graph(x_train, k.min(x_train.n() - 1))?;
    Ok(OoseResult {
        y,
        affected: affected_training_points(x_train, &g, x_test),
    })
}

fn isomap_extend(
    x_train: &DataMatrix,
    geo: &GeodesicDistances,
    emb: &Embedding,
    x_test: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    check_query(x_train, x_test, k)?;
    let n = x_train.n();
    if geo.n() != n || emb.n() != n {
        return Err(Error::Parameter("geodesics/embedding do not match training data".into()));
    }
    if let Some(c) = emb.eigenvalues().iter().position(|&l| l <= 0.0) {
        return Err(Error::Numerical(format!(
            "component {c} has non-positive eigenvalue; cannot extend"
        )));
    }
    let nn = nearest_points(x_train, x_test, k)?;
    let to_test: Vec<f64> = (0..n)
        .map(|i| {
            nn.iter()
                .map(|&(v, dv)| dv + geo.get(v, i))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    if to_test.iter().any(|v| !v.is_finite()) {
        return Err(Error::Disconnected {
            components: geo.component_count(),
        });
    }
    let d = geo.matrix();
    let mean_sq: Vec<f64> = (0..n)
        .map(|i| d.column(i).iter().map(|v| v * v).sum::<f64>() / n as f64)
        .collect();
    let y = emb
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(c, &lambda)| {
            let s: f64 = (0..n)
                .map(|i| emb.coords()[(i, c)] * (mean_sq[i] - to_test[i] * to_test[i]))
                .sum();
            s / (2.0 * lambda)
        })
        .collect();
    Ok(y)
}

/// Landmark-MDS extension: geodesics to the test point are routed through
/// its `k` nearest training points, then projected onto the MDS axes.
pub fn isomap_oose(
    x_train: &DataMatrix,
    geo: &GeodesicDistances,
    emb: &Embedding,
    x_test: &[f64],
    k: usize,
) -> Result<OoseResult> {
    let y = isomap_extend(x_train, geo, emb, x_test, k)?;
    let g = knn_graph(x_train, k.min(x_train.n() - 1))?;
    Ok(OoseResult {
        y,
        affected: affected_training_points(x_train, &g, x_test),
    })
}

/// Applies the test point's reconstruction weights to the training parameters.
pub fn estimate_parameters(x_train: &DataMatrix, x_test: &[f64], k: usize, reg: f64) -> Result<Vec<f64>> {
    let params = x_train
        .params()
        .ok_or_else(|| Error::Parameter("training data carries no parameters".into()))?;
    let mut theta = vec![0.0; params.ncols()];
    for (j, w) in query_weights(x_train, x_test, k, reg)? {
        for (c, t) in theta.iter_mut().enumerate() {
            *t += w * params[(j, c)];
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OoseMethod {
    Isomap,
    Lle,
    Gaze,
}

impl OoseMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Isomap => "isomap",
            Self::Lle => "lle",
            Self::Gaze => "gaze",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Self::Isomap => Metric::OoseError,
            Self::Lle => Metric::OoseEmbeddingError,
            Self::Gaze => Metric::GazeError,
        }
    }
}

impl FromStr for OoseMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isomap" => Ok(Self::Isomap),
            "lle" => Ok(Self::Lle),
            "gaze" => Ok(Self::Gaze),
            other => Err(Error::Parameter(format!("unknown OoSE method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooConfig {
    pub k: usize,
    pub dim: usize,
    pub reg: f64,
    /// Recompute shortest paths per Isomap fold instead of reusing the
    /// all-points geodesic matrix with the held-out row and column removed.
    pub exact_folds: bool,
}

impl Default for LooConfig {
    fn default() -> Self {
        Self {
            k: 10,
            dim: 2,
            reg: 1e-3,
            exact_folds: false,
        }
    }
}

fn others(n: usize, i: usize) -> Vec<usize> {
    (0..n).filter(|&j| j != i).collect()
}

/// Places fold-training rows and the extended point back at their original indices.
fn assemble_fold(train: &DMatrix<f64>, held_out: usize, y: &[f64]) -> DMatrix<f64> {
    let n = train.nrows() + 1;
    DMatrix::from_fn(n, train.ncols(), |r, c| match r.cmp(&held_out) {
        std::cmp::Ordering::Less => train[(r, c)],
        std::cmp::Ordering::Equal => y[c],
        std::cmp::Ordering::Greater => train[(r - 1, c)],
    })
}

/// Held-out fold embeddings for Isomap on masked data.
pub fn isomap_fold_embeddings(xm: &DataMatrix, cfg: &LooConfig) -> Result<Vec<DMatrix<f64>>> {
    let n = xm.n();
    let geo = geodesics(&knn_graph(xm, cfg.k)?);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let keep = others(n, i);
            let train = xm.select_rows(&keep)?;
            let geo_fold = if cfg.exact_folds {
                geodesics(&knn_graph(&train, cfg.k)?)
            } else {
                geo.restrict(&keep)
            };
            let emb = classical_mds(&geo_fold, cfg.dim)?;
            let y = isomap_extend(&train, &geo_fold, &emb, xm.row(i), cfg.k)?;
            Ok(assemble_fold(emb.coords(), i, &y))
        })
        .collect()
}

/// Held-out fold embeddings for LLE on masked data (weights and embedding retrained per fold).
pub fn lle_fold_embeddings(xm: &DataMatrix, cfg: &LooConfig) -> Result<Vec<DMatrix<f64>>> {
    let n = xm.n();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let train = xm.without_row(i)?;
            let w = lle_weights(&train, &knn_graph(&train, cfg.k)?, cfg.reg)?;
            let emb = lle_embed(&w, cfg.dim)?;
            let y = lle_extend(&train, emb.coords(), xm.row(i), cfg.k, cfg.reg)?;
            Ok(assemble_fold(emb.coords(), i, &y))
        })
        .collect()
}

/// Scores `mask` by holding out each point in turn, training on the rest of
/// the masked data and extending to the masked held-out point.
pub fn leave_one_out(x: &DataMatrix, mask: &Mask, method: OoseMethod, cfg: &LooConfig) -> Result<EvalReport> {
    let xm = apply_mask(x, mask)?;
    let n = x.n();
    let value = match method {
        OoseMethod::Isomap => {
            let full = isomap(x, cfg.k, cfg.dim, false)?;
            let folds = isomap_fold_embeddings(&xm, cfg)?;
            let errs = folds
                .par_iter()
                .enumerate()
                .map(|(i, y)| fold_oose_error(full.embedding.coords(), y, i))
                .collect::<Result<Vec<_>>>()?;
            errs.iter().sum::<f64>() / n as f64
        }
        OoseMethod::Lle => {
            let g_full = knn_graph(x, cfg.k)?;
            let w_full = lle_weights(x, &g_full, cfg.reg)?;
            let folds = lle_fold_embeddings(&xm, cfg)?;
            oose_embedding_error(&w_full, &folds, &g_full)?
        }
        OoseMethod::Gaze => {
            let params = x
                .params()
                .ok_or_else(|| Error::Parameter("gaze estimation needs ground-truth parameters".into()))?;
            let errs = (0..n)
                .into_par_iter()
                .map(|i| {
                    let train = xm.without_row(i)?;
                    let est = estimate_parameters(&train, xm.row(i), cfg.k, cfg.reg)?;
                    Ok(est
                        .iter()
                        .zip(params.row(i).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt())
                })
                .collect::<Result<Vec<f64>>>()?;
            errs.iter().sum::<f64>() / n as f64
        }
    };
    let mut report = EvalReport::new(method.metric(), value)?;
    report.m = mask.len();
    report.k = cfg.k;
    report.l = cfg.dim;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{blob_image, synth_dataset, SynthKind, SynthOptions};

    #[test]
    fn lle_oose_midpoint() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [2.0, 2.0], [10.0, 0.0]]).unwrap();
        let y = Embedding::new(DMatrix::from_row_slice(3, 1, &[-1.0, 3.0, 8.0]), vec![0.0]);
        let r = lle_oose(&x, &y, &[1.0, 1.0], 2, 1e-3).unwrap();
        assert!((r.y[0] - 1.0).abs() < 1e-6);
        assert!(r.affected.contains(&3));
    }

    #[test]
    fn lle_oose_rejects_large_k() {
        let x = DataMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let y = Embedding::new(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), vec![0.0]);
        assert!(matches!(lle_oose(&x, &y, &[0.5], 3, 1e-3), Err(Error::Parameter(_))));
    }

    #[test]
    fn affected_set_for_new_point() {
        let x = DataMatrix::from_rows(&[[0.0], [1.0], [5.0], [20.0]]).unwrap();
        let y = Embedding::new(DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 5.0, 20.0]), vec![0.0]);
        let r = lle_oose(&x, &y, &[4.0], 1, 1e-3).unwrap();
        // 2 is 4 from 1, test is 1 away; 1's neighbor is 0 at distance 1 (tie -> existing wins).
        assert_eq!(r.affected, vec![2, 4]);
    }

    #[test]
    fn isomap_oose_reproduces_training_points() {
        let x = synth_dataset(SynthKind::SwissRoll, 120, 5, SynthOptions::default()).unwrap();
        let out = isomap(&x, 8, 2, false).unwrap();
        for t in [0, 17, 64, 119] {
            let r = isomap_oose(&x, &out.geodesics, &out.embedding, x.row(t), 8).unwrap();
            for c in 0..2 {
                assert!((r.y[c] - out.embedding.coords()[(t, c)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn isomap_oose_triangle_vertex() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]]).unwrap();
        let out = isomap(&x, 2, 2, false).unwrap();
        let r = isomap_oose(&x, &out.geodesics, &out.embedding, &[3.0, 0.0], 2).unwrap();
        assert!((r.y[0] - out.embedding.coords()[(1, 0)]).abs() < 1e-9);
        assert!((r.y[1] - out.embedding.coords()[(1, 1)]).abs() < 1e-9);
    }

    #[test]
    fn isomap_oose_requires_positive_eigenvalues() {
        let x = DataMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let out = isomap(&x, 2, 2, false).unwrap();
        assert!(matches!(
            isomap_oose(&x, &out.geodesics, &out.embedding, &[0.5], 1),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn estimate_midpoint_blob() {
        let (g, r) = (16, 2.0);
        let a = (5.0, 6.0);
        let b = (8.0, 7.0);
        let x = DataMatrix::from_rows(&[blob_image(g, r, a.0, a.1), blob_image(g, r, b.0, b.1)])
            .unwrap()
            .with_params(DMatrix::from_row_slice(2, 2, &[a.0, a.1, b.0, b.1]))
            .unwrap();
        let mid = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
        let est = estimate_parameters(&x, &blob_image(g, r, mid.0, mid.1), 2, 1e-3).unwrap();
        assert!((est[0] - mid.0).abs() < 0.1 && (est[1] - mid.1).abs() < 0.1, "{est:?}");
    }

    #[test]
    fn estimate_requires_params() {
        let x = DataMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(estimate_parameters(&x, &[0.5], 2, 1e-3), Err(Error::Parameter(_))));
    }

    #[test]
    fn assemble_reinserts_row() {
        let train = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let full = assemble_fold(&train, 1, &[2.0]);
        assert_eq!(full.as_slice(), &[1.0, 2.0, 3.0]);
    }
}
