//! Structure-preservation scores comparing masked-data embeddings against
//! full-data references.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, RowDVector};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::knn::{knn_graph, knn_graph_of_rows, NeighborGraph};
use crate::linalg::center_columns;
use crate::manifold::{Embedding, GeodesicDistances, LleWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    ResidualVariance,
    NeighborPreservation,
    EmbeddingError,
    OoseError,
    OoseEmbeddingError,
    GazeError,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Self::ResidualVariance => "residual_variance",
            Self::NeighborPreservation => "neighbor_preservation",
            Self::EmbeddingError => "embedding_error",
            Self::OoseError => "oose_error",
            Self::OoseEmbeddingError => "oose_embedding_error",
            Self::GazeError => "gaze_error",
        }
    }

    fn check(self, value: f64) -> Result<()> {
        let ok = match self {
            Self::ResidualVariance => (0.0..=1.0).contains(&value),
            Self::NeighborPreservation => (0.0..=100.0).contains(&value),
            _ => value >= 0.0,
        };
        if ok && value.is_finite() {
            Ok(())
        } else {
            Err(Error::Value(format!("{} value {value} out of range", self.name())))
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Self::ResidualVariance,
            Self::NeighborPreservation,
            Self::EmbeddingError,
            Self::OoseError,
            Self::OoseEmbeddingError,
            Self::GazeError,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::Parameter(format!("unknown metric `{s}`")))
    }
}

/// One scored cell of an experiment: a metric value plus the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub algorithm: String,
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub metric: Metric,
    pub value: f64,
    pub trials: usize,
    pub stddev: f64,
    pub seed: u64,
}

impl EvalReport {
    pub fn new(metric: Metric, value: f64) -> Result<Self> {
        metric.check(value)?;
        Ok(Self {
            dataset: String::new(),
            algorithm: String::new(),
            m: 0,
            k: 0,
            l: 0,
            metric,
            value,
            trials: 1,
            stddev: 0.0,
            seed: 0,
        })
    }

    /// Mean and sample standard deviation over repeated trials.
    pub fn from_trials(metric: Metric, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("no trial values".into()));
        }
        let (mean, sd) = mean_and_std(values);
        let mut r = Self::new(metric, mean)?;
        r.trials = values.len();
        r.stddev = sd;
        Ok(r)
    }
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn pairwise_upper(y: &DMatrix<f64>) -> Vec<f64> {
    let n = y.nrows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((y.row(i) - y.row(j)).norm());
        }
    }
    out
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one of the distance vectors has zero variance".into(),
        ));
    }
    Ok(sab / (saa.sqrt() * sbb.sqrt()))
}

/// `1 − r²` between reference geodesic distances and embedded Euclidean distances.
pub fn residual_variance(geo_full: &GeodesicDistances, y: &Embedding) -> Result<f64> {
    let n = geo_full.n();
    if y.n() != n {
        return Err(Error::Parameter(format!(
            "embedding has {} points, reference has {n}",
            y.n()
        )));
    }
    if !geo_full.connected() {
        return Err(Error::Disconnected {
            components: geo_full.component_count(),
        });
    }
    let mut reference = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            reference.push(geo_full.get(i, j));
        }
    }
    let r = pearson(&reference, &pairwise_upper(y.coords()))?;
    Ok((1.0 - r * r).clamp(0.0, 1.0))
}

/// Percentage of each point's full-data neighbors that stay neighbors in `y`.
pub fn neighbor_preservation(x_full: &DataMatrix, y: &Embedding, k: usize) -> Result<f64> {
    let full = knn_graph(x_full, k)?;
    neighbor_preservation_with(&full, y)
}

/// As [`neighbor_preservation`] with a precomputed full-data graph.
pub fn neighbor_preservation_with(full: &NeighborGraph, y: &Embedding) -> Result<f64> {
    if y.n() != full.n() {
        return Err(Error::Parameter(format!(
            "embedding has {} points, reference has {}",
            y.n(),
            full.n()
        )));
    }
    let k = full.k();
    let emb = knn_graph_of_rows(y.coords(), k)?;
    let shared: usize = (0..full.n())
        .map(|i| {
            full.neighbors(i)
                .iter()
                .filter(|j| emb.neighbors(i).contains(j))
                .count()
        })
        .sum();
    Ok(100.0 * shared as f64 / (full.n() * k) as f64)
}

/// Sum of local-fit residuals of `y` under full-data weights.
pub fn embedding_error(w_full: &LleWeights, y: &Embedding) -> Result<f64> {
    if y.n() != w_full.n() {
        return Err(Error::Parameter(format!(
            "embedding has {} points, weights have {}",
            y.n(),
            w_full.n()
        )));
    }
    Ok(w_full.reconstruction_error(y.coords()))
}

/// Similarity transform mapping one point set onto another.
#[derive(Debug, Clone, PartialEq)]
pub struct Procrustes {
    pub scale: f64,
    /// Orthogonal `ℓ × ℓ`; reflections allowed.
    pub rotation: DMatrix<f64>,
    pub translation: RowDVector<f64>,
}

impl Procrustes {
    /// `s · Y · R + t`, row-wise.
    pub fn apply(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = y * &self.rotation * self.scale;
        for mut row in out.row_iter_mut() {
            row += &self.translation;
        }
        out
    }
}

/// Fits translation, orthogonal transform and isotropic scale minimizing
/// `‖Y_ref − (s·Y·R + t)‖_F`.
pub fn procrustes_fit(y_ref: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Procrustes> {
    if y_ref.shape() != y.shape() {
        return Err(Error::Parameter(format!(
            "shape mismatch: {:?} vs {:?}",
            y_ref.shape(),
            y.shape()
        )));
    }
    let mut a = y_ref.clone();
    let mut b = y.clone();
    let mean_a = center_columns(&mut a);
    let mean_b = center_columns(&mut b);
    let norm_b = b.norm_squared();
    if norm_b == 0.0 {
        return Err(Error::Value("cannot align a degenerate (single-location) point set".into()));
    }
    let cross = b.tr_mul(&a);
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numerical("Procrustes SVD failed".into())),
    };
    let rotation = u * v_t;
    let scale = svd.singular_values.sum() / norm_b;
    let mb = RowDVector::from_vec(mean_b);
    let ma = RowDVector::from_vec(mean_a);
    let translation = ma - (mb * &rotation) * scale;
    Ok(Procrustes {
        scale,
        rotation,
        translation,
    })
}

/// Aligns `y` onto `y_ref`; returns the aligned copy and the Frobenius residual.
pub fn procrustes_align(y_ref: &Embedding, y: &Embedding) -> Result<(Embedding, f64)> {
    let fit = procrustes_fit(y_ref.coords(), y.coords())?;
    let aligned = fit.apply(y.coords());
    let disparity = (y_ref.coords() - &aligned).norm();
    Ok((Embedding::new(aligned, y.eigenvalues().to_vec()), disparity))
}

fn row_distance(a: &DMatrix<f64>, b: &DMatrix<f64>, i: usize) -> f64 {
    (a.row(i) - b.row(i)).norm()
}

/// Mean distance per point after Procrustes-aligning `y_oose` onto `y_full`.
pub fn oose_error_isomap(y_full: &Embedding, y_oose: &Embedding) -> Result<f64> {
    let (aligned, _) = procrustes_align(y_full, y_oose)?;
    let n = y_full.n();
    Ok((0..n)
        .map(|i| row_distance(y_full.coords(), aligned.coords(), i))
        .sum::<f64>()
        / n as f64)
}

/// Distance at the held-out row `test` after aligning one leave-one-out
/// manifold onto the full-data embedding.
pub fn fold_oose_error(y_full: &DMatrix<f64>, y_fold: &DMatrix<f64>, test: usize) -> Result<f64> {
    let fit = procrustes_fit(y_full, y_fold)?;
    let aligned = fit.apply(y_fold);
    Ok(row_distance(y_full, &aligned, test))
}

/// Average, over held-out points, of the local-fit residuals of every point
/// whose neighborhood contains the held-out one (and the point itself).
///
/// `fold_embeddings[i0]` is the full `n × ℓ` embedding assembled for the
/// fold that held out `i0`.
pub fn oose_embedding_error(
    w_full: &LleWeights,
    fold_embeddings: &[DMatrix<f64>],
    g: &NeighborGraph,
) -> Result<f64> {
    let n = w_full.n();
    if fold_embeddings.len() != n || g.n() != n {
        return Err(Error::Parameter(format!(
            "expected {n} fold embeddings and a graph over {n} points"
        )));
    }
    if let Some(bad) = fold_embeddings.iter().position(|y| y.nrows() != n) {
        return Err(Error::Parameter(format!("fold embedding {bad} has wrong row count")));
    }
    let total: f64 = (0..n)
        .map(|i0| {
            g.affected_set(i0)
                .into_iter()
                .map(|i| w_full.local_residual(&fold_embeddings[i0], i))
                .sum::<f64>()
        })
        .sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics;

    fn line_embedding(xs: &[f64]) -> Embedding {
        Embedding::new(DMatrix::from_column_slice(xs.len(), 1, xs), vec![1.0])
    }

    #[test]
    fn perfect_embedding_has_zero_residual_variance() {
        let xs = [0.0, 1.0, 2.5, 4.0];
        let x = DataMatrix::from_rows(&xs.iter().map(|&v| [v]).collect::<Vec<_>>()).unwrap();
        let geo = geodesics(&knn_graph(&x, 1).unwrap());
        assert!(residual_variance(&geo, &line_embedding(&xs)).unwrap() < 1e-15);
        let scaled: Vec<f64> = xs.iter().map(|v| 3.0 * v + 7.0).collect();
        assert!(residual_variance(&geo, &line_embedding(&scaled)).unwrap() < 1e-15);
    }

    #[test]
    fn constant_embedding_has_undefined_correlation() {
        let x = DataMatrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let geo = geodesics(&knn_graph(&x, 1).unwrap());
        let err = residual_variance(&geo, &line_embedding(&[1.0, 1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrelation(_)));
    }

    #[test]
    fn reversed_line_keeps_neighbors() {
        let xs: Vec<f64> = (0..12).map(|i| (i as f64).powi(2)).collect();
        let x = DataMatrix::from_rows(&xs.iter().map(|&v| [v]).collect::<Vec<_>>()).unwrap();
        let rev: Vec<f64> = xs.iter().map(|v| -v).collect();
        assert_eq!(neighbor_preservation(&x, &line_embedding(&rev), 3).unwrap(), 100.0);
        assert!(neighbor_preservation(&x, &line_embedding(&rev), 12).is_err());
    }

    #[test]
    fn procrustes_identity() {
        let y = Embedding::new(DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 2.0]), vec![]);
        let (aligned, disparity) = procrustes_align(&y, &y).unwrap();
        assert!(disparity < 1e-12);
        assert!((aligned.coords() - y.coords()).abs().max() < 1e-12);
        let fit = procrustes_fit(y.coords(), y.coords()).unwrap();
        assert!((fit.scale - 1.0).abs() < 1e-12);
        assert!((fit.rotation - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn procrustes_rejects_degenerate() {
        let a = Embedding::new(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), vec![]);
        let b = Embedding::new(DMatrix::from_row_slice(2, 1, &[5.0, 5.0]), vec![]);
        assert!(procrustes_align(&a, &b).is_err());
    }

    #[test]
    fn procrustes_handles_reflection() {
        let a = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        let mut b = a.clone();
        b.column_mut(0).neg_mut();
        let fit = procrustes_fit(&a, &b).unwrap();
        assert!((&a - fit.apply(&b)).norm() < 1e-12);
        assert!(fit.rotation.determinant() < 0.0);
    }

    #[test]
    fn report_ranges_enforced() {
        assert!(EvalReport::new(Metric::ResidualVariance, 1.5).is_err());
        assert!(EvalReport::new(Metric::NeighborPreservation, 101.0).is_err());
        assert!(EvalReport::new(Metric::EmbeddingError, -1.0).is_err());
        let r = EvalReport::from_trials(Metric::EmbeddingError, &[1.0, 3.0]).unwrap();
        assert_eq!((r.value, r.trials), (2.0, 2));
        assert!((r.stddev - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!("gaze_error".parse::<Metric>().unwrap(), Metric::GazeError);
    }
}
