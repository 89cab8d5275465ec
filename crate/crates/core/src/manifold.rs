//! Isomap, LLE and PCA: the learners masks are judged through.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::knn::{knn_graph, NeighborGraph};
use crate::linalg::{center_columns, fix_column_signs, fix_sign, sym_eigen_ascending};

/// All-pairs shortest-path lengths over a symmetrized neighbor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicDistances {
    d: DMatrix<f64>,
    connected: bool,
}

impl GeodesicDistances {
    /// Wraps a precomputed distance matrix (must be square and symmetric).
    pub fn from_matrix(d: DMatrix<f64>) -> Result<Self> {
        if !d.is_square() {
            return Err(Error::Parameter("distance matrix must be square".into()));
        }
        let n = d.nrows();
        for i in 0..n {
            for j in 0..i {
                if d[(i, j)] != d[(j, i)] {
                    return Err(Error::Value(format!("distance matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let connected = d.iter().all(|v| v.is_finite());
        Ok(Self { d, connected })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn connected(&self) -> bool {
        self.connected
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    /// Component label per point: the lowest index reachable from it.
    pub fn component_labels(&self) -> Vec<usize> {
        (0..self.n())
            .map(|i| (0..self.n()).find(|&j| self.d[(i, j)].is_finite()).unwrap_or(i))
            .collect()
    }

    pub fn component_count(&self) -> usize {
        let mut labels = self.component_labels();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }

    /// Indices of the largest connected component (lowest label on ties).
    pub fn largest_component(&self) -> Vec<usize> {
        let labels = self.component_labels();
        let mut counts = vec![0usize; self.n()];
        for &l in &labels {
            counts[l] += 1;
        }
        let best = (0..self.n())
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        (0..self.n()).filter(|&i| labels[i] == best).collect()
    }

    /// Restriction to the listed points; path lengths are kept as computed on the full graph.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let d = DMatrix::from_fn(keep.len(), keep.len(), |a, b| self.d[(keep[a], keep[b])]);
        let connected = d.iter().all(|v| v.is_finite());
        Self { d, connected }
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // Reversed so the max-heap pops the cheapest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier { cost: 0.0, node: source });
    while let Some(Frontier { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let c = cost + w;
            if c < dist[next] {
                dist[next] = c;
                heap.push(Frontier { cost: c, node: next });
            }
        }
    }
    dist
}

/// Undirected adjacency: an edge wherever either endpoint lists the other.
fn symmetric_adjacency(g: &NeighborGraph) -> Vec<Vec<(usize, f64)>> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.n()];
    for i in 0..g.n() {
        for (&j, &w) in g.neighbors(i).iter().zip(g.distances(i)) {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        list.dedup_by_key(|e| e.0);
    }
    adj
}

/// Shortest paths from every point over the OR-symmetrized k-NN graph.
pub fn geodesics(g: &NeighborGraph) -> GeodesicDistances {
    let adj = symmetric_adjacency(g);
    let n = g.n();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let mut d = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    // Path sums may differ in the last bit depending on direction.
    for i in 0..n {
        for j in 0..i {
            let v = d[(i, j)].min(d[(j, i)]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let connected = d.iter().all(|v| v.is_finite());
    GeodesicDistances { d, connected }
}

/// Low-dimensional coordinates (one row per point) with the spectral values behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding {
    #[serde(skip)]
    coords: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    warnings: Vec<String>,
}

impl Embedding {
    pub fn new(coords: DMatrix<f64>, eigenvalues: Vec<f64>) -> Self {
        Self {
            coords,
            eigenvalues,
            warnings: Vec::new(),
        }
    }

    pub fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DMatrix<f64> {
        self.coords
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }
}

const MDS_EIGENVALUE_FLOOR: f64 = 1e-12;

/// Classical MDS of a distance matrix into `dim` dimensions.
pub fn classical_mds(geo: &GeodesicDistances, dim: usize) -> Result<Embedding> {
    if !geo.connected() {
        return Err(Error::Disconnected {
            components: geo.component_count(),
        });
    }
    let n = geo.n();
    if dim == 0 || dim >= n {
        return Err(Error::Parameter(format!("embedding dimension {dim} must be in [1, {})", n)));
    }
    let sq = geo.matrix().map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let gram = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let (values, vectors) = sym_eigen_ascending(gram);
    // Roundoff-level eigenvalues count as zero.
    let floor = MDS_EIGENVALUE_FLOOR * values.last().copied().unwrap_or(0.0).max(0.0);
    let positive = values.iter().filter(|&&v| v > floor).count();
    let mut coords = DMatrix::zeros(n, dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    for c in 0..dim {
        let idx = n - 1 - c;
        let lambda = if values[idx] > floor { values[idx] } else { 0.0 };
        let mut v: Vec<f64> = vectors.column(idx).iter().copied().collect();
        fix_sign(&mut v);
        let scale = lambda.sqrt();
        for (i, x) in v.iter().enumerate() {
            coords[(i, c)] = x * scale;
        }
        eigenvalues.push(lambda);
    }
    let mut emb = Embedding::new(coords, eigenvalues);
    if dim > positive {
        emb.warnings.push(format!(
            "requested {dim} dimensions but only {positive} positive eigenvalues; trailing columns are zero"
        ));
    }
    Ok(emb)
}

#[derive(Debug, Clone)]
pub struct IsomapOutput {
    pub embedding: Embedding,
    pub geodesics: GeodesicDistances,
    pub graph: NeighborGraph,
    /// Points the embedding rows correspond to (all points unless restricted
    /// to the largest component).
    pub kept: Vec<usize>,
}

/// k-NN graph, then geodesics, then classical MDS.
///
/// With `largest_component` set, a disconnected graph is embedded on its
/// largest component instead of failing.
pub fn isomap(x: &DataMatrix, k: usize, dim: usize, largest_component: bool) -> Result<IsomapOutput> {
    let graph = knn_graph(x, k)?;
    let full = geodesics(&graph);
    if full.connected() || !largest_component {
        let embedding = classical_mds(&full, dim)?;
        return Ok(IsomapOutput {
            embedding,
            geodesics: full,
            graph,
            kept: (0..x.n()).collect(),
        });
    }
    let kept = full.largest_component();
    let geodesics = full.restrict(&kept);
    let embedding = classical_mds(&geodesics, dim)?;
    Ok(IsomapOutput {
        embedding,
        geodesics,
        graph,
        kept,
    })
}

/// Sparse reconstruction weights; row `i` is supported on the neighbors of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LleWeights {
    neighbors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

impl LleWeights {
    pub fn from_parts(neighbors: Vec<Vec<usize>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if neighbors.len() != weights.len() {
            return Err(Error::Parameter("neighbor and weight lists differ in length".into()));
        }
        let n = neighbors.len();
        for (i, (nb, w)) in neighbors.iter().zip(&weights).enumerate() {
            if nb.len() != w.len() || nb.iter().any(|&j| j >= n || j == i) {
                return Err(Error::Parameter(format!("invalid weight row {i}")));
            }
        }
        Ok(Self { neighbors, weights })
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for (&j, &v) in self.neighbors[i].iter().zip(&self.weights[i]) {
                w[(i, j)] += v;
            }
        }
        w
    }

    /// `‖y_i − Σ_j w_ij y_j‖²` for point `i`.
    pub fn local_residual(&self, y: &DMatrix<f64>, i: usize) -> f64 {
        let mut r: Vec<f64> = y.row(i).iter().copied().collect();
        for (&j, &w) in self.neighbors[i].iter().zip(&self.weights[i]) {
            for (c, v) in r.iter_mut().enumerate() {
                *v -= w * y[(j, c)];
            }
        }
        r.iter().map(|v| v * v).sum()
    }

    /// Sum of local residuals over every point.
    pub fn reconstruction_error(&self, y: &DMatrix<f64>) -> f64 {
        (0..self.n()).map(|i| self.local_residual(y, i)).sum()
    }
}

/// Affine weights reconstructing `center` from `neighbors`, regularized by
/// `reg · trace(C)/k` (or `reg` when the local Gram matrix vanishes).
pub(crate) fn local_weights(center: &[f64], neighbors: &[&[f64]], reg: f64) -> Result<Vec<f64>> {
    let k = neighbors.len();
    let diffs: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|nb| nb.iter().zip(center).map(|(a, b)| a - b).collect())
        .collect();
    let mut gram = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v: f64 = diffs[a].iter().zip(&diffs[b]).map(|(p, q)| p * q).sum();
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let trace = gram.trace();
    let eps = if trace > 0.0 { reg * trace / k as f64 } else { reg };
    for a in 0..k {
        gram[(a, a)] += eps;
    }
    let ones = DVector::from_element(k, 1.0);
    let solved = match gram.clone().cholesky() {
        Some(ch) => Some(ch.solve(&ones)),
        None => gram.lu().solve(&ones),
    };
    let w = solved.ok_or_else(|| Error::Numerical("singular local Gram matrix".into()))?;
    let total = w.sum();
    if !total.is_finite() || total == 0.0 || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("local weight solve produced non-finite weights".into()));
    }
    Ok(w.iter().map(|v| v / total).collect())
}

pub fn lle_weights(x: &DataMatrix, g: &NeighborGraph, reg: f64) -> Result<LleWeights> {
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::Parameter(format!("regularization must be >= 0, got {reg}")));
    }
    if g.n() != x.n() {
        return Err(Error::Parameter("neighbor graph does not match data".into()));
    }
    let weights = (0..x.n())
        .into_par_iter()
        .map(|i| {
            let rows: Vec<&[f64]> = g.neighbors(i).iter().map(|&j| x.row(j)).collect();
            local_weights(x.row(i), &rows, reg)
                .map_err(|e| Error::Numerical(format!("point {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let neighbors = (0..x.n()).map(|i| g.neighbors(i).to_vec()).collect();
    Ok(LleWeights { neighbors, weights })
}

// a second null direction means the weight graph falls apart into pieces
const NULL_SPACE_RELATIVE_EIGENVALUE: f64 = 1e-10;

/// Eigenpairs of `m` restricted to the complement of the constant vector,
/// via a Householder reflector that maps `1/√n` onto `e_0`. Ascending; the
/// lifted vectors are orthogonal to `1` to roundoff, which a plain
/// eigensolve of `m` does not guarantee when the bottom gap is small.
fn modes_without_constant(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    v[0] -= 1.0;
    let vv = v.dot(&v);
    let h = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv);
    let q = h.columns(1, n - 1).into_owned();
    let reduced = q.transpose() * m * &q;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let (values, vectors) = sym_eigen_ascending(reduced);
    (values, q * vectors)
}

/// Bottom nonconstant eigenvectors of `(I − W)ᵀ(I − W)`, scaled so `(1/n) YᵀY = I`.
pub fn lle_embed(w: &LleWeights, dim: usize) -> Result<Embedding> {
    let n = w.n();
    if dim == 0 || dim + 2 > n {
        return Err(Error::Parameter(format!(
            "embedding dimension {dim} must be in [1, {}]",
            n.saturating_sub(2)
        )));
    }
    let a = DMatrix::identity(n, n) - w.to_dense();
    // rows of W sum to one, so 1 is always in the null space of M
    let m = a.tr_mul(&a);
    let (values, vectors) = modes_without_constant(&m);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
    }
    let max = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut warnings = Vec::new();
    if values[0] < NULL_SPACE_RELATIVE_EIGENVALUE * max {
        warnings.push(format!(
            "null space of (I - W)^T(I - W) is degenerate (next eigenvalue {:.3e}); the weight graph is likely disconnected",
            values[0]
        ));
    }
    let mut basis = vectors.columns(0, dim).into_owned();
    fix_column_signs(&mut basis);
    let coords = basis * (n as f64).sqrt();
    let mut emb = Embedding::new(coords, values[..dim].to_vec());
    emb.warnings = warnings;
    Ok(emb)
}

/// Projection onto the top `m` principal axes of the centered data.
pub fn pca_embed(x: &DataMatrix, m: usize) -> Result<Embedding> {
    let (n, d) = (x.n(), x.d());
    if m == 0 || m > (n - 1).min(d) {
        return Err(Error::Parameter(format!(
            "PCA dimension {m} must be in [1, {}]",
            (n - 1).min(d)
        )));
    }
    let mut xc = x.to_matrix();
    center_columns(&mut xc);
    let svd = xc.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let order = &order[..m];
    let mut axes = DMatrix::from_fn(d, m, |r, c| v_t[(order[c], r)]);
    fix_column_signs(&mut axes);
    let coords = xc * axes;
    let eigenvalues = order
        .iter()
        .map(|&i| svd.singular_values[i].powi(2) / (n as f64 - 1.0))
        .collect();
    Ok(Embedding::new(coords, eigenvalues))
}
