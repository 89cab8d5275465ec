//! Exact k-nearest-neighbor graphs.
//!
//! Distance ties are broken by the lower point index so results are
//! deterministic on quantized data.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{distance, DataMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    neighbors: Vec<Vec<usize>>,
    distances: Vec<Vec<f64>>,
    zero_distance_pairs: Vec<(usize, usize)>,
}

impl NeighborGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i]
    }

    /// Unordered pairs `(i, j)`, `i < j`, of neighboring points at distance zero.
    pub fn zero_distance_pairs(&self) -> &[(usize, usize)] {
        &self.zero_distance_pairs
    }

    pub fn has_duplicates(&self) -> bool {
        !self.zero_distance_pairs.is_empty()
    }

    /// Points that list `i0` among their neighbors, plus `i0` itself, ascending.
    ///
    /// These are the local fits disturbed when `i0` is held out.
    pub fn affected_set(&self, i0: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| i == i0 || self.neighbors[i].contains(&i0))
            .collect()
    }
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest `(distance, index)` entries, sorted.
fn k_smallest(mut cands: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    if k < cands.len() {
        cands.select_nth_unstable_by(k, by_distance_then_index);
        cands.truncate(k);
    }
    cands.sort_unstable_by(by_distance_then_index);
    cands
}

fn build<'a, F>(n: usize, k: usize, row: F) -> Result<NeighborGraph>
where
    F: Fn(usize) -> &'a [f64] + Sync,
{
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!(
            "neighborhood size k={k} must be in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let lists: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = row(i);
            let cands = (0..n)
                .filter(|&j| j != i)
                .map(|j| (distance(xi, row(j)), j))
                .collect();
            k_smallest(cands, k)
        })
        .collect();

    let mut zero_distance_pairs = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        for &(dist, j) in list {
            if dist == 0.0 {
                zero_distance_pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    zero_distance_pairs.sort_unstable();
    zero_distance_pairs.dedup();

    let (neighbors, distances) = lists
        .into_iter()
        .map(|l| {
            let idx = l.iter().map(|&(_, j)| j).collect();
            let dist = l.iter().map(|&(d, _)| d).collect();
            (idx, dist)
        })
        .unzip();
    Ok(NeighborGraph {
        k,
        neighbors,
        distances,
        zero_distance_pairs,
    })
}

pub fn knn_graph(x: &DataMatrix, k: usize) -> Result<NeighborGraph> {
    build(x.n(), k, |i| x.row(i))
}

/// k-NN graph over the rows of an embedding matrix.
pub fn knn_graph_of_rows(y: &DMatrix<f64>, k: usize) -> Result<NeighborGraph> {
    let (n, l) = y.shape();
    let row_major: Vec<f64> = y.transpose().as_slice().to_vec();
    build(n, k, |i| &row_major[i * l..(i + 1) * l])
}

/// The `k` training points nearest to `query`, as sorted `(index, distance)` pairs.
pub fn nearest_points(x: &DataMatrix, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
    if query.len() != x.d() {
        return Err(Error::Parameter(format!(
            "query has dimension {}, data has {}",
            query.len(),
            x.d()
        )));
    }
    if k == 0 || k > x.n() {
        return Err(Error::Parameter(format!(
            "k={k} must be in [1, {}]",
            x.n()
        )));
    }
    let cands = x.rows().enumerate().map(|(j, r)| (distance(query, r), j)).collect();
    Ok(k_smallest(cands, k).into_iter().map(|(d, j)| (j, d)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> DataMatrix {
        let rows: Vec<[f64; 1]> = xs.iter().map(|&v| [v]).collect();
        DataMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn nearest_on_a_line() {
        let g = knn_graph(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.neighbors(2), &[1]);
    }

    #[test]
    fn ties_broken_by_index() {
        let g = knn_graph(&line(&[0.0, 1.0, 2.0]), 2).unwrap();
        assert_eq!(g.neighbors(1), &[0, 2]);
        let g = knn_graph(&line(&[2.0, 1.0, 0.0]), 1).unwrap();
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn k_out_of_range() {
        assert!(knn_graph(&line(&[0.0, 1.0]), 0).is_err());
        assert!(knn_graph(&line(&[0.0, 1.0]), 2).is_err());
    }

    #[test]
    fn duplicates_flagged() {
        let g = knn_graph(&line(&[0.0, 0.0, 5.0]), 1).unwrap();
        assert_eq!(g.zero_distance_pairs(), &[(0, 1)]);
        assert!(g.has_duplicates());
    }

    #[test]
    fn affected_set_contains_reverse_neighbors() {
        let g = knn_graph(&line(&[0.0, 1.0, 3.0, 10.0]), 1).unwrap();
        assert_eq!(g.affected_set(1), vec![0, 1, 2]);
        assert_eq!(g.affected_set(3), vec![3]);
    }

    #[test]
    fn nearest_points_query() {
        let x = line(&[0.0, 1.0, 3.0]);
        let nn = nearest_points(&x, &[2.1], 2).unwrap();
        assert_eq!(nn.iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 1]);
        assert!(nearest_points(&x, &[0.0], 4).is_err());
    }
}
