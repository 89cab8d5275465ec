//! Squared-secant operators consumed by the mask selectors.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::knn::NeighborGraph;

/// Squared entries of normalized neighbor secants, one row per unordered pair.
///
/// Each row is nonnegative and sums to one, so `row · z` is the squared norm
/// of the secant restricted to the mask with indicator `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantMatrix {
    a: DMatrix<f64>,
    pairs: Vec<(usize, usize)>,
}

impl SecantMatrix {
    /// Builds directly from rows; each row is normalized to sum to one.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.is_empty() || d == 0 {
            return Err(Error::Parameter("secant matrix needs at least one row and column".into()));
        }
        let mut a = DMatrix::zeros(rows.len(), d);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::Format(format!("secant row {r} has wrong length")));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Value(format!("secant row {r} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if s <= 0.0 {
                return Err(Error::Value(format!("secant row {r} is all zero")));
            }
            for (j, v) in row.iter().enumerate() {
                a[(r, j)] = v / s;
            }
        }
        let pairs = (0..rows.len()).map(|r| (r, r)).collect();
        Ok(Self { a, pairs })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Number of secants.
    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.a.nrows() == 0
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Contiguous column `j` (one entry per secant).
    pub fn column(&self, j: usize) -> &[f64] {
        let s = self.len();
        &self.a.as_slice()[j * s..(j + 1) * s]
    }
}

pub fn build_secants(x: &DataMatrix, g: &NeighborGraph) -> Result<SecantMatrix> {
    let mut pairs: Vec<(usize, usize)> = (0..g.n())
        .flat_map(|i| g.neighbors(i).iter().map(move |&j| (i.min(j), i.max(j))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();

    let d = x.d();
    let rows: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let sq: Vec<f64> = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .collect();
            let norm2: f64 = sq.iter().sum();
            if norm2 == 0.0 {
                return Err(Error::ZeroSecant(i, j));
            }
            Ok(sq.into_iter().map(|v| v / norm2).collect())
        })
        .collect::<Result<_>>()?;

    let mut a = DMatrix::zeros(pairs.len(), d);
    for (r, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            a[(r, j)] = *v;
        }
    }
    Ok(SecantMatrix { a, pairs })
}

/// The `c × d × n` array of squared clique secants.
///
/// Storage is slice-major by point; within a slice each dimension's `c`
/// entries are contiguous so per-candidate updates touch one run of memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueSecantArray {
    c: usize,
    d: usize,
    n: usize,
    data: Vec<f64>,
    cliques: Vec<Vec<usize>>,
}

impl CliqueSecantArray {
    /// Builds from explicit per-point slices given as `c × d` row-major blocks.
    pub fn from_slices(c: usize, d: usize, slices: &[Vec<f64>]) -> Result<Self> {
        if c == 0 || d == 0 || slices.is_empty() {
            return Err(Error::Parameter("clique array dimensions must be positive".into()));
        }
        let n = slices.len();
        let mut data = vec![0.0; c * d * n];
        for (i, s) in slices.iter().enumerate() {
            if s.len() != c * d {
                return Err(Error::Format(format!("slice {i} has wrong length")));
            }
            if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Value(format!("slice {i} has a negative or non-finite entry")));
            }
            for l in 0..c {
                for j in 0..d {
                    data[i * c * d + j * c + l] = s[l * d + j];
                }
            }
        }
        Ok(Self {
            c,
            d,
            n,
            data,
            cliques: vec![Vec::new(); n],
        })
    }

    /// Secants per clique.
    pub fn c(&self) -> usize {
        self.c
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, l: usize, j: usize, i: usize) -> f64 {
        self.data[i * self.c * self.d + j * self.c + l]
    }

    /// `B(:, j, i)`: squared `j`-th coordinate of every secant in clique `i`.
    #[inline]
    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        let start = i * self.c * self.d + j * self.c;
        &self.data[start..start + self.c]
    }

    /// Sorted point indices of clique `i` (empty when built from raw slices).
    pub fn clique(&self, i: usize) -> &[usize] {
        &self.cliques[i]
    }

    /// Squared secant norms `B_i · 1` for clique `i`.
    pub fn full_norms(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.c];
        for j in 0..self.d {
            for (o, v) in out.iter_mut().zip(self.column(i, j)) {
                *o += v;
            }
        }
        out
    }

    /// Squared masked norms `B_i · z` for the given dimensions.
    pub fn masked_norms(&self, i: usize, dims: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.c];
        for &j in dims {
            for (o, v) in out.iter_mut().zip(self.column(i, j)) {
                *o += v;
            }
        }
        out
    }
}

/// Lexicographic pairs `(a, b)`, `a < b`, over `0..size`.
pub fn clique_pairs(size: usize) -> Vec<(usize, usize)> {
    (0..size)
        .flat_map(|a| (a + 1..size).map(move |b| (a, b)))
        .collect()
}

pub fn build_clique_array(x: &DataMatrix, g: &NeighborGraph) -> Result<CliqueSecantArray> {
    let k = g.k();
    let n = x.n();
    let d = x.d();
    if n < k + 1 {
        return Err(Error::Parameter(format!("need n >= k+1, got n={n}, k={k}")));
    }
    let pairs = clique_pairs(k + 1);
    let c = pairs.len();

    let cliques: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut members: Vec<usize> = g.neighbors(i).to_vec();
            members.push(i);
            members.sort_unstable();
            members
        })
        .collect();

    let slices: Vec<Vec<f64>> = cliques
        .par_iter()
        .map(|members| {
            let mut slice = vec![0.0; c * d];
            for (l, &(a, b)) in pairs.iter().enumerate() {
                let (p, q) = (members[a], members[b]);
                let mut norm2 = 0.0;
                for (j, (u, v)) in x.row(p).iter().zip(x.row(q)).enumerate() {
                    let sq = (u - v) * (u - v);
                    slice[j * c + l] = sq;
                    norm2 += sq;
                }
                if norm2 == 0.0 {
                    return Err(Error::ZeroSecant(p, q));
                }
            }
            Ok(slice)
        })
        .collect::<Result<_>>()?;

    Ok(CliqueSecantArray {
        c,
        d,
        n,
        data: slices.concat(),
        cliques,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::knn_graph;

    #[test]
    fn axis_secant() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let a = build_secants(&x, &knn_graph(&x, 1).unwrap()).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a.matrix().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
    }

    #[test]
    fn diagonal_secant() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let a = build_secants(&x, &knn_graph(&x, 1).unwrap()).unwrap();
        assert_eq!(a.pairs(), &[(0, 1)]);
        assert!((a.matrix()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((a.matrix()[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_neighbors_rejected() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [3.0, 1.0]]).unwrap();
        let g = knn_graph(&x, 1).unwrap();
        assert!(matches!(build_secants(&x, &g).unwrap_err(), Error::ZeroSecant(0, 1)));
        assert!(matches!(build_clique_array(&x, &g).unwrap_err(), Error::ZeroSecant(0, 1)));
    }

    #[test]
    fn single_pair_clique() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let b = build_clique_array(&x, &knn_graph(&x, 1).unwrap()).unwrap();
        assert_eq!(b.c(), 1);
        for i in 0..2 {
            assert_eq!(b.get(0, 0, i), 4.0);
            assert_eq!(b.get(0, 1, i), 0.0);
        }
    }

    #[test]
    fn clique_size_for_k2() {
        let x = DataMatrix::from_rows(&[[0.0], [1.0], [3.0], [7.0]]).unwrap();
        let b = build_clique_array(&x, &knn_graph(&x, 2).unwrap()).unwrap();
        assert_eq!(b.c(), 3);
        assert_eq!(b.clique(0), &[0, 1, 2]);
    }

    #[test]
    fn from_slices_layout() {
        // c = 2, d = 3, one point.
        let b = CliqueSecantArray::from_slices(2, 3, &[vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(b.get(1, 0, 0), 4.0);
        assert_eq!(b.column(0, 2), &[3.0, 6.0]);
        assert_eq!(b.full_norms(0), vec![6.0, 15.0]);
        assert_eq!(b.masked_norms(0, &[0, 2]), vec![4.0, 10.0]);
    }
}
