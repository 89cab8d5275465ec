#![allow(dead_code)]

use manimask_core::DataMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_data(n: usize, d: usize, seed: u64) -> DataMatrix {
    let mut r = rng(seed);
    let values = (0..n * d).map(|_| gaussian(&mut r)).collect();
    DataMatrix::new(n, d, values).unwrap()
}

pub fn random_matrix(n: usize, d: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| gaussian(r))
}

/// Random orthogonal matrix (Q factor of a Gaussian matrix), possibly a reflection.
pub fn random_orthogonal(l: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    random_matrix(l, l, r).qr().q()
}

/// All m-subsets of 0..d, lexicographic, by direct recursion.
pub fn subsets(d: usize, m: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, d: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for j in start..d {
            cur.push(j);
            go(j + 1, d, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, d, m, &mut Vec::new(), &mut out);
    out
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
