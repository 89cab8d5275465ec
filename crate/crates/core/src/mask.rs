//! Mask selection: the greedy global and local selectors, the variance and
//! random baselines, and exhaustive oracles for tiny instances.
//!
//! Every selector breaks ties toward the lowest dimension index and returns
//! dimensions in selection order, so a size-`m` mask is a prefix of every
//! larger mask computed from the same inputs.

use std::str::FromStr;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::secant::{CliqueSecantArray, SecantMatrix};

/// Largest number of subsets the exhaustive oracles will enumerate.
pub const ORACLE_MAX_SUBSETS: u128 = 1_000_000;

/// Norm used to aggregate secant-norm distortion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Average distortion.
    #[default]
    L1,
    /// Worst-case distortion.
    Linf,
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(Self::L1),
            "inf" | "linf" | "l_inf" => Ok(Self::Linf),
            other => Err(Error::Parameter(format!("unsupported norm `{other}` (use l1 or linf)"))),
        }
    }
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Self::L1 => "l1",
            Self::Linf => "linf",
        }
    }

    #[inline]
    fn accumulate(self, acc: f64, v: f64) -> f64 {
        match self {
            Self::L1 => acc + v.abs(),
            Self::Linf => acc.max(v.abs()),
        }
    }
}

/// An ordered set of selected dimensions out of `d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    d: usize,
    selected: Vec<usize>,
}

impl Mask {
    pub fn new(d: usize, selected: Vec<usize>) -> Result<Self> {
        if selected.len() > d {
            return Err(Error::Parameter(format!(
                "mask of {} dimensions exceeds d={d}",
                selected.len()
            )));
        }
        let mut seen = vec![false; d];
        for &j in &selected {
            if j >= d {
                return Err(Error::Parameter(format!("mask index {j} out of range for d={d}")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::Parameter(format!("mask index {j} repeated")));
            }
        }
        Ok(Self { d, selected })
    }

    pub fn full(d: usize) -> Self {
        Self {
            d,
            selected: (0..d).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Dimensions in selection order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut s = self.selected.clone();
        s.sort_unstable();
        s
    }

    /// 0/1 indicator vector of length `d`.
    pub fn indicator(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.d];
        for &j in &self.selected {
            z[j] = 1.0;
        }
        z
    }

    /// The first `m` selected dimensions.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m > self.len() {
            return Err(Error::Parameter(format!(
                "prefix of {m} requested from a mask of {}",
                self.len()
            )));
        }
        Ok(Self {
            d: self.d,
            selected: self.selected[..m].to_vec(),
        })
    }

    pub fn is_prefix_of(&self, other: &Mask) -> bool {
        self.d == other.d && other.selected.starts_with(&self.selected)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mask serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            d: usize,
            selected: Vec<usize>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(raw.d, raw.selected)
    }

    /// Plain PGM (P2) raster: selected pixels 255, others 0.
    pub fn to_pgm(&self, height: usize, width: usize) -> Result<String> {
        if height * width != self.d {
            return Err(Error::Metadata(format!(
                "raster {height}x{width} does not match mask dimension {}",
                self.d
            )));
        }
        let z = self.indicator();
        let mut out = format!("P2\n{width} {height}\n255\n");
        for row in z.chunks(width) {
            let line = row
                .iter()
                .map(|&v| if v > 0.0 { "255" } else { "0" })
                .join(" ");
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }
}

fn check_size(d: usize, m: usize) -> Result<()> {
    if m == 0 || m > d {
        return Err(Error::Parameter(format!("mask size m={m} must be in [1, {d}]")));
    }
    Ok(())
}

fn check_dims(d: usize, dims: &[usize]) -> Result<()> {
    if let Some(&j) = dims.iter().find(|&&j| j >= d) {
        return Err(Error::Parameter(format!("dimension {j} out of range for d={d}")));
    }
    Ok(())
}

/// Lowest-index argmin over `(index, value)` pairs in index order.
fn argmin(costs: impl IntoIterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, c) in costs {
        match best {
            Some((_, b)) if c >= b => {}
            _ => best = Some((j, c)),
        }
    }
    best.map(|(j, _)| j)
}

fn argmax(gains: impl IntoIterator<Item = (usize, f64)>) -> Option<usize> {
    argmin(gains.into_iter().map(|(j, g)| (j, -g)))
}

/// `‖A z − (m/d) 1‖_p` for the mask given by `dims` (any order).
pub fn global_objective(a: &SecantMatrix, dims: &[usize], p: Norm) -> Result<f64> {
    check_dims(a.d(), dims)?;
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    let mut masked = vec![0.0; a.len()];
    for &j in &sorted {
        for (acc, v) in masked.iter_mut().zip(a.column(j)) {
            *acc += v;
        }
    }
    let target = dims.len() as f64 / a.d() as f64;
    Ok(masked.iter().fold(0.0, |acc, v| p.accumulate(acc, v - target)))
}

#[inline]
fn cosine(u: &[f64], v: &[f64], v_norm: f64) -> f64 {
    let mut dot = 0.0;
    let mut uu = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
    }
    if uu == 0.0 {
        0.0
    } else {
        dot / (uu.sqrt() * v_norm)
    }
}

/// Full squared secant norms per clique and their Euclidean lengths.
fn clique_references(b: &CliqueSecantArray) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let alpha: Vec<Vec<f64>> = (0..b.n()).map(|i| b.full_norms(i)).collect();
    let norms: Vec<f64> = alpha
        .iter()
        .map(|a| a.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(i) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateClique(i));
    }
    Ok((alpha, norms))
}

/// `Σ_i sim(B_i z, B_i 1)` for the mask given by `dims` (any order).
///
/// A clique whose masked norms are all zero contributes similarity 0.
pub fn local_objective(b: &CliqueSecantArray, dims: &[usize]) -> Result<f64> {
    check_dims(b.d(), dims)?;
    let (alpha, norms) = clique_references(b)?;
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    Ok((0..b.n())
        .map(|i| cosine(&b.masked_norms(i, &sorted), &alpha[i], norms[i]))
        .sum())
}

/// Greedy minimizer of the secant-norm distortion `‖A z − (m/d) 1‖_p`.
///
/// Step `i` adds the column whose inclusion brings the masked squared norms
/// closest to `i/d`.
pub fn maps_global(a: &SecantMatrix, m: usize, p: Norm) -> Result<Mask> {
    let d = a.d();
    check_size(d, m)?;
    let s = a.len();
    let mut masked = vec![0.0; s];
    let mut in_mask = vec![false; d];
    let mut selected = Vec::with_capacity(m);

    for step in 1..=m {
        let target = step as f64 / d as f64;
        let costs: Vec<(usize, f64)> = (0..d)
            .into_par_iter()
            .filter(|&j| !in_mask[j])
            .map(|j| {
                let cost = masked
                    .iter()
                    .zip(a.column(j))
                    .fold(0.0, |acc, (cur, add)| p.accumulate(acc, cur + add - target));
                (j, cost)
            })
            .collect();
        let chosen = argmin(costs).expect("candidates remain while step <= d");
        for (acc, v) in masked.iter_mut().zip(a.column(chosen)) {
            *acc += v;
        }
        in_mask[chosen] = true;
        selected.push(chosen);
    }
    Mask::new(d, selected)
}

/// Greedy maximizer of the summed cosine similarity between masked and full
/// clique secant norms.
pub fn maps_local(b: &CliqueSecantArray, m: usize) -> Result<Mask> {
    let d = b.d();
    check_size(d, m)?;
    let (alpha, norms) = clique_references(b)?;
    let (n, c) = (b.n(), b.c());
    let mut theta = vec![0.0; n * c];
    let mut in_mask = vec![false; d];
    let mut selected = Vec::with_capacity(m);

    for _ in 0..m {
        let gains: Vec<(usize, f64)> = (0..d)
            .into_par_iter()
            .filter(|&j| !in_mask[j])
            .map(|j| {
                let mut beta = vec![0.0; c];
                let mut total = 0.0;
                for i in 0..n {
                    for ((bv, t), add) in beta
                        .iter_mut()
                        .zip(&theta[i * c..(i + 1) * c])
                        .zip(b.column(i, j))
                    {
                        *bv = t + add;
                    }
                    total += cosine(&beta, &alpha[i], norms[i]);
                }
                (j, total)
            })
            .collect();
        let chosen = argmax(gains).expect("candidates remain while step <= d");
        for i in 0..n {
            for (t, add) in theta[i * c..(i + 1) * c].iter_mut().zip(b.column(i, chosen)) {
                *t += add;
            }
        }
        in_mask[chosen] = true;
        selected.push(chosen);
    }
    Mask::new(d, selected)
}

/// Per-column sum of squared deviations from the column mean.
pub fn column_variances(x: &DataMatrix) -> Vec<f64> {
    let n = x.n() as f64;
    let mut mean = vec![0.0; x.d()];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.d()];
    for row in x.rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var
}

/// The `m` highest-variance coordinates, in decreasing variance order.
pub fn pcoa(x: &DataMatrix, m: usize) -> Result<Mask> {
    check_size(x.d(), m)?;
    let var = column_variances(x);
    let mut order: Vec<usize> = (0..x.d()).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    order.truncate(m);
    Mask::new(x.d(), order)
}

/// Uniform `m`-subset via a seeded partial Fisher–Yates shuffle.
pub fn random_mask(d: usize, m: usize, seed: u64) -> Result<Mask> {
    check_size(d, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..d).collect();
    for i in 0..m {
        let j = rng.random_range(i..d);
        perm.swap(i, j);
    }
    perm.truncate(m);
    Mask::new(d, perm)
}

/// `C(d, m)`, saturating.
pub fn binomial(d: usize, m: usize) -> u128 {
    if m > d {
        return 0;
    }
    let m = m.min(d - m);
    let mut acc: u128 = 1;
    for i in 0..m {
        acc = acc.saturating_mul((d - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn check_capacity(d: usize, m: usize) -> Result<()> {
    let count = binomial(d, m);
    if count > ORACLE_MAX_SUBSETS {
        return Err(Error::Capacity(format!(
            "exhaustive search over C({d}, {m}) = {count} subsets exceeds the limit of {ORACLE_MAX_SUBSETS}"
        )));
    }
    Ok(())
}

/// Exhaustive minimizer of `‖A z − (m/d) 1‖_p`; lexicographically smallest on ties.
pub fn exact_mask_global(a: &SecantMatrix, m: usize, p: Norm) -> Result<(Mask, f64)> {
    check_size(a.d(), m)?;
    check_capacity(a.d(), m)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for dims in (0..a.d()).combinations(m) {
        let v = global_objective(a, &dims, p)?;
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((dims, v));
        }
    }
    let (dims, value) = best.expect("C(d,m) >= 1");
    Ok((Mask::new(a.d(), dims)?, value))
}

/// Exhaustive maximizer of the summed clique cosine similarity.
pub fn exact_mask_local(b: &CliqueSecantArray, m: usize) -> Result<(Mask, f64)> {
    check_size(b.d(), m)?;
    check_capacity(b.d(), m)?;
    let (alpha, norms) = clique_references(b)?;
    let subsets: Vec<Vec<usize>> = (0..b.d()).combinations(m).collect();
    let scores: Vec<f64> = subsets
        .par_iter()
        .map(|dims| {
            (0..b.n())
                .map(|i| cosine(&b.masked_norms(i, dims), &alpha[i], norms[i]))
                .sum()
        })
        .collect();
    let best = argmax(scores.iter().copied().enumerate()).expect("C(d,m) >= 1");
    Ok((Mask::new(b.d(), subsets[best].clone())?, scores[best]))
}

/// Keeps the masked coordinates in ascending dimension order.
pub fn apply_mask(x: &DataMatrix, mask: &Mask) -> Result<DataMatrix> {
    if mask.d() != x.d() {
        return Err(Error::Parameter(format!(
            "mask dimension {} does not match data dimension {}",
            mask.d(),
            x.d()
        )));
    }
    if mask.is_empty() {
        return Err(Error::Parameter("cannot apply an empty mask".into()));
    }
    x.select_columns(&mask.sorted())
}
