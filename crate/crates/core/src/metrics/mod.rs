//! Dimension-wise correlation (`Corr`) and node-wise smoothness (`SMV`).
//!
//! Both metrics skip the inputs on which they are undefined: constant columns
//! for `Corr` (Pearson correlation has a zero denominator) and zero rows for
//! `SMV` (no direction to normalise). Skipped items are counted and returned,
//! never silently averaged in.

pub mod study;

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::DenseMatrix;

/// Relative threshold below which a centered column (or a row) counts as zero.
pub const EPS: f64 = 1e-12;

/// A metric value together with how many columns or rows were excluded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub corr: Option<f64>,
    pub smv: Option<f64>,
    pub excluded_dims: usize,
    pub excluded_rows: usize,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("pearson needs two vectors of equal length >= 2"));
    }
    let (cx, cy) = (centered(x), centered(y));
    let (nx, ny) = (norm(&cx), norm(&cy));
    if nx <= EPS * norm(x) || ny <= EPS * norm(y) {
        return Err(Error::Undefined("correlation: constant input"));
    }
    let cov: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    Ok((cov / (nx * ny)).clamp(-1.0, 1.0))
}

/// Mean absolute Pearson correlation over all pairs of distinct,
/// non-constant columns.
pub fn corr_metric(x: &DenseMatrix) -> Result<Measured> {
    let d = x.cols();
    if x.rows() < 2 || d < 2 {
        return Err(Error::Undefined("Corr: need at least two rows and two columns"));
    }
    let c = x.center_columns();
    let gram = c.matmul_tn(&c)?;
    let raw: Vec<f64> = (0..d).map(|j| norm(&x.column(j))).collect();
    let keep: Vec<usize> = (0..d)
        .filter(|&j| {
            let centered_norm = libm::sqrt(gram.get(j, j));
            centered_norm > EPS * raw[j]
        })
        .collect();
    if keep.len() < 2 {
        return Err(Error::Undefined("Corr: fewer than two non-constant columns"));
    }
    let mut total = 0.0;
    for (a, &i) in keep.iter().enumerate() {
        for &j in &keep[a + 1..] {
            let r = gram.get(i, j) / libm::sqrt(gram.get(i, i) * gram.get(j, j));
            total += r.abs().min(1.0);
        }
    }
    let pairs = keep.len() * (keep.len() - 1) / 2;
    Ok(Measured {
        value: total / pairs as f64,
        excluded: d - keep.len(),
    })
}

/// Half the Euclidean distance between the unit-normalised vectors.
pub fn normalized_euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("normalized_euclidean: length mismatch"));
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx <= EPS || ny <= EPS {
        return Err(Error::Undefined("distance: zero-norm input"));
    }
    Ok(unit_distance(x, nx, y, ny))
}

fn unit_distance(x: &[f64], nx: f64, y: &[f64], ny: f64) -> f64 {
    let sq: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let t = a / nx - b / ny;
            t * t
        })
        .sum();
    0.5 * libm::sqrt(sq)
}

/// Row norms and the indices of rows that are not (numerically) zero.
fn nonzero_rows(x: &DenseMatrix) -> (Vec<f64>, Vec<usize>) {
    let norms: Vec<f64> = (0..x.rows()).map(|i| norm(x.row(i))).collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    let keep = (0..x.rows()).filter(|&i| norms[i] > EPS * max && norms[i] > 0.0).collect();
    (norms, keep)
}

/// Mean normalised Euclidean distance over all pairs of distinct nonzero rows.
pub fn smv(x: &DenseMatrix) -> Result<Measured> {
    let (norms, keep) = nonzero_rows(x);
    if keep.len() < 2 {
        return Err(Error::Undefined("SMV: fewer than two nonzero rows"));
    }
    let units: Vec<Vec<f64>> = keep.iter().map(|&i| x.row(i).iter().map(|v| v / norms[i]).collect()).collect();
    let mut total = 0.0;
    for (a, u) in units.iter().enumerate() {
        for v in &units[a + 1..] {
            let sq: f64 = u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum();
            total += 0.5 * libm::sqrt(sq);
        }
    }
    let pairs = keep.len() * (keep.len() - 1) / 2;
    Ok(Measured {
        value: total / pairs as f64,
        excluded: x.rows() - keep.len(),
    })
}

/// Monte-Carlo estimate of [`smv`] from `pairs` uniformly drawn ordered pairs
/// of distinct nonzero rows.
pub fn smv_sampled(x: &DenseMatrix, pairs: usize, rng: &mut Rng) -> Result<Measured> {
    let (norms, keep) = nonzero_rows(x);
    if keep.len() < 2 || pairs == 0 {
        return Err(Error::Undefined("SMV: fewer than two nonzero rows"));
    }
    let mut total = 0.0;
    for _ in 0..pairs {
        let a = keep[rng.random_range(0..keep.len())];
        let mut b = a;
        while b == a {
            b = keep[rng.random_range(0..keep.len())];
        }
        total += unit_distance(x.row(a), norms[a], x.row(b), norms[b]);
    }
    Ok(Measured {
        value: total / pairs as f64,
        excluded: x.rows() - keep.len(),
    })
}

/// Rows above which [`report`] switches from exact to sampled SMV.
pub const EXACT_SMV_MAX_ROWS: usize = 5000;

/// `Corr` and `SMV` of `x` with exclusion counts. SMV is exact up to
/// [`EXACT_SMV_MAX_ROWS`] rows and estimated from 100k pairs beyond.
pub fn report(x: &DenseMatrix, rng: &mut Rng) -> MetricReport {
    let corr = corr_metric(x);
    let smv = if x.rows() <= EXACT_SMV_MAX_ROWS {
        smv(x)
    } else {
        smv_sampled(x, 100_000, rng)
    };
    let (_, keep) = nonzero_rows(x);
    MetricReport {
        corr: corr.as_ref().ok().map(|m| m.value),
        smv: smv.as_ref().ok().map(|m| m.value),
        excluded_dims: corr.map_or_else(|_| count_constant_columns(x), |m| m.excluded),
        excluded_rows: x.rows() - keep.len(),
    }
}

fn count_constant_columns(x: &DenseMatrix) -> usize {
    (0..x.cols())
        .filter(|&j| {
            let col = x.column(j);
            col.len() < 2 || norm(&centered(&col)) <= EPS * norm(&col)
        })
        .count()
}

#[cfg(test)]
mod tests;
