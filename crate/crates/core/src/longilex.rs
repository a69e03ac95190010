//! Multi-index shells under the longilex order and the monomial vector chi.
//!
//! Multi-indices in `Z^D` are ordered first by longitude `|alpha| = sum |alpha_a|`
//! and within a shell of fixed longitude by ascending lexicographic comparison
//! of the signed integer vectors. This is the block (CMV-style) ordering that
//! every matrix in the crate is partitioned by.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a Laurent monomial `z^alpha`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// `e_a` for 1-based axis `a`.
    pub fn unit(dim: usize, a: usize) -> Self {
        let mut v = vec![0; dim];
        v[a - 1] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Longitude `|alpha| = sum_a |alpha_a|`.
    pub fn longitude(&self) -> u32 {
        self.0.iter().map(|a| a.unsigned_abs() as u32).sum()
    }

    pub fn neg(&self) -> Self {
        MultiIndex(self.0.iter().map(|a| -a).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `z^alpha`; coordinates must be nonzero when any exponent is negative.
    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        let mut acc = Complex64::new(1.0, 0.0);
        for (i, (&e, &zi)) in self.0.iter().zip(z).enumerate() {
            if zi == Complex64::ZERO {
                return Err(Error::ZeroCoordinate { index: i });
            }
            acc *= zi.powi(e as i32);
        }
        Ok(acc)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Number of multi-indices of longitude `k` in `Z^D`.
///
/// `|[k]| = sum_{j=1}^{min(k,D)} 2^j C(D,j) C(k-1,j-1)` for `k > 0`, and `|[0]| = 1`.
pub fn shell_size(dim: usize, k: u32) -> u64 {
    if k == 0 {
        return 1;
    }
    let k = k as u64;
    let d = dim as u64;
    (1..=d.min(k))
        .map(|j| (1u64 << j) * binomial(d, j) * binomial(k - 1, j - 1))
        .sum()
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All multi-indices of longitude `k`, ascending lexicographic.
pub fn enumerate_shell(dim: usize, k: u32) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(shell_size(dim, k) as usize);
    let mut prefix = Vec::with_capacity(dim);
    fill_shell(dim, k as i64, &mut prefix, &mut out);
    out
}

fn fill_shell(dim: usize, remaining: i64, prefix: &mut Vec<i64>, out: &mut Vec<MultiIndex>) {
    if prefix.len() == dim - 1 {
        if remaining == 0 {
            prefix.push(0);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
        } else {
            for last in [-remaining, remaining] {
                prefix.push(last);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
            }
        }
        return;
    }
    // ascending lex: scan the current coordinate from most negative to most positive
    for v in -remaining..=remaining {
        prefix.push(v);
        fill_shell(dim, remaining - v.abs(), prefix, out);
        prefix.pop();
    }
}

/// The ordered shells `[0], [1], ..., [K]` with global index lookups.
///
/// Immutable after construction. The full basis spans `N_K` monomials; every
/// block-partitioned matrix in the crate is indexed by one of these.
#[derive(Debug, Clone)]
pub struct LongilexBasis {
    dim: usize,
    max_longitude: u32,
    shells: Vec<Vec<MultiIndex>>,
    /// `offsets[k] = N_{k-1}`, with `offsets[K+1] = N_K` as the total size.
    offsets: Vec<usize>,
    flat: Vec<MultiIndex>,
    index_of: HashMap<MultiIndex, usize>,
}

impl LongilexBasis {
    pub fn new(dim: usize, max_longitude: u32) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        let shells: Vec<_> = (0..=max_longitude).map(|k| enumerate_shell(dim, k)).collect();
        let mut offsets = Vec::with_capacity(shells.len() + 1);
        let mut flat = Vec::new();
        let mut index_of = HashMap::new();
        let mut n = 0usize;
        for shell in &shells {
            offsets.push(n);
            for alpha in shell {
                index_of.insert(alpha.clone(), n);
                flat.push(alpha.clone());
                n += 1;
            }
        }
        offsets.push(n);
        LongilexBasis { dim, max_longitude, shells, offsets, flat, index_of }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest shell stored.
    pub fn max_longitude(&self) -> u32 {
        self.max_longitude
    }

    /// Number of shells, `K + 1`.
    pub fn num_shells(&self) -> usize {
        self.shells.len()
    }

    /// Total size `N_K`.
    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shell(&self, k: usize) -> &[MultiIndex] {
        &self.shells[k]
    }

    pub fn shell_len(&self, k: usize) -> usize {
        self.shells[k].len()
    }

    /// Global offset of shell `k`, i.e. `N_{k-1}`.
    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    /// Cumulative dimension `N_k`.
    pub fn cumulative(&self, k: usize) -> usize {
        self.offsets[k + 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.flat.iter()
    }

    pub fn multi_index(&self, global: usize) -> &MultiIndex {
        &self.flat[global]
    }

    /// Global position of `alpha`, if it lies within the stored shells.
    pub fn global_index(&self, alpha: &MultiIndex) -> Option<usize> {
        self.index_of.get(alpha).copied()
    }

    /// Shell and intra-shell position of `alpha`.
    pub fn shell_position(&self, alpha: &MultiIndex) -> Option<(usize, usize)> {
        let g = self.global_index(alpha)?;
        let k = alpha.longitude() as usize;
        Some((k, g - self.offsets[k]))
    }

    /// The monomial vector `chi(z)` over all stored shells.
    pub fn chi(&self, z: &[Complex64]) -> Result<DVector<Complex64>> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: z.len() });
        }
        let mut v = DVector::zeros(self.len());
        for (i, alpha) in self.flat.iter().enumerate() {
            v[i] = alpha.eval(z)?;
        }
        Ok(v)
    }

    /// `chi_{[k]}(z)`.
    pub fn chi_shell(&self, k: usize, z: &[Complex64]) -> Result<DVector<Complex64>> {
        let mut v = DVector::zeros(self.shell_len(k));
        for (j, alpha) in self.shells[k].iter().enumerate() {
            v[j] = alpha.eval(z)?;
        }
        Ok(v)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "D": self.dim,
            "K": self.max_longitude,
            "shells": self.shells.iter()
                .map(|s| s.iter().map(|a| a.0.clone()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }
}
