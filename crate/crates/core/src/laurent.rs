//! Finite-support Laurent polynomials over C and the nicety test.
//!
//! A Laurent polynomial is nice when its longitude is additive under
//! multiplication by arbitrary Laurent polynomials. Nicety is decided on the
//! integer support directly: every closed orthant must contain a support
//! point of maximal longitude. No convex hull is ever materialized; a support
//! point with zero coordinates belongs to every compatible orthant closure,
//! which is exactly what the closed-orthant scan captures.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::longilex::MultiIndex;

/// Coefficients below this magnitude are pruned after arithmetic.
/// Input coefficients are kept verbatim.
pub const COEFF_PRUNE_TOL: f64 = 1e-14;

/// Subset of `{1, ..., D}` labelling an orthant of `Z^D`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrthantLabel {
    dim: usize,
    sigma: Vec<usize>,
}

impl OrthantLabel {
    pub fn new(dim: usize, mut sigma: Vec<usize>) -> Self {
        sigma.sort_unstable();
        sigma.dedup();
        assert!(sigma.iter().all(|&i| i >= 1 && i <= dim));
        OrthantLabel { dim, sigma }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, i: usize) -> bool {
        self.sigma.binary_search(&i).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.sigma
    }

    pub fn complement(&self) -> OrthantLabel {
        let sigma = (1..=self.dim).filter(|i| !self.contains(*i)).collect();
        OrthantLabel { dim: self.dim, sigma }
    }

    pub fn is_full(&self) -> bool {
        self.sigma.len() == self.dim
    }

    /// All `2^D` subsets of `{1, ..., D}`.
    pub fn all(dim: usize) -> Vec<OrthantLabel> {
        (0..1u32 << dim)
            .map(|mask| {
                let sigma = (1..=dim).filter(|i| mask >> (i - 1) & 1 == 1).collect();
                OrthantLabel { dim, sigma }
            })
            .collect()
    }

    /// True when `alpha` lies in the closure of the real orthant: entries at
    /// positions in sigma are <= 0, the rest >= 0.
    pub fn closure_contains(&self, alpha: &MultiIndex) -> bool {
        alpha.0.iter().enumerate().all(|(i, &a)| {
            if self.contains(i + 1) {
                a <= 0
            } else {
                a >= 0
            }
        })
    }

    /// The vector `u_sigma = sum_{a not in sigma} e_a - sum_{a in sigma} e_a`.
    pub fn signature_vector(&self) -> MultiIndex {
        MultiIndex((1..=self.dim).map(|i| if self.contains(i) { -1 } else { 1 }).collect())
    }
}

impl fmt::Display for OrthantLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.sigma.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// A Laurent polynomial in `D` variables with complex coefficients.
///
/// Stored as a sorted support map; zero coefficients are never kept.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPolynomial {
    dim: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl LaurentPolynomial {
    pub fn zero(dim: usize) -> Self {
        LaurentPolynomial { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        let mut p = Self::zero(dim);
        p.set(MultiIndex::zero(dim), c);
        p
    }

    pub fn monomial(dim: usize, alpha: MultiIndex, c: Complex64) -> Self {
        let mut p = Self::zero(dim);
        p.set(alpha, c);
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (MultiIndex, Complex64)>) -> Self {
        let mut p = Self::zero(dim);
        for (alpha, c) in terms {
            assert_eq!(alpha.dim(), dim);
            let cur = p.terms.get(&alpha).copied().unwrap_or(Complex64::ZERO) + c;
            p.set(alpha, cur);
        }
        p
    }

    fn set(&mut self, alpha: MultiIndex, c: Complex64) {
        if c == Complex64::ZERO {
            self.terms.remove(&alpha);
        } else {
            self.terms.insert(alpha, c);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Complex64 {
        self.terms.get(alpha).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &MultiIndex> {
        self.terms.keys()
    }

    /// Max longitude over the support. Errors on the zero polynomial.
    pub fn longitude(&self) -> Result<u32> {
        self.terms.keys().map(|a| a.longitude()).max().ok_or(Error::ZeroPolynomial)
    }

    /// Coefficient convolution, pruning magnitudes below `COEFF_PRUNE_TOL`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut acc: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                *acc.entry(a.add(b)).or_insert(Complex64::ZERO) += ca * cb;
            }
        }
        acc.retain(|_, c| c.norm() >= COEFF_PRUNE_TOL);
        Ok(LaurentPolynomial { dim: self.dim, terms: acc })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut out = self.clone();
        for (a, &c) in &other.terms {
            let cur = out.coeff(a) + c;
            out.set(a.clone(), if cur.norm() < COEFF_PRUNE_TOL { Complex64::ZERO } else { cur });
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        if c == Complex64::ZERO {
            return Self::zero(self.dim);
        }
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out
    }

    /// Shift support by `alpha` (multiplication by the unit `z^alpha`).
    pub fn shifted(&self, alpha: &MultiIndex) -> Self {
        LaurentPolynomial {
            dim: self.dim,
            terms: self.terms.iter().map(|(a, &c)| (a.add(alpha), c)).collect(),
        }
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Result<Complex64> {
        let mut acc = Complex64::ZERO;
        for (alpha, &c) in &self.terms {
            acc += c * alpha.eval(z)?;
        }
        Ok(acc)
    }

    /// Evaluate at `z = e^{i theta}`.
    pub fn evaluate_angles(&self, theta: &[f64]) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (alpha, &c) in &self.terms {
            let phase: f64 = alpha.0.iter().zip(theta).map(|(&a, &t)| a as f64 * t).sum();
            acc += c * Complex64::new(0.0, phase).exp();
        }
        acc
    }

    /// True when the coefficient at `-alpha` is the conjugate of the one at
    /// `alpha`, which makes the polynomial real-valued on the torus.
    pub fn is_torus_real(&self) -> bool {
        self.terms.iter().all(|(a, &c)| {
            let mirrored = self.coeff(&a.neg());
            (mirrored - c.conj()).norm() <= 1e-12 * (1.0 + c.norm())
        })
    }

    /// Nicety scan over closed orthants of the maximal-longitude support.
    pub fn is_nice(&self) -> Result<NicetyReport> {
        let ell = self.longitude()?;
        let maximal: Vec<&MultiIndex> =
            self.terms.keys().filter(|a| a.longitude() == ell).collect();
        let mut witnesses = Vec::new();
        let mut deficient = None;
        for label in OrthantLabel::all(self.dim) {
            let hit = maximal.iter().find(|a| label.closure_contains(a)).map(|a| (*a).clone());
            if hit.is_none() && deficient.is_none() {
                deficient = Some(label.clone());
            }
            witnesses.push((label, hit));
        }
        Ok(NicetyReport { longitude: ell, nice: deficient.is_none(), witnesses, deficient })
    }

    /// Independent nicety check through longitude additivity on the `2^D`
    /// orthant test shifts `z^{(ell+1) u_sigma}`.
    pub fn nicety_oracle(&self) -> Result<bool> {
        let ell = self.longitude()?;
        let shift_len = (ell + 1) as i64;
        for label in OrthantLabel::all(self.dim) {
            let u = label.signature_vector();
            let shift = MultiIndex(u.0.iter().map(|&s| s * shift_len).collect());
            let shifted = self.shifted(&shift);
            if shifted.longitude()? != shift.longitude() + ell {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|(a, c)| serde_json::json!({"alpha": a.0, "re": c.re, "im": c.im}))
            .collect();
        serde_json::json!({"D": self.dim, "terms": terms})
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let spec: PolyJson = serde_json::from_value(v.clone())?;
        spec.into_poly()
    }
}

/// Outcome of the support-based nicety test, with per-orthant witnesses.
#[derive(Debug, Clone)]
pub struct NicetyReport {
    pub longitude: u32,
    pub nice: bool,
    /// For each orthant, a maximal-longitude support point in its closure if any.
    pub witnesses: Vec<(OrthantLabel, Option<MultiIndex>)>,
    /// First orthant with no maximal-longitude support point.
    pub deficient: Option<OrthantLabel>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    alpha: Vec<i64>,
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    #[serde(rename = "D", alias = "dim")]
    d: Option<usize>,
    terms: Vec<TermJson>,
}

impl PolyJson {
    fn into_poly(self) -> Result<LaurentPolynomial> {
        let dim = match self.d {
            Some(d) => d,
            None => self
                .terms
                .first()
                .map(|t| t.alpha.len())
                .ok_or_else(|| Error::InvalidWeightSpec("empty polynomial".into()))?,
        };
        for t in &self.terms {
            if t.alpha.len() != dim {
                return Err(Error::InvalidWeightSpec(format!(
                    "term exponent length {} does not match D={}",
                    t.alpha.len(),
                    dim
                )));
            }
        }
        Ok(LaurentPolynomial::from_terms(
            dim,
            self.terms.into_iter().map(|t| (MultiIndex(t.alpha), Complex64::new(t.re, t.im))),
        ))
    }
}

/// The worked-example weight `z1 + z1^{-1} + z2 + z2^{-1} + 5`.
pub fn paper_example_weight() -> LaurentPolynomial {
    LaurentPolynomial::from_terms(
        2,
        [
            (MultiIndex(vec![1, 0]), Complex64::new(1.0, 0.0)),
            (MultiIndex(vec![-1, 0]), Complex64::new(1.0, 0.0)),
            (MultiIndex(vec![0, 1]), Complex64::new(1.0, 0.0)),
            (MultiIndex(vec![0, -1]), Complex64::new(1.0, 0.0)),
            (MultiIndex(vec![0, 0]), Complex64::new(5.0, 0.0)),
        ],
    )
}
