//! Measures on the torus represented through their Fourier coefficients.
//!
//! Everything downstream consumes only the map `alpha -> c_alpha`. The
//! normalization fixes `c_0 = 1` for the Lebesgue-Haar measure
//! `d theta / (2 pi)^D`, so the Haar moment matrix is the identity; weights
//! are densities relative to that measure.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::laurent::LaurentPolynomial;
use crate::longilex::MultiIndex;

/// Pointwise torus weight `theta -> w(theta)`.
pub type WeightFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// A measure seen through its Fourier coefficients
/// `c_alpha = (2 pi)^{-D} \int e^{-i alpha . theta} d mu(theta)`.
pub trait FourierOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn coeff(&self, alpha: &MultiIndex) -> Result<Complex64>;

    /// Hermitian symmetry `c_{-alpha} = conj(c_alpha)` holds.
    fn is_real(&self) -> bool {
        false
    }

    /// The caller asserts positivity of the measure; checked downstream
    /// through the factorization pivots.
    fn claims_positive(&self) -> bool {
        false
    }

    /// Pointwise density when one is known, for quadrature consumers.
    fn weight_fn(&self) -> Option<WeightFn> {
        None
    }

    /// Longitude band when the Fourier series is finitely supported.
    fn bandwidth(&self) -> Option<u32> {
        None
    }

    /// The weight as a Laurent polynomial when the series is finite.
    fn weight_polynomial(&self) -> Option<LaurentPolynomial> {
        None
    }
}

pub type OracleHandle = Arc<dyn FourierOracle>;

/// Lebesgue-Haar measure: `c_0 = 1`, all other coefficients vanish.
#[derive(Debug, Clone)]
pub struct HaarOracle {
    dim: usize,
}

impl HaarOracle {
    pub fn new(dim: usize) -> Self {
        HaarOracle { dim }
    }
}

impl FourierOracle for HaarOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn coeff(&self, alpha: &MultiIndex) -> Result<Complex64> {
        Ok(if alpha.0.iter().all(|&a| a == 0) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::ZERO
        })
    }

    fn is_real(&self) -> bool {
        true
    }

    fn claims_positive(&self) -> bool {
        true
    }

    fn weight_fn(&self) -> Option<WeightFn> {
        Some(Arc::new(|_| Complex64::new(1.0, 0.0)))
    }

    fn bandwidth(&self) -> Option<u32> {
        Some(0)
    }

    fn weight_polynomial(&self) -> Option<LaurentPolynomial> {
        Some(LaurentPolynomial::constant(self.dim, Complex64::new(1.0, 0.0)))
    }
}

/// Exact convolution of a base oracle with a Laurent-polynomial weight:
/// `c'_alpha = sum_beta L_beta c_{alpha - beta}`.
pub struct WeightedOracle {
    base: OracleHandle,
    weight: LaurentPolynomial,
    real: bool,
    positive: bool,
}

/// `d(T mu) = L d mu` as a coefficient convolution.
pub fn polynomial_weight_oracle(base: OracleHandle, weight: &LaurentPolynomial) -> Result<OracleHandle> {
    if base.dim() != weight.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: weight.dim() });
    }
    let real = base.is_real() && weight.is_torus_real();
    let positive = base.claims_positive() && weight_claims_positive(weight);
    Ok(Arc::new(WeightedOracle { base, weight: weight.clone(), real, positive }))
}

/// Sufficient positivity condition: constant coefficient dominates twice the
/// sum of the remaining magnitudes.
fn weight_claims_positive(weight: &LaurentPolynomial) -> bool {
    if !weight.is_torus_real() {
        return false;
    }
    let zero = MultiIndex::zero(weight.dim());
    let c0 = weight.coeff(&zero).re;
    let rest: f64 =
        weight.terms().filter(|(a, _)| **a != zero).map(|(_, c)| c.norm()).sum();
    c0 > rest
}

impl FourierOracle for WeightedOracle {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn coeff(&self, alpha: &MultiIndex) -> Result<Complex64> {
        let mut acc = Complex64::ZERO;
        for (beta, &c) in self.weight.terms() {
            acc += c * self.base.coeff(&alpha.sub(beta))?;
        }
        Ok(acc)
    }

    fn is_real(&self) -> bool {
        self.real
    }

    fn claims_positive(&self) -> bool {
        self.positive
    }

    fn weight_fn(&self) -> Option<WeightFn> {
        let base = self.base.weight_fn()?;
        let w = self.weight.clone();
        Some(Arc::new(move |theta| base(theta) * w.evaluate_angles(theta)))
    }

    fn bandwidth(&self) -> Option<u32> {
        let b = self.base.bandwidth()?;
        Some(b + self.weight.longitude().unwrap_or(0))
    }

    fn weight_polynomial(&self) -> Option<LaurentPolynomial> {
        self.base.weight_polynomial().and_then(|p| p.multiply(&self.weight).ok())
    }
}

/// Tensor trapezoidal-rule oracle for a smooth weight. Exact (to roundoff)
/// for trigonometric-polynomial weights of per-axis degree below `M/2`; a
/// coefficient request beyond the alias-free band `|alpha_a| <= (M-1)/2` is
/// rejected rather than silently aliased.
pub struct GridOracle {
    dim: usize,
    grid_size: usize,
    weight: WeightFn,
    real: bool,
    positive: bool,
    cache: RwLock<HashMap<MultiIndex, Complex64>>,
}

impl GridOracle {
    pub fn new(dim: usize, grid_size: usize, weight: WeightFn, real: bool, positive: bool) -> Self {
        assert!(grid_size >= 2);
        GridOracle { dim, grid_size, weight, real, positive, cache: RwLock::new(HashMap::new()) }
    }

    /// Default alias-safe grid for truncation level `max_longitude`.
    pub fn default_grid_size(max_longitude: u32) -> usize {
        4 * max_longitude as usize + 9
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    fn compute(&self, alpha: &MultiIndex) -> Complex64 {
        let m = self.grid_size;
        let step = 2.0 * std::f64::consts::PI / m as f64;
        let mut theta = vec![0.0f64; self.dim];
        let mut idx = vec![0usize; self.dim];
        let mut acc = Complex64::ZERO;
        // fixed lexicographic traversal of the grid keeps sums reproducible
        loop {
            for (t, &i) in theta.iter_mut().zip(idx.iter()) {
                *t = step * i as f64;
            }
            let phase: f64 = alpha.0.iter().zip(&theta).map(|(&a, &t)| a as f64 * t).sum();
            acc += (self.weight)(&theta) * Complex64::new(0.0, -phase).exp();
            let mut d = self.dim;
            loop {
                if d == 0 {
                    return acc / m.pow(self.dim as u32) as f64;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

impl FourierOracle for GridOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn coeff(&self, alpha: &MultiIndex) -> Result<Complex64> {
        let band = (self.grid_size - 1) / 2;
        if alpha.0.iter().any(|a| a.unsigned_abs() as usize > band) {
            return Err(Error::OracleBandExceeded { alpha: alpha.0.clone(), band });
        }
        if let Some(v) = self.cache.read().unwrap().get(alpha) {
            return Ok(*v);
        }
        let v = self.compute(alpha);
        self.cache.write().unwrap().insert(alpha.clone(), v);
        Ok(v)
    }

    fn is_real(&self) -> bool {
        self.real
    }

    fn claims_positive(&self) -> bool {
        self.positive
    }

    fn weight_fn(&self) -> Option<WeightFn> {
        Some(self.weight.clone())
    }
}

/// A deformation of a base measure: continuous exponential times
/// `exp(sum_alpha t_alpha z^alpha)` and discrete Laurent-polynomial steps
/// `prod_i L_i^{m_i}`.
#[derive(Clone)]
pub struct DeformedMeasure {
    pub base: OracleHandle,
    pub times: Vec<(MultiIndex, Complex64)>,
    pub steps: Vec<(LaurentPolynomial, u32)>,
}

impl DeformedMeasure {
    pub fn new(base: OracleHandle) -> Self {
        DeformedMeasure { base, times: Vec::new(), steps: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn with_time(&self, alpha: MultiIndex, t: Complex64) -> Self {
        let mut out = self.clone();
        match out.times.iter_mut().find(|(a, _)| *a == alpha) {
            Some((_, v)) => *v += t,
            None => out.times.push((alpha, t)),
        }
        out.times.retain(|(_, v)| *v != Complex64::ZERO);
        out
    }

    pub fn with_step(&self, weight: LaurentPolynomial, m: u32) -> Self {
        let mut out = self.clone();
        if m > 0 {
            out.steps.push((weight, m));
        }
        out
    }

    /// Reality is preserved exactly when `t_{-alpha} = conj(t_alpha)` and
    /// every discrete factor is torus-real.
    pub fn preserves_reality(&self) -> bool {
        self.base.is_real()
            && self.times.iter().all(|(a, t)| {
                let mirrored = self
                    .times
                    .iter()
                    .find(|(b, _)| *b == a.neg())
                    .map(|(_, v)| *v)
                    .unwrap_or(Complex64::ZERO);
                (mirrored - t.conj()).norm() <= 1e-14 * (1.0 + t.norm())
            })
            && self.steps.iter().all(|(l, _)| l.is_torus_real())
    }

    /// Realize the deformed measure as a Fourier oracle.
    ///
    /// Without continuous times the discrete steps are applied by exact
    /// convolution; with times the combined weight goes through the grid rule
    /// on `grid_size` points per axis.
    pub fn oracle(&self, grid_size: usize) -> Result<OracleHandle> {
        if self.times.is_empty() {
            let mut acc = self.base.clone();
            for (weight, m) in &self.steps {
                for _ in 0..*m {
                    acc = polynomial_weight_oracle(acc, weight)?;
                }
            }
            return Ok(acc);
        }
        let base_fn = self.base.weight_fn().ok_or(Error::NoPointwiseWeight)?;
        let times = self.times.clone();
        let steps = self.steps.clone();
        let real = self.preserves_reality();
        let positive = self.base.claims_positive()
            && real
            && self.steps.iter().all(weight_steps_positive);
        let weight: WeightFn = Arc::new(move |theta: &[f64]| {
            let mut exponent = Complex64::ZERO;
            for (alpha, t) in &times {
                let phase: f64 = alpha.0.iter().zip(theta).map(|(&a, &th)| a as f64 * th).sum();
                exponent += t * Complex64::new(0.0, phase).exp();
            }
            let mut w = base_fn(theta) * exponent.exp();
            for (l, m) in &steps {
                let v = l.evaluate_angles(theta);
                w *= v.powi(*m as i32);
            }
            w
        });
        Ok(Arc::new(GridOracle::new(self.dim(), grid_size, weight, real, positive)))
    }
}

fn weight_steps_positive(step: &(LaurentPolynomial, u32)) -> bool {
    weight_claims_positive(&step.0)
}

#[derive(Deserialize)]
struct ExpTimeJson {
    alpha: Vec<i64>,
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Deserialize)]
struct DiscreteJson {
    #[serde(rename = "L")]
    l: serde_json::Value,
    m: u32,
}

#[derive(Deserialize)]
struct WeightSpecJson {
    laurent: Option<serde_json::Value>,
    #[serde(default)]
    exp_times: Vec<ExpTimeJson>,
    #[serde(default)]
    discrete: Vec<DiscreteJson>,
}

/// Parse a weight specification relative to the Haar measure. Either
/// `{"laurent": <poly>}` or `{"exp_times": [...], "discrete": [{"L": .., "m": ..}]}`.
pub fn weight_spec_from_json(dim: usize, v: &serde_json::Value) -> Result<DeformedMeasure> {
    let spec: WeightSpecJson = serde_json::from_value(v.clone())?;
    let base: OracleHandle = Arc::new(HaarOracle::new(dim));
    let mut measure = DeformedMeasure::new(base);
    if let Some(pv) = &spec.laurent {
        let poly = LaurentPolynomial::from_json(pv)?;
        if poly.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: poly.dim() });
        }
        measure = measure.with_step(poly, 1);
    }
    for t in &spec.exp_times {
        if t.alpha.len() != dim {
            return Err(Error::InvalidWeightSpec("exp_times entry with wrong dimension".into()));
        }
        measure =
            measure.with_time(MultiIndex(t.alpha.clone()), Complex64::new(t.re, t.im));
    }
    for d in &spec.discrete {
        let poly = LaurentPolynomial::from_json(&d.l)?;
        if poly.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: poly.dim() });
        }
        measure = measure.with_step(poly, d.m);
    }
    Ok(measure)
}
