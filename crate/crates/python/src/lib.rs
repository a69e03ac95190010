//! Python bindings: longilex bases, Laurent polynomials, factorizations of
//! weighted torus measures, and the Darboux/verification entry points.

use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use torus_olp::darboux;
use torus_olp::gaussborel;
use torus_olp::laurent::LaurentPolynomial;
use torus_olp::longilex::{self, LongilexBasis, MultiIndex};
use torus_olp::measure::{weight_spec_from_json, DeformedMeasure, GridOracle, HaarOracle};
use torus_olp::moments::{build_moment, MomentMatrix};
use torus_olp::opbasis::{self, Side};
use torus_olp::verify;

fn err(e: torus_olp::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_to_py(m: &nalgebra::DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Number of multi-indices of longitude `k` in `Z^D`.
#[pyfunction]
fn shell_size(dim: usize, k: u32) -> u64 {
    longilex::shell_size(dim, k)
}

/// The shell `[k]` in ascending lexicographic order.
#[pyfunction]
fn enumerate_shell(dim: usize, k: u32) -> Vec<Vec<i64>> {
    longilex::enumerate_shell(dim, k).into_iter().map(|a| a.0).collect()
}

/// Longilex basis over shells `0..=K`.
#[pyclass]
struct Basis {
    inner: Arc<LongilexBasis>,
}

#[pymethods]
impl Basis {
    #[new]
    fn new(dim: usize, max_longitude: u32) -> Self {
        Basis { inner: Arc::new(LongilexBasis::new(dim, max_longitude)) }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn max_longitude(&self) -> u32 {
        self.inner.max_longitude()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn shells(&self) -> Vec<Vec<Vec<i64>>> {
        (0..self.inner.num_shells())
            .map(|k| self.inner.shell(k).iter().map(|a| a.0.clone()).collect())
            .collect()
    }

    /// The monomial vector chi(z).
    fn chi(&self, z: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let v = self.inner.chi(&z).map_err(err)?;
        Ok(v.iter().copied().collect())
    }

    fn global_index(&self, alpha: Vec<i64>) -> Option<usize> {
        self.inner.global_index(&MultiIndex(alpha))
    }
}

/// A finite-support Laurent polynomial with complex coefficients.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Poly {
    inner: LaurentPolynomial,
}

#[pymethods]
impl Poly {
    #[new]
    fn new(dim: usize, terms: Vec<(Vec<i64>, Complex64)>) -> Self {
        Poly {
            inner: LaurentPolynomial::from_terms(
                dim,
                terms.into_iter().map(|(a, c)| (MultiIndex(a), c)),
            ),
        }
    }

    /// Parse the JSON form `{"D": .., "terms": [{"alpha": [...], "re": .., "im": ..}]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Poly { inner: LaurentPolynomial::from_json(&v).map_err(err)? })
    }

    /// The worked-example weight z1 + 1/z1 + z2 + 1/z2 + 5.
    #[staticmethod]
    fn paper_example() -> Self {
        Poly { inner: torus_olp::laurent::paper_example_weight() }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn terms(&self) -> Vec<(Vec<i64>, Complex64)> {
        self.inner.terms().map(|(a, c)| (a.0.clone(), *c)).collect()
    }

    fn longitude(&self) -> PyResult<u32> {
        self.inner.longitude().map_err(err)
    }

    fn multiply(&self, other: &Poly) -> PyResult<Poly> {
        Ok(Poly { inner: self.inner.multiply(&other.inner).map_err(err)? })
    }

    fn evaluate(&self, z: Vec<Complex64>) -> PyResult<Complex64> {
        self.inner.evaluate(&z).map_err(err)
    }

    fn is_torus_real(&self) -> bool {
        self.inner.is_torus_real()
    }

    /// `(nice, deficient_orthant)`: the support-based classification.
    fn is_nice(&self) -> PyResult<(bool, Option<String>)> {
        let rep = self.inner.is_nice().map_err(err)?;
        Ok((rep.nice, rep.deficient.map(|d| d.to_string())))
    }

    /// Independent nicety check via longitude additivity on orthant shifts.
    fn nicety_oracle(&self) -> PyResult<bool> {
        self.inner.nicety_oracle().map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }
}

/// A factorized moment matrix of a (possibly weighted) torus measure.
#[pyclass]
struct Factorization {
    moment: MomentMatrix,
    fact: gaussborel::Factorization,
}

fn build(dim: usize, max_longitude: u32, measure: DeformedMeasure) -> PyResult<Factorization> {
    let basis = Arc::new(LongilexBasis::new(dim, max_longitude));
    let oracle = measure
        .oracle(GridOracle::default_grid_size(max_longitude))
        .map_err(err)?;
    let moment = build_moment(oracle, basis).map_err(err)?;
    let fact = gaussborel::factorize(&moment).map_err(err)?;
    Ok(Factorization { moment, fact })
}

#[pymethods]
impl Factorization {
    /// Factorize the Haar measure.
    #[staticmethod]
    fn haar(dim: usize, max_longitude: u32) -> PyResult<Self> {
        build(dim, max_longitude, DeformedMeasure::new(Arc::new(HaarOracle::new(dim))))
    }

    /// Factorize `L dHaar` for a Laurent-polynomial weight.
    #[staticmethod]
    fn polynomial_weight(weight: &Poly, max_longitude: u32) -> PyResult<Self> {
        let dim = weight.inner.dim();
        build(
            dim,
            max_longitude,
            DeformedMeasure::new(Arc::new(HaarOracle::new(dim)))
                .with_step(weight.inner.clone(), 1),
        )
    }

    /// Factorize a weight given as a JSON specification relative to Haar.
    #[staticmethod]
    fn from_weight_spec(dim: usize, max_longitude: u32, spec: &str) -> PyResult<Self> {
        let v: serde_json::Value =
            serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        build(dim, max_longitude, weight_spec_from_json(dim, &v).map_err(err)?)
    }

    /// Quasi-tau block `H_[k]`.
    fn h(&self, k: usize) -> Vec<Vec<Complex64>> {
        matrix_to_py(self.fact.h(k))
    }

    /// First-subdiagonal block `beta_[k]`.
    fn beta(&self, k: usize) -> Vec<Vec<Complex64>> {
        matrix_to_py(&self.fact.beta(k))
    }

    /// `phi_[k](z)`.
    fn phi(&self, k: usize, z: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let v = opbasis::eval_family(&self.fact, Side::Phi, k, &z).map_err(err)?;
        Ok(v.iter().copied().collect())
    }

    /// `phihat_[k](z)`.
    fn phi_hat(&self, k: usize, z: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let v = opbasis::eval_family(&self.fact, Side::PhiHat, k, &z).map_err(err)?;
        Ok(v.iter().copied().collect())
    }

    /// Christoffel-Darboux kernel `K^{(level)}(z1, z2)`.
    fn cd_kernel(&self, level: usize, z1: Vec<Complex64>, z2: Vec<Complex64>) -> PyResult<Complex64> {
        opbasis::cd_kernel_eval(&self.fact, level, &z1, &z2).map_err(err)
    }

    fn abc_residual(&self, level: usize, z1: Vec<Complex64>, z2: Vec<Complex64>) -> PyResult<f64> {
        opbasis::abc_check(&self.fact, &self.moment, level, &z1, &z2).map_err(err)
    }

    fn biorthogonality_residual(&self) -> f64 {
        opbasis::biorthogonality_residual(&self.fact, &self.moment)
    }

    fn reconstruction_residual(&self) -> f64 {
        self.fact.reconstruction_residual(self.moment.data())
    }

    /// Sample a poised node set on `Z(L)` and evaluate the Christoffel
    /// transform `T phi_[k](z)`.
    fn christoffel(
        &self,
        weight: &Poly,
        k: usize,
        seed: u64,
        z: Vec<Complex64>,
    ) -> PyResult<Vec<Complex64>> {
        let nodes = darboux::sample_nodes(&weight.inner, &self.fact, k, seed).map_err(err)?;
        let v = darboux::christoffel_transform(&self.fact, &weight.inner, &nodes, k, &z)
            .map_err(err)?;
        Ok(v.iter().copied().collect())
    }
}

/// Run the full acceptance suite; returns `(id, name, passed, max_residual)`
/// per criterion.
#[pyfunction]
fn run_acceptance() -> PyResult<Vec<(usize, String, bool, f64)>> {
    let reports = verify::run_all().map_err(err)?;
    Ok(reports
        .into_iter()
        .map(|r| (r.id, r.name, r.passed, r.max_residual))
        .collect())
}

#[pymodule]
fn torus_olp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(shell_size, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_shell, m)?)?;
    m.add_function(wrap_pyfunction!(run_acceptance, m)?)?;
    m.add_class::<Basis>()?;
    m.add_class::<Poly>()?;
    m.add_class::<Factorization>()?;
    Ok(())
}
