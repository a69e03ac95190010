//! Spectral shift matrices, reversal matrices, Jacobi matrices, and the
//! orthant decomposition with its Cauchy-Mohammed kernels.
//!
//! `Upsilon_a` realizes multiplication by `z_a` on the monomial vector chi;
//! on a truncated basis its last shell rows are deficient, so orthogonality
//! and eigen-relations hold on interior shells only. `Upsilon_alpha` is
//! built directly from the shift-by-alpha rule rather than as a product of
//! truncated factors, which keeps the interior exact for mixed-sign alpha.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussborel::Factorization;
use crate::laurent::{LaurentPolynomial, OrthantLabel};
use crate::longilex::{LongilexBasis, MultiIndex};

/// A 0/1 matrix with at most one entry per row, representing a monomial
/// shift on the truncated basis.
#[derive(Debug, Clone)]
pub struct ShiftMatrix {
    basis: Arc<LongilexBasis>,
    /// `targets[i] = Some(j)` when row `i` has its 1 in column `j`.
    targets: Vec<Option<usize>>,
    shift: MultiIndex,
}

impl ShiftMatrix {
    fn from_shift(basis: &Arc<LongilexBasis>, shift: MultiIndex) -> Self {
        let targets = basis
            .iter()
            .map(|alpha| basis.global_index(&alpha.add(&shift)))
            .collect();
        ShiftMatrix { basis: basis.clone(), targets, shift }
    }

    pub fn shift(&self) -> &MultiIndex {
        &self.shift
    }

    pub fn basis(&self) -> &Arc<LongilexBasis> {
        &self.basis
    }

    /// Transpose, which on the untruncated pattern is also the inverse.
    pub fn transpose(&self) -> ShiftMatrix {
        ShiftMatrix::from_shift(&self.basis, self.shift.neg())
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.basis.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, t) in self.targets.iter().enumerate() {
            if let Some(j) = t {
                m[(i, *j)] = Complex64::new(1.0, 0.0);
            }
        }
        m
    }

    /// The `(k, l)` block as a dense matrix.
    pub fn block(&self, k: usize, l: usize) -> DMatrix<Complex64> {
        let b = &self.basis;
        let (ro, co) = (b.offset(k), b.offset(l));
        let (nr, nc) = (b.shell_len(k), b.shell_len(l));
        let mut m = DMatrix::zeros(nr, nc);
        for i in 0..nr {
            if let Some(j) = self.targets[ro + i] {
                if j >= co && j < co + nc {
                    m[(i, j - co)] = Complex64::new(1.0, 0.0);
                }
            }
        }
        m
    }

    /// Nonzero coordinates as `(row, col)` pairs, for fixture diffing.
    pub fn coordinates(&self) -> Vec<(usize, usize)> {
        self.targets
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|j| (i, j)))
            .collect()
    }
}

/// The basic spectral matrix `Upsilon_a` (1-based axis `a`).
pub fn build_upsilon(basis: &Arc<LongilexBasis>, a: usize) -> ShiftMatrix {
    assert!(a >= 1 && a <= basis.dim());
    ShiftMatrix::from_shift(basis, MultiIndex::unit(basis.dim(), a))
}

/// `Upsilon_alpha`, the shift by a general multi-index.
pub fn upsilon_power(basis: &Arc<LongilexBasis>, alpha: &MultiIndex) -> ShiftMatrix {
    ShiftMatrix::from_shift(basis, alpha.clone())
}

/// `L(Upsilon) = sum_alpha L_alpha Upsilon_alpha`; entrywise this is
/// `L_{beta' - beta}`, so row beta lists the coefficients of `z^beta L`
/// in longilex order.
pub fn laurent_of_upsilon(
    basis: &Arc<LongilexBasis>,
    weight: &LaurentPolynomial,
) -> Result<DMatrix<Complex64>> {
    if weight.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: weight.dim() });
    }
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, beta) in basis.iter().enumerate() {
        for (j, beta_p) in basis.iter().enumerate() {
            let c = weight.coeff(&beta_p.sub(beta));
            if c != Complex64::ZERO {
                m[(i, j)] = c;
            }
        }
    }
    Ok(m)
}

/// A permutation matrix acting within shells (reversal and partial
/// reversals).
#[derive(Debug, Clone)]
pub struct PermutationMatrix {
    perm: Vec<usize>,
}

impl PermutationMatrix {
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.perm.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &j) in self.perm.iter().enumerate() {
            m[(i, j)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn coordinates(&self) -> Vec<(usize, usize)> {
        self.perm.iter().copied().enumerate().collect()
    }

    /// `P M` (these permutations are involutions, so `P = P^{-1} = P^T`).
    pub fn apply_left(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (i, &p) in self.perm.iter().enumerate() {
            out.row_mut(i).copy_from(&m.row(p));
        }
        out
    }

    /// `M P`.
    pub fn apply_right(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, &p) in self.perm.iter().enumerate() {
            out.column_mut(j).copy_from(&m.column(p));
        }
        out
    }

    /// `P M P`.
    pub fn apply_both_sides(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.apply_right(&self.apply_left(m))
    }

    pub fn apply_vec(&self, v: &nalgebra::DVector<Complex64>) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_fn(v.len(), |i, _| v[self.perm[i]])
    }
}

/// Full reversal `eta`: block diagonal of exchange matrices, `eta chi(z) = chi(z^{-1})`.
pub fn eta(basis: &Arc<LongilexBasis>) -> PermutationMatrix {
    let perm = basis
        .iter()
        .map(|alpha| basis.global_index(&alpha.neg()).expect("shells are closed under negation"))
        .collect();
    PermutationMatrix { perm }
}

/// Partial reversal `eta_a`: `(eta_a)_{alpha, alpha'} = delta_{alpha, I_a alpha'}`.
pub fn eta_partial(basis: &Arc<LongilexBasis>, a: usize) -> PermutationMatrix {
    assert!(a >= 1 && a <= basis.dim());
    let perm = basis
        .iter()
        .map(|alpha| {
            let mut flipped = alpha.clone();
            flipped.0[a - 1] = -flipped.0[a - 1];
            basis.global_index(&flipped).expect("shells are closed under sign flips")
        })
        .collect();
    PermutationMatrix { perm }
}

/// `eta_sigma = prod_{a in sigma} eta_a`.
pub fn eta_sigma(basis: &Arc<LongilexBasis>, sigma: &OrthantLabel) -> PermutationMatrix {
    let perm = basis
        .iter()
        .map(|alpha| {
            let mut flipped = alpha.clone();
            for &a in sigma.indices() {
                flipped.0[a - 1] = -flipped.0[a - 1];
            }
            basis.global_index(&flipped).expect("shells are closed under sign flips")
        })
        .collect();
    PermutationMatrix { perm }
}

/// The basic spectral and reversal matrices for a basis.
pub struct SpectralSet {
    basis: Arc<LongilexBasis>,
    upsilons: Vec<ShiftMatrix>,
    eta: PermutationMatrix,
    etas: Vec<PermutationMatrix>,
}

impl SpectralSet {
    pub fn new(basis: Arc<LongilexBasis>) -> Self {
        let upsilons = (1..=basis.dim()).map(|a| build_upsilon(&basis, a)).collect();
        let etas = (1..=basis.dim()).map(|a| eta_partial(&basis, a)).collect();
        let eta = eta(&basis);
        SpectralSet { basis, upsilons, eta, etas }
    }

    pub fn basis(&self) -> &Arc<LongilexBasis> {
        &self.basis
    }

    /// `Upsilon_a`, 1-based.
    pub fn upsilon(&self, a: usize) -> &ShiftMatrix {
        &self.upsilons[a - 1]
    }

    pub fn eta(&self) -> &PermutationMatrix {
        &self.eta
    }

    /// `eta_a`, 1-based.
    pub fn eta_partial(&self, a: usize) -> &PermutationMatrix {
        &self.etas[a - 1]
    }
}

/// `J_alpha = S Upsilon_alpha S^{-1}`.
pub fn build_jacobi(fact: &Factorization, alpha: &MultiIndex) -> DMatrix<Complex64> {
    let u = upsilon_power(fact.basis(), alpha).to_dense();
    fact.s() * u * fact.s_inv()
}

/// `Jhat_alpha = Shat Upsilon_alpha Shat^{-1}`.
pub fn build_jacobi_hat(fact: &Factorization, alpha: &MultiIndex) -> DMatrix<Complex64> {
    let u = upsilon_power(fact.basis(), alpha).to_dense();
    fact.s_hat() * u * fact.s_hat_inv()
}

/// Reversal Jacobi matrix `C_alpha = conj(Shat) eta Upsilon_alpha S^{-1}`.
pub fn build_c_matrix(fact: &Factorization, alpha: &MultiIndex) -> DMatrix<Complex64> {
    let e = eta(fact.basis());
    let u = upsilon_power(fact.basis(), alpha).to_dense();
    fact.s_hat().conjugate() * e.apply_left(&u) * fact.s_inv()
}

fn cyclic_successor(i: usize, dim: usize) -> usize {
    i % dim + 1
}

/// Right boundary `∂sigma = {i in sigma : i+1 not in sigma}` (cyclic).
fn right_boundary(sigma: &OrthantLabel) -> Vec<usize> {
    sigma
        .indices()
        .iter()
        .copied()
        .filter(|&i| !sigma.contains(cyclic_successor(i, sigma.dim())))
        .collect()
}

/// Strict integer-orthant membership per the four index classes.
pub fn in_integer_orthant(alpha: &MultiIndex, sigma: &OrthantLabel) -> bool {
    let dim = sigma.dim();
    if sigma.is_full() {
        return alpha.0.iter().all(|&a| a <= 0) && alpha.0.iter().any(|&a| a != 0);
    }
    let comp = sigma.complement();
    let ds = right_boundary(sigma);
    let dcomp = right_boundary(&comp);
    for i in 1..=dim {
        let a = alpha.0[i - 1];
        let ok = if ds.contains(&i) {
            a < 0
        } else if sigma.contains(i) {
            a <= 0
        } else if dcomp.contains(&i) {
            a > 0
        } else {
            a >= 0
        };
        if !ok {
            return false;
        }
    }
    true
}

/// The unique orthant containing `alpha`, by the constructive classification:
/// a zero entry joins sigma exactly when the next nonzero entry to its cyclic
/// right is negative.
pub fn orthant_of(alpha: &MultiIndex) -> OrthantLabel {
    let dim = alpha.dim();
    if alpha.0.iter().all(|&a| a == 0) {
        return OrthantLabel::new(dim, vec![]);
    }
    let mut sigma = Vec::new();
    for i in 1..=dim {
        let a = alpha.0[i - 1];
        if a < 0 {
            sigma.push(i);
        } else if a == 0 {
            let mut j = cyclic_successor(i, dim);
            while alpha.0[j - 1] == 0 {
                j = cyclic_successor(j, dim);
            }
            if alpha.0[j - 1] < 0 {
                sigma.push(i);
            }
        }
    }
    OrthantLabel::new(dim, sigma)
}

/// Partition of the basis multi-indices by orthant.
pub fn orthant_split(basis: &LongilexBasis) -> Vec<(OrthantLabel, Vec<usize>)> {
    let mut out: Vec<(OrthantLabel, Vec<usize>)> = OrthantLabel::all(basis.dim())
        .into_iter()
        .map(|l| (l, Vec::new()))
        .collect();
    for (i, alpha) in basis.iter().enumerate() {
        let label = orthant_of(alpha);
        let slot = out.iter_mut().find(|(l, _)| *l == label).unwrap();
        slot.1.push(i);
    }
    out
}

/// Closed form of the Cauchy-Mohammed kernel
/// `C_sigma(z, zeta) = sum_{alpha in (Z^D)_sigma} zeta^{-alpha} z^alpha`
/// for `zeta` on the torus and `z` in the orthant polydisk.
pub fn cauchy_mohammed(
    sigma: &OrthantLabel,
    z: &[Complex64],
    zeta: &[Complex64],
) -> Result<Complex64> {
    let dim = sigma.dim();
    if z.len() != dim || zeta.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: z.len().max(zeta.len()) });
    }
    for (i, c) in zeta.iter().enumerate() {
        if (c.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("zeta[{i}] is not on the unit torus")));
        }
    }
    for i in 1..=dim {
        let r = z[i - 1].norm();
        let inside = sigma.contains(i);
        if (inside && r <= 1.0) || (!inside && r >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "z[{}] violates the orthant polydisk membership for sigma={sigma}",
                i - 1
            )));
        }
    }
    if sigma.is_full() {
        let mut prod = Complex64::new(1.0, 0.0);
        for i in 0..dim {
            prod *= z[i] / (z[i] - zeta[i]);
        }
        return Ok(prod - Complex64::new(1.0, 0.0));
    }
    let comp = sigma.complement();
    let ds = right_boundary(sigma);
    let dcomp = right_boundary(&comp);
    let mut prod = Complex64::new(1.0, 0.0);
    for i in 1..=dim {
        let (zi, wi) = (z[i - 1], zeta[i - 1]);
        prod *= if ds.contains(&i) {
            wi / (zi - wi)
        } else if sigma.contains(i) {
            zi / (zi - wi)
        } else if dcomp.contains(&i) {
            zi / (wi - zi)
        } else {
            wi / (wi - zi)
        };
    }
    Ok(prod)
}

/// Truncated orthant series `sum_{|alpha| <= bound, alpha in (Z^D)_sigma}
/// zeta^{-alpha} z^alpha`, the definition-side partial sum the closed form
/// is checked against.
pub fn cauchy_mohammed_partial_sum(
    sigma: &OrthantLabel,
    z: &[Complex64],
    zeta: &[Complex64],
    bound: u32,
) -> Result<Complex64> {
    let dim = sigma.dim();
    let mut acc = Complex64::ZERO;
    for k in 0..=bound {
        for alpha in crate::longilex::enumerate_shell(dim, k) {
            if in_integer_orthant(&alpha, sigma) {
                acc += alpha.eval(z)? * alpha.neg().eval(zeta)?;
            }
        }
    }
    Ok(acc)
}
