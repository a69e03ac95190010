//! Block Gauss-Borel factorization `G = S^{-1} H (Shat^{-1})^dagger` and the
//! last-quasi-determinant formulas for its ingredients.
//!
//! The factorization proceeds by the blockwise Schur-complement recursion:
//! no pivoting across blocks, since reordering would destroy the
//! orthogonality interpretation of the factors. A numerically singular pivot
//! block signals a non-quasi-definite measure and is reported as an error.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::longilex::LongilexBasis;
use crate::moments::MomentMatrix;

/// Relative singular-value threshold below which a pivot block is treated
/// as singular.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-10;

/// The triple `(S, H, Shat)` with `G = S^{-1} H (Shat^{-1})^dagger`,
/// `S, Shat` block lower unitriangular and `H` block diagonal.
pub struct Factorization {
    basis: Arc<LongilexBasis>,
    s: DMatrix<Complex64>,
    s_inv: DMatrix<Complex64>,
    s_hat: DMatrix<Complex64>,
    s_hat_inv: DMatrix<Complex64>,
    h_blocks: Vec<DMatrix<Complex64>>,
}

/// Factorize a moment matrix with the default pivot tolerance.
pub fn factorize(g: &MomentMatrix) -> Result<Factorization> {
    factorize_dense(g.basis().clone(), g.data(), DEFAULT_PIVOT_TOL)
}

/// Schur-complement recursion on a dense shell-partitioned matrix.
pub fn factorize_dense(
    basis: Arc<LongilexBasis>,
    g: &DMatrix<Complex64>,
    pivot_tol: f64,
) -> Result<Factorization> {
    let n = basis.len();
    assert_eq!(g.nrows(), n);
    assert_eq!(g.ncols(), n);
    let shells = basis.num_shells();
    let mut a = g.clone();
    let mut s_inv = DMatrix::<Complex64>::identity(n, n);
    let mut s_hat_inv = DMatrix::<Complex64>::identity(n, n);
    let mut h_blocks = Vec::with_capacity(shells);

    for k in 0..shells {
        let o = basis.offset(k);
        let w = basis.shell_len(k);
        let hk = a.view((o, o), (w, w)).into_owned();

        let sv = hk.clone().svd(false, false).singular_values;
        let largest = sv.iter().fold(0.0f64, |m, &v| m.max(v));
        let smallest = sv.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if !(smallest > pivot_tol * largest) || largest == 0.0 {
            return Err(Error::SingularBlock(k));
        }

        let rest = n - (o + w);
        if rest > 0 {
            let lu = hk.clone().lu();
            let below = a.view((o + w, o), (rest, w)).into_owned();
            let right = a.view((o, o + w), (w, rest)).into_owned();
            // Lf = below * Hk^{-1}  via  Hk^T Lf^T = below^T
            let lf = lu
                .solve(&right)
                .map(|uf| (below.clone(), uf))
                .ok_or(Error::SingularBlock(k))?;
            let (below, uf) = lf;
            let lf = hk
                .transpose()
                .lu()
                .solve(&below.transpose())
                .ok_or(Error::SingularBlock(k))?
                .transpose();

            let update = &lf * &right;
            let mut trail = a.view_mut((o + w, o + w), (rest, rest));
            trail -= update;

            s_inv.view_mut((o + w, o), (rest, w)).copy_from(&lf);
            s_hat_inv.view_mut((o + w, o), (rest, w)).copy_from(&uf.adjoint());
            a.view_mut((o + w, o), (rest, w)).fill(Complex64::ZERO);
            a.view_mut((o, o + w), (w, rest)).fill(Complex64::ZERO);
        }
        h_blocks.push(hk);
    }

    let s = invert_unit_lower(&s_inv);
    let s_hat = invert_unit_lower(&s_hat_inv);
    Ok(Factorization { basis, s, s_inv, s_hat, s_hat_inv, h_blocks })
}

/// Inverse of a unit lower triangular matrix by forward substitution.
fn invert_unit_lower(l: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = l.nrows();
    let mut x = DMatrix::<Complex64>::identity(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let mut acc = Complex64::ZERO;
            for k in j..i {
                acc += l[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = -acc;
        }
    }
    x
}

impl Factorization {
    pub fn basis(&self) -> &Arc<LongilexBasis> {
        &self.basis
    }

    pub fn num_shells(&self) -> usize {
        self.h_blocks.len()
    }

    pub fn s(&self) -> &DMatrix<Complex64> {
        &self.s
    }

    pub fn s_inv(&self) -> &DMatrix<Complex64> {
        &self.s_inv
    }

    pub fn s_hat(&self) -> &DMatrix<Complex64> {
        &self.s_hat
    }

    pub fn s_hat_inv(&self) -> &DMatrix<Complex64> {
        &self.s_hat_inv
    }

    /// Quasi-tau block `H_{[k]}`.
    pub fn h(&self, k: usize) -> &DMatrix<Complex64> {
        &self.h_blocks[k]
    }

    pub fn h_inv(&self, k: usize) -> DMatrix<Complex64> {
        self.h_blocks[k]
            .clone()
            .lu()
            .try_inverse()
            .expect("pivot blocks were checked during factorization")
    }

    /// First-subdiagonal block `beta_{[k]} = S_{[k],[k-1]}`, `k >= 1`.
    pub fn beta(&self, k: usize) -> DMatrix<Complex64> {
        let b = &self.basis;
        self.s
            .view((b.offset(k), b.offset(k - 1)), (b.shell_len(k), b.shell_len(k - 1)))
            .into_owned()
    }

    /// `betahat_{[k]} = Shat_{[k],[k-1]}`.
    pub fn beta_hat(&self, k: usize) -> DMatrix<Complex64> {
        let b = &self.basis;
        self.s_hat
            .view((b.offset(k), b.offset(k - 1)), (b.shell_len(k), b.shell_len(k - 1)))
            .into_owned()
    }

    pub fn s_block(&self, k: usize, l: usize) -> DMatrix<Complex64> {
        let b = &self.basis;
        self.s
            .view((b.offset(k), b.offset(l)), (b.shell_len(k), b.shell_len(l)))
            .into_owned()
    }

    /// Dense block-diagonal `H`.
    pub fn h_dense(&self) -> DMatrix<Complex64> {
        let n = self.basis.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, blk) in self.h_blocks.iter().enumerate() {
            let o = self.basis.offset(k);
            m.view_mut((o, o), (blk.nrows(), blk.ncols())).copy_from(blk);
        }
        m
    }

    /// `S^{-1} H (Shat^{-1})^dagger`, for reconstruction checks.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        &self.s_inv * self.h_dense() * self.s_hat_inv.adjoint()
    }

    pub fn det_h(&self, k: usize) -> Complex64 {
        self.h_blocks[k].clone().lu().determinant()
    }

    /// Max-norm reconstruction residual against the input matrix.
    pub fn reconstruction_residual(&self, g: &DMatrix<Complex64>) -> f64 {
        let r = self.reconstruct() - g;
        let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        r.iter().map(|c| c.norm()).fold(0.0, f64::max) / scale
    }

    /// `max |S - Shat|`; zero for Hermitian input.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.s - &self.s_hat).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Last quasi-determinant `Theta_* = D - C A^{-1} B` of a matrix partitioned
/// so that the final block spans `last_rows x last_cols`.
pub fn last_quasi_determinant(
    m: &DMatrix<Complex64>,
    last_rows: usize,
    last_cols: usize,
) -> Result<DMatrix<Complex64>> {
    let (nr, nc) = (m.nrows(), m.ncols());
    assert!(last_rows <= nr && last_cols <= nc);
    let (ra, ca) = (nr - last_rows, nc - last_cols);
    assert_eq!(ra, ca, "the leading block A must be square");
    let a = m.view((0, 0), (ra, ca)).into_owned();
    let b = m.view((0, ca), (ra, last_cols)).into_owned();
    let c = m.view((ra, 0), (last_rows, ca)).into_owned();
    let d = m.view((ra, ca), (last_rows, last_cols)).into_owned();
    if ra == 0 {
        return Ok(d);
    }
    let x = a.lu().solve(&b).ok_or(Error::SingularBlock(0))?;
    Ok(d - c * x)
}

/// `H_{[k]} = Theta_*(G^{[k+1]})`.
pub fn quasi_tau_via_qd(g: &MomentMatrix, k: usize) -> Result<DMatrix<Complex64>> {
    let w = g.basis().shell_len(k);
    let t = g.leading_truncation(k + 1);
    last_quasi_determinant(&t, w, w)
}

/// `beta_{[k]}` and `betahat_{[k]}` through the bordered-truncation
/// quasi-determinants, `k >= 1`.
pub fn subdiag_via_qd(g: &MomentMatrix, k: usize) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let basis = g.basis();
    let wk = basis.shell_len(k);
    let wkm = basis.shell_len(k - 1);

    let theta_g = last_quasi_determinant(&g.leading_truncation(k), wkm, wkm)?;
    let theta_g_lu = theta_g.clone().lu();

    let row_bordered = crate::moments::bordered_row_truncation(g, k, k)?;
    let theta_row = last_quasi_determinant(&row_bordered, wk, wkm)?;
    // beta = -Theta_*(G^{[k]}_k) Theta_*(G^{[k]})^{-1} via X Theta = B
    let beta = -theta_g
        .transpose()
        .lu()
        .solve(&theta_row.transpose())
        .ok_or(Error::SingularBlock(k - 1))?
        .transpose();

    let col_bordered = crate::moments::bordered_col_truncation(g, k, k)?;
    let theta_col = last_quasi_determinant(&col_bordered, wkm, wk)?;
    let beta_hat = -(theta_g_lu.solve(&theta_col).ok_or(Error::SingularBlock(k - 1))?).adjoint();

    Ok((beta, beta_hat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::paper_example_weight;
    use crate::measure::{polynomial_weight_oracle, HaarOracle, OracleHandle};
    use crate::moments::build_moment;
    use crate::spectral;

    fn example_moment(max_k: u32) -> MomentMatrix {
        let basis = Arc::new(LongilexBasis::new(2, max_k));
        let oracle =
            polynomial_weight_oracle(Arc::new(HaarOracle::new(2)), &paper_example_weight())
                .unwrap();
        build_moment(oracle, basis).unwrap()
    }

    #[test]
    fn haar_factorizes_trivially() {
        let basis = Arc::new(LongilexBasis::new(2, 3));
        let g = build_moment(Arc::new(HaarOracle::new(2)), basis.clone()).unwrap();
        let f = factorize(&g).unwrap();
        let eye = DMatrix::<Complex64>::identity(basis.len(), basis.len());
        assert_eq!(f.s(), &eye);
        assert_eq!(f.s_hat(), &eye);
        for k in 0..f.num_shells() {
            let w = basis.shell_len(k);
            assert_eq!(f.h(k), &DMatrix::<Complex64>::identity(w, w));
        }
    }

    #[test]
    fn example_weight_factorization() {
        let g = example_moment(3);
        let f = factorize(&g).unwrap();
        assert_eq!(f.h(0)[(0, 0)], Complex64::new(5.0, 0.0));
        // beta_[1] = -(1,1,1,1)^T / 5
        let beta1 = f.beta(1);
        for c in beta1.iter() {
            assert!((c - Complex64::new(-0.2, 0.0)).norm() < 1e-13);
        }
        assert!(f.reconstruction_residual(g.data()) < 1e-13);
        assert!(f.hermitian_defect() < 1e-13);
        for k in 0..f.num_shells() {
            let h = f.h(k);
            assert!((h - h.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-13);
        }
    }

    #[test]
    fn determinant_product_identity() {
        let g = example_moment(4);
        let f = factorize(&g).unwrap();
        for l in 1..=5usize {
            let det_g = g.leading_truncation(l).lu().determinant();
            let mut prod = Complex64::new(1.0, 0.0);
            for k in 0..l {
                prod *= f.det_h(k);
            }
            assert!(
                (det_g - prod).norm() <= 1e-10 * prod.norm(),
                "level {l}: {det_g} vs {prod}"
            );
        }
    }

    #[test]
    fn persymmetry_transfer() {
        let g = example_moment(3);
        let f = factorize(&g).unwrap();
        let eta = spectral::eta(g.basis());
        // conj(Shat) = eta S eta
        let lhs = f.s_hat().conjugate();
        let rhs = eta.apply_both_sides(f.s());
        assert!((lhs - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-12);
        // eta H eta = H^T
        let h = f.h_dense();
        let lhs = eta.apply_both_sides(&h);
        assert!((lhs - h.transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn scalar_quasi_determinant() {
        let m = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(4.0, 0.0),
            Complex64::new(5.0, 0.0),
        ]);
        let t = last_quasi_determinant(&m, 1, 1).unwrap();
        // d - c b / a = 5 - 4*3/2
        assert!((t[(0, 0)] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn quasi_determinant_paths_match_recursion() {
        let g = example_moment(4);
        let f = factorize(&g).unwrap();
        // Theta_*(G^{[1]}) = H_[0] = 5
        let h0 = quasi_tau_via_qd(&g, 0).unwrap();
        assert!((h0[(0, 0)] - Complex64::new(5.0, 0.0)).norm() < 1e-13);
        for k in 1..g.basis().num_shells() {
            let hk = quasi_tau_via_qd(&g, k).unwrap();
            let d = (&hk - f.h(k)).iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(d < 1e-11, "H[{k}] differs by {d}");
            let (beta, beta_hat) = subdiag_via_qd(&g, k).unwrap();
            let db = (&beta - f.beta(k)).iter().map(|c| c.norm()).fold(0.0, f64::max);
            let dbh = (&beta_hat - f.beta_hat(k)).iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(db < 1e-11 && dbh < 1e-11, "beta[{k}] differs by {db}/{dbh}");
        }
    }

    #[test]
    fn haar_beta_vanishes() {
        let basis = Arc::new(LongilexBasis::new(2, 3));
        let g = build_moment(Arc::new(HaarOracle::new(2)), basis).unwrap();
        let f = factorize(&g).unwrap();
        for k in 1..f.num_shells() {
            assert!(f.beta(k).iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn singular_block_detected() {
        // weight vanishing identically on one axis direction collapses the
        // moment matrix; factorization must refuse rather than pivot
        let basis = Arc::new(LongilexBasis::new(1, 2));
        let zero_like: OracleHandle = Arc::new(HaarOracle::new(1));
        let mut data = build_moment(zero_like, basis.clone()).unwrap().data().clone();
        data[(0, 0)] = Complex64::ZERO;
        let err = factorize_dense(basis, &data, DEFAULT_PIVOT_TOL);
        assert!(matches!(err, Err(Error::SingularBlock(0))));
    }
}
