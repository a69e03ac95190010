//! Moment matrices in longilex block form, truncations and bordered
//! truncations, and the structural symmetry checks that a correctly
//! assembled moment matrix must satisfy.

use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::laurent::LaurentPolynomial;
use crate::longilex::LongilexBasis;
use crate::measure::OracleHandle;
use crate::spectral;

/// Dense complex matrix partitioned by the shells of a longilex basis.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    basis: Arc<LongilexBasis>,
    data: DMatrix<Complex64>,
}

impl BlockMatrix {
    pub fn new(basis: Arc<LongilexBasis>, data: DMatrix<Complex64>) -> Self {
        assert_eq!(data.nrows(), basis.len());
        assert_eq!(data.ncols(), basis.len());
        BlockMatrix { basis, data }
    }

    pub fn basis(&self) -> &Arc<LongilexBasis> {
        &self.basis
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<Complex64> {
        self.data
    }

    /// The `(k, l)` block of size `|[k]| x |[l]|`.
    pub fn block(&self, k: usize, l: usize) -> DMatrixView<'_, Complex64> {
        let b = &self.basis;
        self.data.view((b.offset(k), b.offset(l)), (b.shell_len(k), b.shell_len(l)))
    }

    /// Leading truncation over the first `l` shell blocks (the paper's
    /// square truncation of level `l`), of size `N_{l-1}`.
    pub fn leading_truncation(&self, l: usize) -> DMatrix<Complex64> {
        let n = self.basis.offset(l);
        self.data.view((0, 0), (n, n)).into_owned()
    }
}

/// A moment matrix `G` with entries `G_{alpha, alpha'} = c_{alpha' - alpha}`
/// taken from a Fourier oracle.
pub struct MomentMatrix {
    block: BlockMatrix,
    oracle: OracleHandle,
}

/// Assemble the moment matrix over every shell of `basis`.
pub fn build_moment(oracle: OracleHandle, basis: Arc<LongilexBasis>) -> Result<MomentMatrix> {
    if oracle.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: oracle.dim() });
    }
    let n = basis.len();
    let mut data = DMatrix::zeros(n, n);
    for (i, alpha) in basis.iter().enumerate() {
        for (j, alpha_p) in basis.iter().enumerate() {
            data[(i, j)] = oracle.coeff(&alpha_p.sub(alpha))?;
        }
    }
    Ok(MomentMatrix { block: BlockMatrix::new(basis, data), oracle })
}

impl MomentMatrix {
    pub fn basis(&self) -> &Arc<LongilexBasis> {
        self.block.basis()
    }

    pub fn oracle(&self) -> &OracleHandle {
        &self.oracle
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        self.block.data()
    }

    pub fn block(&self, k: usize, l: usize) -> DMatrixView<'_, Complex64> {
        self.block.block(k, l)
    }

    pub fn leading_truncation(&self, l: usize) -> DMatrix<Complex64> {
        self.block.leading_truncation(l)
    }

    /// Max deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.block.data();
        (g - g.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Max deviation from persymmetry `eta G eta = G^T`.
    pub fn persymmetry_defect(&self) -> f64 {
        let eta = spectral::eta(self.basis());
        let g = self.block.data();
        let lhs = eta.apply_both_sides(g);
        (lhs - g.transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Smallest/largest singular value per leading block minor, a
    /// quasi-definiteness diagnostic.
    pub fn leading_minor_report(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for l in 1..=self.basis().num_shells() {
            let t = self.leading_truncation(l);
            let sv = t.svd(false, false).singular_values;
            let largest = sv.iter().fold(0.0f64, |a, &b| a.max(b));
            let smallest = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            out.push((l, smallest, largest));
        }
        out
    }
}

/// Bordered row truncation `G^{[k]}_l`: block rows `0..k-2` plus block row
/// `l`, block columns `0..k-1`.
pub fn bordered_row_truncation(g: &MomentMatrix, k: usize, l: usize) -> Result<DMatrix<Complex64>> {
    let basis = g.basis();
    let max = basis.num_shells() - 1;
    if k < 1 || l < k || l > max {
        return Err(Error::ShellOutOfRange { index: l.max(k), max });
    }
    let ncols = basis.offset(k);
    let top = basis.offset(k - 1);
    let mut out = DMatrix::zeros(top + basis.shell_len(l), ncols);
    out.view_mut((0, 0), (top, ncols)).copy_from(&g.data().view((0, 0), (top, ncols)));
    out.view_mut((top, 0), (basis.shell_len(l), ncols))
        .copy_from(&g.data().view((basis.offset(l), 0), (basis.shell_len(l), ncols)));
    Ok(out)
}

/// Bordered column truncation `Ghat^{[k]}_l`: block columns `0..k-2` plus
/// block column `l`, block rows `0..k-1`.
pub fn bordered_col_truncation(g: &MomentMatrix, k: usize, l: usize) -> Result<DMatrix<Complex64>> {
    let basis = g.basis();
    let max = basis.num_shells() - 1;
    if k < 1 || l < k || l > max {
        return Err(Error::ShellOutOfRange { index: l.max(k), max });
    }
    let nrows = basis.offset(k);
    let left = basis.offset(k - 1);
    let mut out = DMatrix::zeros(nrows, left + basis.shell_len(l));
    out.view_mut((0, 0), (nrows, left)).copy_from(&g.data().view((0, 0), (nrows, left)));
    out.view_mut((0, left), (nrows, basis.shell_len(l)))
        .copy_from(&g.data().view((0, basis.offset(l)), (nrows, basis.shell_len(l))));
    Ok(out)
}

/// Interior residual of the string equation `L(Upsilon) G = G L(Upsilon)`.
///
/// The commutator is asserted only on the sub-block unaffected by the
/// truncation: shells of longitude at most `K - l(L)`.
pub fn check_string_equation(g: &MomentMatrix, weight: &LaurentPolynomial) -> Result<f64> {
    let basis = g.basis();
    let band = weight.longitude()? as usize;
    let shells = basis.num_shells();
    if band >= shells {
        return Err(Error::ShellOutOfRange { index: band, max: shells - 1 });
    }
    let lu = spectral::laurent_of_upsilon(basis, weight)?;
    let comm = &lu * g.data() - g.data() * &lu;
    let interior = basis.cumulative(shells - 1 - band);
    Ok(comm
        .view((0, 0), (interior, interior))
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max))
}
