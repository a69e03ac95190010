//! Evaluation of the biorthogonal families and the identity checks built on
//! them: biorthogonality, second-kind functions, Christoffel-Darboux kernels
//! with the ABC and reproducing properties, three-term relations, and the
//! reversal symmetry.
//!
//! All inner products run algebraically through the moment matrix; fresh
//! quadrature appears only where quadrature consistency is the point of the
//! check (the reproducing property).

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussborel::Factorization;
use crate::laurent::LaurentPolynomial;
use crate::measure::OracleHandle;
use crate::moments::MomentMatrix;
use crate::spectral;
use crate::toda::slashed_matrix;

/// Which of the two biorthogonal families to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Phi,
    PhiHat,
}

/// `phi_{[k]}(z)` (or the hatted family): shell `k` rows of `S chi(z)`.
pub fn eval_family(
    fact: &Factorization,
    side: Side,
    k: usize,
    z: &[Complex64],
) -> Result<DVector<Complex64>> {
    let basis = fact.basis();
    if k >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 1 });
    }
    let chi = basis.chi(z)?;
    let coeff = match side {
        Side::Phi => fact.s(),
        Side::PhiHat => fact.s_hat(),
    };
    let rows = coeff.view((basis.offset(k), 0), (basis.shell_len(k), basis.len()));
    Ok(&rows * chi)
}

/// The full stacked family `S chi(z)`.
pub fn eval_all(fact: &Factorization, side: Side, z: &[Complex64]) -> Result<DVector<Complex64>> {
    let chi = fact.basis().chi(z)?;
    Ok(match side {
        Side::Phi => fact.s() * chi,
        Side::PhiHat => fact.s_hat() * chi,
    })
}

/// Max blockwise residual of `S G Shat^dagger = H`.
pub fn biorthogonality_residual(fact: &Factorization, g: &MomentMatrix) -> f64 {
    let basis = fact.basis();
    let m = fact.s() * g.data() * fact.s_hat().adjoint();
    let mut worst = 0.0f64;
    for k in 0..basis.num_shells() {
        for l in 0..basis.num_shells() {
            let blk = m.view(
                (basis.offset(k), basis.offset(l)),
                (basis.shell_len(k), basis.shell_len(l)),
            );
            let res = if k == l {
                (blk - fact.h(k)).iter().map(|c| c.norm()).fold(0.0, f64::max)
            } else {
                blk.iter().map(|c| c.norm()).fold(0.0, f64::max)
            };
            worst = worst.max(res);
        }
    }
    worst
}

/// Residual of the second-kind identity `Chat_{[k]}(z) = H_{[k]}^{-1}
/// phi_{[k]}(z) w(z)` for a Laurent-polynomial weight `w` (banded series).
///
/// The series side is the finite sum `(H^{-1} S G chi)_{[k]}`, exact on rows
/// with `k + l(w) <= K`.
pub fn second_kind_check(
    fact: &Factorization,
    g: &MomentMatrix,
    weight: &LaurentPolynomial,
    k: usize,
    z: &[Complex64],
) -> Result<f64> {
    let basis = fact.basis();
    let band = weight.longitude()? as usize;
    if k + band >= basis.num_shells() {
        return Err(Error::NonBandedOracle);
    }
    let chi = basis.chi(z)?;
    let series = fact.s() * g.data() * chi;
    let series_k = series.rows(basis.offset(k), basis.shell_len(k)).into_owned();
    let series_k = fact
        .h(k)
        .clone()
        .lu()
        .solve(&series_k)
        .ok_or(Error::SingularBlock(k))?;
    let phi_k = eval_family(fact, Side::Phi, k, z)?;
    let rhs = fact
        .h(k)
        .clone()
        .lu()
        .solve(&phi_k)
        .ok_or(Error::SingularBlock(k))?
        * weight.evaluate(z)?;
    Ok((series_k - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// `K^{(level)}(z1, z2) = sum_{l < level} phihat_{[l]}(z1)^dagger H_{[l]}^{-1}
/// phi_{[l]}(z2)`.
pub fn cd_kernel_eval(
    fact: &Factorization,
    level: usize,
    z1: &[Complex64],
    z2: &[Complex64],
) -> Result<Complex64> {
    let basis = fact.basis();
    if level > basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: level, max: basis.num_shells() });
    }
    let mut acc = Complex64::ZERO;
    for l in 0..level {
        let p1 = eval_family(fact, Side::PhiHat, l, z1)?;
        let p2 = eval_family(fact, Side::Phi, l, z2)?;
        let x = fact
            .h(l)
            .clone()
            .lu()
            .solve(&p2)
            .ok_or(Error::SingularBlock(l))?;
        acc += (p1.adjoint() * x)[(0, 0)];
    }
    Ok(acc)
}

/// Residual of the ABC identity `K^{(level)}(z1,z2) = chi^{[level]}(z1)^dagger
/// (G^{[level]})^{-1} chi^{[level]}(z2)`.
pub fn abc_check(
    fact: &Factorization,
    g: &MomentMatrix,
    level: usize,
    z1: &[Complex64],
    z2: &[Complex64],
) -> Result<f64> {
    let basis = fact.basis();
    let n = basis.offset(level);
    let chi1 = basis.chi(z1)?.rows(0, n).into_owned();
    let chi2 = basis.chi(z2)?.rows(0, n).into_owned();
    let t = g.leading_truncation(level);
    let x = t.lu().solve(&chi2).ok_or(Error::SingularBlock(level))?;
    let abc = (chi1.adjoint() * x)[(0, 0)];
    let k = cd_kernel_eval(fact, level, z1, z2)?;
    Ok((abc - k).norm())
}

/// Residual of the self-reproduction
/// `K(z1,z2) = int K(z1, e^{i t}) K(e^{i t}, z2) d mu(t)` on the quadrature grid.
pub fn reproducing_check(
    fact: &Factorization,
    oracle: &OracleHandle,
    grid_size: usize,
    level: usize,
    z1: &[Complex64],
    z2: &[Complex64],
) -> Result<f64> {
    let weight = oracle.weight_fn().ok_or(Error::NoPointwiseWeight)?;
    let dim = fact.basis().dim();
    let m = grid_size;
    let step = 2.0 * std::f64::consts::PI / m as f64;
    let mut idx = vec![0usize; dim];
    let mut theta = vec![0.0f64; dim];
    let mut zt = vec![Complex64::ZERO; dim];
    let mut acc = Complex64::ZERO;
    loop {
        for d in 0..dim {
            theta[d] = step * idx[d] as f64;
            zt[d] = Complex64::new(0.0, theta[d]).exp();
        }
        let k1 = cd_kernel_eval(fact, level, z1, &zt)?;
        let k2 = cd_kernel_eval(fact, level, &zt, z2)?;
        acc += weight(&theta) * k1 * k2;
        let mut d = dim;
        loop {
            if d == 0 {
                let integral = acc / m.pow(dim as u32) as f64;
                let direct = cd_kernel_eval(fact, level, z1, z2)?;
                return Ok((integral - direct).norm());
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

/// `L_n(z)` for a coefficient vector `n = (n_{-1},...,n_{-D},n_D,...,n_1)`.
pub fn degree_one_value(n: &[Complex64], z: &[Complex64]) -> Complex64 {
    let d = z.len();
    let mut acc = Complex64::ZERO;
    for a in 0..d {
        acc += n[a] / z[a] + n[2 * d - 1 - a] * z[a];
    }
    acc
}

/// Residual of the three-term relation at shell `k`:
/// `L_n(z) phi_{[k]} = H_{[k]} slash_{[k],[k-1]} H_{[k-1]}^{-1} phi_{[k-1]}
///  + (beta_{[k]} slash_{[k-1],[k]} - slash_{[k],[k+1]} beta_{[k+1]}) phi_{[k]}
///  + slash_{[k],[k+1]} phi_{[k+1]}`.
pub fn three_term_residual(
    fact: &Factorization,
    n: &[Complex64],
    k: usize,
    z: &[Complex64],
) -> Result<f64> {
    let basis = fact.basis();
    if k == 0 || k + 1 >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 2 });
    }
    let sl = slashed_matrix(basis, n)?;
    let blk = |r: usize, c: usize| {
        sl.view((basis.offset(r), basis.offset(c)), (basis.shell_len(r), basis.shell_len(c)))
            .into_owned()
    };
    let phi_km = eval_family(fact, Side::Phi, k - 1, z)?;
    let phi_k = eval_family(fact, Side::Phi, k, z)?;
    let phi_kp = eval_family(fact, Side::Phi, k + 1, z)?;

    let down = fact.h(k)
        * fact
            .h(k - 1)
            .clone()
            .transpose()
            .lu()
            .solve(&blk(k, k - 1).transpose())
            .ok_or(Error::SingularBlock(k - 1))?
            .transpose()
        * &phi_km;
    let mid = (fact.beta(k) * blk(k - 1, k) - blk(k, k + 1) * fact.beta(k + 1)) * &phi_k;
    let up = blk(k, k + 1) * &phi_kp;
    let rhs = down + mid + up;
    let lhs = phi_k * degree_one_value(n, z);
    Ok((lhs - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Residual of the conjugate-partner three-term relation:
/// `L_n(z) conj-coeff(phihat)_{[k]}(z^{-1}) = H_{[k]}^T (eta slash)_{[k],[k-1]}
///  H_{[k-1]}^{-1} phi_{[k-1]} + (conj(betahat)_{[k]} (eta slash)_{[k-1],[k]}
///  - (eta slash)_{[k],[k+1]} beta_{[k+1]}) phi_{[k]}
///  + (eta slash)_{[k],[k+1]} phi_{[k+1]}`.
pub fn three_term_conjugate_residual(
    fact: &Factorization,
    n: &[Complex64],
    k: usize,
    z: &[Complex64],
) -> Result<f64> {
    let basis = fact.basis();
    if k == 0 || k + 1 >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 2 });
    }
    let sl = slashed_matrix(basis, n)?;
    let esl = spectral::eta(basis).apply_left(&sl);
    let blk = |r: usize, c: usize| {
        esl.view((basis.offset(r), basis.offset(c)), (basis.shell_len(r), basis.shell_len(c)))
            .into_owned()
    };
    let phi_km = eval_family(fact, Side::Phi, k - 1, z)?;
    let phi_k = eval_family(fact, Side::Phi, k, z)?;
    let phi_kp = eval_family(fact, Side::Phi, k + 1, z)?;

    let down = fact.h(k).transpose()
        * fact
            .h(k - 1)
            .clone()
            .transpose()
            .lu()
            .solve(&blk(k, k - 1).transpose())
            .ok_or(Error::SingularBlock(k - 1))?
            .transpose()
        * &phi_km;
    let mid = (fact.beta_hat(k).conjugate() * blk(k - 1, k) - blk(k, k + 1) * fact.beta(k + 1))
        * &phi_k;
    let up = blk(k, k + 1) * &phi_kp;
    let rhs = down + mid + up;

    let zinv: Vec<Complex64> = z.iter().map(|c| c.inv()).collect();
    let chi_inv = basis.chi(&zinv)?;
    let coeff = fact.s_hat().conjugate();
    let rows = coeff.view((basis.offset(k), 0), (basis.shell_len(k), basis.len()));
    let lhs = (&rows * chi_inv) * degree_one_value(n, z);
    Ok((lhs - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Residual of `eta Phi(z) = conj-coeff(Phihat)(z^{-1})`, shellwise max.
pub fn reversal_symmetry_residual(fact: &Factorization, z: &[Complex64]) -> Result<f64> {
    let basis = fact.basis();
    let eta = spectral::eta(basis);
    let phi = eval_all(fact, Side::Phi, z)?;
    let lhs = eta.apply_vec(&phi);
    let zinv: Vec<Complex64> = z.iter().map(|c| c.inv()).collect();
    let rhs = fact.s_hat().conjugate() * basis.chi(&zinv)?;
    Ok((lhs - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Residual of the Christoffel-Darboux quotient formula at shell `k`:
/// the kernel `K^{(k)}` equals
/// `[phihat_{[k-1]}^dagger H^{-1} slash_{[k-1],[k]} phi_{[k]}
///   - phihat_{[k]}^dagger slash_{[k],[k-1]} H^{-1} phi_{[k-1]}]
///  / (L_n(z2) - L_n(conj(z1)^{-1}))`.
pub fn cd_formula_residual(
    fact: &Factorization,
    n: &[Complex64],
    k: usize,
    z1: &[Complex64],
    z2: &[Complex64],
) -> Result<f64> {
    let basis = fact.basis();
    if k == 0 || k >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 1 });
    }
    let sl = slashed_matrix(basis, n)?;
    let blk = |r: usize, c: usize| {
        sl.view((basis.offset(r), basis.offset(c)), (basis.shell_len(r), basis.shell_len(c)))
            .into_owned()
    };
    let p1_km = eval_family(fact, Side::PhiHat, k - 1, z1)?;
    let p1_k = eval_family(fact, Side::PhiHat, k, z1)?;
    let p2_km = eval_family(fact, Side::Phi, k - 1, z2)?;
    let p2_k = eval_family(fact, Side::Phi, k, z2)?;
    let h_lu = fact.h(k - 1).clone().lu();
    let a = (p1_km.adjoint()
        * h_lu.solve(&(blk(k - 1, k) * &p2_k)).ok_or(Error::SingularBlock(k - 1))?)[(0, 0)];
    let b = (p1_k.adjoint()
        * (blk(k, k - 1) * h_lu.solve(&p2_km).ok_or(Error::SingularBlock(k - 1))?))[(0, 0)];
    let z1ci: Vec<Complex64> = z1.iter().map(|c| c.conj().inv()).collect();
    let den = degree_one_value(n, z2) - degree_one_value(n, &z1ci);
    if den.norm() < 1e-8 {
        return Err(Error::InvalidConfig(
            "CD-formula denominator too small; resample the test points".into(),
        ));
    }
    let quotient = (a - b) / den;
    let kernel = cd_kernel_eval(fact, k, z1, z2)?;
    Ok((quotient - kernel).norm())
}

/// Defect of `det S^{[level]} = 1` (unitriangular basis-change property).
pub fn basis_determinant_defect(fact: &Factorization, level: usize) -> f64 {
    let n = fact.basis().offset(level);
    let s = fact.s().view((0, 0), (n, n)).into_owned();
    (s.lu().determinant() - Complex64::new(1.0, 0.0)).norm()
}

/// Expand a Laurent polynomial in the Phi family through the moment-matrix
/// pairing and re-synthesize; returns the max coefficient deviation.
pub fn expansion_roundtrip_residual(
    fact: &Factorization,
    g: &MomentMatrix,
    poly: &LaurentPolynomial,
) -> Result<f64> {
    let basis = fact.basis();
    if poly.longitude()? >= basis.max_longitude() {
        return Err(Error::ShellOutOfRange {
            index: poly.longitude()? as usize,
            max: basis.max_longitude() as usize - 1,
        });
    }
    let n = basis.len();
    let mut c = DVector::<Complex64>::zeros(n);
    for (alpha, &v) in poly.terms() {
        let i = basis
            .global_index(alpha)
            .ok_or(Error::ShellOutOfRange { index: alpha.longitude() as usize, max: n })?;
        c[i] = v;
    }
    // lambda^T = c^T G Shat^dagger H^{-1}, blockwise through the quasi-tau blocks
    let v = (c.transpose() * g.data() * fact.s_hat().adjoint()).transpose();
    let mut lambda = DVector::<Complex64>::zeros(n);
    for k in 0..basis.num_shells() {
        let seg = v.rows(basis.offset(k), basis.shell_len(k)).into_owned();
        let sol = fact
            .h(k)
            .clone()
            .transpose()
            .lu()
            .solve(&seg)
            .ok_or(Error::SingularBlock(k))?;
        lambda.rows_mut(basis.offset(k), basis.shell_len(k)).copy_from(&sol);
    }
    let back = (lambda.transpose() * fact.s()).transpose();
    Ok((back - c).iter().map(|x| x.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussborel::factorize;
    use crate::laurent::paper_example_weight;
    use crate::longilex::{LongilexBasis, MultiIndex};
    use crate::measure::{polynomial_weight_oracle, GridOracle, HaarOracle};
    use crate::moments::build_moment;
    use std::sync::Arc;

    fn torus_point(angles: &[f64]) -> Vec<Complex64> {
        angles.iter().map(|&t| Complex64::new(0.0, t).exp()).collect()
    }

    fn example_setup(max_k: u32) -> (MomentMatrix, Factorization) {
        let basis = Arc::new(LongilexBasis::new(2, max_k));
        let oracle =
            polynomial_weight_oracle(Arc::new(HaarOracle::new(2)), &paper_example_weight())
                .unwrap();
        let g = build_moment(oracle, basis).unwrap();
        let f = factorize(&g).unwrap();
        (g, f)
    }

    #[test]
    fn haar_family_is_chi() {
        let basis = Arc::new(LongilexBasis::new(2, 3));
        let g = build_moment(Arc::new(HaarOracle::new(2)), basis.clone()).unwrap();
        let f = factorize(&g).unwrap();
        let z = [Complex64::new(0.4, 0.8), Complex64::new(-1.2, 0.1)];
        for k in 0..basis.num_shells() {
            let phi = eval_family(&f, Side::Phi, k, &z).unwrap();
            let chi = basis.chi_shell(k, &z).unwrap();
            assert!((phi - chi).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-13);
        }
        assert!(biorthogonality_residual(&f, &g) < 1e-14);
    }

    #[test]
    fn example_phi_shell_one() {
        let (_, f) = example_setup(3);
        let z = [Complex64::new(1.7, 0.3), Complex64::new(0.4, -1.1)];
        let phi1 = eval_family(&f, Side::Phi, 1, &z).unwrap();
        let fifth = Complex64::new(0.2, 0.0);
        let expected = [z[0].inv() - fifth, z[1].inv() - fifth, z[1] - fifth, z[0] - fifth];
        for (a, e) in phi1.iter().zip(expected) {
            assert!((a - e).norm() < 1e-12);
        }
        // row sums of S at z = (1,1)
        let one = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        let phi_at_one = eval_family(&f, Side::Phi, 1, &one).unwrap();
        let basis = f.basis().clone();
        for (j, v) in phi_at_one.iter().enumerate() {
            let row = f.s().row(basis.offset(1) + j).iter().sum::<Complex64>();
            assert!((v - row).norm() < 1e-13);
        }
    }

    #[test]
    fn biorthogonality_example() {
        let (g, f) = example_setup(3);
        assert!(biorthogonality_residual(&f, &g) < 1e-12);
    }

    #[test]
    fn second_kind_identity() {
        let (g, f) = example_setup(4);
        let w = paper_example_weight();
        // off-torus point deep in the banded regime
        let z = [Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0)];
        assert!(second_kind_check(&f, &g, &w, 0, &z).unwrap() < 1e-12);
        let zt = torus_point(&[0.9, -2.3]);
        assert!(second_kind_check(&f, &g, &w, 1, &zt).unwrap() < 1e-12);
        // haar: the weight is 1 and the residual is exactly zero
        let basis = Arc::new(LongilexBasis::new(2, 3));
        let gh = build_moment(Arc::new(HaarOracle::new(2)), basis).unwrap();
        let fh = factorize(&gh).unwrap();
        let unit = LaurentPolynomial::constant(2, Complex64::new(1.0, 0.0));
        assert!(second_kind_check(&fh, &gh, &unit, 1, &zt).unwrap() < 1e-14);
    }

    #[test]
    fn kernel_checks_on_example() {
        let (g, f) = example_setup(4);
        let z1 = torus_point(&[0.33, -0.71]);
        let z2 = torus_point(&[1.1, 0.25]);
        assert!(abc_check(&f, &g, 2, &z1, &z2).unwrap() < 1e-11);
        // symmetry K(z1,z2) = K(conj(z2)^{-1}, conj(z1)^{-1})
        let k12 = cd_kernel_eval(&f, 2, &z1, &z2).unwrap();
        let z2i: Vec<_> = z2.iter().map(|c| c.conj().inv()).collect();
        let z1i: Vec<_> = z1.iter().map(|c| c.conj().inv()).collect();
        let k21 = cd_kernel_eval(&f, 2, &z2i, &z1i).unwrap();
        assert!((k12 - k21).norm() < 1e-11);
    }

    #[test]
    fn haar_kernel_closed_form() {
        let basis = Arc::new(LongilexBasis::new(2, 3));
        let g = build_moment(Arc::new(HaarOracle::new(2)), basis.clone()).unwrap();
        let f = factorize(&g).unwrap();
        let z1 = torus_point(&[0.5, 1.3]);
        let z2 = torus_point(&[-0.2, 0.8]);
        let k = cd_kernel_eval(&f, 2, &z1, &z2).unwrap();
        // 1 + sum_{|alpha|=1} conj(z1^alpha) z2^alpha
        let mut expect = Complex64::new(1.0, 0.0);
        for alpha in basis.shell(1) {
            expect += alpha.eval(&z1).unwrap().conj() * alpha.eval(&z2).unwrap();
        }
        assert!((k - expect).norm() < 1e-13);
        assert!(abc_check(&f, &g, 2, &z1, &z2).unwrap() < 1e-13);
    }

    #[test]
    fn reproducing_property() {
        let (g, f) = example_setup(3);
        let z1 = torus_point(&[0.4, 2.2]);
        let z2 = torus_point(&[-1.5, 0.6]);
        let res = reproducing_check(&f, g.oracle(), 17, 2, &z1, &z2).unwrap();
        assert!(res < 1e-10, "reproducing residual {res}");
    }

    #[test]
    fn three_term_relations() {
        let (_, f) = example_setup(4);
        let z = torus_point(&[0.77, -0.18]);
        // n = e_1 direction: slash n = Upsilon_1, L_n(z) = z_1
        let e1 = [
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::new(1.0, 0.0),
        ];
        assert!(three_term_residual(&f, &e1, 1, &z).unwrap() < 1e-11);
        assert!(three_term_conjugate_residual(&f, &e1, 1, &z).unwrap() < 1e-11);
        let mixed = [
            Complex64::new(0.3, 0.1),
            Complex64::new(-0.2, 0.5),
            Complex64::new(1.1, -0.4),
            Complex64::new(0.9, 0.2),
        ];
        assert!(three_term_residual(&f, &mixed, 2, &z).unwrap() < 1e-11);
        assert!(three_term_conjugate_residual(&f, &mixed, 2, &z).unwrap() < 1e-11);
    }

    #[test]
    fn reversal_symmetry() {
        let (_, f) = example_setup(3);
        let z = [Complex64::new(1.4, -0.3), Complex64::new(0.2, 0.9)];
        assert!(reversal_symmetry_residual(&f, &z).unwrap() < 1e-12);

        let basis = Arc::new(LongilexBasis::new(2, 3));
        let gr = build_moment(
            Arc::new(GridOracle::new(
                2,
                GridOracle::default_grid_size(3),
                Arc::new(|th: &[f64]| Complex64::new((0.3 * th[0].cos()).exp(), 0.0)),
                true,
                true,
            )),
            basis,
        )
        .unwrap();
        let fr = factorize(&gr).unwrap();
        assert!(reversal_symmetry_residual(&fr, &z).unwrap() < 1e-10);
    }

    #[test]
    fn cd_formula_matches_kernel() {
        let (_, f) = example_setup(4);
        let z1 = torus_point(&[0.31, -0.64]);
        let z2 = torus_point(&[1.21, 0.44]);
        let n = [
            Complex64::new(0.2, -0.1),
            Complex64::new(0.7, 0.3),
            Complex64::new(-0.4, 0.6),
            Complex64::new(1.0, 0.0),
        ];
        assert!(cd_formula_residual(&f, &n, 2, &z1, &z2).unwrap() < 1e-10);
        assert!(cd_formula_residual(&f, &n, 3, &z1, &z2).unwrap() < 1e-10);
    }

    #[test]
    fn cd_formula_rejects_tiny_denominator() {
        let (_, f) = example_setup(4);
        let z1 = torus_point(&[0.31, -0.64]);
        // z2 with z2_1 = 1/conj(z1_1) makes L_{e1}(z2) = L_{e1}(conj(z1)^{-1})
        let z2 = vec![z1[0].conj().inv(), Complex64::new(0.0, 0.5).exp()];
        let e1 = [
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::new(1.0, 0.0),
        ];
        assert!(matches!(
            cd_formula_residual(&f, &e1, 2, &z1, &z2),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn basis_and_expansion_properties() {
        let (g, f) = example_setup(4);
        for level in 1..=4 {
            assert!(basis_determinant_defect(&f, level) < 1e-10);
        }
        let poly = LaurentPolynomial::from_terms(
            2,
            [
                (MultiIndex(vec![2, -1]), Complex64::new(0.7, 0.2)),
                (MultiIndex(vec![0, 1]), Complex64::new(-1.3, 0.0)),
                (MultiIndex(vec![0, 0]), Complex64::new(0.5, -0.5)),
                (MultiIndex(vec![-1, -1]), Complex64::new(0.0, 1.0)),
            ],
        );
        assert!(expansion_roundtrip_residual(&f, &g, &poly).unwrap() < 1e-11);
    }
}
