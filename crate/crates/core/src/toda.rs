//! Continuous and discrete Toda-type flows on the factorization data.
//!
//! Continuous flows deform the measure by `exp(sum t_alpha z^alpha)`; their
//! derivatives are taken by central differences of full refactorizations at
//! shifted times. Discrete flows multiply the measure by degree-one factors
//! `L_n - q`; lattice corners are always built by exact convolution, never by
//! floating exponentiation of weights.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::darboux::band_defect;
use crate::error::{Error, Result};
use crate::gaussborel::{factorize, Factorization};
use crate::laurent::LaurentPolynomial;
use crate::longilex::{LongilexBasis, MultiIndex};
use crate::measure::DeformedMeasure;
use crate::moments::build_moment;
use crate::opbasis::{degree_one_value, eval_family, Side};
use crate::spectral::{laurent_of_upsilon, upsilon_power};
use std::sync::Arc;

/// Default step for first-order central differences.
pub const DEFAULT_H_FIRST: f64 = 1e-4;
/// Default step for second-order stencils.
pub const DEFAULT_H_SECOND: f64 = 1e-3;

/// `L_n(z) = sum_a n_{-a} z_a^{-1} + n_a z_a` for the coefficient vector
/// `n = (n_{-1},...,n_{-D}, n_D,...,n_1)`.
pub fn degree_one_polynomial(dim: usize, n: &[Complex64]) -> Result<LaurentPolynomial> {
    if n.len() != 2 * dim {
        return Err(Error::DimensionMismatch { expected: 2 * dim, got: n.len() });
    }
    let mut terms = Vec::with_capacity(2 * dim);
    for a in 1..=dim {
        terms.push((MultiIndex::unit(dim, a).neg(), n[a - 1]));
        terms.push((MultiIndex::unit(dim, a), n[2 * dim - a]));
    }
    Ok(LaurentPolynomial::from_terms(dim, terms))
}

/// `nhat = E_{2D} conj(n)`.
pub fn hat_vector(n: &[Complex64]) -> Vec<Complex64> {
    n.iter().rev().map(|c| c.conj()).collect()
}

/// The slashed matrix `L_n(Upsilon)`, dense on the truncated basis.
pub fn slashed_matrix(basis: &Arc<LongilexBasis>, n: &[Complex64]) -> Result<DMatrix<Complex64>> {
    let poly = degree_one_polynomial(basis.dim(), n)?;
    laurent_of_upsilon(basis, &poly)
}

/// A deformed measure with its factorization at the current times.
pub struct FlowState {
    basis: Arc<LongilexBasis>,
    measure: DeformedMeasure,
    grid_size: usize,
    fact: Factorization,
}

impl FlowState {
    pub fn new(
        basis: Arc<LongilexBasis>,
        measure: DeformedMeasure,
        grid_size: usize,
    ) -> Result<Self> {
        let fact = factorize_measure(&basis, &measure, grid_size)?;
        Ok(FlowState { basis, measure, grid_size, fact })
    }

    pub fn basis(&self) -> &Arc<LongilexBasis> {
        &self.basis
    }

    pub fn measure(&self) -> &DeformedMeasure {
        &self.measure
    }

    pub fn fact(&self) -> &Factorization {
        &self.fact
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn is_real_reduced(&self) -> bool {
        self.measure.preserves_reality()
    }

    /// Factorization at times bumped by the given increments.
    pub fn fact_with_bumps(&self, bumps: &[(MultiIndex, Complex64)]) -> Result<Factorization> {
        let mut m = self.measure.clone();
        for (alpha, dt) in bumps {
            m = m.with_time(alpha.clone(), *dt);
        }
        factorize_measure(&self.basis, &m, self.grid_size)
    }

    /// New state with one more discrete step applied.
    pub fn stepped(&self, weight: &LaurentPolynomial) -> Result<FlowState> {
        FlowState::new(self.basis.clone(), self.measure.with_step(weight.clone(), 1), self.grid_size)
    }
}

fn factorize_measure(
    basis: &Arc<LongilexBasis>,
    measure: &DeformedMeasure,
    grid_size: usize,
) -> Result<Factorization> {
    let oracle = measure.oracle(grid_size)?;
    let g = build_moment(oracle, basis.clone())?;
    factorize(&g)
}

/// Strip the strictly block-lower part: the Zakharov-Shabat projection `(.)_>=`.
pub fn block_upper_part(basis: &LongilexBasis, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = m.clone();
    for i in 0..basis.num_shells() {
        for j in 0..i {
            out.view_mut(
                (basis.offset(i), basis.offset(j)),
                (basis.shell_len(i), basis.shell_len(j)),
            )
            .fill(Complex64::ZERO);
        }
    }
    out
}

/// Strictly block-lower part `(.)_<`.
pub fn block_strictly_lower_part(basis: &LongilexBasis, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m - block_upper_part(basis, m)
}

fn interior_max(basis: &LongilexBasis, m: &DMatrix<Complex64>, shells: usize) -> f64 {
    let n = basis.cumulative(shells.saturating_sub(1));
    m.view((0, 0), (n, n)).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn jacobi_of(fact: &Factorization, alpha: &MultiIndex) -> DMatrix<Complex64> {
    let u = upsilon_power(fact.basis(), alpha).to_dense();
    fact.s() * u * fact.s_inv()
}

/// Residual of the Lax equation `dJ_alpha/dt_{alpha'} = [B_{alpha'}, J_alpha]`
/// with `B = (J)_>=`, derivative by central differences of step `h`.
pub fn lax_residual(
    state: &FlowState,
    alpha: &MultiIndex,
    alpha_prime: &MultiIndex,
    h: f64,
) -> Result<f64> {
    let basis = state.basis();
    let fp = state.fact_with_bumps(&[(alpha_prime.clone(), Complex64::new(h, 0.0))])?;
    let fm = state.fact_with_bumps(&[(alpha_prime.clone(), Complex64::new(-h, 0.0))])?;
    let dj = (jacobi_of(&fp, alpha) - jacobi_of(&fm, alpha)) / Complex64::new(2.0 * h, 0.0);
    let j0 = jacobi_of(state.fact(), alpha);
    let b = block_upper_part(basis, &jacobi_of(state.fact(), alpha_prime));
    let comm = &b * &j0 - &j0 * &b;
    let margin = (alpha.longitude() + alpha_prime.longitude()) as usize;
    let shells = basis.num_shells().saturating_sub(margin);
    Ok(interior_max(basis, &(dj - comm), shells))
}

/// Residual of the Gel'fand-Dickey expression
/// `(dS/dt_alpha) S^{-1} = -(J_alpha)_<`.
pub fn gelfand_dickey_residual(state: &FlowState, alpha: &MultiIndex, h: f64) -> Result<f64> {
    let basis = state.basis();
    let fp = state.fact_with_bumps(&[(alpha.clone(), Complex64::new(h, 0.0))])?;
    let fm = state.fact_with_bumps(&[(alpha.clone(), Complex64::new(-h, 0.0))])?;
    let ds = (fp.s() - fm.s()) / Complex64::new(2.0 * h, 0.0);
    let lhs = &ds * state.fact().s_inv();
    let rhs = -block_strictly_lower_part(basis, &jacobi_of(state.fact(), alpha));
    let shells = basis.num_shells().saturating_sub(alpha.longitude() as usize);
    Ok(interior_max(basis, &(lhs - rhs), shells))
}

/// Residual of the zero-curvature equation
/// `dB_alpha/dt_{alpha'} - dB_{alpha'}/dt_alpha + [B_alpha, B_{alpha'}] = 0`.
pub fn zakharov_shabat_residual(
    state: &FlowState,
    alpha: &MultiIndex,
    alpha_prime: &MultiIndex,
    h: f64,
) -> Result<f64> {
    let basis = state.basis();
    let b_of = |f: &Factorization, a: &MultiIndex| block_upper_part(basis, &jacobi_of(f, a));
    let fpp = state.fact_with_bumps(&[(alpha_prime.clone(), Complex64::new(h, 0.0))])?;
    let fpm = state.fact_with_bumps(&[(alpha_prime.clone(), Complex64::new(-h, 0.0))])?;
    let db_a = (b_of(&fpp, alpha) - b_of(&fpm, alpha)) / Complex64::new(2.0 * h, 0.0);
    let fqp = state.fact_with_bumps(&[(alpha.clone(), Complex64::new(h, 0.0))])?;
    let fqm = state.fact_with_bumps(&[(alpha.clone(), Complex64::new(-h, 0.0))])?;
    let db_ap = (b_of(&fqp, alpha_prime) - b_of(&fqm, alpha_prime)) / Complex64::new(2.0 * h, 0.0);
    let ba = b_of(state.fact(), alpha);
    let bap = b_of(state.fact(), alpha_prime);
    let expr = db_a - db_ap + (&ba * &bap - &bap * &ba);
    let margin = (alpha.longitude() + alpha_prime.longitude()) as usize;
    Ok(interior_max(basis, &expr, basis.num_shells().saturating_sub(margin)))
}

/// Residual of `dH_{[k]}/dt_a H_{[k]}^{-1} = beta_{[k]} (U_a)_{[k-1],[k]}
/// - (U_a)_{[k],[k+1]} beta_{[k+1]}` (with the `k = 0` reduction), axis `a`
/// 1-based, derivative by central differences.
pub fn h_derivative_residual(state: &FlowState, a: usize, k: usize, h: f64) -> Result<f64> {
    let basis = state.basis();
    if k + 1 >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 2 });
    }
    let e_a = MultiIndex::unit(basis.dim(), a);
    let fp = state.fact_with_bumps(&[(e_a.clone(), Complex64::new(h, 0.0))])?;
    let fm = state.fact_with_bumps(&[(e_a, Complex64::new(-h, 0.0))])?;
    let dh = (fp.h(k) - fm.h(k)) / Complex64::new(2.0 * h, 0.0);
    let lhs = dh * state.fact().h_inv(k);
    let u = crate::spectral::build_upsilon(basis, a);
    let rhs = if k == 0 {
        -(u.block(0, 1) * state.fact().beta(1))
    } else {
        state.fact().beta(k) * u.block(k - 1, k) - u.block(k, k + 1) * state.fact().beta(k + 1)
    };
    Ok((lhs - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Residual of `dbeta_{[k]}/dt_a = -H_{[k]} (U_a)_{[k],[k-1]} H_{[k-1]}^{-1}`.
pub fn beta_derivative_residual(state: &FlowState, a: usize, k: usize, h: f64) -> Result<f64> {
    let basis = state.basis();
    if k == 0 || k >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 1 });
    }
    let e_a = MultiIndex::unit(basis.dim(), a);
    let fp = state.fact_with_bumps(&[(e_a.clone(), Complex64::new(h, 0.0))])?;
    let fm = state.fact_with_bumps(&[(e_a, Complex64::new(-h, 0.0))])?;
    let db = (fp.beta(k) - fm.beta(k)) / Complex64::new(2.0 * h, 0.0);
    let u = crate::spectral::build_upsilon(basis, a);
    let rhs = -(state.fact().h(k) * u.block(k, k - 1) * state.fact().h_inv(k - 1));
    Ok((db - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Residual of the Toda-lattice second-order equation
/// `d/dt_b (dH_{[k]}/dt_a H_{[k]}^{-1}) =
///  (U_a)_{[k],[k+1]} H_{[k+1]} (U_b)_{[k+1],[k]} H_{[k]}^{-1}
///  - H_{[k]} (U_b)_{[k],[k-1]} H_{[k-1]}^{-1} (U_a)_{[k-1],[k]}`
/// via nested central differences in `(t_a, t_b)`.
pub fn toda_equation_residual(
    state: &FlowState,
    a: usize,
    b: usize,
    k: usize,
    h: f64,
) -> Result<f64> {
    let basis = state.basis();
    if k == 0 || k + 1 >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 2 });
    }
    let e_a = MultiIndex::unit(basis.dim(), a);
    let e_b = MultiIndex::unit(basis.dim(), b);
    let hh = Complex64::new(h, 0.0);
    // g(s) = dH_k/dt_a H_k^{-1} at t + s e_b
    let g_at = |s: Complex64| -> Result<DMatrix<Complex64>> {
        let fc = state.fact_with_bumps(&[(e_b.clone(), s)])?;
        let fp = state.fact_with_bumps(&[(e_b.clone(), s), (e_a.clone(), hh)])?;
        let fm = state.fact_with_bumps(&[(e_b.clone(), s), (e_a.clone(), -hh)])?;
        let dh = (fp.h(k) - fm.h(k)) / (2.0 * hh);
        Ok(dh * fc.h_inv(k))
    };
    let lhs = (g_at(hh)? - g_at(-hh)?) / (2.0 * hh);

    let ua = crate::spectral::build_upsilon(basis, a);
    let ub = crate::spectral::build_upsilon(basis, b);
    let f = state.fact();
    let rhs = ua.block(k, k + 1) * f.h(k + 1) * ub.block(k + 1, k) * f.h_inv(k)
        - f.h(k) * ub.block(k, k - 1) * f.h_inv(k - 1) * ua.block(k - 1, k);
    Ok((lhs - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

fn matrix_exp(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let mut acc = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for j in 1..=80 {
        term = (&term * a) / Complex64::new(j as f64, 0.0);
        acc += &term;
        let t = term.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if t < 1e-18 {
            break;
        }
    }
    acc
}

/// Residual of the wave-matrix consistency `W_1^{-1} What_2 = G` at the
/// current times, compared on the leading `interior_shells` blocks. The
/// vacuum matrix is the exponential of the truncated `t(Upsilon)`, so the
/// usable interior shrinks with the size of the times.
pub fn wave_consistency_residual(
    state: &FlowState,
    g0: &DMatrix<Complex64>,
    interior_shells: usize,
) -> Result<f64> {
    let basis = state.basis();
    let n = basis.len();
    let mut t_of_upsilon = DMatrix::<Complex64>::zeros(n, n);
    for (alpha, t) in &state.measure().times {
        t_of_upsilon += upsilon_power(basis, alpha).to_dense() * *t;
    }
    let w0_inv = matrix_exp(&(-t_of_upsilon));
    let f = state.fact();
    let gt = f.s_inv() * f.h_dense() * f.s_hat_inv().adjoint();
    let recon = w0_inv * gt;
    Ok(interior_max(basis, &(recon - g0), interior_shells))
}

/// One degree-one discrete flow: the Darboux factor `L_n - q`.
#[derive(Debug, Clone)]
pub struct DegreeOneFlow {
    pub n: Vec<Complex64>,
    pub q: Complex64,
}

impl DegreeOneFlow {
    pub fn new(n: Vec<Complex64>, q: Complex64) -> Self {
        DegreeOneFlow { n, q }
    }

    /// Real one-step reduction `n = nhat` built from `u in C^D`, with real `q`.
    pub fn real_reduced(u: &[Complex64], q: f64) -> Self {
        let d = u.len();
        let mut n = vec![Complex64::ZERO; 2 * d];
        for a in 1..=d {
            n[a - 1] = u[a - 1].conj(); // n_{-a}
            n[2 * d - a] = u[a - 1]; // n_a
        }
        DegreeOneFlow { n, q: Complex64::new(q, 0.0) }
    }

    /// The perturbing polynomial `L_n - q`.
    pub fn weight_polynomial(&self, dim: usize) -> Result<LaurentPolynomial> {
        let l = degree_one_polynomial(dim, &self.n)?;
        l.add(&LaurentPolynomial::constant(dim, -self.q))
    }

    /// Positivity margin `-(q + 2 sum_b |u_b|)`; nonnegative guarantees a
    /// positive perturbed weight under the real reduction.
    pub fn positivity_margin(&self) -> f64 {
        let d = self.n.len() / 2;
        let sum: f64 = (0..d).map(|a| self.n[2 * d - 1 - a].norm()).sum();
        -(self.q.re + 2.0 * sum)
    }
}

/// Data returned by one discrete step.
pub struct DiscreteStep {
    pub state: FlowState,
    /// Diagonal resolvent blocks `alpha_{a,[k]} = (T_a H_{[k]}) H_{[k]}^{-1}`.
    pub alpha_blocks: Vec<DMatrix<Complex64>>,
    /// Subdiagonal adjoint-resolvent blocks
    /// `rho_{a,[k+1]} = H_{[k+1]} (slash n_a)_{[k+1],[k]} (T_a H_{[k]})^{-1}`.
    pub rho_blocks: Vec<DMatrix<Complex64>>,
    /// Residual of `(T_a H_0) H_0^{-1} = -(slash n_a)_{[0],[1]} beta_{[1]} - q_a`.
    pub head_relation_residual: f64,
    /// Band-shape defect of the degree-one resolvent (upper) and adjoint (lower).
    pub shape_defect: f64,
}

/// Apply one degree-one Darboux step and collect the resolvent data.
pub fn discrete_step(state: &FlowState, flow: &DegreeOneFlow) -> Result<DiscreteStep> {
    let basis = state.basis();
    let dim = basis.dim();
    let weight = flow.weight_polynomial(dim)?;
    let new_state = state.stepped(&weight)?;
    let f = state.fact();
    let ft = new_state.fact();
    let shells = basis.num_shells();

    let sl = slashed_matrix(basis, &flow.n)?;
    let mut alpha_blocks = Vec::with_capacity(shells);
    let mut rho_blocks = Vec::with_capacity(shells.saturating_sub(1));
    for k in 0..shells {
        alpha_blocks.push(ft.h(k) * f.h_inv(k));
    }
    for k in 0..shells - 1 {
        let slk = sl
            .view(
                (basis.offset(k + 1), basis.offset(k)),
                (basis.shell_len(k + 1), basis.shell_len(k)),
            )
            .into_owned();
        let th_inv = ft
            .h(k)
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::SingularBlock(k))?;
        rho_blocks.push(f.h(k + 1) * slk * th_inv);
    }

    let head = &alpha_blocks[0];
    let sl01 = sl
        .view((0, basis.offset(1)), (1, basis.shell_len(1)))
        .into_owned();
    let expected = -(sl01 * f.beta(1))[(0, 0)] - flow.q;
    let head_relation_residual = (head[(0, 0)] - expected).norm();

    // omega_a upper with one superdiagonal, M_a lower unitriangular with one
    // subdiagonal, on the interior
    let q_eye = DMatrix::<Complex64>::identity(basis.len(), basis.len()) * flow.q;
    let omega = ft.s() * (&sl - &q_eye) * f.s_inv();
    let m_adj = f.s() * ft.s_inv();
    let interior = shells - 1;
    let shape_defect = band_defect(basis, &omega, 0, 1, interior)
        .max(band_defect(basis, &m_adj, 1, 0, shells));

    Ok(DiscreteStep { state: new_state, alpha_blocks, rho_blocks, head_relation_residual, shape_defect })
}

fn omega_between(
    from: &Factorization,
    to: &Factorization,
    sl: &DMatrix<Complex64>,
    q: Complex64,
) -> DMatrix<Complex64> {
    let n = sl.nrows();
    let q_eye = DMatrix::<Complex64>::identity(n, n) * q;
    to.s() * (sl - q_eye) * from.s_inv()
}

/// Residual of the discrete Zakharov-Shabat compatibility
/// `(T_1 omega_2) omega_1 = (T_2 omega_1) omega_2` for two degree-one flows.
pub fn discrete_zs_compatibility_residual(
    state: &FlowState,
    flow_a: &DegreeOneFlow,
    flow_b: &DegreeOneFlow,
) -> Result<f64> {
    let basis = state.basis();
    let dim = basis.dim();
    let wa = flow_a.weight_polynomial(dim)?;
    let wb = flow_b.weight_polynomial(dim)?;
    let f00 = state.fact();
    let sa = state.stepped(&wa)?;
    let sb = state.stepped(&wb)?;
    let sab = sa.stepped(&wb)?;
    let sla = slashed_matrix(basis, &flow_a.n)?;
    let slb = slashed_matrix(basis, &flow_b.n)?;
    let om_a = omega_between(f00, sa.fact(), &sla, flow_a.q);
    let om_b = omega_between(f00, sb.fact(), &slb, flow_b.q);
    let t1_om_b = omega_between(sa.fact(), sab.fact(), &slb, flow_b.q);
    let t2_om_a = omega_between(sb.fact(), sab.fact(), &sla, flow_a.q);
    let lhs = t1_om_b * om_a;
    let rhs = t2_om_a * om_b;
    Ok(interior_max(basis, &(lhs - rhs), basis.num_shells().saturating_sub(2)))
}

/// Residual of the discrete Toda equation at shell `k`:
/// `Delta_b((T_a H_k) H_k^{-1}) = (slash a)_{[k],[k+1]} H_{[k+1]}
///  (slash b)_{[k+1],[k]} (T_b H_k)^{-1} - (T_a H_k) (slash b)_{[k],[k-1]}
///  (T_a T_b H_{k-1})^{-1} (slash a)_{[k-1],[k]}`.
pub fn discrete_toda_residual(
    state: &FlowState,
    flow_a: &DegreeOneFlow,
    flow_b: &DegreeOneFlow,
    k: usize,
) -> Result<f64> {
    let basis = state.basis();
    let dim = basis.dim();
    if k == 0 || k + 1 >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 2 });
    }
    let wa = flow_a.weight_polynomial(dim)?;
    let wb = flow_b.weight_polynomial(dim)?;
    let f00 = state.fact();
    let sa = state.stepped(&wa)?;
    let sb = state.stepped(&wb)?;
    let sab = sa.stepped(&wb)?;
    let sla = slashed_matrix(basis, &flow_a.n)?;
    let slb = slashed_matrix(basis, &flow_b.n)?;
    let blk = |m: &DMatrix<Complex64>, r: usize, c: usize| {
        m.view((basis.offset(r), basis.offset(c)), (basis.shell_len(r), basis.shell_len(c)))
            .into_owned()
    };

    let lhs = sab.fact().h(k) * sb.fact().h_inv(k) - sa.fact().h(k) * f00.h_inv(k);
    let term1 = blk(&sla, k, k + 1) * f00.h(k + 1) * blk(&slb, k + 1, k) * sb.fact().h_inv(k);
    let term2 =
        sa.fact().h(k) * blk(&slb, k, k - 1) * sab.fact().h_inv(k - 1) * blk(&sla, k - 1, k);
    Ok((lhs - (term1 - term2)).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Stack `(slash n_a)_{[k],[k+1]}` over the rows of `N`; must have full
/// column rank for the Miwa chain.
pub fn slashed_stack(
    basis: &Arc<LongilexBasis>,
    n_matrix: &DMatrix<Complex64>,
    k: usize,
) -> Result<DMatrix<Complex64>> {
    let dim = basis.dim();
    let rows = 2 * dim * basis.shell_len(k);
    let cols = basis.shell_len(k + 1);
    let mut out = DMatrix::zeros(rows, cols);
    for a in 0..2 * dim {
        let n: Vec<Complex64> = n_matrix.row(a).iter().copied().collect();
        let sl = slashed_matrix(basis, &n)?;
        let blk = sl.view(
            (basis.offset(k), basis.offset(k + 1)),
            (basis.shell_len(k), basis.shell_len(k + 1)),
        );
        out.view_mut((a * basis.shell_len(k), 0), (basis.shell_len(k), cols)).copy_from(&blk);
    }
    Ok(out)
}

/// Residual of the Miwa-type expression: with `q = N chi_{[1]}(z)` the
/// MVOLPUT factor through the degree-one flows as
/// `phi_{[k]}(z) = -slashN_{k-1}^+ [TH]_{k-1} H_{[k-1]}^{-1} phi_{[k-1]}(z)`,
/// iterated down to the constant `phi_{[0]} = 1`.
pub fn miwa_expression_residual(
    state: &FlowState,
    n_matrix: &DMatrix<Complex64>,
    k: usize,
    z: &[Complex64],
) -> Result<f64> {
    let basis = state.basis();
    let dim = basis.dim();
    if n_matrix.nrows() != 2 * dim || n_matrix.ncols() != 2 * dim {
        return Err(Error::DimensionMismatch { expected: 2 * dim, got: n_matrix.nrows() });
    }
    if k + 1 >= basis.num_shells() {
        return Err(Error::ShellOutOfRange { index: k, max: basis.num_shells() - 2 });
    }
    let chi1 = basis.chi_shell(1, z)?;
    let q = n_matrix * chi1;

    // factorize the 2D one-step flows T_a
    let f0 = state.fact();
    let mut step_facts = Vec::with_capacity(2 * dim);
    for a in 0..2 * dim {
        let n: Vec<Complex64> = n_matrix.row(a).iter().copied().collect();
        let flow = DegreeOneFlow::new(n, q[a]);
        let w = flow.weight_polynomial(dim)?;
        step_facts.push(state.stepped(&w)?);
    }

    let mut acc = DVector::from_element(1, Complex64::new(1.0, 0.0));
    for j in 0..k {
        let w = basis.shell_len(j);
        let sln = slashed_stack(basis, n_matrix, j)?;
        // full-rank check of the stacked slashed matrix
        let sv = sln.clone().svd(false, false).singular_values;
        let largest = sv.iter().fold(0.0f64, |m, &v| m.max(v));
        let rank = sv.iter().filter(|&&v| v > 1e-10 * largest).count();
        if rank < sln.ncols() {
            return Err(Error::RankDeficient {
                name: "slashed stack",
                rank,
                required: sln.ncols(),
            });
        }
        // stack T_a H_{[j]}
        let mut th = DMatrix::<Complex64>::zeros(2 * dim * w, w);
        for a in 0..2 * dim {
            th.view_mut((a * w, 0), (w, w)).copy_from(step_facts[a].fact().h(j));
        }
        let rhs = th * (f0.h_inv(j) * &acc);
        // left inverse through the transpose normal equations
        let gram = sln.transpose() * &sln;
        let proj = sln.transpose() * rhs;
        let next = gram
            .lu()
            .solve(&proj)
            .ok_or(Error::RankDeficient { name: "slashed gram", rank: 0, required: w })?;
        acc = -next;
    }
    let phi_k = eval_family(f0, Side::Phi, k, z)?;
    Ok((acc - phi_k).iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// `L_n` evaluated through the slashed matrix acting on chi, as a
/// consistency helper for tests.
pub fn slashed_eigen_residual(
    basis: &Arc<LongilexBasis>,
    n: &[Complex64],
    z: &[Complex64],
) -> Result<f64> {
    let sl = slashed_matrix(basis, n)?;
    let chi = basis.chi(z)?;
    let lhs = &sl * &chi;
    let val = degree_one_value(n, z);
    let interior = basis.cumulative(basis.num_shells() - 2);
    Ok((0..interior).map(|i| (lhs[i] - val * chi[i]).norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::paper_example_weight;
    use crate::measure::{GridOracle, HaarOracle};

    fn haar_state(max_k: u32) -> FlowState {
        let basis = Arc::new(LongilexBasis::new(2, max_k));
        let grid = GridOracle::default_grid_size(max_k);
        FlowState::new(basis, DeformedMeasure::new(Arc::new(HaarOracle::new(2))), grid).unwrap()
    }

    fn real_reduced_state(max_k: u32) -> FlowState {
        let basis = Arc::new(LongilexBasis::new(2, max_k));
        let grid = GridOracle::default_grid_size(max_k);
        let tau = Complex64::new(0.15, 0.0);
        let nu = Complex64::new(0.05, 0.0);
        let m = DeformedMeasure::new(Arc::new(HaarOracle::new(2)))
            .with_time(MultiIndex(vec![1, 0]), tau)
            .with_time(MultiIndex(vec![-1, 0]), tau)
            .with_time(MultiIndex(vec![0, 1]), nu)
            .with_time(MultiIndex(vec![0, -1]), nu);
        FlowState::new(basis, m, grid).unwrap()
    }

    fn mi(v: &[i64]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    #[test]
    fn slashed_matrix_basics() {
        let basis = Arc::new(LongilexBasis::new(2, 3));
        // n = e_1 only: slash n = Upsilon_1
        let mut n = vec![Complex64::ZERO; 4];
        n[3] = Complex64::new(1.0, 0.0);
        let sl = slashed_matrix(&basis, &n).unwrap();
        let u1 = crate::spectral::build_upsilon(&basis, 1).to_dense();
        assert_eq!(sl, u1);
        // all-ones n equals L(Upsilon) - 5 I for the worked-example weight
        let ones = vec![Complex64::new(1.0, 0.0); 4];
        let sl1 = slashed_matrix(&basis, &ones).unwrap();
        let lu = laurent_of_upsilon(&basis, &paper_example_weight()).unwrap();
        let eye = DMatrix::<Complex64>::identity(basis.len(), basis.len());
        let diff = sl1 - (lu - eye * Complex64::new(5.0, 0.0));
        assert!(diff.iter().all(|c| c.norm() == 0.0));
        // adjoint identity slash(n)^dagger = slash(nhat)
        let n2 = vec![
            Complex64::new(0.3, 0.7),
            Complex64::new(-0.2, 0.1),
            Complex64::new(0.9, -0.4),
            Complex64::new(0.5, 0.2),
        ];
        let sl2 = slashed_matrix(&basis, &n2).unwrap();
        let sl2_hat = slashed_matrix(&basis, &hat_vector(&n2)).unwrap();
        assert!((sl2.adjoint() - sl2_hat).iter().all(|c| c.norm() < 1e-15));
        // eigen relation on the interior
        let z = [Complex64::new(0.4, 0.9), Complex64::new(-1.3, 0.2)];
        assert!(slashed_eigen_residual(&basis, &n2, &z).unwrap() < 1e-13);
    }

    #[test]
    fn first_derivative_laws_hold() {
        let state = real_reduced_state(4);
        assert!(state.is_real_reduced());
        for k in [1usize, 2] {
            let r = h_derivative_residual(&state, 1, k, DEFAULT_H_FIRST).unwrap();
            assert!(r < 1e-7, "dH law k={k}: {r}");
            let r = beta_derivative_residual(&state, 1, k, DEFAULT_H_FIRST).unwrap();
            assert!(r < 1e-7, "dbeta law k={k}: {r}");
        }
        let r = h_derivative_residual(&state, 2, 0, DEFAULT_H_FIRST).unwrap();
        assert!(r < 1e-7, "dH law k=0: {r}");
    }

    #[test]
    fn lax_and_zs_residuals() {
        let state = haar_state(4);
        let r = lax_residual(&state, &mi(&[1, 0]), &mi(&[0, 1]), DEFAULT_H_FIRST).unwrap();
        assert!(r < 1e-6, "lax haar: {r}");
        let state = real_reduced_state(4);
        let r = lax_residual(&state, &mi(&[1, 0]), &mi(&[1, 0]), DEFAULT_H_FIRST).unwrap();
        assert!(r < 1e-6, "lax real-reduced: {r}");
        let r =
            zakharov_shabat_residual(&state, &mi(&[1, 0]), &mi(&[0, 1]), DEFAULT_H_FIRST).unwrap();
        assert!(r < 1e-5, "zs: {r}");
        let r = gelfand_dickey_residual(&state, &mi(&[1, 0]), DEFAULT_H_FIRST).unwrap();
        assert!(r < 1e-6, "gd: {r}");
    }

    #[test]
    fn toda_second_order_with_richardson() {
        let state = real_reduced_state(4);
        let r1 = toda_equation_residual(&state, 1, 1, 1, 2e-3).unwrap();
        let r2 = toda_equation_residual(&state, 1, 1, 1, 1e-3).unwrap();
        assert!(r2 < 1e-5, "toda residual {r2}");
        let ratio = r1 / r2;
        assert!((2.5..=6.0).contains(&ratio), "O(h^2) ratio {ratio}");
        // haar at t = 0
        let state0 = haar_state(4);
        let r0 = toda_equation_residual(&state0, 1, 1, 1, 1e-3).unwrap();
        assert!(r0 < 1e-5, "toda haar residual {r0}");
    }

    #[test]
    fn wave_matrix_consistency() {
        let basis = Arc::new(LongilexBasis::new(2, 6));
        let grid = GridOracle::default_grid_size(6);
        let eps = Complex64::new(0.01, 0.0);
        let m = DeformedMeasure::new(Arc::new(HaarOracle::new(2)))
            .with_time(mi(&[1, 0]), eps)
            .with_time(mi(&[-1, 0]), eps);
        let state = FlowState::new(basis.clone(), m, grid).unwrap();
        let g0 = build_moment(Arc::new(HaarOracle::new(2)), basis).unwrap();
        let r = wave_consistency_residual(&state, g0.data(), 3).unwrap();
        assert!(r < 1e-11, "wave consistency {r}");
    }

    #[test]
    fn t_zero_rescales_h_only() {
        // bumping t_0 scales the measure by e^{t_0}: S fixed, H scaled
        let state = haar_state(3);
        let dt = Complex64::new(0.3, 0.0);
        let f = state.fact_with_bumps(&[(mi(&[0, 0]), dt)]).unwrap();
        let eye = DMatrix::<Complex64>::identity(state.basis().len(), state.basis().len());
        assert!((f.s() - &eye).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-12);
        let scale = dt.exp();
        for k in 0..state.basis().num_shells() {
            let w = state.basis().shell_len(k);
            let expect = DMatrix::<Complex64>::identity(w, w) * scale;
            assert!((f.h(k) - expect).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-12);
        }
    }

    #[test]
    fn discrete_step_reproduces_worked_example() {
        let state = haar_state(4);
        let ones = vec![Complex64::new(1.0, 0.0); 4];
        let flow = DegreeOneFlow::new(ones, Complex64::new(-5.0, 0.0));
        let step = discrete_step(&state, &flow).unwrap();
        assert!(step.head_relation_residual < 1e-12);
        assert!(step.shape_defect < 1e-11);
        // the stepped measure is the worked-example perturbation
        assert!((step.alpha_blocks[0][(0, 0)] - Complex64::new(5.0, 0.0)).norm() < 1e-12);
        let z = [Complex64::new(0.8, 0.4), Complex64::new(-0.3, 1.0)];
        let phi1 = eval_family(step.state.fact(), Side::Phi, 1, &z).unwrap();
        let fifth = Complex64::new(0.2, 0.0);
        let expected = [z[0].inv() - fifth, z[1].inv() - fifth, z[1] - fifth, z[0] - fifth];
        for (g, e) in phi1.iter().zip(expected) {
            assert!((g - e).norm() < 1e-11);
        }
    }

    #[test]
    fn real_reduction_preserves_positivity() {
        let u = [Complex64::new(0.4, 0.2), Complex64::new(-0.3, 0.1)];
        let q = -(2.0 * (u[0].norm() + u[1].norm())) - 0.5;
        let flow = DegreeOneFlow::real_reduced(&u, q);
        assert!(flow.positivity_margin() >= 0.0);
        let w = flow.weight_polynomial(2).unwrap();
        assert!(w.is_torus_real());
        let state = haar_state(3);
        let step = discrete_step(&state, &flow).unwrap();
        // positive-definiteness preserved: every quasi-tau block factorizes
        for k in 0..step.state.basis().num_shells() {
            let h = step.state.fact().h(k);
            assert!((h - h.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-10);
        }
    }

    #[test]
    fn discrete_flows_commute() {
        let state = haar_state(4);
        let f1 = DegreeOneFlow::real_reduced(
            &[Complex64::new(0.3, 0.0), Complex64::new(-0.2, 0.0)],
            -1.5,
        );
        let f2 = DegreeOneFlow::real_reduced(
            &[Complex64::new(0.1, 0.0), Complex64::new(0.4, 0.0)],
            -1.7,
        );
        let r = discrete_zs_compatibility_residual(&state, &f1, &f2).unwrap();
        assert!(r < 1e-10, "discrete ZS {r}");
        for k in [1usize, 2] {
            let r = discrete_toda_residual(&state, &f1, &f2, k).unwrap();
            assert!(r < 1e-9, "discrete toda k={k}: {r}");
        }
    }

    #[test]
    fn slashed_stack_has_full_column_rank() {
        // the 2D basic shifts give a full-column-rank stack for k <= K-2
        for dim in 1..=3usize {
            let basis = Arc::new(LongilexBasis::new(dim, 4));
            let eye = DMatrix::<Complex64>::identity(2 * dim, 2 * dim);
            for k in 0..=2usize {
                let st = slashed_stack(&basis, &eye, k).unwrap();
                let sv = st.svd(false, false).singular_values;
                let largest = sv.iter().fold(0.0f64, |m, &v| m.max(v));
                let rank = sv.iter().filter(|&&v| v > 1e-10 * largest).count();
                assert_eq!(rank, basis.shell_len(k + 1), "D={dim} k={k}");
            }
        }
    }

    #[test]
    fn miwa_expression() {
        let state = haar_state(4);
        // a generic invertible N
        let vals: Vec<Complex64> = (0..16)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 0.8 + 0.1;
                let y = (i as f64 * 0.61).cos() * 0.5;
                Complex64::new(x, y)
            })
            .collect();
        let n = DMatrix::from_row_slice(4, 4, &vals);
        let z = [Complex64::new(0.81, 0.54), Complex64::new(1.02, -0.44)];
        assert!(miwa_expression_residual(&state, &n, 0, &z).unwrap() < 1e-14);
        assert!(miwa_expression_residual(&state, &n, 1, &z).unwrap() < 1e-9);
        assert!(miwa_expression_residual(&state, &n, 2, &z).unwrap() < 1e-9);
    }
}
