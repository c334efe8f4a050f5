//! First-order response to a trap-frequency mismatch `dV = m dw^2 r^2 / 2`
//! in the hydrodynamic limit, and the resulting relative-phase dynamics.
//!
//! Corrections are expanded in `exp(+/- 2 i lambda t)` harmonics,
//! `psi_s = psi_s^(0) + A_s e^{2i lambda t} + B_s e^{-2i lambda t}` and the
//! same with `C_s, D_s` for `phi_s`. With the Laplacian dropped the linearised
//! equations are 8x8 algebraic systems at each radius, unknowns ordered
//! `(A+, A+*, B+, B+*, A-, A-*, B-, B-*)`.

use std::f64::consts::PI;
use std::sync::Arc;

use log::warn;
use nalgebra::{Matrix4, SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::{gaussian_decay_time, least_squares};
use crate::grid::{RadialField, RadialGrid};
use crate::hydro::{healing_length, ZeroOrderSolution};
use crate::moments::{
    assemble_generator, correlation_decay, max_step_for, propagate_moments, Grouping, MomentState,
    MomentTrajectory, OverlapIntegrals, P_REL, Q_REL,
};
use crate::params::PhysicalParams;
use crate::table::Table;

type C64 = Complex64;
type M8 = SMatrix<C64, 8, 8>;
type V8 = SVector<C64, 8>;

const A_P: usize = 0;
const B_P: usize = 2;
const A_M: usize = 4;
const B_M: usize = 6;

/// `v = (V_A(r0) - V_B(r0)) / (2 hbar lambda)`, reported as a magnitude.
pub fn perturbation_parameter(params: &PhysicalParams, r0: f64) -> Result<f64> {
    if params.lambda_coupling <= 0.0 {
        return Err(Error::param(
            "lambda",
            "the expansion in v needs a positive coupling",
        ));
    }
    Ok((2.0 * params.delta_v(r0) / (2.0 * params.hbar * params.lambda_coupling)).abs())
}

/// `delta_omega_sq` giving perturbation parameter `v` at radius `r0`.
pub fn delta_omega_sq_for(params: &PhysicalParams, r0: f64, v: f64) -> f64 {
    2.0 * params.hbar * params.lambda_coupling * v / (params.mass * r0 * r0)
}

struct NodeData {
    psi_p: C64,
    psi_m: C64,
    phi_p: C64,
    phi_m: C64,
    dv: f64,
}

fn node_data(zo: &ZeroOrderSolution, params: &PhysicalParams, r: f64) -> NodeData {
    NodeData {
        psi_p: zo.psi_plus_at(r),
        psi_m: zo.psi_minus_at(r),
        phi_p: zo.phi_plus_at(r),
        phi_m: zo.phi_minus_at(r),
        dv: params.delta_v(r),
    }
}

/// `M = Lambda + M0` at radius `r`.
fn system_matrix(zo: &ZeroOrderSolution, params: &PhysicalParams, r: f64, d: &NodeData) -> M8 {
    let n = params.n_total;
    let nu = n * params.u0;
    let two_hl = 2.0 * params.hbar * params.lambda_coupling;
    let mu = 0.5 * params.mass * params.omega_mean_sq() * zo.r0 * zo.r0;
    let base = params.v_mean(r) - mu + params.u0 * zo.density_at(r);
    let rho_p = n * d.psi_p.norm_sqr();
    let rho_m = n * d.psi_m.norm_sqr();
    let mut m = M8::zeros();
    let c = |x: f64| C64::new(x, 0.0);
    for (off, rho_s, psi) in [(0, rho_p, d.psi_p), (4, rho_m, d.psi_m)] {
        let l0 = base + params.u0 * rho_s;
        m[(off, off)] = c(l0 + two_hl);
        m[(off + 1, off + 1)] = c(l0 + two_hl);
        m[(off + 2, off + 2)] = c(l0 - two_hl);
        m[(off + 3, off + 3)] = c(l0 - two_hl);
        m[(off, off + 3)] = nu * psi * psi;
        m[(off + 1, off + 2)] = nu * (psi * psi).conj();
        m[(off + 2, off + 1)] = nu * psi * psi;
        m[(off + 3, off)] = nu * (psi * psi).conj();
    }
    let (p, q) = (d.psi_p, d.psi_m);
    // Coupling of the + rows to the - unknowns; the - rows get the adjoint.
    let mut mpm = Matrix4::<C64>::zeros();
    mpm[(0, 0)] = nu * q.conj() * p;
    mpm[(0, 3)] = nu * q * p;
    mpm[(1, 1)] = nu * q * p.conj();
    mpm[(1, 2)] = nu * q.conj() * p.conj();
    mpm[(2, 1)] = nu * q * p;
    mpm[(2, 2)] = nu * q.conj() * p;
    mpm[(3, 0)] = nu * q.conj() * p.conj();
    mpm[(3, 3)] = nu * q * p.conj();
    let adj = mpm.adjoint();
    for i in 0..4 {
        for j in 0..4 {
            m[(i, 4 + j)] = mpm[(i, j)];
            m[(4 + i, j)] = adj[(i, j)];
        }
    }
    m
}

/// `Lambda = diag(2 hbar lambda, 2 hbar lambda, -2 hbar lambda, -2 hbar lambda)` twice.
fn lambda_diag(params: &PhysicalParams) -> [f64; 8] {
    let l = 2.0 * params.hbar * params.lambda_coupling;
    [l, l, -l, -l, l, l, -l, -l]
}

fn conj_pair_vector(x: [C64; 4]) -> V8 {
    // (x0, x0*, x1, x1*, x2, x2*, x3, x3*)
    V8::from_iterator(x.iter().flat_map(|v| [*v, v.conj()]))
}

fn solve_node(m: &M8, rhs: &V8) -> Option<V8> {
    let lu = m.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..8).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < 1e-12 * max {
        return None;
    }
    lu.solve(rhs)
        .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
}

/// Per-radius solution: `psi` and `phi` correction 8-vectors in the unknown ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCorrections {
    pub psi: V8,
    pub phi: V8,
}

impl NodeCorrections {
    fn zero() -> Self {
        NodeCorrections {
            psi: V8::zeros(),
            phi: V8::zeros(),
        }
    }
}

fn psi_rhs(d: &NodeData) -> V8 {
    let z = C64::new(0.0, 0.0);
    -conj_pair_vector([z, d.psi_m, d.psi_p, z]) * C64::new(d.dv, 0.0)
}

fn phi_source(zo: &ZeroOrderSolution, params: &PhysicalParams, d: &NodeData, psi_corr: &V8) -> V8 {
    let nu = params.n_total * params.u0;
    let ut = params.n_total * zo.u_tilde0;
    let (a_p, b_p, a_m, b_m) = (psi_corr[A_P], psi_corr[B_P], psi_corr[A_M], psi_corr[B_M]);
    // Source for the `s` block; `o` is the other sign.
    let t_pair =
        |a_s: C64, b_s: C64, a_o: C64, b_o: C64, psi_s: C64, phi_s: C64, psi_o: C64, phi_o: C64| {
            let g_s = phi_s * psi_s.conj() + phi_s.conj() * psi_s;
            let g_o = phi_o * psi_o.conj() + phi_o.conj() * psi_o;
            let mixed = psi_s * phi_o + psi_o * phi_s;
            let t1 = ut * a_s
                - 2.0 * nu * a_s * g_s
                - nu * a_s * g_o
                - nu * a_o * g_s
                - 2.0 * nu * b_s.conj() * psi_s * phi_s
                + nu * b_o.conj() * mixed;
            let t2 = ut * b_s
                - 2.0 * nu * b_s * g_s
                - nu * b_s * g_o
                - nu * b_o * g_s
                - 2.0 * nu * a_s.conj() * psi_s * phi_s
                + nu * a_o.conj() * mixed;
            (t1, t2)
        };
    let (t1, t2) = t_pair(a_p, b_p, a_m, b_m, d.psi_p, d.phi_p, d.psi_m, d.phi_m);
    let (s1, s2) = t_pair(a_m, b_m, a_p, b_p, d.psi_m, d.phi_m, d.psi_p, d.phi_p);
    let z = C64::new(0.0, 0.0);
    conj_pair_vector([t1, t2, s1, s2])
        - conj_pair_vector([z, d.phi_m, d.phi_p, z]) * C64::new(d.dv, 0.0)
}

/// Solves both 8x8 systems at radius `r`; `None` at a resonant node. Zero outside the TF ball.
pub fn corrections_at(
    zo: &ZeroOrderSolution,
    params: &PhysicalParams,
    r: f64,
) -> Option<NodeCorrections> {
    if r >= zo.r0 {
        return Some(NodeCorrections::zero());
    }
    let d = node_data(zo, params, r);
    let m = system_matrix(zo, params, r, &d);
    let psi = solve_node(&m, &psi_rhs(&d))?;
    let phi = solve_node(&m, &phi_source(zo, params, &d, &psi))?;
    Some(NodeCorrections { psi, phi })
}

/// Boundary-asymptotic form `-Lambda^{-1} dV [zero order]` of the psi (first) and phi (second) corrections.
pub fn asymptotic_corrections(
    zo: &ZeroOrderSolution,
    params: &PhysicalParams,
    r: f64,
) -> NodeCorrections {
    let d = node_data(zo, params, r);
    let lam = lambda_diag(params);
    let z = C64::new(0.0, 0.0);
    let psi0 = conj_pair_vector([z, d.psi_m, d.psi_p, z]);
    let phi0 = conj_pair_vector([z, d.phi_m, d.phi_p, z]);
    let scale = V8::from_iterator(lam.iter().map(|l| C64::new(-d.dv / l, 0.0)));
    NodeCorrections {
        psi: psi0.component_mul(&scale),
        phi: phi0.component_mul(&scale),
    }
}

/// Residual `|M x - b| / |b|` of the psi system at `r`.
pub fn psi_residual(zo: &ZeroOrderSolution, params: &PhysicalParams, r: f64, x: &V8) -> f64 {
    let d = node_data(zo, params, r);
    let b = psi_rhs(&d);
    (system_matrix(zo, params, r, &d) * x - b).norm() / b.norm().max(1e-300)
}

#[derive(Debug, Clone)]
pub struct CorrectionFunctions {
    pub a_plus: RadialField,
    pub a_minus: RadialField,
    pub b_plus: RadialField,
    pub b_minus: RadialField,
    pub c_plus: RadialField,
    pub c_minus: RadialField,
    pub d_plus: RadialField,
    pub d_minus: RadialField,
    /// Quadrature volume of excluded (resonant) nodes over the TF volume.
    pub excluded_fraction: f64,
}

impl CorrectionFunctions {
    fn from_nodes(
        grid: &Arc<RadialGrid>,
        nodes: &[NodeCorrections],
        excluded_fraction: f64,
        with_phi: bool,
    ) -> Self {
        let field = |pick: &dyn Fn(&NodeCorrections) -> C64| {
            RadialField::new(grid.clone(), nodes.iter().map(pick).collect())
                .expect("finite corrections")
        };
        let phi = |i: usize| {
            field(&move |n: &NodeCorrections| {
                if with_phi {
                    n.phi[i]
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        };
        CorrectionFunctions {
            a_plus: field(&|n| n.psi[A_P]),
            b_plus: field(&|n| n.psi[B_P]),
            a_minus: field(&|n| n.psi[A_M]),
            b_minus: field(&|n| n.psi[B_M]),
            c_plus: phi(A_P),
            d_plus: phi(B_P),
            c_minus: phi(A_M),
            d_minus: phi(B_M),
            excluded_fraction,
        }
    }
}

fn solve_on_grid(
    zo: &ZeroOrderSolution,
    params: &PhysicalParams,
    grid: &Arc<RadialGrid>,
) -> Result<(Vec<NodeCorrections>, f64)> {
    let ball = 4.0 * PI * zo.r0.powi(3) / 3.0;
    let mut excluded = 0.0;
    let mut out = Vec::with_capacity(grid.n_points());
    for (&r, &w) in grid.nodes().iter().zip(grid.weights()) {
        match corrections_at(zo, params, r) {
            Some(c) => out.push(c),
            None => {
                excluded += w;
                out.push(NodeCorrections::zero());
            }
        }
    }
    let fraction = excluded / ball;
    if fraction > 0.0 {
        warn!(
            "excluded {:.3e} of the Thomas-Fermi volume at resonant nodes",
            fraction
        );
    }
    if fraction > 0.01 {
        return Err(Error::Singular(format!(
            "resonant nodes cover {:.2}% of the Thomas-Fermi volume",
            100.0 * fraction
        )));
    }
    Ok((out, fraction))
}

/// `A_pm, B_pm` on `grid` (phi parts left zero).
pub fn solve_first_order_psi(
    zo: &ZeroOrderSolution,
    params: &PhysicalParams,
    grid: &Arc<RadialGrid>,
) -> Result<CorrectionFunctions> {
    let (nodes, frac) = solve_on_grid(zo, params, grid)?;
    Ok(CorrectionFunctions::from_nodes(grid, &nodes, frac, false))
}

/// Adds `C_pm, D_pm` to psi corrections computed on the same grid.
pub fn solve_first_order_phi(
    zo: &ZeroOrderSolution,
    psi_corr: &CorrectionFunctions,
    params: &PhysicalParams,
) -> Result<CorrectionFunctions> {
    let grid = psi_corr.a_plus.grid().clone();
    let ball = 4.0 * PI * zo.r0.powi(3) / 3.0;
    let mut excluded = psi_corr.excluded_fraction * ball;
    let mut nodes = Vec::with_capacity(grid.n_points());
    for (j, (&r, &w)) in grid.nodes().iter().zip(grid.weights()).enumerate() {
        let psi = conj_pair_vector([
            psi_corr.a_plus.values()[j],
            psi_corr.b_plus.values()[j],
            psi_corr.a_minus.values()[j],
            psi_corr.b_minus.values()[j],
        ]);
        if r >= zo.r0 {
            nodes.push(NodeCorrections::zero());
            continue;
        }
        let d = node_data(zo, params, r);
        let m = system_matrix(zo, params, r, &d);
        match solve_node(&m, &phi_source(zo, params, &d, &psi)) {
            Some(phi) => nodes.push(NodeCorrections { psi, phi }),
            None => {
                excluded += w;
                nodes.push(NodeCorrections {
                    psi,
                    phi: V8::zeros(),
                });
            }
        }
    }
    let frac = excluded / ball;
    if frac > 0.01 {
        return Err(Error::Singular(format!(
            "resonant nodes cover {:.2}% of the Thomas-Fermi volume",
            100.0 * frac
        )));
    }
    Ok(CorrectionFunctions::from_nodes(&grid, &nodes, frac, true))
}

/// `int_0^{r_cut} dV exp(-2 i lambda t) conj(x) y` at the healing-length cutoff and at twice it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedOverlap {
    pub at_xi: C64,
    pub at_2xi: C64,
}

pub const REGULARIZATION_NODES: usize = 400;

pub fn regularized_phi_phi(
    x: impl Fn(f64) -> C64,
    y: impl Fn(f64) -> C64,
    params: &PhysicalParams,
    xi: f64,
    r0: f64,
    t: f64,
) -> Result<RegularizedOverlap> {
    if !(xi > 0.0 && xi < r0 / 2.0) {
        return Err(Error::Domain(format!(
            "healing length {xi} must lie in (0, r0/2) with r0 = {r0}"
        )));
    }
    let rot = C64::from_polar(1.0, -2.0 * params.lambda_coupling * t);
    let at = |cut: f64| -> Result<C64> {
        let grid = RadialGrid::log_graded(r0 - cut, r0, REGULARIZATION_NODES)?;
        Ok(grid.integrate_complex_fn(|r| x(r).conj() * y(r) * params.delta_v(r)) * rot)
    };
    Ok(RegularizedOverlap {
        at_xi: at(xi)?,
        at_2xi: at(2.0 * xi)?,
    })
}

/// Second-order pieces of `(phi_+|phi_-)` built from the first-order phi corrections,
/// integrated up to `r0 - xi`:
/// `(phi_+|phi_-)(t) = e^{-2i lambda t} zero + constant + e^{-4i lambda t} oscillating`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPhiExpansion {
    pub zero: C64,
    /// `int dV (conj(phi_+^(0)) C_- + conj(D_+) phi_-^(0))`.
    pub constant: C64,
    pub oscillating: C64,
    /// `Re int dV conj(D_+) phi_-^(0)`, the time-independent part of `Re(phi_+^(1)|phi_-^(0))`.
    pub phi1_plus_phi0_minus: f64,
    /// `Re int dV conj(phi_+^(0)) C_-`, the time-independent part of `Re(phi_+^(0)|phi_-^(1))`.
    pub phi0_plus_phi1_minus: f64,
    pub excluded_fraction: f64,
}

impl PhiPhiExpansion {
    pub fn at(&self, lambda: f64, t: f64, include_second_order: bool) -> C64 {
        let z = self.zero * C64::from_polar(1.0, -2.0 * lambda * t);
        if include_second_order {
            z + self.constant + self.oscillating * C64::from_polar(1.0, -4.0 * lambda * t)
        } else {
            z
        }
    }
}

pub fn phi_phi_expansion(
    zo: &ZeroOrderSolution,
    params: &PhysicalParams,
    xi: f64,
) -> Result<PhiPhiExpansion> {
    if !(xi > 0.0 && xi < zo.r0) {
        return Err(Error::Domain("healing length must lie in (0, r0)".into()));
    }
    let grid = RadialGrid::log_graded(zo.r0 - xi, zo.r0, REGULARIZATION_NODES)?;
    let (nodes, frac) = solve_on_grid(zo, params, &grid)?;
    let mut acc = [C64::new(0.0, 0.0); 5];
    for ((&r, &w), n) in grid.nodes().iter().zip(grid.weights()).zip(&nodes) {
        let d = node_data(zo, params, r);
        let wdv = w * d.dv;
        acc[0] += d.phi_p.conj() * d.phi_m * wdv;
        acc[1] += d.phi_p.conj() * n.phi[A_M] * wdv;
        acc[2] += n.phi[B_P].conj() * d.phi_m * wdv;
        acc[3] += d.phi_p.conj() * n.phi[B_M] * wdv;
        acc[4] += n.phi[A_P].conj() * d.phi_m * wdv;
    }
    Ok(PhiPhiExpansion {
        zero: acc[0],
        constant: acc[1] + acc[2],
        oscillating: acc[3] + acc[4],
        phi1_plus_phi0_minus: acc[2].re,
        phi0_plus_phi1_minus: acc[1].re,
        excluded_fraction: frac,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauVariant {
    /// Prefactor `N^2 / (N_+ N_-)`.
    TotalNumber,
    /// Prefactor `N |dN| / (N_+ N_-)`.
    Imbalance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationCoefficients {
    pub v: f64,
    pub xi_over_r0: f64,
    /// `ln(2 xi / r0)` (negative).
    pub log_factor: f64,
    /// Signed amplitude: `Q_rel^(1)(t) = q1_amplitude sin(2 lambda t + dtheta0) P_rel^(0)`.
    pub q1_amplitude: f64,
    /// Signed secular rate: `Q_rel^(2)(t) = q2_rate t P_rel^(0)`.
    pub q2_rate: f64,
    pub rate_total: f64,
    pub rate_imbalance: f64,
    pub variant: TauVariant,
    pub tau_d: f64,
}

impl PerturbationCoefficients {
    pub fn tau_for(&self, variant: TauVariant) -> f64 {
        let rate = match variant {
            TauVariant::TotalNumber => self.rate_total,
            TauVariant::Imbalance => self.rate_imbalance,
        };
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }
}

/// `(6/5) v ln(2 xi / r0) N / sqrt(N_+ N_-) hbar`.
pub fn q1_amplitude(zo: &ZeroOrderSolution, params: &PhysicalParams) -> Result<f64> {
    let v = perturbation_parameter(params, zo.r0)?;
    if v > 0.3 {
        warn!("v = {v:.3} is not small; first-order results are unreliable");
    }
    let xi = healing_length(params, zo.r0);
    let lf = (2.0 * xi / zo.r0).ln();
    Ok(1.2 * v * lf * zo.n_total / (zo.n_plus * zo.n_minus).sqrt() * params.hbar)
}

/// Closed-form coefficients and both dephasing-rate variants.
pub fn dephasing_rate(
    params: &PhysicalParams,
    zo: &ZeroOrderSolution,
    p2_rel0: f64,
    variant: TauVariant,
) -> Result<PerturbationCoefficients> {
    if p2_rel0 < 0.0 {
        return Err(Error::param("p2_rel0", "variance must be nonnegative"));
    }
    let v = perturbation_parameter(params, zo.r0)?;
    let xi = healing_length(params, zo.r0);
    let lf = (2.0 * xi / zo.r0).ln();
    let (n, np, nm) = (zo.n_total, zo.n_plus, zo.n_minus);
    let dn = np - nm;
    let base = 12.0 / 25.0 * v * v * lf.abs() * params.lambda_coupling * p2_rel0.sqrt();
    let rate_total = base * n * n / (np * nm);
    let rate_imbalance = base * n * dn.abs() / (np * nm);
    let mut c = PerturbationCoefficients {
        v,
        xi_over_r0: xi / zo.r0,
        log_factor: lf,
        q1_amplitude: q1_amplitude(zo, params)?,
        q2_rate: 12.0 / 25.0 * v * v * lf * n * dn / (np * nm)
            * params.hbar
            * params.lambda_coupling,
        rate_total,
        rate_imbalance,
        variant,
        tau_d: 0.0,
    };
    c.tau_d = c.tau_for(variant);
    Ok(c)
}

/// Which terms of `(phi_+|phi_-)` enter the propagated generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineOrder {
    /// Zero-order fields only (first order in `dV`).
    First,
    /// Plus the first-order phi corrections (second order in `dV`).
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub order: PipelineOrder,
    pub grouping: Grouping,
    pub periods: f64,
    pub samples_per_period: usize,
    pub p2_rel0: f64,
    /// `<P_rel^(0)>`; 1 gives `<Q_rel>` per unit relative-number offset, 0 isolates the spread.
    pub mean_p_rel0: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            order: PipelineOrder::Second,
            grouping: Grouping::AsWritten,
            periods: 400.0,
            samples_per_period: 16,
            p2_rel0: 1.0,
            mean_p_rel0: 1.0,
        }
    }
}

/// Moments propagated from `<Q_rel> = 0` with the perturbatively corrected generator.
pub fn run_pipeline(
    zo: &ZeroOrderSolution,
    params: &PhysicalParams,
    config: &PipelineConfig,
) -> Result<(MomentTrajectory, PhiPhiExpansion)> {
    if params.lambda_coupling <= 0.0 {
        return Err(Error::param("lambda", "must be positive"));
    }
    let xi = healing_length(params, zo.r0);
    let expansion = phi_phi_expansion(zo, params, xi)?;
    let base = OverlapIntegrals::from_zero_order(zo, params, 0.0)?;
    let include = config.order == PipelineOrder::Second;
    let lambda = params.lambda_coupling;
    let gen = |t: f64| {
        let mut ov = base.at_time(params, t);
        ov.phi_phi = expansion.at(lambda, t, include);
        assemble_generator(&ov, params, config.grouping)
            .expect("validated coefficients")
            .f
    };
    assemble_generator(&base, params, config.grouping)?;
    let period = PI / lambda;
    let n_samples = (config.periods * config.samples_per_period as f64).round() as usize;
    let times: Vec<f64> = (0..=n_samples)
        .map(|k| k as f64 * period / config.samples_per_period as f64)
        .collect();
    let mut m0 = MomentState::default_initial(params.hbar).with_p_rel_variance(config.p2_rel0);
    m0.mean[P_REL] = config.mean_p_rel0;
    let traj = propagate_moments(&m0, gen, &times, max_step_for(lambda))?;
    Ok((traj, expansion))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecularFit {
    /// Linear-in-`t` coefficient of `<Q_rel>` per unit `<P_rel^(0)>`.
    pub slope: f64,
    /// Amplitude of the `sin(2 lambda t + dtheta0)` component.
    pub oscillation_amplitude: f64,
    /// Frequency of the largest spectral peak of the detrended `<Q_rel>`.
    pub peak_frequency: f64,
    pub frequency_resolution: f64,
    pub rms_residual: f64,
    /// Gaussian decay time fitted to the correlation function.
    pub tau_fit: f64,
    /// `hbar / (|slope| sqrt(<P_rel^(0)2>))`.
    pub tau_from_slope: f64,
    pub fit_ok: bool,
    pub diagnostics: String,
}

/// Runs the pipeline twice (unit `<P_rel^(0)>`, then zero mean with variance `p2_rel0`)
/// and fits the first run's `<Q_rel>` to `c + s t + a sin + b cos` at `2 lambda` and `4 lambda`,
/// and the second run's correlation function to a Gaussian.
pub fn secular_growth_check(
    zo: &ZeroOrderSolution,
    params: &PhysicalParams,
    config: &PipelineConfig,
) -> Result<(SecularFit, PhiPhiExpansion)> {
    let (mean_run, expansion) = run_pipeline(
        zo,
        params,
        &PipelineConfig {
            mean_p_rel0: 1.0,
            ..*config
        },
    )?;
    let (spread_run, _) = run_pipeline(
        zo,
        params,
        &PipelineConfig {
            mean_p_rel0: 0.0,
            ..*config
        },
    )?;
    let fit = fit_secular(
        &mean_run,
        &spread_run,
        params,
        zo.delta_theta0(),
        config.p2_rel0,
    )?;
    Ok((fit, expansion))
}

pub fn fit_secular(
    traj: &MomentTrajectory,
    spread: &MomentTrajectory,
    params: &PhysicalParams,
    dtheta0: f64,
    p2_rel0: f64,
) -> Result<SecularFit> {
    let w = 2.0 * params.lambda_coupling;
    let ts = &traj.times;
    let q: Vec<f64> = traj.states.iter().map(|s| s.mean[Q_REL]).collect();
    let fit = least_squares(
        ts,
        &q,
        &[
            &|_| 1.0,
            &|t| t,
            &|t| (w * t).sin(),
            &|t| (w * t).cos(),
            &|t| (2.0 * w * t).sin(),
            &|t| (2.0 * w * t).cos(),
        ],
    )?;
    let c = &fit.coefficients;
    let slope = c[1];
    let oscillation_amplitude = c[2] * dtheta0.cos() + c[3] * dtheta0.sin();
    let detrended: Vec<f64> = ts
        .iter()
        .zip(&q)
        .map(|(t, v)| v - c[0] - slope * t)
        .collect();
    let (peak_frequency, frequency_resolution) = spectral_peak(ts, &detrended);
    let decay = correlation_decay(spread, params.hbar);
    let tau_fit = gaussian_decay_time(&spread.times, &decay).unwrap_or(f64::INFINITY);
    let tau_from_slope = if slope != 0.0 && p2_rel0 > 0.0 {
        params.hbar / (slope.abs() * p2_rel0.sqrt())
    } else {
        f64::INFINITY
    };
    let secular_span = (slope * ts.last().copied().unwrap_or(0.0)).abs();
    let fit_ok = fit.rms_residual <= 0.2 * secular_span;
    let diagnostics = format!(
        "slope {slope:e}, rms residual {:e}, secular span {secular_span:e}, 2-lambda amplitude {oscillation_amplitude:e}",
        fit.rms_residual
    );
    Ok(SecularFit {
        slope,
        oscillation_amplitude,
        peak_frequency,
        frequency_resolution,
        rms_residual: fit.rms_residual,
        tau_fit,
        tau_from_slope,
        fit_ok,
        diagnostics,
    })
}

/// Angular frequency of the largest DFT magnitude (excluding zero) of uniformly sampled data,
/// and the bin width.
pub fn spectral_peak(times: &[f64], values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n < 4 {
        return (0.0, f64::INFINITY);
    }
    let dt = times[1] - times[0];
    let span = dt * n as f64;
    let bin = 2.0 * PI / span;
    let mut best = (0.0, 0usize);
    for k in 1..n / 2 {
        let s: C64 = values
            .iter()
            .enumerate()
            .map(|(j, v)| C64::from_polar(*v, -2.0 * PI * (k * j) as f64 / n as f64))
            .sum();
        if s.norm() > best.0 {
            best = (s.norm(), k);
        }
    }
    (best.1 as f64 * bin, bin)
}

/// One-row report table.
pub fn report_table(
    c: &PerturbationCoefficients,
    fit: Option<&SecularFit>,
    excluded_fraction: f64,
) -> Table {
    let mut t = Table::new(&[
        ("v", "1"),
        ("xi_over_r0", "1"),
        ("log_factor", "1"),
        ("q1_amplitude", "hbar"),
        ("q2_rate", "hbar omega_m"),
        ("tau_d_total", "1/omega_m"),
        ("tau_d_imbalance", "1/omega_m"),
        ("fit_slope", "hbar omega_m"),
        ("fit_q1_amplitude", "hbar"),
        ("tau_fit", "1/omega_m"),
        ("excluded_fraction", "1"),
    ]);
    let (s, a, tf) = fit.map_or((f64::NAN, f64::NAN, f64::NAN), |f| {
        (f.slope, f.oscillation_amplitude, f.tau_fit)
    });
    t.push(vec![
        c.v,
        c.xi_over_r0,
        c.log_factor,
        c.q1_amplitude,
        c.q2_rate,
        c.tau_for(TauVariant::TotalNumber),
        c.tau_for(TauVariant::Imbalance),
        s,
        a,
        tf,
        excluded_fraction,
    ]);
    t
}

pub fn summary(c: &PerturbationCoefficients, fit: Option<&SecularFit>) -> String {
    let mut s = format!(
        "v = {:.4e}, xi/r0 = {:.4e}, ln(2 xi/r0) = {:.4}\n\
         Q_rel^(1) amplitude = {:.4e} hbar per unit P_rel\n\
         Q_rel^(2) rate = {:.4e} hbar omega per unit P_rel\n\
         tau_D (N^2 prefactor) = {:.4e}\n\
         tau_D (N dN prefactor) = {:.4e}\n",
        c.v,
        c.xi_over_r0,
        c.log_factor,
        c.q1_amplitude,
        c.q2_rate,
        c.tau_for(TauVariant::TotalNumber),
        c.tau_for(TauVariant::Imbalance)
    );
    if let Some(f) = fit {
        s.push_str(&format!(
            "pipeline: slope = {:.4e}, 2-lambda amplitude = {:.4e}, Gaussian tau = {:.4e}, fit {}\n",
            f.slope,
            f.oscillation_amplitude,
            f.tau_fit,
            if f.fit_ok { "ok" } else { "poor" }
        ));
    }
    s
}
