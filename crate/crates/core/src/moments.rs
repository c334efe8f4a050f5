//! Linear dynamics of the collective fluctuation operators
//! `(P_tot, Q_tot, P_rel, Q_rel)` and propagation of their first and second moments.

use std::f64::consts::PI;

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::hydro::ZeroOrderSolution;
use crate::ode::rk4_advance;
use crate::params::PhysicalParams;
use crate::table::Table;

pub const P_TOT: usize = 0;
pub const Q_TOT: usize = 1;
pub const P_REL: usize = 2;
pub const Q_REL: usize = 3;

/// `(x|y) = int dV exp(-2 i lambda t) conj(x) y d^3r`.
pub fn overlap(
    bra: &RadialField,
    ket: &RadialField,
    params: &PhysicalParams,
    t: f64,
) -> Result<Complex64> {
    if !bra.same_grid(ket) {
        return Err(Error::GridMismatch);
    }
    let grid = bra.grid();
    let s: Complex64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(bra.values().iter().zip(ket.values()))
        .map(|((&r, &w), (x, y))| x.conj() * y * (params.delta_v(r) * w))
        .sum();
    Ok(s * rotation(params, t))
}

fn rotation(params: &PhysicalParams, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * params.lambda_coupling * t)
}

/// Overlap of two pointwise-defined fields over `[0, r_cut]` on a grid graded towards `r_pole`.
pub fn cutoff_overlap(
    bra: impl Fn(f64) -> Complex64,
    ket: impl Fn(f64) -> Complex64,
    params: &PhysicalParams,
    r_cut: f64,
    r_pole: f64,
    t: f64,
) -> Result<Complex64> {
    let grid = RadialGrid::log_graded(r_cut, r_pole, 400)?;
    let s = grid.integrate_complex_fn(|r| bra(r).conj() * ket(r) * params.delta_v(r));
    Ok(s * rotation(params, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapIntegrals {
    /// Time at which the `dV exp(-2 i lambda t)` overlaps are evaluated.
    pub time: f64,
    pub phi_psi: Complex64,
    pub psi_phi: Complex64,
    pub psi_psi: Complex64,
    /// Regularised at the healing-length cutoff.
    pub phi_phi: Complex64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub i_integral: f64,
    pub u_tilde: f64,
}

impl OverlapIntegrals {
    /// Zero-order (Thomas-Fermi) coefficients at time `t`.
    pub fn from_zero_order(
        zo: &ZeroOrderSolution,
        params: &PhysicalParams,
        t: f64,
    ) -> Result<Self> {
        let grid = zo.psi_plus.grid();
        let i_integral = grid
            .weights()
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let m = zo.psi_minus.values()[j] * zo.phi_minus.values()[j].conj();
                let p = zo.psi_plus.values()[j] * zo.phi_plus.values()[j].conj();
                m.re * p.re * w
            })
            .sum();
        let phi_phi = cutoff_overlap(
            |r| zo.phi_plus_at(r),
            |r| zo.phi_minus_at(r),
            params,
            zo.cutoff_radius,
            zo.r0,
            t,
        )?;
        Ok(OverlapIntegrals {
            time: t,
            phi_psi: overlap(&zo.phi_plus, &zo.psi_minus, params, t)?,
            psi_phi: overlap(&zo.psi_plus, &zo.phi_minus, params, t)?,
            psi_psi: overlap(&zo.psi_plus, &zo.psi_minus, params, t)?,
            phi_phi,
            gamma_plus: zo.gamma_plus,
            gamma_minus: zo.gamma_minus,
            i_integral,
            u_tilde: zo.u_tilde0,
        })
    }

    /// The same coefficients at another time: only the `exp(-2 i lambda t)` phase changes.
    pub fn at_time(&self, params: &PhysicalParams, t: f64) -> Self {
        let rot = rotation(params, t - self.time);
        OverlapIntegrals {
            time: t,
            phi_psi: self.phi_psi * rot,
            psi_phi: self.psi_phi * rot,
            psi_psi: self.psi_psi * rot,
            phi_phi: self.phi_phi * rot,
            ..*self
        }
    }
}

/// Placement of the `1 / (gamma_+ gamma_-)` prefactor in the `dQ_rel/dt` coefficient of `P_rel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// `(1/g)[N u~ - 2 N u0 I / g - Re(phi_+|phi_-) / g]`, `g = gamma_+ gamma_-`.
    AsWritten,
    /// `N u~ - 2 N u0 I / g - Re(phi_+|phi_-) / g` without the outer prefactor.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientMode {
    /// Coefficients carry their explicit `exp(-/+ 2 i lambda t)` phases.
    Instantaneous,
    /// Coefficients averaged over one period `pi / lambda`.
    CycleAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorMatrix {
    pub f: Matrix4<f64>,
}

pub fn assemble_generator(
    ov: &OverlapIntegrals,
    params: &PhysicalParams,
    grouping: Grouping,
) -> Result<GeneratorMatrix> {
    let (gp, gm) = (ov.gamma_plus, ov.gamma_minus);
    if !(gp > 0.0 && gm > 0.0) {
        return Err(Error::Domain(format!(
            "gamma_+ = {gp}, gamma_- = {gm} must be positive"
        )));
    }
    let hbar = params.hbar;
    let n = params.n_total;
    let g = gp * gm;
    let bracket = n * ov.u_tilde - 2.0 * n * params.u0 * ov.i_integral / g - ov.phi_phi.re / g;
    let mut f = Matrix4::zeros();
    f[(Q_TOT, P_TOT)] = n * ov.u_tilde;
    let damping = (ov.phi_psi.im / gp - ov.psi_phi.im / gm) / hbar;
    f[(P_REL, P_REL)] = damping;
    f[(P_REL, Q_REL)] = ov.psi_psi.re / (hbar * hbar);
    f[(Q_REL, P_REL)] = match grouping {
        Grouping::AsWritten => bracket / g,
        Grouping::Alternative => bracket,
    };
    f[(Q_REL, Q_REL)] = -damping;
    Ok(GeneratorMatrix { f })
}

/// Time-dependent generator built from coefficients known at one time.
pub fn generator_fn(
    base: OverlapIntegrals,
    params: PhysicalParams,
    grouping: Grouping,
    mode: CoefficientMode,
) -> Result<impl Fn(f64) -> Matrix4<f64>> {
    let averaged = match mode {
        CoefficientMode::Instantaneous => None,
        CoefficientMode::CycleAveraged => {
            let period = if params.lambda_coupling > 0.0 {
                PI / params.lambda_coupling
            } else {
                1.0
            };
            Some(cycle_average(
                |t| assemble_generator(&base.at_time(&params, t), &params, grouping).map(|g| g.f),
                period,
                64,
            )?)
        }
    };
    assemble_generator(&base, &params, grouping)?;
    Ok(move |t: f64| match averaged {
        Some(f) => f,
        None => {
            assemble_generator(&base.at_time(&params, t), &params, grouping)
                .expect("validated coefficients")
                .f
        }
    })
}

/// Mean of `f` over `n` equally spaced samples of one period (exact for harmonics below `n`).
pub fn cycle_average(
    f: impl Fn(f64) -> Result<Matrix4<f64>>,
    period: f64,
    n: usize,
) -> Result<Matrix4<f64>> {
    let mut acc = Matrix4::zeros();
    for k in 0..n {
        acc += f(period * k as f64 / n as f64)?;
    }
    Ok(acc / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub mean: Vector4<f64>,
    /// Symmetrised covariance `<{X_i, X_j}>/2 - <X_i><X_j>`.
    pub cov: Matrix4<f64>,
}

impl MomentState {
    /// Zero means, `Var(P) = 1` and `Var(Q) = hbar^2/4` for both pairs, no correlations.
    pub fn default_initial(hbar: f64) -> Self {
        let q = hbar * hbar / 4.0;
        MomentState {
            mean: Vector4::zeros(),
            cov: Matrix4::from_diagonal(&Vector4::new(1.0, q, 1.0, q)),
        }
    }

    pub fn with_p_rel_variance(mut self, var: f64) -> Self {
        self.cov[(P_REL, P_REL)] = var;
        self
    }

    /// Second moment `<Q_rel^2>`.
    pub fn q_rel_second_moment(&self) -> f64 {
        self.cov[(Q_REL, Q_REL)] + self.mean[Q_REL] * self.mean[Q_REL]
    }

    pub fn check(&self) -> Result<()> {
        if self
            .mean
            .iter()
            .chain(self.cov.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain("non-finite moments".into()));
        }
        let asym = (self.cov - self.cov.transpose()).abs().max();
        let scale = self.cov.abs().max().max(1e-300);
        if asym > 1e-12 * scale {
            return Err(Error::Domain("covariance is not symmetric".into()));
        }
        let trace = self.cov.trace();
        let min_eig = SymmetricEigen::new(self.cov).eigenvalues.min();
        if min_eig < -1e-10 * trace.abs().max(1e-300) {
            return Err(Error::Domain(format!(
                "covariance is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MomentState>,
}

impl MomentTrajectory {
    pub fn to_table(&self, hbar: f64) -> Table {
        let names = ["p_tot", "q_tot", "p_rel", "q_rel"];
        let units = ["atoms", "hbar", "atoms", "hbar"];
        let mut cols: Vec<(String, String)> = vec![("t".into(), "1/omega_m".into())];
        for (n, u) in names.iter().zip(units) {
            cols.push((format!("mean_{n}"), u.into()));
        }
        for (n, u) in names.iter().zip(units) {
            cols.push((format!("var_{n}"), format!("{u}^2")));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                cols.push((
                    format!("cov_{}_{}", names[i], names[j]),
                    format!("{}*{}", units[i], units[j]),
                ));
            }
        }
        cols.push(("correlation_decay".into(), "1".into()));
        let refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let mut table = Table::new(&refs);
        let decay = correlation_decay(self, hbar);
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![*t];
            row.extend(s.mean.iter());
            row.extend((0..4).map(|i| s.cov[(i, i)]));
            for i in 0..4 {
                for j in i + 1..4 {
                    row.push(s.cov[(i, j)]);
                }
            }
            row.push(decay[k]);
            table.push(row);
        }
        table
    }
}

/// Largest step for which one period `pi / lambda` gets at least 200 steps.
pub fn max_step_for(lambda: f64) -> f64 {
    if lambda > 0.0 {
        PI / (200.0 * lambda)
    } else {
        0.01
    }
}

/// Integrates `m' = F m`, `S' = F S + S F^T` and records the state at each of `times`.
pub fn propagate_moments(
    m0: &MomentState,
    generator: impl Fn(f64) -> Matrix4<f64>,
    times: &[f64],
    max_step: f64,
) -> Result<MomentTrajectory> {
    m0.check()?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("times must be nondecreasing".into()));
    }
    let pack = |s: &MomentState| {
        let mut y = [0.0; 20];
        y[..4].copy_from_slice(s.mean.as_slice());
        y[4..].copy_from_slice(s.cov.as_slice());
        y
    };
    let unpack = |y: &[f64; 20]| {
        let cov = Matrix4::from_column_slice(&y[4..]);
        MomentState {
            mean: Vector4::from_column_slice(&y[..4]),
            cov: (cov + cov.transpose()) * 0.5,
        }
    };
    let rhs = |t: f64, y: &[f64; 20]| {
        let f = generator(t);
        let m = Vector4::from_column_slice(&y[..4]);
        let s = Matrix4::from_column_slice(&y[4..]);
        let dm = f * m;
        let ds = f * s + s * f.transpose();
        let mut out = [0.0; 20];
        out[..4].copy_from_slice(dm.as_slice());
        out[4..].copy_from_slice(ds.as_slice());
        out
    };
    let mut y = pack(m0);
    let mut t = times.first().copied().unwrap_or(0.0);
    let mut states = Vec::with_capacity(times.len());
    for &tk in times {
        y = rk4_advance(&rhs, t, tk, &y, max_step);
        t = tk;
        let s = unpack(&y);
        s.check()?;
        states.push(s);
    }
    Ok(MomentTrajectory {
        times: times.to_vec(),
        states,
    })
}

/// `exp(-<Q_rel^2>(t) / hbar^2)` normalised to its value at the first sample.
pub fn correlation_decay(traj: &MomentTrajectory, hbar: f64) -> Vec<f64> {
    let q0 = traj
        .states
        .first()
        .map(|s| s.q_rel_second_moment())
        .unwrap_or(0.0);
    traj.states
        .iter()
        .map(|s| (-(s.q_rel_second_moment() - q0) / (hbar * hbar)).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::{stationary_radius, zero_order_solution, HydroPhases, TfState};

    fn zero_order(p: &PhysicalParams, n_plus: f64) -> ZeroOrderSolution {
        let r0 = stationary_radius(p).unwrap();
        let phases = HydroPhases {
            a_coeff: 0.0,
            b_plus: 0.3,
            b_minus: 0.0,
        };
        zero_order_solution(
            &TfState { r0, r0_dot: 0.0 },
            &phases,
            n_plus,
            p.n_total - n_plus,
            p,
            None,
        )
        .unwrap()
    }

    fn params(dw2: f64) -> PhysicalParams {
        PhysicalParams::dimensionless(1e5, 1.0, 1.0, 0.06, 5.0)
            .unwrap()
            .with_delta_omega_sq(dw2)
            .unwrap()
    }

    #[test]
    fn symmetric_generator_has_single_entry() {
        let p = params(0.0);
        let zo = zero_order(&p, 5e4);
        let ov = OverlapIntegrals::from_zero_order(&zo, &p, 0.37).unwrap();
        assert!((ov.gamma_plus + ov.gamma_minus - 1.0).abs() < 1e-6);
        let f = assemble_generator(&ov, &p, Grouping::AsWritten).unwrap().f;
        let expected = p.n_total * zo.u_tilde0;
        for i in 0..4 {
            for j in 0..4 {
                let v = f[(i, j)];
                if (i, j) == (Q_TOT, P_TOT) {
                    assert!((v - expected).abs() < 1e-12 * expected);
                } else {
                    assert!(v.abs() < 1e-6 * expected, "F[{i},{j}] = {v}");
                }
            }
        }
    }

    #[test]
    fn cross_blocks_vanish_with_asymmetry() {
        let p = params(0.05);
        let zo = zero_order(&p, 6e4);
        let f = assemble_generator(
            &OverlapIntegrals::from_zero_order(&zo, &p, 0.1).unwrap(),
            &p,
            Grouping::AsWritten,
        )
        .unwrap()
        .f;
        for &(i, j) in &[
            (0, 2),
            (0, 3),
            (1, 2),
            (1, 3),
            (2, 0),
            (2, 1),
            (3, 0),
            (3, 1),
        ] {
            assert_eq!(f[(i, j)], 0.0);
        }
        assert!(f.row(P_TOT).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn phi_psi_matches_closed_form_and_flips_sign() {
        let p = params(0.05);
        let zo = zero_order(&p, 6e4);
        let t = 0.21;
        let ov = overlap(&zo.phi_plus, &zo.psi_minus, &p, t).unwrap();
        // phi_+ conj * psi_- = alpha sqrt(N_-/N_+) exp(-i dtheta0) over the ball.
        let ball = crate::grid::RadialGrid::gauss_legendre(zo.r0, 64).unwrap();
        let int_dv = ball.integrate_fn(|r| p.delta_v(r));
        let expected = Complex64::from_polar(
            zo.alpha * (zo.n_minus / zo.n_plus).sqrt() * int_dv,
            -zo.delta_theta0() - 2.0 * p.lambda_coupling * t,
        );
        assert!((ov - expected).norm() < 1e-10 * expected.norm());
        let later = overlap(
            &zo.phi_plus,
            &zo.psi_minus,
            &p,
            t + PI / (2.0 * p.lambda_coupling),
        )
        .unwrap();
        assert!((later.im + ov.im).abs() < 1e-10 * ov.norm());
    }

    #[test]
    fn overlap_conjugation_identity() {
        let p = params(0.05);
        let zo = zero_order(&p, 6e4);
        let a = overlap(&zo.psi_plus, &zo.phi_minus, &p, 0.0).unwrap();
        let b = overlap(&zo.phi_minus, &zo.psi_plus, &p, 0.0).unwrap();
        assert!((a.conj() - b).norm() < 1e-14 * a.norm());
        assert_eq!(
            overlap(&zo.psi_plus, &zo.psi_minus, &params(0.0), 1.0)
                .unwrap()
                .norm(),
            0.0
        );
    }

    #[test]
    fn groupings_differ_by_gamma_product() {
        let p = params(0.05);
        let zo = zero_order(&p, 6e4);
        let ov = OverlapIntegrals::from_zero_order(&zo, &p, 0.0).unwrap();
        let a = assemble_generator(&ov, &p, Grouping::AsWritten).unwrap().f[(Q_REL, P_REL)];
        let b = assemble_generator(&ov, &p, Grouping::Alternative)
            .unwrap()
            .f[(Q_REL, P_REL)];
        assert!((a * ov.gamma_plus * ov.gamma_minus - b).abs() < 1e-12 * b.abs());
    }

    #[test]
    fn zero_generator_is_identity_flow() {
        let m0 = MomentState::default_initial(1.0);
        let tr = propagate_moments(&m0, |_| Matrix4::zeros(), &[0.0, 1.0, 5.0], 0.1).unwrap();
        assert!(tr.states.iter().all(|s| *s == m0));
    }

    #[test]
    fn matches_matrix_exponential_for_piecewise_constant_generator() {
        let f1 = Matrix4::new(
            0.0, 0.0, 0.0, 0.0, 1.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, -0.4, 0.0, 0.0, 0.7, -0.2,
        );
        let f2 = Matrix4::new(
            0.0, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0, -0.1, 0.9, 0.0, 0.0, 0.3, 0.1,
        );
        let mut m0 = MomentState::default_initial(1.0);
        m0.mean = Vector4::new(0.3, -0.2, 0.5, 0.1);
        m0.cov[(P_REL, Q_REL)] = 0.1;
        m0.cov[(Q_REL, P_REL)] = 0.1;
        let mid = propagate_moments(&m0, |_| f1, &[0.0, 1.0], 1e-3)
            .unwrap()
            .states[1];
        let s = propagate_moments(&mid, |_| f2, &[1.0, 2.5], 1e-3)
            .unwrap()
            .states[1];
        let e1 = (f1 * 1.0).exp();
        let e2 = (f2 * 1.5).exp();
        let m_exact = e2 * e1 * m0.mean;
        let s_exact = e2 * e1 * m0.cov * e1.transpose() * e2.transpose();
        assert!((s.mean - m_exact).norm() <= 1e-8 * m_exact.norm());
        assert!((s.cov - s_exact).norm() <= 1e-8 * s_exact.norm());
    }

    #[test]
    fn non_psd_start_is_rejected() {
        let mut m0 = MomentState::default_initial(1.0);
        m0.cov[(Q_REL, Q_REL)] = -1.0;
        assert!(propagate_moments(&m0, |_| Matrix4::zeros(), &[0.0], 0.1).is_err());
    }

    #[test]
    fn correlation_is_half_at_ln2() {
        let mut s1 = MomentState::default_initial(1.0);
        s1.cov[(Q_REL, Q_REL)] = 0.0;
        let mut s2 = s1;
        s2.cov[(Q_REL, Q_REL)] = 2f64.ln();
        let tr = MomentTrajectory {
            times: vec![0.0, 1.0],
            states: vec![s1, s2],
        };
        let c = correlation_decay(&tr, 1.0);
        assert!((c[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decoupled_blocks_do_not_talk() {
        let p = params(0.05);
        let zo = zero_order(&p, 6e4);
        let ov = OverlapIntegrals::from_zero_order(&zo, &p, 0.0).unwrap();
        let gen = generator_fn(ov, p, Grouping::AsWritten, CoefficientMode::Instantaneous).unwrap();
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.05).collect();
        let m0 = MomentState::default_initial(1.0);
        let mut m1 = m0;
        m1.mean[P_TOT] = 3.0;
        m1.cov[(Q_TOT, Q_TOT)] = 2.0;
        let a = propagate_moments(&m0, &gen, &times, max_step_for(p.lambda_coupling)).unwrap();
        let b = propagate_moments(&m1, &gen, &times, max_step_for(p.lambda_coupling)).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(
                x.cov.fixed_view::<2, 2>(2, 2),
                y.cov.fixed_view::<2, 2>(2, 2)
            );
            assert_eq!(x.mean[Q_REL], y.mean[Q_REL]);
        }
    }

    #[test]
    fn trajectory_table_has_all_columns() {
        let tr = propagate_moments(
            &MomentState::default_initial(1.0),
            |_| Matrix4::zeros(),
            &[0.0, 1.0],
            0.1,
        )
        .unwrap();
        let t = tr.to_table(1.0);
        assert_eq!(t.columns.len(), 16);
        assert!(t.column("correlation_decay").is_some());
    }
}
