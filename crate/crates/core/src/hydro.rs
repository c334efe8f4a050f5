//! Thomas-Fermi (hydrodynamic) zero-order solutions for two condensates in a
//! common isotropic trap: density, breathing radius, quadratic phase, the
//! conjugate phase functions `phi = alpha / conj(psi)` and the coefficient
//! `u_tilde`.
//!
//! Phases follow `i hbar d(psi)/dt = H psi` with `psi ~ exp(i theta)`, so that
//! `theta = (A r^2 + B) / hbar` with `A = m r0_dot / (2 r0)` (velocity field
//! `r0_dot / r0 * r`) and `dB/dt = -15 N u0 / (8 pi r0^3)` (minus the local
//! chemical potential at the centre).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::ode::rk4_advance;
use crate::params::PhysicalParams;

/// `15 N / (8 pi r0^3) (1 - r^2 / r0^2)` inside the cloud, zero outside.
pub fn tf_density(r: f64, r0: f64, n_total: f64) -> f64 {
    if r >= r0 {
        0.0
    } else {
        15.0 * n_total / (8.0 * PI * r0.powi(3)) * (1.0 - r * r / (r0 * r0))
    }
}

/// Equilibrium radius `(15 N u0 / (4 pi m omega^2))^(1/5)`.
pub fn stationary_radius(params: &PhysicalParams) -> Result<f64> {
    if params.u0 <= 0.0 {
        return Err(Error::Domain(
            "Thomas-Fermi radius needs repulsive interactions (u0 > 0)".into(),
        ));
    }
    Ok(
        (15.0 * params.n_total * params.u0 / (4.0 * PI * params.mass * params.omega_mean_sq()))
            .powf(0.2),
    )
}

/// Right-hand side `omega^2 r0 - 15 N u0 / (4 pi m r0^4)` of the static radius equation.
pub fn radius_residual(params: &PhysicalParams, r0: f64) -> f64 {
    params.omega_mean_sq() * r0
        - 15.0 * params.n_total * params.u0 / (4.0 * PI * params.mass * r0.powi(4))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfState {
    pub r0: f64,
    pub r0_dot: f64,
}

/// Smallest radius tolerated before the breathing integration reports collapse.
const R0_FLOOR: f64 = 1e-8;

/// Integrates `r0'' + omega_t(t)^2 r0 - 15 N u0 / (4 pi m r0^4) = 0`.
pub fn evolve_r0(
    tf0: &TfState,
    omega_sq_t: impl Fn(f64) -> f64,
    params: &PhysicalParams,
    times: &[f64],
    max_step: f64,
) -> Result<Vec<TfState>> {
    if tf0.r0 <= 0.0 {
        return Err(Error::Domain("r0 must be positive".into()));
    }
    let k = 15.0 * params.n_total * params.u0 / (4.0 * PI * params.mass);
    let f = |t: f64, y: &[f64; 2]| [y[1], -omega_sq_t(t) * y[0] + k / y[0].powi(4)];
    let mut y = [tf0.r0, tf0.r0_dot];
    let mut t_prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        y = rk4_advance(&f, t_prev, t, &y, max_step);
        t_prev = t;
        if !(y[0] > R0_FLOOR) || !y[0].is_finite() {
            return Err(Error::Instability(format!(
                "Thomas-Fermi radius collapsed at t = {t}"
            )));
        }
        out.push(TfState {
            r0: y[0],
            r0_dot: y[1],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroPhases {
    /// Quadratic phase coefficient `A(t)`.
    pub a_coeff: f64,
    pub b_plus: f64,
    pub b_minus: f64,
}

impl HydroPhases {
    /// `(B_+ - B_-) / hbar`.
    pub fn delta_theta0(&self, hbar: f64) -> f64 {
        (self.b_plus - self.b_minus) / hbar
    }
}

/// `A = m r0_dot / (2 r0)` pointwise; `B_pm` accumulated by trapezoidal
/// quadrature of `dB/dt = -15 N u0 / (8 pi r0^3)` from `(b_plus0, b_minus0)`.
pub fn phase_coefficients(
    times: &[f64],
    trajectory: &[TfState],
    params: &PhysicalParams,
    b_plus0: f64,
    b_minus0: f64,
) -> Result<Vec<HydroPhases>> {
    if times.len() != trajectory.len() {
        return Err(Error::Domain(
            "times and trajectory differ in length".into(),
        ));
    }
    let b_rate = |r0: f64| -15.0 * params.n_total * params.u0 / (8.0 * PI * r0.powi(3));
    let mut out = Vec::with_capacity(times.len());
    let (mut bp, mut bm) = (b_plus0, b_minus0);
    for (i, s) in trajectory.iter().enumerate() {
        if i > 0 {
            let dt = times[i] - times[i - 1];
            let db = 0.5 * dt * (b_rate(trajectory[i - 1].r0) + b_rate(s.r0));
            bp += db;
            bm += db;
        }
        out.push(HydroPhases {
            a_coeff: params.mass * s.r0_dot / (2.0 * s.r0),
            b_plus: bp,
            b_minus: bm,
        });
    }
    Ok(out)
}

/// `alpha = (8 pi r0^3 / 3)^(-1)`.
pub fn alpha(r0: f64) -> f64 {
    3.0 / (8.0 * PI * r0.powi(3))
}

/// Healing length `(2 m^2 omega^2 r0 / hbar^2)^(-1/3)` with `omega^2` the mean squared frequency.
pub fn healing_length(params: &PhysicalParams, r0: f64) -> f64 {
    (2.0 * params.mass.powi(2) * params.omega_mean_sq() * r0 / params.hbar.powi(2)).powf(-1.0 / 3.0)
}

/// Zero-order (Thomas-Fermi) `psi_pm`, `phi_pm` and their normalisation data.
#[derive(Debug, Clone)]
pub struct ZeroOrderSolution {
    pub r0: f64,
    pub n_total: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    pub phases: HydroPhases,
    pub hbar: f64,
    pub alpha: f64,
    pub u_tilde0: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    /// `int (conj(phi_+) psi_+ + phi_- conj(psi_-))`, expected to equal 1.
    pub j_total: Complex64,
    pub psi_plus: RadialField,
    pub psi_minus: RadialField,
    /// `alpha / conj(psi_pm)`; set to zero where the density vanishes.
    pub phi_plus: RadialField,
    pub phi_minus: RadialField,
    /// Healing-length cutoff `r0 - xi` applied by divergent `phi phi` overlaps.
    pub cutoff_radius: f64,
}

impl ZeroOrderSolution {
    /// `psi_+^(0)(r)`.
    pub fn psi_plus_at(&self, r: f64) -> Complex64 {
        self.psi_at(r, self.n_plus, self.phases.b_plus)
    }

    pub fn psi_minus_at(&self, r: f64) -> Complex64 {
        self.psi_at(r, self.n_minus, self.phases.b_minus)
    }

    pub fn phi_plus_at(&self, r: f64) -> Complex64 {
        invert_conj(self.alpha, self.psi_plus_at(r))
    }

    pub fn phi_minus_at(&self, r: f64) -> Complex64 {
        invert_conj(self.alpha, self.psi_minus_at(r))
    }

    /// Total density `rho = rho_+ + rho_-` (Thomas-Fermi profile).
    pub fn density_at(&self, r: f64) -> f64 {
        tf_density(r, self.r0, self.n_total)
    }

    fn psi_at(&self, r: f64, n_comp: f64, b: f64) -> Complex64 {
        let rho = tf_density(r, self.r0, self.n_total);
        let theta = (self.phases.a_coeff * r * r + b) / self.hbar;
        Complex64::from_polar(n_comp.sqrt() / self.n_total * rho.sqrt(), theta)
    }

    /// Relative phase `(B_+ - B_-) / hbar`.
    pub fn delta_theta0(&self) -> f64 {
        self.phases.delta_theta0(self.hbar)
    }
}

fn invert_conj(alpha: f64, psi: Complex64) -> Complex64 {
    if psi.norm_sqr() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        alpha / psi.conj()
    }
}

/// Builds the zero-order solution on `grid` (default: Gauss-Legendre over the
/// Thomas-Fermi ball, on which `gamma_pm = 1/2` is reproduced exactly).
pub fn zero_order_solution(
    tf_state: &TfState,
    phases: &HydroPhases,
    n_plus: f64,
    n_minus: f64,
    params: &PhysicalParams,
    grid: Option<Arc<RadialGrid>>,
) -> Result<ZeroOrderSolution> {
    if !(n_plus > 0.0 && n_minus > 0.0) {
        return Err(Error::Domain(
            "N_+ and N_- must be positive: phi = alpha / conj(psi) diverges otherwise".into(),
        ));
    }
    if ((n_plus + n_minus) - params.n_total).abs() > 1e-9 * params.n_total {
        return Err(Error::Domain(format!(
            "N_+ + N_- = {} differs from N = {}",
            n_plus + n_minus,
            params.n_total
        )));
    }
    if tf_state.r0 <= 0.0 {
        return Err(Error::Domain("r0 must be positive".into()));
    }
    let r0 = tf_state.r0;
    let grid = match grid {
        Some(g) => g,
        None => RadialGrid::gauss_legendre(r0, 64)?,
    };
    let a = alpha(r0);
    let xi = healing_length(params, r0);
    let mut zo = ZeroOrderSolution {
        r0,
        n_total: params.n_total,
        n_plus,
        n_minus,
        phases: *phases,
        hbar: params.hbar,
        alpha: a,
        u_tilde0: 4.0 * params.u0 * a,
        gamma_plus: 0.0,
        gamma_minus: 0.0,
        j_total: Complex64::new(0.0, 0.0),
        psi_plus: RadialField::zeros(grid.clone()),
        psi_minus: RadialField::zeros(grid.clone()),
        phi_plus: RadialField::zeros(grid.clone()),
        phi_minus: RadialField::zeros(grid.clone()),
        cutoff_radius: (r0 - xi).max(0.0),
    };
    zo.psi_plus = RadialField::from_fn(grid.clone(), |r| zo.psi_plus_at(r));
    zo.psi_minus = RadialField::from_fn(grid.clone(), |r| zo.psi_minus_at(r));
    zo.phi_plus = RadialField::from_fn(grid.clone(), |r| zo.phi_plus_at(r));
    zo.phi_minus = RadialField::from_fn(grid.clone(), |r| zo.phi_minus_at(r));
    let j_plus = zo.phi_plus.inner(&zo.psi_plus)?;
    let j_minus = zo.phi_minus.inner(&zo.psi_minus)?;
    zo.gamma_plus = j_plus.re;
    zo.gamma_minus = j_minus.re;
    // int phi_-^* ... written in the mixed-conjugation form of the normalisation.
    let j_minus_mixed: Complex64 = grid
        .weights()
        .iter()
        .zip(zo.phi_minus.values().iter().zip(zo.psi_minus.values()))
        .map(|(w, (f, p))| f * p.conj() * *w)
        .sum();
    zo.j_total = j_plus + j_minus_mixed;
    Ok(zo)
}

/// A stationary mean-field state at atom number `n_total` with chemical potential `mu`.
#[derive(Debug, Clone)]
pub struct StationarySample {
    pub n_total: f64,
    pub psi_plus: RadialField,
    pub psi_minus: RadialField,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UTildeEstimate {
    pub centered: f64,
    pub forward: f64,
    pub backward: f64,
}

impl UTildeEstimate {
    /// Relative spread between the one-sided estimates.
    pub fn spread(&self) -> f64 {
        (self.forward - self.backward).abs() / self.centered.abs().max(f64::MIN_POSITIVE)
    }
}

/// Finite-difference step `max(1, 1e-3 N)` used for derivatives in `N`.
pub fn default_delta_n(n_total: f64) -> f64 {
    (1e-3 * n_total).max(1.0)
}

/// `u_tilde = -2 df/dt` with `f(t) = hbar Im int (psi_+^* d(psi_+)/dN + psi_-^* d(psi_-)/dN)`,
/// where each stationary sample evolves as `psi_N exp(-i mu_N t / hbar)`.
/// `samples` are ordered `[N - dN, N, N + dN]`.
pub fn compute_u_tilde_general(
    samples: &[StationarySample; 3],
    hbar: f64,
) -> Result<UTildeEstimate> {
    let [lo, mid, hi] = samples;
    let dn_lo = mid.n_total - lo.n_total;
    let dn_hi = hi.n_total - mid.n_total;
    if !(dn_lo > 0.0 && dn_hi > 0.0) {
        return Err(Error::Domain(
            "samples must be ordered by increasing N".into(),
        ));
    }
    // f is linear in t; sample it at two instants one unit apart.
    let tau = 1.0 / mid.mu.abs().max(1.0);
    let f_at = |a: &StationarySample, b: &StationarySample, dn: f64, t: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (pa, pb, pm) in [
            (&a.psi_plus, &b.psi_plus, &mid.psi_plus),
            (&a.psi_minus, &b.psi_minus, &mid.psi_minus),
        ] {
            if !(pa.same_grid(pb) && pa.same_grid(pm)) {
                return Err(Error::GridMismatch);
            }
            let ea = Complex64::from_polar(1.0, -a.mu * t / hbar);
            let eb = Complex64::from_polar(1.0, -b.mu * t / hbar);
            let em = Complex64::from_polar(1.0, -mid.mu * t / hbar);
            let w = pm.grid().weights();
            for j in 0..w.len() {
                let d = (pb.values()[j] * eb - pa.values()[j] * ea) / dn;
                acc += w[j] * ((pm.values()[j] * em).conj() * d).im;
            }
        }
        Ok(hbar * acc)
    };
    let rate = |a: &StationarySample, b: &StationarySample, dn: f64| -> Result<f64> {
        Ok(-2.0 * (f_at(a, b, dn, tau)? - f_at(a, b, dn, 0.0)?) / tau)
    };
    let est = UTildeEstimate {
        centered: rate(lo, hi, dn_lo + dn_hi)?,
        forward: rate(mid, hi, dn_hi)?,
        backward: rate(lo, mid, dn_lo)?,
    };
    if est.spread() > 0.05 {
        log::warn!(
            "u_tilde one-sided estimates disagree: forward {} backward {}",
            est.forward,
            est.backward
        );
    }
    Ok(est)
}
