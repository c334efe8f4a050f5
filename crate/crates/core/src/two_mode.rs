//! Classical two-mode Josephson dynamics of the population imbalance
//! `delta_n = N_A - N_B` and the relative phase `delta_phi = Phi_A - Phi_B`.
//!
//! The conserved quantity is `C = 2 hbar lambda sqrt(N^2 - delta_n^2) cos(delta_phi)`.
//! Equations of motion are oriented to agree with the coupled Gross-Pitaevskii
//! equations carrying a `-hbar lambda` exchange term:
//!
//! ```text
//! d(delta_n)/dt   = -(1/hbar) dC/d(delta_phi) =  2 lambda sqrt(N^2 - delta_n^2) sin(delta_phi)
//! d(delta_phi)/dt =  (1/hbar) dC/d(delta_n)   = -2 lambda delta_n cos(delta_phi) / sqrt(N^2 - delta_n^2)
//! ```
//!
//! In Bloch-vector language `(K, S, delta_n)` with `K = sqrt(N^2 - dn^2) cos`,
//! `S = sqrt(N^2 - dn^2) sin` this is a rigid rotation about the `K` axis at
//! angular frequency `2 lambda`, which is where the closed forms come from.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ode::rk4_advance;
use crate::params::PhysicalParams;
use crate::table::Table;

/// Relative clearance kept from the singular manifold `|delta_n| = N`.
const EDGE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeState {
    pub delta_n: f64,
    /// Unwrapped relative phase in radians.
    pub delta_phi: f64,
}

impl TwoModeState {
    pub fn new(delta_n: f64, delta_phi: f64) -> Self {
        TwoModeState { delta_n, delta_phi }
    }

    /// Phase reduced to `(-pi, pi]`.
    pub fn wrapped_phase(&self) -> f64 {
        wrap_angle(self.delta_phi)
    }

    fn check(&self, n: f64) -> Result<()> {
        if !(self.delta_n.is_finite() && self.delta_phi.is_finite()) {
            return Err(Error::Domain("two-mode state is not finite".into()));
        }
        if self.delta_n.abs() > n {
            return Err(Error::Domain(format!(
                "|delta_n| = {} exceeds N = {n}",
                self.delta_n.abs()
            )));
        }
        Ok(())
    }
}

pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TwoModeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<TwoModeState>,
    pub c_values: Vec<f64>,
}

impl TwoModeTrajectory {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            ("t", "1/omega_m"),
            ("delta_n", "atoms"),
            ("delta_phi", "rad"),
            ("c_value", "hbar omega_m"),
        ]);
        for ((time, s), c) in self.times.iter().zip(&self.states).zip(&self.c_values) {
            t.push(vec![*time, s.delta_n, s.delta_phi, *c]);
        }
        t
    }
}

/// `C = 2 hbar lambda sqrt(N^2 - delta_n^2) cos(delta_phi)`.
pub fn hamiltonian_c(state: &TwoModeState, params: &PhysicalParams) -> Result<f64> {
    state.check(params.n_total)?;
    let n = params.n_total;
    Ok(2.0
        * params.hbar
        * params.lambda_coupling
        * (n * n - state.delta_n * state.delta_n).max(0.0).sqrt()
        * state.delta_phi.cos())
}

/// Time derivative of `(delta_n, delta_phi)`.
pub fn rates(state: &TwoModeState, params: &PhysicalParams) -> (f64, f64) {
    let n = params.n_total;
    let lam = params.lambda_coupling;
    let limit = n * (1.0 - EDGE_CLAMP);
    let dn = state.delta_n.clamp(-limit, limit);
    let root = (n * n - dn * dn).sqrt();
    let (s, c) = state.delta_phi.sin_cos();
    (2.0 * lam * root * s, -2.0 * lam * dn * c / root)
}

/// Number of RK4 steps per Josephson period `pi / lambda`.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 4000;

/// Integrates the two-mode equations with a fixed RK4 step of at most
/// `(pi / lambda) / steps_per_period` and records the state at `times`.
pub fn evolve_two_mode(
    state0: &TwoModeState,
    params: &PhysicalParams,
    times: &[f64],
    steps_per_period: usize,
) -> Result<TwoModeTrajectory> {
    state0.check(params.n_total)?;
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    if steps_per_period < 200 {
        return Err(Error::param(
            "steps_per_period",
            "need at least 200 steps per Josephson period",
        ));
    }
    let lam = params.lambda_coupling;
    let max_step = if lam > 0.0 {
        PI / lam / steps_per_period as f64
    } else {
        f64::INFINITY
    };
    let f = |_t: f64, y: &[f64; 2]| {
        let (a, b) = rates(&TwoModeState::new(y[0], y[1]), params);
        [a, b]
    };
    let mut traj = TwoModeTrajectory::default();
    let mut y = [state0.delta_n, state0.delta_phi];
    let mut t_prev = times.first().copied().unwrap_or(0.0);
    if t_prev != 0.0 {
        y = rk4_advance(&f, 0.0, t_prev, &y, max_step);
    }
    for &t in times {
        if lam > 0.0 {
            y = rk4_advance(&f, t_prev, t, &y, max_step);
        }
        t_prev = t;
        let limit = params.n_total;
        y[0] = y[0].clamp(-limit, limit);
        let s = TwoModeState::new(y[0], y[1]);
        traj.times.push(t);
        traj.c_values.push(hamiltonian_c(&s, params)?);
        traj.states.push(s);
    }
    Ok(traj)
}

/// Oscillation amplitude of `delta_n`, from the conserved `C`.
pub fn amplitude_a(state0: &TwoModeState, params: &PhysicalParams) -> Result<f64> {
    if params.lambda_coupling <= 0.0 {
        return Err(Error::Singular("amplitude needs lambda > 0".into()));
    }
    let c = hamiltonian_c(state0, params)?;
    let n = params.n_total;
    let k = c / (2.0 * params.hbar * params.lambda_coupling);
    Ok((n * n - k * k).max(0.0).sqrt())
}

/// Equivalent amplitude `sqrt(N^2 sin^2 dphi + dn^2 cos^2 dphi)` at the initial state.
pub fn amplitude_a_direct(state0: &TwoModeState, params: &PhysicalParams) -> f64 {
    let n = params.n_total;
    let (s, c) = state0.delta_phi.sin_cos();
    (n * n * s * s + state0.delta_n * state0.delta_n * c * c).sqrt()
}

/// Initial phase `Phi_N0` of `delta_n(t) = A cos(2 lambda t + Phi_N0)`.
///
/// `|Phi_N0| = arccos(delta_n(0) / A)`; the sign makes `d(delta_n)/dt` at
/// `t = 0` equal the Hamilton rate at the initial state.
pub fn initial_phase(state0: &TwoModeState, params: &PhysicalParams) -> Result<f64> {
    let a = amplitude_a(state0, params)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let (rate, _) = rates(state0, params);
    let magnitude = (state0.delta_n / a).clamp(-1.0, 1.0).acos();
    // d/dt [A cos(2 lambda t + phi)] at 0 is -2 lambda A sin(phi).
    Ok(if rate > 0.0 { -magnitude } else { magnitude })
}

pub fn closed_form_delta_n(state0: &TwoModeState, params: &PhysicalParams, t: f64) -> Result<f64> {
    let a = amplitude_a(state0, params)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let phi0 = initial_phase(state0, params)?;
    Ok(a * (2.0 * params.lambda_coupling * t + phi0).cos())
}

/// Right-hand side of `tan(delta_phi(t) - delta_phi(0)) = ...`, expressed
/// through `A`, `C` and `Phi_N0`:
///
/// `x (sin Phi_N0 - sin(2 lambda t + Phi_N0)) / (1 + x^2 sin(2 lambda t + Phi_N0) sin Phi_N0)`
/// with `x = 2 hbar lambda A / C`.
pub fn tan_phase_shift(state0: &TwoModeState, params: &PhysicalParams, t: f64) -> Result<f64> {
    let (num, den) = phase_shift_components(state0, params, t)?;
    Ok(num / den)
}

fn phase_shift_components(
    state0: &TwoModeState,
    params: &PhysicalParams,
    t: f64,
) -> Result<(f64, f64)> {
    let c = hamiltonian_c(state0, params)?;
    let scale = 2.0 * params.hbar * params.lambda_coupling * params.n_total;
    if c.abs() <= 1e-12 * scale {
        return Err(Error::Singular(
            "C = 0: relative phase closed form is singular, use evolve_two_mode".into(),
        ));
    }
    let lam = params.lambda_coupling;
    let a = amplitude_a(state0, params)?;
    let phi0 = initial_phase(state0, params)?;
    // Bloch components: K = C / (2 hbar lambda) constant, S(t) = -A sin(2 lambda t + phi0).
    let k = c / (2.0 * params.hbar * lam);
    let s0 = -a * phi0.sin();
    let s = -a * (2.0 * lam * t + phi0).sin();
    Ok((k * (s - s0), k * k + s * s0))
}

/// Closed-form `delta_phi(t)`, continuous in `t` and unwrapped from `delta_phi(0)`.
pub fn closed_form_phase(state0: &TwoModeState, params: &PhysicalParams, t: f64) -> Result<f64> {
    let (num, den) = phase_shift_components(state0, params, t)?;
    Ok(state0.delta_phi + num.atan2(den))
}
