//! Coupled Gross-Pitaevskii equations on a spherically symmetric grid.
//!
//! Both the A/B basis and the rotating `+/-` basis are supported. A step is
//! Strang-split: half kinetic step, half local step, exact 2x2 coupling
//! rotation, half local step, half kinetic step (A/B); in the `+/-` basis the
//! local 2x2 Hermitian block including `dV exp(-2 i lambda t)` is exponentiated
//! exactly at mid-step. The kinetic step acts on `u = r psi` with
//! Crank-Nicolson and Dirichlet walls at `r = 0` and `r = r_max`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{field_norm, GridKind, RadialField, RadialGrid};
use crate::hydro::{stationary_radius, tf_density, StationarySample};
use crate::params::PhysicalParams;
use crate::table::Table;

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `(psi_A, psi_B)`.
    Ab,
    /// `(psi_+, psi_-)`.
    PlusMinus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledField {
    pub first: RadialField,
    pub second: RadialField,
    pub basis: Basis,
    pub time: f64,
}

impl CoupledField {
    pub fn new(first: RadialField, second: RadialField, basis: Basis, time: f64) -> Result<Self> {
        if !first.same_grid(&second) {
            return Err(Error::GridMismatch);
        }
        if first.grid().kind() != GridKind::UniformSimpson {
            return Err(Error::Domain(
                "the solver needs a uniform radial grid".into(),
            ));
        }
        Ok(CoupledField {
            first,
            second,
            basis,
            time,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.first.grid()
    }

    /// `int (|first|^2 + |second|^2) N`.
    pub fn total_number(&self, n_total: f64) -> f64 {
        field_norm(&self.first, n_total) + field_norm(&self.second, n_total)
    }

    pub fn snapshot_table(&self) -> Table {
        let (a, b) = match self.basis {
            Basis::Ab => ("psi_a", "psi_b"),
            Basis::PlusMinus => ("psi_plus", "psi_minus"),
        };
        let names = [
            ("r".to_string(), "a_ho"),
            (format!("re_{a}"), "a_ho^-3/2"),
            (format!("im_{a}"), "a_ho^-3/2"),
            (format!("re_{b}"), "a_ho^-3/2"),
            (format!("im_{b}"), "a_ho^-3/2"),
        ];
        let cols: Vec<(&str, &str)> = names.iter().map(|(n, u)| (n.as_str(), *u)).collect();
        let mut t = Table::new(&cols);
        for (j, &r) in self.grid().nodes().iter().enumerate() {
            let (x, y) = (self.first.values()[j], self.second.values()[j]);
            t.push(vec![r, x.re, x.im, y.re, y.im]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Strang splitting with a Crank-Nicolson kinetic step.
    SplitStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Upper bound for `dt * max|V + u0 rho| / hbar`.
    pub max_phase_per_step: f64,
    pub max_ground_state_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            scheme: Scheme::SplitStep,
            max_phase_per_step: 1.0,
            max_ground_state_iterations: 200_000,
        }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Self {
        SolverConfig {
            dt,
            ..Default::default()
        }
    }

    /// Checks `dt > 0` and that the largest local energy does not wrap the phase in one step.
    pub fn validate(&self, state: &CoupledField, params: &PhysicalParams) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        let grid = state.grid();
        let mut e_max: f64 = 0.0;
        for (j, &r) in grid.nodes().iter().enumerate() {
            let rho = params.n_total
                * (state.first.values()[j].norm_sqr() + state.second.values()[j].norm_sqr());
            let v = params.v_a(r).max(params.v_b(r));
            e_max = e_max.max(v + params.u0.abs() * rho);
        }
        let phase = self.dt * e_max / params.hbar;
        if phase > self.max_phase_per_step {
            return Err(Error::param(
                "dt",
                format!("dt * max energy / hbar = {phase:.3} is too large; reduce dt"),
            ));
        }
        Ok(())
    }
}

/// Crank-Nicolson step of `i hbar du/dt = -(hbar^2 / 2m) u''` (or its
/// imaginary-time analogue) on the interior nodes, then refresh `psi(0)`.
fn kinetic_step(field: &mut RadialField, params: &PhysicalParams, tau: f64, imaginary: bool) {
    let grid = field.grid().clone();
    let h = grid.spacing().expect("uniform grid");
    let nodes = grid.nodes();
    let n = nodes.len();
    if n < 4 {
        return;
    }
    let m = n - 2;
    // T = kappa * tridiag(-1, 2, -1), kappa = hbar^2 / (2 m h^2).
    let kappa = params.hbar * params.hbar / (2.0 * params.mass * h * h);
    // Propagator factor z: real time z = i tau / (2 hbar), imaginary time z = tau / (2 hbar).
    let z = if imaginary {
        C64::new(tau / (2.0 * params.hbar), 0.0)
    } else {
        C64::new(0.0, tau / (2.0 * params.hbar))
    };
    let diag_l = C64::new(1.0, 0.0) + z * 2.0 * kappa;
    let off_l = -z * kappa;
    let diag_r = C64::new(1.0, 0.0) - z * 2.0 * kappa;
    let off_r = z * kappa;

    let vals = field.values_mut();
    let u: Vec<C64> = (0..n).map(|j| vals[j] * nodes[j]).collect();
    let mut rhs = vec![C64::new(0.0, 0.0); m];
    for i in 0..m {
        let j = i + 1;
        let left = if j >= 2 { u[j - 1] } else { C64::new(0.0, 0.0) };
        let right = if j < n - 2 {
            u[j + 1]
        } else {
            C64::new(0.0, 0.0)
        };
        rhs[i] = diag_r * u[j] + off_r * (left + right);
    }
    // Thomas algorithm for the constant-coefficient tridiagonal system.
    let mut c_prime = vec![C64::new(0.0, 0.0); m];
    let mut d_prime = vec![C64::new(0.0, 0.0); m];
    c_prime[0] = off_l / diag_l;
    d_prime[0] = rhs[0] / diag_l;
    for i in 1..m {
        let denom = diag_l - off_l * c_prime[i - 1];
        c_prime[i] = off_l / denom;
        d_prime[i] = (rhs[i] - off_l * d_prime[i - 1]) / denom;
    }
    let mut sol = vec![C64::new(0.0, 0.0); m];
    sol[m - 1] = d_prime[m - 1];
    for i in (0..m - 1).rev() {
        sol[i] = d_prime[i] - c_prime[i] * sol[i + 1];
    }
    for i in 0..m {
        vals[i + 1] = sol[i] / nodes[i + 1];
    }
    vals[n - 1] = C64::new(0.0, 0.0);
    // psi is even in r: psi(h) ~ psi(0) + c h^2, psi(2h) ~ psi(0) + 4 c h^2.
    vals[0] = (vals[1] * 4.0 - vals[2]) / 3.0;
}

fn density_at(state: &CoupledField, params: &PhysicalParams, j: usize) -> f64 {
    params.n_total * (state.first.values()[j].norm_sqr() + state.second.values()[j].norm_sqr())
}

/// Diagonal potential + mean-field phase for `tau` in the A/B basis.
fn local_ab(state: &mut CoupledField, params: &PhysicalParams, tau: f64, imaginary: bool) {
    let nodes = state.grid().clone();
    for (j, &r) in nodes.nodes().iter().enumerate() {
        let rho = density_at(state, params, j);
        let ea = params.v_a(r) + params.u0 * rho;
        let eb = params.v_b(r) + params.u0 * rho;
        let (fa, fb) = if imaginary {
            (
                C64::new((-ea * tau / params.hbar).exp(), 0.0),
                C64::new((-eb * tau / params.hbar).exp(), 0.0),
            )
        } else {
            (
                C64::from_polar(1.0, -ea * tau / params.hbar),
                C64::from_polar(1.0, -eb * tau / params.hbar),
            )
        };
        state.first.values_mut()[j] *= fa;
        state.second.values_mut()[j] *= fb;
    }
}

/// Exact `exp(-i tau H_c / hbar)` for `H_c = -hbar lambda sigma_x`.
fn coupling_ab(state: &mut CoupledField, params: &PhysicalParams, tau: f64, imaginary: bool) {
    let theta = params.lambda_coupling * tau;
    let (c, s) = if imaginary {
        (C64::new(theta.cosh(), 0.0), C64::new(theta.sinh(), 0.0))
    } else {
        (C64::new(theta.cos(), 0.0), C64::new(0.0, theta.sin()))
    };
    let n = state.first.values().len();
    for j in 0..n {
        let a = state.first.values()[j];
        let b = state.second.values()[j];
        state.first.values_mut()[j] = c * a + s * b;
        state.second.values_mut()[j] = s * a + c * b;
    }
}

/// Exact local step in the `+/-` basis: `H = (V_m + u0 rho) I + [[0, dVt], [conj(dVt), 0]]`.
fn local_pm(
    state: &mut CoupledField,
    params: &PhysicalParams,
    tau: f64,
    t_mid: f64,
    imaginary: bool,
) {
    let grid = state.grid().clone();
    let rot = C64::from_polar(1.0, -2.0 * params.lambda_coupling * t_mid);
    for (j, &r) in grid.nodes().iter().enumerate() {
        let rho = density_at(state, params, j);
        let d = params.v_mean(r) + params.u0 * rho;
        let dvt = if imaginary {
            C64::new(params.delta_v(r), 0.0)
        } else {
            params.delta_v(r) * rot
        };
        let g = dvt.norm();
        let (p, m) = (state.first.values()[j], state.second.values()[j]);
        let (np, nm) = if imaginary {
            let scale = (-d * tau / params.hbar).exp();
            let th = g * tau / params.hbar;
            let (ch, sh_over) = (th.cosh(), if g > 0.0 { th.sinh() / g } else { 0.0 });
            (
                (p * ch - dvt * m * sh_over) * scale,
                (m * ch - dvt.conj() * p * sh_over) * scale,
            )
        } else {
            let phase = C64::from_polar(1.0, -d * tau / params.hbar);
            let th = g * tau / params.hbar;
            let (co, si_over) = (th.cos(), if g > 0.0 { th.sin() / g } else { 0.0 });
            let i = C64::i();
            (
                (p * co - i * dvt * m * si_over) * phase,
                (m * co - i * dvt.conj() * p * si_over) * phase,
            )
        };
        state.first.values_mut()[j] = np;
        state.second.values_mut()[j] = nm;
    }
}

fn split_step(state: &mut CoupledField, params: &PhysicalParams, dt: f64, imaginary: bool) {
    kinetic_step(&mut state.first, params, 0.5 * dt, imaginary);
    kinetic_step(&mut state.second, params, 0.5 * dt, imaginary);
    match state.basis {
        Basis::Ab => {
            local_ab(state, params, 0.5 * dt, imaginary);
            coupling_ab(state, params, dt, imaginary);
            local_ab(state, params, 0.5 * dt, imaginary);
        }
        Basis::PlusMinus => {
            let t_mid = state.time + 0.5 * dt;
            local_pm(state, params, dt, t_mid, imaginary);
        }
    }
    kinetic_step(&mut state.first, params, 0.5 * dt, imaginary);
    kinetic_step(&mut state.second, params, 0.5 * dt, imaginary);
    if !imaginary {
        state.time += dt;
    }
}

/// One real-time step of the A/B equations.
pub fn step_ab(
    state: &CoupledField,
    params: &PhysicalParams,
    config: &SolverConfig,
) -> Result<CoupledField> {
    if state.basis != Basis::Ab {
        return Err(Error::Domain("step_ab needs an A/B state".into()));
    }
    let mut s = state.clone();
    split_step(&mut s, params, config.dt, false);
    Ok(s)
}

/// One real-time step of the `+/-` equations.
pub fn step_pm(
    state: &CoupledField,
    params: &PhysicalParams,
    config: &SolverConfig,
) -> Result<CoupledField> {
    if state.basis != Basis::PlusMinus {
        return Err(Error::Domain("step_pm needs a +/- state".into()));
    }
    let mut s = state.clone();
    split_step(&mut s, params, config.dt, false);
    Ok(s)
}

/// Takes `n_steps` steps in the state's basis, checking norm drift every 1000 steps.
/// `observe` is called on the initial state and after every `record_every` steps.
pub fn evolve(
    state: &CoupledField,
    params: &PhysicalParams,
    config: &SolverConfig,
    n_steps: usize,
    record_every: usize,
    mut observe: impl FnMut(&CoupledField),
) -> Result<CoupledField> {
    config.validate(state, params)?;
    let mut s = state.clone();
    let n0 = lattice_norm(&s);
    let mut n_ref = n0;
    observe(&s);
    for k in 1..=n_steps {
        split_step(&mut s, params, config.dt, false);
        if k % 1000 == 0 {
            let n_now = lattice_norm(&s);
            if (n_now - n_ref).abs() > 1e-6 * n0 || !n_now.is_finite() {
                return Err(Error::Instability(format!(
                    "norm drift {:e} over 1000 steps at t = {}; reduce dt",
                    (n_now - n_ref).abs() / n0,
                    s.time
                )));
            }
            n_ref = n_now;
        }
        if record_every > 0 && k % record_every == 0 {
            observe(&s);
        }
    }
    Ok(s)
}

/// `4 pi h sum |r psi|^2`, the quadratic form every sub-step preserves exactly in real time.
fn lattice_norm(state: &CoupledField) -> f64 {
    let grid = state.grid();
    let h = grid.spacing().expect("uniform grid");
    let nodes = grid.nodes();
    let sum: f64 = nodes
        .iter()
        .zip(state.first.values().iter().zip(state.second.values()))
        .map(|(r, (a, b))| r * r * (a.norm_sqr() + b.norm_sqr()))
        .sum();
    4.0 * PI * h * sum
}

/// `psi_pm = exp(-/+ i lambda t) (psi_A +/- psi_B) / sqrt 2` and its inverse.
pub fn transform_basis(state: &CoupledField, params: &PhysicalParams) -> CoupledField {
    let lt = params.lambda_coupling * state.time;
    let (e_m, e_p) = (C64::from_polar(1.0, -lt), C64::from_polar(1.0, lt));
    let a = state.first.values();
    let b = state.second.values();
    let (first, second): (Vec<C64>, Vec<C64>) = match state.basis {
        Basis::Ab => a
            .iter()
            .zip(b)
            .map(|(x, y)| (e_m * (x + y) * FRAC_1_SQRT_2, e_p * (x - y) * FRAC_1_SQRT_2))
            .unzip(),
        Basis::PlusMinus => a
            .iter()
            .zip(b)
            .map(|(p, m)| {
                (
                    (e_p * p + e_m * m) * FRAC_1_SQRT_2,
                    (e_p * p - e_m * m) * FRAC_1_SQRT_2,
                )
            })
            .unzip(),
    };
    let grid = state.grid().clone();
    CoupledField {
        first: RadialField::new(grid.clone(), first).expect("finite"),
        second: RadialField::new(grid, second).expect("finite"),
        basis: match state.basis {
            Basis::Ab => Basis::PlusMinus,
            Basis::PlusMinus => Basis::Ab,
        },
        time: state.time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub time: f64,
    pub n_first: f64,
    pub n_second: f64,
    /// `int N conj(first) second d^3r`.
    pub cross_corr: C64,
    pub energy: f64,
}

/// Discrete kinetic energy `(hbar^2 / 2m) int |grad psi|^2`, summed by parts on `u = r psi`.
fn kinetic_energy(field: &RadialField, params: &PhysicalParams) -> f64 {
    let grid = field.grid();
    let h = grid.spacing().expect("uniform grid");
    let nodes = grid.nodes();
    let v = field.values();
    let mut acc = 0.0;
    for j in 0..nodes.len() - 1 {
        let du = v[j + 1] * nodes[j + 1] - v[j] * nodes[j];
        acc += du.norm_sqr() / h;
    }
    4.0 * PI * params.hbar * params.hbar / (2.0 * params.mass) * acc
}

/// Mean-field energy of the state (in the frame of its basis).
pub fn observables(state: &CoupledField, params: &PhysicalParams) -> Observables {
    let grid = state.grid();
    let n = params.n_total;
    let w = grid.weights();
    let nodes = grid.nodes();
    let a = state.first.values();
    let b = state.second.values();
    let mut cross = C64::new(0.0, 0.0);
    let mut pot = 0.0;
    let mut inter = 0.0;
    let rot = C64::from_polar(1.0, -2.0 * params.lambda_coupling * state.time);
    for j in 0..nodes.len() {
        let r = nodes[j];
        let c = a[j].conj() * b[j];
        cross += c * w[j];
        let rho = n * (a[j].norm_sqr() + b[j].norm_sqr());
        inter += 0.5 * params.u0 * rho * rho * w[j];
        pot += w[j]
            * n
            * match state.basis {
                Basis::Ab => {
                    params.v_a(r) * a[j].norm_sqr() + params.v_b(r) * b[j].norm_sqr()
                        - 2.0 * params.hbar * params.lambda_coupling * c.re
                }
                Basis::PlusMinus => {
                    params.v_mean(r) * (a[j].norm_sqr() + b[j].norm_sqr())
                        + 2.0 * (params.delta_v(r) * rot * c).re
                }
            };
    }
    let kin = n * (kinetic_energy(&state.first, params) + kinetic_energy(&state.second, params));
    Observables {
        time: state.time,
        n_first: field_norm(&state.first, n),
        n_second: field_norm(&state.second, n),
        cross_corr: cross * n,
        energy: kin + pot + inter,
    }
}

/// Chemical potential `(dE/dN)` per atom: `<H_GP>` with the interaction counted once more.
pub fn chemical_potential(state: &CoupledField, params: &PhysicalParams) -> f64 {
    let obs = observables(state, params);
    let w = state.grid().weights();
    let n = params.n_total;
    let mut inter = 0.0;
    for j in 0..w.len() {
        let rho = density_at(state, params, j);
        inter += 0.5 * params.u0 * rho * rho * w[j];
    }
    (obs.energy + inter) / n
}

/// Uniform grid on `[0, factor * r0*]` (or `factor * 6` oscillator lengths without interactions).
pub fn default_grid(
    params: &PhysicalParams,
    r_max_factor: f64,
    n_points: usize,
) -> Result<Arc<RadialGrid>> {
    let r_ref = stationary_radius(params).unwrap_or(0.0).max(3.0);
    RadialGrid::uniform(r_max_factor * r_ref, n_points)
}

/// Thomas-Fermi profile of total norm one, split `fraction : 1 - fraction` between the components.
pub fn thomas_fermi_guess(
    grid: Arc<RadialGrid>,
    params: &PhysicalParams,
    basis: Basis,
    fraction: f64,
) -> Result<CoupledField> {
    let r0 = stationary_radius(params).unwrap_or(2.0);
    let profile = |r: f64| {
        let tf = (tf_density(r, r0, 1.0)).sqrt();
        // Gaussian floor keeps the guess strictly positive everywhere.
        tf + 1e-3 * (-r * r / 2.0).exp()
    };
    let f = RadialField::from_fn(grid.clone(), |r| C64::new(profile(r), 0.0));
    let norm = field_norm(&f, 1.0).sqrt();
    let first = f.map(|_, v| v * fraction.sqrt() / norm);
    let second = f.map(|_, v| v * (1.0 - fraction).sqrt() / norm);
    CoupledField::new(first, second, basis, 0.0)
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: CoupledField,
    pub energy: f64,
    pub iterations: usize,
    /// Energy after each iteration (first entry: initial guess).
    pub energy_history: Vec<f64>,
}

/// Imaginary-time relaxation from `guess` with renormalisation to total norm one after every step.
pub fn ground_state_from(
    guess: &CoupledField,
    params: &PhysicalParams,
    config: &SolverConfig,
) -> Result<GroundState> {
    config.validate(guess, params)?;
    let mut s = guess.clone();
    let mut e_prev = observables(&s, params).energy;
    let mut history = vec![e_prev];
    for it in 1..=config.max_ground_state_iterations {
        split_step(&mut s, params, config.dt, true);
        let nrm = (s.total_number(1.0)).sqrt();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::Instability("imaginary-time norm vanished".into()));
        }
        for v in s
            .first
            .values_mut()
            .iter_mut()
            .chain(s.second.values_mut().iter_mut())
        {
            *v /= nrm;
        }
        let e = observables(&s, params).energy;
        history.push(e);
        if ((e - e_prev) / e.abs().max(1e-300)).abs() < 1e-12 {
            return Ok(GroundState {
                state: s,
                energy: e,
                iterations: it,
                energy_history: history,
            });
        }
        e_prev = e;
    }
    Err(Error::NoConvergence {
        iterations: config.max_ground_state_iterations,
        residual: {
            let n = history.len();
            ((history[n - 1] - history[n - 2]) / history[n - 1]).abs()
        },
    })
}

/// Ground state from an equal-split Thomas-Fermi guess.
pub fn ground_state(
    params: &PhysicalParams,
    basis: Basis,
    grid: Arc<RadialGrid>,
    config: &SolverConfig,
) -> Result<GroundState> {
    let guess = thomas_fermi_guess(grid, params, basis, 0.5)?;
    ground_state_from(&guess, params, config)
}

/// Stationary single-mode sample at atom number `params.n_total`, split
/// `fraction : 1 - fraction` between `+` and `-` (for `u_tilde` differencing).
pub fn stationary_sample(
    params: &PhysicalParams,
    grid: Arc<RadialGrid>,
    config: &SolverConfig,
    fraction: f64,
) -> Result<StationarySample> {
    let mut p = *params;
    p.lambda_coupling = 0.0;
    let single = p.with_delta_omega_sq(0.0)?;
    let gs = ground_state_from(
        &thomas_fermi_guess(grid, &single, Basis::PlusMinus, 1.0)?,
        &single,
        config,
    )?;
    let mu = chemical_potential(&gs.state, &single);
    let psi = gs.state.first;
    Ok(StationarySample {
        n_total: params.n_total,
        psi_plus: psi.map(|_, v| v * fraction.sqrt()),
        psi_minus: psi.map(|_, v| v * (1.0 - fraction).sqrt()),
        mu,
    })
}

/// Self-similar Thomas-Fermi data in the A/B basis:
/// `psi_X = sqrt(15 N_X / (8 pi N r0^3)) sqrt(1 - r^2/r0^2) exp(i (A r^2 + B_X) / hbar)`.
pub fn self_similar_state(
    grid: Arc<RadialGrid>,
    params: &PhysicalParams,
    r0: f64,
    a_coeff: f64,
    n_a: f64,
    b_a: f64,
    b_b: f64,
) -> Result<CoupledField> {
    let n = params.n_total;
    if !(0.0..=n).contains(&n_a) {
        return Err(Error::Domain("N_A must lie in [0, N]".into()));
    }
    let n_b = n - n_a;
    let make = |n_x: f64, b_x: f64| {
        RadialField::from_fn(grid.clone(), |r| {
            if r >= r0 {
                C64::new(0.0, 0.0)
            } else {
                let amp = (15.0 * n_x / (8.0 * PI * n * r0.powi(3))).sqrt()
                    * (1.0 - r * r / (r0 * r0)).sqrt();
                C64::from_polar(amp, (a_coeff * r * r + b_x) / params.hbar)
            }
        })
    };
    CoupledField::new(make(n_a, b_a), make(n_b, b_b), Basis::Ab, 0.0)
}
