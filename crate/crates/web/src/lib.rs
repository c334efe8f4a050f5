//! Browser bindings for three interactive views: the mean-field Josephson
//! trajectory, the relative-phase correlation decay of two coupled
//! condensates and the exact two-mode visibility.
//!
//! Every export returns a flat `Float64Array` of interleaved rows; the row
//! layout is documented on each function.

use std::f64::consts::PI;

use bec_josephson::hydro::{self, HydroPhases, TfState, ZeroOrderSolution};
use bec_josephson::moments;
use bec_josephson::oracle::{self, FockVector, TwoModeHamiltonian};
use bec_josephson::perturbation::{self, PipelineConfig, PipelineOrder, TauVariant};
use bec_josephson::two_mode::{self, TwoModeState};
use bec_josephson::{Error, PhysicalParams, Result};
use wasm_bindgen::prelude::*;

const TRAJECTORY_COLUMNS: usize = 4;
const DECAY_HEADER: usize = 4;
const VISIBILITY_COLUMNS: usize = 3;

fn times(period: f64, periods: f64, per_period: usize) -> Result<Vec<f64>> {
    if !(periods > 0.0) || per_period == 0 {
        return Err(Error::param(
            "periods",
            "need a positive duration and sampling",
        ));
    }
    let n = (periods * per_period as f64).round().max(1.0) as usize;
    if n > 200_000 {
        return Err(Error::param("periods", "too many samples for the browser"));
    }
    Ok((0..=n)
        .map(|k| k as f64 * period / per_period as f64)
        .collect())
}

/// Rows `[t, delta_n, delta_phi, delta_n_closed_form]` in units of `1/omega_m`.
pub fn trajectory(
    n_atoms: f64,
    lambda: f64,
    delta_n_fraction: f64,
    delta_phi0: f64,
    periods: f64,
) -> Result<Vec<f64>> {
    let p = PhysicalParams::dimensionless(n_atoms, 1.0, 1.0, 0.0, lambda)?;
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive"));
    }
    let s0 = TwoModeState::new(delta_n_fraction * n_atoms, delta_phi0);
    let ts = times(PI / lambda, periods, 64)?;
    let traj = two_mode::evolve_two_mode(&s0, &p, &ts, two_mode::DEFAULT_STEPS_PER_PERIOD)?;
    let mut out = Vec::with_capacity(ts.len() * TRAJECTORY_COLUMNS);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        out.extend([
            *t,
            s.delta_n,
            s.delta_phi,
            two_mode::closed_form_delta_n(&s0, &p, *t)?,
        ]);
    }
    Ok(out)
}

fn reference_state(
    n_atoms: f64,
    u0: f64,
    lambda: f64,
    v: f64,
    delta_n_fraction: f64,
) -> Result<(PhysicalParams, ZeroOrderSolution)> {
    if !(delta_n_fraction.abs() < 1.0) {
        return Err(Error::param("delta_n_fraction", "must lie in (-1, 1)"));
    }
    let base = PhysicalParams::dimensionless(n_atoms, 1.0, 1.0, u0, lambda)?;
    let r0 = hydro::stationary_radius(&base)?;
    let p = base.with_delta_omega_sq(perturbation::delta_omega_sq_for(&base, r0, v))?;
    let n_plus = 0.5 * n_atoms * (1.0 + delta_n_fraction);
    let zo = hydro::zero_order_solution(
        &TfState { r0, r0_dot: 0.0 },
        &HydroPhases {
            a_coeff: 0.0,
            b_plus: 0.0,
            b_minus: 0.0,
        },
        n_plus,
        n_atoms - n_plus,
        &p,
        None,
    )?;
    Ok((p, zo))
}

/// `[rate_total, tau_total, rate_imbalance, tau_imbalance]` followed by
/// rows `[t, correlation_decay]` from the moment propagation.
pub fn dephasing(
    n_atoms: f64,
    u0: f64,
    lambda: f64,
    v: f64,
    delta_n_fraction: f64,
    periods: f64,
) -> Result<Vec<f64>> {
    let (p, zo) = reference_state(n_atoms, u0, lambda, v, delta_n_fraction)?;
    let c = perturbation::dephasing_rate(&p, &zo, 1.0, TauVariant::TotalNumber)?;
    let mut out = vec![
        c.rate_total,
        c.tau_for(TauVariant::TotalNumber),
        c.rate_imbalance,
        c.tau_for(TauVariant::Imbalance),
    ];
    let config = PipelineConfig {
        order: PipelineOrder::Second,
        periods,
        mean_p_rel0: 0.0,
        ..PipelineConfig::default()
    };
    times(PI / lambda, periods, config.samples_per_period)?;
    let (traj, _) = perturbation::run_pipeline(&zo, &p, &config)?;
    for (t, d) in traj
        .times
        .iter()
        .zip(moments::correlation_decay(&traj, p.hbar))
    {
        out.extend([*t, d]);
    }
    Ok(out)
}

/// Rows `[t, visibility, mean_delta_n]` for a Gaussian number distribution of
/// width `sigma` evolved under the exact two-mode Hamiltonian.
pub fn visibility(
    n_atoms: usize,
    lambda: f64,
    u: f64,
    u_ab_shift: f64,
    sigma: f64,
    periods: f64,
) -> Result<Vec<f64>> {
    if n_atoms > 2000 {
        return Err(Error::param("n_atoms", "at most 2000 in the browser"));
    }
    let h = TwoModeHamiltonian {
        u_ab: u + u_ab_shift,
        ..TwoModeHamiltonian::equal_interaction(n_atoms, 1.0, lambda, u, 0.0)
    };
    let period = if lambda > 0.0 { PI / lambda } else { 1.0 };
    let ts = times(period, periods, 32)?;
    let x0 = FockVector::gaussian(n_atoms, sigma)?;
    let traj = oracle::evolve_exact(&x0, &h, &ts)?;
    let vis = oracle::visibility(&traj);
    let mut out = Vec::with_capacity(ts.len() * VISIBILITY_COLUMNS);
    for ((t, x), v) in ts.iter().zip(&traj).zip(vis) {
        out.extend([*t, v, oracle::imbalance_moments(x).0]);
    }
    Ok(out)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = josephsonTrajectory)]
pub fn josephson_trajectory_js(
    n_atoms: f64,
    lambda: f64,
    delta_n_fraction: f64,
    delta_phi0: f64,
    periods: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(trajectory(
        n_atoms,
        lambda,
        delta_n_fraction,
        delta_phi0,
        periods,
    ))
}

#[wasm_bindgen(js_name = dephasingCurve)]
pub fn dephasing_js(
    n_atoms: f64,
    u0: f64,
    lambda: f64,
    v: f64,
    delta_n_fraction: f64,
    periods: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(dephasing(n_atoms, u0, lambda, v, delta_n_fraction, periods))
}

#[wasm_bindgen(js_name = twoModeVisibility)]
pub fn visibility_js(
    n_atoms: usize,
    lambda: f64,
    u: f64,
    u_ab_shift: f64,
    sigma: f64,
    periods: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(visibility(n_atoms, lambda, u, u_ab_shift, sigma, periods))
}

/// Number of header values before the rows of [`dephasing`].
#[wasm_bindgen(js_name = dephasingHeader)]
pub fn dephasing_header() -> usize {
    DECAY_HEADER
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_follows_closed_form() {
        let rows = trajectory(1e4, 1.0, 0.3, 0.2, 2.0).unwrap();
        assert_eq!(rows.len() % TRAJECTORY_COLUMNS, 0);
        for r in rows.chunks(TRAJECTORY_COLUMNS) {
            assert!((r[1] - r[3]).abs() < 1e-6 * 1e4, "{r:?}");
        }
    }

    #[test]
    fn symmetric_traps_do_not_dephase() {
        let out = dephasing(5e5, 0.0475, 20.0, 0.0, 0.2, 2.0).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], f64::INFINITY);
        for r in out[DECAY_HEADER..].chunks(2) {
            assert!((r[1] - 1.0).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn rate_scales_with_asymmetry_squared() {
        let a = dephasing(5e5, 0.0475, 20.0, 0.02, 0.2, 1.0).unwrap();
        let b = dephasing(5e5, 0.0475, 20.0, 0.04, 0.2, 1.0).unwrap();
        assert!((b[0] / a[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn interaction_free_visibility_stays_constant() {
        let rows = visibility(100, 1.0, 0.0, 0.0, 5.0, 2.0).unwrap();
        let v0 = rows[1];
        for r in rows.chunks(VISIBILITY_COLUMNS) {
            assert!((r[1] - v0).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(trajectory(1e4, 0.0, 0.3, 0.0, 1.0).is_err());
        assert!(dephasing(5e5, 0.0475, 20.0, 0.02, 1.0, 1.0).is_err());
        assert!(visibility(5000, 1.0, 0.0, 0.0, 5.0, 1.0).is_err());
    }
}
