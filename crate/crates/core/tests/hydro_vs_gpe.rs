use bec_josephson::gpe::{self, CoupledField, SolverConfig};
use bec_josephson::hydro::{self, TfState};
use bec_josephson::PhysicalParams;

fn mean_r2(s: &CoupledField) -> f64 {
    let g = s.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for ((w, r), (a, b)) in g
        .weights()
        .iter()
        .zip(g.nodes())
        .zip(s.first.values().iter().zip(s.second.values()))
    {
        let rho = a.norm_sqr() + b.norm_sqr();
        num += w * r * r * rho;
        den += w * rho;
    }
    num / den
}

/// A compressed Thomas-Fermi profile breathes; `<r^2> = 3 r0(t)^2 / 7` tracks the scaling solution.
#[test]
fn breathing_gpe_follows_scaling_radius() {
    let p = PhysicalParams::dimensionless(2e5, 1.0, 1.0, 0.1, 0.0).unwrap();
    let r_st = hydro::stationary_radius(&p).unwrap();
    let r_init = 1.1 * r_st;
    let grid = gpe::default_grid(&p, 1.8, 801).unwrap();
    let h = grid.spacing().unwrap();
    let s0 = gpe::self_similar_state(grid, &p, r_init, 0.0, 0.5 * p.n_total, 0.0, 0.0).unwrap();
    let dt = 0.5 * h * h;
    let record = 400;
    let steps = (2.0 * std::f64::consts::PI / dt / record as f64).ceil() as usize * record;
    let mut samples = Vec::new();
    gpe::evolve(&s0, &p, &SolverConfig::with_dt(dt), steps, record, |s| {
        samples.push((s.time, mean_r2(s)));
    })
    .unwrap();
    let times: Vec<f64> = samples.iter().map(|x| x.0).collect();
    let traj = hydro::evolve_r0(
        &TfState {
            r0: r_init,
            r0_dot: 0.0,
        },
        |_| 1.0,
        &p,
        &times,
        1e-3,
    )
    .unwrap();
    let swing = traj.iter().map(|s| s.r0).fold(0.0, f64::max)
        - traj.iter().map(|s| s.r0).fold(f64::MAX, f64::min);
    assert!(swing > 0.1 * r_st, "breathing amplitude {swing}");
    let worst = samples
        .iter()
        .zip(&traj)
        .map(|((_, r2), s)| (r2.sqrt() / (3.0f64 / 7.0).sqrt() / s.r0 - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "max relative radius mismatch {worst}");
}
