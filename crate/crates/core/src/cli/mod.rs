//! Scenario runner: configuration, one subcommand per pipeline, CSV/SVG artifacts and sweeps.

pub mod config;
pub mod plot;

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;

pub use config::RunConfig;
use config::{BasisChoice, OracleState};

use crate::error::{Error, Result};
use crate::gpe::{self, Basis, CoupledField, SolverConfig};
use crate::hydro::{self, HydroPhases, TfState, ZeroOrderSolution};
use crate::moments::{self, MomentState, OverlapIntegrals, P_REL, Q_REL};
use crate::oracle::{self, FockVector, TwoModeHamiltonian};
use crate::perturbation::{self, PipelineConfig, TauVariant};
use crate::table::Table;
use crate::two_mode::{self, TwoModeState};
use crate::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    TwoMode,
    Hydro,
    Gpe,
    Moments,
    Dephasing,
    Oracle,
    Sweep,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::TwoMode => "two-mode",
            Subcommand::Hydro => "hydro",
            Subcommand::Gpe => "gpe",
            Subcommand::Moments => "moments",
            Subcommand::Dephasing => "dephasing",
            Subcommand::Oracle => "oracle",
            Subcommand::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Subcommand::TwoMode,
            Subcommand::Hydro,
            Subcommand::Gpe,
            Subcommand::Moments,
            Subcommand::Dephasing,
            Subcommand::Oracle,
            Subcommand::Sweep,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown subcommand `{s}`")))
    }
}

/// Artifacts and scalar results of one run.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    /// Named scalars, in a fixed order per subcommand; aggregated by `sweep`.
    pub summary: Vec<(String, f64)>,
    pub report: String,
}

impl RunOutput {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }

    fn scalar(&mut self, name: &str, v: f64) {
        self.summary.push((name.to_string(), v));
    }
}

/// 0 on success, 2 for configuration problems, 3 for numerical failures, 1 for output I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

/// Full command: loads the configuration, runs, prints the report and returns the exit status.
pub fn run(
    subcommand: Subcommand,
    config_path: Option<&Path>,
    overrides: &[String],
    out: Option<&Path>,
    svg: bool,
) -> i32 {
    let cfg = match load_config(config_path, overrides, out, svg) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let dir = cfg.output.directory.clone();
    match execute(subcommand, &cfg, &dir) {
        Ok(o) => {
            print!("{}", o.report);
            0
        }
        Err(e) => {
            eprintln!("error ({subcommand}): {e}");
            exit_code(&e)
        }
    }
}

/// Configuration file plus overrides; `--out` and `--svg` take precedence over both.
pub fn load_config(
    config_path: Option<&Path>,
    overrides: &[String],
    out: Option<&Path>,
    svg: bool,
) -> Result<RunConfig> {
    let text = match config_path {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let mut cfg = RunConfig::load(text.as_deref(), overrides)?;
    if let Some(o) = out {
        cfg = cfg.with("output.directory", &o.to_string_lossy())?;
    }
    if svg {
        cfg = cfg.with("output.emit_svg", "true")?;
    }
    Ok(cfg)
}

/// Runs `subcommand` writing all artifacts and `manifest.ini` into `dir`.
pub fn execute(subcommand: Subcommand, cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    std::fs::create_dir_all(dir)?;
    let manifest = dir.join("manifest.ini");
    std::fs::write(&manifest, cfg.manifest(subcommand.name()))?;
    info!("{subcommand}: writing into {}", dir.display());
    let mut out = match subcommand {
        Subcommand::TwoMode => run_two_mode(cfg, dir),
        Subcommand::Hydro => run_hydro(cfg, dir),
        Subcommand::Gpe => run_gpe(cfg, dir),
        Subcommand::Moments => run_moments(cfg, dir),
        Subcommand::Dephasing => run_dephasing(cfg, dir),
        Subcommand::Oracle => run_oracle(cfg, dir),
        Subcommand::Sweep => run_sweep(cfg, dir),
    }?;
    out.files.insert(0, manifest);
    Ok(out)
}

fn write_table(
    cfg: &RunConfig,
    dir: &Path,
    stem: &str,
    table: &Table,
    plot: Option<(&str, &[&str])>,
    out: &mut RunOutput,
) -> Result<()> {
    let csv = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv, table.to_csv())?;
    out.files.push(csv.clone());
    if let (true, Some((x, ys))) = (cfg.output.emit_svg, plot) {
        let svg = dir.join(format!("{stem}.svg"));
        plot::emit_plot(&csv, x, ys, &svg)?;
        out.files.push(svg);
    }
    Ok(())
}

fn append_column(table: &mut Table, name: &str, unit: &str, values: &[f64]) {
    table.columns.push(crate::table::Column {
        name: name.to_string(),
        unit: unit.to_string(),
    });
    for (row, v) in table.rows.iter_mut().zip(values) {
        row.push(*v);
    }
}

fn josephson_period(p: &PhysicalParams) -> Result<f64> {
    if p.lambda_coupling > 0.0 {
        Ok(PI / p.lambda_coupling)
    } else {
        Err(Error::Config(
            "params.lambda_coupling must be positive for this subcommand".into(),
        ))
    }
}

fn sample_times(period: f64, periods: f64, per_period: usize) -> Vec<f64> {
    let n = (periods * per_period as f64).round().max(1.0) as usize;
    (0..=n)
        .map(|k| k as f64 * period / per_period as f64)
        .collect()
}

/// Zero-order solution at the stationary radius with `N_+ = N (1 + f) / 2`.
fn zero_order(cfg: &RunConfig, p: &PhysicalParams) -> Result<ZeroOrderSolution> {
    let r0 = hydro::stationary_radius(p)?;
    let n_plus = 0.5 * p.n_total * (1.0 + cfg.scenario.delta_n0_fraction);
    let phases = HydroPhases {
        a_coeff: 0.0,
        b_plus: p.hbar * cfg.scenario.delta_theta0,
        b_minus: 0.0,
    };
    hydro::zero_order_solution(
        &TfState { r0, r0_dot: 0.0 },
        &phases,
        n_plus,
        p.n_total - n_plus,
        p,
        None,
    )
}

fn run_two_mode(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let p = cfg.params.physical()?;
    let period = josephson_period(&p)?;
    let s0 = TwoModeState::new(
        cfg.scenario.delta_n0_fraction * p.n_total,
        cfg.scenario.delta_phi0,
    );
    let times = sample_times(period, cfg.solver.periods, cfg.solver.samples_per_period);
    let traj = two_mode::evolve_two_mode(&s0, &p, &times, two_mode::DEFAULT_STEPS_PER_PERIOD)?;
    let mut table = traj.to_table();
    let closed_n: Vec<f64> = times
        .iter()
        .map(|&t| two_mode::closed_form_delta_n(&s0, &p, t))
        .collect::<Result<_>>()?;
    let closed_phi: Vec<f64> = times
        .iter()
        .map(|&t| two_mode::closed_form_phase(&s0, &p, t).unwrap_or(f64::NAN))
        .collect();
    append_column(&mut table, "delta_n_closed_form", "atoms", &closed_n);
    append_column(&mut table, "delta_phi_closed_form", "rad", &closed_phi);

    let amp = two_mode::amplitude_a(&s0, &p)?;
    let max_dev = traj
        .states
        .iter()
        .zip(&closed_n)
        .map(|(s, c)| (s.delta_n - c).abs())
        .fold(0.0, f64::max);
    let c0 = traj.c_values[0];
    let c_drift = traj
        .c_values
        .iter()
        .map(|c| (c - c0).abs())
        .fold(0.0, f64::max)
        / c0.abs().max(f64::MIN_POSITIVE);
    let mut out = RunOutput::default();
    write_table(
        cfg,
        dir,
        "two_mode",
        &table,
        Some(("t", &["delta_n", "delta_n_closed_form"])),
        &mut out,
    )?;
    out.scalar("amplitude", amp);
    out.scalar("max_rel_deviation", max_dev / amp.max(f64::MIN_POSITIVE));
    out.scalar("c_rel_drift", c_drift);
    out.report = format!(
        "two-mode: amplitude {amp:.6e} atoms, max |dN - closed form| / A = {:.3e}, C drift {c_drift:.3e}\n",
        max_dev / amp.max(f64::MIN_POSITIVE)
    );
    Ok(out)
}

fn run_hydro(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let p = cfg.params.physical()?;
    let r_st = hydro::stationary_radius(&p)?;
    let tf0 = TfState {
        r0: cfg.scenario.r0_factor * r_st,
        r0_dot: 0.0,
    };
    let trap_period = 2.0 * PI / p.omega_mean_sq().sqrt();
    let times = sample_times(
        trap_period,
        cfg.hydro.trap_periods,
        cfg.hydro.samples_per_period,
    );
    let w2 = p.omega_mean_sq();
    let traj = hydro::evolve_r0(&tf0, |_| w2, &p, &times, trap_period / 2000.0)?;
    let phases =
        hydro::phase_coefficients(&times, &traj, &p, p.hbar * cfg.scenario.delta_theta0, 0.0)?;
    let mut table = Table::new(&[
        ("t", "1/omega_m"),
        ("r0", "a_ho"),
        ("r0_dot", "a_ho omega_m"),
        ("a_coeff", "hbar omega_m / a_ho^2"),
        ("b_plus", "hbar omega_m"),
        ("b_minus", "hbar omega_m"),
    ]);
    for ((t, s), ph) in times.iter().zip(&traj).zip(&phases) {
        table.push(vec![*t, s.r0, s.r0_dot, ph.a_coeff, ph.b_plus, ph.b_minus]);
    }

    let xi = hydro::healing_length(&p, r_st);
    let mu = 0.5 * p.mass * w2 * r_st * r_st;
    // Single-condensate phase-diffusion time hbar / (dmu/dN sqrt N) with mu ~ N^(2/5).
    let t_diff = 5.0 * p.hbar * p.n_total.sqrt() / (2.0 * mu);
    let t_diff_s = p.units.map_or(f64::NAN, |u| t_diff * u.time_s);
    let v = if p.lambda_coupling > 0.0 {
        perturbation::perturbation_parameter(&p, r_st)?
    } else {
        f64::NAN
    };
    let mut summary = Table::new(&[
        ("r0", "a_ho"),
        ("healing_length", "a_ho"),
        ("xi_over_r0", "1"),
        ("alpha", "a_ho^-3"),
        ("u_tilde0", "hbar omega_m"),
        ("mu_tf", "hbar omega_m"),
        ("v", "1"),
        ("phase_diffusion_time", "1/omega_m"),
        ("phase_diffusion_time_s", "s"),
    ]);
    let alpha = hydro::alpha(r_st);
    summary.push(vec![
        r_st,
        xi,
        xi / r_st,
        alpha,
        4.0 * p.u0 * alpha,
        mu,
        v,
        t_diff,
        t_diff_s,
    ]);

    let mut out = RunOutput::default();
    write_table(cfg, dir, "hydro", &table, Some(("t", &["r0"])), &mut out)?;
    write_table(cfg, dir, "hydro_summary", &summary, None, &mut out)?;
    for (c, v) in summary.columns.iter().zip(&summary.rows[0]) {
        out.scalar(&c.name, *v);
    }
    out.report = format!(
        "hydro: r0 = {r_st:.6} a_ho, xi/r0 = {:.4e}, mu_TF = {mu:.4} hbar omega_m, v = {v:.4e}\n\
         single-condensate phase-diffusion time 5 hbar sqrt(N) / (2 mu) = {t_diff:.4e} /omega_m{}\n",
        xi / r_st,
        if t_diff_s.is_finite() {
            format!(" = {t_diff_s:.3} s")
        } else {
            String::new()
        }
    );
    Ok(out)
}

/// `dt` from the configuration or the largest step resolving the local phase, the
/// Josephson period and the grid-scale kinetic phase `hbar dt / (m h^2) <= 1/2`;
/// larger kinetic phases let the split step amplify grid-scale ripples.
fn gpe_dt(cfg: &RunConfig, p: &PhysicalParams, h: f64, r_max: f64, r0: f64, period: f64) -> f64 {
    cfg.solver.dt.unwrap_or_else(|| {
        let mu = 0.5 * p.mass * p.omega_mean_sq() * r0 * r0;
        let v_max = 0.5 * p.mass * p.omega_a.max(p.omega_b).powi(2) * r_max * r_max;
        let e_max = (v_max + mu).max(1.0);
        (0.5 * p.hbar / e_max)
            .min(period / 200.0)
            .min(0.5 * p.mass * h * h / p.hbar)
    })
}

fn run_gpe(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let p = cfg.params.physical()?;
    let period = josephson_period(&p)?;
    let r0 = hydro::stationary_radius(&p)?;
    let grid = gpe::default_grid(&p, cfg.grid.r_max_factor, cfg.grid.n_points)?;
    let r_max = *grid.nodes().last().expect("nonempty grid");
    let h = grid.spacing().expect("uniform grid");
    let n_a = 0.5 * p.n_total * (1.0 + cfg.scenario.delta_n0_fraction);
    let ab0 = gpe::self_similar_state(
        grid,
        &p,
        r0,
        0.0,
        n_a,
        p.hbar * cfg.scenario.delta_phi0,
        0.0,
    )?;
    let dt = gpe_dt(cfg, &p, h, r_max, r0, period);
    let steps = cfg
        .solver
        .steps
        .unwrap_or_else(|| (cfg.solver.periods * period / dt).ceil() as usize);
    let solver = SolverConfig::with_dt(dt);
    let s0 = TwoModeState::new(
        cfg.scenario.delta_n0_fraction * p.n_total,
        cfg.scenario.delta_phi0,
    );
    let amp = two_mode::amplitude_a(&s0, &p)?;

    let bases: &[Basis] = match cfg.solver.basis {
        BasisChoice::Ab => &[Basis::Ab],
        BasisChoice::PlusMinus => &[Basis::PlusMinus],
        BasisChoice::Both => &[Basis::Ab, Basis::PlusMinus],
    };
    let mut out = RunOutput::default();
    let mut report = format!(
        "gpe: dt = {dt:.3e}, {steps} steps, grid {} points\n",
        cfg.grid.n_points
    );
    for &basis in bases {
        let start = match basis {
            Basis::Ab => ab0.clone(),
            Basis::PlusMinus => gpe::transform_basis(&ab0, &p),
        };
        let mut table = Table::new(&[
            ("t", "1/omega_m"),
            ("n_a", "atoms"),
            ("n_b", "atoms"),
            ("delta_n", "atoms"),
            ("delta_phi", "rad"),
            ("energy", "hbar omega_m"),
            ("delta_n_two_mode", "atoms"),
        ]);
        let mut last_phase: Option<f64> = None;
        let mut fail: Option<Error> = None;
        gpe::evolve(
            &start,
            &p,
            &solver,
            steps,
            cfg.solver.record_every,
            |s: &CoupledField| {
                let energy = gpe::observables(s, &p).energy;
                let ab = match s.basis {
                    Basis::Ab => s.clone(),
                    Basis::PlusMinus => gpe::transform_basis(s, &p),
                };
                let o = gpe::observables(&ab, &p);
                let raw = -o.cross_corr.arg();
                let phase = match last_phase {
                    Some(prev) => prev + wrap(raw - prev),
                    None => raw,
                };
                last_phase = Some(phase);
                let reference = two_mode::closed_form_delta_n(&s0, &p, s.time);
                match reference {
                    Ok(r) => table.push(vec![
                        s.time,
                        o.n_first,
                        o.n_second,
                        o.n_first - o.n_second,
                        phase,
                        energy,
                        r,
                    ]),
                    Err(e) => fail = Some(e),
                }
            },
        )?;
        if let Some(e) = fail {
            return Err(e);
        }
        let tag = match basis {
            Basis::Ab => "ab",
            Basis::PlusMinus => "pm",
        };
        let dn = table.column("delta_n").expect("column");
        let refn = table.column("delta_n_two_mode").expect("column");
        let dev = dn
            .iter()
            .zip(&refn)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / amp.max(f64::MIN_POSITIVE);
        let e = table.column("energy").expect("column");
        let e_drift = (e[e.len() - 1] - e[0]).abs() / e[0].abs().max(f64::MIN_POSITIVE);
        write_table(
            cfg,
            dir,
            &format!("gpe_{tag}"),
            &table,
            Some(("t", &["delta_n", "delta_n_two_mode"])),
            &mut out,
        )?;
        out.scalar(&format!("{tag}_max_rel_deviation"), dev);
        out.scalar(&format!("{tag}_energy_rel_drift"), e_drift);
        report.push_str(&format!(
            "  basis {tag}: max |dN - two-mode| / A = {dev:.3e}, energy drift {e_drift:.3e}\n"
        ));
    }
    out.report = report;
    Ok(out)
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

fn run_moments(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let p = cfg.params.physical()?;
    let period = josephson_period(&p)?;
    let zo = zero_order(cfg, &p)?;
    let base = OverlapIntegrals::from_zero_order(&zo, &p, 0.0)?;
    let gen = moments::generator_fn(base, p, cfg.solver.grouping, cfg.solver.coefficient_mode)?;
    let mut m0 = MomentState::default_initial(p.hbar).with_p_rel_variance(cfg.scenario.p2_rel0);
    m0.cov[(Q_REL, Q_REL)] = cfg.scenario.q2_rel0;
    m0.mean[P_REL] = cfg.scenario.mean_p_rel0;
    let times = sample_times(period, cfg.solver.periods, cfg.solver.samples_per_period);
    let traj =
        moments::propagate_moments(&m0, gen, &times, moments::max_step_for(p.lambda_coupling))?;
    let decay = moments::correlation_decay(&traj, p.hbar);
    let mut table = traj.to_table(p.hbar);
    append_column(&mut table, "correlation_decay", "1", &decay);

    let last = traj.states.last().expect("nonempty");
    let mut out = RunOutput::default();
    write_table(
        cfg,
        dir,
        "moments",
        &table,
        Some(("t", &["correlation_decay"])),
        &mut out,
    )?;
    out.scalar("final_q_rel_mean", last.mean[Q_REL]);
    out.scalar("final_q_rel_variance", last.cov[(Q_REL, Q_REL)]);
    out.scalar("final_correlation_decay", *decay.last().expect("nonempty"));
    out.report = format!(
        "moments: u_tilde = {:.4e}, final <Q_rel> = {:.4e}, Var(Q_rel) = {:.4e}, correlation {:.6}\n",
        base.u_tilde,
        last.mean[Q_REL],
        last.cov[(Q_REL, Q_REL)],
        decay.last().expect("nonempty")
    );
    Ok(out)
}

fn run_dephasing(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let p = cfg.params.physical()?;
    josephson_period(&p)?;
    let zo = zero_order(cfg, &p)?;
    let coeffs =
        perturbation::dephasing_rate(&p, &zo, cfg.scenario.p2_rel0, cfg.dephasing.tau_variant)?;
    let mut out = RunOutput::default();
    let mut fit = None;
    let mut excluded = 0.0;
    if cfg.dephasing.fit && coeffs.v > 0.0 {
        let pc = PipelineConfig {
            order: cfg.dephasing.order,
            grouping: cfg.solver.grouping,
            periods: cfg.dephasing.periods,
            samples_per_period: cfg.solver.samples_per_period,
            p2_rel0: cfg.scenario.p2_rel0,
            mean_p_rel0: 1.0,
        };
        let (mean_run, expansion) = perturbation::run_pipeline(&zo, &p, &pc)?;
        let (spread_run, _) = perturbation::run_pipeline(
            &zo,
            &p,
            &PipelineConfig {
                mean_p_rel0: 0.0,
                ..pc
            },
        )?;
        excluded = expansion.excluded_fraction;
        let f =
            perturbation::fit_secular(&mean_run, &spread_run, &p, zo.delta_theta0(), pc.p2_rel0)?;
        let decay = moments::correlation_decay(&spread_run, p.hbar);
        let mut traj = Table::new(&[
            ("t", "1/omega_m"),
            ("q_rel_mean", "hbar"),
            ("q_rel_second_moment", "hbar^2"),
            ("correlation_decay", "1"),
        ]);
        for (((t, a), b), c) in mean_run
            .times
            .iter()
            .zip(&mean_run.states)
            .zip(&spread_run.states)
            .zip(&decay)
        {
            traj.push(vec![*t, a.mean[Q_REL], b.q_rel_second_moment(), *c]);
        }
        write_table(
            cfg,
            dir,
            "dephasing_trajectory",
            &traj,
            Some(("t", &["correlation_decay"])),
            &mut out,
        )?;
        fit = Some(f);
    }
    let report = perturbation::report_table(&coeffs, fit.as_ref(), excluded);
    write_table(cfg, dir, "dephasing", &report, None, &mut out)?;
    out.scalar("v", coeffs.v);
    out.scalar("rate_total", coeffs.rate_total);
    out.scalar("rate_imbalance", coeffs.rate_imbalance);
    out.scalar("tau_d_total", coeffs.tau_for(TauVariant::TotalNumber));
    out.scalar("tau_d_imbalance", coeffs.tau_for(TauVariant::Imbalance));
    out.scalar("tau_d", coeffs.tau_d);
    out.scalar("q2_rate", coeffs.q2_rate);
    out.scalar("fit_slope", fit.as_ref().map_or(f64::NAN, |f| f.slope));
    out.scalar("tau_fit", fit.as_ref().map_or(f64::NAN, |f| f.tau_fit));
    out.report = format!(
        "dephasing:\n{}",
        perturbation::summary(&coeffs, fit.as_ref())
    );
    if coeffs.v == 0.0 {
        out.report
            .push_str("no trap asymmetry: rate 0, tau_D = inf\n");
    }
    Ok(out)
}

fn run_oracle(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let p = cfg.params.physical()?;
    let period = josephson_period(&p)?;
    let o = &cfg.oracle;
    let h = TwoModeHamiltonian {
        u_ab: o.u + o.u_ab_shift,
        ..TwoModeHamiltonian::equal_interaction(
            o.n_atoms,
            p.hbar,
            p.lambda_coupling,
            o.u,
            o.delta_e,
        )
    };
    let x0 = match o.initial_state {
        OracleState::Coherent => FockVector::coherent(
            o.n_atoms,
            cfg.scenario.delta_n0_fraction.clamp(-1.0, 1.0).acos(),
            cfg.scenario.delta_phi0,
        )?,
        OracleState::Gaussian => FockVector::gaussian(o.n_atoms, o.sigma)?,
    };
    let times = sample_times(period, o.periods, o.samples_per_period);
    let traj = oracle::evolve_exact(&x0, &h, &times)?;
    let table = oracle::trajectory_table(&times, &traj);
    let mean_dn = table.column("mean_delta_n").expect("column");
    let vis = table.column("visibility").expect("column");
    let freq = oracle::crossing_frequency(&times, &mean_dn).unwrap_or(f64::NAN);
    let collapse = oracle::collapse_time(&times, &vis, 0.05).unwrap_or(f64::INFINITY);
    let min_vis = vis.iter().copied().fold(f64::INFINITY, f64::min);

    let mut out = RunOutput::default();
    write_table(
        cfg,
        dir,
        "oracle",
        &table,
        Some(("t", &["visibility"])),
        &mut out,
    )?;
    out.scalar("josephson_frequency", freq);
    out.scalar("frequency_over_2lambda", freq / (2.0 * p.lambda_coupling));
    out.scalar("min_visibility", min_vis);
    out.scalar("collapse_time", collapse);
    out.scalar("kerr_revival_time", h.kerr_revival_time());
    out.report = format!(
        "oracle: N = {}, frequency / 2 lambda = {:.6}, min visibility {min_vis:.6}, collapse time {collapse:.4e}, revival {:.4e}\n",
        o.n_atoms,
        freq / (2.0 * p.lambda_coupling),
        h.kerr_revival_time()
    );
    Ok(out)
}

fn run_sweep(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let sw = &cfg.sweep;
    let sub: Subcommand = sw.subcommand.parse()?;
    if sub == Subcommand::Sweep {
        return Err(Error::Config("sweep.subcommand cannot be `sweep`".into()));
    }
    if sw.values.is_empty() {
        return Err(Error::Config("sweep.values is empty".into()));
    }
    let second: Vec<Option<&String>> = match &sw.parameter2 {
        Some(_) if sw.values2.is_empty() => {
            return Err(Error::Config("sweep.values2 is empty".into()))
        }
        Some(_) => sw.values2.iter().map(Some).collect(),
        None => vec![None],
    };
    let mut jobs = Vec::new();
    for a in &sw.values {
        for b in &second {
            let mut c = cfg.with(&sw.parameter, a)?;
            if let (Some(name), Some(b)) = (&sw.parameter2, b) {
                c = c.with(name, b)?;
            }
            let xa = parse_axis(&sw.parameter, a)?;
            let xb = match b {
                Some(b) => Some(parse_axis(sw.parameter2.as_deref().unwrap_or(""), b)?),
                None => None,
            };
            jobs.push((c, xa, xb));
        }
    }
    let threads = if sw.threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        sw.threads
    }
    .min(jobs.len())
    .max(1);
    let dirs: Vec<PathBuf> = (0..jobs.len())
        .map(|i| dir.join(format!("run_{i:03}")))
        .collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<RunOutput>>>> = (0..jobs.len())
        .map(|_| std::sync::Mutex::new(None))
        .collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = execute(sub, &jobs[i].0, &dirs[i]);
                *slots[i].lock().expect("unpoisoned") = Some(r);
            });
        }
    });
    let outputs: Vec<RunOutput> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("unpoisoned").expect("every job ran"))
        .collect::<Result<_>>()?;

    let mut cols: Vec<(String, String)> = vec![(sw.parameter.clone(), String::new())];
    if let Some(name) = &sw.parameter2 {
        cols.push((name.clone(), String::new()));
    }
    for (k, _) in &outputs[0].summary {
        cols.push((k.clone(), String::new()));
    }
    let col_refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let mut table = Table::new(&col_refs);
    let mut report = format!("sweep of {sub} over {}:\n", sw.parameter);
    for ((_, xa, xb), o) in jobs.iter().zip(&outputs) {
        let mut row = vec![*xa];
        row.extend(xb.iter().copied());
        row.extend(o.summary.iter().map(|(_, v)| *v));
        report.push_str(&format!(
            "  {} = {xa:e}{}: {}\n",
            sw.parameter,
            xb.map_or(String::new(), |b| format!(
                ", {} = {b:e}",
                sw.parameter2.as_deref().unwrap_or("")
            )),
            o.summary
                .iter()
                .take(4)
                .map(|(k, v)| format!("{k} {v:.4e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        table.push(row);
    }
    let mut out = RunOutput::default();
    let csv = dir.join("sweep.csv");
    std::fs::write(&csv, table.to_csv())?;
    out.files.push(csv);
    for o in outputs {
        out.files.extend(o.files);
    }
    out.report = report;
    Ok(out)
}

fn parse_axis(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("sweep value `{value}` for `{key}` is not numeric")))
}
