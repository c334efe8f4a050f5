//! Flat `section.key = value` configuration with defaults and strict key checking.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ini::Ini;

use crate::error::{Error, Result};
use crate::hydro::stationary_radius;
use crate::moments::{CoefficientMode, Grouping};
use crate::params::{RawParams, RB87_MASS_SI};
use crate::perturbation::{delta_omega_sq_for, PipelineOrder, TauVariant};
use crate::PhysicalParams;

/// Every accepted key with its default. An empty default means "unset".
pub const DEFAULTS: &[(&str, &str)] = &[
    ("params.units", "trap"),
    ("params.n_atoms", "500000"),
    ("params.omega_a", "1"),
    ("params.omega_b", "1"),
    ("params.u0", "0.0475"),
    ("params.lambda_coupling", "20"),
    ("params.mass_kg", "1.4431606e-25"),
    ("params.scattering_length_m", "5.3e-9"),
    ("params.delta_omega_sq", ""),
    ("params.v", ""),
    ("grid.r_max_factor", "1.5"),
    ("grid.n_points", "801"),
    ("scenario.name", "default"),
    ("scenario.delta_n0_fraction", "0.2"),
    ("scenario.delta_phi0", "0"),
    ("scenario.delta_theta0", "0"),
    ("scenario.p2_rel0", "1"),
    ("scenario.q2_rel0", "0.25"),
    ("scenario.mean_p_rel0", "0"),
    ("scenario.r0_factor", "1"),
    ("solver.dt", ""),
    ("solver.steps", ""),
    ("solver.periods", "5"),
    ("solver.record_every", "10"),
    ("solver.scheme", "split-step"),
    ("solver.basis", "ab"),
    ("solver.coefficient_mode", "instantaneous"),
    ("solver.grouping", "as-written"),
    ("solver.samples_per_period", "16"),
    ("hydro.trap_periods", "5"),
    ("hydro.samples_per_period", "64"),
    ("dephasing.order", "second"),
    ("dephasing.periods", "400"),
    ("dephasing.tau_variant", "total-number"),
    ("dephasing.fit", "true"),
    ("oracle.n_atoms", "200"),
    ("oracle.u", "0.001"),
    ("oracle.u_ab_shift", "0"),
    ("oracle.delta_e", "0"),
    ("oracle.initial_state", "coherent"),
    ("oracle.sigma", "5"),
    ("oracle.periods", "10"),
    ("oracle.samples_per_period", "32"),
    ("output.directory", "out"),
    ("output.emit_svg", "false"),
    ("sweep.subcommand", "dephasing"),
    ("sweep.parameter", "params.delta_omega_sq"),
    ("sweep.values", ""),
    ("sweep.parameter2", ""),
    ("sweep.values2", ""),
    ("sweep.threads", "0"),
];

/// Keys written into run manifests; accepted and ignored on re-ingest.
const MANIFEST_PREFIX: &str = "manifest.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Trap,
    Si,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamsBlock {
    pub units: Units,
    pub n_atoms: f64,
    /// Trap units, or rad/s when `units = si`.
    pub omega_a: f64,
    pub omega_b: f64,
    /// Trap units only.
    pub u0: f64,
    pub lambda_coupling: f64,
    pub mass_kg: f64,
    pub scattering_length_m: f64,
    /// Trap units; replaces the asymmetry of `omega_a`, `omega_b`.
    pub delta_omega_sq: Option<f64>,
    /// Sets `delta_omega_sq` from the perturbation parameter at the stationary radius.
    pub v: Option<f64>,
}

impl ParamsBlock {
    pub fn physical(&self) -> Result<PhysicalParams> {
        let base = match self.units {
            Units::Trap => PhysicalParams::dimensionless(
                self.n_atoms,
                self.omega_a,
                self.omega_b,
                self.u0,
                self.lambda_coupling,
            )?,
            Units::Si => PhysicalParams::from_si(&RawParams {
                n_atoms: self.n_atoms,
                mass_kg: self.mass_kg,
                omega_a: self.omega_a,
                omega_b: self.omega_b,
                scattering_length_m: self.scattering_length_m,
                lambda: self.lambda_coupling,
            })?,
        };
        match (self.delta_omega_sq, self.v) {
            (Some(_), Some(_)) => Err(Error::Config(
                "params.delta_omega_sq and params.v are mutually exclusive".into(),
            )),
            (Some(d), None) => base.with_delta_omega_sq(d),
            (None, Some(v)) => {
                let r0 = stationary_radius(&base)?;
                base.with_delta_omega_sq(delta_omega_sq_for(&base, r0, v))
            }
            (None, None) => Ok(base),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub r_max_factor: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBlock {
    pub name: String,
    /// `delta_n(0) / N`; also sets `N_+ = N (1 + f) / 2` for the fluctuation pipelines.
    pub delta_n0_fraction: f64,
    pub delta_phi0: f64,
    pub delta_theta0: f64,
    pub p2_rel0: f64,
    pub q2_rel0: f64,
    pub mean_p_rel0: f64,
    /// Initial Thomas-Fermi radius in units of the stationary one.
    pub r0_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisChoice {
    Ab,
    PlusMinus,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverBlock {
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    /// Run length in Josephson periods `pi / lambda` when `steps` is unset.
    pub periods: f64,
    pub record_every: usize,
    pub basis: BasisChoice,
    pub coefficient_mode: CoefficientMode,
    pub grouping: Grouping,
    pub samples_per_period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydroBlock {
    /// Breathing run length in trap periods `2 pi / omega_m`.
    pub trap_periods: f64,
    pub samples_per_period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DephasingBlock {
    pub order: PipelineOrder,
    pub periods: f64,
    pub tau_variant: TauVariant,
    pub fit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleState {
    Coherent,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBlock {
    pub n_atoms: usize,
    pub u: f64,
    /// `u_ab - u`; nonzero values break the equal-interaction symmetry.
    pub u_ab_shift: f64,
    pub delta_e: f64,
    pub initial_state: OracleState,
    pub sigma: f64,
    pub periods: f64,
    pub samples_per_period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub emit_svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub subcommand: String,
    pub parameter: String,
    pub values: Vec<String>,
    pub parameter2: Option<String>,
    pub values2: Vec<String>,
    pub threads: usize,
}

/// Fully resolved configuration. `raw` holds every key, defaults included.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: BTreeMap<String, String>,
    pub params: ParamsBlock,
    pub grid: GridBlock,
    pub scenario: ScenarioBlock,
    pub solver: SolverBlock,
    pub hydro: HydroBlock,
    pub dephasing: DephasingBlock,
    pub oracle: OracleBlock,
    pub output: OutputBlock,
    pub sweep: SweepBlock,
}

impl RunConfig {
    pub fn defaults() -> Self {
        Self::from_map(default_map()).expect("defaults are valid")
    }

    /// Defaults, then the INI text, then `key=value` overrides in order.
    pub fn load(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut map = default_map();
        if let Some(text) = text {
            for (k, v) in parse_ini(text)? {
                insert_checked(&mut map, &k, v)?;
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            insert_checked(&mut map, k.trim(), v.trim().to_string())?;
        }
        Self::from_map(map)
    }

    /// Copy with one key replaced.
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut map = self.raw.clone();
        insert_checked(&mut map, key, value.to_string())?;
        Self::from_map(map)
    }

    pub fn from_map(raw: BTreeMap<String, String>) -> Result<Self> {
        let g = Getter(&raw);
        let units = match g.str("params.units") {
            "trap" => Units::Trap,
            "si" => Units::Si,
            other => return Err(bad("params.units", other, "trap | si")),
        };
        let params = ParamsBlock {
            units,
            n_atoms: g.f64("params.n_atoms")?,
            omega_a: g.f64("params.omega_a")?,
            omega_b: g.f64("params.omega_b")?,
            u0: g.f64("params.u0")?,
            lambda_coupling: g.f64("params.lambda_coupling")?,
            mass_kg: g.f64("params.mass_kg")?,
            scattering_length_m: g.f64("params.scattering_length_m")?,
            delta_omega_sq: g.opt_f64("params.delta_omega_sq")?,
            v: g.opt_f64("params.v")?,
        };
        let grid = GridBlock {
            r_max_factor: g.f64("grid.r_max_factor")?,
            n_points: g.usize("grid.n_points")?,
        };
        let scenario = ScenarioBlock {
            name: g.str("scenario.name").to_string(),
            delta_n0_fraction: g.f64("scenario.delta_n0_fraction")?,
            delta_phi0: g.f64("scenario.delta_phi0")?,
            delta_theta0: g.f64("scenario.delta_theta0")?,
            p2_rel0: g.f64("scenario.p2_rel0")?,
            q2_rel0: g.f64("scenario.q2_rel0")?,
            mean_p_rel0: g.f64("scenario.mean_p_rel0")?,
            r0_factor: g.f64("scenario.r0_factor")?,
        };
        if !(scenario.delta_n0_fraction.abs() < 1.0) {
            return Err(bad(
                "scenario.delta_n0_fraction",
                g.str("scenario.delta_n0_fraction"),
                "a value in (-1, 1)",
            ));
        }
        match g.str("solver.scheme") {
            "split-step" => {}
            other => return Err(bad("solver.scheme", other, "split-step")),
        }
        let solver = SolverBlock {
            dt: g.opt_f64("solver.dt")?,
            steps: g.opt_usize("solver.steps")?,
            periods: g.f64("solver.periods")?,
            record_every: g.usize("solver.record_every")?.max(1),
            basis: match g.str("solver.basis") {
                "ab" => BasisChoice::Ab,
                "pm" => BasisChoice::PlusMinus,
                "both" => BasisChoice::Both,
                other => return Err(bad("solver.basis", other, "ab | pm | both")),
            },
            coefficient_mode: match g.str("solver.coefficient_mode") {
                "instantaneous" => CoefficientMode::Instantaneous,
                "cycle-averaged" => CoefficientMode::CycleAveraged,
                other => {
                    return Err(bad(
                        "solver.coefficient_mode",
                        other,
                        "instantaneous | cycle-averaged",
                    ))
                }
            },
            grouping: match g.str("solver.grouping") {
                "as-written" => Grouping::AsWritten,
                "alternative" => Grouping::Alternative,
                other => return Err(bad("solver.grouping", other, "as-written | alternative")),
            },
            samples_per_period: g.usize("solver.samples_per_period")?.max(1),
        };
        let hydro = HydroBlock {
            trap_periods: g.f64("hydro.trap_periods")?,
            samples_per_period: g.usize("hydro.samples_per_period")?.max(1),
        };
        let dephasing = DephasingBlock {
            order: match g.str("dephasing.order") {
                "first" => PipelineOrder::First,
                "second" => PipelineOrder::Second,
                other => return Err(bad("dephasing.order", other, "first | second")),
            },
            periods: g.f64("dephasing.periods")?,
            tau_variant: match g.str("dephasing.tau_variant") {
                "total-number" => TauVariant::TotalNumber,
                "imbalance" => TauVariant::Imbalance,
                other => {
                    return Err(bad(
                        "dephasing.tau_variant",
                        other,
                        "total-number | imbalance",
                    ))
                }
            },
            fit: g.bool("dephasing.fit")?,
        };
        let oracle = OracleBlock {
            n_atoms: g.usize("oracle.n_atoms")?,
            u: g.f64("oracle.u")?,
            u_ab_shift: g.f64("oracle.u_ab_shift")?,
            delta_e: g.f64("oracle.delta_e")?,
            initial_state: match g.str("oracle.initial_state") {
                "coherent" => OracleState::Coherent,
                "gaussian" => OracleState::Gaussian,
                other => return Err(bad("oracle.initial_state", other, "coherent | gaussian")),
            },
            sigma: g.f64("oracle.sigma")?,
            periods: g.f64("oracle.periods")?,
            samples_per_period: g.usize("oracle.samples_per_period")?.max(1),
        };
        let output = OutputBlock {
            directory: PathBuf::from(g.str("output.directory")),
            emit_svg: g.bool("output.emit_svg")?,
        };
        let sweep = SweepBlock {
            subcommand: g.str("sweep.subcommand").to_string(),
            parameter: g.str("sweep.parameter").to_string(),
            values: list(g.str("sweep.values")),
            parameter2: Some(g.str("sweep.parameter2").to_string()).filter(|s| !s.is_empty()),
            values2: list(g.str("sweep.values2")),
            threads: g.usize("sweep.threads")?,
        };
        Ok(RunConfig {
            raw,
            params,
            grid,
            scenario,
            solver,
            hydro,
            dephasing,
            oracle,
            output,
            sweep,
        })
    }

    /// INI text of the resolved configuration plus a `[manifest]` section.
    pub fn manifest(&self, subcommand: &str) -> String {
        let mut out = String::new();
        out.push_str("[manifest]\n");
        out.push_str(&format!("code_version = {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("subcommand = {subcommand}\n"));
        let mut current = "";
        for (k, v) in &self.raw {
            let (section, key) = k.split_once('.').expect("keys are dotted");
            if section != current {
                out.push_str(&format!("\n[{section}]\n"));
                current = section;
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }
}

fn default_map() -> BTreeMap<String, String> {
    DEFAULTS
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn parse_ini(text: &str) -> Result<Vec<(String, String)>> {
    let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::new();
    for (section, props) in ini.iter() {
        for (k, v) in props.iter() {
            let key = match section {
                Some(s) => format!("{s}.{k}"),
                None => k.to_string(),
            };
            out.push((key, v.to_string()));
        }
    }
    Ok(out)
}

fn insert_checked(map: &mut BTreeMap<String, String>, key: &str, value: String) -> Result<()> {
    if key.starts_with(MANIFEST_PREFIX) {
        return Ok(());
    }
    match map.get_mut(key) {
        Some(slot) => {
            *slot = value;
            Ok(())
        }
        None => Err(Error::Config(format!("unknown key `{key}`"))),
    }
}

fn list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect()
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("`{key}` = `{value}`: expected {expected}"))
}

struct Getter<'a>(&'a BTreeMap<String, String>);

impl Getter<'_> {
    fn str(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.opt_f64(key)?
            .ok_or_else(|| Error::Config(format!("`{key}` must be set")))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        let s = self.str(key);
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| bad(key, s, "a number"))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.opt_usize(key)?
            .ok_or_else(|| Error::Config(format!("`{key}` must be set")))
    }

    fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        let s = self.str(key);
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<usize>()
            .map(Some)
            .map_err(|_| bad(key, s, "a nonnegative integer"))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(bad(key, other, "true | false")),
        }
    }
}

/// Default Rb-87 mass, kept in sync with the `params.mass_kg` default.
pub const DEFAULT_MASS_KG: f64 = RB87_MASS_SI;
