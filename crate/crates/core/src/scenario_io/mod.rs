//! Scenario configuration files, loading, and result persistence.
//!
//! A configuration is a JSON object. Unknown keys are rejected and errors
//! carry the JSON pointer of the offending value. `kind` selects the grid
//! pipeline (default) or the profile pipeline; grid-only keys are refused in
//! profile configurations and vice versa.

mod output;
mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::{DensityMode, Forcing, ForcingKind, Mode};
use crate::error::{Error, Result};
use crate::evolution::{uniform_partition, Scenario};
use crate::geometry::{rasterize, read_mask, BinaryField, GridSpec, PerimeterScheme, Point, Shape};
use crate::grid_solver::SolveParams;
use crate::profile::{Obstacle, ProfileParams};
use crate::verify::AuditOptions;

pub use output::{
    emit_audits, emit_grid, emit_profile, emit_step, sha256_hex, Manifest, ProfileRunOutput, MANIFEST_FORMAT,
};
pub use svg::{mask_overlay_svg, profile_svg};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    #[default]
    Grid,
    Profile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub origin: Point,
    pub side: [f64; 2],
    pub cells: [usize; 2],
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            origin: [-3.0, -3.0],
            side: [6.0, 6.0],
            cells: [256, 256],
        }
    }
}

/// Either a uniform partition of `[0, T]` or explicit times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T", default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_steps() -> usize {
    10
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_end: default_t_end(),
            steps: default_steps(),
            times: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Full,
    Empty,
    /// The admissible region `F^c(t_0)`.
    #[default]
    Admissible,
    Shape(Shape),
    /// PGM mask with its JSON sidecar; relative paths are resolved against
    /// the configuration file's directory.
    Mask(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub obstacle: Obstacle,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Values of `a` to solve for; the top-level `a` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_values: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: ProfileSolverConfig,
    /// Samples with `v - u` below this count as contact.
    #[serde(default = "default_contact_tol")]
    pub contact_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProfileSolverConfig {
    fn default() -> Self {
        let p = ProfileParams::default();
        ProfileSolverConfig {
            tol: p.tol,
            max_iter: p.max_iter,
        }
    }
}

fn default_n() -> usize {
    100
}

fn default_contact_tol() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub emit_plots: bool,
    pub emit_telemetry: bool,
    pub emit_masks: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            emit_plots: true,
            emit_telemetry: false,
            emit_masks: true,
        }
    }
}

/// The configuration document. Grid-only fields are `None` in profile
/// configurations; [`load_scenario`] fills grid defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub kind: RunKind,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perimeter_scheme: Option<PerimeterScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilize_initial: Option<bool>,
    /// `{"builder": ..., parameters..., "onset"?, "density"?}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolveParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audits: Option<AuditOptions>,
    /// `k` values for the sweep command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_a() -> f64 {
    5.0
}

fn config_err(pointer: &str, message: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

fn from_value_at<T: serde::de::DeserializeOwned>(value: serde_json::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = pointer_of(e.path());
        let pointer = if inner == "/" {
            if prefix.is_empty() { "/".to_string() } else { prefix.to_string() }
        } else {
            format!("{prefix}{inner}")
        };
        config_err(&pointer, e.into_inner().to_string())
    })
}

/// Parses the forcing object: `onset` and `density` are peeled off and the
/// rest selects a builder.
pub fn build_forcing(value: &serde_json::Value, a: f64) -> Result<Forcing> {
    let mut map = match value {
        serde_json::Value::Object(m) => m.clone(),
        _ => return Err(config_err("/forcing", "expected an object with a `builder` key")),
    };
    let onset = match map.remove("onset") {
        None => 0.0,
        Some(v) => from_value_at::<f64>(v, "/forcing/onset")?,
    };
    if !(onset >= 0.0 && onset.is_finite()) {
        return Err(config_err("/forcing/onset", "must be a nonnegative number"));
    }
    let density = match map.remove("density") {
        None => DensityMode::Characteristic,
        Some(v) => from_value_at::<DensityMode>(v, "/forcing/density")?,
    };
    let kind: ForcingKind = from_value_at(serde_json::Value::Object(map), "/forcing")?;
    let forcing = Forcing::new(kind, a).map_err(|e| match e {
        Error::InvalidParameter { name, reason } => config_err(&format!("/forcing/{name}"), reason),
        other => other,
    })?;
    Ok(forcing.with_onset(onset).with_density(density))
}

/// A grid scenario ready to run.
#[derive(Clone, Debug)]
pub struct GridRun {
    /// Configuration with every grid default filled in.
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    pub audits: AuditOptions,
}

/// A profile scenario ready to solve.
#[derive(Clone, Debug)]
pub struct ProfileRun {
    pub config: ScenarioConfig,
    pub obstacle: Obstacle,
    pub n: usize,
    pub a_values: Vec<f64>,
    pub params: ProfileParams,
    pub contact_tol: f64,
}

#[derive(Clone, Debug)]
pub enum LoadedScenario {
    Grid(GridRun),
    Profile(ProfileRun),
}

impl LoadedScenario {
    pub fn config(&self) -> &ScenarioConfig {
        match self {
            LoadedScenario::Grid(g) => &g.config,
            LoadedScenario::Profile(p) => &p.config,
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}

/// Parses a configuration document; mask paths resolve against `base`.
pub fn parse_scenario(text: &str, base: &Path) -> Result<LoadedScenario> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err("/", e.to_string()))?;
    let config: ScenarioConfig = from_value_at(value, "")?;
    resolve(config, base)
}

fn resolve(mut config: ScenarioConfig, base: &Path) -> Result<LoadedScenario> {
    if !(config.a > 0.0 && config.a.is_finite()) {
        return Err(config_err("/a", format!("must be positive, got {}", config.a)));
    }
    match config.kind {
        RunKind::Profile => resolve_profile(config),
        RunKind::Grid => {
            if config.profile.is_some() {
                return Err(config_err("/profile", "only allowed with \"kind\": \"profile\""));
            }
            let domain = config.domain.get_or_insert_with(DomainConfig::default).clone();
            let grid = GridSpec::new(domain.origin, domain.side, domain.cells)
                .map_err(|e| config_err("/domain", e.to_string()))?;
            let time = config.time.get_or_insert_with(TimeConfig::default).clone();
            let times = match &time.times {
                Some(ts) => ts.clone(),
                None => {
                    if !(time.t_end > 0.0) {
                        return Err(config_err("/time/T", "must be positive"));
                    }
                    if time.steps == 0 {
                        return Err(config_err("/time/steps", "must be at least 1"));
                    }
                    uniform_partition(time.t_end, time.steps)?
                }
            };
            if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(config_err("/time/times", "must start at 0 and increase strictly"));
            }
            let mode = *config.mode.get_or_insert(Mode::Brittle);
            if let Mode::Adhesive { k } = mode {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(config_err("/mode/k", format!("must be positive, got {k}")));
                }
            }
            let scheme = *config.perimeter_scheme.get_or_insert(PerimeterScheme::default());
            let stabilize_initial = *config.stabilize_initial.get_or_insert(false);
            let forcing = match &config.forcing {
                None => Forcing::none(config.a),
                Some(v) => build_forcing(v, config.a)?,
            };
            let initial_spec = config.initial.get_or_insert_with(InitialSpec::default).clone();
            let initial = match &initial_spec {
                InitialSpec::Full => BinaryField::full(&grid),
                InitialSpec::Empty => BinaryField::empty(&grid),
                InitialSpec::Admissible => forcing.open_set(times[0], &grid).complement(),
                InitialSpec::Shape(shape) => rasterize(shape, &grid),
                InitialSpec::Mask(p) => {
                    let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                    let m = read_mask(&full)?;
                    if m.grid() != &grid {
                        return Err(config_err("/initial/mask", "mask grid differs from the domain"));
                    }
                    m
                }
            };
            let solver = config.solver.get_or_insert_with(SolveParams::default).clone();
            let audits = config.audits.get_or_insert_with(AuditOptions::default).clone();
            if let Some(ks) = &config.sweep_k {
                if ks.is_empty() || ks.iter().any(|&k| !(k > 0.0)) || ks.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(config_err("/sweep_k", "must be positive and strictly ascending"));
                }
            }
            let scenario = Scenario {
                grid,
                times,
                mode,
                a: config.a,
                initial,
                forcing,
                scheme,
                solver,
                stabilize_initial,
            };
            scenario.validate(true)?;
            Ok(LoadedScenario::Grid(GridRun {
                config,
                scenario,
                audits,
            }))
        }
    }
}

fn resolve_profile(config: ScenarioConfig) -> Result<LoadedScenario> {
    let grid_only = [
        ("/domain", config.domain.is_some()),
        ("/time", config.time.is_some()),
        ("/mode", config.mode.is_some()),
        ("/perimeter_scheme", config.perimeter_scheme.is_some()),
        ("/initial", config.initial.is_some()),
        ("/stabilize_initial", config.stabilize_initial.is_some()),
        ("/forcing", config.forcing.is_some()),
        ("/solver", config.solver.is_some()),
        ("/audits", config.audits.is_some()),
        ("/sweep_k", config.sweep_k.is_some()),
    ];
    if let Some((p, _)) = grid_only.iter().find(|(_, set)| *set) {
        return Err(config_err(p, "grid setting in a profile configuration"));
    }
    let pc = config
        .profile
        .clone()
        .ok_or_else(|| config_err("/profile", "profile configurations need a `profile` section"))?;
    if pc.n < 2 {
        return Err(config_err("/profile/n", "need at least 2 segments"));
    }
    let a_values = pc.a_values.clone().unwrap_or_else(|| vec![config.a]);
    if a_values.is_empty() {
        return Err(config_err("/profile/a_values", "must not be empty"));
    }
    if let Some(i) = a_values.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(config_err(&format!("/profile/a_values/{i}"), "must be positive"));
    }
    if !(pc.solver.tol > 0.0) || pc.solver.max_iter == 0 {
        return Err(config_err("/profile/solver", "tol and max_iter must be positive"));
    }
    Ok(LoadedScenario::Profile(ProfileRun {
        obstacle: pc.obstacle.clone(),
        n: pc.n,
        a_values,
        params: ProfileParams {
            tol: pc.solver.tol,
            max_iter: pc.solver.max_iter,
        },
        contact_tol: pc.contact_tol,
        config,
    }))
}

/// Solves the profile problem for every configured `a`.
pub fn run_profile(run: &ProfileRun) -> Result<Vec<ProfileRunOutput>> {
    let v = run.obstacle.samples(run.n);
    run.a_values
        .iter()
        .map(|&a| {
            let solution = crate::profile::solve_profile(&v, a, run.params)?;
            let curvature = crate::profile::curvature_scan(&solution.profile, a, run.contact_tol);
            let contact_length = solution.profile.contact_length(run.contact_tol);
            Ok(ProfileRunOutput {
                a,
                solution,
                curvature,
                contact_length,
            })
        })
        .collect()
}
