//! JSON config schema, validation with JSON-pointer error locations, and
//! resolution into ready-to-run core objects.
//!
//! One schema serves every subcommand. A config names either a built-in
//! scenario (or inline scenario overrides) or a literal model; grids,
//! initial data, observables, tolerance overrides, and output settings
//! are optional on top. Flag values override file values, which
//! override defaults (steps = 4000, format = csv, module tolerances).

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use qinv_core::{
    assemble_invariant, build_two_qubit_model, BlochCoefficients, BlockInvariant,
    CoefficientSchedule, DephasingScenario, DissipatorTerm, HamiltonianTerm, LindbladModel,
    Operator, TimeGrid,
};

/// Errors surfaced to the process exit-code contract: config problems
/// exit 2 and carry a JSON pointer, usage problems exit 2, everything
/// that fails while running exits 1.
#[derive(Debug)]
pub enum CliError {
    Config { pointer: String, message: String },
    Usage(String),
    Run(String),
}

impl CliError {
    pub fn config(pointer: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            pointer: pointer.to_string(),
            message: message.into(),
        }
    }

    pub fn run(message: impl Into<String>) -> Self {
        CliError::Run(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config { pointer, message } => {
                write!(f, "config error at {pointer}: {message}")
            }
            CliError::Usage(message) => write!(f, "usage error: {message}"),
            CliError::Run(message) => write!(f, "error: {message}"),
        }
    }
}

impl From<qinv_core::Error> for CliError {
    fn from(e: qinv_core::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<ScenarioField>,
    model: Option<ModelSpec>,
    grid: Option<GridSpec>,
    initial_state: Option<MatrixSpec>,
    initial_invariant: Option<MatrixSpec>,
    #[serde(default)]
    observables: Vec<ObservableSpec>,
    tolerances: Option<ToleranceSpec>,
    output: Option<OutputSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceSpec {
    dfs: Option<f64>,
    hermitian: Option<f64>,
    residual_floor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScenarioField {
    Builtin(String),
    Custom(ScenarioSpec),
}

/// Inline overrides of the built-in two-qubit dephasing scenario; every
/// omitted field keeps its demo value.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSpec {
    g12: Option<ScheduleSpec>,
    #[serde(rename = "Bz")]
    bz: Option<ScheduleSpec>,
    gamma: Option<f64>,
    #[serde(rename = "ID0")]
    id0: Option<[f64; 3]>,
    #[serde(rename = "IC0")]
    ic0: Option<[f64; 3]>,
    #[serde(rename = "T")]
    t_final: Option<f64>,
    steps: Option<usize>,
}

/// A schedule is either a bare number (constant) or a tagged object like
/// {"kind": "sinusoid", "amplitude": ..., "omega": ...}.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScheduleSpec {
    Value(f64),
    Schedule(CoefficientSchedule),
}

impl ScheduleSpec {
    fn into_schedule(self, pointer: &str) -> Result<CoefficientSchedule, CliError> {
        let schedule = match self {
            ScheduleSpec::Value(v) => CoefficientSchedule::constant(v),
            ScheduleSpec::Schedule(s) => s,
        };
        schedule
            .validate()
            .map_err(|e| CliError::config(pointer, e.to_string()))?;
        Ok(schedule)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpec {
    dim: usize,
    #[serde(default)]
    hamiltonian: Vec<HamiltonianSpec>,
    #[serde(default)]
    lindblad: Vec<LindbladSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianSpec {
    matrix: MatrixSpec,
    schedule: Option<ScheduleSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LindbladSpec {
    matrix: MatrixSpec,
    rate: ScheduleSpec,
}

/// Inline matrix literal: {"dim": n, "re": [[...]], "im": [[...]]} with
/// the imaginary part optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixSpec {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableSpec {
    name: String,
    matrix: MatrixSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    #[serde(rename = "T")]
    t_final: f64,
    steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    path: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Tolerance knobs a config may override; defaults are the module
/// defaults used everywhere else.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Leakage bound below which a subspace counts as protected.
    pub dfs: f64,
    /// Hermiticity bound applied to matrices read from the config.
    pub hermitian: f64,
    /// Residual below which verify-invariant passes without a
    /// convergence-order check.
    pub residual_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dfs: qinv_core::tol::DFS_TOL,
            hermitian: qinv_core::tol::HERMITIAN_TOL,
            residual_floor: 1e-12,
        }
    }
}

/// Values taken from the command line; each `Some` overrides the file.
#[derive(Debug, Default)]
pub struct FlagOverrides {
    pub steps: Option<usize>,
    pub t_final: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub full: bool,
}

/// Everything a subcommand needs, fully validated.
pub struct RunConfig {
    /// Present when the config is scenario-based; its grid equals `grid`.
    pub scenario: Option<DephasingScenario>,
    pub model: LindbladModel,
    pub grid: TimeGrid,
    /// Explicit initial state, or the uniform pure state when omitted.
    pub initial_state: Operator,
    /// Explicit initial invariant; for scenario configs, assembled from
    /// the ID0/IC0 blocks when not given.
    pub initial_invariant: Option<Operator>,
    pub observables: Vec<(String, Operator)>,
    pub tol: Tolerances,
    pub out_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub full: bool,
}

pub fn resolve(path: &Path, flags: &FlagOverrides) -> Result<RunConfig, CliError> {
    let file = load_file(path)?;
    validate_flags(flags)?;
    let tol = resolve_tolerances(file.tolerances.as_ref())?;

    let (scenario, model, split, grid) = match (&file.scenario, &file.model) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "/",
                "provide either \"scenario\" or \"model\", not both",
            ));
        }
        (None, None) => {
            return Err(CliError::config(
                "/",
                "one of \"scenario\" or \"model\" is required",
            ));
        }
        (Some(field), None) => {
            if file.grid.is_some() {
                return Err(CliError::config(
                    "/grid",
                    "a scenario config sets its grid via scenario.T and scenario.steps",
                ));
            }
            let scenario = resolve_scenario(field, flags)?;
            let (model, dfs, comp) =
                build_two_qubit_model(&scenario).map_err(|e| config_err("/scenario", e))?;
            let grid = scenario.grid.clone();
            (Some(scenario), model, Some((dfs, comp)), grid)
        }
        (None, Some(spec)) => {
            let model = resolve_model(spec, tol.hermitian)?;
            let grid = resolve_grid(file.grid.as_ref(), flags)?;
            model
                .check_horizon(grid.t_final())
                .map_err(|e| config_err("/grid/T", e))?;
            (None, model, None, grid)
        }
    };

    let dim = model.dim();
    let initial_state = match &file.initial_state {
        Some(spec) => {
            let op = matrix_from(spec, "/initial_state")?;
            check_matrix_dim(&op, dim, "/initial_state")?;
            op
        }
        None => uniform_state(dim),
    };

    let initial_invariant = match &file.initial_invariant {
        Some(spec) => {
            let op = matrix_from(spec, "/initial_invariant")?;
            check_matrix_dim(&op, dim, "/initial_invariant")?;
            op.ensure_hermitian(tol.hermitian)
                .map_err(|e| config_err("/initial_invariant", e))?;
            Some(op)
        }
        None => match (&scenario, &split) {
            (Some(s), Some((dfs, comp))) => {
                let blocks = BlockInvariant {
                    dfs_block: s.dfs_initial.to_operator(),
                    comp_block: s.comp_initial.to_operator(),
                };
                Some(assemble_invariant(dfs, comp, &blocks).map_err(|e| config_err("/scenario", e))?)
            }
            _ => None,
        },
    };

    let mut observables = Vec::with_capacity(file.observables.len());
    for (k, spec) in file.observables.iter().enumerate() {
        let pointer = format!("/observables/{k}");
        if spec.name.is_empty() || spec.name.contains([',', '"', '\n', '\r']) {
            return Err(CliError::config(
                &format!("{pointer}/name"),
                "observable names must be nonempty and free of commas, quotes, and newlines",
            ));
        }
        if observables.iter().any(|(n, _)| n == &spec.name) {
            return Err(CliError::config(
                &format!("{pointer}/name"),
                format!("duplicate observable name {:?}", spec.name),
            ));
        }
        let op = matrix_from(&spec.matrix, &format!("{pointer}/matrix"))?;
        check_matrix_dim(&op, dim, &format!("{pointer}/matrix"))?;
        observables.push((spec.name.clone(), op));
    }

    let out_path = flags
        .out
        .clone()
        .or_else(|| file.output.as_ref().and_then(|o| o.path.clone()));
    let format = match flags.format {
        Some(f) => f,
        None => match file.output.as_ref().and_then(|o| o.format.as_deref()) {
            None => OutputFormat::Csv,
            Some("csv") => OutputFormat::Csv,
            Some("json") => OutputFormat::Json,
            Some(other) => {
                return Err(CliError::config(
                    "/output/format",
                    format!("expected \"csv\" or \"json\", got {other:?}"),
                ));
            }
        },
    };

    Ok(RunConfig {
        scenario,
        model,
        grid,
        initial_state,
        initial_invariant,
        observables,
        tol,
        out_path,
        format,
        full: flags.full,
    })
}

fn resolve_tolerances(spec: Option<&ToleranceSpec>) -> Result<Tolerances, CliError> {
    let mut tol = Tolerances::default();
    if let Some(s) = spec {
        for (name, value, slot) in [
            ("dfs", s.dfs, &mut tol.dfs),
            ("hermitian", s.hermitian, &mut tol.hermitian),
            ("residual_floor", s.residual_floor, &mut tol.residual_floor),
        ] {
            if let Some(v) = value {
                if !v.is_finite() || v <= 0.0 {
                    return Err(CliError::config(
                        &format!("/tolerances/{name}"),
                        "tolerances must be positive and finite",
                    ));
                }
                *slot = v;
            }
        }
    }
    Ok(tol)
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::config("/", format!("cannot read {}: {e}", path.display()))
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let pointer = pointer_of(e.path());
        CliError::config(&pointer, e.into_inner().to_string())
    })
}

/// Renders a deserialization path as a JSON pointer.
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            Segment::Map { key } => {
                out.push('/');
                out.push_str(key);
            }
            Segment::Seq { index } => {
                out.push('/');
                out.push_str(&index.to_string());
            }
            Segment::Enum { variant } => {
                out.push('/');
                out.push_str(variant);
            }
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        "/".to_string()
    } else {
        out
    }
}

fn validate_flags(flags: &FlagOverrides) -> Result<(), CliError> {
    if flags.steps == Some(0) {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    if let Some(t) = flags.t_final {
        if !t.is_finite() || t <= 0.0 {
            return Err(CliError::Usage("--T must be positive and finite".into()));
        }
    }
    Ok(())
}

fn resolve_scenario(
    field: &ScenarioField,
    flags: &FlagOverrides,
) -> Result<DephasingScenario, CliError> {
    let mut scenario = DephasingScenario::demo();
    let (file_t, file_steps) = match field {
        ScenarioField::Builtin(name) => {
            if name != "dephasing2q" {
                return Err(CliError::config(
                    "/scenario",
                    format!("unknown scenario {name:?}; the built-in is \"dephasing2q\""),
                ));
            }
            (None, None)
        }
        ScenarioField::Custom(spec) => {
            if let Some(g) = &spec.g12 {
                scenario.g12 = clone_schedule(g, "/scenario/g12")?;
            }
            if let Some(b) = &spec.bz {
                scenario.bz = clone_schedule(b, "/scenario/Bz")?;
            }
            if let Some(gamma) = spec.gamma {
                scenario.gamma = gamma;
            }
            if let Some([x, y, z]) = spec.id0 {
                scenario.dfs_initial = BlochCoefficients::new(x, y, z);
            }
            if let Some([x, y, z]) = spec.ic0 {
                scenario.comp_initial = BlochCoefficients::new(x, y, z);
            }
            if spec.steps == Some(0) {
                return Err(CliError::config("/scenario/steps", "steps must be positive"));
            }
            (spec.t_final, spec.steps)
        }
    };

    let t_final = flags.t_final.or(file_t).unwrap_or(scenario.grid.t_final());
    let steps = flags.steps.or(file_steps).unwrap_or(scenario.grid.steps());
    scenario.grid = TimeGrid::new(t_final, steps).map_err(|e| config_err("/scenario", e))?;
    scenario
        .validate()
        .map_err(|e| config_err("/scenario", e))?;
    Ok(scenario)
}

fn clone_schedule(spec: &ScheduleSpec, pointer: &str) -> Result<CoefficientSchedule, CliError> {
    let owned = match spec {
        ScheduleSpec::Value(v) => ScheduleSpec::Value(*v),
        ScheduleSpec::Schedule(s) => ScheduleSpec::Schedule(s.clone()),
    };
    owned.into_schedule(pointer)
}

fn resolve_model(spec: &ModelSpec, hermitian_tol: f64) -> Result<LindbladModel, CliError> {
    if spec.dim == 0 {
        return Err(CliError::config("/model/dim", "dim must be positive"));
    }
    let mut hamiltonian = Vec::with_capacity(spec.hamiltonian.len());
    for (k, term) in spec.hamiltonian.iter().enumerate() {
        let pointer = format!("/model/hamiltonian/{k}");
        let operator = matrix_from(&term.matrix, &format!("{pointer}/matrix"))?;
        check_matrix_dim(&operator, spec.dim, &format!("{pointer}/matrix"))?;
        operator
            .ensure_hermitian(hermitian_tol)
            .map_err(|e| config_err(&format!("{pointer}/matrix"), e))?;
        let schedule = match &term.schedule {
            Some(s) => clone_schedule(s, &format!("{pointer}/schedule"))?,
            None => CoefficientSchedule::constant(1.0),
        };
        hamiltonian.push(HamiltonianTerm { operator, schedule });
    }

    let mut dissipators = Vec::with_capacity(spec.lindblad.len());
    for (k, term) in spec.lindblad.iter().enumerate() {
        let pointer = format!("/model/lindblad/{k}");
        let operator = matrix_from(&term.matrix, &format!("{pointer}/matrix"))?;
        check_matrix_dim(&operator, spec.dim, &format!("{pointer}/matrix"))?;
        let rate = clone_schedule(&term.rate, &format!("{pointer}/rate"))?;
        if let CoefficientSchedule::Constant { value } = rate {
            if value < 0.0 {
                return Err(CliError::config(
                    &format!("{pointer}/rate"),
                    format!("rate must be nonnegative, got {value}"),
                ));
            }
        }
        dissipators.push(DissipatorTerm { operator, rate });
    }

    LindbladModel::new(spec.dim, hamiltonian, dissipators).map_err(|e| config_err("/model", e))
}

fn resolve_grid(spec: Option<&GridSpec>, flags: &FlagOverrides) -> Result<TimeGrid, CliError> {
    if let Some(g) = spec {
        if g.steps == Some(0) {
            return Err(CliError::config("/grid/steps", "steps must be positive"));
        }
        if !g.t_final.is_finite() || g.t_final <= 0.0 {
            return Err(CliError::config("/grid/T", "T must be positive and finite"));
        }
    }
    let t_final = match flags.t_final.or(spec.map(|g| g.t_final)) {
        Some(t) => t,
        None => {
            return Err(CliError::config(
                "/grid/T",
                "a final time is required (grid.T in the config or --T)",
            ));
        }
    };
    let steps = flags
        .steps
        .or(spec.and_then(|g| g.steps))
        .unwrap_or(4000);
    TimeGrid::new(t_final, steps).map_err(|e| config_err("/grid", e))
}

fn matrix_from(spec: &MatrixSpec, pointer: &str) -> Result<Operator, CliError> {
    let n = spec.dim;
    if n == 0 {
        return Err(CliError::config(
            &format!("{pointer}/dim"),
            "dim must be positive",
        ));
    }
    check_rows(&spec.re, n, &format!("{pointer}/re"))?;
    let zeros;
    let im = match &spec.im {
        Some(rows) => {
            check_rows(rows, n, &format!("{pointer}/im"))?;
            rows
        }
        None => {
            zeros = vec![vec![0.0; n]; n];
            &zeros
        }
    };
    Operator::from_parts(&spec.re, im).map_err(|e| config_err(pointer, e))
}

fn check_rows(rows: &[Vec<f64>], n: usize, pointer: &str) -> Result<(), CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::config(
            pointer,
            format!("expected {n} rows of {n} entries"),
        ));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::config(pointer, "entries must be finite"));
    }
    Ok(())
}

fn check_matrix_dim(op: &Operator, dim: usize, pointer: &str) -> Result<(), CliError> {
    if op.dim() != dim {
        return Err(CliError::config(
            pointer,
            format!("dimension {} does not match the model dimension {dim}", op.dim()),
        ));
    }
    Ok(())
}

/// Pure state with equal amplitude on every basis vector: entries 1/n.
fn uniform_state(dim: usize) -> Operator {
    let amp = 1.0 / dim as f64;
    let rows = vec![vec![amp; dim]; dim];
    let zeros = vec![vec![0.0; dim]; dim];
    Operator::from_parts(&rows, &zeros).expect("square by construction")
}

fn config_err(pointer: &str, e: qinv_core::Error) -> CliError {
    CliError::config(pointer, e.to_string())
}
