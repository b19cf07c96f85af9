//! Command-line driver. [`dispatch`] parses the arguments, validates every
//! input before computing, runs one command and writes a JSON document that
//! embeds the resolved [`RunConfig`].
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 when a computation hits
//! a budget or numeric limit. Errors go to stderr as one JSON object.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use orlicz_core::bp::{classify, Mode};
use orlicz_core::covering::{
    cf_overlap_check, greedy_by_measure, largest_passing_delta, select_scattered, verify_scattered,
    weight_growth_sweep, RectFamily,
};
use orlicz_core::grid::{Geometry, GridFunction};
use orlicz_core::maximal::{
    fingerprint, multilinear_maximal_with, orlicz_maximal_with, strong_maximal_with, Basis, BasisKind,
    MaximalOptions, DEFAULT_BUDGET,
};
use orlicz_core::verify::{
    counterexample_growth, fefferman_stein_probe, holder_orlicz_suite, lp_bound_probe, necessity_construction,
    transfer_construction, two_weight_probe, weighted_transfer_probe, CounterexampleConfig, FieldSpec, ProbeSuite,
};
use orlicz_core::weights::{
    ap_constant, bump_constant, condition_a_estimate, power_bump_constant, sawyer_constant, FamilySpec, SetSampler,
    WeightSystem,
};
use orlicz_core::young::{
    complementary, inverse, probe_doubling, probe_submultiplicative, SamplingSpec, YoungDescriptor, YoungFunction,
    INVERSE_TOL,
};
use orlicz_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Environment variable holding the default operation budget.
pub const BUDGET_ENV: &str = "ORLICZ_BUDGET_CAP";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_computational() => 2,
            _ => 1,
        }
    }

    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage".to_string(), m.clone()),
            CliError::Core(e) => (
                if e.is_computational() { "computational" } else { "validation" }.to_string(),
                e.to_string(),
            ),
        };
        json!({ "error": { "kind": kind, "message": message, "exit_code": self.exit_code() } })
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "orlicz", version, about = "Orlicz maximal operators on grids")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Operation budget for maximal computations; defaults to $ORLICZ_BUDGET_CAP or 2e9.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulates a Young function, its inverse and complement, and runs the structural probes.
    Young(YoungArgs),
    /// Growth-condition classification.
    Bp {
        #[command(subcommand)]
        action: BpAction,
    },
    /// Maximal function of a grid file.
    Maximal(MaximalArgs),
    /// Weight-condition estimators.
    Weights {
        #[command(subcommand)]
        action: WeightsAction,
    },
    /// Scattered selection and overlap checks on a rectangle family.
    Covering {
        #[command(subcommand)]
        action: CoveringAction,
    },
    /// Experiment suites.
    Verify(VerifyArgs),
    /// Synthesizes grid files.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
struct YoungArgs {
    /// Young function descriptor (JSON).
    #[arg(long)]
    phi: String,
    #[arg(long, default_value_t = 1e-3)]
    lo: f64,
    #[arg(long, default_value_t = 1e6)]
    hi: f64,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BpAction {
    Check {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: u32,
        /// bp or bp_star
        #[arg(long, default_value = "bp_star")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct MaximalArgs {
    /// Input grid; repeat for the multilinear operator.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// rect, cube or dyadic
    #[arg(long, default_value = "rect")]
    basis: String,
    /// Young function descriptor (JSON); the plain average when absent.
    #[arg(long)]
    phi: Option<String>,
    /// Disables pruning of rectangles that cannot raise the maximum.
    #[arg(long)]
    no_prune: bool,
    /// Output grid; the provenance goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum WeightKind {
    Bump,
    PowerBump,
    Ap,
    Sawyer,
    #[value(name = "condA")]
    CondA,
}

#[derive(Subcommand, Debug)]
enum WeightsAction {
    Test {
        #[arg(long, value_enum)]
        kind: WeightKind,
        /// JSON config, inline or a path.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum CoveringAction {
    Demo {
        /// Rectangle family (JSON), inline or a path.
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        weight: Option<PathBuf>,
        /// Overlap exponent; the largest passing value is reported when absent.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Suite {
    T2,
    T12,
    Counterexample,
    Holder,
    Covering,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// JSON config, inline or a path; defaults apply when absent.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum GenKind {
    Indicator,
    Constant,
    Uniform,
    LogNormal,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// The grid covers `[-T, T]^dim`.
    #[arg(long, default_value_t = 4.0)]
    half_width: f64,
    /// Cells per unit length.
    #[arg(long, default_value_t = 4)]
    resolution: usize,
    /// Indicator corner, comma separated.
    #[arg(long, value_delimiter = ',')]
    lo: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    hi: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    value: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<String>,
    pub young: Vec<Value>,
    pub exponents: Vec<f64>,
    pub basis: Option<Basis>,
    pub seed: Option<u64>,
    pub budget_cap: u64,
    pub threads: Option<usize>,
    pub output: Option<String>,
    /// The command's resolved configuration, defaults filled in.
    pub params: Value,
}

impl RunConfig {
    fn new(command: &str, argv: &[String], budget_cap: u64, threads: Option<usize>) -> Self {
        RunConfig {
            command: command.to_string(),
            argv: argv.to_vec(),
            inputs: vec![],
            young: vec![],
            exponents: vec![],
            basis: None,
            seed: None,
            budget_cap,
            threads,
            output: None,
            params: Value::Null,
        }
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn budget_from_env() -> CliResult<u64> {
    match std::env::var(BUDGET_ENV) {
        Ok(s) => s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 1.0)
            .map(|v| v as u64)
            .ok_or_else(|| usage(format!("{BUDGET_ENV} must be a positive number, got {s:?}"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn run(cli: Cli, argv: &[String]) -> CliResult<()> {
    let budget = match cli.budget {
        Some(0) => return Err(usage("--budget must be positive")),
        Some(b) => b,
        None => budget_from_env()?,
    };
    if cli.threads == Some(0) {
        return Err(usage("--threads must be positive"));
    }
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| usage(format!("cannot start thread pool: {e}")))?
    };
    let name = match &cli.command {
        Command::Young(_) => "young",
        Command::Bp { .. } => "bp check",
        Command::Maximal(_) => "maximal",
        Command::Weights { .. } => "weights test",
        Command::Covering { .. } => "covering demo",
        Command::Verify(_) => "verify",
        Command::Gen(_) => "gen",
    };
    let rc = RunConfig::new(name, argv, budget, cli.threads);
    pool.install(|| match cli.command {
        Command::Young(a) => young_cmd(a, rc),
        Command::Bp { action } => bp_cmd(action, rc),
        Command::Maximal(a) => maximal_cmd(a, rc),
        Command::Weights { action } => weights_cmd(action, rc),
        Command::Covering { action } => covering_cmd(action, rc),
        Command::Verify(a) => verify_cmd(a, rc),
        Command::Gen(a) => gen_cmd(a, rc),
    })
}

// ---------------------------------------------------------------------------
// input helpers

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

/// Inline JSON when the argument starts with `{` or `[`, else a file path.
fn json_arg(arg: &str) -> CliResult<String> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        read_text(Path::new(arg))
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| usage(format!("invalid {what}: {e}")))
}

fn young(text: &str) -> CliResult<(YoungFunction, Value)> {
    let desc: YoungDescriptor = parse_json(text, "Young function descriptor")?;
    let phi = YoungFunction::from_descriptor(&desc)?;
    Ok((phi, serde_json::to_value(&desc).expect("descriptor serialises")))
}

fn young_value(desc: &YoungDescriptor) -> CliResult<(YoungFunction, Value)> {
    Ok((YoungFunction::from_descriptor(desc)?, serde_json::to_value(desc).expect("descriptor serialises")))
}

fn read_grid(path: &Path) -> CliResult<GridFunction> {
    GridFunction::parse(&read_text(path)?).map_err(|e| match e {
        Error::Parse { line, msg } => usage(format!("{}:{line}: {msg}", path.display())),
        other => other.into(),
    })
}

fn emit(rc: &RunConfig, result: Value, out: Option<&Path>) -> CliResult<()> {
    let doc = json!({ "run_config": rc, "result": result });
    let text = serde_json::to_string_pretty(&doc).expect("report serialises");
    match out {
        Some(p) => write_text(p, &(text + "\n")),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(usage(format!("cannot write stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serialises")
}

// ---------------------------------------------------------------------------
// commands

fn young_cmd(a: YoungArgs, mut rc: RunConfig) -> CliResult<()> {
    let (phi, desc) = young(&a.phi)?;
    if !(a.lo > 0.0 && a.hi > a.lo && a.points >= 2) {
        return Err(usage("need 0 < lo < hi and at least two points"));
    }
    rc.young = vec![desc];
    rc.output = a.out.as_ref().map(|p| p.display().to_string());
    rc.params = json!({ "lo": a.lo, "hi": a.hi, "points": a.points });
    let bar = complementary(&phi);
    let spec = SamplingSpec::new(a.lo, a.hi, a.points);
    // Values above the range of a capped function have no inverse: null.
    let inv = |f: &YoungFunction, y: f64| match inverse(f, y, INVERSE_TOL) {
        Err(Error::NoBracket { .. }) => Ok(None),
        r => r.map(Some),
    };
    let mut rows = Vec::new();
    for t in spec.samples() {
        rows.push(json!({
            "t": t,
            "phi": phi.eval(t),
            "phi_inverse": inv(&phi, t)?,
            "complement": bar.eval(t),
            "complement_inverse": inv(&bar, t)?,
        }));
    }
    let result = json!({
        "function": phi.to_string(),
        "convex": phi.is_convex(),
        "samples": rows,
        "submultiplicative": probe_submultiplicative(&phi, &spec, 1e-9),
        "doubling": probe_doubling(&phi, &spec),
    });
    emit(&rc, result, a.out.as_deref())
}

fn bp_cmd(action: BpAction, mut rc: RunConfig) -> CliResult<()> {
    let BpAction::Check { phi, p, n, mode, out } = action;
    let (phi, desc) = young(&phi)?;
    let mode: Mode = mode.parse()?;
    if !(p >= 1.0 && p.is_finite()) || n == 0 {
        return Err(usage("need p >= 1 and n >= 1"));
    }
    rc.young = vec![desc];
    rc.exponents = vec![p];
    rc.output = out.as_ref().map(|p| p.display().to_string());
    rc.params = json!({ "n": n, "mode": mode });
    let verdict = classify(&phi, p, n, mode)?;
    emit(&rc, to_value(&verdict), out.as_deref())
}

fn maximal_cmd(a: MaximalArgs, mut rc: RunConfig) -> CliResult<()> {
    let kind: BasisKind = a.basis.parse()?;
    let basis = Basis::new(kind);
    let phi = a.phi.as_deref().map(young).transpose()?;
    let inputs: Vec<GridFunction> = a.input.iter().map(|p| read_grid(p)).collect::<CliResult<_>>()?;
    if inputs.len() > 1 && phi.is_some() {
        return Err(usage("--phi applies to a single input"));
    }
    let opts = MaximalOptions { budget_cap: rc.budget_cap, prune: !a.no_prune, ..MaximalOptions::default() };
    rc.inputs = a.input.iter().map(|p| p.display().to_string()).collect();
    rc.young = phi.iter().map(|(_, d)| d.clone()).collect();
    rc.basis = Some(basis);
    rc.output = Some(a.out.display().to_string());
    rc.params = json!({ "prune": opts.prune });
    let field = match (&phi, inputs.len()) {
        (Some((phi, _)), _) => orlicz_maximal_with(&inputs[0], phi, basis, &opts)?,
        (None, 1) => strong_maximal_with(&inputs[0], basis, &opts)?,
        (None, _) => multilinear_maximal_with(&inputs, basis, &opts)?,
    };
    write_text(&a.out, &field.field.to_grid_string())?;
    let mut sidecar = a.out.clone().into_os_string();
    sidecar.push(".json");
    let result = json!({ "provenance": field.provenance, "output_fingerprint": fingerprint(&field.field) });
    emit(&rc, result, Some(Path::new(&sidecar)))
}

fn default_p() -> f64 {
    2.0
}

fn default_family() -> FamilySpec {
    FamilySpec::exhaustive(Basis::rectangles())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BumpConfig {
    u: PathBuf,
    v: PathBuf,
    phi: YoungDescriptor,
    #[serde(default = "default_p")]
    p: f64,
    #[serde(default = "default_family")]
    family: FamilySpec,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerBumpConfig {
    nu: PathBuf,
    ws: Vec<PathBuf>,
    ps: Vec<f64>,
    r: f64,
    #[serde(default = "default_family")]
    family: FamilySpec,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApConfig {
    w: PathBuf,
    #[serde(default = "default_p")]
    p: f64,
    #[serde(default = "default_family")]
    family: FamilySpec,
}

fn default_cube_family() -> FamilySpec {
    FamilySpec::exhaustive(Basis::cubes())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SawyerConfig {
    u: PathBuf,
    v: PathBuf,
    #[serde(default = "default_p")]
    p: f64,
    #[serde(default = "default_cube_family")]
    family: FamilySpec,
}

fn default_lambda() -> f64 {
    0.5
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CondAConfig {
    w: PathBuf,
    #[serde(default = "default_lambda")]
    lambda: f64,
    #[serde(default)]
    sampler: SetSampler,
}

fn seed_of(family: &FamilySpec) -> Option<u64> {
    match &family.sampling {
        orlicz_core::weights::Sampling::Stratified { seed, .. } => Some(*seed),
        _ => None,
    }
}

fn weights_cmd(action: WeightsAction, mut rc: RunConfig) -> CliResult<()> {
    let WeightsAction::Test { kind, config, out } = action;
    let text = json_arg(&config)?;
    rc.output = out.as_ref().map(|p| p.display().to_string());
    let path_str = |p: &PathBuf| p.display().to_string();
    let report = match kind {
        WeightKind::Bump => {
            let c: BumpConfig = parse_json(&text, "bump config")?;
            let (phi, desc) = young_value(&c.phi)?;
            let (u, v) = (read_grid(&c.u)?, read_grid(&c.v)?);
            rc.inputs = vec![path_str(&c.u), path_str(&c.v)];
            rc.young = vec![desc];
            rc.exponents = vec![c.p];
            rc.basis = Some(c.family.basis);
            rc.seed = seed_of(&c.family);
            rc.params = to_value(&c);
            bump_constant(&u, &v, &phi, c.p, &c.family)?
        }
        WeightKind::PowerBump => {
            let c: PowerBumpConfig = parse_json(&text, "power-bump config")?;
            let nu = read_grid(&c.nu)?;
            let ws: Vec<GridFunction> = c.ws.iter().map(|p| read_grid(p)).collect::<CliResult<_>>()?;
            let sys = WeightSystem::new(&nu, &ws, &c.ps)?;
            rc.inputs = std::iter::once(&c.nu).chain(&c.ws).map(path_str).collect();
            rc.exponents = c.ps.clone();
            rc.basis = Some(c.family.basis);
            rc.seed = seed_of(&c.family);
            rc.params = to_value(&c);
            power_bump_constant(&sys, c.r, &c.family)?
        }
        WeightKind::Ap => {
            let c: ApConfig = parse_json(&text, "ap config")?;
            let w = read_grid(&c.w)?;
            rc.inputs = vec![path_str(&c.w)];
            rc.exponents = vec![c.p];
            rc.basis = Some(c.family.basis);
            rc.seed = seed_of(&c.family);
            rc.params = to_value(&c);
            ap_constant(&w, c.p, &c.family)?
        }
        WeightKind::Sawyer => {
            let c: SawyerConfig = parse_json(&text, "sawyer config")?;
            let (u, v) = (read_grid(&c.u)?, read_grid(&c.v)?);
            rc.inputs = vec![path_str(&c.u), path_str(&c.v)];
            rc.exponents = vec![c.p];
            rc.basis = Some(c.family.basis);
            rc.seed = seed_of(&c.family);
            rc.params = to_value(&c);
            sawyer_constant(&u, &v, c.p, &c.family)?
        }
        WeightKind::CondA => {
            let c: CondAConfig = parse_json(&text, "condition (A) config")?;
            let w = read_grid(&c.w)?;
            rc.inputs = vec![path_str(&c.w)];
            rc.seed = Some(c.sampler.seed);
            rc.params = to_value(&c);
            condition_a_estimate(&w, c.lambda, &c.sampler)?
        }
    };
    emit(&rc, to_value(&report), out.as_deref())
}

fn covering_cmd(action: CoveringAction, mut rc: RunConfig) -> CliResult<()> {
    let CoveringAction::Demo { family, alpha, weight, delta, out } = action;
    let fam = RectFamily::from_json(&json_arg(&family)?)?;
    let w = weight.as_ref().map(|p| read_grid(p)).transpose()?;
    if fam.is_empty() {
        return Err(usage("the family is empty"));
    }
    if fam.shape().len() < 2 && delta.is_some() {
        return Err(usage("the overlap check needs dimension at least 2"));
    }
    rc.inputs = weight.iter().map(|p| p.display().to_string()).collect();
    rc.output = out.as_ref().map(|p| p.display().to_string());
    rc.params = json!({ "family": to_value(&fam), "alpha": alpha, "delta": delta });
    let sel = select_scattered(&fam, alpha)?;
    let growth = w.as_ref().map(|w| weight_growth_sweep(&fam, &sel, w)).transpose()?;
    let check = verify_scattered(&fam, &sel, alpha)?;
    let greedy = greedy_by_measure(&fam);
    let n = fam.shape().len();
    let overlap = if n >= 2 {
        let d = match delta {
            Some(d) => d,
            None => largest_passing_delta(&fam, &greedy.chosen, n)?,
        };
        Some(cf_overlap_check(&fam, &greedy.chosen, d, n)?)
    } else {
        None
    };
    let result = json!({
        "selection": sel,
        "check": check,
        "greedy": greedy,
        "overlap": overlap,
        "weight_growth": growth,
    });
    emit(&rc, result, out.as_deref())
}

fn gen_cmd(a: GenArgs, mut rc: RunConfig) -> CliResult<()> {
    let geom = Geometry::centered_cube(a.dim, a.half_width, a.resolution)?;
    rc.seed = Some(a.seed);
    rc.output = Some(a.out.display().to_string());
    rc.params = json!({
        "kind": a.kind, "dim": a.dim, "half_width": a.half_width, "resolution": a.resolution,
        "lo": a.lo, "hi": a.hi, "value": a.value,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let f = match a.kind {
        GenKind::Indicator => {
            if a.lo.len() != a.dim || a.hi.len() != a.dim {
                return Err(usage("indicator needs --lo and --hi with dim entries"));
            }
            GridFunction::indicator(geom, &a.lo, &a.hi)?
        }
        GenKind::Constant => GridFunction::constant(geom, a.value)?,
        GenKind::Uniform => {
            let v = (0..geom.len()).map(|_| a.value * rng.random::<f64>()).collect();
            GridFunction::new(geom, v)?
        }
        GenKind::LogNormal => {
            let v = (0..geom.len())
                .map(|_| {
                    // Box-Muller
                    let (u1, u2): (f64, f64) = (rng.random::<f64>().max(f64::MIN_POSITIVE), rng.random());
                    let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                    (a.value * z).exp()
                })
                .collect();
            GridFunction::new(geom, v)?
        }
    };
    write_text(&a.out, &f.to_grid_string())?;
    let mut sidecar = a.out.clone().into_os_string();
    sidecar.push(".json");
    emit(&rc, json!({ "fingerprint": fingerprint(&f) }), Some(Path::new(&sidecar)))
}

// ---------------------------------------------------------------------------
// verify suites

fn default_phi() -> YoungDescriptor {
    serde_json::from_value(json!({ "kind": "power", "r": 1.5 })).expect("valid descriptor")
}

fn default_suite() -> ProbeSuite {
    serde_json::from_value(json!({
        "dim": 2,
        "half_widths": [2.0],
        "resolutions": [4, 8],
        "generators": [
            { "kind": "indicator", "lo": [0.0, 0.0], "hi": [1.0, 1.0] },
            { "kind": "random_union", "count": 4, "max_rects": 3, "max_side": 1.5 },
            { "kind": "smooth_bump", "count": 2, "width": 0.3 },
            { "kind": "spike", "count": 2 }
        ],
        "seed": 1,
        "placement": 1.5
    }))
    .expect("valid suite")
}

fn default_t12_phi() -> YoungDescriptor {
    serde_json::from_value(json!({ "kind": "power", "r": 3.0 })).expect("valid descriptor")
}

fn default_weight() -> FieldSpec {
    FieldSpec::Wave { amplitude: 0.3, frequency: 1.0 }
}

fn unit_weight() -> FieldSpec {
    FieldSpec::Constant { value: 1.0 }
}

fn default_transfer_ns() -> Vec<f64> {
    vec![1.0, 10.0, 100.0]
}

fn default_amplitude() -> f64 {
    0.5
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct T2Config {
    #[serde(default = "default_phi")]
    phi: YoungDescriptor,
    #[serde(default = "default_p")]
    p: f64,
    #[serde(default = "default_suite")]
    suite: ProbeSuite,
    #[serde(default = "default_weight")]
    weight: FieldSpec,
    #[serde(default = "default_lambda")]
    lambda: f64,
    #[serde(default)]
    sampler: SetSampler,
    #[serde(default = "default_amplitude")]
    transfer_amplitude: f64,
    #[serde(default = "default_transfer_ns")]
    transfer_ns: Vec<f64>,
}

fn default_necessity_samples() -> usize {
    2
}

fn default_bump_family() -> FamilySpec {
    FamilySpec::stratified(Basis::rectangles(), 2000, 1)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct T12Config {
    #[serde(default = "default_t12_phi")]
    phi: YoungDescriptor,
    #[serde(default = "default_p")]
    p: f64,
    #[serde(default = "default_suite")]
    suite: ProbeSuite,
    #[serde(default = "unit_weight")]
    u: FieldSpec,
    #[serde(default = "unit_weight")]
    v: FieldSpec,
    #[serde(default)]
    sampler: SetSampler,
    #[serde(default = "default_bump_family")]
    bump_family: FamilySpec,
    /// Random `g` for the necessity construction on the first suite geometry.
    #[serde(default = "default_necessity_samples")]
    necessity_samples: usize,
}

fn default_holder_phis() -> Vec<YoungDescriptor> {
    serde_json::from_value(json!([
        { "kind": "power", "r": 2.0 },
        { "kind": "power_log", "alpha": 2.0, "beta": 1.5 },
        { "kind": "power_log_log", "p": 3.0, "gamma": 1.0, "n": 1 }
    ]))
    .expect("valid descriptors")
}

fn default_triples() -> usize {
    10_000
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HolderConfig {
    #[serde(default = "default_holder_phis")]
    phis: Vec<YoungDescriptor>,
    #[serde(default = "default_triples")]
    triples: usize,
    #[serde(default)]
    seed: u64,
}

fn default_cover_shape() -> Vec<usize> {
    vec![64, 64]
}
fn default_cover_families() -> usize {
    100
}
fn default_cover_members() -> usize {
    50
}
fn default_alphas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoveringConfig {
    #[serde(default = "default_cover_shape")]
    shape: Vec<usize>,
    #[serde(default = "default_cover_families")]
    families: usize,
    #[serde(default = "default_cover_members")]
    members: usize,
    #[serde(default = "default_alphas")]
    alphas: Vec<f64>,
    #[serde(default)]
    seed: u64,
}

fn suite_config<T: for<'de> Deserialize<'de>>(config: &Option<String>, what: &str) -> CliResult<T> {
    let text = match config {
        Some(c) => json_arg(c)?,
        None => "{}".to_string(),
    };
    parse_json(&text, what)
}

fn verify_cmd(a: VerifyArgs, mut rc: RunConfig) -> CliResult<()> {
    rc.output = a.out.as_ref().map(|p| p.display().to_string());
    let result = match a.suite {
        Suite::T2 => {
            let c: T2Config = suite_config(&a.config, "t2 config")?;
            let (phi, desc) = young_value(&c.phi)?;
            c.suite.validate()?;
            rc.young = vec![desc];
            rc.exponents = vec![c.p];
            rc.basis = Some(Basis::rectangles());
            rc.seed = Some(c.suite.seed);
            rc.params = to_value(&c);
            let first = &c.suite.geometries()?[0].2;
            json!({
                "lp_bound": lp_bound_probe(&phi, c.p, Basis::rectangles(), &c.suite)?,
                "fefferman_stein": fefferman_stein_probe(&phi, c.p, &c.weight, c.lambda, Some(&c.sampler), &c.suite)?,
                "weighted_transfer": weighted_transfer_probe(&phi, c.p, c.transfer_amplitude, &c.suite)?,
                "transfer_construction": transfer_construction(&phi, c.p, first, &c.transfer_ns)?,
            })
        }
        Suite::T12 => {
            let c: T12Config = suite_config(&a.config, "t12 config")?;
            let (phi, desc) = young_value(&c.phi)?;
            c.suite.validate()?;
            rc.young = vec![desc];
            rc.exponents = vec![c.p];
            rc.basis = Some(Basis::rectangles());
            rc.seed = Some(c.suite.seed);
            rc.params = to_value(&c);
            let probe = two_weight_probe(&c.u, &c.v, &phi, c.p, Some(&c.sampler), &c.bump_family, &c.suite)?;
            let geom = c.suite.geometries()?[0].2.clone();
            let mut necessity = Vec::new();
            for k in 0..c.necessity_samples {
                let mut rng = ChaCha8Rng::seed_from_u64(c.suite.seed);
                rng.set_stream(k as u64);
                let vals = (0..geom.len()).map(|_| rng.random::<f64>().powi(3)).collect();
                let g = GridFunction::new(geom.clone(), vals)?;
                let (u, v) = necessity_construction(&g, c.p, &phi)?;
                let rep = bump_constant(&u, &v, &phi, c.p, &c.bump_family)?;
                necessity.push(json!({ "sample": k, "bump": rep }));
            }
            json!({ "two_weight": probe, "necessity": necessity })
        }
        Suite::Counterexample => {
            let c: CounterexampleConfig = suite_config(&a.config, "counterexample config")?;
            rc.exponents = vec![c.p];
            rc.params = to_value(&c);
            to_value(&counterexample_growth(&c)?)
        }
        Suite::Holder => {
            let c: HolderConfig = suite_config(&a.config, "holder config")?;
            let phis: Vec<(YoungFunction, Value)> = c.phis.iter().map(young_value).collect::<CliResult<_>>()?;
            if c.triples == 0 {
                return Err(usage("triples must be positive"));
            }
            rc.young = phis.iter().map(|(_, d)| d.clone()).collect();
            rc.seed = Some(c.seed);
            rc.params = to_value(&c);
            let reports: Vec<Value> = phis
                .iter()
                .enumerate()
                .map(|(k, (phi, _))| Ok(to_value(&holder_orlicz_suite(phi, c.triples, c.seed + k as u64)?)))
                .collect::<CliResult<_>>()?;
            json!({ "pass": reports.iter().all(|r| r["pass"] == true), "reports": reports })
        }
        Suite::Covering => {
            let c: CoveringConfig = suite_config(&a.config, "covering config")?;
            if c.shape.is_empty() || c.shape.len() > 3 || c.shape.contains(&0) || c.members == 0 {
                return Err(usage("covering needs a shape of 1 to 3 positive sides and members > 0"));
            }
            if c.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(usage("alphas must lie in [0, 1]"));
            }
            rc.seed = Some(c.seed);
            rc.params = to_value(&c);
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let mut rows = Vec::new();
            let mut all_ok = true;
            for k in 0..c.families {
                let fam = RectFamily::random(&c.shape, c.members, &mut rng)?;
                for &alpha in &c.alphas {
                    let sel = select_scattered(&fam, alpha)?;
                    let check = verify_scattered(&fam, &sel, alpha)?;
                    all_ok &= check.ok;
                    rows.push(json!({
                        "family": k, "alpha": alpha, "kept": sel.kept.len(),
                        "ok": check.ok, "max_violation": check.max_violation,
                    }));
                }
            }
            json!({ "pass": all_ok, "runs": rows })
        }
    };
    emit(&rc, result, a.out.as_deref())
}
