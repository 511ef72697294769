//! Command-line configuration and command drivers.
//!
//! [`Cli`] is the raw clap surface. [`RunConfig::from_cli`] validates it into
//! a [`RunConfig`], which [`render`] turns into the text of the output file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bfi::{self, SbfiReport, WitnessReport};
use crate::divisibility::{self, DivisibilityVerdict, VerdictLabel};
use crate::dynamics::{self, RateModel};
use crate::error::{Error, Result};
use crate::mixtures::{self, DiagramCell, DiagramGrid, DiagramMode, DiagramParams, MixtureWeights, RegionLabel};
use crate::{DEFAULT_TOL, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "QDIVIDE_THREADS";

pub const DIAGRAM_HEADER: &str = "coord1,coord2,label,margin";
pub const EXAMPLE1_HEADER: &str = "lambda,omega,is_cp_for_all_t,first_violation_t";

const EXAMPLE1_POINTS: usize = 2000;
const EXAMPLE1_T_MIN: f64 = 1e-3;
const EXAMPLE1_T_MAX: f64 = 50.0;

#[derive(Parser, Debug, Clone)]
#[command(name = "qdivide", version = VERSION, about = "Divisibility and information backflow of qubit Pauli dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand, Debug, Clone)]
pub enum CliCommand {
    /// CP, P and tensor-P divisibility verdicts as JSON.
    Classify {
        #[command(flatten)]
        model: ModelArgs,
        /// `self` or a second model such as `mixture:0.3,0.3,0.4`.
        #[arg(long, value_name = "MODEL")]
        tensor_with: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        /// Tolerance below which a negative margin counts as violated.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Labeled divisibility diagram of dephasing mixtures.
    Diagram {
        /// fig1: CP vs P regions; fig2: bisector tensor region; fig3: tensor region for a fixed first map.
        #[arg(long, value_enum)]
        mode: DiagramModeArg,
        /// Cells per axis.
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        /// Fixed first map for fig3.
        #[arg(long, value_name = "P1,P2,P3")]
        p: Option<String>,
        /// Evaluation time for fig3; `inf` for the asymptotic region.
        #[arg(long, value_name = "T")]
        t: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Seeded search for a trace-norm revival of the product dynamics.
    Witness {
        #[command(flatten)]
        model: ModelArgs,
        /// Second model, as for `classify`; defaults to a copy of the first.
        #[arg(long, value_name = "MODEL")]
        tensor_with: Option<String>,
        /// Pair the model with an untouched ancilla instead of a second copy.
        #[arg(long)]
        ancilla: bool,
        /// Number of candidate evaluations.
        #[arg(long)]
        budget: usize,
        /// Random seed; equal seeds give identical output.
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// CP table of the sinusoidal model over couplings and frequencies.
    Example1 {
        /// Couplings.
        #[arg(long, default_value = "0.25,0.5,1,2", allow_hyphen_values = true)]
        lambdas: String,
        /// Frequencies.
        #[arg(long, default_value = "-2,-1,1,2", allow_hyphen_values = true)]
        omegas: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Superactivation report for a single model.
    Sbfi {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of candidate evaluations.
        #[arg(long)]
        budget: usize,
        /// Random seed; equal seeds give identical output.
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Mixture of dephasing semigroups.
    #[arg(long, value_name = "P1,P2,P3")]
    pub mixture: Option<String>,
    /// Constant rates, or `1,1,sin(wt)` for the sinusoidal model.
    #[arg(long, value_name = "G1,G2,G3", allow_hyphen_values = true)]
    pub rates: Option<String>,
    /// Sinusoidal model `(1, 1, sin(omega t))`.
    #[arg(long, value_name = "OMEGA", allow_hyphen_values = true)]
    pub sinusoid: Option<f64>,
    /// CSV file with columns `t,gamma1,gamma2,gamma3`, starting at t = 0.
    #[arg(long, value_name = "FILE")]
    pub tabulated: Option<PathBuf>,
    /// Two rate triples defining a pair of maps.
    #[arg(long, num_args = 2, value_names = ["RATES1", "RATES2"], allow_hyphen_values = true)]
    pub rates_pair: Option<Vec<String>>,
    /// Coupling `lambda` multiplying the rates.
    #[arg(long, default_value_t = 1.0)]
    pub coupling: f64,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    /// First grid time.
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Last grid time.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub points: Option<usize>,
    /// Grid spacing.
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Output format; defaults to the first one the command supports.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    GnuplotDat,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Uniform,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagramModeArg {
    Fig1,
    Fig2,
    Fig3,
}

impl From<DiagramModeArg> for DiagramMode {
    fn from(m: DiagramModeArg) -> Self {
        match m {
            DiagramModeArg::Fig1 => DiagramMode::Fig1,
            DiagramModeArg::Fig2 => DiagramMode::Fig2,
            DiagramModeArg::Fig3 => DiagramMode::Fig3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Classify,
    Diagram,
    Witness,
    Example1,
    Sbfi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    fn resolve(args: &GridArgs, default: GridSpec) -> Result<Option<GridSpec>> {
        if args.t_min.is_none() && args.t_max.is_none() && args.points.is_none() && args.spacing.is_none() {
            return Ok(None);
        }
        let g = GridSpec {
            t_min: args.t_min.unwrap_or(default.t_min),
            t_max: args.t_max.unwrap_or(default.t_max),
            points: args.points.unwrap_or(default.points),
            spacing: args.spacing.unwrap_or(default.spacing),
        };
        g.validate()?;
        Ok(Some(g))
    }

    fn validate(&self) -> Result<()> {
        let min_ok = match self.spacing {
            Spacing::Log => self.t_min > 0.0,
            Spacing::Uniform => self.t_min >= 0.0,
        };
        if !min_ok || !self.t_max.is_finite() || !(self.t_max > self.t_min) || self.points < 3 {
            return Err(Error::InvalidInput(format!(
                "grid needs 0 <= t_min < t_max (t_min > 0 for log spacing) and >= 3 points, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Log => divisibility::log_grid(self.t_min, self.t_max, self.points),
            Spacing::Uniform => bfi::uniform_grid(self.t_min, self.t_max, self.points),
        }
    }
}

/// Validated configuration of one invocation, echoed in JSON reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub models: Vec<RateModel>,
    pub ancilla: bool,
    pub grid: Option<GridSpec>,
    pub tol: f64,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub resolution: Option<usize>,
    pub diagram_mode: Option<DiagramMode>,
    pub diagram_params: Option<DiagramParams>,
    pub lambdas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    fn base(command: Command, out: &OutputArgs, format: Format) -> Self {
        RunConfig {
            command,
            models: Vec::new(),
            ancilla: false,
            grid: None,
            tol: DEFAULT_TOL,
            seed: None,
            budget: None,
            resolution: None,
            diagram_mode: None,
            diagram_params: None,
            lambdas: Vec::new(),
            omegas: Vec::new(),
            output: out.output.clone(),
            format: out.format.unwrap_or(format),
        }
    }

    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let witness_grid = GridSpec { t_min: 0.0, t_max: bfi::DEFAULT_BFI_GRID_END, points: bfi::DEFAULT_BFI_GRID_POINTS, spacing: Spacing::Uniform };
        let log_grid = GridSpec {
            t_min: divisibility::DEFAULT_GRID_START,
            t_max: divisibility::DEFAULT_GRID_END,
            points: divisibility::DEFAULT_GRID_POINTS,
            spacing: Spacing::Log,
        };
        let cfg = match &cli.command {
            CliCommand::Classify { model, tensor_with, grid, tol, out } => {
                let mut c = RunConfig::base(Command::Classify, out, Format::Json);
                c.models = parse_models(model, tensor_with.as_deref())?;
                c.grid = GridSpec::resolve(grid, log_grid)?;
                if !(tol.is_finite() && *tol >= 0.0) {
                    return Err(Error::InvalidInput(format!("tolerance must be finite and >= 0, got {tol}")));
                }
                c.tol = *tol;
                c
            }
            CliCommand::Diagram { mode, resolution, p, t, out } => {
                let mut c = RunConfig::base(Command::Diagram, out, Format::Csv);
                let mode = DiagramMode::from(*mode);
                if *resolution < 2 {
                    return Err(Error::InvalidInput(format!("resolution must be >= 2, got {resolution}")));
                }
                let mut params = DiagramParams::default();
                if let Some(p) = p {
                    let [a, b, w] = parse_triple(p)?;
                    params.p = MixtureWeights::new(a, b, w)?;
                }
                if let Some(t) = t {
                    params.t = parse_time(t)?;
                }
                if mode != DiagramMode::Fig3 && (p.is_some() || t.is_some()) {
                    return Err(Error::InvalidInput("--p and --t only apply to fig3".into()));
                }
                c.diagram_mode = Some(mode);
                c.resolution = Some(*resolution);
                c.diagram_params = (mode == DiagramMode::Fig3).then_some(params);
                c
            }
            CliCommand::Witness { model, tensor_with, ancilla, budget, seed, grid, out } => {
                let mut c = RunConfig::base(Command::Witness, out, Format::Json);
                c.models = parse_models(model, tensor_with.as_deref())?;
                if *ancilla && c.models.len() != 1 {
                    return Err(Error::InvalidInput("--ancilla takes exactly one model".into()));
                }
                if c.models.len() == 1 && !*ancilla {
                    c.models.push(c.models[0].clone());
                }
                c.ancilla = *ancilla;
                c.grid = Some(GridSpec::resolve(grid, witness_grid)?.unwrap_or(witness_grid));
                c.budget = Some(check_budget(*budget)?);
                c.seed = Some(*seed);
                c
            }
            CliCommand::Example1 { lambdas, omegas, grid, out } => {
                let mut c = RunConfig::base(Command::Example1, out, Format::Csv);
                c.lambdas = parse_list(lambdas)?;
                c.omegas = parse_list(omegas)?;
                if c.lambdas.iter().any(|l| !(*l > 0.0)) {
                    return Err(Error::InvalidInput("couplings must be positive".into()));
                }
                let default = GridSpec { t_min: EXAMPLE1_T_MIN, t_max: EXAMPLE1_T_MAX, points: EXAMPLE1_POINTS, spacing: Spacing::Log };
                c.grid = Some(GridSpec::resolve(grid, default)?.unwrap_or(default));
                c
            }
            CliCommand::Sbfi { model, budget, seed, out } => {
                let mut c = RunConfig::base(Command::Sbfi, out, Format::Json);
                c.models = parse_models(model, None)?;
                if c.models.len() != 1 {
                    return Err(Error::InvalidInput("sbfi takes exactly one model".into()));
                }
                c.budget = Some(check_budget(*budget)?);
                c.seed = Some(*seed);
                c
            }
        };
        let allowed: &[Format] = match cfg.command {
            Command::Diagram => &[Format::Csv, Format::Json, Format::GnuplotDat],
            Command::Example1 => &[Format::Csv, Format::Json],
            _ => &[Format::Json],
        };
        if !allowed.contains(&cfg.format) {
            return Err(Error::InvalidInput(format!("format {:?} is not available for {:?}", cfg.format, cfg.command)));
        }
        Ok(cfg)
    }
}

fn check_budget(budget: usize) -> Result<usize> {
    if budget == 0 {
        Err(Error::InvalidInput("budget must be >= 1".into()))
    } else {
        Ok(budget)
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let x: f64 = s.parse().map_err(|_| Error::InvalidInput(format!("cannot parse number {s:?}")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidInput(format!("non-finite number {s:?}")))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let v = s.split(',').map(parse_number).collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(Error::InvalidInput("empty list".into()));
    }
    Ok(v)
}

fn parse_triple(s: &str) -> Result<[f64; 3]> {
    let v = parse_list(s)?;
    v.try_into()
        .map_err(|v: Vec<f64>| Error::InvalidInput(format!("expected three comma-separated values, got {}", v.len())))
}

/// `inf` or a nonnegative number.
pub fn parse_time(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => {
            let t = parse_number(other)?;
            if t < 0.0 {
                return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
            }
            Ok(t)
        }
    }
}

/// Frequency of `sin(t)`, `-sin(2t)`, `sin(0.5*t)` and similar.
fn parse_sine(s: &str) -> Option<f64> {
    let s = s.trim();
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => (-1.0, r.trim_start()),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let inner = rest.strip_prefix("sin(")?.strip_suffix(')')?.trim();
    let coeff = inner.strip_suffix('t')?.trim_end();
    let coeff = coeff.strip_suffix('*').unwrap_or(coeff).trim();
    let w = if coeff.is_empty() { 1.0 } else { coeff.parse::<f64>().ok()? };
    w.is_finite().then_some(sign * w)
}

/// Constant rates `g1,g2,g3`, or the sinusoidal model written `1,1,sin(wt)`.
pub fn parse_rates(s: &str, coupling: f64) -> Result<RateModel> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::InvalidInput(format!("expected three rates, got {s:?}")));
    }
    if let Some(omega) = parse_sine(parts[2]) {
        let ones = parts[..2].iter().all(|p| parse_number(p).map(|x| x == 1.0).unwrap_or(false));
        if !ones {
            return Err(Error::InvalidInput(format!(
                "time-dependent rates must have the form 1,1,sin(wt); got {s:?} (use --tabulated otherwise)"
            )));
        }
        return RateModel::sinusoid3(omega, coupling);
    }
    RateModel::constants(parse_triple(s)?, coupling)
}

fn read_tabulated(path: &Path, coupling: f64) -> Result<RateModel> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let mut times = Vec::new();
    let mut rates = Vec::new();
    for rec in reader.deserialize::<(f64, f64, f64, f64)>() {
        let (t, a, b, c) = rec.map_err(|e| Error::InvalidInput(format!("bad row in {}: {e}", path.display())))?;
        times.push(t);
        rates.push([a, b, c]);
    }
    RateModel::tabulated(times, rates, coupling)
}

/// `kind:params` with kind one of `mixture`, `rates`, `sinusoid`, `tabulated`.
pub fn parse_model_spec(s: &str, coupling: f64) -> Result<RateModel> {
    let (kind, params) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("model {s:?} is not of the form kind:params")))?;
    match kind.trim() {
        "mixture" => {
            let [a, b, c] = parse_triple(params)?;
            Ok(RateModel::mixture(MixtureWeights::new(a, b, c)?))
        }
        "rates" => parse_rates(params, coupling),
        "sinusoid" => RateModel::sinusoid3(parse_number(params)?, coupling),
        "tabulated" => read_tabulated(Path::new(params.trim()), coupling),
        other => Err(Error::InvalidInput(format!("unknown model kind {other:?}"))),
    }
}

fn parse_models(args: &ModelArgs, tensor_with: Option<&str>) -> Result<Vec<RateModel>> {
    let sources = [
        args.mixture.is_some(),
        args.rates.is_some(),
        args.sinusoid.is_some(),
        args.tabulated.is_some(),
        args.rates_pair.is_some(),
    ];
    if sources.iter().filter(|&&b| b).count() != 1 {
        return Err(Error::InvalidInput(
            "give exactly one of --mixture, --rates, --sinusoid, --tabulated, --rates-pair".into(),
        ));
    }
    let c = args.coupling;
    let mut models = if let Some(m) = &args.mixture {
        if c != 1.0 {
            return Err(Error::InvalidInput("mixtures do not take a coupling".into()));
        }
        let [a, b, w] = parse_triple(m)?;
        vec![RateModel::mixture(MixtureWeights::new(a, b, w)?)]
    } else if let Some(r) = &args.rates {
        vec![parse_rates(r, c)?]
    } else if let Some(w) = args.sinusoid {
        vec![RateModel::sinusoid3(w, c)?]
    } else if let Some(path) = &args.tabulated {
        vec![read_tabulated(path, c)?]
    } else {
        let pair = args.rates_pair.as_ref().expect("one source is set");
        pair.iter().map(|r| parse_rates(r, c)).collect::<Result<Vec<_>>>()?
    };
    if let Some(second) = tensor_with {
        if models.len() != 1 {
            return Err(Error::InvalidInput("--tensor-with needs a single first model".into()));
        }
        let m = if second.trim() == "self" {
            models[0].clone()
        } else {
            let coupling = if second.trim_start().starts_with("mixture") { 1.0 } else { c };
            parse_model_spec(second, coupling)?
        };
        models.push(m);
    }
    Ok(models)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelVerdicts {
    pub model: RateModel,
    pub cp_divisible: DivisibilityVerdict,
    pub p_divisible: DivisibilityVerdict,
    pub cp: bool,
    pub p: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResult {
    pub models: Vec<ModelVerdicts>,
    pub tensor: Option<DivisibilityVerdict>,
    /// CP-divisibility of the first model.
    pub cp: bool,
    /// P-divisibility of the first model.
    pub p: bool,
    /// P-divisibility of the product of both models, when two are given.
    pub tensor_p: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example1Row {
    pub lambda: f64,
    pub omega: f64,
    pub is_cp_for_all_t: bool,
    pub first_violation_t: Option<f64>,
}

/// JSON envelope with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub version: String,
    pub config: RunConfig,
    pub result: T,
}

fn grid_for(cfg: &RunConfig, models: &[&RateModel]) -> Vec<f64> {
    match &cfg.grid {
        Some(g) => g.times(),
        None => divisibility::default_grid(models),
    }
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<ClassifyResult> {
    let refs: Vec<&RateModel> = cfg.models.iter().collect();
    let grid = grid_for(cfg, &refs);
    let models = cfg
        .models
        .iter()
        .map(|m| {
            let cp_divisible = divisibility::cp_divisible(m, &grid, cfg.tol)?;
            let p_divisible = divisibility::p_divisible(m, &grid, cfg.tol)?;
            Ok(ModelVerdicts {
                model: m.clone(),
                cp: cp_divisible.label == VerdictLabel::CpDivisible,
                p: p_divisible.label.is_p_divisible(),
                cp_divisible,
                p_divisible,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tensor = match refs.as_slice() {
        [a, b] => Some(divisibility::tensor_p_divisible(a, b, &grid, cfg.tol)?),
        _ => None,
    };
    Ok(ClassifyResult {
        cp: models[0].cp,
        p: models[0].p,
        tensor_p: tensor.as_ref().map(|v| v.label.is_p_divisible()),
        models,
        tensor,
    })
}

pub fn cmd_diagram(cfg: &RunConfig) -> Result<DiagramGrid> {
    let mode = cfg.diagram_mode.ok_or_else(|| Error::InvalidInput("diagram mode missing".into()))?;
    let resolution = cfg.resolution.ok_or_else(|| Error::InvalidInput("resolution missing".into()))?;
    mixtures::diagram(mode, resolution, &cfg.diagram_params.unwrap_or_default())
}

fn stochastic(cfg: &RunConfig) -> Result<(usize, u64)> {
    match (cfg.budget, cfg.seed) {
        (Some(b), Some(s)) => Ok((b, s)),
        _ => Err(Error::InvalidInput("stochastic commands need a budget and a seed".into())),
    }
}

pub fn cmd_witness(cfg: &RunConfig) -> Result<WitnessReport> {
    let (budget, seed) = stochastic(cfg)?;
    let grid = cfg.grid.map(|g| g.times()).unwrap_or_else(bfi::default_bfi_grid);
    for m in &cfg.models {
        bfi::check_invertible(m, &grid)?;
    }
    match (cfg.ancilla, cfg.models.as_slice()) {
        (true, [m]) => bfi::witness_search_ancilla(m, budget, seed, Some(&grid)),
        (false, [a, b]) => bfi::witness_search(a, b, budget, seed, Some(&grid)),
        _ => Err(Error::InvalidInput("witness needs two models, or one with an ancilla".into())),
    }
}

pub fn cmd_example1(cfg: &RunConfig) -> Result<Vec<Example1Row>> {
    let grid = cfg
        .grid
        .ok_or_else(|| Error::InvalidInput("example1 needs a grid".into()))?
        .times();
    let mut rows = Vec::new();
    for &lambda in &cfg.lambdas {
        for &omega in &cfg.omegas {
            let (cp, first) = dynamics::sinusoid_cp_scan(lambda, omega, &grid)?;
            rows.push(Example1Row { lambda, omega, is_cp_for_all_t: cp, first_violation_t: first });
        }
    }
    Ok(rows)
}

pub fn cmd_sbfi(cfg: &RunConfig) -> Result<SbfiReport> {
    let (budget, seed) = stochastic(cfg)?;
    bfi::sbfi_report(&cfg.models[0], budget, seed)
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn json<T: Serialize>(cfg: &RunConfig, result: T) -> Result<String> {
    let report = Report { version: VERSION.to_string(), config: cfg.clone(), result };
    let mut s = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn diagram_csv(grid: &DiagramGrid) -> String {
    let mut s = String::with_capacity(64 * grid.cells.len() + 32);
    s.push_str(DIAGRAM_HEADER);
    s.push('\n');
    for c in &grid.cells {
        let _ = writeln!(s, "{},{},{},{}", fmt_f64(c.coord1), fmt_f64(c.coord2), c.label, fmt_f64(c.margin));
    }
    s
}

/// One whitespace-separated block per label, separated by two blank lines.
pub fn diagram_gnuplot(grid: &DiagramGrid) -> String {
    let mode = match grid.mode {
        DiagramMode::Fig1 => "fig1",
        DiagramMode::Fig2 => "fig2",
        DiagramMode::Fig3 => "fig3",
    };
    let mut s = format!(
        "# qdivide {VERSION} diagram {mode} resolution {}\n# columns: coord1 coord2 margin\n",
        grid.resolution
    );
    let mut first = true;
    for label in RegionLabel::ALL {
        let cells: Vec<&DiagramCell> = grid.cells.iter().filter(|c| c.label == label).collect();
        if cells.is_empty() {
            continue;
        }
        if !first {
            s.push_str("\n\n");
        }
        first = false;
        let _ = writeln!(s, "# label {label}");
        for c in cells {
            let _ = writeln!(s, "{} {} {}", fmt_f64(c.coord1), fmt_f64(c.coord2), fmt_f64(c.margin));
        }
    }
    s
}

pub fn example1_csv(rows: &[Example1Row]) -> String {
    let mut s = String::from(EXAMPLE1_HEADER);
    s.push('\n');
    for r in rows {
        let first = r.first_violation_t.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", fmt_f64(r.lambda), fmt_f64(r.omega), r.is_cp_for_all_t, first);
    }
    s
}

/// Parses the CSV written by [`diagram_csv`].
pub fn parse_diagram_csv(text: &str) -> Result<Vec<DiagramCell>> {
    parse_csv(text, DIAGRAM_HEADER)
}

/// Parses the CSV written by [`example1_csv`].
pub fn parse_example1_csv(text: &str) -> Result<Vec<Example1Row>> {
    parse_csv(text, EXAMPLE1_HEADER)
}

fn parse_csv<T: serde::de::DeserializeOwned>(text: &str, header: &str) -> Result<Vec<T>> {
    if text.lines().next() != Some(header) {
        return Err(Error::InvalidInput(format!("expected header {header:?}")));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| Error::InvalidInput(format!("bad CSV row: {e}"))))
        .collect()
}

/// Output text for a validated configuration.
pub fn render(cfg: &RunConfig) -> Result<String> {
    match cfg.command {
        Command::Classify => json(cfg, cmd_classify(cfg)?),
        Command::Witness => json(cfg, cmd_witness(cfg)?),
        Command::Sbfi => json(cfg, cmd_sbfi(cfg)?),
        Command::Diagram => {
            let grid = cmd_diagram(cfg)?;
            match cfg.format {
                Format::Csv => Ok(diagram_csv(&grid)),
                Format::GnuplotDat => Ok(diagram_gnuplot(&grid)),
                Format::Json => json(cfg, grid),
            }
        }
        Command::Example1 => {
            let rows = cmd_example1(cfg)?;
            match cfg.format {
                Format::Json => json(cfg, rows),
                _ => Ok(example1_csv(&rows)),
            }
        }
    }
}

/// Runs a parsed command line, writing to the configured output.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::from_cli(cli)?;
    let text = render(&cfg)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Error::InvalidInput(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Sizes the global thread pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Numerical(format!("cannot build thread pool: {e}")))
}
