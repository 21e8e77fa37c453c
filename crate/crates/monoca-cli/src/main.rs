//! `monoca` — command-line front end for the monotone cellular-automaton
//! toolkit.
//!
//! Subcommands map one-to-one onto the library engines: `check` (rule
//! validation), `rates` (certified edge speeds), `forcing` (minimal forcing
//! sets, hull intersections, shrinking certificates), `decide`
//! (eroder / stable-eroder verdicts), `simulate` (reproducible noisy
//! trajectory dumps), `survival` (island-survival estimates), `probe`
//! (density and ergodicity experiments), `polygon` (witness systems tracing
//! a nonzero cell back to recorded errors), and `render` (plain-PGM
//! space-time diagrams).
//!
//! Exit codes: `0` success, `1` usage error, `2` computation or input-data
//! error, `3` a decision procedure exhausted its budgets and returned
//! `unknown` (so scripts can detect budget exhaustion). All reports are
//! line-oriented and tab-separated; the only non-TSV output is PGM. The
//! normative description of every format lives in `docs/formats.md`.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand, ValueEnum};
use monoca_core::forcing::{DEFAULT_K_MAX, DEFAULT_SUBSET_BUDGET};
use monoca_core::noise::{run_noisy_trial, Boundary, NoiseModel, NoisyTrajectory, SimConfig};
use monoca_core::polygon::{
    build_level_data, construct_system, encode_system, verify_system, LevelData,
};
use monoca_core::rule::{parse_rule, Configuration, LocalRule, State};
use monoca_core::step::{rate, rate_table, RateEstimate, RateParams};
use monoca_core::{
    density_zero, ergodicity_probe, is_eroder, is_stable_eroder, island_survival,
    minimal_forcing_sets, shrinking_certificate, tail_nonzero_density, tau, Answer, DecideError,
    DecideParams, ForcingError, NoiseError, PolygonError, RuleError,
};
use rayon::prelude::*;

/// Analysis and simulation of one-dimensional monotone cellular automata.
#[derive(Parser)]
#[command(name = "monoca", version, about, max_term_width = 100)]
struct Cli {
    /// Number of worker threads for parallel sections (default: one per
    /// logical CPU). Output bytes are identical for every worker count.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a rule and report its basic properties.
    Check(CheckArgs),
    /// Compute the certified edge-rate table (or one pair's rates).
    Rates(RatesArgs),
    /// Enumerate minimal forcing sets, hull intersections, and a shrinking
    /// certificate for one ordered quiescent pair.
    Forcing(ForcingArgs),
    /// Decide the eroder and stable-eroder properties.
    Decide(DecideArgs),
    /// Simulate noisy trajectories and dump them in the ca-traj v1 format.
    Simulate(SimulateArgs),
    /// Estimate island-survival probabilities across island sizes.
    Survival(SurvivalArgs),
    /// Monte Carlo probes: origin density, pooled tail density, or the
    /// two-start ergodicity distance series.
    Probe(ProbeArgs),
    /// Construct, verify, and encode a polygon witness system on a noisy
    /// trajectory conditioned on a nonzero root cell.
    Polygon(PolygonArgs),
    /// Render a space-time diagram as a plain PGM image.
    Render(RenderArgs),
}

#[derive(Args)]
struct RuleOpt {
    /// Rule reference: `builtin:<name>[:<param>]` (galperin3, min2, bidir3,
    /// wrapped4, decrement:<m>) or a path to a `ca-rule v1` file.
    #[arg(long, value_name = "REF")]
    rule: String,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    rule: RuleOpt,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    rule: RuleOpt,
    /// Restrict the report to one ordered pair `a,b`.
    #[arg(long, value_name = "A,B")]
    pair: Option<String>,
    /// Step-evolution horizon of the rate engine [default: 4096].
    #[arg(long = "T", value_name = "STEPS", default_value_t = 4096)]
    horizon: usize,
    /// Largest denominator tried by increment stabilization [default: 64].
    #[arg(long, value_name = "D", default_value_t = 64)]
    denominator_bound: usize,
}

#[derive(Args)]
struct ForcingArgs {
    #[command(flatten)]
    rule: RuleOpt,
    /// Ordered quiescent pair `a,b` (a < b).
    #[arg(long, value_name = "A,B")]
    pair: String,
    /// Largest forcing level to enumerate [default: 8].
    #[arg(long, value_name = "K", default_value_t = DEFAULT_K_MAX)]
    k_max: usize,
    /// Per-level subset-enumeration budget [default: 4194304].
    #[arg(long, value_name = "N", default_value_t = DEFAULT_SUBSET_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct DecideArgs {
    #[command(flatten)]
    rule: RuleOpt,
    /// Largest forcing level searched for certificates [default: 8].
    #[arg(long, value_name = "K", default_value_t = DEFAULT_K_MAX)]
    k_max: usize,
    /// Per-level subset-enumeration budget [default: 4194304].
    #[arg(long, value_name = "N", default_value_t = DEFAULT_SUBSET_BUDGET)]
    budget: u64,
    /// Step-evolution horizon of the rate engine [default: 4096].
    #[arg(long = "T", value_name = "STEPS", default_value_t = 4096)]
    horizon: usize,
    /// Largest denominator tried by increment stabilization [default: 64].
    #[arg(long, value_name = "D", default_value_t = 64)]
    denominator_bound: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    rule: RuleOpt,
    /// Initial window: `const:<s>`, `island:<s>x<n>`, `step:<a>,<b>`, or
    /// `cells:<digits>` (base-36, centered on a 0 background).
    #[arg(long, value_name = "INIT", default_value = "const:0")]
    init: String,
    /// Window width in cells [default: 64].
    #[arg(long, value_name = "W", default_value_t = 64)]
    width: usize,
    /// Number of transitions to simulate [default: 100].
    #[arg(
        long = "T",
        visible_alias = "steps",
        value_name = "STEPS",
        default_value_t = 100
    )]
    horizon: usize,
    /// Per-cell error probability [default: 0].
    #[arg(long, value_name = "P", default_value_t = 0.0)]
    eps: f64,
    /// Noise model: `max:<a>`, `set:<a>`, or `custom:<w0>,<w1>,…`
    /// [default: max:<m>, the rule's top state].
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,
    /// PRF seed shared by all trials [default: 0].
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Number of independent trials to dump [default: 1].
    #[arg(long, value_name = "N", default_value_t = 1)]
    trials: usize,
    /// Boundary handling: `periodic` or `fixed:<s>` [default: periodic].
    #[arg(long, value_name = "B", default_value = "periodic")]
    boundary: String,
    /// Write the report to a file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurvivalArgs {
    #[command(flatten)]
    rule: RuleOpt,
    /// Island state ω [default: the rule's top state].
    #[arg(long, value_name = "S")]
    omega: Option<State>,
    /// Comma-separated island half-widths to test [default: 4,16,64].
    #[arg(long = "N", value_name = "N1,N2,…", default_value = "4,16,64")]
    n_list: String,
    /// Per-cell error probability [default: 0.05].
    #[arg(long, value_name = "P", default_value_t = 0.05)]
    eps: f64,
    /// Noise model (see `simulate`) [default: max:<m>].
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,
    /// Survival horizon in transitions [default: 500].
    #[arg(long = "T", value_name = "STEPS", default_value_t = 500)]
    horizon: usize,
    /// PRF seed [default: 0].
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Trials per island size [default: 200].
    #[arg(long, value_name = "N", default_value_t = 200)]
    trials: usize,
    /// Write the report to a file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// Which Monte Carlo probe to run.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProbeKind {
    /// Per-step frequency of state 0 at the origin, from the all-zero start.
    Density,
    /// Nonzero density pooled over the final rows of all trials.
    Tail,
    /// Total-variation distance between the origin marginals of the
    /// all-zero-start and all-max-start ensembles, per step.
    Ergodicity,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    rule: RuleOpt,
    /// Probe to run [default: ergodicity].
    #[arg(long, value_enum, default_value_t = ProbeKind::Ergodicity)]
    kind: ProbeKind,
    /// Per-cell error probability [default: 0.05].
    #[arg(long, value_name = "P", default_value_t = 0.05)]
    eps: f64,
    /// Noise model (see `simulate`) [default: max:<m>].
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,
    /// Window width in cells [default: 64].
    #[arg(long, value_name = "W", default_value_t = 64)]
    width: usize,
    /// Number of transitions [default: 200].
    #[arg(long = "T", value_name = "STEPS", default_value_t = 200)]
    horizon: usize,
    /// Number of trials [default: 500].
    #[arg(long, value_name = "N", default_value_t = 500)]
    trials: usize,
    /// PRF seed [default: 0].
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Boundary handling: `periodic` or `fixed:<s>` [default: periodic].
    /// The ergodicity probe always runs on the periodic boundary.
    #[arg(long, value_name = "B", default_value = "periodic")]
    boundary: String,
    /// Write the report to a file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PolygonArgs {
    #[command(flatten)]
    rule: RuleOpt,
    /// Quiescent chain `c1,c2,…` for the level guarantees
    /// [default: 0,<m>, the rule's extreme states].
    #[arg(long, value_name = "C1,C2,…")]
    chain: Option<String>,
    /// Initial window (see `simulate`) [default: const:0].
    #[arg(long, value_name = "INIT", default_value = "const:0")]
    init: String,
    /// Window width in cells [default: 160].
    #[arg(long, value_name = "W", default_value_t = 160)]
    width: usize,
    /// Number of transitions [default: 40].
    #[arg(long = "T", value_name = "STEPS", default_value_t = 40)]
    horizon: usize,
    /// Per-cell error probability [default: 0.1].
    #[arg(long, value_name = "P", default_value_t = 0.1)]
    eps: f64,
    /// Noise model (see `simulate`) [default: max:<m>].
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,
    /// PRF seed [default: 0].
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Largest trial index scanned for a nonzero root [default: 100].
    #[arg(long, value_name = "N", default_value_t = 100)]
    trials: usize,
    /// Subset budget for the level-certificate search [default: 65536].
    #[arg(long, value_name = "N", default_value_t = 1 << 16)]
    budget: u64,
    /// Boundary handling: `periodic` or `fixed:<s>` [default: fixed:0].
    #[arg(long, value_name = "B", default_value = "fixed:0")]
    boundary: String,
    /// Write the report to a file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    rule: RuleOpt,
    /// Initial window (see `simulate`) [default: const:0].
    #[arg(long, value_name = "INIT", default_value = "const:0")]
    init: String,
    /// Window width in cells (image width) [default: 64].
    #[arg(long, value_name = "W", default_value_t = 64)]
    width: usize,
    /// Number of transitions (image height minus one) [default: 64].
    #[arg(
        long = "T",
        visible_alias = "steps",
        value_name = "STEPS",
        default_value_t = 64
    )]
    horizon: usize,
    /// Per-cell error probability; 0 renders the deterministic run
    /// [default: 0].
    #[arg(long, value_name = "P", default_value_t = 0.0)]
    eps: f64,
    /// Noise model (see `simulate`) [default: max:<m>].
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,
    /// PRF seed [default: 0].
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Trial index to render [default: 0].
    #[arg(long, value_name = "K", default_value_t = 0)]
    trial: u64,
    /// Overlay the polygon witness system: border vertices render as 255.
    #[arg(long)]
    overlay: bool,
    /// Quiescent chain for the overlay's level guarantees
    /// [default: 0,<m>].
    #[arg(long, value_name = "C1,C2,…")]
    chain: Option<String>,
    /// Subset budget for the overlay's certificate search [default: 65536].
    #[arg(long, value_name = "N", default_value_t = 1 << 16)]
    budget: u64,
    /// Boundary handling: `periodic` or `fixed:<s>` [default: fixed:0].
    #[arg(long, value_name = "B", default_value = "fixed:0")]
    boundary: String,
    /// Write the image to a file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// A command failure, carrying the process exit code.
enum Failure {
    /// Malformed flags or argument grammar (exit 1).
    Usage(String),
    /// Computation or input-data error (exit 2).
    Run(String),
    /// A decision procedure exhausted its budgets (exit 3).
    Undecided(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Run(_) => 2,
            Failure::Undecided(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Run(m) | Failure::Undecided(m) => m,
        }
    }
}

macro_rules! from_run_error {
    ($($ty:ty),+) => {$(
        impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                Failure::Run(e.to_string())
            }
        }
    )+};
}

from_run_error!(
    RuleError,
    NoiseError,
    ForcingError,
    DecideError,
    PolygonError
);

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            process::exit(code);
        }
    };
    let outcome = match cli.workers {
        None => run_command(cli.command),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run_command(cli.command)),
            Err(e) => Err(Failure::Run(format!("cannot build worker pool: {e}"))),
        },
    };
    match outcome {
        Ok(()) => {}
        Err(f) => {
            eprintln!("monoca: {}", f.message());
            process::exit(f.code());
        }
    }
}

fn run_command(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check(args) => cmd_check(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Forcing(args) => cmd_forcing(args),
        Command::Decide(args) => cmd_decide(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Survival(args) => cmd_survival(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Polygon(args) => cmd_polygon(args),
        Command::Render(args) => cmd_render(args),
    }
}

// ---------------------------------------------------------------------------
// Argument parsing helpers
// ---------------------------------------------------------------------------

fn usage(message: String) -> Failure {
    Failure::Usage(message)
}

fn load_rule(spec: &str) -> Result<LocalRule, Failure> {
    if let Some(rest) = spec.strip_prefix("builtin:") {
        let (name, param) = match rest.split_once(':') {
            Some((name, param)) => {
                let param = param
                    .parse::<u32>()
                    .map_err(|_| usage(format!("builtin parameter `{param}` is not an integer")))?;
                (name, Some(param))
            }
            None => (rest, None),
        };
        LocalRule::builtin(name, param).map_err(|e| usage(e.to_string()))
    } else {
        let text = fs::read_to_string(spec)
            .map_err(|e| Failure::Run(format!("cannot read rule file `{spec}`: {e}")))?;
        parse_rule(&text).map_err(|e| Failure::Run(format!("{spec}: {e}")))
    }
}

fn parse_state(s: &str) -> Result<State, Failure> {
    s.trim()
        .parse::<State>()
        .map_err(|_| usage(format!("`{s}` is not a state")))
}

fn parse_pair(s: &str) -> Result<(State, State), Failure> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| usage(format!("pair `{s}` must be `a,b`")))?;
    Ok((parse_state(a)?, parse_state(b)?))
}

fn parse_state_list(s: &str) -> Result<Vec<State>, Failure> {
    s.split(',').map(parse_state).collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("`{part}` is not a count")))
        })
        .collect()
}

fn parse_boundary(s: &str) -> Result<Boundary, Failure> {
    if s == "periodic" {
        return Ok(Boundary::Periodic);
    }
    match s.strip_prefix("fixed:") {
        Some(state) => Ok(Boundary::FixedQuiescent(parse_state(state)?)),
        None => Err(usage(format!(
            "boundary `{s}` must be `periodic` or `fixed:<s>`"
        ))),
    }
}

fn parse_model(spec: Option<&str>, eps: f64, rule: &LocalRule) -> Result<NoiseModel, Failure> {
    let Some(spec) = spec else {
        return Ok(NoiseModel::independent_max(rule.max_state(), eps));
    };
    if let Some(state) = spec.strip_prefix("max:") {
        Ok(NoiseModel::independent_max(parse_state(state)?, eps))
    } else if let Some(state) = spec.strip_prefix("set:") {
        Ok(NoiseModel::independent_set(parse_state(state)?, eps))
    } else if let Some(weights) = spec.strip_prefix("custom:") {
        let weights: Result<Vec<f64>, Failure> = weights
            .split(',')
            .map(|w| {
                w.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("`{w}` is not a weight")))
            })
            .collect();
        Ok(NoiseModel::custom(weights?, eps))
    } else {
        Err(usage(format!(
            "model `{spec}` must be `max:<a>`, `set:<a>`, or `custom:<w0>,<w1>,…`"
        )))
    }
}

/// Builds the initial window from an `--init` spec. The window spans
/// coordinates `[-(width/2), width - 1 - width/2]` so the origin cell is the
/// one reported by the probes.
fn parse_init(spec: &str, width: usize, rule: &LocalRule) -> Result<Configuration, Failure> {
    let m = rule.max_state();
    let check_state = |s: State| -> Result<State, Failure> {
        if s > m {
            Err(usage(format!("state {s} exceeds the rule's top state {m}")))
        } else {
            Ok(s)
        }
    };
    let mut cells = vec![0 as State; width];
    if let Some(state) = spec.strip_prefix("const:") {
        let s = check_state(parse_state(state)?)?;
        cells.fill(s);
    } else if let Some(rest) = spec.strip_prefix("island:") {
        let (state, len) = rest
            .split_once('x')
            .ok_or_else(|| usage(format!("island spec `{rest}` must be `<s>x<n>`")))?;
        let s = check_state(parse_state(state)?)?;
        let n = len
            .parse::<usize>()
            .map_err(|_| usage(format!("`{len}` is not a length")))?;
        if n > width {
            return Err(usage(format!("island length {n} exceeds width {width}")));
        }
        let start = (width - n) / 2;
        cells[start..start + n].fill(s);
    } else if let Some(rest) = spec.strip_prefix("step:") {
        let (a, b) = parse_pair(rest)?;
        let a = check_state(a)?;
        let b = check_state(b)?;
        let split = width / 2;
        cells[..split].fill(a);
        cells[split..].fill(b);
    } else if let Some(digits) = spec.strip_prefix("cells:") {
        let parsed: Result<Vec<State>, Failure> = digits
            .chars()
            .map(|c| {
                c.to_digit(36)
                    .map(|d| d as State)
                    .ok_or_else(|| usage(format!("`{c}` is not a base-36 state digit")))
            })
            .collect();
        let parsed = parsed?;
        for &s in &parsed {
            check_state(s)?;
        }
        if parsed.len() > width {
            return Err(usage(format!(
                "{} explicit cells exceed width {width}",
                parsed.len()
            )));
        }
        let start = (width - parsed.len()) / 2;
        cells[start..start + parsed.len()].copy_from_slice(&parsed);
    } else {
        return Err(usage(format!(
            "init `{spec}` must be `const:<s>`, `island:<s>x<n>`, `step:<a>,<b>`, or `cells:<digits>`"
        )));
    }
    let lo = -((width / 2) as i64);
    Ok(Configuration::new(lo, cells, 0, 0))
}

fn emit(output: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, output)
            .map_err(|e| Failure::Run(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(output.as_bytes())
                .and_then(|()| lock.flush())
                .map_err(|e| Failure::Run(format!("cannot write to standard output: {e}")))
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    let rule = load_rule(&args.rule.rule)?;
    let mut out = String::new();
    out.push_str(&format!("states\t{}\n", rule.state_count()));
    out.push_str(&format!("radius\t{}\n", rule.radius()));
    out.push_str(&format!("entries\t{}\n", rule.table().len()));
    match rule.is_monotone() {
        Ok(()) => out.push_str("monotone\tyes\n"),
        Err(e) => {
            out.push_str("monotone\tno\n");
            out.push_str(&format!("note\t{e}\n"));
        }
    }
    let quiescent: Vec<String> = rule
        .quiescent_states()
        .iter()
        .map(|s| s.to_string())
        .collect();
    out.push_str(&format!("quiescent\t{{{}}}\n", quiescent.join(",")));
    emit(&out, None)
}

fn rate_line(est: &RateEstimate) -> String {
    let (a, b) = est.pair;
    format!(
        "rate\t{a}\t{b}\t{}\t{}\t{}\n",
        est.side,
        est.render_value(),
        est.status
    )
}

fn cmd_rates(args: RatesArgs) -> Result<(), Failure> {
    let rule = load_rule(&args.rule.rule)?;
    let params = RateParams {
        t_max: args.horizon,
        denominator_bound: args.denominator_bound,
        ..RateParams::default()
    };
    let out = match &args.pair {
        Some(pair) => {
            let (a, b) = parse_pair(pair)?;
            let rates = rate(&rule, a, b, &params)?;
            format!("{}{}", rate_line(&rates.l), rate_line(&rates.r))
        }
        None => rate_table(&rule, &params)?.report(),
    };
    emit(&out, None)
}

fn cmd_forcing(args: ForcingArgs) -> Result<(), Failure> {
    let rule = load_rule(&args.rule.rule)?;
    let (a, b) = parse_pair(&args.pair)?;
    let mut out = String::new();
    for k in 1..=args.k_max {
        let family = minimal_forcing_sets(&rule, a, b, k, args.budget)?;
        out.push_str(&family.report());
        if !family.complete() {
            out.push_str(&format!("truncated\t{a}\t{b}\t{k}\n"));
        }
        let hull = tau(&rule, a, b, k, args.budget)?;
        let interval = match hull.interval {
            Some((lo, hi)) => format!("[{lo},{hi}]"),
            None => "empty".to_string(),
        };
        let exactness = if hull.complete {
            "exact"
        } else {
            "upper-bound"
        };
        out.push_str(&format!("tau\t{a}\t{b}\t{k}\t{interval}\t{exactness}\n"));
    }
    if let Some(cert) = shrinking_certificate(&rule, a, b, args.k_max, args.budget)? {
        let render = |set: &[i64]| {
            let cells: Vec<String> = set.iter().map(|v| v.to_string()).collect();
            format!("{{{}}}", cells.join(","))
        };
        out.push_str(&format!(
            "certificate\t{a}\t{b}\t{}\t{}\t{}\n",
            cert.k,
            render(&cert.u),
            render(&cert.v)
        ));
    }
    emit(&out, None)
}

fn cmd_decide(args: DecideArgs) -> Result<(), Failure> {
    let rule = load_rule(&args.rule.rule)?;
    let params = DecideParams {
        rate: RateParams {
            t_max: args.horizon,
            denominator_bound: args.denominator_bound,
            ..RateParams::default()
        },
        k_max: args.k_max,
        forcing_budget: args.budget,
        ..DecideParams::default()
    };
    let eroder = is_eroder(&rule, &params)?;
    let stable = is_stable_eroder(&rule, &params)?;
    let mut out = String::new();
    out.push_str(&format!("eroder\t{}\n", eroder.answer));
    out.push_str(&format!("stable\t{}\n", stable.answer));
    if let Some(chain) = stable.chain_string() {
        out.push_str(&format!("chain\t{chain}\n"));
    }
    emit(&out, None)?;
    if eroder.answer == Answer::Unknown || stable.answer == Answer::Unknown {
        return Err(Failure::Undecided(
            "a decision procedure exhausted its budgets; raise --T, --k-max, or --budget"
                .to_string(),
        ));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let rule = load_rule(&args.rule.rule)?;
    let config = SimConfig {
        width: args.width,
        boundary: parse_boundary(&args.boundary)?,
        horizon: args.horizon,
        seed: args.seed,
        trials: args.trials,
    };
    let model = parse_model(args.model.as_deref(), args.eps, &rule)?;
    let initial = parse_init(&args.init, args.width, &rule)?;
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1".to_string()));
    }
    let dumps: Result<Vec<String>, NoiseError> = (0..args.trials)
        .into_par_iter()
        .map(|trial| run_noisy_trial(&rule, &model, &config, &initial, trial as u64)?.dump())
        .collect();
    emit(&dumps?.concat(), args.out.as_ref())
}

fn cmd_survival(args: SurvivalArgs) -> Result<(), Failure> {
    let rule = load_rule(&args.rule.rule)?;
    let omega = args.omega.unwrap_or(rule.max_state());
    let n_list = parse_usize_list(&args.n_list)?;
    let model = parse_model(args.model.as_deref(), args.eps, &rule)?;
    // Width and boundary are auto-sized per island; only the horizon, seed,
    // and trial count matter here.
    let config = SimConfig {
        width: 2 * rule.radius() + 1,
        boundary: Boundary::FixedQuiescent(0),
        horizon: args.horizon,
        seed: args.seed,
        trials: args.trials,
    };
    let points = island_survival(&rule, omega, &n_list, &model, &config)?;
    let mut out = String::new();
    for p in &points {
        out.push_str(&p.report_line());
        out.push('\n');
    }
    emit(&out, args.out.as_ref())
}

fn cmd_probe(args: ProbeArgs) -> Result<(), Failure> {
    let rule = load_rule(&args.rule.rule)?;
    let config = SimConfig {
        width: args.width,
        boundary: parse_boundary(&args.boundary)?,
        horizon: args.horizon,
        seed: args.seed,
        trials: args.trials,
    };
    let model = parse_model(args.model.as_deref(), args.eps, &rule)?;
    let mut out = String::new();
    match args.kind {
        ProbeKind::Density => {
            for p in density_zero(&rule, &model, &config)? {
                out.push_str(&p.report_line());
                out.push('\n');
            }
        }
        ProbeKind::Tail => {
            let e = tail_nonzero_density(&rule, &model, &config)?;
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\n",
                config.horizon, e.estimate, e.ci_low, e.ci_high
            ));
        }
        ProbeKind::Ergodicity => {
            for p in ergodicity_probe(&rule, &model, &config)? {
                out.push_str(&p.report_line());
                out.push('\n');
            }
        }
    }
    emit(&out, args.out.as_ref())
}

/// Resolves the chain spec and builds the per-band guarantees.
fn chain_data(rule: &LocalRule, chain: Option<&str>, budget: u64) -> Result<LevelData, Failure> {
    let chain = match chain {
        Some(spec) => parse_state_list(spec)?,
        None => vec![0, rule.max_state()],
    };
    Ok(build_level_data(rule, &chain, budget)?)
}

/// The rule whose single steps match the level data's bands: the base rule
/// when the common certificate level is 1, otherwise the powered rule.
fn powered_rule(data: &LevelData, base: &LocalRule) -> Result<LocalRule, Failure> {
    match &data.rule {
        Some(rule) => Ok(rule.clone()),
        None if data.power == 1 => Ok(base.clone()),
        None => Err(Failure::Run(format!(
            "the chain needs rule power {}, whose table exceeds the size cap",
            data.power
        ))),
    }
}

/// The nonzero cell of the final row nearest the window center among the
/// columns whose full dependency cone lies inside the window.
fn conditioned_root(traj: &NoisyTrajectory, radius: usize) -> Option<(i64, i64)> {
    let t = traj.horizon as i64;
    let reach = radius as i64 * t;
    let center = traj.width as i64 / 2;
    let row = &traj.rows[traj.horizon];
    (reach..=traj.width as i64 - 1 - reach)
        .filter(|&i| row[i as usize] != 0)
        .min_by_key(|&i| ((i - center).abs(), i))
        .map(|i| (i, t))
}

fn cmd_polygon(args: PolygonArgs) -> Result<(), Failure> {
    let base = load_rule(&args.rule.rule)?;
    let data = chain_data(&base, args.chain.as_deref(), args.budget)?;
    let rule = powered_rule(&data, &base)?;
    let config = SimConfig {
        width: args.width,
        boundary: parse_boundary(&args.boundary)?,
        horizon: args.horizon,
        seed: args.seed,
        trials: 1,
    };
    let model = parse_model(args.model.as_deref(), args.eps, &rule)?;
    let initial = parse_init(&args.init, args.width, &rule)?;
    let mut found = None;
    for trial in 0..args.trials as u64 {
        let traj = run_noisy_trial(&rule, &model, &config, &initial, trial)?;
        if let Some(root) = conditioned_root(&traj, data.radius) {
            found = Some((trial, traj, root));
            break;
        }
    }
    let Some((trial, traj, root)) = found else {
        return Err(Failure::Run(format!(
            "no trial in 0..{} left a nonzero cell in the cone-safe columns of the final row",
            args.trials
        )));
    };
    let system = construct_system(&rule, &data, &traj, root)?;
    let report = verify_system(&system, &traj, &data);
    let walk = encode_system(&system, &data)?;
    let mut out = format!("trial\t{trial}\n");
    out.push_str(&system.dump());
    out.push_str(&walk.render());
    out.push_str(&report.render());
    emit(&out, args.out.as_ref())?;
    if !report.all_pass() {
        return Err(Failure::Run(
            "witness verification failed; see the check lines".to_string(),
        ));
    }
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), Failure> {
    let base = load_rule(&args.rule.rule)?;
    let (rule, data) = if args.overlay {
        let data = chain_data(&base, args.chain.as_deref(), args.budget)?;
        (powered_rule(&data, &base)?, Some(data))
    } else {
        (base, None)
    };
    let config = SimConfig {
        width: args.width,
        boundary: parse_boundary(&args.boundary)?,
        horizon: args.horizon,
        seed: args.seed,
        trials: 1,
    };
    let model = parse_model(args.model.as_deref(), args.eps, &rule)?;
    let initial = parse_init(&args.init, args.width, &rule)?;
    let traj = run_noisy_trial(&rule, &model, &config, &initial, args.trial)?;

    let m = rule.max_state() as u32;
    let mut pixels: Vec<Vec<u32>> = traj
        .rows
        .iter()
        .map(|row| row.iter().map(|&s| 255 * s as u32 / m).collect())
        .collect();
    if let Some(data) = data {
        let root = conditioned_root(&traj, data.radius).ok_or_else(|| {
            Failure::Run(
                "overlay needs a nonzero cell in the cone-safe columns of the final row"
                    .to_string(),
            )
        })?;
        let system = construct_system(&rule, &data, &traj, root)?;
        for level in &system.levels {
            for poly in &level.polygons {
                for v in &poly.vertices {
                    pixels[v.at.1 as usize][v.at.0 as usize] = 255;
                }
            }
        }
    }

    let mut out = format!("P2\n{} {}\n255\n", traj.width, traj.horizon + 1);
    for row in &pixels {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    emit(&out, args.out.as_ref())
}
