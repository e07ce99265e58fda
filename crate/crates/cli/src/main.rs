use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use netgame_bench::{Experiment, ExperimentConfig};
use netgame_core::dynamics::{self, Algorithm, LearnerConfig, Selection, Termination};
use netgame_core::game::{self, load_game};
use netgame_core::network::{load_network, save_network};
use netgame_core::potential::{self, phi_lq};
use netgame_core::{welfare, Family, LqGame};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "netgame", version, about = "Alpha-potential analysis of asymmetric network games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and measure networks.
    #[command(subcommand)]
    Network(NetworkCmd),
    /// Evaluate utilities and equilibrium gaps.
    #[command(subcommand)]
    Game(GameCmd),
    /// Alpha bounds and sampled checks of the potential.
    #[command(subcommand)]
    Potential(PotentialCmd),
    /// Learning dynamics.
    #[command(subcommand)]
    Dynamics(DynamicsCmd),
    /// Welfare optimizers and price-of-stability bounds.
    #[command(subcommand)]
    Welfare(WelfareCmd),
    /// Experiment batches.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum NetworkCmd {
    /// Sample a network from a family, e.g.
    /// `--family '{"family":"erdos_renyi","p":{"const":0.1}}'`.
    Gen {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `.json` or `.csv`
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the asymmetry and norm metrics of a network file.
    Metrics { network: PathBuf },
}

#[derive(Args)]
struct ProfileArg {
    /// Action profile as a JSON array, or `@path` to a JSON file.
    #[arg(long)]
    profile: String,
}

#[derive(Subcommand)]
enum GameCmd {
    /// Utilities, welfare and potential at a profile.
    Eval {
        game: PathBuf,
        #[command(flatten)]
        profile: ProfileArg,
    },
    /// Best responses and the Nash gap at a profile.
    Brgap {
        game: PathBuf,
        #[command(flatten)]
        profile: ProfileArg,
    },
}

#[derive(Subcommand)]
enum PotentialCmd {
    Report {
        game: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Br,
    Gp,
    ExactBr,
    ExactGp,
    PhiGp,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Br => Algorithm::Br,
            AlgoArg::Gp => Algorithm::Gp,
            AlgoArg::ExactBr => Algorithm::ExactBr,
            AlgoArg::ExactGp => Algorithm::ExactGp,
            AlgoArg::PhiGp => Algorithm::PhiGp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Cyclic,
    RandomImproving,
    RandomProbe,
}

impl From<SelectionArg> for Selection {
    fn from(s: SelectionArg) -> Self {
        match s {
            SelectionArg::Cyclic => Selection::Cyclic,
            SelectionArg::RandomImproving => Selection::RandomImproving,
            SelectionArg::RandomProbe => Selection::RandomProbe,
        }
    }
}

#[derive(Subcommand)]
enum DynamicsCmd {
    /// Run one learner. Exits 0 on termination before the cap, 2 at the cap.
    Run {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, value_enum)]
        algo: AlgoArg,
        /// `auto` uses the closed-form alpha of the game.
        #[arg(long, default_value = "auto")]
        alpha: String,
        /// `auto` uses alpha.
        #[arg(long, default_value = "auto")]
        eps: String,
        /// `auto` uses the certified step bound for gated play and `1/L`
        /// otherwise.
        #[arg(long, default_value = "auto")]
        eta: String,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        #[arg(long, value_enum, default_value = "cyclic")]
        selection: SelectionArg,
        /// Seeds the start profile (with `--random-start`) and the selection.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start from a uniform random profile instead of the box centre.
        #[arg(long)]
        random_start: bool,
        #[arg(long)]
        record_every: Option<usize>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum WelfareCmd {
    Report { game: PathBuf },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Run an experiment. Exits 1 on config errors and 3 when an invariant
    /// check fails.
    Run {
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 picks one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn read_profile(arg: &ProfileArg, g: &LqGame) -> Result<Vec<f64>> {
    let text = match arg.profile.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => arg.profile.clone(),
    };
    let a: Vec<f64> = serde_json::from_str(&text).context("profile must be a JSON array of numbers")?;
    g.check_profile(&a)?;
    Ok(a)
}

fn parse_auto(s: &str, name: &str) -> Result<Option<f64>> {
    if s == "auto" {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .with_context(|| format!("--{name} must be `auto` or a number"))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Network(cmd) => network(cmd),
        Command::Game(cmd) => game_cmd(cmd),
        Command::Potential(PotentialCmd::Report { game, samples, seed }) => {
            let g = load_game(&game)?;
            print_json(&potential::alpha_report(&g, samples, seed)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Dynamics(cmd) => dynamics_cmd(cmd),
        Command::Welfare(WelfareCmd::Report { game }) => {
            let g = load_game(&game)?;
            print_json(&welfare::welfare_ratio(&g)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench(cmd) => bench(cmd),
    }
}

#[derive(Serialize)]
struct MetricsOut {
    n: usize,
    symmetric: bool,
    #[serde(flatten)]
    metrics: netgame_core::NetworkMetrics,
}

fn network(cmd: NetworkCmd) -> Result<ExitCode> {
    match cmd {
        NetworkCmd::Gen { family, n, seed, out } => {
            let family: Family = serde_json::from_str(&family).context("invalid --family")?;
            let net = family.generate(n, seed)?;
            save_network(&net, &out)?;
        }
        NetworkCmd::Metrics { network } => {
            let net = load_network(&network)?;
            print_json(&MetricsOut {
                n: net.n(),
                symmetric: net.is_symmetric(),
                metrics: net.metrics()?,
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EvalOut {
    utilities: Vec<f64>,
    social_welfare: f64,
    phi: f64,
}

#[derive(Serialize)]
struct BrGapOut {
    best_responses: Vec<f64>,
    eps: f64,
    per_player: Vec<f64>,
}

fn game_cmd(cmd: GameCmd) -> Result<ExitCode> {
    match cmd {
        GameCmd::Eval { game, profile } => {
            let g = load_game(&game)?;
            let a = read_profile(&profile, &g)?;
            let utilities = (0..g.n()).map(|i| game::utility(&g, i, &a)).collect::<Result<_, _>>()?;
            print_json(&EvalOut {
                utilities,
                social_welfare: game::social_welfare(&g, &a),
                phi: phi_lq(&g, &a),
            })?;
        }
        GameCmd::Brgap { game, profile } => {
            let g = load_game(&game)?;
            let a = read_profile(&profile, &g)?;
            let best_responses = (0..g.n()).map(|i| game::best_response(&g, i, &a)).collect::<Result<_, _>>()?;
            let gap = g.nash_gap(&a);
            print_json(&BrGapOut {
                best_responses,
                eps: gap.eps,
                per_player: gap.per_player,
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RunOut {
    algorithm: &'static str,
    alpha: f64,
    eps: f64,
    eta: Option<f64>,
    iters: usize,
    updates: usize,
    terminated_by: Termination,
    certified: bool,
    ne_gap_final: f64,
    phi_initial: f64,
    phi_final: f64,
    max_phi_decrease: f64,
    final_profile: Vec<f64>,
}

fn dynamics_cmd(cmd: DynamicsCmd) -> Result<ExitCode> {
    let DynamicsCmd::Run {
        game,
        algo,
        alpha,
        eps,
        eta,
        max_iters,
        selection,
        seed,
        random_start,
        record_every,
        trace,
    } = cmd;
    let g = load_game(&game)?;
    let algorithm = Algorithm::from(algo);
    let gated = matches!(algorithm, Algorithm::Br | Algorithm::Gp);
    let alpha = match parse_auto(&alpha, "alpha")? {
        Some(a) => a,
        None if gated => potential::alpha_lq(&g),
        None => 0.0,
    };
    let eps = parse_auto(&eps, "eps")?.unwrap_or(alpha);
    let is_gradient = matches!(algorithm, Algorithm::Gp | Algorithm::ExactGp | Algorithm::PhiGp);
    let eta = if is_gradient {
        Some(match parse_auto(&eta, "eta")? {
            Some(e) => e,
            None if algorithm == Algorithm::Gp => dynamics::step_bound(&g, alpha)?.eta_bar_max,
            None => 1.0 / potential::smoothness_l(&g)?,
        })
    } else {
        None
    };
    let mut cfg = LearnerConfig::new(alpha, eps)
        .with_max_iters(max_iters)
        .with_selection(selection.into(), seed);
    if let Some(e) = eta {
        cfg = cfg.with_eta(e);
    }
    if let Some(k) = record_every {
        cfg = cfg.with_record_every(k);
    }
    let a0 = if random_start {
        dynamics::random_start(&g, &mut ChaCha8Rng::seed_from_u64(seed))
    } else {
        g.action_bounds().iter().map(|b| b.lerp(0.5)).collect()
    };
    let tr = dynamics::run(algorithm, &g, &cfg, &a0)?;
    if let Some(path) = trace {
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        dynamics::write_trace_csv(&tr, io::BufWriter::new(file))?;
    }
    print_json(&RunOut {
        algorithm: algorithm.name(),
        alpha,
        eps,
        eta,
        iters: tr.iters,
        updates: tr.updates,
        terminated_by: tr.terminated_by,
        certified: tr.certified,
        ne_gap_final: tr.ne_gap_final,
        phi_initial: tr.phi_values[0],
        phi_final: *tr.phi_values.last().expect("initial value"),
        max_phi_decrease: tr.max_phi_decrease,
        final_profile: tr.final_profile.into_vec(),
    })?;
    Ok(if tr.terminated_by == Termination::MaxIters {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

#[derive(Serialize)]
struct BenchOut<'a> {
    experiment: &'static str,
    out: &'a Path,
    units_total: usize,
    units_run: usize,
    units_skipped: usize,
    invariant_failures: Vec<String>,
}

fn bench(cmd: BenchCmd) -> Result<ExitCode> {
    let BenchCmd::Run {
        experiment,
        config,
        out,
        jobs,
        seed,
    } = cmd;
    let flag = match &experiment {
        Some(s) => Some(Experiment::parse(s).with_context(|| format!("unknown experiment {s:?}"))?),
        None => None,
    };
    let mut cfg = match (&config, flag) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(e)) => ExperimentConfig::new(e),
        (None, None) => bail!("give --experiment or --config"),
    };
    if let Some(e) = flag {
        if e != cfg.experiment {
            bail!("--experiment {} disagrees with the config's {}", e.name(), cfg.experiment.name());
        }
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let out = out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(cfg.experiment.name()));
    let plan = cfg.resolve()?;
    let summary = netgame_bench::run(&plan, &out, jobs)?;
    let failed = !summary.invariant_failures.is_empty();
    print_json(&BenchOut {
        experiment: plan.experiment.name(),
        out: &out,
        units_total: summary.units_total,
        units_run: summary.units_run,
        units_skipped: summary.units_skipped,
        invariant_failures: summary.invariant_failures,
    })?;
    Ok(if failed { ExitCode::from(3) } else { ExitCode::SUCCESS })
}
