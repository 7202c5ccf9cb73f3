use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tempreg::envs::{room_world, three_state_variance_mdp};
use tempreg::experiments::{
    run_all, run_bias, run_mixing, run_noisy_walk, run_room, run_variance, summarize, write_output, write_summary,
    ExperimentOutput, Summary, SweepPlan,
};
use tempreg::{backward_matrix, regularized_solve, solve_exact, RegularizerSpec, TabularMdp};

/// Temporally regularized value estimation: exact solves and experiment sweeps.
#[derive(Parser, Debug)]
#[command(name = "tempreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an MDP exactly with and without the regularizer and compare.
    Solve(SolveArgs),
    /// Distance of the mixed chain's powers to the limit matrix, on random chains.
    Mixing(RunArgs),
    /// Bias of the regularized fixed point versus reward smoothness.
    Bias(RunArgs),
    /// Variance of the online estimate on the three-state ring.
    Variance(RunArgs),
    /// Learning speed on the two-room gridworld.
    Room(RunArgs),
    /// Semi-gradient TD on the noisy one-dimensional walk.
    NoisyWalk(RunArgs),
    /// Every experiment: six CSV files and summary.json.
    All(RunArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// MDP to solve: `room`, `variance`, or a path to an environment text file.
    #[arg(long)]
    env: String,
    /// Weight beta on the previous-state value, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Smoothing decay lambda in [0, 1); without it the previous state alone is used.
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the discount factor gamma, in [0, 1).
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Root seed; every random draw derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for CSV files and summary.json.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Plain-text `key = value` file of plan overrides, applied before flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single plan override `key=value` (repeatable), e.g. `walk.reps=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Beta values (comma separated). Sweeps take the whole grid; variance, room and noisy-walk take one value.
    #[arg(long, value_name = "LIST")]
    beta: Option<String>,
    /// Lambda values (comma separated). Room takes one value; noisy-walk sweeps the grid.
    #[arg(long, value_name = "LIST")]
    lambda: Option<String>,
    /// Observation noise variances sigma^2 for the noisy walk (comma separated).
    #[arg(long, value_name = "LIST")]
    sigma2: Option<String>,
    /// Reward smoothness levels N for the bias sweep (comma separated).
    #[arg(long = "n-smooth", value_name = "LIST")]
    n_smooth: Option<String>,
    /// Number of independent seeds or runs for the selected experiment.
    #[arg(long)]
    runs: Option<usize>,
    /// Variance of the walk's action noise; the default action standard deviation is 0.05.
    #[arg(long = "action-var")]
    action_var: Option<f64>,
    /// Exit with status 2 when any trend check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Experiment {
    Mixing,
    Bias,
    Variance,
    Room,
    NoisyWalk,
    All,
}

fn build_plan(args: &RunArgs, which: Experiment) -> tempreg::Result<SweepPlan> {
    let mut plan = SweepPlan::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| tempreg::Error::Io {
            path: path.clone(),
            source: e,
        })?;
        plan.apply_text(&text)?;
    }
    for kv in &args.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| tempreg::Error::InvalidParameter(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        plan.set(k.trim(), v)?;
    }
    plan.seed = args.seed;

    let beta_key = match which {
        Experiment::Variance => "variance.beta",
        Experiment::Room => "room.beta",
        Experiment::NoisyWalk => "walk.beta",
        _ => "betas",
    };
    if let Some(b) = &args.beta {
        plan.set(beta_key, b)?;
    }
    if let Some(l) = &args.lambda {
        plan.set(if which == Experiment::Room { "room.lambda" } else { "lambdas" }, l)?;
    }
    if let Some(s) = &args.sigma2 {
        plan.set("sigma2s", s)?;
    }
    if let Some(n) = &args.n_smooth {
        plan.set("n_smooths", n)?;
    }
    if let Some(runs) = args.runs {
        let keys: &[&str] = match which {
            Experiment::Mixing => &["mixing.seeds"],
            Experiment::Bias => &["bias.seeds"],
            Experiment::Variance => &["variance.runs"],
            Experiment::Room => &["room.seeds"],
            Experiment::NoisyWalk => &["walk.reps"],
            Experiment::All => &["mixing.seeds", "bias.seeds", "variance.runs", "room.seeds", "walk.reps"],
        };
        for k in keys {
            plan.set(k, &runs.to_string())?;
        }
    }
    if let Some(var) = args.action_var {
        if !(var > 0.0 && var.is_finite()) {
            return Err(tempreg::Error::InvalidParameter(format!("--action-var must be positive, got {var}")));
        }
        plan.walk.action_std = var.sqrt();
    }
    plan.validate()?;
    Ok(plan)
}

fn report(summary: &Summary, out: &Path) {
    for c in &summary.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let measured: Vec<String> = c.measured.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        println!("[{status}] {}: {} ({})", c.name, c.description, measured.join(", "));
    }
    for f in &summary.files {
        println!("wrote {}", out.join(f).display());
    }
    println!("wrote {}", out.join("summary.json").display());
}

fn run_one(args: &RunArgs, which: Experiment) -> tempreg::Result<Summary> {
    let plan = build_plan(args, which)?;
    if which == Experiment::All {
        return run_all(&plan, &args.out);
    }
    let output: ExperimentOutput = match which {
        Experiment::Mixing => run_mixing(&plan)?,
        Experiment::Bias => run_bias(&plan)?,
        Experiment::Variance => run_variance(&plan)?,
        Experiment::Room => run_room(&plan)?,
        Experiment::NoisyWalk => run_noisy_walk(&plan)?,
        Experiment::All => unreachable!(),
    };
    let files = write_output(&args.out, &output)?
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let summary = summarize(&plan, [&output], files);
    write_summary(&args.out, &summary)?;
    Ok(summary)
}

fn load_env(name: &str) -> tempreg::Result<TabularMdp> {
    match name {
        "room" => room_world().mdp(),
        "variance" => Ok(three_state_variance_mdp().0),
        path => TabularMdp::load(path),
    }
}

fn solve(args: &SolveArgs) -> tempreg::Result<()> {
    let mut mdp = load_env(&args.env)?;
    if let Some(g) = args.gamma {
        mdp = mdp.with_gamma(g)?;
    }
    let spec = match args.lambda {
        Some(l) => RegularizerSpec::exponential_smoothing(args.beta, l)?,
        None => RegularizerSpec::previous_state(args.beta)?,
    };
    let back = backward_matrix(&mdp)?;
    let v = solve_exact(&mdp)?;
    let vb = regularized_solve(&mdp, &back, &spec)?;
    println!("# {} states, gamma = {}, {} beta = {}", mdp.n_states(), mdp.gamma(), spec.kind.as_str(), spec.beta);
    println!("{:>6} {:>14} {:>14} {:>14}", "state", "v", "v_beta", "gap");
    for s in 0..mdp.n_states() {
        println!("{:>6} {:>14.8} {:>14.8} {:>14.8}", s, v[s], vb[s], vb[s] - v[s]);
    }
    println!("max_abs_gap {:.10}", v.max_abs_diff(&vb));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (args, which) = match &cli.command {
        Command::Solve(s) => {
            return match solve(s) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
        Command::Mixing(a) => (a, Experiment::Mixing),
        Command::Bias(a) => (a, Experiment::Bias),
        Command::Variance(a) => (a, Experiment::Variance),
        Command::Room(a) => (a, Experiment::Room),
        Command::NoisyWalk(a) => (a, Experiment::NoisyWalk),
        Command::All(a) => (a, Experiment::All),
    };
    match run_one(args, which) {
        Ok(summary) => {
            report(&summary, &args.out);
            if args.check && !summary.passed {
                eprintln!("one or more checks failed");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
