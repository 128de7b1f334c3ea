//! Command-line interface.
//!
//! Exit status: 0 on success, 1 on any error, 2 when `--strict` turns user
//! profile warnings into a failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::agents::AgentConfig;
use crate::error::{Error, Result};
use crate::harness::{
    compare, run, sweep, write_metrics_csv, write_policy_summary, AgentKind, PolicyMatch, RunConfig,
    SweepPlan,
};
use crate::oracle::{fmt_decimal, optimal_policy, ActionValueTable};
use crate::user_sim::{builtin_catalog, find_user, load_users, Diagnostic, EngagementLevel, UserModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_STRICT_WARNINGS: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dialogue-policy", version, about = "Learn follow-up question strategies against simulated users")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one agent on one user and engagement level, writing per-epoch metrics.
    Run(RunArgs),
    /// Run every user × engagement × agent × seed combination.
    Sweep(SweepArgs),
    /// Print exact expected returns and the optimal action.
    Oracle(OracleArgs),
    /// Compare Q-learning against the random baseline on one cell.
    Compare(CompareArgs),
    /// Load a user-profile file and print validation diagnostics.
    ValidateUsers(ValidateArgs),
}

#[derive(Debug, Args)]
struct UsersArgs {
    /// User-profile CSV replacing the built-in users.
    #[arg(long, value_name = "PATH")]
    users_file: Option<PathBuf>,
    /// Treat user-profile warnings as errors (exit status 2).
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct TrainingArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 150, value_parser = clap::value_parser!(u64).range(1..))]
    episodes_per_epoch: u64,
    /// Exploration probability.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Learning rate.
    #[arg(long, default_value_t = 0.03)]
    alpha: f64,
    /// Half-width of per-episode uniform noise on the response rates.
    #[arg(long, default_value_t = 0.0)]
    perturbation_width: f64,
}

impl TrainingArgs {
    fn config(&self, user: &str, engagement: EngagementLevel, agent: AgentKind, seed: u64) -> RunConfig {
        RunConfig {
            user: user.to_string(),
            engagement,
            agent_kind: agent,
            epochs: self.epochs as usize,
            episodes_per_epoch: self.episodes_per_epoch as usize,
            agent: AgentConfig { epsilon: self.epsilon, alpha: self.alpha, initial_q: 0.0 },
            seed,
            perturbation_width: self.perturbation_width,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, default_value = "user1")]
    user: String,
    #[arg(long, default_value = "high")]
    engagement: EngagementLevel,
    /// qlearning or random.
    #[arg(long, default_value = "qlearning")]
    agent: AgentKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Metrics CSV path; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write the final Q-table here.
    #[arg(long, value_name = "PATH")]
    q_out: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    users: UsersArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Restrict to these users (repeatable); all users when omitted.
    #[arg(long)]
    user: Vec<String>,
    /// Restrict to these engagement levels (repeatable); all when omitted.
    #[arg(long)]
    engagement: Vec<EngagementLevel>,
    /// Restrict to these agents (repeatable); both when omitted.
    #[arg(long)]
    agent: Vec<AgentKind>,
    /// First seed; seeds are SEED, SEED+1, ...
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of seeds per cell.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Combined metrics CSV.
    #[arg(long, value_name = "PATH", default_value = "sweep_metrics.csv")]
    out: PathBuf,
    /// Policy summary CSV.
    #[arg(long, value_name = "PATH", default_value = "sweep_policy.csv")]
    policy_out: PathBuf,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    users: UsersArgs,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Only this user; all users when omitted.
    #[arg(long)]
    user: Option<String>,
    /// Only this engagement level; all when omitted.
    #[arg(long)]
    engagement: Option<EngagementLevel>,
    /// Output path; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    users: UsersArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, default_value = "user1")]
    user: String,
    #[arg(long, default_value = "high")]
    engagement: EngagementLevel,
    /// Seed for the Q-learning run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for the random run; same as --seed when omitted.
    #[arg(long)]
    random_seed: Option<u64>,
    /// Report path; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    users: UsersArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_name = "PATH")]
    users_file: PathBuf,
    /// Exit with status 2 if there are warnings.
    #[arg(long)]
    strict: bool,
}

enum Failure {
    Error(Error),
    StrictWarnings(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Parses `args` (program name first) and executes the command.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_ERROR;
            }
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args, stdout, stderr),
        Command::Sweep(args) => cmd_sweep(args, stdout, stderr),
        Command::Oracle(args) => cmd_oracle(args, stdout, stderr),
        Command::Compare(args) => cmd_compare(args, stdout, stderr),
        Command::ValidateUsers(args) => cmd_validate(args, stdout, stderr),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Error(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
        Err(Failure::StrictWarnings(n)) => {
            let _ = writeln!(stderr, "error: {n} warning(s) with --strict");
            EXIT_STRICT_WARNINGS
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

fn emit(path: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(path) => write_file(path, bytes),
        None => Ok(stdout.write_all(bytes)?),
    }
}

fn report_warnings(warnings: &[Diagnostic], strict: bool, stderr: &mut dyn Write) -> CliResult {
    for w in warnings {
        let _ = writeln!(stderr, "{w}");
    }
    if strict && !warnings.is_empty() {
        return Err(Failure::StrictWarnings(warnings.len()));
    }
    Ok(())
}

fn resolve_users(args: &UsersArgs, stderr: &mut dyn Write) -> CliResult<Vec<UserModel>> {
    match &args.users_file {
        None => Ok(builtin_catalog()),
        Some(path) => {
            let loaded = load_users(&read_file(path)?)?;
            report_warnings(&loaded.warnings, args.strict, stderr)?;
            Ok(loaded.users)
        }
    }
}

fn cmd_run(args: RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let users = resolve_users(&args.users, stderr)?;
    let config = args.training.config(&args.user, args.engagement, args.agent, args.seed);
    let result = run(&config, &users)?;

    let mut csv = Vec::new();
    write_metrics_csv([&result], &mut csv)?;
    emit(args.out.as_deref(), &csv, stdout)?;

    if let Some(path) = &args.q_out {
        match &result.final_q {
            Some(q) => write_file(path, q.to_csv().as_bytes())?,
            None => {
                return Err(Error::InvalidConfig("the random agent has no Q-table to export".into()).into())
            }
        }
    }
    if let Some(action) = result.final_greedy() {
        let converged = result.converged_epoch.map_or("never".to_string(), |e| e.to_string());
        let _ = writeln!(stderr, "final greedy action {action}; converged at epoch {converged}");
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let all_users = resolve_users(&args.users, stderr)?;
    let users: Vec<UserModel> = if args.user.is_empty() {
        all_users
    } else {
        args.user
            .iter()
            .map(|name| find_user(&all_users, name).cloned())
            .collect::<Result<_>>()?
    };
    let plan = SweepPlan {
        engagements: or_all(args.engagement, &EngagementLevel::ALL),
        agents: or_all(args.agent, &AgentKind::ALL),
        seeds: (0..args.seeds).map(|i| args.seed.wrapping_add(i)).collect(),
        template: args.training.config("", EngagementLevel::High, AgentKind::QLearning, 0),
    };
    let cells = sweep(&users, &plan)?;

    let mut failed = 0;
    for cell in &cells {
        if let Err(e) = &cell.result {
            failed += 1;
            let _ = writeln!(
                stderr,
                "cell {} {} {} seed {} failed: {e}",
                cell.user, cell.engagement, cell.agent, cell.seed
            );
        }
    }
    let runs: Vec<_> = cells.iter().filter_map(|c| c.result.as_ref().ok()).collect();

    let mut metrics = Vec::new();
    write_metrics_csv(runs.iter().copied(), &mut metrics)?;
    write_file(&args.out, &metrics)?;
    let mut policy = Vec::new();
    write_policy_summary(runs.iter().copied(), &users, &mut policy)?;
    write_file(&args.policy_out, &policy)?;

    let _ = writeln!(stdout, "user,engagement,oracle_optimal,exact,near_tie,mismatch,converged_by_30");
    for user in &users {
        for &engagement in &plan.engagements {
            let oracle = optimal_policy(user, engagement);
            let learned: Vec<_> = runs
                .iter()
                .filter(|r| r.config.user == user.name && r.config.engagement == engagement)
                .filter_map(|r| r.final_greedy().map(|a| (a, r.converged_epoch)))
                .collect();
            if learned.is_empty() {
                continue;
            }
            let count = |m| learned.iter().filter(|(a, _)| PolicyMatch::classify(*a, &oracle) == m).count();
            let converged = learned.iter().filter(|(_, c)| c.is_some_and(|e| e <= 30)).count();
            let _ = writeln!(
                stdout,
                "{},{},{},{},{},{},{}/{}",
                user.name,
                engagement,
                oracle.optimal.label(),
                count(PolicyMatch::Exact),
                count(PolicyMatch::NearTie),
                count(PolicyMatch::Mismatch),
                converged,
                learned.len()
            );
        }
    }
    if failed > 0 {
        return Err(Error::InvalidConfig(format!("{failed} sweep cell(s) failed")).into());
    }
    Ok(())
}

fn or_all<T: Clone>(given: Vec<T>, all: &[T]) -> Vec<T> {
    if given.is_empty() {
        all.to_vec()
    } else {
        given
    }
}

fn cmd_oracle(args: OracleArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let users = resolve_users(&args.users, stderr)?;
    let selected: Vec<&UserModel> = match &args.user {
        Some(name) => vec![find_user(&users, name)?],
        None => users.iter().collect(),
    };
    let engagements = args.engagement.map_or(EngagementLevel::ALL.to_vec(), |e| vec![e]);
    let mut out = String::new();
    for user in selected {
        for &engagement in &engagements {
            let table = ActionValueTable::from_profile(user.profile(engagement));
            out.push_str(&table.render(&user.name, engagement));
            out.push_str(&format!("random_mean,{}\n", fmt_decimal(table.random_policy_mean())));
        }
    }
    emit(args.out.as_deref(), out.as_bytes(), stdout)?;
    Ok(())
}

fn cmd_compare(args: CompareArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let users = resolve_users(&args.users, stderr)?;
    let learner = args.training.config(&args.user, args.engagement, AgentKind::QLearning, args.seed);
    let baseline = args.training.config(
        &args.user,
        args.engagement,
        AgentKind::Random,
        args.random_seed.unwrap_or(args.seed),
    );
    let report = compare(&learner, &baseline, &users)?;
    emit(args.out.as_deref(), report.render().as_bytes(), stdout)?;
    Ok(())
}

fn cmd_validate(args: ValidateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let loaded = load_users(&read_file(&args.users_file)?)?;
    for w in &loaded.warnings {
        let _ = writeln!(stdout, "{w}");
    }
    let _ = writeln!(
        stdout,
        "{} user(s) loaded, {} warning(s)",
        loaded.users.len(),
        loaded.warnings.len()
    );
    if args.strict && !loaded.warnings.is_empty() {
        let _ = stderr.flush();
        return Err(Failure::StrictWarnings(loaded.warnings.len()));
    }
    Ok(())
}
