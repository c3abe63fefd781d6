//! `rosterctl`, operator tooling over a rosterd data directory.

pub mod fixture;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rosterd_core::engine::{self, AutoScheduleParams};
use rosterd_core::ical;
use rosterd_core::model::{AccountId, Roster, ScheduleId};
use rosterd_core::report::{self, GroupBy, ReportQuery};
use rosterd_core::time::{DateRange, Timestamp};
use rosterd_service::auth;
use rosterd_store::{Store, TxError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("bad flags: {0}")]
    BadFlags(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invariant violation at {path}: {detail}")]
    InvariantViolation { path: String, detail: String },
    #[error("unknown account {0}")]
    UnknownAccount(String),
    #[error("unknown schedule {0}")]
    UnknownSchedule(String),
    #[error("an Admin API token is required (--token or ROSTERD_TOKEN)")]
    Unauthorized,
    #[error("version conflict on schedule {schedule}: expected {expected}, found {actual}")]
    VersionConflict { schedule: ScheduleId, expected: u64, actual: u64 },
    #[error("{0}")]
    Failed(String),
    #[error("store: {0}")]
    Store(String),
}

impl From<TxError<CliError>> for CliError {
    fn from(e: TxError<CliError>) -> Self {
        match e {
            TxError::Domain(e) => e,
            TxError::VersionConflict { schedule, expected, actual } => CliError::VersionConflict { schedule, expected, actual },
            TxError::Store(e) => CliError::Store(e.to_string()),
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "rosterctl", version, about = "Operator tooling for a rosterd data directory")]
pub struct Cli {
    #[arg(long, env = "ROSTERD_DATA_DIR", default_value = "./data", global = true)]
    pub data_dir: PathBuf,
    /// API token; purge requires an Admin token.
    #[arg(long, env = "ROSTERD_TOKEN", hide_env_values = true, global = true)]
    pub token: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upsert the entities of a fixture file.
    Seed { fixture: PathBuf },
    /// Run a report and write it as CSV.
    Report(ReportArgs),
    /// Fill understaffed shifts. Exits 1 when some remain unfilled.
    Autoschedule(AutoArgs),
    /// Delete or anonymize an account.
    Purge {
        #[arg(long)]
        account: String,
        #[arg(long, value_enum)]
        mode: PurgeMode,
    },
    #[command(subcommand)]
    Ical(IcalCommand),
    #[command(subcommand)]
    Token(TokenCommand),
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_parser = parse_range)]
    pub range: DateRange,
    #[arg(long, value_delimiter = ',', value_parser = parse_group)]
    pub group_by: Vec<GroupBy>,
    /// Schedule id or name; repeatable. Defaults to every schedule.
    #[arg(long)]
    pub schedule: Vec<String>,
    /// Account id or email; repeatable. Defaults to every account.
    #[arg(long)]
    pub account: Vec<String>,
    #[arg(long)]
    pub include_pay: bool,
}

#[derive(Debug, Args)]
pub struct AutoArgs {
    /// Schedule id or name; repeatable.
    #[arg(long, required = true)]
    pub schedule: Vec<String>,
    #[arg(long, value_parser = parse_range)]
    pub range: DateRange,
    #[arg(long)]
    pub favorites_only: bool,
    #[arg(long)]
    pub max_shifts_per_day: Option<u32>,
    /// Minutes between two shifts of one account.
    #[arg(long)]
    pub min_gap: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the plan without writing it.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PurgeMode {
    Delete,
    Anonymize,
}

#[derive(Debug, Subcommand)]
pub enum IcalCommand {
    /// Write an account's shifts as an iCalendar feed.
    Export {
        #[arg(long)]
        account: String,
        #[arg(long, value_parser = parse_range)]
        range: DateRange,
    },
    /// Record the events of a feed as time-off.
    Import {
        #[arg(long)]
        account: String,
        file: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum TokenCommand {
    /// Issue a long-lived API token after checking the account password.
    Issue {
        #[arg(long)]
        email: String,
        #[arg(long, env = "ROSTERD_PASSWORD", hide_env_values = true)]
        password: String,
    },
}

fn parse_range(s: &str) -> Result<DateRange, String> {
    s.parse::<DateRange>().map_err(|e| format!("{e} (expected YYYY-MM-DD..YYYY-MM-DD with start before end)"))
}

fn parse_group(s: &str) -> Result<GroupBy, String> {
    s.parse::<GroupBy>().map_err(|e| e.to_string())
}

fn now() -> Timestamp {
    Timestamp::from_minutes(chrono::Utc::now().timestamp().div_euclid(60))
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code: 0 success, 1 partial result, 2 error.
pub fn main_with(args: impl IntoIterator<Item = String>, out: &mut impl Write, err: &mut impl Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

pub fn run(cli: &Cli, out: &mut impl Write) -> Result<i32, CliError> {
    std::fs::create_dir_all(&cli.data_dir).map_err(|e| CliError::Store(format!("{}: {e}", cli.data_dir.display())))?;
    let store = Store::open(&cli.data_dir).map_err(|e| CliError::Store(e.to_string()))?;
    execute(&store, cli, out)
}

/// Runs a parsed command against an open store.
pub fn execute(store: &Store, cli: &Cli, out: &mut impl Write) -> Result<i32, CliError> {
    let io = |e: std::io::Error| CliError::Failed(e.to_string());
    match &cli.command {
        Command::Seed { fixture } => {
            let text = std::fs::read_to_string(fixture).map_err(|e| CliError::Parse(format!("{}: {e}", fixture.display())))?;
            let fx = fixture::parse(&text)?;
            let done = store.transact(&[], |r| fixture::seed(r, &fx))?;
            writeln!(out, "{}", done.value).map_err(io)?;
            Ok(0)
        }
        Command::Report(args) => {
            let snap = store.snapshot().map_err(|e| CliError::Store(e.to_string()))?;
            let r = &snap.roster;
            let caller = acting(r, cli.token.as_deref())?;
            let mut query = ReportQuery::new(args.range);
            query.group_by = args.group_by.clone();
            query.include_pay = args.include_pay;
            query.schedules = args.schedule.iter().map(|s| schedule_ref(r, s)).collect::<Result<_, _>>()?;
            query.accounts = args.account.iter().map(|a| account_ref(r, a)).collect::<Result<_, _>>()?;
            let report = report::run_report(r, caller, &query).map_err(|e| match e {
                report::ReportError::DuplicateGroupBy { .. } => CliError::BadFlags(e.to_string()),
                other => failed(other),
            })?;
            out.write_all(report.to_csv().as_bytes()).map_err(io)?;
            Ok(0)
        }
        Command::Autoschedule(args) => autoschedule(store, cli, args, out),
        Command::Purge { account, mode } => {
            let token = cli.token.as_deref().ok_or(CliError::Unauthorized)?;
            let at = now();
            let mode = *mode;
            let account = account.clone();
            let done = store.transact(&[], move |r| {
                let caller = token_owner(r, token).ok_or(CliError::Unauthorized)?;
                if !r.accounts[&caller].is_admin() {
                    return Err(CliError::Unauthorized);
                }
                let id = account_ref(r, &account)?;
                match mode {
                    PurgeMode::Delete => r.delete_account(id, at).map(|t| format!("deleted {id}, past assignments kept as {t}")),
                    PurgeMode::Anonymize => r.anonymize_account(id, at).map(|a| format!("anonymized {id} as {}", a.given_name)),
                }
                .map_err(failed)
            })?;
            writeln!(out, "{}", done.value).map_err(io)?;
            Ok(0)
        }
        Command::Ical(IcalCommand::Export { account, range }) => {
            let snap = store.snapshot().map_err(|e| CliError::Store(e.to_string()))?;
            let id = account_ref(&snap.roster, account)?;
            let text = ical::export_ical(&snap.roster, id, range, now()).map_err(failed)?;
            out.write_all(text.as_bytes()).map_err(io)?;
            Ok(0)
        }
        Command::Ical(IcalCommand::Import { account, file }) => {
            let text = std::fs::read_to_string(file).map_err(|e| CliError::Parse(format!("{}: {e}", file.display())))?;
            let account = account.clone();
            let done = store.transact(&[], move |r| {
                let id = account_ref(r, &account)?;
                ical::import_ical_time_off(r, id, &text).map_err(failed)
            })?;
            writeln!(out, "time-off: {}", done.value.time_off.len()).map_err(io)?;
            for w in &done.value.warnings {
                writeln!(out, "warning: {w}").map_err(io)?;
            }
            Ok(0)
        }
        Command::Token(TokenCommand::Issue { email, password }) => {
            let (email, password) = (email.clone(), password.clone());
            let done = store.transact(&[], move |r| {
                let id = r.account_by_email(&email).map(|a| a.id).ok_or_else(|| CliError::UnknownAccount(email.clone()))?;
                let ok = r.auth.password_hashes.get(&id).is_some_and(|h| auth::verify_password(h, &password));
                if !ok {
                    return Err(CliError::Failed("invalid credentials".into()));
                }
                auth::issue_api_token(r, id).map_err(|e| failed(e.code))
            })?;
            writeln!(out, "{}", done.value).map_err(io)?;
            Ok(0)
        }
    }
}

fn autoschedule(store: &Store, cli: &Cli, args: &AutoArgs, out: &mut impl Write) -> Result<i32, CliError> {
    let io = |e: std::io::Error| CliError::Failed(e.to_string());
    let snap = store.snapshot().map_err(|e| CliError::Store(e.to_string()))?;
    let actor = acting(&snap.roster, cli.token.as_deref())?;
    let schedules = args.schedule.iter().map(|s| schedule_ref(&snap.roster, s)).collect::<Result<Vec<_>, _>>()?;
    let mut params = AutoScheduleParams::new(schedules.iter().copied(), args.range);
    params.favorites_only = args.favorites_only;
    params.max_shifts_per_day = args.max_shifts_per_day;
    params.min_gap = args.min_gap;
    params.seed = args.seed;
    let expect: Vec<(ScheduleId, u64)> = schedules.iter().map(|s| (*s, snap.version(*s))).collect();
    let (outcome, roster) = if args.dry_run {
        (engine::plan_auto_schedule(&snap.roster, actor, &params).map_err(|e| CliError::BadFlags(e.to_string()))?, snap.roster.clone())
    } else {
        let done = store.transact(&expect, |r| engine::auto_schedule(r, actor, &params).map_err(|e| CliError::BadFlags(e.to_string())))?;
        (done.value, store.snapshot().map_err(|e| CliError::Store(e.to_string()))?.roster)
    };
    for a in &outcome.assignments {
        let shift = &roster.shifts[&a.shift];
        writeln!(out, "assigned shift {} ({} {}) to {}", a.shift, shift.title, shift.interval.start, roster.account_label(a.account)).map_err(io)?;
    }
    for u in &outcome.unfilled {
        let name = roster.schedules.get(&u.schedule).map(|s| s.name.as_str()).unwrap_or("?");
        writeln!(out, "unfilled shift {} ({name} {}) missing {}", u.shift, u.interval.start, u.missing).map_err(io)?;
    }
    writeln!(out, "assignments: {}, unfilled: {}", outcome.assignments.len(), outcome.unfilled.len()).map_err(io)?;
    Ok(if outcome.unfilled.is_empty() { 0 } else { 1 })
}

fn token_owner(r: &Roster, token: &str) -> Option<AccountId> {
    r.auth.api_tokens.get(&auth::token_digest(token)).copied().filter(|a| r.accounts.get(a).is_some_and(|acc| !acc.anonymized))
}

/// The token's account, or the first Admin when no token is given.
fn acting(r: &Roster, token: Option<&str>) -> Result<AccountId, CliError> {
    match token {
        Some(t) => token_owner(r, t).ok_or(CliError::Unauthorized),
        None => r.accounts.values().find(|a| a.is_admin() && !a.anonymized).map(|a| a.id).ok_or(CliError::Unauthorized),
    }
}

fn account_ref(r: &Roster, s: &str) -> Result<AccountId, CliError> {
    let found = match s.parse::<AccountId>() {
        Ok(id) => r.accounts.get(&id).map(|a| a.id),
        Err(_) => r.account_by_email(s).map(|a| a.id),
    };
    found.ok_or_else(|| CliError::UnknownAccount(s.to_string()))
}

fn schedule_ref(r: &Roster, s: &str) -> Result<ScheduleId, CliError> {
    let found = match s.parse::<ScheduleId>() {
        Ok(id) => r.schedules.get(&id).map(|x| x.id),
        Err(_) => r.schedules.values().find(|x| x.name.eq_ignore_ascii_case(s.trim())).map(|x| x.id),
    };
    found.ok_or_else(|| CliError::UnknownSchedule(s.to_string()))
}
