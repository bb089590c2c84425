//! The `compass` command line.
//!
//! Exit codes: 0 success, 1 validation errors, 2 usage errors, 3 I/O errors.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write as _};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compass_core::storage::{
    load_domain_model, load_individual, load_item_pool, save_domain_model, to_canonical_string, PlanDocument,
};
use compass_core::{
    export_dot, merge_models, overlay, recommend_path, recommend_resources, run_simulated, start_session,
    DecayParams, DomainModel, Error, IndividualModel, ItemPool, LoStatus, OverlayReport, SessionConfig,
    SessionState, SimulatedLearner, Timestamp, ValidationReport,
};
use serde::Serialize;

use crate::api::{self, AppState};
use crate::store::Store;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "compass", version, about = "Competence overlay, micro-assessment and study-plan engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate domain models and, optionally, an item pool against them.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        items: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Overlay a learner model on a course.
    Overlay {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recommend study plans and resources towards a target concept.
    Recommend {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        learner: LearnerArgs,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 3)]
        alternatives: usize,
        /// Preferred resource tags, comma separated.
        #[arg(long, default_value = "")]
        tags: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a micro-assessment for one learning outcome.
    Assess {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        learner: Option<PathBuf>,
        #[arg(long, visible_alias = "target")]
        lo: String,
        /// Answer with a simulated learner of this true level instead of stdin.
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=6))]
        simulate_level: Option<u8>,
        #[arg(long, default_value_t = compass_core::micro_assessment::DEFAULT_BUDGET)]
        budget: u32,
        #[arg(long, default_value_t = 1)]
        confirmations: u32,
        /// Timestamp of the first answer; defaults to the current time.
        #[arg(long)]
        now: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Merge domain models into one canonical document.
    Merge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the concept map as Graphviz DOT.
    ExportDot {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "")]
        course: String,
        /// Colour nodes by this learner's overlay (requires --now).
        #[arg(long)]
        learner: Option<PathBuf>,
        #[arg(long)]
        now: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Persist documents here; COMPASS_DATA_DIR takes precedence.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Domain model file; repeat to merge several models.
    #[arg(long = "domain", required = true)]
    pub domains: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LearnerArgs {
    #[arg(long)]
    pub learner: PathBuf,
    /// Course concepts, comma separated; defaults to every concept.
    #[arg(long, default_value = "")]
    pub course: String,
    #[arg(long)]
    pub now: String,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
    Dot,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownConcept(_) | Error::UnknownLo(_) | Error::BadParameter(_) => CliError::Usage(e.to_string()),
            Error::Invalid(report) => CliError::Validation(report.to_string()),
            other => CliError::Validation(format!("{}: {other}", other.code())),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    run(cli)
}

pub fn run(cli: Cli) -> i32 {
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_with<T>(
    path: &Path,
    load: fn(&[u8]) -> compass_core::Result<compass_core::storage::Loaded<T>>,
) -> CliResult<T> {
    let loaded = load(&read_file(path)?).map_err(|e| CliError::Validation(format!("{}: {}: {e}", path.display(), e.code())))?;
    for w in loaded.warnings {
        eprintln!("warning: {}: {}: {}", path.display(), w.code, w.message);
    }
    Ok(loaded.value)
}

fn load_models(args: &ModelArgs) -> CliResult<Vec<DomainModel>> {
    args.domains.iter().map(|p| load_with(p, load_domain_model)).collect()
}

fn load_model(args: &ModelArgs) -> CliResult<DomainModel> {
    let mut models = load_models(args)?;
    if models.len() == 1 {
        return Ok(models.pop().expect("one model"));
    }
    Ok(merge_models(&models)?)
}

fn parse_now(value: &str) -> CliResult<Timestamp> {
    Timestamp::parse(value).map_err(|e| CliError::Usage(format!("--now: {e}")))
}

fn parse_csv(value: &str) -> BTreeSet<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect()
}

fn course_of(model: &DomainModel, value: &str) -> CliResult<BTreeSet<String>> {
    let course = parse_csv(value);
    if course.is_empty() {
        return Ok(model.concepts.keys().cloned().collect());
    }
    for id in &course {
        model.concept(id)?;
    }
    Ok(course)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn reject_dot(format: Format) -> CliResult {
    if format == Format::Dot {
        return Err(CliError::Usage("--format dot is only available for overlay".into()));
    }
    Ok(())
}

fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Validate { model, items, output } => validate(&model, items.as_deref(), &output),
        Command::Overlay { model, learner, output } => {
            let model = load_model(&model)?;
            let course = course_of(&model, &learner.course)?;
            let now = parse_now(&learner.now)?;
            let individual = load_with(&learner.learner, load_individual)?;
            let report = overlay(&model, &course, &individual, now, &DecayParams::default())?;
            let text = match output.format {
                Format::Json => to_canonical_string(&report),
                Format::Text => overlay_text(&report),
                Format::Dot => export_dot(&model, &course, Some(&report)),
            };
            emit(output.out.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Recommend { model, learner, target, alternatives, tags, output } => {
            reject_dot(output.format)?;
            let model = load_model(&model)?;
            let course = course_of(&model, &learner.course)?;
            let now = parse_now(&learner.now)?;
            let individual = load_with(&learner.learner, load_individual)?;
            let report = overlay(&model, &course, &individual, now, &DecayParams::default())?;
            let plans = recommend_path(&model, &course, &report, &target, alternatives)?;
            let tags = parse_csv(&tags);
            let mut resources = Vec::new();
            for step in &plans[0].steps {
                for lo in &model.concepts[step].outcomes {
                    if report.status(&lo.id) != Some(LoStatus::Achieved) {
                        resources.push(recommend_resources(&model, &lo.id, &tags)?);
                    }
                }
            }
            let doc = PlanDocument { target_concept: target, plans, resources };
            let text = match output.format {
                Format::Json => to_canonical_string(&doc),
                _ => plan_text(&doc),
            };
            emit(output.out.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Assess { model, items, learner, lo, simulate_level, budget, confirmations, now, output } => {
            reject_dot(output.format)?;
            let model = load_model(&model)?;
            let pool = load_with(&items, load_item_pool)?;
            let individual = match &learner {
                Some(path) => load_with(path, load_individual)?,
                None => IndividualModel::new("cli"),
            };
            let start = match &now {
                Some(v) => parse_now(v)?,
                None => api::system_now(),
            };
            let config = SessionConfig { budget, confirmations };
            let mut session = start_session("cli", &pool, &model, &individual, &lo, config)?;
            let trace = match simulate_level {
                Some(level) => {
                    let (trace, _) = run_simulated(&mut session, &pool, &SimulatedLearner::new(level), start)?;
                    trace
                }
                None => interactive(&mut session, &pool, start)?,
            };
            let text = match output.format {
                Format::Json => to_canonical_string(&AssessOutput { result: session.result(), status: session.status, trace: &trace }),
                _ => assess_text(&session, &trace),
            };
            emit(output.out.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Merge { model, out } => {
            let merged = merge_models(&load_models(&model)?)?;
            let bytes = save_domain_model(&merged);
            emit(out.as_deref(), std::str::from_utf8(&bytes).expect("canonical JSON is UTF-8"))?;
            Ok(EXIT_OK)
        }
        Command::ExportDot { model, course, learner, now, out } => {
            let model = load_model(&model)?;
            let course = course_of(&model, &course)?;
            let report = match (learner, now) {
                (Some(path), Some(now)) => {
                    let individual = load_with(&path, load_individual)?;
                    Some(overlay(&model, &course, &individual, parse_now(&now)?, &DecayParams::default())?)
                }
                (None, None) => None,
                _ => return Err(CliError::Usage("--learner and --now must be given together".into())),
            };
            emit(out.as_deref(), &export_dot(&model, &course, report.as_ref()))?;
            Ok(EXIT_OK)
        }
        Command::Serve { port, host, data_dir } => serve(host, port, data_dir),
    }
}

fn validate(model_args: &ModelArgs, items: Option<&Path>, output: &OutputArgs) -> CliResult<i32> {
    reject_dot(output.format)?;
    let models = load_models(model_args)?;
    let model = if models.len() == 1 {
        models.into_iter().next().expect("one model")
    } else {
        match merge_models(&models) {
            Ok(m) => m,
            Err(Error::MergeCycle(nodes)) => {
                eprintln!("error: merged models contain a prerequisite cycle: {}", nodes.join(" -> "));
                return Ok(EXIT_VALIDATION);
            }
            Err(Error::Invalid(report)) => return finish_validation(&[("domain", report)], output),
            Err(e) => return Err(e.into()),
        }
    };
    let mut reports = vec![("domain", model.validate())];
    if let Some(path) = items {
        let pool: ItemPool = load_with(path, load_item_pool)?;
        reports.push(("items", pool.validate(&model)));
    }
    finish_validation(&reports, output)
}

fn finish_validation(reports: &[(&str, ValidationReport)], output: &OutputArgs) -> CliResult<i32> {
    let text = match output.format {
        Format::Json => {
            let map: std::collections::BTreeMap<&str, &ValidationReport> = reports.iter().map(|(k, r)| (*k, r)).collect();
            to_canonical_string(&map)
        }
        _ => {
            let mut s = String::new();
            for (kind, report) in reports {
                let _ = writeln!(s, "{kind}: {}", if report.ok { "ok" } else { "invalid" });
                for f in &report.findings {
                    let _ = writeln!(s, "  {f}");
                }
            }
            s
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(if reports.iter().all(|(_, r)| r.ok) { EXIT_OK } else { EXIT_VALIDATION })
}

fn overlay_text(report: &OverlayReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "course: {}", report.course_id);
    let _ = writeln!(s, "learner: {}", report.learner_id);
    let _ = writeln!(s, "now: {}", report.now);
    if report.no_statement {
        let _ = writeln!(s, "no_statement: no course-relevant evidence");
    }
    for (lo, status) in &report.statuses {
        let _ = writeln!(s, "{lo}: {status:?}");
    }
    let _ = writeln!(s, "deficits: {}", report.deficits.join(", "));
    let _ = writeln!(s, "frontier: {}", report.frontier.iter().cloned().collect::<Vec<_>>().join(", "));
    s
}

fn plan_text(doc: &PlanDocument) -> String {
    let mut s = String::new();
    for (i, plan) in doc.plans.iter().enumerate() {
        let label = match &plan.variant_of {
            Some(z) => format!("variant via {z}"),
            None => "primary".into(),
        };
        let steps = if plan.steps.is_empty() { "(nothing to study)".to_owned() } else { plan.steps.join(" -> ") };
        let _ = writeln!(s, "plan {}: {label}: {steps} (unmet outcomes: {})", i + 1, plan.unmet_lo_count);
    }
    for rec in &doc.resources {
        let _ = writeln!(s, "resources for {}:", rec.lo_id);
        for r in &rec.ranked {
            let tags: Vec<&str> = r.tags.iter().map(String::as_str).collect();
            let _ = writeln!(s, "  {} [{:?}] {} <{}> {}", r.id, r.kind, r.title, r.uri, tags.join(","));
        }
    }
    s
}

#[derive(Serialize)]
struct AssessOutput<'a> {
    result: compass_core::SessionResult,
    status: compass_core::SessionStatus,
    trace: &'a [compass_core::micro_assessment::TraceStep],
}

fn assess_text(session: &SessionState, trace: &[compass_core::micro_assessment::TraceStep]) -> String {
    let mut s = String::new();
    for (i, step) in trace.iter().enumerate() {
        let verdict = if step.correct { "correct" } else { "wrong" };
        let _ = writeln!(
            s,
            "{}. {} level {} {verdict} -> [{}, {}]",
            i + 1,
            step.item_id,
            step.level,
            step.interval.low,
            step.interval.high
        );
    }
    let result = session.result();
    let _ = writeln!(s, "status: {:?}, exact: {}", session.status, result.exact);
    let _ = writeln!(s, "localized_level: {}, items_used: {}", result.localized_level, result.items_used);
    s
}

/// Prompts on stderr and reads one answer per line from stdin: option
/// indices separated by commas or spaces.
fn interactive(
    session: &mut SessionState,
    pool: &ItemPool,
    start: Timestamp,
) -> CliResult<Vec<compass_core::micro_assessment::TraceStep>> {
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut trace = Vec::new();
    let began = Instant::now();
    while session.is_active() {
        let item = match session.next_item(pool) {
            Ok(item) => item,
            Err(Error::Exhausted | Error::SessionClosed) => break,
            Err(e) => return Err(e.into()),
        };
        eprintln!("\n[{}] level {}: {}", item.id, item.level(), item.stem);
        for (i, option) in item.options.iter().enumerate() {
            eprintln!("  {i}) {option}");
        }
        let asked_at = Instant::now();
        loop {
            eprint!("answer> ");
            let Some(line) = lines.next() else {
                eprintln!("input closed; stopping early");
                return Ok(trace);
            };
            let line = line.map_err(|e| CliError::Io(e.to_string()))?;
            let chosen: Result<BTreeSet<usize>, _> =
                line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(str::parse).collect();
            let Ok(chosen) = chosen else {
                eprintln!("enter option numbers, e.g. 0 or 0,2");
                continue;
            };
            let seconds = asked_at.elapsed().as_secs().min(u32::MAX as u64) as u32;
            let at = start.plus_seconds(began.elapsed().as_secs() as i64);
            match session.submit_answer(item, &chosen, seconds, at) {
                Ok(rec) => {
                    trace.push(compass_core::micro_assessment::TraceStep {
                        item_id: item.id.clone(),
                        level: item.level(),
                        correct: rec.correct,
                        interval: session.interval,
                    });
                    break;
                }
                Err(Error::BadResponse { .. }) => eprintln!("option out of range"),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(trace)
}

fn serve(host: IpAddr, port: u16, data_dir: Option<PathBuf>) -> CliResult<i32> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let data_dir = std::env::var_os("COMPASS_DATA_DIR").map(PathBuf::from).or(data_dir);
    let store = match &data_dir {
        Some(dir) => Store::open(dir).map_err(|e| CliError::Io(e.to_string()))?,
        None => Store::in_memory(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async move {
        let addr = SocketAddr::new(host, port);
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::Io(format!("{addr}: {e}")))?;
        tracing::info!(%addr, data_dir = ?data_dir, "listening");
        tokio::select! {
            r = api::serve(listener, AppState::new(store)) => r.map_err(|e| CliError::Io(e.to_string()))?,
            _ = tokio::signal::ctrl_c() => tracing::info!("shutting down"),
        }
        Ok(EXIT_OK)
    })
}
