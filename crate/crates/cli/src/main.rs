use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmc_core::data::{profile_csv, reconcile, ProfileError};
use cmc_core::derivation::{DerivationError, StatisticalQuestions};
use cmc_core::disambiguation::{enumerate_ambiguities, Ambiguity};
use cmc_core::dsl::compile_source;
use cmc_core::graph::{build_graph, DEFAULT_MAX_CYCLE_NODES};
use cmc_core::session::{parse_answers, Answer, ReplayError, Session, SessionError, SessionOptions};

const EXIT_DIAGNOSTICS: u8 = 1;
const EXIT_UNANSWERED: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Compile a conceptual model into a GLM script.
#[derive(Parser)]
#[command(name = "cmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a program, optionally against a CSV file.
    Check {
        program: PathBuf,
        #[arg(long)]
        data: Option<String>,
    },
    /// Compile a program, replaying the answers in an answer log.
    Compile {
        program: PathBuf,
        #[arg(long)]
        data: Option<String>,
        /// JSON answer log; required whenever the program has questions.
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Output prefix; writes <out>.R, <out>.model.json and <out>.choices.json.
        #[arg(long)]
        out: PathBuf,
        /// Also write the refined graph to <out>.graph.json.
        #[arg(long)]
        emit_graph: bool,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Keep a JSON snapshot of every session here and restore them on start.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
}

fn max_cycle_nodes() -> usize {
    std::env::var("CMC_MAX_GRAPH_NODES").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_MAX_CYCLE_NODES)
}

fn report(path: &str, line: usize, col: usize, severity: &str, message: &str) {
    eprintln!("{path}:{line}:{col}: {severity}: {message}");
}

fn read_program(path: &Path) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| {
        report(&path.display().to_string(), 1, 1, "error", &format!("cannot read program: {e}"));
        ExitCode::from(EXIT_DIAGNOSTICS)
    })
}

fn report_profile_error(data: &str, e: &ProfileError) {
    let line = match e {
        ProfileError::MalformedCsv { line, .. } => *line as usize,
        _ => 1,
    };
    report(data, line, 1, "error", &e.to_string());
}

fn check(program: &Path, data: Option<&str>) -> ExitCode {
    let path = program.display().to_string();
    let src = match read_program(program) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let (mut cm, q) = match compile_source(&src) {
        Ok(ok) => ok,
        Err(diags) => {
            for d in &diags {
                report(&path, d.span.line as usize, d.span.col as usize, "error", &d.message);
            }
            return ExitCode::from(EXIT_DIAGNOSTICS);
        }
    };
    if let Some(data) = data {
        let profiles = match profile_csv(data) {
            Ok(p) => p,
            Err(e) => {
                report_profile_error(data, &e);
                return ExitCode::from(EXIT_DIAGNOSTICS);
            }
        };
        match reconcile(&cm, &profiles) {
            Ok(r) => {
                for w in &r.warnings {
                    report(data, 1, 1, "warning", &w.to_string());
                }
                cm = r.model;
            }
            Err(errs) => {
                for e in &errs {
                    report(data, 1, 1, "error", &e.to_string());
                }
                return ExitCode::from(EXIT_DIAGNOSTICS);
            }
        }
    }
    let g = build_graph(&cm);
    let questions = match enumerate_ambiguities(&g, max_cycle_nodes()) {
        Ok(a) => a.len(),
        Err(e) => {
            report(&path, 1, 1, "error", &e.to_string());
            return ExitCode::from(EXIT_DIAGNOSTICS);
        }
    };
    println!(
        "{path}: ok ({} measures, {} relationships, query {} -> {}, {questions} conceptual questions)",
        cm.measures().count(),
        cm.relationships.len(),
        q.iv,
        q.dv
    );
    ExitCode::SUCCESS
}

fn print_ambiguities(pending: &[Ambiguity]) {
    eprintln!("unanswered conceptual questions (answer the first one next):");
    for a in pending {
        eprintln!("  {}: {}", a.id, a.explanation);
        for (i, o) in a.options.iter().enumerate() {
            eprintln!("    {i}: {}", o.label);
        }
    }
}

fn print_statistical_questions(q: &StatisticalQuestions) {
    eprintln!("statistical choices are missing; add an entry with \"phase\": \"statistical\"");
    eprintln!("suggested covariates:");
    for d in &q.adjustment.decisions {
        eprintln!("  {} ({:?}): {}", d.variable, d.verdict, d.rationale);
    }
    if !q.interactions.is_empty() {
        let sets: Vec<String> = q.interactions.iter().map(|s| s.join("*")).collect();
        eprintln!("suggested interactions: {}", sets.join(", "));
    }
    eprintln!("families (choose one; links listed canonical first):");
    for f in &q.families {
        let links: Vec<String> = f.links.iter().map(|l| serde_json::to_string(l).unwrap_or_default()).collect();
        eprintln!("  {}: {}", serde_json::to_string(&f.family).unwrap_or_default(), links.join(", "));
    }
}

fn report_session_error(path: &str, data: Option<&str>, e: &SessionError) -> ExitCode {
    match e {
        SessionError::Validation(diags) => {
            for d in diags {
                report(path, d.span.line as usize, d.span.col as usize, "error", &d.message);
            }
        }
        SessionError::Profile(p) => report_profile_error(data.unwrap_or(path), p),
        SessionError::Data(errs) => {
            for d in errs {
                report(data.unwrap_or(path), 1, 1, "error", &d.to_string());
            }
        }
        SessionError::Derivation(DerivationError::MissingFamilyChoice) => {
            report(path, 1, 1, "error", &e.to_string());
            return ExitCode::from(EXIT_UNANSWERED);
        }
        other => report(path, 1, 1, "error", &other.to_string()),
    }
    ExitCode::from(EXIT_DIAGNOSTICS)
}

fn write_file(path: &Path, text: &str) -> Result<(), ExitCode> {
    fs::write(path, text).map_err(|e| {
        report(&path.display().to_string(), 1, 1, "error", &format!("cannot write: {e}"));
        ExitCode::from(EXIT_DIAGNOSTICS)
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn compile(program: &Path, data: Option<String>, answers: Option<&Path>, out: &Path, emit_graph: bool) -> ExitCode {
    let path = program.display().to_string();
    let src = match read_program(program) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let log: Vec<Answer> = match answers {
        None => Vec::new(),
        Some(a) => {
            let text = match fs::read_to_string(a) {
                Ok(t) => t,
                Err(e) => {
                    report(&a.display().to_string(), 1, 1, "error", &format!("cannot read answers: {e}"));
                    return ExitCode::from(EXIT_DIAGNOSTICS);
                }
            };
            match parse_answers(&text) {
                Ok(log) => log,
                Err(e) => {
                    report(&a.display().to_string(), e.line().max(1), e.column().max(1), "error", &e.to_string());
                    return ExitCode::from(EXIT_DIAGNOSTICS);
                }
            }
        }
    };

    let options = SessionOptions { data_path: data.clone(), max_cycle_nodes: max_cycle_nodes() };
    let session = match Session::replay(&src, options, &log) {
        Ok(s) => s,
        Err(ReplayError::Session(e)) => return report_session_error(&path, data.as_deref(), &e),
        Err(ReplayError::Answer { index, source }) => {
            let answers_path = answers.map(|a| a.display().to_string()).unwrap_or_else(|| path.clone());
            eprintln!("{answers_path}: answer {index} was rejected");
            return report_session_error(&path, data.as_deref(), &source);
        }
        Err(ReplayError::Unanswered(pending)) => {
            print_ambiguities(&pending);
            return ExitCode::from(EXIT_UNANSWERED);
        }
        Err(ReplayError::MissingStatisticalChoices(q)) => {
            print_statistical_questions(&q);
            return ExitCode::from(EXIT_UNANSWERED);
        }
    };

    let artifacts = session.artifacts().expect("replay finalizes the session");
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        if let Err(e) = fs::create_dir_all(parent) {
            report(&parent.display().to_string(), 1, 1, "error", &format!("cannot create directory: {e}"));
            return ExitCode::from(EXIT_DIAGNOSTICS);
        }
    }
    let mut files = vec![
        (with_suffix(out, ".R"), artifacts.script_text.clone()),
        (with_suffix(out, ".model.json"), artifacts.model_json.clone()),
        (with_suffix(out, ".choices.json"), artifacts.choices_log.clone()),
    ];
    if emit_graph {
        let mut graph = session.graph().to_json();
        graph["layout"] = serde_json::to_value(session.graph().layers()).expect("layers serialize");
        let mut text = serde_json::to_string_pretty(&graph).expect("graph serializes");
        text.push('\n');
        files.push((with_suffix(out, ".graph.json"), text));
    }
    for (p, text) in &files {
        if let Err(code) = write_file(p, text) {
            return code;
        }
        println!("wrote {}", p.display());
    }
    if let Some(m) = session.statistical_model() {
        for w in &m.warnings {
            report(&path, 1, 1, "warning", w.message());
        }
    }
    for w in session.data_warnings() {
        report(data.as_deref().unwrap_or(&path), 1, 1, "warning", &w.to_string());
    }
    ExitCode::SUCCESS
}

fn serve(host: std::net::IpAddr, port: u16, state_dir: Option<PathBuf>) -> ExitCode {
    let store = match state_dir {
        None => cmc_server::Store::in_memory(),
        Some(dir) => match cmc_server::Store::persistent(&dir) {
            Ok((store, problems)) => {
                for p in problems {
                    eprintln!("warning: skipped snapshot {p}");
                }
                store
            }
            Err(e) => {
                eprintln!("error: cannot use state directory {}: {e}", dir.display());
                return ExitCode::from(EXIT_DIAGNOSTICS);
            }
        },
    };
    let mut state = cmc_server::AppState::new(store);
    state.max_cycle_nodes = max_cycle_nodes();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_DIAGNOSTICS);
        }
    };
    match runtime.block_on(cmc_server::serve(state, (host, port).into())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DIAGNOSTICS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Check { program, data } => check(&program, data.as_deref()),
        Command::Compile { program, data, answers, out, emit_graph } => {
            compile(&program, data, answers.as_deref(), &out, emit_graph)
        }
        Command::Serve { port, host, state_dir } => serve(host, port, state_dir),
    }
}
