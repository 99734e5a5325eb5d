//! `healthdial`: headless driver of the authoring engine.
//!
//! Exit codes: 0 success, 1 validation defects, 2 usage or request error,
//! 3 language-model provider failure.

use std::io::{self, BufRead, IsTerminal, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use healthdial_core::config::Config;
use healthdial_core::editing::EditCommand;
use healthdial_core::engine::{Engine, EngineError, ProjectStats};
use healthdial_core::markup::{self, ParseError};
use healthdial_core::model::{validate_fsm, MaterialSource, Target};
use healthdial_core::runtime::{transcript_jsonl, PlayView};
use healthdial_core::{ProjectId, SessionId};

const EXIT_DEFECTS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PROVIDER: u8 = 3;

#[derive(Parser)]
#[command(name = "healthdial", version, about = "Author multi-session health dialogues")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config file.
    #[arg(long, global = true, env = "HEALTHDIAL_CONFIG")]
    config: Option<PathBuf>,
    /// Project store root.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Directory of scripted model replies.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Create a project from a text file (`-` reads stdin); prints its id.
    Ingest {
        file: String,
        #[arg(long)]
        title: String,
    },
    /// Draft the session plan, or revise it with a cue.
    Plan {
        id: String,
        #[arg(long)]
        cue: Option<String>,
        /// Approve the resulting plan straight away.
        #[arg(long)]
        approve: bool,
    },
    /// Approve the current plan so dialogues can be generated.
    Approve { id: String },
    /// Generate one session's dialogue, or all of them.
    Generate {
        id: String,
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        session: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// Check a project or a `.hdfsm` file; exits 1 when defects are found.
    Validate { target: String },
    /// Play a session as the patient.
    Play {
        id: String,
        #[arg(long)]
        session: String,
        /// Comma-separated 0-based option indexes, e.g. `0,1,0`.
        #[arg(long, value_delimiter = ',')]
        choices: Option<Vec<usize>>,
        /// Print the transcript as JSON lines.
        #[arg(long)]
        jsonl: bool,
    },
    /// Write the multi-session document (stdout without `-o`).
    Export {
        id: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Load dialogues from a `.hdfsm` document (`-` reads stdin).
    Import { id: String, file: String },
    /// Counts, key-point coverage and revision count.
    Stats {
        id: String,
        #[arg(long)]
        json: bool,
    },
    /// Apply one edit command given as JSON (`-` reads stdin).
    Edit { id: String, command: String },
    Undo { id: String },
    Redo { id: String },
    /// List projects in the store.
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            for line in &failure.details {
                eprintln!("  {line}");
            }
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
    details: Vec<String>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
            details: Vec::new(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::Orchestration(_) => EXIT_PROVIDER,
            EngineError::Import(_) => EXIT_DEFECTS,
            _ => EXIT_USAGE,
        };
        let mut details = e.details();
        if let Some(last) = e.exchanges().last() {
            details.push(format!("last reply: {}", last.response.trim()));
        }
        Self {
            code,
            message: e.to_string(),
            details,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn engine(global: &Global) -> Result<Engine, Failure> {
    let mut config = Config::load(global.config.as_deref()).map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(store) = &global.store {
        config.store = store.clone();
    }
    if let Some(fixtures) = &global.fixtures {
        config.provider.fixtures = Some(fixtures.clone());
    }
    Engine::from_config(&config).map_err(|e| Failure::usage(e.to_string()))
}

fn project_id(raw: &str) -> Result<ProjectId, Failure> {
    ProjectId::new(raw).map_err(|e| Failure::usage(format!("bad project id {raw:?}: {e}")))
}

fn session_id(raw: &str) -> Result<SessionId, Failure> {
    SessionId::new(raw).map_err(|e| Failure::usage(format!("bad session id {raw:?}: {e}")))
}

fn read_input(file: &str) -> Result<String, Failure> {
    if file == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        std::fs::read_to_string(file).map_err(|e| Failure::usage(format!("{file}: {e}")))
    }
}

fn run(cli: Cli) -> Outcome {
    let g = &cli.global;
    match cli.command {
        Command::Validate { target } => validate(g, &target),
        Command::Ingest { file, title } => {
            let text = read_input(&file)?;
            let (source, name) = if file == "-" {
                (MaterialSource::Pasted, None)
            } else {
                let name = Path::new(&file)
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned());
                (MaterialSource::ImportedFile, name)
            };
            let project = engine(g)?.create_project(&title, &text, source, name)?;
            println!("{}", project.id);
            Ok(0)
        }
        Command::Plan { id, cue, approve } => {
            let engine = engine(g)?;
            let id = project_id(&id)?;
            let (plan, _) = engine.plan(&id, cue.as_deref())?;
            if approve {
                engine.approve_plan(&id)?;
            }
            print!("{}", markup::plan_to_json(&plan));
            Ok(0)
        }
        Command::Approve { id } => {
            let plan = engine(g)?.approve_plan(&project_id(&id)?)?;
            println!("approved {} sessions", plan.sessions.len());
            Ok(0)
        }
        Command::Generate { id, session, all } => {
            let engine = engine(g)?;
            let id = project_id(&id)?;
            let generated = if all {
                engine.generate_all(&id)?
            } else {
                let sid = session_id(session.as_deref().unwrap_or_default())?;
                let (g, _) = engine.generate(&id, &sid)?;
                vec![(sid, g)]
            };
            for (sid, g) in generated {
                let covered = g.coverage.iter().filter(|c| c.covered).count();
                println!(
                    "{sid}: {} states, key points covered {covered}/{}",
                    g.fsm.len(),
                    g.coverage.len()
                );
            }
            Ok(0)
        }
        Command::Play {
            id,
            session,
            choices,
            jsonl,
        } => play(g, &id, &session, choices, jsonl),
        Command::Export { id, output } => {
            let text = engine(g)?.export(&project_id(&id)?)?;
            match output {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
            Ok(0)
        }
        Command::Import { id, file } => {
            let text = read_input(&file)?;
            let sessions = engine(g)?.import(&project_id(&id)?, &text)?;
            for sid in sessions {
                println!("{sid}");
            }
            Ok(0)
        }
        Command::Stats { id, json } => {
            let stats = engine(g)?.stats(&project_id(&id)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
            } else {
                print_stats(&stats);
            }
            Ok(0)
        }
        Command::Edit { id, command } => {
            let text = if command == "-" { read_input("-")? } else { command };
            let command: EditCommand = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("bad edit command: {e}")))?;
            let outcome = engine(g)?.edit(&project_id(&id)?, command)?;
            println!("{}", serde_json::to_string(&outcome).expect("outcome serialize"));
            Ok(0)
        }
        Command::Undo { id } => {
            let outcome = engine(g)?.undo(&project_id(&id)?)?;
            println!("{}", serde_json::to_string(&outcome).expect("outcome serialize"));
            Ok(0)
        }
        Command::Redo { id } => {
            let outcome = engine(g)?.redo(&project_id(&id)?)?;
            println!("{}", serde_json::to_string(&outcome).expect("outcome serialize"));
            Ok(0)
        }
        Command::List => {
            for id in engine(g)?.list()? {
                println!("{id}");
            }
            Ok(0)
        }
    }
}

fn print_parse_errors(origin: &str, errors: &[ParseError]) {
    for e in errors {
        println!("{origin}:{e}");
    }
}

/// A path that exists (or ends in `.hdfsm`) is checked as a file, anything
/// else as a project id.
fn validate(g: &Global, target: &str) -> Outcome {
    let path = Path::new(target);
    let is_file = path.is_file()
        || path
            .extension()
            .is_some_and(|e| e == markup::FILE_EXTENSION);
    if is_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("{target}: {e}")))?;
        return match markup::parse(&text) {
            Ok(doc) => {
                println!("{target}: ok, {} dialogues", doc.dialogues.len());
                Ok(0)
            }
            Err(errors) => {
                print_parse_errors(target, &errors);
                Ok(EXIT_DEFECTS)
            }
        };
    }
    let engine = engine(g)?;
    let project = engine.load(&project_id(target)?)?;
    let mut defects = 0;
    for (sid, fsm) in project.fsms() {
        for d in validate_fsm(fsm).defects {
            println!("{sid}: {d}");
            defects += 1;
        }
    }
    // The store's own files must parse back too.
    for (path, problem) in engine.store().check_session_files(&project.id).map_err(EngineError::from)? {
        println!("{}: {problem}", path.display());
        defects += 1;
    }
    if defects == 0 {
        println!("{}: ok, {} dialogues", project.id, project.fsms().len());
        Ok(0)
    } else {
        Ok(EXIT_DEFECTS)
    }
}

/// Prints the turns from `from` on, preceded by the choice that led there.
fn show(view: &PlayView, from: usize) {
    if let Some(choice) = from
        .checked_sub(1)
        .and_then(|i| view.transcript[i].choice.as_ref())
    {
        println!("> {choice}");
    }
    for turn in &view.transcript[from..] {
        println!("AGENT: {}", turn.utterance);
    }
    if !view.finished {
        for (i, label) in view.options.iter().enumerate() {
            println!("  [{i}] {label}");
        }
    }
}

/// With `--choices` the script is played non-interactively; otherwise
/// choices are read from stdin, one index per line.
fn play(g: &Global, id: &str, session: &str, choices: Option<Vec<usize>>, jsonl: bool) -> Outcome {
    let engine = engine(g)?;
    let id = project_id(id)?;
    let sid = session_id(session)?;
    let quiet = jsonl;
    let mut view = engine.start_play(&id, &sid)?;
    if !quiet {
        show(&view, 0);
    }
    let mut scripted = choices.map(|c| c.into_iter());
    let stdin = io::stdin();
    let interactive = scripted.is_none() && stdin.is_terminal();
    let mut lines = stdin.lock().lines();
    while !view.finished {
        if interactive {
            print!("choice> ");
            io::stdout().flush()?;
        }
        let next = match &mut scripted {
            Some(it) => it.next(),
            None => loop {
                match lines.next() {
                    None => break None,
                    Some(line) => {
                        let line = line?;
                        let line = line.trim();
                        if line.is_empty() {
                            continue;
                        }
                        match line.parse::<usize>() {
                            Ok(i) => break Some(i),
                            Err(_) if interactive => {
                                println!("enter an option number");
                                continue;
                            }
                            Err(_) => return Err(Failure::usage(format!("bad choice {line:?}"))),
                        }
                    }
                }
            },
        };
        let Some(index) = next else { break };
        let before = view.transcript.len();
        match engine.choose(&view.play_id, index) {
            Ok(v) => view = v,
            Err(e) if interactive => {
                println!("{e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        }
        if !quiet {
            show(&view, before);
        }
    }
    if jsonl {
        print!("{}", transcript_jsonl(&view.transcript));
    } else if view.current == Target::End || view.finished {
        println!("(end of session)");
    } else {
        println!("(stopped before the end)");
    }
    Ok(0)
}

fn print_stats(stats: &ProjectStats) {
    println!("project {} \"{}\"", stats.project_id, stats.title);
    println!("plan approved: {}", if stats.plan_approved { "yes" } else { "no" });
    println!("revisions: {}", stats.revision_count);
    println!("content hash: {}", stats.content_hash);
    for s in &stats.sessions {
        match &s.fsm {
            Some(f) => println!(
                "{} \"{}\": {} states, {} options, {} terminal, depth {}",
                s.session_id, s.title, f.state_count, f.option_count, f.terminal_count, f.max_depth
            ),
            None => println!("{} \"{}\": not generated", s.session_id, s.title),
        }
        for c in &s.coverage {
            let mark = if c.covered { 'x' } else { ' ' };
            println!("  [{mark}] {} ({:.2})", c.key_point, c.best_overlap);
        }
    }
}
