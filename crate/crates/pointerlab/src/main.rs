use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use pointerlab::{bundled, parse_scenario, run, RunError, RunOptions, EXIT_EXECUTION, EXIT_PARSE, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "pointerlab", version, about = "Run measurement-chain scenarios and report the results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files
    Run {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        /// Certainty and equality tolerance
        #[arg(long, default_value_t = pointerlab_core::AMPLITUDE_TOL)]
        tolerance: f64,
        /// Scenario files to run at once
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Parse and resolve a scenario without running it
    Check { file: PathBuf },
    /// Run a bundled scenario
    Demo {
        #[arg(value_parser = ["fr", "ambiguity", "decoherence", "triortho"])]
        name: String,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
}

/// Output document or (exit code, message) for one scenario.
type Outcome = Result<String, (i32, String)>;

fn execute(file: &str, text: &str, format: Format, opts: &RunOptions) -> Outcome {
    let scenario = parse_scenario(text).map_err(|d| (EXIT_PARSE, d.render(file, text)))?;
    let report = run(&scenario, opts).map_err(|e| match e {
        RunError::Invalid(d) => (EXIT_PARSE, d.render(file, text)),
        other => (EXIT_EXECUTION, format!("error: {file}: {other}\n")),
    })?;
    Ok(match format {
        Format::Table => report.to_table(),
        Format::Structured => report.to_json(),
    })
}

fn run_files(files: &[PathBuf], format: Format, opts: RunOptions, jobs: usize) -> ExitCode {
    let results: Vec<Mutex<Option<Outcome>>> = files.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, files.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = files.get(k) else { break };
                let name = path.display().to_string();
                let outcome = match std::fs::read_to_string(path) {
                    Ok(text) => execute(&name, &text, format, &opts),
                    Err(e) => Err((EXIT_USAGE, format!("error: cannot read {name}: {e}\n"))),
                };
                *results[k].lock().expect("no panics while holding the lock") = Some(outcome);
            });
        }
    });
    let outcomes: Vec<Outcome> = results
        .into_iter()
        .map(|m| m.into_inner().expect("lock").expect("every file ran"))
        .collect();

    let mut code = 0;
    let mut docs = Vec::new();
    for o in outcomes {
        match o {
            Ok(doc) => docs.push(doc),
            Err((c, msg)) => {
                eprint!("{msg}");
                if code == 0 {
                    code = c;
                }
            }
        }
    }
    match format {
        // one document on stdout even for several files
        Format::Structured if files.len() > 1 => println!("[{}]", docs.join(",\n")),
        Format::Structured => docs.iter().for_each(|d| println!("{d}")),
        Format::Table => print!("{}", docs.join("\n")),
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            files,
            format,
            tolerance,
            jobs,
        } => run_files(&files, format, RunOptions { tolerance }, jobs),
        Command::Check { file } => {
            let name = file.display().to_string();
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {name}: {e}");
                    return ExitCode::from(EXIT_USAGE as u8);
                }
            };
            match parse_scenario(&text) {
                Ok(s) => {
                    println!("{name}: ok ({} actions, {} queries)", s.actions.len(), s.queries.len());
                    ExitCode::SUCCESS
                }
                Err(d) => {
                    eprint!("{}", d.render(&name, &text));
                    ExitCode::from(EXIT_PARSE as u8)
                }
            }
        }
        Command::Demo { name, format } => {
            let (file, text) = bundled::get(&name).expect("clap restricts demo names");
            match execute(file, text, format, &RunOptions::default()) {
                Ok(doc) => {
                    print!("{doc}");
                    if matches!(format, Format::Structured) {
                        println!();
                    }
                    ExitCode::SUCCESS
                }
                Err((c, msg)) => {
                    eprint!("{msg}");
                    ExitCode::from(c as u8)
                }
            }
        }
    }
}
