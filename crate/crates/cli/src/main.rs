mod repl;

use std::io::{self, BufRead, IsTerminal, Write};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tracequery_core::Session;

use repl::{load_trace, CliError, Flow, Format, State};

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
}

/// Query execution traces. With no query options, reads commands from
/// standard input.
#[derive(Parser)]
#[command(name = "tracequery", version)]
struct Args {
    /// Trace file to load.
    #[arg(long)]
    trace: Option<String>,
    /// Query to run, e.g. "call-chain 15".
    #[arg(long)]
    query: Option<String>,
    /// Scenario file to search for.
    #[arg(long)]
    scenario: Option<String>,
    /// Saved query to run from the session.
    #[arg(long)]
    run_saved: Option<String>,
    /// Any interactive command; repeatable, run in order.
    #[arg(long = "exec", value_name = "COMMAND")]
    exec: Vec<String>,
    /// Restrict queries to ids in [LO, HI].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    interval: Option<Vec<u64>>,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Session file; defaults to $TRACEQUERY_SESSION.
    #[arg(long, env = "TRACEQUERY_SESSION")]
    session: Option<String>,
}

fn setup(args: &Args) -> Result<State, CliError> {
    let session = match &args.session {
        Some(p) => Session::open(p)?,
        None => Session::new(),
    };
    let format = match args.format {
        FormatArg::Table => Format::Table,
        FormatArg::Json => Format::Json,
    };
    let mut st = State::new(session, format);
    if let Some(t) = &args.trace {
        st.set_store(load_trace(t)?);
    }
    if let Some(iv) = &args.interval {
        st.set_interval(iv[0], iv[1])?;
    }
    Ok(st)
}

fn batch(args: &Args, st: &mut State) -> Result<(), CliError> {
    let mut commands = Vec::new();
    if (args.query.is_some() || args.scenario.is_some() || args.run_saved.is_some()) && args.trace.is_none() {
        return Err(CliError::Usage("--trace is required with --query, --scenario or --run-saved".into()));
    }
    if let Some(q) = &args.query {
        commands.push(format!("query {}", q));
    }
    if let Some(f) = &args.scenario {
        commands.push(format!("scenario run '{}'", f));
    }
    if let Some(n) = &args.run_saved {
        commands.push(format!("run-saved '{}'", n));
    }
    commands.extend(args.exec.iter().cloned());
    let mut out = io::stdout().lock();
    for c in commands {
        let (text, flow) = st.execute(&c)?;
        let _ = out.write_all(text.as_bytes());
        if matches!(flow, Flow::Quit) {
            break;
        }
    }
    Ok(())
}

fn repl(st: &mut State) -> ExitCode {
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let mut out = io::stdout().lock();
    let mut line = String::new();
    loop {
        if interactive {
            let _ = write!(out, "> ");
            let _ = out.flush();
        }
        line.clear();
        match stdin.lock().read_line(&mut line) {
            Ok(0) => return ExitCode::SUCCESS,
            Ok(_) => {}
            Err(e) => {
                eprintln!("error: {}", e);
                return ExitCode::from(2);
            }
        }
        match st.execute(&line) {
            Ok((text, flow)) => {
                let _ = out.write_all(text.as_bytes());
                if matches!(flow, Flow::Quit) {
                    return ExitCode::SUCCESS;
                }
            }
            Err(e) => {
                let _ = out.flush();
                println!("error: {}", e);
            }
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut st = match setup(&args) {
        Ok(st) => st,
        Err(e) => {
            eprintln!("error: {}", e);
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let is_batch = args.query.is_some() || args.scenario.is_some() || args.run_saved.is_some() || !args.exec.is_empty();
    if !is_batch {
        return repl(&mut st);
    }
    match batch(&args, &mut st) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
