//! Command-line front end: argument parsing, report documents and the
//! analyze, search and evaluate commands.

pub mod args;
pub mod report;
pub mod run;

use std::io::Write;

use args::{Cli, Command, Mode};

/// Runs a parsed command line and returns the process exit status.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let threads = match &cli.command {
        Command::Analyze(a) | Command::Search(a) => a.output.threads,
        Command::Evaluate(e) => e.output.threads,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker threads: {e}");
            return run::EXIT_ERROR;
        }
    };
    let (code, o, e) = pool.install(|| {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = match &cli.command {
            Command::Analyze(a) => run::cmd_run(a, Mode::Static, &mut o, &mut e),
            Command::Search(a) => run::cmd_run(a, Mode::Search, &mut o, &mut e),
            Command::Evaluate(a) => run::cmd_evaluate(a, &mut o, &mut e),
        };
        (code, o, e)
    });
    let _ = err.write_all(&e);
    if out.write_all(&o).and_then(|()| out.flush()).is_err() {
        return run::EXIT_ERROR;
    }
    code
}
