use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use twisted_flux_cli::{execute, CliError, COMMANDS};

#[derive(Parser, Debug)]
#[command(name = "twisted-flux", version, about = "Twisted de Rham and signature invariants of flat tori")]
struct Args {
    /// One of: betti, signature, eta, rho, spectral-flow, aps-index, interval-cohomology, heat-trace, alpha0, verify.
    command: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Seed of the randomized checks in `verify`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&e.to_json()).expect("error object serializes"));
    ExitCode::from(e.exit_code as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if !COMMANDS.contains(&args.command.as_str()) {
        return fail(&CliError::config(String::new(), format!("unknown command {:?}; expected one of {}", args.command, COMMANDS.join(", "))));
    }
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return fail(&CliError::io(format!("cannot configure {threads} threads: {e}")));
        }
    }
    let text = match &args.config {
        None => None,
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => return fail(&CliError::io(format!("cannot read {}: {e}", path.display()))),
        },
    };
    let (output, error) = execute(&args.command, text.as_deref(), args.seed);
    if let Some(out) = output {
        let rendered = out.render();
        match &args.out {
            None => print!("{rendered}"),
            Some(path) => {
                if let Err(e) = std::fs::write(path, rendered) {
                    return fail(&CliError::io(format!("cannot write {}: {e}", path.display())));
                }
            }
        }
    }
    match error {
        Some(e) => fail(&e),
        None => ExitCode::SUCCESS,
    }
}
