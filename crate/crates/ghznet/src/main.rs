use clap::{Parser, Subcommand};
use ghznet::butterfly::{self, Chirality, RoutingConfig};
use ghznet::cli::{
    self, derived_inputs, emit_report, load_scenario, run_scenario, EXIT_INTERNAL, EXIT_OK,
    EXIT_VERDICT_FAILURE,
};
use ghznet::qsim::TOL_PROTOCOL;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "ghznet", version, about = "GHZ-state network coding simulator")]
struct Args {
    /// Worker threads for branch enumeration (overrides GHZNET_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and emit its report.
    Run {
        scenario: PathBuf,
        /// Report path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the eight-row measurement/correction truth table against
    /// statevector simulation with random input states.
    VerifyTable1 {
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Exhaustively enumerate all outcome branches of an n-terminal round.
    Enumerate {
        #[arg(long, value_parser = clap::value_parser!(u64).range(3..=4))]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() {
    let args = Args::parse();
    let threads = args
        .threads
        .or_else(|| {
            std::env::var("GHZNET_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("warning: could not set thread pool size: {e}");
        }
    }

    let started = Instant::now();
    let code = match args.command {
        Command::Run { scenario, out, seed } => cmd_run(&scenario, out.as_deref(), seed),
        Command::VerifyTable1 { trials, seed } => cmd_verify_table(trials, seed),
        Command::Enumerate { n, seed } => cmd_enumerate(n as usize, seed),
    };
    eprintln!("wall_clock_ms {}", started.elapsed().as_millis());
    std::process::exit(code);
}

fn cmd_run(path: &std::path::Path, out: Option<&std::path::Path>, seed: Option<u64>) -> i32 {
    let mut scenario = match load_scenario(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let (report, code) = match run_scenario(&scenario) {
        Ok(r) => {
            let code = if r.all_pass() {
                EXIT_OK
            } else {
                EXIT_VERDICT_FAILURE
            };
            (r, code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (cli::error_report(&scenario, &e), e.exit_code())
        }
    };
    match out {
        Some(path) => {
            if let Err(e) = emit_report(&report, path) {
                eprintln!("error: {e}");
                return e.exit_code();
            }
        }
        None => print!("{}", report.render()),
    }
    code
}

fn cmd_verify_table(trials: usize, seed: u64) -> i32 {
    let rows = match butterfly::truth_table_check(trials, seed) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INTERNAL;
        }
    };
    let mut all_ok = true;
    for row in &rows {
        let ok = row.residual_overlap > 1.0 - TOL_PROTOCOL
            && row.restored_fidelity > 1.0 - TOL_PROTOCOL;
        all_ok &= ok;
        println!(
            "ROW a ({},{}) b {} correction {} residual_overlap {:.12} restored_fidelity {:.12} {}",
            u8::from(row.bell.b1),
            u8::from(row.bell.b0),
            u8::from(row.x.bit),
            row.frame,
            row.residual_overlap,
            row.restored_fidelity,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "VERDICT truth_table {}",
        if all_ok { "PASS" } else { "FAIL" }
    );
    if all_ok {
        EXIT_OK
    } else {
        EXIT_VERDICT_FAILURE
    }
}

fn cmd_enumerate(n: usize, seed: u64) -> i32 {
    let inputs = derived_inputs(n, seed);
    let run = || -> cli::Result<(usize, f64, usize)> {
        let instance = butterfly::build_instance(n, &inputs)
            .map_err(|e| cli::CliError::Validation(e.to_string()))?;
        let routing = RoutingConfig::new(n, Chirality::Clockwise).map_err(cli::CliError::from)?;
        let transcripts =
            butterfly::enumerate_branches(&instance, &routing).map_err(cli::CliError::from)?;
        let min_fidelity = transcripts
            .iter()
            .flat_map(|t| t.final_fidelities.iter().cloned())
            .fold(1.0f64, f64::min);
        let channels = transcripts[0].messages.len();
        Ok((transcripts.len(), min_fidelity, channels))
    };
    match run() {
        Ok((branches, min_fidelity, channels)) => {
            println!("branches {branches}");
            println!("channels {channels}");
            println!("min_fidelity {min_fidelity:.12}");
            let ok = min_fidelity > 1.0 - TOL_PROTOCOL;
            println!(
                "VERDICT perfect_transmission {}",
                if ok { "PASS" } else { "FAIL" }
            );
            if ok {
                EXIT_OK
            } else {
                EXIT_VERDICT_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
