use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eiskern::cli::{
    apply_flags, census_csv, orbital_result, parse_flavor, run_all, RunFlags, Scenario,
};

#[derive(Parser)]
#[command(name = "eiskern", about = "scenario-driven verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonFlags {
    /// working precision override (digits of pi)
    #[arg(long)]
    precision: Option<u32>,
    /// Witt vector length override
    #[arg(long)]
    witt_length: Option<usize>,
    /// comma-separated suite selection override
    #[arg(long, value_delimiter = ',')]
    suite: Option<Vec<String>>,
    /// random seed override
    #[arg(long)]
    seed: Option<u64>,
    /// enumeration cap override
    #[arg(long)]
    cap: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suites of one or more scenarios.
    Run {
        /// scenario JSON files
        #[arg(long, required = true, num_args = 1..)]
        scenario: Vec<PathBuf>,
        /// write the report here (JSON; a .md twin is written alongside)
        #[arg(long)]
        report: Option<PathBuf>,
        /// scenario-level parallelism
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Census of a local model: point count as CSV.
    Enumerate {
        #[arg(long)]
        scenario: PathBuf,
        /// relative-standard | absolute-standard | naive-unitary-relative | naive-unitary-absolute
        #[arg(long)]
        flavor: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        d: usize,
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Orbital integral of a datum JSON file.
    Orbital {
        #[arg(long)]
        datum: PathBuf,
        /// use the dual-lattice test function
        #[arg(long, default_value_t = false)]
        dual: bool,
    },
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Scenario::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            report,
            jobs,
            flags,
        } => {
            let rf = RunFlags {
                precision: flags.precision,
                witt_length: flags.witt_length,
                suites: flags.suite,
                seed: flags.seed,
                cap: flags.cap,
                jobs,
            };
            let mut scenarios = Vec::new();
            for path in &scenario {
                match load_scenario(path) {
                    Ok(mut s) => {
                        apply_flags(&mut s, &rf);
                        if let Err(e) = s.validate() {
                            eprintln!("error: {}: {e}", path.display());
                            return ExitCode::from(2);
                        }
                        scenarios.push(s);
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
            }
            let rep = run_all(&scenarios, rf.jobs);
            for b in &rep.bodies {
                println!(
                    "{}: {} passed, {} failed, {} skipped",
                    b.scenario, b.passed, b.failed, b.skipped
                );
                for c in b.checks.iter().filter(|c| c.status == "fail") {
                    println!(
                        "  FAIL {}: {}",
                        c.name,
                        c.witness.as_deref().unwrap_or("")
                    );
                }
            }
            if let Some(path) = report {
                if let Err(e) = std::fs::write(&path, rep.to_json()) {
                    eprintln!("error: cannot write report: {e}");
                    return ExitCode::from(2);
                }
                let md = path.with_extension("md");
                if let Err(e) = std::fs::write(&md, rep.to_markdown()) {
                    eprintln!("error: cannot write markdown report: {e}");
                    return ExitCode::from(2);
                }
            }
            if rep.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Enumerate {
            scenario,
            flavor,
            n,
            d,
            cap,
        } => {
            let mut scn = match load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(c) = cap {
                scn.cap = c;
            }
            let fl = match parse_flavor(&flavor) {
                Some(f) => f,
                None => {
                    eprintln!("error: invalid flavor \"{flavor}\"");
                    return ExitCode::from(2);
                }
            };
            match census_csv(&scn, fl, n, d) {
                Ok(csv) => {
                    print!("{csv}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Orbital { datum, dual } => {
            let text = match std::fs::read_to_string(&datum) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", datum.display());
                    return ExitCode::from(2);
                }
            };
            match orbital_result(&text, dual) {
                Ok(v) => {
                    println!("{}", serde_json::to_string_pretty(&v).expect("json"));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
