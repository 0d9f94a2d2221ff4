use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mustcall_harness::corpus::run_corpus;
use mustcall_harness::generate::{differential, generate_random_programs};

/// Runs the golden corpus and, optionally, oracle-checked random programs.
#[derive(Debug, Parser)]
#[command(name = "mustcall-corpus", version)]
struct Args {
    /// Directory with one subdirectory per case.
    dir: PathBuf,
    /// Seed of the random programs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random programs checked against the path oracle.
    #[arg(long, default_value_t = 0)]
    random_count: usize,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if !args.dir.is_dir() {
        eprintln!("error: {} is not a directory", args.dir.display());
        return ExitCode::from(2);
    }
    let summary = run_corpus(&args.dir);
    println!("{summary}");
    let mut ok = summary.passed();
    if args.random_count > 0 {
        let mut agree = 0;
        for g in generate_random_programs(args.seed, args.random_count) {
            match differential(&g.case) {
                Ok(d) if d.agrees() => agree += 1,
                Ok(d) => {
                    println!("FAIL {}", g.case.name);
                    for line in &d.disagreements {
                        println!("     {line}");
                    }
                }
                Err(e) => println!("FAIL {}: {e}", g.case.name),
            }
        }
        println!("{agree} of {} random program(s) agree with the oracle", args.random_count);
        ok &= agree == args.random_count;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
