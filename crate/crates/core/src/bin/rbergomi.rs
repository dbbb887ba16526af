use std::process::ExitCode;

use rbergomi::io::{parse_args, run};
use rbergomi::Error;

const USAGE: &str = "usage: rbergomi <volterra-check|smile|benchmark|calibrate|extract-xi> [--config FILE] [--key=value ...] --out PATH";

fn init_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("RVT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| Error::Config {
        field: "RVT_THREADS".into(),
        reason: format!("expected a non-negative integer, got `{raw}`"),
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Numerical(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args.iter().any(|a| a == "--help" || a == "-h") {
        println!("{USAGE}");
        return if args.is_empty() {
            ExitCode::from(2)
        } else {
            ExitCode::SUCCESS
        };
    }
    let result = init_threads().and_then(|_| parse_args(args)).and_then(|inv| run(&inv));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rbergomi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
