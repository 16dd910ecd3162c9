//! Writes the synthetic evaluation fixtures.
//!
//! Usage: `make_fixtures <dir> [seed] [size]`

use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(dir) = args.first() else {
        eprintln!("usage: make_fixtures <dir> [seed] [size]");
        return ExitCode::from(2);
    };
    let seed = args.get(1).map_or(Ok(7), |s| s.parse());
    let size = args.get(2).map_or(Ok(640), |s| s.parse());
    let (Ok(seed), Ok(size)) = (seed, size) else {
        eprintln!("seed and size must be non-negative integers");
        return ExitCode::from(2);
    };
    match lanelock::fixture::write_fixtures(dir, seed, size) {
        Ok(m) => {
            for case in &m.cases {
                println!("wrote {}", case.name());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
