//! Pressure pulse in the compliant channel: partitioned scheme against the
//! monolithic reference, with profile files written to `out/benchmark`.
//!
//! `cargo run --release --example pulse_benchmark -- [partitioned dt] [monolithic dt]`

use std::path::Path;
use std::time::Instant;

use robin_fsi::experiments::{profile_differences, run_benchmark, write_profile_files, BenchmarkConfig, SolverKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let mut part = BenchmarkConfig::default();
    part.scheme.dt = args.first().copied().unwrap_or(1e-5);
    let mut mono = part.clone();
    mono.scheme.dt = args.get(1).copied().unwrap_or(1e-4);

    let start = Instant::now();
    let a = run_benchmark(&part, SolverKind::Partitioned, |e| {
        if (e.t / part.scheme.dt).round() as usize % 200 == 0 {
            eprintln!("partitioned t = {:.5}  G = {:.4e}", e.t, e.g());
        }
    })?;
    eprintln!("partitioned: {:.1?}", start.elapsed());
    let start = Instant::now();
    let b = run_benchmark(&mono, SolverKind::Monolithic, |_| {})?;
    eprintln!("monolithic: {:.1?}", start.elapsed());

    let dir = Path::new("out/benchmark");
    write_profile_files(dir, "partitioned", &a.profiles)?;
    write_profile_files(dir, "monolithic", &b.profiles)?;
    println!("{:>8} {:>10} {:>10} {:>10}", "t [ms]", "flowrate", "pressure", "eta_y");
    for (p, q) in a.profiles.iter().zip(&b.profiles) {
        let d = profile_differences(p, q);
        println!("{:>8.1} {:>10.4} {:>10.4} {:>10.4}", p.t * 1e3, d[0], d[1], d[2]);
    }
    Ok(())
}
