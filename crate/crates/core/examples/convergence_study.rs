//! Refinement study on the manufactured solution.
//!
//! `cargo run --release --example convergence_study -- [fixed|moving] [levels] [alpha...]`

use robin_fsi::fem::ErrorConvention;
use robin_fsi::verification::{run_convergence_study, StudySpec};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut spec = match args.first().map(String::as_str) {
        Some("moving") => StudySpec::example2(),
        _ => StudySpec::example1(),
    };
    if let Some(n) = args.get(1).and_then(|s| s.parse().ok()) {
        spec.levels = n;
    }
    let alphas: Vec<f64> = args.iter().skip(2).filter_map(|s| s.parse().ok()).collect();
    if !alphas.is_empty() {
        spec.alphas = alphas;
    }
    spec.convention = ErrorConvention::Unsquared;
    let table = run_convergence_study(&spec, |r| {
        eprintln!("alpha {} level {} done: {:?}", r.alpha, r.level, r.errors.map(|e| e.e_f));
    });
    print!("{}", table.to_text());
}
