//! Single manufactured-solution run with timing.
//!
//! `cargo run --release --example mms_run -- [fixed|moving] <level> <alpha>`

use std::sync::Arc;
use std::time::Instant;

use robin_fsi::fem::ErrorConvention;
use robin_fsi::problem::Discretization;
use robin_fsi::verification::{mms_errors, run_mms, MmsProblem, StudySpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let spec = match args.first().map(String::as_str) {
        Some("moving") => StudySpec::example2(),
        _ => StudySpec::example1(),
    };
    let level: usize = args.get(1).map_or(Ok(2), |s| s.parse())?;
    let alpha: f64 = args.get(2).map_or(Ok(10.0), |s| s.parse())?;
    let (dt, h) = spec.level_params(level);
    let problem = spec.problem();
    let start = Instant::now();
    let disc = Discretization::new(&MmsProblem::mesh(h), spec.element)?;
    let solver = run_mms(&problem, Arc::clone(&disc), problem.scheme(alpha, dt, spec.t_final, spec.element))?;
    let e = mms_errors(&problem, &disc, solver.fluid_mesh(), solver.state(), ErrorConvention::Unsquared)?;
    println!("h = {h}, dt = {dt}, alpha = {alpha}: {e:?}");
    println!("{:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}
