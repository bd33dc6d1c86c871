//! Interface coupling errors `e_ke`, `e_sigma` against `alpha` on the finest
//! P2/P1 level.
//!
//! `cargo run --release --example coupling_errors -- [level]`

use robin_fsi::verification::{run_convergence_study, ErrorField, StudySpec};

fn main() {
    let mut spec = StudySpec::coupling();
    if let Some(l) = std::env::args().nth(1).and_then(|s| s.parse().ok()) {
        spec.first_level = l;
        spec.levels = l + 1;
    }
    let start = std::time::Instant::now();
    let table = run_convergence_study(&spec, |r| eprintln!("alpha {} done after {:.1?}", r.alpha, start.elapsed()));
    println!("{:>6} {:>12} {:>12}", "alpha", "e_ke", "e_sigma");
    for a in table.alphas() {
        let r = table.finest(a).unwrap();
        println!("{a:>6} {:>12.4e} {:>12.4e}", r.get(ErrorField::Kinematic), r.get(ErrorField::Stress));
    }
}
