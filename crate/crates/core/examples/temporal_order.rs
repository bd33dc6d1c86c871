//! Temporal convergence of the splitting at fixed `h` against a `dt/8`
//! self-reference, in the energy norm.
//!
//! `cargo run --release --example temporal_order -- [alpha]`

use robin_fsi::config::{ElementChoice, MaterialParams};
use robin_fsi::verification::{rates, temporal_order_study};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alpha: f64 = std::env::args().nth(1).map_or(Ok(10.0), |s| s.parse())?;
    let pts = temporal_order_study(MaterialParams::unit(), alpha, 0.0125, 0.01, 3, 0.3, ElementChoice::Mini)?;
    let errs: Vec<f64> = pts.iter().map(|p| p.error).collect();
    for (p, r) in pts.iter().zip(std::iter::once(f64::NAN).chain(rates(&errs))) {
        println!("dt = {:.5}  error = {:.4e}  rate = {r:.3}", p.dt, p.error);
    }
    Ok(())
}
