//! Unforced moving-domain run: the energy `G = E + N1` never grows, whatever `dt`.
//!
//! `cargo run --release --example energy_decay -- [dt]`

use robin_fsi::experiments::{energy_check, EnergyCheckConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = EnergyCheckConfig {
        amplitude: 0.5,
        ..EnergyCheckConfig::default()
    };
    cfg.scheme.dt = std::env::args().nth(1).map_or(Ok(1e-2), |s| s.parse())?;
    cfg.scheme.t_final = 50.0 * cfg.scheme.dt;
    let r = energy_check(&cfg)?;
    println!("{:>10} {:>12} {:>12} {:>12} {:>12}", "t", "E", "N1", "G", "D + N2");
    for e in r.series.iter().step_by(5) {
        println!("{:>10.4} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}", e.t, e.e, e.n1, e.g(), e.d + e.n2);
    }
    println!("largest relative increase of G: {:.2e}", r.max_increase);
    Ok(())
}
