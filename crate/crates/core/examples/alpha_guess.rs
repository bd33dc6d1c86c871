//! The heuristic Robin parameter for the benchmark structure.
//!
//! Only a starting point: runs with it are generally less accurate than with a
//! tuned `alpha` (compare with `pulse_benchmark`, which uses 100).

use robin_fsi::config::MaterialParams;
use robin_fsi::verification::alpha_heuristic;

fn main() {
    let m = MaterialParams::benchmark();
    // Young's modulus and Poisson ratio from the Lame constants
    let nu = m.lambda_s / (2.0 * (m.lambda_s + m.mu_s));
    let young = m.mu_s * (3.0 * m.lambda_s + 2.0 * m.mu_s) / (m.lambda_s + m.mu_s);
    for dt in [1e-4, 1e-5] {
        let a0 = alpha_heuristic(m.rho_s, 0.1, dt, young, nu, 0.0, 0.0);
        let a1 = alpha_heuristic(m.rho_s, 0.1, dt, young, nu, 0.5, 1.0);
        println!("dt = {dt:e}: alpha = {a0:.1} (beta = 0), {a1:.1} (rho1 = 0.5, rho2 = 1)");
    }
}
