//! Harmonic mesh motion with the midpoint rule: checks the discrete geometric
//! conservation law and writes the deformed mesh as VTK.
//!
//! `cargo run --release --example mesh_motion`

use std::fs::File;

use robin_fsi::ale::{gcl_check, HarmonicExtension, AleState};
use robin_fsi::config::MeshParams;
use robin_fsi::fem::{Family, FeSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (fluid, _, imap) = MeshParams::unit_square(0.05).generate()?;
    let ext = HarmonicExtension::new(&fluid, &imap)?;
    let space = FeSpace::new(&fluid, Family::P2, 2);
    let u: Vec<f64> = (0..space.n_dofs()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
    let mut state = AleState::at(&fluid, vec![0.0; 2 * fluid.n_nodes()])?;
    let dt = 0.01;
    for n in 1..=20 {
        let t = n as f64 * dt;
        // interface bulge travelling to the right
        let trace: Vec<[f64; 2]> = imap
            .fluid_nodes()
            .map(|i| {
                let x = fluid.nodes()[i][0];
                [0.0, 0.05 * (std::f64::consts::PI * x).sin() * (10.0 * (x - t)).cos() * x * (1.0 - x)]
            })
            .collect();
        state = state.advance(&fluid, ext.solve(&fluid, &trace, None)?, dt)?;
        let r = gcl_check(&space, &u, &state.previous, &state.half, &state.current, &state.w, dt);
        println!("step {n:>2}: GCL residual {r:.2e}, min Jacobian {:.4}", state.min_jacobian(&fluid));
    }
    state.current.write_vtk(File::create("deformed_fluid.vtk")?, "deformed fluid mesh", &[], &[])?;
    println!("wrote deformed_fluid.vtk");
    Ok(())
}
