//! Non-iterative Robin-Robin partitioned scheme on a fixed fluid domain
//! (linearized coupling, Stokes fluid).
//!
//! One step, from level n to n+1:
//! 1. structure with Robin data `alpha v^n - g^n`, giving `xi`, `eta`;
//! 2. fluid with Robin data `alpha xi^{n+1} + g^n`;
//! 3. traction update `g^{n+1} = g^n + alpha M_Gamma (xi^{n+1} - v^{n+1})`.

use std::sync::Arc;

use crate::config::{MaterialParams, SchemeConfig};
use crate::fem::assembly::{add_divergence, add_elasticity, add_mass, assemble_elasticity, assemble_mass};
use crate::fem::TractionTrace;
use crate::linsolve::{ConstrainedSystem, Constraints, SparseMatrix, TripletBuilder};
use crate::mesh::Mesh;
use crate::problem::{
    advance_energy, level_energy, Discretization, EnergyDiagnostics, EnergyOperators, FsiData, FsiError, FsiState,
};

/// Common interface of the time steppers.
pub trait TimeStepper {
    fn disc(&self) -> &Arc<Discretization>;
    fn state(&self) -> &FsiState;
    fn energy(&self) -> &EnergyDiagnostics;
    /// Fluid domain at the current level.
    fn fluid_mesh(&self) -> &Mesh;
    fn step(&mut self) -> Result<(), FsiError>;
    /// Replace the current state (initial conditions) and restart the energy log.
    fn set_state(&mut self, state: FsiState) -> Result<(), FsiError>;

    fn run(&mut self, n_steps: usize) -> Result<(), FsiError> {
        for _ in 0..n_steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Structure sub-step with the Robin term, factorized once.
#[derive(Debug)]
pub struct StructureSolver {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    system: ConstrainedSystem,
    rho_s: f64,
    dt: f64,
    alpha: f64,
}

impl StructureSolver {
    pub fn new(disc: &Discretization, material: &MaterialParams, scheme: &SchemeConfig) -> Result<Self, FsiError> {
        let (s, m) = (&disc.sspace, &disc.solid_mesh);
        let mass = assemble_mass(s, 1.0, m);
        let stiffness = assemble_elasticity(s, material.mu_s, material.lambda_s, material.gamma, m);
        let mut b = TripletBuilder::new(s.n_dofs(), s.n_dofs());
        b.add_matrix(&mass, 0, 0, material.rho_s / scheme.dt);
        b.add_matrix(&stiffness, 0, 0, scheme.dt);
        disc.idofs.add_mass_solid(&mut b, scheme.alpha, 0);
        let system = ConstrainedSystem::new(&b.build(), disc.solid_constraints(scheme))?;
        Ok(Self {
            mass,
            stiffness,
            system,
            rho_s: material.rho_s,
            dt: scheme.dt,
            alpha: scheme.alpha,
        })
    }

    /// Returns `(xi^{n+1}, eta^{n+1})` given the level-n state, the fluid
    /// interface velocity `v_gamma` (local numbering) and the solid load.
    pub fn step(
        &self,
        disc: &Discretization,
        xi: &[f64],
        eta: &[f64],
        v_gamma: &[f64],
        traction: &TractionTrace,
        load: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>), FsiError> {
        let mut rhs = self.mass.spmv(xi);
        rhs.iter_mut().for_each(|r| *r *= self.rho_s / self.dt);
        self.stiffness.spmv_add(eta, -1.0, &mut rhs);
        disc.idofs.scatter_solid(&disc.idofs.mass_apply(v_gamma), self.alpha, 0, &mut rhs);
        disc.idofs.scatter_solid(&traction.values, -1.0, 0, &mut rhs);
        if let Some(f) = load {
            rhs.iter_mut().zip(f).for_each(|(r, v)| *r += v);
        }
        let xi_new = self.system.solve(&rhs, &Constraints::new())?;
        let eta_new = eta.iter().zip(&xi_new).map(|(e, x)| e + self.dt * x).collect();
        Ok((xi_new, eta_new))
    }
}

/// `g + alpha M_Gamma (xi_Gamma - v_Gamma)`.
pub fn update_traction(
    disc: &Discretization,
    alpha: f64,
    traction: &TractionTrace,
    xi: &[f64],
    v: &[f64],
    time: f64,
) -> TractionTrace {
    let jump: Vec<f64> = disc
        .idofs
        .restrict_solid(xi)
        .iter()
        .zip(disc.idofs.restrict_fluid(v))
        .map(|(a, b)| a - b)
        .collect();
    let m = disc.idofs.mass_apply(&jump);
    TractionTrace {
        values: traction.values.iter().zip(&m).map(|(g, d)| g + alpha * d).collect(),
        time,
    }
}

/// Partitioned solver on the reference fluid domain.
pub struct LinearFsi {
    disc: Arc<Discretization>,
    material: MaterialParams,
    scheme: SchemeConfig,
    data: Arc<dyn FsiData>,
    structure: StructureSolver,
    fluid: ConstrainedSystem,
    fluid_mass: SparseMatrix,
    viscous: SparseMatrix,
    /// Operator without the Robin term, for traction recovery checks.
    momentum: SparseMatrix,
    state: FsiState,
    energy: EnergyDiagnostics,
    pub source_constant: f64,
}

impl LinearFsi {
    pub fn new(
        disc: Arc<Discretization>,
        material: MaterialParams,
        scheme: SchemeConfig,
        data: Arc<dyn FsiData>,
    ) -> Result<Self, FsiError> {
        material.validate()?;
        scheme.validate()?;
        let h = disc.fluid_mesh.max_diameter();
        if scheme.dt > scheme.dt_bound(material.rho_f, h) {
            log::warn!(
                "dt = {:e} exceeds rho_F h / (alpha C k^2) = {:e}",
                scheme.dt,
                scheme.dt_bound(material.rho_f, h)
            );
        }
        let structure = StructureSolver::new(&disc, &material, &scheme)?;
        let (v, m) = (&disc.vspace, &disc.fluid_mesh);
        let (nv, n) = (disc.nv(), disc.n_fluid());
        let fluid_mass = assemble_mass(v, 1.0, m);
        let viscous = assemble_elasticity(v, material.mu_f, 0.0, 0.0, m);
        let mut b = TripletBuilder::new(n, n);
        add_mass(&mut b, v, m, material.rho_f / scheme.dt, (0, 0));
        add_elasticity(&mut b, v, m, material.mu_f, 0.0, 0.0, (0, 0));
        add_divergence(&mut b, v, &disc.pspace, m, -1.0, (0, nv), true);
        add_divergence(&mut b, v, &disc.pspace, m, 1.0, (nv, 0), false);
        let momentum = b.build();
        let mut b = TripletBuilder::new(n, n);
        b.add_matrix(&momentum, 0, 0, 1.0);
        disc.idofs.add_mass_fluid(&mut b, scheme.alpha, 0);
        let fluid = ConstrainedSystem::new(&b.build(), disc.fluid_constraints(&scheme))?;
        let state = FsiState::zeros(&disc);
        let mut s = Self {
            disc,
            material,
            scheme,
            data,
            structure,
            fluid,
            fluid_mass,
            viscous,
            momentum,
            state,
            energy: EnergyDiagnostics::default(),
            source_constant: 1.0,
        };
        s.reset_energy()?;
        Ok(s)
    }

    fn reset_energy(&mut self) -> Result<(), FsiError> {
        self.energy = level_energy(
            &self.disc,
            self.material.rho_f,
            self.material.rho_s,
            self.scheme.alpha,
            self.scheme.dt,
            &self.state,
            &self.fluid_mass,
            &self.structure.mass,
            &self.structure.stiffness,
        )?;
        Ok(())
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    /// Fluid operator without the Robin term (velocity and pressure rows).
    pub fn momentum_operator(&self) -> &SparseMatrix {
        &self.momentum
    }

    /// Fluid right side at level n+1 without interface data.
    pub fn fluid_rhs(&self, v_prev: &[f64], t_new: f64) -> Vec<f64> {
        let nv = self.disc.nv();
        let mut rhs = vec![0.0; self.disc.n_fluid()];
        let mv = self.fluid_mass.spmv(v_prev);
        rhs[..nv]
            .iter_mut()
            .zip(&mv)
            .for_each(|(r, m)| *r = self.material.rho_f / self.scheme.dt * m);
        self.disc.fluid_loads(self.data.as_ref(), &self.disc.fluid_mesh, t_new, &mut rhs);
        rhs
    }
}

impl TimeStepper for LinearFsi {
    fn disc(&self) -> &Arc<Discretization> {
        &self.disc
    }

    fn state(&self) -> &FsiState {
        &self.state
    }

    fn energy(&self) -> &EnergyDiagnostics {
        &self.energy
    }

    fn fluid_mesh(&self) -> &Mesh {
        &self.disc.fluid_mesh
    }

    fn set_state(&mut self, state: FsiState) -> Result<(), FsiError> {
        self.state = state;
        self.reset_energy()
    }

    fn step(&mut self) -> Result<(), FsiError> {
        let disc = Arc::clone(&self.disc);
        let (dt, alpha) = (self.scheme.dt, self.scheme.alpha);
        let prev = &self.state;
        let t_new = prev.t + dt;
        let load = disc.solid_loads(self.data.as_ref(), t_new);
        let v_gamma = disc.idofs.restrict_fluid(&prev.v);
        let (xi, eta) = self
            .structure
            .step(&disc, &prev.xi, &prev.eta, &v_gamma, &prev.traction, load.as_deref())?;

        let mut rhs = self.fluid_rhs(&prev.v, t_new);
        disc.idofs.scatter_fluid(&prev.traction.values, 1.0, 0, &mut rhs);
        let xi_gamma = disc.idofs.restrict_solid(&xi);
        disc.idofs
            .scatter_fluid(&disc.idofs.mass_apply(&xi_gamma), alpha, 0, &mut rhs);
        let x = self.fluid.solve(&rhs, &Constraints::new())?;
        let nv = disc.nv();
        let v = x[..nv].to_vec();
        let p = x[nv..].to_vec();
        let traction = update_traction(&disc, alpha, &prev.traction, &xi, &v, t_new);
        let next = FsiState {
            t: t_new,
            step: prev.step + 1,
            v,
            p,
            xi,
            eta,
            traction,
        };
        let ops = EnergyOperators {
            fluid_mass: &self.fluid_mass,
            fluid_mass_prev: &self.fluid_mass,
            viscous: &self.viscous,
            solid_mass: &self.structure.mass,
            solid_stiffness: &self.structure.stiffness,
        };
        let pressures = (self.data.inlet_pressure(t_new), self.data.outlet_pressure(t_new));
        self.energy = advance_energy(
            &disc,
            self.material.rho_f,
            self.material.rho_s,
            alpha,
            dt,
            self.source_constant,
            self.material.mu_f,
            pressures,
            &self.energy,
            prev,
            &next,
            &ops,
        )?;
        self.state = next;
        Ok(())
    }
}
