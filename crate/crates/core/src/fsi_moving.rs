//! The partitioned scheme on a moving fluid domain (ALE formulation).
//!
//! Per step: structure (reference configuration), then the mesh update by
//! harmonic extension of the new interface displacement, then the fluid on the
//! new domain. The time derivative is taken on `Omega^n`, convection on the
//! midpoint domain with advecting field `v^n - w`, and the remaining fluid
//! terms on `Omega^{n+1}`.

use std::sync::Arc;

use crate::ale::{element_divergence, interface_velocity_override, AleState, HarmonicExtension};
use crate::config::{BoundaryVariant, ConvectionForm, MaterialParams, SchemeConfig};
use crate::fem::assembly::{
    add_boundary_advection, add_convection, add_divergence, add_elasticity, add_mass, add_sparse,
    add_weighted_mass, PatternAccumulator,
};
use crate::fsi_linear::{update_traction, StructureSolver, TimeStepper};
use crate::linsolve::{ConstrainedSystem, Constraints, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, Mesh};
use crate::problem::{
    advance_energy, level_energy, Discretization, EnergyDiagnostics, EnergyOperators, FsiData, FsiError, FsiState,
};

/// Sparsity pattern covering every block of the moving fluid system.
fn fluid_pattern(disc: &Discretization) -> SparseMatrix {
    let (v, m, nv, n) = (&disc.vspace, &disc.fluid_mesh, disc.nv(), disc.n_fluid());
    let mut b = TripletBuilder::new(n, n);
    add_elasticity(&mut b, v, m, 1.0, 1.0, 1.0, (0, 0));
    add_divergence(&mut b, v, &disc.pspace, m, 1.0, (0, nv), true);
    add_divergence(&mut b, v, &disc.pspace, m, 1.0, (nv, 0), false);
    disc.idofs.add_mass_fluid(&mut b, 1.0, 0);
    b.build()
}

pub struct MovingFsi {
    disc: Arc<Discretization>,
    material: MaterialParams,
    scheme: SchemeConfig,
    data: Arc<dyn FsiData>,
    structure: StructureSolver,
    extension: HarmonicExtension,
    ale: AleState,
    frozen_geometry: bool,
    track_dissipation: bool,
    constraints: Vec<usize>,
    system_acc: PatternAccumulator,
    mass_acc: PatternAccumulator,
    fluid: Option<ConstrainedSystem>,
    /// Unit fluid mass on the current domain.
    mass_current: SparseMatrix,
    state: FsiState,
    energy: EnergyDiagnostics,
    pub source_constant: f64,
}

impl MovingFsi {
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
        let extension = HarmonicExtension::new(&disc.fluid_mesh, &disc.imap)?;
        let mut mb = TripletBuilder::new(disc.nv(), disc.nv());
        add_mass(&mut mb, &disc.vspace, &disc.fluid_mesh, 1.0, (0, 0));
        let mass_pattern = mb.build();
        let state = FsiState::zeros(&disc);
        let mut s = Self {
            ale: AleState::at(&disc.fluid_mesh, vec![0.0; 2 * disc.fluid_mesh.n_nodes()])?,
            constraints: disc.fluid_constraints(&scheme),
            system_acc: PatternAccumulator::new(fluid_pattern(&disc)),
            mass_current: mass_pattern.clone(),
            mass_acc: PatternAccumulator::new(mass_pattern),
            disc,
            material,
            scheme,
            data,
            structure,
            extension,
            frozen_geometry: false,
            track_dissipation: true,
            fluid: None,
            state,
            energy: EnergyDiagnostics::default(),
            source_constant: 1.0,
        };
        s.reset_to(FsiState::zeros(&s.disc))?;
        Ok(s)
    }

    /// Keep the fluid domain at its reference configuration.
    pub fn with_frozen_geometry(mut self, frozen: bool) -> Result<Self, FsiError> {
        self.frozen_geometry = frozen;
        let st = self.state.clone();
        self.reset_to(st)?;
        Ok(self)
    }

    /// Skip the viscous-dissipation bookkeeping (saves one assembly per step).
    pub fn with_dissipation_tracking(mut self, on: bool) -> Self {
        self.track_dissipation = on;
        self
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    pub fn ale(&self) -> &AleState {
        &self.ale
    }

    fn extend(&self, eta: &[f64], t: f64) -> Result<Vec<f64>, FsiError> {
        let trace = self.disc.interface_vertex_displacement(eta);
        let data = Arc::clone(&self.data);
        let f = move |x: [f64; 2]| data.geometry_force(x, t);
        let fd: Option<&dyn Fn([f64; 2]) -> [f64; 2]> = if self.data.has_geometry_force() { Some(&f) } else { None };
        Ok(self.extension.solve(&self.disc.fluid_mesh, &trace, fd)?)
    }

    fn assemble_mass(&mut self, mesh: &Mesh) -> SparseMatrix {
        self.mass_acc.reset();
        add_mass(&mut self.mass_acc, &self.disc.vspace, mesh, 1.0, (0, 0));
        self.mass_acc.to_matrix()
    }

    /// Replace the current state; the fluid domain is rebuilt from `eta`.
    fn reset_to(&mut self, state: FsiState) -> Result<(), FsiError> {
        let disc = Arc::clone(&self.disc);
        let reference = &disc.fluid_mesh;
        let eta_f = if self.frozen_geometry {
            vec![0.0; 2 * reference.n_nodes()]
        } else {
            self.extend(&state.eta, state.t)?
        };
        self.ale = AleState::at(reference, eta_f)?;
        let mesh = self.ale.current.clone();
        self.mass_current = self.assemble_mass(&mesh);
        self.state = state;
        self.energy = level_energy(
            &self.disc,
            self.material.rho_f,
            self.material.rho_s,
            self.scheme.alpha,
            self.scheme.dt,
            &self.state,
            &self.mass_current,
            &self.structure.mass,
            &self.structure.stiffness,
        )?;
        self.energy.min_jacobian = self.ale.min_jacobian(reference);
        Ok(())
    }
}

impl TimeStepper for MovingFsi {
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
        &self.ale.current
    }

    fn set_state(&mut self, state: FsiState) -> Result<(), FsiError> {
        self.reset_to(state)
    }

    fn step(&mut self) -> Result<(), FsiError> {
        let disc = Arc::clone(&self.disc);
        let (dt, alpha, rho, mu) = (self.scheme.dt, self.scheme.alpha, self.material.rho_f, self.material.mu_f);
        let t_new = self.state.t + dt;
        let nv = disc.nv();

        let load = disc.solid_loads(self.data.as_ref(), t_new);
        let v_gamma = disc.idofs.restrict_fluid(&self.state.v);
        let (xi, eta) = self.structure.step(
            &disc,
            &self.state.xi,
            &self.state.eta,
            &v_gamma,
            &self.state.traction,
            load.as_deref(),
        )?;

        let ale = if self.frozen_geometry {
            self.ale.clone()
        } else {
            let eta_f = self.extend(&eta, t_new)?;
            self.ale.advance(&disc.fluid_mesh, eta_f, dt)?
        };
        let (v, p) = (&disc.vspace, &disc.pspace);
        let w = v.embed_p1(&ale.w);
        let adv: Vec<f64> = interface_velocity_override(&self.state.v, &w, disc.idofs.fluid_dofs())
            .iter()
            .zip(&w)
            .map(|(a, b)| a - b)
            .collect();

        let acc = &mut self.system_acc;
        acc.reset();
        add_sparse(acc, &self.mass_current, rho / dt);
        add_elasticity(acc, v, &ale.current, mu, 0.0, 0.0, (0, 0));
        match self.scheme.convection {
            ConvectionForm::None => {}
            ConvectionForm::Standard => add_convection(acc, v, &ale.half, rho, &adv, false, (0, 0)),
            ConvectionForm::Skew => {
                add_convection(acc, v, &ale.half, rho, &adv, true, (0, 0));
                let div = element_divergence(&ale.half, &ale.w);
                add_weighted_mass(acc, v, &ale.half, |e| 0.5 * rho * div[e], (0, 0));
                let tags = [BoundaryTag::Inlet, BoundaryTag::Outlet, BoundaryTag::FluidWall];
                add_boundary_advection(acc, v, &ale.half, &tags, 0.5 * rho, &adv, (0, 0));
            }
        }
        if self.scheme.inlet_outlet == BoundaryVariant::DynamicPressure && self.scheme.convection != ConvectionForm::None
        {
            let tags = [BoundaryTag::Inlet, BoundaryTag::Outlet];
            add_boundary_advection(acc, v, &ale.half, &tags, -0.5 * rho, &adv, (0, 0));
        }
        add_divergence(acc, v, p, &ale.current, -1.0, (0, nv), true);
        add_divergence(acc, v, p, &ale.current, 1.0, (nv, 0), false);
        disc.idofs.add_mass_fluid(acc, alpha, 0);
        let matrix = acc.to_matrix();
        let system = match &self.fluid {
            Some(prev) => ConstrainedSystem::refactor(prev, &matrix, self.constraints.iter().copied())?,
            None => ConstrainedSystem::new(&matrix, self.constraints.iter().copied())?,
        };

        let mut rhs = vec![0.0; disc.n_fluid()];
        self.mass_current.spmv_add(&self.state.v, rho / dt, &mut rhs[..nv]);
        disc.fluid_loads(self.data.as_ref(), &ale.current, t_new, &mut rhs);
        disc.idofs.scatter_fluid(&self.state.traction.values, 1.0, 0, &mut rhs);
        let xi_gamma = disc.idofs.restrict_solid(&xi);
        disc.idofs.scatter_fluid(&disc.idofs.mass_apply(&xi_gamma), alpha, 0, &mut rhs);
        let x = system.solve(&rhs, &Constraints::new())?;
        self.fluid = Some(system);

        let v_new = x[..nv].to_vec();
        let traction = update_traction(&disc, alpha, &self.state.traction, &xi, &v_new, t_new);
        let next = FsiState {
            t: t_new,
            step: self.state.step + 1,
            v: v_new,
            p: x[nv..].to_vec(),
            xi,
            eta,
            traction,
        };
        let mass_prev = std::mem::replace(&mut self.mass_current, SparseMatrix::zeros(0, 0));
        self.mass_current = if self.frozen_geometry {
            mass_prev.clone()
        } else {
            self.assemble_mass(&ale.current)
        };
        let viscous = if self.track_dissipation {
            let mut b = TripletBuilder::new(nv, nv);
            add_elasticity(&mut b, v, &ale.current, mu, 0.0, 0.0, (0, 0));
            b.build()
        } else {
            SparseMatrix::zeros(nv, nv)
        };
        let ops = EnergyOperators {
            fluid_mass: &self.mass_current,
            fluid_mass_prev: &mass_prev,
            viscous: &viscous,
            solid_mass: &self.structure.mass,
            solid_stiffness: &self.structure.stiffness,
        };
        let pressures = (self.data.inlet_pressure(t_new), self.data.outlet_pressure(t_new));
        let mut energy = advance_energy(
            &disc,
            rho,
            self.material.rho_s,
            alpha,
            dt,
            self.source_constant,
            mu,
            pressures,
            &self.energy,
            &self.state,
            &next,
            &ops,
        )?;
        energy.min_jacobian = ale.min_jacobian(&disc.fluid_mesh);
        self.energy = energy;
        self.ale = ale;
        self.state = next;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ElementChoice, MeshParams, SolidTop, WallCondition};
    use crate::fsi_linear::LinearFsi;
    use crate::problem::Unforced;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scheme(element: ElementChoice, io: BoundaryVariant, conv: ConvectionForm) -> SchemeConfig {
        SchemeConfig {
            alpha: 10.0,
            dt: 0.01,
            t_final: 1.0,
            element,
            inlet_outlet: io,
            wall: WallCondition::NoSlip,
            solid_top: SolidTop::Clamped,
            convection: conv,
            ..Default::default()
        }
    }

    fn random_state(disc: &Discretization, sc: &SchemeConfig, seed: u64, amp: f64) -> FsiState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = FsiState::zeros(disc);
        let fc = disc.fluid_constraints(sc);
        let scn = disc.solid_constraints(sc);
        for (i, v) in st.v.iter_mut().enumerate() {
            if fc.binary_search(&i).is_err() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        for i in 0..st.xi.len() {
            if scn.binary_search(&i).is_err() {
                st.xi[i] = rng.random_range(-1.0..1.0);
                st.eta[i] = rng.random_range(-amp..amp);
            }
        }
        st.traction.values.iter_mut().for_each(|g| *g = rng.random_range(-0.1..0.1));
        st
    }

    #[test]
    fn frozen_stokes_matches_linear() {
        for el in [ElementChoice::Mini, ElementChoice::TaylorHood] {
            let disc = Discretization::new(&MeshParams::unit_square(0.125), el).unwrap();
            let sc = scheme(el, BoundaryVariant::NoSlip, ConvectionForm::None);
            let st = random_state(&disc, &sc, 11, 0.01);
            let mut lin = LinearFsi::new(Arc::clone(&disc), MaterialParams::unit(), sc, Arc::new(Unforced)).unwrap();
            let mut mov = MovingFsi::new(Arc::clone(&disc), MaterialParams::unit(), sc, Arc::new(Unforced))
                .unwrap()
                .with_frozen_geometry(true)
                .unwrap();
            lin.set_state(st.clone()).unwrap();
            mov.set_state(st).unwrap();
            lin.run(4).unwrap();
            mov.run(4).unwrap();
            let (a, b) = (lin.state(), mov.state());
            let diff = a
                .v
                .iter()
                .zip(&b.v)
                .chain(a.p.iter().zip(&b.p))
                .chain(a.eta.iter().zip(&b.eta))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12, "{el:?}: {diff}");
        }
    }

    #[test]
    fn skew_energy_balance_on_moving_mesh() {
        for el in [ElementChoice::Mini, ElementChoice::TaylorHood] {
            let disc = Discretization::new(&MeshParams::unit_square(0.125), el).unwrap();
            let mut sc = scheme(el, BoundaryVariant::DynamicPressure, ConvectionForm::Skew);
            sc.wall = WallCondition::Symmetry;
            sc.solid_top = crate::config::SolidTop::TractionFree;
            let st = random_state(&disc, &sc, 2, 0.02);
            let mut mov = MovingFsi::new(Arc::clone(&disc), MaterialParams::unit(), sc, Arc::new(Unforced)).unwrap();
            mov.set_state(st).unwrap();
            let g0 = mov.energy().g();
            for _ in 0..5 {
                let before = *mov.energy();
                mov.step().unwrap();
                let e = mov.energy();
                let lhs = e.g() + (e.d - before.d) + (e.n2 - before.n2);
                assert!((lhs - before.g()).abs() < 1e-10 * g0, "{el:?}: {lhs} vs {}", before.g());
                assert!(e.min_jacobian > 0.0);
            }
        }
    }

    #[test]
    fn mesh_follows_interface() {
        let disc = Discretization::new(&MeshParams::unit_square(0.25), ElementChoice::Mini).unwrap();
        let sc = scheme(ElementChoice::Mini, BoundaryVariant::NoSlip, ConvectionForm::Skew);
        let st = random_state(&disc, &sc, 4, 0.01);
        let mut mov = MovingFsi::new(Arc::clone(&disc), MaterialParams::unit(), sc, Arc::new(Unforced)).unwrap();
        mov.set_state(st).unwrap();
        mov.step().unwrap();
        let d = disc.interface_vertex_displacement(&mov.state().eta);
        for (k, &(f, _)) in disc.imap.pairs().iter().enumerate() {
            let x = mov.fluid_mesh().nodes()[f];
            let x0 = disc.fluid_mesh.nodes()[f];
            assert!((x[0] - x0[0] - d[k][0]).abs() < 1e-15);
            assert!((x[1] - x0[1] - d[k][1]).abs() < 1e-15);
        }
    }
}
