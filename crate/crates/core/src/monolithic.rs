//! Monolithic reference solver: fluid and structure in one linear system per
//! step, with the kinematic condition imposed strongly.
//!
//! Unknowns are `[v, p, xi]`. Solid interface dofs are identified with the
//! matching fluid velocity dofs, so the interface traction cancels when the
//! momentum rows are summed. Geometry and the advecting field are explicit:
//! each step is assembled on `Omega^n` with `a = v^n - w^n`.

use std::sync::Arc;

use crate::ale::{element_divergence, interface_velocity_override, AleState, HarmonicExtension};
use crate::config::{BoundaryVariant, ConvectionForm, MaterialParams, SchemeConfig};
use crate::fem::assembly::{
    add_boundary_advection, add_convection, add_divergence, add_elasticity, add_mass, add_sparse,
    add_weighted_mass, PatternAccumulator, Renumbered,
};
use crate::fsi_linear::TimeStepper;
use crate::linsolve::{ConstrainedSystem, Constraints, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, Mesh};
use crate::problem::{level_energy, Discretization, EnergyDiagnostics, FsiData, FsiError, FsiState};

pub struct MonolithicFsi {
    disc: Arc<Discretization>,
    material: MaterialParams,
    scheme: SchemeConfig,
    data: Arc<dyn FsiData>,
    extension: HarmonicExtension,
    ale: AleState,
    /// Global row of every solid dof.
    solid_map: Vec<usize>,
    constraints: Vec<usize>,
    solid_block: SparseMatrix,
    solid_mass: SparseMatrix,
    solid_stiffness: SparseMatrix,
    acc: PatternAccumulator,
    system: Option<ConstrainedSystem>,
    state: FsiState,
    energy: EnergyDiagnostics,
}

impl MonolithicFsi {
    pub fn new(
        disc: Arc<Discretization>,
        material: MaterialParams,
        scheme: SchemeConfig,
        data: Arc<dyn FsiData>,
    ) -> Result<Self, FsiError> {
        material.validate()?;
        scheme.validate()?;
        let (nv, nf, ns) = (disc.nv(), disc.n_fluid(), disc.ns());
        let n = nf + ns;
        let mut solid_map: Vec<usize> = (0..ns).map(|d| nf + d).collect();
        for (&s, &f) in disc.idofs.solid_dofs().iter().zip(disc.idofs.fluid_dofs()) {
            solid_map[s] = f;
        }
        let mut constraints = disc.fluid_constraints(&scheme);
        constraints.extend(disc.solid_constraints(&scheme).into_iter().map(|d| solid_map[d]));
        constraints.extend(disc.idofs.solid_dofs().iter().map(|&d| nf + d));
        constraints.sort_unstable();
        constraints.dedup();

        let (s, sm) = (&disc.sspace, &disc.solid_mesh);
        let dt = scheme.dt;
        let mut b = TripletBuilder::new(ns, ns);
        add_mass(&mut b, s, sm, 1.0, (0, 0));
        let solid_mass = b.build();
        let mut b = TripletBuilder::new(ns, ns);
        add_elasticity(&mut b, s, sm, material.mu_s, material.lambda_s, material.gamma, (0, 0));
        let solid_stiffness = b.build();
        let mut b = TripletBuilder::new(n, n);
        {
            let mut r = Renumbered {
                inner: &mut b,
                map: &solid_map,
            };
            add_sparse(&mut r, &solid_mass, material.rho_s / dt);
            add_sparse(&mut r, &solid_stiffness, dt);
        }
        let solid_block = b.build();

        let (v, fm) = (&disc.vspace, &disc.fluid_mesh);
        let mut b = TripletBuilder::new(n, n);
        add_elasticity(&mut b, v, fm, 1.0, 1.0, 1.0, (0, 0));
        add_divergence(&mut b, v, &disc.pspace, fm, 1.0, (0, nv), true);
        add_divergence(&mut b, v, &disc.pspace, fm, 1.0, (nv, 0), false);
        add_sparse(&mut b, &solid_block, 1.0);
        let acc = PatternAccumulator::new(b.build());

        let extension = HarmonicExtension::new(fm, &disc.imap)?;
        let state = FsiState::zeros(&disc);
        let mut out = Self {
            ale: AleState::at(fm, vec![0.0; 2 * fm.n_nodes()])?,
            disc,
            material,
            scheme,
            data,
            extension,
            solid_map,
            constraints,
            solid_block,
            solid_mass,
            solid_stiffness,
            acc,
            system: None,
            state,
            energy: EnergyDiagnostics::default(),
        };
        out.reset_to(FsiState::zeros(&out.disc))?;
        Ok(out)
    }

    fn extend(&self, eta: &[f64], t: f64) -> Result<Vec<f64>, FsiError> {
        let trace = self.disc.interface_vertex_displacement(eta);
        let data = Arc::clone(&self.data);
        let f = move |x: [f64; 2]| data.geometry_force(x, t);
        let fd: Option<&dyn Fn([f64; 2]) -> [f64; 2]> = if self.data.has_geometry_force() { Some(&f) } else { None };
        Ok(self.extension.solve(&self.disc.fluid_mesh, &trace, fd)?)
    }

    fn reset_to(&mut self, state: FsiState) -> Result<(), FsiError> {
        let eta_f = self.extend(&state.eta, state.t)?;
        self.ale = AleState::at(&self.disc.fluid_mesh, eta_f)?;
        self.state = state;
        self.update_energy()
    }

    fn update_energy(&mut self) -> Result<(), FsiError> {
        let mut b = TripletBuilder::new(self.disc.nv(), self.disc.nv());
        add_mass(&mut b, &self.disc.vspace, &self.ale.current, 1.0, (0, 0));
        self.energy = level_energy(
            &self.disc,
            self.material.rho_f,
            self.material.rho_s,
            self.scheme.alpha,
            self.scheme.dt,
            &self.state,
            &b.build(),
            &self.solid_mass,
            &self.solid_stiffness,
        )?;
        self.energy.min_jacobian = self.ale.min_jacobian(&self.disc.fluid_mesh);
        Ok(())
    }

    pub fn ale(&self) -> &AleState {
        &self.ale
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }
}

impl TimeStepper for MonolithicFsi {
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
        let (dt, rho, mu) = (self.scheme.dt, self.material.rho_f, self.material.mu_f);
        let (nv, nf) = (disc.nv(), disc.n_fluid());
        let t_new = self.state.t + dt;
        let (v, p, mesh) = (&disc.vspace, &disc.pspace, &self.ale.current);
        let w = v.embed_p1(&self.ale.w);
        let adv: Vec<f64> = interface_velocity_override(&self.state.v, &w, disc.idofs.fluid_dofs())
            .iter()
            .zip(&w)
            .map(|(a, b)| a - b)
            .collect();

        let mut mb = TripletBuilder::new(nv, nv);
        add_mass(&mut mb, v, mesh, 1.0, (0, 0));
        let mass = mb.build();
        let acc = &mut self.acc;
        acc.reset();
        add_sparse(acc, &mass, rho / dt);
        add_elasticity(acc, v, mesh, mu, 0.0, 0.0, (0, 0));
        match self.scheme.convection {
            ConvectionForm::None => {}
            ConvectionForm::Standard => add_convection(acc, v, mesh, rho, &adv, false, (0, 0)),
            ConvectionForm::Skew => {
                add_convection(acc, v, mesh, rho, &adv, true, (0, 0));
                let div = element_divergence(mesh, &self.ale.w);
                add_weighted_mass(acc, v, mesh, |e| 0.5 * rho * div[e], (0, 0));
                let tags = [BoundaryTag::Inlet, BoundaryTag::Outlet, BoundaryTag::FluidWall];
                add_boundary_advection(acc, v, mesh, &tags, 0.5 * rho, &adv, (0, 0));
            }
        }
        if self.scheme.inlet_outlet == BoundaryVariant::DynamicPressure && self.scheme.convection != ConvectionForm::None
        {
            let tags = [BoundaryTag::Inlet, BoundaryTag::Outlet];
            add_boundary_advection(acc, v, mesh, &tags, -0.5 * rho, &adv, (0, 0));
        }
        add_divergence(acc, v, p, mesh, -1.0, (0, nv), true);
        add_divergence(acc, v, p, mesh, 1.0, (nv, 0), false);
        add_sparse(acc, &self.solid_block, 1.0);
        let matrix = acc.to_matrix();
        let system = match &self.system {
            Some(prev) => ConstrainedSystem::refactor(prev, &matrix, self.constraints.iter().copied())?,
            None => ConstrainedSystem::new(&matrix, self.constraints.iter().copied())?,
        };

        let mut rhs = vec![0.0; matrix.nrows()];
        mass.spmv_add(&self.state.v, rho / dt, &mut rhs[..nv]);
        disc.fluid_loads(self.data.as_ref(), mesh, t_new, &mut rhs[..nf]);
        let mut rs = self.solid_mass.spmv(&self.state.xi);
        rs.iter_mut().for_each(|r| *r *= self.material.rho_s / dt);
        self.solid_stiffness.spmv_add(&self.state.eta, -1.0, &mut rs);
        if let Some(f) = disc.solid_loads(self.data.as_ref(), t_new) {
            rs.iter_mut().zip(&f).for_each(|(r, v)| *r += v);
        }
        for (d, r) in rs.iter().enumerate() {
            rhs[self.solid_map[d]] += r;
        }
        let x = system.solve(&rhs, &Constraints::new())?;
        self.system = Some(system);

        let xi: Vec<f64> = self.solid_map.iter().map(|&g| x[g]).collect();
        let eta: Vec<f64> = self.state.eta.iter().zip(&xi).map(|(e, x)| e + dt * x).collect();
        let eta_f = self.extend(&eta, t_new)?;
        self.ale = self.ale.advance(&disc.fluid_mesh, eta_f, dt)?;
        self.state = FsiState {
            t: t_new,
            step: self.state.step + 1,
            v: x[..nv].to_vec(),
            p: x[nv..nf].to_vec(),
            xi,
            eta,
            traction: self.state.traction.clone(),
        };
        self.update_energy()
    }
}
