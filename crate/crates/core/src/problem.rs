//! Discretization bundle, time-level state, forcing data and energy bookkeeping
//! shared by the partitioned and monolithic solvers.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::config::{BoundaryVariant, ConfigError, ElementChoice, MeshParams, SchemeConfig, SolidTop, WallCondition};
use crate::fem::assembly::{boundary_load, scalar_load, vector_load};
use crate::fem::{Family, FeSpace, InterfaceDofs, NormError, SpaceError, TraceError, TractionTrace};
use crate::linsolve::{SolveError, SparseMatrix};
use crate::mesh::{BoundaryTag, InterfaceMap, Mesh, MeshError};

#[derive(Debug, Error)]
pub enum FsiError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("{0}")]
    Setup(String),
}

/// Volume forcing and section pressures. Everything defaults to zero.
pub trait FsiData: Send + Sync {
    /// Whether the volume sources below are non-zero (skips their assembly otherwise).
    fn has_sources(&self) -> bool {
        false
    }
    fn fluid_force(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// Right side of the continuity equation.
    fn mass_source(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }
    fn solid_force(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    /// Whether the mesh-motion problem has a source.
    fn has_geometry_force(&self) -> bool {
        false
    }
    /// Source in the mesh-motion Laplace problem, at reference coordinates.
    fn geometry_force(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }
    fn inlet_pressure(&self, _t: f64) -> f64 {
        0.0
    }
    fn outlet_pressure(&self, _t: f64) -> f64 {
        0.0
    }
}

/// No forcing at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unforced;

impl FsiData for Unforced {}

/// Flow driven by an inlet pressure history, outlet at zero.
pub struct PressureDriven<F: Fn(f64) -> f64 + Send + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> FsiData for PressureDriven<F> {
    fn inlet_pressure(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

/// Reference meshes, finite-element spaces and interface dof correspondence.
#[derive(Debug)]
pub struct Discretization {
    pub fluid_mesh: Mesh,
    pub solid_mesh: Mesh,
    pub imap: InterfaceMap,
    pub vspace: FeSpace,
    pub pspace: FeSpace,
    pub sspace: FeSpace,
    pub idofs: InterfaceDofs,
    pub element: ElementChoice,
}

impl Discretization {
    pub fn new(mesh: &MeshParams, element: ElementChoice) -> Result<Arc<Self>, FsiError> {
        let (f, s, map) = mesh.generate()?;
        Self::from_meshes(f, s, map, element)
    }

    pub fn from_meshes(
        fluid_mesh: Mesh,
        solid_mesh: Mesh,
        imap: InterfaceMap,
        element: ElementChoice,
    ) -> Result<Arc<Self>, FsiError> {
        fluid_mesh.check_orientation()?;
        solid_mesh.check_orientation()?;
        let vspace = FeSpace::new(&fluid_mesh, element.velocity_family(), 2);
        let pspace = FeSpace::new(&fluid_mesh, Family::P1, 1);
        let sspace = FeSpace::new(&solid_mesh, element.solid_family(), 2);
        let idofs = InterfaceDofs::new(&fluid_mesh, &solid_mesh, &imap, &vspace, &sspace)?;
        Ok(Arc::new(Self {
            fluid_mesh,
            solid_mesh,
            imap,
            vspace,
            pspace,
            sspace,
            idofs,
            element,
        }))
    }

    pub fn nv(&self) -> usize {
        self.vspace.n_dofs()
    }

    pub fn np(&self) -> usize {
        self.pspace.n_dofs()
    }

    /// Size of the fluid saddle-point system.
    pub fn n_fluid(&self) -> usize {
        self.nv() + self.np()
    }

    pub fn ns(&self) -> usize {
        self.sspace.n_dofs()
    }

    fn tagged(&self, space: &FeSpace, mesh: &Mesh, tag: BoundaryTag, comps: &[usize], out: &mut Vec<usize>) {
        for s in space.boundary_scalar_dofs(mesh, tag) {
            out.extend(comps.iter().map(|&c| space.dof(c, s)));
        }
    }

    /// Fluid velocity dofs carrying homogeneous Dirichlet values.
    pub fn fluid_constraints(&self, scheme: &SchemeConfig) -> Vec<usize> {
        let mut out = Vec::new();
        let (v, m) = (&self.vspace, &self.fluid_mesh);
        let io: &[usize] = match scheme.inlet_outlet {
            BoundaryVariant::NeumannPressure => &[],
            BoundaryVariant::DynamicPressure => &[1],
            BoundaryVariant::NoSlip => &[0, 1],
        };
        self.tagged(v, m, BoundaryTag::Inlet, io, &mut out);
        self.tagged(v, m, BoundaryTag::Outlet, io, &mut out);
        let wall: &[usize] = match scheme.wall {
            WallCondition::NoSlip => &[0, 1],
            WallCondition::Neumann => &[],
            WallCondition::Symmetry => &[1],
        };
        self.tagged(v, m, BoundaryTag::FluidWall, wall, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Solid dofs clamped to zero.
    pub fn solid_constraints(&self, scheme: &SchemeConfig) -> Vec<usize> {
        let mut out = Vec::new();
        let (s, m) = (&self.sspace, &self.solid_mesh);
        self.tagged(s, m, BoundaryTag::SolidClamped, &[0, 1], &mut out);
        if scheme.solid_top == SolidTop::Clamped {
            self.tagged(s, m, BoundaryTag::SolidExternal, &[0, 1], &mut out);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Vertex displacement of the solid interface, in interface-map order.
    pub fn interface_vertex_displacement(&self, eta: &[f64]) -> Vec<[f64; 2]> {
        self.imap
            .pairs()
            .iter()
            .map(|&(_, s)| [eta[self.sspace.dof(0, s)], eta[self.sspace.dof(1, s)]])
            .collect()
    }

    /// Fluid momentum/continuity loads at time `t` on `mesh` (a snapshot of the
    /// fluid domain): body force, mass source and section pressures.
    pub fn fluid_loads(&self, data: &dyn FsiData, mesh: &Mesh, t: f64, out: &mut [f64]) {
        let nv = self.nv();
        if data.has_sources() {
            let f = vector_load(&self.vspace, mesh, |x| data.fluid_force(x, t));
            out[..nv].iter_mut().zip(&f).for_each(|(o, v)| *o += v);
            let s = scalar_load(&self.pspace, mesh, self.element.velocity_family(), |x| data.mass_source(x, t));
            out[nv..].iter_mut().zip(&s).for_each(|(o, v)| *o += v);
        }
        for (tag, p) in [
            (BoundaryTag::Inlet, data.inlet_pressure(t)),
            (BoundaryTag::Outlet, data.outlet_pressure(t)),
        ] {
            if p != 0.0 {
                let l = boundary_load(&self.vspace, mesh, tag, |_, n| [-p * n[0], -p * n[1]]);
                out[..nv].iter_mut().zip(&l).for_each(|(o, v)| *o += v);
            }
        }
    }

    pub fn solid_loads(&self, data: &dyn FsiData, t: f64) -> Option<Vec<f64>> {
        data.has_sources()
            .then(|| vector_load(&self.sspace, &self.solid_mesh, |x| data.solid_force(x, t)))
    }
}

/// Fields at one time level. `traction` is the interface functional
/// `phi -> int sigma_F n_F . phi` in the local numbering of [`InterfaceDofs`].
#[derive(Debug, Clone, PartialEq)]
pub struct FsiState {
    pub t: f64,
    pub step: usize,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub traction: TractionTrace,
}

impl FsiState {
    pub fn zeros(disc: &Discretization) -> Self {
        Self {
            t: 0.0,
            step: 0,
            v: vec![0.0; disc.nv()],
            p: vec![0.0; disc.np()],
            xi: vec![0.0; disc.ns()],
            eta: vec![0.0; disc.ns()],
            traction: TractionTrace::zeros(disc.idofs.len()),
        }
    }
}

/// Energy quantities of one time level. `e`: kinetic plus elastic energy,
/// `d`: accumulated viscous dissipation, `n1`: interface terms of the current
/// level, `n2`: accumulated numerical dissipation, `source`: accumulated bound
/// of the section-pressure work.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyDiagnostics {
    pub t: f64,
    pub e: f64,
    pub d: f64,
    pub n1: f64,
    pub n2: f64,
    pub source: f64,
    pub max_interface_displacement: f64,
    pub min_jacobian: f64,
}

impl EnergyDiagnostics {
    /// `E + N1`, the quantity that must not grow without forcing.
    pub fn g(&self) -> f64 {
        self.e + self.n1
    }
}

/// Operators needed to evaluate the energy of a level.
pub struct EnergyOperators<'a> {
    /// Unit-density fluid mass on the current domain.
    pub fluid_mass: &'a SparseMatrix,
    /// Unit-density fluid mass on the previous domain.
    pub fluid_mass_prev: &'a SparseMatrix,
    /// Viscous matrix `2 mu (D u, D v)` on the current domain.
    pub viscous: &'a SparseMatrix,
    pub solid_mass: &'a SparseMatrix,
    pub solid_stiffness: &'a SparseMatrix,
}

/// Energy of a level, without history terms.
pub fn level_energy(
    disc: &Discretization,
    rho_f: f64,
    rho_s: f64,
    alpha: f64,
    dt: f64,
    state: &FsiState,
    fluid_mass: &SparseMatrix,
    solid_mass: &SparseMatrix,
    solid_stiffness: &SparseMatrix,
) -> Result<EnergyDiagnostics, FsiError> {
    let e = 0.5 * rho_f * fluid_mass.bilinear(&state.v, &state.v)
        + 0.5 * rho_s * solid_mass.bilinear(&state.xi, &state.xi)
        + 0.5 * solid_stiffness.bilinear(&state.eta, &state.eta);
    let vg = disc.idofs.restrict_fluid(&state.v);
    let n1 = 0.5 * alpha * dt * disc.idofs.norm_sq(&vg)
        + 0.5 * dt / alpha * disc.idofs.dual_norm_sq(&state.traction.values)?;
    let max_interface_displacement = disc
        .interface_vertex_displacement(&state.eta)
        .iter()
        .map(|d| d[0].hypot(d[1]))
        .fold(0.0, f64::max);
    Ok(EnergyDiagnostics {
        t: state.t,
        e,
        n1,
        max_interface_displacement,
        min_jacobian: 1.0,
        ..Default::default()
    })
}

/// Advance the diagnostics from `prev` (level n) to `next` (level n+1).
#[allow(clippy::too_many_arguments)]
pub fn advance_energy(
    disc: &Discretization,
    rho_f: f64,
    rho_s: f64,
    alpha: f64,
    dt: f64,
    source_constant: f64,
    mu_f: f64,
    section_pressures: (f64, f64),
    prev_diag: &EnergyDiagnostics,
    prev: &FsiState,
    next: &FsiState,
    ops: &EnergyOperators<'_>,
) -> Result<EnergyDiagnostics, FsiError> {
    let mut d = level_energy(
        disc,
        rho_f,
        rho_s,
        alpha,
        dt,
        next,
        ops.fluid_mass,
        ops.solid_mass,
        ops.solid_stiffness,
    )?;
    d.d = prev_diag.d + dt * ops.viscous.bilinear(&next.v, &next.v);
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let dxi = diff(&next.xi, &prev.xi);
    let deta = diff(&next.eta, &prev.eta);
    let dv = diff(&next.v, &prev.v);
    let xg = disc.idofs.restrict_solid(&next.xi);
    let vg = disc.idofs.restrict_fluid(&prev.v);
    let jump = diff(&xg, &vg);
    d.n2 = prev_diag.n2
        + 0.5 * rho_s * ops.solid_mass.bilinear(&dxi, &dxi)
        + 0.5 * ops.solid_stiffness.bilinear(&deta, &deta)
        + 0.5 * rho_f * ops.fluid_mass_prev.bilinear(&dv, &dv)
        + 0.5 * alpha * dt * disc.idofs.norm_sq(&jump);
    let (pin, pout) = section_pressures;
    let section = |tag| disc.fluid_mesh.edges_with_tag(tag).map(|e| disc.fluid_mesh.edge_length(e)).sum::<f64>();
    d.source = prev_diag.source
        + dt * source_constant * source_constant / (2.0 * mu_f)
            * (pin * pin * section(BoundaryTag::Inlet) + pout * pout * section(BoundaryTag::Outlet));
    Ok(d)
}
