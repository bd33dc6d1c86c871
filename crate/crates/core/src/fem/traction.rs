//! Interface dof correspondence, the lagged traction functional and pointwise
//! interface stresses.

use std::collections::HashMap;

use thiserror::Error;

use super::assembly::{add_boundary_mass, Sink};
use super::quadrature::edge_rule;
use super::space::{barycentric, Family, FeSpace};
use crate::linsolve::{Factorization, SolveError, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryEdge, BoundaryTag, InterfaceMap, Mesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("fluid space {fluid:?} and solid space {solid:?} have incompatible interface traces")]
    IncompatibleSpaces { fluid: Family, solid: Family },
    #[error("point ({0}, {1}) is not on the interface")]
    PointNotOnInterface(f64, f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Matching fluid and solid dofs on the interface, in a shared local numbering
/// `c * m + k` (component `c`, interface scalar dof `k`), plus the interface
/// mass matrix on the reference interface in that numbering.
#[derive(Debug)]
pub struct InterfaceDofs {
    fluid_scalar: Vec<usize>,
    solid_scalar: Vec<usize>,
    fluid_dofs: Vec<usize>,
    solid_dofs: Vec<usize>,
    edge_pairs: Vec<(BoundaryEdge, BoundaryEdge)>,
    mass: SparseMatrix,
    mass_lu: Factorization,
}

fn trace_compatible(f: Family, s: Family) -> bool {
    matches!(
        (f, s),
        (Family::P1 | Family::P1Bubble, Family::P1 | Family::P1Bubble) | (Family::P2, Family::P2)
    )
}

impl InterfaceDofs {
    pub fn new(
        fluid_mesh: &Mesh,
        solid_mesh: &Mesh,
        imap: &InterfaceMap,
        vspace: &FeSpace,
        sspace: &FeSpace,
    ) -> Result<Self, TraceError> {
        if !trace_compatible(vspace.family(), sspace.family()) {
            return Err(TraceError::IncompatibleSpaces {
                fluid: vspace.family(),
                solid: sspace.family(),
            });
        }
        let node_map: HashMap<usize, usize> = imap.pairs().iter().copied().collect();
        let mut fluid_scalar = Vec::new();
        let mut solid_scalar = Vec::new();
        for &(f, s) in imap.pairs() {
            fluid_scalar.push(f);
            solid_scalar.push(s);
        }
        let solid_edges: HashMap<(usize, usize), BoundaryEdge> = solid_mesh
            .edges_with_tag(BoundaryTag::Interface)
            .map(|e| ((e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])), *e))
            .collect();
        let mut edge_pairs = Vec::new();
        for fe in fluid_mesh.edges_with_tag(BoundaryTag::Interface) {
            let sa = node_map[&fe.nodes[0]];
            let sb = node_map[&fe.nodes[1]];
            let se = solid_edges[&(sa.min(sb), sa.max(sb))];
            // orient the solid edge like the fluid edge
            let se = BoundaryEdge {
                nodes: [sa, sb],
                ..se
            };
            edge_pairs.push((*fe, se));
            if vspace.family() == Family::P2 {
                fluid_scalar.push(vspace.edge_dof(fe.nodes[0], fe.nodes[1]).unwrap());
                solid_scalar.push(sspace.edge_dof(sa, sb).unwrap());
            }
        }
        let m = fluid_scalar.len();
        let fluid_dofs: Vec<usize> = (0..2)
            .flat_map(|c| fluid_scalar.iter().map(move |&s| (c, s)))
            .map(|(c, s)| vspace.dof(c, s))
            .collect();
        let solid_dofs: Vec<usize> = (0..2)
            .flat_map(|c| solid_scalar.iter().map(move |&s| (c, s)))
            .map(|(c, s)| sspace.dof(c, s))
            .collect();
        let mut local = HashMap::with_capacity(2 * m);
        for (k, &d) in fluid_dofs.iter().enumerate() {
            local.insert(d, k);
        }
        let mut full = TripletBuilder::new(vspace.n_dofs(), vspace.n_dofs());
        add_boundary_mass(&mut full, vspace, fluid_mesh, BoundaryTag::Interface, 1.0, (0, 0));
        let full = full.build();
        let mut b = TripletBuilder::new(2 * m, 2 * m);
        for (k, &d) in fluid_dofs.iter().enumerate() {
            for (j, v) in full.row(d) {
                b.add(k, local[&j], v);
            }
        }
        let mass = b.build();
        let mass_lu = Factorization::new(mass.clone())?;
        Ok(Self {
            fluid_scalar,
            solid_scalar,
            fluid_dofs,
            solid_dofs,
            edge_pairs,
            mass,
            mass_lu,
        })
    }

    /// Number of local interface unknowns (both components).
    pub fn len(&self) -> usize {
        self.fluid_dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluid_dofs.is_empty()
    }

    pub fn fluid_dofs(&self) -> &[usize] {
        &self.fluid_dofs
    }

    pub fn solid_dofs(&self) -> &[usize] {
        &self.solid_dofs
    }

    pub fn fluid_scalar(&self) -> &[usize] {
        &self.fluid_scalar
    }

    pub fn solid_scalar(&self) -> &[usize] {
        &self.solid_scalar
    }

    /// (fluid edge, solid edge) pairs with matching orientation.
    pub fn edge_pairs(&self) -> &[(BoundaryEdge, BoundaryEdge)] {
        &self.edge_pairs
    }

    /// Reference interface mass in local numbering.
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn restrict_fluid(&self, u: &[f64]) -> Vec<f64> {
        self.fluid_dofs.iter().map(|&d| u[d]).collect()
    }

    pub fn restrict_solid(&self, u: &[f64]) -> Vec<f64> {
        self.solid_dofs.iter().map(|&d| u[d]).collect()
    }

    /// `out[offset + dof(k)] += scale * local[k]` on the fluid side.
    pub fn scatter_fluid(&self, local: &[f64], scale: f64, offset: usize, out: &mut [f64]) {
        for (k, &d) in self.fluid_dofs.iter().enumerate() {
            out[offset + d] += scale * local[k];
        }
    }

    pub fn scatter_solid(&self, local: &[f64], scale: f64, offset: usize, out: &mut [f64]) {
        for (k, &d) in self.solid_dofs.iter().enumerate() {
            out[offset + d] += scale * local[k];
        }
    }

    /// `scale * M_Gamma` in fluid numbering, shifted by `off`.
    pub fn add_mass_fluid<S: Sink>(&self, s: &mut S, scale: f64, off: usize) {
        self.add_mass_mapped(s, &self.fluid_dofs, scale, off);
    }

    pub fn add_mass_solid<S: Sink>(&self, s: &mut S, scale: f64, off: usize) {
        self.add_mass_mapped(s, &self.solid_dofs, scale, off);
    }

    fn add_mass_mapped<S: Sink>(&self, s: &mut S, map: &[usize], scale: f64, off: usize) {
        for k in 0..self.mass.nrows() {
            for (j, v) in self.mass.row(k) {
                s.add(off + map[k], off + map[j], scale * v);
            }
        }
    }

    /// `M_Gamma u` for a local vector.
    pub fn mass_apply(&self, u: &[f64]) -> Vec<f64> {
        self.mass.spmv(u)
    }

    /// `|u|^2_{L2(Gamma)}` for a local vector.
    pub fn norm_sq(&self, u: &[f64]) -> f64 {
        self.mass.bilinear(u, u)
    }

    /// `g^T M^{-1} g`: squared L2 norm of the Riesz representative of `g`.
    pub fn dual_norm_sq(&self, g: &[f64]) -> Result<f64, SolveError> {
        let r = self.mass_lu.solve(g)?;
        Ok(crate::linsolve::dot(g, &r))
    }
}

/// The interface traction functional `phi -> int sigma_F n_F . phi` on
/// interface basis functions, in the local numbering of [`InterfaceDofs`].
#[derive(Debug, Clone, PartialEq)]
pub struct TractionTrace {
    pub values: Vec<f64>,
    /// Time level of the fluid state the trace was recovered from.
    pub time: f64,
}

impl TractionTrace {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            time: 0.0,
        }
    }
}

/// Consistent-flux recovery: the residual `(op x - rhs)` of the fluid momentum
/// rows at the fluid interface dofs. `op` must be the unconstrained fluid
/// operator without the Robin term, `rhs` the matching right side without the
/// lagged traction and Robin data.
pub fn variational_traction(op: &SparseMatrix, x: &[f64], rhs: &[f64], idofs: &InterfaceDofs, time: f64) -> TractionTrace {
    let values = idofs
        .fluid_dofs()
        .iter()
        .map(|&d| op.row(d).map(|(j, v)| v * x[j]).sum::<f64>() - rhs[d])
        .collect();
    TractionTrace { values, time }
}

/// `sigma_F n` with `sigma_F = mu (grad v + grad v^T) - p I`.
pub fn fluid_stress_vector(grad_v: [[f64; 2]; 2], p: f64, mu: f64, n: [f64; 2]) -> [f64; 2] {
    let s = [
        [2.0 * mu * grad_v[0][0] - p, mu * (grad_v[0][1] + grad_v[1][0])],
        [mu * (grad_v[0][1] + grad_v[1][0]), 2.0 * mu * grad_v[1][1] - p],
    ];
    [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
}

/// `sigma_S n` with `sigma_S = mu (grad eta + grad eta^T) + lambda div eta I`.
pub fn solid_stress_vector(grad_eta: [[f64; 2]; 2], mu: f64, lambda: f64, n: [f64; 2]) -> [f64; 2] {
    let div = grad_eta[0][0] + grad_eta[1][1];
    let s = [
        [2.0 * mu * grad_eta[0][0] + lambda * div, mu * (grad_eta[0][1] + grad_eta[1][0])],
        [mu * (grad_eta[0][1] + grad_eta[1][0]), 2.0 * mu * grad_eta[1][1] + lambda * div],
    ];
    [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
}

/// Which side of the interface a stress is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Fluid,
    Solid,
}

/// Discrete fields needed to evaluate interface stresses.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceFields<'a> {
    pub fluid_mesh: &'a Mesh,
    pub solid_mesh: &'a Mesh,
    pub vspace: &'a FeSpace,
    pub pspace: &'a FeSpace,
    pub sspace: &'a FeSpace,
    pub v: &'a [f64],
    pub p: &'a [f64],
    pub eta: &'a [f64],
    pub mu_f: f64,
    pub mu_s: f64,
    pub lambda_s: f64,
}

impl InterfaceFields<'_> {
    fn fluid_at(&self, e: usize, lam: [f64; 3], n: [f64; 2]) -> [f64; 2] {
        let g = self.vspace.gradient_in_element(self.fluid_mesh, self.v, e, lam);
        let p = self.pspace.value_in_element(self.p, e, lam)[0];
        fluid_stress_vector(g, p, self.mu_f, n)
    }

    fn solid_at(&self, e: usize, lam: [f64; 3], n: [f64; 2]) -> [f64; 2] {
        let g = self.sspace.gradient_in_element(self.solid_mesh, self.eta, e, lam);
        solid_stress_vector(g, self.mu_s, self.lambda_s, n)
    }

    /// Traction `sigma n_F` at a point of the interface, from element gradients
    /// of the owning triangle on the requested side.
    pub fn pointwise_stress(&self, idofs: &InterfaceDofs, x: [f64; 2], side: Side) -> Result<[f64; 2], TraceError> {
        for (fe, se) in idofs.edge_pairs() {
            let a = self.fluid_mesh.nodes()[fe.nodes[0]];
            let b = self.fluid_mesh.nodes()[fe.nodes[1]];
            let Some(s) = edge_parameter(a, b, x) else { continue };
            let n = self.fluid_mesh.outward_normal(fe);
            return Ok(match side {
                Side::Fluid => {
                    let lam = barycentric(&self.fluid_mesh.triangle_coords(fe.element), x);
                    self.fluid_at(fe.element, lam, n)
                }
                Side::Solid => {
                    let sa = self.solid_mesh.nodes()[se.nodes[0]];
                    let sb = self.solid_mesh.nodes()[se.nodes[1]];
                    let xs = [sa[0] + s * (sb[0] - sa[0]), sa[1] + s * (sb[1] - sa[1])];
                    let lam = barycentric(&self.solid_mesh.triangle_coords(se.element), xs);
                    self.solid_at(se.element, lam, n)
                }
            });
        }
        Err(TraceError::PointNotOnInterface(x[0], x[1]))
    }

    /// `(|sigma_F n - sigma_S n|_Gamma, |sigma_F n|_Gamma)` by edge quadrature.
    pub fn stress_mismatch(&self, idofs: &InterfaceDofs) -> (f64, f64) {
        let rule = edge_rule();
        let (mut diff, mut norm) = (0.0, 0.0);
        for (fe, se) in idofs.edge_pairs() {
            let fa = self.fluid_mesh.nodes()[fe.nodes[0]];
            let fb = self.fluid_mesh.nodes()[fe.nodes[1]];
            let sa = self.solid_mesh.nodes()[se.nodes[0]];
            let sb = self.solid_mesh.nodes()[se.nodes[1]];
            let len = self.fluid_mesh.edge_length(fe);
            let n = self.fluid_mesh.outward_normal(fe);
            let ftri = self.fluid_mesh.triangle_coords(fe.element);
            let stri = self.solid_mesh.triangle_coords(se.element);
            for (t, w) in rule.points.iter().zip(&rule.weights) {
                let xf = [fa[0] + t * (fb[0] - fa[0]), fa[1] + t * (fb[1] - fa[1])];
                let xs = [sa[0] + t * (sb[0] - sa[0]), sa[1] + t * (sb[1] - sa[1])];
                let tf = self.fluid_at(fe.element, barycentric(&ftri, xf), n);
                let ts = self.solid_at(se.element, barycentric(&stri, xs), n);
                diff += w * len * ((tf[0] - ts[0]).powi(2) + (tf[1] - ts[1]).powi(2));
                norm += w * len * (tf[0] * tf[0] + tf[1] * tf[1]);
            }
        }
        (diff.sqrt(), norm.sqrt())
    }
}

fn edge_parameter(a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> Option<f64> {
    let t = [b[0] - a[0], b[1] - a[1]];
    let l2 = t[0] * t[0] + t[1] * t[1];
    let s = ((x[0] - a[0]) * t[0] + (x[1] - a[1]) * t[1]) / l2;
    let off = ((x[0] - a[0]) * t[1] - (x[1] - a[1]) * t[0]).abs() / l2.sqrt();
    let tol = 1e-10 * l2.sqrt();
    (off <= tol && (-1e-10..=1.0 + 1e-10).contains(&s)).then_some(s.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::{add_divergence, assemble_fluid_viscous, boundary_load};
    use crate::mesh::generate_channel_meshes;

    fn setup(fam_f: Family, fam_s: Family) -> (Mesh, Mesh, FeSpace, FeSpace, FeSpace, InterfaceDofs) {
        let (f, s, map) = generate_channel_meshes(1.0, 0.5, 0.5, 4, 3, 2).unwrap();
        let v = FeSpace::new(&f, fam_f, 2);
        let p = FeSpace::new(&f, Family::P1, 1);
        let ss = FeSpace::new(&s, fam_s, 2);
        let id = InterfaceDofs::new(&f, &s, &map, &v, &ss).unwrap();
        (f, s, v, p, ss, id)
    }

    #[test]
    fn interface_dof_counts_and_mass() {
        let (_, _, _, _, _, id) = setup(Family::P1Bubble, Family::P1);
        assert_eq!(id.len(), 10);
        let total: f64 = id.mass().values().iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let (_, _, _, _, _, id2) = setup(Family::P2, Family::P2);
        assert_eq!(id2.len(), 18);
        assert!(setup_err());
    }

    fn setup_err() -> bool {
        let (f, s, map) = generate_channel_meshes(1.0, 0.5, 0.5, 2, 1, 1).unwrap();
        let v = FeSpace::new(&f, Family::P2, 2);
        let ss = FeSpace::new(&s, Family::P1, 2);
        matches!(
            InterfaceDofs::new(&f, &s, &map, &v, &ss),
            Err(TraceError::IncompatibleSpaces { .. })
        )
    }

    #[test]
    fn dual_norm_of_mass_image() {
        let (_, _, _, _, _, id) = setup(Family::P2, Family::P2);
        let u: Vec<f64> = (0..id.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let g = id.mass_apply(&u);
        assert!((id.dual_norm_sq(&g).unwrap() - id.norm_sq(&u)).abs() < 1e-13);
    }

    #[test]
    fn constant_pressure_trace() {
        // v = 0, p = c: op x - rhs reduces to -B^T p at interface rows, which must
        // equal int -c n . phi on the interface.
        for fam in [Family::P1Bubble, Family::P2] {
            let (f, _, v, p, _, id) = setup(fam, if fam == Family::P2 { Family::P2 } else { Family::P1 });
            let nv = v.n_dofs();
            let n = nv + p.n_dofs();
            let mut b = TripletBuilder::new(n, n);
            b.add_matrix(&assemble_fluid_viscous(&v, 1.0, &f), 0, 0, 1.0);
            add_divergence(&mut b, &v, &p, &f, -1.0, (0, nv), true);
            add_divergence(&mut b, &v, &p, &f, 1.0, (nv, 0), false);
            let op = b.build();
            let c = 2.5;
            let mut x = vec![0.0; n];
            x[nv..].iter_mut().for_each(|v| *v = c);
            let rhs = vec![0.0; n];
            let tr = variational_traction(&op, &x, &rhs, &id, 0.0);
            // corner nodes also see the inlet and outlet edges
            let mut oracle = vec![0.0; nv];
            for tag in [BoundaryTag::Interface, BoundaryTag::Inlet, BoundaryTag::Outlet, BoundaryTag::FluidWall] {
                let l = boundary_load(&v, &f, tag, |_, nn| [-c * nn[0], -c * nn[1]]);
                oracle.iter_mut().zip(&l).for_each(|(o, x)| *o += x);
            }
            let expect = id.restrict_fluid(&oracle);
            for (a, b) in tr.values.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "{fam:?}: {a} vs {b}");
            }
            let zero = variational_traction(&op, &vec![0.0; n], &rhs, &id, 0.0);
            assert!(zero.values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn pointwise_stresses() {
        let (f, s, v, p, ss, id) = setup(Family::P2, Family::P2);
        let eta = ss.interpolate(&s, |x, c| if c == 0 { x[0] } else { 0.0 });
        let vel = vec![0.0; v.n_dofs()];
        let pr = p.interpolate(&f, |_, _| 3.0);
        let fields = InterfaceFields {
            fluid_mesh: &f,
            solid_mesh: &s,
            vspace: &v,
            pspace: &p,
            sspace: &ss,
            v: &vel,
            p: &pr,
            eta: &eta,
            mu_f: 1.0,
            mu_s: 1.0,
            lambda_s: 1.0,
        };
        let ts = fields.pointwise_stress(&id, [0.3, 0.5], Side::Solid).unwrap();
        assert!((ts[0]).abs() < 1e-13 && (ts[1] - 1.0).abs() < 1e-13);
        let tf = fields.pointwise_stress(&id, [0.3, 0.5], Side::Fluid).unwrap();
        assert!((tf[0]).abs() < 1e-13 && (tf[1] + 3.0).abs() < 1e-13);
        assert!(matches!(
            fields.pointwise_stress(&id, [0.3, 0.2], Side::Fluid),
            Err(TraceError::PointNotOnInterface(..))
        ));
        let rigid = ss.interpolate(&s, |x, c| if c == 0 { -x[1] } else { x[0] });
        let f2 = InterfaceFields { eta: &rigid, lambda_s: 0.0, ..fields };
        let t = f2.pointwise_stress(&id, [0.6, 0.5], Side::Solid).unwrap();
        assert!(t[0].abs() < 1e-13 && t[1].abs() < 1e-13);
    }
}
