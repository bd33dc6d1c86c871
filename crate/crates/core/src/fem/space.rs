//! Lagrange spaces on triangles: P1, P1 + cubic bubble (MINI velocity) and P2.
//!
//! Dofs are blocked by component: dof `c * n_scalar + s` is component `c` of
//! scalar dof `s`. Scalar dofs number the mesh vertices first, then one bubble
//! per element (P1-bubble) or one midpoint per edge (P2). The bubble is
//! hierarchical, so a P1-bubble function with zero bubble coefficients is a
//! plain P1 function.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::quadrature::{triangle_rule, TriangleRule};
use crate::mesh::{BoundaryEdge, BoundaryTag, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    P1,
    P1Bubble,
    P2,
}

impl Family {
    /// Scalar dofs per element.
    pub fn n_local(self) -> usize {
        match self {
            Family::P1 => 3,
            Family::P1Bubble => 4,
            Family::P2 => 6,
        }
    }

    /// Polynomial degree of the highest basis function.
    pub fn degree(self) -> usize {
        match self {
            Family::P1 => 1,
            Family::P1Bubble => 3,
            Family::P2 => 2,
        }
    }

    /// The committed volume quadrature degree for forms built on this family.
    pub fn quadrature_degree(self) -> usize {
        match self {
            Family::P1 => 4,
            Family::P2 => 5,
            Family::P1Bubble => 6,
        }
    }

    /// Scalar dofs on a boundary edge (vertices, plus the midpoint for P2).
    pub fn n_edge_local(self) -> usize {
        match self {
            Family::P2 => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("coefficient vector has {got} entries, space has {expected} dofs")]
    LengthMismatch { got: usize, expected: usize },
    #[error("point ({0}, {1}) lies outside the mesh")]
    PointOutside(f64, f64),
}

/// Local edge `k` of a triangle joins local vertices `EDGE_VERTS[k]`.
pub const EDGE_VERTS: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Values and barycentric derivatives of the local scalar basis at `lam`.
pub fn basis_at(family: Family, lam: [f64; 3], vals: &mut [f64], dlam: &mut [[f64; 3]]) {
    match family {
        Family::P1 | Family::P1Bubble => {
            for i in 0..3 {
                vals[i] = lam[i];
                dlam[i] = [0.0; 3];
                dlam[i][i] = 1.0;
            }
            if family == Family::P1Bubble {
                let [a, b, c] = lam;
                vals[3] = 27.0 * a * b * c;
                dlam[3] = [27.0 * b * c, 27.0 * a * c, 27.0 * a * b];
            }
        }
        Family::P2 => {
            for i in 0..3 {
                vals[i] = lam[i] * (2.0 * lam[i] - 1.0);
                dlam[i] = [0.0; 3];
                dlam[i][i] = 4.0 * lam[i] - 1.0;
            }
            for (k, [i, j]) in EDGE_VERTS.iter().copied().enumerate() {
                vals[3 + k] = 4.0 * lam[i] * lam[j];
                dlam[3 + k] = [0.0; 3];
                dlam[3 + k][i] = 4.0 * lam[j];
                dlam[3 + k][j] = 4.0 * lam[i];
            }
        }
    }
}

/// Scalar basis along a boundary edge at parameter `s` in `[0,1]`, ordered
/// (start vertex, end vertex[, midpoint]).
pub fn edge_basis_at(family: Family, s: f64) -> [f64; 3] {
    match family {
        Family::P2 => [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)],
        _ => [1.0 - s, s, 0.0],
    }
}

/// Area and barycentric gradients of a triangle.
pub fn triangle_geometry(p: &[[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let g = [
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ];
    (0.5 * det, g)
}

/// Barycentric coordinates of `x` in triangle `p`.
pub fn barycentric(p: &[[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let (_, g) = triangle_geometry(p);
    let l1 = g[1][0] * (x[0] - p[0][0]) + g[1][1] * (x[1] - p[0][1]);
    let l2 = g[2][0] * (x[0] - p[0][0]) + g[2][1] * (x[1] - p[0][1]);
    [1.0 - l1 - l2, l1, l2]
}

/// Dof layout of a Lagrange space over a fixed mesh topology. Geometry is not
/// stored: every operation takes the mesh snapshot to integrate on.
#[derive(Debug, Clone)]
pub struct FeSpace {
    family: Family,
    components: usize,
    n_nodes: usize,
    n_scalar: usize,
    elem_dofs: Vec<[usize; 6]>,
    edges: HashMap<(usize, usize), usize>,
}

impl FeSpace {
    pub fn new(mesh: &Mesh, family: Family, components: usize) -> Self {
        assert!(components == 1 || components == 2, "components must be 1 or 2");
        let n_nodes = mesh.n_nodes();
        let mut edges = HashMap::new();
        let mut elem_dofs = Vec::with_capacity(mesh.n_triangles());
        for (e, t) in mesh.triangles().iter().enumerate() {
            let mut d = [usize::MAX; 6];
            d[..3].copy_from_slice(t);
            match family {
                Family::P1 => {}
                Family::P1Bubble => d[3] = n_nodes + e,
                Family::P2 => {
                    for (k, [i, j]) in EDGE_VERTS.iter().copied().enumerate() {
                        let key = edge_key(t[i], t[j]);
                        let next = edges.len();
                        let id = *edges.entry(key).or_insert(next);
                        d[3 + k] = n_nodes + id;
                    }
                }
            }
            elem_dofs.push(d);
        }
        let n_scalar = match family {
            Family::P1 => n_nodes,
            Family::P1Bubble => n_nodes + mesh.n_triangles(),
            Family::P2 => n_nodes + edges.len(),
        };
        Self {
            family,
            components,
            n_nodes,
            n_scalar,
            elem_dofs,
            edges,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_scalar(&self) -> usize {
        self.n_scalar
    }

    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.components
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_local(&self) -> usize {
        self.family.n_local()
    }

    pub fn n_elements(&self) -> usize {
        self.elem_dofs.len()
    }

    /// Scalar dofs of element `e`.
    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.elem_dofs[e][..self.family.n_local()]
    }

    #[inline]
    pub fn dof(&self, comp: usize, scalar: usize) -> usize {
        comp * self.n_scalar + scalar
    }

    /// Scalar dof of the P2 midpoint on edge `(a, b)`.
    pub fn edge_dof(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.get(&edge_key(a, b)).map(|id| self.n_nodes + id)
    }

    /// Scalar dofs along a boundary edge, ordered as in [`edge_basis_at`].
    pub fn edge_trace_dofs(&self, edge: &BoundaryEdge) -> Vec<usize> {
        let [a, b] = edge.nodes;
        match self.family {
            Family::P2 => vec![a, b, self.edge_dof(a, b).expect("edge missing from P2 space")],
            _ => vec![a, b],
        }
    }

    /// Scalar dofs on all edges with the given tag, sorted and unique.
    pub fn boundary_scalar_dofs(&self, mesh: &Mesh, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = mesh
            .edges_with_tag(tag)
            .flat_map(|e| self.edge_trace_dofs(e))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Coordinates of every scalar dof (bubble dofs sit at centroids).
    pub fn scalar_dof_coords(&self, mesh: &Mesh) -> Vec<[f64; 2]> {
        let mut x = vec![[0.0; 2]; self.n_scalar];
        x[..self.n_nodes].copy_from_slice(mesh.nodes());
        for (e, t) in mesh.triangles().iter().enumerate() {
            let p = mesh.triangle_coords(e);
            let d = &self.elem_dofs[e];
            match self.family {
                Family::P1 => {}
                Family::P1Bubble => {
                    x[d[3]] = [
                        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                    ];
                }
                Family::P2 => {
                    for (k, [i, j]) in EDGE_VERTS.iter().copied().enumerate() {
                        let _ = t;
                        x[d[3 + k]] = [0.5 * (p[i][0] + p[j][0]), 0.5 * (p[i][1] + p[j][1])];
                    }
                }
            }
        }
        x
    }

    /// Nodal interpolant of `f(x, component)`. For the bubble space the bubble
    /// coefficient corrects the centroid value.
    pub fn interpolate(&self, mesh: &Mesh, f: impl Fn([f64; 2], usize) -> f64) -> Vec<f64> {
        let xs = self.scalar_dof_coords(mesh);
        let mut u = vec![0.0; self.n_dofs()];
        for c in 0..self.components {
            for (s, x) in xs.iter().enumerate() {
                u[self.dof(c, s)] = f(*x, c);
            }
            if self.family == Family::P1Bubble {
                for e in 0..self.n_elements() {
                    let d = &self.elem_dofs[e];
                    let lin = (u[self.dof(c, d[0])] + u[self.dof(c, d[1])] + u[self.dof(c, d[2])]) / 3.0;
                    u[self.dof(c, d[3])] -= lin;
                }
            }
        }
        u
    }

    /// Embed a P1 nodal field (`n_nodes` entries per component) into this space.
    pub fn embed_p1(&self, nodal: &[f64]) -> Vec<f64> {
        assert_eq!(nodal.len(), self.n_nodes * self.components);
        let mut u = vec![0.0; self.n_dofs()];
        for c in 0..self.components {
            for s in 0..self.n_nodes {
                u[self.dof(c, s)] = nodal[c * self.n_nodes + s];
            }
            if self.family == Family::P2 {
                for (&(a, b), &id) in &self.edges {
                    u[self.dof(c, self.n_nodes + id)] =
                        0.5 * (nodal[c * self.n_nodes + a] + nodal[c * self.n_nodes + b]);
                }
            }
        }
        u
    }

    /// Value of component `c` of `u` at barycentric point `lam` of element `e`.
    pub fn value_in_element(&self, u: &[f64], e: usize, lam: [f64; 3]) -> [f64; 2] {
        let n = self.n_local();
        let mut vals = [0.0; 6];
        let mut dl = [[0.0; 3]; 6];
        basis_at(self.family, lam, &mut vals, &mut dl);
        let d = self.element_dofs(e);
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate().take(self.components) {
            *o = (0..n).map(|i| vals[i] * u[self.dof(c, d[i])]).sum();
        }
        out
    }

    /// Gradient `g[c][k] = d u_c / d x_k` at barycentric point `lam` of element `e`.
    pub fn gradient_in_element(&self, mesh: &Mesh, u: &[f64], e: usize, lam: [f64; 3]) -> [[f64; 2]; 2] {
        let (_, glam) = triangle_geometry(&mesh.triangle_coords(e));
        let n = self.n_local();
        let mut vals = [0.0; 6];
        let mut dl = [[0.0; 3]; 6];
        basis_at(self.family, lam, &mut vals, &mut dl);
        let d = self.element_dofs(e);
        let mut g = [[0.0; 2]; 2];
        for i in 0..n {
            let gi = grad_from_dlam(&dl[i], &glam);
            for (c, gc) in g.iter_mut().enumerate().take(self.components) {
                let ui = u[self.dof(c, d[i])];
                gc[0] += ui * gi[0];
                gc[1] += ui * gi[1];
            }
        }
        g
    }

    /// Evaluate `u` at a physical point by element search.
    pub fn evaluate(&self, mesh: &Mesh, u: &[f64], x: [f64; 2]) -> Result<[f64; 2], SpaceError> {
        self.check_len(u)?;
        let (e, lam) = locate(mesh, x).ok_or(SpaceError::PointOutside(x[0], x[1]))?;
        Ok(self.value_in_element(u, e, lam))
    }

    pub fn check_len(&self, u: &[f64]) -> Result<(), SpaceError> {
        if u.len() != self.n_dofs() {
            return Err(SpaceError::LengthMismatch {
                got: u.len(),
                expected: self.n_dofs(),
            });
        }
        Ok(())
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[inline]
pub fn grad_from_dlam(dl: &[f64; 3], glam: &[[f64; 2]; 3]) -> [f64; 2] {
    [
        dl[0] * glam[0][0] + dl[1] * glam[1][0] + dl[2] * glam[2][0],
        dl[0] * glam[0][1] + dl[1] * glam[1][1] + dl[2] * glam[2][1],
    ]
}

/// Element containing `x` and the barycentric coordinates there.
pub fn locate(mesh: &Mesh, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
    let tol = 1e-10;
    let mut best: Option<(usize, [f64; 3], f64)> = None;
    for e in 0..mesh.n_triangles() {
        let lam = barycentric(&mesh.triangle_coords(e), x);
        let m = lam[0].min(lam[1]).min(lam[2]);
        if m >= -tol {
            return Some((e, lam));
        }
        if best.as_ref().is_none_or(|b| m > b.2) {
            best = Some((e, lam, m));
        }
    }
    best.filter(|b| b.2 >= -1e-8).map(|b| (b.0, b.1))
}

/// A coefficient vector tied to its space.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self, SpaceError> {
        space.check_len(&coeffs)?;
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn interpolate(space: Arc<FeSpace>, mesh: &Mesh, f: impl Fn([f64; 2], usize) -> f64) -> Self {
        let coeffs = space.interpolate(mesh, f);
        Self { space, coeffs }
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn evaluate(&self, mesh: &Mesh, x: [f64; 2]) -> Result<[f64; 2], SpaceError> {
        self.space.evaluate(mesh, &self.coeffs, x)
    }
}

/// Basis values and barycentric derivatives tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct RefTable {
    pub family: Family,
    pub n_local: usize,
    pub rule: TriangleRule,
    vals: Vec<f64>,
    dlam: Vec<[f64; 3]>,
}

impl RefTable {
    pub fn new(family: Family, rule: TriangleRule) -> Self {
        let n = family.n_local();
        let mut vals = vec![0.0; rule.len() * n];
        let mut dlam = vec![[0.0; 3]; rule.len() * n];
        for q in 0..rule.len() {
            basis_at(
                family,
                rule.barycentric(q),
                &mut vals[q * n..(q + 1) * n],
                &mut dlam[q * n..(q + 1) * n],
            );
        }
        Self {
            family,
            n_local: n,
            rule,
            vals,
            dlam,
        }
    }

    pub fn for_family(family: Family) -> Self {
        Self::new(family, triangle_rule(family.quadrature_degree()))
    }

    pub fn nq(&self) -> usize {
        self.rule.len()
    }

    #[inline]
    pub fn val(&self, q: usize, i: usize) -> f64 {
        self.vals[q * self.n_local + i]
    }
}

/// Per-element evaluation buffers: quadrature weights times Jacobian, physical
/// points and basis gradients.
#[derive(Debug, Clone)]
pub struct ElementEval<'a> {
    pub table: &'a RefTable,
    pub area: f64,
    pub glam: [[f64; 2]; 3],
    pub jw: Vec<f64>,
    pub x: Vec<[f64; 2]>,
    grads: Vec<[f64; 2]>,
}

impl<'a> ElementEval<'a> {
    pub fn new(table: &'a RefTable) -> Self {
        let nq = table.nq();
        Self {
            table,
            area: 0.0,
            glam: [[0.0; 2]; 3],
            jw: vec![0.0; nq],
            x: vec![[0.0; 2]; nq],
            grads: vec![[0.0; 2]; nq * table.n_local],
        }
    }

    pub fn reinit(&mut self, p: &[[f64; 2]; 3]) {
        let (area, glam) = triangle_geometry(p);
        self.area = area;
        self.glam = glam;
        let n = self.table.n_local;
        for q in 0..self.table.nq() {
            self.jw[q] = self.table.rule.weights[q] * 2.0 * area;
            let l = self.table.rule.barycentric(q);
            self.x[q] = [
                l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
            ];
            for i in 0..n {
                self.grads[q * n + i] = grad_from_dlam(&self.table.dlam[q * n + i], &glam);
            }
        }
    }

    #[inline]
    pub fn nq(&self) -> usize {
        self.table.nq()
    }

    #[inline]
    pub fn val(&self, q: usize, i: usize) -> f64 {
        self.table.val(q, i)
    }

    #[inline]
    pub fn grad(&self, q: usize, i: usize) -> [f64; 2] {
        self.grads[q * self.table.n_local + i]
    }
}
