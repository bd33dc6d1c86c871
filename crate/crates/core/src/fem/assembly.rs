//! Matrix and load assembly for the bilinear and boundary forms of the scheme.
//!
//! The `add_*` functions accumulate `scale * form` into any [`Sink`] at a block
//! offset, so saddle-point systems are built in one pass. The `assemble_*`
//! wrappers return standalone matrices.

use super::quadrature::{edge_rule, LineRule};
use super::space::{edge_basis_at, ElementEval, Family, FeSpace, RefTable};
use crate::linsolve::{SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryEdge, BoundaryTag, Mesh};

/// Anything that accepts `(row, col, value)` contributions.
pub trait Sink {
    fn add(&mut self, i: usize, j: usize, v: f64);
}

impl Sink for TripletBuilder {
    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        TripletBuilder::add(self, i, j, v);
    }
}

/// Accumulates into a matrix with a fixed sparsity pattern, skipping the sort
/// that a triplet build needs. Used for matrices reassembled every time step.
#[derive(Debug, Clone)]
pub struct PatternAccumulator {
    matrix: SparseMatrix,
    values: Vec<f64>,
}

impl PatternAccumulator {
    pub fn new(pattern: SparseMatrix) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self {
            matrix: pattern,
            values,
        }
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// The accumulated matrix. Explicit zeros of the pattern are kept so the
    /// structure stays fixed across steps.
    pub fn to_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_csr_parts(
            self.matrix.nrows(),
            self.matrix.ncols(),
            self.matrix.row_ptr().to_vec(),
            self.matrix.col_idx().to_vec(),
            self.values.clone(),
        )
    }
}

impl Sink for PatternAccumulator {
    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let rp = self.matrix.row_ptr();
        let cols = &self.matrix.col_idx()[rp[i]..rp[i + 1]];
        let k = cols
            .binary_search(&j)
            .unwrap_or_else(|_| panic!("entry ({i},{j}) outside the fixed pattern"));
        self.values[rp[i] + k] += v;
    }
}

/// `scale * m` into a sink, entry by entry.
pub fn add_sparse<S: Sink>(s: &mut S, m: &SparseMatrix, scale: f64) {
    for i in 0..m.nrows() {
        for (j, v) in m.row(i) {
            s.add(i, j, scale * v);
        }
    }
}

/// Sink adapter that renumbers rows and columns through `map`.
pub struct Renumbered<'a, S: Sink> {
    pub inner: &'a mut S,
    pub map: &'a [usize],
}

impl<S: Sink> Sink for Renumbered<'_, S> {
    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.inner.add(self.map[i], self.map[j], v);
    }
}

fn each_element<'t>(table: &'t RefTable, mesh: &Mesh, mut f: impl FnMut(usize, &ElementEval<'t>)) {
    let mut ev = ElementEval::new(table);
    for e in 0..mesh.n_triangles() {
        ev.reinit(&mesh.triangle_coords(e));
        f(e, &ev);
    }
}

fn check(space: &FeSpace, mesh: &Mesh) {
    assert_eq!(space.n_elements(), mesh.n_triangles(), "space/mesh mismatch");
}

/// `density * (u, v)` for every component.
pub fn add_mass<S: Sink>(s: &mut S, space: &FeSpace, mesh: &Mesh, density: f64, off: (usize, usize)) {
    add_weighted_mass(s, space, mesh, |_| density, off);
}

/// `(w_e u, v)` with a coefficient constant on each element.
pub fn add_weighted_mass<S: Sink>(
    s: &mut S,
    space: &FeSpace,
    mesh: &Mesh,
    weight: impl Fn(usize) -> f64,
    off: (usize, usize),
) {
    check(space, mesh);
    let table = RefTable::for_family(space.family());
    let n = table.n_local;
    let mut loc = vec![0.0; n * n];
    each_element(&table, mesh, |e, ev| {
        let w = weight(e);
        loc.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..ev.nq() {
            let jw = ev.jw[q] * w;
            for a in 0..n {
                let va = jw * ev.val(q, a);
                for b in 0..n {
                    loc[a * n + b] += va * ev.val(q, b);
                }
            }
        }
        let d = space.element_dofs(e);
        for c in 0..space.components() {
            for a in 0..n {
                for b in 0..n {
                    s.add(off.0 + space.dof(c, d[a]), off.1 + space.dof(c, d[b]), loc[a * n + b]);
                }
            }
        }
    });
}

/// `2 mu (D u, D v) + lambda (div u, div v) + gamma (u, v)` on a 2-vector space.
pub fn add_elasticity<S: Sink>(
    s: &mut S,
    space: &FeSpace,
    mesh: &Mesh,
    mu: f64,
    lambda: f64,
    gamma: f64,
    off: (usize, usize),
) {
    check(space, mesh);
    assert_eq!(space.components(), 2);
    let table = RefTable::for_family(space.family());
    let n = table.n_local;
    // g[k][l][a*n+b] = int d_k psi_a d_l psi_b ; m = int psi_a psi_b
    let mut g = vec![vec![vec![0.0; n * n]; 2]; 2];
    let mut m = vec![0.0; n * n];
    each_element(&table, mesh, |e, ev| {
        for gk in g.iter_mut() {
            for gkl in gk.iter_mut() {
                gkl.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        m.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..ev.nq() {
            let jw = ev.jw[q];
            for a in 0..n {
                let ga = ev.grad(q, a);
                let va = ev.val(q, a);
                for b in 0..n {
                    let gb = ev.grad(q, b);
                    for k in 0..2 {
                        for l in 0..2 {
                            g[k][l][a * n + b] += jw * ga[k] * gb[l];
                        }
                    }
                    m[a * n + b] += jw * va * ev.val(q, b);
                }
            }
        }
        let d = space.element_dofs(e);
        for c in 0..2 {
            for dd in 0..2 {
                for a in 0..n {
                    for b in 0..n {
                        let ab = a * n + b;
                        let mut v = mu * g[dd][c][ab] + lambda * g[c][dd][ab];
                        if c == dd {
                            v += mu * (g[0][0][ab] + g[1][1][ab]) + gamma * m[ab];
                        }
                        s.add(off.0 + space.dof(c, d[a]), off.1 + space.dof(dd, d[b]), v);
                    }
                }
            }
        }
    });
}

/// `scale * (psi, div v)` with pressure rows and velocity columns; when
/// `transpose` is set the block is written as velocity rows, pressure columns.
pub fn add_divergence<S: Sink>(
    s: &mut S,
    vspace: &FeSpace,
    pspace: &FeSpace,
    mesh: &Mesh,
    scale: f64,
    off: (usize, usize),
    transpose: bool,
) {
    check(vspace, mesh);
    assert_eq!(pspace.components(), 1);
    let rule = RefTable::for_family(vspace.family()).rule;
    let vt = RefTable::new(vspace.family(), rule.clone());
    let pt = RefTable::new(pspace.family(), rule);
    let nv = vt.n_local;
    let np = pt.n_local;
    let mut loc = vec![[0.0; 2]; np * nv];
    each_element(&vt, mesh, |e, ev| {
        loc.iter_mut().for_each(|v| *v = [0.0; 2]);
        for q in 0..ev.nq() {
            let jw = ev.jw[q] * scale;
            for k in 0..np {
                let pk = jw * pt.val(q, k);
                for j in 0..nv {
                    let gj = ev.grad(q, j);
                    loc[k * nv + j][0] += pk * gj[0];
                    loc[k * nv + j][1] += pk * gj[1];
                }
            }
        }
        let dv = vspace.element_dofs(e);
        let dp = pspace.element_dofs(e);
        for k in 0..np {
            for j in 0..nv {
                for c in 0..2 {
                    let (r, col) = (dp[k], vspace.dof(c, dv[j]));
                    let v = loc[k * nv + j][c];
                    if transpose {
                        s.add(off.0 + col, off.1 + r, v);
                    } else {
                        s.add(off.0 + r, off.1 + col, v);
                    }
                }
            }
        }
    });
}

/// Convection `rho ((a . grad) u, v)` with `a` given as coefficients on `space`.
/// With `skew` the form is `rho/2 [((a.grad) u, v) - ((a.grad) v, u)]`.
pub fn add_convection<S: Sink>(
    s: &mut S,
    space: &FeSpace,
    mesh: &Mesh,
    rho: f64,
    adv: &[f64],
    skew: bool,
    off: (usize, usize),
) {
    check(space, mesh);
    assert_eq!(adv.len(), space.n_dofs());
    let table = RefTable::for_family(space.family());
    let n = table.n_local;
    let mut loc = vec![0.0; n * n];
    let mut agrad = vec![0.0; n];
    each_element(&table, mesh, |e, ev| {
        let d = space.element_dofs(e);
        loc.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..ev.nq() {
            let mut a = [0.0; 2];
            for i in 0..n {
                let vi = ev.val(q, i);
                a[0] += vi * adv[space.dof(0, d[i])];
                a[1] += vi * adv[space.dof(1, d[i])];
            }
            for (i, ag) in agrad.iter_mut().enumerate() {
                let g = ev.grad(q, i);
                *ag = a[0] * g[0] + a[1] * g[1];
            }
            let jw = ev.jw[q] * rho;
            for i in 0..n {
                let vi = ev.val(q, i);
                for j in 0..n {
                    loc[i * n + j] += if skew {
                        0.5 * jw * (agrad[j] * vi - agrad[i] * ev.val(q, j))
                    } else {
                        jw * agrad[j] * vi
                    };
                }
            }
        }
        for c in 0..space.components() {
            for i in 0..n {
                for j in 0..n {
                    s.add(off.0 + space.dof(c, d[i]), off.1 + space.dof(c, d[j]), loc[i * n + j]);
                }
            }
        }
    });
}

/// `scale * (grad u, grad v)` on a scalar or vector space.
pub fn add_laplace<S: Sink>(s: &mut S, space: &FeSpace, mesh: &Mesh, scale: f64, off: (usize, usize)) {
    check(space, mesh);
    let table = RefTable::for_family(space.family());
    let n = table.n_local;
    let mut loc = vec![0.0; n * n];
    each_element(&table, mesh, |e, ev| {
        loc.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..ev.nq() {
            let jw = ev.jw[q] * scale;
            for a in 0..n {
                let ga = ev.grad(q, a);
                for b in 0..n {
                    let gb = ev.grad(q, b);
                    loc[a * n + b] += jw * (ga[0] * gb[0] + ga[1] * gb[1]);
                }
            }
        }
        let d = space.element_dofs(e);
        for c in 0..space.components() {
            for a in 0..n {
                for b in 0..n {
                    s.add(off.0 + space.dof(c, d[a]), off.1 + space.dof(c, d[b]), loc[a * n + b]);
                }
            }
        }
    });
}

/// Quadrature data along one boundary edge.
struct EdgeQuad {
    length: f64,
    normal: [f64; 2],
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    basis: Vec<[f64; 3]>,
}

fn edge_quad(rule: &LineRule, family: Family, mesh: &Mesh, e: &BoundaryEdge) -> EdgeQuad {
    let a = mesh.nodes()[e.nodes[0]];
    let b = mesh.nodes()[e.nodes[1]];
    let length = mesh.edge_length(e);
    EdgeQuad {
        length,
        normal: mesh.outward_normal(e),
        points: rule
            .points
            .iter()
            .map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
            .collect(),
        weights: rule.weights.iter().map(|w| w * length).collect(),
        basis: rule.points.iter().map(|&t| edge_basis_at(family, t)).collect(),
    }
}

/// `scale * (u, v)_{edges with tag}` for every component.
pub fn add_boundary_mass<S: Sink>(
    s: &mut S,
    space: &FeSpace,
    mesh: &Mesh,
    tag: BoundaryTag,
    scale: f64,
    off: (usize, usize),
) {
    let rule = edge_rule();
    let n = space.family().n_edge_local();
    for e in mesh.edges_with_tag(tag) {
        let eq = edge_quad(&rule, space.family(), mesh, e);
        let d = space.edge_trace_dofs(e);
        let mut loc = [[0.0; 3]; 3];
        for q in 0..eq.weights.len() {
            for a in 0..n {
                for b in 0..n {
                    loc[a][b] += scale * eq.weights[q] * eq.basis[q][a] * eq.basis[q][b];
                }
            }
        }
        for c in 0..space.components() {
            for a in 0..n {
                for b in 0..n {
                    s.add(off.0 + space.dof(c, d[a]), off.1 + space.dof(c, d[b]), loc[a][b]);
                }
            }
        }
    }
}

/// `coef * ((a . n) u, v)` over edges carrying any of `tags`.
pub fn add_boundary_advection<S: Sink>(
    s: &mut S,
    space: &FeSpace,
    mesh: &Mesh,
    tags: &[BoundaryTag],
    coef: f64,
    adv: &[f64],
    off: (usize, usize),
) {
    let rule = edge_rule();
    let n = space.family().n_edge_local();
    for e in mesh.boundary_edges().iter().filter(|e| tags.contains(&e.tag)) {
        let eq = edge_quad(&rule, space.family(), mesh, e);
        let d = space.edge_trace_dofs(e);
        let mut loc = [[0.0; 3]; 3];
        for q in 0..eq.weights.len() {
            let mut an = 0.0;
            for c in 0..2 {
                let ac: f64 = (0..n).map(|i| eq.basis[q][i] * adv[space.dof(c, d[i])]).sum();
                an += ac * eq.normal[c];
            }
            for a in 0..n {
                for b in 0..n {
                    loc[a][b] += coef * eq.weights[q] * an * eq.basis[q][a] * eq.basis[q][b];
                }
            }
        }
        for c in 0..space.components() {
            for a in 0..n {
                for b in 0..n {
                    s.add(off.0 + space.dof(c, d[a]), off.1 + space.dof(c, d[b]), loc[a][b]);
                }
            }
        }
    }
}

/// `(f, v)` for a vector-valued source.
pub fn vector_load(space: &FeSpace, mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    check(space, mesh);
    assert_eq!(space.components(), 2);
    let table = RefTable::for_family(space.family());
    let n = table.n_local;
    let mut out = vec![0.0; space.n_dofs()];
    each_element(&table, mesh, |e, ev| {
        let d = space.element_dofs(e);
        for q in 0..ev.nq() {
            let fx = f(ev.x[q]);
            for i in 0..n {
                let w = ev.jw[q] * ev.val(q, i);
                out[space.dof(0, d[i])] += w * fx[0];
                out[space.dof(1, d[i])] += w * fx[1];
            }
        }
    });
    out
}

/// `(f, q)` for a scalar source on a scalar space, integrated with `rule_family`'s rule.
pub fn scalar_load(space: &FeSpace, mesh: &Mesh, rule_family: Family, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    check(space, mesh);
    let rule = RefTable::for_family(rule_family).rule;
    let table = RefTable::new(space.family(), rule);
    let n = table.n_local;
    let mut out = vec![0.0; space.n_dofs()];
    each_element(&table, mesh, |e, ev| {
        let d = space.element_dofs(e);
        for q in 0..ev.nq() {
            let fx = f(ev.x[q]);
            for i in 0..n {
                out[space.dof(0, d[i])] += ev.jw[q] * ev.val(q, i) * fx;
            }
        }
    });
    out
}

/// `int t(x, n) . v` over edges with `tag`, for a traction given pointwise.
pub fn boundary_load(
    space: &FeSpace,
    mesh: &Mesh,
    tag: BoundaryTag,
    t: impl Fn([f64; 2], [f64; 2]) -> [f64; 2],
) -> Vec<f64> {
    let rule = edge_rule();
    let n = space.family().n_edge_local();
    let mut out = vec![0.0; space.n_dofs()];
    for e in mesh.edges_with_tag(tag) {
        let eq = edge_quad(&rule, space.family(), mesh, e);
        let d = space.edge_trace_dofs(e);
        for q in 0..eq.weights.len() {
            let tv = t(eq.points[q], eq.normal);
            for i in 0..n {
                for c in 0..space.components() {
                    out[space.dof(c, d[i])] += eq.weights[q] * eq.basis[q][i] * tv[c];
                }
            }
        }
        let _ = eq.length;
    }
    out
}

/// `-int p n . v` over edges with `tag`: the load of a normal traction `-p n`.
pub fn assemble_neumann_load(space: &FeSpace, mesh: &Mesh, tag: BoundaryTag, p: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    boundary_load(space, mesh, tag, |x, n| {
        let v = p(x);
        [-v * n[0], -v * n[1]]
    })
}

fn build(n: usize, m: usize, f: impl FnOnce(&mut TripletBuilder)) -> SparseMatrix {
    let mut b = TripletBuilder::new(n, m);
    f(&mut b);
    b.build()
}

pub fn assemble_mass(space: &FeSpace, density: f64, mesh: &Mesh) -> SparseMatrix {
    build(space.n_dofs(), space.n_dofs(), |b| add_mass(b, space, mesh, density, (0, 0)))
}

pub fn assemble_elasticity(space: &FeSpace, mu: f64, lambda: f64, gamma: f64, mesh: &Mesh) -> SparseMatrix {
    build(space.n_dofs(), space.n_dofs(), |b| {
        add_elasticity(b, space, mesh, mu, lambda, gamma, (0, 0))
    })
}

pub fn assemble_fluid_viscous(space: &FeSpace, mu: f64, mesh: &Mesh) -> SparseMatrix {
    assemble_elasticity(space, mu, 0.0, 0.0, mesh)
}

pub fn assemble_divergence(vspace: &FeSpace, pspace: &FeSpace, mesh: &Mesh) -> SparseMatrix {
    build(pspace.n_dofs(), vspace.n_dofs(), |b| {
        add_divergence(b, vspace, pspace, mesh, 1.0, (0, 0), false)
    })
}

pub fn assemble_ale_convection(adv: &[f64], space: &FeSpace, rho: f64, half_mesh: &Mesh) -> SparseMatrix {
    build(space.n_dofs(), space.n_dofs(), |b| {
        add_convection(b, space, half_mesh, rho, adv, false, (0, 0))
    })
}

pub fn assemble_interface_mass(space: &FeSpace, mesh: &Mesh) -> SparseMatrix {
    build(space.n_dofs(), space.n_dofs(), |b| {
        add_boundary_mass(b, space, mesh, BoundaryTag::Interface, 1.0, (0, 0))
    })
}

pub fn assemble_laplace(space: &FeSpace, mesh: &Mesh) -> SparseMatrix {
    build(space.n_dofs(), space.n_dofs(), |b| add_laplace(b, space, mesh, 1.0, (0, 0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::collapsed_rule;
    use crate::fem::space::{basis_at, grad_from_dlam, triangle_geometry};
    use crate::linsolve::{dense_is_positive_definite, Constraints};
    use crate::mesh::{generate_channel_meshes, BoundaryEdge, Region};

    fn unit_square(n: usize) -> Mesh {
        generate_channel_meshes(1.0, 1.0, 1.0, n, n, 1).unwrap().0
    }

    fn single_triangle() -> Mesh {
        Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge { nodes: [0, 1], tag: BoundaryTag::FluidWall, element: 0 },
                BoundaryEdge { nodes: [1, 2], tag: BoundaryTag::Interface, element: 0 },
                BoundaryEdge { nodes: [2, 0], tag: BoundaryTag::Inlet, element: 0 },
            ],
            Region::Fluid,
        )
    }

    fn distorted(n: usize) -> Mesh {
        unit_square(n).map_nodes(|[x, y]| [x + 0.08 * (3.0 * y).sin() * x * (1.0 - x), y + 0.05 * x * y])
    }

    #[test]
    fn p1_mass_on_reference_triangle() {
        let m = single_triangle();
        let s = FeSpace::new(&m, Family::P1, 1);
        let mm = assemble_mass(&s, 1.0, &m).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let exact = if i == j { 2.0 } else { 1.0 } / 24.0;
                assert!((mm[i][j] - exact).abs() < 1e-15);
            }
        }
        let m2 = assemble_mass(&s, 2.0, &m);
        assert_eq!(m2.values(), assemble_mass(&s, 1.0, &m).scaled(2.0).values());
    }

    #[test]
    fn mass_row_sums_and_symmetry() {
        let m = distorted(4);
        for fam in [Family::P1, Family::P1Bubble, Family::P2] {
            let s = FeSpace::new(&m, fam, 2);
            let mm = assemble_mass(&s, 1.5, &m);
            assert!(mm.asymmetry() < 1e-12);
            // partition of unity over the linear part: mass * interpolant(1)
            let one = s.interpolate(&m, |_, _| 1.0);
            let total = mm.bilinear(&one, &one);
            assert!((total - 1.5 * m.total_area() * 2.0).abs() < 1e-12, "{fam:?}");
        }
    }

    #[test]
    fn elasticity_energies() {
        let m = unit_square(3);
        let s = FeSpace::new(&m, Family::P1, 2);
        let k = assemble_elasticity(&s, 1.0, 1.0, 0.0, &m);
        let stretch = s.interpolate(&m, |x, c| if c == 0 { x[0] } else { 0.0 });
        assert!((k.bilinear(&stretch, &stretch) - 3.0).abs() < 1e-12);
        let tr = s.interpolate(&m, |_, _| 0.7);
        assert!(k.bilinear(&tr, &tr).abs() < 1e-14);
        let kv = assemble_fluid_viscous(&s, 0.035, &m);
        let shear = s.interpolate(&m, |x, c| if c == 0 { x[1] } else { 0.0 });
        assert!((kv.bilinear(&shear, &shear) - 0.035).abs() < 1e-14);
        let rot = s.interpolate(&m, |x, c| if c == 0 { -x[1] } else { x[0] });
        assert!(kv.bilinear(&rot, &rot).abs() < 1e-14);
        let g = assemble_elasticity(&s, 0.0, 0.0, 3.0, &m);
        let mm = assemble_mass(&s, 3.0, &m);
        // elasticity keeps the coupling pattern, so compare densely
        for (ra, rb) in g.to_dense().iter().zip(mm.to_dense()) {
            for (a, b) in ra.iter().zip(rb) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!(k.asymmetry() < 1e-12);
    }

    #[test]
    fn clamped_elasticity_is_positive_definite() {
        let (_, solid, _) = generate_channel_meshes(1.0, 0.5, 0.5, 6, 3, 6).unwrap();
        for fam in [Family::P1, Family::P2] {
            let s = FeSpace::new(&solid, fam, 2);
            let k = assemble_elasticity(&s, 1.0, 1.0, 0.0, &solid);
            let clamped: Vec<usize> = s
                .boundary_scalar_dofs(&solid, BoundaryTag::SolidClamped)
                .into_iter()
                .flat_map(|d| [s.dof(0, d), s.dof(1, d)])
                .collect();
            let mut c = Constraints::new();
            clamped.iter().for_each(|&d| c.set(d, 0.0));
            let dense = k.to_dense();
            let free: Vec<usize> = (0..s.n_dofs()).filter(|d| !c.contains(*d)).collect();
            let red: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| dense[i][j]).collect()).collect();
            assert!(dense_is_positive_definite(&red));
        }
    }

    #[test]
    fn divergence_identities() {
        let m = distorted(4);
        for fam in [Family::P1Bubble, Family::P2] {
            let v = FeSpace::new(&m, fam, 2);
            let p = FeSpace::new(&m, Family::P1, 1);
            let b = assemble_divergence(&v, &p, &m);
            let ones = vec![1.0; p.n_dofs()];
            let stretch = v.interpolate(&m, |x, c| if c == 0 { x[0] } else { 0.0 });
            assert!((crate::linsolve::dot(&ones, &b.spmv(&stretch)) - m.total_area()).abs() < 1e-12);
            let rot = v.interpolate(&m, |x, c| if c == 0 { -x[1] } else { x[0] });
            assert!(crate::linsolve::norm_inf(&b.spmv(&rot)) < 1e-13);
            let cst = v.interpolate(&m, |_, c| 1.0 + c as f64);
            assert!(crate::linsolve::norm_inf(&b.spmv(&cst)) < 1e-13);
        }
    }

    /// Dense oracle: the same form integrated with a 64-point collapsed rule and
    /// an independent element loop.
    fn oracle_convection(space: &FeSpace, mesh: &Mesh, rho: f64, adv: &[f64]) -> Vec<Vec<f64>> {
        let rule = collapsed_rule(8);
        let n = space.n_local();
        let mut out = vec![vec![0.0; space.n_dofs()]; space.n_dofs()];
        for e in 0..mesh.n_triangles() {
            let p = mesh.triangle_coords(e);
            let (area, glam) = triangle_geometry(&p);
            let d = space.element_dofs(e);
            for q in 0..rule.len() {
                let lam = rule.barycentric(q);
                let mut vals = [0.0; 6];
                let mut dl = [[0.0; 3]; 6];
                basis_at(space.family(), lam, &mut vals, &mut dl);
                let a = space.value_in_element(adv, e, lam);
                for i in 0..n {
                    for j in 0..n {
                        let gj = grad_from_dlam(&dl[j], &glam);
                        let v = rho * rule.weights[q] * 2.0 * area * (a[0] * gj[0] + a[1] * gj[1]) * vals[i];
                        for c in 0..2 {
                            out[space.dof(c, d[i])][space.dof(c, d[j])] += v;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn convection_matches_dense_oracle() {
        let m = distorted(3);
        for fam in [Family::P1, Family::P2] {
            let s = FeSpace::new(&m, fam, 2);
            let adv = s.interpolate(&m, |x, c| if c == 0 { 1.0 + x[1] } else { x[0] * x[1] });
            let c = assemble_ale_convection(&adv, &s, 1.3, &m).to_dense();
            let o = oracle_convection(&s, &m, 1.3, &adv);
            let mut worst = 0.0_f64;
            for (r1, r2) in c.iter().zip(&o) {
                for (a, b) in r1.iter().zip(r2) {
                    worst = worst.max((a - b).abs());
                }
            }
            assert!(worst < 1e-10, "{fam:?}: {worst}");
        }
        let s = FeSpace::new(&m, Family::P1Bubble, 2);
        let zero = vec![0.0; s.n_dofs()];
        assert!(assemble_ale_convection(&zero, &s, 1.0, &m).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn convection_of_linear_field_under_uniform_advection() {
        // a = (1,0), u = (x,0): (a.grad)u = (1,0), so C u = mass * (1,0) interpolant
        let m = unit_square(4);
        let s = FeSpace::new(&m, Family::P1Bubble, 2);
        let a = s.interpolate(&m, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let u = s.interpolate(&m, |x, c| if c == 0 { x[0] } else { 0.0 });
        let cu = assemble_ale_convection(&a, &s, 2.0, &m).spmv(&u);
        let mu = assemble_mass(&s, 2.0, &m).spmv(&a);
        for (x, y) in cu.iter().zip(&mu) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn skew_convection_is_skew() {
        let m = distorted(3);
        let s = FeSpace::new(&m, Family::P1Bubble, 2);
        let adv = s.interpolate(&m, |x, c| (x[0] + 2.0 * c as f64 * x[1]).sin());
        let mut b = TripletBuilder::new(s.n_dofs(), s.n_dofs());
        add_convection(&mut b, &s, &m, 1.0, &adv, true, (0, 0));
        let k = b.build();
        let kt = k.transpose();
        let sum = k.linear_combination(1.0, &kt, 1.0);
        assert!(crate::linsolve::norm_inf(sum.values()) < 1e-15);
    }

    #[test]
    fn interface_mass_single_edge() {
        let m = single_triangle();
        let s = FeSpace::new(&m, Family::P1, 2);
        let mg = assemble_interface_mass(&s, &m);
        let l = 2f64.sqrt();
        assert!((mg.get(1, 1) - l / 3.0).abs() < 1e-15);
        assert!((mg.get(1, 2) - l / 6.0).abs() < 1e-15);
        assert!((mg.get(4, 5) - l / 6.0).abs() < 1e-15);
        assert!(mg.row(0).all(|(_, v)| v == 0.0));
        let total: f64 = mg.values().iter().sum();
        assert!((total - 2.0 * l).abs() < 1e-14);
    }

    #[test]
    fn neumann_load_on_inlet() {
        let (fluid, _, _) = generate_channel_meshes(1.0, 0.5, 0.5, 4, 5, 2).unwrap();
        for fam in [Family::P1Bubble, Family::P2] {
            let s = FeSpace::new(&fluid, fam, 2);
            let l = assemble_neumann_load(&s, &fluid, BoundaryTag::Inlet, |_| 1.0);
            let sx: f64 = (0..s.n_scalar()).map(|i| l[s.dof(0, i)]).sum();
            let sy: f64 = (0..s.n_scalar()).map(|i| l[s.dof(1, i)]).sum();
            assert!((sx - 0.5).abs() < 1e-14 && sy.abs() < 1e-15);
            let inlet = s.boundary_scalar_dofs(&fluid, BoundaryTag::Inlet);
            for (i, v) in l.iter().enumerate() {
                if *v != 0.0 {
                    assert!(inlet.contains(&(i % s.n_scalar())));
                }
            }
            let z = assemble_neumann_load(&s, &fluid, BoundaryTag::Inlet, |_| 0.0);
            assert!(z.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn pattern_accumulator_matches_triplets() {
        let m = distorted(3);
        let s = FeSpace::new(&m, Family::P1Bubble, 2);
        let k = assemble_elasticity(&s, 1.0, 2.0, 0.5, &m);
        let mut acc = PatternAccumulator::new(k.clone());
        acc.reset();
        add_elasticity(&mut acc, &s, &m, 1.0, 2.0, 0.5, (0, 0));
        let k2 = acc.to_matrix();
        for (a, b) in k.values().iter().zip(k2.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
