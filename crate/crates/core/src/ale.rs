//! Mesh motion: harmonic extension of the interface displacement, domain
//! velocity, the interface velocity override and the discrete geometric
//! conservation law.
//!
//! Nodal P1 vector fields use the layout of a two-component P1 space:
//! `[x_0 .. x_{n-1}, y_0 .. y_{n-1}]`.

use crate::fem::assembly::{add_weighted_mass, assemble_laplace, assemble_mass, scalar_load};
use crate::fem::space::triangle_geometry;
use crate::fem::{Family, FeSpace};
use crate::linsolve::{ConstrainedSystem, Constraints, SolveError, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, InterfaceMap, Mesh, MeshError};

/// Discrete Laplace extension on the reference fluid mesh, factorized once.
#[derive(Debug)]
pub struct HarmonicExtension {
    space: FeSpace,
    system: ConstrainedSystem,
    interface_nodes: Vec<usize>,
    fixed_nodes: Vec<usize>,
}

impl HarmonicExtension {
    /// Dirichlet data: the interface trace on `Interface`, zero on inlet,
    /// outlet and the bottom wall.
    pub fn new(reference: &Mesh, imap: &InterfaceMap) -> Result<Self, SolveError> {
        let space = FeSpace::new(reference, Family::P1, 1);
        let interface_nodes: Vec<usize> = imap.fluid_nodes().collect();
        let mut fixed_nodes: Vec<usize> = [BoundaryTag::Inlet, BoundaryTag::Outlet, BoundaryTag::FluidWall]
            .into_iter()
            .flat_map(|t| reference.nodes_with_tag(t))
            .filter(|n| !interface_nodes.contains(n))
            .collect();
        fixed_nodes.sort_unstable();
        fixed_nodes.dedup();
        let laplace = assemble_laplace(&space, reference);
        let system = ConstrainedSystem::new(&laplace, fixed_nodes.iter().chain(&interface_nodes).copied())?;
        Ok(Self {
            space,
            system,
            interface_nodes,
            fixed_nodes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.space.n_nodes()
    }

    /// Extension of `trace` (one displacement per interface node, in
    /// interface-map order) with optional source `f_d` at reference coordinates.
    pub fn solve(
        &self,
        reference: &Mesh,
        trace: &[[f64; 2]],
        f_d: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
    ) -> Result<Vec<f64>, SolveError> {
        if trace.len() != self.interface_nodes.len() {
            return Err(SolveError::DimensionMismatch(format!(
                "{} trace values for {} interface nodes",
                trace.len(),
                self.interface_nodes.len()
            )));
        }
        let n = self.n_nodes();
        let mut out = vec![0.0; 2 * n];
        for c in 0..2 {
            let rhs = match f_d {
                Some(f) => scalar_load(&self.space, reference, Family::P1Bubble, |x| f(x)[c]),
                None => vec![0.0; n],
            };
            let mut bc = Constraints::new();
            for &k in &self.fixed_nodes {
                bc.set(k, 0.0);
            }
            for (k, &node) in self.interface_nodes.iter().enumerate() {
                bc.set(node, trace[k][c]);
            }
            let x = self.system.solve(&rhs, &bc)?;
            out[c * n..(c + 1) * n].copy_from_slice(&x);
        }
        Ok(out)
    }
}

/// `(new - old) / dt`, node by node.
pub fn domain_velocity(new: &[f64], old: &[f64], dt: f64) -> Vec<f64> {
    assert_eq!(new.len(), old.len());
    new.iter().zip(old).map(|(a, b)| (a - b) / dt).collect()
}

/// Copy of `v` whose interface dofs take the values of `w` (both on the same
/// velocity space), so that `v - w` has zero interface trace.
pub fn interface_velocity_override(v: &[f64], w: &[f64], interface_dofs: &[usize]) -> Vec<f64> {
    let mut out = v.to_vec();
    for &d in interface_dofs {
        out[d] = w[d];
    }
    out
}

/// Nodal layout to per-node pairs.
pub fn to_pairs(nodal: &[f64]) -> Vec<[f64; 2]> {
    let n = nodal.len() / 2;
    (0..n).map(|k| [nodal[k], nodal[n + k]]).collect()
}

/// Divergence of a nodal P1 field on every element of `mesh` (constant per element).
pub fn element_divergence(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    let n = mesh.n_nodes();
    assert_eq!(nodal.len(), 2 * n);
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(e, t)| {
            let (_, glam) = triangle_geometry(&mesh.triangle_coords(e));
            (0..3)
                .map(|i| nodal[t[i]] * glam[i][0] + nodal[n + t[i]] * glam[i][1])
                .sum()
        })
        .collect()
}

/// `| |u|^2_{new} - |u|^2_{old} - dt int_{half} |u|^2 div w | / max(1, |u|^2_{new})`
/// for a field `u` with fixed coefficients on `space`.
pub fn gcl_check(space: &FeSpace, u: &[f64], old: &Mesh, half: &Mesh, new: &Mesh, w: &[f64], dt: f64) -> f64 {
    let m_new = assemble_mass(space, 1.0, new).bilinear(u, u);
    let m_old = assemble_mass(space, 1.0, old).bilinear(u, u);
    let div = element_divergence(half, w);
    let mut b = TripletBuilder::new(space.n_dofs(), space.n_dofs());
    add_weighted_mass(&mut b, space, half, |e| div[e], (0, 0));
    let flux = b.build().bilinear(u, u);
    (m_new - m_old - dt * flux).abs() / m_new.max(1.0)
}

/// Mesh snapshots of one step: `Omega(t^n)`, `Omega(t^{n+1/2})`, `Omega(t^{n+1})`.
#[derive(Debug, Clone)]
pub struct AleState {
    /// Fluid-domain displacement at the current level (nodal).
    pub eta_f: Vec<f64>,
    /// Domain velocity over the last step (nodal).
    pub w: Vec<f64>,
    pub previous: Mesh,
    pub half: Mesh,
    pub current: Mesh,
}

impl AleState {
    /// Static configuration displaced by `eta_f`.
    pub fn at(reference: &Mesh, eta_f: Vec<f64>) -> Result<Self, MeshError> {
        let current = reference.deform(&to_pairs(&eta_f))?;
        Ok(Self {
            w: vec![0.0; eta_f.len()],
            eta_f,
            previous: current.clone(),
            half: current.clone(),
            current,
        })
    }

    /// Move to the displacement `eta_f_new` reached after `dt`.
    pub fn advance(&self, reference: &Mesh, eta_f_new: Vec<f64>, dt: f64) -> Result<Self, MeshError> {
        let current = reference.deform(&to_pairs(&eta_f_new))?;
        let half = self.current.midpoint(&current)?;
        Ok(Self {
            w: domain_velocity(&eta_f_new, &self.eta_f, dt),
            eta_f: eta_f_new,
            previous: self.current.clone(),
            half,
            current,
        })
    }

    /// Element Jacobians `J = |K| / |K_ref|` of the current map.
    pub fn jacobians(&self, reference: &Mesh) -> Vec<f64> {
        (0..reference.n_triangles())
            .map(|e| self.current.area(e) / reference.area(e))
            .collect()
    }

    pub fn min_jacobian(&self, reference: &Mesh) -> f64 {
        self.jacobians(reference).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Element deformation gradients `F = I + grad eta_F`.
    pub fn deformation_gradients(&self, reference: &Mesh) -> Vec<[[f64; 2]; 2]> {
        let n = reference.n_nodes();
        reference
            .triangles()
            .iter()
            .enumerate()
            .map(|(e, t)| {
                let (_, glam) = triangle_geometry(&reference.triangle_coords(e));
                let mut f = [[1.0, 0.0], [0.0, 1.0]];
                for i in 0..3 {
                    for (c, row) in f.iter_mut().enumerate() {
                        row[0] += self.eta_f[c * n + t[i]] * glam[i][0];
                        row[1] += self.eta_f[c * n + t[i]] * glam[i][1];
                    }
                }
                f
            })
            .collect()
    }

    /// Unit-density mass matrix of `space` on the current snapshot.
    pub fn current_mass(&self, space: &FeSpace) -> SparseMatrix {
        assemble_mass(space, 1.0, &self.current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::assemble_laplace;
    use crate::linsolve::DenseLu;
    use crate::mesh::generate_channel_meshes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_extension(mesh: &Mesh, fixed: &[(usize, f64)]) -> Vec<f64> {
        let s = FeSpace::new(mesh, Family::P1, 1);
        let mut a = assemble_laplace(&s, mesh).to_dense();
        let mut b = vec![0.0; a.len()];
        for &(k, v) in fixed {
            a[k].iter_mut().for_each(|x| *x = 0.0);
            a[k][k] = 1.0;
            b[k] = v;
        }
        DenseLu::new(&a).unwrap().solve(&b)
    }

    #[test]
    fn zero_trace_gives_zero() {
        let (f, _, map) = generate_channel_meshes(1.0, 0.5, 0.5, 4, 2, 2).unwrap();
        let h = HarmonicExtension::new(&f, &map).unwrap();
        let out = h.solve(&f, &vec![[0.0; 2]; map.len()], None).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_lift_matches_dense_oracle() {
        let (f, _, map) = generate_channel_meshes(2.0, 0.5, 0.5, 6, 4, 2).unwrap();
        let h = HarmonicExtension::new(&f, &map).unwrap();
        let d = 0.01;
        let trace: Vec<[f64; 2]> = map
            .fluid_nodes()
            .map(|n| {
                let x = f.nodes()[n][0];
                if x > 0.0 && x < 2.0 { [0.0, d] } else { [0.0, 0.0] }
            })
            .collect();
        let out = h.solve(&f, &trace, None).unwrap();
        let n = f.n_nodes();
        let mut fixed: Vec<(usize, f64)> = Vec::new();
        for tag in [BoundaryTag::Inlet, BoundaryTag::Outlet, BoundaryTag::FluidWall] {
            fixed.extend(f.nodes_with_tag(tag).into_iter().map(|k| (k, 0.0)));
        }
        for (k, node) in map.fluid_nodes().enumerate() {
            fixed.retain(|(j, _)| *j != node);
            fixed.push((node, trace[k][1]));
        }
        let oracle = dense_extension(&f, &fixed);
        for k in 0..n {
            assert!((out[n + k] - oracle[k]).abs() < 1e-14);
            assert_eq!(out[k], 0.0);
        }
        for node in f.nodes_with_tag(BoundaryTag::Inlet) {
            let on_interface = map.fluid_nodes().any(|m| m == node);
            if !on_interface {
                assert_eq!(out[n + node], 0.0);
            }
        }
    }

    #[test]
    fn forced_extension_converges() {
        // exact eta_F = (2 phi, phi) with phi = x(1-x)y(1-y), f_D = -Lap eta_F
        let phi = |x: [f64; 2]| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        let lap = |x: [f64; 2]| -2.0 * x[1] * (1.0 - x[1]) - 2.0 * x[0] * (1.0 - x[0]);
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let (f, _, map) = generate_channel_meshes(1.0, 0.5, 0.5, n, n / 2, n / 2).unwrap();
            let h = HarmonicExtension::new(&f, &map).unwrap();
            let trace: Vec<[f64; 2]> = map
                .fluid_nodes()
                .map(|k| {
                    let p = phi(f.nodes()[k]);
                    [2.0 * p, p]
                })
                .collect();
            let fd = |x: [f64; 2]| [-2.0 * lap(x), -lap(x)];
            let out = h.solve(&f, &trace, Some(&fd)).unwrap();
            let s = FeSpace::new(&f, Family::P1, 2);
            let e = crate::fem::l2_error(&s, &f, &out, |x| [2.0 * phi(x), phi(x)]);
            errs.push(e);
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn domain_velocity_and_override() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(domain_velocity(&a, &a, 0.1), vec![0.0; 4]);
        let b: Vec<f64> = a.iter().map(|x| x + 0.1 * 2.5).collect();
        assert!(domain_velocity(&b, &a, 0.1).iter().all(|w| (w - 2.5).abs() < 1e-12));
        let v = vec![1.0, 2.0, 3.0, 4.0];
        let w = vec![9.0, 9.0, 9.0, 9.0];
        let o = interface_velocity_override(&v, &w, &[1, 3]);
        assert_eq!(o, vec![1.0, 9.0, 3.0, 9.0]);
    }

    #[test]
    fn gcl_static_and_random() {
        let (f, _, _) = generate_channel_meshes(1.0, 0.5, 0.5, 5, 3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fam in [Family::P1Bubble, Family::P2] {
            let s = FeSpace::new(&f, fam, 2);
            let u: Vec<f64> = (0..s.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let zero = vec![0.0; 2 * f.n_nodes()];
            assert!(gcl_check(&s, &u, &f, &f, &f, &zero, 0.1) < 1e-14);
            for _ in 0..10 {
                let d0: Vec<f64> = (0..2 * f.n_nodes()).map(|_| rng.random_range(-0.02..0.02)).collect();
                let d1: Vec<f64> = (0..2 * f.n_nodes()).map(|_| rng.random_range(-0.02..0.02)).collect();
                let st = AleState::at(&f, d0).unwrap().advance(&f, d1, 0.01).unwrap();
                let r = gcl_check(&s, &u, &st.previous, &st.half, &st.current, &st.w, 0.01);
                assert!(r < 1e-12, "{r}");
            }
        }
    }

    #[test]
    fn rigid_translation_keeps_jacobians() {
        let (f, _, _) = generate_channel_meshes(1.0, 0.5, 0.5, 3, 2, 1).unwrap();
        let n = f.n_nodes();
        let mut d = vec![0.0; 2 * n];
        d[..n].iter_mut().for_each(|x| *x = 0.1);
        let st = AleState::at(&f, d).unwrap();
        assert!(st.jacobians(&f).iter().all(|j| (j - 1.0).abs() < 1e-14));
        let fg = st.deformation_gradients(&f);
        assert!(fg.iter().all(|m| (m[0][0] - 1.0).abs() < 1e-14 && m[0][1].abs() < 1e-14));
        let s = FeSpace::new(&f, Family::P1, 1);
        let u = vec![1.0; s.n_dofs()];
        let st2 = st.advance(&f, vec![0.0; 2 * n], 0.5).unwrap();
        assert!(gcl_check(&s, &u, &st2.previous, &st2.half, &st2.current, &st2.w, 0.5) < 1e-14);
    }
}
