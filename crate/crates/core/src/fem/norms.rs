//! Quadrature-evaluated norms and relative errors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::assembly::add_boundary_mass;
use super::quadrature::triangle_rule;
use super::space::{basis_at, grad_from_dlam, triangle_geometry, FeSpace};
use crate::linsolve::TripletBuilder;
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("reference norm is zero")]
    ZeroReference,
}

/// How the relative errors are reported. `r` denotes the plain norm ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorConvention {
    /// `r^2` for the displacement (S-norm), `r` for the velocities.
    #[default]
    AsPrinted,
    /// `r` everywhere.
    Unsquared,
    /// `r^2` everywhere.
    Squared,
}

impl ErrorConvention {
    pub fn displacement_error(self, err_s: f64, ref_s: f64) -> Result<f64, NormError> {
        let r = relative_error(err_s, ref_s)?;
        Ok(match self {
            ErrorConvention::AsPrinted | ErrorConvention::Squared => r * r,
            ErrorConvention::Unsquared => r,
        })
    }

    pub fn velocity_error(self, err: f64, reference: f64) -> Result<f64, NormError> {
        let r = relative_error(err, reference)?;
        Ok(match self {
            ErrorConvention::Squared => r * r,
            ErrorConvention::AsPrinted | ErrorConvention::Unsquared => r,
        })
    }
}

pub fn relative_error(err: f64, reference: f64) -> Result<f64, NormError> {
    if reference == 0.0 || !reference.is_finite() {
        return Err(NormError::ZeroReference);
    }
    Ok(err / reference)
}

/// Pointwise integrand evaluated at quadrature points of every element.
fn integrate(
    space: &FeSpace,
    mesh: &Mesh,
    degree: usize,
    mut f: impl FnMut([f64; 2], [f64; 2], [[f64; 2]; 2]) -> f64,
    u: &[f64],
) -> f64 {
    let rule = triangle_rule(degree);
    let n = space.n_local();
    let mut vals = [0.0; 6];
    let mut dl = [[0.0; 3]; 6];
    let mut total = 0.0;
    for e in 0..mesh.n_triangles() {
        let p = mesh.triangle_coords(e);
        let (area, glam) = triangle_geometry(&p);
        let d = space.element_dofs(e);
        for q in 0..rule.len() {
            let lam = rule.barycentric(q);
            basis_at(space.family(), lam, &mut vals, &mut dl);
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let mut v = [0.0; 2];
            let mut g = [[0.0; 2]; 2];
            for i in 0..n {
                let gi = grad_from_dlam(&dl[i], &glam);
                for c in 0..space.components() {
                    let ui = u[space.dof(c, d[i])];
                    v[c] += vals[i] * ui;
                    g[c][0] += gi[0] * ui;
                    g[c][1] += gi[1] * ui;
                }
            }
            total += rule.weights[q] * 2.0 * area * f(x, v, g);
        }
    }
    total
}

pub fn l2_norm(space: &FeSpace, mesh: &Mesh, u: &[f64]) -> f64 {
    integrate(space, mesh, 6, |_, v, _| v[0] * v[0] + v[1] * v[1], u).sqrt()
}

/// `|u - exact|_{L2}`; only the space's components are compared.
pub fn l2_error(space: &FeSpace, mesh: &Mesh, u: &[f64], exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let nc = space.components();
    integrate(
        space,
        mesh,
        6,
        |x, v, _| {
            let ex = exact(x);
            (0..nc).map(|c| (v[c] - ex[c]).powi(2)).sum()
        },
        u,
    )
    .sqrt()
}

/// L2 norm of a closure over the mesh (degree-6 rule).
pub fn l2_norm_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let space = FeSpace::new(mesh, super::space::Family::P1, 1);
    let zero = vec![0.0; space.n_dofs()];
    integrate(
        &space,
        mesh,
        6,
        |x, _, _| {
            let v = f(x);
            v[0] * v[0] + v[1] * v[1]
        },
        &zero,
    )
    .sqrt()
}

fn elastic_density(mu: f64, lambda: f64, gamma: f64, v: [f64; 2], g: [[f64; 2]; 2]) -> f64 {
    let d01 = 0.5 * (g[0][1] + g[1][0]);
    let dd = g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * d01 * d01;
    let div = g[0][0] + g[1][1];
    2.0 * mu * dd + lambda * div * div + gamma * (v[0] * v[0] + v[1] * v[1])
}

/// `|u - exact|_S` with the S-norm of `2 mu |D|^2 + lambda div^2 + gamma |.|^2`.
#[allow(clippy::too_many_arguments)]
pub fn s_error(
    space: &FeSpace,
    mesh: &Mesh,
    u: &[f64],
    mu: f64,
    lambda: f64,
    gamma: f64,
    exact: impl Fn([f64; 2]) -> [f64; 2],
    exact_grad: impl Fn([f64; 2]) -> [[f64; 2]; 2],
) -> f64 {
    integrate(
        space,
        mesh,
        6,
        |x, v, g| {
            let ev = exact(x);
            let eg = exact_grad(x);
            let dv = [v[0] - ev[0], v[1] - ev[1]];
            let dg = [
                [g[0][0] - eg[0][0], g[0][1] - eg[0][1]],
                [g[1][0] - eg[1][0], g[1][1] - eg[1][1]],
            ];
            elastic_density(mu, lambda, gamma, dv, dg)
        },
        u,
    )
    .max(0.0)
    .sqrt()
}

/// S-norm of a discrete field.
pub fn s_norm(space: &FeSpace, mesh: &Mesh, u: &[f64], mu: f64, lambda: f64, gamma: f64) -> f64 {
    s_error(space, mesh, u, mu, lambda, gamma, |_| [0.0; 2], |_| [[0.0; 2]; 2])
}

/// `|D(u)|_{L2}^2`.
pub fn strain_norm_sq(space: &FeSpace, mesh: &Mesh, u: &[f64]) -> f64 {
    integrate(space, mesh, 6, |_, v, g| elastic_density(0.5, 0.0, 0.0, v, g), u)
}

/// L2 norm of the trace of `u` on edges with `tag`.
pub fn boundary_l2(space: &FeSpace, mesh: &Mesh, tag: BoundaryTag, u: &[f64]) -> f64 {
    let mut b = TripletBuilder::new(space.n_dofs(), space.n_dofs());
    add_boundary_mass(&mut b, space, mesh, tag, 1.0, (0, 0));
    b.build().bilinear(u, u).max(0.0).sqrt()
}

pub fn interface_l2(space: &FeSpace, mesh: &Mesh, u: &[f64]) -> f64 {
    boundary_l2(space, mesh, BoundaryTag::Interface, u)
}
