//! Manufactured solutions, error measures, convergence and coupling-error
//! studies, and the heuristic choice of `alpha`.
//!
//! The manufactured fields on the unit square (fluid below `y = 1/2`, solid
//! above) are
//!
//! ```text
//! phi = x(1-x) y(1-y),   c(t) = A e^t
//! eta = v = c (2 phi, phi),   xi = d eta / dt = eta,   p = -lambda_S div eta,
//! ```
//!
//! with forcing `f_S = rho_S eta_tt - div sigma_S + gamma eta`,
//! `f_F = rho_F v_t + grad p - mu_F (Lap v + grad div v)` (plus `rho_F (grad v) v`
//! on the moving domain), `s = div v` and `f_D = -Lap eta`.

use std::fmt::Write as _;
use std::io;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{
    BoundaryVariant, ConvectionForm, ElementChoice, MaterialParams, MeshParams, SchemeConfig, SolidTop, WallCondition,
};
use crate::fem::assembly::boundary_load;
use crate::fem::norms::{l2_norm_fn, s_error};
use crate::fem::{l2_error, ErrorConvention, InterfaceFields};
use crate::fsi_linear::{LinearFsi, TimeStepper};
use crate::fsi_moving::MovingFsi;
use crate::linsolve::SparseMatrix;
use crate::mesh::{BoundaryTag, Mesh};
use crate::problem::{Discretization, FsiData, FsiError, FsiState};

/// Whether the fluid domain follows the structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Fixed,
    Moving,
}

type Grad = [[f64; 2]; 2];

/// Manufactured solution with its forcing closures.
#[derive(Debug, Clone, Copy)]
pub struct MmsProblem {
    pub domain: Domain,
    pub material: MaterialParams,
    /// Amplitude `A` of the time factor.
    pub amplitude: f64,
}

impl MmsProblem {
    /// Fixed-domain problem with the given material.
    pub fn example1(material: MaterialParams) -> Self {
        Self {
            domain: Domain::Fixed,
            material,
            amplitude: 1e-3,
        }
    }

    /// Moving-domain problem; the fluid-domain displacement is `eta` itself.
    pub fn example2(material: MaterialParams) -> Self {
        Self {
            domain: Domain::Moving,
            ..Self::example1(material)
        }
    }

    fn c(&self, t: f64) -> f64 {
        self.amplitude * t.exp()
    }

    fn phi(x: [f64; 2]) -> f64 {
        x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
    }

    fn dphi(x: [f64; 2]) -> [f64; 2] {
        [
            (1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]),
            x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]),
        ]
    }

    /// `[phi_xx, phi_xy, phi_yy]`
    fn hphi(x: [f64; 2]) -> [f64; 3] {
        [
            -2.0 * x[1] * (1.0 - x[1]),
            (1.0 - 2.0 * x[0]) * (1.0 - 2.0 * x[1]),
            -2.0 * x[0] * (1.0 - x[0]),
        ]
    }

    pub fn eta(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let f = self.c(t) * Self::phi(x);
        [2.0 * f, f]
    }

    pub fn xi(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.eta(x, t)
    }

    /// `g[c][k] = d eta_c / d x_k`
    pub fn eta_grad(&self, x: [f64; 2], t: f64) -> Grad {
        let (c, d) = (self.c(t), Self::dphi(x));
        [[2.0 * c * d[0], 2.0 * c * d[1]], [c * d[0], c * d[1]]]
    }

    pub fn v(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.eta(x, t)
    }

    pub fn v_grad(&self, x: [f64; 2], t: f64) -> Grad {
        self.eta_grad(x, t)
    }

    pub fn p(&self, x: [f64; 2], t: f64) -> f64 {
        let d = Self::dphi(x);
        -self.material.lambda_s * self.c(t) * (2.0 * d[0] + d[1])
    }

    /// Exact fluid-domain displacement and domain velocity.
    pub fn eta_f(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.eta(x, t)
    }

    pub fn w(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.eta(x, t)
    }

    fn lap_and_grad_div(&self, x: [f64; 2], t: f64) -> ([f64; 2], [f64; 2]) {
        let (c, h) = (self.c(t), Self::hphi(x));
        let lap = h[0] + h[2];
        (
            [2.0 * c * lap, c * lap],
            [c * (2.0 * h[0] + h[1]), c * (2.0 * h[1] + h[2])],
        )
    }

    pub fn sigma_f(&self, x: [f64; 2], t: f64) -> Grad {
        let (g, p, mu) = (self.v_grad(x, t), self.p(x, t), self.material.mu_f);
        let off = mu * (g[0][1] + g[1][0]);
        [[2.0 * mu * g[0][0] - p, off], [off, 2.0 * mu * g[1][1] - p]]
    }

    pub fn sigma_s(&self, x: [f64; 2], t: f64) -> Grad {
        let g = self.eta_grad(x, t);
        let (mu, lam) = (self.material.mu_s, self.material.lambda_s);
        let div = g[0][0] + g[1][1];
        let off = mu * (g[0][1] + g[1][0]);
        [[2.0 * mu * g[0][0] + lam * div, off], [off, 2.0 * mu * g[1][1] + lam * div]]
    }

    pub fn fluid_force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let m = &self.material;
        let v = self.v(x, t);
        let (lap, gdiv) = self.lap_and_grad_div(x, t);
        // grad p = -lambda_S grad div eta
        let mut f = [0.0; 2];
        for k in 0..2 {
            f[k] = m.rho_f * v[k] - m.lambda_s * gdiv[k] - m.mu_f * (lap[k] + gdiv[k]);
        }
        if self.domain == Domain::Moving {
            let g = self.v_grad(x, t);
            for k in 0..2 {
                f[k] += m.rho_f * (g[k][0] * v[0] + g[k][1] * v[1]);
            }
        }
        f
    }

    pub fn solid_force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let m = &self.material;
        let e = self.eta(x, t);
        let (lap, gdiv) = self.lap_and_grad_div(x, t);
        let mut f = [0.0; 2];
        for k in 0..2 {
            f[k] = m.rho_s * e[k] - m.mu_s * lap[k] - (m.mu_s + m.lambda_s) * gdiv[k] + m.gamma * e[k];
        }
        f
    }

    pub fn mass_source(&self, x: [f64; 2], t: f64) -> f64 {
        let d = Self::dphi(x);
        self.c(t) * (2.0 * d[0] + d[1])
    }

    pub fn geometry_source(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let (lap, _) = self.lap_and_grad_div(x, t);
        [-lap[0], -lap[1]]
    }

    /// Unit-square mesh with cell size `h`.
    pub fn mesh(h: f64) -> MeshParams {
        MeshParams::unit_square(h)
    }

    /// Boundary conditions matching the manufactured fields.
    pub fn scheme(&self, alpha: f64, dt: f64, t_final: f64, element: ElementChoice) -> SchemeConfig {
        SchemeConfig {
            alpha,
            dt,
            t_final,
            element,
            inlet_outlet: BoundaryVariant::NoSlip,
            wall: WallCondition::NoSlip,
            solid_top: SolidTop::Clamped,
            convection: match self.domain {
                Domain::Fixed => ConvectionForm::None,
                Domain::Moving => ConvectionForm::Standard,
            },
            c_ti_estimate: 1.0,
            error_convention: ErrorConvention::default(),
        }
    }

    /// Exact state at `t` with the fluid sampled on `fluid_mesh`; the traction is
    /// the exact interface functional.
    pub fn exact_state(&self, disc: &Discretization, fluid_mesh: &Mesh, t: f64) -> FsiState {
        let v = disc.vspace.interpolate(fluid_mesh, |x, c| self.v(x, t)[c]);
        let p = disc.pspace.interpolate(fluid_mesh, |x, _| self.p(x, t));
        let eta = disc.sspace.interpolate(&disc.solid_mesh, |x, c| self.eta(x, t)[c]);
        let xi = disc.sspace.interpolate(&disc.solid_mesh, |x, c| self.xi(x, t)[c]);
        let g = boundary_load(&disc.vspace, fluid_mesh, BoundaryTag::Interface, |x, n| {
            let s = self.sigma_f(x, t);
            [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
        });
        let mut st = FsiState::zeros(disc);
        st.t = t;
        st.v = v;
        st.p = p;
        st.eta = eta;
        st.xi = xi;
        st.traction.values = disc.idofs.restrict_fluid(&g);
        st.traction.time = t;
        st
    }

    /// Put `solver` in the exact initial state. On a moving domain the mesh is
    /// first moved by the initial displacement so the fluid fields are sampled
    /// at physical points.
    pub fn initialize(&self, solver: &mut dyn TimeStepper) -> Result<(), FsiError> {
        let disc = Arc::clone(solver.disc());
        if self.domain == Domain::Moving {
            let mut st = FsiState::zeros(&disc);
            st.eta = disc.sspace.interpolate(&disc.solid_mesh, |x, c| self.eta(x, 0.0)[c]);
            solver.set_state(st)?;
        }
        let mesh = solver.fluid_mesh().clone();
        solver.set_state(self.exact_state(&disc, &mesh, 0.0))
    }

    /// Maximum relative residual of the forcing closures against finite
    /// differences of the exact fields at `n_points` random space-time points.
    pub fn forcing_residual(&self, n_points: usize, seed: u64, step: f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = &self.material;
        let hs = step;
        let dx = |f: &dyn Fn([f64; 2]) -> [f64; 2], x: [f64; 2], k: usize| {
            let mut a = x;
            let mut b = x;
            a[k] += hs;
            b[k] -= hs;
            let (fa, fb) = (f(a), f(b));
            [(fa[0] - fb[0]) / (2.0 * hs), (fa[1] - fb[1]) / (2.0 * hs)]
        };
        let mut worst = 0.0_f64;
        let mut rel = |terms: &[f64], target: f64| {
            let scale = terms.iter().fold(target.abs(), |a, t| a.max(t.abs()));
            let r: f64 = terms.iter().sum::<f64>() - target;
            worst = worst.max(r.abs() / scale.max(f64::MIN_POSITIVE));
        };
        for _ in 0..n_points {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let t = rng.random_range(0.0..0.3);
            let dt = |f: &dyn Fn(f64) -> [f64; 2]| {
                let (a, b) = (f(t + hs), f(t - hs));
                [(a[0] - b[0]) / (2.0 * hs), (a[1] - b[1]) / (2.0 * hs)]
            };
            // closures of derivatives
            let eta_t = dt(&|s| self.eta(x, s));
            let xi = self.xi(x, t);
            rel(&[eta_t[0]], xi[0]);
            rel(&[eta_t[1]], xi[1]);
            for k in 0..2 {
                let fd = dx(&|y| self.eta(y, t), x, k);
                let g = self.eta_grad(x, t);
                rel(&[fd[0]], g[0][k]);
                rel(&[fd[1]], g[1][k]);
            }
            // second derivatives from differences of the gradient closure
            let col = |k: usize| move |y: [f64; 2]| {
                let g = self.v_grad(y, t);
                [g[0][k], g[1][k]]
            };
            let d_col0 = dx(&col(0), x, 0);
            let d_col1 = dx(&col(1), x, 1);
            let d_col0y = dx(&col(0), x, 1);
            let lap = [d_col0[0] + d_col1[0], d_col0[1] + d_col1[1]];
            let gdiv = [d_col0[0] + dx(&col(1), x, 0)[1], d_col0y[0] + d_col1[1]];
            let dp = [
                (self.p([x[0] + hs, x[1]], t) - self.p([x[0] - hs, x[1]], t)) / (2.0 * hs),
                (self.p([x[0], x[1] + hs], t) - self.p([x[0], x[1] - hs], t)) / (2.0 * hs),
            ];
            let v_t = dt(&|s| self.v(x, s));
            let v = self.v(x, t);
            let g = self.v_grad(x, t);
            let f = self.fluid_force(x, t);
            for k in 0..2 {
                let conv = if self.domain == Domain::Moving {
                    m.rho_f * (g[k][0] * v[0] + g[k][1] * v[1])
                } else {
                    0.0
                };
                rel(&[m.rho_f * v_t[k], dp[k], -m.mu_f * lap[k], -m.mu_f * gdiv[k], conv], f[k]);
            }
            rel(&[g[0][0], g[1][1]], self.mass_source(x, t));
            // solid: rho_S xi_t - div sigma_S + gamma eta
            let xi_t = dt(&|s| self.xi(x, s));
            let sig_col = |k: usize| move |y: [f64; 2]| {
                let s = self.sigma_s(y, t);
                [s[0][k], s[1][k]]
            };
            let dsx = dx(&sig_col(0), x, 0);
            let dsy = dx(&sig_col(1), x, 1);
            let e = self.eta(x, t);
            let fs = self.solid_force(x, t);
            for k in 0..2 {
                rel(&[m.rho_s * xi_t[k], -dsx[k], -dsy[k], m.gamma * e[k]], fs[k]);
            }
            let fd = self.geometry_source(x, t);
            rel(&[-lap[0]], fd[0]);
            rel(&[-lap[1]], fd[1]);
        }
        worst
    }
}

impl FsiData for MmsProblem {
    fn has_sources(&self) -> bool {
        true
    }
    fn fluid_force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        MmsProblem::fluid_force(self, x, t)
    }
    fn mass_source(&self, x: [f64; 2], t: f64) -> f64 {
        MmsProblem::mass_source(self, x, t)
    }
    fn solid_force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        MmsProblem::solid_force(self, x, t)
    }
    fn has_geometry_force(&self) -> bool {
        self.domain == Domain::Moving
    }
    fn geometry_force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.geometry_source(x, t)
    }
}

/// `(e_ke, e_sigma)`: relative interface mismatch of velocity and normal stress.
pub fn coupling_errors(
    disc: &Discretization,
    fluid_mesh: &Mesh,
    state: &FsiState,
    material: &MaterialParams,
) -> (f64, f64) {
    let vg = disc.idofs.restrict_fluid(&state.v);
    let xg = disc.idofs.restrict_solid(&state.xi);
    let jump: Vec<f64> = vg.iter().zip(&xg).map(|(a, b)| a - b).collect();
    let nv = disc.idofs.norm_sq(&vg);
    let e_ke = if nv > 0.0 {
        (disc.idofs.norm_sq(&jump) / nv).max(0.0).sqrt()
    } else {
        0.0
    };
    let fields = InterfaceFields {
        fluid_mesh,
        solid_mesh: &disc.solid_mesh,
        vspace: &disc.vspace,
        pspace: &disc.pspace,
        sspace: &disc.sspace,
        v: &state.v,
        p: &state.p,
        eta: &state.eta,
        mu_f: material.mu_f,
        mu_s: material.mu_s,
        lambda_s: material.lambda_s,
    };
    let (diff, norm) = fields.stress_mismatch(&disc.idofs);
    let e_sigma = if norm > 0.0 { diff / norm } else { 0.0 };
    (e_ke, e_sigma)
}

/// Relative errors of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelErrors {
    pub e_eta: f64,
    pub e_xi: f64,
    pub e_f: f64,
    pub e_ke: f64,
    pub e_sigma: f64,
}

/// Errors of `state` against the manufactured solution at `state.t`.
pub fn mms_errors(
    problem: &MmsProblem,
    disc: &Discretization,
    fluid_mesh: &Mesh,
    state: &FsiState,
    convention: ErrorConvention,
) -> Result<LevelErrors, FsiError> {
    let t = state.t;
    let m = &problem.material;
    let (s, sm) = (&disc.sspace, &disc.solid_mesh);
    let eta = |x| problem.eta(x, t);
    let eta_g = |x| problem.eta_grad(x, t);
    let err_s = s_error(s, sm, &state.eta, m.mu_s, m.lambda_s, m.gamma, eta, eta_g);
    let zero = vec![0.0; s.n_dofs()];
    let ref_s = s_error(s, sm, &zero, m.mu_s, m.lambda_s, m.gamma, eta, eta_g);
    let e_eta = convention.displacement_error(err_s, ref_s)?;
    let e_xi = convention.velocity_error(
        l2_error(s, sm, &state.xi, |x| problem.xi(x, t)),
        l2_norm_fn(sm, |x| problem.xi(x, t)),
    )?;
    let e_f = convention.velocity_error(
        l2_error(&disc.vspace, fluid_mesh, &state.v, |x| problem.v(x, t)),
        l2_norm_fn(fluid_mesh, |x| problem.v(x, t)),
    )?;
    let (e_ke, e_sigma) = coupling_errors(disc, fluid_mesh, state, m);
    Ok(LevelErrors {
        e_eta,
        e_xi,
        e_f,
        e_ke,
        e_sigma,
    })
}

/// Solver for a manufactured problem: fixed-domain or ALE.
pub fn mms_solver(
    problem: &MmsProblem,
    disc: Arc<Discretization>,
    scheme: SchemeConfig,
) -> Result<Box<dyn TimeStepper>, FsiError> {
    let data: Arc<dyn FsiData> = Arc::new(*problem);
    Ok(match problem.domain {
        Domain::Fixed => Box::new(LinearFsi::new(disc, problem.material, scheme, data)?),
        Domain::Moving => Box::new(MovingFsi::new(disc, problem.material, scheme, data)?),
    })
}

/// Run a manufactured problem to `scheme.t_final` from the exact initial state.
pub fn run_mms(
    problem: &MmsProblem,
    disc: Arc<Discretization>,
    scheme: SchemeConfig,
) -> Result<Box<dyn TimeStepper>, FsiError> {
    let mut solver = mms_solver(problem, disc, scheme)?;
    problem.initialize(solver.as_mut())?;
    solver.run(scheme.n_steps())?;
    Ok(solver)
}

/// Which error column of a [`ConvergenceTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorField {
    Eta,
    Xi,
    Fluid,
    Kinematic,
    Stress,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub alpha: f64,
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub errors: Option<LevelErrors>,
    /// Solver failure message of this cell, if any.
    pub failure: Option<String>,
}

impl ConvergenceRow {
    pub fn get(&self, f: ErrorField) -> f64 {
        let Some(e) = &self.errors else { return f64::NAN };
        match f {
            ErrorField::Eta => e.e_eta,
            ErrorField::Xi => e.e_xi,
            ErrorField::Fluid => e.e_f,
            ErrorField::Kinematic => e.e_ke,
            ErrorField::Stress => e.e_sigma,
        }
    }
}

/// `log2(e_k / e_{k+1})` between consecutive entries.
pub fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub label: String,
    pub convention: ErrorConvention,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn alphas(&self) -> Vec<f64> {
        let mut a: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !a.contains(&r.alpha) {
                a.push(r.alpha);
            }
        }
        a
    }

    pub fn rows_for(&self, alpha: f64) -> Vec<&ConvergenceRow> {
        let mut v: Vec<&ConvergenceRow> = self.rows.iter().filter(|r| r.alpha == alpha).collect();
        v.sort_by_key(|r| r.level);
        v
    }

    pub fn errors(&self, alpha: f64, f: ErrorField) -> Vec<f64> {
        self.rows_for(alpha).iter().map(|r| r.get(f)).collect()
    }

    pub fn rates(&self, alpha: f64, f: ErrorField) -> Vec<f64> {
        rates(&self.errors(alpha, f))
    }

    pub fn finest(&self, alpha: f64) -> Option<&ConvergenceRow> {
        self.rows_for(alpha).last().copied()
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "alpha", "level", "h", "dt", "e_eta", "e_xi", "e_F", "e_ke", "e_sigma", "rate_eta", "rate_xi", "rate_F",
            "failure",
        ])?;
        let fields = [ErrorField::Eta, ErrorField::Xi, ErrorField::Fluid];
        for a in self.alphas() {
            let rows = self.rows_for(a);
            for (k, r) in rows.iter().enumerate() {
                let mut rec = vec![
                    a.to_string(),
                    r.level.to_string(),
                    format!("{:e}", r.h),
                    format!("{:e}", r.dt),
                ];
                for f in [ErrorField::Eta, ErrorField::Xi, ErrorField::Fluid, ErrorField::Kinematic, ErrorField::Stress] {
                    rec.push(format!("{:e}", r.get(f)));
                }
                for f in fields {
                    rec.push(if k == 0 {
                        String::new()
                    } else {
                        format!("{:.4}", (rows[k - 1].get(f) / r.get(f)).log2())
                    });
                }
                rec.push(r.failure.clone().unwrap_or_default());
                out.write_record(&rec)?;
            }
        }
        out.flush()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} (errors: {:?})", self.label, self.convention);
        let _ = writeln!(
            s,
            "{:>7} {:>5} {:>9} {:>9} {:>11} {:>11} {:>11} {:>11} {:>11} {:>7} {:>7} {:>7}",
            "alpha", "level", "h", "dt", "e_eta", "e_xi", "e_F", "e_ke", "e_sigma", "r_eta", "r_xi", "r_F"
        );
        for a in self.alphas() {
            let rows = self.rows_for(a);
            for (k, r) in rows.iter().enumerate() {
                let rate = |f| {
                    if k == 0 {
                        String::from("-")
                    } else {
                        format!("{:.3}", (rows[k - 1].get(f) / r.get(f)).log2())
                    }
                };
                let _ = writeln!(
                    s,
                    "{:>7} {:>5} {:>9.3e} {:>9.3e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>7} {:>7} {:>7}{}",
                    a,
                    r.level,
                    r.h,
                    r.dt,
                    r.get(ErrorField::Eta),
                    r.get(ErrorField::Xi),
                    r.get(ErrorField::Fluid),
                    r.get(ErrorField::Kinematic),
                    r.get(ErrorField::Stress),
                    rate(ErrorField::Eta),
                    rate(ErrorField::Xi),
                    rate(ErrorField::Fluid),
                    r.failure.as_ref().map(|m| format!("  FAILED: {m}")).unwrap_or_default()
                );
            }
        }
        s
    }
}

/// Parameters of a refinement study: level `k` uses `(dt0 / 2^k, h0 / 2^k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySpec {
    pub label: String,
    pub domain: Domain,
    pub alphas: Vec<f64>,
    pub first_level: usize,
    pub levels: usize,
    pub dt0: f64,
    pub h0: f64,
    pub t_final: f64,
    pub element: ElementChoice,
    #[serde(skip)]
    pub material: MaterialParams,
    pub convention: ErrorConvention,
}

impl StudySpec {
    /// Fixed-domain study from `(0.01, 0.1)`, four levels, MINI elements.
    pub fn example1() -> Self {
        Self {
            label: "fixed-domain manufactured solution".into(),
            domain: Domain::Fixed,
            alphas: vec![1.0, 10.0, 100.0, 200.0, 500.0],
            first_level: 0,
            levels: 4,
            dt0: 0.01,
            h0: 0.1,
            t_final: 0.3,
            element: ElementChoice::Mini,
            material: MaterialParams::unit(),
            convention: ErrorConvention::default(),
        }
    }

    pub fn example2() -> Self {
        Self {
            label: "moving-domain manufactured solution".into(),
            domain: Domain::Moving,
            ..Self::example1()
        }
    }

    /// Coupling-error sequence `(1e-2 / 2^k, 0.0625 / 2^k)` with P2/P1
    /// elements, finest level only.
    pub fn coupling() -> Self {
        Self {
            label: "coupling errors".into(),
            alphas: vec![10.0, 100.0, 200.0, 500.0],
            first_level: 3,
            levels: 4,
            dt0: 1e-2,
            h0: 0.0625,
            element: ElementChoice::TaylorHood,
            ..Self::example1()
        }
    }

    pub fn level_params(&self, level: usize) -> (f64, f64) {
        let s = 2f64.powi(level as i32);
        (self.dt0 / s, self.h0 / s)
    }

    pub fn problem(&self) -> MmsProblem {
        match self.domain {
            Domain::Fixed => MmsProblem::example1(self.material),
            Domain::Moving => MmsProblem::example2(self.material),
        }
    }
}

/// Run every (level, alpha) cell of `spec`. Solver failures are recorded in
/// the affected row and the study continues.
pub fn run_convergence_study(spec: &StudySpec, mut progress: impl FnMut(&ConvergenceRow)) -> ConvergenceTable {
    let problem = spec.problem();
    let mut rows = Vec::new();
    for level in spec.first_level..spec.levels {
        let (dt, h) = spec.level_params(level);
        let disc = Discretization::new(&MmsProblem::mesh(h), spec.element);
        for &alpha in &spec.alphas {
            let scheme = problem.scheme(alpha, dt, spec.t_final, spec.element);
            let result = disc.as_ref().map_err(|e| FsiError::Setup(e.to_string())).and_then(|d| {
                let solver = run_mms(&problem, Arc::clone(d), scheme)?;
                mms_errors(&problem, d, solver.fluid_mesh(), solver.state(), spec.convention)
            });
            let row = ConvergenceRow {
                alpha,
                level,
                h,
                dt,
                errors: result.as_ref().ok().copied(),
                failure: result.err().map(|e| e.to_string()),
            };
            progress(&row);
            rows.push(row);
        }
    }
    ConvergenceTable {
        label: spec.label.clone(),
        convention: spec.convention,
        rows,
    }
}

/// `sqrt(rho_F |dv|^2 + rho_S |dxi|^2 + |deta|_S^2)` between two states.
pub fn energy_norm_difference(
    a: &FsiState,
    b: &FsiState,
    material: &MaterialParams,
    fluid_mass: &SparseMatrix,
    solid_mass: &SparseMatrix,
    solid_stiffness: &SparseMatrix,
) -> f64 {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>();
    let (dv, dxi, deta) = (d(&a.v, &b.v), d(&a.xi, &b.xi), d(&a.eta, &b.eta));
    (material.rho_f * fluid_mass.bilinear(&dv, &dv)
        + material.rho_s * solid_mass.bilinear(&dxi, &dxi)
        + solid_stiffness.bilinear(&deta, &deta))
    .max(0.0)
    .sqrt()
}

/// One entry of a temporal study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemporalPoint {
    pub dt: f64,
    pub error: f64,
}

/// Fixed-domain manufactured problem at fixed `h`: runs with `dt0 / 2^k`,
/// `k < levels`, and measures the energy-norm distance at `t_final` to a
/// self-reference computed with `dt0 / 2^levels`.
pub fn temporal_order_study(
    material: MaterialParams,
    alpha: f64,
    h: f64,
    dt0: f64,
    levels: usize,
    t_final: f64,
    element: ElementChoice,
) -> Result<Vec<TemporalPoint>, FsiError> {
    use crate::fem::assembly::{assemble_elasticity, assemble_mass};
    let problem = MmsProblem::example1(material);
    let disc = Discretization::new(&MmsProblem::mesh(h), element)?;
    let run = |dt: f64| -> Result<FsiState, FsiError> {
        let scheme = problem.scheme(alpha, dt, t_final, element);
        Ok(run_mms(&problem, Arc::clone(&disc), scheme)?.state().clone())
    };
    let reference = run(dt0 / 2f64.powi(levels as i32))?;
    let mf = assemble_mass(&disc.vspace, 1.0, &disc.fluid_mesh);
    let ms = assemble_mass(&disc.sspace, 1.0, &disc.solid_mesh);
    let ks = assemble_elasticity(&disc.sspace, material.mu_s, material.lambda_s, material.gamma, &disc.solid_mesh);
    (0..levels)
        .map(|k| {
            let dt = dt0 / 2f64.powi(k as i32);
            let st = run(dt)?;
            Ok(TemporalPoint {
                dt,
                error: energy_norm_difference(&st, &reference, &material, &mf, &ms, &ks),
            })
        })
        .collect()
}

/// `rho_S H_S / dt + beta H_S dt` with
/// `beta = E / (1 - nu^2) (4 rho_1^2 - 2 (1 - nu) rho_2^2)`.
///
/// A rough starting value only: runs with it are in general less accurate
/// than with a tuned `alpha`.
pub fn alpha_heuristic(rho_s: f64, h_s: f64, dt: f64, young: f64, nu: f64, rho1: f64, rho2: f64) -> f64 {
    let beta = young / (1.0 - nu * nu) * (4.0 * rho1 * rho1 - 2.0 * (1.0 - nu) * rho2 * rho2);
    rho_s * h_s / dt + beta * h_s * dt
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> MmsProblem {
        MmsProblem::example1(MaterialParams::unit())
    }

    #[test]
    fn closed_form_values() {
        let p = unit();
        let e = p.eta([0.5, 0.75], 0.0);
        assert!((e[0] - 9.375e-5).abs() < 1e-18 && (e[1] - 4.6875e-5).abs() < 1e-18);
        assert_eq!(p.p([0.5, 0.5], 0.0), 0.0);
        assert!((p.mass_source([0.25, 0.25], 0.0) - 2.8125e-4).abs() < 1e-17);
        let fd = MmsProblem::example2(MaterialParams::unit()).geometry_source([0.5, 0.5], 0.0);
        assert!((fd[0] - 2e-3).abs() < 1e-17 && (fd[1] - 1e-3).abs() < 1e-17);
        assert_eq!(p.xi([0.3, 0.6], 0.2), p.eta([0.3, 0.6], 0.2));
    }

    #[test]
    fn frozen_forcing_table() {
        let data = include_str!("../tests/data/mms_forcing.csv");
        let fixed = unit();
        let moving = MmsProblem::example2(MaterialParams::unit());
        for line in data.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            let (x, t) = ([v[0], v[1]], v[2]);
            let got = [
                fixed.fluid_force(x, t),
                moving.fluid_force(x, t),
                fixed.solid_force(x, t),
                moving.geometry_source(x, t),
            ];
            for (i, g) in got.iter().enumerate() {
                for k in 0..2 {
                    let want = v[3 + 2 * i + k];
                    assert!((g[k] - want).abs() <= 1e-14 * want.abs().max(1e-3), "{x:?} {t} column {i}");
                }
            }
            assert!((fixed.mass_source(x, t) - v[11]).abs() < 1e-17);
        }
    }

    #[test]
    fn forcing_matches_finite_differences() {
        for p in [unit(), MmsProblem::example2(MaterialParams::unit())] {
            let r = p.forcing_residual(50, 17, 1e-5);
            assert!(r < 1e-8, "{r}");
        }
        let m = MaterialParams {
            rho_f: 1.3,
            mu_f: 0.7,
            rho_s: 2.0,
            mu_s: 3.0,
            lambda_s: 5.0,
            gamma: 0.5,
        };
        assert!(MmsProblem::example2(m).forcing_residual(50, 3, 1e-5) < 1e-8);
    }

    #[test]
    fn exact_state_gives_zero_errors() {
        let p = unit();
        let disc = Discretization::new(&MmsProblem::mesh(0.25), ElementChoice::Mini).unwrap();
        let st = p.exact_state(&disc, &disc.fluid_mesh, 0.0);
        let e = mms_errors(&p, &disc, &disc.fluid_mesh, &st, ErrorConvention::Unsquared).unwrap();
        // interpolation errors only
        assert!(e.e_f < 0.5 && e.e_xi < 0.5 && e.e_eta < 1.0);
        let mut exact = st.clone();
        exact.xi = exact.eta.clone();
        let (ke, _) = coupling_errors(&disc, &disc.fluid_mesh, &exact, &p.material);
        assert!(ke < 1e-14);
    }

    #[test]
    fn displacement_error_conventions() {
        let p = unit();
        let disc = Discretization::new(&MmsProblem::mesh(0.25), ElementChoice::Mini).unwrap();
        let mut st = p.exact_state(&disc, &disc.fluid_mesh, 0.0);
        st.eta.iter_mut().for_each(|x| *x *= 1.5);
        let a = mms_errors(&p, &disc, &disc.fluid_mesh, &st, ErrorConvention::AsPrinted).unwrap();
        let u = mms_errors(&p, &disc, &disc.fluid_mesh, &st, ErrorConvention::Unsquared).unwrap();
        let s = mms_errors(&p, &disc, &disc.fluid_mesh, &st, ErrorConvention::Squared).unwrap();
        assert!((a.e_eta - u.e_eta * u.e_eta).abs() < 1e-14);
        assert_eq!(a.e_f, u.e_f);
        assert!((s.e_f - u.e_f * u.e_f).abs() < 1e-14);
    }

    #[test]
    fn synthetic_rates() {
        let errs: Vec<f64> = (0..4).map(|k| 3.0 * 0.1 / 2f64.powi(k)).collect();
        for r in rates(&errs) {
            assert!((r - 1.0).abs() < 1e-9);
        }
        let row = |level, e: f64| ConvergenceRow {
            alpha: 10.0,
            level,
            h: 0.1,
            dt: 0.01,
            errors: Some(LevelErrors {
                e_eta: e,
                e_xi: e * e,
                e_f: e,
                e_ke: 0.0,
                e_sigma: 0.0,
            }),
            failure: None,
        };
        let t = ConvergenceTable {
            label: "synthetic".into(),
            convention: ErrorConvention::Unsquared,
            rows: vec![row(1, 0.05), row(0, 0.1), row(2, 0.025)],
        };
        assert_eq!(t.rates(10.0, ErrorField::Eta), vec![1.0, 1.0]);
        assert_eq!(t.rates(10.0, ErrorField::Xi), vec![2.0, 2.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(t.to_text().contains("1.000"));
    }

    #[test]
    fn alpha_formula() {
        assert!((alpha_heuristic(1.1, 0.1, 1e-4, 1e6, 0.3, 0.0, 0.0) - 1100.0).abs() < 1e-9);
        let big = alpha_heuristic(1.0, 1.0, 1e6, 1.0, 0.0, 1.0, 0.0);
        assert!((big - 4e6).abs() / 4e6 < 1e-5);
    }

    #[test]
    fn coarse_fixed_run_is_accurate() {
        let p = unit();
        let disc = Discretization::new(&MmsProblem::mesh(0.1), ElementChoice::Mini).unwrap();
        let sc = p.scheme(10.0, 0.01, 0.05, ElementChoice::Mini);
        let s = run_mms(&p, Arc::clone(&disc), sc).unwrap();
        let e = mms_errors(&p, &disc, s.fluid_mesh(), s.state(), ErrorConvention::Unsquared).unwrap();
        assert!(e.e_f < 0.2 && e.e_xi < 0.2 && e.e_eta < 0.3, "{e:?}");
    }
}
