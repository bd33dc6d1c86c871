//! Physical and numerical parameters shared by all solvers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{ErrorConvention, Family};
use crate::mesh::{generate_channel_meshes, InterfaceMap, Mesh, MeshError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid {name} = {value}: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn require(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ConfigError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid { name, value, reason })
    }
}

/// Densities (g/cm^3), viscosity (poise), Lame constants (dyne/cm^2) and the
/// spring coefficient `gamma` (dyne/cm^4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    pub rho_f: f64,
    pub mu_f: f64,
    pub rho_s: f64,
    pub mu_s: f64,
    pub lambda_s: f64,
    pub gamma: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::benchmark()
    }
}

impl MaterialParams {
    /// All coefficients one, no spring term (manufactured-solution tests).
    pub fn unit() -> Self {
        Self {
            rho_f: 1.0,
            mu_f: 1.0,
            rho_s: 1.0,
            mu_s: 1.0,
            lambda_s: 1.0,
            gamma: 0.0,
        }
    }

    /// Compliant-channel values used by the pressure-pulse benchmark.
    pub fn benchmark() -> Self {
        Self {
            rho_f: 1.0,
            mu_f: 0.035,
            rho_s: 1.1,
            mu_s: 5.75e5,
            lambda_s: 1.7e6,
            gamma: 4e6,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        require("rho_f", self.rho_f, self.rho_f > 0.0, "must be positive")?;
        require("mu_f", self.mu_f, self.mu_f > 0.0, "must be positive")?;
        require("rho_s", self.rho_s, self.rho_s > 0.0, "must be positive")?;
        require("mu_s", self.mu_s, self.mu_s > 0.0, "must be positive")?;
        require("lambda_s", self.lambda_s, self.lambda_s >= 0.0, "must be non-negative")?;
        require("gamma", self.gamma, self.gamma >= 0.0, "must be non-negative")
    }
}

/// Velocity/pressure pair; the solid uses the velocity family's trace-compatible space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementChoice {
    /// P1-bubble / P1 fluid, P1 solid.
    #[default]
    Mini,
    /// P2 / P1 fluid, P2 solid.
    TaylorHood,
}

impl ElementChoice {
    pub fn velocity_family(self) -> Family {
        match self {
            ElementChoice::Mini => Family::P1Bubble,
            ElementChoice::TaylorHood => Family::P2,
        }
    }

    pub fn solid_family(self) -> Family {
        match self {
            ElementChoice::Mini => Family::P1,
            ElementChoice::TaylorHood => Family::P2,
        }
    }

    /// Polynomial order `k` entering the time-step condition.
    pub fn order(self) -> f64 {
        match self {
            ElementChoice::Mini => 1.0,
            ElementChoice::TaylorHood => 2.0,
        }
    }
}

/// Condition on the inlet and outlet sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryVariant {
    /// `sigma n = -p n` with the prescribed section pressures.
    #[default]
    NeumannPressure,
    /// `p + rho/2 |v|^2` prescribed and `v x n = 0`.
    DynamicPressure,
    /// Homogeneous velocity (manufactured-solution tests).
    NoSlip,
}

/// Condition on the bottom fluid wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WallCondition {
    #[default]
    NoSlip,
    Neumann,
    /// Zero normal velocity, free tangential slip (axis of a symmetric channel).
    Symmetry,
}

/// Condition on the solid's external (top) boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolidTop {
    #[default]
    TractionFree,
    Clamped,
}

/// Treatment of the ALE convection term on moving domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvectionForm {
    /// Stokes: no convection.
    None,
    /// `rho ((a . grad) v, phi)` on the midpoint domain.
    Standard,
    /// Skew-symmetrized form with the domain-divergence and boundary terms, so
    /// the discrete energy balance holds without assuming a divergence-free
    /// advecting field.
    #[default]
    Skew,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub alpha: f64,
    pub dt: f64,
    pub t_final: f64,
    pub element: ElementChoice,
    pub inlet_outlet: BoundaryVariant,
    pub wall: WallCondition,
    pub solid_top: SolidTop,
    pub convection: ConvectionForm,
    /// Inverse-inequality constant used by the time-step diagnostic.
    pub c_ti_estimate: f64,
    pub error_convention: ErrorConvention,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            alpha: 100.0,
            dt: 1e-5,
            t_final: 0.012,
            element: ElementChoice::Mini,
            inlet_outlet: BoundaryVariant::NeumannPressure,
            wall: WallCondition::Symmetry,
            solid_top: SolidTop::TractionFree,
            convection: ConvectionForm::Skew,
            c_ti_estimate: 1.0,
            error_convention: ErrorConvention::default(),
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        require("alpha", self.alpha, self.alpha > 0.0, "must be positive")?;
        require("dt", self.dt, self.dt > 0.0, "must be positive")?;
        require(
            "t_final",
            self.t_final,
            self.t_final >= self.dt * (1.0 - 1e-9),
            "must be at least dt",
        )?;
        require("c_ti_estimate", self.c_ti_estimate, self.c_ti_estimate > 0.0, "must be positive")
    }

    /// Number of steps to reach `t_final` (rounded to the nearest integer).
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    /// Right side of the time-step condition `dt <= rho_F h / (alpha C k^2)`.
    pub fn dt_bound(&self, rho_f: f64, h: f64) -> f64 {
        let k = self.element.order();
        rho_f * h / (self.alpha * self.c_ti_estimate * k * k)
    }
}

/// Channel geometry and structured mesh resolution (lengths in cm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshParams {
    pub length: f64,
    pub fluid_height: f64,
    pub solid_height: f64,
    pub nx: usize,
    pub ny_fluid: usize,
    pub ny_solid: usize,
}

impl Default for MeshParams {
    /// 7500 fluid and 1200 solid triangles on the benchmark channel.
    fn default() -> Self {
        Self {
            length: 6.0,
            fluid_height: 0.5,
            solid_height: 0.1,
            nx: 150,
            ny_fluid: 25,
            ny_solid: 4,
        }
    }
}

impl MeshParams {
    /// Unit square split into a fluid half below a solid half, cell size `h`.
    pub fn unit_square(h: f64) -> Self {
        let nx = (1.0 / h).round() as usize;
        Self {
            length: 1.0,
            fluid_height: 0.5,
            solid_height: 0.5,
            nx,
            ny_fluid: nx / 2,
            ny_solid: nx / 2,
        }
    }

    pub fn generate(&self) -> Result<(Mesh, Mesh, InterfaceMap), MeshError> {
        generate_channel_meshes(
            self.length,
            self.fluid_height,
            self.solid_height,
            self.nx,
            self.ny_fluid,
            self.ny_solid,
        )
    }

    /// Horizontal cell size.
    pub fn h(&self) -> f64 {
        self.length / self.nx as f64
    }
}

/// Raised-cosine inlet pressure pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseInflow {
    pub p_max: f64,
    pub t_max: f64,
}

impl Default for PulseInflow {
    fn default() -> Self {
        Self {
            p_max: 1.333e4,
            t_max: 0.03,
        }
    }
}

impl PulseInflow {
    pub fn validate(&self) -> Result<(), ConfigError> {
        require("p_max", self.p_max, self.p_max >= 0.0, "must be non-negative")?;
        require("t_max", self.t_max, self.t_max > 0.0, "must be positive")
    }
}

/// `p_max/2 (1 - cos(2 pi t / t_max))` while `t <= t_max`, zero afterwards.
pub fn pulse_pressure(t: f64, pulse: &PulseInflow) -> f64 {
    if (0.0..=pulse.t_max).contains(&t) {
        0.5 * pulse.p_max * (1.0 - (2.0 * std::f64::consts::PI * t / pulse.t_max).cos())
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_values() {
        let p = PulseInflow::default();
        assert!((pulse_pressure(0.015, &p) - 1.333e4).abs() < 1e-9);
        assert_eq!(pulse_pressure(0.0, &p), 0.0);
        assert!((pulse_pressure(0.0075, &p) - 6.665e3).abs() < 1e-9);
        assert_eq!(pulse_pressure(0.05, &p), 0.0);
    }

    #[test]
    fn validation() {
        let s = SchemeConfig {
            alpha: -1.0,
            ..Default::default()
        };
        assert!(matches!(s.validate(), Err(ConfigError::Invalid { name: "alpha", .. })));
        assert!(SchemeConfig::default().validate().is_ok());
        let m = MaterialParams {
            mu_s: 0.0,
            ..MaterialParams::unit()
        };
        assert!(m.validate().is_err());
        assert_eq!(SchemeConfig::default().n_steps(), 1200);
    }

    #[test]
    fn benchmark_mesh_counts() {
        let (f, s, map) = MeshParams::default().generate().unwrap();
        assert_eq!(f.n_triangles(), 7500);
        assert_eq!(s.n_triangles(), 1200);
        assert_eq!(map.len(), 151);
    }

    #[test]
    fn time_step_bound() {
        let s = SchemeConfig {
            alpha: 10.0,
            element: ElementChoice::TaylorHood,
            ..Default::default()
        };
        assert!((s.dt_bound(1.0, 0.1) - 0.1 / 40.0).abs() < 1e-15);
    }
}
