//! Finite-element machinery: quadrature, spaces, assembly, norms and the
//! interface traction.

pub mod assembly;
pub mod norms;
pub mod quadrature;
pub mod space;
pub mod traction;

pub use assembly::{
    assemble_ale_convection, assemble_divergence, assemble_elasticity, assemble_fluid_viscous,
    assemble_interface_mass, assemble_mass, assemble_neumann_load, PatternAccumulator, Sink,
};
pub use norms::{interface_l2, l2_error, l2_norm, relative_error, s_error, s_norm, ErrorConvention, NormError};
pub use space::{Family, FeFunction, FeSpace, SpaceError};
pub use traction::{InterfaceDofs, InterfaceFields, Side, TraceError, TractionTrace};
