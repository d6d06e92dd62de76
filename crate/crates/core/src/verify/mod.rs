//! Numerical verification of curvature identities and evolution equations.

pub mod assemble;
pub mod conformal;
pub mod dynamics;
pub mod integrator;
pub mod ladder;
pub mod report;
pub mod statics;

pub use assemble::{Assembly, Form, Reading, RicciSigns};
pub use report::{
    convergence_order, judge, Expectation, Order, ReportEntry, ResidualEntry, ResidualSeries, Status, Strictness,
    VerificationReport,
};
pub use dynamics::{
    check_connection_acceleration, check_evolution_ladder, check_family_evolution, check_global_evolution,
    check_local_evolution, DynamicLadder,
};
pub use conformal::conformal_residual;
pub use integrator::{check_integrator, check_surface_reduction};
pub use statics::check_static_identities;
