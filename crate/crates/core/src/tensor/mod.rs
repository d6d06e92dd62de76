//! Tensor calculus on chart grids: metric inversion, connection, curvature,
//! covariant derivatives and the quadratic curvature expressions.

pub mod connection;
pub mod covariant;
pub mod curvature;
pub mod metric;

pub use connection::{
    christoffel, connection_acceleration, connection_velocity, connection_velocity_lowered,
    ConnectionAccelField, ConnectionField, ConnectionVelocityField,
};
pub use covariant::{
    covariant_derivative, covariant_derivative_along, rough_laplacian, second_covariant_derivative,
};
pub use curvature::{
    q_parts_at, q_tensor, quad_b_at, quad_contraction_b, ricci_and_scalar, riemann,
    sectional_curvature, CurvatureBundle, QTensorField,
};
pub use metric::{inverse_metric, MetricField, VelocityField, DEFAULT_SPD_FLOOR};
