//! Least-squares reconstruction of Γ(t) = S(t)V and attitude estimation.

pub mod estimate;
pub mod reconstruct;

pub use estimate::{
    assemble_gm, attitude_report, estimate_attitude_blind, estimate_attitude_known, estimate_attitudes, AttitudeEstimate,
    AttitudeMode, AttitudeOptions, GMatrix, RealizedSnapshots,
};
pub use reconstruct::{
    estimate_gamma, gamma_series, q_matrix, q_matrix_fft, q_series, xi_matrix, xi_matrix_quadrature, GammaSeries, QMatrix,
    QPath, XiKind, XiMatrix,
};
