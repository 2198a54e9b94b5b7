//! Regularized singular vector fields on ℝⁿ, the circle and the torus:
//! ε-nets and growth fits, mollifiers, per-ε flows, limits and association
//! verdicts.

pub mod epsilon;
pub mod error;
pub mod fields;
pub mod flow;
pub mod manifold;
pub mod mollifier;
pub mod quadrature;
pub mod verdict;
pub mod association;

pub use association::{AssocConfig, AssociationVerdict, NetFunction, Notion};
pub use epsilon::{
    classify_growth, make_epsilon_net, sigma, EpsilonNet, GrowthClass, GrowthKind, ScalingLaw,
};
pub use error::{Error, Result};
pub use mollifier::{build_bump, smoothed_heaviside, Bump, BumpCase, Comb, SmoothedStep};
pub use fields::{
    check_bounded_derivative, check_global_bound, check_linear_growth, check_logtype_derivative,
    marsden_field, torus_field, Condition, ConditionReport, SampleGrid, VectorFieldNet,
};
pub use manifold::{distance, lift, wrap, Point, Space, Tangent};
pub use verdict::Verdict;
