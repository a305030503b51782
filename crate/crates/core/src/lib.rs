//! Resilience (largest tolerable disturbance), effort (smallest input bound)
//! and their weighted trade-off for discrete-time control systems that must
//! satisfy a finite-horizon temporal specification.
//!
//! * [`exact`] solves linear time-varying plants with polytopic
//!   specifications through a Farkas / ℓ₁ reduction to linear programs.
//! * [`scenario`] handles nonlinear plants and controllers by sampling
//!   disturbances and bounding the violation probability of the result.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the common `f64` instantiation.

pub mod exact;
pub mod farkas;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod scenario;
pub mod spec;

pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type LtvSystem = model::LtvSystem<f64>;
pub type NonlinearSystem = model::NonlinearSystem<f64>;
pub type Plant = model::Plant<f64>;
pub type Controller = model::Controller<f64>;
pub type LinearFeedback = model::LinearFeedback<f64>;
pub type PolynomialFeedback = model::PolynomialFeedback<f64>;
pub type OpenLoopSequence = model::OpenLoopSequence<f64>;
pub type DisturbanceSequence = model::DisturbanceSequence<f64>;
pub type Trajectory = model::Trajectory<f64>;
pub type Region = spec::Region<f64>;
pub type TimedSets = spec::TimedSets<f64>;
pub type FarkasBlocks = farkas::FarkasBlocks<f64>;
pub type LinearProgram = lp::LinearProgram<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type MetricResult = exact::MetricResult<f64>;
pub type ParetoPoint = exact::ParetoPoint<f64>;
pub type ScenarioSet = scenario::ScenarioSet<f64>;
pub type ScenarioCertificate = scenario::ScenarioCertificate<f64>;
