//! Transient-stability toolkit for a grid-following converter reduced to an
//! equivalent swing equation: adaptive integration (forward and reverse
//! time), Lyapunov seed sets, brute-force and time-limited region-of-
//! attraction estimation, adaptive boundary sampling, and fault assessment.

pub mod assess;
pub mod config;
pub mod export;
pub mod geom;
pub mod lyap;
pub mod mat2;
pub mod model;
pub mod ode;
pub mod params;
pub mod roa;
pub mod sampler;

pub use assess::{assess, clearing_windows, fault_trajectory, AssessmentResult, Verdict};
pub use config::{Document, RunConfig};
pub use geom::{hausdorff_distance, BoundaryCurve, CurveMetadata};
pub use lyap::{build_seed, LyapunovSeed};
pub use mat2::Mat2;
pub use model::{coefficients, equilibrium, jacobian, rhs};
pub use ode::{integrate_forward, integrate_reverse, IntegratorConfig, Trajectory};
pub use params::{SatMode, Scenario, State, SystemParams};
pub use roa::{estimate_tlroa, forward_roa, sweep_tlroa, ClassifiedGrid, GridSpec, TlroaEstimate};
pub use sampler::{run_sampler, LossKind, SampleSet, SamplerConfig};
