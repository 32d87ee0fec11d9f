//! Universal polarization of binary-input memoryless channels.
//!
//! * [`channels`]: binary-input DMCs, metrics, merging and degradation.
//! * [`transform`]: the two-channel kernels and the slow and general-rate
//!   recursions.
//! * [`bounds`]: capacity bounds for the upgraded slow channel.
//! * [`construction`]: transform plans and two-stage code specifications.
//! * [`codec`]: encoding and successive-cancellation decoding.
//! * [`analysis`]: per-position tracking and property checks.
//! * [`sim`]: Monte Carlo error-rate estimation.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, and the `F32` variants to `f32`.

pub mod analysis;
pub mod bounds;
pub mod channels;
pub mod codec;
pub mod construction;
pub mod error;
pub mod scalar;
pub mod sim;
pub mod transform;

pub use construction::{attach_fast_stage, build_general, build_rate_half, CodeSpec, TransformPlan};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use sim::{run_mc, SimConfig, SimResult};
pub use transform::{Budget, Kind};

pub type Channel = channels::Channel<f64>;
pub type OutputSymbol = channels::OutputSymbol<f64>;
pub type ChannelMetrics = channels::ChannelMetrics<f64>;
pub type BoundState = bounds::BoundState<f64>;
pub type LlrVector = codec::LlrVector<f64>;
pub type SlowPairState = transform::SlowPairState<f64>;
pub type GeneralRateState = transform::GeneralRateState<f64>;

pub type ChannelF32 = channels::Channel<f32>;
pub type OutputSymbolF32 = channels::OutputSymbol<f32>;
pub type ChannelMetricsF32 = channels::ChannelMetrics<f32>;
pub type BoundStateF32 = bounds::BoundState<f32>;
pub type LlrVectorF32 = codec::LlrVector<f32>;
