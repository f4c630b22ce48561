//! Exact uniform sampling from convex bodies with the proximal sampler.
//!
//! The chain alternates a Gaussian forward step `y ~ N(x, ηI)` with a
//! backward step drawn from the Gaussian `N(y, ηI)` restricted to the body,
//! the *restricted Gaussian oracle* (RGO). Three RGO backends are provided:
//!
//! * [`rgo::rgo_projection`]: rejection sampling around `proj_K(y)`, one
//!   projection-oracle call per invocation;
//! * [`rgo::rgo_separation`]: rejection sampling around an approximate
//!   projection computed by a cutting-plane solver ([`cutting_plane`]) that
//!   only queries a separation oracle;
//! * [`rgo::rgo_inandout`]: the membership-only baseline that may fail.
//!
//! Both rejection backends return points of the body with probability one.
//! Ball walk and Hit-and-Run ([`walks`]) are included as baselines.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, statistical
//! diagnostics and the command-line front-end live in the `convex-sampler`
//! crate.

#![no_std]

extern crate alloc;

pub mod bodies;
pub mod cutting_plane;
mod error;
pub mod linalg;
pub(crate) mod math;
pub mod rgo;
pub mod sampler;
pub mod walks;

pub use bodies::{BuiltinBody, Capabilities, ConvexBody, GeometrySummary, SeparationAnswer};
pub use cutting_plane::{CuttingPlaneResult, EllipsoidState};
pub use error::{Error, Result};
pub use rgo::{PotentialBundle, RgoOutcome, RgoSettings};
pub use sampler::{
    chain_rng, ChainRng, ChainState, Divergence, FailurePolicy, RgoBackend, SamplerConfig,
    SamplerReport, StepTelemetry, WarmStart,
};
