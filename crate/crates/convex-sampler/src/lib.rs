//! File formats, statistical diagnostics, multi-chain execution and the
//! command-line front-end for [`convex_sampler_core`].
//!
//! ```no_run
//! use convex_sampler::formats::parse_body;
//! use convex_sampler::runner::run_chains;
//! use convex_sampler_core::SamplerConfig;
//!
//! let body = parse_body(r#"{"type": "ball", "d": 2, "radius": 2.0}"#).unwrap();
//! let mut config = SamplerConfig::for_dim(2);
//! config.iterations = 100;
//! let run = run_chains(&body, &config, 4).unwrap();
//! println!("{} records", run.records().count());
//! ```

pub mod cli;
pub mod diagnostics;
pub mod formats;
pub mod runner;

pub use convex_sampler_core as sampler_core;
