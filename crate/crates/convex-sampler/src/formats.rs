//! Body files (JSON), sample records (JSONL) and run summaries.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use convex_sampler_core::bodies::{AxisBox, Ball, BuiltinBody, Ellipsoid, Polytope};
use convex_sampler_core::sampler::{StepTelemetry, TelemetryTotals};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("malformed body file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("body declares d = {declared} but its data has dimension {actual}")]
    Dimension { declared: usize, actual: usize },
    #[error("polytope rows must all have length d")]
    RaggedMatrix,
    #[error(transparent)]
    Body(#[from] convex_sampler_core::Error),
}

/// On-disk description of a built-in body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum BodySpec {
    Ball {
        d: usize,
        radius: f64,
    },
    Box {
        d: usize,
        bounds: Vec<[f64; 2]>,
    },
    Polytope {
        d: usize,
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        circumradius: f64,
    },
    Ellipsoid {
        d: usize,
        semi_axes: Vec<f64>,
    },
}

fn check_len(declared: usize, actual: usize) -> Result<(), FormatError> {
    if declared == actual {
        Ok(())
    } else {
        Err(FormatError::Dimension { declared, actual })
    }
}

impl BodySpec {
    /// Builds and validates the body. Fails with the core `A1Violation`
    /// error when the body does not contain the unit ball.
    pub fn build(&self) -> Result<BuiltinBody, FormatError> {
        let body: BuiltinBody = match self {
            BodySpec::Ball { d, radius } => Ball::new(*d, *radius)?.into(),
            BodySpec::Box { d, bounds } => {
                check_len(*d, bounds.len())?;
                AxisBox::new(bounds.clone())?.into()
            }
            BodySpec::Polytope {
                d,
                a,
                b,
                circumradius,
            } => {
                check_len(a.len(), b.len())?;
                if a.iter().any(|row| row.len() != *d) {
                    return Err(FormatError::RaggedMatrix);
                }
                Polytope::new(a.clone(), b.clone(), *circumradius)?.into()
            }
            BodySpec::Ellipsoid { d, semi_axes } => {
                check_len(*d, semi_axes.len())?;
                Ellipsoid::new(semi_axes.clone())?.into()
            }
        };
        Ok(body)
    }
}

pub fn parse_body(text: &str) -> Result<BuiltinBody, FormatError> {
    let spec: BodySpec = serde_json::from_str(text)?;
    spec.build()
}

pub fn load_body(path: &Path) -> Result<BuiltinBody, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_body(&text)
}

/// One line of the sample stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub chain: u64,
    pub iter: usize,
    pub x: Vec<f64>,
    pub rejections: u64,
    pub proj_calls: u64,
    pub sep_calls: u64,
    pub mem_calls: u64,
}

impl SampleRecord {
    pub fn new(chain: u64, iter: usize, x: &[f64], t: &StepTelemetry) -> Self {
        SampleRecord {
            chain,
            iter,
            x: x.to_vec(),
            rejections: t.rejections,
            proj_calls: t.projection_calls,
            sep_calls: t.separation_calls,
            mem_calls: t.membership_calls,
        }
    }
}

pub fn write_jsonl<W: Write>(out: &mut W, records: &[SampleRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<SampleRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalsJson {
    pub iterations: u64,
    pub rejections: u64,
    pub max_rejections: u64,
    pub mean_rejections: f64,
    pub proj_calls: u64,
    pub sep_calls: u64,
    pub mem_calls: u64,
    pub oracle_calls: u64,
    pub radial_envelope_rejections: u64,
    pub cutting_plane_iterations: u64,
    pub restarts: u64,
}

impl From<&TelemetryTotals> for TotalsJson {
    fn from(t: &TelemetryTotals) -> Self {
        TotalsJson {
            iterations: t.iterations,
            rejections: t.total_rejections,
            max_rejections: t.max_rejections,
            mean_rejections: t.mean_rejections(),
            proj_calls: t.projection_calls,
            sep_calls: t.separation_calls,
            mem_calls: t.membership_calls,
            oracle_calls: t.oracle_calls(),
            radial_envelope_rejections: t.radial_envelope_rejections,
            cutting_plane_iterations: t.cutting_plane_iterations,
            restarts: t.restarts,
        }
    }
}

/// Telemetry summary written next to the sample stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub body: String,
    pub dim: usize,
    pub backend: String,
    pub eta: f64,
    pub iterations: usize,
    pub chains: u64,
    pub seed: u64,
    /// `null` when the warmness of the start is unknown.
    pub warmness: Option<f64>,
    pub totals: TotalsJson,
    pub per_chain: Vec<TotalsJson>,
    pub wall_clock_seconds: f64,
}
