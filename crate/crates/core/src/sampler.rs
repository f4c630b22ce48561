//! The alternating sampling loop: `y ~ N(x, ηI)`, then `x' ~ N(y, ηI)|_K`
//! through the configured restricted Gaussian oracle.

use alloc::vec::Vec;
use core::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bodies::{ConvexBody, GeometrySummary};
use crate::linalg;
use crate::math;
use crate::rgo::{self, RgoSettings};
use crate::{Error, Result};

/// Per-chain random stream.
pub type ChainRng = ChaCha8Rng;

/// Independent, reproducible stream for chain `chain` of a run seeded with
/// `seed` (ChaCha stream selection).
pub fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// `η = 1/d²`.
pub fn default_eta(dim: usize) -> f64 {
    let d = dim as f64;
    1.0 / (d * d)
}

/// Default In-and-Out attempt cap `ceil(d² ln d) + 10`.
pub fn default_inandout_cap(dim: usize) -> u64 {
    let d = dim as f64;
    math::ceil(d * d * math::ln(d)) as u64 + 10
}

#[derive(Debug, Clone, PartialEq)]
pub enum WarmStart {
    /// Exact uniform draw from the body (`M = 1`); needs the exact-uniform
    /// capability.
    ExactUniform,
    /// Uniform on `B(0,1) ⊆ K`; warm with `M = vol(K)/vol(B(0,1)) ≤ R^d`.
    UnitBallUniform,
    /// Deterministic start (a point mass, not warm).
    FixedPoint(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    Renyi,
    ChiSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgoBackend {
    Projection,
    Separation,
    InAndOut,
}

impl RgoBackend {
    pub fn name(self) -> &'static str {
        match self {
            RgoBackend::Projection => "projection",
            RgoBackend::Separation => "separation",
            RgoBackend::InAndOut => "inandout",
        }
    }
}

/// What the In-and-Out backend does when every attempt misses the body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailurePolicy {
    /// Stop the chain with [`Error::InAndOutFailure`].
    Halt,
    /// Redraw the forward point from the current iterate and try again.
    Restart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub eta: f64,
    pub iterations: usize,
    pub warm_start: WarmStart,
    /// Known warmness `M ≥ 1` of the start distribution, if any. Exact-uniform
    /// starts always count as `M = 1`.
    pub warmness: Option<f64>,
    pub epsilon: f64,
    pub renyi_order: f64,
    pub divergence: Divergence,
    /// Constant `c` multiplying the iteration schedule.
    pub schedule_constant: f64,
    pub backend: RgoBackend,
    pub rgo: RgoSettings,
    /// `None` means [`default_inandout_cap`].
    pub inandout_cap: Option<u64>,
    pub inandout_policy: FailurePolicy,
    pub seed: u64,
}

impl SamplerConfig {
    /// Defaults for dimension `d`: `η = 1/d²`, exact-uniform start,
    /// projection backend, `ε = 0.1`, `q = 2`, χ² schedule.
    pub fn for_dim(dim: usize) -> Self {
        SamplerConfig {
            eta: default_eta(dim),
            iterations: 1,
            warm_start: WarmStart::ExactUniform,
            warmness: None,
            epsilon: 0.1,
            renyi_order: 2.0,
            divergence: Divergence::ChiSquared,
            schedule_constant: 1.0,
            backend: RgoBackend::Projection,
            rgo: RgoSettings::default(),
            inandout_cap: None,
            inandout_policy: FailurePolicy::Halt,
            seed: 0,
        }
    }

    /// Warmness the start distribution is known to have.
    pub fn known_warmness(&self) -> Option<f64> {
        match self.warm_start {
            WarmStart::ExactUniform => Some(1.0),
            _ => self.warmness,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig("eta must be positive and finite"));
        }
        if !(self.renyi_order >= 1.0) {
            return Err(Error::InvalidConfig("Renyi order q must be at least 1"));
        }
        if self.warmness.is_some_and(|m| !(m >= 1.0)) {
            return Err(Error::InvalidConfig("warmness M must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if !(self.schedule_constant > 0.0) {
            return Err(Error::InvalidConfig("schedule constant must be positive"));
        }
        Ok(())
    }

    /// Checks the configuration against the body's oracles.
    pub fn validate_for<B: ConvexBody + ?Sized>(&self, body: &B) -> Result<()> {
        self.validate()?;
        let caps = body.capabilities();
        match self.backend {
            RgoBackend::Projection if !caps.projection => {
                return Err(Error::CapabilityMissing("projection"))
            }
            RgoBackend::Separation if !caps.separation => {
                return Err(Error::CapabilityMissing("separation"))
            }
            RgoBackend::InAndOut if !caps.membership => {
                return Err(Error::CapabilityMissing("membership"))
            }
            _ => {}
        }
        match &self.warm_start {
            WarmStart::ExactUniform if !caps.exact_uniform => {
                Err(Error::CapabilityMissing("exact-uniform"))
            }
            WarmStart::FixedPoint(x) if x.len() != body.dim() => Err(Error::DimensionMismatch {
                expected: body.dim(),
                got: x.len(),
            }),
            WarmStart::FixedPoint(x) if !body.contains(x)? => Err(Error::InvalidConfig(
                "fixed start point lies outside the body",
            )),
            _ => Ok(()),
        }
    }
}

/// `ln M` used by the schedule: the known warmness, else the bound
/// `ln(R^d)` for unit-ball starts. Point-mass starts have no finite `M`.
fn schedule_log_warmness(geometry: &GeometrySummary, config: &SamplerConfig) -> Result<f64> {
    if let Some(m) = config.known_warmness() {
        return Ok(math::ln(m));
    }
    match config.warm_start {
        WarmStart::UnitBallUniform => Ok(geometry.dim as f64 * math::ln(geometry.circumradius)),
        _ => Err(Error::InvalidConfig(
            "warmness of a point-mass start is unbounded; set the iteration count explicitly",
        )),
    }
}

/// Iteration count reaching accuracy `ε`:
///
/// * Rényi: `ceil(c d² C_LSI q ln(2 ln M / ε))`;
/// * χ²: `ceil(c d² C_PI ln(2 (M² + 1) / ε))`;
///
/// with `C_LSI = (2R)²` and `C_PI = (2R)² ln d`. Never less than 1.
pub fn default_iterations(geometry: &GeometrySummary, config: &SamplerConfig) -> Result<usize> {
    config.validate()?;
    let log_m = schedule_log_warmness(geometry, config)?;
    let d = geometry.dim as f64;
    let c = config.schedule_constant;
    let k = match config.divergence {
        Divergence::Renyi => {
            if !(log_m > 0.0) {
                return Err(Error::InvalidConfig(
                    "Renyi schedule needs warmness M > 1 (ln M > 0)",
                ));
            }
            c * d
                * d
                * geometry.lsi_heuristic
                * config.renyi_order
                * math::ln(2.0 * log_m / config.epsilon)
        }
        Divergence::ChiSquared => {
            // ln(M² + 1) evaluated without forming M²
            let log_m2_plus_1 = 2.0 * log_m + math::ln(1.0 + math::exp(-2.0 * log_m));
            c * d
                * d
                * geometry.pi_heuristic
                * (math::ln(2.0) + log_m2_plus_1 - math::ln(config.epsilon))
        }
    };
    Ok(if k.is_finite() && k >= 1.0 {
        math::ceil(k) as usize
    } else {
        1
    })
}

/// Current iterate, last forward point and random stream of one chain.
#[derive(Debug, Clone)]
pub struct ChainState<R = ChainRng> {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub iteration: usize,
    pub rng: R,
}

/// Oracle usage of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepTelemetry {
    pub rejections: u64,
    pub projection_calls: u64,
    pub separation_calls: u64,
    pub membership_calls: u64,
    pub radial_envelope_rejections: u64,
    pub cutting_plane_iterations: u64,
    /// Forward points redrawn by the In-and-Out restart policy.
    pub restarts: u64,
}

impl StepTelemetry {
    pub fn oracle_calls(&self) -> u64 {
        self.projection_calls + self.separation_calls + self.membership_calls
    }
}

/// Sums over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TelemetryTotals {
    pub iterations: u64,
    pub total_rejections: u64,
    pub max_rejections: u64,
    pub projection_calls: u64,
    pub separation_calls: u64,
    pub membership_calls: u64,
    pub radial_envelope_rejections: u64,
    pub cutting_plane_iterations: u64,
    pub restarts: u64,
}

impl TelemetryTotals {
    pub fn absorb(&mut self, t: &StepTelemetry) {
        self.iterations += 1;
        self.total_rejections += t.rejections;
        self.max_rejections = self.max_rejections.max(t.rejections);
        self.projection_calls += t.projection_calls;
        self.separation_calls += t.separation_calls;
        self.membership_calls += t.membership_calls;
        self.radial_envelope_rejections += t.radial_envelope_rejections;
        self.cutting_plane_iterations += t.cutting_plane_iterations;
        self.restarts += t.restarts;
    }

    pub fn merge(&mut self, other: &TelemetryTotals) {
        self.iterations += other.iterations;
        self.total_rejections += other.total_rejections;
        self.max_rejections = self.max_rejections.max(other.max_rejections);
        self.projection_calls += other.projection_calls;
        self.separation_calls += other.separation_calls;
        self.membership_calls += other.membership_calls;
        self.radial_envelope_rejections += other.radial_envelope_rejections;
        self.cutting_plane_iterations += other.cutting_plane_iterations;
        self.restarts += other.restarts;
    }

    pub fn mean_rejections(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.total_rejections as f64 / self.iterations as f64
        }
    }

    pub fn oracle_calls(&self) -> u64 {
        self.projection_calls + self.separation_calls + self.membership_calls
    }
}

/// Iterates and telemetry of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerReport {
    /// Warm-start point followed by the `k` iterates.
    pub samples: Vec<Vec<f64>>,
    /// One entry per outer iteration.
    pub telemetry: Vec<StepTelemetry>,
    pub totals: TelemetryTotals,
    pub backend: RgoBackend,
    pub eta: f64,
    pub dim: usize,
    /// Warmness of the start, when known.
    pub warmness: Option<f64>,
    /// Filled in by callers that have a clock.
    pub wall_clock: Option<Duration>,
}

/// Draws the start point prescribed by the configuration.
pub fn warm_start<B, R>(body: &B, config: &SamplerConfig, rng: &mut R) -> Result<Vec<f64>>
where
    B: ConvexBody + ?Sized,
    R: Rng,
{
    match &config.warm_start {
        WarmStart::ExactUniform => body.exact_uniform(rng),
        WarmStart::UnitBallUniform => Ok(linalg::uniform_in_ball(body.dim(), 1.0, rng)),
        WarmStart::FixedPoint(x) => Ok(x.clone()),
    }
}

fn forward_point<R: Rng + ?Sized>(x: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sigma * z
        })
        .collect()
}

/// One outer iteration: forward Gaussian step, then the backward RGO step.
pub fn asf_step<B, R>(
    state: &mut ChainState<R>,
    body: &B,
    config: &SamplerConfig,
) -> Result<StepTelemetry>
where
    B: ConvexBody + ?Sized,
    R: Rng,
{
    let sigma = math::sqrt(config.eta);
    let mut y = forward_point(&state.x, sigma, &mut state.rng);
    let mut telemetry = StepTelemetry::default();
    let next = match config.backend {
        RgoBackend::Projection => {
            let out = rgo::rgo_projection(body, &y, config.eta, &config.rgo, &mut state.rng)?;
            telemetry.rejections = out.rejections;
            telemetry.projection_calls = out.projection_calls;
            telemetry.membership_calls = out.membership_calls;
            out.sample
        }
        RgoBackend::Separation => {
            let out = rgo::rgo_separation(body, &y, config.eta, &config.rgo, &mut state.rng)?;
            telemetry.rejections = out.rejections;
            telemetry.separation_calls = out.separation_calls;
            telemetry.membership_calls = out.membership_calls;
            telemetry.radial_envelope_rejections = out.radial_envelope_rejections;
            telemetry.cutting_plane_iterations = out.cutting_plane_iterations;
            out.sample
        }
        RgoBackend::InAndOut => {
            let cap = config
                .inandout_cap
                .unwrap_or_else(|| default_inandout_cap(body.dim()));
            loop {
                let out = rgo::rgo_inandout(body, &y, config.eta, cap, &mut state.rng)?;
                telemetry.membership_calls += out.attempts;
                match out.sample {
                    Some(x) => {
                        telemetry.rejections += out.attempts - 1;
                        break x;
                    }
                    None => {
                        telemetry.rejections += out.attempts;
                        if config.inandout_policy == FailurePolicy::Halt {
                            return Err(Error::InAndOutFailure {
                                attempts: out.attempts,
                            });
                        }
                        telemetry.restarts += 1;
                        if telemetry.restarts >= config.rgo.rejection_cap {
                            return Err(Error::RejectionBudgetExceeded {
                                cap: config.rgo.rejection_cap,
                            });
                        }
                        y = forward_point(&state.x, sigma, &mut state.rng);
                    }
                }
            }
        }
    };
    state.x = next;
    state.y = Some(y);
    state.iteration += 1;
    Ok(telemetry)
}

/// Runs chain `chain` of a run, handing every iterate to `observe` instead of
/// storing it. Returns the start point and the telemetry totals.
pub fn drive_chain<B, F>(
    body: &B,
    config: &SamplerConfig,
    chain: u64,
    mut observe: F,
) -> Result<(Vec<f64>, TelemetryTotals)>
where
    B: ConvexBody + ?Sized,
    F: FnMut(usize, &[f64], &StepTelemetry),
{
    config.validate_for(body)?;
    let mut rng = chain_rng(config.seed, chain);
    let start = warm_start(body, config, &mut rng)?;
    let mut state = ChainState {
        x: start.clone(),
        y: None,
        iteration: 0,
        rng,
    };
    let mut totals = TelemetryTotals::default();
    for _ in 0..config.iterations {
        let t = asf_step(&mut state, body, config)?;
        totals.absorb(&t);
        observe(state.iteration, &state.x, &t);
    }
    Ok((start, totals))
}

/// Runs chain `chain` and keeps every iterate.
pub fn run_chain_indexed<B>(body: &B, config: &SamplerConfig, chain: u64) -> Result<SamplerReport>
where
    B: ConvexBody + ?Sized,
{
    let mut samples = Vec::with_capacity(config.iterations + 1);
    let mut telemetry = Vec::with_capacity(config.iterations);
    let (start, totals) = drive_chain(body, config, chain, |_, x, t| {
        samples.push(x.to_vec());
        telemetry.push(*t);
    })?;
    samples.insert(0, start);
    Ok(SamplerReport {
        samples,
        telemetry,
        totals,
        backend: config.backend,
        eta: config.eta,
        dim: body.dim(),
        warmness: config.known_warmness(),
        wall_clock: None,
    })
}

/// Runs chain 0 of the configured seed.
pub fn run_chain<B: ConvexBody + ?Sized>(
    body: &B,
    config: &SamplerConfig,
) -> Result<SamplerReport> {
    run_chain_indexed(body, config, 0)
}
