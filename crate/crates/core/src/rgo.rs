//! Restricted Gaussian oracles: samplers for `N(y, ηI)` conditioned on the
//! body.
//!
//! Both rejection backends draw from a proposal concentrated near
//! `argmin_K ‖x − y‖` and accept with probability `exp(P(X) − Θ(X))`, where
//! `Θ(x) = ‖x − y‖²/(2η)` on `K` and `+∞` outside, and `P ≤ Θ` is a
//! potential whose exponential is the (unnormalized) proposal density.
//! Points outside the body are never accepted. All acceptance tests run in
//! log space.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bodies::ConvexBody;
use crate::cutting_plane::minimize_quadratic;
use crate::linalg::{self, dist, dist_sq, dot};
use crate::math;
use crate::{Error, Result};

pub const DEFAULT_REJECTION_CAP: u64 = 1_000_000;

/// Knobs shared by the rejection backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgoSettings {
    /// Hard cap on proposals per invocation (and on envelope proposals in the
    /// radial sampler).
    pub rejection_cap: u64,
    /// Optimality gap requested from the cutting-plane solver; `None` means
    /// `1/d`. Larger values would void the `P₂ ≤ Θ` guarantee and are refused.
    pub gap_target: Option<f64>,
}

impl Default for RgoSettings {
    fn default() -> Self {
        RgoSettings {
            rejection_cap: DEFAULT_REJECTION_CAP,
            gap_target: None,
        }
    }
}

/// Accepted sample plus per-invocation oracle telemetry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RgoOutcome {
    pub sample: Vec<f64>,
    /// Rejected proposals before the accepted one.
    pub rejections: u64,
    pub projection_calls: u64,
    pub separation_calls: u64,
    pub membership_calls: u64,
    pub radial_envelope_rejections: u64,
    pub cutting_plane_iterations: u64,
}

/// The potentials `Θ ≥ P₁ ≥ P₂ ≥ P₃` evaluated at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialBundle {
    /// `Θ(x) = ‖x − y‖²/(2η)` when `x ∈ K`; `None` stands for `+∞`.
    pub theta: Option<f64>,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl PotentialBundle {
    /// `Θ ≥ P₁ ≥ P₂ ≥ P₃` up to `slack`.
    pub fn is_ordered(&self, slack: f64) -> bool {
        self.theta.map_or(true, |t| t + slack >= self.p1)
            && self.p1 + slack >= self.p2
            && self.p2 + slack >= self.p3
    }
}

/// Evaluates the four potentials at `x` for the target point `y`, the
/// cutting-plane output `xhat` and the exact projection `proj`.
pub fn potentials(
    x: &[f64],
    y: &[f64],
    xhat: &[f64],
    proj: &[f64],
    eta: f64,
    dim: usize,
    in_body: bool,
) -> PotentialBundle {
    let two_eta = 2.0 * eta;
    let d = dim as f64;
    let b = math::sqrt(2.0 * eta / d);
    let x_xhat = dist(x, xhat);
    let y_proj = dist(y, proj);

    let p1 = (dist_sq(x, proj) + y_proj * y_proj) / two_eta;
    let p2 = p2_potential(x_xhat, dist(xhat, y), eta, dim);
    let p3 = ((x_xhat - b) * (x_xhat - b) + (y_proj - 2.0 * b) * (y_proj - 2.0 * b)
        - 32.0 * eta / d)
        / two_eta;
    PotentialBundle {
        theta: in_body.then(|| dist_sq(x, y) / two_eta),
        p1,
        p2,
        p3,
    }
}

/// `P₂` as a function of `‖x − x̂‖` and `‖x̂ − y‖`.
fn p2_potential(x_xhat: f64, xhat_y: f64, eta: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let b = math::sqrt(2.0 * eta / d);
    (x_xhat * x_xhat + xhat_y * xhat_y - 2.0 * b * (x_xhat + xhat_y) - 12.0 * eta / d) / (2.0 * eta)
}

/// Log acceptance probability of the projection backend,
/// `−⟨x − proj, proj − y⟩ / η`, or `None` (probability 0) outside `K`.
pub fn projection_log_ratio(
    x: &[f64],
    proj: &[f64],
    y: &[f64],
    eta: f64,
    in_body: bool,
) -> Option<f64> {
    if !in_body {
        return None;
    }
    let mut inner = 0.0;
    for ((xi, pi), yi) in x.iter().zip(proj).zip(y) {
        inner += (xi - pi) * (pi - yi);
    }
    Some(-inner / eta)
}

/// Log acceptance probability of the separation backend, `P₂(x) − Θ(x)`, or
/// `None` outside `K`.
pub fn separation_log_ratio(
    x: &[f64],
    y: &[f64],
    xhat: &[f64],
    eta: f64,
    dim: usize,
    in_body: bool,
) -> Option<f64> {
    if !in_body {
        return None;
    }
    Some(p2_potential(dist(x, xhat), dist(xhat, y), eta, dim) - dist_sq(x, y) / (2.0 * eta))
}

fn accept<R: Rng + ?Sized>(log_ratio: Option<f64>, rng: &mut R) -> bool {
    match log_ratio {
        None => false,
        Some(lr) => {
            let u: f64 = rng.random();
            math::ln(u) <= lr
        }
    }
}

fn check_inputs<B: ConvexBody + ?Sized>(body: &B, y: &[f64], eta: f64) -> Result<()> {
    if y.len() != body.dim() {
        return Err(Error::DimensionMismatch {
            expected: body.dim(),
            got: y.len(),
        });
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidConfig("eta must be positive and finite"));
    }
    Ok(())
}

/// Projection-oracle RGO: propose `X ~ N(proj_K(y), ηI)` and accept with
/// probability `exp(−⟨X − proj_K(y), proj_K(y) − y⟩/η) · 1_K(X)`.
///
/// The projection is computed once and reused across rejections.
pub fn rgo_projection<B, R>(
    body: &B,
    y: &[f64],
    eta: f64,
    settings: &RgoSettings,
    rng: &mut R,
) -> Result<RgoOutcome>
where
    B: ConvexBody + ?Sized,
    R: Rng + ?Sized,
{
    check_inputs(body, y, eta)?;
    let proj = body.project(y)?;
    let sigma = math::sqrt(eta);
    let mut outcome = RgoOutcome {
        projection_calls: 1,
        ..RgoOutcome::default()
    };
    for _ in 0..settings.rejection_cap {
        let x: Vec<f64> = proj
            .iter()
            .map(|p| {
                let z: f64 = StandardNormal.sample(rng);
                p + sigma * z
            })
            .collect();
        outcome.membership_calls += 1;
        let in_body = body.contains(&x)?;
        if accept(projection_log_ratio(&x, &proj, y, eta, in_body), rng) {
            outcome.sample = x;
            return Ok(outcome);
        }
        outcome.rejections += 1;
    }
    Err(Error::RejectionBudgetExceeded {
        cap: settings.rejection_cap,
    })
}

/// Mode `r* = (b + sqrt(b² + 4η(d−1)))/2` of the radial density
/// `p_r(r) ∝ r^{d−1} exp(−(r − b)²/(2η))`, `b = sqrt(2η/d)`.
pub fn radial_mode(dim: usize, eta: f64) -> f64 {
    let d = dim as f64;
    let b = math::sqrt(2.0 * eta / d);
    0.5 * (b + math::sqrt(b * b + 4.0 * eta * (d - 1.0)))
}

/// `log p_r(r)` up to the normalizing constant; `−∞` for `r ≤ 0`.
pub fn radial_log_density(r: f64, dim: usize, eta: f64) -> f64 {
    if !(r > 0.0) {
        return f64::NEG_INFINITY;
    }
    let d = dim as f64;
    let b = math::sqrt(2.0 * eta / d);
    let radial = if dim > 1 {
        (d - 1.0) * math::ln(r)
    } else {
        0.0
    };
    radial - (r - b) * (r - b) / (2.0 * eta)
}

/// Exact draw from `p_r` by rejection from the Gaussian envelope
/// `p_r(r*) exp(−(r − r*)²/(2η))`. The envelope dominates because
/// `(log p_r)'' = −(d−1)/r² − 1/η ≤ −1/η` and `r*` is the mode.
///
/// Returns the radius and the number of rejected envelope proposals.
pub fn sample_radial<R: Rng + ?Sized>(
    dim: usize,
    eta: f64,
    cap: u64,
    rng: &mut R,
) -> Result<(f64, u64)> {
    let mode = radial_mode(dim, eta);
    let log_peak = radial_log_density(mode, dim, eta);
    let sigma = math::sqrt(eta);
    for rejected in 0..cap {
        let z: f64 = StandardNormal.sample(rng);
        let r = mode + sigma * z;
        if r > 0.0 {
            let log_ratio = radial_log_density(r, dim, eta) - log_peak + 0.5 * z * z;
            if accept(Some(log_ratio), rng) {
                return Ok((r, rejected));
            }
        }
    }
    Err(Error::RejectionBudgetExceeded { cap })
}

/// Draws `X = x̂ + rθ` with `θ` uniform on the sphere and `r ~ p_r`, which
/// has density `∝ exp(−(‖x − x̂‖² − 2 sqrt(2η/d) ‖x − x̂‖)/(2η))`.
pub fn sample_proposal_nu<R: Rng + ?Sized>(
    xhat: &[f64],
    eta: f64,
    cap: u64,
    rng: &mut R,
) -> Result<(Vec<f64>, u64)> {
    let dim = xhat.len();
    let theta = linalg::unit_direction(dim, rng);
    let (r, rejected) = sample_radial(dim, eta, cap, rng)?;
    Ok((linalg::add_scaled(xhat, r, &theta), rejected))
}

/// Separation-oracle RGO: compute a `(1/d)`-solution `x̂` with the cutting
/// plane solver once, then propose `X ~ ν` around `x̂` and accept with
/// probability `exp(P₂(X) − Θ(X))`.
pub fn rgo_separation<B, R>(
    body: &B,
    y: &[f64],
    eta: f64,
    settings: &RgoSettings,
    rng: &mut R,
) -> Result<RgoOutcome>
where
    B: ConvexBody + ?Sized,
    R: Rng + ?Sized,
{
    check_inputs(body, y, eta)?;
    let dim = body.dim();
    let max_gap = 1.0 / dim as f64;
    let gap = settings.gap_target.unwrap_or(max_gap);
    if !(gap > 0.0 && gap <= max_gap) {
        return Err(Error::InvalidConfig("gap_target must lie in (0, 1/d]"));
    }
    let cp = minimize_quadratic(body, y, eta, gap)?;
    let xhat_y = dist(&cp.xhat, y);
    let mut outcome = RgoOutcome {
        separation_calls: cp.separation_calls,
        cutting_plane_iterations: cp.total_iterations as u64,
        ..RgoOutcome::default()
    };
    for _ in 0..settings.rejection_cap {
        let (x, env) = sample_proposal_nu(&cp.xhat, eta, settings.rejection_cap, rng)?;
        outcome.radial_envelope_rejections += env;
        outcome.membership_calls += 1;
        let in_body = body.contains(&x)?;
        let log_ratio = in_body.then(|| {
            p2_potential(dist(&x, &cp.xhat), xhat_y, eta, dim) - dist_sq(&x, y) / (2.0 * eta)
        });
        if accept(log_ratio, rng) {
            outcome.sample = x;
            return Ok(outcome);
        }
        outcome.rejections += 1;
    }
    Err(Error::RejectionBudgetExceeded {
        cap: settings.rejection_cap,
    })
}

/// Result of the membership-only In-and-Out baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct InAndOutOutcome {
    /// First proposal inside the body, or `None` when every attempt missed.
    pub sample: Option<Vec<f64>>,
    pub attempts: u64,
}

impl InAndOutOutcome {
    pub fn membership_calls(&self) -> u64 {
        self.attempts
    }
}

/// Draws `X_i ~ N(y, ηI)` up to `max_attempts` times and returns the first
/// one inside the body. Failure is reported as `sample: None`.
pub fn rgo_inandout<B, R>(
    body: &B,
    y: &[f64],
    eta: f64,
    max_attempts: u64,
    rng: &mut R,
) -> Result<InAndOutOutcome>
where
    B: ConvexBody + ?Sized,
    R: Rng + ?Sized,
{
    check_inputs(body, y, eta)?;
    let sigma = math::sqrt(eta);
    for attempt in 1..=max_attempts {
        let x: Vec<f64> = y
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(rng);
                v + sigma * z
            })
            .collect();
        if body.contains(&x)? {
            return Ok(InAndOutOutcome {
                sample: Some(x),
                attempts: attempt,
            });
        }
    }
    Ok(InAndOutOutcome {
        sample: None,
        attempts: max_attempts,
    })
}

/// `⟨x − proj, proj − y⟩`; nonnegative for every `x ∈ K` by convexity.
pub fn obtuse_inner(x: &[f64], proj: &[f64], y: &[f64]) -> f64 {
    dot(&linalg::sub(x, proj), &linalg::sub(proj, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{AxisBox, Ball};
    use crate::sampler::chain_rng;
    use alloc::vec;

    #[test]
    fn p1_at_projection() {
        let y = [1.0, 0.0];
        let proj = [0.0, 0.0];
        let p = potentials(&proj, &y, &proj, &proj, 0.01, 2, true);
        assert!((p.p1 - 50.0).abs() < 1e-12);
    }

    #[test]
    fn p2_at_xhat() {
        let xhat = [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut y = xhat;
        y[0] = 1.7;
        let p = potentials(&xhat, &y, &xhat, &xhat, 0.01, 10, true);
        let b = 0.002f64.sqrt();
        let dy = 1.2;
        let expected = (dy * dy - 2.0 * b * dy - 0.012) / 0.02;
        assert!((p.p2 - expected).abs() < 1e-10);
    }

    #[test]
    fn theta_is_infinite_outside() {
        let p = potentials(&[3.0], &[2.0], &[1.0], &[1.0], 0.1, 1, false);
        assert_eq!(p.theta, None);
        assert!(p.is_ordered(0.0));
        assert_eq!(
            projection_log_ratio(&[3.0], &[1.0], &[2.0], 0.1, false),
            None
        );
    }

    #[test]
    fn radial_mode_examples() {
        let eta = 0.01;
        assert!((radial_mode(1, eta) - (2.0 * eta).sqrt()).abs() < 1e-15);
        // root of (d−1)/r = (r − b)/η for d = 10, frozen from a bisection run
        assert!((radial_mode(10, eta) - 0.323_192_858_904_824).abs() < 1e-12);
        for &(d, eta) in &[(2usize, 0.3), (10, 0.01), (50, 1.0 / 2500.0), (3, 5.0)] {
            let r = radial_mode(d, eta);
            let b = (2.0 * eta / d as f64).sqrt();
            let deriv = (d as f64 - 1.0) / r - (r - b) / eta;
            assert!(deriv.abs() < 1e-10 * (1.0 / eta), "d={d} deriv={deriv}");
        }
    }

    #[test]
    fn radial_envelope_dominates() {
        for &(d, eta) in &[(1usize, 0.01), (10, 0.01), (2, 0.02), (40, 1.0 / 1600.0)] {
            let mode = radial_mode(d, eta);
            let peak = radial_log_density(mode, d, eta);
            let hi = mode + 10.0 * eta.sqrt();
            for i in 1..=10_000 {
                let r = hi * i as f64 / 10_000.0;
                let env = peak - (r - mode) * (r - mode) / (2.0 * eta);
                assert!(radial_log_density(r, d, eta) <= env + 1e-12);
            }
        }
    }

    #[test]
    fn projection_rgo_interior_target_accepts_on_membership() {
        // y ∈ K: the exponent vanishes and acceptance is 1_K(X)
        let ball = Ball::new(5, 2.0).unwrap();
        let mut rng = chain_rng(3, 0);
        let out =
            rgo_projection(&ball, &[0.0; 5], 0.01, &RgoSettings::default(), &mut rng).unwrap();
        assert_eq!(out.projection_calls, 1);
        assert!(ball.contains(&out.sample).unwrap());
        assert_eq!(out.membership_calls, out.rejections + 1);
    }

    #[test]
    fn separation_rgo_is_feasible() {
        let cube = AxisBox::cube(3, 1.0).unwrap();
        let mut rng = chain_rng(4, 0);
        for _ in 0..200 {
            let y = [1.2, -0.4, 1.05];
            let out =
                rgo_separation(&cube, &y, 1.0 / 9.0, &RgoSettings::default(), &mut rng).unwrap();
            assert!(cube.contains(&out.sample).unwrap());
            assert!(out.separation_calls >= 1);
            assert_eq!(out.projection_calls, 0);
        }
    }

    #[test]
    fn separation_rgo_refuses_loose_gap() {
        let cube = AxisBox::cube(2, 1.0).unwrap();
        let mut rng = chain_rng(4, 0);
        let settings = RgoSettings {
            gap_target: Some(1.0),
            ..RgoSettings::default()
        };
        assert!(matches!(
            rgo_separation(&cube, &[0.0, 0.0], 0.1, &settings, &mut rng),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn rejection_cap_is_enforced() {
        // far-away y: the proposal almost never lands in a useful spot
        let cube = AxisBox::cube(2, 1.0).unwrap();
        let mut rng = chain_rng(9, 0);
        let settings = RgoSettings {
            rejection_cap: 0,
            ..RgoSettings::default()
        };
        assert_eq!(
            rgo_projection(&cube, &[0.0, 0.0], 0.1, &settings, &mut rng),
            Err(Error::RejectionBudgetExceeded { cap: 0 })
        );
    }

    #[test]
    fn inandout_examples() {
        let ball = Ball::new(5, 2.0).unwrap();
        let mut rng = chain_rng(8, 0);
        let successes = (0..10_000)
            .filter(|_| {
                rgo_inandout(&ball, &[0.0; 5], 0.01, 1, &mut rng)
                    .unwrap()
                    .sample
                    .is_some()
            })
            .count();
        assert!(successes as f64 / 10_000.0 >= 0.999);

        let out = rgo_inandout(&ball, &[0.0; 5], 0.01, 0, &mut rng).unwrap();
        assert_eq!(out.sample, None);
        assert_eq!(out.attempts, 0);

        let far = vec![50.0, 0.0, 0.0, 0.0, 0.0];
        let out = rgo_inandout(&ball, &far, 0.01, 100, &mut rng).unwrap();
        assert_eq!(out.sample, None);
        assert_eq!(out.membership_calls(), 100);
    }
}
