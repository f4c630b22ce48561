//! Membership-only baselines: Ball walk and Hit-and-Run.

use alloc::vec::Vec;

use rand::Rng;

use crate::bodies::ConvexBody;
use crate::linalg;
use crate::math;
use crate::{Error, Result};

const CHORD_MAX_ITERATIONS: usize = 200;

/// One step of a baseline walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkStep {
    pub point: Vec<f64>,
    pub membership_calls: u64,
    pub moved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Walk {
    BallWalk { delta: f64 },
    HitAndRun,
}

impl Walk {
    /// Ball walk with the conventional radius `δ = 1/√d`.
    pub fn ball_walk(dim: usize) -> Self {
        Walk::BallWalk {
            delta: 1.0 / math::sqrt(dim as f64),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Walk::BallWalk { .. } => "ball-walk",
            Walk::HitAndRun => "hit-and-run",
        }
    }

    pub fn step<B, R>(&self, body: &B, x: &[f64], rng: &mut R) -> Result<WalkStep>
    where
        B: ConvexBody + ?Sized,
        R: Rng + ?Sized,
    {
        match *self {
            Walk::BallWalk { delta } => ball_walk_step(body, x, delta, rng),
            Walk::HitAndRun => hit_and_run_step(body, x, rng),
        }
    }
}

/// Proposes a uniform point of `B(x, δ)` and moves there if it is in `K`.
pub fn ball_walk_step<B, R>(body: &B, x: &[f64], delta: f64, rng: &mut R) -> Result<WalkStep>
where
    B: ConvexBody + ?Sized,
    R: Rng + ?Sized,
{
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("ball-walk radius must be positive"));
    }
    let offset = linalg::uniform_in_ball(x.len(), delta, rng);
    let y: Vec<f64> = x.iter().zip(&offset).map(|(a, b)| a + b).collect();
    let moved = body.contains(&y)?;
    Ok(WalkStep {
        point: if moved { y } else { x.to_vec() },
        membership_calls: 1,
        moved,
    })
}

/// Largest `t ≥ 0` (to tolerance `1e-10·R`) with `x + tθ ∈ K`, found by
/// exponential bracketing followed by bisection. Returns `(t, calls)`.
pub fn chord_extent<B>(body: &B, x: &[f64], theta: &[f64]) -> Result<(f64, u64)>
where
    B: ConvexBody + ?Sized,
{
    let radius = body.circumradius();
    let tol = 1e-10 * radius;
    let mut calls = 0;
    let mut probe = |t: f64| -> Result<bool> {
        calls += 1;
        body.contains(&linalg::add_scaled(x, t, theta))
    };
    // x ∈ K ⊆ B(0,R) puts the far endpoint within 2R
    let mut lo = 0.0;
    let mut hi = 0.5 * body.inradius().min(radius);
    let mut iterations = 0;
    while probe(hi)? {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if hi > 4.0 * radius + 1.0 || iterations > CHORD_MAX_ITERATIONS {
            return Err(Error::DegenerateChord);
        }
    }
    let mut iterations = 0;
    while hi - lo > tol {
        iterations += 1;
        if iterations > CHORD_MAX_ITERATIONS {
            return Err(Error::DegenerateChord);
        }
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, calls))
}

/// Chord `[t₋, t₊]` of `{t : x + tθ ∈ K}` with membership-call count.
pub fn chord<B>(body: &B, x: &[f64], theta: &[f64]) -> Result<(f64, f64, u64)>
where
    B: ConvexBody + ?Sized,
{
    if !body.contains(x)? {
        return Err(Error::DegenerateChord);
    }
    let (plus, c1) = chord_extent(body, x, theta)?;
    let back: Vec<f64> = theta.iter().map(|v| -v).collect();
    let (minus, c2) = chord_extent(body, x, &back)?;
    Ok((-minus, plus, c1 + c2 + 1))
}

/// Picks a uniform direction and moves to a uniform point of the chord of
/// `K` through `x` in that direction.
pub fn hit_and_run_step<B, R>(body: &B, x: &[f64], rng: &mut R) -> Result<WalkStep>
where
    B: ConvexBody + ?Sized,
    R: Rng + ?Sized,
{
    let theta = linalg::unit_direction(x.len(), rng);
    let (lo, hi, calls) = chord(body, x, &theta)?;
    let u: f64 = rng.random();
    let t = lo + u * (hi - lo);
    Ok(WalkStep {
        point: linalg::add_scaled(x, t, &theta),
        membership_calls: calls,
        moved: true,
    })
}
