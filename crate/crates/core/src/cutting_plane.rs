//! Separation-oracle minimization of `f(x) = ‖x − y‖² / (2η)` over a convex
//! body with the central-cut ellipsoid method.
//!
//! The solver returns a feasible point `x̂` together with an a-posteriori
//! certificate `f(x̂) − min_K f ≤ certified_gap`. Two certificates are
//! tracked and the smaller one is reported:
//!
//! * the subgradient bound: at a feasible center `c` with gradient `g`, every
//!   point of the current ellipsoid `E` satisfies
//!   `f(x) ≥ f(c) − sqrt(gᵀ P g)`, and `E` always contains the constrained
//!   minimizer, so `f(c) − sqrt(gᵀ P g)` is a lower bound on `min_K f`;
//! * the volume bound `B · r₀ · exp(−t / (2d(d+1)))`, where `r₀ = ‖y‖ + R` is
//!   the initial radius and `B = r₀² / (2η)` bounds the range of `f` on `K`.
//!
//! By strong convexity (modulus `1/η`) a certified gap `δ` also gives
//! `‖x̂ − proj_K(y)‖ ≤ sqrt(2ηδ)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::bodies::{ConvexBody, SeparationAnswer};
use crate::linalg::{dist_sq, dot, norm};
use crate::math;
use crate::{Error, Result};

const RESYMMETRIZE_EVERY: usize = 50;

/// Ellipsoid `{x : (x − c)ᵀ P⁻¹ (x − c) ≤ 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    pub center: Vec<f64>,
    /// Row-major symmetric positive-definite `d × d` matrix.
    pub shape: Vec<f64>,
}

impl EllipsoidState {
    /// Ball of the given radius around `center`.
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        let d = center.len();
        let mut shape = vec![0.0; d * d];
        for i in 0..d {
            shape[i * d + i] = radius * radius;
        }
        EllipsoidState { center, shape }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn shape_times(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.shape[i * d..(i + 1) * d], v);
        }
    }

    /// Central-cut update keeping the half `{x : ⟨g, x − c⟩ ≤ 0}`.
    ///
    /// `x' = x − Pg / ((d+1) sqrt(gᵀPg))`,
    /// `P' = d²/(d²−1) · (P − 2/(d+1) · (Pg)(Pg)ᵀ / gᵀPg)`; for `d = 1` the
    /// update is interval bisection, `P' = P/4`.
    pub fn ellipsoid_step(&self, cut_normal: &[f64]) -> Result<Self> {
        let mut next = self.clone();
        let mut scratch = vec![0.0; self.dim()];
        next.cut(cut_normal, &mut scratch)?;
        Ok(next)
    }

    /// In-place [`ellipsoid_step`](Self::ellipsoid_step). `scratch` must have
    /// length `d`; on return it holds `P g` for the pre-update shape.
    pub fn cut(&mut self, g: &[f64], scratch: &mut [f64]) -> Result<()> {
        let d = self.dim();
        if g.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g.len(),
            });
        }
        self.shape_times(g, scratch);
        let gpg = dot(g, scratch);
        if !(gpg > 0.0) || !gpg.is_finite() {
            return Err(Error::NumericalFailure(gpg));
        }
        let root = math::sqrt(gpg);
        let df = d as f64;
        let shift = 1.0 / ((df + 1.0) * root);
        for (c, pg) in self.center.iter_mut().zip(scratch.iter()) {
            *c -= shift * pg;
        }
        if d == 1 {
            self.shape[0] *= 0.25;
            return Ok(());
        }
        let scale = df * df / (df * df - 1.0);
        let rank_one = 2.0 / ((df + 1.0) * gpg);
        for i in 0..d {
            for j in 0..d {
                let p = &mut self.shape[i * d + j];
                *p = scale * (*p - rank_one * scratch[i] * scratch[j]);
            }
        }
        Ok(())
    }

    /// Replaces `P` by `(P + Pᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let d = self.dim();
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (self.shape[i * d + j] + self.shape[j * d + i]);
                self.shape[i * d + j] = avg;
                self.shape[j * d + i] = avg;
            }
        }
    }

    /// Lower-triangular Cholesky factor of `P`; fails on a non-positive pivot.
    pub fn cholesky(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.shape[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NumericalFailure(s));
                    }
                    l[i * d + i] = math::sqrt(s);
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Ok(l)
    }

    /// `(x − c)ᵀ P⁻¹ (x − c)`; at most 1 iff `x` lies in the ellipsoid.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        let l = self.cholesky()?;
        // forward substitution L z = x − c
        let mut z = vec![0.0; d];
        for i in 0..d {
            let mut s = x[i] - self.center[i];
            for k in 0..i {
                s -= l[i * d + k] * z[k];
            }
            z[i] = s / l[i * d + i];
        }
        Ok(dot(&z, &z))
    }
}

/// Output of [`minimize_quadratic`].
#[derive(Debug, Clone, PartialEq)]
pub struct CuttingPlaneResult {
    /// Best feasible center found; always a member of the body.
    pub xhat: Vec<f64>,
    /// `f(x̂) = ‖x̂ − y‖² / (2η)`.
    pub value: f64,
    /// Upper bound on `f(x̂) − min_K f`.
    pub certified_gap: f64,
    pub separation_calls: u64,
    /// Number of ellipsoid updates performed.
    pub total_iterations: usize,
}

/// Iteration cap `ceil(2d(d+1) ln(B · max(d, r₀) / δ)) + 4d(d+1)`.
pub fn iteration_cap(
    dim: usize,
    y_norm: f64,
    circumradius: f64,
    eta: f64,
    gap_target: f64,
) -> usize {
    let d = dim as f64;
    let r0 = y_norm + circumradius;
    let range = r0 * r0 / (2.0 * eta);
    let log_term = math::ln(range * d.max(r0) / gap_target).max(0.0);
    (math::ceil(2.0 * d * (d + 1.0) * log_term) + 4.0 * d * (d + 1.0)) as usize
}

/// Computes a `gap_target`-solution of `min_{x∈K} ‖x − y‖² / (2η)` using only
/// the separation oracle. The default target used by the RGO is `1/d`.
pub fn minimize_quadratic<B: ConvexBody + ?Sized>(
    body: &B,
    y: &[f64],
    eta: f64,
    gap_target: f64,
) -> Result<CuttingPlaneResult> {
    minimize_quadratic_observed(body, y, eta, gap_target, |_| {})
}

/// [`minimize_quadratic`] reporting the running certificate after every
/// oracle call.
pub fn minimize_quadratic_observed<B, F>(
    body: &B,
    y: &[f64],
    eta: f64,
    gap_target: f64,
    mut observe: F,
) -> Result<CuttingPlaneResult>
where
    B: ConvexBody + ?Sized,
    F: FnMut(f64),
{
    let d = body.dim();
    if y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: y.len(),
        });
    }
    if !(eta > 0.0) || !(gap_target > 0.0) {
        return Err(Error::InvalidConfig("eta and gap_target must be positive"));
    }
    let objective = |x: &[f64]| dist_sq(x, y) / (2.0 * eta);

    // The unconstrained minimizer is the answer whenever it is feasible.
    let mut separation_calls = 1;
    if body.separate(y)?.is_in_body() {
        observe(0.0);
        return Ok(CuttingPlaneResult {
            xhat: y.to_vec(),
            value: 0.0,
            certified_gap: 0.0,
            separation_calls,
            total_iterations: 0,
        });
    }

    let y_norm = norm(y);
    let r0 = y_norm + body.circumradius();
    let range = r0 * r0 / (2.0 * eta);
    let df = d as f64;
    let decay = 1.0 / (2.0 * df * (df + 1.0));
    let cap = iteration_cap(d, y_norm, body.circumradius(), eta, gap_target);

    let mut state = EllipsoidState::ball(vec![0.0; d], r0);
    let mut scratch = vec![0.0; d];
    let mut normal = vec![0.0; d];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut lower = 0.0_f64;
    let mut certified = f64::INFINITY;

    for t in 0..=cap {
        separation_calls += 1;
        match body.separate(&state.center)? {
            SeparationAnswer::InBody => {
                let fc = objective(&state.center);
                if best.as_ref().map_or(true, |(_, fb)| fc < *fb) {
                    best = Some((state.center.clone(), fc));
                }
                // gradient (c − y)/η, normalized for the cut
                for ((n, c), yi) in normal.iter_mut().zip(&state.center).zip(y) {
                    *n = (c - yi) / eta;
                }
                let grad_norm = norm(&normal);
                if grad_norm == 0.0 {
                    lower = fc;
                } else {
                    normal.iter_mut().for_each(|v| *v /= grad_norm);
                    state.shape_times(&normal, &mut scratch);
                    let width = math::sqrt(dot(&normal, &scratch).max(0.0));
                    lower = lower.max(fc - grad_norm * width);
                }
            }
            SeparationAnswer::Hyperplane(h) => normal.copy_from_slice(&h),
        }

        if let Some((_, fb)) = &best {
            let volume_bound = range * r0 * math::exp(-(t as f64) * decay);
            certified = certified.min((fb - lower).max(0.0)).min(volume_bound);
        }
        observe(certified);
        if certified <= gap_target {
            let (xhat, value) = best.expect("certificate requires a feasible center");
            return Ok(CuttingPlaneResult {
                xhat,
                value,
                certified_gap: certified,
                separation_calls,
                total_iterations: t,
            });
        }
        if t == cap {
            break;
        }
        state.cut(&normal, &mut scratch)?;
        if (t + 1) % RESYMMETRIZE_EVERY == 0 {
            state.symmetrize();
        }
    }
    Err(Error::BudgetExceeded {
        iterations: cap,
        gap_target,
        certified_gap: certified,
    })
}
