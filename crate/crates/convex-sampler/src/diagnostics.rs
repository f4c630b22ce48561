//! Statistical checks of sampler output: analytic marginals with
//! Kolmogorov–Smirnov tests, binned χ² tests, histogram divergence trends
//! and audits of the expected-rejection bounds.

use convex_sampler_core::bodies::{BuiltinBody, ConvexBody};
use convex_sampler_core::linalg::norm;
use convex_sampler_core::sampler::{RgoBackend, SamplerConfig, TelemetryTotals};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::{E, PI};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("empty sample")]
    EmptySample,
    #[error("no analytic marginals or cell volumes for a {0} body")]
    UnsupportedBody(&'static str),
    #[error("need at least {need} chains per iteration, got {got}")]
    InsufficientChains { got: usize, need: usize },
    #[error("point has dimension {got}, body has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid of {0} cells is too large")]
    GridTooLarge(u128),
    #[error("cells_per_axis must be positive")]
    EmptyGrid,
}

pub type Result<T, E = DiagnosticsError> = std::result::Result<T, E>;

/// Minimum number of chains per iteration for [`divergence_trend`].
pub const MIN_TREND_CHAINS: usize = 500;
/// Points used to estimate cell volumes of non-box bodies.
pub const VOLUME_POINTS: usize = 100_000;
const MAX_CELLS: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: usize,
    pub test_name: String,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form, converges fast for small λ.
        let y = (-PI * PI / (8.0 * lambda * lambda)).exp();
        let cdf = (2.0 * PI).sqrt() / lambda * (y + y.powi(9) + y.powi(25) + y.powi(49));
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let x = (-2.0 * lambda * lambda).exp();
        (2.0 * (x - x.powi(4) + x.powi(9) - x.powi(16))).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov–Smirnov test. The p-value uses the asymptotic
/// distribution with Stephens' finite-sample correction
/// `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<GofResult> {
    if samples.is_empty() {
        return Err(DiagnosticsError::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    Ok(GofResult {
        statistic: d,
        p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d),
        sample_size: sorted.len(),
        test_name: "ks".into(),
    })
}

/// Exact one-dimensional marginals of the uniform distribution on a ball
/// or a box.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticMarginals {
    /// `(‖X‖/R)^d ~ U[0, 1]`.
    Ball { dim: usize, radius: f64 },
    /// `X_i ~ U[lo_i, hi_i]`, independently.
    Box { bounds: Vec<[f64; 2]> },
}

pub fn analytic_marginals(body: &BuiltinBody) -> Result<AnalyticMarginals> {
    match body {
        BuiltinBody::Ball(b) => Ok(AnalyticMarginals::Ball {
            dim: b.dim(),
            radius: b.radius(),
        }),
        BuiltinBody::Box(b) => Ok(AnalyticMarginals::Box {
            bounds: b.bounds().to_vec(),
        }),
        other => Err(DiagnosticsError::UnsupportedBody(other.kind())),
    }
}

impl AnalyticMarginals {
    pub fn dim(&self) -> usize {
        match self {
            AnalyticMarginals::Ball { dim, .. } => *dim,
            AnalyticMarginals::Box { bounds } => bounds.len(),
        }
    }

    /// `E‖X‖²` under the uniform distribution.
    pub fn second_moment(&self) -> f64 {
        match self {
            AnalyticMarginals::Ball { dim, radius } => {
                let d = *dim as f64;
                d * radius * radius / (d + 2.0)
            }
            AnalyticMarginals::Box { bounds } => bounds
                .iter()
                .map(|[lo, hi]| (lo * lo + lo * hi + hi * hi) / 3.0)
                .sum(),
        }
    }

    /// `P(‖X‖ ≤ r)` for the ball.
    pub fn radius_cdf(&self, r: f64) -> Option<f64> {
        match self {
            AnalyticMarginals::Ball { dim, radius } => {
                Some((r.max(0.0) / radius).min(1.0).powi(*dim as i32))
            }
            AnalyticMarginals::Box { .. } => None,
        }
    }

    /// Number of tested scalar statistics.
    pub fn statistic_count(&self) -> usize {
        match self {
            AnalyticMarginals::Ball { .. } => 1,
            AnalyticMarginals::Box { bounds } => bounds.len(),
        }
    }

    pub fn statistic_name(&self, i: usize) -> String {
        match self {
            AnalyticMarginals::Ball { .. } => "radial".into(),
            AnalyticMarginals::Box { .. } => format!("coord{i}"),
        }
    }

    pub fn statistic(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            AnalyticMarginals::Ball { dim, radius } => (norm(x) / radius).powi(*dim as i32),
            AnalyticMarginals::Box { .. } => x[i],
        }
    }

    pub fn cdf(&self, i: usize, t: f64) -> f64 {
        match self {
            AnalyticMarginals::Ball { .. } => t.clamp(0.0, 1.0),
            AnalyticMarginals::Box { bounds } => {
                let [lo, hi] = bounds[i];
                ((t - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        }
    }

    /// KS test of every statistic over `points`.
    pub fn ks_tests(&self, points: &[Vec<f64>]) -> Result<Vec<GofResult>> {
        for p in points {
            if p.len() != self.dim() {
                return Err(DiagnosticsError::DimensionMismatch {
                    expected: self.dim(),
                    got: p.len(),
                });
            }
        }
        (0..self.statistic_count())
            .map(|i| {
                let values: Vec<f64> = points.iter().map(|p| self.statistic(i, p)).collect();
                let mut r = ks_test(&values, |t| self.cdf(i, t))?;
                r.test_name = format!("ks_{}", self.statistic_name(i));
                Ok(r)
            })
            .collect()
    }
}

/// Regular grid over a bounding box of the body together with the
/// probability of each cell under the uniform distribution on the body.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    lo: Vec<f64>,
    width: Vec<f64>,
    per_axis: usize,
    probs: Vec<f64>,
}

impl CellGrid {
    /// Boxes get exact probabilities; other two-dimensional bodies get cell
    /// volumes from a midpoint lattice of about [`VOLUME_POINTS`] points
    /// over `[−R, R]²`.
    pub fn for_body(body: &BuiltinBody, per_axis: usize) -> Result<Self> {
        if per_axis == 0 {
            return Err(DiagnosticsError::EmptyGrid);
        }
        let dim = body.dim();
        let cells = (per_axis as u128).pow(dim as u32);
        if cells > MAX_CELLS {
            return Err(DiagnosticsError::GridTooLarge(cells));
        }
        let cells = cells as usize;
        match body {
            BuiltinBody::Box(b) => {
                let lo = b.bounds().iter().map(|[l, _]| *l).collect();
                let width = b
                    .bounds()
                    .iter()
                    .map(|[l, h]| (h - l) / per_axis as f64)
                    .collect();
                Ok(CellGrid {
                    lo,
                    width,
                    per_axis,
                    probs: vec![1.0 / cells as f64; cells],
                })
            }
            _ if dim == 2 => {
                let r = body.circumradius();
                let mut grid = CellGrid {
                    lo: vec![-r, -r],
                    width: vec![2.0 * r / per_axis as f64; 2],
                    per_axis,
                    probs: vec![0.0; cells],
                };
                let side = ((VOLUME_POINTS as f64).sqrt() / per_axis as f64).ceil() as usize;
                let m = side * per_axis;
                let h = 2.0 * r / m as f64;
                let mut inside = 0usize;
                for i in 0..m {
                    for j in 0..m {
                        let p = [-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h];
                        if body.contains(&p).unwrap_or(false) {
                            inside += 1;
                            let c = grid.cell_of(&p).expect("lattice point lies in the grid");
                            grid.probs[c] += 1.0;
                        }
                    }
                }
                for p in &mut grid.probs {
                    *p /= inside as f64;
                }
                Ok(grid)
            }
            other => Err(DiagnosticsError::UnsupportedBody(other.kind())),
        }
    }

    pub fn cells(&self) -> usize {
        self.probs.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Row-major cell index of `x`; points on the upper faces belong to the
    /// last cell.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (k, v) in x.iter().enumerate() {
            let t = (v - self.lo[k]) / self.width[k];
            if !(t >= 0.0 && t <= self.per_axis as f64) {
                return None;
            }
            let c = (t as usize).min(self.per_axis - 1);
            idx = idx * self.per_axis + c;
        }
        Some(idx)
    }

    /// Cell counts of `points`; points outside the grid are dropped.
    pub fn counts(&self, points: &[Vec<f64>]) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; self.cells()];
        for p in points {
            if p.len() != self.lo.len() {
                return Err(DiagnosticsError::DimensionMismatch {
                    expected: self.lo.len(),
                    got: p.len(),
                });
            }
            if let Some(c) = self.cell_of(p) {
                counts[c] += 1;
            }
        }
        Ok(counts)
    }
}

fn chi2_sf(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .sf(statistic)
}

/// Pearson χ² of `counts` against cell probabilities `probs`. Consecutive
/// cells are pooled until each group expects at least five points, which
/// also absorbs cells of zero probability into a neighbor.
pub fn pearson_chi2(counts: &[u64], probs: &[f64]) -> Result<GofResult> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(DiagnosticsError::EmptySample);
    }
    let nf = n as f64;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += nf * p;
        if exp >= 5.0 {
            groups.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if obs > 0.0 || exp > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => groups.push((obs, exp)),
        }
    }
    let statistic: f64 = groups.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    Ok(GofResult {
        statistic,
        p_value: chi2_sf(statistic, groups.len().saturating_sub(1)),
        sample_size: n as usize,
        test_name: "pearson_chi2".into(),
    })
}

/// Pearson χ² test of uniformity on `body` over a `cells_per_axis` grid.
pub fn grid_chi2_uniformity(
    samples: &[Vec<f64>],
    body: &BuiltinBody,
    cells_per_axis: usize,
) -> Result<GofResult> {
    if samples.is_empty() {
        return Err(DiagnosticsError::EmptySample);
    }
    let grid = CellGrid::for_body(body, cells_per_axis)?;
    let counts = grid.counts(samples)?;
    let mut r = pearson_chi2(&counts, grid.probabilities())?;
    r.test_name = "grid_chi2_uniformity".into();
    Ok(r)
}

/// Two-sample χ² test for equality of the binned distributions, with
/// sample-size weights `√(n_b/n_a)` and `√(n_a/n_b)`. Consecutive cells are
/// pooled until each group holds at least ten points.
pub fn two_sample_chi2(a: &[u64], b: &[u64]) -> Result<GofResult> {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(DiagnosticsError::EmptySample);
    }
    let ka = (nb as f64 / na as f64).sqrt();
    let kb = (na as f64 / nb as f64).sqrt();
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut ga, mut gb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ga += x as f64;
        gb += y as f64;
        if ga + gb >= 10.0 {
            groups.push((ga, gb));
            ga = 0.0;
            gb = 0.0;
        }
    }
    if ga + gb > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += ga;
                last.1 += gb;
            }
            None => groups.push((ga, gb)),
        }
    }
    let statistic: f64 = groups
        .iter()
        .map(|(x, y)| (ka * x - kb * y) * (ka * x - kb * y) / (x + y))
        .sum();
    Ok(GofResult {
        statistic,
        p_value: chi2_sf(statistic, groups.len().saturating_sub(1)),
        sample_size: (na + nb) as usize,
        test_name: "two_sample_chi2".into(),
    })
}

/// Histogram χ² estimate at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub iteration: usize,
    pub chi2: f64,
    /// Expected value of the estimator under the target, `(C − 1)/n`.
    pub bias_floor: f64,
    pub chains: usize,
    pub cells: usize,
}

impl TrendPoint {
    /// Upper edge of the band the estimator occupies at stationarity: the
    /// bias floor plus four standard deviations of `χ²_{C−1}/n`.
    pub fn floor_band(&self) -> f64 {
        let dof = self.cells.saturating_sub(1) as f64;
        (dof + 4.0 * (2.0 * dof).sqrt()) / self.chains as f64
    }
}

/// Plug-in χ² divergence `Σ (p̂_i − p_i)²/p_i` between the empirical cell
/// frequencies of the chains at each iteration and the uniform cell
/// probabilities. Cells of zero probability are ignored.
pub fn divergence_trend(
    groups: &[(usize, Vec<Vec<f64>>)],
    grid: &CellGrid,
) -> Result<Vec<TrendPoint>> {
    let cells = grid.probabilities().iter().filter(|&&p| p > 0.0).count();
    groups
        .iter()
        .map(|(k, points)| {
            if points.len() < MIN_TREND_CHAINS {
                return Err(DiagnosticsError::InsufficientChains {
                    got: points.len(),
                    need: MIN_TREND_CHAINS,
                });
            }
            let counts = grid.counts(points)?;
            Ok(plug_in_point(
                *k,
                &counts,
                grid.probabilities(),
                points.len(),
                cells,
            ))
        })
        .collect()
}

/// Same estimate from precomputed cell counts.
pub fn plug_in_point(
    iteration: usize,
    counts: &[u64],
    probs: &[f64],
    chains: usize,
    cells: usize,
) -> TrendPoint {
    let n = chains as f64;
    let chi2 = counts
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&c, &p)| {
            let q = c as f64 / n - p;
            q * q / p
        })
        .sum();
    TrendPoint {
        iteration,
        chi2,
        bias_floor: cells.saturating_sub(1) as f64 / n,
        chains,
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendWindow {
    pub first: usize,
    pub last: usize,
    pub mean_chi2: f64,
}

/// Averages of the trend over the dyadic iteration windows `{0}`, `{1}`,
/// `[2, 3]`, `[4, 7]`, ...; the last window is truncated at the final
/// iteration.
pub fn dyadic_windows(trend: &[TrendPoint]) -> Vec<TrendWindow> {
    let Some(max_k) = trend.iter().map(|t| t.iteration).max() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut bounds = vec![(0, 0)];
    let mut lo = 1;
    while lo <= max_k {
        bounds.push((lo, (2 * lo - 1).min(max_k)));
        lo *= 2;
    }
    for (first, last) in bounds {
        let vals: Vec<f64> = trend
            .iter()
            .filter(|t| t.iteration >= first && t.iteration <= last)
            .map(|t| t.chi2)
            .collect();
        if !vals.is_empty() {
            out.push(TrendWindow {
                first,
                last,
                mean_chi2: vals.iter().sum::<f64>() / vals.len() as f64,
            });
        }
    }
    out
}

/// True when the window averages strictly decrease until the first window
/// inside the band `≤ band` and every later window stays inside it.
pub fn decreases_to_floor(windows: &[TrendWindow], band: f64) -> bool {
    let Some(hit) = windows.iter().position(|w| w.mean_chi2 <= band) else {
        return false;
    };
    windows[..=hit]
        .windows(2)
        .all(|w| w[1].mean_chi2 < w[0].mean_chi2)
        && windows[hit..].iter().all(|w| w.mean_chi2 <= band)
}

/// Comparison of an observed telemetry value with a claimed upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    pub claim: String,
    /// `null` when the bound could not be evaluated.
    pub bound_value: Option<f64>,
    pub observed_value: f64,
    pub pass: bool,
    /// Reason the audit was not applicable; `pass` is false then.
    pub skipped: Option<String>,
}

impl BoundAudit {
    fn checked(claim: &str, bound: f64, observed: f64) -> Self {
        BoundAudit {
            claim: claim.into(),
            bound_value: Some(bound),
            observed_value: observed,
            pass: observed <= bound,
            skipped: None,
        }
    }

    fn skipped(claim: &str, bound: Option<f64>, observed: f64, reason: &str) -> Self {
        BoundAudit {
            claim: claim.into(),
            bound_value: bound,
            observed_value: observed,
            pass: false,
            skipped: Some(reason.into()),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }
}

/// Expected rejections of the projection RGO from an `M`-warm start,
/// `M(√(2πe) + 1)`.
pub fn projection_rejection_bound(warmness: f64) -> f64 {
    warmness * ((2.0 * PI * E).sqrt() + 1.0)
}

/// Expected rejections of the separation RGO from an `M`-warm start,
/// `√(2π) M e^{13/4 + 20/d} + M e^{9/4 + 12/d}`.
pub fn separation_rejection_bound(warmness: f64, dim: usize) -> f64 {
    let d = dim as f64;
    (2.0 * PI).sqrt() * warmness * (3.25 + 20.0 / d).exp() + warmness * (2.25 + 12.0 / d).exp()
}

pub const PROJECTION_CLAIM: &str = "projection RGO: mean rejections <= M(sqrt(2 pi e) + 1)";
pub const PROJECTION_CALLS_CLAIM: &str = "projection RGO: projection calls per RGO call <= 1";
pub const SEPARATION_CLAIM: &str =
    "separation RGO: mean rejections <= sqrt(2 pi) M exp(13/4 + 20/d) + M exp(9/4 + 12/d)";
pub const INANDOUT_CLAIM: &str = "in-and-out RGO: no rejection bound";

/// Audits the mean rejection count of a run against the bound for its
/// backend. The bounds assume a known warmness `M` and `η = 1/d²`; runs
/// violating either are reported as skipped.
pub fn audit_rejection_bounds(
    totals: &TelemetryTotals,
    config: &SamplerConfig,
    dim: usize,
) -> Vec<BoundAudit> {
    let observed = totals.mean_rejections();
    let warmness = config.known_warmness();
    let default_eta = 1.0 / (dim * dim) as f64;
    let eta_ok = (config.eta - default_eta).abs() <= 1e-12 * default_eta;
    let gate = |claim: &str, bound: Option<f64>| -> Option<BoundAudit> {
        let reason = if totals.iterations == 0 {
            "no RGO calls"
        } else if bound.is_none() {
            "warmness unknown"
        } else if !eta_ok {
            "bound assumes eta = 1/d^2"
        } else {
            return None;
        };
        Some(BoundAudit::skipped(claim, bound, observed, reason))
    };
    match config.backend {
        RgoBackend::Projection => {
            let bound = warmness.map(projection_rejection_bound);
            let calls = if totals.iterations == 0 {
                0.0
            } else {
                totals.projection_calls as f64 / totals.iterations as f64
            };
            vec![
                gate(PROJECTION_CLAIM, bound).unwrap_or_else(|| {
                    BoundAudit::checked(PROJECTION_CLAIM, bound.unwrap(), observed)
                }),
                BoundAudit::checked(PROJECTION_CALLS_CLAIM, 1.0, calls),
            ]
        }
        RgoBackend::Separation => {
            let bound = warmness.map(|m| separation_rejection_bound(m, dim));
            vec![gate(SEPARATION_CLAIM, bound)
                .unwrap_or_else(|| BoundAudit::checked(SEPARATION_CLAIM, bound.unwrap(), observed))]
        }
        RgoBackend::InAndOut => vec![BoundAudit::skipped(
            INANDOUT_CLAIM,
            None,
            observed,
            "the membership baseline has no rejection bound",
        )],
    }
}

/// JSON report written by the `diagnose` and `audit` modes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub tests: Vec<GofResult>,
    pub audits: Vec<BoundAudit>,
    pub trend: Vec<TrendPoint>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use convex_sampler_core::bodies::{AxisBox, Ball, Polytope};
    use convex_sampler_core::sampler::{chain_rng, WarmStart};
    use rand::Rng;

    fn cube2() -> BuiltinBody {
        AxisBox::cube(2, 1.0).unwrap().into()
    }

    #[test]
    fn kolmogorov_sf_reference_values() {
        // Classical critical values of the limiting distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.9495) - 0.001).abs() < 1e-4);
        assert!((kolmogorov_sf(0.8276) - 0.5).abs() < 1e-3);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        // Both branches agree at the switch point.
        let lo = kolmogorov_sf(1.18 - 1e-12);
        let hi = kolmogorov_sf(1.18);
        assert!((lo - hi).abs() < 1e-9);
    }

    #[test]
    fn ks_uniform_null_is_accepted() {
        let mut rng = chain_rng(1, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random()).collect();
        let r = ks_test(&xs, |t| t.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value >= 0.001, "{r:?}");
        assert_eq!(r.sample_size, 100_000);
    }

    #[test]
    fn ks_constant_sample() {
        let xs = vec![0.5; 100];
        let r = ks_test(&xs, |t| t.clamp(0.0, 1.0)).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-15);
        assert!(r.p_value < 1e-12);
    }

    #[test]
    fn ks_gross_mismatch() {
        let normal = statrs::distribution::Normal::standard();
        let mut rng = chain_rng(2, 0);
        let xs: Vec<f64> = (0..1000)
            .map(|_| normal.inverse_cdf(rng.random()))
            .collect();
        let r = ks_test(&xs, |t| t.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn ks_empty_is_an_error() {
        assert_eq!(ks_test(&[], |t| t), Err(DiagnosticsError::EmptySample));
    }

    #[test]
    fn ks_invariant_under_monotone_transform() {
        let mut rng = chain_rng(3, 0);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>().powf(1.1)).collect();
        let a = ks_test(&xs, |t| t.clamp(0.0, 1.0)).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let b = ks_test(&ys, |t| t.ln().clamp(0.0, 1.0)).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
        assert!((a.p_value - b.p_value).abs() < 1e-12);
    }

    #[test]
    fn marginal_examples() {
        let ball3: BuiltinBody = Ball::new(3, 1.0).unwrap().into();
        let m = analytic_marginals(&ball3).unwrap();
        assert!((m.second_moment() - 0.6).abs() < 1e-15);

        let cube5: BuiltinBody = AxisBox::cube(5, 1.0).unwrap().into();
        let m = analytic_marginals(&cube5).unwrap();
        for i in 0..5 {
            for t in [-1.0, -0.3, 0.0, 0.7, 1.0] {
                assert!((m.cdf(i, t) - (t + 1.0) / 2.0).abs() < 1e-15);
            }
        }
        assert!((m.second_moment() - 5.0 / 3.0).abs() < 1e-15);

        let ball2: BuiltinBody = Ball::new(2, 2.0).unwrap().into();
        let m = analytic_marginals(&ball2).unwrap();
        assert!((m.radius_cdf(1.0).unwrap() - 0.25).abs() < 1e-15);

        let tri: BuiltinBody = Polytope::new(
            vec![vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![1.5, 1.5, 1.5],
            5.0,
        )
        .unwrap()
        .into();
        assert_eq!(
            analytic_marginals(&tri),
            Err(DiagnosticsError::UnsupportedBody("polytope"))
        );
    }

    #[test]
    fn marginal_moments_match_quadrature() {
        // E‖X‖² = ∫ r² d(P(‖X‖ ≤ r)) for the ball; per-coordinate ∫ t² dt/(hi−lo) for the box.
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let n = 2000;
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
            }
            s * h / 3.0
        };
        let ball: BuiltinBody = Ball::new(4, 1.7).unwrap().into();
        let m = analytic_marginals(&ball).unwrap();
        let d = 4.0;
        let q = simpson(
            &|r: f64| r * r * d * r.powf(d - 1.0) / 1.7f64.powf(d),
            0.0,
            1.7,
        );
        assert!((q - m.second_moment()).abs() < 1e-12);

        let bx: BuiltinBody = AxisBox::new(vec![[-1.0, 2.0], [-3.0, 1.5]]).unwrap().into();
        let m = analytic_marginals(&bx).unwrap();
        let q =
            simpson(&|t: f64| t * t / 3.0, -1.0, 2.0) + simpson(&|t: f64| t * t / 4.5, -3.0, 1.5);
        assert!((q - m.second_moment()).abs() < 1e-12);
    }

    #[test]
    fn grid_chi2_exact_uniform_box() {
        let body = cube2();
        let mut rng = chain_rng(4, 0);
        let pts: Vec<Vec<f64>> = (0..100_000)
            .map(|_| body.exact_uniform(&mut rng).unwrap())
            .collect();
        let r = grid_chi2_uniformity(&pts, &body, 10).unwrap();
        assert!(r.p_value >= 0.001, "{r:?}");
    }

    #[test]
    fn grid_chi2_all_in_one_cell() {
        let pts = vec![vec![0.95, 0.95]; 1000];
        let r = grid_chi2_uniformity(&pts, &cube2(), 10).unwrap();
        assert!(r.p_value < 1e-12);
    }

    #[test]
    fn grid_chi2_invariant_under_cell_relabeling() {
        // Reflecting x₁ permutes the cells of a symmetric grid.
        let body = cube2();
        let mut rng = chain_rng(5, 0);
        let pts: Vec<Vec<f64>> = (0..20_000)
            .map(|_| {
                vec![
                    rng.random::<f64>().powf(0.9) * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ]
            })
            .collect();
        let flipped: Vec<Vec<f64>> = pts.iter().map(|p| vec![-p[0], p[1]]).collect();
        let a = grid_chi2_uniformity(&pts, &body, 10).unwrap();
        let b = grid_chi2_uniformity(&flipped, &body, 10).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9);
    }

    #[test]
    fn disk_cell_volumes() {
        let disk: BuiltinBody = Ball::new(2, 1.0).unwrap().into();
        let grid = CellGrid::for_body(&disk, 2).unwrap();
        for p in grid.probabilities() {
            assert!((p - 0.25).abs() < 1e-3);
        }
        let grid = CellGrid::for_body(&disk, 10).unwrap();
        // Corner cells miss the disk entirely.
        assert_eq!(grid.probabilities()[0], 0.0);
        let total: f64 = grid.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut rng = chain_rng(6, 0);
        let pts: Vec<Vec<f64>> = (0..50_000)
            .map(|_| disk.exact_uniform(&mut rng).unwrap())
            .collect();
        let r = grid_chi2_uniformity(&pts, &disk, 10).unwrap();
        assert!(r.p_value >= 0.001, "{r:?}");
    }

    #[test]
    fn two_sample_chi2_detects_shift() {
        let same = two_sample_chi2(&[100, 200, 300, 400], &[52, 98, 151, 199]).unwrap();
        assert!(same.p_value > 0.5);
        let diff = two_sample_chi2(&[100, 200, 300, 400], &[400, 300, 200, 100]).unwrap();
        assert!(diff.p_value < 1e-12);
    }

    #[test]
    fn trend_needs_enough_chains() {
        let grid = CellGrid::for_body(&cube2(), 10).unwrap();
        let err = divergence_trend(&[(0, vec![vec![0.0, 0.0]])], &grid);
        assert_eq!(
            err,
            Err(DiagnosticsError::InsufficientChains { got: 1, need: 500 })
        );
    }

    #[test]
    fn trend_of_point_mass_and_uniform() {
        let body = cube2();
        let grid = CellGrid::for_body(&body, 10).unwrap();
        let corner = vec![vec![1.0, 1.0]; 1000];
        let mut rng = chain_rng(7, 0);
        let unif: Vec<Vec<f64>> = (0..1000)
            .map(|_| body.exact_uniform(&mut rng).unwrap())
            .collect();
        let t = divergence_trend(&[(0, corner), (1, unif)], &grid).unwrap();
        assert!((t[0].chi2 - 99.0).abs() < 1e-9);
        assert!(t[1].chi2 < t[1].floor_band());
        assert!((t[1].bias_floor - 0.099).abs() < 1e-12);
    }

    #[test]
    fn window_logic() {
        let pt = |k, v| TrendPoint {
            iteration: k,
            chi2: v,
            bias_floor: 0.0,
            chains: 1000,
            cells: 100,
        };
        let trend: Vec<TrendPoint> = (0..=10).map(|k| pt(k, 10.0 / (1 + k * k) as f64)).collect();
        let w = dyadic_windows(&trend);
        let spans: Vec<(usize, usize)> = w.iter().map(|w| (w.first, w.last)).collect();
        assert_eq!(spans, vec![(0, 0), (1, 1), (2, 3), (4, 7), (8, 10)]);
        assert!(decreases_to_floor(&w, 0.5));
        assert!(!decreases_to_floor(&w, 0.01));
        let mut bumpy = w.clone();
        bumpy[2].mean_chi2 = 6.0;
        assert!(!decreases_to_floor(&bumpy, 0.5));
    }

    #[test]
    fn bound_values() {
        assert!((projection_rejection_bound(1.0) - 5.132731).abs() < 1e-6);
        assert!((separation_rejection_bound(1.0, 10) - 509.179).abs() < 1e-3);
    }

    #[test]
    fn audit_gates() {
        let mut config = SamplerConfig::for_dim(10);
        let totals = TelemetryTotals {
            iterations: 10,
            total_rejections: 12,
            projection_calls: 10,
            ..Default::default()
        };
        let a = audit_rejection_bounds(&totals, &config, 10);
        assert!(a[0].pass && a[1].pass);
        assert_eq!(a[0].observed_value, 1.2);

        config.warm_start = WarmStart::UnitBallUniform;
        let a = audit_rejection_bounds(&totals, &config, 10);
        assert!(a[0].is_skipped() && !a[0].pass);
        assert_eq!(a[0].skipped.as_deref(), Some("warmness unknown"));

        config.warm_start = WarmStart::ExactUniform;
        config.eta = 0.02;
        assert!(audit_rejection_bounds(&totals, &config, 10)[0].is_skipped());

        config.eta = 0.01;
        config.backend = RgoBackend::Separation;
        let a = audit_rejection_bounds(&totals, &config, 10);
        assert_eq!(a.len(), 1);
        assert!((a[0].bound_value.unwrap() - 509.179).abs() < 1e-3);

        config.backend = RgoBackend::InAndOut;
        assert!(audit_rejection_bounds(&totals, &config, 10)[0].is_skipped());
    }

    #[test]
    fn report_field_names_are_stable() {
        let report = DiagnosticsReport {
            tests: vec![GofResult {
                statistic: 0.1,
                p_value: 0.5,
                sample_size: 10,
                test_name: "ks".into(),
            }],
            audits: vec![BoundAudit::checked("c", 2.0, 1.0)],
            trend: vec![],
        };
        let v: serde_json::Value = serde_json::to_value(&report).unwrap();
        assert_eq!(v["tests"][0]["p_value"], 0.5);
        assert_eq!(v["tests"][0]["test_name"], "ks");
        assert_eq!(v["audits"][0]["bound_value"], 2.0);
        assert_eq!(v["audits"][0]["pass"], true);
        assert!(v["trend"].as_array().unwrap().is_empty());
    }
}
