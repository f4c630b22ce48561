//! Convex bodies exposed through membership, projection and separation
//! oracles.
//!
//! Every body satisfies `B(0, r) ⊆ K ⊆ B(0, R)` with certified `r ≥ 1`;
//! the built-in constructors refuse bodies for which this cannot be
//! certified. Bodies are immutable, so a single instance can be shared by
//! any number of concurrently running chains.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::linalg::{self, dot, norm};
use crate::math;
use crate::{Error, Result};

/// Which oracles a body implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub membership: bool,
    pub projection: bool,
    pub separation: bool,
    pub exact_uniform: bool,
}

/// Answer of a separation oracle at a query point `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparationAnswer {
    InBody,
    /// Unit normal `g` with `⟨g, x − y⟩ ≥ 0` for every `y ∈ K`.
    Hyperplane(Vec<f64>),
}

impl SeparationAnswer {
    pub fn is_in_body(&self) -> bool {
        matches!(self, SeparationAnswer::InBody)
    }
}

/// Geometry constants derived from the certified radii.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySummary {
    pub dim: usize,
    pub inradius: f64,
    pub circumradius: f64,
    /// Diameter bound `D = 2R`.
    pub diameter: f64,
    /// `C_LSI ≈ D²`.
    pub lsi_heuristic: f64,
    /// `C_PI ≈ D² ln d`, with `ln d` floored at 1 so that `d ≤ 2` stays usable.
    pub pi_heuristic: f64,
    pub minwidth: Option<f64>,
    /// `γ = R / minwidth`.
    pub gamma: Option<f64>,
}

/// A convex body with capability-flagged oracles.
///
/// Oracles a body does not implement return [`Error::CapabilityMissing`].
pub trait ConvexBody: Send + Sync {
    fn dim(&self) -> usize;

    /// Radius of an origin-centered ball certified to lie inside the body.
    fn inradius(&self) -> f64;

    /// Radius of an origin-centered ball certified to contain the body.
    fn circumradius(&self) -> f64;

    fn capabilities(&self) -> Capabilities;

    /// Analytic minimal width, when known.
    fn minwidth(&self) -> Option<f64> {
        None
    }

    fn contains(&self, x: &[f64]) -> Result<bool>;

    fn project(&self, _y: &[f64]) -> Result<Vec<f64>> {
        Err(Error::CapabilityMissing("projection"))
    }

    fn separate(&self, _x: &[f64]) -> Result<SeparationAnswer> {
        Err(Error::CapabilityMissing("separation"))
    }

    fn exact_uniform(&self, _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Err(Error::CapabilityMissing("exact-uniform"))
    }

    fn validate_geometry(&self) -> Result<GeometrySummary> {
        validate_geometry(self)
    }
}

/// Checks `B(0,1) ⊆ K ⊆ B(0,R)` from the certified radii and derives the
/// geometry constants used for default iteration counts.
pub fn validate_geometry<B: ConvexBody + ?Sized>(body: &B) -> Result<GeometrySummary> {
    let dim = body.dim();
    let inradius = body.inradius();
    let circumradius = body.circumradius();
    if dim == 0 {
        return Err(Error::InvalidBody("dimension must be positive"));
    }
    if !(inradius >= 1.0) {
        return Err(Error::A1Violation { inradius });
    }
    if !(circumradius >= inradius) {
        return Err(Error::InvalidBody("circumradius is smaller than inradius"));
    }
    let diameter = 2.0 * circumradius;
    let lsi = diameter * diameter;
    let log_d = math::ln(dim as f64).max(1.0);
    let minwidth = body.minwidth();
    Ok(GeometrySummary {
        dim,
        inradius,
        circumradius,
        diameter,
        lsi_heuristic: lsi,
        pi_heuristic: lsi * log_d,
        minwidth,
        gamma: minwidth.map(|w| circumradius / w),
    })
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        })
    }
}

/// Origin-centered Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    dim: usize,
    radius: f64,
}

impl Ball {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidBody("dimension must be positive"));
        }
        if !radius.is_finite() {
            return Err(Error::InvalidBody("radius must be finite"));
        }
        let ball = Ball { dim, radius };
        validate_geometry(&ball)?;
        Ok(ball)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConvexBody for Ball {
    fn dim(&self) -> usize {
        self.dim
    }

    fn inradius(&self) -> f64 {
        self.radius
    }

    fn circumradius(&self) -> f64 {
        self.radius
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            membership: true,
            projection: true,
            separation: true,
            exact_uniform: true,
        }
    }

    fn minwidth(&self) -> Option<f64> {
        Some(2.0 * self.radius)
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim, x)?;
        Ok(linalg::norm_sq(x) <= self.radius * self.radius)
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, y)?;
        let n = norm(y);
        if n <= self.radius {
            return Ok(y.to_vec());
        }
        let s = self.radius / n;
        Ok(y.iter().map(|v| v * s).collect())
    }

    fn separate(&self, x: &[f64]) -> Result<SeparationAnswer> {
        if self.contains(x)? {
            return Ok(SeparationAnswer::InBody);
        }
        let mut g = x.to_vec();
        linalg::normalize(&mut g);
        Ok(SeparationAnswer::Hyperplane(g))
    }

    fn exact_uniform(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(linalg::uniform_in_ball(self.dim, self.radius, rng))
    }
}

/// Axis-aligned box `∏ [lo_i, hi_i]` containing the origin in its interior.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    bounds: Vec<[f64; 2]>,
}

impl AxisBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidBody("dimension must be positive"));
        }
        if bounds
            .iter()
            .any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(Error::InvalidBody("box bounds must be finite with lo < hi"));
        }
        let body = AxisBox { bounds };
        validate_geometry(&body)?;
        Ok(body)
    }

    /// The cube `[-half_width, half_width]^d`.
    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![[-half_width, half_width]; dim])
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }
}

impl ConvexBody for AxisBox {
    fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn inradius(&self) -> f64 {
        self.bounds
            .iter()
            .map(|[lo, hi]| (-lo).min(*hi))
            .fold(f64::INFINITY, f64::min)
    }

    fn circumradius(&self) -> f64 {
        math::sqrt(
            self.bounds
                .iter()
                .map(|[lo, hi]| (lo * lo).max(hi * hi))
                .sum(),
        )
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            membership: true,
            projection: true,
            separation: true,
            exact_uniform: true,
        }
    }

    fn minwidth(&self) -> Option<f64> {
        Some(
            self.bounds
                .iter()
                .map(|[lo, hi]| hi - lo)
                .fold(f64::INFINITY, f64::min),
        )
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x)?;
        Ok(x.iter()
            .zip(&self.bounds)
            .all(|(v, [lo, hi])| *lo <= *v && *v <= *hi))
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), y)?;
        Ok(y.iter()
            .zip(&self.bounds)
            .map(|(v, [lo, hi])| v.clamp(*lo, *hi))
            .collect())
    }

    fn separate(&self, x: &[f64]) -> Result<SeparationAnswer> {
        check_dim(self.dim(), x)?;
        // most violated face, lowest index on ties
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, (v, [lo, hi])) in x.iter().zip(&self.bounds).enumerate() {
            let (viol, sign) = if v - hi >= lo - v {
                (v - hi, 1.0)
            } else {
                (lo - v, -1.0)
            };
            if viol > 0.0 && best.map_or(true, |(_, b, _)| viol > b) {
                best = Some((i, viol, sign));
            }
        }
        Ok(match best {
            None => SeparationAnswer::InBody,
            Some((i, _, sign)) => {
                let mut g = vec![0.0; self.dim()];
                g[i] = sign;
                SeparationAnswer::Hyperplane(g)
            }
        })
    }

    fn exact_uniform(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(self
            .bounds
            .iter()
            .map(|[lo, hi]| {
                let u: f64 = rng.random();
                lo + (hi - lo) * u
            })
            .collect())
    }
}

/// Halfspace polytope `{x : Ax ≤ b}` with `b > 0`.
///
/// Only membership and separation are available. The inradius is certified
/// as `min_i b_i / ‖a_i‖`; the circumradius is supplied by the caller and is
/// only spot-checked along the coordinate axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    /// Row-major `m × d`.
    a: Vec<f64>,
    b: Vec<f64>,
    row_norms: Vec<f64>,
    circumradius: f64,
}

impl Polytope {
    pub fn new(rows: Vec<Vec<f64>>, b: Vec<f64>, circumradius: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidBody(
                "polytope needs at least one nonempty row",
            ));
        }
        if rows.len() != b.len() {
            return Err(Error::InvalidBody("A and b have different row counts"));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidBody("rows of A have different lengths"));
        }
        if b.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidBody(
                "every b_i must be positive (origin interior)",
            ));
        }
        if !(circumradius.is_finite() && circumradius > 0.0) {
            return Err(Error::InvalidBody(
                "circumradius must be positive and finite",
            ));
        }
        let row_norms: Vec<f64> = rows.iter().map(|r| norm(r)).collect();
        if row_norms.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
            return Err(Error::InvalidBody("rows of A must be nonzero and finite"));
        }
        let body = Polytope {
            dim,
            a: rows.into_iter().flatten().collect(),
            b,
            row_norms,
            circumradius,
        };
        validate_geometry(&body)?;
        body.spot_check_circumradius()?;
        Ok(body)
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    // K ⊆ B(0,R) implies ±(1+δ)R e_i ∉ K.
    fn spot_check_circumradius(&self) -> Result<()> {
        let r = self.circumradius * (1.0 + 1e-9);
        let mut probe = vec![0.0; self.dim];
        for i in 0..self.dim {
            for s in [r, -r] {
                probe[i] = s;
                if self.contains(&probe)? {
                    return Err(Error::InvalidBody(
                        "declared circumradius does not contain the polytope",
                    ));
                }
            }
            probe[i] = 0.0;
        }
        Ok(())
    }

    fn most_violated(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.num_rows() {
            let v = dot(self.row(i), x) - self.b[i];
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

impl ConvexBody for Polytope {
    fn dim(&self) -> usize {
        self.dim
    }

    fn inradius(&self) -> f64 {
        self.b
            .iter()
            .zip(&self.row_norms)
            .map(|(b, n)| b / n)
            .fold(f64::INFINITY, f64::min)
    }

    fn circumradius(&self) -> f64 {
        self.circumradius
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            membership: true,
            projection: false,
            separation: true,
            exact_uniform: false,
        }
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim, x)?;
        Ok((0..self.num_rows()).all(|i| dot(self.row(i), x) <= self.b[i]))
    }

    fn separate(&self, x: &[f64]) -> Result<SeparationAnswer> {
        check_dim(self.dim, x)?;
        let (i, violation) = self.most_violated(x);
        if violation <= 0.0 {
            return Ok(SeparationAnswer::InBody);
        }
        let n = self.row_norms[i];
        Ok(SeparationAnswer::Hyperplane(
            self.row(i).iter().map(|v| v / n).collect(),
        ))
    }
}

/// Origin-centered axis-aligned ellipsoid `Σ (x_i / a_i)² ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    semi_axes: Vec<f64>,
}

impl Ellipsoid {
    pub fn new(semi_axes: Vec<f64>) -> Result<Self> {
        if semi_axes.is_empty() {
            return Err(Error::InvalidBody("dimension must be positive"));
        }
        if semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidBody("semi-axes must be positive and finite"));
        }
        let body = Ellipsoid { semi_axes };
        validate_geometry(&body)?;
        Ok(body)
    }

    pub fn semi_axes(&self) -> &[f64] {
        &self.semi_axes
    }

    fn level(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.semi_axes)
            .map(|(v, a)| (v / a) * (v / a))
            .sum()
    }
}

impl ConvexBody for Ellipsoid {
    fn dim(&self) -> usize {
        self.semi_axes.len()
    }

    fn inradius(&self) -> f64 {
        self.semi_axes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn circumradius(&self) -> f64 {
        self.semi_axes.iter().copied().fold(0.0, f64::max)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            membership: true,
            projection: true,
            separation: true,
            exact_uniform: false,
        }
    }

    fn minwidth(&self) -> Option<f64> {
        Some(2.0 * self.inradius())
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x)?;
        Ok(self.level(x) <= 1.0)
    }

    /// Solves `Σ a_i² y_i² / (a_i² + λ)² = 1` for the multiplier `λ > 0` by
    /// Newton's method; the left side is convex and decreasing in `λ`, so
    /// iterates started at 0 increase monotonically to the root.
    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        if self.contains(y)? {
            return Ok(y.to_vec());
        }
        let mut lambda = 0.0_f64;
        for _ in 0..200 {
            let mut phi = -1.0;
            let mut dphi = 0.0;
            for (v, a) in y.iter().zip(&self.semi_axes) {
                let a2 = a * a;
                let t = a * v / (a2 + lambda);
                phi += t * t;
                dphi -= 2.0 * t * t / (a2 + lambda);
            }
            if phi <= 0.0 || dphi == 0.0 {
                break;
            }
            let next = lambda - phi / dphi;
            if math::abs(next - lambda) <= 1e-15 * (1.0 + lambda) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        let mut x: Vec<f64> = y
            .iter()
            .zip(&self.semi_axes)
            .map(|(v, a)| a * a * v / (a * a + lambda))
            .collect();
        let level = self.level(&x);
        if level > 1.0 {
            let s = 1.0 / math::sqrt(level);
            x.iter_mut().for_each(|v| *v *= s);
        }
        Ok(x)
    }

    fn separate(&self, x: &[f64]) -> Result<SeparationAnswer> {
        if self.contains(x)? {
            return Ok(SeparationAnswer::InBody);
        }
        let mut g: Vec<f64> = x
            .iter()
            .zip(&self.semi_axes)
            .map(|(v, a)| v / (a * a))
            .collect();
        linalg::normalize(&mut g);
        Ok(SeparationAnswer::Hyperplane(g))
    }
}

/// Closed set of the built-in bodies, as loaded from body files.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinBody {
    Ball(Ball),
    Box(AxisBox),
    Polytope(Polytope),
    Ellipsoid(Ellipsoid),
}

impl BuiltinBody {
    fn inner(&self) -> &dyn ConvexBody {
        match self {
            BuiltinBody::Ball(b) => b,
            BuiltinBody::Box(b) => b,
            BuiltinBody::Polytope(b) => b,
            BuiltinBody::Ellipsoid(b) => b,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BuiltinBody::Ball(_) => "ball",
            BuiltinBody::Box(_) => "box",
            BuiltinBody::Polytope(_) => "polytope",
            BuiltinBody::Ellipsoid(_) => "ellipsoid",
        }
    }
}

impl From<Ball> for BuiltinBody {
    fn from(b: Ball) -> Self {
        BuiltinBody::Ball(b)
    }
}

impl From<AxisBox> for BuiltinBody {
    fn from(b: AxisBox) -> Self {
        BuiltinBody::Box(b)
    }
}

impl From<Polytope> for BuiltinBody {
    fn from(b: Polytope) -> Self {
        BuiltinBody::Polytope(b)
    }
}

impl From<Ellipsoid> for BuiltinBody {
    fn from(b: Ellipsoid) -> Self {
        BuiltinBody::Ellipsoid(b)
    }
}

impl ConvexBody for BuiltinBody {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn inradius(&self) -> f64 {
        self.inner().inradius()
    }
    fn circumradius(&self) -> f64 {
        self.inner().circumradius()
    }
    fn capabilities(&self) -> Capabilities {
        self.inner().capabilities()
    }
    fn minwidth(&self) -> Option<f64> {
        self.inner().minwidth()
    }
    fn contains(&self, x: &[f64]) -> Result<bool> {
        self.inner().contains(x)
    }
    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.inner().project(y)
    }
    fn separate(&self, x: &[f64]) -> Result<SeparationAnswer> {
        self.inner().separate(x)
    }
    fn exact_uniform(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.inner().exact_uniform(rng)
    }
}
