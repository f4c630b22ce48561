//! Dense vector helpers and isotropic random draws shared by the oracles
//! and samplers. Points are plain `[f64]` slices.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    math::sqrt(norm_sq(a))
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(dist_sq(a, b))
}

/// `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s * b`.
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Scales `v` in place to unit length. Returns the original norm.
pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// A standard normal vector in `R^d`.
pub fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform direction on the unit sphere `S^{d-1}` (normalized Gaussian).
pub fn unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut w = gaussian_vector(d, rng);
        if normalize(&mut w) > 0.0 {
            return w;
        }
    }
}

/// Uniform point in the origin-centered ball of the given radius.
pub fn uniform_in_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    let mut theta = unit_direction(d, rng);
    let u: f64 = rng.random();
    let r = radius * math::powf(u, 1.0 / d as f64);
    theta.iter_mut().for_each(|x| *x *= r);
    theta
}
