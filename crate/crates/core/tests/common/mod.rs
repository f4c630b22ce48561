#![allow(dead_code)]

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Tabulated CDF of an unnormalized density on `[a, b]`, built by Simpson
/// integration over each grid cell and evaluated by linear interpolation.
pub struct QuadratureCdf {
    a: f64,
    h: f64,
    cum: Vec<f64>,
}

impl QuadratureCdf {
    pub fn new<F: Fn(f64) -> f64>(density: F, a: f64, b: f64, cells: usize) -> Self {
        let h = (b - a) / cells as f64;
        let mut cum = Vec::with_capacity(cells + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let lo = a + i as f64 * h;
            acc += simpson(&density, lo, lo + h, 8);
            cum.push(acc);
        }
        for c in &mut cum {
            *c /= acc;
        }
        QuadratureCdf { a, h, cum }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.a) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let i = t.floor() as usize;
        if i + 1 >= self.cum.len() {
            return 1.0;
        }
        let frac = t - i as f64;
        self.cum[i] + frac * (self.cum[i + 1] - self.cum[i])
    }
}

/// Kolmogorov–Smirnov sup distance between the empirical CDF of `samples`
/// and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
