//! Shared helpers for the integration and acceptance suites: reference
//! samplers built independently of the library's sampling routines, and
//! chi-square goodness-of-fit machinery.

#![allow(dead_code)]

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// `int_a^b P0(x) dx` with infinite endpoints allowed.
pub fn p0_mass(a: f64, b: f64) -> f64 {
    let cdf = |x: f64| {
        if x == f64::NEG_INFINITY {
            0.0
        } else if x == f64::INFINITY {
            1.0
        } else {
            norm_cdf(x)
        }
    };
    cdf(b) - cdf(a)
}

/// `int_a^b P1(x) dx = int_a^b x^2 phi(x) dx` with infinite endpoints.
///
/// Antiderivative: `Phi(x) - x phi(x)`.
pub fn p1_mass(a: f64, b: f64) -> f64 {
    let anti = |x: f64| {
        if x == f64::NEG_INFINITY {
            0.0
        } else if x == f64::INFINITY {
            1.0
        } else {
            norm_cdf(x) - x * phi(x)
        }
    };
    anti(b) - anti(a)
}

/// Reference single-photon quadrature sampler: rejection sampling of
/// `P1(x) = x^2 phi(x)` under a Normal(0, 3) proposal. Method-independent
/// from the library's signed chi-square route.
pub fn p1_rejection<R: Rng>(rng: &mut R) -> f64 {
    // P1(x) / q(x) = sqrt(3) x^2 exp(-x^2/3), maximized at x^2 = 3
    let bound = 3.0 * 3.0f64.sqrt() * (-1.0f64).exp();
    loop {
        let x: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * 3.0f64.sqrt();
        let ratio = 3.0f64.sqrt() * x * x * (-x * x / 3.0).exp();
        if rng.gen::<f64>() * bound < ratio {
            return x;
        }
    }
}

/// The marginal-then-conditional construction of the joint pair law:
/// draw `x_r` from its marginal
/// `eta t^2 P1 + (1 - eta t^2) P0`, then `x_i` from the conditional density
/// `P(x_i | x_r)`, which is a two-component mixture with the P1 weight
/// `eta r^2 P0(x_r) / P_r(x_r)`.
pub fn conditional_pair_sampler<R: Rng>(rng: &mut R, t: f64, r: f64, eta: f64) -> (f64, f64) {
    let x_r = if rng.gen::<f64>() < eta * t * t {
        p1_rejection(rng)
    } else {
        rng.sample(rand_distr::StandardNormal)
    };
    let p1_xr = x_r * x_r * phi(x_r);
    let p0_xr = phi(x_r);
    let marginal = eta * t * t * p1_xr + (eta * r * r + 1.0 - eta) * p0_xr;
    let w1 = eta * r * r * p0_xr / marginal;
    let x_i = if rng.gen::<f64>() < w1 {
        p1_rejection(rng)
    } else {
        rng.sample(rand_distr::StandardNormal)
    };
    (x_r, x_i)
}

/// Analytic bin mass of the joint pair density on a rectangle.
pub fn pair_bin_mass(t: f64, r: f64, eta: f64, xr: (f64, f64), xi: (f64, f64)) -> f64 {
    eta * t * t * p1_mass(xr.0, xr.1) * p0_mass(xi.0, xi.1)
        + eta * r * r * p0_mass(xr.0, xr.1) * p1_mass(xi.0, xi.1)
        + (1.0 - eta) * p0_mass(xr.0, xr.1) * p0_mass(xi.0, xi.1)
}

/// 2-d histogram over `nbins x nbins` equal-width cells on [lo, hi]^2,
/// clamping outliers into the edge cells.
pub struct Hist2d {
    pub nbins: usize,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Hist2d {
    pub fn new(nbins: usize, lo: f64, hi: f64) -> Self {
        Self {
            nbins,
            lo,
            hi,
            counts: vec![0; nbins * nbins],
        }
    }

    fn index(&self, x: f64) -> usize {
        let w = (self.hi - self.lo) / self.nbins as f64;
        (((x - self.lo) / w).floor() as i64).clamp(0, self.nbins as i64 - 1) as usize
    }

    pub fn add(&mut self, x: f64, y: f64) {
        let (i, j) = (self.index(x), self.index(y));
        self.counts[i * self.nbins + j] += 1;
    }

    /// Cell edges, with the outermost edges open (infinite).
    pub fn cell_edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.nbins as f64;
        let a = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.lo + i as f64 * w
        };
        let b = if i == self.nbins - 1 {
            f64::INFINITY
        } else {
            self.lo + (i + 1) as f64 * w
        };
        (a, b)
    }
}

/// Chi-square p-value for `stat` with `dof` degrees of freedom.
pub fn chi2_p_value(stat: f64, dof: f64) -> f64 {
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// One-sample test of observed counts against expected probabilities.
/// Cells with expected count below `min_expected` are pooled.
pub fn chi2_one_sample(counts: &[u64], probs: &[f64], min_expected: f64) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e < min_expected {
            pooled_obs += c as f64;
            pooled_exp += e;
        } else {
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    (stat, (cells - 1) as f64)
}

/// Two-sample homogeneity test between histograms with equal totals.
/// Cells whose pooled count is below `min_pooled` are merged.
pub fn chi2_two_sample(a: &[u64], b: &[u64], min_pooled: u64) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pa, mut pb) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        if x + y < min_pooled {
            pa += x;
            pb += y;
        } else {
            let (x, y) = (x as f64, y as f64);
            stat += (x - y).powi(2) / (x + y);
            cells += 1;
        }
    }
    if pa + pb > 0 {
        let (x, y) = (pa as f64, pb as f64);
        stat += (x - y).powi(2) / (x + y);
        cells += 1;
    }
    (stat, (cells - 1) as f64)
}
