//! Sampled complex temporal mode functions and orthonormal mode bases.
//!
//! Discrete convention: a mode is unit-norm in the plain sample sum,
//! `sum_k |f_k|^2 = 1` (dt absorbed). This keeps modes directly comparable
//! to eigenvectors of the sample-space kernel without rescaling.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng;

/// Tolerance on the unit-norm invariant of a stored mode.
pub const NORM_TOL: f64 = 1e-12;
/// Pairwise orthonormality tolerance for a [`ModeBasis`].
pub const ORTHO_TOL: f64 = 1e-10;
/// Residual norm below which a completion candidate counts as linearly
/// dependent and is re-drawn.
const REJECT_TOL: f64 = 1e-8;

/// A unit-norm complex mode function sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMode {
    grid: TimeGrid,
    samples: Vec<C64>,
}

impl TemporalMode {
    /// Normalize `samples` to unit norm; the direction is unchanged.
    pub fn new(grid: TimeGrid, samples: Vec<C64>) -> Result<Self> {
        normalize(samples, grid)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn n_samp(&self) -> usize {
        self.samples.len()
    }

    /// Amplitude |f(t_k)|.
    pub fn amplitude(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm()).collect()
    }

    /// Argument phi(t_k) of f = |f| e^{i phi}.
    pub fn phase(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.arg()).collect()
    }

    /// Multiply by a sample-wise unit phase e^{i phase_k}.
    pub fn with_phase(&self, phase: &[f64]) -> Result<Self> {
        if phase.len() != self.samples.len() {
            return Err(Error::Dimension(format!(
                "phase length {} vs {} samples",
                phase.len(),
                self.samples.len()
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(phase)
            .map(|(z, p)| z * C64::from_polar(1.0, *p))
            .collect();
        normalize(samples, self.grid)
    }

    pub fn conjugate(&self) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|z| z.conj()).collect(),
        }
    }

    /// True when the imaginary content is negligible relative to unit norm.
    pub fn is_real(&self) -> bool {
        self.samples.iter().map(|z| z.im * z.im).sum::<f64>().sqrt() < 1e-9
    }

    /// Build from a real vector (e.g. a kernel eigenvector).
    pub fn from_real(grid: TimeGrid, v: &[f64]) -> Result<Self> {
        normalize(v.iter().map(|&x| C64::new(x, 0.0)).collect(), grid)
    }
}

impl Serialize for TemporalMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            dt: f64,
            samples: Vec<[f64; 2]>,
            #[serde(skip)]
            _g: &'a (),
        }
        let samples = self.samples.iter().map(|z| [z.re, z.im]).collect();
        Repr {
            dt: self.grid.dt(),
            samples,
            _g: &(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TemporalMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            dt: f64,
            samples: Vec<[f64; 2]>,
        }
        let repr = Repr::deserialize(deserializer)?;
        let grid = TimeGrid::new(repr.samples.len(), repr.dt).map_err(D::Error::custom)?;
        let samples = repr.samples.iter().map(|p| C64::new(p[0], p[1])).collect();
        // Tolerant input: modes are normalized on load.
        normalize(samples, grid).map_err(D::Error::custom)
    }
}

/// Scale a sample vector to unit norm.
pub fn normalize(samples: Vec<C64>, grid: TimeGrid) -> Result<TemporalMode> {
    if samples.len() != grid.n_samp() {
        return Err(Error::Dimension(format!(
            "{} samples on a {}-point grid",
            samples.len(),
            grid.n_samp()
        )));
    }
    let norm_sq: f64 = samples.iter().map(|z| z.norm_sqr()).sum();
    if !norm_sq.is_finite() {
        return Err(Error::DegenerateMode("non-finite samples".into()));
    }
    if norm_sq == 0.0 {
        return Err(Error::DegenerateMode("all samples are zero".into()));
    }
    if (norm_sq - 1.0).abs() <= NORM_TOL {
        // already inside the invariant; keep the exact bits (round trips)
        return Ok(TemporalMode { grid, samples });
    }
    let scale = norm_sq.sqrt().recip();
    let samples = samples.into_iter().map(|z| z * scale).collect();
    Ok(TemporalMode { grid, samples })
}

/// Inner product `<g, h> = sum_k conj(g_k) h_k`.
pub fn overlap(g: &TemporalMode, h: &TemporalMode) -> Result<C64> {
    if g.grid != h.grid {
        return Err(Error::Dimension(
            "overlap of modes on different grids".into(),
        ));
    }
    Ok(g.samples
        .iter()
        .zip(&h.samples)
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// Fidelity `|<g, h>|^2`; invariant under a global phase of either argument.
pub fn fidelity(g: &TemporalMode, h: &TemporalMode) -> Result<f64> {
    Ok(overlap(g, h)?.norm_sqr())
}

/// Real orthonormal carrier functions of a mode, `f = t f_r + i r f_i`
/// after the balancing global phase that makes the two carriers orthogonal.
#[derive(Debug, Clone)]
pub struct CarrierSplit {
    /// One carrier for a real mode, two for a complex one.
    pub carriers: Vec<TemporalMode>,
    /// `t` amplitude on the first carrier.
    pub t_amp: f64,
    /// `r` amplitude on the second carrier (0 for a real mode).
    pub r_amp: f64,
    /// Balancing global phase applied to the mode before splitting.
    pub phase_offset: f64,
}

impl CarrierSplit {
    pub fn is_complex(&self) -> bool {
        self.carriers.len() == 2
    }
}

/// Split a mode into real orthonormal carriers.
///
/// A global phase cannot change the state, so we rotate by the phase that
/// makes `Im(sum_k f_k^2) = 0`, which is exactly the condition for the real
/// and imaginary parts to be orthogonal as real vectors.
pub fn split_mode(f: &TemporalMode) -> Result<CarrierSplit> {
    let s: C64 = f.samples.iter().map(|z| z * z).sum();
    let phase_offset = if s.norm() < 1e-300 {
        0.0
    } else {
        -s.arg() / 2.0
    };
    let rot = C64::from_polar(1.0, phase_offset);
    let rotated: Vec<C64> = f.samples.iter().map(|z| z * rot).collect();

    let re: Vec<f64> = rotated.iter().map(|z| z.re).collect();
    let im: Vec<f64> = rotated.iter().map(|z| z.im).collect();
    let t_amp = re.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r_amp = im.iter().map(|x| x * x).sum::<f64>().sqrt();

    // Keep t >= r by convention; swapping re/im is another global phase (i).
    let (t_amp, r_amp, first, second, phase_offset) = if r_amp > t_amp {
        (
            r_amp,
            t_amp,
            im,
            re,
            phase_offset + std::f64::consts::FRAC_PI_2,
        )
    } else {
        (t_amp, r_amp, re, im, phase_offset)
    };

    let mut carriers = vec![TemporalMode::from_real(f.grid, &first)?];
    let complex = r_amp > 1e-9;
    if complex {
        carriers.push(TemporalMode::from_real(f.grid, &second)?);
        let dot: f64 = carriers[0]
            .samples
            .iter()
            .zip(&carriers[1].samples)
            .map(|(a, b)| a.re * b.re)
            .sum();
        debug_assert!(dot.abs() < 1e-9, "carrier orthogonality broke: {dot}");
    }
    Ok(CarrierSplit {
        carriers,
        t_amp,
        r_amp: if complex { r_amp } else { 0.0 },
        phase_offset,
    })
}

/// An ordered, mutually orthonormal set of modes on one grid.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    grid: TimeGrid,
    modes: Vec<TemporalMode>,
}

impl ModeBasis {
    /// Wrap a set of modes, checking pairwise orthonormality.
    pub fn new(grid: TimeGrid, modes: Vec<TemporalMode>) -> Result<Self> {
        for (j, m) in modes.iter().enumerate() {
            if m.grid() != grid {
                return Err(Error::Dimension(format!("mode {j} on a different grid")));
            }
            for (k, other) in modes.iter().enumerate().skip(j) {
                let g = overlap(m, other)?;
                let expect = if j == k { 1.0 } else { 0.0 };
                if (g - expect).norm() > ORTHO_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "modes {j},{k} not orthonormal: <f_{j},f_{k}> = {g}"
                    )));
                }
            }
        }
        Ok(Self { grid, modes })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[TemporalMode] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> &TemporalMode {
        &self.modes[j]
    }

    /// Real carrier matrix, one basis function per row (n_modes x n_samp).
    ///
    /// Valid because bases built here hold real-valued carriers only.
    pub fn carrier_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.n_samp();
        DMatrix::from_fn(self.modes.len(), n, |j, k| self.modes[j].samples()[k].re)
    }
}

/// Complete the carriers of `f` to `n_total` orthonormal modes.
///
/// The first mode (real case) or first two modes (complex case) span `f`.
/// Completion candidates are random vectors re-orthogonalized against the
/// accepted set; near-dependent candidates (residual below 1e-8) are
/// re-drawn, so the result is deterministic given the seed and independent
/// of evaluation order.
pub fn extend_basis(f: &TemporalMode, n_total: usize, seed: u64) -> Result<ModeBasis> {
    let split = split_mode(f)?;
    extend_carriers(f.grid(), &split.carriers, n_total, seed)
}

/// Complete an existing orthonormal real carrier set to `n_total` modes.
pub fn extend_carriers(
    grid: TimeGrid,
    carriers: &[TemporalMode],
    n_total: usize,
    seed: u64,
) -> Result<ModeBasis> {
    let n_samp = grid.n_samp();
    if n_total > n_samp {
        return Err(Error::Dimension(format!(
            "cannot build {n_total} orthonormal modes on a {n_samp}-point grid"
        )));
    }
    if n_total < carriers.len() {
        return Err(Error::Dimension(format!(
            "mode occupies {} carriers but only {n_total} requested",
            carriers.len()
        )));
    }

    let mut accepted: Vec<Vec<f64>> = carriers
        .iter()
        .map(|c| c.samples().iter().map(|z| z.re).collect())
        .collect();
    let mut rng = rng::tagged_rng(seed, rng::tag::BASIS);

    while accepted.len() < n_total {
        let mut candidate: Vec<f64> = (0..n_samp).map(|_| rng.sample(StandardNormal)).collect();
        // Two rounds of classical Gram-Schmidt are enough for full
        // orthogonality at working precision.
        let mut ok = true;
        for _ in 0..2 {
            for basis_vec in &accepted {
                let dot: f64 = candidate.iter().zip(basis_vec).map(|(a, b)| a * b).sum();
                for (c, b) in candidate.iter_mut().zip(basis_vec) {
                    *c -= dot * b;
                }
            }
            let norm = candidate.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < REJECT_TOL {
                ok = false;
                break;
            }
            for c in candidate.iter_mut() {
                *c /= norm;
            }
        }
        if ok {
            accepted.push(candidate);
        }
    }

    let modes = accepted
        .into_iter()
        .map(|v| TemporalMode::from_real(grid, &v))
        .collect::<Result<Vec<_>>>()?;
    ModeBasis::new(grid, modes)
}
