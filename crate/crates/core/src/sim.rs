//! Synthetic cw homodyne waveform batches.
//!
//! A waveform is assembled mode by mode: each basis function receives one
//! quadrature draw per record, `x(t_k) = sum_j x_j f_j(t_k)`, where the
//! occupied mode draws from its state's quadrature distribution and every
//! other mode draws vacuum. All draws for waveform `w` come from the stream
//! keyed by `(seed, w)`, so batches are bit-identical for any thread count.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mode::{self, overlap, split_mode, TemporalMode};
use crate::rng;

/// Vacuum quadrature variance in the `x = a e^{-i theta} + a^dag e^{i theta}`
/// convention. Everything downstream is expressed in these units.
pub const SIGMA0_SQ: f64 = 1.0;

/// Number of waveforms handled per work unit. Fixed so that chunked and
/// single-pass results agree bit-exactly regardless of the thread count.
pub const CHUNK_WF: usize = 4096;

const FIR_HALF_ORDER: usize = 32; // 65 taps per single filter stage

// ---------------------------------------------------------------------------
// Configuration types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Vacuum,
    SinglePhoton,
    Coherent,
}

/// State occupying a single temporal mode.
///
/// For `single_photon`, `mean_photons` equals the detection efficiency eta.
/// For `coherent`, losses fold into `|alpha|^2 = mean_photons`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpec {
    pub kind: StateKind,
    pub mean_photons: f64,
    pub mode: Option<TemporalMode>,
}

impl StateSpec {
    pub fn vacuum() -> Self {
        Self {
            kind: StateKind::Vacuum,
            mean_photons: 0.0,
            mode: None,
        }
    }

    pub fn single_photon(eta: f64, mode: TemporalMode) -> Result<Self> {
        let s = Self {
            kind: StateKind::SinglePhoton,
            mean_photons: eta,
            mode: Some(mode),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn coherent(mean_photons: f64, mode: TemporalMode) -> Result<Self> {
        let s = Self {
            kind: StateKind::Coherent,
            mean_photons,
            mode: Some(mode),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean_photons.is_finite() || self.mean_photons < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mean photon number must be nonnegative, got {}",
                self.mean_photons
            )));
        }
        match self.kind {
            StateKind::Vacuum => Ok(()),
            StateKind::SinglePhoton => {
                if self.mean_photons > 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "single photon efficiency must be <= 1, got {}",
                        self.mean_photons
                    )));
                }
                if self.mode.is_none() {
                    return Err(Error::InvalidParameter("single_photon needs a mode".into()));
                }
                Ok(())
            }
            StateKind::Coherent => {
                if self.mode.is_none() {
                    return Err(Error::InvalidParameter("coherent needs a mode".into()));
                }
                Ok(())
            }
        }
    }
}

/// Optional single-pass linear-phase FIR filtering of the synthesized signal.
///
/// Synthesis then runs on a guard-extended segment (guard of three filter
/// lengths per side) and truncates the guards after filtering, keeping edge
/// transients out of the retained window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Low-pass cutoff in Hz (attenuates above).
    pub low_pass_hz: Option<f64>,
    /// High-pass cutoff in Hz (attenuates below).
    pub high_pass_hz: Option<f64>,
}

impl FilterSpec {
    fn validate(&self, grid: TimeGrid) -> Result<()> {
        let nyquist = 0.5 / grid.dt();
        let mut any = false;
        for (name, cut) in [
            ("low_pass_hz", self.low_pass_hz),
            ("high_pass_hz", self.high_pass_hz),
        ] {
            if let Some(f) = cut {
                any = true;
                if !f.is_finite() || f <= 0.0 || f >= nyquist {
                    return Err(Error::InvalidParameter(format!(
                        "{name} = {f} outside (0, Nyquist = {nyquist})"
                    )));
                }
            }
        }
        if !any {
            return Err(Error::InvalidParameter("filter with no cutoff".into()));
        }
        if let (Some(lo), Some(hi)) = (self.low_pass_hz, self.high_pass_hz) {
            if hi >= lo {
                return Err(Error::InvalidParameter(format!(
                    "pass band is empty: high_pass_hz {hi} >= low_pass_hz {lo}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub state: StateSpec,
    pub grid: TimeGrid,
    pub n_wf: u64,
    pub n_mode: usize,
    pub seed: u64,
    #[serde(default)]
    pub filter: Option<FilterSpec>,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.state.validate()?;
        if self.n_wf < 1 {
            return Err(Error::InvalidParameter("n_wf must be >= 1".into()));
        }
        if self.n_mode < 1 || self.n_mode > self.grid.n_samp() {
            return Err(Error::InvalidParameter(format!(
                "n_mode = {} outside [1, n_samp = {}]",
                self.n_mode,
                self.grid.n_samp()
            )));
        }
        if let Some(mode) = &self.state.mode {
            if mode.grid() != self.grid {
                return Err(Error::Dimension(
                    "state mode grid differs from config grid".into(),
                ));
            }
        }
        if let Some(filter) = &self.filter {
            filter.validate(self.grid)?;
            if self.n_mode != self.grid.n_samp() {
                return Err(Error::InvalidParameter(
                    "filtered synthesis requires n_mode == n_samp".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Several independently occupied single-photon modes (a product of single
/// photons in orthogonal modes); used by the purity verification path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureConfig {
    /// (mode, detection efficiency) per photon; modes must stay orthogonal.
    pub photons: Vec<(TemporalMode, f64)>,
    pub grid: TimeGrid,
    pub n_wf: u64,
    pub n_mode: usize,
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// Waveform batches
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Simulated {
        config: SimulationConfig,
    },
    SimulatedMixture {
        config: MixtureConfig,
    },
    Ingested {
        path: String,
        format: String,
        sigma0_sq_raw: f64,
    },
    Constructed {
        label: String,
    },
}

/// A batch of real quadrature waveforms.
#[derive(Debug, Clone)]
pub struct WaveformBatch {
    grid: TimeGrid,
    n_wf: usize,
    /// Row-major `n_wf x n_samp`.
    data: Vec<f64>,
    /// Raw vacuum variance of `data`; 1.0 for simulated batches.
    sigma0_sq: f64,
    provenance: Provenance,
}

impl WaveformBatch {
    pub fn from_rows(
        grid: TimeGrid,
        data: Vec<f64>,
        sigma0_sq: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        let n_samp = grid.n_samp();
        if data.is_empty() || !data.len().is_multiple_of(n_samp) {
            return Err(Error::Dimension(format!(
                "{} samples do not tile a {n_samp}-sample grid",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("batch contains non-finite samples".into()));
        }
        if !(sigma0_sq.is_finite() && sigma0_sq > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "vacuum calibration must be positive, got {sigma0_sq}"
            )));
        }
        let n_wf = data.len() / n_samp;
        Ok(Self {
            grid,
            n_wf,
            data,
            sigma0_sq,
            provenance,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n_wf(&self) -> usize {
        self.n_wf
    }

    pub fn n_samp(&self) -> usize {
        self.grid.n_samp()
    }

    pub fn sigma0_sq(&self) -> f64 {
        self.sigma0_sq
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn waveform(&self, w: usize) -> &[f64] {
        let n = self.n_samp();
        &self.data[w * n..(w + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_samp())
    }

    pub fn raw_data(&self) -> &[f64] {
        &self.data
    }
}

/// Anything that can hand out contiguous chunks of waveforms by index.
///
/// Both materialized batches and on-the-fly synthesizers implement this, so
/// kernel estimation has a single, chunk-deterministic code path.
pub trait WaveformSource: Sync {
    fn grid(&self) -> TimeGrid;
    fn n_wf(&self) -> u64;
    fn sigma0_sq(&self) -> f64 {
        SIGMA0_SQ
    }
    /// Waveforms `start..start+len` as a `len x n_samp` matrix.
    fn chunk(&self, start: u64, len: usize) -> DMatrix<f64>;
}

impl WaveformSource for WaveformBatch {
    fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn n_wf(&self) -> u64 {
        self.n_wf as u64
    }

    fn sigma0_sq(&self) -> f64 {
        self.sigma0_sq
    }

    fn chunk(&self, start: u64, len: usize) -> DMatrix<f64> {
        let n = self.n_samp();
        let start = start as usize;
        DMatrix::from_row_slice(len, n, &self.data[start * n..(start + len) * n])
    }
}

// ---------------------------------------------------------------------------
// Mode-resolved quadrature samplers
// ---------------------------------------------------------------------------

/// Draw from the vacuum quadrature distribution, Normal(0, 1).
pub fn sample_vacuum<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draw from the single-photon quadrature density
/// `P1(x) = x^2 exp(-x^2/2) / sqrt(2 pi)`.
///
/// `x^2` is chi-square distributed with 3 degrees of freedom and the density
/// is even, so a signed square root of a chi-square draw has exactly this law.
pub fn sample_single_photon<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let chi2 = ChiSquared::new(3.0).expect("static dof");
    let draw: f64 = chi2.sample(rng);
    let x = draw.sqrt();
    if rng.gen::<bool>() {
        x
    } else {
        -x
    }
}

/// Quadrature of a mode holding a single photon with probability `eta` and
/// vacuum otherwise.
pub fn sample_photon_marginal<R: Rng + ?Sized>(rng: &mut R, eta: f64) -> f64 {
    if rng.gen::<f64>() < eta {
        sample_single_photon(rng)
    } else {
        sample_vacuum(rng)
    }
}

/// Joint quadrature draw for the two real carriers of a complex mode
/// `f = t f_r + i r f_i` holding a single photon detected with efficiency
/// `eta`.
///
/// The joint law is
/// `eta (t^2 P1(x_r) P0(x_i) + r^2 P0(x_r) P1(x_i)) + (1-eta) P0(x_r) P0(x_i)`;
/// the cross term vanishes identically for the i-phased superposition, so a
/// three-branch mixture reproduces it exactly. The equivalence with the
/// marginal-then-conditional construction is asserted in the distribution
/// test suite against an independent reference sampler.
pub fn sample_complex_photon_pair<R: Rng + ?Sized>(
    rng: &mut R,
    t_amp: f64,
    r_amp: f64,
    eta: f64,
) -> Result<(f64, f64)> {
    if (t_amp * t_amp + r_amp * r_amp - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "carrier amplitudes not normalized: t^2 + r^2 = {}",
            t_amp * t_amp + r_amp * r_amp
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "eta = {eta} outside [0, 1]"
        )));
    }
    let u: f64 = rng.gen();
    let branch_t = eta * t_amp * t_amp;
    Ok(if u < branch_t {
        (sample_single_photon(rng), sample_vacuum(rng))
    } else if u < eta {
        (sample_vacuum(rng), sample_single_photon(rng))
    } else {
        (sample_vacuum(rng), sample_vacuum(rng))
    })
}

/// Per-mode quadrature draws for a coherent state at local-oscillator phase
/// `theta`: `x_j ~ Normal(2 Re(alpha_j e^{-i theta}), 1)` with
/// `alpha_j = alpha <f_j, f>`.
pub fn sample_coherent_mode_amplitudes<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: C64,
    basis_overlaps: &[C64],
    theta: f64,
) -> Vec<f64> {
    let rot = C64::from_polar(1.0, -theta);
    basis_overlaps
        .iter()
        .map(|ov| 2.0 * (alpha * ov * rot).re + sample_vacuum(rng))
        .collect()
}

// ---------------------------------------------------------------------------
// Synthesizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Occupation {
    Real {
        carrier: usize,
        eta: f64,
    },
    Complex {
        carrier_r: usize,
        carrier_i: usize,
        t_amp: f64,
        r_amp: f64,
        eta: f64,
    },
}

#[derive(Debug, Clone)]
enum DrawKind {
    /// Independently occupied photon carriers; empty means vacuum everywhere.
    Photons(Vec<Occupation>),
    /// One global LO phase per waveform, uniform on [0, 2 pi).
    Coherent { alpha: C64, overlaps: Vec<C64> },
}

#[derive(Debug, Clone)]
struct FirFilter {
    taps: Vec<f64>,
}

impl FirFilter {
    fn design(spec: &FilterSpec, dt: f64) -> Self {
        let mut taps = vec![1.0];
        if let Some(fc) = spec.low_pass_hz {
            taps = convolve(&taps, &low_pass_taps(fc, dt));
        }
        if let Some(fc) = spec.high_pass_hz {
            taps = convolve(&taps, &high_pass_taps(fc, dt));
        }
        Self { taps }
    }

    fn len(&self) -> usize {
        self.taps.len()
    }

    /// 'same' convolution; the read-back region must sit at least one group
    /// delay away from both ends of `row`.
    fn apply_into(&self, row: &[f64], out: &mut [f64], offset: usize) {
        let m = (self.taps.len() - 1) / 2;
        for (k, o) in out.iter_mut().enumerate() {
            let center = offset + k;
            let mut acc = 0.0;
            for (j, tap) in self.taps.iter().enumerate() {
                acc += tap * row[center + m - j];
            }
            *o = acc;
        }
    }
}

fn hamming(k: usize, len: usize) -> f64 {
    0.54 - 0.46 * (TAU * k as f64 / (len - 1) as f64).cos()
}

fn low_pass_taps(cutoff_hz: f64, dt: f64) -> Vec<f64> {
    let len = 2 * FIR_HALF_ORDER + 1;
    let fc = cutoff_hz * dt; // cycles per sample
    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let u = k as f64 - FIR_HALF_ORDER as f64;
            let arg = TAU * fc * u;
            let sinc = if u == 0.0 { 1.0 } else { arg.sin() / arg };
            2.0 * fc * sinc * hamming(k, len)
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= sum;
    }
    taps
}

fn high_pass_taps(cutoff_hz: f64, dt: f64) -> Vec<f64> {
    // spectral inversion of the matching low-pass
    let mut taps: Vec<f64> = low_pass_taps(cutoff_hz, dt).iter().map(|t| -t).collect();
    taps[FIR_HALF_ORDER] += 1.0;
    taps
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Streaming waveform generator for one simulation configuration.
pub struct Synthesizer {
    out_grid: TimeGrid,
    n_wf: u64,
    seed: u64,
    /// Real carrier functions, one per row (`n_mode x n_samp_ext`). `None`
    /// means the canonical basis, valid for vacuum where the statistics are
    /// basis invariant.
    carriers: Option<DMatrix<f64>>,
    n_mode: usize,
    n_samp_ext: usize,
    guard: usize,
    draw: DrawKind,
    filter: Option<FirFilter>,
}

impl Synthesizer {
    pub fn from_config(config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let (ext_grid, guard, filter) = match &config.filter {
            None => (config.grid, 0usize, None),
            Some(spec) => {
                let fir = FirFilter::design(spec, config.grid.dt());
                let guard = 3 * fir.len();
                let ext = TimeGrid::new(config.grid.n_samp() + 2 * guard, config.grid.dt())?;
                (ext, guard, Some(fir))
            }
        };
        let n_samp_ext = ext_grid.n_samp();
        // On a guard-extended segment every extra mode carries vacuum, so
        // the basis is completed to full rank there.
        let n_mode_ext = if guard > 0 { n_samp_ext } else { config.n_mode };

        let embed = |m: &TemporalMode| -> Result<TemporalMode> {
            if guard == 0 {
                return Ok(m.clone());
            }
            let mut samples = vec![C64::new(0.0, 0.0); n_samp_ext];
            samples[guard..guard + m.n_samp()].copy_from_slice(m.samples());
            mode::normalize(samples, ext_grid)
        };

        let (carriers, draw) = match config.state.kind {
            StateKind::Vacuum => (None, DrawKind::Photons(Vec::new())),
            StateKind::SinglePhoton => {
                let f = embed(config.state.mode.as_ref().expect("validated"))?;
                let split = split_mode(&f)?;
                if split.is_complex() && config.n_mode < 2 {
                    return Err(Error::InvalidParameter(
                        "a complex mode needs two carriers: n_mode must be >= 2".into(),
                    ));
                }
                let basis =
                    mode::extend_carriers(ext_grid, &split.carriers, n_mode_ext, config.seed)?;
                let occupation = if split.is_complex() {
                    Occupation::Complex {
                        carrier_r: 0,
                        carrier_i: 1,
                        t_amp: split.t_amp,
                        r_amp: split.r_amp,
                        eta: config.state.mean_photons,
                    }
                } else {
                    Occupation::Real {
                        carrier: 0,
                        eta: config.state.mean_photons,
                    }
                };
                (
                    Some(basis.carrier_matrix()),
                    DrawKind::Photons(vec![occupation]),
                )
            }
            StateKind::Coherent => {
                let f = embed(config.state.mode.as_ref().expect("validated"))?;
                let split = split_mode(&f)?;
                if split.is_complex() && config.n_mode < 2 {
                    return Err(Error::InvalidParameter(
                        "a complex mode needs two carriers: n_mode must be >= 2".into(),
                    ));
                }
                let basis =
                    mode::extend_carriers(ext_grid, &split.carriers, n_mode_ext, config.seed)?;
                let alpha = C64::new(config.state.mean_photons.sqrt(), 0.0);
                let overlaps = basis
                    .modes()
                    .iter()
                    .map(|b| overlap(b, &f))
                    .collect::<Result<Vec<_>>>()?;
                (
                    Some(basis.carrier_matrix()),
                    DrawKind::Coherent { alpha, overlaps },
                )
            }
        };

        Ok(Self {
            out_grid: config.grid,
            n_wf: config.n_wf,
            seed: config.seed,
            carriers,
            n_mode: n_mode_ext,
            n_samp_ext,
            guard,
            draw,
            filter,
        })
    }

    /// Independent single photons in mutually orthogonal modes.
    pub fn from_mixture(config: &MixtureConfig) -> Result<Self> {
        if config.photons.is_empty() {
            return Err(Error::InvalidParameter("mixture with no photons".into()));
        }
        if config.n_wf < 1 {
            return Err(Error::InvalidParameter("n_wf must be >= 1".into()));
        }
        let mut carriers: Vec<TemporalMode> = Vec::new();
        let mut occupations = Vec::new();
        for (f, eta) in &config.photons {
            if f.grid() != config.grid {
                return Err(Error::Dimension(
                    "mixture mode grid differs from config grid".into(),
                ));
            }
            if !(0.0..=1.0).contains(eta) {
                return Err(Error::InvalidParameter(format!(
                    "eta = {eta} outside [0, 1]"
                )));
            }
            let split = split_mode(f)?;
            // Carriers of distinct photons must be orthogonal for the
            // independent-draw model to hold; a small residual overlap is
            // projected out, anything larger is rejected.
            let mut indices = Vec::new();
            for c in &split.carriers {
                let mut v: Vec<f64> = c.samples().iter().map(|z| z.re).collect();
                for prev in &carriers {
                    let dot: f64 = v.iter().zip(prev.samples()).map(|(a, b)| a * b.re).sum();
                    for (x, b) in v.iter_mut().zip(prev.samples()) {
                        *x -= dot * b.re;
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 0.999 {
                    return Err(Error::InvalidParameter(
                        "mixture modes overlap; photons must occupy orthogonal modes".into(),
                    ));
                }
                for x in v.iter_mut() {
                    *x /= norm;
                }
                indices.push(carriers.len());
                carriers.push(TemporalMode::from_real(config.grid, &v)?);
            }
            occupations.push(if split.is_complex() {
                Occupation::Complex {
                    carrier_r: indices[0],
                    carrier_i: indices[1],
                    t_amp: split.t_amp,
                    r_amp: split.r_amp,
                    eta: *eta,
                }
            } else {
                Occupation::Real {
                    carrier: indices[0],
                    eta: *eta,
                }
            });
        }
        if config.n_mode < carriers.len() || config.n_mode > config.grid.n_samp() {
            return Err(Error::InvalidParameter(format!(
                "n_mode = {} outside [{}, {}]",
                config.n_mode,
                carriers.len(),
                config.grid.n_samp()
            )));
        }
        let basis = mode::extend_carriers(config.grid, &carriers, config.n_mode, config.seed)?;
        Ok(Self {
            out_grid: config.grid,
            n_wf: config.n_wf,
            seed: config.seed,
            carriers: Some(basis.carrier_matrix()),
            n_mode: config.n_mode,
            n_samp_ext: config.grid.n_samp(),
            guard: 0,
            draw: DrawKind::Photons(occupations),
            filter: None,
        })
    }

    fn fill_amplitudes(&self, w: u64, out: &mut [f64]) {
        let mut rng = rng::waveform_rng(self.seed, w);
        match &self.draw {
            DrawKind::Photons(occupations) => {
                for x in out.iter_mut() {
                    *x = sample_vacuum(&mut rng);
                }
                for occ in occupations {
                    match *occ {
                        Occupation::Real { carrier, eta } => {
                            out[carrier] = sample_photon_marginal(&mut rng, eta);
                        }
                        Occupation::Complex {
                            carrier_r,
                            carrier_i,
                            t_amp,
                            r_amp,
                            eta,
                        } => {
                            let (xr, xi) = sample_complex_photon_pair(&mut rng, t_amp, r_amp, eta)
                                .expect("validated at construction");
                            out[carrier_r] = xr;
                            out[carrier_i] = xi;
                        }
                    }
                }
            }
            DrawKind::Coherent { alpha, overlaps } => {
                let theta = rng.gen::<f64>() * TAU;
                let draws = sample_coherent_mode_amplitudes(&mut rng, *alpha, overlaps, theta);
                out.copy_from_slice(&draws);
            }
        }
    }
}

impl WaveformSource for Synthesizer {
    fn grid(&self) -> TimeGrid {
        self.out_grid
    }

    fn n_wf(&self) -> u64 {
        self.n_wf
    }

    fn chunk(&self, start: u64, len: usize) -> DMatrix<f64> {
        let n_samp = self.out_grid.n_samp();
        let mut amps = vec![0.0; len * self.n_mode];
        for (i, row) in amps.chunks_exact_mut(self.n_mode).enumerate() {
            self.fill_amplitudes(start + i as u64, row);
        }
        let a = DMatrix::from_row_slice(len, self.n_mode, &amps);
        let x = match &self.carriers {
            Some(f) => &a * f,
            None => {
                // canonical basis: x_k equals the k-th draw, zero beyond n_mode
                if self.n_mode == self.n_samp_ext {
                    a
                } else {
                    let mut x = DMatrix::zeros(len, self.n_samp_ext);
                    x.view_mut((0, 0), (len, self.n_mode)).copy_from(&a);
                    x
                }
            }
        };
        match &self.filter {
            None => x,
            Some(fir) => {
                let mut out = DMatrix::zeros(len, n_samp);
                let mut row = vec![0.0; self.n_samp_ext];
                let mut filtered = vec![0.0; n_samp];
                for i in 0..len {
                    for (k, r) in row.iter_mut().enumerate() {
                        *r = x[(i, k)];
                    }
                    fir.apply_into(&row, &mut filtered, self.guard);
                    for (k, v) in filtered.iter().enumerate() {
                        out[(i, k)] = *v;
                    }
                }
                out
            }
        }
    }
}

/// Materialize a full batch from a configuration.
pub fn synthesize_batch(config: &SimulationConfig) -> Result<WaveformBatch> {
    let synth = Synthesizer::from_config(config)?;
    materialize(
        &synth,
        Provenance::Simulated {
            config: config.clone(),
        },
    )
}

/// Materialize a mixture batch.
pub fn synthesize_mixture_batch(config: &MixtureConfig) -> Result<WaveformBatch> {
    let synth = Synthesizer::from_mixture(config)?;
    materialize(
        &synth,
        Provenance::SimulatedMixture {
            config: config.clone(),
        },
    )
}

fn materialize(synth: &Synthesizer, provenance: Provenance) -> Result<WaveformBatch> {
    let n_wf = synth.n_wf() as usize;
    let n_samp = synth.grid().n_samp();
    let n_chunks = n_wf.div_ceil(CHUNK_WF);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_WF;
            let len = CHUNK_WF.min(n_wf - start);
            let m = synth.chunk(start as u64, len);
            let mut rows = vec![0.0; len * n_samp];
            for i in 0..len {
                for k in 0..n_samp {
                    rows[i * n_samp + k] = m[(i, k)];
                }
            }
            rows
        })
        .collect();
    let mut data = Vec::with_capacity(n_wf * n_samp);
    for c in chunks {
        data.extend_from_slice(&c);
    }
    WaveformBatch::from_rows(synth.grid(), data, SIGMA0_SQ, provenance)
}
