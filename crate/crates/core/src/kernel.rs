//! Empirical autocorrelation kernel and its eigendecomposition.
//!
//! For records of a state with mean photon number n in a pure mode f, the
//! kernel converges to `I + 2 n Re[f f^dag]` in vacuum units: the identity
//! from the vacuum of every mode plus a rank-(1 or 2) excess carrying the
//! mode shape. Accumulation is chunked with a fixed pairwise reduction tree,
//! so the result is bit-identical for any worker count.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mode::TemporalMode;
use crate::sim::{WaveformBatch, WaveformSource, CHUNK_WF};

/// Max |n_i| above this multiple of the expected vacuum edge flags a
/// non-vacuum input to the effective-mode-count estimator.
const CONTAMINATION_FACTOR: f64 = 5.0;

/// Symmetric empirical autocorrelation matrix in vacuum units.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    grid: TimeGrid,
    matrix: DMatrix<f64>,
    n_wf_used: u64,
}

impl Kernel {
    /// Wrap a precomputed symmetric matrix (e.g. an analytic model kernel).
    pub fn from_matrix(grid: TimeGrid, matrix: DMatrix<f64>, n_wf_used: u64) -> Result<Self> {
        let n = grid.n_samp();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "kernel is {}x{} on a {n}-sample grid",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("kernel contains non-finite entries".into()));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kernel not exactly symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self {
            grid,
            matrix,
            n_wf_used,
        })
    }

    /// Analytic model kernel `I + 2 n Re[f f^dag]`.
    pub fn analytic(f: &TemporalMode, mean_photons: f64) -> Self {
        let n = f.n_samp();
        let s = f.samples();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = 2.0 * mean_photons * (s[i] * s[j].conj()).re;
            }
            m[(i, i)] += 1.0;
        }
        // (f_i f_j*).re is symmetric in (i, j); enforce exactly anyway
        let m = (&m + m.transpose()) * 0.5;
        Self {
            grid: f.grid(),
            matrix: m,
            n_wf_used: 0,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n_samp(&self) -> usize {
        self.grid.n_samp()
    }

    pub fn n_wf_used(&self) -> u64 {
        self.n_wf_used
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// Sum matrices pairwise in a fixed tree; the operand order never depends on
/// how the leaves were produced.
fn pairwise_tree_sum(mut layer: Vec<DMatrix<f64>>) -> DMatrix<f64> {
    debug_assert!(!layer.is_empty());
    while layer.len() > 1 {
        layer = layer
            .chunks(2)
            .map(|pair| {
                if pair.len() == 2 {
                    &pair[0] + &pair[1]
                } else {
                    pair[0].clone()
                }
            })
            .collect();
    }
    layer.pop().expect("nonempty")
}

/// Estimate `K_ij = (1 / (N_wf sigma0^2)) sum_w x_w(t_i) x_w(t_j)` from any
/// waveform source, chunk-parallel with a fixed reduction order.
///
/// The mean is not subtracted: the model concerns second moments and phase
/// averaging removes first moments. Use [`estimate_kernel_centered`] for
/// recorded data where an offset must be removed.
pub fn estimate_kernel_from_source<S: WaveformSource + ?Sized>(source: &S) -> Result<Kernel> {
    estimate_kernel_impl(source, false)
}

/// As [`estimate_kernel_from_source`] with the batch mean subtracted first.
pub fn estimate_kernel_centered<S: WaveformSource + ?Sized>(source: &S) -> Result<Kernel> {
    estimate_kernel_impl(source, true)
}

fn estimate_kernel_impl<S: WaveformSource + ?Sized>(
    source: &S,
    subtract_mean: bool,
) -> Result<Kernel> {
    let n_wf = source.n_wf();
    if n_wf == 0 {
        return Err(Error::InvalidParameter(
            "kernel estimation from an empty batch".into(),
        ));
    }
    let n_samp = source.grid().n_samp();
    let n_chunks = (n_wf as usize).div_ceil(CHUNK_WF);

    let mean = if subtract_mean {
        let partials: Vec<DMatrix<f64>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let start = (c * CHUNK_WF) as u64;
                let len = CHUNK_WF.min((n_wf - start) as usize);
                let x = source.chunk(start, len);
                DMatrix::from_fn(1, n_samp, |_, k| x.column(k).sum())
            })
            .collect();
        Some(pairwise_tree_sum(partials) / n_wf as f64)
    } else {
        None
    };

    let partials: Vec<DMatrix<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = (c * CHUNK_WF) as u64;
            let len = CHUNK_WF.min((n_wf - start) as usize);
            let mut x = source.chunk(start, len);
            if let Some(m) = &mean {
                for i in 0..len {
                    for k in 0..n_samp {
                        x[(i, k)] -= m[(0, k)];
                    }
                }
            }
            x.transpose() * x
        })
        .collect();

    let sum = pairwise_tree_sum(partials);
    let scale = 1.0 / (n_wf as f64 * source.sigma0_sq());
    let scaled = sum * scale;
    // exact symmetry by averaging the two accumulation orders
    let matrix = (&scaled + scaled.transpose()) * 0.5;
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Format("non-finite kernel accumulation".into()));
    }
    Ok(Kernel {
        grid: source.grid(),
        matrix,
        n_wf_used: n_wf,
    })
}

/// Estimate the kernel of a materialized batch.
pub fn estimate_kernel(batch: &WaveformBatch) -> Result<Kernel> {
    estimate_kernel_from_source(batch)
}

/// Eigendecomposition of a kernel, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigenSpectrum {
    grid: TimeGrid,
    eigenvalues: Vec<f64>,
    photon_numbers: Vec<f64>,
    /// Column j is the eigenvector of `eigenvalues[j]`.
    vectors: DMatrix<f64>,
    n_wf_used: u64,
}

impl EigenSpectrum {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Descending eigenvalues kappa_i.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Photon numbers `n_i = (kappa_i - 1) / 2`, same order.
    pub fn photon_numbers(&self) -> &[f64] {
        &self.photon_numbers
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n_wf_used(&self) -> u64 {
        self.n_wf_used
    }

    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }

    /// Eigenvector i as a real temporal mode.
    pub fn eigenvector_mode(&self, i: usize) -> TemporalMode {
        let v: Vec<f64> = self.vectors.column(i).iter().copied().collect();
        TemporalMode::from_real(self.grid, &v).expect("eigenvector is unit norm")
    }

    /// Build directly from parts (used by loaders and tests).
    pub fn from_parts(
        grid: TimeGrid,
        eigenvalues: Vec<f64>,
        vectors: DMatrix<f64>,
        n_wf_used: u64,
    ) -> Result<Self> {
        if vectors.ncols() != eigenvalues.len() || vectors.nrows() != grid.n_samp() {
            return Err(Error::Dimension("eigenvector matrix shape mismatch".into()));
        }
        let photon_numbers = eigenvalues.iter().map(|k| (k - 1.0) / 2.0).collect();
        Ok(Self {
            grid,
            eigenvalues,
            photon_numbers,
            vectors,
            n_wf_used,
        })
    }
}

/// Full symmetric eigendecomposition with a deterministic ordering and sign
/// convention: eigenvalues descending; each eigenvector's largest-magnitude
/// entry is positive (earliest index on ties).
pub fn eigendecompose(kernel: &Kernel) -> Result<EigenSpectrum> {
    let n = kernel.n_samp();
    let eig = nalgebra::SymmetricEigen::try_new(kernel.matrix.clone(), f64::EPSILON, 200 * n)
        .ok_or(Error::EigenNonConvergence(n))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        // sign convention: largest-|entry| positive, earliest index on ties
        let mut pivot = 0;
        for (k, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[(k, dst)] = sign * col[k];
        }
    }

    let spectrum = EigenSpectrum {
        grid: kernel.grid,
        photon_numbers: eigenvalues.iter().map(|k| (k - 1.0) / 2.0).collect(),
        eigenvalues,
        vectors,
        n_wf_used: kernel.n_wf_used,
    };
    debug_assert!(
        spectrum_residual(kernel, &spectrum) <= 1e-8 * kernel.matrix.abs().max().max(1.0)
    );
    Ok(spectrum)
}

/// Max-norm residual of the reconstruction `V diag(kappa) V^T`.
pub fn spectrum_residual(kernel: &Kernel, spectrum: &EigenSpectrum) -> f64 {
    let v = &spectrum.vectors;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum.eigenvalues.clone()));
    let rebuilt = v * d * v.transpose();
    (&kernel.matrix - rebuilt).abs().max()
}

/// Effective number of measured modes estimated from a vacuum spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveModeCount {
    /// `N_wf * (max_i n_i)^2`: the vacuum photon-number deviation scales as
    /// `sqrt(N_mode / N_wf)`, inverted for N_mode.
    pub primary: f64,
    /// Cross-check: number of eigenvalues with |n_i| above half the maximum
    /// deviation.
    pub count_based: usize,
}

/// Estimate how many modes the detection actually resolves from the spectrum
/// of a vacuum (calibration) batch.
pub fn estimate_effective_mode_count(
    vacuum_spectrum: &EigenSpectrum,
    n_wf: u64,
) -> Result<EffectiveModeCount> {
    if n_wf == 0 {
        return Err(Error::InvalidParameter("n_wf must be positive".into()));
    }
    let n_samp = vacuum_spectrum.grid.n_samp() as f64;
    let max_dev = vacuum_spectrum
        .photon_numbers
        .iter()
        .fold(0.0f64, |acc, n| acc.max(n.abs()));
    // expected vacuum edge if all n_samp modes are resolved
    let c = n_samp / n_wf as f64;
    let edge = c.sqrt() + 0.5 * c;
    let limit = CONTAMINATION_FACTOR * edge;
    if max_dev > limit {
        return Err(Error::Contaminated {
            max_photon: max_dev,
            limit,
        });
    }
    let count_based = vacuum_spectrum
        .photon_numbers
        .iter()
        .filter(|n| n.abs() > 0.5 * max_dev)
        .count();
    Ok(EffectiveModeCount {
        primary: n_wf as f64 * max_dev * max_dev,
        count_based,
    })
}
