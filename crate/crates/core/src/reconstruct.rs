//! Mode reconstruction from an eigen-spectrum, with conjugation-ambiguity
//! handling and single-mode purity diagnostics.
//!
//! Single-frequency homodyne data cannot distinguish a mode from its complex
//! conjugate, so reconstruction always reports both candidates; a best-
//! fidelity pick happens only when a target is supplied.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{eigendecompose, estimate_kernel_from_source, EigenSpectrum};
use crate::mode::{fidelity, normalize, overlap, TemporalMode};
use crate::rng;
use crate::sim::{MixtureConfig, SimulationConfig, Synthesizer, WaveformBatch};

/// Default z-score on the vacuum band for "eigenvalue greater than one".
pub const DEFAULT_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurityCase {
    /// Zero or one eigenvalue above the band: a pure real-valued mode
    /// (zero above means vacuum, flagged by `above_vacuum_count == 0`).
    RealSingleMode,
    /// Two above: a pure complex mode or two modes; verification can tell.
    ComplexOrTwoMode,
    /// Three or more above: beyond single-mode reconstruction.
    Multimode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityVerdict {
    pub case: PurityCase,
    pub above_vacuum_count: usize,
    pub threshold: f64,
}

impl PurityVerdict {
    /// Verdict that forces the two-eigenmode reconstruction path regardless
    /// of the band count (the no-assumption analysis mode).
    pub fn forced_complex(threshold: f64) -> Self {
        Self {
            case: PurityCase::ComplexOrTwoMode,
            above_vacuum_count: 2,
            threshold,
        }
    }
}

/// Count modes with `n_i` above the statistical vacuum band
/// `z sqrt(N_mode_eff / N_wf)` and apply the three-case rule.
pub fn classify_spectrum(
    spectrum: &EigenSpectrum,
    n_wf: u64,
    n_mode_eff: f64,
    z: f64,
) -> PurityVerdict {
    let threshold = z * (n_mode_eff / n_wf as f64).sqrt();
    let above_vacuum_count = spectrum
        .photon_numbers()
        .iter()
        .filter(|&&n| n > threshold)
        .count();
    let case = match above_vacuum_count {
        0 | 1 => PurityCase::RealSingleMode,
        2 => PurityCase::ComplexOrTwoMode,
        _ => PurityCase::Multimode,
    };
    PurityVerdict {
        case,
        above_vacuum_count,
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Highest fidelity over the conjugate pair (and, under eigenvalue
    /// degeneracy, over rotations of the degenerate plane).
    pub best: f64,
    pub plus: f64,
    pub minus: f64,
}

/// Reconstructed mode together with photon numbers and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub candidate_plus: TemporalMode,
    /// Complex conjugate of `candidate_plus` up to a global phase.
    pub candidate_minus: TemporalMode,
    pub n1: f64,
    pub n2: f64,
    pub n_total: f64,
    pub case: PurityCase,
    pub above_vacuum_count: usize,
    pub threshold_used: f64,
    pub fidelity_vs_target: Option<FidelityReport>,
}

/// Rebuild the mode from the top eigenpair(s) per the verdict.
pub fn reconstruct_mode(
    spectrum: &EigenSpectrum,
    verdict: &PurityVerdict,
) -> Result<ReconstructionResult> {
    if spectrum.is_empty() {
        return Err(Error::Dimension("empty spectrum".into()));
    }
    if spectrum.eigenvalues()[0] < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "negative estimated eigenvalue {}; kernel is not positive semidefinite",
            spectrum.eigenvalues()[0]
        )));
    }
    match verdict.case {
        PurityCase::Multimode => Err(Error::UnsupportedMultimode {
            count: verdict.above_vacuum_count,
        }),
        PurityCase::RealSingleMode => {
            let n1 = spectrum.photon_numbers()[0];
            if n1 < 0.0 {
                return Err(Error::StatisticalFloor(format!(
                    "top photon number estimate {n1} is negative"
                )));
            }
            let candidate = spectrum.eigenvector_mode(0);
            Ok(ReconstructionResult {
                candidate_minus: candidate.clone(),
                candidate_plus: candidate,
                n1,
                n2: 0.0,
                n_total: n1,
                case: verdict.case,
                above_vacuum_count: verdict.above_vacuum_count,
                threshold_used: verdict.threshold,
                fidelity_vs_target: None,
            })
        }
        PurityCase::ComplexOrTwoMode => {
            if spectrum.len() < 2 {
                return Err(Error::Dimension(
                    "complex reconstruction needs two eigenpairs".into(),
                ));
            }
            let n1 = spectrum.photon_numbers()[0];
            let n2 = spectrum.photon_numbers()[1];
            if n2 <= 0.0 {
                return Err(Error::StatisticalFloor(format!(
                    "second photon number estimate {n2} is not above vacuum"
                )));
            }
            let v1 = spectrum.eigenvector(0);
            let v2 = spectrum.eigenvector(1);
            let n_total = n1 + n2;
            let scale = n_total.sqrt().recip();
            let (w1, w2) = (n1.sqrt() * scale, n2.sqrt() * scale);
            let plus: Vec<C64> = v1
                .iter()
                .zip(&v2)
                .map(|(a, b)| C64::new(w1 * a, w2 * b))
                .collect();
            let minus: Vec<C64> = plus.iter().map(|z| z.conj()).collect();
            let grid = spectrum.grid();
            Ok(ReconstructionResult {
                candidate_plus: normalize(plus, grid)?,
                candidate_minus: normalize(minus, grid)?,
                n1,
                n2,
                n_total,
                case: verdict.case,
                above_vacuum_count: verdict.above_vacuum_count,
                threshold_used: verdict.threshold,
                fidelity_vs_target: None,
            })
        }
    }
}

/// Best fidelity over rotations of the two-eigenvector plane, for both
/// conjugate families.
///
/// Under exact eigenvalue degeneracy the eigenpair is only defined up to a
/// rotation; the optimum over the rotation angle has the closed form of the
/// top eigenvalue of a 2x2 quadratic form.
pub fn subspace_optimal_fidelity(
    target: &TemporalMode,
    v1: &TemporalMode,
    v2: &TemporalMode,
    n1: f64,
    n2: f64,
) -> Result<f64> {
    let u1 = overlap(target, v1)?;
    let u2 = overlap(target, v2)?;
    let (s1, s2) = (n1.sqrt(), n2.sqrt());
    let mut best = 0.0f64;
    for sign in [1.0, -1.0] {
        let i_s = C64::new(0.0, sign);
        let a = s1 * u1 + i_s * s2 * u2;
        let b = s1 * u2 - i_s * s2 * u1;
        let (pa, pb) = (a.norm_sqr(), b.norm_sqr());
        let cross = (a * b.conj()).re;
        let val = 0.5 * (pa + pb) + (0.25 * (pa - pb).powi(2) + cross * cross).sqrt();
        best = best.max(val / (n1 + n2));
    }
    Ok(best)
}

/// Compute fidelities of both candidates against a target and record them.
///
/// When the two photon numbers agree within `degeneracy_band`, the
/// eigenvectors are individually meaningless and the subspace-optimal value
/// is reported as `best`.
pub fn attach_target_fidelity(
    result: &mut ReconstructionResult,
    target: &TemporalMode,
    degeneracy_band: f64,
) -> Result<()> {
    let plus = fidelity(target, &result.candidate_plus)?;
    let minus = fidelity(target, &result.candidate_minus)?;
    let mut best = plus.max(minus);
    if result.n2 > 0.0 && (result.n1 - result.n2).abs() <= degeneracy_band {
        let (v1, v2) = carrier_vectors(result)?;
        best = best.max(subspace_optimal_fidelity(
            target, &v1, &v2, result.n1, result.n2,
        )?);
    }
    result.fidelity_vs_target = Some(FidelityReport { best, plus, minus });
    Ok(())
}

/// Recover the two real eigenvectors from a complex-case candidate.
fn carrier_vectors(result: &ReconstructionResult) -> Result<(TemporalMode, TemporalMode)> {
    let grid = result.candidate_plus.grid();
    let re: Vec<f64> = result
        .candidate_plus
        .samples()
        .iter()
        .map(|z| z.re)
        .collect();
    let im: Vec<f64> = result
        .candidate_plus
        .samples()
        .iter()
        .map(|z| z.im)
        .collect();
    Ok((
        TemporalMode::from_real(grid, &re)?,
        TemporalMode::from_real(grid, &im)?,
    ))
}

/// A re-runnable origin for verification batches.
pub enum BatchSource {
    Simulated(SimulationConfig),
    SimulatedMixture(MixtureConfig),
    /// A second recorded dataset taken with the compensating phase applied
    /// on the local oscillator.
    Recorded(WaveformBatch),
}

/// Re-run the pipeline with the compensating phase `-phi(t)` applied, and
/// classify the new spectrum: a pure single (complex) mode turns real and
/// must leave exactly one eigenvalue above the band.
///
/// The sign of phi is itself ambiguous (conjugate candidates), so both
/// compensations are tried and the cleaner verdict is returned; a mixture
/// stays multi-mode under either.
pub fn verify_single_mode(
    source: &BatchSource,
    result: &ReconstructionResult,
    z: f64,
) -> Result<PurityVerdict> {
    match source {
        BatchSource::Recorded(batch) => {
            let spectrum = eigendecompose(&estimate_kernel_from_source(batch)?)?;
            Ok(classify_spectrum(
                &spectrum,
                batch.n_wf() as u64,
                batch.n_samp() as f64,
                z,
            ))
        }
        BatchSource::Simulated(config) => {
            let phases = [
                result.candidate_plus.phase(),
                result.candidate_minus.phase(),
            ];
            let tags = [rng::tag::VERIFY_PLUS, rng::tag::VERIFY_MINUS];
            let mut best: Option<PurityVerdict> = None;
            for (phase, tag) in phases.iter().zip(tags) {
                let mut compensated = config.clone();
                compensated.seed = rng::derive_seed(config.seed, tag, 0);
                if let Some(mode) = &config.state.mode {
                    let neg: Vec<f64> = phase.iter().map(|p| -p).collect();
                    compensated.state.mode = Some(mode.with_phase(&neg)?);
                }
                let verdict = run_and_classify(
                    &Synthesizer::from_config(&compensated)?,
                    compensated.n_wf,
                    compensated.n_mode as f64,
                    z,
                )?;
                if best.is_none_or(|b| verdict.above_vacuum_count < b.above_vacuum_count) {
                    best = Some(verdict);
                }
                if matches!(verdict.case, PurityCase::RealSingleMode) {
                    break;
                }
            }
            Ok(best.expect("at least one compensation ran"))
        }
        BatchSource::SimulatedMixture(config) => {
            let phases = [
                result.candidate_plus.phase(),
                result.candidate_minus.phase(),
            ];
            let tags = [rng::tag::VERIFY_PLUS, rng::tag::VERIFY_MINUS];
            let mut best: Option<PurityVerdict> = None;
            for (phase, tag) in phases.iter().zip(tags) {
                let neg: Vec<f64> = phase.iter().map(|p| -p).collect();
                let mut compensated = config.clone();
                compensated.seed = rng::derive_seed(config.seed, tag, 0);
                for (mode, _) in compensated.photons.iter_mut() {
                    *mode = mode.with_phase(&neg)?;
                }
                let verdict = run_and_classify(
                    &Synthesizer::from_mixture(&compensated)?,
                    compensated.n_wf,
                    compensated.n_mode as f64,
                    z,
                )?;
                if best.is_none_or(|b| verdict.above_vacuum_count < b.above_vacuum_count) {
                    best = Some(verdict);
                }
                if matches!(verdict.case, PurityCase::RealSingleMode) {
                    break;
                }
            }
            Ok(best.expect("at least one compensation ran"))
        }
    }
}

fn run_and_classify(
    synth: &Synthesizer,
    n_wf: u64,
    n_mode_eff: f64,
    z: f64,
) -> Result<PurityVerdict> {
    let spectrum = eigendecompose(&estimate_kernel_from_source(synth)?)?;
    Ok(classify_spectrum(&spectrum, n_wf, n_mode_eff, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::kernel::Kernel;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(n, 0.25).unwrap()
    }

    fn spectrum_from(
        grid: TimeGrid,
        eigenvalues: Vec<f64>,
        vectors: DMatrix<f64>,
        n_wf: u64,
    ) -> EigenSpectrum {
        EigenSpectrum::from_parts(grid, eigenvalues, vectors, n_wf).unwrap()
    }

    fn padded_spectrum(kappas: &[f64], n: usize, n_wf: u64) -> EigenSpectrum {
        let mut eigenvalues = vec![1.0; n];
        eigenvalues[..kappas.len()].copy_from_slice(kappas);
        spectrum_from(grid(n), eigenvalues, DMatrix::identity(n, n), n_wf)
    }

    #[test]
    fn classify_three_cases() {
        // vacuum-like: nothing above the band
        let s = padded_spectrum(&[1.02, 1.01], 8, 1_000_000);
        let v = classify_spectrum(&s, 1_000_000, 100.0, 3.0);
        assert_eq!(v.case, PurityCase::RealSingleMode);
        assert_eq!(v.above_vacuum_count, 0);
        assert_abs_diff_eq!(v.threshold, 0.03, epsilon = 1e-12);

        // kappa = {3, 1, ...}: one mode, real
        let s = padded_spectrum(&[3.0], 8, 1_000_000);
        let v = classify_spectrum(&s, 1_000_000, 100.0, 3.0);
        assert_eq!(v.case, PurityCase::RealSingleMode);
        assert_eq!(v.above_vacuum_count, 1);

        // kappa = {7/3, 5/3, 1, ...}: two modes above
        let s = padded_spectrum(&[7.0 / 3.0, 5.0 / 3.0], 8, 1_000_000);
        let v = classify_spectrum(&s, 1_000_000, 100.0, 3.0);
        assert_eq!(v.case, PurityCase::ComplexOrTwoMode);
        assert_eq!(v.above_vacuum_count, 2);

        let s = padded_spectrum(&[3.0, 2.0, 1.5], 8, 1_000_000);
        let v = classify_spectrum(&s, 1_000_000, 100.0, 3.0);
        assert_eq!(v.case, PurityCase::Multimode);
    }

    #[test]
    fn reconstruct_complex_two_point_example() {
        // kappa = {7/3, 5/3} on e0, e1 -> candidate_plus = [sqrt(2/3), i/sqrt(3)]
        let s = padded_spectrum(&[7.0 / 3.0, 5.0 / 3.0], 2, 1_000_000);
        let v = classify_spectrum(&s, 1_000_000, 100.0, 3.0);
        let r = reconstruct_mode(&s, &v).unwrap();
        assert_abs_diff_eq!(r.n1, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.n2, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.n_total, 1.0, epsilon = 1e-12);
        let expect = crate::mode::normalize(
            vec![
                C64::new((2.0f64 / 3.0).sqrt(), 0.0),
                C64::new(0.0, (1.0f64 / 3.0).sqrt()),
            ],
            grid(2),
        )
        .unwrap();
        assert_abs_diff_eq!(
            fidelity(&expect, &r.candidate_plus).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // the minus candidate is the conjugate, fidelity 1/9 against f
        assert_abs_diff_eq!(
            fidelity(&expect, &r.candidate_minus).unwrap(),
            1.0 / 9.0,
            epsilon = 1e-12
        );

        let mut r = r;
        attach_target_fidelity(&mut r, &expect, 1e-9).unwrap();
        let f = r.fidelity_vs_target.unwrap();
        assert_abs_diff_eq!(f.best, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.plus.min(f.minus), 1.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn reconstruct_real_mode_is_top_eigenvector() {
        let s = padded_spectrum(&[3.0], 4, 1_000_000);
        let v = classify_spectrum(&s, 1_000_000, 100.0, 3.0);
        let r = reconstruct_mode(&s, &v).unwrap();
        assert_eq!(r.n2, 0.0);
        assert_abs_diff_eq!(
            fidelity(&s.eigenvector_mode(0), &r.candidate_plus).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn multimode_is_rejected() {
        let s = padded_spectrum(&[3.0, 2.0, 1.5], 8, 1_000_000);
        let v = classify_spectrum(&s, 1_000_000, 100.0, 3.0);
        assert!(matches!(
            reconstruct_mode(&s, &v),
            Err(Error::UnsupportedMultimode { count: 3 })
        ));
    }

    #[test]
    fn forced_complex_below_floor_errors() {
        let s = padded_spectrum(&[1.4, 0.98], 4, 10_000);
        let v = PurityVerdict::forced_complex(0.1);
        assert!(matches!(
            reconstruct_mode(&s, &v),
            Err(Error::StatisticalFloor(_))
        ));
    }

    #[test]
    fn energy_conservation_analytic() {
        let g = grid(6);
        let samples: Vec<C64> = (0..6)
            .map(|k| C64::new(0.4 + k as f64 * 0.1, (k as f64 * 0.7).sin()))
            .collect();
        let f = crate::mode::normalize(samples, g).unwrap();
        for n in [0.1, 1.0, 10.0] {
            let k = Kernel::analytic(&f, n);
            let s = crate::kernel::eigendecompose(&k).unwrap();
            let v = PurityVerdict::forced_complex(0.0);
            let r = reconstruct_mode(&s, &v).unwrap();
            assert_abs_diff_eq!(r.n_total, n, epsilon = 1e-9);
            assert_abs_diff_eq!(r.n_total, (k.trace() - 6.0) / 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn eq5_self_consistency_rebuilds_rank_two_kernel() {
        let g = grid(5);
        let samples: Vec<C64> = (0..5)
            .map(|k| C64::new((k as f64).cos() + 0.2, 0.3 * k as f64 - 0.7))
            .collect();
        let f = crate::mode::normalize(samples, g).unwrap();
        let n = 0.8;
        let k = Kernel::analytic(&f, n);
        let s = crate::kernel::eigendecompose(&k).unwrap();
        let r = reconstruct_mode(&s, &PurityVerdict::forced_complex(0.0)).unwrap();
        let rebuilt = Kernel::analytic(&r.candidate_plus, r.n_total);
        // the input kernel is already rank-2 above vacuum, so the rebuild
        // must reproduce it entirely
        let diff = (k.matrix() - rebuilt.matrix()).abs().max();
        assert!(diff < 1e-8, "max deviation {diff}");
    }

    #[test]
    fn conjugate_kernels_give_identical_candidate_pairs() {
        let g = grid(7);
        let samples: Vec<C64> = (0..7)
            .map(|k| C64::new((k as f64 * 1.3).sin(), (k as f64 * 0.4).cos()))
            .collect();
        let f = crate::mode::normalize(samples, g).unwrap();
        let r1 = reconstruct_mode(
            &crate::kernel::eigendecompose(&Kernel::analytic(&f, 1.0)).unwrap(),
            &PurityVerdict::forced_complex(0.0),
        )
        .unwrap();
        let r2 = reconstruct_mode(
            &crate::kernel::eigendecompose(&Kernel::analytic(&f.conjugate(), 1.0)).unwrap(),
            &PurityVerdict::forced_complex(0.0),
        )
        .unwrap();
        assert_eq!(r1.candidate_plus.samples(), r2.candidate_plus.samples());
        assert_eq!(r1.candidate_minus.samples(), r2.candidate_minus.samples());
    }

    #[test]
    fn fidelity_report_is_global_phase_invariant() {
        let g = grid(5);
        let samples: Vec<C64> = (0..5)
            .map(|k| C64::new(0.5 - 0.1 * k as f64, 0.2 * k as f64))
            .collect();
        let f = crate::mode::normalize(samples, g).unwrap();
        let s = crate::kernel::eigendecompose(&Kernel::analytic(&f, 1.2)).unwrap();
        let base = {
            let mut r = reconstruct_mode(&s, &PurityVerdict::forced_complex(0.0)).unwrap();
            attach_target_fidelity(&mut r, &f, 1e-9).unwrap();
            r.fidelity_vs_target.unwrap()
        };
        for k in 1..6 {
            let rot = C64::from_polar(1.0, 1.1 * k as f64);
            let rotated =
                crate::mode::normalize(f.samples().iter().map(|z| z * rot).collect(), g).unwrap();
            let mut r = reconstruct_mode(&s, &PurityVerdict::forced_complex(0.0)).unwrap();
            attach_target_fidelity(&mut r, &rotated, 1e-9).unwrap();
            let rep = r.fidelity_vs_target.unwrap();
            assert_abs_diff_eq!(rep.best, base.best, epsilon = 1e-12);
            assert_abs_diff_eq!(rep.plus, base.plus, epsilon = 1e-12);
        }
    }

    #[test]
    fn subspace_optimum_recovers_degenerate_mode() {
        // balanced mode: any rotated eigenpair must still yield fidelity 1
        let g = grid(4);
        let h0 = TemporalMode::from_real(g, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let h1 = TemporalMode::from_real(g, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let s = 0.5f64.sqrt();
        let f = crate::mode::normalize(
            vec![
                C64::new(s, 0.0),
                C64::new(0.0, s),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
            g,
        )
        .unwrap();
        for angle in [0.0f64, 0.4, 1.2, 2.8] {
            let (c, sn) = (angle.cos(), angle.sin());
            let w1 = TemporalMode::from_real(g, &[c, sn, 0.0, 0.0]).unwrap();
            let w2 = TemporalMode::from_real(g, &[-sn, c, 0.0, 0.0]).unwrap();
            let best = subspace_optimal_fidelity(&f, &w1, &w2, 0.5, 0.5).unwrap();
            assert_abs_diff_eq!(best, 1.0, epsilon = 1e-12);
            let _ = (&h0, &h1);
        }
    }
}
