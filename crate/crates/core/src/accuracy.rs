//! Closed-form predictors for reconstruction accuracy.
//!
//! With N_wf waveforms, N_mode measured modes and mean photon number n, the
//! single-eigenmode (real) reconstruction obeys
//!
//! ```text
//! mu(dF)    = (N_mode/2)/N_wf * (1/n) (1 + 1/(2n))
//! sigma(dF) = sqrt(N_mode/2)/N_wf * (1/n) (1 + 1/(2n))
//! mu(dn)_0  = sqrt(N_mode/N_wf)            (vacuum photon-number floor)
//! mu(dn)    = (N_mode/2)/N_wf * (1 + 1/(2n))
//! ```
//!
//! and the no-assumption complex reconstruction is bracketed by the balanced
//! case (n replaced by n/2) from below and by `mu(dn)_0 / n` from above.
//! Useful reconstructions need `sqrt(N_mode/N_wf) << n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio below which `sqrt(N_mode/N_wf) << n` is considered satisfied.
pub const REGIME_OK_RATIO: f64 = 0.1;
/// Ratio below which the regime is merely a warning, not yet breakdown.
pub const REGIME_WARN_RATIO: f64 = 0.3;

/// Parameter ranges over which the predictors were validated; outside them
/// predictions carry the `extrapolated` flag.
pub const ENVELOPE_N_WF: (f64, f64) = (1e2, 1e7);
pub const ENVELOPE_N_MODE: (f64, f64) = (20.0, 500.0);
pub const ENVELOPE_N: (f64, f64) = (1e-3, 1e2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyInputs {
    pub n_wf: u64,
    /// Effective number of measured modes (need not be an integer).
    pub n_mode: f64,
    /// Mean photon number.
    pub n: f64,
}

impl AccuracyInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n_wf < 1 {
            return Err(Error::InvalidParameter("n_wf must be >= 1".into()));
        }
        if !self.n_mode.is_finite() || self.n_mode < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "n_mode must be >= 1, got {}",
                self.n_mode
            )));
        }
        if !self.n.is_finite() || self.n < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "n must be >= 0, got {}",
                self.n
            )));
        }
        Ok(())
    }

    fn in_envelope(&self) -> bool {
        let nw = self.n_wf as f64;
        nw >= ENVELOPE_N_WF.0
            && nw <= ENVELOPE_N_WF.1
            && self.n_mode >= ENVELOPE_N_MODE.0
            && self.n_mode <= ENVELOPE_N_MODE.1
            && (self.n == 0.0 || (self.n >= ENVELOPE_N.0 && self.n <= ENVELOPE_N.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPrediction {
    /// Mean infidelity of the single-eigenmode reconstruction; absent at n=0.
    pub mean_infidelity_real: Option<f64>,
    /// Its standard deviation; absent at n=0.
    pub std_infidelity_real: Option<f64>,
    /// Vacuum photon-number deviation floor.
    pub vacuum_dn: f64,
    /// Mean photon-number bias for an occupied mode; absent at n=0.
    pub mean_dn: Option<f64>,
    /// (lower, upper) bracket on the complex-reconstruction infidelity,
    /// sorted so lower <= upper; absent at n=0.
    pub complex_bounds: Option<(f64, f64)>,
    /// `sqrt(n_mode/n_wf) / n`; absent at n=0.
    pub regime_ratio: Option<f64>,
    pub regime_ok: bool,
    /// True when the regime ratio sits between the ok and breakdown tiers.
    pub regime_warning: bool,
    /// Inputs fall outside the validated parameter envelope.
    pub extrapolated: bool,
}

/// Evaluate all predictors at one parameter point.
pub fn predict(inputs: &AccuracyInputs) -> Result<AccuracyPrediction> {
    inputs.validate()?;
    let n_wf = inputs.n_wf as f64;
    let half_modes = inputs.n_mode / 2.0;
    let vacuum_dn = (inputs.n_mode / n_wf).sqrt();
    let extrapolated = !inputs.in_envelope();

    if inputs.n == 0.0 {
        return Ok(AccuracyPrediction {
            mean_infidelity_real: None,
            std_infidelity_real: None,
            vacuum_dn,
            mean_dn: None,
            complex_bounds: None,
            regime_ratio: None,
            regime_ok: false,
            regime_warning: false,
            extrapolated,
        });
    }

    let n = inputs.n;
    let photon_factor = (1.0 / n) * (1.0 + 1.0 / (2.0 * n));
    let mean_infidelity_real = half_modes / n_wf * photon_factor;
    let std_infidelity_real = half_modes.sqrt() / n_wf * photon_factor;
    let mean_dn = half_modes / n_wf * (1.0 + 1.0 / (2.0 * n));

    // balanced case: n -> n/2 in the real-mode mean
    let balanced = half_modes / n_wf * (2.0 / n) * (1.0 + 1.0 / n);
    // unbalanced (real target, complex analysis): vacuum floor leaks in
    let unbalanced = vacuum_dn / n;
    let complex_bounds = if balanced <= unbalanced {
        (balanced, unbalanced)
    } else {
        // the curves cross for large n; keep the pair ordered
        (unbalanced, balanced)
    };

    let regime_ratio = vacuum_dn / n;
    Ok(AccuracyPrediction {
        mean_infidelity_real: Some(mean_infidelity_real),
        std_infidelity_real: Some(std_infidelity_real),
        vacuum_dn,
        mean_dn: Some(mean_dn),
        complex_bounds: Some(complex_bounds),
        regime_ratio: Some(regime_ratio),
        regime_ok: regime_ratio <= REGIME_OK_RATIO,
        regime_warning: regime_ratio > REGIME_OK_RATIO && regime_ratio <= REGIME_WARN_RATIO,
        extrapolated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorRegime {
    /// Invert the single-eigenmode mean infidelity.
    Real,
    /// Invert the upper edge of the complex bracket.
    ComplexUpper,
}

/// Smallest N_wf whose predicted infidelity does not exceed `target`.
pub fn required_waveforms(
    target_infidelity: f64,
    n_mode: f64,
    n: f64,
    regime: PredictorRegime,
) -> Result<u64> {
    if !(target_infidelity > 0.0 && target_infidelity.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target infidelity must be positive, got {target_infidelity}"
        )));
    }
    if n <= 0.0 || !n.is_finite() {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let analytic = match regime {
        PredictorRegime::Real => {
            (n_mode / 2.0) * (1.0 / n) * (1.0 + 1.0 / (2.0 * n)) / target_infidelity
        }
        PredictorRegime::ComplexUpper => n_mode / (n * target_infidelity).powi(2),
    };
    let predictor = |n_wf: u64| -> Result<f64> {
        let p = predict(&AccuracyInputs { n_wf, n_mode, n })?;
        Ok(match regime {
            PredictorRegime::Real => p.mean_infidelity_real.expect("n > 0"),
            PredictorRegime::ComplexUpper => p.complex_bounds.expect("n > 0").1.max(
                // the upper edge proper, even if the pair was re-ordered
                (n_mode / (n_wf as f64)).sqrt() / n,
            ),
        })
    };
    // settle floating-point wobble around the analytic inversion
    let mut candidate = analytic.ceil().max(1.0) as u64;
    while candidate > 1 && predictor(candidate - 1)? <= target_infidelity {
        candidate -= 1;
    }
    while predictor(candidate)? > target_infidelity {
        candidate += 1;
    }
    Ok(candidate)
}
