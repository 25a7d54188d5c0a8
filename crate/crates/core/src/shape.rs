//! Parametric library of test mode shapes.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mode::{normalize, TemporalMode};

/// Shape parameters are in the same time unit as the grid's `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Gaussian {
        center: f64,
        width: f64,
    },
    /// Gaussian amplitude with quadratic phase `chirp_rate * (t - center)^2`.
    ChirpedGaussian {
        center: f64,
        width: f64,
        chirp_rate: f64,
    },
    ExpDecay {
        rate: f64,
    },
    HermiteGauss {
        order: usize,
        center: f64,
        width: f64,
    },
    FromFile {
        path: PathBuf,
    },
}

/// Sample a shape on `grid` and normalize it.
pub fn make_shape(spec: &ShapeSpec, grid: TimeGrid) -> Result<TemporalMode> {
    let samples: Vec<C64> = match spec {
        ShapeSpec::Gaussian { center, width } => {
            check_width(*width)?;
            grid.times()
                .map(|t| C64::new(gauss(t, *center, *width), 0.0))
                .collect()
        }
        ShapeSpec::ChirpedGaussian {
            center,
            width,
            chirp_rate,
        } => {
            check_width(*width)?;
            grid.times()
                .map(|t| {
                    let u = t - center;
                    C64::from_polar(gauss(t, *center, *width), chirp_rate * u * u)
                })
                .collect()
        }
        ShapeSpec::ExpDecay { rate } => {
            if !rate.is_finite() || *rate <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "decay rate must be positive, got {rate}"
                )));
            }
            grid.times()
                .map(|t| C64::new((-rate * t).exp(), 0.0))
                .collect()
        }
        ShapeSpec::HermiteGauss {
            order,
            center,
            width,
        } => {
            check_width(*width)?;
            grid.times()
                .map(|t| {
                    let u = (t - center) / width;
                    C64::new(hermite(*order, u) * (-0.5 * u * u).exp(), 0.0)
                })
                .collect()
        }
        ShapeSpec::FromFile { path } => {
            let file = std::fs::File::open(path)?;
            let mode: TemporalMode = serde_json::from_reader(std::io::BufReader::new(file))?;
            if mode.grid() != grid {
                return Err(Error::Dimension(format!(
                    "mode file {} has {} samples at dt={}, requested grid has {} at dt={}",
                    path.display(),
                    mode.n_samp(),
                    mode.grid().dt(),
                    grid.n_samp(),
                    grid.dt()
                )));
            }
            return Ok(mode);
        }
    };
    normalize(samples, grid).map_err(|_| {
        Error::DegenerateMode("shape parameters produce an all-zero sampled mode".into())
    })
}

fn check_width(width: f64) -> Result<()> {
    if !width.is_finite() || width <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "width must be positive, got {width}"
        )));
    }
    Ok(())
}

fn gauss(t: f64, center: f64, width: f64) -> f64 {
    let u = (t - center) / width;
    (-0.5 * u * u).exp()
}

/// Physicists' Hermite polynomial H_n via the three-term recurrence.
fn hermite(order: usize, x: f64) -> f64 {
    let mut h0 = 1.0;
    if order == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for n in 1..order {
        let h2 = 2.0 * x * h1 - 2.0 * n as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}
