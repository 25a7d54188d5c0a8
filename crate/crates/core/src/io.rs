//! File formats: TMRW waveform batches, TMRK kernels, mode / spectrum /
//! result JSON, and the CSV variants.
//!
//! Binary layouts are bit-exact and little-endian throughout. JSON floats
//! are written at full round-trip precision.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernel::{EigenSpectrum, Kernel};
use crate::mode::TemporalMode;
use crate::reconstruct::{FidelityReport, PurityCase, ReconstructionResult};
use crate::sim::{Provenance, WaveformBatch};

const TMRW_MAGIC: &[u8; 4] = b"TMRW";
const TMRK_MAGIC: &[u8; 4] = b"TMRK";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchFormat {
    Tmrw,
    Csv,
}

impl BatchFormat {
    /// Guess from a file extension; defaults to the binary format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::Csv,
            _ => Self::Tmrw,
        }
    }
}

/// Vacuum-calibration sidecar for recorded data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VacuumCalibration {
    pub sigma0_sq_raw: f64,
}

// ---------------------------------------------------------------------------
// TMRW waveform batches
// ---------------------------------------------------------------------------

/// Layout: magic "TMRW", u32 version = 1, u64 n_wf, u32 n_samp, f64 dt,
/// then n_wf * n_samp f64 samples, waveform-major. All little-endian.
pub fn write_tmrw(path: &Path, batch: &WaveformBatch) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TMRW_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(batch.n_wf() as u64).to_le_bytes())?;
    w.write_all(&(batch.n_samp() as u32).to_le_bytes())?;
    w.write_all(&batch.grid().dt().to_le_bytes())?;
    for x in batch.raw_data() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated payload".into()))?;
    Ok(f64::from_le_bytes(b))
}

fn read_payload<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("payload shorter than the header promises".into()))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after the payload".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_tmrw(path: &Path) -> Result<(TimeGrid, Vec<f64>, u64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != TMRW_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected \"TMRW\""
        )));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported TMRW version {version}")));
    }
    let n_wf = read_u64(&mut r)?;
    let n_samp = read_u32(&mut r)? as usize;
    let dt = read_f64(&mut r)?;
    let grid = TimeGrid::new(n_samp, dt)?;
    let expected = (n_wf as usize)
        .checked_mul(n_samp)
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    let data = read_payload(&mut r, expected)?;
    Ok((grid, data, n_wf))
}

/// One waveform per line, full-precision decimal floats.
pub fn write_batch_csv(path: &Path, batch: &WaveformBatch) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in batch.rows() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batch_csv(path: &Path, dt: f64) -> Result<(TimeGrid, Vec<f64>, u64)> {
    let content = std::fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut n_samp = None;
    let mut n_wf = 0u64;
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> =
            line.split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|_| {
                        Error::Format(format!("line {}: bad float {field:?}", lineno + 1))
                    })
                })
                .collect::<Result<_>>()?;
        match n_samp {
            None => n_samp = Some(row.len()),
            Some(n) if n != row.len() => {
                return Err(Error::Format(format!(
                    "line {}: {} fields, expected {n}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
        n_wf += 1;
    }
    let n_samp = n_samp.ok_or_else(|| Error::Format("empty CSV batch".into()))?;
    Ok((TimeGrid::new(n_samp, dt)?, data, n_wf))
}

/// Read recorded (or previously written) data into the pipeline.
///
/// A calibration sidecar rescales the batch into vacuum units: kernel
/// estimation divides by `sigma0_sq_raw`. CSV files carry no grid metadata,
/// so `csv_dt` supplies the sample period (1.0 if unspecified).
pub fn ingest_batch(
    path: &Path,
    format: BatchFormat,
    calibration: Option<&Path>,
    csv_dt: Option<f64>,
) -> Result<WaveformBatch> {
    let (grid, data, n_wf) = match format {
        BatchFormat::Tmrw => read_tmrw(path)?,
        BatchFormat::Csv => read_batch_csv(path, csv_dt.unwrap_or(1.0))?,
    };
    let sigma0_sq_raw = match calibration {
        None => 1.0,
        Some(cal_path) => {
            let cal: VacuumCalibration =
                serde_json::from_reader(BufReader::new(File::open(cal_path)?))?;
            cal.sigma0_sq_raw
        }
    };
    let declared = data.len() as u64 / grid.n_samp() as u64;
    if declared != n_wf {
        return Err(Error::Format(format!(
            "header declares {n_wf} waveforms, payload holds {declared}"
        )));
    }
    WaveformBatch::from_rows(
        grid,
        data,
        sigma0_sq_raw,
        Provenance::Ingested {
            path: path.display().to_string(),
            format: format!("{format:?}").to_lowercase(),
            sigma0_sq_raw,
        },
    )
}

// ---------------------------------------------------------------------------
// TMRK kernels
// ---------------------------------------------------------------------------

/// Layout: magic "TMRK", u32 version = 1, u32 n_samp, f64 dt, then
/// n_samp^2 f64 entries row-major. All little-endian.
pub fn write_tmrk(path: &Path, kernel: &Kernel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TMRK_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(kernel.n_samp() as u32).to_le_bytes())?;
    w.write_all(&kernel.grid().dt().to_le_bytes())?;
    let n = kernel.n_samp();
    for i in 0..n {
        for j in 0..n {
            w.write_all(&kernel.matrix()[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tmrk(path: &Path) -> Result<Kernel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != TMRK_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected \"TMRK\""
        )));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported TMRK version {version}")));
    }
    let n_samp = read_u32(&mut r)? as usize;
    let dt = read_f64(&mut r)?;
    let grid = TimeGrid::new(n_samp, dt)?;
    let data = read_payload(&mut r, n_samp * n_samp)?;
    let matrix = DMatrix::from_row_slice(n_samp, n_samp, &data);
    Kernel::from_matrix(grid, matrix, 0)
}

/// Kernel as CSV, one matrix row per line.
pub fn write_kernel_csv(path: &Path, kernel: &Kernel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = kernel.n_samp();
    for i in 0..n {
        let line: Vec<String> = (0..n)
            .map(|j| kernel.matrix()[(i, j)].to_string())
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

/// Mode JSON: `{"dt": <float>, "samples": [[re, im], ...]}`.
pub fn write_mode_json(path: &Path, mode: &TemporalMode) -> Result<()> {
    write_json(path, mode)
}

pub fn read_mode_json(path: &Path) -> Result<TemporalMode> {
    read_json(path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub eigenvalues: Vec<f64>,
    pub photon_numbers: Vec<f64>,
    /// One eigenvector per row, matching `eigenvalues`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectrumJson {
    pub fn from_spectrum(spectrum: &EigenSpectrum) -> Self {
        Self {
            eigenvalues: spectrum.eigenvalues().to_vec(),
            photon_numbers: spectrum.photon_numbers().to_vec(),
            eigenvectors: (0..spectrum.len())
                .map(|i| spectrum.eigenvector(i))
                .collect(),
        }
    }
}

pub fn write_spectrum_json(path: &Path, spectrum: &EigenSpectrum) -> Result<()> {
    write_json(path, &SpectrumJson::from_spectrum(spectrum))
}

pub fn read_spectrum_json(path: &Path) -> Result<SpectrumJson> {
    read_json(path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidatesJson {
    pub plus: TemporalMode,
    pub minus: TemporalMode,
}

/// Result JSON mirroring [`ReconstructionResult`] plus provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultJson {
    pub n1: f64,
    pub n2: f64,
    pub n_total: f64,
    pub candidates: CandidatesJson,
    pub verdict: PurityCase,
    pub above_vacuum_count: usize,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityReport>,
    pub provenance: serde_json::Value,
}

impl ResultJson {
    pub fn from_result(result: &ReconstructionResult, provenance: serde_json::Value) -> Self {
        Self {
            n1: result.n1,
            n2: result.n2,
            n_total: result.n_total,
            candidates: CandidatesJson {
                plus: result.candidate_plus.clone(),
                minus: result.candidate_minus.clone(),
            },
            verdict: result.case,
            above_vacuum_count: result.above_vacuum_count,
            threshold: result.threshold_used,
            fidelity: result.fidelity_vs_target,
            provenance,
        }
    }

    pub fn into_result(self) -> ReconstructionResult {
        ReconstructionResult {
            candidate_plus: self.candidates.plus,
            candidate_minus: self.candidates.minus,
            n1: self.n1,
            n2: self.n2,
            n_total: self.n_total,
            case: self.verdict,
            above_vacuum_count: self.above_vacuum_count,
            threshold_used: self.threshold,
            fidelity_vs_target: self.fidelity,
        }
    }
}

pub fn write_result_json(path: &Path, result: &ResultJson) -> Result<()> {
    write_json(path, result)
}

pub fn read_result_json(path: &Path) -> Result<ResultJson> {
    read_json(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
