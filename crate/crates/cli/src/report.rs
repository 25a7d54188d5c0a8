//! Figure emission: self-contained SVG with a fixed template plus a sibling
//! CSV holding the exact plotted numbers. No timestamps, no external assets,
//! byte-stable output.

use clap::{Args, ValueEnum};
use std::path::PathBuf;
use tmr_core::num_complex::Complex64 as C64;

use tmr_core::io::{read_mode_json, read_result_json, read_spectrum_json};
use tmr_core::mode::overlap;
use tmr_core::reconstruct::DEFAULT_Z;
use tmr_core::sweep::{rows_from_csv, SweepRow};
use tmr_core::{Error, Result, TemporalMode};

const CANVAS_W: f64 = 800.0;
const CANVAS_H: f64 = 560.0;
const MARGIN_L: f64 = 76.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 58.0;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureKind {
    /// Photon number per mode index, with the vacuum statistical band.
    SpectrumHistogram,
    /// The two reconstructed eigenfunctions against an optional target.
    EigenfunctionsOverlay,
    /// Parametric (Re f, Im f) curve of a mode or reconstruction.
    PolarMode,
    /// Sweep infidelity versus N_wf with the predictor band.
    InfidelityVsNwf,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Figure to render.
    #[arg(long, value_enum)]
    kind: FigureKind,
    /// Input file: spectrum JSON, result JSON, mode JSON or sweep CSV,
    /// depending on the figure kind.
    #[arg(long = "in")]
    input: PathBuf,
    /// Target mode JSON overlay (eigenfunctions-overlay only).
    #[arg(long)]
    target: Option<PathBuf>,
    /// Waveform count behind the spectrum (draws the vacuum band).
    #[arg(long, value_parser = crate::parse_count)]
    nwf: Option<u64>,
    /// Effective mode count for the vacuum band.
    #[arg(long)]
    nmode_eff: Option<f64>,
    /// z-score of the shaded band.
    #[arg(long, default_value_t = DEFAULT_Z)]
    z: f64,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Sibling CSV with the plotted numbers (default: out with .csv).
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

pub fn run(args: ReportArgs) -> Result<()> {
    let csv_path = args
        .csv_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("csv"));
    let (svg, csv) = match args.kind {
        FigureKind::SpectrumHistogram => spectrum_histogram(&args)?,
        FigureKind::EigenfunctionsOverlay => eigenfunctions_overlay(&args)?,
        FigureKind::PolarMode => polar_mode(&args)?,
        FigureKind::InfidelityVsNwf => infidelity_vs_nwf(&args)?,
    };
    std::fs::write(&args.out, svg)?;
    std::fs::write(&csv_path, csv)?;
    println!("wrote {} and {}", args.out.display(), csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Coordinate frame
// ---------------------------------------------------------------------------

struct Frame {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
    logx: bool,
    logy: bool,
}

impl Frame {
    fn tx(&self, x: f64) -> f64 {
        let (a, b, v) = if self.logx {
            (self.xmin.log10(), self.xmax.log10(), x.log10())
        } else {
            (self.xmin, self.xmax, x)
        };
        MARGIN_L + (v - a) / (b - a) * (CANVAS_W - MARGIN_L - MARGIN_R)
    }

    fn ty(&self, y: f64) -> f64 {
        let (a, b, v) = if self.logy {
            (self.ymin.log10(), self.ymax.log10(), y.log10())
        } else {
            (self.ymin, self.ymax, y)
        };
        CANVAS_H - MARGIN_B - (v - a) / (b - a) * (CANVAS_H - MARGIN_T - MARGIN_B)
    }

    fn x_ticks(&self) -> Vec<f64> {
        ticks(self.xmin, self.xmax, self.logx)
    }

    fn y_ticks(&self) -> Vec<f64> {
        ticks(self.ymin, self.ymax, self.logy)
    }
}

fn ticks(min: f64, max: f64, log: bool) -> Vec<f64> {
    if log {
        let lo = min.log10().ceil() as i32;
        let hi = max.log10().floor() as i32;
        (lo..=hi).map(|d| 10f64.powi(d)).collect()
    } else {
        (0..=4)
            .map(|k| min + k as f64 * (max - min) / 4.0)
            .collect()
    }
}

fn fnum(v: f64) -> String {
    v.to_string()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

struct Svg {
    body: String,
}

impl Svg {
    fn new() -> Self {
        let mut body = String::new();
        body.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" \
             viewBox=\"0 0 {CANVAS_W} {CANVAS_H}\">\n\
             <rect width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" fill=\"white\"/>\n"
        ));
        Self { body }
    }

    fn frame_and_axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str, title: &str) {
        let (x0, x1) = (MARGIN_L, CANVAS_W - MARGIN_R);
        let (y0, y1) = (MARGIN_T, CANVAS_H - MARGIN_B);
        self.body.push_str(&format!(
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#222\"/>\n",
            x1 - x0,
            y1 - y0
        ));
        for t in f.x_ticks() {
            let px = f.tx(t);
            self.body.push_str(&format!(
                "<line x1=\"{px}\" y1=\"{y1}\" x2=\"{px}\" y2=\"{}\" stroke=\"#222\"/>\n",
                y1 + 5.0
            ));
            self.text(px, y1 + 20.0, &tick_label(t), "middle");
        }
        for t in f.y_ticks() {
            let py = f.ty(t);
            self.body.push_str(&format!(
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"#222\"/>\n",
                x0 - 5.0
            ));
            self.text(x0 - 8.0, py + 4.0, &tick_label(t), "end");
        }
        self.text((x0 + x1) / 2.0, CANVAS_H - 16.0, xlabel, "middle");
        self.body.push_str(&format!(
            "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            xml_escape(ylabel)
        ));
        self.text((x0 + x1) / 2.0, 18.0, title, "middle");
    }

    fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str) {
        self.body.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"{anchor}\">{}</text>\n",
            xml_escape(s)
        ));
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
        let dash = if dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"{dash}/>\n",
            d.join(" ")
        ));
    }

    fn polygon(&mut self, pts: &[(f64, f64)], fill: &str) {
        let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
        self.body.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{fill}\" stroke=\"none\" opacity=\"0.55\"/>\n",
            d.join(" ")
        ));
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        self.body.push_str(&format!(
            "<rect x=\"{x:.3}\" y=\"{y:.3}\" width=\"{w:.3}\" height=\"{h:.3}\" fill=\"{fill}\"/>\n"
        ));
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        self.body.push_str(&format!(
            "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"{r}\" fill=\"{fill}\"/>\n"
        ));
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

// ---------------------------------------------------------------------------
// Figures
// ---------------------------------------------------------------------------

fn spectrum_histogram(args: &ReportArgs) -> Result<(String, String)> {
    let spec = read_spectrum_json(&args.input).map_err(|e| {
        Error::InvalidParameter(format!("spectrum-histogram needs spectrum JSON: {e}"))
    })?;
    let pn = &spec.photon_numbers;
    let band = match (args.nwf, args.nmode_eff) {
        (Some(n_wf), Some(n_mode)) => Some(args.z * (n_mode / n_wf as f64).sqrt()),
        _ => None,
    };
    let lo = pn
        .iter()
        .copied()
        .fold(0.0f64, f64::min)
        .min(-band.unwrap_or(0.0));
    let hi = pn
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .max(band.unwrap_or(0.0));
    let pad = 0.15 * (hi - lo).max(1e-12);
    let frame = Frame {
        xmin: 0.0,
        xmax: pn.len() as f64,
        ymin: lo - pad,
        ymax: hi + pad,
        logx: false,
        logy: false,
    };
    let mut svg = Svg::new();
    if let Some(b) = band {
        let y_top = frame.ty(b);
        let y_bot = frame.ty(-b);
        svg.rect(
            frame.tx(0.0),
            y_top,
            frame.tx(pn.len() as f64) - frame.tx(0.0),
            y_bot - y_top,
            "#cfe2f5",
        );
    }
    let y0 = frame.ty(0.0);
    svg.polyline(
        &[(frame.tx(0.0), y0), (frame.tx(pn.len() as f64), y0)],
        "#888",
        true,
    );
    let bar_w = (frame.tx(1.0) - frame.tx(0.0)) * 0.8;
    for (i, &n) in pn.iter().enumerate() {
        let xc = frame.tx(i as f64 + 0.5);
        let yn = frame.ty(n);
        let (top, h) = if n >= 0.0 {
            (yn, y0 - yn)
        } else {
            (y0, yn - y0)
        };
        svg.rect(xc - bar_w / 2.0, top, bar_w, h.max(0.3), "#4878b0");
    }
    svg.frame_and_axes(
        &frame,
        "mode index",
        "photon number n_i",
        "eigenvalue spectrum",
    );
    let mut csv = String::from("index,eigenvalue,photon_number\n");
    for (i, (k, n)) in spec.eigenvalues.iter().zip(pn).enumerate() {
        csv.push_str(&format!("{i},{},{}\n", fnum(*k), fnum(*n)));
    }
    Ok((svg.finish(), csv))
}

fn eigenfunctions_overlay(args: &ReportArgs) -> Result<(String, String)> {
    let result = read_result_json(&args.input).map_err(|e| {
        Error::InvalidParameter(format!("eigenfunctions-overlay needs result JSON: {e}"))
    })?;
    let plus = &result.candidates.plus;
    let n_samp = plus.n_samp();
    let dt = plus.grid().dt();
    let n_total = result.n1 + result.n2;
    let scale1 = if result.n1 > 0.0 {
        (n_total / result.n1).sqrt()
    } else {
        0.0
    };
    let scale2 = if result.n2 > 0.0 {
        (n_total / result.n2).sqrt()
    } else {
        0.0
    };
    let f1: Vec<f64> = plus.samples().iter().map(|z| z.re * scale1).collect();
    let f2: Vec<f64> = plus.samples().iter().map(|z| z.im * scale2).collect();

    let target = match &args.target {
        None => None,
        Some(path) => {
            let t = read_mode_json(path)?;
            if t.grid() != plus.grid() {
                return Err(Error::Dimension(
                    "target grid differs from the result grid".into(),
                ));
            }
            // align the target's free global phase to the candidate
            let rot = {
                let o = overlap(plus, &t)?;
                C64::from_polar(1.0, -o.arg())
            };
            let g1: Vec<f64> = t.samples().iter().map(|z| (z * rot).re * scale1).collect();
            let g2: Vec<f64> = t.samples().iter().map(|z| (z * rot).im * scale2).collect();
            Some((g1, g2))
        }
    };

    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for v in f1.iter().chain(&f2) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if let Some((g1, g2)) = &target {
        for v in g1.iter().chain(g2) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let pad = 0.1 * (hi - lo).max(1e-12);
    let frame = Frame {
        xmin: 0.0,
        xmax: (n_samp - 1) as f64 * dt,
        ymin: lo - pad,
        ymax: hi + pad,
        logx: false,
        logy: false,
    };
    let t_of = |k: usize| k as f64 * dt;
    let mut svg = Svg::new();
    let line = |vals: &[f64]| -> Vec<(f64, f64)> {
        vals.iter()
            .enumerate()
            .map(|(k, v)| (frame.tx(t_of(k)), frame.ty(*v)))
            .collect()
    };
    if let Some((g1, g2)) = &target {
        svg.polyline(&line(g1), "#777", true);
        svg.polyline(&line(g2), "#c98c3a", true);
    }
    svg.polyline(&line(&f1), "#1f4e8c", false);
    svg.polyline(&line(&f2), "#b03a2e", false);
    svg.frame_and_axes(
        &frame,
        "time (s)",
        "eigenfunction amplitude",
        "reconstructed eigenfunctions",
    );
    let mut csv = String::from(match target {
        Some(_) => "t,f1_meas,f2_meas,f1_target,f2_target\n",
        None => "t,f1_meas,f2_meas\n",
    });
    for k in 0..n_samp {
        match &target {
            Some((g1, g2)) => csv.push_str(&format!(
                "{},{},{},{},{}\n",
                fnum(t_of(k)),
                fnum(f1[k]),
                fnum(f2[k]),
                fnum(g1[k]),
                fnum(g2[k])
            )),
            None => csv.push_str(&format!(
                "{},{},{}\n",
                fnum(t_of(k)),
                fnum(f1[k]),
                fnum(f2[k])
            )),
        }
    }
    Ok((svg.finish(), csv))
}

fn polar_mode(args: &ReportArgs) -> Result<(String, String)> {
    // accept either a result JSON (plot candidate_plus) or a mode JSON
    let mode: TemporalMode = match read_result_json(&args.input) {
        Ok(r) => r.candidates.plus,
        Err(_) => read_mode_json(&args.input).map_err(|e| {
            Error::InvalidParameter(format!("polar-mode needs result or mode JSON: {e}"))
        })?,
    };
    let limit = mode
        .samples()
        .iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.15;
    let frame = Frame {
        xmin: -limit,
        xmax: limit,
        ymin: -limit,
        ymax: limit,
        logx: false,
        logy: false,
    };
    let mut svg = Svg::new();
    svg.polyline(
        &[
            (frame.tx(-limit), frame.ty(0.0)),
            (frame.tx(limit), frame.ty(0.0)),
        ],
        "#bbb",
        true,
    );
    svg.polyline(
        &[
            (frame.tx(0.0), frame.ty(-limit)),
            (frame.tx(0.0), frame.ty(limit)),
        ],
        "#bbb",
        true,
    );
    let pts: Vec<(f64, f64)> = mode
        .samples()
        .iter()
        .map(|z| (frame.tx(z.re), frame.ty(z.im)))
        .collect();
    svg.polyline(&pts, "#1f4e8c", false);
    if let Some(p0) = pts.first() {
        svg.circle(p0.0, p0.1, 3.5, "#b03a2e");
    }
    svg.frame_and_axes(&frame, "Re f(t)", "Im f(t)", "temporal mode, polar view");
    let mut csv = String::from("t,re,im\n");
    for (k, z) in mode.samples().iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{}\n",
            fnum(k as f64 * mode.grid().dt()),
            fnum(z.re),
            fnum(z.im)
        ));
    }
    Ok((svg.finish(), csv))
}

fn infidelity_vs_nwf(args: &ReportArgs) -> Result<(String, String)> {
    let rows = rows_from_csv(&std::fs::read_to_string(&args.input)?).map_err(|e| {
        Error::InvalidParameter(format!("infidelity-vs-nwf needs a sweep CSV: {e}"))
    })?;
    let rows: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.mean_infidelity.is_some())
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep CSV holds no infidelity rows".into(),
        ));
    }
    let mut ymin = f64::MAX;
    let mut ymax = f64::MIN;
    let mut consider = |v: f64| {
        if v > 0.0 {
            ymin = ymin.min(v);
            ymax = ymax.max(v);
        }
    };
    for r in &rows {
        consider(r.mean_infidelity.unwrap());
        if let Some((lo, hi)) = r.predicted.complex_bounds {
            consider(lo);
            consider(hi);
        }
        if let Some(mu) = r.predicted.mean_infidelity_real {
            consider(mu);
        }
    }
    let frame = Frame {
        xmin: rows.first().unwrap().point.n_wf as f64 / 1.5,
        xmax: rows.last().unwrap().point.n_wf as f64 * 1.5,
        ymin: ymin / 2.0,
        ymax: (ymax * 2.0).min(2.0),
        logx: true,
        logy: true,
    };
    let mut svg = Svg::new();

    // shaded region between the complex-analysis bracket edges
    let banded: Vec<&&SweepRow> = rows
        .iter()
        .filter(|r| r.predicted.complex_bounds.is_some())
        .collect();
    if banded.len() >= 2 {
        let mut poly: Vec<(f64, f64)> = banded
            .iter()
            .map(|r| {
                let (_, hi) = r.predicted.complex_bounds.unwrap();
                (frame.tx(r.point.n_wf as f64), frame.ty(hi.min(frame.ymax)))
            })
            .collect();
        for r in banded.iter().rev() {
            let (lo, _) = r.predicted.complex_bounds.unwrap();
            poly.push((frame.tx(r.point.n_wf as f64), frame.ty(lo.max(frame.ymin))));
        }
        svg.polygon(&poly, "#cfe2f5");
    }

    // the single-eigenmode law as a plain line
    let law: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.predicted
                .mean_infidelity_real
                .filter(|mu| (frame.ymin..=frame.ymax).contains(mu))
                .map(|mu| (frame.tx(r.point.n_wf as f64), frame.ty(mu)))
        })
        .collect();
    svg.polyline(&law, "#1a1a1a", false);

    for r in &rows {
        svg.circle(
            frame.tx(r.point.n_wf as f64),
            frame.ty(r.mean_infidelity.unwrap().clamp(frame.ymin, frame.ymax)),
            4.0,
            "#b03a2e",
        );
    }
    svg.frame_and_axes(
        &frame,
        "number of waveforms N_wf",
        "mean infidelity",
        "infidelity vs N_wf",
    );

    let mut csv = String::from("n_wf,observed,pred_real,pred_lower,pred_upper\n");
    for r in &rows {
        let (lo, hi) = r.predicted.complex_bounds.unwrap_or((f64::NAN, f64::NAN));
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.point.n_wf,
            fnum(r.mean_infidelity.unwrap()),
            r.predicted
                .mean_infidelity_real
                .map(fnum)
                .unwrap_or_default(),
            if lo.is_nan() { String::new() } else { fnum(lo) },
            if hi.is_nan() { String::new() } else { fnum(hi) },
        ));
    }
    Ok((svg.finish(), csv))
}
