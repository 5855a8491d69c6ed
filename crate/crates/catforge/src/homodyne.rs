//! Simulated homodyne acquisition.
//!
//! The truth model is single-mode: each heralded state occupies one
//! temporal mode f(t) (double-sided exponential, Σf² = 1) and every
//! orthogonal mode is vacuum. One photocurrent trace is
//!
//! ```text
//! s(t) = X_θ · f(t) + residue(t),
//! ```
//!
//! with X_θ drawn from the state's rotated-quadrature density by inverse
//! CDF over a tabulated grid and the residue white vacuum noise projected
//! orthogonal to f. Units are calibrated so the extracted vacuum
//! quadrature has variance 1/2. The ensemble variance per sample index is
//! then 1/2 + f(t)²(Var X − 1/2), which is what the mode fitter inverts:
//! a + b e^{−2γ|t−t0|} over (a, b, γ, t0), coarse grid then pattern
//! refinement. Extraction is the inner product X̂ = Σ_t f(t) s(t).
//!
//! Reproducibility: trace i draws from an independent counter-based RNG
//! stream (stream id = i), so results are bit-identical for a given seed
//! no matter how synthesis is chunked or parallelized.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::fock::FockDensity;
use crate::wigner::{linspace, phase_matrix, quadrature_pdf_with_matrix};
use crate::{Error, Result};

/// Samples per trace.
pub const DEFAULT_TRACE_LEN: usize = 500;
/// Default mode decay rate (1/samples).
pub const DEFAULT_MODE_GAMMA: f64 = 0.02;
/// Default phase-schedule size over [0, π).
pub const DEFAULT_PHASE_COUNT: usize = 12;
/// Default ensemble size.
pub const DEFAULT_N_TRACES: usize = 50_000;

const TRACE_MAGIC: [u8; 4] = *b"CATF";
const TRACE_VERSION: u32 = 1;

/// Inverse-CDF table resolution.
const SAMPLER_GRID_POINTS: usize = 4096;
/// Quadrature window for sampling and density tabulation.
const SAMPLER_HALF_WIDTH: f64 = 8.0;

/// k·π/n for k < n: evenly spaced local-oscillator phases over [0, π).
pub fn default_phase_schedule(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * std::f64::consts::PI / n as f64).collect()
}

// ---------------------------------------------------------------------------
// Temporal mode

/// Normalized double-sided-exponential mode f(t) ∝ e^{−γ|t−t0|}.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMode {
    gamma: f64,
    t0: f64,
    samples: Array1<f64>,
}

/// Builds the mode on integer sample indices 0..len.
pub fn double_exp_mode(gamma: f64, t0: f64, len: usize) -> Result<TemporalMode> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::Parameter(format!(
            "mode decay rate must be positive, got {gamma}"
        )));
    }
    if !(0.0..len as f64).contains(&t0) {
        return Err(Error::Parameter(format!(
            "mode center {t0} outside trace of length {len}"
        )));
    }
    if len < 2 {
        return Err(Error::Parameter(format!("trace length must be at least 2, got {len}")));
    }
    let mut samples = Array1::from_iter((0..len).map(|t| (-gamma * (t as f64 - t0).abs()).exp()));
    let norm = samples.iter().map(|f| f * f).sum::<f64>().sqrt();
    samples.mapv_inplace(|f| f / norm);
    Ok(TemporalMode { gamma, t0, samples })
}

impl TemporalMode {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &Array1<f64> {
        &self.samples
    }

    pub fn to_json_string(&self) -> Result<String> {
        let j = TemporalModeJson {
            gamma: self.gamma,
            t0: self.t0,
            len: self.samples.len(),
            samples: self.samples.to_vec(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: TemporalModeJson = serde_json::from_str(s).map_err(|e| Error::Data(e.to_string()))?;
        let mode = double_exp_mode(j.gamma, j.t0, j.len).map_err(|e| Error::Data(e.to_string()))?;
        if !j.samples.is_empty() {
            if j.samples.len() != j.len {
                return Err(Error::Data(format!(
                    "mode file claims length {} but carries {} samples",
                    j.len,
                    j.samples.len()
                )));
            }
            let worst = mode
                .samples
                .iter()
                .zip(&j.samples)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if worst > 1e-9 {
                return Err(Error::Data(format!(
                    "mode samples deviate from the (gamma, t0) parameterization by {worst:.3e}"
                )));
            }
        }
        Ok(mode)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct TemporalModeJson {
    gamma: f64,
    t0: f64,
    len: usize,
    #[serde(default)]
    samples: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Traces and records

/// One photocurrent segment with its local-oscillator phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub lo_phase: f64,
    pub samples: Vec<f64>,
}

/// One extracted quadrature outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRecord {
    pub lo_phase: f64,
    pub value: f64,
}

/// Mode-weighted sum over one trace.
pub fn extract_quadrature(trace: &Trace, mode: &TemporalMode) -> Result<QuadratureRecord> {
    if trace.samples.len() != mode.len() {
        return Err(Error::Data(format!(
            "trace has {} samples, mode has {}",
            trace.samples.len(),
            mode.len()
        )));
    }
    let value = mode
        .samples
        .iter()
        .zip(&trace.samples)
        .map(|(f, s)| f * s)
        .sum();
    Ok(QuadratureRecord {
        lo_phase: trace.lo_phase,
        value,
    })
}

// ---------------------------------------------------------------------------
// Marginal sampling

/// Tabulated inverse-CDF sampler of the rotated-quadrature densities at a
/// fixed set of phases.
pub struct MarginalSampler {
    phases: Vec<f64>,
    xs: Vec<f64>,
    cdfs: Vec<Vec<f64>>,
}

impl MarginalSampler {
    pub fn new(rho: &FockDensity, phases: &[f64]) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Parameter("phase schedule is empty".into()));
        }
        let xs = linspace(-SAMPLER_HALF_WIDTH, SAMPLER_HALF_WIDTH, SAMPLER_GRID_POINTS);
        let dx = xs[1] - xs[0];
        let mut cdfs = Vec::with_capacity(phases.len());
        for &theta in phases {
            let a = phase_matrix(rho.matrix(), theta);
            let pdf: Vec<f64> = xs
                .iter()
                .map(|&x| quadrature_pdf_with_matrix(&a, x).max(0.0))
                .collect();
            let mut cdf = Vec::with_capacity(xs.len());
            let mut acc = 0.0;
            cdf.push(0.0);
            for i in 1..xs.len() {
                acc += 0.5 * (pdf[i - 1] + pdf[i]) * dx;
                cdf.push(acc);
            }
            let total = *cdf.last().unwrap();
            if total < 0.999 {
                return Err(Error::Numerical(format!(
                    "quadrature density puts {:.3e} outside the sampling window [-8, 8]",
                    1.0 - total
                )));
            }
            for c in cdf.iter_mut() {
                *c /= total;
            }
            cdfs.push(cdf);
        }
        Ok(Self {
            phases: phases.to_vec(),
            xs,
            cdfs,
        })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Quadrature value at the u-th quantile of phase `phase_idx`.
    pub fn quantile(&self, phase_idx: usize, u: f64) -> f64 {
        let cdf = &self.cdfs[phase_idx];
        let i = cdf.partition_point(|&c| c < u).min(cdf.len() - 1).max(1);
        let (c0, c1) = (cdf[i - 1], cdf[i]);
        if c1 <= c0 {
            return self.xs[i];
        }
        let frac = (u - c0) / (c1 - c0);
        self.xs[i - 1] + frac * (self.xs[i] - self.xs[i - 1])
    }
}

fn trace_rng(seed: u64, trace_idx: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trace_idx);
    rng
}

fn synthesize_one(
    sampler: &MarginalSampler,
    mode: &TemporalMode,
    seed: u64,
    trace_idx: usize,
) -> Trace {
    let phase_idx = trace_idx % sampler.phases.len();
    let mut rng = trace_rng(seed, trace_idx as u64);
    let u: f64 = rng.random();
    let x = sampler.quantile(phase_idx, u);
    let sd = 0.5f64.sqrt();
    let f = mode.samples();
    let mut w: Vec<f64> = (0..mode.len())
        .map(|_| {
            let n: f64 = rng.sample(StandardNormal);
            n * sd
        })
        .collect();
    // Project the white noise orthogonal to f, then ride x on f.
    let overlap: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
    for (t, wt) in w.iter_mut().enumerate() {
        *wt += (x - overlap) * f[t];
    }
    Trace {
        lo_phase: sampler.phases[phase_idx],
        samples: w,
    }
}

fn check_synthesis_args(n_traces: usize) -> Result<()> {
    if n_traces == 0 {
        return Err(Error::Parameter("n_traces must be positive".into()));
    }
    Ok(())
}

/// Synthesizes a full ensemble in memory. Phases cycle round-robin
/// through the schedule; trace i is reproducible in isolation.
pub fn synthesize_traces(
    rho: &FockDensity,
    mode: &TemporalMode,
    n_traces: usize,
    phases: &[f64],
    seed: u64,
) -> Result<Vec<Trace>> {
    check_synthesis_args(n_traces)?;
    let sampler = MarginalSampler::new(rho, phases)?;
    Ok((0..n_traces)
        .into_par_iter()
        .map(|i| synthesize_one(&sampler, mode, seed, i))
        .collect())
}

/// Draws quadrature records directly, skipping trace materialization.
/// Record i equals extract_quadrature(trace i) up to the orthogonal
/// residue's roundoff (< 1e−12), because the quadrature draw consumes
/// the RNG stream first.
pub fn synthesize_records(
    rho: &FockDensity,
    n_records: usize,
    phases: &[f64],
    seed: u64,
) -> Result<Vec<QuadratureRecord>> {
    check_synthesis_args(n_records)?;
    let sampler = MarginalSampler::new(rho, phases)?;
    Ok((0..n_records)
        .into_par_iter()
        .map(|i| {
            let phase_idx = i % sampler.phases.len();
            let mut rng = trace_rng(seed, i as u64);
            let u: f64 = rng.random();
            QuadratureRecord {
                lo_phase: sampler.phases[phase_idx],
                value: sampler.quantile(phase_idx, u),
            }
        })
        .collect())
}

/// Synthesizes an ensemble straight into the binary trace format,
/// holding only one chunk in memory at a time.
pub fn synthesize_to_file(
    path: &Path,
    rho: &FockDensity,
    mode: &TemporalMode,
    n_traces: usize,
    phases: &[f64],
    seed: u64,
) -> Result<()> {
    check_synthesis_args(n_traces)?;
    let sampler = MarginalSampler::new(rho, phases)?;
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_trace_header(&mut w, mode.len() as u32, n_traces as u64)?;
    const CHUNK: usize = 2048;
    let mut start = 0;
    while start < n_traces {
        let end = (start + CHUNK).min(n_traces);
        let chunk: Vec<Trace> = (start..end)
            .into_par_iter()
            .map(|i| synthesize_one(&sampler, mode, seed, i))
            .collect();
        for trace in &chunk {
            write_trace_record(&mut w, trace)?;
        }
        start = end;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Variance curve and mode fitting

/// Per-sample-index unbiased variance across the ensemble.
pub fn variance_curve(traces: &[Trace]) -> Result<Array1<f64>> {
    variance_curve_streaming(traces.iter().map(|t| Ok(t.clone())))
}

/// Same, over a fallible trace stream (Welford accumulation).
pub fn variance_curve_streaming<I>(traces: I) -> Result<Array1<f64>>
where
    I: IntoIterator<Item = Result<Trace>>,
{
    let mut n = 0u64;
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    for trace in traces {
        let trace = trace?;
        if n == 0 {
            mean = vec![0.0; trace.samples.len()];
            m2 = vec![0.0; trace.samples.len()];
        } else if trace.samples.len() != mean.len() {
            return Err(Error::Data(format!(
                "trace length changed from {} to {}",
                mean.len(),
                trace.samples.len()
            )));
        }
        n += 1;
        let nf = n as f64;
        for (t, &s) in trace.samples.iter().enumerate() {
            let d = s - mean[t];
            mean[t] += d / nf;
            m2[t] += d * (s - mean[t]);
        }
    }
    if n < 2 {
        return Err(Error::Data(format!("variance needs at least 2 traces, got {n}")));
    }
    let denom = (n - 1) as f64;
    Ok(Array1::from_iter(m2.iter().map(|v| v / denom)))
}

/// Fitted variance model v(t) = a + b e^{−2γ|t−t0|}.
#[derive(Debug, Clone)]
pub struct ModeFit {
    pub mode: TemporalMode,
    /// Flat noise floor.
    pub a: f64,
    /// Pulse contrast; positive when a mode is present.
    pub b: f64,
    /// Residual sum of squares at the optimum.
    pub rss: f64,
}

/// For fixed (γ, t0), the optimal (a, b) are linear least squares.
fn profile_ls(curve: &[f64], gamma: f64, t0: f64) -> (f64, f64, f64) {
    let n = curve.len() as f64;
    let (mut se, mut see, mut sv, mut sve) = (0.0, 0.0, 0.0, 0.0);
    for (t, &v) in curve.iter().enumerate() {
        let e = (-2.0 * gamma * (t as f64 - t0).abs()).exp();
        se += e;
        see += e * e;
        sv += v;
        sve += v * e;
    }
    let det = n * see - se * se;
    let b = (n * sve - se * sv) / det;
    let a = (sv - b * se) / n;
    let mut rss = 0.0;
    for (t, &v) in curve.iter().enumerate() {
        let e = (-2.0 * gamma * (t as f64 - t0).abs()).exp();
        let r = v - a - b * e;
        rss += r * r;
    }
    (a, b, rss)
}

/// Fits the double-exponential variance model: coarse (γ, t0) grid, then
/// pattern-search refinement. Errors when no pulse stands above the
/// floor (b ≤ 0 or negligible against a).
pub fn fit_temporal_mode(curve: &[f64]) -> Result<ModeFit> {
    if curve.len() < 32 {
        return Err(Error::Data(format!(
            "variance curve has {} points; need at least 32 to fit",
            curve.len()
        )));
    }
    let len = curve.len();
    let gammas: Vec<f64> = {
        let (lo, hi, n) = (1e-3f64, 0.25f64, 48usize);
        let step = (hi / lo).powf(1.0 / (n - 1) as f64);
        (0..n).map(|i| lo * step.powi(i as i32)).collect()
    };
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0, 0.0); // rss, gamma, t0, a, b
    for &g in &gammas {
        let mut t0 = 0.0;
        while t0 < len as f64 {
            let (a, b, rss) = profile_ls(curve, g, t0);
            if rss < best.0 {
                best = (rss, g, t0, a, b);
            }
            t0 += 4.0;
        }
    }
    // Pattern search around the grid optimum.
    let (mut rss, mut gamma, mut t0, mut a, mut b) = best;
    let mut g_factor = 1.12f64;
    let mut t_step = 2.0f64;
    while g_factor > 1.0002 || t_step > 5e-3 {
        let mut improved = false;
        for &g in &[gamma / g_factor, gamma, gamma * g_factor] {
            for &t in &[t0 - t_step, t0, t0 + t_step] {
                if !(0.0..len as f64).contains(&t) || g <= 0.0 {
                    continue;
                }
                let (ca, cb, crss) = profile_ls(curve, g, t);
                if crss < rss {
                    rss = crss;
                    gamma = g;
                    t0 = t;
                    a = ca;
                    b = cb;
                    improved = true;
                }
            }
        }
        if !improved {
            g_factor = 1.0 + (g_factor - 1.0) / 2.0;
            t_step /= 2.0;
        }
    }
    if b <= 0.0 || b <= 1e-12 * a.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "no temporal mode found: fitted floor a = {a:.6e}, contrast b = {b:.6e}"
        )));
    }
    Ok(ModeFit {
        mode: double_exp_mode(gamma, t0, len)?,
        a,
        b,
        rss,
    })
}

// ---------------------------------------------------------------------------
// Binary trace file

fn write_trace_header<W: Write>(w: &mut W, len: u32, count: u64) -> Result<()> {
    w.write_all(&TRACE_MAGIC)?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    Ok(())
}

fn write_trace_record<W: Write>(w: &mut W, trace: &Trace) -> Result<()> {
    w.write_all(&trace.lo_phase.to_le_bytes())?;
    for s in &trace.samples {
        w.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

/// Writes an in-memory ensemble to the binary format.
pub fn write_traces(path: &Path, traces: &[Trace]) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::Data("refusing to write an empty trace file".into()));
    }
    let len = traces[0].samples.len();
    if traces.iter().any(|t| t.samples.len() != len) {
        return Err(Error::Data("traces have inconsistent lengths".into()));
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_trace_header(&mut w, len as u32, traces.len() as u64)?;
    for trace in traces {
        write_trace_record(&mut w, trace)?;
    }
    w.flush()?;
    Ok(())
}

/// Streaming reader over the binary trace format.
pub struct TraceFileReader {
    reader: BufReader<std::fs::File>,
    len: usize,
    count: u64,
    yielded: u64,
}

impl TraceFileReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if magic != TRACE_MAGIC {
            return Err(Error::Data(format!(
                "not a trace file: bad magic {magic:02x?}"
            )));
        }
        let mut u32buf = [0u8; 4];
        reader.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != TRACE_VERSION {
            return Err(Error::Data(format!(
                "unsupported trace file version {version}"
            )));
        }
        reader.read_exact(&mut u32buf)?;
        let len = u32::from_le_bytes(u32buf) as usize;
        let mut u64buf = [0u8; 8];
        reader.read_exact(&mut u64buf)?;
        let count = u64::from_le_bytes(u64buf);
        if len < 2 {
            return Err(Error::Data(format!("trace file declares length {len}")));
        }
        Ok(Self {
            reader,
            len,
            count,
            yielded: 0,
        })
    }

    pub fn trace_len(&self) -> usize {
        self.len
    }

    /// Declared record count. Named to steer clear of Iterator::count,
    /// which would consume the reader.
    pub fn trace_count(&self) -> u64 {
        self.count
    }
}

impl Iterator for TraceFileReader {
    type Item = Result<Trace>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.yielded >= self.count {
            return None;
        }
        let mut buf = vec![0u8; 8 * (self.len + 1)];
        if let Err(e) = self.reader.read_exact(&mut buf) {
            return Some(Err(Error::Data(format!(
                "trace file truncated at record {}: {e}",
                self.yielded
            ))));
        }
        self.yielded += 1;
        let lo_phase = f64::from_le_bytes(buf[0..8].try_into().unwrap());
        let samples = buf[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Some(Ok(Trace { lo_phase, samples }))
    }
}

/// Reads a whole trace file into memory.
pub fn read_traces(path: &Path) -> Result<Vec<Trace>> {
    TraceFileReader::open(path)?.collect()
}

/// Extracts every trace in a file against a mode, streaming.
pub fn extract_records_from_file(path: &Path, mode: &TemporalMode) -> Result<Vec<QuadratureRecord>> {
    let reader = TraceFileReader::open(path)?;
    if reader.trace_len() != mode.len() {
        return Err(Error::Data(format!(
            "trace file length {} does not match mode length {}",
            reader.trace_len(),
            mode.len()
        )));
    }
    reader
        .map(|t| t.and_then(|t| extract_quadrature(&t, mode)))
        .collect()
}

// ---------------------------------------------------------------------------
// Record CSV

pub fn records_to_csv_string(records: &[QuadratureRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 50 + 16);
    out.push_str("phase,value\n");
    for r in records {
        out.push_str(&format!("{:.16e},{:.16e}\n", r.lo_phase, r.value));
    }
    out
}

pub fn records_from_csv_str(s: &str) -> Result<Vec<QuadratureRecord>> {
    let mut records = Vec::new();
    for (i, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("phase")) {
            continue;
        }
        let mut parts = line.split(',');
        let phase = parts
            .next()
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Data(format!("bad record line {}: {line:?}", i + 1)))?;
        let value = parts
            .next()
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Data(format!("bad record line {}: {line:?}", i + 1)))?;
        if parts.next().is_some() {
            return Err(Error::Data(format!("record line {} has extra fields", i + 1)));
        }
        if !phase.is_finite() || !value.is_finite() {
            return Err(Error::Data(format!("record line {} is not finite", i + 1)));
        }
        records.push(QuadratureRecord {
            lo_phase: phase,
            value,
        });
    }
    Ok(records)
}

pub fn write_records_csv(path: &Path, records: &[QuadratureRecord]) -> Result<()> {
    std::fs::write(path, records_to_csv_string(records))?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<QuadratureRecord>> {
    records_from_csv_str(&std::fs::read_to_string(path)?)
}
