//! Maximum-likelihood homodyne reconstruction and fidelity analysis.
//!
//! The reconstruction is the iterative RρR map: with projectors
//! Π_j = Λ†(|x_j, θ_j⟩⟨x_j, θ_j|) for loss channel Λ at the assumed
//! detection efficiency, each step forms
//!
//! ```text
//! R(ρ) = (1/J) Σ_j Π_j / Tr[Π_j ρ],    ρ ← N[R(ρ) ρ R(ρ)].
//! ```
//!
//! Pushing the efficiency into the projectors (adjoint loss) rather than
//! inverting the Bernoulli map on ρ keeps every iterate a valid state.
//! The log-likelihood is tracked every iteration and must not decrease;
//! a dip beyond roundoff triggers a diluted step (I + εR) ρ (I + εR)
//! with ε halved until the likelihood recovers.
//!
//! Fidelities are overlaps with ideal pure targets. Targets are built in
//! a larger Fock space (so the closed-form constructors see a negligible
//! truncation tail even for large α e^r) and then cropped to the
//! reconstruction dimension without renormalizing: the overlap against
//! the true infinite-dimensional target is what the cropped quadratic
//! form computes, and it never exceeds 1.
//!
//! The (α, r) fit evaluates the fidelity surface exhaustively on a grid
//! and returns the argmax, ties broken toward smaller r then smaller α.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::fock::{
    loss_channel, loss_channel_adjoint, odd_cat, sc_state_closed_form, squeeze_matrix, CatParams,
    FockDensity, FockVector, SCParams,
};
use crate::homodyne::QuadratureRecord;
use crate::wigner::{phase_matrix, quadrature_wavefunctions};
use crate::{Error, Result};

/// Homodyne efficiency assumed when building corrected projectors.
pub const DEFAULT_ETA_CORRECTION: f64 = 0.80;
pub const DEFAULT_MAX_ITERS: usize = 500;
/// Trace distance between successive iterates that counts as converged.
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-6;
/// Reconstruction truncation.
pub const DEFAULT_TOMO_DIM: usize = 20;

const MIN_RECORDS: usize = 1000;
const MIN_PHASES: usize = 6;
/// Fock space in which pure fidelity targets are built before cropping.
const TARGET_BUILD_DIM: usize = 50;
/// Probability floor guarding 1/Pr_j against outlier records.
const PR_FLOOR: f64 = 1e-14;

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TomoConfig {
    /// Fock truncation of the reconstruction.
    pub dim: usize,
    /// Efficiency assumed in the POVM; 1 reconstructs the detected state.
    pub eta_correction: f64,
    pub max_iters: usize,
    /// Trace distance between successive iterates that stops the loop.
    pub convergence_tol: f64,
    /// Optional quadrature bin width; None projects at each exact value.
    pub binning: Option<f64>,
}

impl Default for TomoConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_TOMO_DIM,
            eta_correction: DEFAULT_ETA_CORRECTION,
            max_iters: DEFAULT_MAX_ITERS,
            convergence_tol: DEFAULT_CONVERGENCE_TOL,
            binning: None,
        }
    }
}

impl TomoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 10 {
            return Err(Error::Parameter(format!(
                "reconstruction dimension must be at least 10, got {}",
                self.dim
            )));
        }
        if !(self.eta_correction > 0.0 && self.eta_correction <= 1.0) {
            return Err(Error::Parameter(format!(
                "eta_correction must lie in (0, 1], got {}",
                self.eta_correction
            )));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(Error::Parameter(format!(
                "convergence tolerance must be positive, got {}",
                self.convergence_tol
            )));
        }
        if let Some(w) = self.binning {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Parameter(format!("bin width must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Reconstruction outcome: the state plus diagnostics. `converged`
/// false means the iteration cap was reached first; the final iterate
/// is still returned.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: FockDensity,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood measured at each iterate, non-decreasing.
    pub loglik: Vec<f64>,
    /// Trace distance of the last update step.
    pub final_step: f64,
}

// ---------------------------------------------------------------------------
// Record preparation

/// Records grouped by LO phase with wavefunctions cached at `dim`.
struct PhaseGroup {
    theta: f64,
    /// (ψ(x), multiplicity) per distinct projected value.
    entries: Vec<(Array1<f64>, f64)>,
}

fn group_records(records: &[QuadratureRecord], cfg: &TomoConfig) -> Result<Vec<PhaseGroup>> {
    if records.len() < MIN_RECORDS {
        return Err(Error::Data(format!(
            "need at least {MIN_RECORDS} quadrature records, got {}",
            records.len()
        )));
    }
    let mut by_phase: Vec<(u64, Vec<f64>)> = Vec::new();
    for r in records {
        if !r.lo_phase.is_finite() || !r.value.is_finite() {
            return Err(Error::Data("record contains a non-finite entry".into()));
        }
        let key = r.lo_phase.to_bits();
        match by_phase.iter_mut().find(|(k, _)| *k == key) {
            Some((_, xs)) => xs.push(r.value),
            None => by_phase.push((key, vec![r.value])),
        }
    }
    if by_phase.len() < MIN_PHASES {
        return Err(Error::Data(format!(
            "need records at {MIN_PHASES} or more distinct phases, got {}",
            by_phase.len()
        )));
    }
    let groups = by_phase
        .into_iter()
        .map(|(key, xs)| {
            let entries: Vec<(Array1<f64>, f64)> = match cfg.binning {
                None => xs
                    .iter()
                    .map(|&x| (quadrature_wavefunctions(x, cfg.dim), 1.0))
                    .collect(),
                Some(w) => {
                    // Round each value to its bin center and merge counts.
                    let mut bins: Vec<(i64, f64)> = Vec::new();
                    for &x in &xs {
                        let k = (x / w).floor() as i64;
                        match bins.iter_mut().find(|(b, _)| *b == k) {
                            Some((_, c)) => *c += 1.0,
                            None => bins.push((k, 1.0)),
                        }
                    }
                    bins.sort_by_key(|&(k, _)| k);
                    bins.into_iter()
                        .map(|(k, c)| {
                            let center = (k as f64 + 0.5) * w;
                            (quadrature_wavefunctions(center, cfg.dim), c)
                        })
                        .collect()
                }
            };
            PhaseGroup {
                theta: f64::from_bits(key),
                entries,
            }
        })
        .collect();
    Ok(groups)
}

// ---------------------------------------------------------------------------
// The RρR iteration

/// ψᵀ A ψ for real symmetric A.
fn quadratic_form(a: &Array2<f64>, psi: &Array1<f64>) -> f64 {
    let d = psi.len();
    let mut total = 0.0;
    for m in 0..d {
        let mut row = 0.0;
        for n in 0..d {
            row += a[[m, n]] * psi[n];
        }
        total += psi[m] * row;
    }
    total
}

/// One pass over the data: the (unnormalized, pre-adjoint) R operator at
/// the detected state `m`, and the log-likelihood of the current iterate.
fn r_operator(groups: &[PhaseGroup], m: &FockDensity) -> (Array2<Complex64>, f64) {
    let d = m.dim();
    let mut r0 = Array2::<Complex64>::zeros((d, d));
    let mut loglik = 0.0;
    for g in groups {
        let a = phase_matrix(m.matrix(), g.theta);
        // Deterministic parallel reduction: fixed-size chunks folded
        // locally, partials summed in chunk order.
        let partials: Vec<(Vec<f64>, f64)> = g
            .entries
            .par_chunks(2048)
            .map(|chunk| {
                let mut b = vec![0.0f64; d * d];
                let mut ll = 0.0;
                for (psi, count) in chunk {
                    let pr = quadratic_form(&a, psi).max(PR_FLOOR);
                    ll += count * pr.ln();
                    let w = count / pr;
                    for mm in 0..d {
                        let wp = w * psi[mm];
                        let row = &mut b[mm * d..(mm + 1) * d];
                        for (nn, slot) in row.iter_mut().enumerate() {
                            *slot += wp * psi[nn];
                        }
                    }
                }
                (b, ll)
            })
            .collect();
        let mut b = vec![0.0f64; d * d];
        for (pb, pll) in partials {
            loglik += pll;
            for (slot, v) in b.iter_mut().zip(pb) {
                *slot += v;
            }
        }
        // Restore the phase: Π_{mn} = e^{i(m−n)θ} ψ_m ψ_n.
        for mm in 0..d {
            for nn in 0..d {
                let phase = Complex64::from_polar(1.0, (mm as f64 - nn as f64) * g.theta);
                r0[[mm, nn]] += phase * b[mm * d + nn];
            }
        }
    }
    (r0, loglik)
}

/// R̄ ρ R̄, hermitized and trace-normalized.
fn sandwich_normalized(rbar: &Array2<Complex64>, rho: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let m = rbar.dot(rho).dot(rbar);
    let d = m.nrows();
    let trace: f64 = (0..d).map(|i| m[[i, i]].re).sum();
    if !trace.is_finite() || trace <= 1e-300 {
        return Err(Error::Numerical(format!(
            "iterate trace collapsed to {trace}"
        )));
    }
    let mut out = Array2::<Complex64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            out[[i, j]] = 0.5 * (m[[i, j]] + m[[j, i]].conj()) / trace;
        }
    }
    Ok(out)
}

/// Iterative maximum-likelihood reconstruction from quadrature records.
/// Needs at least 1000 records over at least 6 distinct phases. Returns
/// the final iterate with `converged = false` when the iteration cap is
/// reached before the step size drops below the tolerance.
pub fn maxlik_reconstruct(records: &[QuadratureRecord], cfg: &TomoConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let groups = group_records(records, cfg)?;
    let total_weight: f64 = groups
        .iter()
        .flat_map(|g| g.entries.iter().map(|(_, c)| *c))
        .sum();

    let mut rho = FockDensity::maximally_mixed(cfg.dim)?;
    if cfg.max_iters == 0 {
        return Ok(Reconstruction {
            rho,
            iterations: 0,
            converged: false,
            loglik: Vec::new(),
            final_step: f64::NAN,
        });
    }

    // (R̄, loglik) at the current iterate.
    let eval = |state: &FockDensity| -> Result<(Array2<Complex64>, f64)> {
        let detected = loss_channel(state, cfg.eta_correction)?;
        let (r0, ll) = r_operator(&groups, &detected);
        let rbar = loss_channel_adjoint(&r0, cfg.eta_correction)? / Complex64::from(total_weight);
        Ok((rbar, ll))
    };

    let mut logliks: Vec<f64> = Vec::with_capacity(cfg.max_iters);
    let mut previous: Option<(FockDensity, Array2<Complex64>, f64)> = None;
    let mut converged = false;
    let mut final_step = f64::NAN;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        let (mut rbar, mut ll) = eval(&rho)?;
        if let Some((prev_rho, prev_rbar, prev_ll)) = &previous {
            let dip_tol = 1e-9 * prev_ll.abs().max(1.0);
            if ll < prev_ll - dip_tol {
                // The full step overshot: retry from the previous iterate
                // with a diluted map, halving epsilon until monotone.
                let eye = Array2::<Complex64>::eye(cfg.dim);
                let mut eps = 0.5;
                let mut recovered = false;
                for _ in 0..20 {
                    let damped = &eye + &prev_rbar.mapv(|v| v * eps);
                    let cand =
                        FockDensity::new_unchecked(sandwich_normalized(&damped, prev_rho.matrix())?);
                    let (crbar, cll) = eval(&cand)?;
                    if cll >= prev_ll - dip_tol {
                        rho = cand;
                        rbar = crbar;
                        ll = cll;
                        recovered = true;
                        break;
                    }
                    eps *= 0.5;
                }
                if !recovered {
                    return Err(Error::Numerical(format!(
                        "likelihood decreased ({prev_ll} to {ll}) and dilution did not recover"
                    )));
                }
            }
        }
        logliks.push(ll);
        let next = FockDensity::new_unchecked(sandwich_normalized(&rbar, rho.matrix())?);
        final_step = next.trace_distance_to(&rho);
        previous = Some((rho, rbar, ll));
        rho = next;
        iterations += 1;
        if final_step <= cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    // Revalidate: the sandwich form keeps iterates Hermitian and
    // positive up to roundoff, so this is a cheap safety net.
    let rho = FockDensity::new(rho.into_matrix())?;
    Ok(Reconstruction {
        rho,
        iterations,
        converged,
        loglik: logliks,
        final_step,
    })
}

// ---------------------------------------------------------------------------
// Fidelity functionals

/// Builds a pure target in a roomy Fock space and crops it to `dim`
/// without renormalizing, so the overlap is against the true state.
fn cropped_target<F>(build: F, dim: usize) -> Result<Array1<Complex64>>
where
    F: Fn(usize) -> Result<FockVector>,
{
    let build_dim = dim.max(TARGET_BUILD_DIM);
    let full = build(build_dim)?;
    Ok(full.amps().slice(ndarray::s![..dim]).to_owned())
}

/// ⟨v|ρ|v⟩ for a (possibly sub-normalized) target vector.
fn overlap_quadratic(rho: &FockDensity, v: &Array1<Complex64>) -> Result<f64> {
    let d = rho.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..d {
        let mut row = Complex64::new(0.0, 0.0);
        for n in 0..d {
            row += rho.matrix()[[m, n]] * v[n];
        }
        acc += v[m].conj() * row;
    }
    if acc.im.abs() > 1e-8 {
        return Err(Error::Numerical(format!(
            "fidelity has imaginary part {:.3e}",
            acc.im
        )));
    }
    Ok(acc.re.clamp(0.0, 1.0))
}

/// Overlap with the ideal odd cat of amplitude α.
pub fn fidelity_cat(rho: &FockDensity, params: &CatParams) -> Result<f64> {
    let target = cropped_target(|d| odd_cat(params, d), rho.dim())?;
    overlap_quadratic(rho, &target)
}

/// Overlap with the ideal squeezed cat; r = 0 falls back to the cat.
pub fn fidelity_sc(rho: &FockDensity, params: &SCParams) -> Result<f64> {
    if params.r == 0.0 {
        return fidelity_cat(rho, &params.cat());
    }
    let target = cropped_target(|d| sc_state_closed_form(params, d), rho.dim())?;
    overlap_quadratic(rho, &target)
}

/// Same functional evaluated through the unitary route ⟨cat|S†ρS|cat⟩,
/// i.e. the target S|cat⟩ built by matrix exponential instead of the
/// closed-form amplitudes. Agrees with `fidelity_sc` to 1e−8; kept
/// separate because the matrix route is far too slow for fit grids.
pub fn fidelity_sc_via_unitary(rho: &FockDensity, params: &SCParams) -> Result<f64> {
    if params.r == 0.0 {
        return fidelity_cat(rho, &params.cat());
    }
    let target = cropped_target(
        |d| {
            let cat = odd_cat(&params.cat(), d)?;
            let s = squeeze_matrix(params.r, params.theta, d)?;
            let (state, _) = cat.apply_matrix(&s)?;
            Ok(state)
        },
        rho.dim(),
    )?;
    overlap_quadratic(rho, &target)
}

// ---------------------------------------------------------------------------
// Grid fitting

/// One evaluated point of the fidelity surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub alpha: f64,
    pub r: f64,
    pub fidelity: f64,
}

/// Argmax of a fidelity surface with the full grid retained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha_hat: f64,
    pub r_hat: f64,
    /// Squeezing phase the surface was evaluated at (0 or π).
    pub theta: f64,
    pub fidelity: f64,
    pub grid: Vec<FitPoint>,
}

/// α ∈ [0.5, 2.0] step 0.01.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=150).map(|i| 0.5 + 0.01 * i as f64).collect()
}

/// r ∈ [0, 0.6] step 0.01.
pub fn default_r_grid() -> Vec<f64> {
    (0..=60).map(|i| 0.01 * i as f64).collect()
}

/// Highest-fidelity point; exact ties go to smaller r, then smaller α.
/// Scaling every fidelity by a positive constant cannot change the pick.
pub fn argmax_point(grid: &[FitPoint]) -> Option<FitPoint> {
    let mut best: Option<FitPoint> = None;
    for &p in grid {
        best = Some(match best {
            None => p,
            Some(b) => {
                let better = p.fidelity > b.fidelity
                    || (p.fidelity == b.fidelity
                        && (p.r < b.r || (p.r == b.r && p.alpha < b.alpha)));
                if better {
                    p
                } else {
                    b
                }
            }
        });
    }
    best
}

/// Exhaustive fidelity maximization over an (α, r) grid at fixed phase.
pub fn fit_sc(
    rho: &FockDensity,
    theta: f64,
    alpha_grid: &[f64],
    r_grid: &[f64],
) -> Result<FitResult> {
    if alpha_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::Parameter("fit grids must be non-empty".into()));
    }
    let points: Vec<(f64, f64)> = r_grid
        .iter()
        .flat_map(|&r| alpha_grid.iter().map(move |&a| (a, r)))
        .collect();
    let grid: Vec<FitPoint> = points
        .par_iter()
        .map(|&(alpha, r)| {
            let params = SCParams::new(alpha, r, theta)?;
            let fidelity = fidelity_sc(rho, &params)?;
            Ok(FitPoint { alpha, r, fidelity })
        })
        .collect::<Result<_>>()?;
    let best = argmax_point(&grid).expect("grid is non-empty");
    Ok(FitResult {
        alpha_hat: best.alpha,
        r_hat: best.r,
        theta,
        fidelity: best.fidelity,
        grid,
    })
}

impl FitResult {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// The evaluated surface as CSV (alpha,r,fidelity).
pub fn fidelity_surface_to_csv(grid: &[FitPoint]) -> String {
    let mut out = String::with_capacity(grid.len() * 60 + 20);
    out.push_str("alpha,r,fidelity\n");
    for p in grid {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p.alpha, p.r, p.fidelity));
    }
    out
}

pub fn fidelity_surface_from_csv(s: &str) -> Result<Vec<FitPoint>> {
    let mut grid = Vec::new();
    for (i, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("alpha")) {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Data(format!("bad surface line {}: {line:?}", i + 1)))?;
        if fields.len() != 3 {
            return Err(Error::Data(format!(
                "surface line {} has {} fields, want 3",
                i + 1,
                fields.len()
            )));
        }
        grid.push(FitPoint {
            alpha: fields[0],
            r: fields[1],
            fidelity: fields[2],
        });
    }
    Ok(grid)
}

pub fn write_fidelity_surface(path: &Path, grid: &[FitPoint]) -> Result<()> {
    std::fs::write(path, fidelity_surface_to_csv(grid))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Bootstrap

/// Resamples records with replacement; deterministic in the seed.
pub fn bootstrap_resample(records: &[QuadratureRecord], seed: u64) -> Vec<QuadratureRecord> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..records.len())
        .map(|_| records[rng.random_range(0..records.len())])
        .collect()
}
