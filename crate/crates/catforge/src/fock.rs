//! Truncated Fock-space states and the operations that prepare squeezed
//! cat states.
//!
//! States live in the number basis `|0⟩ … |dim−1⟩`. An odd cat state of
//! real amplitude α has only odd number components,
//!
//! ```text
//! |cat−⟩ = Σ_n e^{−α²/2} · 2 α^{2n+1} / √(N− (2n+1)!) |2n+1⟩,
//! N− = 2 − 2 e^{−2α²},
//! ```
//!
//! and squeezing it with `S(ζ) = exp[(ζ* a² − ζ a†²)/2]`, `ζ = −r e^{iθ}`,
//! yields the squeezed cat (SC) family: θ = 0 amplifies the superposition
//! direction x (p-squeezed, "p-SC"), θ = π deamplifies it ("x-SC"). Both
//! squeezed cats also have closed-form number amplitudes built from
//! Hermite polynomials of real or imaginary argument; those ladders are
//! evaluated in signed-log form so they stay finite well past n ≈ 30.
//!
//! Losses are modeled by the generalized Bernoulli map
//! `ρ'_{mn} = Σ_k B_{m+k,m} B_{n+k,n} ρ_{m+k,n+k}` with
//! `B_{j,i} = √(C(j,i) η^i (1−η)^{j−i})`, which is exactly trace
//! preserving on the truncated space.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::linalg::{self, expm, ln_binomial, ln_factorial};
use crate::{Error, Result};

/// Default working Fock dimension when a command line or config does not
/// set one. Large enough that a fit grid up to α = 2 keeps its truncation
/// tail below 1e−12.
pub const DEFAULT_DIM: usize = 30;

/// Extra levels appended to the working dimension while exponentiating
/// the squeeze generator, cropped away afterwards.
pub const SQUEEZE_PAD: usize = 10;

/// Squeezing parameter equivalent to −3 dB of quadrature noise reduction,
/// `r = ln 10^{0.15}`.
pub const R_MINUS_3_DB: f64 = 0.345_387_763_949_106_9;

/// Squeezing parameter for a noise level of `db` decibels,
/// `db = 10 log10 e^{−2r}` (negative db means squeezing).
pub fn r_from_db(db: f64) -> f64 {
    -db * std::f64::consts::LN_10 / 20.0
}

/// Net parity of the photon-number populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

const PARITY_TOL: f64 = 1e-9;

fn parity_of_populations(pops: &[f64]) -> Parity {
    let even: f64 = pops.iter().step_by(2).sum();
    let odd: f64 = pops.iter().skip(1).step_by(2).sum();
    if odd <= PARITY_TOL {
        Parity::Even
    } else if even <= PARITY_TOL {
        Parity::Odd
    } else {
        Parity::Mixed
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::Dimension(format!("dim must be at least 2, got {dim}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pure states

/// A pure state as normalized number-basis amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: Array1<Complex64>,
}

impl FockVector {
    /// Wraps amplitudes that must already be normalized to 1e−9.
    pub fn new(amps: Array1<Complex64>) -> Result<Self> {
        check_dim(amps.len())?;
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm2.sqrt() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "state norm is {}, expected 1 within 1e-9",
                norm2.sqrt()
            )));
        }
        Ok(Self { amps })
    }

    /// Normalizes raw amplitudes; errors if their norm is numerically zero.
    pub fn normalized(raw: Array1<Complex64>) -> Result<Self> {
        check_dim(raw.len())?;
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Numerical("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amps: raw.mapv(|a| a / norm),
        })
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::basis_state(dim, 0)
    }

    /// Number state |n⟩.
    pub fn basis_state(dim: usize, n: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(Error::Dimension(format!("basis index {n} outside dim {dim}")));
        }
        let mut amps = Array1::zeros(dim);
        amps[n] = Complex64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &Array1<Complex64> {
        &self.amps
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &FockVector) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity_with(&self, other: &FockVector) -> f64 {
        self.overlap(other).norm_sqr()
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.photon_distribution()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn parity(&self) -> Parity {
        parity_of_populations(&self.photon_distribution())
    }

    /// ⟨self|m|self⟩ for an operator in the same basis.
    pub fn expectation(&self, m: &Array2<Complex64>) -> Complex64 {
        let mv = m.dot(&self.amps);
        self.amps
            .iter()
            .zip(mv.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies a matrix and renormalizes; also returns the pre-normalization
    /// norm (the map's success amplitude when `m` is a crop of an isometry).
    pub fn apply_matrix(&self, m: &Array2<Complex64>) -> Result<(FockVector, f64)> {
        if m.ncols() != self.dim() || m.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, state dim is {}",
                m.nrows(),
                m.ncols(),
                self.dim()
            )));
        }
        let raw = m.dot(&self.amps);
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let state = FockVector::normalized(raw)?;
        Ok((state, norm))
    }

    pub fn to_density(&self) -> FockDensity {
        let dim = self.dim();
        let mut rho = Array2::zeros((dim, dim));
        for m in 0..dim {
            for n in 0..dim {
                rho[(m, n)] = self.amps[m] * self.amps[n].conj();
            }
        }
        FockDensity { rho }
    }
}

// ---------------------------------------------------------------------------
// Mixed states

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    rho: Array2<Complex64>,
}

impl FockDensity {
    /// Validates Hermiticity (1e−10), trace (1e−9) and positivity
    /// (smallest eigenvalue ≥ −1e−8).
    pub fn new(rho: Array2<Complex64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::Dimension(format!(
                "density matrix must be square, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        check_dim(rho.nrows())?;
        let dim = rho.nrows();
        let mut herm_defect = 0.0f64;
        for i in 0..dim {
            for j in 0..=i {
                let d = (rho[(i, j)] - rho[(j, i)].conj()).norm();
                herm_defect = herm_defect.max(d);
            }
        }
        if herm_defect > 1e-10 {
            return Err(Error::Validation(format!(
                "density matrix is not Hermitian (defect {herm_defect:.3e})"
            )));
        }
        let trace: Complex64 = (0..dim).map(|i| rho[(i, i)]).sum();
        if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "density matrix trace is {trace}, expected 1 within 1e-9"
            )));
        }
        let min_eig = linalg::eigvalsh(&rho)[0];
        if min_eig < -1e-8 {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { rho })
    }

    /// Skips validation; the caller guarantees the invariants hold.
    pub fn new_unchecked(rho: Array2<Complex64>) -> Self {
        Self { rho }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut rho = Array2::zeros((dim, dim));
        let w = Complex64::new(1.0 / dim as f64, 0.0);
        for i in 0..dim {
            rho[(i, i)] = w;
        }
        Ok(Self { rho })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.rho
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.rho
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        self.populations()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn parity(&self) -> Parity {
        parity_of_populations(&self.populations())
    }

    /// ⟨ψ|ρ|ψ⟩, clamped to [0, 1] against roundoff.
    pub fn fidelity_with_pure(&self, psi: &FockVector) -> f64 {
        let rv = self.rho.dot(psi.amps());
        let val: Complex64 = psi
            .amps()
            .iter()
            .zip(rv.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        val.re.clamp(0.0, 1.0)
    }

    /// tr(mρ) for an observable in the same basis.
    pub fn expectation(&self, m: &Array2<Complex64>) -> Complex64 {
        let prod = m.dot(&self.rho);
        (0..self.dim()).map(|i| prod[(i, i)]).sum()
    }

    /// ½‖ρ − σ‖₁.
    pub fn trace_distance_to(&self, other: &FockDensity) -> f64 {
        linalg::trace_distance(&self.rho, &other.rho)
    }

    /// U ρ U†, trace-renormalized (a cropped squeeze matrix is not exactly
    /// unitary, so a tiny amount of trace can leak).
    pub fn conjugated_by(&self, u: &Array2<Complex64>) -> Result<FockDensity> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, density dim is {}",
                u.nrows(),
                u.ncols(),
                self.dim()
            )));
        }
        let ut = u.t().mapv(|v: Complex64| v.conj());
        let mut out = u.dot(&self.rho).dot(&ut);
        let tr: f64 = (0..self.dim()).map(|i| out[(i, i)].re).sum();
        if tr < 1e-12 {
            return Err(Error::Numerical("conjugation left zero trace".into()));
        }
        out.mapv_inplace(|v| v / tr);
        Ok(FockDensity { rho: out })
    }
}

// ---------------------------------------------------------------------------
// Parameter bundles

/// Odd cat state parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatParams {
    pub alpha: f64,
}

impl CatParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::Parameter(format!(
                "cat amplitude must be finite and positive, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    /// Normalization N− = 2 − 2e^{−2α²} of |α⟩ − |−α⟩.
    pub fn n_minus(&self) -> f64 {
        2.0 - 2.0 * (-2.0 * self.alpha * self.alpha).exp()
    }
}

/// Squeezed cat parameters. `theta` is the squeezing phase in
/// `ζ = −r e^{iθ}`: 0 amplifies the superposition direction (p-SC),
/// π deamplifies it (x-SC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SCParams {
    pub alpha: f64,
    pub r: f64,
    pub theta: f64,
}

impl SCParams {
    pub fn new(alpha: f64, r: f64, theta: f64) -> Result<Self> {
        CatParams::new(alpha)?;
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Parameter(format!(
                "squeezing parameter must be finite and nonnegative, got {r}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::Parameter("squeezing phase must be finite".into()));
        }
        Ok(Self { alpha, r, theta })
    }

    pub fn cat(&self) -> CatParams {
        CatParams { alpha: self.alpha }
    }

    /// ζ = −r e^{iθ}.
    pub fn zeta(&self) -> Complex64 {
        -Complex64::from_polar(self.r, self.theta)
    }
}

// ---------------------------------------------------------------------------
// State constructors

/// Coherent state |α⟩ with amplitudes e^{−|α|²/2} α^n/√(n!).
pub fn coherent(alpha: Complex64, dim: usize) -> Result<FockVector> {
    check_dim(dim)?;
    let mut amps = Array1::zeros(dim);
    let ln_mag = alpha.norm();
    for n in 0..dim {
        if ln_mag == 0.0 {
            amps[n] = if n == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            continue;
        }
        let ln_amp = -0.5 * ln_mag * ln_mag + n as f64 * ln_mag.ln() - 0.5 * ln_factorial(n);
        let phase = Complex64::from_polar(1.0, n as f64 * alpha.arg());
        amps[n] = ln_amp.exp() * phase;
    }
    // Renormalize the truncated tail.
    FockVector::normalized(amps)
}

/// Odd cat state (|α⟩ − |−α⟩)/√N−. Errors if the truncated tail holds
/// 1e−12 or more of the norm, i.e. if `dim` is too small for `alpha`.
pub fn odd_cat(params: &CatParams, dim: usize) -> Result<FockVector> {
    check_dim(dim)?;
    let alpha = params.alpha;
    let ln_norm = 0.5 * params.n_minus().ln();
    let mut amps = Array1::zeros(dim);
    let mut kept = 0.0f64;
    let mut n = 1;
    loop {
        let ln_amp =
            std::f64::consts::LN_2 + n as f64 * alpha.ln() - 0.5 * alpha * alpha
                - 0.5 * ln_factorial(n)
                - ln_norm;
        let amp = ln_amp.exp();
        if n < dim {
            amps[n] = Complex64::new(amp, 0.0);
            kept += amp * amp;
            n += 2;
        } else {
            break;
        }
    }
    let tail = 1.0 - kept;
    if tail >= 1e-12 {
        return Err(Error::Dimension(format!(
            "dim {dim} truncates {tail:.3e} of the cat(α={alpha}) norm; increase dim"
        )));
    }
    FockVector::normalized(amps)
}

/// Annihilation operator a with a[n−1, n] = √n.
pub fn annihilation_matrix(dim: usize) -> Array2<Complex64> {
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Quadrature operator X_θ = (a e^{−iθ} + a† e^{iθ})/√2; θ = 0 is x,
/// θ = π/2 is p.
pub fn quadrature_matrix(theta: f64, dim: usize) -> Array2<Complex64> {
    let a = annihilation_matrix(dim);
    let at = a.t().mapv(|v: Complex64| v.conj());
    let em = Complex64::from_polar(1.0, -theta);
    let ep = Complex64::from_polar(1.0, theta);
    let s = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
    (a.mapv(|v| v * em) + at.mapv(|v| v * ep)).mapv(|v| v * s)
}

/// Squeeze operator S(ζ) = exp[(ζ* a² − ζ a†²)/2] with ζ = −r e^{iθ},
/// exponentiated `SQUEEZE_PAD` levels above `dim` and cropped back, so the
/// retained block acts like the unitary on states supported well below
/// the cut. θ = 0 squeezes p (amplifies x), θ = π squeezes x.
pub fn squeeze_matrix(r: f64, theta: f64, dim: usize) -> Result<Array2<Complex64>> {
    check_dim(dim)?;
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Parameter(format!(
            "squeezing parameter must be finite and nonnegative, got {r}"
        )));
    }
    if !theta.is_finite() {
        return Err(Error::Parameter("squeezing phase must be finite".into()));
    }
    let big = dim + SQUEEZE_PAD;
    let zeta = -Complex64::from_polar(r, theta);
    let a = annihilation_matrix(big);
    let a2 = a.dot(&a);
    let ad2 = a2.t().mapv(|v: Complex64| v.conj());
    let half = Complex64::new(0.5, 0.0);
    let gen = a2.mapv(|v| v * zeta.conj() * half) - ad2.mapv(|v| v * zeta * half);
    let s_big = expm(&gen);
    let mut s = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            s[(i, j)] = s_big[(i, j)];
        }
    }
    Ok(s)
}

/// Squeezed vacuum S(ζ)|0⟩ (only even levels populated).
pub fn squeezed_vacuum(r: f64, theta: f64, dim: usize) -> Result<FockVector> {
    let s = squeeze_matrix(r, theta, dim)?;
    let (state, _) = FockVector::vacuum(dim)?.apply_matrix(&s)?;
    Ok(state)
}

/// Photon subtraction: amps'_n = √(n+1) amps_{n+1}, renormalized.
/// Also returns the pre-normalization norm ‖a|ψ⟩‖ = √⟨n̂⟩ (the heralding
/// weight). Errors on states with no photons (vacuum).
pub fn annihilate(state: &FockVector) -> Result<(FockVector, f64)> {
    let dim = state.dim();
    let mut raw = Array1::zeros(dim);
    for n in 0..dim - 1 {
        raw[n] = ((n + 1) as f64).sqrt() * state.amps()[n + 1];
    }
    let norm = raw.iter().map(|a: &Complex64| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::Numerical(
            "annihilation produced a zero-norm state (no photons to subtract)".into(),
        ));
    }
    let state = FockVector::normalized(raw)?;
    Ok((state, norm))
}

/// Bernoulli loss amplitude B_{j,i}(η) = √(C(j,i) η^i (1−η)^{j−i}).
fn bernoulli_amp(j: usize, i: usize, eta: f64) -> f64 {
    if eta == 1.0 {
        return if i == j { 1.0 } else { 0.0 };
    }
    if eta == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    let ln = ln_binomial(j, i) + i as f64 * eta.ln() + (j - i) as f64 * (1.0 - eta).ln();
    (0.5 * ln).exp()
}

fn check_eta(eta: f64, what: &str) -> Result<()> {
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(Error::Parameter(format!(
            "{what} must lie in [0, 1], got {eta}"
        )));
    }
    Ok(())
}

/// Pure-loss channel of transmittance η:
/// ρ'_{mn} = Σ_k B_{m+k,m} B_{n+k,n} ρ_{m+k,n+k}.
pub fn loss_channel(rho: &FockDensity, eta: f64) -> Result<FockDensity> {
    check_eta(eta, "loss transmittance")?;
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let dim = rho.dim();
    let mut out = Array2::zeros((dim, dim));
    for m in 0..dim {
        for n in 0..=m {
            let kmax = dim - 1 - m.max(n);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=kmax {
                let w = bernoulli_amp(m + k, m, eta) * bernoulli_amp(n + k, n, eta);
                acc += w * rho.matrix()[(m + k, n + k)];
            }
            out[(m, n)] = acc;
            if n != m {
                out[(n, m)] = acc.conj();
            }
        }
    }
    Ok(FockDensity { rho: out })
}

/// Heisenberg adjoint of the loss channel, used to efficiency-correct
/// measurement operators: X'_{mn} = Σ_k B_{m,m−k} B_{n,n−k} X_{m−k,n−k}.
pub fn loss_channel_adjoint(x: &Array2<Complex64>, eta: f64) -> Result<Array2<Complex64>> {
    check_eta(eta, "loss transmittance")?;
    if eta == 1.0 {
        return Ok(x.clone());
    }
    let dim = x.nrows();
    let mut out = Array2::zeros((dim, dim));
    for m in 0..dim {
        for n in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=m.min(n) {
                let w = bernoulli_amp(m, m - k, eta) * bernoulli_amp(n, n - k, eta);
                acc += w * x[(m - k, n - k)];
            }
            out[(m, n)] = acc;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Closed-form squeezed cat amplitudes

/// Signed-log sum c1·e^{l1}·s1 + c2·e^{l2}·s2 with c1, c2 > 0, returned as
/// (log magnitude, sign).
fn signed_log_add(c1: f64, l1: f64, s1: f64, c2: f64, l2: f64, s2: f64) -> (f64, f64) {
    let t1 = l1 + c1.ln();
    let t2 = l2 + c2.ln();
    if s1 == 0.0 || t1 == f64::NEG_INFINITY {
        return (t2, s2);
    }
    if s2 == 0.0 || t2 == f64::NEG_INFINITY {
        return (t1, s1);
    }
    let m = t1.max(t2);
    let v = s1 * (t1 - m).exp() + s2 * (t2 - m).exp();
    if v == 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (m + v.abs().ln(), v.signum())
    }
}

/// (log |H_n(y)|, sign) for n = 0..=n_max by the three-term recurrence
/// H_{n+1} = 2y H_n − 2n H_{n−1}, carried in log form.
fn hermite_log(y: f64, n_max: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push((0.0, 1.0));
    if n_max == 0 {
        return out;
    }
    let h1 = 2.0 * y;
    out.push(if h1 == 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (h1.abs().ln(), h1.signum())
    });
    for n in 1..n_max {
        let (ln_n, s_n) = out[n];
        let (ln_p, s_p) = out[n - 1];
        let next = signed_log_add(
            2.0 * y.abs(),
            ln_n,
            s_n * y.signum(),
            2.0 * n as f64,
            ln_p,
            -s_p,
        );
        out.push(next);
    }
    out
}

/// log H̃_n(y) for the all-positive-coefficient variant
/// H̃_n(y) = (−i)^n H_n(iy), via H̃_{n+1} = 2y H̃_n + 2n H̃_{n−1}.
/// Requires y > 0, where every value is positive.
fn hermite_mod_log(y: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(0.0);
    if n_max == 0 {
        return out;
    }
    out.push((2.0 * y).ln());
    for n in 1..n_max {
        let t1 = (2.0 * y).ln() + out[n];
        let t2 = (2.0 * n as f64).ln() + out[n - 1];
        let m = t1.max(t2);
        out.push(m + ((t1 - m).exp() + (t2 - m).exp()).ln());
    }
    out
}

/// Closed-form squeezed cat amplitudes.
///
/// For θ = 0 (p-SC) the odd amplitudes are
/// `pref · (−tanh r/2)^{(2n+1)/2} / √((2n+1)!) · H_{2n+1}(−iα/√sinh 2r)`,
/// which collapse to the positive real ladder
/// `(tanh r/2)^{(2n+1)/2} H̃_{2n+1}(α/√sinh 2r)/√((2n+1)!)`; for θ = π
/// (x-SC) the argument is real. Requires r > 0 and θ ∈ {0, π}.
pub fn sc_state_closed_form(params: &SCParams, dim: usize) -> Result<FockVector> {
    check_dim(dim)?;
    let SCParams { alpha, r, theta } = *params;
    if r <= 0.0 {
        return Err(Error::Parameter(
            "closed-form squeezed cat needs r > 0; use odd_cat for r = 0".into(),
        ));
    }
    let p_sc = if (theta - 0.0).abs() < 1e-9 {
        true
    } else if (theta - PI).abs() < 1e-9 {
        false
    } else {
        return Err(Error::Parameter(format!(
            "closed-form squeezed cat needs theta of 0 or pi, got {theta}"
        )));
    };

    let n_minus = CatParams::new(alpha)?.n_minus();
    let th = r.tanh();
    let y = alpha / (2.0 * r).sinh().sqrt();
    let ln_pref = if p_sc {
        std::f64::consts::LN_2 - 0.5 * (1.0 + th) * alpha * alpha
            - 0.5 * (n_minus * r.cosh()).ln()
    } else {
        std::f64::consts::LN_2 + 0.5 * (th - 1.0) * alpha * alpha
            - 0.5 * (n_minus * r.cosh()).ln()
    };
    let ln_half_tanh = (0.5 * th).ln();

    let herm: Vec<(f64, f64)> = if p_sc {
        hermite_mod_log(y, dim - 1).into_iter().map(|l| (l, 1.0)).collect()
    } else {
        hermite_log(y, dim - 1)
    };

    let mut amps = Array1::zeros(dim);
    let mut n = 1;
    while n < dim {
        let (lh, sh) = herm[n];
        let ln_amp = ln_pref + 0.5 * n as f64 * ln_half_tanh - 0.5 * ln_factorial(n) + lh;
        amps[n] = Complex64::new(sh * ln_amp.exp(), 0.0);
        n += 2;
    }
    let norm2: f64 = amps.iter().map(|a: &Complex64| a.norm_sqr()).sum();
    if norm2 < 0.99 {
        return Err(Error::Dimension(format!(
            "dim {dim} keeps only {norm2:.4} of the squeezed cat norm; increase dim"
        )));
    }
    FockVector::normalized(amps)
}

// ---------------------------------------------------------------------------
// Serialization: {dim, re, im}, row-major for matrices.

#[derive(Serialize, Deserialize)]
struct ComplexArrayJson {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl FockVector {
    pub fn to_json_string(&self) -> Result<String> {
        let j = ComplexArrayJson {
            dim: self.dim(),
            re: self.amps.iter().map(|a| a.re).collect(),
            im: self.amps.iter().map(|a| a.im).collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: ComplexArrayJson = serde_json::from_str(s).map_err(|e| Error::Data(e.to_string()))?;
        if j.re.len() != j.dim || j.im.len() != j.dim {
            return Err(Error::Data(format!(
                "state file claims dim {} but carries {}/{} components",
                j.dim,
                j.re.len(),
                j.im.len()
            )));
        }
        let amps = Array1::from_iter(
            j.re.iter()
                .zip(j.im.iter())
                .map(|(&re, &im)| Complex64::new(re, im)),
        );
        FockVector::new(amps).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

impl FockDensity {
    pub fn to_json_string(&self) -> Result<String> {
        let j = ComplexArrayJson {
            dim: self.dim(),
            re: self.rho.iter().map(|a| a.re).collect(),
            im: self.rho.iter().map(|a| a.im).collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: ComplexArrayJson = serde_json::from_str(s).map_err(|e| Error::Data(e.to_string()))?;
        if j.re.len() != j.dim * j.dim || j.im.len() != j.dim * j.dim {
            return Err(Error::Data(format!(
                "density file claims dim {} but carries {}/{} entries",
                j.dim,
                j.re.len(),
                j.im.len()
            )));
        }
        let mut rho = Array2::zeros((j.dim, j.dim));
        for i in 0..j.dim {
            for k in 0..j.dim {
                let idx = i * j.dim + k;
                rho[(i, k)] = Complex64::new(j.re[idx], j.im[idx]);
            }
        }
        FockDensity::new(rho).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
