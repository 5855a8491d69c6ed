//! Phase-space representation: Wigner functions and quadrature marginals.
//!
//! Conventions: x = (a + a†)/√2, so a coherent state of real amplitude α
//! sits at x = √2 α and the vacuum is W(x,p) = (1/π) e^{−x²−p²}. The odd
//! cat state has the closed form
//!
//! ```text
//! W(x,p) = [e^{−(x−√2α)²−p²} + e^{−(x+√2α)²−p²}
//!           − 2 e^{−x²−p²} cos(2√2 α p)] / (π N−),
//! ```
//!
//! which equals −1/π exactly at the origin. Squeezing rescales the
//! arguments: the p-squeezed (amplified) cat is W_cat(e^{−r}x, e^{r}p)
//! and the x-squeezed (deamplified) one is W_cat(e^{r}x, e^{−r}p).
//!
//! For arbitrary density matrices the Wigner function is the kernel sum
//! W = Σ_{mn} ρ_{mn} W_{|m⟩⟨n|} with the Laguerre-polynomial kernel,
//! evaluated per anti-diagonal through a normalized three-term recurrence
//! whose iterates are bounded by 1, so no exponent tracking is needed at
//! any grid point with |x|, |p| ≤ 8 and dim ≤ 60.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use crate::fock::{CatParams, FockDensity, SCParams};
use crate::linalg::ln_factorial;
use crate::{Error, Result};

/// Default artifact grid: [−5, 5]² at 201×201.
pub const DEFAULT_GRID_HALF_WIDTH: f64 = 5.0;
/// Points per axis of the default grid.
pub const DEFAULT_GRID_POINTS: usize = 201;

// ---------------------------------------------------------------------------
// Analytic evaluators

/// Vacuum Wigner function (1/π) e^{−x²−p²}.
pub fn wigner_vacuum(x: f64, p: f64) -> f64 {
    (-x * x - p * p).exp() / PI
}

/// Odd cat state Wigner function, exact.
pub fn wigner_cat(params: &CatParams, x: f64, p: f64) -> f64 {
    let a = params.alpha;
    let s2a = SQRT_2 * a;
    let plus = (-(x - s2a) * (x - s2a) - p * p).exp();
    let minus = (-(x + s2a) * (x + s2a) - p * p).exp();
    let fringe = 2.0 * (-x * x - p * p).exp() * (2.0 * SQRT_2 * a * p).cos();
    (plus + minus - fringe) / (PI * params.n_minus())
}

/// Amplified (p-squeezed) cat: W_cat evaluated at (e^{−r}x, e^{r}p).
/// The phase is fixed at 0 by the choice of this function; only `alpha`
/// and `r` of the parameter set enter. r = 0 reduces bit-for-bit to
/// `wigner_cat`.
pub fn wigner_psc(params: &SCParams, x: f64, p: f64) -> f64 {
    let cat = params.cat();
    wigner_cat(&cat, (-params.r).exp() * x, params.r.exp() * p)
}

/// Deamplified (x-squeezed) cat: W_cat evaluated at (e^{r}x, e^{−r}p).
pub fn wigner_xsc(params: &SCParams, x: f64, p: f64) -> f64 {
    let cat = params.cat();
    wigner_cat(&cat, params.r.exp() * x, (-params.r).exp() * p)
}

/// W(0,0) of a density matrix, (1/π) Σ_n (−1)^n ρ_nn (displaced-parity
/// form of the kernel sum at the origin).
pub fn wigner_origin(rho: &FockDensity) -> f64 {
    let mut sign = 1.0;
    let mut acc = 0.0;
    for p in rho.populations() {
        acc += sign * p;
        sign = -sign;
    }
    acc / PI
}

// ---------------------------------------------------------------------------
// Fock-basis kernel

/// W(x, p) of an arbitrary density matrix.
///
/// The kernel for m = n + d ≥ n is
/// `(1/π)(−1)^n √(n!/m!) (√2 z̄)^d L_n^{(d)}(2|z|²) e^{−|z|²}`, z = x + ip.
/// Per anti-diagonal d the magnitudes Q_n = (−1)^n √(n!/m!) (√2|z|)^d
/// L_n^{(d)}(u) e^{−u/2} (u = 2|z|²) obey
/// `Q_n = [(u−2n−d+1) Q_{n−1} − √((n−1)(n+d−1)) Q_{n−2}] / √(n(n+d))`
/// and satisfy |Q_n| ≤ 1, so the recurrence never overflows. The sum is
/// real by construction (conjugate off-diagonal pairs are folded into
/// 2 Re[·]); no imaginary residue is ever formed.
pub fn wigner_point(rho: &FockDensity, x: f64, p: f64) -> f64 {
    let dim = rho.dim();
    let m = rho.matrix();
    let u = 2.0 * (x * x + p * p);
    let zmag = (x * x + p * p).sqrt();
    let phi = p.atan2(x);
    let (cos_phi, sin_phi) = (phi.cos(), phi.sin());

    let mut total = 0.0;
    // cos(dφ), sin(dφ) advanced by angle addition.
    let (mut cos_d, mut sin_d) = (1.0f64, 0.0f64);
    for d in 0..dim {
        if d > 0 {
            let c = cos_d * cos_phi - sin_d * sin_phi;
            let s = sin_d * cos_phi + cos_d * sin_phi;
            cos_d = c;
            sin_d = s;
        }
        let ln_q0 = if d == 0 {
            -0.5 * u
        } else if zmag == 0.0 {
            f64::NEG_INFINITY
        } else {
            d as f64 * (SQRT_2 * zmag).ln() - 0.5 * u - 0.5 * ln_factorial(d)
        };
        let mut q_prev = 0.0;
        let mut q = ln_q0.exp();
        let mut diag = 0.0;
        for n in 0..dim - d {
            // e^{−idφ} applied to ρ_{n+d,n}: real part only survives.
            let r = m[(n + d, n)];
            diag += q * (r.re * cos_d + r.im * sin_d);
            let nf = (n + 1) as f64;
            let df = d as f64;
            let q_next = ((u - 2.0 * nf - df + 1.0) * q
                - (n as f64 * (n as f64 + df)).sqrt() * q_prev)
                / (nf * (nf + df)).sqrt();
            q_prev = q;
            q = q_next;
        }
        total += if d == 0 { diag } else { 2.0 * diag };
    }
    total / PI
}

// ---------------------------------------------------------------------------
// Quadrature marginals

/// Quadrature wavefunctions ψ_n(x) for n < dim: the harmonic-oscillator
/// eigenfunctions in the unit-variance-1/2 convention,
/// ψ_0 = π^{−1/4} e^{−x²/2}, ψ_n = x√(2/n) ψ_{n−1} − √((n−1)/n) ψ_{n−2}.
pub fn quadrature_wavefunctions(x: f64, dim: usize) -> Array1<f64> {
    let mut psi = Array1::zeros(dim);
    psi[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if dim > 1 {
        psi[1] = SQRT_2 * x * psi[0];
    }
    for n in 2..dim {
        let nf = n as f64;
        psi[n] = x * (2.0 / nf).sqrt() * psi[n - 1] - ((nf - 1.0) / nf).sqrt() * psi[n - 2];
    }
    psi
}

/// Real symmetric matrix A with A_{mn} = Re[ρ_{mn} e^{i(n−m)θ}], so that
/// the rotated-quadrature density is Pr(X_θ = x) = ψ(x)ᵀ A ψ(x).
pub(crate) fn phase_matrix(rho: &Array2<Complex64>, theta: f64) -> Array2<f64> {
    let dim = rho.nrows();
    let mut a = Array2::zeros((dim, dim));
    for mm in 0..dim {
        for nn in 0..dim {
            let ph = Complex64::from_polar(1.0, (nn as f64 - mm as f64) * theta);
            a[(mm, nn)] = (rho[(mm, nn)] * ph).re;
        }
    }
    a
}

/// Probability density of the rotated quadrature X_θ at x.
pub fn quadrature_pdf(rho: &FockDensity, theta: f64, x: f64) -> f64 {
    let a = phase_matrix(rho.matrix(), theta);
    quadrature_pdf_with_matrix(&a, x)
}

/// Same, with the phase matrix precomputed (one matrix serves all x).
pub fn quadrature_pdf_with_matrix(a: &Array2<f64>, x: f64) -> f64 {
    let psi = quadrature_wavefunctions(x, a.nrows());
    let av = a.dot(&psi);
    psi.iter().zip(av.iter()).map(|(y, z)| y * z).sum()
}

/// Density curve over many points, reusing one phase matrix.
pub fn quadrature_pdf_curve(rho: &FockDensity, theta: f64, xs: &[f64]) -> Vec<f64> {
    let a = phase_matrix(rho.matrix(), theta);
    xs.iter().map(|&x| quadrature_pdf_with_matrix(&a, x)).collect()
}

// ---------------------------------------------------------------------------
// Grids

/// Rectangular phase-space grid bounds and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, p_min: f64, p_max: f64, nx: usize, np: usize) -> Result<Self> {
        if !(x_max > x_min) || !(p_max > p_min) {
            return Err(Error::Parameter(format!(
                "grid extent must be positive, got x [{x_min}, {x_max}], p [{p_min}, {p_max}]"
            )));
        }
        if nx < 2 || np < 2 {
            return Err(Error::Parameter(format!(
                "grid needs at least 2 points per axis, got {nx}x{np}"
            )));
        }
        Ok(Self { x_min, x_max, p_min, p_max, nx, np })
    }

    /// Square grid [−half, half]² with n points per axis.
    pub fn square(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, -half_width, half_width, n, n)
    }

    pub fn default_square() -> Self {
        Self::square(DEFAULT_GRID_HALF_WIDTH, DEFAULT_GRID_POINTS).expect("default grid is valid")
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn ps(&self) -> Vec<f64> {
        linspace(self.p_min, self.p_max, self.np)
    }
}

/// Evenly spaced points including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
        .collect()
}

/// Wigner values tabulated on a grid; `values[(ix, ip)]` at (xs[ix], ps[ip]).
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    spec: GridSpec,
    values: Array2<f64>,
}

impl WignerGrid {
    /// Tabulates a pointwise evaluator. Rows parallelize; each point is
    /// summed in a fixed order, so results do not depend on thread count.
    pub fn evaluate<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let xs = spec.xs();
        let ps = spec.ps();
        let rows: Vec<Vec<f64>> = xs
            .par_iter()
            .map(|&x| ps.iter().map(|&p| f(x, p)).collect())
            .collect();
        let mut values = Array2::zeros((spec.nx, spec.np));
        for (ix, row) in rows.iter().enumerate() {
            for (ip, &w) in row.iter().enumerate() {
                values[(ix, ip)] = w;
            }
        }
        Self { spec, values }
    }

    /// Kernel-sum Wigner function of a density matrix on a grid.
    pub fn from_density(rho: &FockDensity, spec: GridSpec) -> Self {
        Self::evaluate(spec, |x, p| wigner_point(rho, x, p))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Trapezoidal integral over the grid rectangle.
    pub fn integral(&self) -> f64 {
        let dx = (self.spec.x_max - self.spec.x_min) / (self.spec.nx - 1) as f64;
        let dp = (self.spec.p_max - self.spec.p_min) / (self.spec.np - 1) as f64;
        let mut acc = 0.0;
        for ix in 0..self.spec.nx {
            let wx = if ix == 0 || ix == self.spec.nx - 1 { 0.5 } else { 1.0 };
            for ip in 0..self.spec.np {
                let wp = if ip == 0 || ip == self.spec.np - 1 { 0.5 } else { 1.0 };
                acc += wx * wp * self.values[(ix, ip)];
            }
        }
        acc * dx * dp
    }

    /// Riemann marginal along p: dp·Σ_p W(x, p) for each grid x
    /// (trapezoidal weights along p).
    pub fn marginal_x(&self) -> Vec<f64> {
        let dp = (self.spec.p_max - self.spec.p_min) / (self.spec.np - 1) as f64;
        (0..self.spec.nx)
            .map(|ix| {
                let mut acc = 0.0;
                for ip in 0..self.spec.np {
                    let wp = if ip == 0 || ip == self.spec.np - 1 { 0.5 } else { 1.0 };
                    acc += wp * self.values[(ix, ip)];
                }
                acc * dp
            })
            .collect()
    }

    /// CSV layout: one header line `x_min,x_max,p_min,p_max,nx,np`, then
    /// nx·np lines `x,p,w` with x varying slowest. 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            self.spec.x_min, self.spec.x_max, self.spec.p_min, self.spec.p_max,
            self.spec.nx, self.spec.np
        ));
        let xs = self.spec.xs();
        let ps = self.spec.ps();
        for (ix, &x) in xs.iter().enumerate() {
            for (ip, &p) in ps.iter().enumerate() {
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", x, p, self.values[(ix, ip)]));
            }
        }
        out
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty grid file".into()))?;
        let h: Vec<&str> = header.split(',').collect();
        if h.len() != 6 {
            return Err(Error::Data(format!(
                "grid header must have 6 fields, got {}",
                h.len()
            )));
        }
        let parse = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Data(format!("bad grid number {t:?}: {e}")))
        };
        let spec = GridSpec::new(
            parse(h[0])?,
            parse(h[1])?,
            parse(h[2])?,
            parse(h[3])?,
            parse(h[4])? as usize,
            parse(h[5])? as usize,
        )?;
        let mut values = Array2::zeros((spec.nx, spec.np));
        let mut count = 0usize;
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Data(format!("grid row must have 3 fields: {line:?}")));
            }
            if count >= spec.nx * spec.np {
                return Err(Error::Data("grid file has more rows than nx*np".into()));
            }
            let (ix, ip) = (count / spec.np, count % spec.np);
            values[(ix, ip)] = parse(f[2])?;
            count += 1;
        }
        if count != spec.nx * spec.np {
            return Err(Error::Data(format!(
                "grid file has {count} rows, expected {}",
                spec.nx * spec.np
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self, run_id: Option<&str>) -> Result<String> {
        let j = WignerGridJson {
            x_min: self.spec.x_min,
            x_max: self.spec.x_max,
            p_min: self.spec.p_min,
            p_max: self.spec.p_max,
            nx: self.spec.nx,
            np: self.spec.np,
            values: self.values.iter().copied().collect(),
            run_id: run_id.map(str::to_owned),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: WignerGridJson = serde_json::from_str(s).map_err(|e| Error::Data(e.to_string()))?;
        let spec = GridSpec::new(j.x_min, j.x_max, j.p_min, j.p_max, j.nx, j.np)?;
        if j.values.len() != j.nx * j.np {
            return Err(Error::Data(format!(
                "grid JSON has {} values, expected {}",
                j.values.len(),
                j.nx * j.np
            )));
        }
        let values = Array2::from_shape_vec((j.nx, j.np), j.values)
            .map_err(|e| Error::Data(e.to_string()))?;
        Ok(Self { spec, values })
    }

    pub fn write_json(&self, path: &Path, run_id: Option<&str>) -> Result<()> {
        std::fs::write(path, self.to_json_string(run_id)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct WignerGridJson {
    x_min: f64,
    x_max: f64,
    p_min: f64,
    p_max: f64,
    nx: usize,
    np: usize,
    values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    run_id: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{self, FockVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn analytic_evaluators_hit_minus_one_over_pi_at_origin() {
        for &(alpha, r) in &[(0.3, 0.0), (1.06, 0.2), (1.5, 0.5)] {
            let cat = CatParams::new(alpha).unwrap();
            assert_abs_diff_eq!(wigner_cat(&cat, 0.0, 0.0), -1.0 / PI, epsilon = 1e-12);
            let sc = SCParams::new(alpha, r, 0.0).unwrap();
            assert_abs_diff_eq!(wigner_psc(&sc, 0.0, 0.0), -1.0 / PI, epsilon = 1e-12);
            assert_abs_diff_eq!(wigner_xsc(&sc, 0.0, 0.0), -1.0 / PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn cat_value_at_coherent_peak_matches_substitution() {
        let alpha = 1.06f64;
        let cat = CatParams::new(alpha).unwrap();
        let got = wigner_cat(&cat, SQRT_2 * alpha, 0.0);
        let a2 = alpha * alpha;
        let want = (1.0 + (-8.0 * a2).exp() - 2.0 * (-2.0 * a2).exp()) / (PI * cat.n_minus());
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        // Gaussian decay far out.
        assert!(wigner_cat(&cat, 10.0, 0.0).abs() < 1e-12);
    }

    #[test]
    fn squeezing_rescales_coordinates() {
        let sc = SCParams::new(1.0, 0.3, 0.0).unwrap();
        let cat = sc.cat();
        for &x in &[-2.0, -0.5, 0.0, 1.3] {
            for &p in &[-1.7, 0.0, 0.4, 2.2] {
                assert_abs_diff_eq!(
                    wigner_psc(&sc, x, p),
                    wigner_cat(&cat, (-0.3f64).exp() * x, 0.3f64.exp() * p),
                    epsilon = 1e-14
                );
                assert_abs_diff_eq!(
                    wigner_xsc(&sc, x, p),
                    wigner_cat(&cat, 0.3f64.exp() * x, (-0.3f64).exp() * p),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn zero_squeezing_reduces_to_the_cat_bit_for_bit() {
        let sc = SCParams::new(0.8, 0.0, 0.0).unwrap();
        let cat = sc.cat();
        for &x in &[-3.0, -0.1, 0.7, 2.9] {
            for &p in &[-2.2, 0.0, 1.8] {
                assert_eq!(wigner_psc(&sc, x, p), wigner_cat(&cat, x, p));
                assert_eq!(wigner_xsc(&sc, x, p), wigner_cat(&cat, x, p));
            }
        }
    }

    #[test]
    fn kernel_reproduces_vacuum_and_single_photon() {
        let vac = FockVector::vacuum(20).unwrap().to_density();
        for &(x, p) in &[(0.0, 0.0), (0.7, -0.3), (2.0, 1.5), (-3.0, 0.2)] {
            assert_abs_diff_eq!(wigner_point(&vac, x, p), wigner_vacuum(x, p), epsilon = 1e-9);
        }
        let one = FockVector::basis_state(20, 1).unwrap().to_density();
        assert_abs_diff_eq!(wigner_point(&one, 0.0, 0.0), -1.0 / PI, epsilon = 1e-12);
        for &(x, p) in &[(0.5f64, 0.2f64), (1.0, -1.0)] {
            let u = x * x + p * p;
            let want = (2.0 * u - 1.0) * (-u).exp() / PI;
            assert_abs_diff_eq!(wigner_point(&one, x, p), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn kernel_sign_pins_the_phase_orientation() {
        // |iα| lives on the +p axis: the peak must be at (0, √2 α),
        // not its mirror image.
        let a = 0.9;
        let rho = fock::coherent(Complex64::new(0.0, a), 25).unwrap().to_density();
        let peak = wigner_point(&rho, 0.0, SQRT_2 * a);
        let mirror = wigner_point(&rho, 0.0, -SQRT_2 * a);
        assert_abs_diff_eq!(peak, 1.0 / PI, epsilon = 1e-8);
        assert!(mirror < 1e-3);
    }

    #[test]
    fn kernel_matches_closed_form_cat() {
        let alpha = 1.06;
        let cat = CatParams::new(alpha).unwrap();
        let rho = fock::odd_cat(&cat, 40).unwrap().to_density();
        for &x in &[-5.0, -2.1, 0.0, 0.9, 3.3, 5.0] {
            for &p in &[-4.0, -1.0, 0.0, 2.5, 5.0] {
                assert_abs_diff_eq!(
                    wigner_point(&rho, x, p),
                    wigner_cat(&cat, x, p),
                    epsilon = 1e-6
                );
            }
        }
    }

    #[test]
    fn kernel_matches_closed_form_squeezed_cats() {
        for &(theta, which) in &[(0.0, true), (PI, false)] {
            let sc = SCParams::new(1.0, 0.3, theta).unwrap();
            let rho = fock::sc_state_closed_form(&sc, 40).unwrap().to_density();
            for &x in &[-4.0, -1.5, 0.0, 0.8, 2.7] {
                for &p in &[-3.5, 0.0, 1.1, 4.2] {
                    let want = if which {
                        wigner_psc(&sc, x, p)
                    } else {
                        wigner_xsc(&sc, x, p)
                    };
                    assert_abs_diff_eq!(wigner_point(&rho, x, p), want, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn analytic_grid_normalizes_to_one() {
        let cat = CatParams::new(1.06).unwrap();
        let spec = GridSpec::new(-8.0, 8.0, -8.0, 8.0, 201, 201).unwrap();
        let grid = WignerGrid::evaluate(spec, |x, p| wigner_cat(&cat, x, p));
        assert_abs_diff_eq!(grid.integral(), 1.0, epsilon = 1e-4);
        assert!(grid.min_value() < -0.25);
    }

    #[test]
    fn vacuum_marginal_is_the_half_variance_gaussian() {
        let rho = FockVector::vacuum(15).unwrap().to_density();
        let xs = linspace(-8.0, 8.0, 1601);
        let pdf = quadrature_pdf_curve(&rho, 0.0, &xs);
        let dx = xs[1] - xs[0];
        let norm: f64 = pdf.iter().sum::<f64>() * dx;
        let var: f64 = xs.iter().zip(&pdf).map(|(x, f)| x * x * f).sum::<f64>() * dx;
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(var, 0.5, epsilon = 1e-6);
        // Pointwise against (1/√π)e^{−x²}.
        assert_abs_diff_eq!(
            quadrature_pdf(&rho, 0.0, 0.7),
            (-0.49f64).exp() / PI.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn squeezed_vacuum_marginal_variances() {
        let r = 0.3454;
        let sv = fock::squeezed_vacuum(r, PI, 40).unwrap().to_density();
        let xs = linspace(-8.0, 8.0, 1601);
        let dx = xs[1] - xs[0];
        let var = |theta: f64| -> f64 {
            quadrature_pdf_curve(&sv, theta, &xs)
                .iter()
                .zip(&xs)
                .map(|(f, x)| x * x * f)
                .sum::<f64>()
                * dx
        };
        // θ = π deamplifies x; its p quadrature is antisqueezed.
        assert_abs_diff_eq!(var(0.0), 0.5 * (-2.0 * r).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(var(PI / 2.0), 0.5 * (2.0 * r).exp(), epsilon = 1e-6);
    }

    #[test]
    fn odd_cat_p_marginal_has_a_node_at_zero() {
        let rho = fock::odd_cat(&CatParams::new(1.06).unwrap(), 30).unwrap().to_density();
        assert!(quadrature_pdf(&rho, PI / 2.0, 0.0).abs() < 1e-9);
        let xs = linspace(-8.0, 8.0, 1601);
        let pdf = quadrature_pdf_curve(&rho, PI / 2.0, &xs);
        let norm: f64 = pdf.iter().sum::<f64>() * (xs[1] - xs[0]);
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn grid_marginal_agrees_with_wavefunction_marginal() {
        let cat = CatParams::new(1.06).unwrap();
        let rho = fock::odd_cat(&cat, 40).unwrap().to_density();
        let spec = GridSpec::new(-6.0, 6.0, -6.0, 6.0, 121, 241).unwrap();
        let grid = WignerGrid::evaluate(spec, |x, p| wigner_cat(&cat, x, p));
        let from_grid = grid.marginal_x();
        let xs = spec.xs();
        let direct = quadrature_pdf_curve(&rho, 0.0, &xs);
        let worst = from_grid
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 2e-3, "max marginal deviation {worst}");
    }

    #[test]
    fn csv_round_trip_is_exact_and_json_matches() {
        let cat = CatParams::new(0.9).unwrap();
        let spec = GridSpec::new(-2.0, 2.0, -1.0, 1.5, 9, 7).unwrap();
        let grid = WignerGrid::evaluate(spec, |x, p| wigner_cat(&cat, x, p));
        let back = WignerGrid::from_csv_str(&grid.to_csv_string()).unwrap();
        assert_eq!(grid, back);
        let jback = WignerGrid::from_json_str(&grid.to_json_string(Some("runid")).unwrap()).unwrap();
        assert_eq!(grid, jback);
    }

    #[test]
    fn grid_spec_rejects_degenerate_bounds() {
        assert!(GridSpec::new(1.0, 1.0, -1.0, 1.0, 11, 11).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 2.0, -2.0, 11, 11).is_err());
        assert!(GridSpec::new(-1.0, 1.0, -1.0, 1.0, 1, 11).is_err());
    }

    #[test]
    fn origin_parity_sum_matches_kernel() {
        let sc = SCParams::new(1.2, 0.25, 0.0).unwrap();
        let rho = fock::sc_state_closed_form(&sc, 30).unwrap().to_density();
        let lossy = fock::loss_channel(&rho, 0.8).unwrap();
        assert_abs_diff_eq!(
            wigner_origin(&lossy),
            wigner_point(&lossy, 0.0, 0.0),
            epsilon = 1e-10
        );
        let one = FockVector::basis_state(10, 1).unwrap().to_density();
        assert_abs_diff_eq!(wigner_origin(&one), -1.0 / PI, epsilon = 1e-15);
    }
}
