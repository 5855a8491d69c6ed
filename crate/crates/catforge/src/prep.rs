//! Model of the preparation chain: a squeezed-vacuum source, a weak tap
//! beam splitter whose click detector heralds photon subtraction, an
//! in-line squeezer with its own loss and phase jitter, and the overall
//! detection-efficiency channel.
//!
//! The heralded state a S(r1)|0⟩ is a good approximation to an odd cat;
//! the in-line squeezer then moves its amplitude up (theta2 = 0,
//! amplification, "p-SC") or down (theta2 = π, deamplification, "x-SC").
//!
//! Loss bookkeeping: the in-line squeezer's transmission eta_opa2 is
//! split as √eta before and √eta after the unitary, which brackets both
//! fully-asymmetric placements. Phase jitter of standard deviation σ is a
//! Gaussian mixture of number-basis rotations, integrated by 7-node
//! Gauss-Hermite quadrature (exact for polynomial integrands of degree
//! ≤ 13, ample for σ ≤ 0.1 rad). A dark-count rate is modeled as mixing
//! the heralded state with the no-click state with weight lambda_dark.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::fock::{
    annihilate, loss_channel, squeeze_matrix, squeezed_vacuum, FockDensity, FockVector,
    DEFAULT_DIM, R_MINUS_3_DB,
};
use crate::linalg::ln_binomial;
use crate::{Error, Result};

/// Dark-count mixing weight matching a 60 Hz dark rate against a 2 kHz
/// click rate.
pub const LAMBDA_DARK_PRESET: f64 = 0.03;

/// Which heralding model conditions the kept beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeraldModel {
    /// Exact single-photon subtraction (annihilation operator).
    IdealSubtraction,
    /// Two-mode beam splitter plus a click (non-photon-number-resolving)
    /// detector on the tapped mode.
    TapPovm,
}

/// Heralding outcome bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldReport {
    pub click_probability: f64,
    pub model: HeraldModel,
}

/// Full parameter set of one preparation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Source squeezing parameter (default −3 dB).
    #[serde(default = "default_r1")]
    pub r1: f64,
    /// Tap transmittance toward the click detector.
    #[serde(default = "default_tap")]
    pub tap: f64,
    /// In-line squeezer strength; 0 bypasses that stage entirely.
    #[serde(default)]
    pub r2: f64,
    /// In-line squeezer phase: 0 amplifies (p-SC), π deamplifies (x-SC).
    #[serde(default)]
    pub theta2: f64,
    /// In-line squeezer transmission.
    #[serde(default = "default_eta_opa2")]
    pub eta_opa2: f64,
    /// Overall detection efficiency.
    #[serde(default = "default_eta_det")]
    pub eta_det: f64,
    /// Phase jitter standard deviation in radians.
    #[serde(default)]
    pub phase_jitter_sd: f64,
    /// Probability that a click was a dark count.
    #[serde(default)]
    pub lambda_dark: f64,
    /// Fock-space truncation.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_herald_model")]
    pub herald_model: HeraldModel,
}

fn default_r1() -> f64 {
    R_MINUS_3_DB
}
fn default_tap() -> f64 {
    0.05
}
fn default_eta_opa2() -> f64 {
    0.91
}
fn default_eta_det() -> f64 {
    0.80
}
fn default_dim() -> usize {
    DEFAULT_DIM
}
fn default_herald_model() -> HeraldModel {
    HeraldModel::TapPovm
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            r1: default_r1(),
            tap: default_tap(),
            r2: 0.0,
            theta2: 0.0,
            eta_opa2: default_eta_opa2(),
            eta_det: default_eta_det(),
            phase_jitter_sd: 0.0,
            lambda_dark: 0.0,
            dim: default_dim(),
            herald_model: default_herald_model(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !in_unit(self.eta_opa2) || !in_unit(self.eta_det) {
            return Err(Error::Parameter(format!(
                "efficiencies must lie in [0, 1]: eta_opa2={}, eta_det={}",
                self.eta_opa2, self.eta_det
            )));
        }
        if !self.tap.is_finite() || self.tap <= 0.0 || self.tap >= 0.5 {
            return Err(Error::Parameter(format!(
                "tap transmittance must lie in (0, 0.5), got {}",
                self.tap
            )));
        }
        if !self.r1.is_finite() || self.r1 < 0.0 || !self.r2.is_finite() || self.r2 < 0.0 {
            return Err(Error::Parameter(format!(
                "squeezing parameters must be nonnegative: r1={}, r2={}",
                self.r1, self.r2
            )));
        }
        if (self.theta2 - 0.0).abs() > 1e-9 && (self.theta2 - PI).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "theta2 must be 0 or pi, got {}",
                self.theta2
            )));
        }
        if !self.phase_jitter_sd.is_finite() || self.phase_jitter_sd < 0.0 {
            return Err(Error::Parameter(format!(
                "phase jitter must be nonnegative, got {}",
                self.phase_jitter_sd
            )));
        }
        if !self.lambda_dark.is_finite() || !(0.0..1.0).contains(&self.lambda_dark) {
            return Err(Error::Parameter(format!(
                "dark-count weight must lie in [0, 1), got {}",
                self.lambda_dark
            )));
        }
        if self.dim < 2 {
            return Err(Error::Dimension(format!("dim must be at least 2, got {}", self.dim)));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Data(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// Heralding

/// Idealized heralding: exact photon subtraction. The click probability
/// is the first-order proxy ‖a|ψ⟩‖²·tap.
pub fn herald_ideal(state: &FockVector, tap: f64) -> Result<(FockVector, HeraldReport)> {
    let (subtracted, weight) = annihilate(state)?;
    Ok((
        subtracted,
        HeraldReport {
            click_probability: (weight * weight * tap).min(1.0),
            model: HeraldModel::IdealSubtraction,
        },
    ))
}

/// Joint amplitudes after a beam splitter of tap ratio `tap` against a
/// vacuum ancilla: entry (m, k) is the amplitude for m kept and k tapped
/// photons, ψ_{m+k} √(C(m+k,k) (1−tap)^m tap^k).
fn tap_joint_amplitudes(state: &FockVector, tap: f64) -> Array2<Complex64> {
    let dim = state.dim();
    let mut joint = Array2::zeros((dim, dim));
    for m in 0..dim {
        for k in 0..dim - m {
            let ln = 0.5
                * (ln_binomial(m + k, k)
                    + m as f64 * (1.0 - tap).ln()
                    + k as f64 * tap.ln());
            joint[(m, k)] = state.amps()[m + k] * ln.exp();
        }
    }
    joint
}

/// Beam-splitter heralding: tap off `tap` of the beam, fire a click
/// detector (sees anything but vacuum) on the tapped mode, and keep the
/// conditional state of the transmitted mode.
pub fn herald_tap_povm(state: &FockVector, tap: f64) -> Result<(FockDensity, HeraldReport)> {
    if !tap.is_finite() || tap <= 0.0 || tap >= 0.5 {
        return Err(Error::Parameter(format!(
            "tap transmittance must lie in (0, 0.5), got {tap}"
        )));
    }
    let dim = state.dim();
    let joint = tap_joint_amplitudes(state, tap);
    // Click POVM = I − |0⟩⟨0| on the tapped mode: sum the conditional
    // outer products over k ≥ 1.
    let mut rho = Array2::<Complex64>::zeros((dim, dim));
    let mut click_probability = 0.0;
    for k in 1..dim {
        let col = joint.column(k);
        let w: f64 = col.iter().map(|a| a.norm_sqr()).sum();
        if w == 0.0 {
            continue;
        }
        click_probability += w;
        for i in 0..dim {
            if col[i] == Complex64::ZERO {
                continue;
            }
            for j in 0..dim {
                rho[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    if click_probability < 1e-15 {
        return Err(Error::Validation(
            "click probability is zero; heralding is impossible for this input".into(),
        ));
    }
    rho.mapv_inplace(|v| v / click_probability);
    Ok((
        FockDensity::new_unchecked(rho),
        HeraldReport {
            click_probability,
            model: HeraldModel::TapPovm,
        },
    ))
}

/// No-click conditional state of the transmitted mode (what a dark count
/// actually heralds).
fn tap_no_click_state(state: &FockVector, tap: f64) -> Result<FockVector> {
    let joint = tap_joint_amplitudes(state, tap);
    let col = joint.column(0).to_owned();
    FockVector::normalized(col)
}

// ---------------------------------------------------------------------------
// In-line squeezer

/// Gauss-Hermite nodes and weights, 7 points, for ∫ e^{−t²} f(t) dt.
const GH_NODES: [f64; 7] = [
    -2.651_961_356_835_233_4,
    -1.673_551_628_767_471_4,
    -0.816_287_882_858_964_6,
    0.0,
    0.816_287_882_858_964_6,
    1.673_551_628_767_471_4,
    2.651_961_356_835_233_4,
];
const GH_WEIGHTS: [f64; 7] = [
    9.717_812_450_995_199e-4,
    5.451_558_281_912_705e-2,
    4.256_072_526_101_278e-1,
    8.102_646_175_568_072e-1,
    4.256_072_526_101_278e-1,
    5.451_558_281_912_705e-2,
    9.717_812_450_995_199e-4,
];

/// Gaussian phase jitter of standard deviation `sd`: the mixture
/// ρ ← ∫ N(φ; 0, sd²) R(φ) ρ R(φ)† dφ with R(φ) = e^{iφ n̂}, evaluated by
/// Gauss-Hermite quadrature at φ_i = √2 sd t_i.
pub fn phase_jitter(rho: &FockDensity, sd: f64) -> Result<FockDensity> {
    if !sd.is_finite() || sd < 0.0 {
        return Err(Error::Parameter(format!(
            "phase jitter must be nonnegative, got {sd}"
        )));
    }
    if sd == 0.0 {
        return Ok(rho.clone());
    }
    let dim = rho.dim();
    let sqrt_pi = PI.sqrt();
    let mut out = Array2::<Complex64>::zeros((dim, dim));
    for (t, w) in GH_NODES.iter().zip(GH_WEIGHTS.iter()) {
        let phi = std::f64::consts::SQRT_2 * sd * t;
        let weight = w / sqrt_pi;
        for m in 0..dim {
            for n in 0..dim {
                let ph = Complex64::from_polar(weight, phi * (m as f64 - n as f64));
                out[(m, n)] += rho.matrix()[(m, n)] * ph;
            }
        }
    }
    Ok(FockDensity::new_unchecked(out))
}

/// The in-line squeezer stage: √eta loss, the squeezing unitary, √eta
/// loss again, then phase jitter.
pub fn inline_squeezer(
    rho: &FockDensity,
    r2: f64,
    theta2: f64,
    eta_opa2: f64,
    phase_jitter_sd: f64,
) -> Result<FockDensity> {
    if !eta_opa2.is_finite() || !(0.0..=1.0).contains(&eta_opa2) {
        return Err(Error::Parameter(format!(
            "eta_opa2 must lie in [0, 1], got {eta_opa2}"
        )));
    }
    let mut state = rho.clone();
    if eta_opa2 < 1.0 {
        state = loss_channel(&state, eta_opa2.sqrt())?;
    }
    if r2 > 0.0 {
        let s = squeeze_matrix(r2, theta2, rho.dim())?;
        state = state.conjugated_by(&s)?;
    }
    if eta_opa2 < 1.0 {
        state = loss_channel(&state, eta_opa2.sqrt())?;
    }
    phase_jitter(&state, phase_jitter_sd)
}

// ---------------------------------------------------------------------------
// Full pipeline

/// Result of one preparation run: the state before the detection loss
/// (what efficiency-corrected reconstruction should recover) and the
/// state arriving at the homodyne detector.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub pre_detection: FockDensity,
    pub at_detector: FockDensity,
    pub herald: HeraldReport,
}

/// Runs the chain: source squeezed vacuum, heralded subtraction, dark
/// counts, in-line squeezer (bypassed entirely when r2 = 0), then the
/// detection-efficiency loss for the at-detector state.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let source = squeezed_vacuum(cfg.r1, 0.0, cfg.dim)?;

    let (mut heralded, herald, unheralded) = match cfg.herald_model {
        HeraldModel::IdealSubtraction => {
            let (state, report) = herald_ideal(&source, cfg.tap)?;
            (state.to_density(), report, source.clone())
        }
        HeraldModel::TapPovm => {
            let (rho, report) = herald_tap_povm(&source, cfg.tap)?;
            (rho, report, tap_no_click_state(&source, cfg.tap)?)
        }
    };

    if cfg.lambda_dark > 0.0 {
        let lam = Complex64::new(cfg.lambda_dark, 0.0);
        let keep = Complex64::new(1.0 - cfg.lambda_dark, 0.0);
        let dark = unheralded.to_density();
        let mixed = heralded.matrix().mapv(|v| v * keep) + dark.matrix().mapv(|v| v * lam);
        heralded = FockDensity::new_unchecked(mixed);
    }

    let pre_detection = if cfg.r2 > 0.0 {
        inline_squeezer(&heralded, cfg.r2, cfg.theta2, cfg.eta_opa2, cfg.phase_jitter_sd)?
    } else {
        phase_jitter(&heralded, cfg.phase_jitter_sd)?
    };
    let at_detector = loss_channel(&pre_detection, cfg.eta_det)?;

    Ok(PipelineOutput {
        pre_detection,
        at_detector,
        herald,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{odd_cat, sc_state_closed_form, CatParams, SCParams};
    use crate::wigner::wigner_origin;
    use approx::assert_abs_diff_eq;

    fn assert_valid_density(rho: &FockDensity) {
        FockDensity::new(rho.matrix().clone()).expect("density invariants");
    }

    #[test]
    fn ideal_herald_flips_parity_and_reports_the_proxy_probability() {
        let sv = squeezed_vacuum(R_MINUS_3_DB, 0.0, 30).unwrap();
        let (state, report) = herald_ideal(&sv, 0.05).unwrap();
        assert_eq!(state.parity(), crate::fock::Parity::Odd);
        let want = R_MINUS_3_DB.sinh().powi(2) * 0.05;
        assert_abs_diff_eq!(report.click_probability, want, epsilon = 1e-10);

        let one = FockVector::basis_state(10, 1).unwrap();
        let (out, _) = herald_ideal(&one, 0.05).unwrap();
        assert!(out.fidelity_with(&FockVector::vacuum(10).unwrap()) > 1.0 - 1e-12);

        assert!(herald_ideal(&FockVector::vacuum(10).unwrap(), 0.05).is_err());
    }

    #[test]
    fn tap_herald_click_probability_is_small_at_defaults() {
        let sv = squeezed_vacuum(R_MINUS_3_DB, 0.0, 30).unwrap();
        let (rho, report) = herald_tap_povm(&sv, 0.05).unwrap();
        assert!(report.click_probability > 0.0 && report.click_probability < 0.02);
        assert_valid_density(&rho);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tap_herald_approaches_ideal_subtraction_for_small_taps() {
        let sv = squeezed_vacuum(R_MINUS_3_DB, 0.0, 30).unwrap();
        let (ideal, _) = herald_ideal(&sv, 0.001).unwrap();
        let (rho, _) = herald_tap_povm(&sv, 0.001).unwrap();
        assert!(rho.fidelity_with_pure(&ideal) >= 1.0 - 1e-3);
    }

    #[test]
    fn tap_herald_errors_on_vacuum() {
        let vac = FockVector::vacuum(15).unwrap();
        assert!(matches!(
            herald_tap_povm(&vac, 0.05),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn subtracted_state_is_close_to_an_odd_cat() {
        let sv = squeezed_vacuum(R_MINUS_3_DB, 0.0, 40).unwrap();
        let (sub, _) = herald_ideal(&sv, 0.05).unwrap();
        let mut best = (0.0f64, 0.0f64);
        let mut alpha = 0.5;
        while alpha <= 1.6 {
            let f = odd_cat(&CatParams::new(alpha).unwrap(), 40)
                .unwrap()
                .fidelity_with(&sub);
            if f > best.1 {
                best = (alpha, f);
            }
            alpha += 0.005;
        }
        assert!(best.1 > 0.99, "best cat fidelity {} at alpha {}", best.1, best.0);
    }

    #[test]
    fn inline_squeezer_with_everything_off_is_the_identity() {
        let rho = odd_cat(&CatParams::new(1.06).unwrap(), 25).unwrap().to_density();
        let out = inline_squeezer(&rho, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert!(out.trace_distance_to(&rho) < 1e-14);
    }

    #[test]
    fn lossless_squeezer_preserves_odd_parity() {
        let rho = odd_cat(&CatParams::new(1.06).unwrap(), 40).unwrap().to_density();
        let out = inline_squeezer(&rho, 0.30, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(out.parity(), crate::fock::Parity::Odd);
        assert_valid_density(&out);
    }

    #[test]
    fn lossless_squeezer_matches_the_closed_form_on_a_true_cat() {
        for &theta in &[0.0, PI] {
            let rho = odd_cat(&CatParams::new(1.0).unwrap(), 40).unwrap().to_density();
            let out = inline_squeezer(&rho, 0.3, theta, 1.0, 0.0).unwrap();
            let target = sc_state_closed_form(&SCParams::new(1.0, 0.3, theta).unwrap(), 40).unwrap();
            assert!(out.fidelity_with_pure(&target) > 1.0 - 1e-6);
        }
    }

    #[test]
    fn phase_jitter_washes_out_negativity_but_keeps_a_state() {
        let rho = odd_cat(&CatParams::new(1.06).unwrap(), 30).unwrap().to_density();
        let jittered = phase_jitter(&rho, 0.1).unwrap();
        assert_valid_density(&jittered);
        // Jitter only dephases in the number basis: populations unchanged.
        for (a, b) in rho.populations().iter().zip(jittered.populations()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        // Off-diagonals shrink, so the state is more mixed; its overlap
        // with the pure cat drops.
        let cat = odd_cat(&CatParams::new(1.06).unwrap(), 30).unwrap();
        assert!(jittered.fidelity_with_pure(&cat) < 1.0 - 1e-4);
        // σ = 0 is a no-op.
        assert!(phase_jitter(&rho, 0.0).unwrap().trace_distance_to(&rho) < 1e-15);
    }

    #[test]
    fn pipeline_with_no_imperfections_lands_on_the_closed_form() {
        // eta = 1, no jitter, ideal herald: output must match the
        // squeezed closed-form cat at the heralded state's best-fit α.
        let cfg = ExperimentConfig {
            r2: 0.30,
            theta2: 0.0,
            eta_opa2: 1.0,
            eta_det: 1.0,
            herald_model: HeraldModel::IdealSubtraction,
            dim: 40,
            ..Default::default()
        };
        let out = run_pipeline(&cfg).unwrap();
        // Best-fit cat amplitude of the heralded state.
        let sv = squeezed_vacuum(cfg.r1, 0.0, 40).unwrap();
        let (sub, _) = herald_ideal(&sv, cfg.tap).unwrap();
        let mut best = (0.0f64, 0.0f64);
        let mut alpha = 0.5;
        while alpha <= 1.6 {
            let f = odd_cat(&CatParams::new(alpha).unwrap(), 40)
                .unwrap()
                .fidelity_with(&sub);
            if f > best.1 {
                best = (alpha, f);
            }
            alpha += 0.005;
        }
        let target = sc_state_closed_form(&SCParams::new(best.0, 0.30, 0.0).unwrap(), 40).unwrap();
        assert!(
            out.pre_detection.fidelity_with_pure(&target) >= 0.98,
            "fidelity {}",
            out.pre_detection.fidelity_with_pure(&target)
        );
        // eta_det = 1 makes the two outputs identical.
        assert!(out.at_detector.trace_distance_to(&out.pre_detection) < 1e-14);
    }

    #[test]
    fn r2_zero_bypasses_the_squeezer_stage() {
        let cfg = ExperimentConfig {
            r2: 0.0,
            eta_opa2: 0.91,
            ..Default::default()
        };
        let out = run_pipeline(&cfg).unwrap();
        // Recompute without the squeezer by hand: herald then eta_det.
        let sv = squeezed_vacuum(cfg.r1, 0.0, cfg.dim).unwrap();
        let (heralded, _) = herald_tap_povm(&sv, cfg.tap).unwrap();
        let want = loss_channel(&heralded, cfg.eta_det).unwrap();
        assert!(out.at_detector.trace_distance_to(&want) < 1e-12);
    }

    #[test]
    fn negativity_fades_monotonically_with_detection_loss() {
        let mut last = f64::NEG_INFINITY;
        for &eta in &[1.0, 0.9, 0.8, 0.7] {
            let cfg = ExperimentConfig {
                r2: 0.30,
                theta2: 0.0,
                eta_det: eta,
                dim: 35,
                ..Default::default()
            };
            let out = run_pipeline(&cfg).unwrap();
            let w = wigner_origin(&out.at_detector);
            assert!(
                w >= last,
                "W(0,0) must move toward 0 as eta_det drops: {w} after {last}"
            );
            last = w;
        }
        assert!(last < 0.0, "still negative at eta_det = 0.7: {last}");
    }

    #[test]
    fn squeezer_phase_moves_odd_weights_in_opposite_directions() {
        let base = ExperimentConfig {
            dim: 35,
            ..Default::default()
        };
        let plain = run_pipeline(&base).unwrap();
        let psc = run_pipeline(&ExperimentConfig {
            r2: 0.30,
            theta2: 0.0,
            ..base.clone()
        })
        .unwrap();
        let xsc = run_pipeline(&ExperimentConfig {
            r2: 0.30,
            theta2: PI,
            ..base.clone()
        })
        .unwrap();
        // Amplification pushes weight into the higher odd levels,
        // deamplification pulls it out; both survive the OPA2 loss.
        let p0 = plain.pre_detection.populations();
        let pp = psc.pre_detection.populations();
        let px = xsc.pre_detection.populations();
        assert!(pp[3] > p0[3] && pp[5] > p0[5]);
        assert!(px[3] < p0[3] && px[5] < p0[5]);
        assert!(
            psc.pre_detection.mean_photon_number() > plain.pre_detection.mean_photon_number()
        );
    }

    #[test]
    fn dark_counts_mix_in_even_weight() {
        let clean = run_pipeline(&ExperimentConfig {
            dim: 30,
            ..Default::default()
        })
        .unwrap();
        let dark = run_pipeline(&ExperimentConfig {
            lambda_dark: LAMBDA_DARK_PRESET,
            dim: 30,
            ..Default::default()
        })
        .unwrap();
        let even_weight = |rho: &FockDensity| -> f64 {
            rho.populations().iter().step_by(2).sum()
        };
        assert!(even_weight(&dark.pre_detection) > even_weight(&clean.pre_detection));
        assert_valid_density(&dark.pre_detection);
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_abs_diff_eq!(cfg.r1, R_MINUS_3_DB, epsilon = 1e-15);

        let cfg = ExperimentConfig::from_json_str(
            r#"{"r2": 0.29, "theta2": 3.141592653589793, "herald_model": "ideal_subtraction"}"#,
        )
        .unwrap();
        assert_eq!(cfg.herald_model, HeraldModel::IdealSubtraction);
        assert_abs_diff_eq!(cfg.theta2, PI, epsilon = 1e-15);

        assert!(ExperimentConfig::from_json_str(r#"{"tap": 0.7}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"theta2": 1.0}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"eta_det": 1.4}"#).is_err());
    }

    #[test]
    fn every_pipeline_stage_emits_a_valid_density() {
        let cfg = ExperimentConfig {
            r2: 0.29,
            theta2: PI,
            phase_jitter_sd: 0.05,
            lambda_dark: 0.01,
            dim: 32,
            ..Default::default()
        };
        let out = run_pipeline(&cfg).unwrap();
        assert_valid_density(&out.pre_detection);
        assert_valid_density(&out.at_detector);
        assert!(out.herald.click_probability > 0.0);
    }
}
