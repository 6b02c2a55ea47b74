use serde::Serialize;

use super::{
    compute_delta_beta, compute_kappa0, g_prime, linearization, lurje_lipschitz, lurje_system, solve_eta0,
    solve_theta1, DELAY_GAIN_BOUND,
};
use crate::charroots::{count_roots_right_of_with, CharRootsError, ContourConfig, RootCount};
use crate::freqcheck::{check_circle_condition_with, FrequencySweepReport, SweepConfig, SystemLine};
use crate::numeric::logspace;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    /// Explicit Lur'e shifts; `None` uses [`default_rho_candidates`] per `β`.
    pub rho_set: Option<Vec<f64>>,
    pub beta_set: Vec<f64>,
    pub sweep: SweepConfig,
    pub contour: ContourConfig,
    /// Minimum `|g'(η₀) + (λ sec θ₁)³|` for the stationary point to count as hyperbolic.
    pub hyperbolicity_margin: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            rho_set: None,
            beta_set: vec![1.5, 3.0],
            sweep: SweepConfig::default(),
            contour: ContourConfig::default(),
            hyperbolicity_margin: 1e-8,
        }
    }
}

/// The shift `κ₀/2 + 10⁻³` followed by 8 log-spaced shifts in `(-δ_β, κ₀]`.
///
/// The log grid starts at `max(1.01 |δ_β|, 10⁻⁹)`: near the sector edge the
/// circle expression at `ω = 0` equals `κ₀|δ_β|/ρ²`, so small shifts are the
/// ones that certify when `δ_β` is tiny.
pub fn default_rho_candidates(kappa0: f64, delta_beta: f64) -> Vec<f64> {
    let lo = (1.01 * delta_beta.abs()).max(1e-9);
    let mut out = vec![0.5 * kappa0 + 1e-3];
    if lo < kappa0 {
        out.extend(logspace(lo, kappa0, 8));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    StablePoint,
    StablePeriodicOrbit,
    Uncertified,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::StablePoint => "StablePoint",
            Label::StablePeriodicOrbit => "StablePeriodicOrbit",
            Label::Uncertified => "Uncertified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail")]
pub enum Reason {
    Certified,
    /// No `(β, ρ)` candidate satisfied the delay-gain bound, the circle condition and the dichotomy with two unstable roots.
    NoCandidate,
    NonHyperbolic,
    UnexpectedRootCount(usize),
    Inconclusive(String),
}

/// The `(β, ρ)` pair that certified the delay-gain bound, the circle condition and the dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub rho: f64,
    pub beta: f64,
    pub delta_beta: f64,
    /// `ρ τ³ e^{λτ}`, compared against 84.2.
    pub delay_gain_value: f64,
    pub circle: FrequencySweepReport,
    pub dichotomy: RootCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointClassification {
    pub tau: f64,
    pub lambda: f64,
    pub label: Label,
    pub reason: Reason,
    pub witness: Option<Witness>,
    pub root_count_at_phi0: Option<usize>,
    pub linearization: Option<RootCount>,
    pub kappa0: f64,
    pub eta0: f64,
    pub theta1: f64,
    pub slope_at_eta0: f64,
    pub terminal_threshold: f64,
    /// `κ₀ τ³ e^{λτ} < 84.2`, recorded for comparison with the scanned region.
    pub closed_form_inequality: bool,
    pub candidates_tried: usize,
    /// Largest circle-condition infimum among the tried candidates.
    pub best_circle_margin: Option<f64>,
}

impl PointClassification {
    pub fn is_certified(&self) -> bool {
        self.label != Label::Uncertified
    }
}

enum CandidateResult {
    Certified(Witness),
    Rejected { circle_margin: Option<f64> },
}

fn try_candidate(tau: f64, lambda: f64, beta: f64, delta: f64, rho: f64, cfg: &ClassifyConfig) -> CandidateResult {
    let kappa0 = compute_kappa0();
    let delay_gain_value = rho * tau.powi(3) * (lambda * tau).exp();
    if !(delay_gain_value < DELAY_GAIN_BOUND) {
        return CandidateResult::Rejected { circle_margin: None };
    }
    let sys = lurje_system(tau, lambda, rho, lurje_lipschitz(rho, kappa0, delta));
    let line = SystemLine::new(&sys, lambda).expect("goodwin system is scalar");
    let circle = match check_circle_condition_with(&line, rho - kappa0, rho + delta, &cfg.sweep) {
        Ok(r) => r,
        Err(e) => {
            log::debug!("tau={tau} lambda={lambda} beta={beta} rho={rho}: circle sweep failed: {e}");
            return CandidateResult::Rejected { circle_margin: None };
        }
    };
    if !circle.passed {
        return CandidateResult::Rejected { circle_margin: Some(circle.margin) };
    }
    match count_roots_right_of_with(sys.quasi_polynomial(), -lambda, &cfg.contour) {
        Ok(dichotomy) if dichotomy.count == 2 => {
            CandidateResult::Certified(Witness { rho, beta, delta_beta: delta, delay_gain_value, circle, dichotomy })
        }
        Ok(rc) => {
            log::debug!("tau={tau} lambda={lambda} rho={rho}: {} roots right of -lambda", rc.count);
            CandidateResult::Rejected { circle_margin: Some(circle.margin) }
        }
        Err(e) => {
            log::debug!("tau={tau} lambda={lambda} rho={rho}: dichotomy failed: {e}");
            CandidateResult::Rejected { circle_margin: Some(circle.margin) }
        }
    }
}

/// Classifies `(τ, λ)` by scanning `(β, ρ)` candidates for the frequency
/// conditions and counting unstable roots of the linearisation at `φ₀`.
pub fn classify_point(tau: f64, lambda: f64, cfg: &ClassifyConfig) -> PointClassification {
    let kappa0 = compute_kappa0();
    let eta0 = solve_eta0(lambda);
    let theta1 = solve_theta1(tau, lambda);
    let slope = g_prime(eta0);
    let terminal_threshold = -(lambda / theta1.cos()).powi(3);
    let mut out = PointClassification {
        tau,
        lambda,
        label: Label::Uncertified,
        reason: Reason::NoCandidate,
        witness: None,
        root_count_at_phi0: None,
        linearization: None,
        kappa0,
        eta0,
        theta1,
        slope_at_eta0: slope,
        terminal_threshold,
        closed_form_inequality: kappa0 * tau.powi(3) * (lambda * tau).exp() < DELAY_GAIN_BOUND,
        candidates_tried: 0,
        best_circle_margin: None,
    };

    'search: for &beta in &cfg.beta_set {
        let delta = match compute_delta_beta(beta, lambda) {
            Ok(d) => d,
            Err(e) => {
                log::debug!("skipping beta={beta}: {e}");
                continue;
            }
        };
        let candidates = match &cfg.rho_set {
            Some(set) => set.clone(),
            None => default_rho_candidates(kappa0, delta),
        };
        for rho in candidates.into_iter().filter(|&r| r > -delta && r <= kappa0) {
            out.candidates_tried += 1;
            match try_candidate(tau, lambda, beta, delta, rho, cfg) {
                CandidateResult::Certified(w) => {
                    out.best_circle_margin = Some(out.best_circle_margin.map_or(w.circle.margin, |m| m.max(w.circle.margin)));
                    out.witness = Some(w);
                    break 'search;
                }
                CandidateResult::Rejected { circle_margin: Some(m) } => {
                    out.best_circle_margin = Some(out.best_circle_margin.map_or(m, |b| b.max(m)));
                }
                CandidateResult::Rejected { circle_margin: None } => {}
            }
        }
    }
    if out.witness.is_none() {
        return out;
    }

    if (slope - terminal_threshold).abs() <= cfg.hyperbolicity_margin {
        out.reason = Reason::NonHyperbolic;
        return out;
    }
    match count_roots_right_of_with(&linearization(tau, lambda, slope), 0.0, &cfg.contour) {
        Ok(rc) => {
            out.root_count_at_phi0 = Some(rc.count);
            out.linearization = Some(rc);
            match rc.count {
                0 => {
                    out.label = Label::StablePoint;
                    out.reason = Reason::Certified;
                }
                2 => {
                    out.label = Label::StablePeriodicOrbit;
                    out.reason = Reason::Certified;
                }
                n => out.reason = Reason::UnexpectedRootCount(n),
            }
        }
        Err(CharRootsError::OnAxisRoot { .. }) => out.reason = Reason::NonHyperbolic,
        Err(e) => out.reason = Reason::Inconclusive(e.to_string()),
    }
    out
}
