//! The three-stage Goodwin delay system
//!
//! ```text
//! x₁'(t) = g(x₃(t - τ)) - λ x₁(t)
//! x₂'(t) = x₁(t) - λ x₂(t)
//! x₃'(t) = x₂(t) - λ x₃(t)
//! ```
//!
//! with `g(σ) = 1 / (1 + |σ|³)`. For `ρ > 0` the system is written in Lur'e
//! form with linear part `A_ρ` (the cascade plus `-ρ x₃(t - τ)` in the first
//! row), input `B = e₁`, measurement `Cφ = φ₃(-τ)` and nonlinearity
//! `F(σ) = g_β(σ) + ρσ`. Its transfer function is
//! `W_ρ(p) = -1 / ((λ + p)³ e^{pτ} + ρ)`.

mod classify;
mod region;

use std::f64::consts::FRAC_PI_3;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::charroots::{DelayLinearPart, QuasiPolynomial};
use crate::freqcheck::LurjeDelaySystem;
use crate::numeric::{bisect, golden_section_max, linspace};

pub use classify::{classify_point, default_rho_candidates, ClassifyConfig, Label, PointClassification, Reason, Witness};
pub use region::{sweep_region, AxisRange, RegionGrid, RegionSummary};

/// Bound in `κ₀ τ³ e^{λτ} < 84.2` and in the per-candidate check `ρ τ³ e^{λτ} < 84.2`.
pub const DELAY_GAIN_BOUND: f64 = 84.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GoodwinError {
    #[error("degenerate measurement range [{lo}, {hi}] for beta = {beta}, lambda = {lambda}")]
    DegenerateRange { beta: f64, lambda: f64, lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `g(σ) = (1 + |σ|³)⁻¹`.
pub fn g(sigma: f64) -> f64 {
    1.0 / (1.0 + sigma.abs().powi(3))
}

/// `g'(σ) = -3σ|σ| / (1 + |σ|³)²`.
pub fn g_prime(sigma: f64) -> f64 {
    let d = 1.0 + sigma.abs().powi(3);
    -3.0 * sigma * sigma.abs() / (d * d)
}

/// Maximiser `σ* = 2^{-1/3}` of `-g'` on `(0, ∞)`.
pub fn kappa0_argmax() -> f64 {
    0.5f64.cbrt()
}

/// `κ₀ = sup_{σ>0} -g'(σ) = (4/3) 2^{-2/3}`, cross-checked by golden-section search.
pub fn compute_kappa0() -> f64 {
    let closed = 4.0 / 3.0 * 2f64.powf(-2.0 / 3.0);
    let (_, searched) = golden_section_max(|s| -g_prime(s), 0.0, 4.0, 1e-12);
    debug_assert!((closed - searched).abs() < 1e-10);
    closed
}

/// Unique `η₀ > 0` with `g(η₀) = λ³ η₀`.
pub fn solve_eta0(lambda: f64) -> f64 {
    let l3 = lambda.powi(3);
    bisect(|eta| g(eta) - l3 * eta, 0.0, 1.0 / l3)
}

/// Unique `θ₁ ∈ (0, π/3)` with `τλ tan θ₁ = π - 3θ₁`.
pub fn solve_theta1(tau: f64, lambda: f64) -> f64 {
    let tl = tau * lambda;
    bisect(|t| tl * t.tan() - std::f64::consts::PI + 3.0 * t, 0.0, FRAC_PI_3)
}

/// `σ_β = (β/λ)³ g(0)`.
pub fn sigma_beta(beta: f64, lambda: f64) -> f64 {
    (beta / lambda).powi(3) * g(0.0)
}

/// Open box `(βλ)^{-j} g(σ_β) < φ_j < (β/λ)^j g(0)` defining `W_β`, for `j = 1, 2, 3`.
pub fn region_bounds(beta: f64, lambda: f64) -> [(f64, f64); 3] {
    let sb = sigma_beta(beta, lambda);
    std::array::from_fn(|k| {
        let j = (k + 1) as i32;
        ((beta * lambda).powi(-j) * g(sb), (beta / lambda).powi(j) * g(0.0))
    })
}

/// Range of the measurement `Cφ = φ₃(-τ)` over the closure of `W_β`.
pub fn measurement_range(beta: f64, lambda: f64) -> (f64, f64) {
    region_bounds(beta, lambda)[2]
}

/// `sup g'` over `[lo, hi]`: end points, a 1024-point grid and golden-section
/// refinement around the best grid point.
pub fn sup_slope_on(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return g_prime(lo);
    }
    let grid = linspace(lo, hi, 1024);
    let (best_i, mut best) = grid
        .iter()
        .map(|&s| g_prime(s))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let a = grid[best_i.saturating_sub(1)];
    let b = grid[(best_i + 1).min(grid.len() - 1)];
    let (_, refined) = golden_section_max(g_prime, a, b, 1e-14 * (1.0 + hi));
    best = best.max(refined).max(g_prime(lo)).max(g_prime(hi));
    best
}

/// `δ_β = sup g'(Cφ)` over the closure of `W_β`; strictly negative.
pub fn compute_delta_beta(beta: f64, lambda: f64) -> Result<f64, GoodwinError> {
    let (lo, hi) = measurement_range(beta, lambda);
    if !(lo < hi) {
        return Err(GoodwinError::DegenerateRange { beta, lambda, lo, hi });
    }
    Ok(sup_slope_on(lo, hi))
}

/// `φ₀ = (λ²η₀, λη₀, η₀)`.
pub fn stationary_point(lambda: f64) -> [f64; 3] {
    let eta = solve_eta0(lambda);
    [lambda * lambda * eta, lambda * eta, eta]
}

/// Parameters of one Lur'e form of the truncated Goodwin system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodwinParams {
    pub tau: f64,
    pub lambda: f64,
    pub beta: f64,
    pub rho: f64,
}

impl GoodwinParams {
    pub fn validate(&self) -> Result<(), GoodwinError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(GoodwinError::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(GoodwinError::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(GoodwinError::InvalidParameter(format!("beta must exceed 1, got {}", self.beta)));
        }
        let delta = compute_delta_beta(self.beta, self.lambda)?;
        if !(self.rho > -delta && self.rho <= compute_kappa0()) {
            return Err(GoodwinError::InvalidParameter(format!(
                "rho = {} outside (-delta_beta, kappa0] = ({}, {}]",
                self.rho,
                -delta,
                compute_kappa0()
            )));
        }
        Ok(())
    }
}

/// Model constants at one `(τ, λ, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodwinConstants {
    pub kappa0: f64,
    pub eta0: f64,
    pub sigma_beta: f64,
    pub delta_beta: f64,
    pub theta1: f64,
    /// `-(λ sec θ₁)³`.
    pub terminal_threshold: f64,
    /// `g'(η₀)`.
    pub slope_at_eta0: f64,
}

impl GoodwinConstants {
    pub fn compute(tau: f64, lambda: f64, beta: f64) -> Result<Self, GoodwinError> {
        let eta0 = solve_eta0(lambda);
        let theta1 = solve_theta1(tau, lambda);
        Ok(Self {
            kappa0: compute_kappa0(),
            eta0,
            sigma_beta: sigma_beta(beta, lambda),
            delta_beta: compute_delta_beta(beta, lambda)?,
            theta1,
            terminal_threshold: -(lambda / theta1.cos()).powi(3),
            slope_at_eta0: g_prime(eta0),
        })
    }
}

/// `max(|ρ - κ₀|, |ρ + δ_β|)`, the Lipschitz constant of `F = g_β + ρσ`.
pub fn lurje_lipschitz(rho: f64, kappa0: f64, delta_beta: f64) -> f64 {
    (rho - kappa0).abs().max((rho + delta_beta).abs())
}

fn cascade(lambda: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[-lambda, 0.0, 0.0, 1.0, -lambda, 0.0, 0.0, 1.0, -lambda])
}

fn delayed_feedback(tau: f64, lambda: f64, gain: f64) -> DelayLinearPart {
    let mut a1 = DMatrix::zeros(3, 3);
    a1[(0, 2)] = gain;
    DelayLinearPart::new(3, vec![(0.0, cascade(lambda)), (tau, a1)]).expect("goodwin linear part is well formed")
}

/// Lur'e form with linear part `A_ρ`, `B = e₁`, `Cφ = φ₃(-τ)` and Euclidean weights.
pub fn lurje_system(tau: f64, lambda: f64, rho: f64, lipschitz: f64) -> LurjeDelaySystem {
    let mut b = DMatrix::zeros(3, 1);
    b[(0, 0)] = 1.0;
    let mut c = DMatrix::zeros(1, 3);
    c[(0, 2)] = 1.0;
    let one = DMatrix::from_element(1, 1, 1.0);
    LurjeDelaySystem::new(delayed_feedback(tau, lambda, -rho), b, vec![(tau, c)], lipschitz, &one, &one)
        .expect("goodwin Lur'e system is well formed")
}

/// `W_ρ(p) = -1 / ((λ + p)³ e^{pτ} + ρ)`.
pub fn closed_form_transfer(tau: f64, lambda: f64, rho: f64, p: Complex64) -> Complex64 {
    -((lambda + p).powi(3) * (p * tau).exp() + rho).inv()
}

/// Characteristic function `(p + λ)³ - s e^{-pτ}` (up to sign) of the
/// linearisation at `φ₀`, where `s = g'(η₀)`.
pub fn linearization(tau: f64, lambda: f64, slope: f64) -> QuasiPolynomial {
    QuasiPolynomial::new(delayed_feedback(tau, lambda, slope))
}
