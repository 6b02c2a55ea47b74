//! Frequency conditions for diagonal models `u' = -Au + F(u)` with
//! `A = diag(λ_k)` and `F` Lipschitz from `H_α` to `H_0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freqcheck::sweep::sweep_max;
use crate::freqcheck::SweepConfig;
use crate::numeric::golden_section_min;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParabolicError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("no spectral gap: eigenvalues {j} and {} coincide", j + 1)]
    NoGap { j: usize },
    #[error("shift {nu} is an eigenvalue")]
    OnEigenvalue { nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalParabolicModel {
    pub eigenvalues: Vec<f64>,
    pub alpha: f64,
    #[serde(rename = "Lambda")]
    pub lipschitz: f64,
    /// Intended unstable dimension, counted from 1.
    pub j: usize,
}

impl DiagonalParabolicModel {
    pub fn new(eigenvalues: Vec<f64>, alpha: f64, lipschitz: f64, j: usize) -> Result<Self, ParabolicError> {
        let m = Self { eigenvalues, alpha, lipschitz, j };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ParabolicError> {
        let ev = &self.eigenvalues;
        if ev.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(ParabolicError::InvalidModel("eigenvalues must be positive and finite".into()));
        }
        if ev.windows(2).any(|w| w[1] < w[0]) {
            return Err(ParabolicError::InvalidModel("eigenvalues must be non-decreasing".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ParabolicError::InvalidModel(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if !(self.lipschitz.is_finite() && self.lipschitz > 0.0) {
            return Err(ParabolicError::InvalidModel(format!("Lambda must be positive, got {}", self.lipschitz)));
        }
        if self.j == 0 || self.j >= ev.len() {
            return Err(ParabolicError::InvalidModel(format!(
                "j must satisfy 1 <= j < {}, got {}",
                ev.len(),
                self.j
            )));
        }
        Ok(())
    }

    /// `(λ_j, λ_{j+1})`.
    pub fn gap_pair(&self) -> (f64, f64) {
        (self.eigenvalues[self.j - 1], self.eigenvalues[self.j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub gap: f64,
    pub passed: bool,
    pub nu_opt: f64,
    pub resolvent_sup_at_nu: f64,
    /// `sup_ω ‖(A + (-ν + iω))⁻¹‖ < Λ⁻¹` at the optimal shift.
    pub resolvent_condition_passed: bool,
    pub warnings: Vec<String>,
}

/// `max_k λ_k^α / |λ_k - ν + iω|`.
pub fn resolvent_norm_at(model: &DiagonalParabolicModel, nu: f64, omega: f64) -> f64 {
    model
        .eigenvalues
        .iter()
        .map(|&l| l.powf(model.alpha) / (l - nu).hypot(omega))
        .fold(0.0, f64::max)
}

/// Supremum over `ω` of the weighted resolvent norm; attained at `ω = 0`.
pub fn resolvent_sup_norm(model: &DiagonalParabolicModel, nu: f64) -> Result<f64, ParabolicError> {
    if model.eigenvalues.iter().any(|&l| l == nu) {
        return Err(ParabolicError::OnEigenvalue { nu });
    }
    let sup = resolvent_norm_at(model, nu, 0.0);
    debug_assert!([1e-3, 0.1, 1.0, 10.0, 1e3].iter().all(|&w| resolvent_norm_at(model, nu, w) <= sup));
    Ok(sup)
}

/// Shift in `(λ_j, λ_{j+1})` minimising the resolvent supremum.
pub fn optimize_shift(model: &DiagonalParabolicModel) -> Result<(f64, f64), ParabolicError> {
    let (lo, hi) = model.gap_pair();
    if !(lo < hi) {
        return Err(ParabolicError::NoGap { j: model.j });
    }
    let (nu, _) = golden_section_min(|nu| resolvent_norm_at(model, nu, 0.0), lo, hi, 1e-15 * hi);
    let nu = nu.clamp(lo.next_up(), hi.next_down());
    Ok((nu, resolvent_sup_norm(model, nu)?))
}

pub fn spectral_gap_check(model: &DiagonalParabolicModel) -> Result<GapReport, ParabolicError> {
    model.validate()?;
    let (lo, hi) = model.gap_pair();
    if !(lo < hi) {
        return Err(ParabolicError::NoGap { j: model.j });
    }
    let gap = (hi - lo) / (lo.powf(model.alpha) + hi.powf(model.alpha));
    let (nu_opt, sup) = optimize_shift(model)?;
    let mut warnings = Vec::new();
    let last = *model.eigenvalues.last().expect("validated non-empty");
    if last < 10.0 * nu_opt {
        warnings.push(format!(
            "largest eigenvalue {last} is within 10x of the shift {nu_opt}; the truncated tail may dominate"
        ));
    }
    Ok(GapReport {
        gap,
        passed: gap > model.lipschitz,
        nu_opt,
        resolvent_sup_at_nu: sup,
        resolvent_condition_passed: sup < 1.0 / model.lipschitz,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralConditionReport {
    pub sup: f64,
    pub attained_at: f64,
    pub threshold: f64,
    pub cutoff: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Sweeps a user-supplied operator norm `ω ↦ ‖C(A + (-ν + iω))⁻¹B‖` on
/// `[0, cutoff]` against `Λ⁻¹`; the caller is responsible for the tail beyond
/// `cutoff`.
pub fn check_general_condition<F>(norm_at: F, lipschitz: f64, cutoff: f64, cfg: &SweepConfig) -> GeneralConditionReport
where
    F: FnMut(f64) -> f64,
{
    let mut f = norm_at;
    let peak = sweep_max::<std::convert::Infallible, _>(|w| Ok(f(w)), cutoff, 0.0, cfg)
        .unwrap_or_else(|e| match e {});
    let threshold = 1.0 / lipschitz;
    GeneralConditionReport {
        sup: peak.value,
        attained_at: peak.at,
        threshold,
        cutoff,
        samples: peak.samples,
        passed: threshold - peak.value > cfg.safety_margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn squares(n: usize, alpha: f64, lipschitz: f64, j: usize) -> DiagonalParabolicModel {
        DiagonalParabolicModel::new((1..=n).map(|k| (k * k) as f64).collect(), alpha, lipschitz, j).unwrap()
    }

    #[test]
    fn gap_examples() {
        let r = spectral_gap_check(&squares(20, 0.0, 2.0, 2)).unwrap();
        assert!((r.gap - 2.5).abs() < 1e-15);
        assert!(r.passed && r.resolvent_condition_passed);
        let r = spectral_gap_check(&squares(20, 0.5, 2.0, 2)).unwrap();
        assert!((r.gap - 1.0).abs() < 1e-15);
        assert!(!r.passed && !r.resolvent_condition_passed);
    }

    #[test]
    fn no_gap() {
        let m = DiagonalParabolicModel::new(vec![1.0, 2.0, 2.0, 5.0], 0.0, 1.0, 2).unwrap();
        assert_eq!(spectral_gap_check(&m), Err(ParabolicError::NoGap { j: 2 }));
    }

    #[test]
    fn sup_norm_examples() {
        let single = DiagonalParabolicModel { eigenvalues: vec![1.0], alpha: 0.0, lipschitz: 1.0, j: 1 };
        assert!((resolvent_sup_norm(&single, 0.5).unwrap() - 2.0).abs() < 1e-15);
        let m = squares(20, 0.0, 2.0, 2);
        assert!((resolvent_sup_norm(&m, 6.5).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(resolvent_sup_norm(&m, 4.0), Err(ParabolicError::OnEigenvalue { nu: 4.0 }));
    }

    #[test]
    fn optimum_is_reciprocal_gap() {
        for alpha in [0.0, 0.25, 0.5, 0.75] {
            let r = spectral_gap_check(&squares(30, alpha, 1.0, 3)).unwrap();
            assert!((r.resolvent_sup_at_nu * r.gap - 1.0).abs() < 1e-9, "{alpha}: {r:?}");
        }
    }

    #[test]
    fn tail_warning() {
        let m = DiagonalParabolicModel::new(vec![1.0, 4.0, 9.0], 0.0, 1.0, 2).unwrap();
        assert_eq!(spectral_gap_check(&m).unwrap().warnings.len(), 1);
        assert!(spectral_gap_check(&squares(40, 0.0, 1.0, 2)).unwrap().warnings.is_empty());
    }

    #[test]
    fn invalid_models() {
        assert!(DiagonalParabolicModel::new(vec![2.0, 1.0], 0.0, 1.0, 1).is_err());
        assert!(DiagonalParabolicModel::new(vec![1.0, 2.0], 1.0, 1.0, 1).is_err());
        assert!(DiagonalParabolicModel::new(vec![1.0, 2.0], 0.0, 1.0, 2).is_err());
        assert!(DiagonalParabolicModel::new(vec![0.0, 2.0], 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn general_condition_matches_diagonal_sup() {
        let m = squares(20, 0.5, 0.9, 2);
        let (nu, _) = optimize_shift(&m).unwrap();
        let r = check_general_condition(|w| resolvent_norm_at(&m, nu, w), m.lipschitz, 100.0, &SweepConfig::default());
        assert!((r.sup - resolvent_sup_norm(&m, nu).unwrap()).abs() < 1e-12);
        assert_eq!(r.attained_at, 0.0);
        assert!(r.passed);
    }
}
