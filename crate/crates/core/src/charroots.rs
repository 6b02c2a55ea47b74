//! Characteristic quasi-polynomials of linear delay systems with discrete
//! delays, and right-half-plane root counting by the argument principle.
//!
//! A linear part `x'(t) = Σ_k A_k x(t - τ_k)` has characteristic matrix
//! `Δ(p) = Σ_k A_k e^{-p τ_k} - p I`. Every root `p` of `det Δ` with
//! `Re p ≥ c` satisfies `|p| ≤ Σ_k ‖A_k‖ e^{-c τ_k}`, so a finite rectangle
//! `[c, R] × [-Ω, Ω]` with `R = Ω` just above that bound encloses all of them.
//! The count is the winding number of `det Δ` along the rectangle boundary.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::{golden_section_min, linspace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharRootsError {
    #[error("invalid linear part: {0}")]
    InvalidSystem(String),
    #[error("characteristic root on the line Re p = {abscissa} (min |det| = {margin:e})")]
    OnAxisRoot { abscissa: f64, margin: f64 },
    #[error("winding number not stable after {refinements} refinements at Re p = {abscissa}")]
    NoConvergence { abscissa: f64, refinements: usize },
}

/// One discrete delay term `A_k x(t - τ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub delay: f64,
    pub matrix: DMatrix<f64>,
}

/// Linear part `Σ_k A_k φ(-τ_k)` of a delay equation in `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLinearPart {
    dim: usize,
    terms: Vec<DelayTerm>,
}

impl DelayLinearPart {
    pub fn new(dim: usize, terms: Vec<(f64, DMatrix<f64>)>) -> Result<Self, CharRootsError> {
        if dim == 0 {
            return Err(CharRootsError::InvalidSystem("state dimension must be positive".into()));
        }
        if terms.is_empty() {
            return Err(CharRootsError::InvalidSystem("at least one term is required".into()));
        }
        let mut out: Vec<DelayTerm> = Vec::with_capacity(terms.len());
        for (k, (delay, matrix)) in terms.into_iter().enumerate() {
            if !delay.is_finite() || delay < 0.0 {
                return Err(CharRootsError::InvalidSystem(format!(
                    "terms[{k}].delay must be finite and non-negative, got {delay}"
                )));
            }
            if matrix.nrows() != dim || matrix.ncols() != dim {
                return Err(CharRootsError::InvalidSystem(format!(
                    "terms[{k}].matrix is {}x{}, expected {dim}x{dim}",
                    matrix.nrows(),
                    matrix.ncols()
                )));
            }
            if matrix.iter().any(|v| !v.is_finite()) {
                return Err(CharRootsError::InvalidSystem(format!("terms[{k}].matrix has non-finite entries")));
            }
            if out.iter().any(|t| t.delay == delay) {
                return Err(CharRootsError::InvalidSystem(format!("terms[{k}].delay {delay} is repeated")));
            }
            out.push(DelayTerm { delay, matrix });
        }
        Ok(Self { dim, terms: out })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.iter().map(|t| t.delay).fold(0.0, f64::max)
    }

    /// `α(p) = Σ_k A_k e^{-p τ_k}`.
    pub fn alpha(&self, p: Complex64) -> DMatrix<Complex64> {
        let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for term in &self.terms {
            let w = (-p * term.delay).exp();
            for (dst, src) in acc.iter_mut().zip(term.matrix.iter()) {
                *dst += w * *src;
            }
        }
        acc
    }

    /// `Σ_k ‖A_k‖_F e^{-c τ_k}`: bounds `‖α(p)‖` on the half-plane `Re p ≥ c`.
    pub fn norm_bound(&self, c: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.matrix.norm() * (-c * t.delay).exp())
            .sum()
    }
}

/// `det(α(p) - pI)` viewed as an entire function of `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPolynomial {
    linear: DelayLinearPart,
}

impl QuasiPolynomial {
    pub fn new(linear: DelayLinearPart) -> Self {
        Self { linear }
    }

    pub fn linear_part(&self) -> &DelayLinearPart {
        &self.linear
    }

    pub fn char_matrix(&self, p: Complex64) -> DMatrix<Complex64> {
        eval_char_matrix(self, p)
    }

    pub fn det(&self, p: Complex64) -> Complex64 {
        eval_char_matrix(self, p).determinant()
    }
}

/// `Δ(p) = Σ_k A_k e^{-p τ_k} - pI`.
pub fn eval_char_matrix(qp: &QuasiPolynomial, p: Complex64) -> DMatrix<Complex64> {
    let mut m = qp.linear.alpha(p);
    for i in 0..qp.linear.dim {
        m[(i, i)] -= p;
    }
    m
}

/// Rectangle used for the argument-principle integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contour {
    pub abscissa: f64,
    pub right: f64,
    pub omega: f64,
    pub samples_per_side: usize,
}

/// Number of roots (with multiplicity) of `det Δ` strictly right of `Re p = c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootCount {
    pub half_plane_abscissa: f64,
    pub count: usize,
    /// Minimum of `|det Δ|` found along `Re p = c`.
    pub margin: f64,
    pub contour: Contour,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConfig {
    /// Base number of samples per rectangle side before length scaling.
    pub initial_samples: usize,
    /// Doublings allowed while waiting for a stable winding number.
    pub max_refinements: usize,
    /// Bisection depth for a single contour segment.
    pub max_depth: usize,
    /// `OnAxisRoot` fires when the line minimum is below `floor_rel (1 + |det Δ(c)|)`.
    pub floor_rel: f64,
    /// Minimum number of uniform samples on the dichotomy line.
    pub line_samples: usize,
    /// Factor (at least 1) applied to the a priori rectangle size.
    pub enlarge: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            initial_samples: 64,
            max_refinements: 6,
            max_depth: 48,
            floor_rel: 1e-10,
            line_samples: 1024,
            enlarge: 1.0,
        }
    }
}

impl ContourConfig {
    /// Same configuration with the base contour sampling doubled.
    pub fn doubled(&self) -> Self {
        Self {
            initial_samples: self.initial_samples * 2,
            line_samples: self.line_samples * 2,
            ..*self
        }
    }
}

/// Inf of `|det Δ(c + iω)|` over the sampled line `|ω| ≤ Ω`.
///
/// Beyond `Ω = Σ‖A_k‖e^{-cτ_k} + 1` the smallest singular value of `Δ` is at
/// least one, so the tail cannot contain roots. Conjugate symmetry restricts
/// sampling to `ω ≥ 0`.
pub fn verify_dichotomy_line(qp: &QuasiPolynomial, c: f64) -> f64 {
    verify_dichotomy_line_with(qp, c, &ContourConfig::default())
}

pub fn verify_dichotomy_line_with(qp: &QuasiPolynomial, c: f64, cfg: &ContourConfig) -> f64 {
    let omega_max = qp.linear.norm_bound(c) + 1.0;
    let rate = 1.0 + qp.linear.max_delay();
    let n = cfg.line_samples.max((omega_max * rate * 16.0).ceil() as usize).min(1 << 20);
    let grid = linspace(0.0, omega_max, n);
    let mag = |w: f64| qp.det(Complex64::new(c, w)).norm();
    let values: Vec<f64> = grid.iter().map(|&w| mag(w)).collect();

    let mut best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
            let right = if i + 1 == n { f64::INFINITY } else { values[i + 1] };
            values[i] <= left && values[i] <= right
        })
        .collect();
    minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let tol = 1e-13 * (1.0 + omega_max);
    for &i in minima.iter().take(8) {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(n - 1)];
        let (_, v) = golden_section_min(mag, lo, hi, tol);
        best = best.min(v);
    }
    best
}

/// Counts roots of `det Δ` with `Re p > c` using the default contour settings.
pub fn count_roots_right_of(qp: &QuasiPolynomial, c: f64) -> Result<RootCount, CharRootsError> {
    count_roots_right_of_with(qp, c, &ContourConfig::default())
}

pub fn count_roots_right_of_with(
    qp: &QuasiPolynomial,
    c: f64,
    cfg: &ContourConfig,
) -> Result<RootCount, CharRootsError> {
    let margin = verify_dichotomy_line_with(qp, c, cfg);
    let floor = cfg.floor_rel * (1.0 + qp.det(Complex64::new(c, 0.0)).norm());
    if !(margin > floor) {
        return Err(CharRootsError::OnAxisRoot { abscissa: c, margin });
    }
    let bound = qp.linear.norm_bound(c) + 1.0;
    if c >= bound {
        return Ok(RootCount {
            half_plane_abscissa: c,
            count: 0,
            margin,
            contour: Contour { abscissa: c, right: c, omega: 0.0, samples_per_side: 0 },
        });
    }
    let size = bound * cfg.enlarge.max(1.0);
    let contour = |samples| Contour { abscissa: c, right: size, omega: size, samples_per_side: samples };
    let mut samples = cfg.initial_samples.max(4);
    let mut previous = winding_number(qp, &contour(samples), cfg.max_depth);
    for _ in 0..cfg.max_refinements {
        samples *= 2;
        let current = winding_number(qp, &contour(samples), cfg.max_depth);
        if let (Some(a), Some(b)) = (previous, current) {
            if a == b {
                let count = usize::try_from(a).map_err(|_| CharRootsError::NoConvergence {
                    abscissa: c,
                    refinements: cfg.max_refinements,
                })?;
                return Ok(RootCount { half_plane_abscissa: c, count, margin, contour: contour(samples) });
            }
        }
        previous = current;
    }
    Err(CharRootsError::NoConvergence { abscissa: c, refinements: cfg.max_refinements })
}

/// Winding number of `det Δ` around the counter-clockwise rectangle, or `None`
/// when a segment cannot be resolved to phase steps below `π/2`.
fn winding_number(qp: &QuasiPolynomial, contour: &Contour, max_depth: usize) -> Option<i64> {
    let Contour { abscissa: c, right, omega, samples_per_side } = *contour;
    let rate = 1.0 + qp.linear.max_delay();
    let corners = [
        Complex64::new(c, -omega),
        Complex64::new(right, -omega),
        Complex64::new(right, omega),
        Complex64::new(c, omega),
    ];
    let mut total = 0.0;
    for side in 0..4 {
        let a = corners[side];
        let b = corners[(side + 1) % 4];
        let len = (b - a).norm();
        let n = samples_per_side.max((len * rate * 2.0).ceil() as usize);
        let mut z_prev = a;
        let mut f_prev = qp.det(a);
        for i in 1..=n {
            let z = if i == n { b } else { a + (b - a) * (i as f64 / n as f64) };
            let f = qp.det(z);
            total += phase_step(qp, z_prev, f_prev, z, f, max_depth)?;
            z_prev = z;
            f_prev = f;
        }
    }
    let turns = total / (2.0 * PI);
    let rounded = turns.round();
    ((turns - rounded).abs() < 1e-6).then_some(rounded as i64)
}

fn phase_step(
    qp: &QuasiPolynomial,
    z0: Complex64,
    f0: Complex64,
    z1: Complex64,
    f1: Complex64,
    max_depth: usize,
) -> Option<f64> {
    let mut stack = vec![(z0, f0, z1, f1, 0usize)];
    let mut acc = 0.0;
    while let Some((za, fa, zb, fb, depth)) = stack.pop() {
        if fa == Complex64::new(0.0, 0.0) || fb == Complex64::new(0.0, 0.0) {
            return None;
        }
        let d = (fb / fa).arg();
        if d.abs() < FRAC_PI_2 {
            acc += d;
            continue;
        }
        if depth >= max_depth {
            return None;
        }
        let zm = (za + zb) * 0.5;
        let fm = qp.det(zm);
        // second half first so the first half pops next
        stack.push((zm, fm, zb, fb, depth + 1));
        stack.push((za, fa, zm, fm, depth + 1));
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(terms: &[(f64, f64)]) -> QuasiPolynomial {
        let terms = terms.iter().map(|&(d, a)| (d, DMatrix::from_element(1, 1, a))).collect();
        QuasiPolynomial::new(DelayLinearPart::new(1, terms).unwrap())
    }

    fn goodwin_linear(lambda: f64, tau: f64, rho: f64) -> QuasiPolynomial {
        let a0 = DMatrix::from_row_slice(3, 3, &[-lambda, 0.0, 0.0, 1.0, -lambda, 0.0, 0.0, 1.0, -lambda]);
        let mut a1 = DMatrix::zeros(3, 3);
        a1[(0, 2)] = -rho;
        QuasiPolynomial::new(DelayLinearPart::new(3, vec![(0.0, a0), (tau, a1)]).unwrap())
    }

    #[test]
    fn char_matrix_scalar_examples() {
        let p0 = Complex64::new(0.0, 0.0);
        let undelayed = scalar(&[(0.0, -1.0)]);
        assert_eq!(eval_char_matrix(&undelayed, p0)[(0, 0)], Complex64::new(-1.0, 0.0));
        assert_eq!(undelayed.det(p0), Complex64::new(-1.0, 0.0));
        let delayed = scalar(&[(1.0, -1.0)]);
        assert_eq!(delayed.det(p0), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn goodwin_determinant_matches_cofactor_expansion() {
        let (lambda, tau, rho) = (0.7, 1.3, 0.4);
        let qp = goodwin_linear(lambda, tau, rho);
        let points = [
            (0.3, 0.1),
            (-0.5, 2.0),
            (1.7, -0.4),
            (-1.1, -3.3),
            (0.0, 5.0),
            (2.5, 2.5),
            (-0.2, 0.0),
            (0.9, 7.1),
            (-2.0, 1.0),
            (0.45, -0.95),
        ];
        for (re, im) in points {
            let p = Complex64::new(re, im);
            let expected = -((lambda + p).powi(3) + rho * (-p * tau).exp());
            let got = qp.det(p);
            assert!((got - expected).norm() < 1e-12 * (1.0 + expected.norm()), "p = {p}");
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let qp = goodwin_linear(0.5, 2.0, 0.3);
        let p = Complex64::new(-0.3, 1.7);
        let a = qp.char_matrix(p.conj());
        let b = qp.char_matrix(p).map(|z| z.conj());
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn stable_ode_has_no_roots_right_of_minus_half() {
        let rc = count_roots_right_of(&scalar(&[(0.0, -1.0)]), -0.5).unwrap();
        assert_eq!(rc.count, 0);
    }

    #[test]
    fn unstable_ode_has_one_root() {
        let rc = count_roots_right_of(&scalar(&[(0.0, 1.0)]), 0.0).unwrap();
        assert_eq!(rc.count, 1);
    }

    #[test]
    fn delayed_negative_feedback_is_stable() {
        let rc = count_roots_right_of(&scalar(&[(1.0, -1.0)]), 0.0).unwrap();
        assert_eq!(rc.count, 0);
        // gain 2 > π/2 destabilises
        let rc = count_roots_right_of(&scalar(&[(1.0, -2.0)]), 0.0).unwrap();
        assert_eq!(rc.count, 2);
    }

    #[test]
    fn on_axis_root_is_reported() {
        let qp = scalar(&[(0.0, -1.0)]);
        assert_eq!(verify_dichotomy_line(&qp, -1.0), 0.0);
        assert!(matches!(
            count_roots_right_of(&qp, -1.0),
            Err(CharRootsError::OnAxisRoot { .. })
        ));
    }

    #[test]
    fn dichotomy_margin_of_stable_ode() {
        let m = verify_dichotomy_line(&scalar(&[(0.0, -1.0)]), 0.0);
        assert!((m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn goodwin_dichotomy_margin_at_decay_line() {
        let (lambda, tau, rho) = (0.5, 1.0, 0.4);
        let qp = goodwin_linear(lambda, tau, rho);
        let m = verify_dichotomy_line(&qp, -lambda);
        // |det Δ(-λ + iω)| = |(iω)³ + ρ e^{λτ} e^{-iωτ}|, minimised over a dense grid
        let oracle = (0..=200_000)
            .map(|i| {
                let w = i as f64 * 1e-4;
                let q = Complex64::new(0.0, w);
                (q.powi(3) + rho * (lambda * tau).exp() * (-q * tau).exp()).norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(m > 0.0);
        assert!((m - oracle).abs() < 1e-6, "{m} vs {oracle}");
    }

    #[test]
    fn count_is_stable_under_sample_doubling() {
        let qp = goodwin_linear(0.5, 2.5, 0.6);
        let cfg = ContourConfig::default();
        let a = count_roots_right_of_with(&qp, -0.5, &cfg).unwrap();
        let b = count_roots_right_of_with(&qp, -0.5, &cfg.doubled()).unwrap();
        assert_eq!(a.count, b.count);
        assert_eq!(a.count, 2);
    }

    #[test]
    fn rejects_malformed_parts() {
        assert!(DelayLinearPart::new(0, vec![(0.0, DMatrix::zeros(0, 0))]).is_err());
        assert!(DelayLinearPart::new(1, vec![]).is_err());
        assert!(DelayLinearPart::new(1, vec![(-1.0, DMatrix::zeros(1, 1))]).is_err());
        assert!(DelayLinearPart::new(2, vec![(0.0, DMatrix::zeros(1, 1))]).is_err());
        assert!(
            DelayLinearPart::new(1, vec![(1.0, DMatrix::zeros(1, 1)), (1.0, DMatrix::zeros(1, 1))]).is_err()
        );
    }
}
