//! Transfer functions of Lur'e-form delay systems and frequency-domain
//! inequalities along vertical lines `Re p = -ν`.
//!
//! The system is `x'(t) = A x_t + B F(C x_t)` with `A` a [`DelayLinearPart`],
//! `Cφ = Σ_k C_k φ(-τ_k)` and `F` Lipschitz with constant `Λ` between the
//! weighted norms `|·|₁ = |U₁·|` and `|·|₂ = |U₂·|` (`Mᵢ = UᵢᵀUᵢ`, `Uᵢ` upper
//! triangular with positive diagonal).
//!
//! Strict inequalities "for all ω" are certified by a finite adaptive sweep on
//! `[0, Ω*]`, conjugate symmetry for `ω < 0`, and an analytic bound on the
//! transfer norm for `|ω| > Ω*`. A configurable absolute safety margin guards
//! the sampled part.

pub(crate) mod sweep;

use nalgebra::{Cholesky, DMatrix, SVD};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::charroots::{verify_dichotomy_line_with, ContourConfig, DelayLinearPart, QuasiPolynomial};
pub use sweep::SweepConfig;
use sweep::sweep_max;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FreqError {
    #[error("invalid Lur'e system: {0}")]
    InvalidSystem(String),
    #[error("characteristic matrix singular at p = {0}")]
    SingularAtP(Complex64),
    #[error("transfer function has a pole on the line Re p = {abscissa}")]
    PoleOnLine { abscissa: f64 },
    #[error("no frequency cut-off closes the tail bound on Re p = {abscissa}")]
    TailBoundUnavailable { abscissa: f64 },
    #[error("circle condition needs a scalar transfer function, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
}

/// Cholesky data for the input/output inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct NormWeights {
    input_factor_inv: DMatrix<f64>,
    output_factor: DMatrix<f64>,
}

impl NormWeights {
    pub fn new(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<Self, FreqError> {
        let u1 = upper_cholesky(m1, "m1")?;
        let u2 = upper_cholesky(m2, "m2")?;
        let input_factor_inv = u1
            .solve_upper_triangular(&DMatrix::identity(u1.nrows(), u1.nrows()))
            .ok_or_else(|| FreqError::InvalidSystem("m1 factor is singular".into()))?;
        Ok(Self { input_factor_inv, output_factor: u2 })
    }

    pub fn identity(m: usize, r: usize) -> Self {
        Self { input_factor_inv: DMatrix::identity(m, m), output_factor: DMatrix::identity(r, r) }
    }

    /// Bound on the factor `‖U₂‖ ‖U₁⁻¹‖` relating weighted and Euclidean norms.
    fn distortion(&self) -> f64 {
        self.output_factor.norm() * self.input_factor_inv.norm()
    }

    pub fn operator_norm(&self, w: &DMatrix<Complex64>) -> f64 {
        let u2 = self.output_factor.map(|v| Complex64::new(v, 0.0));
        let u1i = self.input_factor_inv.map(|v| Complex64::new(v, 0.0));
        max_singular_value(&(u2 * w * u1i))
    }
}

/// Upper-triangular `U` with positive diagonal and `M = UᵀU`.
fn upper_cholesky(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>, FreqError> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(FreqError::InvalidSystem(format!("{name} must be a non-empty square matrix")));
    }
    if (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
        return Err(FreqError::InvalidSystem(format!("{name} is not symmetric")));
    }
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| FreqError::InvalidSystem(format!("{name} is not positive definite")))?;
    Ok(chol.l().transpose())
}

fn max_singular_value(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    SVD::new(m.clone(), false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

/// Operator norm of `W : (ℂᵐ, |·|₁) → (ℂʳ, |·|₂)`.
pub fn weighted_norm(w: &DMatrix<Complex64>, m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<f64, FreqError> {
    Ok(NormWeights::new(m1, m2)?.operator_norm(w))
}

/// Delay system in Lur'e form together with the Lipschitz data of its nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct LurjeDelaySystem {
    linear: QuasiPolynomial,
    control: DMatrix<f64>,
    measurement: Vec<(f64, DMatrix<f64>)>,
    lipschitz: f64,
    weights: NormWeights,
}

impl LurjeDelaySystem {
    pub fn new(
        linear: DelayLinearPart,
        control: DMatrix<f64>,
        measurement: Vec<(f64, DMatrix<f64>)>,
        lipschitz: f64,
        m1: &DMatrix<f64>,
        m2: &DMatrix<f64>,
    ) -> Result<Self, FreqError> {
        let n = linear.dim();
        if control.nrows() != n || control.ncols() == 0 {
            return Err(FreqError::InvalidSystem(format!(
                "b must be {n}xm with m > 0, got {}x{}",
                control.nrows(),
                control.ncols()
            )));
        }
        if measurement.is_empty() {
            return Err(FreqError::InvalidSystem("measurement needs at least one term".into()));
        }
        let r = measurement[0].1.nrows();
        for (k, (delay, c)) in measurement.iter().enumerate() {
            if !delay.is_finite() || *delay < 0.0 {
                return Err(FreqError::InvalidSystem(format!("measurement[{k}].delay must be non-negative")));
            }
            if c.nrows() != r || c.ncols() != n || r == 0 {
                return Err(FreqError::InvalidSystem(format!(
                    "measurement[{k}].matrix must be {r}x{n}, got {}x{}",
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(FreqError::InvalidSystem(format!("lipschitz must be positive, got {lipschitz}")));
        }
        if m1.nrows() != control.ncols() {
            return Err(FreqError::InvalidSystem(format!("m1 must be {0}x{0}", control.ncols())));
        }
        if m2.nrows() != r {
            return Err(FreqError::InvalidSystem(format!("m2 must be {r}x{r}")));
        }
        let weights = NormWeights::new(m1, m2)?;
        Ok(Self { linear: QuasiPolynomial::new(linear), control, measurement, lipschitz, weights })
    }

    pub fn quasi_polynomial(&self) -> &QuasiPolynomial {
        &self.linear
    }

    pub fn inputs(&self) -> usize {
        self.control.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.measurement[0].1.nrows()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn weights(&self) -> &NormWeights {
        &self.weights
    }

    fn max_delay(&self) -> f64 {
        self.measurement.iter().map(|(d, _)| *d).fold(self.linear.linear_part().max_delay(), f64::max)
    }

    /// `γ(p) = Σ_k C_k e^{-p τ_k}`.
    pub fn gamma(&self, p: Complex64) -> DMatrix<Complex64> {
        let (r, n) = (self.outputs(), self.linear.linear_part().dim());
        let mut acc = DMatrix::<Complex64>::zeros(r, n);
        for (delay, c) in &self.measurement {
            let w = (-p * *delay).exp();
            for (dst, src) in acc.iter_mut().zip(c.iter()) {
                *dst += w * *src;
            }
        }
        acc
    }

    /// Returns `(S, G)` with `‖α(p)‖ ≤ S` and `‖γ(p)‖ ≤ G` on `Re p = -ν`.
    fn line_bounds(&self, nu: f64) -> (f64, f64) {
        let s = self.linear.linear_part().norm_bound(-nu);
        let g = self.measurement.iter().map(|(d, c)| c.norm() * (nu * d).exp()).sum();
        (s, g)
    }

    /// Upper bound on the Euclidean norm `|W(-ν + iω')|` for all `|ω'| ≥ ω`.
    pub fn transfer_tail_bound(&self, nu: f64, omega: f64) -> Option<f64> {
        let (s, g) = self.line_bounds(nu);
        let gap = omega - s;
        (gap > 0.0).then(|| g * self.control.norm() / gap)
    }
}

/// `W(p) = γ(p) (α(p) - pI)⁻¹ B`, computed by an LU solve.
pub fn eval_transfer(sys: &LurjeDelaySystem, p: Complex64) -> Result<DMatrix<Complex64>, FreqError> {
    let delta = sys.linear.char_matrix(p);
    let scale = delta.norm().max(1.0).powi(delta.nrows() as i32);
    let lu = delta.lu();
    if !(lu.determinant().norm() > 1e-14 * scale) {
        return Err(FreqError::SingularAtP(p));
    }
    let b = sys.control.map(|v| Complex64::new(v, 0.0));
    let x = lu.solve(&b).ok_or(FreqError::SingularAtP(p))?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(FreqError::SingularAtP(p));
    }
    Ok(sys.gamma(p) * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepKind {
    /// `sup_ω |W(-ν+iω)| < Λ⁻¹`.
    Gain,
    /// `inf_ω Re[(1 + aW)*(1 + bW)] > 0`.
    Circle,
}

/// Outcome of a frequency sweep along `Re p = -ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencySweepReport {
    pub kind: SweepKind,
    pub abscissa: f64,
    /// Supremum of the weighted norm (gain) or infimum of the circle expression.
    pub extremum: f64,
    pub attained_at: f64,
    /// `Λ⁻¹` for the gain condition, `0` for the circle condition.
    pub threshold: f64,
    /// Signed distance to the threshold; positive means the inequality holds.
    pub margin: f64,
    pub cutoff: f64,
    /// Worst case of the certified quantity beyond the cut-off.
    pub tail_bound: f64,
    pub samples: usize,
    pub safety_margin: f64,
    pub passed: bool,
}

pub fn check_gain_condition(sys: &LurjeDelaySystem, nu: f64) -> Result<FrequencySweepReport, FreqError> {
    check_gain_condition_with(sys, nu, &SweepConfig::default())
}

/// Verifies `|W(-ν + iω)| < Λ⁻¹` for all real `ω`.
pub fn check_gain_condition_with(
    sys: &LurjeDelaySystem,
    nu: f64,
    cfg: &SweepConfig,
) -> Result<FrequencySweepReport, FreqError> {
    let contour = ContourConfig::default();
    let line_margin = verify_dichotomy_line_with(&sys.linear, -nu, &contour);
    let floor = contour.floor_rel * (1.0 + sys.linear.det(Complex64::new(-nu, 0.0)).norm());
    if !(line_margin > floor) {
        return Err(FreqError::PoleOnLine { abscissa: -nu });
    }

    let threshold = 1.0 / sys.lipschitz;
    let (s, g) = sys.line_bounds(nu);
    let k = sys.weights.distortion() * g * sys.control.norm();
    let cutoff = (s + 2.0 * k * sys.lipschitz).max(s + 1.0);
    if !cutoff.is_finite() || cutoff > cfg.max_cutoff {
        return Err(FreqError::TailBoundUnavailable { abscissa: -nu });
    }
    let tail_bound = k / (cutoff - s);

    let peak = sweep_max(
        |w| {
            let p = Complex64::new(-nu, w);
            eval_transfer(sys, p)
                .map(|m| sys.weights.operator_norm(&m))
                .map_err(|_| FreqError::PoleOnLine { abscissa: -nu })
        },
        cutoff,
        sys.max_delay(),
        cfg,
    )?;
    let margin = threshold - peak.value;
    Ok(FrequencySweepReport {
        kind: SweepKind::Gain,
        abscissa: -nu,
        extremum: peak.value,
        attained_at: peak.at,
        threshold,
        margin,
        cutoff,
        tail_bound,
        samples: peak.samples,
        safety_margin: cfg.safety_margin,
        passed: margin > cfg.safety_margin && tail_bound < threshold,
    })
}

/// Scalar frequency response along a vertical line, `ω ↦ W(-ν + iω)`.
pub trait LineResponse {
    fn at(&self, omega: f64) -> Result<Complex64, FreqError>;

    /// Bound on `|W|` valid for every `|ω'| ≥ omega`, when one is known.
    fn tail_bound(&self, omega: f64) -> Option<f64>;

    fn abscissa(&self) -> f64;

    /// Largest delay in the response, used to resolve its oscillation.
    fn delay_scale(&self) -> f64 {
        0.0
    }
}

/// The scalar transfer function of a single-input single-output system on `Re p = -ν`.
pub struct SystemLine<'a> {
    sys: &'a LurjeDelaySystem,
    nu: f64,
}

impl<'a> SystemLine<'a> {
    pub fn new(sys: &'a LurjeDelaySystem, nu: f64) -> Result<Self, FreqError> {
        if sys.inputs() != 1 || sys.outputs() != 1 {
            return Err(FreqError::NotScalar { rows: sys.outputs(), cols: sys.inputs() });
        }
        Ok(Self { sys, nu })
    }
}

impl LineResponse for SystemLine<'_> {
    fn at(&self, omega: f64) -> Result<Complex64, FreqError> {
        eval_transfer(self.sys, Complex64::new(-self.nu, omega))
            .map(|m| m[(0, 0)])
            .map_err(|_| FreqError::PoleOnLine { abscissa: -self.nu })
    }

    fn tail_bound(&self, omega: f64) -> Option<f64> {
        self.sys.transfer_tail_bound(self.nu, omega)
    }

    fn abscissa(&self) -> f64 {
        -self.nu
    }

    fn delay_scale(&self) -> f64 {
        self.sys.max_delay()
    }
}

/// A response given by closures, e.g. a closed-form transfer function.
pub struct FnLine<F, T> {
    pub response: F,
    pub tail: T,
    pub abscissa: f64,
    pub delay_scale: f64,
}

impl<F, T> LineResponse for FnLine<F, T>
where
    F: Fn(f64) -> Complex64,
    T: Fn(f64) -> Option<f64>,
{
    fn at(&self, omega: f64) -> Result<Complex64, FreqError> {
        let w = (self.response)(omega);
        if w.re.is_finite() && w.im.is_finite() {
            Ok(w)
        } else {
            Err(FreqError::PoleOnLine { abscissa: self.abscissa })
        }
    }

    fn tail_bound(&self, omega: f64) -> Option<f64> {
        (self.tail)(omega)
    }

    fn abscissa(&self) -> f64 {
        self.abscissa
    }

    fn delay_scale(&self) -> f64 {
        self.delay_scale
    }
}

/// `Re[(1 + aW)* (1 + bW)]`.
pub fn circle_expression(w: Complex64, a: f64, b: f64) -> f64 {
    ((1.0 + a * w).conj() * (1.0 + b * w)).re
}

pub fn check_circle_condition<L: LineResponse>(line: &L, a: f64, b: f64) -> Result<FrequencySweepReport, FreqError> {
    check_circle_condition_with(line, a, b, &SweepConfig::default())
}

/// Verifies `Re[(1 + aW)*(1 + bW)] > 0` for all real `ω`.
///
/// Beyond the cut-off `|W| ≤ w*` keeps the expression within `1/2` of its limit `1`.
pub fn check_circle_condition_with<L: LineResponse>(
    line: &L,
    a: f64,
    b: f64,
    cfg: &SweepConfig,
) -> Result<FrequencySweepReport, FreqError> {
    let (sa, sp) = (a.abs() + b.abs(), (a * b).abs());
    let mut w_star = f64::INFINITY;
    if sa > 0.0 {
        w_star = w_star.min(0.25 / sa);
    }
    if sp > 0.0 {
        w_star = w_star.min(0.5 / sp.sqrt());
    }
    let mut cutoff = 1.0;
    let tail_w = loop {
        match line.tail_bound(cutoff) {
            Some(t) if t <= w_star => break t,
            _ => {}
        }
        cutoff *= 2.0;
        if cutoff > cfg.max_cutoff {
            return Err(FreqError::TailBoundUnavailable { abscissa: line.abscissa() });
        }
    };
    let tail_dev = sa * tail_w + sp * tail_w * tail_w;

    let peak = sweep_max(
        |w| line.at(w).map(|v| -circle_expression(v, a, b)),
        cutoff,
        line.delay_scale(),
        cfg,
    )?;
    let inf = -peak.value;
    Ok(FrequencySweepReport {
        kind: SweepKind::Circle,
        abscissa: line.abscissa(),
        extremum: inf,
        attained_at: peak.at,
        threshold: 0.0,
        margin: inf,
        cutoff,
        tail_bound: 1.0 - tail_dev,
        samples: peak.samples,
        safety_margin: cfg.safety_margin,
        passed: inf > cfg.safety_margin && 1.0 - tail_dev > cfg.safety_margin,
    })
}
