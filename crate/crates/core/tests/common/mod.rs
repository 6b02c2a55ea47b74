//! Independent oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use pbcert::charroots::{DelayLinearPart, QuasiPolynomial};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Delay terms `(τ_k, A_k)` with `A_k` stored row-major.
#[derive(Debug, Clone)]
pub struct RawSystem {
    pub n: usize,
    pub terms: Vec<(f64, Vec<f64>)>,
}

impl RawSystem {
    pub fn random(seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.random_range(1..=3);
        let delays = rng.random_range(1..=2);
        let mut terms = Vec::new();
        let entries = |rng: &mut StdRng| (0..n * n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        terms.push((0.0, entries(&mut rng)));
        for _ in 0..delays {
            let tau = rng.random_range(0.1..2.0);
            terms.push((tau, entries(&mut rng)));
        }
        Self { n, terms }
    }

    pub fn linear_part(&self) -> DelayLinearPart {
        let terms = self
            .terms
            .iter()
            .map(|(tau, a)| (*tau, DMatrix::from_row_slice(self.n, self.n, a)))
            .collect();
        DelayLinearPart::new(self.n, terms).unwrap()
    }

    pub fn quasi_polynomial(&self) -> QuasiPolynomial {
        QuasiPolynomial::new(self.linear_part())
    }

    /// `Σ ‖A_k‖_F e^{-cτ_k} + 1`, outside which no root lies.
    pub fn root_bound(&self, c: f64) -> f64 {
        self.terms
            .iter()
            .map(|(tau, a)| a.iter().map(|v| v * v).sum::<f64>().sqrt() * (-c * tau).exp())
            .sum::<f64>()
            + 1.0
    }

    fn entry(&self, p: Complex64, i: usize, j: usize) -> Complex64 {
        let mut v = Complex64::new(0.0, 0.0);
        for (tau, a) in &self.terms {
            v += a[i * self.n + j] * (-p * tau).exp();
        }
        if i == j {
            v -= p;
        }
        v
    }

    /// Cofactor expansion of `det(Σ A_k e^{-pτ_k} - pI)`.
    pub fn det(&self, p: Complex64) -> Complex64 {
        let m = |i, j| self.entry(p, i, j);
        match self.n {
            1 => m(0, 0),
            2 => m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
            3 => {
                m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                    + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
            }
            _ => unreachable!(),
        }
    }

    /// Dense-sample minimum of `|det|` on `Re p = c`.
    pub fn line_min(&self, c: f64) -> f64 {
        let top = self.root_bound(c);
        let n = 40_000;
        (0..=n)
            .map(|i| self.det(Complex64::new(c, top * i as f64 / n as f64)).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Newton iteration from a grid of seeds covering the root box; returns
    /// the distinct roots with non-negative imaginary part.
    pub fn newton_roots(&self, c: f64) -> Vec<Complex64> {
        let bound = self.root_bound(c);
        let spacing = 0.2;
        let nx = ((bound - c + 0.5) / spacing).ceil() as usize + 1;
        let ny = (bound / spacing).ceil() as usize + 1;
        let mut roots: Vec<Complex64> = Vec::new();
        for ix in 0..nx {
            for iy in 0..ny {
                let seed = Complex64::new(c - 0.5 + ix as f64 * spacing, iy as f64 * spacing);
                let Some(mut z) = self.newton(seed) else { continue };
                if z.im.abs() < 1e-9 {
                    z.im = 0.0;
                }
                if z.im < 0.0 {
                    z = z.conj();
                }
                if !roots.iter().any(|r| (r - z).norm() < 1e-6) {
                    roots.push(z);
                }
            }
        }
        roots
    }

    fn newton(&self, mut z: Complex64) -> Option<Complex64> {
        let h = 1e-6;
        for _ in 0..100 {
            let f = self.det(z);
            let df = (self.det(z + h) - self.det(z - h)) / (2.0 * h);
            if df.norm() == 0.0 {
                return None;
            }
            let step = f / df;
            z -= step;
            if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 1e3 {
                return None;
            }
            if step.norm() < 1e-12 * (1.0 + z.norm()) {
                return (self.det(z).norm() < 1e-8).then_some(z);
            }
        }
        None
    }

    /// Roots right of `Re p = c`, conjugate pairs counted twice.
    pub fn newton_count(&self, c: f64) -> usize {
        self.newton_roots(c)
            .iter()
            .filter(|z| z.re > c)
            .map(|z| if z.im == 0.0 { 1 } else { 2 })
            .sum()
    }
}

/// `σ_max(W)` by power iteration on `WᴴW`.
pub fn power_singular(w: &DMatrix<Complex64>) -> f64 {
    let wh = w.adjoint();
    let g = &wh * w;
    let mut v = DMatrix::from_fn(w.ncols(), 1, |i, _| Complex64::new(1.0 + i as f64 * 0.37, 0.11 * i as f64));
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let next = &g * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let new_lambda = norm / v.norm();
        v = next.unscale(norm);
        if (new_lambda - lambda).abs() <= 1e-15 * new_lambda {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda.sqrt()
}

/// `sup |Wu|_{M₂} / |u|_{M₁}` by power iteration on `M₁⁻¹ WᴴM₂W`.
pub fn power_weighted(w: &DMatrix<Complex64>, m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> f64 {
    let m1c = m1.map(|v| Complex64::new(v, 0.0));
    let m2c = m2.map(|v| Complex64::new(v, 0.0));
    let inv = m1c.clone().try_inverse().unwrap();
    let g = &inv * w.adjoint() * &m2c * w;
    let mut v = DMatrix::from_fn(w.ncols(), 1, |i, _| Complex64::new(1.0 + i as f64 * 0.37, 0.11 * i as f64));
    for _ in 0..5000 {
        let next = &g * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = next.unscale(norm);
    }
    let num = (v.adjoint() * w.adjoint() * &m2c * w * &v)[(0, 0)].re;
    let den = (v.adjoint() * &m1c * &v)[(0, 0)].re;
    (num / den).sqrt()
}
