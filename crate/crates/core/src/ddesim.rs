//! Method-of-steps integration of `x'(t) = f(x(t), x(t - τ))` and detection of
//! the limit behaviour of the computed trajectory.
//!
//! The mesh is aligned with multiples of `τ` (`h = τ/k`), so every delayed
//! argument of a classical RK4 step is either a mesh node or the midpoint of a
//! computed step, where the cubic Hermite dense output is used.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::goodwin::{g, region_bounds};
use crate::numeric::bisect;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdeError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("state became non-finite at t = {time}")]
    NonfiniteState { time: f64 },
    #[error("initial history is outside the region: {0}")]
    OutsideRegion(String),
}

/// Right-hand side `f(x(t), x(t - τ))`.
pub trait DelayRhs: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], delayed: &[f64], dx: &mut [f64]);
}

/// Closure-backed right-hand side.
pub struct FnRhs<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> DelayRhs for FnRhs<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], delayed: &[f64], dx: &mut [f64]) {
        (self.f)(x, delayed, dx)
    }
}

/// Goodwin cascade with `g(σ) = (1 + |σ|³)⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodwinRhs {
    pub lambda: f64,
}

impl DelayRhs for GoodwinRhs {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64], delayed: &[f64], dx: &mut [f64]) {
        dx[0] = g(delayed[2]) - self.lambda * x[0];
        dx[1] = x[0] - self.lambda * x[1];
        dx[2] = x[1] - self.lambda * x[2];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Interpolation {
    Linear,
    /// Cubic Hermite with finite-difference slopes (Catmull-Rom).
    Cubic,
}

/// Initial function on `[-τ, 0]`, given by uniformly spaced samples.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    samples: Vec<Vec<f64>>,
    interpolation: Interpolation,
}

impl History {
    pub fn constant(state: Vec<f64>) -> Self {
        Self { samples: vec![state.clone(), state], interpolation: Interpolation::Linear }
    }

    /// `samples[0]` is the value at `-τ`, the last one the value at `0`.
    pub fn from_samples(samples: Vec<Vec<f64>>, interpolation: Interpolation) -> Result<Self, DdeError> {
        if samples.len() < 2 {
            return Err(DdeError::InvalidProblem("history needs at least two samples".into()));
        }
        let d = samples[0].len();
        if d == 0 || samples.iter().any(|s| s.len() != d) {
            return Err(DdeError::InvalidProblem("history samples must share a positive dimension".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DdeError::InvalidProblem("history samples must be finite".into()));
        }
        Ok(Self { samples, interpolation })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Value at `s ∈ [-τ, 0]`.
    pub fn eval(&self, tau: f64, s: f64, out: &mut [f64]) {
        let n = self.samples.len() - 1;
        let u = ((s + tau) / tau).clamp(0.0, 1.0) * n as f64;
        let i = (u.floor() as usize).min(n - 1);
        let f = u - i as f64;
        match self.interpolation {
            Interpolation::Linear => {
                for (d, o) in out.iter_mut().enumerate() {
                    *o = (1.0 - f) * self.samples[i][d] + f * self.samples[i + 1][d];
                }
            }
            Interpolation::Cubic => {
                let (h00, h10, h01, h11) = hermite_basis(f);
                for (d, o) in out.iter_mut().enumerate() {
                    let y = |k: usize| self.samples[k][d];
                    let m0 = if i == 0 { y(1) - y(0) } else { 0.5 * (y(i + 1) - y(i - 1)) };
                    let m1 = if i + 1 == n { y(n) - y(n - 1) } else { 0.5 * (y(i + 2) - y(i)) };
                    *o = h00 * y(i) + h10 * m0 + h01 * y(i + 1) + h11 * m1;
                }
            }
        }
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2)
}

pub struct DdeProblem<R> {
    pub rhs: R,
    pub delay: f64,
    pub history: History,
}

impl<R: DelayRhs> DdeProblem<R> {
    pub fn new(rhs: R, delay: f64, history: History) -> Result<Self, DdeError> {
        if !(delay > 0.0 && delay.is_finite()) {
            return Err(DdeError::InvalidProblem(format!("delay must be positive, got {delay}")));
        }
        if history.dim() != rhs.dim() {
            return Err(DdeError::InvalidProblem(format!(
                "history dimension {} does not match system dimension {}",
                history.dim(),
                rhs.dim()
            )));
        }
        Ok(Self { rhs, delay, history })
    }
}

/// Mesh states and slopes with Hermite dense output between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DdeTrajectory {
    delay: f64,
    step: f64,
    dim: usize,
    states: Vec<f64>,
    slopes: Vec<f64>,
    history: History,
}

impl DdeTrajectory {
    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn slope(&self, i: usize) -> &[f64] {
        &self.slopes[i * self.dim..(i + 1) * self.dim]
    }

    /// Hermite interpolant on step `i` at fraction `s ∈ [0, 1]`.
    pub fn segment_eval(&self, i: usize, s: f64, out: &mut [f64]) {
        let (h00, h10, h01, h11) = hermite_basis(s);
        let h = self.step;
        let (x0, x1, f0, f1) = (self.state(i), self.state(i + 1), self.slope(i), self.slope(i + 1));
        for d in 0..self.dim {
            out[d] = h00 * x0[d] + h10 * h * f0[d] + h01 * x1[d] + h11 * h * f1[d];
        }
    }

    /// Dense output at any `t ∈ [-τ, T]`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        if t < 0.0 {
            self.history.eval(self.delay, t, out);
            return;
        }
        let u = t / self.step;
        let i = (u.floor() as usize).min(self.len().saturating_sub(2));
        if self.len() < 2 {
            out.copy_from_slice(self.state(0));
            return;
        }
        self.segment_eval(i, (u - i as f64).clamp(0.0, 1.0), out);
    }

    /// Writes `t,x1,...,xn` rows for every mesh node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|d| format!("x{d}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.state(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", self.time(i), row.join(","))?;
        }
        Ok(())
    }
}

/// Classical RK4 by the method of steps with `h` shrunk to `τ / ⌈τ/h⌉`.
pub fn integrate<R: DelayRhs>(prob: &DdeProblem<R>, h: f64, horizon: f64) -> Result<DdeTrajectory, DdeError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DdeError::InvalidProblem(format!("step must be positive, got {h}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DdeError::InvalidProblem(format!("horizon must be positive, got {horizon}")));
    }
    let tau = prob.delay;
    let ratio = tau / h;
    let k = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() }.max(1.0) as usize;
    let h = tau / k as f64;
    let steps = {
        let r = horizon / h;
        if (r - r.round()).abs() < 1e-9 { r.round() } else { r.ceil() }.max(1.0) as usize
    };
    let dim = prob.rhs.dim();
    let mut traj = DdeTrajectory {
        delay: tau,
        step: h,
        dim,
        states: Vec::with_capacity((steps + 1) * dim),
        slopes: Vec::with_capacity((steps + 1) * dim),
        history: prob.history.clone(),
    };

    let mut x = vec![0.0; dim];
    let mut delayed = vec![0.0; dim];
    let mut f = vec![0.0; dim];
    prob.history.eval(tau, 0.0, &mut x);
    prob.history.eval(tau, -tau, &mut delayed);
    prob.rhs.eval(&x, &delayed, &mut f);
    traj.states.extend_from_slice(&x);
    traj.slopes.extend_from_slice(&f);

    let (mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut mid = vec![0.0; dim];
    let mut end = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    for i in 0..steps {
        // delayed arguments at t_i + h/2 - τ and t_{i+1} - τ
        if i >= k {
            traj.segment_eval(i - k, 0.5, &mut mid);
        } else {
            prob.history.eval(tau, (i as f64 + 0.5) * h - tau, &mut mid);
        }
        if i + 1 >= k {
            end.copy_from_slice(traj.state(i + 1 - k));
        } else {
            prob.history.eval(tau, (i + 1) as f64 * h - tau, &mut end);
        }
        let k1 = traj.slope(i).to_vec();
        x.copy_from_slice(traj.state(i));

        for d in 0..dim {
            stage[d] = x[d] + 0.5 * h * k1[d];
        }
        prob.rhs.eval(&stage, &mid, &mut k2);
        for d in 0..dim {
            stage[d] = x[d] + 0.5 * h * k2[d];
        }
        prob.rhs.eval(&stage, &mid, &mut k3);
        for d in 0..dim {
            stage[d] = x[d] + h * k3[d];
        }
        prob.rhs.eval(&stage, &end, &mut k4);
        for d in 0..dim {
            x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        prob.rhs.eval(&x, &end, &mut f);
        if x.iter().chain(f.iter()).any(|v| !v.is_finite()) {
            return Err(DdeError::NonfiniteState { time: (i + 1) as f64 * h });
        }
        traj.states.extend_from_slice(&x);
        traj.slopes.extend_from_slice(&f);
    }
    Ok(traj)
}

/// Hyperplane `x[component] = level`, crossed in the increasing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    pub component: usize,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    /// Returns before this time (in units of the delay) are ignored.
    pub transient_delays: f64,
    pub point_tolerance: f64,
    /// Successive return distances must shrink by at least this factor.
    pub contraction_threshold: f64,
    pub min_returns: usize,
    /// Time tolerance of the crossing bisection on the dense output.
    pub crossing_tolerance: f64,
    /// Relative level below which return distances count as converged.
    pub noise_floor: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            transient_delays: 2.0,
            point_tolerance: 1e-6,
            contraction_threshold: 0.98,
            min_returns: 5,
            crossing_tolerance: 1e-12,
            noise_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum OrbitVerdict {
    ConvergedToPoint {
        limit: Vec<f64>,
        final_distance: f64,
    },
    ConvergedToPeriodicOrbit {
        period: f64,
        contraction_ratio: f64,
        section: Section,
        returns: usize,
        final_return_distance: f64,
    },
    Inconclusive {
        reason: String,
    },
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn window_distance(traj: &DdeTrajectory, target: &[f64], from: f64, to: f64) -> f64 {
    (0..traj.len())
        .filter(|&i| {
            let t = traj.time(i);
            t >= from && t <= to
        })
        .map(|i| distance(traj.state(i), target))
        .fold(0.0, f64::max)
}

/// Rising crossings of the section after `t_min`, located by bisection on the dense output.
pub fn section_returns(traj: &DdeTrajectory, section: Section, t_min: f64, tol: f64) -> Vec<(f64, Vec<f64>)> {
    let c = section.component;
    let mut out = Vec::new();
    let mut buf = vec![0.0; traj.dim()];
    for i in 0..traj.len().saturating_sub(1) {
        if traj.time(i + 1) < t_min {
            continue;
        }
        let (a, b) = (traj.state(i)[c] - section.level, traj.state(i + 1)[c] - section.level);
        if !(a < 0.0 && b >= 0.0) {
            continue;
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let rel_tol = tol / traj.step();
        while hi - lo > rel_tol {
            let m = 0.5 * (lo + hi);
            traj.segment_eval(i, m, &mut buf);
            if buf[c] - section.level < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        let s = 0.5 * (lo + hi);
        traj.segment_eval(i, s, &mut buf);
        let t = traj.time(i) + s * traj.step();
        if t >= t_min {
            out.push((t, buf.clone()));
        }
    }
    out
}

/// Decides whether the trajectory settles at `φ₀` or on a periodic orbit.
pub fn detect_limit(traj: &DdeTrajectory, phi0: &[f64], section: Section, cfg: &DetectConfig) -> OrbitVerdict {
    let tau = traj.delay();
    let horizon = traj.horizon();
    let transient = cfg.transient_delays * tau;
    if horizon <= transient {
        return OrbitVerdict::Inconclusive { reason: "horizon shorter than the transient".into() };
    }

    let window = 2.0 * tau;
    let final_d = window_distance(traj, phi0, horizon - window, horizon);
    let earlier_end = 0.75 * horizon;
    let earlier_d = window_distance(traj, phi0, earlier_end - window, earlier_end);
    if final_d < cfg.point_tolerance && final_d <= earlier_d {
        return OrbitVerdict::ConvergedToPoint {
            limit: traj.state(traj.len() - 1).to_vec(),
            final_distance: final_d,
        };
    }

    let returns = section_returns(traj, section, transient, cfg.crossing_tolerance);
    let need = cfg.min_returns + 2;
    if returns.len() < need {
        return OrbitVerdict::Inconclusive { reason: format!("{} section returns, need {need}", returns.len()) };
    }
    let scale = 1.0 + returns.iter().map(|(_, p)| p.iter().map(|v| v.abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    let floor = cfg.noise_floor * scale;
    let dists: Vec<f64> = returns.windows(2).map(|w| distance(&w[0].1, &w[1].1)).collect();

    // last run of `min_returns` contractions with all distances above the floor
    let run = cfg.min_returns;
    let mut found = None;
    for end in (run..dists.len()).rev() {
        let window = &dists[end - run..=end];
        if window.iter().all(|&d| d > floor)
            && window.windows(2).all(|p| p[1] < cfg.contraction_threshold * p[0])
        {
            found = Some(end);
            break;
        }
    }
    let Some(end) = found else {
        return OrbitVerdict::Inconclusive { reason: "return distances do not contract geometrically".into() };
    };
    if dists[end..].iter().any(|&d| d > dists[end] * (1.0 + 1e-9) + floor) {
        return OrbitVerdict::Inconclusive { reason: "return distances grow after contracting".into() };
    }
    let contraction_ratio = (dists[end] / dists[end - run]).powf(1.0 / run as f64);

    let (_, last) = returns.last().expect("returns is non-empty");
    let final_return_distance = *dists.last().expect("distances is non-empty");
    let offset = distance(last, phi0);
    if !(final_return_distance < 1e-3 * offset) {
        return OrbitVerdict::Inconclusive { reason: "returns spiral towards the stationary point".into() };
    }
    let tail = cfg.min_returns.min(returns.len() - 1);
    let period = (returns[returns.len() - 1].0 - returns[returns.len() - 1 - tail].0) / tail as f64;
    OrbitVerdict::ConvergedToPeriodicOrbit {
        period,
        contraction_ratio,
        section,
        returns: returns.len(),
        final_return_distance,
    }
}

fn inside_box(x: &[f64], bounds: &[(f64, f64); 3]) -> bool {
    x.iter().zip(bounds).all(|(v, (lo, hi))| *v >= 0.0 && lo < v && v < hi)
}

/// Whether every mesh state stays in the open box `W_β` and the positivity cone.
///
/// The initial history samples must lie in `W_β`.
pub fn check_invariance(traj: &DdeTrajectory, beta: f64, lambda: f64) -> Result<bool, DdeError> {
    if traj.dim() != 3 {
        return Err(DdeError::InvalidProblem("invariance is defined for the three-stage system".into()));
    }
    let bounds = region_bounds(beta, lambda);
    if let Some(bad) = traj.history().samples().iter().find(|s| !inside_box(s, &bounds)) {
        return Err(DdeError::OutsideRegion(format!("{bad:?}")));
    }
    Ok((0..traj.len()).all(|i| inside_box(traj.state(i), &bounds)))
}

/// Crossing time of `x[c] = level` on step `i`, for callers that need the raw
/// bisection on a single segment.
pub fn crossing_fraction(traj: &DdeTrajectory, i: usize, section: Section) -> f64 {
    let mut buf = vec![0.0; traj.dim()];
    bisect(
        |s| {
            traj.segment_eval(i, s, &mut buf);
            buf[section.component] - section.level
        },
        0.0,
        1.0,
    )
}
