use std::f64::consts::PI;

use crate::numeric::{golden_section_max, linspace, logspace};

/// Settings for the adaptive frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Log-spaced points on `(0, Ω*]`; a uniform grid resolving the delay
    /// oscillation is merged in.
    pub initial_samples: usize,
    /// Local extrema refined by golden-section search.
    pub refine_peaks: usize,
    /// Bracket width (relative to `1 + Ω*`) at which refinement stops.
    pub tolerance: f64,
    /// Absolute margin a strict inequality must clear to count as certified.
    pub safety_margin: f64,
    /// Cut-offs above this are treated as unavailable.
    pub max_cutoff: f64,
    /// Cap on the uniform part of the grid.
    pub max_uniform_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            initial_samples: 512,
            refine_peaks: 3,
            tolerance: 1e-12,
            safety_margin: 1e-6,
            max_cutoff: 1e7,
            max_uniform_samples: 1 << 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Peak {
    pub value: f64,
    pub at: f64,
    pub samples: usize,
}

pub(crate) fn sweep_grid(cutoff: f64, delay_scale: f64, cfg: &SweepConfig) -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend(logspace(cutoff * 1e-6, cutoff, cfg.initial_samples.max(2)));
    let mut step = cutoff / cfg.initial_samples.max(2) as f64;
    if delay_scale > 0.0 {
        step = step.min(PI / (8.0 * delay_scale));
    }
    let uniform = ((cutoff / step).ceil() as usize + 1).min(cfg.max_uniform_samples.max(2));
    grid.extend(linspace(0.0, cutoff, uniform));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Maximises `f` over `[0, cutoff]`: grid evaluation followed by golden-section
/// refinement around the largest local maxima.
pub(crate) fn sweep_max<E, F>(mut f: F, cutoff: f64, delay_scale: f64, cfg: &SweepConfig) -> Result<Peak, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let grid = sweep_grid(cutoff, delay_scale, cfg);
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    for &w in &grid {
        values.push(f(w)?);
    }
    let mut samples = n;
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
            let right = if i + 1 == n { f64::NEG_INFINITY } else { values[i + 1] };
            values[i] >= left && values[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut best = Peak { value: values[peaks[0]], at: grid[peaks[0]], samples };
    let tol = cfg.tolerance * (1.0 + cutoff);
    let mut failure = None;
    for &i in peaks.iter().take(cfg.refine_peaks) {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(n - 1)];
        if hi <= lo {
            continue;
        }
        let (at, value) = golden_section_max(
            |w| {
                samples += 1;
                match f(w) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                }
            },
            lo,
            hi,
            tol,
        );
        if let Some(e) = failure.take() {
            return Err(e);
        }
        if value > best.value {
            best.value = value;
            best.at = at;
        }
    }
    best.samples = samples;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_zero_and_cutoff() {
        let g = sweep_grid(10.0, 1.0, &SweepConfig::default());
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn finds_narrow_interior_peak() {
        let f = |w: f64| -> Result<f64, ()> { Ok(1.0 / (1.0 + 400.0 * (w - 3.217).powi(2))) };
        let p = sweep_max(f, 10.0, 0.0, &SweepConfig::default()).unwrap();
        assert!((p.value - 1.0).abs() < 1e-12);
        assert!((p.at - 3.217).abs() < 1e-5);
    }

    #[test]
    fn propagates_evaluation_errors() {
        let f = |w: f64| if w > 5.0 { Err("pole") } else { Ok(w) };
        assert_eq!(sweep_max(f, 10.0, 0.0, &SweepConfig::default()), Err("pole"));
    }
}
