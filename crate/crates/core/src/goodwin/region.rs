use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::classify::{classify_point, ClassifyConfig, Label, PointClassification};
use super::GoodwinError;

/// `count` evenly spaced values from `start` to `end`, written `start:end:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(start: f64, end: f64, count: usize) -> Result<Self, GoodwinError> {
        if count == 0 {
            return Err(GoodwinError::InvalidParameter("axis resolution must be at least 1".into()));
        }
        if !(start > 0.0 && end >= start && end.is_finite()) {
            return Err(GoodwinError::InvalidParameter(format!(
                "axis range must satisfy 0 < start <= end, got {start}:{end}"
            )));
        }
        Ok(Self { start, end, count })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.start
        } else if i + 1 == self.count {
            self.end
        } else {
            self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64
        }
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.end - self.start) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }
}

impl FromStr for AxisRange {
    type Err = GoodwinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || GoodwinError::InvalidParameter(format!("expected start:end:count, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].trim().parse().map_err(|_| bad())?;
        let end = parts[1].trim().parse().map_err(|_| bad())?;
        let count = parts[2].trim().parse().map_err(|_| bad())?;
        Self::new(start, end, count)
    }
}

/// Classification lattice over `(τ, λ)`; cells are stored row by row in `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub tau: AxisRange,
    pub lambda: AxisRange,
    pub cells: Vec<PointClassification>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegionSummary {
    pub stable_point: usize,
    pub stable_periodic_orbit: usize,
    pub uncertified: usize,
    /// Cells satisfying `κ₀ τ³ e^{λτ} < 84.2`.
    pub closed_form_region: usize,
    /// Cells where certification and the closed-form inequality disagree.
    pub closed_form_disagreements: usize,
}

/// Classifies every lattice cell on the current rayon pool; the result does
/// not depend on the number of workers.
pub fn sweep_region(tau: AxisRange, lambda: AxisRange, cfg: &ClassifyConfig) -> RegionGrid {
    let cells = (0..tau.count * lambda.count)
        .into_par_iter()
        .map(|idx| {
            let (j, i) = (idx / tau.count, idx % tau.count);
            classify_point(tau.value(i), lambda.value(j), cfg)
        })
        .collect();
    RegionGrid { tau, lambda, cells }
}

const BLUE: &str = "#1f77b4";
const ORANGE: &str = "#ff7f0e";
const GRAY: &str = "#cccccc";

fn color(label: Label) -> &'static str {
    match label {
        Label::StablePoint => BLUE,
        Label::StablePeriodicOrbit => ORANGE,
        Label::Uncertified => GRAY,
    }
}

impl RegionGrid {
    pub fn cell(&self, i_tau: usize, j_lambda: usize) -> &PointClassification {
        &self.cells[j_lambda * self.tau.count + i_tau]
    }

    pub fn summary(&self) -> RegionSummary {
        let mut s = RegionSummary {
            stable_point: 0,
            stable_periodic_orbit: 0,
            uncertified: 0,
            closed_form_region: 0,
            closed_form_disagreements: 0,
        };
        for c in &self.cells {
            match c.label {
                Label::StablePoint => s.stable_point += 1,
                Label::StablePeriodicOrbit => s.stable_periodic_orbit += 1,
                Label::Uncertified => s.uncertified += 1,
            }
            s.closed_form_region += usize::from(c.closed_form_inequality);
            s.closed_form_disagreements += usize::from(c.closed_form_inequality != c.is_certified());
        }
        s
    }

    /// Columns `tau,lambda,label,witness_rho,witness_beta,margin`; missing
    /// values are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,lambda,label,witness_rho,witness_beta,margin\n");
        for c in &self.cells {
            let (rho, beta) = match &c.witness {
                Some(w) => (w.rho.to_string(), w.beta.to_string()),
                None => (String::new(), String::new()),
            };
            let margin = c.best_circle_margin.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", c.tau, c.lambda, c.label.as_str(), rho, beta, margin);
        }
        out
    }

    /// 800×600 chart with `τ` horizontal, `λ` vertical and an embedded legend.
    pub fn to_svg(&self) -> String {
        const W: f64 = 800.0;
        const H: f64 = 600.0;
        let (left, right, top, bottom) = (70.0, 610.0, 30.0, 540.0);
        let (pw, ph) = (right - left, bottom - top);
        let (nt, nl) = (self.tau.count as f64, self.lambda.count as f64);
        let (cw, ch) = (pw / nt, ph / nl);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
        for j in 0..self.lambda.count {
            for i in 0..self.tau.count {
                let x = left + i as f64 * cw;
                let y = bottom - (j + 1) as f64 * ch;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.3}" y="{y:.3}" width="{cw:.3}" height="{ch:.3}" fill="{}"/>"#,
                    color(self.cell(i, j).label)
                );
            }
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=5 {
            let f = k as f64 / 5.0;
            let tv = self.tau.start + f * (self.tau.end - self.tau.start);
            let lv = self.lambda.start + f * (self.lambda.end - self.lambda.start);
            let x = left + f * pw;
            let y = bottom - f * ph;
            let _ = writeln!(s, r#"<line x1="{x:.3}" y1="{bottom}" x2="{x:.3}" y2="{:.3}" stroke="black"/>"#, bottom + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle">{tv:.3}</text>"#, bottom + 20.0);
            let _ = writeln!(s, r#"<line x1="{:.3}" y1="{y:.3}" x2="{left}" y2="{y:.3}" stroke="black"/>"#, left - 5.0);
            let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{lv:.3}</text>"#, left - 8.0, y + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-size="16">τ</text>"#,
            left + pw / 2.0,
            bottom + 45.0
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.3}" text-anchor="middle" font-size="16">λ</text>"#,
            top + ph / 2.0
        );
        let legend = [
            (BLUE, "stable stationary point"),
            (ORANGE, "stable periodic orbit"),
            (GRAY, "uncertified"),
        ];
        for (k, (fill, text)) in legend.iter().enumerate() {
            let y = top + 10.0 + 25.0 * k as f64;
            let _ = writeln!(s, r#"<rect x="625" y="{y}" width="15" height="15" fill="{fill}" stroke="black"/>"#);
            let _ = writeln!(s, r#"<text x="646" y="{:.3}">{text}</text>"#, y + 12.0);
        }
        s.push_str("</svg>\n");
        s
    }
}
