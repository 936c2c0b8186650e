//! Solvers for `U_tau = (eta / 2) U_yy` on a uniform grid: direct
//! convolution with the Gaussian kernel, and finite differences.

use serde::{Deserialize, Serialize};

use super::normal_cdf;
use crate::error::{invalid, Error, Result};

/// `Phi^{-1}(1 - 5e-5)`: a symmetric window of this many standard
/// deviations leaves 1e-4 of kernel mass outside.
const TRUNCATION_QUANTILE: f64 = 3.890_591_886_413_094;
/// Contributions beyond this many standard deviations underflow.
const KERNEL_CUTOFF_SD: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(start.is_finite() && step.is_finite() && step > 0.0) {
            return Err(invalid(
                "grid",
                format!("need finite start and step > 0, got {start}, {step}"),
            ));
        }
        if len < 3 {
            return Err(invalid("grid", format!("need at least 3 nodes, got {len}")));
        }
        Ok(Self { start, step, len })
    }

    /// Grid through the given points, which must be evenly spaced.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        if points.len() < 3 {
            return Err(invalid("grid", "need at least 3 nodes"));
        }
        let step = (points[points.len() - 1] - points[0]) / (points.len() - 1) as f64;
        for (i, &p) in points.iter().enumerate() {
            let expected = points[0] + i as f64 * step;
            if (p - expected).abs() > 1e-9 * step.abs().max(1.0) {
                return Err(invalid("grid", format!("point {i} breaks uniform spacing")));
            }
        }
        Self::new(points[0], step, points.len())
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.node(i))
    }

    /// Linear interpolation of grid values at `y`, clamped to the ends.
    pub fn interpolate(&self, values: &[f64], y: f64) -> f64 {
        let pos = (y - self.start) / self.step;
        if pos <= 0.0 {
            return values[0];
        }
        if pos >= (self.len - 1) as f64 {
            return values[self.len - 1];
        }
        let j = pos.floor() as usize;
        let f = pos - j as f64;
        values[j] + f * (values[j + 1] - values[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatProblem {
    pub eta: f64,
    pub grid: UniformGrid,
    pub initial: Vec<f64>,
    pub tau_end: f64,
}

impl HeatProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.tau_end.is_finite() && self.tau_end >= 0.0) {
            return Err(invalid(
                "tau_end",
                format!("must be >= 0, got {}", self.tau_end),
            ));
        }
        if self.initial.len() != self.grid.len {
            return Err(Error::GridMismatch(format!(
                "{} initial values on a grid of {} nodes",
                self.initial.len(),
                self.grid.len
            )));
        }
        if let Some(i) = self.initial.iter().position(|v| !v.is_finite()) {
            return Err(invalid("initial", format!("non-finite value at node {i}")));
        }
        Ok(())
    }

    /// Standard deviation of the kernel at `tau_end`.
    pub fn spread(&self) -> f64 {
        (self.eta * self.tau_end).sqrt()
    }
}

/// `(2 pi tau eta)^{-1/2} exp(-y^2 / (2 tau eta))`.
pub fn heat_kernel(y: f64, tau: f64, eta: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("must be > 0, got {tau}")));
    }
    if !(eta > 0.0) {
        return Err(invalid("eta", format!("must be > 0, got {eta}")));
    }
    Ok(gaussian(y, (tau * eta).sqrt()))
}

fn gaussian(y: f64, sd: f64) -> f64 {
    let u = y / sd;
    (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

fn std_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `U(y, tau_end) = ∫ K(y - g, tau_end) f(g) dg` on the grid nodes.
///
/// Kernels resolved by the grid (spread at least one step) use the
/// trapezoidal rule on the nodes. Narrower kernels are integrated exactly
/// against the piecewise-linear interpolant of `f`.
pub fn solve_heat_convolution(hp: &HeatProblem) -> Result<Vec<f64>> {
    hp.validate()?;
    if hp.tau_end == 0.0 {
        return Ok(hp.initial.clone());
    }
    let sd = hp.spread();
    let g = &hp.grid;
    let half_width = 0.5 * (g.end() - g.start);
    let required = TRUNCATION_QUANTILE * sd;
    if half_width < required {
        return Err(Error::GridTooNarrow {
            half_width,
            required,
        });
    }
    let reach = ((KERNEL_CUTOFF_SD * sd) / g.step).ceil() as usize + 1;
    let f = &hp.initial;
    let n = g.len;
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            let x = g.node(i);
            if sd >= g.step {
                let mut acc = 0.0;
                for j in lo..=hi {
                    let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                    acc += w * gaussian(x - g.node(j), sd) * f[j];
                }
                acc * g.step
            } else {
                let mut acc = 0.0;
                for j in lo..hi {
                    let slope = (f[j + 1] - f[j]) / g.step;
                    let c0 = f[j] + slope * (x - g.node(j));
                    let c1 = slope * sd;
                    let u0 = (g.node(j) - x) / sd;
                    let u1 = (g.node(j + 1) - x) / sd;
                    acc += c0 * (normal_cdf(u1) - normal_cdf(u0))
                        + c1 * (std_normal_pdf(u0) - std_normal_pdf(u1));
                }
                acc
            }
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    Explicit,
    #[default]
    CrankNicolson,
}

/// Dirichlet data at the two ends of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// Ends held at their initial values.
    #[default]
    Frozen,
    /// Ends follow the exact evolution of `(alpha + beta y) e^{-a y}`,
    /// fitted to the two outermost nodes on each side.
    FarField { a: f64 },
}

fn far_field(hp: &HeatProblem, a: f64) -> impl Fn(usize, f64) -> f64 + '_ {
    let g = &hp.grid;
    let fit = move |i0: usize, i1: usize| {
        let (y0, y1) = (g.node(i0), g.node(i1));
        let g0 = hp.initial[i0] * (a * y0).exp();
        let g1 = hp.initial[i1] * (a * y1).exp();
        let slope = (g1 - g0) / (y1 - y0);
        (g0 - slope * y0, slope)
    };
    let left = fit(0, 1);
    let right = fit(g.len - 2, g.len - 1);
    move |i: usize, tau: f64| {
        let (alpha, beta) = if i == 0 { left } else { right };
        let y = g.node(i);
        (-a * y + 0.5 * hp.eta * a * a * tau).exp() * (alpha + beta * (y - hp.eta * a * tau))
    }
}

/// Finite-difference march to `tau_end` with steps of at most `dt`.
pub fn solve_heat_fd(
    hp: &HeatProblem,
    dt: f64,
    scheme: FdScheme,
    boundary: Boundary,
) -> Result<Vec<f64>> {
    hp.validate()?;
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if hp.tau_end == 0.0 {
        return Ok(hp.initial.clone());
    }
    let steps = (hp.tau_end / dt).ceil().max(1.0) as usize;
    let k = hp.tau_end / steps as f64;
    let h = hp.grid.step;
    let ratio = hp.eta * k / (h * h);
    if scheme == FdScheme::Explicit && ratio > 1.0 {
        return Err(Error::Unstable { ratio });
    }
    let n = hp.grid.len;
    let edge: Box<dyn Fn(usize, f64) -> f64 + '_> = match boundary {
        Boundary::Frozen => Box::new(|i: usize, _| hp.initial[i]),
        Boundary::FarField { a } => Box::new(far_field(hp, a)),
    };
    // r = (eta/2) k / h^2
    let r = 0.5 * ratio;
    let mut u = hp.initial.clone();
    let mut next = vec![0.0; n];
    match scheme {
        FdScheme::Explicit => {
            for step in 1..=steps {
                let tau = step as f64 * k;
                for i in 1..n - 1 {
                    next[i] = u[i] + r * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
                }
                next[0] = edge(0, tau);
                next[n - 1] = edge(n - 1, tau);
                std::mem::swap(&mut u, &mut next);
            }
        }
        FdScheme::CrankNicolson => {
            // (1 + r) u_i - r/2 (u_{i-1} + u_{i+1}) = (1 - r) v_i + r/2 (v_{i-1} + v_{i+1})
            let m = n - 2;
            let off = -0.5 * r;
            let diag = 1.0 + r;
            let mut c_prime = vec![0.0; m];
            let mut d = vec![0.0; m];
            for step in 1..=steps {
                let tau = step as f64 * k;
                let left = edge(0, tau);
                let right = edge(n - 1, tau);
                for j in 0..m {
                    let i = j + 1;
                    d[j] = (1.0 - r) * u[i] + 0.5 * r * (u[i - 1] + u[i + 1]);
                }
                d[0] -= off * left;
                d[m - 1] -= off * right;
                // Thomas algorithm
                c_prime[0] = off / diag;
                d[0] /= diag;
                for j in 1..m {
                    let denom = diag - off * c_prime[j - 1];
                    c_prime[j] = off / denom;
                    d[j] = (d[j] - off * d[j - 1]) / denom;
                }
                for j in (0..m - 1).rev() {
                    d[j] -= c_prime[j] * d[j + 1];
                }
                next[0] = left;
                next[n - 1] = right;
                next[1..n - 1].copy_from_slice(&d);
                std::mem::swap(&mut u, &mut next);
            }
        }
    }
    Ok(u)
}
