//! The ergodic-maker operator (EMO), its inverse, and the mean-ergodicity
//! diagnostic.
//!
//! A log path is split as `Y = y0 + D + R` with `D_t = ∫ mu ds` and
//! `R_t = ∫ sigma dW`. The EMO maps it to
//!
//! ```text
//! Z = (W_T / T^beta) * D + (1 / T^beta) * R
//! ```
//!
//! dropping `y0` entirely. The inverse needs the `(D, R)` split of `Z`,
//! since the scalar path alone does not determine it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{cumulative_trapezoid, trapezoid, Moments};
use crate::stochastic::{
    path_seed, simulate_wiener, GbmParams, ItoParams, PathKind, SamplePath, TimeGrid, WienerPath,
};

/// Smallest admissible inhibition degree (exclusive).
pub const MIN_BETA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmoConfig {
    pub beta: f64,
    pub horizon: f64,
    pub w_terminal: f64,
}

impl EmoConfig {
    pub fn new(beta: f64, horizon: f64, w_terminal: f64) -> Result<Self> {
        let cfg = Self {
            beta,
            horizon,
            w_terminal,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Horizon and terminal value taken from a simulated Wiener path.
    pub fn from_wiener(beta: f64, wiener: &WienerPath) -> Result<Self> {
        Self::new(beta, wiener.grid().horizon(), wiener.terminal())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > MIN_BETA) {
            return Err(invalid(
                "beta",
                format!("must exceed 3/2, got {}", self.beta),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(
                "horizon",
                format!("must be > 0, got {}", self.horizon),
            ));
        }
        if !self.w_terminal.is_finite() {
            return Err(invalid("w_terminal", "must be finite"));
        }
        Ok(())
    }

    /// `T^beta`.
    pub fn scale(&self) -> f64 {
        self.horizon.powf(self.beta)
    }
}

/// `y0 + D + R` split of a log path.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedPath {
    grid: TimeGrid,
    pub y0: f64,
    drift_part: Vec<f64>,
    mart_part: Vec<f64>,
}

impl DecomposedPath {
    pub fn from_parts(
        grid: TimeGrid,
        y0: f64,
        drift_part: Vec<f64>,
        mart_part: Vec<f64>,
    ) -> Result<Self> {
        if drift_part.len() != grid.len() || mart_part.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "components of length {}/{} for a grid of {} points",
                drift_part.len(),
                mart_part.len(),
                grid.len()
            )));
        }
        if drift_part[0] != 0.0 || mart_part[0] != 0.0 {
            return Err(invalid(
                "components",
                "drift and martingale parts must start at 0",
            ));
        }
        Ok(Self {
            grid,
            y0,
            drift_part,
            mart_part,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn drift_part(&self) -> &[f64] {
        &self.drift_part
    }

    pub fn mart_part(&self) -> &[f64] {
        &self.mart_part
    }

    /// `y0 + D + R` pointwise.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.drift_part
            .iter()
            .zip(&self.mart_part)
            .map(|(d, r)| self.y0 + d + r)
            .collect()
    }

    pub fn with_y0(mut self, y0: f64) -> Self {
        self.y0 = y0;
        self
    }
}

/// Splits a log path: `D` by trapezoidal quadrature of the drift along the
/// path, `R` as the residual so that `y0 + D + R` reproduces the input.
pub fn decompose(
    path: &SamplePath,
    params: &ItoParams,
    wiener: &WienerPath,
) -> Result<DecomposedPath> {
    path.expect_kind(PathKind::LogPrice)?;
    path.grid()
        .ensure_same(wiener.grid(), "log path vs Wiener path")?;
    let grid = *path.grid();
    let ys = path.values();
    let mut drift = Vec::with_capacity(ys.len());
    for (k, (t, &y)) in grid.times().zip(ys).enumerate() {
        let mu = params.drift(t, y);
        if !mu.is_finite() {
            return Err(Error::NonFinite {
                what: "drift",
                index: k,
                t,
            });
        }
        drift.push(mu);
    }
    let drift_part = cumulative_trapezoid(&drift, grid.dt());
    let y0 = ys[0];
    let mart_part = ys
        .iter()
        .zip(&drift_part)
        .map(|(y, d)| y - y0 - d)
        .collect();
    Ok(DecomposedPath {
        grid,
        y0,
        drift_part,
        mart_part,
    })
}

fn check_horizon(grid: &TimeGrid, cfg: &EmoConfig) -> Result<()> {
    cfg.validate()?;
    if (grid.horizon() - cfg.horizon).abs() > 1e-12 * cfg.horizon {
        return Err(Error::GridMismatch(format!(
            "EMO horizon {} differs from path horizon {}",
            cfg.horizon,
            grid.horizon()
        )));
    }
    Ok(())
}

/// The `(D, R)` split of `Z`: `(W_T/T^beta) D` and `R/T^beta`, with zero
/// constant.
pub fn emo_components(dec: &DecomposedPath, cfg: &EmoConfig) -> Result<DecomposedPath> {
    check_horizon(&dec.grid, cfg)?;
    let scale = cfg.scale();
    let drift_coef = cfg.w_terminal / scale;
    Ok(DecomposedPath {
        grid: dec.grid,
        y0: 0.0,
        drift_part: dec.drift_part.iter().map(|d| drift_coef * d).collect(),
        mart_part: dec.mart_part.iter().map(|r| r / scale).collect(),
    })
}

pub fn apply_emo(dec: &DecomposedPath, cfg: &EmoConfig) -> Result<SamplePath> {
    let parts = emo_components(dec, cfg)?;
    let values = parts
        .drift_part
        .iter()
        .zip(&parts.mart_part)
        .map(|(d, r)| d + r)
        .collect();
    SamplePath::new(dec.grid, values, PathKind::ZProcess)
}

/// Inverse EMO: `c + (T^beta / W_T) D_z + T^beta R_z`, where `z_parts`
/// is the split of `z` produced by [`emo_components`].
pub fn apply_iemo(
    z: &SamplePath,
    c: f64,
    cfg: &EmoConfig,
    z_parts: &DecomposedPath,
) -> Result<SamplePath> {
    z.expect_kind(PathKind::ZProcess)?;
    z.grid()
        .ensure_same(&z_parts.grid, "Z path vs its decomposition")?;
    check_horizon(z.grid(), cfg)?;
    if cfg.w_terminal == 0.0 {
        return Err(Error::Singular("IEMO divides by W_T = 0".into()));
    }
    let scale_z = z
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for (k, ((v, d), r)) in z
        .values()
        .iter()
        .zip(&z_parts.drift_part)
        .zip(&z_parts.mart_part)
        .enumerate()
    {
        if (v - (d + r)).abs() > 1e-9 * scale_z {
            return Err(invalid(
                "z_parts",
                format!("decomposition does not sum to the Z path at index {k}"),
            ));
        }
    }
    let scale = cfg.scale();
    let drift_coef = scale / cfg.w_terminal;
    let values = z_parts
        .drift_part
        .iter()
        .zip(&z_parts.mart_part)
        .map(|(d, r)| c + drift_coef * d + scale * r)
        .collect();
    SamplePath::new(*z.grid(), values, PathKind::LogPrice)
}

/// Closed-form Z-process of a GBM: `Z_d = (q d W_T + sigma W_d) / T^beta`.
pub fn construct_z_gbm(params: &GbmParams, wiener: &WienerPath, beta: f64) -> Result<SamplePath> {
    params.validate()?;
    let cfg = EmoConfig::from_wiener(beta, wiener)?;
    let scale = cfg.scale();
    let q = params.q();
    let wt = cfg.w_terminal;
    let values = wiener
        .grid()
        .times()
        .zip(wiener.values())
        .map(|(d, w)| (q * d * wt + params.sigma * w) / scale)
        .collect();
    SamplePath::new(*wiener.grid(), values, PathKind::ZProcess)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticCurve {
    pub horizons: Vec<f64>,
    pub values: Vec<f64>,
}

/// Ensemble variance of the path value at every grid index.
fn ensemble_variance(ensemble: &[SamplePath]) -> Result<(TimeGrid, Vec<f64>)> {
    if ensemble.len() < 2 {
        return Err(Error::EnsembleTooSmall {
            got: ensemble.len(),
            need: 2,
        });
    }
    let grid = *ensemble[0].grid();
    for p in &ensemble[1..] {
        grid.ensure_same(p.grid(), "ensemble members")?;
    }
    let mut acc = vec![Moments::default(); grid.len()];
    for p in ensemble {
        for (m, &v) in acc.iter_mut().zip(p.values()) {
            m.push(v);
        }
    }
    Ok((grid, acc.iter().map(Moments::variance).collect()))
}

fn diagnostic_at(grid: &TimeGrid, cov: &[f64], horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(invalid("horizons", format!("must be > 0, got {horizon}")));
    }
    let m = (horizon / grid.dt() + 1e-9).floor() as usize;
    if m > grid.steps() {
        return Err(Error::GridMismatch(format!(
            "horizon {horizon} exceeds the ensemble grid ({})",
            grid.horizon()
        )));
    }
    if m < 1 {
        return Err(invalid(
            "horizons",
            format!("{horizon} is shorter than one grid step"),
        ));
    }
    let weighted: Vec<f64> = (0..=m)
        .map(|k| (1.0 - grid.time(k) / horizon) * cov[k])
        .collect();
    Ok(trapezoid(&weighted, grid.dt()) / horizon)
}

/// `(1/T') ∫_0^{T'} (1 - s/T') Cov(s) ds` for each horizon, where `Cov(s)`
/// is the ensemble variance of the path value at time `s`.
pub fn ergodicity_diagnostic(ensemble: &[SamplePath], horizons: &[f64]) -> Result<DiagnosticCurve> {
    if horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("horizons", "must be strictly increasing"));
    }
    let (grid, cov) = ensemble_variance(ensemble)?;
    let values = horizons
        .iter()
        .map(|&h| diagnostic_at(&grid, &cov, h))
        .collect::<Result<_>>()?;
    Ok(DiagnosticCurve {
        horizons: horizons.to_vec(),
        values,
    })
}

/// Diagnostic curve for GBM-derived Z-processes where each horizon gets its
/// own ensemble with EMO horizon `T = T'`.
pub fn z_ergodicity_curve(
    params: &GbmParams,
    beta: f64,
    horizons: &[f64],
    dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<DiagnosticCurve> {
    if horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("horizons", "must be strictly increasing"));
    }
    let mut values = Vec::with_capacity(horizons.len());
    for (h_idx, &h) in horizons.iter().enumerate() {
        let grid = TimeGrid::new(h, dt)?;
        let stream = path_seed(master_seed, h_idx as u64);
        let ensemble = (0..n_paths)
            .map(|i| {
                construct_z_gbm(
                    params,
                    &simulate_wiener(grid, path_seed(stream, i as u64)),
                    beta,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(ergodicity_diagnostic(&ensemble, &[h])?.values[0]);
    }
    Ok(DiagnosticCurve {
        horizons: horizons.to_vec(),
        values,
    })
}
