//! Seeded path generation on uniform time grids.
//!
//! Every path is a pure function of its inputs and a `u64` seed. Ensembles
//! derive one seed per path from a master seed with [`path_seed`], so the
//! i-th path never depends on how many other paths were drawn before it.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform grid `t_k = k * dt` on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    dt: f64,
    n: usize,
}

impl TimeGrid {
    /// Builds the grid with `n = horizon / dt` steps. The ratio must be an
    /// integer up to rounding and give at least two steps.
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be > 0, got {dt}")));
        }
        let ratio = horizon / dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon {horizon} is not an integer multiple of step {dt}"
            )));
        }
        Self::with_steps(horizon, n as usize)
    }

    pub fn with_steps(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be > 0, got {horizon}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 steps, got {n}"
            )));
        }
        Ok(Self {
            horizon,
            dt: horizon / n as f64,
            n,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps; the grid has `steps() + 1` points.
    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |k| self.time(k))
    }

    pub(crate) fn ensure_same(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self.n != other.n || (self.horizon - other.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::GridMismatch(format!(
                "{what}: ({} steps over {}) vs ({} steps over {})",
                self.n, self.horizon, other.n, other.horizon
            )));
        }
        Ok(())
    }
}

/// Mixes a master seed and a path index into an independent per-path seed
/// (SplitMix64 finalizer).
pub fn path_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard Wiener path sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    grid: TimeGrid,
    w: Vec<f64>,
    seed: u64,
}

impl WienerPath {
    /// Wraps externally supplied values (fixtures, recovered paths). `w[0]`
    /// must be zero.
    pub fn from_values(grid: TimeGrid, w: Vec<f64>) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                w.len(),
                grid.len()
            )));
        }
        if w[0] != 0.0 {
            return Err(invalid("w", format!("w[0] must be 0, got {}", w[0])));
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Wiener value",
                index: i,
                t: grid.time(i),
            });
        }
        Ok(Self { grid, w, seed: 0 })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn terminal(&self) -> f64 {
        self.w[self.w.len() - 1]
    }

    pub fn increment(&self, k: usize) -> f64 {
        self.w[k + 1] - self.w[k]
    }

    pub fn to_path(&self) -> SamplePath {
        SamplePath {
            grid: self.grid,
            values: self.w.clone(),
            kind: PathKind::Wiener,
        }
    }
}

pub fn simulate_wiener(grid: TimeGrid, seed: u64) -> WienerPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = grid.dt().sqrt();
    let mut w = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    w.push(acc);
    for _ in 0..grid.steps() {
        let z: f64 = StandardNormal.sample(&mut rng);
        acc += scale * z;
        w.push(acc);
    }
    WienerPath { grid, w, seed }
}

/// Constant-coefficient geometric Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub s0: f64,
}

impl GbmParams {
    pub fn new(mu: f64, sigma: f64, s0: f64) -> Result<Self> {
        let p = Self { mu, sigma, s0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(invalid("s0", format!("must be > 0, got {}", self.s0)));
        }
        Ok(())
    }

    /// Log-drift `mu - sigma^2 / 2`.
    pub fn q(&self) -> f64 {
        self.mu - 0.5 * self.sigma * self.sigma
    }
}

type Coefficient = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift and volatility of `dY = mu(t, Y) dt + sigma(t, Y) dW`.
#[derive(Clone)]
pub struct ItoParams {
    drift: Coefficient,
    volatility: Coefficient,
    pub y0: f64,
}

impl ItoParams {
    pub fn new<D, V>(drift: D, volatility: V, y0: f64) -> Self
    where
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            drift: Arc::new(drift),
            volatility: Arc::new(volatility),
            y0,
        }
    }

    pub fn constant(mu: f64, sigma: f64, y0: f64) -> Self {
        Self::new(move |_, _| mu, move |_, _| sigma, y0)
    }

    /// The log-price dynamics of a GBM: drift `q`, volatility `sigma`,
    /// start `ln s0`.
    pub fn from_gbm(params: &GbmParams) -> Self {
        Self::constant(params.q(), params.sigma, params.s0.ln())
    }

    pub fn drift(&self, t: f64, x: f64) -> f64 {
        (self.drift)(t, x)
    }

    pub fn volatility(&self, t: f64, x: f64) -> f64 {
        (self.volatility)(t, x)
    }
}

impl fmt::Debug for ItoParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ItoParams")
            .field("y0", &self.y0)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Wiener,
    Price,
    LogPrice,
    ZProcess,
    Theta,
}

impl PathKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathKind::Wiener => "wiener",
            PathKind::Price => "price",
            PathKind::LogPrice => "logprice",
            PathKind::ZProcess => "zprocess",
            PathKind::Theta => "theta",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A realized path on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
    kind: PathKind,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if kind == PathKind::Price {
            if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(Error::NonPositive { index: i, value: v });
            }
        }
        Ok(Self { grid, values, kind })
    }

    pub fn from_fn(grid: TimeGrid, kind: PathKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.times().map(f).collect();
        Self::new(grid, values, kind)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn expect_kind(&self, expected: PathKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::WrongKind {
                expected: expected.as_str(),
                found: self.kind.as_str(),
            });
        }
        Ok(())
    }

    /// Linear interpolation at `t`, clamped to the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let dt = self.grid.dt();
        let n = self.grid.steps();
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.grid.horizon() {
            return self.values[n];
        }
        let pos = t / dt;
        let k = (pos.floor() as usize).min(n - 1);
        let frac = pos - k as f64;
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }
}

/// Exact GBM solution `S_k = s0 exp(q t_k + sigma w_k)`.
pub fn simulate_gbm(params: &GbmParams, wiener: &WienerPath) -> SamplePath {
    let q = params.q();
    let values = wiener
        .grid()
        .times()
        .zip(wiener.values())
        .map(|(t, w)| params.s0 * (q * t + params.sigma * w).exp())
        .collect();
    SamplePath {
        grid: *wiener.grid(),
        values,
        kind: PathKind::Price,
    }
}

/// Euler-Maruyama integration of the log process.
pub fn simulate_ito(params: &ItoParams, wiener: &WienerPath) -> Result<SamplePath> {
    let grid = *wiener.grid();
    let dt = grid.dt();
    let mut values = Vec::with_capacity(grid.len());
    let mut y = params.y0;
    if !y.is_finite() {
        return Err(Error::NonFinite {
            what: "initial value",
            index: 0,
            t: 0.0,
        });
    }
    values.push(y);
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let mu = params.drift(t, y);
        if !mu.is_finite() {
            return Err(Error::NonFinite {
                what: "drift",
                index: k,
                t,
            });
        }
        let sigma = params.volatility(t, y);
        if !sigma.is_finite() {
            return Err(Error::NonFinite {
                what: "volatility",
                index: k,
                t,
            });
        }
        if sigma < 0.0 {
            return Err(invalid(
                "sigma",
                format!("negative volatility {sigma} at index {k} (t = {t})"),
            ));
        }
        y += mu * dt + sigma * wiener.increment(k);
        values.push(y);
    }
    Ok(SamplePath {
        grid,
        values,
        kind: PathKind::LogPrice,
    })
}

pub fn log_path(price: &SamplePath) -> Result<SamplePath> {
    price.expect_kind(PathKind::Price)?;
    let mut values = Vec::with_capacity(price.values.len());
    for (i, &v) in price.values.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositive { index: i, value: v });
        }
        values.push(v.ln());
    }
    Ok(SamplePath {
        grid: price.grid,
        values,
        kind: PathKind::LogPrice,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(TimeGrid::new(0.0, 0.1).is_err());
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, -0.5).is_err());
        assert!(TimeGrid::new(1.0, 1.0).is_err());
        assert!(TimeGrid::new(1.0, 0.3).is_err());
    }

    #[test]
    fn grid_times_end_on_horizon() {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        assert_eq!(g.steps(), 1000);
        assert_eq!(g.time(1000), 1.0);
        assert_eq!(g.time(500), 0.5);
        let ts: Vec<f64> = g.times().collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!((g.dt() * g.steps() as f64 - g.horizon()).abs() <= f64::EPSILON);
    }

    #[test]
    fn wiener_three_points_starting_at_zero() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        let w = simulate_wiener(g, 7);
        assert_eq!(w.values().len(), 3);
        assert_eq!(w.values()[0], 0.0);
        assert_eq!(w.seed(), 7);
    }

    #[test]
    fn wiener_is_deterministic_per_seed() {
        let g = TimeGrid::new(1.0, 0.01).unwrap();
        assert_eq!(simulate_wiener(g, 11), simulate_wiener(g, 11));
        assert_ne!(
            simulate_wiener(g, 11).values(),
            simulate_wiener(g, 12).values()
        );
    }

    #[test]
    fn path_seeds_differ_by_index() {
        let seeds: Vec<u64> = (0..1000).map(|i| path_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_ne!(path_seed(1, 0), path_seed(2, 0));
    }

    #[test]
    fn gbm_deterministic_limit() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        let zero = WienerPath::from_values(g, vec![0.0; 3]).unwrap();
        let p = GbmParams {
            mu: 0.1,
            sigma: 1e-300,
            s0: 100.0,
        };
        let s = simulate_gbm(&p, &zero);
        assert!((s.values()[2] - 110.517_091_807_564_76).abs() < 1e-9);
    }

    #[test]
    fn gbm_zero_log_drift_stays_flat() {
        let g = TimeGrid::new(2.0, 0.25).unwrap();
        let zero = WienerPath::from_values(g, vec![0.0; g.len()]).unwrap();
        let p = GbmParams::new(0.125, 0.5, 50.0).unwrap();
        assert_eq!(p.q(), 0.0);
        let s = simulate_gbm(&p, &zero);
        assert!(s.values().iter().all(|&v| v == 50.0));
    }

    #[test]
    fn gbm_matches_closed_form_pointwise() {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        let w = simulate_wiener(g, 3);
        let p = GbmParams::new(0.1, 0.2, 100.0).unwrap();
        let s = simulate_gbm(&p, &w);
        for k in 0..g.len() {
            let t = k as f64 / 1000.0;
            let expected = 100.0 * ((0.1 - 0.02) * t + 0.2 * w.values()[k]).exp();
            assert!((s.values()[k] - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn gbm_params_validation() {
        assert!(GbmParams::new(0.1, 0.0, 100.0).is_err());
        assert!(GbmParams::new(0.1, 0.2, -1.0).is_err());
        assert!(GbmParams::new(f64::NAN, 0.2, 1.0).is_err());
        assert!((GbmParams::new(0.1, 0.2, 1.0).unwrap().q() - 0.08).abs() < 1e-15);
    }

    #[test]
    fn ito_zero_coefficients_is_constant() {
        let g = TimeGrid::new(1.0, 0.01).unwrap();
        let w = simulate_wiener(g, 5);
        let y = simulate_ito(&ItoParams::constant(0.0, 0.0, 1.5), &w).unwrap();
        assert!(y.values().iter().all(|&v| v == 1.5));
        assert_eq!(y.kind(), PathKind::LogPrice);
    }

    #[test]
    fn ito_constant_coefficients_are_exact() {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        let w = simulate_wiener(g, 9);
        let y = simulate_ito(&ItoParams::constant(0.3, 0.4, 2.0), &w).unwrap();
        for (k, t) in g.times().enumerate() {
            let expected = 2.0 + 0.3 * t + 0.4 * w.values()[k];
            assert!((y.values()[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn ito_reports_non_finite_drift() {
        let g = TimeGrid::new(1.0, 0.1).unwrap();
        let w = simulate_wiener(g, 1);
        let p = ItoParams::new(
            |t, _| if t > 0.45 { f64::NAN } else { 0.0 },
            |_, _| 0.1,
            0.0,
        );
        match simulate_ito(&p, &w) {
            Err(Error::NonFinite {
                what: "drift",
                index,
                ..
            }) => assert_eq!(index, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_of_constant_paths() {
        let g = TimeGrid::new(1.0, 0.25).unwrap();
        let ones = SamplePath::new(g, vec![1.0; 5], PathKind::Price).unwrap();
        assert!(log_path(&ones).unwrap().values().iter().all(|&v| v == 0.0));
        let es = SamplePath::new(g, vec![std::f64::consts::E; 5], PathKind::Price).unwrap();
        assert!(log_path(&es)
            .unwrap()
            .values()
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn log_of_gbm_is_linear_in_wiener() {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        let w = simulate_wiener(g, 21);
        let p = GbmParams::new(0.1, 0.2, 100.0).unwrap();
        let y = log_path(&simulate_gbm(&p, &w)).unwrap();
        for (k, t) in g.times().enumerate() {
            let expected = 100f64.ln() + p.q() * t + 0.2 * w.values()[k];
            assert!((y.values()[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn log_rejects_wrong_kind() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        let w = simulate_wiener(g, 1).to_path();
        assert!(matches!(log_path(&w), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn value_at_interpolates() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        let p = SamplePath::new(g, vec![0.0, 1.0, 3.0], PathKind::ZProcess).unwrap();
        assert_eq!(p.value_at(0.25), 0.5);
        assert_eq!(p.value_at(0.75), 2.0);
        assert_eq!(p.value_at(2.0), 3.0);
    }
}
