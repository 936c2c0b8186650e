//! Circle rotation `x -> x + theta (mod 1)` and its ergodic diagnostics:
//! Birkhoff averages, equidistribution frequencies and Kac return times.
//! Also the stochastic angle process built from a Z-path and a strike.
//!
//! Points are kept in the additive coordinate on `[0, 1)`; the
//! multiplicative point on the unit circle is `exp(2 pi i x)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::ergodic::EmoConfig;
use crate::error::{invalid, Error, Result};
use crate::numerics::{Moments, NeumaierSum};
use crate::pricing::gamma_delta;
use crate::stochastic::{PathKind, SamplePath, TimeGrid};

/// A point of the circle in the additive coordinate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CirclePoint(f64);

impl CirclePoint {
    /// Reduces any finite real into `[0, 1)`.
    pub fn new(x: f64) -> Self {
        Self(reduce(x))
    }

    pub fn x(&self) -> f64 {
        self.0
    }

    /// `(cos 2 pi x, sin 2 pi x)`.
    pub fn to_complex(&self) -> (f64, f64) {
        let a = TAU * self.0;
        (a.cos(), a.sin())
    }
}

fn reduce(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RotationAngle(pub f64);

impl RotationAngle {
    pub fn sqrt2() -> Self {
        Self(std::f64::consts::SQRT_2)
    }

    pub fn sqrt2_minus_one() -> Self {
        Self(std::f64::consts::SQRT_2 - 1.0)
    }

    /// `(sqrt 5 - 1) / 2`.
    pub fn golden_conjugate() -> Self {
        Self((5f64.sqrt() - 1.0) / 2.0)
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// `k * theta mod 1` with the product's rounding error carried along.
    fn multiple(&self, k: u64) -> f64 {
        let kf = k as f64;
        let hi = kf * self.0;
        let lo = kf.mul_add(self.0, -hi);
        reduce(reduce(hi) + lo)
    }
}

pub fn rotate(p: CirclePoint, angle: RotationAngle) -> CirclePoint {
    CirclePoint::new(p.0 + angle.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub step: u64,
    pub point: CirclePoint,
}

/// `R^k(x)` for a single `k`, computed from `k * theta` directly.
pub fn orbit_point(p: CirclePoint, angle: RotationAngle, k: u64) -> CirclePoint {
    CirclePoint::new(p.0 + angle.multiple(k))
}

/// The first `n` orbit points `R^0(x), ..., R^{n-1}(x)`, each tagged with
/// its step so that angles differing by whole turns stay distinguishable.
pub fn orbit(p: CirclePoint, angle: RotationAngle, n: usize) -> Result<Vec<OrbitPoint>> {
    if n == 0 {
        return Err(invalid("n", "orbit length must be >= 1"));
    }
    Ok((0..n as u64)
        .map(|k| OrbitPoint {
            step: k,
            point: orbit_point(p, angle, k),
        })
        .collect())
}

/// A continuous periodic function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `c0 + sum_m cos[m-1] cos(2 pi m x) + sin[m-1] sin(2 pi m x)`.
    TrigPolynomial {
        constant: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    /// Samples on the uniform grid `j / (len - 1)`, linearly interpolated.
    Tabulated { samples: Vec<f64> },
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction::TrigPolynomial {
            constant: c,
            cos: vec![],
            sin: vec![],
        }
    }

    pub fn sin_2pi() -> Self {
        TestFunction::TrigPolynomial {
            constant: 0.0,
            cos: vec![],
            sin: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::TrigPolynomial { constant, cos, sin } => {
                if !constant.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return Err(invalid("phi", "coefficients must be finite"));
                }
            }
            TestFunction::Tabulated { samples } => {
                if samples.len() < 2 {
                    return Err(invalid("phi", "need at least two samples"));
                }
                let (start, end) = (samples[0], samples[samples.len() - 1]);
                if (start - end).abs() > 1e-12 {
                    return Err(Error::NotPeriodic { start, end });
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::TrigPolynomial { constant, cos, sin } => {
                let mut acc = *constant;
                for (m, c) in cos.iter().enumerate() {
                    acc += c * (TAU * (m + 1) as f64 * x).cos();
                }
                for (m, s) in sin.iter().enumerate() {
                    acc += s * (TAU * (m + 1) as f64 * x).sin();
                }
                acc
            }
            TestFunction::Tabulated { samples } => {
                let cells = (samples.len() - 1) as f64;
                let pos = reduce(x) * cells;
                let j = (pos.floor() as usize).min(samples.len() - 2);
                let f = pos - j as f64;
                samples[j] + f * (samples[j + 1] - samples[j])
            }
        }
    }

    /// `∫_0^1 phi`.
    pub fn integral(&self) -> f64 {
        match self {
            TestFunction::TrigPolynomial { constant, .. } => *constant,
            TestFunction::Tabulated { samples } => {
                crate::numerics::trapezoid(samples, 1.0 / (samples.len() - 1) as f64)
            }
        }
    }
}

/// `(1/n) sum_{k<n} phi(R^k x)`.
pub fn birkhoff_average(
    phi: &TestFunction,
    p: CirclePoint,
    angle: RotationAngle,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    phi.validate()?;
    if let TestFunction::TrigPolynomial { constant, cos, sin } = phi {
        if cos.iter().chain(sin).all(|&c| c == 0.0) {
            return Ok(*constant);
        }
    }
    let sum: NeumaierSum = (0..n as u64)
        .map(|k| phi.eval(orbit_point(p, angle, k).x()))
        .collect();
    Ok(sum.value() / n as f64)
}

/// Fraction of the first `n` orbit points in `[a, b)`.
pub fn equidistribution_test(
    angle: RotationAngle,
    a: f64,
    b: f64,
    x0: CirclePoint,
    n: usize,
) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(invalid(
            "interval",
            format!("need 0 <= a < b <= 1, got [{a}, {b})"),
        ));
    }
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    let hits = (0..n as u64)
        .filter(|&k| {
            let x = orbit_point(x0, angle, k).x();
            a <= x && x < b
        })
        .count();
    Ok(hits as f64 / n as f64)
}

/// Mean number of steps between successive visits of the orbit of `x0` to
/// the arc `[a, b)`, over `n_returns` returns.
pub fn kac_return_time(
    angle: RotationAngle,
    a: f64,
    b: f64,
    x0: CirclePoint,
    n_returns: usize,
) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(invalid(
            "arc",
            format!("need 0 <= a < b <= 1, got [{a}, {b})"),
        ));
    }
    if n_returns == 0 {
        return Err(invalid("n_returns", "must be >= 1"));
    }
    if !(a <= x0.x() && x0.x() < b) {
        return Err(invalid(
            "x0",
            format!("{} is not in the arc [{a}, {b})", x0.x()),
        ));
    }
    let max_gap = (1e7 as u64).max((1000.0 / (b - a)) as u64);
    let mut last = 0u64;
    let mut k = 0u64;
    let mut total = 0u64;
    for _ in 0..n_returns {
        loop {
            k += 1;
            if k - last > max_gap {
                return Err(Error::Singular(format!(
                    "orbit did not return to [{a}, {b}) within {max_gap} steps"
                )));
            }
            let x = orbit_point(x0, angle, k).x();
            if a <= x && x < b {
                break;
            }
        }
        total += k - last;
        last = k;
    }
    Ok(total as f64 / n_returns as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl ThetaPath {
    pub fn to_path(&self) -> Result<SamplePath> {
        SamplePath::new(self.grid, self.values.clone(), PathKind::Theta)
    }

    /// Circle position `theta mod 1` at each grid point.
    pub fn circle_positions(&self) -> Vec<CirclePoint> {
        self.values.iter().map(|&v| CirclePoint::new(v)).collect()
    }
}

/// `theta_d = Z_d + (W_T / T^beta) ln(1 - K / S_d)`.
pub fn theta_process(
    z: &SamplePath,
    price: &SamplePath,
    strike: f64,
    cfg: &EmoConfig,
) -> Result<ThetaPath> {
    z.expect_kind(PathKind::ZProcess)?;
    price.expect_kind(PathKind::Price)?;
    z.grid().ensure_same(price.grid(), "Z path vs price path")?;
    cfg.validate()?;
    let coef = cfg.w_terminal / cfg.scale();
    let mut gamma = Vec::with_capacity(z.values().len());
    for (i, &s) in price.values().iter().enumerate() {
        let g = gamma_delta(s, strike).map_err(|e| match e {
            Error::NotExercisable { price, strike, .. } => Error::NotExercisable {
                index: i,
                price,
                strike,
            },
            other => other,
        })?;
        gamma.push(g);
    }
    let values = z
        .values()
        .iter()
        .zip(&gamma)
        .map(|(zv, g)| zv + coef * g)
        .collect();
    Ok(ThetaPath {
        grid: *z.grid(),
        values,
        gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaMomentRow {
    pub delta: f64,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// `|mean| <= 3 * std_error`.
    pub mean_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaMomentReport {
    pub paths: usize,
    pub rows: Vec<ThetaMomentRow>,
    pub all_ok: bool,
}

/// Ensemble mean and variance of the angle process at the given anchors.
/// Only the zero-mean property is checked; variances are reported.
pub fn theta_moment_check(ensemble: &[ThetaPath], anchors: &[f64]) -> Result<ThetaMomentReport> {
    let Some(first) = ensemble.first() else {
        return Ok(ThetaMomentReport {
            paths: 0,
            rows: vec![],
            all_ok: true,
        });
    };
    for p in &ensemble[1..] {
        first.grid.ensure_same(&p.grid, "angle ensemble")?;
    }
    let rows = anchors
        .iter()
        .map(|&delta| {
            if !(0.0..=first.grid.horizon()).contains(&delta) {
                return Err(invalid("anchors", format!("{delta} is outside the grid")));
            }
            let k = (delta / first.grid.dt()).round() as usize;
            let m: Moments = ensemble.iter().map(|p| p.values[k]).collect();
            Ok(ThetaMomentRow {
                delta,
                mean: m.mean(),
                variance: m.variance(),
                std_error: m.std_error(),
                mean_ok: m.mean().abs() <= 3.0 * m.std_error(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThetaMomentReport {
        paths: ensemble.len(),
        all_ok: rows.iter().all(|r| r.mean_ok),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotate_examples() {
        assert_eq!(rotate(CirclePoint::new(0.25), RotationAngle(0.5)).x(), 0.75);
        assert_eq!(rotate(CirclePoint::new(0.3), RotationAngle(0.0)).x(), 0.3);
        let r = rotate(CirclePoint::new(0.9), RotationAngle::sqrt2_minus_one());
        assert!((r.x() - 0.314_213_562_373_095_1).abs() < 1e-12);
    }

    #[test]
    fn reduction_stays_in_unit_interval() {
        for x in [-1e-18, -0.0, 1.0, 2.0, -3.25, 1e9 + 0.5] {
            let p = CirclePoint::new(x);
            assert!((0.0..1.0).contains(&p.x()), "{x} -> {}", p.x());
        }
    }

    #[test]
    fn rational_orbit() {
        let o = orbit(CirclePoint::new(0.0), RotationAngle(0.5), 4).unwrap();
        let xs: Vec<f64> = o.iter().map(|p| p.point.x()).collect();
        assert_eq!(xs, vec![0.0, 0.5, 0.0, 0.5]);
        assert_eq!(o[2].step, 2);
        assert!(orbit(CirclePoint::new(0.0), RotationAngle(0.5), 0).is_err());
    }

    #[test]
    fn repeated_rotation_matches_direct_orbit() {
        let angle = RotationAngle::sqrt2();
        let start = CirclePoint::new(0.123);
        let mut p = start;
        for k in 1..=100_000u64 {
            p = rotate(p, angle);
            if k % 10_000 == 0 {
                let direct = orbit_point(start, angle, k).x();
                let d = (p.x() - direct).abs();
                assert!(d.min(1.0 - d) < 1e-9, "k={k}");
            }
        }
    }

    #[test]
    fn sqrt2_orbit_visits_every_millesimal_cell() {
        let mut seen = vec![false; 1000];
        for k in 0..100_000u64 {
            let x = orbit_point(CirclePoint::new(0.0), RotationAngle::sqrt2(), k).x();
            seen[(x * 1000.0) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn birkhoff_of_constant_is_exact() {
        let v = birkhoff_average(
            &TestFunction::constant(0.37),
            CirclePoint::new(0.2),
            RotationAngle::sqrt2(),
            1000,
        )
        .unwrap();
        assert_eq!(v, 0.37);
    }

    #[test]
    fn birkhoff_of_sine_vanishes() {
        let v = birkhoff_average(
            &TestFunction::sin_2pi(),
            CirclePoint::new(0.0),
            RotationAngle::sqrt2(),
            1_000_000,
        )
        .unwrap();
        assert!(v.abs() <= 1e-3);
    }

    #[test]
    fn birkhoff_of_trig_polynomial_is_constant_term() {
        let phi = TestFunction::TrigPolynomial {
            constant: 0.37,
            cos: vec![0.5, -0.2, 0.1],
            sin: vec![0.3, 0.0, -0.4],
        };
        let v = birkhoff_average(
            &phi,
            CirclePoint::new(0.7),
            RotationAngle::sqrt2(),
            1_000_000,
        )
        .unwrap();
        assert!((v - 0.37).abs() <= 1e-3);
    }

    #[test]
    fn tabulated_needs_periodicity() {
        let bad = TestFunction::Tabulated {
            samples: vec![0.0, 1.0, 0.5],
        };
        assert!(matches!(
            birkhoff_average(&bad, CirclePoint::new(0.0), RotationAngle::sqrt2(), 10),
            Err(Error::NotPeriodic { .. })
        ));
        let tent = TestFunction::Tabulated {
            samples: vec![0.0, 1.0, 0.0],
        };
        assert!((tent.integral() - 0.5).abs() < 1e-15);
        let v = birkhoff_average(
            &tent,
            CirclePoint::new(0.0),
            RotationAngle::golden_conjugate(),
            200_000,
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-3);
    }

    #[test]
    fn equidistribution_full_interval() {
        let f = equidistribution_test(RotationAngle::sqrt2(), 0.0, 1.0, CirclePoint::new(0.3), 17)
            .unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn equidistribution_sqrt2() {
        let f = equidistribution_test(
            RotationAngle::sqrt2(),
            0.2,
            0.5,
            CirclePoint::new(0.0),
            1_000_000,
        )
        .unwrap();
        assert!((f - 0.3).abs() <= 0.005);
    }

    #[test]
    fn equidistribution_rational_angle_misses_interval() {
        let f = equidistribution_test(RotationAngle(0.5), 0.1, 0.4, CirclePoint::new(0.0), 1000)
            .unwrap();
        assert_eq!(f, 0.0);
        assert!(
            equidistribution_test(RotationAngle(0.5), 0.4, 0.4, CirclePoint::new(0.0), 10).is_err()
        );
    }

    #[test]
    fn kac_full_circle() {
        let m =
            kac_return_time(RotationAngle::sqrt2(), 0.0, 1.0, CirclePoint::new(0.5), 100).unwrap();
        assert_eq!(m, 1.0);
    }

    #[test]
    fn kac_quarter_arc() {
        let m = kac_return_time(
            RotationAngle::golden_conjugate(),
            0.0,
            0.25,
            CirclePoint::new(0.0),
            100_000,
        )
        .unwrap();
        assert!((3.92..=4.08).contains(&m), "{m}");
    }

    #[test]
    fn kac_tenth_arc() {
        let m = kac_return_time(
            RotationAngle::golden_conjugate(),
            0.3,
            0.4,
            CirclePoint::new(0.3),
            100_000,
        )
        .unwrap();
        assert!((m - 10.0).abs() <= 0.2, "{m}");
    }

    #[test]
    fn kac_argument_checks() {
        let a = RotationAngle::sqrt2();
        assert!(kac_return_time(a, 0.0, 0.5, CirclePoint::new(0.1), 0).is_err());
        assert!(kac_return_time(a, 0.0, 0.5, CirclePoint::new(0.7), 10).is_err());
        assert_eq!(
            kac_return_time(RotationAngle(0.5), 0.0, 0.1, CirclePoint::new(0.05), 10).unwrap(),
            2.0
        );
    }

    #[test]
    fn orbit_increments_are_the_angle() {
        let angle = RotationAngle::golden_conjugate();
        let o = orbit(CirclePoint::new(0.41), angle, 1000).unwrap();
        for w in o.windows(2) {
            let inc = reduce(w[1].point.x() - w[0].point.x());
            let d = (inc - angle.0).abs();
            assert!(d.min(1.0 - d) < 1e-12);
        }
    }

    fn flat_grid() -> TimeGrid {
        TimeGrid::new(1.0, 0.5).unwrap()
    }

    #[test]
    fn theta_hand_example() {
        let g = flat_grid();
        let z = SamplePath::new(g, vec![0.0; 3], PathKind::ZProcess).unwrap();
        let s = SamplePath::new(g, vec![100.0; 3], PathKind::Price).unwrap();
        let cfg = EmoConfig::new(2.0, 1.0, 1.0).unwrap();
        let th = theta_process(&z, &s, 50.0, &cfg).unwrap();
        for v in th.values {
            assert!((v + std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_tends_to_z_for_small_strike() {
        let g = flat_grid();
        let z = SamplePath::new(g, vec![0.0, 0.2, -0.1], PathKind::ZProcess).unwrap();
        let s = SamplePath::new(g, vec![100.0, 120.0, 90.0], PathKind::Price).unwrap();
        let cfg = EmoConfig::new(2.0, 1.0, 0.8).unwrap();
        let th = theta_process(&z, &s, 1e-12, &cfg).unwrap();
        for (a, b) in th.values.iter().zip(z.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn theta_requires_exercisability() {
        let g = flat_grid();
        let z = SamplePath::new(g, vec![0.0; 3], PathKind::ZProcess).unwrap();
        let s = SamplePath::new(g, vec![100.0, 50.0, 120.0], PathKind::Price).unwrap();
        let cfg = EmoConfig::new(2.0, 1.0, 1.0).unwrap();
        match theta_process(&z, &s, 50.0, &cfg) {
            Err(Error::NotExercisable { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn moment_check_on_constant_path() {
        let th = ThetaPath {
            grid: flat_grid(),
            values: vec![0.2; 3],
            gamma: vec![0.0; 3],
        };
        let rep = theta_moment_check(&[th], &[0.5]).unwrap();
        assert_eq!(rep.rows[0].variance, 0.0);
    }
}
