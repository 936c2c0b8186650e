//! Option pricing under the Z-process: the rotation call, the closed-form
//! ergodic Black-Scholes price and its heat-equation counterpart.

pub mod heat;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
pub use heat::{
    heat_kernel, solve_heat_convolution, solve_heat_fd, Boundary, FdScheme, HeatProblem,
    UniformGrid,
};

/// `Phi(x)` via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln(1 - K/S)`, defined only when the option is exercisable (`S > K > 0`).
pub fn gamma_delta(s: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(invalid(
            "strike",
            format!("must be finite and > 0, got {k}"),
        ));
    }
    if !(s > k) || !s.is_finite() {
        return Err(Error::NotExercisable {
            index: 0,
            price: s,
            strike: k,
        });
    }
    Ok((-k / s).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingInputs {
    /// Short rate per year.
    pub r: f64,
    pub strike: f64,
    pub horizon: f64,
    pub beta: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Time to maturity, `tau = T - delta`.
    pub tau: f64,
    /// Level of the Z-process.
    pub z: f64,
    pub w_terminal: f64,
    /// Spot at contract purchase.
    pub spot_t0: f64,
    /// Underlying price entering `d`.
    pub underlying: f64,
    pub valuation_time: f64,
}

impl PricingInputs {
    fn validate_common(&self) -> Result<()> {
        let fields = [
            ("r", self.r),
            ("strike", self.strike),
            ("horizon", self.horizon),
            ("beta", self.beta),
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("tau", self.tau),
            ("z", self.z),
            ("w_terminal", self.w_terminal),
            ("spot_t0", self.spot_t0),
            ("underlying", self.underlying),
            ("valuation_time", self.valuation_time),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if self.horizon <= 0.0 {
            return Err(invalid(
                "horizon",
                format!("must be > 0, got {}", self.horizon),
            ));
        }
        if self.beta <= crate::ergodic::MIN_BETA {
            return Err(invalid(
                "beta",
                format!("must exceed 1.5, got {}", self.beta),
            ));
        }
        if self.sigma <= 0.0 {
            return Err(invalid("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if self.strike <= 0.0 {
            return Err(invalid(
                "strike",
                format!("must be > 0, got {}", self.strike),
            ));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.horizon - self.tau
    }

    pub fn t_beta(&self) -> f64 {
        self.horizon.powf(self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationCallPrice {
    pub price: f64,
    pub gamma: f64,
    pub negative: bool,
}

/// `e^{-rt} ((W_T / T^beta) ln(1 - K/S_t0) - K)`, reported as is.
pub fn price_rotation_call(inp: &PricingInputs) -> Result<RotationCallPrice> {
    inp.validate_common()?;
    if inp.valuation_time < 0.0 {
        return Err(invalid(
            "valuation_time",
            format!("must be >= 0, got {}", inp.valuation_time),
        ));
    }
    let gamma = gamma_delta(inp.spot_t0, inp.strike)?;
    let price =
        (-inp.r * inp.valuation_time).exp() * (inp.w_terminal / inp.t_beta() * gamma - inp.strike);
    Ok(RotationCallPrice {
        price,
        gamma,
        negative: price < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedCoefficients {
    pub delta: f64,
    pub q: f64,
    pub b_delta: f64,
    pub eta: f64,
    pub p: f64,
    pub lambda: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
}

impl DerivedCoefficients {
    /// `e^{ay + b tau}`.
    pub fn reconstruction_ab(&self, tau: f64) -> f64 {
        (self.a * self.y + self.b * tau).exp()
    }

    /// `exp{(y(lambda - 2) + p(lambda - 2)^2 / 4) / (2 lambda)}`.
    pub fn reconstruction_expanded(&self) -> f64 {
        let l2 = self.lambda - 2.0;
        ((self.y * l2 + 0.25 * self.p * l2 * l2) / (2.0 * self.lambda)).exp()
    }

    /// Variance of the kernel entering `d`.
    pub fn spread_variance(&self) -> f64 {
        2.0 * self.p * self.lambda
    }
}

pub fn derive_coefficients(inp: &PricingInputs) -> Result<DerivedCoefficients> {
    inp.validate_common()?;
    let delta = inp.delta();
    if !(delta > 0.0) {
        return Err(invalid(
            "tau",
            format!("need tau < horizon, got delta = {delta}"),
        ));
    }
    if inp.z == 0.0 {
        return Err(invalid("z", "must be nonzero"));
    }
    if !(inp.r > 0.0) {
        return Err(invalid("r", format!("must be > 0, got {}", inp.r)));
    }
    let tb = inp.t_beta();
    let q = inp.mu - 0.5 * inp.sigma * inp.sigma;
    let b_delta = q / delta.powf(inp.beta - 1.0) + inp.sigma / delta.powf(inp.beta);
    let b2 = b_delta * b_delta;
    let eta = b2 * tb * tb;
    if !(eta > 0.0) {
        return Err(Error::Singular(format!("eta = {eta}")));
    }
    let rz = inp.r * inp.z;
    let abs_rz = inp.r * inp.z.abs();
    let p = abs_rz * inp.tau * tb;
    let lambda = tb * b2 / abs_rz;
    let y = tb * inp.z - q * (inp.w_terminal - delta);
    let a = 0.5 - rz / (b2 * tb);
    let b = (4.0 * rz * tb - b2 * tb * tb) / 8.0 - rz * rz / (2.0 * b2) - inp.r;
    Ok(DerivedCoefficients {
        delta,
        q,
        b_delta,
        eta,
        p,
        lambda,
        y,
        a,
        b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicBsPrice {
    pub price: f64,
    pub d: f64,
    pub n_d: f64,
    pub payoff_factor: f64,
    pub reconstruction: f64,
    pub negative: bool,
}

fn validate_ergodic(inp: &PricingInputs) -> Result<DerivedCoefficients> {
    let c = derive_coefficients(inp)?;
    if !(inp.strike > 1.0) {
        return Err(invalid(
            "strike",
            format!("must exceed 1 so that ln K > 0, got {}", inp.strike),
        ));
    }
    if !(inp.underlying > 0.0) {
        return Err(invalid(
            "underlying",
            format!("must be > 0, got {}", inp.underlying),
        ));
    }
    if !(c.spread_variance() > 0.0) {
        return Err(invalid("tau", "need 2 p lambda > 0"));
    }
    Ok(c)
}

/// `e^{-r tau} exp{(y(lambda-2) + p(lambda-2)^2/4)/(2 lambda)} (|z| - ln K) N[d]`
/// with `d = ln(X / ln K) / sqrt(2 p lambda)`.
pub fn price_ergodic_bs(inp: &PricingInputs) -> Result<ErgodicBsPrice> {
    let c = validate_ergodic(inp)?;
    let ln_k = inp.strike.ln();
    let d = (inp.underlying / ln_k).ln() / c.spread_variance().sqrt();
    let n_d = normal_cdf(d);
    let payoff_factor = inp.z.abs() - ln_k;
    let reconstruction = c.reconstruction_expanded();
    let price = (-inp.r * inp.tau).exp() * reconstruction * payoff_factor * n_d;
    Ok(ErgodicBsPrice {
        price,
        d,
        n_d,
        payoff_factor,
        reconstruction,
        negative: price < 0.0,
    })
}

/// Affine map `y = T^beta z - q (W_T - delta)` and its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfVariables {
    pub scale: f64,
    pub shift: f64,
}

impl ChangeOfVariables {
    pub fn new(inp: &PricingInputs) -> Self {
        let q = inp.mu - 0.5 * inp.sigma * inp.sigma;
        Self {
            scale: inp.t_beta(),
            shift: q * (inp.w_terminal - inp.delta()),
        }
    }

    pub fn to_y(&self, z: f64) -> f64 {
        self.scale * z - self.shift
    }

    pub fn to_z(&self, y: f64) -> f64 {
        (y + self.shift) / self.scale
    }
}

/// Heat problem in `y` with `U(y, 0) = max(|z| - ln K, 0) e^{-a y}` over
/// an evenly spaced z-grid.
pub fn transform_bsp_to_heat(inp: &PricingInputs, z_grid: &[f64]) -> Result<HeatProblem> {
    let c = derive_coefficients(inp)?;
    let zg = UniformGrid::from_points(z_grid)?;
    if zg.step <= 0.0 {
        return Err(invalid("z_grid", "must be increasing"));
    }
    let map = ChangeOfVariables::new(inp);
    let grid = UniformGrid::new(map.to_y(zg.start), map.scale * zg.step, zg.len)?;
    let ln_k = inp.strike.ln();
    let initial = zg
        .nodes()
        .zip(grid.nodes())
        .map(|(z, y)| (z.abs() - ln_k).max(0.0) * (-c.a * y).exp())
        .collect();
    Ok(HeatProblem {
        eta: c.eta,
        grid,
        initial,
        tau_end: inp.tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeatSolver {
    #[default]
    Convolution,
    CrankNicolson {
        steps: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeOptions {
    pub nodes: usize,
    /// Half-width of the spatial window in kernel standard deviations.
    pub width_sd: f64,
    pub solver: HeatSolver,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            nodes: 4001,
            width_sd: 10.0,
            solver: HeatSolver::Convolution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdePrice {
    pub price: f64,
    pub heat_value: f64,
    pub reconstruction: f64,
    /// `e^{ay + b tau}`, kept for comparison with `reconstruction`.
    pub reconstruction_ab: f64,
    pub nodes: usize,
}

/// Numerical counterpart of [`price_ergodic_bs`]: the step payoff
/// `(|z| - ln K) H(xi - ln ln K)` is diffused in log-underlying `xi` for a
/// kernel variance of `2 p lambda`, read off at `ln X`, then reconstructed
/// and discounted.
pub fn price_via_pde(inp: &PricingInputs, opts: &PdeOptions) -> Result<PdePrice> {
    let c = validate_ergodic(inp)?;
    if opts.nodes < 3 {
        return Err(invalid(
            "nodes",
            format!("need at least 3, got {}", opts.nodes),
        ));
    }
    if !(opts.width_sd > 0.0) {
        return Err(invalid(
            "width_sd",
            format!("must be > 0, got {}", opts.width_sd),
        ));
    }
    let payoff = inp.z.abs() - inp.strike.ln();
    let threshold = inp.strike.ln().ln();
    let x_eval = inp.underlying.ln();
    let sd = c.spread_variance().sqrt();
    let lo = threshold.min(x_eval) - opts.width_sd * sd;
    let hi = threshold.max(x_eval) + opts.width_sd * sd;
    let h = (hi - lo) / (opts.nodes - 1) as f64;
    let below = ((threshold - lo) / h).ceil() as usize;
    let start = threshold - below as f64 * h;
    let len = ((hi - start) / h).ceil() as usize + 1;
    let grid = UniformGrid::new(start, h, len)?;
    let initial = (0..len)
        .map(|i| match i.cmp(&below) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => 0.5 * payoff,
            std::cmp::Ordering::Greater => payoff,
        })
        .collect();
    let hp = HeatProblem {
        eta: c.eta,
        grid,
        initial,
        tau_end: c.spread_variance() / c.eta,
    };
    let u = match opts.solver {
        HeatSolver::Convolution => solve_heat_convolution(&hp)?,
        HeatSolver::CrankNicolson { steps } => {
            if steps == 0 {
                return Err(invalid("steps", "must be > 0"));
            }
            solve_heat_fd(
                &hp,
                hp.tau_end / steps as f64,
                FdScheme::CrankNicolson,
                Boundary::Frozen,
            )?
        }
    };
    let heat_value = grid.interpolate(&u, x_eval);
    let reconstruction = c.reconstruction_expanded();
    let price = (-inp.r * inp.tau).exp() * reconstruction * heat_value;
    Ok(PdePrice {
        price,
        heat_value,
        reconstruction,
        reconstruction_ab: c.reconstruction_ab(inp.tau),
        nodes: len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example() -> PricingInputs {
        PricingInputs {
            r: 0.05,
            strike: std::f64::consts::E.exp(),
            horizon: 1.0,
            beta: 2.0,
            mu: 0.1,
            sigma: 0.2,
            tau: 0.5,
            z: 0.05,
            w_terminal: 0.3,
            spot_t0: 100.0,
            underlying: 100.0,
            valuation_time: 0.0,
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!(normal_cdf(-40.0) < 1e-300);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() <= 1e-12);
        assert!((normal_cdf(-1.0) + normal_cdf(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_delta(100.0, 50.0).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(gamma_delta(100.0, 1e-12).unwrap().abs() < 1e-13);
        assert!(matches!(
            gamma_delta(50.0, 50.0),
            Err(Error::NotExercisable { .. })
        ));
        assert!(gamma_delta(50.0, 0.0).is_err());
    }

    #[test]
    fn rotation_call_examples() {
        let mut inp = example();
        inp.valuation_time = 1.0;
        inp.w_terminal = 1.0;
        inp.strike = 50.0;
        let c = price_rotation_call(&inp).unwrap();
        let expected = (-0.05f64).exp() * (0.5f64.ln() - 50.0);
        assert!((c.price - expected).abs() < 1e-12);
        assert!((c.price + 48.2215).abs() < 1e-3);
        assert!(c.negative);

        inp.w_terminal = 0.0;
        let c = price_rotation_call(&inp).unwrap();
        assert!((c.price + (-0.05f64).exp() * 50.0).abs() < 1e-12);

        inp.strike = 1e-12;
        inp.w_terminal = 1.0;
        assert!(price_rotation_call(&inp).unwrap().price.abs() < 1e-11);

        inp.strike = 200.0;
        assert!(matches!(
            price_rotation_call(&inp),
            Err(Error::NotExercisable { .. })
        ));
        inp.strike = 50.0;
        inp.valuation_time = -1.0;
        assert!(price_rotation_call(&inp).is_err());
    }

    #[test]
    fn coefficients_on_example() {
        let c = derive_coefficients(&example()).unwrap();
        assert!((c.q - 0.08).abs() < 1e-15);
        assert!((c.b_delta - 0.96).abs() < 1e-14);
        assert!((c.eta - 0.9216).abs() < 1e-13);
        assert!((c.p - 0.00125).abs() < 1e-15);
        assert!((c.lambda - 368.64).abs() < 1e-10);
        assert!((c.y - 0.066).abs() < 1e-14);
        assert!((c.a - 0.497_287_326_388_888_9).abs() < 1e-12);
        assert!((c.b + 0.163_953_390_842_013_89).abs() < 1e-12);
        assert!((c.lambda * 0.05 * 0.05 - c.b_delta.powi(2)).abs() < 1e-12);
        // 2 p lambda equals twice eta * tau
        assert!((c.spread_variance() - 2.0 * c.eta * 0.5).abs() < 1e-12);
    }

    #[test]
    fn coefficient_errors() {
        let mut inp = example();
        inp.z = 0.0;
        assert!(derive_coefficients(&inp).is_err());
        let mut inp = example();
        inp.r = 0.0;
        assert!(derive_coefficients(&inp).is_err());
        let mut inp = example();
        inp.tau = 1.0;
        assert!(derive_coefficients(&inp).is_err());
        let mut inp = example();
        inp.beta = 1.5;
        assert!(derive_coefficients(&inp).is_err());
    }

    #[test]
    fn ergodic_bs_example() {
        let out = price_ergodic_bs(&example()).unwrap();
        assert!((out.d - 3.755_385_610_4).abs() < 1e-8);
        assert!((out.n_d - 0.999_913_46).abs() < 1e-8);
        assert!((out.price + 2.846_658_565_115).abs() < 1e-9);
        assert!(out.negative);
    }

    #[test]
    fn ergodic_bs_zero_payoff_factor() {
        let mut inp = example();
        inp.z = inp.strike.ln();
        assert_eq!(price_ergodic_bs(&inp).unwrap().price, 0.0);
        inp.strike = 0.5;
        assert!(price_ergodic_bs(&inp).is_err());
        let mut inp = example();
        inp.underlying = 0.0;
        assert!(price_ergodic_bs(&inp).is_err());
    }

    #[test]
    fn ergodic_bs_monotone_in_underlying() {
        let mut inp = example();
        inp.z = 3.0;
        let mut last = f64::NEG_INFINITY;
        for x in [0.5, 1.0, 2.0, 2.72, 3.0, 5.0, 10.0] {
            inp.underlying = x;
            let p = price_ergodic_bs(&inp).unwrap().price;
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn change_of_variables_round_trip() {
        let map = ChangeOfVariables::new(&example());
        for z in [-3.0, -0.1, 0.0, 0.05, 2.5] {
            assert!((map.to_z(map.to_y(z)) - z).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_initial_condition() {
        let inp = example();
        let ln_k = inp.strike.ln();
        let zs: Vec<f64> = (0..=40).map(|i| ln_k - 1.0 + i as f64 * 0.05).collect();
        let hp = transform_bsp_to_heat(&inp, &zs).unwrap();
        assert!((hp.eta - 0.9216).abs() < 1e-13);
        assert_eq!(hp.initial[20], 0.0);
        assert!(hp.initial[..=20].iter().all(|&v| v == 0.0));
        assert!(hp.initial[21..].iter().all(|&v| v > 0.0));

        // a = 0 when r z = B^2 T^beta / 2
        let mut inp = example();
        let c = derive_coefficients(&inp).unwrap();
        inp.z = c.b_delta.powi(2) * inp.t_beta() / (2.0 * inp.r);
        assert!(derive_coefficients(&inp).unwrap().a.abs() < 1e-14);
        let zs: Vec<f64> = (0..=20).map(|i| 3.0 + i as f64 * 0.1).collect();
        let hp = transform_bsp_to_heat(&inp, &zs).unwrap();
        for (z, u) in zs.iter().zip(&hp.initial) {
            assert!((u - (z - ln_k).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn pde_matches_closed_form_on_example() {
        let inp = example();
        let closed = price_ergodic_bs(&inp).unwrap().price;
        let pde = price_via_pde(&inp, &PdeOptions::default()).unwrap();
        assert!(
            ((pde.price - closed) / closed).abs() < 1e-4,
            "{} vs {}",
            pde.price,
            closed
        );
        let fd = price_via_pde(
            &inp,
            &PdeOptions {
                solver: HeatSolver::CrankNicolson { steps: 400 },
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            ((fd.price - closed) / closed).abs() < 1e-3,
            "{} vs {}",
            fd.price,
            closed
        );
    }

    #[test]
    fn pde_zero_payoff_neighbourhood() {
        let mut inp = example();
        inp.z = inp.strike.ln() + 1e-9;
        assert!(
            price_via_pde(&inp, &PdeOptions::default())
                .unwrap()
                .price
                .abs()
                < 1e-6
        );
    }
}
