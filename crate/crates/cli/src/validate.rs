//! Acceptance criteria with their tolerances. Each criterion is a plain
//! function so the test suite and the `validate` command share one
//! implementation.

use std::f64::consts::{E, PI};
use std::path::Path;

use logergodic::ergodic::{
    apply_emo, apply_iemo, construct_z_gbm, decompose, emo_components, ergodicity_diagnostic,
    z_ergodicity_curve, EmoConfig,
};
use logergodic::pricing::{
    derive_coefficients, price_ergodic_bs, price_rotation_call, price_via_pde,
    solve_heat_convolution, solve_heat_fd, transform_bsp_to_heat, Boundary, FdScheme, HeatProblem,
    PdeOptions, PricingInputs, UniformGrid,
};
use logergodic::rotation::{
    birkhoff_average, equidistribution_test, kac_return_time, CirclePoint, RotationAngle,
    TestFunction,
};
use logergodic::stochastic::{log_path, path_seed, simulate_gbm, simulate_ito, simulate_wiener};
use logergodic::trading::{
    build_excursions, detect_recurrences, trade_profit, IndicatorMode, Side, TradeLedger,
};
use logergodic::{GbmParams, ItoParams, PathKind, SamplePath, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::config::{example_inputs, Config};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub seed: u64,
    pub roundtrip_paths: usize,
    pub roundtrip_max_error: f64,
    pub reversion_paths: usize,
    pub reversion_dt: f64,
    pub reversion_min_fraction: f64,
    pub ergodic_paths: usize,
    pub ergodic_horizon: f64,
    pub ergodic_dt: f64,
    pub ergodic_max: f64,
    /// Time tolerance of the sine fixture, in grid steps.
    pub sine_steps: f64,
    pub profit_rel: f64,
    pub equidistribution_n: usize,
    pub equidistribution_abs: f64,
    pub kac_returns: usize,
    pub kac_rel: f64,
    pub birkhoff_n: usize,
    pub birkhoff_abs: f64,
    pub heat_semigroup_abs: f64,
    pub heat_cross_rel: f64,
    pub pricing_rel: f64,
    pub identity_abs: f64,
    pub rotation_price_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            roundtrip_paths: 200,
            roundtrip_max_error: 1e-10,
            reversion_paths: 1000,
            reversion_dt: 1e-4,
            reversion_min_fraction: 0.99,
            ergodic_paths: 1000,
            ergodic_horizon: 100.0,
            ergodic_dt: 0.01,
            ergodic_max: 1e-3,
            sine_steps: 1.0,
            profit_rel: 1e-12,
            equidistribution_n: 1_000_000,
            equidistribution_abs: 0.005,
            kac_returns: 100_000,
            kac_rel: 0.02,
            birkhoff_n: 1_000_000,
            birkhoff_abs: 1e-3,
            heat_semigroup_abs: 1e-4,
            heat_cross_rel: 1e-3,
            pricing_rel: 1e-2,
            identity_abs: 1e-12,
            rotation_price_abs: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>3} {:<34} measured={:<12.6e} threshold={:<12.6e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.threshold,
            self.detail
        )
    }
}

type Check = fn(&Tolerances) -> anyhow::Result<Measure>;

struct Measure {
    passed: bool,
    measured: f64,
    threshold: f64,
    detail: String,
}

pub struct Criterion {
    pub id: &'static str,
    pub name: &'static str,
    check: Check,
}

impl Criterion {
    pub fn run(&self, tol: &Tolerances) -> CriterionOutcome {
        let (passed, measured, threshold, detail) = match (self.check)(tol) {
            Ok(m) => (m.passed, m.measured, m.threshold, m.detail),
            Err(e) => (false, f64::NAN, f64::NAN, format!("error: {e:#}")),
        };
        CriterionOutcome {
            id: self.id.into(),
            name: self.name.into(),
            passed,
            measured,
            threshold,
            detail,
        }
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: "1",
            name: "EMO/IEMO round trip",
            check: roundtrip,
        },
        Criterion {
            id: "2",
            name: "constant annihilation",
            check: annihilation,
        },
        Criterion {
            id: "3",
            name: "Z mean reversion",
            check: mean_reversion,
        },
        Criterion {
            id: "4",
            name: "ergodicity diagnostic",
            check: ergodicity,
        },
        Criterion {
            id: "5",
            name: "sine-path trading fixture",
            check: sine_fixture,
        },
        Criterion {
            id: "6",
            name: "equidistribution",
            check: equidistribution,
        },
        Criterion {
            id: "7",
            name: "Kac return times",
            check: kac,
        },
        Criterion {
            id: "8",
            name: "Birkhoff averages",
            check: birkhoff,
        },
        Criterion {
            id: "9",
            name: "heat solvers",
            check: heat,
        },
        Criterion {
            id: "10a",
            name: "pricing cross-validation",
            check: pricing_cross,
        },
        Criterion {
            id: "10b",
            name: "coefficient identities",
            check: pricing_identities,
        },
        Criterion {
            id: "11",
            name: "rotation call price",
            check: rotation_price,
        },
        Criterion {
            id: "12",
            name: "figure data",
            check: figures,
        },
    ]
}

pub fn criterion(id: &str) -> Option<Criterion> {
    criteria().into_iter().find(|c| c.id == id)
}

pub fn run_all(tol: &Tolerances) -> Vec<CriterionOutcome> {
    criteria().iter().map(|c| c.run(tol)).collect()
}

fn at_most(measured: f64, threshold: f64, detail: String) -> Measure {
    Measure {
        passed: measured <= threshold,
        measured,
        threshold,
        detail,
    }
}

/// Uniform draw in `[lo, hi)` from a seed.
fn uniform(seed: u64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((seed >> 11) as f64 / (1u64 << 53) as f64)
}

fn roundtrip(tol: &Tolerances) -> anyhow::Result<Measure> {
    let grid = TimeGrid::new(1.0, 1e-3)?;
    let mut worst = 0.0f64;
    for i in 0..tol.roundtrip_paths as u64 {
        let s = path_seed(tol.seed, i);
        let (a, b) = (
            uniform(path_seed(s, 1), -0.3, 0.3),
            uniform(path_seed(s, 2), 0.0, 2.0),
        );
        let c = uniform(path_seed(s, 3), 0.05, 0.5);
        let y0 = uniform(path_seed(s, 4), -5.0, 5.0);
        let beta = uniform(path_seed(s, 5), 1.6, 3.0);
        let params = ItoParams::new(move |_, y| a - b * y, move |_, _| c, y0);
        let w = simulate_wiener(grid, path_seed(s, 6));
        let y = simulate_ito(&params, &w)?;
        let dec = decompose(&y, &params, &w)?;
        let cfg = EmoConfig::from_wiener(beta, &w)?;
        let z = apply_emo(&dec, &cfg)?;
        let parts = emo_components(&dec, &cfg)?;
        let back = apply_iemo(&z, y0, &cfg, &parts)?;
        for (u, v) in back.values().iter().zip(y.values()) {
            worst = worst.max((u - v).abs());
        }
    }
    Ok(at_most(
        worst,
        tol.roundtrip_max_error,
        format!("{} paths", tol.roundtrip_paths),
    ))
}

fn annihilation(tol: &Tolerances) -> anyhow::Result<Measure> {
    let grid = TimeGrid::new(1.0, 1e-3)?;
    let params = ItoParams::new(|_, y| 0.1 - 0.5 * y, |_, _| 0.2, 0.0);
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for i in 0..20u64 {
        let w = simulate_wiener(grid, path_seed(tol.seed ^ 0xa5a5, i));
        let y = simulate_ito(&params, &w)?;
        let dec = decompose(&y, &params, &w)?;
        let cfg = EmoConfig::from_wiener(2.0, &w)?;
        let z0 = apply_emo(&dec, &cfg)?;
        for shift in [-1e3, -1.0, 7.5, 1e6] {
            let z1 = apply_emo(&dec.clone().with_y0(dec.y0 + shift), &cfg)?;
            compared += 1;
            if z0.values() != z1.values() {
                mismatches += 1;
            }
        }
    }
    Ok(Measure {
        passed: mismatches == 0,
        measured: mismatches as f64,
        threshold: 0.0,
        detail: format!("{compared} shifted paths compared bitwise"),
    })
}

fn mean_reversion(tol: &Tolerances) -> anyhow::Result<Measure> {
    let p = GbmParams::new(0.1, 0.2, 100.0)?;
    let grid = TimeGrid::new(1.0, tol.reversion_dt)?;
    let mut hits = 0usize;
    for i in 0..tol.reversion_paths as u64 {
        let z = construct_z_gbm(&p, &simulate_wiener(grid, path_seed(tol.seed, i)), 2.0)?;
        if detect_recurrences(&z, 0.0)?.interior(1.0).next().is_some() {
            hits += 1;
        }
    }
    let fraction = hits as f64 / tol.reversion_paths as f64;
    Ok(Measure {
        passed: fraction >= tol.reversion_min_fraction,
        measured: fraction,
        threshold: tol.reversion_min_fraction,
        detail: format!(
            "{hits}/{} paths with an interior crossing (minimum)",
            tol.reversion_paths
        ),
    })
}

fn ergodicity(tol: &Tolerances) -> anyhow::Result<Measure> {
    let p = GbmParams::new(0.1, 0.2, 100.0)?;
    let h = tol.ergodic_horizon;
    let z =
        z_ergodicity_curve(&p, 2.0, &[h], tol.ergodic_dt, tol.ergodic_paths, tol.seed)?.values[0];
    let grid = TimeGrid::new(h, tol.ergodic_dt)?;
    let ys = (0..tol.ergodic_paths as u64)
        .map(|i| {
            log_path(&simulate_gbm(
                &p,
                &simulate_wiener(grid, path_seed(tol.seed ^ 0x5eed, i)),
            ))
        })
        .collect::<Result<Vec<SamplePath>, _>>()?;
    let y = ergodicity_diagnostic(&ys, &[h])?.values[0];
    Ok(Measure {
        passed: z.abs() <= tol.ergodic_max && z.abs() < y.abs(),
        measured: z.abs(),
        threshold: tol.ergodic_max,
        detail: format!("Z diagnostic {z:.3e} vs untransformed {y:.3e} at T'={h}"),
    })
}

fn sine_fixture(tol: &Tolerances) -> anyhow::Result<Measure> {
    let dt = 1e-3;
    let grid = TimeGrid::new(1.0, dt)?;
    let z = SamplePath::from_fn(grid, PathKind::ZProcess, |t| (2.0 * PI * t).sin())?;
    let rec = detect_recurrences(&z, 0.0)?;
    let exc = build_excursions(&z, &rec);
    let slack = tol.sine_steps * dt;
    let mut worst = 0.0f64;
    let mut structure = rec.taus.len() == 3 && exc.len() == 2;
    if structure {
        for (tau, expected) in rec.taus.iter().zip([0.0, 0.5, 1.0]) {
            worst = worst.max((tau - expected).abs());
        }
        for (e, (oet, side)) in exc.iter().zip([(0.25, Side::Above), (0.75, Side::Below)]) {
            worst = worst
                .max((e.delta - 0.5).abs())
                .max((e.peak_time - oet).abs());
            structure &= e.side == side;
        }
    }

    let price = SamplePath::from_fn(grid, PathKind::Price, |t| {
        100.0 * (0.1 * (2.0 * PI * t).sin() + 0.05 * t).exp()
    })?;
    let (l, s) = (2.0, 3.0);
    let mut ledger = TradeLedger::from_price_path(exc.clone(), &price, l, s)?;
    let per_excursion = trade_profit(&ledger)?;
    ledger.indicator = IndicatorMode::Literal;
    let literal = trade_profit(&ledger)?;
    let mut brute = 0.0;
    let mut brute_literal = 0.0;
    for e in &exc {
        let gain = (price.value_at(e.start) - price.value_at(e.peak_time)).abs();
        brute += if e.side == Side::Below {
            l * gain
        } else {
            s * gain
        };
        if e.index >= 1 {
            brute_literal += (l + s) * gain;
        }
    }
    let profit_err = ((per_excursion - brute) / brute)
        .abs()
        .max(((literal - brute_literal) / brute_literal).abs());
    Ok(Measure {
        passed: structure && worst <= slack && profit_err <= tol.profit_rel,
        measured: worst,
        threshold: slack,
        detail: format!(
            "taus={:?} profit rel err {profit_err:.1e} (tol {:.0e})",
            rec.taus
                .iter()
                .map(|t| (t * 1e4).round() / 1e4)
                .collect::<Vec<_>>(),
            tol.profit_rel
        ),
    })
}

fn equidistribution(tol: &Tolerances) -> anyhow::Result<Measure> {
    let f = equidistribution_test(
        RotationAngle::sqrt2(),
        0.2,
        0.5,
        CirclePoint::new(0.0),
        tol.equidistribution_n,
    )?;
    Ok(at_most(
        (f - 0.3).abs(),
        tol.equidistribution_abs,
        format!("frequency {f:.6} in [0.2, 0.5)"),
    ))
}

fn kac(tol: &Tolerances) -> anyhow::Result<Measure> {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for p in [0.1, 0.25, 0.5] {
        let m = kac_return_time(
            RotationAngle::sqrt2(),
            0.0,
            p,
            CirclePoint::new(0.0),
            tol.kac_returns,
        )?;
        worst = worst.max((m * p - 1.0).abs());
        parts.push(format!("{m:.4}"));
    }
    Ok(at_most(
        worst,
        tol.kac_rel,
        format!("means [{}] vs [10, 4, 2]", parts.join(", ")),
    ))
}

fn birkhoff(tol: &Tolerances) -> anyhow::Result<Measure> {
    let angle = RotationAngle::sqrt2();
    let x0 = CirclePoint::new(0.0);
    let trig = TestFunction::TrigPolynomial {
        constant: 0.37,
        cos: vec![0.5, 0.2],
        sin: vec![0.3],
    };
    let a = birkhoff_average(&trig, x0, angle, tol.birkhoff_n)?;
    let b = birkhoff_average(&TestFunction::sin_2pi(), x0, angle, tol.birkhoff_n)?;
    let worst = (a - 0.37).abs().max(b.abs());
    Ok(at_most(
        worst,
        tol.birkhoff_abs,
        format!("trig {a:.6}, sin {b:.2e}"),
    ))
}

fn gaussian(y: f64, sd: f64) -> f64 {
    (-0.5 * (y / sd).powi(2)).exp() / (sd * (2.0 * PI).sqrt())
}

fn heat(tol: &Tolerances) -> anyhow::Result<Measure> {
    let (s, eta, tau) = (0.5, 0.9216, 0.5);
    let grid = UniformGrid::new(-8.0, 0.01, 1601)?;
    let hp = HeatProblem {
        eta,
        grid,
        initial: grid.nodes().map(|y| gaussian(y, s)).collect(),
        tau_end: tau,
    };
    let sd = (s * s + eta * tau).sqrt();
    let max_err = |u: &[f64]| {
        grid.nodes()
            .zip(u)
            .map(|(y, v)| (v - gaussian(y, sd)).abs())
            .fold(0.0, f64::max)
    };
    let conv_err = max_err(&solve_heat_convolution(&hp)?);
    let fd_err = max_err(&solve_heat_fd(
        &hp,
        1e-4,
        FdScheme::CrankNicolson,
        Boundary::Frozen,
    )?);
    let semigroup = conv_err.max(fd_err);

    let inp = example_inputs();
    let zs: Vec<f64> = (0..=2400).map(|i| -12.0 + i as f64 * 0.01).collect();
    let hp = transform_bsp_to_heat(&inp, &zs)?;
    let a = derive_coefficients(&inp)?.a;
    let conv = solve_heat_convolution(&hp)?;
    let fd = solve_heat_fd(&hp, 1e-3, FdScheme::CrankNicolson, Boundary::FarField { a })?;
    let (lo, hi) = (zs.len() / 4, 3 * zs.len() / 4);
    let scale = conv[lo..hi].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cross = conv[lo..hi]
        .iter()
        .zip(&fd[lo..hi])
        .map(|(c, f)| (c - f).abs())
        .fold(0.0, f64::max)
        / scale;
    Ok(Measure {
        passed: semigroup <= tol.heat_semigroup_abs && cross <= tol.heat_cross_rel,
        measured: semigroup,
        threshold: tol.heat_semigroup_abs,
        detail: format!(
            "convolution {conv_err:.1e}, crank-nicolson {fd_err:.1e}; FD vs convolution {cross:.1e} (tol {:.0e})",
            tol.heat_cross_rel
        ),
    })
}

fn pricing_grid() -> Vec<PricingInputs> {
    let base = PricingInputs {
        strike: E.exp(),
        ..example_inputs()
    };
    let mut out = Vec::new();
    for tau in [0.25, 0.5, 0.75] {
        for z in [0.02, 0.05, 0.1] {
            for underlying in [1.5, 3.0, 10.0] {
                out.push(PricingInputs {
                    tau,
                    z,
                    underlying,
                    ..base
                });
            }
        }
    }
    out
}

fn pricing_cross(tol: &Tolerances) -> anyhow::Result<Measure> {
    let mut worst = 0.0f64;
    for inp in pricing_grid() {
        let closed = price_ergodic_bs(&inp)?.price;
        let pde = price_via_pde(&inp, &PdeOptions::default())?.price;
        worst = worst.max(((pde - closed) / closed).abs());
    }
    Ok(at_most(
        worst,
        tol.pricing_rel,
        "27 points, closed form vs heat-equation solve".into(),
    ))
}

fn pricing_identities(tol: &Tolerances) -> anyhow::Result<Measure> {
    let (mut lambda_res, mut spread_res, mut half_res) = (0.0f64, 0.0f64, 0.0f64);
    let mut ratio = 0.0;
    for inp in pricing_grid() {
        let c = derive_coefficients(&inp)?;
        let tb = inp.t_beta();
        let b2 = c.b_delta * c.b_delta;
        lambda_res = lambda_res.max((c.lambda * inp.r * inp.z.abs() - tb * b2).abs());
        let rhs = b2 * tb * tb * inp.tau;
        spread_res = spread_res.max((2.0 * c.p * c.lambda - rhs).abs());
        half_res = half_res.max((c.p * c.lambda - rhs).abs());
        ratio = 2.0 * c.p * c.lambda / rhs;
    }
    let worst = lambda_res.max(spread_res);
    Ok(Measure {
        passed: worst <= tol.identity_abs,
        measured: worst,
        threshold: tol.identity_abs,
        detail: format!(
            "lambda r|z| = T^b B^2: {lambda_res:.1e}; 2 p lambda = B^2 T^2b tau: {spread_res:.1e} (ratio {ratio}); p lambda = B^2 T^2b tau: {half_res:.1e}"
        ),
    })
}

fn rotation_price(tol: &Tolerances) -> anyhow::Result<Measure> {
    let inp = PricingInputs {
        r: 0.05,
        valuation_time: 1.0,
        w_terminal: 1.0,
        horizon: 1.0,
        beta: 2.0,
        spot_t0: 100.0,
        strike: 50.0,
        ..example_inputs()
    };
    let c = price_rotation_call(&inp)?.price;
    let err = (c + 48.221).abs();
    let zero = price_rotation_call(&PricingInputs {
        w_terminal: 0.0,
        ..inp
    })?
    .price;
    let exact = zero == -(-0.05f64).exp() * 50.0;
    Ok(Measure {
        passed: err <= tol.rotation_price_abs && exact,
        measured: err,
        threshold: tol.rotation_price_abs,
        detail: format!("C = {c:.6}; W_T = 0 gives {zero} (exact: {exact})"),
    })
}

fn read_table(path: &Path) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(
            rec?.iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok((header, rows))
}

/// Runs simulate, trade and rotate into `dir` and checks the plot data.
fn check_figures(dir: &Path, seed: u64) -> anyhow::Result<Measure> {
    let mut cfg = Config {
        seed,
        out: dir.to_path_buf(),
        ..Config::default()
    };
    cfg.simulate.paths = 3;
    cfg.rotate.n = 10_000;
    cfg.rotate.kac_returns = 1_000;
    crate::commands::simulate(&cfg)?;
    let trade = crate::commands::trade(&cfg)?;
    let rotate = crate::commands::rotate(&cfg)?;

    let mut problems = Vec::new();
    let mut worst_marker = 0.0f64;
    let mut oscillating = 0;
    for i in 0..cfg.simulate.paths {
        let (h1, fig1) = read_table(&trade.join(format!("fig1_price_{i:04}.csv")))?;
        let (h2, fig2) = read_table(&trade.join(format!("fig2_z_{i:04}.csv")))?;
        let (h3, marks) = read_table(&trade.join(format!("recurrences_{i:04}.csv")))?;
        if h1 != ["t", "price"] || h2 != ["t", "z"] || h3 != ["tau", "z"] {
            problems.push(format!("path {i}: unexpected columns"));
        }
        if fig1.len() != fig2.len() {
            problems.push(format!("path {i}: figure lengths differ"));
        }
        let zmax = fig2.iter().fold(0.0f64, |m, r| m.max(r[1].abs()));
        for m in &marks {
            worst_marker = worst_marker.max(m[1].abs() / zmax);
        }
        let interior = marks
            .iter()
            .filter(|m| m[0] > 0.0 && m[0] < cfg.simulate.horizon)
            .count();
        if fig2.iter().any(|r| r[1] > 0.0) && fig2.iter().any(|r| r[1] < 0.0) && interior > 0 {
            oscillating += 1;
        }
    }
    if oscillating == 0 {
        problems.push("no Z path oscillates about 0".into());
    }
    let marker_tol = cfg.trade.eps.max(1e-12);
    if worst_marker > marker_tol {
        problems.push(format!(
            "recurrence marker off the level by {worst_marker:.1e} of max |Z|"
        ));
    }

    let (h, fig3) = read_table(&rotate.join("fig3_theta.csv"))?;
    if h != ["t", "price", "theta", "x", "cos", "sin"] {
        problems.push("fig3: unexpected columns".into());
    }
    let sim = dir.join("simulate").join("price_0000.csv");
    let (_, price) = read_table(&sim)?;
    if price.len() != fig3.len() || price.iter().zip(&fig3).any(|(p, f)| p[1] != f[1]) {
        problems.push("fig3: price column does not match the simulated path".into());
    }
    for r in &fig3 {
        let (theta, x, c, s) = (r[2], r[3], r[4], r[5]);
        let wrapped = theta - theta.floor();
        if !(0.0..1.0).contains(&x)
            || (x - wrapped).abs() > 1e-12
            || (c * c + s * s - 1.0).abs() > 1e-12
        {
            problems.push(format!(
                "fig3: circle position inconsistent at t = {}",
                r[0]
            ));
            break;
        }
    }
    Ok(Measure {
        passed: problems.is_empty(),
        measured: worst_marker,
        threshold: marker_tol,
        detail: if problems.is_empty() {
            format!(
                "{oscillating}/{} paths oscillate with marked recurrences",
                cfg.simulate.paths
            )
        } else {
            problems.join("; ")
        },
    })
}

fn figures(tol: &Tolerances) -> anyhow::Result<Measure> {
    let dir = tempfile::tempdir()?;
    check_figures(dir.path(), tol.seed)
}
