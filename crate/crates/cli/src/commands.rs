//! The five subcommands. Each writes its outputs plus `manifest.json` into
//! `<out>/<command>/`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use logergodic::ergodic::{apply_emo, construct_z_gbm, decompose, EmoConfig};
use logergodic::io::{read_path_csv, write_path_csv, PathHeader};
use logergodic::pricing::{
    derive_coefficients, price_ergodic_bs, price_rotation_call, price_via_pde, HeatSolver,
    PdeOptions, PricingInputs,
};
use logergodic::rotation::{
    birkhoff_average, equidistribution_test, kac_return_time, theta_process, CirclePoint,
    TestFunction,
};
use logergodic::stochastic::{log_path, path_seed, simulate_gbm, simulate_wiener};
use logergodic::trading::{
    build_excursions, detect_recurrences, generate_signals, oet_bound_report, sojourn_stats,
    trade_profit, IndicatorMode, TradeLedger,
};
use logergodic::{GbmParams, ItoParams, PathKind, SamplePath, TimeGrid, WienerPath};
use serde::{Deserialize, Serialize};

use crate::config::{Config, Format};
use crate::validate::{criteria, run_all, CriterionOutcome};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<PathHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: Config,
    pub outputs: Vec<OutputEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST);
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        serde_json::from_reader(file).with_context(|| format!("parsing {}", path.display()))
    }
}

struct Run<'a> {
    cfg: &'a Config,
    command: &'static str,
    dir: PathBuf,
    outputs: Vec<OutputEntry>,
}

impl<'a> Run<'a> {
    fn start(cfg: &'a Config, command: &'static str) -> anyhow::Result<Self> {
        let dir = cfg.out.join(command);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            cfg,
            command,
            dir,
            outputs: Vec::new(),
        })
    }

    fn create(
        &mut self,
        name: String,
        header: Option<PathHeader>,
    ) -> anyhow::Result<BufWriter<File>> {
        let path = self.dir.join(&name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.outputs.push(OutputEntry { file: name, header });
        Ok(BufWriter::new(file))
    }

    fn records<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> anyhow::Result<()> {
        let format = self.cfg.format;
        let mut w = self.create(format!("{stem}.{}", format.extension()), None)?;
        match format {
            Format::Csv => {
                let mut csv = csv::Writer::from_writer(&mut w);
                for row in rows {
                    csv.serialize(row)?;
                }
                csv.flush()?;
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, rows)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn table(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> anyhow::Result<()> {
        let mut w = self.create(name.to_string(), None)?;
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(header)?;
        for row in rows {
            csv.write_record(row.iter().map(|v| v.to_string()))?;
        }
        csv.flush()?;
        drop(csv);
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut w = self.create(name.to_string(), None)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn finish(self) -> anyhow::Result<PathBuf> {
        let manifest = Manifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.cfg.clone(),
            outputs: self.outputs,
        };
        let path = self.dir.join(MANIFEST);
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)?;
        w.flush()?;
        Ok(self.dir)
    }
}

fn gbm_params(cfg: &Config) -> anyhow::Result<(GbmParams, TimeGrid)> {
    let s = &cfg.simulate;
    Ok((
        GbmParams::new(s.mu, s.sigma, s.s0)?,
        TimeGrid::new(s.horizon, s.dt)?,
    ))
}

/// GBM price paths, one CSV per path.
pub fn simulate(cfg: &Config) -> anyhow::Result<PathBuf> {
    let (params, grid) = gbm_params(cfg)?;
    let mut run = Run::start(cfg, "simulate")?;
    for i in 0..cfg.simulate.paths {
        let seed = path_seed(cfg.seed, i as u64);
        let price = simulate_gbm(&params, &simulate_wiener(grid, seed));
        let header = PathHeader {
            kind: PathKind::Price,
            seed,
            params: serde_json::to_value(params)?,
        };
        let mut w = run.create(format!("price_{i:04}.csv"), Some(header))?;
        write_path_csv(&mut w, &price)?;
        w.flush()?;
    }
    run.finish()
}

/// Recovers the driving Wiener path from an exact GBM price path.
fn recover_wiener(price: &SamplePath, params: &GbmParams) -> anyhow::Result<WienerPath> {
    let q = params.q();
    let ln_s0 = params.s0.ln();
    let mut w: Vec<f64> = price
        .grid()
        .times()
        .zip(price.values())
        .map(|(t, s)| (s.ln() - ln_s0 - q * t) / params.sigma)
        .collect();
    if w[0].abs() > 1e-9 {
        bail!("price path does not start at s0 = {}", params.s0);
    }
    w[0] = 0.0;
    Ok(WienerPath::from_values(*price.grid(), w)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurrenceMarker {
    pub tau: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSummary {
    pub file: String,
    pub recurrences: usize,
    pub interior_recurrences: usize,
    pub excursions: usize,
    pub mean_sojourn_above: Option<f64>,
    pub mean_sojourn_below: Option<f64>,
    pub profit: f64,
    pub oet_contained: bool,
    pub flagged_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeSummary {
    pub paths: Vec<PathSummary>,
    pub fraction_with_interior_recurrence: f64,
    pub mean_profit: f64,
}

/// Z-process, recurrences, excursions, signals, OET report and profit for
/// every path of a `simulate` run.
pub fn trade(cfg: &Config) -> anyhow::Result<PathBuf> {
    let input = cfg
        .trade
        .input
        .clone()
        .unwrap_or_else(|| cfg.out.join("simulate"));
    let source = Manifest::read(&input)?;
    let tc = &cfg.trade;
    let mut run = Run::start(cfg, "trade")?;
    let mut summaries = Vec::new();
    for (i, entry) in source.outputs.iter().enumerate() {
        let Some(header) = &entry.header else {
            continue;
        };
        if header.kind != PathKind::Price {
            continue;
        }
        let params: GbmParams = serde_json::from_value(header.params.clone())
            .with_context(|| format!("parameters of {}", entry.file))?;
        let path = input.join(&entry.file);
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let price = read_path_csv(file, PathKind::Price)
            .with_context(|| format!("reading {}", path.display()))?;
        let wiener = recover_wiener(&price, &params)?;
        let y = log_path(&price)?;
        let ito = ItoParams::from_gbm(&params);
        let dec = decompose(&y, &ito, &wiener)?;
        let emo = EmoConfig::from_wiener(tc.beta, &wiener)?;
        let z = apply_emo(&dec, &emo)?;
        let rec = detect_recurrences(&z, tc.eps)?;
        let excursions = build_excursions(&z, &rec);
        let signals = generate_signals(&z, &excursions);
        let bounds = oet_bound_report(&excursions, &ito, &y);
        let stats = sojourn_stats(&excursions);
        let mut ledger = TradeLedger::from_price_path(
            excursions.clone(),
            &price,
            tc.long_leverage,
            tc.short_leverage,
        )?;
        if tc.literal_indicator {
            ledger.indicator = IndicatorMode::Literal;
        }
        let profit = trade_profit(&ledger)?;

        let t_z = |path: &SamplePath| {
            path.grid()
                .times()
                .zip(path.values())
                .map(|(t, v)| vec![t, *v])
                .collect::<Vec<_>>()
        };
        run.table(
            &format!("fig1_price_{i:04}.csv"),
            &["t", "price"],
            t_z(&price),
        )?;
        run.table(&format!("fig2_z_{i:04}.csv"), &["t", "z"], t_z(&z))?;
        let markers: Vec<RecurrenceMarker> = rec
            .taus
            .iter()
            .map(|&tau| RecurrenceMarker {
                tau,
                z: z.value_at(tau),
            })
            .collect();
        let mut w = run.create(format!("recurrences_{i:04}.csv"), None)?;
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(["tau", "z"])?;
        for m in &markers {
            csv.write_record([m.tau.to_string(), m.z.to_string()])?;
        }
        csv.flush()?;
        drop(csv);
        w.flush()?;
        run.records(&format!("signals_{i:04}"), &signals.signals)?;
        run.records(&format!("bounds_{i:04}"), &bounds.rows)?;

        summaries.push(PathSummary {
            file: entry.file.clone(),
            recurrences: rec.len(),
            interior_recurrences: rec.interior(z.grid().horizon()).count(),
            excursions: excursions.len(),
            mean_sojourn_above: stats.mean_above,
            mean_sojourn_below: stats.mean_below,
            profit,
            oet_contained: bounds.all_contained,
            flagged_fraction: bounds.flagged_fraction,
        });
    }
    if summaries.is_empty() {
        bail!(
            "no price paths listed in {}",
            input.join(MANIFEST).display()
        );
    }
    let n = summaries.len() as f64;
    let summary = TradeSummary {
        fraction_with_interior_recurrence: summaries
            .iter()
            .filter(|s| s.interior_recurrences > 0)
            .count() as f64
            / n,
        mean_profit: summaries.iter().map(|s| s.profit).sum::<f64>() / n,
        paths: summaries,
    };
    run.json("summary.json", &summary)?;
    run.finish()
}

/// Equidistribution, Kac and Birkhoff tables, and the angle process of a
/// seeded GBM path.
pub fn rotate(cfg: &Config) -> anyhow::Result<PathBuf> {
    let rc = &cfg.rotate;
    let angle = rc.theta.resolve()?;
    let x0 = CirclePoint::new(rc.x0);
    let mut run = Run::start(cfg, "rotate")?;

    let mut rows = Vec::new();
    for &[a, b] in &rc.intervals {
        let freq = equidistribution_test(angle, a, b, x0, rc.n)?;
        rows.push(vec![a, b, rc.n as f64, freq, b - a, (freq - (b - a)).abs()]);
    }
    run.table(
        "equidistribution.csv",
        &["a", "b", "n", "frequency", "expected", "abs_error"],
        rows,
    )?;

    let mut rows = Vec::new();
    for &[a, b] in &rc.kac_arcs {
        let mean = kac_return_time(angle, a, b, CirclePoint::new(a), rc.kac_returns)?;
        let expected = 1.0 / (b - a);
        rows.push(vec![
            a,
            b,
            rc.kac_returns as f64,
            mean,
            expected,
            (mean - expected).abs() / expected,
        ]);
    }
    run.table(
        "kac.csv",
        &[
            "a",
            "b",
            "returns",
            "mean_return_time",
            "expected",
            "rel_error",
        ],
        rows,
    )?;

    #[derive(Serialize)]
    struct BirkhoffRow {
        function: String,
        n: usize,
        average: f64,
        integral: f64,
        abs_error: f64,
    }
    let mut rows = Vec::new();
    for phi in &rc.functions {
        let average = birkhoff_average(phi, x0, angle, rc.n)?;
        let integral = phi.integral();
        rows.push(BirkhoffRow {
            function: describe(phi),
            n: rc.n,
            average,
            integral,
            abs_error: (average - integral).abs(),
        });
    }
    run.records("birkhoff", &rows)?;

    let (params, grid) = gbm_params(cfg)?;
    let wiener = simulate_wiener(grid, path_seed(cfg.seed, 0));
    let price = simulate_gbm(&params, &wiener);
    let z = construct_z_gbm(&params, &wiener, rc.beta)?;
    let emo = EmoConfig::from_wiener(rc.beta, &wiener)?;
    let theta = theta_process(&z, &price, rc.strike, &emo)?;
    let rows = grid
        .times()
        .zip(price.values())
        .zip(&theta.values)
        .map(|((t, s), th)| {
            let p = CirclePoint::new(*th);
            let (c, sn) = p.to_complex();
            vec![t, *s, *th, p.x(), c, sn]
        });
    run.table(
        "fig3_theta.csv",
        &["t", "price", "theta", "x", "cos", "sin"],
        rows.collect::<Vec<_>>(),
    )?;
    run.finish()
}

fn describe(phi: &TestFunction) -> String {
    match phi {
        TestFunction::TrigPolynomial { constant, cos, sin } => {
            format!("trig(c={constant}; cos={cos:?}; sin={sin:?})")
        }
        TestFunction::Tabulated { samples } => format!("tabulated({} samples)", samples.len()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PriceRow {
    pub tau: f64,
    pub z: f64,
    pub underlying: f64,
    pub strike: f64,
    pub r: f64,
    pub horizon: f64,
    pub beta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub w_terminal: f64,
    pub spot_t0: f64,
    pub valuation_time: f64,
    pub rotation_call: Option<f64>,
    pub rotation_negative: Option<bool>,
    pub ergodic_bs: Option<f64>,
    pub ergodic_negative: Option<bool>,
    pub d: Option<f64>,
    pub n_d: Option<f64>,
    pub pde_convolution: Option<f64>,
    pub pde_crank_nicolson: Option<f64>,
    pub rel_diff_convolution: Option<f64>,
    pub rel_diff_crank_nicolson: Option<f64>,
    pub reconstruction: Option<f64>,
    pub reconstruction_ab: Option<f64>,
    pub spread_variance: Option<f64>,
    pub eta_tau: Option<f64>,
    pub error: Option<String>,
}

fn note(row: &mut PriceRow, err: impl std::fmt::Display) {
    let msg = err.to_string();
    row.error = Some(match row.error.take() {
        Some(prev) => format!("{prev}; {msg}"),
        None => msg,
    });
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        (a - b).abs()
    } else {
        ((a - b) / b).abs()
    }
}

pub fn price_row(inp: &PricingInputs, nodes: usize, fd_steps: usize) -> PriceRow {
    let mut row = PriceRow {
        tau: inp.tau,
        z: inp.z,
        underlying: inp.underlying,
        strike: inp.strike,
        r: inp.r,
        horizon: inp.horizon,
        beta: inp.beta,
        mu: inp.mu,
        sigma: inp.sigma,
        w_terminal: inp.w_terminal,
        spot_t0: inp.spot_t0,
        valuation_time: inp.valuation_time,
        ..Default::default()
    };
    match price_rotation_call(inp) {
        Ok(c) => {
            row.rotation_call = Some(c.price);
            row.rotation_negative = Some(c.negative);
        }
        Err(e) => note(&mut row, format!("rotation call: {e}")),
    }
    if let Ok(c) = derive_coefficients(inp) {
        row.spread_variance = Some(c.spread_variance());
        row.eta_tau = Some(c.eta * inp.tau);
        row.reconstruction_ab = Some(c.reconstruction_ab(inp.tau));
    }
    match price_ergodic_bs(inp) {
        Ok(c) => {
            row.ergodic_bs = Some(c.price);
            row.ergodic_negative = Some(c.negative);
            row.d = Some(c.d);
            row.n_d = Some(c.n_d);
            row.reconstruction = Some(c.reconstruction);
        }
        Err(e) => note(&mut row, format!("ergodic bs: {e}")),
    }
    let conv = PdeOptions {
        nodes,
        solver: HeatSolver::Convolution,
        ..Default::default()
    };
    match price_via_pde(inp, &conv) {
        Ok(p) => row.pde_convolution = Some(p.price),
        Err(e) => note(&mut row, format!("pde convolution: {e}")),
    }
    let fd = PdeOptions {
        nodes,
        solver: HeatSolver::CrankNicolson { steps: fd_steps },
        ..Default::default()
    };
    match price_via_pde(inp, &fd) {
        Ok(p) => row.pde_crank_nicolson = Some(p.price),
        Err(e) => note(&mut row, format!("pde crank-nicolson: {e}")),
    }
    if let Some(closed) = row.ergodic_bs {
        row.rel_diff_convolution = row.pde_convolution.map(|p| rel_diff(p, closed));
        row.rel_diff_crank_nicolson = row.pde_crank_nicolson.map(|p| rel_diff(p, closed));
    }
    row
}

/// Sweep of the pricing grid through every engine; domain errors are
/// recorded per row.
pub fn price(cfg: &Config) -> anyhow::Result<PathBuf> {
    let pc = &cfg.price;
    let mut rows = Vec::new();
    for &strike in &pc.strikes {
        for &tau in &pc.taus {
            for &z in &pc.zs {
                for &underlying in &pc.underlyings {
                    let inp = PricingInputs {
                        strike,
                        tau,
                        z,
                        underlying,
                        ..pc.base
                    };
                    rows.push(price_row(&inp, pc.pde_nodes, pc.fd_steps));
                }
            }
        }
    }
    let mut run = Run::start(cfg, "price")?;
    run.records("sweep", &rows)?;
    run.finish()
}

/// Runs the selected acceptance criteria (all when `only` is empty) and
/// writes the report.
pub fn validate(cfg: &Config, only: &[String]) -> anyhow::Result<(PathBuf, Vec<CriterionOutcome>)> {
    let outcomes = if only.is_empty() {
        run_all(&cfg.validate)
    } else {
        criteria()
            .iter()
            .filter(|c| only.iter().any(|id| id == c.id))
            .map(|c| c.run(&cfg.validate))
            .collect()
    };
    let mut run = Run::start(cfg, "validate")?;
    run.records("report", &outcomes)?;
    Ok((run.finish()?, outcomes))
}
