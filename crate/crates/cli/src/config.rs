//! Resolved run configuration: defaults, overridden by a config file,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use logergodic::pricing::PricingInputs;
use logergodic::rotation::{RotationAngle, TestFunction};
use serde::{Deserialize, Serialize};

use crate::validate::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub mu: f64,
    pub sigma: f64,
    pub s0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            mu: 0.1,
            sigma: 0.2,
            s0: 100.0,
            horizon: 1.0,
            dt: 1e-3,
            paths: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeConfig {
    /// Directory holding a `simulate` run; defaults to `<out>/simulate`.
    pub input: Option<PathBuf>,
    pub beta: f64,
    pub eps: f64,
    pub long_leverage: f64,
    pub short_leverage: f64,
    pub literal_indicator: bool,
}

impl Default for TradeConfig {
    fn default() -> Self {
        Self {
            input: None,
            beta: 2.0,
            eps: 0.0,
            long_leverage: 1.0,
            short_leverage: 1.0,
            literal_indicator: false,
        }
    }
}

/// An irrational angle by name or by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Named(String),
    Value(f64),
}

impl AngleSpec {
    pub fn resolve(&self) -> anyhow::Result<RotationAngle> {
        match self {
            AngleSpec::Value(v) if v.is_finite() => Ok(RotationAngle(*v)),
            AngleSpec::Value(v) => bail!("rotation angle must be finite, got {v}"),
            AngleSpec::Named(name) => match name.as_str() {
                "sqrt2" => Ok(RotationAngle::sqrt2()),
                "sqrt2_minus_one" => Ok(RotationAngle::sqrt2_minus_one()),
                "golden" | "golden_conjugate" => Ok(RotationAngle::golden_conjugate()),
                other => bail!("unknown rotation angle `{other}` (expected sqrt2, sqrt2_minus_one, golden or a number)"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotateConfig {
    pub theta: AngleSpec,
    pub x0: f64,
    pub n: usize,
    pub intervals: Vec<[f64; 2]>,
    pub kac_arcs: Vec<[f64; 2]>,
    pub kac_returns: usize,
    pub functions: Vec<TestFunction>,
    /// Strike of the angle process plotted against price.
    pub strike: f64,
    pub beta: f64,
}

impl Default for RotateConfig {
    fn default() -> Self {
        Self {
            theta: AngleSpec::Named("sqrt2".into()),
            x0: 0.0,
            n: 1_000_000,
            intervals: vec![[0.2, 0.5]],
            kac_arcs: vec![[0.0, 0.1], [0.0, 0.25], [0.0, 0.5]],
            kac_returns: 100_000,
            functions: vec![
                TestFunction::TrigPolynomial {
                    constant: 0.37,
                    cos: vec![0.5, 0.2],
                    sin: vec![0.3],
                },
                TestFunction::sin_2pi(),
            ],
            strike: 50.0,
            beta: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceConfig {
    pub base: PricingInputs,
    pub taus: Vec<f64>,
    pub zs: Vec<f64>,
    pub underlyings: Vec<f64>,
    pub strikes: Vec<f64>,
    pub pde_nodes: usize,
    pub fd_steps: usize,
}

pub fn example_inputs() -> PricingInputs {
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

impl Default for PriceConfig {
    fn default() -> Self {
        Self {
            base: example_inputs(),
            taus: vec![0.25, 0.5, 0.75],
            zs: vec![0.02, 0.05, 0.1],
            underlyings: vec![1.5, 3.0, 10.0],
            strikes: vec![std::f64::consts::E.exp()],
            pde_nodes: 4001,
            fd_steps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub simulate: SimulateConfig,
    pub trade: TradeConfig,
    pub rotate: RotateConfig,
    pub price: PriceConfig,
    pub validate: Tolerances,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            out: PathBuf::from("out"),
            format: Format::Csv,
            simulate: SimulateConfig::default(),
            trade: TradeConfig::default(),
            rotate: RotateConfig::default(),
            price: PriceConfig::default(),
            validate: Tolerances::default(),
        }
    }
}

/// Flags that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: Config,
}

impl Config {
    /// Reads a TOML config, or the `config` block of a JSON manifest.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: ManifestConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing manifest {}", path.display()))?;
            Ok(m.config)
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }

    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        if let Some(format) = overrides.format {
            cfg.format = format;
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> anyhow::Result<()> {
        let s = &self.simulate;
        logergodic::GbmParams::new(s.mu, s.sigma, s.s0).context("[simulate]")?;
        logergodic::TimeGrid::new(s.horizon, s.dt).context("[simulate]")?;
        if s.paths == 0 {
            bail!("[simulate] paths must be >= 1");
        }
        let t = &self.trade;
        if !(t.eps >= 0.0) {
            bail!("[trade] eps must be >= 0, got {}", t.eps);
        }
        if !(t.long_leverage >= 0.0 && t.short_leverage >= 0.0) {
            bail!("[trade] leverages must be >= 0");
        }
        logergodic::ergodic::EmoConfig::new(t.beta, 1.0, 1.0).context("[trade]")?;
        let r = &self.rotate;
        r.theta.resolve().context("[rotate]")?;
        if r.n == 0 || r.kac_returns == 0 {
            bail!("[rotate] n and kac_returns must be >= 1");
        }
        for f in &r.functions {
            f.validate().context("[rotate] functions")?;
        }
        for [a, b] in r.intervals.iter().chain(&r.kac_arcs) {
            if !(0.0 <= *a && a < b && *b <= 1.0) {
                bail!("[rotate] interval [{a}, {b}) is not inside [0, 1)");
            }
        }
        let p = &self.price;
        if p.taus.is_empty() || p.zs.is_empty() || p.underlyings.is_empty() || p.strikes.is_empty()
        {
            bail!("[price] every sweep axis needs at least one value");
        }
        if p.pde_nodes < 3 || p.fd_steps == 0 {
            bail!("[price] pde_nodes must be >= 3 and fd_steps >= 1");
        }
        Ok(())
    }
}
