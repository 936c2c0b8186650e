//! Recurrence and sojourn analysis of Z-paths and the long/short trade
//! ledger built on top of it.
//!
//! A recurrence is a time where Z returns to its reference level 0. Between
//! two consecutive recurrences the path makes one excursion, either above or
//! below the level; the time of maximal `|Z|` inside it is the order
//! execution time (OET).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stochastic::{GbmParams, ItoParams, PathKind, SamplePath, TimeGrid, WienerPath};

/// Values within this many ulps of the path's magnitude count as exact zeros.
const ZERO_FLOOR_ULPS: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceSet {
    pub taus: Vec<f64>,
    pub eps: f64,
}

impl RecurrenceSet {
    pub fn first(&self) -> Option<f64> {
        self.taus.first().copied()
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Recurrences strictly inside `(0, T)`.
    pub fn interior(&self, horizon: f64) -> impl Iterator<Item = f64> + '_ {
        self.taus
            .iter()
            .copied()
            .filter(move |&t| t > 0.0 && t < horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub delta: f64,
    pub side: Side,
    /// `max |Z|` over the excursion.
    pub peak: f64,
    /// Order execution time: first argmax of `|Z|`.
    pub peak_time: f64,
}

/// Detects returns of `z` to zero.
///
/// Sign changes between neighbouring grid points are located by linear
/// interpolation. A run of grid points with `|Z| <= eps` counts once, at its
/// first point. Runs that only touch zero at rounding level (no sign change,
/// not at either end of the path) are tangencies and are skipped unless the
/// caller asked for a positive `eps`. Recurrences closer than one grid step
/// to the previous one are dropped.
pub fn detect_recurrences(z: &SamplePath, eps: f64) -> Result<RecurrenceSet> {
    if !(eps >= 0.0) {
        return Err(invalid("eps", format!("must be >= 0, got {eps}")));
    }
    z.expect_kind(PathKind::ZProcess)?;
    let grid = z.grid();
    let v = z.values();
    let n = v.len();
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = eps.max(ZERO_FLOOR_ULPS * f64::EPSILON * scale);
    let sign = |x: f64| -> i8 {
        if x.abs() <= tol {
            0
        } else if x > 0.0 {
            1
        } else {
            -1
        }
    };

    let dt = grid.dt();
    let mut taus: Vec<f64> = Vec::new();
    let push = |t: f64, taus: &mut Vec<f64>| {
        if taus
            .last()
            .is_none_or(|&last| t - last >= dt * (1.0 - 1e-9))
        {
            taus.push(t);
        }
    };

    let mut k = 0;
    while k < n {
        let s = sign(v[k]);
        if s == 0 {
            let start = k;
            while k + 1 < n && sign(v[k + 1]) == 0 {
                k += 1;
            }
            let end = k;
            let left = (start > 0).then(|| sign(v[start - 1]));
            let right = (end + 1 < n).then(|| sign(v[end + 1]));
            let at_boundary = left.is_none() || right.is_none();
            let crossing = matches!((left, right), (Some(a), Some(b)) if a != b);
            if at_boundary || crossing || eps > 0.0 {
                push(grid.time(start), &mut taus);
            }
            k += 1;
            continue;
        }
        if k + 1 < n {
            let s_next = sign(v[k + 1]);
            if s_next != 0 && s_next != s {
                let frac = v[k] / (v[k] - v[k + 1]);
                push(grid.time(k) + frac * dt, &mut taus);
            }
        }
        k += 1;
    }
    Ok(RecurrenceSet { taus, eps })
}

/// One excursion per consecutive pair of recurrence times whose open
/// interval contains a grid point with nonzero Z.
pub fn build_excursions(z: &SamplePath, rec: &RecurrenceSet) -> Vec<Excursion> {
    let grid = z.grid();
    let v = z.values();
    let dt = grid.dt();
    let mut out = Vec::new();
    for pair in rec.taus.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let first = ((a / dt).floor() as usize).saturating_add(1).min(v.len());
        let mut best: Option<(usize, f64)> = None;
        let mut k = first.saturating_sub(1);
        while k < v.len() {
            let t = grid.time(k);
            if t >= b {
                break;
            }
            if t > a {
                let m = v[k].abs();
                if best.is_none_or(|(_, bm)| m > bm) {
                    best = Some((k, m));
                }
            }
            k += 1;
        }
        let Some((k_peak, peak)) = best else { continue };
        if peak == 0.0 {
            continue;
        }
        out.push(Excursion {
            index: out.len(),
            start: a,
            end: b,
            delta: b - a,
            side: if v[k_peak] > 0.0 {
                Side::Above
            } else {
                Side::Below
            },
            peak,
            peak_time: grid.time(k_peak),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SojournStats {
    /// `None` when there is no excursion above the level.
    pub mean_above: Option<f64>,
    pub mean_below: Option<f64>,
    pub count_above: usize,
    pub count_below: usize,
}

pub fn sojourn_stats(excursions: &[Excursion]) -> SojournStats {
    let mean = |side: Side| {
        let ds: Vec<f64> = excursions
            .iter()
            .filter(|e| e.side == side)
            .map(|e| e.delta)
            .collect();
        let mean = (!ds.is_empty()).then(|| ds.iter().sum::<f64>() / ds.len() as f64);
        (mean, ds.len())
    };
    let (mean_above, count_above) = mean(Side::Above);
    let (mean_below, count_below) = mean(Side::Below);
    SojournStats {
        mean_above,
        mean_below,
        count_above,
        count_below,
    }
}

/// Which printed form of the recurrence-time SDE to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceSdeForm {
    /// `d tau = -[(sigma + q tau) / q] dW / W`.
    #[default]
    General,
    /// `d tau = -[sigma / (sigma^2/2 - mu) + tau] dW / W`.
    PrintedFinalLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPath {
    pub grid: TimeGrid,
    /// Grid index where the window starts; `taus[j]` sits at grid index
    /// `start_index + j`.
    pub start_index: usize,
    pub taus: Vec<f64>,
    pub params: GbmParams,
    pub form: RecurrenceSdeForm,
}

/// Euler integration of the recurrence-time SDE driven by `wiener`, started
/// at `tau0` on the grid index `ceil(tau0 / dt)`. `W_0 = 0`, so windows
/// starting at zero are singular by construction.
pub fn simulate_recurrence_sde(
    params: &GbmParams,
    wiener: &WienerPath,
    tau0: f64,
    form: RecurrenceSdeForm,
) -> Result<TauPath> {
    params.validate()?;
    let q = params.q();
    if q.abs() < 1e-14 {
        return Err(Error::Singular(format!(
            "q = mu - sigma^2/2 = {q} vanishes; the SDE divides by it"
        )));
    }
    let grid = *wiener.grid();
    if !(tau0 >= 0.0 && tau0 < grid.horizon()) {
        return Err(invalid(
            "tau0",
            format!("must lie in [0, {}), got {tau0}", grid.horizon()),
        ));
    }
    let start_index = ((tau0 / grid.dt()) - 1e-9).ceil().max(0.0) as usize;
    let w = wiener.values();
    let mut taus = Vec::with_capacity(grid.len() - start_index);
    let mut tau = tau0;
    taus.push(tau);
    for k in start_index..grid.steps() {
        if w[k].abs() < 1e-12 {
            return Err(Error::Singular(format!(
                "Wiener path hits zero at index {k} (t = {}); dW/W undefined",
                grid.time(k)
            )));
        }
        let coef = match form {
            RecurrenceSdeForm::General => (params.sigma + q * tau) / q,
            RecurrenceSdeForm::PrintedFinalLine => params.sigma / (-q) + tau,
        };
        tau -= coef * wiener.increment(k) / w[k];
        if !tau.is_finite() {
            return Err(Error::NonFinite {
                what: "recurrence time",
                index: k + 1,
                t: grid.time(k + 1),
            });
        }
        taus.push(tau);
    }
    Ok(TauPath {
        grid,
        start_index,
        taus,
        params: *params,
        form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub index: usize,
    pub tau_start: f64,
    pub oet: f64,
    pub tau_end: f64,
    /// `tau_i < t_M < tau_{i+1}`.
    pub contained: bool,
    /// `sigma(t_M) / mu(t_M)`; `None` when the drift vanishes.
    pub ratio: Option<f64>,
    pub dt_oet: f64,
    pub dtau: f64,
    /// The ratio exceeds the excursion length.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    pub all_contained: bool,
    pub flagged_fraction: f64,
}

/// Descriptive report of the OET bound. `state` supplies the process value
/// at `t_M` for state-dependent coefficients.
pub fn oet_bound_report(
    excursions: &[Excursion],
    params: &ItoParams,
    state: &SamplePath,
) -> BoundReport {
    let rows: Vec<BoundRow> = excursions
        .iter()
        .map(|e| {
            let x = state.value_at(e.peak_time);
            let mu = params.drift(e.peak_time, x);
            let sigma = params.volatility(e.peak_time, x);
            let ratio = (mu != 0.0).then(|| sigma / mu);
            let dtau = e.end - e.start;
            BoundRow {
                index: e.index,
                tau_start: e.start,
                oet: e.peak_time,
                tau_end: e.end,
                contained: e.start < e.peak_time && e.peak_time < e.end,
                ratio,
                dt_oet: e.peak_time - e.start,
                dtau,
                flagged: ratio.is_some_and(|r| r > dtau),
            }
        })
        .collect();
    let flagged = rows.iter().filter(|r| r.flagged).count();
    BoundReport {
        all_contained: rows.iter().all(|r| r.contained),
        flagged_fraction: if rows.is_empty() {
            0.0
        } else {
            flagged as f64 / rows.len() as f64
        },
        rows,
    }
}

/// How the class indicators of the profit formula are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorMode {
    /// Each excursion contributes only to the sum of its own class.
    #[default]
    PerExcursion,
    /// Both sums run over every excursion with `i >= 1`, switched on when
    /// the corresponding class is nonempty.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeLedger {
    pub excursions: Vec<Excursion>,
    pub entry_prices: Vec<f64>,
    pub exit_prices: Vec<f64>,
    pub long_leverage: f64,
    pub short_leverage: f64,
    #[serde(default)]
    pub indicator: IndicatorMode,
}

impl TradeLedger {
    /// Entry at `X(tau_i)` (interpolated), exit at `X(t_M)`.
    pub fn from_price_path(
        excursions: Vec<Excursion>,
        price: &SamplePath,
        long_leverage: f64,
        short_leverage: f64,
    ) -> Result<Self> {
        price.expect_kind(PathKind::Price)?;
        let entry_prices = excursions.iter().map(|e| price.value_at(e.start)).collect();
        let exit_prices = excursions
            .iter()
            .map(|e| price.value_at(e.peak_time))
            .collect();
        Ok(Self {
            excursions,
            entry_prices,
            exit_prices,
            long_leverage,
            short_leverage,
            indicator: IndicatorMode::PerExcursion,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.long_leverage >= 0.0) {
            return Err(invalid(
                "l",
                format!("leverage must be >= 0, got {}", self.long_leverage),
            ));
        }
        if !(self.short_leverage >= 0.0) {
            return Err(invalid(
                "s",
                format!("leverage must be >= 0, got {}", self.short_leverage),
            ));
        }
        let n = self.excursions.len();
        if self.entry_prices.len() != n || self.exit_prices.len() != n {
            return Err(invalid(
                "ledger",
                "one entry and one exit price per excursion",
            ));
        }
        if let Some(p) = self
            .entry_prices
            .iter()
            .chain(&self.exit_prices)
            .find(|p| !(**p > 0.0))
        {
            return Err(invalid(
                "ledger",
                format!("prices must be positive, got {p}"),
            ));
        }
        Ok(())
    }
}

pub fn trade_profit(ledger: &TradeLedger) -> Result<f64> {
    ledger.validate()?;
    let legs = ledger
        .excursions
        .iter()
        .zip(ledger.entry_prices.iter().zip(&ledger.exit_prices))
        .map(|(e, (entry, exit))| (e, (entry - exit).abs()));
    let value = match ledger.indicator {
        IndicatorMode::PerExcursion => legs
            .map(|(e, gain)| match e.side {
                Side::Below => ledger.long_leverage * gain,
                Side::Above => ledger.short_leverage * gain,
            })
            .fold(0.0, |acc, v| acc + v),
        IndicatorMode::Literal => {
            let has = |side| ledger.excursions.iter().any(|e| e.side == side);
            let total: f64 = legs
                .filter(|(e, _)| e.index >= 1)
                .fold(0.0, |acc, (_, g)| acc + g);
            let l = if has(Side::Below) {
                ledger.long_leverage
            } else {
                0.0
            };
            let s = if has(Side::Above) {
                ledger.short_leverage
            } else {
                0.0
            };
            (l + s) * total
        }
    };
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Long,
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub entry_time: f64,
    pub direction: Direction,
    pub exit_time: f64,
    pub z_at_exit: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SignalReport {
    pub signals: Vec<Signal>,
}

/// Long when the excursion runs below the level, short when above; exit at
/// the OET.
pub fn generate_signals(z: &SamplePath, excursions: &[Excursion]) -> SignalReport {
    SignalReport {
        signals: excursions
            .iter()
            .map(|e| Signal {
                entry_time: e.start,
                direction: match e.side {
                    Side::Below => Direction::Long,
                    Side::Above => Direction::Short,
                },
                exit_time: e.peak_time,
                z_at_exit: z.value_at(e.peak_time),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_path() -> SamplePath {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        SamplePath::from_fn(g, PathKind::ZProcess, |t| (2.0 * PI * t).sin()).unwrap()
    }

    fn excursion(index: usize, side: Side) -> Excursion {
        Excursion {
            index,
            start: index as f64,
            end: index as f64 + 1.0,
            delta: 1.0,
            side,
            peak: 1.0,
            peak_time: index as f64 + 0.5,
        }
    }

    #[test]
    fn sine_recurrences() {
        let rec = detect_recurrences(&sine_path(), 0.0).unwrap();
        assert_eq!(rec.len(), 3, "{rec:?}");
        for (got, want) in rec.taus.iter().zip([0.0, 0.5, 1.0]) {
            assert!((got - want).abs() <= 1e-3);
        }
    }

    #[test]
    fn positive_path_has_no_recurrences() {
        let g = TimeGrid::new(1.0, 0.01).unwrap();
        let z = SamplePath::from_fn(g, PathKind::ZProcess, |t| 1.0 + t).unwrap();
        assert!(detect_recurrences(&z, 0.0).unwrap().is_empty());
    }

    #[test]
    fn zero_path_has_single_recurrence_and_no_excursions() {
        let g = TimeGrid::new(1.0, 0.01).unwrap();
        let z = SamplePath::from_fn(g, PathKind::ZProcess, |_| 0.0).unwrap();
        let rec = detect_recurrences(&z, 0.0).unwrap();
        assert_eq!(rec.taus, vec![0.0]);
        assert!(build_excursions(&z, &rec).is_empty());
    }

    #[test]
    fn tangency_is_not_a_recurrence() {
        let g = TimeGrid::new(1.0, 0.25).unwrap();
        let z = SamplePath::new(g, vec![1.0, 0.5, 0.0, 0.5, 1.0], PathKind::ZProcess).unwrap();
        assert!(detect_recurrences(&z, 0.0).unwrap().is_empty());
        // A positive tolerance treats the touch as a return to the level.
        assert_eq!(detect_recurrences(&z, 0.1).unwrap().taus, vec![0.5]);
    }

    #[test]
    fn crossing_is_linearly_interpolated() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        let z = SamplePath::new(g, vec![1.0, -3.0, -1.0], PathKind::ZProcess).unwrap();
        assert_eq!(detect_recurrences(&z, 0.0).unwrap().taus, vec![0.125]);
    }

    #[test]
    fn close_crossings_are_deduplicated() {
        let g = TimeGrid::new(1.0, 0.25).unwrap();
        let z = SamplePath::new(g, vec![1.0, 1.0, -0.1, 1.0, 1.0], PathKind::ZProcess).unwrap();
        let rec = detect_recurrences(&z, 0.0).unwrap();
        assert_eq!(rec.len(), 1);
    }

    #[test]
    fn negative_eps_is_rejected() {
        assert!(detect_recurrences(&sine_path(), -1.0).is_err());
    }

    #[test]
    fn sine_excursions() {
        let z = sine_path();
        let ex = build_excursions(&z, &detect_recurrences(&z, 0.0).unwrap());
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].side, Side::Above);
        assert_eq!(ex[1].side, Side::Below);
        assert!((ex[0].peak - 1.0).abs() < 1e-12 && (ex[1].peak - 1.0).abs() < 1e-12);
        assert!((ex[0].peak_time - 0.25).abs() <= 1e-3);
        assert!((ex[1].peak_time - 0.75).abs() <= 1e-3);
        let st = sojourn_stats(&ex);
        assert!((st.mean_above.unwrap() - 0.5).abs() <= 1e-3);
        assert!((st.mean_below.unwrap() - 0.5).abs() <= 1e-3);
        assert_eq!((st.count_above, st.count_below), (1, 1));
    }

    #[test]
    fn single_crossing_gives_no_open_excursion() {
        let g = TimeGrid::new(1.0, 0.01).unwrap();
        let z = SamplePath::from_fn(g, PathKind::ZProcess, |t| t - 0.505).unwrap();
        let rec = detect_recurrences(&z, 0.0).unwrap();
        assert_eq!(rec.len(), 1);
        assert!(build_excursions(&z, &rec).is_empty());
    }

    #[test]
    fn argmax_ties_take_earliest() {
        let g = TimeGrid::new(1.0, 0.2).unwrap();
        let z =
            SamplePath::new(g, vec![0.0, 2.0, 1.0, 2.0, 0.0, -1.0], PathKind::ZProcess).unwrap();
        let rec = RecurrenceSet {
            taus: vec![0.0, 0.8],
            eps: 0.0,
        };
        let ex = build_excursions(&z, &rec);
        assert_eq!(ex.len(), 1);
        assert!((ex[0].peak_time - 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_stats() {
        let st = sojourn_stats(&[]);
        assert_eq!((st.count_above, st.count_below), (0, 0));
        assert!(st.mean_above.is_none() && st.mean_below.is_none());
    }

    #[test]
    fn recurrence_sde_single_step() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        let w = WienerPath::from_values(g, vec![0.0, 1.0, 1.01]).unwrap();
        let p = GbmParams::new(0.1, 0.2, 100.0).unwrap();
        let path = simulate_recurrence_sde(&p, &w, 0.5, RecurrenceSdeForm::General).unwrap();
        assert_eq!(path.start_index, 1);
        assert!((path.taus[1] - 0.47).abs() < 1e-12, "{:?}", path.taus);
        let printed =
            simulate_recurrence_sde(&p, &w, 0.5, RecurrenceSdeForm::PrintedFinalLine).unwrap();
        // sigma / (sigma^2/2 - mu) + tau = -2.5 + 0.5
        assert!((printed.taus[1] - 0.52).abs() < 1e-12);
    }

    #[test]
    fn recurrence_sde_constant_without_noise() {
        let g = TimeGrid::new(1.0, 0.1).unwrap();
        let w =
            WienerPath::from_values(g, (0..11).map(|k| if k == 0 { 0.0 } else { 0.7 }).collect())
                .unwrap();
        let p = GbmParams::new(0.1, 0.2, 100.0).unwrap();
        let path = simulate_recurrence_sde(&p, &w, 0.3, RecurrenceSdeForm::General).unwrap();
        assert!(path.taus.iter().all(|&t| t == 0.3));
    }

    #[test]
    fn recurrence_sde_singularities() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        let w = WienerPath::from_values(g, vec![0.0, 1.0, 1.01]).unwrap();
        let flat = GbmParams::new(0.02, 0.2, 100.0).unwrap();
        assert!(matches!(
            simulate_recurrence_sde(&flat, &w, 0.5, RecurrenceSdeForm::General),
            Err(Error::Singular(_))
        ));
        let p = GbmParams::new(0.1, 0.2, 100.0).unwrap();
        let err = simulate_recurrence_sde(&p, &w, 0.0, RecurrenceSdeForm::General).unwrap_err();
        assert!(err.to_string().contains("index 0"), "{err}");
    }

    #[test]
    fn bound_report_on_sine() {
        let z = sine_path();
        let ex = build_excursions(&z, &detect_recurrences(&z, 0.0).unwrap());
        let rep = oet_bound_report(&ex, &ItoParams::constant(0.08, 0.2, 0.0), &z);
        assert!(rep.all_contained);
        for r in &rep.rows {
            assert!(r.dt_oet < r.dtau);
            assert!((r.ratio.unwrap() - 2.5).abs() < 1e-12);
            assert!(r.flagged);
        }
        let no_drift = oet_bound_report(&ex, &ItoParams::constant(0.0, 0.2, 0.0), &z);
        assert!(no_drift
            .rows
            .iter()
            .all(|r| r.ratio.is_none() && !r.flagged));
    }

    #[test]
    fn profit_of_empty_ledger_is_zero() {
        let ledger = TradeLedger {
            excursions: vec![],
            entry_prices: vec![],
            exit_prices: vec![],
            long_leverage: 1.0,
            short_leverage: 1.0,
            indicator: IndicatorMode::PerExcursion,
        };
        assert_eq!(trade_profit(&ledger).unwrap(), 0.0);
    }

    #[test]
    fn profit_single_long_leg() {
        let ledger = TradeLedger {
            excursions: vec![excursion(0, Side::Below)],
            entry_prices: vec![100.0],
            exit_prices: vec![110.0],
            long_leverage: 2.0,
            short_leverage: 1.0,
            indicator: IndicatorMode::PerExcursion,
        };
        assert_eq!(trade_profit(&ledger).unwrap(), 20.0);
    }

    #[test]
    fn profit_rejects_negative_leverage() {
        let ledger = TradeLedger {
            excursions: vec![excursion(0, Side::Below)],
            entry_prices: vec![100.0],
            exit_prices: vec![110.0],
            long_leverage: -2.0,
            short_leverage: 1.0,
            indicator: IndicatorMode::PerExcursion,
        };
        assert!(trade_profit(&ledger).is_err());
    }

    #[test]
    fn profit_matches_brute_force_over_classes() {
        let sides = [Side::Above, Side::Below, Side::Below, Side::Above];
        let entry = [100.0, 95.0, 101.0, 99.0];
        let exit = [97.5, 99.0, 100.0, 104.0];
        let (l, s) = (1.5, 0.75);
        let ledger = TradeLedger {
            excursions: sides
                .iter()
                .enumerate()
                .map(|(i, &sd)| excursion(i, sd))
                .collect(),
            entry_prices: entry.to_vec(),
            exit_prices: exit.to_vec(),
            long_leverage: l,
            short_leverage: s,
            indicator: IndicatorMode::PerExcursion,
        };
        let mut brute = 0.0;
        for i in 0..4 {
            let gain = (entry[i] - exit[i]).abs();
            brute += match sides[i] {
                Side::Below => l * gain,
                Side::Above => s * gain,
            };
        }
        assert!((trade_profit(&ledger).unwrap() - brute).abs() < 1e-12);

        let literal = TradeLedger {
            indicator: IndicatorMode::Literal,
            ..ledger
        };
        let tail: f64 = (1..4).map(|i| (entry[i] - exit[i]).abs()).sum();
        assert!((trade_profit(&literal).unwrap() - (l + s) * tail).abs() < 1e-12);
    }

    #[test]
    fn sine_signals() {
        let z = sine_path();
        let ex = build_excursions(&z, &detect_recurrences(&z, 0.0).unwrap());
        let rep = generate_signals(&z, &ex);
        assert_eq!(rep.signals.len(), 2);
        assert_eq!(rep.signals[0].direction, Direction::Short);
        assert_eq!(rep.signals[1].direction, Direction::Long);
        assert!((rep.signals[0].entry_time - 0.0).abs() <= 1e-3);
        assert!((rep.signals[0].exit_time - 0.25).abs() <= 1e-3);
        assert!((rep.signals[1].entry_time - 0.5).abs() <= 1e-3);
        assert!((rep.signals[1].exit_time - 0.75).abs() <= 1e-3);
        assert!(generate_signals(&z, &[]).signals.is_empty());
    }
}
