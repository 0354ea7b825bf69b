//! Empirical pipeline: prices to risk-adjusted returns, strategy P&L and
//! the skewness term structure of P-period returns.
//!
//! Volatility is an EMA of squared price changes,
//! `v_n = (1 − 1/N) v_{n−1} + (1/N)(X_n − X_{n−1})²`, seeded with the mean
//! of the first `⌈N⌉` squared changes, and `U_{n+1} = (X_{n+1} − X_n)/σ̂_n`.
//! The position held over `(n, n+1]` is `ψ(V_n)/σ̂_n`, so the daily P&L in
//! risk units is `ψ(V_n) U_{n+1}`.

use crate::error::{Error, Result};
use crate::filter::LinearFilter;
use crate::nonlinear::ActivationSpec;
use crate::spectral::{gram_charlier_prob, GramCharlier};
use crate::term::{skewness, MomentTermStructure};
use chrono::NaiveDate;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
    pub meta: String,
}

impl PriceSeries {
    /// Requires strictly increasing dates and finite prices.
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<f64>, meta: impl Into<String>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::param("prices", "dates and prices differ in length"));
        }
        if let Some(i) = prices.iter().position(|p| !p.is_finite()) {
            return Err(Error::PriceParse { row: i + 1, message: "non-finite price".into() });
        }
        if let Some(i) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::param("dates", format!("not strictly increasing at position {}", i + 1)));
        }
        Ok(Self { dates, prices, meta: meta.into() })
    }

    /// Consecutive calendar days from 2000-01-01; for synthetic paths.
    pub fn from_prices(prices: Vec<f64>, meta: impl Into<String>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = start.iter_days().take(prices.len()).collect();
        Self::new(dates, prices, meta)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// The first `n` observations.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            dates: self.dates[..n].to_vec(),
            prices: self.prices[..n].to_vec(),
            meta: self.meta.clone(),
        }
    }
}

/// Column layout of a delimited price file.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceFormat {
    pub delimiter: u8,
    pub date_column: String,
    pub price_column: String,
    /// chrono format string; ISO-8601 by default.
    pub date_format: String,
}

impl Default for PriceFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            date_column: "date".into(),
            price_column: "price".into(),
            date_format: "%Y-%m-%d".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPrices {
    pub series: PriceSeries,
    /// Set when rows were not in date order and had to be sorted.
    pub reordered: bool,
}

pub fn load_prices(path: impl AsRef<Path>, format: &PriceFormat) -> Result<LoadedPrices> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let meta = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_prices(file, format, meta)
}

/// Row numbers in errors count the header as row 1.
pub fn read_prices(reader: impl std::io::Read, format: &PriceFormat, meta: impl Into<String>) -> Result<LoadedPrices> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::PriceParse { row: 1, message: format!("missing column `{name}`") })
    };
    let (dc, pc) = (column(&format.date_column)?, column(&format.price_column)?);
    let mut rows: Vec<(NaiveDate, f64, usize)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(dc), &format.date_format)
            .map_err(|e| Error::PriceParse { row, message: format!("date `{}`: {e}", field(dc)) })?;
        let price: f64 = field(pc)
            .parse()
            .map_err(|e| Error::PriceParse { row, message: format!("price `{}`: {e}", field(pc)) })?;
        if !price.is_finite() {
            return Err(Error::PriceParse { row, message: format!("price `{}` is not finite", field(pc)) });
        }
        rows.push((date, price, row));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let reordered = rows.windows(2).any(|w| w[1].0 < w[0].0);
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[1].0 == w[0].0) {
        return Err(Error::DuplicateDate { row: w[0].2.max(w[1].2), date: w[1].0 });
    }
    let (dates, prices) = rows.into_iter().map(|(d, p, _)| (d, p)).unzip();
    Ok(LoadedPrices { series: PriceSeries::new(dates, prices, meta)?, reordered })
}

/// How a price change is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReturnMode {
    /// `X_n − X_{n−1}`
    #[default]
    Absolute,
    /// `X_n / X_{n−1} − 1`, for strictly positive prices.
    Relative,
}

/// Price changes `d[k]`, the change into price index `k + 1`.
pub fn price_changes(prices: &[f64], mode: ReturnMode) -> Result<Vec<f64>> {
    match mode {
        ReturnMode::Absolute => Ok(prices.windows(2).map(|w| w[1] - w[0]).collect()),
        ReturnMode::Relative => {
            if let Some(i) = prices.iter().position(|&p| p <= 0.0) {
                return Err(Error::PriceParse {
                    row: i + 1,
                    message: "relative returns need strictly positive prices".into(),
                });
            }
            Ok(prices.windows(2).map(|w| w[1] / w[0] - 1.0).collect())
        }
    }
}

/// `σ̂_n` for price indices `start_index..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolEstimate {
    pub start_index: usize,
    pub sigma_hat: Vec<f64>,
}

fn warmup_length(n_vol: f64) -> Result<usize> {
    if !(n_vol >= 1.0 && n_vol.is_finite()) {
        return Err(Error::InvalidPeriod(n_vol));
    }
    Ok(n_vol.ceil() as usize)
}

/// EMA volatility of the given changes (`changes[k]` belongs to index `k + 1`).
pub fn vol_from_changes(changes: &[f64], n_vol: f64) -> Result<VolEstimate> {
    let m = warmup_length(n_vol)?;
    if changes.len() < m {
        return Err(Error::InsufficientData { needed: m + 1, got: changes.len() + 1 });
    }
    let mut v = changes[..m].iter().map(|d| d * d).sum::<f64>() / m as f64;
    if !(v > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let w = 1.0 / n_vol;
    let mut sigma_hat = Vec::with_capacity(changes.len() - m + 1);
    sigma_hat.push(v.sqrt());
    for d in &changes[m..] {
        v = (1.0 - w) * v + w * d * d;
        sigma_hat.push(v.sqrt());
    }
    Ok(VolEstimate { start_index: m, sigma_hat })
}

/// EMA volatility of absolute price changes.
pub fn vol_estimate(prices: &[f64], n_vol: f64) -> Result<VolEstimate> {
    vol_from_changes(&price_changes(prices, ReturnMode::Absolute)?, n_vol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskAdjustedSeries {
    /// `σ̂_n` for `n = start_index..len`.
    pub sigma_hat: Vec<f64>,
    /// `u[i] = U_{start_index+1+i} = d_{start_index+1+i} / σ̂_{start_index+i}`.
    pub u: Vec<f64>,
    pub start_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub n_vol: f64,
    pub returns: ReturnMode,
    /// Clip `|U_n|` at this value. Off by default; output is then flagged
    /// non-canonical.
    pub u_cap: Option<f64>,
    /// Days of P&L dropped while the signal filter fills up. `None` means
    /// ten times the slowest filter time scale.
    pub signal_warmup: Option<usize>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self { n_vol: 20.0, returns: ReturnMode::Absolute, u_cap: None, signal_warmup: None }
    }
}

pub fn risk_adjust(prices: &[f64], cfg: &BacktestConfig) -> Result<RiskAdjustedSeries> {
    let changes = price_changes(prices, cfg.returns)?;
    let vol = vol_from_changes(&changes, cfg.n_vol)?;
    let m = vol.start_index;
    if changes.len() < m + 1 {
        return Err(Error::InsufficientData { needed: m + 2, got: prices.len() });
    }
    let u = changes[m..]
        .iter()
        .zip(&vol.sigma_hat)
        .map(|(d, s)| {
            let u = d / s;
            match cfg.u_cap {
                Some(cap) => u.clamp(-cap, cap),
                None => u,
            }
        })
        .collect();
    Ok(RiskAdjustedSeries { sigma_hat: vol.sigma_hat, u, start_index: m })
}

/// Filter time scale `1/(1 − max|α|)`.
pub(crate) fn slowest_scale(f: &LinearFilter) -> f64 {
    let m = f.max_pole_modulus();
    if m >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (1.0 - m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRun {
    /// `V_n` for price indices `signal_start..len`.
    pub signal: Vec<f64>,
    /// `ψ(V_n)/σ̂_n`, aligned with `signal`.
    pub positions: Vec<f64>,
    pub signal_start: usize,
    /// Daily P&L `ψ(V_n) U_{n+1}` for price indices `pnl_start..len`.
    pub pnl: Vec<f64>,
    pub pnl_start: usize,
    /// False when a non-default option (the U cap) altered the pipeline.
    pub canonical: bool,
}

pub fn run_strategy(prices: &[f64], f: &LinearFilter, spec: &ActivationSpec, cfg: &BacktestConfig) -> Result<StrategyRun> {
    if !spec.is_linear() && !f.is_normalized() {
        return Err(Error::NotNormalized(f.autocovariance(0)));
    }
    let ra = risk_adjust(prices, cfg)?;
    let mut state = f.state();
    let mut signal = Vec::with_capacity(ra.u.len());
    let mut positions = Vec::with_capacity(ra.u.len());
    let mut pnl = Vec::with_capacity(ra.u.len());
    for (i, &u) in ra.u.iter().enumerate() {
        if let Some(&prev) = signal.last() {
            pnl.push(spec.psi(prev) * u);
        }
        let v = state.push(u);
        signal.push(v);
        positions.push(spec.psi(v) / ra.sigma_hat[i + 1]);
    }
    let warmup = cfg
        .signal_warmup
        .unwrap_or_else(|| (10.0 * slowest_scale(f)).ceil().min(usize::MAX as f64) as usize);
    let drop = warmup.min(pnl.len());
    pnl.drain(..drop);
    Ok(StrategyRun {
        signal,
        positions,
        signal_start: ra.start_index + 1,
        pnl,
        pnl_start: ra.start_index + 2 + drop,
        canonical: cfg.u_cap.is_none(),
    })
}

/// Sums over P consecutive days: every start (overlapping) or blocks.
pub fn period_sums(pnl: &[f64], p: usize, disjoint: bool) -> Vec<f64> {
    if p == 0 || pnl.len() < p {
        return Vec::new();
    }
    if disjoint {
        return pnl.chunks_exact(p).map(|c| c.iter().sum()).collect();
    }
    let mut prefix = Vec::with_capacity(pnl.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for x in pnl {
        acc += x;
        prefix.push(acc);
    }
    (0..=pnl.len() - p).map(|i| prefix[i + p] - prefix[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkewMode {
    #[default]
    Central,
    /// Moments about zero.
    NonCentral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowMode {
    #[default]
    Overlapping,
    Disjoint,
}

/// Second and third moments with the influence-function standard error of
/// the skewness (meaningful for independent samples only).
pub(crate) fn sample_moments(y: &[f64], mode: SkewMode) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let mean = match mode {
        SkewMode::Central => y.iter().sum::<f64>() / n,
        SkewMode::NonCentral => 0.0,
    };
    let (mut m2, mut m3) = (0.0, 0.0);
    for x in y {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    let k = skewness(m2, m3);
    let mut var = 0.0;
    for x in y {
        let d = x - mean;
        let mut inf = (d * d * d - m3) / m2.powf(1.5) - 1.5 * k * (d * d - m2) / m2;
        if mode == SkewMode::Central {
            inf -= 3.0 * d / m2.sqrt();
        }
        var += inf * inf;
    }
    let se = (var / n).sqrt() / n.sqrt();
    (m2, m3, se)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTermStructure {
    pub term: MomentTermStructure,
    /// Periods dropped for having fewer than `3P` days of data.
    pub omitted: Vec<usize>,
    pub mode: SkewMode,
    pub window: WindowMode,
}

/// Skewness of P-period sums for `P = 1..=p_max`. Standard errors only in
/// disjoint mode.
pub fn empirical_term_structure(
    pnl: &[f64],
    p_max: usize,
    mode: SkewMode,
    window: WindowMode,
) -> Result<EmpiricalTermStructure> {
    if p_max == 0 {
        return Err(Error::param("P", "period must be at least 1"));
    }
    let disjoint = window == WindowMode::Disjoint;
    let (mut periods, mut mu2, mut mu3, mut se, mut counts, mut omitted) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for p in 1..=p_max {
        if pnl.len() < 3 * p {
            omitted.push(p);
            continue;
        }
        let y = period_sums(pnl, p, disjoint);
        let (m2, m3, s) = sample_moments(&y, mode);
        periods.push(p);
        mu2.push(m2);
        mu3.push(m3);
        se.push(s);
        counts.push(y.len());
    }
    if periods.is_empty() {
        return Err(Error::InsufficientData { needed: 3, got: pnl.len() });
    }
    let mut term = MomentTermStructure::from_moments(periods, mu2, mu3);
    if disjoint {
        term.se_kappa3 = Some(se);
    }
    term.n_samples = Some(counts);
    Ok(EmpiricalTermStructure { term, omitted, mode, window })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceSummary {
    pub p: usize,
    /// `κ1/κ2^{1/2}` of P-period returns; `None` when the variance is zero.
    pub sharpe: Option<f64>,
    pub kappa3: Option<f64>,
    /// Fraction of P-period returns above zero.
    pub win_fraction: f64,
    /// `Φ(𝔯) − κ3/(6√(2π))`, when both inputs are defined.
    pub gram_charlier: Option<GramCharlier>,
    pub n_windows: usize,
}

/// Statistics of overlapping P-period returns.
pub fn performance_summary(pnl: &[f64], p: usize) -> Result<PerformanceSummary> {
    if p == 0 {
        return Err(Error::param("P", "period must be at least 1"));
    }
    let y = period_sums(pnl, p, false);
    if y.is_empty() {
        return Err(Error::InsufficientData { needed: p, got: pnl.len() });
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let (m2, m3, _) = sample_moments(&y, SkewMode::Central);
    let defined = m2 > 0.0 && m2.is_finite();
    let sharpe = defined.then(|| mean / m2.sqrt());
    let kappa3 = defined.then(|| skewness(m2, m3));
    let win_fraction = y.iter().filter(|&&x| x > 0.0).count() as f64 / n;
    let gram_charlier = sharpe.zip(kappa3).map(|(s, k)| gram_charlier_prob(k, s));
    Ok(PerformanceSummary { p, sharpe, kappa3, win_fraction, gram_charlier, n_windows: y.len() })
}
