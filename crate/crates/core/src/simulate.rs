//! Seeded Monte Carlo: i.i.d. risk-adjusted returns through the strategy,
//! pooled moments of non-overlapping P-period returns, and path-block
//! bootstrap standard errors.
//!
//! Path `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so
//! results depend only on the seed and configuration, never on the number
//! of worker threads.

use crate::backtest::{self, slowest_scale, BacktestConfig};
use crate::error::{Error, Result};
use crate::filter::{FilterState, LinearFilter};
use crate::nonlinear::ActivationSpec;
use crate::term::{skewness, MomentTermStructure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use rayon::prelude::*;

/// Return distributions, all with moments `(0, 1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReturnDistribution {
    Gaussian,
    /// ±1 with equal probability.
    Rademacher,
    /// `√3 · U(−1, 1)`.
    UniformScaled,
    /// Student t scaled to unit variance; `df > 6`.
    StudentT { df: f64 },
}

impl ReturnDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReturnDistribution::StudentT { df } if !(df > 6.0) => {
                Err(Error::param("df", format!("student t needs df > 6 for finite sixth moments, got {df}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ReturnDistribution::Gaussian => "gaussian".into(),
            ReturnDistribution::Rademacher => "rademacher".into(),
            ReturnDistribution::UniformScaled => "uniform_scaled".into(),
            ReturnDistribution::StudentT { df } => format!("student_t({df})"),
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            ReturnDistribution::Gaussian => Sampler::Gaussian,
            ReturnDistribution::Rademacher => Sampler::Rademacher,
            ReturnDistribution::UniformScaled => Sampler::Uniform,
            ReturnDistribution::StudentT { df } => Sampler::StudentT {
                dist: StudentT::new(df).expect("validated df"),
                scale: ((df - 2.0) / df).sqrt(),
            },
        }
    }
}

enum Sampler {
    Gaussian,
    Rademacher,
    Uniform,
    StudentT { dist: StudentT<f64>, scale: f64 },
}

impl Sampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Gaussian => rng.sample(StandardNormal),
            Sampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Sampler::Uniform => 3f64.sqrt() * rng.random_range(-1.0..1.0),
            Sampler::StudentT { dist, scale } => scale * rng.sample(dist),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: usize,
    /// Simulated days per path, burn-in included.
    pub horizon: usize,
    /// Days discarded at the start of each path. `None`: zero when the
    /// filter state can be drawn from its stationary law (Gaussian returns,
    /// real poles), otherwise twenty times the slowest filter time scale.
    pub burn_in: Option<usize>,
    pub distribution: ReturnDistribution,
    pub p_max: usize,
    /// Bootstrap resamples of whole paths for the standard errors.
    pub bootstrap: usize,
    /// Thread count; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn new(seed: u64, n_paths: usize, horizon: usize, p_max: usize) -> Self {
        Self {
            seed,
            n_paths,
            horizon,
            burn_in: None,
            distribution: ReturnDistribution::Gaussian,
            p_max,
            bootstrap: 200,
            workers: None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be positive"));
        }
        if self.p_max == 0 {
            return Err(Error::param("p_max", "must be positive"));
        }
        Ok(())
    }

    /// Whether paths start from the stationary filter state.
    fn stationary_start(&self, f: &LinearFilter) -> bool {
        self.burn_in.is_none()
            && self.distribution == ReturnDistribution::Gaussian
            && f.poles().iter().all(|p| p.im == 0.0)
    }

    pub fn effective_burn_in(&self, f: &LinearFilter) -> usize {
        match self.burn_in {
            Some(b) => b,
            None if self.stationary_start(f) => 0,
            None => (20.0 * slowest_scale(f)).ceil().min(usize::MAX as f64) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimWarning {
    /// Nonlinear closed forms assume Gaussian returns.
    NonGaussianNonlinear,
}

/// Daily P&L, one row per path, after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct PnlPaths {
    pub n_paths: usize,
    pub days: usize,
    pub burn_in: usize,
    data: Vec<f64>,
    pub warnings: Vec<SimWarning>,
}

impl PnlPaths {
    pub fn path(&self, i: usize) -> &[f64] {
        &self.data[i * self.days..(i + 1) * self.days]
    }

    pub fn is_empty(&self) -> bool {
        self.days == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

fn check_inputs(cfg: &SimConfig, f: &LinearFilter, spec: &ActivationSpec) -> Result<Vec<SimWarning>> {
    cfg.validate()?;
    if !spec.is_linear() && !f.is_normalized() {
        return Err(Error::NotNormalized(f.autocovariance(0)));
    }
    let mut warnings = Vec::new();
    if !spec.is_linear() && cfg.distribution != ReturnDistribution::Gaussian {
        warnings.push(SimWarning::NonGaussianNonlinear);
    }
    Ok(warnings)
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn simulate_path(cfg: &SimConfig, f: &LinearFilter, spec: &ActivationSpec, path: usize, burn_in: usize) -> Vec<f64> {
    let mut rng = path_rng(cfg.seed, path);
    let sampler = cfg.distribution.sampler();
    let mut state = if cfg.stationary_start(f) {
        FilterState::stationary(f, &mut rng).unwrap_or_else(|| f.state())
    } else {
        f.state()
    };
    // the position entering day 1 uses one return already observed
    let mut position = spec.psi(state.push(sampler.draw(&mut rng)));
    let mut out = Vec::with_capacity(cfg.horizon.saturating_sub(burn_in));
    for day in 0..cfg.horizon {
        let u = sampler.draw(&mut rng);
        if day >= burn_in {
            out.push(position * u);
        }
        position = spec.psi(state.push(u));
    }
    out
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Daily P&L `ψ(V_n) U_{n+1}` for every path.
pub fn simulate_pnl_paths(cfg: &SimConfig, f: &LinearFilter, spec: &ActivationSpec) -> Result<PnlPaths> {
    let warnings = check_inputs(cfg, f, spec)?;
    let burn_in = cfg.effective_burn_in(f);
    let days = cfg.horizon.saturating_sub(burn_in);
    let rows: Vec<Vec<f64>> = in_pool(cfg.workers, || {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| simulate_path(cfg, f, spec, i, burn_in))
            .collect()
    })?;
    Ok(PnlPaths { n_paths: cfg.n_paths, days, burn_in, data: rows.concat(), warnings })
}

/// Per-path power sums of disjoint P-period returns.
#[derive(Debug, Clone, Copy, Default)]
struct PathSums {
    count: f64,
    s1: f64,
    s2: f64,
    s3: f64,
}

impl PathSums {
    fn add(&mut self, o: &PathSums) {
        self.count += o.count;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s3 += o.s3;
    }
}

fn path_sums(pnl: &[f64], p_max: usize) -> Vec<PathSums> {
    (1..=p_max)
        .map(|p| {
            let mut s = PathSums::default();
            for y in backtest::period_sums(pnl, p, true) {
                s.count += 1.0;
                s.s1 += y;
                s.s2 += y * y;
                s.s3 += y * y * y;
            }
            s
        })
        .collect()
}

fn kappa(s: &PathSums) -> f64 {
    skewness(s.s2 / s.count, s.s3 / s.count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTermStructure {
    /// Moments about zero of disjoint P-period returns, with bootstrap SEs.
    pub term: MomentTermStructure,
    /// Pooled mean P&L per day and its standard error across paths.
    pub mean_daily: f64,
    pub se_mean_daily: f64,
    pub burn_in: usize,
    pub path_days: usize,
    pub warnings: Vec<SimWarning>,
}

/// Skewness term structure for `P = 1..=p_max` from simulated paths.
pub fn simulate_term_structure(cfg: &SimConfig, f: &LinearFilter, spec: &ActivationSpec) -> Result<SimulatedTermStructure> {
    let warnings = check_inputs(cfg, f, spec)?;
    let burn_in = cfg.effective_burn_in(f);
    let days = cfg.horizon.saturating_sub(burn_in);
    if days < cfg.p_max {
        return Err(Error::InsufficientData { needed: cfg.p_max, got: days });
    }
    let per_path: Vec<(Vec<PathSums>, f64, f64)> = in_pool(cfg.workers, || {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let pnl = simulate_path(cfg, f, spec, i, burn_in);
                let total: f64 = pnl.iter().sum();
                let sq: f64 = pnl.iter().map(|x| x * x).sum();
                (path_sums(&pnl, cfg.p_max), total, sq)
            })
            .collect()
    })?;

    let mut pooled = vec![PathSums::default(); cfg.p_max];
    for (sums, _, _) in &per_path {
        for (acc, s) in pooled.iter_mut().zip(sums) {
            acc.add(s);
        }
    }
    let periods: Vec<usize> = (1..=cfg.p_max).collect();
    let mu2: Vec<f64> = pooled.iter().map(|s| s.s2 / s.count).collect();
    let mu3: Vec<f64> = pooled.iter().map(|s| s.s3 / s.count).collect();
    let mut term = MomentTermStructure::from_moments(periods, mu2, mu3);
    term.n_samples = Some(pooled.iter().map(|s| s.count as usize).collect());

    if cfg.n_paths > 1 && cfg.bootstrap > 1 {
        let mut rng = path_rng(cfg.seed, usize::MAX);
        let mut draws = vec![Vec::with_capacity(cfg.bootstrap); cfg.p_max];
        for _ in 0..cfg.bootstrap {
            let picks: Vec<usize> = (0..cfg.n_paths).map(|_| rng.random_range(0..cfg.n_paths)).collect();
            for (p, d) in draws.iter_mut().enumerate() {
                let mut acc = PathSums::default();
                for &i in &picks {
                    acc.add(&per_path[i].0[p]);
                }
                d.push(kappa(&acc));
            }
        }
        term.se_kappa3 = Some(draws.iter().map(|d| std_dev(d)).collect());
    }

    let n = (cfg.n_paths * days) as f64;
    let mean_daily = per_path.iter().map(|p| p.1).sum::<f64>() / n;
    let second = per_path.iter().map(|p| p.2).sum::<f64>() / n;
    // P&L is serially uncorrelated, so the daily variance sets the SE
    let se_mean_daily = ((second - mean_daily * mean_daily).max(0.0) / n).sqrt();
    Ok(SimulatedTermStructure {
        term,
        mean_daily,
        se_mean_daily,
        burn_in,
        path_days: cfg.n_paths * days,
        warnings,
    })
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Cumulative P&L of the full pipeline on a given price path, from the first
/// day a position is held. A path without any price movement yields zeros.
pub fn scenario_run(prices: &[f64], f: &LinearFilter, spec: &ActivationSpec, n_vol: f64) -> Result<Vec<f64>> {
    let cfg = BacktestConfig { n_vol, signal_warmup: Some(0), ..Default::default() };
    let warmup = n_vol.ceil().max(1.0) as usize;
    if prices.len() < warmup + 2 {
        return Err(Error::InsufficientData { needed: warmup + 2, got: prices.len() });
    }
    if prices.windows(2).all(|w| w[1] == w[0]) {
        return Ok(vec![0.0; prices.len() - warmup - 2]);
    }
    let run = backtest::run_strategy(prices, f, spec, &cfg)?;
    let mut acc = 0.0;
    Ok(run
        .pnl
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect())
}
