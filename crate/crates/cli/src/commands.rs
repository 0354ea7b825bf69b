//! One function per subcommand.

use crate::config::{skew_modes, Config, FormatConfig, ScenarioConfig};
use crate::manifest::Run;
use crate::{CliError, Command, CommonArgs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::collections::BTreeMap;
use trendskew::backtest;
use trendskew::simulate;
use trendskew::{linear, nonlinear, spectral, MomentTermStructure};

type Body = fn(&mut Run) -> Result<(), CliError>;

pub fn run(command: Command) -> Result<(), CliError> {
    let (name, args, body): (&str, CommonArgs, Body) = match command {
        Command::SkewLinear(a) => ("skew-linear", a, skew_linear),
        Command::SkewNonlinear(a) => ("skew-nonlinear", a, skew_nonlinear),
        Command::Hybrid(a) => ("hybrid", a, hybrid),
        Command::Simulate(a) => ("simulate", a, simulate_cmd),
        Command::Backtest(a) => ("backtest", a, backtest_cmd),
        Command::Spectral(a) => ("spectral", a, spectral_cmd),
        Command::Scenario(a) => ("scenario", a, scenario),
    };
    let mut config = Config::load(&args.config)?;
    let overrides = apply_overrides(&mut config, &args);
    if let Some(n) = args.workers.or(config.simulate.as_ref().and_then(|s| s.workers)) {
        if n == 0 {
            return Err(CliError::Config("--workers: must be positive".into()));
        }
        // only fails when a global pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut run = Run::new(name, &args.out, config)?;
    run.set_overrides(overrides);
    body(&mut run)?;
    let manifest = run.finish()?;
    for o in &manifest.outputs {
        println!("{}", args.out.join(o).display());
    }
    Ok(())
}

/// Flags win over config fields; each overridden field path is recorded.
fn apply_overrides(config: &mut Config, args: &CommonArgs) -> BTreeMap<String, serde_json::Value> {
    let mut applied = BTreeMap::new();
    if let Some(seed) = args.seed {
        if let Some(s) = &mut config.simulate {
            s.seed = seed;
            applied.insert("simulate.seed".into(), seed.into());
        }
        if let Some(s) = config.scenario.as_mut().and_then(|s| s.synthetic.as_mut()) {
            s.seed = seed;
            applied.insert("scenario.synthetic.seed".into(), seed.into());
        }
    }
    if let Some(w) = args.workers {
        if let Some(s) = &mut config.simulate {
            s.workers = Some(w);
            applied.insert("simulate.workers".into(), w.into());
        }
    }
    applied
}

fn csv_bytes(ts: &MomentTermStructure) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    ts.write_csv(&mut buf)?;
    Ok(buf)
}

fn skew_linear(run: &mut Run) -> Result<(), CliError> {
    let (f, p_max) = (run.config().filter()?, run.config().p_max()?);
    let ts = linear::skew_term_structure(&f, p_max)?;
    run.write("skew-linear.csv", &csv_bytes(&ts)?)
}

fn skew_nonlinear(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.config();
    let f = cfg.filter()?;
    let spec = Config::require(&cfg.activation, "activation")?.build("activation")?;
    let ts = nonlinear::nonlinear_term_structure(&f, &spec, cfg.p_max()?)?;
    run.write("skew-nonlinear.csv", &csv_bytes(&ts)?)
}

#[derive(Serialize)]
struct HybridReport {
    constraint: String,
    /// `[c3, c2, c1, c0]` of `Σ c_i λF^i λS^{3−i}`.
    coefficients: [f64; 4],
    /// Roots of the cubic in `λF/λS` as `[re, im]`.
    roots: Vec<[f64; 2]>,
    zeta_real: Option<f64>,
    inequality: Option<[f64; 2]>,
    weights: Option<[f64; 2]>,
    asymptotic_skew_positive: Option<bool>,
}

fn hybrid(run: &mut Run) -> Result<(), CliError> {
    let h = Config::require(&run.config().hybrid, "hybrid")?.clone();
    let fast = h.fast.build("hybrid.fast")?;
    let slow = h.slow.build("hybrid.slow")?;
    let c = linear::hybrid_roots(&fast, &slow)?;
    let report = HybridReport {
        constraint: c.describe(),
        coefficients: c.coefficients,
        roots: c.roots.all().iter().map(|z| [z.re, z.im]).collect(),
        zeta_real: c.zeta_real,
        inequality: c.inequality.map(|(u, v)| [u, v]),
        weights: h.weights,
        asymptotic_skew_positive: h.weights.map(|[lf, ls]| c.asymptotic_skew_positive(lf, ls)),
    };
    eprintln!("{}", report.constraint);
    run.write_json("hybrid.json", &report)
}

#[derive(Serialize)]
struct SimulateSummary {
    mean_daily: f64,
    se_mean_daily: f64,
    burn_in: usize,
    path_days: usize,
    warnings: Vec<String>,
}

fn simulate_cmd(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.config();
    let f = cfg.filter()?;
    let spec = cfg.activation_or_linear()?;
    let sim_cfg = Config::require(&cfg.simulate, "simulate")?.build(cfg.p_max()?)?;
    let out = simulate::simulate_term_structure(&sim_cfg, &f, &spec)?;
    run.seed(sim_cfg.seed);
    let warnings = out.warnings.iter().map(|w| format!("{w:?}")).collect::<Vec<_>>();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    run.write("simulate.csv", &csv_bytes(&out.term)?)?;
    run.write_json(
        "simulate.summary.json",
        &SimulateSummary {
            mean_daily: out.mean_daily,
            se_mean_daily: out.se_mean_daily,
            burn_in: out.burn_in,
            path_days: out.path_days,
            warnings,
        },
    )
}

#[derive(Serialize)]
struct BacktestSummary {
    instrument: String,
    days: usize,
    reordered: bool,
    canonical: bool,
    pnl_days: usize,
    /// Periods left out of the term structures for lack of data.
    omitted: Vec<usize>,
    p: usize,
    sharpe: Option<f64>,
    kappa3: Option<f64>,
    win_fraction: f64,
    gram_charlier: Option<f64>,
    gram_charlier_clamped: Option<bool>,
    n_windows: usize,
}

fn backtest_cmd(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.config();
    let f = cfg.filter()?;
    let spec = cfg.activation_or_linear()?;
    let p_max = cfg.p_max()?;
    let section = Config::require(&cfg.backtest, "backtest")?.clone();
    let (bt, window) = section.build()?;
    let format = section.format.build("backtest.format")?;
    let loaded = backtest::load_prices(&section.prices, &format)?;
    if loaded.reordered {
        eprintln!("warning: rows of {} were not in date order and have been sorted", section.prices.display());
    }
    let series = loaded.series;
    let strat = backtest::run_strategy(&series.prices, &f, &spec, &bt)?;
    let mut omitted = Vec::new();
    for (mode, label) in skew_modes() {
        let emp = backtest::empirical_term_structure(&strat.pnl, p_max, mode, window)?;
        omitted = emp.omitted;
        run.write(&format!("backtest.{label}.csv"), &csv_bytes(&emp.term)?)?;
    }
    let mut pnl = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    pnl.write_record(["date", "pnl"]).map_err(csv_err)?;
    for (i, x) in strat.pnl.iter().enumerate() {
        let date = series.dates[strat.pnl_start + i].format("%Y-%m-%d").to_string();
        pnl.write_record([date, x.to_string()]).map_err(csv_err)?;
    }
    let bytes = pnl.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    run.write("backtest.pnl.csv", &bytes)?;
    let s = backtest::performance_summary(&strat.pnl, section.summary_period)?;
    run.write_json(
        "backtest.summary.json",
        &BacktestSummary {
            instrument: series.meta.clone(),
            days: series.len(),
            reordered: loaded.reordered,
            canonical: strat.canonical,
            pnl_days: strat.pnl.len(),
            omitted,
            p: s.p,
            sharpe: s.sharpe,
            kappa3: s.kappa3,
            win_fraction: s.win_fraction,
            gram_charlier: s.gram_charlier.map(|g| g.probability),
            gram_charlier_clamped: s.gram_charlier.map(|g| g.clamped),
            n_windows: s.n_windows,
        },
    )
}

#[derive(Serialize)]
struct SpectralRow {
    p: usize,
    dim: usize,
    trace: f64,
    /// `2 tr Γ²` and `8 tr Γ³`.
    trace_mu2: f64,
    trace_mu3: f64,
    closed_mu2: f64,
    closed_mu3: f64,
    rank: usize,
    n_pos: usize,
    n_neg: usize,
    top_eigenvalues: Vec<f64>,
    bottom_eigenvalues: Vec<f64>,
    mgf_kappa1: f64,
    mgf_kappa2: f64,
    mgf_kappa3: f64,
    mgf_step: f64,
}

fn spectral_cmd(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.config();
    let f = cfg.filter()?;
    let sc = Config::require(&cfg.spectral, "spectral")?;
    if sc.periods.is_empty() || sc.periods.contains(&0) {
        return Err(CliError::Config("spectral.periods: need periods of at least 1".into()));
    }
    let mut rows = Vec::new();
    for &p in &sc.periods {
        let g = spectral::gamma_matrix(&f, p, sc.truncation_tol)?;
        let t = spectral::trace_moments(&g);
        let e = spectral::eigen_summary(&g)?;
        let c = spectral::cumulants_from_mgf(&f, p)?;
        let k = sc.top.min(e.eigenvalues.len());
        rows.push(SpectralRow {
            p,
            dim: g.dim(),
            trace: t.m1,
            trace_mu2: t.m2,
            trace_mu3: t.m3,
            closed_mu2: linear::second_moment(&f, p)?,
            closed_mu3: linear::third_moment_closed(&f, p)?,
            rank: e.rank,
            n_pos: e.n_pos,
            n_neg: e.n_neg,
            top_eigenvalues: e.eigenvalues[..k].to_vec(),
            bottom_eigenvalues: e.eigenvalues[e.eigenvalues.len() - k..].to_vec(),
            mgf_kappa1: c.kappa1,
            mgf_kappa2: c.kappa2,
            mgf_kappa3: c.kappa3,
            mgf_step: c.step,
        });
    }
    run.write_json("spectral.json", &rows)
}

fn scenario_prices(sc: &ScenarioConfig) -> Result<Vec<f64>, CliError> {
    match (&sc.prices, &sc.synthetic) {
        (Some(path), None) => {
            let format = match &sc.format {
                Some(f) => f.build("scenario.format")?,
                None => FormatConfig::default().build("scenario.format")?,
            };
            Ok(backtest::load_prices(path, &format)?.series.prices)
        }
        (None, Some(s)) => {
            if s.flat_days > s.days {
                return Err(CliError::Config("scenario.synthetic.flat_days: exceeds days".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let mut x = s.start;
            Ok((0..s.days)
                .map(|i| {
                    let drift = if i < s.flat_days { 0.0 } else { s.drift };
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x += drift + s.sigma * z;
                    x
                })
                .collect())
        }
        _ => Err(CliError::Config("scenario: set exactly one of `prices` and `synthetic`".into())),
    }
}

fn scenario(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.config();
    let f = cfg.filter()?;
    let sc = Config::require(&cfg.scenario, "scenario")?.clone();
    if sc.activations.is_empty() {
        return Err(CliError::Config("scenario.activations: need at least one".into()));
    }
    let specs = sc
        .activations
        .iter()
        .enumerate()
        .map(|(i, a)| a.build(&format!("scenario.activations[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let prices = scenario_prices(&sc)?;
    if let Some(s) = &sc.synthetic {
        run.seed(s.seed);
    }
    let curves = specs
        .iter()
        .map(|s| simulate::scenario_run(&prices, &f, s, sc.n_vol))
        .collect::<Result<Vec<_>, _>>()?;
    let days = curves[0].len();
    let offset = prices.len() - days;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    let mut header = vec!["day".to_string(), "price".to_string()];
    header.extend(specs.iter().map(|s| s.label()));
    w.write_record(&header).map_err(csv_err)?;
    for d in 0..days {
        let mut row = vec![(offset + d).to_string(), prices[offset + d].to_string()];
        row.extend(curves.iter().map(|c| c[d].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    for (s, c) in specs.iter().zip(&curves) {
        eprintln!("{}: terminal P&L {:.4}", s.label(), c.last().copied().unwrap_or(0.0));
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    run.write("scenario.csv", &bytes)
}
