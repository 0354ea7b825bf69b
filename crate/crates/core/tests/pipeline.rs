//! Cross-module checks: the exact, spectral, nonlinear, simulated and
//! empirical routes to the same term structure agree.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trendskew::backtest::{self, BacktestConfig, SkewMode, WindowMode};
use trendskew::nonlinear::{self, compound_sigmoid_make, ActivationSpec};
use trendskew::simulate::{self, ReturnDistribution, SimConfig};
use trendskew::{linear, spectral, LinearFilter};

fn random_walk(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 500.0;
    (0..n)
        .map(|_| {
            x += sigma * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

#[test]
fn backtest_on_simulated_prices_sits_in_the_analytic_band() {
    let f = LinearFilter::ema2(20.0, 40.0, true).unwrap();
    let prices = random_walk(300_000, 1.3, 5);
    let run = backtest::run_strategy(&prices, &f, &ActivationSpec::linear(), &BacktestConfig::default()).unwrap();
    let emp = backtest::empirical_term_structure(&run.pnl, 100, SkewMode::NonCentral, WindowMode::Overlapping).unwrap();
    let k = emp.term.kappa3_at(100).unwrap();
    assert!((1.5..=2.5).contains(&k), "κ3(100) = {k}");
}

#[test]
fn linear_strategy_wins_less_than_half_the_time_near_the_peak() {
    let f = LinearFilter::ema1(20.0, true).unwrap();
    let (p, _) = linear::skew_term_structure(&f, 100).unwrap().peak().unwrap();
    let paths = simulate::simulate_pnl_paths(&SimConfig::new(3, 50, 4000, p), &f, &ActivationSpec::linear()).unwrap();
    let pnl = paths.as_slice();
    let s = backtest::performance_summary(pnl, p).unwrap();
    assert!(s.win_fraction < 0.5, "win fraction {}", s.win_fraction);
    // Gram-Charlier with zero Sharpe also sits below one half
    assert!(s.gram_charlier.unwrap().probability < 0.5);
}

#[test]
fn non_gaussian_returns_leave_linear_skew_unchanged() {
    let f = LinearFilter::ema1(10.0, true).unwrap();
    let analytic = linear::skew_term_structure(&f, 30).unwrap();
    for (seed, dist) in [(21, ReturnDistribution::UniformScaled), (22, ReturnDistribution::StudentT { df: 10.0 })] {
        let mut cfg = SimConfig::new(seed, 400, 3000, 30);
        cfg.distribution = dist;
        let sim = simulate::simulate_term_structure(&cfg, &f, &ActivationSpec::linear()).unwrap();
        let se = sim.term.se_kappa3.as_ref().unwrap();
        for p in [5, 15, 30] {
            let z = (sim.term.kappa3[p - 1] - analytic.kappa3[p - 1]) / se[p - 1];
            assert!(z.abs() < 3.5, "{} P={p}: z = {z}", dist.label());
        }
        assert!(sim.mean_daily.abs() < 3.0 * sim.se_mean_daily);
    }
}

#[test]
fn compound_sigmoid_skew_at_100_days() {
    // Monotone decrease in λ and in the ratio w_R/w_S is an observation, not
    // a theorem: exceptions are printed, not asserted.
    let f = LinearFilter::ema2(20.0, 40.0, true).unwrap();
    let lambdas = [0.25, 0.5, 0.75, 1.0, 1.25];
    let ratios = [0.0, 0.25, 0.5, 1.0, 2.0];
    let mut grid = vec![vec![0.0; lambdas.len()]; ratios.len()];
    for (i, &r) in ratios.iter().enumerate() {
        for (j, &l) in lambdas.iter().enumerate() {
            let spec = compound_sigmoid_make(r, l).unwrap();
            let ts = nonlinear::nonlinear_term_structure(&f, &spec, 100).unwrap();
            grid[i][j] = ts.kappa3[99];
            assert!(grid[i][j].is_finite());
        }
    }
    let mut exceptions = Vec::new();
    for i in 0..ratios.len() {
        for j in 1..lambdas.len() {
            if grid[i][j] > grid[i][j - 1] {
                exceptions.push(format!("ratio {} : λ {} -> {}", ratios[i], lambdas[j - 1], lambdas[j]));
            }
        }
    }
    for j in 0..lambdas.len() {
        for i in 1..ratios.len() {
            if grid[i][j] > grid[i - 1][j] {
                exceptions.push(format!("λ {} : ratio {} -> {}", lambdas[j], ratios[i - 1], ratios[i]));
            }
        }
    }
    println!("compound sigmoid κ3(100) over ratio x λ: {grid:?}");
    println!("monotonicity exceptions: {exceptions:?}");
    // the pure sigmoid end of the grid is the most skewed
    assert!(grid[0][0] > grid[ratios.len() - 1][lambdas.len() - 1]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_route_to_the_third_moment_agrees(na in 2.0f64..30.0, gap in 1.0f64..30.0, p in 1usize..40) {
        let f = LinearFilter::ema2(na, na + gap, true).unwrap();
        let closed = linear::third_moment_closed(&f, p).unwrap();
        let direct = linear::third_moment_direct(&f, p).unwrap();
        let scale = linear::third_moment_scale(&f, p).unwrap().max(1e-300);
        prop_assert!((closed - direct).abs() <= 1e-9 * scale);

        let g = spectral::gamma_matrix(&f, p, spectral::DEFAULT_TRUNCATION_TOL).unwrap();
        let t = spectral::trace_moments(&g);
        prop_assert!((t.m3 - closed).abs() <= 1e-8 * scale);
        prop_assert!((t.m2 - linear::second_moment(&f, p).unwrap()).abs() <= 1e-8 * t.m2);

        // the explicit EMA2 formulas are for the unnormalised weights
        let raw = LinearFilter::ema2(na, na + gap, false).unwrap();
        let (m2, m3) = linear::ema2_moments_exact(na, na + gap, p).unwrap();
        // μ3 vanishes at P = 1, so measure errors in units of μ2^{3/2} too
        let raw_scale = linear::third_moment_scale(&raw, p).unwrap().max(m2.powf(1.5));
        prop_assert!((m3 - linear::third_moment_closed(&raw, p).unwrap()).abs() <= 1e-8 * raw_scale);
        prop_assert!((m2 - linear::second_moment(&raw, p).unwrap()).abs() <= 1e-8 * m2);
    }

    #[test]
    fn linear_activation_reproduces_the_linear_term_structure(n in 2.0f64..60.0) {
        let f = LinearFilter::ema1(n, true).unwrap();
        let a = nonlinear::nonlinear_term_structure(&f, &ActivationSpec::linear(), 60).unwrap();
        let b = linear::skew_term_structure(&f, 60).unwrap();
        for (x, y) in a.kappa3.iter().zip(&b.kappa3) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn odd_activations_flip_with_the_filter_sign(l in 0.2f64..2.0, p in 1usize..50) {
        // ψ odd: negating the filter negates every position, so the P&L and
        // its skewness flip sign
        let f = LinearFilter::ema1(15.0, true).unwrap();
        let spec = ActivationSpec::simple_sigmoid(l).unwrap();
        let a = nonlinear::nonlinear_term_structure(&f, &spec, p).unwrap();
        let b = nonlinear::nonlinear_term_structure(&f.negated(), &spec, p).unwrap();
        for (x, y) in a.kappa3.iter().zip(&b.kappa3) {
            prop_assert!((x + y).abs() < 1e-10);
        }
    }
}
