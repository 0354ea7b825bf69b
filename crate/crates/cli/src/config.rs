//! Run configuration shared by every command.

use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use trendskew::backtest::{BacktestConfig, PriceFormat, ReturnMode, SkewMode, WindowMode};
use trendskew::nonlinear::{compound_sigmoid_make, ActivationSpec};
use trendskew::simulate::{ReturnDistribution, SimConfig};
use trendskew::LinearFilter;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationConfig>,
    /// Longest period of the term structure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backtest: Option<BacktestSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid: Option<HybridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    Ema1 {
        n: f64,
        #[serde(default = "yes")]
        normalized: bool,
    },
    /// `n = [Nα, Nβ]`.
    Ema2 {
        n: [f64; 2],
        #[serde(default = "yes")]
        normalized: bool,
    },
    /// Difference of two EMAs, `n = [fast, slow]`.
    Crossover { n: [f64; 2] },
    Combo {
        components: Vec<FilterConfig>,
        weights: Vec<f64>,
        #[serde(default)]
        normalized: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationConfig {
    Linear,
    Sigmoid { lambda: f64 },
    Reverting { lambda: f64 },
    DoubleStep { epsilon: f64 },
    /// Sigmoid plus reverting sigmoid with weight ratio `w_R / w_S`.
    Compound { lambda: f64, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub seed: u64,
    pub n_paths: usize,
    /// Days per path, burn-in included.
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    /// `gaussian`, `rademacher`, `uniform` or `student_t`.
    #[serde(default = "gaussian")]
    pub distribution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    #[serde(default = "bootstrap")]
    pub bootstrap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn gaussian() -> String {
    "gaussian".into()
}

fn bootstrap() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestSection {
    /// Price file, relative to the config file.
    pub prices: PathBuf,
    #[serde(default)]
    pub format: FormatConfig,
    #[serde(default = "n_vol")]
    pub n_vol: f64,
    /// `absolute` or `relative` price changes.
    #[serde(default = "absolute")]
    pub returns: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_warmup: Option<usize>,
    /// `overlapping` or `disjoint`.
    #[serde(default = "overlapping")]
    pub window: String,
    /// Period of the performance summary.
    #[serde(default = "summary_period")]
    pub summary_period: usize,
}

fn n_vol() -> f64 {
    20.0
}

fn absolute() -> String {
    "absolute".into()
}

fn overlapping() -> String {
    "overlapping".into()
}

fn summary_period() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatConfig {
    pub delimiter: char,
    pub date_column: String,
    pub price_column: String,
    pub date_format: String,
}

impl Default for FormatConfig {
    fn default() -> Self {
        let d = PriceFormat::default();
        Self {
            delimiter: d.delimiter as char,
            date_column: d.date_column,
            price_column: d.price_column,
            date_format: d.date_format,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub periods: Vec<usize>,
    #[serde(default = "truncation_tol")]
    pub truncation_tol: f64,
    /// Number of leading eigenvalues listed per period.
    #[serde(default = "top")]
    pub top: usize,
}

fn truncation_tol() -> f64 {
    trendskew::spectral::DEFAULT_TRUNCATION_TOL
}

fn top() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridConfig {
    pub fast: FilterConfig,
    pub slow: FilterConfig,
    /// Optional `[λF, λS]` to test against the constraint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub activations: Vec<ActivationConfig>,
    #[serde(default = "n_vol")]
    pub n_vol: f64,
    /// Price file, relative to the config file. Exclusive with `synthetic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticPath>,
}

/// Gaussian random walk that is flat for `flat_days` and then drifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPath {
    pub days: usize,
    #[serde(default)]
    pub flat_days: usize,
    pub drift: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "hundred")]
    pub start: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn hundred() -> f64 {
    100.0
}

// ─── loading and validation ────────────────────────────────────────────

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {}", e.to_string().trim_end())))
    }

    /// Reads a config file and resolves relative data paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = std::fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
        let resolve = |p: &Path| {
            let joined = base.join(p);
            std::fs::canonicalize(&joined).unwrap_or(joined)
        };
        if let Some(b) = &mut cfg.backtest {
            b.prices = resolve(&b.prices);
        }
        if let Some(p) = cfg.scenario.as_mut().and_then(|s| s.prices.as_mut()) {
            *p = resolve(p);
        }
        Ok(cfg)
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section.as_ref().ok_or_else(|| CliError::Config(format!("{name}: missing")))
    }

    pub fn filter(&self) -> Result<LinearFilter, CliError> {
        Self::require(&self.filter, "filter")?.build("filter")
    }

    pub fn activation_or_linear(&self) -> Result<ActivationSpec, CliError> {
        match &self.activation {
            Some(a) => a.build("activation"),
            None => Ok(ActivationSpec::linear()),
        }
    }

    pub fn p_max(&self) -> Result<usize, CliError> {
        match self.p_max {
            Some(0) => Err(CliError::Config("p_max: must be at least 1".into())),
            Some(p) => Ok(p),
            None => Err(CliError::Config("p_max: missing".into())),
        }
    }
}

/// Wraps a library validation error with the config field it came from.
fn at(path: &str) -> impl Fn(trendskew::Error) -> CliError + '_ {
    move |e| match e.category() {
        trendskew::ErrorCategory::Config => CliError::Config(format!("{path}: {e}")),
        _ => CliError::Core(e),
    }
}

impl FilterConfig {
    pub fn build(&self, path: &str) -> Result<LinearFilter, CliError> {
        match self {
            FilterConfig::Ema1 { n, normalized } => LinearFilter::ema1(*n, *normalized).map_err(at(&format!("{path}.n"))),
            FilterConfig::Ema2 { n, normalized } => {
                LinearFilter::ema2(n[0], n[1], *normalized).map_err(at(&format!("{path}.n")))
            }
            FilterConfig::Crossover { n } => LinearFilter::ema_crossover(n[0], n[1]).map_err(at(&format!("{path}.n"))),
            FilterConfig::Combo { components, weights, normalized } => {
                if components.len() != weights.len() || components.is_empty() {
                    return Err(CliError::Config(format!(
                        "{path}.weights: need one weight per component ({} components, {} weights)",
                        components.len(),
                        weights.len()
                    )));
                }
                let filters = components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.build(&format!("{path}.components[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let f = LinearFilter::combine(&filters, weights).map_err(at(&format!("{path}.components")))?;
                if *normalized {
                    f.normalize().map_err(at(&format!("{path}.normalized")))
                } else {
                    Ok(f)
                }
            }
        }
    }
}

impl ActivationConfig {
    pub fn build(&self, path: &str) -> Result<ActivationSpec, CliError> {
        match self {
            ActivationConfig::Linear => Ok(ActivationSpec::linear()),
            ActivationConfig::Sigmoid { lambda } => {
                ActivationSpec::simple_sigmoid(*lambda).map_err(at(&format!("{path}.lambda")))
            }
            ActivationConfig::Reverting { lambda } => {
                ActivationSpec::reverting_sigmoid(*lambda).map_err(at(&format!("{path}.lambda")))
            }
            ActivationConfig::DoubleStep { epsilon } => {
                ActivationSpec::double_step(*epsilon).map_err(at(&format!("{path}.epsilon")))
            }
            ActivationConfig::Compound { lambda, ratio } => {
                compound_sigmoid_make(*ratio, *lambda).map_err(at(&format!("{path}.ratio")))
            }
        }
    }
}

impl SimulateConfig {
    pub fn build(&self, p_max: usize) -> Result<SimConfig, CliError> {
        let distribution = match (self.distribution.as_str(), self.df) {
            ("gaussian", None) => ReturnDistribution::Gaussian,
            ("rademacher", None) => ReturnDistribution::Rademacher,
            ("uniform", None) => ReturnDistribution::UniformScaled,
            ("student_t", Some(df)) => ReturnDistribution::StudentT { df },
            ("student_t", None) => return Err(CliError::Config("simulate.df: required for student_t".into())),
            ("gaussian" | "rademacher" | "uniform", Some(_)) => {
                return Err(CliError::Config("simulate.df: only valid for student_t".into()))
            }
            (other, _) => {
                return Err(CliError::Config(format!(
                    "simulate.distribution: unknown `{other}`, expected gaussian, rademacher, uniform or student_t"
                )))
            }
        };
        distribution.validate().map_err(at("simulate.df"))?;
        if self.workers == Some(0) {
            return Err(CliError::Config("simulate.workers: must be positive".into()));
        }
        let mut cfg = SimConfig::new(self.seed, self.n_paths, self.horizon, p_max);
        cfg.burn_in = self.burn_in;
        cfg.distribution = distribution;
        cfg.bootstrap = self.bootstrap;
        cfg.workers = self.workers;
        Ok(cfg)
    }
}

impl FormatConfig {
    pub fn build(&self, path: &str) -> Result<PriceFormat, CliError> {
        if !self.delimiter.is_ascii() {
            return Err(CliError::Config(format!("{path}.delimiter: must be a single ASCII character")));
        }
        Ok(PriceFormat {
            delimiter: self.delimiter as u8,
            date_column: self.date_column.clone(),
            price_column: self.price_column.clone(),
            date_format: self.date_format.clone(),
        })
    }
}

impl BacktestSection {
    pub fn build(&self) -> Result<(BacktestConfig, WindowMode), CliError> {
        let returns = match self.returns.as_str() {
            "absolute" => ReturnMode::Absolute,
            "relative" => ReturnMode::Relative,
            other => {
                return Err(CliError::Config(format!(
                    "backtest.returns: unknown `{other}`, expected absolute or relative"
                )))
            }
        };
        let window = match self.window.as_str() {
            "overlapping" => WindowMode::Overlapping,
            "disjoint" => WindowMode::Disjoint,
            other => {
                return Err(CliError::Config(format!(
                    "backtest.window: unknown `{other}`, expected overlapping or disjoint"
                )))
            }
        };
        if !(self.n_vol > 0.0) {
            return Err(CliError::Config("backtest.n_vol: must be positive".into()));
        }
        if self.summary_period == 0 {
            return Err(CliError::Config("backtest.summary_period: must be at least 1".into()));
        }
        let cfg = BacktestConfig {
            n_vol: self.n_vol,
            returns,
            u_cap: self.u_cap,
            signal_warmup: self.signal_warmup,
        };
        Ok((cfg, window))
    }
}

pub fn skew_modes() -> [(SkewMode, &'static str); 2] {
    [(SkewMode::Central, "central"), (SkewMode::NonCentral, "noncentral")]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = Config::from_toml("[filter]\ntype = \"ema2\"\nn = [20, 40]\n").unwrap();
        assert_eq!(c.filter, Some(FilterConfig::Ema2 { n: [20.0, 40.0], normalized: true }));
        assert!(c.filter().unwrap().is_normalized());
        assert!(c.activation_or_linear().unwrap().is_linear());
        assert!(matches!(c.p_max(), Err(CliError::Config(m)) if m.contains("p_max")));
    }

    #[test]
    fn combo_builds_and_checks_weights() {
        let text = "[filter]\ntype = \"combo\"\nweights = [1.0, 2.0]\ncomponents = [\n  { type = \"crossover\", n = [5, 10] },\n  { type = \"crossover\", n = [20, 40] },\n]\n";
        let c = Config::from_toml(text).unwrap();
        let f = c.filter().unwrap();
        let parts = [LinearFilter::ema_crossover(5.0, 10.0).unwrap(), LinearFilter::ema_crossover(20.0, 40.0).unwrap()];
        let direct = LinearFilter::combine(&parts, &[1.0, 2.0]).unwrap();
        assert_eq!(f.weights(50), direct.weights(50));

        let bad = Config::from_toml(&text.replace("[1.0, 2.0]", "[1.0]")).unwrap();
        assert!(matches!(bad.filter(), Err(CliError::Config(m)) if m.contains("filter.weights")));
    }

    #[test]
    fn nested_errors_carry_the_path() {
        let text = "[filter]\ntype = \"combo\"\nweights = [1.0]\ncomponents = [{ type = \"ema1\", n = -3 }]\n";
        let c = Config::from_toml(text).unwrap();
        assert!(matches!(c.filter(), Err(CliError::Config(m)) if m.starts_with("filter.components[0].n")));
    }

    #[test]
    fn every_activation_parses() {
        for (text, label) in [
            ("type = \"linear\"", "linear"),
            ("type = \"sigmoid\"\nlambda = 1", "sigmoid"),
            ("type = \"reverting\"\nlambda = 1", "reverting"),
            ("type = \"double_step\"\nepsilon = 0.5", "double"),
            ("type = \"compound\"\nlambda = 0.7\nratio = 0.3", "compound"),
        ] {
            let c = Config::from_toml(&format!("[activation]\n{text}\n")).unwrap();
            let spec = c.activation_or_linear().unwrap();
            assert!(spec.label().to_lowercase().contains(label), "{}", spec.label());
        }
    }

    #[test]
    fn distribution_and_df_must_agree() {
        let sim = |extra: &str| {
            let c = Config::from_toml(&format!("[simulate]\nn_paths = 2\nhorizon = 10\n{extra}\n")).unwrap();
            c.simulate.unwrap().build(5)
        };
        assert!(sim("").is_ok());
        assert!(sim("distribution = \"student_t\"\ndf = 8").is_ok());
        assert!(matches!(sim("distribution = \"student_t\""), Err(CliError::Config(m)) if m.contains("simulate.df")));
        assert!(matches!(sim("distribution = \"student_t\"\ndf = 5"), Err(CliError::Config(m)) if m.contains("simulate.df")));
        assert!(matches!(sim("df = 8"), Err(CliError::Config(_))));
        assert!(matches!(sim("distribution = \"cauchy\""), Err(CliError::Config(m)) if m.contains("cauchy")));
    }

    #[test]
    fn json_round_trip() {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/scenario.toml")).unwrap();
        let c = Config::from_toml(&text).unwrap();
        let back: Config = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
