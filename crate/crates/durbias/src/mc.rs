//! Replication harness: runs independent replications of a scenario, fits
//! every requested specification, and aggregates per-duration means and
//! percentile bands.
//!
//! Replications execute concurrently up to a configurable worker count; the
//! merge is keyed by replication index, so results are bit-identical across
//! thread counts and completion orders. Per-duration series are aggregated
//! with equal replication weights (the mean of the per-replication curves,
//! never a pooled row count).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::diagnostics::{
    dynamic_selection, fe_bias_decomposition, residual_profiles, BiasDecomposition,
    ResidualProfile,
};
use crate::estimate::{
    empirical_series, fit, structural_profile, structural_series, Control, DurationCoefs,
    DurationForm, EstimError, FitResult, Outcome, OutcomePanel, ProxyDraws, RegressionSpec,
    SampleView,
};
use crate::sim1::Sim1Config;
use crate::sim2::{ClampStats, Sim2Config};

/// The six percentiles reported for every band.
pub const PERCENTILES: [u8; 6] = [1, 5, 10, 90, 95, 99];

/// Which data-generating process a run simulates.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Sim1(Sim1Config),
    Sim2(Sim2Config),
}

impl Scenario {
    pub fn outcomes(&self) -> &'static [Outcome] {
        match self {
            Scenario::Sim1(_) => &[Outcome::ExitY],
            Scenario::Sim2(_) => {
                &[Outcome::Applications, Outcome::CallbackRate, Outcome::Callbacks]
            }
        }
    }

    pub fn tau_bar(&self) -> u32 {
        match self {
            Scenario::Sim1(c) => c.tau_bar,
            Scenario::Sim2(c) => c.tau_bar,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Scenario::Sim1(c) => c.validate(),
            Scenario::Sim2(c) => c.validate(),
        }
    }
}

/// Replication-harness configuration.
#[derive(Debug, Clone)]
pub struct McConfig {
    /// Number of replications.
    pub k: u32,
    pub base_seed: u64,
    pub scenario: Scenario,
    /// Specifications fitted on every replication.
    pub specs: Vec<RegressionSpec>,
    /// Worker threads; 0 picks the library default.
    pub workers: usize,
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.k < 1 {
            return Err(McError::Config("k must be >= 1".into()));
        }
        self.scenario.validate().map_err(McError::Config)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("replication {replication}, spec {spec}: {source}")]
    Fit {
        replication: u32,
        spec: String,
        source: EstimError,
    },
}

/// Exact identity material for one outcome of one replication: the fitted
/// fixed-effects slope must equal the structural within slope plus the bias
/// ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub fe_slope: f64,
    pub decomposition: BiasDecomposition,
}

/// Everything retained from one replication.
#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub k_index: u32,
    /// Per-duration series, keyed by series name.
    pub series: BTreeMap<String, Vec<f64>>,
    /// All requested fits, in spec order.
    pub fits: Vec<FitResult>,
    /// Linear slopes by `estimator_outcome` key, including the structural
    /// no-attrition slope.
    pub slopes: BTreeMap<String, f64>,
    /// Per-outcome slope decomposition.
    pub identity: BTreeMap<&'static str, IdentityCheck>,
    /// Per-outcome residual profiles.
    pub residuals: BTreeMap<&'static str, ResidualProfile>,
    /// Robustness-clamp counters (job-search scenario only).
    pub clamps: Option<ClampStats>,
}

/// Per-duration summary statistics across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationStat {
    pub mean: f64,
    /// Order statistics at [`PERCENTILES`].
    pub percentiles: [f64; 6],
    /// Replications contributing a finite value.
    pub count: u32,
}

/// Aggregated output of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub k: u32,
    pub tau_bar: u32,
    pub series: BTreeMap<String, Vec<DurationStat>>,
    /// Linear-slope draws per `estimator_outcome`, in replication order.
    pub slope_draws: BTreeMap<String, Vec<f64>>,
}

/// Full result of a run: the summary plus every replication.
#[derive(Debug, Clone)]
pub struct McRun {
    pub summary: McSummary,
    pub replications: Vec<ReplicationResult>,
}

/// Nearest-rank percentile: the value at 1-based index `ceil(p/100 * n)` of
/// the sorted input, computed in exact integer arithmetic. `None` on empty
/// input.
pub fn percentile(sorted: &[f64], p: u8) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let rank = (p as usize * n).div_ceil(100);
    Some(sorted[rank.clamp(1, n) - 1])
}

fn spec_key(spec: &RegressionSpec) -> String {
    format!("{}_{}", spec.control.estimator(), spec.outcome.as_str())
}

/// Run one replication: generate the panel, fit every spec, collect series
/// and diagnostics. Deterministic given `(config, k_index)`.
pub fn run_replication(config: &McConfig, k_index: u32) -> Result<ReplicationResult, McError> {
    match &config.scenario {
        Scenario::Sim1(c) => {
            let panel = crate::sim1::generate(c, config.base_seed, k_index);
            let mut result = analyze(&panel, config, k_index, None)?;
            result.clamps = None;
            Ok(result)
        }
        Scenario::Sim2(c) => {
            let (panel, clamps) = crate::sim2::generate(c, config.base_seed, k_index);
            if *c == (Sim2Config { n: c.n, tau_bar: c.tau_bar, ..Default::default() }) {
                // Default calibration keeps both clamps slack.
                assert_eq!(clamps, ClampStats::default(), "clamp engaged under defaults");
            }
            let mut result = analyze(&panel, config, k_index, Some(&panel))?;
            result.clamps = Some(clamps);
            Ok(result)
        }
    }
}

fn analyze<P: OutcomePanel>(
    panel: &P,
    config: &McConfig,
    k_index: u32,
    jobsearch: Option<&crate::model::JobSearchPanel>,
) -> Result<ReplicationResult, McError> {
    let outcomes = config.scenario.outcomes();
    let proxy = ProxyDraws { base_seed: config.base_seed, replication: k_index };
    let wrap = |spec: &RegressionSpec, source: EstimError| McError::Fit {
        replication: k_index,
        spec: format!(
            "{}:{}:{}",
            spec.duration_form.as_str(),
            spec.control.estimator(),
            spec.outcome.as_str()
        ),
        source,
    };

    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut slopes: BTreeMap<String, f64> = BTreeMap::new();
    let mut identity = BTreeMap::new();
    let mut residuals = BTreeMap::new();

    for &outcome in outcomes {
        let name = outcome.as_str();
        series.insert(
            format!("structural_{name}"),
            structural_series(panel, outcome).map_err(|e| McError::Config(e.to_string()))?,
        );
        series.insert(
            format!("empirical_{name}"),
            empirical_series(panel, outcome).map_err(|e| McError::Config(e.to_string()))?,
        );
        let structural_lin = structural_profile(panel, outcome, DurationForm::Linear)
            .map_err(|e| McError::Config(e.to_string()))?;
        slopes.insert(
            format!("structural_{name}"),
            structural_lin.levels[1] - structural_lin.levels[0],
        );

        // Exact slope decomposition; the linear fixed-effects slope it must
        // reproduce is fitted regardless of the requested spec list.
        let fe_spec = RegressionSpec {
            outcome,
            duration_form: DurationForm::Linear,
            control: Control::FixedEffects,
            sample: SampleView::S1,
        };
        let fe_fit = fit(panel, &fe_spec, None).map_err(|e| wrap(&fe_spec, e))?;
        let fe_slope = match fe_fit.duration {
            DurationCoefs::Linear(s) => s,
            DurationCoefs::Saturated(_) => unreachable!(),
        };
        let decomposition =
            fe_bias_decomposition(panel, outcome).map_err(|e| McError::Config(e.to_string()))?;
        identity.insert(name, IdentityCheck { fe_slope, decomposition });
        residuals.insert(
            name,
            residual_profiles(panel, outcome).map_err(|e| McError::Config(e.to_string()))?,
        );
    }

    // Dynamic-selection curves.
    let curve = dynamic_selection(panel);
    series.insert("alpha_s0".into(), curve.mean_alpha_s0);
    series.insert("alpha_s1".into(), curve.mean_alpha_s1);

    // Spell-level callback rate per duration: each surviving spell's own
    // success share, averaged with equal spell weights. The first-period
    // value is the moment the calibration pins at 0.05.
    if let Some(js) = jobsearch {
        let tau_bar = js.tau_bar as usize;
        let mut sums = vec![0.0f64; tau_bar];
        let mut counts = vec![0u32; tau_bar];
        for r in js.s1_view() {
            if r.a_count > 0 {
                sums[r.t as usize - 1] += f64::from(r.c_count) / f64::from(r.a_count);
                counts[r.t as usize - 1] += 1;
            }
        }
        series.insert(
            "empirical_callback_rate_spell".into(),
            sums.iter()
                .zip(&counts)
                .map(|(s, &c)| if c > 0 { s / f64::from(c) } else { f64::NAN })
                .collect(),
        );
    }

    // Requested fits; saturated fits also contribute level series, linear
    // fits contribute slope draws.
    let mut fits = Vec::with_capacity(config.specs.len());
    for spec in &config.specs {
        let res = fit(panel, spec, Some(&proxy)).map_err(|e| wrap(spec, e))?;
        match (&res.duration, spec.duration_form) {
            (DurationCoefs::Linear(s), DurationForm::Linear) => {
                slopes.insert(spec_key(spec), *s);
            }
            (DurationCoefs::Saturated(_), DurationForm::Saturated) => {
                series.insert(spec_key(spec), res.profile.levels.clone());
            }
            _ => unreachable!(),
        }
        fits.push(res);
    }

    Ok(ReplicationResult {
        k_index,
        series,
        fits,
        slopes,
        identity,
        residuals,
        clamps: None,
    })
}

/// Run all replications and aggregate.
pub fn run_mc(config: &McConfig) -> Result<McRun, McError> {
    config.validate()?;
    let replications = run_all(config)?;
    let summary = summarize(config, &replications);
    Ok(McRun { summary, replications })
}

#[cfg(feature = "parallel")]
fn run_all(config: &McConfig) -> Result<Vec<ReplicationResult>, McError> {
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if config.workers > 0 {
        builder = builder.num_threads(config.workers);
    }
    let pool = builder.build().map_err(|e| McError::Config(e.to_string()))?;
    pool.install(|| {
        (0..config.k)
            .into_par_iter()
            .map(|k| run_replication(config, k))
            .collect::<Result<Vec<_>, _>>()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_all(config: &McConfig) -> Result<Vec<ReplicationResult>, McError> {
    (0..config.k).map(|k| run_replication(config, k)).collect()
}

fn summarize(config: &McConfig, replications: &[ReplicationResult]) -> McSummary {
    let tau_bar = config.scenario.tau_bar();
    let mut series: BTreeMap<String, Vec<DurationStat>> = BTreeMap::new();
    if let Some(first) = replications.first() {
        for name in first.series.keys() {
            let mut stats = Vec::with_capacity(tau_bar as usize);
            for t_idx in 0..tau_bar as usize {
                let mut values: Vec<f64> = replications
                    .iter()
                    .filter_map(|r| {
                        let v = r.series[name][t_idx];
                        v.is_finite().then_some(v)
                    })
                    .collect();
                values.sort_unstable_by(f64::total_cmp);
                let count = values.len() as u32;
                let mean = if values.is_empty() {
                    f64::NAN
                } else {
                    values.iter().sum::<f64>() / values.len() as f64
                };
                let mut percentiles = [f64::NAN; 6];
                for (slot, p) in percentiles.iter_mut().zip(PERCENTILES) {
                    *slot = percentile(&values, p).unwrap_or(f64::NAN);
                }
                stats.push(DurationStat { mean, percentiles, count });
            }
            series.insert(name.clone(), stats);
        }
    }
    let mut slope_draws: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in replications {
        for (key, slope) in &r.slopes {
            slope_draws.entry(key.clone()).or_default().push(*slope);
        }
    }
    McSummary { k: config.k, tau_bar, series, slope_draws }
}

/// Default specification list for a scenario: pooled, heterogeneity-
/// controlled and fixed-effects estimators in both duration forms, plus
/// noisy-proxy variants on the saturated form for each requested sigma.
pub fn default_specs(scenario: &Scenario, proxy_sds: &[f64]) -> Vec<RegressionSpec> {
    let mut specs = Vec::new();
    for &outcome in scenario.outcomes() {
        for form in [DurationForm::Saturated, DurationForm::Linear] {
            for control in [Control::None, Control::TrueAlpha, Control::FixedEffects] {
                specs.push(RegressionSpec {
                    outcome,
                    duration_form: form,
                    control,
                    sample: SampleView::S1,
                });
            }
        }
        for &sd in proxy_sds {
            specs.push(RegressionSpec {
                outcome,
                duration_form: DurationForm::Saturated,
                control: Control::NoisyAlpha { sigma_eta: sd },
                sample: SampleView::S1,
            });
        }
    }
    specs
}
