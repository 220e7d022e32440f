//! Browser demo: run small Monte Carlo experiments in the page and return
//! the curves as JSON for a vanilla-canvas plot.
//!
//! The payload builders are plain Rust and tested natively; the thin
//! wasm-bindgen exports are compiled only for the wasm32 target.

use serde::Serialize;

use durbias::estimate::Outcome;
use durbias::mc::{run_mc, McConfig, McRun, Scenario};
use durbias::sim1::Sim1Config;
use durbias::sim2::Sim2Config;
use durbias::toy::run_oracle_checks;

/// Everything one plot needs: per-duration curves, the observed and
/// fixed-effects percentile bands, selection curves, and the linear slopes.
#[derive(Debug, Serialize)]
struct DemoPayload {
    outcome: String,
    n: u32,
    k: u32,
    seed: u64,
    t: Vec<u32>,
    structural: Vec<f64>,
    empirical: Vec<f64>,
    empirical_lo: Vec<f64>,
    empirical_hi: Vec<f64>,
    ols: Vec<f64>,
    ols_alpha: Vec<f64>,
    fe: Vec<f64>,
    fe_lo: Vec<f64>,
    fe_hi: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    proxy: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    proxy_corr: Option<f64>,
    alpha_s0: Vec<f64>,
    alpha_s1: Vec<f64>,
    fe_slope_mean: f64,
    structural_slope_mean: f64,
}

#[derive(Debug, Serialize)]
struct DemoError {
    error: String,
}

fn error_json(message: impl Into<String>) -> String {
    serde_json::to_string(&DemoError { error: message.into() }).unwrap()
}

fn clamp_sizes(n: u32, k: u32) -> (u32, u32) {
    (n.clamp(20, 20_000), k.clamp(1, 200))
}

fn k_mean(run: &McRun, series: &str) -> Vec<f64> {
    run.summary.series[series].iter().map(|s| s.mean).collect()
}

fn band(run: &McRun, series: &str) -> (Vec<f64>, Vec<f64>) {
    let stats = &run.summary.series[series];
    // Percentile slots: [p01, p05, p10, p90, p95, p99].
    (
        stats.iter().map(|s| s.percentiles[1]).collect(),
        stats.iter().map(|s| s.percentiles[4]).collect(),
    )
}

fn payload(run: &McRun, outcome: Outcome, proxy_sd: Option<f64>, n: u32, seed: u64) -> DemoPayload {
    let o = outcome.as_str();
    let (empirical_lo, empirical_hi) = band(run, &format!("empirical_{o}"));
    let (fe_lo, fe_hi) = band(run, &format!("fe_{o}"));
    let slope_mean = |key: &str| {
        let draws = &run.summary.slope_draws[key];
        draws.iter().sum::<f64>() / draws.len() as f64
    };
    let proxy_key = proxy_sd.map(|sd| format!("ols_proxy_sd{sd}_{o}"));
    DemoPayload {
        outcome: o.to_string(),
        n,
        k: run.summary.k,
        seed,
        t: (1..=run.summary.tau_bar).collect(),
        structural: k_mean(run, &format!("structural_{o}")),
        empirical: k_mean(run, &format!("empirical_{o}")),
        empirical_lo,
        empirical_hi,
        ols: k_mean(run, &format!("ols_{o}")),
        ols_alpha: k_mean(run, &format!("ols_alpha_{o}")),
        fe: k_mean(run, &format!("fe_{o}")),
        fe_lo,
        fe_hi,
        proxy: proxy_key.as_deref().map(|key| k_mean(run, key)),
        proxy_corr: proxy_key.map(|_| {
            let mut corrs = Vec::new();
            for rep in &run.replications {
                for fit in &rep.fits {
                    if let Some(c) = fit.proxy_corr {
                        corrs.push(c);
                        break;
                    }
                }
            }
            corrs.iter().sum::<f64>() / corrs.len() as f64
        }),
        alpha_s0: k_mean(run, "alpha_s0"),
        alpha_s1: k_mean(run, "alpha_s1"),
        fe_slope_mean: slope_mean(&format!("fe_{o}")),
        structural_slope_mean: slope_mean(&format!("structural_{o}")),
    }
}

/// Exit-indicator scenario: curves for one structural duration parameter.
pub fn exit_demo_json(gamma: f64, n: u32, k: u32, seed: u64) -> String {
    let (n, k) = clamp_sizes(n, k);
    if !gamma.is_finite() {
        return error_json("gamma must be finite");
    }
    let scenario = Scenario::Sim1(Sim1Config { n, gamma, ..Default::default() });
    let specs = durbias::mc::default_specs(&scenario, &[]);
    let config = McConfig { k, base_seed: seed, scenario, specs, workers: 1 };
    match run_mc(&config) {
        Ok(run) => {
            serde_json::to_string(&payload(&run, Outcome::ExitY, None, n, seed)).unwrap()
        }
        Err(e) => error_json(e.to_string()),
    }
}

/// Job-search scenario: curves for one outcome, offer probability and
/// optional noisy-proxy control.
pub fn jobsearch_demo_json(
    outcome: &str,
    n: u32,
    k: u32,
    seed: u64,
    psi: f64,
    proxy_sd: f64,
) -> String {
    let (n, k) = clamp_sizes(n, k);
    let outcome = match outcome {
        "applications" => Outcome::Applications,
        "callback_rate" => Outcome::CallbackRate,
        "callbacks" => Outcome::Callbacks,
        other => return error_json(format!("unknown outcome '{other}'")),
    };
    if !(0.0..=1.0).contains(&psi) {
        return error_json("psi must lie in [0, 1]");
    }
    if !(proxy_sd >= 0.0) {
        return error_json("proxy sd must be >= 0");
    }
    let scenario = Scenario::Sim2(Sim2Config { n, psi, ..Default::default() });
    let proxy = (proxy_sd > 0.0).then_some(proxy_sd);
    let sds: Vec<f64> = proxy.into_iter().collect();
    let specs = durbias::mc::default_specs(&scenario, &sds);
    let config = McConfig { k, base_seed: seed, scenario, specs, workers: 1 };
    match run_mc(&config) {
        Ok(run) => serde_json::to_string(&payload(&run, outcome, proxy, n, seed)).unwrap(),
        Err(e) => error_json(e.to_string()),
    }
}

/// Hand-computed oracle checks as JSON rows.
pub fn oracle_checks_json() -> String {
    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        expected: f64,
        actual: f64,
        passed: bool,
    }
    let rows: Vec<Row> = run_oracle_checks()
        .into_iter()
        .map(|c| Row { name: c.name, expected: c.expected, actual: c.actual, passed: c.passed() })
        .collect();
    serde_json::to_string(&rows).unwrap()
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn run_exit_demo(gamma: f64, n: u32, k: u32, seed: u64) -> String {
        super::exit_demo_json(gamma, n, k, seed)
    }

    #[wasm_bindgen]
    pub fn run_jobsearch_demo(
        outcome: &str,
        n: u32,
        k: u32,
        seed: u64,
        psi: f64,
        proxy_sd: f64,
    ) -> String {
        super::jobsearch_demo_json(outcome, n, k, seed, psi, proxy_sd)
    }

    #[wasm_bindgen]
    pub fn run_oracle_checks() -> String {
        super::oracle_checks_json()
    }
}
