//! Deterministic output emission: CSV files, the figure map, and gnuplot
//! scripts that redraw each figure from the CSVs.
//!
//! Numeric formatting is fixed at nine significant digits with `.` as the
//! decimal separator and `\n` line endings; identical resolved configurations
//! and seeds produce byte-identical files. Every output file starts with a
//! `# seed = ...` comment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{Kind, ScenarioFile};
use crate::estimate::{Control, DurationCoefs, DurationForm, Outcome};
use crate::mc::{run_mc, McConfig, McError, McRun, Scenario};
use crate::model::{ExitPanel, JobSearchPanel};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mc(#[from] McError),
}

/// Format with nine significant digits, shortest form, `.` separator.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !(1e-4..1e15).contains(&a) {
        return format!("{x:.8e}");
    }
    let exponent = a.log10().floor() as i32;
    let decimals = (8 - exponent).clamp(0, 17) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ReportError::Io {
            path: parent.display().to_string(),
            source: e,
        })?;
    }
    fs::write(path, content).map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn seed_header(seed: u64) -> String {
    format!("# seed = {seed}\n")
}

/// Run every scenario of a resolved configuration and emit all outputs.
/// Returns the full list of files written.
pub fn run_and_emit(scenario: &ScenarioFile) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    let resolved = scenario.out_dir.join("resolved_config");
    write_file(&resolved, &(seed_header(scenario.seed) + &scenario.to_config_text()))?;
    written.push(resolved);
    for (label, mc_config) in scenario.mc_configs() {
        let dir = match &label {
            Some(l) => scenario.out_dir.join(l),
            None => scenario.out_dir.clone(),
        };
        let run = run_mc(&mc_config)?;
        written.extend(emit_outputs(&dir, scenario, &mc_config, &run)?);
    }
    Ok(written)
}

/// Emit the CSV set, figure map and (optionally) plot scripts for one
/// completed run.
pub fn emit_outputs(
    dir: &Path,
    scenario: &ScenarioFile,
    config: &McConfig,
    run: &McRun,
) -> Result<Vec<PathBuf>, ReportError> {
    let seed = config.base_seed;
    let mut csvs: Vec<(String, String)> = Vec::new();

    csvs.push(("panel.csv".into(), panel_csv(config)));

    for (name, stats) in &run.summary.series {
        let mut body = String::from("t,mean,p01,p05,p10,p90,p95,p99\n");
        for (idx, s) in stats.iter().enumerate() {
            let _ = write!(body, "{},{}", idx + 1, fmt_sig9(s.mean));
            for p in s.percentiles {
                let _ = write!(body, ",{}", fmt_sig9(p));
            }
            body.push('\n');
        }
        csvs.push((format!("mc_summary_{name}.csv"), body));
    }

    csvs.push(("estimates_saturated.csv".into(), estimates_saturated_csv(config, run)));
    csvs.push(("estimates_linear.csv".into(), estimates_linear_csv(config, run)));
    csvs.push(("dynamic_selection.csv".into(), selection_csv(run)));

    for &outcome in config.scenario.outcomes() {
        csvs.push((
            format!("residuals_{}.csv", outcome.as_str()),
            residuals_csv(run, outcome),
        ));
    }

    if run
        .replications
        .first()
        .is_some_and(|r| r.fits.iter().any(|f| f.proxy_corr.is_some()))
    {
        csvs.push(("proxy_corr.csv".into(), proxy_corr_csv(run)));
    }

    let mut written = Vec::new();
    let header = seed_header(seed);
    for (name, body) in &csvs {
        let path = dir.join(name);
        write_file(&path, &(header.clone() + body))?;
        written.push(path);
    }

    // Figure map: every CSV exactly once.
    let mut map = header.clone();
    for (name, _) in &csvs {
        let _ = writeln!(map, "{name} -> {}", figure_slot(name));
    }
    let map_path = dir.join("figure_map.txt");
    write_file(&map_path, &map)?;
    written.push(map_path);

    if scenario.emit_plots {
        for (name, body) in plot_scripts(scenario, config, run) {
            let path = dir.join(name);
            write_file(&path, &(header.clone() + &body))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Which figure analogue consumes a CSV.
fn figure_slot(name: &str) -> String {
    let stem = name.trim_end_matches(".csv");
    if let Some(series) = stem.strip_prefix("mc_summary_") {
        if series == "alpha_s0" || series == "alpha_s1" {
            return "fig_selection (per-replication band source for the selection curves)".into();
        }
        if let Some(outcome) = series.strip_prefix("structural_") {
            return format!("fig_profiles_{outcome}, fig_estimates_{outcome} (structural solid line)");
        }
        if series == "empirical_callback_rate_spell" {
            return "fig_profiles_callback_rate (alternate rate profile averaged per spell)".into();
        }
        if let Some(outcome) = series.strip_prefix("empirical_") {
            return format!("fig_profiles_{outcome} (observed dashed line and percentile bands)");
        }
        if let Some((estimator, outcome)) = split_estimator_series(series) {
            if estimator.starts_with("ols_proxy") {
                return format!("fig_proxy_{outcome} (noisy-proxy control, {estimator})");
            }
            return format!("fig_estimates_{outcome} ({estimator} level profile)");
        }
        return format!("fig_estimates ({series})");
    }
    match stem {
        "panel" => "reference dump of the first replication; not plotted".into(),
        "estimates_saturated" => "fig_estimates_* (per-replication dummy coefficients)".into(),
        "estimates_linear" => "fig_linear_coefs_* (slope draw distributions)".into(),
        "dynamic_selection" => "fig_selection (mean heterogeneity per duration)".into(),
        "proxy_corr" => "fig_proxy_* (realized proxy correlations, legend values)".into(),
        _ => {
            if let Some(outcome) = stem.strip_prefix("residuals_") {
                format!("fig_residuals_{outcome} (residual means by within-time and exit lead)")
            } else {
                "unmapped".into()
            }
        }
    }
}

fn split_estimator_series(series: &str) -> Option<(&str, &str)> {
    for outcome in ["applications", "callback_rate", "callbacks", "exit"] {
        if let Some(prefix) = series.strip_suffix(outcome) {
            if let Some(estimator) = prefix.strip_suffix('_') {
                return Some((estimator, outcome));
            }
        }
    }
    None
}

fn panel_csv(config: &McConfig) -> String {
    match &config.scenario {
        Scenario::Sim1(c) => {
            let panel: ExitPanel = crate::sim1::generate(c, config.base_seed, 0);
            let mut body = String::from("id,t,alpha,t_obs,censored,hazard,y\n");
            for r in &panel.rows {
                let s = &panel.spells[r.id as usize];
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{},{}",
                    r.id,
                    r.t,
                    fmt_sig9(s.alpha),
                    s.t_obs,
                    u8::from(s.censored),
                    fmt_sig9(r.hazard),
                    r.y
                );
            }
            body
        }
        Scenario::Sim2(c) => {
            let (panel, _): (JobSearchPanel, _) = crate::sim2::generate(c, config.base_seed, 0);
            let mut body = String::from(
                "id,t,alpha,t_obs,censored,xi,a_count,c_count,o_count,exit_here,mean_a,cb_prob\n",
            );
            for r in &panel.rows {
                let s = &panel.spells[r.id as usize];
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.id,
                    r.t,
                    fmt_sig9(s.alpha),
                    s.t_obs,
                    u8::from(s.censored),
                    fmt_sig9(r.xi),
                    r.a_count,
                    r.c_count,
                    r.o_count,
                    u8::from(r.exit_here),
                    fmt_sig9(r.mean_a),
                    fmt_sig9(r.cb_prob)
                );
            }
            body
        }
    }
}

fn estimates_saturated_csv(config: &McConfig, run: &McRun) -> String {
    let tau_bar = config.scenario.tau_bar();
    let mut body = String::from("replication,outcome,spec,control,t,coef,level\n");
    for rep in &run.replications {
        for &outcome in config.scenario.outcomes() {
            let series = &rep.series[&format!("structural_{}", outcome.as_str())];
            for t in 1..=tau_bar {
                let level = series[t as usize - 1];
                let _ = writeln!(
                    body,
                    "{},{},structural,none,{},{},{}",
                    rep.k_index,
                    outcome.as_str(),
                    t,
                    fmt_sig9(level - series[0]),
                    fmt_sig9(level)
                );
            }
        }
        for fit in &rep.fits {
            if fit.spec.duration_form != DurationForm::Saturated {
                continue;
            }
            for t in 1..=tau_bar {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{},{}",
                    rep.k_index,
                    fit.spec.outcome.as_str(),
                    fit.spec.control.estimator(),
                    fit.spec.control.label(),
                    t,
                    fmt_sig9(fit.duration.offset_at(t)),
                    fmt_sig9(fit.profile.levels[t as usize - 1])
                );
            }
        }
    }
    body
}

/// Linear fits use a single `t = 0` row per fit: `coef` holds the slope and
/// `level` the first-period anchor level.
fn estimates_linear_csv(config: &McConfig, run: &McRun) -> String {
    let mut body = String::from("replication,outcome,spec,control,t,coef,level\n");
    for rep in &run.replications {
        for &outcome in config.scenario.outcomes() {
            let key = format!("structural_{}", outcome.as_str());
            let anchor = rep.series[&key][0];
            let _ = writeln!(
                body,
                "{},{},structural,none,0,{},{}",
                rep.k_index,
                outcome.as_str(),
                fmt_sig9(rep.slopes[&key]),
                fmt_sig9(anchor)
            );
        }
        for fit in &rep.fits {
            if fit.spec.duration_form != DurationForm::Linear {
                continue;
            }
            let slope = match fit.duration {
                DurationCoefs::Linear(s) => s,
                DurationCoefs::Saturated(_) => continue,
            };
            let _ = writeln!(
                body,
                "{},{},{},{},0,{},{}",
                rep.k_index,
                fit.spec.outcome.as_str(),
                fit.spec.control.estimator(),
                fit.spec.control.label(),
                fmt_sig9(slope),
                fmt_sig9(fit.profile.anchor_level)
            );
        }
    }
    body
}

fn selection_csv(run: &McRun) -> String {
    let mut body = String::from("t,mean_alpha_s0,mean_alpha_s1\n");
    let s0 = &run.summary.series["alpha_s0"];
    let s1 = &run.summary.series["alpha_s1"];
    for (idx, (a, b)) in s0.iter().zip(s1).enumerate() {
        let _ = writeln!(body, "{},{},{}", idx + 1, fmt_sig9(a.mean), fmt_sig9(b.mean));
    }
    body
}

fn residuals_csv(run: &McRun, outcome: Outcome) -> String {
    let mut merged = crate::diagnostics::ResidualProfile::default();
    for rep in &run.replications {
        merged.merge(&rep.residuals[outcome.as_str()]);
    }
    let mut body = String::from("bin_kind,bin,censored,mean_eps,mean_eps_within,count\n");
    for ((doubled, censored), bin) in &merged.within_time {
        let _ = writeln!(
            body,
            "within_time,{},{},{},{},{}",
            fmt_sig9(f64::from(*doubled) / 2.0),
            u8::from(*censored),
            fmt_sig9(bin.mean_eps()),
            fmt_sig9(bin.mean_eps_within()),
            fmt_sig9(bin.weight)
        );
    }
    for ((lead, censored), bin) in &merged.lead_to_exit {
        let _ = writeln!(
            body,
            "lead_to_exit,{},{},{},{},{}",
            lead,
            u8::from(*censored),
            fmt_sig9(bin.mean_eps()),
            fmt_sig9(bin.mean_eps_within()),
            fmt_sig9(bin.weight)
        );
    }
    body
}

fn proxy_corr_csv(run: &McRun) -> String {
    let mut body = String::from("replication,sigma_eta,corr\n");
    for rep in &run.replications {
        // One row per sigma; the underlying draw is shared across outcomes.
        let mut seen: Vec<u64> = Vec::new();
        for fit in &rep.fits {
            let (Control::NoisyAlpha { sigma_eta }, Some(corr)) =
                (fit.spec.control, fit.proxy_corr)
            else {
                continue;
            };
            if seen.contains(&sigma_eta.to_bits()) {
                continue;
            }
            seen.push(sigma_eta.to_bits());
            let _ = writeln!(
                body,
                "{},{},{}",
                rep.k_index,
                fmt_sig9(sigma_eta),
                fmt_sig9(corr)
            );
        }
    }
    body
}

fn outcome_label(outcome: Outcome) -> &'static str {
    match outcome {
        Outcome::ExitY => "exit rate",
        Outcome::Applications => "applications",
        Outcome::CallbackRate => "callback rate",
        Outcome::Callbacks => "callbacks",
    }
}

const GP_PRELUDE: &str = "set datafile separator \",\"\nset datafile missing \"nan\"\nset key outside\nset xlabel \"duration t\"\n# set terminal pngcairo size 900,620\n# set output \"figure.png\"\n";

/// Generate the gnuplot scripts for one run.
pub fn plot_scripts(
    scenario: &ScenarioFile,
    config: &McConfig,
    run: &McRun,
) -> Vec<(String, String)> {
    let mut scripts = Vec::new();
    for &outcome in config.scenario.outcomes() {
        let o = outcome.as_str();
        let ylab = outcome_label(outcome);

        let mut profiles = String::from(GP_PRELUDE);
        let _ = writeln!(profiles, "set ylabel \"{ylab}\"");
        profiles.push_str("set style fill transparent solid 0.15 noborder\n");
        let _ = writeln!(
            profiles,
            "plot 'mc_summary_empirical_{o}.csv' using 1:3:8 with filledcurves lc rgb \"#9cb7d4\" title \"p1..p99\", \\\n     'mc_summary_empirical_{o}.csv' using 1:4:7 with filledcurves lc rgb \"#5c86b8\" title \"p5..p95\", \\\n     'mc_summary_structural_{o}.csv' using 1:2 with lines lw 2 lc rgb \"black\" title \"structural (no attrition)\", \\\n     'mc_summary_empirical_{o}.csv' using 1:2 with lines dashtype 2 lw 2 lc rgb \"#c23b22\" title \"observed mean\""
        );
        scripts.push((format!("fig_profiles_{o}.gp"), profiles));

        let mut estimates = String::from(GP_PRELUDE);
        let _ = writeln!(estimates, "set ylabel \"{ylab}\"");
        estimates.push_str("set style fill transparent solid 0.15 noborder\n");
        let mut lines = vec![
            format!("'mc_summary_fe_{o}.csv' using 1:3:8 with filledcurves lc rgb \"#b8a1c9\" title \"fe p1..p99\""),
            format!("'mc_summary_structural_{o}.csv' using 1:2 with lines lw 2 lc rgb \"black\" title \"structural\""),
        ];
        for estimator in ["ols", "ols_alpha", "fe"] {
            if run.summary.series.contains_key(&format!("{estimator}_{o}")) {
                lines.push(format!(
                    "'mc_summary_{estimator}_{o}.csv' using 1:2 with lines lw 2 title \"{}\"",
                    estimator.replace('_', " + ")
                ));
            }
        }
        let _ = writeln!(estimates, "plot {}", lines.join(", \\\n     "));
        scripts.push((format!("fig_estimates_{o}.gp"), estimates));

        let mut residuals = String::from(GP_PRELUDE);
        residuals.push_str("set ylabel \"mean within residual\"\nset multiplot layout 1,2\n");
        let _ = writeln!(residuals, "set xlabel \"within-time\"");
        let _ = writeln!(
            residuals,
            "plot 'residuals_{o}.csv' using (strcol(1) eq \"within_time\" && $3 == 0 ? $2 : NaN):5 with linespoints title \"non-censored\", \\\n     'residuals_{o}.csv' using (strcol(1) eq \"within_time\" && $3 == 1 ? $2 : NaN):5 with linespoints title \"censored\""
        );
        let _ = writeln!(residuals, "set xlabel \"periods until last observation\"");
        let _ = writeln!(
            residuals,
            "plot 'residuals_{o}.csv' using (strcol(1) eq \"lead_to_exit\" && $3 == 0 ? $2 : NaN):5 with linespoints title \"non-censored\", \\\n     'residuals_{o}.csv' using (strcol(1) eq \"lead_to_exit\" && $3 == 1 ? $2 : NaN):5 with linespoints title \"censored\""
        );
        residuals.push_str("unset multiplot\n");
        scripts.push((format!("fig_residuals_{o}.gp"), residuals));

        let mut coefs = String::from(GP_PRELUDE);
        let _ = writeln!(coefs, "set ylabel \"replications\"");
        let _ = writeln!(coefs, "set xlabel \"linear duration coefficient, {ylab}\"");
        let _ = writeln!(
            coefs,
            "stats 'estimates_linear.csv' using (strcol(2) eq \"{o}\" && strcol(3) eq \"structural\" ? $6 : NaN) name \"S\" nooutput"
        );
        let _ = writeln!(
            coefs,
            "stats 'estimates_linear.csv' using (strcol(2) eq \"{o}\" && strcol(3) ne \"structural\" ? $6 : NaN) name \"A\" nooutput"
        );
        coefs.push_str("w = (A_max - A_min) / 30.0 + 1e-12\nbin(x) = w * (floor(x / w) + 0.5)\n");
        coefs.push_str(
            "set arrow 1 from S_mean, graph 0 to S_mean, graph 1 nohead lw 2 lc rgb \"black\"\n",
        );
        coefs.push_str("set style fill transparent solid 0.4\n");
        let mut hist_lines = Vec::new();
        for estimator in ["ols", "ols_alpha", "fe"] {
            if run.summary.slope_draws.contains_key(&format!("{estimator}_{o}")) {
                hist_lines.push(format!(
                    "'estimates_linear.csv' using (strcol(2) eq \"{o}\" && strcol(3) eq \"{estimator}\" ? bin($6) : NaN):(1.0) smooth freq with boxes title \"{estimator}\""
                ));
            }
        }
        let _ = writeln!(coefs, "plot {}", hist_lines.join(", \\\n     "));
        scripts.push((format!("fig_linear_coefs_{o}.gp"), coefs));

        if scenario.kind == Kind::Sim2 && !scenario.proxy_sds.is_empty() {
            let mut proxy = String::from(GP_PRELUDE);
            let _ = writeln!(proxy, "set ylabel \"{ylab}\"");
            let mut lines = vec![format!(
                "'mc_summary_structural_{o}.csv' using 1:2 with lines lw 2 lc rgb \"black\" title \"structural\""
            )];
            for sd in &scenario.proxy_sds {
                lines.push(format!(
                    "'mc_summary_ols_proxy_sd{sd}_{o}.csv' using 1:2 with lines lw 2 title \"proxy sd {sd}\""
                ));
            }
            let _ = writeln!(proxy, "plot {}", lines.join(", \\\n     "));
            scripts.push((format!("fig_proxy_{o}.gp"), proxy));
        }
    }

    let mut selection = String::from(GP_PRELUDE);
    selection.push_str("set ylabel \"mean heterogeneity\"\n");
    selection.push_str(
        "plot 'dynamic_selection.csv' using 1:2 with lines lw 2 title \"no attrition\", \\\n     'dynamic_selection.csv' using 1:3 with linespoints lw 2 title \"observed\"\n",
    );
    scripts.push(("fig_selection.gp".into(), selection));

    scripts.sort_by(|a, b| a.0.cmp(&b.0));
    scripts
}
