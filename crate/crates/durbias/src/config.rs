//! Scenario configuration: defaults, key-value config files, command-line
//! flag overrides, and the resolved-config echo.
//!
//! Precedence, lowest to highest: built-in defaults, `--config` file values,
//! the `DURBIAS_OUT_DIR` environment variable (output directory only), then
//! command-line flags. Unknown keys and flags are rejected. The fully
//! resolved configuration is echoed to `resolved_config` in the output
//! directory in the same format the parser accepts, so a run can be repeated
//! from its own echo.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::estimate::{Control, DurationForm, RegressionSpec, SampleView};
use crate::mc::{McConfig, Scenario};
use crate::sim1::Sim1Config;
use crate::sim2::Sim2Config;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "DURBIAS_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Sim1,
    Sim2,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Sim1 => "sim1",
            Kind::Sim2 => "sim2",
        }
    }
}

/// Estimator selector used in `specs` lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorSel {
    Ols,
    OlsAlpha,
    OlsProxy,
    Fe,
}

impl EstimatorSel {
    fn as_str(self) -> &'static str {
        match self {
            EstimatorSel::Ols => "ols",
            EstimatorSel::OlsAlpha => "ols_alpha",
            EstimatorSel::OlsProxy => "ols_proxy",
            EstimatorSel::Fe => "fe",
        }
    }
}

/// One `<form>:<estimator>` token from a `specs` list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecToken {
    pub form: DurationForm,
    pub estimator: EstimatorSel,
}

impl fmt::Display for SpecToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.form.as_str(), self.estimator.as_str())
    }
}

impl SpecToken {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let (form, estimator) = text
            .split_once(':')
            .ok_or_else(|| ConfigError::BadValue("specs".into(), text.into()))?;
        let form = match form {
            "linear" => DurationForm::Linear,
            "saturated" => DurationForm::Saturated,
            _ => return Err(ConfigError::BadValue("specs".into(), text.into())),
        };
        let estimator = match estimator {
            "ols" => EstimatorSel::Ols,
            "ols_alpha" => EstimatorSel::OlsAlpha,
            "ols_proxy" => EstimatorSel::OlsProxy,
            "fe" => EstimatorSel::Fe,
            _ => return Err(ConfigError::BadValue("specs".into(), text.into())),
        };
        Ok(SpecToken { form, estimator })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("unknown flag '{0}'")]
    UnknownFlag(String),
    #[error("flag '{0}' expects a value")]
    MissingValue(String),
    #[error("cannot parse value '{1}' for '{0}'")]
    BadValue(String, String),
    #[error("config file sets scenario '{file}', but the subcommand is '{cli}'")]
    ConflictingKind { file: String, cli: String },
    #[error("cannot read config file '{0}': {1}")]
    Io(String, String),
    #[error("invalid configuration: {0}")]
    Validation(String),
}

/// Fully resolved scenario configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub kind: Kind,
    pub n: u32,
    pub k: u32,
    pub tau_bar: u32,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub emit_plots: bool,
    /// Structural duration parameters; one run per value (exit scenario).
    pub gammas: Vec<f64>,
    pub alpha_mean: f64,
    pub nu_var: f64,
    pub beta: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub psi: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub xi_lo: f64,
    pub xi_hi: f64,
    /// Proxy-noise standard deviations fitted on the saturated form.
    pub proxy_sds: Vec<f64>,
    pub specs: Vec<SpecToken>,
}

impl ScenarioFile {
    /// Built-in defaults for a scenario kind.
    pub fn defaults(kind: Kind) -> Self {
        let s2 = Sim2Config::default();
        let s1 = Sim1Config::default();
        let all = |form| {
            [EstimatorSel::Ols, EstimatorSel::OlsAlpha, EstimatorSel::Fe]
                .into_iter()
                .map(move |estimator| SpecToken { form, estimator })
        };
        let mut specs: Vec<SpecToken> = all(DurationForm::Saturated).collect();
        if kind == Kind::Sim2 {
            specs.push(SpecToken {
                form: DurationForm::Saturated,
                estimator: EstimatorSel::OlsProxy,
            });
        }
        specs.extend(all(DurationForm::Linear));
        ScenarioFile {
            kind,
            n: 2000,
            k: 200,
            tau_bar: 15,
            seed: 42,
            workers: 0,
            out_dir: PathBuf::from(format!("out/{}", kind.as_str())),
            emit_plots: false,
            gammas: Sim1Config::GAMMA_GRID.to_vec(),
            alpha_mean: s1.alpha_mean,
            nu_var: s1.nu_var,
            beta: s2.beta,
            gamma0: s2.gamma0,
            gamma1: s2.gamma1,
            gamma2: s2.gamma2,
            psi: s2.psi,
            alpha_lo: s2.alpha_lo,
            alpha_hi: s2.alpha_hi,
            xi_lo: s2.xi_lo,
            xi_hi: s2.xi_hi,
            proxy_sds: if kind == Kind::Sim2 { vec![0.0, 0.5, 1.0, 2.0] } else { Vec::new() },
            specs,
        }
    }

    /// Apply one `key = value` pair from a config file.
    fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue(key.to_string(), value.to_string());
        match key {
            "scenario" => {
                let file_kind = match value {
                    "sim1" => Kind::Sim1,
                    "sim2" => Kind::Sim2,
                    _ => return Err(bad()),
                };
                if file_kind != self.kind {
                    return Err(ConfigError::ConflictingKind {
                        file: value.to_string(),
                        cli: self.kind.as_str().to_string(),
                    });
                }
            }
            "n" => self.n = value.parse().map_err(|_| bad())?,
            "k" => self.k = value.parse().map_err(|_| bad())?,
            "tau_bar" => self.tau_bar = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "workers" => self.workers = value.parse().map_err(|_| bad())?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "emit_plots" => self.emit_plots = value.parse().map_err(|_| bad())?,
            "gammas" => self.gammas = parse_f64_list(value).ok_or_else(bad)?,
            "alpha_mean" => self.alpha_mean = value.parse().map_err(|_| bad())?,
            "nu_var" => self.nu_var = value.parse().map_err(|_| bad())?,
            "beta" => self.beta = value.parse().map_err(|_| bad())?,
            "gamma0" => self.gamma0 = value.parse().map_err(|_| bad())?,
            "gamma1" => self.gamma1 = value.parse().map_err(|_| bad())?,
            "gamma2" => self.gamma2 = value.parse().map_err(|_| bad())?,
            "psi" => self.psi = value.parse().map_err(|_| bad())?,
            "alpha_lo" => self.alpha_lo = value.parse().map_err(|_| bad())?,
            "alpha_hi" => self.alpha_hi = value.parse().map_err(|_| bad())?,
            "xi_lo" => self.xi_lo = value.parse().map_err(|_| bad())?,
            "xi_hi" => self.xi_hi = value.parse().map_err(|_| bad())?,
            "proxy_sds" => self.proxy_sds = parse_f64_list(value).ok_or_else(bad)?,
            "specs" => {
                let mut specs = Vec::new();
                for token in value.split(',') {
                    let token = token.trim();
                    if !token.is_empty() {
                        specs.push(SpecToken::parse(token)?);
                    }
                }
                self.specs = specs;
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a config-file body into this scenario.
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::BadValue("line".into(), line.to_string()))?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Serialize in the format `apply_file_text` accepts; round-trips exactly.
    pub fn to_config_text(&self) -> String {
        let list = |values: &[f64]| {
            values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
        };
        let specs = self.specs.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ");
        let mut text = String::new();
        text.push_str(&format!("scenario = {}\n", self.kind.as_str()));
        text.push_str(&format!("n = {}\n", self.n));
        text.push_str(&format!("k = {}\n", self.k));
        text.push_str(&format!("tau_bar = {}\n", self.tau_bar));
        text.push_str(&format!("seed = {}\n", self.seed));
        text.push_str(&format!("workers = {}\n", self.workers));
        text.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        text.push_str(&format!("emit_plots = {}\n", self.emit_plots));
        match self.kind {
            Kind::Sim1 => {
                text.push_str(&format!("gammas = {}\n", list(&self.gammas)));
                text.push_str(&format!("alpha_mean = {}\n", self.alpha_mean));
                text.push_str(&format!("nu_var = {}\n", self.nu_var));
            }
            Kind::Sim2 => {
                text.push_str(&format!("beta = {}\n", self.beta));
                text.push_str(&format!("gamma0 = {}\n", self.gamma0));
                text.push_str(&format!("gamma1 = {}\n", self.gamma1));
                text.push_str(&format!("gamma2 = {}\n", self.gamma2));
                text.push_str(&format!("psi = {}\n", self.psi));
                text.push_str(&format!("alpha_lo = {}\n", self.alpha_lo));
                text.push_str(&format!("alpha_hi = {}\n", self.alpha_hi));
                text.push_str(&format!("xi_lo = {}\n", self.xi_lo));
                text.push_str(&format!("xi_hi = {}\n", self.xi_hi));
                text.push_str(&format!("proxy_sds = {}\n", list(&self.proxy_sds)));
            }
        }
        text.push_str(&format!("specs = {specs}\n"));
        text
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k < 1 {
            return Err(ConfigError::Validation("k must be >= 1".into()));
        }
        if self.kind == Kind::Sim1 && self.gammas.is_empty() {
            return Err(ConfigError::Validation("at least one gamma is required".into()));
        }
        if self.specs.is_empty() {
            return Err(ConfigError::Validation("at least one spec is required".into()));
        }
        for scenario in self.scenarios() {
            scenario.1.validate().map_err(ConfigError::Validation)?;
        }
        Ok(())
    }

    /// The scenarios this configuration expands to: one per gamma value for
    /// the exit process (each labelled with its own output subdirectory),
    /// a single unlabelled one for the job-search process.
    pub fn scenarios(&self) -> Vec<(Option<String>, Scenario)> {
        match self.kind {
            Kind::Sim1 => self
                .gammas
                .iter()
                .map(|&gamma| {
                    (
                        Some(format!("gamma_{gamma}")),
                        Scenario::Sim1(Sim1Config {
                            n: self.n,
                            tau_bar: self.tau_bar,
                            gamma,
                            alpha_mean: self.alpha_mean,
                            nu_var: self.nu_var,
                        }),
                    )
                })
                .collect(),
            Kind::Sim2 => vec![(
                None,
                Scenario::Sim2(Sim2Config {
                    n: self.n,
                    tau_bar: self.tau_bar,
                    beta: self.beta,
                    gamma0: self.gamma0,
                    gamma1: self.gamma1,
                    gamma2: self.gamma2,
                    psi: self.psi,
                    alpha_lo: self.alpha_lo,
                    alpha_hi: self.alpha_hi,
                    xi_lo: self.xi_lo,
                    xi_hi: self.xi_hi,
                }),
            )],
        }
    }

    /// Expand the spec tokens into concrete regressions for a scenario.
    pub fn regression_specs(&self, scenario: &Scenario) -> Vec<RegressionSpec> {
        let mut out = Vec::new();
        for &outcome in scenario.outcomes() {
            for token in &self.specs {
                match token.estimator {
                    EstimatorSel::Ols => out.push(RegressionSpec {
                        outcome,
                        duration_form: token.form,
                        control: Control::None,
                        sample: SampleView::S1,
                    }),
                    EstimatorSel::OlsAlpha => out.push(RegressionSpec {
                        outcome,
                        duration_form: token.form,
                        control: Control::TrueAlpha,
                        sample: SampleView::S1,
                    }),
                    EstimatorSel::Fe => out.push(RegressionSpec {
                        outcome,
                        duration_form: token.form,
                        control: Control::FixedEffects,
                        sample: SampleView::S1,
                    }),
                    EstimatorSel::OlsProxy => {
                        for &sd in &self.proxy_sds {
                            out.push(RegressionSpec {
                                outcome,
                                duration_form: token.form,
                                control: Control::NoisyAlpha { sigma_eta: sd },
                                sample: SampleView::S1,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Harness configurations, one per scenario.
    pub fn mc_configs(&self) -> Vec<(Option<String>, McConfig)> {
        self.scenarios()
            .into_iter()
            .map(|(label, scenario)| {
                let specs = self.regression_specs(&scenario);
                (
                    label,
                    McConfig {
                        k: self.k,
                        base_seed: self.seed,
                        scenario,
                        specs,
                        workers: self.workers,
                    },
                )
            })
            .collect()
    }
}

fn parse_f64_list(value: &str) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(part.parse().ok()?);
    }
    Some(out)
}

/// Flag descriptions shown by `--help`, with their defaults.
pub fn flag_help(kind: Kind) -> String {
    let d = ScenarioFile::defaults(kind);
    let mut text = String::new();
    text.push_str(&format!("  --n <int>           sample size per replication (default {})\n", d.n));
    text.push_str(&format!("  --k <int>           number of replications (default {})\n", d.k));
    text.push_str(&format!("  --tau-bar <int>     observation window length (default {})\n", d.tau_bar));
    text.push_str(&format!("  --seed <u64>        base seed (default {})\n", d.seed));
    text.push_str("  --workers <int>     worker threads, 0 = auto (default 0)\n");
    text.push_str(&format!(
        "  --out-dir <path>    output directory (default {}; env {} overrides)\n",
        d.out_dir.display(),
        OUT_DIR_ENV
    ));
    text.push_str("  --config <file>     key = value configuration file\n");
    text.push_str("  --emit-plots        also write gnuplot scripts\n");
    match kind {
        Kind::Sim1 => {
            text.push_str(&format!(
                "  --gamma <f64>       structural duration parameter, repeatable (default {})\n",
                d.gammas.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(", ")
            ));
        }
        Kind::Sim2 => {
            text.push_str(&format!(
                "  --proxy-sd <f64>    proxy-noise standard deviation, repeatable (default {})\n",
                d.proxy_sds.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(", ")
            ));
        }
    }
    text
}

/// Resolve a scenario from command-line arguments (flags after the
/// subcommand). Flags override config-file values, which override defaults;
/// the output-directory environment variable sits between file and flags.
pub fn parse_cli(kind: Kind, args: &[String]) -> Result<ScenarioFile, ConfigError> {
    let mut scenario = ScenarioFile::defaults(kind);

    // First pass: locate and apply the config file.
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--config" {
            let path = args
                .get(i + 1)
                .ok_or_else(|| ConfigError::MissingValue("--config".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::Io(path.clone(), e.to_string()))?;
            scenario.apply_file_text(&text)?;
            i += 2;
        } else {
            i += 1;
        }
    }

    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            scenario.out_dir = PathBuf::from(dir);
        }
    }

    // Second pass: flags.
    let mut gammas_override: Vec<f64> = Vec::new();
    let mut proxy_override: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let flag = args[i].as_str();
        let take_value = || -> Result<&str, ConfigError> {
            args.get(i + 1)
                .map(String::as_str)
                .ok_or_else(|| ConfigError::MissingValue(flag.to_string()))
        };
        let bad = |v: &str| ConfigError::BadValue(flag.to_string(), v.to_string());
        match flag {
            "--config" => {
                i += 2;
                continue;
            }
            "--emit-plots" => {
                scenario.emit_plots = true;
                i += 1;
                continue;
            }
            "--n" => {
                let v = take_value()?;
                scenario.n = v.parse().map_err(|_| bad(v))?;
            }
            "--k" => {
                let v = take_value()?;
                scenario.k = v.parse().map_err(|_| bad(v))?;
            }
            "--tau-bar" => {
                let v = take_value()?;
                scenario.tau_bar = v.parse().map_err(|_| bad(v))?;
            }
            "--seed" => {
                let v = take_value()?;
                scenario.seed = v.parse().map_err(|_| bad(v))?;
            }
            "--workers" => {
                let v = take_value()?;
                scenario.workers = v.parse().map_err(|_| bad(v))?;
            }
            "--out-dir" => {
                scenario.out_dir = PathBuf::from(take_value()?);
            }
            "--gamma" if kind == Kind::Sim1 => {
                let v = take_value()?;
                gammas_override.push(v.parse().map_err(|_| bad(v))?);
            }
            "--proxy-sd" if kind == Kind::Sim2 => {
                let v = take_value()?;
                proxy_override.push(v.parse().map_err(|_| bad(v))?);
            }
            _ => return Err(ConfigError::UnknownFlag(flag.to_string())),
        }
        i += 2;
    }
    if !gammas_override.is_empty() {
        scenario.gammas = gammas_override;
    }
    if !proxy_override.is_empty() {
        scenario.proxy_sds = proxy_override;
    }

    scenario.validate()?;
    Ok(scenario)
}
