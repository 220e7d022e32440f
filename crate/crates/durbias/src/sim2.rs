//! Simulation II: a three-step application -> callback -> offer process with
//! attrition at the first offer.
//!
//! Applications follow `round(alpha + beta * (t - 1) + xi)`, each application
//! receives a callback with probability `gamma0 + gamma1 * alpha +
//! gamma2 * (t - 1)`, and each callback converts into an offer with exogenous
//! probability `psi`. A spell exits the observed sample in the first period
//! with at least one offer; generation continues through the whole window so
//! the no-attrition sample exists for every period.

use crate::model::{JobSearchPanel, JobSearchRow, Panel, SpellMeta};
use crate::rng::derive_stream;

/// Configuration for the job-search process.
#[derive(Debug, Clone, PartialEq)]
pub struct Sim2Config {
    pub n: u32,
    pub tau_bar: u32,
    /// Structural slope of applications in duration.
    pub beta: f64,
    /// Callback probability: intercept.
    pub gamma0: f64,
    /// Callback probability: heterogeneity coefficient.
    pub gamma1: f64,
    /// Callback probability: duration coefficient.
    pub gamma2: f64,
    /// Offer probability per callback.
    pub psi: f64,
    /// Heterogeneity bounds (uniform).
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// Effort shock bounds (uniform).
    pub xi_lo: f64,
    pub xi_hi: f64,
}

impl Default for Sim2Config {
    fn default() -> Self {
        Sim2Config {
            n: 2000,
            tau_bar: 15,
            beta: -0.20,
            gamma0: 7.0 / 50.0,
            gamma1: -3.0 / 350.0,
            gamma2: -1.0 / 1150.0,
            psi: 0.3,
            alpha_lo: 7.0,
            alpha_hi: 14.0,
            xi_lo: -1.0,
            xi_hi: 1.0,
        }
    }
}

impl Sim2Config {
    pub fn validate(&self) -> Result<(), String> {
        if self.n < 1 {
            return Err("n must be >= 1".into());
        }
        if self.tau_bar < 1 {
            return Err("tau_bar must be >= 1".into());
        }
        if !(self.alpha_lo < self.alpha_hi) {
            return Err(format!(
                "alpha bounds must satisfy lo < hi, got [{}, {}]",
                self.alpha_lo, self.alpha_hi
            ));
        }
        if !(self.xi_lo < self.xi_hi) {
            return Err(format!(
                "xi bounds must satisfy lo < hi, got [{}, {}]",
                self.xi_lo, self.xi_hi
            ));
        }
        if !(0.0..=1.0).contains(&self.psi) {
            return Err(format!("psi must lie in [0, 1], got {}", self.psi));
        }
        Ok(())
    }
}

/// Counts of rows where a robustness clamp actually changed a value. Both
/// stay at zero under the default calibration; tests assert this.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampStats {
    /// Rows where the application count was clamped up to 0.
    pub applications: u64,
    /// Rows where the callback probability was clamped into [0, 1].
    pub callback_prob: u64,
}

/// Applications before the floor at zero: round-half-away-from-zero of the
/// latent effort index.
#[inline]
fn applications_signed(alpha: f64, t: u32, xi: f64, beta: f64) -> i64 {
    (alpha + beta * f64::from(t - 1) + xi).round() as i64
}

/// Number of applications submitted at duration `t`.
#[inline]
pub fn applications(alpha: f64, t: u32, xi: f64, beta: f64) -> u32 {
    debug_assert!(t >= 1);
    applications_signed(alpha, t, xi, beta).max(0) as u32
}

/// Per-application callback probability, clamped to [0, 1].
#[inline]
pub fn callback_prob(alpha: f64, t: u32, gamma0: f64, gamma1: f64, gamma2: f64) -> f64 {
    debug_assert!(t >= 1);
    (gamma0 + gamma1 * alpha + gamma2 * f64::from(t - 1)).clamp(0.0, 1.0)
}

/// Structural mean of applications (rounding treated as unbiased).
#[inline]
pub fn structural_mean_a(alpha: f64, t: u32, beta: f64) -> f64 {
    alpha + beta * f64::from(t - 1)
}

/// Structural mean of per-period callbacks.
pub fn structural_mean_c(alpha: f64, t: u32, config: &Sim2Config) -> f64 {
    structural_mean_a(alpha, t, config.beta)
        * callback_prob(alpha, t, config.gamma0, config.gamma1, config.gamma2)
}

/// Generate one panel of the job-search process.
///
/// Per spell the stream is consumed in a fixed order: one uniform for alpha,
/// then per period one uniform for xi, one Bernoulli per application, and one
/// Bernoulli per successful callback in order.
pub fn generate(config: &Sim2Config, base_seed: u64, replication: u32) -> (JobSearchPanel, ClampStats) {
    let n = config.n as usize;
    let mut spells = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n * config.tau_bar as usize);
    let mut clamps = ClampStats::default();
    for id in 0..config.n {
        let mut stream = derive_stream(base_seed, replication, u64::from(id));
        let alpha = stream.uniform(config.alpha_lo, config.alpha_hi).expect("validated bounds");
        let mut tau = None;
        for t in 1..=config.tau_bar {
            let xi = stream.uniform(config.xi_lo, config.xi_hi).expect("validated bounds");
            let signed = applications_signed(alpha, t, xi, config.beta);
            if signed < 0 {
                clamps.applications += 1;
            }
            let a_count = signed.max(0) as u32;
            let raw_rho = config.gamma0 + config.gamma1 * alpha + config.gamma2 * f64::from(t - 1);
            if !(0.0..=1.0).contains(&raw_rho) {
                clamps.callback_prob += 1;
            }
            let rho = raw_rho.clamp(0.0, 1.0);
            let mut c_count = 0u32;
            for _ in 0..a_count {
                c_count += u32::from(stream.bernoulli(rho).expect("rho clamped to [0,1]"));
            }
            let mut o_count = 0u32;
            for _ in 0..c_count {
                o_count += u32::from(stream.bernoulli(config.psi).expect("validated psi"));
            }
            let exit_here = o_count >= 1;
            if exit_here && tau.is_none() {
                tau = Some(t);
            }
            rows.push(JobSearchRow {
                id,
                t,
                xi,
                a_count,
                c_count,
                o_count,
                exit_here,
                mean_a: structural_mean_a(alpha, t, config.beta),
                cb_prob: rho,
            });
        }
        spells.push(SpellMeta::new(id, alpha, tau, config.tau_bar));
    }
    (Panel { spells, rows, tau_bar: config.tau_bar }, clamps)
}
