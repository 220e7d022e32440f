//! Within transformation, design-matrix construction, a small dense weighted
//! least-squares solver, and duration-profile extraction.
//!
//! All specifications reduce to one solver: pooled regressions enter sparse
//! rows (intercept, duration regressor, optional heterogeneity control), the
//! fixed-effects specifications demean outcome and duration regressors within
//! each spell and solve without an intercept. The application-level callback
//! rate enters with frequency weights: per (spell, period) one weighted row
//! for successes and one for failures, which is algebraically identical to
//! expanding every application into its own row.

use thiserror::Error;

use crate::model::{ExitRow, JobSearchRow, Panel, SpellMeta};
use crate::rng::{derive_lane, Lane};

/// Outcome variable of a regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Binary exit indicator (Simulation I).
    ExitY,
    /// Applications per period (Simulation II).
    Applications,
    /// Application-level callback indicator, weighted (Simulation II).
    CallbackRate,
    /// Callbacks per period (Simulation II).
    Callbacks,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::ExitY => "exit",
            Outcome::Applications => "applications",
            Outcome::CallbackRate => "callback_rate",
            Outcome::Callbacks => "callbacks",
        }
    }
}

/// Parametric form of the duration function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DurationForm {
    /// Single slope on t.
    Linear,
    /// One dummy per duration, t = 1 omitted as the baseline.
    Saturated,
}

impl DurationForm {
    pub fn as_str(self) -> &'static str {
        match self {
            DurationForm::Linear => "linear",
            DurationForm::Saturated => "saturated",
        }
    }
}

/// Heterogeneity control of a regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    /// Duration only.
    None,
    /// The true heterogeneity parameter enters linearly.
    TrueAlpha,
    /// A noisy proxy `alpha + eta` enters linearly; `sigma_eta` is the
    /// standard deviation of the proxy noise.
    NoisyAlpha { sigma_eta: f64 },
    /// Within transformation per spell.
    FixedEffects,
}

impl Control {
    pub fn label(self) -> String {
        match self {
            Control::None => "none".into(),
            Control::TrueAlpha => "true_alpha".into(),
            Control::NoisyAlpha { sigma_eta } => format!("noisy_alpha_sd{sigma_eta}"),
            Control::FixedEffects => "fixed_effects".into(),
        }
    }

    /// Short estimator name as used in figure legends.
    pub fn estimator(self) -> String {
        match self {
            Control::None => "ols".into(),
            Control::TrueAlpha => "ols_alpha".into(),
            Control::NoisyAlpha { sigma_eta } => format!("ols_proxy_sd{sigma_eta}"),
            Control::FixedEffects => "fe".into(),
        }
    }
}

/// Which view of the panel the regression runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleView {
    /// Complete no-attrition sample.
    S0,
    /// Attrition-truncated observed sample.
    S1,
}

impl SampleView {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleView::S0 => "s0",
            SampleView::S1 => "s1",
        }
    }
}

/// A fully specified regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub outcome: Outcome,
    pub duration_form: DurationForm,
    pub control: Control,
    pub sample: SampleView,
}

#[derive(Debug, Error, PartialEq)]
pub enum EstimError {
    #[error("outcome {0:?} is not carried by this panel")]
    OutcomeMismatch(Outcome),
    #[error("design column {column} ({name}) is collinear with earlier columns")]
    RankDeficient { column: usize, name: String },
    #[error("system has {rows} rows but {cols} columns")]
    TooFewRows { rows: usize, cols: usize },
    #[error("weights must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("design rows have inconsistent lengths")]
    RaggedDesign,
    #[error("cannot demean an empty group")]
    EmptyGroup,
    #[error("noisy-proxy control requires proxy draws")]
    MissingProxyDraws,
}

/// One weighted observation extracted from a panel.
#[derive(Debug, Clone, Copy)]
pub struct Obs {
    pub id: u32,
    pub t: u32,
    pub value: f64,
    pub weight: f64,
    /// Structural mean of the outcome at this row, used for residuals.
    pub structural: f64,
}

/// Panels that can feed regressions.
pub trait OutcomePanel {
    fn spells(&self) -> &[SpellMeta];
    fn tau_bar(&self) -> u32;
    #[doc(hidden)]
    fn collect_obs(&self, outcome: Outcome, sample: SampleView) -> Result<Vec<Obs>, EstimError>;
}

impl OutcomePanel for Panel<ExitRow> {
    fn spells(&self) -> &[SpellMeta] {
        &self.spells
    }
    fn tau_bar(&self) -> u32 {
        self.tau_bar
    }
    fn collect_obs(&self, outcome: Outcome, sample: SampleView) -> Result<Vec<Obs>, EstimError> {
        if outcome != Outcome::ExitY {
            return Err(EstimError::OutcomeMismatch(outcome));
        }
        let mut out = Vec::new();
        for r in &self.rows {
            if sample == SampleView::S1 && r.t > self.spells[r.id as usize].t_obs {
                continue;
            }
            out.push(Obs {
                id: r.id,
                t: r.t,
                value: f64::from(r.y),
                weight: 1.0,
                structural: r.hazard,
            });
        }
        Ok(out)
    }
}

impl OutcomePanel for Panel<JobSearchRow> {
    fn spells(&self) -> &[SpellMeta] {
        &self.spells
    }
    fn tau_bar(&self) -> u32 {
        self.tau_bar
    }
    fn collect_obs(&self, outcome: Outcome, sample: SampleView) -> Result<Vec<Obs>, EstimError> {
        let mut out = Vec::new();
        for r in &self.rows {
            if sample == SampleView::S1 && r.t > self.spells[r.id as usize].t_obs {
                continue;
            }
            match outcome {
                Outcome::ExitY => return Err(EstimError::OutcomeMismatch(outcome)),
                Outcome::Applications => out.push(Obs {
                    id: r.id,
                    t: r.t,
                    value: f64::from(r.a_count),
                    weight: 1.0,
                    structural: r.mean_a,
                }),
                Outcome::Callbacks => out.push(Obs {
                    id: r.id,
                    t: r.t,
                    value: f64::from(r.c_count),
                    weight: 1.0,
                    structural: f64::from(r.a_count) * r.cb_prob,
                }),
                Outcome::CallbackRate => {
                    // Successes first, then failures; zero-weight rows skipped.
                    if r.c_count > 0 {
                        out.push(Obs {
                            id: r.id,
                            t: r.t,
                            value: 1.0,
                            weight: f64::from(r.c_count),
                            structural: r.cb_prob,
                        });
                    }
                    if r.a_count > r.c_count {
                        out.push(Obs {
                            id: r.id,
                            t: r.t,
                            value: 0.0,
                            weight: f64::from(r.a_count - r.c_count),
                            structural: r.cb_prob,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Deterministic per-spell proxy noise, redrawn each replication.
#[derive(Debug, Clone, Copy)]
pub struct ProxyDraws {
    pub base_seed: u64,
    pub replication: u32,
}

impl ProxyDraws {
    /// Noisy proxy for `alpha`: the underlying standard draw depends only on
    /// `(base_seed, replication, spell)`, so different `sigma_eta` values
    /// scale the same shock.
    pub fn alpha_tilde(&self, spell: u32, alpha: f64, sigma_eta: f64) -> f64 {
        let mut s = derive_lane(self.base_seed, self.replication, u64::from(spell), Lane::ProxyNoise);
        alpha + s.normal(0.0, sigma_eta).expect("sigma_eta >= 0")
    }
}

/// Within-time values `t - (T + 1) / 2` for `t = 1..=T`. Sums to zero exactly
/// (all values are halves of integers).
pub fn within_time(periods: u32) -> Vec<f64> {
    debug_assert!(periods >= 1);
    let center = f64::from(periods + 1) / 2.0;
    (1..=periods).map(|t| f64::from(t) - center).collect()
}

/// Demean one spell's values with frequency weights. Unit weights give the
/// plain within transformation.
pub fn within_demean(values: &[f64], weights: &[f64]) -> Result<Vec<f64>, EstimError> {
    if values.is_empty() {
        return Err(EstimError::EmptyGroup);
    }
    debug_assert_eq!(values.len(), weights.len());
    let sw: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / sw;
    Ok(values.iter().map(|v| v - mean).collect())
}

/// Accumulated normal equations for a small dense weighted least-squares
/// problem; `p` never exceeds `tau_bar + 2` columns here.
struct NormalEq {
    p: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    rows: usize,
}

impl NormalEq {
    fn new(p: usize) -> Self {
        NormalEq { p, xtx: vec![0.0; p * p], xty: vec![0.0; p], rows: 0 }
    }

    fn add_sparse(&mut self, entries: &[(usize, f64)], y: f64, w: f64) {
        for &(j, xj) in entries {
            let wxj = w * xj;
            for &(k, xk) in entries {
                if k <= j {
                    self.xtx[j * self.p + k] += wxj * xk;
                }
            }
            self.xty[j] += wxj * y;
        }
        self.rows += 1;
    }

    fn add_dense(&mut self, x: &[f64], y: f64, w: f64) {
        debug_assert_eq!(x.len(), self.p);
        for (j, &xj) in x.iter().enumerate() {
            let wxj = w * xj;
            if wxj == 0.0 {
                continue;
            }
            for (k, &xk) in x[..=j].iter().enumerate() {
                self.xtx[j * self.p + k] += wxj * xk;
            }
            self.xty[j] += wxj * y;
        }
        self.rows += 1;
    }

    /// Solve by Cholesky factorization. A pivot collapsing to zero relative
    /// to its original diagonal means the column is collinear with earlier
    /// ones; the error names it rather than falling back to a pseudo-inverse.
    fn solve(&self, names: &dyn Fn(usize) -> String) -> Result<Vec<f64>, EstimError> {
        let p = self.p;
        if self.rows < p {
            return Err(EstimError::TooFewRows { rows: self.rows, cols: p });
        }
        let mut chol = vec![0.0f64; p * p];
        for j in 0..p {
            let orig = self.xtx[j * p + j];
            let mut d = orig;
            for k in 0..j {
                d -= chol[j * p + k] * chol[j * p + k];
            }
            if !(d > orig.abs() * 1e-12) || orig == 0.0 {
                return Err(EstimError::RankDeficient { column: j, name: names(j) });
            }
            chol[j * p + j] = d.sqrt();
            for i in (j + 1)..p {
                let mut v = self.xtx[i * p + j];
                for k in 0..j {
                    v -= chol[i * p + k] * chol[j * p + k];
                }
                chol[i * p + j] = v / chol[j * p + j];
            }
        }
        // Forward then backward substitution.
        let mut z = vec![0.0f64; p];
        for i in 0..p {
            let mut v = self.xty[i];
            for k in 0..i {
                v -= chol[i * p + k] * z[k];
            }
            z[i] = v / chol[i * p + i];
        }
        let mut beta = vec![0.0f64; p];
        for i in (0..p).rev() {
            let mut v = z[i];
            for k in (i + 1)..p {
                v -= chol[k * p + i] * beta[k];
            }
            beta[i] = v / chol[i * p + i];
        }
        Ok(beta)
    }
}

/// Weighted least squares on an explicit dense design.
pub fn least_squares(
    design: &[Vec<f64>],
    response: &[f64],
    weights: &[f64],
) -> Result<Vec<f64>, EstimError> {
    if design.is_empty() {
        return Err(EstimError::TooFewRows { rows: 0, cols: 0 });
    }
    let p = design[0].len();
    if design.len() != response.len() || design.len() != weights.len() {
        return Err(EstimError::RaggedDesign);
    }
    let mut eq = NormalEq::new(p);
    for ((x, &y), &w) in design.iter().zip(response).zip(weights) {
        if x.len() != p {
            return Err(EstimError::RaggedDesign);
        }
        if w < 0.0 {
            return Err(EstimError::NegativeWeight(w));
        }
        eq.add_dense(x, y, w);
    }
    eq.solve(&|j| format!("col{j}"))
}

/// Estimated duration coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum DurationCoefs {
    /// Slope on t.
    Linear(f64),
    /// Dummy coefficients for t = 2..=tau_bar; t = 1 is the omitted baseline.
    Saturated(Vec<f64>),
}

impl DurationCoefs {
    /// Level offset relative to the t = 1 baseline.
    pub fn offset_at(&self, t: u32) -> f64 {
        match self {
            DurationCoefs::Linear(slope) => slope * f64::from(t - 1),
            DurationCoefs::Saturated(ds) => {
                if t <= 1 {
                    0.0
                } else {
                    ds[t as usize - 2]
                }
            }
        }
    }
}

/// A per-duration level profile with its normalization anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationProfile {
    /// Outcome-unit levels for t = 1..=tau_bar.
    pub levels: Vec<f64>,
    /// Level the profile is anchored to.
    pub anchor_level: f64,
    /// Description of the normalization used.
    pub anchor: String,
}

/// Result of one regression.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: RegressionSpec,
    pub intercept: Option<f64>,
    pub alpha_coef: Option<f64>,
    pub duration: DurationCoefs,
    /// Effective observations: frequency-weighted row count.
    pub n_obs: u64,
    pub profile: DurationProfile,
    /// Realized correlation between the noisy proxy and true alpha, when a
    /// proxy control was used.
    pub proxy_corr: Option<f64>,
}

/// Rebuild a profile from fitted duration coefficients around a chosen anchor.
pub fn profile_from_fit(
    duration: &DurationCoefs,
    tau_bar: u32,
    anchor_level: f64,
    anchor: &str,
) -> DurationProfile {
    let levels = (1..=tau_bar).map(|t| anchor_level + duration.offset_at(t)).collect();
    DurationProfile { levels, anchor_level, anchor: anchor.to_string() }
}

/// Per-duration means of the realized outcome over the observed sample
/// (frequency-weighted for the callback rate). Durations no spell reaches
/// yield NaN.
pub fn empirical_series<P: OutcomePanel>(panel: &P, outcome: Outcome) -> Result<Vec<f64>, EstimError> {
    series_from_obs(&panel.collect_obs(outcome, SampleView::S1)?, panel.tau_bar())
}

/// Per-duration structural benchmark over the no-attrition sample: the mean
/// hazard for the exit indicator, realized outcome means otherwise.
pub fn structural_series<P: OutcomePanel>(
    panel: &P,
    outcome: Outcome,
) -> Result<Vec<f64>, EstimError> {
    let mut obs = panel.collect_obs(outcome, SampleView::S0)?;
    if outcome == Outcome::ExitY {
        for o in &mut obs {
            o.value = o.structural;
        }
    }
    series_from_obs(&obs, panel.tau_bar())
}

fn series_from_obs(obs: &[Obs], tau_bar: u32) -> Result<Vec<f64>, EstimError> {
    let mut sums = vec![0.0f64; tau_bar as usize];
    let mut wsum = vec![0.0f64; tau_bar as usize];
    for o in obs {
        sums[o.t as usize - 1] += o.weight * o.value;
        wsum[o.t as usize - 1] += o.weight;
    }
    Ok(sums
        .iter()
        .zip(&wsum)
        .map(|(s, w)| if *w > 0.0 { s / w } else { f64::NAN })
        .collect())
}

/// Structural duration profile measured on the no-attrition sample: per-
/// duration means for the saturated form, a pooled regression of the outcome
/// on time for the linear form.
pub fn structural_profile<P: OutcomePanel>(
    panel: &P,
    outcome: Outcome,
    form: DurationForm,
) -> Result<DurationProfile, EstimError> {
    match form {
        DurationForm::Saturated => {
            let levels = structural_series(panel, outcome)?;
            let anchor_level = levels[0];
            Ok(DurationProfile { levels, anchor_level, anchor: "s0_mean_t1".into() })
        }
        DurationForm::Linear => {
            let obs = panel.collect_obs(outcome, SampleView::S0)?;
            let mut eq = NormalEq::new(2);
            for o in &obs {
                eq.add_sparse(&[(0, 1.0), (1, f64::from(o.t))], o.value, o.weight);
            }
            let beta = eq.solve(&|j| ["intercept", "t"][j].to_string())?;
            let levels =
                (1..=panel.tau_bar()).map(|t| beta[0] + beta[1] * f64::from(t)).collect();
            Ok(DurationProfile {
                levels,
                anchor_level: beta[0] + beta[1],
                anchor: "s0_ols_fit".into(),
            })
        }
    }
}

/// Fit one regression specification on a panel.
///
/// Profiles are anchored at the structural first-period level of the same
/// panel so that every estimator is plotted on a common footing; the anchor
/// is recorded so alternative normalizations can be recomputed.
pub fn fit<P: OutcomePanel>(
    panel: &P,
    spec: &RegressionSpec,
    proxy: Option<&ProxyDraws>,
) -> Result<FitResult, EstimError> {
    let obs = panel.collect_obs(spec.outcome, spec.sample)?;
    let tau_bar = panel.tau_bar();
    let n_dur = match spec.duration_form {
        DurationForm::Linear => 1usize,
        DurationForm::Saturated => tau_bar as usize - 1,
    };

    // Per-spell control values (true or noisy alpha).
    let mut proxy_corr = None;
    let control_vals: Option<Vec<f64>> = match spec.control {
        Control::TrueAlpha => Some(panel.spells().iter().map(|s| s.alpha).collect()),
        Control::NoisyAlpha { sigma_eta } => {
            let draws = proxy.ok_or(EstimError::MissingProxyDraws)?;
            let vals: Vec<f64> = panel
                .spells()
                .iter()
                .map(|s| draws.alpha_tilde(s.id, s.alpha, sigma_eta))
                .collect();
            let alphas: Vec<f64> = panel.spells().iter().map(|s| s.alpha).collect();
            proxy_corr = Some(correlation(&alphas, &vals));
            Some(vals)
        }
        Control::None | Control::FixedEffects => None,
    };

    let beta;
    let intercept;
    let alpha_coef;
    let duration: DurationCoefs;

    if spec.control == Control::FixedEffects {
        // Within transformation: demean outcome and duration regressors per
        // spell with the observation weights, then solve without intercept.
        let p = n_dur;
        let mut eq = NormalEq::new(p);
        let mut x_scratch = vec![0.0f64; p];
        let mut start = 0usize;
        while start < obs.len() {
            let id = obs[start].id;
            let mut end = start + 1;
            while end < obs.len() && obs[end].id == id {
                end += 1;
            }
            let group = &obs[start..end];
            let sw: f64 = group.iter().map(|o| o.weight).sum();
            let y_mean = group.iter().map(|o| o.weight * o.value).sum::<f64>() / sw;
            match spec.duration_form {
                DurationForm::Linear => {
                    let t_mean =
                        group.iter().map(|o| o.weight * f64::from(o.t)).sum::<f64>() / sw;
                    for o in group {
                        eq.add_sparse(
                            &[(0, f64::from(o.t) - t_mean)],
                            o.value - y_mean,
                            o.weight,
                        );
                    }
                }
                DurationForm::Saturated => {
                    let mut d_mean = vec![0.0f64; p];
                    for o in group {
                        if o.t >= 2 {
                            d_mean[o.t as usize - 2] += o.weight;
                        }
                    }
                    for m in &mut d_mean {
                        *m /= sw;
                    }
                    for o in group {
                        for (j, m) in d_mean.iter().enumerate() {
                            x_scratch[j] = -m;
                        }
                        if o.t >= 2 {
                            x_scratch[o.t as usize - 2] += 1.0;
                        }
                        eq.add_dense(&x_scratch, o.value - y_mean, o.weight);
                    }
                }
            }
            start = end;
        }
        let names = |j: usize| match spec.duration_form {
            DurationForm::Linear => "t".to_string(),
            DurationForm::Saturated => format!("d{:02}", j + 2),
        };
        beta = eq.solve(&names)?;
        intercept = None;
        alpha_coef = None;
        duration = match spec.duration_form {
            DurationForm::Linear => DurationCoefs::Linear(beta[0]),
            DurationForm::Saturated => DurationCoefs::Saturated(beta.clone()),
        };
    } else {
        let has_alpha = control_vals.is_some();
        let p = 1 + n_dur + usize::from(has_alpha);
        let mut eq = NormalEq::new(p);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(3);
        for o in &obs {
            entries.clear();
            entries.push((0, 1.0));
            match spec.duration_form {
                DurationForm::Linear => entries.push((1, f64::from(o.t))),
                DurationForm::Saturated => {
                    if o.t >= 2 {
                        entries.push((o.t as usize - 1, 1.0));
                    }
                }
            }
            if let Some(vals) = &control_vals {
                entries.push((p - 1, vals[o.id as usize]));
            }
            eq.add_sparse(&entries, o.value, o.weight);
        }
        let names = |j: usize| {
            if j == 0 {
                "intercept".to_string()
            } else if has_alpha && j == p - 1 {
                "alpha".to_string()
            } else {
                match spec.duration_form {
                    DurationForm::Linear => "t".to_string(),
                    DurationForm::Saturated => format!("d{:02}", j + 1),
                }
            }
        };
        beta = eq.solve(&names)?;
        intercept = Some(beta[0]);
        alpha_coef = if has_alpha { Some(beta[p - 1]) } else { None };
        duration = match spec.duration_form {
            DurationForm::Linear => DurationCoefs::Linear(beta[1]),
            DurationForm::Saturated => DurationCoefs::Saturated(beta[1..1 + n_dur].to_vec()),
        };
    }

    let anchor_level = structural_series(panel, spec.outcome)?[0];
    let profile = profile_from_fit(&duration, tau_bar, anchor_level, "s0_mean_t1");
    let n_obs = obs.iter().map(|o| o.weight).sum::<f64>().round() as u64;
    Ok(FitResult {
        spec: spec.clone(),
        intercept,
        alpha_coef,
        duration,
        n_obs,
        profile,
        proxy_corr,
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cab = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cab += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        1.0
    } else {
        cab / (va * vb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpellMeta;
    use crate::toy::two_spell_exit_panel;

    #[test]
    fn within_time_identities() {
        assert_eq!(within_time(3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(within_time(2), vec![-0.5, 0.5]);
        for periods in 1..=15u32 {
            let tt = within_time(periods);
            assert_eq!(tt.iter().sum::<f64>(), 0.0, "T={periods}");
            assert_eq!(tt.last().copied().unwrap(), f64::from(periods - 1) / 2.0);
        }
        // Brute-force: sum of 1..15 is 120, so the mean is 8.
        assert_eq!((1..=15u32).sum::<u32>(), 120);
        assert_eq!(within_time(15)[0], 1.0 - 8.0);
    }

    #[test]
    fn demeaning_basics() {
        let w = [1.0, 1.0, 1.0];
        assert_eq!(within_demean(&[0.0, 0.0, 0.0], &w).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(within_demean(&[0.0, 1.0], &w[..2]).unwrap(), vec![-0.5, 0.5]);
        assert_eq!(within_demean(&[], &[]), Err(EstimError::EmptyGroup));
    }

    #[test]
    fn weighted_demeaning_matches_hand_computation() {
        // (A, C) = {(2, 1), (2, 0)}: group mean 0.25, demeaned success 0.75,
        // failures -0.25 with weights 1 and 2.
        let values = [1.0, 0.0, 0.0];
        let weights = [1.0, 1.0, 2.0];
        let got = within_demean(&values, &weights).unwrap();
        assert_eq!(got, vec![0.75, -0.25, -0.25]);
        let wsum: f64 = got.iter().zip(&weights).map(|(v, w)| v * w).sum();
        assert!(wsum.abs() <= 1e-12);
    }

    #[test]
    fn least_squares_recovers_exact_coefficients() {
        let design: Vec<Vec<f64>> =
            (0..20).map(|i| vec![1.0, f64::from(i), f64::from(i * i)]).collect();
        let truth = [2.0, -0.5, 0.125];
        let y: Vec<f64> = design
            .iter()
            .map(|x| truth.iter().zip(x).map(|(b, v)| b * v).sum())
            .collect();
        let w = vec![1.0; 20];
        let beta = least_squares(&design, &y, &w).unwrap();
        for (b, t) in beta.iter().zip(&truth) {
            assert!((b - t).abs() < 1e-10);
        }
        // Residual orthogonality: X' W (y - X beta) vanishes.
        for j in 0..3 {
            let dot: f64 = design
                .iter()
                .zip(&y)
                .map(|(x, yv)| {
                    let fitted: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
                    x[j] * (yv - fitted)
                })
                .sum();
            assert!(dot.abs() < 1e-8);
        }
    }

    #[test]
    fn least_squares_toy_pooled_slope() {
        // S1 rows (t, y) = {(1,0),(2,0),(3,0),(1,0),(2,1)}: slope 1/14.
        let ts = [1.0, 2.0, 3.0, 1.0, 2.0];
        let ys = [0.0, 0.0, 0.0, 0.0, 1.0];
        let design: Vec<Vec<f64>> = ts.iter().map(|&t| vec![1.0, t]).collect();
        let beta = least_squares(&design, &ys, &[1.0; 5]).unwrap();
        assert!((beta[1] - 1.0 / 14.0).abs() < 1e-10);
    }

    #[test]
    fn least_squares_duplicate_column_is_rank_error() {
        let design: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, f64::from(i), f64::from(i)]).collect();
        let y = vec![1.0; 6];
        let err = least_squares(&design, &y, &[1.0; 6]).unwrap_err();
        assert_eq!(err, EstimError::RankDeficient { column: 2, name: "col2".into() });
    }

    #[test]
    fn fit_fe_linear_reproduces_toy_bias() {
        let panel = two_spell_exit_panel();
        let spec = RegressionSpec {
            outcome: Outcome::ExitY,
            duration_form: DurationForm::Linear,
            control: Control::FixedEffects,
            sample: SampleView::S1,
        };
        let fit = fit(&panel, &spec, None).unwrap();
        match fit.duration {
            DurationCoefs::Linear(slope) => assert!((slope - 0.2).abs() < 1e-10),
            _ => unreachable!(),
        }
        assert_eq!(fit.n_obs, 5);
        assert!(fit.intercept.is_none());
    }

    #[test]
    fn fit_pooled_linear_matches_toy_slope() {
        let panel = two_spell_exit_panel();
        let spec = RegressionSpec {
            outcome: Outcome::ExitY,
            duration_form: DurationForm::Linear,
            control: Control::None,
            sample: SampleView::S1,
        };
        let fit = fit(&panel, &spec, None).unwrap();
        match fit.duration {
            DurationCoefs::Linear(slope) => assert!((slope - 1.0 / 14.0).abs() < 1e-10),
            _ => unreachable!(),
        }
    }

    #[test]
    fn fe_on_spell_constant_outcome_is_zero() {
        // Censor everything so y is constant (zero) within every spell.
        let tau_bar = 4;
        let spells: Vec<SpellMeta> =
            (0..3).map(|i| SpellMeta::new(i, 1.0, None, tau_bar)).collect();
        let rows: Vec<ExitRow> = (0..3u32)
            .flat_map(|id| (1..=tau_bar).map(move |t| ExitRow { id, t, hazard: 0.3, y: 0 }))
            .collect();
        let panel = Panel { spells, rows, tau_bar };
        for form in [DurationForm::Linear, DurationForm::Saturated] {
            let spec = RegressionSpec {
                outcome: Outcome::ExitY,
                duration_form: form,
                control: Control::FixedEffects,
                sample: SampleView::S1,
            };
            let fit = fit(&panel, &spec, None).unwrap();
            match fit.duration {
                DurationCoefs::Linear(s) => assert!(s.abs() < 1e-12),
                DurationCoefs::Saturated(ds) => {
                    assert!(ds.iter().all(|d| d.abs() < 1e-12))
                }
            }
        }
    }

    #[test]
    fn saturated_fe_without_within_variation_is_rank_error() {
        let tau_bar = 3;
        let spells: Vec<SpellMeta> =
            (0..4).map(|i| SpellMeta::new(i, 1.0, Some(1), tau_bar)).collect();
        let rows: Vec<ExitRow> = (0..4u32)
            .flat_map(|id| {
                (1..=tau_bar).map(move |t| ExitRow { id, t, hazard: 0.5, y: u8::from(t == 1) })
            })
            .collect();
        let panel = Panel { spells, rows, tau_bar };
        let spec = RegressionSpec {
            outcome: Outcome::ExitY,
            duration_form: DurationForm::Saturated,
            control: Control::FixedEffects,
            sample: SampleView::S1,
        };
        assert!(matches!(fit(&panel, &spec, None), Err(EstimError::RankDeficient { .. })));
    }

    #[test]
    fn noisy_alpha_with_zero_noise_equals_true_alpha() {
        let (panel, _) = crate::sim2::generate(
            &crate::sim2::Sim2Config { n: 200, ..Default::default() },
            41,
            0,
        );
        let draws = ProxyDraws { base_seed: 41, replication: 0 };
        for outcome in [Outcome::Applications, Outcome::CallbackRate, Outcome::Callbacks] {
            let base = RegressionSpec {
                outcome,
                duration_form: DurationForm::Saturated,
                control: Control::TrueAlpha,
                sample: SampleView::S1,
            };
            let noisy = RegressionSpec {
                control: Control::NoisyAlpha { sigma_eta: 0.0 },
                ..base.clone()
            };
            let f0 = fit(&panel, &base, None).unwrap();
            let f1 = fit(&panel, &noisy, Some(&draws)).unwrap();
            assert_eq!(f0.duration, f1.duration);
            assert_eq!(f0.alpha_coef, f1.alpha_coef);
            assert_eq!(f1.proxy_corr, Some(1.0));
        }
        // Missing draws is an error, not a silent fallback.
        let spec = RegressionSpec {
            outcome: Outcome::Applications,
            duration_form: DurationForm::Linear,
            control: Control::NoisyAlpha { sigma_eta: 1.0 },
            sample: SampleView::S1,
        };
        assert_eq!(fit(&panel, &spec, None).unwrap_err(), EstimError::MissingProxyDraws);
    }

    #[test]
    fn saturated_pooled_dummies_reproduce_s1_means() {
        let panel = crate::sim1::generate(
            &crate::sim1::Sim1Config { n: 400, ..Default::default() },
            13,
            2,
        );
        let spec = RegressionSpec {
            outcome: Outcome::ExitY,
            duration_form: DurationForm::Saturated,
            control: Control::None,
            sample: SampleView::S1,
        };
        let result = fit(&panel, &spec, None).unwrap();
        let means = empirical_series(&panel, Outcome::ExitY).unwrap();
        let intercept = result.intercept.unwrap();
        for t in 1..=panel.tau_bar {
            let fitted = intercept + result.duration.offset_at(t);
            assert!(
                (fitted - means[t as usize - 1]).abs() < 1e-8,
                "t={t}: {fitted} vs {}",
                means[t as usize - 1]
            );
        }
    }

    #[test]
    fn weighted_rate_regression_equals_expanded_rows() {
        let (panel, _) = crate::sim2::generate(
            &crate::sim2::Sim2Config { n: 6, tau_bar: 5, ..Default::default() },
            3,
            0,
        );
        // Expand every application into its own unit-weight row.
        let mut design = Vec::new();
        let mut y = Vec::new();
        let mut alphas = Vec::new();
        for r in panel.s1_view() {
            let alpha = panel.spells[r.id as usize].alpha;
            for a in 0..r.a_count {
                design.push(vec![1.0, f64::from(r.t), alpha]);
                y.push(f64::from(u8::from(a < r.c_count)));
                alphas.push(alpha);
            }
        }
        assert!(y.len() < 1000);
        let w = vec![1.0; y.len()];
        let expanded = least_squares(&design, &y, &w).unwrap();

        let spec = RegressionSpec {
            outcome: Outcome::CallbackRate,
            duration_form: DurationForm::Linear,
            control: Control::TrueAlpha,
            sample: SampleView::S1,
        };
        let weighted = fit(&panel, &spec, None).unwrap();
        assert!((weighted.intercept.unwrap() - expanded[0]).abs() < 1e-9);
        match weighted.duration {
            DurationCoefs::Linear(s) => assert!((s - expanded[1]).abs() < 1e-9),
            _ => unreachable!(),
        }
        assert!((weighted.alpha_coef.unwrap() - expanded[2]).abs() < 1e-9);
    }

    #[test]
    fn fe_invariant_to_spell_constant_shifts() {
        let config = crate::sim2::Sim2Config { n: 80, ..Default::default() };
        let (mut panel, _) = crate::sim2::generate(&config, 19, 0);
        let spec = RegressionSpec {
            outcome: Outcome::Applications,
            duration_form: DurationForm::Saturated,
            control: Control::FixedEffects,
            sample: SampleView::S1,
        };
        let before = fit(&panel, &spec, None).unwrap();
        for r in &mut panel.rows {
            r.a_count += 3 + (r.id % 7);
        }
        let after = fit(&panel, &spec, None).unwrap();
        match (&before.duration, &after.duration) {
            (DurationCoefs::Saturated(a), DurationCoefs::Saturated(b)) => {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-8);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn profiles_from_fits() {
        let flat = DurationCoefs::Saturated(vec![0.0; 14]);
        let p = profile_from_fit(&flat, 15, 10.5, "s0_mean_t1");
        assert!(p.levels.iter().all(|l| (l - 10.5).abs() < 1e-15));

        let lin = DurationCoefs::Linear(-0.2);
        let p = profile_from_fit(&lin, 15, 10.5, "s0_mean_t1");
        assert!((p.levels[14] - 7.7).abs() < 1e-12);
    }

    #[test]
    fn structural_profiles_track_generating_process() {
        // Applications: pooled no-attrition slope recovers the structural
        // slope within Monte Carlo error.
        let config = crate::sim2::Sim2Config { n: 20_000, ..Default::default() };
        let (panel, _) = crate::sim2::generate(&config, 29, 0);
        let prof = structural_profile(&panel, Outcome::Applications, DurationForm::Linear).unwrap();
        let slope = prof.levels[1] - prof.levels[0];
        assert!((slope - config.beta).abs() < 0.01, "slope {slope}");

        // Degenerate heterogeneity: saturated structural profile equals the
        // closed-form hazard.
        let c1 = crate::sim1::Sim1Config { n: 5000, nu_var: 0.0, ..Default::default() };
        let p1 = crate::sim1::generate(&c1, 31, 0);
        let prof = structural_profile(&p1, Outcome::ExitY, DurationForm::Saturated).unwrap();
        for t in 1..=c1.tau_bar {
            let lam = crate::sim1::hazard(c1.alpha_mean, t, c1.gamma);
            assert!((prof.levels[t as usize - 1] - lam).abs() < 1e-12);
        }
    }

    #[test]
    fn no_attrition_means_no_within_bias() {
        // With offers disabled the panel is balanced, so the fixed-effects
        // dummy estimates collapse to differences of per-duration means:
        // the profile equals the structural one exactly for unit-weight
        // outcomes. The callback rate keeps a small deterministic gap, the
        // variance-weighted estimand against the pooled-mean benchmark.
        let config = crate::sim2::Sim2Config { n: 1500, psi: 0.0, ..Default::default() };
        for rep in 0..3u32 {
            let (panel, _) = crate::sim2::generate(&config, 63, rep);
            for (outcome, tol) in [
                (Outcome::Applications, 1e-9),
                (Outcome::Callbacks, 1e-9),
                (Outcome::CallbackRate, 2e-3),
            ] {
                let spec = RegressionSpec {
                    outcome,
                    duration_form: DurationForm::Saturated,
                    control: Control::FixedEffects,
                    sample: SampleView::S1,
                };
                let result = fit(&panel, &spec, None).unwrap();
                let structural =
                    structural_profile(&panel, outcome, DurationForm::Saturated).unwrap();
                for (a, b) in result.profile.levels.iter().zip(&structural.levels) {
                    assert!((a - b).abs() <= tol, "{outcome:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn outcome_mismatch_is_an_error() {
        let panel = two_spell_exit_panel();
        assert_eq!(
            empirical_series(&panel, Outcome::Applications).unwrap_err(),
            EstimError::OutcomeMismatch(Outcome::Applications)
        );
    }
}
