//! Mechanism-level diagnostics: dynamic-selection curves, residual profiles
//! against the within-time dimension, and the decomposition of the
//! fixed-effects slope into its structural part and the mechanical bias term.
//!
//! Residuals are computed from the structural components stored on each row,
//! so they are exact per draw. Within-demeaned residuals use the same
//! frequency weights as the corresponding regression; the within-time *bin*
//! coordinate is always the unweighted `t - (T + 1) / 2`, which lives on a
//! half-integer grid.

use std::collections::BTreeMap;

use crate::estimate::{EstimError, Outcome, OutcomePanel, SampleView};

/// Mean heterogeneity per duration in the complete and in the observed
/// sample. The complete-sample curve is flat by construction; the observed
/// curve drifts as attrition selects on heterogeneity.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionCurve {
    pub mean_alpha_s0: Vec<f64>,
    pub mean_alpha_s1: Vec<f64>,
}

/// Average heterogeneity per duration: all spells for the complete sample,
/// only spells still observed at `t` for the observed sample.
pub fn dynamic_selection<P: OutcomePanel>(panel: &P) -> SelectionCurve {
    let tau_bar = panel.tau_bar() as usize;
    let spells = panel.spells();
    let all_mean = spells.iter().map(|s| s.alpha).sum::<f64>() / spells.len() as f64;
    let mut sums = vec![0.0f64; tau_bar];
    let mut counts = vec![0u32; tau_bar];
    for s in spells {
        for t in 0..s.t_obs as usize {
            sums[t] += s.alpha;
            counts[t] += 1;
        }
    }
    SelectionCurve {
        mean_alpha_s0: vec![all_mean; tau_bar],
        mean_alpha_s1: sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c > 0 { s / f64::from(c) } else { f64::NAN })
            .collect(),
    }
}

/// Accumulated residual sums for one bin; mergeable across replications.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinSums {
    pub weight: f64,
    pub sum_eps: f64,
    pub sum_eps_within: f64,
}

impl BinSums {
    pub fn mean_eps(&self) -> f64 {
        self.sum_eps / self.weight
    }
    pub fn mean_eps_within(&self) -> f64 {
        self.sum_eps_within / self.weight
    }
    pub fn merge(&mut self, other: &BinSums) {
        self.weight += other.weight;
        self.sum_eps += other.sum_eps;
        self.sum_eps_within += other.sum_eps_within;
    }
}

/// Residual means binned two ways: by the within-time dimension (keyed as
/// twice the half-integer bin, so the key is integral) and by periods until
/// the last observation (`t - T`, zero at the exit row). Each bin is split by
/// censoring status; empty bins are absent rather than zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualProfile {
    pub within_time: BTreeMap<(i32, bool), BinSums>,
    pub lead_to_exit: BTreeMap<(i32, bool), BinSums>,
}

impl ResidualProfile {
    pub fn merge(&mut self, other: &ResidualProfile) {
        for (k, v) in &other.within_time {
            self.within_time.entry(*k).or_default().merge(v);
        }
        for (k, v) in &other.lead_to_exit {
            self.lead_to_exit.entry(*k).or_default().merge(v);
        }
    }
}

/// Raw and within-demeaned residual profiles over the observed sample.
pub fn residual_profiles<P: OutcomePanel>(
    panel: &P,
    outcome: Outcome,
) -> Result<ResidualProfile, EstimError> {
    let obs = panel.collect_obs(outcome, SampleView::S1)?;
    let spells = panel.spells();
    let mut profile = ResidualProfile::default();
    let mut start = 0usize;
    while start < obs.len() {
        let id = obs[start].id;
        let mut end = start + 1;
        while end < obs.len() && obs[end].id == id {
            end += 1;
        }
        let group = &obs[start..end];
        let meta = &spells[id as usize];
        let periods = meta.t_obs;
        let sw: f64 = group.iter().map(|o| o.weight).sum();
        let eps_mean = group
            .iter()
            .map(|o| o.weight * (o.value - o.structural))
            .sum::<f64>()
            / sw;
        for o in group {
            let eps = o.value - o.structural;
            let eps_within = eps - eps_mean;
            // Within-time bin on the half-integer grid, stored doubled.
            let key_within = (2 * o.t as i32) - (periods as i32 + 1);
            let key_lead = o.t as i32 - periods as i32;
            for (map, key) in [
                (&mut profile.within_time, key_within),
                (&mut profile.lead_to_exit, key_lead),
            ] {
                let bin = map.entry((key, meta.censored)).or_default();
                bin.weight += o.weight;
                bin.sum_eps += o.weight * eps;
                bin.sum_eps_within += o.weight * eps_within;
            }
        }
        start = end;
    }
    Ok(profile)
}

/// Decomposition of the fixed-effects linear slope: the slope equals
/// `structural_within_slope + numerator / denominator` exactly, where the
/// numerator correlates within-demeaned residuals with within-demeaned time
/// and the denominator is the within variation of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasDecomposition {
    pub numerator: f64,
    pub denominator: f64,
    /// Within-regression slope of the structural outcome component on time.
    pub structural_within_slope: f64,
}

impl BiasDecomposition {
    /// The mechanical bias term of the fixed-effects slope.
    pub fn ratio(&self) -> f64 {
        self.numerator / self.denominator
    }
}

/// Compute the bias decomposition over the observed sample, with the same
/// frequency weights as the fixed-effects regression.
pub fn fe_bias_decomposition<P: OutcomePanel>(
    panel: &P,
    outcome: Outcome,
) -> Result<BiasDecomposition, EstimError> {
    let obs = panel.collect_obs(outcome, SampleView::S1)?;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut structural_num = 0.0;
    let mut start = 0usize;
    while start < obs.len() {
        let id = obs[start].id;
        let mut end = start + 1;
        while end < obs.len() && obs[end].id == id {
            end += 1;
        }
        let group = &obs[start..end];
        let sw: f64 = group.iter().map(|o| o.weight).sum();
        let t_mean = group.iter().map(|o| o.weight * f64::from(o.t)).sum::<f64>() / sw;
        let eps_mean = group
            .iter()
            .map(|o| o.weight * (o.value - o.structural))
            .sum::<f64>()
            / sw;
        let s_mean = group.iter().map(|o| o.weight * o.structural).sum::<f64>() / sw;
        for o in group {
            let tt = f64::from(o.t) - t_mean;
            numerator += o.weight * ((o.value - o.structural) - eps_mean) * tt;
            structural_num += o.weight * (o.structural - s_mean) * tt;
            denominator += o.weight * tt * tt;
        }
        start = end;
    }
    Ok(BiasDecomposition {
        numerator,
        denominator,
        structural_within_slope: structural_num / denominator,
    })
}
