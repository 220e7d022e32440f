//! Hand-computed oracle fixtures: tiny cases whose answers are known from
//! pencil-and-paper algebra. They back the `toy-check` subcommand and the
//! acceptance suite.

use crate::diagnostics;
use crate::estimate::{
    fit, least_squares, profile_from_fit, within_demean, within_time, Control, DurationCoefs,
    DurationForm, Outcome, RegressionSpec, SampleView,
};
use crate::mc::percentile;
use crate::model::{ExitPanel, ExitRow, Panel, SpellMeta};
use crate::sim1;
use crate::sim2;

/// Two-spell exit panel: one spell censored after three flat periods, one
/// spell exiting in its second period. With no structural duration effect,
/// hand algebra gives a fixed-effects slope of 0.5 / 2.5 = 0.2 and a pooled
/// slope of 1/14.
pub fn two_spell_exit_panel() -> ExitPanel {
    let tau_bar = 3;
    let spells = vec![
        SpellMeta::new(0, 0.5, None, tau_bar),
        SpellMeta::new(1, 0.5, Some(2), tau_bar),
    ];
    let mut rows = Vec::new();
    for id in 0..2u32 {
        for t in 1..=tau_bar {
            rows.push(ExitRow { id, t, hazard: 0.25, y: u8::from(id == 1 && t == 2) });
        }
    }
    Panel { spells, rows, tau_bar }
}

/// One oracle comparison.
#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: &'static str,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        (self.actual - self.expected).abs() <= self.tolerance
    }
}

/// Run every hand-computed oracle and report the comparisons.
pub fn run_oracle_checks() -> Vec<OracleCheck> {
    let mut checks = Vec::new();
    let mut push = |name, expected, actual, tolerance| {
        checks.push(OracleCheck { name, expected, actual, tolerance });
    };

    let panel = two_spell_exit_panel();
    let fe_spec = RegressionSpec {
        outcome: Outcome::ExitY,
        duration_form: DurationForm::Linear,
        control: Control::FixedEffects,
        sample: SampleView::S1,
    };
    let fe_slope = match fit(&panel, &fe_spec, None).map(|f| f.duration) {
        Ok(DurationCoefs::Linear(s)) => s,
        _ => f64::NAN,
    };
    push("toy fixed-effects slope", 0.2, fe_slope, 1e-10);

    let pooled_spec = RegressionSpec { control: Control::None, ..fe_spec };
    let pooled_slope = match fit(&panel, &pooled_spec, None).map(|f| f.duration) {
        Ok(DurationCoefs::Linear(s)) => s,
        _ => f64::NAN,
    };
    push("toy pooled slope", 1.0 / 14.0, pooled_slope, 1e-10);

    let decomp = diagnostics::fe_bias_decomposition(&panel, Outcome::ExitY);
    push(
        "toy bias ratio",
        0.2,
        decomp.map(|d| d.ratio()).unwrap_or(f64::NAN),
        1e-10,
    );

    push("hazard(2, 1, 0.05)", 0.119_202_922_022_117_55, sim1::hazard(2.0, 1, 0.05), 1e-12);
    push("hazard(2, 15, 0.05)", 0.062_973_356_056_996_51, sim1::hazard(2.0, 15, 0.05), 1e-12);
    push("survival at t=3, constant hazard 1/2", 0.25, sim1::survival(0.0, 0.0, 3), 1e-15);

    push(
        "applications(10.5, 1, 0.5, -0.2)",
        11.0,
        f64::from(sim2::applications(10.5, 1, 0.5, -0.2)),
        0.0,
    );
    push(
        "applications(7, 15, 0, -0.2)",
        4.0,
        f64::from(sim2::applications(7.0, 15, 0.0, -0.2)),
        0.0,
    );
    let c2 = sim2::Sim2Config::default();
    push(
        "callback probability at (10.5, 1)",
        0.05,
        sim2::callback_prob(10.5, 1, c2.gamma0, c2.gamma1, c2.gamma2),
        1e-15,
    );
    push(
        "callback probability at (14, 15)",
        0.007_826_086_956_521_75,
        sim2::callback_prob(14.0, 15, c2.gamma0, c2.gamma1, c2.gamma2),
        1e-12,
    );
    push("structural callbacks at (10.5, 1)", 0.525, sim2::structural_mean_c(10.5, 1, &c2), 1e-12);

    push(
        "within-time sum over 15 periods",
        0.0,
        within_time(15).iter().sum::<f64>(),
        0.0,
    );
    let demeaned = within_demean(&[1.0, 0.0, 0.0], &[1.0, 1.0, 2.0]).unwrap_or_default();
    push("weighted demeaning of (A,C) = {(2,1),(2,0)}", 0.75, demeaned[0], 1e-15);

    let toy_design: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 1.0, 2.0].iter().map(|&t| vec![1.0, t]).collect();
    let toy_y = [0.0, 0.0, 0.0, 0.0, 1.0];
    let slope = least_squares(&toy_design, &toy_y, &[1.0; 5]).map(|b| b[1]).unwrap_or(f64::NAN);
    push("solver on five-row pooled system", 1.0 / 14.0, slope, 1e-10);

    let one_to_hundred: Vec<f64> = (1..=100).map(f64::from).collect();
    push(
        "nearest-rank percentile p90 of 1..100",
        90.0,
        percentile(&one_to_hundred, 90).unwrap_or(f64::NAN),
        0.0,
    );
    let one_to_ten: Vec<f64> = (1..=10).map(f64::from).collect();
    push(
        "nearest-rank percentile p5 of 1..10",
        1.0,
        percentile(&one_to_ten, 5).unwrap_or(f64::NAN),
        0.0,
    );

    let profile = profile_from_fit(&DurationCoefs::Linear(-0.2), 15, 10.5, "s0_mean_t1");
    push("linear profile level at t=15 from anchor 10.5", 7.7, profile.levels[14], 1e-12);

    checks
}
