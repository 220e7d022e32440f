//! Panel data model shared by both simulations and the estimation layer.
//!
//! A generated panel always holds the complete no-attrition sample: one row
//! per spell and period over the whole observation window. The empirically
//! observed sample is the filtered view of rows at or before each spell's
//! observed length, so structural and empirical quantities come from the
//! same draws.

/// One individual/spell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpellMeta {
    /// Spell index; rows refer back to this. Dense, starting at 0.
    pub id: u32,
    /// Time-invariant heterogeneity parameter.
    pub alpha: f64,
    /// Latent exit period, `None` when the exit falls beyond the window.
    pub tau: Option<u32>,
    /// Observed spell length: `min(tau, tau_bar)`.
    pub t_obs: u32,
    /// True iff the spell outlives the window.
    pub censored: bool,
}

impl SpellMeta {
    /// Build a spell record from a sampled exit period.
    pub fn new(id: u32, alpha: f64, tau: Option<u32>, tau_bar: u32) -> Self {
        debug_assert!(tau.is_none_or(|t| t >= 1 && t <= tau_bar));
        let (t_obs, censored) = match tau {
            Some(t) => (t.min(tau_bar), false),
            None => (tau_bar, true),
        };
        SpellMeta { id, alpha, tau, t_obs, censored }
    }
}

/// One (spell, period) observation of the exit-indicator process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRow {
    pub id: u32,
    /// Elapsed duration, 1-based.
    pub t: u32,
    /// Structural exit hazard at (id, t), stored so residuals are exact per draw.
    pub hazard: f64,
    /// Exit indicator: 1 only in the period the exit occurs.
    pub y: u8,
}

/// One (spell, period) observation of the job-search process.
///
/// Application-level callbacks are aggregated per period; the application
/// layer is recovered through frequency weights in the estimation module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobSearchRow {
    pub id: u32,
    pub t: u32,
    /// Idiosyncratic effort shock.
    pub xi: f64,
    /// Applications submitted this period.
    pub a_count: u32,
    /// Callbacks received this period.
    pub c_count: u32,
    /// Offers received this period.
    pub o_count: u32,
    /// True iff at least one offer arrived (attrition event).
    pub exit_here: bool,
    /// Structural mean of applications at (alpha, t), before the effort shock.
    pub mean_a: f64,
    /// Structural per-application callback probability at (alpha, t).
    pub cb_prob: f64,
}

/// Row access shared by both simulations.
pub trait PanelRow {
    fn id(&self) -> u32;
    fn t(&self) -> u32;
}

impl PanelRow for ExitRow {
    fn id(&self) -> u32 {
        self.id
    }
    fn t(&self) -> u32 {
        self.t
    }
}

impl PanelRow for JobSearchRow {
    fn id(&self) -> u32 {
        self.id
    }
    fn t(&self) -> u32 {
        self.t
    }
}

/// Complete panel: every spell carries rows for the full window (the
/// no-attrition view); rows are ordered by `(id, t)`.
#[derive(Debug, Clone)]
pub struct Panel<R> {
    pub spells: Vec<SpellMeta>,
    pub rows: Vec<R>,
    /// Right-censoring duration: the maximum observation window.
    pub tau_bar: u32,
}

pub type ExitPanel = Panel<ExitRow>;
pub type JobSearchPanel = Panel<JobSearchRow>;

impl<R: PanelRow> Panel<R> {
    /// Number of spells.
    pub fn n(&self) -> usize {
        self.spells.len()
    }

    /// Observed sample: rows with `t <= t_obs` of their spell, in `(id, t)`
    /// order. Yields exactly the sum of observed spell lengths.
    pub fn s1_view(&self) -> impl Iterator<Item = &R> {
        self.rows
            .iter()
            .filter(|r| r.t() <= self.spells[r.id() as usize].t_obs)
    }

    /// `(t_obs, censored)` per spell, indexed by spell id.
    pub fn spell_lengths(&self) -> Vec<(u32, bool)> {
        self.spells.iter().map(|s| (s.t_obs, s.censored)).collect()
    }

    /// Check the structural panel invariants; used by generators and tests.
    pub fn validate(&self) -> Result<(), String> {
        if self.rows.len() != self.spells.len() * self.tau_bar as usize {
            return Err(format!(
                "row count {} != n * tau_bar = {}",
                self.rows.len(),
                self.spells.len() * self.tau_bar as usize
            ));
        }
        for (i, s) in self.spells.iter().enumerate() {
            if s.id as usize != i {
                return Err(format!("spell id {} at position {i}", s.id));
            }
            if s.t_obs < 1 || s.t_obs > self.tau_bar {
                return Err(format!("spell {i}: t_obs {} outside window", s.t_obs));
            }
            if s.censored != s.tau.is_none() {
                return Err(format!("spell {i}: censoring flag inconsistent with tau"));
            }
        }
        let mut expect_id = 0u32;
        let mut expect_t = 1u32;
        for r in &self.rows {
            if r.id() != expect_id || r.t() != expect_t {
                return Err(format!(
                    "row order broken at (id={}, t={}), expected (id={expect_id}, t={expect_t})",
                    r.id(),
                    r.t()
                ));
            }
            if expect_t == self.tau_bar {
                expect_t = 1;
                expect_id += 1;
            } else {
                expect_t += 1;
            }
        }
        Ok(())
    }
}
