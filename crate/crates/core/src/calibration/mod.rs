//! Synthetic longitudinal data and two-stage parameter estimation.
//!
//! Stage 1 calibrates item discriminations and thresholds from each
//! subject's first visit by marginal maximum likelihood under a standard
//! normal trait. Stage 2 holds the discriminations and two lowest thresholds
//! fixed and fits the slope, random-effect covariance, upper thresholds, and
//! per-subject effects by penalized MAP.

mod itemfit;
pub mod ledger;
pub mod priors;
pub mod simulate;
pub mod stage1;
pub mod stage2;

pub use ledger::{LedgerRow, ParameterLedger};
pub use priors::{default_priors, PriorSpec, TruncNormal};
pub use simulate::{simulate_longitudinal, SimulatedPanel, SimulationScenario, VisitSchedule};
pub use stage1::{
    fit_grm_cross_sectional, layout_from_panel, layout_of, ItemLayout, Stage1Config, Stage1Fit, SubjectTheta,
};
pub use stage2::{fit_longitudinal_map, FitResult, Stage2Config, SubjectEffects};
