//! Item-bank analysis for the graded response model.
//!
//! The crate evaluates item and set Fisher information, integrates precision
//! over a latent-trait population, and selects K-item subsets by four
//! methods: ranking by expected information, coordinate-descent exchange on
//! the expected standard deviation, the adaptive per-trait limit, and a
//! random-order baseline. Supporting modules simulate longitudinal responses,
//! score respondents, and calibrate item and population parameters.
//!
//! Hot loops (information tables, candidate exchanges, baseline repetitions,
//! per-subject fits) run on rayon when the default `parallel` feature is on
//! and sequentially otherwise; results are identical either way.

pub mod calibration;
pub mod commands;
pub mod error;
pub mod estimation;
pub mod fixtures;
pub mod grm;
pub mod io;
mod optim;
pub mod panel;
pub mod par;
pub mod population;
pub mod selection;

pub use error::{Error, ErrorClass, Result};
pub use grm::{conditional_sd, set_information, ItemBank, ItemParams};
pub use panel::{PanelRecord, ResponsePanel, ResponseSet};
pub use population::{
    expected_item_information, expected_sd, expected_set_information, make_quadrature, InformationTable,
    LatentDistribution, QuadratureRule,
};
pub use selection::{
    adaptive_expected_sd, brute_force_best, comparison_curves, coordinate_descent, random_baseline, select_adaptive_at,
    select_by_rank, CdInit, ComparisonTable, SelectionMethod, Selector, SubsetResult,
};
