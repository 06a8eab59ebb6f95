//! Shipped item banks.
//!
//! `figure2` is the seven-item two-parameter bank (a = 2.5, five thresholds
//! clustered at 0 and one at each of ±2) on which ranking by expected
//! information and minimizing expected SD disagree. `synthetic34` is a
//! 34-item, five-level bank whose thresholds sit mostly above the population
//! mean, so roughly two thirds of simulated responses are at level 0.

use crate::grm::ItemBank;
use crate::io::parse_bank_csv;

pub const FIGURE2_CSV: &str = include_str!("../fixtures/figure2.csv");
pub const SYNTHETIC34_CSV: &str = include_str!("../fixtures/synthetic34.csv");

/// Item ids of the two five-item sets contrasted on the figure2 bank.
pub const FIGURE2_SET1: [&str; 5] = ["item2", "item3", "item4", "item5", "item6"];
pub const FIGURE2_SET2: [&str; 5] = ["item1", "item3", "item4", "item5", "item7"];

pub fn figure2_bank() -> ItemBank {
    parse_bank_csv(FIGURE2_CSV).expect("shipped fixture is valid")
}

pub fn synthetic34_bank() -> ItemBank {
    parse_bank_csv(SYNTHETIC34_CSV).expect("shipped fixture is valid")
}

/// Look up a shipped bank by name.
pub fn by_name(name: &str) -> Option<ItemBank> {
    match name {
        "figure2" => Some(figure2_bank()),
        "synthetic34" => Some(synthetic34_bank()),
        _ => None,
    }
}
