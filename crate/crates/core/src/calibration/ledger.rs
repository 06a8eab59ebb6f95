use std::fmt;

use serde::Serialize;

/// One row of the fixed/estimated parameter split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerRow {
    pub name: &'static str,
    pub n: usize,
    pub fixed: usize,
    pub estimated: usize,
    pub stage1: usize,
    pub stage2: usize,
}

/// Parameter counts of the two-stage longitudinal model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParameterLedger {
    pub rows: Vec<LedgerRow>,
    pub total: LedgerRow,
}

impl ParameterLedger {
    /// `thresholds[i]` is item `i`'s number of thresholds. The first stage
    /// estimates discriminations and the two lowest thresholds; the second
    /// estimates the rest, the population slope terms, and two effects per
    /// subject. Intercept mean and variance are fixed.
    pub fn new(thresholds: &[usize], n_subjects: usize) -> Self {
        let n_items = thresholds.len();
        let all: usize = thresholds.iter().sum();
        let lower: usize = thresholds.iter().map(|&m| m.min(2)).sum();
        let row = |name, n, fixed, stage1, stage2| LedgerRow {
            name,
            n,
            fixed,
            estimated: n - fixed,
            stage1,
            stage2,
        };
        let rows = vec![
            row("Mean intercept", 1, 1, 0, 0),
            row("Mean slope", 1, 0, 0, 1),
            row("Random intercept variance", 1, 1, 0, 0),
            row("Random slope variance", 1, 0, 0, 1),
            row("Random effects correlation", 1, 0, 0, 1),
            row("Item thresholds", all, 0, lower, all - lower),
            row("Item discrimination", n_items, 0, n_items, 0),
            row("Individual random intercepts", n_subjects, 0, 0, n_subjects),
            row("Individual random slopes", n_subjects, 0, 0, n_subjects),
        ];
        let total = rows.iter().fold(row("Total", 0, 0, 0, 0), |acc, r| LedgerRow {
            name: "Total",
            n: acc.n + r.n,
            fixed: acc.fixed + r.fixed,
            estimated: acc.estimated + r.estimated,
            stage1: acc.stage1 + r.stage1,
            stage2: acc.stage2 + r.stage2,
        });
        Self { rows, total }
    }
}

impl fmt::Display for ParameterLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<30}{:>8}{:>8}{:>11}{:>10}{:>10}",
            "Model parameters", "N", "Fixed", "Estimated", "Stage 1", "Stage 2"
        )?;
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            writeln!(
                f,
                "{:<30}{:>8}{:>8}{:>11}{:>10}{:>10}",
                r.name, r.n, r.fixed, r.estimated, r.stage1, r.stage2
            )?;
        }
        Ok(())
    }
}
