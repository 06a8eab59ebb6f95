use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grm::ItemBank;
use crate::panel::{PanelRecord, ResponsePanel};

/// Visit times in years since the first visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitSchedule {
    /// Every subject is seen at the same times.
    Common(Vec<f64>),
    /// One list per subject; lists may differ in length.
    PerSubject(Vec<Vec<f64>>),
}

impl VisitSchedule {
    /// `n` annual visits at `t = 0, 1, ..., n - 1`.
    pub fn annual(n: usize) -> Self {
        Self::Common((0..n).map(|t| t as f64).collect())
    }

    fn times(&self, subject: usize) -> &[f64] {
        match self {
            Self::Common(t) => t,
            Self::PerSubject(all) => &all[subject],
        }
    }
}

/// Generative settings for longitudinal responses.
#[derive(Debug, Clone)]
pub struct SimulationScenario {
    pub bank: ItemBank,
    pub beta0: f64,
    pub beta1: f64,
    pub var_u0: f64,
    pub var_u1: f64,
    pub rho: f64,
    pub schedule: VisitSchedule,
    pub n_subjects: usize,
    pub seed: u64,
}

impl SimulationScenario {
    /// Population values of the fitted longitudinal model (intercept 0,
    /// slope 0.075 per year, intercept variance 1, slope variance 0.027,
    /// correlation 0.085).
    pub fn with_defaults(bank: ItemBank, schedule: VisitSchedule, n_subjects: usize, seed: u64) -> Self {
        Self {
            bank,
            beta0: 0.0,
            beta1: 0.075,
            var_u0: 1.0,
            var_u1: 0.027,
            rho: 0.085,
            schedule,
            n_subjects,
            seed,
        }
    }

    /// Variances may be zero (a degenerate population); the covariance must
    /// still be positive semidefinite.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        let finite = [self.beta0, self.beta1, self.var_u0, self.var_u1, self.rho]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return bad("population parameters must be finite".into());
        }
        if self.var_u0 < 0.0 || self.var_u1 < 0.0 || self.rho.abs() > 1.0 {
            return bad(format!(
                "random-effect covariance is not positive semidefinite (var_u0 = {}, var_u1 = {}, rho = {})",
                self.var_u0, self.var_u1, self.rho
            ));
        }
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive".into());
        }
        if let VisitSchedule::PerSubject(all) = &self.schedule {
            if all.len() != self.n_subjects {
                return bad(format!(
                    "per-subject schedule lists {} subjects, expected {}",
                    all.len(),
                    self.n_subjects
                ));
            }
        }
        for s in 0..self.n_subjects {
            let times = self.schedule.times(s);
            if times.is_empty() {
                return bad(format!("subject {s} has no visits"));
            }
            if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return bad(format!("subject {s}: visit times must be finite and nonnegative"));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return bad(format!("subject {s}: visit times must be strictly increasing"));
            }
            if matches!(self.schedule, VisitSchedule::Common(_)) {
                break;
            }
        }
        Ok(())
    }
}

/// Simulated panel plus the true random effects behind it.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: ResponsePanel,
    pub effects: Vec<(String, f64, f64)>,
}

/// Subject ids are `s0001`, `s0002`, ...; zero-padded to a common width so
/// lexical and numeric order agree.
pub fn subject_id(index: usize, n: usize) -> String {
    let width = n.max(1).to_string().len().max(4);
    format!("s{:0width$}", index + 1)
}

/// Draw subjects' random effects and an ordinal response to every item at
/// every visit. Records come out by subject, then time, then bank order.
pub fn simulate_longitudinal(scn: &SimulationScenario) -> Result<SimulatedPanel> {
    scn.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let sd0 = scn.var_u0.sqrt();
    let sd1 = scn.var_u1.sqrt();
    let resid = (1.0 - scn.rho * scn.rho).max(0.0).sqrt();
    let mut records = Vec::new();
    let mut effects = Vec::with_capacity(scn.n_subjects);
    for s in 0..scn.n_subjects {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let u0 = sd0 * z0;
        let u1 = sd1 * (scn.rho * z0 + resid * z1);
        let id = subject_id(s, scn.n_subjects);
        for &t in scn.schedule.times(s) {
            let theta = scn.beta0 + u0 + (scn.beta1 + u1) * t;
            for item in scn.bank.items() {
                let u: f64 = rng.random();
                // Inverse CDF: the level is the number of thresholds passed.
                let level = (1..=item.max_level())
                    .take_while(|&m| u < item.prob_gte(m, theta).expect("level in range"))
                    .count();
                records.push(PanelRecord {
                    subject_id: id.clone(),
                    time_years: t,
                    item_id: item.id().to_string(),
                    level,
                });
            }
        }
        effects.push((id, u0, u1));
    }
    Ok(SimulatedPanel {
        panel: ResponsePanel::new(records),
        effects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grm::ItemParams;

    fn bank() -> ItemBank {
        ItemBank::new(vec![
            ItemParams::new("i1", 1.5, vec![-0.5, 0.4, 1.2]).unwrap(),
            ItemParams::new("i2", 2.0, vec![0.8]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn deterministic_and_sized() {
        let scn = SimulationScenario::with_defaults(bank(), VisitSchedule::annual(3), 7, 11);
        let a = simulate_longitudinal(&scn).unwrap();
        let b = simulate_longitudinal(&scn).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_eq!(a.panel.len(), 7 * 3 * 2);
        a.panel.validate(&scn.bank).unwrap();
        let other = simulate_longitudinal(&SimulationScenario { seed: 12, ..scn }).unwrap();
        assert_ne!(a.panel, other.panel);
    }

    #[test]
    fn ragged_schedules() {
        let mut scn = SimulationScenario::with_defaults(
            bank(),
            VisitSchedule::PerSubject(vec![vec![0.0], vec![0.0, 0.5, 2.0]]),
            2,
            1,
        );
        assert_eq!(simulate_longitudinal(&scn).unwrap().panel.len(), 8);
        scn.schedule = VisitSchedule::PerSubject(vec![vec![0.0], vec![1.0, 0.5]]);
        assert!(simulate_longitudinal(&scn).is_err());
        scn.schedule = VisitSchedule::annual(2);
        scn.var_u1 = -0.1;
        assert!(simulate_longitudinal(&scn).is_err());
    }

    #[test]
    fn subject_ids_sort_numerically() {
        assert_eq!(subject_id(0, 10), "s0001");
        assert_eq!(subject_id(12344, 20000), "s12345");
    }
}
