//! Longitudinal ordinal responses: `(subject, time, item, level)` records and
//! per-subject views resolved against an item bank.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grm::ItemBank;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelRecord {
    pub subject_id: String,
    pub time_years: f64,
    pub item_id: String,
    pub level: usize,
}

/// Order-preserving map key for a nonnegative time; `-0.0` maps with `0.0`.
fn time_key(t: f64) -> u64 {
    (t + 0.0).to_bits()
}

/// Visit time with its `(item index, level)` responses.
type TimedResponses = (f64, Vec<(usize, usize)>);

/// Responses of one respondent at one time point, as `(item_id, level)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResponseSet {
    pub responses: Vec<(String, usize)>,
}

impl ResponseSet {
    pub fn new(responses: Vec<(String, usize)>) -> Self {
        Self { responses }
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    /// Resolve ids to bank indices, checking levels and id uniqueness.
    pub fn resolve(&self, bank: &ItemBank) -> Result<Vec<(usize, usize)>> {
        let mut seen = vec![false; bank.len()];
        self.responses
            .iter()
            .map(|(id, level)| {
                let idx = bank.index_of(id).ok_or_else(|| Error::UnknownItem(id.clone()))?;
                if seen[idx] {
                    return Err(Error::InvalidPanel(format!(
                        "item `{id}` answered twice in one response set"
                    )));
                }
                seen[idx] = true;
                let max = bank.items()[idx].max_level();
                if *level > max {
                    return Err(Error::LevelOutOfRange {
                        id: id.clone(),
                        level: *level,
                        max,
                    });
                }
                Ok((idx, *level))
            })
            .collect()
    }
}

/// One visit with responses resolved to `(item index, level)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Visit {
    pub time: f64,
    pub responses: Vec<(usize, usize)>,
}

/// All visits of one subject, ascending in time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectPanel {
    pub id: String,
    pub visits: Vec<Visit>,
}

impl SubjectPanel {
    pub fn n_responses(&self) -> usize {
        self.visits.iter().map(|v| v.responses.len()).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResponsePanel {
    pub records: Vec<PanelRecord>,
}

impl ResponsePanel {
    pub fn new(records: Vec<PanelRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Check ids, levels, times, and `(subject, time, item)` uniqueness.
    pub fn validate(&self, bank: &ItemBank) -> Result<()> {
        let mut keys = HashMap::with_capacity(self.records.len());
        for (row, rec) in self.records.iter().enumerate() {
            let line = row + 2;
            let idx = bank
                .index_of(&rec.item_id)
                .ok_or_else(|| Error::InvalidPanel(format!("row {line}: unknown item id `{}`", rec.item_id)))?;
            let max = bank.items()[idx].max_level();
            if rec.level > max {
                return Err(Error::InvalidPanel(format!(
                    "row {line}: level {} out of range 0..={max} for item `{}`",
                    rec.level, rec.item_id
                )));
            }
            if !(rec.time_years.is_finite() && rec.time_years >= 0.0) {
                return Err(Error::InvalidPanel(format!(
                    "row {line}: time must be finite and nonnegative, got {}",
                    rec.time_years
                )));
            }
            let key = (rec.subject_id.as_str(), time_key(rec.time_years), idx);
            if let Some(first) = keys.insert(key, line) {
                return Err(Error::InvalidPanel(format!(
                    "row {line}: duplicate (subject `{}`, time {}, item `{}`) first seen at row {first}; \
                     same-day duplicates are a preprocessing concern (see --dedupe worst-day)",
                    rec.subject_id, rec.time_years, rec.item_id
                )));
            }
        }
        Ok(())
    }

    /// Collapse duplicate `(subject, time, item)` rows, keeping the highest
    /// (most severe) level. Returns the number of rows dropped.
    pub fn dedupe_worst(&mut self) -> usize {
        let before = self.records.len();
        let mut best: HashMap<(String, u64, String), usize> = HashMap::new();
        let mut keep = Vec::with_capacity(self.records.len());
        for rec in self.records.drain(..) {
            let key = (rec.subject_id.clone(), time_key(rec.time_years), rec.item_id.clone());
            match best.get(&key) {
                Some(&pos) => {
                    let kept: &mut PanelRecord = &mut keep[pos];
                    kept.level = kept.level.max(rec.level);
                }
                None => {
                    best.insert(key, keep.len());
                    keep.push(rec);
                }
            }
        }
        self.records = keep;
        before - self.records.len()
    }

    /// Group by subject (first-appearance order) and by time (ascending).
    pub fn subjects(&self, bank: &ItemBank) -> Result<Vec<SubjectPanel>> {
        self.validate(bank)?;
        let mut order: Vec<String> = Vec::new();
        let mut by_subject: HashMap<&str, BTreeMap<u64, TimedResponses>> = HashMap::new();
        for rec in &self.records {
            let entry = by_subject.entry(rec.subject_id.as_str()).or_insert_with(|| {
                order.push(rec.subject_id.clone());
                BTreeMap::new()
            });
            // Nonnegative finite f64 bit patterns sort like the values.
            let idx = bank.index_of(&rec.item_id).expect("validated");
            entry
                .entry(time_key(rec.time_years))
                .or_insert_with(|| (rec.time_years, Vec::new()))
                .1
                .push((idx, rec.level));
        }
        Ok(order
            .into_iter()
            .map(|id| {
                let visits = by_subject
                    .remove(id.as_str())
                    .expect("grouped")
                    .into_values()
                    .map(|(time, mut responses)| {
                        responses.sort_unstable();
                        Visit { time, responses }
                    })
                    .collect();
                SubjectPanel { id, visits }
            })
            .collect())
    }

    /// Each subject's earliest visit.
    pub fn first_visits(&self, bank: &ItemBank) -> Result<Vec<SubjectPanel>> {
        Ok(self
            .subjects(bank)?
            .into_iter()
            .map(|mut s| {
                s.visits.truncate(1);
                s
            })
            .collect())
    }
}
