//! Graded response model: category probabilities, item and set Fisher
//! information, and the conditional standard deviation of a trait estimate.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Lower clamp applied to cumulative probabilities and to category
/// probabilities in the information denominator.
pub const PROB_FLOOR: f64 = 1e-14;

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(logistic(x))` without overflow or cancellation.
#[inline]
pub fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// One GRM item: a discrimination and strictly increasing thresholds.
///
/// An item with `M` thresholds has response levels `0..=M`; `M = 1` is the
/// two-parameter logistic model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemParams {
    id: String,
    a: f64,
    thresholds: Vec<f64>,
}

impl ItemParams {
    pub fn new(id: impl Into<String>, a: f64, thresholds: Vec<f64>) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidItem { id: id.clone(), reason };
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid(format!("discrimination must be positive, got {a}")));
        }
        if thresholds.is_empty() {
            return Err(invalid("at least one threshold is required".into()));
        }
        if let Some(b) = thresholds.iter().find(|b| !b.is_finite()) {
            return Err(invalid(format!("non-finite threshold {b}")));
        }
        if let Some(w) = thresholds.windows(2).position(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "thresholds must be strictly increasing: b{} = {} >= b{} = {}",
                w + 1,
                thresholds[w],
                w + 2,
                thresholds[w + 1]
            )));
        }
        Ok(Self { id, a, thresholds })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Highest response level `M`.
    pub fn max_level(&self) -> usize {
        self.thresholds.len()
    }

    /// `(P(Y >= m), P(Y < m))` for `m` in `0..=M+1`, both computed directly so
    /// neither suffers cancellation in the tails.
    #[inline]
    fn cumulative(&self, m: usize, theta: f64) -> (f64, f64) {
        if m == 0 {
            (1.0, 0.0)
        } else if m > self.thresholds.len() {
            (0.0, 1.0)
        } else {
            let z = self.a * (theta - self.thresholds[m - 1]);
            (logistic(z), logistic(-z))
        }
    }

    fn check_level(&self, m: usize, max: usize) -> Result<()> {
        if m > max {
            return Err(Error::LevelOutOfRange {
                id: self.id.clone(),
                level: m,
                max,
            });
        }
        Ok(())
    }

    /// Probability of responding at level `m` or above; `m` may be `M + 1`.
    pub fn prob_gte(&self, m: usize, theta: f64) -> Result<f64> {
        self.check_level(m, self.max_level() + 1)?;
        Ok(self.cumulative(m, theta).0)
    }

    /// Probability of responding exactly at level `m`.
    pub fn prob_eq(&self, m: usize, theta: f64) -> Result<f64> {
        self.check_level(m, self.max_level())?;
        Ok(self.log_prob_eq_unchecked(m, theta).exp())
    }

    /// All `M + 1` category probabilities at `theta`.
    pub fn category_probs(&self, theta: f64) -> Vec<f64> {
        (0..=self.max_level())
            .map(|m| self.log_prob_eq_unchecked(m, theta).exp())
            .collect()
    }

    /// `ln P(Y = m | theta)`, stable in both tails.
    pub(crate) fn log_prob_eq_unchecked(&self, m: usize, theta: f64) -> f64 {
        let big_m = self.max_level();
        let z = |k: usize| self.a * (theta - self.thresholds[k - 1]);
        if m == 0 {
            log_logistic(-z(1))
        } else if m == big_m {
            log_logistic(z(big_m))
        } else {
            let (lo, hi) = (z(m), z(m + 1));
            // logistic(lo) - logistic(hi) = logistic(lo) logistic(-hi) (1 - e^(hi - lo))
            log_logistic(lo) + log_logistic(-hi) + (-(hi - lo).exp_m1()).ln()
        }
    }

    /// Log-probability of level `m` with its first and second derivatives in
    /// `theta`.
    pub(crate) fn log_prob_eq_derivs(&self, m: usize, theta: f64) -> (f64, f64, f64) {
        let (p_lo, q_lo) = self.cumulative(m, theta);
        let (p_hi, q_hi) = self.cumulative(m + 1, theta);
        let a = self.a;
        let grad = a * (q_lo - p_hi);
        let hess = -a * a * (p_lo * q_lo + p_hi * q_hi);
        (self.log_prob_eq_unchecked(m, theta), grad, hess)
    }

    /// Fisher information of the item at `theta`.
    pub fn information(&self, theta: f64) -> f64 {
        let big_m = self.max_level();
        let slope = |m: usize| -> f64 {
            if m == 0 || m > big_m {
                return 0.0;
            }
            let (p, q) = self.cumulative(m, theta);
            self.a * p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR) * q.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
        };
        let mut total = 0.0;
        let mut prev = slope(0);
        for m in 1..=big_m + 1 {
            let cur = slope(m);
            let denom = self.log_prob_eq_unchecked(m - 1, theta).exp().max(PROB_FLOOR);
            let diff = prev - cur;
            total += diff * diff / denom;
            prev = cur;
        }
        total
    }
}

/// An ordered, nonempty collection of items on a common trait scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ItemBank {
    items: Vec<ItemParams>,
}

impl ItemBank {
    pub fn new(items: Vec<ItemParams>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidBank("bank has no items".into()));
        }
        let mut seen = HashMap::with_capacity(items.len());
        for (idx, item) in items.iter().enumerate() {
            if let Some(prev) = seen.insert(item.id(), idx) {
                return Err(Error::InvalidBank(format!(
                    "duplicate item id `{}` at positions {} and {}",
                    item.id(),
                    prev + 1,
                    idx + 1
                )));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[ItemParams] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&ItemParams> {
        self.items.get(idx)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|it| it.id() == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|it| it.id()).collect()
    }

    /// Items at the given bank positions, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Vec<ItemParams> {
        indices.iter().map(|&i| self.items[i].clone()).collect()
    }
}

/// Sum of item information over `items` at `theta`.
pub fn set_information(items: &[ItemParams], theta: f64) -> f64 {
    items.iter().map(|it| it.information(theta)).sum()
}

/// Asymptotic standard deviation of the trait estimate from `items` at
/// `theta`: the inverse square root of the set information.
pub fn conditional_sd(items: &[ItemParams], theta: f64) -> Result<f64> {
    sd_from_information(set_information(items, theta), theta)
}

pub(crate) fn sd_from_information(info: f64, theta: f64) -> Result<f64> {
    if info > 0.0 && info.is_finite() {
        Ok(info.sqrt().recip())
    } else {
        Err(Error::NonInformative { theta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn item(a: f64, b: &[f64]) -> ItemParams {
        ItemParams::new("x", a, b.to_vec()).unwrap()
    }

    #[test]
    fn boundary_conventions() {
        let it = item(2.5, &[0.0]);
        assert_eq!(it.prob_gte(0, -3.0).unwrap(), 1.0);
        assert_eq!(it.prob_gte(2, 3.0).unwrap(), 0.0);
        assert_eq!(it.prob_gte(1, 0.0).unwrap(), 0.5);
        assert_eq!(item(2.5, &[-2.0]).prob_gte(1, -2.0).unwrap(), 0.5);
        assert!(matches!(
            it.prob_gte(3, 0.0),
            Err(Error::LevelOutOfRange { level: 3, max: 2, .. })
        ));
        assert!(it.prob_eq(2, 0.0).is_err());
    }

    #[test]
    fn category_probabilities() {
        let it = item(2.5, &[0.0]);
        assert_relative_eq!(it.prob_eq(1, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(it.prob_eq(0, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        let two = item(1.0, &[-1.0, 1.0]);
        let expected = logistic(1.0) - logistic(-1.0);
        assert_relative_eq!(two.prob_eq(1, 0.0).unwrap(), expected, epsilon = 1e-14);
        assert_relative_eq!(expected, 0.462_117_157_260_009_8, epsilon = 1e-15);
    }

    #[test]
    fn two_pl_information() {
        let it = item(2.5, &[0.0]);
        assert_relative_eq!(it.information(0.0), 1.5625, epsilon = 1e-14);
        assert!(it.information(60.0) < 1e-12);
        assert!(it.information(-60.0) < 1e-12);
        assert!(it.information(1e6).is_finite());
    }

    #[test]
    fn set_information_and_sd() {
        let it = item(2.5, &[0.0]);
        assert_eq!(set_information(&[], 0.3), 0.0);
        assert_relative_eq!(set_information(&[it.clone(), it.clone()], 0.0), 3.125, epsilon = 1e-14);
        assert_relative_eq!(conditional_sd(&[it], 0.0).unwrap(), 0.8, epsilon = 1e-14);
        assert!(matches!(conditional_sd(&[], 0.0), Err(Error::NonInformative { .. })));
    }

    #[test]
    fn rejects_invalid_items() {
        assert!(ItemParams::new("a", 0.0, vec![0.0]).is_err());
        assert!(ItemParams::new("a", 1.0, vec![]).is_err());
        assert!(ItemParams::new("a", 1.0, vec![1.0, 0.5]).is_err());
        assert!(ItemParams::new("a", 1.0, vec![1.0, 1.0]).is_err());
        let dup = vec![item(1.0, &[0.0]), item(1.0, &[1.0])];
        assert!(ItemBank::new(dup).is_err());
        assert!(ItemBank::new(vec![]).is_err());
    }

    #[test]
    fn log_probabilities_stay_finite_in_tails() {
        let it = item(3.0, &[-1.0, 0.0, 2.0]);
        for &theta in &[-200.0, -40.0, 0.0, 40.0, 200.0] {
            for m in 0..=3 {
                let (lp, g, h) = it.log_prob_eq_derivs(m, theta);
                assert!(lp.is_finite() || lp == f64::NEG_INFINITY);
                assert!(g.is_finite() && h.is_finite());
            }
        }
        assert!(it.log_prob_eq_unchecked(0, 40.0).is_finite());
        assert!(it.log_prob_eq_unchecked(3, -40.0).is_finite());
    }
}
