//! K-item subset selection: ranking by expected information, coordinate
//! descent on the expected standard deviation, the per-trait adaptive limit,
//! a random-order baseline, and exhaustive enumeration as an oracle.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grm::{conditional_sd, set_information, ItemBank};
use crate::par;
use crate::population::{InformationTable, LatentDistribution, DEFAULT_NODES};

/// Default cap on the number of subsets [`Selector::brute_force`] may visit.
pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 2_000_000;

/// Default repetitions of the random-order baseline.
pub const DEFAULT_RANDOM_REPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    RankByExpectedInfo,
    CoordinateDescent,
    Adaptive,
    Random,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 4] = [
        SelectionMethod::RankByExpectedInfo,
        SelectionMethod::CoordinateDescent,
        SelectionMethod::Adaptive,
        SelectionMethod::Random,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            SelectionMethod::RankByExpectedInfo => "rank",
            SelectionMethod::CoordinateDescent => "cd",
            SelectionMethod::Adaptive => "adaptive",
            SelectionMethod::Random => "random",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionMethod::ALL
            .into_iter()
            .find(|m| m.short_name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown method `{s}` (rank|cd|adaptive|random)")))
    }
}

/// One accepted exchange inside a coordinate-descent sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapRecord {
    pub position: usize,
    pub item_out: String,
    pub item_in: String,
    pub criterion_before: f64,
    pub criterion_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub swaps: Vec<SwapRecord>,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub init: String,
    pub seed: Option<u64>,
    pub initial_criterion: Option<f64>,
    pub iterations: usize,
    pub sweeps: Vec<SweepRecord>,
    /// Final positional vector (coordinate descent keeps item positions).
    pub positions: Vec<String>,
}

impl SelectionTrace {
    fn simple(init: &str, ids: &[String]) -> Self {
        Self {
            init: init.to_string(),
            seed: None,
            initial_criterion: None,
            iterations: 0,
            sweeps: Vec::new(),
            positions: ids.to_vec(),
        }
    }

    pub fn swap_count(&self) -> usize {
        self.sweeps.iter().map(|s| s.swaps.len()).sum()
    }
}

/// A selected subset with its criterion values. `item_ids` and `indices` are
/// in ascending bank order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetResult {
    pub method: SelectionMethod,
    pub k: usize,
    pub item_ids: Vec<String>,
    pub indices: Vec<usize>,
    pub expected_info: f64,
    pub expected_sd: f64,
    pub trace: SelectionTrace,
}

/// Starting subset for coordinate descent.
#[derive(Debug, Clone, PartialEq)]
pub enum CdInit {
    Rank,
    Random,
    Explicit(Vec<String>),
}

impl CdInit {
    fn describe(&self) -> String {
        match self {
            CdInit::Rank => "rank".into(),
            CdInit::Random => "random".into(),
            CdInit::Explicit(ids) => format!("explicit:{}", ids.join(";")),
        }
    }
}

impl FromStr for CdInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank" => Ok(CdInit::Rank),
            "random" => Ok(CdInit::Random),
            list => {
                let ids: Vec<String> = list
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect();
                if ids.is_empty() {
                    return Err(Error::InvalidInit("empty item list".into()));
                }
                Ok(CdInit::Explicit(ids))
            }
        }
    }
}

/// The adaptive (best-case) subset chosen at one quadrature node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeChoice {
    pub theta: f64,
    pub weight: f64,
    pub indices: Vec<usize>,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveResult {
    pub k: usize,
    pub expected_sd: f64,
    pub nodes: Vec<NodeChoice>,
}

/// Random-order baseline: for each `K`, the mean and standard deviation over
/// repetitions of the expected SD of the first `K` items of a random
/// permutation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomCurve {
    pub reps: usize,
    pub seed: u64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Expected SD by subset size and method, with percentage decreases relative
/// to the random baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub methods: Vec<SelectionMethod>,
    pub k: Vec<usize>,
    /// `expected_sd[m][k - 1]` for `methods[m]`.
    pub expected_sd: Vec<Vec<f64>>,
    pub random: RandomCurve,
    /// `100 * (1 - method / random)`, same layout as `expected_sd`.
    pub pct_decrease_vs_random: Vec<Vec<f64>>,
}

impl ComparisonTable {
    pub fn column(&self, method: SelectionMethod) -> Option<&[f64]> {
        self.methods
            .iter()
            .position(|&m| m == method)
            .map(|i| self.expected_sd[i].as_slice())
    }

    pub fn pct_column(&self, method: SelectionMethod) -> Option<&[f64]> {
        self.methods
            .iter()
            .position(|&m| m == method)
            .map(|i| self.pct_decrease_vs_random[i].as_slice())
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::SubsetSize { k, n });
    }
    Ok(())
}

/// `n choose k` without overflow for bank-sized arguments.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Indices sorted by descending `score`, ties by ascending index.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Subset selection over one bank and one quadrature rule.
#[derive(Debug, Clone)]
pub struct Selector<'a> {
    bank: &'a ItemBank,
    table: InformationTable,
    brute_force_cap: u128,
}

impl<'a> Selector<'a> {
    pub fn new(bank: &'a ItemBank, dist: &LatentDistribution, n_nodes: usize) -> Result<Self> {
        Ok(Self::from_table(
            bank,
            InformationTable::from_distribution(bank, dist, n_nodes)?,
        ))
    }

    pub fn from_table(bank: &'a ItemBank, table: InformationTable) -> Self {
        assert_eq!(bank.len(), table.n_items(), "table built for another bank");
        Self {
            bank,
            table,
            brute_force_cap: DEFAULT_BRUTE_FORCE_CAP,
        }
    }

    pub fn with_brute_force_cap(mut self, cap: u128) -> Self {
        self.brute_force_cap = cap;
        self
    }

    pub fn bank(&self) -> &ItemBank {
        self.bank
    }

    pub fn table(&self) -> &InformationTable {
        &self.table
    }

    fn ids(&self, indices: &[usize]) -> Vec<String> {
        indices.iter().map(|&i| self.bank.items()[i].id().to_string()).collect()
    }

    fn result(&self, method: SelectionMethod, mut indices: Vec<usize>, trace: SelectionTrace) -> Result<SubsetResult> {
        indices.sort_unstable();
        Ok(SubsetResult {
            method,
            k: indices.len(),
            item_ids: self.ids(&indices),
            expected_info: self.table.expected_set_information(&indices),
            expected_sd: self.table.expected_sd_sorted(&indices)?,
            indices,
            trace,
        })
    }

    /// Bank indices from most to least expected information.
    pub fn rank_order(&self) -> Vec<usize> {
        let scores: Vec<f64> = (0..self.bank.len())
            .map(|i| self.table.expected_item_information(i))
            .collect();
        descending_order(&scores)
    }

    /// The `k` items with the largest expected information.
    pub fn rank(&self, k: usize) -> Result<SubsetResult> {
        check_k(k, self.bank.len())?;
        let chosen = self.rank_order()[..k].to_vec();
        let trace = SelectionTrace::simple("rank", &self.ids(&chosen));
        self.result(SelectionMethod::RankByExpectedInfo, chosen, trace)
    }

    fn resolve_init(&self, k: usize, init: &CdInit, rng: Option<&mut ChaCha8Rng>) -> Result<Vec<usize>> {
        let n = self.bank.len();
        match init {
            CdInit::Rank => Ok(self.rank_order()[..k].to_vec()),
            CdInit::Random => {
                let rng = rng.ok_or_else(|| Error::InvalidInit("a random start requires a seed".into()))?;
                Ok(index::sample(rng, n, k).into_vec())
            }
            CdInit::Explicit(ids) => {
                if ids.len() != k {
                    return Err(Error::InvalidInit(format!("expected {k} items, got {}", ids.len())));
                }
                let mut positions = Vec::with_capacity(k);
                for id in ids {
                    let idx = self
                        .bank
                        .index_of(id)
                        .ok_or_else(|| Error::InvalidInit(format!("unknown item id `{id}`")))?;
                    if positions.contains(&idx) {
                        return Err(Error::InvalidInit(format!("duplicate item id `{id}`")));
                    }
                    positions.push(idx);
                }
                Ok(positions)
            }
        }
    }

    /// Coordinate-descent local search minimizing the expected SD.
    ///
    /// `seed` is required for `CdInit::Random` and recorded in the trace.
    pub fn coordinate_descent(&self, k: usize, init: &CdInit, seed: Option<u64>) -> Result<SubsetResult> {
        check_k(k, self.bank.len())?;
        let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
        let start = self.resolve_init(k, init, rng.as_mut())?;
        self.descend(start, init.describe(), seed)
    }

    /// Coordinate descent from an explicit positional vector of bank indices.
    pub fn descend(&self, mut positions: Vec<usize>, init: String, seed: Option<u64>) -> Result<SubsetResult> {
        let n = self.bank.len();
        check_k(positions.len(), n)?;
        let mut in_set = vec![false; n];
        for &p in &positions {
            if p >= n || in_set[p] {
                return Err(Error::InvalidInit(format!("invalid or repeated index {p}")));
            }
            in_set[p] = true;
        }
        let mut current = self.table.expected_sd(&positions)?;
        let initial = current;
        let mut sweeps = Vec::new();
        let mut iterations = 0;
        loop {
            iterations += 1;
            let mut swaps = Vec::new();
            for pos in 0..positions.len() {
                let incumbent = positions[pos];
                let mut others: Vec<usize> = positions.iter().copied().filter(|&i| i != incumbent).collect();
                others.sort_unstable();
                let candidates: Vec<usize> = (0..n).filter(|&i| !in_set[i]).collect();
                let scores = par::map_slice(&candidates, |&cand| {
                    let mut set = others.clone();
                    let at = set.partition_point(|&i| i < cand);
                    set.insert(at, cand);
                    self.table.expected_sd_sorted(&set)
                });
                let mut best_sd = current;
                let mut best_item = incumbent;
                for (&cand, sd) in candidates.iter().zip(scores) {
                    let sd = sd?;
                    if sd < best_sd {
                        best_sd = sd;
                        best_item = cand;
                    }
                }
                if best_item != incumbent {
                    in_set[incumbent] = false;
                    in_set[best_item] = true;
                    positions[pos] = best_item;
                    swaps.push(SwapRecord {
                        position: pos,
                        item_out: self.bank.items()[incumbent].id().to_string(),
                        item_in: self.bank.items()[best_item].id().to_string(),
                        criterion_before: current,
                        criterion_after: best_sd,
                    });
                    current = best_sd;
                }
            }
            let changed = !swaps.is_empty();
            sweeps.push(SweepRecord {
                sweep: iterations,
                swaps,
                criterion: current,
            });
            if !changed {
                break;
            }
        }
        let trace = SelectionTrace {
            init,
            seed,
            initial_criterion: Some(initial),
            iterations,
            sweeps,
            positions: self.ids(&positions),
        };
        self.result(SelectionMethod::CoordinateDescent, positions, trace)
    }

    /// Coordinate descent from the rank set and from `random_starts` random
    /// sets drawn from one seeded stream; returns the best local optimum
    /// (earliest start on ties).
    pub fn coordinate_descent_multistart(&self, k: usize, random_starts: usize, seed: u64) -> Result<SubsetResult> {
        check_k(k, self.bank.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts = vec![(self.rank_order()[..k].to_vec(), "rank".to_string())];
        for r in 0..random_starts {
            let s = index::sample(&mut rng, self.bank.len(), k).into_vec();
            starts.push((s, format!("random#{}", r + 1)));
        }
        let runs = par::map_slice(&starts, |(s, label)| self.descend(s.clone(), label.clone(), Some(seed)));
        let mut best: Option<SubsetResult> = None;
        for run in runs {
            let run = run?;
            if best.as_ref().is_none_or(|b| run.expected_sd < b.expected_sd) {
                best = Some(run);
            }
        }
        Ok(best.expect("at least the rank start runs"))
    }

    /// Adaptive choice at every quadrature node, integrated: the best-case
    /// expected SD of an instrument tailored to each respondent's trait.
    pub fn adaptive_expected_sd(&self, k: usize) -> Result<AdaptiveResult> {
        let n = self.bank.len();
        check_k(k, n)?;
        let rule = self.table.rule();
        let nodes = par::map_range(rule.len(), |node| {
            let column: Vec<f64> = (0..n).map(|i| self.table.row(i)[node]).collect();
            let mut chosen = descending_order(&column)[..k].to_vec();
            chosen.sort_unstable();
            let theta = rule.nodes()[node];
            let total = self.table.node_total(&chosen, node);
            crate::grm::sd_from_information(total, theta).map(|sd| NodeChoice {
                theta,
                weight: rule.weights()[node],
                indices: chosen,
                sd,
            })
        });
        let nodes = nodes.into_iter().collect::<Result<Vec<_>>>()?;
        let expected_sd = nodes.iter().map(|c| c.weight * c.sd).sum();
        Ok(AdaptiveResult { k, expected_sd, nodes })
    }

    /// Random-order baseline over `reps` seeded permutations.
    pub fn random_baseline(&self, reps: usize, seed: u64) -> Result<RandomCurve> {
        if reps == 0 {
            return Err(Error::InvalidInit("at least one repetition is required".into()));
        }
        let n = self.bank.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perms: Vec<Vec<usize>> = (0..reps)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let curves = par::map_slice(&perms, |perm| {
            (1..=n)
                .map(|k| self.table.expected_sd(&perm[..k]))
                .collect::<Result<Vec<f64>>>()
        });
        // Welford: identical inputs give back exactly that value as the mean.
        let mut mean = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        for (r, curve) in curves.into_iter().enumerate() {
            let curve = curve?;
            let count = (r + 1) as f64;
            for (k, v) in curve.into_iter().enumerate() {
                let delta = v - mean[k];
                mean[k] += delta / count;
                m2[k] += delta * (v - mean[k]);
            }
        }
        let sd = m2
            .iter()
            .map(|&s| if reps > 1 { (s / (reps - 1) as f64).sqrt() } else { 0.0 })
            .collect();
        Ok(RandomCurve { reps, seed, mean, sd })
    }

    /// Exact minimizer of the expected SD over all `k`-subsets; ties go to
    /// the lexicographically smallest index set.
    pub fn brute_force(&self, k: usize) -> Result<SubsetResult> {
        let n = self.bank.len();
        check_k(k, n)?;
        let count = binomial(n, k);
        if count > self.brute_force_cap {
            return Err(Error::EnumerationCap {
                count,
                cap: self.brute_force_cap,
            });
        }
        let per_first = par::map_range(n - k + 1, |first| -> Result<(f64, Vec<usize>)> {
            let mut combo: Vec<usize> = (first..first + k).collect();
            let mut best = (self.table.expected_sd_sorted(&combo)?, combo.clone());
            while next_combination(&mut combo[1..], n) {
                let sd = self.table.expected_sd_sorted(&combo)?;
                if sd < best.0 {
                    best = (sd, combo.clone());
                }
            }
            Ok(best)
        });
        let mut best: Option<(f64, Vec<usize>)> = None;
        for cand in per_first {
            let cand = cand?;
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
        let (_, chosen) = best.expect("n - k + 1 >= 1");
        let mut trace = SelectionTrace::simple("exhaustive", &self.ids(&chosen));
        trace.iterations = count as usize;
        self.result(SelectionMethod::CoordinateDescent, chosen, trace)
            .map(|mut r| {
                r.trace.init = format!("exhaustive over {count} subsets");
                r
            })
    }

    /// Expected SD for every `K = 1..=n` and each requested method, with the
    /// random baseline always computed for the percentage columns.
    /// Coordinate descent is rank-initialized.
    pub fn comparison_curves(&self, methods: &[SelectionMethod], reps: usize, seed: u64) -> Result<ComparisonTable> {
        if methods.is_empty() {
            return Err(Error::InvalidInit("no methods requested".into()));
        }
        let n = self.bank.len();
        let random = self.random_baseline(reps, seed)?;
        let order = self.rank_order();
        let mut columns = Vec::with_capacity(methods.len());
        for &method in methods {
            let column: Vec<f64> = match method {
                SelectionMethod::RankByExpectedInfo => (1..=n)
                    .map(|k| self.table.expected_sd(&order[..k]))
                    .collect::<Result<_>>()?,
                SelectionMethod::CoordinateDescent => par::map_range(n, |i| {
                    self.coordinate_descent(i + 1, &CdInit::Rank, None)
                        .map(|r| r.expected_sd)
                })
                .into_iter()
                .collect::<Result<_>>()?,
                SelectionMethod::Adaptive => (1..=n)
                    .map(|k| self.adaptive_expected_sd(k).map(|r| r.expected_sd))
                    .collect::<Result<_>>()?,
                SelectionMethod::Random => random.mean.clone(),
            };
            columns.push(column);
        }
        let pct = columns
            .iter()
            .map(|col| {
                col.iter()
                    .zip(&random.mean)
                    .map(|(v, r)| 100.0 * (1.0 - v / r))
                    .collect()
            })
            .collect();
        Ok(ComparisonTable {
            methods: methods.to_vec(),
            k: (1..=n).collect(),
            expected_sd: columns,
            random,
            pct_decrease_vs_random: pct,
        })
    }
}

/// Advance an ascending combination drawn from `..n` to its lexicographic
/// successor in place. Returns `false` when exhausted.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Top-`k` items by information at `theta`; exactly the subset minimizing
/// the conditional SD at `theta`.
pub fn select_adaptive_at(bank: &ItemBank, theta: f64, k: usize) -> Result<SubsetResult> {
    check_k(k, bank.len())?;
    let scores: Vec<f64> = bank.items().iter().map(|it| it.information(theta)).collect();
    let mut chosen = descending_order(&scores)[..k].to_vec();
    chosen.sort_unstable();
    let items = bank.subset(&chosen);
    let ids: Vec<String> = items.iter().map(|it| it.id().to_string()).collect();
    Ok(SubsetResult {
        method: SelectionMethod::Adaptive,
        k,
        expected_info: set_information(&items, theta),
        expected_sd: conditional_sd(&items, theta)?,
        trace: SelectionTrace::simple(&format!("theta={theta}"), &ids),
        item_ids: ids,
        indices: chosen,
    })
}

pub fn select_by_rank(bank: &ItemBank, dist: &LatentDistribution, k: usize) -> Result<SubsetResult> {
    Selector::new(bank, dist, DEFAULT_NODES)?.rank(k)
}

pub fn coordinate_descent(
    bank: &ItemBank,
    dist: &LatentDistribution,
    k: usize,
    init: &CdInit,
    seed: Option<u64>,
) -> Result<SubsetResult> {
    Selector::new(bank, dist, DEFAULT_NODES)?.coordinate_descent(k, init, seed)
}

pub fn adaptive_expected_sd(bank: &ItemBank, dist: &LatentDistribution, k: usize) -> Result<f64> {
    Ok(Selector::new(bank, dist, DEFAULT_NODES)?
        .adaptive_expected_sd(k)?
        .expected_sd)
}

pub fn random_baseline(bank: &ItemBank, dist: &LatentDistribution, reps: usize, seed: u64) -> Result<RandomCurve> {
    Selector::new(bank, dist, DEFAULT_NODES)?.random_baseline(reps, seed)
}

pub fn brute_force_best(bank: &ItemBank, dist: &LatentDistribution, k: usize) -> Result<SubsetResult> {
    Selector::new(bank, dist, DEFAULT_NODES)?.brute_force(k)
}

pub fn comparison_curves(
    bank: &ItemBank,
    dist: &LatentDistribution,
    methods: &[SelectionMethod],
    reps: usize,
    seed: u64,
) -> Result<ComparisonTable> {
    Selector::new(bank, dist, DEFAULT_NODES)?.comparison_curves(methods, reps, seed)
}
