//! Command implementations behind the `grmsel` binary.
//!
//! Each command takes typed options, writes any requested files, and returns
//! the text destined for stdout. Machine-readable output goes to `--output`
//! when given (the human summary then goes to stdout) and to stdout
//! otherwise.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::calibration::{
    self, default_priors, fit_grm_cross_sectional, fit_longitudinal_map, layout_from_panel, layout_of,
    simulate_longitudinal, ParameterLedger, PriorSpec, SimulationScenario, Stage1Config, Stage2Config, VisitSchedule,
};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_theta_map, estimate_theta_mle, estimate_trajectory_map, NormalPrior, PosteriorSummary, TrajectoryEstimate,
    TrajectoryPrior,
};
use crate::fixtures;
use crate::grm::{conditional_sd, set_information, ItemBank};
use crate::io::{self, fmt_f64};
use crate::panel::{ResponsePanel, ResponseSet};
use crate::population::{expected_sd_with, expected_set_information_with, make_quadrature, InformationTable};
use crate::selection::{CdInit, SelectionMethod, Selector};

/// Text for stdout plus an error to report after printing it.
#[derive(Debug)]
pub struct Output {
    pub stdout: String,
    pub failure: Option<Error>,
}

impl From<String> for Output {
    fn from(stdout: String) -> Self {
        Self { stdout, failure: None }
    }
}

/// A bank given as a CSV path or as `fixture:NAME`.
pub fn load_bank_source(source: &str) -> Result<ItemBank> {
    match source.strip_prefix("fixture:") {
        Some(name) => fixtures::by_name(name)
            .ok_or_else(|| Error::Usage(format!("unknown fixture `{name}` (figure2|synthetic34)"))),
        None => io::load_bank(source),
    }
}

/// Latent distribution flag and quadrature size shared by several commands.
#[derive(Debug, Clone)]
pub struct DistOptions {
    pub dist: String,
    pub nodes: usize,
}

impl Default for DistOptions {
    fn default() -> Self {
        Self {
            dist: "normal:0,1".into(),
            nodes: crate::population::DEFAULT_NODES,
        }
    }
}

impl DistOptions {
    fn table(&self, bank: &ItemBank) -> Result<InformationTable> {
        let dist = io::parse_distribution(&self.dist)?;
        InformationTable::from_distribution(bank, &dist, self.nodes)
    }
}

fn emit(output: &Option<PathBuf>, machine: &str, summary: String) -> Result<String> {
    match output {
        Some(path) => {
            fs::write(path, machine)?;
            Ok(summary)
        }
        None => Ok(machine.to_string()),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct RunReport<T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    inputs: serde_json::Value,
    seed: Option<u64>,
    results: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

impl<T: Serialize> RunReport<T> {
    fn new(command: &'static str, inputs: serde_json::Value, seed: Option<u64>, results: T) -> Self {
        Self {
            tool: "grmsel",
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            seed,
            results,
            elapsed_ms: None,
        }
    }

    fn timed(mut self, start: Option<Instant>) -> Self {
        self.elapsed_ms = start.map(|s| s.elapsed().as_secs_f64() * 1e3);
        self
    }
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::Usage(format!("{what} is randomized; pass --seed")))
}

// ---------------------------------------------------------------- bank

/// Load and validate a bank; list each item with its expected information.
pub fn bank_validate(source: &str, dist: &DistOptions) -> Result<Output> {
    let bank = load_bank_source(source)?;
    let table = dist.table(&bank)?;
    let mut out = String::from("item_id,a,thresholds,expected_info\n");
    for (i, it) in bank.items().iter().enumerate() {
        let b: Vec<String> = it.thresholds().iter().map(|&x| fmt_f64(x)).collect();
        writeln!(
            out,
            "{},{},{},{}",
            it.id(),
            fmt_f64(it.a()),
            b.join(";"),
            fmt_f64(table.expected_item_information(i))
        )
        .expect("write to string");
    }
    writeln!(out, "valid: {} items", bank.len()).expect("write to string");
    Ok(out.into())
}

// ---------------------------------------------------------------- info

#[derive(Debug, Clone)]
pub struct InfoOptions {
    pub bank: String,
    pub dist: DistOptions,
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub output: Option<PathBuf>,
}

impl InfoOptions {
    pub fn new(bank: impl Into<String>) -> Self {
        Self {
            bank: bank.into(),
            dist: DistOptions::default(),
            min: -6.0,
            max: 6.0,
            step: 0.01,
            output: None,
        }
    }
}

/// Grid from `min` to `max` with both endpoints included exactly. Interior
/// points are rounded to 1e-9 so decimal steps print cleanly.
pub fn theta_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite() && step > 0.0 && max > min) {
        return Err(Error::Usage(format!(
            "grid needs finite min < max and step > 0, got [{min}, {max}] step {step}"
        )));
    }
    let n = ((max - min) / step).round() as usize;
    if n == 0 || n > 10_000_000 {
        return Err(Error::Usage(format!("grid of {n} intervals is out of range")));
    }
    Ok((0..=n)
        .map(|i| match i {
            0 => min,
            _ if i == n => max,
            _ => ((min + i as f64 * step) * 1e9).round() / 1e9,
        })
        .collect())
}

/// Item information over a trait grid, one column per item, plus each
/// item's expected information.
pub fn info(opts: &InfoOptions) -> Result<Output> {
    let bank = load_bank_source(&opts.bank)?;
    let grid = theta_grid(opts.min, opts.max, opts.step)?;
    let mut csv = String::from("theta");
    for id in bank.ids() {
        csv.push(',');
        csv.push_str(id);
    }
    csv.push('\n');
    for &t in &grid {
        csv.push_str(&fmt_f64(t));
        for it in bank.items() {
            csv.push(',');
            csv.push_str(&fmt_f64(it.information(t)));
        }
        csv.push('\n');
    }
    let table = opts.dist.table(&bank)?;
    let mut summary = String::from("item_id,expected_info\n");
    for (i, id) in bank.ids().iter().enumerate() {
        writeln!(summary, "{id},{}", fmt_f64(table.expected_item_information(i))).expect("write to string");
    }
    Ok(emit(&opts.output, &csv, summary)?.into())
}

// ---------------------------------------------------------------- select

#[derive(Debug, Clone)]
pub struct SelectOptions {
    pub bank: String,
    pub dist: DistOptions,
    pub method: SelectionMethod,
    pub k: Vec<usize>,
    pub seed: Option<u64>,
    pub init: String,
    pub restarts: usize,
    pub reps: usize,
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl SelectOptions {
    pub fn new(bank: impl Into<String>, method: SelectionMethod, k: Vec<usize>) -> Self {
        Self {
            bank: bank.into(),
            dist: DistOptions::default(),
            method,
            k,
            seed: None,
            init: "rank".into(),
            restarts: 0,
            reps: crate::selection::DEFAULT_RANDOM_REPS,
            timing: false,
            output: None,
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum SelectResult {
    Subset(crate::selection::SubsetResult),
    Adaptive(crate::selection::AdaptiveResult),
    Random {
        k: usize,
        reps: usize,
        expected_sd_mean: f64,
        expected_sd_sd: f64,
    },
}

/// Select subsets of each requested size with one method and report them.
pub fn select(opts: &SelectOptions) -> Result<Output> {
    let start = opts.timing.then(Instant::now);
    if opts.k.is_empty() {
        return Err(Error::Usage("no subset size given".into()));
    }
    let bank = load_bank_source(&opts.bank)?;
    let selector = Selector::from_table(&bank, opts.dist.table(&bank)?);
    let init: CdInit = opts.init.parse()?;
    let randomized = match opts.method {
        SelectionMethod::Random => true,
        SelectionMethod::CoordinateDescent => init == CdInit::Random || opts.restarts > 0,
        _ => false,
    };
    let seed = if randomized {
        Some(require_seed(opts.seed, "this selection")?)
    } else {
        opts.seed
    };
    let random_curve = match opts.method {
        SelectionMethod::Random => Some(selector.random_baseline(opts.reps, seed.expect("checked"))?),
        _ => None,
    };
    let mut results = Vec::with_capacity(opts.k.len());
    let mut summary = String::new();
    for &k in &opts.k {
        let result = match opts.method {
            SelectionMethod::RankByExpectedInfo => SelectResult::Subset(selector.rank(k)?),
            SelectionMethod::CoordinateDescent if opts.restarts > 0 => SelectResult::Subset(
                selector.coordinate_descent_multistart(k, opts.restarts, seed.expect("checked"))?,
            ),
            SelectionMethod::CoordinateDescent => SelectResult::Subset(selector.coordinate_descent(k, &init, seed)?),
            SelectionMethod::Adaptive => SelectResult::Adaptive(selector.adaptive_expected_sd(k)?),
            SelectionMethod::Random => {
                if k == 0 || k > bank.len() {
                    return Err(Error::SubsetSize { k, n: bank.len() });
                }
                let curve = random_curve.as_ref().expect("computed above");
                SelectResult::Random {
                    k,
                    reps: curve.reps,
                    expected_sd_mean: curve.mean[k - 1],
                    expected_sd_sd: curve.sd[k - 1],
                }
            }
        };
        match &result {
            SelectResult::Subset(r) => writeln!(
                summary,
                "k={k} {}: expected_sd={} expected_info={} items={}",
                opts.method,
                fmt_f64(r.expected_sd),
                fmt_f64(r.expected_info),
                r.item_ids.join(",")
            ),
            SelectResult::Adaptive(r) => writeln!(summary, "k={k} adaptive: expected_sd={}", fmt_f64(r.expected_sd)),
            SelectResult::Random {
                expected_sd_mean,
                expected_sd_sd,
                reps,
                ..
            } => writeln!(
                summary,
                "k={k} random: mean expected_sd={} sd={} over {reps} repetitions",
                fmt_f64(*expected_sd_mean),
                fmt_f64(*expected_sd_sd)
            ),
        }
        .expect("write to string");
        results.push(result);
    }
    let inputs = json!({
        "bank": opts.bank,
        "bank_items": bank.len(),
        "dist": opts.dist.dist,
        "nodes": opts.dist.nodes,
        "method": opts.method.short_name(),
        "k": opts.k,
        "init": opts.init,
        "restarts": opts.restarts,
        "reps": opts.reps,
    });
    let report = RunReport::new("select", inputs, seed, results).timed(start);
    Ok(emit(&opts.output, &to_json(&report)?, summary)?.into())
}

// ---------------------------------------------------------------- curves

#[derive(Debug, Clone)]
pub struct CurvesOptions {
    pub bank: String,
    pub dist: DistOptions,
    pub methods: Vec<SelectionMethod>,
    pub reps: usize,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl CurvesOptions {
    pub fn new(bank: impl Into<String>, seed: u64) -> Self {
        Self {
            bank: bank.into(),
            dist: DistOptions::default(),
            methods: SelectionMethod::ALL.to_vec(),
            reps: crate::selection::DEFAULT_RANDOM_REPS,
            seed: Some(seed),
            output: None,
        }
    }
}

/// Subset sizes reported in the percentage table.
pub const TABLE_K: [usize; 3] = [5, 10, 20];

/// Expected SD for every subset size and method as CSV, plus a table of
/// percentage decreases against the random baseline.
pub fn curves(opts: &CurvesOptions) -> Result<Output> {
    let seed = require_seed(opts.seed, "the random baseline")?;
    let bank = load_bank_source(&opts.bank)?;
    let selector = Selector::from_table(&bank, opts.dist.table(&bank)?);
    let table = selector.comparison_curves(&opts.methods, opts.reps, seed)?;
    let compared: Vec<usize> = (0..table.methods.len())
        .filter(|&m| table.methods[m] != SelectionMethod::Random)
        .collect();

    let mut csv = String::from("k");
    for m in &table.methods {
        if *m != SelectionMethod::Random {
            write!(csv, ",{}_sd", m.short_name()).expect("write to string");
        }
    }
    csv.push_str(",random_mean,random_sd");
    for &m in &compared {
        write!(csv, ",{}_pct", table.methods[m].short_name()).expect("write to string");
    }
    csv.push('\n');
    for (row, k) in table.k.iter().enumerate() {
        write!(csv, "{k}").expect("write to string");
        for &m in &compared {
            write!(csv, ",{}", fmt_f64(table.expected_sd[m][row])).expect("write to string");
        }
        write!(
            csv,
            ",{},{}",
            fmt_f64(table.random.mean[row]),
            fmt_f64(table.random.sd[row])
        )
        .expect("write to string");
        for &m in &compared {
            write!(csv, ",{}", fmt_f64(table.pct_decrease_vs_random[m][row])).expect("write to string");
        }
        csv.push('\n');
    }

    let mut text = String::from("Decrease in expected SD vs random selection, percent\n");
    write!(text, "{:>8}", "# items").expect("write to string");
    for &m in &compared {
        write!(text, "{:>12}", table.methods[m].short_name()).expect("write to string");
    }
    text.push('\n');
    for k in TABLE_K.iter().filter(|&&k| k <= bank.len()) {
        write!(text, "{k:>8}").expect("write to string");
        for &m in &compared {
            write!(text, "{:>12.1}", table.pct_decrease_vs_random[m][k - 1]).expect("write to string");
        }
        text.push('\n');
    }
    match &opts.output {
        Some(path) => {
            fs::write(path, &csv)?;
            Ok(text.into())
        }
        None => Ok(format!("{csv}\n{text}").into()),
    }
}

// ---------------------------------------------------------------- simulate

/// Scenario file for `simulate`. Population values default to the fitted
/// longitudinal model; `bank` is a CSV path relative to the config file or
/// `fixture:NAME`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bank: String,
    pub n_subjects: usize,
    #[serde(default)]
    pub visits: Option<Vec<f64>>,
    #[serde(default)]
    pub schedule: Option<VisitSchedule>,
    #[serde(default)]
    pub beta0: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_var_u0")]
    pub var_u0: f64,
    #[serde(default = "default_var_u1")]
    pub var_u1: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_beta1() -> f64 {
    TrajectoryPrior::default().beta1
}
fn default_var_u0() -> f64 {
    TrajectoryPrior::default().var_u0
}
fn default_var_u1() -> f64 {
    TrajectoryPrior::default().var_u1
}
fn default_rho() -> f64 {
    TrajectoryPrior::default().rho
}

impl ScenarioConfig {
    pub fn scenario(&self, base_dir: &Path, seed: u64) -> Result<SimulationScenario> {
        let bank = if self.bank.starts_with("fixture:") {
            load_bank_source(&self.bank)?
        } else {
            io::load_bank(base_dir.join(&self.bank))?
        };
        let schedule = match (&self.visits, &self.schedule) {
            (Some(v), None) => VisitSchedule::Common(v.clone()),
            (None, Some(s)) => s.clone(),
            _ => {
                return Err(Error::InvalidScenario(
                    "give exactly one of `visits` and `schedule`".into(),
                ))
            }
        };
        Ok(SimulationScenario {
            bank,
            beta0: self.beta0,
            beta1: self.beta1,
            var_u0: self.var_u0,
            var_u1: self.var_u1,
            rho: self.rho,
            schedule,
            n_subjects: self.n_subjects,
            seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub effects: Option<PathBuf>,
}

/// Simulate a response panel from a scenario file.
pub fn simulate(opts: &SimulateOptions) -> Result<Output> {
    let seed = require_seed(opts.seed, "simulation")?;
    let config: ScenarioConfig = serde_json::from_str(&io::read_text(&opts.config)?)
        .map_err(|e| Error::InvalidScenario(format!("{}: {e}", opts.config.display())))?;
    let base = opts.config.parent().unwrap_or(Path::new("."));
    let scn = config.scenario(base, seed)?;
    let sim = simulate_longitudinal(&scn)?;
    if let Some(path) = &opts.effects {
        let mut csv = String::from("subject_id,u0,u1\n");
        for (id, u0, u1) in &sim.effects {
            writeln!(csv, "{id},{},{}", fmt_f64(*u0), fmt_f64(*u1)).expect("write to string");
        }
        fs::write(path, csv)?;
    }
    let zero = sim.panel.records.iter().filter(|r| r.level == 0).count();
    let summary = format!(
        "{} rows, {} subjects, level-0 share {:.3}\n",
        sim.panel.len(),
        scn.n_subjects,
        zero as f64 / sim.panel.len().max(1) as f64
    );
    Ok(emit(&opts.output, &io::panel_to_csv(&sim.panel), summary)?.into())
}

// ---------------------------------------------------------------- estimate

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringChoice {
    Map,
    Mle,
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub bank: String,
    pub responses: Option<PathBuf>,
    pub panel: Option<PathBuf>,
    pub method: ScoringChoice,
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub trajectory: bool,
    pub population: TrajectoryPrior,
    pub dedupe: bool,
    pub output: Option<PathBuf>,
}

impl EstimateOptions {
    pub fn new(bank: impl Into<String>) -> Self {
        Self {
            bank: bank.into(),
            responses: None,
            panel: None,
            method: ScoringChoice::Map,
            prior_mean: 0.0,
            prior_sd: 1.0,
            trajectory: false,
            population: TrajectoryPrior::default(),
            dedupe: false,
            output: None,
        }
    }
}

#[derive(Serialize)]
struct VisitScore {
    subject_id: String,
    time_years: f64,
    #[serde(flatten)]
    summary: PosteriorSummary,
}

#[derive(Serialize)]
struct SubjectTrajectory {
    subject_id: String,
    #[serde(flatten)]
    estimate: TrajectoryEstimate,
}

fn load_panel_for(path: &Path, bank: &ItemBank, dedupe: bool) -> Result<ResponsePanel> {
    let mut panel = io::load_panel(path)?;
    if dedupe {
        let dropped = panel.dedupe_worst();
        if dropped > 0 {
            log::info!("dropped {dropped} duplicate rows");
        }
    }
    panel.validate(bank)?;
    Ok(panel)
}

fn score(responses: &ResponseSet, bank: &ItemBank, opts: &EstimateOptions) -> Result<PosteriorSummary> {
    match opts.method {
        ScoringChoice::Mle => estimate_theta_mle(responses, bank),
        ScoringChoice::Map => estimate_theta_map(responses, bank, NormalPrior::new(opts.prior_mean, opts.prior_sd)?),
    }
}

/// Score one response set, every visit of a panel, or every subject's
/// trajectory.
pub fn estimate(opts: &EstimateOptions) -> Result<Output> {
    let bank = load_bank_source(&opts.bank)?;
    let method = match (opts.trajectory, opts.method) {
        (true, _) => "trajectory",
        (false, ScoringChoice::Map) => "map",
        (false, ScoringChoice::Mle) => "mle",
    };
    let mut inputs = json!({ "bank": opts.bank, "method": method });
    let mut summary = String::new();
    let results = match (&opts.responses, &opts.panel) {
        (Some(path), None) => {
            if opts.trajectory {
                return Err(Error::Usage("--trajectory needs --panel".into()));
            }
            let responses = io::parse_responses_csv(&io::read_text(path)?)?;
            inputs["responses"] = json!(path.display().to_string());
            let s = score(&responses, &bank, opts)?;
            writeln!(
                summary,
                "theta={} sd={} flag={:?}",
                fmt_f64(s.point_estimate),
                fmt_f64(s.sd),
                s.flag
            )
            .expect("write to string");
            serde_json::to_value(s)?
        }
        (None, Some(path)) => {
            let panel = load_panel_for(path, &bank, opts.dedupe)?;
            inputs["panel"] = json!(path.display().to_string());
            let subjects = panel.subjects(&bank)?;
            if opts.trajectory {
                opts.population.validate()?;
                inputs["population"] = serde_json::to_value(opts.population)?;
                let fits = crate::par::map_slice(&subjects, |s| {
                    let visits: Vec<(f64, ResponseSet)> = s
                        .visits
                        .iter()
                        .map(|v| {
                            let rs = v
                                .responses
                                .iter()
                                .map(|&(i, l)| (bank.items()[i].id().to_string(), l))
                                .collect();
                            (v.time, ResponseSet::new(rs))
                        })
                        .collect();
                    estimate_trajectory_map(&visits, &bank, &opts.population).map(|estimate| SubjectTrajectory {
                        subject_id: s.id.clone(),
                        estimate,
                    })
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
                let unconverged = fits.iter().filter(|f| !f.estimate.converged).count();
                writeln!(summary, "{} subjects, {unconverged} not converged", fits.len()).expect("write to string");
                serde_json::to_value(fits)?
            } else {
                let mut scores = Vec::new();
                for s in &subjects {
                    for v in &s.visits {
                        let rs = ResponseSet::new(
                            v.responses
                                .iter()
                                .map(|&(i, l)| (bank.items()[i].id().to_string(), l))
                                .collect(),
                        );
                        scores.push(VisitScore {
                            subject_id: s.id.clone(),
                            time_years: v.time,
                            summary: score(&rs, &bank, opts)?,
                        });
                    }
                }
                writeln!(summary, "{} visits scored", scores.len()).expect("write to string");
                serde_json::to_value(scores)?
            }
        }
        _ => return Err(Error::Usage("give exactly one of --responses and --panel".into())),
    };
    if opts.method == ScoringChoice::Map && !opts.trajectory {
        inputs["prior"] = json!({ "mean": opts.prior_mean, "sd": opts.prior_sd });
    }
    let report = RunReport::new("estimate", inputs, None, results);
    Ok(emit(&opts.output, &to_json(&report)?, summary)?.into())
}

// ---------------------------------------------------------------- calibrate

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
    Both,
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Stage::One),
            "2" => Ok(Stage::Two),
            "both" => Ok(Stage::Both),
            other => Err(Error::Usage(format!("unknown stage `{other}` (1|2|both)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrateOptions {
    pub panel: PathBuf,
    pub stage: Stage,
    /// First-stage bank; required for stage 2 alone.
    pub stage1_bank: Option<String>,
    /// Item layout for stage 1; inferred from the panel when absent.
    pub template: Option<String>,
    pub priors: Option<PathBuf>,
    pub dedupe: bool,
    pub output: Option<PathBuf>,
    pub bank_output: Option<PathBuf>,
}

impl CalibrateOptions {
    pub fn new(panel: impl Into<PathBuf>, stage: Stage) -> Self {
        Self {
            panel: panel.into(),
            stage,
            stage1_bank: None,
            template: None,
            priors: None,
            dedupe: false,
            output: None,
            bank_output: None,
        }
    }
}

#[derive(Serialize)]
struct CalibrationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    stage1: Option<calibration::Stage1Fit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage2: Option<calibration::FitResult>,
    ledger: ParameterLedger,
}

/// Two-stage calibration from a response panel.
pub fn calibrate(opts: &CalibrateOptions) -> Result<Output> {
    if opts.stage == Stage::Two && opts.stage1_bank.is_none() {
        return Err(Error::Usage("stage 2 needs the first-stage bank (--bank)".into()));
    }
    let priors: PriorSpec = match &opts.priors {
        Some(path) => serde_json::from_str(&io::read_text(path)?)
            .map_err(|e| Error::InvalidPrior(format!("{}: {e}", path.display())))?,
        None => default_priors(),
    };
    priors.validate()?;
    let mut panel = io::load_panel(&opts.panel)?;
    if opts.dedupe {
        panel.dedupe_worst();
    }

    let mut summary = String::new();
    let stage1 = if opts.stage == Stage::Two {
        None
    } else {
        let layout = match &opts.template {
            Some(src) => layout_of(&load_bank_source(src)?),
            None => layout_from_panel(&panel),
        };
        let fit = fit_grm_cross_sectional(&panel, &layout, &Stage1Config::default())?;
        writeln!(
            summary,
            "stage 1: {} items, {} subjects, log-likelihood {:.4}, {} EM iterations{}",
            fit.bank.len(),
            fit.subjects.len(),
            fit.loglik,
            fit.iterations,
            if fit.converged { "" } else { " (not converged)" }
        )
        .expect("write to string");
        Some(fit)
    };
    let stage2 = if opts.stage == Stage::One {
        None
    } else {
        let fixed = match (&stage1, &opts.stage1_bank) {
            (Some(fit), _) => fit.bank.clone(),
            (None, Some(src)) => load_bank_source(src)?,
            (None, None) => unreachable!("checked above"),
        };
        let fit = fit_longitudinal_map(&panel, &fixed, &priors, &Stage2Config::default())?;
        writeln!(
            summary,
            "stage 2: beta1 {:.4}, var_u1 {:.4}, rho {:.4}, {} sweeps{}",
            fit.beta1,
            fit.var_u1,
            fit.rho,
            fit.sweeps,
            if fit.converged { "" } else { " (not converged)" }
        )
        .expect("write to string");
        for w in &fit.warnings {
            writeln!(summary, "warning: {w}").expect("write to string");
        }
        Some(fit)
    };
    let bank = stage2
        .as_ref()
        .map(|f| &f.bank)
        .or(stage1.as_ref().map(|f| &f.bank))
        .expect("at least one stage ran");
    if let Some(path) = &opts.bank_output {
        fs::write(path, io::bank_to_csv(bank))?;
    }
    let thresholds: Vec<usize> = bank.items().iter().map(|it| it.max_level()).collect();
    let n_subjects = match (&stage2, &stage1) {
        (Some(f), _) => f.subjects.len(),
        (None, Some(f)) => f.subjects.len(),
        _ => 0,
    };
    let ledger = ParameterLedger::new(&thresholds, n_subjects);
    summary.push('\n');
    summary.push_str(&ledger.to_string());
    let report = CalibrationReport { stage1, stage2, ledger };
    Ok(emit(&opts.output, &to_json(&report)?, summary)?.into())
}

// ---------------------------------------------------------------- example

/// Reference values for the two figure2 item sets and the tolerance they are
/// checked against.
pub const FIGURE2_REFERENCE: [(&str, f64); 4] = [
    ("set 1 expected information", 4.07),
    ("set 2 expected information", 2.87),
    ("set 1 expected SD", 0.77),
    ("set 2 expected SD", 0.64),
];
pub const FIGURE2_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Serialize)]
pub struct Figure2Row {
    pub quantity: &'static str,
    pub reference: f64,
    pub computed: f64,
    pub pass: bool,
}

/// Expected information and SD of the two figure2 item sets.
pub fn figure2_values(nodes: usize) -> Result<Vec<Figure2Row>> {
    let bank = fixtures::figure2_bank();
    let rule = make_quadrature(&crate::population::LatentDistribution::standard_normal(), nodes)?;
    let set = |ids: &[&str]| -> Vec<crate::grm::ItemParams> {
        ids.iter()
            .map(|id| bank.items()[bank.index_of(id).expect("fixture id")].clone())
            .collect()
    };
    let s1 = set(&fixtures::FIGURE2_SET1);
    let s2 = set(&fixtures::FIGURE2_SET2);
    let computed = [
        expected_set_information_with(&s1, &rule),
        expected_set_information_with(&s2, &rule),
        expected_sd_with(&s1, &rule)?,
        expected_sd_with(&s2, &rule)?,
    ];
    Ok(FIGURE2_REFERENCE
        .iter()
        .zip(computed)
        .map(|(&(quantity, reference), computed)| Figure2Row {
            quantity,
            reference,
            computed,
            pass: (computed - reference).abs() <= FIGURE2_TOLERANCE,
        })
        .collect())
}

/// Plot data for the figure2 bank: item information, set
/// information, and set conditional SD over a trait grid.
pub fn figure2_plot_csv() -> Result<String> {
    let bank = fixtures::figure2_bank();
    let set = |ids: &[&str]| -> Vec<crate::grm::ItemParams> {
        ids.iter()
            .map(|id| bank.items()[bank.index_of(id).expect("fixture id")].clone())
            .collect()
    };
    let s1 = set(&fixtures::FIGURE2_SET1);
    let s2 = set(&fixtures::FIGURE2_SET2);
    let mut csv = String::from("theta");
    for id in bank.ids() {
        write!(csv, ",{id}").expect("write to string");
    }
    csv.push_str(",set1_info,set2_info,set1_sd,set2_sd\n");
    for t in theta_grid(-4.0, 4.0, 0.01)? {
        csv.push_str(&fmt_f64(t));
        for it in bank.items() {
            write!(csv, ",{}", fmt_f64(it.information(t))).expect("write to string");
        }
        writeln!(
            csv,
            ",{},{},{},{}",
            fmt_f64(set_information(&s1, t)),
            fmt_f64(set_information(&s2, t)),
            fmt_f64(conditional_sd(&s1, t)?),
            fmt_f64(conditional_sd(&s2, t)?)
        )
        .expect("write to string");
    }
    Ok(csv)
}

#[derive(Debug, Clone)]
pub struct ExampleOptions {
    pub nodes: usize,
    pub json: bool,
    pub plot_data: Option<PathBuf>,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        Self {
            nodes: crate::population::DEFAULT_NODES,
            json: false,
            plot_data: None,
        }
    }
}

/// Print the figure2 comparison; fails when any value is outside the
/// tolerance.
pub fn example_fig2(opts: &ExampleOptions) -> Result<Output> {
    let rows = figure2_values(opts.nodes)?;
    if let Some(path) = &opts.plot_data {
        fs::write(path, figure2_plot_csv()?)?;
    }
    let stdout = if opts.json {
        to_json(&json!({
            "nodes": opts.nodes,
            "tolerance": FIGURE2_TOLERANCE,
            "rows": rows,
        }))?
    } else {
        let mut s = format!(
            "figure2 fixture: 7 items, a = 2.5, Normal(0, 1), {} quadrature nodes\n",
            opts.nodes
        );
        writeln!(
            s,
            "{:<28}{:>10}{:>12}{:>8}",
            "quantity", "reference", "computed", "check"
        )
        .expect("write to string");
        for r in &rows {
            writeln!(
                s,
                "{:<28}{:>10.2}{:>12.4}{:>8}",
                r.quantity,
                r.reference,
                r.computed,
                if r.pass { "ok" } else { "FAIL" }
            )
            .expect("write to string");
        }
        s
    };
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.quantity).collect();
    let failure = (!failed.is_empty()).then(|| {
        Error::Numerical(format!(
            "outside ±{FIGURE2_TOLERANCE} of the reference value: {}",
            failed.join(", ")
        ))
    });
    Ok(Output { stdout, failure })
}
