use grmsel_core::calibration::{
    default_priors, fit_grm_cross_sectional, fit_longitudinal_map, layout_of, simulate_longitudinal, ParameterLedger,
    SimulationScenario, Stage1Config, Stage2Config, VisitSchedule,
};
use grmsel_core::fixtures::synthetic34_bank;
use grmsel_core::{ItemBank, ItemParams, PanelRecord, ResponsePanel};

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
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn stage_one_recovers_a_known_bank() {
    let truth = known_bank();
    for seed in 1..=5 {
        let scn = SimulationScenario::with_defaults(truth.clone(), VisitSchedule::annual(1), 2000, seed);
        let sim = simulate_longitudinal(&scn).unwrap();
        let fit = fit_grm_cross_sectional(&sim.panel, &layout_of(&truth), &Stage1Config::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
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
        println!(
            "seed {seed}: r(a) = {r:.4}, threshold MAE = {mae:.4}, iterations = {}",
            fit.iterations
        );
        assert!(r >= 0.95 && mae <= 0.15);
    }
}

#[test]
fn stage_two_recovers_the_mean_slope() {
    let full = synthetic34_bank();
    let truth = ItemBank::new(full.items()[..15].to_vec()).unwrap();
    for seed in 1..=5 {
        let scn = SimulationScenario::with_defaults(truth.clone(), VisitSchedule::annual(6), 500, seed);
        let sim = simulate_longitudinal(&scn).unwrap();
        let stage1 = fit_grm_cross_sectional(&sim.panel, &layout_of(&truth), &Stage1Config::default()).unwrap();
        let fit = fit_longitudinal_map(&sim.panel, &stage1.bank, &default_priors(), &Stage2Config::default()).unwrap();
        println!(
            "seed {seed}: beta1 = {:.4}, var_u1 = {:.4}, rho = {:.3}, sweeps = {}, converged = {}, grad = {:.2e}",
            fit.beta1, fit.var_u1, fit.rho, fit.sweeps, fit.converged, fit.grad_norm
        );
        assert!(fit.objective_trace.windows(2).all(|w| w[1] >= w[0]));
        assert!((fit.beta1 - 0.075).abs() <= 0.02);
    }
}

#[test]
fn ledger_follows_the_stage_split() {
    let ledger = ParameterLedger::new(&[4; 34], 4283);
    assert_eq!(ledger.total.n, 8741);
    assert_eq!(ledger.total.fixed, 2);
    assert_eq!(ledger.total.estimated, 8739);
    assert_eq!(ledger.total.stage1, 102);
    assert_eq!(ledger.total.stage2, 8637);
    let small = ParameterLedger::new(&[1, 2, 4], 10);
    // Two-level items have nothing left for the second stage.
    assert_eq!(small.total.stage1, 3 + 1 + 2 + 2);
    assert_eq!(small.total.stage2, 3 + 2 + 2 * 10);
}

#[test]
fn uninformative_panel_still_yields_a_finite_monotone_fit() {
    let bank = ItemBank::new(synthetic34_bank().items()[..5].to_vec()).unwrap();
    let mut records = Vec::new();
    for s in 0..30 {
        for t in 0..3 {
            for it in bank.items() {
                records.push(PanelRecord {
                    subject_id: format!("s{s:02}"),
                    time_years: t as f64,
                    item_id: it.id().to_string(),
                    level: 0,
                });
            }
        }
    }
    let panel = ResponsePanel::new(records);
    let fit = fit_longitudinal_map(&panel, &bank, &default_priors(), &Stage2Config::default()).unwrap();
    assert!(fit.beta1.is_finite() && fit.var_u1.is_finite() && fit.objective.is_finite());
    assert!(fit.objective_trace.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(fit.subjects.len(), 30);
}

#[test]
fn bad_inputs_are_rejected() {
    let bank = synthetic34_bank();
    let empty = ResponsePanel::new(vec![]);
    assert!(fit_longitudinal_map(&empty, &bank, &default_priors(), &Stage2Config::default()).is_err());
    let mut priors = default_priors();
    priors.slope_variance.lower = 0.0;
    assert!(priors.validate().is_err());
    let one = ResponsePanel::new(vec![PanelRecord {
        subject_id: "s".into(),
        time_years: 0.0,
        item_id: "item01".into(),
        level: 0,
    }]);
    let layout = vec![("item01".to_string(), 4)];
    assert!(fit_grm_cross_sectional(&one, &layout, &Stage1Config::default()).is_err());
}
