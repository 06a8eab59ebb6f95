use grmsel_core::fixtures::{figure2_bank, synthetic34_bank, SYNTHETIC34_CSV};
use grmsel_core::io::{
    bank_to_csv, panel_to_csv, parse_bank_csv, parse_distribution, parse_panel_csv, parse_responses_csv,
};
use grmsel_core::population::LatentDistribution;
use grmsel_core::ErrorClass;

#[test]
fn bank_round_trip_is_exact() {
    for bank in [figure2_bank(), synthetic34_bank()] {
        let text = bank_to_csv(&bank);
        let again = parse_bank_csv(&text).unwrap();
        assert_eq!(bank, again);
        assert_eq!(text, bank_to_csv(&again));
    }
    assert!(SYNTHETIC34_CSV.starts_with("item_id,a,b1"));
}

#[test]
fn ragged_banks_use_trailing_blanks() {
    let bank = parse_bank_csv("item_id,a,b1,b2,b3\nx,1.2,-1,0,1\ny,0.8,0.5,,\n").unwrap();
    assert_eq!(bank.items()[1].thresholds(), &[0.5]);
    let text = bank_to_csv(&bank);
    assert_eq!(parse_bank_csv(&text).unwrap(), bank);
}

#[test]
fn bank_errors_name_the_problem() {
    let err = parse_bank_csv("item_id,a,b1,b2\nx,1.0,0.5,0.2\n").unwrap_err();
    assert!(
        err.to_string().contains("x") && err.to_string().contains("row 2"),
        "{err}"
    );
    assert_eq!(err.class(), ErrorClass::Validation);
    assert!(parse_bank_csv("").is_err());
    assert!(parse_bank_csv("item_id,a,b1\nx,-1,0\n").is_err());
    assert!(parse_bank_csv("item_id,a,b1\nx,abc,0\n")
        .unwrap_err()
        .to_string()
        .contains("row 2"));
    assert!(parse_bank_csv("item_id,a,b1\nx,1,0\nx,1,0\n").is_err());
    assert!(parse_bank_csv("id,a,b1\nx,1,0\n").is_err());
    assert!(parse_bank_csv("item_id,a,b1,b2\nx,1,,0\n").is_err());
}

#[test]
fn panel_round_trip_and_duplicates() {
    let text = "subject_id,time_years,item_id,level\ns1,0.0,item1,1\ns1,1.5,item1,0\ns2,0.0,item2,1\n";
    let panel = parse_panel_csv(text).unwrap();
    assert_eq!(panel_to_csv(&panel), text);
    panel.validate(&figure2_bank()).unwrap();

    let dup = "subject_id,time_years,item_id,level\ns1,0,item1,1\ns1,0,item1,0\n";
    let mut panel = parse_panel_csv(dup).unwrap();
    let err = panel.validate(&figure2_bank()).unwrap_err().to_string();
    assert!(err.contains("duplicate") && err.contains("row 3"), "{err}");
    assert_eq!(panel.dedupe_worst(), 1);
    panel.validate(&figure2_bank()).unwrap();
    assert_eq!(panel.records[0].level, 1);

    let bad_level = parse_panel_csv("subject_id,time_years,item_id,level\ns1,0,item1,2\n").unwrap();
    assert!(bad_level.validate(&figure2_bank()).is_err());
    let unknown = parse_panel_csv("subject_id,time_years,item_id,level\ns1,0,zzz,0\n").unwrap();
    assert!(unknown.validate(&figure2_bank()).is_err());
}

#[test]
fn responses_and_distributions() {
    let r = parse_responses_csv("item_id,level\nitem1,1\nitem4,0\n").unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(
        parse_distribution("normal:0.5,2").unwrap(),
        LatentDistribution::Normal { mean: 0.5, sd: 2.0 }
    );
    assert!(parse_distribution("normal:0,-1").is_err());
    assert!(parse_distribution("cauchy:0,1").is_err());
}

#[test]
fn negative_zero_time_is_the_first_visit() {
    let panel = parse_panel_csv("subject_id,time_years,item_id,level\ns1,1,item1,1\ns1,-0,item4,0\n").unwrap();
    let subjects = panel.subjects(&figure2_bank()).unwrap();
    assert_eq!(subjects[0].visits.len(), 2);
    assert_eq!(subjects[0].visits[0].time, 0.0);
}
