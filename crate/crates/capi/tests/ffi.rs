//! Exercises the C entry points the way a foreign caller would: through the
//! exported symbols, with raw pointers and status codes.

use std::ffi::CString;

use bdris_capi::*;

fn last_error_string() -> String {
    let needed = bdris_last_error(std::ptr::null_mut(), 0);
    let mut buf = vec![0i8; needed + 1];
    bdris_last_error(buf.as_mut_ptr() as *mut _, buf.len());
    let bytes: Vec<u8> = buf[..needed].iter().map(|&b| b as u8).collect();
    String::from_utf8(bytes).expect("error message is UTF-8")
}

#[test]
fn scenario_lifecycle_and_setters() {
    unsafe {
        let sc = bdris_scenario_new_default();
        assert!(!sc.is_null());
        assert_eq!(bdris_scenario_set_m(sc, 12), BDRIS_OK);
        assert_eq!(bdris_scenario_set_pt_dbm(sc, 10.0), BDRIS_OK);
        assert_eq!(bdris_scenario_set_position(sc, 25.0, 25.0, 5.0), BDRIS_OK);
        assert_eq!(bdris_scenario_set_seed(sc, 7), BDRIS_OK);
        assert_eq!(bdris_scenario_set_m(sc, 0), BDRIS_ERR_ARG);
        assert_eq!(bdris_scenario_set_pt_dbm(sc, f64::INFINITY), BDRIS_ERR_ARG);
        bdris_scenario_free(sc);
        bdris_scenario_free(std::ptr::null_mut());
    }
    unsafe {
        assert_eq!(bdris_scenario_set_m(std::ptr::null_mut(), 4), BDRIS_ERR_ARG);
    }
}

#[test]
fn toml_parsing_accepts_good_and_rejects_bad() {
    let good = CString::new("k = 3\nnt = 2\nnr = 2\nd = 1\nm = 8\nseed = 3\n").unwrap();
    let bad_syntax = CString::new("k = [[[").unwrap();
    let bad_values = CString::new("k = 1\nnt = 2\nnr = 2\nd = 1\nm = 8\n").unwrap();
    unsafe {
        let sc = bdris_scenario_from_toml(good.as_ptr());
        assert!(!sc.is_null());
        bdris_scenario_free(sc);

        assert!(bdris_scenario_from_toml(bad_syntax.as_ptr()).is_null());
        assert!(last_error_string().contains("parse"));

        assert!(bdris_scenario_from_toml(bad_values.as_ptr()).is_null());
        assert!(last_error_string().contains("2 users"));

        assert!(bdris_scenario_from_toml(std::ptr::null()).is_null());
    }
}

#[test]
fn scalar_helpers_match_core() {
    let pl = bdris_path_loss_db(50.0, 2.0);
    let expect = bdris_core::channel::path_loss_db(50.0, 2.0).unwrap();
    assert!((pl - expect).abs() < 1e-12);
    assert!(bdris_path_loss_db(0.0, 2.0).is_nan());

    let np = bdris_noise_power_dbm(40e6, 10.0);
    let expect = bdris_core::channel::noise_power_dbm(40e6, 10.0).unwrap();
    assert!((np - expect).abs() < 1e-12);
    assert!(bdris_noise_power_dbm(-1.0, 10.0).is_nan());
}

#[test]
fn run_trial_validates_arguments() {
    unsafe {
        let sc = bdris_scenario_new_default();
        let mut out = BdrisTrialMetrics { il: 0.0, delta_inr_db: 0.0, sum_rate: 0.0, iters_stage1: 0 };
        assert_eq!(
            bdris_run_trial(std::ptr::null(), 0, BDRIS_STAGE1_DIAG, 0, BDRIS_STAGE2_SVD, &mut out),
            BDRIS_ERR_ARG
        );
        assert_eq!(
            bdris_run_trial(sc, 0, BDRIS_STAGE1_DIAG, 0, BDRIS_STAGE2_SVD, std::ptr::null_mut()),
            BDRIS_ERR_ARG
        );
        assert_eq!(bdris_run_trial(sc, 0, 99, 0, BDRIS_STAGE2_SVD, &mut out), BDRIS_ERR_ARG);
        assert_eq!(bdris_run_trial(sc, 0, BDRIS_STAGE1_DIAG, 0, 99, &mut out), BDRIS_ERR_ARG);
        assert_eq!(
            bdris_run_trial(sc, 0, BDRIS_STAGE1_GROUP, 0, BDRIS_STAGE2_SVD, &mut out),
            BDRIS_ERR_ARG
        );
        // 7 does not divide the default m = 40
        assert_eq!(
            bdris_run_trial(sc, 0, BDRIS_STAGE1_GROUP, 7, BDRIS_STAGE2_SVD, &mut out),
            BDRIS_ERR_ARG
        );
        bdris_scenario_free(sc);
    }
}

#[test]
fn run_trial_produces_reproducible_metrics() {
    unsafe {
        let sc = bdris_scenario_new_default();
        assert_eq!(bdris_scenario_set_m(sc, 12), BDRIS_OK);
        assert_eq!(bdris_scenario_set_seed(sc, 11), BDRIS_OK);
        let mut a = BdrisTrialMetrics { il: 0.0, delta_inr_db: 0.0, sum_rate: 0.0, iters_stage1: 0 };
        let mut b = a;
        let code = bdris_run_trial(sc, 2, BDRIS_STAGE1_DIAG, 0, BDRIS_STAGE2_SVD, &mut a);
        assert_eq!(code, BDRIS_OK, "{}", last_error_string());
        assert_eq!(
            bdris_run_trial(sc, 2, BDRIS_STAGE1_DIAG, 0, BDRIS_STAGE2_SVD, &mut b),
            BDRIS_OK
        );
        assert!(a.il.is_finite() && a.il > 0.0);
        assert!(a.sum_rate.is_finite() && a.sum_rate > 0.0);
        assert!(a.delta_inr_db.is_finite());
        assert!(a.iters_stage1 >= 1);
        // identical trial index, identical stream, identical metrics
        assert_eq!(a.il.to_bits(), b.il.to_bits());
        assert_eq!(a.sum_rate.to_bits(), b.sum_rate.to_bits());
        assert_eq!(a.delta_inr_db.to_bits(), b.delta_inr_db.to_bits());

        // a different trial index moves the channel draw
        let mut c = a;
        assert_eq!(
            bdris_run_trial(sc, 3, BDRIS_STAGE1_DIAG, 0, BDRIS_STAGE2_SVD, &mut c),
            BDRIS_OK
        );
        assert_ne!(a.il.to_bits(), c.il.to_bits());
        bdris_scenario_free(sc);
    }
}

#[test]
fn run_trial_matches_direct_library_call() {
    use bdris_core::channel::ScenarioConfig;
    use bdris_core::linalg::derive_seed;
    use bdris_core::runner::{run_trial, Stage1Choice, Stage2Choice};

    let mut cfg = ScenarioConfig::default();
    cfg.m = 10;
    cfg.seed = 5;
    let seed = derive_seed(&[cfg.seed, 0, 1]);
    let (expected, iters, _, _) =
        run_trial(&cfg, Stage1Choice::Rtp, Stage2Choice::Svd, seed, 1).expect("direct trial");

    unsafe {
        let sc = bdris_scenario_new_default();
        assert_eq!(bdris_scenario_set_m(sc, 10), BDRIS_OK);
        assert_eq!(bdris_scenario_set_seed(sc, 5), BDRIS_OK);
        let mut out = BdrisTrialMetrics { il: 0.0, delta_inr_db: 0.0, sum_rate: 0.0, iters_stage1: 0 };
        assert_eq!(bdris_run_trial(sc, 1, BDRIS_STAGE1_RTP, 0, BDRIS_STAGE2_SVD, &mut out), BDRIS_OK);
        assert_eq!(out.il.to_bits(), expected.il.to_bits());
        assert_eq!(out.sum_rate.to_bits(), expected.sum_rate.to_bits());
        assert_eq!(out.iters_stage1 as usize, iters);
        bdris_scenario_free(sc);
    }
}

#[test]
fn generated_header_covers_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/bdris.h");
    let text = std::fs::read_to_string(&header).expect("header generated at build time");
    for needle in [
        "BdrisScenario",
        "BdrisTrialMetrics",
        "bdris_scenario_new_default",
        "bdris_scenario_from_toml",
        "bdris_scenario_free",
        "bdris_run_trial",
        "bdris_last_error",
        "BDRIS_ERR_NUMERICAL",
    ] {
        assert!(text.contains(needle), "header is missing {}", needle);
    }
}
