use std::fs::File;
use std::path::Path;

use cdgarch::config::SchemeChoice;
use cdgarch::*;

fn reference_config() -> Config {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    Config::from_path(&path).unwrap()
}

#[test]
fn shipped_reference_config() {
    let cfg = reference_config();
    assert_eq!(cfg.run.scheme, SchemeChoice::Events);
    let model = cfg.model().unwrap();
    // f(u) = w (e^{lambda u} - e^{-lambda p}) has L1 norm w ((1 - e^{-lambda p}) / lambda - p e^{-lambda p})
    let l1 = |w: f64, l: f64, p: f64| w * ((1.0 - (-l * p).exp()) / l - p * (-l * p).exp());
    let f_l1 = l1(1.0, 2.0, 1.0) + l1(0.5, 1.0, 0.5);
    let m = 1.0 / (3.0 - 0.5 - f_l1);
    assert!((stationary_mean(&model).unwrap() - m).abs() < 1e-14);
    assert!((positivity_floor(&model).unwrap() - 1.0 / (3.0 - l1(1.0, 2.0, 1.0))).abs() < 1e-14);
    assert_eq!(cfg.history(&model).unwrap().value(-0.25), stationary_mean(&model).unwrap());
}

#[test]
fn jump_log_round_trip_reproduces_the_path() {
    let model = reference_config().model().unwrap();
    let log = sample_jump_events(&model.noise, (-model.r(), 10.0), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("jumps.csv");
    log.write_csv(File::create(&file).unwrap()).unwrap();
    let back = JumpLog::read_csv(File::open(&file).unwrap(), log.horizon).unwrap();
    assert_eq!(back, log);

    let phi = HistorySegment::constant(model.r(), 0.5).unwrap();
    let opts = EventOptions::new(0.01, 0.05).unwrap();
    let a = event_simulate(&model, &log, &phi, 0.0, &opts).unwrap();
    let b = event_simulate(&model, &back, &phi, 0.0, &opts).unwrap();
    assert_eq!(a, b);

    let mut out = Vec::new();
    a.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let jumps_in_window = log.times.iter().filter(|&&t| t > 0.0 && t <= 10.0).count();
    assert_eq!(text.lines().filter(|l| l.ends_with(",1")).count(), jumps_in_window);
}

#[test]
fn euler_and_event_ensembles_agree_in_mean() {
    let model = reference_config().model().unwrap();
    let m = stationary_mean(&model).unwrap();
    let phi = HistorySegment::constant(model.r(), m).unwrap();
    let events = event_ensemble(&model, &phi, 10.0, 300, 1, &EventOptions::new(0.02, 0.05).unwrap()).unwrap();
    let euler = euler_ensemble(&model, &phi, 0.01, 10.0, 300, 2).unwrap();
    let (a, sa) = ensemble_mean(&events, 10.0).unwrap();
    let (b, sb) = ensemble_mean(&euler, 10.0).unwrap();
    assert!((a - b).abs() < 4.0 * (sa * sa + sb * sb).sqrt(), "{a} +- {sa} vs {b} +- {sb}");
}

#[test]
fn cross_path_covariance_decays() {
    let model = reference_config().model().unwrap();
    let m = stationary_mean(&model).unwrap();
    let phi = HistorySegment::constant(model.r(), m).unwrap();
    let paths = event_ensemble(&model, &phi, 12.0, 400, 9, &EventOptions::new(0.02, 0.05).unwrap()).unwrap();
    let rows = weak_dependence_check(&paths, 5.0, &[0.05, 1.0, 5.0]).unwrap();
    assert!(rows[0].cov > 0.0);
    assert!(rows[2].cov.abs() < rows[0].cov / 4.0, "{rows:?}");
    assert!(rows[2].cov.abs() < 4.0 * rows[2].std_error + 1e-3);
}
