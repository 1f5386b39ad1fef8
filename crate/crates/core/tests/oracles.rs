use llr::adaptive::{sgsg_step, HessianMode, LlrSchedules, LlrState, Memory, TangentUpdate};
use llr::models::{LossStream, ModelKind};
use llr::oracles::{certify, exact_a, fd_hypergrad, pathwise_h_discounted, relative_error, write_certification_csv, CertifyConfig};
use llr::schedules::RateSchedule;

#[test]
fn discounted_tangent_matches_the_sensitivity_sum() {
    let schedules = LlrSchedules::default();
    for model in [ModelKind::gaussian(), ModelKind::bernoulli(), ModelKind::regression()] {
        let stream = LossStream::generate(model.clone(), 2, 120).unwrap();
        let memory = Memory::from_tau(7.0).unwrap();
        let strategy = TangentUpdate::Discounted { memory, hessian: HessianMode::Exact };
        let mut state = LlrState::new(model.default_theta0(), 1e-2).unwrap();
        let mut applied = Vec::new();
        for t in 1..=120 {
            state = sgsg_step(&state, &stream, &schedules, strategy).unwrap();
            applied.push(state.eta());
            if t % 20 == 0 {
                let oracle = pathwise_h_discounted(&applied, memory.gamma(), &stream, &schedules.rate, &model.default_theta0(), t).unwrap();
                assert!(!oracle.diverged);
                assert_eq!(oracle.theta, state.theta);
                let err = relative_error(&oracle.value, &state.h);
                assert!(err <= 1e-10, "{} t = {t}: {err}", model.name());
            }
        }
    }
}

#[test]
fn finite_differences_converge_at_second_order() {
    let stream = LossStream::generate(ModelKind::bernoulli(), 1, 100).unwrap();
    let f = RateSchedule::SqrtLog;
    let theta0 = ModelKind::bernoulli().default_theta0();
    let exact = exact_a(0.5, &stream, &f, &theta0, 100).unwrap().value;
    let coarse = relative_error(&exact, &fd_hypergrad(0.5, &stream, &f, &theta0, 100, 1e-3).unwrap().value);
    let fine = relative_error(&exact, &fd_hypergrad(0.5, &stream, &f, &theta0, 100, 5e-4).unwrap().value);
    let ratio = coarse / fine;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn certification_report_layout() {
    let config = CertifyConfig { models: vec![ModelKind::gaussian()], etas: vec![0.1], times: vec![5, 10], ..CertifyConfig::default() };
    let rows = certify(&config).unwrap();
    assert_eq!(rows.len(), 2);
    let mut out = Vec::new();
    write_certification_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "model,eta,t,norm_exact_a,rel_err_fd,rel_err_pathwise,diverged");
    assert!(lines.all(|l| l.starts_with("gaussian,") && l.ends_with(",0")));
}

#[test]
fn certification_rejects_excessive_times() {
    let config = CertifyConfig { times: vec![5000], ..CertifyConfig::default() };
    assert!(certify(&config).is_err());
}
