use llr::adaptive::{gensg_step, sgag_step, sgsg_step, svrgag_step, GenState, HessianMode, HyperRate, HyperSpace, LlrSchedules, LlrState, SgMap, SvrgLlrState, TangentUpdate};
use llr::harness::{fmt_f64, sweep, Algorithm, ExperimentConfig};
use llr::models::{LossStream, ModelKind, ParamVector};
use proptest::prelude::*;

fn scalar_model() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(ModelKind::gaussian()), Just(ModelKind::bernoulli()), (0.1f64..5.0).prop_map(ModelKind::quadratic)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn normalizer_stays_in_unit_interval(model in scalar_model(), seed in 0u64..1000, log_eta in -8.0f64..1.0) {
        let stream = LossStream::generate(model.clone(), seed, 200).unwrap();
        let schedules = LlrSchedules::default();
        let mut s = LlrState::new(model.default_theta0(), log_eta.exp()).unwrap();
        let mut v = SvrgLlrState::new(model.default_theta0(), log_eta.exp()).unwrap();
        for _ in 0..200 {
            s = sgag_step(&s, &stream, &schedules, TangentUpdate::default()).unwrap();
            v = svrgag_step(&v, &stream, &schedules, TangentUpdate::default()).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.d) && s.n >= 0.0);
            prop_assert!((0.0..=1.0).contains(&v.d) && v.n >= 0.0);
        }
    }

    #[test]
    fn generic_update_reproduces_sgsg(model in scalar_model(), seed in 0u64..1000, log_eta in -6.0f64..0.0) {
        let stream = LossStream::generate(model.clone(), seed, 100).unwrap();
        let schedules = LlrSchedules::default();
        let map = SgMap::default();
        let mut a = LlrState::new(model.default_theta0(), log_eta.exp()).unwrap();
        let mut b = GenState::new(model.default_theta0(), log_eta.exp(), HyperSpace::Log).unwrap();
        for _ in 0..100 {
            a = sgsg_step(&a, &stream, &schedules, HessianMode::Exact.into()).unwrap();
            b = gensg_step(&b, &map, &stream, &HyperRate::default(), HyperSpace::Log).unwrap();
            prop_assert_eq!(&a.theta, &b.theta);
            prop_assert_eq!(&a.h, &b.h);
            prop_assert_eq!(a.log_eta, b.hyper);
        }
    }

    #[test]
    fn sweep_shares_the_stream_and_schema(seed in 0u64..1000, grid in prop::collection::vec(1e-4f64..20.0, 1..3)) {
        let mut c = ExperimentConfig::new(ModelKind::bernoulli());
        c.seed = seed;
        c.horizon = 150;
        c.algorithms = Algorithm::ALL.to_vec();
        c.eta_grid = grid.clone();
        let (_, base, traces) = sweep(&c).unwrap();
        prop_assert_eq!(traces.len(), Algorithm::ALL.len() * grid.len());
        for tr in &traces {
            prop_assert_eq!(tr.records.len(), 150);
            let ml: Vec<f64> = tr.records.iter().map(|r| r.ml_loss).collect();
            prop_assert_eq!(&ml, &base.losses);
            if let Some(d) = tr.diverged_at {
                prop_assert!(tr.records[d..].iter().all(|r| r.diverged && r.theta.is_none()));
            }
        }
    }

    #[test]
    fn divergence_never_advances_time(eta_exp in 250.0f64..300.0) {
        let stream = llr::models::quadratic_stream(1e8, 20).unwrap();
        let schedules = LlrSchedules::default();
        let mut s = LlrState::new(ParamVector::from_element(1, 1.0), 10f64.powf(eta_exp)).unwrap();
        for _ in 0..20 {
            s = sgsg_step(&s, &stream, &schedules, TangentUpdate::default()).unwrap();
        }
        let at = s.diverged_at.expect("diverges");
        prop_assert_eq!(s.t, at);
        prop_assert!(s.theta.iter().all(|v| v.is_finite()));
    }
}
