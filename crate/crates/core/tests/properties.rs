use proptest::prelude::*;

use msc::climb::Schedule;
use msc::expcli::{Experiment, ExperimentConfig, SplitSpec};
use msc::numkit::{log_sum_exp, normalize_log_weights};

proptest! {
    #[test]
    fn log_sum_exp_commutes_with_shifts(
        v in prop::collection::vec(-300.0f64..300.0, 1..30),
        c in -1e3f64..1e3,
    ) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let a = log_sum_exp(&shifted).unwrap();
        let b = log_sum_exp(&v).unwrap() + c;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn normalized_weights_sum_to_one(v in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let p = normalize_log_weights(&v).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let i = v.iter().position(|&x| x == mx).unwrap();
        prop_assert!(p.iter().all(|&x| x <= p[i]));
    }

    #[test]
    fn config_survives_a_round_trip(
        samples in 1usize..1000,
        iters in 1usize..1_000_000,
        seed in any::<u64>(),
        tail in 0.01f64..1.0,
        lr in 1e-6f64..1.0,
    ) {
        let mut c = ExperimentConfig::new(Experiment::SkewNormal);
        c.samples = samples;
        c.iters = iters;
        c.seed = seed;
        c.tail = tail;
        c.schedule = Schedule::adam(lr);
        let back = ExperimentConfig::parse_kv(&c.to_kv_string()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn schedules_print_and_parse_back(a in 1e-9f64..10.0, b in 0.0f64..100.0, g in 0.5f64..1.0) {
        let s = Schedule::robbins_monro(a, b, g);
        prop_assert_eq!(s.to_string().parse::<Schedule>().unwrap(), s);
    }

    #[test]
    fn splits_partition_the_rows(n in 10usize..600, seed in any::<u64>(), index in 0u64..1000) {
        let (train, test) = SplitSpec::new(seed, index).indices(n).unwrap();
        prop_assert!(!train.is_empty() && !test.is_empty());
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}
