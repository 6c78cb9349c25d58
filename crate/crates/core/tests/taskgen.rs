use ioamc_core::taskgen::{generate, log_uniform, pibs_to_ss, GenParams};
use ioamc_core::time::{time_ratio, Rational};
use ioamc_core::Util;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params() -> impl Strategy<Value = GenParams> {
    (
        2usize..25,
        0usize..6,
        4u64..20,
        1u64..4,
        0.0f64..=1.0,
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(
            |(n_main, n_io, util, cf4, p_hi, extended, seed)| GenParams {
                n_main,
                n_io,
                total_util: Util::new(util, 20).unwrap(),
                crit_factor: Rational::new(u128::from(cf4) + 3, 4),
                p_hi,
                extended,
                seed,
                ..GenParams::default()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn same_seed_same_set(p in params()) {
        prop_assert_eq!(generate(&p), generate(&p));
    }

    #[test]
    fn utilization_is_accounted(p in params()) {
        let set = generate(&p).unwrap();
        let min_period = set.servers.iter().map(|s| s.period).min().unwrap();
        let eps = p.n_main as f64 / min_period as f64;
        let total = p.total_util.to_f64();
        let got = set.utilization_lo();
        prop_assert!(got >= total - 1e-9 && got <= total + eps, "{} vs {}", got, total);
    }

    #[test]
    fn conversion_rounds_up_by_less_than_a_tick(p in params()) {
        let set = generate(&p).unwrap();
        let conv = pibs_to_ss(&set).unwrap();
        prop_assert_eq!(conv.servers.len(), set.servers.len() + set.pibs.len());
        for pibs in &set.pibs {
            let s = conv.servers.iter().find(|s| s.id == pibs.id).unwrap();
            let bound = conv.server(set.bindings[&pibs.id]).unwrap();
            prop_assert_eq!(s.period, bound.period);
            let siblings = set.bindings.values().filter(|&&b| b == bound.id).count() as u32;
            prop_assert!(s.priority > bound.priority && s.priority <= bound.priority + siblings);
            let exact = pibs.util_lo.mul_time(s.period);
            prop_assert!(time_ratio(s.capacity_lo) >= exact);
            prop_assert!(time_ratio(s.capacity_lo) < exact + time_ratio(1));
        }
        let mut prios: Vec<u32> = conv.servers.iter().map(|s| s.priority).collect();
        prios.sort();
        prios.dedup();
        prop_assert_eq!(prios.len(), conv.servers.len());
    }
}

#[test]
fn log_periods_are_uniform_in_log_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (lo, hi) = (1000f64, 100_000f64);
    let bins = 10;
    let mut counts = vec![0u32; bins];
    let n = 100_000;
    for _ in 0..n {
        let t = log_uniform(1000, 100_000, &mut rng) as f64;
        let x = (t.ln() - lo.ln()) / (hi.ln() - lo.ln());
        counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = n as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 9 degrees of freedom, p = 0.001
    assert!(chi2 < 27.88, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn infeasible_parameters_are_rejected() {
    let bad = GenParams {
        io_total_util: Util::new(1, 2).unwrap(),
        ..GenParams::default()
    };
    assert!(generate(&bad).is_err());
    let bad = GenParams {
        crit_factor: Rational::new(1, 2),
        ..GenParams::default()
    };
    assert!(generate(&bad).is_err());
}
