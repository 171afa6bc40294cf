//! Statistics on simulated data: convergence rate and concentration.

use proptest::prelude::*;
use scorelaw::analytic::c_recurrence;
use scorelaw::model_s::{run, SimParams};
use scorelaw::seed::replica_seed;
use scorelaw::stats::{compare_to_limit, concentration_scan, normalize};

#[test]
fn limit_error_halves_when_n_quadruples() {
    const RUNS: u64 = 200;
    let params = SimParams::new(0.5, 0.0, 2.0, 4, 1);
    let limit = c_recurrence(1, 50, 0.5, 0.0, 2.0).unwrap();
    let mut err = [0.0f64; 2];
    for i in 0..RUNS {
        let hs = run(params.with_seed(replica_seed(31, i)), 40_000, &[10_000, 40_000]).unwrap();
        for (k, h) in hs.iter().enumerate() {
            let cmp = compare_to_limit(&normalize(h, h.n + 1), &limit, h.n, 50, 1.0).unwrap();
            err[k] += cmp.median_error(5) / RUNS as f64;
        }
    }
    let ratio = err[0] / err[1];
    assert!((1.5..=3.0).contains(&ratio), "median errors {err:?}, ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn no_deviation_events_across_seeds(master in any::<u64>()) {
        let params = SimParams::new(0.5, 0.0, 2.0, 4, 1);
        let runs: Vec<_> = (0..100)
            .map(|i| run(params.with_seed(replica_seed(master, i)), 2000, &[2000]).unwrap().remove(0))
            .collect();
        let rep = concentration_scan(&runs, 1..=5).unwrap();
        prop_assert_eq!(rep.violations, 0);
    }
}
