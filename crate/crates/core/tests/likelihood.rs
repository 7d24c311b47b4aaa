//! Likelihood properties on simulated and random data, checked against the
//! brute-force reference in `common`.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use st_hawkes::backend::Backend;
use st_hawkes::likelihood::{log_likelihood, log_likelihood_with};
use st_hawkes::model::Params;
use st_hawkes::simulator::{simulate_cluster_process, SimWindow};

use common::{oracle_log_likelihood, random_instance, rel_diff};

#[test]
fn truth_beats_a_tenfold_error_in_theta() {
    let truth = Params::new(1.0, 1.6, 14.0, 0.15, 1.0, 0.1).unwrap();
    let window = SimWindow::new((0.0, 40.0), (0.0, 40.0), 60.0).unwrap();
    let backend = Backend::vectorized(4);
    for seed in 0..3 {
        let sim = simulate_cluster_process(&truth, &window, 0.01, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let at = |theta: f64| log_likelihood(&sim.events, &Params { theta, ..truth }, &backend).unwrap().log_lik;
        let best = at(truth.theta);
        assert!(best > at(truth.theta / 10.0), "seed {seed}");
        assert!(best > at(truth.theta * 10.0), "seed {seed}");
    }
}

#[test]
fn zero_theta_is_the_background_model() {
    for seed in [0, 5, 10] {
        let (events, p) = random_instance(seed, 40);
        assert_eq!(p.theta, 0.0);
        let mut bg = 0.0;
        let ev = events.to_events();
        for target in &ev {
            let rate: f64 = ev
                .iter()
                .map(|s| p.mu0 * common::oracle_background(target.x[0] - s.x[0], target.x[1] - s.x[1], target.t - s.t, &p))
                .sum();
            let mass = p.mu0
                * (common::phi_cdf((events.window_end() - target.t) / p.tau_t) - common::phi_cdf(-target.t / p.tau_t));
            bg += rate.ln() - mass;
        }
        let got = log_likelihood(&events, &p, &Backend::serial()).unwrap().log_lik;
        assert!(rel_diff(got, bg) < 1e-12, "{got} vs {bg}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn per_event_terms_sum_to_the_total(seed in 0u64..10_000, n in 1usize..60, lanes in prop::sample::select(vec![1usize, 2, 4, 8])) {
        let (events, p) = random_instance(seed, n);
        let r = log_likelihood_with(&events, &p, &Backend::vectorized(lanes), true).unwrap();
        let terms = r.per_event.unwrap();
        prop_assert_eq!(terms.len(), n);
        let sum: f64 = terms.iter().sum();
        prop_assert!(rel_diff(sum, r.log_lik) < 1e-12);
        prop_assert!(rel_diff(r.log_lik, oracle_log_likelihood(&events, &p)) < 1e-10);
    }

    #[test]
    fn extending_the_window_lowers_the_likelihood(seed in 0u64..10_000, n in 1usize..30, extra in 0.01f64..10.0) {
        let (events, p) = random_instance(seed, n);
        let end = events.window_end();
        let longer = events.clone().with_window_end(end + extra).unwrap();
        let a = log_likelihood(&events, &p, &Backend::serial()).unwrap().log_lik;
        let b = log_likelihood(&longer, &p, &Backend::serial()).unwrap().log_lik;
        prop_assert!(b < a);
    }
}
