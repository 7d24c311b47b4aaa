//! Simulate a cluster process with known parameters, fit it with the adaptive
//! sampler and check whether the 95% HPD intervals cover the truth.
//!
//! ```bash
//! cargo run --release --example simulate_and_fit            # one trial, S = 10,000
//! cargo run --release --example simulate_and_fit -- 3 2000  # three trials, S = 2,000
//! ```

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use st_hawkes::backend::Backend;
use st_hawkes::diagnostics::summarize_chains;
use st_hawkes::model::Params;
use st_hawkes::sampler::{run_chain, PriorSpec, SamplerConfig};
use st_hawkes::simulator::{simulate_cluster_process, SimWindow};

fn main() -> st_hawkes::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials: u64 = args.next().map_or(1, |a| a.parse().expect("trial count"));
    let iterations: usize = args.next().map_or(10_000, |a| a.parse().expect("iteration count"));

    // About 2,000 events on 40 km × 40 km × 170 d. The window is wide
    // compared with the 1.6 km background bandwidth; on small windows the
    // background kernels of edge events lose much of their mass outside the
    // window and the fit pushes that deficit into θ.
    let window = SimWindow::new((0.0, 40.0), (0.0, 40.0), 170.0)?;
    let truth = Params::new(1.0, 1.6, 14.0, 0.15, 1.0, 0.1)?;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());

    for trial in 0..trials {
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + trial);
        let sim = simulate_cluster_process(&truth, &window, 1700.0 / (1600.0 * 170.0), &mut rng)?;

        let mut config = SamplerConfig::new(iterations, iterations / 10, trial);
        config.backend = Backend::threaded_vectorized(cores, 4);
        let start = Instant::now();
        let chain = run_chain(&sim.events, &PriorSpec::default(), &config, 0)?;
        let elapsed = start.elapsed().as_secs_f64();

        println!(
            "trial {trial}: N = {} ({} immigrants), {iterations} steps in {elapsed:.1} s",
            sim.events.len(),
            sim.immigrant_count()
        );
        let expected = [("theta", truth.theta), ("omega", truth.omega), ("h_inv", 1.0 / truth.h)];
        for s in summarize_chains(std::slice::from_ref(&chain))? {
            let cover = expected
                .iter()
                .find(|(name, _)| *name == s.name)
                .map(|(_, v)| if (s.hpd_lo..=s.hpd_hi).contains(v) { "  covers truth" } else { "  MISSES truth" })
                .unwrap_or("");
            println!(
                "  {:<8} {:>4} mean {:>10.4}  95% HPD [{:.4}, {:.4}]  ESS {:>6.0}{cover}",
                s.name, s.unit, s.mean, s.hpd_lo, s.hpd_hi, s.ess
            );
        }
    }
    Ok(())
}
