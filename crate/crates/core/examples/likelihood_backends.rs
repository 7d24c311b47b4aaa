//! Evaluate one log-likelihood on every backend and compare values and
//! timings against the serial reference.
//!
//! ```bash
//! cargo run --release --example likelihood_backends -- 5000
//! ```

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use st_hawkes::backend::{Backend, SUPPORTED_LANES};
use st_hawkes::bench::benchmark_setup;
use st_hawkes::likelihood::log_likelihood_with;
use st_hawkes::simulator::generate_benchmark_cloud;

fn main() -> st_hawkes::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(3000, |a| a.parse().expect("event count"));
    let (window, params) = benchmark_setup();
    let events = generate_benchmark_cloud(n, &window, &mut ChaCha20Rng::seed_from_u64(7))?;
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());

    let mut backends = vec![Backend::serial()];
    backends.extend(SUPPORTED_LANES.iter().map(|&l| Backend::vectorized(l)));
    backends.push(Backend::threaded(cores));
    backends.push(Backend::threaded_vectorized(cores, 4));

    let start = Instant::now();
    let reference = log_likelihood_with(&events, &params, &Backend::serial(), true)?;
    let serial_time = start.elapsed().as_secs_f64();
    println!("N = {n}, serial logLik = {:.10} ({serial_time:.3} s)", reference.log_lik);

    for backend in &backends[1..] {
        let start = Instant::now();
        let r = log_likelihood_with(&events, &params, backend, true)?;
        let t = start.elapsed().as_secs_f64();
        let rel = (r.log_lik - reference.log_lik).abs() / reference.log_lik.abs();
        // Per-event terms as well as the total.
        let worst = reference
            .per_event
            .as_ref()
            .zip(r.per_event.as_ref())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs()).fold(0.0, f64::max))
            .unwrap_or(f64::NAN);
        println!(
            "{:<28} rel. diff {rel:.2e}  worst per-event {worst:.2e}  {t:.3} s  ({:.2}x)",
            backend.to_string(),
            serial_time / t
        );
    }
    Ok(())
}
