//! Self-excitation probabilities: a point estimate at the true parameters,
//! then a posterior summary over draws, compared with the simulation's known
//! parent links.
//!
//! ```bash
//! cargo run --release --example excitation_probabilities
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use st_hawkes::backend::Backend;
use st_hawkes::diagnostics::smooth_probabilities_over_time;
use st_hawkes::excitation::{excitation_probabilities, posterior_excitation};
use st_hawkes::model::Params;
use st_hawkes::sampler::{run_chain, PriorSpec, SamplerConfig};
use st_hawkes::simulator::{simulate_cluster_process, SimWindow};

fn main() -> st_hawkes::Result<()> {
    let window = SimWindow::new((0.0, 10.0), (0.0, 10.0), 100.0)?;
    let truth = Params::new(1.0, 1.6, 14.0, 0.3, 1.0, 0.1)?;
    let sim = simulate_cluster_process(&truth, &window, 0.05, &mut ChaCha20Rng::seed_from_u64(3))?;
    let backend = Backend::vectorized(4);

    let ex = excitation_probabilities(&sim.events, &truth, &backend)?;
    let (mut triggered, mut background) = ((0.0, 0), (0.0, 0));
    for (pi, &parent) in ex.pi.iter().zip(&sim.parent) {
        let slot = if parent > 0 { &mut triggered } else { &mut background };
        slot.0 += pi;
        slot.1 += 1;
    }
    println!("N = {}; pi at the true parameters:", sim.events.len());
    println!("  mean over triggered events  {:.3} ({} events)", triggered.0 / triggered.1 as f64, triggered.1);
    println!("  mean over background events {:.3} ({} events)", background.0 / background.1 as f64, background.1);
    println!("  earliest event              {}", ex.pi[0]);

    let mut config = SamplerConfig::new(3000, 500, 11);
    config.backend = backend;
    let chain = run_chain(&sim.events, &PriorSpec::default(), &config, 0)?;
    let post = posterior_excitation(&sim.events, &chain.retained_params(), &backend, 200)?;
    let theta_mean = chain.retained_column(1).iter().sum::<f64>() / chain.retained().len() as f64;
    let pi_mean = post.mean_pi.iter().sum::<f64>() / post.mean_pi.len() as f64;
    println!(
        "posterior over {} draws: mean pi {pi_mean:.3}, posterior mean theta {theta_mean:.3}",
        post.draw_indices.len()
    );

    let lo = post.quantile(0.025).expect("draws retained");
    let hi = post.quantile(0.975).expect("draws retained");
    let widest = (0..lo.len()).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
    println!("widest 95% band: event {widest}, [{:.3}, {:.3}]", lo[widest], hi[widest]);

    let curve = smooth_probabilities_over_time(&sim.events, &post.mean_pi, 10.0, 6)?;
    for (t, v) in curve.time.iter().zip(&curve.value) {
        println!("  t = {t:>6.1} d  smoothed pi = {v:.3}");
    }
    Ok(())
}
