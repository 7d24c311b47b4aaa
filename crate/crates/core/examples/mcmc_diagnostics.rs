//! Chain diagnostics: effective sample size, HPD intervals, acceptance rates
//! after adaptation, and the adaptation trace.
//!
//! ```bash
//! cargo run --release --example mcmc_diagnostics
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use st_hawkes::backend::Backend;
use st_hawkes::diagnostics::{effective_sample_size, hpd_interval, summarize_chains};
use st_hawkes::io::write_summary_text;
use st_hawkes::model::Params;
use st_hawkes::sampler::{run_chains, PriorSpec, SamplerConfig, COORDINATES};
use st_hawkes::simulator::{simulate_cluster_process, SimWindow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let window = SimWindow::new((0.0, 10.0), (0.0, 10.0), 60.0)?;
    let truth = Params::new(1.0, 1.6, 14.0, 0.2, 1.0, 0.1)?;
    let sim = simulate_cluster_process(&truth, &window, 0.1, &mut ChaCha20Rng::seed_from_u64(21))?;

    let mut config = SamplerConfig::new(6000, 1000, 5);
    config.chains = 2;
    config.backend = Backend::vectorized(4);
    let chains = run_chains(&sim.events, &PriorSpec::default(), &config)?;
    println!("N = {}, {} chains of {} steps", sim.events.len(), chains.len(), config.iterations);

    write_summary_text(&mut std::io::stdout(), &summarize_chains(&chains)?)
        ?;

    for chain in &chains {
        println!("chain {} (seed {:#x}):", chain.chain_index, chain.chain_seed);
        for (d, name) in COORDINATES.iter().enumerate() {
            let draws = chain.retained_column(d);
            let ess = effective_sample_size(&draws)?;
            let (lo, hi) = hpd_interval(&draws, 0.9)?;
            let rate = chain.tail_acceptance(d, 1000).map_or("n/a".into(), |r| format!("{r:.2}"));
            println!("  {name:<6} ESS {:>7.1}  90% HPD [{lo:.4}, {hi:.4}]  late acceptance {rate}", ess.value);
        }
        let last = chain.adaptations.iter().rev().take(4);
        for a in last {
            println!(
                "  adapted {} at step {}: ratio {:.2}, proposal sd {:.4}",
                COORDINATES[a.coordinate], a.step, a.ratio, a.proposal_sd
            );
        }
    }
    Ok(())
}
