//! Timing sweep over sizes and backends, written as a plot-ready table.
//!
//! ```bash
//! cargo run --release --example benchmark_sweep -- 1000,2000,4000
//! ```

use st_hawkes::backend::Backend;
use st_hawkes::bench::{sweep, write_timing_table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sizes: Vec<usize> = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "1000,2000,4000".into())
        .split(',')
        .map(|s| s.trim().parse().expect("size"))
        .collect();
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let backends = [
        Backend::serial(),
        Backend::vectorized(4),
        Backend::threaded(cores),
        Backend::threaded_vectorized(cores, 4),
    ];
    let records = sweep(&sizes, &backends, 3, 1, 42)?;
    write_timing_table(&mut std::io::stdout(), &records)?;

    // Quadratic cost: doubling N should roughly quadruple the serial time.
    let serial: Vec<_> = records.iter().filter(|r| r.backend == Backend::serial()).collect();
    for pair in serial.windows(2) {
        let ratio = pair[1].median_seconds / pair[0].median_seconds;
        let growth = pair[1].n as f64 / pair[0].n as f64;
        eprintln!("serial {} -> {}: time x{ratio:.2} for size x{growth:.1}", pair[0].n, pair[1].n);
    }
    Ok(())
}
