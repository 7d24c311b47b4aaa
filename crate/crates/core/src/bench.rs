//! Timing harness for the likelihood kernel: untimed warmups, timed repeats,
//! median and minimum wall time, and a check that every repeat produced the
//! same bits.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::likelihood::log_likelihood;
use crate::model::{EventSet, Params};
use crate::simulator::{generate_benchmark_cloud, SimWindow};

pub const MIN_REPEATS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub backend: Backend,
    pub n: usize,
    pub repeats: usize,
    pub warmups: usize,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub hardware: String,
    /// The value every repeat returned.
    pub log_lik: f64,
}

/// Architecture, OS, logical CPU count and detected vector extensions.
pub fn hardware_descriptor() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    #[cfg(target_arch = "x86_64")]
    let features = if is_x86_feature_detected!("avx2") {
        "avx2"
    } else {
        "sse2"
    };
    #[cfg(not(target_arch = "x86_64"))]
    let features = "portable";
    format!(
        "{}-{} cpus={} simd={}",
        std::env::consts::ARCH,
        std::env::consts::OS,
        cpus,
        features
    )
}

pub fn time_likelihood(
    events: &EventSet,
    params: &Params,
    backend: &Backend,
    repeats: usize,
    warmups: usize,
) -> Result<TimingRecord> {
    if repeats < MIN_REPEATS {
        return Err(Error::InvalidArgument(format!(
            "repeats must be >= {MIN_REPEATS}, got {repeats}"
        )));
    }
    if warmups == 0 {
        return Err(Error::InvalidArgument("warmups must be >= 1".into()));
    }
    for _ in 0..warmups {
        std::hint::black_box(log_likelihood(events, params, backend)?);
    }
    let mut times = Vec::with_capacity(repeats);
    let mut first: Option<f64> = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let value = std::hint::black_box(log_likelihood(events, params, backend)?).log_lik;
        times.push(start.elapsed().as_secs_f64());
        match first {
            None => first = Some(value),
            Some(f) if f.to_bits() != value.to_bits() => {
                return Err(Error::ResultDrift { first: f, other: value })
            }
            Some(_) => {}
        }
    }
    times.sort_by(f64::total_cmp);
    let median = if repeats % 2 == 1 {
        times[repeats / 2]
    } else {
        0.5 * (times[repeats / 2 - 1] + times[repeats / 2])
    };
    Ok(TimingRecord {
        backend: *backend,
        n: events.len(),
        repeats,
        warmups,
        median_seconds: median,
        min_seconds: times[0],
        hardware: hardware_descriptor(),
        log_lik: first.unwrap_or(f64::NAN),
    })
}

/// Window and parameters used for generated benchmark clouds.
pub fn benchmark_setup() -> (SimWindow, Params) {
    let window = SimWindow {
        x_min: 0.0,
        x_max: 10.0,
        y_min: 0.0,
        y_max: 10.0,
        t_end: 365.0,
    };
    let params = Params {
        mu0: 1.0,
        tau_x: 1.6,
        tau_t: 14.0,
        theta: 0.1,
        omega: 1.0,
        h: 0.1,
    };
    (window, params)
}

/// Times every backend at every size on a uniform cloud seeded by `seed`.
pub fn sweep(
    sizes: &[usize],
    backends: &[Backend],
    repeats: usize,
    warmups: usize,
    seed: u64,
) -> Result<Vec<TimingRecord>> {
    if sizes.is_empty() || backends.is_empty() {
        return Err(Error::InvalidArgument("need at least one size and one backend".into()));
    }
    for b in backends {
        b.validate()?;
    }
    let (window, params) = benchmark_setup();
    let mut records = Vec::new();
    for &n in sizes {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ n as u64);
        let events = generate_benchmark_cloud(n, &window, &mut rng)?;
        for backend in backends {
            records.push(time_likelihood(&events, &params, backend, repeats, warmups)?);
        }
    }
    Ok(records)
}

/// Plot-ready table; speedup is relative to the serial row of the same size.
pub fn write_timing_table(w: &mut dyn Write, records: &[TimingRecord]) -> std::io::Result<()> {
    writeln!(
        w,
        "size,backend,threads,lanes,repeats,warmups,median_s,min_s,speedup_vs_serial,hardware"
    )?;
    for r in records {
        let serial = records
            .iter()
            .find(|s| s.n == r.n && s.backend == Backend::serial())
            .map(|s| s.median_seconds / r.median_seconds);
        let speedup = serial.map_or_else(|| "NA".to_string(), |s| s.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.backend.kind,
            r.backend.threads,
            r.backend.lanes,
            r.repeats,
            r.warmups,
            r.median_seconds,
            r.min_seconds,
            speedup,
            r.hardware
        )?;
    }
    Ok(())
}
