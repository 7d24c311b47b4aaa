//! Command-line interface. Commands exchange data only through files.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::backend::{Backend, BackendKind};
use crate::bench::{sweep, write_timing_table};
use crate::diagnostics::{minutes_to_days, m_to_km, smooth_probabilities_over_time, summarize_chains};
use crate::error::{Error, Result};
use crate::excitation::{posterior_excitation_with, PosteriorOptions};
use crate::io::{
    deduplicate, read_chain, read_events, write_chain, write_curve, write_events, write_probs_table,
    write_summary_csv, write_summary_text, EventFileSpec, RunConfig,
};
use crate::model::Params;
use crate::sampler::{data_fingerprint, run_chain, Chain};
use crate::simulator::{simulate_cluster_process, SimWindow};
use crate::validate::{library_evaluator, run_validation};

/// Environment variable capping worker threads when `--threads` is absent.
pub const THREADS_ENV: &str = "ST_HAWKES_THREADS";

/// Bayesian inference for spatio-temporal self-exciting point processes.
#[derive(Debug, Parser)]
#[command(name = "st-hawkes", version, about, long_about = None)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration file (TOML); required by `fit`.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed; overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Maximum worker threads for threaded backends.
    #[arg(long, global = true, value_name = "N", env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Compute backend: serial, simd, threads or threads+simd.
    #[arg(long, global = true, value_name = "KIND", value_parser = parse_kind)]
    pub backend: Option<BackendKind>,
    /// Lane width of vectorized backends: 1, 2, 4 or 8.
    #[arg(long, global = true, value_name = "W", value_parser = parse_lanes)]
    pub lanes: Option<usize>,
}

fn parse_lanes(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(w) if crate::backend::SUPPORTED_LANES.contains(&w) => Ok(w),
        _ => Err(format!("'{s}' is not one of 1, 2, 4, 8")),
    }
}

fn parse_kind(s: &str) -> std::result::Result<BackendKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the posterior; writes one chain file per chain and a summary.
    Fit(FitArgs),
    /// Posterior excitation probabilities per event from chain files.
    Probs(ProbsArgs),
    /// Simulate the cluster process and write an event file with parents.
    Simulate(SimulateArgs),
    /// Time one likelihood evaluation across sizes and backends.
    Bench(BenchArgs),
    /// Summarize chain files in reporting units.
    Summarize(SummarizeArgs),
    /// Check backends against direct evaluation and the compensator against quadrature.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Output directory; overrides the configured one.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Number of chains; overrides the configured count.
    #[arg(long, value_name = "N")]
    pub chains: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ProbsArgs {
    /// Chain file; repeat for several chains.
    #[arg(long = "chain", value_name = "PATH", required = true)]
    pub chains: Vec<PathBuf>,
    /// Event file the chains were fitted to (format from --config if given).
    #[arg(long, value_name = "PATH")]
    pub events: PathBuf,
    /// Number of evenly spaced post-burn-in draws to use.
    #[arg(long, value_name = "N", default_value_t = 1000)]
    pub thin_to: usize,
    /// Output table of posterior-mean probabilities.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also write every used draw's probabilities to this file.
    #[arg(long, value_name = "PATH")]
    pub per_draw: Option<PathBuf>,
    /// Also write the time-smoothed probability curve to this file.
    #[arg(long, value_name = "PATH")]
    pub curve: Option<PathBuf>,
    /// Smoothing bandwidth for --curve, in days.
    #[arg(long, value_name = "DAYS", default_value_t = crate::diagnostics::DEFAULT_SMOOTHING_BANDWIDTH_DAYS)]
    pub bandwidth: f64,
    /// Grid points for --curve.
    #[arg(long, value_name = "N", default_value_t = crate::diagnostics::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output event file.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Background events per km² per day.
    #[arg(long, value_name = "RATE", default_value_t = 0.01)]
    pub rate: f64,
    /// Expected children per event (must be below 1).
    #[arg(long, value_name = "X", default_value_t = 0.15)]
    pub theta: f64,
    /// Temporal decay rate of triggering, per day.
    #[arg(long, value_name = "X", default_value_t = 1.0)]
    pub omega: f64,
    /// Spatial spread of triggering, in meters.
    #[arg(long, value_name = "M", default_value_t = 100.0)]
    pub h_m: f64,
    /// Side of the square spatial window, in km.
    #[arg(long, value_name = "KM", default_value_t = 10.0)]
    pub extent: f64,
    /// Length of the observation window, in days.
    #[arg(long, value_name = "DAYS", default_value_t = 170.0)]
    pub t_end: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated event counts.
    #[arg(long, value_name = "N,..", value_delimiter = ',', default_value = "1000,2000")]
    pub sizes: Vec<usize>,
    /// Comma-separated backends; defaults to --backend, else all four.
    #[arg(long, value_name = "KIND,..", value_delimiter = ',', value_parser = parse_kind)]
    pub backends: Vec<BackendKind>,
    /// Timed repeats per measurement (at least 3).
    #[arg(long, value_name = "N", default_value_t = 5)]
    pub repeats: usize,
    /// Untimed warmup evaluations per measurement.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub warmups: usize,
    /// Write the timing table here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Chain file; repeat for several chains.
    #[arg(long = "chain", value_name = "PATH", required = true)]
    pub chains: Vec<PathBuf>,
    /// Also write the summary as CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Write the report here as well as to standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Exit status for a failed command: 2 for bad input, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ResultDrift { .. } => 1,
        Error::Indexed { source, .. } => exit_code(source),
        _ => 2,
    }
}

impl GlobalArgs {
    fn default_threads(&self) -> usize {
        self.threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Applies flag overrides to a configured backend.
    pub fn resolve_backend(&self, base: Backend) -> Result<Backend> {
        let mut b = base;
        if let Some(kind) = self.backend {
            b.kind = kind;
            if kind.is_threaded() && !base.kind.is_threaded() {
                b.threads = self.default_threads();
            }
        }
        if let Some(t) = self.threads {
            b.threads = t;
        }
        if let Some(l) = self.lanes {
            b.lanes = l;
        } else if self.backend.is_some() && b.kind.is_vectorized() && !base.kind.is_vectorized() {
            b.lanes = 4;
        }
        b.validate()?;
        Ok(b)
    }

    fn backend_for(&self, kind: BackendKind) -> Backend {
        let threads = self.default_threads();
        let lanes = self.lanes.unwrap_or(4);
        match kind {
            BackendKind::Serial => Backend::serial(),
            BackendKind::Vectorized => Backend::vectorized(lanes),
            BackendKind::Threaded => Backend::threaded(threads),
            BackendKind::ThreadedVectorized => Backend::threaded_vectorized(threads, lanes),
        }
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    match &cli.command {
        Command::Fit(a) => fit(g, a),
        Command::Probs(a) => probs(g, a),
        Command::Simulate(a) => simulate(g, a),
        Command::Bench(a) => bench(g, a),
        Command::Summarize(a) => summarize(a),
        Command::Validate(a) => validate(g, a),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish<W: Write>(mut w: W, path: &Path, result: std::io::Result<()>) -> Result<()> {
    result.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn fit(g: &GlobalArgs, a: &FitArgs) -> Result<i32> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("fit needs --config".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = g.seed {
        config.sampler.seed = seed;
    }
    if let Some(c) = a.chains {
        config.sampler.chains = c;
    }
    config.sampler.backend = g.resolve_backend(config.sampler.backend)?;
    let out_dir = a.out_dir.clone().unwrap_or(config.output.dir.clone());
    config.validate()?;

    let mut events = read_events(&config.data.events, &config.data.format)?.events;
    if let Some(d) = config.data.dedup {
        let before = events.len();
        events = deduplicate(&events, m_to_km(d.radius_m), minutes_to_days(d.window_min))?;
        eprintln!("dedup: kept {} of {} events", events.len(), before);
    }
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let mut chains = Vec::with_capacity(config.sampler.chains);
    for c in 0..config.sampler.chains {
        eprintln!(
            "chain {c}: {} iterations on {} events ({})",
            config.sampler.iterations,
            events.len(),
            config.sampler.backend
        );
        let chain = run_chain(&events, &config.priors, &config.sampler, c)?;
        write_chain(&chain, &out_dir.join(format!("chain_{c}.csv")))?;
        chains.push(chain);
    }
    let rows = summarize_chains(&chains)?;
    let mut stdout = std::io::stdout().lock();
    write_summary_text(&mut stdout, &rows).map_err(|e| Error::io("stdout", e))?;
    let csv = out_dir.join("summary.csv");
    let mut w = create(&csv)?;
    let result = write_summary_csv(&mut w, &rows);
    finish(w, &csv, result)?;
    Ok(0)
}

fn event_spec(g: &GlobalArgs) -> Result<EventFileSpec> {
    match &g.config {
        Some(path) => Ok(RunConfig::load(path)?.data.format),
        None => Ok(EventFileSpec::default()),
    }
}

fn load_chains(paths: &[PathBuf]) -> Result<Vec<Chain>> {
    paths.iter().map(|p| read_chain(p)).collect()
}

fn probs(g: &GlobalArgs, a: &ProbsArgs) -> Result<i32> {
    if a.thin_to == 0 {
        return Err(Error::InvalidArgument("--thin-to must be >= 1".into()));
    }
    let spec = event_spec(g)?;
    let chains = load_chains(&a.chains)?;
    let events = read_events(&a.events, &spec)?.events;
    let fingerprint = data_fingerprint(&events);
    for (path, c) in a.chains.iter().zip(&chains) {
        if c.n_events != events.len() || c.data_fingerprint != fingerprint {
            return Err(Error::Mismatch(format!(
                "{} was fitted to {} events, {} has {} (or different values)",
                path.display(),
                c.n_events,
                a.events.display(),
                events.len()
            )));
        }
    }
    let backend = g.resolve_backend(chains[0].config.backend)?;
    let draws: Vec<Params> = chains.iter().flat_map(|c| c.retained_params()).collect();

    let mut sink = a.per_draw.as_deref().map(create).transpose()?;
    let post = posterior_excitation_with(
        &events,
        &draws,
        &backend,
        a.thin_to,
        PosteriorOptions {
            retention_cap: None,
            per_draw_sink: sink.as_mut().map(|w| w as &mut dyn Write),
        },
    )?;
    if let (Some(w), Some(path)) = (sink, a.per_draw.as_deref()) {
        finish(w, path, Ok(()))?;
    }

    let mut w = create(&a.out)?;
    let result = write_probs_table(&mut w, &events, &post);
    finish(w, &a.out, result)?;

    if let Some(path) = &a.curve {
        let curve = smooth_probabilities_over_time(&events, &post.mean_pi, a.bandwidth, a.grid_points)?;
        let mut w = create(path)?;
        let result = write_curve(&mut w, &curve);
        finish(w, path, result)?;
    }
    Ok(0)
}

fn simulate(g: &GlobalArgs, a: &SimulateArgs) -> Result<i32> {
    let params = Params::new(1.0, 1.6, 14.0, a.theta, a.omega, m_to_km(a.h_m))?;
    let window = SimWindow::new((0.0, a.extent), (0.0, a.extent), a.t_end)?;
    let mut rng = ChaCha20Rng::seed_from_u64(g.seed.unwrap_or(0));
    let truth = simulate_cluster_process(&params, &window, a.rate, &mut rng)?;
    write_events(&a.out, &truth.events, Some(&truth.parent))?;
    eprintln!(
        "simulated {} events ({} background)",
        truth.events.len(),
        truth.immigrant_count()
    );
    Ok(0)
}

fn bench(g: &GlobalArgs, a: &BenchArgs) -> Result<i32> {
    let kinds: Vec<BackendKind> = if !a.backends.is_empty() {
        a.backends.clone()
    } else if let Some(k) = g.backend {
        vec![k]
    } else {
        vec![
            BackendKind::Serial,
            BackendKind::Vectorized,
            BackendKind::Threaded,
            BackendKind::ThreadedVectorized,
        ]
    };
    let backends: Vec<Backend> = kinds.iter().map(|&k| g.backend_for(k)).collect();
    let records = sweep(&a.sizes, &backends, a.repeats, a.warmups, g.seed.unwrap_or(0))?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            let result = write_timing_table(&mut w, &records);
            finish(w, path, result)?;
        }
        None => {
            write_timing_table(&mut std::io::stdout().lock(), &records).map_err(|e| Error::io("stdout", e))?
        }
    }
    Ok(0)
}

fn summarize(a: &SummarizeArgs) -> Result<i32> {
    let chains = load_chains(&a.chains)?;
    let rows = summarize_chains(&chains)?;
    write_summary_text(&mut std::io::stdout().lock(), &rows).map_err(|e| Error::io("stdout", e))?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        let result = write_summary_csv(&mut w, &rows);
        finish(w, path, result)?;
    }
    Ok(0)
}

fn validate(g: &GlobalArgs, a: &ValidateArgs) -> Result<i32> {
    let backends = match g.backend {
        Some(k) => vec![Backend::serial(), g.backend_for(k)],
        None => [
            BackendKind::Serial,
            BackendKind::Vectorized,
            BackendKind::Threaded,
            BackendKind::ThreadedVectorized,
        ]
        .iter()
        .map(|&k| g.backend_for(k))
        .collect(),
    };
    let report = run_validation(&backends, g.seed.unwrap_or(0), &library_evaluator)?;
    report
        .write(&mut std::io::stdout().lock())
        .map_err(|e| Error::io("stdout", e))?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        let result = report.write(&mut w);
        finish(w, path, result)?;
    }
    Ok(if report.all_passed() { 0 } else { 1 })
}
