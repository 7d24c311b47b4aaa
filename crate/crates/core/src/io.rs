//! File formats: event tables, chain files, run configuration and result
//! tables.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! finite `f64` reads back bit for bit.
//!
//! # Event files
//!
//! Delimited text with a header row naming at least the `x`, `y` and `t`
//! columns (names configurable). An optional first line `#window_end=<T>`
//! sets the end of the observation window; otherwise it is the last event
//! time. An optional parent column holds `0` for background events and the
//! 1-based data row of the parent otherwise.
//!
//! # Chain files
//!
//! ```text
//! st-hawkes-chain 1
//! {"chain_index":0,...}                        JSON metadata on one line
//! row,mu0,theta,omega,h_inv,log_post,coordinate,accepted
//! 0,<initial state>,<log posterior>,,          row 0 is the starting point
//! 1,...,<coordinate 0-3>,<0|1>                 one row per transition
//! END <number of transition rows>
//! ```
//!
//! A missing or inconsistent `END` line is reported as truncation.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ParameterSummary, SmoothedCurve, DEFAULT_GRID_POINTS, DEFAULT_SMOOTHING_BANDWIDTH_DAYS};
use crate::error::{Error, Result};
use crate::excitation::PosteriorExcitation;
use crate::model::{Event, EventSet};
use crate::sampler::{AdaptationEvent, Chain, PriorSpec, SamplerConfig};

pub const CHAIN_MAGIC: &str = "st-hawkes-chain";
pub const CHAIN_VERSION: u32 = 1;
const CHAIN_HEADER: &str = "row,mu0,theta,omega,h_inv,log_post,coordinate,accepted";
const WINDOW_END_TAG: &str = "#window_end=";

/// Shortest round-trip formatting of a float, in exponent form when the
/// magnitude is below 1e-5 or at least 1e16.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistanceUnit {
    M,
    #[default]
    Km,
}

impl DistanceUnit {
    fn per_km(self) -> f64 {
        match self {
            DistanceUnit::M => 1000.0,
            DistanceUnit::Km => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    S,
    Min,
    H,
    #[default]
    D,
}

impl TimeUnit {
    fn per_day(self) -> f64 {
        match self {
            TimeUnit::S => 86_400.0,
            TimeUnit::Min => 1440.0,
            TimeUnit::H => 24.0,
            TimeUnit::D => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimeOrigin {
    /// Times are already measured from the window start and must be `>= 0`.
    #[default]
    WindowRelative,
    /// Absolute timestamps; the earliest one becomes time zero.
    Epoch,
}

fn default_delimiter() -> char {
    ','
}
fn column(name: &str) -> String {
    name.to_string()
}

/// How to read an event table: column names, units and time origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventFileSpec {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "x_col")]
    pub x_column: String,
    #[serde(default = "y_col")]
    pub y_column: String,
    #[serde(default = "t_col")]
    pub t_column: String,
    #[serde(default)]
    pub parent_column: Option<String>,
    #[serde(default)]
    pub distance_unit: DistanceUnit,
    #[serde(default)]
    pub time_unit: TimeUnit,
    #[serde(default)]
    pub time_origin: TimeOrigin,
    /// Window end in the file's own time units and origin.
    #[serde(default)]
    pub window_end: Option<f64>,
}

fn x_col() -> String {
    column("x")
}
fn y_col() -> String {
    column("y")
}
fn t_col() -> String {
    column("t")
}

impl Default for EventFileSpec {
    fn default() -> Self {
        EventFileSpec {
            delimiter: ',',
            x_column: x_col(),
            y_column: y_col(),
            t_column: t_col(),
            parent_column: None,
            distance_unit: DistanceUnit::Km,
            time_unit: TimeUnit::D,
            time_origin: TimeOrigin::WindowRelative,
            window_end: None,
        }
    }
}

/// Parsed events in km and days.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub events: EventSet,
    /// Parent links remapped to sorted positions (`0` = background).
    pub parent: Option<Vec<usize>>,
    /// Subtracted from epoch timestamps, in days. Zero for window-relative files.
    pub time_offset_days: f64,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn read_events(path: &Path, spec: &EventFileSpec) -> Result<EventFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events(&text, path, spec)
}

fn parse_events(text: &str, path: &Path, spec: &EventFileSpec) -> Result<EventFile> {
    let mut body = text;
    let mut first_line = 1;
    let mut tagged_end = None;
    if let Some(rest) = text.strip_prefix(WINDOW_END_TAG) {
        let (value, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| parse_error(path, 1, format!("bad window end '{}'", value.trim())))?;
        tagged_end = Some(v);
        body = tail;
        first_line = 2;
    }
    if !spec.delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter {:?} must be ASCII", spec.delimiter)));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let line_of = |pos: Option<&csv::Position>| pos.map_or(first_line, |p| p.line() as usize + first_line - 1);

    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, first_line, e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(path, first_line, format!("missing column '{name}'")))
    };
    let (xi, yi, ti) = (find(&spec.x_column)?, find(&spec.y_column)?, find(&spec.t_column)?);
    let pi = spec.parent_column.as_deref().map(find).transpose()?;

    let mut raw: Vec<(f64, f64, f64, usize)> = Vec::new();
    let mut lines = Vec::new();
    let mut parents = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(path, line_of(e.position()), e.to_string()))?;
        let line = line_of(record.position());
        let number = |i: usize, name: &str| -> Result<f64> {
            let field = record
                .get(i)
                .ok_or_else(|| parse_error(path, line, format!("missing field '{name}'")))?;
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(path, line, format!("'{field}' in column '{name}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("non-finite value '{field}' in column '{name}'")));
            }
            Ok(v)
        };
        let x = number(xi, &spec.x_column)?;
        let y = number(yi, &spec.y_column)?;
        let t = number(ti, &spec.t_column)?;
        if let Some(pi) = pi {
            let field = record.get(pi).unwrap_or("");
            let p: usize = field
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad parent index '{field}'")))?;
            parents.push(p);
        }
        raw.push((x, y, t, raw.len()));
        lines.push(line);
    }
    if raw.is_empty() {
        return Err(parse_error(path, first_line, "no events"));
    }

    let offset = match spec.time_origin {
        TimeOrigin::WindowRelative => {
            if let Some(k) = raw.iter().position(|r| r.2 < 0.0) {
                return Err(parse_error(path, lines[k], "negative time in a window-relative file"));
            }
            0.0
        }
        TimeOrigin::Epoch => raw.iter().map(|r| r.2).fold(f64::INFINITY, f64::min),
    };
    for (k, &p) in parents.iter().enumerate() {
        if p > raw.len() || p == k + 1 {
            return Err(parse_error(path, lines[k], format!("parent index {p} out of range")));
        }
    }

    let dist = spec.distance_unit.per_km();
    let time = spec.time_unit.per_day();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].2.total_cmp(&raw[b].2));
    let events: Vec<Event> = order
        .iter()
        .map(|&i| Event::new(raw[i].0 / dist, raw[i].1 / dist, (raw[i].2 - offset) / time))
        .collect();
    let mut set = EventSet::new(events)?;
    if let Some(end) = spec.window_end.or(tagged_end) {
        set = set.with_window_end((end - offset) / time)?;
    }

    let parent = (!parents.is_empty()).then(|| {
        let mut position = vec![0; order.len()];
        for (pos, &orig) in order.iter().enumerate() {
            position[orig] = pos;
        }
        order
            .iter()
            .map(|&i| match parents[i] {
                0 => 0,
                p => position[p - 1] + 1,
            })
            .collect()
    });
    Ok(EventFile {
        events: set,
        parent,
        time_offset_days: offset / time,
    })
}

/// Writes events in km and days with the default column names.
pub fn write_events(path: &Path, events: &EventSet, parent: Option<&[usize]>) -> Result<()> {
    if let Some(p) = parent {
        if p.len() != events.len() {
            return Err(Error::Mismatch(format!("{} parent links for {} events", p.len(), events.len())));
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "{WINDOW_END_TAG}{}", events.window_end())?;
        write!(w, "x,y,t")?;
        if parent.is_some() {
            write!(w, ",parent")?;
        }
        writeln!(w)?;
        for (i, e) in events.iter().enumerate() {
            write!(w, "{},{},{}", e.x[0], e.x[1], e.t)?;
            if let Some(p) = parent {
                write!(w, ",{}", p[i])?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Indices kept by a forward greedy sweep: an event is dropped when a
/// previously kept event is strictly within `radius_km` and `window_days`.
pub fn retained_indices(events: &EventSet, radius_km: f64, window_days: f64) -> Result<Vec<usize>> {
    if !(radius_km >= 0.0 && window_days >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dedup thresholds must be non-negative (radius {radius_km}, window {window_days})"
        )));
    }
    let (xs, ys, ts) = (events.xs(), events.ys(), events.ts());
    let r2 = radius_km * radius_km;
    let mut kept: Vec<usize> = Vec::with_capacity(events.len());
    // Kept events older than the window can never match again.
    let mut live = 0;
    for i in 0..events.len() {
        while live < kept.len() && ts[i] - ts[kept[live]] >= window_days {
            live += 1;
        }
        let duplicate = kept[live..].iter().any(|&j| {
            let (dx, dy) = (xs[i] - xs[j], ys[i] - ys[j]);
            dx * dx + dy * dy < r2
        });
        if !duplicate {
            kept.push(i);
        }
    }
    Ok(kept)
}

pub fn deduplicate(events: &EventSet, radius_km: f64, window_days: f64) -> Result<EventSet> {
    let kept = retained_indices(events, radius_km, window_days)?;
    EventSet::new(kept.iter().map(|&i| events.event(i)).collect())?.with_window_end(events.window_end())
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainMeta {
    chain_index: usize,
    chain_seed: u64,
    n_events: usize,
    data_fingerprint: u64,
    config: SamplerConfig,
    priors: PriorSpec,
    adaptations: Vec<AdaptationEvent>,
}

pub fn write_chain(chain: &Chain, path: &Path) -> Result<()> {
    if chain.is_empty() {
        return Err(Error::InvalidArgument("refusing to write an empty chain".into()));
    }
    let meta = ChainMeta {
        chain_index: chain.chain_index,
        chain_seed: chain.chain_seed,
        n_events: chain.n_events,
        data_fingerprint: chain.data_fingerprint,
        config: chain.config.clone(),
        priors: chain.priors,
        adaptations: chain.adaptations.clone(),
    };
    let json = serde_json::to_string(&meta).map_err(|e| Error::ChainFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "{CHAIN_MAGIC} {CHAIN_VERSION}")?;
        writeln!(w, "{json}")?;
        writeln!(w, "{CHAIN_HEADER}")?;
        let [a, b, c, d] = chain.initial;
        writeln!(w, "0,{a},{b},{c},{d},{},,", chain.initial_log_post)?;
        for s in 0..chain.len() {
            let [a, b, c, d] = chain.draws[s];
            writeln!(
                w,
                "{},{a},{b},{c},{d},{},{},{}",
                s + 1,
                chain.log_post[s],
                chain.coordinate[s],
                u8::from(chain.accepted[s])
            )?;
        }
        writeln!(w, "END {}", chain.len())?;
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn read_chain(path: &Path) -> Result<Chain> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let fail = |message: String| Error::ChainFormat {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let mut next = |what: &str| -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::io(path, e)),
            None => Err(fail(format!("truncated before {what}"))),
        }
    };

    let magic = next("the format line")?;
    let version = magic
        .strip_prefix(CHAIN_MAGIC)
        .map(str::trim)
        .ok_or_else(|| fail("not a chain file".into()))?;
    if version != CHAIN_VERSION.to_string() {
        return Err(fail(format!("unsupported format version '{version}' (expected {CHAIN_VERSION})")));
    }
    let meta: ChainMeta =
        serde_json::from_str(&next("metadata")?).map_err(|e| fail(format!("metadata: {e}")))?;
    if next("the column header")? != CHAIN_HEADER {
        return Err(fail("unexpected column header".into()));
    }

    let mut chain = Chain {
        chain_index: meta.chain_index,
        chain_seed: meta.chain_seed,
        config: meta.config,
        priors: meta.priors,
        n_events: meta.n_events,
        data_fingerprint: meta.data_fingerprint,
        initial: [0.0; 4],
        initial_log_post: 0.0,
        draws: Vec::new(),
        log_post: Vec::new(),
        coordinate: Vec::new(),
        accepted: Vec::new(),
        adaptations: meta.adaptations,
    };
    let mut row = 0usize;
    loop {
        let line = next("the END line")?;
        if let Some(count) = line.strip_prefix("END ") {
            let count: usize = count.trim().parse().map_err(|_| fail("bad END line".into()))?;
            if count != chain.draws.len() || row == 0 {
                return Err(fail(format!("END declares {count} rows, found {}", chain.draws.len())));
            }
            break;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 || fields[0] != row.to_string() {
            return Err(fail(format!("malformed row {row}")));
        }
        let mut values = [0.0; 5];
        for (v, f) in values.iter_mut().zip(&fields[1..6]) {
            *v = f.parse().map_err(|_| fail(format!("row {row}: bad number '{f}'")))?;
        }
        let state = [values[0], values[1], values[2], values[3]];
        if row == 0 {
            chain.initial = state;
            chain.initial_log_post = values[4];
        } else {
            let coordinate: u8 = fields[6]
                .parse()
                .ok()
                .filter(|c| *c < 4)
                .ok_or_else(|| fail(format!("row {row}: bad coordinate")))?;
            let accepted = match fields[7] {
                "0" => false,
                "1" => true,
                _ => return Err(fail(format!("row {row}: bad accepted flag"))),
            };
            chain.draws.push(state);
            chain.log_post.push(values[4]);
            chain.coordinate.push(coordinate);
            chain.accepted.push(accepted);
        }
        row += 1;
    }
    Ok(chain)
}

/// Duplicate-removal thresholds in reporting units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupConfig {
    pub radius_m: f64,
    pub window_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub events: PathBuf,
    #[serde(default)]
    pub format: EventFileSpec,
    #[serde(default)]
    pub dedup: Option<DedupConfig>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_thin() -> usize {
    1000
}
fn default_bandwidth() -> f64 {
    DEFAULT_SMOOTHING_BANDWIDTH_DAYS
}
fn default_grid() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Posterior draws used for excitation probabilities.
    #[serde(default = "default_thin")]
    pub thin_to: usize,
    #[serde(default = "default_bandwidth")]
    pub smoothing_bandwidth_days: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out(),
            thin_to: default_thin(),
            smoothing_bandwidth_days: default_bandwidth(),
            grid_points: default_grid(),
        }
    }
}

/// The TOML run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub priors: PriorSpec,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parses and validates; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if config.data.events.is_relative() {
            config.data.events = base.join(&config.data.events);
        }
        if config.output.dir.is_relative() {
            config.output.dir = base.join(&config.output.dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.priors.validate()?;
        if let Some(d) = self.data.dedup {
            if !(d.radius_m >= 0.0 && d.window_min >= 0.0) {
                return Err(Error::Config("dedup thresholds must be non-negative".into()));
            }
        }
        if self.output.thin_to == 0 || self.output.grid_points == 0 {
            return Err(Error::Config("thin_to and grid_points must be >= 1".into()));
        }
        if !(self.output.smoothing_bandwidth_days > 0.0) {
            return Err(Error::Config("smoothing_bandwidth_days must be positive".into()));
        }
        Ok(())
    }
}

/// Aligned human-readable summary table.
pub fn write_summary_text(w: &mut dyn Write, rows: &[ParameterSummary]) -> std::io::Result<()> {
    writeln!(
        w,
        "{:<10} {:<6} {:>14} {:>14} {:>14} {:>14} {:>10}",
        "parameter", "unit", "mean", "sd", "hpd95_lo", "hpd95_hi", "ess"
    )?;
    for r in rows {
        writeln!(
            w,
            "{:<10} {:<6} {:>14.6} {:>14.6} {:>14.6} {:>14.6} {:>10.1}",
            r.name, r.unit, r.mean, r.sd, r.hpd_lo, r.hpd_hi, r.ess
        )?;
    }
    Ok(())
}

pub fn write_summary_csv(w: &mut dyn Write, rows: &[ParameterSummary]) -> std::io::Result<()> {
    writeln!(w, "parameter,unit,mean,sd,hpd95_lo,hpd95_hi,ess")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.name,
            r.unit,
            Num(r.mean),
            Num(r.sd),
            Num(r.hpd_lo),
            Num(r.hpd_hi),
            Num(r.ess)
        )?;
    }
    Ok(())
}

/// Per-event table; quantile columns are `NA` when per-draw values were not kept.
pub fn write_probs_table(w: &mut dyn Write, events: &EventSet, post: &PosteriorExcitation) -> std::io::Result<()> {
    let lo = post.quantile(0.025);
    let hi = post.quantile(0.975);
    writeln!(w, "id,x,y,t,mean_pi,pi_q025,pi_q975")?;
    for (i, e) in events.iter().enumerate() {
        write!(w, "{},{},{},{},{}", i, e.x[0], e.x[1], e.t, Num(post.mean_pi[i]))?;
        match (&lo, &hi) {
            (Some(lo), Some(hi)) => writeln!(w, ",{},{}", Num(lo[i]), Num(hi[i]))?,
            _ => writeln!(w, ",NA,NA")?,
        }
    }
    Ok(())
}

pub fn write_curve(w: &mut dyn Write, curve: &SmoothedCurve) -> std::io::Result<()> {
    writeln!(w, "t,smoothed_pi")?;
    for (t, v) in curve.time.iter().zip(&curve.value) {
        writeln!(w, "{t},{}", Num(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{run_chain, SamplerConfig};

    fn parse(text: &str, spec: &EventFileSpec) -> Result<EventFile> {
        parse_events(text, Path::new("mem.csv"), spec)
    }

    #[test]
    fn num_round_trips_and_stays_short() {
        for v in [0.0, -0.0, 1.0, 0.25, 1e-5, 9.99e-6, 1.0876668582531099e-242, 3e16, -7.5e-300, f64::MIN_POSITIVE] {
            let text = Num(v).to_string();
            assert_eq!(text.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{text}");
            assert!(text.len() <= 25, "{text}");
        }
        assert_eq!(Num(0.5).to_string(), "0.5");
        assert_eq!(Num(2e-7).to_string(), "2e-7");
    }

    #[test]
    fn unit_conversion() {
        let spec = EventFileSpec {
            distance_unit: DistanceUnit::M,
            time_unit: TimeUnit::S,
            ..Default::default()
        };
        let f = parse("x,y,t\n1000,250,86400\n0,-500,43200\n1,2,0\n", &spec).unwrap();
        let e = f.events.to_events();
        assert_eq!(e[0], Event::new(0.001, 0.002, 0.0));
        assert!((e[1].x[1] + 0.5).abs() < 1e-12 && (e[1].t - 0.5).abs() < 1e-12);
        assert!((e[2].x[0] - 1.0).abs() < 1e-12 && (e[2].t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epoch_times_are_shifted_and_columns_remapped() {
        let spec = EventFileSpec {
            delimiter: ';',
            x_column: "lon_m".into(),
            y_column: "lat_m".into(),
            t_column: "when".into(),
            distance_unit: DistanceUnit::M,
            time_unit: TimeUnit::S,
            time_origin: TimeOrigin::Epoch,
            ..Default::default()
        };
        let f = parse("when;lat_m;lon_m\n1600086400;0;0\n1600000000;10;20\n", &spec).unwrap();
        assert_eq!(f.events.ts(), &[0.0, 1.0]);
        assert_eq!(f.events.xs(), &[0.02, 0.0]);
        assert!((f.time_offset_days - 1_600_000_000.0 / 86_400.0).abs() < 1e-6);
    }

    #[test]
    fn unsorted_input_sorts_stably_and_remaps_parents() {
        let spec = EventFileSpec {
            parent_column: Some("parent".into()),
            ..Default::default()
        };
        let f = parse("x,y,t,parent\n1,0,2,3\n2,0,1,3\n3,0,0,0\n4,0,1,0\n", &spec).unwrap();
        assert_eq!(f.events.xs(), &[3.0, 2.0, 4.0, 1.0]);
        assert_eq!(f.parent.unwrap(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let spec = EventFileSpec::default();
        match parse("x,y,t\n1,2,3\n1,NaN,4\n", &spec) {
            Err(Error::Parse { line: 3, message, .. }) => assert!(message.contains("non-finite")),
            other => panic!("{other:?}"),
        }
        match parse("#window_end=9\nx,y,t\n1,2,3\n1,abc,4\n", &spec) {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("x,t\n1,2\n", &spec), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("x,y,t\n1,2,-1\n", &spec), Err(Error::Parse { line: 2, .. })));
        assert!(parse("x,y,t\n", &spec).is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let set = EventSet::new(vec![
            Event::new(0.1, 1.0 / 3.0, 0.0),
            Event::new(-2.5e-7, 7.0, std::f64::consts::PI),
        ])
        .unwrap()
        .with_window_end(10.0)
        .unwrap();
        write_events(&path, &set, Some(&[0, 1])).unwrap();
        let spec = EventFileSpec {
            parent_column: Some("parent".into()),
            ..Default::default()
        };
        let back = read_events(&path, &spec).unwrap();
        assert_eq!(back.events, set);
        assert_eq!(back.parent.unwrap(), vec![0, 1]);
        let again = dir.path().join("f.csv");
        write_events(&again, &back.events, None).unwrap();
        assert_eq!(read_events(&again, &EventFileSpec::default()).unwrap().events, set);
    }

    #[test]
    fn dedup_semantics() {
        let set = EventSet::new(vec![
            Event::new(0.0, 0.0, 0.0),
            Event::new(0.0, 0.0, 0.0),
            Event::new(5.0, 5.0, 1.0),
        ])
        .unwrap();
        assert_eq!(deduplicate(&set, 0.0, 0.0).unwrap(), set);
        assert_eq!(deduplicate(&set, 0.01, 0.01).unwrap().len(), 2);

        // A-B-C each 0.08 km apart, 0.5 min steps; thresholds 0.1 km, 1 min.
        let m = 1.0 / 1440.0;
        let chain = EventSet::new(vec![
            Event::new(0.0, 0.0, 0.0),
            Event::new(0.08, 0.0, 0.5 * m),
            Event::new(0.16, 0.0, 1.0 * m),
            Event::new(3.0, 3.0, 2.0),
            Event::new(9.0, 9.0, 4.0),
        ])
        .unwrap();
        assert_eq!(retained_indices(&chain, 0.1, 1.0 * m + 1e-9).unwrap(), vec![0, 2, 3, 4]);
        assert!(retained_indices(&chain, -1.0, 0.0).is_err());
    }

    fn small_chain() -> Chain {
        let set = EventSet::new((0..8).map(|i| Event::new(i as f64 * 0.1, 0.0, i as f64)).collect()).unwrap();
        let config = SamplerConfig::new(40, 5, 7);
        run_chain(&set, &PriorSpec::default(), &config, 0).unwrap()
    }

    #[test]
    fn chain_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.chain");
        let chain = small_chain();
        write_chain(&chain, &path).unwrap();
        assert_eq!(read_chain(&path).unwrap(), chain);
    }

    #[test]
    fn chain_truncation_and_version_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.chain");
        write_chain(&small_chain(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();

        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        fs::write(&path, cut).unwrap();
        let err = read_chain(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");

        fs::write(&path, text.replacen("st-hawkes-chain 1", "st-hawkes-chain 9", 1)).unwrap();
        let err = read_chain(&path).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");

        let mut empty = small_chain();
        empty.draws.clear();
        assert!(write_chain(&empty, &path).is_err());
    }

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let text = r#"
            [data]
            events = "events.csv"
            format = { distance_unit = "m", time_unit = "s", time_origin = "epoch" }
            dedup = { radius_m = 100.0, window_min = 1.0 }

            [sampler]
            iterations = 500
            burn_in = 100
            seed = 3
            backend = { kind = "threads+simd", threads = 4, lanes = 4 }

            [priors]
            theta = { mean = 0.0, sd = 5.0 }
            mu0 = { mean = 0.0, sd = 1.0 }
            omega = { mean = 0.0, sd = 10.0 }
            h_inv = { mean = 0.0, sd = 10.0 }
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.sampler.backend, crate::Backend::threaded_vectorized(4, 4));
        assert_eq!(c.data.format.time_origin, TimeOrigin::Epoch);
        assert_eq!(c.output.thin_to, 1000);
        let bad = text.replace("burn_in = 100", "burn_in = 100\nburnin = 3");
        assert!(toml::from_str::<RunConfig>(&bad).is_err());
        let back: RunConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
