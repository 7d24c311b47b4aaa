//! Execution strategies for the N² transformation-reduction.
//!
//! Every quantity this crate computes over pairs has the same shape: for each
//! target `n`, accumulate one or more running sums of a pairwise term over
//! sources `n'`, finalize the sums per target, and optionally add the
//! finalized values across targets. [`PairKernel`] describes the pairwise
//! term; the functions here decide how the loops run.
//!
//! Accumulation order is fixed by the configuration, never by scheduling:
//!
//! * targets are split into contiguous blocks, one per worker; block `b` owns
//!   `b⌊N/B⌋ .. (b+1)⌊N/B⌋` and the last block runs to `N`;
//! * on the lane path, the terms for one target are computed
//!   [`FILL_CHUNK`] sources at a time into a stack buffer, and source `s`
//!   goes to accumulator lane `(s − first) mod W`; the `W` lanes are collapsed
//!   left to right and the sources past the last full group are added after,
//!   in index order;
//! * per-block partials are combined in block order on the calling thread.
//!
//! Repeated calls with the same backend therefore return bitwise-identical
//! results. Besides the output, each worker stores `K·FILL_CHUNK + K·W` values.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanes::Lanes;

pub const SUPPORTED_LANES: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    /// Single thread, one pair at a time, `f64::exp`. The reference path.
    Serial,
    /// Single thread, lane-vectorized inner loop.
    Vectorized,
    /// Contiguous target blocks across threads, scalar inner loop.
    Threaded,
    /// Threads plus lane-vectorized inner loops.
    ThreadedVectorized,
}

impl BackendKind {
    pub fn is_threaded(self) -> bool {
        matches!(self, BackendKind::Threaded | BackendKind::ThreadedVectorized)
    }

    pub fn is_vectorized(self) -> bool {
        matches!(self, BackendKind::Vectorized | BackendKind::ThreadedVectorized)
    }

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Serial => "serial",
            BackendKind::Vectorized => "simd",
            BackendKind::Threaded => "threads",
            BackendKind::ThreadedVectorized => "threads+simd",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for BackendKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for BackendKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(BackendKind::Serial),
            "simd" | "vectorized" => Ok(BackendKind::Vectorized),
            "threads" | "threaded" => Ok(BackendKind::Threaded),
            "threads+simd" | "threaded-vectorized" => Ok(BackendKind::ThreadedVectorized),
            other => Err(Error::InvalidBackend(format!(
                "unknown backend '{other}' (expected serial, simd, threads or threads+simd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Backend {
    pub kind: BackendKind,
    /// Worker threads; ignored by the single-threaded kinds.
    #[serde(default = "one")]
    pub threads: usize,
    /// Lane width of the inner loop; ignored by the scalar kinds.
    #[serde(default = "one")]
    pub lanes: usize,
}

fn one() -> usize {
    1
}

impl Default for Backend {
    fn default() -> Self {
        Backend::serial()
    }
}

impl Backend {
    pub fn serial() -> Self {
        Backend {
            kind: BackendKind::Serial,
            threads: 1,
            lanes: 1,
        }
    }

    pub fn vectorized(lanes: usize) -> Self {
        Backend {
            kind: BackendKind::Vectorized,
            threads: 1,
            lanes,
        }
    }

    pub fn threaded(threads: usize) -> Self {
        Backend {
            kind: BackendKind::Threaded,
            threads,
            lanes: 1,
        }
    }

    pub fn threaded_vectorized(threads: usize, lanes: usize) -> Self {
        Backend {
            kind: BackendKind::ThreadedVectorized,
            threads,
            lanes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::InvalidBackend("thread count must be >= 1".into()));
        }
        if !SUPPORTED_LANES.contains(&self.lanes) {
            return Err(Error::InvalidBackend(format!(
                "lane width {} not in {{1, 2, 4, 8}}",
                self.lanes
            )));
        }
        Ok(())
    }

    /// Threads actually used for `n` targets: never more than configured or
    /// than there are targets.
    pub fn worker_count(&self, n: usize) -> usize {
        if self.kind.is_threaded() {
            self.threads.min(n).max(1)
        } else {
            1
        }
    }

    pub fn lane_width(&self) -> usize {
        if self.kind.is_vectorized() {
            self.lanes
        } else {
            1
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BackendKind::Serial => write!(f, "serial"),
            BackendKind::Vectorized => write!(f, "simd(lanes={})", self.lanes),
            BackendKind::Threaded => write!(f, "threads(n={})", self.threads),
            BackendKind::ThreadedVectorized => {
                write!(f, "threads+simd(n={}, lanes={})", self.threads, self.lanes)
            }
        }
    }
}

/// A pairwise term accumulated into `K` running sums per target.
pub trait PairKernel<const K: usize>: Sync {
    /// Number of targets (and sources).
    fn len(&self) -> usize;

    /// Sources that may contribute a nonzero term to `target`. Sources outside
    /// the range must contribute exactly `+0.0`, so skipping them leaves every
    /// sum bitwise unchanged.
    fn sources(&self, target: usize) -> Range<usize> {
        let _ = target;
        0..self.len()
    }

    /// Reference path: adds the terms of one pair using `f64::exp`.
    fn accumulate(&self, target: usize, source: usize, acc: &mut [f64; K]);

    /// Lane path: writes term `k` of source `sources.start + i` to
    /// `terms[k][i]`, computed with [`crate::lanes::exp_approx`]. Called with at
    /// most [`FILL_CHUNK`] sources.
    fn fill_terms(&self, target: usize, sources: Range<usize>, terms: &mut [[f64; FILL_CHUNK]; K]);
}

/// Sources per lane-path buffer fill; a multiple of every lane width.
pub const FILL_CHUNK: usize = 256;

/// Block `b` of `blocks` over `0..n`.
pub fn block_range(n: usize, blocks: usize, b: usize) -> Range<usize> {
    let size = n / blocks;
    let start = b * size;
    let end = if b + 1 == blocks { n } else { start + size };
    start..end
}

#[inline(always)]
fn scalar_sums<const K: usize, P: PairKernel<K>>(kernel: &P, target: usize) -> [f64; K] {
    let mut acc = [0.0; K];
    for s in kernel.sources(target) {
        kernel.accumulate(target, s, &mut acc);
    }
    acc
}

#[inline(always)]
fn lane_sums<const K: usize, const W: usize, P: PairKernel<K>>(
    kernel: &P,
    target: usize,
    buf: &mut [[f64; FILL_CHUNK]; K],
) -> [f64; K] {
    let range = kernel.sources(target);
    let mut acc = [Lanes::<W>::splat(0.0); K];
    let mut s = range.start;
    let mut filled = 0;
    while s < range.end {
        let end = (s + FILL_CHUNK).min(range.end);
        filled = end - s;
        kernel.fill_terms(target, s..end, buf);
        for k in 0..K {
            for group in buf[k][..filled].chunks_exact(W) {
                acc[k] = acc[k] + Lanes::load(group);
            }
        }
        s = end;
    }
    // Only the last fill can leave a partial group.
    let tail = filled - filled % W;
    let mut out = [0.0; K];
    for k in 0..K {
        out[k] = acc[k].sum_in_order();
        for &v in &buf[k][tail..filled] {
            out[k] += v;
        }
    }
    out
}

#[inline(always)]
fn run_block_lanes<const K: usize, const W: usize, P, F>(kernel: &P, range: Range<usize>, visit: &mut F)
where
    P: PairKernel<K>,
    F: FnMut(usize, [f64; K]),
{
    let mut buf = [[0.0; FILL_CHUNK]; K];
    for n in range {
        visit(n, lane_sums::<K, W, P>(kernel, n, &mut buf));
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn run_block_lanes_avx2<const K: usize, const W: usize, P, F>(
    kernel: &P,
    range: Range<usize>,
    visit: &mut F,
) where
    P: PairKernel<K>,
    F: FnMut(usize, [f64; K]),
{
    run_block_lanes::<K, W, P, F>(kernel, range, visit)
}

fn dispatch_lanes<const K: usize, const W: usize, P, F>(kernel: &P, range: Range<usize>, visit: &mut F)
where
    P: PairKernel<K>,
    F: FnMut(usize, [f64; K]),
{
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { run_block_lanes_avx2::<K, W, P, F>(kernel, range, visit) };
            return;
        }
    }
    run_block_lanes::<K, W, P, F>(kernel, range, visit)
}

/// Runs one block of targets on the current thread, calling `visit` in
/// target order.
fn run_block<const K: usize, P, F>(kernel: &P, backend: &Backend, range: Range<usize>, visit: &mut F)
where
    P: PairKernel<K>,
    F: FnMut(usize, [f64; K]),
{
    if !backend.kind.is_vectorized() {
        for n in range {
            visit(n, scalar_sums::<K, P>(kernel, n));
        }
        return;
    }
    match backend.lanes {
        1 => dispatch_lanes::<K, 1, P, F>(kernel, range, visit),
        2 => dispatch_lanes::<K, 2, P, F>(kernel, range, visit),
        4 => dispatch_lanes::<K, 4, P, F>(kernel, range, visit),
        8 => dispatch_lanes::<K, 8, P, F>(kernel, range, visit),
        _ => unreachable!("lane width validated"),
    }
}

/// Runs `work` once per block, in parallel when the backend is threaded, and
/// returns the block results in block order. Block 0 runs on the caller.
fn per_block<R, W>(n: usize, backend: &Backend, work: W) -> Vec<R>
where
    R: Send,
    W: Fn(Range<usize>) -> R + Sync,
{
    let blocks = backend.worker_count(n);
    if blocks == 1 {
        return vec![work(0..n)];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (1..blocks)
            .map(|b| {
                let work = &work;
                scope.spawn(move || work(block_range(n, blocks, b)))
            })
            .collect();
        let mut out = Vec::with_capacity(blocks);
        out.push(work(block_range(n, blocks, 0)));
        for h in handles {
            out.push(h.join().expect("pair-reduce worker panicked"));
        }
        out
    })
}

/// Per-target running sums.
pub fn pair_reduce<const K: usize, P: PairKernel<K>>(
    kernel: &P,
    backend: &Backend,
) -> Result<Vec<[f64; K]>> {
    backend.validate()?;
    let n = kernel.len();
    if n == 0 {
        return Err(Error::InvalidEvents("no targets".into()));
    }
    let parts = per_block(n, backend, |range| {
        let mut out = Vec::with_capacity(range.len());
        run_block(kernel, backend, range, &mut |_, sums| out.push(sums));
        out
    });
    Ok(parts.concat())
}

/// Finalizes each target's sums and adds the finalized values: within a
/// block in target order, then across blocks in block order. When
/// `keep_per_target` is set the finalized values are returned as well.
pub fn pair_reduce_total<const K: usize, P, F>(
    kernel: &P,
    backend: &Backend,
    finalize: F,
    keep_per_target: bool,
) -> Result<(f64, Option<Vec<f64>>)>
where
    P: PairKernel<K>,
    F: Fn(usize, [f64; K]) -> f64 + Sync,
{
    backend.validate()?;
    let n = kernel.len();
    if n == 0 {
        return Err(Error::InvalidEvents("no targets".into()));
    }
    let parts = per_block(n, backend, |range| {
        let mut partial = 0.0;
        let mut kept = Vec::with_capacity(if keep_per_target { range.len() } else { 0 });
        run_block(kernel, backend, range, &mut |target, sums| {
            let v = finalize(target, sums);
            partial += v;
            if keep_per_target {
                kept.push(v);
            }
        });
        (partial, kept)
    });
    let mut total = 0.0;
    let mut per_target = keep_per_target.then(|| Vec::with_capacity(n));
    for (partial, kept) in parts {
        total += partial;
        if let Some(all) = per_target.as_mut() {
            all.extend(kept);
        }
    }
    Ok((total, per_target))
}

#[inline(always)]
fn lane_sum<const W: usize>(values: &[f64]) -> f64 {
    let mut acc = Lanes::<W>::splat(0.0);
    let mut chunks = values.chunks_exact(W);
    for c in &mut chunks {
        acc = acc + Lanes::load(c);
    }
    let mut s = acc.sum_in_order();
    for &v in chunks.remainder() {
        s += v;
    }
    s
}

fn block_sum(values: &[f64], backend: &Backend) -> f64 {
    match backend.lane_width() {
        1 => values.iter().fold(0.0, |a, &v| a + v),
        2 => lane_sum::<2>(values),
        4 => lane_sum::<4>(values),
        8 => lane_sum::<8>(values),
        _ => unreachable!("lane width validated"),
    }
}

/// Sums `values` using the backend's block and lane scheme.
pub fn reduce_all(values: &[f64], backend: &Backend) -> Result<f64> {
    backend.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot reduce an empty vector".into()));
    }
    let parts = per_block(values.len(), backend, |range| block_sum(&values[range], backend));
    Ok(parts.iter().fold(0.0, |a, &p| a + p))
}
