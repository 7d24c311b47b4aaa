//! Log-likelihood of the spatiotemporal Hawkes model.
//!
//! `ℓ(Θ) = Σ_n [ log λ_n − Λ_n ]` with `λ_n = Σ_n' λ_nn'` summing the
//! background and triggering pair rates over all sources. Each target's
//! inner sum is one transformation-reduction; the outer sum is a second
//! reduction. Both run through [`crate::backend`].
//!
//! Rates are summed directly (no log-sum-exp). Since μ0 > 0 and the background
//! sum includes the `n' = n` self-term, every `λ_n` has a strictly positive
//! floor, so underflow needs extreme bandwidths. When it does happen the
//! result is flagged invalid with `logLik = −∞` instead of erroring, which
//! lets the sampler reject such proposals.

use std::ops::Range;

use crate::backend::{pair_reduce_total, Backend, PairKernel, FILL_CHUNK};
use crate::error::{Error, Result};
use crate::lanes::exp_approx;
use crate::model::{compensator_unchecked, EventSet, PairConstants, Params};

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodResult {
    pub log_lik: f64,
    /// `ℓ_n` per event, when requested.
    pub per_event: Option<Vec<f64>>,
    /// False when some `λ_n` is nonpositive or not finite.
    pub valid: bool,
}

/// Full pair rate `μ0 k_bg + g` over all sources.
pub(crate) struct IntensityKernel<'a> {
    pub events: &'a EventSet,
    pub c: PairConstants,
    pub mu0: f64,
}

impl<'a> IntensityKernel<'a> {
    pub fn new(events: &'a EventSet, params: &Params) -> Self {
        IntensityKernel {
            events,
            c: PairConstants::new(params),
            mu0: params.mu0,
        }
    }
}

#[inline(always)]
pub(crate) fn scalar_deltas(events: &EventSet, target: usize, source: usize) -> (f64, f64, f64) {
    (
        events.xs()[target] - events.xs()[source],
        events.ys()[target] - events.ys()[source],
        events.ts()[target] - events.ts()[source],
    )
}

/// Writes `f(dx, dy, dt)` for every source in `sources` into `terms`. A plain
/// loop over contiguous slices, so it vectorizes with `f` inlined.
#[inline(always)]
pub(crate) fn fill_pairs<const K: usize, F>(
    events: &EventSet,
    target: usize,
    sources: Range<usize>,
    terms: &mut [[f64; FILL_CHUNK]; K],
    f: F,
) where
    F: Fn(f64, f64, f64) -> [f64; K],
{
    let n = sources.len().min(FILL_CHUNK);
    let xs = &events.xs()[sources.clone()][..n];
    let ys = &events.ys()[sources.clone()][..n];
    let ts = &events.ts()[sources][..n];
    let (xt, yt, tt) = (events.xs()[target], events.ys()[target], events.ts()[target]);
    for i in 0..n {
        let v = f(xt - xs[i], yt - ys[i], tt - ts[i]);
        for k in 0..K {
            terms[k][i] = v[k];
        }
    }
}

#[inline(always)]
pub(crate) fn background_approx(c: &PairConstants, dx: f64, dy: f64, dt: f64) -> f64 {
    let r2 = dx * dx + dy * dy;
    c.bg_norm * exp_approx(-r2 * c.bg_space - dt * dt * c.bg_time)
}

#[inline(always)]
pub(crate) fn trigger_approx(c: &PairConstants, dx: f64, dy: f64, dt: f64) -> f64 {
    let r2 = dx * dx + dy * dy;
    let v = c.trig_norm * exp_approx(-c.omega * dt - r2 * c.trig_space);
    if dt > 0.0 {
        v
    } else {
        0.0
    }
}

impl PairKernel<1> for IntensityKernel<'_> {
    fn len(&self) -> usize {
        self.events.len()
    }

    #[inline(always)]
    fn accumulate(&self, target: usize, source: usize, acc: &mut [f64; 1]) {
        let (dx, dy, dt) = scalar_deltas(self.events, target, source);
        acc[0] += self.mu0 * self.c.background(dx, dy, dt) + self.c.trigger(dx, dy, dt);
    }

    #[inline(always)]
    fn fill_terms(&self, target: usize, sources: Range<usize>, terms: &mut [[f64; FILL_CHUNK]; 1]) {
        let (c, mu0) = (&self.c, self.mu0);
        fill_pairs(self.events, target, sources, terms, |dx, dy, dt| {
            [mu0 * background_approx(c, dx, dy, dt) + trigger_approx(c, dx, dy, dt)]
        });
    }
}

/// Background pair rate without μ0, over all sources.
pub(crate) struct BackgroundKernel<'a> {
    pub events: &'a EventSet,
    pub c: PairConstants,
}

impl PairKernel<1> for BackgroundKernel<'_> {
    fn len(&self) -> usize {
        self.events.len()
    }

    #[inline(always)]
    fn accumulate(&self, target: usize, source: usize, acc: &mut [f64; 1]) {
        let (dx, dy, dt) = scalar_deltas(self.events, target, source);
        acc[0] += self.c.background(dx, dy, dt);
    }

    #[inline(always)]
    fn fill_terms(&self, target: usize, sources: Range<usize>, terms: &mut [[f64; FILL_CHUNK]; 1]) {
        let c = &self.c;
        fill_pairs(self.events, target, sources, terms, |dx, dy, dt| [background_approx(c, dx, dy, dt)]);
    }
}

/// Triggering pair rate, restricted to strictly earlier sources. With θ = 1
/// in the constants this yields the θ-free trigger sums.
pub(crate) struct TriggerKernel<'a> {
    pub events: &'a EventSet,
    pub c: PairConstants,
}

impl PairKernel<1> for TriggerKernel<'_> {
    fn len(&self) -> usize {
        self.events.len()
    }

    fn sources(&self, target: usize) -> Range<usize> {
        0..self.events.prefix_before(self.events.ts()[target])
    }

    #[inline(always)]
    fn accumulate(&self, target: usize, source: usize, acc: &mut [f64; 1]) {
        let (dx, dy, dt) = scalar_deltas(self.events, target, source);
        acc[0] += self.c.trigger(dx, dy, dt);
    }

    #[inline(always)]
    fn fill_terms(&self, target: usize, sources: Range<usize>, terms: &mut [[f64; FILL_CHUNK]; 1]) {
        let c = &self.c;
        fill_pairs(self.events, target, sources, terms, |dx, dy, dt| [trigger_approx(c, dx, dy, dt)]);
    }
}

/// `ℓ_n` from the inner sum; `−∞` or NaN when `λ_n` is unusable.
#[inline]
fn event_term(lambda: f64, t: f64, window_end: f64, params: &Params) -> f64 {
    lambda.ln() - compensator_unchecked(t, window_end, params)
}

pub fn log_likelihood(events: &EventSet, params: &Params, backend: &Backend) -> Result<LikelihoodResult> {
    log_likelihood_with(events, params, backend, false)
}

/// As [`log_likelihood`], optionally keeping the per-event terms `ℓ_n`.
pub fn log_likelihood_with(
    events: &EventSet,
    params: &Params,
    backend: &Backend,
    keep_per_event: bool,
) -> Result<LikelihoodResult> {
    params.validate()?;
    let kernel = IntensityKernel::new(events, params);
    let ts = events.ts();
    let window_end = events.window_end();
    let (total, per_event) = pair_reduce_total(
        &kernel,
        backend,
        |n, sums| event_term(sums[0], ts[n], window_end, params),
        keep_per_event,
    )?;
    Ok(finish(total, per_event))
}

pub(crate) fn finish(total: f64, per_event: Option<Vec<f64>>) -> LikelihoodResult {
    if total.is_finite() {
        LikelihoodResult {
            log_lik: total,
            per_event,
            valid: true,
        }
    } else {
        LikelihoodResult {
            log_lik: f64::NEG_INFINITY,
            per_event,
            valid: false,
        }
    }
}

/// Evaluates several parameter vectors against the same data.
pub fn log_likelihood_batch(
    events: &EventSet,
    params_list: &[Params],
    backend: &Backend,
) -> Result<Vec<LikelihoodResult>> {
    if params_list.is_empty() {
        return Err(Error::InvalidArgument("empty parameter list".into()));
    }
    backend.validate()?;
    params_list
        .iter()
        .enumerate()
        .map(|(index, p)| {
            log_likelihood(events, p, backend).map_err(|e| Error::Indexed {
                what: "parameter set",
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
