//! Probabilities that each event was triggered rather than background.
//!
//! `π_n = ξ_n / (μ_n + ξ_n)` where `μ_n` is the background rate and `ξ_n` the
//! summed triggering rate at event `n`. Both sums come from a single pass over
//! sources with two accumulators per target.

use std::io::Write;

use std::ops::Range;

use crate::backend::{pair_reduce, Backend, PairKernel, FILL_CHUNK};
use crate::error::{Error, Result};
use crate::likelihood::{background_approx, fill_pairs, scalar_deltas, trigger_approx};
use crate::model::{EventSet, PairConstants, Params};

/// Default cap on retained per-draw entries (draws × events).
pub const DEFAULT_RETENTION_CAP: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationVector {
    pub pi: Vec<f64>,
    /// Background component `μ_n`.
    pub mu: Vec<f64>,
    /// Self-excitatory component `ξ_n`.
    pub xi: Vec<f64>,
}

struct SplitKernel<'a> {
    events: &'a EventSet,
    c: PairConstants,
}

impl PairKernel<2> for SplitKernel<'_> {
    fn len(&self) -> usize {
        self.events.len()
    }

    #[inline(always)]
    fn accumulate(&self, target: usize, source: usize, acc: &mut [f64; 2]) {
        let (dx, dy, dt) = scalar_deltas(self.events, target, source);
        acc[0] += self.c.background(dx, dy, dt);
        acc[1] += self.c.trigger(dx, dy, dt);
    }

    #[inline(always)]
    fn fill_terms(&self, target: usize, sources: Range<usize>, terms: &mut [[f64; FILL_CHUNK]; 2]) {
        let c = &self.c;
        fill_pairs(self.events, target, sources, terms, |dx, dy, dt| {
            [background_approx(c, dx, dy, dt), trigger_approx(c, dx, dy, dt)]
        });
    }
}

pub fn excitation_probabilities(
    events: &EventSet,
    params: &Params,
    backend: &Backend,
) -> Result<ExcitationVector> {
    params.validate()?;
    let kernel = SplitKernel {
        events,
        c: PairConstants::new(params),
    };
    let sums = pair_reduce(&kernel, backend)?;
    let n = sums.len();
    let mut out = ExcitationVector {
        pi: Vec::with_capacity(n),
        mu: Vec::with_capacity(n),
        xi: Vec::with_capacity(n),
    };
    for [bg, xi] in sums {
        let mu = params.mu0 * bg;
        out.pi.push(xi / (mu + xi));
        out.mu.push(mu);
        out.xi.push(xi);
    }
    Ok(out)
}

/// Evenly spaced indices selecting at most `thin_to` of `len` items,
/// always including the first.
pub fn thin_indices(len: usize, thin_to: usize) -> Vec<usize> {
    if len <= thin_to {
        return (0..len).collect();
    }
    (0..thin_to).map(|k| k * len / thin_to).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorExcitation {
    /// Indices into the supplied draws that were used.
    pub draw_indices: Vec<usize>,
    /// Retained `π` vectors, one per used draw, when within the retention cap.
    pub per_draw: Option<Vec<Vec<f64>>>,
    pub mean_pi: Vec<f64>,
}

impl PosteriorExcitation {
    /// Per-event sample quantile of π across retained draws (type-7
    /// interpolation). `None` when per-draw vectors were not retained.
    pub fn quantile(&self, q: f64) -> Option<Vec<f64>> {
        let draws = self.per_draw.as_ref()?;
        let n = self.mean_pi.len();
        let mut column = Vec::with_capacity(draws.len());
        Some(
            (0..n)
                .map(|i| {
                    column.clear();
                    column.extend(draws.iter().map(|d| d[i]));
                    column.sort_by(f64::total_cmp);
                    crate::diagnostics::quantile_sorted(&column, q)
                })
                .collect(),
        )
    }
}

#[derive(Default)]
pub struct PosteriorOptions<'w> {
    /// Retain per-draw vectors only when draws × events stays below this.
    pub retention_cap: Option<usize>,
    /// Optional sink receiving one CSV row of π values per used draw.
    pub per_draw_sink: Option<&'w mut dyn Write>,
}

/// Posterior sample of π over an evenly thinned subset of `draws`.
pub fn posterior_excitation(
    events: &EventSet,
    draws: &[Params],
    backend: &Backend,
    thin_to: usize,
) -> Result<PosteriorExcitation> {
    posterior_excitation_with(events, draws, backend, thin_to, PosteriorOptions::default())
}

pub fn posterior_excitation_with(
    events: &EventSet,
    draws: &[Params],
    backend: &Backend,
    thin_to: usize,
    mut options: PosteriorOptions<'_>,
) -> Result<PosteriorExcitation> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("no posterior draws".into()));
    }
    if thin_to == 0 {
        return Err(Error::InvalidArgument("thin_to must be >= 1".into()));
    }
    backend.validate()?;
    let draw_indices = thin_indices(draws.len(), thin_to);
    let n = events.len();
    let cap = options.retention_cap.unwrap_or(DEFAULT_RETENTION_CAP);
    let retain = draw_indices.len().saturating_mul(n) <= cap;
    let mut per_draw = retain.then(|| Vec::with_capacity(draw_indices.len()));
    let mut sums = vec![0.0; n];

    for &index in &draw_indices {
        let ex = excitation_probabilities(events, &draws[index], backend).map_err(|e| {
            Error::Indexed {
                what: "draw",
                index,
                source: Box::new(e),
            }
        })?;
        for (s, p) in sums.iter_mut().zip(&ex.pi) {
            *s += p;
        }
        if let Some(sink) = options.per_draw_sink.as_deref_mut() {
            write_row(sink, index, &ex.pi).map_err(|e| Error::io("per-draw output", e))?;
        }
        if let Some(kept) = per_draw.as_mut() {
            kept.push(ex.pi);
        }
    }
    let count = draw_indices.len() as f64;
    let mean_pi = sums.into_iter().map(|s| (s / count).clamp(0.0, 1.0)).collect();
    Ok(PosteriorExcitation {
        draw_indices,
        per_draw,
        mean_pi,
    })
}

fn write_row(sink: &mut dyn Write, index: usize, pi: &[f64]) -> std::io::Result<()> {
    write!(sink, "{index}")?;
    for p in pi {
        write!(sink, ",{}", crate::io::Num(*p))?;
    }
    writeln!(sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Event;

    fn params() -> Params {
        Params::new(0.8, 1.0, 2.0, 0.3, 1.5, 0.5).unwrap()
    }

    fn three_events() -> EventSet {
        EventSet::new(vec![
            Event::new(0.0, 0.0, 0.0),
            Event::new(0.0, 0.0, 1.0),
            Event::new(5.0, 5.0, 1.5),
        ])
        .unwrap()
    }

    #[test]
    fn earliest_event_is_background() {
        let ex = excitation_probabilities(&three_events(), &params(), &Backend::serial()).unwrap();
        assert_eq!(ex.pi[0], 0.0);
        assert_eq!(ex.xi[0], 0.0);
        assert!(ex.pi[1] > 0.0 && ex.pi[1] < 1.0);
        for i in 0..3 {
            assert_eq!(ex.pi[i], ex.xi[i] / (ex.mu[i] + ex.xi[i]));
        }
    }

    #[test]
    fn zero_theta_gives_zero_probabilities() {
        let p = Params { theta: 0.0, ..params() };
        let ex = excitation_probabilities(&three_events(), &p, &Backend::vectorized(2)).unwrap();
        assert!(ex.pi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn thinning_indices() {
        assert_eq!(thin_indices(3, 10), vec![0, 1, 2]);
        assert_eq!(thin_indices(10, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(thin_indices(10, 1), vec![0]);
        assert_eq!(thin_indices(9000, 1000).len(), 1000);
    }

    #[test]
    fn single_draw_posterior_equals_draw() {
        let set = three_events();
        let post = posterior_excitation(&set, &[params()], &Backend::serial(), 1).unwrap();
        let ex = excitation_probabilities(&set, &params(), &Backend::serial()).unwrap();
        assert_eq!(post.mean_pi, ex.pi);
        assert_eq!(post.quantile(0.5).unwrap(), ex.pi);
    }

    #[test]
    fn retention_cap_and_sink() {
        let set = three_events();
        let draws = vec![params(); 4];
        let mut buf = Vec::new();
        let post = posterior_excitation_with(
            &set,
            &draws,
            &Backend::serial(),
            2,
            PosteriorOptions {
                retention_cap: Some(5),
                per_draw_sink: Some(&mut buf),
            },
        )
        .unwrap();
        assert!(post.per_draw.is_none());
        assert!(post.quantile(0.5).is_none());
        assert_eq!(post.draw_indices, vec![0, 2]);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("0,0,"));
    }

    #[test]
    fn errors_carry_draw_index() {
        let set = three_events();
        let draws = vec![params(), Params { h: -1.0, ..params() }];
        match posterior_excitation(&set, &draws, &Backend::serial(), 10) {
            Err(Error::Indexed { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(posterior_excitation(&set, &[], &Backend::serial(), 1).is_err());
        assert!(posterior_excitation(&set, &draws, &Backend::serial(), 0).is_err());
    }
}
