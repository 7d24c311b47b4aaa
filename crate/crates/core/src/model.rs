//! Model types and the scalar building blocks shared by every backend.
//!
//! The conditional intensity at `(x, t)` is
//!
//! ```text
//! λ(x, t) = μ0 Σ_n' k_bg(x − x_n', t − t_n') + Σ_{t_n' < t} g(x − x_n', t − t_n')
//! k_bg(v, s) = φ(v₁/τx) φ(v₂/τx) φ(s/τt) / (τx² τt)
//! g(v, s)    = θ ω e^{−ω s} φ(v₁/h) φ(v₂/h) / h²
//! ```
//!
//! The triggering kernel is a unit-mass exponential density in time times an
//! isotropic Gaussian density in space, scaled by θ. Each event therefore
//! contributes exactly θ expected offspring, which is what the closed-form
//! compensator assumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of the model.
pub const SPATIAL_DIM: usize = 2;

pub(crate) const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub(crate) const INV_2PI: f64 = 0.159_154_943_091_895_35;
/// (2π)^{-3/2}
pub(crate) const INV_2PI_POW_1_5: f64 = 0.063_493_635_934_240_97;

/// Standard normal density.
#[inline]
pub fn gaussian_kernel_1d(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// `ln Φ(z)`, accurate in the lower tail where `Φ(z)` underflows.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        normal_cdf(z).ln()
    } else {
        // Mills-ratio asymptotic expansion.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// A spatiotemporal observation in canonical units (kilometers, days since
/// window start).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub x: [f64; 2],
    pub t: f64,
}

impl Event {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Event { x: [x, y], t }
    }

    fn check(&self, index: usize) -> Result<()> {
        if !(self.x[0].is_finite() && self.x[1].is_finite()) {
            return Err(Error::InvalidEvents(format!(
                "event {index} has non-finite coordinates"
            )));
        }
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(Error::InvalidEvents(format!(
                "event {index} has time {} (must be finite and >= 0)",
                self.t
            )));
        }
        Ok(())
    }
}

/// A nonempty, time-sorted collection of events stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSet {
    x: Vec<f64>,
    y: Vec<f64>,
    t: Vec<f64>,
    window_end: f64,
}

impl EventSet {
    /// Builds an event set from events already sorted by time.
    pub fn new(events: Vec<Event>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::InvalidEvents("event set is empty".into()));
        }
        for (i, e) in events.iter().enumerate() {
            e.check(i)?;
        }
        if let Some(i) = events.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(Error::InvalidEvents(format!(
                "events are not sorted by time at index {}",
                i + 1
            )));
        }
        let window_end = events[events.len() - 1].t;
        Ok(EventSet {
            x: events.iter().map(|e| e.x[0]).collect(),
            y: events.iter().map(|e| e.x[1]).collect(),
            t: events.iter().map(|e| e.t).collect(),
            window_end,
        })
    }

    /// Sorts by time (stable for ties) before building the set.
    pub fn from_unsorted(mut events: Vec<Event>) -> Result<Self> {
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self::new(events)
    }

    /// Sets the end of the observation window; must not precede the last event.
    pub fn with_window_end(mut self, window_end: f64) -> Result<Self> {
        let last = self.t[self.t.len() - 1];
        if !window_end.is_finite() || window_end < last {
            return Err(Error::InvalidEvents(format!(
                "window end {window_end} precedes last event time {last}"
            )));
        }
        self.window_end = window_end;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn window_end(&self) -> f64 {
        self.window_end
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn ts(&self) -> &[f64] {
        &self.t
    }

    pub fn event(&self, i: usize) -> Event {
        Event::new(self.x[i], self.y[i], self.t[i])
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Event> + '_ {
        (0..self.len()).map(move |i| self.event(i))
    }

    pub fn to_events(&self) -> Vec<Event> {
        self.iter().collect()
    }

    /// Index of the first event whose time is `>= t`. Sources strictly
    /// preceding `t` are exactly `0..prefix_before(t)`.
    pub fn prefix_before(&self, t: f64) -> usize {
        self.t.partition_point(|&s| s < t)
    }
}

/// The six model parameters `(μ0, τx, τt, θ, ω, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Background weight.
    pub mu0: f64,
    /// Background spatial bandwidth (distance).
    pub tau_x: f64,
    /// Background temporal bandwidth (time).
    pub tau_t: f64,
    /// Self-excitation weight: expected offspring per event.
    pub theta: f64,
    /// Excitation temporal rate; `1/ω` is the temporal lengthscale.
    pub omega: f64,
    /// Excitation spatial bandwidth (distance).
    pub h: f64,
}

impl Params {
    pub fn new(mu0: f64, tau_x: f64, tau_t: f64, theta: f64, omega: f64, h: f64) -> Result<Self> {
        let p = Params {
            mu0,
            tau_x,
            tau_t,
            theta,
            omega,
            h,
        };
        p.validate()?;
        Ok(p)
    }

    /// All parameters must be positive and finite, except θ which may be 0
    /// (the pure-background model).
    pub fn validate(&self) -> Result<()> {
        let strict = [
            ("mu0", self.mu0),
            ("tau_x", self.tau_x),
            ("tau_t", self.tau_t),
            ("omega", self.omega),
            ("h", self.h),
        ];
        for (name, v) in strict {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {v} (must be positive and finite)"
                )));
            }
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "theta = {} (must be nonnegative and finite)",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Per-parameter constants folded out of the pair kernels.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairConstants {
    /// `1 / (τx² τt (2π)^{3/2})`
    pub bg_norm: f64,
    /// `1 / (2 τx²)`
    pub bg_space: f64,
    /// `1 / (2 τt²)`
    pub bg_time: f64,
    /// `θ ω / (2π h²)`
    pub trig_norm: f64,
    /// `1 / (2 h²)`
    pub trig_space: f64,
    pub omega: f64,
}

impl PairConstants {
    pub fn new(p: &Params) -> Self {
        PairConstants {
            bg_norm: INV_2PI_POW_1_5 / (p.tau_x * p.tau_x * p.tau_t),
            bg_space: 0.5 / (p.tau_x * p.tau_x),
            bg_time: 0.5 / (p.tau_t * p.tau_t),
            trig_norm: p.theta * p.omega * INV_2PI / (p.h * p.h),
            trig_space: 0.5 / (p.h * p.h),
            omega: p.omega,
        }
    }

    #[inline(always)]
    pub fn background(&self, dx: f64, dy: f64, dt: f64) -> f64 {
        self.bg_norm * (-(dx * dx + dy * dy) * self.bg_space - dt * dt * self.bg_time).exp()
    }

    /// `dt = t_target − t_source`; zero unless `dt > 0`.
    #[inline(always)]
    pub fn trigger(&self, dx: f64, dy: f64, dt: f64) -> f64 {
        if dt > 0.0 {
            self.trig_norm * (-self.omega * dt - (dx * dx + dy * dy) * self.trig_space).exp()
        } else {
            0.0
        }
    }
}

/// One source's contribution to the background rate at `target`, without
/// the μ0 factor.
pub fn background_pair_rate(target: &Event, source: &Event, params: &Params) -> f64 {
    let c = PairConstants::new(params);
    c.background(
        target.x[0] - source.x[0],
        target.x[1] - source.x[1],
        target.t - source.t,
    )
}

/// One source's triggering contribution at `target`; exactly zero unless the
/// source strictly precedes the target.
pub fn trigger_pair_rate(target: &Event, source: &Event, params: &Params) -> f64 {
    let c = PairConstants::new(params);
    c.trigger(
        target.x[0] - source.x[0],
        target.x[1] - source.x[1],
        target.t - source.t,
    )
}

#[inline]
pub(crate) fn compensator_unchecked(t: f64, window_end: f64, params: &Params) -> f64 {
    let bg = normal_cdf((window_end - t) / params.tau_t) - normal_cdf(-t / params.tau_t);
    let trig = -(-params.omega * (window_end - t)).exp_m1();
    params.mu0 * bg + params.theta * trig
}

/// The integral of event `event`'s contribution to the intensity over space
/// and `[0, window_end]`.
pub fn compensator_term(event: &Event, window_end: f64, params: &Params) -> Result<f64> {
    if !(window_end >= event.t) {
        return Err(Error::InvalidArgument(format!(
            "window end {window_end} precedes event time {}",
            event.t
        )));
    }
    Ok(compensator_unchecked(event.t, window_end, params))
}
