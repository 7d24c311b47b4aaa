//! Synthetic data: a branching cluster process with known parameters, and
//! uniform random clouds for benchmarking.
//!
//! The cluster process draws immigrants from a homogeneous Poisson process on
//! the window. Every event then has `Poisson(θ)` children, each displaced by
//! `Exp(ω)` in time and `N(0, h²)` in each spatial coordinate. Children after
//! the end of the window are dropped. Children outside the spatial rectangle
//! are kept, since the model's spatial domain is the whole plane.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Event, EventSet, Params};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Events occur on `(0, t_end)`.
    pub t_end: f64,
}

impl SimWindow {
    pub fn new(x: (f64, f64), y: (f64, f64), t_end: f64) -> Result<Self> {
        let w = SimWindow {
            x_min: x.0,
            x_max: x.1,
            y_min: y.0,
            y_max: y.1,
            t_end,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.t_end]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min || self.t_end <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "window needs positive area and duration, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, e: &Event) -> bool {
        (self.x_min..=self.x_max).contains(&e.x[0])
            && (self.y_min..=self.y_max).contains(&e.x[1])
            && e.t >= 0.0
            && e.t <= self.t_end
    }

    fn uniform_event<R: Rng + ?Sized>(&self, rng: &mut R) -> Event {
        Event::new(
            rng.random_range(self.x_min..self.x_max),
            rng.random_range(self.y_min..self.y_max),
            rng.random_range(0.0..self.t_end),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub events: EventSet,
    /// `0` for immigrants, otherwise one plus the parent's position in `events`.
    pub parent: Vec<usize>,
    pub true_params: Params,
}

impl SimTruth {
    pub fn immigrant_count(&self) -> usize {
        self.parent.iter().filter(|&&p| p == 0).count()
    }

    /// Children per event, counting only children that fell inside the window.
    pub fn offspring_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.parent.len()];
        for &p in &self.parent {
            if p > 0 {
                counts[p - 1] += 1;
            }
        }
        counts
    }
}

/// Displacement `(dx, dy, dt)` of one child from its parent.
pub fn offspring_displacement<R: Rng + ?Sized>(params: &Params, rng: &mut R) -> (f64, f64, f64) {
    let dt = Exp::new(params.omega)
        .expect("omega validated positive")
        .sample(rng);
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    (params.h * dx, params.h * dy, dt)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
}

/// Simulates the cluster process. Only `θ, ω, h` of `params` drive the
/// offspring; the background is homogeneous with the given rate.
pub fn simulate_cluster_process<R: Rng + ?Sized>(
    params: &Params,
    window: &SimWindow,
    background_rate_per_area: f64,
    rng: &mut R,
) -> Result<SimTruth> {
    params.validate()?;
    window.validate()?;
    if params.theta >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "theta = {} is not subcritical (needs theta < 1)",
            params.theta
        )));
    }
    if !(background_rate_per_area.is_finite() && background_rate_per_area > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "background rate {background_rate_per_area} must be positive"
        )));
    }

    let immigrants = poisson(background_rate_per_area * window.area() * window.t_end, rng);
    let mut events: Vec<Event> = (0..immigrants).map(|_| window.uniform_event(rng)).collect();
    let mut parent: Vec<usize> = vec![0; immigrants];

    // Breadth-first over generations; `next` walks the growing list.
    let mut next = 0;
    while next < events.len() {
        let origin = events[next];
        for _ in 0..poisson(params.theta, rng) {
            let (dx, dy, dt) = offspring_displacement(params, rng);
            let t = origin.t + dt;
            if t < window.t_end {
                events.push(Event::new(origin.x[0] + dx, origin.x[1] + dy, t));
                parent.push(next + 1);
            }
        }
        next += 1;
    }
    if events.is_empty() {
        return Err(Error::InvalidEvents(
            "simulation produced no events; raise the background rate or window".into(),
        ));
    }

    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&a, &b| events[a].t.total_cmp(&events[b].t));
    let mut position = vec![0; order.len()];
    for (pos, &orig) in order.iter().enumerate() {
        position[orig] = pos;
    }
    let sorted: Vec<Event> = order.iter().map(|&i| events[i]).collect();
    let sorted_parent = order
        .iter()
        .map(|&i| match parent[i] {
            0 => 0,
            p => position[p - 1] + 1,
        })
        .collect();

    Ok(SimTruth {
        events: EventSet::new(sorted)?.with_window_end(window.t_end)?,
        parent: sorted_parent,
        true_params: *params,
    })
}

/// `n` events uniform on the window, sorted by time.
pub fn generate_benchmark_cloud<R: Rng + ?Sized>(
    n: usize,
    window: &SimWindow,
    rng: &mut R,
) -> Result<EventSet> {
    window.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("benchmark cloud needs n >= 1".into()));
    }
    let events = (0..n).map(|_| window.uniform_event(rng)).collect();
    EventSet::from_unsorted(events)?.with_window_end(window.t_end)
}
