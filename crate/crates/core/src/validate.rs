//! Self-checks run by the `validate` command: backends against a direct
//! double-loop evaluation, and the closed-form compensator and trigger mass
//! against numerical quadrature of the intensity.
//!
//! The likelihood under test is supplied as an [`Evaluator`] so that a
//! deliberately broken implementation can be injected.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::backend::Backend;
use crate::error::Result;
use crate::excitation::excitation_probabilities;
use crate::likelihood::log_likelihood;
use crate::model::{background_pair_rate, compensator_term, normal_cdf, trigger_pair_rate, Event, EventSet, Params};

pub const ORACLE_TOLERANCE: f64 = 1e-10;
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

pub type Evaluator<'a> = dyn Fn(&EventSet, &Params, &Backend) -> Result<f64> + 'a;

pub fn library_evaluator(events: &EventSet, params: &Params, backend: &Backend) -> Result<f64> {
    Ok(log_likelihood(events, params, backend)?.log_lik)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub error: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: String, error: f64, tolerance: f64) {
        self.checks.push(CheckResult {
            name,
            // NaN errors fail.
            passed: error <= tolerance,
            error,
            tolerance,
        });
    }

    pub fn write(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for c in &self.checks {
            writeln!(
                w,
                "{} {:<40} error={:.3e} tolerance={:.0e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.error,
                c.tolerance
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(w, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn random_instance(rng: &mut ChaCha20Rng, n: usize) -> (EventSet, Params) {
    let events = (0..n)
        .map(|_| {
            Event::new(
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..50.0),
            )
        })
        .collect();
    let set = EventSet::from_unsorted(events).expect("finite events");
    let end = set.window_end() + rng.random_range(0.0..5.0);
    let params = Params {
        mu0: rng.random_range(0.2..2.0),
        tau_x: rng.random_range(0.3..2.0),
        tau_t: rng.random_range(1.0..20.0),
        theta: rng.random_range(0.0..0.8),
        omega: rng.random_range(0.2..3.0),
        h: rng.random_range(0.05..1.0),
    };
    (set.with_window_end(end).expect("end after events"), params)
}

/// `(λ_n, μ_n, ξ_n)` by a direct double loop.
fn naive_rates(events: &EventSet, p: &Params) -> Vec<(f64, f64, f64)> {
    let (xs, ys, ts) = (events.xs(), events.ys(), events.ts());
    let bg_norm = 1.0 / ((2.0 * PI).powf(1.5) * p.tau_x * p.tau_x * p.tau_t);
    let tr_norm = p.theta * p.omega / (2.0 * PI * p.h * p.h);
    (0..events.len())
        .map(|i| {
            let (mut mu, mut xi) = (0.0, 0.0);
            for j in 0..events.len() {
                let d2 = (xs[i] - xs[j]).powi(2) + (ys[i] - ys[j]).powi(2);
                let dt = ts[i] - ts[j];
                mu += bg_norm * (-d2 / (2.0 * p.tau_x * p.tau_x) - dt * dt / (2.0 * p.tau_t * p.tau_t)).exp();
                if dt > 0.0 {
                    xi += tr_norm * (-p.omega * dt).exp() * (-d2 / (2.0 * p.h * p.h)).exp();
                }
            }
            (p.mu0 * mu + xi, p.mu0 * mu, xi)
        })
        .collect()
}

fn naive_log_likelihood(events: &EventSet, p: &Params) -> f64 {
    let end = events.window_end();
    naive_rates(events, p)
        .iter()
        .zip(events.ts())
        .map(|((lambda, _, _), &t)| {
            let bg = p.mu0 * (normal_cdf((end - t) / p.tau_t) - normal_cdf(-t / p.tau_t));
            let trig = p.theta * (1.0 - (-p.omega * (end - t)).exp());
            lambda.ln() - bg - trig
        })
        .sum()
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Trapezoid rule over a square of half-width `12 sd` around `centre`; for
/// Gaussian integrands this converges geometrically in the step count.
fn spatial_integral<F: Fn(f64, f64) -> f64>(f: F, centre: [f64; 2], sd: f64) -> f64 {
    const STEPS: usize = 96;
    let half = 12.0 * sd;
    let dx = 2.0 * half / STEPS as f64;
    let mut total = 0.0;
    for i in 0..=STEPS {
        let wx = if i == 0 || i == STEPS { 0.5 } else { 1.0 };
        let x = centre[0] - half + i as f64 * dx;
        for j in 0..=STEPS {
            let wy = if j == 0 || j == STEPS { 0.5 } else { 1.0 };
            let y = centre[1] - half + j as f64 * dx;
            total += wx * wy * f(x, y);
        }
    }
    total * dx * dx
}

/// `∫∫ λ(x, y, t) dx dy` by quadrature of each pairwise term.
fn spatial_intensity(events: &EventSet, p: &Params, t: f64) -> f64 {
    events
        .iter()
        .map(|source| {
            let bg = spatial_integral(
                |x, y| background_pair_rate(&Event::new(x, y, t), &source, p),
                source.x,
                p.tau_x,
            );
            let trig = if t > source.t {
                spatial_integral(|x, y| trigger_pair_rate(&Event::new(x, y, t), &source, p), source.x, p.h)
            } else {
                0.0
            };
            p.mu0 * bg + trig
        })
        .sum()
}

/// Closed-form compensator against quadrature of the intensity over
/// space × `[0, T]`; returns the relative error.
pub fn compensator_quadrature_error(events: &EventSet, p: &Params) -> Result<f64> {
    let end = events.window_end();
    let mut closed = 0.0;
    for e in events.iter() {
        closed += compensator_term(&e, end, p)?;
    }
    // Split at event times, where the triggering part jumps.
    let mut cuts: Vec<f64> = std::iter::once(0.0).chain(events.ts().iter().copied()).chain([end]).collect();
    cuts.dedup();
    let f = |t: f64| spatial_intensity(events, p, t);
    let numeric: f64 = cuts.windows(2).map(|w| simpson(&f, w[0], w[1], 1e-10 * closed.max(1.0))).sum();
    Ok(relative(closed, numeric))
}

/// Total mass of one event's triggering kernel over space × `(t, ∞)`
/// relative to θ.
pub fn trigger_mass_error(p: &Params) -> f64 {
    let source = Event::new(0.3, -0.2, 1.0);
    let f = |dt: f64| {
        spatial_integral(
            |x, y| trigger_pair_rate(&Event::new(x, y, source.t + dt), &source, p),
            source.x,
            p.h,
        )
    };
    // e^{−60} is far below the tolerance.
    let horizon = 60.0 / p.omega;
    let mass = simpson(&f, 1e-300, horizon, 1e-12 * p.theta);
    relative(p.theta, mass)
}

/// Runs all checks with the likelihood supplied by `evaluator`.
pub fn run_validation(backends: &[Backend], seed: u64, evaluator: &Evaluator<'_>) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let instances: Vec<(EventSet, Params)> =
        [2usize, 3, 10, 100, 300].iter().map(|&n| random_instance(&mut rng, n)).collect();

    for backend in backends {
        backend.validate()?;
        let mut worst: f64 = 0.0;
        for (set, p) in &instances {
            let got = evaluator(set, p, backend)?;
            worst = worst.max(relative(naive_log_likelihood(set, p), got));
        }
        report.push(format!("log-likelihood vs direct [{backend}]"), worst, ORACLE_TOLERANCE);

        let mut worst: f64 = 0.0;
        for (set, p) in &instances {
            let ex = excitation_probabilities(set, p, backend)?;
            for (pi, (_, mu, xi)) in ex.pi.iter().zip(naive_rates(set, p)) {
                worst = worst.max((pi - xi / (mu + xi)).abs());
            }
        }
        report.push(format!("excitation vs direct [{backend}]"), worst, ORACLE_TOLERANCE);
    }

    for (set, p) in instances.iter().take(2) {
        let err = compensator_quadrature_error(set, p)?;
        report.push(format!("compensator vs quadrature (N={})", set.len()), err, QUADRATURE_TOLERANCE);
    }
    let (_, p) = &instances[2];
    report.push("trigger mass equals theta".to_string(), trigger_mass_error(p), QUADRATURE_TOLERANCE);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_passes() {
        let backends = [Backend::serial(), Backend::vectorized(4), Backend::threaded_vectorized(3, 2)];
        let report = run_validation(&backends, 1, &library_evaluator).unwrap();
        let mut out = Vec::new();
        report.write(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(report.all_passed(), "{text}");
        assert!(text.contains("tolerance=1e-10"));
        assert!(text.contains("tolerance=1e-6"));
    }

    #[test]
    fn corrupted_backend_is_reported() {
        let broken = |set: &EventSet, p: &Params, b: &Backend| -> Result<f64> {
            let v = library_evaluator(set, p, b)?;
            Ok(if b.kind == crate::BackendKind::Vectorized { v * (1.0 + 1e-7) } else { v })
        };
        let report = run_validation(&[Backend::serial(), Backend::vectorized(2)], 2, &broken).unwrap();
        assert!(!report.all_passed());
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
        assert_eq!(failed.len(), 1);
        assert!(failed[0].name.contains("simd"));
    }
}
