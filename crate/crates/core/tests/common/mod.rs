//! Reference implementations shared by the integration tests. Everything
//! here is written from the model's formulas without calling the library's
//! numerical code, so agreement is evidence rather than tautology.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use st_hawkes::model::{Event, EventSet, Params};

/// `|a − b| / max(|a|, |b|)`, with the denominator floored at the smallest
/// normal number so exact zeros compare equal.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `erf` by its Maclaurin series for `|x| < 2.5`, otherwise through the
/// continued fraction of `erfc`.
pub fn erf(x: f64) -> f64 {
    if x.abs() < 2.5 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        x.signum() * (1.0 - erfc_cf(x.abs()))
    }
}

/// `erfc(x)` for `x ≥ 2.5` by the Laplace continued fraction, evaluated
/// bottom-up.
fn erfc_cf(x: f64) -> f64 {
    let mut f = 0.0;
    for k in (1..120).rev() {
        f = (k as f64 / 2.0) / (x + f);
    }
    (-x * x).exp() / PI.sqrt() / (x + f)
}

pub fn phi_cdf(z: f64) -> f64 {
    if z < -2.5 * std::f64::consts::SQRT_2 {
        // Lower tail: avoid cancellation in 1 + erf.
        0.5 * erfc_cf(-z / std::f64::consts::SQRT_2)
    } else {
        0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Background kernel without μ0: a product of three univariate Gaussian
/// densities.
pub fn oracle_background(dx: f64, dy: f64, dt: f64, p: &Params) -> f64 {
    normal_pdf(dx / p.tau_x) / p.tau_x * normal_pdf(dy / p.tau_x) / p.tau_x * normal_pdf(dt / p.tau_t) / p.tau_t
}

/// Triggering kernel: θ times an exponential density in time times an
/// isotropic Gaussian density in space; zero unless `dt > 0`.
pub fn oracle_trigger(dx: f64, dy: f64, dt: f64, p: &Params) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    p.theta * p.omega * (-p.omega * dt).exp() * (normal_pdf(dx / p.h) / p.h) * (normal_pdf(dy / p.h) / p.h)
}

/// `(μ_n, ξ_n)` per event by a direct double loop over all pairs.
pub fn oracle_rates(events: &EventSet, p: &Params) -> Vec<(f64, f64)> {
    let ev = events.to_events();
    ev.iter()
        .map(|target| {
            let mut mu = 0.0;
            let mut xi = 0.0;
            for source in &ev {
                let (dx, dy, dt) = (target.x[0] - source.x[0], target.x[1] - source.x[1], target.t - source.t);
                mu += p.mu0 * oracle_background(dx, dy, dt, p);
                xi += oracle_trigger(dx, dy, dt, p);
            }
            (mu, xi)
        })
        .collect()
}

pub fn oracle_compensator(t: f64, end: f64, p: &Params) -> f64 {
    p.mu0 * (phi_cdf((end - t) / p.tau_t) - phi_cdf(-t / p.tau_t)) + p.theta * (1.0 - (-p.omega * (end - t)).exp())
}

pub fn oracle_log_likelihood(events: &EventSet, p: &Params) -> f64 {
    let end = events.window_end();
    oracle_rates(events, p)
        .iter()
        .zip(events.ts())
        .map(|(&(mu, xi), &t)| (mu + xi).ln() - oracle_compensator(t, end, p))
        .sum()
}

pub fn oracle_pi(events: &EventSet, p: &Params) -> Vec<f64> {
    oracle_rates(events, p).iter().map(|&(mu, xi)| xi / (mu + xi)).collect()
}

/// A random instance: events on `[0, 5]² × [0, 50]`, window end up to five
/// days after the last event, parameters spread over a plausible range.
/// Every fifth instance has θ = 0.
pub fn random_instance(seed: u64, n: usize) -> (EventSet, Params) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let events: Vec<Event> = (0..n)
        .map(|_| Event::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..50.0)))
        .collect();
    let set = EventSet::from_unsorted(events).unwrap();
    let end = set.window_end() + rng.random_range(0.0..5.0);
    let theta = if seed % 5 == 0 { 0.0 } else { rng.random_range(0.01..0.9) };
    let p = Params::new(
        rng.random_range(0.2..2.0),
        rng.random_range(0.3..2.0),
        rng.random_range(1.0..20.0),
        theta,
        rng.random_range(0.2..3.0),
        rng.random_range(0.05..1.0),
    )
    .unwrap();
    (set.with_window_end(end).unwrap(), p)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod 15-point estimate and its difference from the embedded Gauss
/// 7-point rule on `[a, b]`.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let (mut k, mut g) = (0.0, 0.0);
    for i in 0..8 {
        if i == 7 {
            let v = f(c);
            k += K15_WEIGHTS[7] * v;
            g += G7_WEIGHTS[3] * v;
        } else {
            let v = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
            k += K15_WEIGHTS[i] * v;
            if i % 2 == 1 {
                g += G7_WEIGHTS[i / 2] * v;
            }
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Adaptive Gauss–Kronrod on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(f, a, b, tol, 30)
}

/// `∫∫ f(x, y)` over the square `centre ± 9 sd` by composite 15-point Kronrod
/// panels in each direction.
pub fn integrate_plane<F: Fn(f64, f64) -> f64>(f: F, centre: [f64; 2], sd: f64) -> f64 {
    const PANELS: usize = 12;
    let half = 9.0 * sd;
    let width = 2.0 * half / PANELS as f64;
    let mut total = 0.0;
    for px in 0..PANELS {
        let ax = centre[0] - half + px as f64 * width;
        total += gk15(
            &mut |x| {
                let mut row = 0.0;
                for py in 0..PANELS {
                    let ay = centre[1] - half + py as f64 * width;
                    row += gk15(&mut |y| f(x, y), ay, ay + width).0;
                }
                row
            },
            ax,
            ax + width,
        )
        .0;
    }
    total
}
