//! Posterior summaries: effective sample size, HPD intervals, reporting-unit
//! parameter tables and temporal smoothing of excitation probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EventSet;
use crate::sampler::{Chain, H_INV, MU0, OMEGA, THETA};

pub const METERS_PER_KM: f64 = 1000.0;
pub const MINUTES_PER_DAY: f64 = 1440.0;

pub fn km_to_m(km: f64) -> f64 {
    km * METERS_PER_KM
}

pub fn m_to_km(m: f64) -> f64 {
    m / METERS_PER_KM
}

pub fn days_to_minutes(days: f64) -> f64 {
    days * MINUTES_PER_DAY
}

pub fn minutes_to_days(minutes: f64) -> f64 {
    minutes / MINUTES_PER_DAY
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// Set when the sample has zero variance; `value` is then the length.
    pub degenerate: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Effective sample size of one chain, using Geyer's initial positive
/// sequence: autocorrelations are summed in adjacent pairs
/// `ρ_{2k} + ρ_{2k+1}` until a pair sum is no longer positive.
pub fn effective_sample_size(samples: &[f64]) -> Result<Ess> {
    let n = samples.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "effective sample size needs at least 10 samples, got {n}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let m = mean(samples);
    let centered: Vec<f64> = samples.iter().map(|v| v - m).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if c0 <= (4.0 * f64::EPSILON * m.abs()).powi(2) {
        return Ok(Ess {
            value: n as f64,
            degenerate: true,
        });
    }
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let value = (n as f64 / tau.max(f64::MIN_POSITIVE)).min(n as f64);
    Ok(Ess {
        value,
        degenerate: false,
    })
}

/// Shortest interval spanning `⌈mass·S⌉` consecutive order statistics.
pub fn hpd_interval(samples: &[f64], mass: f64) -> Result<(f64, f64)> {
    if samples.len() < 20 {
        return Err(Error::InvalidArgument(format!(
            "HPD interval needs at least 20 samples, got {}",
            samples.len()
        )));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::InvalidArgument(format!("mass {mass} not in (0, 1)")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((mass * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let (lo, _) = (0..=sorted.len() - k)
        .map(|i| (i, sorted[i + k - 1] - sorted[i]))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok((sorted[lo], sorted[lo + k - 1]))
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedCurve {
    pub time: Vec<f64>,
    pub value: Vec<f64>,
}

pub const DEFAULT_SMOOTHING_BANDWIDTH_DAYS: f64 = 30.0;
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Gaussian-kernel Nadaraya–Watson estimate of `π` as a function of time on a
/// uniform grid spanning the data.
pub fn smooth_probabilities_over_time(
    events: &EventSet,
    mean_pi: &[f64],
    bandwidth: f64,
    grid_points: usize,
) -> Result<SmoothedCurve> {
    if mean_pi.len() != events.len() {
        return Err(Error::Mismatch(format!(
            "{} probabilities for {} events",
            mean_pi.len(),
            events.len()
        )));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {bandwidth} must be positive"
        )));
    }
    if grid_points == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point".into()));
    }
    let ts = events.ts();
    let (t0, t1) = (ts[0], ts[ts.len() - 1]);
    let step = if grid_points > 1 {
        (t1 - t0) / (grid_points - 1) as f64
    } else {
        0.0
    };
    let scale = 0.5 / (bandwidth * bandwidth);
    let mut out = SmoothedCurve {
        time: Vec::with_capacity(grid_points),
        value: Vec::with_capacity(grid_points),
    };
    for g in 0..grid_points {
        let at = t0 + step * g as f64;
        // Shift by the smallest exponent so distant grid points keep weight.
        let z_min = ts
            .iter()
            .map(|t| (at - t) * (at - t) * scale)
            .fold(f64::INFINITY, f64::min);
        let (mut num, mut den) = (0.0, 0.0);
        for (t, p) in ts.iter().zip(mean_pi) {
            let w = (z_min - (at - t) * (at - t) * scale).exp();
            num += w * p;
            den += w;
        }
        out.time.push(at);
        out.value.push((num / den).clamp(0.0, 1.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub unit: String,
    pub mean: f64,
    pub sd: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
    pub ess: f64,
}

/// Summarizes one quantity pooled over chains: ESS is the sum of per-chain
/// estimates, mean/sd/HPD use the pooled draws.
pub fn summarize_quantity(name: &str, unit: &str, chains: &[Vec<f64>]) -> Result<ParameterSummary> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::InvalidArgument(format!("no draws for {name}")));
    }
    let m = mean(&pooled);
    let sd = if pooled.len() > 1 {
        (pooled.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (pooled.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (hpd_lo, hpd_hi) = hpd_interval(&pooled, 0.95)?;
    let mut ess = 0.0;
    for c in chains {
        ess += effective_sample_size(c)?.value;
    }
    Ok(ParameterSummary {
        name: name.to_string(),
        unit: unit.to_string(),
        mean: m,
        sd,
        hpd_lo,
        hpd_hi,
        ess,
    })
}

/// Reporting table for a set of chains: the four sampled coordinates plus
/// `h` in meters and `1/ω` in minutes. Burn-in draws are excluded.
pub fn summarize_chains(chains: &[Chain]) -> Result<Vec<ParameterSummary>> {
    if chains.is_empty() {
        return Err(Error::InvalidArgument("no chains to summarize".into()));
    }
    let column = |f: &dyn Fn(&[f64; 4]) -> f64| -> Vec<Vec<f64>> {
        chains
            .iter()
            .map(|c| c.retained().iter().map(f).collect())
            .collect()
    };
    Ok(vec![
        summarize_quantity("mu0", "-", &column(&|r| r[MU0]))?,
        summarize_quantity("theta", "-", &column(&|r| r[THETA]))?,
        summarize_quantity("omega", "1/d", &column(&|r| r[OMEGA]))?,
        summarize_quantity("h_inv", "1/km", &column(&|r| r[H_INV]))?,
        summarize_quantity("h", "m", &column(&|r| km_to_m(1.0 / r[H_INV])))?,
        summarize_quantity("1/omega", "min", &column(&|r| days_to_minutes(1.0 / r[OMEGA])))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Event;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn ess_iid_is_near_length() {
        let x = normals(10_000, 1);
        let ess = effective_sample_size(&x).unwrap();
        let ratio = ess.value / 1e4;
        assert!((0.8..=1.2).contains(&ratio), "{ratio}");
        assert!(!ess.degenerate);
    }

    #[test]
    fn ess_ar1_matches_closed_form() {
        let e = normals(10_000, 2);
        let mut x = vec![0.0; e.len()];
        for i in 1..x.len() {
            x[i] = 0.9 * x[i - 1] + e[i];
        }
        let ratio = effective_sample_size(&x).unwrap().value / 1e4;
        let expect = 0.1 / 1.9;
        assert!((ratio / expect - 1.0).abs() <= 0.5, "{ratio} vs {expect}");
    }

    #[test]
    fn ess_constant_is_degenerate() {
        let ess = effective_sample_size(&[2.5; 50]).unwrap();
        assert_eq!(ess.value, 50.0);
        assert!(ess.degenerate);
        assert!(effective_sample_size(&[1.0; 5]).is_err());
    }

    #[test]
    fn hpd_uniform_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let (lo, hi) = hpd_interval(&x, 0.95).unwrap();
        assert!((hi - lo - 0.95).abs() <= 0.02);
    }

    #[test]
    fn hpd_normal_quantiles() {
        let x = normals(100_000, 4);
        let (lo, hi) = hpd_interval(&x, 0.95).unwrap();
        assert!((lo + 1.959_963_984_540_054).abs() <= 0.05, "{lo}");
        assert!((hi - 1.959_963_984_540_054).abs() <= 0.05, "{hi}");
    }

    #[test]
    fn hpd_constant_and_errors() {
        assert_eq!(hpd_interval(&[3.0; 40], 0.95).unwrap(), (3.0, 3.0));
        assert!(hpd_interval(&[1.0; 10], 0.95).is_err());
        assert!(hpd_interval(&[1.0; 40], 1.0).is_err());
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 0.125), 1.5);
    }

    #[test]
    fn unit_round_trip() {
        for m in [0.0, 1.0, 69.5, 1234.567, 1e-3] {
            assert!((km_to_m(m_to_km(m)) - m).abs() <= 1e-12 * m.abs().max(1.0));
        }
        assert_eq!(days_to_minutes(1.0), 1440.0);
        assert_eq!(minutes_to_days(1440.0), 1.0);
    }

    fn clustered() -> (EventSet, Vec<f64>) {
        let mut ev = Vec::new();
        let mut pi = Vec::new();
        for i in 0..50 {
            ev.push(Event::new(0.0, 0.0, i as f64 * 0.1));
            pi.push(0.2);
        }
        for i in 0..50 {
            ev.push(Event::new(0.0, 0.0, 100.0 + i as f64 * 0.1));
            pi.push(0.8);
        }
        (EventSet::new(ev).unwrap(), pi)
    }

    #[test]
    fn smoothing_constant_and_wide_limits() {
        let (set, _) = clustered();
        let c = vec![0.37; set.len()];
        let curve = smooth_probabilities_over_time(&set, &c, 5.0, 64).unwrap();
        assert!(curve.value.iter().all(|v| (v - 0.37).abs() < 1e-12));

        let (set, pi) = clustered();
        let wide = smooth_probabilities_over_time(&set, &pi, 1e9, 16).unwrap();
        assert!(wide.value.iter().all(|v| (v - 0.5).abs() < 1e-9));
    }

    #[test]
    fn smoothing_two_clusters() {
        let (set, pi) = clustered();
        let curve = smooth_probabilities_over_time(&set, &pi, 2.0, 512).unwrap();
        assert_eq!(curve.time.len(), 512);
        for (t, v) in curve.time.iter().zip(&curve.value) {
            if *t <= 5.0 {
                assert!((v - 0.2).abs() <= 0.02, "{t}: {v}");
            }
            if *t >= 100.0 {
                assert!((v - 0.8).abs() <= 0.02, "{t}: {v}");
            }
        }
        assert!(smooth_probabilities_over_time(&set, &pi, 0.0, 8).is_err());
        assert!(smooth_probabilities_over_time(&set, &pi[1..], 1.0, 8).is_err());
    }

    proptest! {
        #[test]
        fn hpd_affine_equivariance(seed in 0u64..1000, a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let x = normals(200, seed);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let (lo, hi) = hpd_interval(&x, 0.9).unwrap();
            let (ylo, yhi) = hpd_interval(&y, 0.9).unwrap();
            let tol = 1e-9 * (1.0 + b.abs() + a);
            prop_assert!((ylo - (a * lo + b)).abs() <= tol);
            prop_assert!((yhi - (a * hi + b)).abs() <= tol);
        }

        #[test]
        fn smoothing_permutation_invariant(seed in 0u64..500) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Integer times so that many events tie and can be reordered.
            let pairs: Vec<(f64, f64)> = (0..40)
                .map(|_| ((rng.random::<f64>() * 10.0).floor(), rng.random::<f64>()))
                .collect();
            let build = |p: &[(f64, f64)]| {
                let set = EventSet::from_unsorted(
                    p.iter().map(|&(t, pi)| Event::new(pi, 0.0, t)).collect(),
                )
                .unwrap();
                let pi: Vec<f64> = set.xs().to_vec();
                smooth_probabilities_over_time(&set, &pi, 1.5, 32).unwrap()
            };
            let base = build(&pairs);
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rng);
            let other = build(&shuffled);
            for (u, v) in base.value.iter().zip(&other.value) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
    }
}
