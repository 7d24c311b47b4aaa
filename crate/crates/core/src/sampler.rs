//! Random-scan adaptive Metropolis-Hastings over `(μ0, θ, ω, 1/h)`.
//!
//! Each iteration picks one coordinate uniformly, proposes from a normal
//! centred on the current value and truncated below at zero, and accepts with
//! the exact Hastings ratio for that truncated proposal. Per coordinate, the
//! proposal scale is rescaled toward a 0.44 acceptance rate at the end of each
//! adaptation interval, and interval lengths grow as `b ← b^1.1` so that the
//! adaptation diminishes.
//!
//! The background bandwidths `τx, τt` are held fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::backend::{pair_reduce, Backend};
use crate::error::{Error, Result};
use crate::likelihood::{log_likelihood, BackgroundKernel, TriggerKernel};
use crate::model::{normal_cdf, log_normal_cdf, EventSet, PairConstants, Params};

/// Free coordinates in sampling order.
pub const COORDINATES: [&str; 4] = ["mu0", "theta", "omega", "h_inv"];
pub const MU0: usize = 0;
pub const THETA: usize = 1;
pub const OMEGA: usize = 2;
pub const H_INV: usize = 3;

pub const DEFAULT_TARGET_ACCEPTANCE: f64 = 0.44;
const INITIAL_BOUND: f64 = 5.0;
const BOUND_GROWTH: f64 = 1.1;

/// Normal prior truncated below at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
}

impl TruncatedNormal {
    pub fn half_normal(sd: f64) -> Self {
        TruncatedNormal { mean: 0.0, sd }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mean) / self.sd;
        // Normalizer 1 − Φ(−m/sd) = Φ(m/sd).
        -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - self.sd.ln()
            - log_normal_cdf(self.mean / self.sd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub mu0: TruncatedNormal,
    pub theta: TruncatedNormal,
    pub omega: TruncatedNormal,
    pub h_inv: TruncatedNormal,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            mu0: TruncatedNormal::half_normal(1.0),
            theta: TruncatedNormal::half_normal(10.0),
            omega: TruncatedNormal::half_normal(10.0),
            h_inv: TruncatedNormal::half_normal(10.0),
        }
    }
}

impl PriorSpec {
    pub fn coordinates(&self) -> [TruncatedNormal; 4] {
        [self.mu0, self.theta, self.omega, self.h_inv]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in COORDINATES.iter().zip(self.coordinates()) {
            if !(p.sd.is_finite() && p.sd > 0.0 && p.mean.is_finite()) {
                return Err(Error::Config(format!(
                    "prior for {name}: mean {} sd {} (sd must be positive)",
                    p.mean, p.sd
                )));
            }
        }
        Ok(())
    }
}

/// Sum of truncated-normal log densities; `−∞` if any coordinate is `<= 0`.
pub fn prior_log_density(theta: &[f64; 4], priors: &PriorSpec) -> f64 {
    theta
        .iter()
        .zip(priors.coordinates())
        .map(|(&x, p)| p.log_density(x))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialValues {
    pub mu0: f64,
    pub theta: f64,
    pub omega: f64,
    pub h_inv: f64,
}

impl Default for InitialValues {
    fn default() -> Self {
        InitialValues {
            mu0: 1.0,
            theta: 0.1,
            omega: 1.0,
            h_inv: 1.0,
        }
    }
}

impl InitialValues {
    pub fn as_array(&self) -> [f64; 4] {
        [self.mu0, self.theta, self.omega, self.h_inv]
    }
}

fn default_target() -> f64 {
    DEFAULT_TARGET_ACCEPTANCE
}
fn default_tau_x() -> f64 {
    1.6
}
fn default_tau_t() -> f64 {
    14.0
}
fn default_true() -> bool {
    true
}
fn default_one() -> usize {
    1
}
fn default_proposal_sd() -> [f64; 4] {
    [1.0; 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Number of transitions `S`.
    pub iterations: usize,
    /// Leading states excluded from summaries (kept in storage).
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_target")]
    pub target_acceptance: f64,
    #[serde(default)]
    pub initial: InitialValues,
    /// Fixed background spatial bandwidth (km).
    #[serde(default = "default_tau_x")]
    pub tau_x: f64,
    /// Fixed background temporal bandwidth (days).
    #[serde(default = "default_tau_t")]
    pub tau_t: f64,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_one")]
    pub chains: usize,
    /// Initial proposal standard deviations.
    #[serde(default = "default_proposal_sd")]
    pub proposal_sd: [f64; 4],
    #[serde(default = "default_true")]
    pub adapt: bool,
    /// Cache the parameter-independent background sums and re-evaluate the
    /// N² triggering sums only when ω or 1/h move.
    #[serde(default = "default_true")]
    pub reuse_fixed_terms: bool,
}

impl SamplerConfig {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        SamplerConfig {
            iterations,
            burn_in,
            seed,
            target_acceptance: DEFAULT_TARGET_ACCEPTANCE,
            initial: InitialValues::default(),
            tau_x: default_tau_x(),
            tau_t: default_tau_t(),
            backend: Backend::default(),
            chains: 1,
            proposal_sd: default_proposal_sd(),
            adapt: true,
            reuse_fixed_terms: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config(format!(
                "target_acceptance {} not in (0, 1)",
                self.target_acceptance
            )));
        }
        for (name, v) in COORDINATES.iter().zip(self.initial.as_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("initial {name} = {v} must be positive")));
            }
        }
        for (name, v) in COORDINATES.iter().zip(self.proposal_sd) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("proposal_sd for {name} = {v} must be positive")));
            }
        }
        if !(self.tau_x.is_finite() && self.tau_x > 0.0 && self.tau_t.is_finite() && self.tau_t > 0.0)
        {
            return Err(Error::Config("tau_x and tau_t must be positive".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        self.backend.validate()
    }

    /// Full model parameters for a sampling-space point.
    pub fn params_at(&self, theta: &[f64; 4]) -> Params {
        Params {
            mu0: theta[MU0],
            tau_x: self.tau_x,
            tau_t: self.tau_t,
            theta: theta[THETA],
            omega: theta[OMEGA],
            h: 1.0 / theta[H_INV],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    /// `(μ0, θ, ω, 1/h)`.
    pub theta: [f64; 4],
    /// Proposal standard deviations.
    pub v: [f64; 4],
    /// Adaptation interval bounds.
    pub b: [f64; 4],
    /// Steps spent in the current interval, per coordinate.
    pub l: [u64; 4],
    /// Acceptances in the current interval, per coordinate.
    pub a: [u64; 4],
    pub cached_log_post: f64,
}

impl SamplerState {
    pub fn new(theta: [f64; 4], proposal_sd: [f64; 4], log_post: f64) -> Self {
        SamplerState {
            theta,
            v: proposal_sd,
            b: [INITIAL_BOUND; 4],
            l: [0; 4],
            a: [0; 4],
            cached_log_post: log_post,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationEvent {
    /// Zero-based transition index at which the interval closed.
    pub step: usize,
    pub coordinate: usize,
    pub bound_before: f64,
    pub bound_after: f64,
    pub ratio: f64,
    pub proposal_sd: f64,
}

/// Draws from `Normal(θ_d, v_d)` truncated to `(0, ∞)` and returns the
/// proposal with `ln q(θ|θ*) − ln q(θ*|θ) = ln Φ(θ_d/v_d) − ln Φ(θ*_d/v_d)`.
pub fn propose_coordinate<R: Rng + ?Sized>(state: &SamplerState, d: usize, rng: &mut R) -> (f64, f64) {
    let current = state.theta[d];
    let sd = state.v[d];
    // current > 0, so each draw is accepted with probability >= 1/2.
    let proposal = loop {
        let z: f64 = rng.sample(StandardNormal);
        let x = current + sd * z;
        if x > 0.0 {
            break x;
        }
    };
    (proposal, hastings_correction(current, proposal, sd))
}

pub fn hastings_correction(current: f64, proposal: f64, sd: f64) -> f64 {
    if current == proposal {
        return 0.0;
    }
    log_normal_cdf(current / sd) - log_normal_cdf(proposal / sd)
}

/// Log-likelihood as a function of the sampling coordinates. `propose`
/// evaluates a point differing from the last committed one in coordinate
/// `changed`; `accept` commits that point.
pub trait LikelihoodTarget {
    fn initialize(&mut self, theta: &[f64; 4]) -> Result<f64>;
    fn propose(&mut self, theta: &[f64; 4], changed: usize) -> Result<f64>;
    fn accept(&mut self);
}

/// Evaluates the full likelihood through the backend at every proposal.
pub struct DirectTarget<'a> {
    events: &'a EventSet,
    config: &'a SamplerConfig,
}

impl<'a> DirectTarget<'a> {
    pub fn new(events: &'a EventSet, config: &'a SamplerConfig) -> Self {
        DirectTarget { events, config }
    }

    fn eval(&self, theta: &[f64; 4]) -> Result<f64> {
        let p = self.config.params_at(theta);
        Ok(log_likelihood(self.events, &p, &self.config.backend)?.log_lik)
    }
}

impl LikelihoodTarget for DirectTarget<'_> {
    fn initialize(&mut self, theta: &[f64; 4]) -> Result<f64> {
        self.eval(theta)
    }

    fn propose(&mut self, theta: &[f64; 4], _changed: usize) -> Result<f64> {
        self.eval(theta)
    }

    fn accept(&mut self) {}
}

/// Exploits `λ_n = μ0 B_n + θ K_n(ω, h)`: `B_n` is fixed for the chain, and
/// `K_n` only changes with ω or 1/h, so μ0 and θ moves cost O(N).
pub struct FactorizedTarget<'a> {
    events: &'a EventSet,
    config: &'a SamplerConfig,
    background: Vec<f64>,
    background_mass: f64,
    trigger: Vec<f64>,
    trigger_mass: f64,
    pending: Option<(Vec<f64>, f64)>,
}

impl<'a> FactorizedTarget<'a> {
    pub fn new(events: &'a EventSet, config: &'a SamplerConfig) -> Result<Self> {
        let p = config.params_at(&config.initial.as_array());
        let kernel = BackgroundKernel {
            events,
            c: PairConstants::new(&p),
        };
        let background: Vec<f64> = pair_reduce(&kernel, &config.backend)?
            .into_iter()
            .map(|s| s[0])
            .collect();
        let window_end = events.window_end();
        let background_mass = events
            .ts()
            .iter()
            .map(|&t| normal_cdf((window_end - t) / p.tau_t) - normal_cdf(-t / p.tau_t))
            .sum();
        Ok(FactorizedTarget {
            events,
            config,
            background,
            background_mass,
            trigger: Vec::new(),
            trigger_mass: 0.0,
            pending: None,
        })
    }

    fn trigger_terms(&self, omega: f64, h_inv: f64) -> Result<(Vec<f64>, f64)> {
        let p = Params {
            mu0: 1.0,
            tau_x: self.config.tau_x,
            tau_t: self.config.tau_t,
            theta: 1.0,
            omega,
            h: 1.0 / h_inv,
        };
        p.validate()?;
        let kernel = TriggerKernel {
            events: self.events,
            c: PairConstants::new(&p),
        };
        let sums = pair_reduce(&kernel, &self.config.backend)?
            .into_iter()
            .map(|s| s[0])
            .collect();
        let window_end = self.events.window_end();
        let mass = self
            .events
            .ts()
            .iter()
            .map(|&t| -(-omega * (window_end - t)).exp_m1())
            .sum();
        Ok((sums, mass))
    }

    fn combine(&self, mu0: f64, theta: f64, trigger: &[f64], trigger_mass: f64) -> f64 {
        let mut total = 0.0;
        for (b, k) in self.background.iter().zip(trigger) {
            total += (mu0 * b + theta * k).ln();
        }
        total -= mu0 * self.background_mass + theta * trigger_mass;
        if total.is_finite() {
            total
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl LikelihoodTarget for FactorizedTarget<'_> {
    fn initialize(&mut self, theta: &[f64; 4]) -> Result<f64> {
        let (sums, mass) = self.trigger_terms(theta[OMEGA], theta[H_INV])?;
        self.trigger = sums;
        self.trigger_mass = mass;
        self.pending = None;
        Ok(self.combine(theta[MU0], theta[THETA], &self.trigger, self.trigger_mass))
    }

    fn propose(&mut self, theta: &[f64; 4], changed: usize) -> Result<f64> {
        if changed == OMEGA || changed == H_INV {
            let (sums, mass) = self.trigger_terms(theta[OMEGA], theta[H_INV])?;
            let ll = self.combine(theta[MU0], theta[THETA], &sums, mass);
            self.pending = Some((sums, mass));
            Ok(ll)
        } else {
            self.pending = None;
            Ok(self.combine(theta[MU0], theta[THETA], &self.trigger, self.trigger_mass))
        }
    }

    fn accept(&mut self) {
        if let Some((sums, mass)) = self.pending.take() {
            self.trigger = sums;
            self.trigger_mass = mass;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub coordinate: usize,
    pub accepted: bool,
}

/// One random-scan Metropolis-Hastings transition. Evaluates the likelihood
/// exactly once.
pub fn mh_step<T, R>(
    state: &mut SamplerState,
    target: &mut T,
    priors: &PriorSpec,
    rng: &mut R,
) -> Result<StepOutcome>
where
    T: LikelihoodTarget + ?Sized,
    R: Rng + ?Sized,
{
    let d = rng.random_range(0..COORDINATES.len());
    let (proposal, log_hastings) = propose_coordinate(state, d, rng);
    let mut candidate = state.theta;
    candidate[d] = proposal;
    let log_post = prior_log_density(&candidate, priors) + target.propose(&candidate, d)?;
    let log_ratio = log_post - state.cached_log_post + log_hastings;
    let u: f64 = rng.random();
    // NaN (−∞ against −∞) compares false and rejects.
    let accepted = u.ln() < log_ratio;
    if accepted {
        state.theta = candidate;
        state.cached_log_post = log_post;
        state.a[d] += 1;
        target.accept();
    }
    Ok(StepOutcome {
        coordinate: d,
        accepted,
    })
}

/// Closes coordinate `d`'s adaptation interval when it is full.
pub fn adapt_step(state: &mut SamplerState, d: usize, target_acceptance: f64) -> Option<(f64, f64, f64)> {
    state.l[d] += 1;
    let bound = state.b[d].ceil();
    if (state.l[d] as f64) < bound {
        return None;
    }
    let ratio = ((state.a[d] as f64 / bound) / target_acceptance).clamp(0.5, 2.0);
    let before = state.b[d];
    state.v[d] *= ratio;
    state.b[d] = before.powf(BOUND_GROWTH);
    state.l[d] = 0;
    state.a[d] = 0;
    Some((before, state.b[d], ratio))
}

/// FNV-1a over the event coordinates, times and window end.
pub fn data_fingerprint(events: &EventSet) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |v: f64| {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for i in 0..events.len() {
        feed(events.xs()[i]);
        feed(events.ys()[i]);
        feed(events.ts()[i]);
    }
    feed(events.window_end());
    h
}

/// SplitMix64 finalizer over `(seed, chain)`.
pub fn derive_chain_seed(seed: u64, chain: usize) -> u64 {
    let mut z = seed ^ (chain as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub chain_index: usize,
    /// Seed of this chain's generator, derived from the configured seed.
    pub chain_seed: u64,
    pub config: SamplerConfig,
    pub priors: PriorSpec,
    pub n_events: usize,
    pub data_fingerprint: u64,
    pub initial: [f64; 4],
    pub initial_log_post: f64,
    /// State after each transition; row `s` is `Θ^(s+1)`.
    pub draws: Vec<[f64; 4]>,
    pub log_post: Vec<f64>,
    pub coordinate: Vec<u8>,
    pub accepted: Vec<bool>,
    pub adaptations: Vec<AdaptationEvent>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn is_burn_in(&self, row: usize) -> bool {
        row < self.config.burn_in
    }

    /// Draws after burn-in.
    pub fn retained(&self) -> &[[f64; 4]] {
        &self.draws[self.config.burn_in.min(self.draws.len())..]
    }

    pub fn retained_column(&self, d: usize) -> Vec<f64> {
        self.retained().iter().map(|row| row[d]).collect()
    }

    pub fn retained_params(&self) -> Vec<Params> {
        self.retained().iter().map(|row| self.config.params_at(row)).collect()
    }

    /// Acceptance rate over the last `window` proposals of coordinate `d`.
    pub fn tail_acceptance(&self, d: usize, window: usize) -> Option<f64> {
        let hits: Vec<bool> = self
            .coordinate
            .iter()
            .zip(&self.accepted)
            .filter(|(c, _)| **c as usize == d)
            .map(|(_, a)| *a)
            .collect();
        if hits.len() < window || window == 0 {
            return None;
        }
        let tail = &hits[hits.len() - window..];
        Some(tail.iter().filter(|a| **a).count() as f64 / window as f64)
    }
}

/// Runs chain `chain_index` of the configuration.
pub fn run_chain(
    events: &EventSet,
    priors: &PriorSpec,
    config: &SamplerConfig,
    chain_index: usize,
) -> Result<Chain> {
    config.validate()?;
    priors.validate()?;
    if config.reuse_fixed_terms {
        let mut target = FactorizedTarget::new(events, config)?;
        run_with_target(events, priors, config, chain_index, &mut target)
    } else {
        let mut target = DirectTarget::new(events, config);
        run_with_target(events, priors, config, chain_index, &mut target)
    }
}

/// Runs all configured chains, one after another.
pub fn run_chains(events: &EventSet, priors: &PriorSpec, config: &SamplerConfig) -> Result<Vec<Chain>> {
    config.validate()?;
    priors.validate()?;
    (0..config.chains)
        .map(|c| run_chain(events, priors, config, c))
        .collect()
}

pub fn run_with_target<T: LikelihoodTarget + ?Sized>(
    events: &EventSet,
    priors: &PriorSpec,
    config: &SamplerConfig,
    chain_index: usize,
    target: &mut T,
) -> Result<Chain> {
    let chain_seed = derive_chain_seed(config.seed, chain_index);
    let mut rng = ChaCha20Rng::seed_from_u64(chain_seed);
    let initial = config.initial.as_array();
    let initial_log_post = prior_log_density(&initial, priors) + target.initialize(&initial)?;
    let mut state = SamplerState::new(initial, config.proposal_sd, initial_log_post);

    let s = config.iterations;
    let mut chain = Chain {
        chain_index,
        chain_seed,
        config: config.clone(),
        priors: *priors,
        n_events: events.len(),
        data_fingerprint: data_fingerprint(events),
        initial,
        initial_log_post,
        draws: Vec::with_capacity(s),
        log_post: Vec::with_capacity(s),
        coordinate: Vec::with_capacity(s),
        accepted: Vec::with_capacity(s),
        adaptations: Vec::new(),
    };
    for step in 0..s {
        let outcome = mh_step(&mut state, target, priors, &mut rng)?;
        let d = outcome.coordinate;
        if config.adapt {
            if let Some((before, after, ratio)) = adapt_step(&mut state, d, config.target_acceptance) {
                chain.adaptations.push(AdaptationEvent {
                    step,
                    coordinate: d,
                    bound_before: before,
                    bound_after: after,
                    ratio,
                    proposal_sd: state.v[d],
                });
            }
        }
        chain.draws.push(state.theta);
        chain.log_post.push(state.cached_log_post);
        chain.coordinate.push(d as u8);
        chain.accepted.push(outcome.accepted);
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Event;
    use approx::assert_relative_eq;

    #[test]
    fn half_normal_density_at_zero() {
        let p = TruncatedNormal::half_normal(1.0);
        assert_relative_eq!(
            p.log_density(1e-300),
            -0.225_791_352_644_727_4,
            max_relative = 1e-14
        );
        assert_eq!(p.log_density(0.0), f64::NEG_INFINITY);
        assert_eq!(p.log_density(-1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn prior_density_value() {
        let p = TruncatedNormal::half_normal(10.0);
        assert_relative_eq!(p.log_density(5.0), -2.653_376_445_638_773, max_relative = 1e-12);
        let spec = PriorSpec::default();
        assert_eq!(prior_log_density(&[1.0, -0.1, 1.0, 1.0], &spec), f64::NEG_INFINITY);
        assert!(prior_log_density(&[1.0, 0.1, 1.0, 1.0], &spec).is_finite());
    }

    #[test]
    fn hastings_correction_values() {
        assert_eq!(hastings_correction(0.7, 0.7, 1.0), 0.0);
        assert!(hastings_correction(50.0, 60.0, 1.0).abs() < 1e-300);
        assert_relative_eq!(
            hastings_correction(0.1, 2.0, 1.0),
            -0.593_492_100_786_062_8,
            max_relative = 1e-12
        );
    }

    #[test]
    fn proposals_stay_positive() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let state = SamplerState::new([0.01; 4], [3.0; 4], 0.0);
        for _ in 0..2000 {
            let (x, _) = propose_coordinate(&state, 2, &mut rng);
            assert!(x > 0.0);
        }
    }

    #[test]
    fn adaptation_schedule() {
        let mut s = SamplerState::new([1.0; 4], [1.0; 4], 0.0);
        // Zero acceptances over the first interval of ⌈5⌉ = 5 steps halves v.
        for i in 0..5 {
            let r = adapt_step(&mut s, 0, 0.44);
            assert_eq!(r.is_some(), i == 4);
        }
        assert_eq!(s.v[0], 0.5);
        assert_relative_eq!(s.b[0], 5f64.powf(1.1));
        assert_eq!((s.l[0], s.a[0]), (0, 0));

        // Exactly 0.44 acceptance leaves v unchanged.
        let mut s = SamplerState::new([1.0; 4], [1.0; 4], 0.0);
        s.b[1] = 25.0;
        s.a[1] = 11;
        for _ in 0..25 {
            adapt_step(&mut s, 1, 0.44);
        }
        assert_relative_eq!(s.v[1], 1.0, max_relative = 1e-15);

        // All accepted: capped at doubling.
        let mut s = SamplerState::new([1.0; 4], [1.0; 4], 0.0);
        s.a[2] = 5;
        for _ in 0..5 {
            adapt_step(&mut s, 2, 0.44);
        }
        assert_eq!(s.v[2], 2.0);
    }

    #[test]
    fn bound_sequence_is_superlinear() {
        let mut b = vec![5.0f64];
        for _ in 0..10 {
            let last = *b.last().unwrap();
            b.push(last.powf(1.1));
        }
        assert_relative_eq!(b[1], 5.873, max_relative = 1e-3);
        assert_relative_eq!(b[2], 7.02, max_relative = 2e-3);
        for w in b.windows(3) {
            assert!(w[1] > w[0]);
            assert!(w[2] - w[1] > w[1] - w[0]);
        }
    }

    fn tiny() -> EventSet {
        EventSet::new(
            (0..12)
                .map(|i| Event::new((i % 3) as f64 * 0.2, (i % 4) as f64 * 0.1, i as f64 * 0.3))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_proposals_and_accepts_identical() {
        struct Fixed(f64);
        impl LikelihoodTarget for Fixed {
            fn initialize(&mut self, _: &[f64; 4]) -> Result<f64> {
                Ok(0.0)
            }
            fn propose(&mut self, _: &[f64; 4], _: usize) -> Result<f64> {
                Ok(self.0)
            }
            fn accept(&mut self) {}
        }
        let priors = PriorSpec::default();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut state = SamplerState::new([1.0; 4], [1e-300; 4], 0.0);
        state.cached_log_post = prior_log_density(&state.theta, &priors);
        for _ in 0..200 {
            let out = mh_step(&mut state, &mut Fixed(f64::NEG_INFINITY), &priors, &mut rng).unwrap();
            assert!(!out.accepted);
        }
        // A vanishing proposal scale reproduces the current point: r = 1.
        for _ in 0..200 {
            let out = mh_step(&mut state, &mut Fixed(0.0), &priors, &mut rng).unwrap();
            assert!(out.accepted);
        }
    }

    #[test]
    fn factorized_matches_direct() {
        let set = tiny();
        let mut config = SamplerConfig::new(10, 0, 1);
        config.tau_x = 0.5;
        config.tau_t = 2.0;
        let mut direct = DirectTarget::new(&set, &config);
        let mut fact = FactorizedTarget::new(&set, &config).unwrap();
        let base = [0.7, 0.2, 1.3, 2.0];
        assert_relative_eq!(
            direct.initialize(&base).unwrap(),
            fact.initialize(&base).unwrap(),
            max_relative = 1e-12
        );
        for (d, v) in [(MU0, 0.9), (OMEGA, 0.4), (THETA, 0.05), (H_INV, 5.0)] {
            let mut p = base;
            p[d] = v;
            assert_relative_eq!(
                direct.propose(&p, d).unwrap(),
                fact.propose(&p, d).unwrap(),
                max_relative = 1e-12
            );
        }
        // Committed ω move must persist into later θ moves.
        let moved = [0.7, 0.2, 0.4, 2.0];
        fact.propose(&moved, OMEGA).unwrap();
        fact.accept();
        let next = [0.7, 0.3, 0.4, 2.0];
        assert_relative_eq!(
            direct.propose(&next, THETA).unwrap(),
            fact.propose(&next, THETA).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn chains_are_reproducible_and_positive() {
        let set = tiny();
        let mut config = SamplerConfig::new(300, 50, 42);
        config.tau_x = 0.5;
        config.tau_t = 2.0;
        config.chains = 2;
        let priors = PriorSpec::default();
        let a = run_chains(&set, &priors, &config).unwrap();
        let b = run_chains(&set, &priors, &config).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].chain_seed, a[1].chain_seed);
        assert_ne!(a[0].draws, a[1].draws);
        assert_eq!(a[0].len(), 300);
        assert_eq!(a[0].retained().len(), 250);
        assert!(a[0].draws.iter().flatten().all(|v| *v > 0.0));
    }

    #[test]
    fn single_iteration_chain() {
        let set = tiny();
        let mut config = SamplerConfig::new(1, 0, 3);
        config.tau_x = 0.5;
        let chain = run_chain(&set, &PriorSpec::default(), &config, 0).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.initial, config.initial.as_array());
        let changed = chain
            .initial
            .iter()
            .zip(&chain.draws[0])
            .filter(|(a, b)| a != b)
            .count();
        assert!(changed <= 1);
    }

    #[test]
    fn config_validation() {
        let set = tiny();
        let priors = PriorSpec::default();
        let mut c = SamplerConfig::new(10, 10, 0);
        assert!(run_chain(&set, &priors, &c, 0).is_err());
        c.burn_in = 0;
        c.target_acceptance = 1.0;
        assert!(run_chain(&set, &priors, &c, 0).is_err());
        c.target_acceptance = 0.44;
        c.initial.theta = 0.0;
        assert!(run_chain(&set, &priors, &c, 0).is_err());
        c.initial.theta = 0.1;
        c.backend = Backend::vectorized(3);
        assert!(run_chain(&set, &priors, &c, 0).is_err());
        let bad = PriorSpec {
            omega: TruncatedNormal { mean: 0.0, sd: 0.0 },
            ..priors
        };
        c.backend = Backend::serial();
        assert!(run_chain(&set, &bad, &c, 0).is_err());
    }
}
