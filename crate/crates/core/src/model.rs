//! The growth chain on the cycle.
//!
//! State is the vector of particle counts. Site `i` has log-rate
//! `lambda_i * u_i` with `u_i = x_{i-1} + x_i + x_{i+1}` (indices mod N), and
//! the next particle goes to `i` with probability proportional to
//! `exp(lambda_i * u_i)`. Raw rates overflow `f64` after a few hundred
//! particles, so everything here works with log-rates and max-subtracted
//! weights.

use serde::Serialize;
use thiserror::Error;

use crate::rng::RngStream;

/// Counts are capped so that `lambda_i * u_i` is formed from integers that
/// are exact in `f64` (`u_i < 3 * 2^40 < 2^53`).
pub const COUNT_CAP: u64 = 1 << 40;

pub const MIN_SITES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("n_sites must be >= {MIN_SITES}, got {0}")]
    TooFewSites(usize),
    #[error("expected {expected} lambdas, got {got}")]
    LambdaCount { expected: usize, got: usize },
    #[error("lambda at index {index} must be positive and finite, got {value}")]
    InvalidLambda { index: usize, value: f64 },
    #[error("expected {expected} counts, got {got}")]
    CountLength { expected: usize, got: usize },
    #[error("count at index {index} is {value}, not below the cap 2^40")]
    CountTooLarge { index: usize, value: u64 },
    #[error("site index {index} out of range for {n_sites} sites")]
    IndexOutOfRange { index: usize, n_sites: usize },
    #[error("count at index {site} reached the cap 2^40 at step {step}")]
    Saturated { site: usize, step: u64 },
}

/// Cycle size and per-site rate parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    lambdas: Vec<f64>,
}

impl Params {
    pub fn new(n_sites: usize, lambdas: Vec<f64>) -> Result<Self, ModelError> {
        if n_sites < MIN_SITES {
            return Err(ModelError::TooFewSites(n_sites));
        }
        if lambdas.len() != n_sites {
            return Err(ModelError::LambdaCount {
                expected: n_sites,
                got: lambdas.len(),
            });
        }
        if let Some((index, &value)) = lambdas
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(ModelError::InvalidLambda { index, value });
        }
        Ok(Self { lambdas })
    }

    pub fn from_lambdas(lambdas: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(lambdas.len(), lambdas)
    }

    pub fn n_sites(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    #[inline]
    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    /// Lambda at `i + offset` on the cycle.
    #[inline]
    pub fn lambda_at(&self, i: usize, offset: isize) -> f64 {
        self.lambdas[self.site(i, offset)]
    }

    /// Site index `i + offset` modulo N.
    #[inline]
    pub fn site(&self, i: usize, offset: isize) -> usize {
        let n = self.n_sites() as isize;
        (i as isize + offset).rem_euclid(n) as usize
    }

    /// Parameters with every site moved `s` positions forward.
    pub fn rotated(&self, s: usize) -> Self {
        Self {
            lambdas: rotate(&self.lambdas, s),
        }
    }

    /// Parameters relabelled in reverse order.
    pub fn reversed(&self) -> Self {
        let mut lambdas = self.lambdas.clone();
        lambdas.reverse();
        Self { lambdas }
    }

    pub fn check_index(&self, index: usize) -> Result<(), ModelError> {
        if index < self.n_sites() {
            Ok(())
        } else {
            Err(ModelError::IndexOutOfRange {
                index,
                n_sites: self.n_sites(),
            })
        }
    }
}

fn rotate<T: Clone>(v: &[T], s: usize) -> Vec<T> {
    let n = v.len();
    (0..n).map(|i| v[(i + n - s % n) % n].clone()).collect()
}

/// Particle counts, one per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Config {
    counts: Vec<u64>,
}

impl Config {
    pub fn zeros(n_sites: usize) -> Self {
        Self {
            counts: vec![0; n_sites],
        }
    }

    pub fn new(params: &Params, counts: Vec<u64>) -> Result<Self, ModelError> {
        if counts.len() != params.n_sites() {
            return Err(ModelError::CountLength {
                expected: params.n_sites(),
                got: counts.len(),
            });
        }
        if let Some((index, &value)) = counts.iter().enumerate().find(|(_, &c)| c >= COUNT_CAP) {
            return Err(ModelError::CountTooLarge { index, value });
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        self.counts[i]
    }

    /// Count at `i + offset` on the cycle.
    #[inline]
    pub fn at(&self, i: usize, offset: isize) -> u64 {
        let n = self.counts.len() as isize;
        self.counts[(i as isize + offset).rem_euclid(n) as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn n_sites(&self) -> usize {
        self.counts.len()
    }

    pub fn rotated(&self, s: usize) -> Self {
        Self {
            counts: rotate(&self.counts, s),
        }
    }

    pub fn reversed(&self) -> Self {
        let mut counts = self.counts.clone();
        counts.reverse();
        Self { counts }
    }

    /// Copy with one more particle at `site`.
    pub fn incremented(&self, site: usize) -> Self {
        let mut counts = self.counts.clone();
        counts[site] += 1;
        Self { counts }
    }
}

/// `x_{i-1} + x_i + x_{i+1}` on the cycle.
pub fn neighborhood_count(config: &Config, i: usize) -> Result<u64, ModelError> {
    let n = config.n_sites();
    if i >= n {
        return Err(ModelError::IndexOutOfRange { index: i, n_sites: n });
    }
    Ok(config.at(i, -1) + config.get(i) + config.at(i, 1))
}

/// Natural logarithms of the growth rates, `lambda_i * u_i`.
pub fn log_rates(params: &Params, config: &Config) -> Vec<f64> {
    (0..params.n_sites())
        .map(|i| params.lambda(i) * (config.at(i, -1) + config.get(i) + config.at(i, 1)) as f64)
        .collect()
}

/// Next-particle distribution over sites.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionDistribution {
    pub probs: Vec<f64>,
}

impl TransitionDistribution {
    /// Indices attaining the maximal probability.
    pub fn argmax_set(&self) -> Vec<usize> {
        argmax_set(&self.probs)
    }
}

pub(crate) fn argmax_set(xs: &[f64]) -> Vec<usize> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    xs.iter()
        .enumerate()
        .filter(|(_, &x)| x == m)
        .map(|(i, _)| i)
        .collect()
}

/// Max-subtracted weights `exp(l_i - max l)` and their sum.
fn stable_weights(log_rates: &[f64], out: &mut [f64]) -> f64 {
    let m = log_rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (w, &l) in out.iter_mut().zip(log_rates) {
        *w = (l - m).exp();
        total += *w;
    }
    total
}

pub fn transition_probabilities(params: &Params, config: &Config) -> TransitionDistribution {
    let ls = log_rates(params, config);
    let mut probs = vec![0.0; ls.len()];
    let total = stable_weights(&ls, &mut probs);
    for p in &mut probs {
        *p /= total;
    }
    TransitionDistribution { probs }
}

/// Inverse-CDF pick: first index whose cumulative weight exceeds
/// `u * total`. Zero-weight sites are never returned.
#[inline]
fn inverse_cdf(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cum += w;
            last_positive = i;
            if cum > target {
                return i;
            }
        }
    }
    // u * total can round up to the full sum
    last_positive
}

/// One transition from `config`, returning the new state and the chosen site.
pub fn step(
    params: &Params,
    config: &Config,
    rng: &mut RngStream,
) -> Result<(Config, usize), ModelError> {
    let ls = log_rates(params, config);
    let mut w = vec![0.0; ls.len()];
    let total = stable_weights(&ls, &mut w);
    let site = inverse_cdf(&w, total, rng.uniform());
    let next = config.incremented(site);
    if next.get(site) >= COUNT_CAP {
        return Err(ModelError::Saturated { site, step: 1 });
    }
    Ok((next, site))
}

/// Mutable chain state for the simulation hot loop.
///
/// Keeps neighbourhood counts and log-rates current so a step touches only
/// the three sites around the allocation, plus one O(N) pass for weights.
#[derive(Debug, Clone)]
pub struct Chain<'a> {
    params: &'a Params,
    counts: Vec<u64>,
    neigh: Vec<u64>,
    log_rates: Vec<f64>,
    weights: Vec<f64>,
    steps: u64,
}

impl<'a> Chain<'a> {
    pub fn new(params: &'a Params, x0: &Config) -> Result<Self, ModelError> {
        let x0 = Config::new(params, x0.counts().to_vec())?;
        let n = params.n_sites();
        let neigh: Vec<u64> = (0..n)
            .map(|i| x0.at(i, -1) + x0.get(i) + x0.at(i, 1))
            .collect();
        let log_rates = log_rates(params, &x0);
        Ok(Self {
            params,
            counts: x0.counts,
            neigh,
            log_rates,
            weights: vec![0.0; n],
            steps: 0,
        })
    }

    pub fn params(&self) -> &'a Params {
        self.params
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn config(&self) -> Config {
        Config {
            counts: self.counts.clone(),
        }
    }

    pub fn log_rates(&self) -> &[f64] {
        &self.log_rates
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Allocate one particle; returns the chosen site.
    pub fn step(&mut self, rng: &mut RngStream) -> Result<usize, ModelError> {
        let total = stable_weights(&self.log_rates, &mut self.weights);
        let site = inverse_cdf(&self.weights, total, rng.uniform());
        self.allocate(site)?;
        Ok(site)
    }

    /// Place a particle at `site` without sampling.
    pub fn allocate(&mut self, site: usize) -> Result<(), ModelError> {
        self.steps += 1;
        let c = self.counts[site] + 1;
        if c >= COUNT_CAP {
            return Err(ModelError::Saturated {
                site,
                step: self.steps,
            });
        }
        self.counts[site] = c;
        for off in [-1isize, 0, 1] {
            let j = self.params.site(site, off);
            self.neigh[j] += 1;
            self.log_rates[j] = self.params.lambda(j) * self.neigh[j] as f64;
        }
        Ok(())
    }
}

/// Observer decision after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

pub trait Observer {
    fn observe(&mut self, chain: &Chain<'_>, site: usize) -> Control;
}

/// Observer that never stops the run.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _chain: &Chain<'_>, _site: usize) -> Control {
        Control::Continue
    }
}

impl<F: FnMut(&Chain<'_>, usize) -> Control> Observer for F {
    fn observe(&mut self, chain: &Chain<'_>, site: usize) -> Control {
        self(chain, site)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub final_config: Config,
    pub steps_executed: u64,
    /// Particles allocated per site during the run (excludes `x0`).
    pub allocations: Vec<u64>,
    pub stopped_early: bool,
}

/// Run up to `n_steps` transitions, stopping early if the observer asks.
pub fn simulate<O: Observer>(
    params: &Params,
    x0: &Config,
    n_steps: u64,
    rng: &mut RngStream,
    observer: &mut O,
) -> Result<SimulationSummary, ModelError> {
    let mut chain = Chain::new(params, x0)?;
    let mut allocations = vec![0u64; params.n_sites()];
    let mut stopped_early = false;
    while chain.steps() < n_steps {
        let site = chain.step(rng)?;
        allocations[site] += 1;
        if observer.observe(&chain, site) == Control::Stop {
            stopped_early = chain.steps() < n_steps;
            break;
        }
    }
    Ok(SimulationSummary {
        final_config: chain.config(),
        steps_executed: chain.steps(),
        allocations,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(ls: &[f64]) -> Params {
        Params::from_lambdas(ls.to_vec()).unwrap()
    }

    fn c(params: &Params, xs: &[u64]) -> Config {
        Config::new(params, xs.to_vec()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert_eq!(Params::new(3, vec![1.0; 3]), Err(ModelError::TooFewSites(3)));
        assert!(matches!(
            Params::new(4, vec![1.0; 5]),
            Err(ModelError::LambdaCount { expected: 4, got: 5 })
        ));
        assert!(matches!(
            Params::new(4, vec![1.0, 2.0, -1.0, 1.0]),
            Err(ModelError::InvalidLambda { index: 2, .. })
        ));
        assert!(Params::new(4, vec![1.0, f64::INFINITY, 1.0, 1.0]).is_err());
        assert!(Params::new(4, vec![1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let params = p(&[1.0; 4]);
        assert!(Config::new(&params, vec![0; 3]).is_err());
        assert!(matches!(
            Config::new(&params, vec![0, COUNT_CAP, 0, 0]),
            Err(ModelError::CountTooLarge { index: 1, .. })
        ));
        assert!(Config::new(&params, vec![0, COUNT_CAP - 1, 0, 0]).is_ok());
    }

    #[test]
    fn neighborhood_examples() {
        let params = p(&[1.0; 4]);
        let zero = Config::zeros(4);
        for i in 0..4 {
            assert_eq!(neighborhood_count(&zero, i).unwrap(), 0);
        }
        let x = c(&params, &[1, 0, 0, 0]);
        assert_eq!(neighborhood_count(&x, 1).unwrap(), 1);
        assert_eq!(neighborhood_count(&x, 2).unwrap(), 0);
        // site 4 is adjacent to site 1
        assert_eq!(neighborhood_count(&x, 3).unwrap(), 1);
        assert!(matches!(
            neighborhood_count(&x, 4),
            Err(ModelError::IndexOutOfRange { index: 4, n_sites: 4 })
        ));
    }

    #[test]
    fn log_rate_examples() {
        let params = p(&[1.0; 4]);
        assert_eq!(log_rates(&params, &Config::zeros(4)), vec![0.0; 4]);
        assert_eq!(
            log_rates(&params, &c(&params, &[1, 0, 0, 0])),
            vec![1.0, 1.0, 0.0, 1.0]
        );
        let params = p(&[1.0, 3.0, 1.0, 1.0]);
        for n in [1u64, 7, 50] {
            let x = c(&params, &[0, n, 0, 0]);
            let nf = n as f64;
            assert_eq!(log_rates(&params, &x), vec![nf, 3.0 * nf, nf, 0.0]);
        }
    }

    #[test]
    fn transition_examples() {
        for n in 4..9 {
            let params = p(&vec![1.3; n]);
            let t = transition_probabilities(&params, &Config::zeros(n));
            for &q in &t.probs {
                assert!((q - 1.0 / n as f64).abs() < 1e-15);
            }
        }
        // e/(3e+1) and 1/(3e+1), high-precision reference values
        let params = p(&[1.0; 4]);
        let t = transition_probabilities(&params, &c(&params, &[1, 0, 0, 0]));
        let big = 0.296_922_742_475_654_7;
        let small = 0.109_231_772_573_035_93;
        for (q, want) in t.probs.iter().zip([big, big, small, big]) {
            assert!((q - want).abs() < 1e-15, "{q} vs {want}");
        }
        let params = p(&[1.0, 3.0, 1.0, 1.0]);
        let t = transition_probabilities(&params, &c(&params, &[0, 50, 0, 0]));
        assert!(t.probs[1] >= 1.0 - 1e-20);
        assert!(t.probs.iter().enumerate().all(|(i, &q)| i == 1 || q < 1e-40));
    }

    #[test]
    fn dominant_site_always_chosen() {
        let params = p(&[1.0, 3.0, 1.0, 1.0]);
        let x = c(&params, &[0, 50, 0, 0]);
        for s in 0..1000 {
            let mut rng = RngStream::new(5, s);
            let (next, site) = step(&params, &x, &mut rng).unwrap();
            assert_eq!(site, 1);
            assert_eq!(next.get(1), 51);
        }
    }

    #[test]
    fn step_replays() {
        let params = p(&[1.0, 2.0, 0.5, 1.5, 1.0]);
        let x = c(&params, &[1, 0, 2, 0, 1]);
        let a = step(&params, &x, &mut RngStream::new(9, 4)).unwrap();
        let b = step(&params, &x, &mut RngStream::new(9, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_step_is_uniform() {
        let params = p(&[1.0; 4]);
        let x0 = Config::zeros(4);
        let trials = 100_000u64;
        let mut hits = [0u64; 4];
        let mut rng = RngStream::new(2024, 0);
        for _ in 0..trials {
            let (_, site) = step(&params, &x0, &mut rng).unwrap();
            hits[site] += 1;
        }
        let se = (0.25 * 0.75 / trials as f64).sqrt();
        for h in hits {
            let freq = h as f64 / trials as f64;
            assert!((freq - 0.25).abs() < 3.0 * se, "{freq}");
        }
    }

    #[test]
    fn saturation_is_reported() {
        let params = p(&[1.0, 3.0, 1.0, 1.0]);
        let x = c(&params, &[0, COUNT_CAP - 1, 0, 0]);
        let err = step(&params, &x, &mut RngStream::new(1, 1)).unwrap_err();
        assert!(matches!(err, ModelError::Saturated { site: 1, .. }));
        let mut rng = RngStream::new(1, 1);
        let err = simulate(&params, &x, 10, &mut rng, &mut NoObserver).unwrap_err();
        assert_eq!(err, ModelError::Saturated { site: 1, step: 1 });
    }

    #[test]
    fn simulate_identity_and_conservation() {
        let params = p(&[1.0, 2.0, 0.5, 1.5, 1.0]);
        let x0 = c(&params, &[3, 0, 1, 0, 2]);
        let mut rng = RngStream::new(3, 0);
        let s = simulate(&params, &x0, 0, &mut rng, &mut NoObserver).unwrap();
        assert_eq!(s.final_config, x0);
        assert_eq!(s.steps_executed, 0);
        let mut rng = RngStream::new(3, 0);
        let s = simulate(&params, &x0, 500, &mut rng, &mut NoObserver).unwrap();
        assert_eq!(s.final_config.total(), x0.total() + 500);
        assert_eq!(s.allocations.iter().sum::<u64>(), 500);
        let mut rng = RngStream::new(3, 0);
        let again = simulate(&params, &x0, 500, &mut rng, &mut NoObserver).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn observer_can_stop() {
        let params = p(&[1.0; 4]);
        let mut rng = RngStream::new(3, 0);
        let mut stop_at_ten = |chain: &Chain<'_>, _site: usize| {
            if chain.steps() == 10 {
                Control::Stop
            } else {
                Control::Continue
            }
        };
        let s = simulate(&params, &Config::zeros(4), 100, &mut rng, &mut stop_at_ten).unwrap();
        assert_eq!(s.steps_executed, 10);
        assert!(s.stopped_early);
    }

    #[test]
    fn chain_log_rates_track_recomputation() {
        let params = p(&[0.7, 1.9, 1.1, 2.3, 0.4, 1.0]);
        let x0 = c(&params, &[2, 0, 5, 1, 0, 3]);
        let mut chain = Chain::new(&params, &x0).unwrap();
        let mut rng = RngStream::new(8, 8);
        for _ in 0..300 {
            chain.step(&mut rng).unwrap();
            assert_eq!(chain.log_rates(), log_rates(&params, &chain.config()).as_slice());
        }
    }
}
