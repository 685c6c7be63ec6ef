//! Exact and semi-exact sticking probabilities.
//!
//! Two families:
//!
//! - Single site at a local maximum `k`. While every particle lands at `k`,
//!   the neighbour rates relative to `Gamma_k` shrink geometrically and the
//!   rest stays fixed, so the probability that all future particles land at
//!   `k` is an explicit infinite product, and a union bound over the three
//!   geometric series gives a closed-form certificate.
//! - Equal pair `{k, k+1}`. Conditioned on staying in the pair, each
//!   particle goes to `k+1` with the constant probability `p(r)`, so the
//!   probability that the first `n+1` particles stay in the pair is the
//!   expectation of a path weight `W_n(U_1, ..., U_n)` over Bernoulli(p)
//!   paths.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::landscape::{is_local_maximum, p_of, r_of, LandscapeError};
use crate::model::{log_rates, Config, ModelError, Params};
use crate::rng::RngStream;
use crate::stats::{log1p_exp3, log_sum_exp, Estimate};

/// Hard cap on product terms for the single-site oracle.
pub const MAX_PRODUCT_TERMS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("site {} is not a local maximum", .k + 1)]
    NotLocalMaximum { k: usize },
    #[error("maximal rate is not attained at site {}", .k + 1)]
    SiteNotDominant { k: usize },
    #[error("maximal rate is not attained on the pair starting at site {}", .k + 1)]
    PairNotDominant { k: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("neither side of the pair has positive drift (left {left}, right {right})")]
    NoPositiveDrift { left: f64, right: f64 },
    #[error("product not resolved to tolerance within {0} terms")]
    TruncationUnresolved(u64),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_site(params: &Params, k: usize) -> Result<(), OracleError> {
    Ok(params.check_index(k)?)
}

/// Log-ratios of the rates around a local maximum `k` to `Gamma_k`, with the
/// geometric decay rate of each while particles keep landing at `k`.
struct SiteTerms {
    /// `(log ratio, decay per allocation)` for `k-1`, `k+1` and the rest.
    terms: [(f64, f64); 3],
}

impl SiteTerms {
    fn new(params: &Params, config: &Config, k: usize) -> Result<Self, OracleError> {
        check_site(params, k)?;
        if !is_local_maximum(params, k) {
            return Err(OracleError::NotLocalMaximum { k });
        }
        let ls = log_rates(params, config);
        let max = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if ls[k] != max {
            return Err(OracleError::SiteNotDominant { k });
        }
        let left = params.site(k, -1);
        let right = params.site(k, 1);
        let rest: Vec<f64> = (0..params.n_sites())
            .filter(|&i| i != k && i != left && i != right)
            .map(|i| ls[i])
            .collect();
        let lk = params.lambda(k);
        Ok(Self {
            terms: [
                (ls[left] - ls[k], lk - params.lambda(left)),
                (ls[right] - ls[k], lk - params.lambda(right)),
                (log_sum_exp(&rest) - ls[k], lk),
            ],
        })
    }

    /// `sum_{n >= start} x_n` for the excess `x_n` in the product's denominator.
    fn tail(&self, start: u64) -> f64 {
        self.terms
            .iter()
            .map(|&(lr, d)| (lr - d * start as f64).exp() / -(-d).exp_m1())
            .sum()
    }

    fn log1p_excess(&self, n: u64) -> f64 {
        let nf = n as f64;
        let [a, b, c] = self.terms;
        log1p_exp3(a.0 - a.1 * nf, b.0 - b.1 * nf, c.0 - c.1 * nf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StickProbability {
    /// Truncated product; overestimates the exact value by at most `tail_bound`.
    pub probability: f64,
    pub terms_used: u64,
    pub tail_bound: f64,
}

/// Probability that every future particle lands at the local maximum `k`,
/// given the maximal rate is at `k`. Absolute error below `tol`.
pub fn single_site_stick_probability(
    params: &Params,
    config: &Config,
    k: usize,
    tol: f64,
) -> Result<StickProbability, OracleError> {
    if !(tol > 0.0) {
        return Err(OracleError::InvalidTolerance(tol));
    }
    let terms = SiteTerms::new(params, config, k)?;
    let mut log_p = 0.0f64;
    let mut n = 0u64;
    loop {
        // 1 - exp(-tail) <= tail bounds the error of exp(-partial sum)
        let tail = terms.tail(n);
        if tail < tol {
            return Ok(StickProbability {
                probability: (-log_p).exp(),
                terms_used: n,
                tail_bound: tail,
            });
        }
        if n >= MAX_PRODUCT_TERMS {
            return Err(OracleError::TruncationUnresolved(n));
        }
        log_p += terms.log1p_excess(n);
        n += 1;
    }
}

/// Certified upper bound on the probability that some future particle
/// lands outside the local maximum `k`:
/// `a / (1 - e^{-(l_k - l_{k-1})}) + b / (1 - e^{-(l_k - l_{k+1})}) + c / (1 - e^{-l_k})`
/// with `a, b, c` the rates of `k-1`, `k+1` and all other sites relative to
/// `Gamma_k`. Values above 1 are vacuous.
pub fn escape_bound(params: &Params, config: &Config, k: usize) -> Result<f64, OracleError> {
    Ok(SiteTerms::new(params, config, k)?.tail(0))
}

/// Rates around an equal-lambda pair, normalised by `Gamma_k + Gamma_{k+1}`
/// and kept as logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRates {
    pub k: usize,
    pub log_gamma_left: f64,
    pub log_gamma_right: f64,
    /// `-inf` when there are no other sites (`N = 4`).
    pub log_gamma_rest: f64,
    pub p: f64,
    pub lambda_left: f64,
    pub lambda: f64,
    pub lambda_right: f64,
}

impl PairRates {
    /// Requires `lambda_k == lambda_{k+1}`; does not check dominance.
    pub fn from_state(params: &Params, config: &Config, k: usize) -> Result<Self, OracleError> {
        check_site(params, k)?;
        let lambda = params.lambda(k);
        if params.lambda_at(k, 1) != lambda {
            return Err(LandscapeError::UnequalPair { k }.into());
        }
        let ls = log_rates(params, config);
        let idx = |off| params.site(k, off);
        let log_pair = log_sum_exp(&[ls[k], ls[idx(1)]]);
        let rest: Vec<f64> = (0..params.n_sites())
            .filter(|i| ![idx(-1), k, idx(1), idx(2)].contains(i))
            .map(|i| ls[i])
            .collect();
        Ok(Self {
            k,
            log_gamma_left: ls[idx(-1)] - log_pair,
            log_gamma_right: ls[idx(2)] - log_pair,
            log_gamma_rest: log_sum_exp(&rest) - log_pair,
            p: p_of(lambda, r_of(config, k) as f64),
            lambda_left: params.lambda_at(k, -1),
            lambda,
            lambda_right: params.lambda_at(k, 2),
        })
    }

    /// As [`PairRates::from_state`], additionally requiring the maximal rate
    /// on the pair.
    pub fn dominant(params: &Params, config: &Config, k: usize) -> Result<Self, OracleError> {
        let rates = Self::from_state(params, config, k)?;
        let ls = log_rates(params, config);
        let max = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if ls[k].max(ls[params.site(k, 1)]) != max {
            return Err(OracleError::PairNotDominant { k });
        }
        Ok(rates)
    }

    pub fn gamma_left(&self) -> f64 {
        self.log_gamma_left.exp()
    }

    pub fn gamma_right(&self) -> f64 {
        self.log_gamma_right.exp()
    }

    pub fn gamma_rest(&self) -> f64 {
        self.log_gamma_rest.exp()
    }

    /// Log-excess terms at step `i` with `u` of the first `i` pair
    /// allocations at `k+1`: `(left, right, rest)`.
    #[inline]
    fn exponents(&self, i: u64, u: u64) -> (f64, f64, f64) {
        let (i_f, u_f) = (i as f64, u as f64);
        (
            self.log_gamma_left + self.lambda_left * (i_f - u_f) - self.lambda * i_f,
            self.log_gamma_right + self.lambda_right * u_f - self.lambda * i_f,
            self.log_gamma_rest - self.lambda * i_f,
        )
    }

    pub fn left_drift(&self) -> f64 {
        self.lambda_left * (1.0 - self.p) - self.lambda
    }

    pub fn right_drift(&self) -> f64 {
        self.lambda_right * self.p - self.lambda
    }
}

/// Path functionals for one Bernoulli path `xi_1..xi_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathWeights {
    /// `log W_n`.
    pub log_exact: f64,
    /// Log of the product with the rest-of-cycle term dropped.
    pub log_upper: f64,
    /// `-(gamma_left Z_n(zeta_left) + gamma_right Z_n(zeta_right))`.
    pub log_lower_factor: f64,
}

pub fn path_weights(rates: &PairRates, path: &[bool]) -> PathWeights {
    let mut u = 0u64;
    let mut log_exact = 0.0;
    let mut log_upper = 0.0;
    let mut lower = 0.0;
    for i in 0..=path.len() as u64 {
        if i > 0 && path[i as usize - 1] {
            u += 1;
        }
        let (a, b, c) = rates.exponents(i, u);
        log_exact -= log1p_exp3(a, b, c);
        log_upper -= log1p_exp3(a, b, f64::NEG_INFINITY);
        lower -= a.exp() + b.exp();
    }
    PathWeights {
        log_exact,
        log_upper,
        log_lower_factor: lower,
    }
}

fn path_samples(rates: &PairRates, n: u64, samples: usize, seed: u64) -> Vec<PathWeights> {
    (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngStream::new(seed, s);
            let path: Vec<bool> = (0..n).map(|_| rng.bernoulli(rates.p)).collect();
            path_weights(rates, &path)
        })
        .collect()
}

/// Monte Carlo estimate of `P(first n+1 particles land in {k, k+1})` as the
/// Bernoulli expectation of the path weight `W_n`.
pub fn pair_stick_probability_mc(
    params: &Params,
    config: &Config,
    k: usize,
    n: u64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, OracleError> {
    let rates = PairRates::dominant(params, config, k)?;
    let w: Vec<f64> = path_samples(&rates, n, samples, seed)
        .iter()
        .map(|pw| pw.log_exact.exp())
        .collect();
    Ok(Estimate::from_samples(&w))
}

/// Monte Carlo estimate of the upper bound obtained by dropping the
/// rest-of-cycle rates from every denominator.
pub fn pair_stick_upper_bound_mc(
    params: &Params,
    config: &Config,
    k: usize,
    n: u64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, OracleError> {
    let rates = PairRates::dominant(params, config, k)?;
    let w: Vec<f64> = path_samples(&rates, n, samples, seed)
        .iter()
        .map(|pw| pw.log_upper.exp())
        .collect();
    Ok(Estimate::from_samples(&w))
}

/// Monte Carlo estimate of the expectation factor of the lower bound,
/// `E exp(-gamma_left Z_n(zeta_left) - gamma_right Z_n(zeta_right))`.
/// The true lower bound is this factor times an unspecified positive
/// constant, which is not computed.
pub fn pair_stick_lower_factor_mc(
    params: &Params,
    config: &Config,
    k: usize,
    n: u64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, OracleError> {
    let rates = PairRates::dominant(params, config, k)?;
    let w: Vec<f64> = path_samples(&rates, n, samples, seed)
        .iter()
        .map(|pw| pw.log_lower_factor.exp())
        .collect();
    Ok(Estimate::from_samples(&w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// Rate at `k-1` overtook the pair.
    Left,
    /// Rate at `k+2` overtook the pair.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RelocationOutcome {
    Relocated { n_hat: u64, side: Side },
    NotWithin { max_steps: u64 },
}

/// First `n` at which a side rate reaches the pair's combined rate along the
/// path `xi`, where `S_n` counts pair allocations at `k+1`:
/// right side `gamma_right e^{lambda_right S_n - lambda n} >= 1`,
/// left side `gamma_left e^{lambda_left (n - S_n) - lambda n} >= 1`.
pub fn relocation_on_path<I: IntoIterator<Item = bool>>(
    rates: &PairRates,
    xi: I,
    max_steps: u64,
) -> RelocationOutcome {
    let check = |n: u64, s: u64| {
        let (a, b, _) = rates.exponents(n, s);
        if b >= 0.0 {
            Some(Side::Right)
        } else if a >= 0.0 {
            Some(Side::Left)
        } else {
            None
        }
    };
    if let Some(side) = check(0, 0) {
        return RelocationOutcome::Relocated { n_hat: 0, side };
    }
    let mut s = 0u64;
    for (idx, x) in xi.into_iter().enumerate() {
        let n = idx as u64 + 1;
        if n > max_steps {
            break;
        }
        if x {
            s += 1;
        }
        if let Some(side) = check(n, s) {
            return RelocationOutcome::Relocated { n_hat: n, side };
        }
    }
    RelocationOutcome::NotWithin { max_steps }
}

/// Sample the relocation time `min(n_hat_left, n_hat_right)` for the pair
/// `{k, k+1}`. Rejected when neither side has positive drift.
pub fn relocation_stopping_time(
    params: &Params,
    config: &Config,
    k: usize,
    rng: &mut RngStream,
    max_steps: u64,
) -> Result<RelocationOutcome, OracleError> {
    let rates = PairRates::from_state(params, config, k)?;
    let (left, right) = (rates.left_drift(), rates.right_drift());
    if left <= 0.0 && right <= 0.0 {
        return Err(OracleError::NoPositiveDrift { left, right });
    }
    let p = rates.p;
    Ok(relocation_on_path(
        &rates,
        std::iter::repeat_with(|| rng.bernoulli(p)),
        max_steps,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(ls: &[f64]) -> Params {
        Params::from_lambdas(ls.to_vec()).unwrap()
    }

    fn config(p: &Params, xs: &[u64]) -> Config {
        Config::new(p, xs.to_vec()).unwrap()
    }

    /// Direct partial product with raw rates for small states.
    fn naive_product(p: &Params, x: &Config, k: usize, terms: u64) -> f64 {
        let mut x = x.clone();
        let mut prob = 1.0;
        for _ in 0..terms {
            let g: Vec<f64> = log_rates(p, &x).iter().map(|l| l.exp()).collect();
            prob *= g[k] / g.iter().sum::<f64>();
            x = x.incremented(k);
        }
        prob
    }

    #[test]
    fn single_site_reference_value() {
        let p = params(&[1.0, 3.0, 1.0, 1.0]);
        let out = single_site_stick_probability(&p, &Config::zeros(4), 1, 1e-12).unwrap();
        // 40-digit reference for prod e^{3n} / (2 e^n + e^{3n} + 1)
        assert!((out.probability - 0.181_139_548_852_872_1).abs() < 1e-12, "{out:?}");
        assert!(out.tail_bound < 1e-12);
        assert!((out.probability - naive_product(&p, &Config::zeros(4), 1, 60)).abs() < 1e-13);
    }

    #[test]
    fn single_site_matches_naive_product_elsewhere() {
        let p = params(&[0.4, 1.7, 0.9, 1.1, 0.3]);
        let x = config(&p, &[1, 2, 0, 1, 0]);
        let out = single_site_stick_probability(&p, &x, 1, 1e-13).unwrap();
        assert!((out.probability - naive_product(&p, &x, 1, 200)).abs() < 1e-12);
    }

    #[test]
    fn dominant_limit_tends_to_one() {
        let p = params(&[1.0, 3.0, 1.0, 1.0]);
        let x = config(&p, &[0, 40, 0, 0]);
        let out = single_site_stick_probability(&p, &x, 1, 1e-14).unwrap();
        let bound = escape_bound(&p, &x, 1).unwrap();
        assert!(bound < 1e-30);
        assert!(1.0 - out.probability <= bound);
    }

    #[test]
    fn single_site_preconditions() {
        let p = params(&[1.0, 3.0, 1.0, 1.0]);
        assert!(matches!(
            single_site_stick_probability(&p, &Config::zeros(4), 0, 1e-9),
            Err(OracleError::NotLocalMaximum { k: 0 })
        ));
        let x = config(&p, &[0, 0, 0, 9]);
        assert!(matches!(
            single_site_stick_probability(&p, &x, 1, 1e-9),
            Err(OracleError::SiteNotDominant { k: 1 })
        ));
        assert!(matches!(
            single_site_stick_probability(&p, &Config::zeros(4), 1, 0.0),
            Err(OracleError::InvalidTolerance(_))
        ));
        assert!(escape_bound(&p, &Config::zeros(4), 2).is_err());
    }

    #[test]
    fn escape_bound_examples() {
        let p = params(&[1.0, 3.0, 1.0, 1.0]);
        let b8 = escape_bound(&p, &config(&p, &[0, 8, 0, 0]), 1).unwrap();
        assert!((b8 - 2.603_375_593_389_594e-7).abs() < 1e-20, "{b8}");
        let b0 = escape_bound(&p, &Config::zeros(4), 1).unwrap();
        assert!((b0 - 3.365_430_981_990_587).abs() < 1e-14, "{b0}");
        let stick = single_site_stick_probability(&p, &Config::zeros(4), 1, 1e-12).unwrap();
        assert!(b0 >= 1.0 - stick.probability);
    }

    fn saddle() -> Params {
        params(&[0.5, 1.0, 1.0, 2.0])
    }

    #[test]
    fn pair_rates_from_state() {
        let p = saddle();
        let x = config(&p, &[1, 3, 0, 0]);
        let r = PairRates::dominant(&p, &x, 1).unwrap();
        // Gamma = (e^2, e^4, e^3, e^2)
        let pair = 4f64.exp() + 3f64.exp();
        assert!((r.gamma_left() - 2f64.exp() / pair).abs() < 1e-15);
        assert!((r.gamma_right() - 2f64.exp() / pair).abs() < 1e-15);
        assert_eq!(r.log_gamma_rest, f64::NEG_INFINITY);
        assert!((r.p - p_of(1.0, -1.0)).abs() < 1e-16);
        assert!(matches!(
            PairRates::dominant(&p, &config(&p, &[0, 0, 0, 3]), 1),
            Err(OracleError::PairNotDominant { k: 1 })
        ));
    }

    #[test]
    fn n_zero_is_exact() {
        let p = params(&[0.5, 1.0, 1.0, 2.0, 0.8]);
        let x = config(&p, &[1, 3, 0, 0, 1]);
        let est = pair_stick_probability_mc(&p, &x, 1, 0, 50, 1).unwrap();
        let g: Vec<f64> = log_rates(&p, &x).iter().map(|l| l.exp()).collect();
        let want = (g[1] + g[2]) / g.iter().sum::<f64>();
        assert!((est.mean - want).abs() < 1e-15);
        assert_eq!(est.std_error, 0.0);
    }

    /// Exhaustive sum over all paths of `p^s q^{n-s} W_n`, computed with raw
    /// rates by conditioning step by step on the chain itself.
    fn exact_by_enumeration(p: &Params, x: &Config, k: usize, n: u32) -> f64 {
        let mut total = 0.0;
        for bits in 0..(1u32 << (n + 1)) {
            let mut state = x.clone();
            let mut prob = 1.0;
            for j in 0..=n {
                let g: Vec<f64> = log_rates(p, &state).iter().map(|l| l.exp()).collect();
                let site = if bits >> j & 1 == 1 { p.site(k, 1) } else { k };
                prob *= g[site] / g.iter().sum::<f64>();
                state = state.incremented(site);
            }
            total += prob;
        }
        total
    }

    #[test]
    fn path_weights_match_enumeration() {
        let p = params(&[0.5, 1.0, 1.0, 2.0, 0.8]);
        let x = config(&p, &[1, 3, 0, 0, 1]);
        let rates = PairRates::dominant(&p, &x, 1).unwrap();
        for n in 0..6u32 {
            let mut exact = 0.0;
            for bits in 0..(1u32 << n) {
                let path: Vec<bool> = (0..n).map(|j| bits >> j & 1 == 1).collect();
                let s = bits.count_ones() as i32;
                let w = rates.p.powi(s) * (1.0 - rates.p).powi(n as i32 - s);
                exact += w * path_weights(&rates, &path).log_exact.exp();
            }
            let direct = exact_by_enumeration(&p, &x, 1, n);
            assert!((exact - direct).abs() < 1e-13, "n={n}: {exact} vs {direct}");
        }
    }

    #[test]
    fn upper_dominates_exact_pathwise() {
        let p = params(&[0.5, 1.0, 1.0, 2.0, 0.8, 1.3]);
        let x = config(&p, &[1, 4, 1, 0, 1, 0]);
        let rates = PairRates::dominant(&p, &x, 1).unwrap();
        for s in 0..200 {
            let mut rng = RngStream::new(3, s);
            let path: Vec<bool> = (0..50).map(|_| rng.bernoulli(rates.p)).collect();
            let w = path_weights(&rates, &path);
            assert!(w.log_upper >= w.log_exact);
        }
        let a = pair_stick_probability_mc(&p, &x, 1, 30, 500, 8).unwrap();
        let b = pair_stick_upper_bound_mc(&p, &x, 1, 30, 500, 8).unwrap();
        assert!(b.mean >= a.mean);
    }

    #[test]
    fn estimate_non_increasing_in_n() {
        let p = saddle();
        let x = config(&p, &[1, 3, 0, 0]);
        let mut prev = f64::INFINITY;
        for n in [0, 1, 5, 20, 80] {
            let e = pair_stick_probability_mc(&p, &x, 1, n, 400, 2).unwrap();
            assert!(e.mean <= prev);
            prev = e.mean;
        }
    }

    #[test]
    fn relocation_examples() {
        let p = saddle();
        // Gamma_{k+2} already above the pair: x = (0, 0, 0, 1) gives Gamma_4 = e^2
        let x = config(&p, &[0, 0, 0, 1]);
        let rates = PairRates::from_state(&p, &x, 1).unwrap();
        assert!(rates.gamma_right() >= 1.0);
        let out = relocation_stopping_time(&p, &x, 1, &mut RngStream::new(1, 1), 100).unwrap();
        assert_eq!(out, RelocationOutcome::Relocated { n_hat: 0, side: Side::Right });

        // all-ones path: smallest n with log gamma_2 + n (lambda_right - lambda) >= 0
        let x = config(&p, &[0, 6, 0, 1]);
        let rates = PairRates::from_state(&p, &x, 1).unwrap();
        let want = (-rates.log_gamma_right / (2.0 - 1.0)).ceil() as u64;
        let out = relocation_on_path(&rates, std::iter::repeat(true), 1000);
        assert_eq!(out, RelocationOutcome::Relocated { n_hat: want, side: Side::Right });
    }

    #[test]
    fn relocation_rejects_no_drift() {
        // r = -3: p small, right drift 2p - 1 < 0; left drift 0.5 (1-p) - 1 < 0
        let p = saddle();
        let x = config(&p, &[3, 9, 0, 0]);
        assert!(matches!(
            relocation_stopping_time(&p, &x, 1, &mut RngStream::new(1, 1), 10),
            Err(OracleError::NoPositiveDrift { .. })
        ));
    }
}
