//! Random geometric progressions driven by Bernoulli sequences.
//!
//! For an i.i.d. positive sequence `zeta`, `Y_0 = 1`, `Y_i = zeta_1 ... zeta_i`,
//! `Z_n = Y_0 + ... + Y_n` and `Z = lim Z_n`. The sequences used by the pair
//! estimates have two-point terms determined by a Bernoulli(p) variable `xi`:
//!
//! - left side:  `zeta = exp(lambda_left * (1 - xi) - lambda)`
//! - right side: `zeta = exp(lambda_right * xi - lambda)`
//!
//! and their reciprocals `1 / zeta`. All paths are generated as
//! `xi_i = (u_i < p)` from a seed-indexed stream, so two specs evaluated on
//! the same stream are coupled monotonically in `p`.

use serde::Serialize;
use thiserror::Error;

use crate::rng::RngStream;
use crate::stats::{dominance_violation, ks_critical, Estimate};

/// Largest `n` accepted by the exhaustive `2^n` path enumeration.
pub const MAX_ENUMERATION_DEPTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgressionError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("expected log of the terms is {drift}, so the series diverges almost surely")]
    DivergentSpec { drift: f64 },
    #[error("expected log of the terms is {drift}; the stopping time needs positive drift")]
    NonPositiveDrift { drift: f64 },
    #[error("tail bound not below {tail_epsilon} after {max_terms} terms")]
    TruncationUnresolved { max_terms: u64, tail_epsilon: f64 },
    #[error("partial sum left the f64 range after {terms} terms")]
    NonFinite { terms: u64 },
    #[error("enumeration depth {0} outside 1..={MAX_ENUMERATION_DEPTH}")]
    DepthOutOfRange(usize),
    #[error("specs are not comparable: {0}")]
    NotComparable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZetaKind {
    /// Terms `exp(lambda_outer * (1 - xi) - lambda)`.
    Left,
    /// Terms `exp(lambda_outer * xi - lambda)`.
    Right,
}

/// A Bernoulli-driven i.i.d. term sequence, optionally inverted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaSpec {
    pub kind: ZetaKind,
    pub p: f64,
    /// `lambda_{k-1}` for [`ZetaKind::Left`], `lambda_{k+2}` for [`ZetaKind::Right`].
    pub lambda_outer: f64,
    pub lambda: f64,
    /// Terms are `1 / zeta` instead of `zeta`.
    pub reciprocal: bool,
}

impl ZetaSpec {
    pub fn new(kind: ZetaKind, p: f64, lambda_outer: f64, lambda: f64) -> Result<Self, ProgressionError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ProgressionError::InvalidSpec(format!("p = {p} not in (0, 1)")));
        }
        for (name, v) in [("lambda_outer", lambda_outer), ("lambda", lambda)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ProgressionError::InvalidSpec(format!("{name} = {v} must be positive")));
            }
        }
        Ok(Self {
            kind,
            p,
            lambda_outer,
            lambda,
            reciprocal: false,
        })
    }

    pub fn left(p: f64, lambda_left: f64, lambda: f64) -> Result<Self, ProgressionError> {
        Self::new(ZetaKind::Left, p, lambda_left, lambda)
    }

    pub fn right(p: f64, lambda_right: f64, lambda: f64) -> Result<Self, ProgressionError> {
        Self::new(ZetaKind::Right, p, lambda_right, lambda)
    }

    /// Same spec with a different success probability.
    pub fn with_p(&self, p: f64) -> Result<Self, ProgressionError> {
        let mut s = Self::new(self.kind, p, self.lambda_outer, self.lambda)?;
        s.reciprocal = self.reciprocal;
        Ok(s)
    }

    /// `log zeta` for `xi = 0` and `xi = 1`.
    pub fn log_terms(&self) -> (f64, f64) {
        let (fail, success) = match self.kind {
            ZetaKind::Left => (self.lambda_outer - self.lambda, -self.lambda),
            ZetaKind::Right => (-self.lambda, self.lambda_outer - self.lambda),
        };
        if self.reciprocal {
            (-fail, -success)
        } else {
            (fail, success)
        }
    }

    #[inline]
    pub fn log_term(&self, xi: bool) -> f64 {
        let (fail, success) = self.log_terms();
        if xi {
            success
        } else {
            fail
        }
    }

    /// Terms increase with `xi` (so the sequence is stochastically
    /// increasing in `p`).
    pub fn increasing_in_p(&self) -> bool {
        let (fail, success) = self.log_terms();
        success > fail
    }

    pub fn expected_log(&self) -> f64 {
        let base = match self.kind {
            ZetaKind::Left => self.lambda_outer * (1.0 - self.p) - self.lambda,
            ZetaKind::Right => self.lambda_outer * self.p - self.lambda,
        };
        if self.reciprocal {
            -base
        } else {
            base
        }
    }

    pub fn stdev_log(&self) -> f64 {
        self.lambda_outer * (self.p * (1.0 - self.p)).sqrt()
    }

    /// Spec for the reciprocal sequence `1 / zeta`.
    pub fn reciprocal(&self) -> Self {
        Self {
            reciprocal: !self.reciprocal,
            ..*self
        }
    }
}

/// Truncated realization of `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressionSample {
    pub value: f64,
    pub terms_used: u64,
    pub truncation_error_bound: f64,
}

/// `Z_0, ..., Z_n` along a fixed Bernoulli path of length `n`.
pub fn partial_sums(spec: &ZetaSpec, path: &[bool]) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.len() + 1);
    let mut log_y = 0.0;
    let mut z = 1.0;
    out.push(z);
    for &xi in path {
        log_y += spec.log_term(xi);
        z += log_y.exp();
        out.push(z);
    }
    out
}

/// Draw `n` Bernoulli(p) variables from `rng`.
pub fn bernoulli_path(p: f64, n: usize, rng: &mut RngStream) -> Vec<bool> {
    (0..n).map(|_| rng.bernoulli(p)).collect()
}

/// Sum `Z` along the path produced by `xi` until the estimated remainder
/// drops below `tail_epsilon`.
///
/// After `i` terms the contraction factor is estimated conservatively as
/// `c = exp(E log zeta + 3 sd / sqrt(i))`; once `c < 1` the remainder is
/// estimated by the geometric majorant `Y_i c / (1 - c)`.
pub fn sum_until_tail<I: IntoIterator<Item = bool>>(
    spec: &ZetaSpec,
    xi: I,
    tail_epsilon: f64,
    max_terms: u64,
) -> Result<ProgressionSample, ProgressionError> {
    let drift = spec.expected_log();
    if drift >= 0.0 {
        return Err(ProgressionError::DivergentSpec { drift });
    }
    let sd = spec.stdev_log();
    let mut log_y = 0.0f64;
    let mut z = 1.0f64;
    let mut terms = 0u64;
    let mut xi = xi.into_iter();
    while terms < max_terms {
        let Some(x) = xi.next() else { break };
        log_y += spec.log_term(x);
        z += log_y.exp();
        terms += 1;
        if !z.is_finite() {
            return Err(ProgressionError::NonFinite { terms });
        }
        let log_c = drift + 3.0 * sd / (terms as f64).sqrt();
        if log_c < 0.0 {
            let tail = (log_y + log_c).exp() / -log_c.exp_m1();
            if tail < tail_epsilon {
                return Ok(ProgressionSample {
                    value: z,
                    terms_used: terms,
                    truncation_error_bound: tail,
                });
            }
        }
    }
    Err(ProgressionError::TruncationUnresolved {
        max_terms,
        tail_epsilon,
    })
}

/// Sample a truncated `Z` for a spec with negative drift.
pub fn sample_z(
    spec: &ZetaSpec,
    tail_epsilon: f64,
    max_terms: u64,
    rng: &mut RngStream,
) -> Result<ProgressionSample, ProgressionError> {
    let p = spec.p;
    sum_until_tail(spec, std::iter::repeat_with(|| rng.bernoulli(p)), tail_epsilon, max_terms)
}

/// Weighted value distribution, sorted by value with equal values merged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedDistribution {
    pub atoms: Vec<(f64, f64)>,
}

impl WeightedDistribution {
    fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, w) in atoms {
            match merged.last_mut() {
                Some(last) if values_close(last.0, v) => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        Self { atoms: merged }
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Same atoms within `1e-12` (relative for values above 1) and same
    /// weights within `1e-12`.
    pub fn matches(&self, other: &Self) -> bool {
        self.atoms.len() == other.atoms.len()
            && self
                .atoms
                .iter()
                .zip(&other.atoms)
                .all(|(a, b)| values_close(a.0, b.0) && (a.1 - b.1).abs() <= 1e-12)
    }
}

fn values_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn path_of(bits: u32, n: usize) -> Vec<bool> {
    (0..n).map(|j| bits >> j & 1 == 1).collect()
}

/// Exact distributions of `F_n(zeta) = Z_n(zeta) / Y_n` and of `Z_n(eta)`
/// for the reciprocal sequence `eta`, by enumerating all `2^n` paths.
pub fn enumerate_fn_vs_zn(
    spec: &ZetaSpec,
    n: usize,
) -> Result<(WeightedDistribution, WeightedDistribution), ProgressionError> {
    if n == 0 || n > MAX_ENUMERATION_DEPTH {
        return Err(ProgressionError::DepthOutOfRange(n));
    }
    let eta = spec.reciprocal();
    let (p, q) = (spec.p, 1.0 - spec.p);
    let mut f_atoms = Vec::with_capacity(1 << n);
    let mut z_atoms = Vec::with_capacity(1 << n);
    for bits in 0..(1u32 << n) {
        let path = path_of(bits, n);
        let ones = bits.count_ones() as i32;
        let weight = p.powi(ones) * q.powi(n as i32 - ones);
        let z = partial_sums(spec, &path)[n];
        let log_y: f64 = path.iter().map(|&x| spec.log_term(x)).sum();
        f_atoms.push((z / log_y.exp(), weight));
        z_atoms.push((partial_sums(&eta, &path)[n], weight));
    }
    Ok((
        WeightedDistribution::from_atoms(f_atoms),
        WeightedDistribution::from_atoms(z_atoms),
    ))
}

/// Outcome of running `Y_n` until `gamma * Y_n >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppedProgression {
    pub m_hat: u64,
    /// `Z_{m_hat - 1}`.
    pub z_before: f64,
    /// `Y_{m_hat - 1}`.
    pub y_before: f64,
    /// `Y_{m_hat}`.
    pub y_at: f64,
}

impl StoppedProgression {
    /// `F_{m_hat - 1} = Z_{m_hat - 1} / Y_{m_hat - 1}`.
    pub fn f_before(&self) -> f64 {
        self.z_before / self.y_before
    }
}

/// Run the path given by `xi` until `gamma * Y_n >= 1`. Returns `None` if
/// the path ends first.
pub fn stop_on_path<I: IntoIterator<Item = bool>>(
    spec: &ZetaSpec,
    gamma: f64,
    xi: I,
) -> Option<StoppedProgression> {
    let log_gamma = gamma.ln();
    let mut log_y = 0.0f64;
    let mut z = 1.0f64;
    let mut n = 0u64;
    for x in xi {
        let next = log_y + spec.log_term(x);
        n += 1;
        if log_gamma + next >= 0.0 {
            return Some(StoppedProgression {
                m_hat: n,
                z_before: z,
                y_before: log_y.exp(),
                y_at: next.exp(),
            });
        }
        log_y = next;
        z += log_y.exp();
    }
    None
}

/// Sample the stopping time `m_hat = min(n : gamma Y_n >= 1)` and `Z_{m_hat-1}`.
pub fn sample_z_until_stopping(
    spec: &ZetaSpec,
    gamma: f64,
    rng: &mut RngStream,
) -> Result<StoppedProgression, ProgressionError> {
    let drift = spec.expected_log();
    if drift <= 0.0 {
        return Err(ProgressionError::NonPositiveDrift { drift });
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ProgressionError::InvalidSpec(format!("gamma = {gamma} not in (0, 1)")));
    }
    let p = spec.p;
    Ok(stop_on_path(spec, gamma, std::iter::repeat_with(|| rng.bernoulli(p)))
        .expect("infinite path"))
}

/// Comparison of `E exp(-Z)` between two specs that differ only in `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    /// Whether the estimates are of the reciprocal sequences (positive drift).
    pub via_reciprocal: bool,
    pub estimate_a: Estimate,
    pub estimate_b: Estimate,
    /// Ordering implied by stochastic domination of the terms:
    /// `E exp(-Z_a) >= E exp(-Z_b)`.
    pub predicted_a_ge_b: bool,
    /// Predicted ordering holds within three combined standard errors.
    pub holds: bool,
}

/// Default truncation used by the Monte Carlo checks.
pub const DEFAULT_TAIL_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_TERMS: u64 = 1_000_000;

fn expected_exp_neg_z(spec: &ZetaSpec, samples: usize, seed: u64) -> Result<Estimate, ProgressionError> {
    let values = (0..samples as u64)
        .map(|s| {
            let mut rng = RngStream::new(seed, s);
            sample_z(spec, DEFAULT_TAIL_EPSILON, DEFAULT_MAX_TERMS, &mut rng).map(|z| (-z.value).exp())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Estimate::from_samples(&values))
}

fn check_comparable(a: &ZetaSpec, b: &ZetaSpec) -> Result<(), ProgressionError> {
    if a.kind != b.kind
        || a.lambda_outer != b.lambda_outer
        || a.lambda != b.lambda
        || a.reciprocal != b.reciprocal
    {
        return Err(ProgressionError::NotComparable(
            "specs must share kind, lambdas and orientation".into(),
        ));
    }
    Ok(())
}

/// Estimate `E exp(-Z)` for two specs on common random numbers and check
/// the ordering implied by stochastic domination of their terms.
///
/// With negative drift both `Z` are used directly; with positive drift the
/// reciprocal sequences are compared instead.
pub fn dominance_check(
    spec_a: &ZetaSpec,
    spec_b: &ZetaSpec,
    samples: usize,
    seed: u64,
) -> Result<DominanceReport, ProgressionError> {
    check_comparable(spec_a, spec_b)?;
    let (da, db) = (spec_a.expected_log(), spec_b.expected_log());
    let via_reciprocal = if da < 0.0 && db < 0.0 {
        false
    } else if da > 0.0 && db > 0.0 {
        true
    } else {
        return Err(ProgressionError::DivergentSpec { drift: da.max(db) });
    };
    let (a, b) = if via_reciprocal {
        (spec_a.reciprocal(), spec_b.reciprocal())
    } else {
        (*spec_a, *spec_b)
    };
    let estimate_a = expected_exp_neg_z(&a, samples, seed)?;
    let estimate_b = expected_exp_neg_z(&b, samples, seed)?;
    // smaller terms give smaller Z and larger E exp(-Z)
    let a_terms_smaller = if a.increasing_in_p() { a.p <= b.p } else { a.p >= b.p };
    let predicted_a_ge_b = a_terms_smaller;
    let se = estimate_a.std_error.hypot(estimate_b.std_error);
    let holds = if predicted_a_ge_b {
        estimate_a.mean >= estimate_b.mean - 3.0 * se
    } else {
        estimate_b.mean >= estimate_a.mean - 3.0 * se
    };
    Ok(DominanceReport {
        via_reciprocal,
        estimate_a,
        estimate_b,
        predicted_a_ge_b,
        holds,
    })
}

/// Check of `E exp(-gamma Z_{m_hat-1}(zeta)) >= E exp(-Z(eta_theta))` where
/// `zeta >=_st theta` both have positive drift and `eta_theta` is the
/// reciprocal of `theta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppedDominanceReport {
    pub stopped: Estimate,
    pub reciprocal: Estimate,
    pub holds: bool,
}

pub fn stopped_dominance_check(
    zeta: &ZetaSpec,
    theta: &ZetaSpec,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<StoppedDominanceReport, ProgressionError> {
    check_comparable(zeta, theta)?;
    let zeta_dominates = if zeta.increasing_in_p() { zeta.p >= theta.p } else { zeta.p <= theta.p };
    if !zeta_dominates {
        return Err(ProgressionError::NotComparable(
            "first spec must stochastically dominate the second".into(),
        ));
    }
    let stopped = (0..samples as u64)
        .map(|s| {
            let mut rng = RngStream::new(seed, s);
            sample_z_until_stopping(zeta, gamma, &mut rng).map(|st| (-gamma * st.z_before).exp())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let stopped = Estimate::from_samples(&stopped);
    let reciprocal = expected_exp_neg_z(&theta.reciprocal(), samples, seed.wrapping_add(1))?;
    let se = stopped.std_error.hypot(reciprocal.std_error);
    Ok(StoppedDominanceReport {
        holds: stopped.mean >= reciprocal.mean - 3.0 * se,
        stopped,
        reciprocal,
    })
}

/// Samples of `gamma Z_{m_hat-1}(zeta)` against independent samples of
/// `Z(eta)`, with the largest CDF violation of `gamma Z <=_st Z(eta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppedOrderingReport {
    pub samples: usize,
    /// Paths where `gamma Z_{m_hat-1} <= F_{m_hat-1}` failed (must be zero).
    pub pathwise_failures: usize,
    pub ks_violation: f64,
    pub ks_critical: f64,
    pub holds: bool,
}

pub fn stopped_ordering_check(
    zeta: &ZetaSpec,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<StoppedOrderingReport, ProgressionError> {
    let mut scaled = Vec::with_capacity(samples);
    let mut pathwise_failures = 0;
    for s in 0..samples as u64 {
        let mut rng = RngStream::new(seed, s);
        let st = sample_z_until_stopping(zeta, gamma, &mut rng)?;
        if !(gamma * st.y_before < 1.0 && gamma * st.y_at >= 1.0 && gamma * st.z_before <= st.f_before()) {
            pathwise_failures += 1;
        }
        scaled.push(gamma * st.z_before);
    }
    let eta = zeta.reciprocal();
    let reference = (0..samples as u64)
        .map(|s| {
            let mut rng = RngStream::new(seed.wrapping_add(1), s);
            sample_z(&eta, DEFAULT_TAIL_EPSILON, DEFAULT_MAX_TERMS, &mut rng).map(|z| z.value)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ks_violation = dominance_violation(&scaled, &reference);
    let ks_critical = ks_critical(samples, samples, 1e-3);
    Ok(StoppedOrderingReport {
        samples,
        pathwise_failures,
        ks_violation,
        ks_critical,
        holds: pathwise_failures == 0 && ks_violation <= ks_critical,
    })
}

/// Pathwise ordering of `Z_n` under common random numbers for two specs
/// with `p_low <= p_high`. Returns the number of paths where the ordering
/// implied by the terms' monotonicity in `xi` fails.
pub fn coupled_partial_sum_violations(
    spec: &ZetaSpec,
    p_low: f64,
    p_high: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<usize, ProgressionError> {
    let lo = spec.with_p(p_low)?;
    let hi = spec.with_p(p_high)?;
    let mut violations = 0;
    for s in 0..samples as u64 {
        let mut rng = RngStream::new(seed, s);
        let us: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let path_lo: Vec<bool> = us.iter().map(|&u| u < p_low).collect();
        let path_hi: Vec<bool> = us.iter().map(|&u| u < p_high).collect();
        let z_lo = partial_sums(&lo, &path_lo);
        let z_hi = partial_sums(&hi, &path_hi);
        let ok = z_lo.iter().zip(&z_hi).all(|(a, b)| {
            if spec.increasing_in_p() {
                a <= b
            } else {
                a >= b
            }
        });
        if !ok {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Coverage of the binomial envelope
/// `n p (1 - kappa) / 2 - c <= U_n <= n p (1 + kappa) + c` for all
/// `floor(1/p) <= n <= horizon`, as a function of `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub kappa: f64,
    pub epsilon: f64,
    pub horizon: u64,
    pub samples: usize,
    pub grid: Vec<f64>,
    /// `coverage[i][j]`: estimate at `ps[i]` and `grid[j]`.
    pub ps: Vec<f64>,
    pub coverage: Vec<Vec<Estimate>>,
    /// Smallest grid constant with coverage `>= epsilon` at every `p`.
    pub found_constant: Option<f64>,
}

/// Grid searched for the envelope constants `c1 = c2`.
pub const ENVELOPE_GRID: [f64; 6] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];

/// Smallest `c` for which the path `U_1, ..., U_horizon` stays inside the
/// envelope on `[floor(1/p), horizon]`.
pub fn envelope_constant_needed(p: f64, kappa: f64, horizon: u64, rng: &mut RngStream) -> f64 {
    let start = (1.0 / p).floor() as u64;
    let mut u = 0u64;
    let mut need = 0.0f64;
    for n in 1..=horizon {
        if rng.bernoulli(p) {
            u += 1;
        }
        if n >= start {
            let nf = n as f64;
            let lower = 0.5 * nf * p * (1.0 - kappa);
            let upper = nf * p * (1.0 + kappa);
            let uf = u as f64;
            need = need.max(lower - uf).max(uf - upper);
        }
    }
    need
}

pub fn binomial_envelope_check(
    ps: &[f64],
    kappa: f64,
    epsilon: f64,
    horizon: u64,
    samples: usize,
    seed: u64,
    grid: &[f64],
) -> Result<EnvelopeReport, ProgressionError> {
    if !(kappa > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ProgressionError::InvalidSpec(format!(
            "kappa = {kappa} must be positive and epsilon = {epsilon} in (0, 1)"
        )));
    }
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(ProgressionError::InvalidSpec(format!("p = {p} not in (0, 1)")));
    }
    let mut coverage = Vec::with_capacity(ps.len());
    for (i, &p) in ps.iter().enumerate() {
        let needs: Vec<f64> = (0..samples as u64)
            .map(|s| {
                let mut rng = RngStream::new(seed.wrapping_add(i as u64), s);
                envelope_constant_needed(p, kappa, horizon, &mut rng)
            })
            .collect();
        coverage.push(
            grid.iter()
                .map(|&c| Estimate::proportion(needs.iter().filter(|&&need| need <= c).count(), samples))
                .collect::<Vec<_>>(),
        );
    }
    let found_constant = grid
        .iter()
        .enumerate()
        .find(|(j, _)| coverage.iter().all(|row| row[*j].mean >= epsilon))
        .map(|(_, &c)| c);
    Ok(EnvelopeReport {
        kappa,
        epsilon,
        horizon,
        samples,
        grid: grid.to_vec(),
        ps: ps.to_vec(),
        coverage,
        found_constant,
    })
}
