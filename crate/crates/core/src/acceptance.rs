//! End-to-end verification suite.
//!
//! Each criterion runs at fixed seeds and returns a pass/fail result with a
//! one-line detail. Used by `growthlab verify` and the `acceptance` test
//! target.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{simulate_outputs, RunConfig};
use crate::experiments::{
    certified_extension, chain_pair_frequency, chain_single_site_frequency, ratio_drift,
    run_batch, BatchSpec, Verdict,
};
use crate::landscape::{pair_type, z_values, PairType};
use crate::model::{log_rates, Config, Params};
use crate::oracles::{
    escape_bound, pair_stick_probability_mc, pair_stick_upper_bound_mc,
    single_site_stick_probability,
};
use crate::progressions::{
    coupled_partial_sum_violations, dominance_check, enumerate_fn_vs_zn, stopped_ordering_check,
    ZetaKind, ZetaSpec,
};
use crate::rng::RngStream;
use crate::stats::median;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {} ({:.1}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String), String>;

pub const CRITERIA: [(u8, &str, Check); 10] = [
    (1, "single-site localization at local maxima", single_site_localization),
    (2, "pair localization and ratio limit", pair_localization),
    (3, "single-site product against the chain", single_site_oracle),
    (4, "pair path representation against the chain", pair_representation),
    (5, "threshold ordering matches pair type", threshold_ordering),
    (6, "F_n and Z_n equal in distribution", fn_zn_enumeration),
    (7, "stochastic domination suite", domination_suite),
    (8, "zero-sticking decay of the pair bound", zero_sticking_decay),
    (9, "escape certificate soundness", certificate_soundness),
    (10, "thread-count independent output", determinism),
];

pub fn run_criterion(id: u8) -> Option<CriterionResult> {
    let &(id, name, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let (passed, detail) = match check() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Some(CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Run the selected criteria (all when `ids` is empty), in order.
pub fn run(ids: &[u8]) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| ids.is_empty() || ids.contains(&c.0))
        .filter_map(|c| run_criterion(c.0))
        .collect()
}

fn params(ls: &[f64]) -> Result<Params, String> {
    Params::from_lambdas(ls.to_vec()).map_err(|e| e.to_string())
}

fn config(p: &Params, xs: &[u64]) -> Result<Config, String> {
    Config::new(p, xs.to_vec()).map_err(|e| e.to_string())
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn uniform_in(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

fn single_site_localization() -> Result<(bool, String), String> {
    let p = params(&[1.0, 2.0, 1.5, 2.5, 0.5])?;
    let batch = run_batch(&p, &Config::zeros(5), &BatchSpec::new(2000, 20_000, 1)).map_err(e)?;
    let (mut at_1, mut at_3) = (0u64, 0u64);
    for r in &batch.records {
        match r.verdict {
            Verdict::SingleSite { site: 1, .. } => at_1 += 1,
            Verdict::SingleSite { site: 3, .. } => at_3 += 1,
            _ => {}
        }
    }
    let frac = (at_1 + at_3) as f64 / 2000.0;
    Ok((
        frac >= 0.99 && at_1 > 0 && at_3 > 0,
        format!("fraction {frac:.4} (site 2: {at_1}, site 4: {at_3}), need >= 0.99 with both > 0"),
    ))
}

fn pair_localization() -> Result<(bool, String), String> {
    let p = params(&[1.0; 4])?;
    let batch = run_batch(&p, &Config::zeros(4), &BatchSpec::new(500, 100_000, 2)).map_err(e)?;
    let pairs: Vec<&Verdict> = batch
        .records
        .iter()
        .map(|r| &r.verdict)
        .filter(|v| matches!(v, Verdict::Pair { .. }))
        .collect();
    let frac = pairs.len() as f64 / 500.0;
    let errors: Vec<f64> = pairs
        .iter()
        .filter_map(|v| ratio_drift(v).ok())
        .filter(|d| d.r.abs() <= 3)
        .map(|d| d.relative_error)
        .collect();
    let med = median(&errors);
    Ok((
        frac >= 0.95 && med < 0.05,
        format!(
            "pair fraction {frac:.3} (need >= 0.95); median relative ratio error {med:.4} over {} runs with |R| <= 3 (need < 0.05)",
            errors.len()
        ),
    ))
}

fn single_site_oracle() -> Result<(bool, String), String> {
    let p = params(&[1.0, 3.0, 1.0, 1.0])?;
    let x = Config::zeros(4);
    let exact = single_site_stick_probability(&p, &x, 1, 1e-10).map_err(e)?;
    let mc = chain_single_site_frequency(&p, &x, 1, 1e-12, 100_000, 3).map_err(e)?;
    let dev = (exact.probability - mc.mean).abs();
    Ok((
        dev <= 3.0 * mc.std_error,
        format!(
            "product {:.10}, chain {:.5} +- {:.5}, deviation {:.2} SE",
            exact.probability,
            mc.mean,
            mc.std_error,
            dev / mc.std_error
        ),
    ))
}

fn pair_representation() -> Result<(bool, String), String> {
    let p = params(&[0.5, 1.0, 1.0, 2.0])?;
    let x = config(&p, &[1, 3, 0, 0])?;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [5u64, 20, 50] {
        let rep = pair_stick_probability_mc(&p, &x, 1, n, 10_000, 40 + n).map_err(e)?;
        let chain = chain_pair_frequency(&p, &x, 1, n, 10_000, 400 + n).map_err(e)?;
        let se = rep.std_error.hypot(chain.std_error);
        let z = (rep.mean - chain.mean).abs() / se;
        ok &= z <= 3.0;
        parts.push(format!("n={n}: {:.4} vs {:.4} ({z:.2} SE)", rep.mean, chain.mean));
    }
    Ok((ok, parts.join("; ")))
}

fn threshold_ordering() -> Result<(bool, String), String> {
    let mut rng = RngStream::new(5, 0);
    let mut disagreements = 0;
    let (mut t1, mut t2) = (0, 0);
    for _ in 0..10_000 {
        let lambda = uniform_in(&mut rng, 0.05, 3.0);
        let left = lambda + uniform_in(&mut rng, 1e-3, 4.0);
        let right = lambda + uniform_in(&mut rng, 1e-3, 4.0);
        let (z1, z2) = z_values(left, lambda, right).map_err(e)?;
        let (z1, z2) = (z1.ok_or("z1 undefined")?, z2.ok_or("z2 undefined")?);
        let ty = pair_type(left, lambda, right).map_err(e)?;
        match ty {
            PairType::Type1 => t1 += 1,
            PairType::Type2 => t2 += 1,
        }
        if (z1 < z2) != (ty == PairType::Type1) {
            disagreements += 1;
        }
    }
    Ok((
        disagreements == 0,
        format!("{disagreements} disagreements in 10000 triples ({t1} type 1, {t2} type 2)"),
    ))
}

fn random_spec(rng: &mut RngStream) -> Result<ZetaSpec, String> {
    let kind = if rng.bernoulli(0.5) { ZetaKind::Left } else { ZetaKind::Right };
    let spec = ZetaSpec::new(
        kind,
        uniform_in(rng, 0.05, 0.95),
        uniform_in(rng, 0.1, 3.0),
        uniform_in(rng, 0.1, 3.0),
    )
    .map_err(e)?;
    Ok(if rng.bernoulli(0.5) { spec.reciprocal() } else { spec })
}

fn fn_zn_enumeration() -> Result<(bool, String), String> {
    let mut rng = RngStream::new(6, 0);
    let mut mismatches = 0;
    for _ in 0..20 {
        let spec = random_spec(&mut rng)?;
        for n in 1..=10 {
            let (f, z) = enumerate_fn_vs_zn(&spec, n).map_err(e)?;
            if !f.matches(&z) {
                mismatches += 1;
            }
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatches over 20 specs x n = 1..10")))
}

fn domination_suite() -> Result<(bool, String), String> {
    let mut rng = RngStream::new(7, 0);
    let mut expectation_fail = 0;
    let mut checked = 0;
    while checked < 12 {
        let spec = random_spec(&mut rng)?;
        let (pa, pb) = (uniform_in(&mut rng, 0.05, 0.95), uniform_in(&mut rng, 0.05, 0.95));
        let (a, b) = (spec.with_p(pa).map_err(e)?, spec.with_p(pb).map_err(e)?);
        let (da, db) = (a.expected_log(), b.expected_log());
        // both drifts must be clearly on one side for the sums to be finite
        if da.signum() != db.signum() || da.abs().min(db.abs()) < 0.1 {
            continue;
        }
        let rep = dominance_check(&a, &b, 4000, 700 + checked).map_err(e)?;
        if !rep.holds {
            expectation_fail += 1;
        }
        checked += 1;
    }

    let mut stopped_fail = 0;
    let mut pathwise_fail = 0;
    for (i, (p, gamma)) in [(0.8, 0.05), (0.7, 0.2), (0.9, 0.01)].into_iter().enumerate() {
        let zeta = ZetaSpec::right(p, 2.0, 1.0).map_err(e)?;
        let rep = stopped_ordering_check(&zeta, gamma, 4000, 710 + i as u64).map_err(e)?;
        pathwise_fail += rep.pathwise_failures;
        if !rep.holds {
            stopped_fail += 1;
        }
    }

    let mut crn_fail = 0;
    for i in 0..10u64 {
        let spec = random_spec(&mut rng)?;
        let (x, y) = (uniform_in(&mut rng, 0.05, 0.95), uniform_in(&mut rng, 0.05, 0.95));
        crn_fail +=
            coupled_partial_sum_violations(&spec, x.min(y), x.max(y), 200, 500, 720 + i).map_err(e)?;
    }
    Ok((
        expectation_fail == 0 && stopped_fail == 0 && crn_fail == 0,
        format!(
            "expectation ordering failures {expectation_fail}/12; stopped ordering failures {stopped_fail}/3 ({pathwise_fail} pathwise); coupled path violations {crn_fail}"
        ),
    ))
}

fn zero_sticking_decay() -> Result<(bool, String), String> {
    let p = params(&[0.5, 1.0, 1.0, 2.0])?;
    let x = config(&p, &[0, 3, 0, 1])?;
    let early = pair_stick_upper_bound_mc(&p, &x, 1, 50, 10_000, 8).map_err(e)?;
    let upper = pair_stick_upper_bound_mc(&p, &x, 1, 2000, 10_000, 8).map_err(e)?;
    let chain = chain_pair_frequency(&p, &x, 1, 2000, 10_000, 80).map_err(e)?;
    let se = upper.std_error.hypot(chain.std_error);
    Ok((
        upper.mean < 0.05 && chain.mean <= upper.mean + 3.0 * se,
        format!(
            "upper bound {:.3e} +- {:.1e} at n=2000 (need < 0.05; {:.3e} at n=50); chain {:.3e} +- {:.1e}",
            upper.mean, upper.std_error, early.mean, chain.mean, chain.std_error
        ),
    ))
}

/// Random state with a local maximum `k` carrying the maximal rate.
fn random_local_max_instance(rng: &mut RngStream) -> Result<(Params, Config, usize), String> {
    let n = 4 + (rng.uniform() * 5.0) as usize;
    let mut ls: Vec<f64> = (0..n).map(|_| uniform_in(rng, 0.1, 3.0)).collect();
    let k = (rng.uniform() * n as f64) as usize % n;
    let (l, r) = (ls[(k + n - 1) % n], ls[(k + 1) % n]);
    ls[k] = l.max(r) + uniform_in(rng, 0.01, 1.5);
    let p = params(&ls)?;
    let mut xs: Vec<u64> = (0..n).map(|_| (rng.uniform() * 6.0) as u64).collect();
    loop {
        let c = config(&p, &xs)?;
        let lr = log_rates(&p, &c);
        if lr.iter().all(|&v| v <= lr[k]) {
            return Ok((p, c, k));
        }
        xs[k] += 1;
    }
}

fn certificate_soundness() -> Result<(bool, String), String> {
    let p = params(&[1.0, 2.0, 1.5, 2.5, 0.5])?;
    let spec = BatchSpec::new(1200, 20_000, 9);
    let outcomes = (0..spec.runs)
        .into_par_iter()
        .map(|id| certified_extension(&p, &Config::zeros(5), &spec, id, 10))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e)?;
    let certified: Vec<_> = outcomes.into_iter().flatten().collect();
    let deviated = certified.iter().filter(|x| x.deviated).count();
    let frac = deviated as f64 / certified.len().max(1) as f64;

    let mut rng = RngStream::new(9, u64::MAX);
    let mut bound_fail = 0;
    for _ in 0..1000 {
        let (p, x, k) = random_local_max_instance(&mut rng)?;
        let b = escape_bound(&p, &x, k).map_err(e)?;
        let s = single_site_stick_probability(&p, &x, k, 1e-12).map_err(e)?;
        if b < 1.0 - s.probability {
            bound_fail += 1;
        }
    }
    Ok((
        certified.len() >= 1000 && frac <= 1e-4 && bound_fail == 0,
        format!(
            "{} certified runs, {deviated} deviated after 10x extension (fraction {frac:.1e}, need <= 1e-4); escape bound below 1 - P on {bound_fail}/1000 instances",
            certified.len()
        ),
    ))
}

fn determinism() -> Result<(bool, String), String> {
    let cfg = RunConfig {
        runs: 300,
        steps: 20_000,
        seed: 10,
        ..RunConfig::new(vec![1.0, 2.0, 1.5, 2.5, 0.5, 1.0, 1.0])
    };
    let mut outputs = Vec::new();
    for threads in [1, 4, 16] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(e)?;
        let (json, csv) = pool.install(|| simulate_outputs(&cfg)).map_err(e)?;
        outputs.push((threads, json, csv));
    }
    let same = outputs.windows(2).all(|w| w[0].1 == w[1].1 && w[0].2 == w[1].2);
    Ok((
        same,
        format!(
            "csv of {} bytes at thread counts 1, 4, 16: {}",
            outputs[0].2.len(),
            if same { "identical" } else { "different" }
        ),
    ))
}
