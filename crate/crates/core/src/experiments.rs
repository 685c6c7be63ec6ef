//! Trajectory batches, windowed localization detection and first exits.
//!
//! Localization is an "eventually" statement, so detection is windowed: a
//! run is declared localized when its last `window` allocations stayed at
//! one site or inside one equal-lambda pair. Single-site verdicts at a local
//! maximum additionally carry the escape bound as a certificate. Pair
//! verdicts are soft; no certificate is available for them.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::landscape::is_local_maximum;
use crate::model::{simulate, Chain, Config, Control, ModelError, Observer, Params};
use crate::oracles::escape_bound;
use crate::rng::RngStream;
use crate::stats::Estimate;

pub const DEFAULT_WINDOW: u64 = 2000;
pub const DEFAULT_CERT_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_MAX_STEPS: u64 = 100_000;

/// CSV header of per-run rows.
pub const CSV_COLUMNS: [&str; 10] = [
    "run_id",
    "seed",
    "verdict",
    "site",
    "certified",
    "residual_bound",
    "R",
    "ratio",
    "predicted_ratio",
    "steps_executed",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("window must be at least 1")]
    ZeroWindow,
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("verdict is not a pair localization")]
    NotPair,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv output failed: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    SingleSite {
        site: usize,
        certified: bool,
        /// Escape bound at the final state; `None` when the site is not a
        /// local maximum or does not carry the maximal rate.
        residual_bound: Option<f64>,
    },
    Pair {
        /// Pair is `{k, k+1}`.
        k: usize,
        r: i64,
        ratio: f64,
        predicted_ratio: f64,
    },
    Undecided,
    Overflow,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::SingleSite { .. } => "SingleSite",
            Verdict::Pair { .. } => "Pair",
            Verdict::Undecided => "Undecided",
            Verdict::Overflow => "Overflow",
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::SingleSite { certified: true, .. })
    }
}

/// Tracks the trailing run of allocations at one site and the trailing run
/// inside a set of at most two adjacent sites.
#[derive(Debug, Clone)]
pub struct LocalizationDetector {
    window: u64,
    cert_threshold: f64,
    n_sites: usize,
    single_site: usize,
    single_len: u64,
    pair: (usize, Option<usize>),
    pair_len: u64,
    last_bound: Option<f64>,
    stop_when_certified: bool,
}

impl LocalizationDetector {
    pub fn new(
        params: &Params,
        window: u64,
        cert_threshold: f64,
    ) -> Result<Self, ExperimentError> {
        if window == 0 {
            return Err(ExperimentError::ZeroWindow);
        }
        Ok(Self {
            window,
            cert_threshold,
            n_sites: params.n_sites(),
            single_site: usize::MAX,
            single_len: 0,
            pair: (usize::MAX, None),
            pair_len: 0,
            last_bound: None,
            stop_when_certified: false,
        })
    }

    /// Ask the simulation to stop at the first certified step.
    pub fn stopping(mut self) -> Self {
        self.stop_when_certified = true;
        self
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        (a + 1) % self.n_sites == b || (b + 1) % self.n_sites == a
    }

    pub fn record(&mut self, site: usize) {
        let prev = self.single_site;
        let prev_len = self.single_len;
        if site == prev {
            self.single_len += 1;
        } else {
            self.single_site = site;
            self.single_len = 1;
        }
        let (a, b) = self.pair;
        if site == a || Some(site) == b {
            self.pair_len += 1;
        } else if b.is_none() && a != usize::MAX && self.adjacent(a, site) {
            self.pair = (a, Some(site));
            self.pair_len += 1;
        } else if prev != usize::MAX && self.adjacent(prev, site) {
            self.pair = (prev, Some(site));
            self.pair_len = prev_len + 1;
        } else {
            self.pair = (site, None);
            self.pair_len = 1;
        }
        self.last_bound = None;
    }

    /// Escape certificate for the current single-site run, if it applies.
    fn bound(&self, params: &Params, config: &Config) -> Option<f64> {
        let k = self.single_site;
        if self.single_len < self.window || !is_local_maximum(params, k) {
            return None;
        }
        escape_bound(params, config, k).ok()
    }

    /// Equal-lambda pair that the trailing single-site run may belong to.
    fn pair_partner(&self, params: &Params, config: &Config) -> Option<usize> {
        let k = self.single_site;
        let lambda = params.lambda(k);
        [params.site(k, -1), params.site(k, 1)]
            .into_iter()
            .filter(|&j| params.lambda(j) == lambda)
            .max_by_key(|&j| (config.get(j), std::cmp::Reverse(j)))
    }

    fn pair_verdict(params: &Params, config: &Config, a: usize, b: usize) -> Verdict {
        let k = if params.site(a, 1) == b { a } else { b };
        let r = crate::landscape::r_of(config, k);
        let lambda = params.lambda(k);
        let ratio = config.at(k, 1) as f64 / config.get(k) as f64;
        Verdict::Pair {
            k,
            r,
            ratio,
            predicted_ratio: (lambda * r as f64).exp(),
        }
    }

    /// Verdict for the allocations recorded so far, ending in `config`.
    ///
    /// A single-site run at a site with an equal-lambda neighbour is
    /// reported as that pair: such a site cannot localize alone, and the
    /// run is a pair localization whose partner is currently rarely hit.
    pub fn verdict(&self, params: &Params, config: &Config) -> Verdict {
        if self.single_len >= self.window {
            let k = self.single_site;
            if !is_local_maximum(params, k) {
                if let Some(j) = self.pair_partner(params, config) {
                    return Self::pair_verdict(params, config, k, j);
                }
            }
            let residual_bound = self.last_bound.or_else(|| self.bound(params, config));
            return Verdict::SingleSite {
                site: k,
                certified: residual_bound.is_some_and(|b| b < self.cert_threshold),
                residual_bound,
            };
        }
        if self.pair_len >= self.window {
            if let (a, Some(b)) = self.pair {
                if params.lambda(a) == params.lambda(b) {
                    return Self::pair_verdict(params, config, a, b);
                }
            }
        }
        Verdict::Undecided
    }
}

impl Observer for LocalizationDetector {
    fn observe(&mut self, chain: &Chain<'_>, site: usize) -> Control {
        self.record(site);
        if self.stop_when_certified && self.single_len >= self.window {
            let bound = self.bound(chain.params(), &chain.config());
            self.last_bound = bound;
            if bound.is_some_and(|b| b < self.cert_threshold) {
                return Control::Stop;
            }
        }
        Control::Continue
    }
}

/// Replay a recorded trajectory from `x0` through the detector.
pub fn detect_localization(
    params: &Params,
    x0: &Config,
    allocations: &[usize],
    window: u64,
    cert_threshold: f64,
) -> Result<Verdict, ExperimentError> {
    let mut detector = LocalizationDetector::new(params, window, cert_threshold)?;
    let mut chain = Chain::new(params, x0)?;
    for &site in allocations {
        params.check_index(site)?;
        chain.allocate(site)?;
        detector.record(site);
    }
    Ok(detector.verdict(params, &chain.config()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub seed: u64,
    pub verdict: Verdict,
    pub steps_executed: u64,
    pub final_config: Option<Config>,
}

/// One trajectory on stream `(seed, run_id)`, stopped early once a
/// single-site localization is certified.
pub fn run_one(
    params: &Params,
    x0: &Config,
    steps: u64,
    seed: u64,
    run_id: u64,
    window: u64,
    cert_threshold: f64,
) -> Result<RunRecord, ExperimentError> {
    let mut detector = LocalizationDetector::new(params, window, cert_threshold)?.stopping();
    let mut rng = RngStream::new(seed, run_id);
    Ok(match simulate(params, x0, steps, &mut rng, &mut detector) {
        Ok(summary) => RunRecord {
            run_id,
            seed,
            verdict: detector.verdict(params, &summary.final_config),
            steps_executed: summary.steps_executed,
            final_config: Some(summary.final_config),
        },
        Err(ModelError::Saturated { step, .. }) => RunRecord {
            run_id,
            seed,
            verdict: Verdict::Overflow,
            steps_executed: step,
            final_config: None,
        },
        Err(e) => return Err(e.into()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub runs: u64,
    pub master_seed: u64,
    /// Streams used are `(master_seed, first_stream..first_stream + runs)`.
    pub first_stream: u64,
    pub steps: u64,
    pub window: u64,
    pub cert_threshold: f64,
    pub verdicts: BTreeMap<String, u64>,
    /// One-based site label (`"3"`) or pair label (`"3-4"`) per localized run.
    pub localization_sites: BTreeMap<String, u64>,
    pub r_histogram: BTreeMap<i64, u64>,
    pub certified: u64,
    /// Mean of `|ratio - predicted_ratio|` over pair verdicts with finite ratio.
    pub mean_abs_ratio_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub report: BatchReport,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSpec {
    pub runs: u64,
    pub steps: u64,
    pub master_seed: u64,
    pub window: u64,
    pub cert_threshold: f64,
}

impl BatchSpec {
    pub fn new(runs: u64, steps: u64, master_seed: u64) -> Self {
        Self {
            runs,
            steps,
            master_seed,
            window: DEFAULT_WINDOW,
            cert_threshold: DEFAULT_CERT_THRESHOLD,
        }
    }
}

fn site_label(params: &Params, v: &Verdict) -> Option<String> {
    match *v {
        Verdict::SingleSite { site, .. } => Some(format!("{}", site + 1)),
        Verdict::Pair { k, .. } => Some(format!("{}-{}", k + 1, params.site(k, 1) + 1)),
        _ => None,
    }
}

/// Run `spec.runs` trajectories in parallel. Output does not depend on the
/// number of threads.
pub fn run_batch(params: &Params, x0: &Config, spec: &BatchSpec) -> Result<Batch, ExperimentError> {
    if spec.runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    if spec.window == 0 {
        return Err(ExperimentError::ZeroWindow);
    }
    Config::new(params, x0.counts().to_vec())?;
    let records = (0..spec.runs)
        .into_par_iter()
        .map(|id| {
            run_one(
                params,
                x0,
                spec.steps,
                spec.master_seed,
                id,
                spec.window,
                spec.cert_threshold,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut verdicts = BTreeMap::new();
    let mut localization_sites = BTreeMap::new();
    let mut r_histogram = BTreeMap::new();
    let mut certified = 0;
    let mut errors = Vec::new();
    for rec in &records {
        *verdicts.entry(rec.verdict.name().to_string()).or_insert(0) += 1;
        if let Some(label) = site_label(params, &rec.verdict) {
            *localization_sites.entry(label).or_insert(0) += 1;
        }
        match rec.verdict {
            Verdict::Pair {
                r,
                ratio,
                predicted_ratio,
                ..
            } => {
                *r_histogram.entry(r).or_insert(0) += 1;
                if ratio.is_finite() {
                    errors.push((ratio - predicted_ratio).abs());
                }
            }
            Verdict::SingleSite { certified: true, .. } => certified += 1,
            _ => {}
        }
    }
    let mean_abs_ratio_error =
        (!errors.is_empty()).then(|| Estimate::from_samples(&errors).mean);
    Ok(Batch {
        report: BatchReport {
            runs: spec.runs,
            master_seed: spec.master_seed,
            first_stream: 0,
            steps: spec.steps,
            window: spec.window,
            cert_threshold: spec.cert_threshold,
            verdicts,
            localization_sites,
            r_histogram,
            certified,
            mean_abs_ratio_error,
        },
        records,
    })
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write per-run rows with the [`CSV_COLUMNS`] header. Sites are one-based;
/// inapplicable fields are empty; floats carry 17 significant digits.
pub fn write_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<(), ExperimentError> {
    let err = |e: csv::Error| ExperimentError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for rec in records {
        let mut row = vec![
            rec.run_id.to_string(),
            rec.seed.to_string(),
            rec.verdict.name().to_string(),
        ];
        match rec.verdict {
            Verdict::SingleSite {
                site,
                certified,
                residual_bound,
            } => row.extend([
                (site + 1).to_string(),
                certified.to_string(),
                residual_bound.map(float).unwrap_or_default(),
                String::new(),
                String::new(),
                String::new(),
            ]),
            Verdict::Pair {
                k,
                r,
                ratio,
                predicted_ratio,
            } => row.extend([
                (k + 1).to_string(),
                String::new(),
                String::new(),
                r.to_string(),
                float(ratio),
                float(predicted_ratio),
            ]),
            Verdict::Undecided | Verdict::Overflow => row.extend(vec![String::new(); 6]),
        }
        row.push(rec.steps_executed.to_string());
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| ExperimentError::Csv(e.to_string()))
}

pub fn csv_string(records: &[RunRecord]) -> Result<String, ExperimentError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioDrift {
    pub r: i64,
    pub ratio: f64,
    pub predicted: f64,
    pub relative_error: f64,
}

/// `|ratio / e^{lambda R} - 1|` for a pair verdict.
pub fn ratio_drift(verdict: &Verdict) -> Result<RatioDrift, ExperimentError> {
    match *verdict {
        Verdict::Pair {
            r,
            ratio,
            predicted_ratio,
            ..
        } => Ok(RatioDrift {
            r,
            ratio,
            predicted: predicted_ratio,
            relative_error: (ratio / predicted_ratio - 1.0).abs(),
        }),
        _ => Err(ExperimentError::NotPair),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitKind {
    /// First particle outside the pair went to `k-1`.
    LeftNeighbour,
    /// First particle outside the pair went to `k+2`.
    RightNeighbour,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FirstExit {
    Exit {
        site: usize,
        time: u64,
        kind: ExitKind,
    },
    PairPersisted {
        steps: u64,
    },
}

/// Simulate from `x0` until a particle lands outside `{k, k+1}` or
/// `max_steps` allocations stayed inside.
pub fn first_exit(
    params: &Params,
    x0: &Config,
    k: usize,
    rng: &mut RngStream,
    max_steps: u64,
) -> Result<FirstExit, ModelError> {
    params.check_index(k)?;
    let mut chain = Chain::new(params, x0)?;
    let (left, partner, right) = (params.site(k, -1), params.site(k, 1), params.site(k, 2));
    while chain.steps() < max_steps {
        let site = chain.step(rng)?;
        if site != k && site != partner {
            let kind = if site == left {
                ExitKind::LeftNeighbour
            } else if site == right {
                ExitKind::RightNeighbour
            } else {
                ExitKind::Other
            };
            return Ok(FirstExit::Exit {
                site,
                time: chain.steps(),
                kind,
            });
        }
    }
    Ok(FirstExit::PairPersisted { steps: max_steps })
}

/// Direct chain estimate of `P(first n+1 allocations land in {k, k+1})`,
/// one stream `(seed, s)` per sample.
pub fn chain_pair_frequency(
    params: &Params,
    x0: &Config,
    k: usize,
    n: u64,
    samples: u64,
    seed: u64,
) -> Result<Estimate, ModelError> {
    params.check_index(k)?;
    let hits = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngStream::new(seed, s);
            first_exit(params, x0, k, &mut rng, n + 1).map(|e| matches!(e, FirstExit::PairPersisted { .. }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Estimate::proportion(
        hits.iter().filter(|&&h| h).count(),
        samples as usize,
    ))
}

/// Direct chain estimate of the probability that every future particle
/// lands at the local maximum `k`. A run succeeds once the escape bound of
/// the current state falls below `resolution` with no particle elsewhere,
/// so the estimate is biased upward by at most `resolution`.
pub fn chain_single_site_frequency(
    params: &Params,
    x0: &Config,
    k: usize,
    resolution: f64,
    samples: u64,
    seed: u64,
) -> Result<Estimate, ModelError> {
    params.check_index(k)?;
    let hits = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngStream::new(seed, s);
            let mut chain = Chain::new(params, x0)?;
            loop {
                match escape_bound(params, &chain.config(), k) {
                    Ok(b) if b < resolution => return Ok(true),
                    _ => {}
                }
                if chain.step(&mut rng)? != k {
                    return Ok(false);
                }
            }
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(Estimate::proportion(
        hits.iter().filter(|&&h| h).count(),
        samples as usize,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extension {
    pub site: usize,
    pub certified_at: u64,
    pub bound: f64,
    pub extended_steps: u64,
    /// Whether any extension step allocated away from `site`.
    pub deviated: bool,
}

/// Run until certified (within `steps`), then continue the same chain and
/// stream for `factor` times as many further steps and watch for any
/// allocation away from the certified site. `None` when no certificate was
/// reached.
pub fn certified_extension(
    params: &Params,
    x0: &Config,
    spec: &BatchSpec,
    run_id: u64,
    factor: u64,
) -> Result<Option<Extension>, ExperimentError> {
    let mut detector =
        LocalizationDetector::new(params, spec.window, spec.cert_threshold)?.stopping();
    let mut rng = RngStream::new(spec.master_seed, run_id);
    let summary = simulate(params, x0, spec.steps, &mut rng, &mut detector)?;
    let Verdict::SingleSite {
        site,
        certified: true,
        residual_bound: Some(bound),
    } = detector.verdict(params, &summary.final_config)
    else {
        return Ok(None);
    };
    let extended_steps = factor * summary.steps_executed;
    let mut deviated = false;
    simulate(
        params,
        &summary.final_config,
        extended_steps,
        &mut rng,
        &mut |_: &Chain<'_>, s: usize| {
            if s != site {
                deviated = true;
                Control::Stop
            } else {
                Control::Continue
            }
        },
    )?;
    Ok(Some(Extension {
        site,
        certified_at: summary.steps_executed,
        bound,
        extended_steps,
        deviated,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(ls: &[f64]) -> Params {
        Params::from_lambdas(ls.to_vec()).unwrap()
    }

    #[test]
    fn certified_construction() {
        let p = params(&[1.0, 3.0, 1.0, 1.0]);
        let x0 = Config::zeros(4);
        let v = detect_localization(&p, &x0, &[1; 20], 20, 1e-6).unwrap();
        let want = escape_bound(&p, &Config::new(&p, vec![0, 20, 0, 0]).unwrap(), 1).unwrap();
        assert_eq!(
            v,
            Verdict::SingleSite {
                site: 1,
                certified: want < 1e-6,
                residual_bound: Some(want)
            }
        );
        assert!(v.is_certified());
    }

    #[test]
    fn short_stream_is_undecided() {
        let p = params(&[1.0, 3.0, 1.0, 1.0]);
        let v = detect_localization(&p, &Config::zeros(4), &[1; 5], 10, 1e-6).unwrap();
        assert_eq!(v, Verdict::Undecided);
        assert_eq!(
            detect_localization(&p, &Config::zeros(4), &[1], 0, 1e-6),
            Err(ExperimentError::ZeroWindow)
        );
    }

    #[test]
    fn symmetric_pair_predicts_one() {
        let p = params(&[1.0; 4]);
        let v = detect_localization(&p, &Config::zeros(4), &[0, 1, 1, 0, 0, 1], 6, 1e-6).unwrap();
        match v {
            Verdict::Pair {
                k,
                r,
                ratio,
                predicted_ratio,
            } => {
                assert_eq!((k, r), (0, 0));
                assert_eq!(ratio, 1.0);
                assert_eq!(predicted_ratio, 1.0);
            }
            other => panic!("{other:?}"),
        }
        let d = ratio_drift(&v).unwrap();
        assert_eq!(d.relative_error, 0.0);
        assert_eq!(ratio_drift(&Verdict::Undecided), Err(ExperimentError::NotPair));
    }

    #[test]
    fn pair_across_the_seam() {
        let p = params(&[1.0; 5]);
        let v = detect_localization(&p, &Config::zeros(5), &[4, 0, 0, 4, 0], 5, 1e-6).unwrap();
        assert!(matches!(v, Verdict::Pair { k: 4, .. }), "{v:?}");
    }

    #[test]
    fn unequal_pair_is_not_reported() {
        let p = params(&[1.0, 2.0, 1.5, 1.0]);
        let v = detect_localization(&p, &Config::zeros(4), &[1, 2, 1, 2], 4, 1e-6).unwrap();
        assert_eq!(v, Verdict::Undecided);
    }

    #[test]
    fn single_run_at_plateau_site_becomes_pair() {
        let p = params(&[1.0; 4]);
        let alloc = [[0usize, 1].as_slice(), &[1; 10]].concat();
        let v = detect_localization(&p, &Config::zeros(4), &alloc, 8, 1e-6).unwrap();
        assert!(matches!(v, Verdict::Pair { k: 0, r: 0, .. }), "{v:?}");
    }

    #[test]
    fn ratio_formula() {
        let v = Verdict::Pair {
            k: 0,
            r: 1,
            ratio: 2.0,
            predicted_ratio: 1f64.exp(),
        };
        let d = ratio_drift(&v).unwrap();
        assert!((d.predicted - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn batch_single_run_matches_run_one() {
        let p = params(&[1.0, 2.0, 1.5, 2.5, 0.5]);
        let x0 = Config::zeros(5);
        let spec = BatchSpec::new(1, 5000, 9);
        let batch = run_batch(&p, &x0, &spec).unwrap();
        let one = run_one(&p, &x0, 5000, 9, 0, DEFAULT_WINDOW, DEFAULT_CERT_THRESHOLD).unwrap();
        assert_eq!(batch.records, vec![one]);
        assert_eq!(batch.report.verdicts.values().sum::<u64>(), 1);
    }

    #[test]
    fn batches_are_reproducible() {
        let p = params(&[1.0; 4]);
        let spec = BatchSpec {
            window: 200,
            ..BatchSpec::new(16, 3000, 5)
        };
        let a = run_batch(&p, &Config::zeros(4), &spec).unwrap();
        let b = run_batch(&p, &Config::zeros(4), &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(csv_string(&a.records).unwrap(), csv_string(&b.records).unwrap());
        let total: u64 = a.report.verdicts.values().sum();
        assert_eq!(total, 16);
        assert!(run_batch(&p, &Config::zeros(4), &BatchSpec::new(0, 10, 1)).is_err());
    }

    #[test]
    fn csv_layout() {
        let recs = vec![
            RunRecord {
                run_id: 0,
                seed: 3,
                verdict: Verdict::SingleSite {
                    site: 1,
                    certified: true,
                    residual_bound: Some(0.5),
                },
                steps_executed: 10,
                final_config: None,
            },
            RunRecord {
                run_id: 1,
                seed: 3,
                verdict: Verdict::Undecided,
                steps_executed: 7,
                final_config: None,
            },
        ];
        let s = csv_string(&recs).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines[1], "0,3,SingleSite,2,true,5.0000000000000000e-1,,,,10");
        assert_eq!(lines[2], "1,3,Undecided,,,,,,,7");
    }

    #[test]
    fn forced_exit_right() {
        let p = params(&[1.0, 1.0, 1.0, 3.0, 0.5]);
        let x0 = Config::new(&p, vec![0, 0, 0, 20, 0]).unwrap();
        let out = first_exit(&p, &x0, 1, &mut RngStream::new(1, 0), 100).unwrap();
        assert_eq!(
            out,
            FirstExit::Exit {
                site: 3,
                time: 1,
                kind: ExitKind::RightNeighbour
            }
        );
    }

    #[test]
    fn sticking_regime_can_persist() {
        // saddle with r < z2: x = (1, 3, 0, 0) on (0.5, 1, 1, 2)
        let p = params(&[0.5, 1.0, 1.0, 2.0]);
        let x0 = Config::new(&p, vec![1, 3, 0, 0]).unwrap();
        let persisted = (0..1000)
            .filter(|&s| {
                let mut rng = RngStream::new(21, s);
                matches!(
                    first_exit(&p, &x0, 1, &mut rng, 10_000).unwrap(),
                    FirstExit::PairPersisted { .. }
                )
            })
            .count();
        assert!(persisted > 0);
    }
}
