//! Classification of the lambda landscape and of equal-lambda pairs.
//!
//! Sites are grouped into maximal cyclic runs of exactly equal lambda.
//! Runs of length one are local maxima, local minima or growth points;
//! runs of length two are size-2 minima (type 1 or 2), saddle points or
//! size-2 maxima; longer runs are reported as plateaus.
//!
//! Lambda equality is exact floating-point equality. Parameters meant to be
//! equal must be written as identical literals.

use serde::Serialize;
use thiserror::Error;

use crate::model::{log_rates, Config, ModelError, Params};
use crate::stats::logistic;

/// `r` within this distance of `z1` or `z2` is reported as critical.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandscapeError {
    #[error("lambda values must be positive and finite: ({left}, {lambda}, {right})")]
    NonPositive { left: f64, lambda: f64, right: f64 },
    #[error("({left}, {lambda}, {right}) is not a size-2 local minimum")]
    NotSize2Minimum { left: f64, lambda: f64, right: f64 },
    #[error("pair starting at site {} does not have equal lambda", .k + 1)]
    UnequalPair { k: usize },
    #[error("maximal rate is not attained on the pair starting at site {}", .k + 1)]
    PairNotDominant { k: usize },
    #[error("pair starting at site {}: {reason}", .k + 1)]
    PreconditionViolated { k: usize, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PairType {
    Type1,
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum FeatureKind {
    LocalMaximum,
    LocalMinimum,
    GrowthPoint,
    LocalMinimumSize2 { pair_type: PairType },
    SaddlePoint,
    /// Equal pair strictly above both outer neighbours. Unnamed in the
    /// site taxonomy but a valid localization pair.
    Size2Maximum,
    /// Run of three or more sites with equal lambda.
    Plateau { length: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteFeature {
    pub kind: FeatureKind,
    /// Covered sites in cyclic order.
    pub sites: Vec<usize>,
    /// Threshold on the left side, defined for pairs with a larger left neighbour.
    pub z1: Option<f64>,
    /// Threshold on the right side, defined for pairs with a larger right neighbour.
    pub z2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeReport {
    pub n_sites: usize,
    pub features: Vec<SiteFeature>,
}

impl LandscapeReport {
    pub fn local_maxima(&self) -> Vec<usize> {
        self.features
            .iter()
            .filter(|f| f.kind == FeatureKind::LocalMaximum)
            .map(|f| f.sites[0])
            .collect()
    }

    /// Feature covering `site`.
    pub fn feature_of(&self, site: usize) -> Option<&SiteFeature> {
        self.features.iter().find(|f| f.sites.contains(&site))
    }

    pub fn plateaus(&self) -> impl Iterator<Item = &SiteFeature> {
        self.features
            .iter()
            .filter(|f| matches!(f.kind, FeatureKind::Plateau { .. }))
    }
}

pub fn is_local_maximum(params: &Params, k: usize) -> bool {
    let l = params.lambda(k);
    l > params.lambda_at(k, -1) && l > params.lambda_at(k, 1)
}

pub fn classify(params: &Params) -> LandscapeReport {
    let n = params.n_sites();
    let lam = params.lambdas();
    let Some(start) = (0..n).find(|&i| lam[i] != lam[(i + n - 1) % n]) else {
        return LandscapeReport {
            n_sites: n,
            features: vec![SiteFeature {
                kind: FeatureKind::Plateau { length: n },
                sites: (0..n).collect(),
                z1: None,
                z2: None,
            }],
        };
    };

    let mut features = Vec::new();
    let mut offset = 0;
    while offset < n {
        let first = (start + offset) % n;
        let mut len = 1;
        while offset + len < n && lam[(first + len) % n] == lam[first] {
            len += 1;
        }
        let sites: Vec<usize> = (0..len).map(|j| (first + j) % n).collect();
        let value = lam[first];
        let left = params.lambda_at(first, -1);
        let right = params.lambda_at(first, len as isize);
        let (kind, z1, z2) = match len {
            1 => {
                let kind = if value > left && value > right {
                    FeatureKind::LocalMaximum
                } else if value < left && value < right {
                    FeatureKind::LocalMinimum
                } else {
                    FeatureKind::GrowthPoint
                };
                (kind, None, None)
            }
            2 => {
                let (z1, z2) = z_values(left, value, right).expect("lambdas validated positive");
                let kind = if value < left && value < right {
                    FeatureKind::LocalMinimumSize2 {
                        pair_type: pair_type(left, value, right).expect("checked minimum"),
                    }
                } else if value > left && value > right {
                    FeatureKind::Size2Maximum
                } else {
                    FeatureKind::SaddlePoint
                };
                (kind, z1, z2)
            }
            _ => (FeatureKind::Plateau { length: len }, None, None),
        };
        features.push(SiteFeature { kind, sites, z1, z2 });
        offset += len;
    }
    features.sort_by_key(|f| f.sites[0]);
    LandscapeReport {
        n_sites: n,
        features,
    }
}

fn check_positive(left: f64, lambda: f64, right: f64) -> Result<(), LandscapeError> {
    if [left, lambda, right].iter().all(|x| x.is_finite() && *x > 0.0) {
        Ok(())
    } else {
        Err(LandscapeError::NonPositive { left, lambda, right })
    }
}

/// Thresholds `(z1, z2)` for a pair with lambda `lambda` and outer
/// neighbours `left`, `right`:
/// `z1 = log((left - lambda) / lambda) / lambda` when `left > lambda`,
/// `z2 = log(lambda / (right - lambda)) / lambda` when `right > lambda`.
pub fn z_values(
    left: f64,
    lambda: f64,
    right: f64,
) -> Result<(Option<f64>, Option<f64>), LandscapeError> {
    check_positive(left, lambda, right)?;
    let z1 = (left > lambda).then(|| ((left - lambda) / lambda).ln() / lambda);
    let z2 = (right > lambda).then(|| (lambda / (right - lambda)).ln() / lambda);
    Ok((z1, z2))
}

/// Type of a size-2 local minimum: type 1 iff `lambda` is strictly above
/// `left * right / (left + right)`.
pub fn pair_type(left: f64, lambda: f64, right: f64) -> Result<PairType, LandscapeError> {
    check_positive(left, lambda, right)?;
    if !(lambda < left.min(right)) {
        return Err(LandscapeError::NotSize2Minimum { left, lambda, right });
    }
    let threshold = left * right / (left + right);
    Ok(if lambda > threshold {
        PairType::Type1
    } else {
        PairType::Type2
    })
}

/// `r = x_{k+2} - x_{k-1}`.
pub fn r_of(config: &Config, k: usize) -> i64 {
    config.at(k, 2) as i64 - config.at(k, -1) as i64
}

/// Probability that a pair allocation lands at `k+1`: `e^{lr} / (1 + e^{lr})`.
/// Defined for real `r` so it can be evaluated at the thresholds.
pub fn p_of(lambda: f64, r: f64) -> f64 {
    logistic(lambda * r)
}

/// Local quantities around an equal-lambda pair `{k, k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairContext {
    pub k: usize,
    pub lambda_left: f64,
    pub lambda: f64,
    pub lambda_right: f64,
    pub r: i64,
    pub z1: Option<f64>,
    pub z2: Option<f64>,
    pub p: f64,
}

impl PairContext {
    pub fn new(params: &Params, config: &Config, k: usize) -> Result<Self, LandscapeError> {
        if k >= params.n_sites() {
            return Err(ModelError::IndexOutOfRange {
                index: k,
                n_sites: params.n_sites(),
            }
            .into());
        }
        let lambda = params.lambda(k);
        if params.lambda_at(k, 1) != lambda {
            return Err(LandscapeError::UnequalPair { k });
        }
        let lambda_left = params.lambda_at(k, -1);
        let lambda_right = params.lambda_at(k, 2);
        let (z1, z2) = z_values(lambda_left, lambda, lambda_right)?;
        let r = r_of(config, k);
        Ok(Self {
            k,
            lambda_left,
            lambda,
            lambda_right,
            r,
            z1,
            z2,
            p: p_of(lambda, r as f64),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeKind {
    PairStickingPossible,
    ZeroSticking,
    Critical,
}

/// Which structural case decided the regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Clause {
    /// Both outer neighbours at or below the pair (with the equal-neighbour
    /// rate condition when a neighbour ties).
    DominantPair,
    /// Saddle rising to the right, compared against `z2`.
    SaddleRight,
    /// Saddle rising to the left, compared against `z1`.
    SaddleLeft,
    /// Size-2 minimum of type 1, sticking iff `z1 < r < z2`.
    MinimumType1,
    /// Size-2 minimum of type 2, `(z1, z2)` is empty.
    MinimumType2,
    /// Left neighbour ties the pair, right neighbour above.
    PlateauEdgeRight,
    /// Right neighbour ties the pair, left neighbour above.
    PlateauEdgeLeft,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub clause: Clause,
    pub context: PairContext,
}

fn near(r: i64, z: Option<f64>) -> bool {
    z.is_some_and(|z| (r as f64 - z).abs() <= CRITICAL_TOLERANCE)
}

/// Regime of the equal-lambda pair `{k, k+1}` in state `config`.
///
/// Requires the maximal rate to sit on the pair. Critical means `r` equals a
/// threshold to within [`CRITICAL_TOLERANCE`] and is flagged rather than
/// assigned to either side.
pub fn regime(params: &Params, config: &Config, k: usize) -> Result<Regime, LandscapeError> {
    let ctx = PairContext::new(params, config, k)?;
    let ls = log_rates(params, config);
    let at = |off: isize| ls[params.site(k, off)];
    let max = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if at(0).max(at(1)) != max {
        return Err(LandscapeError::PairNotDominant { k });
    }
    let (l, lam, rt) = (ctx.lambda_left, ctx.lambda, ctx.lambda_right);
    let r = ctx.r;
    let rf = r as f64;

    let decide = |clause: Clause, possible: bool, critical: bool| {
        let kind = if critical {
            RegimeKind::Critical
        } else if possible {
            RegimeKind::PairStickingPossible
        } else {
            RegimeKind::ZeroSticking
        };
        (kind, clause)
    };

    let (kind, clause) = if l > lam && rt > lam {
        let (z1, z2) = (ctx.z1.unwrap(), ctx.z2.unwrap());
        let critical = near(r, ctx.z1) || near(r, ctx.z2);
        match pair_type(l, lam, rt)? {
            PairType::Type1 => decide(Clause::MinimumType1, z1 < rf && rf < z2, critical),
            PairType::Type2 => decide(Clause::MinimumType2, false, critical),
        }
    } else if l < lam && rt > lam {
        decide(Clause::SaddleRight, rf < ctx.z2.unwrap(), near(r, ctx.z2))
    } else if l > lam && rt < lam {
        decide(Clause::SaddleLeft, rf > ctx.z1.unwrap(), near(r, ctx.z1))
    } else if l == lam && rt > lam {
        if at(-1) > at(1) {
            return Err(LandscapeError::PreconditionViolated {
                k,
                reason: "left neighbour ties the pair and out-rates site k+1".into(),
            });
        }
        decide(Clause::PlateauEdgeRight, rf < ctx.z2.unwrap(), near(r, ctx.z2))
    } else if rt == lam && l > lam {
        if at(2) > at(0) {
            return Err(LandscapeError::PreconditionViolated {
                k,
                reason: "right neighbour ties the pair and out-rates site k".into(),
            });
        }
        decide(Clause::PlateauEdgeLeft, rf > ctx.z1.unwrap(), near(r, ctx.z1))
    } else {
        // both outer neighbours <= lam
        let forward = at(0) == max && (l < lam || at(1) >= at(-1));
        let backward = at(1) == max && (rt < lam || at(0) >= at(2));
        if !(forward || backward) {
            return Err(LandscapeError::PreconditionViolated {
                k,
                reason: "a tied outer neighbour out-rates the pair".into(),
            });
        }
        (RegimeKind::PairStickingPossible, Clause::DominantPair)
    };
    Ok(Regime {
        kind,
        clause,
        context: ctx,
    })
}
