//! Small numerical and statistical helpers shared by the estimators.

use serde::Serialize;

/// `log(sum(exp(xs)))` with max subtraction. Returns `-inf` for an empty or
/// all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// `log(1 + e^a + e^b + e^c)`, the per-step log-denominator of the pair
/// path weights. Stays finite when the exponents are large and positive.
#[inline]
pub fn log1p_exp3(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b).max(c);
    if m <= 0.0 {
        (a.exp() + b.exp() + c.exp()).ln_1p()
    } else {
        m + ((-m).exp() + (a - m).exp() + (b - m).exp() + (c - m).exp()).ln()
    }
}

/// Numerically stable logistic function `e^t / (1 + e^t)`.
#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Kahan-Babuska compensated sum. Order-dependent, so callers feed values in
/// sample-index order to keep results independent of thread scheduling.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                samples: 0,
            };
        }
        let mut s = CompensatedSum::default();
        for &x in xs {
            s.add(x);
        }
        let mean = s.value() / n as f64;
        let mut ss = CompensatedSum::default();
        for &x in xs {
            let d = x - mean;
            ss.add(d * d);
        }
        let var = if n > 1 { ss.value() / (n - 1) as f64 } else { 0.0 };
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    /// Proportion estimate with binomial standard error.
    pub fn proportion(successes: usize, trials: usize) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            mean: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            samples: trials,
        }
    }

    /// `|a - b| <= k * sqrt(se_a^2 + se_b^2)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        let se = self.std_error.hypot(other.std_error);
        (self.mean - other.mean).abs() <= k * se
    }
}

/// Largest amount by which the empirical CDF of `upper` exceeds that of
/// `lower`. Zero means `lower <=_st upper` holds exactly on the samples; a
/// small positive value is sampling noise, compared against a KS critical
/// value by the caller.
pub fn dominance_violation(lower: &[f64], upper: &[f64]) -> f64 {
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    lo.sort_by(f64::total_cmp);
    hi.sort_by(f64::total_cmp);
    let (nl, nh) = (lo.len() as f64, hi.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst = 0.0f64;
    while i < lo.len() || j < hi.len() {
        let t = match (lo.get(i), hi.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        while i < lo.len() && lo[i] <= t {
            i += 1;
        }
        while j < hi.len() && hi[j] <= t {
            j += 1;
        }
        worst = worst.max(j as f64 / nh - i as f64 / nl);
    }
    worst
}

/// Two-sample KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Median of a slice (NaN for empty input).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_naive() {
        let xs = [0.1, -2.0, 3.5];
        let naive: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log1p_exp3_both_branches() {
        for &(a, b, c) in &[(-1.0, -2.0, -3.0), (0.5, -1.0, f64::NEG_INFINITY), (800.0, 1.0, 0.0)] {
            let m: f64 = [0.0, a, b, c].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let direct = m + [0.0, a, b, c].iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            assert!((log1p_exp3(a, b, c) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!(logistic(-800.0) >= 0.0);
        assert_eq!(logistic(800.0), 1.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = Estimate::from_samples(&[0.25; 10]);
        assert_eq!(e.mean, 0.25);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn dominance_violation_detects_order() {
        let small = [1.0, 2.0, 3.0];
        let large = [2.0, 3.0, 4.0];
        assert_eq!(dominance_violation(&small, &large), 0.0);
        assert!(dominance_violation(&large, &small) > 0.3);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
