//! Small statistical toolbox for the Monte Carlo estimators: means with
//! standard errors, binomial proportions, one-sided large-sample tests,
//! least-squares slopes and confidence-interval trend checks.

use serde::{Deserialize, Serialize};

pub const Z95: f64 = 1.959_963_984_540_054;
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472;

/// A point estimate with its standard error.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    pub fn ci95(&self) -> (f64, f64) {
        (self.value - Z95 * self.stderr, self.value + Z95 * self.stderr)
    }

    pub fn half_width95(&self) -> f64 {
        Z95 * self.stderr
    }
}

/// Sample mean with the usual s/sqrt(n) standard error.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { value: f64::NAN, stderr: f64::NAN, n: 0 };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { value: mean, stderr: f64::INFINITY, n: 1 };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    Estimate {
        value: mean,
        stderr: (var / n as f64).sqrt(),
        n: n as u64,
    }
}

/// Binomial proportion with its standard error.
pub fn proportion(successes: u64, trials: u64) -> Estimate {
    if trials == 0 {
        return Estimate { value: f64::NAN, stderr: f64::NAN, n: 0 };
    }
    let p = successes as f64 / trials as f64;
    Estimate {
        value: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        n: trials,
    }
}

/// Standard normal CDF (Zelen–Severo polynomial, |error| < 7.5e-8).
pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf(-x);
    }
    let t = 1.0 / (1.0 + 0.231_641_9 * x);
    let poly = t
        * (0.319_381_530
            + t * (-0.356_563_782
                + t * (1.781_477_937 + t * (-1.821_255_978 + t * 1.330_274_429))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    1.0 - pdf * poly
}

/// One-sided p-value for observing a z-score at least this large.
pub fn p_value_greater(z: f64) -> f64 {
    1.0 - normal_cdf(z)
}

/// z-score of the difference a - b for independent estimates.
pub fn two_sample_z(a: &Estimate, b: &Estimate) -> f64 {
    (a.value - b.value) / (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares line through (x, y) pairs.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> OlsFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    OlsFit {
        slope,
        intercept,
        slope_stderr: (ss_res / dof / sxx).sqrt(),
    }
}

pub fn cis_overlap(a: &Estimate, b: &Estimate) -> bool {
    let (alo, ahi) = a.ci95();
    let (blo, bhi) = b.ci95();
    alo <= bhi && blo <= ahi
}

/// Trend acceptance: consecutive estimates must decrease (weakly) or have
/// overlapping 95% intervals.
pub fn trend_non_increasing_by_ci(es: &[Estimate]) -> bool {
    es.windows(2)
        .all(|w| w[1].value <= w[0].value || cis_overlap(&w[0], &w[1]))
}

/// Trend acceptance in the other direction.
pub fn trend_non_decreasing_by_ci(es: &[Estimate]) -> bool {
    es.windows(2)
        .all(|w| w[1].value >= w[0].value || cis_overlap(&w[0], &w[1]))
}
