//! Small statistics helpers shared by the Monte Carlo and fitting code.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean with a normal-approximation 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub std_err: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

pub const Z95: f64 = 1.959_963_984_540_054;

pub fn mean_ci(samples: &[f64]) -> MeanCi {
    let n = samples.len();
    if n == 0 {
        return MeanCi { mean: f64::NAN, std_err: f64::INFINITY, lo: f64::NEG_INFINITY, hi: f64::INFINITY, n };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        f64::INFINITY
    };
    let std_err = (var / n as f64).sqrt();
    MeanCi { mean, std_err, lo: mean - Z95 * std_err, hi: mean + Z95 * std_err, n }
}

/// Bernoulli proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub p: f64,
    pub sigma: f64,
    pub successes: usize,
    pub n: usize,
}

pub fn proportion(successes: usize, n: usize) -> Proportion {
    let p = if n == 0 { f64::NAN } else { successes as f64 / n as f64 };
    let sigma = if n == 0 { f64::INFINITY } else { (p * (1.0 - p) / n as f64).sqrt() };
    Proportion { p, sigma, successes, n }
}

/// Least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points for a line");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept: my - slope * mx, r2 }
}

/// Pearson chi-square test of homogeneity for two count vectors over the
/// same categories. Categories empty in both samples are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareTest {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let total = na + nb;
    let mut stat = 0.0;
    let mut cats = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cats += 1;
        let ea = col * na / total;
        let eb = col * nb / total;
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = cats.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(stat)
    };
    ChiSquareTest { statistic: stat, dof, p_value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let fit = linear_fit(&x, &y);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_ci_constant_samples() {
        let ci = mean_ci(&[3.0; 10]);
        assert_eq!(ci.mean, 3.0);
        assert_eq!(ci.std_err, 0.0);
    }

    #[test]
    fn chi_square_identical_and_different() {
        let same = chi_square_two_sample(&[100, 200, 300], &[100, 200, 300]);
        assert!(same.statistic.abs() < 1e-12);
        assert!((same.p_value - 1.0).abs() < 1e-12);
        assert_eq!(same.dof, 2);
        let diff = chi_square_two_sample(&[500, 100], &[100, 500]);
        assert!(diff.p_value < 1e-10);
        // Expected 50 per cell, statistic 4·100/50 = 8 on one degree of freedom.
        let t = chi_square_two_sample(&[60, 40], &[40, 60]);
        assert!((t.statistic - 8.0).abs() < 1e-12);
        assert!((t.p_value - 0.004_677_734_981_047_177).abs() < 1e-9);
    }
}
