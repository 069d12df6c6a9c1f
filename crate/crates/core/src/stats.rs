//! Goodness-of-fit tests and reference functions used to validate the
//! simulators.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom (chi-square) or sample size (KS).
    pub dof: usize,
}

impl TestOutcome {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Bins `values` into `bins` equal cells over `[lo, hi)`. Values at `hi`
/// fall in the last cell; anything else outside is an error.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Vec<u64>> {
    if bins == 0 || hi <= lo {
        return Err(Error::invalid(
            "bins",
            "need at least one bin over a non-empty range",
        ));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if !(lo..=hi).contains(&v) {
            return Err(Error::OutOfRange {
                what: "histogram value",
                value: v,
                min: lo,
                max: hi,
            });
        }
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Pearson chi-square test of `counts` against equal expected frequencies.
pub fn chi_square_equiprobable(counts: &[u64]) -> Result<TestOutcome> {
    let total: u64 = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return Err(Error::invalid(
            "counts",
            "need two or more bins and at least one sample",
        ));
    }
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dof = counts.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(TestOutcome {
        statistic,
        p_value: dist.sf(statistic),
        dof,
    })
}

/// Chi-square uniformity of `values` over `bins` equal cells of `[lo, hi)`.
pub fn chi_square_uniform(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<TestOutcome> {
    chi_square_equiprobable(&histogram(values, bins, lo, hi)?)
}

/// Asymptotic Kolmogorov survival function `Q(lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test of `values` against `cdf`.
pub fn ks_test(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestOutcome> {
    if values.is_empty() {
        return Err(Error::invalid(
            "values",
            "KS test needs at least one sample",
        ));
    }
    let mut xs = values.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Numeric("NaN in KS sample".into()));
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(TestOutcome {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
        dof: xs.len(),
    })
}

/// Rayleigh CDF with scale `sigma`: `1 - exp(-x^2 / (2 sigma^2))`.
pub fn rayleigh_cdf(x: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-x * x / (2.0 * sigma * sigma)).exp()
    }
}

/// Bessel function of the first kind, order zero.
///
/// Evaluates `(1 / 2pi) * integral_0^2pi cos(x sin t) dt` with the periodic
/// trapezoid rule, which is exponentially convergent once the node count
/// exceeds `|x|` by a few dozen.
pub fn bessel_j0(x: f64) -> f64 {
    let nodes = 64 + 2 * x.abs().ceil() as usize;
    let h = 2.0 * PI / nodes as f64;
    (0..nodes)
        .map(|i| (x * (i as f64 * h).sin()).cos())
        .sum::<f64>()
        / nodes as f64
}

/// Normalized autocorrelation estimate `R(l) / R(0)` averaged over traces,
/// real part, for lags `0..=max_lag`. Each trace contributes every pair
/// `(n, n + l)` it contains.
pub fn mean_autocorrelation(traces: &[Vec<Complex64>], max_lag: usize) -> Result<Vec<f64>> {
    let mut acc = vec![Complex64::new(0.0, 0.0); max_lag + 1];
    let mut counts = vec![0usize; max_lag + 1];
    for t in traces {
        if t.len() <= max_lag {
            return Err(Error::invalid(
                "traces",
                "every trace must be longer than max_lag",
            ));
        }
        for lag in 0..=max_lag {
            let mut s = Complex64::new(0.0, 0.0);
            for n in 0..t.len() - lag {
                s += t[n + lag] * t[n].conj();
            }
            acc[lag] += s;
            counts[lag] += t.len() - lag;
        }
    }
    let r0 = acc[0].re / counts[0] as f64;
    if r0 <= 0.0 {
        return Err(Error::Numeric("zero-power traces".into()));
    }
    Ok(acc
        .iter()
        .zip(&counts)
        .map(|(a, &c)| a.re / c as f64 / r0)
        .collect())
}

/// Sample autocorrelation magnitude `|R(l)| / R(0)` of one sequence.
pub fn autocorrelation_magnitude(x: &[Complex64], lag: usize) -> f64 {
    let r0: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let rl: Complex64 = (0..x.len().saturating_sub(lag))
        .map(|n| x[n + lag] * x[n].conj())
        .sum();
    rl.norm() / r0
}

/// `10 log10(ratio)`.
pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j0_series(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        let q = x * x / 4.0;
        for k in 1..200 {
            term *= -q / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn j0_matches_power_series() {
        for i in 0..=120 {
            let x = i as f64 * 0.1;
            assert!((bessel_j0(x) - j0_series(x)).abs() < 1e-12, "x = {x}");
        }
        // first zero
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-13);
    }

    #[test]
    fn chi_square_perfectly_uniform() {
        let out = chi_square_equiprobable(&[10; 36]).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.dof, 35);
        assert!((out.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_known_value() {
        // counts (5, 15) against 10/10: statistic 5, df 1, p = 0.025347
        let out = chi_square_equiprobable(&[5, 15]).unwrap();
        assert!((out.statistic - 5.0).abs() < 1e-12);
        assert!((out.p_value - 0.025_347_318_677_468_2).abs() < 1e-9);
    }

    #[test]
    fn chi_square_rejects_clumped_data() {
        let vals: Vec<f64> = (0..1000).map(|i| (i % 10) as f64 * 0.01).collect();
        let out = chi_square_uniform(&vals, 36, 0.0, 2.0 * PI).unwrap();
        assert!(out.p_value < 1e-6);
    }

    #[test]
    fn histogram_bounds() {
        let c = histogram(&[0.0, 0.5, 1.0], 2, 0.0, 1.0).unwrap();
        assert_eq!(c, vec![1, 2]);
        assert!(histogram(&[1.5], 2, 0.0, 1.0).is_err());
    }

    #[test]
    fn kolmogorov_reference_points() {
        // Q(1.36) ~ 0.049, Q(1.63) ~ 0.0098
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_on_exact_quantiles_passes() {
        let n = 500;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let out = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(out.statistic <= 1.0 / n as f64 + 1e-12);
        assert!(out.p_value > 0.99);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.5).collect();
        assert!(ks_test(&shifted, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 1e-6);
    }

    #[test]
    fn rayleigh_cdf_median() {
        let sigma = (0.5f64).sqrt();
        let median = sigma * (2.0 * 2f64.ln()).sqrt();
        assert!((rayleigh_cdf(median, sigma) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn autocorrelation_of_a_tone() {
        let w = 0.01;
        let t: Vec<Complex64> = (0..5000)
            .map(|n| Complex64::from_polar(1.0, w * n as f64))
            .collect();
        let r = mean_autocorrelation(&[t], 50).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
        for (l, v) in r.iter().enumerate() {
            assert!((v - (w * l as f64).cos()).abs() < 1e-9);
        }
    }
}
