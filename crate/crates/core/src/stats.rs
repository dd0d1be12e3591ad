//! Descriptive and inferential statistics: sample summaries, paired and
//! Welch two-sample t-tests, Cohen's d, and the Student-t CDF.
//!
//! All estimators use the n−1 sample standard deviation and all p-values are
//! two-sided. The t CDF is computed through the regularized incomplete beta
//! function (Lentz continued fraction), accurate to better than 1e-10 for
//! the df range that matters here.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample of size {0} is too small (need at least {1})")]
    Undersized(usize, usize),
    #[error("sample lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("differences have zero variance; paired t statistic is undefined")]
    DegenerateDifferences,
    #[error("both samples have zero variance; t statistic is undefined")]
    ZeroVariance,
    #[error("pooled standard deviation is zero; Cohen's d is undefined")]
    ZeroPooledStd,
    #[error("degrees of freedom must be positive (got {0})")]
    InvalidDf(f64),
}

/// n, mean, and n−1 sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

/// A two-sided t-test outcome. `df` is real-valued to admit Welch's test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub d: Option<f64>,
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// n−1 sample variance.
pub fn sample_variance(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (samples.len() - 1) as f64
}

/// Mean and sample standard deviation. A single observation has no
/// dispersion estimate and is an error, not std 0.
pub fn summarize(samples: &[f64]) -> Result<SampleSummary, StatsError> {
    match samples.len() {
        0 => Err(StatsError::EmptySample),
        1 => Err(StatsError::Undersized(1, 2)),
        n => Ok(SampleSummary {
            n,
            mean: mean(samples),
            std: sample_variance(samples).sqrt(),
        }),
    }
}

/// Paired-samples t-test: t = mean(x−y) / (sd(x−y)/√n), df = n−1.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::Undersized(x.len(), 2));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let sd = sample_variance(&diffs).sqrt();
    if sd == 0.0 {
        return Err(StatsError::DegenerateDifferences);
    }
    let n = diffs.len() as f64;
    let t = mean(&diffs) / (sd / n.sqrt());
    let df = n - 1.0;
    Ok(TestResult {
        t,
        df,
        p_two_sided: p_two_sided(t, df)?,
        d: None,
    })
}

/// Welch's two-sample t-test with Welch–Satterthwaite degrees of freedom.
/// Cohen's d (pooled) is attached when defined.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::Undersized(x.len(), 2));
    }
    if y.len() < 2 {
        return Err(StatsError::Undersized(y.len(), 2));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (v1, v2) = (sample_variance(x), sample_variance(y));
    if v1 == 0.0 && v2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let se2 = v1 / n1 + v2 / n2;
    let t = (mean(x) - mean(y)) / se2.sqrt();
    let df = se2 * se2
        / ((v1 / n1) * (v1 / n1) / (n1 - 1.0) + (v2 / n2) * (v2 / n2) / (n2 - 1.0));
    Ok(TestResult {
        t,
        df,
        p_two_sided: p_two_sided(t, df)?,
        d: cohens_d(x, y).ok(),
    })
}

/// Cohen's d with pooled standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::Undersized(x.len(), 2));
    }
    if y.len() < 2 {
        return Err(StatsError::Undersized(y.len(), 2));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let pooled =
        (((n1 - 1.0) * sample_variance(x) + (n2 - 1.0) * sample_variance(y)) / (n1 + n2 - 2.0))
            .sqrt();
    if pooled == 0.0 {
        return Err(StatsError::ZeroPooledStd);
    }
    Ok((mean(x) - mean(y)) / pooled)
}

/// Two-sided p-value for a t statistic.
pub fn p_two_sided(t: f64, df: f64) -> Result<f64, StatsError> {
    Ok(2.0 * t_cdf(-t.abs(), df)?)
}

/// Student-t cumulative distribution function.
pub fn t_cdf(t: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) {
        return Err(StatsError::InvalidDf(df));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    let x = df / (df + t * t);
    let tail = 0.5 * reg_inc_beta(0.5 * df, 0.5, x);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Significance stars matching the usual table convention:
/// `*` p<.05, `**` p<.01, `***` p<.001.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

// Lanczos approximation (g = 7, n = 9), |relative error| < 1e-13.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta function I_x(a, b).
fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // symmetry transformation keeps the continued fraction convergent
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summarize_hand_values() {
        let s = summarize(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std, 0.0);

        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-12);
        assert!((s.std - 1.290_994_448_7).abs() < 1e-9);
    }

    #[test]
    fn summarize_errors() {
        assert_eq!(summarize(&[]).unwrap_err(), StatsError::EmptySample);
        assert_eq!(summarize(&[1.0]).unwrap_err(), StatsError::Undersized(1, 2));
    }

    #[test]
    fn paired_t_hand_values() {
        // differences [1,2,3]: mean 2, sd 1, t = 2/(1/sqrt(3))
        let r = paired_t(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((r.t - 2.0 * 3.0_f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2.0);

        // symmetric ±ε differences with mean 0
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.001, 1.999, 3.001, 3.999];
        let r = paired_t(&x, &y).unwrap();
        assert!(r.t.abs() < 1e-9);
        assert!((r.p_two_sided - 1.0).abs() < 1e-9);
    }

    #[test]
    fn paired_t_degenerate_differences() {
        let err = paired_t(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).unwrap_err();
        assert_eq!(err, StatsError::DegenerateDifferences);
    }

    #[test]
    fn paired_t_antisymmetry_and_translation() {
        let x = [0.30, 0.25, 0.41, 0.33, 0.29];
        let y = [0.28, 0.31, 0.35, 0.30, 0.27];
        let fwd = paired_t(&x, &y).unwrap();
        let rev = paired_t(&y, &x).unwrap();
        assert_eq!(fwd.t, -rev.t);
        assert_eq!(fwd.p_two_sided, rev.p_two_sided);

        let xs: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + 10.0).collect();
        let shifted = paired_t(&xs, &ys).unwrap();
        assert!((fwd.t - shifted.t).abs() < 1e-9);
    }

    #[test]
    fn welch_identical_samples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t(&x, &x).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p_two_sided - 1.0).abs() < 1e-12);
        assert!((r.df - 6.0).abs() < 1e-9);
    }

    #[test]
    fn welch_closed_form() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 6.0, 8.0, 10.0];
        // v1 = 2.5, v2 = 10, se2 = 0.5 + 2 = 2.5
        let expected_t = (3.0 - 6.0) / 2.5_f64.sqrt();
        let expected_df = 2.5 * 2.5 / (0.5 * 0.5 / 4.0 + 2.0 * 2.0 / 4.0);
        let r = welch_t(&x, &y).unwrap();
        assert!((r.t - expected_t).abs() < 1e-9);
        assert!((r.df - expected_df).abs() < 1e-9);
    }

    #[test]
    fn welch_exchange_symmetry() {
        let x = [0.1, 0.4, 0.3, 0.2, 0.6];
        let y = [0.9, 0.8, 0.7, 1.1];
        let fwd = welch_t(&x, &y).unwrap();
        let rev = welch_t(&y, &x).unwrap();
        assert_eq!(fwd.t, -rev.t);
        assert!((fwd.df - rev.df).abs() < 1e-12);
        assert_eq!(fwd.p_two_sided, rev.p_two_sided);
    }

    #[test]
    fn cohens_d_hand_values() {
        // x = [0,1], y = [2,3]: pooled sd = sqrt(0.5), d = -2/sqrt(0.5)
        let d = cohens_d(&[0.0, 1.0], &[2.0, 3.0]).unwrap();
        assert!((d - (-2.0 / 0.5_f64.sqrt())).abs() < 1e-12);
        assert!((d - (-2.8284271247)).abs() < 1e-9);

        // mean-shifted copies: d = c / s
        let y = [1.0, 2.0, 3.0, 4.0];
        let x: Vec<f64> = y.iter().map(|v| v + 2.0).collect();
        let s = summarize(&y).unwrap().std;
        assert!((cohens_d(&x, &y).unwrap() - 2.0 / s).abs() < 1e-12);
    }

    #[test]
    fn cohens_d_scale_invariance() {
        let x = [0.1, 0.5, 0.3, 0.9];
        let y = [0.2, 0.4, 0.8, 0.6, 1.0];
        let d = cohens_d(&x, &y).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v * 7.0).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * 7.0).collect();
        assert!((cohens_d(&xs, &ys).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn t_cdf_spot_values() {
        assert!((t_cdf(0.0, 5.0).unwrap() - 0.5).abs() < 1e-15);
        // Cauchy closed form
        let expected = 0.5 + (1.0_f64).atan() / std::f64::consts::PI;
        assert!((t_cdf(1.0, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-12);
        // published table value
        assert!((t_cdf(2.0, 10.0).unwrap() - 0.963306).abs() < 1e-5);
    }

    #[test]
    fn t_cdf_symmetry_and_monotonicity() {
        for df in [1.0, 2.5, 7.0, 30.0, 84.35] {
            let mut prev = 0.0;
            for i in -40..=40 {
                let t = i as f64 * 0.25;
                let c = t_cdf(t, df).unwrap();
                assert!(c >= prev, "monotone at t={t}, df={df}");
                prev = c;
                let sym = t_cdf(-t, df).unwrap();
                assert!((c + sym - 1.0).abs() < 1e-12, "symmetry at t={t}, df={df}");
            }
        }
    }

    #[test]
    fn t_cdf_rejects_bad_df() {
        assert!(t_cdf(1.0, 0.0).is_err());
        assert!(t_cdf(1.0, -3.0).is_err());
    }

    #[test]
    fn stars_convention() {
        assert_eq!(significance_stars(0.5), "");
        assert_eq!(significance_stars(0.04), "*");
        assert_eq!(significance_stars(0.002), "**");
        assert_eq!(significance_stars(0.0005), "***");
    }
}
