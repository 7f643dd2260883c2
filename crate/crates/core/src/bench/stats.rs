//! Medians, bootstrap confidence intervals and the BNT/EDF ratio.

use rand::Rng;
use thiserror::Error;

use crate::rng;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_TAG: u64 = 0x4253_5452;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("cannot summarise an empty sample")]
    Empty,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("scores must be non-negative, got {0}")]
    NegativeScore(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Median of sorted data, averaging the middle two for even lengths.
fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn median(samples: &[f64]) -> Result<f64, StatsError> {
    Ok(median_sorted(&sorted(samples)?))
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// Linear-interpolation percentile of sorted data, `p` in [0, 1].
fn percentile_sorted(xs: &[f64], p: f64) -> f64 {
    let h = p * (xs.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// Median with a 95% percentile-bootstrap interval for the median.
///
/// The data are sorted before resampling, so the result does not depend on
/// sample order; `seed` fixes the resampling stream.
pub fn summarize(samples: &[f64], seed: u64) -> Result<Summary, StatsError> {
    let xs = sorted(samples)?;
    let med = median_sorted(&xs);
    let mut r = rng::stream(seed, &[BOOTSTRAP_TAG]);
    let mut medians = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut buf = vec![0.0; xs.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for b in buf.iter_mut() {
            *b = xs[r.random_range(0..xs.len())];
        }
        buf.sort_by(f64::total_cmp);
        medians.push(median_sorted(&buf));
    }
    medians.sort_by(f64::total_cmp);
    Ok(Summary {
        median: med,
        ci_low: percentile_sorted(&medians, 0.025),
        ci_high: percentile_sorted(&medians, 0.975),
    })
}

/// `score_bnt / score_edf`. Two zero scores give 1; a zero EDF score
/// against a positive BNT score gives `+inf`, which callers count and leave
/// out of medians.
pub fn eta(score_bnt: f64, score_edf: f64) -> Result<f64, StatsError> {
    for s in [score_bnt, score_edf] {
        if s.is_nan() || s < 0.0 {
            return Err(StatsError::NegativeScore(s));
        }
    }
    Ok(if score_edf == 0.0 {
        if score_bnt == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        score_bnt / score_edf
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(median(&[]), Err(StatsError::Empty));
    }

    #[test]
    fn degenerate_bootstrap() {
        let s = summarize(&[5.0], 1).unwrap();
        assert_eq!((s.median, s.ci_low, s.ci_high), (5.0, 5.0, 5.0));
    }

    #[test]
    fn bootstrap_on_one_to_hundred() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = summarize(&xs, 42).unwrap();
        assert_eq!(s.median, 50.5);
        assert!(s.ci_low < 50.5 && 50.5 < s.ci_high, "{s:?}");
        // The median of 100 uniform ranks has a standard error of about 5.
        assert!(s.ci_low > 35.0 && s.ci_high < 66.0, "{s:?}");
        let mut rev = xs.clone();
        rev.reverse();
        assert_eq!(summarize(&rev, 42).unwrap(), s);
    }

    #[test]
    fn eta_conventions() {
        assert_eq!(eta(3.0, 2.0).unwrap(), 1.5);
        assert_eq!(eta(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(eta(1.0, 0.0).unwrap(), f64::INFINITY);
        assert!(eta(-1.0, 1.0).is_err());
    }
}
