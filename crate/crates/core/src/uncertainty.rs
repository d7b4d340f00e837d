//! Year-block bootstrap and basic bootstrap confidence intervals.
//!
//! A block is one season-year: every cell, ensemble member and comparison
//! approach in a replicate sees the same resampled years.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariate::CovariateSeries;
use crate::error::{Error, Result};
use crate::extremes::{fit_field, FieldFit, FitOptions};
use crate::rng::{derive_seed, job_rng};
use crate::seasonal::{SeasonMaxSeries, YearSample};

pub const DEFAULT_REPLICATES: usize = 250;
pub const MIN_CI_REPLICATES: usize = 30;
/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Year indices for replicate `b`; depends only on `(seed, b, n_years)`.
pub fn replicate_years(n_years: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = job_rng(seed, &[0x424f_4f54, b as u64]);
    (0..n_years).map(|_| rng.random_range(0..n_years)).collect()
}

/// `b_count` rows of with-replacement year indices, each of length `n_years`.
pub fn resample_years(n_years: usize, b_count: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if b_count < 1 {
        return Err(Error::Input("need at least one bootstrap replicate".into()));
    }
    if n_years < 1 {
        return Err(Error::Input("cannot resample an empty year axis".into()));
    }
    Ok((0..b_count).map(|b| replicate_years(n_years, seed, b)).collect())
}

/// Replicate statistics with their resample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble<T> {
    pub seed: u64,
    pub indices: Vec<Vec<usize>>,
    /// `None` marks a failed replicate.
    pub replicates: Vec<Option<T>>,
}

impl<T> BootstrapEnsemble<T> {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn n_failed(&self) -> usize {
        self.replicates.iter().filter(|r| r.is_none()).count()
    }

    /// More than 10% of replicates failed.
    pub fn warning(&self) -> bool {
        self.n_failed() as f64 > MAX_FAILURE_FRACTION * self.len() as f64
    }

    pub fn check(&self) -> Result<()> {
        if self.warning() {
            Err(Error::ReplicateFailures { failed: self.n_failed(), total: self.len() })
        } else {
            Ok(())
        }
    }

    pub fn successful(&self) -> impl Iterator<Item = &T> {
        self.replicates.iter().flatten()
    }
}

/// Evaluate `statistic` on `b_count` year-resampled views of `series`.
/// Replicates run in parallel; results are ordered by replicate index.
pub fn bootstrap_statistic<T, F>(series: &SeasonMaxSeries, b_count: usize, seed: u64, statistic: F) -> Result<BootstrapEnsemble<T>>
where
    T: Send,
    F: Fn(usize, &YearSample<'_>) -> Result<T> + Sync,
{
    let indices = resample_years(series.n_years(), b_count, seed)?;
    let replicates = indices
        .par_iter()
        .enumerate()
        .map(|(b, idx)| statistic(b, &series.resampled(idx)).ok())
        .collect();
    Ok(BootstrapEnsemble { seed, indices, replicates })
}

/// Return-value fields refitted on every year resample, warm-started from
/// `base`. Cells whose refit fails are `NaN`; a replicate fails when no cell
/// converges.
pub fn bootstrap_return_values(
    series: &SeasonMaxSeries,
    covariate: &CovariateSeries,
    base: &FieldFit,
    b_count: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<BootstrapEnsemble<Vec<f64>>> {
    bootstrap_statistic(series, b_count, seed, |b, sample| {
        let o = FitOptions { seed: derive_seed(opts.seed, &[b as u64]), ..*opts };
        let fit = fit_field(sample, covariate, base.return_period, &o, Some(&base.fits))?;
        if fit.return_values.iter().all(|v| v.is_nan()) {
            return Err(Error::ReplicateFailures { failed: 1, total: 1 });
        }
        Ok(fit.return_values)
    })
}

/// Fraction of (replicate, cell) refits that failed among cells whose base
/// fit has a finite return value. Failed replicates count every such cell.
pub fn cell_failure_fraction(base: &FieldFit, ensemble: &BootstrapEnsemble<Vec<f64>>) -> f64 {
    let cells: Vec<usize> = (0..base.return_values.len()).filter(|&c| base.return_values[c].is_finite()).collect();
    let total = cells.len() * ensemble.len();
    if total == 0 {
        return 0.0;
    }
    let failed: usize = ensemble
        .replicates
        .iter()
        .map(|r| match r {
            Some(v) => cells.iter().filter(|&&c| !v[c].is_finite()).count(),
            None => cells.len(),
        })
        .sum();
    failed as f64 / total as f64
}

/// Closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// Linear-interpolation quantile of sorted data (inclusive endpoints).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Basic bootstrap interval `[2t - q(1-a/2), 2t - q(a/2)]`, `a = 1 - level`.
/// Non-finite replicates are ignored.
pub fn basic_ci(point: f64, replicates: &[f64], level: f64) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!("confidence level {level} outside (0, 1)")));
    }
    let mut v: Vec<f64> = replicates.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < MIN_CI_REPLICATES {
        return Err(Error::TooFewReplicates { got: v.len(), need: MIN_CI_REPLICATES });
    }
    v.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let q_lo = quantile_sorted(&v, alpha / 2.0);
    let q_hi = quantile_sorted(&v, 1.0 - alpha / 2.0);
    // + 0.0 folds -0.0 into 0.0
    Ok(Interval { lo: 2.0 * point - q_hi + 0.0, hi: 2.0 * point - q_lo + 0.0 })
}

/// Sample standard deviation of the finite replicates.
pub fn standard_error(replicates: &[f64]) -> f64 {
    let v: Vec<f64> = replicates.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RegularGrid;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_year_repeats() {
        let t = resample_years(1, 5, 9).unwrap();
        assert!(t.iter().all(|row| row == &vec![0]));
    }

    #[test]
    fn deterministic_and_independent_rows() {
        let a = resample_years(64, 20, 42).unwrap();
        assert_eq!(a, resample_years(64, 20, 42).unwrap());
        assert_ne!(a, resample_years(64, 20, 43).unwrap());
        assert_eq!(a[13], replicate_years(64, 42, 13));
        assert!(a.iter().all(|r| r.len() == 64 && r.iter().all(|&i| i < 64)));
    }

    #[test]
    fn zero_replicates_rejected() {
        assert!(resample_years(10, 0, 1).is_err());
    }

    #[test]
    fn uniform_occurrence_counts() {
        let table = resample_years(64, 10_000, 7).unwrap();
        let mut counts = vec![0usize; 64];
        for row in &table {
            for &i in row {
                counts[i] += 1;
            }
        }
        for c in counts {
            let per_rep = c as f64 / 10_000.0;
            assert!((per_rep - 1.0).abs() < 0.05, "{per_rep}");
        }
    }

    #[test]
    fn basic_ci_definition() {
        // 41 sorted replicates: the 2.5% and 97.5% quantiles land exactly on
        // positions 1 and 39
        let mut reps = vec![7.0, 8.0];
        reps.extend((0..37).map(|i| 9.0 + i as f64 / 10.0));
        reps.extend([14.0, 15.0]);
        let ci = basic_ci(10.0, &reps, 0.95).unwrap();
        assert!((ci.lo - 6.0).abs() < 1e-12 && (ci.hi - 12.0).abs() < 1e-12, "{ci:?}");
    }

    #[test]
    fn zero_spread_and_too_few() {
        let ci = basic_ci(3.5, &[3.5; 40], 0.95).unwrap();
        assert_eq!((ci.lo, ci.hi), (3.5, 3.5));
        assert!(matches!(basic_ci(1.0, &[1.0; 29], 0.95), Err(Error::TooFewReplicates { .. })));
    }

    #[test]
    fn gaussian_half_width() {
        let mut rng = job_rng(3, &[]);
        let d = Normal::new(5.0, 1.0).unwrap();
        let reps: Vec<f64> = (0..250).map(|_| d.sample(&mut rng)).collect();
        let ci = basic_ci(5.0, &reps, 0.95).unwrap();
        let half = 0.5 * (ci.hi - ci.lo);
        assert!((half - 1.96).abs() < 0.15 * 1.96, "{half}");
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
    }

    fn series_from(values: Vec<f64>) -> SeasonMaxSeries {
        let g = RegularGrid::uniform((0.0, 1.0), 1, (0.0, 1.0), 1).unwrap();
        let years = (1951..1951 + values.len() as i32).collect();
        SeasonMaxSeries::new(g, years, 1, values).unwrap()
    }

    fn mean_of(sample: &YearSample<'_>) -> Result<f64> {
        let v: Vec<f64> = sample.cell_values(0).map(|(_, y)| y).collect();
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }

    #[test]
    fn constant_series_constant_replicates() {
        let s = series_from(vec![4.0; 30]);
        let e = bootstrap_statistic(&s, 50, 1, |_, v| mean_of(v)).unwrap();
        assert!(e.successful().all(|&m| m == 4.0));
        assert_eq!(e.n_failed(), 0);
    }

    #[test]
    fn mean_standard_error_matches_closed_form() {
        let mut rng = job_rng(99, &[]);
        let d = Normal::new(50.0, 8.0).unwrap();
        let n = 64;
        let s = series_from((0..n).map(|_| d.sample(&mut rng)).collect());
        let e = bootstrap_statistic(&s, 2000, 5, |_, v| mean_of(v)).unwrap();
        let reps: Vec<f64> = e.successful().copied().collect();
        let se = standard_error(&reps);
        let expected = 8.0 / (n as f64).sqrt();
        assert!((se - expected).abs() < 0.2 * expected, "{se} vs {expected}");
    }

    #[test]
    fn paired_difference_of_same_statistic_is_zero() {
        let s = series_from((0..40).map(|i| (i * 7 % 11) as f64).collect());
        let e = bootstrap_statistic(&s, 100, 2, |_, v| Ok((mean_of(v)?, mean_of(v)?))).unwrap();
        let diffs: Vec<f64> = e.successful().map(|(a, b)| a - b).collect();
        let ci = basic_ci(0.0, &diffs, 0.95).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.0, 0.0));
    }

    #[test]
    fn return_value_replicates_spread_around_truth() {
        use crate::extremes::{fit_field, GevParams};
        let p = GevParams::stationary(30.0, 6.0, 0.05).unwrap();
        let mut rng = job_rng(17, &[]);
        let n = 64;
        let g = RegularGrid::uniform((0.0, 1.0), 1, (0.0, 2.0), 2).unwrap();
        let values: Vec<f64> = (0..2 * n).map(|_| p.quantile(rng.random_range(1e-9..1.0), 0.0)).collect();
        let s = SeasonMaxSeries::new(g, (1951..1951 + n).collect(), 1, values).unwrap();
        let cov = CovariateSeries::constant(1951..=2014, 0.0).unwrap();
        let opts = FitOptions::default();
        let base = fit_field(&s.all_years(), &cov, 20.0, &opts, None).unwrap();
        let e = bootstrap_return_values(&s, &cov, &base, 60, 4, &opts).unwrap();
        assert_eq!(e.len(), 60);
        assert_eq!(cell_failure_fraction(&base, &e), 0.0);
        let reps: Vec<f64> = e.successful().map(|v| v[0]).collect();
        let se = standard_error(&reps);
        assert!(se > 0.5 && se < 6.0, "{se}");
        assert_eq!(e, bootstrap_return_values(&s, &cov, &base, 60, 4, &opts).unwrap());
    }

    #[test]
    fn failures_flagged() {
        let s = series_from(vec![1.0; 20]);
        let e = bootstrap_statistic(&s, 50, 1, |b, _| if b % 5 == 0 { Err(Error::Input("x".into())) } else { Ok(1.0) }).unwrap();
        assert_eq!(e.n_failed(), 10);
        assert!(e.warning());
        assert!(e.check().is_err());
    }
}
