use crate::error::{Error, Result};

/// Annual covariate (smoothed GMT anomaly, K) with its baseline mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSeries {
    years: Vec<i32>,
    x: Vec<f64>,
    baseline: (i32, i32),
    xbar: f64,
}

impl CovariateSeries {
    /// `xbar` is the mean of `x` over the inclusive `baseline` span.
    pub fn new(years: Vec<i32>, x: Vec<f64>, baseline: (i32, i32)) -> Result<Self> {
        if years.is_empty() || years.len() != x.len() {
            return Err(Error::Input("covariate years and values must be non-empty and aligned".into()));
        }
        if years.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Input("covariate years are not contiguous".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite covariate value".into()));
        }
        let (b0, b1) = baseline;
        if b0 > b1 || b0 < years[0] || b1 > years[years.len() - 1] {
            return Err(Error::Input(format!(
                "baseline {b0}-{b1} not inside covariate span {}-{}",
                years[0],
                years[years.len() - 1]
            )));
        }
        let lo = (b0 - years[0]) as usize;
        let hi = (b1 - years[0]) as usize;
        let xbar = x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        Ok(Self { years, x, baseline, xbar })
    }

    /// Covariate held at `value` for every year in `years`.
    pub fn constant(years: std::ops::RangeInclusive<i32>, value: f64) -> Result<Self> {
        let ys: Vec<i32> = years.collect();
        let n = ys.len();
        let span = (*ys.first().unwrap_or(&0), *ys.last().unwrap_or(&0));
        Self::new(ys, vec![value; n], span)
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn baseline(&self) -> (i32, i32) {
        self.baseline
    }

    pub fn xbar(&self) -> f64 {
        self.xbar
    }

    pub fn value(&self, year: i32) -> Option<f64> {
        let i = year.checked_sub(self.years[0])?;
        usize::try_from(i).ok().and_then(|i| self.x.get(i).copied())
    }
}
