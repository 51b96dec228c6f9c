use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{Error, Result};

/// Smallest grid and horizon accepted by [`fit_rate`].
pub const MIN_GRID: usize = 4;
pub const MIN_HORIZON: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Median and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

pub fn quartiles(values: &[f64]) -> Summary {
    let mut data = Data::new(values.to_vec());
    Summary {
        median: data.median(),
        q25: data.lower_quartile(),
        q75: data.upper_quartile(),
    }
}

/// Least-squares fit of `ln y = intercept + slope·ln x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs at least 3 paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if ys.iter().any(|&y| !(y > 0.0)) || xs.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::DegenerateGaps);
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("log-log fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        stderr,
    })
}

/// Checks that a horizon grid is usable for a rate fit.
pub fn validate_grid(horizons: &[usize]) -> Result<()> {
    if horizons.len() < MIN_GRID {
        return Err(Error::InvalidArgument(format!(
            "grid length >= {MIN_GRID} required, got {}",
            horizons.len()
        )));
    }
    if let Some(t) = horizons.iter().find(|&&t| t < MIN_HORIZON) {
        return Err(Error::InvalidArgument(format!(
            "every horizon must be >= {MIN_HORIZON}, got {t}"
        )));
    }
    Ok(())
}

/// Regresses the log median gap on `ln T`. `gaps[i]` holds the per-seed gaps
/// at `horizons[i]`.
pub fn fit_rate(horizons: &[usize], gaps: &[Vec<f64>]) -> Result<RateFit> {
    validate_grid(horizons)?;
    if gaps.len() != horizons.len() || gaps.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("one nonempty gap sample per horizon required".into()));
    }
    let xs: Vec<f64> = horizons.iter().map(|&t| t as f64).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| quartiles(g).median).collect();
    fit_loglog(&xs, &ys)
}
