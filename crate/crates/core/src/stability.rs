//! Stable/unstable classification of a simulation trace via the regression
//! slope of the queue series.

use crate::error::{Error, Result};
use crate::simulator::SimTrace;
use serde::{Deserialize, Serialize};

/// Default slope threshold (requests per step) below which a run counts as
/// stable.
pub const DEFAULT_SLOPE_THRESHOLD: f64 = 1e-4;

/// Which queue series the slope is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlopeBasis {
    /// Regression on the per-step total queue length. The default: queues
    /// and arrivals are nonnegative, so no per-flow divergence can hide in
    /// the total.
    Total,
    /// The maximum slope over the per-flow series.
    PerFlowMax,
}

/// Outcome of classifying one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub slope: f64,
    pub threshold: f64,
    pub stable: bool,
    pub basis: SlopeBasis,
}

/// Ordinary least-squares slope of `series` against the step index.
///
/// Single pass with the index shifted to its mean, Kahan-compensated; the
/// index variance `n(n^2-1)/12` is closed-form, so long horizons do not
/// accumulate error in the denominator.
pub fn regression_slope(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, min: 2 });
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let sxx = nf * (nf * nf - 1.0) / 12.0;
    let mut sxy = 0.0f64;
    let mut comp = 0.0f64;
    for (i, &y) in series.iter().enumerate() {
        let term = (i as f64 - x_mean) * y;
        let t = sxy + (term - comp);
        comp = (t - sxy) - (term - comp);
        sxy = t;
    }
    Ok(sxy / sxx)
}

/// [`regression_slope`] on integer queue lengths.
pub fn slope_of_counts(series: &[u64]) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, min: 2 });
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let sxx = nf * (nf * nf - 1.0) / 12.0;
    let mut sxy = 0.0f64;
    let mut comp = 0.0f64;
    for (i, &y) in series.iter().enumerate() {
        let term = (i as f64 - x_mean) * y as f64;
        let t = sxy + (term - comp);
        comp = (t - sxy) - (term - comp);
        sxy = t;
    }
    Ok(sxy / sxx)
}

/// Classify a trace: stable iff the slope on the chosen basis is below the
/// threshold.
///
/// Finite horizons cut both ways near the boundary: a rate vector just
/// outside the supportable region can diverge slowly enough to pass the
/// threshold, and one just inside can be caught mid-fluctuation. Callers
/// comparing against an analytic region should treat the near-boundary band
/// accordingly.
pub fn classify(trace: &SimTrace, threshold: f64, basis: SlopeBasis) -> Result<StabilityVerdict> {
    let slope = match basis {
        SlopeBasis::Total => slope_of_counts(&trace.qtotal)?,
        SlopeBasis::PerFlowMax => {
            let mut worst = f64::NEG_INFINITY;
            for series in &trace.qlen {
                worst = worst.max(slope_of_counts(series)?);
            }
            worst
        }
    };
    Ok(StabilityVerdict {
        slope,
        threshold,
        stable: slope < threshold,
        basis,
    })
}
