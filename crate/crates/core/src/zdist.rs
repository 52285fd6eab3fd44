//! Distributions over the scalar lattice statistic `z`.
//!
//! All probability mass is kept as natural logs; `-inf` marks grid points
//! that carry no weight but are retained so convolutions and snapshots can
//! index the grid uniformly.

use crate::numeric::logsumexp;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ZDistError {
    #[error("distribution has no finite weight")]
    Empty,
    #[error("grid step must be 1 or 2, got {0}")]
    BadStep(i64),
    #[error("log-weight at z={z} is NaN or +inf")]
    BadWeight { z: i64 },
}

/// Probability weights over an integer `z` grid with uniform spacing.
///
/// Weights are unnormalized natural logs; leading and trailing `-inf`
/// entries are trimmed on construction so the grid endpoints always carry
/// mass. Interior `-inf` sentinels are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ZDistribution {
    z_min: i64,
    step: i64,
    log_weights: Vec<f64>,
}

impl ZDistribution {
    pub fn new(z_min: i64, step: i64, log_weights: Vec<f64>) -> Result<Self, ZDistError> {
        if step != 1 && step != 2 {
            return Err(ZDistError::BadStep(step));
        }
        for (i, w) in log_weights.iter().enumerate() {
            if w.is_nan() || *w == f64::INFINITY {
                return Err(ZDistError::BadWeight {
                    z: z_min + i as i64 * step,
                });
            }
        }
        let first = log_weights.iter().position(|w| w.is_finite());
        let last = log_weights.iter().rposition(|w| w.is_finite());
        let (first, last) = match (first, last) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(ZDistError::Empty),
        };
        let trimmed: Vec<f64> = log_weights[first..=last].to_vec();
        Ok(Self {
            z_min: z_min + first as i64 * step,
            step,
            log_weights: trimmed,
        })
    }

    /// Unit mass at a single grid point.
    pub fn delta(z: i64, step: i64) -> Self {
        Self {
            z_min: z,
            step,
            log_weights: vec![0.0],
        }
    }

    pub fn from_probabilities(z_min: i64, step: i64, probs: &[f64]) -> Result<Self, ZDistError> {
        Self::new(z_min, step, probs.iter().map(|p| p.ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn step(&self) -> i64 {
        self.step
    }

    pub fn z_min(&self) -> i64 {
        self.z_min
    }

    pub fn z_max(&self) -> i64 {
        self.z_min + (self.len() as i64 - 1) * self.step
    }

    pub fn z_at(&self, index: usize) -> i64 {
        self.z_min + index as i64 * self.step
    }

    pub fn index_of(&self, z: i64) -> Option<usize> {
        let offset = z - self.z_min;
        if offset < 0 || offset % self.step != 0 {
            return None;
        }
        let idx = (offset / self.step) as usize;
        (idx < self.len()).then_some(idx)
    }

    pub fn z_values(&self) -> Vec<i64> {
        (0..self.len()).map(|i| self.z_at(i)).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_weights_mut(&mut self) -> &mut [f64] {
        &mut self.log_weights
    }

    /// `ln` of the total weight.
    pub fn log_norm(&self) -> f64 {
        logsumexp(&self.log_weights)
    }

    /// Normalized probabilities, summing to 1.
    pub fn probabilities(&self) -> Vec<f64> {
        let norm = self.log_norm();
        self.log_weights.iter().map(|w| (w - norm).exp()).collect()
    }

    /// Shifts log-weights so the total weight is 1.
    pub fn renormalize(&mut self) {
        let norm = self.log_norm();
        for w in &mut self.log_weights {
            *w -= norm;
        }
    }

    pub fn mean(&self) -> f64 {
        self.probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.z_at(i) as f64)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let z = self.z_at(i) as f64;
                p * z * z
            })
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.second_moment() - mean * mean
    }

    /// Full width at half maximum of the linearly interpolated probabilities.
    ///
    /// Conventions: ties in the peak break toward smaller `z`; the grid is
    /// padded with one zero-probability point beyond each end; if the peak is
    /// the only point at or above half maximum the width is the grid step.
    pub fn fwhm(&self) -> Result<f64, ZDistError> {
        let probs = self.probabilities();
        if self.len() == 1 {
            return Ok(self.step as f64);
        }
        let xs: Vec<f64> = (0..self.len()).map(|i| self.z_at(i) as f64).collect();
        fwhm_linear(&xs, &probs).ok_or(ZDistError::Empty)
    }
}

/// FWHM of linearly interpolated samples `(xs, ps)` on a uniform grid.
///
/// Pads the grid with one zero sample beyond each end; returns the grid step
/// when the peak is the only sample at or above half maximum; peak ties break
/// toward smaller `x`. Returns `None` for fewer than two samples or a
/// non-positive peak.
pub fn fwhm_linear(xs: &[f64], ps: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ps.len() {
        return None;
    }
    let step = xs[1] - xs[0];
    let mut peak = 0usize;
    for i in 1..ps.len() {
        if ps[i] > ps[peak] {
            peak = i;
        }
    }
    let p_max = ps[peak];
    if p_max.is_nan() || p_max <= 0.0 {
        return None;
    }
    let half = 0.5 * p_max;
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= ps.len() {
            0.0
        } else {
            ps[i as usize]
        }
    };
    let x_at = |i: isize| xs[0] + i as f64 * step;

    // contiguous run of samples at or above half around the peak; the width
    // is measured on this run only, so doublets are measured per-peak
    let mut l = peak as isize;
    while at(l - 1) >= half {
        l -= 1;
    }
    let mut r = peak as isize;
    while at(r + 1) >= half {
        r += 1;
    }
    if l == r {
        return Some(step);
    }

    let (pl0, pl1) = (at(l - 1), at(l));
    let x_left = x_at(l - 1) + step * (half - pl0) / (pl1 - pl0);
    let (pr0, pr1) = (at(r), at(r + 1));
    let x_right = x_at(r) + step * (pr0 - half) / (pr0 - pr1);

    Some(x_right - x_left)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_infinite_edges() {
        let d = ZDistribution::new(
            0,
            1,
            vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY],
        )
        .unwrap();
        assert_eq!(d.z_min(), 1);
        assert_eq!(d.z_max(), 3);
        assert_eq!(d.len(), 3);
        assert_eq!(d.index_of(2), Some(1));
        assert_eq!(d.index_of(4), None);
    }

    #[test]
    fn rejects_empty_and_bad_weights() {
        assert_eq!(
            ZDistribution::new(0, 1, vec![f64::NEG_INFINITY]),
            Err(ZDistError::Empty)
        );
        assert!(matches!(
            ZDistribution::new(0, 1, vec![0.0, f64::NAN]),
            Err(ZDistError::BadWeight { z: 1 })
        ));
        assert_eq!(
            ZDistribution::new(0, 3, vec![0.0]),
            Err(ZDistError::BadStep(3))
        );
    }

    #[test]
    fn normalization_and_moments() {
        let mut d = ZDistribution::from_probabilities(0, 1, &[0.25, 0.5, 0.25]).unwrap();
        d.renormalize();
        let p = d.probabilities();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d.mean() - 1.0).abs() < 1e-12);
        assert!((d.variance() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fwhm_delta_is_step() {
        assert_eq!(ZDistribution::delta(5, 2).fwhm().unwrap(), 2.0);
        assert_eq!(ZDistribution::delta(0, 1).fwhm().unwrap(), 1.0);
    }

    #[test]
    fn fwhm_single_point_above_half_is_step() {
        // neighbors below half of the peak but nonzero
        let d = ZDistribution::from_probabilities(0, 1, &[0.2, 1.0, 0.2]).unwrap();
        assert_eq!(d.fwhm().unwrap(), 1.0);
    }

    #[test]
    fn fwhm_two_equal_points() {
        // both points sit at the peak; zero padding puts the half-max
        // crossings half a step beyond each, so the width is 2.
        let d = ZDistribution::from_probabilities(0, 1, &[0.5, 0.5]).unwrap();
        assert!((d.fwhm().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fwhm_dense_gaussian() {
        // e^{-x^2/(2 sigma^2)} has FWHM 2 sigma sqrt(2 ln 2)
        let sigma = 3.0442;
        let xs: Vec<f64> = (0..4001).map(|i| -20.0 + 0.01 * i as f64).collect();
        let ps: Vec<f64> = xs.iter().map(|x| (-x * x / (2.0 * sigma * sigma)).exp()).collect();
        let expected = 2.0 * sigma * (2.0 * 2.0f64.ln()).sqrt();
        assert!((fwhm_linear(&xs, &ps).unwrap() - expected).abs() < 1e-3);
    }

    #[test]
    fn fwhm_of_the_measurement_kernel() {
        // z^{2m} e^{-z^2 tau} sampled densely near its peak sqrt(m/tau):
        // width sqrt(2 ln2 / tau) when narrow against the peak position
        let tau = 0.5f64;
        let m = 50.0f64;
        let xs: Vec<f64> = (0..4000).map(|i| 5.0 + 0.0025 * i as f64).collect();
        let peak = (m / tau).sqrt();
        let ps: Vec<f64> = xs
            .iter()
            .map(|z| (2.0 * m * (z / peak).ln() - tau * (z * z - peak * peak)).exp())
            .collect();
        let expected = (2.0 * 2.0f64.ln() / tau).sqrt();
        let width = fwhm_linear(&xs, &ps).unwrap();
        assert!(
            (width - expected).abs() < 0.05,
            "kernel width {width} vs {expected}"
        );
    }
}
