//! Tracking statistics between a commanded power series and the power the
//! hardware actually applied.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackingStats {
    /// Average |commanded − applied| (kW).
    pub mean_abs_dev: f64,
    /// Largest |commanded − applied| (kW).
    pub max_dev: f64,
    /// Mean squared deviation (kW²).
    pub mse: f64,
    /// Number of slots the statistics were computed over.
    pub samples: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series lengths differ: commanded {commanded}, applied {applied}")]
    LengthMismatch { commanded: usize, applied: usize },
    #[error("mask length {mask} does not match series length {series}")]
    MaskMismatch { mask: usize, series: usize },
    #[error("no slots selected")]
    Empty,
}

/// Deviation statistics over the slots selected by `mask` (or all slots when
/// no mask is given). The mask is how callers restrict the statistics to the
/// slots where a charging session was actually active.
pub fn compute_tracking_stats(
    commanded: &[f64],
    applied: &[f64],
    mask: Option<&[bool]>,
) -> Result<TrackingStats, StatsError> {
    if commanded.len() != applied.len() {
        return Err(StatsError::LengthMismatch {
            commanded: commanded.len(),
            applied: applied.len(),
        });
    }
    if let Some(m) = mask {
        if m.len() != commanded.len() {
            return Err(StatsError::MaskMismatch { mask: m.len(), series: commanded.len() });
        }
    }
    let mut n = 0usize;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut max_dev: f64 = 0.0;
    for (k, (&c, &a)) in commanded.iter().zip(applied).enumerate() {
        if let Some(m) = mask {
            if !m[k] {
                continue;
            }
        }
        let dev = (c - a).abs();
        abs_sum += dev;
        sq_sum += dev * dev;
        max_dev = max_dev.max(dev);
        n += 1;
    }
    if n == 0 {
        return Err(StatsError::Empty);
    }
    Ok(TrackingStats {
        mean_abs_dev: abs_sum / n as f64,
        max_dev,
        mse: sq_sum / n as f64,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_give_zeros() {
        let series = [1.0, 2.5, 0.0, 3.68];
        let stats = compute_tracking_stats(&series, &series, None).unwrap();
        assert_eq!(stats.mean_abs_dev, 0.0);
        assert_eq!(stats.max_dev, 0.0);
        assert_eq!(stats.mse, 0.0);
        assert_eq!(stats.samples, 4);
    }

    #[test]
    fn constant_offset_has_closed_form() {
        let commanded = [1.1, 2.1, 3.1];
        let applied = [1.0, 2.0, 3.0];
        let stats = compute_tracking_stats(&commanded, &applied, None).unwrap();
        assert!((stats.mean_abs_dev - 0.1).abs() < 1e-12);
        assert!((stats.max_dev - 0.1).abs() < 1e-12);
        assert!((stats.mse - 0.01).abs() < 1e-12);
    }

    #[test]
    fn mask_restricts_the_sample() {
        let commanded = [5.0, 1.0, 5.0, 1.2];
        let applied = [0.0, 1.0, 0.0, 1.0];
        let mask = [false, true, false, true];
        let stats = compute_tracking_stats(&commanded, &applied, Some(&mask)).unwrap();
        assert_eq!(stats.samples, 2);
        assert!((stats.mean_abs_dev - 0.1).abs() < 1e-12);
        assert!((stats.max_dev - 0.2).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatches_are_reported() {
        assert_eq!(
            compute_tracking_stats(&[1.0], &[1.0, 2.0], None),
            Err(StatsError::LengthMismatch { commanded: 1, applied: 2 })
        );
        assert_eq!(
            compute_tracking_stats(&[1.0], &[1.0], Some(&[true, false])),
            Err(StatsError::MaskMismatch { mask: 2, series: 1 })
        );
        assert_eq!(
            compute_tracking_stats(&[1.0], &[1.0], Some(&[false])),
            Err(StatsError::Empty)
        );
    }
}
