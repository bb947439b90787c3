use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::LogLikMatrix;
use crate::error::{Error, Result};
use crate::math;

/// Which entries share a clipping threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipScope {
    /// One threshold over all K·N entries.
    #[default]
    Global,
    /// One threshold per model row.
    PerRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipReport {
    /// The lower threshold in nats. Under [`ClipScope::PerRow`] this is the
    /// smallest of the row thresholds.
    pub threshold: f64,
    pub row_thresholds: Vec<f64>,
    pub fraction_requested: f64,
    pub entries_clipped: usize,
    pub scope: ClipScope,
}

/// Linear-interpolation quantile of ascending `sorted` data: position
/// `h = (n - 1) p`, interpolated between the neighbouring order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = math::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let w = h - lo as f64;
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

fn threshold_of(values: impl Iterator<Item = f64>, fraction: f64) -> f64 {
    let mut sorted: Vec<f64> = values.collect();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, fraction)
}

/// Raise every entry below the lower `fraction`-quantile up to it.
pub fn clip_lower(matrix: &LogLikMatrix, fraction: f64, scope: ClipScope) -> Result<(LogLikMatrix, ClipReport)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::range(
            "clip fraction",
            alloc::format!("{fraction} is not in [0, 1)"),
        ));
    }
    let values = matrix.values();
    let (k, n) = values.shape();
    let row_thresholds: Vec<f64> = match scope {
        ClipScope::Global => {
            let t = threshold_of(values.iter().copied(), fraction);
            alloc::vec![t; k]
        }
        ClipScope::PerRow => (0..k)
            .map(|i| threshold_of(values.row(i).iter().copied(), fraction))
            .collect(),
    };
    let mut clipped = 0usize;
    let out = DMatrix::from_fn(k, n, |i, s| {
        let v = values[(i, s)];
        if v < row_thresholds[i] {
            clipped += 1;
            row_thresholds[i]
        } else {
            v
        }
    });
    let threshold = row_thresholds.iter().copied().fold(f64::INFINITY, f64::min);
    let report = ClipReport {
        threshold,
        row_thresholds: if scope == ClipScope::PerRow {
            row_thresholds
        } else {
            Vec::new()
        },
        fraction_requested: fraction,
        entries_clipped: clipped,
        scope,
    };
    Ok((matrix.with_values(out)?, report))
}
