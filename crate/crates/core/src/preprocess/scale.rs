//! Winsorisation and median/IQR scaling.

use crate::stats;

pub const WINSOR_LEVEL: f64 = 0.01;
pub const IQR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinsorBounds {
    pub lower: f64,
    pub upper: f64,
}

impl WinsorBounds {
    /// P(level) and P(1 - level) of the training values.
    pub fn fit(train: &[f64], level: f64) -> Option<Self> {
        let s = stats::sorted_copy(train);
        Some(Self { lower: stats::percentile_sorted(&s, level)?, upper: stats::percentile_sorted(&s, 1.0 - level)? })
    }

    pub fn apply(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

pub fn winsorize(values: &[f64], level: f64) -> (Vec<f64>, Option<WinsorBounds>) {
    match WinsorBounds::fit(values, level) {
        Some(b) => (values.iter().map(|v| b.apply(*v)).collect(), Some(b)),
        None => (Vec::new(), None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustScale {
    pub center: f64,
    pub spread: f64,
}

impl RobustScale {
    pub fn fit(train: &[f64]) -> Option<Self> {
        let s = stats::sorted_copy(train);
        let center = stats::percentile_sorted(&s, 0.5)?;
        let spread = stats::percentile_sorted(&s, 0.75)? - stats::percentile_sorted(&s, 0.25)?;
        Some(Self { center, spread })
    }

    pub fn divisor(&self) -> f64 {
        if self.spread < IQR_FLOOR {
            1.0
        } else {
            self.spread
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center) / self.divisor()
    }
}

pub fn robust_scale(values: &[f64]) -> (Vec<f64>, Option<RobustScale>) {
    match RobustScale::fit(values) {
        Some(r) => (values.iter().map(|v| r.apply(*v)).collect(), Some(r)),
        None => (Vec::new(), None),
    }
}
