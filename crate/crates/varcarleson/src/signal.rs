//! Sampled signals on uniform grids and real intervals.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VcError};

/// Relative tolerance for x-grid uniformity checks on file input.
pub const GRID_UNIFORMITY_RTOL: f64 = 1e-9;

/// A complex-valued signal sampled on a uniform grid
/// `x_k = origin + k * spacing`, understood as identically zero off the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    origin: f64,
    spacing: f64,
    samples: Vec<Complex64>,
}

impl SampledSignal {
    pub fn new(origin: f64, spacing: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(VcError::Input(format!("grid spacing must be positive, got {spacing}")));
        }
        if samples.len() < 2 {
            return Err(VcError::Input("signal needs at least two samples".into()));
        }
        if !origin.is_finite() {
            return Err(VcError::Input("grid origin must be finite".into()));
        }
        Ok(Self { origin, spacing, samples })
    }

    pub fn from_fn(origin: f64, spacing: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = (0..n).map(|k| f(origin + k as f64 * spacing)).collect();
        Self::new(origin, spacing, samples)
    }

    pub fn zeros_like(&self) -> Self {
        Self { origin: self.origin, spacing: self.spacing, samples: vec![Complex64::default(); self.samples.len()] }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.spacing
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    /// Closed interval spanned by the sample locations.
    pub fn window(&self) -> Interval {
        let left = self.origin;
        let right = self.x(self.len() - 1);
        Interval::from_endpoints(left, right)
    }

    /// True when `other` lives on the identical grid.
    pub fn same_grid(&self, other: &SampledSignal) -> bool {
        self.len() == other.len()
            && (self.origin - other.origin).abs() <= GRID_UNIFORMITY_RTOL * self.spacing
            && (self.spacing - other.spacing).abs() <= GRID_UNIFORMITY_RTOL * self.spacing
    }

    /// Index of the grid point nearest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let k = ((x - self.origin) / self.spacing).round();
        k.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Pointwise product with the indicator of `iv` (samples outside are zeroed).
    pub fn restrict(&self, iv: &Interval) -> SampledSignal {
        let mut out = self.clone();
        for k in 0..out.len() {
            let x = out.x(k);
            if !iv.contains(x) {
                out.samples[k] = Complex64::default();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// A bounded open interval stored as center and length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub center: f64,
    pub length: f64,
}

impl Interval {
    pub fn new(center: f64, length: f64) -> Self {
        Self { center, length }
    }

    pub fn from_endpoints(left: f64, right: f64) -> Self {
        Self { center: 0.5 * (left + right), length: right - left }
    }

    pub fn left(&self) -> f64 {
        self.center - 0.5 * self.length
    }

    pub fn right(&self) -> f64 {
        self.center + 0.5 * self.length
    }

    /// Concentric dilate: same center, `factor` times the length.
    pub fn dilate(&self, factor: f64) -> Interval {
        Interval { center: self.center, length: self.length * factor }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left() && x <= self.right()
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.left() < other.right() && other.left() < self.right()
    }

    /// Distance from `x` to the interval (zero inside).
    pub fn dist(&self, x: f64) -> f64 {
        (x - self.right()).max(self.left() - x).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_and_indexing() {
        let s = SampledSignal::from_fn(-1.0, 0.5, 5, |x| Complex64::new(x, 0.0)).unwrap();
        assert_eq!(s.x(0), -1.0);
        assert_eq!(s.x(4), 1.0);
        let w = s.window();
        assert_eq!(w.left(), -1.0);
        assert_eq!(w.right(), 1.0);
        assert_eq!(s.nearest_index(0.26), 3);
        assert_eq!(s.nearest_index(-9.0), 0);
        assert_eq!(s.nearest_index(9.0), 4);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(SampledSignal::new(0.0, 0.0, vec![Complex64::default(); 4]).is_err());
        assert!(SampledSignal::new(0.0, -1.0, vec![Complex64::default(); 4]).is_err());
        assert!(SampledSignal::new(0.0, 1.0, vec![Complex64::default(); 1]).is_err());
    }

    #[test]
    fn restriction_zeroes_outside() {
        let s = SampledSignal::from_fn(0.0, 0.25, 9, |_| Complex64::new(1.0, 0.0)).unwrap();
        let r = s.restrict(&Interval::from_endpoints(0.5, 1.0));
        let nonzero: Vec<usize> = (0..r.len()).filter(|&k| r.samples()[k].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![2, 3, 4]);
    }

    #[test]
    fn dilate_keeps_center() {
        let iv = Interval::from_endpoints(1.0, 2.0);
        let tri = iv.dilate(3.0);
        assert_eq!(tri.center, iv.center);
        assert_eq!(tri.length, 3.0);
        assert_eq!(tri.left(), 0.0);
        assert_eq!(tri.right(), 3.0);
    }
}
