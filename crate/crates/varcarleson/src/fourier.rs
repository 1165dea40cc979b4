//! Discrete Fourier analysis on the Nyquist band of a sampled signal.
//!
//! Conventions used throughout the crate:
//!
//! * forward transform `f_hat(zeta) = integral f(x) e^{-i x zeta} dx`,
//!   realized as the trapezoid rule on the zero-extended sample grid (every
//!   retained sample gets full weight `dx`);
//! * the spectrum lives on `n` uniform bins covering the Nyquist band
//!   `[-pi/dx, pi/dx)` with step `2 pi / (n dx)`;
//! * frequency-side integrals use half-open Riemann bins `[a, b)`, which
//!   makes partial integrals additive under grid-aligned splits and makes
//!   the full-band integral recover `2 pi f(x)` exactly at grid points.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, VcError};
use crate::signal::SampledSignal;

/// Strictly increasing finite set of candidate partition frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(VcError::Config("frequency grid needs at least two points".into()));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(VcError::Config("frequency grid must be strictly increasing".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(VcError::Config("frequency grid points must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn uniform(min: f64, max: f64, count: usize) -> Result<Self> {
        if !(min < max) {
            return Err(VcError::FrequencyOrder { lo: min, hi: max });
        }
        let step = (max - min) / (count.max(2) - 1) as f64;
        Self::new((0..count.max(2)).map(|k| min + k as f64 * step).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when every point of `self` also lies in `finer` (within `tol`).
    pub fn refines_into(&self, finer: &FrequencyGrid, tol: f64) -> bool {
        self.points
            .iter()
            .all(|&p| finer.points.iter().any(|&q| (p - q).abs() <= tol))
    }
}

/// Spectrum of a sampled signal, together with the zero-extended grid that
/// produced it so partial integrals can be inverted back onto sample points.
#[derive(Debug, Clone)]
pub struct Spectrum {
    freq0: f64,
    freq_step: f64,
    coeffs: Vec<Complex64>,
    x0: f64,
    spacing: f64,
}

impl Spectrum {
    /// Analyze `f`, first embedding it centrally in a zero-extended grid of
    /// `pad_factor * len` samples rounded up to a power of two. `pad_factor`
    /// of at least 2 keeps circular wrap-around away from the window.
    pub fn analyze(f: &SampledSignal, pad_factor: usize) -> Spectrum {
        let n = f.len();
        let total = (n * pad_factor.max(1)).next_power_of_two();
        let left = (total - n) / 2;
        let dx = f.spacing();
        let x0 = f.origin() - left as f64 * dx;
        let freq_step = 2.0 * std::f64::consts::PI / (total as f64 * dx);
        let freq0 = -std::f64::consts::PI / dx;

        // g_k = dx * f_k * e^{-i k dx freq0}; coeffs_m = e^{-i x0 zeta_m} FFT(g)_m.
        let mut buf = vec![Complex64::default(); total];
        for k in 0..n {
            let kk = left + k;
            let phase = Complex64::from_polar(1.0, -(kk as f64) * dx * freq0);
            buf[kk] = f.samples()[k] * dx * phase;
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(total).process(&mut buf);
        for (m, c) in buf.iter_mut().enumerate() {
            let zeta = freq0 + m as f64 * freq_step;
            *c *= Complex64::from_polar(1.0, -x0 * zeta);
        }
        Spectrum { freq0, freq_step, coeffs: buf, x0, spacing: dx }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn freq(&self, m: usize) -> f64 {
        self.freq0 + m as f64 * self.freq_step
    }

    pub fn freq_step(&self) -> f64 {
        self.freq_step
    }

    pub fn nyquist(&self) -> f64 {
        -self.freq0
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn padded_origin(&self) -> f64 {
        self.x0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index of the first bin with frequency >= `zeta`, clamped to `[0, n]`.
    pub fn bin_at_or_above(&self, zeta: f64) -> usize {
        let raw = ((zeta - self.freq0) / self.freq_step).ceil();
        raw.clamp(0.0, self.len() as f64) as usize
    }

    /// Partial Fourier inversion
    /// `(1 / 2 pi) integral_{[a,b)} f_hat(zeta) e^{i x zeta} dzeta`
    /// over the bins in range; the full band reproduces `f(x)` at grid
    /// points.
    pub fn partial_integral(&self, a: f64, b: f64, x: f64) -> Result<Complex64> {
        if !(a <= b) {
            return Err(VcError::FrequencyOrder { lo: a, hi: b });
        }
        let lo = self.bin_at_or_above(a);
        let hi = self.bin_at_or_above(b);
        let w = self.freq_step / (2.0 * std::f64::consts::PI);
        let mut acc = Complex64::default();
        for m in lo..hi {
            acc += self.coeffs[m] * Complex64::from_polar(1.0, x * self.freq(m));
        }
        Ok(acc * w)
    }

    /// Prefix table of frequency-bin sums at a fixed spatial point, giving
    /// O(1) partial inversions for the many interval queries the partition
    /// search makes.
    pub fn prefix_at(&self, x: f64) -> PartialIntegralTable<'_> {
        let w = self.freq_step / (2.0 * std::f64::consts::PI);
        let mut prefix = Vec::with_capacity(self.len() + 1);
        let mut acc = Complex64::default();
        prefix.push(acc);
        for m in 0..self.len() {
            acc += self.coeffs[m] * Complex64::from_polar(1.0, x * self.freq(m)) * w;
            prefix.push(acc);
        }
        PartialIntegralTable { spectrum: self, prefix }
    }

    /// `(1 / 2 pi) integral f_hat(zeta) m(zeta) e^{i x zeta} dzeta` evaluated at
    /// every point of the zero-extended grid via one inverse FFT.
    pub fn synthesize_with_multiplier(&self, mult: impl Fn(f64) -> Complex64) -> SampledSignal {
        let total = self.len();
        let mut buf: Vec<Complex64> = (0..total)
            .map(|m| {
                let zeta = self.freq(m);
                self.coeffs[m] * mult(zeta) * Complex64::from_polar(1.0, self.x0 * zeta)
            })
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(total).process(&mut buf);
        let scale = 1.0 / (total as f64 * self.spacing);
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= scale * Complex64::from_polar(1.0, k as f64 * self.spacing * self.freq0);
        }
        SampledSignal::new(self.x0, self.spacing, buf).expect("padded grid is valid")
    }
}

/// Prefix sums of one spatial point's frequency bins; see [`Spectrum::prefix_at`].
pub struct PartialIntegralTable<'a> {
    spectrum: &'a Spectrum,
    prefix: Vec<Complex64>,
}

impl PartialIntegralTable<'_> {
    pub fn query(&self, a: f64, b: f64) -> Result<Complex64> {
        if !(a <= b) {
            return Err(VcError::FrequencyOrder { lo: a, hi: b });
        }
        Ok(self.query_bins(self.spectrum.bin_at_or_above(a), self.spectrum.bin_at_or_above(b)))
    }

    /// Query by precomputed bin indices (see [`Spectrum::bin_at_or_above`]).
    pub fn query_bins(&self, lo: usize, hi: usize) -> Complex64 {
        self.prefix[hi] - self.prefix[lo]
    }
}

/// Convenience wrapper: spectrum analysis plus one partial inversion.
pub fn partial_fourier_integral(f: &SampledSignal, xi_minus: f64, xi_plus: f64, x: f64) -> Result<Complex64> {
    Spectrum::analyze(f, 2).partial_integral(xi_minus, xi_plus, x)
}

/// Forward transform of `f` sampled at arbitrary probe frequencies by direct
/// summation. Used for small verification tasks where FFT gridding is noise.
pub fn transform_at(f: &SampledSignal, zeta: f64) -> Complex64 {
    let dx = f.spacing();
    let mut acc = Complex64::default();
    for k in 0..f.len() {
        acc += f.samples()[k] * Complex64::from_polar(1.0, -f.x(k) * zeta);
    }
    acc * dx
}
