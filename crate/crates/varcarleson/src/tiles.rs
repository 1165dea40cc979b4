//! Discretization of the upper 3-space of positions, scales, and
//! frequencies on which the packet transforms live.
//!
//! Positions `u` sit on the signal's own sample lattice, extended
//! symmetrically so that triples of window subintervals stay covered.
//! Scales `t` are geometric with a configurable number of steps per octave
//! and carry the log-midpoint weight `dt = t ln 2 / steps`. Frequencies
//! `eta` per scale are uniform with step `deta = eta_step * bandwidth / t`,
//! matching the packet's `1/t` spectral width, and cover the caller's
//! frequency band plus the widest tent margin `theta / t` used by the tent
//! machinery. The product `du * dt * deta` is the integration weight of one
//! cell.

use crate::error::{Result, VcError};
use crate::signal::{Interval, SampledSignal};

/// One scale level: its `t`, weights, and frequency row description.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScaleRow {
    pub t: f64,
    /// Scale weight `t ln 2 / scales_per_octave`.
    pub dt: f64,
    pub eta0: f64,
    pub deta: f64,
    pub n_eta: usize,
}

impl ScaleRow {
    pub fn eta_at(&self, k: usize) -> f64 {
        self.eta0 + k as f64 * self.deta
    }

    /// Indices whose `eta` lies in `[lo, hi)`, clamped to the row.
    pub fn eta_index_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let start = ((lo - self.eta0) / self.deta).ceil().max(0.0) as usize;
        let end = (((hi - self.eta0) / self.deta).ceil().max(0.0) as usize).min(self.n_eta);
        (start.min(self.n_eta), end)
    }
}

/// Shape constants for the discretization.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TileGridParams {
    /// Geometric scale steps per octave; 1 gives the dyadic ladder.
    pub scales_per_octave: usize,
    /// Frequency step per scale in units of `bandwidth / t`.
    pub eta_step: f64,
    /// Extra frequency margin per scale in units of `1 / t`; must cover the
    /// widest tent frequency offset in use.
    pub eta_margin: f64,
    /// Finest scale in units of the sample spacing.
    pub t_min_samples: f64,
    /// Coarsest scale as a fraction of the window length.
    pub t_max_fraction: f64,
    /// Position range as a dilation factor of the window.
    pub u_dilation: f64,
}

impl Default for TileGridParams {
    fn default() -> Self {
        Self {
            scales_per_octave: 1,
            eta_step: 1.0 / 12.0,
            eta_margin: 8.0,
            t_min_samples: 4.0,
            t_max_fraction: 0.5,
            u_dilation: 3.0,
        }
    }
}

impl TileGridParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.scales_per_octave >= 1
            && self.eta_step > 0.0
            && self.eta_margin >= 0.0
            && self.t_min_samples > 0.0
            && self.t_max_fraction > 0.0
            && self.t_max_fraction <= 1.0
            && self.u_dilation >= 1.0;
        if !ok {
            return Err(VcError::Config("tile grid parameters out of range".into()));
        }
        Ok(())
    }
}

/// The full (position, scale, frequency) lattice.
#[derive(Debug, Clone)]
pub struct TileGrid {
    pub u0: f64,
    pub du: f64,
    pub n_u: usize,
    pub rows: Vec<ScaleRow>,
    pub params: TileGridParams,
    /// Window of the signal the grid was built for.
    pub window: Interval,
}

impl TileGrid {
    /// Build the lattice for a signal whose spectrum lives (up to packet
    /// tails) inside `[freq_lo, freq_hi]`, with bump/packet bandwidth
    /// `bandwidth`.
    pub fn for_signal(
        f: &SampledSignal,
        freq_lo: f64,
        freq_hi: f64,
        bandwidth: f64,
        params: TileGridParams,
    ) -> Result<Self> {
        params.validate()?;
        if !(freq_hi >= freq_lo) {
            return Err(VcError::FrequencyOrder { lo: freq_lo, hi: freq_hi });
        }
        if !(bandwidth > 0.0) {
            return Err(VcError::Config("bandwidth must be positive".into()));
        }
        let window = f.window();
        let du = f.spacing();
        // Extend the position axis symmetrically on the sample lattice.
        let side = (0.5 * (params.u_dilation - 1.0) * window.length / du).ceil() as usize;
        let u0 = f.origin() - side as f64 * du;
        let n_u = f.len() + 2 * side;
        let t_min = params.t_min_samples * du;
        let t_max = params.t_max_fraction * window.length;
        if t_max <= t_min {
            return Err(VcError::ScaleUnresolvable { scale: t_max, spacing: du });
        }
        let q = params.scales_per_octave as f64;
        let n_scales = ((t_max / t_min).log2() * q).floor() as usize + 1;
        let mut rows = Vec::with_capacity(n_scales);
        for k in 0..n_scales {
            let t = t_min * 2f64.powf(k as f64 / q);
            let deta = params.eta_step * bandwidth / t;
            let lo = freq_lo - params.eta_margin / t;
            let hi = freq_hi + params.eta_margin / t;
            let n_eta = ((hi - lo) / deta).ceil() as usize + 1;
            if n_eta < 2 {
                return Err(VcError::ScaleUnresolvable { scale: t, spacing: deta });
            }
            rows.push(ScaleRow {
                t,
                dt: t * std::f64::consts::LN_2 / q,
                eta0: lo,
                deta,
                n_eta,
            });
        }
        Ok(Self { u0, du, n_u, rows, params, window })
    }

    pub fn u_at(&self, i: usize) -> f64 {
        self.u0 + i as f64 * self.du
    }

    /// Indices whose `u` lies in the open interval `(lo, hi)`, clamped.
    /// Lattice points within a relative `1e-9` of an endpoint count as on it
    /// and are excluded.
    pub fn u_index_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let eps = 1e-9;
        let g = (lo - self.u0) / self.du;
        let h = (hi - self.u0) / self.du;
        let start = ((g + eps).floor() + 1.0).max(0.0) as usize;
        let end = ((h - eps).ceil().max(0.0) as usize).min(self.n_u);
        (start.min(self.n_u), end)
    }

    /// Integration weight of one cell at scale row `s`.
    pub fn cell_weight(&self, s: usize) -> f64 {
        self.du * self.rows[s].dt * self.rows[s].deta
    }

    pub fn tile_count(&self) -> usize {
        self.rows.iter().map(|r| r.n_eta * self.n_u).sum()
    }
}

/// Complex values attached to every cell of a `TileGrid`, stored per scale
/// row with `u` contiguous: `rows[s][i_eta * n_u + i_u]`.
#[derive(Debug, Clone)]
pub struct TileField {
    pub rows: Vec<Vec<rustfft::num_complex::Complex64>>,
    pub n_u: usize,
}

impl TileField {
    pub fn zeros(grid: &TileGrid) -> Self {
        Self {
            rows: grid
                .rows
                .iter()
                .map(|r| vec![rustfft::num_complex::Complex64::default(); r.n_eta * grid.n_u])
                .collect(),
            n_u: grid.n_u,
        }
    }

    pub fn at(&self, s: usize, i_eta: usize, i_u: usize) -> rustfft::num_complex::Complex64 {
        self.rows[s][i_eta * self.n_u + i_u]
    }

    pub fn row(&self, s: usize, i_eta: usize) -> &[rustfft::num_complex::Complex64] {
        &self.rows[s][i_eta * self.n_u..(i_eta + 1) * self.n_u]
    }

    pub fn row_mut(&mut self, s: usize, i_eta: usize) -> &mut [rustfft::num_complex::Complex64] {
        &mut self.rows[s][i_eta * self.n_u..(i_eta + 1) * self.n_u]
    }
}
