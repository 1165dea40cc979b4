//! Embeddings of signals into the (position, scale, frequency) lattice.
//!
//! `embed_f` is the packet transform
//! `F(u, t, eta) = (1/2pi) integral fhat(zeta) psi_hat(t(zeta - eta))
//! e^{i u zeta} dzeta`, i.e. the inner product of `f` with the packet at
//! `(u, t, eta)`. Each lattice row (fixed scale and frequency) is one
//! multiplier synthesis, so the whole field costs one FFT per row.
//!
//! `embed_a` attaches to each cell the truncation mass of a second function
//! `g` under per-sample partition data: at position `u` on `g`'s grid,
//! `A(u, t, eta) = g(u) sum_j a_j(u) W(t(eta - xi_{j-1}(u)), t(xi_j(u) - eta))`
//! with `W` the symmetric truncation weight. Summed against `F` with the
//! cell measure `du dt deta`, this reproduces the linearized partition
//! pairing whenever the spectrum of `f` stays inside the reconstruction
//! plateau of the partition jumps.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Result, VcError};
use crate::fourier::Spectrum;
use crate::packet::PacketKit;
use crate::signal::SampledSignal;
use crate::tiles::{TileField, TileGrid};
use crate::varcar::LinearizationData;

/// Zero-padding factor used when embedding; must be generous enough for the
/// position axis of the lattice to fit inside the padded FFT grid.
pub const EMBED_PAD: usize = 4;

/// Packet transform of `f` over the whole lattice.
pub fn embed_f(f: &SampledSignal, kit: &PacketKit, grid: &TileGrid) -> Result<TileField> {
    let spectrum = Spectrum::analyze(f, EMBED_PAD);
    let du = f.spacing();
    let offset_f = (grid.u0 - spectrum.padded_origin()) / du;
    let offset = offset_f.round() as isize;
    if (offset_f - offset as f64).abs() > 1e-9 {
        return Err(VcError::Assertion("lattice positions not aligned with the sample grid".into()));
    }
    if offset < 0 || offset as usize + grid.n_u > spectrum.len() {
        return Err(VcError::Config(
            "position axis exceeds the padded transform range; increase padding or shrink the dilation".into(),
        ));
    }
    let offset = offset as usize;
    let mut field = TileField::zeros(grid);
    for (s, row) in grid.rows.iter().enumerate() {
        let t = row.t;
        let outputs: Vec<Vec<Complex64>> = (0..row.n_eta)
            .into_par_iter()
            .map(|k| {
                let eta = row.eta_at(k);
                let synth = spectrum.synthesize_with_multiplier(|zeta| {
                    Complex64::new(kit.packet_spectrum(t * (zeta - eta)), 0.0)
                });
                synth.samples()[offset..offset + grid.n_u].to_vec()
            })
            .collect();
        for (k, out) in outputs.into_iter().enumerate() {
            field.row_mut(s, k).copy_from_slice(&out);
        }
    }
    Ok(field)
}

/// Direct-sum reference for one cell of the packet transform; same
/// discretized spectrum, no FFT synthesis.
pub fn embed_f_at(f: &SampledSignal, kit: &PacketKit, u: f64, t: f64, eta: f64) -> Complex64 {
    let spectrum = Spectrum::analyze(f, EMBED_PAD);
    let n = spectrum.len();
    let mut acc = Complex64::default();
    for m in 0..n {
        let zeta = spectrum.freq(m);
        acc += spectrum.coeffs()[m]
            * kit.packet_spectrum(t * (zeta - eta))
            * Complex64::from_polar(1.0, u * zeta);
    }
    acc * spectrum.freq_step() / (2.0 * std::f64::consts::PI)
}

/// Truncation field of `g` under per-sample partition data. Cells whose
/// position lies outside `g`'s window are zero.
pub fn embed_a(
    g: &SampledSignal,
    lin: &LinearizationData,
    kit: &PacketKit,
    grid: &TileGrid,
) -> Result<TileField> {
    lin.validate(g.len())?;
    let du = g.spacing();
    let offset_f = (g.origin() - grid.u0) / du;
    let offset = offset_f.round() as isize;
    if (offset_f - offset as f64).abs() > 1e-9 || offset < 0 {
        return Err(VcError::Assertion("sample grid not aligned with the lattice positions".into()));
    }
    let offset = offset as usize;
    if offset + g.len() > grid.n_u {
        return Err(VcError::Config("lattice position axis does not cover the signal window".into()));
    }
    let xi = lin.grid.points();
    let mut field = TileField::zeros(grid);
    for (s, row) in grid.rows.iter().enumerate() {
        let t = row.t;
        let outputs: Vec<Vec<Complex64>> = (0..row.n_eta)
            .into_par_iter()
            .map(|k| {
                let eta = row.eta_at(k);
                let mut out = vec![Complex64::default(); g.len()];
                for (i, o) in out.iter_mut().enumerate() {
                    let gi = g.samples()[i];
                    if gi == Complex64::default() {
                        continue;
                    }
                    let idx = &lin.partitions[i].indices;
                    let mut mass = Complex64::default();
                    for (w, a) in idx.windows(2).zip(&lin.coeffs[i]) {
                        let lo = t * (eta - xi[w[0]]);
                        let hi = t * (xi[w[1]] - eta);
                        let wt = kit.truncation_weight(lo, hi);
                        if wt != 0.0 {
                            mass += *a * wt;
                        }
                    }
                    *o = gi * mass;
                }
                out
            })
            .collect();
        for (k, out) in outputs.into_iter().enumerate() {
            field.row_mut(s, k)[offset..offset + g.len()].copy_from_slice(&out);
        }
    }
    Ok(field)
}

/// Cell-measure pairing `sum F * A * du dt deta` over the whole lattice.
pub fn bilinear_pairing(f: &TileField, a: &TileField, grid: &TileGrid) -> Complex64 {
    bilinear_pairing_where(f, a, grid, |_, _, _| true)
}

/// Pairing restricted to cells selected by `keep(s, i_eta, i_u)`.
pub fn bilinear_pairing_where(
    f: &TileField,
    a: &TileField,
    grid: &TileGrid,
    keep: impl Fn(usize, usize, usize) -> bool,
) -> Complex64 {
    let mut acc = Complex64::default();
    for (s, row) in grid.rows.iter().enumerate() {
        let w = grid.cell_weight(s);
        let mut racc = Complex64::default();
        for k in 0..row.n_eta {
            let fr = f.row(s, k);
            let ar = a.row(s, k);
            for i in 0..grid.n_u {
                if ar[i] != Complex64::default() && keep(s, k, i) {
                    racc += fr[i] * ar[i];
                }
            }
        }
        acc += racc * w;
    }
    acc
}
