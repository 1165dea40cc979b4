//! Variation-norm partition search over a finite frequency grid.
//!
//! For a signal `f`, a frequency grid `xi_0 < ... < xi_{M-1}` and `r > 1`,
//! the quantity computed at a point `x` is
//!
//! ```text
//! sup over increasing index chains (k_0 < ... < k_m) of
//!     ( sum_j |S(xi_{k_{j-1}}, xi_{k_j}; x)|^r )^{1/r}
//! ```
//!
//! where `S(a, b; x)` is the partial Fourier integral of `f` over `[a, b)`.
//! Prepending the lowest grid index never decreases a chain's value, so the
//! dynamic program anchors every chain at index 0 and the supremum is
//! unchanged. Sums are accumulated left to right so a chain's value is
//! bit-identical to a direct evaluation of the same chain.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Result, VcError};
use crate::fourier::{FrequencyGrid, PartialIntegralTable, Spectrum};
use crate::signal::SampledSignal;

/// Increasing grid-index chain; adjacent pairs are the partition's jumps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariationPartition {
    pub indices: Vec<usize>,
}

impl VariationPartition {
    pub fn new(indices: Vec<usize>, grid_len: usize) -> Result<Self> {
        if indices.len() < 2 {
            return Err(VcError::Config("partition needs at least two grid indices".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VcError::Config("partition indices must be strictly increasing".into()));
        }
        if *indices.last().unwrap() >= grid_len {
            return Err(VcError::Config("partition index out of grid range".into()));
        }
        Ok(Self { indices })
    }

    pub fn jump_count(&self) -> usize {
        self.indices.len() - 1
    }
}

/// Result of the partition search at a single point.
#[derive(Debug, Clone)]
pub struct CarlesonPoint {
    /// `(max chain value)^{1/r}`.
    pub value: f64,
    /// The same maximum before the `1/r` root; exact DP output.
    pub value_pow: f64,
    pub partition: VariationPartition,
    /// Partial integrals over the argmax partition's jumps.
    pub jumps: Vec<Complex64>,
}

/// Shared state for evaluating the partition search at many points: the
/// signal's spectrum plus the grid frequencies resolved to spectrum bins.
pub struct CarlesonEvaluator {
    spectrum: Spectrum,
    grid: FrequencyGrid,
    bins: Vec<usize>,
    r: f64,
}

impl CarlesonEvaluator {
    pub fn new(f: &SampledSignal, grid: &FrequencyGrid, r: f64) -> Result<Self> {
        if !(r > 1.0) || !r.is_finite() {
            return Err(VcError::Config(format!("variation exponent must exceed 1, got {r}")));
        }
        let spectrum = Spectrum::analyze(f, 2);
        let bins = grid.points().iter().map(|&xi| spectrum.bin_at_or_above(xi)).collect();
        Ok(Self { spectrum, grid: grid.clone(), bins, r })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Partial integral between two grid frequencies at `x`.
    pub fn jump(&self, table: &PartialIntegralTable<'_>, i: usize, j: usize) -> Complex64 {
        table.query_bins(self.bins[i], self.bins[j])
    }

    /// Value of one explicit partition at `x`, with its jump integrals.
    pub fn partition_value(&self, partition: &VariationPartition, x: f64) -> (f64, Vec<Complex64>) {
        let table = self.spectrum.prefix_at(x);
        let mut jumps = Vec::with_capacity(partition.jump_count());
        let mut acc = 0.0;
        for w in partition.indices.windows(2) {
            let s = self.jump(&table, w[0], w[1]);
            acc += s.norm().powf(self.r);
            jumps.push(s);
        }
        (acc.powf(1.0 / self.r), jumps)
    }

    /// Dynamic program over all chains at `x`.
    ///
    /// Ties are broken deterministically: at each end index the smallest
    /// maximizing predecessor wins, and among end indices the smallest
    /// maximizing end wins, which selects the lexicographically smallest
    /// chain in the generic (tie-free) case and `[0, 1]` for the zero signal.
    pub fn at(&self, x: f64) -> CarlesonPoint {
        let m = self.grid.len();
        let table = self.spectrum.prefix_at(x);
        let mut best = vec![0.0_f64; m];
        let mut parent = vec![usize::MAX; m];
        for j in 1..m {
            let mut v = f64::NEG_INFINITY;
            let mut p = 0;
            for i in 0..j {
                let cand = best[i] + self.jump(&table, i, j).norm().powf(self.r);
                if cand > v {
                    v = cand;
                    p = i;
                }
            }
            best[j] = v;
            parent[j] = p;
        }
        let mut end = 1;
        for j in 2..m {
            if best[j] > best[end] {
                end = j;
            }
        }
        let mut chain = vec![end];
        let mut k = end;
        while k != 0 {
            k = parent[k];
            chain.push(k);
        }
        chain.reverse();
        let partition = VariationPartition { indices: chain };
        let table_jumps: Vec<Complex64> = partition
            .indices
            .windows(2)
            .map(|w| self.jump(&table, w[0], w[1]))
            .collect();
        CarlesonPoint {
            value: best[end].powf(1.0 / self.r),
            value_pow: best[end],
            partition,
            jumps: table_jumps,
        }
    }
}

/// Grid-restricted variation value of one explicit partition at `x`.
pub fn partition_variation_value(
    f: &SampledSignal,
    grid: &FrequencyGrid,
    partition: &VariationPartition,
    r: f64,
    x: f64,
) -> Result<f64> {
    VariationPartition::new(partition.indices.clone(), grid.len())?;
    let eval = CarlesonEvaluator::new(f, grid, r)?;
    Ok(eval.partition_value(partition, x).0)
}

/// Partition search at one point.
pub fn var_carleson_dp(f: &SampledSignal, grid: &FrequencyGrid, r: f64, x: f64) -> Result<CarlesonPoint> {
    Ok(CarlesonEvaluator::new(f, grid, r)?.at(x))
}

/// Partition search at every sample of `f`'s window.
pub fn var_carleson_function(f: &SampledSignal, grid: &FrequencyGrid, r: f64) -> Result<Vec<CarlesonPoint>> {
    let eval = CarlesonEvaluator::new(f, grid, r)?;
    Ok((0..f.len())
        .into_par_iter()
        .map(|k| eval.at(f.x(k)))
        .collect())
}

/// A measurable choice of partition and unit dual coefficients per sample.
///
/// At sample `k` the partition `partitions[k]` indexes the frequency grid and
/// `coeffs[k]` holds one complex coefficient per jump with unit dual norm
/// `sum_j |a_j|^{r'} = 1`, `r' = r / (r - 1)`.
#[derive(Debug, Clone)]
pub struct LinearizationData {
    pub grid: FrequencyGrid,
    pub partitions: Vec<VariationPartition>,
    pub coeffs: Vec<Vec<Complex64>>,
    pub r: f64,
}

impl LinearizationData {
    pub fn r_dual(&self) -> f64 {
        self.r / (self.r - 1.0)
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.partitions.len() != n_samples || self.coeffs.len() != n_samples {
            return Err(VcError::Config(format!(
                "linearization covers {} samples, signal has {n_samples}",
                self.partitions.len()
            )));
        }
        let rd = self.r_dual();
        for (k, (p, a)) in self.partitions.iter().zip(&self.coeffs).enumerate() {
            if p.jump_count() != a.len() {
                return Err(VcError::Config(format!("sample {k}: {} jumps vs {} coefficients", p.jump_count(), a.len())));
            }
            let norm: f64 = a.iter().map(|c| c.norm().powf(rd)).sum();
            if (norm.powf(1.0 / rd) - 1.0).abs() > 1e-9 {
                return Err(VcError::Config(format!("sample {k}: dual norm {} is not 1", norm.powf(1.0 / rd))));
            }
        }
        Ok(())
    }

    /// Extract the argmax linearization from a per-sample partition search:
    /// coefficients are the phase-conjugated dual powers of the jumps, so the
    /// linearized form against a nonnegative weight reproduces the pairing
    /// with the variation value itself.
    pub fn from_carleson(grid: &FrequencyGrid, points: &[CarlesonPoint], r: f64) -> Self {
        let rd = r / (r - 1.0);
        let mut partitions = Vec::with_capacity(points.len());
        let mut coeffs = Vec::with_capacity(points.len());
        for pt in points {
            partitions.push(pt.partition.clone());
            let v = pt.value;
            let mut a: Vec<Complex64> = if v > 0.0 {
                pt.jumps
                    .iter()
                    .map(|s| {
                        let mag = s.norm();
                        if mag == 0.0 {
                            Complex64::default()
                        } else {
                            (s.conj() / mag) * (mag / v).powf(r - 1.0)
                        }
                    })
                    .collect()
            } else {
                let mut zeroed = vec![Complex64::default(); pt.jumps.len()];
                zeroed[0] = Complex64::new(1.0, 0.0);
                zeroed
            };
            let norm: f64 = a.iter().map(|c| c.norm().powf(rd)).sum();
            let scale = norm.powf(1.0 / rd);
            if scale > 0.0 {
                for c in a.iter_mut() {
                    *c /= scale;
                }
            }
            coeffs.push(a);
        }
        Self { grid: grid.clone(), partitions, coeffs, r }
    }

    /// Random admissible linearization for stress tests and experiments.
    pub fn random(rng: &mut impl rand::Rng, grid: &FrequencyGrid, n_samples: usize, max_jumps: usize, r: f64) -> Self {
        let rd = r / (r - 1.0);
        let m = grid.len();
        let mut partitions = Vec::with_capacity(n_samples);
        let mut coeffs = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let jumps = rng.gen_range(1..=max_jumps.min(m - 1));
            // Choose jumps+1 distinct indices.
            let mut idx: Vec<usize> = (0..m).collect();
            for i in 0..jumps + 1 {
                let j = rng.gen_range(i..m);
                idx.swap(i, j);
            }
            let mut chosen: Vec<usize> = idx[..jumps + 1].to_vec();
            chosen.sort_unstable();
            let mut a: Vec<Complex64> = (0..jumps)
                .map(|_| Complex64::from_polar(rng.gen_range(0.1..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            let norm: f64 = a.iter().map(|c| c.norm().powf(rd)).sum();
            let scale = norm.powf(1.0 / rd);
            for c in a.iter_mut() {
                *c /= scale;
            }
            partitions.push(VariationPartition { indices: chosen });
            coeffs.push(a);
        }
        Self { grid: grid.clone(), partitions, coeffs, r }
    }
}

/// The linearized pairing
/// `integral g(x) sum_j a_j(x) S(xi_{j-1}(x), xi_j(x); x) dx`
/// over the common sample grid of `f` and `g` (trapezoid rule).
pub fn linearized_form(f: &SampledSignal, g: &SampledSignal, lin: &LinearizationData) -> Result<Complex64> {
    if !f.same_grid(g) {
        return Err(VcError::Config("linearized form needs f and g on the same grid".into()));
    }
    lin.validate(f.len())?;
    let eval = CarlesonEvaluator::new(f, &lin.grid, lin.r)?;
    let mut acc = Complex64::default();
    let dx = f.spacing();
    for k in 0..f.len() {
        let w = if k == 0 || k == f.len() - 1 { 0.5 * dx } else { dx };
        let table = eval.spectrum.prefix_at(f.x(k));
        let mut inner = Complex64::default();
        for (jw, a) in lin.partitions[k].indices.windows(2).zip(&lin.coeffs[k]) {
            inner += *a * eval.jump(&table, jw[0], jw[1]);
        }
        acc += g.samples()[k] * inner * w;
    }
    Ok(acc)
}

/// `integral (partition search value of f)(x) * |g(x)| dx` (trapezoid rule).
pub fn dual_pairing(f: &SampledSignal, g: &SampledSignal, grid: &FrequencyGrid, r: f64) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(VcError::Config("dual pairing needs f and g on the same grid".into()));
    }
    let points = var_carleson_function(f, grid, r)?;
    let dx = f.spacing();
    let mut acc = 0.0;
    for k in 0..f.len() {
        let w = if k == 0 || k == f.len() - 1 { 0.5 * dx } else { dx };
        acc += points[k].value * g.samples()[k].norm() * w;
    }
    Ok(acc)
}
