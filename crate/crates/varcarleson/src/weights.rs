//! Muckenhoupt-style weight constants on the sample grid, weighted norms,
//! and the slope experiment relating the operator ratio to the weight
//! constant.
//!
//! The constant of a weight `w` at exponent `t > 1` is the supremum over a
//! family of grid intervals of `<w>_I * <w^(1/(1-t))>_I^(t-1)`, with plain
//! trapezoid averages. The interval family is the dyadic-length family used
//! by the maximal function (every position, lengths `2^k` cells), which
//! 2-approximates the scan over all grid intervals.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, VcError};
use crate::fourier::FrequencyGrid;
use crate::signal::SampledSignal;
use crate::varcar::var_carleson_function;

/// Smallest admissible weight value; keeps the dual power `w^(1/(1-t))`
/// finite on the grid.
pub const WEIGHT_FLOOR: f64 = 1e-8;

/// A nonnegative real weight on a uniform grid, bounded below by
/// [`WEIGHT_FLOOR`].
#[derive(Debug, Clone)]
pub struct WeightSample {
    signal: SampledSignal,
}

impl WeightSample {
    /// Validates that every sample is real, finite, and at least the floor.
    pub fn new(signal: SampledSignal) -> Result<Self> {
        for (k, z) in signal.samples().iter().enumerate() {
            if z.im != 0.0 {
                return Err(VcError::Input(format!("weight sample {k} has imaginary part {}", z.im)));
            }
            if !z.re.is_finite() || z.re < WEIGHT_FLOOR {
                return Err(VcError::Input(format!(
                    "weight sample {k} is {}, below the floor {WEIGHT_FLOOR}",
                    z.re
                )));
            }
        }
        Ok(Self { signal })
    }

    /// Builds a weight from a real-valued function, clamping at the floor.
    pub fn from_fn(origin: f64, spacing: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let signal = SampledSignal::from_fn(origin, spacing, n, |x| {
            Complex64::new(f(x).max(WEIGHT_FLOOR), 0.0)
        })?;
        Self::new(signal)
    }

    pub fn signal(&self) -> &SampledSignal {
        &self.signal
    }

    pub fn values(&self) -> Vec<f64> {
        self.signal.samples().iter().map(|z| z.re).collect()
    }

    /// The weight multiplied by a positive constant.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(VcError::Config(format!("weight scale must be positive, got {c}")));
        }
        let mut signal = self.signal.clone();
        for z in signal.samples_mut() {
            *z *= c;
        }
        Self::new(signal)
    }
}

/// The power weight `(1 + |x|)^a` sampled on a grid.
pub fn power_weight(origin: f64, spacing: f64, n: usize, a: f64) -> Result<WeightSample> {
    WeightSample::from_fn(origin, spacing, n, |x| (1.0 + x.abs()).powf(a))
}

/// Prefix sums supporting O(1) trapezoid averages over grid windows.
struct TrapezoidScan {
    vals: Vec<f64>,
    prefix: Vec<f64>,
}

impl TrapezoidScan {
    fn new(vals: Vec<f64>) -> Self {
        let mut prefix = Vec::with_capacity(vals.len() + 1);
        prefix.push(0.0);
        for &v in &vals {
            prefix.push(prefix.last().unwrap() + v);
        }
        Self { vals, prefix }
    }

    /// Trapezoid average over the window of `steps` cells from `start`.
    fn avg(&self, start: usize, steps: usize) -> f64 {
        let total = self.prefix[start + steps + 1] - self.prefix[start];
        let interior = total - 0.5 * self.vals[start] - 0.5 * self.vals[start + steps];
        interior / steps as f64
    }
}

/// `sup_I <w>_I <w^(1/(1-t))>_I^(t-1)` over the dyadic-length interval
/// family. At least 1 for every weight, exactly 1 for a constant one.
pub fn a_t_constant(w: &WeightSample, t: f64) -> Result<f64> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(VcError::Config(format!("weight exponent must exceed 1, got {t}")));
    }
    let vals = w.values();
    let n = vals.len();
    let beta = 1.0 / (1.0 - t);
    let dual_vals: Vec<f64> = vals.iter().map(|&v| v.powf(beta)).collect();
    let direct = TrapezoidScan::new(vals);
    let dual = TrapezoidScan::new(dual_vals);
    let mut sup = f64::NEG_INFINITY;
    let mut steps = 1usize;
    while steps <= n - 1 {
        for start in 0..=(n - 1 - steps) {
            let prod = direct.avg(start, steps) * dual.avg(start, steps).powf(t - 1.0);
            if prod > sup {
                sup = prod;
            }
        }
        steps <<= 1;
    }
    Ok(sup)
}

/// `(integral |f|^q w dx)^(1/q)` by the trapezoid rule on the common grid.
pub fn weighted_norm(f: &SampledSignal, w: &WeightSample, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(VcError::Config(format!("norm exponent must be positive, got {q}")));
    }
    if !f.same_grid(w.signal()) {
        return Err(VcError::Config("weighted norm needs f and w on the same grid".into()));
    }
    let dx = f.spacing();
    let n = f.len();
    let mut acc = 0.0;
    for k in 0..n {
        let cell = if k == 0 || k == n - 1 { 0.5 * dx } else { dx };
        acc += f.samples()[k].norm().powf(q) * w.signal().samples()[k].re * cell;
    }
    Ok(acc.powf(1.0 / q))
}

/// One weight of the experiment: its label (the power-weight exponent or
/// any other family parameter), its constant, and the largest operator
/// ratio over the corpus.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRow {
    pub label: f64,
    pub a_t: f64,
    pub ratio: f64,
}

/// Least-squares fit of `ln ratio` against `ln a_t`, with the slope cap
/// the fit must stay under.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentFit {
    pub slope: f64,
    pub intercept: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub fit: ExperimentFit,
    pub r: f64,
    pub q: f64,
    pub t: f64,
}

/// Checks `q > r/(r-1)` and `1 < t < q (r-1) / r`.
pub fn validate_experiment_exponents(r: f64, q: f64, t: f64) -> Result<()> {
    if !(r > 2.0) || !r.is_finite() {
        return Err(VcError::Config(format!("variation exponent must exceed 2, got {r}")));
    }
    let r_dual = r / (r - 1.0);
    if !(q > r_dual) || !q.is_finite() {
        return Err(VcError::Config(format!("norm exponent {q} must exceed the dual exponent {r_dual}")));
    }
    if !(t > 1.0 && t < q / r_dual) {
        return Err(VcError::Config(format!(
            "weight exponent {t} must lie in (1, {})",
            q / r_dual
        )));
    }
    Ok(())
}

/// For each weight of the family: the constant and the largest ratio
/// `weighted_norm(search value of f, w, q) / weighted_norm(f, w, q)` over
/// the corpus; then the log-log slope of ratio against constant, compared
/// with `max(1, t / (q (t - 1))) + 0.5`. The partition-search values are
/// computed once per corpus member and shared across weights.
pub fn weighted_bound_experiment(
    r: f64,
    q: f64,
    t: f64,
    family: &[(f64, WeightSample)],
    corpus: &[SampledSignal],
    fgrid: &FrequencyGrid,
) -> Result<ExperimentTable> {
    validate_experiment_exponents(r, q, t)?;
    if family.len() < 2 {
        return Err(VcError::Config("the slope fit needs at least two weights".into()));
    }
    if corpus.is_empty() {
        return Err(VcError::Config("the experiment needs a nonempty corpus".into()));
    }
    let searched: Result<Vec<SampledSignal>> = corpus
        .par_iter()
        .map(|f| {
            let points = var_carleson_function(f, fgrid, r)?;
            SampledSignal::new(
                f.origin(),
                f.spacing(),
                points.iter().map(|p| Complex64::new(p.value, 0.0)).collect(),
            )
        })
        .collect();
    let searched = searched?;
    let mut rows = Vec::with_capacity(family.len());
    for (label, w) in family {
        let a_t = a_t_constant(w, t)?;
        let mut ratio = 0.0f64;
        for (f, cf) in corpus.iter().zip(&searched) {
            let denom = weighted_norm(f, w, q)?;
            if denom <= 0.0 {
                continue;
            }
            ratio = ratio.max(weighted_norm(cf, w, q)? / denom);
        }
        rows.push(ExperimentRow { label: *label, a_t, ratio });
    }
    let fit = fit_log_slope(&rows, q, t)?;
    Ok(ExperimentTable { rows, fit, r, q, t })
}

fn fit_log_slope(rows: &[ExperimentRow], q: f64, t: f64) -> Result<ExperimentFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|row| row.a_t > 0.0 && row.ratio > 0.0)
        .map(|row| (row.a_t.ln(), row.ratio.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(VcError::Config("the slope fit needs at least two usable rows".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-18 {
        return Err(VcError::Config(
            "the weight family has indistinguishable constants; the slope is undefined".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let bound = 1.0f64.max(t / (q * (t - 1.0))) + 0.5;
    Ok(ExperimentFit { slope, intercept, bound, pass: slope <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> (f64, f64, usize) {
        (-4.0, 1.0 / 32.0, 257)
    }

    fn random_signal(rng: &mut impl Rng, n: usize, origin: f64, dx: f64) -> SampledSignal {
        let window = (n - 1) as f64 * dx;
        let packets: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    origin + rng.gen_range(0.2 * window..0.8 * window),
                    rng.gen_range(0.3..1.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(0.4..1.3),
                )
            })
            .collect();
        SampledSignal::from_fn(origin, dx, n, |x| {
            let mut z = Complex64::default();
            for &(c, w, xi, amp) in &packets {
                z += Complex64::from_polar((-((x - c) / w).powi(2)).exp() * amp, xi * x);
            }
            z
        })
        .unwrap()
    }

    #[test]
    fn constant_weight_has_constant_exactly_one() {
        let (o, dx, n) = grid();
        let w = WeightSample::from_fn(o, dx, n, |_| 1.0).unwrap();
        for t in [1.2, 1.5, 2.0, 4.0] {
            assert_eq!(a_t_constant(&w, t).unwrap(), 1.0);
        }
    }

    #[test]
    fn nonunit_constant_weight_stays_within_rounding_of_one() {
        let (o, dx, n) = grid();
        let w = WeightSample::from_fn(o, dx, n, |_| 5.0).unwrap();
        for t in [1.2, 2.0, 4.0] {
            let c = a_t_constant(&w, t).unwrap();
            assert!((c - 1.0).abs() <= 1e-12, "constant 5 gives {c} at t = {t}");
        }
    }

    #[test]
    fn rejects_exponents_at_or_below_one() {
        let (o, dx, n) = grid();
        let w = WeightSample::from_fn(o, dx, n, |_| 1.0).unwrap();
        assert!(a_t_constant(&w, 1.0).is_err());
        assert!(a_t_constant(&w, 0.5).is_err());
    }

    #[test]
    fn power_weights_grow_with_the_exponent_and_match_a_full_scan() {
        let (o, dx, n) = grid();
        let t = 2.0;
        let mut last = 1.0;
        for a in [0.05, 0.1, 0.2] {
            let w = power_weight(o, dx, n, a).unwrap();
            let c = a_t_constant(&w, t).unwrap();
            assert!(c > last, "constant must grow with the power, got {c} after {last}");
            last = c;
            // Oracle: scan every grid interval, not just dyadic lengths.
            let vals = w.values();
            let dual_vals: Vec<f64> = vals.iter().map(|&v| v.powf(1.0 / (1.0 - t))).collect();
            let direct = TrapezoidScan::new(vals);
            let dual = TrapezoidScan::new(dual_vals);
            let mut full = f64::NEG_INFINITY;
            for steps in 1..n {
                for start in 0..(n - steps) {
                    let prod = direct.avg(start, steps) * dual.avg(start, steps).powf(t - 1.0);
                    full = full.max(prod);
                }
            }
            assert!(c <= full * (1.0 + 1e-12));
            assert!(
                (full - c) / full <= 0.05,
                "dyadic family misses the full scan by more than 5%: {c} vs {full}"
            );
        }
    }

    #[test]
    fn constants_do_not_increase_with_the_exponent() {
        let (o, dx, n) = grid();
        let w = power_weight(o, dx, n, 0.3).unwrap();
        let mut last = f64::INFINITY;
        for t in [1.5, 2.0, 3.0, 4.0] {
            let c = a_t_constant(&w, t).unwrap();
            assert!(c <= last * (1.0 + 1e-9), "constant grew from {last} to {c} at t = {t}");
            last = c;
        }
    }

    #[test]
    fn scaling_the_weight_leaves_the_constant_unchanged() {
        let (o, dx, n) = grid();
        let w = power_weight(o, dx, n, 0.2).unwrap();
        let scaled = w.scaled(8.0).unwrap();
        for t in [1.2, 2.0] {
            let base = a_t_constant(&w, t).unwrap();
            let after = a_t_constant(&scaled, t).unwrap();
            assert!(
                (after - base).abs() <= 1e-12 * base,
                "scaling moved the constant from {base} to {after}"
            );
        }
    }

    #[test]
    fn weighted_norm_basics() {
        let (o, dx, n) = grid();
        let w1 = WeightSample::from_fn(o, dx, n, |_| 1.0).unwrap();
        let zero = SampledSignal::from_fn(o, dx, n, |_| Complex64::default()).unwrap();
        assert_eq!(weighted_norm(&zero, &w1, 4.0).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_signal(&mut rng, n, o, dx);
        let q = 4.0;
        // Unit weight reproduces the plain trapezoid norm.
        let mut acc = 0.0;
        for k in 0..n {
            let cell = if k == 0 || k == n - 1 { 0.5 * dx } else { dx };
            acc += f.samples()[k].norm().powf(q) * cell;
        }
        let plain = acc.powf(1.0 / q);
        let weighted = weighted_norm(&f, &w1, q).unwrap();
        assert!((weighted - plain).abs() <= 1e-12 * plain);
        // Homogeneity in the signal.
        let mut f3 = f.clone();
        for z in f3.samples_mut() {
            *z *= 3.0;
        }
        let n1 = weighted_norm(&f3, &w1, q).unwrap();
        assert!((n1 - 3.0 * weighted).abs() <= 1e-12 * n1);
    }

    #[test]
    fn experiment_parameters_are_validated() {
        assert!(validate_experiment_exponents(3.0, 4.0, 1.2).is_ok());
        // q at the dual exponent.
        assert!(validate_experiment_exponents(3.0, 1.5, 1.2).is_err());
        // t out of range.
        assert!(validate_experiment_exponents(3.0, 4.0, 1.0).is_err());
        assert!(validate_experiment_exponents(3.0, 4.0, 2.7).is_err());
    }

    #[test]
    fn power_weight_experiment_fits_below_the_bound() {
        let o = 0.0;
        let dx = 1.0 / 24.0;
        let n = 97;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let corpus: Vec<SampledSignal> =
            (0..3).map(|_| random_signal(&mut rng, n, o, dx)).collect();
        let fgrid = FrequencyGrid::uniform(-3.0, 3.0, 5).unwrap();
        let family: Vec<(f64, WeightSample)> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&a| (a, power_weight(o, dx, n, a).unwrap()))
            .collect();
        let table = weighted_bound_experiment(3.0, 4.0, 1.2, &family, &corpus, &fgrid).unwrap();
        assert_eq!(table.rows.len(), 3);
        for row in &table.rows {
            assert!(row.a_t >= 1.0);
            assert!(row.ratio.is_finite() && row.ratio > 0.0);
        }
        assert!((table.fit.bound - 2.0).abs() < 1e-12);
        assert!(table.fit.pass, "slope {} exceeded {}", table.fit.slope, table.fit.bound);
    }

    #[test]
    fn experiment_ratios_ignore_weight_scaling() {
        let o = 0.0;
        let dx = 1.0 / 24.0;
        let n = 97;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let corpus: Vec<SampledSignal> =
            (0..2).map(|_| random_signal(&mut rng, n, o, dx)).collect();
        let fgrid = FrequencyGrid::uniform(-3.0, 3.0, 5).unwrap();
        let base = power_weight(o, dx, n, 0.1).unwrap();
        let scaled = base.scaled(7.0).unwrap();
        let family = vec![(0.1, base), (0.1, scaled)];
        let table = weighted_bound_experiment(3.0, 4.0, 1.2, &family, &corpus, &fgrid);
        // Identical constants make the fit degenerate; that must surface as
        // a configuration error rather than a bogus slope.
        assert!(table.is_err());
        // The ratios themselves are scale-invariant; check directly.
        let f = &corpus[0];
        let points = var_carleson_function(f, &fgrid, 3.0).unwrap();
        let cf = SampledSignal::new(
            o,
            dx,
            points.iter().map(|p| Complex64::new(p.value, 0.0)).collect(),
        )
        .unwrap();
        let w = power_weight(o, dx, n, 0.1).unwrap();
        let ws = w.scaled(7.0).unwrap();
        let r1 = weighted_norm(&cf, &w, 4.0).unwrap() / weighted_norm(f, &w, 4.0).unwrap();
        let r2 = weighted_norm(&cf, &ws, 4.0).unwrap() / weighted_norm(f, &ws, 4.0).unwrap();
        assert!((r1 - r2).abs() <= 1e-12 * r1);
    }
}
