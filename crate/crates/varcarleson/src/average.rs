//! Local p-averages and the dyadic-length maximal function.

use crate::error::{Result, VcError};
use crate::gridset::GridSet;
use crate::signal::{Interval, SampledSignal};

/// `(|I|^{-1} integral_I |f|^p)^{1/p}` with the trapezoid rule on the grid
/// samples inside `I` (endpoints snapped inward to grid points).
///
/// The normalizing length is accumulated by the same cell sum as the
/// integral, so constants are reproduced exactly. An interval holding exactly
/// one sample degenerates to the point value `|f|` at that sample; an
/// interval holding none is an input error.
pub fn local_average(f: &SampledSignal, iv: &Interval, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(VcError::Config(format!("average exponent must be positive, got {p}")));
    }
    let (lo, hi) = sample_span(f, iv)?;
    if lo == hi {
        return Ok(f.samples()[lo].norm());
    }
    let mut weighted = 0.0;
    let mut measure = 0.0;
    let dx = f.spacing();
    for k in lo..hi {
        let a = f.samples()[k].norm().powf(p);
        let b = f.samples()[k + 1].norm().powf(p);
        weighted += dx * 0.5 * (a + b);
        measure += dx;
    }
    Ok((weighted / measure).powf(1.0 / p))
}

/// Indices of the first and last grid samples inside `iv` (inclusive).
fn sample_span(f: &SampledSignal, iv: &Interval) -> Result<(usize, usize)> {
    let dx = f.spacing();
    let slack = 1e-9 * dx;
    let lo = ((iv.left() - f.origin() - slack) / dx).ceil().max(0.0) as usize;
    let hi_f = ((iv.right() - f.origin() + slack) / dx).floor();
    if hi_f < 0.0 || lo >= f.len() {
        return Err(VcError::Input(format!(
            "interval [{}, {}] contains no grid sample",
            iv.left(),
            iv.right()
        )));
    }
    let hi = (hi_f as usize).min(f.len() - 1);
    if lo > hi {
        return Err(VcError::Input(format!(
            "interval [{}, {}] contains no grid sample",
            iv.left(),
            iv.right()
        )));
    }
    Ok((lo, hi))
}

/// Candidate lengths `2^k * spacing` up to the window length.
fn dyadic_lengths(n: usize) -> impl Iterator<Item = usize> {
    let max_steps = n - 1;
    (0..)
        .map(|k| 1usize << k)
        .take_while(move |&steps| steps <= max_steps)
}

/// `sup ( |I|^{-1} integral_I |f|^p )^{1/p}` over intervals of dyadic length
/// `2^k * spacing` with endpoints on the grid containing `x`. The family is a
/// 2-approximation of the continuum maximal operator.
pub fn maximal_function(f: &SampledSignal, p: f64, x: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(VcError::Config(format!("maximal exponent must be positive, got {p}")));
    }
    let n = f.len();
    let dx = f.spacing();
    let prefix = power_prefix(f, p);
    let mut best = 0.0_f64;
    for steps in dyadic_lengths(n) {
        let len = steps as f64 * dx;
        let j_min = ((x - len - f.origin()) / dx).ceil().max(0.0) as usize;
        let j_max_f = ((x - f.origin()) / dx).floor();
        if j_max_f < 0.0 {
            continue;
        }
        let j_max = (j_max_f as usize).min(n - 1 - steps.min(n - 1));
        for j in j_min..=j_max {
            if j + steps > n - 1 {
                break;
            }
            let avg = (prefix[j + steps] - prefix[j]) / len;
            best = best.max(avg);
        }
    }
    if best == 0.0 {
        // x outside the reach of every candidate interval.
        return Err(VcError::Input(format!("point {x} not covered by the interval family")));
    }
    Ok(best.powf(1.0 / p))
}

/// Trapezoid prefix integrals of `|f|^p`: `prefix[k]` is the integral from
/// the window origin to `x_k`.
fn power_prefix(f: &SampledSignal, p: f64) -> Vec<f64> {
    let dx = f.spacing();
    let mut prefix = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    prefix.push(0.0);
    for k in 0..f.len() - 1 {
        let a = f.samples()[k].norm().powf(p);
        let b = f.samples()[k + 1].norm().powf(p);
        acc += dx * 0.5 * (a + b);
        prefix.push(acc);
    }
    prefix
}

/// Maximal function evaluated at every grid sample in `O(n log n)` using a
/// sliding-window maximum per dyadic length.
pub fn maximal_field(f: &SampledSignal, p: f64) -> Result<Vec<f64>> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(VcError::Config(format!("maximal exponent must be positive, got {p}")));
    }
    let n = f.len();
    let dx = f.spacing();
    let prefix = power_prefix(f, p);
    let mut best = vec![0.0_f64; n];
    for steps in dyadic_lengths(n) {
        let len = steps as f64 * dx;
        // avg[j] for interval starting at sample j.
        let m = n - steps;
        // Monotonic deque over interval start indices; sample k sees starts
        // j in [k - steps, k].
        let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
        for k in 0..n {
            if k < m {
                let val = prefix[k + steps] - prefix[k];
                while let Some(&back) = deque.back() {
                    if prefix[back + steps] - prefix[back] <= val {
                        deque.pop_back();
                    } else {
                        break;
                    }
                }
                deque.push_back(k);
            }
            while let Some(&front) = deque.front() {
                if front + steps < k {
                    deque.pop_front();
                } else {
                    break;
                }
            }
            if let Some(&front) = deque.front() {
                if front <= k {
                    best[k] = best[k].max((prefix[front + steps] - prefix[front]) / len);
                }
            }
        }
    }
    Ok(best.into_iter().map(|v| v.powf(1.0 / p)).collect())
}

/// Open level set `{ M_p f > threshold }` as exact sample runs, clipped to
/// the samples of `clip`.
pub fn maximal_level_set(f: &SampledSignal, p: f64, threshold: f64, clip: &Interval) -> Result<GridSet> {
    let field = maximal_field(f, p)?;
    let n = f.len();
    let level = GridSet::from_pred(n, |k| field[k] > threshold);
    let clip_set = GridSet::from_pred(n, |k| clip.contains(f.x(k)));
    Ok(level.intersect(&clip_set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex64;

    fn indicator_01(n: usize, dx: f64, origin: f64) -> SampledSignal {
        SampledSignal::from_fn(origin, dx, n, |x| {
            if (0.0..=1.0).contains(&x) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        })
        .unwrap()
    }

    #[test]
    fn constant_signal_average_is_exact() {
        let f = SampledSignal::from_fn(0.0, 0.125, 33, |_| Complex64::new(-2.5, 0.0)).unwrap();
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            let avg = local_average(&f, &Interval::from_endpoints(0.5, 3.0), p).unwrap();
            assert!((avg - 2.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn indicator_average_is_mass_fraction() {
        let dx = 1.0 / 128.0;
        let f = indicator_01(513, dx, -1.0);
        let avg = local_average(&f, &Interval::from_endpoints(0.0, 2.0), 1.0).unwrap();
        assert!((avg - 0.5).abs() <= dx, "avg={avg}");
    }

    #[test]
    fn average_is_monotone_in_exponent() {
        let f = SampledSignal::from_fn(0.0, 0.01, 256, |x| Complex64::new((3.0 * x).sin() + 1.2, 0.4 * x)).unwrap();
        let iv = Interval::from_endpoints(0.3, 2.2);
        let mut prev = 0.0;
        for &p in &[1.0, 1.3, 2.0, 2.5, 4.0] {
            let avg = local_average(&f, &iv, p).unwrap();
            assert!(avg + 1e-12 >= prev, "p={p}: {avg} < {prev}");
            prev = avg;
        }
    }

    #[test]
    fn degenerate_intervals() {
        let f = indicator_01(65, 1.0 / 32.0, 0.0);
        // One sample inside: point value.
        let one = local_average(&f, &Interval::new(0.5, 0.01), 2.0).unwrap();
        assert_eq!(one, 1.0);
        // No samples inside.
        assert!(local_average(&f, &Interval::new(0.515, 0.005), 1.0).is_err());
        assert!(local_average(&f, &Interval::new(0.5, 0.1), -1.0).is_err());
    }

    #[test]
    fn maximal_of_indicator_decays_with_distance() {
        let dx = 1.0 / 64.0;
        let f = indicator_01(64 * 8 + 1, dx, -2.0);
        let at2 = maximal_function(&f, 1.0, 2.0).unwrap();
        assert!((at2 - 0.5).abs() <= 3.0 * dx, "at2={at2}");
        let at4 = maximal_function(&f, 1.0, 4.0).unwrap();
        assert!((at4 - 0.25).abs() <= 3.0 * dx, "at4={at4}");
    }

    #[test]
    fn maximal_dominates_pointwise_values_of_smooth_signals() {
        let dx = 1.0 / 128.0;
        let f = SampledSignal::from_fn(0.0, dx, 513, |x| {
            Complex64::new((-((x - 2.0) / 0.6).powi(2)).exp(), 0.0)
        })
        .unwrap();
        let field = maximal_field(&f, 1.5).unwrap();
        for k in (0..f.len()).step_by(13) {
            let fv = f.samples()[k].norm();
            assert!(field[k] >= fv * (1.0 - 10.0 * dx), "k={k}: {} < {}", field[k], fv);
        }
    }

    #[test]
    fn maximal_field_matches_pointwise_evaluation() {
        let dx = 1.0 / 32.0;
        let f = SampledSignal::from_fn(0.0, dx, 129, |x| Complex64::new((5.0 * x).cos() + 1.5, 0.0)).unwrap();
        let field = maximal_field(&f, 1.0).unwrap();
        for k in (0..f.len()).step_by(7) {
            let single = maximal_function(&f, 1.0, f.x(k)).unwrap();
            assert!((field[k] - single).abs() <= 1e-12 * (1.0 + single), "k={k}");
        }
    }

    #[test]
    fn level_set_clusters_around_a_spike() {
        let dx = 1.0 / 512.0;
        let n = 4096;
        let mut f = SampledSignal::from_fn(0.0, dx, n, |_| Complex64::new(0.01, 0.0)).unwrap();
        let mid = n / 2;
        f.samples_mut()[mid] = Complex64::new(30.0, 0.0);
        let window = f.window();
        let base = local_average(&f, &window, 1.5).unwrap();
        let set = maximal_level_set(&f, 1.5, 24.0 * base, &window).unwrap();
        assert!(!set.is_empty());
        // Every selected sample is near the spike.
        for k in set.iter_samples() {
            assert!((k as isize - mid as isize).unsigned_abs() < n / 8, "far sample {k}");
        }
        // Oracle: direct per-sample comparison against the pointwise operator.
        for k in (mid - 20..mid + 20).step_by(3) {
            let direct = maximal_function(&f, 1.5, f.x(k)).unwrap();
            assert_eq!(set.contains(k), direct > 24.0 * base, "k={k}");
        }
    }
}
