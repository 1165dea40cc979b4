//! Stopping-time decomposition of the variational pairing into a sparse
//! collection of intervals with certified witnesses.
//!
//! The construction walks a tree of intervals. At a node `Q` it removes an
//! exceptional set where maximal averages or restricted embedding norms
//! spike, keeps the complement of the removed set as the node's witness,
//! and recurses into the components of the removed set. The removal budget
//! is tightened until the children cover at most [`PACKING_FRACTION`] of
//! the parent, so witnesses stay fat and the recursion dies off quickly.
//! Every certificate (packing, nesting, witness disjointness and measure)
//! is checked by exact arithmetic on the sample grid.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::average::{local_average, maximal_field, maximal_level_set};
use crate::embed::{embed_a, embed_f};
use crate::error::{Result, VcError};
use crate::fourier::FrequencyGrid;
use crate::gridset::GridSet;
use crate::outer::{candidate_tents, outer_lp_norm, tent_size, SizeKind, TentGeometry, TileRegion};
use crate::packet::PacketKit;
use crate::signal::{Interval, SampledSignal};
use crate::tiles::{TileField, TileGrid};
use crate::varcar::{dual_pairing, LinearizationData};

/// Fraction of a node's length that the union of its children may cover.
pub const PACKING_FRACTION: f64 = 1.0 / 4096.0;

/// Everything the embedding side of the construction needs: the packet
/// family, the lattice it is sampled on, the tent geometry over that
/// lattice, and the per-sample partition data defining the second
/// embedding.
pub struct EmbedContext<'a> {
    pub kit: &'a PacketKit,
    pub grid: &'a TileGrid,
    pub geom: &'a TentGeometry,
    pub lin: &'a LinearizationData,
}

/// Tunable constants of the construction.
#[derive(Debug, Clone, Serialize)]
pub struct SparseParams {
    /// Averaging exponent for the first signal (the second always uses 1).
    pub p: f64,
    /// Outer-norm exponent paired with the energy size.
    pub sigma: f64,
    /// Outer-norm exponent paired with the mass size.
    pub tau: f64,
    /// Configured constant for the energy embedding bound. An infinite
    /// value makes the bound vacuous and skips the norm computation.
    pub k_energy: f64,
    /// Configured constant for the mass embedding bound; same convention.
    pub k_mass: f64,
    /// Initial removal budget as a fraction of the node length.
    pub c0: f64,
    /// How often the budget may be halved before the packing bound is
    /// declared unattainable.
    pub max_halvings: usize,
}

impl Default for SparseParams {
    fn default() -> Self {
        Self {
            p: 1.5,
            sigma: 2.0,
            tau: 2.0,
            k_energy: 4.0,
            k_mass: 4.0,
            c0: 0.5,
            max_halvings: 40,
        }
    }
}

impl SparseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(VcError::Config(format!("averaging exponent must exceed 1, got {}", self.p)));
        }
        for (name, v) in [("sigma", self.sigma), ("tau", self.tau)] {
            if !(v > 1.0) || !v.is_finite() {
                return Err(VcError::Config(format!("outer exponent {name} must exceed 1, got {v}")));
            }
        }
        for (name, v) in [("k_energy", self.k_energy), ("k_mass", self.k_mass)] {
            if !(v > 0.0) {
                return Err(VcError::Config(format!("embedding constant {name} must be positive, got {v}")));
            }
        }
        if !(self.c0 > 0.0 && self.c0 < 1.0) {
            return Err(VcError::Config(format!("initial budget must lie in (0, 1), got {}", self.c0)));
        }
        Ok(())
    }
}

/// `sum over region cells of |F| |A| du dt deta`: the nonnegative cost of a
/// lattice region. Monotone under region inclusion and subadditive under
/// unions, which is what the node decomposition inequality rests on.
pub fn region_pairing(
    f_field: &TileField,
    a_field: &TileField,
    grid: &TileGrid,
    region: &TileRegion,
) -> f64 {
    let mut acc = 0.0;
    for s in 0..grid.rows.len() {
        let w = grid.cell_weight(s);
        let mut run = 0.0;
        for ((zf, za), &keep) in
            f_field.rows[s].iter().zip(a_field.rows[s].iter()).zip(region.rows[s].iter())
        {
            if keep {
                run += zf.norm() * za.norm();
            }
        }
        acc += run * w;
    }
    acc
}

fn field_sup(field: &TileField) -> f64 {
    field.rows.iter().flat_map(|r| r.iter()).map(|z| z.norm_sqr()).fold(0.0f64, f64::max).sqrt()
}

/// Pointwise product of `f` with the indicator of the complement of `iv`.
pub fn restrict_outside(f: &SampledSignal, iv: &Interval) -> SampledSignal {
    let mut out = f.clone();
    for k in 0..out.len() {
        if iv.contains(out.x(k)) {
            out.samples_mut()[k] = Complex64::default();
        }
    }
    out
}

fn samples_inside(f: &SampledSignal, iv: &Interval) -> GridSet {
    GridSet::from_pred(f.len(), |k| iv.contains(f.x(k)))
}

/// Outcome of one greedy excision run on a restricted embedding.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingExcision {
    /// Intervals whose spatial tents were removed from the field's domain.
    pub intervals: Vec<Interval>,
    /// Outer norm of the field restricted to the surviving region. `NaN`
    /// when the configured constant is infinite and the norm was skipped.
    pub norm: f64,
    /// `configured constant * |Q|^(1/exponent) * average`.
    pub bound: f64,
    /// The constant the final norm actually attains, `norm / (|Q|^(1/exp)
    /// * average)`; zero when the average vanishes.
    pub achieved_k: f64,
    /// Whether the configured bound held after the affordable removals.
    pub pass: bool,
}

impl EmbeddingExcision {
    fn vacuous() -> Self {
        Self {
            intervals: Vec::new(),
            norm: f64::NAN,
            bound: f64::INFINITY,
            achieved_k: 0.0,
            pass: true,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.length).fold(0.0, |a, b| a + b)
    }
}

/// Greedy excision on a precomputed field: while the restricted outer norm
/// exceeds the bound, remove the spatial tent of the affordable candidate
/// interval carrying the largest size, then re-measure. Stops when the
/// bound holds or no candidate fits the remaining budget; the latter is a
/// soft failure reported through `pass` and `achieved_k`.
fn excise_field(
    field: &TileField,
    q: &Interval,
    kind: SizeKind,
    exponent: f64,
    average: f64,
    k_conf: f64,
    budget: f64,
    ctx: &EmbedContext,
) -> Result<EmbeddingExcision> {
    let grid = ctx.grid;
    let geom = ctx.geom;
    let base = q.length.powf(1.0 / exponent) * average;
    let bound = k_conf * base;
    let mut kept = TileRegion::spatial_tent(grid, q);
    let masked0 = kept.mask_field(field);
    if field_sup(&masked0) <= 0.0 {
        return Ok(EmbeddingExcision { intervals: Vec::new(), norm: 0.0, bound, achieved_k: 0.0, pass: true });
    }
    // The family only needs to cover the field's support inside the node's
    // spatial tent; excision can only shrink that support.
    let support = TileRegion::support_of(&masked0, grid, 1e-13);
    let family = candidate_tents(grid, geom, Some(&support));
    let mut removed: Vec<Interval> = Vec::new();
    let mut spent = 0.0;
    let slack = 1e-12 * q.length.max(1.0);
    let norm;
    let pass;
    loop {
        let masked = kept.mask_field(field);
        let current = outer_lp_norm(&masked, grid, geom, &family, kind, exponent)?;
        if current <= bound * (1.0 + 1e-9) {
            norm = current;
            pass = true;
            break;
        }
        let mut best: Option<(f64, usize)> = None;
        for (idx, tent) in family.iter().enumerate() {
            if tent.interval.length > budget - spent + slack {
                continue;
            }
            let s = tent_size(kind, &masked, grid, tent, geom, None);
            if s <= 0.0 {
                continue;
            }
            if best.map_or(true, |(bs, _)| s > bs * (1.0 + 1e-12)) {
                best = Some((s, idx));
            }
        }
        let Some((_, idx)) = best else {
            norm = current;
            pass = false;
            break;
        };
        let iv = family[idx].interval;
        removed.push(iv);
        spent += iv.length;
        kept.subtract(&TileRegion::spatial_tent(grid, &iv));
    }
    let achieved = if base > 0.0 { norm / base } else { 0.0 };
    Ok(EmbeddingExcision { intervals: removed, norm, bound, achieved_k: achieved, pass })
}

/// Open set `W` with `|W| <= c |Q|` such that the embedding of `h` cut to
/// the node's spatial tent minus the tents over `W` obeys the configured
/// outer-norm bound, when the removal budget allows it. `kind` selects the
/// embedding (energy: packet transform of `h`, averaged with exponent `p`;
/// mass: truncation field of `h`, averaged with exponent 1) together with
/// its size, exponent, and constant.
pub fn embedding_exceptional_set(
    h: &SampledSignal,
    q: &Interval,
    kind: SizeKind,
    c: f64,
    ctx: &EmbedContext,
    params: &SparseParams,
) -> Result<EmbeddingExcision> {
    params.validate()?;
    if !(c > 0.0 && c < 1.0) {
        return Err(VcError::Config(format!("removal budget must lie in (0, 1), got {c}")));
    }
    let q3 = q.dilate(3.0);
    let h3 = h.restrict(&q3);
    let (exponent, k_conf, avg_p) = match kind {
        SizeKind::Energy => (params.sigma, params.k_energy, params.p),
        SizeKind::Mass => (params.tau, params.k_mass, 1.0),
    };
    if !k_conf.is_finite() {
        return Ok(EmbeddingExcision::vacuous());
    }
    let average = local_average(&h3, &q3, avg_p)?;
    let field = match kind {
        SizeKind::Energy => embed_f(&h3, ctx.kit, ctx.grid)?,
        SizeKind::Mass => embed_a(&h3, ctx.lin, ctx.kit, ctx.grid)?,
    };
    excise_field(&field, q, kind, exponent, average, k_conf, c * q.length, ctx)
}

/// The removed set of one node: disjoint components inside the parent,
/// with the accepted budget and the embedding excision reports.
#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalSet {
    pub intervals: Vec<Interval>,
    pub parent: Interval,
    /// Accepted value of the removal budget after halving.
    pub budget: f64,
    pub energy: EmbeddingExcision,
    pub mass: EmbeddingExcision,
}

impl ExceptionalSet {
    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.length).fold(0.0, |a, b| a + b)
    }

    /// Samples of `f`'s grid lying in some component.
    pub fn grid_set(&self, f: &SampledSignal) -> GridSet {
        let mut set = GridSet::empty();
        for iv in &self.intervals {
            set = set.union(&samples_inside(f, iv));
        }
        set
    }
}

/// Where inside `Q` either signal's dyadic maximal average exceeds
/// `average / c`, or an embedding excision removed an interval. The budget
/// `c` starts at `params.c0` and is halved until the components cover at
/// most [`PACKING_FRACTION`] of `Q`; the total is measured by exact grid
/// arithmetic. Fails after `max_halvings` unsuccessful halvings.
pub fn exceptional_set(
    f: &SampledSignal,
    g: &SampledSignal,
    q: &Interval,
    ctx: &EmbedContext,
    params: &SparseParams,
) -> Result<ExceptionalSet> {
    params.validate()?;
    if !f.same_grid(g) {
        return Err(VcError::Config("exceptional set needs f and g on the same grid".into()));
    }
    let q3 = q.dilate(3.0);
    let f3 = f.restrict(&q3);
    let g3 = g.restrict(&q3);
    let avg_f = local_average(&f3, &q3, params.p)?;
    let avg_g = local_average(&g3, &q3, 1.0)?;
    // The embeddings do not depend on the budget; build them only if a
    // finite constant forces a norm check.
    let mut field_f: Option<TileField> = None;
    let mut field_a: Option<TileField> = None;
    let clip_q = samples_inside(f, q);
    let cap = PACKING_FRACTION * q.length * (1.0 + 1e-12);
    let dx = f.spacing();
    let mut c = params.c0;
    let mut cache: Option<(EmbeddingExcision, EmbeddingExcision)> = None;
    for _ in 0..=params.max_halvings {
        // A smaller budget cannot change an excision that removed nothing.
        let redo = cache
            .as_ref()
            .map_or(true, |(e, m)| !(e.intervals.is_empty() && m.intervals.is_empty()));
        if redo {
            let energy = if params.k_energy.is_finite() {
                if field_f.is_none() {
                    field_f = Some(embed_f(&f3, ctx.kit, ctx.grid)?);
                }
                excise_field(
                    field_f.as_ref().unwrap(),
                    q,
                    SizeKind::Energy,
                    params.sigma,
                    avg_f,
                    params.k_energy,
                    c * q.length,
                    ctx,
                )?
            } else {
                EmbeddingExcision::vacuous()
            };
            let mass = if params.k_mass.is_finite() {
                if field_a.is_none() {
                    field_a = Some(embed_a(&g3, ctx.lin, ctx.kit, ctx.grid)?);
                }
                excise_field(
                    field_a.as_ref().unwrap(),
                    q,
                    SizeKind::Mass,
                    params.tau,
                    avg_g,
                    params.k_mass,
                    c * q.length,
                    ctx,
                )?
            } else {
                EmbeddingExcision::vacuous()
            };
            cache = Some((energy, mass));
        }
        let (energy, mass) = cache.clone().unwrap();
        let threshold_f = if avg_f > 0.0 { avg_f / c } else { f64::INFINITY };
        let threshold_g = if avg_g > 0.0 { avg_g / c } else { f64::INFINITY };
        let mut set = maximal_level_set(&f3, params.p, threshold_f, q)?
            .union(&maximal_level_set(&g3, 1.0, threshold_g, q)?);
        for iv in energy.intervals.iter().chain(mass.intervals.iter()) {
            set = set.union(&samples_inside(f, iv));
        }
        set = set.intersect(&clip_q);
        if set.measure(dx) <= cap {
            return Ok(ExceptionalSet {
                intervals: set.to_intervals(f.origin(), dx),
                parent: *q,
                budget: c,
                energy,
                mass,
            });
        }
        c *= 0.5;
    }
    Err(VcError::Assertion(format!(
        "removed set stayed above the packing cap {:.3e} after {} budget halvings",
        cap, params.max_halvings
    )))
}

/// Whether every component `I` is reached from outside the removed set:
/// the smallest maximal-average value of `h` on `3I` stays below the
/// accepted threshold `average / budget`.
pub fn stopping_bound_check(
    h: &SampledSignal,
    exc: &ExceptionalSet,
    p: f64,
) -> Result<bool> {
    let q3 = exc.parent.dilate(3.0);
    let h3 = h.restrict(&q3);
    let avg = local_average(&h3, &q3, p)?;
    let field = maximal_field(&h3, p)?;
    let cap = (avg / exc.budget) * (1.0 + 1e-9);
    for iv in &exc.intervals {
        let i3 = iv.dilate(3.0);
        let inf = (0..h.len())
            .filter(|&k| i3.contains(h.x(k)))
            .map(|k| field[k])
            .fold(f64::INFINITY, f64::min);
        if inf > cap {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One node of the recursion: its removed set, the pairing cost carried by
/// the node itself, and the numerical check that the whole-node cost is
/// dominated by the local term plus the children's terms.
#[derive(Debug, Clone)]
pub struct PrincipalNode {
    pub exceptional: ExceptionalSet,
    pub children: Vec<Interval>,
    /// Pairing cost over the node's spatial tent minus the children's tents.
    pub local_term: f64,
    /// Pairing cost over the whole spatial tent of the node.
    pub whole_term: f64,
    /// Local term plus all per-child terms (restricted and cross terms).
    pub parts_term: f64,
    pub decomposition_ok: bool,
}

/// Runs [`exceptional_set`] on the node, then splits the node's pairing
/// cost into the part kept by the node and the parts handed to its
/// children, verifying numerically that nothing is lost: the cost over the
/// full tent is at most the local term plus, for each child `I`, the four
/// terms obtained by restricting each signal to `3I` or its complement in
/// `3Q` and pairing over the child's tent.
pub fn principal_iteration(
    f: &SampledSignal,
    g: &SampledSignal,
    q: &Interval,
    ctx: &EmbedContext,
    params: &SparseParams,
) -> Result<PrincipalNode> {
    let exceptional = exceptional_set(f, g, q, ctx, params)?;
    let q3 = q.dilate(3.0);
    let f3 = f.restrict(&q3);
    let g3 = g.restrict(&q3);
    let field_f = embed_f(&f3, ctx.kit, ctx.grid)?;
    let field_a = embed_a(&g3, ctx.lin, ctx.kit, ctx.grid)?;
    let tent_q = TileRegion::spatial_tent(ctx.grid, q);
    let tent_e = TileRegion::tent_over_open_set(ctx.grid, &exceptional.intervals);
    let mut local_region = tent_q.clone();
    local_region.subtract(&tent_e);
    let local_term = region_pairing(&field_f, &field_a, ctx.grid, &local_region);
    let whole_term = region_pairing(&field_f, &field_a, ctx.grid, &tent_q);
    let mut parts_term = local_term;
    for child in &exceptional.intervals {
        let c3 = child.dilate(3.0);
        let f_in = f3.restrict(&c3);
        let f_out = restrict_outside(&f3, &c3);
        let g_in = g3.restrict(&c3);
        let g_out = restrict_outside(&g3, &c3);
        let ff_in = embed_f(&f_in, ctx.kit, ctx.grid)?;
        let ff_out = embed_f(&f_out, ctx.kit, ctx.grid)?;
        let aa_in = embed_a(&g_in, ctx.lin, ctx.kit, ctx.grid)?;
        let aa_out = embed_a(&g_out, ctx.lin, ctx.kit, ctx.grid)?;
        let tent_i = TileRegion::spatial_tent(ctx.grid, child);
        parts_term += region_pairing(&ff_in, &aa_in, ctx.grid, &tent_i)
            + region_pairing(&ff_in, &aa_out, ctx.grid, &tent_i)
            + region_pairing(&ff_out, &aa_in, ctx.grid, &tent_i)
            + region_pairing(&ff_out, &aa_out, ctx.grid, &tent_i);
    }
    let decomposition_ok = whole_term <= parts_term * (1.0 + 1e-9) + 1e-12;
    Ok(PrincipalNode {
        children: exceptional.intervals.clone(),
        exceptional,
        local_term,
        whole_term,
        parts_term,
        decomposition_ok,
    })
}

/// Per-level summary of the box-restricted embedding norms over the dyadic
/// subintervals of one interval.
#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub level: usize,
    pub boxes: usize,
    /// Total length of the level's subintervals; equals the interval length.
    pub length_sum: f64,
    /// Sum over boxes of the energy-side outer norm of the inside signal.
    pub energy: f64,
    /// Sum over boxes of the mass-side outer norm of the outside signal.
    pub mass: f64,
    /// Sum over boxes of the per-box product of the two norms.
    pub cross: f64,
    /// `cross <= cross(level 0) * 2^(-20 level)` within slack.
    pub within_geometric_bound: bool,
}

fn boxed_norm(
    field: &TileField,
    region: &TileRegion,
    kind: SizeKind,
    exponent: f64,
    ctx: &EmbedContext,
) -> Result<f64> {
    let masked = region.mask_field(field);
    if field_sup(&masked) <= 0.0 {
        return Ok(0.0);
    }
    let support = TileRegion::support_of(&masked, ctx.grid, 1e-13);
    let family = candidate_tents(ctx.grid, ctx.geom, Some(&support));
    outer_lp_norm(&masked, ctx.grid, ctx.geom, &family, kind, exponent)
}

/// For each level `k <= max_k`, splits `i` into `2^k` equal subintervals
/// `P`, restricts the embeddings of `f` cut to `3I` and of `g` cut to `3Q`
/// minus `3I` to the box of `P` (the cells over `P` in the scale band
/// `[|P|/2, |P|)`), and reports the summed outer norms. The second field
/// vanishes on every box because its generating signal vanishes on `3I`,
/// so the per-level cross terms must decay at least like `2^(-20 k)`.
pub fn tail_decay_check(
    f: &SampledSignal,
    g: &SampledSignal,
    q: &Interval,
    i: &Interval,
    max_k: usize,
    ctx: &EmbedContext,
    params: &SparseParams,
) -> Result<Vec<TailRow>> {
    params.validate()?;
    if max_k > 20 {
        return Err(VcError::Config(format!("level count {max_k} is unreasonably deep")));
    }
    let i3 = i.dilate(3.0);
    let f_in = f.restrict(&i3);
    let g_out = restrict_outside(&g.restrict(&q.dilate(3.0)), &i3);
    let field_f = embed_f(&f_in, ctx.kit, ctx.grid)?;
    let field_a = embed_a(&g_out, ctx.lin, ctx.kit, ctx.grid)?;
    let mut rows = Vec::with_capacity(max_k + 1);
    let mut cross0 = 0.0;
    for k in 0..=max_k {
        let boxes = 1usize << k;
        let len = i.length / boxes as f64;
        let mut energy = 0.0;
        let mut mass = 0.0;
        let mut cross = 0.0;
        let mut length_sum = 0.0;
        for j in 0..boxes {
            let p_iv = Interval::new(i.left() + (j as f64 + 0.5) * len, len);
            length_sum += p_iv.length;
            let region = TileRegion::carleson_box(ctx.grid, &p_iv);
            if region.is_empty() {
                continue;
            }
            let e = boxed_norm(&field_f, &region, SizeKind::Energy, params.sigma, ctx)?;
            let m = boxed_norm(&field_a, &region, SizeKind::Mass, params.tau, ctx)?;
            energy += e;
            mass += m;
            cross += e * m;
        }
        if k == 0 {
            cross0 = cross;
        }
        let bound = cross0 * 2.0f64.powi(-20 * k as i32);
        let within_geometric_bound = cross <= bound * (1.0 + 1e-9) + 1e-30;
        rows.push(TailRow { level: k, boxes, length_sum, energy, mass, cross, within_geometric_bound });
    }
    Ok(rows)
}

/// One point of a tail-decay sweep: the box-restricted energy norm of a
/// signal placed at distance `ratio * |P|` from the box interval, against
/// the reference norm of the same signal placed inside it.
#[derive(Debug, Clone, Serialize)]
pub struct TailDecayPoint {
    pub ratio: f64,
    pub norm: f64,
    pub reference: f64,
    /// `reference * (1 + ratio)^(-20)`.
    pub bound: f64,
    pub pass: bool,
}

/// Measures how fast the box-restricted energy norm decays as the signal
/// moves away from the box. `make(d)` must produce the test signal at
/// distance `d` from `p_iv` (with `make(0.0)` inside it, giving the
/// reference). Each point compares the measured norm with the power-law
/// bound `(1 + d/|P|)^(-20)` times the reference.
pub fn tail_distance_sweep(
    p_iv: &Interval,
    ratios: &[f64],
    mut make: impl FnMut(f64) -> Result<SampledSignal>,
    ctx: &EmbedContext,
    params: &SparseParams,
) -> Result<Vec<TailDecayPoint>> {
    params.validate()?;
    let region = TileRegion::carleson_box(ctx.grid, p_iv);
    if region.is_empty() {
        return Err(VcError::Config(format!(
            "the lattice has no cells over the box of [{}, {}]",
            p_iv.left(),
            p_iv.right()
        )));
    }
    let norm_of = |h: &SampledSignal| -> Result<f64> {
        let field = embed_f(h, ctx.kit, ctx.grid)?;
        boxed_norm(&field, &region, SizeKind::Energy, params.sigma, ctx)
    };
    let reference = norm_of(&make(0.0)?)?;
    ratios
        .iter()
        .map(|&ratio| {
            let norm = norm_of(&make(ratio * p_iv.length)?)?;
            let bound = reference * (1.0 + ratio).powi(-20);
            Ok(TailDecayPoint { ratio, norm, reference, bound, pass: norm <= bound * (1.0 + 1e-9) })
        })
        .collect()
}

/// Sparse collection: dilated node intervals with pairwise disjoint
/// witness sets, each witness carrying at least an `eta` fraction of its
/// interval.
#[derive(Debug, Clone, Serialize)]
pub struct SparseCollection {
    pub intervals: Vec<Interval>,
    /// Witness of each interval, as samples of the ambient signal grid.
    pub witnesses: Vec<GridSet>,
    pub eta: f64,
    pub origin: f64,
    pub spacing: f64,
}

impl SparseCollection {
    /// Witnesses as unions of grid-aligned intervals.
    pub fn witness_intervals(&self) -> Vec<Vec<Interval>> {
        self.witnesses.iter().map(|w| w.to_intervals(self.origin, self.spacing)).collect()
    }

    /// Re-checks every certificate from the stored data: witnesses sit
    /// inside their intervals, are pairwise disjoint, and carry at least
    /// the `eta` fraction of their interval's length.
    pub fn certify(&self) -> Result<()> {
        if self.intervals.len() != self.witnesses.len() {
            return Err(VcError::Assertion(format!(
                "{} intervals vs {} witnesses",
                self.intervals.len(),
                self.witnesses.len()
            )));
        }
        let slack = 1e-9 * self.spacing;
        let mut seen = GridSet::empty();
        for (iv, w) in self.intervals.iter().zip(&self.witnesses) {
            for k in w.iter_samples() {
                let x = self.origin + k as f64 * self.spacing;
                if x < iv.left() - slack || x > iv.right() + slack {
                    return Err(VcError::Assertion(format!(
                        "witness sample {x} escapes [{}, {}]",
                        iv.left(),
                        iv.right()
                    )));
                }
            }
            if !w.is_disjoint_from(&seen) {
                return Err(VcError::Assertion("witness sets overlap".into()));
            }
            seen = seen.union(w);
            let measure = w.measure(self.spacing);
            if measure < self.eta * iv.length * (1.0 - 1e-12) {
                return Err(VcError::Assertion(format!(
                    "witness measure {measure} below {} of length {}",
                    self.eta, iv.length
                )));
            }
        }
        Ok(())
    }
}

/// Per-node record of one recursion run.
#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord {
    pub interval: Interval,
    pub generation: usize,
    pub budget: f64,
    pub children: usize,
    pub children_length: f64,
    /// `children_length / (PACKING_FRACTION * |Q|)`; at most 1.
    pub packing_ratio: f64,
    pub local_term: f64,
    pub whole_term: f64,
    pub parts_term: f64,
    pub decomposition_ok: bool,
    /// Witness measure over the node length; at least `1 - PACKING_FRACTION`.
    pub witness_fraction: f64,
    pub energy_k: f64,
    pub mass_k: f64,
}

/// Full log of a recursion run: the node intervals per generation, the
/// scale cutoff, and one record per processed node.
#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    pub levels: Vec<Vec<Interval>>,
    pub epsilon: f64,
    pub nodes: Vec<NodeRecord>,
}

/// Runs the stopping-time recursion from the root `q0` and returns the
/// collection of dilated nodes with their witnesses, fully certified by
/// grid arithmetic: per-node packing, child nesting, witness disjointness,
/// and the witness measure bound, with `eta = (1 - PACKING_FRACTION) / 3`.
/// Recursion stops when a generation produces no children or when the next
/// generation's guaranteed length bound drops below `epsilon`.
pub fn build_sparse(
    f: &SampledSignal,
    g: &SampledSignal,
    q0: &Interval,
    epsilon: f64,
    ctx: &EmbedContext,
    params: &SparseParams,
) -> Result<(SparseCollection, IterationTrace)> {
    params.validate()?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(VcError::Config(format!("scale cutoff must be positive, got {epsilon}")));
    }
    if !f.same_grid(g) {
        return Err(VcError::Config("sparse recursion needs f and g on the same grid".into()));
    }
    if !(q0.length > 0.0) {
        return Err(VcError::Config("root interval must have positive length".into()));
    }
    let f0 = f.restrict(q0);
    let g0 = g.restrict(q0);
    let n = f.len();
    let dx = f.spacing();
    let cap = ((q0.length / epsilon).log2() / 12.0).ceil().max(0.0) as usize + 1;
    let mut levels: Vec<Vec<Interval>> = vec![vec![*q0]];
    let mut nodes: Vec<NodeRecord> = Vec::new();
    let mut intervals: Vec<Interval> = Vec::new();
    let mut witnesses: Vec<GridSet> = Vec::new();
    let mut witness_union = GridSet::empty();
    let mut generation = 0;
    loop {
        let current = levels[generation].clone();
        let results: Result<Vec<PrincipalNode>> = current
            .par_iter()
            .map(|qq| principal_iteration(&f0, &g0, qq, ctx, params))
            .collect();
        let results = results?;
        let mut next: Vec<Interval> = Vec::new();
        for (qq, node) in current.iter().zip(results) {
            let children_length = node.exceptional.total_length();
            let budget_cap = PACKING_FRACTION * qq.length;
            if children_length > budget_cap * (1.0 + 1e-12) {
                return Err(VcError::Assertion(format!(
                    "children cover {children_length:.6e} of a node allowing {budget_cap:.6e}"
                )));
            }
            for child in &node.children {
                if child.left() < qq.left() - 1e-9 * dx || child.right() > qq.right() + 1e-9 * dx {
                    return Err(VcError::Assertion(format!(
                        "child [{}, {}] escapes its parent [{}, {}]",
                        child.left(),
                        child.right(),
                        qq.left(),
                        qq.right()
                    )));
                }
            }
            let q_samples = samples_inside(f, qq);
            let child_samples = node.exceptional.grid_set(f);
            let witness = q_samples.minus(&child_samples, n);
            if !witness.is_disjoint_from(&witness_union) {
                return Err(VcError::Assertion("witness sets overlap across nodes".into()));
            }
            let witness_measure = witness.measure(dx);
            if witness_measure < (1.0 - PACKING_FRACTION) * qq.length * (1.0 - 1e-12) {
                return Err(VcError::Assertion(format!(
                    "witness measure {witness_measure:.6e} below the guaranteed fraction of {:.6e}",
                    qq.length
                )));
            }
            witness_union = witness_union.union(&witness);
            intervals.push(qq.dilate(3.0));
            witnesses.push(witness);
            nodes.push(NodeRecord {
                interval: *qq,
                generation,
                budget: node.exceptional.budget,
                children: node.children.len(),
                children_length,
                packing_ratio: children_length / budget_cap,
                local_term: node.local_term,
                whole_term: node.whole_term,
                parts_term: node.parts_term,
                decomposition_ok: node.decomposition_ok,
                witness_fraction: witness_measure / qq.length,
                energy_k: node.exceptional.energy.achieved_k,
                mass_k: node.exceptional.mass.achieved_k,
            });
            next.extend(node.children.iter().copied());
        }
        if next.is_empty() {
            break;
        }
        generation += 1;
        if generation > cap {
            return Err(VcError::Assertion(format!(
                "recursion exceeded the generation cap {cap}"
            )));
        }
        // Children of this generation are no longer than the scale cutoff
        // once the guaranteed bound drops below it; their tents are empty,
        // so the recursion would only produce zero terms.
        if PACKING_FRACTION.powi(generation as i32) * q0.length < epsilon {
            break;
        }
        levels.push(next);
    }
    let eta = (1.0 - PACKING_FRACTION) / 3.0;
    let collection =
        SparseCollection { intervals, witnesses, eta, origin: f.origin(), spacing: dx };
    collection.certify()?;
    let trace = IterationTrace { levels, epsilon, nodes };
    Ok((collection, trace))
}

/// End-to-end comparison of the variational pairing against the sparse
/// sum of length-weighted averages.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    /// `integral (variation search value of f) |g|`.
    pub lhs: f64,
    /// `sum over the collection of |I| <f>_{I,p} <g>_{I,1}`.
    pub rhs: f64,
    pub ratio: f64,
}

pub fn verify_domination(
    f: &SampledSignal,
    g: &SampledSignal,
    s: &SparseCollection,
    p: f64,
    r: f64,
    fgrid: &FrequencyGrid,
) -> Result<DominationReport> {
    let lhs = dual_pairing(f, g, fgrid, r)?;
    let mut rhs = 0.0;
    for iv in &s.intervals {
        rhs += iv.length * local_average(f, iv, p)? * local_average(g, iv, 1.0)?;
    }
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(DominationReport { lhs, rhs, ratio })
}
