//! Signal CSV parsing and the CSV/JSON shapes every command emits.
//!
//! Signal files are `x,re,im` rows (the imaginary column may be omitted),
//! with `#` comments and an optional header line; samples must lie on a
//! uniform grid. All floats are written in shortest round-trip form, so a
//! fixed seed reproduces output files byte for byte.

use std::fs;
use std::path::Path;

use varcarleson::Complex64;
use serde::{Deserialize, Serialize};
use varcarleson::error::{Result, VcError};
use varcarleson::gridset::GridSet;
use varcarleson::signal::{Interval, SampledSignal};
use varcarleson::sparse::{IterationTrace, SparseCollection};
use varcarleson::tiles::{TileField, TileGrid};
use varcarleson::varcar::CarlesonPoint;



/// Reads a sampled signal from CSV, inferring the grid from the x column.
pub fn read_signal(path: &Path) -> Result<SampledSignal> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| VcError::Input(format!("{}: {e}", path.display())))?;
    let mut xs: Vec<f64> = Vec::new();
    let mut values: Vec<Complex64> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| VcError::Input(format!("{}: {e}", path.display())))?;
        let fields: Vec<&str> = record.iter().collect();
        if fields.is_empty() || (fields.len() == 1 && fields[0].is_empty()) {
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(VcError::Input(format!(
                "{}: row {} has {} fields, expected x,re[,im]",
                path.display(),
                line + 1,
                fields.len()
            )));
        }
        let parsed: Option<Vec<f64>> = fields.iter().map(|s| s.parse::<f64>().ok()).collect();
        match parsed {
            Some(nums) => {
                xs.push(nums[0]);
                values.push(Complex64::new(nums[1], nums.get(2).copied().unwrap_or(0.0)));
            }
            // A single non-numeric row at the top is a header.
            None if xs.is_empty() && line == 0 => continue,
            None => {
                return Err(VcError::Input(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    line + 1
                )));
            }
        }
    }
    if xs.len() < 2 {
        return Err(VcError::Input(format!("{}: need at least two samples", path.display())));
    }
    let origin = xs[0];
    let spacing = (xs[xs.len() - 1] - origin) / (xs.len() - 1) as f64;
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(VcError::Input(format!("{}: x column must be increasing", path.display())));
    }
    for (k, &x) in xs.iter().enumerate() {
        let expect = origin + k as f64 * spacing;
        if (x - expect).abs() > 1e-9 * spacing.max(x.abs()) {
            return Err(VcError::Input(format!(
                "{}: x column is not a uniform grid (row {}: {} vs {})",
                path.display(),
                k + 1,
                x,
                expect
            )));
        }
    }
    SampledSignal::new(origin, spacing, values)
}

pub fn write_signal(path: &Path, f: &SampledSignal) -> Result<()> {
    let mut out = String::from("x,re,im\n");
    for k in 0..f.len() {
        let z = f.samples()[k];
        out.push_str(&format!("{},{},{}\n", f.x(k), z.re, z.im));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the variation search output as `x,value` rows.
pub fn write_carleson_csv(path: &Path, f: &SampledSignal, points: &[CarlesonPoint]) -> Result<()> {
    let mut out = String::from("x,value\n");
    for (k, pt) in points.iter().enumerate() {
        out.push_str(&format!("{},{}\n", f.x(k), pt.value));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Dumps a tile field as `t,eta,u,re,im` rows, ordered by scale, then
/// frequency, then position.
pub fn write_field_csv(path: &Path, grid: &TileGrid, field: &TileField) -> Result<()> {
    let mut out = String::from("t,eta,u,re,im\n");
    for (s, row) in grid.rows.iter().enumerate() {
        for i_eta in 0..row.n_eta {
            for i_u in 0..grid.n_u {
                let z = field.at(s, i_eta, i_u);
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.t,
                    row.eta_at(i_eta),
                    grid.u_at(i_u),
                    z.re,
                    z.im
                ));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntervalJson {
    pub center: f64,
    pub length: f64,
}

impl From<&Interval> for IntervalJson {
    fn from(iv: &Interval) -> Self {
        Self { center: iv.center, length: iv.length }
    }
}

impl IntervalJson {
    pub fn interval(&self) -> Interval {
        Interval::new(self.center, self.length)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceJson {
    pub generations: usize,
    pub packing_ratios: Vec<f64>,
    pub epsilon: f64,
}

/// On-disk form of a sparse collection: dilated node intervals, witness
/// sets as unions of grid-aligned intervals, and the sample grid they
/// refer to, so the collection can be rebuilt and re-certified exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseJson {
    pub intervals: Vec<IntervalJson>,
    pub witnesses: Vec<Vec<IntervalJson>>,
    pub eta: f64,
    pub origin: f64,
    pub spacing: f64,
    pub trace: TraceJson,
}

pub fn sparse_to_json(coll: &SparseCollection, trace: &IterationTrace) -> SparseJson {
    SparseJson {
        intervals: coll.intervals.iter().map(IntervalJson::from).collect(),
        witnesses: coll
            .witness_intervals()
            .iter()
            .map(|w| w.iter().map(IntervalJson::from).collect())
            .collect(),
        eta: coll.eta,
        origin: coll.origin,
        spacing: coll.spacing,
        trace: TraceJson {
            generations: trace.levels.len(),
            packing_ratios: trace.nodes.iter().map(|n| n.packing_ratio).collect(),
            epsilon: trace.epsilon,
        },
    }
}

/// Rebuilds the collection over the grid of `f`. Witness intervals sit half
/// a spacing away from the nearest excluded sample, so a quarter-spacing
/// margin recovers the stored sample sets exactly.
pub fn sparse_from_json(sj: &SparseJson, f: &SampledSignal) -> Result<SparseCollection> {
    if (sj.origin - f.origin()).abs() > 1e-9 * f.spacing()
        || (sj.spacing - f.spacing()).abs() > 1e-12 * f.spacing()
    {
        return Err(VcError::Input(format!(
            "collection grid (origin {}, spacing {}) does not match the signal grid (origin {}, spacing {})",
            sj.origin,
            sj.spacing,
            f.origin(),
            f.spacing()
        )));
    }
    let n = f.len();
    let margin = 0.25 * sj.spacing;
    let witnesses: Vec<GridSet> = sj
        .witnesses
        .iter()
        .map(|list| {
            let ivs: Vec<Interval> = list.iter().map(IntervalJson::interval).collect();
            GridSet::from_pred(n, |k| {
                let x = f.x(k);
                ivs.iter().any(|iv| (x - iv.center).abs() <= 0.5 * iv.length + margin)
            })
        })
        .collect();
    Ok(SparseCollection {
        intervals: sj.intervals.iter().map(IntervalJson::interval).collect(),
        witnesses,
        eta: sj.eta,
        origin: sj.origin,
        spacing: sj.spacing,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| VcError::Assertion(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| VcError::Input(format!("{}: {e}", path.display())))
}
