//! One function per subcommand, all driven by a validated `RunConfig` and
//! writing their tables and reports under the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varcarleson::Complex64;
use serde::Serialize;

use varcarleson::embed::{embed_a, embed_f};
use varcarleson::error::{Result, VcError};
use varcarleson::packet::{multiplier_reconstruction, PacketKit};
use varcarleson::signal::SampledSignal;
use varcarleson::sparse::{build_sparse, verify_domination, EmbedContext, PACKING_FRACTION};
use varcarleson::tiles::TileGrid;
use varcarleson::varcar::{var_carleson_function, LinearizationData};
use varcarleson::weights::{power_weight, weighted_bound_experiment, WeightSample};

use crate::config::RunConfig;
use crate::io;

/// Shared command state: the validated configuration and output directory.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }
}

/// A few Gaussian-enveloped plane waves across the configured window; the
/// corpus model behind every generated input.
pub fn seeded_signal(rng: &mut ChaCha8Rng, cfg: &RunConfig) -> SampledSignal {
    let s = &cfg.signal;
    let window = (s.n - 1) as f64 * s.spacing;
    let (flo, fhi) = (cfg.frequency_grid.lo, cfg.frequency_grid.hi);
    let packets: Vec<(f64, f64, f64, f64)> = (0..s.components)
        .map(|_| {
            (
                s.origin + rng.gen_range(0.2 * window..0.8 * window),
                rng.gen_range(0.3..1.0) * window / 4.0,
                rng.gen_range(flo * 2.0 / 3.0..fhi * 2.0 / 3.0),
                rng.gen_range(0.4..1.3),
            )
        })
        .collect();
    SampledSignal::from_fn(s.origin, s.spacing, s.n, |x| {
        let mut z = Complex64::default();
        for &(c, w, xi, amp) in &packets {
            let env = (-((x - c) / w).powi(2)).exp() * amp;
            z += Complex64::from_polar(env, xi * x);
        }
        z
    })
    .expect("validated grid")
}

/// Reads the two signal files, or generates a seeded pair when neither is
/// given; mixing the two modes is rejected.
fn signal_pair(cfg: &RunConfig, f: Option<&Path>, g: Option<&Path>) -> Result<(SampledSignal, SampledSignal)> {
    match (f, g) {
        (Some(fp), Some(gp)) => {
            let f = io::read_signal(fp)?;
            let g = io::read_signal(gp)?;
            if !f.same_grid(&g) {
                return Err(VcError::Input("the two signals must share one sample grid".into()));
            }
            Ok((f, g))
        }
        (None, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let f = seeded_signal(&mut rng, cfg);
            let g = seeded_signal(&mut rng, cfg);
            Ok((f, g))
        }
        _ => Err(VcError::Input("provide both signal files or neither".into())),
    }
}

#[derive(Serialize)]
struct CarlesonMeta {
    n: usize,
    origin: f64,
    spacing: f64,
    r: f64,
    grid_lo: f64,
    grid_hi: f64,
    grid_count: usize,
    max_value: f64,
    mean_value: f64,
}

pub fn cmd_carleson(ctx: &Ctx, signal: &Path) -> Result<()> {
    let cfg = &ctx.cfg;
    let f = io::read_signal(signal)?;
    let fgrid = cfg.frequency_grid()?;
    let r = cfg.exponents.r;
    let points = var_carleson_function(&f, &fgrid, r)?;
    let csv = ctx.path("carleson.csv")?;
    io::write_carleson_csv(&csv, &f, &points)?;
    let max_value = points.iter().map(|p| p.value).fold(0.0, f64::max);
    let mean_value = points.iter().map(|p| p.value).sum::<f64>() / points.len() as f64;
    let meta = CarlesonMeta {
        n: f.len(),
        origin: f.origin(),
        spacing: f.spacing(),
        r,
        grid_lo: cfg.frequency_grid.lo,
        grid_hi: cfg.frequency_grid.hi,
        grid_count: cfg.frequency_grid.count,
        max_value,
        mean_value,
    };
    io::write_json(&ctx.path("carleson.json")?, &meta)?;
    println!("wrote {} ({} samples, max value {max_value})", csv.display(), f.len());
    Ok(())
}

#[derive(Serialize)]
struct FieldMeta {
    n_u: usize,
    scales: Vec<f64>,
    tiles: usize,
    sup_abs: f64,
}

fn field_meta(grid: &TileGrid, field: &varcarleson::tiles::TileField) -> FieldMeta {
    let mut sup = 0.0f64;
    for (s, row) in grid.rows.iter().enumerate() {
        for i_eta in 0..row.n_eta {
            for z in field.row(s, i_eta) {
                sup = sup.max(z.norm());
            }
        }
    }
    FieldMeta {
        n_u: grid.n_u,
        scales: grid.rows.iter().map(|r| r.t).collect(),
        tiles: grid.tile_count(),
        sup_abs: sup,
    }
}

pub fn cmd_transform(ctx: &Ctx, signal: &Path) -> Result<()> {
    let cfg = &ctx.cfg;
    let f = io::read_signal(signal)?;
    let kit = PacketKit::new(cfg.packet_params())?;
    let grid = TileGrid::for_signal(&f, cfg.lattice.freq_lo, cfg.lattice.freq_hi, cfg.packet.bandwidth, cfg.tile_params())?;
    let field = embed_f(&f, &kit, &grid)?;
    let csv = ctx.path("transform.csv")?;
    io::write_field_csv(&csv, &grid, &field)?;
    let meta = field_meta(&grid, &field);
    io::write_json(&ctx.path("transform.json")?, &meta)?;
    println!("wrote {} ({} tiles over {} scales)", csv.display(), meta.tiles, meta.scales.len());
    Ok(())
}

pub fn cmd_embed_a(ctx: &Ctx, signal: &Path) -> Result<()> {
    let cfg = &ctx.cfg;
    let g = io::read_signal(signal)?;
    let fgrid = cfg.frequency_grid()?;
    let r = cfg.exponents.r;
    let points = var_carleson_function(&g, &fgrid, r)?;
    let lin = LinearizationData::from_carleson(&fgrid, &points, r);
    let kit = PacketKit::new(cfg.packet_params())?;
    let grid = TileGrid::for_signal(&g, cfg.lattice.freq_lo, cfg.lattice.freq_hi, cfg.packet.bandwidth, cfg.tile_params())?;
    let field = embed_a(&g, &lin, &kit, &grid)?;
    let csv = ctx.path("embed_a.csv")?;
    io::write_field_csv(&csv, &grid, &field)?;
    let meta = field_meta(&grid, &field);
    io::write_json(&ctx.path("embed_a.json")?, &meta)?;
    println!("wrote {} ({} tiles over {} scales)", csv.display(), meta.tiles, meta.scales.len());
    Ok(())
}

#[derive(Serialize)]
struct VerificationJson {
    lhs: f64,
    rhs: f64,
    ratio: f64,
    config: RunConfig,
}

/// Builds the tile lattice, embeddings, and linearization shared by the
/// sparse construction and its verification.
struct SparseStage {
    f: SampledSignal,
    g: SampledSignal,
    kit: PacketKit,
    grid: TileGrid,
    lin: LinearizationData,
}

impl SparseStage {
    fn new(cfg: &RunConfig, f: SampledSignal, g: SampledSignal) -> Result<Self> {
        let fgrid = cfg.frequency_grid()?;
        let r = cfg.exponents.r;
        let points = var_carleson_function(&f, &fgrid, r)?;
        let lin = LinearizationData::from_carleson(&fgrid, &points, r);
        let kit = PacketKit::new(cfg.packet_params())?;
        let grid =
            TileGrid::for_signal(&f, cfg.lattice.freq_lo, cfg.lattice.freq_hi, cfg.packet.bandwidth, cfg.tile_params())?;
        Ok(Self { f, g, kit, grid, lin })
    }

    fn context<'a>(&'a self, geom: &'a varcarleson::outer::TentGeometry) -> EmbedContext<'a> {
        EmbedContext { kit: &self.kit, grid: &self.grid, geom, lin: &self.lin }
    }
}

pub fn cmd_sparse(ctx: &Ctx, f: Option<&Path>, g: Option<&Path>) -> Result<()> {
    let cfg = &ctx.cfg;
    let generated = f.is_none() && g.is_none();
    let (f, g) = signal_pair(cfg, f, g)?;
    if generated {
        // Keep the seeded inputs next to the reports so the run can be
        // repeated from explicit files.
        io::write_signal(&ctx.path("f.csv")?, &f)?;
        io::write_signal(&ctx.path("g.csv")?, &g)?;
    }
    let stage = SparseStage::new(cfg, f, g)?;
    let geom = cfg.tent_geometry();
    let ectx = stage.context(&geom);
    let q0 = stage.f.window();
    let mut epsilon = if cfg.sparse.epsilon > 0.0 { cfg.sparse.epsilon } else { stage.grid.rows[0].t };
    // The recursion also stops once node lengths fall under
    // PACKING_FRACTION^cap of the root, whichever cutoff binds first.
    epsilon = epsilon.max(q0.length * PACKING_FRACTION.powi(cfg.sparse.generation_cap as i32));
    let params = cfg.sparse_params();
    let (coll, trace) = build_sparse(&stage.f, &stage.g, &q0, epsilon, &ectx, &params)?;
    coll.certify()?;
    let sj = io::sparse_to_json(&coll, &trace);
    let sparse_path = ctx.path("sparse.json")?;
    io::write_json(&sparse_path, &sj)?;
    let fgrid = cfg.frequency_grid()?;
    let report = verify_domination(&stage.f, &stage.g, &coll, cfg.exponents.p, cfg.exponents.r, &fgrid)?;
    let ver = VerificationJson { lhs: report.lhs, rhs: report.rhs, ratio: report.ratio, config: cfg.clone() };
    let ver_path = ctx.path("verification.json")?;
    io::write_json(&ver_path, &ver)?;
    println!(
        "wrote {} ({} nodes, eta {}) and {} (ratio {})",
        sparse_path.display(),
        coll.intervals.len(),
        coll.eta,
        ver_path.display(),
        report.ratio
    );
    Ok(())
}

pub fn cmd_verify(ctx: &Ctx, collection: &Path, f: Option<&Path>, g: Option<&Path>) -> Result<()> {
    let cfg = &ctx.cfg;
    let sj: io::SparseJson = io::read_json(collection)?;
    let (f, g) = signal_pair(cfg, f, g)?;
    let coll = io::sparse_from_json(&sj, &f)?;
    coll.certify()?;
    let fgrid = cfg.frequency_grid()?;
    let report = verify_domination(&f, &g, &coll, cfg.exponents.p, cfg.exponents.r, &fgrid)?;
    let ver = VerificationJson { lhs: report.lhs, rhs: report.rhs, ratio: report.ratio, config: cfg.clone() };
    let ver_path = ctx.path("verification.json")?;
    io::write_json(&ver_path, &ver)?;
    println!(
        "certified {} nodes; wrote {} (ratio {})",
        coll.intervals.len(),
        ver_path.display(),
        report.ratio
    );
    Ok(())
}

#[derive(Serialize)]
struct ReconstructMeta {
    xi_minus: f64,
    xi_plus: f64,
    scales_per_octave: usize,
    a_step: f64,
    /// Central scale `bump_center * bandwidth / |interval|` the
    /// superposition concentrates on.
    required_scale: f64,
    /// Scale range the configured sample lattice can represent.
    scale_lo: f64,
    scale_hi: f64,
    /// Set when the required scale falls outside that range; the sweep is
    /// still emitted but carries no lattice-level meaning.
    low_confidence: bool,
    /// Max deviation from 1 over the middle half of the interval.
    plateau_error: f64,
    /// Max magnitude at distance beyond one interval length outside.
    outside_level: f64,
}

pub fn cmd_reconstruct(ctx: &Ctx, xi_minus: f64, xi_plus: f64) -> Result<()> {
    let cfg = &ctx.cfg;
    if !(xi_plus > xi_minus) {
        return Err(VcError::FrequencyOrder { lo: xi_minus, hi: xi_plus });
    }
    let kit = PacketKit::new(cfg.packet_params())?;
    let rc = &cfg.reconstruct;
    let len = xi_plus - xi_minus;
    let lo = xi_minus - rc.span * len;
    let hi = xi_plus + rc.span * len;
    let step = (hi - lo) / (rc.n_zeta - 1) as f64;
    let zetas: Vec<f64> = (0..rc.n_zeta).map(|k| lo + k as f64 * step).collect();
    let values = multiplier_reconstruction(&kit, xi_minus, xi_plus, &zetas, rc.scales_per_octave, rc.a_step)?;

    let mut plateau_error = 0.0f64;
    let mut outside_level = 0.0f64;
    for (&z, &m) in zetas.iter().zip(&values) {
        if z >= xi_minus + 0.25 * len && z <= xi_plus - 0.25 * len {
            plateau_error = plateau_error.max((m - 1.0).abs());
        }
        if z < xi_minus - len || z > xi_plus + len {
            outside_level = outside_level.max(m.abs());
        }
    }
    let required_scale = cfg.packet.bump_center * cfg.packet.bandwidth / len;
    let scale_lo = cfg.lattice.t_min_samples * cfg.signal.spacing;
    let scale_hi = cfg.lattice.t_max_fraction * (cfg.signal.n - 1) as f64 * cfg.signal.spacing;
    let low_confidence = !(scale_lo <= required_scale && required_scale <= scale_hi);

    let csv = ctx.path("reconstruct.csv")?;
    let mut out = String::from("zeta,multiplier\n");
    for (&z, &m) in zetas.iter().zip(&values) {
        out.push_str(&format!("{z},{m}\n"));
    }
    fs::write(&csv, out)?;
    let meta = ReconstructMeta {
        xi_minus,
        xi_plus,
        scales_per_octave: rc.scales_per_octave,
        a_step: rc.a_step,
        required_scale,
        scale_lo,
        scale_hi,
        low_confidence,
        plateau_error,
        outside_level,
    };
    io::write_json(&ctx.path("reconstruct.json")?, &meta)?;
    let tag = if low_confidence { " [low confidence: no resolvable scales]" } else { "" };
    println!(
        "wrote {} (plateau error {plateau_error}, outside level {outside_level}){tag}",
        csv.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct WeightsFitJson {
    slope: f64,
    intercept: f64,
    bound: f64,
    pass: bool,
}

pub fn cmd_weights(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let e = &cfg.exponents;
    let s = &cfg.signal;
    let family: Vec<(f64, WeightSample)> = cfg
        .weights
        .powers
        .iter()
        .map(|&a| Ok((a, power_weight(s.origin, s.spacing, s.n, a)?)))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let corpus: Vec<SampledSignal> = (0..cfg.weights.corpus).map(|_| seeded_signal(&mut rng, cfg)).collect();
    let fgrid = cfg.frequency_grid()?;
    let table = weighted_bound_experiment(e.r, e.q, e.t, &family, &corpus, &fgrid)?;
    let csv = ctx.path("weights.csv")?;
    let mut out = String::from("a,A_t,ratio\n");
    for row in &table.rows {
        out.push_str(&format!("{},{},{}\n", row.label, row.a_t, row.ratio));
    }
    fs::write(&csv, out)?;
    let fit = WeightsFitJson {
        slope: table.fit.slope,
        intercept: table.fit.intercept,
        bound: table.fit.bound,
        pass: table.fit.pass,
    };
    io::write_json(&ctx.path("weights_fit.json")?, &fit)?;
    println!(
        "wrote {} ({} weights; slope {} vs bound {})",
        csv.display(),
        table.rows.len(),
        fit.slope,
        fit.bound
    );
    Ok(())
}

pub fn cmd_defaults() -> Result<()> {
    let text = toml::to_string_pretty(&RunConfig::default())
        .map_err(|e| VcError::Assertion(format!("serialization failed: {e}")))?;
    print!("{text}");
    Ok(())
}
