//! Run configuration: every free constant of the toolkit lives in one TOML
//! file with a canonical default, printable via the `defaults` command.

use std::path::Path;

use serde::{Deserialize, Serialize};
use varcarleson::error::{Result, VcError};
use varcarleson::fourier::FrequencyGrid;
use varcarleson::outer::TentGeometry;
use varcarleson::packet::{PacketParams, CALIBRATED_GATE};
use varcarleson::sparse::SparseParams;
use varcarleson::tiles::TileGridParams;

/// Packet envelope and truncation gate shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSection {
    pub bandwidth: f64,
    pub bump_center: f64,
    pub bump_halfwidth: f64,
    pub gate_lo: f64,
    pub gate_hi: f64,
    pub gate_sharp_lo: f64,
    pub gate_sharp_hi: f64,
    pub gate_balance: f64,
}

impl Default for PacketSection {
    fn default() -> Self {
        let p = PacketParams::default();
        Self {
            bandwidth: p.bandwidth,
            bump_center: p.bump_center,
            bump_halfwidth: p.bump_halfwidth,
            gate_lo: p.gate_lo,
            gate_hi: p.gate_hi,
            gate_sharp_lo: CALIBRATED_GATE.0,
            gate_sharp_hi: CALIBRATED_GATE.1,
            gate_balance: CALIBRATED_GATE.2,
        }
    }
}

/// Tent apertures as multiples of the packet bandwidth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TentSection {
    pub full_aperture: f64,
    pub core_aperture: f64,
}

impl Default for TentSection {
    fn default() -> Self {
        Self { full_aperture: 8.0, core_aperture: 2.0 }
    }
}

/// Position-scale-frequency lattice shape plus the spectral band it covers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub scales_per_octave: usize,
    pub eta_step: f64,
    pub eta_margin: f64,
    pub t_min_samples: f64,
    pub t_max_fraction: f64,
    pub u_dilation: f64,
    pub freq_lo: f64,
    pub freq_hi: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            scales_per_octave: 1,
            eta_step: 1.0 / 12.0,
            eta_margin: 2.0,
            t_min_samples: 4.0,
            t_max_fraction: 0.5,
            u_dilation: 1.0,
            freq_lo: -4.0,
            freq_hi: 4.0,
        }
    }
}

/// Candidate partition frequencies for the variation search.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencySection {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for FrequencySection {
    fn default() -> Self {
        Self { lo: -3.0, hi: 3.0, count: 5 }
    }
}

/// Sample grid for generated signals, and the grid expected of file inputs
/// to the weights experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub origin: f64,
    pub spacing: f64,
    pub n: usize,
    /// Gaussian-enveloped plane waves per generated signal.
    pub components: usize,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self { origin: 0.0, spacing: 1.0 / 16.0, n: 64, components: 3 }
    }
}

/// Every exponent in play.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentSection {
    /// Variation exponent of the partition search.
    pub r: f64,
    /// Averaging exponent on the first slot of the sparse form.
    pub p: f64,
    /// Lebesgue exponent of the weighted experiment.
    pub q: f64,
    /// Weight class exponent.
    pub t: f64,
    /// Outer-norm exponent paired with the energy size.
    pub sigma: f64,
    /// Outer-norm exponent paired with the mass size.
    pub tau: f64,
}

impl Default for ExponentSection {
    fn default() -> Self {
        Self { r: 3.0, p: 1.5, q: 4.0, t: 1.2, sigma: 2.0, tau: 2.0 }
    }
}

/// Stopping-time iteration controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparseSection {
    /// Initial removal budget as a fraction of the node length.
    pub c0: f64,
    /// Configured energy embedding constant; `inf` disables the bound.
    pub k_energy: f64,
    /// Configured mass embedding constant; `inf` disables the bound.
    pub k_mass: f64,
    /// Budget halvings allowed before the packing bound is declared
    /// unattainable.
    pub max_halvings: usize,
    /// Length cutoff below which nodes are not refined; a value `<= 0`
    /// selects the finest lattice scale automatically.
    pub epsilon: f64,
    /// Hard cap on recursion depth, applied on top of the cutoff.
    pub generation_cap: usize,
}

impl Default for SparseSection {
    fn default() -> Self {
        let p = SparseParams::default();
        Self {
            c0: p.c0,
            k_energy: p.k_energy,
            k_mass: p.k_mass,
            max_halvings: p.max_halvings,
            epsilon: 0.0,
            generation_cap: 8,
        }
    }
}

/// Multiplier reconstruction quadrature and sweep shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSection {
    pub scales_per_octave: usize,
    /// Frequency lattice step in units of `bandwidth / t`.
    pub a_step: f64,
    /// Sample count of the output sweep.
    pub n_zeta: usize,
    /// Sweep extends this many interval lengths beyond each endpoint.
    pub span: f64,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        Self { scales_per_octave: 12, a_step: 1.0 / 48.0, n_zeta: 257, span: 2.0 }
    }
}

/// Power-weight experiment shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    /// Exponents `a` of the weights `(1 + |x|)^a`; must be distinct.
    pub powers: Vec<f64>,
    /// Number of generated corpus signals.
    pub corpus: usize,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self { powers: vec![0.0, 0.05, 0.1, 0.2], corpus: 3 }
    }
}

/// The complete parameter set of a run. A fixed `seed` makes every command
/// fully deterministic, including generated corpora and emitted bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub packet: PacketSection,
    pub tent: TentSection,
    pub lattice: LatticeSection,
    pub frequency_grid: FrequencySection,
    pub signal: SignalSection,
    pub exponents: ExponentSection,
    pub sparse: SparseSection,
    pub reconstruct: ReconstructSection,
    pub weights: WeightsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2026,
            packet: PacketSection::default(),
            tent: TentSection::default(),
            lattice: LatticeSection::default(),
            frequency_grid: FrequencySection::default(),
            signal: SignalSection::default(),
            exponents: ExponentSection::default(),
            sparse: SparseSection::default(),
            reconstruct: ReconstructSection::default(),
            weights: WeightsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn packet_params(&self) -> PacketParams {
        PacketParams {
            bandwidth: self.packet.bandwidth,
            bump_center: self.packet.bump_center,
            bump_halfwidth: self.packet.bump_halfwidth,
            gate_lo: self.packet.gate_lo,
            gate_hi: self.packet.gate_hi,
            gate_sharp_lo: self.packet.gate_sharp_lo,
            gate_sharp_hi: self.packet.gate_sharp_hi,
            gate_balance: self.packet.gate_balance,
        }
    }

    pub fn tent_geometry(&self) -> TentGeometry {
        let b = self.packet.bandwidth;
        TentGeometry {
            theta: (-self.tent.full_aperture * b, self.tent.full_aperture * b),
            theta_o: (-self.tent.core_aperture * b, self.tent.core_aperture * b),
        }
    }

    pub fn tile_params(&self) -> TileGridParams {
        TileGridParams {
            scales_per_octave: self.lattice.scales_per_octave,
            eta_step: self.lattice.eta_step,
            eta_margin: self.lattice.eta_margin,
            t_min_samples: self.lattice.t_min_samples,
            t_max_fraction: self.lattice.t_max_fraction,
            u_dilation: self.lattice.u_dilation,
        }
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        if self.frequency_grid.count < 2 {
            return Err(VcError::Config("frequency grid needs at least two points".into()));
        }
        FrequencyGrid::uniform(self.frequency_grid.lo, self.frequency_grid.hi, self.frequency_grid.count)
    }

    pub fn sparse_params(&self) -> SparseParams {
        SparseParams {
            p: self.exponents.p,
            sigma: self.exponents.sigma,
            tau: self.exponents.tau,
            k_energy: self.sparse.k_energy,
            k_mass: self.sparse.k_mass,
            c0: self.sparse.c0,
            max_halvings: self.sparse.max_halvings,
        }
    }

    /// Structural invariants shared by every command. Exponent constraints
    /// specific to one experiment are checked by that command instead.
    pub fn validate(&self) -> Result<()> {
        self.packet_params().validate()?;
        self.tent_geometry().validate(self.packet.bandwidth)?;
        self.tile_params().validate()?;
        self.frequency_grid()?;
        self.sparse_params().validate()?;
        let s = &self.signal;
        if s.n < 2 || !(s.spacing > 0.0) || !s.origin.is_finite() || s.components == 0 {
            return Err(VcError::Config("signal grid needs n >= 2, positive spacing, and at least one component".into()));
        }
        if !(self.lattice.freq_lo <= self.frequency_grid.lo && self.frequency_grid.hi <= self.lattice.freq_hi) {
            return Err(VcError::Config("lattice band must cover the partition frequency grid".into()));
        }
        let e = &self.exponents;
        if !(e.r > 1.0 && e.p > 1.0 && e.q > 1.0 && e.t > 1.0) {
            return Err(VcError::Config("exponents r, p, q, t must all exceed 1".into()));
        }
        let rc = &self.reconstruct;
        if rc.scales_per_octave == 0 || !(rc.a_step > 0.0) || rc.n_zeta < 2 || !(rc.span >= 0.0) {
            return Err(VcError::Config("reconstruction sweep parameters out of range".into()));
        }
        let w = &self.weights;
        if w.powers.is_empty() || w.corpus == 0 {
            return Err(VcError::Config("weights experiment needs at least one power and one corpus signal".into()));
        }
        if w.powers.iter().any(|a| !a.is_finite()) {
            return Err(VcError::Config("weight powers must be finite".into()));
        }
        for (i, a) in w.powers.iter().enumerate() {
            if w.powers[..i].contains(a) {
                return Err(VcError::Config(format!("duplicate weight power {a}")));
            }
        }
        if self.sparse.generation_cap == 0 {
            return Err(VcError::Config("generation cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Reads the config file if given, otherwise starts from the canonical
/// defaults; applies the seed override and validates.
pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| VcError::Input(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| VcError::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}
