//! Run configuration schema (TOML).
//!
//! One file describes one campaign.  Each subcommand reads the sections it
//! needs; unknown fields anywhere are rejected so typos surface as config
//! errors with line and field diagnostics.

use std::path::Path;

use serde::{Deserialize, Serialize};
use topopair::biphoton::{EnvelopeForm, PhaseConvention, StateRecipe};
use topopair::campaign::{
    DEFAULT_SWEEP_HALF, DEFAULT_SWEEP_STEP, DEFAULT_Z_CENTER, DEFAULT_Z_FORWARD, SCAN_HI, SCAN_LO,
    SCAN_POINTS, WINDOW_FRACTION,
};
use topopair::lattice::{DisorderSpec, LatticeModel, Region};
use topopair::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Lattice family and geometry (`kind = "honeycomb"` or `"square"`).
    /// Only `verify` runs without one.
    #[serde(default)]
    pub model: Option<LatticeModel>,
    #[serde(default)]
    pub disorder: Option<DisorderTable>,
    #[serde(default)]
    pub state: Option<StateTable>,
    #[serde(default)]
    pub propagation: PropagationTable,
    #[serde(default)]
    pub ensemble: Option<EnsembleTable>,
    #[serde(default)]
    pub scan: Option<ScanTable>,
    #[serde(default)]
    pub verify: Option<VerifyTable>,
    #[serde(default)]
    pub size_study: Option<SizeStudyTable>,
}

/// On-site disorder with its base seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderTable {
    pub sigma: f64,
    #[serde(default = "default_region")]
    pub region: Region,
    #[serde(default)]
    pub seed: u64,
}

fn default_region() -> Region {
    Region::Middle { extent: 20 }
}

impl DisorderTable {
    pub fn spec(&self) -> DisorderSpec {
        DisorderSpec {
            sigma: self.sigma,
            region: self.region,
        }
    }
}

/// Two-photon template widths; window/phase/envelope default per family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateTable {
    pub sigma_c: f64,
    pub sigma_a: f64,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub phase: Option<PhaseConvention>,
    #[serde(default)]
    pub envelope: Option<EnvelopeForm>,
}

impl StateTable {
    pub fn recipe(&self, model: &LatticeModel) -> StateRecipe {
        let mut r = match model {
            LatticeModel::Honeycomb(_) => StateRecipe::honeycomb(self.sigma_c, self.sigma_a),
            LatticeModel::Square(_) => StateRecipe::square(self.sigma_c, self.sigma_a),
        };
        if let Some(w) = self.window {
            r.window = w;
        }
        if let Some(p) = self.phase {
            r.phase = p;
        }
        if let Some(e) = self.envelope {
            r.envelope = e;
        }
        r
    }
}

/// Forward distance, measurement sweep and snapshot schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationTable {
    pub z: f64,
    pub sweep_center: f64,
    pub sweep_half: f64,
    pub sweep_step: f64,
    /// Spacing of intermediate snapshots; 0 records the final state only.
    pub snapshot_dz: f64,
}

impl Default for PropagationTable {
    fn default() -> Self {
        PropagationTable {
            z: DEFAULT_Z_FORWARD,
            sweep_center: DEFAULT_Z_CENTER,
            sweep_half: DEFAULT_SWEEP_HALF,
            sweep_step: DEFAULT_SWEEP_STEP,
            snapshot_dz: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleTable {
    pub instances: usize,
    /// Threshold fraction of the map peak for the protection window.
    #[serde(default = "default_window_fraction")]
    pub window_fraction: f64,
}

fn default_window_fraction() -> f64 {
    WINDOW_FRACTION
}

/// Log-spaced width grid for the entanglement/protection scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanTable {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ScanTable {
    fn default() -> Self {
        ScanTable {
            points: SCAN_POINTS,
            lo: SCAN_LO,
            hi: SCAN_HI,
        }
    }
}

/// Batch sizes for the independent verification oracles.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyTable {
    pub conserving: usize,
    pub cross: usize,
    pub evolution: usize,
    pub seed: u64,
}

impl Default for VerifyTable {
    fn default() -> Self {
        VerifyTable {
            conserving: 1000,
            cross: 200,
            evolution: 100,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeStudyTable {
    /// Hexagon grid sizes `[nx, ny]` to compare.
    pub sizes: Vec<(usize, usize)>,
    pub instances: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn model(&self) -> Result<&LatticeModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [model] section".into()))
    }

    pub fn state(&self) -> Result<&StateTable> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [state] section".into()))
    }

    pub fn ensemble(&self) -> Result<&EnsembleTable> {
        self.ensemble
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs an [ensemble] section".into()))
    }
}
