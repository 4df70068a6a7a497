//! Two-photon states on topological photonic lattices.
//!
//! Builds Haldane honeycomb ribbons and magnetic-flux square lattices,
//! classifies their edge spectra, prepares spatially entangled two-photon
//! input states on an edge window, propagates them through disordered
//! samples, and measures fidelity, edge content and spatial entanglement
//! over disorder ensembles.

pub mod biphoton;
pub mod campaign;
pub mod error;
pub mod evolve;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
