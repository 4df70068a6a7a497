//! Finite lattice samples: site geometry, tight-binding Hamiltonians,
//! boundary structure and on-site disorder.
//!
//! Both lattice families share the same frame: the transverse direction is
//! `x`, the propagation direction is `y`, and the input boundary is the row
//! of sites with maximal `x`, ordered by increasing `y`.

pub mod honeycomb;
pub mod square;

pub use honeycomb::HoneycombSpec;
pub use square::SquareSpec;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, sha256_hex};
use crate::linalg::SparseHermitian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

/// One lattice site.
///
/// `key` holds integer coordinates: doubled units for the honeycomb
/// (`2x`, `2y/sqrt(3)`), plain row/column for the square lattice.
#[derive(Debug, Clone)]
pub struct Site {
    pub position: [f64; 2],
    pub key: (i32, i32),
    pub sublattice: Option<Sublattice>,
}

/// Which lattice family a sample belongs to, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeModel {
    Honeycomb(HoneycombSpec),
    Square(SquareSpec),
}

impl LatticeModel {
    pub fn build(&self) -> Result<Lattice> {
        match self {
            LatticeModel::Honeycomb(spec) => spec.build(),
            LatticeModel::Square(spec) => spec.build(),
        }
    }

    pub fn canonical_string(&self) -> String {
        match self {
            LatticeModel::Honeycomb(s) => s.canonical_string(),
            LatticeModel::Square(s) => s.canonical_string(),
        }
    }
}

/// Where on-site disorder is applied.
///
/// `Middle` spans `extent` rows of the propagation axis centered along the
/// sample: hexagon rows for the honeycomb, columns for the square lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Everywhere,
    Middle { extent: usize },
}

impl Region {
    fn canonical_string(&self) -> String {
        match self {
            Region::Everywhere => "everywhere".into(),
            Region::Middle { extent } => format!("middle:{extent}"),
        }
    }
}

/// Gaussian on-site detuning, independent per site inside the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub sigma: f64,
    pub region: Region,
}

/// A concrete disorder draw: the spec, the seed and the resulting per-site
/// detunings in ascending site order.
#[derive(Debug, Clone)]
pub struct DisorderRealization {
    pub spec: DisorderSpec,
    pub seed: u64,
    pub deltas: Vec<(usize, f64)>,
}

/// A built lattice sample: geometry plus single-particle Hamiltonian.
#[derive(Debug, Clone)]
pub struct Lattice {
    model: LatticeModel,
    sites: Vec<Site>,
    h: SparseHermitian,
    boundary_distance: Vec<u32>,
    input_edge: Vec<usize>,
    nn_pairs: Vec<(usize, usize)>,
    disorder: Option<DisorderRealization>,
}

impl Lattice {
    pub(crate) fn assemble(
        model: LatticeModel,
        sites: Vec<Site>,
        entries: Vec<(usize, usize, C64)>,
        nn_pairs: Vec<(usize, usize)>,
        boundary: Vec<bool>,
        input_edge: Vec<usize>,
    ) -> Result<Lattice> {
        let n = sites.len();
        let h = SparseHermitian::from_upper_triangle(n, &entries)?;
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &nn_pairs {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let boundary_distance = multi_source_bfs(&adjacency, &boundary);
        Ok(Lattice {
            model,
            sites,
            h,
            boundary_distance,
            input_edge,
            nn_pairs,
            disorder: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn hamiltonian(&self) -> &SparseHermitian {
        &self.h
    }

    /// Hop distance from the sample perimeter, zero on the perimeter itself.
    pub fn boundary_distance(&self) -> &[u32] {
        &self.boundary_distance
    }

    /// Sites along the input boundary (maximal transverse coordinate),
    /// ordered by increasing propagation coordinate.
    pub fn input_edge(&self) -> &[usize] {
        &self.input_edge
    }

    /// Nearest-neighbour bonds as unordered site pairs.
    pub fn nn_pairs(&self) -> &[(usize, usize)] {
        &self.nn_pairs
    }

    pub fn disorder(&self) -> Option<&DisorderRealization> {
        self.disorder.as_ref()
    }

    /// Per-site membership in a disorder region.
    pub fn region_mask(&self, region: &Region) -> Result<Vec<bool>> {
        match *region {
            Region::Everywhere => Ok(vec![true; self.dim()]),
            Region::Middle { extent } => match &self.model {
                LatticeModel::Honeycomb(spec) => {
                    if extent > spec.ny {
                        return Err(Error::Config(format!(
                            "middle region of {extent} hexagon rows exceeds sample length {}",
                            spec.ny
                        )));
                    }
                    let n_left = (spec.ny - extent) as i32 / 2;
                    let lo = 2 * n_left - 1;
                    let hi = 2 * (n_left + extent as i32) - 1;
                    Ok(self
                        .sites
                        .iter()
                        .map(|s| s.key.1 >= lo && s.key.1 < hi)
                        .collect())
                }
                LatticeModel::Square(spec) => {
                    if extent > spec.ny {
                        return Err(Error::Config(format!(
                            "middle region of {extent} columns exceeds sample length {}",
                            spec.ny
                        )));
                    }
                    let c0 = (spec.ny - extent) as i32 / 2;
                    let c1 = c0 + extent as i32;
                    Ok(self
                        .sites
                        .iter()
                        .map(|s| s.key.1 >= c0 && s.key.1 < c1)
                        .collect())
                }
            },
        }
    }

    /// Clean copy of this sample with one disorder draw applied to the
    /// on-site terms.  Draws are taken in ascending site order within the
    /// region, so a given `(spec, seed)` always produces the same sample.
    pub fn with_disorder(&self, spec: &DisorderSpec, seed: u64) -> Result<Lattice> {
        if self.disorder.is_some() {
            return Err(Error::Config(
                "cannot add disorder to an already disordered sample".into(),
            ));
        }
        if !spec.sigma.is_finite() || spec.sigma < 0.0 {
            return Err(Error::Config(format!(
                "disorder strength must be finite and nonnegative, got {}",
                spec.sigma
            )));
        }
        let mask = self.region_mask(&spec.region)?;
        let mut deltas = Vec::new();
        if spec.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, spec.sigma)
                .map_err(|e| Error::Config(format!("bad disorder width: {e}")))?;
            for (i, &inside) in mask.iter().enumerate() {
                if inside {
                    deltas.push((i, normal.sample(&mut rng)));
                }
            }
        } else {
            for (i, &inside) in mask.iter().enumerate() {
                if inside {
                    deltas.push((i, 0.0));
                }
            }
        }
        let mut shift = vec![0.0; self.dim()];
        for &(i, d) in &deltas {
            shift[i] = d;
        }
        let mut h = self.h.clone();
        h.shift_diagonal(&shift);
        Ok(Lattice {
            model: self.model.clone(),
            sites: self.sites.clone(),
            h,
            boundary_distance: self.boundary_distance.clone(),
            input_edge: self.input_edge.clone(),
            nn_pairs: self.nn_pairs.clone(),
            disorder: Some(DisorderRealization {
                spec: *spec,
                seed,
                deltas,
            }),
        })
    }

    /// Stable content hash of the sample: model parameters plus the disorder
    /// spec and seed (the draw is a pure function of those).
    pub fn canonical_hash(&self) -> String {
        let mut s = String::from("topopair-lattice-v1;");
        s.push_str(&self.model.canonical_string());
        if let Some(d) = &self.disorder {
            s.push_str(&format!(
                ";disorder;sigma={};region={};seed={}",
                fmt_f64(d.spec.sigma),
                d.spec.region.canonical_string(),
                d.seed
            ));
        }
        sha256_hex(s.as_bytes())
    }
}

fn multi_source_bfs(adjacency: &[Vec<usize>], sources: &[bool]) -> Vec<u32> {
    let n = adjacency.len();
    let mut dist = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for (i, &src) in sources.iter().enumerate() {
        if src {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for &j in &adjacency[i] {
            if dist[j] == u32::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}
