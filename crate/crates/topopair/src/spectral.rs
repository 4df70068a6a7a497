//! Single-particle spectra: diagonalization, bulk gaps and edge-mode
//! classification.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{square::flux_fraction, HoneycombSpec, Lattice, LatticeModel, SquareSpec};
use crate::linalg::eigh;

/// Eigenvalue margin for gap membership, in units of the hop scale.
pub const EDGE_MARGIN: f64 = 1e-6;
/// Hop distance from the perimeter that counts as boundary support.
pub const BOUNDARY_HOPS: u32 = 2;
/// Minimum boundary weight for a mode to classify as an edge mode.
pub const BOUNDARY_WEIGHT_MIN: f64 = 0.5;

/// Full eigendecomposition of a lattice Hamiltonian.  Eigenvalues ascend;
/// eigenvectors are the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Array1<f64>,
    pub vectors: Array2<C64>,
}

/// Diagonalize and verify the residual `max |H v - lambda v|`.
pub fn diagonalize(lat: &Lattice) -> Result<Spectrum> {
    let h = lat.hamiltonian().to_dense();
    let (values, vectors) = eigh(&h)?;
    let mut hv = Array2::<C64>::zeros(vectors.dim());
    lat.hamiltonian().spmm(&vectors, &mut hv);
    let mut residual = 0.0_f64;
    for k in 0..vectors.ncols() {
        for i in 0..vectors.nrows() {
            residual = residual.max((hv[(i, k)] - vectors[(i, k)] * values[k]).norm());
        }
    }
    let scale = values.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    let tol = 1e-10 * (1.0 + scale);
    if residual > tol {
        return Err(Error::Residual { residual, tol });
    }
    Ok(Spectrum { values, vectors })
}

/// An open interval of energies free of bulk bands.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Gap {
    pub lower: f64,
    pub upper: f64,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, e: f64, margin: f64) -> bool {
        e > self.lower + margin && e < self.upper - margin
    }
}

/// Characteristic hop energy of a model, used to scale tolerances.
pub fn hop_scale(model: &LatticeModel) -> f64 {
    match model {
        LatticeModel::Honeycomb(s) => s.kappa1,
        LatticeModel::Square(s) => s.kappa,
    }
}

/// Bulk band gaps of the infinite lattice, ascending in energy.  Closed
/// gaps (band touchings) are omitted.
pub fn bulk_gaps(model: &LatticeModel) -> Result<Vec<Gap>> {
    match model {
        LatticeModel::Honeycomb(s) => Ok(honeycomb_gaps(s)),
        LatticeModel::Square(s) => square_gaps(s),
    }
}

/// The single bulk gap of a model, for callers that require one.
pub fn bulk_gap(model: &LatticeModel) -> Result<Gap> {
    let gaps = bulk_gaps(model)?;
    match gaps.len() {
        0 => Err(Error::Gapless { width: 0.0 }),
        1 => Ok(gaps[0]),
        _ => Err(Error::Degenerate(format!(
            "model has {} bulk gaps; select one explicitly",
            gaps.len()
        ))),
    }
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Band splitting at the Brillouin-zone corner, where the nearest-neighbour
/// amplitude vanishes and the chiral hops alone set the local gap.  With
/// strong chiral hopping the band extrema move to other momenta, so the
/// global gap can be narrower than this number; a spectrum report should
/// show both.
pub fn honeycomb_corner_splitting(s: &HoneycombSpec) -> f64 {
    6.0 * SQRT3 * s.t2 * s.phi.sin().abs()
}

/// Momentum-space bands of the honeycomb model on a dense Brillouin-zone
/// grid.  The two bands are evaluated in closed form.
fn honeycomb_gaps(s: &HoneycombSpec) -> Vec<Gap> {
    // grid divisible by 3 so the zone corners, where the gap is smallest,
    // are sampled exactly
    const N: usize = 480;
    let a1 = [0.0, SQRT3];
    let a2 = [1.5, 0.5 * SQRT3];
    let det = a1[0] * a2[1] - a1[1] * a2[0];
    let b1 = [
        std::f64::consts::TAU * a2[1] / det,
        -std::f64::consts::TAU * a2[0] / det,
    ];
    let b2 = [
        -std::f64::consts::TAU * a1[1] / det,
        std::f64::consts::TAU * a1[0] / det,
    ];
    let deltas = [[1.0, 0.0], [-0.5, 0.5 * SQRT3], [-0.5, -0.5 * SQRT3]];
    let nnn = [[0.0, SQRT3], [-1.5, -0.5 * SQRT3], [1.5, -0.5 * SQRT3]];
    let mut lower_max = f64::NEG_INFINITY;
    let mut upper_min = f64::INFINITY;
    for i in 0..N {
        for j in 0..N {
            let t1 = i as f64 / N as f64;
            let t2 = j as f64 / N as f64;
            let k = [t1 * b1[0] + t2 * b2[0], t1 * b1[1] + t2 * b2[1]];
            let mut f = C64::new(0.0, 0.0);
            for d in deltas {
                f += C64::from_polar(s.kappa1, k[0] * d[0] + k[1] * d[1]);
            }
            let mut ga = 0.0;
            let mut gb = 0.0;
            for v in nnn {
                let kv = k[0] * v[0] + k[1] * v[1];
                ga += 2.0 * s.t2 * (kv - s.phi).cos();
                gb += 2.0 * s.t2 * (kv + s.phi).cos();
            }
            let mid = s.beta + 0.5 * (ga + gb);
            let split = (0.25 * (ga - gb) * (ga - gb) + f.norm_sqr()).sqrt();
            lower_max = lower_max.max(mid - split);
            upper_min = upper_min.min(mid + split);
        }
    }
    if upper_min - lower_max > 1e-9 * s.kappa1 {
        vec![Gap {
            lower: lower_max,
            upper: upper_min,
        }]
    } else {
        Vec::new()
    }
}

/// Bloch Hamiltonian of the flux lattice over one magnetic cell of `q`
/// columns.  `theta` is the Bloch phase accumulated across the cell.
pub fn square_bloch(s: &SquareSpec, q: usize, kx: f64, theta: f64) -> Array2<C64> {
    let mut h = Array2::<C64>::zeros((q, q));
    for m in 0..q {
        h[(m, m)] = C64::new(s.beta + 2.0 * s.kappa * (kx - s.phi * m as f64).cos(), 0.0);
    }
    if q == 1 {
        h[(0, 0)] += C64::new(2.0 * s.kappa * theta.cos(), 0.0);
        return h;
    }
    for m in 0..q - 1 {
        h[(m + 1, m)] += C64::new(s.kappa, 0.0);
        h[(m, m + 1)] += C64::new(s.kappa, 0.0);
    }
    let wrap = C64::from_polar(s.kappa, theta);
    h[(0, q - 1)] += wrap;
    h[(q - 1, 0)] += wrap.conj();
    h
}

fn square_gaps(s: &SquareSpec) -> Result<Vec<Gap>> {
    let (_, q) = flux_fraction(s.phi).ok_or_else(|| {
        Error::Config(format!(
            "flux {} is not a low-order rational multiple of 2*pi",
            s.phi
        ))
    })?;
    let q = q as usize;
    const NKX: usize = 512;
    const NTH: usize = 128;
    let mut band_min = vec![f64::INFINITY; q];
    let mut band_max = vec![f64::NEG_INFINITY; q];
    for i in 0..NKX {
        let kx = std::f64::consts::TAU * i as f64 / NKX as f64;
        for j in 0..NTH {
            let theta = std::f64::consts::TAU * j as f64 / NTH as f64;
            let h = square_bloch(s, q, kx, theta);
            let (w, _) = eigh(&h)?;
            for m in 0..q {
                band_min[m] = band_min[m].min(w[m]);
                band_max[m] = band_max[m].max(w[m]);
            }
        }
    }
    let mut gaps = Vec::new();
    for m in 0..q.saturating_sub(1) {
        let lower = band_max[m];
        let upper = band_min[m + 1];
        if upper - lower > 1e-9 * s.kappa {
            gaps.push(Gap { lower, upper });
        }
    }
    Ok(gaps)
}

/// Weight of a state within `max_hops` bonds of the sample perimeter.
pub fn boundary_weight(lat: &Lattice, state: ArrayView1<C64>, max_hops: u32) -> f64 {
    lat.boundary_distance()
        .iter()
        .zip(state.iter())
        .filter(|(&d, _)| d <= max_hops)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Edge/bulk classification of every mode of a spectrum against one gap.
#[derive(Debug, Clone)]
pub struct ModeClasses {
    pub gap: Gap,
    pub is_edge: Vec<bool>,
    /// Eigenindices of the edge modes, ascending in energy.
    pub edge_indices: Vec<usize>,
}

/// A mode is an edge mode when its energy lies strictly inside the bulk gap
/// and at least half its weight sits within two hops of the perimeter.
pub fn classify_edge_modes(lat: &Lattice, spec: &Spectrum, gap: &Gap) -> ModeClasses {
    let margin = EDGE_MARGIN * hop_scale(lat.model());
    let mut is_edge = vec![false; spec.values.len()];
    let mut edge_indices = Vec::new();
    for (n, &e) in spec.values.iter().enumerate() {
        if !gap.contains(e, margin) {
            continue;
        }
        let w = boundary_weight(lat, spec.vectors.column(n), BOUNDARY_HOPS);
        if w >= BOUNDARY_WEIGHT_MIN {
            is_edge[n] = true;
            edge_indices.push(n);
        }
    }
    ModeClasses {
        gap: *gap,
        is_edge,
        edge_indices,
    }
}

/// Net probability current in the propagation direction through a cut at
/// mid-sample, restricted to the half nearer the input boundary.  Positive
/// values mean counterclockwise circulation.
pub fn circulation(lat: &Lattice, state: ArrayView1<C64>) -> f64 {
    let sites = lat.sites();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in sites {
        x_min = x_min.min(s.position[0]);
        x_max = x_max.max(s.position[0]);
        y_min = y_min.min(s.position[1]);
        y_max = y_max.max(s.position[1]);
    }
    let x_mid = 0.5 * (x_min + x_max);
    let y_mid = 0.5 * (y_min + y_max);
    let mut current = 0.0;
    for (i, j, v) in lat.hamiltonian().upper_entries() {
        if i == j {
            continue;
        }
        let pa = sites[i].position;
        let pb = sites[j].position;
        if 0.5 * (pa[0] + pb[0]) <= x_mid {
            continue;
        }
        // current flowing from the lower-y endpoint across the cut
        if pa[1] < y_mid && pb[1] >= y_mid {
            current += 2.0 * (state[j].conj() * v.conj() * state[i]).im;
        } else if pb[1] < y_mid && pa[1] >= y_mid {
            current += 2.0 * (state[i].conj() * v * state[j]).im;
        }
    }
    current
}

/// Among the given gaps, select the one whose edge modes circulate
/// counterclockwise, i.e. travel toward +y along the input boundary.
pub fn propagating_gap(lat: &Lattice, spec: &Spectrum, gaps: &[Gap]) -> Result<Gap> {
    let mut found = Vec::new();
    for gap in gaps {
        let classes = classify_edge_modes(lat, spec, gap);
        if classes.edge_indices.is_empty() {
            continue;
        }
        let mean: f64 = classes
            .edge_indices
            .iter()
            .map(|&n| circulation(lat, spec.vectors.column(n)))
            .sum::<f64>()
            / classes.edge_indices.len() as f64;
        if mean > 0.0 {
            found.push(*gap);
        }
    }
    match found.len() {
        1 => Ok(found[0]),
        0 => Err(Error::Degenerate(
            "no gap with counterclockwise edge modes".into(),
        )),
        _ => Err(Error::Degenerate(
            "multiple gaps with counterclockwise edge modes".into(),
        )),
    }
}
