//! Figures of merit for propagated two-photon states.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::biphoton::project_renormalize;
use crate::error::{Error, Result};
use crate::linalg::{flat_inner, frob2};

/// Squared overlap |<a|b>|^2 of two amplitude matrices under the flat
/// (elementwise) inner product.
pub fn fidelity(a: &Array2<C64>, b: &Array2<C64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "amplitude shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(flat_inner(a, b).norm_sqr())
}

/// Extract the sub-block of a mode-basis amplitude matrix on the listed modes.
pub fn mode_block(c: &Array2<C64>, modes: &[usize]) -> Result<Array2<C64>> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::Dimension(format!(
            "amplitude matrix not square: {:?}",
            c.dim()
        )));
    }
    if let Some(&bad) = modes.iter().find(|&&m| m >= n) {
        return Err(Error::Dimension(format!(
            "mode index {bad} out of range for {n} modes"
        )));
    }
    let k = modes.len();
    let mut out = Array2::<C64>::zeros((k, k));
    for (a, &m) in modes.iter().enumerate() {
        for (b, &l) in modes.iter().enumerate() {
            out[(a, b)] = c[(m, l)];
        }
    }
    Ok(out)
}

/// Probability weight of a mode-basis amplitude matrix inside the pair
/// subspace spanned by the listed modes.
pub fn edge_content(c: &Array2<C64>, modes: &[usize]) -> Result<f64> {
    Ok(frob2(&mode_block(c, modes)?))
}

/// Fidelity of the state projected onto the listed pair subspace and
/// renormalized, against the reference treated the same way.
pub fn transmitted_fidelity(
    state: &Array2<C64>,
    reference: &Array2<C64>,
    modes: &[usize],
) -> Result<f64> {
    let s = project_renormalize(mode_block(state, modes)?, f64::MIN_POSITIVE)?;
    let r = project_renormalize(mode_block(reference, modes)?, f64::MIN_POSITIVE)?;
    fidelity(&s.c, &r.c)
}

/// Measurement sweep result: the reference arrival point maximizing the
/// fidelity, with both fidelities and the retained pair weight there.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepOutcome {
    pub z_measure: f64,
    pub fidelity: f64,
    pub transmitted: f64,
    pub edge_weight: f64,
}

/// Sweep the clean reference over `z_center ± half` in steps of `step`,
/// maximizing the fidelity of the evolved state against it.
///
/// Both amplitude blocks live on the modes whose eigenvalues are given;
/// the input block must carry the state's full support, so the plain
/// fidelity needs no terms outside it.  The transmitted fidelity divides
/// by the evolved block's weight, which must not vanish.
pub fn measure_sweep(
    edge_values: &[f64],
    c_in_edge: &Array2<C64>,
    c_ev_edge: &Array2<C64>,
    z_center: f64,
    half: f64,
    step: f64,
) -> Result<SweepOutcome> {
    let k = edge_values.len();
    if c_in_edge.dim() != (k, k) || c_ev_edge.dim() != (k, k) {
        return Err(Error::Dimension(format!(
            "sweep blocks {:?} / {:?} do not match {k} modes",
            c_in_edge.dim(),
            c_ev_edge.dim()
        )));
    }
    if !(step > 0.0) || half < 0.0 {
        return Err(Error::Config(format!(
            "invalid sweep range: half {half}, step {step}"
        )));
    }
    let weight = frob2(c_ev_edge);
    if weight <= 0.0 {
        return Err(Error::EmptyProjection {
            weight,
            min: 0.0,
        });
    }
    let steps = (2.0 * half / step).round() as usize;
    let mut best = SweepOutcome {
        z_measure: f64::NAN,
        fidelity: -1.0,
        transmitted: 0.0,
        edge_weight: weight,
    };
    let mut phase = vec![C64::new(0.0, 0.0); k];
    for i in 0..=steps {
        let z = z_center - half + step * i as f64;
        for (p, &v) in phase.iter_mut().zip(edge_values) {
            *p = C64::from_polar(1.0, -v * z);
        }
        let mut overlap = C64::new(0.0, 0.0);
        for a in 0..k {
            for b in 0..k {
                let r = phase[a] * c_in_edge[(a, b)] * phase[b];
                overlap += r.conj() * c_ev_edge[(a, b)];
            }
        }
        let f = overlap.norm_sqr();
        if f > best.fidelity {
            best.fidelity = f;
            best.z_measure = z;
        }
    }
    best.transmitted = best.fidelity / weight;
    Ok(best)
}

/// One row of propagation output: input identity, arrival points, and the
/// four figures of merit.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub lattice_hash: String,
    pub recipe: String,
    pub z_forward: f64,
    pub z_measure: f64,
    pub fidelity: f64,
    pub transmitted: f64,
    pub edge_weight: f64,
    pub schmidt: f64,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str =
        "seed,lattice_hash,recipe,z_forward,z_measure,fidelity,transmitted,edge_weight,schmidt";

    pub fn csv_row(&self) -> String {
        use crate::io::fmt_f64 as f;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.lattice_hash,
            self.recipe,
            f(self.z_forward),
            f(self.z_measure),
            f(self.fidelity),
            f(self.transmitted),
            f(self.edge_weight),
            f(self.schmidt)
        )
    }
}
