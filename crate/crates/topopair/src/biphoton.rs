//! Two-photon input states and their mode-basis representation.
//!
//! A two-photon state on `M` sites is a symmetric amplitude matrix
//! `psi[a][b]` with unit Frobenius norm.  Input templates live on a short
//! window of the input edge, indexed `j, k = 1..window`; the eigenmode
//! picture works with `c = W psi W^T` where `W` holds conjugated eigenvector
//! components on the window sites, so that `psi = Phi c Phi^T` over the full
//! sample.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg::{frob2, singular_values, zgemm, Trans};
use crate::spectral::Spectrum;

/// Phase factor applied per site-index step along the edge window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `(-1)^(j+k)`: a half-turn of phase per site step.  On the honeycomb
    /// zigzag input chain this places the packet momentum at the chiral
    /// edge-branch crossing.
    AlternatingSign,
    /// `(-i)^(j+k)`: a quarter-turn of phase per site step, matching the
    /// chiral crossing on the flux-lattice input column.
    AlternatingQuarter,
}

/// Which combination of window indices the center-of-mass envelope uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeForm {
    /// Gaussian in `(j + k)/2` about the window center.
    HalfSum,
    /// Gaussian in `j + k` about the window center.
    FullSum,
}

/// Recipe for a Gaussian two-photon template on the input window.
///
/// `sigma_c` controls the center-of-mass spread, `sigma_a` the relative
/// coordinate spread: small `sigma_a` makes the photons bunch (correlated),
/// small `sigma_c` pins their midpoint (anti-correlated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRecipe {
    pub sigma_c: f64,
    pub sigma_a: f64,
    pub window: usize,
    pub phase: PhaseConvention,
    pub envelope: EnvelopeForm,
}

impl StateRecipe {
    /// Template family used on honeycomb samples.
    pub fn honeycomb(sigma_c: f64, sigma_a: f64) -> StateRecipe {
        StateRecipe {
            sigma_c,
            sigma_a,
            window: 20,
            phase: PhaseConvention::AlternatingSign,
            envelope: EnvelopeForm::HalfSum,
        }
    }

    /// Template family used on flux-lattice samples.
    pub fn square(sigma_c: f64, sigma_a: f64) -> StateRecipe {
        StateRecipe {
            sigma_c,
            sigma_a,
            window: 20,
            phase: PhaseConvention::AlternatingQuarter,
            envelope: EnvelopeForm::FullSum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config(format!(
                "input window needs at least 2 sites, got {}",
                self.window
            )));
        }
        for (name, v) in [("sigma_c", self.sigma_c), ("sigma_a", self.sigma_a)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn canonical_string(&self) -> String {
        format!(
            "recipe;sigma_c={};sigma_a={};window={};phase={};envelope={}",
            crate::io::fmt_f64(self.sigma_c),
            crate::io::fmt_f64(self.sigma_a),
            self.window,
            match self.phase {
                PhaseConvention::AlternatingSign => "sign",
                PhaseConvention::AlternatingQuarter => "quarter",
            },
            match self.envelope {
                EnvelopeForm::HalfSum => "half",
                EnvelopeForm::FullSum => "full",
            }
        )
    }
}

fn phase_factor(conv: PhaseConvention, n: i64) -> C64 {
    match conv {
        PhaseConvention::AlternatingSign => {
            if n % 2 == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(-1.0, 0.0)
            }
        }
        PhaseConvention::AlternatingQuarter => match n.rem_euclid(4) {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, -1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, 1.0),
        },
    }
}

/// Build the normalized window template for a recipe.
///
/// Entry `(j, k)` (1-based indices) is the phase factor times a Gaussian in
/// the relative coordinate `j - k` and in the center coordinate measured
/// from the window center `x0 = (window + 1)/2`.  Exponents are shifted by
/// their maximum before exponentiating, so arbitrarily narrow widths stay
/// representable; only a template whose largest exponent is not finite
/// fails with an underflow error.
pub fn template_window(recipe: &StateRecipe) -> Result<Array2<C64>> {
    recipe.validate()?;
    let m = recipe.window;
    let x0 = (m as f64 + 1.0) / 2.0;
    let mut expo = Array2::<f64>::zeros((m, m));
    let mut top = f64::NEG_INFINITY;
    for a in 0..m {
        for b in 0..m {
            let j = (a + 1) as f64;
            let k = (b + 1) as f64;
            let rel = (j - k) * (j - k) / (4.0 * recipe.sigma_a * recipe.sigma_a);
            let com = match recipe.envelope {
                EnvelopeForm::HalfSum => {
                    let d = x0 - 0.5 * (j + k);
                    d * d / (recipe.sigma_c * recipe.sigma_c)
                }
                EnvelopeForm::FullSum => {
                    let d = x0 - (j + k);
                    d * d / (recipe.sigma_c * recipe.sigma_c)
                }
            };
            let e = -rel - com;
            expo[(a, b)] = e;
            top = top.max(e);
        }
    }
    if !top.is_finite() {
        return Err(Error::Underflow { max: top });
    }
    let mut psi = Array2::<C64>::zeros((m, m));
    for a in 0..m {
        for b in 0..m {
            let mag = (expo[(a, b)] - top).exp();
            psi[(a, b)] = phase_factor(recipe.phase, (a + b + 2) as i64) * mag;
        }
    }
    let norm2 = frob2(&psi);
    let inv = 1.0 / norm2.sqrt();
    psi.mapv_inplace(|x| x * inv);
    Ok(psi)
}

/// A window template bound to concrete sites of a sample.
#[derive(Debug, Clone)]
pub struct BiphotonInput {
    pub recipe: StateRecipe,
    pub sites: Vec<usize>,
    pub psi: Array2<C64>,
}

/// Place a template on the first `window` sites of the input edge.
pub fn input_state(lat: &Lattice, recipe: &StateRecipe) -> Result<BiphotonInput> {
    let psi = template_window(recipe)?;
    let edge = lat.input_edge();
    if edge.len() < recipe.window {
        return Err(Error::Config(format!(
            "input edge has {} sites, window needs {}",
            edge.len(),
            recipe.window
        )));
    }
    Ok(BiphotonInput {
        recipe: *recipe,
        sites: edge[..recipe.window].to_vec(),
        psi,
    })
}

/// Matrix `W` with `W[n][e] = conj(Phi[site_e][mode_n])`, mapping window
/// amplitudes into mode amplitudes.  `modes` restricts the rows.
pub fn mode_transfer(spec: &Spectrum, sites: &[usize], modes: Option<&[usize]>) -> Array2<C64> {
    let nm = modes.map_or(spec.values.len(), |m| m.len());
    let mut w = Array2::<C64>::zeros((nm, sites.len()));
    for row in 0..nm {
        let n = modes.map_or(row, |m| m[row]);
        for (e, &site) in sites.iter().enumerate() {
            w[(row, e)] = spec.vectors[(site, n)].conj();
        }
    }
    w
}

/// Mode-basis amplitude matrix `c = W psi W^T`.
pub fn mode_amplitudes(w: &Array2<C64>, psi: &Array2<C64>) -> Array2<C64> {
    let wp = zgemm(Trans::No, w, Trans::No, psi);
    zgemm(Trans::No, &wp, Trans::Transpose, w)
}

/// A renormalized restriction of an amplitude matrix to a mode subset.
#[derive(Debug, Clone)]
pub struct Projected {
    pub c: Array2<C64>,
    /// Probability weight the subset carried before renormalization.
    pub weight: f64,
}

/// Renormalize a mode-restricted amplitude matrix, recording its weight.
/// The input must come from a unit-norm state, so the weight is its squared
/// Frobenius norm.
pub fn project_renormalize(c_sub: Array2<C64>, min_weight: f64) -> Result<Projected> {
    let weight = frob2(&c_sub);
    if weight < min_weight {
        return Err(Error::EmptyProjection {
            weight,
            min: min_weight,
        });
    }
    let inv = 1.0 / weight.sqrt();
    let mut c = c_sub;
    c.mapv_inplace(|x| x * inv);
    Ok(Projected { c, weight })
}

/// Joint probability map `|c[m][n]|^2` over a mode grid.
pub fn probability_map(c: &Array2<C64>) -> Array2<f64> {
    c.mapv(|x| x.norm_sqr())
}

/// Per-site probability marginal `R_i = sum_j |C_ij|^2` of the pair state
/// `C = W W^T`, computed from its thin factor without forming `C`.
pub fn factor_site_density(w: &Array2<C64>) -> Vec<f64> {
    let (m, r) = w.dim();
    // R_i = w_i^T A conj(w_i) with A = W^T conj(W)
    let mut a = Array2::<C64>::zeros((r, r));
    for j in 0..m {
        for p in 0..r {
            for q in 0..r {
                a[(p, q)] += w[(j, p)] * w[(j, q)].conj();
            }
        }
    }
    (0..m)
        .map(|i| {
            let mut s = C64::new(0.0, 0.0);
            for p in 0..r {
                for q in 0..r {
                    s += w[(i, p)] * a[(p, q)] * w[(i, q)].conj();
                }
            }
            s.re.max(0.0)
        })
        .collect()
}

/// Schmidt number `1 / tr(rho^2)` of the single-photon reduced state,
/// computed from the singular values of the amplitude matrix.  Equals 1 for
/// separable states; insensitive to overall normalization.
pub fn schmidt_number(amps: &Array2<C64>) -> Result<f64> {
    let s = singular_values(amps)?;
    let s2: f64 = s.iter().map(|x| x * x).sum();
    let s4: f64 = s.iter().map(|x| x * x * x * x).sum();
    if !(s4 > 0.0) {
        return Err(Error::Underflow { max: 0.0 });
    }
    Ok(s2 * s2 / s4)
}
