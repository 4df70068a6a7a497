//! Propagation under `exp(-izH)`.
//!
//! Two interchangeable backends: exact application through a precomputed
//! eigendecomposition, and a Chebyshev polynomial expansion that only needs
//! sparse matrix products.  The polynomial route is what makes disorder
//! ensembles affordable: the two-photon amplitude matrix factorizes as
//! `psi = Z Z^T`, so evolving the thin factor `Z` evolves the state.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{zgemm, SparseHermitian, Trans};
use crate::spectral::Spectrum;

/// `exp(-izH) x` for a block of column vectors, through the eigenbasis.
pub fn eigen_columns(spec: &Spectrum, z: f64, x: &Array2<C64>) -> Array2<C64> {
    let mut modes = zgemm(Trans::Adjoint, &spec.vectors, Trans::No, x);
    for (n, mut row) in modes.outer_iter_mut().enumerate() {
        let ph = C64::from_polar(1.0, -z * spec.values[n]);
        for v in row.iter_mut() {
            *v *= ph;
        }
    }
    zgemm(Trans::No, &spec.vectors, Trans::No, &modes)
}

/// Evolve a symmetric two-photon amplitude matrix: `U psi U^T`.
pub fn eigen_amplitudes(spec: &Spectrum, z: f64, psi: &Array2<C64>) -> Array2<C64> {
    let half = eigen_columns(spec, z, psi);
    let half_t = half.t().as_standard_layout().into_owned();
    eigen_columns(spec, z, &half_t).t().as_standard_layout().into_owned()
}

/// Bessel functions `J_0(x) .. J_K(x)` by Miller's downward recurrence,
/// truncated where the dropped tail is below `tail_tol` in absolute sum.
pub fn bessel_sequence(x: f64, tail_tol: f64) -> Vec<f64> {
    assert!(x >= 0.0, "bessel_sequence needs x >= 0");
    if x == 0.0 {
        return vec![1.0];
    }
    let kmax = (x + 15.0 * x.cbrt() + 60.0).ceil() as usize;
    let start = kmax + 80;
    let mut f = vec![0.0_f64; start + 2];
    f[start + 1] = 0.0;
    f[start] = 1e-300;
    for k in (1..=start).rev() {
        let next = (2.0 * k as f64 / x) * f[k] - f[k + 1];
        f[k - 1] = next;
        if next.abs() > 1e280 {
            let s = 1e-280;
            for v in f[k - 1..].iter_mut() {
                *v *= s;
            }
        }
    }
    let mut norm = f[0];
    let mut k = 2;
    while k <= start {
        norm += 2.0 * f[k];
        k += 2;
    }
    let inv = 1.0 / norm;
    for v in f.iter_mut() {
        *v *= inv;
    }
    // drop the negligible tail
    let mut tail = 0.0;
    let mut keep = f.len();
    for (i, v) in f.iter().enumerate().rev() {
        tail += v.abs();
        if tail > tail_tol {
            keep = i + 2;
            break;
        }
    }
    f.truncate(keep.min(f.len()));
    f
}

const MAX_TERMS: usize = 200_000;

/// `exp(-izH) x` by Chebyshev expansion over the Gershgorin interval of
/// `H`.  `tol` bounds the truncated coefficient tail.
pub fn chebyshev_columns(
    h: &SparseHermitian,
    z: f64,
    x: &Array2<C64>,
    tol: f64,
) -> Result<Array2<C64>> {
    if x.nrows() != h.dim() {
        return Err(Error::Dimension(format!(
            "propagating {} rows through a {}-site Hamiltonian",
            x.nrows(),
            h.dim()
        )));
    }
    let x = x.as_standard_layout().into_owned();
    if z == 0.0 {
        return Ok(x);
    }
    let (lo, hi) = h.gershgorin();
    let center = 0.5 * (lo + hi);
    let rho = (0.5 * (hi - lo)).max(1e-12) * (1.0 + 1e-12);
    let a = z * rho;
    let bessel = bessel_sequence(a.abs(), 0.1 * tol);
    if bessel.len() > MAX_TERMS {
        return Err(Error::Convergence(format!(
            "polynomial propagator needs {} terms for z*rho = {a}",
            bessel.len()
        )));
    }
    let hs = h.scaled_shifted(center, rho);
    // (-i)^k, folded with the parity flip for negative arguments
    let unit = |k: usize| -> C64 {
        let base = match k % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, -1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, 1.0),
        };
        if a < 0.0 && k % 2 == 1 {
            -base
        } else {
            base
        }
    };
    let dims = x.dim();
    let mut out = Array2::<C64>::zeros(dims);
    let mut t_prev = x.clone();
    out.zip_mut_with(&t_prev, |o, t| *o += t * bessel[0]);
    if bessel.len() > 1 {
        let mut t_cur = Array2::<C64>::zeros(dims);
        hs.spmm(&t_prev, &mut t_cur);
        let c1 = unit(1) * (2.0 * bessel[1]);
        out.zip_mut_with(&t_cur, |o, t| *o += t * c1);
        let mut scratch = Array2::<C64>::zeros(dims);
        for (k, &jk) in bessel.iter().enumerate().skip(2) {
            hs.spmm(&t_cur, &mut scratch);
            // t_prev becomes T_k = 2 H~ T_{k-1} - T_{k-2}
            t_prev.zip_mut_with(&scratch, |p, s| *p = 2.0 * s - *p);
            std::mem::swap(&mut t_prev, &mut t_cur);
            let ck = unit(k) * (2.0 * jk);
            out.zip_mut_with(&t_cur, |o, t| *o += t * ck);
        }
    }
    let phase = C64::from_polar(1.0, -z * center);
    out.mapv_inplace(|v| v * phase);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SquareSpec;
    use crate::linalg::frob2;
    use crate::spectral::diagonalize;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    /// Ascending power series, reliable for small arguments; an oracle
    /// independent of the downward recurrence.
    fn bessel_series(k: usize, x: f64) -> f64 {
        let mut term = (0.5 * x).powi(k as i32);
        for m in 1..=k {
            term /= m as f64;
        }
        let mut sum = term;
        for m in 1..60 {
            term *= -(0.25 * x * x) / (m as f64 * (m + k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn miller_matches_power_series() {
        // the alternating series cancels catastrophically for large x, so
        // loosen the tolerance as the argument grows
        for &(x, tol) in &[(0.5, 1e-14), (1.0, 1e-14), (5.0, 1e-13), (10.0, 1e-12), (20.0, 1e-8)]
        {
            let j = bessel_sequence(x, 1e-16);
            for k in 0..25.min(j.len()) {
                let want = bessel_series(k, x);
                assert!(
                    (j[k] - want).abs() < tol,
                    "J_{k}({x}) = {} want {want}",
                    j[k]
                );
            }
        }
    }

    #[test]
    fn bessel_known_values() {
        let j = bessel_sequence(1.0, 1e-16);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        let j10 = bessel_sequence(10.0, 1e-16);
        assert!((j10[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
    }

    fn random_state(n: usize, cols: usize, seed: u64) -> Array2<C64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::<C64>::zeros((n, cols));
        for v in x.iter_mut() {
            *v = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
        x
    }

    #[test]
    fn chebyshev_matches_eigen_route() {
        let lat = SquareSpec {
            nx: 5,
            ny: 8,
            ..SquareSpec::default()
        }
        .build()
        .unwrap();
        let spec = diagonalize(&lat).unwrap();
        let x = random_state(40, 3, 11);
        for &z in &[0.1, 3.0, 47.0, -12.5] {
            let exact = eigen_columns(&spec, z, &x);
            let cheb = chebyshev_columns(lat.hamiltonian(), z, &x, 1e-13).unwrap();
            let err = exact
                .iter()
                .zip(cheb.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0_f64, f64::max);
            assert!(err < 1e-11, "z = {z}: {err}");
        }
    }

    #[test]
    fn chebyshev_long_evolution() {
        let lat = SquareSpec {
            nx: 6,
            ny: 10,
            ..SquareSpec::default()
        }
        .build()
        .unwrap();
        let spec = diagonalize(&lat).unwrap();
        let x = random_state(60, 2, 5);
        let z = 450.0;
        let exact = eigen_columns(&spec, z, &x);
        let cheb = chebyshev_columns(lat.hamiltonian(), z, &x, 1e-13).unwrap();
        let err = exact
            .iter()
            .zip(cheb.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn evolution_is_unitary() {
        let lat = SquareSpec {
            nx: 5,
            ny: 8,
            ..SquareSpec::default()
        }
        .build()
        .unwrap();
        let spec = diagonalize(&lat).unwrap();
        let x = random_state(40, 1, 3);
        let n0 = frob2(&x);
        let y = eigen_columns(&spec, 17.3, &x);
        assert!((frob2(&y) - n0).abs() < 1e-10);
        let yc = chebyshev_columns(lat.hamiltonian(), 17.3, &x, 1e-13).unwrap();
        assert!((frob2(&yc) - n0).abs() < 1e-10);
    }

    #[test]
    fn zero_time_is_identity() {
        let lat = SquareSpec {
            nx: 4,
            ny: 4,
            ..SquareSpec::default()
        }
        .build()
        .unwrap();
        let x = random_state(16, 2, 1);
        let y = chebyshev_columns(lat.hamiltonian(), 0.0, &x, 1e-13).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn amplitude_evolution_preserves_symmetry() {
        let lat = SquareSpec {
            nx: 4,
            ny: 5,
            ..SquareSpec::default()
        }
        .build()
        .unwrap();
        let spec = diagonalize(&lat).unwrap();
        let mut psi = Array2::<C64>::zeros((20, 20));
        let x = random_state(20, 20, 9);
        for i in 0..20 {
            for j in 0..20 {
                psi[(i, j)] = x[(i, j)] + x[(j, i)];
            }
        }
        let norm = frob2(&psi).sqrt();
        psi.mapv_inplace(|v| v / norm);
        let out = eigen_amplitudes(&spec, 2.5, &psi);
        assert!((frob2(&out) - 1.0).abs() < 1e-10);
        for i in 0..20 {
            for j in 0..i {
                assert!((out[(i, j)] - out[(j, i)]).norm() < 1e-10);
            }
        }
    }
}
