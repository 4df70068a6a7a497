//! Honeycomb ribbon with complex next-nearest-neighbour hopping.
//!
//! The sample is the union of `nx * ny` hexagons laid out brick-style:
//! hexagon `(ix, iy)` is centered at `x = 1.5 ix`, `y = sqrt(3) iy`, shifted
//! up by `sqrt(3)/2` in odd columns.  Vertices live on a half-integer grid,
//! so each one gets an exact integer key `(2x, 2y/sqrt(3))` and sites shared
//! between hexagons deduplicate exactly.  Zigzag boundaries run along the
//! propagation direction `y`; the top of the left one carries the input
//! window, and the short armchair boundaries cap the ribbon.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Lattice, LatticeModel, Site, Sublattice};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Ribbon geometry and couplings.
///
/// `kappa1` is the nearest-neighbour hop, `t2` the magnitude of the
/// next-nearest-neighbour hop and `phi` its chiral phase; `beta` is the
/// uniform on-site term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoneycombSpec {
    pub nx: usize,
    pub ny: usize,
    pub kappa1: f64,
    pub t2: f64,
    pub phi: f64,
    pub beta: f64,
}

impl Default for HoneycombSpec {
    fn default() -> Self {
        HoneycombSpec {
            nx: 10,
            ny: 90,
            kappa1: 1.0,
            t2: 0.2,
            phi: std::f64::consts::FRAC_PI_2,
            beta: 0.0,
        }
    }
}

/// Hexagon vertex offsets in key space, counterclockwise from the +x vertex.
const VERTEX_OFFSETS: [(i32, i32); 6] = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)];

/// Half of the nearest-neighbour displacements; the other half are the
/// negatives.
const NN_HALF: [(i32, i32); 3] = [(2, 0), (1, 1), (1, -1)];

/// One chiral triple of next-nearest-neighbour displacements (a 120 degree
/// rotation orbit); the reversed hops follow from Hermiticity.
const NNN_FORWARD: [(i32, i32); 3] = [(0, 2), (-3, -1), (3, -1)];

const SQRT3: f64 = 1.732_050_807_568_877_2;

impl HoneycombSpec {
    pub fn build(&self) -> Result<Lattice> {
        self.validate()?;
        let (nx, ny) = (self.nx as i32, self.ny as i32);

        // Collect vertices of every hexagon, counting how many hexagons each
        // vertex belongs to.  Interior vertices belong to three.
        let mut verts: BTreeMap<(i32, i32), u8> = BTreeMap::new();
        for ix in 0..nx {
            for iy in 0..ny {
                let ckx = 3 * ix;
                let cky = 2 * iy + (ix & 1);
                for (dx, dy) in VERTEX_OFFSETS {
                    *verts.entry((cky + dy, ckx + dx)).or_insert(0) += 1;
                }
            }
        }

        // BTreeMap order sorts by (y key, x key), fixing the site ids.
        let mut sites = Vec::with_capacity(verts.len());
        let mut boundary = Vec::with_capacity(verts.len());
        let mut index: BTreeMap<(i32, i32), usize> = BTreeMap::new();
        for (id, (&(ky, kx), &count)) in verts.iter().enumerate() {
            let sub = match kx.rem_euclid(3) {
                2 => Sublattice::A,
                1 => Sublattice::B,
                _ => {
                    return Err(Error::Dimension(format!(
                        "vertex key x = {kx} is not a honeycomb site"
                    )))
                }
            };
            sites.push(Site {
                position: [0.5 * kx as f64, 0.5 * SQRT3 * ky as f64],
                key: (kx, ky),
                sublattice: Some(sub),
            });
            boundary.push(count < 3);
            index.insert((ky, kx), id);
        }

        let expected = 2 * (self.nx * self.ny + self.nx + self.ny);
        if sites.len() != expected {
            return Err(Error::Dimension(format!(
                "hexagon union produced {} sites, expected {expected}",
                sites.len()
            )));
        }

        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        let mut nn_pairs = Vec::new();
        for i in 0..sites.len() {
            entries.push((i, i, C64::new(self.beta, 0.0)));
        }
        for (i, site) in sites.iter().enumerate() {
            let (kx, ky) = site.key;
            for (dx, dy) in NN_HALF {
                if let Some(&j) = index.get(&(ky + dy, kx + dx)) {
                    nn_pairs.push((i, j));
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    entries.push((a, b, C64::new(self.kappa1, 0.0)));
                }
            }
            // Forward chiral hops pick up phase +phi on sublattice A and
            // -phi on B; reversed hops are the conjugates.
            let sign = match site.sublattice {
                Some(Sublattice::A) => 1.0,
                _ => -1.0,
            };
            let amp = C64::from_polar(self.t2, sign * self.phi);
            for (dx, dy) in NNN_FORWARD {
                if let Some(&j) = index.get(&(ky + dy, kx + dx)) {
                    if i < j {
                        entries.push((i, j, amp));
                    } else {
                        entries.push((j, i, amp.conj()));
                    }
                }
            }
        }

        // Input window: the outer teeth of the long zigzag boundary at low
        // x, one per hexagon row (kx = -2), ordered by decreasing y.  The
        // mid-gap chiral branch carries most of its boundary weight on
        // these sites with alternating sign, so a staggered Gaussian on
        // the top of this chain rides the propagating gap down the
        // boundary.
        let mut input_edge = Vec::with_capacity(self.ny);
        for iy in (0..ny).rev() {
            input_edge.push(index[&(2 * iy, -2)]);
        }

        Lattice::assemble(
            LatticeModel::Honeycomb(*self),
            sites,
            entries,
            nn_pairs,
            boundary,
            input_edge,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 1 || self.ny < 1 {
            return Err(Error::Config(format!(
                "honeycomb sample needs at least one hexagon, got {}x{}",
                self.nx, self.ny
            )));
        }
        for (name, v) in [
            ("kappa1", self.kappa1),
            ("t2", self.t2),
            ("phi", self.phi),
            ("beta", self.beta),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("honeycomb {name} must be finite")));
            }
        }
        if self.kappa1 <= 0.0 {
            return Err(Error::Config(format!(
                "nearest-neighbour hop must be positive, got {}",
                self.kappa1
            )));
        }
        if self.t2 < 0.0 {
            return Err(Error::Config(format!(
                "next-nearest-neighbour hop must be nonnegative, got {}",
                self.t2
            )));
        }
        Ok(())
    }

    pub fn canonical_string(&self) -> String {
        format!(
            "honeycomb;nx={};ny={};kappa1={};t2={};phi={};beta={}",
            self.nx,
            self.ny,
            fmt_f64(self.kappa1),
            fmt_f64(self.t2),
            fmt_f64(self.phi),
            fmt_f64(self.beta)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(nx: usize, ny: usize) -> Lattice {
        HoneycombSpec {
            nx,
            ny,
            ..HoneycombSpec::default()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn site_counts() {
        for (nx, ny) in [(1, 1), (2, 2), (3, 5), (10, 90), (20, 90), (10, 180)] {
            let lat = build(nx, ny);
            assert_eq!(lat.dim(), 2 * (nx * ny + nx + ny), "{nx}x{ny}");
        }
    }

    #[test]
    fn bond_counts_small() {
        assert_eq!(build(1, 1).nn_pairs().len(), 6);
        // four hexagons sharing five edges
        assert_eq!(build(2, 2).nn_pairs().len(), 24 - 5);
    }

    #[test]
    fn nn_degree_two_or_three() {
        let lat = build(4, 7);
        let mut degree = vec![0usize; lat.dim()];
        for &(a, b) in lat.nn_pairs() {
            degree[a] += 1;
            degree[b] += 1;
        }
        for (i, &d) in degree.iter().enumerate() {
            assert!(d == 2 || d == 3, "site {i} degree {d}");
        }
        // an interior site exists and has full coordination
        assert!(degree
            .iter()
            .zip(lat.boundary_distance())
            .any(|(&d, &bd)| d == 3 && bd > 0));
    }

    #[test]
    fn bonds_connect_opposite_sublattices() {
        let lat = build(3, 4);
        for &(a, b) in lat.nn_pairs() {
            assert_ne!(lat.sites()[a].sublattice, lat.sites()[b].sublattice);
        }
    }

    #[test]
    fn nn_bond_length_is_unit() {
        let lat = build(3, 4);
        for &(a, b) in lat.nn_pairs() {
            let pa = lat.sites()[a].position;
            let pb = lat.sites()[b].position;
            let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chiral_hops_are_imaginary_at_quarter_turn() {
        let lat = build(3, 4);
        let t2 = 0.2;
        let mut seen_nnn = 0;
        for (i, j, v) in lat.hamiltonian().upper_entries() {
            if i == j {
                continue;
            }
            let same_sub = lat.sites()[i].sublattice == lat.sites()[j].sublattice;
            if same_sub {
                seen_nnn += 1;
                assert!(v.re.abs() < 1e-15, "chiral hop has real part {v}");
                assert!((v.im.abs() - t2).abs() < 1e-15);
                // span is sqrt(3)
                let pi = lat.sites()[i].position;
                let pj = lat.sites()[j].position;
                let d = ((pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2)).sqrt();
                assert!((d - SQRT3).abs() < 1e-12);
            } else {
                assert_eq!(v, C64::new(1.0, 0.0));
            }
        }
        assert!(seen_nnn > 0);
    }

    #[test]
    fn input_edge_is_outer_zigzag_subchain() {
        let lat = build(10, 90);
        let edge = lat.input_edge();
        assert_eq!(edge.len(), 90);
        let x_min = lat
            .sites()
            .iter()
            .map(|s| s.position[0])
            .fold(f64::INFINITY, f64::min);
        for &i in edge {
            // outer teeth of the low-x boundary, one per hexagon row
            assert_eq!(lat.sites()[i].sublattice, Some(Sublattice::B));
            assert_eq!(lat.boundary_distance()[i], 0);
            assert!((lat.sites()[i].position[0] - x_min).abs() < 1e-12);
        }
        // ordered by decreasing y in sqrt(3) steps from the top row
        let y_max = lat
            .sites()
            .iter()
            .map(|s| s.position[1])
            .fold(f64::NEG_INFINITY, f64::max);
        // the top tooth sits one zigzag period below the ribbon's
        // highest site (the odd columns overshoot by half a cell)
        assert!(lat.sites()[edge[0]].position[1] > y_max - SQRT3 - 1e-12);
        for w in edge.windows(2) {
            let dy = lat.sites()[w[0]].position[1] - lat.sites()[w[1]].position[1];
            assert!((dy - SQRT3).abs() < 1e-12, "tooth spacing {dy}");
        }
    }

    #[test]
    fn boundary_distance_reaches_interior() {
        let lat = build(10, 90);
        let max = lat.boundary_distance().iter().max().unwrap();
        assert!(*max >= 5, "ribbon interior too shallow: {max}");
        for (i, site) in lat.sites().iter().enumerate() {
            // perimeter keys sit at extremes of x
            if site.key.0 <= 0 || site.key.0 >= 28 {
                assert_eq!(lat.boundary_distance()[i], 0);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HoneycombSpec {
            nx: 0,
            ..HoneycombSpec::default()
        }
        .build()
        .is_err());
        assert!(HoneycombSpec {
            kappa1: -1.0,
            ..HoneycombSpec::default()
        }
        .build()
        .is_err());
        assert!(HoneycombSpec {
            t2: f64::NAN,
            ..HoneycombSpec::default()
        }
        .build()
        .is_err());
    }
}
