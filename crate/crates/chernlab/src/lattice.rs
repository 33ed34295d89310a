//! Bravais-lattice geometry in lattice coefficients.
//!
//! Every point is stored through its integer coefficients `(g1, g2)` in the
//! basis `a1, a2`. Norms and wedge products act on the coefficients, never on
//! the Cartesian embedding.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Primitive vectors of the lattice in Cartesian units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis {
    pub a1: [f64; 2],
    pub a2: [f64; 2],
}

impl LatticeBasis {
    pub fn new(a1: [f64; 2], a2: [f64; 2]) -> Result<Self> {
        let det = a1[0] * a2[1] - a1[1] * a2[0];
        if !(det.abs() > 1e-14) || !det.is_finite() {
            return invalid("lattice vectors are linearly dependent");
        }
        Ok(Self { a1, a2 })
    }

    pub fn square() -> Self {
        Self { a1: [1.0, 0.0], a2: [0.0, 1.0] }
    }

    /// Honeycomb Bravais vectors `a1 = (3/2, √3/2)`, `a2 = (-3/2, √3/2)`.
    pub fn honeycomb() -> Self {
        let h = 3f64.sqrt() / 2.0;
        Self { a1: [1.5, h], a2: [-1.5, h] }
    }

    /// Signed area `a1 × a2` of the unit cell.
    pub fn cell_area(&self) -> f64 {
        self.a1[0] * self.a2[1] - self.a1[1] * self.a2[0]
    }

    /// Dual vectors `b1, b2` with `ai · bj = 2π δij`.
    pub fn dual(&self) -> [[f64; 2]; 2] {
        let det = self.cell_area();
        let s = 2.0 * std::f64::consts::PI / det;
        [
            [s * self.a2[1], -s * self.a2[0]],
            [-s * self.a1[1], s * self.a1[0]],
        ]
    }

    pub fn cartesian(&self, p: LatticePoint) -> [f64; 2] {
        let (x, y) = (p.g1 as f64, p.g2 as f64);
        [x * self.a1[0] + y * self.a2[0], x * self.a1[1] + y * self.a2[1]]
    }
}

/// A point of Γ given by its coefficients in the `a1, a2` basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub g1: i64,
    pub g2: i64,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { g1: 0, g2: 0 };

    pub const fn new(g1: i64, g2: i64) -> Self {
        Self { g1, g2 }
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(self) -> f64 {
        ((self.g1 * self.g1 + self.g2 * self.g2) as f64).sqrt()
    }

    pub fn norm_sq(self) -> i64 {
        self.g1 * self.g1 + self.g2 * self.g2
    }

    pub fn norm_inf(self) -> i64 {
        self.g1.abs().max(self.g2.abs())
    }
}

impl Add for LatticePoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.g1 + o.g1, self.g2 + o.g2)
    }
}

impl Sub for LatticePoint {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.g1 - o.g1, self.g2 - o.g2)
    }
}

impl Neg for LatticePoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.g1, -self.g2)
    }
}

impl Mul<i64> for LatticePoint {
    type Output = Self;
    fn mul(self, k: i64) -> Self {
        Self::new(self.g1 * k, self.g2 * k)
    }
}

/// `γ ∧ ξ = γ2 ξ1 − γ1 ξ2`.
pub fn wedge(gamma: LatticePoint, xi: LatticePoint) -> i64 {
    gamma.g2 * xi.g1 - gamma.g1 * xi.g2
}

/// Centered square box Λ_L, sites in row-major order over `(g1, g2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    side: usize,
    lo: i64,
    sites: Vec<LatticePoint>,
}

impl LatticeBox {
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 {
            return invalid("box side must be positive");
        }
        let lo = -((side / 2) as i64);
        let hi = lo + side as i64;
        let sites = (lo..hi)
            .flat_map(|g1| (lo..hi).map(move |g2| LatticePoint::new(g1, g2)))
            .collect();
        Ok(Self { side, lo, sites })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Smallest coefficient along each axis.
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Largest coefficient along each axis.
    pub fn hi(&self) -> i64 {
        self.lo + self.side as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[LatticePoint] {
        &self.sites
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        let hi = self.hi();
        p.g1 >= self.lo && p.g1 <= hi && p.g2 >= self.lo && p.g2 <= hi
    }

    /// Position of `p` in the site ordering.
    pub fn rank(&self, p: LatticePoint) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let l = self.side as i64;
        Some(((p.g1 - self.lo) * l + (p.g2 - self.lo)) as usize)
    }

    /// Representative of `p` modulo `L Γ` inside the box.
    pub fn wrap(&self, p: LatticePoint) -> LatticePoint {
        let l = self.side as i64;
        let w = |g: i64| (g - self.lo).rem_euclid(l) + self.lo;
        LatticePoint::new(w(p.g1), w(p.g2))
    }

    /// Shortest representative of `p` modulo `L Γ` in the sup norm.
    pub fn minimal_image(&self, p: LatticePoint) -> LatticePoint {
        let l = self.side as i64;
        let m = |g: i64| {
            let r = g.rem_euclid(l);
            if 2 * r > l {
                r - l
            } else {
                r
            }
        };
        LatticePoint::new(m(p.g1), m(p.g2))
    }

    /// `|ξ − η|_∞` distance from `p` to the complement of the box.
    pub fn distance_to_outside(&self, p: LatticePoint) -> i64 {
        let hi = self.hi();
        (p.g1 - self.lo + 1)
            .min(hi - p.g1 + 1)
            .min(p.g2 - self.lo + 1)
            .min(hi - p.g2 + 1)
    }
}

pub fn box_sites(side: usize) -> Result<LatticeBox> {
    LatticeBox::new(side)
}

/// Sites of Λ_L within sup-distance `r` of Γ ∖ Λ_L, in box order.
pub fn inner_boundary(lbox: &LatticeBox, r: usize) -> Vec<LatticePoint> {
    lbox.sites()
        .iter()
        .copied()
        .filter(|&p| lbox.distance_to_outside(p) <= r as i64)
        .collect()
}

/// The centered core Λ_{(L+2r)/3}; requires `L ∈ 3ℕ* + 4r`.
pub fn core_sites(lbox: &LatticeBox, r: usize) -> Result<LatticeBox> {
    let l = lbox.side();
    if r == 0 {
        return invalid("range r must be positive");
    }
    if l < 4 * r + 3 || (l - 4 * r) % 3 != 0 {
        return invalid(format!("box side {l} is not in 3N*+{}", 4 * r));
    }
    LatticeBox::new((l + 2 * r) / 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wedge_values() {
        assert_eq!(wedge(LatticePoint::new(1, 0), LatticePoint::new(0, 1)), -1);
        assert_eq!(wedge(LatticePoint::new(2, 3), LatticePoint::new(5, 7)), 1);
        let g = LatticePoint::new(4, -9);
        assert_eq!(wedge(g, g), 0);
    }

    #[test]
    fn small_boxes() {
        assert!(LatticeBox::new(0).is_err());
        assert_eq!(LatticeBox::new(1).unwrap().sites(), &[LatticePoint::ORIGIN]);
        let b2 = LatticeBox::new(2).unwrap();
        assert_eq!((b2.lo(), b2.hi()), (-1, 0));
        assert_eq!(b2.len(), 4);
        let b3 = LatticeBox::new(3).unwrap();
        assert_eq!((b3.lo(), b3.hi(), b3.len()), (-1, 1, 9));
        assert_eq!(b3.sites()[1], LatticePoint::new(-1, 0));
    }

    #[test]
    fn rank_matches_ordering() {
        let b = LatticeBox::new(6).unwrap();
        for (i, &p) in b.sites().iter().enumerate() {
            assert_eq!(b.rank(p), Some(i));
        }
        assert_eq!(b.rank(LatticePoint::new(3, 0)), None);
    }

    fn brute_boundary(b: &LatticeBox, r: i64) -> usize {
        b.sites()
            .iter()
            .filter(|&&p| {
                (-r..=r).any(|d1| {
                    (-r..=r).any(|d2| !b.contains(p + LatticePoint::new(d1, d2)))
                })
            })
            .count()
    }

    #[test]
    fn boundary_counts() {
        let b3 = LatticeBox::new(3).unwrap();
        assert_eq!(inner_boundary(&b3, 1).len(), 8);
        let b5 = LatticeBox::new(5).unwrap();
        assert_eq!(inner_boundary(&b5, 1).len(), 16);
        assert_eq!(inner_boundary(&b5, 2).len(), 24);
        assert_eq!(brute_boundary(&b5, 2), 24);
    }

    #[test]
    fn core_sides() {
        let c = |l, r| core_sites(&LatticeBox::new(l).unwrap(), r).map(|b| b.side());
        assert_eq!(c(7, 1).unwrap(), 3);
        assert_eq!(c(13, 1).unwrap(), 5);
        assert_eq!(c(10, 1).unwrap(), 4);
        assert!(c(11, 1).is_err());
        assert!(c(8, 1).is_err());
        assert!(c(4, 1).is_err());
        assert_eq!(c(11, 2).unwrap(), 5);
    }

    #[test]
    fn core_and_boundary_disjoint() {
        for r in 1..=3usize {
            for l in 1..=19usize {
                let b = LatticeBox::new(l).unwrap();
                let Ok(core) = core_sites(&b, r) else { continue };
                let bd = inner_boundary(&b, r);
                assert!(core.sites().iter().all(|&p| b.contains(p)));
                if l > 2 * r + core.side() {
                    assert!(core.sites().iter().all(|p| !bd.contains(p)), "L={l} r={r}");
                }
            }
        }
    }

    #[test]
    fn dual_pairing() {
        for basis in [LatticeBasis::square(), LatticeBasis::honeycomb()] {
            let b = basis.dual();
            let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
            let tau = 2.0 * std::f64::consts::PI;
            assert!((dot(basis.a1, b[0]) - tau).abs() < 1e-12);
            assert!((dot(basis.a2, b[1]) - tau).abs() < 1e-12);
            assert!(dot(basis.a1, b[1]).abs() < 1e-12);
            assert!(dot(basis.a2, b[0]).abs() < 1e-12);
        }
        assert!(LatticeBasis::new([1.0, 2.0], [2.0, 4.0]).is_err());
    }

    fn pt() -> impl Strategy<Value = LatticePoint> {
        (-50i64..50, -50i64..50).prop_map(|(a, b)| LatticePoint::new(a, b))
    }

    proptest! {
        #[test]
        fn wedge_antisymmetric(g in pt(), x in pt()) {
            prop_assert_eq!(wedge(g, x), -wedge(x, g));
            prop_assert_eq!(wedge(g - x, x), wedge(g, x));
        }

        #[test]
        fn norms_use_coefficients(g in pt()) {
            prop_assert_eq!(g.norm_inf(), g.g1.abs().max(g.g2.abs()));
            prop_assert!((g.norm() - ((g.g1 * g.g1 + g.g2 * g.g2) as f64).sqrt()).abs() < 1e-12);
        }

        #[test]
        fn boundary_partition(l in 1usize..14, r in 1usize..4) {
            let b = LatticeBox::new(l).unwrap();
            let bd = inner_boundary(&b, r);
            prop_assert_eq!(bd.len(), brute_boundary(&b, r as i64));
            for &p in b.sites() {
                if !bd.contains(&p) {
                    prop_assert!(b.distance_to_outside(p) > r as i64);
                }
            }
        }

        #[test]
        fn wrap_is_periodic(g in pt(), l in 1usize..12) {
            let b = LatticeBox::new(l).unwrap();
            let w = b.wrap(g);
            prop_assert!(b.contains(w));
            let d = g - w;
            prop_assert_eq!(d.g1.rem_euclid(l as i64), 0);
            prop_assert_eq!(d.g2.rem_euclid(l as i64), 0);
            let m = b.minimal_image(g);
            prop_assert!(2 * m.norm_inf() <= l as i64);
        }
    }
}
