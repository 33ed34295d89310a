//! Finite-range, magnetic-periodic tight-binding Hamiltonians on ℓ²(Γ; ℂⁿ).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{wedge, LatticeBasis, LatticeBox, LatticePoint};
use crate::linalg::{hermiticity_defect, max_abs, spectral_norm};

/// Tolerance for Hermiticity and covariance checks.
pub const KERNEL_TOL: f64 = 1e-12;

/// Anything that provides n×n blocks `H(γ, ξ)` over Γ.
pub trait LatticeKernel {
    fn orbitals(&self) -> usize;
    fn flux(&self) -> f64;
    fn block(&self, gamma: LatticePoint, xi: LatticePoint) -> Mat<c64>;
}

/// Hopping data `H₀(0, δ)` for `|δ|_∞ ≤ r`, plus the flux `B`.
#[derive(Clone, Debug)]
pub struct HoppingModel {
    basis: LatticeBasis,
    n: usize,
    r: usize,
    hoppings: BTreeMap<LatticePoint, Mat<c64>>,
    flux: f64,
}

impl HoppingModel {
    /// Builds a model; displacements given only one way are completed by adjoints.
    pub fn new(
        basis: LatticeBasis,
        n: usize,
        r: usize,
        hoppings: impl IntoIterator<Item = (LatticePoint, Mat<c64>)>,
        flux: f64,
    ) -> Result<Self> {
        if n == 0 || r == 0 {
            return invalid("orbital count and range must be positive");
        }
        if !flux.is_finite() {
            return invalid("flux must be finite");
        }
        let mut map: BTreeMap<LatticePoint, Mat<c64>> = BTreeMap::new();
        for (d, m) in hoppings {
            if m.nrows() != n || m.ncols() != n {
                return invalid(format!("hopping at {d:?} is not {n}x{n}"));
            }
            if d.norm_inf() > r as i64 {
                return invalid(format!("hopping at {d:?} exceeds range {r}"));
            }
            if map.insert(d, m).is_some() {
                return invalid(format!("duplicate hopping at {d:?}"));
            }
        }
        let keys: Vec<_> = map.keys().copied().collect();
        for d in keys {
            if !map.contains_key(&-d) {
                let adj = map[&d].adjoint().to_owned();
                map.insert(-d, adj);
            }
        }
        for (d, m) in &map {
            let back = &map[&-*d];
            let diff = m - back.adjoint();
            if max_abs(diff.as_ref()) > KERNEL_TOL * (1.0 + max_abs(m.as_ref())) {
                return invalid(format!("hoppings at {d:?} and its negative are not adjoint"));
            }
        }
        if let Some(h0) = map.get(&LatticePoint::ORIGIN) {
            if hermiticity_defect(h0.as_ref()) > KERNEL_TOL {
                return invalid("on-site block is not Hermitian");
            }
        }
        Ok(Self { basis, n, r, hoppings: map, flux })
    }

    pub fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn range(&self) -> usize {
        self.r
    }

    pub fn flux(&self) -> f64 {
        self.flux
    }

    pub fn hoppings(&self) -> &BTreeMap<LatticePoint, Mat<c64>> {
        &self.hoppings
    }

    pub fn hopping(&self, d: LatticePoint) -> Option<&Mat<c64>> {
        self.hoppings.get(&d)
    }

    /// Magnetic phase `e^{iB γ∧ξ}` attached to the bond `γ → ξ`.
    pub fn phase(&self, gamma: LatticePoint, xi: LatticePoint) -> c64 {
        if self.flux == 0.0 {
            return c64::new(1.0, 0.0);
        }
        c64::from_polar(1.0, self.flux * wedge(gamma, xi) as f64)
    }

    /// `H₀(γ, ξ) = e^{iB γ∧ξ} H₀(0, ξ − γ)`.
    pub fn kernel(&self, gamma: LatticePoint, xi: LatticePoint) -> Mat<c64> {
        match self.hoppings.get(&(xi - gamma)) {
            Some(h) => {
                let ph = self.phase(gamma, xi);
                Mat::from_fn(self.n, self.n, |i, j| h[(i, j)] * ph)
            }
            None => Mat::zeros(self.n, self.n),
        }
    }

    /// Smallest `q ≤ 1000` with `qB ∈ 2πℤ`.
    pub fn flux_period(&self) -> Option<usize> {
        let x = self.flux / (2.0 * PI);
        (1..=1000usize).find(|&q| {
            let y = x * q as f64;
            (y - y.round()).abs() < 1e-10
        })
    }

    /// `sup_γ Σ_ξ ‖H₀(γ, ξ)‖`, a bound on the spectral radius of every restriction.
    pub fn row_norm_bound(&self) -> f64 {
        self.hoppings.values().map(|h| spectral_norm(h.as_ref())).sum()
    }

    pub fn max_hopping_distance(&self) -> f64 {
        self.hoppings
            .keys()
            .filter(|d| **d != LatticePoint::ORIGIN)
            .map(|d| d.norm())
            .fold(0.0, f64::max)
    }
}

impl LatticeKernel for HoppingModel {
    fn orbitals(&self) -> usize {
        self.n
    }
    fn flux(&self) -> f64 {
        self.flux
    }
    fn block(&self, gamma: LatticePoint, xi: LatticePoint) -> Mat<c64> {
        self.kernel(gamma, xi)
    }
}

/// Checks `(T_γ^B)* H T_γ^B = H` on Λ_L for the generators `a1, a2`.
///
/// Equivalently `H(x+γ, y+γ) = e^{−iB γ∧(x−y)} H(x, y)` for all `x, y ∈ Λ_L`.
pub fn check_magnetic_periodicity(kernel: &impl LatticeKernel, side: usize) -> bool {
    let Ok(lbox) = LatticeBox::new(side) else { return false };
    let b = kernel.flux();
    let gens = [LatticePoint::new(1, 0), LatticePoint::new(0, 1)];
    let mut worst = 0.0f64;
    for &g in &gens {
        for &x in lbox.sites() {
            for &y in lbox.sites() {
                let lhs = kernel.block(x + g, y + g);
                let rhs = kernel.block(x, y);
                let ph = c64::from_polar(1.0, -b * wedge(g, x - y) as f64);
                for i in 0..lhs.nrows() {
                    for j in 0..lhs.ncols() {
                        worst = worst.max((lhs[(i, j)] - ph * rhs[(i, j)]).norm());
                    }
                }
            }
        }
    }
    worst < KERNEL_TOL
}

/// Which NN vector carries the B orbital of the unit cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimerization {
    D1,
    D2,
    #[default]
    D3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaldaneParams {
    pub t1: f64,
    pub t2: f64,
    pub phi: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(default)]
    pub dimerization: Dimerization,
}

impl HaldaneParams {
    /// `t1 = 1, t2 = 1/(3√3), φ = π/2, M = 0`.
    pub fn worked_example() -> Self {
        Self { t1: 1.0, t2: 1.0 / (3.0 * 3f64.sqrt()), phi: PI / 2.0, m: 0.0, dimerization: Dimerization::D3 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 >= 0.0) || !(self.t2 >= 0.0) || !self.phi.is_finite() || !self.m.is_finite() {
            return invalid("Haldane parameters need t1 >= 0, t2 >= 0 and finite phi, M");
        }
        Ok(())
    }
}

/// Haldane model as a two-orbital, range-one model over Γ = span{a1, a2}.
///
/// Orbital 0 is sublattice A at γ, orbital 1 is sublattice B at γ + ν.
/// The A→B nearest-neighbour bonds sit at displacements `d_k − ν`
/// (expressed in `a1, a2`), and next-nearest hops along `+a_i` carry
/// `t2 e^{−iφ}` on A and `t2 e^{iφ}` on B.
pub fn haldane_model(p: &HaldaneParams) -> Result<HoppingModel> {
    p.validate()?;
    let (a1, a2) = (LatticePoint::new(1, 0), LatticePoint::new(0, 1));
    let a3 = -(a1 + a2);
    // NN vectors in lattice coefficients relative to d3: d2 − d3 = a1, d1 − d3 = −a2.
    let rel = |nu: Dimerization| -> [LatticePoint; 3] {
        let d3 = LatticePoint::ORIGIN;
        let d2 = a1;
        let d1 = -a2;
        let shift = match nu {
            Dimerization::D1 => d1,
            Dimerization::D2 => d2,
            Dimerization::D3 => d3,
        };
        [d1 - shift, d2 - shift, d3 - shift]
    };
    let nnn_a = c64::from_polar(p.t2, -p.phi);
    let nnn_b = c64::from_polar(p.t2, p.phi);
    let mut acc: BTreeMap<LatticePoint, Mat<c64>> = BTreeMap::new();
    let mut add = |d: LatticePoint, i: usize, j: usize, v: c64| {
        let m = acc.entry(d).or_insert_with(|| Mat::zeros(2, 2));
        m[(i, j)] += v;
    };
    add(LatticePoint::ORIGIN, 0, 0, c64::new(p.m, 0.0));
    add(LatticePoint::ORIGIN, 1, 1, c64::new(-p.m, 0.0));
    for d in rel(p.dimerization) {
        add(d, 0, 1, c64::new(p.t1, 0.0));
        add(-d, 1, 0, c64::new(p.t1, 0.0));
    }
    for a in [a1, a2, a3] {
        add(a, 0, 0, nnn_a);
        add(a, 1, 1, nnn_b);
        add(-a, 0, 0, nnn_a.conj());
        add(-a, 1, 1, nnn_b.conj());
    }
    HoppingModel::new(LatticeBasis::honeycomb(), 2, 1, acc, 0.0)
}

/// One stored hopping in the JSON description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoppingEntry {
    pub dg1: i64,
    pub dg2: i64,
    /// Row-major `n²` entries as `[re, im]` pairs.
    pub matrix: Vec<[f64; 2]>,
}

/// JSON-ingestible model description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Haldane(HaldaneParams),
    Custom {
        n: usize,
        r: usize,
        #[serde(rename = "B", default)]
        flux: f64,
        #[serde(default)]
        basis: Option<LatticeBasis>,
        hoppings: Vec<HoppingEntry>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<HoppingModel> {
        match self {
            ModelSpec::Haldane(p) => haldane_model(p),
            ModelSpec::Custom { n, r, flux, basis, hoppings } => {
                let mut list = Vec::with_capacity(hoppings.len());
                for h in hoppings {
                    if h.matrix.len() != n * n {
                        return invalid(format!(
                            "hopping ({}, {}) has {} entries, expected {}",
                            h.dg1,
                            h.dg2,
                            h.matrix.len(),
                            n * n
                        ));
                    }
                    let m = Mat::from_fn(*n, *n, |i, j| {
                        let [re, im] = h.matrix[i * n + j];
                        c64::new(re, im)
                    });
                    list.push((LatticePoint::new(h.dg1, h.dg2), m));
                }
                let basis = basis.unwrap_or_else(LatticeBasis::square);
                LatticeBasis::new(basis.a1, basis.a2)?;
                HoppingModel::new(basis, *n, *r, list, *flux)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::InvalidInput(format!("model: {e}")))
    }

    pub fn haldane_params(&self) -> Option<&HaldaneParams> {
        match self {
            ModelSpec::Haldane(p) => Some(p),
            _ => None,
        }
    }
}
