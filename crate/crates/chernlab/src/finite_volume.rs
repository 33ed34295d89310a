//! Finite restrictions of `H_{λ,ω}` and the objects built from one eigendecomposition.
//!
//! Matrix index of `(γ, i)` is `rank(γ)·n + i`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSample;
use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticeBox, LatticePoint};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, spectral_norm, Eigen};
use crate::model::HoppingModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Simple,
    Periodic,
}

/// Where a random potential came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRef {
    pub seed: u64,
    pub realization_index: u64,
}

#[derive(Clone, Debug)]
pub struct FiniteOperator {
    pub matrix: Mat<c64>,
    pub lattice_box: LatticeBox,
    pub n: usize,
    pub bc: BoundaryCondition,
    pub lambda: f64,
    pub sample: Option<SampleRef>,
}

impl FiniteOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigen(&self) -> Result<Eigen> {
        hermitian_eigen(self.matrix.as_ref())
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(self.matrix.as_ref())
    }
}

fn check_sample(sample: Option<&DisorderSample>, lbox: &LatticeBox, n: usize) -> Result<()> {
    if let Some(s) = sample {
        if s.values.len() != lbox.len() * n || s.n != n {
            return invalid("disorder sample does not match box and orbital count");
        }
    }
    Ok(())
}

fn add_potential(m: &mut Mat<c64>, sample: Option<&DisorderSample>, lambda: f64) {
    if let Some(s) = sample {
        if lambda != 0.0 {
            for (k, v) in s.values.iter().enumerate() {
                m[(k, k)] += c64::new(lambda * v, 0.0);
            }
        }
    }
}

fn sample_ref(sample: Option<&DisorderSample>) -> Option<SampleRef> {
    sample.map(|s| SampleRef { seed: s.seed, realization_index: s.realization_index })
}

fn add_block(m: &mut Mat<c64>, n: usize, row: usize, col: usize, h: &Mat<c64>, ph: c64) {
    for j in 0..n {
        for i in 0..n {
            m[(row * n + i, col * n + j)] += h[(i, j)] * ph;
        }
    }
}

/// `χ_Λ H_{λ,ω} χ_Λ`.
pub fn restrict_simple(
    model: &HoppingModel,
    sample: Option<&DisorderSample>,
    lambda: f64,
    lbox: &LatticeBox,
) -> Result<FiniteOperator> {
    let n = model.n();
    check_sample(sample, lbox, n)?;
    let mut m = Mat::<c64>::zeros(lbox.len() * n, lbox.len() * n);
    for (row, &g) in lbox.sites().iter().enumerate() {
        for (&d, h) in model.hoppings() {
            let xi = g + d;
            if let Some(col) = lbox.rank(xi) {
                add_block(&mut m, n, row, col, h, model.phase(g, xi));
            }
        }
    }
    add_potential(&mut m, sample, lambda);
    Ok(FiniteOperator {
        matrix: m,
        lattice_box: lbox.clone(),
        n,
        bc: BoundaryCondition::Simple,
        lambda,
        sample: sample_ref(sample),
    })
}

/// Torus restriction `Σ_ζ H^L(γ, ξ + Lζ)`.
pub fn restrict_periodic(
    model: &HoppingModel,
    sample: Option<&DisorderSample>,
    lambda: f64,
    lbox: &LatticeBox,
) -> Result<FiniteOperator> {
    let n = model.n();
    let l = lbox.side();
    check_sample(sample, lbox, n)?;
    let q = model
        .flux_period()
        .ok_or_else(|| Error::InvalidInput("flux is not a rational multiple of 2π with period ≤ 1000".into()))?;
    if l % q != 0 {
        return invalid(format!("box side {l} is not a multiple of the magnetic period {q}"));
    }
    if 2 * model.range() >= l {
        return invalid(format!("hopping range {} needs box side above {}", model.range(), 2 * model.range()));
    }
    let mut m = Mat::<c64>::zeros(lbox.len() * n, lbox.len() * n);
    for (row, &g) in lbox.sites().iter().enumerate() {
        for (&d, h) in model.hoppings() {
            let xi = g + d;
            let col = lbox.rank(lbox.wrap(xi)).expect("wrapped site inside box");
            add_block(&mut m, n, row, col, h, model.phase(g, xi));
        }
    }
    add_potential(&mut m, sample, lambda);
    Ok(FiniteOperator {
        matrix: m,
        lattice_box: lbox.clone(),
        n,
        bc: BoundaryCondition::Periodic,
        lambda,
        sample: sample_ref(sample),
    })
}

pub fn restrict(
    model: &HoppingModel,
    sample: Option<&DisorderSample>,
    lambda: f64,
    lbox: &LatticeBox,
    bc: BoundaryCondition,
) -> Result<FiniteOperator> {
    match bc {
        BoundaryCondition::Simple => restrict_simple(model, sample, lambda, lbox),
        BoundaryCondition::Periodic => restrict_periodic(model, sample, lambda, lbox),
    }
}

/// `χ_{(−∞,E]}` of a finite operator.
#[derive(Clone, Debug)]
pub struct ProjectionMatrix {
    pub matrix: Mat<c64>,
    /// Orthonormal frame of the range (`N × rank`).
    pub frame: Mat<c64>,
    pub fermi_energy: f64,
    pub rank: usize,
    pub n: usize,
    pub lattice_box: LatticeBox,
    pub bc: BoundaryCondition,
}

impl ProjectionMatrix {
    pub fn block(&self, gamma: LatticePoint, xi: LatticePoint) -> Option<Mat<c64>> {
        let (r, c) = (self.lattice_box.rank(gamma)?, self.lattice_box.rank(xi)?);
        let n = self.n;
        Some(Mat::from_fn(n, n, |i, j| self.matrix[(r * n + i, c * n + j)]))
    }
}

pub fn spectral_projection(op: &FiniteOperator, e: f64) -> Result<ProjectionMatrix> {
    let eig = op.eigen()?;
    Ok(projection_from_eigen(op, &eig, e))
}

/// Reuses an existing factorization of `op`.
pub fn projection_from_eigen(op: &FiniteOperator, eig: &Eigen, e: f64) -> ProjectionMatrix {
    let rank = eig.values.partition_point(|&v| v <= e);
    let frame = eig.vectors.subcols(0, rank).to_owned();
    let matrix = &frame * frame.adjoint();
    ProjectionMatrix {
        matrix,
        frame,
        fermi_energy: e,
        rank,
        n: op.n,
        lattice_box: op.lattice_box.clone(),
        bc: op.bc,
    }
}

/// Distance below which `z` is treated as an eigenvalue.
pub const RESONANCE_TOL: f64 = 1e-12;

pub fn green_function(op: &FiniteOperator, z: c64) -> Result<Mat<c64>> {
    green_from_eigen(&op.eigen()?, z)
}

pub fn green_from_eigen(eig: &Eigen, z: c64) -> Result<Mat<c64>> {
    let mut w = eig.vectors.clone();
    for (k, &ev) in eig.values.iter().enumerate() {
        let d = c64::new(ev, 0.0) - z;
        if d.norm() < RESONANCE_TOL {
            return Err(Error::ResonantEnergy(format!("z = {z} within {RESONANCE_TOL:e} of eigenvalue {ev}")));
        }
        let inv = d.inv();
        for i in 0..w.nrows() {
            w[(i, k)] *= inv;
        }
    }
    Ok(&w * eig.vectors.adjoint())
}

/// `(|ξ − c|, ‖K(c, ξ)‖)` for every `ξ` in the box, nearest first.
///
/// Periodic operators use the minimal-image displacement.
pub fn kernel_profile(
    matrix: &Mat<c64>,
    lbox: &LatticeBox,
    n: usize,
    bc: BoundaryCondition,
    center: LatticePoint,
) -> Result<Vec<(f64, f64)>> {
    let Some(rc) = lbox.rank(center) else {
        return invalid("profile center outside the box");
    };
    let mut out: Vec<(f64, f64)> = lbox
        .sites()
        .iter()
        .enumerate()
        .map(|(k, &xi)| {
            let d = match bc {
                BoundaryCondition::Simple => xi - center,
                BoundaryCondition::Periodic => lbox.minimal_image(xi - center),
            };
            let b = Mat::<c64>::from_fn(n, n, |i, j| matrix[(rc * n + i, k * n + j)]);
            (d.norm(), spectral_norm(b.as_ref()))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Largest kernel norm per distinct distance.
pub fn envelope(profile: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(d, v) in profile {
        match out.last_mut() {
            Some(last) if (last.0 - d).abs() < 1e-9 => last.1 = last.1.max(v),
            _ => out.push((d, v)),
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bloch::band_structure;
    use crate::disorder::{sample_potential, DistributionSpec};
    use crate::linalg::{hermiticity_defect, max_abs};
    use crate::model::{haldane_model, HaldaneParams};
    use crate::stats::linear_fit;

    fn worked() -> HoppingModel {
        haldane_model(&HaldaneParams::worked_example()).unwrap()
    }

    fn identity(n: usize) -> Mat<c64> {
        Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
    }

    #[test]
    fn on_site_only_model_is_diagonal() {
        let p = HaldaneParams { t1: 0.0, t2: 0.0, phi: 0.0, m: 1.0, ..HaldaneParams::worked_example() };
        let op = restrict_simple(&haldane_model(&p).unwrap(), None, 0.0, &LatticeBox::new(4).unwrap()).unwrap();
        for i in 0..op.dim() {
            for j in 0..op.dim() {
                let want = if i == j { if i % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 };
                assert_eq!(op.matrix[(i, j)], c64::new(want, 0.0));
            }
        }
        let g = green_function(&op, c64::new(0.0, 1.0)).unwrap();
        for i in 0..op.dim() {
            let e = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((g[(i, i)] - (c64::new(e, 0.0) - c64::new(0.0, 1.0)).inv()).norm() < 1e-14);
        }
    }

    #[test]
    fn small_simple_box_spectrum() {
        let bs = band_structure(&worked(), 120).unwrap();
        let ev = restrict_simple(&worked(), None, 0.0, &LatticeBox::new(5).unwrap()).unwrap().eigenvalues().unwrap();
        let (lo, hi) = (bs.bands[0].lower, bs.bands[1].upper);
        assert!(ev.iter().all(|&e| e >= lo - 1e-9 && e <= hi + 1e-9));
        // In-gap states of the open box are edge modes; their number stays below the boundary site count.
        let lbox = LatticeBox::new(5).unwrap();
        let inside = ev.iter().filter(|e| e.abs() < 0.7).count();
        assert!(inside <= crate::lattice::inner_boundary(&lbox, 1).len(), "{inside} states deep in the gap");
    }

    #[test]
    fn periodic_spectrum_in_bloch_bands() {
        let lbox = LatticeBox::new(12).unwrap();
        let op = restrict_periodic(&worked(), None, 0.0, &lbox).unwrap();
        assert!(hermiticity_defect(op.matrix.as_ref()) < 1e-12);
        let ev = op.eigenvalues().unwrap();
        let bs = band_structure(&worked(), 12).unwrap();
        for e in ev {
            assert!(bs.bands.iter().any(|b| e >= b.lower - 1e-9 && e <= b.upper + 1e-9), "{e}");
        }
    }

    #[test]
    fn periodic_matches_simple_off_boundary() {
        let lbox = LatticeBox::new(8).unwrap();
        let d = DistributionSpec::uniform(1.0, 1.0).unwrap();
        let s = sample_potential(&d, &lbox, 2, 3, 0);
        let a = restrict_simple(&worked(), Some(&s), 0.7, &lbox).unwrap();
        let b = restrict_periodic(&worked(), Some(&s), 0.7, &lbox).unwrap();
        for (r, &g) in lbox.sites().iter().enumerate() {
            for (c, &x) in lbox.sites().iter().enumerate() {
                if lbox.distance_to_outside(g) <= 1 || lbox.distance_to_outside(x) <= 1 {
                    continue;
                }
                for i in 0..2 {
                    for j in 0..2 {
                        assert_eq!(a.matrix[(2 * r + i, 2 * c + j)], b.matrix[(2 * r + i, 2 * c + j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn periodic_flux_requires_commensurate_side() {
        use crate::lattice::LatticeBasis;
        let hop = Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
        let m = HoppingModel::new(
            LatticeBasis::square(),
            1,
            1,
            [(LatticePoint::new(1, 0), hop.clone()), (LatticePoint::new(0, 1), hop)],
            2.0 * std::f64::consts::PI / 3.0,
        )
        .unwrap();
        assert!(restrict_periodic(&m, None, 0.0, &LatticeBox::new(7).unwrap()).is_err());
        let op = restrict_periodic(&m, None, 0.0, &LatticeBox::new(9).unwrap()).unwrap();
        assert!(hermiticity_defect(op.matrix.as_ref()) < 1e-12);
        assert!(restrict_periodic(&worked(), None, 0.0, &LatticeBox::new(2).unwrap()).is_err());
    }

    #[test]
    fn projection_basics() {
        let lbox = LatticeBox::new(11).unwrap();
        let op = restrict_periodic(&worked(), None, 0.0, &lbox).unwrap();
        let eig = op.eigen().unwrap();
        let p = projection_from_eigen(&op, &eig, 0.0);
        assert_eq!(p.rank, op.dim() / 2);
        let p2 = &p.matrix * &p.matrix - &p.matrix;
        assert!(max_abs(p2.as_ref()) < 1e-9);
        assert!(hermiticity_defect(p.matrix.as_ref()) < 1e-10);
        let zero = projection_from_eigen(&op, &eig, eig.values[0] - 1.0);
        assert_eq!(zero.rank, 0);
        assert_eq!(max_abs(zero.matrix.as_ref()), 0.0);
        let full = projection_from_eigen(&op, &eig, eig.values[op.dim() - 1]);
        assert_eq!(full.rank, op.dim());
        assert!(max_abs((&full.matrix - identity(op.dim())).as_ref()) < 1e-10);
        let mut last = 0;
        for &e in &eig.values {
            let r = eig.values.partition_point(|&v| v <= e);
            assert!(r >= last);
            last = r;
        }
        let (g, x) = (LatticePoint::new(0, 0), LatticePoint::new(2, -1));
        let (a, b) = (p.block(g, x).unwrap(), p.block(x, g).unwrap());
        assert!(max_abs((a - b.adjoint()).as_ref()) < 1e-12);
    }

    #[test]
    fn green_residual_and_norm() {
        let lbox = LatticeBox::new(6).unwrap();
        let d = DistributionSpec::uniform(1.0, 1.0).unwrap();
        let s = sample_potential(&d, &lbox, 2, 1, 0);
        let op = restrict_simple(&worked(), Some(&s), 0.5, &lbox).unwrap();
        let z = c64::new(0.3, 1.0);
        let g = green_function(&op, z).unwrap();
        let shifted = Mat::from_fn(op.dim(), op.dim(), |i, j| op.matrix[(i, j)] - if i == j { z } else { c64::new(0.0, 0.0) });
        let r = &shifted * &g - identity(op.dim());
        assert!(max_abs(r.as_ref()) < 1e-8);
        assert!(spectral_norm(g.as_ref()) <= 1.0 + 1e-12);
        let ev = op.eigenvalues().unwrap();
        assert!(matches!(green_function(&op, c64::new(ev[3], 0.0)), Err(Error::ResonantEnergy(_))));
    }

    #[test]
    fn spectrum_within_kato_window() {
        let bs = band_structure(&worked(), 120).unwrap();
        let lbox = LatticeBox::new(8).unwrap();
        let d = DistributionSpec::uniform(1.0, 0.5).unwrap();
        for k in 0..4 {
            let s = sample_potential(&d, &lbox, 2, 9, k);
            let lam = 0.4;
            for e in restrict_periodic(&worked(), Some(&s), lam, &lbox).unwrap().eigenvalues().unwrap() {
                assert!(bs.bands.iter().any(|b| e >= b.lower - lam * d.a - 1e-9 && e <= b.upper + lam * d.b + 1e-9));
            }
        }
    }

    #[test]
    fn green_decays_in_gap() {
        let lbox = LatticeBox::new(20).unwrap();
        let op = restrict_periodic(&worked(), None, 0.0, &lbox).unwrap();
        let g = green_function(&op, c64::new(0.0, 0.0)).unwrap();
        let env = envelope(&kernel_profile(&g, &lbox, 2, op.bc, LatticePoint::ORIGIN).unwrap());
        let pts: Vec<_> = env.into_iter().filter(|&(d, _)| (2.0..=8.0).contains(&d)).collect();
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let fit = linear_fit(&x, &y).unwrap();
        let ct = best_combes_thomas_rate(&worked(), 1.0);
        assert!(-fit.slope >= 0.7 * ct, "fitted {} vs Combes-Thomas {ct}", -fit.slope);
    }

    /// Largest Combes–Thomas rate over α at distance `delta` from the spectrum.
    pub(crate) fn best_combes_thomas_rate(m: &HoppingModel, delta: f64) -> f64 {
        (1..=400)
            .map(|k| {
                let a = k as f64 * 0.005;
                let s = crate::bounds::combes_thomas_salpha(m, a).unwrap();
                crate::bounds::combes_thomas_rate(s, a, delta).unwrap().1
            })
            .fold(0.0, f64::max)
    }
}
