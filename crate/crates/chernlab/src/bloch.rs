//! Clean periodic analysis over the Brillouin torus.
//!
//! Momenta are passed as the phase pair `(k·a1, k·a2) ∈ [0, 2π)²`, so the
//! Bloch sum reads `H(k) = Σ_δ H₀(0, δ) e^{i(k1 δ1 + k2 δ2)}`.

use std::f64::consts::PI;
use std::ops::Range;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues};
use crate::model::{haldane_model, HaldaneParams, HoppingModel};

const TAU: f64 = 2.0 * PI;

/// Gaps narrower than this are reported closed regardless of refinement.
pub const OPEN_GAP_FLOOR: f64 = 1e-8;

pub fn bloch_matrix(model: &HoppingModel, k: [f64; 2]) -> Result<Mat<c64>> {
    if model.flux() != 0.0 {
        return invalid("Bloch matrices need B = 0");
    }
    let n = model.n();
    let mut h = Mat::<c64>::zeros(n, n);
    for (d, m) in model.hoppings() {
        let ph = c64::from_polar(1.0, k[0] * d.g1 as f64 + k[1] * d.g2 as f64);
        for j in 0..n {
            for i in 0..n {
                h[(i, j)] += m[(i, j)] * ph;
            }
        }
    }
    Ok(h)
}

fn grid_k(grid: usize, i: usize, j: usize) -> [f64; 2] {
    [TAU * i as f64 / grid as f64, TAU * j as f64 / grid as f64]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// Top of the band below.
    pub lower: f64,
    /// Bottom of the band above.
    pub upper: f64,
    pub size: f64,
    pub open: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub bands: Vec<Band>,
    /// `gaps[i]` separates `bands[i]` and `bands[i + 1]`.
    pub gaps: Vec<Gap>,
    pub grid: usize,
    /// Largest shift produced by the local refinement of any extremum.
    pub refinement: f64,
}

impl BandStructure {
    pub fn alphas_betas(&self) -> Vec<(f64, f64)> {
        self.bands.iter().map(|b| (b.lower, b.upper)).collect()
    }
}

/// Local pattern search of `f` starting from `k0`, initial step `h`.
fn polish(f: &dyn Fn([f64; 2]) -> f64, k0: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let mut k = k0;
    let mut fk = f(k);
    let mut step = h;
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    let mut iters = 0;
    while step > 1e-10 && iters < 2000 {
        iters += 1;
        let mut moved = false;
        for &(dx, dy) in &dirs {
            let c = [k[0] + dx * step, k[1] + dy * step];
            let fc = f(c);
            if fc < fk {
                k = c;
                fk = fc;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (k, fk)
}

/// Per-band extrema on a `grid × grid` torus mesh, each polished by a local search.
///
/// A gap is reported open when its size exceeds three times the largest
/// refinement shift and [`OPEN_GAP_FLOOR`].
pub fn band_structure(model: &HoppingModel, grid: usize) -> Result<BandStructure> {
    if grid < 2 {
        return invalid("k-grid must have at least 2 points per direction");
    }
    let n = model.n();
    let mut lo = vec![(f64::INFINITY, [0.0; 2]); n];
    let mut hi = vec![(f64::NEG_INFINITY, [0.0; 2]); n];
    for i in 0..grid {
        for j in 0..grid {
            let k = grid_k(grid, i, j);
            let ev = hermitian_eigenvalues(bloch_matrix(model, k)?.as_ref())?;
            for b in 0..n {
                if ev[b] < lo[b].0 {
                    lo[b] = (ev[b], k);
                }
                if ev[b] > hi[b].0 {
                    hi[b] = (ev[b], k);
                }
            }
        }
    }
    let h = TAU / grid as f64;
    let band_at = |b: usize, k: [f64; 2]| -> f64 {
        bloch_matrix(model, k)
            .and_then(|m| hermitian_eigenvalues(m.as_ref()))
            .map(|v| v[b])
            .unwrap_or(f64::NAN)
    };
    let mut refinement = 0.0f64;
    let mut bands = Vec::with_capacity(n);
    for b in 0..n {
        let (_, fmin) = polish(&|k| band_at(b, k), lo[b].1, h);
        let (_, fmax) = polish(&|k| -band_at(b, k), hi[b].1, h);
        let (emin, emax) = (fmin.min(lo[b].0), (-fmax).max(hi[b].0));
        refinement = refinement.max(lo[b].0 - emin).max(emax - hi[b].0);
        bands.push(Band { lower: emin, upper: emax });
    }
    let gaps = bands
        .windows(2)
        .map(|w| {
            let size = w[1].lower - w[0].upper;
            Gap { lower: w[0].upper, upper: w[1].lower, size: size.max(0.0), open: size > OPEN_GAP_FLOOR && size > 3.0 * refinement }
        })
        .collect();
    Ok(BandStructure { bands, gaps, grid, refinement })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernResult {
    pub value: i64,
    pub curvature_sum: f64,
    pub grid: usize,
    /// Smallest direct gap above the band set seen on the mesh.
    pub min_direct_gap: f64,
}

/// Fukui-Hatsugai-Suzuki link-variable Chern number of the bands in `bands`.
pub fn band_chern(model: &HoppingModel, bands: Range<usize>, grid: usize) -> Result<ChernResult> {
    band_chern_with(model, bands, grid, |_, _| c64::new(1.0, 0.0))
}

fn band_chern_with(
    model: &HoppingModel,
    bands: Range<usize>,
    grid: usize,
    gauge: impl Fn(usize, usize) -> c64,
) -> Result<ChernResult> {
    let n = model.n();
    if bands.is_empty() || bands.end > n {
        return invalid("empty or out-of-range band set");
    }
    if grid < 3 {
        return invalid("k-grid must have at least 3 points per direction");
    }
    let m = bands.len();
    let mut frames: Vec<Mat<c64>> = Vec::with_capacity(grid * grid);
    let mut min_gap = f64::INFINITY;
    for i in 0..grid {
        for j in 0..grid {
            let e = hermitian_eigen(bloch_matrix(model, grid_k(grid, i, j))?.as_ref())?;
            if bands.start > 0 {
                min_gap = min_gap.min(e.values[bands.start] - e.values[bands.start - 1]);
            }
            if bands.end < n {
                min_gap = min_gap.min(e.values[bands.end] - e.values[bands.end - 1]);
            }
            let g = gauge(i, j);
            frames.push(Mat::from_fn(n, m, |r, c| e.vectors[(r, bands.start + c)] * g));
        }
    }
    if !(min_gap > 1e-9) {
        return Err(Error::Gapless(format!("direct gap closes on the {grid}x{grid} mesh (min {min_gap:.3e})")));
    }
    let at = |i: usize, j: usize| &frames[(i % grid) * grid + (j % grid)];
    let link = |a: &Mat<c64>, b: &Mat<c64>| -> c64 {
        let o = a.adjoint() * b;
        let d = det_small(&o);
        let r = d.norm();
        if r > 0.0 {
            d / r
        } else {
            c64::new(1.0, 0.0)
        }
    };
    let mut total = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let (u1, u2, u3, u4) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            let w = link(u1, u2) * link(u2, u3) * link(u3, u4) * link(u4, u1);
            total += w.im.atan2(w.re);
        }
    }
    let curvature_sum = total / TAU;
    Ok(ChernResult { value: curvature_sum.round() as i64, curvature_sum, grid, min_direct_gap: min_gap })
}

fn det_small(a: &Mat<c64>) -> c64 {
    let n = a.nrows();
    match n {
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        _ => {
            let lu = a.partial_piv_lu();
            let u = lu.U();
            let mut d = c64::new(1.0, 0.0);
            for i in 0..n {
                d *= u[(i, i)];
            }
            let perm = lu.P().arrays().0;
            let mut seen = vec![false; n];
            let mut sign = 1.0;
            for s in 0..n {
                if seen[s] {
                    continue;
                }
                let mut len = 0;
                let mut c = s;
                while !seen[c] {
                    seen[c] = true;
                    c = perm[c];
                    len += 1;
                }
                if len % 2 == 0 {
                    sign = -sign;
                }
            }
            d * sign
        }
    }
}

/// Chern number of the Fermi projection onto the bands below gap `gap_index` (1-based).
pub fn chern_number(model: &HoppingModel, gap_index: usize, grid: usize) -> Result<ChernResult> {
    if gap_index == 0 || gap_index >= model.n() {
        return invalid(format!("gap index {gap_index} outside 1..{}", model.n()));
    }
    band_chern(model, 0..gap_index, grid)
}

/// `|M| = 3√3 t2 |sin φ|` to relative tolerance 1e-12.
pub fn haldane_gapless(p: &HaldaneParams) -> bool {
    let rhs = 3.0 * 3f64.sqrt() * p.t2 * p.phi.sin().abs();
    let lhs = p.m.abs();
    let scale = lhs.max(rhs);
    scale == 0.0 || (lhs - rhs).abs() <= 1e-12 * scale
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub phi: f64,
    pub m_over_t2: f64,
    /// `None` when the direct gap closes on the mesh.
    pub chern: Option<i64>,
}

/// Chern number of the lower Haldane band over a `(φ, M/t2)` grid.
pub fn haldane_phase_diagram(
    t1: f64,
    t2: f64,
    phis: &[f64],
    m_over_t2: &[f64],
    kgrid: usize,
) -> Result<Vec<PhasePoint>> {
    let mut out = Vec::with_capacity(phis.len() * m_over_t2.len());
    for &phi in phis {
        for &mt in m_over_t2 {
            let p = HaldaneParams { t1, t2, phi, m: mt * t2, ..HaldaneParams::worked_example() };
            let chern = if haldane_gapless(&p) {
                None
            } else {
                match chern_number(&haldane_model(&p)?, 1, kgrid) {
                    Ok(c) => Some(c.value),
                    Err(Error::Gapless(_)) => None,
                    Err(e) => return Err(e),
                }
            };
            out.push(PhasePoint { phi, m_over_t2: mt, chern });
        }
    }
    Ok(out)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermiticity_defect;
    use crate::model::Dimerization;
    use proptest::prelude::*;

    fn worked() -> HoppingModel {
        haldane_model(&HaldaneParams::worked_example()).unwrap()
    }

    #[test]
    fn graphene_at_gamma() {
        let p = HaldaneParams { t1: 1.0, t2: 0.0, phi: 0.0, m: 0.0, dimerization: Dimerization::D3 };
        let h = bloch_matrix(&haldane_model(&p).unwrap(), [0.0, 0.0]).unwrap();
        let ev = hermitian_eigenvalues(h.as_ref()).unwrap();
        assert!((ev[0] + 3.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn direct_gap_worked_example() {
        let m = worked();
        let g = 201;
        let mut min_gap = f64::INFINITY;
        for i in 0..g {
            for j in 0..g {
                let ev = hermitian_eigenvalues(bloch_matrix(&m, grid_k(g, i, j)).unwrap().as_ref()).unwrap();
                min_gap = min_gap.min(ev[1] - ev[0]);
            }
        }
        assert!(min_gap >= 2.0 - 0.01, "min direct gap {min_gap}");
    }

    #[test]
    fn band_structure_worked_example() {
        let bs = band_structure(&worked(), 201).unwrap();
        assert_eq!(bs.bands.len(), 2);
        assert!((bs.bands[0].upper + 1.0).abs() < 1e-6);
        assert!((bs.bands[1].lower - 1.0).abs() < 1e-6);
        assert!((bs.gaps[0].size - 2.0).abs() < 0.005);
        assert!(bs.gaps[0].open);
        assert!((bs.bands[1].upper + bs.bands[0].lower).abs() < 1e-9);
    }

    #[test]
    fn gapless_curve_closes_gap() {
        let t2 = 1.0 / (3.0 * 3f64.sqrt());
        let p = HaldaneParams { m: 3.0 * 3f64.sqrt() * t2, ..HaldaneParams::worked_example() };
        assert!(haldane_gapless(&p));
        let bs = band_structure(&haldane_model(&p).unwrap(), 401).unwrap();
        assert!(bs.gaps[0].size < 1e-3, "gap {}", bs.gaps[0].size);
        assert!(!bs.gaps[0].open);
        let g = HaldaneParams { t1: 1.0, t2: 0.0, phi: 0.0, m: 0.0, dimerization: Dimerization::D3 };
        let bs = band_structure(&haldane_model(&g).unwrap(), 60).unwrap();
        assert!(!bs.gaps[0].open);
    }

    #[test]
    fn chern_signs() {
        let c = chern_number(&worked(), 1, 24).unwrap();
        assert_eq!(c.value, -1);
        assert!((c.curvature_sum - c.value as f64).abs() < 0.01);
        let p = HaldaneParams { phi: -PI / 2.0, ..HaldaneParams::worked_example() };
        assert_eq!(chern_number(&haldane_model(&p).unwrap(), 1, 24).unwrap().value, 1);
        let p = HaldaneParams { phi: 0.0, m: 1.0, ..HaldaneParams::worked_example() };
        assert_eq!(chern_number(&haldane_model(&p).unwrap(), 1, 24).unwrap().value, 0);
    }

    #[test]
    fn chern_gapless_error() {
        let g = HaldaneParams { t1: 1.0, t2: 0.0, phi: 0.0, m: 0.0, dimerization: Dimerization::D3 };
        assert!(matches!(chern_number(&haldane_model(&g).unwrap(), 1, 24), Err(Error::Gapless(_))));
        assert!(chern_number(&worked(), 0, 24).is_err());
    }

    #[test]
    fn band_cherns_sum_to_zero() {
        for phi in [PI / 2.0, -PI / 3.0, 2.0] {
            let p = HaldaneParams { phi, m: 0.2, ..HaldaneParams::worked_example() };
            let m = haldane_model(&p).unwrap();
            let lo = band_chern(&m, 0..1, 24).unwrap().value;
            let hi = band_chern(&m, 1..2, 24).unwrap().value;
            assert_eq!(lo + hi, 0);
        }
    }

    #[test]
    fn chern_gauge_invariant() {
        let m = worked();
        let a = band_chern(&m, 0..1, 18).unwrap();
        let b = band_chern_with(&m, 0..1, 18, |i, j| c64::from_polar(1.0, (i * 7 + j * 13) as f64 * 0.91)).unwrap();
        assert_eq!(a.value, b.value);
        assert!((a.curvature_sum - b.curvature_sum).abs() < 1e-10);
    }

    #[test]
    fn dimerizations_share_chern_number() {
        for nu in [Dimerization::D1, Dimerization::D2, Dimerization::D3] {
            let p = HaldaneParams { dimerization: nu, ..HaldaneParams::worked_example() };
            assert_eq!(chern_number(&haldane_model(&p).unwrap(), 1, 24).unwrap().value, -1);
        }
    }

    #[test]
    fn gapless_predicate() {
        let base = HaldaneParams { t1: 1.0, t2: 1.0, phi: PI / 2.0, m: 3.0 * 3f64.sqrt(), dimerization: Dimerization::D3 };
        assert!(haldane_gapless(&base));
        assert!(!haldane_gapless(&HaldaneParams { m: 0.0, ..base }));
        assert!(haldane_gapless(&HaldaneParams { t2: 0.0, m: 0.0, phi: 1.234, ..base }));
    }

    #[test]
    fn constant_on_regions() {
        // Sample points well inside each region of the (φ, M/t2) plane.
        let t2 = 1.0 / (3.0 * 3f64.sqrt());
        let mut k = 0u64;
        let mut next = || {
            k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (k >> 11) as f64 / (1u64 << 53) as f64
        };
        let s = 3.0 * 3f64.sqrt();
        for _ in 0..20 {
            let phi = 0.4 + next() * (PI - 0.8);
            let top = s * phi.sin();
            let inside = (next() - 0.5) * 1.6 * top;
            let outside = top + 0.3 + next() * 0.5;
            let c_in = haldane_phase_diagram(1.0, t2, &[phi], &[inside], 24).unwrap()[0].chern;
            let c_in_neg = haldane_phase_diagram(1.0, t2, &[-phi], &[inside], 24).unwrap()[0].chern;
            let c_out = haldane_phase_diagram(1.0, t2, &[phi], &[outside], 24).unwrap()[0].chern;
            assert_eq!(c_in, Some(-1));
            assert_eq!(c_in_neg, Some(1));
            assert_eq!(c_out, Some(0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bloch_hermitian(k1 in 0.0f64..TAU, k2 in 0.0f64..TAU, phi in -3.1f64..3.1, mass in -1.0f64..1.0) {
            let p = HaldaneParams { phi, m: mass, ..HaldaneParams::worked_example() };
            let h = bloch_matrix(&haldane_model(&p).unwrap(), [k1, k2]).unwrap();
            prop_assert!(hermiticity_defect(h.as_ref()) < 1e-12);
        }
    }
}
