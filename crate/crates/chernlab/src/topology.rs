//! Real-space Chern marker and the index of a pair of projections.
//!
//! Positions are lattice coefficients `(g1, g2)` of each site, repeated over orbitals.

use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::finite_volume::ProjectionMatrix;
use crate::lattice::{LatticeBox, LatticePoint};
use crate::linalg::hermitian_eigenvalues;

const TAU: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerResult {
    pub value: f64,
    pub window_l: usize,
    pub imag_residual: f64,
}

/// Matrix indices of the window `center + Λ_w`.
fn window_indices(p: &ProjectionMatrix, window_l: usize, center: LatticePoint) -> Result<Vec<usize>> {
    if window_l == 0 {
        return invalid("window side must be positive");
    }
    if window_l > p.lattice_box.side() {
        return invalid(format!("window {window_l} larger than box {}", p.lattice_box.side()));
    }
    let w = LatticeBox::new(window_l)?;
    let mut idx = Vec::with_capacity(w.len() * p.n);
    for &s in w.sites() {
        let Some(r) = p.lattice_box.rank(s + center) else {
            return invalid("window does not fit inside the box");
        };
        idx.extend((0..p.n).map(|i| r * p.n + i));
    }
    Ok(idx)
}

fn coords(p: &ProjectionMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut x1 = Vec::with_capacity(p.matrix.nrows());
    let mut x2 = Vec::with_capacity(p.matrix.nrows());
    for s in p.lattice_box.sites() {
        for _ in 0..p.n {
            x1.push(s.g1 as f64);
            x2.push(s.g2 as f64);
        }
    }
    (x1, x2)
}

/// `P · (diag(x) · P[:, cols])`.
fn p_x_cols(p: &ProjectionMatrix, x: &[f64], cols: &Mat<c64>) -> Mat<c64> {
    let scaled = Mat::from_fn(cols.nrows(), cols.ncols(), |i, j| cols[(i, j)] * x[i]);
    &p.frame * (p.frame.adjoint() * &scaled)
}

fn columns(p: &ProjectionMatrix, idx: &[usize]) -> Mat<c64> {
    Mat::from_fn(p.matrix.nrows(), idx.len(), |i, j| p.matrix[(i, idx[j])])
}

/// `(2πi/|Λ_w|) Tr(χ_w (P X1 P X2 P − P X2 P X1 P) χ_w)` on the centred window.
pub fn chern_marker(p: &ProjectionMatrix, window_l: usize) -> Result<MarkerResult> {
    chern_marker_at(p, window_l, LatticePoint::ORIGIN)
}

pub fn chern_marker_at(p: &ProjectionMatrix, window_l: usize, center: LatticePoint) -> Result<MarkerResult> {
    let idx = window_indices(p, window_l, center)?;
    let (x1, x2) = coords(p);
    let pw = columns(p, &idx);
    let m1 = p_x_cols(p, &x1, &pw);
    let m2 = p_x_cols(p, &x2, &pw);
    let mut tr = c64::new(0.0, 0.0);
    for j in 0..idx.len() {
        for i in 0..pw.nrows() {
            let c = pw[(i, j)].conj();
            tr += c * (m2[(i, j)] * x1[i] - m1[(i, j)] * x2[i]);
        }
    }
    let area = (window_l * window_l) as f64;
    Ok(MarkerResult { value: -TAU * tr.im / area, window_l, imag_residual: TAU * tr.re.abs() / area })
}

/// Two-window extrapolation assuming a `1/w` boundary correction.
pub fn marker_richardson(p: &ProjectionMatrix, w1: usize, w2: usize) -> Result<f64> {
    if w1 == w2 {
        return invalid("Richardson needs two distinct windows");
    }
    let m1 = chern_marker(p, w1)?.value;
    let m2 = chern_marker(p, w2)?.value;
    Ok((w2 as f64 * m2 - w1 as f64 * m1) / (w2 as f64 - w1 as f64))
}

/// `2π Im Σ_{γ,ξ} tr(P(c,γ)P(γ,ξ)P(ξ,c)) (γ−c)∧(ξ−c)`, averaged over centres `c` in the window.
pub fn chern_marker_triple(p: &ProjectionMatrix, window_l: usize) -> Result<f64> {
    let idx = window_indices(p, window_l, LatticePoint::ORIGIN)?;
    let (x1, x2) = coords(p);
    let a = columns(p, &idx);
    let m0 = &p.frame * (p.frame.adjoint() * &a);
    let m1 = p_x_cols(p, &x1, &a);
    let m2 = p_x_cols(p, &x2, &a);
    let mut total = 0.0;
    for (j, &col) in idx.iter().enumerate() {
        let (c1, c2) = (x1[col], x2[col]);
        let mut s = c64::new(0.0, 0.0);
        for i in 0..a.nrows() {
            let ca = a[(i, j)].conj();
            let p1 = m1[(i, j)] - m0[(i, j)] * c1;
            let p2 = m2[(i, j)] - m0[(i, j)] * c2;
            s += ca * (p1 * (x2[i] - c2) - p2 * (x1[i] - c1));
        }
        total += s.im;
    }
    Ok(TAU * total / (window_l * window_l) as f64)
}

/// Diagonal `U_p = e^{−iθ_p(γ)}`, one entry per matrix index.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxUnitary {
    pub phases: Vec<c64>,
    pub p: [f64; 2],
}

pub fn flux_unitary(p: [f64; 2], lbox: &LatticeBox, n: usize) -> Result<FluxUnitary> {
    if !p[0].is_finite() || !p[1].is_finite() {
        return invalid("flux insertion point must be finite");
    }
    if (p[0] - p[0].round()).abs() < 1e-12 && (p[1] - p[1].round()).abs() < 1e-12 {
        return invalid("flux insertion point lies on a lattice point");
    }
    let mut phases = Vec::with_capacity(lbox.len() * n);
    for s in lbox.sites() {
        let theta = (s.g2 as f64 - p[1]).atan2(s.g1 as f64 - p[0]);
        phases.extend(std::iter::repeat(c64::from_polar(1.0, -theta)).take(n));
    }
    Ok(FluxUnitary { phases, p })
}

/// Guard band around the window edges `±(1 − tol)`.
pub const INDEX_AMBIGUITY: f64 = 1e-6;

/// Index of `(Q, P)` with `Q = U_p P U_p*`, on the sites `|γ − p|_∞ < L/3`.
pub fn index_pair(p: &ProjectionMatrix, point: [f64; 2], tol_window: f64) -> Result<i64> {
    index_pair_in_region(p, point, tol_window, p.lattice_box.side() as f64 / 3.0)
}

/// Counts eigenvalues of `Q − P` restricted to `|γ − p|_∞ < radius` near `+1`, minus those near `−1`.
pub fn index_pair_in_region(p: &ProjectionMatrix, point: [f64; 2], tol_window: f64, radius: f64) -> Result<i64> {
    if !(tol_window > 0.0 && tol_window < 1.0) {
        return invalid("tolerance window must lie in (0, 1)");
    }
    let u = flux_unitary(point, &p.lattice_box, p.n)?;
    let mut idx = Vec::new();
    for (r, s) in p.lattice_box.sites().iter().enumerate() {
        let d = (s.g1 as f64 - point[0]).abs().max((s.g2 as f64 - point[1]).abs());
        if d < radius {
            idx.extend((0..p.n).map(|i| r * p.n + i));
        }
    }
    if idx.is_empty() {
        return invalid("index region contains no sites");
    }
    let k = idx.len();
    let d = Mat::<c64>::from_fn(k, k, |a, b| {
        let (i, j) = (idx[a], idx[b]);
        let pij = p.matrix[(i, j)];
        pij * u.phases[i] * u.phases[j].conj() - pij
    });
    let ev = hermitian_eigenvalues(d.as_ref())?;
    let (hi, lo) = (1.0 - tol_window, -1.0 + tol_window);
    if let Some(&e) = ev.iter().find(|&&e| (e - hi).abs() < INDEX_AMBIGUITY || (e - lo).abs() < INDEX_AMBIGUITY) {
        return Err(Error::AmbiguousIndex(format!("eigenvalue {e} on a window edge")));
    }
    let plus = ev.iter().filter(|&&e| e >= hi).count() as i64;
    let minus = ev.iter().filter(|&&e| e <= lo).count() as i64;
    Ok(plus - minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_volume::{projection_from_eigen, restrict_periodic, spectral_projection, BoundaryCondition};
    use crate::model::{haldane_model, HaldaneParams};

    fn haldane_projection(phi: f64, side: usize) -> ProjectionMatrix {
        let p = HaldaneParams { phi, ..HaldaneParams::worked_example() };
        let op = restrict_periodic(&haldane_model(&p).unwrap(), None, 0.0, &LatticeBox::new(side).unwrap()).unwrap();
        spectral_projection(&op, 0.0).unwrap()
    }

    fn from_frame(frame: Mat<c64>, side: usize, n: usize) -> ProjectionMatrix {
        let matrix = &frame * frame.adjoint();
        ProjectionMatrix {
            rank: frame.ncols(),
            matrix,
            frame,
            fermi_energy: 0.0,
            n,
            lattice_box: LatticeBox::new(side).unwrap(),
            bc: BoundaryCondition::Simple,
        }
    }

    #[test]
    fn trivial_projections_have_zero_marker() {
        let n = 2 * 36;
        let zero = from_frame(Mat::zeros(n, 0), 6, 2);
        let id = from_frame(Mat::from_fn(n, n, |i, j| c64::new((i == j) as u8 as f64, 0.0)), 6, 2);
        for p in [&zero, &id] {
            let m = chern_marker(p, 4).unwrap();
            assert!(m.value.abs() < 1e-12 && m.imag_residual < 1e-8);
            assert!(chern_marker_triple(p, 4).unwrap().abs() < 1e-12);
        }
        assert!(chern_marker(&zero, 7).is_err());
    }

    #[test]
    fn localized_rank_one_marker_vanishes() {
        let side = 16;
        let lbox = LatticeBox::new(side).unwrap();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut v = Mat::<c64>::zeros(lbox.len(), 1);
        for (k, s) in lbox.sites().iter().enumerate() {
            let amp = (-(s.norm_sq() as f64)).exp();
            v[(k, 0)] = c64::new(rnd(), rnd()) * amp;
        }
        let norm = (0..lbox.len()).map(|k| v[(k, 0)].norm_sqr()).sum::<f64>().sqrt();
        let v = Mat::from_fn(lbox.len(), 1, |i, _| v[(i, 0)] / norm);
        let p = from_frame(v, side, 1);
        let m = chern_marker(&p, 8).unwrap();
        assert!(m.value.abs() < 0.05, "{}", m.value);
    }

    #[test]
    fn clean_haldane_marker() {
        let p = haldane_projection(PI / 2.0, 24);
        let m = chern_marker(&p, 8).unwrap();
        assert!((m.value + 1.0).abs() < 0.15, "{}", m.value);
        assert!(m.imag_residual < 1e-8);
        let t = chern_marker_triple(&p, 8).unwrap();
        assert!((t + 1.0).abs() < 0.15, "{t}");
        let shifted = chern_marker_at(&p, 8, LatticePoint::new(1, 0)).unwrap();
        assert!((shifted.value - m.value).abs() < 0.05);
        let shifted = chern_marker_at(&p, 8, LatticePoint::new(0, -1)).unwrap();
        assert!((shifted.value - m.value).abs() < 0.05);
    }

    #[test]
    fn full_box_forms_agree() {
        let p = haldane_projection(1.1, 10);
        let a = chern_marker(&p, 10).unwrap().value;
        let b = chern_marker_triple(&p, 10).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn flux_unitary_phases() {
        let lbox = LatticeBox::new(5).unwrap();
        let u = flux_unitary([0.5, 0.5], &lbox, 2).unwrap();
        let r = lbox.rank(LatticePoint::new(1, 1)).unwrap();
        assert!((u.phases[2 * r] - c64::from_polar(1.0, -PI / 4.0)).norm() < 1e-15);
        assert!(u.phases.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        assert!(u.phases.iter().all(|z| (*z * z.conj() - c64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(flux_unitary([1.0, -2.0], &lbox, 2).is_err());
    }

    #[test]
    fn diagonal_projection_has_zero_index() {
        let n = 49;
        let frame = Mat::from_fn(n, 20, |i, j| c64::new((i == 2 * j) as u8 as f64, 0.0));
        let p = from_frame(frame, 7, 1);
        assert_eq!(index_pair(&p, [0.5, 0.5], 0.1).unwrap(), 0);
    }

    #[test]
    fn clean_haldane_index_matches_marker() {
        let p = haldane_projection(PI / 2.0, 24);
        let marker = chern_marker(&p, 8).unwrap().value.round() as i64;
        assert_eq!(index_pair(&p, [0.5, 0.5], 0.1).unwrap(), marker);
        assert_eq!(index_pair(&p, [0.6, 0.45], 0.1).unwrap(), marker);
        let q = haldane_projection(-PI / 2.0, 24);
        assert_eq!(index_pair(&q, [0.5, 0.5], 0.1).unwrap(), 1);
    }

    #[test]
    fn trivial_phase_marker_and_index() {
        let p = HaldaneParams { phi: 0.0, m: 1.0, ..HaldaneParams::worked_example() };
        let op = restrict_periodic(&haldane_model(&p).unwrap(), None, 0.0, &LatticeBox::new(18).unwrap()).unwrap();
        let eig = op.eigen().unwrap();
        let proj = projection_from_eigen(&op, &eig, 0.0);
        assert!(chern_marker(&proj, 6).unwrap().value.abs() < 0.15);
        assert_eq!(index_pair(&proj, [0.5, 0.5], 0.1).unwrap(), 0);
    }
}
