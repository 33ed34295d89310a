//! Closed-form localization constants and thresholds as pure evaluators.

use std::f64::consts::{E, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::bloch::BandStructure;
use crate::disorder::{holder_constant, DistributionSpec, TailDecay};
use crate::error::{invalid, Error, Result};
use crate::linalg::spectral_norm;
use crate::model::HoppingModel;

/// Band extrema `(αᵢ, βᵢ)` of `H₀` together with the disorder support `[−a, b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapGeometry {
    pub bands: Vec<(f64, f64)>,
    pub a: f64,
    pub b: f64,
}

impl GapGeometry {
    pub fn new(bands: &BandStructure, a: f64, b: f64) -> Self {
        Self { bands: bands.alphas_betas(), a, b }
    }

    /// `|𝒢ᵢ| = αᵢ₊₁ − βᵢ` for the 1-based gap index `i` (zero if the bands overlap).
    pub fn gap_size(&self, i: usize) -> Option<f64> {
        if i == 0 || i >= self.bands.len() {
            return None;
        }
        Some((self.bands[i].0 - self.bands[i - 1].1).max(0.0))
    }

    /// `𝒢ᵢ(λ) = (βᵢ + bλ, αᵢ₊₁ − aλ)`, `None` once it is empty.
    pub fn gap_at(&self, i: usize, lambda: f64) -> Option<(f64, f64)> {
        if i == 0 || i >= self.bands.len() {
            return None;
        }
        let lo = self.bands[i - 1].1 + self.b * lambda;
        let hi = self.bands[i].0 - self.a * lambda;
        (lo < hi).then_some((lo, hi))
    }

    /// Index of the internal gap containing `e`.
    pub fn gap_containing(&self, e: f64) -> Option<usize> {
        (1..self.bands.len()).find(|&i| e > self.bands[i - 1].1 && e < self.bands[i].0)
    }

    /// `dist(E, σ(H₀))` with `σ(H₀)` the union of band intervals.
    pub fn distance_to_spectrum(&self, e: f64) -> f64 {
        self.bands
            .iter()
            .map(|&(lo, hi)| if e < lo { lo - e } else if e > hi { e - hi } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `S_α = sup_γ Σ_ξ ‖H₀(γ,ξ)‖ (e^{α|γ−ξ|} − 1)` with exact block 2-norms.
pub fn combes_thomas_salpha(model: &HoppingModel, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return invalid("α must be positive");
    }
    Ok(model
        .hoppings()
        .iter()
        .map(|(d, h)| spectral_norm(h.as_ref()) * (alpha * d.norm()).exp_m1())
        .sum())
}

/// Entrywise over-bound `Σ_{δ≠0} w_δ · max|h| · (e^{α r_max} − 1)`, using
/// `‖A‖ ≤ n max|A_ij|` for blocks with off-diagonal entries and `w_δ = 1` for diagonal blocks.
pub fn combes_thomas_salpha_overbound(model: &HoppingModel, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return invalid("α must be positive");
    }
    let (w, m) = overbound_weights(model);
    Ok(w * m * (alpha * model.max_hopping_distance()).exp_m1())
}

fn overbound_weights(model: &HoppingModel) -> (f64, f64) {
    let n = model.n();
    let mut weight = 0.0;
    let mut max_entry = 0.0f64;
    for (d, h) in model.hoppings() {
        if *d == crate::lattice::LatticePoint::ORIGIN {
            continue;
        }
        let mut diagonal = true;
        let mut nonzero = false;
        for i in 0..n {
            for j in 0..n {
                let v = h[(i, j)].norm();
                max_entry = max_entry.max(v);
                nonzero |= v > 0.0;
                diagonal &= i == j || v == 0.0;
            }
        }
        if nonzero {
            weight += if diagonal { 1.0 } else { n as f64 };
        }
    }
    (weight, max_entry)
}

/// Largest α with `2 · S_α(over-bound) = target`.
pub fn alpha_for_overbound(model: &HoppingModel, target: f64) -> Result<f64> {
    let (w, m) = overbound_weights(model);
    let r = model.max_hopping_distance();
    if !(w * m > 0.0) || !(r > 0.0) || !(target > 0.0) {
        return invalid("α calibration needs nonzero hoppings and a positive target");
    }
    Ok((target / (2.0 * w * m)).ln_1p() / r)
}

/// `(prefactor, rate)` of `‖G(γ,ξ;z)‖ ≤ prefactor · e^{−rate|γ−ξ|}`.
pub fn combes_thomas_rate(s_alpha: f64, alpha: f64, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return invalid("distance to the spectrum must be positive");
    }
    if delta >= 2.0 * s_alpha {
        Ok((2.0 / delta, alpha))
    } else {
        Ok((2.0 / delta, alpha * delta / (2.0 * s_alpha)))
    }
}

/// `C_{s,τ}(ρ) = τ (2^τ C_τ)^{s/τ} / (τ − s)`.
pub fn c_s_tau(s: f64, tau: f64, c_tau: f64) -> f64 {
    tau * (2f64.powf(tau) * c_tau).powf(s / tau) / (tau - s)
}

/// `sup_{(γ,i)} Σ_{(ξ,j)≠(γ,i)} |H₀(γ,ξ)_{ij}|^s e^{μ|γ−ξ|}`.
pub fn fractional_row_sum(model: &HoppingModel, s: f64, mu: f64) -> f64 {
    let n = model.n();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (d, h) in model.hoppings() {
                let w = (mu * d.norm()).exp();
                for j in 0..n {
                    if *d == crate::lattice::LatticePoint::ORIGIN && i == j {
                        continue;
                    }
                    let v = h[(i, j)].norm();
                    if v > 0.0 {
                        acc += v.powf(s) * w;
                    }
                }
            }
            acc
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub value: f64,
    pub s: f64,
    pub mu: f64,
    /// `(s points, μ points)` of the coarse scan.
    pub grid: (usize, usize),
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Default coarse grids: 64 log-spaced `s ∈ (0.01τ, 0.99τ)` and 32 `μ ∈ [0, 2]`.
pub fn default_grids(tau: f64) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = ((0.01 * tau).ln(), (0.99 * tau).ln());
    let s = (0..64).map(|k| (lo + (hi - lo) * k as f64 / 63.0).exp()).collect();
    let mu = (0..32).map(|k| 2.0 * k as f64 / 31.0).collect();
    (s, mu)
}

/// `inf_{s,μ} [C_{s,τ}(ρ) · row sum]^{1/s}` on the grid, then golden-section refined around the best cell.
pub fn strong_disorder_threshold(
    model: &HoppingModel,
    spec: &DistributionSpec,
    s_grid: &[f64],
    mu_grid: &[f64],
) -> Result<ThresholdReport> {
    if s_grid.is_empty() || mu_grid.is_empty() {
        return invalid("empty (s, μ) grid");
    }
    let (tau, c_tau) = holder_constant(spec)?;
    if s_grid.iter().any(|&s| !(s > 0.0 && s < tau)) || mu_grid.iter().any(|&m| !(m >= 0.0)) {
        return invalid("s must lie in (0, τ) and μ ≥ 0");
    }
    let f = |s: f64, mu: f64| (c_s_tau(s, tau, c_tau) * fractional_row_sum(model, s, mu)).powf(1.0 / s);
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for (i, &s) in s_grid.iter().enumerate() {
        for (j, &mu) in mu_grid.iter().enumerate() {
            let v = f(s, mu);
            if v < best.0 {
                best = (v, i, j);
            }
        }
    }
    let (mut value, i, j) = best;
    let (mut s_opt, mut mu_opt) = (s_grid[i], mu_grid[j]);
    if value > 0.0 && value.is_finite() {
        let mut sorted_s = s_grid.to_vec();
        sorted_s.sort_by(f64::total_cmp);
        let k = sorted_s.iter().position(|&x| x == s_opt).unwrap_or(0);
        let (sa, sb) = (sorted_s[k.saturating_sub(1)], sorted_s[(k + 1).min(sorted_s.len() - 1)]);
        if sb > sa {
            let (s_new, v) = golden_min(&|s| f(s, mu_opt), sa, sb, 80);
            if v < value {
                value = v;
                s_opt = s_new;
            }
        }
        let mut sorted_mu = mu_grid.to_vec();
        sorted_mu.sort_by(f64::total_cmp);
        let k = sorted_mu.iter().position(|&x| x == mu_opt).unwrap_or(0);
        let (ma, mb) = (sorted_mu[k.saturating_sub(1)], sorted_mu[(k + 1).min(sorted_mu.len() - 1)]);
        if mb > ma {
            let (m_new, v) = golden_min(&|m| f(s_opt, m), ma, mb, 80);
            if v < value {
                value = v;
                mu_opt = m_new;
            }
        }
    }
    Ok(ThresholdReport { value, s: s_opt, mu: mu_opt, grid: (s_grid.len(), mu_grid.len()) })
}

/// `B = √e`, the bound on `∫|v| ρ_a(dv)` over truncated Gaussians with `a ≥ 1`.
pub fn truncated_gaussian_moment_bound() -> f64 {
    E.sqrt()
}

/// Bound on `∫ ρ_a^{1+q}` over truncated Gaussians with `a ≥ 1`:
/// `e^{(1+q)/2} 2^{−(1+q)} √(2π/(1+q))`.
pub fn truncated_gaussian_density_bound(q: f64) -> f64 {
    ((1.0 + q) / 2.0).exp() / 2f64.powf(1.0 + q) * (2.0 * PI / (1.0 + q)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsBound {
    pub k: f64,
    pub p: f64,
    pub c_pq: f64,
}

/// Explicit constant `K(B, C, s, t, q) ≥ D_{s,1}(ρ)`.
pub fn d_s1_bound(b_mom: f64, c_mom: f64, s: f64, t: f64, q: f64) -> Result<DsBound> {
    if !(t > 0.0 && t <= 1.0) || !(q > 0.0) || !(b_mom > 0.0) || !(c_mom > 0.0) {
        return invalid("need t ∈ (0, 1], q > 0 and positive moment constants");
    }
    let smax = 1.0 / (1.0 + 2.0 / t + 1.0 / q);
    if !(s > 0.0 && s < smax) {
        return invalid(format!("s = {s} outside the admissible range (0, {smax})"));
    }
    let p = s / (1.0 - 2.0 * s / t);
    let c_pq = 1.0 + p * (2f64.powf(q) * c_mom).powf(1.0 / (1.0 + q)) / (q / (1.0 + q) - p);
    let bst = b_mom.powf(s / t);
    let k1 = 5.0 * (2.0 * b_mom).powf(s / t);
    let k2 = 2f64.powf(2.0 * s + 1.0) * bst * (1.0 + bst * c_pq);
    Ok(DsBound { k: k1.max(k2), p, c_pq })
}

/// `(a^s(1−s), a^s)` bracketing `D_{s,1}` of the uniform law on `[−a, a]`.
pub fn d_s1_uniform_bracket(a: f64, s: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(s > 0.0 && s < 1.0) {
        return invalid("need a > 0 and s ∈ (0, 1)");
    }
    let u = a.powf(s);
    Ok((u * (1.0 - s), u))
}

/// `C_{s,α} = (n|𝒢|²/2)(1 + 32/(s²α²))`.
pub fn c_s_alpha(n: usize, gap: f64, s: f64, alpha: f64) -> f64 {
    n as f64 * gap * gap / 2.0 * (1.0 + 32.0 / (s * s * alpha * alpha))
}

/// Right end `Δ(E)^{1+2/s}/(C_{s,α} D)^{1/s}` of the weak-disorder window.
pub fn weak_disorder_upper(
    e: f64,
    gaps: &GapGeometry,
    s: f64,
    alpha: f64,
    s_alpha: f64,
    d_s1: f64,
    n: usize,
) -> Result<f64> {
    let i = gaps.gap_containing(e).ok_or_else(|| Error::InvalidInput(format!("E = {e} is not in an internal gap")))?;
    let g = gaps.gap_size(i).unwrap_or(0.0);
    if 2.0 * s_alpha > g / 2.0 {
        return invalid(format!("2 S_α = {} exceeds |𝒢|/2 = {}", 2.0 * s_alpha, g / 2.0));
    }
    if !(s > 0.0 && s < 1.0) || !(d_s1 > 0.0) {
        return invalid("need s ∈ (0, 1) and D > 0");
    }
    let delta = gaps.distance_to_spectrum(e);
    let c = c_s_alpha(n, g, s, alpha);
    Ok(delta.powf(1.0 + 2.0 / s) / (c * d_s1).powf(1.0 / s))
}

/// `λ₀(E)`: largest λ keeping `E` inside `𝒢ᵢ(λ)`.
pub fn lambda_zero(e: f64, gaps: &GapGeometry) -> Result<f64> {
    let i = gaps.gap_containing(e).ok_or_else(|| Error::InvalidInput(format!("E = {e} is not in an internal gap")))?;
    let (beta, alpha) = (gaps.bands[i - 1].1, gaps.bands[i].0);
    let left = if gaps.b > 0.0 { (e - beta) / gaps.b } else { f64::INFINITY };
    let right = if gaps.a > 0.0 { (alpha - e) / gaps.a } else { f64::INFINITY };
    Ok(left.min(right))
}

/// `a₀ = (4 K C_{s,α} / |𝒢|²)^{1/s}`.
pub fn a_zero(gap: f64, s: f64, c_s_alpha: f64, k: f64) -> f64 {
    (4.0 * k * c_s_alpha / (gap * gap)).powf(1.0 / s)
}

/// `min{1, 4π n C_τ |Λ_L| ε^τ / λ^τ}`.
pub fn wegner_bound(n: usize, c_tau: f64, tau: f64, side: usize, eps: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return invalid("Wegner bound diverges at λ = 0");
    }
    if !(eps > 0.0) {
        return invalid("ε must be positive");
    }
    let v = 4.0 * PI * n as f64 * c_tau * (side * side) as f64 * (eps / lambda).powf(tau);
    Ok(v.min(1.0))
}

/// `Δ_{qL} = (2√2 S_α (3θ+5)/(αλ)) · 8 log(qL)/(qL)`.
pub fn msa_delta(alpha: f64, s_alpha: f64, theta: f64, lambda: f64, ql: f64) -> f64 {
    2.0 * SQRT_2 * s_alpha * (3.0 * theta + 5.0) / (alpha * lambda) * 8.0 * ql.ln() / ql
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandEdgeDelta {
    pub external: f64,
    pub internal: f64,
    /// `λ ≥ |𝒢ᵢ|/(a+b)`: the internal gap has closed.
    pub closed: bool,
}

fn band_edge_exponent(beta: TailDecay, eps: f64) -> Result<f64> {
    match beta {
        TailDecay::Absent => invalid("band-edge estimates need a tail exponent β"),
        TailDecay::Power(b) if b > 2.0 => Ok(b / ((b - 2.0) * (1.0 - eps))),
        TailDecay::Power(_) => invalid("β must exceed 2"),
        TailDecay::Infinite => Ok(1.0 / (1.0 - eps)),
    }
}

/// `δ(λ) = C_ε min{1, λ^{β/((β−2)(1−ε))}}` and its internal-gap variant.
pub fn band_edge_delta(
    lambda: f64,
    gap: f64,
    a: f64,
    b: f64,
    beta: TailDecay,
    eps: f64,
    c_eps: f64,
) -> Result<BandEdgeDelta> {
    if !(eps > 0.0 && eps < 1.0) || !(lambda >= 0.0) {
        return invalid("need ε ∈ (0, 1) and λ ≥ 0");
    }
    let x = band_edge_exponent(beta, eps)?;
    let power = lambda.powf(x);
    let external = c_eps * power.min(1.0);
    let room = gap / (a + b) - lambda;
    if room <= 0.0 {
        return Ok(BandEdgeDelta { external, internal: 0.0, closed: true });
    }
    let internal = c_eps * power.min(1.0).min(room.powf(1.0 / (1.0 - eps)));
    Ok(BandEdgeDelta { external, internal, closed: false })
}

/// Inputs of the seven initial-scale length thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsaLengthInputs {
    pub alpha: f64,
    pub s_alpha: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub eps: f64,
    pub beta: TailDecay,
    /// Tail constant `C` of `ρ([b−ε, b]) ≤ C ε^β`.
    pub tail_constant: f64,
    pub n: usize,
    pub p0: f64,
    pub tau: f64,
    pub c_tau: f64,
    pub gap: f64,
    pub h0_norm: f64,
    pub q: usize,
    pub r: usize,
    pub lambda: f64,
}

impl MsaLengthInputs {
    pub const DEFAULT_P0: f64 = 0.5;
}

/// `[qL⁽¹⁾, …, qL⁽⁷⁾]`, with `c_ε = 1/(eε)` and `c_{ε,β} = β/(eε(β−2))`.
pub fn msa_length_thresholds(x: &MsaLengthInputs) -> Result<[f64; 7]> {
    if !(x.eps > 0.0 && x.eps < 1.0) || !(x.lambda > 0.0) || !(x.alpha > 0.0) || !(x.s_alpha > 0.0) {
        return invalid("need ε ∈ (0, 1), λ > 0, α > 0, S_α > 0");
    }
    if !(x.tau * x.theta > 2.0) {
        return invalid("need θ > 2/τ");
    }
    let k = 3.0 * x.theta + 5.0;
    let inv = 1.0 / (1.0 - x.eps);
    let c_eps = 1.0 / (E * x.eps);
    let ab = x.a + x.b;
    let l1 = (32.0 * SQRT_2 * x.s_alpha * k * c_eps / (x.alpha * ab)).powf(inv) * x.lambda.powf(-inv);
    let room = x.gap / ab - x.lambda;
    let l2 = if room > 0.0 {
        (8.0 * SQRT_2 * x.s_alpha * k * c_eps / (x.alpha * ab)).powf(inv) * room.powf(-inv)
    } else {
        f64::INFINITY
    };
    let l3 = (4.0 * SQRT_2 * k * c_eps / x.alpha).powf(inv);
    let l4 = 3f64.powf(1.0 / (4.0 * k));
    let l5 = E
        .max(16.0 * (x.q * x.r) as f64)
        .max((2.0 * SQRT_2 * x.alpha * (1.0 + 8.0 * x.h0_norm) / (x.s_alpha * k)).powf(1.0 / x.theta));
    let l6 = match x.beta {
        TailDecay::Absent => return invalid("band-edge thresholds need a tail exponent β"),
        TailDecay::Power(beta) => {
            if !(beta > 2.0) {
                return invalid("β must exceed 2");
            }
            let c_eb = beta / (E * x.eps * (beta - 2.0));
            let e6 = 1.0 / ((beta - 2.0) * (1.0 - x.eps));
            let log_base = (2.0 * x.tail_constant * x.n as f64 * x.p0).ln()
                + beta * (16.0 * SQRT_2 * x.s_alpha * k * c_eb / x.alpha).ln();
            (e6 * log_base - beta * e6 * x.lambda.ln()).exp()
        }
        TailDecay::Infinite => (16.0 * SQRT_2 * x.s_alpha * k * c_eps / x.alpha).powf(inv) * x.lambda.powf(-inv),
    };
    let e7 = 1.0 / (x.tau * x.theta - 2.0);
    let l7 = (8.0 * PI * x.n as f64 * x.c_tau * x.p0).powf(e7) * x.lambda.powf(-x.tau * e7);
    Ok([l1, l2, l3, l4, l5, l6, l7])
}

/// Every constant of the weak/strong-disorder pipeline for one model and distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub gap_index: usize,
    pub gap: f64,
    pub alpha: f64,
    pub s_alpha_exact: f64,
    pub s_alpha_overbound: f64,
    pub s: f64,
    pub t: f64,
    pub q: f64,
    pub b_moment: f64,
    pub c_moment: f64,
    pub k: f64,
    pub p: f64,
    pub c_pq: f64,
    pub c_s_alpha: f64,
    pub a0: f64,
    pub gap_over_2a0: f64,
    pub lambda_zero_mid_gap: f64,
    pub strong: ThresholdReport,
    /// `λ_ρ · ‖f‖_{L¹[−a,a]} / max|hopping|` for truncated Gaussians, else `λ_ρ / max|hopping|`.
    pub strong_coefficient: f64,
}

/// Composes the evaluators: gap from the band structure, α from `2 S_α = |𝒢|/2`
/// on the entrywise over-bound, `K` from the truncated-Gaussian moment bounds.
pub fn constants_report(
    model: &HoppingModel,
    spec: &DistributionSpec,
    bands: &BandStructure,
    gap_index: usize,
    s: f64,
    t: f64,
    q: f64,
) -> Result<ConstantsReport> {
    let geom = GapGeometry::new(bands, spec.a, spec.b);
    let gap = geom.gap_size(gap_index).ok_or_else(|| Error::InvalidInput("gap index out of range".into()))?;
    if !(gap > 0.0) {
        return Err(Error::Gapless(format!("gap {gap_index} is closed")));
    }
    let alpha = alpha_for_overbound(model, gap / 2.0)?;
    let s_alpha_exact = combes_thomas_salpha(model, alpha)?;
    let s_alpha_overbound = combes_thomas_salpha_overbound(model, alpha)?;
    let b_moment = truncated_gaussian_moment_bound();
    let c_moment = truncated_gaussian_density_bound(q);
    let ds = d_s1_bound(b_moment, c_moment, s, t, q)?;
    let csa = c_s_alpha(model.n(), gap, s, alpha);
    let a0 = a_zero(gap, s, csa, ds.k);
    let mid = 0.5 * (bands.bands[gap_index - 1].upper + bands.bands[gap_index].lower);
    let lz = lambda_zero(mid, &geom)?;
    let (sg, mg) = default_grids(spec.tau);
    let strong = strong_disorder_threshold(model, spec, &sg, &mg)?;
    let hop_scale = model
        .hoppings()
        .iter()
        .flat_map(|(d, h)| {
            let n = model.n();
            (0..n * n).filter_map(move |k| {
                let (i, j) = (k / n, k % n);
                (!(*d == crate::lattice::LatticePoint::ORIGIN && i == j)).then(|| h[(i, j)].norm())
            })
        })
        .fold(0.0, f64::max);
    let norm = match spec.kind {
        crate::disorder::DistributionKind::TruncatedGaussian => statrs::function::erf::erf(spec.a / SQRT_2),
        _ => 1.0,
    };
    let strong_coefficient = if hop_scale > 0.0 { strong.value * norm / hop_scale } else { 0.0 };
    Ok(ConstantsReport {
        gap_index,
        gap,
        alpha,
        s_alpha_exact,
        s_alpha_overbound,
        s,
        t,
        q,
        b_moment,
        c_moment,
        k: ds.k,
        p: ds.p,
        c_pq: ds.c_pq,
        c_s_alpha: csa,
        a0,
        gap_over_2a0: gap / (2.0 * a0),
        lambda_zero_mid_gap: lz,
        strong,
        strong_coefficient,
    })
}
