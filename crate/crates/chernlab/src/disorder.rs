//! Single-site laws ρ and reproducible random potentials.

use std::f64::consts::{PI, SQRT_2};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{invalid, Error, Result};
use crate::lattice::{LatticeBox, LatticePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Uniform,
    TruncatedGaussian,
    CustomDensity,
}

/// Edge decay `ρ([b−ε, b]) ≤ C ε^β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "beta", rename_all = "snake_case")]
pub enum TailDecay {
    Absent,
    Power(f64),
    /// Faster than any power.
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub c_tau: f64,
    pub beta: TailDecay,
    /// `(v, ρ(v))` nodes of a piecewise-linear density, normalized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<(f64, f64)>>,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / SQRT_2))
}

impl DistributionSpec {
    /// Uniform law on `[−a, b]`.
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) || !(a + b).is_finite() {
            return invalid("uniform support needs a, b ≥ 0 and a + b > 0");
        }
        Ok(Self {
            kind: DistributionKind::Uniform,
            a,
            b,
            tau: 1.0,
            c_tau: 1.0 / (a + b),
            beta: TailDecay::Absent,
            density: None,
        })
    }

    /// Standard normal density restricted to `[−a, a]` and renormalized.
    pub fn truncated_gaussian(a: f64) -> Result<Self> {
        if !(a >= 1.0) || !a.is_finite() {
            return invalid(format!("truncated Gaussian needs finite a ≥ 1, got {a}"));
        }
        let z = erf(a / SQRT_2);
        Ok(Self {
            kind: DistributionKind::TruncatedGaussian,
            a,
            b: a,
            tau: 1.0,
            c_tau: 1.0 / ((2.0 * PI).sqrt() * z),
            beta: TailDecay::Infinite,
            density: None,
        })
    }

    /// Piecewise-linear density through `nodes` (sorted by `v`, nonnegative values).
    pub fn custom_density(nodes: Vec<(f64, f64)>, beta: TailDecay) -> Result<Self> {
        if nodes.len() < 2 {
            return invalid("custom density needs at least two nodes");
        }
        if nodes.iter().any(|(v, p)| !v.is_finite() || !p.is_finite()) {
            return invalid("custom density has no computable supremum (non-finite node)");
        }
        if nodes.iter().any(|&(_, p)| p < 0.0) || nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return invalid("custom density nodes must be increasing with nonnegative values");
        }
        let mass: f64 = nodes.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
        if !(mass > 0.0) {
            return invalid("custom density has zero mass");
        }
        let (lo, hi) = (nodes[0].0, nodes[nodes.len() - 1].0);
        if lo > 0.0 || hi < 0.0 {
            return invalid("support [−a, b] must contain 0");
        }
        if let TailDecay::Power(b) = beta {
            if !(b > 2.0) {
                return invalid("tail exponent must exceed 2");
            }
        }
        let nodes: Vec<_> = nodes.into_iter().map(|(v, p)| (v, p / mass)).collect();
        let peak = nodes.iter().map(|n| n.1).fold(0.0, f64::max);
        Ok(Self {
            kind: DistributionKind::CustomDensity,
            a: -lo,
            b: hi,
            tau: 1.0,
            c_tau: peak,
            beta,
            density: Some(nodes),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.b >= 0.0 && self.a + self.b > 0.0) {
            return invalid("support needs a, b ≥ 0 and a + b > 0");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) || !(self.c_tau > 0.0) {
            return invalid("Hölder data needs τ ∈ (0, 1] and C_τ > 0");
        }
        if self.kind == DistributionKind::CustomDensity && self.density.is_none() {
            return invalid("custom_density requires a density table");
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        (-self.a, self.b)
    }

    pub fn width(&self) -> f64 {
        self.a + self.b
    }

    pub fn pdf(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        if v < lo || v > hi {
            return 0.0;
        }
        match self.kind {
            DistributionKind::Uniform => 1.0 / self.width(),
            DistributionKind::TruncatedGaussian => self.c_tau * (-0.5 * v * v).exp(),
            DistributionKind::CustomDensity => {
                let t = self.density.as_deref().unwrap_or(&[]);
                let i = t.partition_point(|n| n.0 <= v);
                if i == 0 {
                    return t.first().map_or(0.0, |n| n.1);
                }
                if i >= t.len() {
                    return t.last().map_or(0.0, |n| n.1);
                }
                let (l, r) = (t[i - 1], t[i]);
                l.1 + (r.1 - l.1) * (v - l.0) / (r.0 - l.0)
            }
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        if v <= lo {
            return 0.0;
        }
        if v >= hi {
            return 1.0;
        }
        match self.kind {
            DistributionKind::Uniform => (v - lo) / self.width(),
            DistributionKind::TruncatedGaussian => {
                let z = erf(self.a / SQRT_2);
                ((std_normal_cdf(v) - std_normal_cdf(-self.a)) / z).clamp(0.0, 1.0)
            }
            DistributionKind::CustomDensity => {
                let t = self.density.as_deref().unwrap_or(&[]);
                let mut acc = 0.0;
                for w in t.windows(2) {
                    let (l, r) = (w[0], w[1]);
                    if v >= r.0 {
                        acc += 0.5 * (l.1 + r.1) * (r.0 - l.0);
                    } else {
                        let pv = self.pdf(v);
                        acc += 0.5 * (l.1 + pv) * (v - l.0);
                        break;
                    }
                }
                acc.clamp(0.0, 1.0)
            }
        }
    }

    /// `ρ([u, u + t])`.
    pub fn mass(&self, u: f64, t: f64) -> f64 {
        self.cdf(u + t) - self.cdf(u)
    }

    /// Inverse CDF; closed form for the uniform law, bisection to 1e-14 otherwise.
    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        let u = u.clamp(0.0, 1.0);
        if self.kind == DistributionKind::Uniform {
            return (lo + u * self.width()).clamp(lo, hi);
        }
        let (mut l, mut r) = (lo, hi);
        while r - l > 1e-14 {
            let m = 0.5 * (l + r);
            if m <= l || m >= r {
                break;
            }
            if self.cdf(m) < u {
                l = m;
            } else {
                r = m;
            }
        }
        0.5 * (l + r)
    }

    /// Exponent of the tail decay, `None` if R2 is not assumed, `∞` for the sentinel.
    pub fn beta_value(&self) -> Option<f64> {
        match self.beta {
            TailDecay::Absent => None,
            TailDecay::Power(b) => Some(b),
            TailDecay::Infinite => Some(f64::INFINITY),
        }
    }
}

/// `(τ, C_τ)`; bounded densities give `τ = 1` and `C₁ = ‖ρ‖_∞`.
pub fn holder_constant(spec: &DistributionSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    if !spec.c_tau.is_finite() {
        return Err(Error::InvalidInput("Hölder constant is not finite".into()));
    }
    Ok((spec.tau, spec.c_tau))
}

/// Values `ω_{γ,i}` indexed by `site_rank · n + orbital`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub realization_index: u64,
    pub box_side: usize,
    pub n: usize,
}

impl DisorderSample {
    pub fn value(&self, lbox: &LatticeBox, site: LatticePoint, orbital: usize) -> Option<f64> {
        lbox.rank(site).map(|r| self.values[r * self.n + orbital])
    }
}

/// I.i.d. draws for every `(site, orbital)` in the box.
///
/// Realization `k` reads ChaCha8 stream `k` of the master seed; the draw for
/// matrix index `j` is the `j`-th 64-bit word pair of that stream, so values
/// never depend on evaluation order or thread count.
pub fn sample_potential(
    spec: &DistributionSpec,
    lbox: &LatticeBox,
    n: usize,
    seed: u64,
    realization_index: u64,
) -> DisorderSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization_index);
    rng.set_word_pos(0);
    let (lo, hi) = spec.support();
    let values = (0..lbox.len() * n)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            spec.quantile(u).clamp(lo, hi)
        })
        .collect();
    DisorderSample { values, seed, realization_index, box_side: lbox.side(), n }
}

/// `∫ g(v) |v − z|^{−s} ρ(v) dv` for real `z`, with the singularity removed by `u = |v − z|^{1−s}`.
fn singular_integral(spec: &DistributionSpec, g: &dyn Fn(f64) -> f64, z: f64, s: f64, nodes: usize) -> f64 {
    let (lo, hi) = spec.support();
    let side = |d0: f64, d1: f64, dir: f64| -> f64 {
        if d1 <= d0 {
            return 0.0;
        }
        let p = 1.0 / (1.0 - s);
        let f = |u: f64| {
            let v = z + dir * u.powf(p);
            g(v) * spec.pdf(v) * p
        };
        simpson(&f, d0.max(0.0).powf(1.0 - s), d1.powf(1.0 - s), nodes)
    };
    if z <= lo {
        side(lo - z, hi - z, 1.0)
    } else if z >= hi {
        side(z - hi, z - lo, -1.0)
    } else {
        side(0.0, hi - z, 1.0) + side(0.0, z - lo, -1.0)
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = n.max(2) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Estimate of `D_{s,1}(ρ)` by scanning real `z` across and beyond the support.
pub fn d_s1_estimate(spec: &DistributionSpec, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return invalid("s must lie in (0, 1)");
    }
    spec.validate()?;
    let (lo, _) = spec.support();
    let w = spec.width();
    let mut best = 0.0f64;
    let m = 240;
    for k in 0..=m {
        let z = lo - 0.5 * w + 2.0 * w * k as f64 / m as f64;
        let num = singular_integral(spec, &|v: f64| v.abs().powf(s), z, s, 2000);
        let den = singular_integral(spec, &|_| 1.0, z, s, 2000);
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    #[test]
    fn truncated_gaussian_a1() {
        let d = DistributionSpec::truncated_gaussian(1.0).unwrap();
        let z = erf(1.0 / SQRT_2);
        assert!((z - 0.682_689_492_137_085_9).abs() < 1e-9, "{z}");
        assert!((d.c_tau - 0.5844).abs() < 5e-4);
        assert!((d.pdf(0.0) - d.c_tau).abs() < 1e-15);
        assert_eq!(d.beta, TailDecay::Infinite);
        assert!(DistributionSpec::truncated_gaussian(0.5).is_err());
    }

    #[test]
    fn truncated_gaussian_wide_is_normal() {
        let d = DistributionSpec::truncated_gaussian(12.0).unwrap();
        assert!((d.pdf(0.3) - (-0.045f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-14);
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn truncated_gaussian_first_moment_below_sqrt_e() {
        for a in [1.0, 1.5, 2.0, 5.0, 20.0] {
            let d = DistributionSpec::truncated_gaussian(a).unwrap();
            let exact = (2.0 / PI).sqrt() * (1.0 - (-a * a / 2.0).exp()) / erf(a / SQRT_2);
            let quad = simpson(&|v: f64| v.abs() * d.pdf(v), -a, a, 4000);
            assert!((exact - quad).abs() < 1e-6);
            assert!(exact <= 1f64.exp().sqrt());
        }
    }

    #[test]
    fn holder_constants() {
        assert_eq!(holder_constant(&DistributionSpec::uniform(1.0, 1.0).unwrap()).unwrap(), (1.0, 0.5));
        let (_, c) = holder_constant(&DistributionSpec::uniform(3.0, 3.0).unwrap()).unwrap();
        assert!((c - 1.0 / 6.0).abs() < 1e-15);
        let (t, c) = holder_constant(&DistributionSpec::truncated_gaussian(1.0).unwrap()).unwrap();
        assert_eq!(t, 1.0);
        assert!((c - 0.5844).abs() < 5e-4);
    }

    #[test]
    fn custom_density_normalizes() {
        let d = DistributionSpec::custom_density(vec![(-1.0, 0.0), (0.0, 2.0), (1.0, 0.0)], TailDecay::Power(3.0)).unwrap();
        assert!((d.c_tau - 1.0).abs() < 1e-15);
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-14);
        assert!((d.quantile(0.125) + 0.5).abs() < 1e-12);
        assert!(DistributionSpec::custom_density(vec![(-1.0, f64::INFINITY), (1.0, 1.0)], TailDecay::Absent).is_err());
    }

    #[test]
    fn uniform_sampling_sanity() {
        let d = DistributionSpec::uniform(1.0, 1.0).unwrap();
        let lbox = LatticeBox::new(224).unwrap();
        let s = sample_potential(&d, &lbox, 2, 7, 0);
        assert!(s.values.len() > 100_000);
        let mean = s.values.iter().sum::<f64>() / s.values.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!(s.values.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn truncated_gaussian_support_and_ks() {
        let d = DistributionSpec::truncated_gaussian(2.0).unwrap();
        let lbox = LatticeBox::new(100).unwrap();
        let s = sample_potential(&d, &lbox, 1, 11, 3);
        assert!(s.values.iter().all(|v| v.abs() <= 2.0));
        let mut v = s.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let ks = v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = d.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS {ks}");
    }

    #[test]
    fn sampling_reproducible() {
        let d = DistributionSpec::truncated_gaussian(2.0).unwrap();
        let lbox = LatticeBox::new(9).unwrap();
        let a = sample_potential(&d, &lbox, 2, 42, 5);
        let b = sample_potential(&d, &lbox, 2, 42, 5);
        let c = sample_potential(&d, &lbox, 2, 42, 6);
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        let site = LatticePoint::new(-4, 2);
        assert_eq!(a.value(&lbox, site, 1), Some(a.values[lbox.rank(site).unwrap() * 2 + 1]));
    }

    #[test]
    fn holder_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut unit = || (RngCore::next_u64(&mut rng) >> 11) as f64 / (1u64 << 53) as f64;
        for d in [
            DistributionSpec::uniform(1.0, 1.0).unwrap(),
            DistributionSpec::uniform(0.5, 2.0).unwrap(),
            DistributionSpec::truncated_gaussian(1.0).unwrap(),
            DistributionSpec::truncated_gaussian(3.0).unwrap(),
        ] {
            for _ in 0..200 {
                let u = -d.a - 0.5 + (d.width() + 1.0) * unit();
                let t = unit().max(1e-6);
                assert!(d.mass(u, t) <= d.c_tau * t.powf(d.tau) * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn d_s1_uniform_within_bracket() {
        for a in [1.0, 4.0] {
            let d = DistributionSpec::uniform(a, a).unwrap();
            let s = 0.5;
            let est = d_s1_estimate(&d, s).unwrap();
            let (lo, hi) = (a.powf(s) * (1.0 - s), a.powf(s));
            assert!(est >= lo * (1.0 - 1e-3) && est <= hi * (1.0 + 1e-3), "a={a} est={est}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn quantile_inverts_cdf(u in 0.001f64..0.999, a in 1.0f64..4.0) {
            let d = DistributionSpec::truncated_gaussian(a).unwrap();
            let v = d.quantile(u);
            prop_assert!((d.cdf(v) - u).abs() < 1e-12);
            prop_assert!(v >= -a && v <= a);
        }

        #[test]
        fn samples_within_support(seed in any::<u64>(), idx in 0u64..1000, a in 0.1f64..3.0, b in 0.1f64..3.0) {
            let d = DistributionSpec::uniform(a, b).unwrap();
            let s = sample_potential(&d, &LatticeBox::new(4).unwrap(), 2, seed, idx);
            prop_assert!(s.values.iter().all(|&v| v >= -a && v <= b));
        }
    }
}
