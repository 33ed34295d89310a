//! Monte-Carlo estimators over disorder ensembles.
//!
//! Realization `k` always uses the potential drawn from stream `k` of the
//! master seed. Realizations may run on several threads; results are collected
//! and reduced in index order, so every estimate is independent of the thread count.

use std::collections::BTreeMap;

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::wegner_bound;
use crate::disorder::{holder_constant, sample_potential, DistributionSpec};
use crate::error::{invalid, Error, Result};
use crate::finite_volume::{projection_from_eigen, restrict, BoundaryCondition, FiniteOperator, RESONANCE_TOL};
use crate::lattice::{core_sites, inner_boundary, LatticeBox, LatticePoint};
use crate::linalg::{spectral_norm, trace_norm, Eigen};
use crate::model::{HoppingModel, ModelSpec};
use crate::output::Table;
use crate::stats::{linear_fit, mean_stderr, wilson_interval, LinearFit, Z99};
use crate::topology::chern_marker;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub model: ModelSpec,
    pub distribution: DistributionSpec,
    pub lambda: f64,
    pub box_l: usize,
    pub bc: BoundaryCondition,
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Worker threads; 0 picks the available parallelism.
    #[serde(default)]
    pub threads: usize,
}

struct Prepared {
    model: HoppingModel,
    lbox: LatticeBox,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return invalid("n_realizations must be at least 1");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return invalid("λ must be finite and nonnegative");
        }
        self.distribution.validate()
    }

    fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        Ok(Prepared { model: self.model.build()?, lbox: LatticeBox::new(self.box_l)? })
    }

    fn operator(&self, p: &Prepared, k: u64, lambda: f64, bc: BoundaryCondition) -> Result<FiniteOperator> {
        if lambda == 0.0 {
            return restrict(&p.model, None, 0.0, &p.lbox, bc);
        }
        let s = sample_potential(&self.distribution, &p.lbox, p.model.n(), self.master_seed, k);
        restrict(&p.model, Some(&s), lambda, &p.lbox, bc)
    }

    /// Runs `f` for realizations `0..n` and returns the results in index order.
    fn map_realizations<T: Send>(&self, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| (0..self.n_realizations as u64).into_par_iter().map(&f).collect())
    }

    fn describe(&self, t: Table) -> Table {
        let json = serde_json::to_string(self).unwrap_or_default();
        t.meta("master_seed", self.master_seed).meta("n_realizations", self.n_realizations).meta("config", json)
    }
}

/// `Tr|A|` of the `n × n` block at `(r·n, c·n)`.
fn block_trace_norm(m: &Mat<c64>, r: usize, c: usize, n: usize) -> f64 {
    let b = Mat::<c64>::from_fn(n, n, |i, j| m[(r * n + i, c * n + j)]);
    trace_norm(b.as_ref())
}

fn displacement(lbox: &LatticeBox, bc: BoundaryCondition, from: LatticePoint, to: LatticePoint) -> LatticePoint {
    match bc {
        BoundaryCondition::Simple => to - from,
        BoundaryCondition::Periodic => lbox.minimal_image(to - from),
    }
}

/// Ranks of the translation-averaging centres: every site under periodic bc, the central third otherwise.
fn centre_ranks(lbox: &LatticeBox, bc: BoundaryCondition) -> Vec<usize> {
    match bc {
        BoundaryCondition::Periodic => (0..lbox.len()).collect(),
        BoundaryCondition::Simple => {
            let inner = LatticeBox::new((lbox.side() / 3).max(1)).expect("positive side");
            inner.sites().iter().filter_map(|&s| lbox.rank(s)).collect()
        }
    }
}

fn orbital_rows(ranks: &[usize], n: usize) -> Vec<usize> {
    ranks.iter().flat_map(|&r| (0..n).map(move |i| r * n + i)).collect()
}

// ---------------------------------------------------------------- Wegner

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WegnerRow {
    pub eps: f64,
    pub hits: usize,
    pub empirical: f64,
    pub wilson_upper: f64,
    pub bound: f64,
}

/// Frequency of `dist(E, σ(H_Λ)) < ε` against the Wegner bound.
pub fn wegner_empirical(cfg: &EnsembleConfig, e: f64, eps_grid: &[f64]) -> Result<Vec<WegnerRow>> {
    if !(cfg.lambda > 0.0) {
        return invalid("the Wegner probe needs λ > 0");
    }
    let p = cfg.prepare()?;
    let dists = cfg.map_realizations(|k| {
        let ev = cfg.operator(&p, k, cfg.lambda, cfg.bc)?.eigenvalues()?;
        Ok(ev.iter().map(|v| (v - e).abs()).fold(f64::INFINITY, f64::min))
    })?;
    let (tau, c_tau) = holder_constant(&cfg.distribution)?;
    eps_grid
        .iter()
        .map(|&eps| {
            let hits = dists.iter().filter(|&&d| d < eps).count();
            let (_, hi) = wilson_interval(hits, dists.len(), Z99);
            Ok(WegnerRow {
                eps,
                hits,
                empirical: hits as f64 / dists.len() as f64,
                wilson_upper: hi,
                bound: wegner_bound(p.model.n(), c_tau, tau, cfg.box_l, eps, cfg.lambda)?,
            })
        })
        .collect()
}

pub fn wegner_table(cfg: &EnsembleConfig, e: f64, rows: &[WegnerRow]) -> Table {
    let mut t = cfg.describe(Table::new(&["eps", "hits", "empirical_prob", "wilson99_upper", "bound"]).meta("E", e));
    for r in rows {
        t.push(vec![r.eps.into(), r.hits.into(), r.empirical.into(), r.wilson_upper.into(), r.bound.into()]);
    }
    t
}

// ---------------------------------------------------------------- suitable boxes

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuitableEstimate {
    pub box_l: usize,
    pub successes: usize,
    pub n: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Largest `‖G(γ,ξ;E)‖` over `γ` in the core and `ξ` on the inner boundary, `None` at resonance.
fn core_to_boundary(eig: &Eigen, lbox: &LatticeBox, n: usize, e: f64, r: usize) -> Result<Option<f64>> {
    if eig.values.iter().any(|v| (v - e).abs() < RESONANCE_TOL) {
        return Ok(None);
    }
    let core = core_sites(lbox, r)?;
    let core_rows = orbital_rows(&core.sites().iter().filter_map(|&s| lbox.rank(s)).collect::<Vec<_>>(), n);
    let bnd: Vec<usize> = inner_boundary(lbox, r).iter().filter_map(|&s| lbox.rank(s)).collect();
    let bnd_rows = orbital_rows(&bnd, n);
    let m = eig.values.len();
    let vc = Mat::<c64>::from_fn(core_rows.len(), m, |i, a| eig.vectors[(core_rows[i], a)] * (eig.values[a] - e).recip());
    let vb = Mat::<c64>::from_fn(bnd_rows.len(), m, |i, a| eig.vectors[(bnd_rows[i], a)]);
    let g = &vc * vb.adjoint();
    let mut worst = 0.0f64;
    for ci in 0..core_rows.len() / n {
        for bi in 0..bnd.len() {
            let b = Mat::<c64>::from_fn(n, n, |i, j| g[(ci * n + i, bi * n + j)]);
            worst = worst.max(spectral_norm(b.as_ref()));
        }
    }
    Ok(Some(worst))
}

/// Fraction of realizations for which the box is `(ω, θ, E)`-suitable with range `r`.
///
/// Always uses simple boundary conditions.
pub fn suitable_box_probability(cfg: &EnsembleConfig, e: f64, theta: f64, r: usize) -> Result<SuitableEstimate> {
    let p = cfg.prepare()?;
    core_sites(&p.lbox, r)?;
    let threshold = (cfg.box_l as f64).powf(-theta);
    let ok = cfg.map_realizations(|k| {
        let op = cfg.operator(&p, k, cfg.lambda, BoundaryCondition::Simple)?;
        Ok(matches!(core_to_boundary(&op.eigen()?, &p.lbox, p.model.n(), e, r)?, Some(w) if w <= threshold))
    })?;
    let successes = ok.iter().filter(|&&b| b).count();
    let (ci_low, ci_high) = wilson_interval(successes, ok.len(), Z99);
    Ok(SuitableEstimate {
        box_l: cfg.box_l,
        successes,
        n: ok.len(),
        estimate: successes as f64 / ok.len() as f64,
        ci_low,
        ci_high,
    })
}

pub fn suitable_table(cfg: &EnsembleConfig, e: f64, theta: f64, rows: &[SuitableEstimate]) -> Table {
    let mut t = cfg.describe(
        Table::new(&["L", "successes", "n", "estimate", "ci99_low", "ci99_high"]).meta("E", e).meta("theta", theta),
    );
    for r in rows {
        t.push(vec![r.box_l.into(), r.successes.into(), r.n.into(), r.estimate.into(), r.ci_low.into(), r.ci_high.into()]);
    }
    t
}

// ---------------------------------------------------------------- projection decay

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub distance: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub prefactor: f64,
    pub mu: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub rows: Vec<DecayRow>,
    pub fit: Option<DecayFit>,
}

/// Number of energies approximating the supremum over the window.
pub const DECAY_ENERGIES: usize = 16;

/// `E[sup_{E ∈ I} Tr|P_E(c, c+γ)|]` per distance class, averaged over centres.
pub fn projection_decay(cfg: &EnsembleConfig, window: (f64, f64)) -> Result<DecayProfile> {
    let p = cfg.prepare()?;
    let n = p.model.n();
    let energies = crate::bloch::linspace(window.0, window.1, DECAY_ENERGIES);
    let centres = centre_ranks(&p.lbox, cfg.bc);
    let sites = p.lbox.sites();
    let mut classes: BTreeMap<i64, usize> = BTreeMap::new();
    let mut pair_class = Vec::with_capacity(centres.len() * sites.len());
    for &c in &centres {
        for &x in sites {
            let d = displacement(&p.lbox, cfg.bc, sites[c], x).norm_sq();
            let next = classes.len();
            pair_class.push(*classes.entry(d).or_insert(next));
        }
    }
    let per_real = cfg.map_realizations(|k| {
        let eig = cfg.operator(&p, k, cfg.lambda, cfg.bc)?.eigen()?;
        let rows = orbital_rows(&centres, n);
        let dim = eig.values.len();
        let mut cols = Mat::<c64>::zeros(dim, rows.len());
        let mut best = vec![0.0f64; centres.len() * sites.len()];
        let mut start = 0;
        for &e in &energies {
            let stop = eig.values.partition_point(|&v| v <= e);
            if stop > start {
                let chunk = eig.vectors.subcols(start, stop - start);
                let sel = Mat::<c64>::from_fn(rows.len(), stop - start, |i, a| chunk[(rows[i], a)]);
                cols += chunk * sel.adjoint();
                start = stop;
            }
            for ci in 0..centres.len() {
                for xi in 0..sites.len() {
                    let v = block_trace_norm(&cols, xi, ci, n);
                    let slot = &mut best[ci * sites.len() + xi];
                    *slot = slot.max(v);
                }
            }
        }
        let mut sum = vec![0.0; classes.len()];
        let mut cnt = vec![0usize; classes.len()];
        for (k, v) in best.iter().enumerate() {
            sum[pair_class[k]] += v;
            cnt[pair_class[k]] += 1;
        }
        Ok(sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect::<Vec<f64>>())
    })?;
    let mut rows = Vec::with_capacity(classes.len());
    for (&d2, &idx) in &classes {
        let vals: Vec<f64> = per_real.iter().map(|r| r[idx]).collect();
        let (mean, stderr) = mean_stderr(&vals);
        rows.push(DecayRow { distance: (d2 as f64).sqrt(), mean, stderr });
    }
    let limit = match cfg.bc {
        BoundaryCondition::Periodic => cfg.box_l as f64 / 2.0,
        BoundaryCondition::Simple => f64::INFINITY,
    };
    let fit = fit_decay(&rows, 1.0, limit);
    Ok(DecayProfile { rows, fit })
}

/// Log-linear fit of `mean ≈ C e^{−μ d}` over `d ∈ [dmin, dmax]`.
pub fn fit_decay(rows: &[DecayRow], dmin: f64, dmax: f64) -> Option<DecayFit> {
    let pts: Vec<_> = rows.iter().filter(|r| r.distance >= dmin && r.distance <= dmax && r.mean > 1e-300).collect();
    let x: Vec<f64> = pts.iter().map(|r| r.distance).collect();
    let y: Vec<f64> = pts.iter().map(|r| r.mean.ln()).collect();
    linear_fit(&x, &y).map(|f| DecayFit { prefactor: f.intercept.exp(), mu: -f.slope, r2: f.r2 })
}

pub fn decay_table(cfg: &EnsembleConfig, window: (f64, f64), prof: &DecayProfile) -> Table {
    let mut t = cfg.describe(Table::new(&["distance", "kernel_norm_mean", "stderr"]))
        .meta("E_window", format!("{}:{}", window.0, window.1));
    if let Some(f) = prof.fit {
        t = t.meta("fit_prefactor", f.prefactor).meta("fit_mu", f.mu).meta("fit_r2", f.r2);
    }
    for r in &prof.rows {
        t.push(vec![r.distance.into(), r.mean.into(), r.stderr.into()]);
    }
    t
}

// ---------------------------------------------------------------- IDS

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdsRow {
    pub e: f64,
    pub ids: f64,
    pub stderr: f64,
}

/// `N(E) = E[Tr P_E(0,0)]` as the per-site rank averaged over sites and realizations.
pub fn ids_estimate(cfg: &EnsembleConfig, e_grid: &[f64]) -> Result<Vec<IdsRow>> {
    let p = cfg.prepare()?;
    let sites = p.lbox.len() as f64;
    let per_real = cfg.map_realizations(|k| {
        let ev = cfg.operator(&p, k, cfg.lambda, cfg.bc)?.eigenvalues()?;
        Ok(e_grid.iter().map(|&e| ev.partition_point(|&v| v <= e) as f64 / sites).collect::<Vec<f64>>())
    })?;
    Ok(e_grid
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let (ids, stderr) = mean_stderr(&per_real.iter().map(|r| r[i]).collect::<Vec<_>>());
            IdsRow { e, ids, stderr }
        })
        .collect())
}

pub fn ids_table(cfg: &EnsembleConfig, rows: &[IdsRow]) -> Table {
    let mut t = cfg.describe(Table::new(&["E", "N", "stderr"]));
    for r in rows {
        t.push(vec![r.e.into(), r.ids.into(), r.stderr.into()]);
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityCheck {
    pub lhs: f64,
    /// `lhs` plus the 99% normal half-width.
    pub lhs_upper: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn ids_rhs(cfg: &EnsembleConfig, n: usize, de: f64, power_n: i32) -> Result<f64> {
    let (tau, c_tau) = holder_constant(&cfg.distribution)?;
    Ok(2f64.powf(2.0 - tau) * (n as f64).powi(power_n) * std::f64::consts::PI * c_tau * (de / cfg.lambda).abs().powf(tau))
}

/// `E[Tr(P_{E2} − P_{E1})(0,0)] ≤ 2^{2−τ} n π C_τ |ΔE/λ|^τ`.
pub fn ids_continuity_check(cfg: &EnsembleConfig, e1: f64, e2: f64) -> Result<ContinuityCheck> {
    if !(cfg.lambda > 0.0) || e2 < e1 {
        return invalid("need λ > 0 and E2 ≥ E1");
    }
    let rows = ids_estimate(cfg, &[e1, e2])?;
    let p = cfg.prepare()?;
    let n = p.model.n();
    let sites = p.lbox.len() as f64;
    let per_real = cfg.map_realizations(|k| {
        let ev = cfg.operator(&p, k, cfg.lambda, cfg.bc)?.eigenvalues()?;
        Ok((ev.partition_point(|&v| v <= e2) - ev.partition_point(|&v| v <= e1)) as f64 / sites)
    })?;
    let (lhs, se) = mean_stderr(&per_real);
    debug_assert!((lhs - (rows[1].ids - rows[0].ids)).abs() < 1e-12);
    let rhs = ids_rhs(cfg, n, e2 - e1, 1)?;
    let lhs_upper = lhs + Z99 * se;
    Ok(ContinuityCheck { lhs, lhs_upper, rhs, pass: lhs_upper <= rhs })
}

/// `sup_γ E[Tr|(P_{E2} − P_{E1})(0,γ)|] ≤ 2^{2−τ} n² π C_τ |ΔE/λ|^τ`.
pub fn ids_offdiagonal_check(cfg: &EnsembleConfig, e1: f64, e2: f64) -> Result<ContinuityCheck> {
    if !(cfg.lambda > 0.0) || e2 < e1 {
        return invalid("need λ > 0 and E2 ≥ E1");
    }
    let p = cfg.prepare()?;
    let n = p.model.n();
    let centres = centre_ranks(&p.lbox, cfg.bc);
    let sites = p.lbox.sites();
    let per_real = cfg.map_realizations(|k| {
        let eig = cfg.operator(&p, k, cfg.lambda, cfg.bc)?.eigen()?;
        let lo = eig.values.partition_point(|&v| v <= e1);
        let hi = eig.values.partition_point(|&v| v <= e2);
        let v = eig.vectors.subcols(lo, hi - lo);
        let d = v * v.adjoint();
        let mut acc: BTreeMap<(i64, i64), (f64, usize)> = BTreeMap::new();
        for &c in &centres {
            for (x, &xs) in sites.iter().enumerate() {
                let g = displacement(&p.lbox, cfg.bc, sites[c], xs);
                let e = acc.entry((g.g1, g.g2)).or_insert((0.0, 0));
                e.0 += block_trace_norm(&d, c, x, n);
                e.1 += 1;
            }
        }
        Ok(acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect::<BTreeMap<_, _>>())
    })?;
    let mut lhs = 0.0f64;
    let mut lhs_upper = 0.0f64;
    for key in per_real[0].keys() {
        let vals: Vec<f64> = per_real.iter().map(|m| m[key]).collect();
        let (m, se) = mean_stderr(&vals);
        if m > lhs {
            lhs = m;
        }
        lhs_upper = lhs_upper.max(m + Z99 * se);
    }
    let rhs = ids_rhs(cfg, n, e2 - e1, 2)?;
    Ok(ContinuityCheck { lhs, lhs_upper, rhs, pass: lhs_upper <= rhs })
}

// ---------------------------------------------------------------- disorder continuity

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderContinuity {
    /// `(Δλ, lhs, stderr)` down the ladder.
    pub ladder: Vec<(f64, f64, f64)>,
    pub exponent: Option<f64>,
    pub target: f64,
    pub pass: bool,
}

/// Coupled-sampling estimate of `sup_γ E[Tr|(P_{E,λ1} − P_{E,λ1+Δ})(0,γ)|]` on a halving ladder `Δ = (λ2−λ1)/2^k`.
pub fn disorder_continuity_check(cfg: &EnsembleConfig, lambda1: f64, lambda2: f64, e: f64) -> Result<DisorderContinuity> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return invalid("need λ1, λ2 > 0");
    }
    let (tau, _) = holder_constant(&cfg.distribution)?;
    let target = tau / (tau + 2.0);
    let span = lambda2 - lambda1;
    if span == 0.0 {
        return Ok(DisorderContinuity { ladder: vec![(0.0, 0.0, 0.0)], exponent: None, target, pass: true });
    }
    let p = cfg.prepare()?;
    let n = p.model.n();
    let centres = centre_ranks(&p.lbox, cfg.bc);
    let sites = p.lbox.sites();
    let deltas: Vec<f64> = (0..6).map(|k| span / 2f64.powi(k)).collect();
    let per_real = cfg.map_realizations(|k| {
        let base = cfg.operator(&p, k, lambda1, cfg.bc)?;
        let eig0 = base.eigen()?;
        let p0 = projection_from_eigen(&base, &eig0, e).matrix;
        let mut out = Vec::with_capacity(deltas.len());
        for &d in &deltas {
            let op = cfg.operator(&p, k, lambda1 + d, cfg.bc)?;
            let diff = &p0 - &crate::finite_volume::spectral_projection(&op, e)?.matrix;
            let mut acc: BTreeMap<(i64, i64), (f64, usize)> = BTreeMap::new();
            for &c in &centres {
                for (x, &xs) in sites.iter().enumerate() {
                    let g = displacement(&p.lbox, cfg.bc, sites[c], xs);
                    let slot = acc.entry((g.g1, g.g2)).or_insert((0.0, 0));
                    slot.0 += block_trace_norm(&diff, c, x, n);
                    slot.1 += 1;
                }
            }
            out.push(acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect::<BTreeMap<_, _>>());
        }
        Ok(out)
    })?;
    let mut ladder = Vec::with_capacity(deltas.len());
    for (i, &d) in deltas.iter().enumerate() {
        let (mut best, mut best_se) = (0.0f64, 0.0f64);
        for key in per_real[0][i].keys() {
            let vals: Vec<f64> = per_real.iter().map(|r| r[i][key]).collect();
            let (m, se) = mean_stderr(&vals);
            if m > best {
                best = m;
                best_se = se;
            }
        }
        ladder.push((d.abs(), best, best_se));
    }
    let pts: Vec<_> = ladder.iter().filter(|r| r.1 > 0.0).collect();
    let exponent = linear_fit(
        &pts.iter().map(|r| r.0.ln()).collect::<Vec<_>>(),
        &pts.iter().map(|r| r.1.ln()).collect::<Vec<_>>(),
    )
    .map(|f| f.slope);
    let pass = exponent.map_or(false, |x| x >= target - 0.1);
    Ok(DisorderContinuity { ladder, exponent, target, pass })
}

// ---------------------------------------------------------------- marker scan

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerRow {
    pub e: f64,
    pub lambda: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Disorder-averaged Chern marker over an `(E, λ)` grid; all λ share the same potentials.
pub fn averaged_marker_scan(cfg: &EnsembleConfig, e_grid: &[f64], lambda_grid: &[f64], window_l: usize) -> Result<Vec<MarkerRow>> {
    let p = cfg.prepare()?;
    let mut rows = Vec::with_capacity(e_grid.len() * lambda_grid.len());
    for &lam in lambda_grid {
        if !(lam >= 0.0) {
            return invalid("λ must be nonnegative");
        }
        let eval = |k: u64| -> Result<Vec<f64>> {
            let op = cfg.operator(&p, k, lam, cfg.bc)?;
            let eig = op.eigen()?;
            e_grid.iter().map(|&e| Ok(chern_marker(&projection_from_eigen(&op, &eig, e), window_l)?.value)).collect()
        };
        let per_real = if lam == 0.0 { vec![eval(0)?] } else { cfg.map_realizations(eval)? };
        for (i, &e) in e_grid.iter().enumerate() {
            let vals: Vec<f64> = per_real.iter().map(|r| r[i]).collect();
            let (mean, stderr) = mean_stderr(&vals);
            rows.push(MarkerRow { e, lambda: lam, mean, stderr, n: vals.len() });
        }
    }
    Ok(rows)
}

pub fn marker_table(cfg: &EnsembleConfig, window_l: usize, rows: &[MarkerRow]) -> Table {
    let mut t = cfg.describe(Table::new(&["E", "lambda", "marker_mean", "marker_stderr", "n_realizations"]))
        .meta("window_L", window_l);
    for r in rows {
        t.push(vec![r.e.into(), r.lambda.into(), r.mean.into(), r.stderr.into(), r.n.into()]);
    }
    t
}

// ---------------------------------------------------------------- moments

/// Smooth bump `g(E) = (1 − u²)⁴` with `u = (E − centre)/half_width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpWindow {
    pub lo: f64,
    pub hi: f64,
}

impl BumpWindow {
    pub fn eval(&self, e: f64) -> f64 {
        let c = 0.5 * (self.lo + self.hi);
        let h = 0.5 * (self.hi - self.lo);
        let u = (e - c) / h;
        if u.abs() < 1.0 {
            (1.0 - u * u).powi(4)
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// `⟨γ⟩^p = (1 + |γ|²)^{p/2}` per matrix index.
fn position_weights(lbox: &LatticeBox, n: usize, p: f64) -> Result<Vec<f64>> {
    let w: Vec<f64> = lbox
        .sites()
        .iter()
        .flat_map(|s| std::iter::repeat((1.0 + s.norm_sq() as f64).powf(p / 2.0)).take(n))
        .collect();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("⟨x⟩^{p} exceeds the double range on a box of side {}", lbox.side())));
    }
    Ok(w)
}

/// `M(T) = Σ_{a,b} g_a g_b ⟨a|⟨X⟩^p|b⟩ ⟨b|χ₀|a⟩ · 2/(2 − iT(E_a − E_b))` for one factorization.
fn moment_single(eig: &Eigen, weights: &[f64], origin_rows: &[usize], window: &BumpWindow, t_grid: &[f64]) -> Vec<f64> {
    let sel: Vec<usize> = (0..eig.values.len()).filter(|&a| window.eval(eig.values[a]) > 0.0).collect();
    if sel.is_empty() {
        return vec![0.0; t_grid.len()];
    }
    let dim = eig.values.len();
    let vs = Mat::<c64>::from_fn(dim, sel.len(), |i, a| eig.vectors[(i, sel[a])]);
    let xv = Mat::<c64>::from_fn(dim, sel.len(), |i, a| vs[(i, a)] * weights[i]);
    let w = vs.adjoint() * &xv;
    let rows = Mat::<c64>::from_fn(origin_rows.len(), sel.len(), |i, a| vs[(origin_rows[i], a)]);
    let r = rows.adjoint() * &rows;
    let e: Vec<f64> = sel.iter().map(|&a| eig.values[a]).collect();
    let g: Vec<f64> = e.iter().map(|&x| window.eval(x)).collect();
    t_grid
        .iter()
        .map(|&t| {
            let mut acc = c64::new(0.0, 0.0);
            for a in 0..sel.len() {
                for b in 0..sel.len() {
                    let k = c64::new(2.0, 0.0) / c64::new(2.0, -t * (e[a] - e[b]));
                    acc += w[(a, b)] * r[(b, a)] * k * (g[a] * g[b]);
                }
            }
            acc.re
        })
        .collect()
}

/// Disorder average of the time-averaged moment of order `p` at the origin cell.
pub fn time_averaged_moment(cfg: &EnsembleConfig, p: f64, window: BumpWindow, t_grid: &[f64]) -> Result<Vec<MomentRow>> {
    if !(p >= 0.0) || !(window.hi > window.lo) {
        return invalid("need p ≥ 0 and a nonempty window");
    }
    let prep = cfg.prepare()?;
    let n = prep.model.n();
    let weights = position_weights(&prep.lbox, n, p)?;
    let origin = prep.lbox.rank(LatticePoint::ORIGIN).expect("centred box contains the origin");
    let origin_rows: Vec<usize> = (0..n).map(|i| origin * n + i).collect();
    let per_real = if cfg.lambda == 0.0 {
        let eig = cfg.operator(&prep, 0, 0.0, cfg.bc)?.eigen()?;
        vec![moment_single(&eig, &weights, &origin_rows, &window, t_grid)]
    } else {
        cfg.map_realizations(|k| {
            let eig = cfg.operator(&prep, k, cfg.lambda, cfg.bc)?.eigen()?;
            Ok(moment_single(&eig, &weights, &origin_rows, &window, t_grid))
        })?
    };
    let out: Vec<MomentRow> = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (mean, stderr) = mean_stderr(&per_real.iter().map(|r| r[i]).collect::<Vec<_>>());
            MomentRow { t, mean, stderr }
        })
        .collect();
    if out.iter().any(|r| !r.mean.is_finite()) {
        return Err(Error::Overflow("moment is not finite".into()));
    }
    Ok(out)
}

/// Least-squares slope of `log M` against `log T`.
pub fn loglog_slope(rows: &[MomentRow]) -> Option<LinearFit> {
    let pts: Vec<_> = rows.iter().filter(|r| r.t > 0.0 && r.mean > 0.0).collect();
    linear_fit(
        &pts.iter().map(|r| r.t.ln()).collect::<Vec<_>>(),
        &pts.iter().map(|r| r.mean.ln()).collect::<Vec<_>>(),
    )
}

pub fn moment_table(cfg: &EnsembleConfig, p: f64, window: BumpWindow, rows: &[MomentRow]) -> Table {
    let mut t = cfg.describe(Table::new(&["T", "M", "stderr"]))
        .meta("p", p)
        .meta("g_window", format!("{}:{}", window.lo, window.hi));
    for r in rows {
        t.push(vec![r.t.into(), r.mean.into(), r.stderr.into()]);
    }
    t
}

/// Log-spaced grid of `count` points from `a` to `b`.
pub fn logspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    crate::bloch::linspace(a.ln(), b.ln(), count).into_iter().map(f64::exp).collect()
}
