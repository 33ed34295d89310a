//! Experiment runner: resolves a JSON config plus command-line overrides and
//! writes one CSV table and the resolved config per run.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chernlab::bloch::{band_structure, bloch_matrix, chern_number, haldane_phase_diagram, linspace};
use chernlab::bounds::{constants_report, GapGeometry};
use chernlab::disorder::{DistributionSpec, TailDecay};
use chernlab::finite_volume::BoundaryCondition;
use chernlab::linalg::hermitian_eigenvalues;
use chernlab::model::{HaldaneParams, ModelSpec};
use chernlab::output::{write_json, Table};
use chernlab::probes::{self, BumpWindow, EnsembleConfig};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Bloch,
    Chern,
    Marker,
    Spectrum,
    Thresholds,
    Wegner,
    MsaProbe,
    Decay,
    Ids,
    Moments,
    PhaseDiagram,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bloch => "bloch",
            Command::Chern => "chern",
            Command::Marker => "marker",
            Command::Spectrum => "spectrum",
            Command::Thresholds => "thresholds",
            Command::Wegner => "wegner",
            Command::MsaProbe => "msa-probe",
            Command::Decay => "decay",
            Command::Ids => "ids",
            Command::Moments => "moments",
            Command::PhaseDiagram => "phase-diagram",
        }
    }
}

/// `count` evenly spaced points from `start` to `stop`, written `start:stop:count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub const fn new(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count }
    }

    pub fn points(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected start:stop:count, got {s:?}"));
        };
        let f = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let count = n.trim().parse::<usize>().map_err(|e| format!("{n:?}: {e}"))?;
        if count == 0 {
            return Err("grid count must be positive".into());
        }
        Ok(Grid::new(f(a)?, f(b)?, count))
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((a, b))
}

fn parse_dims(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or_else(|| format!("expected NxM, got {s:?}"))?;
    Ok((a.parse().map_err(|e| format!("{a:?}: {e}"))?, b.parse().map_err(|e| format!("{b:?}: {e}"))?))
}

/// Scan grids and per-command parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scan {
    pub energy: f64,
    pub e_grid: Grid,
    pub lambda_grid: Grid,
    pub phi_grid: Grid,
    pub m_over_t2_grid: Grid,
    /// Torus mesh for Chern numbers and Bloch spectra.
    pub k_grid: usize,
    /// Torus mesh for band extrema.
    pub band_grid: usize,
    pub gap_index: usize,
    pub window: usize,
    pub eps: Vec<f64>,
    pub theta: f64,
    pub range: usize,
    pub box_sides: Vec<usize>,
    pub e_window: (f64, f64),
    pub moment_p: f64,
    pub g_window: (f64, f64),
    /// Log-spaced.
    pub t_grid: Grid,
    pub s: f64,
    pub t: f64,
    pub q: f64,
}

impl Default for Scan {
    fn default() -> Self {
        Self {
            energy: 0.0,
            e_grid: Grid::new(-0.5, 0.5, 11),
            lambda_grid: Grid::new(0.0, 3.0, 31),
            phi_grid: Grid::new(-PI, PI, 41),
            m_over_t2_grid: Grid::new(-6.0, 6.0, 41),
            k_grid: 48,
            band_grid: 201,
            gap_index: 1,
            window: 6,
            eps: vec![1e-2, 1e-3, 1e-4],
            theta: 2.5,
            range: 1,
            box_sides: vec![7, 13, 19],
            e_window: (-0.2, 0.2),
            moment_p: 2.0,
            g_window: (-2.5, -1.5),
            t_grid: Grid::new(1.0, 100.0, 9),
            s: 0.25,
            t: 1.0,
            q: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ensemble {
    pub lambda: f64,
    pub box_l: usize,
    pub bc: BoundaryCondition,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub threads: usize,
}

impl Default for Ensemble {
    fn default() -> Self {
        Self { lambda: 0.5, box_l: 12, bc: BoundaryCondition::Periodic, n_realizations: 100, master_seed: 0, threads: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default = "default_distribution")]
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub scan: Scan,
    #[serde(default)]
    pub ensemble: Ensemble,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

/// On-disk form of [`ExperimentConfig`]; the command may come from the command line instead.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<Command>,
    #[serde(default = "default_model")]
    model: ModelSpec,
    #[serde(default = "default_distribution")]
    distribution: DistributionSpec,
    #[serde(default)]
    scan: Scan,
    #[serde(default)]
    ensemble: Ensemble,
    #[serde(default = "default_output")]
    output: PathBuf,
}

fn default_model() -> ModelSpec {
    ModelSpec::Haldane(HaldaneParams::worked_example())
}

fn default_distribution() -> DistributionSpec {
    DistributionSpec::uniform(1.0, 1.0).expect("valid default")
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            model: default_model(),
            distribution: default_distribution(),
            scan: Scan::default(),
            ensemble: Ensemble::default(),
            output: default_output(),
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            model: self.model.clone(),
            distribution: self.distribution.clone(),
            lambda: self.ensemble.lambda,
            box_l: self.ensemble.box_l,
            bc: self.ensemble.bc,
            n_realizations: self.ensemble.n_realizations,
            master_seed: self.ensemble.master_seed,
            threads: self.ensemble.threads,
        }
    }
}

/// Short distribution form accepted on input; the resolved config stores the full record.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DistributionInput {
    Uniform { a: f64, b: f64 },
    TruncatedGaussian { a: f64 },
    CustomDensity { density: Vec<(f64, f64)>, beta: TailDecay },
}

pub fn parse_distribution(text: &str) -> Result<DistributionSpec> {
    if let Ok(full) = DistributionSpec::from_json(text) {
        return Ok(full);
    }
    let short: DistributionInput = serde_json::from_str(text)?;
    Ok(match short {
        DistributionInput::Uniform { a, b } => DistributionSpec::uniform(a, b)?,
        DistributionInput::TruncatedGaussian { a } => DistributionSpec::truncated_gaussian(a)?,
        DistributionInput::CustomDensity { density, beta } => DistributionSpec::custom_density(density, beta)?,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "chernlab", version, about = "Disordered Chern insulator experiments")]
pub struct Cli {
    /// Experiment to run; optional when the config names one.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model description (JSON).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Disorder distribution (JSON).
    #[arg(long)]
    pub dist: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Worker threads, 0 = all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "box")]
    pub box_l: Option<usize>,
    #[arg(long, value_enum)]
    pub bc: Option<BcArg>,
    #[arg(long)]
    pub energy: Option<f64>,
    #[arg(long)]
    pub e_grid: Option<Grid>,
    #[arg(long)]
    pub lambda_grid: Option<Grid>,
    /// Phase-diagram resolution `NxM` over (φ, M/t2).
    #[arg(long, value_parser = parse_dims)]
    pub grid: Option<(usize, usize)>,
    #[arg(long)]
    pub k_grid: Option<usize>,
    #[arg(long)]
    pub gap_index: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub box_sides: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_pair)]
    pub e_window: Option<(f64, f64)>,
    #[arg(long)]
    pub moment_p: Option<f64>,
    #[arg(long, value_parser = parse_pair)]
    pub g_window: Option<(f64, f64)>,
    #[arg(long)]
    pub t_grid: Option<Grid>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BcArg {
    Simple,
    Periodic,
}

impl Cli {
    /// Config file first, then every flag that was given.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let file: ConfigFile =
                    serde_json::from_str(&read(p)?).with_context(|| format!("invalid config {}", p.display()))?;
                let Some(command) = self.command.or(file.command) else {
                    bail!("{} names no command", p.display());
                };
                ExperimentConfig {
                    command,
                    model: file.model,
                    distribution: file.distribution,
                    scan: file.scan,
                    ensemble: file.ensemble,
                    output: file.output,
                }
            }
            None => match self.command {
                Some(c) => ExperimentConfig::new(c),
                None => bail!("no command given and no --config"),
            },
        };
        if let Some(p) = &self.model {
            cfg.model = ModelSpec::from_json(&read(p)?).with_context(|| format!("invalid model {}", p.display()))?;
        }
        if let Some(p) = &self.dist {
            cfg.distribution = parse_distribution(&read(p)?).with_context(|| format!("invalid distribution {}", p.display()))?;
        }
        let e = &mut cfg.ensemble;
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(e.master_seed, self.seed);
        set!(e.n_realizations, self.realizations);
        set!(e.threads, self.threads);
        set!(e.lambda, self.lambda);
        set!(e.box_l, self.box_l);
        if let Some(bc) = self.bc {
            e.bc = match bc {
                BcArg::Simple => BoundaryCondition::Simple,
                BcArg::Periodic => BoundaryCondition::Periodic,
            };
        }
        let s = &mut cfg.scan;
        set!(s.energy, self.energy);
        set!(s.e_grid, self.e_grid);
        set!(s.lambda_grid, self.lambda_grid);
        if let Some((a, b)) = self.grid {
            s.phi_grid.count = a;
            s.m_over_t2_grid.count = b;
        }
        set!(s.k_grid, self.k_grid);
        set!(s.gap_index, self.gap_index);
        set!(s.window, self.window);
        set!(s.eps, self.eps);
        set!(s.theta, self.theta);
        set!(s.box_sides, self.box_sides);
        set!(s.e_window, self.e_window);
        set!(s.moment_p, self.moment_p);
        set!(s.g_window, self.g_window);
        set!(s.t_grid, self.t_grid);
        set!(cfg.output, self.out);
        Ok(cfg)
    }
}

/// Paths written by one run.
#[derive(Debug)]
pub struct Outputs {
    pub csv: PathBuf,
    pub config: PathBuf,
    pub json: Option<PathBuf>,
}

/// Runs the configured experiment and writes `<command>.csv` and `<command>.config.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outputs> {
    let name = cfg.command.name();
    let (table, json) = compute(cfg).with_context(|| format!("{name} failed"))?;
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    let csv = cfg.output.join(format!("{name}.csv"));
    table.meta("command", name).write(&csv)?;
    let config = cfg.output.join(format!("{name}.config.json"));
    write_json(&config, cfg)?;
    let json = match json {
        Some(v) => {
            let p = cfg.output.join(format!("{name}.json"));
            write_json(&p, &v)?;
            Some(p)
        }
        None => None,
    };
    Ok(Outputs { csv, config, json })
}

/// The result table and an optional JSON document.
pub fn compute(cfg: &ExperimentConfig) -> Result<(Table, Option<serde_json::Value>)> {
    let sc = &cfg.scan;
    let ens = cfg.ensemble_config();
    Ok(match cfg.command {
        Command::Bloch => {
            let model = cfg.model.build()?;
            let n = model.n();
            let mut cols = vec!["k1".to_string(), "k2".to_string()];
            cols.extend((1..=n).map(|i| format!("E{i}")));
            let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut t = Table::new(&refs).meta("k_grid", sc.k_grid);
            for i in 0..sc.k_grid {
                for j in 0..sc.k_grid {
                    let k = [2.0 * PI * i as f64 / sc.k_grid as f64, 2.0 * PI * j as f64 / sc.k_grid as f64];
                    let ev = hermitian_eigenvalues(bloch_matrix(&model, k)?.as_ref())?;
                    let mut row = vec![k[0].into(), k[1].into()];
                    row.extend(ev.into_iter().map(Into::into));
                    t.push(row);
                }
            }
            let bs = band_structure(&model, sc.band_grid)?;
            (t, Some(serde_json::to_value(&bs)?))
        }
        Command::Chern => {
            let model = cfg.model.build()?;
            let r = chern_number(&model, sc.gap_index, sc.k_grid)?;
            let mut t = Table::new(&["gap_index", "chern", "curvature_sum", "min_direct_gap"]).meta("k_grid", sc.k_grid);
            t.push(vec![sc.gap_index.into(), r.value.into(), r.curvature_sum.into(), r.min_direct_gap.into()]);
            (t, Some(serde_json::to_value(&r)?))
        }
        Command::Spectrum => {
            let model = cfg.model.build()?;
            let bs = band_structure(&model, sc.band_grid)?;
            let d = &cfg.distribution;
            let geom = GapGeometry::new(&bs, d.a, d.b);
            let mut t = Table::new(&["lambda", "band", "lower", "upper"]).meta("a", d.a).meta("b", d.b);
            for lam in sc.lambda_grid.points() {
                for (i, &(lo, hi)) in geom.bands.iter().enumerate() {
                    t.push(vec![lam.into(), (i + 1).into(), (lo - d.a * lam).into(), (hi + d.b * lam).into()]);
                }
            }
            (t, None)
        }
        Command::Thresholds => {
            let model = cfg.model.build()?;
            let bs = band_structure(&model, sc.band_grid)?;
            let r = constants_report(&model, &cfg.distribution, &bs, sc.gap_index, sc.s, sc.t, sc.q)?;
            let v = serde_json::to_value(&r)?;
            let mut t = Table::new(&["quantity", "value"]);
            if let serde_json::Value::Object(map) = &v {
                for (k, x) in map {
                    if let Some(f) = x.as_f64() {
                        t.push(vec![k.as_str().into(), f.into()]);
                    }
                }
            }
            t.push(vec!["lambda_rho".into(), r.strong.value.into()]);
            (t, Some(v))
        }
        Command::PhaseDiagram => {
            let Some(p) = cfg.model.haldane_params() else {
                bail!("phase-diagram needs a Haldane model");
            };
            let pts = haldane_phase_diagram(p.t1, p.t2, &sc.phi_grid.points(), &sc.m_over_t2_grid.points(), sc.k_grid)?;
            let mut t = Table::new(&["phi", "M_over_t2", "chern"]).meta("k_grid", sc.k_grid);
            for q in &pts {
                t.push(vec![q.phi.into(), q.m_over_t2.into(), q.chern.into()]);
            }
            (t, None)
        }
        Command::Marker => {
            let rows = probes::averaged_marker_scan(&ens, &sc.e_grid.points(), &sc.lambda_grid.points(), sc.window)?;
            (probes::marker_table(&ens, sc.window, &rows), None)
        }
        Command::Wegner => {
            let rows = probes::wegner_empirical(&ens, sc.energy, &sc.eps)?;
            (probes::wegner_table(&ens, sc.energy, &rows), None)
        }
        Command::MsaProbe => {
            let mut rows = Vec::with_capacity(sc.box_sides.len());
            for &l in &sc.box_sides {
                let c = EnsembleConfig { box_l: l, ..ens.clone() };
                rows.push(probes::suitable_box_probability(&c, sc.energy, sc.theta, sc.range)?);
            }
            (probes::suitable_table(&ens, sc.energy, sc.theta, &rows), None)
        }
        Command::Decay => {
            let prof = probes::projection_decay(&ens, sc.e_window)?;
            (probes::decay_table(&ens, sc.e_window, &prof), Some(serde_json::to_value(prof.fit)?))
        }
        Command::Ids => {
            let rows = probes::ids_estimate(&ens, &sc.e_grid.points())?;
            (probes::ids_table(&ens, &rows), None)
        }
        Command::Moments => {
            let w = BumpWindow { lo: sc.g_window.0, hi: sc.g_window.1 };
            let ts = probes::logspace(sc.t_grid.start, sc.t_grid.stop, sc.t_grid.count);
            let rows = probes::time_averaged_moment(&ens, sc.moment_p, w, &ts)?;
            let fit = probes::loglog_slope(&rows).map(|f| f.slope);
            let mut t = probes::moment_table(&ens, sc.moment_p, w, &rows);
            if let Some(s) = fit {
                t = t.meta("loglog_slope", s);
            }
            (t, None)
        }
    })
}
