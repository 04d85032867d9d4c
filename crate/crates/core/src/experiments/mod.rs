//! Config-driven runs, the built-in figure reproductions, and persistence of
//! their results as CSV tables plus a JSON manifest.

use std::collections::HashSet;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agp::{fmt_f64, prefactor_curve, solve_alpha, write_alpha_csv, VariationalCoefficients};
use crate::dynamics::{evolve, initial_state, AlphaMode, EvolveOptions, Protocol, Schedule};
use crate::error::{Error, Result};
use crate::floquet::match_harmonics;
use crate::models::{Boundary, HamiltonianFamily, ModelSpec, TrapSpec};

/// Reference drive frequency used by every figure, `10 · 2π`.
pub const FIGURE_OMEGA0: f64 = 20.0 * std::f64::consts::PI;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Ua,
    Cd,
    CdExact,
    Fe,
}

/// A parameter sweep: every `cd`/`fe` entry runs once per order in `orders`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSpec,
    pub tau: f64,
    pub protocols: Vec<ProtocolKind>,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    /// `ω/ω₀`, required when `fe` is listed.
    #[serde(default)]
    pub omega_ratio: Option<f64>,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default)]
    pub compensation: usize,
    /// Points of the α grid along the ramp.
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub spin_profile: bool,
    #[serde(default)]
    pub check_convergence: bool,
    #[serde(default)]
    pub max_phase_per_step: Option<f64>,
    pub output_dir: PathBuf,
    /// Recorded in the manifest; the runs themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
}

fn default_orders() -> Vec<usize> {
    vec![1]
}

fn default_omega0() -> f64 {
    FIGURE_OMEGA0
}

fn default_lambda_grid() -> usize {
    201
}

fn default_samples() -> usize {
    EvolveOptions::default().samples
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.protocols.is_empty() {
            return bad("protocols: list is empty".into());
        }
        let mut seen = HashSet::new();
        if let Some(p) = self.protocols.iter().find(|p| !seen.insert(**p)) {
            return bad(format!("protocols: {p:?} listed twice"));
        }
        let ordered = self.protocols.iter().any(|p| matches!(p, ProtocolKind::Cd | ProtocolKind::Fe));
        if ordered {
            if self.orders.is_empty() {
                return bad("orders: list is empty".into());
            }
            if self.orders.contains(&0) {
                return bad("orders: entries must be at least 1".into());
            }
            let mut seen = HashSet::new();
            if let Some(o) = self.orders.iter().find(|o| !seen.insert(**o)) {
                return bad(format!("orders: {o} listed twice"));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau: must be positive, got {}", self.tau));
        }
        if self.protocols.contains(&ProtocolKind::Fe) {
            match self.omega_ratio {
                Some(r) if r > 0.0 && r.is_finite() => {}
                _ => return bad("omega_ratio: required and positive when fe is listed".into()),
            }
            if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
                return bad(format!("omega0: must be positive, got {}", self.omega0));
            }
        }
        if self.samples < 2 {
            return bad("samples: need at least 2".into());
        }
        if self.lambda_grid < 4 {
            return bad("lambda_grid: need at least 4".into());
        }
        if let Some(m) = self.max_phase_per_step {
            if !(m > 0.0) {
                return bad("max_phase_per_step: must be positive".into());
            }
        }
        HamiltonianFamily::new(self.model.clone()).map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(())
    }

    fn options(&self) -> EvolveOptions {
        let mut o = EvolveOptions {
            samples: self.samples,
            alpha: AlphaMode::Grid { points: self.lambda_grid },
            check_convergence: self.check_convergence,
            spin_profile: self.spin_profile,
            ..EvolveOptions::default()
        };
        if let Some(m) = self.max_phase_per_step {
            o.max_phase_per_step = m;
        }
        o
    }

    /// One run per (protocol, order) combination.
    pub fn runs(&self) -> Result<Vec<RunSpec>> {
        let family = HamiltonianFamily::new(self.model.clone())?;
        let schedule = Schedule::annealing(self.tau)?;
        let mut protocols = Vec::new();
        for kind in &self.protocols {
            match kind {
                ProtocolKind::Ua => protocols.push(Protocol::Unassisted),
                ProtocolKind::CdExact => protocols.push(Protocol::ExactCounterdiabatic),
                ProtocolKind::Cd => protocols.extend(self.orders.iter().map(|&order| Protocol::Counterdiabatic { order })),
                ProtocolKind::Fe => {
                    let ratio = self.omega_ratio.unwrap_or_default();
                    protocols.extend(self.orders.iter().map(|&order| Protocol::FloquetEngineered {
                        order,
                        omega: ratio * self.omega0,
                        omega0: self.omega0,
                        compensation: self.compensation,
                    }))
                }
            }
        }
        Ok(protocols
            .into_iter()
            .map(|p| RunSpec::new(&family, p, schedule, self.options()))
            .collect())
    }
}

/// A single time evolution and where its trajectory goes.
#[derive(Clone, Debug)]
pub struct RunSpec {
    /// File stem of the trajectory CSV.
    pub label: String,
    pub family: HamiltonianFamily,
    pub protocol: Protocol,
    pub schedule: Schedule,
    pub options: EvolveOptions,
}

impl RunSpec {
    pub fn new(family: &HamiltonianFamily, protocol: Protocol, schedule: Schedule, options: EvolveOptions) -> Self {
        RunSpec {
            label: protocol.label(),
            family: family.clone(),
            protocol,
            schedule,
            options,
        }
    }

    fn with_prefix(mut self, prefix: &str) -> Self {
        self.label = format!("{prefix}{}", self.label);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub csv: String,
    pub model: ModelSpec,
    pub protocol: Protocol,
    pub tau: f64,
    pub steps: usize,
    pub final_fidelity: f64,
    pub final_infidelity: f64,
    pub final_absorbed: f64,
    pub max_norm_drift: f64,
    pub halved_final_fidelity: Option<f64>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub created_unix: u64,
    pub parameters: serde_json::Value,
    pub runs: Vec<RunSummary>,
    /// Every file written next to the manifest.
    pub files: Vec<String>,
    #[serde(default)]
    pub summary: serde_json::Value,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }
}

/// Creates `dir`, refusing an existing path unless `force`.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && !force {
        return Err(Error::Config(format!(
            "output directory {} already exists (use --force to overwrite)",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::from(e).context(&format!("creating {}", dir.display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    let path = dir.join(name);
    let f = fs::File::create(&path).map_err(|e| Error::from(e).context(&format!("writing {}", path.display())))?;
    Ok(BufWriter::new(f))
}

/// Runs every spec (concurrently) and writes one CSV each.
pub fn execute_runs(runs: &[RunSpec], dir: &Path) -> Result<Vec<RunSummary>> {
    let mut labels = HashSet::new();
    if let Some(r) = runs.iter().find(|r| !labels.insert(r.label.as_str())) {
        return Err(Error::InvalidArgument(format!("duplicate run label {}", r.label)));
    }
    runs.par_iter()
        .map(|r| {
            let ctx = format!("run {}", r.label);
            let start = Instant::now();
            log::info!("{ctx}: starting on {} ({} sites)", r.family.name(), r.family.n_sites());
            let psi0 = initial_state(&r.family).map_err(|e| e.context(&ctx))?;
            let traj = evolve(&r.family, &r.protocol, &r.schedule, &psi0, &r.options).map_err(|e| e.context(&ctx))?;
            let csv = format!("{}.csv", r.label);
            let mut w = create(dir, &csv)?;
            traj.write_csv(&mut w)?;
            std::io::Write::flush(&mut w)?;
            let runtime_s = start.elapsed().as_secs_f64();
            log::info!(
                "{ctx}: F² = {:.6}, absorbed = {:.6}, {} steps, {runtime_s:.1} s",
                traj.final_fidelity(),
                traj.final_absorbed(),
                traj.steps
            );
            Ok(RunSummary {
                label: r.label.clone(),
                csv,
                model: r.family.spec().clone(),
                protocol: r.protocol.clone(),
                tau: r.schedule.tau(),
                steps: traj.steps,
                final_fidelity: traj.final_fidelity(),
                final_infidelity: traj.final_infidelity(),
                final_absorbed: traj.final_absorbed(),
                max_norm_drift: traj.max_norm_drift,
                halved_final_fidelity: traj.halved_final_fidelity,
                runtime_s,
            })
        })
        .collect()
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let mut w = create(dir, MANIFEST_FILE)?;
    serde_json::to_writer_pretty(&mut w, manifest)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

/// Loads, validates and executes a config file. `out` overrides the
/// config's output directory.
pub fn run_config(path: &Path, out: Option<&Path>, force: bool) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(&format!("reading {}", path.display())))?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| e.context(&path.display().to_string()))?;
    run_experiment(&cfg, out, force)
}

pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>, force: bool) -> Result<Manifest> {
    cfg.validate()?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    let runs = cfg.runs()?;
    prepare_output_dir(&dir, force)?;
    let summaries = execute_runs(&runs, &dir)?;
    let mut files: Vec<String> = summaries.iter().map(|s| s.csv.clone()).collect();
    files.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        name: cfg.name.clone(),
        created_unix: now_unix(),
        parameters: serde_json::to_value(cfg)?,
        runs: summaries,
        files,
        summary: serde_json::Value::Null,
        notes: Vec::new(),
    };
    write_manifest(&dir, &manifest)?;
    Ok(manifest)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            _ => Err(Error::InvalidArgument(format!("unknown figure {s:?} (expected fig1..fig4)"))),
        }
    }
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FigureOptions {
    /// Run the long Floquet settings instead of the reduced ones.
    pub full_scale: bool,
    pub force: bool,
}

/// Fig. 1: prefactor curves of the ℓ = 1..3 commutator ansatz.
pub fn fig1_model() -> Result<HamiltonianFamily> {
    HamiltonianFamily::ising_uniform(14, 1.0, 0.3, 0.3, Boundary::Periodic)
}

pub fn fig2_model() -> HamiltonianFamily {
    HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0)
}

pub fn fig3_model() -> HamiltonianFamily {
    HamiltonianFamily::three_level(1.0, 2.0)
}

/// The moving-trap chain; `l = 12` is the full-scale setting.
pub fn fig4_model(l: usize) -> Result<HamiltonianFamily> {
    // The trap sweeps between sites equidistant from the two ends.
    let trap = TrapSpec {
        h_t: 8.0,
        w_t: 1.0,
        i0: 3,
        i_f: l - 2,
    };
    HamiltonianFamily::trap_ising(l, -1.0, 0.8, 0.9, trap)
}

/// Reduced chain length for the Floquet run of Fig. 4.
pub const FIG4_REDUCED_SITES: usize = 8;
pub const FIG4_REDUCED_RATIO: f64 = 1e2;
pub const FIG4_FULL_RATIO: f64 = 1e4;
pub const FIG3_REDUCED_RATIO: f64 = 2.5e2;
pub const FIG3_FULL_RATIO: f64 = 2.5e4;

pub fn fig1_omegas() -> Vec<f64> {
    let n = 300;
    (0..n).map(|i| 0.1 + (30.0 - 0.1) * i as f64 / (n - 1) as f64).collect()
}

fn fe(order: usize, ratio: f64) -> Protocol {
    Protocol::FloquetEngineered {
        order,
        omega: ratio * FIGURE_OMEGA0,
        omega0: FIGURE_OMEGA0,
        compensation: 0,
    }
}

fn checked() -> EvolveOptions {
    EvolveOptions {
        check_convergence: true,
        ..EvolveOptions::default()
    }
}

/// The runs making up a trajectory figure.
pub fn figure_runs(fig: Figure, full_scale: bool) -> Result<Vec<RunSpec>> {
    // Floquet runs set their step from the drive period and are checked by
    // norm drift; halving them doubles an already long run.
    let plain = EvolveOptions::default();
    Ok(match fig {
        Figure::Fig1 => Vec::new(),
        Figure::Fig2 => {
            let f = fig2_model();
            let s = Schedule::annealing(0.1)?;
            vec![
                RunSpec::new(&f, Protocol::Unassisted, s, checked()),
                RunSpec::new(&f, Protocol::Counterdiabatic { order: 1 }, s, checked()),
                RunSpec::new(&f, fe(1, 250.0), s, plain),
            ]
        }
        Figure::Fig3 => {
            let f = fig3_model();
            let s = Schedule::annealing(0.1)?;
            let (ratio2, fe2_opts) = if full_scale {
                let o = EvolveOptions {
                    max_phase_per_step: 0.005,
                    ..plain.clone()
                };
                (FIG3_FULL_RATIO, o)
            } else {
                (FIG3_REDUCED_RATIO, plain.clone())
            };
            vec![
                RunSpec::new(&f, Protocol::Unassisted, s, checked()),
                RunSpec::new(&f, Protocol::Counterdiabatic { order: 1 }, s, checked()),
                RunSpec::new(&f, Protocol::Counterdiabatic { order: 2 }, s, checked()),
                RunSpec::new(&f, fe(1, 250.0), s, plain.clone()),
                RunSpec::new(&f, fe(2, ratio2), s, fe2_opts),
            ]
        }
        Figure::Fig4 => {
            let s = Schedule::annealing(0.5)?;
            let profile = EvolveOptions {
                spin_profile: true,
                ..checked()
            };
            let f = fig4_model(12)?;
            let mut runs = vec![RunSpec::new(&f, Protocol::Unassisted, s, profile.clone())];
            for order in 1..=3 {
                runs.push(RunSpec::new(&f, Protocol::Counterdiabatic { order }, s, profile.clone()));
            }
            let fe_opts = EvolveOptions {
                spin_profile: true,
                ..plain
            };
            if full_scale {
                runs.push(RunSpec::new(&f, fe(2, FIG4_FULL_RATIO), s, fe_opts));
            } else {
                let small = fig4_model(FIG4_REDUCED_SITES)?;
                let prefix = format!("l{FIG4_REDUCED_SITES}_");
                runs.push(RunSpec::new(&small, Protocol::Counterdiabatic { order: 2 }, s, profile).with_prefix(&prefix));
                runs.push(RunSpec::new(&small, fe(2, FIG4_REDUCED_RATIO), s, fe_opts).with_prefix(&prefix));
            }
            runs
        }
    })
}

/// Prefactor table `omega, reference, ell_1, ..` for Fig. 1 and the
/// coefficients behind it.
pub fn fig1_curves(orders: &[usize]) -> Result<(Vec<f64>, Vec<VariationalCoefficients>, Vec<Vec<f64>>)> {
    let family = fig1_model()?;
    let omegas = fig1_omegas();
    let coeffs = orders
        .par_iter()
        .map(|&l| solve_alpha(&family, 1.0, l))
        .collect::<Result<Vec<_>>>()?;
    let curves = coeffs.iter().map(|c| prefactor_curve(&c.alpha, &omegas)).collect();
    Ok((omegas, coeffs, curves))
}

fn run_fig1(dir: &Path) -> Result<Manifest> {
    let orders = [1, 2, 3];
    let (omegas, coeffs, curves) = fig1_curves(&orders).map_err(|e| e.context("fig1 coefficients"))?;
    let mut w = create(dir, "fig1_prefactor.csv")?;
    {
        use std::io::Write;
        write!(w, "omega,reference")?;
        for l in orders {
            write!(w, ",ell_{l}")?;
        }
        writeln!(w)?;
        for (i, om) in omegas.iter().enumerate() {
            write!(w, "{},{}", fmt_f64(*om), fmt_f64(-1.0 / om))?;
            for c in &curves {
                write!(w, ",{}", fmt_f64(c[i]))?;
            }
            writeln!(w)?;
        }
        w.flush()?;
    }
    let mut w = create(dir, "fig1_alpha.csv")?;
    write_alpha_csv(&mut w, &coeffs)?;
    std::io::Write::flush(&mut w)?;
    let family = fig1_model()?;
    Ok(Manifest {
        name: "fig1".into(),
        created_unix: now_unix(),
        parameters: serde_json::json!({
            "model": family.spec(),
            "lambda": 1.0,
            "orders": orders,
            "omega_min": omegas[0],
            "omega_max": omegas[omegas.len() - 1],
            "omega_points": omegas.len(),
        }),
        runs: Vec::new(),
        files: vec!["fig1_prefactor.csv".into(), "fig1_alpha.csv".into(), MANIFEST_FILE.into()],
        summary: serde_json::json!({ "coefficients": coeffs }),
        notes: vec![
            "ell_k columns hold sum_k alpha_k omega^(2k-1); the exact prefactor is reference = -1/omega".into(),
        ],
    })
}

/// Builds a figure into `dir`.
pub fn run_figure(fig: Figure, dir: &Path, opts: FigureOptions) -> Result<Manifest> {
    prepare_output_dir(dir, opts.force)?;
    let manifest = if fig == Figure::Fig1 {
        run_fig1(dir)?
    } else {
        let runs = figure_runs(fig, opts.full_scale)?;
        let summaries = execute_runs(&runs, dir).map_err(|e| e.context(fig.name()))?;
        let mut files: Vec<String> = summaries.iter().map(|s| s.csv.clone()).collect();
        files.push(MANIFEST_FILE.into());
        let mut notes = Vec::new();
        let drives = drive_summary(&runs)?;
        if !opts.full_scale && matches!(fig, Figure::Fig3 | Figure::Fig4) {
            notes.push("Floquet runs at reduced scale; pass --full-scale for the long settings".into());
        }
        Manifest {
            name: fig.name().into(),
            created_unix: now_unix(),
            parameters: serde_json::json!({
                "omega0": FIGURE_OMEGA0,
                "full_scale": opts.full_scale,
                "runs": runs.iter().map(|r| serde_json::json!({
                    "label": r.label,
                    "model": r.family.spec(),
                    "protocol": r.protocol,
                    "schedule": r.schedule,
                    "options": r.options,
                })).collect::<Vec<_>>(),
            }),
            runs: summaries,
            files,
            summary: serde_json::json!({ "mid_ramp_drives": drives }),
            notes,
        }
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Drive amplitudes at `λ = 1/2` for every Floquet run, for reference.
fn drive_summary(runs: &[RunSpec]) -> Result<Vec<serde_json::Value>> {
    let mut out = Vec::new();
    for r in runs {
        if let Protocol::FloquetEngineered { order, omega, omega0, .. } = r.protocol {
            let c = solve_alpha(&r.family, 0.5, order)?;
            let beta = match_harmonics(&c, omega0)?;
            out.push(serde_json::json!({ "label": r.label, "alpha": c.alpha, "beta": beta, "omega": omega }));
        }
    }
    Ok(out)
}

/// Coefficient table for one model point, with optional drive amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct AgpReport {
    pub coefficients: VariationalCoefficients,
    /// `(ω₀, β)` when harmonics were requested.
    pub harmonics: Option<(f64, Vec<f64>)>,
}

impl AgpReport {
    /// One `name = value` line per entry, 13 significant digits.
    pub fn render(&self) -> String {
        let c = &self.coefficients;
        let mut s = format!("lambda = {}\nell = {}\n", c.lambda.unwrap_or(f64::NAN), c.order);
        for (k, a) in c.alpha.iter().enumerate() {
            s += &format!("alpha_{} = {a:.12e}\n", k + 1);
        }
        if let Some(a) = c.normalized_action {
            s += &format!("normalized_action = {a:.12e}\n");
        }
        if c.degenerate {
            s += "warning: Gram system was regularized\n";
        }
        if let Some((w0, beta)) = &self.harmonics {
            s += &format!("omega0 = {w0:.12e}\n");
            for (k, b) in beta.iter().enumerate() {
                s += &format!("beta_{} = {b:.12e}\n", k + 1);
            }
        }
        s
    }
}

/// Solves for `α` at one `λ`; with `omega0` also matches the harmonics.
pub fn solve_agp_cli(model: &ModelSpec, lambda: f64, order: usize, omega0: Option<f64>) -> Result<AgpReport> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite".into()));
    }
    let family = HamiltonianFamily::new(model.clone())?;
    let coefficients = solve_alpha(&family, lambda, order)?;
    let harmonics = match omega0 {
        Some(w0) => Some((w0, match_harmonics(&coefficients, w0)?)),
        None => None,
    };
    Ok(AgpReport { coefficients, harmonics })
}

/// Directory for a figure when `--out` is absent.
pub fn default_figure_dir(fig: Figure) -> PathBuf {
    PathBuf::from("out").join(fig.name())
}
