//! Time evolution under the annealing schedule for unassisted, counterdiabatic
//! and Floquet-engineered protocols.
//!
//! States are propagated with fixed-step classical RK4. The counterdiabatic
//! term is applied matrix-free: `ad_H^n(∂λH) ψ` expands binomially into
//! products of `H` and `∂λH`, so the nested commutators are never assembled
//! during a run.

mod ground;

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agp::{exact_agp_operators, fmt_f64, solve_alpha, solve_alpha_operators};
use crate::error::{Error, Result};
use crate::floquet::{match_harmonics_compensated, FloquetDrive};
use crate::interp::VectorSpline;
use crate::models::HamiltonianFamily;
use crate::operator::{inner, norm, PauliString, PauliSum, Pauli, StateOperator, StateVector};

pub use ground::{ground_pair, GroundPair, DENSE_GROUND_DIM};

/// Gap below which fidelities are refused.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Allowed deviation of the final fidelity under step halving.
pub const HALVING_TOL: f64 = 1e-6;

/// Ceiling on the exact-potential protocol's system size.
pub const MAX_EXACT_CD_SITES: usize = 10;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Parameter ramp `λ(t)` on `[0, τ]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `λ = sin²((π/2) sin²(πt/2τ))`.
    Annealing { tau: f64 },
    /// `λ` held fixed for a duration `τ`.
    Constant { tau: f64, lambda: f64 },
}

impl Schedule {
    pub fn annealing(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Schedule::Annealing { tau })
    }

    pub fn constant(tau: f64, lambda: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Schedule::Constant { tau, lambda })
    }

    pub fn tau(&self) -> f64 {
        match *self {
            Schedule::Annealing { tau } | Schedule::Constant { tau, .. } => tau,
        }
    }

    /// `(λ, λ̇)` at time `t ∈ [0, τ]`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let tau = self.tau();
        if !(t >= 0.0 && t <= tau) {
            return Err(Error::InvalidArgument(format!("time {t} outside [0, {tau}]")));
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: f64) -> (f64, f64) {
        use std::f64::consts::PI;
        match *self {
            Schedule::Annealing { tau } => {
                let s = (PI * t / (2.0 * tau)).sin().powi(2);
                let lambda = (0.5 * PI * s).sin().powi(2);
                let lambda_dot = PI * PI / (4.0 * tau) * (PI * s).sin() * (PI * t / tau).sin();
                (lambda, lambda_dot)
            }
            Schedule::Constant { lambda, .. } => (lambda, 0.0),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("τ must be positive, got {tau}")));
    }
    Ok(())
}

/// `(λ(t), λ̇(t))` of the annealing schedule.
pub fn schedule_eval(tau: f64, t: f64) -> Result<(f64, f64)> {
    Schedule::annealing(tau)?.eval(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Protocol {
    /// `H(λ(t))` alone.
    Unassisted,
    /// `H + λ̇ A^(ℓ)` with the variational potential.
    Counterdiabatic { order: usize },
    /// `H + λ̇ A` with the exact potential from full diagonalization.
    ExactCounterdiabatic,
    /// The periodic drive whose Floquet Hamiltonian approximates `H + λ̇ A^(ℓ)`.
    FloquetEngineered {
        order: usize,
        omega: f64,
        omega0: f64,
        #[serde(default)]
        compensation: usize,
    },
}

impl Protocol {
    /// File-name friendly tag.
    pub fn label(&self) -> String {
        match self {
            Protocol::Unassisted => "ua".into(),
            Protocol::Counterdiabatic { order } => format!("cd_l{order}"),
            Protocol::ExactCounterdiabatic => "cd_exact".into(),
            Protocol::FloquetEngineered { order, compensation, .. } => {
                if *compensation == 0 {
                    format!("fe_l{order}")
                } else {
                    format!("fe_l{order}_p{compensation}")
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Protocol::Counterdiabatic { order: 0 } | Protocol::FloquetEngineered { order: 0, .. } => {
                Err(Error::InvalidArgument("protocol order must be at least 1".into()))
            }
            Protocol::FloquetEngineered { omega, omega0, .. } if !(*omega > 0.0 && *omega0 > 0.0) => {
                Err(Error::InvalidArgument("drive frequencies must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// How variational coefficients are supplied along the ramp.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaMode {
    /// Solve at `points` times uniform in `t` and interpolate with a cubic spline.
    Grid { points: usize },
    /// Solve afresh at every integrator stage.
    PerStage,
}

impl Default for AlphaMode {
    fn default() -> Self {
        AlphaMode::Grid { points: 201 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    /// Number of sample times including both endpoints.
    pub samples: usize,
    pub alpha: AlphaMode,
    /// Repeat with half the step and fail if the final fidelity moves more
    /// than [`HALVING_TOL`].
    pub check_convergence: bool,
    pub spin_profile: bool,
    /// Upper bound on `h · ρ` with `ρ` an estimate of the generator's norm.
    pub max_phase_per_step: f64,
    /// Overrides the automatic step count (rounded up to fit the samples).
    pub steps: Option<usize>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            samples: 256,
            alpha: AlphaMode::default(),
            check_convergence: false,
            spin_profile: false,
            max_phase_per_step: 0.05,
            steps: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub protocol: String,
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub fidelity_sq: Vec<f64>,
    pub energy: Vec<f64>,
    pub ground_energy: Vec<f64>,
    /// `⟨σᶻ_i⟩` per sample when requested.
    pub profiles: Option<Vec<Vec<f64>>>,
    pub max_norm_drift: f64,
    pub steps: usize,
    pub final_state: StateVector,
    /// Final fidelity of the half-step rerun, if one was made.
    pub halved_final_fidelity: Option<f64>,
}

impl Trajectory {
    pub fn absorbed(&self) -> Vec<f64> {
        self.energy
            .iter()
            .zip(&self.ground_energy)
            .map(|(e, g)| e - g)
            .collect()
    }

    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity_sq.last().expect("non-empty trajectory")
    }

    pub fn final_infidelity(&self) -> f64 {
        1.0 - self.final_fidelity()
    }

    pub fn final_absorbed(&self) -> f64 {
        self.energy.last().unwrap() - self.ground_energy.last().unwrap()
    }

    /// `t, lambda, fidelity_sq, energy, ground_energy, absorbed[, sz_1..sz_L]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t,lambda,fidelity_sq,energy,ground_energy,absorbed")?;
        if let Some(p) = &self.profiles {
            for i in 1..=p.first().map(Vec::len).unwrap_or(0) {
                write!(w, ",sz_{i}")?;
            }
        }
        writeln!(w)?;
        let absorbed = self.absorbed();
        for k in 0..self.times.len() {
            write!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(self.times[k]),
                fmt_f64(self.lambdas[k]),
                fmt_f64(self.fidelity_sq[k]),
                fmt_f64(self.energy[k]),
                fmt_f64(self.ground_energy[k]),
                fmt_f64(absorbed[k])
            )?;
            if let Some(p) = &self.profiles {
                for v in &p[k] {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `|⟨ψ|ψ₀(λ)⟩|²` against the instantaneous ground state.
pub fn fidelity(psi: &[Complex64], family: &HamiltonianFamily, lambda: f64) -> Result<f64> {
    let g = checked_ground(family, lambda)?;
    check_dim(psi, family)?;
    Ok(inner(&g.state, psi).norm_sqr())
}

/// `⟨ψ|H(λ)|ψ⟩ - ε₀(λ)`.
pub fn absorbed_energy(psi: &[Complex64], family: &HamiltonianFamily, lambda: f64) -> Result<f64> {
    let g = checked_ground(family, lambda)?;
    check_dim(psi, family)?;
    let e = StateOperator::new(&family.hamiltonian(lambda)).expectation(psi)?.re;
    Ok(e - g.energy)
}

/// `⟨σᶻ_i⟩` for sites `1..=L`.
pub fn spin_profile(psi: &[Complex64]) -> Result<Vec<f64>> {
    if !psi.len().is_power_of_two() {
        return Err(Error::Structural(format!("state length {} is not a power of two", psi.len())));
    }
    let n = psi.len().trailing_zeros() as usize;
    let mut out = vec![0.0; n];
    for (b, amp) in psi.iter().enumerate() {
        let w = amp.norm_sqr();
        for (i, o) in out.iter_mut().enumerate() {
            if (b >> (n - 1 - i)) & 1 == 1 {
                *o -= w;
            } else {
                *o += w;
            }
        }
    }
    Ok(out)
}

/// Ground state of `H(0)`.
pub fn initial_state(family: &HamiltonianFamily) -> Result<StateVector> {
    Ok(checked_ground(family, 0.0)?.state)
}

fn checked_ground(family: &HamiltonianFamily, lambda: f64) -> Result<GroundPair> {
    let g = ground_pair(&family.hamiltonian(lambda))?;
    if g.gap() < DEGENERACY_GAP {
        return Err(Error::Degenerate(format!(
            "ground-state gap {:.3e} at λ={lambda} for {}",
            g.gap(),
            family.name()
        )));
    }
    Ok(g)
}

fn check_dim(psi: &[Complex64], family: &HamiltonianFamily) -> Result<()> {
    let dim = 1usize << family.n_sites();
    if psi.len() != dim {
        return Err(Error::Structural(format!("state length {} for dimension {dim}", psi.len())));
    }
    Ok(())
}

/// Where the counterdiabatic coefficients come from.
enum AlphaSource {
    Spline(VectorSpline),
    PerStage(usize),
}

impl AlphaSource {
    fn build(family: &HamiltonianFamily, schedule: &Schedule, order: usize, mode: AlphaMode) -> Result<Self> {
        match mode {
            AlphaMode::PerStage => Ok(AlphaSource::PerStage(order)),
            AlphaMode::Grid { points } => {
                if points < 4 {
                    return Err(Error::InvalidArgument("α grid needs at least 4 points".into()));
                }
                let tau = schedule.tau();
                let ts: Vec<f64> = (0..points).map(|i| tau * i as f64 / (points - 1) as f64).collect();
                let alphas = ts
                    .par_iter()
                    .map(|&t| Ok(solve_alpha(family, schedule.eval_unchecked(t).0, order)?.alpha))
                    .collect::<Result<Vec<_>>>()?;
                Ok(AlphaSource::Spline(VectorSpline::new(&ts, &alphas)?))
            }
        }
    }

    fn at(&self, t: f64, h: &PauliSum, dh: &PauliSum) -> Result<Vec<f64>> {
        match self {
            AlphaSource::Spline(s) => Ok(s.eval(t)),
            AlphaSource::PerStage(order) => Ok(solve_alpha_operators(h, dh, *order)?.0.alpha),
        }
    }
}

enum Kind {
    Unassisted,
    Counterdiabatic(AlphaSource),
    Exact,
    Floquet {
        alpha: AlphaSource,
        omega: f64,
        omega0: f64,
        compensation: usize,
    },
}

/// The generator `-i H_proto(t)` frozen at one time.
struct Stage {
    h: StateOperator,
    h_scale: f64,
    dh: StateOperator,
    dh_scale: f64,
    /// `(n, c)`: adds `c · ad_H^n(∂λH) ψ`.
    tower: Vec<(usize, f64)>,
    /// Dense Hermitian extra term, applied as `-i M ψ`.
    dense: Option<DMatrix<Complex64>>,
}

impl Stage {
    fn apply(&self, psi: &[Complex64]) -> Result<StateVector> {
        let mut out = vec![C0; psi.len()];
        self.h.apply_add(psi, &mut out, Complex64::new(0.0, -self.h_scale))?;
        if self.dh_scale != 0.0 {
            self.dh.apply_add(psi, &mut out, Complex64::new(0.0, -self.dh_scale))?;
        }
        if !self.tower.is_empty() {
            let t = apply_tower(&self.h, &self.dh, &self.tower, psi)?;
            out.iter_mut().zip(&t).for_each(|(o, x)| *o += x);
        }
        if let Some(m) = &self.dense {
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = C0;
                for (c, p) in psi.iter().enumerate() {
                    acc += m[(r, c)] * p;
                }
                *o += Complex64::new(0.0, -1.0) * acc;
            }
        }
        Ok(out)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ c · ad_H^n(D) ψ` via `ad_H^n(D) = Σ_j C(n,j) (-1)^j H^{n-j} D H^j`,
/// grouped by the outer power of `H` and summed Horner-style.
fn apply_tower(h: &StateOperator, d: &StateOperator, terms: &[(usize, f64)], psi: &[Complex64]) -> Result<StateVector> {
    let top = terms.iter().map(|t| t.0).max().unwrap_or(0);
    let mut powers = vec![psi.to_vec()];
    for j in 1..=top {
        let next = h.apply(&powers[j - 1])?;
        powers.push(next);
    }
    let dim = psi.len();
    let mut z = vec![vec![C0; dim]; top + 1];
    for j in 0..=top {
        let mut weights = Vec::new();
        for &(n, c) in terms {
            if j <= n && c != 0.0 {
                let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
                weights.push((n - j, c * sign * binomial(n, j)));
            }
        }
        if weights.is_empty() {
            continue;
        }
        let u = d.apply(&powers[j])?;
        for (p, w) in weights {
            z[p].iter_mut().zip(&u).for_each(|(a, b)| *a += b * w);
        }
    }
    let mut r = z.pop().unwrap();
    while let Some(zp) = z.pop() {
        let mut next = h.apply(&r)?;
        next.iter_mut().zip(&zp).for_each(|(a, b)| *a += b);
        r = next;
    }
    Ok(r)
}

struct Generator<'a> {
    family: &'a HamiltonianFamily,
    schedule: Schedule,
    kind: Kind,
}

impl<'a> Generator<'a> {
    fn new(family: &'a HamiltonianFamily, protocol: &Protocol, schedule: Schedule, opts: &EvolveOptions) -> Result<Self> {
        protocol.validate()?;
        let kind = match protocol {
            Protocol::Unassisted => Kind::Unassisted,
            Protocol::Counterdiabatic { order } => {
                Kind::Counterdiabatic(AlphaSource::build(family, &schedule, *order, opts.alpha)?)
            }
            Protocol::ExactCounterdiabatic => {
                if family.n_sites() > MAX_EXACT_CD_SITES {
                    return Err(Error::Capacity(format!(
                        "exact counterdiabatic runs limited to {MAX_EXACT_CD_SITES} sites"
                    )));
                }
                Kind::Exact
            }
            Protocol::FloquetEngineered {
                order,
                omega,
                omega0,
                compensation,
            } => {
                // Validates the frequencies and emits the low-ratio warning once.
                FloquetDrive::new(*omega, *omega0, Vec::new())?;
                Kind::Floquet {
                    alpha: AlphaSource::build(family, &schedule, *order, opts.alpha)?,
                    omega: *omega,
                    omega0: *omega0,
                    compensation: *compensation,
                }
            }
        };
        Ok(Generator { family, schedule, kind })
    }

    fn drive_at(&self, t: f64, h: &PauliSum, dh: &PauliSum) -> Result<Option<FloquetDrive>> {
        if let Kind::Floquet {
            alpha,
            omega,
            omega0,
            compensation,
        } = &self.kind
        {
            let a = alpha.at(t, h, dh)?;
            let coeffs = crate::agp::VariationalCoefficients {
                order: a.len(),
                alpha: a,
                lambda: None,
                normalized_action: None,
                degenerate: false,
            };
            let beta = match_harmonics_compensated(&coeffs, *omega0, *compensation)?;
            Ok(Some(FloquetDrive {
                omega: *omega,
                omega0: *omega0,
                beta,
            }))
        } else {
            Ok(None)
        }
    }

    fn stage(&self, t: f64) -> Result<Stage> {
        let (lambda, lambda_dot) = self.schedule.eval_unchecked(t);
        let (h, dh) = self.family.at(lambda);
        let mut stage = Stage {
            h: StateOperator::new(&h),
            h_scale: 1.0,
            dh: StateOperator::new(&dh),
            dh_scale: 0.0,
            tower: Vec::new(),
            dense: None,
        };
        match &self.kind {
            Kind::Unassisted => {}
            Kind::Counterdiabatic(src) => {
                if lambda_dot != 0.0 {
                    let alpha = src.at(t, &h, &dh)?;
                    stage.tower = alpha
                        .iter()
                        .enumerate()
                        .map(|(k, a)| (2 * k + 1, lambda_dot * a))
                        .collect();
                }
            }
            Kind::Exact => {
                if lambda_dot != 0.0 {
                    let a = exact_agp_operators(&h, &dh)?;
                    stage.dense = Some(a.into_matrix() * Complex64::new(lambda_dot, 0.0));
                }
            }
            Kind::Floquet { .. } => {
                let drive = self.drive_at(t, &h, &dh)?.expect("floquet kind");
                // One merged operator: H and ∂λH usually share strings.
                let merged = h
                    .scale_real(drive.h_factor(t))
                    .add_scaled(&dh, Complex64::new(lambda_dot * drive.dh_factor(t), 0.0))?;
                stage.h = StateOperator::new(&merged);
            }
        }
        Ok(stage)
    }

    /// Largest step allowed by the protocol's time scale.
    fn base_step(&self) -> f64 {
        match &self.kind {
            Kind::Floquet { omega, .. } => 2.0 * std::f64::consts::PI / omega / 64.0,
            _ => self.schedule.tau() / 4096.0,
        }
    }

    /// Upper estimate of the generator norm over the ramp.
    fn norm_envelope(&self) -> Result<f64> {
        let tau = self.schedule.tau();
        let probes = 17;
        let dim = 1usize << self.family.n_sites();
        let mut worst = 0.0f64;
        for i in 0..probes {
            let t = tau * i as f64 / (probes - 1) as f64;
            let (lambda, lambda_dot) = self.schedule.eval_unchecked(t);
            let (h, dh) = self.family.at(lambda);
            let hop = StateOperator::new(&h);
            let rho_h = spectral_radius(dim, |v| hop.apply(v))?;
            let extra = match &self.kind {
                Kind::Unassisted => 0.0,
                Kind::Counterdiabatic(_) | Kind::Exact => {
                    let st = self.stage(t)?;
                    if st.tower.is_empty() && st.dense.is_none() {
                        0.0
                    } else {
                        let bare = Stage { h_scale: 0.0, ..st };
                        spectral_radius(dim, |v| bare.apply(v))?
                    }
                }
                Kind::Floquet { omega, omega0, .. } => {
                    let drive = self.drive_at(t, &h, &dh)?.expect("floquet kind");
                    let dop = StateOperator::new(&dh);
                    let rho_dh = spectral_radius(dim, |v| dop.apply(v))?;
                    let beta: f64 = drive.beta.iter().map(|b| b.abs()).sum();
                    rho_h * omega / omega0 + lambda_dot.abs() * beta * rho_dh
                }
            };
            worst = worst.max(rho_h + extra);
        }
        Ok(worst)
    }
}

/// Power-iteration estimate of the largest eigenvalue magnitude, padded by 10%.
fn spectral_radius<F>(dim: usize, apply: F) -> Result<f64>
where
    F: Fn(&[Complex64]) -> Result<StateVector>,
{
    let mut rng = StdRng::seed_from_u64(0x0bad_cafe);
    let mut v: StateVector = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let mut est = 0.0;
    for _ in 0..30 {
        let nv = norm(&v);
        if nv == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|c| *c /= nv);
        let w = apply(&v)?;
        est = norm(&w);
        v = w;
    }
    Ok(1.1 * est)
}

fn rk4_step(
    gen: &Generator,
    psi: &mut StateVector,
    t: f64,
    h: f64,
    start: &Stage,
) -> Result<Stage> {
    let mid = gen.stage(t + 0.5 * h)?;
    let end = gen.stage(t + h)?;
    let k1 = start.apply(psi)?;
    let tmp: StateVector = psi.iter().zip(&k1).map(|(p, k)| p + k * (0.5 * h)).collect();
    let k2 = mid.apply(&tmp)?;
    let tmp: StateVector = psi.iter().zip(&k2).map(|(p, k)| p + k * (0.5 * h)).collect();
    let k3 = mid.apply(&tmp)?;
    let tmp: StateVector = psi.iter().zip(&k3).map(|(p, k)| p + k * h).collect();
    let k4 = end.apply(&tmp)?;
    for (i, p) in psi.iter_mut().enumerate() {
        *p += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    }
    Ok(end)
}

/// Integrates over `[0, τ]` in `steps` equal steps, returning the state at
/// every `stride`-th step (including `t = 0`).
fn integrate(gen: &Generator, psi0: &[Complex64], steps: usize, stride: usize) -> Result<Vec<StateVector>> {
    let tau = gen.schedule.tau();
    let h = tau / steps as f64;
    let mut psi = psi0.to_vec();
    let mut out = vec![psi.clone()];
    let mut stage = gen.stage(0.0)?;
    for s in 0..steps {
        let t = tau * s as f64 / steps as f64;
        stage = rk4_step(gen, &mut psi, t, h, &stage)?;
        if (s + 1) % stride == 0 {
            out.push(psi.clone());
        }
    }
    Ok(out)
}

/// Step count honoring the protocol's step bound and the norm envelope,
/// rounded up to a multiple of `intervals`.
fn choose_steps(gen: &Generator, opts: &EvolveOptions, intervals: usize) -> Result<usize> {
    let raw = match opts.steps {
        Some(n) => n.max(1),
        None => {
            let tau = gen.schedule.tau();
            let rho = gen.norm_envelope()?;
            let mut h = gen.base_step();
            if rho > 0.0 {
                h = h.min(opts.max_phase_per_step / rho);
            }
            (tau / h).ceil() as usize
        }
    };
    Ok(raw.div_ceil(intervals) * intervals)
}

/// Evolves `psi0` from `t = 0` to `τ` and records observables at the sample
/// times.
pub fn evolve(
    family: &HamiltonianFamily,
    protocol: &Protocol,
    schedule: &Schedule,
    psi0: &[Complex64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    check_dim(psi0, family)?;
    if (norm(psi0) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("initial state must be normalized".into()));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let gen = Generator::new(family, protocol, *schedule, opts)?;
    let intervals = opts.samples - 1;
    let steps = choose_steps(&gen, opts, intervals)?;
    let states = integrate(&gen, psi0, steps, steps / intervals)?;
    let tau = schedule.tau();
    let times: Vec<f64> = (0..opts.samples).map(|k| tau * k as f64 / intervals as f64).collect();

    struct Sample {
        lambda: f64,
        fidelity: f64,
        energy: f64,
        ground: f64,
        profile: Option<Vec<f64>>,
        drift: f64,
    }
    let samples = times
        .par_iter()
        .zip(states.par_iter())
        .map(|(&t, psi)| {
            let lambda = schedule.eval_unchecked(t).0;
            let g = checked_ground(family, lambda)?;
            let h = family.hamiltonian(lambda);
            let nrm = norm(psi);
            Ok(Sample {
                lambda,
                fidelity: inner(&g.state, psi).norm_sqr(),
                energy: StateOperator::new(&h).expectation(psi)?.re,
                ground: g.energy,
                profile: if opts.spin_profile { Some(spin_profile(psi)?) } else { None },
                drift: (nrm - 1.0).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let max_norm_drift = samples.iter().map(|s| s.drift).fold(0.0, f64::max);
    if max_norm_drift > 1e-8 {
        log::warn!(
            "{} on {}: norm drift {max_norm_drift:.3e} with {steps} steps",
            protocol.label(),
            family.name()
        );
    }
    let final_state = states.last().unwrap().clone();
    let final_fidelity = samples.last().unwrap().fidelity;

    let halved_final_fidelity = if opts.check_convergence {
        let fine = integrate(&gen, psi0, 2 * steps, 2 * steps)?;
        let g = checked_ground(family, schedule.eval_unchecked(tau).0)?;
        let f = inner(&g.state, fine.last().unwrap()).norm_sqr();
        if (f - final_fidelity).abs() > HALVING_TOL {
            return Err(Error::Convergence(format!(
                "{} on {}: final fidelity {final_fidelity:.12} with {steps} steps vs {f:.12} with {}",
                protocol.label(),
                family.name(),
                2 * steps
            )));
        }
        Some(f)
    } else {
        None
    };

    Ok(Trajectory {
        protocol: protocol.label(),
        times,
        lambdas: samples.iter().map(|s| s.lambda).collect(),
        fidelity_sq: samples.iter().map(|s| s.fidelity).collect(),
        energy: samples.iter().map(|s| s.energy).collect(),
        ground_energy: samples.iter().map(|s| s.ground).collect(),
        profiles: if opts.spin_profile {
            Some(samples.into_iter().map(|s| s.profile.unwrap()).collect())
        } else {
            None
        },
        max_norm_drift,
        steps,
        final_state,
        halved_final_fidelity,
    })
}

/// `σᶻ_i` as a Pauli sum, sites 1-based.
pub fn sigma_z(n_sites: usize, site: usize) -> Result<PauliSum> {
    if site == 0 || site > n_sites {
        return Err(Error::InvalidArgument(format!("site {site} outside 1..={n_sites}")));
    }
    PauliSum::from_real(n_sites, [(PauliString::single(n_sites, site - 1, Pauli::Z), 1.0)])
}
