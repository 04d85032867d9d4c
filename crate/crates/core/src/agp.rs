//! Variational adiabatic gauge potentials.
//!
//! The ansatz is `A = i Σ_k α_k C_{2k-1}` with `C_j = ad_H^j(∂λH)`. Writing
//! `G = ∂λH - i[H, A] = ∂λH + Σ_k α_k C_{2k}`, the action `‖G‖²_HS` is
//! quadratic in α and its stationarity condition is the Gram system
//!
//! ```text
//! Σ_k Γ(l+k) α_k = -Γ(l),   l = 1..ℓ,   Γ(j) = ⟨C_a, C_b⟩ for any a + b = 2j
//! ```
//!
//! where the `Γ(j)` are moments of the response function of `∂λH`. They are
//! computed from the commutator tower without ever leaving the Pauli basis.
//! Dense eigenbasis constructions are kept alongside as oracles.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Boundary, HamiltonianFamily, ModelSpec};
use crate::operator::{
    commutator, diagonalize, hermitian_eigen, hs_inner, nested_tower, to_matrix, DenseOperator,
    NestedTower, Pauli, PauliString, PauliSum, SpectralData,
};

/// Condition number of the scaled Gram matrix above which a ridge is added.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Ridge strength relative to `trace(M)/ℓ` of the scaled Gram matrix.
pub const GRAM_RIDGE: f64 = 1e-12;

/// Eigenvalue gaps below this fraction of the spectral range are treated as
/// degenerate by the exact-potential oracle.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Largest support accepted by [`local_basis_agp`].
pub const MAX_LOCAL_SUPPORT: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalCoefficients {
    pub order: usize,
    /// `α_1 .. α_ℓ`.
    pub alpha: Vec<f64>,
    /// Evaluation point; `None` for closed-form coefficient sets.
    pub lambda: Option<f64>,
    /// `S_ℓ / Tr[(∂λH)²]` at the solution.
    pub normalized_action: Option<f64>,
    /// Set when the Gram system was singular or needed regularization.
    pub degenerate: bool,
}

impl VariationalCoefficients {
    pub fn zeros(order: usize) -> Self {
        VariationalCoefficients {
            order,
            alpha: vec![0.0; order],
            lambda: None,
            normalized_action: None,
            degenerate: false,
        }
    }
}

/// Response-function moments `Γ(k) = 2^{-L} Σ_{m≠n} ω_mn^{2k} |⟨m|∂λH|n⟩|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMoments {
    /// Only available from the spectral route.
    pub zeroth: Option<f64>,
    /// `Γ(1) .. Γ(kmax)`.
    pub higher: Vec<f64>,
}

impl ResponseMoments {
    pub fn kmax(&self) -> usize {
        self.higher.len()
    }

    /// `Γ(k)`; `k = 0` needs the spectral route.
    pub fn get(&self, k: usize) -> Option<f64> {
        if k == 0 {
            self.zeroth
        } else {
            self.higher.get(k - 1).copied()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GappedSpec {
    pub gap: f64,
    pub order: usize,
}

/// `Γ(j)` from the split `⟨C_a, C_b⟩`, `a + b = 2j`.
pub fn moment_from_split(tower: &NestedTower, a: usize, b: usize) -> f64 {
    hs_inner(tower.level(a), tower.level(b)).re
}

/// Matrix-free moments `Γ(1) .. Γ(kmax)` using the balanced split `‖C_j‖²`.
pub fn response_moments_commutator(
    family: &HamiltonianFamily,
    lambda: f64,
    kmax: usize,
) -> Result<ResponseMoments> {
    let (h, dh) = family.at(lambda);
    moments_from_operators(&h, &dh, kmax)
}

pub fn moments_from_operators(h: &PauliSum, dh: &PauliSum, kmax: usize) -> Result<ResponseMoments> {
    if kmax == 0 {
        return Err(Error::InvalidArgument("kmax must be at least 1".into()));
    }
    let tower = nested_tower(h, dh, kmax)?;
    Ok(ResponseMoments {
        zeroth: None,
        higher: (1..=kmax).map(|j| tower.level(j).norm_sqr()).collect(),
    })
}

/// Moments from a full diagonalization, including `Γ(0)`.
pub fn response_moments_spectral(
    family: &HamiltonianFamily,
    lambda: f64,
    kmax: usize,
) -> Result<ResponseMoments> {
    let (h, dh) = family.at(lambda);
    let spec = diagonalize(&to_matrix(&h)?)?;
    let d = spec.to_eigenbasis(to_matrix(&dh)?.matrix());
    let n = spec.dim();
    let mut out = vec![0.0; kmax + 1];
    for m in 0..n {
        for k in 0..n {
            if m == k {
                continue;
            }
            let w2 = (spec.values[m] - spec.values[k]).powi(2);
            let weight = d[(m, k)].norm_sqr();
            let mut p = 1.0;
            for slot in out.iter_mut() {
                *slot += p * weight;
                p *= w2;
            }
        }
    }
    let norm = n as f64;
    Ok(ResponseMoments {
        zeroth: Some(out[0] / norm),
        higher: out[1..].iter().map(|v| v / norm).collect(),
    })
}

/// Output of the Gram solve with the pieces needed by diagnostics.
#[derive(Clone, Debug)]
pub struct GramSolution {
    pub alpha: Vec<f64>,
    /// `M_lk = Γ(l+k)`.
    pub gram: DMatrix<f64>,
    /// `b_l = Γ(l)`.
    pub rhs: DVector<f64>,
    /// Condition number of the Jacobi-scaled Gram matrix.
    pub condition: f64,
    pub degenerate: bool,
}

/// Solves `M α = -b` for the moment matrix built from `moments` (`Γ(1)..Γ(2ℓ)`).
pub fn solve_gram(moments: &[f64], order: usize) -> Result<GramSolution> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if moments.len() < 2 * order {
        return Err(Error::InvalidArgument(format!(
            "order {order} needs {} moments, got {}",
            2 * order,
            moments.len()
        )));
    }
    let gram = DMatrix::from_fn(order, order, |l, k| moments[l + k + 1]);
    let rhs = DVector::from_fn(order, |l, _| moments[l]);

    // Directions whose tower member vanishes carry no information.
    let scale_floor = gram.diagonal().max() * 1e-300;
    let active: Vec<usize> = (0..order).filter(|&k| gram[(k, k)] > scale_floor && gram[(k, k)] > 0.0).collect();
    let mut alpha = vec![0.0; order];
    if active.is_empty() {
        return Ok(GramSolution {
            alpha,
            gram,
            rhs,
            condition: f64::INFINITY,
            degenerate: true,
        });
    }
    let n = active.len();
    let d: Vec<f64> = active.iter().map(|&k| 1.0 / gram[(k, k)].sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |a, b| gram[(active[a], active[b])] * d[a] * d[b]);
    let scaled_rhs = DVector::from_fn(n, |a, _| -rhs[active[a]] * d[a]);

    let eig = scaled.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.max();
    let min_ev = eig.eigenvalues.min();
    let condition = if min_ev > 0.0 { max_ev / min_ev } else { f64::INFINITY };
    let mut degenerate = n < order;
    let y = if condition <= GRAM_CONDITION_LIMIT {
        match scaled.clone().cholesky() {
            Some(ch) => ch.solve(&scaled_rhs),
            None => {
                degenerate = true;
                ridge_solve(&scaled, &scaled_rhs)
            }
        }
    } else {
        degenerate = true;
        ridge_solve(&scaled, &scaled_rhs)
    };
    for (a, &k) in active.iter().enumerate() {
        alpha[k] = y[a] * d[a];
    }
    Ok(GramSolution {
        alpha,
        gram,
        rhs,
        condition,
        degenerate,
    })
}

fn ridge_solve(scaled: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let n = scaled.nrows();
    let mu = GRAM_RIDGE * scaled.trace() / n as f64;
    let reg = scaled + DMatrix::identity(n, n) * mu;
    reg.cholesky()
        .map(|ch| ch.solve(rhs))
        .unwrap_or_else(|| DVector::zeros(n))
}

/// Variational coefficients for explicit operators `H`, `∂λH`.
pub fn solve_alpha_operators(h: &PauliSum, dh: &PauliSum, order: usize) -> Result<(VariationalCoefficients, NestedTower)> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let tower = nested_tower(h, dh, 2 * order)?;
    let moments: Vec<f64> = (1..=2 * order).map(|j| tower.level(j).norm_sqr()).collect();
    let sol = solve_gram(&moments, order)?;
    let dh_norm = dh.norm_sqr();
    let normalized_action = if dh_norm > 0.0 {
        let mut g = dh.clone();
        for (k, &a) in sol.alpha.iter().enumerate() {
            if a != 0.0 {
                g = g.add_scaled(tower.level(2 * k + 2), Complex64::new(a, 0.0))?;
            }
        }
        Some(g.norm_sqr() / dh_norm)
    } else {
        None
    };
    Ok((
        VariationalCoefficients {
            order,
            alpha: sol.alpha,
            lambda: None,
            normalized_action,
            degenerate: sol.degenerate,
        },
        tower,
    ))
}

/// Minimizes the action over the ℓ-term commutator ansatz at `lambda`.
pub fn solve_alpha(family: &HamiltonianFamily, lambda: f64, order: usize) -> Result<VariationalCoefficients> {
    let (h, dh) = family.at(lambda);
    let (mut coeffs, _) = solve_alpha_operators(&h, &dh, order)?;
    coeffs.lambda = Some(lambda);
    Ok(coeffs)
}

/// Solves at every point of `lambdas` in parallel.
pub fn solve_alpha_grid(
    family: &HamiltonianFamily,
    lambdas: &[f64],
    order: usize,
) -> Result<Vec<VariationalCoefficients>> {
    lambdas
        .par_iter()
        .map(|&l| solve_alpha(family, l, order))
        .collect()
}

/// `i Σ_k α_k C_{2k-1}` from operators.
pub fn build_agp_operators(h: &PauliSum, dh: &PauliSum, alpha: &[f64]) -> Result<PauliSum> {
    let n = h.n_sites();
    let order = alpha.len();
    if order == 0 || alpha.iter().all(|&a| a == 0.0) {
        return Ok(PauliSum::zero(n));
    }
    let tower = nested_tower(h, dh, 2 * order - 1)?;
    agp_from_tower(&tower, alpha)
}

pub fn agp_from_tower(tower: &NestedTower, alpha: &[f64]) -> Result<PauliSum> {
    let n = tower.level(0).n_sites();
    let mut a = PauliSum::zero(n);
    for (k, &ak) in alpha.iter().enumerate() {
        if ak != 0.0 {
            a = a.add_scaled(tower.level(2 * k + 1), Complex64::new(0.0, ak))?;
        }
    }
    a.into_hermitian(1e-9)
}

/// The ℓ-th order variational potential at `lambda`.
pub fn build_agp(family: &HamiltonianFamily, lambda: f64, coeffs: &VariationalCoefficients) -> Result<PauliSum> {
    if let Some(at) = coeffs.lambda {
        if (at - lambda).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "coefficients solved at λ={at}, requested λ={lambda}"
            )));
        }
    }
    let (h, dh) = family.at(lambda);
    build_agp_operators(&h, &dh, &coeffs.alpha)
}

/// Exact gauge potential `⟨m|A|n⟩ = -i⟨m|∂λH|n⟩/(ε_m-ε_n)` from a dense eigensolve.
pub fn exact_agp(family: &HamiltonianFamily, lambda: f64) -> Result<DenseOperator> {
    let (h, dh) = family.at(lambda);
    exact_agp_operators(&h, &dh)
}

pub fn exact_agp_operators(h: &PauliSum, dh: &PauliSum) -> Result<DenseOperator> {
    let hm = to_matrix(h)?;
    let spec = diagonalize(&hm)?;
    let dm = to_matrix(dh)?;
    let a = exact_agp_eigenbasis(&spec, dm.matrix());
    DenseOperator::new(h.n_sites(), spec.from_eigenbasis(&a))
}

/// The exact potential expressed in the eigenbasis of `spec`.
pub fn exact_agp_eigenbasis(spec: &SpectralData, dh: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = spec.to_eigenbasis(dh);
    let n = spec.dim();
    let thr = DEGENERACY_TOL * spec.spectral_range();
    DMatrix::from_fn(n, n, |m, k| {
        let w = spec.values[m] - spec.values[k];
        if m == k || w.abs() <= thr {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0) * d[(m, k)] / w
        }
    })
}

/// Closed-form coefficients `α_k = (-1)^k / (k! Δ^{2k})` of the gapped potential.
pub fn gapped_alpha(spec: GappedSpec) -> Result<VariationalCoefficients> {
    if spec.order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if !(spec.gap > 0.0) {
        return Err(Error::InvalidArgument("gap must be positive".into()));
    }
    let inv_gap2 = 1.0 / (spec.gap * spec.gap);
    let mut alpha = Vec::with_capacity(spec.order);
    let mut term = 1.0;
    for k in 1..=spec.order {
        term *= -inv_gap2 / k as f64;
        alpha.push(term);
    }
    Ok(VariationalCoefficients {
        order: spec.order,
        alpha,
        lambda: None,
        normalized_action: None,
        degenerate: false,
    })
}

/// `(e^{-ω²/Δ²} - 1) / ω`, the prefactor the gapped series sums to.
pub fn gapped_prefactor_limit(omega: f64, gap: f64) -> f64 {
    if omega == 0.0 {
        return 0.0;
    }
    (-(omega * omega) / (gap * gap)).exp_m1() / omega
}

/// `a(ω) = Σ_k α_k ω^{2k-1}` on each grid point.
pub fn prefactor_curve(alpha: &[f64], omegas: &[f64]) -> Vec<f64> {
    omegas
        .iter()
        .map(|&w| {
            let w2 = w * w;
            let mut p = w;
            let mut acc = 0.0;
            for &a in alpha {
                acc += a * p;
                p *= w2;
            }
            acc
        })
        .collect()
}

/// `‖∂λH - i[H, A]‖² / ‖∂λH‖²`.
pub fn action_value(family: &HamiltonianFamily, lambda: f64, agp: &PauliSum) -> Result<f64> {
    let (h, dh) = family.at(lambda);
    action_value_operators(&h, &dh, agp)
}

pub fn action_value_operators(h: &PauliSum, dh: &PauliSum, agp: &PauliSum) -> Result<f64> {
    if !agp.is_hermitian(1e-9) {
        return Err(Error::InvalidArgument("gauge potential must be Hermitian".into()));
    }
    let norm = dh.norm_sqr();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("action undefined for ∂λH = 0".into()));
    }
    let g = dh.add_scaled(&commutator(h, agp)?, Complex64::new(0.0, -1.0))?;
    Ok(g.norm_sqr() / norm)
}

/// Least-squares gauge potential over all strings supported on `support`
/// consecutive sites.
#[derive(Clone, Debug)]
pub struct LocalAgp {
    pub operator: PauliSum,
    pub dense: DenseOperator,
    /// Basis string and its real coefficient, in canonical order.
    pub coefficients: Vec<(PauliString, f64)>,
    pub normalized_action: f64,
}

fn local_basis(n: usize, support: usize, periodic: bool) -> Vec<PauliString> {
    let width = support.min(n);
    let starts: Vec<usize> = if periodic && width < n {
        (0..n).collect()
    } else {
        (0..=n - width).collect()
    };
    let mut set = BTreeSet::new();
    for &s in &starts {
        for code in 1..(1usize << (2 * width)) {
            let mut p = PauliString::identity(n);
            for w in 0..width {
                let letter = match (code >> (2 * w)) & 3 {
                    0 => Pauli::I,
                    1 => Pauli::X,
                    2 => Pauli::Y,
                    _ => Pauli::Z,
                };
                p = p.with((s + w) % n, letter);
            }
            set.insert(p);
        }
    }
    set.into_iter().collect()
}

fn is_periodic(family: &HamiltonianFamily) -> bool {
    matches!(
        family.spec(),
        ModelSpec::IsingUniform {
            boundary: Boundary::Periodic,
            ..
        } | ModelSpec::TrapIsing {
            boundary: Boundary::Periodic,
            ..
        }
    )
}

pub fn local_basis_agp(family: &HamiltonianFamily, lambda: f64, support: usize) -> Result<LocalAgp> {
    if support == 0 || support > MAX_LOCAL_SUPPORT {
        return Err(Error::InvalidArgument(format!(
            "support must be in 1..={MAX_LOCAL_SUPPORT}, got {support}"
        )));
    }
    let n = family.n_sites();
    if n > crate::operator::MAX_DENSE_SITES {
        return Err(Error::Capacity(format!("local-basis solve limited to dense sizes, got {n} sites")));
    }
    let (h, dh) = family.at(lambda);
    let basis = local_basis(n, support, is_periodic(family));

    // Columns v_j = -i[H, P_j] are Hermitian with real coefficients.
    let columns: Vec<PauliSum> = basis
        .par_iter()
        .map(|p| {
            let single = PauliSum::from_real(n, [(*p, 1.0)])?;
            Ok(commutator(&h, &single)?.scale(Complex64::new(0.0, -1.0)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: HashMap<PauliString, Vec<(usize, f64)>> = HashMap::new();
    for (j, col) in columns.iter().enumerate() {
        for (s, c) in col.terms() {
            rows.entry(*s).or_default().push((j, c.re));
        }
    }
    let nb = basis.len();
    let mut gram = DMatrix::<f64>::zeros(nb, nb);
    let mut rhs = DVector::<f64>::zeros(nb);
    let mut row_keys: Vec<_> = rows.keys().copied().collect();
    row_keys.sort();
    for key in &row_keys {
        let entries = &rows[key];
        let target = dh.coefficient(key).re;
        for &(a, va) in entries {
            rhs[a] += va * target;
            for &(b, vb) in entries {
                gram[(a, b)] += va * vb;
            }
        }
    }

    // Pseudo-inverse: directions commuting with H are left at zero.
    let eig = hermitian_eigen(&gram.map(|v| Complex64::new(v, 0.0)));
    let max_ev = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = 1e-12 * max_ev;
    let mut coef = DVector::<f64>::zeros(nb);
    for k in 0..nb {
        let ev = eig.values[k];
        if ev > cutoff {
            let v = eig.vectors.column(k).map(|c| c.re);
            let proj = v.dot(&rhs);
            coef -= v * (proj / ev);
        }
    }

    let coefficients: Vec<(PauliString, f64)> = basis
        .iter()
        .zip(coef.iter())
        .filter(|(_, &c)| c != 0.0)
        .map(|(p, &c)| (*p, c))
        .collect();
    let operator = PauliSum::from_real(n, coefficients.iter().copied())?;
    let normalized_action = action_value_operators(&h, &dh, &operator)?;
    let dense = to_matrix(&operator)?;
    Ok(LocalAgp {
        operator,
        dense,
        coefficients,
        normalized_action,
    })
}

/// Writes `lambda, ell, k, alpha_k, normalized_action` rows.
pub fn write_alpha_csv<W: Write>(mut w: W, rows: &[VariationalCoefficients]) -> Result<()> {
    writeln!(w, "lambda,ell,k,alpha_k,normalized_action")?;
    for c in rows {
        let lambda = c.lambda.map(fmt_f64).unwrap_or_default();
        let action = c.normalized_action.map(fmt_f64).unwrap_or_default();
        for (k, a) in c.alpha.iter().enumerate() {
            writeln!(w, "{},{},{},{},{}", lambda, c.order, k + 1, fmt_f64(*a), action)?;
        }
    }
    Ok(())
}

/// Round-trip exact formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
