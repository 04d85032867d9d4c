//! Floquet-engineered counterdiabatic drives.
//!
//! The drive `H_FE(t) = [1 + (ω/ω₀) cos ωt] H + λ̇ Σ_k β_k sin((2k-1)ωt) ∂λH`
//! has, to leading order in the inverse frequency, the Floquet Hamiltonian
//! `H + λ̇ A_F` with `⟨m|A_F|n⟩ = i Σ_k β_k J_{2k-1}(ω_mn/ω₀) ⟨m|∂λH|n⟩`.
//! The amplitudes β are chosen so that the Taylor series of the Bessel sum
//! reproduces the variational prefactor `Σ_k α_k ω^{2k-1}` order by order.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::agp::{fmt_f64, VariationalCoefficients};
use crate::error::{Error, Result};
use crate::models::HamiltonianFamily;
use crate::operator::{hermitian_eigen, to_matrix, DenseOperator, PauliSum, SpectralData};

/// Below this `ω/ω₀` the high-frequency picture is unreliable.
pub const LOW_RATIO_WARNING: f64 = 10.0;

/// Default number of Magnus steps per period for [`stroboscopic_propagator`].
pub const DEFAULT_PERIOD_STEPS: usize = 2048;

const SERIES_LIMIT: f64 = 12.0;

/// Bessel function of the first kind `J_n(x)` for integer order `n ≥ 0`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 1 { -v } else { v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_LIMIT {
        bessel_series(n, x)
    } else {
        bessel_miller(n, x)
    }
}

fn bessel_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    // (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut m = 0u32;
    loop {
        m += 1;
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && m > 2 {
            break;
        }
        if m > 200 {
            break;
        }
    }
    sum
}

// Backward recurrence normalized by J_0 + 2 Σ J_{2k} = 1.
fn bessel_miller(n: u32, x: f64) -> f64 {
    let start = {
        let base = (n as f64).max(x);
        let s = (base + 30.0 + 10.0 * base.sqrt()) as usize;
        s + (s & 1)
    };
    let mut next = 0.0f64;
    let mut cur = 1e-300f64;
    let mut result = 0.0;
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        // cur = J_k, next = J_{k+1} (unnormalized)
        if k as u32 == n {
            result = cur;
        }
        if k == 0 {
            norm += cur;
        } else if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            result *= 1e-250;
            norm *= 1e-250;
        }
    }
    result / norm
}

/// Harmonic amplitudes of the Floquet drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetDrive {
    pub omega: f64,
    pub omega0: f64,
    /// `β_1 .. β_n`.
    pub beta: Vec<f64>,
}

impl FloquetDrive {
    pub fn new(omega: f64, omega0: f64, beta: Vec<f64>) -> Result<Self> {
        if !(omega > 0.0) || !(omega0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "drive frequencies must be positive (ω={omega}, ω₀={omega0})"
            )));
        }
        if omega / omega0 < LOW_RATIO_WARNING {
            log::warn!("ω/ω₀ = {} is below {LOW_RATIO_WARNING}", omega / omega0);
        }
        Ok(FloquetDrive { omega, omega0, beta })
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn harmonics(&self) -> usize {
        self.beta.len()
    }

    /// Amplitude `1 + (ω/ω₀) cos ωt` on `H`.
    pub fn h_factor(&self, t: f64) -> f64 {
        1.0 + self.omega / self.omega0 * (self.omega * t).cos()
    }

    /// `Σ_k β_k sin((2k-1)ωt)`, the factor multiplying `λ̇ ∂λH`.
    pub fn dh_factor(&self, t: f64) -> f64 {
        self.beta
            .iter()
            .enumerate()
            .map(|(k, b)| b * ((2 * k + 1) as f64 * self.omega * t).sin())
            .sum()
    }

    /// `Σ_k β_k J_{2k-1}(ω_mn/ω₀)`, the Floquet prefactor.
    pub fn prefactor(&self, omega_mn: f64) -> f64 {
        let x = omega_mn / self.omega0;
        self.beta
            .iter()
            .enumerate()
            .map(|(k, b)| b * bessel_j(2 * k as u32 + 1, x))
            .sum()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Amplitudes β matching the Bessel Taylor series to `α` through order
/// `ω^{2ℓ-1}`.
pub fn match_harmonics(coeffs: &VariationalCoefficients, omega0: f64) -> Result<Vec<f64>> {
    match_harmonics_compensated(coeffs, omega0, 0)
}

/// As [`match_harmonics`] with `extra` more harmonics cancelling the Bessel
/// series' own higher Taylor terms.
pub fn match_harmonics_compensated(coeffs: &VariationalCoefficients, omega0: f64, extra: usize) -> Result<Vec<f64>> {
    if coeffs.alpha.is_empty() {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if !(omega0 > 0.0) {
        return Err(Error::InvalidArgument("ω₀ must be positive".into()));
    }
    let n = coeffs.alpha.len() + extra;
    let two_w0 = 2.0 * omega0;
    // Row j scaled by (2ω₀)^{2j-1}: Σ_k β_k (-1)^{j-k} / ((j-k)!(j+k-1)!) = α_j (2ω₀)^{2j-1}.
    let mut beta = vec![0.0; n];
    for j in 1..=n {
        let target = coeffs.alpha.get(j - 1).copied().unwrap_or(0.0) * two_w0.powi(2 * j as i32 - 1);
        let mut acc = target;
        for k in 1..j {
            let sign = if (j - k) % 2 == 1 { -1.0 } else { 1.0 };
            acc -= beta[k - 1] * sign / (factorial(j - k) * factorial(j + k - 1));
        }
        beta[j - 1] = acc * factorial(2 * j - 1);
    }
    Ok(beta)
}

/// Instantaneous drive Hamiltonian at time `t` with `λ`, `λ̇` given.
pub fn drive_hamiltonian(
    family: &HamiltonianFamily,
    drive: &FloquetDrive,
    lambda: f64,
    lambda_dot: f64,
    t: f64,
) -> Result<PauliSum> {
    let (h, dh) = family.at(lambda);
    h.scale_real(drive.h_factor(t))
        .add_scaled(&dh, Complex64::new(lambda_dot * drive.dh_factor(t), 0.0))
}

/// One-period propagator with `λ`, `λ̇` frozen, `DEFAULT_PERIOD_STEPS` steps.
pub fn stroboscopic_propagator(
    family: &HamiltonianFamily,
    drive: &FloquetDrive,
    lambda: f64,
    lambda_dot: f64,
) -> Result<DenseOperator> {
    stroboscopic_propagator_steps(family, drive, lambda, lambda_dot, DEFAULT_PERIOD_STEPS)
}

/// One-period propagator from a fourth-order Magnus integrator with two Gauss
/// points per step. Each step is exponentiated exactly so the result is
/// unitary to rounding.
pub fn stroboscopic_propagator_steps(
    family: &HamiltonianFamily,
    drive: &FloquetDrive,
    lambda: f64,
    lambda_dot: f64,
    steps: usize,
) -> Result<DenseOperator> {
    if steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let (h, dh) = family.at(lambda);
    let hm = to_matrix(&h)?.into_matrix();
    let dm = to_matrix(&dh)?.into_matrix();
    let comm = {
        // -i[∂λH, H] is Hermitian and carries the Magnus correction.
        let c = &dm * &hm - &hm * &dm;
        c * Complex64::new(0.0, -1.0)
    };
    let dim = hm.nrows();
    let period = drive.period();
    let step = period / steps as f64;
    let c = 3f64.sqrt() / 6.0;
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for s in 0..steps {
        let t0 = s as f64 * step;
        let (ta, tb) = (t0 + (0.5 - c) * step, t0 + (0.5 + c) * step);
        let (fa, ga) = (drive.h_factor(ta), lambda_dot * drive.dh_factor(ta));
        let (fb, gb) = (drive.h_factor(tb), lambda_dot * drive.dh_factor(tb));
        // H(t) = f H + g ∂H, so [H_b, H_a] = (f_b g_a - g_b f_a)[H, ∂H].
        let mean_f = 0.5 * (fa + fb);
        let mean_g = 0.5 * (ga + gb);
        let cross = fb * ga - gb * fa;
        // K = (h/2)(H_a + H_b) + (√3/12) h² (-i)[H_b, H_a]
        let k = &hm * Complex64::new(step * mean_f, 0.0)
            + &dm * Complex64::new(step * mean_g, 0.0)
            - &comm * Complex64::new(3f64.sqrt() / 12.0 * step * step * cross, 0.0);
        u = exp_minus_i(&k) * u;
    }
    DenseOperator::new(family.n_sites(), u)
}

/// `exp(-iK)` for Hermitian `K`.
pub fn exp_minus_i(k: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let herm = (k + k.adjoint()) * Complex64::new(0.5, 0.0);
    let spec = hermitian_eigen(&herm);
    let phases = DVector::from_iterator(
        spec.dim(),
        spec.values.iter().map(|&e| Complex64::from_polar(1.0, -e)),
    );
    let scaled = DMatrix::from_fn(spec.dim(), spec.dim(), |r, c| spec.vectors[(r, c)] * phases[c]);
    scaled * spec.vectors.adjoint()
}

/// `i log(U) / T` with eigenphases taken in `(-π, π]`.
pub fn floquet_hamiltonian(u: &DenseOperator, period: f64) -> Result<DenseOperator> {
    let schur = nalgebra::linalg::Schur::new(u.matrix().clone());
    let (q, t) = schur.unpack();
    let dim = t.nrows();
    let off: f64 = (0..dim)
        .flat_map(|r| (r + 1..dim).map(move |c| (r, c)))
        .map(|(r, c)| t[(r, c)].norm())
        .fold(0.0, f64::max);
    if off > 1e-8 {
        return Err(Error::Consistency(format!(
            "propagator is not normal (Schur off-diagonal {off:.3e})"
        )));
    }
    let energies: Vec<f64> = (0..dim).map(|i| -t[(i, i)].arg() / period).collect();
    let scaled = DMatrix::from_fn(dim, dim, |r, c| q[(r, c)] * energies[c]);
    let hf = scaled * q.adjoint();
    let hf = (&hf + hf.adjoint()) * Complex64::new(0.5, 0.0);
    DenseOperator::new(u.n_sites(), hf)
}

/// Leading-order Floquet Hamiltonian `H + λ̇ A_F` assembled in the eigenbasis
/// of `spectral` and rotated back to the computational basis.
pub fn effective_floquet_elements(
    spectral: &SpectralData,
    dh: &DMatrix<Complex64>,
    drive: &FloquetDrive,
    lambda_dot: f64,
) -> Result<DenseOperator> {
    let dim = spectral.dim();
    if dh.nrows() != dim || dh.ncols() != dim || !dim.is_power_of_two() {
        return Err(Error::Structural(format!(
            "∂λH is {}x{}, spectrum has dimension {dim}",
            dh.nrows(),
            dh.ncols()
        )));
    }
    let d = spectral.to_eigenbasis(dh);
    let e = &spectral.values;
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new(e[r], 0.0)
        } else {
            Complex64::new(0.0, lambda_dot * drive.prefactor(e[r] - e[c])) * d[(r, c)]
        }
    });
    DenseOperator::new(dim.trailing_zeros() as usize, spectral.from_eigenbasis(&m))
}

/// Largest off-diagonal distance between two operators, in the eigenbasis of
/// `spectral`.
pub fn off_diagonal_mismatch(spectral: &SpectralData, a: &DenseOperator, b: &DenseOperator) -> f64 {
    let diff = spectral.to_eigenbasis(&(a.matrix() - b.matrix()));
    let n = diff.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                worst = worst.max(diff[(r, c)].norm());
            }
        }
    }
    worst
}

/// One row of a drive table.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveRow {
    pub lambda: f64,
    pub drive: FloquetDrive,
}

/// Writes `lambda, k, beta_k, omega, omega0` rows.
pub fn write_drive_csv<W: Write>(mut w: W, rows: &[DriveRow]) -> Result<()> {
    writeln!(w, "lambda,k,beta_k,omega,omega0")?;
    for r in rows {
        for (k, b) in r.drive.beta.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(r.lambda),
                k + 1,
                fmt_f64(*b),
                fmt_f64(r.drive.omega),
                fmt_f64(r.drive.omega0)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::{build_agp, solve_alpha};
    use crate::operator::{commutator, diagonalize};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn coeffs(alpha: Vec<f64>) -> VariationalCoefficients {
        VariationalCoefficients {
            order: alpha.len(),
            alpha,
            lambda: None,
            normalized_action: None,
            degenerate: false,
        }
    }

    // Reference values from standard tables.
    #[test]
    fn bessel_reference_values() {
        let cases = [
            (0, 1.0, 0.7651976865579666),
            (1, 1.0, 0.44005058574493355),
            (0, 5.0, -0.17759677131433835),
            (1, 10.0, 0.0434727461688616),
            (3, 2.5, 0.21660039103911358),
            (0, 12.0, 0.04768931079683349),
            (5, 12.0, -0.0734709631016586),
            (0, 20.0, 0.16702466434058322),
            (1, 30.0, -0.11875106261662291),
            (7, 25.0, -0.010168168212703077),
        ];
        for (n, x, want) in cases {
            let got = bessel_j(n, x);
            assert!((got - want).abs() < 1e-12, "J_{n}({x}) = {got}, want {want}");
        }
        assert_eq!(bessel_j(1, 0.0), 0.0);
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert!((bessel_j(1, -1.0) + 0.44005058574493355).abs() < 1e-15);
    }

    #[test]
    fn bessel_small_argument() {
        for x in [1e-3, 1e-2, 0.05] {
            let taylor = x / 2.0 - x * x * x / 16.0;
            assert!((bessel_j(1, x) - taylor).abs() < x.powi(5));
        }
    }

    #[test]
    fn bessel_branches_agree_at_switch() {
        for n in [0, 1, 3, 5, 9] {
            for x in [11.5, 12.0] {
                assert!((bessel_series(n, x) - bessel_miller(n, x)).abs() < 1e-12);
            }
        }
    }

    proptest! {
        // Three-term recurrence J_{n-1} + J_{n+1} = (2n/x) J_n.
        #[test]
        fn bessel_recurrence(n in 1u32..8, x in 0.1f64..30.0) {
            let lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
            let rhs = 2.0 * n as f64 / x * bessel_j(n, x);
            prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + 2.0 * n as f64 / x));
        }

        #[test]
        fn drive_is_hermitian(lambda in 0.0f64..1.0, lambda_dot in -5.0f64..5.0, t in 0.0f64..1.0,
                              beta in prop::collection::vec(-50.0f64..50.0, 1..4)) {
            let f = HamiltonianFamily::three_level(1.0, 2.0);
            let drive = FloquetDrive::new(3000.0, 30.0, beta).unwrap();
            let hd = drive_hamiltonian(&f, &drive, lambda, lambda_dot, t).unwrap();
            prop_assert!(hd.is_hermitian(0.0));
        }

        // Taylor coefficients of Σ β_k J_{2k-1}(ω/ω₀) from the series definition.
        #[test]
        fn triangular_match(alpha in prop::collection::vec(-2.0f64..2.0, 1..5), w0 in 1.0f64..100.0) {
            let c = coeffs(alpha.clone());
            let beta = match_harmonics(&c, w0).unwrap();
            prop_assert_eq!(beta.len(), alpha.len());
            for j in 1..=alpha.len() {
                let mut taylor = 0.0;
                for (k, b) in beta.iter().enumerate() {
                    let k = k + 1;
                    if k <= j {
                        let m = j - k;
                        let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
                        taylor += b * sign / (2f64.powi(2 * j as i32 - 1) * factorial(m) * factorial(m + 2 * k - 1))
                            / w0.powi(2 * j as i32 - 1);
                    }
                }
                let scale = alpha.iter().map(|a| a.abs()).fold(1e-3, f64::max);
                prop_assert!((taylor - alpha[j - 1]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn reference_amplitudes() {
        let (a1, a2, w0) = (-0.0123, 3.4e-5, 20.0 * PI);
        let beta = match_harmonics(&coeffs(vec![a1]), w0).unwrap();
        assert!((beta[0] - 2.0 * a1 * w0).abs() <= 1e-12 * beta[0].abs());
        let beta = match_harmonics(&coeffs(vec![a1, a2]), w0).unwrap();
        let b2 = 2.0 * w0 * (24.0 * a2 * w0 * w0 + 3.0 * a1);
        assert!((beta[1] - b2).abs() <= 1e-12 * b2.abs());
        assert_eq!(match_harmonics(&coeffs(vec![0.0, 0.0]), w0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn compensation_improves_residual() {
        let (a1, w0) = (-0.8, 1.0);
        let c = coeffs(vec![a1]);
        assert_eq!(
            match_harmonics_compensated(&c, w0, 0).unwrap(),
            match_harmonics(&c, w0).unwrap()
        );
        let plain = FloquetDrive::new(100.0, w0, match_harmonics(&c, w0).unwrap()).unwrap();
        let comp = FloquetDrive::new(100.0, w0, match_harmonics_compensated(&c, w0, 1).unwrap()).unwrap();
        let w = w0 / 10.0;
        let e_plain = (plain.prefactor(w) - a1 * w).abs();
        let e_comp = (comp.prefactor(w) - a1 * w).abs();
        assert!(e_comp < e_plain);
        // Leading residuals scale as x³ and x⁵ respectively.
        let w_half = w / 2.0;
        let r_plain = e_plain / (plain.prefactor(w_half) - a1 * w_half).abs();
        let r_comp = e_comp / (comp.prefactor(w_half) - a1 * w_half).abs();
        assert!((r_plain - 8.0).abs() < 0.1);
        assert!((r_comp - 32.0).abs() < 0.5);
    }

    #[test]
    fn drive_hamiltonian_cases() {
        let f = HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0);
        let drive = FloquetDrive::new(2500.0, 10.0, vec![0.3, -0.1]).unwrap();
        let (h, _) = f.at(0.4);
        let at0 = drive_hamiltonian(&f, &drive, 0.4, 2.0, 0.0).unwrap();
        assert!(at0.sub(&h.scale_real(251.0)).unwrap().max_abs_coefficient() < 1e-12);
        let still = drive_hamiltonian(&f, &drive, 0.4, 0.0, 0.37e-3).unwrap();
        assert!(still.sub(&h.scale_real(drive.h_factor(0.37e-3))).unwrap().max_abs_coefficient() < 1e-12);
        // Period average by the trapezoid rule, exact for trigonometric polynomials.
        let n = 64;
        let mut avg = PauliSum::zero(2);
        for s in 0..n {
            let t = drive.period() * s as f64 / n as f64;
            let hd = drive_hamiltonian(&f, &drive, 0.4, 2.0, t).unwrap();
            assert!(hd.is_hermitian(0.0));
            avg = avg.add(&hd.scale_real(1.0 / n as f64)).unwrap();
        }
        assert!(avg.sub(&h).unwrap().max_abs_coefficient() < 1e-9);
    }

    #[test]
    fn frozen_ramp_gives_bare_propagator() {
        let f = HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0);
        let drive = FloquetDrive::new(500.0, 10.0, vec![0.7]).unwrap();
        let u = stroboscopic_propagator_steps(&f, &drive, 0.3, 0.0, 256).unwrap();
        let (h, _) = f.at(0.3);
        let hm = to_matrix(&h).unwrap().into_matrix() * Complex64::new(drive.period(), 0.0);
        let want = exp_minus_i(&hm);
        assert!((u.matrix() - want).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn propagator_is_unitary_and_converged() {
        let f = HamiltonianFamily::three_level(1.0, 2.0);
        let c = solve_alpha(&f, 0.4, 2).unwrap();
        let w0 = 20.0 * PI;
        let drive = FloquetDrive::new(100.0 * w0, w0, match_harmonics(&c, w0).unwrap()).unwrap();
        let u1 = stroboscopic_propagator_steps(&f, &drive, 0.4, 3.0, 512).unwrap();
        let u2 = stroboscopic_propagator_steps(&f, &drive, 0.4, 3.0, 1024).unwrap();
        let id = DMatrix::<Complex64>::identity(4, 4);
        let unit = (u1.matrix().adjoint() * u1.matrix() - id).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(unit < 1e-9);
        let change = (u1.matrix() - u2.matrix()).norm();
        assert!(change < 1e-8, "step halving changed U by {change}");
    }

    #[test]
    fn effective_elements_limits() {
        let f = HamiltonianFamily::three_level(1.0, 2.0);
        let (h, dh) = f.at(0.3);
        let hm = to_matrix(&h).unwrap();
        let spec = diagonalize(&hm).unwrap();
        let dm = to_matrix(&dh).unwrap().into_matrix();
        let drive = FloquetDrive::new(1000.0, 10.0, vec![0.0, 0.0]).unwrap();
        let eff = effective_floquet_elements(&spec, &dm, &drive, 5.0).unwrap();
        assert!(eff.max_abs_diff(&hm) < 1e-12);
    }

    // H + iλ̇α₁C₁ + iλ̇α₂C₃ against the Bessel form. The residual is the x⁵
    // Taylor term with x = ω_mn/ω₀; since β_k grows like ω₀^{2k-1} it falls
    // off as ω₀⁻² in absolute terms.
    #[test]
    fn two_harmonic_identity() {
        let f = HamiltonianFamily::three_level(1.0, 2.0);
        let lambda = 0.6;
        let c = solve_alpha(&f, lambda, 2).unwrap();
        let (h, dh) = f.at(lambda);
        let spec = diagonalize(&to_matrix(&h).unwrap()).unwrap();
        let dm = to_matrix(&dh).unwrap().into_matrix();
        let d = spec.to_eigenbasis(&dm);
        let d_max = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let x_max = spec.spectral_range();
        let lambda_dot = 2.0;
        let c1 = commutator(&h, &dh).unwrap();
        let c3 = commutator(&h, &commutator(&h, &c1).unwrap()).unwrap();
        let target = h
            .add_scaled(&c1, Complex64::new(0.0, lambda_dot * c.alpha[0]))
            .unwrap()
            .add_scaled(&c3, Complex64::new(0.0, lambda_dot * c.alpha[1]))
            .unwrap();
        let target = to_matrix(&target).unwrap();
        let mut errs = Vec::new();
        for w0 in [200.0, 400.0] {
            let beta = match_harmonics(&c, w0).unwrap();
            let drive = FloquetDrive::new(1e4 * w0, w0, beta.clone()).unwrap();
            let eff = effective_floquet_elements(&spec, &dm, &drive, lambda_dot).unwrap();
            let err = eff.max_abs_diff(&target);
            let x = x_max / w0;
            let bound = (beta[0].abs() / 384.0 + beta[1].abs() / 768.0) * x.powi(5) * lambda_dot * d_max * 4.0;
            assert!(err <= bound, "ω₀={w0}: {err} > {bound}");
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn floquet_log_recovers_static_hamiltonian() {
        let f = HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0);
        let (h, _) = f.at(0.7);
        let hm = to_matrix(&h).unwrap();
        let period = 0.05;
        let u = DenseOperator::new(2, exp_minus_i(&(hm.matrix() * Complex64::new(period, 0.0)))).unwrap();
        let hf = floquet_hamiltonian(&u, period).unwrap();
        assert!(hf.max_abs_diff(&hm) < 1e-11);
    }

    // Numeric propagator against the Bessel prediction for the single-harmonic
    // drive; the mismatch is a finite-ω effect and shrinks with ω/ω₀.
    #[test]
    fn propagator_tracks_effective_hamiltonian() {
        let f = HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0);
        let lambda = 0.5;
        let c = solve_alpha(&f, lambda, 1).unwrap();
        let (h, dh) = f.at(lambda);
        let spec = diagonalize(&to_matrix(&h).unwrap()).unwrap();
        let dm = to_matrix(&dh).unwrap().into_matrix();
        let w0 = 20.0 * PI;
        let a1 = to_matrix(&build_agp(&f, lambda, &c).unwrap()).unwrap();
        let scale = a1.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut prev = f64::INFINITY;
        for ratio in [250.0, 1000.0] {
            let drive = FloquetDrive::new(ratio * w0, w0, match_harmonics(&c, w0).unwrap()).unwrap();
            let u = stroboscopic_propagator(&f, &drive, lambda, 1.0).unwrap();
            let hf = floquet_hamiltonian(&u, drive.period()).unwrap();
            let eff = effective_floquet_elements(&spec, &dm, &drive, 1.0).unwrap();
            let mismatch = off_diagonal_mismatch(&spec, &hf, &eff) / scale;
            assert!(mismatch < prev);
            prev = mismatch;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn drive_csv_and_validation() {
        let d = FloquetDrive::new(100.0, 10.0, vec![1.5, -0.25]).unwrap();
        let mut buf = Vec::new();
        write_drive_csv(&mut buf, &[DriveRow { lambda: 0.5, drive: d }]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("lambda,k,beta_k,omega,omega0\n"));
        assert!(FloquetDrive::new(0.0, 1.0, vec![]).is_err());
        assert!(FloquetDrive::new(1.0, -1.0, vec![]).is_err());
    }
}
