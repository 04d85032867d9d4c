//! Parameterized spin Hamiltonians `λ ↦ (H(λ), ∂λH(λ))`.
//!
//! Sites are 1-based in descriptors (matching how trap positions are usually
//! quoted) and 0-based inside [`PauliString`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Pauli, PauliString, PauliSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

/// Gaussian trap dragged from site `i0` to site `i_f` as λ goes from 0 to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    pub h_t: f64,
    pub w_t: f64,
    pub i0: usize,
    pub i_f: usize,
}

impl TrapSpec {
    /// Trap center `c_t(λ) = (1-λ) i0 + λ i_f`, 1-based.
    pub fn center(&self, lambda: f64) -> f64 {
        (1.0 - lambda) * self.i0 as f64 + lambda * self.i_f as f64
    }
}

/// Serializable model descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `J(XX + ZZ) + h_z(λ-1)(Z₁ + Z₂)`.
    TwoQubitXxzz { j: f64, h_z: f64 },
    /// `-2J Z₁Z₂ - h(Z₁ + Z₂) + 2hλ(X₁ + X₂)`.
    ThreeLevel { j: f64, h: f64 },
    /// `J Σ ZZ + λ(h_z Σ Z + h_x Σ X)`.
    IsingUniform {
        l: usize,
        j: f64,
        h_x: f64,
        h_z: f64,
        #[serde(default)]
        boundary: Boundary,
    },
    /// Ising chain in uniform fields plus a moving Gaussian σᶻ trap.
    TrapIsing {
        l: usize,
        j: f64,
        h_x: f64,
        h_z: f64,
        trap: TrapSpec,
        #[serde(default = "open_boundary")]
        boundary: Boundary,
    },
}

fn open_boundary() -> Boundary {
    Boundary::Open
}

/// A validated model: builds `H(λ)` and its analytic λ-derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianFamily {
    spec: ModelSpec,
}

fn string1(n: usize, i: usize, p: Pauli) -> PauliString {
    PauliString::single(n, i, p)
}

fn string2(n: usize, i: usize, p: Pauli, j: usize, q: Pauli) -> PauliString {
    PauliString::single(n, i, p).with(j, q)
}

impl HamiltonianFamily {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        match &spec {
            ModelSpec::TwoQubitXxzz { .. } | ModelSpec::ThreeLevel { .. } => {}
            ModelSpec::IsingUniform { l, .. } => check_chain(*l)?,
            ModelSpec::TrapIsing { l, trap, .. } => {
                check_chain(*l)?;
                for (name, i) in [("i0", trap.i0), ("i_f", trap.i_f)] {
                    if i < 1 || i > *l {
                        return Err(Error::InvalidArgument(format!(
                            "trap {name} = {i} outside sites 1..={l}"
                        )));
                    }
                }
                if !(trap.w_t > 0.0) {
                    return Err(Error::InvalidArgument("trap width must be positive".into()));
                }
            }
        }
        Ok(HamiltonianFamily { spec })
    }

    pub fn two_qubit_xxzz(j: f64, h_z: f64) -> Self {
        HamiltonianFamily {
            spec: ModelSpec::TwoQubitXxzz { j, h_z },
        }
    }

    pub fn three_level(j: f64, h: f64) -> Self {
        HamiltonianFamily {
            spec: ModelSpec::ThreeLevel { j, h },
        }
    }

    pub fn ising_uniform(l: usize, j: f64, h_x: f64, h_z: f64, boundary: Boundary) -> Result<Self> {
        Self::new(ModelSpec::IsingUniform {
            l,
            j,
            h_x,
            h_z,
            boundary,
        })
    }

    pub fn trap_ising(l: usize, j: f64, h_x: f64, h_z: f64, trap: TrapSpec) -> Result<Self> {
        Self::new(ModelSpec::TrapIsing {
            l,
            j,
            h_x,
            h_z,
            trap,
            boundary: Boundary::Open,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> &'static str {
        match self.spec {
            ModelSpec::TwoQubitXxzz { .. } => "two_qubit_xxzz",
            ModelSpec::ThreeLevel { .. } => "three_level",
            ModelSpec::IsingUniform { .. } => "ising_uniform",
            ModelSpec::TrapIsing { .. } => "trap_ising",
        }
    }

    pub fn n_sites(&self) -> usize {
        match self.spec {
            ModelSpec::TwoQubitXxzz { .. } | ModelSpec::ThreeLevel { .. } => 2,
            ModelSpec::IsingUniform { l, .. } | ModelSpec::TrapIsing { l, .. } => l,
        }
    }

    pub fn hamiltonian(&self, lambda: f64) -> PauliSum {
        use Pauli::*;
        let n = self.n_sites();
        let mut terms: Vec<(PauliString, f64)> = Vec::new();
        match self.spec {
            ModelSpec::TwoQubitXxzz { j, h_z } => {
                terms.push((string2(n, 0, X, 1, X), j));
                terms.push((string2(n, 0, Z, 1, Z), j));
                terms.push((string1(n, 0, Z), h_z * (lambda - 1.0)));
                terms.push((string1(n, 1, Z), h_z * (lambda - 1.0)));
            }
            ModelSpec::ThreeLevel { j, h } => {
                terms.push((string2(n, 0, Z, 1, Z), -2.0 * j));
                terms.push((string1(n, 0, Z), -h));
                terms.push((string1(n, 1, Z), -h));
                terms.push((string1(n, 0, X), 2.0 * h * lambda));
                terms.push((string1(n, 1, X), 2.0 * h * lambda));
            }
            ModelSpec::IsingUniform {
                l,
                j,
                h_x,
                h_z,
                boundary,
            } => {
                push_bonds(&mut terms, l, j, boundary);
                for i in 0..l {
                    terms.push((string1(n, i, Z), lambda * h_z));
                    terms.push((string1(n, i, X), lambda * h_x));
                }
            }
            ModelSpec::TrapIsing {
                l,
                j,
                h_x,
                h_z,
                trap,
                boundary,
            } => {
                push_bonds(&mut terms, l, j, boundary);
                let c = trap.center(lambda);
                for i in 0..l {
                    let g = gaussian((i + 1) as f64 - c, trap.w_t);
                    terms.push((string1(n, i, Z), h_z - trap.h_t * g));
                    terms.push((string1(n, i, X), h_x));
                }
            }
        }
        build(n, terms)
    }

    pub fn derivative(&self, lambda: f64) -> PauliSum {
        use Pauli::*;
        let n = self.n_sites();
        let mut terms: Vec<(PauliString, f64)> = Vec::new();
        match self.spec {
            ModelSpec::TwoQubitXxzz { h_z, .. } => {
                terms.push((string1(n, 0, Z), h_z));
                terms.push((string1(n, 1, Z), h_z));
            }
            ModelSpec::ThreeLevel { h, .. } => {
                terms.push((string1(n, 0, X), 2.0 * h));
                terms.push((string1(n, 1, X), 2.0 * h));
            }
            ModelSpec::IsingUniform { l, h_x, h_z, .. } => {
                for i in 0..l {
                    terms.push((string1(n, i, Z), h_z));
                    terms.push((string1(n, i, X), h_x));
                }
            }
            ModelSpec::TrapIsing { l, trap, .. } => {
                let c = trap.center(lambda);
                let dc = trap.i_f as f64 - trap.i0 as f64;
                let w2 = trap.w_t * trap.w_t;
                for i in 0..l {
                    let d = (i + 1) as f64 - c;
                    let coef = -trap.h_t * dc * 2.0 * d / w2 * gaussian(d, trap.w_t);
                    terms.push((string1(n, i, Z), coef));
                }
            }
        }
        build(n, terms)
    }

    /// `(H(λ), ∂λH(λ))`.
    pub fn at(&self, lambda: f64) -> (PauliSum, PauliSum) {
        (self.hamiltonian(lambda), self.derivative(lambda))
    }

    /// σᶻ coefficient the trap contributes on each site; empty for other models.
    pub fn trap_profile(&self, lambda: f64) -> Vec<f64> {
        match self.spec {
            ModelSpec::TrapIsing { l, trap, .. } => {
                let c = trap.center(lambda);
                (0..l).map(|i| -trap.h_t * gaussian((i + 1) as f64 - c, trap.w_t)).collect()
            }
            _ => Vec::new(),
        }
    }
}

fn check_chain(l: usize) -> Result<()> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("chain needs at least 2 sites, got {l}")));
    }
    if l > crate::operator::MAX_SITES {
        return Err(Error::Capacity(format!("chain of {l} sites exceeds representation limit")));
    }
    Ok(())
}

fn gaussian(d: f64, w: f64) -> f64 {
    (-(d * d) / (w * w)).exp()
}

fn push_bonds(terms: &mut Vec<(PauliString, f64)>, l: usize, j: f64, boundary: Boundary) {
    let bonds = match boundary {
        Boundary::Periodic => l,
        Boundary::Open => l - 1,
    };
    for i in 0..bonds {
        terms.push((string2(l, i, Pauli::Z, (i + 1) % l, Pauli::Z), j));
    }
}

fn build(n: usize, terms: Vec<(PauliString, f64)>) -> PauliSum {
    PauliSum::from_real(n, terms).expect("model strings match the site count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{diagonalize, hs_inner, to_matrix};
    use num_complex::Complex64;

    fn fig4_trap() -> TrapSpec {
        TrapSpec {
            h_t: 8.0,
            w_t: 1.0,
            i0: 3,
            i_f: 10,
        }
    }

    #[test]
    fn two_qubit_field_vanishes_at_one() {
        let f = HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0);
        let h = f.hamiltonian(1.0);
        assert_eq!(h.len(), 2);
        assert_eq!(f.derivative(0.3).len(), 2);
    }

    #[test]
    fn two_qubit_final_ground_state_is_bell() {
        let f = HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0);
        let spec = diagonalize(&to_matrix(&f.hamiltonian(1.0)).unwrap()).unwrap();
        let g = spec.ground_state();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let overlap = (g[0] * s + g[3] * s).norm_sqr();
        assert!((overlap - 1.0).abs() < 1e-12, "overlap {overlap}");
    }

    #[test]
    fn three_level_ground_state_at_zero() {
        let f = HamiltonianFamily::three_level(1.0, 2.0);
        let spec = diagonalize(&to_matrix(&f.hamiltonian(0.0)).unwrap()).unwrap();
        assert!((spec.ground_energy() + 6.0).abs() < 1e-12);
        assert!((spec.ground_state()[0].norm_sqr() - 1.0).abs() < 1e-12);
        // ZZ, two Z fields, two X fields.
        assert_eq!(f.hamiltonian(0.4).len(), 5);
    }

    #[test]
    fn ising_term_counts() {
        let f = HamiltonianFamily::ising_uniform(6, 1.0, 0.3, 0.3, Boundary::Periodic).unwrap();
        assert_eq!(f.hamiltonian(0.5).len(), 6 + 12);
        assert_eq!(f.hamiltonian(0.0).len(), 6);
        let open = HamiltonianFamily::ising_uniform(6, 1.0, 0.3, 0.3, Boundary::Open).unwrap();
        assert_eq!(open.hamiltonian(0.5).len(), 5 + 12);
        assert!(HamiltonianFamily::ising_uniform(1, 1.0, 0.3, 0.3, Boundary::Open).is_err());
    }

    #[test]
    fn ising_is_classical_at_zero() {
        let f = HamiltonianFamily::ising_uniform(4, 1.0, 0.3, 0.3, Boundary::Periodic).unwrap();
        let m = to_matrix(&f.hamiltonian(0.0)).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                if r != c {
                    assert_eq!(m.matrix()[(r, c)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn fig1_parameters_fit_dense_guard() {
        let f = HamiltonianFamily::ising_uniform(14, 1.0, 0.3, 0.3, Boundary::Periodic).unwrap();
        assert!(f.n_sites() <= crate::operator::MAX_DENSE_SITES);
        assert_eq!(f.hamiltonian(1.0).len(), 42);
    }

    #[test]
    fn trap_center_and_stationary_trap() {
        let trap = fig4_trap();
        assert_eq!(trap.center(0.0), 3.0);
        assert_eq!(trap.center(1.0), 10.0);
        let f = HamiltonianFamily::trap_ising(12, -1.0, 0.8, 0.9, trap).unwrap();
        let profile = f.trap_profile(0.0);
        let deepest = (0..12).min_by(|&a, &b| profile[a].total_cmp(&profile[b])).unwrap();
        assert_eq!(deepest + 1, 3);

        let still = TrapSpec { i_f: 3, ..trap };
        let g = HamiltonianFamily::trap_ising(12, -1.0, 0.8, 0.9, still).unwrap();
        assert!(g.derivative(0.4).is_empty());
    }

    #[test]
    fn trap_bounds_checked() {
        let bad = TrapSpec { i_f: 13, ..fig4_trap() };
        assert!(HamiltonianFamily::trap_ising(12, -1.0, 0.8, 0.9, bad).is_err());
        let zero = TrapSpec { i0: 0, ..fig4_trap() };
        assert!(HamiltonianFamily::trap_ising(12, -1.0, 0.8, 0.9, zero).is_err());
        let flat = TrapSpec { w_t: 0.0, ..fig4_trap() };
        assert!(HamiltonianFamily::trap_ising(12, -1.0, 0.8, 0.9, flat).is_err());
    }

    fn all_models() -> Vec<HamiltonianFamily> {
        vec![
            HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0),
            HamiltonianFamily::three_level(1.0, 2.0),
            HamiltonianFamily::ising_uniform(5, 1.0, 0.3, 0.7, Boundary::Periodic).unwrap(),
            HamiltonianFamily::trap_ising(8, -1.0, 0.8, 0.9, TrapSpec { h_t: 8.0, w_t: 1.0, i0: 2, i_f: 7 })
                .unwrap(),
        ]
    }

    fn fd_error(f: &HamiltonianFamily, lambda: f64, delta: f64) -> f64 {
        let fd = f
            .hamiltonian(lambda + delta)
            .sub(&f.hamiltonian(lambda - delta))
            .unwrap()
            .scale_real(0.5 / delta);
        let diff = fd.sub(&f.derivative(lambda)).unwrap();
        hs_inner(&diff, &diff).re.sqrt()
    }

    #[test]
    fn finite_difference_derivative() {
        for f in all_models().into_iter().take(3) {
            for k in 0..5 {
                let lambda = 0.1 + 0.2 * k as f64;
                let err = fd_error(&f, lambda, 1e-4);
                assert!(err <= 1e-6, "{} at λ={lambda}: {err}", f.name());
                assert!(f.hamiltonian(lambda).is_hermitian(0.0));
            }
        }
    }

    // A steep moving Gaussian has a third λ-derivative in the thousands, so the
    // O(δ²) truncation of a central difference at δ=1e-4 alone is ~1e-5. The
    // error must then shrink by 4 per halving and vanish under extrapolation.
    #[test]
    fn trap_derivative_is_exact() {
        let f = all_models().pop().unwrap();
        for k in 0..5 {
            let lambda = 0.1 + 0.2 * k as f64;
            let delta = 1e-3;
            let e1 = fd_error(&f, lambda, delta);
            let e2 = fd_error(&f, lambda, delta / 2.0);
            assert!((e1 / e2 - 4.0).abs() < 0.05, "λ={lambda}: ratio {}", e1 / e2);
            let half = |d: f64| {
                f.hamiltonian(lambda + d)
                    .sub(&f.hamiltonian(lambda - d))
                    .unwrap()
                    .scale_real(0.5 / d)
            };
            let rich = half(delta / 2.0)
                .scale_real(4.0 / 3.0)
                .sub(&half(delta).scale_real(1.0 / 3.0))
                .unwrap();
            let diff = rich.sub(&f.derivative(lambda)).unwrap();
            assert!(hs_inner(&diff, &diff).re.sqrt() <= 1e-6);
            assert!(f.hamiltonian(lambda).is_hermitian(0.0));
        }
    }

    #[test]
    fn two_qubit_block_structure() {
        let f = HamiltonianFamily::two_qubit_xxzz(-1.0, 5.0);
        for lambda in [0.0, 0.35, 0.8] {
            let m = to_matrix(&f.hamiltonian(lambda)).unwrap();
            let m = m.matrix();
            // {|↑↓⟩, |↓↑⟩} = indices {1, 2} never mix with {0, 3}.
            for a in [1, 2] {
                for b in [0, 3] {
                    assert_eq!(m[(a, b)].norm(), 0.0);
                    assert_eq!(m[(b, a)].norm(), 0.0);
                }
            }
            assert_eq!(m[(0, 3)].im, 0.0);
            assert_eq!(m[(0, 3)], m[(3, 0)]);
        }
    }

    #[test]
    fn three_level_singlet_decouples() {
        let f = HamiltonianFamily::three_level(1.0, 2.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = [0.0, s, -s, 0.0];
        let triplet = [[1.0, 0.0, 0.0, 0.0], [0.0, s, s, 0.0], [0.0, 0.0, 0.0, 1.0]];
        for lambda in [0.0, 0.25, 0.5, 1.0] {
            let m = to_matrix(&f.hamiltonian(lambda)).unwrap();
            let m = m.matrix();
            for t in &triplet {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..4 {
                    for c in 0..4 {
                        acc += singlet[r] * m[(r, c)] * t[c];
                    }
                }
                assert!(acc.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn descriptor_round_trips() {
        for f in all_models() {
            let json = serde_json::to_string(f.spec()).unwrap();
            let back: ModelSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(&back, f.spec());
        }
    }
}
