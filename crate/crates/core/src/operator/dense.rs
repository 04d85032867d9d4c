//! Dense rendering, Hermitian eigensolves and matrix-free state-vector action.
//!
//! Basis states are indexed with site 0 as the most significant bit and
//! bit value 0 meaning spin up (σᶻ = +1), so `to_matrix` reproduces the usual
//! Kronecker product `σ_1 ⊗ σ_2 ⊗ …`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::pauli::{i_pow, PauliSum};
use crate::error::{Error, Result};

/// Largest site count accepted by the dense path.
pub const MAX_DENSE_SITES: usize = 14;

/// Dimensions at which matvecs switch to a parallel gather.
const PARALLEL_DIM: usize = 1 << 10;

pub type StateVector = Vec<Complex64>;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n_sites: usize,
    matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(n_sites: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = 1usize << n_sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Structural(format!(
                "matrix is {}x{}, expected {dim}x{dim} for {n_sites} sites",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DenseOperator { n_sites, matrix })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Largest entry-wise distance to `other`.
    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<Complex64>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    pub fn ground_state(&self) -> StateVector {
        self.vectors.column(0).iter().copied().collect()
    }

    /// `⟨m|O|n⟩` for every pair of eigenvectors.
    pub fn to_eigenbasis(&self, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.vectors.adjoint() * op * &self.vectors
    }

    /// Inverse of [`SpectralData::to_eigenbasis`].
    pub fn from_eigenbasis(&self, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        &self.vectors * op * self.vectors.adjoint()
    }

    pub fn spectral_range(&self) -> f64 {
        let n = self.values.len();
        self.values[n - 1] - self.values[0]
    }
}

fn check_dense(n_sites: usize) -> Result<()> {
    if n_sites > MAX_DENSE_SITES {
        return Err(Error::Capacity(format!(
            "dense work on {n_sites} sites exceeds the {MAX_DENSE_SITES}-site limit"
        )));
    }
    Ok(())
}

/// Renders a Pauli sum as a `2^L × 2^L` matrix.
pub fn to_matrix(a: &PauliSum) -> Result<DenseOperator> {
    let n = a.n_sites();
    check_dense(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (s, c) in a.terms() {
        let (x, z) = s.state_masks();
        let coef = c * i_pow(s.y_count());
        for b in 0..dim {
            let sign = if (b & z).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
            m[(b ^ x, b)] += coef * sign;
        }
    }
    DenseOperator::new(n, m)
}

/// Hermitian eigensolve. Real input matrices take the faster real path.
pub fn diagonalize(m: &DenseOperator) -> Result<SpectralData> {
    check_dense(m.n_sites)?;
    Ok(hermitian_eigen(&m.matrix))
}

pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>) -> SpectralData {
    let n = m.nrows();
    let (values, vectors) = if m.iter().all(|c| c.im == 0.0) {
        let real = m.map(|c| c.re);
        let eig = real.symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors.map(|v| Complex64::new(v, 0.0)))
    } else {
        let eig = m.clone().symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted_values = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut sorted_vectors = DMatrix::<Complex64>::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        sorted_vectors.set_column(k, &vectors.column(i));
    }
    SpectralData {
        values: sorted_values,
        vectors: sorted_vectors,
    }
}

/// A Pauli sum prepared for repeated action on state vectors.
///
/// Terms sharing an X/Y flip pattern are grouped so each group costs one
/// gather per basis state.
#[derive(Clone, Debug)]
pub struct StateOperator {
    n_sites: usize,
    groups: Vec<FlipGroup>,
}

#[derive(Clone, Debug)]
struct FlipGroup {
    flip: usize,
    /// `(z mask, coefficient including the i^{#Y} factor)`.
    phases: Vec<(usize, Complex64)>,
}

impl StateOperator {
    pub fn new(a: &PauliSum) -> Self {
        let mut groups: Vec<FlipGroup> = Vec::new();
        let mut by_flip = std::collections::HashMap::new();
        for (s, c) in a.terms() {
            let (x, z) = s.state_masks();
            let coef = c * i_pow(s.y_count());
            let idx = *by_flip.entry(x).or_insert_with(|| {
                groups.push(FlipGroup {
                    flip: x,
                    phases: Vec::new(),
                });
                groups.len() - 1
            });
            groups[idx].phases.push((z, coef));
        }
        StateOperator {
            n_sites: a.n_sites(),
            groups,
        }
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_sites
    }

    /// `out += scale · A ψ`.
    pub fn apply_add(&self, psi: &[Complex64], out: &mut [Complex64], scale: Complex64) -> Result<()> {
        let dim = self.dim();
        if psi.len() != dim || out.len() != dim {
            return Err(Error::Structural(format!(
                "state of length {} (output {}) for operator of dimension {dim}",
                psi.len(),
                out.len()
            )));
        }
        let kernel = |offset: usize, chunk: &mut [Complex64]| {
            for (k, o) in chunk.iter_mut().enumerate() {
                let b = offset + k;
                let mut acc = Complex64::new(0.0, 0.0);
                for g in &self.groups {
                    let src = b ^ g.flip;
                    let mut amp = Complex64::new(0.0, 0.0);
                    for &(z, c) in &g.phases {
                        if (src & z).count_ones() & 1 == 1 {
                            amp -= c;
                        } else {
                            amp += c;
                        }
                    }
                    acc += amp * psi[src];
                }
                *o += acc * scale;
            }
        };
        if dim >= PARALLEL_DIM {
            let chunk = dim / rayon::current_num_threads().max(1).next_power_of_two().min(64);
            let chunk = chunk.max(64);
            out.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| kernel(i * chunk, c));
        } else {
            kernel(0, out);
        }
        Ok(())
    }

    pub fn apply(&self, psi: &[Complex64]) -> Result<StateVector> {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply_add(psi, &mut out, Complex64::new(1.0, 0.0))?;
        Ok(out)
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, psi: &[Complex64]) -> Result<Complex64> {
        let a_psi = self.apply(psi)?;
        Ok(inner(psi, &a_psi))
    }
}

/// Matrix-free `A ψ`.
pub fn apply(a: &PauliSum, psi: &[Complex64]) -> Result<StateVector> {
    StateOperator::new(a).apply(psi)
}

/// `⟨a|b⟩`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Computational basis state `|b⟩` on `n_sites` sites.
pub fn basis_state(n_sites: usize, b: usize) -> StateVector {
    let mut v = vec![Complex64::new(0.0, 0.0); 1usize << n_sites];
    v[b] = Complex64::new(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::PauliString;

    fn sum(n: usize, terms: &[(&str, f64)]) -> PauliSum {
        PauliSum::from_real(n, terms.iter().map(|(s, c)| (s.parse::<PauliString>().unwrap(), *c))).unwrap()
    }

    #[test]
    fn sigma_z_matrix_and_spectrum() {
        let z = to_matrix(&sum(1, &[("Z", 1.0)])).unwrap();
        assert_eq!(z.matrix()[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(z.matrix()[(1, 1)], Complex64::new(-1.0, 0.0));
        let spec = diagonalize(&z).unwrap();
        assert_eq!(spec.values.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn sigma_y_matrix() {
        let y = to_matrix(&sum(1, &[("Y", 1.0)])).unwrap();
        assert_eq!(y.matrix()[(0, 1)], Complex64::new(0.0, -1.0));
        assert_eq!(y.matrix()[(1, 0)], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn identity_spectrum() {
        let id = to_matrix(&sum(3, &[("III", 1.0)])).unwrap();
        let spec = diagonalize(&id).unwrap();
        assert!(spec.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn dense_guard() {
        let big = PauliSum::zero(MAX_DENSE_SITES + 1);
        assert!(matches!(to_matrix(&big), Err(Error::Capacity(_))));
    }

    #[test]
    fn x_on_first_site_flips_msb() {
        let x1 = sum(2, &[("XI", 1.0)]);
        let out = apply(&x1, &basis_state(2, 0)).unwrap();
        assert_eq!(out, basis_state(2, 0b10));
    }

    #[test]
    fn empty_sum_gives_zero_vector() {
        let out = apply(&PauliSum::zero(2), &basis_state(2, 3)).unwrap();
        assert!(out.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn apply_dimension_mismatch() {
        let x1 = sum(2, &[("XI", 1.0)]);
        assert!(matches!(apply(&x1, &basis_state(3, 0)), Err(Error::Structural(_))));
    }
}
