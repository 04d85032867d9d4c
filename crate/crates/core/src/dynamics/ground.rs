//! Lowest eigenpairs of Pauli-sum Hamiltonians.
//!
//! Small spaces use a dense eigensolve. Larger ones use Lanczos with full
//! reorthogonalization from a fixed pseudo-random start vector, so repeated
//! runs are bit-identical.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::operator::{diagonalize, inner, norm, to_matrix, PauliSum, StateOperator, StateVector, MAX_DENSE_SITES};

/// Above this dimension the Krylov path is used.
pub const DENSE_GROUND_DIM: usize = 256;

const LANCZOS_SEED: u64 = 0x5eed_1a2c;
const LANCZOS_MAX_ITER: usize = 400;
const LANCZOS_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GroundPair {
    pub energy: f64,
    /// Second-lowest eigenvalue, counted with multiplicity on the dense path.
    pub first_excited: f64,
    pub state: StateVector,
}

impl GroundPair {
    pub fn gap(&self) -> f64 {
        self.first_excited - self.energy
    }
}

pub fn ground_pair(h: &PauliSum) -> Result<GroundPair> {
    let n = h.n_sites();
    if n > MAX_DENSE_SITES {
        return Err(Error::Capacity(format!("{n} sites exceeds the {MAX_DENSE_SITES}-site limit")));
    }
    let dim = 1usize << n;
    if dim <= DENSE_GROUND_DIM {
        let spec = diagonalize(&to_matrix(h)?)?;
        Ok(GroundPair {
            energy: spec.values[0],
            first_excited: if dim > 1 { spec.values[1] } else { f64::INFINITY },
            state: spec.ground_state(),
        })
    } else {
        lanczos(&StateOperator::new(h), dim)
    }
}

fn lanczos(op: &StateOperator, dim: usize) -> Result<GroundPair> {
    let mut rng = StdRng::seed_from_u64(LANCZOS_SEED);
    let mut v: StateVector = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|c| *c /= nv);

    let mut basis: Vec<StateVector> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let max_iter = LANCZOS_MAX_ITER.min(dim);
    let mut last: Option<(f64, f64, Vec<f64>)> = None;

    for it in 0..max_iter {
        let q = &basis[it];
        let mut w = op.apply(q)?;
        let a = inner(q, &w).re;
        alphas.push(a);
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm(&w);
        let m = alphas.len();
        let scale = alphas.iter().chain(&betas).fold(1.0f64, |s, x| s.max(x.abs()));
        let exhausted = beta <= LANCZOS_TOL * scale || it + 1 == max_iter;
        if !m.is_multiple_of(8) && !exhausted {
            betas.push(beta);
            w.iter_mut().for_each(|c| *c /= beta);
            basis.push(w);
            continue;
        }

        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j || j + 1 == i {
                betas[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let e0 = eig.eigenvalues[order[0]];
        let e1 = order.get(1).map(|&k| eig.eigenvalues[k]).unwrap_or(f64::INFINITY);
        let y: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
        let residual = beta * y[m - 1].abs();
        let second_residual = order
            .get(1)
            .map(|&k| beta * eig.eigenvectors[(m - 1, k)].abs())
            .unwrap_or(0.0);
        last = Some((e0, e1, y));
        let converged = residual <= LANCZOS_TOL * scale && second_residual <= 1e-9 * scale;
        if converged || exhausted {
            if !converged && beta > LANCZOS_TOL * scale {
                return Err(Error::Convergence(format!(
                    "Lanczos ground state residual {residual:.3e} after {m} iterations"
                )));
            }
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|c| *c /= beta);
        basis.push(w);
    }

    let (energy, first_excited, y) = last.expect("at least one Lanczos step");
    let mut state = vec![Complex64::new(0.0, 0.0); dim];
    for (coef, b) in y.iter().zip(&basis) {
        state.iter_mut().zip(b).for_each(|(s, x)| *s += x * *coef);
    }
    let ns = norm(&state);
    state.iter_mut().for_each(|c| *c /= ns);
    Ok(GroundPair {
        energy,
        first_excited,
        state,
    })
}
