use num_complex::Complex64;
use proptest::prelude::*;

use super::*;

const LETTERS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

fn string(n: usize) -> impl Strategy<Value = PauliString> {
    prop::collection::vec(0..4usize, n).prop_map(|v| PauliString::from_letters(&v.iter().map(|&i| LETTERS[i]).collect::<Vec<_>>()))
}

fn real_sum(n: usize) -> impl Strategy<Value = PauliSum> {
    prop::collection::vec((string(n), -2.0..2.0f64), 1..6)
        .prop_map(move |t| PauliSum::from_real(n, t).unwrap())
}

fn complex_sum(n: usize) -> impl Strategy<Value = PauliSum> {
    prop::collection::vec((string(n), -2.0..2.0f64, -2.0..2.0f64), 1..6)
        .prop_map(move |t| PauliSum::from_terms(n, t.into_iter().map(|(s, a, b)| (s, Complex64::new(a, b)))).unwrap())
}

fn triple_product_agrees(a: &PauliString, b: &PauliString, c: &PauliString) -> bool {
    let (p1, ab) = a.multiply(b).unwrap();
    let (p2, left) = ab.multiply(c).unwrap();
    let (q1, bc) = b.multiply(c).unwrap();
    let (q2, right) = a.multiply(&bc).unwrap();
    left == right && (p1 * p2 - q1 * q2).norm() < 1e-15
}

#[test]
fn multiplication_is_associative_exhaustively() {
    for n in 1..=2usize {
        let all: Vec<PauliString> = (0..4usize.pow(n as u32))
            .map(|code| {
                let letters: Vec<Pauli> = (0..n).map(|i| LETTERS[(code >> (2 * i)) & 3]).collect();
                PauliString::from_letters(&letters)
            })
            .collect();
        for a in &all {
            for b in &all {
                for c in &all {
                    assert!(triple_product_agrees(a, b, c), "{a} {b} {c}");
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn multiplication_is_associative((a, b, c) in (1..=6usize).prop_flat_map(|n| (string(n), string(n), string(n)))) {
        prop_assert!(triple_product_agrees(&a, &b, &c));
    }

    #[test]
    fn hs_inner_matches_trace((a, b) in (1..=5usize).prop_flat_map(|n| (complex_sum(n), complex_sum(n)))) {
        let ma = to_matrix(&a).unwrap();
        let mb = to_matrix(&b).unwrap();
        let dim = (1usize << a.n_sites()) as f64;
        let want = (ma.matrix().adjoint() * mb.matrix()).trace() / dim;
        prop_assert!((hs_inner(&a, &b) - want).norm() < 1e-12);
    }

    #[test]
    fn i_commutator_of_hermitians_is_hermitian((a, b) in (1..=5usize).prop_flat_map(|n| (real_sum(n), real_sum(n)))) {
        let c = commutator(&a, &b).unwrap().scale(Complex64::new(0.0, 1.0));
        prop_assert!(c.terms().iter().all(|(_, z)| z.im.abs() < 1e-12));
    }

    #[test]
    fn tower_alternates_between_imaginary_and_real((h, dh) in (1..=4usize).prop_flat_map(|n| (real_sum(n), real_sum(n)))) {
        let tower = nested_tower(&h, &dh, 4).unwrap();
        for j in 0..=4 {
            for (_, z) in tower.level(j).terms() {
                let off = if j % 2 == 1 { z.re } else { z.im };
                prop_assert!(off.abs() <= 1e-12 * (1.0 + z.norm()), "level {} coefficient {}", j, z);
            }
        }
    }

    #[test]
    fn apply_matches_dense_matvec(a in (1..=4usize).prop_flat_map(complex_sum)) {
        let n = a.n_sites();
        let m = to_matrix(&a).unwrap();
        for b in 0..1usize << n {
            let got = apply(&a, &basis_state(n, b)).unwrap();
            for (r, g) in got.iter().enumerate() {
                prop_assert!((g - m.matrix()[(r, b)]).norm() < 1e-12);
            }
        }
    }
}
