//! Pauli strings and their complex linear combinations.
//!
//! A string on `L` sites is stored as two bitmasks: bit `i` of `x` is set for
//! X or Y on site `i` (0-based), bit `i` of `z` for Z or Y. Every algebraic
//! operation below works on the masks directly and never touches matrices.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest chain the bitmask representation can hold.
pub const MAX_SITES: usize = 64;

/// Relative prune threshold applied after every commutator.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-14;

const I_POW: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// `i^k` for `k` taken mod 4.
#[inline]
pub(crate) fn i_pow(k: u32) -> Complex64 {
    I_POW[(k & 3) as usize]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' | '0' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A tensor product of single-site Pauli matrices on a fixed number of sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    x: u64,
    z: u64,
    n_sites: u8,
}

impl PauliString {
    pub fn identity(n_sites: usize) -> Self {
        assert!(
            (1..=MAX_SITES).contains(&n_sites),
            "site count {n_sites} outside 1..={MAX_SITES}"
        );
        PauliString {
            x: 0,
            z: 0,
            n_sites: n_sites as u8,
        }
    }

    /// Single-site operator `p` on `site` (0-based), identity elsewhere.
    pub fn single(n_sites: usize, site: usize, p: Pauli) -> Self {
        Self::identity(n_sites).with(site, p)
    }

    /// Replaces the letter on `site`.
    pub fn with(mut self, site: usize, p: Pauli) -> Self {
        assert!(site < self.n_sites(), "site {site} out of range");
        let bit = 1u64 << site;
        let (xb, zb) = p.bits();
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
        self
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        letters
            .iter()
            .enumerate()
            .fold(Self::identity(letters.len()), |s, (i, &p)| s.with(i, p))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites as usize
    }

    pub fn get(&self, site: usize) -> Pauli {
        Pauli::from_bits((self.x >> site) & 1 == 1, (self.z >> site) & 1 == 1)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_sites()).map(|i| self.get(i)).collect()
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Sites carrying a non-identity letter, as a bitmask.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    /// Number of Y letters.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Product `self * other` as `(i^k, string)`, without a length check.
    #[inline]
    pub(crate) fn mul_raw(&self, other: &Self) -> (u32, PauliString) {
        let (ax, az, bx, bz) = (self.x, self.z, other.x, other.z);
        let a_x = ax & !az;
        let a_y = ax & az;
        let a_z = !ax & az;
        let b_x = bx & !bz;
        let b_y = bx & bz;
        let b_z = !bx & bz;
        // XY = iZ, YZ = iX, ZX = iY and the reversed orders carry -i.
        let plus = (a_x & b_y).count_ones() + (a_y & b_z).count_ones() + (a_z & b_x).count_ones();
        let minus = (a_y & b_x).count_ones() + (a_z & b_y).count_ones() + (a_x & b_z).count_ones();
        let k = (plus + 4 * MAX_SITES as u32 - minus) & 3;
        (
            k,
            PauliString {
                x: ax ^ bx,
                z: az ^ bz,
                n_sites: self.n_sites,
            },
        )
    }

    /// `self * other = phase * s` with `phase` in {±1, ±i}.
    pub fn multiply(&self, other: &Self) -> Result<(Complex64, PauliString)> {
        if self.n_sites != other.n_sites {
            return Err(Error::Structural(format!(
                "cannot multiply strings of length {} and {}",
                self.n_sites, other.n_sites
            )));
        }
        let (k, s) = self.mul_raw(other);
        Ok((i_pow(k), s))
    }

    /// Two strings commute iff they differ (non-trivially) on an even number of sites.
    #[inline]
    pub fn commutes_with(&self, other: &Self) -> bool {
        let sym = (self.x & other.z) ^ (self.z & other.x);
        sym.count_ones().is_multiple_of(2)
    }

    /// Lexicographic key over site letters (site 0 most significant, I<X<Y<Z).
    fn code(&self, site: usize) -> u8 {
        let xb = ((self.x >> site) & 1) as u8;
        let zb = ((self.z >> site) & 1) as u8;
        match (xb, zb) {
            (0, 0) => 0,
            (1, 0) => 1,
            (1, 1) => 2,
            _ => 3,
        }
    }

    /// Masks with the site order reversed so that site 0 is the most
    /// significant bit of a basis-state index.
    #[inline]
    pub(crate) fn state_masks(&self) -> (usize, usize) {
        let shift = 64 - self.n_sites as u32;
        (
            (self.x.reverse_bits() >> shift) as usize,
            (self.z.reverse_bits() >> shift) as usize,
        )
    }

    /// Spatial translation by `shift` sites with periodic wrap.
    pub fn translate(&self, shift: usize) -> Self {
        let n = self.n_sites() as u32;
        let s = (shift % self.n_sites()) as u32;
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let rot = |m: u64| {
            if s == 0 {
                m
            } else {
                ((m << s) | (m >> (n - s))) & mask
            }
        };
        PauliString {
            x: rot(self.x),
            z: rot(self.z),
            n_sites: self.n_sites,
        }
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.n_sites.cmp(&other.n_sites) {
            Ordering::Equal => {}
            o => return o,
        }
        let diff = (self.x ^ other.x) | (self.z ^ other.z);
        if diff == 0 {
            return Ordering::Equal;
        }
        let site = diff.trailing_zeros() as usize;
        self.code(site).cmp(&other.code(site))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n_sites() {
            write!(f, "{}", self.get(i).letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Option<Vec<Pauli>> = s.trim().chars().map(Pauli::from_letter).collect();
        let letters =
            letters.ok_or_else(|| Error::InvalidArgument(format!("bad Pauli string '{s}'")))?;
        if letters.is_empty() || letters.len() > MAX_SITES {
            return Err(Error::InvalidArgument(format!(
                "Pauli string '{s}' must have 1..={MAX_SITES} sites"
            )));
        }
        Ok(PauliString::from_letters(&letters))
    }
}

/// Sparse linear combination of Pauli strings, kept in canonical order with
/// no duplicate strings and no exact zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_sites: usize,
    terms: Vec<(PauliString, Complex64)>,
}

impl PauliSum {
    pub fn zero(n_sites: usize) -> Self {
        assert!((1..=MAX_SITES).contains(&n_sites));
        PauliSum {
            n_sites,
            terms: Vec::new(),
        }
    }

    /// Collects terms, merging repeated strings and dropping exact zeros.
    pub fn from_terms<I>(n_sites: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut acc: HashMap<PauliString, Complex64> = HashMap::new();
        for (s, c) in terms {
            if s.n_sites() != n_sites {
                return Err(Error::Structural(format!(
                    "string {s} has {} sites, sum has {n_sites}",
                    s.n_sites()
                )));
            }
            *acc.entry(s).or_default() += c;
        }
        Ok(Self::from_map(n_sites, acc))
    }

    /// Real-coefficient convenience constructor.
    pub fn from_real<I>(n_sites: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        Self::from_terms(
            n_sites,
            terms.into_iter().map(|(s, c)| (s, Complex64::new(c, 0.0))),
        )
    }

    fn from_map(n_sites: usize, acc: HashMap<PauliString, Complex64>) -> Self {
        let mut terms: Vec<_> = acc.into_iter().filter(|(_, c)| *c != Complex64::new(0.0, 0.0)).collect();
        terms.sort_unstable_by_key(|a| a.0);
        PauliSum { n_sites, terms }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order.
    pub fn terms(&self) -> &[(PauliString, Complex64)] {
        &self.terms
    }

    pub fn coefficient(&self, s: &PauliString) -> Complex64 {
        self.terms
            .binary_search_by(|(t, _)| t.cmp(s))
            .map(|i| self.terms[i].1)
            .unwrap_or_default()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        if factor == Complex64::new(0.0, 0.0) {
            return Self::zero(self.n_sites);
        }
        PauliSum {
            n_sites: self.n_sites,
            terms: self.terms.iter().map(|&(s, c)| (s, c * factor)).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `self + factor * other`, merged in canonical order.
    pub fn add_scaled(&self, other: &Self, factor: Complex64) -> Result<Self> {
        self.check_sites(other)?;
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b[j].0, b[j].1 * factor));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = a[i].1 + b[j].1 * factor;
                    if c != Complex64::new(0.0, 0.0) {
                        out.push((a[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(PauliSum {
            n_sites: self.n_sites,
            terms: out,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, Complex64::new(-1.0, 0.0))
    }

    /// Operator product `self * other`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_sites(other)?;
        let mut acc: HashMap<PauliString, Complex64> = HashMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (k, s) = a.mul_raw(b);
                *acc.entry(s).or_default() += i_pow(k) * ca * cb;
            }
        }
        Ok(Self::from_map(self.n_sites, acc))
    }

    /// Hermitian conjugate: every string is Hermitian, so only coefficients conjugate.
    pub fn adjoint(&self) -> Self {
        PauliSum {
            n_sites: self.n_sites,
            terms: self.terms.iter().map(|&(s, c)| (s, c.conj())).collect(),
        }
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    /// Sum of coefficient magnitudes, an upper bound on the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).sum()
    }

    /// Squared normalized Hilbert–Schmidt norm, `Tr[A†A] / 2^L`.
    pub fn norm_sqr(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm_sqr()).sum()
    }

    /// True when every coefficient is real up to `tol` times the largest magnitude.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs_coefficient();
        self.terms.iter().all(|(_, c)| c.im.abs() <= tol * scale)
    }

    /// Drops imaginary parts below the relative tolerance; fails otherwise.
    pub fn into_hermitian(self, tol: f64) -> Result<Self> {
        if !self.is_hermitian(tol) {
            return Err(Error::Consistency(
                "operator has non-negligible imaginary Pauli coefficients".into(),
            ));
        }
        let terms = self
            .terms
            .into_iter()
            .filter(|(_, c)| c.re != 0.0)
            .map(|(s, c)| (s, Complex64::new(c.re, 0.0)))
            .collect();
        Ok(PauliSum {
            n_sites: self.n_sites,
            terms,
        })
    }

    /// Text dump, one `<re> <im> <letters>` line per term in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, c) in &self.terms {
            out.push_str(&format!("{:.17e} {:.17e} {}\n", c.re, c.im, s));
        }
        out
    }

    pub fn from_text(n_sites: usize, text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidArgument(format!("line {}: expected '<re> <im> <letters>'", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let re: f64 = fields[0].parse().map_err(|_| bad())?;
            let im: f64 = fields[1].parse().map_err(|_| bad())?;
            let s: PauliString = fields[2].parse()?;
            terms.push((s, Complex64::new(re, im)));
        }
        Self::from_terms(n_sites, terms)
    }

    fn check_sites(&self, other: &Self) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(Error::Structural(format!(
                "site counts differ: {} vs {}",
                self.n_sites, other.n_sites
            )));
        }
        Ok(())
    }

    pub(crate) fn from_sorted_unchecked(n_sites: usize, terms: Vec<(PauliString, Complex64)>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        PauliSum { n_sites, terms }
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (s, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i) {}", c.re, c.im, s)?;
        }
        Ok(())
    }
}

/// Result of [`prune`]: the kept operator and the squared HS weight removed.
#[derive(Clone, Debug)]
pub struct Pruned {
    pub sum: PauliSum,
    pub dropped_weight: f64,
    pub dropped_terms: usize,
}

/// Removes terms with `|c| < tol * max|c|`.
pub fn prune(a: &PauliSum, tol: f64) -> Pruned {
    assert!(tol >= 0.0, "prune tolerance must be non-negative");
    let cutoff = tol * a.max_abs_coefficient();
    let mut dropped_weight = 0.0;
    let mut dropped_terms = 0;
    let terms = a
        .terms
        .iter()
        .filter(|(_, c)| {
            let keep = c.norm() >= cutoff;
            if !keep {
                dropped_weight += c.norm_sqr();
                dropped_terms += 1;
            }
            keep
        })
        .copied()
        .collect();
    Pruned {
        sum: PauliSum::from_sorted_unchecked(a.n_sites, terms),
        dropped_weight,
        dropped_terms,
    }
}

/// Normalized Hilbert–Schmidt product `Tr[A†B] / 2^L`.
///
/// Pauli strings are orthonormal under this product, so it reduces to a
/// merge over the two sorted term lists.
pub fn hs_inner(a: &PauliSum, b: &PauliSum) -> Complex64 {
    assert_eq!(a.n_sites, b.n_sites, "hs_inner on different site counts");
    let (ta, tb) = (&a.terms, &b.terms);
    let (mut i, mut j) = (0, 0);
    let mut acc = Complex64::new(0.0, 0.0);
    while i < ta.len() && j < tb.len() {
        match ta[i].0.cmp(&tb[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += ta[i].1.conj() * tb[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Terms per chunk when splitting commutator work across threads.
const COMMUTATOR_CHUNK: usize = 256;

fn commutator_partial(
    a: &[(PauliString, Complex64)],
    b: &[(PauliString, Complex64)],
) -> HashMap<PauliString, Complex64> {
    let mut acc: HashMap<PauliString, Complex64> = HashMap::with_capacity(a.len() * 4);
    for (sa, ca) in a {
        for (sb, cb) in b {
            if sa.commutes_with(sb) {
                continue;
            }
            // Anticommuting strings: [a, b] = 2ab.
            let (k, s) = sa.mul_raw(sb);
            *acc.entry(s).or_default() += i_pow(k) * (ca * cb * 2.0);
        }
    }
    acc
}

/// `[A, B]` followed by a relative prune at `tol`.
pub fn commutator_with_tol(a: &PauliSum, b: &PauliSum, tol: f64) -> Result<PauliSum> {
    a.check_sites(b)?;
    use rayon::prelude::*;
    let raw = if a.len() > COMMUTATOR_CHUNK && a.len() * b.len() > 1 << 16 {
        // Partial maps are merged in chunk order so the floating-point sums
        // do not depend on thread scheduling.
        let partials: Vec<_> = a
            .terms
            .par_chunks(COMMUTATOR_CHUNK)
            .map(|chunk| {
                let mut v: Vec<_> = commutator_partial(chunk, &b.terms).into_iter().collect();
                v.sort_unstable_by_key(|x| x.0);
                v
            })
            .collect();
        let mut merged = PauliSum::zero(a.n_sites);
        for p in partials {
            let part = PauliSum::from_sorted_unchecked(a.n_sites, p);
            merged = merged.add(&part)?;
        }
        merged
    } else {
        PauliSum::from_map(a.n_sites, commutator_partial(&a.terms, &b.terms))
    };
    Ok(if tol > 0.0 { prune(&raw, tol).sum } else { raw })
}

/// `[A, B] = AB - BA`, pruned at the default relative threshold.
pub fn commutator(a: &PauliSum, b: &PauliSum) -> Result<PauliSum> {
    commutator_with_tol(a, b, DEFAULT_PRUNE_TOL)
}

/// The sequence `C_0 = dH`, `C_{j+1} = [H, C_j]`.
#[derive(Clone, Debug)]
pub struct NestedTower {
    levels: Vec<PauliSum>,
}

impl NestedTower {
    /// `C_j` for `0 <= j <= depth`.
    pub fn level(&self, j: usize) -> &PauliSum {
        &self.levels[j]
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// `C_1 .. C_depth`.
    pub fn commutators(&self) -> &[PauliSum] {
        &self.levels[1..]
    }

    pub fn term_counts(&self) -> Vec<usize> {
        self.levels.iter().map(PauliSum::len).collect()
    }
}

pub fn nested_tower(h: &PauliSum, dh: &PauliSum, depth: usize) -> Result<NestedTower> {
    nested_tower_with_tol(h, dh, depth, DEFAULT_PRUNE_TOL)
}

pub fn nested_tower_with_tol(
    h: &PauliSum,
    dh: &PauliSum,
    depth: usize,
    tol: f64,
) -> Result<NestedTower> {
    if depth == 0 {
        return Err(Error::InvalidArgument("tower depth must be at least 1".into()));
    }
    h.check_sites(dh)?;
    let mut levels = Vec::with_capacity(depth + 1);
    levels.push(dh.clone());
    for j in 0..depth {
        let next = commutator_with_tol(h, &levels[j], tol)?;
        levels.push(next);
    }
    Ok(NestedTower { levels })
}
