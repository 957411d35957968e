//! Exact finite-dimensional Grassmann algebra with Berezin calculus.
//!
//! Each mode `m` of the underlying field contributes a conjugate pair of
//! anticommuting generators, stored at indices `2m` (the ψ-type variable)
//! and `2m + 1` (the ψ⁺-type variable). An algebra element is a complex
//! linear combination of generator subsets; every subset is kept in the one
//! canonical ascending order, and all signs are derived from transposition
//! counts against that single total order. Coefficient arithmetic is plain
//! `f64` with exact zero pruning, so integer-coefficient inputs stay exact.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::C64;

/// Hard bound on generator count: subsets are stored as `u16` bitmasks.
pub const MAX_GENERATORS: usize = 16;

/// A set of `n_modes` conjugate generator pairs.
///
/// Mode `m` owns the ψ-type generator `2m` and the ψ⁺-type generator
/// `2m + 1`; canonical order is ascending generator index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorSet {
    n_modes: usize,
}

/// Which of the two conjugate families a generator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Psi,
    PsiPlus,
}

impl GeneratorSet {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 || 2 * n_modes > MAX_GENERATORS {
            return Err(Error::config(format!(
                "generator set supports 1..={} modes, got {}",
                MAX_GENERATORS / 2,
                n_modes
            )));
        }
        Ok(GeneratorSet { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_generators(&self) -> usize {
        2 * self.n_modes
    }

    /// Number of basis monomials, `4^n_modes`.
    pub fn basis_len(&self) -> usize {
        1 << self.n_generators()
    }

    /// ψ-type generator index of a mode.
    pub fn psi(&self, mode: usize) -> usize {
        debug_assert!(mode < self.n_modes);
        2 * mode
    }

    /// ψ⁺-type generator index of a mode.
    pub fn psi_plus(&self, mode: usize) -> usize {
        debug_assert!(mode < self.n_modes);
        2 * mode + 1
    }

    pub fn sector(&self, gen: usize) -> Sector {
        if gen % 2 == 0 {
            Sector::Psi
        } else {
            Sector::PsiPlus
        }
    }

    pub fn contains(&self, gen: usize) -> bool {
        gen < self.n_generators()
    }
}

/// Parity of a homogeneous element (subset-size parity of its terms).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Sign factor σ: +1 for even, −1 for odd.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Side on which a Berezin derivative acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// An element of the Grassmann algebra: canonical-ordered subsets ↦ complex
/// coefficients, zero coefficients pruned exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannElement {
    gens: GeneratorSet,
    terms: BTreeMap<u16, C64>,
}

/// Parity of the permutation that merges two disjoint ascending subsets:
/// counts pairs (i ∈ a, j ∈ b) with i > j.
fn merge_sign(a: u16, b: u16) -> f64 {
    let mut swaps = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign for extracting generator `gen` from the front of canonical term
/// `mask`: (−1)^{number of generators before it}.
pub(crate) fn front_sign(mask: u16, gen: usize) -> f64 {
    let before = (mask & ((1u16 << gen) - 1)).count_ones();
    if before % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign for extracting generator `gen` from the back of canonical term
/// `mask`: (−1)^{number of generators after it}.
pub(crate) fn back_sign(mask: u16, gen: usize) -> f64 {
    let after = (mask >> (gen + 1)).count_ones();
    if after % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl GrassmannElement {
    pub fn zero(gens: GeneratorSet) -> Self {
        GrassmannElement {
            gens,
            terms: BTreeMap::new(),
        }
    }

    /// The scalar 1 (empty monomial).
    pub fn one(gens: GeneratorSet) -> Self {
        Self::scalar(gens, C64::new(1.0, 0.0))
    }

    pub fn scalar(gens: GeneratorSet, c: C64) -> Self {
        let mut e = Self::zero(gens);
        e.add_term(0, c);
        e
    }

    /// A single generator.
    pub fn generator(gens: GeneratorSet, gen: usize) -> Result<Self> {
        if !gens.contains(gen) {
            return Err(Error::config(format!("generator index {gen} out of range")));
        }
        let mut e = Self::zero(gens);
        e.add_term(1u16 << gen, C64::new(1.0, 0.0));
        Ok(e)
    }

    /// Product of generators in the order listed; repeated indices give zero.
    pub fn monomial(gens: GeneratorSet, indices: &[usize]) -> Result<Self> {
        let mut acc = Self::one(gens);
        for &g in indices {
            acc = acc.product(&Self::generator(gens, g)?)?;
        }
        Ok(acc)
    }

    pub fn generator_set(&self) -> GeneratorSet {
        self.gens
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of a canonical basis monomial.
    pub fn coefficient(&self, mask: u16) -> C64 {
        self.terms.get(&mask).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// Coefficient of the empty monomial.
    pub fn scalar_part(&self) -> C64 {
        self.coefficient(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u16, C64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    fn add_term(&mut self, mask: u16, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(mask) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == C64::new(0.0, 0.0) {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// Subset-size parity, if all terms agree on it.
    pub fn parity(&self) -> Option<Parity> {
        let mut parity = None;
        for &mask in self.terms.keys() {
            let p = if mask.count_ones() % 2 == 0 {
                Parity::Even
            } else {
                Parity::Odd
            };
            match parity {
                None => parity = Some(p),
                Some(q) if q != p => return None,
                Some(_) => {}
            }
        }
        parity.or(Some(Parity::Even))
    }

    fn check_same_set(&self, other: &Self) -> Result<()> {
        if self.gens != other.gens {
            return Err(Error::config(format!(
                "generator set mismatch: {} vs {} modes",
                self.gens.n_modes(),
                other.gens.n_modes()
            )));
        }
        Ok(())
    }

    /// Bilinear associative product with g_i g_j = −g_j g_i, g_i² = 0.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_same_set(other)?;
        let mut out = Self::zero(self.gens);
        for (&ma, &ca) in &self.terms {
            for (&mb, &cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let sign = merge_sign(ma, mb);
                out.add_term(ma | mb, ca * cb * sign);
            }
        }
        Ok(out)
    }

    /// Berezin derivative with respect to one generator.
    ///
    /// The left derivative anticommutes the generator to the front of each
    /// term before removing it (sign = (−1)^{#generators preceding it}); the
    /// right derivative is the mirror image. Terms lacking the generator map
    /// to zero.
    pub fn derivative(&self, gen: usize, side: Side) -> Result<Self> {
        if !self.gens.contains(gen) {
            return Err(Error::config(format!("generator index {gen} out of range")));
        }
        let bit = 1u16 << gen;
        let mut out = Self::zero(self.gens);
        for (&mask, &c) in &self.terms {
            if mask & bit == 0 {
                continue;
            }
            let sign = match side {
                Side::Left => front_sign(mask, gen),
                Side::Right => back_sign(mask, gen),
            };
            out.add_term(mask & !bit, c * sign);
        }
        Ok(out)
    }

    /// Iterated Berezin integral over the listed generators, applied
    /// left-to-right (∫dg g = 1, ∫dg 1 = 0).
    ///
    /// A single integration removes its generator from the back of each term
    /// with sign (−1)^{#generators after it} and annihilates terms that do
    /// not contain it — so ∫dg₁⁺dg₁ (g₁g₁⁺) = 1.
    pub fn integrate(&self, gens: &[usize]) -> Result<Self> {
        let mut seen = 0u16;
        for &g in gens {
            if !self.gens.contains(g) {
                return Err(Error::config(format!("generator index {g} out of range")));
            }
            let bit = 1u16 << g;
            if seen & bit != 0 {
                return Err(Error::config(format!(
                    "repeated generator {g} in integration list"
                )));
            }
            seen |= bit;
        }
        let mut acc = self.clone();
        for &g in gens {
            acc = acc.derivative(g, Side::Right)?;
        }
        Ok(acc)
    }

    /// Full phase-space integral over every generator (descending index
    /// order); the result is the coefficient of the top monomial up to the
    /// fixed order convention, returned as a complex scalar.
    pub fn integrate_all(&self) -> C64 {
        let order: Vec<usize> = (0..self.gens.n_generators()).rev().collect();
        self.integrate(&order)
            .expect("full integration list is valid by construction")
            .scalar_part()
    }

    /// Dense coefficient vector of length `4^n_modes`, indexed by mask.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.gens.basis_len()];
        for (&mask, &c) in &self.terms {
            v[mask as usize] = c;
        }
        v
    }

    pub fn from_dense(gens: GeneratorSet, v: &[C64]) -> Result<Self> {
        if v.len() != gens.basis_len() {
            return Err(Error::config(format!(
                "coefficient vector length {} does not match basis size {}",
                v.len(),
                gens.basis_len()
            )));
        }
        let mut e = Self::zero(gens);
        for (mask, &c) in v.iter().enumerate() {
            e.add_term(mask as u16, c);
        }
        Ok(e)
    }
}

impl Add for GrassmannElement {
    type Output = GrassmannElement;
    fn add(self, rhs: GrassmannElement) -> GrassmannElement {
        assert_eq!(self.gens, rhs.gens, "generator set mismatch in +");
        let mut out = self;
        for (&mask, &c) in &rhs.terms {
            out.add_term(mask, c);
        }
        out
    }
}

impl Sub for GrassmannElement {
    type Output = GrassmannElement;
    fn sub(self, rhs: GrassmannElement) -> GrassmannElement {
        self + (-rhs)
    }
}

impl Neg for GrassmannElement {
    type Output = GrassmannElement;
    fn neg(self) -> GrassmannElement {
        let gens = self.gens;
        let terms = self.terms.into_iter().map(|(m, c)| (m, -c)).collect();
        GrassmannElement { gens, terms }
    }
}

impl Mul for GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: GrassmannElement) -> GrassmannElement {
        self.product(&rhs).expect("generator set mismatch in *")
    }
}

impl Mul<C64> for GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: C64) -> GrassmannElement {
        let gens = self.gens;
        let mut out = GrassmannElement::zero(gens);
        for (&mask, &c) in &self.terms {
            out.add_term(mask, c * rhs);
        }
        out
    }
}

impl Mul<f64> for GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: f64) -> GrassmannElement {
        self * C64::new(rhs, 0.0)
    }
}
