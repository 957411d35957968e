//! Linear operators on the phase-space distribution.
//!
//! The distribution lives in the 4ⁿ-dimensional coefficient space of the
//! Grassmann algebra; operators here act on that space. Every operator is
//! generated from four elementary actions on basis monomials (multiply by a
//! generator from the left or right, differentiate from the left or right),
//! each of which maps one monomial to at most one other, so compositions
//! stay extremely sparse and are stored column-wise.
//!
//! Mode operators acting on a density operator translate into these
//! elementary actions: annihilators and creators acting from the left
//! become a left multiplication and a left derivative on the ψ-type
//! generators; acting from the right they become a right derivative and a
//! right multiplication on the ψ⁺-type generators. Composing them along
//! each Hamiltonian term yields the evolution operator for the
//! distribution.

use crate::algebra::{back_sign, front_sign, GeneratorSet, GrassmannElement};
use crate::error::{Error, Result};
use crate::hamiltonian::ModeHamiltonian;
use crate::C64;

/// The four elementary monomial actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    /// Multiply by a generator on the left.
    MultLeft,
    /// Multiply by a generator on the right.
    MultRight,
    /// Left Berezin derivative.
    DerivLeft,
    /// Right Berezin derivative.
    DerivRight,
}

/// Apply one elementary action to a basis monomial; `None` annihilates it.
pub fn apply_elementary(kind: OpKind, gen: usize, mask: u16) -> Option<(u16, f64)> {
    let bit = 1u16 << gen;
    match kind {
        OpKind::MultLeft => {
            if mask & bit != 0 {
                None
            } else {
                Some((mask | bit, front_sign(mask, gen)))
            }
        }
        OpKind::MultRight => {
            if mask & bit != 0 {
                None
            } else {
                Some((mask | bit, back_sign(mask, gen)))
            }
        }
        OpKind::DerivLeft => {
            if mask & bit == 0 {
                None
            } else {
                Some((mask & !bit, front_sign(mask, gen)))
            }
        }
        OpKind::DerivRight => {
            if mask & bit == 0 {
                None
            } else {
                Some((mask & !bit, back_sign(mask, gen)))
            }
        }
    }
}

/// A composition of elementary actions, written left to right as in
/// operator notation (the rightmost factor acts first). Maps each monomial
/// to at most one monomial with a ± sign.
#[derive(Debug, Clone, PartialEq)]
pub struct OpString {
    pub factors: Vec<(OpKind, usize)>,
}

impl OpString {
    pub fn new(factors: Vec<(OpKind, usize)>) -> Self {
        OpString { factors }
    }

    /// Image of one basis monomial under the whole composition.
    pub fn entry(&self, col: u16) -> Option<(u16, f64)> {
        let mut mask = col;
        let mut sign = 1.0;
        for &(kind, gen) in self.factors.iter().rev() {
            let (next, s) = apply_elementary(kind, gen, mask)?;
            mask = next;
            sign *= s;
        }
        Some((mask, sign))
    }
}

/// General sparse operator on the coefficient space, stored column-wise.
#[derive(Debug, Clone)]
pub struct SparseSuperOp {
    gens: GeneratorSet,
    cols: Vec<Vec<(usize, C64)>>,
}

impl SparseSuperOp {
    pub fn zero(gens: GeneratorSet) -> Self {
        SparseSuperOp {
            gens,
            cols: vec![Vec::new(); gens.basis_len()],
        }
    }

    pub fn generator_set(&self) -> GeneratorSet {
        self.gens
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, C64)] {
        &self.cols[j]
    }

    pub fn n_entries(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    fn push(&mut self, row: usize, col: usize, value: C64) {
        if value == C64::new(0.0, 0.0) {
            return;
        }
        let entries = &mut self.cols[col];
        for e in entries.iter_mut() {
            if e.0 == row {
                e.1 += value;
                if e.1 == C64::new(0.0, 0.0) {
                    entries.retain(|x| x.1 != C64::new(0.0, 0.0));
                }
                return;
            }
        }
        entries.push((row, value));
    }

    /// Accumulate `factor` times an elementary-operator composition.
    pub fn add_string(&mut self, string: &OpString, factor: C64) {
        for col in 0..self.dim() {
            if let Some((row, sign)) = string.entry(col as u16) {
                self.push(row as usize, col, factor * sign);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &SparseSuperOp, factor: C64) {
        assert_eq!(self.gens, other.gens, "generator set mismatch");
        for col in 0..self.dim() {
            for &(row, v) in &other.cols[col] {
                self.push(row, col, factor * v);
            }
        }
    }

    /// Apply to a dense coefficient vector.
    pub fn apply_dense(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim(), "vector length mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (col, &x) in v.iter().enumerate() {
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for &(row, c) in &self.cols[col] {
                out[row] += c * x;
            }
        }
        out
    }

    pub fn apply(&self, e: &GrassmannElement) -> Result<GrassmannElement> {
        if e.generator_set() != self.gens {
            return Err(Error::config("generator set mismatch in operator application"));
        }
        let out = self.apply_dense(&e.to_dense());
        GrassmannElement::from_dense(self.gens, &out)
    }

    /// Frobenius norm of the operator matrix.
    pub fn frobenius(&self) -> f64 {
        self.cols
            .iter()
            .flat_map(|c| c.iter())
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Elementary-action string for a Hamiltonian term acting from the left on
/// the density operator: creators become left derivatives on ψ-type
/// generators, annihilators left multiplications.
fn left_action_string(creates: &[usize], annihilates: &[usize]) -> OpString {
    let mut factors = Vec::new();
    for &p in creates {
        factors.push((OpKind::DerivLeft, 2 * p));
    }
    for &s in annihilates {
        factors.push((OpKind::MultLeft, 2 * s));
    }
    OpString::new(factors)
}

/// Elementary-action string for the same term acting from the right:
/// annihilators become right derivatives on ψ⁺-type generators, creators
/// right multiplications, composed in reversed order because the factor
/// nearest the density operator acts first.
fn right_action_string(creates: &[usize], annihilates: &[usize]) -> OpString {
    let mut factors = Vec::new();
    for &s in annihilates.iter().rev() {
        factors.push((OpKind::DerivRight, 2 * s + 1));
    }
    for &p in creates.iter().rev() {
        factors.push((OpKind::MultRight, 2 * p + 1));
    }
    OpString::new(factors)
}

/// Evolution operator for the distribution: the phase-space image of
/// −(i/ħ)[Ĥ, ρ̂], built term by term from the Hamiltonian's mode operators.
pub fn liouvillian(h: &ModeHamiltonian) -> Result<SparseSuperOp> {
    let gens = GeneratorSet::new(h.n_modes)?;
    let mut left = SparseSuperOp::zero(gens);
    let mut right = SparseSuperOp::zero(gens);

    for p in 0..h.n_modes {
        for r in 0..h.n_modes {
            let w = h.one_body[[p, r]];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            left.add_string(&left_action_string(&[p], &[r]), w);
            right.add_string(&right_action_string(&[p], &[r]), w);
        }
    }
    for term in &h.quartic {
        let creates = [term.create.0, term.create.1];
        let annihilates = [term.annihilate.0, term.annihilate.1];
        left.add_string(&left_action_string(&creates, &annihilates), term.coeff);
        right.add_string(&right_action_string(&creates, &annihilates), term.coeff);
    }

    let mut out = SparseSuperOp::zero(gens);
    let scale = C64::new(0.0, -1.0 / h.hbar);
    out.add_scaled(&left, scale);
    out.add_scaled(&right, -scale);
    Ok(out)
}
