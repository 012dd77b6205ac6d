//! Conjugacy classes of the parent group and membership tests.

use std::sync::Arc;

use super::{gcd, psi_of_word, Element, FinGenGroup, GroupKind};
use crate::error::{Error, Result};

/// Anything that can answer "is `g` in this set?" for parent-group elements.
pub trait ClassMembership: Sync {
    fn contains(&self, g: &Element) -> bool;
}

/// The conjugacy class of an element of a finitely generated group.
#[derive(Clone, Debug)]
pub struct ConjClass {
    group: Arc<FinGenGroup>,
    representative: Element,
    rule: Rule,
}

#[derive(Clone, Debug)]
enum Rule {
    Singleton,
    /// Cyclically reduced representative of a free-group class.
    FreeCyclic(Vec<i64>),
    /// Heisenberg class `{(a, b, c') : c' = c mod gcd(a, b)}` with `gcd > 0`.
    HeisenbergCentral { a: i64, b: i64, c: i64, modulus: i64 },
    /// Finite-order class in SL2(Z) other than `+-I`: same order and psi.
    Sl2zFiniteOrder { order: u64, psi: u64 },
}

impl ConjClass {
    /// Builds the class of `representative`.
    ///
    /// In SL2(Z) only finite-order representatives are supported, since
    /// their classes are determined by order and the abelianization.
    pub fn new(group: Arc<FinGenGroup>, representative: Element) -> Result<Self> {
        let rule = match group.kind() {
            GroupKind::FreeAbelian(_) | GroupKind::Cyclic(_) => Rule::Singleton,
            GroupKind::Free(_) => Rule::FreeCyclic(cyclic_reduce(representative.as_slice())),
            GroupKind::Heisenberg => {
                let r = representative.as_slice();
                let modulus = gcd(r[0].unsigned_abs(), r[1].unsigned_abs()) as i64;
                if modulus == 0 {
                    Rule::Singleton
                } else {
                    Rule::HeisenbergCentral { a: r[0], b: r[1], c: r[2].rem_euclid(modulus), modulus }
                }
            }
            GroupKind::Sl2z => match group.element_order(&representative) {
                Some(1) | Some(2) => Rule::Singleton,
                Some(order) => Rule::Sl2zFiniteOrder { order, psi: psi_of_word(&group.word_of(&representative)) },
                None => {
                    return Err(Error::Unsupported(format!(
                        "conjugacy test in SL2(Z) is implemented for finite-order elements only; {representative} has infinite order"
                    )))
                }
            },
        };
        Ok(ConjClass { group, representative, rule })
    }

    /// Parses the representative as a word in the group's generators.
    pub fn parse(group: Arc<FinGenGroup>, word: &str) -> Result<Self> {
        let rep = group.parse_word(word)?.canonical;
        Self::new(group, rep)
    }

    pub fn group(&self) -> &Arc<FinGenGroup> {
        &self.group
    }

    pub fn representative(&self) -> &Element {
        &self.representative
    }

    pub fn is_identity_class(&self) -> bool {
        self.group.is_identity(&self.representative)
    }

    /// Whether the class is known to be a single element.
    pub fn is_singleton(&self) -> bool {
        matches!(self.rule, Rule::Singleton)
    }

    pub fn member(&self, g: &Element) -> bool {
        match &self.rule {
            Rule::Singleton => *g == self.representative,
            Rule::FreeCyclic(rep) => {
                let w = cyclic_reduce(g.as_slice());
                w.len() == rep.len() && is_rotation(&w, rep)
            }
            Rule::HeisenbergCentral { a, b, c, modulus } => {
                let s = g.as_slice();
                s[0] == *a && s[1] == *b && s[2].rem_euclid(*modulus) == *c
            }
            Rule::Sl2zFiniteOrder { order, psi } => {
                self.group.element_order(g) == Some(*order) && psi_of_word(&self.group.word_of(g)) == *psi
            }
        }
    }
}

impl ClassMembership for ConjClass {
    fn contains(&self, g: &Element) -> bool {
        self.member(g)
    }
}

/// Strips matching first/last letters `l ... l^-1` from a reduced word.
fn cyclic_reduce(w: &[i64]) -> Vec<i64> {
    let (mut i, mut j) = (0, w.len());
    while j >= i + 2 && w[i] == -w[j - 1] {
        i += 1;
        j -= 1;
    }
    w[i..j].to_vec()
}

fn is_rotation(a: &[i64], b: &[i64]) -> bool {
    if a.is_empty() {
        return b.is_empty();
    }
    (0..a.len()).any(|k| a[k..].iter().chain(&a[..k]).eq(b.iter()))
}
