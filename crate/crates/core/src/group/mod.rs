//! Finitely generated groups with exact normal forms.
//!
//! Every built-in group stores its elements as a short vector of integers
//! (the canonical form), so that equality and hashing are exact. Words are
//! sequences of indices into the group's symmetric generating set.

pub mod algebra;
pub mod bfs;
pub mod conj;
pub mod finite;
pub mod growth;
pub mod quotient;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub use algebra::{algebra_trace, pushforward, trace_stabilization, Coeff, GroupAlgebraElement, StabilizationReport};
pub use bfs::{
    ball_count, class_ball_count, class_sphere_counts, class_sphere_counts_within, sphere_sizes, sphere_sizes_within,
    word_length, CayleySpheres, WordLength, DEFAULT_BFS_BUDGET,
};
pub use conj::{ClassMembership, ConjClass};
pub use finite::FiniteGroup;
pub use growth::{estimate_growth_rate, group_constants, sigma_constants, ConstantsOptions, GrowthConstants, GrowthFit, Sigmas};
pub use quotient::{
    distinguishes, first_violator, injective_radius, is_conjugate_in_quotient, parse_levels, separation_rate,
    FiniteQuotient, InjectiveRadius, QuotientClass, QuotientTower, SeparationReport, SeparationRow, DEFAULT_QUOTIENT_BUDGET,
};

/// Canonical normal form of a group element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Element(pub SmallVec<[i64; 4]>);

impl Element {
    pub fn from_slice(v: &[i64]) -> Self {
        Element(SmallVec::from_slice(v))
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// A word over the symmetric generating set, as generator indices.
pub type Word = Vec<usize>;

#[derive(Clone, Debug)]
pub struct Generator {
    pub name: String,
    /// Index of the inverse generator in the same list.
    pub inverse: usize,
    pub element: Element,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    /// Z^d with the standard generators.
    FreeAbelian(usize),
    /// Free group of the given rank, elements as freely reduced words
    /// (letter `±(i+1)` for generator `i`).
    Free(usize),
    /// Z/k.
    Cyclic(u64),
    /// Integer Heisenberg group, `(a, b, c)` for `[[1,a,c],[0,1,b],[0,0,1]]`.
    Heisenberg,
    /// SL2(Z) as integer matrices `[a, b, c, d]`, generated by
    /// `x = [[0,-1],[1,0]]` and `y = [[0,-1],[1,1]]`.
    Sl2z,
}

/// A finitely generated group with a symmetric generating set.
#[derive(Clone, Debug)]
pub struct FinGenGroup {
    kind: GroupKind,
    name: String,
    generators: Vec<Generator>,
}

/// A group element together with a word that evaluates to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupElement {
    pub word: Word,
    pub canonical: Element,
}

const MAX_Z_RANK: usize = 4;

impl FinGenGroup {
    pub fn free_abelian(rank: usize) -> Result<Arc<Self>> {
        if rank == 0 || rank > MAX_Z_RANK {
            return Err(Error::invalid(format!("Z^d needs 1 <= d <= {MAX_Z_RANK}, got {rank}")));
        }
        let mut generators = Vec::with_capacity(2 * rank);
        for i in 0..rank {
            let mut plus = SmallVec::from_elem(0, rank);
            plus[i] = 1;
            let mut minus = SmallVec::from_elem(0, rank);
            minus[i] = -1;
            generators.push(Generator { name: format!("e{}", i + 1), inverse: 2 * i + 1, element: Element(plus) });
            generators.push(Generator { name: format!("e{}^-1", i + 1), inverse: 2 * i, element: Element(minus) });
        }
        let name = if rank == 1 { "Z".to_string() } else { format!("Z^{rank}") };
        Ok(Arc::new(FinGenGroup { kind: GroupKind::FreeAbelian(rank), name, generators }))
    }

    pub fn free(rank: usize) -> Result<Arc<Self>> {
        if rank == 0 || rank > 26 {
            return Err(Error::invalid(format!("free group rank must be in 1..=26, got {rank}")));
        }
        let mut generators = Vec::with_capacity(2 * rank);
        for i in 0..rank {
            let letter = (b'a' + i as u8) as char;
            let l = i as i64 + 1;
            generators.push(Generator { name: letter.to_string(), inverse: 2 * i + 1, element: Element::from_slice(&[l]) });
            generators.push(Generator { name: format!("{letter}^-1"), inverse: 2 * i, element: Element::from_slice(&[-l]) });
        }
        Ok(Arc::new(FinGenGroup { kind: GroupKind::Free(rank), name: format!("F{rank}"), generators }))
    }

    pub fn cyclic(order: u64) -> Result<Arc<Self>> {
        if order == 0 {
            return Err(Error::invalid("cyclic group order must be positive"));
        }
        let k = order as i64;
        let generators = vec![
            Generator { name: "g".into(), inverse: 1, element: Element::from_slice(&[1 % k]) },
            Generator { name: "g^-1".into(), inverse: 0, element: Element::from_slice(&[(k - 1) % k]) },
        ];
        Ok(Arc::new(FinGenGroup { kind: GroupKind::Cyclic(order), name: format!("C{order}"), generators }))
    }

    pub fn heisenberg() -> Arc<Self> {
        let generators = vec![
            Generator { name: "X".into(), inverse: 1, element: Element::from_slice(&[1, 0, 0]) },
            Generator { name: "X^-1".into(), inverse: 0, element: Element::from_slice(&[-1, 0, 0]) },
            Generator { name: "Y".into(), inverse: 3, element: Element::from_slice(&[0, 1, 0]) },
            Generator { name: "Y^-1".into(), inverse: 2, element: Element::from_slice(&[0, -1, 0]) },
        ];
        Arc::new(FinGenGroup { kind: GroupKind::Heisenberg, name: "H3".into(), generators })
    }

    pub fn sl2z() -> Arc<Self> {
        let generators = vec![
            Generator { name: "x".into(), inverse: 1, element: Element::from_slice(&[0, -1, 1, 0]) },
            Generator { name: "x^-1".into(), inverse: 0, element: Element::from_slice(&[0, 1, -1, 0]) },
            Generator { name: "y".into(), inverse: 3, element: Element::from_slice(&[0, -1, 1, 1]) },
            Generator { name: "y^-1".into(), inverse: 2, element: Element::from_slice(&[1, 1, -1, 0]) },
        ];
        Arc::new(FinGenGroup { kind: GroupKind::Sl2z, name: "SL2(Z)".into(), generators })
    }

    /// Parses `z`, `z:d`, `z2`, `f2`, `free:r`, `cyclic:k`, `heisenberg`, `sl2z`.
    pub fn parse(spec: &str) -> Result<Arc<Self>> {
        let s = spec.trim().to_ascii_lowercase();
        let num = |t: &str| -> Result<u64> {
            t.parse::<u64>().map_err(|_| Error::parse(format!("bad number {t:?} in group spec {spec:?}")))
        };
        match s.as_str() {
            "z" => Self::free_abelian(1),
            "heisenberg" | "h3" => Ok(Self::heisenberg()),
            "sl2z" => Ok(Self::sl2z()),
            _ => {
                if let Some(rest) = s.strip_prefix("z:") {
                    Self::free_abelian(num(rest)? as usize)
                } else if let Some(rest) = s.strip_prefix("free:") {
                    Self::free(num(rest)? as usize)
                } else if let Some(rest) = s.strip_prefix("cyclic:") {
                    Self::cyclic(num(rest)?)
                } else if let Some(rest) = s.strip_prefix('f') {
                    Self::free(num(rest)? as usize)
                } else if let Some(rest) = s.strip_prefix('z') {
                    Self::free_abelian(num(rest)? as usize)
                } else if let Some(rest) = s.strip_prefix('c') {
                    Self::cyclic(num(rest)?)
                } else {
                    Err(Error::parse(format!("unknown group spec {spec:?}")))
                }
            }
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn generator(&self, i: usize) -> &Element {
        &self.generators[i].element
    }

    pub fn identity(&self) -> Element {
        match self.kind {
            GroupKind::FreeAbelian(d) => Element(SmallVec::from_elem(0, d)),
            GroupKind::Free(_) => Element(SmallVec::new()),
            GroupKind::Cyclic(_) => Element::from_slice(&[0]),
            GroupKind::Heisenberg => Element::from_slice(&[0, 0, 0]),
            GroupKind::Sl2z => Element::from_slice(&[1, 0, 0, 1]),
        }
    }

    pub fn is_identity(&self, g: &Element) -> bool {
        *g == self.identity()
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        let (a, b) = (a.as_slice(), b.as_slice());
        match self.kind {
            GroupKind::FreeAbelian(_) => Element(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            GroupKind::Free(_) => {
                let mut out: SmallVec<[i64; 4]> = SmallVec::from_slice(a);
                for &l in b {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Element(out)
            }
            GroupKind::Cyclic(k) => Element::from_slice(&[(a[0] + b[0]).rem_euclid(k as i64)]),
            GroupKind::Heisenberg => Element::from_slice(&[a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]]),
            GroupKind::Sl2z => Element::from_slice(&mat_mul(a, b)),
        }
    }

    pub fn invert(&self, g: &Element) -> Element {
        let a = g.as_slice();
        match self.kind {
            GroupKind::FreeAbelian(_) => Element(a.iter().map(|x| -x).collect()),
            GroupKind::Free(_) => Element(a.iter().rev().map(|x| -x).collect()),
            GroupKind::Cyclic(k) => Element::from_slice(&[(-a[0]).rem_euclid(k as i64)]),
            GroupKind::Heisenberg => Element::from_slice(&[-a[0], -a[1], -a[2] + a[0] * a[1]]),
            GroupKind::Sl2z => Element::from_slice(&[a[3], -a[1], -a[2], a[0]]),
        }
    }

    pub fn conjugate(&self, h: &Element, g: &Element) -> Element {
        self.multiply(&self.multiply(h, g), &self.invert(h))
    }

    pub fn power(&self, g: &Element, n: i64) -> Element {
        let base = if n < 0 { self.invert(g) } else { g.clone() };
        let mut out = self.identity();
        for _ in 0..n.unsigned_abs() {
            out = self.multiply(&out, &base);
        }
        out
    }

    pub fn evaluate(&self, word: &[usize]) -> Element {
        word.iter()
            .fold(self.identity(), |acc, &i| self.multiply(&acc, &self.generators[i].element))
    }

    pub fn element(&self, word: Word) -> GroupElement {
        let canonical = self.evaluate(&word);
        GroupElement { word, canonical }
    }

    /// Some word (not necessarily geodesic) evaluating to `g`.
    pub fn word_of(&self, g: &Element) -> Word {
        let a = g.as_slice();
        let word = match self.kind {
            GroupKind::FreeAbelian(_) => {
                let mut w = Vec::new();
                for (i, &c) in a.iter().enumerate() {
                    let gen = if c >= 0 { 2 * i } else { 2 * i + 1 };
                    w.extend(std::iter::repeat(gen).take(c.unsigned_abs() as usize));
                }
                w
            }
            GroupKind::Free(_) => a
                .iter()
                .map(|&l| {
                    let i = (l.unsigned_abs() - 1) as usize;
                    if l > 0 { 2 * i } else { 2 * i + 1 }
                })
                .collect(),
            GroupKind::Cyclic(_) => vec![0; a[0] as usize],
            GroupKind::Heisenberg => {
                // X^a Y^b [X,Y]^(c - ab); [X,Y] is central.
                let (x, y) = (a[0], a[1]);
                let k = a[2] - x * y;
                let mut w = Vec::new();
                w.extend(std::iter::repeat(if x >= 0 { 0 } else { 1 }).take(x.unsigned_abs() as usize));
                w.extend(std::iter::repeat(if y >= 0 { 2 } else { 3 }).take(y.unsigned_abs() as usize));
                let comm: [usize; 4] = if k >= 0 { [0, 2, 1, 3] } else { [2, 0, 3, 1] };
                for _ in 0..k.unsigned_abs() {
                    w.extend_from_slice(&comm);
                }
                w
            }
            GroupKind::Sl2z => sl2z_word(a),
        };
        self.free_reduce(word)
    }

    /// Cancels adjacent generator/inverse pairs.
    pub fn free_reduce(&self, word: Word) -> Word {
        let mut out: Word = Vec::with_capacity(word.len());
        for g in word {
            if out.last().is_some_and(|&h| self.generators[h].inverse == g) {
                out.pop();
            } else {
                out.push(g);
            }
        }
        out
    }

    pub fn invert_word(&self, word: &[usize]) -> Word {
        word.iter().rev().map(|&g| self.generators[g].inverse).collect()
    }

    /// Integer matrix representative, where the group has one.
    pub fn matrix_rep(&self, g: &Element) -> Option<Vec<Vec<i64>>> {
        let a = g.as_slice();
        match self.kind {
            GroupKind::Sl2z => Some(vec![vec![a[0], a[1]], vec![a[2], a[3]]]),
            GroupKind::Heisenberg => Some(vec![vec![1, a[0], a[2]], vec![0, 1, a[1]], vec![0, 0, 1]]),
            GroupKind::FreeAbelian(_) | GroupKind::Free(_) | GroupKind::Cyclic(_) => None,
        }
    }

    /// Order of `g` if finite.
    pub fn element_order(&self, g: &Element) -> Option<u64> {
        if self.is_identity(g) {
            return Some(1);
        }
        match self.kind {
            GroupKind::FreeAbelian(_) | GroupKind::Free(_) | GroupKind::Heisenberg => None,
            GroupKind::Cyclic(k) => Some(k / gcd(k, g.0[0] as u64)),
            GroupKind::Sl2z => {
                let a = g.as_slice();
                match a[0] + a[3] {
                    0 => Some(4),
                    1 => Some(6),
                    -1 => Some(3),
                    -2 if a[1] == 0 && a[2] == 0 => Some(2),
                    _ => None,
                }
            }
        }
    }

    /// Parses a word such as `x y^-1 x^2` or `a*b*a^-1*b^-1`.
    ///
    /// Tokens are generator names optionally followed by `^k`; `e` (or an
    /// empty string) is the identity.
    pub fn parse_word(&self, s: &str) -> Result<GroupElement> {
        let mut word = Vec::new();
        for tok in s.split(|c: char| c.is_whitespace() || c == '*' || c == '.').filter(|t| !t.is_empty()) {
            if tok == "e" || tok == "1" {
                continue;
            }
            let (base, exp) = match tok.split_once('^') {
                Some((b, e)) => {
                    let e: i64 = e.parse().map_err(|_| Error::parse(format!("bad exponent in {tok:?}")))?;
                    (b, e)
                }
                None => (tok, 1),
            };
            let idx = self
                .generators
                .iter()
                .position(|g| g.name == base)
                .ok_or_else(|| Error::parse(format!("unknown generator {base:?} for {}", self.name)))?;
            let gen = if exp >= 0 { idx } else { self.generators[idx].inverse };
            word.extend(std::iter::repeat(gen).take(exp.unsigned_abs() as usize));
        }
        Ok(self.element(word))
    }

    /// The abelianization character `psi: SL2(Z) -> Z/12` with
    /// `psi(x) = 3`, `psi(y) = 2`.
    pub fn sl2z_psi(&self, g: &Element) -> Result<u64> {
        if self.kind != GroupKind::Sl2z {
            return Err(Error::Unsupported(format!("psi is defined on SL2(Z), not {}", self.name)));
        }
        Ok(psi_of_word(&self.word_of(g)))
    }
}

/// Generator values of psi in the order `x, x^-1, y, y^-1`.
pub(crate) const PSI_GEN: [u64; 4] = [3, 9, 2, 10];

pub(crate) fn psi_of_word(word: &[usize]) -> u64 {
    word.iter().map(|&i| PSI_GEN[i]).sum::<u64>() % 12
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn mat_mul(a: &[i64], b: &[i64]) -> [i64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

// Word indices for SL2(Z).
const X: usize = 0;
const XI: usize = 1;
const Y: usize = 2;
const YI: usize = 3;

/// Euclidean decomposition with `S = x` and `T = x^-1 y = [[1,1],[0,1]]`.
fn sl2z_word(m: &[i64]) -> Word {
    let (mut a, mut b, mut c, mut d) = (m[0], m[1], m[2], m[3]);
    // Words to prepend, in order: m = W_1 W_2 ... W_k * rest.
    let mut prefix: Word = Vec::new();
    while c != 0 {
        let q = a / c;
        if q != 0 {
            // m <- T^-q m, so the prefix gains T^q.
            a -= q * c;
            b -= q * d;
            let t: [usize; 2] = if q > 0 { [XI, Y] } else { [YI, X] };
            for _ in 0..q.unsigned_abs() {
                prefix.extend_from_slice(&t);
            }
        }
        // m <- S^-1 m = [[c, d], [-a, -b]], so the prefix gains S.
        let (na, nb, nc, nd) = (c, d, -a, -b);
        a = na;
        b = nb;
        c = nc;
        d = nd;
        prefix.push(X);
    }
    // rest = [[a, b], [0, d]] with a = d = +-1.
    if a == -1 {
        // -T^(-b) = x^2 T^(-b)
        prefix.extend_from_slice(&[X, X]);
        b = -b;
    }
    let _ = d;
    let t: [usize; 2] = if b > 0 { [XI, Y] } else { [YI, X] };
    for _ in 0..b.unsigned_abs() {
        prefix.extend_from_slice(&t);
    }
    prefix
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sl2z_generators_match_matrices() {
        let g = FinGenGroup::sl2z();
        let x = g.generator(0);
        let y = g.generator(2);
        assert_eq!(g.power(x, 4), g.identity());
        assert_eq!(g.power(x, 2), g.power(y, 3));
        assert_eq!(g.multiply(y, g.generator(3)), g.identity());
        assert_eq!(g.matrix_rep(y).unwrap(), vec![vec![0, -1], vec![1, 1]]);
    }

    #[test]
    fn word_of_roundtrips_for_each_group() {
        let groups = [
            FinGenGroup::free_abelian(3).unwrap(),
            FinGenGroup::free(2).unwrap(),
            FinGenGroup::cyclic(7).unwrap(),
            FinGenGroup::heisenberg(),
            FinGenGroup::sl2z(),
        ];
        for g in groups {
            let mut frontier = vec![g.identity()];
            for _ in 0..5 {
                let mut next = Vec::new();
                for e in &frontier {
                    for gen in g.generators() {
                        next.push(g.multiply(e, &gen.element));
                    }
                }
                frontier = next;
            }
            for e in frontier.iter().step_by(7) {
                assert_eq!(&g.evaluate(&g.word_of(e)), e, "{} {}", g.name(), e);
            }
        }
    }

    #[test]
    fn sl2z_word_of_large_matrix() {
        let g = FinGenGroup::sl2z();
        let m = Element::from_slice(&[13, 8, 21, 13]);
        assert_eq!(g.evaluate(&g.word_of(&m)), m);
        let m = Element::from_slice(&[-1, 7, 0, -1]);
        assert_eq!(g.evaluate(&g.word_of(&m)), m);
    }

    #[test]
    fn psi_table() {
        let g = FinGenGroup::sl2z();
        let x = g.generator(0).clone();
        let y = g.generator(2).clone();
        let psi = |e: &Element| g.sl2z_psi(e).unwrap();
        assert_eq!(psi(&g.identity()), 0);
        assert_eq!(psi(&x), 3);
        assert_eq!(psi(&g.power(&x, 2)), 6);
        assert_eq!(psi(&g.power(&y, 3)), 6);
        assert_eq!(psi(&g.power(&x, 3)), 9);
        assert_eq!(psi(&y), 2);
        assert_eq!(psi(&g.power(&y, 2)), 4);
        assert_eq!(psi(&g.power(&y, 4)), 8);
        assert_eq!(psi(&g.power(&y, 5)), 10);
    }

    #[test]
    fn parse_specs_and_words() {
        assert_eq!(FinGenGroup::parse("z2").unwrap().kind(), GroupKind::FreeAbelian(2));
        assert_eq!(FinGenGroup::parse("z:3").unwrap().kind(), GroupKind::FreeAbelian(3));
        assert_eq!(FinGenGroup::parse("f2").unwrap().kind(), GroupKind::Free(2));
        assert_eq!(FinGenGroup::parse("cyclic:5").unwrap().kind(), GroupKind::Cyclic(5));
        assert!(FinGenGroup::parse("q8").is_err());
        assert!(FinGenGroup::parse("z:9").is_err());
        let f2 = FinGenGroup::free(2).unwrap();
        let c = f2.parse_word("a b a^-1 b^-1").unwrap();
        assert_eq!(c.canonical.as_slice(), &[1, 2, -1, -2]);
        assert!(f2.parse_word("q").is_err());
    }

    #[test]
    fn finite_orders_in_sl2z() {
        let g = FinGenGroup::sl2z();
        assert_eq!(g.element_order(g.generator(0)), Some(4));
        assert_eq!(g.element_order(g.generator(2)), Some(6));
        let xy = g.multiply(g.generator(0), g.generator(2));
        assert_eq!(g.element_order(&xy), None);
    }
}
