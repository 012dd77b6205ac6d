//! Explicit finite target groups for quotient maps.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::Element;

/// A finite group with elements stored as residue vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiniteGroup {
    /// `Z/m_1 x ... x Z/m_k`.
    Abelian(Vec<u64>),
    /// `SL2(Z/N)` as `[a, b, c, d]` residues.
    Sl2Mod(u64),
    /// Heisenberg group over `Z/N`, `(a, b, c)` residues.
    HeisenbergMod(u64),
    /// Direct product; element vectors are concatenated.
    Product(Vec<FiniteGroup>),
}

impl FiniteGroup {
    pub fn cyclic(m: u64) -> Self {
        FiniteGroup::Abelian(vec![m])
    }

    /// Length of the residue vector of an element.
    pub fn arity(&self) -> usize {
        match self {
            FiniteGroup::Abelian(ms) => ms.len(),
            FiniteGroup::Sl2Mod(_) => 4,
            FiniteGroup::HeisenbergMod(_) => 3,
            FiniteGroup::Product(parts) => parts.iter().map(|p| p.arity()).sum(),
        }
    }

    pub fn identity(&self) -> Element {
        match self {
            FiniteGroup::Abelian(ms) => Element(SmallVec::from_elem(0, ms.len())),
            FiniteGroup::Sl2Mod(n) => Element::from_slice(&[1 % *n as i64, 0, 0, 1 % *n as i64]),
            FiniteGroup::HeisenbergMod(_) => Element::from_slice(&[0, 0, 0]),
            FiniteGroup::Product(parts) => Element(parts.iter().flat_map(|p| p.identity().0).collect()),
        }
    }

    /// Reduces an integer vector into canonical residues.
    pub fn reduce(&self, v: &[i64]) -> Element {
        match self {
            FiniteGroup::Abelian(ms) => Element(v.iter().zip(ms).map(|(x, m)| x.rem_euclid(*m as i64)).collect()),
            FiniteGroup::Sl2Mod(n) | FiniteGroup::HeisenbergMod(n) => {
                Element(v.iter().map(|x| x.rem_euclid(*n as i64)).collect())
            }
            FiniteGroup::Product(parts) => self.zip_parts(parts, v, |p, a| p.reduce(a)),
        }
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        match self {
            FiniteGroup::Abelian(ms) => Element(
                a.0.iter()
                    .zip(&b.0)
                    .zip(ms)
                    .map(|((x, y), m)| (x + y).rem_euclid(*m as i64))
                    .collect(),
            ),
            FiniteGroup::Sl2Mod(n) => {
                let (a, b, n) = (a.as_slice(), b.as_slice(), *n as i64);
                Element::from_slice(&[
                    (a[0] * b[0] + a[1] * b[2]).rem_euclid(n),
                    (a[0] * b[1] + a[1] * b[3]).rem_euclid(n),
                    (a[2] * b[0] + a[3] * b[2]).rem_euclid(n),
                    (a[2] * b[1] + a[3] * b[3]).rem_euclid(n),
                ])
            }
            FiniteGroup::HeisenbergMod(n) => {
                let (a, b, n) = (a.as_slice(), b.as_slice(), *n as i64);
                Element::from_slice(&[
                    (a[0] + b[0]).rem_euclid(n),
                    (a[1] + b[1]).rem_euclid(n),
                    (a[2] + b[2] + a[0] * b[1]).rem_euclid(n),
                ])
            }
            FiniteGroup::Product(parts) => {
                let mut out = SmallVec::new();
                let mut off = 0;
                for p in parts {
                    let k = p.arity();
                    let x = Element::from_slice(&a.0[off..off + k]);
                    let y = Element::from_slice(&b.0[off..off + k]);
                    out.extend(p.multiply(&x, &y).0);
                    off += k;
                }
                Element(out)
            }
        }
    }

    pub fn invert(&self, a: &Element) -> Element {
        match self {
            FiniteGroup::Abelian(ms) => {
                Element(a.0.iter().zip(ms).map(|(x, m)| (-x).rem_euclid(*m as i64)).collect())
            }
            FiniteGroup::Sl2Mod(n) => {
                let (a, n) = (a.as_slice(), *n as i64);
                Element::from_slice(&[a[3], (-a[1]).rem_euclid(n), (-a[2]).rem_euclid(n), a[0]])
            }
            FiniteGroup::HeisenbergMod(n) => {
                let (a, n) = (a.as_slice(), *n as i64);
                Element::from_slice(&[
                    (-a[0]).rem_euclid(n),
                    (-a[1]).rem_euclid(n),
                    (-a[2] + a[0] * a[1]).rem_euclid(n),
                ])
            }
            FiniteGroup::Product(parts) => self.zip_parts(parts, a.as_slice(), |p, x| p.invert(&Element::from_slice(x))),
        }
    }

    pub fn conjugate(&self, h: &Element, g: &Element) -> Element {
        self.multiply(&self.multiply(h, g), &self.invert(h))
    }

    /// Number of elements of the whole target group.
    pub fn full_order(&self) -> u64 {
        match self {
            FiniteGroup::Abelian(ms) => ms.iter().product(),
            FiniteGroup::Sl2Mod(n) => {
                // N^3 * prod_{p | N} (1 - p^-2)
                let mut order = n.pow(3);
                for p in prime_divisors(*n) {
                    order = order / (p * p) * (p * p - 1);
                }
                order
            }
            FiniteGroup::HeisenbergMod(n) => n.pow(3),
            FiniteGroup::Product(parts) => parts.iter().map(|p| p.full_order()).product(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FiniteGroup::Abelian(ms) => ms.iter().map(|m| format!("Z/{m}")).collect::<Vec<_>>().join(" x "),
            FiniteGroup::Sl2Mod(n) => format!("SL2(Z/{n})"),
            FiniteGroup::HeisenbergMod(n) => format!("H3(Z/{n})"),
            FiniteGroup::Product(parts) => parts.iter().map(|p| p.label()).collect::<Vec<_>>().join(" x "),
        }
    }

    fn zip_parts(&self, parts: &[FiniteGroup], v: &[i64], f: impl Fn(&FiniteGroup, &[i64]) -> Element) -> Element {
        let mut out = SmallVec::new();
        let mut off = 0;
        for p in parts {
            let k = p.arity();
            out.extend(f(p, &v[off..off + k]).0);
            off += k;
        }
        Element(out)
    }
}

fn prime_divisors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sl2_orders() {
        assert_eq!(FiniteGroup::Sl2Mod(5).full_order(), 120);
        assert_eq!(FiniteGroup::Sl2Mod(2).full_order(), 6);
        assert_eq!(FiniteGroup::Sl2Mod(16).full_order(), 3072);
        assert_eq!(FiniteGroup::Sl2Mod(15).full_order(), 24 * 120);
    }

    #[test]
    fn product_inverse() {
        let g = FiniteGroup::Product(vec![FiniteGroup::Sl2Mod(7), FiniteGroup::cyclic(12)]);
        let a = g.reduce(&[2, 3, 1, 2, 5]);
        assert_eq!(g.multiply(&a, &g.invert(&a)), g.identity());
        let h = FiniteGroup::HeisenbergMod(6);
        let b = h.reduce(&[4, 5, 1]);
        assert_eq!(h.multiply(&h.invert(&b), &b), h.identity());
    }
}
