//! Finitely supported group-algebra elements with exact coefficients.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use num_complex::Complex;
use num_rational::Rational64;
use num_traits::Zero;

use super::conj::{ClassMembership, ConjClass};
use super::quotient::{FiniteQuotient, QuotientTower};
use super::Element;
use crate::error::Result;

/// Exact complex-rational coefficient.
pub type Coeff = Complex<Rational64>;

/// A finite formal sum `sum a_g g` with nonzero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupAlgebraElement {
    coeffs: BTreeMap<Element, Coeff>,
}

impl GroupAlgebraElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn delta(g: Element) -> Self {
        Self::from_terms([(g, Coeff::new(1.into(), 0.into()))])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Element, Coeff)>) -> Self {
        let mut f = Self::zero();
        for (g, a) in terms {
            f.add_term(g, a);
        }
        f
    }

    pub fn add_term(&mut self, g: Element, a: Coeff) {
        let sum = self.coeff(&g) + a;
        if sum.is_zero() {
            self.coeffs.remove(&g);
        } else {
            self.coeffs.insert(g, sum);
        }
    }

    pub fn coeff(&self, g: &Element) -> Coeff {
        self.coeffs.get(g).copied().unwrap_or_else(Coeff::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = &Element> {
        self.coeffs.keys()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Element, &Coeff)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Sum of all coefficients.
    pub fn augmentation(&self) -> Coeff {
        self.coeffs.values().fold(Coeff::zero(), |acc, a| acc + a)
    }

    pub fn scale(&self, s: Coeff) -> Self {
        Self::from_terms(self.coeffs.iter().map(|(g, a)| (g.clone(), a * s)))
    }
}

impl Add for &GroupAlgebraElement {
    type Output = GroupAlgebraElement;

    fn add(self, rhs: &GroupAlgebraElement) -> GroupAlgebraElement {
        let mut out = self.clone();
        for (g, a) in &rhs.coeffs {
            out.add_term(g.clone(), *a);
        }
        out
    }
}

impl Mul<Coeff> for &GroupAlgebraElement {
    type Output = GroupAlgebraElement;

    fn mul(self, s: Coeff) -> GroupAlgebraElement {
        self.scale(s)
    }
}

/// `tr_<alpha>(f)`: the sum of the coefficients of `f` over the class.
pub fn algebra_trace(f: &GroupAlgebraElement, class: &dyn ClassMembership) -> Coeff {
    f.coeffs
        .iter()
        .filter(|(g, _)| class.contains(g))
        .fold(Coeff::zero(), |acc, (_, a)| acc + a)
}

/// Image of `f` in the group algebra of the finite quotient.
pub fn pushforward(f: &GroupAlgebraElement, q: &FiniteQuotient) -> GroupAlgebraElement {
    GroupAlgebraElement::from_terms(f.coeffs.iter().map(|(g, a)| (q.pi(g), *a)))
}

/// Pushed traces `tr_<pi_i(alpha)>(pi_i(f))` along a tower, compared with
/// `tr_<alpha>(f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizationReport {
    pub reference: Coeff,
    pub pushed: Vec<Coeff>,
    /// First index from which every pushed trace equals the reference.
    pub index: Option<usize>,
}

pub fn trace_stabilization(f: &GroupAlgebraElement, tower: &QuotientTower, class: &ConjClass) -> Result<StabilizationReport> {
    let reference = algebra_trace(f, class);
    let mut pushed = Vec::with_capacity(tower.len());
    for q in &tower.quotients {
        let qclass = q.class(class.representative())?;
        let image = pushforward(f, q);
        let tr = image
            .terms()
            .filter(|(u, _)| qclass.contains_image(u))
            .fold(Coeff::zero(), |acc, (_, a)| acc + a);
        pushed.push(tr);
    }
    let index = match pushed.iter().rposition(|p| *p != reference) {
        None => Some(0),
        Some(last_bad) if last_bad + 1 < pushed.len() => Some(last_bad + 1),
        Some(_) => None,
    };
    Ok(StabilizationReport { reference, pushed, index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FinGenGroup;
    use std::collections::HashSet;

    fn c(re: i64) -> Coeff {
        Coeff::new(re.into(), 0.into())
    }

    #[test]
    fn traces_of_simple_elements() {
        let f2 = FinGenGroup::free(2).unwrap();
        let gamma = f2.parse_word("a b").unwrap().canonical;
        let alpha = f2.parse_word("b a").unwrap().canonical;
        let f = GroupAlgebraElement::from_terms([(f2.identity(), c(2)), (gamma, c(3))]);
        let ca = ConjClass::new(f2.clone(), alpha).unwrap();
        let ce = ConjClass::new(f2.clone(), f2.identity()).unwrap();
        assert_eq!(algebra_trace(&f, &ca), c(3));
        assert_eq!(algebra_trace(&f, &ce), c(2));
        let other = ConjClass::new(f2.clone(), f2.parse_word("a^2").unwrap().canonical).unwrap();
        assert_eq!(algebra_trace(&f, &other), c(0));
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let g = Element::from_slice(&[3]);
        let mut f = GroupAlgebraElement::delta(g.clone());
        f.add_term(g, c(-1));
        assert!(f.is_empty());
    }

    #[test]
    fn z_tower_stabilizes() {
        let z = FinGenGroup::free_abelian(1).unwrap();
        let f = GroupAlgebraElement::delta(Element::from_slice(&[5]));
        let class = ConjClass::new(z.clone(), z.identity()).unwrap();
        let tower = QuotientTower::parse(z, "tower:iZ:2..12").unwrap();
        let rep = trace_stabilization(&f, &tower, &class).unwrap();
        assert_eq!(rep.reference, c(0));
        // Modulus 5 is the last one with 5 = 0; from 6 onwards the trace is 0.
        assert_eq!(rep.index, Some(4));
    }

    #[test]
    fn pushforward_is_linear_and_class_sums_recover_augmentation() {
        let sl = FinGenGroup::sl2z();
        let q = FiniteQuotient::congruence(sl.clone(), 3).unwrap();
        let f = GroupAlgebraElement::from_terms([
            (sl.generator(0).clone(), c(2)),
            (sl.generator(2).clone(), Coeff::new(1.into(), Rational64::new(1, 3))),
            (sl.power(sl.generator(2), 2), c(-5)),
        ]);
        let g = GroupAlgebraElement::from_terms([(sl.generator(1).clone(), c(7)), (sl.generator(0).clone(), c(1))]);
        assert_eq!(pushforward(&(&f + &g), &q), &pushforward(&f, &q) + &pushforward(&g, &q));
        let pf = pushforward(&f, &q);
        let mut seen: HashSet<Element> = HashSet::new();
        let mut total = Coeff::zero();
        for u in pf.support() {
            if seen.contains(u) {
                continue;
            }
            let class = q.class_of_image(u).unwrap();
            seen.extend(class.iter().cloned());
            total += pf.terms().filter(|(v, _)| class.contains(*v)).fold(Coeff::zero(), |a, (_, b)| a + b);
        }
        assert_eq!(total, f.augmentation());
    }
}
