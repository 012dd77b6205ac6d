//! Finite quotients, towers of quotients, injective radii and separation.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::bfs::CayleySpheres;
use super::conj::{ClassMembership, ConjClass};
use super::finite::FiniteGroup;
use super::{Element, FinGenGroup, GroupKind, PSI_GEN};
use crate::error::{Error, Result};

/// Default cap on enumerated quotient elements.
pub const DEFAULT_QUOTIENT_BUDGET: usize = 1_000_000;

/// A homomorphism from a finitely generated group onto the subgroup of a
/// finite group generated by the images of the generators.
pub struct FiniteQuotient {
    parent: Arc<FinGenGroup>,
    target: FiniteGroup,
    images: Vec<Element>,
    label: String,
    budget: usize,
    image: OnceLock<Result<ImageTable>>,
    orbits: Mutex<HashMap<Element, Arc<HashSet<Element>>>>,
}

/// The image group, with each element's word length in the pushed-forward
/// generators.
struct ImageTable {
    distance: HashMap<Element, u32>,
}

impl std::fmt::Debug for FiniteQuotient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteQuotient")
            .field("parent", &self.parent.name())
            .field("target", &self.target)
            .field("label", &self.label)
            .finish()
    }
}

impl FiniteQuotient {
    /// Builds a quotient from the images of the generators. Images of
    /// inverse generators are checked against the target inverse.
    pub fn new(parent: Arc<FinGenGroup>, target: FiniteGroup, images: Vec<Element>, label: impl Into<String>) -> Result<Self> {
        if images.len() != parent.num_generators() {
            return Err(Error::invalid("one image per generator is required"));
        }
        for (i, gen) in parent.generators().iter().enumerate() {
            if target.multiply(&images[i], &images[gen.inverse]) != target.identity() {
                return Err(Error::invalid(format!("image of {} is not inverse to its partner", gen.name)));
            }
        }
        Ok(FiniteQuotient {
            parent,
            target,
            images,
            label: label.into(),
            budget: DEFAULT_QUOTIENT_BUDGET,
            image: OnceLock::new(),
            orbits: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// `Z^d -> (Z/m)^d` or `Z/k -> Z/m` for `m | k`.
    pub fn mod_reduction(parent: Arc<FinGenGroup>, m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("modulus must be positive"));
        }
        let d = match parent.kind() {
            GroupKind::FreeAbelian(d) => d,
            GroupKind::Cyclic(k) => {
                if k % m != 0 {
                    return Err(Error::invalid(format!("Z/{k} has no quotient Z/{m}")));
                }
                1
            }
            _ => return Err(Error::Unsupported(format!("coordinate reduction is not defined on {}", parent.name()))),
        };
        let target = FiniteGroup::Abelian(vec![m; d]);
        let images = parent.generators().iter().map(|g| target.reduce(g.element.as_slice())).collect();
        Self::new(parent, target, images, format!("mod {m}"))
    }

    /// Reduction `SL2(Z) -> SL2(Z/N)`.
    pub fn congruence(parent: Arc<FinGenGroup>, n: u64) -> Result<Self> {
        require(&parent, GroupKind::Sl2z)?;
        if n < 2 {
            return Err(Error::invalid("congruence level must be at least 2"));
        }
        let target = FiniteGroup::Sl2Mod(n);
        let images = parent.generators().iter().map(|g| target.reduce(g.element.as_slice())).collect();
        Self::new(parent, target, images, format!("congruence N={n}"))
    }

    /// The character `psi: SL2(Z) -> Z/12`, `x -> 3`, `y -> 2`.
    pub fn psi(parent: Arc<FinGenGroup>) -> Result<Self> {
        require(&parent, GroupKind::Sl2z)?;
        let images = PSI_GEN.iter().map(|&v| Element::from_slice(&[v as i64])).collect();
        Self::new(parent, FiniteGroup::cyclic(12), images, "psi")
    }

    /// `SL2(Z) -> SL2(Z/N) x Z/12`, whose kernel is the level-N principal
    /// congruence subgroup intersected with the kernel of `psi`.
    pub fn congruence_psi(parent: Arc<FinGenGroup>, n: u64) -> Result<Self> {
        require(&parent, GroupKind::Sl2z)?;
        if n < 2 {
            return Err(Error::invalid("congruence level must be at least 2"));
        }
        let sl = FiniteGroup::Sl2Mod(n);
        let target = FiniteGroup::Product(vec![sl.clone(), FiniteGroup::cyclic(12)]);
        let images = parent
            .generators()
            .iter()
            .zip(PSI_GEN)
            .map(|(g, p)| {
                let mut v = sl.reduce(g.element.as_slice()).0;
                v.push(p as i64);
                Element(v)
            })
            .collect();
        Self::new(parent, target, images, format!("congruence+psi N={n}"))
    }

    /// `F2 -> SL2(Z/N)` through the Sanov embedding
    /// `a -> [[1,2],[0,1]]`, `b -> [[1,0],[2,1]]`.
    pub fn sanov(parent: Arc<FinGenGroup>, n: u64) -> Result<Self> {
        require(&parent, GroupKind::Free(2))?;
        if n < 2 {
            return Err(Error::invalid("level must be at least 2"));
        }
        let target = FiniteGroup::Sl2Mod(n);
        let mats: [[i64; 4]; 4] = [[1, 2, 0, 1], [1, -2, 0, 1], [1, 0, 2, 1], [1, 0, -2, 1]];
        let images = mats.iter().map(|m| target.reduce(m)).collect();
        Self::new(parent, target, images, format!("sanov N={n}"))
    }

    /// Heisenberg group reduced mod N.
    pub fn heisenberg_mod(parent: Arc<FinGenGroup>, n: u64) -> Result<Self> {
        require(&parent, GroupKind::Heisenberg)?;
        if n < 2 {
            return Err(Error::invalid("modulus must be at least 2"));
        }
        let target = FiniteGroup::HeisenbergMod(n);
        let images = parent.generators().iter().map(|g| target.reduce(g.element.as_slice())).collect();
        Self::new(parent, target, images, format!("mod {n}"))
    }

    /// The identity map of a finite cyclic group, i.e. the quotient by the
    /// trivial subgroup.
    pub fn identity_quotient(parent: Arc<FinGenGroup>) -> Result<Self> {
        match parent.kind() {
            GroupKind::Cyclic(k) => {
                let q = Self::mod_reduction(parent, k)?;
                Ok(FiniteQuotient { label: "trivial subgroup".into(), ..q })
            }
            _ => Err(Error::Unsupported(format!("{} is infinite; it has no identity quotient", parent.name()))),
        }
    }

    pub fn parent(&self) -> &Arc<FinGenGroup> {
        &self.parent
    }

    pub fn target(&self) -> &FiniteGroup {
        &self.target
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Image of a word.
    pub fn pi_word(&self, word: &[usize]) -> Element {
        word.iter()
            .fold(self.target.identity(), |acc, &i| self.target.multiply(&acc, &self.images[i]))
    }

    /// Image of a parent element.
    pub fn pi(&self, g: &Element) -> Element {
        self.pi_word(&self.parent.word_of(g))
    }

    fn table(&self) -> Result<&ImageTable> {
        self.image
            .get_or_init(|| {
                let id = self.target.identity();
                let mut distance = HashMap::from([(id.clone(), 0u32)]);
                let mut queue = VecDeque::from([id]);
                while let Some(u) = queue.pop_front() {
                    let d = distance[&u];
                    for img in &self.images {
                        let w = self.target.multiply(&u, img);
                        if !distance.contains_key(&w) {
                            if distance.len() >= self.budget {
                                return Err(Error::Budget {
                                    what: format!("image of quotient {}", self.label),
                                    limit: self.budget,
                                    reached_radius: d,
                                });
                            }
                            distance.insert(w.clone(), d + 1);
                            queue.push_back(w);
                        }
                    }
                }
                Ok(ImageTable { distance })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Order of the image group.
    pub fn order(&self) -> Result<u64> {
        Ok(self.table()?.distance.len() as u64)
    }

    /// Word length of an image element in the pushed-forward generators.
    pub fn quotient_length(&self, u: &Element) -> Result<Option<u32>> {
        Ok(self.table()?.distance.get(u).copied())
    }

    /// Conjugacy class of `u` in the image group.
    pub fn class_of_image(&self, u: &Element) -> Result<Arc<HashSet<Element>>> {
        if let Some(c) = self.orbits.lock().unwrap().get(u) {
            return Ok(c.clone());
        }
        self.table()?;
        let mut orbit = HashSet::from([u.clone()]);
        let mut stack = vec![u.clone()];
        while let Some(w) = stack.pop() {
            for img in &self.images {
                let c = self.target.conjugate(img, &w);
                if orbit.insert(c.clone()) {
                    if orbit.len() > self.budget {
                        return Err(Error::Budget {
                            what: format!("conjugacy orbit in quotient {}", self.label),
                            limit: self.budget,
                            reached_radius: 0,
                        });
                    }
                    stack.push(c);
                }
            }
        }
        let orbit = Arc::new(orbit);
        let mut memo = self.orbits.lock().unwrap();
        for w in orbit.iter() {
            memo.insert(w.clone(), orbit.clone());
        }
        Ok(orbit)
    }

    /// The class `<pi(alpha)>` as a membership test on parent elements.
    pub fn class(&self, alpha: &Element) -> Result<QuotientClass<'_>> {
        let members = self.class_of_image(&self.pi(alpha))?;
        Ok(QuotientClass { quotient: self, members })
    }

    pub fn is_conjugate(&self, g: &Element, h: &Element) -> Result<bool> {
        let (pg, ph) = (self.pi(g), self.pi(h));
        if pg == ph {
            return Ok(true);
        }
        Ok(self.class_of_image(&pg)?.contains(&ph))
    }
}

/// Whether `pi(g)` and `pi(h)` are conjugate in the finite quotient.
pub fn is_conjugate_in_quotient(q: &FiniteQuotient, g: &Element, h: &Element) -> Result<bool> {
    q.is_conjugate(g, h)
}

fn require(parent: &FinGenGroup, kind: GroupKind) -> Result<()> {
    if parent.kind() == kind {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("quotient requires {kind:?}, got {}", parent.name())))
    }
}

/// A conjugacy class of a finite quotient, tested on parent elements.
pub struct QuotientClass<'a> {
    quotient: &'a FiniteQuotient,
    members: Arc<HashSet<Element>>,
}

impl QuotientClass<'_> {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains_image(&self, u: &Element) -> bool {
        self.members.contains(u)
    }

    pub fn members(&self) -> &HashSet<Element> {
        &self.members
    }

    /// Per-radius counts of class members by quotient word length, for
    /// radii `0..=n`.
    pub fn sphere_counts(&self, n: u32) -> Result<Vec<u64>> {
        let mut out = vec![0u64; n as usize + 1];
        for u in self.members.iter() {
            if let Some(d) = self.quotient.quotient_length(u)? {
                if d <= n {
                    out[d as usize] += 1;
                }
            }
        }
        Ok(out)
    }
}

impl ClassMembership for QuotientClass<'_> {
    fn contains(&self, g: &Element) -> bool {
        self.members.contains(&self.quotient.pi(g))
    }
}

/// An ordered family of finite quotients of one parent group.
#[derive(Debug)]
pub struct QuotientTower {
    pub label: String,
    pub quotients: Vec<FiniteQuotient>,
}

impl QuotientTower {
    pub fn new(label: impl Into<String>, quotients: Vec<FiniteQuotient>) -> Result<Self> {
        if let Some(first) = quotients.first() {
            let name = first.parent().name();
            if quotients.iter().any(|q| q.parent().name() != name) {
                return Err(Error::invalid("all quotients of a tower must share the parent group"));
            }
        }
        Ok(QuotientTower { label: label.into(), quotients })
    }

    /// Parses `psi`, `tower:psi`, `tower:iZ:2,4,8`, `tower:mod:2..10`,
    /// `tower:congruence:2..20`, `tower:congruence-psi:2..16`,
    /// `tower:sanov:3..7`, `tower:divisors` or `tower:trivial`.
    pub fn parse(parent: Arc<FinGenGroup>, spec: &str) -> Result<Self> {
        let s = spec.trim();
        let body = s.strip_prefix("tower:").unwrap_or(s);
        let (kind, list) = match body.split_once(':') {
            Some((k, l)) => (k, Some(l)),
            None => (body, None),
        };
        let levels = || -> Result<Vec<u64>> {
            parse_levels(list.ok_or_else(|| Error::parse(format!("tower {spec:?} needs a level list")))?)
        };
        let build = |f: &dyn Fn(u64) -> Result<FiniteQuotient>| -> Result<Vec<FiniteQuotient>> {
            levels()?.into_iter().map(f).collect()
        };
        let p = || parent.clone();
        let quotients = match kind.to_ascii_lowercase().as_str() {
            "psi" => vec![FiniteQuotient::psi(p())?],
            "iz" | "mod" => build(&|m| FiniteQuotient::mod_reduction(p(), m))?,
            "congruence" => match parent.kind() {
                GroupKind::Sl2z => build(&|n| FiniteQuotient::congruence(p(), n))?,
                GroupKind::Heisenberg => build(&|n| FiniteQuotient::heisenberg_mod(p(), n))?,
                GroupKind::Free(2) => build(&|n| FiniteQuotient::sanov(p(), n))?,
                _ => build(&|m| FiniteQuotient::mod_reduction(p(), m))?,
            },
            "congruence-psi" => build(&|n| FiniteQuotient::congruence_psi(p(), n))?,
            "sanov" => build(&|n| FiniteQuotient::sanov(p(), n))?,
            "heisenberg" => build(&|n| FiniteQuotient::heisenberg_mod(p(), n))?,
            "trivial" => vec![FiniteQuotient::identity_quotient(p())?],
            "divisors" => match parent.kind() {
                GroupKind::Cyclic(k) => (1..=k)
                    .filter(|d| k % d == 0)
                    .map(|d| FiniteQuotient::mod_reduction(p(), d))
                    .collect::<Result<_>>()?,
                _ => return Err(Error::Unsupported("divisor towers need a cyclic group".into())),
            },
            other => return Err(Error::parse(format!("unknown tower kind {other:?}"))),
        };
        if quotients.is_empty() {
            return Err(Error::parse(format!("tower {spec:?} is empty")));
        }
        Self::new(s.to_string(), quotients)
    }

    pub fn len(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotients.is_empty()
    }
}

/// Parses `2,4,8`, `2..20` (inclusive) or mixtures such as `2..5,8`.
pub fn parse_levels(list: &str) -> Result<Vec<u64>> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| Error::parse(format!("bad level {t:?}")));
    let mut out = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(Error::parse(format!("empty range {part:?}")));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

/// Injective radius of a quotient with respect to a class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum InjectiveRadius {
    /// Largest radius without a violator; a violator has length `value + 1`.
    Exact(u32),
    /// No violator of length at most `value`.
    AtLeast(u32),
    /// The identity itself is a violator: `pi(alpha)` is trivial while
    /// `alpha` is not.
    Degenerate,
}

impl InjectiveRadius {
    /// Certified lower bound on the radius, `None` when degenerate.
    pub fn lower_bound(&self) -> Option<u32> {
        match *self {
            InjectiveRadius::Exact(r) | InjectiveRadius::AtLeast(r) => Some(r),
            InjectiveRadius::Degenerate => None,
        }
    }

    pub fn is_capped(&self) -> bool {
        matches!(self, InjectiveRadius::AtLeast(_))
    }

    /// Whether the radius is known to be at least `r`.
    pub fn at_least(&self, r: u32) -> bool {
        self.lower_bound().is_some_and(|b| b >= r)
    }
}

impl std::fmt::Display for InjectiveRadius {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InjectiveRadius::Exact(r) => write!(f, "{r}"),
            InjectiveRadius::AtLeast(r) => write!(f, ">= {r}"),
            InjectiveRadius::Degenerate => write!(f, "degenerate"),
        }
    }
}

/// Largest `n <= cap` such that no element of length at most `n` outside
/// the class maps into the image class.
pub fn injective_radius(q: &FiniteQuotient, class: &ConjClass, cap: u32) -> Result<InjectiveRadius> {
    Ok(first_violator(q, class, cap)?.map_or(InjectiveRadius::AtLeast(cap), |(len, _)| {
        if len == 0 {
            InjectiveRadius::Degenerate
        } else {
            InjectiveRadius::Exact(len - 1)
        }
    }))
}

/// Shortest element outside the class whose image lies in the image class,
/// with its length, searching up to length `cap`.
pub fn first_violator(q: &FiniteQuotient, class: &ConjClass, cap: u32) -> Result<Option<(u32, Element)>> {
    let qclass = q.class(class.representative())?;
    let mut spheres = CayleySpheres::new(q.parent());
    for _ in 0..=cap {
        let (r, sphere) = spheres.next_sphere()?;
        if let Some(v) = sphere.iter().find(|g| !class.member(g) && qclass.contains(g)) {
            return Ok(Some((r, v.clone())));
        }
        if sphere.is_empty() {
            break;
        }
    }
    Ok(None)
}

/// Smallest tower index `k` such that every later quotient separates each
/// element of `f` outside the class from the image class; `None` if the
/// last quotient fails.
pub fn distinguishes(tower: &QuotientTower, class: &ConjClass, f: &[Element]) -> Result<Option<usize>> {
    let outside: Vec<&Element> = f.iter().filter(|b| !class.member(b)).collect();
    let mut k = None;
    for (i, q) in tower.quotients.iter().enumerate() {
        let qclass = q.class(class.representative()).map_err(|e| match e {
            Error::Budget { limit, reached_radius, .. } => Error::Budget {
                what: format!("conjugacy enumeration in quotient {}", q.label()),
                limit,
                reached_radius,
            },
            other => other,
        })?;
        let ok = outside.iter().all(|b| !qclass.contains(b));
        match (ok, k) {
            (true, None) => k = Some(i),
            (false, _) => k = None,
            _ => {}
        }
    }
    Ok(k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub index: usize,
    pub label: String,
    pub order: u64,
    pub radius: InjectiveRadius,
    pub class_size: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub rows: Vec<SeparationRow>,
    /// Estimated rate `R`.
    pub rate: f64,
    /// Quotient class sizes are constant along the tower.
    pub bounded_classes: bool,
    /// Every radius hit the cap, so the fitted rate uses lower bounds.
    pub lower_bound_only: bool,
    pub cap: u32,
}

/// Rows `(i, r_i, |<pi_i(alpha)>|)` and the least-squares slope of
/// `ln |class|` against the radius.
pub fn separation_rate(tower: &QuotientTower, class: &ConjClass, cap: u32) -> Result<SeparationReport> {
    let mut rows = Vec::with_capacity(tower.len());
    for (index, q) in tower.quotients.iter().enumerate() {
        rows.push(SeparationRow {
            index,
            label: q.label().to_string(),
            order: q.order()?,
            radius: injective_radius(q, class, cap)?,
            class_size: q.class(class.representative())?.size() as u64,
        });
    }
    let bounded_classes = rows.windows(2).all(|w| w[0].class_size == w[1].class_size);
    let lower_bound_only = rows.iter().all(|r| r.radius.is_capped());
    let rate = if bounded_classes {
        0.0
    } else {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| lower_bound_only || !r.radius.is_capped())
            .filter_map(|r| r.radius.lower_bound().map(|x| (x as f64, (r.class_size as f64).ln())))
            .collect();
        crate::group::growth::ols(&pts).map_or(0.0, |fit| fit.slope.max(0.0))
    };
    Ok(SeparationReport { rows, rate, bounded_classes, lower_bound_only, cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z() -> Arc<FinGenGroup> {
        FinGenGroup::free_abelian(1).unwrap()
    }

    fn int(v: i64) -> Element {
        Element::from_slice(&[v])
    }

    #[test]
    fn quotients_are_homomorphisms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sl = FinGenGroup::sl2z();
        let f2 = FinGenGroup::free(2).unwrap();
        let h = FinGenGroup::heisenberg();
        let qs = vec![
            FiniteQuotient::congruence_psi(sl.clone(), 6).unwrap(),
            FiniteQuotient::congruence(sl.clone(), 5).unwrap(),
            FiniteQuotient::psi(sl).unwrap(),
            FiniteQuotient::sanov(f2, 7).unwrap(),
            FiniteQuotient::heisenberg_mod(h, 4).unwrap(),
            FiniteQuotient::mod_reduction(FinGenGroup::free_abelian(3).unwrap(), 5).unwrap(),
        ];
        for q in &qs {
            let g = q.parent();
            for _ in 0..50 {
                let wa: Vec<usize> = (0..rng.gen_range(0..10)).map(|_| rng.gen_range(0..g.num_generators())).collect();
                let wb: Vec<usize> = (0..rng.gen_range(0..10)).map(|_| rng.gen_range(0..g.num_generators())).collect();
                let (a, b) = (g.evaluate(&wa), g.evaluate(&wb));
                let t = q.target();
                assert_eq!(q.pi(&g.multiply(&a, &b)), t.multiply(&q.pi(&a), &q.pi(&b)));
                assert_eq!(q.pi(&g.invert(&a)), t.invert(&q.pi(&a)));
            }
        }
    }

    #[test]
    fn image_orders() {
        let sl = FinGenGroup::sl2z();
        assert_eq!(FiniteQuotient::congruence(sl.clone(), 5).unwrap().order().unwrap(), 120);
        assert_eq!(FiniteQuotient::psi(sl.clone()).unwrap().order().unwrap(), 12);
        // SL2(Z) surjects onto SL2(Z/N) x Z/12 only partially; the image is
        // the fibre product over the common abelian quotient.
        let q = FiniteQuotient::congruence_psi(sl, 5).unwrap();
        assert_eq!(q.order().unwrap() % 120, 0);
        let q = FiniteQuotient::mod_reduction(FinGenGroup::free_abelian(2).unwrap(), 3).unwrap();
        assert_eq!(q.order().unwrap(), 9);
    }

    #[test]
    fn conjugacy_in_quotients() {
        let sl = FinGenGroup::sl2z();
        let x = sl.generator(0).clone();
        let x3 = sl.power(&x, 3);
        let psi = FiniteQuotient::psi(sl.clone()).unwrap();
        assert!(!is_conjugate_in_quotient(&psi, &x, &x3).unwrap());
        assert!(is_conjugate_in_quotient(&psi, &x, &x).unwrap());
        let c5 = FiniteQuotient::congruence(sl.clone(), 5).unwrap();
        assert!(is_conjugate_in_quotient(&c5, &x, &sl.invert(&x)).unwrap());
    }

    /// Brute-force oracle over all 120 elements of SL2(F5): conjugacy of
    /// the images of x and x^-1 by searching for a conjugator.
    #[test]
    fn sl2_f5_conjugator_exists() {
        let t = FiniteGroup::Sl2Mod(5);
        let x = t.reduce(&[0, -1, 1, 0]);
        let xi = t.invert(&x);
        let mut count = 0;
        let mut found = false;
        for a in 0..5i64 {
            for b in 0..5 {
                for c in 0..5 {
                    for d in 0..5 {
                        if (a * d - b * c).rem_euclid(5) == 1 {
                            count += 1;
                            let h = Element::from_slice(&[a, b, c, d]);
                            found |= t.conjugate(&h, &x) == xi;
                        }
                    }
                }
            }
        }
        assert_eq!(count, 120);
        assert!(found);
    }

    #[test]
    fn conjugacy_is_an_equivalence_on_samples() {
        let sl = FinGenGroup::sl2z();
        let q = FiniteQuotient::congruence(sl.clone(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sample = || {
            let w: Vec<usize> = (0..rng.gen_range(0..8)).map(|_| rng.gen_range(0..4)).collect();
            sl.evaluate(&w)
        };
        for _ in 0..200 {
            let (a, b, c) = (sample(), sample(), sample());
            assert!(q.is_conjugate(&a, &a).unwrap());
            assert_eq!(q.is_conjugate(&a, &b).unwrap(), q.is_conjugate(&b, &a).unwrap());
            if q.is_conjugate(&a, &b).unwrap() && q.is_conjugate(&b, &c).unwrap() {
                assert!(q.is_conjugate(&a, &c).unwrap());
            }
        }
    }

    #[test]
    fn injective_radius_on_z() {
        let class = ConjClass::new(z(), int(1)).unwrap();
        let q5 = FiniteQuotient::mod_reduction(z(), 5).unwrap();
        assert_eq!(injective_radius(&q5, &class, 10).unwrap(), InjectiveRadius::Exact(3));
        // -1 = 1 mod 2 has length 1, so no positive radius is injective.
        let q2 = FiniteQuotient::mod_reduction(z(), 2).unwrap();
        assert_eq!(injective_radius(&q2, &class, 10).unwrap(), InjectiveRadius::Exact(0));
        let q1 = FiniteQuotient::mod_reduction(z(), 1).unwrap();
        assert_eq!(injective_radius(&q1, &class, 10).unwrap(), InjectiveRadius::Degenerate);
        let q100 = FiniteQuotient::mod_reduction(z(), 100).unwrap();
        assert_eq!(injective_radius(&q100, &class, 10).unwrap(), InjectiveRadius::AtLeast(10));
    }

    #[test]
    fn injective_radius_monotone_under_refinement() {
        let class = ConjClass::new(z(), int(2)).unwrap();
        let mut last = None;
        for m in [3u64, 6, 12, 24] {
            let q = FiniteQuotient::mod_reduction(z(), m).unwrap();
            let r = injective_radius(&q, &class, 30).unwrap().lower_bound();
            if let Some(prev) = last {
                assert!(r >= prev);
            }
            last = Some(r);
        }
        let sl = FinGenGroup::sl2z();
        let cx = ConjClass::new(sl.clone(), sl.generator(0).clone()).unwrap();
        let coarse = FiniteQuotient::congruence(sl.clone(), 3).unwrap();
        let fine = FiniteQuotient::congruence(sl, 6).unwrap();
        assert!(
            injective_radius(&fine, &cx, 6).unwrap().lower_bound() >= injective_radius(&coarse, &cx, 6).unwrap().lower_bound()
        );
    }

    #[test]
    fn distinguishing_index() {
        let tower = QuotientTower::parse(z(), "tower:iZ:2..10").unwrap();
        let class = ConjClass::new(z(), int(1)).unwrap();
        let f: Vec<Element> = (-3..=3).map(int).collect();
        // Moduli dividing none of beta - 1 for beta in F \ {1} are those >= 5.
        assert_eq!(distinguishes(&tower, &class, &f).unwrap(), Some(3));
        let inside = vec![int(1)];
        assert_eq!(distinguishes(&tower, &class, &inside).unwrap(), Some(0));
        let tower = QuotientTower::parse(z(), "tower:iZ:7,2").unwrap();
        assert_eq!(distinguishes(&tower, &class, &f).unwrap(), None);
    }

    #[test]
    fn separation_rates_vanish_for_abelian_towers() {
        let tower = QuotientTower::parse(z(), "tower:iZ:2,4,8,16").unwrap();
        let class = ConjClass::new(z(), int(1)).unwrap();
        let rep = separation_rate(&tower, &class, 10).unwrap();
        assert_eq!(rep.rate, 0.0);
        assert!(rep.bounded_classes);
        let c6 = FinGenGroup::cyclic(6).unwrap();
        let tower = QuotientTower::parse(c6.clone(), "tower:trivial").unwrap();
        let class = ConjClass::new(c6.clone(), Element::from_slice(&[1])).unwrap();
        let rep = separation_rate(&tower, &class, 8).unwrap();
        assert_eq!(rep.rate, 0.0);
        assert_eq!(rep.rows[0].radius, InjectiveRadius::AtLeast(8));
    }

    #[test]
    fn tower_parsing() {
        let sl = FinGenGroup::sl2z();
        assert_eq!(QuotientTower::parse(sl.clone(), "psi").unwrap().len(), 1);
        assert_eq!(QuotientTower::parse(sl.clone(), "tower:congruence:2..20").unwrap().len(), 19);
        assert_eq!(QuotientTower::parse(sl.clone(), "tower:congruence-psi:2..4,8").unwrap().len(), 4);
        assert!(QuotientTower::parse(sl, "tower:iZ:2").is_err());
        assert!(QuotientTower::parse(z(), "tower:bogus:2").is_err());
        assert!(parse_levels("5..2").is_err());
        let c12 = FinGenGroup::cyclic(12).unwrap();
        assert_eq!(QuotientTower::parse(c12, "tower:divisors").unwrap().len(), 6);
    }
}
