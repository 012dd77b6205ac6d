//! Breadth-first enumeration of Cayley spheres.
//!
//! The Cayley graph of a symmetric generating set is undirected, so the
//! neighbours of the sphere of radius `r` lie in spheres `r - 1`, `r` and
//! `r + 1`. Deduplication therefore only needs the two most recent spheres,
//! which keeps memory proportional to the sphere size rather than the ball.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::conj::ClassMembership;
use super::{Element, FinGenGroup};
use crate::error::{Error, Result};

/// Default cap on the word-length radius.
pub const DEFAULT_RADIUS_CAP: u32 = 12;

/// Default cap on the number of elements held in two consecutive spheres.
pub const DEFAULT_BFS_BUDGET: usize = 20_000_000;

/// Result of a capped word-length search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordLength {
    Exact(u32),
    /// The element is not in the ball of the given radius.
    ExceedsCap(u32),
}

/// Streaming iterator over the spheres `S_0, S_1, ...` of a Cayley graph.
///
/// Each sphere is listed in a deterministic order: the order in which its
/// elements are first reached from the previous sphere, scanning generators
/// in index order.
pub struct CayleySpheres<'a> {
    group: &'a FinGenGroup,
    prev: HashSet<Element>,
    current: Vec<Element>,
    current_set: HashSet<Element>,
    radius: u32,
    budget: usize,
    started: bool,
}

impl<'a> CayleySpheres<'a> {
    pub fn new(group: &'a FinGenGroup) -> Self {
        Self::with_budget(group, DEFAULT_BFS_BUDGET)
    }

    pub fn with_budget(group: &'a FinGenGroup, budget: usize) -> Self {
        let id = group.identity();
        CayleySpheres {
            group,
            prev: HashSet::new(),
            current: vec![id.clone()],
            current_set: HashSet::from([id]),
            radius: 0,
            budget,
            started: false,
        }
    }

    /// Radius of the sphere most recently returned.
    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Returns the next sphere as `(radius, elements)`.
    pub fn next_sphere(&mut self) -> Result<(u32, &[Element])> {
        if !self.started {
            self.started = true;
            return Ok((0, &self.current));
        }
        let mut next = Vec::new();
        let mut next_set = HashSet::new();
        for g in &self.current {
            for gen in self.group.generators() {
                let h = self.group.multiply(g, &gen.element);
                if self.prev.contains(&h) || self.current_set.contains(&h) || next_set.contains(&h) {
                    continue;
                }
                next_set.insert(h.clone());
                next.push(h);
                if next.len() + self.current.len() > self.budget {
                    return Err(Error::Budget {
                        what: format!("Cayley BFS of {}", self.group.name()),
                        limit: self.budget,
                        reached_radius: self.radius,
                    });
                }
            }
        }
        self.prev = std::mem::replace(&mut self.current_set, next_set);
        self.current = next;
        self.radius += 1;
        Ok((self.radius, &self.current))
    }
}

/// Sizes of the spheres of radius `0..=radius`.
pub fn sphere_sizes(group: &FinGenGroup, radius: u32) -> Result<Vec<u64>> {
    sphere_sizes_within(group, radius, DEFAULT_BFS_BUDGET)
}

/// [`sphere_sizes`] with an explicit element budget.
pub fn sphere_sizes_within(group: &FinGenGroup, radius: u32, budget: usize) -> Result<Vec<u64>> {
    let mut spheres = CayleySpheres::with_budget(group, budget);
    let mut out = Vec::with_capacity(radius as usize + 1);
    for _ in 0..=radius {
        let (_, s) = spheres.next_sphere()?;
        out.push(s.len() as u64);
    }
    Ok(out)
}

/// Number of elements of word length at most `n`.
pub fn ball_count(group: &FinGenGroup, n: u32) -> Result<u64> {
    Ok(sphere_sizes(group, n)?.iter().sum())
}

/// Exact word length of `g` if it is at most `cap`.
pub fn word_length(group: &FinGenGroup, g: &Element, cap: u32) -> Result<WordLength> {
    let mut spheres = CayleySpheres::new(group);
    for _ in 0..=cap {
        let (r, s) = spheres.next_sphere()?;
        if s.contains(g) {
            return Ok(WordLength::Exact(r));
        }
        if s.is_empty() {
            break;
        }
    }
    Ok(WordLength::ExceedsCap(cap))
}

/// Number of elements of the class with word length at most `n`.
pub fn class_ball_count(group: &FinGenGroup, class: &dyn ClassMembership, n: u32) -> Result<u64> {
    Ok(class_sphere_counts(group, class, n)?.iter().sum())
}

/// Per-radius counts of class members in the spheres of radius `0..=n`.
pub fn class_sphere_counts(group: &FinGenGroup, class: &dyn ClassMembership, n: u32) -> Result<Vec<u64>> {
    class_sphere_counts_within(group, class, n, DEFAULT_BFS_BUDGET)
}

/// [`class_sphere_counts`] with an explicit element budget.
pub fn class_sphere_counts_within(group: &FinGenGroup, class: &dyn ClassMembership, n: u32, budget: usize) -> Result<Vec<u64>> {
    let mut spheres = CayleySpheres::with_budget(group, budget);
    let mut out = Vec::with_capacity(n as usize + 1);
    for _ in 0..=n {
        let (_, s) = spheres.next_sphere()?;
        out.push(s.iter().filter(|g| class.contains(g)).count() as u64);
    }
    Ok(out)
}
