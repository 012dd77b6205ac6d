//! Eta values along a tower of finite cyclic covers and their line limit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{eta_classes, eta_quadrature, EtaResult, QuadraturePlan};
use crate::error::{Error, Result};
use crate::spectral::{line_gap, CoverSpec, ModelOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceRow {
    pub n: u32,
    pub eta: EtaResult,
    /// `|eta_n - eta_line|` (complex modulus), when the line value exists.
    pub abs_diff: Option<f64>,
    /// Certified error of the difference: the two certified errors added.
    pub diff_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceReport {
    pub class: i64,
    pub rows: Vec<ConvergenceRow>,
    pub line_value: Option<EtaResult>,
    /// Why the line value was not computed.
    pub line_note: Option<String>,
    /// First row from which every difference vanishes exactly.
    pub stabilization_index: Option<usize>,
    /// Each difference is at most the previous one, or within the
    /// combined certified error of the two rows.
    pub eventually_decreasing: Option<bool>,
    /// The tower separates `a` from the identity once `n` exceeds this.
    pub distinguishing_threshold: u64,
    /// Uniform exponential growth rate of the quotients (zero for Z).
    pub k_u: f64,
    /// Spectral gap of the line operator minus `sigma_u = 2 K_u / theta_0`.
    pub gap_margin: Option<f64>,
    pub flagged_rows: Vec<u32>,
}

/// Eta of class `a mod n` on each cover of the tower and, for gapped
/// 2-component operators, on the line.
pub fn converge_tower(op: &ModelOperator, tower: &[u32], a: i64, plan: &QuadraturePlan) -> Result<ConvergenceReport> {
    if tower.len() < 2 {
        return Err(Error::invalid("a tower needs at least two covers"));
    }
    if tower.contains(&0) {
        return Err(Error::invalid("cover degrees must be positive"));
    }
    let mut ns = tower.to_vec();
    ns.sort_unstable();

    let (line_value, line_note) = if op.components == 1 {
        (None, Some("line cover gapless for this family".to_string()))
    } else if op.certified_gap().is_none() {
        (None, Some("no gap certificate for the line operator".to_string()))
    } else if a == 0 && !plan.line_identity {
        (None, Some("identity class on the line is disabled".to_string()))
    } else {
        (Some(eta_quadrature(op, CoverSpec::Line, a, plan)?), None)
    };

    let etas: Vec<EtaResult> = ns
        .par_iter()
        .map(|&n| eta_classes(op, CoverSpec::Finite(n), &[a], plan).map(|mut v| v.remove(0)))
        .collect::<Result<_>>()?;

    let rows: Vec<ConvergenceRow> = ns
        .iter()
        .zip(etas)
        .map(|(&n, eta)| {
            let (abs_diff, diff_error) = match &line_value {
                Some(l) => (Some((eta.complex() - l.complex()).norm()), Some(eta.total_error() + l.total_error())),
                None => (None, None),
            };
            ConvergenceRow { n, eta, abs_diff, diff_error }
        })
        .collect();

    let diffs: Option<Vec<(f64, f64)>> = rows.iter().map(|r| r.abs_diff.zip(r.diff_error)).collect();
    let stabilization_index = diffs.as_ref().and_then(|d| match d.iter().rposition(|(x, _)| *x != 0.0) {
        None => Some(0),
        Some(i) if i + 1 < d.len() => Some(i + 1),
        Some(_) => None,
    });
    let eventually_decreasing = diffs.as_ref().map(|d| {
        d.windows(2).all(|w| {
            let ((prev, pe), (cur, ce)) = (w[0], w[1]);
            cur <= prev || cur <= pe + ce
        })
    });
    let gap_margin = match op.components {
        2 => Some(line_gap(op, 256)?),
        _ => None,
    };
    let flagged_rows = rows.iter().filter(|r| r.eta.flagged).map(|r| r.n).collect();
    Ok(ConvergenceReport {
        class: a,
        rows,
        line_value,
        line_note,
        stabilization_index,
        eventually_decreasing,
        distinguishing_threshold: a.unsigned_abs(),
        k_u: 0.0,
        gap_margin,
        flagged_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chiral_tower_is_zero() {
        let op = ModelOperator::two_component(1.0, 0.0, 0.25, vec![]).unwrap();
        let rep = converge_tower(&op, &[2, 4, 8], 1, &QuadraturePlan::default()).unwrap();
        for r in &rep.rows {
            assert!(r.eta.value.abs() <= r.eta.total_error() + 1e-12);
        }
        assert!(rep.line_value.unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn finite_deck_group_stabilizes_at_full_cover() {
        // Cyclic(6) as the divisor tower 1, 2, 3, 6: the last row is the
        // 6-cover value itself.
        let op = ModelOperator::one_component(0.25, 0.2).unwrap();
        let plan = QuadraturePlan::default();
        let rep = converge_tower(&op, &[1, 2, 3, 6], 1, &plan).unwrap();
        let full = eta_quadrature(&op, CoverSpec::Finite(6), 1, &plan).unwrap();
        let last = &rep.rows.last().unwrap().eta;
        assert_eq!((last.value, last.imag), (full.value, full.imag));
        assert!(rep.line_value.is_none());
    }

    #[test]
    fn single_cover_rejected() {
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap();
        assert!(converge_tower(&op, &[4], 1, &QuadraturePlan::default()).is_err());
    }
}
