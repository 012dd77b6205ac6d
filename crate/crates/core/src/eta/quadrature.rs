//! Certified t-integration of delocalized traces.
//!
//! `eta_a = (2 / sqrt(pi)) int_0^inf tr_a(t) dt` is split into four parts:
//!
//! * `(0, t_min]`: not integrated numerically. For classes whose
//!   translates stay away from the diagonal the Gaussian off-diagonal
//!   envelope bounds the contribution. For the identity class of a
//!   potential-free operator the on-diagonal (local) contribution is known
//!   in closed form and added to the value; only the translates are bounded.
//! * `[t_min, t_split]` and `[t_split, t_max]`: adaptive Gauss-Legendre in
//!   `log t`.
//! * `(t_max, inf)`: bounded by `sum w erfc(|lambda| t_max)`, the exact
//!   remainder of every eigenvalue's contribution in absolute value.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive_gl, adaptive_gl_vec, erfc, gaussian_power_tail, GaussLegendre};
use crate::spectral::kernel::{envelope_sum, gaussian_envelope, DEFAULT_BLOCH_PANELS, DEFAULT_MU};
use crate::spectral::trace::TraceSampler;
use crate::spectral::{CoverSpec, ModelOperator};

/// `int_0^inf |d/dlambda (lambda exp(-t^2 lambda^2))| dt * |lambda|`
/// `= int_0^inf |1 - 2u^2| exp(-u^2) du = 2 exp(-1/2) / sqrt(2)`.
const LIPSCHITZ_INTEGRAL: f64 = 0.857_763_884_960_706_8;

/// Grid spacing of [`tail_cutoff`].
pub const TAIL_GRID: f64 = 1.0 / 64.0;

/// Integration plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraturePlan {
    pub t_min: f64,
    pub t_split: f64,
    /// `None`: chosen by [`tail_cutoff`] from the spectral gap.
    pub t_max: Option<f64>,
    /// Points of the low rule on each adaptive panel (the check rule has twice as many).
    pub order: usize,
    /// Error target of each of the two adaptive panels, and of the large-t tail.
    pub tol: f64,
    pub max_depth: u32,
    /// Bloch panels of 16 points on the line (values use twice as many).
    pub bloch_panels: usize,
    /// Envelope parameter of the small-t bound.
    pub mu: f64,
    /// Results whose certified error exceeds this are flagged.
    pub flag_tol: f64,
    /// Allow the identity class on the line (potential-free operators only).
    pub line_identity: bool,
}

impl Default for QuadraturePlan {
    fn default() -> Self {
        QuadraturePlan {
            t_min: 0.05,
            t_split: 1.0,
            t_max: None,
            order: 10,
            tol: 1e-8,
            max_depth: 30,
            bloch_panels: DEFAULT_BLOCH_PANELS,
            mu: DEFAULT_MU,
            flag_tol: 1e-6,
            line_identity: false,
        }
    }
}

impl QuadraturePlan {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_min > 0.0
            && self.t_min < self.t_split
            && self.t_max.is_none_or(|t| t > self.t_split)
            && self.order >= 2
            && self.tol > 0.0
            && self.mu > 1.0
            && self.bloch_panels >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid quadrature plan {self:?}")))
        }
    }
}

/// A certified eta value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaResult {
    pub cover: CoverSpec,
    /// Class representative (reduced modulo `n` on finite covers).
    pub class: i64,
    pub value: f64,
    /// Imaginary part; zero whenever the classes `a` and `-a` coincide.
    pub imag: f64,
    pub quadrature_error: f64,
    pub small_t_bound: f64,
    pub tail_bound: f64,
    pub truncation_bound: f64,
    pub t_max: f64,
    pub gap: f64,
    pub zero_modes: usize,
    pub flagged: bool,
    /// Seconds; kept out of serialized payloads so they are reproducible.
    #[serde(skip, default)]
    pub wall_time: f64,
}

impl EtaResult {
    pub fn total_error(&self) -> f64 {
        self.quadrature_error + self.small_t_bound + self.tail_bound + self.truncation_bound
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.value, self.imag)
    }
}

/// `(2 / sqrt(pi)) int_0^inf lambda exp(-t^2 lambda^2) dt = sign(lambda)`,
/// evaluated by the same log-t quadrature as the traces.
pub fn sign_by_quadrature(lambda: f64, tol: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let g = lambda.abs();
    let hi = (40.0f64).sqrt() / g;
    let lo = 1e-13 / g;
    let r = adaptive_gl(lo.ln(), hi.ln(), 10, tol, |u| {
        let t = u.exp();
        2.0 / PI.sqrt() * t * lambda * (-t * t * lambda * lambda).exp()
    })?;
    Ok(r.value)
}

/// Smallest `t_max` on the grid `k / 64` with
/// `c int_{t_max}^inf t^-m exp(-g^2 t^2) dt <= tol`.
pub fn tail_cutoff(g: f64, c: f64, m: f64, tol: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::Gap(format!("tail cutoff needs a positive gap, got {g}")));
    }
    if !(tol > 0.0) || c < 0.0 {
        return Err(Error::invalid("tail cutoff needs tol > 0 and c >= 0"));
    }
    let bound = |k: u64| c * gaussian_power_tail(g, m, k as f64 * TAIL_GRID);
    let mut hi = 1u64;
    while bound(hi) > tol {
        hi *= 2;
        if hi > 1 << 40 {
            return Err(Error::Numerical("tail cutoff did not converge".into()));
        }
    }
    let mut lo = 0u64;
    // Invariant: bound(hi) <= tol, and lo is 0 or fails.
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if bound(mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as f64 * TAIL_GRID)
}

/// `(2/sqrt(pi)) int_0^T` of the on-diagonal trace of the potential-free
/// 2-component line kernel:
/// `-2c/pi + (1/pi) int_0^inf [erfc((E - c) T) - erfc((E + c) T)] dxi`
/// with `E = sqrt(xi^2 + m^2)`.
pub fn local_identity_term(op: &ModelOperator, t: f64) -> Result<f64> {
    if op.components == 1 {
        // The 1-component kernel vanishes on the diagonal.
        return Ok(0.0);
    }
    if op.has_potential() {
        return Err(Error::Unsupported("identity class with a potential needs the local index density".into()));
    }
    let (m, c) = (op.m, op.c);
    let xi_max = (8.0 / t + c.abs()).max(1.0);
    // erfc((E - c) T) - erfc((E + c) T) as an integral of the Gaussian, to
    // avoid cancellation between two erfc values.
    let inner = GaussLegendre::cached(24);
    let r = adaptive_gl(0.0, xi_max, 16, 1e-14, |xi| {
        let e = (xi * xi + m * m).sqrt();
        2.0 / PI.sqrt() * inner.integrate(e - c, e + c, |u| t * (-t * t * u * u).exp())
    })?;
    Ok(-2.0 * c / PI + r.value / PI)
}

/// Bound on `(2/sqrt(pi)) int_0^{t_min} |sum_translates tr K_t(x, x + d)| dt`
/// from the Gaussian envelope, over `d = a + n j` (all `j`, or `j != 0`
/// for the identity class), or `d = a` on the line.
pub fn small_t_envelope(op: &ModelOperator, cover: CoverSpec, a: i64, t_min: f64, mu: f64) -> Result<f64> {
    if cover == CoverSpec::Line && a == 0 {
        // No translates: the identity class is the local term alone.
        return Ok(0.0);
    }
    let f = |t: f64| match cover {
        CoverSpec::Line => gaussian_envelope(op, mu, t, a as f64),
        CoverSpec::Finite(n) => envelope_sum(op, mu, t, a as f64, n as f64, a == 0),
    };
    let r = adaptive_gl(0.0, t_min, 16, 1e-18, f)?;
    Ok(2.0 / PI.sqrt() * (r.value + r.error))
}

/// Eta values of several classes on one cover.
pub fn eta_classes(op: &ModelOperator, cover: CoverSpec, classes: &[i64], plan: &QuadraturePlan) -> Result<Vec<EtaResult>> {
    let start = Instant::now();
    plan.validate()?;
    let classes: Vec<i64> = match cover {
        CoverSpec::Finite(0) => return Err(Error::invalid("cover degree must be positive")),
        CoverSpec::Finite(n) => classes.iter().map(|a| a.rem_euclid(n as i64)).collect(),
        CoverSpec::Line => {
            if op.components == 1 {
                return Err(Error::Gap("line cover gapless for this family".into()));
            }
            if op.certified_gap().is_none() {
                return Err(Error::Gap(format!(
                    "no gap certificate: m - |c| - sup|v| = {} <= 0",
                    op.m - op.c.abs() - op.sup_v()
                )));
            }
            if classes.contains(&0) && !plan.line_identity {
                return Err(Error::Unsupported("identity class on the line is disabled".into()));
            }
            classes.to_vec()
        }
    };
    if classes.is_empty() {
        return Err(Error::invalid("no classes requested"));
    }

    // Spectra accurate on [t_min, inf): omitted eigenvalues contribute below tol / 100.
    let base = TraceSampler::for_eta(op, cover, plan.t_min, plan.tol * 1e-2)?;
    let panels = plan.bloch_panels.max(classes.iter().map(|a| a.unsigned_abs() as usize).max().unwrap_or(0));
    let sampler = if cover == CoverSpec::Line { TraceSampler::with_modes(op, cover, base.k, panels)? } else { base };

    let gap = sampler.gap();
    if !gap.is_finite() || gap <= 1e-8 {
        return Err(Error::Gap(format!("spectrum not bounded away from zero (gap {gap:.3e})")));
    }
    let ts = plan.t_split;
    let prefactor =
        2.0 / PI.sqrt() * sampler.weighted_sum(|l| if l.abs() > 1e-8 { l.abs() * (-ts * ts * (l * l - gap * gap)).exp() } else { 0.0 });
    let t_max = match plan.t_max {
        Some(t) => t,
        None => tail_cutoff(gap, prefactor, 0.0, plan.tol)?.max(ts + TAIL_GRID),
    };
    let tail_bound = sampler.weighted_sum(|l| if l.abs() > 1e-8 { erfc(l.abs() * t_max) } else { 0.0 });

    let nc = classes.len();
    let line = cover == CoverSpec::Line;
    let dim = if line { 4 * nc } else { 2 * nc };
    let norm = 2.0 / PI.sqrt();
    let integrand = |us: &[f64]| -> Vec<Vec<f64>> {
        us.par_iter()
            .map(|&u| {
                let t = u.exp();
                let mut row = Vec::with_capacity(dim);
                for v in sampler.traces(t, &classes) {
                    row.push(norm * t * v.re);
                    row.push(norm * t * v.im);
                }
                if let Some(c) = sampler.coarse_traces(t, &classes) {
                    for v in c {
                        row.push(norm * t * v.re);
                        row.push(norm * t * v.im);
                    }
                }
                row
            })
            .collect()
    };
    let lo = adaptive_gl_vec(plan.t_min.ln(), ts.ln(), plan.order, plan.tol, plan.max_depth, dim, &integrand)?;
    let hi = adaptive_gl_vec(ts.ln(), t_max.ln(), plan.order, plan.tol, plan.max_depth, dim, &integrand)?;
    let integral: Vec<f64> = lo.value.iter().zip(&hi.value).map(|(a, b)| a + b).collect();

    let truncation_bound = sampler.truncation_bound(|l| norm * LIPSCHITZ_INTEGRAL / l.abs().max(1e-8))
        + sampler.eta_window_error(plan.t_min);
    let wall = start.elapsed().as_secs_f64();

    classes
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let (mut re, im) = (integral[2 * i], integral[2 * i + 1]);
            let mut quadrature_error = lo.error + hi.error;
            if line {
                let (cre, cim) = (integral[2 * nc + 2 * i], integral[2 * nc + 2 * i + 1]);
                quadrature_error += (re - cre).hypot(im - cim);
            }
            if a == 0 {
                re += local_identity_term(op, plan.t_min)?;
            }
            let small_t_bound = small_t_envelope(op, cover, a, plan.t_min, plan.mu)?;
            let mut r = EtaResult {
                cover,
                class: a,
                value: re,
                imag: im,
                quadrature_error,
                small_t_bound,
                tail_bound,
                truncation_bound,
                t_max,
                gap,
                zero_modes: sampler.zero_modes(),
                flagged: false,
                wall_time: wall,
            };
            r.flagged = r.total_error() > plan.flag_tol;
            Ok(r)
        })
        .collect()
}

/// Certified eta value of one class.
pub fn eta_quadrature(op: &ModelOperator, cover: CoverSpec, a: i64, plan: &QuadraturePlan) -> Result<EtaResult> {
    Ok(eta_classes(op, cover, &[a], plan)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TrigTerm;

    #[test]
    fn sign_primitive() {
        for l in [0.5, -0.5, 2.0, -2.0] {
            assert!((sign_by_quadrature(l, 1e-13).unwrap() - l.signum()).abs() < 1e-10);
        }
    }

    #[test]
    fn tail_cutoff_properties() {
        let t = tail_cutoff(0.7, 1.0, 0.0, 1e-10).unwrap();
        let rough = (1e10f64).ln().sqrt() / 0.7;
        assert!(t > 0.5 * rough && t < 1.5 * rough, "{t} vs {rough}");
        let direct = adaptive_gl(t, t + 20.0, 16, 1e-16, |x| (-0.49 * x * x).exp()).unwrap();
        assert!(direct.value <= 1e-10);
        assert!(tail_cutoff(0.7, 1.0, 0.0, 5e-11).unwrap() >= t);
        let t2 = tail_cutoff(1.4, 1.0, 0.0, 1e-10).unwrap();
        assert!((t2 / (t / 2.0) - 1.0).abs() < 0.25);
        assert!(matches!(tail_cutoff(0.0, 1.0, 0.0, 1e-10), Err(Error::Gap(_))));
    }

    #[test]
    fn local_term_matches_integrated_line_trace() {
        // The closed form differs between two times by the integral of the
        // identity-class line trace between them.
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap();
        let (t1, t2) = (0.05, 0.4);
        let sampler = TraceSampler::new(&op, CoverSpec::Line, t1, 1e-14).unwrap();
        let r = adaptive_gl(t1, t2, 16, 1e-13, |t| 2.0 / PI.sqrt() * sampler.traces(t, &[0])[0].re).unwrap();
        let diff = local_identity_term(&op, t2).unwrap() - local_identity_term(&op, t1).unwrap();
        assert!((diff - r.value).abs() < 1e-9, "{diff} vs {}", r.value);
        assert!(local_identity_term(&op, 1e-6).unwrap().abs() < 1e-5);
        assert!((local_identity_term(&op, 50.0).unwrap() + 0.6 / PI).abs() < 1e-12);
    }

    #[test]
    fn chiral_operator_has_zero_eta() {
        let op = ModelOperator::two_component(1.0, 0.0, 0.25, vec![TrigTerm::parse("0.2cos1").unwrap()]).unwrap();
        let plan = QuadraturePlan::default();
        for r in eta_classes(&op, CoverSpec::Finite(3), &[1, 2], &plan).unwrap() {
            assert!(r.value.abs() <= r.total_error() + 1e-12 && !r.flagged);
        }
        let r = eta_quadrature(&op, CoverSpec::Line, 1, &plan).unwrap();
        assert!(r.value.abs() <= r.total_error() + 1e-12);
    }

    #[test]
    fn gapless_and_identity_rejections() {
        let plan = QuadraturePlan::default();
        let one = ModelOperator::one_component(0.25, 0.0).unwrap();
        assert!(matches!(eta_quadrature(&one, CoverSpec::Line, 1, &plan), Err(Error::Gap(_))));
        let weak = ModelOperator::two_component(0.3, 0.2, 0.0, vec![TrigTerm::parse("0.2cos1").unwrap()]).unwrap();
        assert!(matches!(eta_quadrature(&weak, CoverSpec::Line, 1, &plan), Err(Error::Gap(_))));
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap();
        assert!(matches!(eta_quadrature(&op, CoverSpec::Line, 0, &plan), Err(Error::Unsupported(_))));
        let plan = QuadraturePlan { line_identity: true, ..plan };
        let r = eta_quadrature(&op, CoverSpec::Line, 0, &plan).unwrap();
        assert!((r.value + 0.6 / PI).abs() <= r.total_error() + 1e-9, "{r:?}");
    }
}
