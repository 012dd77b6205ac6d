//! Delocalized traces `tr_a(t) = sum_{gamma in <a>} int_0^1 tr K_t(x, x + gamma) dx`.
//!
//! By orthonormality of the sector eigenfunctions the x-integral of the
//! sector kernel diagonal is `Tr f_t(H(beta))`, so
//!
//! ```text
//! tr_a(t) = (1/n) sum_r exp(-2 pi i r a / n) Tr f_t(H(theta + r/n))   (n-fold cover)
//! tr_a(t) = int_0^1 exp(-2 pi i s a) Tr f_t(H(theta + s)) ds          (line)
//! ```
//!
//! Both are sums `sum_nodes w exp(-2 pi i s a) S(s, t)` over sector shifts
//! `s`; [`TraceSampler`] holds the sector spectra once and evaluates any
//! `(t, a)` cheaply.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{modes_for_t, BLOCH_ORDER, DEFAULT_BLOCH_PANELS};
use super::operator::{CoverSpec, ModelOperator};
use super::sector::{modes_for_window, sector_shift, SectorSpectrum, SpectrumCache};
use crate::error::{Error, Result};
use crate::quad::composite_rule;

/// A delocalized trace value. `value` is the real part; `imag` is reported
/// separately (it vanishes when the classes `a` and `-a` coincide).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceValue {
    pub t: f64,
    pub class: i64,
    pub value: f64,
    pub imag: f64,
    pub error: f64,
}

/// One quadrature node of the sector decomposition.
#[derive(Clone, Debug)]
pub struct SectorNode {
    pub shift: f64,
    pub weight: f64,
    pub spectrum: Arc<SectorSpectrum>,
    /// For finite covers, `(r, n)` so phases are computed exactly.
    exact: Option<(u32, u32)>,
}

impl SectorNode {
    /// `exp(-2 pi i s a)`.
    pub fn phase(&self, a: i64) -> Complex64 {
        let arg = match self.exact {
            Some((r, n)) => {
                let k = (r as i64 * a).rem_euclid(n as i64);
                -TAU * k as f64 / n as f64
            }
            None => -TAU * (self.shift * a as f64).rem_euclid(1.0),
        };
        Complex64::from_polar(1.0, arg)
    }
}

/// Sector spectra of a cover, ready for trace evaluation.
#[derive(Clone, Debug)]
pub struct TraceSampler {
    pub op: ModelOperator,
    pub cover: CoverSpec,
    /// Modes per sector on each side.
    pub k: usize,
    /// Nodes used for values: the `n` sectors, or the fine Bloch rule.
    pub nodes: Vec<SectorNode>,
    /// Coarse Bloch rule on the line, for the quadrature-error estimate.
    pub coarse: Option<Vec<SectorNode>>,
}

fn nodes_from(cache: &SpectrumCache, rule: &[(f64, f64)], exact: Option<u32>) -> Vec<SectorNode> {
    let shifts: Vec<f64> = rule.iter().map(|p| p.0).collect();
    let specs = cache.get_many(&shifts);
    rule.iter()
        .zip(specs)
        .enumerate()
        .map(|(i, (&(shift, weight), spectrum))| SectorNode { shift, weight, spectrum, exact: exact.map(|n| (i as u32, n)) })
        .collect()
}

impl TraceSampler {
    /// Spectra with `k` modes per sector. On the line, `panels` Bloch panels
    /// of 16 points are used for values and half as many for the check.
    pub fn with_modes(op: &ModelOperator, cover: CoverSpec, k: usize, panels: usize) -> Result<Self> {
        let cache = SpectrumCache::new(op.clone(), k, false);
        match cover {
            CoverSpec::Finite(0) => Err(Error::invalid("cover degree must be positive")),
            CoverSpec::Finite(n) => {
                let rule: Vec<(f64, f64)> = (0..n).map(|r| (sector_shift(n, r), 1.0 / n as f64)).collect();
                Ok(TraceSampler { op: op.clone(), cover, k, nodes: nodes_from(&cache, &rule, Some(n)), coarse: None })
            }
            CoverSpec::Line => {
                let panels = panels.max(1);
                let fine = nodes_from(&cache, &composite_rule(0.0, 1.0, 2 * panels, BLOCH_ORDER), None);
                let coarse = nodes_from(&cache, &composite_rule(0.0, 1.0, panels, BLOCH_ORDER), None);
                Ok(TraceSampler { op: op.clone(), cover, k, nodes: fine, coarse: Some(coarse) })
            }
        }
    }

    /// Spectra accurate for all `t >= t_min` to `tol`.
    pub fn new(op: &ModelOperator, cover: CoverSpec, t_min: f64, tol: f64) -> Result<Self> {
        let k = modes_for_t(op, t_min, tol);
        let k = if op.has_potential() { k.max(16) } else { k };
        Self::with_modes(op, cover, k, DEFAULT_BLOCH_PANELS * 2)
    }

    /// Spectra accurate for the eta integrand on `[t_min, inf)`: the omitted
    /// eigenvalues satisfy `erfc(|lambda| t_min) < tol`.
    pub fn for_eta(op: &ModelOperator, cover: CoverSpec, t_min: f64, tol: f64) -> Result<Self> {
        let x = erfc_inverse_bound(tol);
        let k = modes_for_window(op, x / t_min);
        let k = if op.has_potential() { k.max(16) } else { k };
        Self::with_modes(op, cover, k, DEFAULT_BLOCH_PANELS * 2)
    }

    fn sum(nodes: &[SectorNode], t: f64, a: i64) -> Complex64 {
        nodes.iter().map(|nd| nd.phase(a) * (nd.weight * nd.spectrum.trace_f(t))).sum()
    }

    /// `tr_a(t)` for each class, in the order given.
    pub fn traces(&self, t: f64, classes: &[i64]) -> Vec<Complex64> {
        let sums: Vec<(f64, f64)> = self.nodes.iter().map(|nd| (nd.weight, nd.spectrum.trace_f(t))).collect();
        classes
            .iter()
            .map(|&a| self.nodes.iter().zip(&sums).map(|(nd, (w, s))| nd.phase(a) * (w * s)).sum())
            .collect()
    }

    /// Coarse-rule traces on the line (`None` on finite covers).
    pub fn coarse_traces(&self, t: f64, classes: &[i64]) -> Option<Vec<Complex64>> {
        self.coarse.as_ref().map(|c| classes.iter().map(|&a| Self::sum(c, t, a)).collect())
    }

    /// Bound on the trace error from eigenvalues outside the trusted
    /// windows; the same for every class.
    pub fn window_error(&self, t: f64) -> f64 {
        self.nodes.iter().map(|nd| nd.weight * nd.spectrum.tail_bound(t)).sum()
    }

    /// Trace with its error bound.
    pub fn trace(&self, t: f64, a: i64) -> TraceValue {
        let v = self.traces(t, &[a])[0];
        let mut error = self.window_error(t);
        if let Some(c) = self.coarse_traces(t, &[a]) {
            error += (c[0] - v).norm();
        }
        TraceValue { t, class: a, value: v.re, imag: v.im, error }
    }

    /// Smallest nonzero `|lambda|` over all nodes.
    pub fn gap(&self) -> f64 {
        self.nodes.iter().map(|nd| nd.spectrum.gap()).fold(f64::INFINITY, f64::min)
    }

    /// Number of eigenvalues below the zero-mode tolerance (finite covers).
    pub fn zero_modes(&self) -> usize {
        self.nodes.iter().map(|nd| nd.spectrum.zero_modes()).sum()
    }

    /// `sum_nodes w sum_lambda g(lambda)` over trusted eigenvalues.
    pub fn weighted_sum(&self, g: impl Fn(f64) -> f64 + Sync) -> f64 {
        self.nodes.iter().map(|nd| nd.weight * nd.spectrum.trusted().map(|(_, l)| g(l)).sum::<f64>()).sum()
    }

    /// Bound on the change of `sum_nodes w sum_lambda h(lambda)` from the
    /// eigenvalue errors of the truncation, for any `h` with `|h'(lambda)|`
    /// bounded by `lipschitz(lambda)`, estimated against `2k` modes. Zero
    /// when the potential vanishes (closed forms).
    pub fn truncation_bound(&self, lipschitz: impl Fn(f64) -> f64 + Sync) -> f64 {
        if !self.op.has_potential() {
            return 0.0;
        }
        let finer = SpectrumCache::new(self.op.clone(), 2 * self.k, false);
        let nodes = self.coarse.as_ref().unwrap_or(&self.nodes);
        let shifts: Vec<f64> = nodes.iter().map(|nd| nd.shift).collect();
        let fine = finer.get_many(&shifts);
        // On the line the coarse rule stands in for the fine one: the bound
        // is an average over the Bloch variable either way.
        nodes
            .par_iter()
            .zip(fine.par_iter())
            .map(|(nd, f)| nd.weight * nd.spectrum.compare(f).iter().map(|&(l, d)| d * lipschitz(l)).sum::<f64>())
            .sum()
    }

    /// Bound on `sum w sum erfc(|lambda| t_min)` over eigenvalues outside
    /// the trusted windows.
    pub fn eta_window_error(&self, t_min: f64) -> f64 {
        self.nodes.iter().map(|nd| nd.weight * nd.spectrum.eta_tail_bound(t_min)).sum()
    }
}

/// Smallest `x` with `erfc(x) <= tol`, rounded up.
pub(crate) fn erfc_inverse_bound(tol: f64) -> f64 {
    let mut x = 1.0;
    while crate::quad::erfc(x) > tol {
        x += 0.25;
    }
    x
}

/// Delocalized trace at class `a` and time `t`.
///
/// On the line the identity class is rejected unless `allow_identity` is
/// set; on finite covers `a` is read modulo `n`.
pub fn deloc_trace(op: &ModelOperator, cover: CoverSpec, a: i64, t: f64, allow_identity: bool, tol: f64) -> Result<TraceValue> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    if cover == CoverSpec::Line && a == 0 && !allow_identity {
        return Err(Error::Unsupported("identity class on the line is disabled".into()));
    }
    let mut sampler = TraceSampler::new(op, cover, t, tol)?;
    if cover == CoverSpec::Line {
        let panels = DEFAULT_BLOCH_PANELS.max(a.unsigned_abs() as usize);
        sampler = TraceSampler::with_modes(op, cover, sampler.k, panels)?;
    }
    Ok(sampler.trace(t, a))
}

/// Minimum of `min |lambda|` over a uniform grid of Bloch parameters.
///
/// Without a potential the minimum over all Bloch parameters is attained at
/// zero frequency and equals `m - |c|` exactly; that value is returned.
pub fn line_gap(op: &ModelOperator, theta_grid: usize) -> Result<f64> {
    if op.components == 1 {
        return Err(Error::Gap("line cover gapless for this family".into()));
    }
    if theta_grid == 0 {
        return Err(Error::invalid("Bloch grid must be nonempty"));
    }
    if !op.has_potential() {
        return Ok(op.m - op.c.abs());
    }
    let k = modes_for_window(op, op.zeroth_order_bound() + 1.0).max(16);
    let cache = SpectrumCache::new(op.clone(), k, false);
    let shifts: Vec<f64> = (0..theta_grid).map(|i| i as f64 / theta_grid as f64).collect();
    Ok(cache
        .get_many(&shifts)
        .iter()
        .map(|s| s.eigenvalues.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use crate::spectral::kernel::fold_kernel;
    use crate::spectral::kernel::f_t;
    use crate::spectral::operator::TrigTerm;

    fn gapped(c: f64) -> ModelOperator {
        ModelOperator::two_component(1.0, c, 0.25, vec![TrigTerm::parse("0.2cos1").unwrap()]).unwrap()
    }

    #[test]
    fn one_component_class_trace_matches_plane_wave_weights() {
        // Eigenfunctions exp(2 pi i k x / n) / sqrt(n) on the 2-cover carry
        // weight exp(2 pi i k a / n) / n at class a.
        let op = ModelOperator::one_component(0.25, 0.0).unwrap();
        let got = deloc_trace(&op, CoverSpec::Finite(2), 1, 1.0, false, 1e-14).unwrap();
        let want: Complex64 = (-2000i64..=2000)
            .map(|k| {
                let lam = TAU * (k as f64 / 2.0 + 0.25);
                Complex64::from_polar(f_t(1.0, lam) / 2.0, TAU * (k as f64) * 1.0 / 2.0)
            })
            .sum();
        assert!((got.value - want.re).abs() < 1e-10 && (got.imag - want.im).abs() < 1e-10);
    }

    #[test]
    fn chirality_and_odd_symmetry() {
        for cover in [CoverSpec::Finite(3), CoverSpec::Line] {
            let zero = deloc_trace(&gapped(0.0), cover, 1, 0.7, false, 1e-12).unwrap();
            assert!(zero.value.abs() < 1e-12 && zero.imag.abs() < 1e-12);
            let p = deloc_trace(&gapped(0.3), cover, 1, 0.7, false, 1e-12).unwrap();
            let m = deloc_trace(&gapped(-0.3), cover, 1, 0.7, false, 1e-12).unwrap();
            assert!(p.value.hypot(p.imag) > 1e-6);
            assert!((p.value + m.value).hypot(p.imag + m.imag) <= p.error + m.error + 1e-12);
        }
    }

    #[test]
    fn class_sum_is_base_trace() {
        let op = gapped(0.3);
        let s = TraceSampler::new(&op, CoverSpec::Finite(4), 0.5, 1e-12).unwrap();
        let total: Complex64 = s.traces(0.5, &[0, 1, 2, 3]).iter().sum();
        let base = TraceSampler::new(&op, CoverSpec::Finite(1), 0.5, 1e-12).unwrap().traces(0.5, &[0])[0];
        assert!((total - base).norm() < 1e-12);
        let full: f64 = s.nodes.iter().map(|nd| nd.spectrum.trace_f(0.5)).sum();
        assert!((4.0 * s.traces(0.5, &[0])[0].re - full).abs() < 1e-10);
    }

    #[test]
    fn bloch_consistency_with_folded_line_kernel() {
        // Finite-cover class trace from sector sums against the x-integral
        // of the folded line kernel.
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap();
        let (n, a, t) = (3u32, 1i64, 0.6);
        let spectral = deloc_trace(&op, CoverSpec::Finite(n), a, t, false, 1e-12).unwrap();
        let gl = GaussLegendre::new(12);
        let mut via_fold = Complex64::new(0.0, 0.0);
        for (x, w) in gl.mapped(0.0, 1.0) {
            let k = fold_kernel(&op, n, t, x, x + a as f64, None, 1e-12).unwrap();
            via_fold += k.folded.trace() * w;
        }
        assert!((via_fold.re - spectral.value).abs() < 1e-9, "{via_fold} vs {}", spectral.value);
        assert!((via_fold.im - spectral.imag).abs() < 1e-9);
    }

    #[test]
    fn line_trace_is_limit_of_covers() {
        let op = gapped(0.3);
        let line = deloc_trace(&op, CoverSpec::Line, 1, 0.8, false, 1e-12).unwrap();
        let cover = deloc_trace(&op, CoverSpec::Finite(32), 1, 0.8, false, 1e-12).unwrap();
        assert!(line.error < 1e-9);
        assert!((line.value - cover.value).abs() < 1e-8);
        assert!(deloc_trace(&op, CoverSpec::Line, 0, 0.8, false, 1e-12).is_err());
    }

    #[test]
    fn line_gap_values() {
        let free = ModelOperator::two_component(1.0, 0.3, 0.0, vec![]).unwrap();
        assert_eq!(line_gap(&free, 8).unwrap(), 0.7);
        let g = line_gap(&gapped(0.3), 64).unwrap();
        assert!((0.5..=0.7).contains(&g), "{g}");
        let g2 = line_gap(&gapped(0.3), 128).unwrap();
        assert!((g - g2).abs() < 1e-3);
        assert!(matches!(line_gap(&ModelOperator::one_component(0.1, 0.0).unwrap(), 8), Err(Error::Gap(_))));
    }
}
