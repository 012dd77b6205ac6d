//! Schwartz kernels of `D exp(-t^2 D^2)` on finite covers and on the line.
//!
//! Sign convention: on the n-fold cover
//!
//! ```text
//! K_n(x, y) = (1/n) sum_r exp(2 pi i r (x - y) / n) sum_j f_t(lambda_j) u_j(x) u_j(y)^*
//! ```
//!
//! where `(lambda_j, u_j)` are the eigenpairs of the sector `H(theta + r/n)`
//! with 1-periodic, L2-normalised `u_j`. On the line the sum over `r/n` is
//! replaced by the Bloch integral over `s in [0, 1)`. Summing the line
//! kernel over the translates `y + n j` reproduces `K_n` (Poisson
//! summation); the folding tests check this numerically.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{CoverSpec, ModelOperator};
use super::sector::{modes_for_window, sector_shift, window_for, SectorSpectrum, SpectrumCache};
use crate::error::{Error, Result};
use crate::quad::composite_rule;

/// Gauss-Legendre points per Bloch panel.
pub const BLOCH_ORDER: usize = 16;

/// Default number of Bloch panels (64 nodes).
pub const DEFAULT_BLOCH_PANELS: usize = 4;

/// Default relative parameter of the Gaussian off-diagonal envelope.
pub const DEFAULT_MU: f64 = 1.5;

/// A kernel value with an absolute error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub components: usize,
    /// Row-major `components x components` matrix.
    pub value: Vec<Complex64>,
    pub error: f64,
}

impl KernelSample {
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.value[i * self.components + j]
    }

    /// Spinor trace.
    pub fn trace(&self) -> Complex64 {
        (0..self.components).map(|i| self.entry(i, i)).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.value.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise difference.
    pub fn max_diff(&self, other: &KernelSample) -> f64 {
        self.value.iter().zip(&other.value).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `f_t(lambda) = lambda exp(-t^2 lambda^2)`.
pub fn f_t(t: f64, lambda: f64) -> f64 {
    lambda * (-t * t * lambda * lambda).exp()
}

/// Gaussian off-diagonal envelope for `|K_t(x, y)|` at distance `d`:
/// `n_c (|d| / (4 sqrt(pi) t^3) + M / (2 sqrt(pi) t)) exp(-d^2 / (4 mu t^2))`
/// with `M = m + |c| + sup|v|`.
pub fn gaussian_envelope(op: &ModelOperator, mu: f64, t: f64, d: f64) -> f64 {
    let nc = op.components as f64;
    let big_m = op.zeroth_order_bound();
    let sp = PI.sqrt();
    nc * (d.abs() / (4.0 * sp * t.powi(3)) + big_m / (2.0 * sp * t)) * (-d * d / (4.0 * mu * t * t)).exp()
}

/// Sum of the envelope over the distances `|d0 + period * j|`, `j in Z`,
/// skipping `j = 0` when `skip_zero` is set.
pub fn envelope_sum(op: &ModelOperator, mu: f64, t: f64, d0: f64, period: f64, skip_zero: bool) -> f64 {
    let mut total = 0.0;
    for sign in [1i64, -1] {
        let mut j = if sign == 1 { 0 } else { -1 };
        loop {
            if !(skip_zero && j == 0) {
                let d = d0 + period * j as f64;
                let term = gaussian_envelope(op, mu, t, d);
                total += term;
                if d.abs() > 2.0 * (mu.sqrt() * t) && term < 1e-300 {
                    break;
                }
            }
            j += sign;
            if j.unsigned_abs() > 1_000_000 {
                break;
            }
        }
    }
    total
}

/// Modes per sector so that the kernel at time `t` is accurate to `tol`.
pub fn modes_for_t(op: &ModelOperator, t: f64, tol: f64) -> usize {
    modes_for_window(op, window_for(t, tol))
}

/// `G(x, y) = sum_j f_t(lambda_j) u_j(x) u_j(y)^*` over the trusted window.
fn sector_kernel(spec: &SectorSpectrum, t: f64, x: f64, y: f64) -> Vec<Complex64> {
    let nc = spec.components;
    let mut out = vec![Complex64::new(0.0, 0.0); nc * nc];
    for (j, l) in spec.trusted() {
        let w = f_t(t, l);
        if w == 0.0 {
            continue;
        }
        let ux = spec.eigenfunction(j, x);
        let uy = spec.eigenfunction(j, y);
        for a in 0..nc {
            for b in 0..nc {
                out[a * nc + b] += ux[a] * uy[b].conj() * w;
            }
        }
    }
    out
}

/// Floating-point rounding allowance for a sector kernel sum.
fn rounding(spec: &SectorSpectrum, t: f64) -> f64 {
    let dim = spec.eigenvalues.len() as f64;
    64.0 * f64::EPSILON * dim.sqrt() * spec.trusted().map(|(_, l)| f_t(t, l).abs()).sum::<f64>()
}

/// Kernel of the operator on the n-fold cover at `(x, y)`, both in `[0, n)`
/// or anywhere on the line (the kernel is n-periodic in each variable).
pub fn finite_kernel(op: &ModelOperator, n: u32, t: f64, x: f64, y: f64, tol: f64) -> Result<KernelSample> {
    check_t(t)?;
    let k = modes_for_t(op, t, tol);
    let cache = SpectrumCache::new(op.clone(), k, true);
    finite_kernel_cached(&cache, n, t, x, y)
}

pub(crate) fn finite_kernel_cached(cache: &SpectrumCache, n: u32, t: f64, x: f64, y: f64) -> Result<KernelSample> {
    let op = cache.operator();
    let nc = op.components;
    let shifts: Vec<f64> = (0..n).map(|r| sector_shift(n, r)).collect();
    let spectra = cache.get_many(&shifts);
    let mut value = vec![Complex64::new(0.0, 0.0); nc * nc];
    let mut error = 0.0;
    for (r, spec) in spectra.iter().enumerate() {
        let ph = Complex64::from_polar(1.0 / n as f64, TAU * r as f64 * (x - y) / n as f64);
        for (v, g) in value.iter_mut().zip(sector_kernel(spec, t, x, y)) {
            *v += ph * g;
        }
        error += (spec.tail_bound(t) + rounding(spec, t)) / n as f64;
    }
    Ok(KernelSample { t, x, y, components: nc, value, error })
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("t must be positive, got {t}")))
    }
}

/// Bloch-integral evaluator of the line kernel at a fixed `t`.
///
/// Spectra are computed once at the nodes of two composite Gauss-Legendre
/// rules (`panels` and `2 * panels` panels); the difference between the
/// two estimates is reported as the quadrature error.
pub struct LineKernel {
    op: ModelOperator,
    t: f64,
    coarse: Vec<(f64, f64, Arc<SectorSpectrum>)>,
    fine: Vec<(f64, f64, Arc<SectorSpectrum>)>,
}

impl LineKernel {
    /// `max_distance` is the largest `|x - y|` to be evaluated; it sets the
    /// number of panels so each panel sees at most one oscillation.
    pub fn new(op: &ModelOperator, t: f64, max_distance: f64, tol: f64) -> Result<Self> {
        check_t(t)?;
        let panels = DEFAULT_BLOCH_PANELS.max(max_distance.abs().ceil() as usize);
        let k = modes_for_t(op, t, tol);
        let cache = SpectrumCache::new(op.clone(), k, true);
        let rule = |p: usize| -> Vec<(f64, f64, Arc<SectorSpectrum>)> {
            let nodes = composite_rule(0.0, 1.0, p, BLOCH_ORDER);
            let shifts: Vec<f64> = nodes.iter().map(|n| n.0).collect();
            let specs = cache.get_many(&shifts);
            nodes.into_iter().zip(specs).map(|((s, w), sp)| (s, w, sp)).collect()
        };
        Ok(LineKernel { op: op.clone(), t, coarse: rule(panels), fine: rule(2 * panels) })
    }

    /// `sum_j K(x, y + period j)` over `|j| <= translates`; a single
    /// evaluation when `translates = 0`.
    fn integrate(&self, nodes: &[(f64, f64, Arc<SectorSpectrum>)], x: f64, y: f64, period: f64, translates: u32) -> Vec<Complex64> {
        let nc = self.op.components;
        // u_j is 1-periodic, so G depends on x, y mod 1 only; the phase
        // carries the full separation.
        let parts: Vec<Vec<Complex64>> = nodes
            .par_iter()
            .map(|(s, w, spec)| {
                let ph: Complex64 = (-(translates as i64)..=translates as i64)
                    .map(|j| Complex64::from_polar(*w, TAU * s * (x - y - period * j as f64)))
                    .sum();
                sector_kernel(spec, self.t, x, y).into_iter().map(|g| g * ph).collect()
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); nc * nc];
        for p in parts {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out
    }

    pub fn eval(&self, x: f64, y: f64) -> KernelSample {
        self.eval_periodized(x, y, 0.0, 0)
    }

    /// `sum_{|j| <= translates} K(x, y + period j)` with one Bloch
    /// integral; the error is the fine/coarse difference of the sum plus
    /// the spectral tail of every term.
    pub fn eval_periodized(&self, x: f64, y: f64, period: f64, translates: u32) -> KernelSample {
        let fine = self.integrate(&self.fine, x, y, period, translates);
        let coarse = self.integrate(&self.coarse, x, y, period, translates);
        let quad_err = fine.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let tail: f64 = self.fine.iter().map(|(_, w, sp)| w * (sp.tail_bound(self.t) + rounding(sp, self.t))).sum();
        let terms = (2 * translates + 1) as f64;
        KernelSample { t: self.t, x, y, components: self.op.components, value: fine, error: quad_err + terms * tail }
    }
}

/// Kernel on a finite cover or on the line.
pub fn heat_kernel(op: &ModelOperator, cover: CoverSpec, t: f64, x: f64, y: f64, tol: f64) -> Result<KernelSample> {
    match cover {
        CoverSpec::Finite(n) => finite_kernel(op, n, t, x, y, tol),
        CoverSpec::Line => Ok(LineKernel::new(op, t, (x - y).abs(), tol)?.eval(x, y)),
    }
}

/// Result of folding the line kernel onto a finite cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSample {
    pub folded: KernelSample,
    /// Number of translates summed on each side.
    pub translates: u32,
    /// Envelope bound on the omitted translates.
    pub truncation_tail: f64,
}

/// `sum_{|j| <= J} K_line(x, y + n j)`, with the envelope tail beyond `J`.
/// `line_truncation = None` picks `J` from the envelope.
pub fn fold_kernel(
    op: &ModelOperator,
    n: u32,
    t: f64,
    x: f64,
    y: f64,
    line_truncation: Option<u32>,
    tol: f64,
) -> Result<FoldSample> {
    let translates = line_truncation.unwrap_or_else(|| fold_translates(op, n, t, x - y, tol));
    let lk = LineKernel::new(op, t, (x - y).abs() + n as f64 * translates as f64, tol)?;
    Ok(fold_with(&lk, op, n, t, x, y, translates))
}

/// Number of translates on each side after which the envelope of the
/// remaining terms drops below `tol * 1e-3`.
fn fold_translates(op: &ModelOperator, n: u32, t: f64, d0: f64, tol: f64) -> u32 {
    let nf = n as f64;
    let mut j = 1u32;
    while gaussian_envelope(op, DEFAULT_MU, t, (d0.abs() - nf * j as f64).abs().max(nf * j as f64 - d0.abs())) > tol * 1e-3 {
        j += 1;
    }
    j
}

fn fold_with(lk: &LineKernel, op: &ModelOperator, n: u32, t: f64, x: f64, y: f64, translates: u32) -> FoldSample {
    let nf = n as f64;
    let d0 = x - y;
    let summed = lk.eval_periodized(x, y, nf, translates);
    let mut truncation_tail = 0.0;
    for j in (translates as i64 + 1)..(translates as i64 + 1000) {
        let term = gaussian_envelope(op, DEFAULT_MU, t, d0 - nf * j as f64) + gaussian_envelope(op, DEFAULT_MU, t, d0 + nf * j as f64);
        truncation_tail += term;
        if term < 1e-300 {
            break;
        }
    }
    FoldSample {
        folded: KernelSample { error: summed.error + truncation_tail, ..summed },
        translates,
        truncation_tail,
    }
}

/// Max deviation between the folded line kernel and the cover kernel over
/// the sample points.
pub fn verify_folding(op: &ModelOperator, n: u32, t: f64, points: &[(f64, f64)], tol: f64) -> Result<f64> {
    let k = modes_for_t(op, t, tol);
    let cache = SpectrumCache::new(op.clone(), k, true);
    let translates: Vec<u32> = points.iter().map(|&(x, y)| fold_translates(op, n, t, x - y, tol)).collect();
    let max_d = points
        .iter()
        .zip(&translates)
        .map(|(&(x, y), &j)| (x - y).abs() + n as f64 * j as f64)
        .fold(0.0, f64::max);
    let lk = LineKernel::new(op, t, max_d, tol)?;
    let mut worst: f64 = 0.0;
    for (&(x, y), &j) in points.iter().zip(&translates) {
        let folded = fold_with(&lk, op, n, t, x, y, j);
        let direct = finite_kernel_cached(&cache, n, t, x, y)?;
        worst = worst.max(folded.folded.max_diff(&direct));
    }
    Ok(worst)
}

/// `sum_{|gamma| <= J} |K(x, y + gamma)|` maximised over a grid of
/// `(x, y)` in `[0, 1)^2`, with the envelope tail beyond `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Norm {
    pub value: f64,
    pub tail_bound: f64,
    pub quadrature_error: f64,
    pub truncation: u32,
}

pub fn l1_norm(op: &ModelOperator, t: f64, truncation: u32, grid: usize, tol: f64) -> Result<L1Norm> {
    if grid == 0 {
        return Err(Error::invalid("grid must be nonempty"));
    }
    let lk = LineKernel::new(op, t, truncation as f64 + 1.0, tol)?;
    let mut value: f64 = 0.0;
    let mut quadrature_error: f64 = 0.0;
    let mut tail_bound: f64 = 0.0;
    for ix in 0..grid {
        for iy in 0..grid {
            let (x, y) = (ix as f64 / grid as f64, iy as f64 / grid as f64);
            let mut sum = 0.0;
            let mut err = 0.0;
            for g in -(truncation as i64)..=truncation as i64 {
                let s = lk.eval(x, y + g as f64);
                sum += s.norm();
                err += s.error * (s.components as f64);
            }
            let mut tail = 0.0;
            for g in (truncation as i64 + 1)..(truncation as i64 + 1000) {
                let term = gaussian_envelope(op, DEFAULT_MU, t, x - y - g as f64) + gaussian_envelope(op, DEFAULT_MU, t, x - y + g as f64);
                tail += term;
                if term < 1e-300 {
                    break;
                }
            }
            value = value.max(sum);
            quadrature_error = quadrature_error.max(err);
            tail_bound = tail_bound.max(tail);
        }
    }
    Ok(L1Norm { value, tail_bound, quadrature_error, truncation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::operator::TrigTerm;

    /// Direct Fourier sum over the cover frequencies `2 pi (k/n + theta)`.
    fn direct_one_component(theta: f64, c: f64, n: u32, t: f64, x: f64, y: f64) -> Complex64 {
        let nf = n as f64;
        (-4000i64..=4000)
            .map(|k| {
                let lam = TAU * (k as f64 / nf + theta) + c;
                Complex64::from_polar(f_t(t, lam) / nf, TAU * k as f64 * (x - y) / nf)
            })
            .sum()
    }

    #[test]
    fn one_component_kernel_matches_direct_sum() {
        let op = ModelOperator::one_component(0.25, 0.0).unwrap();
        let k = finite_kernel(&op, 2, 1.0, 0.0, 1.0, 1e-13).unwrap();
        let want = direct_one_component(0.25, 0.0, 2, 1.0, 0.0, 1.0);
        assert!((k.value[0] - want).norm() < 1e-10);
        let op = ModelOperator::one_component(0.25, 0.7).unwrap();
        let k = finite_kernel(&op, 3, 0.4, 0.3, 2.2, 1e-13).unwrap();
        let want = direct_one_component(0.25, 0.7, 3, 0.4, 0.3, 2.2);
        assert!((k.value[0] - want).norm() < 1e-10);
    }

    #[test]
    fn one_component_line_kernel_closed_form() {
        let (theta, c) = (0.25, 0.3);
        let op = ModelOperator::one_component(theta, c).unwrap();
        let b = TAU * theta + c;
        for &(t, x, y) in &[(0.5f64, 0.1f64, 1.3f64), (1.0, 0.0, 2.0), (0.7, 0.4, 0.4)] {
            let lk = LineKernel::new(&op, t, (x - y).abs(), 1e-13).unwrap();
            let got = lk.eval(x, y);
            let d: f64 = x - y;
            let want = Complex64::from_polar(1.0, -b * d) * Complex64::new(0.0, d / (4.0 * PI.sqrt() * t.powi(3)))
                * (-d * d / (4.0 * t * t)).exp();
            assert!((got.value[0] - want).norm() < 1e-11, "{t} {x} {y}: {} vs {want}", got.value[0]);
        }
    }

    #[test]
    fn hermitian_symmetry_and_chirality() {
        let op = ModelOperator::two_component(1.0, 0.0, 0.25, vec![TrigTerm::parse("0.2cos1").unwrap()]).unwrap();
        for &(x, y) in &[(0.1, 0.7), (0.3, 2.9), (1.5, 0.2)] {
            let a = finite_kernel(&op, 3, 0.6, x, y, 1e-12).unwrap();
            let b = finite_kernel(&op, 3, 0.6, y, x, 1e-12).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a.entry(i, j) - b.entry(j, i).conj()).norm() < 1e-12);
                }
            }
            assert!(a.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn folding_matches_cover_kernel() {
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap();
        let dev = verify_folding(&op, 3, 1.0, &[(0.2, 0.9), (0.5, 2.1)], 1e-12).unwrap();
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn folding_is_transitive() {
        // Folding 4-cover kernels onto the 2-cover equals folding the line.
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap();
        let (t, x, y) = (0.8, 0.3, 0.6);
        let via4: Vec<Complex64> = {
            let a = finite_kernel(&op, 4, t, x, y, 1e-12).unwrap();
            let b = finite_kernel(&op, 4, t, x, y + 2.0, 1e-12).unwrap();
            a.value.iter().zip(&b.value).map(|(p, q)| p + q).collect()
        };
        let direct = fold_kernel(&op, 2, t, x, y, None, 1e-12).unwrap();
        let dev = via4.iter().zip(&direct.folded.value).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn l1_norm_is_finite_and_decreases_with_gap() {
        let a = l1_norm(&ModelOperator::two_component(1.0, 0.0, 0.0, vec![]).unwrap(), 1.0, 6, 3, 1e-10).unwrap();
        let b = l1_norm(&ModelOperator::two_component(2.0, 0.0, 0.0, vec![]).unwrap(), 1.0, 6, 3, 1e-10).unwrap();
        assert!(a.value.is_finite() && b.value <= a.value);
        let c = l1_norm(&ModelOperator::two_component(1.0, 0.0, 0.0, vec![]).unwrap(), 1.0, 12, 3, 1e-10).unwrap();
        assert!((c.value - a.value).abs() <= a.tail_bound + a.quadrature_error + 1e-12);
    }
}
