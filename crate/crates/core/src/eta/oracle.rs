//! Spectral-sum oracle for eta values on finite covers.
//!
//! Exchanging the t-integral with the spectral sum gives
//! `eta_a = sum_lambda sign(lambda) w_a(lambda)`, with
//! `w_a = exp(-2 pi i r a / n) / n` for eigenvalues of sector `r`. The sum
//! is only conditionally meaningful, so it is regularised by
//! `exp(-s lambda^2)` and extrapolated to `s = 0` from a decreasing grid.
//! The extrapolation model is `E(s) = eta + b1 s + b2 s^2` for the
//! 1-component family. In the 2-component family the pairs `c +- E` do not
//! cancel under the regulator and the mass produces an `s log s` term, so
//! the model is `E(s) = eta + b1 s log s + b2 s + b3 s^2` on a grid shifted
//! one decade towards zero.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::sector::{modes_for_window, sector_shift, SectorSpectrum, ZERO_MODE_TOL};
use crate::spectral::ModelOperator;

/// Default regularisation grid of the 1-component family.
pub const DEFAULT_S_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Default regularisation grid of the 2-component family.
pub const TWO_COMPONENT_S_GRID: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Default grid for an operator.
pub fn default_s_grid(op: &ModelOperator) -> [f64; 4] {
    if op.components == 2 {
        TWO_COMPONENT_S_GRID
    } else {
        DEFAULT_S_GRID
    }
}

/// Largest accepted gap between the full-model and reduced-model
/// extrapolants.
pub const CAUCHY_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub n: u32,
    pub class: i64,
    pub value: f64,
    pub imag: f64,
    /// `E(s)` on the grid (real and imaginary parts).
    pub regularized: Vec<(f64, f64, f64)>,
    /// Difference between the full-model and reduced-model extrapolants;
    /// used as the oracle's error estimate.
    pub cauchy_gap: f64,
    /// Closed form for 1-component operators.
    pub closed_form: Option<f64>,
    pub truncation_bound: f64,
}

impl OracleResult {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.value, self.imag)
    }
}

/// `eta(H(beta))` for the 1-component family: Abel summation of
/// `sum_q sign(2 pi (q + x)) exp(-eps |2 pi (q + x)|)` with
/// `x = {beta + c / 2 pi}` gives `1 - 2x`, and `0` at a zero mode.
pub fn one_component_sector_eta(beta: f64, c: f64) -> f64 {
    let x = (beta + c / TAU).rem_euclid(1.0);
    if x.min(1.0 - x) < 1e-12 {
        0.0
    } else {
        1.0 - 2.0 * x
    }
}

/// Closed-form class eta of a 1-component operator on the n-fold cover.
pub fn one_component_eta(op: &ModelOperator, n: u32, a: i64) -> Result<Complex64> {
    if op.components != 1 {
        return Err(Error::invalid("closed form applies to the 1-component family"));
    }
    if n == 0 {
        return Err(Error::invalid("cover degree must be positive"));
    }
    Ok((0..n)
        .map(|r| {
            let k = (r as i64 * a).rem_euclid(n as i64);
            let w = Complex64::from_polar(1.0 / n as f64, -TAU * k as f64 / n as f64);
            w * one_component_sector_eta(op.theta + sector_shift(n, r), op.c)
        })
        .sum())
}

/// Least-squares solution of `sum_k p_k phi_k(s_i) = e_i`; returns `p_0`.
fn extrapolate(points: &[(f64, f64)], basis: &[fn(f64) -> f64]) -> Result<f64> {
    let a = DMatrix::from_fn(points.len(), basis.len(), |i, k| basis[k](points[i].0));
    let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let sol = a.svd(true, true).solve(&b, 1e-300).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(sol[0])
}

fn spectrum_for(op: &ModelOperator, beta: f64, s_min: f64) -> (SectorSpectrum, usize) {
    // Terms with exp(-s lambda^2) < 1e-17 are dropped.
    let window = (39.0 / s_min).sqrt();
    let k = modes_for_window(op, window);
    let k = if op.has_potential() { k.max(16) } else { k };
    (SectorSpectrum::compute(op, beta, k, false), k)
}

/// `sum sign(lambda) exp(-s lambda^2)` over trusted nonzero eigenvalues.
fn regularized(spec: &SectorSpectrum, s: f64) -> f64 {
    spec.trusted().filter(|(_, l)| l.abs() > ZERO_MODE_TOL).map(|(_, l)| l.signum() * (-s * l * l).exp()).sum()
}

/// Regularised sector sums `E_r(s)` and the truncation bound (largest
/// change of any `E_r(s)` between `k` and `2k` modes; zero without a
/// potential, where eigenvalues are closed forms).
fn sector_sums(op: &ModelOperator, betas: &[f64], s_grid: &[f64]) -> Vec<(Vec<f64>, f64)> {
    let s_min = s_grid.iter().copied().fold(f64::INFINITY, f64::min);
    betas
        .par_iter()
        .map(|&beta| {
            let (spec, k) = spectrum_for(op, beta, s_min);
            let sums: Vec<f64> = s_grid.iter().map(|&s| regularized(&spec, s)).collect();
            let trunc = if op.has_potential() {
                let fine = SectorSpectrum::compute(op, beta, 2 * k, false);
                s_grid.iter().map(|&s| (regularized(&fine, s) - regularized(&spec, s)).abs()).fold(0.0, f64::max)
            } else {
                0.0
            };
            (sums, trunc)
        })
        .collect()
}

fn finish(
    op: &ModelOperator,
    n: u32,
    a: i64,
    s_grid: &[f64],
    combined: Vec<Complex64>,
    truncation_bound: f64,
    closed_form: Option<f64>,
) -> Result<OracleResult> {
    let mut pts: Vec<(f64, Complex64)> = s_grid.iter().copied().zip(combined).collect();
    pts.sort_by(|x, y| y.0.total_cmp(&x.0));
    let full: Vec<fn(f64) -> f64> = if op.components == 2 {
        vec![|_| 1.0, |s| s * s.ln(), |s| s, |s| s * s]
    } else {
        vec![|_| 1.0, |s| s, |s| s * s]
    };
    let p = full.len();
    if pts.len() < p {
        return Err(Error::invalid(format!("regularization grid needs at least {p} values")));
    }
    let tail_full = &pts[pts.len() - p..];
    let tail_reduced = &pts[pts.len() - (p - 1)..];
    let re = |v: &[(f64, Complex64)]| v.iter().map(|(s, z)| (*s, z.re)).collect::<Vec<_>>();
    let im = |v: &[(f64, Complex64)]| v.iter().map(|(s, z)| (*s, z.im)).collect::<Vec<_>>();
    let value = extrapolate(&re(tail_full), &full)?;
    let imag = extrapolate(&im(tail_full), &full)?;
    let reduced = &full[..p - 1];
    let value_r = extrapolate(&re(tail_reduced), reduced)?;
    let imag_r = extrapolate(&im(tail_reduced), reduced)?;
    let cauchy_gap = (value - value_r).hypot(imag - imag_r);
    if !(cauchy_gap <= CAUCHY_TOL) {
        return Err(Error::Numerical(format!(
            "regularized sums do not extrapolate consistently: {value} vs {value_r} (gap {cauchy_gap:.3e}); \
             E(s) = {:?}",
            pts.iter().map(|(s, z)| (s, z.re)).collect::<Vec<_>>()
        )));
    }
    Ok(OracleResult {
        n,
        class: a,
        value,
        imag,
        regularized: pts.iter().map(|(s, z)| (*s, z.re, z.im)).collect(),
        cauchy_gap,
        closed_form,
        truncation_bound,
    })
}

/// Regularised spectral sum for class `a` on the n-fold cover.
pub fn eta_spectral_oracle(op: &ModelOperator, n: u32, a: i64, s_grid: &[f64]) -> Result<OracleResult> {
    if n == 0 {
        return Err(Error::invalid("cover degree must be positive"));
    }
    if s_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("regularization parameters must be positive"));
    }
    let a = a.rem_euclid(n as i64);
    let betas: Vec<f64> = (0..n).map(|r| op.theta + sector_shift(n, r)).collect();
    let sums = sector_sums(op, &betas, s_grid);
    let combined: Vec<Complex64> = (0..s_grid.len())
        .map(|i| {
            sums.iter()
                .enumerate()
                .map(|(r, (e, _))| {
                    let k = (r as i64 * a).rem_euclid(n as i64);
                    Complex64::from_polar(1.0 / n as f64, -TAU * k as f64 / n as f64) * e[i]
                })
                .sum()
        })
        .collect();
    let truncation_bound = sums.iter().map(|(_, t)| t / n as f64).sum();
    let closed_form = if op.components == 1 { Some(one_component_eta(op, n, a)?.re) } else { None };
    finish(op, n, a, s_grid, combined, truncation_bound, closed_form)
}

/// Classical eta of the operator on the n-fold cover: the regularised
/// sum over all eigenvalues of all sectors, without class weights.
pub fn classical_eta(op: &ModelOperator, n: u32, s_grid: &[f64]) -> Result<OracleResult> {
    if n == 0 {
        return Err(Error::invalid("cover degree must be positive"));
    }
    let betas: Vec<f64> = (0..n).map(|r| op.theta + sector_shift(n, r)).collect();
    let sums = sector_sums(op, &betas, s_grid);
    let combined: Vec<Complex64> =
        (0..s_grid.len()).map(|i| Complex64::new(sums.iter().map(|(e, _)| e[i]).sum(), 0.0)).collect();
    let truncation_bound = sums.iter().map(|(_, t)| t).sum();
    let closed_form = if op.components == 1 {
        Some(betas.iter().map(|&b| one_component_sector_eta(b, op.c)).sum())
    } else {
        None
    };
    finish(op, n, 0, s_grid, combined, truncation_bound, closed_form)
}

/// Sector eta `-2c/pi` of a gapped potential-free 2-component operator,
/// the same for every Bloch parameter.
pub fn two_component_sector_eta(op: &ModelOperator) -> Option<f64> {
    (op.components == 2 && !op.has_potential() && op.c.abs() < op.m).then(|| -2.0 * op.c / PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_component_closed_form_values() {
        assert_eq!(one_component_sector_eta(0.25, 0.0), 0.5);
        assert_eq!(one_component_sector_eta(0.0, 0.0), 0.0);
        let op = ModelOperator::one_component(0.25, 0.0).unwrap();
        // n = 4 has the sector beta = 1 with a zero mode.
        let e = one_component_eta(&op, 4, 0).unwrap();
        assert!((e.re - (0.5 + 0.0 - 0.5 + 0.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_matches_closed_form() {
        let op = ModelOperator::one_component(0.25, 0.0).unwrap();
        for n in 1..=4u32 {
            for a in 0..n as i64 {
                let r = eta_spectral_oracle(&op, n, a, &DEFAULT_S_GRID).unwrap();
                let cf = one_component_eta(&op, n, a).unwrap();
                assert!((r.complex() - cf).norm() < 1e-6, "n={n} a={a}: {:?} vs {cf}", r.complex());
            }
        }
    }

    #[test]
    fn two_component_pairs() {
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap();
        let grid = default_s_grid(&op);
        let r = eta_spectral_oracle(&op, 3, 1, &grid).unwrap();
        assert!(r.complex().norm() < 1e-7, "{r:?}");
        let base = eta_spectral_oracle(&op, 1, 0, &grid).unwrap();
        assert!((base.value + 0.6 / PI).abs() < 1e-7, "{base:?}");
        let cl = classical_eta(&op, 3, &grid).unwrap();
        assert!((cl.value + 3.0 * 0.6 / PI).abs() < 1e-7);
    }
}
