//! Empirical dominating functions for kernel traces.
//!
//! Three bounds are fitted to sampled `|tr K_t(x, x + a)|` and `|tr_a(t)|`:
//! a large-time bound `c t^-m exp(-eps^2 t^2)` on `t >= 1`, a small-time
//! bound `c t^-m exp(-eps / t^2)` on `t <= 1` for `a != 0`, and the
//! Gaussian off-diagonal envelope of [`gaussian_envelope`]. The exponents
//! come from a least-squares fit of the logarithms; the prefactor is then
//! raised to the largest sample ratio, so the fitted curves dominate every
//! sample by construction and the reported margins are nonnegative.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::kernel::{envelope_sum, finite_kernel, gaussian_envelope, LineKernel, KernelSample};
use super::operator::{CoverSpec, ModelOperator};
use super::trace::{line_gap, TraceSampler};
use crate::error::{Error, Result};

/// Samples below this magnitude carry no decay information.
const FLOOR: f64 = 1e-280;

/// Tolerance used for spectra and kernels in the decay check.
const TOL: f64 = 1e-13;

/// One sampled magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub t: f64,
    pub class: i64,
    /// `None` for delocalized traces, `Some(x)` for kernel traces at `(x, x + a)`.
    pub x: Option<f64>,
    pub magnitude: f64,
}

/// `c t^-m exp(-eps^2 t^2)` (large `t`) or `c t^-m exp(-eps / t^2)` (small `t`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub c: f64,
    pub m: f64,
    pub eps: f64,
    /// Smallest `bound - sample` over the fitted samples.
    pub min_margin: f64,
    pub samples: usize,
}

/// Off-diagonal ratio check `|K(x, x + 3)| / |K(x, x + 1)|` at one `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSlope {
    pub t: f64,
    pub mu: f64,
    pub ratio: f64,
    /// `3 exp(-(9 - 1) / (4 mu t^2))` times the envelope's polynomial ratio.
    pub bound: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub cover: CoverSpec,
    pub gap: f64,
    pub large_t: Option<BoundFit>,
    pub small_t: Option<BoundFit>,
    pub gaussian: Vec<GaussianSlope>,
    /// Smallest `envelope - |K|` over the kernel samples.
    pub envelope_margin: f64,
    pub samples: Vec<DecaySample>,
}

impl DecayFit {
    pub fn min_margin(&self) -> f64 {
        [self.large_t.as_ref().map(|f| f.min_margin), self.small_t.as_ref().map(|f| f.min_margin)]
            .into_iter()
            .flatten()
            .chain(self.gaussian.iter().map(|g| g.margin))
            .chain(std::iter::once(self.envelope_margin))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Least-squares fit `ln y = p0 + p1 u + p2 w`.
fn fit3(rows: &[(f64, f64, f64)]) -> Option<(f64, f64, f64)> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(u, w, ly) in rows {
        let r = Vector3::new(1.0, u, w);
        ata += r * r.transpose();
        atb += r * ly;
    }
    let sol = ata.lu().solve(&atb)?;
    Some((sol[0], sol[1], sol[2]))
}

/// Fits `c t^-m exp(-k g(t))`; `g` is `t^2` or `t^-2`. Returns `(c, m, k)`
/// with `c` raised so every sample lies on or under the curve.
fn fit_bound(samples: &[(f64, f64)], g: impl Fn(f64) -> f64) -> Option<(f64, f64, f64)> {
    let pts: Vec<&(f64, f64)> = samples.iter().filter(|(_, y)| *y > FLOOR).collect();
    let mut ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let (m, k) = if ts.len() >= 3 {
        let rows: Vec<(f64, f64, f64)> = pts.iter().map(|&&(t, y)| (-t.ln(), -g(t), y.ln())).collect();
        let (_, m, k) = fit3(&rows)?;
        (m, k.max(0.0))
    } else if !pts.is_empty() {
        (0.0, 0.0)
    } else {
        return None;
    };
    let shape = |t: f64| t.powf(-m) * (-k * g(t)).exp();
    let c = pts.iter().map(|&&(t, y)| y / shape(t)).fold(0.0, f64::max) * (1.0 + 1e-12);
    Some((c, m, k))
}

fn finish(samples: &[(f64, f64)], c: f64, m: f64, eps: f64, shape: impl Fn(f64) -> f64) -> BoundFit {
    let min_margin = samples.iter().map(|&(t, y)| c * t.powf(-m) * shape(t) - y).fold(f64::INFINITY, f64::min);
    BoundFit { c, m, eps, min_margin, samples: samples.len() }
}

fn kernel_at(op: &ModelOperator, cover: CoverSpec, line: Option<&LineKernel>, t: f64, x: f64, a: i64) -> Result<KernelSample> {
    match (cover, line) {
        (CoverSpec::Line, Some(lk)) => Ok(lk.eval(x, x + a as f64)),
        (CoverSpec::Finite(n), _) => finite_kernel(op, n, t, x, x + a as f64, TOL),
        (CoverSpec::Line, None) => Err(Error::invalid("line kernel evaluator missing")),
    }
}

/// Samples kernel traces and delocalized traces over the grids and fits
/// the dominating functions.
pub fn decay_check(op: &ModelOperator, cover: CoverSpec, t_grid: &[f64], a_grid: &[i64], mu: f64) -> Result<DecayFit> {
    if !(mu > 1.0) {
        return Err(Error::invalid(format!("mu must exceed 1, got {mu}")));
    }
    if t_grid.is_empty() || a_grid.is_empty() {
        return Err(Error::invalid("decay grids must be nonempty"));
    }
    if t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("times must be positive"));
    }
    if cover == CoverSpec::Line && a_grid.contains(&0) {
        return Err(Error::Unsupported("identity class on the line is disabled".into()));
    }
    let gap = match cover {
        CoverSpec::Line => line_gap(op, 256)?,
        CoverSpec::Finite(_) => TraceSampler::new(op, cover, 1.0, TOL)?.gap(),
    };
    let t_lo = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let sampler = TraceSampler::new(op, cover, t_lo, TOL)?;
    let xs = [0.0, 1.0 / 3.0, 2.0 / 3.0];
    let a_max = a_grid.iter().map(|a| a.unsigned_abs()).max().unwrap_or(0).max(3) as f64;

    let mut samples = Vec::new();
    let mut envelope_margin = f64::INFINITY;
    let mut gaussian = Vec::new();
    for &t in t_grid {
        for (&a, v) in a_grid.iter().zip(sampler.traces(t, a_grid)) {
            samples.push(DecaySample { t, class: a, x: None, magnitude: v.norm() });
        }
        let lk = LineKernel::new(op, t, a_max + 1.0, TOL)?;
        let line = (cover == CoverSpec::Line).then_some(&lk);
        for &a in a_grid {
            for &x in &xs {
                let k = kernel_at(op, cover, line, t, x, a)?;
                samples.push(DecaySample { t, class: a, x: Some(x), magnitude: k.trace().norm() });
                if a != 0 {
                    let env = match cover {
                        CoverSpec::Line => gaussian_envelope(op, mu, t, a as f64),
                        CoverSpec::Finite(n) => envelope_sum(op, mu, t, a as f64, n as f64, false),
                    };
                    envelope_margin = envelope_margin.min(env - (k.norm() - k.error).max(0.0));
                }
            }
        }
        // Off-diagonal ratio on the line kernel, with error bars moving it
        // towards its certified lower end.
        let (s1, s3) = (lk.eval(0.0, 1.0), lk.eval(0.0, 3.0));
        let k1 = s1.norm() + s1.error;
        let k3 = (s3.norm() - s3.error).max(0.0);
        if s1.norm() > 1e3 * s1.error {
            let sp = std::f64::consts::PI.sqrt();
            let big_m = op.zeroth_order_bound();
            let poly = (3.0 / (4.0 * sp * t.powi(3)) + big_m / (2.0 * sp * t)) / (1.0 / (4.0 * sp * t.powi(3)) + big_m / (2.0 * sp * t));
            let bound = poly.max(3.0) * (-(9.0 - 1.0) / (4.0 * mu * t * t)).exp();
            let ratio = k3 / k1;
            gaussian.push(GaussianSlope { t, mu, ratio, bound, margin: bound - ratio });
        }
    }

    let large: Vec<(f64, f64)> = samples.iter().filter(|s| s.t >= 1.0).map(|s| (s.t, s.magnitude)).collect();
    let small: Vec<(f64, f64)> = samples.iter().filter(|s| s.t <= 1.0 && s.class != 0).map(|s| (s.t, s.magnitude)).collect();
    let large_t = fit_bound(&large, |t| t * t).map(|(c, m, k)| finish(&large, c, m, k.sqrt(), |t| (-k * t * t).exp()));
    let small_t = fit_bound(&small, |t| 1.0 / (t * t)).map(|(c, m, k)| finish(&small, c, m, k, |t| (-k / (t * t)).exp()));

    let fit = DecayFit { cover, gap, large_t, small_t, gaussian, envelope_margin, samples };
    if fit.envelope_margin < 0.0 {
        return Err(Error::Numerical(format!("kernel sample exceeds the Gaussian envelope by {:.3e}", -fit.envelope_margin)));
    }
    if let Some(g) = fit.gaussian.iter().find(|g| g.margin < 0.0) {
        return Err(Error::Numerical(format!(
            "off-diagonal ratio {:.3e} exceeds {:.3e} at t = {}",
            g.ratio, g.bound, g.t
        )));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::operator::TrigTerm;

    fn op(c: f64) -> ModelOperator {
        ModelOperator::two_component(1.0, c, 0.25, vec![TrigTerm::parse("0.2cos1").unwrap()]).unwrap()
    }

    #[test]
    fn large_time_rate_reaches_the_gap() {
        let grid: Vec<f64> = (0..=10).map(|i| 1.0 + 0.5 * i as f64).collect();
        let fit = decay_check(&op(0.3), CoverSpec::Line, &grid, &[1, 2], 1.5).unwrap();
        let large = fit.large_t.unwrap();
        assert!(large.eps >= 0.95 * fit.gap, "{} vs {}", large.eps, fit.gap);
        assert!(large.min_margin >= 0.0);
    }

    #[test]
    fn small_time_gaussian_bound() {
        let grid = [0.1, 0.15, 0.2, 0.3, 0.5, 0.7, 1.0];
        let fit = decay_check(&op(0.3), CoverSpec::Finite(4), &grid, &[1, 2, 3], 1.5).unwrap();
        let small = fit.small_t.unwrap();
        assert!(small.eps > 0.0 && small.min_margin >= 0.0);
        assert!(fit.envelope_margin >= 0.0);
        assert!(fit.gaussian.iter().all(|g| g.margin >= 0.0));
    }

    #[test]
    fn chiral_operator_has_zero_traces() {
        let fit = decay_check(&op(0.0), CoverSpec::Finite(3), &[0.5, 1.0, 2.0], &[0, 1], 1.5).unwrap();
        assert!(fit.samples.iter().all(|s| s.magnitude < 1e-12));
        assert!(fit.min_margin() >= 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(decay_check(&op(0.3), CoverSpec::Line, &[1.0], &[1], 1.0).is_err());
        assert!(decay_check(&op(0.3), CoverSpec::Line, &[], &[1], 1.5).is_err());
    }
}
