//! Exponential growth rates and the spectral-gap thresholds built on them.

use serde::{Deserialize, Serialize};

use super::bfs::{class_sphere_counts_within, sphere_sizes_within, DEFAULT_BFS_BUDGET};
use super::conj::ConjClass;
use super::quotient::{separation_rate, QuotientTower, SeparationReport};
use super::FinGenGroup;
use crate::error::{Error, Result};

/// Default slope below which growth is reported as subexponential.
pub const DEFAULT_SUBEXP_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub(crate) fn ols(pts: &[(f64, f64)]) -> Option<LineFit> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Some(LineFit { slope, intercept, rms })
}

/// Fit of `ln count` against the radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Reported rate, `0` when the data look subexponential.
    pub rate: f64,
    /// Raw least-squares slope of `ln count` against `n`.
    pub slope: f64,
    /// RMS residual of the exponential model.
    pub residual: f64,
    /// RMS residual of the power-law model `ln count` against `ln n`.
    pub power_residual: f64,
    pub subexponential: bool,
    pub window: (u32, u32),
}

/// Estimates the exponential growth rate of `counts` (pairs `(n, count)`).
///
/// Both an exponential model (`ln c` linear in `n`) and a power law (`ln c`
/// linear in `ln n`) are fitted. The rate is reported as `0` when the raw
/// slope is below `threshold` or when the power law fits better.
pub fn estimate_growth_rate(counts: &[(u32, u64)], threshold: f64) -> Result<GrowthFit> {
    if counts.len() < 3 {
        return Err(Error::invalid(format!("growth fit needs at least 3 points, got {}", counts.len())));
    }
    if counts.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
        return Err(Error::invalid("growth data must have increasing radii and nondecreasing counts"));
    }
    if counts[0].1 == 0 {
        // Leading zeros carry no rate information; drop them.
        let rest: Vec<_> = counts.iter().copied().filter(|c| c.1 > 0).collect();
        if rest.len() < 3 {
            return Ok(GrowthFit {
                rate: 0.0,
                slope: 0.0,
                residual: 0.0,
                power_residual: 0.0,
                subexponential: true,
                window: (counts[0].0, counts[counts.len() - 1].0),
            });
        }
        return estimate_growth_rate(&rest, threshold);
    }
    let window = (counts[0].0, counts[counts.len() - 1].0);
    let exp_pts: Vec<(f64, f64)> = counts.iter().map(|&(n, c)| (n as f64, (c as f64).ln())).collect();
    let exp = ols(&exp_pts).ok_or_else(|| Error::invalid("degenerate growth window"))?;
    let pow_pts: Vec<(f64, f64)> = counts
        .iter()
        .filter(|c| c.0 > 0)
        .map(|&(n, c)| ((n as f64).ln(), (c as f64).ln()))
        .collect();
    let power_residual = ols(&pow_pts).map_or(f64::INFINITY, |f| f.rms);
    let subexponential = exp.slope < threshold || power_residual < exp.rms;
    Ok(GrowthFit {
        rate: if subexponential { 0.0 } else { exp.slope },
        slope: exp.slope,
        residual: exp.rms,
        power_residual,
        subexponential,
        window,
    })
}

/// The thresholds `sigma_Gamma`, `sigma_u`, `sigma_R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigmas {
    pub sigma_gamma: f64,
    pub sigma_u: f64,
    pub sigma_r: f64,
}

/// `sigma_Gamma = 2 K_Gamma / theta0`, `sigma_u = 2 K_u / theta0`,
/// `sigma_R = 2 sqrt(K_Gamma R) / theta0`.
pub fn sigma_constants(k_gamma: f64, k_u: f64, r: f64, theta0: f64) -> Result<Sigmas> {
    if !(theta0 > 0.0) {
        return Err(Error::invalid(format!("theta0 must be positive, got {theta0}")));
    }
    if [k_gamma, k_u, r].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("growth constants and rates must be nonnegative"));
    }
    Ok(Sigmas {
        sigma_gamma: 2.0 * k_gamma / theta0,
        sigma_u: 2.0 * k_u / theta0,
        sigma_r: 2.0 * (k_gamma * r).sqrt() / theta0,
    })
}

/// Growth and distortion constants of a group acting on a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub k_gamma: f64,
    pub k_class: Option<f64>,
    pub k_u: Option<f64>,
    pub theta0: f64,
    pub theta1: f64,
    pub c0: f64,
    pub c1: f64,
    pub sigma_gamma: f64,
    pub sigma_u: Option<f64>,
    pub sigma_r: Option<f64>,
    pub rate_r: Option<f64>,
    pub fit_window: (u32, u32),
    pub ball_counts: Vec<u64>,
    pub ball_fit: GrowthFit,
    pub class_counts: Option<Vec<u64>>,
    pub class_fit: Option<GrowthFit>,
    pub uniform_counts: Option<Vec<u64>>,
    pub uniform_fit: Option<GrowthFit>,
    pub separation: Option<SeparationReport>,
}

/// Options for [`group_constants`].
#[derive(Clone, Debug)]
pub struct ConstantsOptions {
    pub radius: u32,
    pub theta0: f64,
    pub theta1: f64,
    pub c0: f64,
    pub c1: f64,
    pub threshold: f64,
    /// Radius cap for injective radii in the separation fit.
    pub separation_cap: u32,
    /// Element budget of each Cayley-ball enumeration.
    pub bfs_budget: usize,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        ConstantsOptions {
            radius: super::bfs::DEFAULT_RADIUS_CAP,
            theta0: 1.0,
            theta1: 1.0,
            c0: 0.0,
            c1: 0.0,
            threshold: DEFAULT_SUBEXP_THRESHOLD,
            separation_cap: 8,
            bfs_budget: DEFAULT_BFS_BUDGET,
        }
    }
}

/// Fit window used for a radius `r`: `[r/3, r]`.
pub fn fit_window(radius: u32) -> (u32, u32) {
    ((radius / 3).max(1), radius)
}

fn cumulative(spheres: &[u64]) -> Vec<u64> {
    spheres
        .iter()
        .scan(0u64, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect()
}

fn windowed(balls: &[u64], window: (u32, u32)) -> Vec<(u32, u64)> {
    (window.0..=window.1).map(|n| (n, balls[n as usize])).collect()
}

/// Computes `K_Gamma` and, when a class is given, `K_<alpha>`; with a tower,
/// also `K_u` and the separation rate `R`.
pub fn group_constants(
    group: &FinGenGroup,
    class: Option<&ConjClass>,
    tower: Option<&QuotientTower>,
    opts: &ConstantsOptions,
) -> Result<GrowthConstants> {
    if !(opts.theta0 > 0.0) || opts.theta1 < opts.theta0 {
        return Err(Error::invalid("need 0 < theta0 <= theta1"));
    }
    if opts.radius < 3 {
        return Err(Error::invalid("growth fits need radius at least 3"));
    }
    let window = fit_window(opts.radius);
    let ball_counts = cumulative(&sphere_sizes_within(group, opts.radius, opts.bfs_budget)?);
    let ball_fit = estimate_growth_rate(&windowed(&ball_counts, window), opts.threshold)?;

    let (class_counts, class_fit) = match class {
        Some(c) => {
            let counts = cumulative(&class_sphere_counts_within(group, c, opts.radius, opts.bfs_budget)?);
            let fit = estimate_growth_rate(&windowed(&counts, window), opts.threshold)?;
            (Some(counts), Some(fit))
        }
        None => (None, None),
    };

    let (uniform_counts, uniform_fit, separation) = match (class, tower) {
        (Some(c), Some(t)) => {
            let mut max_counts = vec![0u64; opts.radius as usize + 1];
            for q in &t.quotients {
                let counts = cumulative(&q.class(c.representative())?.sphere_counts(opts.radius)?);
                for (m, v) in max_counts.iter_mut().zip(counts) {
                    *m = (*m).max(v);
                }
            }
            let fit = estimate_growth_rate(&windowed(&max_counts, window), opts.threshold)?;
            let sep = separation_rate(t, c, opts.separation_cap)?;
            (Some(max_counts), Some(fit), Some(sep))
        }
        _ => (None, None, None),
    };

    let k_gamma = ball_fit.rate;
    let k_u = uniform_fit.as_ref().map(|f| f.rate);
    let rate_r = separation.as_ref().map(|s| s.rate);
    let sig = sigma_constants(k_gamma, k_u.unwrap_or(0.0), rate_r.unwrap_or(0.0), opts.theta0)?;
    Ok(GrowthConstants {
        k_gamma,
        k_class: class_fit.as_ref().map(|f| f.rate),
        k_u,
        theta0: opts.theta0,
        theta1: opts.theta1,
        c0: opts.c0,
        c1: opts.c1,
        sigma_gamma: sig.sigma_gamma,
        sigma_u: k_u.map(|_| sig.sigma_u),
        sigma_r: rate_r.map(|_| sig.sigma_r),
        rate_r,
        fit_window: window,
        ball_counts,
        ball_fit,
        class_counts,
        class_fit,
        uniform_counts,
        uniform_fit,
        separation,
    })
}
