//! Gauss-Legendre quadrature and the special functions used by tail bounds.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared cached rule.
    pub fn cached(n: usize) -> std::sync::Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        cache
            .lock()
            .unwrap()
            .entry(n)
            .or_insert_with(|| std::sync::Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (h, m) = (0.5 * (b - a), 0.5 * (b + a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (m + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes and weights of a composite rule: `panels` equal panels on `[a, b]`
/// with `order` points each.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::cached(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let lo = a + h * p as f64;
            gl.mapped(lo, lo + h).collect::<Vec<_>>()
        })
        .collect()
}

/// Result of an adaptive integration.
#[derive(Clone, Debug, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    /// Sum over accepted panels of the difference between the `n`- and
    /// `2n`-point rules.
    pub error: f64,
    pub panels: usize,
    pub evaluations: usize,
}

/// Panel limit of the adaptive integrators.
pub const MAX_PANELS: usize = 100_000;

/// Vector-valued adaptive Gauss-Legendre integration on `[a, b]`.
///
/// Each panel is integrated with an `order`-point and a `2*order`-point
/// rule; the panel is accepted when the max-norm difference is below
/// `tol * (b_panel - a_panel) / (b - a)`, or at the rounding level of the
/// panel sum, and bisected otherwise. The
/// integrand is evaluated on a whole batch of nodes at once so callers can
/// parallelise and cache.
pub fn adaptive_gl_vec(
    a: f64,
    b: f64,
    order: usize,
    tol: f64,
    max_depth: u32,
    dim: usize,
    f: &(dyn Fn(&[f64]) -> Vec<Vec<f64>> + Sync),
) -> Result<Integral<Vec<f64>>> {
    if !(b > a) {
        return Err(Error::invalid(format!("empty interval [{a}, {b}]")));
    }
    let lo = GaussLegendre::cached(order);
    let hi = GaussLegendre::cached(2 * order);
    let mut stack = vec![(a, b, 0u32)];
    let mut value = vec![0.0; dim];
    let mut error = 0.0;
    let mut panels = 0;
    let mut evaluations = 0;
    while let Some((pa, pb, depth)) = stack.pop() {
        if panels + stack.len() > MAX_PANELS {
            return Err(Error::Numerical(format!("adaptive quadrature on [{a}, {b}] exceeded {MAX_PANELS} panels")));
        }
        let xs: Vec<f64> = lo.mapped(pa, pb).map(|p| p.0).chain(hi.mapped(pa, pb).map(|p| p.0)).collect();
        let vals = f(&xs);
        evaluations += xs.len();
        let mut i_lo = vec![0.0; dim];
        let mut i_hi = vec![0.0; dim];
        for (k, (_, w)) in lo.mapped(pa, pb).enumerate() {
            for d in 0..dim {
                i_lo[d] += w * vals[k][d];
            }
        }
        for (k, (_, w)) in hi.mapped(pa, pb).enumerate() {
            for d in 0..dim {
                i_hi[d] += w * vals[lo.len() + k][d];
            }
        }
        let diff = i_lo.iter().zip(&i_hi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        // Differences at the rounding level of the panel sum cannot be
        // reduced by bisection.
        let mut magnitude = 0.0f64;
        for d in 0..dim {
            let m: f64 = hi.mapped(pa, pb).enumerate().map(|(k, (_, w))| (w * vals[lo.len() + k][d]).abs()).sum();
            magnitude = magnitude.max(m);
        }
        let budget = (tol * (pb - pa) / (b - a)).max(256.0 * f64::EPSILON * magnitude);
        // At the depth limit a panel is still accepted when its difference
        // fits the whole budget; the difference is reported in `error`.
        if diff <= budget || depth >= max_depth {
            if diff > tol {
                return Err(Error::Numerical(format!(
                    "adaptive quadrature did not converge on [{pa}, {pb}] (difference {diff:.3e})"
                )));
            }
            for d in 0..dim {
                value[d] += i_hi[d];
            }
            error += diff;
            panels += 1;
        } else {
            let mid = 0.5 * (pa + pb);
            // Push right first so panels are accepted left to right.
            stack.push((mid, pb, depth + 1));
            stack.push((pa, mid, depth + 1));
        }
    }
    Ok(Integral { value, error, panels, evaluations })
}

/// Scalar adaptive Gauss-Legendre integration.
pub fn adaptive_gl(a: f64, b: f64, order: usize, tol: f64, f: impl Fn(f64) -> f64 + Sync) -> Result<Integral<f64>> {
    let r = adaptive_gl_vec(a, b, order, tol, 40, 1, &|xs: &[f64]| xs.iter().map(|&x| vec![f(x)]).collect())?;
    Ok(Integral { value: r.value[0], error: r.error, panels: r.panels, evaluations: r.evaluations })
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

/// Upper incomplete gamma `Gamma(s, x)` for `s > 0`.
pub fn upper_gamma(s: f64, x: f64) -> f64 {
    statrs::function::gamma::gamma_ur(s, x) * statrs::function::gamma::gamma(s)
}

/// `int_T^inf t^(-m) exp(-g^2 t^2) dt` for `g > 0`, `T > 0`.
///
/// With `u = g^2 t^2` this is `g^(m-1) / 2 * Gamma((1-m)/2, g^2 T^2)` when
/// `m < 1`. For `m >= 1` the factor `t^(-m) <= T^(-m)` reduces it to the
/// Gaussian tail `T^(-m) sqrt(pi) / (2g) erfc(g T)`, an upper bound.
pub fn gaussian_power_tail(g: f64, m: f64, t: f64) -> f64 {
    if m < 1.0 {
        let s = 0.5 * (1.0 - m);
        0.5 * g.powf(m - 1.0) * upper_gamma(s, g * g * t * t)
    } else {
        t.powf(-m) * std::f64::consts::PI.sqrt() / (2.0 * g) * erfc(g * t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 33] {
            let gl = GaussLegendre::new(n);
            let total: f64 = gl.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let got = gl.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((got - exact).abs() < 1e-12, "n={n}");
            let got = gl.integrate(0.0, 1.0, |x| x.powi(2 * n as i32 - 2));
            assert!((got - 1.0 / (2 * n - 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let r = adaptive_gl(0.0, 10.0, 8, 1e-12, |x| (-(x - 3.0f64).powi(2) * 50.0).exp()).unwrap();
        let exact = (std::f64::consts::PI / 50.0).sqrt();
        assert!((r.value - exact).abs() < 1e-11);
    }

    #[test]
    fn gaussian_tail_matches_direct_integration() {
        for &(g, m, t) in &[(0.7, 0.0, 2.0), (1.3, 0.5, 1.0), (0.9, -1.0, 1.5)] {
            let direct = adaptive_gl(t, t + 40.0 / g, 16, 1e-14, |x| x.powf(-m) * (-g * g * x * x).exp()).unwrap();
            let tail = gaussian_power_tail(g, m, t);
            assert!((direct.value - tail).abs() < 1e-12 * (1.0 + tail), "{g} {m} {t}");
        }
        let bound = gaussian_power_tail(1.0, 2.0, 1.0);
        let direct = adaptive_gl(1.0, 40.0, 16, 1e-14, |x| x.powi(-2) * (-x * x).exp()).unwrap();
        assert!(bound >= direct.value);
    }
}
