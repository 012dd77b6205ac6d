//! Spectra of the sector operators `H(beta)` in a truncated Fourier basis.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::ModelOperator;
use crate::error::{Error, Result};

/// Eigen-decomposition of one sector operator.
///
/// Modes are `q = q0 - k ..= q0 + k` with `q0 = -round(beta)`, so the
/// unperturbed frequencies `2 pi (q + beta)` are centred on zero. Basis
/// index `i * components + s` holds spinor component `s` of mode `modes[i]`.
#[derive(Clone, Debug)]
pub struct SectorSpectrum {
    pub beta: f64,
    pub components: usize,
    pub modes: Vec<i64>,
    /// All eigenvalues of the truncated operator, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues with `|lambda| <= trust` are those of the untruncated
    /// operator; the rest are discarded by every consumer.
    pub trust: f64,
    /// Eigenvectors as columns, when requested.
    pub vectors: Option<DMatrix<Complex64>>,
    /// Weyl shift `m + |c| + sup|v|` used in tail bounds.
    weyl: f64,
}

/// Zero modes are eigenvalues with `|lambda|` below this.
pub const ZERO_MODE_TOL: f64 = 1e-8;

impl SectorSpectrum {
    pub fn compute(op: &ModelOperator, beta: f64, k: usize, with_vectors: bool) -> Self {
        let q0 = -(beta.round() as i64);
        let modes: Vec<i64> = (q0 - k as i64..=q0 + k as i64).collect();
        let nc = op.components;
        let weyl = if nc == 1 { op.c.abs() } else { op.weyl_shift() };
        // Frequencies of omitted modes exceed 2 pi (k + 1/2).
        let edge = TAU * (k as f64 + 0.5);
        if !op.has_potential() {
            let (eigenvalues, vectors) = closed_form(op, beta, &modes, with_vectors);
            return SectorSpectrum { beta, components: nc, modes, eigenvalues, trust: edge - weyl, vectors, weyl };
        }
        let h = sector_matrix(op, beta, &modes);
        // Eigenvalues near the truncation edge feel the cut; keep the inner half.
        let trust = 0.5 * edge - weyl;
        let real = h.iter().all(|z| z.im == 0.0);
        let (mut eigenvalues, vectors): (Vec<f64>, Option<DMatrix<Complex64>>) = match (real, with_vectors) {
            (true, false) => (h.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect(), None),
            (false, false) => (h.symmetric_eigenvalues().iter().copied().collect(), None),
            (true, true) => {
                let e = h.map(|z| z.re).symmetric_eigen();
                (e.eigenvalues.iter().copied().collect(), Some(e.eigenvectors.map(|x| Complex64::new(x, 0.0))))
            }
            (false, true) => {
                let e = h.symmetric_eigen();
                (e.eigenvalues.iter().copied().collect(), Some(e.eigenvectors))
            }
        };
        let vectors = match vectors {
            Some(v) => {
                let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
                order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
                let sorted = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, order[j])]);
                eigenvalues = order.iter().map(|&i| eigenvalues[i]).collect();
                Some(sorted)
            }
            None => {
                eigenvalues.sort_by(f64::total_cmp);
                None
            }
        };
        SectorSpectrum { beta, components: nc, modes, eigenvalues, trust, vectors, weyl }
    }

    /// Indices of eigenvalues in the trusted window.
    pub fn trusted(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let trust = self.trust;
        self.eigenvalues.iter().copied().enumerate().filter(move |(_, l)| l.abs() <= trust)
    }

    pub fn trusted_eigenvalues(&self) -> Vec<f64> {
        self.trusted().map(|(_, l)| l).collect()
    }

    /// Smallest `|lambda|` above the zero-mode tolerance.
    pub fn gap(&self) -> f64 {
        self.trusted()
            .map(|(_, l)| l.abs())
            .filter(|l| *l > ZERO_MODE_TOL)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn zero_modes(&self) -> usize {
        self.trusted().filter(|(_, l)| l.abs() <= ZERO_MODE_TOL).count()
    }

    /// `Tr f_t(H) = sum lambda exp(-t^2 lambda^2)` over the trusted window.
    pub fn trace_f(&self, t: f64) -> f64 {
        let t2 = t * t;
        self.trusted().map(|(_, l)| l * (-t2 * l * l).exp()).sum()
    }

    /// Unperturbed absolute frequencies `|2 pi (q + beta)|` of modes that may
    /// carry eigenvalues outside the trusted window, each with multiplicity
    /// `components`, in increasing order until `limit`.
    fn outside_frequencies(&self, limit: f64) -> Vec<f64> {
        let lo = (self.trust - self.weyl).max(0.0);
        let mut out = Vec::new();
        let q0 = -(self.beta.round() as i64);
        let mut j = 0i64;
        loop {
            let mut any = false;
            for q in [q0 + j, q0 - j - 1] {
                let xi = (TAU * (q as f64 + self.beta)).abs();
                if xi <= limit {
                    any = true;
                    if xi > lo {
                        out.push(xi);
                    }
                }
            }
            if !any && TAU * (j as f64 - 1.0) > limit {
                break;
            }
            j += 1;
        }
        out
    }

    /// Bound on `sum |lambda| exp(-t^2 lambda^2)` over eigenvalues of the
    /// untruncated operator outside the trusted window.
    pub fn tail_bound(&self, t: f64) -> f64 {
        let peak = 1.0 / (t * std::f64::consts::SQRT_2);
        let phi = |x: f64| x * (-t * t * x * x).exp();
        let limit = self.trust + self.weyl + 40.0 / t;
        self.outside_frequencies(limit)
            .iter()
            .map(|&xi| {
                let x = (xi - self.weyl).max(self.trust);
                let v = if x >= peak { phi(x) } else { phi(peak) };
                self.components as f64 * v
            })
            .sum()
    }

    /// Bound on `sum erfc(|lambda| t_min)` over eigenvalues outside the
    /// trusted window: their total contribution to an eta integral over
    /// `[t_min, inf)`.
    pub fn eta_tail_bound(&self, t_min: f64) -> f64 {
        let limit = self.trust + self.weyl + 40.0 / t_min;
        self.outside_frequencies(limit)
            .iter()
            .map(|&xi| self.components as f64 * crate::quad::erfc((xi - self.weyl).max(self.trust) * t_min))
            .sum()
    }

    /// Per-eigenvalue differences against a finer truncation, over this
    /// spectrum's trusted window. Pairs `(lambda, |delta lambda|)`.
    pub fn compare(&self, finer: &SectorSpectrum) -> Vec<(f64, f64)> {
        let fine = &finer.eigenvalues;
        self.trusted()
            .map(|(_, l)| {
                let idx = fine.partition_point(|x| *x < l);
                let d = [idx.checked_sub(1), Some(idx)]
                    .into_iter()
                    .flatten()
                    .filter_map(|i| fine.get(i))
                    .map(|x| (x - l).abs())
                    .fold(f64::INFINITY, f64::min);
                (l, d)
            })
            .collect()
    }

    /// Value of eigenvector `j` at `x`, spinor component `s`:
    /// `u_j(x)_s = sum_q c_{q,s} exp(2 pi i q x)`.
    pub fn eigenfunction(&self, j: usize, x: f64) -> [Complex64; 2] {
        let v = self.vectors.as_ref().expect("eigenvectors were not computed");
        let nc = self.components;
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (i, &q) in self.modes.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, TAU * q as f64 * x);
            for (s, o) in out.iter_mut().enumerate().take(nc) {
                *o += v[(i * nc + s, j)] * ph;
            }
        }
        out
    }
}

fn closed_form(op: &ModelOperator, beta: f64, modes: &[i64], with_vectors: bool) -> (Vec<f64>, Option<DMatrix<Complex64>>) {
    let nc = op.components;
    let dim = nc * modes.len();
    let mut pairs: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(dim);
    for (i, &q) in modes.iter().enumerate() {
        let xi = TAU * (q as f64 + beta);
        if nc == 1 {
            pairs.push((xi + op.c, vec![(i, 1.0)]));
        } else {
            let e = xi.hypot(op.m);
            // Eigenvectors of xi sigma3 + m sigma1 for +E and -E.
            let (plus, minus) = if e == 0.0 {
                ((1.0, 0.0), (0.0, 1.0))
            } else if xi >= 0.0 {
                let n = ((xi + e).powi(2) + op.m * op.m).sqrt();
                (((xi + e) / n, op.m / n), (-op.m / n, (xi + e) / n))
            } else {
                let n = ((e - xi).powi(2) + op.m * op.m).sqrt();
                ((op.m / n, (e - xi) / n), ((e - xi) / n, -op.m / n))
            };
            pairs.push((op.c + e, vec![(2 * i, plus.0), (2 * i + 1, plus.1)]));
            pairs.push((op.c - e, vec![(2 * i, minus.0), (2 * i + 1, minus.1)]));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let vectors = with_vectors.then(|| {
        let mut v = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (j, (_, comps)) in pairs.iter().enumerate() {
            for &(i, x) in comps {
                v[(i, j)] = Complex64::new(x, 0.0);
            }
        }
        v
    });
    (pairs.into_iter().map(|p| p.0).collect(), vectors)
}

/// The truncated Hermitian matrix of `H(beta)` on the given modes.
pub fn sector_matrix(op: &ModelOperator, beta: f64, modes: &[i64]) -> DMatrix<Complex64> {
    let nc = op.components;
    let dim = nc * modes.len();
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let c = Complex64::new(op.c, 0.0);
    for (i, &q) in modes.iter().enumerate() {
        let xi = TAU * (q as f64 + beta);
        if nc == 1 {
            h[(i, i)] = Complex64::new(xi, 0.0) + c;
        } else {
            h[(2 * i, 2 * i)] = Complex64::new(xi, 0.0) + c;
            h[(2 * i + 1, 2 * i + 1)] = Complex64::new(-xi, 0.0) + c;
            h[(2 * i, 2 * i + 1)] = Complex64::new(op.m, 0.0);
            h[(2 * i + 1, 2 * i)] = Complex64::new(op.m, 0.0);
        }
    }
    if nc == 2 {
        let first = modes[0];
        for (j, vj) in op.potential_fourier() {
            for (i, &q) in modes.iter().enumerate() {
                let target = q + j;
                let ti = target - first;
                if ti < 0 || ti as usize >= modes.len() {
                    continue;
                }
                let ti = ti as usize;
                // (v u)_{q+j} gets hat v_j u_q, in the off-diagonal spinor slots.
                h[(2 * ti, 2 * i + 1)] += vj;
                h[(2 * ti + 1, 2 * i)] += vj;
            }
        }
    }
    h
}

/// Number of Fourier modes `k` (on each side) so that the trusted window
/// reaches `lambda_needed`.
pub fn modes_for_window(op: &ModelOperator, lambda_needed: f64) -> usize {
    let w = if op.components == 1 { op.c.abs() } else { op.weyl_shift() };
    let edge_needed = if op.has_potential() { 2.0 * (lambda_needed + w) } else { lambda_needed + w };
    ((edge_needed / TAU - 0.5).ceil().max(1.0)) as usize + 1
}

/// Window needed so that `|lambda| exp(-t^2 lambda^2)` is below `tol` for
/// `t >= t_min` outside it.
pub fn window_for(t_min: f64, tol: f64) -> f64 {
    let l = (1.0 / tol).ln().max(1.0);
    (l + 0.5 * l.ln() + 2.0).sqrt() / t_min
}

/// Sector spectra shared across covers: the sector `theta + r/n` depends on
/// `r/n` only, so a tower of covers reuses most sectors.
pub struct SpectrumCache {
    op: ModelOperator,
    k: usize,
    with_vectors: bool,
    map: Mutex<HashMap<u64, Arc<SectorSpectrum>>>,
}

impl SpectrumCache {
    pub fn new(op: ModelOperator, k: usize, with_vectors: bool) -> Self {
        SpectrumCache { op, k, with_vectors, map: Mutex::new(HashMap::new()) }
    }

    pub fn operator(&self) -> &ModelOperator {
        &self.op
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Spectrum of `H(theta + s)`.
    pub fn get(&self, s: f64) -> Arc<SectorSpectrum> {
        let key = s.to_bits();
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return v.clone();
        }
        let spec = Arc::new(SectorSpectrum::compute(&self.op, self.op.theta + s, self.k, self.with_vectors));
        self.map.lock().unwrap().entry(key).or_insert(spec).clone()
    }

    /// Spectra for all shifts, computed in parallel, in input order.
    pub fn get_many(&self, shifts: &[f64]) -> Vec<Arc<SectorSpectrum>> {
        let missing: Vec<f64> = {
            let map = self.map.lock().unwrap();
            let mut seen = std::collections::HashSet::new();
            shifts.iter().copied().filter(|s| !map.contains_key(&s.to_bits()) && seen.insert(s.to_bits())).collect()
        };
        let computed: Vec<(u64, Arc<SectorSpectrum>)> = missing
            .par_iter()
            .map(|&s| (s.to_bits(), Arc::new(SectorSpectrum::compute(&self.op, self.op.theta + s, self.k, self.with_vectors))))
            .collect();
        {
            let mut map = self.map.lock().unwrap();
            for (key, spec) in computed {
                map.entry(key).or_insert(spec);
            }
        }
        shifts.iter().map(|&s| self.get(s)).collect()
    }
}

/// Spectral data of the operator on the n-fold cover.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralData {
    pub n: u32,
    pub k_max: usize,
    /// Trusted eigenvalues of each sector `r = 0..n`.
    pub sectors: Vec<Vec<f64>>,
    /// Largest eigenvalue change between `k_max` and `2 k_max` truncations.
    pub truncation_bound: f64,
    pub zero_modes: usize,
    pub gap: f64,
    pub flagged: bool,
}

impl SpectralData {
    /// Weight of an eigenvalue of sector `r` in the delocalized trace at
    /// class `a`: `exp(-2 pi i r a / n) / n`.
    pub fn weight(&self, r: u32, a: u32) -> Complex64 {
        deloc_weight(self.n, r, a)
    }

    /// All trusted eigenvalues of the cover, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.sectors.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

pub fn deloc_weight(n: u32, r: u32, a: u32) -> Complex64 {
    let phase = -TAU * ((r as u64 * a as u64) % n as u64) as f64 / n as f64;
    Complex64::from_polar(1.0 / n as f64, phase)
}

/// Sector shift `r / n` as an exactly reproducible float.
pub fn sector_shift(n: u32, r: u32) -> f64 {
    let g = gcd(r, n);
    (r / g) as f64 / (n / g) as f64
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Spectrum of the operator on the n-fold cover with `k_max` modes per
/// sector, with truncation checked against `2 k_max`.
pub fn spectrum_on_cover(op: &ModelOperator, n: u32, k_max: usize, tol: f64) -> Result<SpectralData> {
    if n == 0 {
        return Err(Error::invalid("cover degree must be positive"));
    }
    if op.has_potential() && k_max < 16 {
        return Err(Error::invalid("operators with a potential need k_max >= 16"));
    }
    let shifts: Vec<f64> = (0..n).map(|r| sector_shift(n, r)).collect();
    let coarse = SpectrumCache::new(op.clone(), k_max, false).get_many(&shifts);
    let mut truncation_bound: f64 = 0.0;
    if op.has_potential() {
        let fine = SpectrumCache::new(op.clone(), 2 * k_max, false).get_many(&shifts);
        for (c, f) in coarse.iter().zip(&fine) {
            for (_, d) in c.compare(f) {
                truncation_bound = truncation_bound.max(d);
            }
        }
    }
    let sectors: Vec<Vec<f64>> = coarse.iter().map(|s| s.trusted_eigenvalues()).collect();
    Ok(SpectralData {
        n,
        k_max,
        truncation_bound,
        zero_modes: coarse.iter().map(|s| s.zero_modes()).sum(),
        gap: coarse.iter().map(|s| s.gap()).fold(f64::INFINITY, f64::min),
        flagged: truncation_bound > tol,
        sectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::operator::TrigTerm;

    #[test]
    fn base_circle_closed_forms() {
        let op = ModelOperator::one_component(0.25, 0.0).unwrap();
        let d = spectrum_on_cover(&op, 1, 8, 1e-10).unwrap();
        for j in -5i64..=5 {
            let want = TAU * (j as f64 + 0.25);
            assert!(d.eigenvalues().iter().any(|l| (l - want).abs() < 1e-12));
        }
        let op = ModelOperator::two_component(1.0, 0.0, 0.0, vec![]).unwrap();
        let d = spectrum_on_cover(&op, 1, 8, 1e-10).unwrap();
        let ev = d.eigenvalues();
        assert!(ev.iter().any(|l| (l - 1.0).abs() < 1e-15));
        assert!(ev.iter().any(|l| (l + 1.0).abs() < 1e-15));
    }

    #[test]
    fn cover_spectrum_is_union_of_twisted_frequencies() {
        let op = ModelOperator::one_component(0.25, 0.4).unwrap();
        let n = 3;
        let d = spectrum_on_cover(&op, n, 10, 1e-10).unwrap();
        let ev = d.eigenvalues();
        for j in -20i64..=20 {
            let want = TAU * (j as f64 / n as f64 + 0.25) + 0.4;
            assert!(ev.iter().any(|l| (l - want).abs() < 1e-12), "missing {want}");
        }
    }

    #[test]
    fn matrix_and_closed_form_agree_without_potential() {
        for op in [
            ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap(),
            ModelOperator::one_component(0.25, 0.3).unwrap(),
        ] {
            for beta in [0.25, 0.75, 1.1] {
                let s = SectorSpectrum::compute(&op, beta, 6, false);
                let q0 = -(f64::round(beta) as i64);
                let modes: Vec<i64> = (q0 - 6..=q0 + 6).collect();
                let h = sector_matrix(&op, beta, &modes);
                let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                for (a, b) in s.eigenvalues.iter().zip(&ev) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_vectors_are_eigenvectors() {
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, vec![]).unwrap();
        let s = SectorSpectrum::compute(&op, 0.6, 4, true);
        let h = sector_matrix(&op, 0.6, &s.modes);
        let v = s.vectors.as_ref().unwrap();
        for j in 0..v.ncols() {
            let col = v.column(j);
            let r = &h * col - col * Complex64::new(s.eigenvalues[j], 0.0);
            assert!(r.norm() < 1e-12);
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn potential_truncation_converges() {
        let v = vec![TrigTerm::parse("0.2cos1").unwrap()];
        let op = ModelOperator::two_component(1.0, 0.3, 0.25, v).unwrap();
        let a = SectorSpectrum::compute(&op, 0.4, 32, false);
        let b = SectorSpectrum::compute(&op, 0.4, 64, false);
        let worst = a.compare(&b).iter().map(|p| p.1).fold(0.0, f64::max);
        assert!(worst <= 1e-10, "{worst}");
        let d = spectrum_on_cover(&op, 4, 32, 1e-10).unwrap();
        assert!(!d.flagged);
        assert!(spectrum_on_cover(&op, 4, 8, 1e-10).is_err());
    }

    #[test]
    fn tail_bound_dominates_omitted_terms() {
        let op = ModelOperator::two_component(1.0, 0.3, 0.1, vec![]).unwrap();
        let small = SectorSpectrum::compute(&op, 0.1, 3, false);
        let big = SectorSpectrum::compute(&op, 0.1, 60, false);
        for t in [0.05, 0.1, 0.3] {
            let missing = big.trace_f(t) - small.trace_f(t);
            let omitted: f64 = big
                .trusted()
                .filter(|(_, l)| l.abs() > small.trust)
                .map(|(_, l)| l.abs() * (-t * t * l * l).exp())
                .sum();
            assert!(missing.abs() <= omitted + 1e-12);
            assert!(omitted <= small.tail_bound(t) + 1e-15, "t={t}: {omitted} > {}", small.tail_bound(t));
        }
    }

    #[test]
    fn weights_and_shifts() {
        assert_eq!(sector_shift(4, 2), sector_shift(2, 1));
        let w: Complex64 = (0..5).map(|a| deloc_weight(5, 2, a)).sum();
        assert!(w.norm() < 1e-15);
        let w: Complex64 = (0..5).map(|a| deloc_weight(5, 0, a)).sum();
        assert!((w.re - 1.0).abs() < 1e-15);
    }
}
