//! The model operator family and the covers it acts on.
//!
//! On the base circle `[0, 1)` the operator is
//!
//! ```text
//! D = sigma3 (-i d/dx + 2 pi theta) + (m + v(x)) sigma1 + c      (2 components)
//! D = (-i d/dx + 2 pi theta) + c                                 (1 component)
//! ```
//!
//! acting on 1-periodic functions; the holonomy `theta` enters as a constant
//! connection, so deck translations are plain shifts `x -> x + 1`. On the
//! n-fold cover `[0, n)` the same expression acts on n-periodic functions.
//! Writing an n-periodic function as `sum_r exp(2 pi i r x / n) u_r(x)` with
//! 1-periodic `u_r` splits the cover operator into sectors `H(theta + r/n)`,
//! where `H(beta)` acts on the Fourier modes `exp(2 pi i q x)` of `u_r` with
//! frequency `xi_q = 2 pi (q + beta)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigKind {
    Cos,
    Sin,
}

/// One term `amp * cos(2 pi j x)` or `amp * sin(2 pi j x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amp: f64,
    pub freq: u32,
    pub kind: TrigKind,
}

impl fmt::Display for TrigTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            TrigKind::Cos => "cos",
            TrigKind::Sin => "sin",
        };
        write!(f, "{}{}{}", self.amp, k, self.freq)
    }
}

impl TrigTerm {
    /// Parses `0.2cos1` or `-0.1sin3`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (pos, kind) = if let Some(p) = s.find("cos") {
            (p, TrigKind::Cos)
        } else if let Some(p) = s.find("sin") {
            (p, TrigKind::Sin)
        } else {
            return Err(Error::parse(format!("potential term {s:?} needs cos or sin")));
        };
        let amp_str = &s[..pos];
        let amp = if amp_str.is_empty() || amp_str == "+" {
            1.0
        } else if amp_str == "-" {
            -1.0
        } else {
            amp_str.parse().map_err(|_| Error::parse(format!("bad amplitude in {s:?}")))?
        };
        let freq: u32 = s[pos + 3..].parse().map_err(|_| Error::parse(format!("bad frequency in {s:?}")))?;
        if freq == 0 {
            return Err(Error::parse("potential frequencies start at 1; put constants in m"));
        }
        Ok(TrigTerm { amp, freq, kind })
    }
}

/// The one-dimensional first-order operator family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOperator {
    pub components: usize,
    pub m: f64,
    pub c: f64,
    pub theta: f64,
    pub v: Vec<TrigTerm>,
}

impl ModelOperator {
    pub fn one_component(theta: f64, c: f64) -> Result<Self> {
        Self::new(1, 0.0, c, theta, vec![])
    }

    pub fn two_component(m: f64, c: f64, theta: f64, v: Vec<TrigTerm>) -> Result<Self> {
        Self::new(2, m, c, theta, v)
    }

    pub fn new(components: usize, m: f64, c: f64, theta: f64, v: Vec<TrigTerm>) -> Result<Self> {
        let op = ModelOperator { components, m, c, theta, v };
        op.validate()?;
        Ok(op)
    }

    fn validate(&self) -> Result<()> {
        if self.components != 1 && self.components != 2 {
            return Err(Error::invalid(format!("components must be 1 or 2, got {}", self.components)));
        }
        if ![self.m, self.c, self.theta].iter().all(|x| x.is_finite()) || self.v.iter().any(|t| !t.amp.is_finite()) {
            return Err(Error::invalid("operator parameters must be finite"));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta must lie in [0, 1), got {}", self.theta)));
        }
        if self.components == 1 && (self.m != 0.0 || !self.v.is_empty()) {
            return Err(Error::invalid("mass and potential apply to the 2-component family only"));
        }
        if self.m < 0.0 {
            return Err(Error::invalid("mass must be nonnegative"));
        }
        Ok(())
    }

    /// Parses `comp=2,m=1.0,c=0.3,theta=0.25,v=0.2cos1`. Several potential
    /// terms may be given as repeated `v=` keys or joined with `+`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut components = 2usize;
        let (mut m, mut c, mut theta) = (0.0, 0.0, 0.0);
        let mut v = Vec::new();
        let num = |k: &str, s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::parse(format!("bad value {s:?} for {k}")))
        };
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, val) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("expected key=value, got {part:?}")))?;
            match k.trim() {
                "comp" | "components" => {
                    components = val
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(format!("bad component count {val:?}")))?
                }
                "m" => m = num(k, val)?,
                "c" => c = num(k, val)?,
                "theta" => theta = num(k, val)?,
                "v" => {
                    let val = val.trim();
                    if val != "0" && !val.is_empty() {
                        // Split on '+' that separates terms, keeping exponent signs.
                        let mut start = 0;
                        let bytes = val.as_bytes();
                        for i in 1..bytes.len() {
                            if bytes[i] == b'+' && bytes[i - 1].is_ascii_digit() {
                                v.push(TrigTerm::parse(&val[start..i])?);
                                start = i + 1;
                            }
                        }
                        v.push(TrigTerm::parse(&val[start..])?);
                    }
                }
                other => return Err(Error::parse(format!("unknown operator key {other:?}"))),
            }
        }
        if components == 1 && m == 0.0 && v.is_empty() {
            return Self::one_component(theta, c).map_err(|e| Error::Parse(e.to_string()));
        }
        Self::new(components, m, c, theta, v).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn has_potential(&self) -> bool {
        self.v.iter().any(|t| t.amp != 0.0)
    }

    /// `sup |v|` bounded by the sum of amplitudes.
    pub fn sup_v(&self) -> f64 {
        self.v.iter().map(|t| t.amp.abs()).sum()
    }

    /// Bound on the norm of the zeroth-order part, `m + |c| + sup|v|`.
    pub fn zeroth_order_bound(&self) -> f64 {
        self.m + self.c.abs() + self.sup_v()
    }

    /// Norm bound of the perturbation separating the operator from its
    /// diagonal part `xi sigma3` (or `xi`): every eigenvalue lies within this
    /// distance of the unperturbed eigenvalue of the same rank.
    pub fn weyl_shift(&self) -> f64 {
        self.zeroth_order_bound()
    }

    /// `m - |c| - sup|v|` for the 2-component family: the line operator is
    /// invertible with at least this gap when it is positive.
    pub fn certified_gap(&self) -> Option<f64> {
        if self.components != 2 {
            return None;
        }
        let g = self.m - self.c.abs() - self.sup_v();
        (g > 0.0).then_some(g)
    }

    /// Fourier coefficient `hat v_j` of the potential, so that
    /// `v(x) = sum_j hat v_j exp(2 pi i j x)`.
    pub fn potential_fourier(&self) -> Vec<(i64, num_complex::Complex64)> {
        use num_complex::Complex64;
        let mut out: Vec<(i64, Complex64)> = Vec::new();
        let mut add = |j: i64, z: Complex64| match out.iter_mut().find(|e| e.0 == j) {
            Some(e) => e.1 += z,
            None => out.push((j, z)),
        };
        for t in &self.v {
            let j = t.freq as i64;
            match t.kind {
                TrigKind::Cos => {
                    add(j, Complex64::new(0.5 * t.amp, 0.0));
                    add(-j, Complex64::new(0.5 * t.amp, 0.0));
                }
                TrigKind::Sin => {
                    add(j, Complex64::new(0.0, -0.5 * t.amp));
                    add(-j, Complex64::new(0.0, 0.5 * t.amp));
                }
            }
        }
        out
    }

    pub fn potential_at(&self, x: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        self.v
            .iter()
            .map(|t| match t.kind {
                TrigKind::Cos => t.amp * (tau * t.freq as f64 * x).cos(),
                TrigKind::Sin => t.amp * (tau * t.freq as f64 * x).sin(),
            })
            .sum()
    }

    /// The same operator with `c` replaced by `c'`.
    pub fn with_shift(&self, c: f64) -> Self {
        ModelOperator { c, ..self.clone() }
    }

    pub fn spec_string(&self) -> String {
        let mut s = format!("comp={},m={},c={},theta={}", self.components, self.m, self.c, self.theta);
        for t in &self.v {
            s.push_str(&format!(",v={t}"));
        }
        s
    }
}

/// A cover of the base circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverSpec {
    /// The n-fold cover `R / nZ` with deck group `Z/n`.
    Finite(u32),
    /// The universal cover `R` with deck group `Z`.
    Line,
}

impl CoverSpec {
    /// Parses `n=8`, `8` or `line`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("line") {
            return Ok(CoverSpec::Line);
        }
        let n: u32 = s
            .strip_prefix("n=")
            .unwrap_or(s)
            .parse()
            .map_err(|_| Error::parse(format!("bad cover spec {s:?}")))?;
        if n == 0 {
            return Err(Error::parse("cover degree must be positive"));
        }
        Ok(CoverSpec::Finite(n))
    }

    /// Distortion constants of the deck action: `dist(x, x + a) = |a|` and
    /// word length `|a|`, so `theta0 = theta1 = 1`, `c0 = c1 = 0`.
    pub fn distortion(&self) -> (f64, f64, f64, f64) {
        (1.0, 1.0, 0.0, 0.0)
    }
}

impl fmt::Display for CoverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverSpec::Finite(n) => write!(f, "n={n}"),
            CoverSpec::Line => write!(f, "line"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_operator_specs() {
        let op = ModelOperator::parse("comp=2,m=1.0,c=0.3,theta=0.25,v=0.2cos1").unwrap();
        assert_eq!(op.components, 2);
        assert_eq!(op.v, vec![TrigTerm { amp: 0.2, freq: 1, kind: TrigKind::Cos }]);
        assert!((op.certified_gap().unwrap() - 0.5).abs() < 1e-15);
        let op = ModelOperator::parse("comp=2,m=1,v=0.1cos1+0.05sin2,v=-0.01cos3").unwrap();
        assert_eq!(op.v.len(), 3);
        let op = ModelOperator::parse("comp=1,theta=0.25").unwrap();
        assert_eq!(op.components, 1);
        assert!(ModelOperator::parse("comp=3").is_err());
        assert!(ModelOperator::parse("comp=1,m=1").is_err());
        assert!(ModelOperator::parse("comp=2,theta=1.5").is_err());
        assert!(ModelOperator::parse("comp=2,q=1").is_err());
        assert!(ModelOperator::parse("comp=2,v=0.2tan1").is_err());
    }

    #[test]
    fn potential_fourier_reconstructs_values() {
        let op = ModelOperator::parse("comp=2,m=1,v=0.2cos1+0.3sin2").unwrap();
        let coeffs = op.potential_fourier();
        for &x in &[0.0, 0.13, 0.5, 0.77] {
            let z: num_complex::Complex64 = coeffs
                .iter()
                .map(|(j, a)| a * num_complex::Complex64::from_polar(1.0, std::f64::consts::TAU * *j as f64 * x))
                .sum();
            assert!((z.re - op.potential_at(x)).abs() < 1e-14);
            assert!(z.im.abs() < 1e-14);
        }
    }

    #[test]
    fn cover_specs() {
        assert_eq!(CoverSpec::parse("n=8").unwrap(), CoverSpec::Finite(8));
        assert_eq!(CoverSpec::parse("line").unwrap(), CoverSpec::Line);
        assert!(CoverSpec::parse("n=0").is_err());
        assert!(CoverSpec::parse("torus").is_err());
    }
}
