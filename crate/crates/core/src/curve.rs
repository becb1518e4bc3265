//! Closed real-analytic curves in C² given by Laurent-polynomial
//! parameterizations `ζ ↦ (f(ζ), g(ζ))` on an annulus `rho < |ζ| < 1/rho`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::BivariatePoly;

/// Samples used by the injectivity check.
pub const SIMPLICITY_SAMPLES: usize = 4096;
/// Minimum chordal distance between distinct samples of a simple curve.
pub const SIMPLICITY_TOL: f64 = 1e-9;
/// Annulus radius used when a curve file omits `rho`.
pub const DEFAULT_RHO: f64 = 0.5;

/// `Σ_k c_k ζ^{min_degree + k}`, stored trimmed. The zero function is the
/// single coefficient `[0]` at `min_degree = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPoly {
    min_degree: i32,
    coeffs: Vec<Complex64>,
}

impl LaurentPoly {
    pub fn new(min_degree: i32, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidPolynomial("Laurent coefficient list is empty".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPolynomial("non-finite Laurent coefficient".into()));
        }
        let Some(first) = coeffs.iter().position(|c| *c != Complex64::new(0.0, 0.0)) else {
            return Ok(Self::zero());
        };
        let last = coeffs
            .iter()
            .rposition(|c| *c != Complex64::new(0.0, 0.0))
            .unwrap_or(first);
        Ok(Self {
            min_degree: min_degree + first as i32,
            coeffs: coeffs[first..=last].to_vec(),
        })
    }

    /// Ordinary polynomial `Σ c_k ζ^k`.
    pub fn polynomial(coeffs: &[Complex64]) -> Result<Self> {
        Self::new(0, coeffs.to_vec())
    }

    pub fn zero() -> Self {
        Self {
            min_degree: 0,
            coeffs: vec![Complex64::new(0.0, 0.0)],
        }
    }

    /// The monomial `c ζ^k`.
    pub fn monomial(k: i32, c: Complex64) -> Self {
        Self::new(k, vec![c]).expect("single finite coefficient")
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == Complex64::new(0.0, 0.0)
    }

    pub fn min_degree(&self) -> i32 {
        self.min_degree
    }

    pub fn max_degree(&self) -> i32 {
        self.min_degree + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// No negative powers.
    pub fn is_polynomial(&self) -> bool {
        self.min_degree >= 0
    }

    /// Largest `|k|` over the exponents present.
    pub fn abs_degree(&self) -> u32 {
        if self.is_zero() {
            0
        } else {
            self.min_degree.unsigned_abs().max(self.max_degree().unsigned_abs())
        }
    }

    /// Horner evaluation in `ζ` for the non-negative powers and in `1/ζ` for
    /// the negative ones.
    pub fn eval(&self, zeta: Complex64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let mut pos = zero;
        let mut neg = zero;
        // exponent of coefficient k is min_degree + k
        let split = (-self.min_degree).max(0) as usize; // first index with exponent >= 0
        if split < self.coeffs.len() {
            for c in self.coeffs[split..].iter().rev() {
                pos = pos * zeta + c;
            }
            let lowest = (self.min_degree + split as i32) as u32;
            if lowest > 0 {
                pos *= zeta.powu(lowest);
            }
        }
        if split > 0 {
            let inv = zeta.inv();
            // coefficients 0..split carry exponents min_degree..-1
            for c in self.coeffs[..split.min(self.coeffs.len())].iter() {
                neg = neg * inv + c;
            }
            let highest_neg = self.min_degree + split.min(self.coeffs.len()) as i32 - 1;
            neg *= inv.powu((-highest_neg) as u32);
        }
        pos + neg
    }

    /// The first `order` Taylor coefficients at `zeta0`, i.e. the coefficients
    /// of `t^ν` in `f(zeta0 + t)`.
    pub fn taylor_at(&self, zeta0: Complex64, order: usize) -> Result<Vec<Complex64>> {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; order];
        if self.is_zero() {
            return Ok(out);
        }
        if zeta0 == zero {
            if self.min_degree < 0 {
                return Err(Error::Domain(
                    "Taylor expansion at 0 of a Laurent polynomial with negative powers".into(),
                ));
            }
            for (k, c) in self.coeffs.iter().enumerate() {
                let p = (self.min_degree + k as i32) as usize;
                if p < order {
                    out[p] += c;
                }
            }
            return Ok(out);
        }
        // d^ν/ν! of ζ^p at ζ0 is binom(p, ν) ζ0^{p-ν}, valid for negative p too.
        let inv = zeta0.inv();
        for (k, c) in self.coeffs.iter().enumerate() {
            let p = self.min_degree + k as i32;
            let mut binom = 1.0f64;
            let mut pow = zeta0.powi(p);
            for (nu, slot) in out.iter_mut().enumerate() {
                if binom == 0.0 {
                    break;
                }
                *slot += c * binom * pow;
                binom *= (p as f64 - nu as f64) / (nu as f64 + 1.0);
                pow *= inv;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveComponent {
    pub f: LaurentPoly,
    pub g: LaurentPoly,
}

impl CurveComponent {
    pub fn new(f: LaurentPoly, g: LaurentPoly) -> Self {
        Self { f, g }
    }

    pub fn eval(&self, zeta: Complex64) -> (Complex64, Complex64) {
        (self.f.eval(zeta), self.g.eval(zeta))
    }

    pub fn is_polynomial(&self) -> bool {
        self.f.is_polynomial() && self.g.is_polynomial()
    }
}

/// A finite union of parameterized closed curves sharing one annulus of
/// validity.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveC2 {
    components: Vec<CurveComponent>,
    rho: f64,
    label: String,
}

/// Boundary points `(f_k(ζ_j), g_k(ζ_j))` for `ζ_j = e^{2πij/S}`, component by
/// component.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub points: Vec<(Complex64, Complex64)>,
    pub parameters: Vec<Complex64>,
    /// Zero-based component of each point.
    pub component_index: Vec<usize>,
}

impl BoundarySample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicityReport {
    pub simple: bool,
    /// Smallest distance between two distinct samples.
    pub min_distance: f64,
    /// `(component_a, sample_a, component_b, sample_b)` of the closest pair
    /// when the check fails.
    pub offending: Option<(usize, usize, usize, usize)>,
}

/// `e^{2πi j/s}`; the angle is formed as `τ·(j/s)` so nested sample sets
/// share bit-identical parameters.
pub fn unit_root(j: usize, s: usize) -> Complex64 {
    Complex64::from_polar(1.0, TAU * (j as f64 / s as f64))
}

impl CurveC2 {
    pub fn new(label: impl Into<String>, rho: f64, components: Vec<CurveComponent>) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidCurve {
                field: "rho".into(),
                reason: format!("must lie strictly in (0, 1), got {rho}"),
            });
        }
        if components.is_empty() {
            return Err(Error::InvalidCurve {
                field: "components".into(),
                reason: "at least one component required".into(),
            });
        }
        Ok(Self {
            components,
            rho,
            label: label.into(),
        })
    }

    /// Single-component polynomial curve from ascending coefficient lists.
    pub fn polynomial(label: &str, f: &[Complex64], g: &[Complex64]) -> Result<Self> {
        Self::new(
            label,
            DEFAULT_RHO,
            vec![CurveComponent::new(
                LaurentPoly::polynomial(f)?,
                LaurentPoly::polynomial(g)?,
            )],
        )
    }

    pub fn components(&self) -> &[CurveComponent] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_polynomial(&self) -> bool {
        self.components.iter().all(CurveComponent::is_polynomial)
    }

    /// `max_k (abs_degree f_k, abs_degree g_k)`.
    pub fn degree_bounds(&self) -> (u32, u32) {
        self.components
            .iter()
            .fold((0, 0), |(a, b), c| (a.max(c.f.abs_degree()), b.max(c.g.abs_degree())))
    }

    pub fn in_annulus(&self, zeta: Complex64) -> bool {
        let r = zeta.norm();
        r > self.rho && r < 1.0 / self.rho
    }

    /// Base points for Taylor expansions: the open annulus, plus the disk
    /// `|ζ| < 1/rho` when every component is polynomial.
    pub fn admissible_base_point(&self, zeta0: Complex64) -> bool {
        if self.is_polynomial() {
            zeta0.norm() < 1.0 / self.rho
        } else {
            self.in_annulus(zeta0)
        }
    }

    /// 0 for polynomial data, otherwise `(1 + rho)/2` on the real axis.
    pub fn default_base_point(&self) -> Complex64 {
        if self.is_polynomial() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.5 * (1.0 + self.rho), 0.0)
        }
    }

    /// `(f_k(ζ), g_k(ζ))` with zero-based `k`.
    pub fn eval_component(&self, k: usize, zeta: Complex64) -> Result<(Complex64, Complex64)> {
        let comp = self.components.get(k).ok_or_else(|| {
            Error::Parameter(format!(
                "component index {k} out of range (curve has {})",
                self.components.len()
            ))
        })?;
        if !self.in_annulus(zeta) {
            return Err(Error::Domain(format!(
                "|zeta| = {} outside annulus ({}, {})",
                zeta.norm(),
                self.rho,
                1.0 / self.rho
            )));
        }
        Ok(comp.eval(zeta))
    }

    pub fn sample_boundary(&self, s: usize) -> BoundarySample {
        let n = self.components.len() * s;
        let mut points = Vec::with_capacity(n);
        let mut parameters = Vec::with_capacity(n);
        let mut component_index = Vec::with_capacity(n);
        for (k, comp) in self.components.iter().enumerate() {
            for j in 0..s {
                let zeta = unit_root(j, s);
                points.push(comp.eval(zeta));
                parameters.push(zeta);
                component_index.push(k);
            }
        }
        BoundarySample {
            points,
            parameters,
            component_index,
        }
    }

    /// Largest boundary moduli `(max|f|, max|g|)` over `s` samples per component.
    pub fn coordinate_bounds(&self, s: usize) -> (f64, f64) {
        self.sample_boundary(s)
            .points
            .iter()
            .fold((0.0f64, 0.0f64), |(a, b), (z, w)| (a.max(z.norm()), b.max(w.norm())))
    }

    /// Pairwise-distance injectivity check over [`SIMPLICITY_SAMPLES`] samples
    /// per component, including distinct components against each other.
    pub fn check_simple(&self) -> SimplicityReport {
        self.check_simple_with(SIMPLICITY_SAMPLES, SIMPLICITY_TOL)
    }

    pub fn check_simple_with(&self, s: usize, tol: f64) -> SimplicityReport {
        let sample = self.sample_boundary(s);
        let pts = &sample.points;
        let mut best = f64::INFINITY;
        let mut pair = (0, 0);
        for i in 0..pts.len() {
            let (zi, wi) = pts[i];
            for j in (i + 1)..pts.len() {
                let (zj, wj) = pts[j];
                let d2 = (zi - zj).norm_sqr() + (wi - wj).norm_sqr();
                if d2 < best {
                    best = d2;
                    pair = (i, j);
                }
            }
        }
        let min_distance = best.sqrt();
        let simple = min_distance > tol;
        SimplicityReport {
            simple,
            min_distance,
            offending: (!simple).then(|| {
                (
                    sample.component_index[pair.0],
                    pair.0 % s,
                    sample.component_index[pair.1],
                    pair.1 % s,
                )
            }),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: CurveJson = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        raw.into_curve()
    }

    pub fn to_json_string(&self) -> String {
        let raw = CurveJson {
            label: self.label.clone(),
            rho: Some(self.rho),
            components: self
                .components
                .iter()
                .map(|c| ComponentJson {
                    f: LaurentJson::from(&c.f),
                    g: LaurentJson::from(&c.g),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("curve serializes")
    }
}

/// `max_j |p(z_j, w_j)|` over `s` boundary samples per component.
pub fn sup_norm_on_curve(p: &BivariatePoly, curve: &CurveC2, s: usize) -> Result<f64> {
    if s < 64 {
        return Err(Error::Precondition(format!("sup-norm sampling needs S >= 64, got {s}")));
    }
    Ok(sup_norm_unchecked(p, curve, s))
}

pub(crate) fn sup_norm_unchecked(p: &BivariatePoly, curve: &CurveC2, s: usize) -> f64 {
    curve
        .components
        .iter()
        .flat_map(|comp| (0..s).map(move |j| comp.eval(unit_root(j, s))))
        .map(|(z, w)| p.eval(z, w).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaurentJson {
    min_degree: i32,
    coeffs: Vec<[f64; 2]>,
}

impl From<&LaurentPoly> for LaurentJson {
    fn from(p: &LaurentPoly) -> Self {
        Self {
            min_degree: p.min_degree,
            coeffs: p.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl LaurentJson {
    fn into_poly(self, field: &str) -> Result<LaurentPoly> {
        LaurentPoly::new(
            self.min_degree,
            self.coeffs.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
        )
        .map_err(|e| Error::InvalidCurve {
            field: field.into(),
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentJson {
    f: LaurentJson,
    g: LaurentJson,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveJson {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    components: Vec<ComponentJson>,
}

impl CurveJson {
    fn into_curve(self) -> Result<CurveC2> {
        let components = self
            .components
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                Ok(CurveComponent::new(
                    c.f.into_poly(&format!("components[{k}].f"))?,
                    c.g.into_poly(&format!("components[{k}].g"))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        CurveC2::new(self.label, self.rho.unwrap_or(DEFAULT_RHO), components)
    }
}

/// The reference curves used throughout the tests and the CLI examples.
pub mod fixtures {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// `(ζ, 0)`: the unit circle in the z-axis.
    pub fn circle() -> CurveC2 {
        CurveC2::polynomial("circle", &[c(0.0), c(1.0)], &[c(0.0)]).unwrap()
    }

    /// `(ζ, ζ²)`: a circle on the parabola `w = z²`.
    pub fn parabola() -> CurveC2 {
        CurveC2::polynomial("parabola", &[c(0.0), c(1.0)], &[c(0.0), c(0.0), c(1.0)]).unwrap()
    }

    /// `(ζ, ζ³ + 0.2ζ)`.
    pub fn cubic() -> CurveC2 {
        CurveC2::polynomial("cubic", &[c(0.0), c(1.0)], &[c(0.0), c(0.2), c(0.0), c(1.0)]).unwrap()
    }

    /// `(ζ², 0)`: double cover of the circle, not simple.
    pub fn figure_eight() -> CurveC2 {
        CurveC2::polynomial("figure-eight", &[c(0.0), c(0.0), c(1.0)], &[c(0.0)]).unwrap()
    }

    /// `(ζ, 1/ζ)`: the totally real circle `zw = 1`.
    pub fn real_circle() -> CurveC2 {
        CurveC2::new(
            "real-circle",
            DEFAULT_RHO,
            vec![CurveComponent::new(
                LaurentPoly::monomial(1, c(1.0)),
                LaurentPoly::monomial(-1, c(1.0)),
            )],
        )
        .unwrap()
    }

    /// Two disjoint circles: `(ζ, 0)` and `(ζ/2, 1 + ζ/4)`.
    pub fn two_circles() -> CurveC2 {
        CurveC2::new(
            "two-circles",
            DEFAULT_RHO,
            vec![
                CurveComponent::new(LaurentPoly::monomial(1, c(1.0)), LaurentPoly::zero()),
                CurveComponent::new(
                    LaurentPoly::monomial(1, c(0.5)),
                    LaurentPoly::polynomial(&[c(1.0), c(0.25)]).unwrap(),
                ),
            ],
        )
        .unwrap()
    }
}
