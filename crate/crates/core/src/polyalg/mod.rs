//! Complex polynomials in one and two variables.
//!
//! Bivariate coefficients are stored densely in `(n, m)` lexicographic order
//! with `n` (the power of `z`) outer, which is also the column order of
//! [`VanishingSystem`].

mod roots;
mod series;

pub use roots::roots;
pub use series::{null_unit_vector, taylor_pullback, VanishingSystem, NULL_RESIDUAL_TOL};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `max |c| = 1` for the unit flag.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    /// `n + m <= d`.
    Total,
    /// `n <= d`, `m <= e`.
    Bidegree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePoly {
    grading: Grading,
    d: usize,
    e: usize,
    coeffs: Vec<Complex64>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl BivariatePoly {
    pub fn zero(grading: Grading, d: usize, e: usize) -> Result<Self> {
        if grading == Grading::Total && d != e {
            return Err(Error::InvalidPolynomial(format!(
                "total grading stores a square (d+1)x(d+1) table; got d={d}, e={e}"
            )));
        }
        Ok(Self {
            grading,
            d,
            e,
            coeffs: vec![ZERO; (d + 1) * (e + 1)],
        })
    }

    pub fn from_terms(grading: Grading, d: usize, e: usize, terms: &[(usize, usize, Complex64)]) -> Result<Self> {
        let mut p = Self::zero(grading, d, e)?;
        for &(n, m, c) in terms {
            if !p.admits(n, m) {
                return Err(Error::InvalidPolynomial(format!(
                    "monomial z^{n} w^{m} outside {grading:?} grading ({d},{e})"
                )));
            }
            let k = p.index(n, m);
            p.coeffs[k] += c;
        }
        Ok(p)
    }

    /// Builds a bidegree-`(d, e)` polynomial from a dense lexicographic vector.
    pub fn from_dense(grading: Grading, d: usize, e: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let mut p = Self::zero(grading, d, e)?;
        if coeffs.len() != p.coeffs.len() {
            return Err(Error::InvalidPolynomial(format!(
                "expected {} coefficients, got {}",
                p.coeffs.len(),
                coeffs.len()
            )));
        }
        for n in 0..=d {
            for m in 0..=e {
                let k = p.index(n, m);
                if !p.admits(n, m) && coeffs[k] != ZERO {
                    return Err(Error::InvalidPolynomial(format!(
                        "nonzero coefficient at z^{n} w^{m} violates total degree {d}"
                    )));
                }
            }
        }
        p.coeffs = coeffs;
        Ok(p)
    }

    pub fn constant(c: Complex64) -> Self {
        Self {
            grading: Grading::Bidegree,
            d: 0,
            e: 0,
            coeffs: vec![c],
        }
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn e(&self) -> usize {
        self.e
    }

    /// Whether `z^n w^m` belongs to this grading.
    pub fn admits(&self, n: usize, m: usize) -> bool {
        match self.grading {
            Grading::Total => n + m <= self.d,
            Grading::Bidegree => n <= self.d && m <= self.e,
        }
    }

    fn index(&self, n: usize, m: usize) -> usize {
        n * (self.e + 1) + m
    }

    pub fn coeff(&self, n: usize, m: usize) -> Complex64 {
        if n <= self.d && m <= self.e {
            self.coeffs[self.index(n, m)]
        } else {
            ZERO
        }
    }

    /// Dense coefficients, `(n, m)` lexicographic with `n` outer.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Nonzero terms in lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..=self.d)
            .flat_map(move |n| (0..=self.e).map(move |m| (n, m)))
            .map(move |(n, m)| (n, m, self.coeff(n, m)))
            .filter(|t| t.2 != ZERO)
    }

    pub fn max_modulus(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_unit(&self) -> bool {
        (self.max_modulus() - 1.0).abs() <= UNIT_TOL
    }

    pub fn total_degree(&self) -> Option<usize> {
        self.terms().map(|(n, m, _)| n + m).max()
    }

    pub fn eval(&self, z: Complex64, w: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for n in (0..=self.d).rev() {
            let row = &self.coeffs[n * (self.e + 1)..(n + 1) * (self.e + 1)];
            let mut inner = ZERO;
            for c in row.iter().rev() {
                inner = inner * w + c;
            }
            acc = acc * z + inner;
        }
        acc
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
            ..self.clone()
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&PolyJson::from(self)).expect("polynomial serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: PolyJson = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        raw.into_poly()
    }
}

/// Divides by a coefficient of maximal modulus (the first one in
/// lexicographic order), making that coefficient exactly 1.
pub fn make_unit(p: &BivariatePoly) -> Result<BivariatePoly> {
    let k = max_modulus_coeff(&p.coeffs).ok_or(Error::ZeroPolynomial)?;
    let mut out = p.clone();
    let pivot = p.coeffs[k];
    for c in out.coeffs.iter_mut() {
        *c /= pivot;
    }
    out.coeffs[k] = ONE;
    Ok(out)
}

fn max_modulus_coeff(coeffs: &[Complex64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, c) in coeffs.iter().enumerate() {
        let m = c.norm();
        if m > 0.0 && best.is_none_or(|(_, b)| m > b) {
            best = Some((k, m));
        }
    }
    best.map(|(k, _)| k)
}

/// `F(z, w) = Σ_j G_j(z) w^j`; returns `G_0..G_e` and the least `j0` whose
/// slice carries a coefficient of maximal modulus (modulus 1 for unit `F`).
pub fn slice_coefficients(f: &BivariatePoly) -> (Vec<UnivariatePoly>, usize) {
    let top = f.max_modulus();
    let slices: Vec<UnivariatePoly> = (0..=f.e)
        .map(|j| UnivariatePoly::new((0..=f.d).map(|n| f.coeff(n, j)).collect()))
        .collect();
    let j0 = slices
        .iter()
        .position(|g| g.coeffs.iter().any(|c| c.norm() >= top * (1.0 - UNIT_TOL)))
        .unwrap_or(0);
    (slices, j0)
}

/// `Σ_k c_k w^k` with trailing zeros trimmed; the zero polynomial is `[0]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnivariatePoly {
    coeffs: Vec<Complex64>,
}

impl UnivariatePoly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == ZERO {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Self { coeffs }
    }

    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut c = vec![ONE];
        for r in roots {
            let mut next = vec![ZERO; c.len() + 1];
            for (k, a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            c = next;
        }
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == ZERO
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * x + c)
    }

    pub fn max_modulus(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_unit(&self) -> bool {
        (self.max_modulus() - 1.0).abs() <= UNIT_TOL
    }

    pub fn make_unit(&self) -> Result<Self> {
        let k = max_modulus_coeff(&self.coeffs).ok_or(Error::ZeroPolynomial)?;
        let pivot = self.coeffs[k];
        let mut coeffs: Vec<Complex64> = self.coeffs.iter().map(|c| c / pivot).collect();
        coeffs[k] = ONE;
        Ok(Self::new(coeffs))
    }

    /// Drops leading coefficients below `rel · max|c|`.
    pub fn trim_relative(&self, rel: f64) -> Self {
        let cut = rel * self.max_modulus();
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && coeffs.last().unwrap().norm() <= cut {
            coeffs.pop();
        }
        Self::new(coeffs)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyJson {
    grading: Grading,
    d: usize,
    e: usize,
    coeffs: Vec<(usize, usize, f64, f64)>,
}

impl From<&BivariatePoly> for PolyJson {
    fn from(p: &BivariatePoly) -> Self {
        Self {
            grading: p.grading,
            d: p.d,
            e: p.e,
            coeffs: p.terms().map(|(n, m, c)| (n, m, c.re, c.im)).collect(),
        }
    }
}

impl PolyJson {
    fn into_poly(self) -> Result<BivariatePoly> {
        let mut sorted = self.coeffs.clone();
        sorted.sort_by_key(|a| (a.0, a.1));
        if sorted.iter().zip(&self.coeffs).any(|(a, b)| (a.0, a.1) != (b.0, b.1)) {
            return Err(Error::Parse(
                "polynomial coefficients must be sorted lexicographically by (n, m)".into(),
            ));
        }
        if sorted.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Parse("duplicate monomial in polynomial file".into()));
        }
        let terms: Vec<_> = self
            .coeffs
            .iter()
            .map(|&(n, m, re, im)| (n, m, Complex64::new(re, im)))
            .collect();
        BivariatePoly::from_terms(self.grading, self.d, self.e, &terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn make_unit_examples() {
        let p = BivariatePoly::from_terms(Grading::Total, 1, 1, &[(1, 0, c(2.0, 0.0)), (0, 1, c(4.0, 0.0))]).unwrap();
        let u = make_unit(&p).unwrap();
        assert_eq!(u.coeff(1, 0), c(0.5, 0.0));
        assert_eq!(u.coeff(0, 1), c(1.0, 0.0));
        assert_eq!(make_unit(&u).unwrap(), u);

        let p = BivariatePoly::from_terms(Grading::Bidegree, 1, 1, &[(1, 1, c(0.0, 3.0))]).unwrap();
        let u = make_unit(&p).unwrap();
        assert_eq!(u.coeff(1, 1), c(1.0, 0.0));
        assert!(u.is_unit());

        let zero = BivariatePoly::zero(Grading::Bidegree, 2, 2).unwrap();
        assert!(matches!(make_unit(&zero), Err(Error::ZeroPolynomial)));
    }

    #[test]
    fn total_grading_rejects_high_monomials() {
        assert!(BivariatePoly::from_terms(Grading::Total, 2, 2, &[(2, 1, c(1.0, 0.0))]).is_err());
        assert!(BivariatePoly::from_terms(Grading::Bidegree, 2, 2, &[(2, 1, c(1.0, 0.0))]).is_ok());
        assert!(BivariatePoly::zero(Grading::Total, 2, 3).is_err());
    }

    #[test]
    fn slice_examples() {
        let f =
            BivariatePoly::from_terms(Grading::Bidegree, 1, 1, &[(1, 1, c(1.0, 0.0)), (0, 0, c(0.5, 0.0))]).unwrap();
        let (g, j0) = slice_coefficients(&f);
        assert_eq!(j0, 1);
        assert_eq!(g[0].coeffs(), &[c(0.5, 0.0)]);
        assert_eq!(g[1].coeffs(), &[c(0.0, 0.0), c(1.0, 0.0)]);

        let f =
            BivariatePoly::from_terms(Grading::Bidegree, 2, 2, &[(2, 0, c(1.0, 0.0)), (0, 2, c(1.0, 0.0))]).unwrap();
        let (g, j0) = slice_coefficients(&f);
        assert_eq!(j0, 0);
        assert_eq!(g[0].degree(), 2);
        assert_eq!(g[2].coeffs(), &[c(1.0, 0.0)]);

        let f =
            BivariatePoly::from_terms(Grading::Bidegree, 0, 1, &[(0, 0, c(0.3, 0.0)), (0, 1, c(1.0, 0.0))]).unwrap();
        let (g, j0) = slice_coefficients(&f);
        assert_eq!(j0, 1);
        assert_eq!(g[0].coeffs(), &[c(0.3, 0.0)]);
        assert_eq!(g[1].coeffs(), &[c(1.0, 0.0)]);
    }

    #[test]
    fn slices_reassemble_the_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let terms: Vec<_> = (0..=4)
            .flat_map(|n| (0..=3).map(move |m| (n, m)))
            .map(|(n, m)| (n, m, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        let f = make_unit(&BivariatePoly::from_terms(Grading::Bidegree, 4, 3, &terms).unwrap()).unwrap();
        let (g, _) = slice_coefficients(&f);
        for _ in 0..1000 {
            let z = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let w = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let direct = f.eval(z, w);
            let sliced = g.iter().rev().fold(c(0.0, 0.0), |acc, gj| acc * w + gj.eval(z));
            assert!((direct - sliced).norm() <= 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn json_format_is_sorted_sparse_triplets() {
        let p = BivariatePoly::from_terms(Grading::Total, 2, 2, &[(0, 2, c(1.0, -1.0)), (1, 0, c(0.25, 0.0))]).unwrap();
        let text = p.to_json_string();
        assert_eq!(
            text,
            r#"{"grading":"total","d":2,"e":2,"coeffs":[[0,2,1.0,-1.0],[1,0,0.25,0.0]]}"#
        );
        assert_eq!(BivariatePoly::from_json_str(&text).unwrap(), p);
        let unsorted = r#"{"grading":"bidegree","d":1,"e":1,"coeffs":[[1,0,1,0],[0,1,1,0]]}"#;
        assert!(BivariatePoly::from_json_str(unsorted).is_err());
        let extra = r#"{"grading":"bidegree","d":1,"e":1,"coeffs":[],"unit":true}"#;
        assert!(BivariatePoly::from_json_str(extra).is_err());
    }

    fn arb_poly() -> impl Strategy<Value = BivariatePoly> {
        proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 12).prop_filter_map("nonzero", |v| {
            let coeffs: Vec<_> = v.into_iter().map(|(a, b)| c(a, b)).collect();
            let p = BivariatePoly::from_dense(Grading::Bidegree, 2, 3, coeffs).ok()?;
            (p.max_modulus() > 1e-6).then_some(p)
        })
    }

    proptest! {
        #[test]
        fn make_unit_is_idempotent_and_scale_free(
            p in arb_poly(),
            re in -3.0f64..3.0,
            im in -3.0f64..3.0,
        ) {
            prop_assume!(re.hypot(im) > 1e-3);
            let u = make_unit(&p).unwrap();
            prop_assert!(u.is_unit());
            prop_assert_eq!(&make_unit(&u).unwrap(), &u);
            let v = make_unit(&p.scale(c(re, im))).unwrap();
            for (a, b) in u.coeffs().iter().zip(v.coeffs()) {
                prop_assert!((a.norm() - b.norm()).abs() <= 1e-12);
            }
        }
    }
}
