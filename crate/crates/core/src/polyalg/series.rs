use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{make_unit, BivariatePoly, Grading};
use crate::curve::LaurentPoly;
use crate::error::{Error, Result};

/// Relative residual accepted for a computed kernel vector.
pub const NULL_RESIDUAL_TOL: f64 = 1e-8;
const CONDITION_WARN: f64 = 1e12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Linear conditions on the coefficients `c_{nm}` of a bidegree-`(d, e)`
/// polynomial `F` forcing `F(f(ζ), g(ζ))` to vanish at a base point.
///
/// Row `ν` of each stacked block holds the `ν`-th Taylor coefficients of the
/// pullbacks `f^n g^m`; columns follow the `(n, m)` lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct VanishingSystem {
    pub matrix: DMatrix<Complex64>,
    pub base_point: Complex64,
    /// Vanishing order imposed per component.
    pub order: usize,
    pub d: usize,
    pub e: usize,
}

impl VanishingSystem {
    /// The system with no conditions.
    pub fn empty(d: usize, e: usize, base_point: Complex64) -> Self {
        Self {
            matrix: DMatrix::zeros(0, (d + 1) * (e + 1)),
            base_point,
            order: 0,
            d,
            e,
        }
    }

    pub fn n_columns(&self) -> usize {
        (self.d + 1) * (self.e + 1)
    }

    /// Row-wise concatenation of systems sharing `(d, e)` and base point.
    pub fn stack(systems: &[VanishingSystem]) -> Result<Self> {
        let first = systems
            .first()
            .ok_or_else(|| Error::Parameter("no systems to stack".into()))?;
        if systems
            .iter()
            .any(|s| (s.d, s.e, s.order) != (first.d, first.e, first.order))
        {
            return Err(Error::Parameter("stacked systems disagree on (d, e, order)".into()));
        }
        let rows: usize = systems.iter().map(|s| s.matrix.nrows()).sum();
        let mut matrix = DMatrix::zeros(rows, first.n_columns());
        let mut at = 0;
        for s in systems {
            matrix.rows_mut(at, s.matrix.nrows()).copy_from(&s.matrix);
            at += s.matrix.nrows();
        }
        Ok(Self {
            matrix,
            ..first.clone()
        })
    }
}

fn mul_truncated(a: &[Complex64], b: &[Complex64], order: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; order];
    for (i, x) in a.iter().enumerate().take(order) {
        if *x == ZERO {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(order - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn powers(series: &[Complex64], top: usize, order: usize) -> Vec<Vec<Complex64>> {
    let mut one = vec![ZERO; order];
    one[0] = Complex64::new(1.0, 0.0);
    let mut out = vec![one];
    for _ in 0..top {
        let next = mul_truncated(out.last().unwrap(), series, order);
        out.push(next);
    }
    out
}

/// Taylor coefficients through `order - 1` of every pullback `f^n g^m`,
/// `n <= d`, `m <= e`, at `zeta0`.
pub fn taylor_pullback(
    f: &LaurentPoly,
    g: &LaurentPoly,
    zeta0: Complex64,
    d: usize,
    e: usize,
    order: usize,
) -> Result<VanishingSystem> {
    if order == 0 {
        return Err(Error::Precondition("vanishing order must be at least 1".into()));
    }
    let fs = f.taylor_at(zeta0, order)?;
    let gs = g.taylor_at(zeta0, order)?;
    let fp = powers(&fs, d, order);
    let gp = powers(&gs, e, order);
    let cols = (d + 1) * (e + 1);
    let mut matrix = DMatrix::zeros(order, cols);
    for n in 0..=d {
        for m in 0..=e {
            let col = mul_truncated(&fp[n], &gp[m], order);
            for (nu, v) in col.into_iter().enumerate() {
                matrix[(nu, n * (e + 1) + m)] = v;
            }
        }
    }
    Ok(VanishingSystem {
        matrix,
        base_point: zeta0,
        order,
        d,
        e,
    })
}

/// A unit polynomial in the kernel of `sys`: the right singular vector of
/// least singular value, phase-fixed and normalized so its first
/// maximal-modulus coefficient is exactly 1.
pub fn null_unit_vector(sys: &VanishingSystem) -> Result<BivariatePoly> {
    let cols = sys.n_columns();
    let rows = sys.matrix.nrows();
    if rows == 0 {
        let mut coeffs = vec![ZERO; cols];
        coeffs[0] = Complex64::new(1.0, 0.0);
        return BivariatePoly::from_dense(Grading::Bidegree, sys.d, sys.e, coeffs);
    }
    if rows >= cols {
        return Err(Error::Precondition(format!(
            "{rows} conditions on {cols} coefficients: no kernel guaranteed"
        )));
    }
    // Pad to square so the full right singular basis is returned.
    let mut padded = DMatrix::zeros(cols, cols);
    padded.rows_mut(0, rows).copy_from(&sys.matrix);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^H");
    let sigma = &svd.singular_values;
    let (k_min, _) = sigma.iter().enumerate().fold(
        (0, f64::INFINITY),
        |(bk, bv), (k, &s)| if s < bv { (k, s) } else { (bk, bv) },
    );
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);

    let mut kept: Vec<f64> = sigma.iter().cloned().collect();
    kept.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let smallest_row_sigma = kept[rows - 1];
    if sigma_max > 0.0 && sigma_max > CONDITION_WARN * smallest_row_sigma {
        log::warn!("vanishing system of {rows} rows is ill-conditioned (cond > {CONDITION_WARN:.0e})");
    }

    let coeffs: Vec<Complex64> = v_t.row(k_min).iter().map(|c| c.conj()).collect();
    let poly = make_unit(&BivariatePoly::from_dense(Grading::Bidegree, sys.d, sys.e, coeffs)?)?;

    let c = nalgebra::DVector::from_column_slice(poly.coeffs());
    let residual = (&sys.matrix * &c).norm();
    let scale = sigma_max * c.norm();
    if residual > NULL_RESIDUAL_TOL * scale {
        return Err(Error::Conditioning {
            residual: residual / scale.max(f64::MIN_POSITIVE),
            tolerance: NULL_RESIDUAL_TOL,
        });
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::LaurentPoly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zeta() -> LaurentPoly {
        LaurentPoly::monomial(1, c(1.0, 0.0))
    }

    fn zeta2() -> LaurentPoly {
        LaurentPoly::monomial(2, c(1.0, 0.0))
    }

    /// Taylor coefficients of `Σ c_nm f^n g^m` at the base point.
    fn composed_taylor(sys: &VanishingSystem, p: &BivariatePoly) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(p.coeffs());
        (&sys.matrix * v).iter().cloned().collect()
    }

    #[test]
    fn pullback_examples_at_origin() {
        let sys = taylor_pullback(&zeta(), &zeta2(), c(0.0, 0.0), 1, 1, 1).unwrap();
        assert_eq!(sys.matrix.shape(), (1, 4));
        let row: Vec<_> = sys.matrix.row(0).iter().cloned().collect();
        assert_eq!(row, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);

        let sys = taylor_pullback(&zeta(), &zeta2(), c(0.0, 0.0), 1, 1, 2).unwrap();
        let row1: Vec<_> = sys.matrix.row(1).iter().cloned().collect();
        assert_eq!(row1, vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(taylor_pullback(&zeta(), &zeta2(), c(0.0, 0.0), 1, 1, 0).is_err());
    }

    /// Discrete Fourier coefficients on a small circle around the base point
    /// reproduce the Taylor coefficients of the composed function.
    #[test]
    fn pullback_matches_contour_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut rc = |k| -> Vec<Complex64> {
                (0..k)
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            };
            let f = LaurentPoly::polynomial(&rc(4)).unwrap();
            let g = LaurentPoly::polynomial(&rc(4)).unwrap();
            let coeffs = rc(9);
            let p = BivariatePoly::from_dense(Grading::Bidegree, 2, 2, coeffs).unwrap();
            let z0 = c(0.3, -0.2);
            let order = 5;
            let sys = taylor_pullback(&f, &g, z0, 2, 2, order).unwrap();
            let got = composed_taylor(&sys, &p);

            // h(z0 + t) is a polynomial of degree <= 12 in t, so 64 samples
            // alias nothing; a moderate radius keeps 1/r^ν rounding small.
            let radius = 0.25;
            let samples = 64;
            let h = |t: Complex64| p.eval(f.eval(t), g.eval(t));
            for (nu, value) in got.iter().enumerate() {
                let mut acc = c(0.0, 0.0);
                for j in 0..samples {
                    let u = crate::curve::unit_root(j, samples);
                    acc += h(z0 + u * radius) * u.powi(-(nu as i32));
                }
                let oracle = acc / (samples as f64) / radius.powi(nu as i32);
                let scale = value.norm().max(1.0);
                assert!(
                    (oracle - value).norm() <= 1e-6 * scale,
                    "nu={nu}: oracle {oracle} vs {value}"
                );
            }
        }
    }

    #[test]
    fn empty_system_gives_constant() {
        let sys = VanishingSystem::empty(2, 1, c(0.0, 0.0));
        let p = null_unit_vector(&sys).unwrap();
        assert_eq!(p.coeff(0, 0), c(1.0, 0.0));
        assert_eq!(p.terms().count(), 1);
    }

    #[test]
    fn kernel_vector_for_parabola() {
        // w - z² pulls back to zero; any returned F must vanish to order 2.
        let sys = taylor_pullback(&zeta(), &zeta2(), c(0.0, 0.0), 2, 1, 2).unwrap();
        let p = null_unit_vector(&sys).unwrap();
        assert!(p.is_unit());
        for v in composed_taylor(&sys, &p) {
            assert!(v.norm() < 1e-10);
        }
        let witness =
            BivariatePoly::from_terms(Grading::Bidegree, 2, 1, &[(0, 1, c(1.0, 0.0)), (2, 0, c(-1.0, 0.0))]).unwrap();
        assert!(composed_taylor(&sys, &witness).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn three_conditions_on_four_coefficients() {
        let f = LaurentPoly::polynomial(&[c(0.1, 0.0), c(1.0, 0.5), c(0.0, 0.3)]).unwrap();
        let g = LaurentPoly::polynomial(&[c(-0.2, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.4, 0.0)]).unwrap();
        let sys = taylor_pullback(&f, &g, c(0.2, 0.1), 1, 1, 3).unwrap();
        let p = null_unit_vector(&sys).unwrap();
        for v in composed_taylor(&sys, &p) {
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn overdetermined_is_rejected() {
        let sys = taylor_pullback(&zeta(), &zeta2(), c(0.0, 0.0), 1, 1, 4).unwrap();
        assert!(matches!(null_unit_vector(&sys), Err(Error::Precondition(_))));
    }

    #[test]
    fn dimension_count_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for d in 1..=4 {
            for e in 1..=3 {
                let cols = (d + 1) * (e + 1);
                for lambda in [1, cols / 2, cols - 1] {
                    let m = DMatrix::from_fn(lambda, cols, |_, _| {
                        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    });
                    let sys = VanishingSystem {
                        matrix: m,
                        base_point: c(0.0, 0.0),
                        order: lambda,
                        d,
                        e,
                    };
                    let p = null_unit_vector(&sys).unwrap();
                    assert!(p.is_unit());
                }
            }
        }
    }

    #[test]
    fn stacking_concatenates_rows() {
        let a = taylor_pullback(&zeta(), &zeta2(), c(0.0, 0.0), 1, 1, 2).unwrap();
        let b = taylor_pullback(&zeta2(), &zeta(), c(0.0, 0.0), 1, 1, 2).unwrap();
        let s = VanishingSystem::stack(&[a.clone(), b]).unwrap();
        assert_eq!(s.matrix.nrows(), 4);
        assert_eq!(s.matrix.rows(0, 2), a.matrix.rows(0, 2));
    }
}
