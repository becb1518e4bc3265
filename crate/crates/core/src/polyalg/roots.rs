use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_PI, SQRT_2};

use super::UnivariatePoly;
use crate::error::{Error, Result};

/// All roots with multiplicity, from the eigenvalues of the companion matrix
/// of the monic rescaling. Each eigenvalue gets at most two Newton steps,
/// kept only when they shrink the residual.
pub fn roots(p: &UnivariatePoly) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if n == 0 {
        return Err(Error::Degenerate("constant polynomial has no roots to find".into()));
    }
    let c = p.coeffs();
    let lead = c[n];
    let mut companion = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        companion[(i, n - 1)] = -c[i] / lead;
    }
    let eig = companion_eigenvalues(&companion)?;

    let deriv = UnivariatePoly::new(c.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect());
    let mut out: Vec<Complex64> = eig.iter().map(|&r| polish(p, &deriv, r)).collect();
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

/// Unshifted trouble cases (e.g. `w^2 - 1`, nilpotent companions) can stall
/// the QR sweep; retry on `C + σI` with a fixed off-axis shift.
fn companion_eigenvalues(companion: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = companion.nrows();
    let scale = companion.iter().map(|c| c.norm()).fold(1.0, f64::max);
    for shift in [0.0, FRAC_1_PI, 0.577_215_665, SQRT_2] {
        let sigma = Complex64::new(shift, 0.5 * shift) * scale;
        let shifted = companion + DMatrix::from_diagonal_element(n, n, sigma);
        if let Some(schur) = shifted.try_schur(f64::EPSILON, 10_000) {
            if let Some(eig) = schur.eigenvalues() {
                return Ok(eig.iter().map(|l| l - sigma).collect());
            }
        }
    }
    Err(Error::Degenerate("companion Schur iteration did not converge".into()))
}

fn polish(p: &UnivariatePoly, dp: &UnivariatePoly, mut r: Complex64) -> Complex64 {
    let mut res = p.eval(r).norm();
    for _ in 0..2 {
        let d = dp.eval(r);
        if d.norm() == 0.0 {
            break;
        }
        let cand = r - p.eval(r) / d;
        let cres = p.eval(cand).norm();
        if cand.is_finite() && cres < res {
            r = cand;
            res = cres;
        } else {
            break;
        }
    }
    r
}
