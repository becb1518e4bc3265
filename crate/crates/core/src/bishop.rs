//! Bishop polynomials: bidegree-`(d, e)` unit polynomials vanishing to high
//! order along the curve at a base point, and the Green's-function rates that
//! make their restrictions to the curve exponentially small.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curve::{unit_root, CurveC2};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::polyalg::{null_unit_vector, taylor_pullback, BivariatePoly, UnivariatePoly, VanishingSystem};

/// Samples of the unit circle `K` used for rates and sup norms.
pub const K_SAMPLES: usize = 4096;
/// Harmonic modes of the annulus correction.
const ANNULUS_MODES: usize = 48;
const ANNULUS_RING: usize = 512;
/// A pullback below this fraction of its trivial bound counts as identically zero.
const DEGENERATE_REL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    Disk { radius: f64, center: Complex64 },
    Annulus { inner: f64, outer: f64 },
}

impl DomainSpec {
    pub fn disk(radius: f64) -> Self {
        DomainSpec::Disk {
            radius,
            center: Complex64::new(0.0, 0.0),
        }
    }

    /// Disk of radius `0.9/ρ` for polynomial data, else the annulus
    /// `(1.1ρ, 0.9/ρ)`.
    pub fn default_for(curve: &CurveC2) -> Self {
        let rho = curve.rho();
        if curve.is_polynomial() {
            Self::disk(0.9 / rho)
        } else {
            DomainSpec::Annulus {
                inner: 1.1 * rho,
                outer: 0.9 / rho,
            }
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            DomainSpec::Disk { radius, center } => (z - center).norm() < radius,
            DomainSpec::Annulus { inner, outer } => inner < z.norm() && z.norm() < outer,
        }
    }

    fn validate(&self, zeta0: Complex64) -> Result<()> {
        match *self {
            DomainSpec::Disk { radius, center } => {
                if !(radius > 0.0) || !(center.norm() + 1.0 < radius) {
                    return Err(Error::Geometry(format!(
                        "unit circle not inside disk(R = {radius}, center = {center})"
                    )));
                }
            }
            DomainSpec::Annulus { inner, outer } => {
                if !(inner > 0.0 && inner < 1.0 && outer > 1.0) {
                    return Err(Error::Geometry(format!(
                        "unit circle not inside annulus({inner}, {outer})"
                    )));
                }
            }
        }
        if !self.contains(zeta0) {
            return Err(Error::Geometry(format!("pole {zeta0} outside the domain")));
        }
        if (zeta0.norm() - 1.0).abs() < 1e-12 {
            return Err(Error::Geometry(format!("pole {zeta0} lies on the unit circle")));
        }
        Ok(())
    }
}

/// Green's function of a disk or annulus with a fixed pole.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenFunction {
    domain: DomainSpec,
    pole: Complex64,
    /// Annulus only: `[c0, c_log, (a_n, b_n, c_n, d_n) for n = 1..]`.
    harmonic: Vec<f64>,
}

impl GreenFunction {
    pub fn new(domain: DomainSpec, pole: Complex64) -> Result<Self> {
        domain.validate(pole)?;
        let harmonic = match domain {
            DomainSpec::Disk { .. } => vec![],
            DomainSpec::Annulus { inner, outer } => fit_annulus_correction(inner, outer, pole)?,
        };
        Ok(Self { domain, pole, harmonic })
    }

    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    pub fn pole(&self) -> Complex64 {
        self.pole
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        match self.domain {
            DomainSpec::Disk { radius, center } => {
                let u = (z - center) / radius;
                let a = (self.pole - center) / radius;
                ((Complex64::new(1.0, 0.0) - a.conj() * u).norm() / (u - a).norm()).ln()
            }
            DomainSpec::Annulus { inner, outer } => {
                -(z - self.pole).norm().ln() + eval_annulus_harmonic(&self.harmonic, inner, outer, z)
            }
        }
    }
}

fn annulus_basis(inner: f64, outer: f64, z: Complex64) -> Vec<f64> {
    let (rho, theta) = z.to_polar();
    let mut row = Vec::with_capacity(2 + 4 * ANNULUS_MODES);
    row.push(1.0);
    row.push(rho.ln());
    for n in 1..=ANNULUS_MODES {
        let grow = (rho / outer).powi(n as i32);
        let decay = (inner / rho).powi(n as i32);
        let (s, c) = (n as f64 * theta).sin_cos();
        row.extend([grow * c, decay * c, grow * s, decay * s]);
    }
    row
}

fn eval_annulus_harmonic(coeffs: &[f64], inner: f64, outer: f64, z: Complex64) -> f64 {
    annulus_basis(inner, outer, z)
        .iter()
        .zip(coeffs)
        .map(|(b, c)| b * c)
        .sum()
}

/// Least-squares fit of `h` harmonic in the annulus with `h = log|z - ζ0|` on
/// both boundary circles.
fn fit_annulus_correction(inner: f64, outer: f64, pole: Complex64) -> Result<Vec<f64>> {
    let ncols = 2 + 4 * ANNULUS_MODES;
    let mut a = DMatrix::<f64>::zeros(2 * ANNULUS_RING, ncols);
    let mut b = DVector::<f64>::zeros(2 * ANNULUS_RING);
    for (ring, radius) in [inner, outer].into_iter().enumerate() {
        for j in 0..ANNULUS_RING {
            let z = radius * unit_root(j, ANNULUS_RING);
            let row = ring * ANNULUS_RING + j;
            for (k, v) in annulus_basis(inner, outer, z).into_iter().enumerate() {
                a[(row, k)] = v;
            }
            b[row] = (z - pole).norm().ln();
        }
    }
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Geometry(format!("annulus harmonic fit failed: {e}")))?;
    Ok(x.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenRate {
    /// `sup_K e^{-G(ζ0, ·)}`.
    pub r: f64,
    pub domain: DomainSpec,
    pub zeta0: Complex64,
    /// A maximizing sample of `K`.
    pub argmax: Complex64,
}

pub fn green_rate(domain: DomainSpec, zeta0: Complex64) -> Result<GreenRate> {
    let green = GreenFunction::new(domain, zeta0)?;
    if let DomainSpec::Disk { radius, center } = domain {
        if center == Complex64::new(0.0, 0.0) && zeta0 == center {
            return Ok(GreenRate {
                r: 1.0 / radius,
                domain,
                zeta0,
                argmax: Complex64::new(1.0, 0.0),
            });
        }
    }
    let (argmax, r) = (0..K_SAMPLES)
        .map(|j| {
            let z = unit_root(j, K_SAMPLES);
            (z, (-green.eval(z)).exp())
        })
        .fold((Complex64::new(1.0, 0.0), f64::NEG_INFINITY), |acc, x| {
            if x.1 > acc.1 {
                x
            } else {
                acc
            }
        });
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Geometry(format!("computed rate {r} outside (0, 1)")));
    }
    Ok(GreenRate {
        r,
        domain,
        zeta0,
        argmax,
    })
}

/// Vanishing order imposed per component: `de` for one component, else
/// `floor(de / N)`.
pub fn vanishing_order(n_components: usize, d: usize, e: usize) -> usize {
    if n_components == 1 {
        d * e
    } else {
        d * e / n_components
    }
}

/// Unit bidegree-`(d, e)` polynomial whose pullback along every component
/// vanishes to the order of [`vanishing_order`] at `zeta0`.
pub fn construct_bishop(curve: &CurveC2, d: usize, e: usize, zeta0: Complex64) -> Result<BivariatePoly> {
    let n = curve.n_components();
    if d + e <= n {
        return Err(Error::Precondition(format!(
            "need d + e > N for N = {n} components, got d = {d}, e = {e}"
        )));
    }
    let order = vanishing_order(n, d, e);
    if order == 0 {
        return Err(Error::Precondition(format!(
            "vanishing order de/N is zero for d = {d}, e = {e}"
        )));
    }
    if !curve.admissible_base_point(zeta0) {
        return Err(Error::Precondition(format!(
            "base point {zeta0} outside the annulus of the curve"
        )));
    }
    let systems: Vec<VanishingSystem> = curve
        .components()
        .iter()
        .map(|c| taylor_pullback(&c.f, &c.g, zeta0, d, e, order))
        .collect::<Result<_>>()?;
    null_unit_vector(&VanishingSystem::stack(&systems)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRecord {
    pub d: usize,
    pub e: usize,
    pub lambda: usize,
    pub sup_norm_k: f64,
    pub predicted_rate: f64,
    pub fitted_c: f64,
    pub r0: f64,
    pub passes: bool,
    /// Pullback numerically identically zero; excluded from the fit.
    pub degenerate: bool,
}

impl DecayRecord {
    /// `sup_norm_K^{1/λ}`.
    pub fn empirical_rate(&self) -> f64 {
        self.sup_norm_k.powf(1.0 / self.lambda as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum R0Policy {
    /// `r0 = sqrt(r)`.
    Sqrt,
    Fixed(f64),
}

impl R0Policy {
    pub fn resolve(self, r: f64) -> Result<f64> {
        let r0 = match self {
            R0Policy::Sqrt => r.sqrt(),
            R0Policy::Fixed(v) => v,
        };
        if !(r < r0 && r0 < 1.0) {
            return Err(Error::Parameter(format!("r0 = {r0} must satisfy r = {r} < r0 < 1")));
        }
        Ok(r0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTable {
    pub records: Vec<DecayRecord>,
    pub fitted_c: f64,
    pub rate: GreenRate,
    pub r0: f64,
}

/// Sup norms on `K` of the Bishop polynomials over `d_list × e_list` (rows
/// ordered by `d`, then `e`), with the least constant `C` such that every
/// non-degenerate record obeys `sup <= C^{d+e} r^λ`.
pub fn decay_table(
    curve: &CurveC2,
    zeta0: Complex64,
    d_list: &[usize],
    e_list: &[usize],
    rate: &GreenRate,
    r0_policy: R0Policy,
    exec: Exec,
) -> Result<DecayTable> {
    let r = rate.r;
    let r0 = r0_policy.resolve(r)?;
    let pairs: Vec<(usize, usize)> = d_list
        .iter()
        .flat_map(|&d| e_list.iter().map(move |&e| (d, e)))
        .collect();
    let (bz, bw) = curve.coordinate_bounds(K_SAMPLES);
    let measured = par::try_map_indexed(exec, pairs.len(), |k| {
        let (d, e) = pairs[k];
        let f = construct_bishop(curve, d, e, zeta0)?;
        let sup = crate::curve::sup_norm_on_curve(&f, curve, K_SAMPLES)?;
        let trivial: f64 = f
            .terms()
            .map(|(n, m, c)| c.norm() * bz.powi(n as i32) * bw.powi(m as i32))
            .sum();
        Ok((sup, sup <= DEGENERATE_REL * trivial))
    })?;
    let lambda_of = |d: usize, e: usize| vanishing_order(curve.n_components(), d, e);
    let fitted_c = pairs
        .iter()
        .zip(&measured)
        .filter(|(_, m)| !m.1)
        .map(|(&(d, e), m)| {
            let w = (d + e) as f64;
            m.0.powf(1.0 / w) / r.powf(lambda_of(d, e) as f64 / w)
        })
        .fold(0.0, f64::max);
    let records = pairs
        .iter()
        .zip(&measured)
        .map(|(&(d, e), &(sup, degenerate))| {
            let lambda = lambda_of(d, e);
            let sup_norm_k = if degenerate { 0.0 } else { sup };
            let bound = fitted_c.powi((d + e) as i32) * r.powi(lambda as i32);
            DecayRecord {
                d,
                e,
                lambda,
                sup_norm_k,
                predicted_rate: r,
                fitted_c,
                r0,
                passes: degenerate || sup_norm_k <= bound * (1.0 + 1e-12),
                degenerate,
            }
        })
        .collect();
    Ok(DecayTable {
        records,
        fitted_c,
        rate: rate.clone(),
        r0,
    })
}

/// Whether `(MC)^{d+e} r^{de} <= r0^{de}`, i.e. `(1/d + 1/e) log(MC) <= log(r0/r)`.
pub fn threshold_holds(mc: f64, r: f64, r0: f64, d: usize, e: usize) -> bool {
    (1.0 / d as f64 + 1.0 / e as f64) * mc.ln() <= (r0 / r).ln()
}

/// Least `d0` such that the threshold inequality holds for all `d, e > d0`.
pub fn degree_threshold(m: f64, c: f64, r: f64, r0: f64) -> Result<usize> {
    if !(r > 0.0 && r < r0 && r0 < 1.0) {
        return Err(Error::Parameter(format!("need 0 < r < r0 < 1, got r = {r}, r0 = {r0}")));
    }
    if !(m >= 1.0) || !(m * c >= 1.0) {
        return Err(Error::Parameter(format!(
            "need M >= 1 and MC >= 1, got M = {m}, C = {c}"
        )));
    }
    let mc = m * c;
    // the worst case is d = e = d0 + 1, requiring d0 + 1 >= 2 log(MC)/log(r0/r)
    let x = 2.0 * mc.ln() / (r0 / r).ln();
    let mut d0 = (x.ceil() as usize).saturating_sub(1);
    while !threshold_holds(mc, r, r0, d0 + 1, d0 + 1) {
        d0 += 1;
    }
    while d0 > 0 && threshold_holds(mc, r, r0, d0, d0) {
        d0 -= 1;
    }
    Ok(d0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroOrderReport {
    pub r: f64,
    pub lambda: usize,
    /// `sup_K |f| / r^λ` per trial.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub all_pass: bool,
}

/// Synthesizes holomorphic functions bounded by 1 on the domain with a zero of
/// order `λ` at `zeta0` and compares `sup_K |f|` with `r^λ`. Trial 0 is the
/// extremal `φ^λ`, `φ` the disk automorphism sending `zeta0` to 0 (for disks),
/// or `(z - ζ0)^λ` renormalized (for annuli).
pub fn lemma21_check(
    domain: DomainSpec,
    zeta0: Complex64,
    lambda: usize,
    trials: usize,
    seed: u64,
) -> Result<ZeroOrderReport> {
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    let rate = green_rate(domain, zeta0)?;
    let bound = rate.r.powi(lambda as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratios: Vec<f64> = (0..trials)
        .map(|t| {
            let f = synthesize(domain, zeta0, lambda, t == 0, &mut rng);
            let sup = (0..K_SAMPLES)
                .map(|j| f(unit_root(j, K_SAMPLES)).norm())
                .fold(0.0, f64::max);
            sup / bound
        })
        .collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ZeroOrderReport {
        r: rate.r,
        lambda,
        all_pass: max_ratio <= 1.0 + 1e-9,
        ratios,
        max_ratio,
    })
}

fn synthesize(
    domain: DomainSpec,
    zeta0: Complex64,
    lambda: usize,
    extremal: bool,
    rng: &mut ChaCha8Rng,
) -> Box<dyn Fn(Complex64) -> Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let random_point = |rng: &mut ChaCha8Rng, radius: f64| {
        Complex64::from_polar(
            radius * rng.random::<f64>().sqrt(),
            rng.random_range(0.0..std::f64::consts::TAU),
        )
    };
    match domain {
        DomainSpec::Disk { radius, center } => {
            let a = (zeta0 - center) / radius;
            let extra: Vec<Complex64> = if extremal {
                vec![]
            } else {
                (0..rng.random_range(0..4)).map(|_| random_point(rng, 0.95)).collect()
            };
            let phase = if extremal {
                one
            } else {
                Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
            };
            let blaschke = move |b: Complex64, u: Complex64| (u - b) / (one - b.conj() * u);
            Box::new(move |z| {
                let u = (z - center) / radius;
                let mut v = phase * blaschke(a, u).powu(lambda as u32);
                for &b in &extra {
                    v *= blaschke(b, u);
                }
                v
            })
        }
        DomainSpec::Annulus { inner, outer } => {
            let h = if extremal {
                UnivariatePoly::new(vec![one])
            } else {
                let deg = rng.random_range(0..5);
                UnivariatePoly::new(
                    (0..=deg)
                        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect(),
                )
            };
            let raw = move |z: Complex64| (z - zeta0).powu(lambda as u32) * h.eval(z);
            // max principle: the sup over the domain is attained on the two
            // circles; dense samples plus the largest step change bound it
            let n = 16 * K_SAMPLES;
            let mut sup: f64 = 0.0;
            let mut jump: f64 = 0.0;
            for radius in [inner, outer] {
                let mut prev = raw(Complex64::new(radius, 0.0));
                for j in 1..=n {
                    let v = raw(radius * unit_root(j % n, n));
                    sup = sup.max(v.norm());
                    jump = jump.max((v - prev).norm());
                    prev = v;
                }
            }
            let norm = sup + jump;
            Box::new(move |z| raw(z) / norm)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::fixtures::{cubic, parabola, two_circles};
    use crate::curve::{CurveComponent, LaurentPoly};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disk_rates() {
        assert_eq!(green_rate(DomainSpec::disk(4.0), c(0.0, 0.0)).unwrap().r, 0.25);
        assert_eq!(green_rate(DomainSpec::disk(2.0), c(0.0, 0.0)).unwrap().r, 0.5);
        let mut prev = 1.0;
        for radius in [1.5, 2.0, 3.0, 5.0] {
            let r = green_rate(DomainSpec::disk(radius), c(0.2, 0.1)).unwrap().r;
            assert!(r < prev);
            prev = r;
        }
        assert!(green_rate(DomainSpec::disk(0.9), c(0.0, 0.0)).is_err());
        assert!(green_rate(DomainSpec::disk(2.0), c(1.0, 0.0)).is_err());
        assert!(green_rate(DomainSpec::Annulus { inner: 0.5, outer: 2.0 }, c(0.3, 0.0)).is_err());
    }

    #[test]
    fn annulus_green_vanishes_on_boundary() {
        let g = GreenFunction::new(
            DomainSpec::Annulus {
                inner: 0.25,
                outer: 4.0,
            },
            c(0.55, 0.0),
        )
        .unwrap();
        for j in 0..97 {
            let t = unit_root(j, 97);
            assert!(g.eval(0.25 * t).abs() < 1e-9);
            assert!(g.eval(4.0 * t).abs() < 1e-9);
        }
        assert!(g.eval(c(0.0, 1.0)) > 0.0);
    }

    /// Dirichlet problem for `h` in log-polar coordinates, where the Laplacian
    /// is the flat one, by SOR on the five-point stencil.
    fn fd_rate(inner: f64, outer: f64, pole: Complex64, ns: usize, nt: usize) -> f64 {
        let (s0, s1) = (inner.ln(), outer.ln());
        let hs = (s1 - s0) / ns as f64;
        let ht = std::f64::consts::TAU / nt as f64;
        let at = |i: usize, j: usize| Complex64::from_polar((s0 + i as f64 * hs).exp(), j as f64 * ht);
        let mut u = vec![vec![0.0; nt]; ns + 1];
        for j in 0..nt {
            u[0][j] = (at(0, j) - pole).norm().ln();
            u[ns][j] = (at(ns, j) - pole).norm().ln();
        }
        let (ws, wt) = (1.0 / (hs * hs), 1.0 / (ht * ht));
        let diag = 2.0 * (ws + wt);
        let omega = 2.0 / (1.0 + (std::f64::consts::PI / ns.max(nt) as f64 * 2.0).sin());
        for _ in 0..20_000 {
            let mut delta: f64 = 0.0;
            for i in 1..ns {
                for j in 0..nt {
                    let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
                    let gs = (ws * (u[i - 1][j] + u[i + 1][j]) + wt * (u[i][jm] + u[i][jp])) / diag;
                    let new = u[i][j] + omega * (gs - u[i][j]);
                    delta = delta.max((new - u[i][j]).abs());
                    u[i][j] = new;
                }
            }
            if delta < 1e-13 {
                break;
            }
        }
        let mid = ns / 2;
        (0..nt)
            .map(|j| {
                let z = at(mid, j);
                (-(-(z - pole).norm().ln() + u[mid][j])).exp()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn annulus_rate_matches_finite_differences() {
        let spectral = green_rate(
            DomainSpec::Annulus {
                inner: 0.25,
                outer: 4.0,
            },
            c(0.55, 0.0),
        )
        .unwrap()
        .r;
        let coarse = fd_rate(0.25, 4.0, c(0.55, 0.0), 64, 128);
        let fine = fd_rate(0.25, 4.0, c(0.55, 0.0), 128, 256);
        // second-order scheme: extrapolate away the leading error term
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        assert!(
            (spectral - extrapolated).abs() < 1e-3,
            "{spectral} vs {extrapolated} ({fine})"
        );
    }

    #[test]
    fn bishop_on_graph() {
        let f = construct_bishop(&parabola(), 2, 1, c(0.3, 0.0)).unwrap();
        assert!(f.is_unit());
        let sys = taylor_pullback(
            &parabola().components()[0].f,
            &parabola().components()[0].g,
            c(0.3, 0.0),
            2,
            1,
            2,
        )
        .unwrap();
        let coeffs = DVector::from_column_slice(f.coeffs());
        assert!((&sys.matrix * coeffs).norm() < 1e-8);
        // w - z^2 lies in the kernel, so the system is feasible
        let mut exact = vec![c(0.0, 0.0); 6];
        exact[1] = c(1.0, 0.0);
        exact[4] = c(-1.0, 0.0);
        assert!((&sys.matrix * DVector::from_vec(exact)).norm() < 1e-14);
    }

    #[test]
    fn bishop_multi_component() {
        let curve = two_circles();
        let f = construct_bishop(&curve, 2, 2, curve.default_base_point()).unwrap();
        assert!(f.is_unit());
        for comp in curve.components() {
            let sys = taylor_pullback(&comp.f, &comp.g, curve.default_base_point(), 2, 2, 2).unwrap();
            assert!((&sys.matrix * DVector::from_column_slice(f.coeffs())).norm() < 1e-8);
        }
        let three = CurveC2::new(
            "three",
            0.5,
            vec![
                CurveComponent::new(LaurentPoly::monomial(1, c(1.0, 0.0)), LaurentPoly::zero()),
                CurveComponent::new(
                    LaurentPoly::monomial(1, c(0.5, 0.0)),
                    LaurentPoly::monomial(0, c(1.0, 0.0)),
                ),
                CurveComponent::new(
                    LaurentPoly::monomial(1, c(0.25, 0.0)),
                    LaurentPoly::monomial(0, c(2.0, 0.0)),
                ),
            ],
        )
        .unwrap();
        assert!(matches!(
            construct_bishop(&three, 1, 1, c(0.0, 0.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn decay_on_cubic() {
        let rate = green_rate(DomainSpec::disk(2.0), c(0.0, 0.0)).unwrap();
        let table = decay_table(
            &cubic(),
            c(0.0, 0.0),
            &[3, 4, 5, 6],
            &[3],
            &rate,
            R0Policy::Sqrt,
            Exec::Sequential,
        )
        .unwrap();
        assert!(table.records.iter().all(|r| r.passes));
        assert_eq!(table.records.iter().map(|r| r.d).collect::<Vec<_>>(), vec![3, 4, 5, 6]);
        // the pullback has degree d + 9 < 3d once d >= 5, so it vanishes identically
        for r in &table.records {
            assert_eq!(r.degenerate, r.d >= 5, "{r:?}");
            if !r.degenerate {
                assert!(r.empirical_rate() < 1.0);
            }
        }
        assert!((table.r0 - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(degree_threshold(1.0, 1.0, 0.5, 0.9).unwrap(), 0);
        assert_eq!(degree_threshold(10.0, 1.0, 0.5, 0.9).unwrap(), 7);
        assert!(degree_threshold(10.0, 1.0, 0.9, 0.5).is_err());
        assert!(degree_threshold(10.0, 1.0, 0.9, 0.9).is_err());
        for (m, cc, r, r0) in [(3.0, 2.0, 0.2, 0.6), (1.5, 1.0, 0.4, 0.5), (50.0, 1.3, 0.1, 0.95)] {
            let d0 = degree_threshold(m, cc, r, r0).unwrap();
            for d in d0 + 1..=d0 + 50 {
                for e in d0 + 1..=d0 + 50 {
                    assert!(threshold_holds(m * cc, r, r0, d, e));
                }
            }
            if d0 >= 1 {
                assert!(!threshold_holds(m * cc, r, r0, d0, d0));
            }
        }
    }

    #[test]
    fn zero_order_check_disk_and_annulus() {
        let exact = lemma21_check(DomainSpec::disk(2.0), c(0.0, 0.0), 4, 1, 0).unwrap();
        assert!((exact.ratios[0] - 1.0).abs() < 1e-12);
        let zero = lemma21_check(DomainSpec::disk(3.0), c(0.0, 0.0), 0, 20, 1).unwrap();
        assert!(zero.all_pass);
        let off = lemma21_check(DomainSpec::disk(3.0), c(0.4, -0.2), 3, 50, 2).unwrap();
        assert!(off.all_pass, "{}", off.max_ratio);
        let ann = lemma21_check(DomainSpec::Annulus { inner: 0.4, outer: 2.5 }, c(1.5, 0.0), 2, 20, 3).unwrap();
        assert!(ann.all_pass, "{}", ann.max_ratio);
    }
}
