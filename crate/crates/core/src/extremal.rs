//! Hull membership through discretized extremal problems.
//!
//! For a point `x` and a polynomial space (total degree `d`, or bidegree
//! `(d, e)`), the program
//!
//! ```text
//! maximize Re P(x)  subject to  Re(e^{iθ_k} P(t_j)) <= 1
//! ```
//!
//! over boundary samples `t_j` and `K` directions `θ_k = 2πk/K` bounds
//! `sup |P(x)| / sup_γ |P|` from above, and from below after the factor
//! `cos(π/K)`. Polynomials vanishing on the sampled curve are split off first
//! through an SVD of the sample matrix: if `x` sees that kernel the program is
//! unbounded and the kernel polynomial is returned as the ray certificate;
//! otherwise the program is solved on the complementary subspace, where it is
//! always bounded.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curve::{unit_root, CurveC2};
use crate::error::{Error, Result};
use crate::fiber::{fiber_scan_with, FiberOptions, FiberSet, Window};
use crate::lp::{LpOutcome, PolytopeLp};
use crate::par::{self, Exec};
use crate::polyalg::{BivariatePoly, Grading};

pub const DEFAULT_DIRECTIONS: usize = 32;
/// Multiplicative slack on extremal values in membership decisions.
pub const MEMBERSHIP_TOL: f64 = 1e-6;
/// Singular values below this fraction of the largest span the kernel.
pub const RANK_TOL: f64 = 1e-10;
/// Size of the kernel component of the evaluation at `x` (scaled monomial
/// coordinates) that certifies a ray. Absolute, so that the test nests exactly
/// across polynomial spaces.
pub const RAY_TOL: f64 = 1e-8;
/// Accepted excess of `|P(t_j)|` over 1 after cut refinement.
pub const CUT_TOL: f64 = 1e-6;
/// Cap on tangent-cut rounds per solve.
pub const MAX_CUT_ROUNDS: usize = 32;
/// Tangents on each side of a violated sample's phase, at `π/K · 2^{-k}`.
const FAN_CUTS: i32 = 8;

struct Refined {
    optimum: f64,
    polygon_optimum: f64,
    coeffs: DVector<Complex64>,
    rounds: usize,
}

/// The polynomial space of an extremal problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Space {
    Total(usize),
    Bidegree(usize, usize),
}

impl Space {
    pub fn monomials(self) -> Vec<(usize, usize)> {
        match self {
            Space::Total(d) => (0..=d).flat_map(|n| (0..=d - n).map(move |m| (n, m))).collect(),
            Space::Bidegree(d, e) => (0..=d).flat_map(|n| (0..=e).map(move |m| (n, m))).collect(),
        }
    }

    /// Exponent applied to `M`: `d` for total degree, `d + e` for bidegree.
    pub fn weight(self) -> usize {
        match self {
            Space::Total(d) => d,
            Space::Bidegree(d, e) => d + e,
        }
    }

    fn poly_shape(self) -> (Grading, usize, usize) {
        match self {
            Space::Total(d) => (Grading::Total, d, d),
            Space::Bidegree(d, e) => (Grading::Bidegree, d, e),
        }
    }

    /// Largest `|exponent|` of `ζ` in any pulled-back monomial.
    fn pullback_span(self, curve: &CurveC2) -> usize {
        let (df, dg) = curve.degree_bounds();
        let (df, dg) = (df as usize, dg as usize);
        match self {
            Space::Total(d) => d * df.max(dg),
            Space::Bidegree(d, e) => d * df + e * dg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremalOptions {
    /// Boundary samples per component; `None` picks `max(64, 8·span)` where
    /// `span` bounds the degree in `ζ` of pulled-back polynomials.
    pub samples: Option<usize>,
    pub directions: usize,
    pub exec: Exec,
}

impl Default for ExtremalOptions {
    fn default() -> Self {
        Self {
            samples: None,
            directions: DEFAULT_DIRECTIONS,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremalStatus {
    Bounded,
    Unbounded,
    InfeasibleNumerics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LpStats {
    pub n_constraints: usize,
    pub n_variables: usize,
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalResult {
    /// `(refined optimum)^{1/weight}`, `+∞` when unbounded. Lies in `enclosure`.
    pub value: f64,
    pub status: ExtremalStatus,
    /// The optimizing polynomial (bounded) or a polynomial vanishing on the
    /// samples with `P(x) > 0` (unbounded).
    pub witness: BivariatePoly,
    pub space: Space,
    pub lp_stats: LpStats,
    /// Optimum after tangent-cut refinement.
    pub optimum: f64,
    /// `(polygon LP optimum)^{1/weight}`.
    pub raw_value: f64,
    /// Tangent-cut rounds spent on refinement.
    pub cut_rounds: usize,
    /// `[raw·cos(π/K)^{1/weight}, raw]`: the polygon relaxation brackets the
    /// sampled modulus problem.
    pub enclosure: (f64, f64),
    /// Norm of the kernel component of the evaluation functional.
    pub kernel_residual: f64,
}

impl ExtremalResult {
    pub fn degree(&self) -> usize {
        self.space.weight()
    }

    pub fn is_member(&self, m: f64) -> bool {
        self.status == ExtremalStatus::Bounded && self.value <= m * (1.0 + MEMBERSHIP_TOL)
    }
}

/// Precomputed sample matrix, kernel split, and constraint polytope for one
/// curve and polynomial space. Independent of the evaluation point.
#[derive(Debug)]
pub struct ExtremalProblem {
    space: Space,
    samples: usize,
    directions: usize,
    monomials: Vec<(usize, usize)>,
    scale: (f64, f64),
    range: DMatrix<Complex64>,
    kernel: DMatrix<Complex64>,
    /// Samples in range coordinates: row `j` evaluates at `t_j`.
    psi: DMatrix<Complex64>,
    lp: PolytopeLp,
}

impl ExtremalProblem {
    pub fn new(curve: &CurveC2, space: Space, samples: usize, directions: usize) -> Result<Self> {
        if samples < 64 {
            return Err(Error::Precondition(format!(
                "need S >= 64 boundary samples, got {samples}"
            )));
        }
        Self::build(curve, space, samples, directions)
    }

    /// Same problem on a coarse sampling (`S >= 8`). The LP is exact for the
    /// sampled constraints, but the samples no longer control the sup norm on
    /// the whole curve; meant for cross-checking the solver on small instances.
    pub fn coarse(curve: &CurveC2, space: Space, samples: usize, directions: usize) -> Result<Self> {
        if samples < 8 {
            return Err(Error::Precondition(format!(
                "need S >= 8 boundary samples, got {samples}"
            )));
        }
        Self::build(curve, space, samples, directions)
    }

    fn build(curve: &CurveC2, space: Space, samples: usize, directions: usize) -> Result<Self> {
        if directions < 8 || !directions.is_multiple_of(2) {
            return Err(Error::Precondition(format!(
                "direction count must be even and >= 8, got {directions}"
            )));
        }
        let monomials = space.monomials();
        let ncoef = monomials.len();
        let (bz, bw) = curve.coordinate_bounds(samples);
        let scale = (if bz > 0.0 { bz } else { 1.0 }, if bw > 0.0 { bw } else { 1.0 });

        let boundary = curve.sample_boundary(samples);
        let nrows = boundary.len();
        let mut b = DMatrix::<Complex64>::zeros(nrows.max(ncoef), ncoef);
        for (j, &(z, w)) in boundary.points.iter().enumerate() {
            let feats = scaled_monomials(&monomials, z / scale.0, w / scale.1);
            for (i, v) in feats.into_iter().enumerate() {
                b[(j, i)] = v;
            }
        }
        let svd = b.clone().svd(false, true);
        let v_t = svd.v_t.as_ref().expect("requested V^H");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &c| svd.singular_values[c].total_cmp(&svd.singular_values[a]));
        let sigma_max = svd.singular_values[order[0]];
        let rank = order
            .iter()
            .filter(|&&k| svd.singular_values[k] > RANK_TOL * sigma_max)
            .count();
        let cols_v: Vec<Vec<Complex64>> = order
            .iter()
            .map(|&k| v_t.row(k).iter().map(|c| c.conj()).collect())
            .collect();
        let range = DMatrix::from_fn(ncoef, rank, |i, l| cols_v[l][i]);
        let kernel = DMatrix::from_fn(ncoef, ncoef - rank, |i, l| cols_v[rank + l][i]);

        let psi = b.rows(0, nrows) * &range;
        let mut cols = Vec::with_capacity(nrows * directions * 2 * rank);
        for j in 0..nrows {
            for k in 0..directions {
                let rot = unit_root(k, directions);
                for l in 0..rank {
                    cols.push((rot * psi[(j, l)]).re);
                }
                for l in 0..rank {
                    cols.push(-(rot * psi[(j, l)]).im);
                }
            }
        }
        let lp = PolytopeLp::new(2 * rank.max(1), if rank == 0 { vec![0.0; 2] } else { cols })?;
        Ok(Self {
            space,
            samples,
            directions,
            monomials,
            scale,
            range,
            kernel,
            psi,
            lp,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn directions(&self) -> usize {
        self.directions
    }

    /// Dimension of the space of polynomials modulo those vanishing on the
    /// samples.
    pub fn rank(&self) -> usize {
        self.range.ncols()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn lp_stats(&self) -> LpStats {
        LpStats {
            n_constraints: self.lp.n_constraints(),
            n_variables: self.lp.n_variables(),
            directions: self.directions,
        }
    }

    fn features(&self, x: (Complex64, Complex64)) -> DVector<Complex64> {
        DVector::from_vec(scaled_monomials(
            &self.monomials,
            x.0 / self.scale.0,
            x.1 / self.scale.1,
        ))
    }

    /// `φ(x)ᵀN` for the orthonormal kernel basis `N`.
    fn kernel_component(&self, phi: &DVector<Complex64>) -> DVector<Complex64> {
        self.kernel.transpose() * phi
    }

    /// `max |P(x)|` over kernel polynomials of unit coefficient norm (scaled
    /// coordinates); above [`RAY_TOL`] the extremal program is unbounded.
    pub fn kernel_residual(&self, x: (Complex64, Complex64)) -> f64 {
        self.kernel_component(&self.features(x)).norm()
    }

    /// LP optimum on the range subspace, ignoring any kernel component.
    pub fn reduced_optimum(&self, x: (Complex64, Complex64)) -> Result<(f64, DVector<Complex64>)> {
        let phi = self.features(x);
        self.solve_reduced(&phi)
    }

    fn solve_reduced(&self, phi: &DVector<Complex64>) -> Result<(f64, DVector<Complex64>)> {
        self.solve_refined(phi).map(|r| (r.optimum, r.coeffs))
    }

    /// Polygon optimum, then tangent cuts `Re(e^{-i arg P(t_j)} P(t_j)) <= 1`
    /// at samples where `|P(t_j)| > 1` until the optimizer satisfies the
    /// modulus constraints to [`CUT_TOL`]. Every cut is valid for the modulus
    /// problem, so the refined optimum stays between the sampled modulus
    /// optimum and the polygon optimum.
    fn solve_refined(&self, phi: &DVector<Complex64>) -> Result<Refined> {
        let r = self.rank();
        if r == 0 {
            return Ok(Refined {
                optimum: 0.0,
                polygon_optimum: 0.0,
                coeffs: DVector::zeros(self.monomials.len()),
                rounds: 0,
            });
        }
        let c = self.range.transpose() * phi;
        let mut obj = Vec::with_capacity(2 * r);
        obj.extend(c.iter().map(|v| v.re));
        obj.extend(c.iter().map(|v| -v.im));
        let optimal = |outcome: LpOutcome| match outcome {
            LpOutcome::Optimal(sol) => Ok(sol),
            LpOutcome::Unbounded => Err(Error::Lp(
                "reduced program reported unbounded; rank split failed".into(),
            )),
        };
        let mut sol = optimal(self.lp.maximize(&obj)?)?;
        let polygon_optimum = sol.value;
        let mut lp = None::<PolytopeLp>;
        let mut rounds = 0;
        loop {
            let z = DVector::from_fn(r, |l, _| Complex64::new(sol.x[l], sol.x[r + l]));
            let vals = &self.psi * &z;
            let mut cuts = Vec::new();
            // phase error left by the previous round's fan
            let fan = PI / self.directions as f64 / (2.0 * FAN_CUTS as f64).powi(rounds as i32);
            let mut violated: Vec<(usize, f64)> = vals
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .filter(|&(_, a)| a > 1.0 + CUT_TOL)
                .collect();
            violated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for &(j, _) in &violated {
                let v = vals[j];
                // a fan of tangents around arg P(t_j): the optimizer drifts in
                // angle, and one cut per round would only halve the drift
                let base = v.conj() / v.norm();
                for k in -FAN_CUTS..=FAN_CUTS {
                    let offset = fan * k as f64 / FAN_CUTS as f64;
                    let rot = base * Complex64::from_polar(1.0, offset);
                    cuts.extend((0..r).map(|l| (rot * self.psi[(j, l)]).re));
                    cuts.extend((0..r).map(|l| -(rot * self.psi[(j, l)]).im));
                }
            }
            if cuts.is_empty() || rounds == MAX_CUT_ROUNDS {
                return Ok(Refined {
                    optimum: sol.value.min(polygon_optimum),
                    polygon_optimum,
                    coeffs: &self.range * z,
                    rounds,
                });
            }
            let parent = lp.as_ref().unwrap_or(&self.lp);
            let next = parent.with_columns(&cuts)?;
            sol = optimal(next.maximize_from(&obj, &sol.basis, parent.n_constraints())?)?;
            lp = Some(next);
            rounds += 1;
        }
    }

    fn to_poly(&self, scaled: &DVector<Complex64>) -> BivariatePoly {
        let (grading, d, e) = self.space.poly_shape();
        let terms: Vec<_> = self
            .monomials
            .iter()
            .zip(scaled.iter())
            .map(|(&(n, m), &a)| (n, m, a / (self.scale.0.powi(n as i32) * self.scale.1.powi(m as i32))))
            .collect();
        BivariatePoly::from_terms(grading, d, e, &terms).expect("monomials belong to the space")
    }

    pub fn solve(&self, x: (Complex64, Complex64)) -> Result<ExtremalResult> {
        let phi = self.features(x);
        let k = self.kernel_component(&phi);
        let kernel_residual = k.norm();
        let weight = self.space.weight() as f64;
        if kernel_residual > RAY_TOL {
            let dir = (&self.kernel * k.map(|v| v.conj())).unscale(k.norm());
            return Ok(ExtremalResult {
                value: f64::INFINITY,
                status: ExtremalStatus::Unbounded,
                witness: self.to_poly(&dir),
                space: self.space,
                lp_stats: self.lp_stats(),
                optimum: f64::INFINITY,
                raw_value: f64::INFINITY,
                cut_rounds: 0,
                enclosure: (f64::INFINITY, f64::INFINITY),
                kernel_residual,
            });
        }
        let refined = self.solve_refined(&phi)?;
        let raw_value = refined.polygon_optimum.max(0.0).powf(1.0 / weight);
        let shrink = (PI / self.directions as f64).cos().powf(1.0 / weight);
        Ok(ExtremalResult {
            value: refined.optimum.max(0.0).powf(1.0 / weight),
            status: ExtremalStatus::Bounded,
            witness: self.to_poly(&refined.coeffs),
            space: self.space,
            lp_stats: self.lp_stats(),
            optimum: refined.optimum,
            raw_value,
            cut_rounds: refined.rounds,
            enclosure: (raw_value * shrink, raw_value),
            kernel_residual,
        })
    }
}

fn scaled_monomials(monomials: &[(usize, usize)], u: Complex64, v: Complex64) -> Vec<Complex64> {
    let top_n = monomials.iter().map(|m| m.0).max().unwrap_or(0);
    let top_m = monomials.iter().map(|m| m.1).max().unwrap_or(0);
    let mut pu = vec![Complex64::new(1.0, 0.0); top_n + 1];
    let mut pv = vec![Complex64::new(1.0, 0.0); top_m + 1];
    for k in 1..=top_n {
        pu[k] = pu[k - 1] * u;
    }
    for k in 1..=top_m {
        pv[k] = pv[k - 1] * v;
    }
    monomials.iter().map(|&(n, m)| pu[n] * pv[m]).collect()
}

/// Caches one [`ExtremalProblem`] per polynomial space for a fixed curve.
#[derive(Debug)]
pub struct ExtremalEngine {
    curve: CurveC2,
    options: ExtremalOptions,
    cache: Mutex<HashMap<Space, Arc<ExtremalProblem>>>,
}

impl ExtremalEngine {
    pub fn new(curve: &CurveC2, options: ExtremalOptions) -> Self {
        Self {
            curve: curve.clone(),
            options,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn curve(&self) -> &CurveC2 {
        &self.curve
    }

    pub fn options(&self) -> ExtremalOptions {
        self.options
    }

    pub fn samples_for(&self, space: Space) -> usize {
        self.options
            .samples
            .unwrap_or_else(|| 64.max(8 * space.pullback_span(&self.curve)))
    }

    pub fn problem(&self, space: Space) -> Result<Arc<ExtremalProblem>> {
        if let Some(p) = self.cache.lock().unwrap().get(&space) {
            return Ok(p.clone());
        }
        let built = Arc::new(ExtremalProblem::new(
            &self.curve,
            space,
            self.samples_for(space),
            self.options.directions,
        )?);
        Ok(self.cache.lock().unwrap().entry(space).or_insert(built).clone())
    }

    pub fn extremal_value(&self, x: (Complex64, Complex64), d: usize) -> Result<ExtremalResult> {
        if d == 0 {
            return Err(Error::Precondition("degree must be at least 1".into()));
        }
        self.problem(Space::Total(d))?.solve(x)
    }

    /// `max_{1 <= d <= d_max} Λ_d(x)`; `+∞` as soon as any degree is unbounded.
    pub fn best_constant(&self, x: (Complex64, Complex64), d_max: usize) -> Result<BestConstant> {
        if d_max < 1 {
            return Err(Error::Precondition("d_max must be at least 1".into()));
        }
        // kernels nest in d, so the top degree decides unboundedness
        let top = self.extremal_value(x, d_max)?;
        if top.status == ExtremalStatus::Unbounded {
            return Ok(BestConstant {
                value: f64::INFINITY,
                per_degree: vec![],
            });
        }
        let mut per_degree = Vec::with_capacity(d_max);
        for d in 1..d_max {
            let r = self.extremal_value(x, d)?;
            per_degree.push(r.value);
        }
        per_degree.push(top.value);
        let value = per_degree.iter().cloned().fold(0.0, f64::max);
        Ok(BestConstant { value, per_degree })
    }

    /// Bidegree-`(d, e)` membership at level `M^{d+e}`.
    pub fn membership_bidegree(&self, z: Complex64, w: Complex64, m: f64, d: usize, e: usize) -> Result<Membership> {
        if m < 1.0 {
            return Err(Error::Precondition(format!("M must be >= 1, got {m}")));
        }
        if d == 0 || e == 0 {
            return Err(Error::Precondition("bidegree caps must be >= 1".into()));
        }
        let result = self.problem(Space::Bidegree(d, e))?.solve((z, w))?;
        Ok(Membership::from_result(result, m))
    }

    /// Total-degree membership at level `M^d`.
    pub fn membership_total(&self, x: (Complex64, Complex64), m: f64, d: usize) -> Result<Membership> {
        let result = self.extremal_value(x, d)?;
        Ok(Membership::from_result(result, m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestConstant {
    pub value: f64,
    /// `Λ_d` for `d = 1..=d_max` (empty when unbounded).
    pub per_degree: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// `value / M`, `+∞` when unbounded.
    pub worst_ratio: f64,
    pub witness: BivariatePoly,
    pub result: ExtremalResult,
}

impl Membership {
    fn from_result(result: ExtremalResult, m: f64) -> Self {
        Self {
            member: result.is_member(m),
            worst_ratio: result.value / m,
            witness: result.witness.clone(),
            result,
        }
    }
}

/// Degree-`d` extremal value at `x` with explicit sampling parameters.
pub fn extremal_value(
    curve: &CurveC2,
    x: (Complex64, Complex64),
    d: usize,
    samples: usize,
    directions: usize,
) -> Result<ExtremalResult> {
    if d == 0 {
        return Err(Error::Precondition("degree must be at least 1".into()));
    }
    ExtremalProblem::new(curve, Space::Total(d), samples, directions)?.solve(x)
}

pub fn best_constant(curve: &CurveC2, x: (Complex64, Complex64), d_max: usize) -> Result<f64> {
    if d_max < 2 {
        return Err(Error::Precondition(format!("d_max must be >= 2, got {d_max}")));
    }
    Ok(ExtremalEngine::new(curve, ExtremalOptions::default())
        .best_constant(x, d_max)?
        .value)
}

pub fn membership_bidegree(
    curve: &CurveC2,
    z: Complex64,
    w: Complex64,
    m: f64,
    d: usize,
    e: usize,
) -> Result<Membership> {
    ExtremalEngine::new(curve, ExtremalOptions::default()).membership_bidegree(z, w, m, d, e)
}

/// Which coordinate a slice holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceAxis {
    /// `w` fixed, `z` varies.
    W,
    /// `z` fixed, `w` varies.
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceSpec {
    pub fixed: SliceAxis,
    pub fixed_value: Complex64,
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl SliceSpec {
    /// Grid point `(row, col)`: real part along columns, imaginary along rows,
    /// both inclusive of the region's edges.
    pub fn free_value(&self, grid_n: usize, row: usize, col: usize) -> Complex64 {
        let t = |k: usize| k as f64 / (grid_n - 1) as f64;
        Complex64::new(
            self.re.0 + (self.re.1 - self.re.0) * t(col),
            self.im.0 + (self.im.1 - self.im.0) * t(row),
        )
    }

    pub fn point(&self, free: Complex64) -> (Complex64, Complex64) {
        match self.fixed {
            SliceAxis::W => (free, self.fixed_value),
            SliceAxis::Z => (self.fixed_value, free),
        }
    }

    pub fn cell_area(&self, grid_n: usize) -> f64 {
        let h = |r: (f64, f64)| (r.1 - r.0) / (grid_n - 1) as f64;
        h(self.re) * h(self.im)
    }
}

/// Default envelope `|w|² <= |z|² + 1`.
pub fn cylinder_envelope(z: Complex64, w: Complex64) -> bool {
    w.norm_sqr() <= z.norm_sqr() + 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullSlice {
    pub spec: SliceSpec,
    pub grid_n: usize,
    pub m: f64,
    pub d_max: usize,
    /// Row-major best constants (`+∞` off the hull, NaN on solver failure).
    pub values: Vec<f64>,
    pub members: Vec<bool>,
    /// Member cells violating the envelope predicate (report only).
    pub envelope_violations: Vec<usize>,
}

impl HullSlice {
    pub fn member_area(&self) -> f64 {
        self.members.iter().filter(|&&m| m).count() as f64 * self.spec.cell_area(self.grid_n)
    }

    pub fn free_values(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.grid_n * self.grid_n).map(|k| self.spec.free_value(self.grid_n, k / self.grid_n, k % self.grid_n))
    }
}

/// Grid of best constants over a coordinate slice, membership at level `M`.
pub fn hull_slice(
    engine: &ExtremalEngine,
    m: f64,
    spec: SliceSpec,
    grid_n: usize,
    d_max: usize,
    envelope: &(dyn Fn(Complex64, Complex64) -> bool + Sync),
) -> Result<HullSlice> {
    if grid_n < 32 {
        return Err(Error::Precondition(format!("grid_n must be >= 32, got {grid_n}")));
    }
    if m < 1.0 {
        return Err(Error::Precondition(format!("M must be >= 1, got {m}")));
    }
    // warm the cache so workers share one problem per degree
    for d in 1..=d_max {
        engine.problem(Space::Total(d))?;
    }
    let values: Vec<f64> = par::map_indexed(engine.options().exec, grid_n * grid_n, |k| {
        let free = spec.free_value(grid_n, k / grid_n, k % grid_n);
        match engine.best_constant(spec.point(free), d_max) {
            Ok(b) => b.value,
            Err(err) => {
                log::warn!("slice cell {k} failed: {err}");
                f64::NAN
            }
        }
    });
    let members: Vec<bool> = values
        .iter()
        .map(|&v| v.is_finite() && v <= m * (1.0 + MEMBERSHIP_TOL))
        .collect();
    let envelope_violations = members
        .iter()
        .enumerate()
        .filter(|(_, &mem)| mem)
        .map(|(k, _)| k)
        .filter(|&k| {
            let (z, w) = spec.point(spec.free_value(grid_n, k / grid_n, k % grid_n));
            !envelope(z, w)
        })
        .collect();
    Ok(HullSlice {
        spec,
        grid_n,
        m,
        d_max,
        values,
        members,
        envelope_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    EvidenceBounded,
    EvidenceUnbounded,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    /// Increasing scan radii for `z`; the refinement sequence.
    pub radii: Vec<f64>,
    /// Level used to locate hull points (large: any finite constant counts).
    pub scan_m: f64,
    pub grid_n: usize,
    pub caps: (usize, usize),
    pub exec: Exec,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            radii: vec![1.0, 4.0, 16.0],
            scan_m: 1e3,
            grid_n: 16,
            caps: (6, 6),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub sample_points: Vec<(Complex64, Complex64)>,
    pub best_constants: Vec<f64>,
    /// Index into `radii` of each sample point.
    pub radius_index: Vec<usize>,
    pub sup_estimate: f64,
    pub verdict: StabilityVerdict,
}

/// Evidence, not proof, about boundedness of the best-constant function on
/// the hull: hull points are located by fiber scans over `z` sampled in disks
/// of growing radius, and the verdict is unbounded when constants in the last
/// disk exceed ten times the median of the first.
pub fn stability_probe(
    engine: &ExtremalEngine,
    n_points: usize,
    d_max: usize,
    seed: u64,
    options: &StabilityOptions,
) -> Result<StabilityReport> {
    if n_points < 10 {
        return Err(Error::Precondition(format!("n_points must be >= 10, got {n_points}")));
    }
    if options.radii.is_empty() {
        return Err(Error::Precondition("at least one scan radius required".into()));
    }
    let tube = tube_checker(engine.curve());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zs = Vec::new();
    for (ri, &radius) in options.radii.iter().enumerate() {
        let mut taken = 0;
        let mut attempts = 0;
        while taken < n_points && attempts < 1000 * n_points {
            attempts += 1;
            let r = radius * rng.random::<f64>().sqrt();
            let z = Complex64::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU);
            if tube(z) {
                continue;
            }
            zs.push((ri, z));
            taken += 1;
        }
    }
    let (_, bw) = engine.curve().coordinate_bounds(256);
    let found = par::try_map_indexed(options.exec, zs.len(), |k| {
        let (ri, z) = zs[k];
        let half = 1.25 * bw.max(1.0) * options.radii[ri].max(1.0).powi(2);
        let fopts = FiberOptions {
            window: Some(Window::centered(Complex64::new(0.0, 0.0), half)),
            grid_n: options.grid_n,
            caps: options.caps,
            exec: Exec::Sequential,
        };
        let fiber = fiber_scan_with(engine, z, options.scan_m, &fopts)?;
        let mut out = Vec::new();
        for p in &fiber.points {
            let b = engine.best_constant((z, p.w), d_max)?;
            out.push((ri, (z, p.w), b.value));
        }
        Ok(out)
    })?;
    let mut sample_points = Vec::new();
    let mut best_constants = Vec::new();
    let mut radius_index = Vec::new();
    for (ri, x, c) in found.into_iter().flatten() {
        sample_points.push(x);
        best_constants.push(c);
        radius_index.push(ri);
    }
    let sup_estimate = best_constants.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first: Vec<f64> = best_constants
        .iter()
        .zip(&radius_index)
        .filter(|(_, &ri)| ri == 0)
        .map(|(c, _)| *c)
        .collect();
    let last_idx = options.radii.len() - 1;
    let last_max = best_constants
        .iter()
        .zip(&radius_index)
        .filter(|(_, &ri)| ri == last_idx)
        .map(|(c, _)| *c)
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = if first.is_empty() || best_constants.is_empty() {
        StabilityVerdict::Inconclusive
    } else {
        let med = median(&first);
        if !last_max.is_finite() || last_max > 10.0 * med {
            StabilityVerdict::EvidenceUnbounded
        } else {
            StabilityVerdict::EvidenceBounded
        }
    };
    Ok(StabilityReport {
        sample_points,
        best_constants,
        radius_index,
        sup_estimate,
        verdict,
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// `true` for `z` within [`crate::fiber::TUBE_RADIUS`] of the projection of
/// the curve onto the `z` axis (1024 samples per component).
pub(crate) fn tube_checker(curve: &CurveC2) -> impl Fn(Complex64) -> bool {
    let proj: Vec<Complex64> = curve.sample_boundary(1024).points.iter().map(|p| p.0).collect();
    // chord bound between consecutive samples, so the test is conservative
    let gap = proj.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
    let radius = crate::fiber::TUBE_RADIUS + 0.5 * gap;
    move |z| proj.iter().any(|p| (p - z).norm() < radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZGrid {
    pub origin: Complex64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl ZGrid {
    /// Row-major: `iy` outer, `ix` inner.
    pub fn point(&self, ix: usize, iy: usize) -> Complex64 {
        self.origin + Complex64::new(ix as f64 * self.spacing, iy as f64 * self.spacing)
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| self.point(ix, iy))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    /// Traced `w` per grid cell (row-major); `None` where tracking failed.
    #[serde(skip)]
    pub values: Vec<Option<Complex64>>,
    pub max_residual: f64,
    pub noise_floor: f64,
    pub flagged: bool,
    pub n_interior: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticityReport {
    pub branches: Vec<BranchReport>,
    /// `(cell, branch)` pairs where nearest-neighbor continuation failed.
    pub failures: Vec<(usize, usize)>,
}

/// Traces fiber branches over a rectangular `z` grid by nearest-neighbor
/// continuation and estimates `|∂w/∂z̄|` with centered differences.
pub fn analyticity_probe(fibers: &[FiberSet], grid: ZGrid) -> Result<AnalyticityReport> {
    if fibers.len() != grid.nx * grid.ny {
        return Err(Error::Precondition(format!(
            "expected {} fibers for a {}x{} grid, got {}",
            grid.nx * grid.ny,
            grid.nx,
            grid.ny,
            fibers.len()
        )));
    }
    if grid.nx < 3 || grid.ny < 3 {
        return Err(Error::Precondition(
            "analyticity probe needs at least a 3x3 grid".into(),
        ));
    }
    let h = grid.spacing;
    let idx = |ix: usize, iy: usize| iy * grid.nx + ix;
    let n_branches = fibers[0].points.len();
    let resolution = fibers.iter().map(|f| f.resolution).fold(0.0, f64::max);
    let jump = fibers.iter().map(|f| f.cluster_eps).fold(0.0, f64::max).max(10.0 * h);

    let mut failures = Vec::new();
    let mut traced = vec![vec![None; fibers.len()]; n_branches];
    for (b, branch) in traced.iter_mut().enumerate() {
        branch[0] = Some(fibers[0].points[b].w);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                if ix == 0 && iy == 0 {
                    continue;
                }
                let prev = if ix > 0 {
                    branch[idx(ix - 1, iy)]
                } else {
                    branch[idx(ix, iy - 1)]
                };
                let cell = idx(ix, iy);
                let next = prev.and_then(|p| {
                    fibers[cell]
                        .points
                        .iter()
                        .map(|q| q.w)
                        .min_by(|a, c| (a - p).norm().total_cmp(&(c - p).norm()))
                        .filter(|q| (q - p).norm() <= jump)
                });
                if next.is_none() {
                    failures.push((cell, b));
                }
                branch[cell] = next;
            }
        }
    }

    let branches = traced
        .into_iter()
        .map(|values| {
            let at = |ix: usize, iy: usize| values[idx(ix, iy)];
            let mut max_residual: f64 = 0.0;
            let mut third: f64 = 0.0;
            let mut n_interior = 0;
            for iy in 1..grid.ny - 1 {
                for ix in 1..grid.nx - 1 {
                    let (Some(e), Some(wv), Some(n), Some(s)) =
                        (at(ix + 1, iy), at(ix - 1, iy), at(ix, iy + 1), at(ix, iy - 1))
                    else {
                        continue;
                    };
                    let dx = (e - wv) / (2.0 * h);
                    let dy = (n - s) / (2.0 * h);
                    let dzbar = 0.5 * (dx + Complex64::i() * dy);
                    max_residual = max_residual.max(dzbar.norm());
                    n_interior += 1;
                    if ix >= 2 && ix + 2 < grid.nx {
                        if let (Some(a), Some(b)) = (at(ix + 2, iy), at(ix - 2, iy)) {
                            let d3 = (a - 2.0 * e + 2.0 * wv - b) / (2.0 * h * h * h);
                            third = third.max(d3.norm());
                        }
                    }
                }
            }
            let noise_floor = std::f64::consts::SQRT_2 * resolution / h + h * h * third / 6.0;
            BranchReport {
                flagged: max_residual > 10.0 * noise_floor.max(f64::EPSILON),
                values,
                max_residual,
                noise_floor,
                n_interior,
            }
        })
        .collect();
    Ok(AnalyticityReport { branches, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::fixtures::{circle, cubic, parabola};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn axis_outside_disk_is_modulus() {
        for d in [1, 3, 6] {
            let r = extremal_value(&circle(), (c(0.0, 2.0), c(0.0, 0.0)), d, 64, 32).unwrap();
            assert_eq!(r.status, ExtremalStatus::Bounded);
            assert!(r.enclosure.0 <= 2.0 * (1.0 + 1e-9) && 2.0 <= r.enclosure.1 * (1.0 + 1e-9));
            assert!((r.value - 2.0).abs() < 2e-3, "d={d}: {}", r.value);
            // refined witness meets the modulus constraints at the samples
            let sup = crate::curve::sup_norm_on_curve(&r.witness, &circle(), 64).unwrap();
            assert!(sup <= 1.0 + CUT_TOL, "{sup}");
            assert!(r.enclosure.0 <= r.value && r.value <= r.raw_value);
            assert!((r.witness.eval(c(0.0, 2.0), c(0.0, 0.0)).re - r.optimum).abs() < 1e-6 * r.optimum);
        }
    }

    #[test]
    fn axis_inside_disk_is_one() {
        let r = extremal_value(&circle(), (c(0.5, 0.0), c(0.0, 0.0)), 4, 64, 32).unwrap();
        assert!((r.value - 1.0).abs() < 1e-3, "{}", r.value);
    }

    #[test]
    fn off_axis_is_unbounded_with_certificate() {
        let r = extremal_value(&circle(), (c(0.0, 0.0), c(0.1, 0.0)), 3, 64, 32).unwrap();
        assert_eq!(r.status, ExtremalStatus::Unbounded);
        assert!(r.value.is_infinite());
        let sup = crate::curve::sup_norm_on_curve(&r.witness, &circle(), 64).unwrap();
        assert!(sup < 1e-12);
        assert!(r.witness.eval(c(0.0, 0.0), c(0.1, 0.0)).re > 0.0);
    }

    #[test]
    fn on_graph_value_at_most_one() {
        let r = extremal_value(&parabola(), (c(0.4, 0.0), c(0.16, 0.0)), 6, 64, 32).unwrap();
        assert_eq!(r.status, ExtremalStatus::Bounded);
        assert!(r.value <= 1.0 + 1e-3, "{}", r.value);
    }

    #[test]
    fn preconditions() {
        assert!(extremal_value(&circle(), (c(0.0, 0.0), c(0.0, 0.0)), 0, 64, 32).is_err());
        assert!(extremal_value(&circle(), (c(0.0, 0.0), c(0.0, 0.0)), 2, 32, 32).is_err());
        assert!(extremal_value(&circle(), (c(0.0, 0.0), c(0.0, 0.0)), 2, 64, 7).is_err());
        assert!(best_constant(&circle(), (c(0.0, 0.0), c(0.0, 0.0)), 1).is_err());
    }

    #[test]
    fn best_constant_examples() {
        let b = best_constant(&circle(), (c(3.0, 0.0), c(0.0, 0.0)), 4).unwrap();
        assert!((b - 3.0).abs() < 3e-3, "{b}");
        // boundary samples satisfy the constraints exactly
        for zeta in [c(1.0, 0.0), c(-1.0, 0.0)] {
            let on_curve = best_constant(&parabola(), (zeta, zeta * zeta), 4).unwrap();
            assert!(on_curve <= 1.0 + 1e-9, "{on_curve}");
        }
        // between samples only the polygonal slack remains
        let zeta = c(0.6, 0.8);
        let between = extremal_value(&parabola(), (zeta, zeta * zeta), 1, 64, 32).unwrap();
        assert!(between.enclosure.0 <= 1.0 + 1e-3, "{:?}", between.enclosure);
        // degree 2 in ζ sampled at 64 points: off-sample excess below sec(2π/128)
        assert!(between.value <= 1.0 / (PI / 64.0).cos() + 1e-9, "{}", between.value);
        let far = best_constant(&parabola(), (c(1.5, 0.0), c(2.25, 0.0)), 8).unwrap();
        assert!(far.is_finite());
        assert!(best_constant(&parabola(), (c(0.5, 0.0), c(0.3, 0.0)), 3)
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn refined_value_stays_in_enclosure() {
        let curve = cubic();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for d in 1..=4 {
            let problem = ExtremalProblem::new(&curve, Space::Total(d), 96, 16).unwrap();
            for _ in 0..10 {
                let x = (
                    c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                    c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                );
                let r = problem.solve(x).unwrap();
                let tol = 1e-9 * r.raw_value;
                assert!(r.enclosure.0 <= r.value + tol && r.value <= r.raw_value + tol, "{r:?}");
                let sup = crate::curve::sup_norm_on_curve(&r.witness, &curve, 96).unwrap();
                assert!(sup <= 1.0 + CUT_TOL, "d={d}: {sup}");
            }
        }
    }

    #[test]
    fn enclosure_shrinks_with_directions() {
        let x = (c(1.3, 0.4), c(0.0, 0.0));
        let mut prev = f64::INFINITY;
        for k in [8, 16, 32, 64] {
            let r = extremal_value(&cubic(), (x.0, x.0.powu(3) + 0.2 * x.0), 3, 96, k).unwrap();
            let width = r.enclosure.1 - r.enclosure.0;
            assert!(width < prev);
            prev = width;
        }
    }

    #[test]
    fn slice_of_circle_axis() {
        let engine = ExtremalEngine::new(&circle(), ExtremalOptions::default());
        let spec = SliceSpec {
            fixed: SliceAxis::W,
            fixed_value: c(0.0, 0.0),
            re: (-2.0, 2.0),
            im: (-2.0, 2.0),
        };
        let s = hull_slice(&engine, 1.0, spec, 33, 3, &cylinder_envelope).unwrap();
        for (k, z) in s.free_values().enumerate() {
            let classical = z.norm() <= 1.0 - 1e-9;
            if (z.norm() - 1.0).abs() > 1e-6 {
                assert_eq!(s.members[k], classical, "z = {z}");
            }
        }
        assert!(s.envelope_violations.is_empty());
    }

    #[test]
    fn synthetic_branches() {
        use crate::fiber::{FiberMethod, FiberPoint};
        let grid = ZGrid {
            origin: c(0.2, 0.1),
            spacing: 0.05,
            nx: 5,
            ny: 5,
        };
        let make = |f: &dyn Fn(Complex64) -> Complex64| -> Vec<FiberSet> {
            grid.points()
                .into_iter()
                .map(|z| FiberSet {
                    z,
                    m: 2.0,
                    points: vec![FiberPoint { w: f(z), residual: 0.0 }],
                    method: FiberMethod::GridScan,
                    degree_caps: (1, 1),
                    limit_poly: None,
                    spacing: 0.1,
                    cluster_eps: 0.2,
                    resolution: 1e-12,
                })
                .collect()
        };
        let holo = analyticity_probe(&make(&|z| z * z), grid).unwrap();
        assert!(holo.branches[0].max_residual < 1e-9);
        assert!(!holo.branches[0].flagged);
        let anti = analyticity_probe(&make(&|z| z.conj()), grid).unwrap();
        assert!((anti.branches[0].max_residual - 1.0).abs() < 1e-9);
        assert!(anti.branches[0].flagged);
        let constant = analyticity_probe(&make(&|_| c(0.0, 0.0)), grid).unwrap();
        assert_eq!(constant.branches[0].max_residual, 0.0);
        assert!(constant.failures.is_empty());
    }
}
