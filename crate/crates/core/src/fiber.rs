//! Fibers of the hull over a fixed `z`, the exceptional sublevel sets, their
//! Monte Carlo measures, and the limit polynomial whose roots contain a fiber.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::bishop::construct_bishop;
use crate::curve::CurveC2;
use crate::error::{Error, Result};
use crate::extremal::{tube_checker, ExtremalEngine, ExtremalOptions, ExtremalProblem, Space, MEMBERSHIP_TOL, RAY_TOL};
use crate::par::{self, Exec};
use crate::polyalg::{roots, slice_coefficients, BivariatePoly, UnivariatePoly};

/// Half-width of the excluded band around the projection of the curve.
pub const TUBE_RADIUS: f64 = 0.02;
/// Kernel ratios above this skip the LP: such points cannot be members.
const KERNEL_SKIP: f64 = 4.0;
const MC_BATCH: usize = 10_000;

/// Axis-aligned rectangle in the `w` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Window {
    pub fn centered(c: Complex64, half: f64) -> Self {
        Self {
            re: (c.re - half, c.re + half),
            im: (c.im - half, c.im + half),
        }
    }

    /// Square of half-width `1.25·max(1, sup_γ |w|)` about the origin.
    pub fn for_curve(curve: &CurveC2) -> Self {
        let (_, bw) = curve.coordinate_bounds(256);
        Self::centered(Complex64::new(0.0, 0.0), 1.25 * bw.max(1.0))
    }

    fn node(&self, n: usize, row: usize, col: usize) -> Complex64 {
        let t = |k: usize| k as f64 / (n - 1) as f64;
        Complex64::new(
            self.re.0 + (self.re.1 - self.re.0) * t(col),
            self.im.0 + (self.im.1 - self.im.0) * t(row),
        )
    }

    fn spacing(&self, n: usize) -> f64 {
        (self.re.1 - self.re.0).max(self.im.1 - self.im.0) / (n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberPoint {
    pub w: Complex64,
    /// `max(kernel / RAY_TOL, value / M)`; at most `1 + tol` for members.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberMethod {
    GridScan,
    LimitRoots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSet {
    pub z: Complex64,
    pub m: f64,
    /// Cluster representatives, sorted by `(re, im)`.
    pub points: Vec<FiberPoint>,
    pub method: FiberMethod,
    pub degree_caps: (usize, usize),
    pub limit_poly: Option<UnivariatePoly>,
    /// Grid spacing of the scan.
    pub spacing: f64,
    pub cluster_eps: f64,
    /// Positional accuracy of the reported points.
    pub resolution: f64,
}

impl FiberSet {
    pub fn cardinality(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberOptions {
    /// Defaults to [`Window::for_curve`].
    pub window: Option<Window>,
    pub grid_n: usize,
    /// Bidegree caps `(d_max, e_max)`.
    pub caps: (usize, usize),
    pub exec: Exec,
}

impl Default for FiberOptions {
    fn default() -> Self {
        Self {
            window: None,
            grid_n: 32,
            caps: (6, 6),
            exec: Exec::default(),
        }
    }
}

fn member_residual(problem: &ExtremalProblem, z: Complex64, w: Complex64, m: f64) -> Result<f64> {
    let k = problem.kernel_residual((z, w)) / RAY_TOL;
    if k > KERNEL_SKIP {
        return Ok(k);
    }
    let (opt, _) = problem.reduced_optimum((z, w))?;
    let value = opt.max(0.0).powf(1.0 / problem.space().weight() as f64);
    Ok(k.max(value / m))
}

const COMPASS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Compass search; returns the minimizer, its score and the final step.
fn compass<F>(mut f: F, start: Complex64, step0: f64, min_step: f64) -> Result<(Complex64, f64, f64)>
where
    F: FnMut(Complex64) -> Result<f64>,
{
    let mut x = start;
    let mut fx = f(x)?;
    let mut step = step0;
    let mut evals = 0;
    while step > min_step && evals < 4000 {
        let mut best = (x, fx);
        for (dx, dy) in COMPASS {
            let cand = x + Complex64::new(dx, dy) * step;
            let fc = f(cand)?;
            evals += 1;
            if fc < best.1 {
                best = (cand, fc);
            }
        }
        if best.1 < fx {
            x = best.0;
            fx = best.1;
        } else {
            step *= 0.5;
        }
    }
    Ok((x, fx, step))
}

/// Fiber over `z` at level `M` for the default engine of `curve`.
pub fn fiber_scan(
    curve: &CurveC2,
    z: Complex64,
    m: f64,
    window: Window,
    grid_n: usize,
    d_max: usize,
    e_max: usize,
) -> Result<FiberSet> {
    let engine = ExtremalEngine::new(curve, ExtremalOptions::default());
    fiber_scan_with(
        &engine,
        z,
        m,
        &FiberOptions {
            window: Some(window),
            grid_n,
            caps: (d_max, e_max),
            exec: Exec::default(),
        },
    )
}

/// Scans a `w` grid with bidegree membership at the caps, refines discrete
/// local minima of the membership residual, and clusters accepted points
/// within twice the grid spacing.
pub fn fiber_scan_with(engine: &ExtremalEngine, z: Complex64, m: f64, options: &FiberOptions) -> Result<FiberSet> {
    let n = options.grid_n;
    if n < 16 {
        return Err(Error::Precondition(format!("grid_n must be >= 16, got {n}")));
    }
    if m < 1.0 {
        return Err(Error::Precondition(format!("M must be >= 1, got {m}")));
    }
    let (d, e) = options.caps;
    if d == 0 || e == 0 {
        return Err(Error::Precondition("bidegree caps must be >= 1".into()));
    }
    let window = options.window.unwrap_or_else(|| Window::for_curve(engine.curve()));
    let problem = engine.problem(Space::Bidegree(d, e))?;
    let spacing = window.spacing(n);
    let cluster_eps = 2.0 * spacing;
    let accept = 1.0 + MEMBERSHIP_TOL;

    let scores = par::try_map_indexed(options.exec, n * n, |k| {
        member_residual(&problem, z, window.node(n, k / n, k % n), m)
    })?;

    // discrete local minima, best first
    let mut minima: Vec<usize> = (0..n * n)
        .filter(|&k| {
            let (i, j) = ((k / n) as isize, (k % n) as isize);
            (-1..=1).all(|di| {
                (-1..=1).all(|dj| {
                    let (a, b) = (i + di, j + dj);
                    if (di == 0 && dj == 0) || a < 0 || b < 0 || a >= n as isize || b >= n as isize {
                        return true;
                    }
                    scores[k] <= scores[a as usize * n + b as usize]
                })
            })
        })
        .collect();
    minima.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    minima.truncate(2 * (e + 1));

    let min_step = 1e-12 * (1.0 + z.norm());
    let kernel_present = problem.kernel_dim() > 0;
    let refined = par::try_map_indexed(options.exec, minima.len(), |c| {
        let start = window.node(n, minima[c] / n, minima[c] % n);
        let (w, step) = if kernel_present {
            // members sit on the common zeros of the kernel; locate those first
            let (w, _, step) = compass(|w| Ok(problem.kernel_residual((z, w))), start, spacing, min_step)?;
            (w, step)
        } else {
            let (w, _, step) = compass(|w| member_residual(&problem, z, w, m), start, spacing, min_step)?;
            (w, step)
        };
        Ok((w, member_residual(&problem, z, w, m)?, step))
    })?;

    let mut accepted: Vec<(FiberPoint, f64)> = refined
        .into_iter()
        .filter(|r| r.1 <= accept)
        .map(|(w, residual, step)| (FiberPoint { w, residual }, step))
        .collect();
    for (k, &s) in scores.iter().enumerate() {
        if s <= accept {
            accepted.push((
                FiberPoint {
                    w: window.node(n, k / n, k % n),
                    residual: s,
                },
                spacing,
            ));
        }
    }

    let clusters = cluster(&accepted, cluster_eps);
    let mut points: Vec<FiberPoint> = clusters.iter().map(|c| c.0).collect();
    let resolution = clusters.iter().map(|c| c.1).fold(0.0, f64::max);
    points.sort_by(|a, b| a.w.re.total_cmp(&b.w.re).then(a.w.im.total_cmp(&b.w.im)));
    Ok(FiberSet {
        z,
        m,
        points,
        method: FiberMethod::GridScan,
        degree_caps: (d, e),
        limit_poly: None,
        spacing,
        cluster_eps,
        resolution,
    })
}

/// Single-linkage clusters; each is represented by its lowest-residual point
/// (ties to the earliest) with that point's resolution.
fn cluster(points: &[(FiberPoint, f64)], eps: f64) -> Vec<(FiberPoint, f64)> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i].0.w - points[j].0.w).norm() <= eps {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut best: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = find(&mut label, i);
        match best[root] {
            Some(b) if points[b].0.residual <= points[i].0.residual => {}
            _ => best[root] = Some(i),
        }
    }
    best.into_iter().flatten().map(|i| points[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionReport {
    pub holds: bool,
    pub tested: usize,
    pub total_members: usize,
    pub bidegree_members: usize,
    /// `w` that pass total-degree membership but fail bidegree membership.
    pub counterexamples: Vec<Complex64>,
    /// `w` passing bidegree but not total-degree membership; recorded only.
    pub reverse_failures: usize,
}

/// Checks on sampled `w` that total-degree-`(d+e)` membership implies
/// bidegree-`(d, e)` membership at level `M^{d+e}`. Half the samples are
/// uniform in the default window; the rest sit at log-uniform distances in
/// `[1e-12, 1e-1]` from fiber points, where the two tests are most delicate.
pub fn inclusion_check(
    engine: &ExtremalEngine,
    z: Complex64,
    m: f64,
    d: usize,
    e: usize,
    samples: usize,
    seed: u64,
) -> Result<InclusionReport> {
    if m < 1.0 {
        return Err(Error::Precondition(format!("M must be >= 1, got {m}")));
    }
    let total = engine.problem(Space::Total(d + e))?;
    let bi = engine.problem(Space::Bidegree(d, e))?;
    let window = Window::for_curve(engine.curve());
    let fiber = fiber_scan_with(
        engine,
        z,
        m,
        &FiberOptions {
            window: Some(window),
            grid_n: 16,
            caps: (d, e),
            exec: Exec::Sequential,
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws: Vec<Complex64> = (0..samples)
        .map(|k| {
            if k % 2 == 1 && !fiber.points.is_empty() {
                let centre = fiber.points[rng.random_range(0..fiber.points.len())].w;
                let dist = 10f64.powf(rng.random_range(-12.0..-1.0));
                centre + Complex64::from_polar(dist, rng.random_range(0.0..std::f64::consts::TAU))
            } else {
                Complex64::new(
                    rng.random_range(window.re.0..window.re.1),
                    rng.random_range(window.im.0..window.im.1),
                )
            }
        })
        .collect();
    let verdicts = par::try_map_indexed(engine.options().exec, ws.len(), |k| {
        let x = (z, ws[k]);
        Ok((total.solve(x)?.is_member(m), bi.solve(x)?.is_member(m)))
    })?;
    let counterexamples: Vec<Complex64> = verdicts
        .iter()
        .zip(&ws)
        .filter(|(v, _)| v.0 && !v.1)
        .map(|(_, w)| *w)
        .collect();
    Ok(InclusionReport {
        holds: counterexamples.is_empty(),
        tested: ws.len(),
        total_members: verdicts.iter().filter(|v| v.0).count(),
        bidegree_members: verdicts.iter().filter(|v| v.1).count(),
        reverse_failures: verdicts.iter().filter(|v| v.1 && !v.0).count(),
        counterexamples,
    })
}

/// `{z ∈ Δ : |poly(z)| <= threshold}` with the degree cap `k` used for the
/// measure bound `48·threshold^{1/k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublevelSet {
    pub poly: UnivariatePoly,
    pub threshold: f64,
    pub k: usize,
}

impl SublevelSet {
    pub fn new(poly: UnivariatePoly, threshold: f64, k: usize) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::Parameter(format!("threshold must be positive, got {threshold}")));
        }
        if k == 0 || k < poly.degree() {
            return Err(Error::Parameter(format!(
                "degree cap {k} must be positive and at least deg = {}",
                poly.degree()
            )));
        }
        Ok(Self { poly, threshold, k })
    }

    /// Sublevel set of a polynomial at `α^k`, `k` its degree.
    pub fn with_alpha(poly: UnivariatePoly, alpha: f64) -> Result<Self> {
        let k = poly.degree().max(1);
        Self::new(poly, alpha.powi(k as i32), k)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.poly.eval(z).norm() <= self.threshold
    }

    pub fn alpha(&self) -> f64 {
        self.threshold.powf(1.0 / self.k as f64)
    }

    pub fn bound(&self) -> f64 {
        48.0 * self.alpha()
    }
}

/// The exceptional set `{|G_{j0}| <= r0^{de/2}}` of a unit bidegree-`(d, e)`
/// polynomial, with degree cap `d`.
pub fn t_set(f: &BivariatePoly, r0: f64) -> Result<SublevelSet> {
    if !f.is_unit() {
        return Err(Error::Precondition("t_set needs a unit polynomial".into()));
    }
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::Parameter(format!("r0 must lie in (0, 1), got {r0}")));
    }
    let (slices, j0) = slice_coefficients(f);
    let (d, e) = (f.d(), f.e());
    SublevelSet::new(slices[j0].clone(), r0.powf((d * e) as f64 / 2.0), d.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub bound: f64,
    pub seed: u64,
}

pub fn sublevel_measure(s: &SublevelSet, n_samples: usize, seed: u64) -> Result<MeasureEstimate> {
    sublevel_measure_with(s, n_samples, seed, Exec::default())
}

/// Monte Carlo area of `s` from uniform samples of the unit disk, drawn in
/// batches of 10⁴ with one ChaCha stream per batch.
pub fn sublevel_measure_with(s: &SublevelSet, n_samples: usize, seed: u64, exec: Exec) -> Result<MeasureEstimate> {
    if n_samples < MC_BATCH {
        return Err(Error::Precondition(format!(
            "n_samples must be >= 10^4, got {n_samples}"
        )));
    }
    let batches = n_samples.div_ceil(MC_BATCH);
    let hits: usize = par::map_indexed(exec, batches, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let count = MC_BATCH.min(n_samples - b * MC_BATCH);
        (0..count).filter(|_| s.contains(uniform_disk(&mut rng))).count()
    })
    .into_iter()
    .sum();
    let p = hits as f64 / n_samples as f64;
    Ok(MeasureEstimate {
        estimate: std::f64::consts::PI * p,
        std_error: std::f64::consts::PI * (p * (1.0 - p) / n_samples as f64).sqrt(),
        n_samples,
        bound: s.bound(),
        seed,
    })
}

fn uniform_disk(rng: &mut ChaCha8Rng) -> Complex64 {
    let r = rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitPolynomial {
    pub b_star: UnivariatePoly,
    pub roots: Vec<Complex64>,
    pub e: usize,
    pub r0: f64,
    /// Surviving `d` with their `B_d`.
    pub sequence: Vec<(usize, UnivariatePoly)>,
    /// `d` skipped because `z1` lies in `T(d, e)`.
    pub skipped: Vec<usize>,
    /// Max coefficient difference between consecutive `B_d`.
    pub cauchy_diffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberCheck {
    /// Largest `|B_d(w)| / r0^{de/2}` over fiber points and surviving `d`.
    pub max_ratio: f64,
    /// `(d, w)` where the ratio exceeds `1 + tol`.
    pub violations: Vec<(usize, Complex64)>,
}

impl LimitPolynomial {
    pub fn degree(&self) -> usize {
        self.b_star.degree()
    }

    /// Bounds `|B_d(w)| <= r0^{de/2}` at independently found fiber points.
    pub fn check_fiber(&self, fiber: &FiberSet, tol: f64) -> FiberCheck {
        let mut max_ratio: f64 = 0.0;
        let mut violations = Vec::new();
        for (d, b) in &self.sequence {
            let bound = self.r0.powf((d * self.e) as f64 / 2.0);
            for p in &fiber.points {
                let ratio = b.eval(p.w).norm() / bound;
                max_ratio = max_ratio.max(ratio);
                if ratio > 1.0 + tol {
                    violations.push((*d, p.w));
                }
            }
        }
        FiberCheck { max_ratio, violations }
    }

    /// Distance from `w` to the nearest root of `B*` (`∞` without roots).
    pub fn root_distance(&self, w: Complex64) -> f64 {
        self.roots.iter().map(|r| (r - w).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Slices of the Bishop polynomials `F_{d,e}` at `z1`, normalized to unit,
/// over the `d` for which `z1` escapes `T(d, e)`.
pub fn limit_polynomial(
    curve: &CurveC2,
    z1: Complex64,
    e: usize,
    d_list: &[usize],
    r0: f64,
    zeta0: Complex64,
) -> Result<LimitPolynomial> {
    if d_list.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Parameter("d_list must be strictly increasing".into()));
    }
    let mut sequence = Vec::new();
    let mut skipped = Vec::new();
    for &d in d_list {
        let f = construct_bishop(curve, d, e, zeta0)?;
        let t = t_set(&f, r0)?;
        if t.contains(z1) {
            log::warn!("z1 = {z1} lies in T({d}, {e}); skipping");
            skipped.push(d);
            continue;
        }
        let a: Vec<Complex64> = (0..=e)
            .map(|m| {
                (0..=d)
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, n| acc * z1 + f.coeff(n, m))
            })
            .collect();
        sequence.push((d, UnivariatePoly::new(a).make_unit()?));
    }
    if sequence.is_empty() {
        return Err(Error::Exclusion(format!(
            "z1 = {z1} lies in T(d, {e}) for every d in {d_list:?}"
        )));
    }
    if sequence.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 surviving degrees, got {} (skipped {skipped:?})",
            sequence.len()
        )));
    }
    let cauchy_diffs = sequence
        .windows(2)
        .map(|p| {
            let (a, b) = (p[0].1.coeffs(), p[1].1.coeffs());
            (0..a.len().max(b.len()))
                .map(|i| {
                    let x = a.get(i).copied().unwrap_or_default();
                    let y = b.get(i).copied().unwrap_or_default();
                    (x - y).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let b_star = sequence.last().unwrap().1.clone();
    let roots = if b_star.degree() == 0 { vec![] } else { roots(&b_star)? };
    Ok(LimitPolynomial {
        b_star,
        roots,
        e,
        r0,
        sequence,
        skipped,
        cauchy_diffs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinitenessOptions {
    /// Degrees for the limit polynomial; defaults to `[e+1, e+3, e+5]`.
    pub d_list: Option<Vec<usize>>,
    pub r0: f64,
    pub zeta0: Complex64,
    pub grid_n: usize,
    /// Bidegree caps for the fiber scans; defaults to `(max d_list, e)`.
    pub caps: Option<(usize, usize)>,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitenessSample {
    pub z: Complex64,
    pub fiber: Vec<FiberPoint>,
    pub b_star_roots: Vec<Complex64>,
    pub cardinality: usize,
    /// Every cluster lies within `cluster_eps + 1e-3` of a root of `B*`.
    pub matched: bool,
    /// `z` lies in `T(d, e)` for the largest tested `d`.
    pub exceptional: bool,
    /// Set when no limit polynomial could be formed.
    pub limit_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitenessReport {
    pub samples: Vec<FinitenessSample>,
    pub e: usize,
    pub m: f64,
    pub r0: f64,
    /// Fraction of `z` with at most `e` clusters, all matching roots of `B*`.
    pub fraction_ok: f64,
    pub exceptional_fraction: f64,
    /// `48·r0^{e/2}/π`.
    pub bound_fraction: f64,
    /// The bound is at least 1 and says nothing.
    pub vacuous: bool,
}

/// Samples `z` uniformly in the unit disk outside the tube around the
/// projection of the curve; at each, compares the fiber with the roots of the
/// limit polynomial.
pub fn finiteness_experiment(
    curve: &CurveC2,
    m: f64,
    e: usize,
    n_z: usize,
    seed: u64,
    options: &FinitenessOptions,
) -> Result<FinitenessReport> {
    if n_z < 20 {
        return Err(Error::Precondition(format!("n_z must be >= 20, got {n_z}")));
    }
    if e == 0 {
        return Err(Error::Precondition("e must be >= 1".into()));
    }
    let d_list = options.d_list.clone().unwrap_or_else(|| vec![e + 1, e + 3, e + 5]);
    let d_top = *d_list.last().ok_or_else(|| Error::Parameter("empty d_list".into()))?;
    let caps = options.caps.unwrap_or((d_top, e));
    let engine = ExtremalEngine::new(
        curve,
        ExtremalOptions {
            exec: Exec::Sequential,
            ..ExtremalOptions::default()
        },
    );
    let top_t = t_set(&construct_bishop(curve, d_top, e, options.zeta0)?, options.r0)?;

    let tube = tube_checker(curve);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zs = Vec::with_capacity(n_z);
    while zs.len() < n_z {
        let z = uniform_disk(&mut rng);
        if !tube(z) {
            zs.push(z);
        }
    }
    let fopts = FiberOptions {
        window: None,
        grid_n: options.grid_n,
        caps,
        exec: Exec::Sequential,
    };
    let samples = par::try_map_indexed(options.exec, zs.len(), |k| {
        let z = zs[k];
        let fiber = fiber_scan_with(&engine, z, m, &fopts)?;
        let (b_star_roots, matched, limit_error) =
            match limit_polynomial(curve, z, e, &d_list, options.r0, options.zeta0) {
                Ok(lp) => {
                    let ok = fiber
                        .points
                        .iter()
                        .all(|p| lp.root_distance(p.w) <= fiber.cluster_eps + 1e-3);
                    (lp.roots, ok, None)
                }
                Err(err @ (Error::Exclusion(_) | Error::Precondition(_))) => (vec![], false, Some(err.to_string())),
                Err(err) => return Err(err),
            };
        Ok(FinitenessSample {
            z,
            cardinality: fiber.cardinality(),
            fiber: fiber.points,
            b_star_roots,
            matched,
            exceptional: top_t.contains(z),
            limit_error,
        })
    })?;
    let ok = samples.iter().filter(|s| s.cardinality <= e && s.matched).count();
    let exceptional = samples.iter().filter(|s| s.exceptional).count();
    let bound_fraction = 48.0 * options.r0.powf(e as f64 / 2.0) / std::f64::consts::PI;
    Ok(FinitenessReport {
        fraction_ok: ok as f64 / n_z as f64,
        exceptional_fraction: exceptional as f64 / n_z as f64,
        bound_fraction,
        vacuous: bound_fraction >= 1.0,
        samples,
        e,
        m,
        r0: options.r0,
    })
}
