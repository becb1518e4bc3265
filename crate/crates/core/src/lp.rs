//! Dense revised simplex for `max cᵀx` subject to `a_jᵀx <= 1`, `x` free.
//!
//! The program is solved through its dual `min Σ y_j` subject to
//! `Σ y_j a_j = c`, `y >= 0`, whose basis has only `n` (the number of
//! unknowns) rows even when there are thousands of constraints. The simplex
//! multipliers of an optimal dual basis are the primal optimizer. An
//! infeasible dual (phase one cannot reach zero) certifies that the primal
//! is unbounded.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const OPT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_BEFORE_BLAND: usize = 64;
const PRICING_BLOCK: usize = 256;

/// The constraint set `{x : a_jᵀx <= 1}` with columns `a_j ∈ R^n`.
#[derive(Debug, Clone)]
pub struct PolytopeLp {
    n: usize,
    m: usize,
    cols: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Optimal dual basis; indices `>= n_constraints()` are artificials.
    pub basis: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    /// The dual is infeasible: some ray `x` has `cᵀx > 0` and `a_jᵀx <= 0`.
    Unbounded,
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

struct Tableau<'a> {
    lp: &'a PolytopeLp,
    c: &'a [f64],
    signs: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    in_basis: Vec<bool>,
    iterations: usize,
}

impl PolytopeLp {
    /// `cols` holds `m` consecutive columns of length `n`.
    pub fn new(n: usize, cols: Vec<f64>) -> Result<Self> {
        if n == 0 || !cols.len().is_multiple_of(n) {
            return Err(Error::Lp(format!(
                "column buffer of length {} is not a multiple of n = {n}",
                cols.len()
            )));
        }
        Ok(Self {
            n,
            m: cols.len() / n,
            cols,
        })
    }

    pub fn n_variables(&self) -> usize {
        self.n
    }

    pub fn n_constraints(&self) -> usize {
        self.m
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// Largest `a_jᵀx`.
    pub fn max_activity(&self, x: &[f64]) -> f64 {
        (0..self.m)
            .map(|j| dot(self.column(j), x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The same polytope cut further by the columns in `extra`.
    pub fn with_columns(&self, extra: &[f64]) -> Result<Self> {
        let mut cols = Vec::with_capacity(self.cols.len() + extra.len());
        cols.extend_from_slice(&self.cols);
        cols.extend_from_slice(extra);
        Self::new(self.n, cols)
    }

    /// Re-optimizes after [`with_columns`](Self::with_columns), starting from
    /// an optimal basis `basis` of the parent program with `parent_m`
    /// constraints. Appending constraints keeps that dual basis feasible, so
    /// only phase two runs. Falls back to a cold start if the basis has
    /// become numerically unusable.
    pub fn maximize_from(&self, c: &[f64], basis: &[usize], parent_m: usize) -> Result<LpOutcome> {
        self.check_objective(c)?;
        if basis.len() != self.n || parent_m > self.m {
            return Err(Error::Lp("warm-start basis does not match the program".into()));
        }
        let mut t = Tableau::new(self, c);
        t.in_basis.iter_mut().for_each(|b| *b = false);
        for (slot, &var) in t.basis.iter_mut().zip(basis) {
            let var = if var >= parent_m { var - parent_m + self.m } else { var };
            *slot = var;
        }
        for &var in &t.basis {
            t.in_basis[var] = true;
        }
        if t.refactor().is_err() || t.xb.iter().any(|&x| x < -FEAS_TOL) {
            return self.maximize(c);
        }
        t.run(Phase::Two)?;
        Ok(LpOutcome::Optimal(t.solution()))
    }

    fn check_objective(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.n {
            return Err(Error::Lp(format!(
                "objective has length {}, expected {}",
                c.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn maximize(&self, c: &[f64]) -> Result<LpOutcome> {
        self.check_objective(c)?;
        let mut t = Tableau::new(self, c);
        t.run(Phase::One)?;
        let infeasibility: f64 = t
            .basis
            .iter()
            .zip(&t.xb)
            .filter(|(&b, _)| b >= self.m)
            .map(|(_, &v)| v.max(0.0))
            .sum();
        let scale = c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if infeasibility > FEAS_TOL * scale {
            return Ok(LpOutcome::Unbounded);
        }
        t.drive_out_artificials();
        t.run(Phase::Two)?;
        Ok(LpOutcome::Optimal(t.solution()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a PolytopeLp, c: &'a [f64]) -> Self {
        let n = lp.n;
        let signs: Vec<f64> = c.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut binv = vec![0.0; n * n];
        for i in 0..n {
            binv[i * n + i] = signs[i];
        }
        let mut in_basis = vec![false; lp.m + n];
        for i in 0..n {
            in_basis[lp.m + i] = true;
        }
        Self {
            lp,
            c,
            signs,
            basis: (lp.m..lp.m + n).collect(),
            binv,
            xb: c.iter().map(|v| v.abs()).collect(),
            in_basis,
            iterations: 0,
        }
    }

    fn solution(&self) -> LpSolution {
        let x = self.multipliers(Phase::Two);
        LpSolution {
            value: dot(self.c, &x),
            x,
            iterations: self.iterations,
            basis: self.basis.clone(),
        }
    }

    fn cost(&self, var: usize, phase: Phase) -> f64 {
        let artificial = var >= self.lp.m;
        match (phase, artificial) {
            (Phase::One, true) => 1.0,
            (Phase::One, false) => 0.0,
            (Phase::Two, true) => 0.0,
            (Phase::Two, false) => 1.0,
        }
    }

    fn column_of(&self, var: usize) -> Vec<f64> {
        if var < self.lp.m {
            self.lp.column(var).to_vec()
        } else {
            let i = var - self.lp.m;
            let mut v = vec![0.0; self.lp.n];
            v[i] = self.signs[i];
            v
        }
    }

    /// `πᵀ = c_Bᵀ B⁻¹`.
    fn multipliers(&self, phase: Phase) -> Vec<f64> {
        let n = self.lp.n;
        let mut pi = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = self.cost(b, phase);
            if cb != 0.0 {
                let row = &self.binv[i * n..(i + 1) * n];
                for (p, r) in pi.iter_mut().zip(row) {
                    *p += cb * r;
                }
            }
        }
        pi
    }

    fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let n = self.lp.n;
        (0..n).map(|i| dot(&self.binv[i * n..(i + 1) * n], a)).collect()
    }

    fn run(&mut self, phase: Phase) -> Result<()> {
        let max_iter = 50 * (self.lp.n + 10) + self.lp.m;
        let mut degenerate = 0usize;
        let mut since_refactor = 0usize;
        let mut cursor = 0usize;
        loop {
            if self.iterations > max_iter {
                return Err(Error::Lp(format!("simplex did not converge in {max_iter} iterations")));
            }
            let bland = degenerate > DEGENERATE_BEFORE_BLAND;
            let pi = self.multipliers(phase);
            let Some(q) = self.price(phase, &pi, bland, &mut cursor) else {
                return Ok(());
            };
            let d = self.ftran(self.lp.column(q));

            // Ratio test; in phase two, basic artificials are fixed at zero.
            let mut leave: Option<(usize, f64, f64)> = None;
            for (i, &di) in d.iter().enumerate() {
                let fixed = phase == Phase::Two && self.basis[i] >= self.lp.m;
                let ratio = if fixed && di.abs() > PIVOT_TOL {
                    0.0
                } else if di > PIVOT_TOL {
                    self.xb[i].max(0.0) / di
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((li, lr, ld)) => {
                        if bland {
                            ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li])
                        } else {
                            ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && di.abs() > ld)
                        }
                    }
                };
                if better {
                    leave = Some((i, ratio, di.abs()));
                }
            }
            let Some((r, theta, _)) = leave else {
                return Err(Error::Lp("dual objective unbounded below".into()));
            };
            if theta <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &d, theta);
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }

    /// Entering column with negative reduced cost, or `None` at optimality.
    /// Dantzig pricing is partial: columns are scanned in blocks starting at
    /// `cursor`, and the best candidate of the first block holding one is
    /// taken. Bland mode takes the lowest index over a full scan.
    fn price(&self, phase: Phase, pi: &[f64], bland: bool, cursor: &mut usize) -> Option<usize> {
        let m = self.lp.m;
        let reduced = |j: usize| self.cost(j, phase) - dot(self.lp.column(j), pi);
        if bland {
            return (0..m).find(|&j| !self.in_basis[j] && reduced(j) < -OPT_TOL);
        }
        let block = PRICING_BLOCK.max(m / 8).min(m.max(1));
        let mut scanned = 0;
        while scanned < m {
            let mut best: Option<(usize, f64)> = None;
            for step in 0..block.min(m - scanned) {
                let j = (*cursor + step) % m;
                if self.in_basis[j] {
                    continue;
                }
                let rc = reduced(j);
                if rc < -OPT_TOL && best.is_none_or(|(_, b)| rc < b) {
                    best = Some((j, rc));
                }
            }
            let len = block.min(m - scanned);
            *cursor = (*cursor + len) % m.max(1);
            scanned += len;
            if let Some((j, _)) = best {
                return Some(j);
            }
        }
        None
    }

    fn pivot(&mut self, r: usize, q: usize, d: &[f64], theta: f64) {
        let n = self.lp.n;
        for (x, di) in self.xb.iter_mut().zip(d) {
            *x -= theta * di;
        }
        self.xb[r] = theta;
        let dr = d[r];
        for k in 0..n {
            self.binv[r * n + k] /= dr;
        }
        for i in 0..n {
            if i != r && d[i] != 0.0 {
                let f = d[i];
                for k in 0..n {
                    self.binv[i * n + k] -= f * self.binv[r * n + k];
                }
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.iterations += 1;
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.lp.n;
        let mut b = DMatrix::<f64>::zeros(n, n);
        for (i, &var) in self.basis.iter().enumerate() {
            let col = self.column_of(var);
            for k in 0..n {
                b[(k, i)] = col[k];
            }
        }
        let inv = b
            .try_inverse()
            .ok_or_else(|| Error::Lp("basis became singular".into()))?;
        for i in 0..n {
            for k in 0..n {
                self.binv[i * n + k] = inv[(i, k)];
            }
        }
        self.xb = self.ftran(self.c);
        for x in self.xb.iter_mut() {
            if *x < 0.0 && *x > -FEAS_TOL {
                *x = 0.0;
            }
        }
        Ok(())
    }

    /// Swaps zero-level artificials for structural columns where possible.
    fn drive_out_artificials(&mut self) {
        let n = self.lp.n;
        for r in 0..n {
            if self.basis[r] < self.lp.m {
                continue;
            }
            let row: Vec<f64> = self.binv[r * n..(r + 1) * n].to_vec();
            let best = (0..self.lp.m)
                .filter(|&j| !self.in_basis[j])
                .map(|j| (j, dot(&row, self.lp.column(j))))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            if let Some((j, v)) = best {
                if v.abs() > 1e-9 {
                    let d = self.ftran(self.lp.column(j));
                    let theta = self.xb[r] / d[r];
                    self.pivot(r, j, &d, theta);
                }
            }
        }
    }
}
