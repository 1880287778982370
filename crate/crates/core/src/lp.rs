//! Dense bounded-variable two-phase simplex.
//!
//! Problems are `min cᵀz  s.t.  Gz ≤ h, Ez = f, l ≤ z ≤ u` with possibly infinite
//! bounds. Internally every inequality row gets a slack and every row gets an
//! artificial column, so the standard form is `[G I 0; E 0 0]·(z,s) + D·a = (h,f)`
//! with `D` a ±1 diagonal.
//!
//! Multiplier conventions of [`LpSolution`]: `dual_ineq = λ ≥ 0`, `dual_eq = μ`
//! and `reduced_costs = d` satisfy `c + Gᵀλ − Eᵀμ = d`, where `d_j` is the
//! multiplier of whichever bound of `z_j` is active.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PivotRule {
    /// Smallest eligible index enters, smallest basic index leaves on ties.
    Bland,
    /// Largest reduced cost, switching to Bland after a run of degenerate pivots.
    DantzigBland,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub cs_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub max_iter: usize,
    pub refactor_every: usize,
    pub rule: PivotRule,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            gap_tol: 1e-8,
            cs_tol: 1e-7,
            opt_tol: 1e-10,
            pivot_tol: 1e-9,
            max_iter: 200_000,
            refactor_every: 200,
            rule: PivotRule::Bland,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub c: Vector,
    pub g: DenseMatrix,
    pub h: Vector,
    pub e: DenseMatrix,
    pub f: Vector,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// Unconstrained problem over free variables.
    pub fn new(c: Vector) -> Self {
        let n = c.len();
        Self {
            c,
            g: DenseMatrix::zeros(0, n),
            h: Vector::zeros(0),
            e: DenseMatrix::zeros(0, n),
            f: Vector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_ineq(mut self, g: DenseMatrix, h: Vector) -> Self {
        self.g = g;
        self.h = h;
        self
    }

    pub fn with_eq(mut self, e: DenseMatrix, f: Vector) -> Self {
        self.e = e;
        self.f = f;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        let dims_ok = self.g.ncols() == n
            && self.e.ncols() == n
            && self.g.nrows() == self.h.len()
            && self.e.nrows() == self.f.len()
            && self.lower.len() == n
            && self.upper.len() == n;
        if !dims_ok {
            return Err(Error::DimMismatch("LP data has inconsistent dimensions".into()));
        }
        let finite = self.c.iter().chain(self.g.iter()).chain(self.h.iter()).chain(self.e.iter()).chain(self.f.iter());
        if !finite.into_iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("LP data has non-finite entries".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(Error::InvalidInput(format!("bad bounds on variable {j}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `z`.
    pub fn primal_residual(&self, z: &Vector) -> f64 {
        let mut r: f64 = 0.0;
        if self.g.nrows() > 0 {
            let gz = &self.g * z - &self.h;
            r = r.max(gz.iter().cloned().fold(0.0, f64::max));
        }
        if self.e.nrows() > 0 {
            r = r.max((&self.e * z - &self.f).amax());
        }
        for j in 0..z.len() {
            r = r.max(self.lower[j] - z[j]).max(z[j] - self.upper[j]);
        }
        r
    }
}

/// Row-at-a-time assembly of an [`LpProblem`] from sparse coefficient lists.
#[derive(Debug, Clone)]
pub struct LpBuilder {
    n: usize,
    c: Vec<f64>,
    ineq: Vec<(Vec<(usize, f64)>, f64)>,
    eq: Vec<(Vec<(usize, f64)>, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LpBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            c: vec![0.0; n],
            ineq: Vec::new(),
            eq: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn cost(&mut self, j: usize, v: f64) -> &mut Self {
        self.c[j] = v;
        self
    }

    pub fn add_cost(&mut self, j: usize, v: f64) -> &mut Self {
        self.c[j] += v;
        self
    }

    pub fn bounds(&mut self, j: usize, lo: f64, hi: f64) -> &mut Self {
        self.lower[j] = lo;
        self.upper[j] = hi;
        self
    }

    pub fn ineq(&mut self, row: Vec<(usize, f64)>, rhs: f64) -> &mut Self {
        self.ineq.push((row, rhs));
        self
    }

    pub fn eq(&mut self, row: Vec<(usize, f64)>, rhs: f64) -> &mut Self {
        self.eq.push((row, rhs));
        self
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq.len()
    }

    pub fn build(&self) -> LpProblem {
        let fill = |rows: &[(Vec<(usize, f64)>, f64)]| {
            let mut m = DenseMatrix::zeros(rows.len(), self.n);
            let mut rhs = Vector::zeros(rows.len());
            for (i, (row, b)) in rows.iter().enumerate() {
                for &(j, v) in row {
                    m[(i, j)] += v;
                }
                rhs[i] = *b;
            }
            (m, rhs)
        };
        let (g, h) = fill(&self.ineq);
        let (e, f) = fill(&self.eq);
        LpProblem { c: Vector::from_vec(self.c.clone()), g, h, e, f, lower: self.lower.clone(), upper: self.upper.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Final basis over the internal standard-form columns; usable as a warm start
/// for a problem with the same shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub basic: Vec<usize>,
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vector,
    pub dual_ineq: Vector,
    pub dual_eq: Vector,
    pub reduced_costs: Vector,
    pub value: f64,
    pub basis: Option<Basis>,
    /// Improving direction when `Unbounded`.
    pub ray: Option<Vector>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpDiagnostics {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub max_cs_product: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `−hᵀλ + fᵀμ + Σ_j d_j·(active bound of z_j)`.
    pub fn dual_value(&self, p: &LpProblem) -> f64 {
        let mut v = -p.h.dot(&self.dual_ineq) + p.f.dot(&self.dual_eq);
        for j in 0..p.num_vars() {
            let d = self.reduced_costs[j];
            let bound = if d > 0.0 { p.lower[j] } else { p.upper[j] };
            v += if bound.is_finite() { d * bound } else { d * self.primal[j] };
        }
        v
    }

    pub fn diagnostics(&self, p: &LpProblem) -> LpDiagnostics {
        let primal_residual = p.primal_residual(&self.primal);
        let stationarity = &p.c + p.g.transpose() * &self.dual_ineq - p.e.transpose() * &self.dual_eq - &self.reduced_costs;
        let mut dual_residual = stationarity.amax();
        for &l in self.dual_ineq.iter() {
            dual_residual = dual_residual.max(-l);
        }
        for j in 0..p.num_vars() {
            let d = self.reduced_costs[j];
            if p.lower[j] == f64::NEG_INFINITY {
                dual_residual = dual_residual.max(d);
            }
            if p.upper[j] == f64::INFINITY {
                dual_residual = dual_residual.max(-d);
            }
        }
        let dual_value = self.dual_value(p);
        let mut max_cs_product: f64 = 0.0;
        if p.g.nrows() > 0 {
            let slack = &p.g * &self.primal - &p.h;
            for i in 0..slack.len() {
                max_cs_product = max_cs_product.max((self.dual_ineq[i] * slack[i]).abs());
            }
        }
        LpDiagnostics { primal_residual, dual_residual, dual_value, gap: (self.value - dual_value).abs(), max_cs_product }
    }

    /// Checks the optimality invariants at the given tolerances.
    pub fn verify(&self, p: &LpProblem, opts: &LpOptions) -> bool {
        let d = self.diagnostics(p);
        d.primal_residual <= opts.feas_tol
            && d.dual_residual <= opts.feas_tol
            && d.gap <= opts.gap_tol * (1.0 + self.value.abs())
            && d.max_cs_product <= opts.cs_tol
    }
}

/// Polyhedron `{z : Gz ≤ h, Ez = f}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub g: DenseMatrix,
    pub h: Vector,
    pub e: DenseMatrix,
    pub f: Vector,
}

impl Polyhedron {
    pub fn new(dim: usize) -> Self {
        Self { g: DenseMatrix::zeros(0, dim), h: Vector::zeros(0), e: DenseMatrix::zeros(0, dim), f: Vector::zeros(0) }
    }

    pub fn from_parts(g: DenseMatrix, h: Vector, e: DenseMatrix, f: Vector) -> Result<Self> {
        let p = Self { g, h, e, f };
        p.validate()?;
        Ok(p)
    }

    pub fn ineq_only(g: DenseMatrix, h: Vector) -> Result<Self> {
        let dim = g.ncols();
        Self::from_parts(g, h, DenseMatrix::zeros(0, dim), Vector::zeros(0))
    }

    pub fn eq_only(e: DenseMatrix, f: Vector) -> Result<Self> {
        let dim = e.ncols();
        Self::from_parts(DenseMatrix::zeros(0, dim), Vector::zeros(0), e, f)
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.g.ncols() != self.e.ncols() || self.g.nrows() != self.h.len() || self.e.nrows() != self.f.len() {
            return Err(Error::DimMismatch("polyhedron blocks disagree".into()));
        }
        let all = self.g.iter().chain(self.h.iter()).chain(self.e.iter()).chain(self.f.iter());
        if !all.into_iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("polyhedron has non-finite data".into()));
        }
        Ok(())
    }

    /// `[(Gz−h)⁺; Ez−f]`.
    pub fn residual_stack(&self, z: &Vector) -> Vector {
        let mut out = Vec::with_capacity(self.h.len() + self.f.len());
        if self.g.nrows() > 0 {
            out.extend((&self.g * z - &self.h).iter().map(|v| v.max(0.0)));
        }
        if self.e.nrows() > 0 {
            out.extend((&self.e * z - &self.f).iter().cloned());
        }
        Vector::from_vec(out)
    }

    pub fn max_violation(&self, z: &Vector) -> f64 {
        self.residual_stack(z).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Adds the constraints of `other` (same dimension).
    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch("intersection of polyhedra of different dimension".into()));
        }
        let stack = |a: &DenseMatrix, b: &DenseMatrix| {
            let mut m = DenseMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
            m.view_mut((0, 0), a.shape()).copy_from(a);
            m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
            m
        };
        let cat = |a: &Vector, b: &Vector| Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).cloned());
        Ok(Polyhedron { g: stack(&self.g, &other.g), h: cat(&self.h, &other.h), e: stack(&self.e, &other.e), f: cat(&self.f, &other.f) })
    }
}

/// Farkas certificate `(λ ≥ 0, μ)` with `Gᵀλ + Eᵀμ = 0` and `hᵀλ + fᵀμ < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Farkas {
    pub ineq: Vector,
    pub eq: Vector,
}

impl Farkas {
    /// Returns `(‖Gᵀλ + Eᵀμ‖_∞, hᵀλ + fᵀμ, min λ)`.
    pub fn check(&self, p: &Polyhedron) -> (f64, f64, f64) {
        let comb = p.g.transpose() * &self.ineq + p.e.transpose() * &self.eq;
        let rhs = p.h.dot(&self.ineq) + p.f.dot(&self.eq);
        let min_l = self.ineq.iter().cloned().fold(0.0, f64::min);
        (comb.amax(), rhs, min_l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vector),
    Infeasible(Farkas),
}

pub fn solve(p: &LpProblem) -> Result<LpSolution> {
    solve_with(p, &LpOptions::default())
}

pub fn solve_with(p: &LpProblem, opts: &LpOptions) -> Result<LpSolution> {
    p.validate()?;
    let mut s = Simplex::new(p, opts);
    s.cold_start();
    s.run_all(p)
}

/// Re-solves starting from `basis`; falls back to a cold start if the basis is
/// not primal feasible for `p`.
pub fn solve_warm(p: &LpProblem, basis: &Basis) -> Result<LpSolution> {
    p.validate()?;
    let opts = LpOptions::default();
    let mut s = Simplex::new(p, &opts);
    if s.warm_start(basis).is_ok() {
        return s.run_phase2_and_finish(p);
    }
    let mut s = Simplex::new(p, &opts);
    s.cold_start();
    s.run_all(p)
}

pub fn check_feasibility(system: &Polyhedron) -> Result<Feasibility> {
    system.validate()?;
    let n = system.dim();
    let p = LpProblem::new(Vector::zeros(n)).with_ineq(system.g.clone(), system.h.clone()).with_eq(system.e.clone(), system.f.clone());
    let opts = LpOptions::default();
    let mut s = Simplex::new(&p, &opts);
    s.cold_start();
    match s.phase1()? {
        Phase1::Feasible => {
            s.finish_phase1()?;
            s.refactor()?;
            let z = Vector::from_iterator(n, s.x[..n].iter().cloned());
            Ok(Feasibility::Feasible(z))
        }
        Phase1::Infeasible(y) => {
            let pi = p.g.nrows();
            let mut lam = Vector::from_iterator(pi, y[..pi].iter().map(|v| (-v).max(0.0)));
            let mut mu = Vector::from_iterator(y.len() - pi, y[pi..].iter().map(|v| -v));
            let scale = lam.amax().max(mu.amax());
            if scale > 0.0 {
                lam /= scale;
                mu /= scale;
            }
            Ok(Feasibility::Infeasible(Farkas { ineq: lam, eq: mu }))
        }
    }
}

enum Phase1 {
    Feasible,
    Infeasible(Vec<f64>),
}

enum PhaseEnd {
    Optimal,
    Unbounded(usize, f64),
}

enum Step {
    Flip(f64),
    Pivot(usize, f64, bool),
    Unbounded,
}

struct Simplex {
    rows: usize,
    cols: usize,
    n: usize,
    n_slack: usize,
    a: DMatrix<f64>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    dead_row: Vec<bool>,
    t: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    opts: LpOptions,
    since_refactor: usize,
    iterations: usize,
    phase_one: bool,
    banned: Vec<bool>,
}

impl Simplex {
    fn new(p: &LpProblem, opts: &LpOptions) -> Self {
        let n = p.num_vars();
        let pi = p.g.nrows();
        let pe = p.e.nrows();
        let rows = pi + pe;
        let cols = n + pi + rows;
        let mut a = DMatrix::zeros(rows, cols);
        a.view_mut((0, 0), (pi, n)).copy_from(&p.g);
        a.view_mut((pi, 0), (pe, n)).copy_from(&p.e);
        for i in 0..pi {
            a[(i, n + i)] = 1.0;
        }
        for i in 0..rows {
            a[(i, n + pi + i)] = 1.0;
        }
        let mut b = Vec::with_capacity(rows);
        b.extend(p.h.iter().cloned());
        b.extend(p.f.iter().cloned());
        let mut lo = vec![0.0; cols];
        let mut hi = vec![f64::INFINITY; cols];
        lo[..n].copy_from_slice(&p.lower);
        hi[..n].copy_from_slice(&p.upper);
        for j in n + pi..cols {
            hi[j] = 0.0;
        }
        Self {
            rows,
            cols,
            n,
            n_slack: pi,
            a,
            b,
            lo,
            hi,
            x: vec![0.0; cols],
            basis: Vec::new(),
            is_basic: vec![false; cols],
            dead_row: vec![false; rows],
            t: vec![0.0; rows * cols],
            d: vec![0.0; cols],
            cost: vec![0.0; cols],
            opts: *opts,
            since_refactor: 0,
            iterations: 0,
            phase_one: false,
            banned: vec![false; cols],
        }
    }

    fn art(&self, i: usize) -> usize {
        self.n + self.n_slack + i
    }

    fn is_art(&self, j: usize) -> bool {
        j >= self.n + self.n_slack
    }

    fn resting_value(lo: f64, hi: f64) -> f64 {
        if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        }
    }

    fn cold_start(&mut self) {
        for j in 0..self.n {
            self.x[j] = Self::resting_value(self.lo[j], self.hi[j]);
        }
        self.basis = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut r = self.b[i];
            for j in 0..self.n {
                r -= self.a[(i, j)] * self.x[j];
            }
            let art = self.art(i);
            if i < self.n_slack && r >= 0.0 {
                let s = self.n + i;
                self.x[s] = r;
                self.basis.push(s);
                self.is_basic[s] = true;
            } else {
                let sigma = if r < 0.0 { -1.0 } else { 1.0 };
                self.a[(i, art)] = sigma;
                self.hi[art] = f64::INFINITY;
                self.x[art] = r.abs();
                self.basis.push(art);
                self.is_basic[art] = true;
            }
        }
        // The initial basis is a ±1 diagonal, so B⁻¹A is a row scaling.
        for i in 0..self.rows {
            let sigma = self.a[(i, self.basis[i])];
            for j in 0..self.cols {
                self.t[i * self.cols + j] = self.a[(i, j)] * sigma;
            }
        }
    }

    fn warm_start(&mut self, basis: &Basis) -> Result<()> {
        if basis.basic.len() != self.rows || basis.at_upper.len() != self.cols {
            return Err(Error::DimMismatch("warm-start basis shape".into()));
        }
        for j in 0..self.cols {
            if self.is_art(j) {
                self.lo[j] = 0.0;
                self.hi[j] = 0.0;
            }
            self.x[j] = if basis.at_upper[j] && self.hi[j].is_finite() {
                self.hi[j]
            } else {
                Self::resting_value(self.lo[j], self.hi[j])
            };
        }
        self.basis = basis.basic.clone();
        for &j in &self.basis {
            if j >= self.cols || self.is_basic[j] {
                return Err(Error::InvalidInput("warm-start basis has invalid columns".into()));
            }
            self.is_basic[j] = true;
        }
        self.refactor()?;
        let tol = self.opts.feas_tol;
        for i in 0..self.rows {
            let j = self.basis[i];
            if self.x[j] < self.lo[j] - tol || self.x[j] > self.hi[j] + tol {
                return Err(Error::NumericalFailure("warm-start basis is not primal feasible".into()));
            }
        }
        Ok(())
    }

    fn tab(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn compute_reduced_costs(&mut self) {
        for j in 0..self.cols {
            let mut v = self.cost[j];
            for i in 0..self.rows {
                let cb = self.cost[self.basis[i]];
                if cb != 0.0 {
                    v -= cb * self.t[i * self.cols + j];
                }
            }
            self.d[j] = if self.is_basic[j] { 0.0 } else { v };
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut bm = DMatrix::zeros(self.rows, self.rows);
        for (k, &j) in self.basis.iter().enumerate() {
            bm.set_column(k, &self.a.column(j));
        }
        bm
    }

    /// Recomputes `B⁻¹A`, basic values and reduced costs from an LU factorization.
    fn refactor(&mut self) -> Result<()> {
        self.since_refactor = 0;
        if self.rows == 0 {
            self.compute_reduced_costs();
            return Ok(());
        }
        let lu = self.basis_matrix().lu();
        let tab = lu.solve(&self.a).ok_or_else(|| Error::NumericalFailure("singular basis matrix".into()))?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.t[i * self.cols + j] = tab[(i, j)];
            }
        }
        let mut rhs = DMatrix::from_column_slice(self.rows, 1, &self.b);
        for j in 0..self.cols {
            if !self.is_basic[j] && self.x[j] != 0.0 {
                for i in 0..self.rows {
                    rhs[(i, 0)] -= self.a[(i, j)] * self.x[j];
                }
            }
        }
        let xb = lu.solve(&rhs).ok_or_else(|| Error::NumericalFailure("singular basis matrix".into()))?;
        for i in 0..self.rows {
            self.x[self.basis[i]] = xb[(i, 0)];
        }
        self.compute_reduced_costs();
        Ok(())
    }

    /// Row duals `y = B⁻ᵀ c_B` for the current cost vector.
    fn row_duals(&self) -> Result<Vec<f64>> {
        if self.rows == 0 {
            return Ok(Vec::new());
        }
        let cb = DMatrix::from_iterator(self.rows, 1, self.basis.iter().map(|&j| self.cost[j]));
        let y = self
            .basis_matrix()
            .transpose()
            .lu()
            .solve(&cb)
            .ok_or_else(|| Error::NumericalFailure("singular basis matrix".into()))?;
        Ok(y.iter().cloned().collect())
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            if self.is_basic[j] || self.lo[j] == self.hi[j] || self.banned[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -tol && self.x[j] < self.hi[j] {
                1.0
            } else if dj > tol && self.x[j] > self.lo[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64) -> Step {
        let mut theta = self.hi[q] - self.lo[q];
        let mut pick: Option<(usize, bool)> = None;
        for i in 0..self.rows {
            if self.dead_row[i] {
                continue;
            }
            let alpha = dir * self.tab(i, q);
            if alpha.abs() <= self.opts.pivot_tol {
                continue;
            }
            let bi = self.basis[i];
            let (lim, to_upper) = if alpha > 0.0 {
                if !self.lo[bi].is_finite() {
                    continue;
                }
                ((self.x[bi] - self.lo[bi]).max(0.0) / alpha, false)
            } else {
                if !self.hi[bi].is_finite() {
                    continue;
                }
                ((self.hi[bi] - self.x[bi]).max(0.0) / -alpha, true)
            };
            let better = match pick {
                _ if lim < theta - 1e-12 => true,
                Some((r, _)) => lim <= theta + 1e-12 && bi < self.basis[r],
                None => false,
            };
            if better {
                theta = lim;
                pick = Some((i, to_upper));
            }
        }
        match pick {
            Some((r, up)) => Step::Pivot(r, theta, up),
            None if theta.is_finite() => Step::Flip(theta),
            None => Step::Unbounded,
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + q];
        for j in 0..cols {
            self.t[r * cols + j] /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for row in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = row[q];
            if f != 0.0 {
                for (v, pr) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pr;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, pr) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * pr;
            }
        }
        self.d[q] = 0.0;
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
    }

    fn run(&mut self) -> Result<PhaseEnd> {
        let mut degenerate_streak = 0usize;
        loop {
            if self.iterations >= self.opts.max_iter {
                return Err(Error::NumericalFailure(format!("simplex iteration cap {} reached", self.opts.max_iter)));
            }
            let bland = self.opts.rule == PivotRule::Bland || degenerate_streak > 50;
            let Some((q, dir)) = self.choose_entering(bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;
            let step = self.ratio_test(q, dir);
            let theta = match step {
                // Phase one is bounded below, so an unbounded ray there is pivot-tolerance noise.
                Step::Unbounded if self.phase_one => {
                    self.banned[q] = true;
                    continue;
                }
                Step::Unbounded => return Ok(PhaseEnd::Unbounded(q, dir)),
                Step::Flip(th) | Step::Pivot(_, th, _) => th,
            };
            degenerate_streak = if theta <= 1e-12 { degenerate_streak + 1 } else { 0 };
            if theta > 0.0 {
                self.x[q] += dir * theta;
                for i in 0..self.rows {
                    let bi = self.basis[i];
                    self.x[bi] -= dir * theta * self.t[i * self.cols + q];
                }
            }
            match step {
                Step::Flip(_) => {
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Step::Pivot(r, _, to_upper) => {
                    let leaving = self.basis[r];
                    self.x[leaving] = if to_upper { self.hi[leaving] } else { self.lo[leaving] };
                    self.pivot(r, q);
                    self.banned.iter_mut().for_each(|b| *b = false);
                    self.since_refactor += 1;
                    if self.since_refactor >= self.opts.refactor_every {
                        self.refactor()?;
                    }
                }
                Step::Unbounded => unreachable!(),
            }
        }
    }

    fn phase1(&mut self) -> Result<Phase1> {
        for j in 0..self.cols {
            self.cost[j] = if self.is_art(j) && self.hi[j] > 0.0 { 1.0 } else { 0.0 };
        }
        self.compute_reduced_costs();
        self.phase_one = true;
        let end = self.run();
        self.phase_one = false;
        self.banned.iter_mut().for_each(|b| *b = false);
        match end? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded(..) => return Err(Error::NumericalFailure("phase one reported unbounded".into())),
        }
        self.refactor()?;
        let infeas: f64 = (self.n + self.n_slack..self.cols).map(|j| self.x[j].max(0.0)).sum();
        let scale = 1.0 + self.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if infeas > self.opts.feas_tol * scale {
            return Ok(Phase1::Infeasible(self.row_duals()?));
        }
        Ok(Phase1::Feasible)
    }

    /// Drives zero-valued artificials out of the basis and fixes all artificials at zero.
    fn finish_phase1(&mut self) -> Result<()> {
        for r in 0..self.rows {
            let bj = self.basis[r];
            if !self.is_art(bj) {
                continue;
            }
            let limit = self.n + self.n_slack;
            let mut best: Option<usize> = None;
            let mut best_mag = 1e-7;
            for j in 0..limit {
                if self.is_basic[j] {
                    continue;
                }
                let mag = self.tab(r, j).abs();
                if mag > best_mag {
                    best_mag = mag;
                    best = Some(j);
                }
            }
            match best {
                Some(q) => {
                    self.x[bj] = 0.0;
                    self.pivot(r, q);
                }
                None => self.dead_row[r] = true,
            }
        }
        for j in self.n + self.n_slack..self.cols {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if !self.is_basic[j] {
                self.x[j] = 0.0;
            }
        }
        self.refactor()
    }

    fn set_phase2_cost(&mut self, p: &LpProblem) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..self.n].copy_from_slice(p.c.as_slice());
        self.compute_reduced_costs();
    }

    fn run_all(&mut self, p: &LpProblem) -> Result<LpSolution> {
        match self.phase1()? {
            Phase1::Infeasible(_) => {
                let n = self.n;
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    primal: Vector::from_iterator(n, self.x[..n].iter().cloned()),
                    dual_ineq: Vector::zeros(p.g.nrows()),
                    dual_eq: Vector::zeros(p.e.nrows()),
                    reduced_costs: Vector::zeros(n),
                    value: f64::NAN,
                    basis: None,
                    ray: None,
                    iterations: self.iterations,
                });
            }
            Phase1::Feasible => self.finish_phase1()?,
        }
        self.run_phase2_and_finish(p)
    }

    fn run_phase2_and_finish(&mut self, p: &LpProblem) -> Result<LpSolution> {
        self.set_phase2_cost(p);
        let n = self.n;
        match self.run()? {
            PhaseEnd::Unbounded(q, dir) => {
                let mut ray = Vector::zeros(n);
                if q < n {
                    ray[q] = dir;
                }
                for i in 0..self.rows {
                    let bi = self.basis[i];
                    if bi < n {
                        ray[bi] = -dir * self.tab(i, q);
                    }
                }
                Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    primal: Vector::from_iterator(n, self.x[..n].iter().cloned()),
                    dual_ineq: Vector::zeros(p.g.nrows()),
                    dual_eq: Vector::zeros(p.e.nrows()),
                    reduced_costs: Vector::zeros(n),
                    value: f64::NEG_INFINITY,
                    basis: None,
                    ray: Some(ray),
                    iterations: self.iterations,
                })
            }
            PhaseEnd::Optimal => {
                self.refactor()?;
                // Refactoring can expose reduced costs that drifted past the tolerance.
                if self.choose_entering(true).is_some() {
                    if let PhaseEnd::Unbounded(..) = self.run()? {
                        return Err(Error::NumericalFailure("unbounded after refactorization".into()));
                    }
                    self.refactor()?;
                }
                self.extract(p)
            }
        }
    }

    fn extract(&self, p: &LpProblem) -> Result<LpSolution> {
        let n = self.n;
        let pi = self.n_slack;
        let y = self.row_duals()?;
        let z = Vector::from_iterator(n, self.x[..n].iter().cloned());
        let dual_ineq = Vector::from_iterator(pi, y[..pi].iter().map(|v| -v));
        let dual_eq = Vector::from_iterator(self.rows - pi, y[pi..].iter().cloned());
        let mut d = p.c.clone() + p.g.transpose() * &dual_ineq - p.e.transpose() * &dual_eq;
        for j in 0..n {
            if self.is_basic[j] {
                d[j] = 0.0;
            }
        }
        let value = p.c.dot(&z);
        let at_upper = (0..self.cols).map(|j| !self.is_basic[j] && self.hi[j].is_finite() && self.x[j] == self.hi[j] && self.lo[j] != self.hi[j]).collect();
        let sol = LpSolution {
            status: LpStatus::Optimal,
            primal: z,
            dual_ineq,
            dual_eq,
            reduced_costs: d,
            value,
            basis: Some(Basis { basic: self.basis.clone(), at_upper }),
            ray: None,
            iterations: self.iterations,
        };
        let resid = p.primal_residual(&sol.primal);
        if resid > 1e-6 * (1.0 + self.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()))) {
            return Err(Error::NumericalFailure(format!("primal residual {resid:.3e} after cleanup")));
        }
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(r: usize, c: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn spec_examples() {
        let p = LpProblem::new(Vector::from_vec(vec![1.0])).with_ineq(mat(1, 1, &[-1.0]), Vector::from_vec(vec![-1.0]));
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(s.verify(&p, &LpOptions::default()));

        let p = LpProblem::new(Vector::from_vec(vec![0.0])).with_ineq(mat(2, 1, &[1.0, -1.0]), Vector::from_vec(vec![-1.0, -1.0]));
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);

        let p = LpProblem::new(Vector::from_vec(vec![-1.0])).with_ineq(mat(1, 1, &[-1.0]), Vector::from_vec(vec![0.0]));
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
        assert!(s.ray.unwrap()[0] > 0.0);
    }

    #[test]
    fn feasibility_examples() {
        let sys = Polyhedron::ineq_only(mat(2, 1, &[1.0, -1.0]), Vector::from_vec(vec![1.0, 0.0])).unwrap();
        match check_feasibility(&sys).unwrap() {
            Feasibility::Feasible(z) => assert!(sys.max_violation(&z) <= 1e-9),
            Feasibility::Infeasible(_) => panic!("expected feasible"),
        }
        let sys = Polyhedron::ineq_only(mat(2, 1, &[1.0, -1.0]), Vector::from_vec(vec![-1.0, -1.0])).unwrap();
        match check_feasibility(&sys).unwrap() {
            Feasibility::Infeasible(cert) => {
                let (comb, rhs, min_l) = cert.check(&sys);
                assert!(comb <= 1e-9 && rhs < 0.0 && min_l >= 0.0);
                assert!((cert.ineq[0] - 1.0).abs() < 1e-12 && (cert.ineq[1] - 1.0).abs() < 1e-12);
            }
            Feasibility::Feasible(_) => panic!("expected infeasible"),
        }
        let sys = Polyhedron::eq_only(mat(1, 2, &[1.0, 1.0]), Vector::from_vec(vec![2.0])).unwrap();
        assert!(matches!(check_feasibility(&sys).unwrap(), Feasibility::Feasible(_)));
    }

    #[test]
    fn bounded_variables_and_equalities() {
        // min -x - 2y  s.t. x + y = 3, 0 <= x <= 2, 0 <= y <= 2  →  (1, 2), value -5
        let p = LpProblem::new(Vector::from_vec(vec![-1.0, -2.0]))
            .with_eq(mat(1, 2, &[1.0, 1.0]), Vector::from_vec(vec![3.0]))
            .with_bounds(vec![0.0, 0.0], vec![2.0, 2.0]);
        let s = solve(&p).unwrap();
        assert!((s.value + 5.0).abs() < 1e-12);
        assert!(s.verify(&p, &LpOptions::default()));
    }

    #[test]
    fn redundant_equalities() {
        let p = LpProblem::new(Vector::from_vec(vec![1.0, 1.0]))
            .with_eq(mat(2, 2, &[1.0, 1.0, 2.0, 2.0]), Vector::from_vec(vec![1.0, 2.0]))
            .with_bounds(vec![0.0, 0.0], vec![f64::INFINITY, f64::INFINITY]);
        let s = solve(&p).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(s.verify(&p, &LpOptions::default()));
    }

    #[test]
    fn warm_start_reproduces_value() {
        let p = LpProblem::new(Vector::from_vec(vec![1.0, 2.0, -1.0]))
            .with_ineq(mat(2, 3, &[1.0, 1.0, 1.0, -1.0, 2.0, 0.5]), Vector::from_vec(vec![4.0, 1.0]))
            .with_bounds(vec![0.0, 0.0, 0.0], vec![3.0, f64::INFINITY, 2.0]);
        let s = solve(&p).unwrap();
        let w = solve_warm(&p, s.basis.as_ref().unwrap()).unwrap();
        assert!((s.value - w.value).abs() <= 1e-12);
        assert_eq!(w.iterations, 0);
    }

    #[test]
    fn pivot_rules_agree() {
        let p = LpProblem::new(Vector::from_vec(vec![-3.0, -5.0]))
            .with_ineq(mat(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 2.0]), Vector::from_vec(vec![4.0, 12.0, 18.0]))
            .with_bounds(vec![0.0, 0.0], vec![f64::INFINITY, f64::INFINITY]);
        let a = solve(&p).unwrap();
        let b = solve_with(&p, &LpOptions { rule: PivotRule::DantzigBland, ..LpOptions::default() }).unwrap();
        assert!((a.value + 36.0).abs() < 1e-10);
        assert!((a.value - b.value).abs() < 1e-10);
    }

    fn lp_strategy() -> impl Strategy<Value = LpProblem> {
        (1usize..5, 1usize..5).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-3.0f64..3.0, m * n),
                prop::collection::vec(0.0f64..3.0, m),
            )
                .prop_map(move |(c, g, h)| {
                    // Box bounds keep every instance bounded; h ≥ 0 keeps z = 0 feasible.
                    LpProblem::new(Vector::from_vec(c))
                        .with_ineq(DenseMatrix::from_row_slice(m, n, &g), Vector::from_vec(h))
                        .with_bounds(vec![-5.0; n], vec![5.0; n])
                })
        })
    }

    proptest! {
        #[test]
        fn strong_duality_and_cs(p in lp_strategy()) {
            let s = solve(&p).unwrap();
            prop_assert_eq!(s.status, LpStatus::Optimal);
            prop_assert!(s.verify(&p, &LpOptions::default()), "{:?}", s.diagnostics(&p));
        }

        #[test]
        fn deterministic(p in lp_strategy()) {
            let a = solve(&p).unwrap();
            let b = solve(&p).unwrap();
            prop_assert_eq!(a.primal.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            b.primal.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }

        #[test]
        fn warm_start_round_trip(p in lp_strategy()) {
            let s = solve(&p).unwrap();
            let w = solve_warm(&p, s.basis.as_ref().unwrap()).unwrap();
            prop_assert!((s.value - w.value).abs() <= 1e-12);
        }
    }
}
