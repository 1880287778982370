//! The four ℓ1-minimization problems as linear programs, with their multipliers
//! mapped back to the KKT variables, residual stacks for KKT-set membership and
//! the distance from a point to the optimal solution set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Polyhedron, SpherePolytope};
use crate::linops::{self, DenseMatrix, DesignMatrix, Vector};
use crate::lp::{self, LpBuilder, LpSolution, LpStatus};

/// Which residual norm bounds the measurement error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// `Ax = y` exactly.
    Eq,
    Inf,
    One,
    Two,
}

impl NormKind {
    pub const ALL: [NormKind; 4] = [NormKind::Eq, NormKind::Inf, NormKind::One, NormKind::Two];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Eq => "eq",
            NormKind::Inf => "inf",
            NormKind::One => "one",
            NormKind::Two => "two",
        }
    }

    /// `‖r‖` in this kind's norm (`Eq` uses ℓ∞ for the residual).
    pub fn residual_norm(self, r: &[f64]) -> f64 {
        match self {
            NormKind::Eq | NormKind::Inf => linops::norm_inf(r),
            NormKind::One => linops::norm1(r),
            NormKind::Two => linops::norm2(r),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq" => Ok(NormKind::Eq),
            "inf" => Ok(NormKind::Inf),
            "one" => Ok(NormKind::One),
            "two" => Ok(NormKind::Two),
            other => Err(Error::InvalidInput(format!("unknown norm `{other}` (expected eq, inf, one or two)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub y: Vec<f64>,
    pub epsilon: f64,
    pub norm: NormKind,
}

impl MeasurementModel {
    pub fn new(y: Vec<f64>, epsilon: f64, norm: NormKind) -> Result<Self> {
        check_eps(norm, epsilon)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("measurement vector has non-finite entries".into()));
        }
        Ok(Self { y, epsilon, norm })
    }
}

fn check_eps(norm: NormKind, eps: f64) -> Result<()> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidInput(format!("epsilon must be finite and nonnegative, got {eps}")));
    }
    match (norm, eps == 0.0) {
        (NormKind::Eq, false) => Err(Error::InvalidInput("norm `eq` requires epsilon = 0".into())),
        (NormKind::Eq, true) => Ok(()),
        (_, true) => Err(Error::InvalidInput(format!("norm `{norm}` requires epsilon > 0"))),
        _ => Ok(()),
    }
}

/// A full primal-dual tuple of one of the KKT sets, in the variable order the
/// residual stacks and KKT systems use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KktPoint {
    /// `(x, t, u, v, w)`.
    Eq { x: Vector, t: Vector, u: Vector, v: Vector, w: Vector },
    /// `(x, t, u, v, w, w′)`.
    Inf { x: Vector, t: Vector, u: Vector, v: Vector, w: Vector, w_prime: Vector },
    /// `(x, t, r, v1, v2, v3, v4, v5)`.
    One { x: Vector, t: Vector, r: Vector, v1: Vector, v2: Vector, v3: Vector, v4: Vector, v5: f64 },
    /// `(x, t, v1, v2, v3)`; `v3` has one entry per polytope normal.
    Two { x: Vector, t: Vector, v1: Vector, v2: Vector, v3: Vector },
}

impl KktPoint {
    pub fn kind(&self) -> NormKind {
        match self {
            KktPoint::Eq { .. } => NormKind::Eq,
            KktPoint::Inf { .. } => NormKind::Inf,
            KktPoint::One { .. } => NormKind::One,
            KktPoint::Two { .. } => NormKind::Two,
        }
    }

    pub fn x(&self) -> &Vector {
        match self {
            KktPoint::Eq { x, .. } | KktPoint::Inf { x, .. } | KktPoint::One { x, .. } | KktPoint::Two { x, .. } => x,
        }
    }

    pub fn t(&self) -> &Vector {
        match self {
            KktPoint::Eq { t, .. } | KktPoint::Inf { t, .. } | KktPoint::One { t, .. } | KktPoint::Two { t, .. } => t,
        }
    }

    /// `η = u − v` (or `v1 − v2`): the subgradient of `‖·‖₁` carried by the tuple.
    pub fn eta(&self) -> Vector {
        match self {
            KktPoint::Eq { u, v, .. } | KktPoint::Inf { u, v, .. } => u - v,
            KktPoint::One { v1, v2, .. } | KktPoint::Two { v1, v2, .. } => v1 - v2,
        }
    }

    pub fn to_vector(&self) -> Vector {
        let parts: Vec<&[f64]> = match self {
            KktPoint::Eq { x, t, u, v, w } => vec![x.as_slice(), t.as_slice(), u.as_slice(), v.as_slice(), w.as_slice()],
            KktPoint::Inf { x, t, u, v, w, w_prime } => {
                vec![x.as_slice(), t.as_slice(), u.as_slice(), v.as_slice(), w.as_slice(), w_prime.as_slice()]
            }
            KktPoint::One { x, t, r, v1, v2, v3, v4, v5 } => vec![
                x.as_slice(),
                t.as_slice(),
                r.as_slice(),
                v1.as_slice(),
                v2.as_slice(),
                v3.as_slice(),
                v4.as_slice(),
                std::slice::from_ref(v5),
            ],
            KktPoint::Two { x, t, v1, v2, v3 } => vec![x.as_slice(), t.as_slice(), v1.as_slice(), v2.as_slice(), v3.as_slice()],
        };
        Vector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.into_iter().flatten().copied())
    }

    /// Splits a stacked vector back into a tuple; `nn` is the normal count for `Two`.
    pub fn from_vector(kind: NormKind, z: &[f64], m: usize, n: usize, nn: usize) -> Result<Self> {
        let sizes: Vec<usize> = match kind {
            NormKind::Eq => vec![n, n, n, n, m],
            NormKind::Inf => vec![n, n, n, n, m, m],
            NormKind::One => vec![n, n, m, n, n, m, m, 1],
            NormKind::Two => vec![n, n, n, n, nn],
        };
        if z.len() != sizes.iter().sum::<usize>() {
            return Err(Error::DimMismatch(format!("tuple of length {} does not fit kind `{kind}`", z.len())));
        }
        let mut off = 0;
        let mut parts = Vec::new();
        for s in sizes {
            parts.push(Vector::from_column_slice(&z[off..off + s]));
            off += s;
        }
        let mut it = parts.into_iter();
        let mut next = || it.next().expect("sized above");
        Ok(match kind {
            NormKind::Eq => KktPoint::Eq { x: next(), t: next(), u: next(), v: next(), w: next() },
            NormKind::Inf => KktPoint::Inf { x: next(), t: next(), u: next(), v: next(), w: next(), w_prime: next() },
            NormKind::One => KktPoint::One {
                x: next(),
                t: next(),
                r: next(),
                v1: next(),
                v2: next(),
                v3: next(),
                v4: next(),
                v5: next()[0],
            },
            NormKind::Two => KktPoint::Two { x: next(), t: next(), v1: next(), v2: next(), v3: next() },
        })
    }
}

/// One level of the polytope ladder of the ℓ2 relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub j: usize,
    pub normals: usize,
    pub value: f64,
    /// `‖restored point‖₁ − value` at this level.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Relaxation {
    pub polytope: SpherePolytope,
    pub ladder: Vec<LadderStep>,
    /// A point with `‖Ax − y‖₂ ≤ ε`.
    pub restored: Vector,
    /// `[γ*_{P̃_J}, ‖restored‖₁]` brackets the optimal value of the ℓ2 problem.
    pub interval: (f64, f64),
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySolution {
    pub kind: NormKind,
    pub x_star: Vector,
    pub value: f64,
    pub dual_value: f64,
    pub point: KktPoint,
    pub kkt_residual_linf: f64,
    pub relaxation: Option<L2Relaxation>,
}

impl RecoverySolution {
    pub fn duality_gap(&self) -> f64 {
        (self.value - self.dual_value).abs()
    }

    pub fn polytope_matrix(&self) -> Option<DenseMatrix> {
        self.relaxation.as_ref().map(|r| r.polytope.matrix())
    }
}

fn check_y(a: &DesignMatrix, y: &Vector) -> Result<()> {
    if y.len() != a.rows() {
        return Err(Error::DimMismatch(format!("y has length {}, A has {} rows", y.len(), a.rows())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("measurement vector has non-finite entries".into()));
    }
    Ok(())
}

fn optimal(sol: LpSolution) -> Result<LpSolution> {
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        s => Err(Error::NumericalFailure(format!("recovery LP ended {s:?}"))),
    }
}

fn seg(v: &Vector, start: usize, len: usize) -> Vector {
    v.rows(start, len).into_owned()
}

/// Rows `x − t ≤ 0` then `−x − t ≤ 0`, with `x` at `0..n` and `t` at `n..2n`.
fn abs_rows(b: &mut LpBuilder, n: usize) {
    for i in 0..n {
        b.ineq(vec![(i, 1.0), (n + i, -1.0)], 0.0);
    }
    for i in 0..n {
        b.ineq(vec![(i, -1.0), (n + i, -1.0)], 0.0);
    }
}

fn l1_objective(n: usize, extra: usize) -> LpBuilder {
    let mut b = LpBuilder::new(2 * n + extra);
    for i in 0..n {
        b.cost(n + i, 1.0).bounds(n + i, 0.0, f64::INFINITY);
    }
    b
}

fn row_of(a: &DenseMatrix, i: usize, scale: f64) -> Vec<(usize, f64)> {
    (0..a.ncols()).map(|j| (j, scale * a[(i, j)])).collect()
}

fn finish(point: KktPoint, dual_value: f64, a: &DenseMatrix, y: &Vector, eps: f64, m: Option<&DenseMatrix>) -> Result<RecoverySolution> {
    let res = kkt_residual(&point, a, y, eps, m)?;
    let x_star = point.x().clone();
    let value = point.t().sum();
    Ok(RecoverySolution {
        kind: point.kind(),
        x_star,
        value,
        dual_value,
        kkt_residual_linf: res.amax(),
        point,
        relaxation: None,
    })
}

/// `min ‖x‖₁ s.t. Ax = y`.
pub fn bp_solve(a: &DesignMatrix, y: &Vector) -> Result<RecoverySolution> {
    check_y(a, y)?;
    let (m, n) = (a.rows(), a.cols());
    let mut b = l1_objective(n, 0);
    abs_rows(&mut b, n);
    for i in 0..m {
        b.eq(row_of(a.a(), i, 1.0), y[i]);
    }
    let sol = optimal(lp::solve(&b.build())?)?;
    let point = KktPoint::Eq {
        x: seg(&sol.primal, 0, n),
        t: seg(&sol.primal, n, n),
        u: seg(&sol.dual_ineq, 0, n),
        v: seg(&sol.dual_ineq, n, n),
        w: sol.dual_eq.clone(),
    };
    let dual = y.dot(&sol.dual_eq);
    finish(point, dual, a.a(), y, 0.0, None)
}

/// `min ‖x‖₁ s.t. ‖Ax − y‖∞ ≤ ε`.
pub fn linf_solve(a: &DesignMatrix, y: &Vector, eps: f64) -> Result<RecoverySolution> {
    check_y(a, y)?;
    check_eps(NormKind::Inf, eps)?;
    let (m, n) = (a.rows(), a.cols());
    let mut b = l1_objective(n, 0);
    abs_rows(&mut b, n);
    for i in 0..m {
        b.ineq(row_of(a.a(), i, 1.0), y[i] + eps);
    }
    for i in 0..m {
        b.ineq(row_of(a.a(), i, -1.0), eps - y[i]);
    }
    let sol = optimal(lp::solve(&b.build())?)?;
    let w_prime = seg(&sol.dual_ineq, 2 * n, m);
    let w = seg(&sol.dual_ineq, 2 * n + m, m);
    let dual = y.add_scalar(-eps).dot(&w) - y.add_scalar(eps).dot(&w_prime);
    let point = KktPoint::Inf {
        x: seg(&sol.primal, 0, n),
        t: seg(&sol.primal, n, n),
        u: seg(&sol.dual_ineq, 0, n),
        v: seg(&sol.dual_ineq, n, n),
        w,
        w_prime,
    };
    finish(point, dual, a.a(), y, eps, None)
}

/// `min ‖x‖₁ s.t. ‖Ax − y‖₁ ≤ ε`, with `|Ax − y| ≤ r`, `eᵀr ≤ ε`.
pub fn l1con_solve(a: &DesignMatrix, y: &Vector, eps: f64) -> Result<RecoverySolution> {
    check_y(a, y)?;
    check_eps(NormKind::One, eps)?;
    let (m, n) = (a.rows(), a.cols());
    let mut b = l1_objective(n, m);
    let r0 = 2 * n;
    for i in 0..m {
        b.bounds(r0 + i, 0.0, f64::INFINITY);
    }
    abs_rows(&mut b, n);
    for i in 0..m {
        let mut row = row_of(a.a(), i, 1.0);
        row.push((r0 + i, -1.0));
        b.ineq(row, y[i]);
    }
    for i in 0..m {
        let mut row = row_of(a.a(), i, -1.0);
        row.push((r0 + i, -1.0));
        b.ineq(row, -y[i]);
    }
    b.ineq((0..m).map(|i| (r0 + i, 1.0)).collect(), eps);
    let sol = optimal(lp::solve(&b.build())?)?;
    let v3 = seg(&sol.dual_ineq, 2 * n, m);
    let v4 = seg(&sol.dual_ineq, 2 * n + m, m);
    let v5 = sol.dual_ineq[2 * n + 2 * m];
    let dual = -y.dot(&(&v3 - &v4)) - eps * v5;
    let point = KktPoint::One {
        x: seg(&sol.primal, 0, n),
        t: seg(&sol.primal, n, n),
        r: seg(&sol.primal, r0, m),
        v1: seg(&sol.dual_ineq, 0, n),
        v2: seg(&sol.dual_ineq, n, n),
        v3,
        v4,
        v5,
    };
    finish(point, dual, a.a(), y, eps, None)
}

/// The polytope relaxation `min ‖x‖₁ s.t. Mᵀ(Ax − y) ≤ εe` for a fixed `M`.
pub fn polytope_relaxation_solve(a: &DesignMatrix, y: &Vector, eps: f64, mm: &DenseMatrix) -> Result<RecoverySolution> {
    check_y(a, y)?;
    check_eps(NormKind::Two, eps)?;
    if mm.nrows() != a.rows() {
        return Err(Error::DimMismatch("polytope dimension differs from the number of rows of A".into()));
    }
    let n = a.cols();
    let nn = mm.ncols();
    let mta = mm.transpose() * a.a();
    let rhs = mm.transpose() * y;
    let mut b = l1_objective(n, 0);
    abs_rows(&mut b, n);
    for i in 0..nn {
        b.ineq(row_of(&mta, i, 1.0), rhs[i] + eps);
    }
    let sol = optimal(lp::solve(&b.build())?)?;
    let v3 = seg(&sol.dual_ineq, 2 * n, nn);
    let dual = -rhs.add_scalar(eps).dot(&v3);
    let point = KktPoint::Two { x: seg(&sol.primal, 0, n), t: seg(&sol.primal, n, n), v1: seg(&sol.dual_ineq, 0, n), v2: seg(&sol.dual_ineq, n, n), v3 };
    finish(point, dual, a.a(), y, eps, Some(mm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Options {
    /// Normal counts before augmentation and nesting.
    pub schedule: Vec<usize>,
    /// Relative change in value below which the ladder stops.
    pub tol: f64,
    pub seed: u64,
    /// Solve every scheduled level even after convergence.
    pub run_full: bool,
}

impl Default for L2Options {
    fn default() -> Self {
        Self { schedule: vec![16, 32, 64, 128, 256], tol: 1e-6, seed: 7, run_full: false }
    }
}

/// Moves `x` toward `x_ls = Gᵀy` (where `Ax_ls = y`) just far enough that
/// `‖Ax − y‖₂ ≤ ε`; along that segment the residual is `(1 − θ)(Ax − y)`.
pub fn restore_feasible(a: &DesignMatrix, y: &Vector, eps: f64, x: &Vector) -> Vector {
    let r = (a.a() * x - y).norm();
    if r <= eps {
        return x.clone();
    }
    let x_ls = a.least_squares_solution(y);
    let mut theta = 1.0 - eps / r;
    for _ in 0..60 {
        let cand = x + (&x_ls - x) * theta;
        if (a.a() * &cand - y).norm() <= eps {
            return cand;
        }
        theta = (theta + (1.0 - theta) * 1e-12).min(1.0);
        if theta >= 1.0 {
            break;
        }
    }
    x_ls
}

/// Steps of the inner restoration in [`l2con_solve`].
const INNER_STEPS: usize = 4;

/// A feasible point for `‖Ax − y‖₂ ≤ ε` with small ℓ1 norm: shrink the polytope
/// level until the relaxation optimum lands in the ball, radially restoring
/// every intermediate optimum, and keep the best candidate.
fn inner_restore(a: &DesignMatrix, y: &Vector, eps: f64, mm: &DenseMatrix, x0: &Vector) -> Result<Vector> {
    let mut best = restore_feasible(a, y, eps, x0);
    let mut level = eps;
    let mut x = x0.clone();
    for _ in 0..INNER_STEPS {
        let r = (a.a() * &x - y).norm();
        if r <= eps {
            break;
        }
        level *= eps / r;
        x = polytope_relaxation_solve(a, y, level, mm)?.x_star;
        let cand = restore_feasible(a, y, eps, &x);
        if linops::norm1(cand.as_slice()) < linops::norm1(best.as_slice()) {
            best = cand;
        }
    }
    Ok(best)
}

/// `min ‖x‖₁ s.t. ‖Ax − y‖₂ ≤ ε` through a ladder of nested outer polytopes of
/// the unit ball. The returned `x_star` and `value` belong to the finest
/// relaxation solved, which is a lower bound; the restored point gives an upper one.
pub fn l2con_solve(a: &DesignMatrix, y: &Vector, eps: f64, opts: &L2Options) -> Result<RecoverySolution> {
    check_y(a, y)?;
    check_eps(NormKind::Two, eps)?;
    let m = a.rows();
    if m < 2 {
        return Err(Error::BadDim("the ℓ2 relaxation needs at least two measurements".into()));
    }
    if opts.schedule.is_empty() {
        return Err(Error::InvalidInput("empty J schedule".into()));
    }
    let mut levels: Vec<SpherePolytope> = Vec::new();
    let mut ladder: Vec<LadderStep> = Vec::new();
    let mut best: Option<(RecoverySolution, SpherePolytope, Vector)> = None;
    let mut converged = false;
    for &j in &opts.schedule {
        levels.push(geometry::augment_with_axes(&geometry::dudley_polytope(m, j, opts.seed.wrapping_add(j as u64))?));
        let poly = geometry::nest(&levels)?;
        let mm = poly.matrix();
        let sol = polytope_relaxation_solve(a, y, eps, &mm)?;
        let restored = inner_restore(a, y, eps, &mm, &sol.x_star)?;
        let gap = linops::norm1(restored.as_slice()) - sol.value;
        let prev = ladder.last().map(|s| s.value);
        ladder.push(LadderStep { j, normals: poly.len(), value: sol.value, gap });
        let done = prev.is_some_and(|p| (sol.value - p).abs() < opts.tol * sol.value.abs().max(1.0));
        converged |= done;
        best = Some((sol, poly, restored));
        if done && !opts.run_full {
            break;
        }
    }
    let (mut sol, poly, restored) = best.expect("schedule is nonempty");
    let upper = linops::norm1(restored.as_slice());
    sol.relaxation = Some(L2Relaxation { polytope: poly, ladder, interval: (sol.value, upper), restored, converged });
    Ok(sol)
}

/// Dispatch on the measurement model.
pub fn solve(a: &DesignMatrix, model: &MeasurementModel, l2: &L2Options) -> Result<RecoverySolution> {
    let y = Vector::from_column_slice(&model.y);
    match model.norm {
        NormKind::Eq => bp_solve(a, &y),
        NormKind::Inf => linf_solve(a, &y, model.epsilon),
        NormKind::One => l1con_solve(a, &y, model.epsilon),
        NormKind::Two => l2con_solve(a, &y, model.epsilon, l2),
    }
}

fn pos(v: &Vector) -> Vector {
    v.map(|x| x.max(0.0))
}

fn neg(v: &Vector) -> Vector {
    v.map(|x| x.min(0.0))
}

fn concat(parts: &[Vector]) -> Vector {
    Vector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.iter().flat_map(|p| p.iter().copied()))
}

fn scalar(v: f64) -> Vector {
    Vector::from_element(1, v)
}

fn expect_len(name: &str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::DimMismatch(format!("{name} has length {}, expected {len}", v.len())));
    }
    Ok(())
}

/// Residual stack measuring how far a tuple is from its KKT set: positive parts
/// of inequality rows, absolute equality residuals, then negative parts of the
/// sign constraints. `mm` is the polytope matrix, required for `Two`.
///
/// Row layout per kind:
/// - `Eq`: `(x−t)⁺, (−x−t)⁺, (u+v−e)⁺, |Ax−y|, |Aᵀw−u+v|, |eᵀt−yᵀw|, u⁻, v⁻, t⁻`
/// - `Inf`: `(x−t)⁺, (−x−t)⁺, (Ax−y−εe)⁺, (Ax−y+εe)⁻, |Aᵀ(w−w′)−u+v|, (u+v−e)⁺,
///   |eᵀt−(y−εe)ᵀw+(y+εe)ᵀw′|, u⁻, v⁻, t⁻, w⁻, w′⁻`
/// - `One`: `(x−t)⁺, (−x−t)⁺, (Ax−y−r)⁺, (Ax−y+r)⁻, (eᵀr−ε)⁺, |Aᵀ(v3−v4)+v1−v2|,
///   (v1+v2−e)⁺, (v3+v4−v5e)⁺, |eᵀt+yᵀ(v3−v4)+v5ε|, t⁻, r⁻, v1⁻, …, v5⁻`
/// - `Two`: `(MᵀAx−Mᵀy−εe)⁺, (x−t)⁺, (−x−t)⁺, |AᵀMv3+v1−v2|, (v1+v2−e)⁺,
///   |eᵀt+(εe+Mᵀy)ᵀv3|, t⁻, v1⁻, v2⁻, v3⁻`
pub fn kkt_residual(point: &KktPoint, a: &DenseMatrix, y: &Vector, eps: f64, mm: Option<&DenseMatrix>) -> Result<Vector> {
    let (m, n) = (a.nrows(), a.ncols());
    expect_len("y", y, m)?;
    let x = point.x();
    let t = point.t();
    expect_len("x", x, n)?;
    expect_len("t", t, n)?;
    let ax_y = a * x - y;
    let at = a.transpose();
    let out = match point {
        KktPoint::Eq { u, v, w, .. } => {
            expect_len("u", u, n)?;
            expect_len("v", v, n)?;
            expect_len("w", w, m)?;
            concat(&[
                pos(&(x - t)),
                pos(&(-x - t)),
                pos(&(u + v).add_scalar(-1.0)),
                ax_y.abs(),
                (&at * w - u + v).abs(),
                scalar((t.sum() - y.dot(w)).abs()),
                neg(u),
                neg(v),
                neg(t),
            ])
        }
        KktPoint::Inf { u, v, w, w_prime, .. } => {
            expect_len("u", u, n)?;
            expect_len("v", v, n)?;
            expect_len("w", w, m)?;
            expect_len("w′", w_prime, m)?;
            concat(&[
                pos(&(x - t)),
                pos(&(-x - t)),
                pos(&ax_y.add_scalar(-eps)),
                neg(&ax_y.add_scalar(eps)),
                (&at * (w - w_prime) - u + v).abs(),
                pos(&(u + v).add_scalar(-1.0)),
                scalar((t.sum() - y.add_scalar(-eps).dot(w) + y.add_scalar(eps).dot(w_prime)).abs()),
                neg(u),
                neg(v),
                neg(t),
                neg(w),
                neg(w_prime),
            ])
        }
        KktPoint::One { r, v1, v2, v3, v4, v5, .. } => {
            expect_len("r", r, m)?;
            expect_len("v1", v1, n)?;
            expect_len("v2", v2, n)?;
            expect_len("v3", v3, m)?;
            expect_len("v4", v4, m)?;
            let d34 = v3 - v4;
            concat(&[
                pos(&(x - t)),
                pos(&(-x - t)),
                pos(&(&ax_y - r)),
                neg(&(&ax_y + r)),
                scalar((r.sum() - eps).max(0.0)),
                (&at * &d34 + v1 - v2).abs(),
                pos(&(v1 + v2).add_scalar(-1.0)),
                pos(&(v3 + v4).add_scalar(-*v5)),
                scalar((t.sum() + y.dot(&d34) + v5 * eps).abs()),
                neg(t),
                neg(r),
                neg(v1),
                neg(v2),
                neg(v3),
                neg(v4),
                scalar(v5.min(0.0)),
            ])
        }
        KktPoint::Two { v1, v2, v3, .. } => {
            let mm = mm.ok_or(Error::MissingExtras("polytope matrix"))?;
            if mm.nrows() != m {
                return Err(Error::DimMismatch("polytope dimension differs from the number of rows of A".into()));
            }
            expect_len("v1", v1, n)?;
            expect_len("v2", v2, n)?;
            expect_len("v3", v3, mm.ncols())?;
            let mty = mm.transpose() * y;
            concat(&[
                pos(&(mm.transpose() * &ax_y).add_scalar(-eps)),
                pos(&(x - t)),
                pos(&(-x - t)),
                (&at * (mm * v3) + v1 - v2).abs(),
                pos(&(v1 + v2).add_scalar(-1.0)),
                scalar((t.sum() + mty.add_scalar(eps).dot(v3)).abs()),
                neg(t),
                neg(v1),
                neg(v2),
                neg(v3),
            ])
        }
    };
    Ok(out)
}

/// Names and lengths of the blocks of [`kkt_residual`]'s output, in order;
/// `nn` is the normal count for `Two`.
pub fn residual_blocks(kind: NormKind, m: usize, n: usize, nn: usize) -> Vec<(&'static str, usize)> {
    match kind {
        NormKind::Eq => vec![
            ("x-t+", n),
            ("-x-t+", n),
            ("u+v-e+", n),
            ("Ax-y", m),
            ("ATw-u+v", n),
            ("objective", 1),
            ("u-", n),
            ("v-", n),
            ("t-", n),
        ],
        NormKind::Inf => vec![
            ("x-t+", n),
            ("-x-t+", n),
            ("Ax-y-eps+", m),
            ("Ax-y+eps-", m),
            ("AT(w-w')-u+v", n),
            ("u+v-e+", n),
            ("objective", 1),
            ("u-", n),
            ("v-", n),
            ("t-", n),
            ("w-", m),
            ("w'-", m),
        ],
        NormKind::One => vec![
            ("x-t+", n),
            ("-x-t+", n),
            ("Ax-y-r+", m),
            ("Ax-y+r-", m),
            ("eTr-eps+", 1),
            ("AT(v3-v4)+v1-v2", n),
            ("v1+v2-e+", n),
            ("v3+v4-v5e+", m),
            ("objective", 1),
            ("t-", n),
            ("r-", m),
            ("v1-", n),
            ("v2-", n),
            ("v3-", m),
            ("v4-", m),
            ("v5-", 1),
        ],
        NormKind::Two => vec![
            ("MTAx-MTy-eps+", nn),
            ("x-t+", n),
            ("-x-t+", n),
            ("ATMv3+v1-v2", n),
            ("v1+v2-e+", n),
            ("objective", 1),
            ("t-", n),
            ("v1-", n),
            ("v2-", n),
            ("v3-", nn),
        ],
    }
}

/// Blocks of [`residual_blocks`] that involve only the multipliers.
pub fn dual_blocks(kind: NormKind) -> &'static [&'static str] {
    match kind {
        NormKind::Eq => &["u+v-e+", "ATw-u+v", "u-", "v-"],
        NormKind::Inf => &["AT(w-w')-u+v", "u+v-e+", "u-", "v-", "w-", "w'-"],
        NormKind::One => &["AT(v3-v4)+v1-v2", "v1+v2-e+", "v3+v4-v5e+", "v1-", "v2-", "v3-", "v4-", "v5-"],
        NormKind::Two => &["ATMv3+v1-v2", "v1+v2-e+", "v1-", "v2-", "v3-"],
    }
}

/// Tolerance for reading `|ηᵢ| = 1` off a computed dual.
const FACE_TOL: f64 = 1e-9;

/// Largest `m` for which the ℓ1 residual ball is written out as `2^m` rows.
pub const L1_BALL_ROW_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSetDistance {
    pub distance: f64,
    pub nearest: Vector,
    pub value: f64,
    /// The set is the polytope relaxation's solution set (norm `two`).
    pub relaxed: bool,
}

/// The optimal set as a polyhedron in `x`-space.
///
/// With an optimal dual `η = u − v`, complementary slackness forces every
/// optimal `x` to have `xᵢ = 0` where `|ηᵢ| < 1` and `sign xᵢ = ηᵢ` where
/// `|ηᵢ| = 1`. On that face `‖x‖₁ = ηᵀx`, so the optimal set is
/// `{feasible} ∩ face ∩ {ηᵀx ≤ γ*}`; this is the projection of the lifted
/// `(x, t)` description onto `x` without auxiliary variables.
pub fn solution_set(sol: &RecoverySolution, a: &DesignMatrix, y: &Vector, eps: f64) -> Result<Polyhedron> {
    let (m, n) = (a.rows(), a.cols());
    check_y(a, y)?;
    let eta = sol.point.eta();
    let mut g_rows: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<f64> = Vec::new();
    let mut e_rows: Vec<Vec<f64>> = Vec::new();
    let mut f: Vec<f64> = Vec::new();
    let unit = |i: usize, s: f64| {
        let mut r = vec![0.0; n];
        r[i] = s;
        r
    };
    for i in 0..n {
        if eta[i] >= 1.0 - FACE_TOL {
            g_rows.push(unit(i, -1.0));
            h.push(0.0);
        } else if eta[i] <= -1.0 + FACE_TOL {
            g_rows.push(unit(i, 1.0));
            h.push(0.0);
        } else {
            e_rows.push(unit(i, 1.0));
            f.push(0.0);
        }
    }
    g_rows.push(eta.iter().copied().collect());
    h.push(sol.value);
    let arow = |i: usize, s: f64| -> Vec<f64> { (0..n).map(|j| s * a.a()[(i, j)]).collect() };
    match sol.kind {
        NormKind::Eq => {
            for i in 0..m {
                e_rows.push(arow(i, 1.0));
                f.push(y[i]);
            }
        }
        NormKind::Inf => {
            for i in 0..m {
                g_rows.push(arow(i, 1.0));
                h.push(y[i] + eps);
                g_rows.push(arow(i, -1.0));
                h.push(eps - y[i]);
            }
        }
        NormKind::One => {
            if m > L1_BALL_ROW_CAP {
                return Err(Error::TooLarge { what: "ℓ1 residual ball rows", needed: 1u128 << m, cap: 1u128 << L1_BALL_ROW_CAP });
            }
            for mask in 0..(1usize << m) {
                let sg: Vec<f64> = (0..m).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                let row: Vec<f64> = (0..n).map(|j| (0..m).map(|i| sg[i] * a.a()[(i, j)]).sum()).collect();
                g_rows.push(row);
                h.push(eps + (0..m).map(|i| sg[i] * y[i]).sum::<f64>());
            }
        }
        NormKind::Two => {
            let mm = sol.polytope_matrix().ok_or(Error::MissingExtras("polytope relaxation"))?;
            let mta = mm.transpose() * a.a();
            let mty = mm.transpose() * y;
            for i in 0..mm.ncols() {
                g_rows.push(mta.row(i).iter().copied().collect());
                h.push(mty[i] + eps);
            }
        }
    }
    let build = |rows: &[Vec<f64>]| DenseMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    Polyhedron::from_parts(build(&g_rows), Vector::from_vec(h), build(&e_rows), Vector::from_vec(f))
}

/// Euclidean distance from `x` to the optimal solution set of the given problem.
/// [`solution_set`] with its inequality rows relaxed by `1e-10 (1 + value)`,
/// since the face is read off floating-point data.
pub fn relaxed_solution_set(sol: &RecoverySolution, a: &DesignMatrix, y: &Vector, eps: f64) -> Result<Polyhedron> {
    let set = solution_set(sol, a, y, eps)?;
    let slack = 1e-10 * (1.0 + sol.value);
    Polyhedron::from_parts(set.g.clone(), set.h.add_scalar(slack), set.e.clone(), set.f.clone())
}

pub fn solution_set_distance(x: &Vector, model: &MeasurementModel, a: &DesignMatrix, l2: &L2Options) -> Result<SolutionSetDistance> {
    if x.len() != a.cols() {
        return Err(Error::DimMismatch("point dimension differs from the number of columns of A".into()));
    }
    let sol = solve(a, model, l2)?;
    let y = Vector::from_column_slice(&model.y);
    let set = relaxed_solution_set(&sol, a, &y, model.epsilon)?;
    let p = geometry::project(x, &set)?;
    Ok(SolutionSetDistance { distance: p.dist, nearest: p.point, value: sol.value, relaxed: sol.kind == NormKind::Two })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn dm(m: usize, n: usize, e: &[f64]) -> DesignMatrix {
        DesignMatrix::new(DenseMatrix::from_row_slice(m, n, e)).unwrap()
    }

    fn gaussian(m: usize, n: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DesignMatrix::new(DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))).unwrap()
    }

    fn assert_solution(s: &RecoverySolution) {
        assert!(s.kkt_residual_linf <= 1e-7, "kkt {}", s.kkt_residual_linf);
        assert!(s.duality_gap() <= 1e-8 * (1.0 + s.value.abs()), "gap {}", s.duality_gap());
        assert!((s.value - linops::norm1(s.x_star.as_slice())).abs() <= 1e-8);
        let t = s.point.t();
        for i in 0..t.len() {
            assert!((t[i] - s.x_star[i].abs()).abs() <= 1e-8);
        }
    }

    #[test]
    fn bp_examples() {
        let s = bp_solve(&dm(1, 2, &[1.0, 1.0]), &v(&[2.0])).unwrap();
        assert_solution(&s);
        assert!((s.value - 2.0).abs() < 1e-12);
        assert!((s.x_star[0] + s.x_star[1] - 2.0).abs() < 1e-12 && s.x_star.iter().all(|&z| z >= -1e-12));
        let a = dm(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let s = bp_solve(&a, &v(&[3.0, -4.0])).unwrap();
        assert_solution(&s);
        assert!((s.x_star - v(&[3.0, -4.0, 0.0])).amax() < 1e-12 && (s.value - 7.0).abs() < 1e-12);
        let s = bp_solve(&a, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn linf_examples() {
        let a = dm(1, 2, &[1.0, 1.0]);
        let s = linf_solve(&a, &v(&[2.0]), 0.5).unwrap();
        assert_solution(&s);
        assert!((s.value - 1.5).abs() < 1e-12);
        let s = linf_solve(&a, &v(&[2.0]), 2.0).unwrap();
        assert!(s.x_star.amax() < 1e-12 && s.value.abs() < 1e-12);
        assert!(matches!(linf_solve(&a, &v(&[2.0]), 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn l1con_examples() {
        let s = l1con_solve(&dm(1, 2, &[1.0, 1.0]), &v(&[2.0]), 0.5).unwrap();
        assert_solution(&s);
        assert!((s.value - 1.5).abs() < 1e-12);
        let a = dm(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let s = l1con_solve(&a, &v(&[1.0, 1.0]), 1.0).unwrap();
        assert_solution(&s);
        assert!((s.value - 1.0).abs() < 1e-12);
        let r = &(a.a() * &s.x_star) - v(&[1.0, 1.0]);
        assert!((linops::norm1(r.as_slice()) - 1.0).abs() < 1e-9);
        let s = l1con_solve(&a, &v(&[1.0, 1.0]), 2.0).unwrap();
        assert!(s.x_star.amax() < 1e-12);
    }

    #[test]
    fn l2_ladder_brackets_fine_oracle() {
        let a = dm(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let y = v(&[2.0, 2.0]);
        let opts = L2Options { run_full: true, ..L2Options::default() };
        let s = l2con_solve(&a, &y, 0.1, &opts).unwrap();
        assert_solution(&s);
        let rel = s.relaxation.as_ref().unwrap();
        assert_eq!(rel.ladder.len(), 5);
        for w in rel.ladder.windows(2) {
            assert!(w[1].value >= w[0].value - 1e-9);
        }
        assert!((a.a() * &rel.restored - &y).norm() <= 0.1 + 1e-12);
        let fine = l2con_solve(&a, &y, 0.1, &L2Options { schedule: vec![512], ..L2Options::default() }).unwrap();
        assert!(rel.interval.0 <= fine.value + 1e-9 && fine.value <= rel.interval.1 + 1e-9);
        // x = (0,0,2) - ε direction: true optimum 2 − ε/√2.
        let truth = 2.0 - 0.1 / 2f64.sqrt();
        assert!(rel.interval.0 <= truth + 1e-9 && truth <= rel.interval.1 + 1e-9);
        let big = l2con_solve(&a, &y, 3.0, &L2Options::default()).unwrap();
        assert!(big.x_star.amax() < 1e-12);
    }

    #[test]
    fn eps_contract() {
        assert!(MeasurementModel::new(vec![1.0], 0.0, NormKind::Two).is_err());
        assert!(MeasurementModel::new(vec![1.0], 0.1, NormKind::Eq).is_err());
        assert!(MeasurementModel::new(vec![1.0], 0.1, NormKind::One).is_ok());
        assert_eq!("inf".parse::<NormKind>().unwrap(), NormKind::Inf);
    }

    #[test]
    fn kkt_residual_sparsity_off_feasible() {
        // t = |x|, dual-feasible (u,v,w) built from a certificate, but Ax ≠ y.
        let a = dm(1, 2, &[1.0, 0.5]);
        let x = v(&[1.0, 0.0]);
        let y = v(&[1.5]);
        let w = v(&[1.0]);
        let eta = a.a().transpose() * &w;
        let u = eta.map(|e| (e.abs() + e) / 2.0);
        let vv = eta.map(|e| (e.abs() - e) / 2.0);
        let p = KktPoint::Eq { x: x.clone(), t: x.abs(), u, v: vv, w };
        let r = kkt_residual(&p, a.a(), &y, 0.0, None).unwrap();
        let nz: Vec<usize> = (0..r.len()).filter(|&i| r[i].abs() > 1e-12).collect();
        // Layout: 2 + 2 + 2 rows of positive parts, then Ax−y at 6, Aᵀw−u+v at 7..9, eᵀt−yᵀw at 9.
        assert_eq!(nz, vec![6, 9]);
        let blocks = residual_blocks(NormKind::Eq, 1, 2, 0);
        assert_eq!(blocks.iter().map(|b| b.1).sum::<usize>(), r.len());
        assert_eq!(blocks[3].0, "Ax-y");
    }

    #[test]
    fn kkt_residual_locality_and_dims() {
        let a = gaussian(2, 4, 1);
        let y = a.a() * v(&[1.0, 0.0, -1.0, 0.0]);
        let s = bp_solve(&a, &y).unwrap();
        let base = kkt_residual(&s.point, a.a(), &y, 0.0, None).unwrap();
        assert!(base.amax() < 1e-9);
        let KktPoint::Eq { x, t, u, v: vv, w } = s.point.clone() else { panic!() };
        let mut t2 = t.clone();
        let idx = (0..4).find(|&i| t[i] == 0.0).unwrap();
        t2[idx] = -1e-3;
        let p = KktPoint::Eq { x: x.clone(), t: t2, u: u.clone(), v: vv.clone(), w: w.clone() };
        let r = kkt_residual(&p, a.a(), &y, 0.0, None).unwrap();
        // Within the sign block (u⁻, v⁻, t⁻) exactly one entry lights up.
        let signs = r.len() - 12..r.len();
        let lit: Vec<usize> = signs.filter(|&i| r[i] != 0.0).collect();
        assert_eq!(lit, vec![r.len() - 4 + idx]);
        let bad = KktPoint::Eq { x: v(&[0.0]), t: v(&[0.0]), u, v: vv, w };
        assert!(matches!(kkt_residual(&bad, a.a(), &y, 0.0, None), Err(Error::DimMismatch(_))));
        let two = KktPoint::Two { x: s.x_star.clone(), t: s.x_star.abs(), v1: v(&[0.0; 4]), v2: v(&[0.0; 4]), v3: v(&[0.0; 4]) };
        assert_eq!(kkt_residual(&two, a.a(), &y, 0.1, None).unwrap_err(), Error::MissingExtras("polytope matrix"));
    }

    #[test]
    fn kkt_vector_round_trip() {
        let a = gaussian(3, 5, 2);
        let y = v(&[1.0, -0.5, 0.3]);
        let s = l1con_solve(&a, &y, 0.2).unwrap();
        let z = s.point.to_vector();
        let back = KktPoint::from_vector(NormKind::One, z.as_slice(), 3, 5, 0).unwrap();
        assert_eq!(back, s.point);
    }

    #[test]
    fn distance_examples() {
        let a = dm(1, 2, &[1.0, 1.0]);
        let model = MeasurementModel::new(vec![2.0], 0.0, NormKind::Eq).unwrap();
        let d = solution_set_distance(&v(&[3.0, -1.0]), &model, &a, &L2Options::default()).unwrap();
        assert!((d.distance - 2f64.sqrt()).abs() < 1e-9, "{}", d.distance);
        assert!((d.nearest - v(&[2.0, 0.0])).norm() < 1e-9);
        let d = solution_set_distance(&v(&[1.0, 1.0]), &model, &a, &L2Options::default()).unwrap();
        assert!(d.distance < 1e-9);
        let model = MeasurementModel::new(vec![2.0], 0.5, NormKind::Inf).unwrap();
        let d = solution_set_distance(&v(&[0.75, 0.75]), &model, &a, &L2Options::default()).unwrap();
        assert!(d.distance < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn duality_and_abs_t(seed in 0u64..10_000, eps in 0.05f64..0.5) {
            let a = gaussian(3, 6, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5);
            let y = Vector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            for s in [bp_solve(&a, &y).unwrap(), linf_solve(&a, &y, eps).unwrap(), l1con_solve(&a, &y, eps).unwrap()] {
                prop_assert!(s.kkt_residual_linf <= 1e-7);
                prop_assert!(s.duality_gap() <= 1e-8 * (1.0 + s.value.abs()));
                prop_assert!((s.value - linops::norm1(s.x_star.as_slice())).abs() <= 1e-8);
            }
        }

        #[test]
        fn monotone_in_eps(seed in 0u64..10_000, e1 in 0.05f64..0.4, de in 0.0f64..0.4) {
            let a = gaussian(3, 6, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a);
            let y = Vector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            let e2 = e1 + de;
            prop_assert!(linf_solve(&a, &y, e2).unwrap().value <= linf_solve(&a, &y, e1).unwrap().value + 1e-9);
            prop_assert!(l1con_solve(&a, &y, e2).unwrap().value <= l1con_solve(&a, &y, e1).unwrap().value + 1e-9);
            let o = L2Options { schedule: vec![16], ..L2Options::default() };
            prop_assert!(l2con_solve(&a, &y, e2, &o).unwrap().value <= l2con_solve(&a, &y, e1, &o).unwrap().value + 1e-9);
        }

        #[test]
        fn norm_ordering(seed in 0u64..10_000, eps in 0.05f64..0.5) {
            let a = gaussian(3, 6, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x33);
            let y = Vector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            let inf = linf_solve(&a, &y, eps).unwrap().value;
            let two = l2con_solve(&a, &y, eps, &L2Options { schedule: vec![16, 32], ..L2Options::default() }).unwrap();
            let one = l1con_solve(&a, &y, eps).unwrap().value;
            let (lo, hi) = two.relaxation.unwrap().interval;
            prop_assert!(inf <= lo + 1e-9);
            prop_assert!(lo <= hi + 1e-9);
            prop_assert!(lo <= one + 1e-9);
        }
    }
}
