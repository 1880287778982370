//! KKT systems as explicit linear systems, Robinson's constant, empirical
//! Hoffman constants, the theorem right-hand sides, the dual constructions of
//! the stability proofs, and stability experiments built from them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::certify::{self, SupportPair};
use crate::error::{Error, Result};
use crate::geometry::{self, Polyhedron, SpherePolytope};
use crate::linops::{self, DenseMatrix, DesignMatrix, Vector};
use crate::lp::{self, Feasibility, LpBuilder, LpStatus};
use crate::solvers::{self, KktPoint, L2Options, MeasurementModel, NormKind, RecoverySolution};

/// A named contiguous range of rows or columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct KktLayout {
    pub columns: Vec<Block>,
    pub ineq_rows: Vec<Block>,
    pub eq_rows: Vec<Block>,
}

impl KktLayout {
    pub fn column(&self, name: &str) -> Option<&Block> {
        self.columns.iter().find(|b| b.name == name)
    }

    pub fn ineq_block(&self, name: &str) -> Option<&Block> {
        self.ineq_rows.iter().find(|b| b.name == name)
    }

    pub fn eq_block(&self, name: &str) -> Option<&Block> {
        self.eq_rows.iter().find(|b| b.name == name)
    }
}

/// `{z : M_ineq z ≤ b_ineq, M_eq z = b_eq}` whose solutions are exactly the
/// primal-dual optimal tuples of one recovery problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSystem {
    pub kind: NormKind,
    pub m_ineq: DenseMatrix,
    pub b_ineq: Vector,
    pub m_eq: DenseMatrix,
    pub b_eq: Vector,
    pub layout: KktLayout,
}

impl KktSystem {
    pub fn dim(&self) -> usize {
        self.m_ineq.ncols()
    }

    pub fn polyhedron(&self) -> Polyhedron {
        Polyhedron { g: self.m_ineq.clone(), h: self.b_ineq.clone(), e: self.m_eq.clone(), f: self.b_eq.clone() }
    }

    /// `[(M_ineq z − b)⁺; M_eq z − d]`.
    pub fn residual(&self, z: &Vector) -> Result<Vector> {
        if z.len() != self.dim() {
            return Err(Error::DimMismatch(format!("tuple of length {} for a system in R^{}", z.len(), self.dim())));
        }
        Ok(self.polyhedron().residual_stack(z))
    }

    pub fn membership(&self, point: &KktPoint) -> Result<f64> {
        if point.kind() != self.kind {
            return Err(Error::DimMismatch(format!("{} tuple against a {} system", point.kind(), self.kind)));
        }
        Ok(self.residual(&point.to_vector())?.amax())
    }
}

type Term<'a> = (&'a str, DenseMatrix);

struct Assembler {
    cols: Vec<Block>,
    width: usize,
    ineq: Vec<(Vec<Term<'static>>, Vector, &'static str)>,
    eq: Vec<(Vec<Term<'static>>, Vector, &'static str)>,
}

impl Assembler {
    fn new(cols: &[(&str, usize)]) -> Self {
        let mut blocks = Vec::new();
        let mut off = 0;
        for &(name, len) in cols {
            blocks.push(Block { name: name.to_string(), start: off, len });
            off += len;
        }
        Self { cols: blocks, width: off, ineq: Vec::new(), eq: Vec::new() }
    }

    fn ineq(&mut self, name: &'static str, terms: Vec<Term<'static>>, rhs: Vector) {
        self.ineq.push((terms, rhs, name));
    }

    fn eq(&mut self, name: &'static str, terms: Vec<Term<'static>>, rhs: Vector) {
        self.eq.push((terms, rhs, name));
    }

    fn fill(&self, rows: &[(Vec<Term<'static>>, Vector, &'static str)]) -> (DenseMatrix, Vector, Vec<Block>) {
        let total: usize = rows.iter().map(|r| r.1.len()).sum();
        let mut mat = DenseMatrix::zeros(total, self.width);
        let mut rhs = Vector::zeros(total);
        let mut blocks = Vec::new();
        let mut r0 = 0;
        for (terms, b, name) in rows {
            for (col, coef) in terms {
                let c = self.cols.iter().find(|c| c.name == *col).expect("known column block");
                debug_assert_eq!((coef.nrows(), coef.ncols()), (b.len(), c.len));
                mat.view_mut((r0, c.start), (b.len(), c.len)).copy_from(coef);
            }
            rhs.rows_mut(r0, b.len()).copy_from(b);
            blocks.push(Block { name: name.to_string(), start: r0, len: b.len() });
            r0 += b.len();
        }
        (mat, rhs, blocks)
    }

    fn finish(self, kind: NormKind) -> KktSystem {
        let (m_ineq, b_ineq, ineq_rows) = self.fill(&self.ineq);
        let (m_eq, b_eq, eq_rows) = self.fill(&self.eq);
        KktSystem { kind, m_ineq, b_ineq, m_eq, b_eq, layout: KktLayout { columns: self.cols, ineq_rows, eq_rows } }
    }
}

fn eye(n: usize, s: f64) -> DenseMatrix {
    DenseMatrix::identity(n, n) * s
}

fn ones_row(n: usize, s: f64) -> DenseMatrix {
    DenseMatrix::from_element(1, n, s)
}

fn row_of(v: &Vector, s: f64) -> DenseMatrix {
    DenseMatrix::from_fn(1, v.len(), |_, j| s * v[j])
}

fn zeros(n: usize) -> Vector {
    Vector::zeros(n)
}

fn ones(n: usize) -> Vector {
    Vector::from_element(n, 1.0)
}

/// Builds the KKT system of the given kind in block order.
///
/// Layouts (inequality blocks, then equality blocks):
/// - `Eq`, `z = (x,t,u,v,w)`: `x−t ≤ 0, −x−t ≤ 0, u+v ≤ e, −u ≤ 0, −v ≤ 0, −t ≤ 0`;
///   `Ax = y, −u+v+Aᵀw = 0, −eᵀt+yᵀw = 0`.
/// - `Inf`, `z = (x,t,u,v,w,w′)`: `x−t ≤ 0, −x−t ≤ 0, Ax ≤ y+εe, −Ax ≤ εe−y, −t ≤ 0,
///   u+v ≤ e, −w ≤ 0, −w′ ≤ 0, −u ≤ 0, −v ≤ 0`; `−u+v+Aᵀw−Aᵀw′ = 0,
///   eᵀt−(y−εe)ᵀw+(y+εe)ᵀw′ = 0`.
/// - `One`, `z = (x,t,r,v1,…,v5)`: `x−t ≤ 0, −x−t ≤ 0, Ax−r ≤ y, −Ax−r ≤ −y, eᵀr ≤ ε,
///   −r ≤ 0, −t ≤ 0, v3+v4−v5e ≤ 0, v1+v2 ≤ e, −v1, …, −v5 ≤ 0`;
///   `Aᵀ(v3−v4)+v1−v2 = 0, eᵀt+yᵀ(v3−v4)+εv5 = 0`.
/// - `Two`, `z = (x,t,v1,v2,v3)`: `x−t ≤ 0, −x−t ≤ 0, MᵀAx ≤ Mᵀy+εe, v1+v2 ≤ e,
///   −t ≤ 0, −v1 ≤ 0, −v2 ≤ 0, −v3 ≤ 0`; `v1−v2+AᵀMv3 = 0, eᵀt+(εe+Mᵀy)ᵀv3 = 0`.
pub fn build_kkt(kind: NormKind, a: &DenseMatrix, y: &Vector, eps: f64, polytope: Option<&SpherePolytope>) -> Result<KktSystem> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(Error::DimMismatch(format!("y has length {}, A has {m} rows", y.len())));
    }
    if (kind == NormKind::Two) != polytope.is_some() {
        return Err(Error::DimMismatch("a polytope is required for kind `two` and only for it".into()));
    }
    let at = a.transpose();
    let sys = match kind {
        NormKind::Eq => {
            let mut s = Assembler::new(&[("x", n), ("t", n), ("u", n), ("v", n), ("w", m)]);
            s.ineq("x-t", vec![("x", eye(n, 1.0)), ("t", eye(n, -1.0))], zeros(n));
            s.ineq("-x-t", vec![("x", eye(n, -1.0)), ("t", eye(n, -1.0))], zeros(n));
            s.ineq("u+v", vec![("u", eye(n, 1.0)), ("v", eye(n, 1.0))], ones(n));
            s.ineq("-u", vec![("u", eye(n, -1.0))], zeros(n));
            s.ineq("-v", vec![("v", eye(n, -1.0))], zeros(n));
            s.ineq("-t", vec![("t", eye(n, -1.0))], zeros(n));
            s.eq("Ax", vec![("x", a.clone())], y.clone());
            s.eq("-u+v+ATw", vec![("u", eye(n, -1.0)), ("v", eye(n, 1.0)), ("w", at)], zeros(n));
            s.eq("objective", vec![("t", ones_row(n, -1.0)), ("w", row_of(y, 1.0))], zeros(1));
            s.finish(kind)
        }
        NormKind::Inf => {
            let mut s = Assembler::new(&[("x", n), ("t", n), ("u", n), ("v", n), ("w", m), ("w'", m)]);
            s.ineq("x-t", vec![("x", eye(n, 1.0)), ("t", eye(n, -1.0))], zeros(n));
            s.ineq("-x-t", vec![("x", eye(n, -1.0)), ("t", eye(n, -1.0))], zeros(n));
            s.ineq("Ax", vec![("x", a.clone())], y.add_scalar(eps));
            s.ineq("-Ax", vec![("x", -a)], (-y).add_scalar(eps));
            s.ineq("-t", vec![("t", eye(n, -1.0))], zeros(n));
            s.ineq("u+v", vec![("u", eye(n, 1.0)), ("v", eye(n, 1.0))], ones(n));
            s.ineq("-w", vec![("w", eye(m, -1.0))], zeros(m));
            s.ineq("-w'", vec![("w'", eye(m, -1.0))], zeros(m));
            s.ineq("-u", vec![("u", eye(n, -1.0))], zeros(n));
            s.ineq("-v", vec![("v", eye(n, -1.0))], zeros(n));
            s.eq("-u+v+ATw-ATw'", vec![("u", eye(n, -1.0)), ("v", eye(n, 1.0)), ("w", at.clone()), ("w'", -at)], zeros(n));
            s.eq(
                "objective",
                vec![("t", ones_row(n, 1.0)), ("w", row_of(&y.add_scalar(-eps), -1.0)), ("w'", row_of(&y.add_scalar(eps), 1.0))],
                zeros(1),
            );
            s.finish(kind)
        }
        NormKind::One => {
            let mut s = Assembler::new(&[("x", n), ("t", n), ("r", m), ("v1", n), ("v2", n), ("v3", m), ("v4", m), ("v5", 1)]);
            s.ineq("x-t", vec![("x", eye(n, 1.0)), ("t", eye(n, -1.0))], zeros(n));
            s.ineq("-x-t", vec![("x", eye(n, -1.0)), ("t", eye(n, -1.0))], zeros(n));
            s.ineq("Ax-r", vec![("x", a.clone()), ("r", eye(m, -1.0))], y.clone());
            s.ineq("-Ax-r", vec![("x", -a), ("r", eye(m, -1.0))], -y);
            s.ineq("eTr", vec![("r", ones_row(m, 1.0))], Vector::from_element(1, eps));
            s.ineq("-r", vec![("r", eye(m, -1.0))], zeros(m));
            s.ineq("-t", vec![("t", eye(n, -1.0))], zeros(n));
            s.ineq("v3+v4-v5e", vec![("v3", eye(m, 1.0)), ("v4", eye(m, 1.0)), ("v5", DenseMatrix::from_element(m, 1, -1.0))], zeros(m));
            s.ineq("v1+v2", vec![("v1", eye(n, 1.0)), ("v2", eye(n, 1.0))], ones(n));
            s.ineq("-v1", vec![("v1", eye(n, -1.0))], zeros(n));
            s.ineq("-v2", vec![("v2", eye(n, -1.0))], zeros(n));
            s.ineq("-v3", vec![("v3", eye(m, -1.0))], zeros(m));
            s.ineq("-v4", vec![("v4", eye(m, -1.0))], zeros(m));
            s.ineq("-v5", vec![("v5", eye(1, -1.0))], zeros(1));
            s.eq("AT(v3-v4)+v1-v2", vec![("v3", at.clone()), ("v4", -at), ("v1", eye(n, 1.0)), ("v2", eye(n, -1.0))], zeros(n));
            s.eq(
                "objective",
                vec![("t", ones_row(n, 1.0)), ("v3", row_of(y, 1.0)), ("v4", row_of(y, -1.0)), ("v5", DenseMatrix::from_element(1, 1, eps))],
                zeros(1),
            );
            s.finish(kind)
        }
        NormKind::Two => {
            let p = polytope.expect("checked above");
            if p.dim != m {
                return Err(Error::DimMismatch(format!("polytope in R^{} but A has {m} rows", p.dim)));
            }
            let mm = p.matrix();
            let nn = mm.ncols();
            let mta = mm.transpose() * a;
            let mty = mm.transpose() * y;
            let mut s = Assembler::new(&[("x", n), ("t", n), ("v1", n), ("v2", n), ("v3", nn)]);
            s.ineq("x-t", vec![("x", eye(n, 1.0)), ("t", eye(n, -1.0))], zeros(n));
            s.ineq("-x-t", vec![("x", eye(n, -1.0)), ("t", eye(n, -1.0))], zeros(n));
            s.ineq("MTAx", vec![("x", mta.clone())], mty.add_scalar(eps));
            s.ineq("v1+v2", vec![("v1", eye(n, 1.0)), ("v2", eye(n, 1.0))], ones(n));
            s.ineq("-t", vec![("t", eye(n, -1.0))], zeros(n));
            s.ineq("-v1", vec![("v1", eye(n, -1.0))], zeros(n));
            s.ineq("-v2", vec![("v2", eye(n, -1.0))], zeros(n));
            s.ineq("-v3", vec![("v3", eye(nn, -1.0))], zeros(nn));
            s.eq("v1-v2+ATMv3", vec![("v1", eye(n, 1.0)), ("v2", eye(n, -1.0)), ("v3", mta.transpose())], zeros(n));
            s.eq("objective", vec![("t", ones_row(n, 1.0)), ("v3", row_of(&mty.add_scalar(eps), 1.0))], zeros(1));
            s.finish(kind)
        }
    };
    Ok(sys)
}

/// How a [`RobinsonEstimate`] value relates to the true constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobinsonSemantics {
    /// Vertex enumeration of the dual description; the exact value.
    ExactTiny,
    /// Running maximum over sampled right-hand sides; a lower bound.
    MonteCarloLowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobinsonEstimate {
    pub value: f64,
    pub semantics: RobinsonSemantics,
    pub samples: usize,
    pub seed: u64,
    /// Set when no sampled right-hand side was feasible.
    pub no_feasible_samples: bool,
}

/// Largest number of candidate vertices examined by the exact path.
pub const ROBINSON_EXACT_CAP: u128 = 200_000;

/// Inner systems `(P_N, Q)` of Robinson's constant for `M′` (`p × q`) and `M″` (`l × q`):
/// `P_N = [I_N 0; −I 0]`, `Q = [M′; M″]ᵀ`.
fn robinson_parts(m1: &DenseMatrix, m2: &DenseMatrix, subset: &[usize]) -> (DenseMatrix, DenseMatrix) {
    let p = m1.nrows();
    let l = m2.nrows();
    let q = m1.ncols().max(m2.ncols());
    let r = p + l;
    let mut pm = DenseMatrix::zeros(subset.len() + p, r);
    for (row, &i) in subset.iter().enumerate() {
        pm[(row, i)] = 1.0;
    }
    for i in 0..p {
        pm[(subset.len() + i, i)] = -1.0;
    }
    let mut qm = DenseMatrix::zeros(q, r);
    for i in 0..p {
        for j in 0..q {
            qm[(j, i)] = m1[(i, j)];
        }
    }
    for i in 0..l {
        for j in 0..q {
            qm[(j, p + i)] = m2[(i, j)];
        }
    }
    (pm, qm)
}

fn orthonormal_range(q: &DenseMatrix) -> DenseMatrix {
    let svd = q.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax.max(1e-300)).collect();
    DenseMatrix::from_fn(q.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// Pseudo-inverse least squares via SVD.
fn lstsq(k: &DenseMatrix, c: &Vector) -> Vector {
    if k.ncols() == 0 {
        return Vector::zeros(0);
    }
    let svd = k.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(c, 1e-12 * smax.max(1e-300)).unwrap_or_else(|_| Vector::zeros(k.ncols()))
}

/// Projection onto the cone `F = {(Pz + s, Qz) : s ≥ 0}` by enumerating which
/// slack entries are free.
fn project_onto_rhs_cone(pm: &DenseMatrix, qm: &DenseMatrix, c: &Vector) -> Result<Vector> {
    let (nb, r) = pm.shape();
    let nd = qm.nrows();
    let dim = nb + nd;
    let tol = 1e-10 * (1.0 + c.amax());
    for size in 0..=nb {
        for free in certify::combinations(nb, size) {
            let mut k = DenseMatrix::zeros(dim, r + size);
            k.view_mut((0, 0), (nb, r)).copy_from(pm);
            k.view_mut((nb, 0), (nd, r)).copy_from(qm);
            for (col, &i) in free.iter().enumerate() {
                k[(i, r + col)] = 1.0;
            }
            let sol = lstsq(&k, c);
            if sol.iter().skip(r).any(|&v| v < -tol) {
                continue;
            }
            let fitted = &k * &sol;
            let resid = &fitted - c;
            let fixed_ok = (0..nb).filter(|i| !free.contains(i)).all(|i| resid[i] >= -tol);
            if fixed_ok {
                return Ok(fitted);
            }
        }
    }
    Err(Error::NumericalFailure("cone projection found no KKT point".into()))
}

fn solve_square(m: &DenseMatrix, b: &Vector) -> Option<Vector> {
    let lu = m.clone().full_piv_lu();
    let diag = lu.u().diagonal();
    let biggest = diag.amax();
    if diag.iter().any(|d| d.abs() <= 1e-11 * biggest.max(1e-300)) {
        return None;
    }
    lu.solve(b)
}

fn exact_enumeration_size(m1: &DenseMatrix, m2: &DenseMatrix) -> u128 {
    let p = m1.nrows();
    let r = p + m2.nrows();
    if r > 20 || p > 16 {
        return u128::MAX;
    }
    let mut total = 0u128;
    for size in 0..=p {
        let (pm, qm) = robinson_parts(m1, m2, &(0..size).collect::<Vec<_>>());
        let d = pm.nrows() + orthonormal_range(&qm).ncols();
        let rows = pm.nrows() + (1usize << r);
        total = total.saturating_add(certify::binomial(p, size).saturating_mul(certify::binomial(rows, d)));
    }
    total
}

/// `μ_{∞,2}(P, Q)` as the maximum of `‖Π_F(−α, β)‖₂` over the vertices of
/// `{α ≥ 0, ‖Qᵀβ − Pᵀα‖₁ ≤ 1, β ∈ range(Q)}` (LP duality for the inner problem,
/// then the support function of `F ∩ B`).
fn mu_exact(pm: &DenseMatrix, qm: &DenseMatrix) -> Result<f64> {
    let nb = pm.nrows();
    let r = pm.ncols();
    let basis = orthonormal_range(qm);
    let rq = basis.ncols();
    let d = nb + rq;
    if d == 0 {
        return Ok(0.0);
    }
    // Rows over (α, γ) with β = Uγ: −α ≤ 0, then σᵀ(QᵀUγ − Pᵀα) ≤ 1.
    let qtu = qm.transpose() * &basis;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..nb {
        let mut row = vec![0.0; d];
        row[i] = -1.0;
        rows.push(row);
        rhs.push(0.0);
    }
    for mask in 0..(1usize << r) {
        let sg: Vec<f64> = (0..r).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let mut row = vec![0.0; d];
        for i in 0..nb {
            row[i] = -(0..r).map(|j| sg[j] * pm[(i, j)]).sum::<f64>();
        }
        for g in 0..rq {
            row[nb + g] = (0..r).map(|j| sg[j] * qtu[(j, g)]).sum::<f64>();
        }
        rows.push(row);
        rhs.push(1.0);
    }
    let gmat = DenseMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let hvec = Vector::from_vec(rhs);
    let mut best = 0.0_f64;
    for tight in certify::combinations(rows.len(), d) {
        let sub = DenseMatrix::from_fn(d, d, |i, j| gmat[(tight[i], j)]);
        let sb = Vector::from_fn(d, |i, _| hvec[tight[i]]);
        let Some(vtx) = solve_square(&sub, &sb) else { continue };
        if (&gmat * &vtx - &hvec).iter().any(|&v| v > 1e-9) {
            continue;
        }
        let alpha = vtx.rows(0, nb).into_owned();
        let beta = &basis * vtx.rows(nb, rq);
        let c = Vector::from_iterator(nb + beta.len(), alpha.iter().map(|v| -v).chain(beta.iter().copied()));
        let proj = project_onto_rhs_cone(pm, qm, &c)?;
        best = best.max(proj.norm());
    }
    Ok(best)
}

/// Exact `σ_{∞,2}(M′, M″)` for tiny systems.
pub fn robinson_exact(m_ineq: &DenseMatrix, m_eq: &DenseMatrix) -> Result<f64> {
    let needed = exact_enumeration_size(m_ineq, m_eq);
    if needed > ROBINSON_EXACT_CAP {
        return Err(Error::TooLarge { what: "Robinson vertex enumeration", needed, cap: ROBINSON_EXACT_CAP });
    }
    let p = m_ineq.nrows();
    let mut best = 0.0_f64;
    for size in 0..=p {
        for subset in certify::combinations(p, size) {
            let (pm, qm) = robinson_parts(m_ineq, m_eq, &subset);
            best = best.max(mu_exact(&pm, &qm)?);
        }
    }
    Ok(best)
}

/// `min ‖z‖∞ s.t. Pz ≤ b, Qz = d`; `None` if infeasible.
fn inner_value(pm: &DenseMatrix, qm: &DenseMatrix, b: &Vector, d: &Vector) -> Result<Option<f64>> {
    let r = pm.ncols();
    let tau = r;
    let mut lp = LpBuilder::new(r + 1);
    lp.cost(tau, 1.0).bounds(tau, 0.0, f64::INFINITY);
    for j in 0..r {
        lp.ineq(vec![(j, 1.0), (tau, -1.0)], 0.0);
        lp.ineq(vec![(j, -1.0), (tau, -1.0)], 0.0);
    }
    for i in 0..pm.nrows() {
        lp.ineq((0..r).map(|j| (j, pm[(i, j)])).collect(), b[i]);
    }
    for i in 0..qm.nrows() {
        lp.eq((0..r).map(|j| (j, qm[(i, j)])).collect(), d[i]);
    }
    let sol = lp::solve(&lp.build())?;
    Ok(match sol.status {
        LpStatus::Optimal => Some(sol.value),
        _ => None,
    })
}

/// Running maximum of the inner value over sampled unit right-hand sides in `F`
/// with random subsets `N`; a lower bound on `σ_{∞,2}`.
pub fn robinson_monte_carlo(m_ineq: &DenseMatrix, m_eq: &DenseMatrix, samples: usize, seed: u64) -> Result<RobinsonEstimate> {
    let p = m_ineq.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    let mut feasible = 0usize;
    for _ in 0..samples {
        let subset: Vec<usize> = (0..p).filter(|_| rng.random_bool(0.5)).collect();
        let (pm, qm) = robinson_parts(m_ineq, m_eq, &subset);
        let r = pm.ncols();
        let z = Vector::from_fn(r, |_, _| StandardNormal.sample(&mut rng));
        let s = Vector::from_fn(pm.nrows(), |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            if rng.random_bool(0.5) { 0.0 } else { g.abs() }
        });
        let b = &pm * &z + s;
        let d = &qm * &z;
        let norm = (b.norm_squared() + d.norm_squared()).sqrt();
        if norm <= 1e-12 {
            continue;
        }
        if let Some(v) = inner_value(&pm, &qm, &(b / norm), &(d / norm))? {
            feasible += 1;
            best = best.max(v);
        }
    }
    Ok(RobinsonEstimate { value: best, semantics: RobinsonSemantics::MonteCarloLowerBound, samples, seed, no_feasible_samples: feasible == 0 })
}

/// Exact when the vertex enumeration fits [`ROBINSON_EXACT_CAP`], sampled otherwise.
pub fn robinson_estimate(m_ineq: &DenseMatrix, m_eq: &DenseMatrix, samples: usize, seed: u64) -> Result<RobinsonEstimate> {
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be at least 1".into()));
    }
    if m_ineq.nrows() > 0 && m_eq.nrows() > 0 && m_ineq.ncols() != m_eq.ncols() {
        return Err(Error::DimMismatch("M′ and M″ have different column counts".into()));
    }
    match robinson_exact(m_ineq, m_eq) {
        Ok(value) => Ok(RobinsonEstimate { value, semantics: RobinsonSemantics::ExactTiny, samples, seed, no_feasible_samples: false }),
        Err(Error::TooLarge { .. }) => robinson_monte_carlo(m_ineq, m_eq, samples, seed),
        Err(e) => Err(e),
    }
}

pub fn robinson_for_system(sys: &KktSystem, samples: usize, seed: u64) -> Result<RobinsonEstimate> {
    robinson_estimate(&sys.m_ineq, &sys.m_eq, samples, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoffmanEmpirical {
    /// `max dist(z, F) / ‖[(Gz − h)⁺; Ez − f]‖₁` over the sampled points.
    pub gamma: f64,
    pub worst_point: Option<Vec<f64>>,
    /// Points with a residual above the cutoff.
    pub evaluated: usize,
}

pub const HOFFMAN_SCALES: [f64; 3] = [0.1, 1.0, 10.0];

pub fn hoffman_ratio(f: &Polyhedron, z: &Vector) -> Result<Option<(f64, f64, f64)>> {
    let residual: f64 = f.residual_stack(z).iter().map(|v| v.abs()).sum();
    if residual <= 1e-12 {
        return Ok(None);
    }
    let dist = geometry::project(z, f)?.dist;
    Ok(Some((dist / residual, dist, residual)))
}

/// Samples Gaussian offsets at each of [`HOFFMAN_SCALES`] around feasible
/// points of `F` and returns the largest distance-to-residual ratio.
pub fn hoffman_empirical(f: &Polyhedron, points: usize, seed: u64) -> Result<HoffmanEmpirical> {
    let base = match lp::check_feasibility(f)? {
        Feasibility::Feasible(z) => z,
        Feasibility::Infeasible(_) => return Err(Error::EmptyPolyhedron),
    };
    let dim = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut anchors = vec![base];
    for u in geometry::sphere_directions(dim.max(1), 4, seed).into_iter().take(4) {
        if dim == 0 {
            break;
        }
        if let Ok(Some(z)) = geometry::support_point(f, &u) {
            anchors.push(z);
        }
    }
    let mut out = HoffmanEmpirical { gamma: 0.0, worst_point: None, evaluated: 0 };
    for i in 0..points {
        let anchor = &anchors[i % anchors.len()];
        let scale = HOFFMAN_SCALES[i % HOFFMAN_SCALES.len()];
        let z = anchor + Vector::from_fn(dim, |_, _| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
        if let Some((ratio, _, _)) = hoffman_ratio(f, &z)? {
            out.evaluated += 1;
            if ratio > out.gamma {
                out.gamma = ratio;
                out.worst_point = Some(z.iter().copied().collect());
            }
        }
    }
    Ok(out)
}

/// The four stability theorems, keyed by their problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "3.2")]
    Bp,
    #[serde(rename = "4.2")]
    Linf,
    #[serde(rename = "4.4")]
    L1,
    #[serde(rename = "5.6")]
    L2,
}

impl Theorem {
    pub const ALL: [Theorem; 4] = [Theorem::Bp, Theorem::Linf, Theorem::L1, Theorem::L2];

    pub fn kind(self) -> NormKind {
        match self {
            Theorem::Bp => NormKind::Eq,
            Theorem::Linf => NormKind::Inf,
            Theorem::L1 => NormKind::One,
            Theorem::L2 => NormKind::Two,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Theorem::Bp => "3.2",
            Theorem::Linf => "4.2",
            Theorem::L1 => "4.4",
            Theorem::L2 => "5.6",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.label() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown theorem `{s}` (expected 3.2, 4.2, 4.4 or 5.6)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct BoundExtras {
    pub k: usize,
    /// Normal count `N̂` of the polytope (theorem 5.6).
    pub n_hat: Option<usize>,
    /// `ε′` (theorem 5.6).
    pub eps_prime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub theorem: Theorem,
    pub terms: Vec<BoundTerm>,
    /// Sum of `terms`: the bound valid for every `x`.
    pub general: f64,
    /// The simplified bound for feasible `x`, when `x` is feasible.
    pub feasible_form: Option<f64>,
    /// `feasible_form` if present, else `general`.
    pub total: f64,
}

fn need(v: Option<f64>, what: &'static str) -> Result<f64> {
    v.ok_or(Error::MissingExtras(what))
}

/// Tolerance on the residual norm when deciding feasibility of `x`.
const FEAS_TOL: f64 = 1e-12;

/// Right-hand side of the stability bound term by term, with constant `γ`.
pub fn bound_rhs(theorem: Theorem, a: &DesignMatrix, y: &Vector, eps: f64, x: &Vector, gamma: f64, extras: &BoundExtras) -> Result<BoundBreakdown> {
    if x.len() != a.cols() || y.len() != a.rows() {
        return Err(Error::DimMismatch("x or y does not match A".into()));
    }
    if extras.k == 0 {
        return Err(Error::MissingExtras("k"));
    }
    let sigma = linops::best_k_term_error(x.as_slice(), extras.k);
    let r = a.a() * x - y;
    let tol = FEAS_TOL * (1.0 + y.amax());
    let term = |name: &str, value: f64| BoundTerm { name: name.to_string(), value };
    let (terms, feasible_form) = match theorem {
        Theorem::Bp => {
            let r1 = linops::norm1(r.as_slice());
            let feasible = r1 <= tol;
            (
                vec![term("2γσ_k(x)₁", 2.0 * gamma * sigma), term("γ(1+c)‖Ax−y‖₁", gamma * (1.0 + a.c()) * r1)],
                feasible.then_some(2.0 * gamma * sigma),
            )
        }
        Theorem::Linf => {
            let c1 = need(a.c1(), "c1")?;
            let over: f64 = r.iter().map(|v| (v - eps).max(0.0)).sum();
            let under: f64 = r.iter().map(|v| (v + eps).min(0.0).abs()).sum();
            let rinf = r.amax();
            let feasible = rinf <= eps + tol;
            (
                vec![
                    term("γ‖(Ax−y−εe)⁺‖₁", gamma * over),
                    term("γ‖(Ax−y+εe)⁻‖₁", gamma * under),
                    term("2γσ_k(x)₁", 2.0 * gamma * sigma),
                    term("γc₁ε", gamma * c1 * eps),
                    term("γc₁‖Ax−y‖∞", gamma * c1 * rinf),
                ],
                feasible.then_some(2.0 * gamma * (sigma + c1 * eps)),
            )
        }
        Theorem::L1 => {
            let r1 = linops::norm1(r.as_slice());
            let feasible = r1 <= eps + tol;
            (
                vec![
                    term("2γσ_k(x)₁", 2.0 * gamma * sigma),
                    term("γ(‖Ax−y‖₁−ε)⁺", gamma * (r1 - eps).max(0.0)),
                    term("γc(ε+‖Ax−y‖₁)", gamma * a.c() * (eps + r1)),
                ],
                feasible.then_some(2.0 * gamma * (sigma + a.c() * eps)),
            )
        }
        Theorem::L2 => {
            let c1 = need(a.c1(), "c1")?;
            let c2 = need(a.c2(), "c2")?;
            let n_hat = extras.n_hat.ok_or(Error::MissingExtras("n_hat"))? as f64;
            let ep = need(extras.eps_prime, "eps_prime")?;
            let r2 = r.norm();
            let feasible = r2 <= eps + tol;
            (
                vec![
                    term("2γN̂(‖Ax−y‖₂−ε)⁺", 2.0 * gamma * n_hat * (r2 - eps).max(0.0)),
                    term("4γσ_k(x)₁", 4.0 * gamma * sigma),
                    term("2γc₁ε", 2.0 * gamma * c1 * eps),
                    term("2γc₂‖Ax−y‖₂", 2.0 * gamma * c2 * r2),
                    term("2ε′", 2.0 * ep),
                ],
                feasible.then_some(4.0 * gamma * sigma + 2.0 * gamma * (c1 + c2) * eps + 2.0 * ep),
            )
        }
    };
    let general = terms.iter().map(|t| t.value).sum();
    Ok(BoundBreakdown { theorem, terms, general, feasible_form, total: feasible_form.unwrap_or(general) })
}

/// `ũ = (|η|+η)/2`, `ṽ = (|η|−η)/2` off the support and the sign pattern on it.
fn split_abs(eta: &Vector, pair: &SupportPair) -> (Vector, Vector) {
    let mut u = eta.map(|e| (e.abs() + e) / 2.0);
    let mut v = eta.map(|e| (e.abs() - e) / 2.0);
    for &i in &pair.s1 {
        u[i] = 1.0;
        v[i] = 0.0;
    }
    for &i in &pair.s2 {
        u[i] = 0.0;
        v[i] = 1.0;
    }
    (u, v)
}

/// Certificate for the pair of the `k` largest entries of `x`, as `(pair, η, g)`
/// with `η = Aᵀg` and `g = (AAᵀ)⁻¹Aη`.
pub fn certificate_for(a: &DesignMatrix, x: &Vector, k: usize) -> Result<(SupportPair, Vector, Vector)> {
    let pair = SupportPair::from_signs(x.as_slice(), k);
    if pair.size() == 0 {
        return Ok((pair, Vector::zeros(a.cols()), Vector::zeros(a.rows())));
    }
    let cert = certify::dual_certificate(a, &pair)?;
    let eta0 = Vector::from_column_slice(&cert.eta);
    let g = a.g() * &eta0;
    let eta = a.a().transpose() * &g;
    Ok((pair, eta, g))
}

/// The multiplier tuple built in the proof of `theorem`, completed with
/// `t = |x|` (and `r = |Ax − y|` for 4.4) into a full KKT-space tuple.
pub fn dual_construction(
    theorem: Theorem,
    a: &DesignMatrix,
    x: &Vector,
    k: usize,
    y: &Vector,
    polytope: Option<&SpherePolytope>,
) -> Result<KktPoint> {
    if x.len() != a.cols() || y.len() != a.rows() {
        return Err(Error::DimMismatch("x or y does not match A".into()));
    }
    let (pair, eta, g) = certificate_for(a, x, k)?;
    let t = x.abs();
    Ok(match theorem {
        Theorem::Bp => {
            let (u, v) = split_abs(&eta, &pair);
            KktPoint::Eq { x: x.clone(), t, u, v, w: g }
        }
        Theorem::Linf => {
            let mut u = eta.map(|e| (1.0 + e) / 2.0);
            let mut v = eta.map(|e| (1.0 - e) / 2.0);
            for &i in &pair.s1 {
                u[i] = 1.0;
                v[i] = 0.0;
            }
            for &i in &pair.s2 {
                u[i] = 0.0;
                v[i] = 1.0;
            }
            if pair.size() == 0 {
                u.fill(0.0);
                v.fill(0.0);
            }
            KktPoint::Inf { x: x.clone(), t, u, v, w: g.map(|z| z.max(0.0)), w_prime: g.map(|z| (-z).max(0.0)) }
        }
        Theorem::L1 => {
            let (v1, v2) = split_abs(&eta, &pair);
            KktPoint::One {
                x: x.clone(),
                t,
                r: (a.a() * x - y).abs(),
                v1,
                v2,
                v3: g.map(|z| (-z).max(0.0)),
                v4: g.map(|z| z.max(0.0)),
                v5: g.amax(),
            }
        }
        Theorem::L2 => {
            let p = polytope.ok_or(Error::MissingExtras("polytope"))?;
            let (v1, v2) = split_abs(&eta, &pair);
            let mut v3 = Vector::zeros(p.len());
            for i in 0..a.rows() {
                let (sign, val) = if g[i] >= 0.0 { (-1.0, g[i]) } else { (1.0, -g[i]) };
                let col = p.axis_column(i, sign).ok_or(Error::MissingExtras("axis-augmented polytope"))?;
                v3[col] += val;
            }
            KktPoint::Two { x: x.clone(), t, v1, v2, v3 }
        }
    })
}

/// Largest violation of the dual-feasibility rows by the multiplier part of `point`.
pub fn dual_violation(point: &KktPoint, a: &DenseMatrix, y: &Vector, eps: f64, mm: Option<&DenseMatrix>) -> Result<f64> {
    let res = solvers::kkt_residual(point, a, y, eps, mm)?;
    let nn = mm.map_or(0, |m| m.ncols());
    let duals = solvers::dual_blocks(point.kind());
    let mut off = 0;
    let mut worst = 0.0_f64;
    for (name, len) in solvers::residual_blocks(point.kind(), a.nrows(), a.ncols(), nn) {
        if duals.contains(&name) {
            worst = worst.max(res.rows(off, len).amax());
        }
        off += len;
    }
    Ok(worst)
}

/// Magnitudes of a generated sparse vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeLaw {
    /// Each nonzero is `±1` or `±` log-uniform on `[0.1, 10]` with equal odds.
    #[default]
    Mixed,
    Unit,
    LogUniform,
}

/// A `k`-sparse vector with uniformly random support and signs.
pub fn random_sparse(n: usize, k: usize, law: MagnitudeLaw, rng: &mut ChaCha8Rng) -> Vector {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut x = Vector::zeros(n);
    for &i in &idx[..k.min(n)] {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let log_uniform = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-1.0..=1.0));
        let mag = match law {
            MagnitudeLaw::Unit => 1.0,
            MagnitudeLaw::LogUniform => log_uniform(rng),
            MagnitudeLaw::Mixed => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    log_uniform(rng)
                }
            }
        };
        x[i] = sign * mag;
    }
    x
}

/// A random vector with `‖u‖ = radius` in the given norm.
pub fn random_in_norm(m: usize, norm: NormKind, radius: f64, rng: &mut ChaCha8Rng) -> Vector {
    let g = Vector::from_fn(m, |_, _| StandardNormal.sample(rng));
    let len = norm.residual_norm(g.as_slice());
    if len == 0.0 { g } else { g * (radius / len) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub theorem: Theorem,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    /// `‖p‖₂` of the dense perturbation added to the sparse vector.
    pub perturbation: f64,
    /// Noise level; the measurement noise has norm `noise_ratio · ε`.
    pub epsilon: f64,
    pub noise_ratio: f64,
    pub magnitudes: MagnitudeLaw,
    /// Run even when the matrix is not certified.
    pub force: bool,
    pub l2: L2Options,
}

impl StabilityConfig {
    pub fn new(theorem: Theorem, k: usize) -> Self {
        Self {
            theorem,
            k,
            trials: 10,
            seed: 0,
            perturbation: 0.0,
            epsilon: if theorem == Theorem::Bp { 0.0 } else { 0.1 },
            noise_ratio: 0.5,
            magnitudes: MagnitudeLaw::Mixed,
            force: false,
            l2: L2Options::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub instance: usize,
    pub trial: usize,
    pub seed: u64,
    pub theorem: Theorem,
    pub sigma_k: f64,
    pub epsilon: f64,
    pub measured_distance: f64,
    pub bound: BoundBreakdown,
    /// `bound.total` at `γ = 1`.
    pub bound_factor: f64,
    /// `measured_distance / bound_factor`; absent when the factor vanishes.
    pub empirical_gamma: Option<f64>,
    pub feasible: bool,
    /// `measured_distance ≤ 1e-6`.
    pub exact_recovery: bool,
    pub note: Option<String>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

/// Distance from `x` to the finest relaxation's solution set, with `N̂` and an
/// `ε′` proxy: a Hausdorff estimate between the solution sets of the two finest levels.
pub fn l2_distance_with_proxy(a: &DesignMatrix, y: &Vector, eps: f64, x: &Vector, opts: &L2Options) -> Result<(f64, usize, f64, RecoverySolution)> {
    let fine = solvers::l2con_solve(a, y, eps, &L2Options { run_full: true, ..opts.clone() })?;
    let fine_set = solvers::relaxed_solution_set(&fine, a, y, eps)?;
    let dist = geometry::project(x, &fine_set)?.dist;
    let n_hat = fine.relaxation.as_ref().map_or(0, |r| r.polytope.len());
    let eps_prime = if opts.schedule.len() >= 2 {
        let coarse_opts = L2Options { schedule: opts.schedule[..opts.schedule.len() - 1].to_vec(), run_full: true, ..opts.clone() };
        let coarse = solvers::l2con_solve(a, y, eps, &coarse_opts)?;
        let coarse_set = solvers::relaxed_solution_set(&coarse, a, y, eps)?;
        geometry::hausdorff_estimate(&fine_set, &coarse_set, 16, opts.seed, false)?
    } else {
        0.0
    };
    Ok((dist, n_hat, eps_prime, fine))
}

/// One instance of a stability experiment: per trial, a `k`-sparse vector plus a
/// dense perturbation, noisy measurements inside the `ε`-ball, the distance to
/// the optimal set and the bound factor at `γ = 1`.
pub fn stability_experiment(a: &DesignMatrix, cfg: &StabilityConfig, instance: usize) -> Result<Vec<StabilityReport>> {
    let kind = cfg.theorem.kind();
    let eps = cfg.epsilon;
    if !cfg.force && !certify::certify_weak_rsp(a, cfg.k)?.holds() {
        return Err(Error::InvalidInput(format!("matrix does not have the weak RSP of order {} (set force to run anyway)", cfg.k)));
    }
    let mut out = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, trial);
        let x0 = random_sparse(a.cols(), cfg.k, cfg.magnitudes, &mut rng);
        let p = random_in_norm(a.cols(), NormKind::Two, cfg.perturbation, &mut rng);
        let x = &x0 + p;
        let y = if kind == NormKind::Eq {
            a.a() * &x
        } else {
            a.a() * &x + random_in_norm(a.rows(), kind, cfg.noise_ratio * eps, &mut rng)
        };
        let sigma_k = linops::best_k_term_error(x.as_slice(), cfg.k);
        let (distance, extras, note) = if kind == NormKind::Two {
            let (d, n_hat, ep, _) = l2_distance_with_proxy(a, &y, eps, &x, &cfg.l2)?;
            (
                d,
                BoundExtras { k: cfg.k, n_hat: Some(n_hat), eps_prime: Some(ep) },
                Some("polytope-relaxation solution set; ε′ is a Hausdorff proxy between the two finest levels".to_string()),
            )
        } else {
            let model = MeasurementModel::new(y.iter().copied().collect(), eps, kind)?;
            let d = solvers::solution_set_distance(&x, &model, a, &cfg.l2)?.distance;
            (d, BoundExtras { k: cfg.k, ..BoundExtras::default() }, None)
        };
        let bound = bound_rhs(cfg.theorem, a, &y, eps, &x, 1.0, &extras)?;
        let factor = bound.total;
        out.push(StabilityReport {
            instance,
            trial,
            seed: cfg.seed,
            theorem: cfg.theorem,
            sigma_k,
            epsilon: eps,
            measured_distance: distance,
            feasible: bound.feasible_form.is_some(),
            bound_factor: factor,
            empirical_gamma: (factor > 0.0).then(|| distance / factor),
            exact_recovery: distance <= 1e-6,
            bound,
            note,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub level: f64,
    pub max_distance: f64,
    pub max_gamma: Option<f64>,
    pub reports: Vec<StabilityReport>,
}

/// Reruns the same trials at each level: the perturbation for theorem 3.2, `ε` otherwise.
pub fn stability_ladder(a: &DesignMatrix, base: &StabilityConfig, levels: &[f64], instance: usize) -> Result<Vec<LadderRung>> {
    levels
        .iter()
        .map(|&level| {
            let mut cfg = base.clone();
            if base.theorem == Theorem::Bp {
                cfg.perturbation = level;
            } else {
                cfg.epsilon = level;
            }
            let reports = stability_experiment(a, &cfg, instance)?;
            let max_distance = reports.iter().map(|r| r.measured_distance).fold(0.0, f64::max);
            let max_gamma = reports.iter().filter_map(|r| r.empirical_gamma).reduce(f64::max);
            Ok(LadderRung { level, max_distance, max_gamma, reports })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

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

    #[test]
    fn bp_system_shapes() {
        let a = DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let sys = build_kkt(NormKind::Eq, &a, &v(&[2.0]), 0.0, None).unwrap();
        assert_eq!(sys.m_ineq.shape(), (12, 9));
        assert_eq!(sys.layout.ineq_rows.len(), 6);
        assert!(sys.layout.ineq_rows.iter().all(|b| b.len == 2));
        // Ax = y (1 row), dual linkage (n = 2 rows), objective equality (1 row).
        assert_eq!(sys.m_eq.shape(), (4, 9));
        assert_eq!(sys.layout.eq_rows.iter().map(|b| b.len).collect::<Vec<_>>(), vec![1, 2, 1]);
    }

    #[test]
    fn y_only_moves_rhs_and_objective_rows() {
        let a = gaussian(2, 4, 3);
        let y1 = v(&[0.3, -1.0]);
        let y2 = v(&[0.8, -0.2]);
        for kind in [NormKind::Eq, NormKind::Inf, NormKind::One] {
            let eps = if kind == NormKind::Eq { 0.0 } else { 0.1 };
            let s1 = build_kkt(kind, a.a(), &y1, eps, None).unwrap();
            let s2 = build_kkt(kind, a.a(), &y2, eps, None).unwrap();
            assert_eq!(s1.m_ineq, s2.m_ineq);
            let obj = s1.layout.eq_block("objective").unwrap().start;
            for i in 0..s1.m_eq.nrows() {
                if i != obj {
                    assert_eq!(s1.m_eq.row(i), s2.m_eq.row(i));
                }
            }
            let pattern = |m: &DenseMatrix| m.map(|x| x != 0.0);
            assert_eq!(pattern(&s1.m_eq), pattern(&s2.m_eq));
        }
    }

    #[test]
    fn solver_outputs_are_members() {
        let a = gaussian(3, 6, 11);
        let y = v(&[1.0, -0.4, 0.7]);
        let s = solvers::bp_solve(&a, &y).unwrap();
        assert!(build_kkt(NormKind::Eq, a.a(), &y, 0.0, None).unwrap().membership(&s.point).unwrap() <= 1e-9);
        let s = solvers::linf_solve(&a, &y, 0.2).unwrap();
        assert!(build_kkt(NormKind::Inf, a.a(), &y, 0.2, None).unwrap().membership(&s.point).unwrap() <= 1e-9);
        let s = solvers::l1con_solve(&a, &y, 0.2).unwrap();
        assert!(build_kkt(NormKind::One, a.a(), &y, 0.2, None).unwrap().membership(&s.point).unwrap() <= 1e-9);
        let s = solvers::l2con_solve(&a, &y, 0.2, &L2Options { schedule: vec![16], ..L2Options::default() }).unwrap();
        let p = &s.relaxation.as_ref().unwrap().polytope;
        assert!(build_kkt(NormKind::Two, a.a(), &y, 0.2, Some(p)).unwrap().membership(&s.point).unwrap() <= 1e-9);
        assert!(build_kkt(NormKind::Two, a.a(), &y, 0.2, None).is_err());
    }

    #[test]
    fn robinson_calibration() {
        let halfline = robinson_estimate(&DenseMatrix::from_element(1, 1, 1.0), &DenseMatrix::zeros(0, 1), 10, 1).unwrap();
        assert_eq!(halfline.semantics, RobinsonSemantics::ExactTiny);
        assert!((halfline.value - 1.0).abs() < 1e-9, "{}", halfline.value);
        let plane = robinson_estimate(&DenseMatrix::zeros(0, 2), &DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]), 10, 1).unwrap();
        assert!((plane.value - FRAC_1_SQRT_2).abs() < 1e-9, "{}", plane.value);
    }

    #[test]
    fn robinson_monte_carlo_is_a_lower_bound_and_monotone() {
        let m1 = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let m2 = DenseMatrix::zeros(0, 2);
        let exact = robinson_exact(&m1, &m2).unwrap();
        let mut prev = 0.0;
        for s in [10, 50, 200] {
            let est = robinson_monte_carlo(&m1, &m2, s, 5).unwrap();
            assert!(est.value <= exact + 1e-9);
            assert!(est.value >= prev);
            prev = est.value;
        }
    }

    #[test]
    fn hoffman_examples() {
        let halfline = Polyhedron::ineq_only(DenseMatrix::from_element(1, 1, 1.0), v(&[0.0])).unwrap();
        assert_eq!(hoffman_ratio(&halfline, &v(&[2.0])).unwrap().unwrap().0, 1.0);
        let emp = hoffman_empirical(&halfline, 60, 2).unwrap();
        assert_eq!(emp.gamma, 1.0);
        let plane = Polyhedron::eq_only(DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[0.0])).unwrap();
        let (ratio, dist, res) = hoffman_ratio(&plane, &v(&[1.0, 1.0])).unwrap().unwrap();
        assert!((dist - 2f64.sqrt()).abs() < 1e-12 && res == 2.0 && (ratio - FRAC_1_SQRT_2).abs() < 1e-12);
        let empty = Polyhedron::ineq_only(DenseMatrix::from_row_slice(2, 1, &[1.0, -1.0]), v(&[-1.0, -1.0])).unwrap();
        assert_eq!(hoffman_empirical(&empty, 5, 0).unwrap_err(), Error::EmptyPolyhedron);
    }

    #[test]
    fn bound_rhs_examples() {
        let a = gaussian(3, 6, 4);
        let mut x = v(&[1.0, 0.0, -2.0, 0.0, 0.0, 0.0]);
        let y = a.a() * &x;
        let b = bound_rhs(Theorem::Bp, &a, &y, 0.0, &x, 1.5, &BoundExtras { k: 2, ..Default::default() }).unwrap();
        assert_eq!(b.total, 0.0);
        x[1] = 0.25;
        let b = bound_rhs(Theorem::Bp, &a, &(a.a() * &x), 0.0, &x, 1.5, &BoundExtras { k: 2, ..Default::default() }).unwrap();
        assert!((b.total - 2.0 * 1.5 * 0.25).abs() < 1e-12);
        x[1] = 0.0;
        let eps = 0.1;
        let b = bound_rhs(Theorem::Linf, &a, &y, eps, &x, 2.0, &BoundExtras { k: 2, ..Default::default() }).unwrap();
        assert!((b.total - 2.0 * 2.0 * a.c1().unwrap() * eps).abs() < 1e-12);
        let ex = BoundExtras { k: 2, n_hat: Some(20), eps_prime: Some(0.01) };
        let b = bound_rhs(Theorem::L2, &a, &y, eps, &x, 2.0, &ex).unwrap();
        let expect = 2.0 * 2.0 * (a.c1().unwrap() + a.c2().unwrap()) * eps + 0.02;
        assert!((b.total - expect).abs() < 1e-12);
        let missing = bound_rhs(Theorem::L2, &a, &y, eps, &x, 2.0, &BoundExtras { k: 2, ..Default::default() });
        assert_eq!(missing.unwrap_err(), Error::MissingExtras("n_hat"));
    }

    #[test]
    fn dual_construction_hand_example() {
        let a = dm(1, 2, &[1.0, 1.0]);
        let x = v(&[2.0, 0.0]);
        let y = v(&[2.0]);
        let KktPoint::Eq { u, v: vv, .. } = dual_construction(Theorem::Bp, &a, &x, 1, &y, None).unwrap() else { panic!() };
        assert_eq!(u, v(&[1.0, 1.0]));
        assert_eq!(vv, v(&[0.0, 0.0]));
        let zero = dual_construction(Theorem::Bp, &a, &v(&[0.0, 0.0]), 1, &y, None).unwrap();
        assert!(zero.to_vector().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn l2_construction_identities() {
        let a = gaussian(2, 5, 9);
        let poly = geometry::augment_with_axes(&geometry::dudley_polytope(2, 10, 0).unwrap());
        let x = v(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let y = a.a() * &x;
        let (_, _, g) = certificate_for(&a, &x, 1).unwrap();
        let KktPoint::Two { v3, .. } = dual_construction(Theorem::L2, &a, &x, 1, &y, Some(&poly)).unwrap() else { panic!() };
        assert!((poly.matrix() * &v3 + &g).amax() < 1e-14);
        assert!((v3.iter().map(|z| z.abs()).sum::<f64>() - linops::norm1(g.as_slice())).abs() < 1e-14);
        assert!(linops::norm1(g.as_slice()) <= a.c1().unwrap() + 1e-12);
    }

    #[test]
    fn dual_constructions_are_feasible() {
        let k = 1;
        let a = (0..50).map(|s| gaussian(3, 6, s)).find(|a| certify::certify_weak_rsp(a, k).unwrap().holds()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_sparse(6, k, MagnitudeLaw::Mixed, &mut rng);
        let y = a.a() * &x;
        let poly = geometry::augment_with_axes(&geometry::dudley_polytope(3, 16, 0).unwrap());
        for th in Theorem::ALL {
            let p = if th == Theorem::L2 { Some(&poly) } else { None };
            let pt = dual_construction(th, &a, &x, k, &y, p).unwrap();
            let mm = p.map(|p| p.matrix());
            let eps = if th == Theorem::Bp { 0.0 } else { 0.1 };
            assert!(dual_violation(&pt, a.a(), &y, eps, mm.as_ref()).unwrap() <= 1e-8, "{th}");
        }
    }

    #[test]
    fn stability_exact_recovery_and_determinism() {
        let k = 1;
        let a = (0..50).map(|s| gaussian(4, 8, s)).find(|a| certify::certify_weak_rsp(a, k).unwrap().holds()).unwrap();
        let cfg = StabilityConfig { trials: 4, ..StabilityConfig::new(Theorem::Bp, k) };
        let r1 = stability_experiment(&a, &cfg, 0).unwrap();
        assert!(r1.iter().all(|r| r.exact_recovery && r.feasible));
        assert_eq!(r1, stability_experiment(&a, &cfg, 0).unwrap());
    }

    #[test]
    fn l2_bound_chain_inequality() {
        let a = gaussian(2, 4, 8);
        let y = v(&[0.7, -0.3]);
        let eps = 0.05;
        let x = v(&[0.2, 0.1, -0.4, 0.0]);
        let opts = L2Options { schedule: vec![16, 32], ..L2Options::default() };
        let (fine_dist, _, ep, _) = l2_distance_with_proxy(&a, &y, eps, &x, &opts).unwrap();
        let coarse = solvers::l2con_solve(&a, &y, eps, &L2Options { schedule: vec![16], ..opts.clone() }).unwrap();
        let coarse_dist = geometry::project(&x, &solvers::relaxed_solution_set(&coarse, &a, &y, eps).unwrap()).unwrap().dist;
        assert!(fine_dist <= 2.0 * ep + 2.0 * coarse_dist + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hoffman_ratio_bookkeeping(seed in 0u64..1000) {
            let f = geometry::dudley_polytope(2, 7, 0).unwrap().to_polyhedron();
            let emp = hoffman_empirical(&f, 12, seed).unwrap();
            if let Some(w) = emp.worst_point {
                let (ratio, dist, res) = hoffman_ratio(&f, &v(&w)).unwrap().unwrap();
                prop_assert!(dist <= emp.gamma * res + 1e-12);
                prop_assert!((ratio - emp.gamma).abs() < 1e-12);
            }
        }
    }
}
