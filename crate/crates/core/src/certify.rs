//! Exact finite-enumeration certifiers for range- and null-space properties.
//!
//! Index sets are 0-based throughout. Pairs `(S1, S2)` are visited in the order
//! `(|S1|+|S2|, S1, S2)`, so the first violation reported is reproducible.

use std::fmt;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{self, DenseMatrix, DesignMatrix, Vector};
use crate::lp::{self, Feasibility, LpBuilder, LpStatus, Polyhedron};
use crate::solvers;

pub const STRICT_TOL: f64 = 1e-7;
pub const ENUM_CAP: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SupportPair {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub n: usize,
    pub k: usize,
}

impl SupportPair {
    pub fn new(mut s1: Vec<usize>, mut s2: Vec<usize>, n: usize, k: usize) -> Result<Self> {
        s1.sort_unstable();
        s2.sort_unstable();
        s1.dedup();
        s2.dedup();
        if s1.iter().chain(&s2).any(|&i| i >= n) {
            return Err(Error::InvalidInput("support index out of range".into()));
        }
        if s1.iter().any(|i| s2.contains(i)) {
            return Err(Error::InvalidInput("S1 and S2 must be disjoint".into()));
        }
        if s1.len() + s2.len() > k {
            return Err(Error::InvalidInput("|S1|+|S2| exceeds k".into()));
        }
        Ok(Self { s1, s2, n, k })
    }

    pub fn empty(n: usize, k: usize) -> Self {
        Self { s1: Vec::new(), s2: Vec::new(), n, k }
    }

    /// Pair induced by the signs of the `k` largest nonzero entries of `x`.
    pub fn from_signs(x: &[f64], k: usize) -> Self {
        let support = linops::top_k_support(x, k);
        let s1 = support.iter().cloned().filter(|&i| x[i] > 0.0).collect();
        let s2 = support.iter().cloned().filter(|&i| x[i] < 0.0).collect();
        Self { s1, s2, n: x.len(), k }
    }

    pub fn size(&self) -> usize {
        self.s1.len() + self.s2.len()
    }

    pub fn swapped(&self) -> Self {
        Self { s1: self.s2.clone(), s2: self.s1.clone(), n: self.n, k: self.k }
    }

    fn sign(&self, i: usize) -> Option<f64> {
        if self.s1.contains(&i) {
            Some(1.0)
        } else if self.s2.contains(&i) {
            Some(-1.0)
        } else {
            None
        }
    }
}

impl fmt::Display for SupportPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(S1={:?}, S2={:?})", self.s1, self.s2)
    }
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All pairs with `|S1|+|S2| = s`: supports in lexicographic order, and within a
/// support the sign patterns with `+` before `−` position by position.
pub fn pairs_of_size(n: usize, s: usize, k: usize) -> Vec<SupportPair> {
    let mut out = Vec::new();
    for t in combinations(n, s) {
        for mask in 0u64..(1u64 << s) {
            let (mut s1, mut s2) = (Vec::new(), Vec::new());
            for (b, &i) in t.iter().enumerate() {
                if mask >> b & 1 == 0 {
                    s1.push(i);
                } else {
                    s2.push(i);
                }
            }
            out.push(SupportPair { s1, s2, n, k });
        }
    }
    out
}

/// Sort key matching the order of [`pairs_of_size`].
fn report_key(pair: &SupportPair) -> (Vec<usize>, Vec<bool>) {
    let mut support: Vec<usize> = pair.s1.iter().chain(&pair.s2).copied().collect();
    support.sort_unstable();
    let mut negs: Vec<bool> = support.iter().map(|i| pair.s2.contains(i)).collect();
    negs.reverse();
    (support, negs)
}

fn pair_enumeration_size(n: usize, k: usize) -> u128 {
    (1..=k).map(|j| binomial(n, j) << j).sum()
}

fn check_pair_cap(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("order k must be at least 1".into()));
    }
    let needed = pair_enumeration_size(n, k);
    if needed > ENUM_CAP {
        return Err(Error::TooLarge { what: "support pair enumeration (LP calls)", needed, cap: ENUM_CAP });
    }
    Ok(())
}

/// Visits each pair up to the η ↔ −η symmetry, in reporting order.
fn for_each_canonical_pair<F>(n: usize, k: usize, mut f: F) -> Result<Option<SupportPair>>
where
    F: FnMut(&SupportPair) -> Result<bool>,
{
    for s in 1..=k.min(n) {
        for pair in pairs_of_size(n, s, k) {
            let mirror = pair.swapped();
            if report_key(&mirror) < report_key(&pair) {
                // Already decided when the mirror came up, and it passed.
                continue;
            }
            if !f(&pair)? {
                return Ok(Some(pair));
            }
        }
    }
    Ok(None)
}

/// Feasible set of row-space multipliers `w` for a pair: `(Aᵀw)_{S1} = 1`,
/// `(Aᵀw)_{S2} = −1`, `|(Aᵀw)_i| ≤ 1` elsewhere.
fn certificate_polyhedron(a: &DenseMatrix, pair: &SupportPair) -> Polyhedron {
    let (m, n) = a.shape();
    let mut e_rows = Vec::new();
    let mut f = Vec::new();
    let mut g_rows = Vec::new();
    let mut h = Vec::new();
    for i in 0..n {
        let col: Vec<f64> = a.column(i).iter().cloned().collect();
        match pair.sign(i) {
            Some(s) => {
                e_rows.extend_from_slice(&col);
                f.push(s);
            }
            None => {
                g_rows.extend_from_slice(&col);
                h.push(1.0);
                g_rows.extend(col.iter().map(|v| -v));
                h.push(1.0);
            }
        }
    }
    Polyhedron {
        g: DenseMatrix::from_row_slice(h.len(), m, &g_rows),
        h: Vector::from_vec(h),
        e: DenseMatrix::from_row_slice(f.len(), m, &e_rows),
        f: Vector::from_vec(f),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeakRsp {
    Holds,
    Violated(SupportPair),
}

impl WeakRsp {
    pub fn holds(&self) -> bool {
        matches!(self, WeakRsp::Holds)
    }
}

pub fn certify_weak_rsp(a: &DesignMatrix, k: usize) -> Result<WeakRsp> {
    let n = a.cols();
    check_pair_cap(n, k)?;
    let failed = for_each_canonical_pair(n, k, |pair| {
        Ok(matches!(lp::check_feasibility(&certificate_polyhedron(a.a(), pair))?, Feasibility::Feasible(_)))
    })?;
    Ok(failed.map_or(WeakRsp::Holds, WeakRsp::Violated))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rsp {
    Holds { min_margin: f64 },
    Violated { pair: SupportPair, margin: Option<f64> },
}

impl Rsp {
    pub fn holds(&self) -> bool {
        matches!(self, Rsp::Holds { .. })
    }
}

/// Largest `t ≤ 1` with `|(Aᵀw)_i| ≤ 1 − t` off the pair's support; `None` if the
/// equality part is infeasible.
pub fn rsp_margin(a: &DenseMatrix, pair: &SupportPair) -> Result<Option<f64>> {
    let (m, n) = a.shape();
    let tvar = m;
    let mut b = LpBuilder::new(m + 1);
    b.cost(tvar, -1.0).bounds(tvar, f64::NEG_INFINITY, 1.0);
    for i in 0..n {
        let col: Vec<(usize, f64)> = (0..m).map(|r| (r, a[(r, i)])).collect();
        match pair.sign(i) {
            Some(s) => {
                b.eq(col, s);
            }
            None => {
                let mut plus = col.clone();
                plus.push((tvar, 1.0));
                b.ineq(plus, 1.0);
                let mut minus: Vec<(usize, f64)> = col.iter().map(|&(r, v)| (r, -v)).collect();
                minus.push((tvar, 1.0));
                b.ineq(minus, 1.0);
            }
        }
    }
    let sol = lp::solve(&b.build())?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.primal[tvar])),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::NumericalFailure("margin LP unbounded despite t ≤ 1".into())),
    }
}

pub fn certify_rsp(a: &DesignMatrix, k: usize) -> Result<Rsp> {
    let n = a.cols();
    check_pair_cap(n, k)?;
    let mut min_margin = f64::INFINITY;
    let mut failed_margin = None;
    let failed = for_each_canonical_pair(n, k, |pair| {
        let t = rsp_margin(a.a(), pair)?;
        match t {
            Some(t) if t > STRICT_TOL => {
                min_margin = min_margin.min(t);
                Ok(true)
            }
            other => {
                failed_margin = other;
                Ok(false)
            }
        }
    })?;
    Ok(match failed {
        None => Rsp::Holds { min_margin },
        Some(pair) => Rsp::Violated { pair, margin: failed_margin },
    })
}

/// `ρ*` of the stable null space property; `Infinite` when some null-space
/// vector is supported inside an admissible `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rho {
    Finite(f64),
    Infinite,
}

impl Rho {
    pub fn value(&self) -> f64 {
        match self {
            Rho::Finite(v) => *v,
            Rho::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Nsp {
    Holds { rho: Rho },
    Violated { s: Vec<usize>, v: Vec<f64>, rho: Rho },
}

impl Nsp {
    pub fn holds(&self) -> bool {
        matches!(self, Nsp::Holds { .. })
    }

    pub fn rho(&self) -> Rho {
        match self {
            Nsp::Holds { rho } | Nsp::Violated { rho, .. } => *rho,
        }
    }
}

/// `max sᵀ(Bz)_S  s.t.  ‖(Bz)_{S̄}‖₁ ≤ 1`; returns the value (∞ if unbounded)
/// and the null-space vector `Bz` attaining it (the ray direction if unbounded).
fn nsp_subproblem(basis: &DenseMatrix, s: &[usize], signs: &[f64]) -> Result<(f64, Vector)> {
    let (n, d) = basis.shape();
    let off: Vec<usize> = (0..n).filter(|i| !s.contains(i)).collect();
    let nt = off.len();
    let mut b = LpBuilder::new(d + nt);
    for (&i, &sg) in s.iter().zip(signs) {
        for j in 0..d {
            b.add_cost(j, -sg * basis[(i, j)]);
        }
    }
    for (q, &i) in off.iter().enumerate() {
        let t = d + q;
        b.bounds(t, 0.0, f64::INFINITY);
        let mut row: Vec<(usize, f64)> = (0..d).map(|j| (j, basis[(i, j)])).collect();
        row.push((t, -1.0));
        b.ineq(row.clone(), 0.0);
        let mut neg: Vec<(usize, f64)> = (0..d).map(|j| (j, -basis[(i, j)])).collect();
        neg.push((t, -1.0));
        b.ineq(neg, 0.0);
    }
    b.ineq((d..d + nt).map(|t| (t, 1.0)).collect(), 1.0);
    let sol = lp::solve(&b.build())?;
    let lift = |z: &[f64]| basis * Vector::from_column_slice(&z[..d]);
    match sol.status {
        LpStatus::Optimal => Ok((-sol.value, lift(sol.primal.as_slice()))),
        LpStatus::Unbounded => {
            let ray = sol.ray.expect("unbounded solution carries a ray");
            let mut v = lift(ray.as_slice());
            let scale = v.amax();
            if scale > 0.0 {
                v /= scale;
            }
            Ok((f64::INFINITY, v))
        }
        LpStatus::Infeasible => Err(Error::NumericalFailure("NSP subproblem infeasible".into())),
    }
}

fn sign_patterns(k: usize) -> Vec<Vec<f64>> {
    // s and −s give the same value, so the first sign is fixed to +1.
    let free = k.saturating_sub(1);
    (0u64..(1u64 << free))
        .map(|mask| {
            let mut s = vec![1.0; k];
            for b in 0..free {
                if mask >> b & 1 == 1 {
                    s[b + 1] = -1.0;
                }
            }
            s
        })
        .collect()
}

fn check_nsp_cap(n: usize, m: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput("order k must satisfy 1 <= k <= n".into()));
    }
    if n <= m {
        return Err(Error::BadDim("null space is trivial".into()));
    }
    let needed = binomial(n, k) << k;
    if needed > ENUM_CAP {
        return Err(Error::TooLarge { what: "NSP support enumeration (LP calls)", needed, cap: ENUM_CAP });
    }
    Ok(())
}

pub fn certify_nsp(a: &DesignMatrix, k: usize) -> Result<Nsp> {
    let (m, n) = (a.rows(), a.cols());
    check_nsp_cap(n, m, k)?;
    let basis = linops::null_space_basis(a.a());
    let mut rho = 0.0_f64;
    let mut witness: Option<(Vec<usize>, Vector)> = None;
    for s in combinations(n, k) {
        for signs in sign_patterns(k) {
            let (val, v) = nsp_subproblem(&basis, &s, &signs)?;
            if val >= 1.0 - STRICT_TOL && witness.is_none() {
                witness = Some((s.clone(), v));
            }
            rho = rho.max(val);
        }
    }
    let rho = if rho.is_finite() { Rho::Finite(rho) } else { Rho::Infinite };
    Ok(match witness {
        None => Nsp::Holds { rho },
        Some((s, v)) => Nsp::Violated { s, v: v.iter().cloned().collect(), rho },
    })
}

pub fn stable_nsp_rho(a: &DesignMatrix, k: usize) -> Result<Rho> {
    Ok(certify_nsp(a, k)?.rho())
}

/// Norm applied to `Av` in the robust null space property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ResidualNorm {
    L1,
    #[default]
    L2,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    /// Lower bound on the minimal `τ`; `+∞` when `ρ` is below the stable NSP constant.
    pub value: f64,
    pub lower_bound: bool,
    pub norm: ResidualNorm,
}

fn project_ball(u: &mut [f64], norm: ResidualNorm) {
    match norm {
        ResidualNorm::L2 => {
            let r = linops::norm2(u);
            if r > 1.0 {
                u.iter_mut().for_each(|v| *v /= r);
            }
        }
        ResidualNorm::Linf => u.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0)),
        ResidualNorm::L1 => {
            if linops::norm1(u) <= 1.0 {
                return;
            }
            let mut mags: Vec<f64> = u.iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            let mut cum = 0.0;
            let mut theta = 0.0;
            for (i, &mgn) in mags.iter().enumerate() {
                cum += mgn;
                let cand = (cum - 1.0) / (i + 1) as f64;
                if mgn > cand {
                    theta = cand;
                }
            }
            u.iter_mut().for_each(|v| *v = v.signum() * (v.abs() - theta).max(0.0));
        }
    }
}

fn robust_objective(v: &[f64], s: &[usize], signs: &[f64], rho: f64) -> f64 {
    let mut val = 0.0;
    for (i, &x) in v.iter().enumerate() {
        match s.iter().position(|&j| j == i) {
            Some(p) => val += signs[p] * x,
            None => val -= rho * x.abs(),
        }
    }
    val
}

/// `max_λ sᵀ(v)_S − ρ‖v_{S̄}‖₁` with `v = v0 + Bλ`, solved exactly as an LP.
fn polish_lambda(v0: &Vector, basis: &DenseMatrix, s: &[usize], signs: &[f64], rho: f64) -> Result<f64> {
    let (n, d) = basis.shape();
    let off: Vec<usize> = (0..n).filter(|i| !s.contains(i)).collect();
    let mut b = LpBuilder::new(d + off.len());
    let mut constant = 0.0;
    for (&i, &sg) in s.iter().zip(signs) {
        constant += sg * v0[i];
        for j in 0..d {
            b.add_cost(j, -sg * basis[(i, j)]);
        }
    }
    for (q, &i) in off.iter().enumerate() {
        let t = d + q;
        b.cost(t, rho).bounds(t, 0.0, f64::INFINITY);
        let mut row: Vec<(usize, f64)> = (0..d).map(|j| (j, basis[(i, j)])).collect();
        row.push((t, -1.0));
        b.ineq(row, -v0[i]);
        let mut neg: Vec<(usize, f64)> = (0..d).map(|j| (j, -basis[(i, j)])).collect();
        neg.push((t, -1.0));
        b.ineq(neg, v0[i]);
    }
    let sol = lp::solve(&b.build())?;
    match sol.status {
        LpStatus::Optimal => Ok(constant - sol.value),
        LpStatus::Unbounded => Ok(f64::INFINITY),
        LpStatus::Infeasible => Err(Error::NumericalFailure("robust NSP polish infeasible".into())),
    }
}

/// Estimate of the minimal `τ` in `‖v_S‖₁ ≤ ρ‖v_{S̄}‖₁ + τ‖Av‖` over all `|S| = k`.
///
/// Writing `v = Gᵀu + Bλ` gives `Av = u`, so each support/sign subproblem is the
/// concave program `max sᵀv_S − ρ‖v_{S̄}‖₁` over `‖u‖ ≤ 1`, `λ` free. It is run by
/// projected subgradient ascent (20 restarts of 500 steps, step `1/√t`), and the
/// best `u` of each restart is polished by solving the `λ`-subproblem exactly.
pub fn robust_nsp_tau(a: &DesignMatrix, k: usize, rho: f64, norm: ResidualNorm, seed: u64) -> Result<TauEstimate> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidInput("rho must lie in (0,1)".into()));
    }
    let (m, n) = (a.rows(), a.cols());
    check_nsp_cap(n, m, k)?;
    let basis = linops::null_space_basis(a.a());
    let gt = a.g().transpose();
    let d = basis.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_overall = 0.0_f64;
    for s in combinations(n, k) {
        for signs in sign_patterns(k) {
            let (null_val, _) = nsp_subproblem(&basis, &s, &signs)?;
            if null_val > rho {
                return Ok(TauEstimate { value: f64::INFINITY, lower_bound: true, norm });
            }
            for _ in 0..20 {
                let mut u: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let r = linops::norm2(&u).max(1e-300);
                u.iter_mut().for_each(|v| *v /= r);
                project_ball(&mut u, norm);
                let mut lam = vec![0.0; d];
                let mut best_u = u.clone();
                let mut best_val = f64::NEG_INFINITY;
                for it in 1..=500 {
                    let v = &gt * Vector::from_column_slice(&u) + &basis * Vector::from_column_slice(&lam);
                    let val = robust_objective(v.as_slice(), &s, &signs, rho);
                    if val > best_val {
                        best_val = val;
                        best_u.clone_from(&u);
                    }
                    let gv = Vector::from_fn(n, |i, _| match s.iter().position(|&j| j == i) {
                        Some(p) => signs[p],
                        None => -rho * if v[i] > 0.0 { 1.0 } else if v[i] < 0.0 { -1.0 } else { 0.0 },
                    });
                    let gu = a.g() * &gv;
                    let gl = basis.transpose() * &gv;
                    let gnorm = (gu.norm_squared() + gl.norm_squared()).sqrt();
                    if gnorm == 0.0 {
                        break;
                    }
                    let step = 1.0 / (it as f64).sqrt() / gnorm;
                    for (x, g) in u.iter_mut().zip(gu.iter()) {
                        *x += step * g;
                    }
                    for (x, g) in lam.iter_mut().zip(gl.iter()) {
                        *x += step * g;
                    }
                    project_ball(&mut u, norm);
                }
                let v0 = &gt * Vector::from_column_slice(&best_u);
                let polished = polish_lambda(&v0, &basis, &s, &signs, rho)?;
                best_overall = best_overall.max(best_val).max(polished);
            }
        }
    }
    Ok(TauEstimate { value: best_overall.max(0.0), lower_bound: true, norm })
}

pub fn rip_delta(a: &DenseMatrix, s: usize) -> Result<f64> {
    let n = a.ncols();
    if s == 0 || s > n {
        return Err(Error::InvalidInput("RIP order must satisfy 1 <= s <= n".into()));
    }
    let needed = binomial(n, s);
    if needed > ENUM_CAP {
        return Err(Error::TooLarge { what: "RIP support enumeration", needed, cap: ENUM_CAP });
    }
    let mut delta = 0.0_f64;
    for t in combinations(n, s) {
        let sub = a.select_columns(&t);
        let gram = sub.transpose() * &sub;
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let lmax = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lmin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        delta = delta.max(lmax - 1.0).max(1.0 - lmin);
    }
    Ok(delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub value: f64,
    /// Set when the columns had to be normalized first.
    pub normalized: bool,
}

pub fn accumulative_coherence(a: &DenseMatrix, k: usize) -> Coherence {
    let n = a.ncols();
    let mut cols = a.clone();
    let mut normalized = false;
    for j in 0..n {
        let nr = cols.column(j).norm();
        if (nr - 1.0).abs() > 1e-8 && nr > 0.0 {
            cols.column_mut(j).scale_mut(1.0 / nr);
            normalized = true;
        }
    }
    if k == 0 {
        return Coherence { value: 0.0, normalized };
    }
    let gram = cols.transpose() * &cols;
    let mut best = 0.0_f64;
    for i in 0..n {
        let mut inner: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| gram[(i, j)].abs()).collect();
        inner.sort_by(|x, y| y.total_cmp(x));
        best = best.max(inner.iter().take(k).sum());
    }
    Coherence { value: best, normalized }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub eta: Vec<f64>,
    pub w: Vec<f64>,
    pub pair: SupportPair,
}

impl DualCertificate {
    /// Re-checks the certificate invariants from `A` alone.
    pub fn verify(&self, a: &DenseMatrix, tol: f64) -> bool {
        let eta = Vector::from_column_slice(&self.eta);
        let atw = a.transpose() * Vector::from_column_slice(&self.w);
        if (atw - &eta).amax() > tol {
            return false;
        }
        (0..self.eta.len()).all(|i| match self.pair.sign(i) {
            Some(s) => (self.eta[i] - s).abs() <= tol,
            None => self.eta[i].abs() <= 1.0 + tol,
        })
    }
}

pub fn dual_certificate(a: &DesignMatrix, pair: &SupportPair) -> Result<DualCertificate> {
    if pair.n != a.cols() {
        return Err(Error::DimMismatch("pair dimension differs from A".into()));
    }
    match lp::check_feasibility(&certificate_polyhedron(a.a(), pair))? {
        Feasibility::Feasible(w) => {
            let eta = a.a().transpose() * &w;
            Ok(DualCertificate { eta: eta.iter().cloned().collect(), w: w.iter().cloned().collect(), pair: pair.clone() })
        }
        Feasibility::Infeasible(_) => Err(Error::NoCertificate { s1: pair.s1.clone(), s2: pair.s2.clone() }),
    }
}

/// Builds `x̂` with sign pattern `pair` and unit magnitudes and returns it with
/// `‖x̂‖₁ − min{‖x‖₁ : Ax = Ax̂}`.
pub fn necessity_counterexample(a: &DesignMatrix, pair: &SupportPair) -> Result<(Vec<f64>, f64)> {
    let mut x = vec![0.0; a.cols()];
    for &i in &pair.s1 {
        x[i] = 1.0;
    }
    for &i in &pair.s2 {
        x[i] = -1.0;
    }
    let y = a.a() * Vector::from_column_slice(&x);
    let sol = solvers::bp_solve(a, &y)?;
    Ok((x.clone(), linops::norm1(&x) - sol.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySet {
    pub weak_rsp: bool,
    pub rsp: bool,
    pub nsp: bool,
    pub rip: bool,
    pub mu1: bool,
    pub robust: bool,
}

impl PropertySet {
    pub fn all() -> Self {
        Self { weak_rsp: true, rsp: true, nsp: true, rip: true, mu1: true, robust: false }
    }

    /// Parses a comma-separated list such as `weak-rsp,rsp,nsp,rip,mu1,robust`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut s = Self { weak_rsp: false, rsp: false, nsp: false, rip: false, mu1: false, robust: false };
        for item in list.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            match item {
                "weak-rsp" => s.weak_rsp = true,
                "rsp" => s.rsp = true,
                "nsp" => s.nsp = true,
                "rip" => s.rip = true,
                "mu1" => s.mu1 = true,
                "robust" | "robust-nsp" => s.robust = true,
                other => return Err(Error::InvalidInput(format!("unknown property `{other}`"))),
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub k: usize,
    pub weak_rsp: Option<WeakRsp>,
    pub rsp: Option<Rsp>,
    pub nsp: Option<Nsp>,
    pub stable_nsp_rho: Option<Rho>,
    pub robust_nsp_tau: Option<TauEstimate>,
    pub mu1_k: Option<f64>,
    pub mu1_k_minus_1: Option<f64>,
    /// `None` when not requested or beyond the enumeration cap.
    pub rip_delta_2k: Option<f64>,
}

pub fn certify_properties(a: &DesignMatrix, k: usize, props: PropertySet, rho: f64, seed: u64) -> Result<PropertyReport> {
    let nsp = if props.nsp { Some(certify_nsp(a, k)?) } else { None };
    let rip_delta_2k = if props.rip && 2 * k <= a.cols() {
        match rip_delta(a.a(), 2 * k) {
            Ok(d) => Some(d),
            Err(Error::TooLarge { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(PropertyReport {
        k,
        weak_rsp: if props.weak_rsp { Some(certify_weak_rsp(a, k)?) } else { None },
        rsp: if props.rsp { Some(certify_rsp(a, k)?) } else { None },
        stable_nsp_rho: nsp.as_ref().map(Nsp::rho),
        nsp,
        robust_nsp_tau: if props.robust { Some(robust_nsp_tau(a, k, rho, ResidualNorm::L2, seed)?) } else { None },
        mu1_k: props.mu1.then(|| accumulative_coherence(a.a(), k).value),
        mu1_k_minus_1: props.mu1.then(|| accumulative_coherence(a.a(), k - 1).value),
        rip_delta_2k,
    })
}

impl PropertyReport {
    /// Implications of the property chain that fail on this report.
    pub fn chain_violations(&self) -> Vec<&'static str> {
        let mut bad = Vec::new();
        let weak = self.weak_rsp.as_ref().map(WeakRsp::holds);
        let rsp = self.rsp.as_ref().map(Rsp::holds);
        let nsp = self.nsp.as_ref().map(Nsp::holds);
        if rsp == Some(true) && weak == Some(false) {
            bad.push("rsp => weak_rsp");
        }
        if let (Some(r), Some(n)) = (rsp, nsp) {
            if r != n {
                bad.push("nsp <=> rsp");
            }
        }
        if let (Some(rho), Some(false)) = (self.stable_nsp_rho, nsp) {
            if rho.value() < 1.0 - STRICT_TOL {
                bad.push("stable_nsp_rho < 1 => nsp");
            }
        }
        if let (Some(a), Some(b), Some(false)) = (self.mu1_k, self.mu1_k_minus_1, nsp) {
            if a + b < 1.0 {
                bad.push("mu1(k)+mu1(k-1) < 1 => nsp");
            }
        }
        if let (Some(d), Some(false)) = (self.rip_delta_2k, rsp) {
            if d < std::f64::consts::FRAC_1_SQRT_2 {
                bad.push("delta_2k < 1/sqrt2 => rsp");
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(r: usize, c: usize, v: &[f64]) -> DesignMatrix {
        DesignMatrix::new(DenseMatrix::from_row_slice(r, c, v)).unwrap()
    }

    fn pair(s1: &[usize], s2: &[usize], n: usize, k: usize) -> SupportPair {
        SupportPair::new(s1.to_vec(), s2.to_vec(), n, k).unwrap()
    }

    #[test]
    fn combinatorics() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(4, 2)[0], vec![0, 1]);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(pairs_of_size(3, 1, 1).len(), 6);
        let ps = pairs_of_size(4, 2, 2);
        assert!(ps.windows(2).all(|w| report_key(&w[0]) < report_key(&w[1])));
        assert_eq!(ps[0], pair(&[0, 1], &[], 4, 2));
    }

    #[test]
    fn weak_rsp_examples() {
        assert_eq!(certify_weak_rsp(&dm(1, 2, &[1.0, 1.0]), 1).unwrap(), WeakRsp::Holds);
        let a = dm(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(certify_weak_rsp(&a, 1).unwrap(), WeakRsp::Violated(pair(&[2], &[], 3, 1)));
        assert!(matches!(certify_weak_rsp(&a, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rsp_examples() {
        let r = certify_rsp(&dm(1, 2, &[1.0, 1.0]), 1).unwrap();
        assert!(matches!(r, Rsp::Violated { ref pair, .. } if *pair == self::pair(&[0], &[], 2, 1)));
        let s = 1.0 / 2f64.sqrt();
        let a = dm(2, 3, &[1.0, 0.0, s, 0.0, 1.0, s]);
        let rsp = certify_rsp(&a, 1).unwrap();
        let nsp = certify_nsp(&a, 1).unwrap();
        assert_eq!(rsp.holds(), nsp.holds());
    }

    #[test]
    fn rsp_margin_matches_enumeration_oracle() {
        // A = [[1,0,1],[0,1,1]] normalized; η = Aᵀw = (w1, w2, (w1+w2)/√2).
        let s = 1.0 / 2f64.sqrt();
        let a = DenseMatrix::from_row_slice(2, 3, &[1.0, 0.0, s, 0.0, 1.0, s]);
        // Pair ({0}, ∅): w1 = 1, slack 1 − max(|w2|, |1+w2|/√2) maximized at w2 = −1/(1+√2).
        let w2: f64 = -1.0 / (1.0 + 2f64.sqrt());
        let oracle = 1.0 - w2.abs().max((1.0 + w2).abs() * s);
        let t = rsp_margin(&a, &pair(&[0], &[], 3, 1)).unwrap().unwrap();
        assert!((t - oracle).abs() < 1e-9, "{t} vs {oracle}");
    }

    #[test]
    fn nsp_examples() {
        match certify_nsp(&dm(1, 2, &[1.0, 1.0]), 1).unwrap() {
            Nsp::Violated { s, v, rho } => {
                assert_eq!(s, vec![0]);
                assert!((v[0] - 1.0).abs() < 1e-9 && (v[1] + 1.0).abs() < 1e-9);
                assert!((rho.value() - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        match certify_nsp(&dm(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), 1).unwrap() {
            Nsp::Violated { s, v, rho } => {
                assert_eq!(s, vec![2]);
                assert_eq!(rho, Rho::Infinite);
                assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rip_examples() {
        let id = DenseMatrix::identity(2, 2);
        assert!(rip_delta(&id, 1).unwrap().abs() < 1e-12);
        assert!(rip_delta(&id, 2).unwrap().abs() < 1e-12);
        assert!((rip_delta(&DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]), 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_examples() {
        let id = DenseMatrix::identity(3, 3);
        assert_eq!(accumulative_coherence(&id, 2).value, 0.0);
        let a = DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert_eq!(accumulative_coherence(&a, 1).value, 1.0);
        assert_eq!(accumulative_coherence(&a, 0).value, 0.0);
        assert!(accumulative_coherence(&DenseMatrix::from_row_slice(1, 2, &[2.0, 1.0]), 1).normalized);
    }

    #[test]
    fn dual_certificate_examples() {
        let a = dm(1, 2, &[1.0, 1.0]);
        let c = dual_certificate(&a, &pair(&[0], &[], 2, 1)).unwrap();
        assert!((c.eta[0] - 1.0).abs() < 1e-12 && (c.eta[1] - 1.0).abs() < 1e-12 && (c.w[0] - 1.0).abs() < 1e-12);
        assert!(c.verify(a.a(), 1e-8));
        let b = dm(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(dual_certificate(&b, &pair(&[2], &[], 3, 1)), Err(Error::NoCertificate { .. })));
        let z = dual_certificate(&a, &SupportPair::empty(2, 1)).unwrap();
        assert!(z.verify(a.a(), 1e-8));
    }

    #[test]
    fn necessity_example() {
        let a = dm(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let (x, gap) = necessity_counterexample(&a, &pair(&[2], &[], 3, 1)).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 1.0]);
        assert!((gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_projections() {
        let mut u = vec![3.0, -1.0];
        project_ball(&mut u, ResidualNorm::L1);
        assert!((u[0] - 1.0).abs() < 1e-12 && u[1] == 0.0);
        let mut u = vec![0.6, -0.8, 0.5];
        project_ball(&mut u, ResidualNorm::L1);
        assert!((linops::norm1(&u) - 1.0).abs() < 1e-12);
        let mut u = vec![3.0, 4.0];
        project_ball(&mut u, ResidualNorm::L2);
        assert!((u[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn robust_tau_infinite_below_rho_star() {
        // ρ* = 1 for A = [1 1], so any ρ < 1 admits no finite τ.
        let t = robust_nsp_tau(&dm(1, 2, &[1.0, 1.0]), 1, 0.5, ResidualNorm::L2, 1).unwrap();
        assert!(t.value.is_infinite() && t.lower_bound);
    }
}
